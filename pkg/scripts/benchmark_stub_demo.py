#!/usr/bin/env python3
"""Visual pass@k benchmark demo on the stub renderer.

Synthesizes two benchmark cases whose reference images come from the stub
renderer itself, evaluates a scripted solution provider with known
per-case correctness, and prints the report table plus a ranked
similarity listing for the first case.
"""

import tempfile
from pathlib import Path

from fesynth.config import EvalParams, RetryPolicy
from fesynth.evaluate import EvalCase, run_benchmark, similarity_report
from fesynth.render import StubRenderer, job_from_code, render_snippet
from fesynth.store import ArtifactStore

GOOD_A = "import React from 'react';\nconst A = () => <h1>dashboard</h1>;\nexport default A;"
GOOD_B = "import React from 'react';\nconst B = () => <h2>settings</h2>;\nexport default B;"
WRONG = "import React from 'react';\nconst W = () => <p>unrelated page</p>;\nexport default W;"
BROKEN = GOOD_A.replace("dashboard", "COMPILE_FAIL")


def reference_image(store, code):
    outcome = render_snippet(
        job_from_code(f"ref-{abs(hash(code))}", "", code),
        RetryPolicy(), None, StubRenderer(), store,
    )
    return store.get(outcome.screenshot_hash)


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="fesynth-bench-"))
    store = ArtifactStore(workdir / "store")
    case_a = EvalCase("dashboard", "Recreate the dashboard page.", reference_image(store, GOOD_A))
    case_b = EvalCase("settings", "Recreate the settings page.", reference_image(store, GOOD_B))

    plans = {
        "dashboard": [GOOD_A, GOOD_A, WRONG, BROKEN, GOOD_A],  # 3/5 correct
        "settings": [GOOD_B, WRONG, WRONG, BROKEN, WRONG],  # 1/5 correct
    }
    counters = {"dashboard": 0, "settings": 0}

    def provider(instruction, image, sampling):
        key = "dashboard" if image == case_a.reference_image else "settings"
        code = plans[key][counters[key] % 5]
        counters[key] += 1
        return code

    report = run_benchmark(
        [case_a, case_b],
        provider,
        StubRenderer(),
        store,
        eval_params=EvalParams(n_samples=5, ks=[1, 3, 5]),
    )
    print(report.table())
    print("\nranked similarities (dashboard):")
    for row in similarity_report(report.cases[0]):
        marker = "above" if row["above_threshold"] else "below"
        print(f"  #{row['rank']}: {row['similarity']:.3f}  ({marker} threshold)")
    out = workdir / "report.json"
    out.write_text(report.to_json())
    print(f"\nreport written to {out}")


if __name__ == "__main__":
    main()
