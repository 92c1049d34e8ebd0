#!/usr/bin/env python3
"""Offline end-to-end pipeline demo.

Builds a tiny fixture repository, then drives every CLI stage with the
scripted provider and the stub renderer: harvest -> extract -> seal ->
synthesize (waterfall) -> render -> describe -> assemble -> export C.
No network, no browser, no model calls.
"""

import io
import json
import sys
import tarfile
import tempfile
from pathlib import Path

from fesynth.cli import main as fesynth_main

REPO_FILES = {
    "widgets-main/src/PricingCard.jsx": (
        "import React, { useState } from 'react';\n"
        "const PricingCard = ({ plan = 'Starter', price = 9 }) => {\n"
        "  const [annual, setAnnual] = useState(false);\n"
        "  return (\n"
        "    <div className=\"pricing-card\">\n"
        "      <h2>{plan}</h2>\n"
        "      <p className=\"price\">${annual ? price * 10 : price}/{annual ? 'yr' : 'mo'}</p>\n"
        "      <button onClick={() => setAnnual(!annual)}>Toggle billing</button>\n"
        "    </div>\n"
        "  );\n"
        "};\n"
        "export default PricingCard;\n"
    ),
    "widgets-main/src/pricing.css": (
        ".pricing-card { border: 1px solid #e2e8f0; border-radius: 12px; padding: 24px; }\n"
        ".price { font-size: 28px; font-weight: 700; }\n"
    ),
    "widgets-main/README.md": "# pricing widgets\n",
}

DESCRIPTION = (
    "The layout presents a single pricing card with a plan heading at the top, "
    "a large bold price line beneath it, and one button at the bottom that "
    "toggles between monthly and annual billing. The card uses generous padding, "
    "a thin rounded border, and a vertical flow with the interactive button as "
    "the only control on the page."
)


def task_plan(n):
    return "\n\n".join(f"- Task {i}  \nImplement feature {i}." for i in range(1, n + 1))


def wf_code(i):
    return (
        f"STYLE:.panel-{i} {{ margin: {i}px; }}"
        f"###COMPONENT:import React from 'react';\n"
        f"const App = () => <div className=\"panel-{i}\">waterfall step {i}</div>;\n"
        "export default App;"
    )


def build_script_file(path: Path) -> None:
    mapping = {
        "mock_inputs": "{}",
        "layout_description": DESCRIPTION,
        "seal_correction": "STYLE:.f{}###COMPONENT:const F = () => <i/>;\nexport default F;",
        "waterfall_system_infer": "- Billing dashboard: a subscription management tool.\n"
        "- Plan catalog: a marketing pricing page.\n"
        "- Usage meter: a consumption overview panel.",
        "waterfall_requirements": "System Overview\nA billing dashboard for small teams.\n\n"
        "Requirements\n- Show current plan\n- Toggle billing period\n- Compare plans",
        "waterfall_layout": "- Header with product name\n- Pricing card grid\n- Footer actions",
        "waterfall_architecture": "Tech Stack\nReact with plain CSS.\n\n"
        "Functionalities\nPlan display and billing toggle.\n\n"
        "Interactions\nToggle updates every card's price.",
        "waterfall_dev_plan": task_plan(10),
        "waterfall_code": [wf_code(i) for i in range(1, 11)],
        "waterfall_code_check": "Passed.",
    }
    path.write_text(json.dumps(mapping, indent=2))


def run(stage_args):
    print(f"\n$ fesynth {' '.join(stage_args)}")
    code = fesynth_main(stage_args)
    if code != 0:
        print(f"stage failed with exit code {code}", file=sys.stderr)
        sys.exit(code)


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="fesynth-demo-"))
    print(f"demo workspace: {workdir}")
    store = workdir / "store"

    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:gz") as tar:
        for path, text in REPO_FILES.items():
            data = text.encode()
            info = tarfile.TarInfo(path)
            info.size = len(data)
            tar.addfile(info, io.BytesIO(data))
    (workdir / "acme__pricing-widgets.tar.gz").write_bytes(buf.getvalue())
    (workdir / "records.json").write_text(
        json.dumps([{"full_name": "acme/pricing-widgets", "stars": 42, "description": "pricing card components"}])
    )
    script_path = workdir / "script.json"
    build_script_file(script_path)
    provider = f"scripted:{script_path}"

    base = ["--store", str(store)]
    run(base + ["harvest", "--records", str(workdir / "records.json"), "--tarball-dir", str(workdir)])
    run(base + ["extract"])
    run(base + ["seal", "--provider", provider])
    run(base + ["synthesize", "--strategy", "waterfall", "--provider", provider])
    run(base + ["render", "--include-seeds", "--provider", "none", "--renderer", "stub"])
    run(base + ["describe", "--include-seeds", "--provider", provider])
    run(base + ["assemble", "--include-seeds", "--recipe", "C", "--out", str(workdir / "dataset")])

    stats = json.loads((store / "stats.json").read_text())
    print("\ndataset stats:")
    print(json.dumps(stats, indent=2))
    print(f"\nartifacts under {workdir}")


if __name__ == "__main__":
    main()
