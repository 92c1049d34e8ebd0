import io
import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from fesynth.config import EvalParams, RetryPolicy, SimilarityPolicy
from fesynth.errors import EvalError, SandboxError
from fesynth.evaluate import (
    EvalCase,
    InfrastructureError,
    StructuralEmbedding,
    judge_solution,
    load_cases,
    pass_at_k,
    run_benchmark,
    similarity,
    similarity_report,
)
from fesynth.render import StubRenderer, job_from_code, render_snippet, synthetic_screenshot
from fesynth.store import ArtifactStore


def enumeration_oracle(n, c, k):
    """Exhaustive subset enumeration: fraction of k-subsets of n samples
    containing at least one of the c correct ones."""
    hits = 0
    total = 0
    for subset in itertools.combinations(range(n), k):
        total += 1
        if any(i < c for i in subset):
            hits += 1
    return Fraction(hits, total)


# --- embeddings ------------------------------------------------------------------


def png_of(array):
    buf = io.BytesIO()
    Image.fromarray(array.astype(np.uint8), "RGB").save(buf, format="PNG")
    return buf.getvalue()


def asymmetric_fixture():
    # bright band top-left, dark elsewhere: rotating 180 deg moves the band
    arr = np.zeros((90, 160, 3))
    arr[:30, :60] = [240, 240, 240]
    arr[60:, 100:] = [40, 10, 10]
    return arr


def test_embed_deterministic():
    emb = StructuralEmbedding()
    data = synthetic_screenshot(b"abc")
    assert np.array_equal(emb.embed(data), emb.embed(data))


def test_embed_unit_norm():
    emb = StructuralEmbedding()
    for key in (b"a", b"b", b"c"):
        vec = emb.embed(synthetic_screenshot(key))
        assert abs(np.linalg.norm(vec) - 1.0) <= 1e-6


def test_embed_rotation_differs():
    emb = StructuralEmbedding()
    arr = asymmetric_fixture()
    original = emb.embed(png_of(arr))
    rotated = emb.embed(png_of(np.rot90(arr, 2)))
    assert similarity(original, rotated) < 0.99


def test_similarity_self_is_one():
    emb = StructuralEmbedding()
    v = emb.embed(synthetic_screenshot(b"self"))
    assert similarity(v, v) == pytest.approx(1.0)


def test_similarity_orthogonal_zero():
    a = np.array([1.0, 0.0])
    b = np.array([0.0, 1.0])
    assert similarity(a, b) == pytest.approx(0.0)


def test_similarity_scale_invariant():
    v = np.array([0.3, -0.2, 0.9])
    assert similarity(v, 2 * v) == pytest.approx(1.0)


def test_similarity_dimension_mismatch():
    with pytest.raises(EvalError):
        similarity(np.ones(3), np.ones(4))


def test_similarity_symmetric_and_bounded():
    rng = np.random.RandomState(0)
    for _ in range(50):
        a, b = rng.randn(16), rng.randn(16)
        s1, s2 = similarity(a, b), similarity(b, a)
        assert s1 == pytest.approx(s2)
        assert -1.0 <= s1 <= 1.0


# --- pass@k --------------------------------------------------------------------------


def test_pass_at_k_all_correct():
    assert pass_at_k(50, 50, 1) == 1.0


def test_pass_at_k_none_correct():
    assert pass_at_k(50, 0, 5) == 0.0


def test_pass_at_k_known_value():
    # n=5, c=2, k=3: 9 of the C(5,3)=10 subsets contain a correct sample
    assert enumeration_oracle(5, 2, 3) == Fraction(9, 10)
    assert pass_at_k(5, 2, 3) == pytest.approx(0.9)


def test_pass_at_k_matches_enumeration_smallscale():
    for n in range(1, 13):
        for c in range(0, n + 1):
            for k in range(1, min(n, 5) + 1):
                from fesynth.evaluate import pass_at_k_exact

                assert pass_at_k_exact(n, c, k) == enumeration_oracle(n, c, k), (n, c, k)


def test_pass_at_1_is_c_over_n():
    for n in (1, 7, 50):
        for c in range(n + 1):
            assert pass_at_k(n, c, 1) == pytest.approx(c / n)


@given(
    n=st.integers(1, 50),
    data=st.data(),
)
@settings(max_examples=60)
def test_pass_at_k_monotone(n, data):
    c = data.draw(st.integers(0, n))
    k = data.draw(st.integers(1, min(n, 5)))
    v = pass_at_k(n, c, k)
    if c < n:
        assert pass_at_k(n, c + 1, k) >= v
    if k < n:
        assert pass_at_k(n, c, k + 1) >= v


def test_pass_at_k_invariant_violations():
    with pytest.raises(EvalError):
        pass_at_k(10, 11, 1)
    with pytest.raises(EvalError):
        pass_at_k(10, 2, 0)
    with pytest.raises(EvalError):
        pass_at_k(10, 2, 11)
    with pytest.raises(EvalError):
        pass_at_k(0, 0, 1)


def test_pass_at_k_monte_carlo_agreement():
    rng = np.random.RandomState(1234)
    n = 50
    for _ in range(5):
        c = int(rng.randint(0, n + 1))
        k = int(rng.randint(1, 6))
        trials = 100_000
        draws = np.argpartition(rng.random((trials, n)), k - 1, axis=1)[:, :k]
        mc = float((draws < c).any(axis=1).mean())
        assert abs(mc - pass_at_k(n, c, k)) < 0.01, (n, c, k)


# --- judging -----------------------------------------------------------------------


GOOD = "import React from 'react';\nconst Hello = () => <h1>hello</h1>;\nexport default Hello;"


def case_for(code, case_id="case-1", store=None, renderer=None):
    """Reference image = stub render of the given code."""
    renderer = renderer or StubRenderer()
    store = store or ArtifactStore.__new__(ArtifactStore)
    outcome_store = {}

    class MemStore:
        def put(self, data):
            import hashlib

            h = hashlib.sha256(data).hexdigest()
            outcome_store[h] = data
            return h

        def get(self, h):
            return outcome_store[h]

    mem = MemStore()
    outcome = render_snippet(job_from_code("ref", "", code), RetryPolicy(), None, renderer, mem)
    return EvalCase(
        case_id=case_id,
        instruction="Recreate the page shown in the design.",
        reference_image=mem.get(outcome.screenshot_hash),
    )


@pytest.fixture
def store(tmp_path):
    return ArtifactStore(tmp_path / "store")


def test_judge_compile_failure_is_compile_stage(store):
    case = case_for(GOOD)
    result = judge_solution(
        GOOD.replace("hello", "COMPILE_FAIL"), case, StubRenderer(), SimilarityPolicy(), store=store
    )
    assert not result.correct
    assert result.stage == "compile"


def test_judge_render_error_is_render_stage(store):
    case = case_for(GOOD)
    result = judge_solution(
        GOOD.replace("hello", "RENDER_FAIL"), case, StubRenderer(), SimilarityPolicy(), store=store
    )
    assert not result.correct
    assert result.stage == "render"


def test_judge_gate_order_compile_first(store):
    # a sample that would both fail compile and mismatch reports compile
    case = case_for(GOOD)
    bad = "const X = () => <div>COMPILE_FAIL totally different content</div>;\nexport default X;"
    result = judge_solution(bad, case, StubRenderer(), SimilarityPolicy(), store=store)
    assert result.stage == "compile"
    assert result.similarity is None


def test_judge_exact_match_correct(store):
    case = case_for(GOOD)
    result = judge_solution(GOOD, case, StubRenderer(), SimilarityPolicy(), store=store)
    assert result.correct
    assert result.similarity == pytest.approx(1.0)


def test_judge_different_render_incorrect_with_similarity(store):
    case = case_for(GOOD)
    other = GOOD.replace("hello", "completely different layout")
    result = judge_solution(other, case, StubRenderer(), SimilarityPolicy(), store=store)
    assert not result.correct
    assert result.stage == "similarity"
    assert result.similarity is not None and result.similarity <= 0.9


class PinnedEmbedder:
    """Maps image bytes to fixed vectors so the threshold logic can be
    tested at chosen similarity values."""

    backend_id = "pinned"

    def __init__(self, table):
        self.table = table

    def embed(self, image_bytes):
        return self.table[image_bytes]


def vectors_with_cosine(target):
    a = np.array([1.0, 0.0])
    b = np.array([target, math.sqrt(1 - target**2)])
    return a, b


def pinned_judgement(store, score):
    """Judge GOOD against a distinct reference with the pair's cosine
    pinned to `score`."""
    case = case_for(GOOD.replace("hello", "reference variant"))
    rendered_bytes = store.get(
        render_snippet(job_from_code("probe", "", GOOD), RetryPolicy(), None, StubRenderer(), store).screenshot_hash
    )
    a, b = vectors_with_cosine(score)
    embedder = PinnedEmbedder({rendered_bytes: a, case.reference_image: b})
    return judge_solution(
        GOOD, case, StubRenderer(), SimilarityPolicy(), embedder=embedder, store=store
    )


@pytest.mark.parametrize("score,expected", [(0.975, True), (0.775, False)])
def test_judge_threshold_strictly_exceeds(store, score, expected):
    result = pinned_judgement(store, score)
    assert result.correct is expected
    assert result.similarity == pytest.approx(score)


def test_judge_threshold_boundary_not_correct(store):
    result = pinned_judgement(store, 0.9)
    assert not result.correct  # exactly 0.9 does not strictly exceed
    assert result.stage == "similarity"


# --- benchmark runner ------------------------------------------------------------------


def scripted_provider(correct_code, wrong_code, pattern_by_instruction):
    """pattern: dict instruction -> list of booleans (True = emit correct)."""
    counters = {}

    def provider(instruction, reference_image, sampling):
        i = counters.get(instruction, 0)
        counters[instruction] = i + 1
        plan = pattern_by_instruction[instruction]
        return correct_code if plan[i % len(plan)] else wrong_code

    return provider


def test_benchmark_two_cases_known_aggregate(store):
    code_a = GOOD
    code_b = GOOD.replace("hello", "case b content")
    case_a = case_for(code_a, case_id="A")
    case_b = case_for(code_b, case_id="B")
    wrong = GOOD.replace("hello", "mismatching page")

    providers = {
        "A": [True, True, True, False, False],  # 3/5
        "B": [True, False, False, False, False],  # 1/5
    }

    counters = {}

    def provider(instruction, reference_image, sampling):
        key = "A" if reference_image == case_a.reference_image else "B"
        i = counters.get(key, 0)
        counters[key] = i + 1
        if providers[key][i]:
            return code_a if key == "A" else code_b
        return wrong

    report = run_benchmark(
        [case_a, case_b],
        provider,
        StubRenderer(),
        store,
        eval_params=EvalParams(n_samples=5, ks=[1]),
    )
    assert report.aggregate[1] == pytest.approx(0.4, abs=1e-9)
    assert report.cases[0].c == 3
    assert report.cases[1].c == 1


def test_benchmark_all_compile_failures(store):
    case = case_for(GOOD)

    def provider(instruction, reference_image, sampling):
        return GOOD.replace("hello", "COMPILE_FAIL")

    report = run_benchmark(
        [case],
        provider,
        StubRenderer(),
        store,
        eval_params=EvalParams(n_samples=5, ks=[1, 3, 5]),
    )
    assert all(v == 0.0 for v in report.aggregate.values())
    assert report.cases[0].stage_histogram == {"compile": 5}


def test_benchmark_degenerate_single_sample(store):
    case = case_for(GOOD)
    report = run_benchmark(
        [case],
        lambda i, r, s: GOOD,
        StubRenderer(),
        store,
        eval_params=EvalParams(n_samples=1, ks=[1]),
    )
    assert report.aggregate[1] == pytest.approx(1.0)


def test_benchmark_histogram_sums_to_n(store):
    case = case_for(GOOD)
    wrong = GOOD.replace("hello", "other")
    flip = {"i": 0}

    def provider(instruction, reference_image, sampling):
        flip["i"] += 1
        return GOOD if flip["i"] % 2 else wrong

    report = run_benchmark(
        [case], provider, StubRenderer(), store, eval_params=EvalParams(n_samples=6, ks=[1])
    )
    assert sum(report.cases[0].stage_histogram.values()) == 6


def test_benchmark_config_echo_defaults(store):
    case = case_for(GOOD)
    report = run_benchmark(
        [case],
        lambda i, r, s: GOOD,
        StubRenderer(),
        store,
        eval_params=EvalParams(n_samples=2, ks=[1]),
    )
    echo = report.config_echo
    assert echo["similarity_threshold"] == 0.9
    assert echo["similarity_strict"] is True
    assert echo["temperature"] == 0.1
    assert echo["top_p"] == 0.95


class FlakyRenderer(StubRenderer):
    def __init__(self, fail_first=1):
        super().__init__()
        self.fail_first = fail_first
        self.provision_calls = 0

    def provision(self, job):
        self.provision_calls += 1
        if self.provision_calls <= self.fail_first:
            raise SandboxError("disk full")
        return super().provision(job)


def test_infrastructure_failure_resamples(store):
    case = case_for(GOOD)
    renderer = FlakyRenderer(fail_first=2)
    report = run_benchmark(
        [case],
        lambda i, r, s: GOOD,
        renderer,
        store,
        eval_params=EvalParams(n_samples=3, ks=[1]),
    )
    assert report.cases[0].complete
    assert report.cases[0].n == 3
    assert report.cases[0].c == 3  # infra failures never counted incorrect
    assert len(report.warnings) == 2


def test_judge_infrastructure_error_raised(store):
    case = case_for(GOOD)
    renderer = FlakyRenderer(fail_first=1)
    with pytest.raises(InfrastructureError):
        judge_solution(GOOD, case, renderer, SimilarityPolicy(), store=store)


def test_provider_exhaustion_marks_case_incomplete(store):
    case_ok = case_for(GOOD, case_id="ok")
    case_bad = case_for(GOOD.replace("hello", "bad ref"), case_id="dead")

    def provider(instruction, reference_image, sampling):
        if reference_image == case_bad.reference_image:
            raise RuntimeError("provider out of quota")
        return GOOD

    report = run_benchmark(
        [case_ok, case_bad],
        provider,
        StubRenderer(),
        store,
        eval_params=EvalParams(n_samples=2, ks=[1]),
    )
    by_id = {c.case_id: c for c in report.cases}
    assert by_id["ok"].complete
    assert not by_id["dead"].complete
    assert any("dead" in w for w in report.warnings)
    # aggregate covers only the complete case
    assert report.aggregate[1] == pytest.approx(1.0)


# --- similarity report -------------------------------------------------------------


def test_similarity_report_ranked():
    from fesynth.evaluate import CaseReport

    report = CaseReport(case_id="x", n=3, c=1, similarities=[0.880, 0.975, 0.775])
    rows = similarity_report(report, threshold=0.9)
    assert [r["similarity"] for r in rows] == [0.975, 0.880, 0.775]
    assert [r["above_threshold"] for r in rows] == [True, False, False]
    assert [r["rank"] for r in rows] == [1, 2, 3]


def test_similarity_report_all_below():
    from fesynth.evaluate import CaseReport

    report = CaseReport(case_id="x", n=2, c=0, similarities=[0.1, 0.2])
    rows = similarity_report(report)
    assert all(not r["above_threshold"] for r in rows)


def test_similarity_report_empty():
    from fesynth.evaluate import CaseReport

    assert similarity_report(CaseReport(case_id="x", n=0, c=0)) == []


# --- case loading -----------------------------------------------------------------------


def test_load_cases_round_trip(tmp_path):
    bench = tmp_path / "bench"
    for cid in ("c1", "c2"):
        d = bench / cid
        d.mkdir(parents=True)
        (d / "case.json").write_text(json.dumps({"id": cid, "instruction": "Build the page."}))
        (d / "reference.png").write_bytes(synthetic_screenshot(cid.encode()))
    cases = load_cases(bench)
    assert [c.case_id for c in cases] == ["c1", "c2"]


def test_load_cases_missing_dir(tmp_path):
    with pytest.raises(EvalError):
        load_cases(tmp_path / "nope")


def test_case_requires_decodable_image():
    with pytest.raises(EvalError):
        EvalCase(case_id="x", instruction="draw", reference_image=b"not a png")
