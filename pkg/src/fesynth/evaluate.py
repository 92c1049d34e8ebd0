"""Visual-fidelity pass@k harness: compile -> render -> embedding
similarity gates, the exact unbiased estimator, and the benchmark runner.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .assemble import parse_code_target
from .config import RetryPolicy, SamplingParams, SimilarityPolicy, EvalParams
from .errors import EvalError, ExportError, SandboxError
from .render import job_from_code, render_snippet

STAGE_COMPILE = "compile"
STAGE_RENDER = "render"
STAGE_SIMILARITY = "similarity"
STAGE_PASSED = "passed"

_RENDER_STATUS_TO_STAGE = {
    "install_failed": STAGE_COMPILE,
    "compile_failed": STAGE_COMPILE,
    "render_error": STAGE_RENDER,
    "timeout": STAGE_RENDER,
}


class InfrastructureError(EvalError):
    """The harness (not the solution) failed; the sample is invalid and
    must be regenerated rather than counted incorrect."""


# --- embedding backends ---------------------------------------------------------


class StructuralEmbedding:
    """Deterministic offline backend: mean-centered downsampled luminance
    plus gradient-magnitude cells, L2-normalized. Identical bytes embed
    identically; unrelated captures land well below the match threshold."""

    backend_id = "structural"

    LUMA_GRID = (18, 32)  # rows, cols
    GRAD_GRID = (9, 16)

    @property
    def dimension(self) -> int:
        return self.LUMA_GRID[0] * self.LUMA_GRID[1] + self.GRAD_GRID[0] * self.GRAD_GRID[1]

    def embed(self, image_bytes: bytes) -> np.ndarray:
        try:
            img = Image.open(io.BytesIO(image_bytes)).convert("L")
        except Exception as exc:
            raise EvalError(f"image does not decode: {exc}") from exc
        rows, cols = self.LUMA_GRID
        luma = np.asarray(img.resize((cols, rows), Image.BILINEAR), dtype=np.float64)
        luma_feat = (luma - luma.mean()).ravel()

        grows, gcols = self.GRAD_GRID
        fine = np.asarray(img.resize((gcols * 2, grows * 2), Image.BILINEAR), dtype=np.float64)
        gy, gx = np.gradient(fine)
        magnitude = np.hypot(gx, gy)
        grad_feat = (
            magnitude.reshape(grows, 2, gcols, 2).mean(axis=(1, 3)).ravel()
        )
        grad_feat = grad_feat - grad_feat.mean()

        vec = np.concatenate([luma_feat, grad_feat])
        norm = np.linalg.norm(vec)
        if norm == 0:
            # uniform image: fall back to a fixed unit basis vector
            vec = np.zeros(self.dimension)
            vec[0] = 1.0
            return vec
        return vec / norm


class NeuralEmbedding:
    """Vision-transformer backend (CLS pooling), loaded lazily; pluggable
    via model id. Requires the transformers/torch stack and weights."""

    def __init__(self, model_id: str = "facebook/dinov2-base"):
        self.backend_id = f"neural:{model_id}"
        self.model_id = model_id
        self._model = None
        self._processor = None

    def _load(self):
        if self._model is not None:
            return
        try:
            import torch  # noqa: F401
            from transformers import AutoImageProcessor, AutoModel

            self._processor = AutoImageProcessor.from_pretrained(self.model_id)
            self._model = AutoModel.from_pretrained(self.model_id)
            self._model.eval()
        except Exception as exc:
            raise EvalError(f"neural backend unavailable: {exc}") from exc

    def embed(self, image_bytes: bytes) -> np.ndarray:
        self._load()
        import torch

        try:
            img = Image.open(io.BytesIO(image_bytes)).convert("RGB")
        except Exception as exc:
            raise EvalError(f"image does not decode: {exc}") from exc
        inputs = self._processor(images=img, return_tensors="pt")
        with torch.no_grad():
            out = self._model(**inputs)
        vec = out.last_hidden_state[0, 0].numpy().astype(np.float64)
        norm = np.linalg.norm(vec)
        return vec / norm if norm else vec


def make_backend(backend_id: str):
    if backend_id == "structural":
        return StructuralEmbedding()
    if backend_id.startswith("neural"):
        _prefix, _, model = backend_id.partition(":")
        return NeuralEmbedding(model or "facebook/dinov2-base")
    raise EvalError(f"unknown embedding backend {backend_id!r}")


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EvalError(f"dimension mismatch: {a.shape} vs {b.shape}")
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        raise EvalError("zero vector has no direction")
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


# --- pass@k ------------------------------------------------------------------------


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator 1 - C(n-c, k)/C(n, k), computed exactly."""
    if n < 1:
        raise EvalError(f"n must be >= 1, got {n}")
    if not 0 <= c <= n:
        raise EvalError(f"c must be in [0, n], got c={c}, n={n}")
    if not 1 <= k <= n:
        raise EvalError(f"k must be in [1, n], got k={k}, n={n}")
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    value = 1 - Fraction(math.comb(n - c, k), math.comb(n, k))
    return float(value)


def pass_at_k_exact(n: int, c: int, k: int) -> Fraction:
    if c == 0:
        return Fraction(0)
    if n - c < k:
        return Fraction(1)
    return 1 - Fraction(math.comb(n - c, k), math.comb(n, k))


# --- cases and judging ------------------------------------------------------------


@dataclass
class EvalCase:
    case_id: str
    instruction: str
    reference_image: bytes
    reference_code: str = ""

    def __post_init__(self):
        if not self.instruction.strip():
            raise EvalError(f"case {self.case_id}: instruction is empty")
        try:
            Image.open(io.BytesIO(self.reference_image)).load()
        except Exception as exc:
            raise EvalError(f"case {self.case_id}: reference image does not decode: {exc}")


def load_cases(benchmark_dir: str | Path) -> list[EvalCase]:
    """Benchmark layout: one directory per case holding case.json
    (id, instruction) and reference.png."""
    root = Path(benchmark_dir)
    if not root.is_dir():
        raise EvalError(f"benchmark directory not found: {root}")
    cases = []
    for case_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        meta_path = case_dir / "case.json"
        image_path = case_dir / "reference.png"
        if not meta_path.exists() or not image_path.exists():
            continue
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        reference_code = ""
        code_path = case_dir / "reference.jsx"
        if code_path.exists():
            reference_code = code_path.read_text(encoding="utf-8")
        cases.append(
            EvalCase(
                case_id=str(meta.get("id", case_dir.name)),
                instruction=meta["instruction"],
                reference_image=image_path.read_bytes(),
                reference_code=reference_code,
            )
        )
    if not cases:
        raise EvalError(f"no cases found under {root}")
    return cases


@dataclass
class JudgeResult:
    correct: bool
    stage: str  # failing gate, or "passed"
    similarity: float | None = None
    detail: str = ""


def split_solution(code: str) -> tuple[str, str]:
    """Solutions may arrive in the exported code format or as a bare
    component file."""
    try:
        return parse_code_target(code)
    except ExportError:
        return "", code


_judge_seq = 0


def judge_solution(
    code: str,
    case: EvalCase,
    renderer,
    policy: SimilarityPolicy,
    embedder=None,
    store=None,
    sample_id: str = "",
) -> JudgeResult:
    """Three gates in order: compiles, renders a non-error image, and the
    rendered image strictly exceeds the similarity threshold against the
    reference. Per-sample similarity is recorded even when incorrect."""
    global _judge_seq
    if embedder is None:
        embedder = make_backend(policy.backend)
    _judge_seq += 1
    sid = sample_id or f"eval-{case.case_id}-{_judge_seq}"
    style, component = split_solution(code)
    job = job_from_code(sid, style, component)
    try:
        outcome = render_snippet(
            job, RetryPolicy(n_install=0, m_render=0), None, renderer, store
        )
    except SandboxError as exc:
        raise InfrastructureError(str(exc)) from exc
    if not outcome.success:
        stage = _RENDER_STATUS_TO_STAGE.get(outcome.status, STAGE_RENDER)
        return JudgeResult(correct=False, stage=stage, detail=outcome.status)
    if store is not None:
        rendered = store.get(outcome.screenshot_hash)
    else:
        raise InfrastructureError("judging requires a store for captures")
    score = similarity(embedder.embed(rendered), embedder.embed(case.reference_image))
    if score > policy.threshold:  # strictly exceeds
        return JudgeResult(correct=True, stage=STAGE_PASSED, similarity=score)
    return JudgeResult(correct=False, stage=STAGE_SIMILARITY, similarity=score)


# --- benchmark runner ---------------------------------------------------------------


@dataclass
class CaseReport:
    case_id: str
    n: int
    c: int
    stage_histogram: dict[str, int] = field(default_factory=dict)
    similarities: list[float | None] = field(default_factory=list)
    pass_at: dict[int, float] = field(default_factory=dict)
    complete: bool = True


@dataclass
class EvalReport:
    cases: list[CaseReport]
    aggregate: dict[int, float]
    config_echo: dict
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "cases": [asdict(c) for c in self.cases],
            "aggregate": {str(k): v for k, v in self.aggregate.items()},
            "config": self.config_echo,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        ks = sorted(self.aggregate)
        head = f"{'case':<24} {'n':>4} {'c':>4} " + " ".join(f"pass@{k:<3}" for k in ks)
        lines = [head, "-" * len(head)]
        for report in self.cases:
            row = f"{report.case_id:<24} {report.n:>4} {report.c:>4} "
            row += " ".join(f"{report.pass_at.get(k, float('nan')):8.4f}" for k in ks)
            if not report.complete:
                row += "  (incomplete)"
            lines.append(row)
        lines.append("-" * len(head))
        agg = f"{'aggregate':<24} {'':>4} {'':>4} "
        agg += " ".join(f"{self.aggregate[k]:8.4f}" for k in ks)
        lines.append(agg)
        return "\n".join(lines)


def run_benchmark(
    cases: list[EvalCase],
    solution_provider,
    renderer,
    store,
    similarity_policy: SimilarityPolicy | None = None,
    eval_params: EvalParams | None = None,
    sampling: SamplingParams | None = None,
    max_regenerations: int | None = None,
) -> EvalReport:
    """Draw n samples per case, judge each through the three gates, and
    aggregate per-case pass@k by mean. Infrastructure failures trigger
    resampling; a case that cannot fill its n samples is excluded from the
    aggregate with a warning."""
    if not cases:
        raise EvalError("no cases to evaluate")
    similarity_policy = similarity_policy or SimilarityPolicy()
    eval_params = eval_params or EvalParams()
    sampling = sampling or SamplingParams()
    eval_params.validate()
    similarity_policy.validate()
    embedder = make_backend(similarity_policy.backend)
    n = eval_params.n_samples
    ks = list(eval_params.ks)
    budget_per_case = max_regenerations if max_regenerations is not None else 3 * n

    reports: list[CaseReport] = []
    warnings: list[str] = []
    for case in cases:
        report = CaseReport(case_id=case.case_id, n=n, c=0)
        judged = 0
        attempts = 0
        while judged < n and attempts < budget_per_case:
            attempts += 1
            try:
                code = solution_provider(case.instruction, case.reference_image, sampling)
            except Exception as exc:
                warnings.append(f"case {case.case_id}: provider error: {exc}")
                break
            try:
                result = judge_solution(
                    code,
                    case,
                    renderer,
                    similarity_policy,
                    embedder=embedder,
                    store=store,
                    sample_id=f"{case.case_id}-s{attempts}",
                )
            except InfrastructureError as exc:
                warnings.append(
                    f"case {case.case_id}: infrastructure failure, resampling: {exc}"
                )
                continue
            judged += 1
            report.stage_histogram[result.stage] = (
                report.stage_histogram.get(result.stage, 0) + 1
            )
            report.similarities.append(result.similarity)
            if result.correct:
                report.c += 1
        if judged < n:
            report.complete = False
            report.n = judged
            warnings.append(
                f"case {case.case_id}: incomplete ({judged}/{n} samples), excluded"
            )
        else:
            report.pass_at = {k: pass_at_k(n, report.c, k) for k in ks}
        reports.append(report)

    complete = [r for r in reports if r.complete]
    aggregate = {
        k: (sum(r.pass_at[k] for r in complete) / len(complete)) if complete else 0.0
        for k in ks
    }
    echo = {
        "n_samples": n,
        "ks": ks,
        "similarity_threshold": similarity_policy.threshold,
        "similarity_strict": True,
        "temperature": sampling.temperature,
        "top_p": sampling.top_p,
        "embedding_backend": embedder.backend_id,
    }
    return EvalReport(cases=reports, aggregate=aggregate, config_echo=echo, warnings=warnings)


def similarity_report(case_report: CaseReport, threshold: float = 0.9) -> list[dict]:
    """Samples ranked by similarity descending, with the threshold line
    marked, gallery-style."""
    scored = [
        {"rank": 0, "similarity": s, "above_threshold": s > threshold}
        for s in case_report.similarities
        if s is not None
    ]
    scored.sort(key=lambda r: r["similarity"], reverse=True)
    for i, row in enumerate(scored, start=1):
        row["rank"] = i
    return scored
