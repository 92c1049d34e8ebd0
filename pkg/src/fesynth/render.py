"""Render sandboxing: dependency install and render/capture with the
self-reflective retry loops, plus a deterministic stub renderer so the
whole pipeline runs without external processes.
"""

from __future__ import annotations

import hashlib
import io
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .config import VIEWPORT, RetryPolicy
from .errors import GatewayError, ResponseParseError, SandboxError
from .extract import parse_imports
from .parsers import parse_json_object
from .seal import SealedSnippet

STATUS_SUCCESS = "success"
STATUS_INSTALL_FAILED = "install_failed"
STATUS_COMPILE_FAILED = "compile_failed"
STATUS_RENDER_ERROR = "render_error"
STATUS_TIMEOUT = "timeout"

BASE_DEPENDENCIES = ("react", "react-dom")


@dataclass
class RenderJob:
    snippet_id: str
    style_code: str
    component_code: str
    dependencies: list[str] = field(default_factory=list)


def job_from_snippet(snippet: SealedSnippet) -> RenderJob:
    return RenderJob(
        snippet_id=snippet.id,
        style_code=snippet.style_code,
        component_code=snippet.component_code,
        dependencies=infer_dependencies(snippet.component_code),
    )


def job_from_code(snippet_id: str, style_code: str, component_code: str) -> RenderJob:
    return RenderJob(
        snippet_id=snippet_id,
        style_code=style_code,
        component_code=component_code,
        dependencies=infer_dependencies(component_code),
    )


def infer_dependencies(component_code: str) -> list[str]:
    """Package dependencies implied by the snippet's bare imports, merged
    with the template's base set."""
    deps = set(BASE_DEPENDENCIES)
    for imp in parse_imports(component_code):
        spec = imp.specifier
        if spec.startswith(".") or spec.startswith("/"):
            continue
        # scoped packages keep two segments, others one
        parts = spec.split("/")
        deps.add("/".join(parts[:2]) if spec.startswith("@") else parts[0])
    return sorted(deps)


@dataclass
class Sandbox:
    sandbox_id: str
    job: RenderJob
    state: str = "provisioned"  # provisioned|installed|serving|captured|failed
    port: int = 0
    workdir: str = ""


@dataclass
class RenderAttempt:
    ok: bool
    png: bytes | None = None
    build_log: str = ""
    console_log: str = ""
    ready: bool = False


@dataclass
class RenderOutcome:
    snippet_id: str
    status: str
    screenshot_hash: str = ""
    install_log: str = ""
    build_log: str = ""
    console_log: str = ""
    install_retries: int = 0
    render_retries: int = 0
    fixes: list[str] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == STATUS_SUCCESS


# --- failure classification --------------------------------------------------

_INSTALL_MARKERS = (
    "npm ERR!",
    "ERESOLVE",
    "ENOTFOUND",
    "ETIMEDOUT",
    "Could not resolve dependency",
    "404 Not Found",
    "EAI_AGAIN",
)
_BUILD_MARKERS = (
    "SyntaxError",
    "Module not found",
    "Failed to compile",
    "Parse error",
    "Unexpected token",
    "Cannot find module",
    "Transform failed",
)
_RUNTIME_MARKERS = (
    "Uncaught",
    "ReferenceError",
    "TypeError",
    "is not defined",
    "data-render-error",
    "Minified React error",
)


def is_blank(png: bytes | None) -> bool:
    """A capture is blank when it decodes to a single uniform color."""
    if not png:
        return True
    try:
        img = Image.open(io.BytesIO(png)).convert("RGB")
    except Exception:
        return True
    extrema = img.getextrema()
    return all(lo == hi for lo, hi in extrema)


def screenshot_valid(png: bytes | None, viewport=VIEWPORT) -> bool:
    if not png:
        return False
    try:
        img = Image.open(io.BytesIO(png))
        img.load()
    except Exception:
        return False
    return img.size == viewport and not is_blank(png)


def classify_failure(
    install_log: str = "",
    build_log: str = "",
    console_log: str = "",
    capture: bytes | None = None,
    ready: bool = True,
) -> str:
    """Deterministic mapping from logs/capture to the failure taxonomy;
    unknown patterns map to render_error."""
    if any(m in install_log for m in _INSTALL_MARKERS):
        return STATUS_INSTALL_FAILED
    if any(m in build_log for m in _BUILD_MARKERS):
        return STATUS_COMPILE_FAILED
    if any(m in console_log for m in _RUNTIME_MARKERS):
        return STATUS_RENDER_ERROR
    if capture is not None and is_blank(capture):
        return STATUS_RENDER_ERROR
    if not ready:
        return STATUS_TIMEOUT
    return STATUS_RENDER_ERROR


# --- retry loops ----------------------------------------------------------------


@dataclass
class InstallResult:
    ok: bool
    retries_used: int
    fixes: list[str]
    log: str


def install_deps(sandbox: Sandbox, policy: RetryPolicy, gateway, renderer) -> InstallResult:
    """Install with at most n_install retries beyond the first attempt;
    each retry is preceded by a log-driven dependency fix suggestion."""
    fixes: list[str] = []
    log = ""
    retries = 0
    while True:
        ok, log = renderer.install(sandbox, timeout=policy.per_attempt_timeout)
        if ok:
            sandbox.state = "installed"
            return InstallResult(ok=True, retries_used=retries, fixes=fixes, log=log)
        if retries >= policy.n_install:
            sandbox.state = "failed"
            return InstallResult(ok=False, retries_used=retries, fixes=fixes, log=log)
        retries += 1
        edits = _suggest_dependency_edits(sandbox, log, gateway)
        if edits:
            renderer.apply_dependency_fix(sandbox, edits)
            fixes.append(f"dependencies: {edits}")


def _suggest_dependency_edits(sandbox: Sandbox, log: str, gateway) -> dict:
    if gateway is None:
        return {}
    try:
        exchange = gateway.complete(
            "install_fix",
            {
                "dependencies": ", ".join(sandbox.job.dependencies),
                "install_log": log[-4000:],
            },
        )
        return parse_json_object(str(exchange.parsed))
    except (GatewayError, ResponseParseError):
        return {}


def render_and_capture(
    sandbox: Sandbox, policy: RetryPolicy, gateway, renderer, store=None
) -> RenderOutcome:
    """Serve, settle, capture; on compile errors, runtime errors, or blank
    pages, apply agent code fixes and retry up to m_render times."""
    if sandbox.state != "installed":
        raise SandboxError(f"sandbox {sandbox.sandbox_id} is not installed")
    job = sandbox.job
    retries = 0
    fixes: list[str] = []
    attempt = RenderAttempt(ok=False)
    while True:
        attempt = renderer.render(sandbox, timeout=policy.per_attempt_timeout)
        blank = attempt.ok and not screenshot_valid(attempt.png)
        if attempt.ok and not blank:
            sandbox.state = "captured"
            digest = store.put(attempt.png) if store is not None else hashlib.sha256(attempt.png).hexdigest()
            return RenderOutcome(
                snippet_id=job.snippet_id,
                status=STATUS_SUCCESS,
                screenshot_hash=digest,
                build_log=attempt.build_log,
                console_log=attempt.console_log,
                render_retries=retries,
                fixes=fixes,
            )
        status = classify_failure(
            build_log=attempt.build_log,
            console_log=attempt.console_log,
            capture=attempt.png if attempt.ok else None,
            ready=attempt.ready or attempt.ok,
        )
        if retries >= policy.m_render:
            sandbox.state = "failed"
            return RenderOutcome(
                snippet_id=job.snippet_id,
                status=status,
                build_log=attempt.build_log,
                console_log=attempt.console_log,
                render_retries=retries,
                fixes=fixes,
            )
        retries += 1
        corrected = _suggest_code_fix(job, attempt, status, gateway)
        if corrected is not None:
            style, component = corrected
            renderer.apply_code_fix(sandbox, style, component)
            fixes.append(f"attempt {retries}: rewrote component ({len(component)} chars)")


def _suggest_code_fix(job: RenderJob, attempt: RenderAttempt, status: str, gateway):
    if gateway is None:
        return None
    error_log = f"[{status}]\n{attempt.build_log}\n{attempt.console_log}"[-4000:]
    try:
        exchange = gateway.complete(
            "render_fix",
            {
                "component_code": job.component_code,
                "style_code": job.style_code,
                "error_log": error_log,
            },
        )
        return exchange.parsed
    except (GatewayError, ResponseParseError):
        return None


def render_snippet(
    snippet: SealedSnippet | RenderJob,
    policy: RetryPolicy,
    gateway,
    renderer,
    store=None,
) -> RenderOutcome:
    """provision -> install (with retries) -> render/capture (with retries),
    tearing the sandbox down afterward."""
    job = snippet if isinstance(snippet, RenderJob) else job_from_snippet(snippet)
    sandbox = renderer.provision(job)
    try:
        install = install_deps(sandbox, policy, gateway, renderer)
        if not install.ok:
            return RenderOutcome(
                snippet_id=job.snippet_id,
                status=STATUS_INSTALL_FAILED,
                install_log=install.log,
                install_retries=install.retries_used,
                fixes=install.fixes,
            )
        outcome = render_and_capture(sandbox, policy, gateway, renderer, store)
        outcome.install_log = install.log
        outcome.install_retries = install.retries_used
        outcome.fixes = install.fixes + outcome.fixes
        return outcome
    finally:
        renderer.teardown(sandbox)


def render_batch(
    snippets,
    policy: RetryPolicy,
    gateway,
    renderer,
    store=None,
    parallelism: int = 1,
) -> list[RenderOutcome]:
    """Outcomes in input order; at most `parallelism` live sandboxes; one
    snippet's failure never affects another's outcome."""
    if parallelism < 1:
        raise SandboxError("parallelism must be >= 1")
    if not snippets:
        return []

    def run(snippet):
        try:
            return render_snippet(snippet, policy, gateway, renderer, store)
        except SandboxError as exc:
            sid = snippet.snippet_id if isinstance(snippet, RenderJob) else snippet.id
            return RenderOutcome(
                snippet_id=sid, status=STATUS_RENDER_ERROR, console_log=f"infrastructure: {exc}"
            )

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run, snippets))


# --- deterministic stub renderer ---------------------------------------------------


def synthetic_screenshot(key: bytes, viewport=VIEWPORT) -> bytes:
    """Deterministic non-uniform PNG derived from `key`: a coarse grid of
    seeded colors, so identical code yields identical pixels and different
    code yields uncorrelated ones."""
    digest = hashlib.sha256(key).digest()
    rng = np.random.RandomState(int.from_bytes(digest[:4], "big"))
    width, height = viewport
    grid = rng.randint(0, 256, size=(18, 32, 3), dtype=np.uint8)
    img = np.repeat(np.repeat(grid, math.ceil(height / 18), axis=0), math.ceil(width / 32), axis=1)
    img = img[:height, :width, :]
    buf = io.BytesIO()
    Image.fromarray(img, "RGB").save(buf, format="PNG")
    return buf.getvalue()


@dataclass
class StubScript:
    """Per-snippet scripted behavior for the stub renderer."""

    install_failures: float = 0  # attempts that fail before success (inf = always)
    render_failures: float = 0
    blank_captures: float = 0  # ok renders that capture a uniform image
    build_error: str = "SyntaxError: Unexpected token"
    console_error: str = "ReferenceError: widget is not defined"
    install_error: str = "npm ERR! code ERESOLVE could not resolve"


INSTALL_FAIL_MARKER = "INSTALL_FAIL"
COMPILE_FAIL_MARKER = "COMPILE_FAIL"
RENDER_FAIL_MARKER = "RENDER_FAIL"
BLANK_RENDER_MARKER = "BLANK_RENDER"


class StubRenderer:
    """Scripted fake implementing the renderer contract with zero external
    processes.

    Failure behavior comes from per-id StubScripts, or from markers
    embedded in the job's component code (INSTALL_FAIL, COMPILE_FAIL,
    RENDER_FAIL, BLANK_RENDER), so gateway-suggested code fixes that drop
    a marker genuinely repair the render.
    """

    def __init__(self, scripts: dict[str, StubScript] | None = None):
        self.scripts = scripts or {}
        self._counters: dict[str, dict[str, int]] = {}
        self._lock = threading.Lock()
        self._live = 0
        self.max_live = 0
        self._next_port = 42000

    def _count(self, sandbox_id: str, kind: str) -> int:
        with self._lock:
            c = self._counters.setdefault(sandbox_id, {})
            c[kind] = c.get(kind, 0) + 1
            return c[kind]

    def provision(self, job: RenderJob) -> Sandbox:
        with self._lock:
            self._live += 1
            self.max_live = max(self.max_live, self._live)
            port = self._next_port
            self._next_port += 1
        return Sandbox(
            sandbox_id=f"stub-{hashlib.sha256(job.snippet_id.encode()).hexdigest()[:12]}",
            job=job,
            port=port,
            workdir=f"<stub:{job.snippet_id}>",
        )

    def teardown(self, sandbox: Sandbox) -> None:
        with self._lock:
            self._live -= 1

    def _script(self, job: RenderJob) -> StubScript:
        return self.scripts.get(job.snippet_id, StubScript())

    def install(self, sandbox: Sandbox, timeout: float | None = None) -> tuple[bool, str]:
        script = self._script(sandbox.job)
        attempt = self._count(sandbox.sandbox_id, "install")
        if attempt <= script.install_failures or INSTALL_FAIL_MARKER in sandbox.job.component_code:
            return False, f"{script.install_error} (attempt {attempt})"
        return True, f"added {len(sandbox.job.dependencies)} packages (attempt {attempt})"

    def apply_dependency_fix(self, sandbox: Sandbox, edits: dict) -> None:
        deps = dict.fromkeys(sandbox.job.dependencies)
        for name, version in edits.items():
            if version is None:
                deps.pop(name, None)
            else:
                deps[name] = version
        sandbox.job.dependencies = list(deps)

    def apply_code_fix(self, sandbox: Sandbox, style: str, component: str) -> None:
        sandbox.job.style_code = style
        sandbox.job.component_code = component

    def render(self, sandbox: Sandbox, timeout: float | None = None) -> RenderAttempt:
        script = self._script(sandbox.job)
        code = sandbox.job.component_code
        attempt = self._count(sandbox.sandbox_id, "render")
        if COMPILE_FAIL_MARKER in code:
            return RenderAttempt(ok=False, build_log=script.build_error, ready=False)
        if attempt <= script.render_failures:
            return RenderAttempt(ok=False, console_log=script.console_error, ready=True)
        if RENDER_FAIL_MARKER in code:
            return RenderAttempt(ok=False, console_log=script.console_error, ready=True)
        if attempt <= script.render_failures + script.blank_captures or BLANK_RENDER_MARKER in code:
            blank = Image.new("RGB", VIEWPORT, (255, 255, 255))
            buf = io.BytesIO()
            blank.save(buf, format="PNG")
            return RenderAttempt(ok=True, png=buf.getvalue(), ready=True)
        png = synthetic_screenshot(
            (sandbox.job.style_code + "\n" + sandbox.job.component_code).encode("utf-8")
        )
        return RenderAttempt(ok=True, png=png, ready=True)
