"""Real renderer: drives the boilerplate sandbox app (Node dev server) and
a headless browser to install, serve, settle, and capture snippets.

Implements the same contract as the stub renderer, so the pipeline swaps
between them freely.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import tempfile
import threading
import time
from pathlib import Path

from .browser import HeadlessBrowser, find_browser
from .config import VIEWPORT
from .errors import SandboxError
from .render import RenderAttempt, RenderJob, Sandbox

READY_PREFIX = "SANDBOX_READY"

COMPONENT_FILE = "src/injected/Component.jsx"
STYLE_FILE = "src/injected/styles.css"

_IGNORE_DIRS = {"node_modules", "dist", ".vite"}


class SandboxDriver:
    """One working directory + dev-server process + browser page per job."""

    def __init__(
        self,
        template_dir: str | Path,
        work_root: str | Path | None = None,
        node_bin: str = "node",
        npm_bin: str = "npm",
        install_timeout: float = 300.0,
        render_timeout: float = 180.0,
        settle_interval: float = 0.5,
        keep_workdirs: bool = False,
    ):
        self.template_dir = Path(template_dir)
        if not (self.template_dir / "package.json").exists():
            raise SandboxError(f"sandbox template missing at {self.template_dir}")
        self.work_root = Path(work_root) if work_root else None
        self.node_bin = node_bin
        self.npm_bin = npm_bin
        self.install_timeout = install_timeout
        self.render_timeout = render_timeout
        self.settle_interval = settle_interval
        self.keep_workdirs = keep_workdirs
        self._servers: dict[str, subprocess.Popen] = {}
        self._lock = threading.Lock()
        self._counter = 0

    # --- provisioning -----------------------------------------------------

    def provision(self, job: RenderJob) -> Sandbox:
        with self._lock:
            self._counter += 1
            index = self._counter
        workdir = Path(
            tempfile.mkdtemp(prefix=f"sandbox-{index:04d}-", dir=self.work_root)
        )
        shutil.copytree(
            self.template_dir,
            workdir,
            dirs_exist_ok=True,
            ignore=shutil.ignore_patterns(*_IGNORE_DIRS),
        )
        sandbox = Sandbox(
            sandbox_id=f"sb-{index:04d}-{job.snippet_id[:24]}",
            job=job,
            workdir=str(workdir),
        )
        self._write_injection(sandbox)
        self._merge_dependencies(sandbox)
        return sandbox

    def _write_injection(self, sandbox: Sandbox) -> None:
        workdir = Path(sandbox.workdir)
        component = workdir / COMPONENT_FILE
        component.parent.mkdir(parents=True, exist_ok=True)
        component.write_text(sandbox.job.component_code, encoding="utf-8")
        (workdir / STYLE_FILE).write_text(sandbox.job.style_code or "", encoding="utf-8")

    def _merge_dependencies(self, sandbox: Sandbox) -> None:
        manifest_path = Path(sandbox.workdir) / "package.json"
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        deps = manifest.setdefault("dependencies", {})
        for name in sandbox.job.dependencies:
            deps.setdefault(name, "latest")
        manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")

    # --- install ------------------------------------------------------------

    def install(self, sandbox: Sandbox, timeout: float | None = None) -> tuple[bool, str]:
        self._merge_dependencies(sandbox)
        try:
            proc = subprocess.run(
                [self.npm_bin, "install", "--no-audit", "--no-fund"],
                cwd=sandbox.workdir,
                capture_output=True,
                text=True,
                timeout=timeout or self.install_timeout,
            )
        except subprocess.TimeoutExpired as exc:
            return False, f"npm ERR! install timed out after {exc.timeout}s"
        except FileNotFoundError as exc:
            raise SandboxError(f"package installer missing: {exc}") from exc
        log = proc.stdout + "\n" + proc.stderr
        return proc.returncode == 0, log

    def apply_dependency_fix(self, sandbox: Sandbox, edits: dict) -> None:
        manifest_path = Path(sandbox.workdir) / "package.json"
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        deps = manifest.setdefault("dependencies", {})
        job_deps = dict.fromkeys(sandbox.job.dependencies)
        for name, version in edits.items():
            if version is None:
                deps.pop(name, None)
                job_deps.pop(name, None)
            else:
                deps[name] = str(version)
                job_deps[name] = str(version)
        sandbox.job.dependencies = list(job_deps)
        manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")

    def apply_code_fix(self, sandbox: Sandbox, style: str, component: str) -> None:
        sandbox.job.style_code = style
        sandbox.job.component_code = component
        self._write_injection(sandbox)

    # --- render -----------------------------------------------------------------

    def _start_server(self, sandbox: Sandbox, timeout: float) -> tuple[subprocess.Popen, int, list[str]]:
        proc = subprocess.Popen(
            [self.node_bin, "server.mjs"],
            cwd=sandbox.workdir,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            text=True,
        )
        self._servers[sandbox.sandbox_id] = proc
        lines: list[str] = []
        port = 0
        deadline = time.monotonic() + timeout
        assert proc.stdout is not None
        while time.monotonic() < deadline:
            if proc.poll() is not None:
                break
            line = proc.stdout.readline()
            if not line:
                continue
            lines.append(line.rstrip())
            if line.startswith(READY_PREFIX):
                try:
                    port = int(line.split()[1])
                except (IndexError, ValueError):
                    port = 0
                break
        return proc, port, lines

    def _stop_server(self, sandbox: Sandbox) -> None:
        proc = self._servers.pop(sandbox.sandbox_id, None)
        if proc and proc.poll() is None:
            proc.terminate()
            try:
                proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                proc.kill()

    _MARKER_PROBE = (
        "(() => {"
        " const e = document.querySelector('[data-render-error]');"
        " if (e) return 'error:' + (e.getAttribute('data-render-error') || 'unknown');"
        " const r = document.querySelector('[data-render-ready]');"
        " return r ? 'ready' : 'pending';"
        "})()"
    )
    _CONSOLE_PROBE = (
        "(window.__sandbox_errors && window.__sandbox_errors.length)"
        " ? window.__sandbox_errors.join('\\n') : ''"
    )

    def render(self, sandbox: Sandbox, timeout: float | None = None) -> RenderAttempt:
        if find_browser() is None:
            raise SandboxError("no headless browser available for capture")
        timeout = timeout or self.render_timeout
        proc, port, lines = self._start_server(sandbox, timeout)
        build_log = "\n".join(lines)
        if not port:
            self._stop_server(sandbox)
            exited = proc.poll() is not None
            return RenderAttempt(
                ok=False,
                build_log=build_log or ("dev server exited" if exited else "no ready line"),
                ready=False,
            )
        sandbox.port = port
        sandbox.state = "serving"
        browser = None
        try:
            browser = HeadlessBrowser(viewport=VIEWPORT)
            browser.navigate(f"http://127.0.0.1:{port}/render")
            status = "pending"
            deadline = time.monotonic() + timeout
            while time.monotonic() < deadline:
                try:
                    status = browser.evaluate(self._MARKER_PROBE) or "pending"
                except SandboxError:
                    status = "pending"
                if status != "pending":
                    break
                time.sleep(0.25)
            console_log = ""
            try:
                console_log = browser.evaluate(self._CONSOLE_PROBE) or ""
            except SandboxError:
                pass
            if status.startswith("error:"):
                return RenderAttempt(
                    ok=False,
                    build_log=build_log,
                    console_log=f"data-render-error {status[6:]}\n{console_log}".strip(),
                    ready=True,
                )
            if status != "ready":
                return RenderAttempt(
                    ok=False, build_log=build_log, console_log=console_log, ready=False
                )
            browser.disable_animations()
            png = self._settled_screenshot(browser)
            return RenderAttempt(
                ok=True, png=png, build_log=build_log, console_log=console_log, ready=True
            )
        finally:
            if browser is not None:
                browser.terminate()
            self._stop_server(sandbox)

    def _settled_screenshot(self, browser: HeadlessBrowser, max_frames: int = 8) -> bytes:
        previous = browser.screenshot_png()
        for _ in range(max_frames):
            time.sleep(self.settle_interval)
            current = browser.screenshot_png()
            if current == previous:
                return current
            previous = current
        return previous

    def teardown(self, sandbox: Sandbox) -> None:
        self._stop_server(sandbox)
        if not self.keep_workdirs and sandbox.workdir and Path(sandbox.workdir).exists():
            shutil.rmtree(sandbox.workdir, ignore_errors=True)
