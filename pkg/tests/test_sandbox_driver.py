"""Filesystem-level contract of the real sandbox driver: provisioning,
injection, and dependency merging. Server/browser behavior lives in the
secondary acceptance module."""

import json
from pathlib import Path

import pytest

from fesynth.errors import SandboxError
from fesynth.render import job_from_code
from fesynth.sandbox_driver import SandboxDriver

FRONTEND = Path(__file__).parent.parent / "frontend"

needs_template = pytest.mark.skipif(
    not (FRONTEND / "package.json").exists(), reason="frontend template missing"
)

STYLED = (
    "import React from 'react';\n"
    "import styled from 'styled-components';\n"
    "const Box = styled.div`padding: 8px;`;\n"
    "const App = () => <Box>hi</Box>;\n"
    "export default App;\n"
)


@pytest.fixture
def driver(tmp_path):
    return SandboxDriver(FRONTEND, work_root=tmp_path, keep_workdirs=True)


@needs_template
def test_provision_injects_files(driver):
    job = job_from_code("snip-a", ".a { color: red; }", STYLED)
    sandbox = driver.provision(job)
    workdir = Path(sandbox.workdir)
    assert (workdir / "src/injected/Component.jsx").read_text() == STYLED
    assert (workdir / "src/injected/styles.css").read_text() == ".a { color: red; }"
    assert (workdir / "server.mjs").exists()
    assert not (workdir / "node_modules").exists()  # fresh install per sandbox


@needs_template
def test_provision_merges_inferred_dependencies(driver):
    sandbox = driver.provision(job_from_code("snip-b", "", STYLED))
    manifest = json.loads((Path(sandbox.workdir) / "package.json").read_text())
    deps = manifest["dependencies"]
    assert deps["react"] == "18.3.1"  # template pin wins
    assert deps["styled-components"] == "latest"  # inferred addition


@needs_template
def test_dependency_fix_edits_manifest(driver):
    sandbox = driver.provision(job_from_code("snip-c", "", STYLED))
    driver.apply_dependency_fix(sandbox, {"styled-components": "5.3.11", "react-dom": None})
    manifest = json.loads((Path(sandbox.workdir) / "package.json").read_text())
    assert manifest["dependencies"]["styled-components"] == "5.3.11"
    assert "react-dom" not in manifest["dependencies"]
    assert "styled-components" in sandbox.job.dependencies


@needs_template
def test_code_fix_rewrites_injection(driver):
    sandbox = driver.provision(job_from_code("snip-d", "", STYLED))
    driver.apply_code_fix(sandbox, ".fixed{}", "const F = () => <i/>;\nexport default F;")
    assert "const F" in (Path(sandbox.workdir) / "src/injected/Component.jsx").read_text()
    assert (Path(sandbox.workdir) / "src/injected/styles.css").read_text() == ".fixed{}"


@needs_template
def test_distinct_workdirs(driver):
    a = driver.provision(job_from_code("a", "", STYLED))
    b = driver.provision(job_from_code("b", "", STYLED))
    assert a.workdir != b.workdir


@needs_template
def test_teardown_removes_workdir(tmp_path):
    driver = SandboxDriver(FRONTEND, work_root=tmp_path, keep_workdirs=False)
    sandbox = driver.provision(job_from_code("gone", "", STYLED))
    workdir = Path(sandbox.workdir)
    assert workdir.exists()
    driver.teardown(sandbox)
    assert not workdir.exists()


def test_missing_template_rejected(tmp_path):
    with pytest.raises(SandboxError, match="template"):
        SandboxDriver(tmp_path / "nowhere")
