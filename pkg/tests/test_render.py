import io
import math

from PIL import Image

from fesynth.config import RetryPolicy
from fesynth.errors import ProviderError
from fesynth.gateway import Gateway, ScriptedProvider
from fesynth.render import (
    StubRenderer,
    StubScript,
    classify_failure,
    infer_dependencies,
    install_deps,
    is_blank,
    job_from_code,
    render_and_capture,
    render_batch,
    render_snippet,
    synthetic_screenshot,
)
from fesynth.store import ArtifactStore

GOOD = "import React from 'react';\nconst Hello = () => <h1>hello</h1>;\nexport default Hello;"
STYLED = "import styled from 'styled-components';\nconst Box = styled.div``;\nconst A = () => <Box/>;\nexport default A;"


def gw(script):
    return Gateway(ScriptedProvider(script), provider_retries=0, backoff_s=0.0)


def job(code=GOOD, style=".h{}", snippet_id="snip-1"):
    return job_from_code(snippet_id, style, code)


# --- dependency inference ------------------------------------------------------


def test_styled_components_inferred():
    assert "styled-components" in infer_dependencies(STYLED)


def test_base_dependencies_only():
    deps = infer_dependencies("const A = () => <div/>;\nexport default A;")
    assert deps == ["react", "react-dom"]


def test_scoped_package_kept_two_segments():
    code = "import { X } from '@mui/material/Button';\nconst A=()=><X/>;\nexport default A;"
    assert "@mui/material" in infer_dependencies(code)


def test_concurrent_sandboxes_distinct(tmp_path):
    renderer = StubRenderer()
    s1 = renderer.provision(job(snippet_id="a"))
    s2 = renderer.provision(job(snippet_id="b"))
    assert s1.port != s2.port
    assert s1.workdir != s2.workdir


# --- install loop -----------------------------------------------------------------


def test_install_first_try():
    renderer = StubRenderer()
    sandbox = renderer.provision(job())
    result = install_deps(sandbox, RetryPolicy(n_install=3), gw([]), renderer)
    assert result.ok and result.retries_used == 0 and result.fixes == []


def test_install_fail_once_then_fix():
    renderer = StubRenderer(scripts={"snip-1": StubScript(install_failures=1)})
    sandbox = renderer.provision(job())
    gateway = gw(['{"styled-components": "5.3.11"}'])
    result = install_deps(sandbox, RetryPolicy(n_install=3), gateway, renderer)
    assert result.ok
    assert result.retries_used == 1
    assert len(result.fixes) == 1


def test_install_budget_law_exact():
    renderer = StubRenderer(scripts={"snip-1": StubScript(install_failures=math.inf)})
    sandbox = renderer.provision(job())
    gateway = gw(['{}'] * 10)
    result = install_deps(sandbox, RetryPolicy(n_install=2), gateway, renderer)
    assert not result.ok
    assert result.retries_used == 2


def test_install_gateway_failure_still_retries():
    renderer = StubRenderer(scripts={"snip-1": StubScript(install_failures=1)})
    sandbox = renderer.provision(job())
    gateway = Gateway(ScriptedProvider([ProviderError("down")] * 5), provider_retries=0)
    result = install_deps(sandbox, RetryPolicy(n_install=2), gateway, renderer)
    assert result.ok
    assert result.retries_used == 1
    assert result.fixes == []  # nothing applied, but the retry happened


# --- render loop ---------------------------------------------------------------------


def fixed_reply(code=GOOD, style=".fixed{}"):
    return f"STYLE:{style}###COMPONENT:{code}"


def installed_sandbox(renderer, j):
    sandbox = renderer.provision(j)
    assert install_deps(sandbox, RetryPolicy(), gw([]), renderer).ok
    return sandbox


def test_render_known_good():
    renderer = StubRenderer()
    sandbox = installed_sandbox(renderer, job())
    outcome = render_and_capture(sandbox, RetryPolicy(), gw([]), renderer)
    assert outcome.success
    assert outcome.render_retries == 0
    assert outcome.screenshot_hash


def test_render_reference_error_fixed_by_gateway():
    bad = GOOD.replace("hello", "RENDER_FAIL")
    renderer = StubRenderer()
    sandbox = installed_sandbox(renderer, job(code=bad))
    gateway = gw([fixed_reply()])
    outcome = render_and_capture(sandbox, RetryPolicy(m_render=3), gateway, renderer)
    assert outcome.success
    assert outcome.render_retries == 1
    assert len(outcome.fixes) == 1


def test_render_budget_law_exact():
    renderer = StubRenderer(scripts={"snip-1": StubScript(render_failures=math.inf)})
    sandbox = installed_sandbox(renderer, job())
    gateway = gw([fixed_reply()] * 10)
    outcome = render_and_capture(sandbox, RetryPolicy(m_render=3), gateway, renderer)
    assert not outcome.success
    assert outcome.render_retries == 3
    assert outcome.status == "render_error"


def test_blank_capture_enters_fix_loop():
    renderer = StubRenderer(scripts={"snip-1": StubScript(blank_captures=1)})
    sandbox = installed_sandbox(renderer, job())
    gateway = gw([fixed_reply()])
    outcome = render_and_capture(sandbox, RetryPolicy(m_render=2), gateway, renderer)
    assert outcome.success
    assert outcome.render_retries == 1


def test_compile_failure_classified():
    bad = GOOD.replace("hello", "COMPILE_FAIL")
    renderer = StubRenderer()
    sandbox = installed_sandbox(renderer, job(code=bad))
    outcome = render_and_capture(sandbox, RetryPolicy(m_render=0), gw([]), renderer)
    assert outcome.status == "compile_failed"


# --- classification -------------------------------------------------------------------


def test_classify_install_marker():
    assert classify_failure(install_log="npm ERR! 404 Not Found") == "install_failed"


def test_classify_build_marker():
    assert classify_failure(build_log="SyntaxError: unexpected token <") == "compile_failed"


def test_classify_blank_capture():
    blank = Image.new("RGB", (1280, 720), (255, 255, 255))
    buf = io.BytesIO()
    blank.save(buf, format="PNG")
    assert classify_failure(capture=buf.getvalue()) == "render_error"


def test_classify_timeout():
    assert classify_failure(ready=False) == "timeout"


def test_classify_unknown_is_render_error():
    assert classify_failure(console_log="something odd happened") == "render_error"


# --- screenshots -----------------------------------------------------------------------


def test_synthetic_screenshot_deterministic_and_valid():
    a = synthetic_screenshot(b"key-1")
    b = synthetic_screenshot(b"key-1")
    c = synthetic_screenshot(b"key-2")
    assert a == b
    assert a != c
    img = Image.open(io.BytesIO(a))
    assert img.size == (1280, 720)
    assert not is_blank(a)


def test_success_screenshot_is_viewport_sized(tmp_path):
    store = ArtifactStore(tmp_path)
    renderer = StubRenderer()
    outcome = render_snippet(job(), RetryPolicy(), gw([]), renderer, store)
    img = Image.open(io.BytesIO(store.get(outcome.screenshot_hash)))
    assert img.size == (1280, 720)
    assert not is_blank(store.get(outcome.screenshot_hash))


# --- batch --------------------------------------------------------------------------------


def test_batch_one_failure_does_not_spread(tmp_path):
    store = ArtifactStore(tmp_path)
    jobs = [
        job(snippet_id="a"),
        job(code=GOOD.replace("hello", "COMPILE_FAIL"), snippet_id="b"),
        job(snippet_id="c"),
    ]
    outcomes = render_batch(jobs, RetryPolicy(m_render=0), gw([]), StubRenderer(), store)
    assert [o.snippet_id for o in outcomes] == ["a", "b", "c"]
    assert [o.success for o in outcomes] == [True, False, True]


def test_batch_serial_equals_parallel(tmp_path):
    store = ArtifactStore(tmp_path)
    jobs = [job(snippet_id=f"s{i}", style=f".s{i}{{}}") for i in range(4)]
    serial = render_batch(jobs, RetryPolicy(), gw([]), StubRenderer(), store, parallelism=1)
    parallel = render_batch(jobs, RetryPolicy(), gw([]), StubRenderer(), store, parallelism=4)
    assert [o.screenshot_hash for o in serial] == [o.screenshot_hash for o in parallel]


def test_batch_empty():
    assert render_batch([], RetryPolicy(), gw([]), StubRenderer()) == []


def test_batch_bounds_parallelism(tmp_path):
    renderer = StubRenderer()
    jobs = [job(snippet_id=f"p{i}") for i in range(6)]
    render_batch(jobs, RetryPolicy(), gw([]), renderer, parallelism=2)
    assert renderer.max_live <= 2


def test_install_failure_short_circuits(tmp_path):
    bad = GOOD.replace("hello", "INSTALL_FAIL")
    outcome = render_snippet(
        job(code=bad), RetryPolicy(n_install=1), gw(["{}", "{}"]), StubRenderer()
    )
    assert outcome.status == "install_failed"
    assert outcome.install_retries == 1
    assert outcome.screenshot_hash == ""
