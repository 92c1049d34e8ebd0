import io
import json
import tarfile

import pytest
from hypothesis import given, strategies as st

from fesynth.config import PipelineConfig
from fesynth.errors import FetchError, HarvestError, RateLimitedError
from fesynth.harvest import (
    LocalTarballFetcher,
    RepoRecord,
    SearchCursor,
    fetch_repo,
    filter_repo,
    partition_records,
    search_repos,
)
from fesynth.store import ArtifactStore

FIXTURE_SEARCH_RESPONSE = {
    "total_count": 3,
    "items": [
        {
            "full_name": "acme/react-widgets",
            "name": "react-widgets",
            "stargazers_count": 540,
            "description": "A production React component library",
            "default_branch": "main",
        },
        {
            "full_name": "acme/react-tutorial",
            "name": "react-tutorial",
            "stargazers_count": 900,
            "description": "Step by step course",
            "default_branch": "main",
        },
        {
            "full_name": "tiny/starter",
            "name": "starter",
            "stargazers_count": 3,
            "description": "Skeleton app",
            "default_branch": "master",
        },
    ],
}


class ReplayClient:
    """Replays recorded search payloads; page 2+ is empty."""

    def __init__(self, payload=FIXTURE_SEARCH_RESPONSE, fail_with=None):
        self.payload = payload
        self.fail_with = fail_with

    def search(self, keyword, page):
        if self.fail_with is not None:
            raise self.fail_with
        items = self.payload["items"] if page == 1 else []
        return items, False

    def readme_excerpt(self, full_name):
        return "Install via npm. A demo lives in the docs folder." if "widgets" in full_name else ""


def config(**overrides):
    cfg = PipelineConfig()
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


# --- search ------------------------------------------------------------------------


def test_search_replay_populates_keywords():
    records, cursor = search_repos(ReplayClient(), ["react component library"])
    assert len(records) == 3
    assert all(r.matched_keywords == ["react component library"] for r in records)
    assert cursor is None


def test_search_empty_keywords_rejected():
    with pytest.raises(HarvestError):
        search_repos(ReplayClient(), [])


def test_search_rate_limit_carries_hint():
    client = ReplayClient(fail_with=RateLimitedError("slow down", wait_seconds=42))
    with pytest.raises(RateLimitedError) as err:
        search_repos(client, ["react"])
    assert err.value.wait_seconds == 42


def test_search_cursor_advances_keywords():
    records, cursor = search_repos(ReplayClient(), ["kw-a", "kw-b"], SearchCursor(0, 1))
    assert cursor == SearchCursor(keyword_index=1, page=1)
    records, cursor = search_repos(ReplayClient(), ["kw-a", "kw-b"], cursor)
    assert cursor is None


# --- filtering ----------------------------------------------------------------------


def test_accept_clean_above_threshold():
    record = RepoRecord(full_name="a/lib", stars=11, description="component toolkit")
    assert filter_repo(record, config()).accepted


def test_boundary_ten_stars_rejected():
    record = RepoRecord(full_name="a/lib", stars=10, description="fine")
    verdict = filter_repo(record, config())
    assert not verdict.accepted
    assert any(r.startswith("stars:") for r in verdict.reasons)


def test_blacklist_name_hit():
    record = RepoRecord(full_name="a/react-tutorial", stars=500, description="")
    verdict = filter_repo(record, config())
    assert not verdict.accepted
    assert "blacklist:tutorial" in verdict.reasons
    assert record.blacklist_hits == ["tutorial"]


def test_blacklist_word_boundary_no_false_positive():
    record = RepoRecord(
        full_name="a/demos-free", stars=50, description="demos-free widget kit, exemplary"
    )
    assert filter_repo(record, config()).accepted


def test_blacklist_case_insensitive():
    record = RepoRecord(full_name="a/x", stars=50, description="A LEARN-as-you-go KIT")
    verdict = filter_repo(record, config())
    assert "blacklist:learn" in verdict.reasons


def test_blacklist_readme_hit():
    record = RepoRecord(
        full_name="a/x", stars=50, readme_excerpt="This example walks through setup."
    )
    assert not filter_repo(record, config()).accepted


def test_filter_disabled_blacklist():
    record = RepoRecord(full_name="a/react-tutorial", stars=500)
    cfg = config(blacklist_enabled=False, blacklist=[])
    assert filter_repo(record, cfg).accepted


def test_filter_is_pure():
    record = RepoRecord(full_name="a/x", stars=50, description="demo app")
    cfg = config()
    first = filter_repo(record, cfg)
    second = filter_repo(record, cfg)
    assert first == second


@given(stars=st.integers(0, 200))
def test_partition_is_exact(stars):
    records = [
        RepoRecord(full_name=f"a/r{stars}", stars=stars, description="widget"),
        RepoRecord(full_name="a/tut", stars=200, description="a tutorial"),
    ]
    accepted, rejected = partition_records(records, config())
    assert len(accepted) + len(rejected) == len(records)
    accepted_ids = {r.full_name for r in accepted}
    rejected_ids = {r.full_name for r, _ in rejected}
    assert not accepted_ids & rejected_ids


# --- fetching ------------------------------------------------------------------------


def make_tarball(tmp_path, name="acme__react-widgets.tar.gz", files=None, binary=None):
    files = files or {
        "repo-main/src/App.jsx": "const App = () => <div/>;\nexport default App;",
        "repo-main/src/app.css": ".app { margin: 0; }",
        "repo-main/README.md": "# widgets",
    }
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:gz") as tar:
        for path, text in files.items():
            data = text.encode() if isinstance(text, str) else text
            info = tarfile.TarInfo(path)
            info.size = len(data)
            tar.addfile(info, io.BytesIO(data))
        if binary is not None:
            path, data = binary
            info = tarfile.TarInfo(path)
            info.size = len(data)
            tar.addfile(info, io.BytesIO(data))
    out = tmp_path / name
    out.write_bytes(buf.getvalue())
    return out


def test_fetch_snapshot_three_files(tmp_path):
    make_tarball(tmp_path)
    store = ArtifactStore(tmp_path / "store")
    record = RepoRecord(full_name="acme/react-widgets", stars=50)
    snapshot = fetch_repo(record, LocalTarballFetcher(tmp_path), store)
    assert sorted(snapshot.files) == ["README.md", "src/App.jsx", "src/app.css"]
    assert (snapshot.root / "src/App.jsx").exists()
    assert record.fetch_status == "done"


def test_fetch_binary_listed_not_stored(tmp_path):
    make_tarball(tmp_path, binary=("repo-main/assets/logo.png", b"\x89PNG\x00\x00cafe"))
    store = ArtifactStore(tmp_path / "store")
    record = RepoRecord(full_name="acme/react-widgets", stars=50)
    snapshot = fetch_repo(record, LocalTarballFetcher(tmp_path), store)
    assert "assets/logo.png" not in snapshot.files
    assert any(s["path"] == "assets/logo.png" and s["reason"] == "binary" for s in snapshot.skipped)
    assert not (snapshot.root / "assets/logo.png").exists()


def test_fetch_size_cap(tmp_path):
    big = "x" * 2_000_000
    make_tarball(
        tmp_path,
        files={
            "repo-main/src/App.jsx": "const App = () => <i/>;\nexport default App;",
            "repo-main/bundle.js": big,
        },
    )
    store = ArtifactStore(tmp_path / "store")
    record = RepoRecord(full_name="acme/react-widgets", stars=50)
    snapshot = fetch_repo(record, LocalTarballFetcher(tmp_path), store, max_file_bytes=1_000_000)
    assert snapshot.files == ["src/App.jsx"]
    assert any(s["reason"] == "size-cap" for s in snapshot.skipped)


def test_fetch_vanished_repo(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    record = RepoRecord(full_name="gone/gone", stars=50)
    with pytest.raises(FetchError, match="vanished"):
        fetch_repo(record, LocalTarballFetcher(tmp_path), store)


def test_fetch_snapshot_is_deterministic(tmp_path):
    make_tarball(tmp_path)
    store = ArtifactStore(tmp_path / "store")
    record = RepoRecord(full_name="acme/react-widgets", stars=50)
    s1 = fetch_repo(record, LocalTarballFetcher(tmp_path), store)
    s2 = fetch_repo(record, LocalTarballFetcher(tmp_path), store)
    assert s1.digest == s2.digest


def test_fetch_writes_snapshot_sidecar(tmp_path):
    make_tarball(tmp_path)
    store = ArtifactStore(tmp_path / "store")
    record = RepoRecord(full_name="acme/react-widgets", stars=50)
    snapshot = fetch_repo(record, LocalTarballFetcher(tmp_path), store)
    sidecar = json.loads(
        (snapshot.root.parent / f"{snapshot.digest}.snapshot.json").read_text()
    )
    assert sidecar["repo"] == "acme/react-widgets"
    assert sidecar["files"] == snapshot.files


def test_negative_stars_rejected():
    with pytest.raises(HarvestError):
        RepoRecord(full_name="a/b", stars=-1)
