import json

import pytest
from hypothesis import given, strategies as st

from fesynth.errors import ArtifactNotFoundError, ManifestCorruptError
from fesynth.store import ArtifactStore, Manifest, resume


@pytest.fixture
def store(tmp_path):
    return ArtifactStore(tmp_path / "store")


def test_put_get_round_trip(store):
    digest = store.put(b"hello world")
    assert store.get(digest) == b"hello world"


def test_put_is_deterministic(store):
    assert store.put(b"x") == store.put(b"x")


def test_get_unknown_hash(store):
    with pytest.raises(ArtifactNotFoundError):
        store.get("0" * 64)


def test_artifacts_are_write_once(store):
    digest = store.put(b"abc")
    path = store._object_path(digest)
    before = path.read_bytes()
    store.put(b"abc")
    assert path.read_bytes() == before


@given(data=st.binary(max_size=512))
def test_round_trip_property(tmp_path_factory, data):
    store = ArtifactStore(tmp_path_factory.mktemp("blob"))
    assert store.get(store.put(data)) == data


def test_resume_returns_only_not_done(tmp_path):
    manifest = Manifest(tmp_path / "stage.jsonl")
    items = [f"item-{i}" for i in range(10)]
    for item in items[:7]:
        manifest.mark_done(item)
    pending = resume(items, manifest)
    assert pending == items[7:]


def test_resume_empty_manifest_all_pending(tmp_path):
    manifest = Manifest(tmp_path / "stage.jsonl")
    items = ["a", "b", "c"]
    assert resume(items, manifest) == items


def test_resume_failed_items_rerun(tmp_path):
    manifest = Manifest(tmp_path / "stage.jsonl")
    manifest.mark_failed("a", detail="boom")
    manifest.mark_done("b")
    assert resume(["a", "b"], manifest) == ["a"]


def test_duplicate_record_is_corrupt(tmp_path):
    manifest = Manifest(tmp_path / "stage.jsonl")
    manifest.mark_done("a")
    manifest.mark_done("a")
    with pytest.raises(ManifestCorruptError, match="duplicate"):
        manifest.load()


def test_unparseable_line_is_corrupt(tmp_path):
    path = tmp_path / "stage.jsonl"
    path.write_text('{"id": "a", "status": "done"}\nnot json\n')
    with pytest.raises(ManifestCorruptError):
        Manifest(path).load()


def test_duplicate_work_item_is_corrupt(tmp_path):
    manifest = Manifest(tmp_path / "stage.jsonl")
    with pytest.raises(ManifestCorruptError):
        resume(["a", "a"], manifest)


def test_failed_then_done_is_legal_retry(tmp_path):
    manifest = Manifest(tmp_path / "stage.jsonl")
    manifest.mark_failed("a")
    manifest.mark_done("a")
    state = manifest.load()
    assert state["a"].status == "done"


def test_resume_idempotence_after_interruption(tmp_path):
    """Interrupting and re-running converges on the same done set."""
    items = [f"i{n}" for n in range(6)]

    def run(manifest, fail_at=None):
        for item in resume(items, manifest):
            if item == fail_at:
                return
            manifest.mark_done(item, artifacts=[])

    m1 = Manifest(tmp_path / "interrupted.jsonl")
    run(m1, fail_at="i3")
    run(m1)  # resume
    m2 = Manifest(tmp_path / "clean.jsonl")
    run(m2)
    assert m1.done_ids() == m2.done_ids() == set(items)


def test_done_records_carry_artifacts(tmp_path, store):
    digest = store.put(b"artifact-bytes")
    manifest = Manifest(tmp_path / "stage.jsonl")
    manifest.mark_done("a", artifacts=[digest])
    record = manifest.load()["a"]
    assert record.artifacts == [digest]
    assert store.has(record.artifacts[0])


def test_manifest_lines_are_json_objects(tmp_path):
    manifest = Manifest(tmp_path / "stage.jsonl")
    manifest.mark_done("a")
    manifest.mark_failed("b", detail="x")
    lines = (tmp_path / "stage.jsonl").read_text().splitlines()
    assert all(isinstance(json.loads(line), dict) for line in lines)
