"""Content-addressed artifact store and crash-safe stage manifests.

Artifacts are write-once files keyed by the hex SHA-256 of their bytes.
Manifests are line-delimited JSON event logs, one record per line, so an
interrupted stage can resume by replaying completions.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ArtifactNotFoundError, ManifestCorruptError, StoreError

STATUS_PENDING = "pending"
STATUS_DONE = "done"
STATUS_FAILED = "failed"
_STATUSES = (STATUS_PENDING, STATUS_DONE, STATUS_FAILED)

# Forward-only transitions; anything else in a log is corruption.
_ALLOWED_TRANSITIONS = {
    (STATUS_PENDING, STATUS_DONE),
    (STATUS_PENDING, STATUS_FAILED),
    (STATUS_FAILED, STATUS_PENDING),
    (STATUS_FAILED, STATUS_DONE),
    (STATUS_FAILED, STATUS_FAILED),
}


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class ArtifactStore:
    """Immutable blob store under <root>/objects/aa/bb/<hash>."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.objects_dir = self.root / "objects"
        self.objects_dir.mkdir(parents=True, exist_ok=True)

    def _object_path(self, digest: str) -> Path:
        if len(digest) != 64 or any(c not in "0123456789abcdef" for c in digest):
            raise StoreError(f"not a hex sha-256 digest: {digest!r}")
        return self.objects_dir / digest[:2] / digest[2:4] / digest

    def put(self, data: bytes) -> str:
        digest = sha256_hex(data)
        path = self._object_path(digest)
        if path.exists():
            return digest
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp.{os.getpid()}.{threading.get_ident()}")
        tmp.write_bytes(data)
        os.replace(tmp, path)  # atomic; concurrent writers agree on content
        return digest

    def put_text(self, text: str) -> str:
        return self.put(text.encode("utf-8"))

    def get(self, digest: str) -> bytes:
        path = self._object_path(digest)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise ArtifactNotFoundError(f"no artifact with hash {digest}") from None

    def get_text(self, digest: str) -> str:
        return self.get(digest).decode("utf-8")

    def has(self, digest: str) -> bool:
        return self._object_path(digest).exists()

    def subdir(self, *parts: str) -> Path:
        d = self.root.joinpath(*parts)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def manifest(self, stage: str) -> "Manifest":
        return Manifest(self.subdir("manifests") / f"{stage}.jsonl", stage=stage)


@dataclass
class ManifestRecord:
    item_id: str
    status: str
    artifacts: list[str] = field(default_factory=list)
    detail: str = ""
    ts: float = 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.item_id,
                "status": self.status,
                "artifacts": self.artifacts,
                "detail": self.detail,
                "ts": self.ts,
            },
            sort_keys=True,
        )


class Manifest:
    """Append-only JSONL record log for one pipeline stage.

    Appends are serialized through a per-process lock; readers replay the
    whole log and see the consistent prefix that made it to disk.
    """

    def __init__(self, path: str | Path, stage: str = ""):
        self.path = Path(path)
        self.stage = stage
        self._lock = threading.Lock()

    def append(self, item_id: str, status: str, artifacts=None, detail: str = "") -> ManifestRecord:
        if status not in _STATUSES:
            raise StoreError(f"unknown manifest status {status!r}")
        record = ManifestRecord(
            item_id=item_id,
            status=status,
            artifacts=list(artifacts or []),
            detail=detail,
            ts=time.time(),
        )
        line = record.to_json() + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
        return record

    def mark_done(self, item_id: str, artifacts=None, detail: str = "") -> ManifestRecord:
        return self.append(item_id, STATUS_DONE, artifacts, detail)

    def mark_failed(self, item_id: str, detail: str = "") -> ManifestRecord:
        return self.append(item_id, STATUS_FAILED, detail=detail)

    def mark_pending(self, item_id: str, detail: str = "") -> ManifestRecord:
        return self.append(item_id, STATUS_PENDING, detail=detail)

    def reset(self) -> None:
        """Start the stage log over (used by full, non-resumed re-runs)."""
        with self._lock:
            if self.path.exists():
                self.path.unlink()

    def load(self) -> dict[str, ManifestRecord]:
        """Replay the log into latest-state-per-item. Raises
        ManifestCorruptError on unparseable lines, duplicate records, or
        impossible status transitions (e.g. anything after done)."""
        state: dict[str, ManifestRecord] = {}
        if not self.path.exists():
            return state
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                    record = ManifestRecord(
                        item_id=raw["id"],
                        status=raw["status"],
                        artifacts=list(raw.get("artifacts", [])),
                        detail=raw.get("detail", ""),
                        ts=float(raw.get("ts", 0.0)),
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ManifestCorruptError(
                        f"{self.path}:{lineno}: unreadable record ({exc})"
                    ) from exc
                if record.status not in _STATUSES:
                    raise ManifestCorruptError(
                        f"{self.path}:{lineno}: unknown status {record.status!r}"
                    )
                prev = state.get(record.item_id)
                if prev is not None:
                    if (prev.status, record.status) not in _ALLOWED_TRANSITIONS:
                        raise ManifestCorruptError(
                            f"{self.path}:{lineno}: duplicate id {record.item_id!r} "
                            f"({prev.status} -> {record.status} is not a valid transition)"
                        )
                state[record.item_id] = record
        return state

    def done_ids(self) -> set[str]:
        return {i for i, r in self.load().items() if r.status == STATUS_DONE}


def resume(items: list[str], manifest: Manifest) -> list[str]:
    """Return the items not yet marked done, preserving input order.

    Done items are never re-run; pending and failed ones are.
    """
    seen: set[str] = set()
    for item in items:
        if item in seen:
            raise ManifestCorruptError(f"duplicate work item id {item!r}")
        seen.add(item)
    done = manifest.done_ids()
    return [item for item in items if item not in done]
