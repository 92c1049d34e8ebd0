"""Discover, filter, and snapshot candidate React repositories.

The search/fetch clients are small protocols so recorded fixtures can
replay API responses offline; the real clients speak the code-hosting
HTTPS JSON API with the token taken from the environment.
"""

from __future__ import annotations

import hashlib
import io
import json
import re
import tarfile
from dataclasses import dataclass, field, asdict
from pathlib import Path

import requests

from .config import PipelineConfig
from .errors import AuthError, FetchError, HarvestError, RateLimitedError

README_EXCERPT_BYTES = 4096

TEXT_EXTENSIONS = {
    ".js", ".jsx", ".ts", ".tsx", ".mjs", ".cjs",
    ".css", ".scss", ".less",
    ".json", ".md", ".html", ".txt", ".yml", ".yaml", ".svg",
}


@dataclass
class RepoRecord:
    full_name: str  # owner/name
    stars: int
    name: str = ""
    description: str = ""
    readme_excerpt: str = ""
    matched_keywords: list[str] = field(default_factory=list)
    blacklist_hits: list[str] = field(default_factory=list)
    fetch_status: str = "pending"
    default_branch: str = "HEAD"

    def __post_init__(self):
        if self.stars < 0:
            raise HarvestError(f"star count must be >= 0, got {self.stars}")
        if not self.name:
            self.name = self.full_name.split("/")[-1]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Verdict:
    accepted: bool
    reasons: list[str] = field(default_factory=list)


@dataclass
class SearchCursor:
    keyword_index: int = 0
    page: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


class GithubSearchClient:
    """Real search client. Auth token comes from the environment via the
    config's env-var name; unauthenticated search works at a lower quota."""

    API_ROOT = "https://api.github.com"

    def __init__(self, config: PipelineConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        token = config.github_token()
        self.headers = {"Accept": "application/vnd.github+json"}
        if token:
            self.headers["Authorization"] = f"Bearer {token}"

    def _check(self, resp: requests.Response) -> None:
        if resp.status_code in (403, 429):
            wait = float(resp.headers.get("Retry-After", 0) or 0)
            if not wait:
                reset = resp.headers.get("X-RateLimit-Reset")
                if reset:
                    import time

                    wait = max(1.0, float(reset) - time.time())
            raise RateLimitedError(
                f"search API throttled ({resp.status_code})", wait_seconds=wait or 60.0
            )
        if resp.status_code == 401:
            raise AuthError("search API rejected the credentials")
        if resp.status_code != 200:
            raise HarvestError(f"search API returned {resp.status_code}: {resp.text[:300]}")

    def search(self, keyword: str, page: int) -> tuple[list[dict], bool]:
        query = f"{keyword} language:JavaScript language:TypeScript in:name,description,readme"
        try:
            resp = self.session.get(
                f"{self.API_ROOT}/search/repositories",
                params={"q": query, "page": page, "per_page": 50, "sort": "stars"},
                headers=self.headers,
                timeout=30,
            )
        except requests.RequestException as exc:
            raise HarvestError(f"search request failed: {exc}") from exc
        self._check(resp)
        payload = resp.json()
        items = payload.get("items", [])
        has_more = len(items) == 50
        return items, has_more

    def readme_excerpt(self, full_name: str) -> str:
        try:
            resp = self.session.get(
                f"{self.API_ROOT}/repos/{full_name}/readme",
                headers={**self.headers, "Accept": "application/vnd.github.raw+json"},
                timeout=30,
            )
        except requests.RequestException:
            return ""
        if resp.status_code != 200:
            return ""
        return resp.text[:README_EXCERPT_BYTES]


def record_from_api_item(item: dict, keyword: str, readme_excerpt: str = "") -> RepoRecord:
    return RepoRecord(
        full_name=item["full_name"],
        stars=int(item.get("stargazers_count", 0)),
        name=item.get("name", ""),
        description=item.get("description") or "",
        readme_excerpt=readme_excerpt,
        matched_keywords=[keyword],
        default_branch=item.get("default_branch", "HEAD"),
    )


def search_repos(
    client,
    keywords: list[str],
    cursor: SearchCursor | None = None,
    fetch_readmes: bool = False,
) -> tuple[list[RepoRecord], SearchCursor | None]:
    """One page of search results per call; follow the returned cursor for
    exhaustive pagination across all keywords."""
    if not keywords:
        raise HarvestError("keyword list must be non-empty")
    cursor = cursor or SearchCursor()
    if cursor.keyword_index >= len(keywords):
        return [], None
    keyword = keywords[cursor.keyword_index]
    items, has_more = client.search(keyword, cursor.page)
    records = []
    for item in items:
        excerpt = client.readme_excerpt(item["full_name"]) if fetch_readmes else ""
        records.append(record_from_api_item(item, keyword, excerpt))
    if has_more:
        next_cursor = SearchCursor(cursor.keyword_index, cursor.page + 1)
    elif cursor.keyword_index + 1 < len(keywords):
        next_cursor = SearchCursor(cursor.keyword_index + 1, 1)
    else:
        next_cursor = None
    return records, next_cursor


def _blacklist_pattern(blacklist: list[str]) -> re.Pattern:
    joined = "|".join(re.escape(k) for k in blacklist)
    return re.compile(rf"\b(?:{joined})\b", re.IGNORECASE)


def filter_repo(record: RepoRecord, config: PipelineConfig) -> Verdict:
    """Pure verdict: reject iff stars are not strictly over the threshold
    or a blacklist keyword appears (word-boundary, case-insensitive) in
    the name, description, or readme excerpt."""
    reasons: list[str] = []
    if record.stars <= config.star_threshold:
        reasons.append(f"stars:{record.stars}<= {config.star_threshold}")
    if config.blacklist_enabled and config.blacklist:
        pattern = _blacklist_pattern(config.blacklist)
        hits: list[str] = []
        for text in (record.name, record.description, record.readme_excerpt):
            for m in pattern.finditer(text or ""):
                hit = m.group(0).lower()
                if hit not in hits:
                    hits.append(hit)
        if hits:
            record.blacklist_hits = hits
            reasons.extend(f"blacklist:{h}" for h in hits)
    return Verdict(accepted=not reasons, reasons=reasons)


def partition_records(
    records: list[RepoRecord], config: PipelineConfig
) -> tuple[list[RepoRecord], list[tuple[RepoRecord, Verdict]]]:
    accepted, rejected = [], []
    for record in records:
        verdict = filter_repo(record, config)
        if verdict.accepted:
            accepted.append(record)
        else:
            rejected.append((record, verdict))
    return accepted, rejected


# --- fetching ---------------------------------------------------------------------


class GithubTarballFetcher:
    CODELOAD = "https://codeload.github.com"

    def __init__(self, config: PipelineConfig, session: requests.Session | None = None):
        self.session = session or requests.Session()
        token = config.github_token()
        self.headers = {"Authorization": f"Bearer {token}"} if token else {}

    def fetch_tarball(self, record: RepoRecord) -> bytes:
        url = f"{self.CODELOAD}/{record.full_name}/tar.gz/{record.default_branch}"
        try:
            resp = self.session.get(url, headers=self.headers, timeout=120)
        except requests.RequestException as exc:
            raise FetchError(f"{record.full_name}: download failed: {exc}") from exc
        if resp.status_code == 404:
            raise FetchError(f"{record.full_name}: repository vanished")
        if resp.status_code != 200:
            raise FetchError(f"{record.full_name}: download returned {resp.status_code}")
        return resp.content


class LocalTarballFetcher:
    """Replay fetcher: serves tarballs from a directory keyed by
    owner__name.tar.gz."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def fetch_tarball(self, record: RepoRecord) -> bytes:
        path = self.directory / (record.full_name.replace("/", "__") + ".tar.gz")
        if not path.exists():
            raise FetchError(f"{record.full_name}: repository vanished")
        return path.read_bytes()


@dataclass
class Snapshot:
    digest: str
    root: Path
    files: list[str]
    skipped: list[dict]  # {path, reason, size}


def _is_text_candidate(name: str, data: bytes) -> bool:
    ext = Path(name).suffix.lower()
    if ext in TEXT_EXTENSIONS:
        return b"\x00" not in data[:8192]
    return False


def fetch_repo(
    record: RepoRecord,
    fetcher,
    store,
    max_file_bytes: int = 1_000_000,
) -> Snapshot:
    """Materialize a text-only source snapshot under
    <store>/repos/<digest>/; binaries and oversized files are listed by
    path in the snapshot manifest, never stored."""
    tarball = fetcher.fetch_tarball(record)
    entries: list[tuple[str, bytes]] = []
    skipped: list[dict] = []
    try:
        with tarfile.open(fileobj=io.BytesIO(tarball), mode="r:*") as tar:
            for member in tar.getmembers():
                if not member.isfile():
                    continue
                parts = Path(member.name).parts
                rel_parts = parts[1:] if len(parts) > 1 else parts  # strip tarball root dir
                if not rel_parts or any(p in ("..", "") for p in rel_parts):
                    continue
                rel = "/".join(rel_parts)
                if member.size > max_file_bytes:
                    skipped.append({"path": rel, "reason": "size-cap", "size": member.size})
                    continue
                fh = tar.extractfile(member)
                if fh is None:
                    continue
                data = fh.read()
                if not _is_text_candidate(rel, data):
                    skipped.append({"path": rel, "reason": "binary", "size": len(data)})
                    continue
                entries.append((rel, data))
    except tarfile.TarError as exc:
        record.fetch_status = "failed"
        raise FetchError(f"{record.full_name}: unreadable tarball: {exc}") from exc

    entries.sort(key=lambda e: e[0])
    hasher = hashlib.sha256()
    for rel, data in entries:
        hasher.update(rel.encode())
        hasher.update(hashlib.sha256(data).digest())
    digest = hasher.hexdigest()

    root = store.subdir("repos", digest)
    for rel, data in entries:
        dest = root / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        if not dest.exists():
            dest.write_bytes(data)
    manifest = {
        "repo": record.full_name,
        "digest": digest,
        "files": [rel for rel, _ in entries],
        "skipped": skipped,
    }
    # sidecar lives next to the snapshot dir, not inside it
    (root.parent / f"{digest}.snapshot.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True)
    )
    record.fetch_status = "done"
    return Snapshot(digest=digest, root=root, files=manifest["files"], skipped=skipped)
