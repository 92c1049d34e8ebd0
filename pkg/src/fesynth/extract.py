"""Detect React components in a source tree and resolve their local
dependency and style closures.

Detection is lexical (mask + pattern automaton over top-level statements),
not a full grammar; the balance check keeps minified noise out and the
agent validation pass refines the rest.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from . import jslex
from .errors import ExtractError, GatewayError

SCRIPT_EXTENSIONS = {".js", ".jsx", ".ts", ".tsx", ".mjs", ".cjs"}
STYLE_EXTENSIONS = {".css", ".scss", ".less"}

KIND_SCRIPT = "script"
KIND_STYLE = "style"
KIND_OTHER = "other"

FUNCTIONAL = "functional"
CLASS_STYLE = "class_style"

EXPORT_DEFAULT = "default"
EXPORT_NAMED = "named"
EXPORT_NONE = "none"


@dataclass
class SourceFile:
    path: str  # posix-style, relative to snapshot root
    kind: str
    text: str
    repaired: bool = False

    @property
    def is_script(self) -> bool:
        return self.kind == KIND_SCRIPT


@dataclass
class RawComponent:
    id: str
    path: str
    name: str
    kind: str
    span: tuple[int, int]
    uses_hooks: bool = False
    export_form: str = EXPORT_NONE
    flags: list[str] = field(default_factory=list)

    def code(self, file: SourceFile) -> str:
        return file.text[self.span[0] : self.span[1]]


@dataclass
class DependencyClosure:
    component_id: str
    local_imports: dict[str, str | None] = field(default_factory=dict)
    package_imports: list[str] = field(default_factory=list)
    style_refs: list[str] = field(default_factory=list)
    needed: dict[str, list[str]] = field(default_factory=dict)
    unresolved: list[str] = field(default_factory=list)
    cycles: list[list[str]] = field(default_factory=list)


def classify_extension(path: str) -> str:
    ext = Path(path).suffix.lower()
    if ext in SCRIPT_EXTENSIONS:
        return KIND_SCRIPT
    if ext in STYLE_EXTENSIONS:
        return KIND_STYLE
    return KIND_OTHER


def _looks_binary(data: bytes) -> bool:
    return b"\x00" in data[:8192]


def scan_sources(snapshot: str | Path) -> list[SourceFile]:
    """Walk a snapshot into path-sorted SourceFiles, excluding binaries.
    Invalid UTF-8 is repaired lossily and flagged."""
    root = Path(snapshot)
    if not root.is_dir():
        raise ExtractError(f"snapshot directory not found: {root}")
    out: list[SourceFile] = []
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        data = path.read_bytes()
        if _looks_binary(data):
            continue
        try:
            text = data.decode("utf-8")
            repaired = False
        except UnicodeDecodeError:
            text = data.decode("utf-8", errors="replace")
            repaired = True
        rel = path.relative_to(root).as_posix()
        out.append(SourceFile(path=rel, kind=classify_extension(rel), text=text, repaired=repaired))
    return out


_JSX_PREV_CHARS = set("(,?:&|={[;>")
_JSX_OPEN_RE = re.compile(r"<\s*[A-Za-z_$>]")
_HOOK_CALL_RE = re.compile(r"\buse[A-Z][A-Za-z0-9_$]*\s*\(")

_FUNC_DECL_RE = re.compile(
    r"^(export\s+(?:default\s+)?)?(?:async\s+)?function\s+([A-Za-z_$][A-Za-z0-9_$]*)"
)
_CLASS_DECL_RE = re.compile(
    r"^(export\s+(?:default\s+)?)?class\s+([A-Za-z_$][A-Za-z0-9_$]*)\s+extends\s+"
    r"(?:React\s*\.\s*)?(?:Pure)?Component\b"
)
_VAR_DECL_RE = re.compile(
    r"^(export\s+(?:default\s+)?)?(?:const|let|var)\s+([A-Za-z_$][A-Za-z0-9_$]*)\s*="
)
_UPPER_NAME_RE = re.compile(r"^[A-Z][A-Za-z0-9_$]*$")


def _has_jsx(masked: str) -> bool:
    for m in _JSX_OPEN_RE.finditer(masked):
        pos = m.start()
        i = pos - 1
        while i >= 0 and masked[i].isspace():
            i -= 1
        if i < 0:
            return True
        prev = masked[i]
        if prev in _JSX_PREV_CHARS:
            return True
        # keyword position: `return <div/>`
        end = i + 1
        while i >= 0 and (masked[i].isalnum() or masked[i] == "_"):
            i -= 1
        if masked[i + 1 : end] == "return":
            return True
    return False


def _file_export_form(name: str, masked: str) -> str:
    if re.search(rf"export\s+default\s+{re.escape(name)}\b", masked):
        return EXPORT_DEFAULT
    named = re.compile(r"export\s*\{([^}]*)\}")
    for m in named.finditer(masked):
        entries = [e.strip().split()[0] for e in m.group(1).split(",") if e.strip()]
        if name in entries:
            return EXPORT_NAMED
    return EXPORT_NONE


def detect_components(file: SourceFile) -> list[RawComponent]:
    """Find functional and class-style components in one script file."""
    if file.kind != KIND_SCRIPT:
        return []
    mask = jslex.mask_code(file.text)
    masked = mask.masked
    components: list[RawComponent] = []
    for stmt in jslex.top_level_statements(file.text, masked):
        mslice = masked[stmt.start : stmt.end]
        name = None
        kind = None
        export_form = EXPORT_NONE
        if stmt.keyword == "function":
            m = _FUNC_DECL_RE.match(mslice)
            if m and _UPPER_NAME_RE.match(m.group(2)) and _has_jsx(mslice):
                name = m.group(2)
                kind = FUNCTIONAL
                export_form = _prefix_export_form(m.group(1))
        elif stmt.keyword == "class":
            m = _CLASS_DECL_RE.match(mslice)
            if m and _UPPER_NAME_RE.match(m.group(2)):
                name = m.group(2)
                kind = CLASS_STYLE
                export_form = _prefix_export_form(m.group(1))
        elif stmt.keyword in ("const", "let", "var"):
            m = _VAR_DECL_RE.match(mslice)
            if m and _UPPER_NAME_RE.match(m.group(2)):
                init = mslice[m.end() :]
                looks_component = "=>" in init or re.match(
                    r"\s*(?:async\s+)?function\b|\s*React\s*\.\s*(?:memo|forwardRef)\s*\(",
                    init,
                )
                if looks_component and _has_jsx(mslice):
                    name = m.group(2)
                    kind = FUNCTIONAL
                    export_form = _prefix_export_form(m.group(1))
        if name is None or kind is None:
            continue
        snippet = file.text[stmt.start : stmt.end]
        if not jslex.is_balanced(snippet):
            continue
        if export_form == EXPORT_NONE:
            export_form = _file_export_form(name, masked)
        flags = ["repaired"] if file.repaired else []
        components.append(
            RawComponent(
                id=f"{file.path}::{name}",
                path=file.path,
                name=name,
                kind=kind,
                span=(stmt.start, stmt.end),
                uses_hooks=bool(_HOOK_CALL_RE.search(mslice)),
                export_form=export_form,
                flags=flags,
            )
        )
    components.sort(key=lambda c: c.span[0])
    return components


def _prefix_export_form(prefix: str | None) -> str:
    if not prefix:
        return EXPORT_NONE
    return EXPORT_DEFAULT if "default" in prefix else EXPORT_NAMED


_RENAME_RE = re.compile(r"^RENAME\s+([A-Z][A-Za-z0-9_$]*)\s*$", re.IGNORECASE)


def validate_components(candidates, file: SourceFile, gateway, budget: int):
    """Agent pass: confirm, refine, or drop each detected candidate.

    budget counts gateway calls; with budget 0 candidates pass through
    flagged heuristic-only. Gateway failures keep the candidate, flagged
    unverified.
    """
    if budget < 0:
        raise ExtractError("validation budget must be >= 0")
    confirmed: list[RawComponent] = []
    calls = 0
    for cand in candidates:
        if calls >= budget:
            if "heuristic_only" not in cand.flags:
                cand.flags.append("heuristic_only")
            confirmed.append(cand)
            continue
        calls += 1
        try:
            exchange = gateway.complete(
                "component_validation",
                {"candidate_name": cand.name, "candidate_code": cand.code(file)},
            )
        except GatewayError:
            cand.flags.append("unverified")
            confirmed.append(cand)
            continue
        verdict = str(exchange.parsed).strip()
        first_line = verdict.splitlines()[0].strip() if verdict else ""
        rename = _RENAME_RE.match(first_line)
        if rename:
            cand.name = rename.group(1)
            cand.id = f"{cand.path}::{cand.name}"
            cand.flags.append("refined")
            confirmed.append(cand)
        elif first_line.rstrip(".").lower() == "no":
            continue  # dropped
        else:
            confirmed.append(cand)
    return confirmed


# Import statement forms; matches are accepted only when the keyword
# survives masking (i.e. is real code, not string/comment content).
_IMPORT_RE = re.compile(
    r"""import\s+(?:([^'";]+?)\s+from\s+)?['"]([^'"]+)['"]""", re.MULTILINE
)
_REQUIRE_RE = re.compile(
    r"""(?:const|let|var)\s+([A-Za-z_$][\w$]*|\{[^}]*\})\s*=\s*require\(\s*['"]([^'"]+)['"]\s*\)"""
)
_EXPORT_FROM_RE = re.compile(r"""export\s+[^;]*?\s+from\s+['"]([^'"]+)['"]""")


@dataclass
class ImportStatement:
    specifier: str
    names: list[str]  # imported bindings; "default" marks a default import
    start: int
    end: int


def _clause_names(clause: str | None) -> list[str]:
    if not clause:
        return []
    names: list[str] = []
    clause = clause.strip()
    # default import before any named block
    head = clause.split("{")[0].strip().rstrip(",").strip()
    if head and not head.startswith("*"):
        names.append("default")
    if head.startswith("*"):
        names.append("*")
    braced = re.search(r"\{([^}]*)\}", clause)
    if braced:
        for entry in braced.group(1).split(","):
            entry = entry.strip()
            if not entry:
                continue
            names.append(entry.split()[0])
    return names


def parse_imports(text: str, masked: str | None = None) -> list[ImportStatement]:
    if masked is None:
        masked = jslex.mask_code(text).masked
    out: list[ImportStatement] = []
    for m in _IMPORT_RE.finditer(text):
        if not masked[m.start() :].startswith("import"):
            continue
        out.append(
            ImportStatement(
                specifier=m.group(2),
                names=_clause_names(m.group(1)),
                start=m.start(),
                end=m.end(),
            )
        )
    for m in _REQUIRE_RE.finditer(text):
        if not re.match(r"const|let|var", masked[m.start() :]):
            continue
        clause = m.group(1)
        names = ["default"] if not clause.startswith("{") else _clause_names(clause)
        out.append(ImportStatement(specifier=m.group(2), names=names, start=m.start(), end=m.end()))
    for m in _EXPORT_FROM_RE.finditer(text):
        if not masked[m.start() :].startswith("export"):
            continue
        out.append(ImportStatement(specifier=m.group(1), names=[], start=m.start(), end=m.end()))
    out.sort(key=lambda s: s.start)
    return out


_RESOLUTION_SUFFIXES = ["", ".js", ".jsx", ".ts", ".tsx",
                        "/index.js", "/index.jsx", "/index.ts", "/index.tsx"]


def resolve_specifier(spec: str, importer: str, files: dict[str, SourceFile]) -> str | None:
    """Resolve a relative import against the snapshot with extension
    inference; returns the snapshot path or None."""
    base = Path(importer).parent
    raw = (base / spec).as_posix() if not spec.startswith("/") else spec.lstrip("/")
    # normalize ../ segments
    parts: list[str] = []
    for seg in raw.split("/"):
        if seg in ("", "."):
            continue
        if seg == "..":
            if parts:
                parts.pop()
            continue
        parts.append(seg)
    norm = "/".join(parts)
    for suffix in _RESOLUTION_SUFFIXES:
        candidate = norm + suffix
        if candidate in files:
            return candidate
    return None


def _is_local(spec: str) -> bool:
    return spec.startswith(".") or spec.startswith("/")


def resolve_dependencies(
    component: RawComponent, files: dict[str, SourceFile]
) -> DependencyClosure:
    """Build the component's local import/style closure over the snapshot.

    Never fabricates paths: every resolved entry exists in the snapshot;
    unresolved specifiers are reported, not dropped. Cycles among local
    script files are reported in `cycles`.
    """
    if component.path not in files:
        raise ExtractError(f"component file {component.path} not in snapshot")
    closure = DependencyClosure(component_id=component.id)
    visited: set[str] = set()
    in_progress: list[str] = []

    def visit(path: str) -> None:
        if path in in_progress:
            cycle = in_progress[in_progress.index(path) :] + [path]
            if cycle not in closure.cycles:
                closure.cycles.append(cycle)
            return
        if path in visited:
            return
        visited.add(path)
        in_progress.append(path)
        file = files[path]
        for imp in parse_imports(file.text):
            if not _is_local(imp.specifier):
                if imp.specifier not in closure.package_imports:
                    closure.package_imports.append(imp.specifier)
                continue
            resolved = resolve_specifier(imp.specifier, path, files)
            key = f"{path} -> {imp.specifier}"
            closure.local_imports[key] = resolved
            if resolved is None:
                closure.unresolved.append(imp.specifier)
                continue
            if files[resolved].kind == KIND_STYLE:
                if resolved not in closure.style_refs:
                    closure.style_refs.append(resolved)
                continue
            wanted = closure.needed.setdefault(resolved, [])
            for name in imp.names:
                if name not in wanted:
                    wanted.append(name)
            visit(resolved)
        in_progress.pop()

    visit(component.path)
    return closure


def extraction_report(files: list[SourceFile], components: list[RawComponent]) -> dict:
    by_kind: dict[str, int] = {}
    for comp in components:
        by_kind[comp.kind] = by_kind.get(comp.kind, 0) + 1
    return {
        "files_scanned": len(files),
        "script_files": sum(1 for f in files if f.kind == KIND_SCRIPT),
        "style_files": sum(1 for f in files if f.kind == KIND_STYLE),
        "components": len(components),
        "by_kind": by_kind,
        "hook_users": sum(1 for c in components if c.uses_hooks),
    }
