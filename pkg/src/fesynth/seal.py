"""Seal detected components into self-contained snippets.

Sealing inlines local dependencies as whole top-level definitions, enforces
the self-containment rules, asks the agent to correct violations, and
synthesizes mock inputs so the component renders standalone.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, asdict
from pathlib import Path

from . import jslex
from .errors import DependencyCycleError, GatewayError, ResponseParseError, SealError
from .extract import (
    DependencyClosure,
    RawComponent,
    SourceFile,
    parse_imports,
)

FORBIDDEN_PACKAGES = ("react-i18next", "./redux/actions")

# The only external-resource carve-out: images under the imgs folder.
_IMG_IMPORT_RE = re.compile(r"^\.?/imgs/[^/]+$")
_IMG_REF_RE = re.compile(r"\.?/imgs/[A-Za-z0-9_.-]+")

NO_STYLE_MARKER = "/* no styles */"


@dataclass
class Violation:
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.rule}: {self.detail}" if self.detail else self.rule


@dataclass
class SealedSnippet:
    id: str
    component_code: str
    style_code: str
    origin: dict = field(default_factory=dict)  # repo, file, component id
    mock_inputs: dict[str, str] = field(default_factory=dict)
    validation: dict = field(default_factory=dict)
    asset_refs: list[str] = field(default_factory=list)
    no_style: bool = False
    sealed: bool = False

    def combined(self) -> str:
        return f"{self.style_code}\n\n{self.component_code}" if self.style_code else self.component_code

    def to_sidecar(self) -> dict:
        d = asdict(self)
        d.pop("component_code")
        d.pop("style_code")
        return d

    def write_files(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "component.jsx").write_text(self.component_code, encoding="utf-8")
        (directory / "style.css").write_text(self.style_code, encoding="utf-8")
        (directory / "snippet.json").write_text(
            json.dumps(self.to_sidecar(), indent=2, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def read_files(cls, directory: str | Path) -> "SealedSnippet":
        directory = Path(directory)
        sidecar = json.loads((directory / "snippet.json").read_text(encoding="utf-8"))
        return cls(
            component_code=(directory / "component.jsx").read_text(encoding="utf-8"),
            style_code=(directory / "style.css").read_text(encoding="utf-8"),
            **sidecar,
        )


def _is_local_spec(spec: str) -> bool:
    return spec.startswith(".") or spec.startswith("/")


def validate_rules(
    component_code: str, style_code: str, no_style: bool = False
) -> list[Violation]:
    """Rule-based validation; violations are data, not errors."""
    violations: list[Violation] = []
    if not component_code.strip():
        violations.append(Violation("empty-component"))
        return violations

    masked = jslex.mask_code(component_code).masked
    defaults = len(re.findall(r"\bexport\s+default\b", masked))
    if defaults == 0:
        violations.append(Violation("missing-default-export"))
    elif defaults > 1:
        violations.append(Violation("multiple-default-export", f"found {defaults}"))

    for imp in parse_imports(component_code, masked):
        spec = imp.specifier
        if spec in FORBIDDEN_PACKAGES:
            violations.append(Violation("forbidden-package", spec))
        elif _is_local_spec(spec) and not _IMG_IMPORT_RE.match(spec):
            violations.append(Violation("local-import", spec))

    if not jslex.is_balanced(component_code):
        violations.append(Violation("unbalanced-code"))
    if style_code.strip() and not jslex.is_balanced(style_code):
        violations.append(Violation("unbalanced-style"))

    if not style_code.strip() and not no_style:
        violations.append(Violation("missing-style", f"add styles or the {NO_STYLE_MARKER!r} marker"))

    violations.extend(_asset_violations(component_code, style_code))
    return violations


_URL_REF_RE = re.compile(r"url\(\s*['\"]?([^'\")]+)['\"]?\s*\)")
_SRC_ATTR_RE = re.compile(r"""\bsrc\s*=\s*['"]([^'"]+)['"]""")
_ALLOWED_REF_PREFIXES = ("/imgs/", "http://", "https://", "data:", "#")


def _asset_violations(component_code: str, style_code: str) -> list[Violation]:
    out: list[Violation] = []
    for m in _URL_REF_RE.finditer(style_code):
        ref = m.group(1).strip()
        if not ref.startswith(_ALLOWED_REF_PREFIXES):
            out.append(Violation("local-asset", f"url({ref})"))
    for m in _SRC_ATTR_RE.finditer(component_code):
        ref = m.group(1).strip()
        if ref.startswith(_ALLOWED_REF_PREFIXES):
            continue
        if "/" in ref or re.search(r"\.(png|jpe?g|gif|svg|webp|ico)$", ref):
            out.append(Violation("local-asset", f"src={ref}"))
    return out


def collect_asset_refs(component_code: str, style_code: str) -> list[str]:
    refs = []
    for m in _IMG_REF_RE.finditer(component_code + "\n" + style_code):
        ref = m.group(0)
        if ref not in refs:
            refs.append(ref)
    return refs


# --- dependency inlining -------------------------------------------------


@dataclass
class _FileDefs:
    statements: list[jslex.Statement]
    by_name: dict[str, int]  # definition name -> statement index
    default_index: int | None
    default_name: str | None
    default_expr: str | None  # anonymous default export expression
    import_spans: list[tuple[int, int]]
    package_import_lines: list[str]


_DECL_NAME_RE = re.compile(
    r"^(?:export\s+(?:default\s+)?)?(?:async\s+)?(?:function|class)\s+([A-Za-z_$][\w$]*)"
)
_VAR_NAMES_RE = re.compile(
    r"^(?:export\s+(?:default\s+)?)?(?:const|let|var)\s+([A-Za-z_$][\w$]*)"
)
_EXPORT_DEFAULT_NAME_RE = re.compile(r"^export\s+default\s+([A-Za-z_$][\w$]*)\s*;?\s*$")
_EXPORT_DEFAULT_EXPR_RE = re.compile(r"^export\s+default\s+(.*)$", re.DOTALL)


def _index_file(file: SourceFile) -> _FileDefs:
    masked = jslex.mask_code(file.text).masked
    statements = jslex.top_level_statements(file.text, masked)
    by_name: dict[str, int] = {}
    default_index = None
    default_name = None
    default_expr = None
    import_spans: list[tuple[int, int]] = []
    package_lines: list[str] = []
    for idx, stmt in enumerate(statements):
        raw = stmt.slice(file.text)
        mslice = masked[stmt.start : stmt.end]
        if stmt.keyword == "import":
            import_spans.append((stmt.start, stmt.end))
            imports = parse_imports(raw)
            if imports and not _is_local_spec(imports[0].specifier):
                package_lines.append(raw.strip())
            continue
        m = _DECL_NAME_RE.match(mslice) or _VAR_NAMES_RE.match(mslice)
        if m:
            by_name[m.group(1)] = idx
            if mslice.lstrip().startswith("export default"):
                default_index = idx
                default_name = m.group(1)
            continue
        dm = _EXPORT_DEFAULT_NAME_RE.match(mslice.strip())
        if dm:
            default_name = dm.group(1)
            continue
        em = _EXPORT_DEFAULT_EXPR_RE.match(mslice.strip())
        if em and stmt.keyword == "export":
            default_index = idx
            default_expr = _EXPORT_DEFAULT_EXPR_RE.match(raw.strip()).group(1).rstrip(";").strip()
    if default_name and default_name in by_name and default_index is None:
        default_index = by_name[default_name]
    return _FileDefs(
        statements=statements,
        by_name=by_name,
        default_index=default_index,
        default_name=default_name,
        default_expr=default_expr,
        import_spans=import_spans,
        package_import_lines=package_lines,
    )


_EXPORT_PREFIX_RE = re.compile(r"^(\s*)export\s+(default\s+)?")


def _strip_export(statement_text: str) -> str:
    return _EXPORT_PREFIX_RE.sub(r"\1", statement_text, count=1)


def _needed_statement_indices(
    file: SourceFile, defs: _FileDefs, wanted_names: list[str]
) -> list[int]:
    """Indices of top-level statements the wanted names depend on,
    expanded transitively within the file, in file order."""
    masked = jslex.mask_code(file.text).masked
    chosen: set[int] = set()
    queue = [n for n in wanted_names if n in defs.by_name]
    while queue:
        name = queue.pop()
        idx = defs.by_name[name]
        if idx in chosen:
            continue
        chosen.add(idx)
        stmt = defs.statements[idx]
        for ident in jslex.identifiers(masked[stmt.start : stmt.end]):
            if ident != name and ident in defs.by_name and defs.by_name[ident] not in chosen:
                queue.append(ident)
    return sorted(chosen)


def inline_dependencies(
    component: RawComponent,
    closure: DependencyClosure,
    files: dict[str, SourceFile],
) -> SealedSnippet:
    """Copy every needed local definition into a single file above first
    use; local import statements disappear, package imports are hoisted,
    style references are concatenated into style_code."""
    if closure.cycles:
        cycle = closure.cycles[0]
        raise DependencyCycleError(
            f"local import cycle: {' -> '.join(cycle)}", cycle=cycle
        )

    main_file = files[component.path]
    main_defs = _index_file(main_file)
    masked_main = jslex.mask_code(main_file.text).masked

    package_import_lines: list[str] = list(main_defs.package_import_lines)
    inlined_blocks: list[str] = []

    # Dependency-first order over the files the component pulls in.
    order: list[str] = []
    seen: set[str] = set()

    def dep_visit(path: str) -> None:
        if path in seen:
            return
        seen.add(path)
        file = files[path]
        for imp in parse_imports(file.text):
            if _is_local_spec(imp.specifier):
                from .extract import resolve_specifier

                resolved = resolve_specifier(imp.specifier, path, files)
                if resolved and resolved in closure.needed:
                    dep_visit(resolved)
        if path != component.path:
            order.append(path)

    dep_visit(component.path)

    binding_aliases: list[str] = []
    main_imports = parse_imports(main_file.text, masked_main)
    for dep_path in order:
        dep_file = files[dep_path]
        defs = _index_file(dep_file)
        for line in defs.package_import_lines:
            if line not in package_import_lines:
                package_import_lines.append(line)
        wanted = list(closure.needed.get(dep_path, []))
        # default imports bind the dep's default export under the importer's name
        local_names: list[str] = []
        for imp in main_imports:
            from .extract import resolve_specifier

            if not _is_local_spec(imp.specifier):
                continue
            if resolve_specifier(imp.specifier, component.path, files) != dep_path:
                continue
            clause_binding = _default_binding(main_file.text, imp)
            for name in imp.names:
                if name == "default":
                    if defs.default_expr is not None:
                        binding_aliases.append(
                            f"const {clause_binding} = {defs.default_expr};"
                        )
                    elif defs.default_name:
                        local_names.append(defs.default_name)
                        if clause_binding and clause_binding != defs.default_name:
                            binding_aliases.append(
                                f"const {clause_binding} = {defs.default_name};"
                            )
                elif name != "*":
                    local_names.append(name)
        for name in wanted:
            if name == "default":
                if defs.default_name:
                    local_names.append(defs.default_name)
            elif name != "*" and name not in local_names:
                local_names.append(name)
        for idx in _needed_statement_indices(dep_file, defs, local_names):
            inlined_blocks.append(_strip_export(defs.statements[idx].slice(dep_file.text)).strip())

    # Same-file helpers referenced by the component but outside its span.
    span_slice = masked_main[component.span[0] : component.span[1]]
    helper_names = [
        n
        for n in jslex.identifiers(span_slice)
        if n in main_defs.by_name
        and not (
            main_defs.statements[main_defs.by_name[n]].start == component.span[0]
        )
    ]
    helper_blocks: list[str] = []
    for idx in _needed_statement_indices(main_file, main_defs, helper_names):
        stmt = main_defs.statements[idx]
        if stmt.start == component.span[0]:
            continue
        helper_blocks.append(_strip_export(stmt.slice(main_file.text)).strip())

    component_text = main_file.text[component.span[0] : component.span[1]].strip()

    style_parts: list[str] = []
    for style_path in closure.style_refs:
        style_parts.append(f"/* {Path(style_path).name} */\n{files[style_path].text.strip()}")
    style_code = "\n\n".join(style_parts)

    needs_default_export = "export default" not in jslex.mask_code(component_text).masked
    pieces = package_import_lines + binding_aliases + inlined_blocks + helper_blocks + [component_text]
    if needs_default_export:
        pieces.append(f"export default {component.name};")
    component_code = "\n\n".join(p for p in pieces if p.strip())

    snippet = SealedSnippet(
        id=f"seed-{component.id.replace('/', '_').replace('::', '-')}",
        component_code=component_code,
        style_code=style_code,
        origin={
            "file": component.path,
            "component_id": component.id,
            "component_name": component.name,
        },
        no_style=not bool(style_code.strip()),
        asset_refs=collect_asset_refs(component_code, style_code),
    )
    if snippet.no_style:
        snippet.style_code = ""
    return snippet


def _default_binding(text: str, imp) -> str:
    m = re.match(r"import\s+([A-Za-z_$][\w$]*)", text[imp.start : imp.end])
    return m.group(1) if m else ""


# --- agent correction -----------------------------------------------------


def agent_correct(
    snippet: SealedSnippet,
    violations: list[Violation],
    gateway,
    budget: int,
) -> SealedSnippet:
    """Loop at most `budget` gateway corrections until validate_rules is
    clean; unparseable replies consume an attempt. Raises SealError with
    the last violation list on exhaustion."""
    if budget < 1:
        raise SealError("correction budget must be >= 1", violations=violations)
    if not violations:
        raise SealError("agent_correct called without violations")
    current = snippet
    last_violations = violations
    for attempt in range(1, budget + 1):
        try:
            exchange = gateway.complete(
                "seal_correction",
                {
                    "violations": "\n".join(f"- {v}" for v in last_violations),
                    "component_code": current.component_code,
                    "style_code": current.style_code or NO_STYLE_MARKER,
                },
            )
        except (GatewayError, ResponseParseError):
            continue
        style, component = exchange.parsed
        style = style.strip()
        component = component.strip()
        no_style = not style or style == NO_STYLE_MARKER
        candidate = SealedSnippet(
            id=current.id,
            component_code=component,
            style_code="" if no_style else style,
            origin=current.origin,
            mock_inputs=dict(current.mock_inputs),
            validation=dict(current.validation),
            no_style=no_style,
            asset_refs=collect_asset_refs(component, style),
        )
        last_violations = validate_rules(
            candidate.component_code, candidate.style_code, candidate.no_style
        )
        current = candidate
        if not last_violations:
            current.validation["corrections"] = attempt
            return current
    raise SealError(
        f"violations remain after {budget} correction attempts: "
        + "; ".join(str(v) for v in last_violations),
        violations=last_violations,
    )


# --- mock inputs ----------------------------------------------------------


_ARROW_PARAM_RE = re.compile(
    r"(?:const|let|var)\s+[A-Za-z_$][\w$]*\s*=\s*(?:React\s*\.\s*memo\s*\(\s*)?(?:async\s+)?\(",
)
_FUNC_PARAM_RE = re.compile(r"function\s+[A-Za-z_$][\w$]*\s*\(")


@dataclass
class PropSpec:
    name: str
    has_default: bool
    insert_at: int  # position in component_code just after the name


def detect_props(component_code: str) -> tuple[list[PropSpec], tuple[int, int] | None]:
    """Find the component's destructured props and the pattern span.

    Only object-pattern signatures are rewritten; `(props)` style
    components report no rewritable props.
    """
    masked = jslex.mask_code(component_code).masked
    m = _ARROW_PARAM_RE.search(masked) or _FUNC_PARAM_RE.search(masked)
    if not m:
        return [], None
    open_paren = m.end() - 1
    close_paren = jslex.matching_close(masked, open_paren)
    if close_paren == -1:
        return [], None
    inner = masked[open_paren + 1 : close_paren].strip()
    if not inner.startswith("{"):
        return [], None
    brace_start = masked.index("{", open_paren)
    brace_end = jslex.matching_close(masked, brace_start)
    if brace_end == -1 or brace_end > close_paren:
        return [], None
    props: list[PropSpec] = []
    depth = 0
    i = brace_start + 1
    entry_start = i
    entries: list[tuple[int, int]] = []
    while i <= brace_end:
        c = masked[i]
        if c in "{[(":
            depth += 1
        elif c in "}])":
            if i == brace_end:
                entries.append((entry_start, i))
                break
            depth -= 1
        elif c == "," and depth == 0:
            entries.append((entry_start, i))
            entry_start = i + 1
        i += 1
    for a, b in entries:
        entry = masked[a:b]
        name_m = re.match(r"\s*(\.\.\.)?([A-Za-z_$][\w$]*)", entry)
        if not name_m or name_m.group(1):
            continue  # skip rest elements
        name = name_m.group(2)
        has_default = "=" in entry and ":" not in entry.split("=")[0]
        name_end = a + name_m.end(2)
        props.append(PropSpec(name=name, has_default=has_default, insert_at=name_end))
    return props, (brace_start, brace_end)


def mechanical_default(prop_name: str) -> str:
    lowered = prop_name.lower()
    if lowered.startswith(("on", "handle")) and len(prop_name) > 2:
        return "() => {}"
    if lowered.startswith(("is", "has", "should", "can")) or lowered in (
        "disabled", "checked", "visible", "open", "active", "darkmode",
    ):
        return "false"
    if lowered.startswith(("num", "count", "index", "max", "min")) or lowered in (
        "size", "total", "width", "height", "step",
    ):
        return "0"
    if lowered.endswith(("s", "list", "items", "options", "data", "rows")) and not lowered.endswith(
        ("status", "address", "class")
    ):
        return "[]"
    return '""'


def _inject_defaults(component_code: str, assignments: dict[str, str]) -> str:
    props, _span = detect_props(component_code)
    edits = [
        (p.insert_at, f" = {assignments[p.name]}")
        for p in props
        if not p.has_default and p.name in assignments
    ]
    out = component_code
    for pos, text in sorted(edits, reverse=True):
        out = out[:pos] + text + out[pos:]
    return out


_JS_EXPR_OK_RE = re.compile(r"^[^;]*$", re.DOTALL)


def mock_inputs(snippet: SealedSnippet, gateway, budget: int) -> SealedSnippet:
    """Give every detected prop a hardcoded default. The gateway proposes
    values; on exhaustion, mechanical defaults guarantee completion."""
    props, _span = detect_props(snippet.component_code)
    missing = [p for p in props if not p.has_default]
    if not missing:
        return snippet
    names = [p.name for p in missing]
    assignments: dict[str, str] | None = None
    used_fallback = True
    for _attempt in range(budget):
        try:
            exchange = gateway.complete(
                "mock_inputs",
                {"prop_names": ", ".join(names), "component_code": snippet.component_code},
            )
            from .parsers import parse_json_object

            proposal = parse_json_object(str(exchange.parsed))
        except (GatewayError, ResponseParseError):
            continue
        candidate = {
            k: str(v)
            for k, v in proposal.items()
            if k in names and _JS_EXPR_OK_RE.match(str(v)) and jslex.is_balanced(str(v))
        }
        if set(candidate) == set(names):
            injected = _inject_defaults(snippet.component_code, candidate)
            if not validate_rules(injected, snippet.style_code, snippet.no_style):
                assignments = candidate
                used_fallback = False
                break
    if assignments is None:
        assignments = {n: mechanical_default(n) for n in names}
    updated = _inject_defaults(snippet.component_code, assignments)
    result = SealedSnippet(
        id=snippet.id,
        component_code=updated,
        style_code=snippet.style_code,
        origin=snippet.origin,
        mock_inputs={**snippet.mock_inputs, **assignments},
        validation=dict(snippet.validation),
        asset_refs=snippet.asset_refs,
        no_style=snippet.no_style,
        sealed=snippet.sealed,
    )
    if used_fallback:
        result.validation["mock_fallback"] = True
    return result


# --- top-level sealing flow ------------------------------------------------


def seal_pair(
    snippet_id: str,
    style_code: str,
    component_code: str,
    gateway=None,
    correction_budget: int = 3,
    mock_budget: int = 2,
    origin: dict | None = None,
) -> SealedSnippet:
    """Validate + correct + mock a (style, component) pair into a sealed
    snippet. Raises SealError when violations survive the budget.

    Sealing is idempotent: a pair that already passes every rule with all
    props defaulted comes back unchanged.
    """
    style_code = style_code.strip()
    component_code = component_code.strip()
    no_style = not style_code or style_code == NO_STYLE_MARKER
    snippet = SealedSnippet(
        id=snippet_id,
        component_code=component_code,
        style_code="" if no_style else style_code,
        origin=origin or {},
        no_style=no_style,
        asset_refs=collect_asset_refs(component_code, style_code),
    )
    violations = validate_rules(snippet.component_code, snippet.style_code, snippet.no_style)
    if violations:
        if gateway is None or correction_budget < 1:
            raise SealError(
                "snippet violates sealing rules: " + "; ".join(str(v) for v in violations),
                violations=violations,
            )
        snippet = agent_correct(snippet, violations, gateway, correction_budget)
    if gateway is not None:
        snippet = mock_inputs(snippet, gateway, mock_budget)
    else:
        props, _ = detect_props(snippet.component_code)
        missing = {p.name: mechanical_default(p.name) for p in props if not p.has_default}
        if missing:
            snippet = SealedSnippet(
                id=snippet.id,
                component_code=_inject_defaults(snippet.component_code, missing),
                style_code=snippet.style_code,
                origin=snippet.origin,
                mock_inputs=missing,
                validation={**snippet.validation, "mock_fallback": True},
                asset_refs=snippet.asset_refs,
                no_style=snippet.no_style,
            )
    snippet.validation.setdefault("rules_checked", True)
    snippet.sealed = True
    return snippet


def seal_component(
    component: RawComponent,
    closure: DependencyClosure,
    files: dict[str, SourceFile],
    gateway=None,
    correction_budget: int = 3,
    mock_budget: int = 2,
    repo: str = "",
) -> SealedSnippet:
    """Full sealing flow for an extracted component."""
    draft = inline_dependencies(component, closure, files)
    if repo:
        draft.origin["repo"] = repo
    return seal_pair(
        draft.id,
        draft.style_code,
        draft.component_code,
        gateway=gateway,
        correction_budget=correction_budget,
        mock_budget=mock_budget,
        origin=draft.origin,
    )
