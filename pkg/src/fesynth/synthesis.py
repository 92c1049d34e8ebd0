"""The three synthesis strategies as explicit state machines over gateway
calls, plus derivation of multi-image version pairs.

All ids and indices are deterministic functions of the seed and the call
sequence, so a run against a scripted gateway is bit-reproducible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, asdict

from .assemble import MULTI_IMAGE_PROMPT, MultiImageEntry, SynthesizedInstance
from .config import SynthesisParams
from .errors import GatewayError, ResponseParseError, SealError, SynthesisError
from .parsers import Corrected, Passed, parse_style_component, serialize_style_component
from .seal import SealedSnippet, seal_pair

EMPTY_IMPLEMENTATION = "<EMPTY>"


@dataclass
class Lineage:
    seed_id: str
    strategy: str
    parent_id: str | None
    indices: dict[str, int] = field(default_factory=dict)
    exchange_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ChainEntry:
    instance_id: str
    style_code: str
    component_code: str
    screenshot_hash: str = ""


@dataclass
class VersionChain:
    entries: list[ChainEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)


# --- evolution ---------------------------------------------------------------


@dataclass
class EvolutionResult:
    variations: list[SealedSnippet]
    drafts: list[SynthesizedInstance]
    rejected_nondistinct: list[str]  # raw combined code of rejected variations
    failed_attempts: list[str]


def _numbered(label: str, blocks: list[str]) -> str:
    if not blocks:
        return "(none)"
    return "\n\n".join(f"{label} {i + 1}:\n{block}" for i, block in enumerate(blocks))


def evolve(
    seed: SealedSnippet,
    params: SynthesisParams,
    gateway,
    correction_budget: int = 3,
) -> EvolutionResult:
    """One variation attempt per round. Each attempt is parsed, checked for
    novelty against the original and every accepted variation, and
    re-sealed; failures feed the next round's do-not-repeat slot."""
    if not seed.sealed:
        raise SynthesisError("seed must be sealed", stage="evolve")
    accepted: list[SealedSnippet] = []
    drafts: list[SynthesizedInstance] = []
    rejected: list[str] = []
    failures: list[str] = []
    for round_idx in range(1, params.rounds + 1):
        if len(accepted) >= params.max_variations:
            break
        exchange_ids: list[str] = []
        try:
            exchange = gateway.complete(
                "evolution_variation",
                {
                    "variations": _numbered("Variation", [v.combined() for v in accepted]),
                    "failed_attempts": _numbered("Failed attempt", failures),
                    "code_snippet": seed.combined(),
                },
            )
        except (GatewayError, ResponseParseError) as exc:
            failures.append(f"round {round_idx}: unusable response ({exc})")
            continue
        exchange_ids.append(exchange.exchange_id)
        style, component = exchange.parsed
        candidate_code = serialize_style_component(style, component)
        try:
            check = gateway.complete(
                "evolution_similarity_check",
                {
                    "original_code": seed.combined(),
                    "previous_variations": _numbered(
                        "Variation", [v.combined() for v in accepted]
                    ),
                    "new_variation": candidate_code,
                },
            )
        except (GatewayError, ResponseParseError) as exc:
            failures.append(f"round {round_idx}: novelty check failed ({exc})")
            continue
        exchange_ids.append(check.exchange_id)
        if not check.parsed:  # "No" -> not distinctive
            rejected.append(candidate_code)
            continue
        variation_id = f"{seed.id}:evo:r{round_idx}"
        try:
            sealed = seal_pair(
                variation_id,
                style,
                component,
                gateway=gateway,
                correction_budget=correction_budget,
                origin=dict(seed.origin),
            )
        except SealError as exc:
            failures.append(
                f"round {round_idx}: sealing failed ({'; '.join(str(v) for v in exc.violations)})\n"
                + candidate_code
            )
            continue
        accepted.append(sealed)
        lineage = Lineage(
            seed_id=seed.id,
            strategy="evolution",
            parent_id=seed.id,
            indices={"round": round_idx, "seq": len(accepted)},
            exchange_ids=exchange_ids,
        )
        drafts.append(
            SynthesizedInstance(
                id=variation_id,
                strategy="evolution",
                component_code=sealed.component_code,
                style_code=sealed.style_code,
                task_description="",
                lineage=lineage.to_dict(),
                no_style=sealed.no_style,
            )
        )
    return EvolutionResult(
        variations=accepted,
        drafts=drafts,
        rejected_nondistinct=rejected,
        failed_attempts=failures,
    )


# --- waterfall ----------------------------------------------------------------


@dataclass
class WaterfallState:
    seed_id: str
    system_description: str = ""
    queued_systems: list[str] = field(default_factory=list)
    requirements: str = ""
    layout: str = ""
    architecture: dict[str, str] = field(default_factory=dict)
    dev_plan: list[str] = field(default_factory=list)
    task_snapshots: list[SealedSnippet] = field(default_factory=list)
    chain: VersionChain = field(default_factory=VersionChain)
    stage: str = "created"
    iteration: int = 1

    def architecture_text(self) -> str:
        return "\n\n".join(f"{head}\n{body}" for head, body in self.architecture.items())

    def to_dict(self) -> dict:
        return {
            "seed_id": self.seed_id,
            "system_description": self.system_description,
            "queued_systems": list(self.queued_systems),
            "requirements": self.requirements,
            "layout": self.layout,
            "architecture": dict(self.architecture),
            "dev_plan": list(self.dev_plan),
            "stage": self.stage,
            "iteration": self.iteration,
            "chain": [asdict(e) for e in self.chain.entries],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "WaterfallState":
        state = cls(seed_id=raw["seed_id"])
        state.system_description = raw.get("system_description", "")
        state.queued_systems = list(raw.get("queued_systems", []))
        state.requirements = raw.get("requirements", "")
        state.layout = raw.get("layout", "")
        state.architecture = dict(raw.get("architecture", {}))
        state.dev_plan = list(raw.get("dev_plan", []))
        state.stage = raw.get("stage", "created")
        state.iteration = raw.get("iteration", 1)
        state.chain = VersionChain(entries=[ChainEntry(**e) for e in raw.get("chain", [])])
        return state


class Checkpointer:
    """Persists stage snapshots so an interrupted run resumes at the last
    completed stage. No-op when the sink is None."""

    def __init__(self, sink=None):
        self.sink = sink  # callable(stage_name, payload_dict)

    def save(self, stage: str, payload: dict) -> None:
        if self.sink is not None:
            self.sink(stage, payload)


_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.*\S)\s*$")


def _parse_system_bullets(text: str) -> list[str]:
    out = [m.group(1) for m in (_BULLET_RE.match(l) for l in text.splitlines()) if m]
    if not out:
        # tolerate unbulleted one-per-line responses
        out = [l.strip() for l in text.splitlines() if l.strip()]
    return out


def _complete_or_abort(gateway, template, variables, stage, reminder=None):
    try:
        return gateway.complete(template, variables, reminder=reminder)
    except (GatewayError, ResponseParseError) as exc:
        raise SynthesisError(f"stage {stage}: {exc}", stage=stage) from exc


def _checked_code(
    gateway,
    check_template: str,
    style: str,
    component: str,
    stage: str,
    raw_correction: bool = False,
) -> tuple[str, str, list[str]]:
    """Run the code-check prompt and apply the Passed/Corrected verdict."""
    code_text = component if raw_correction else serialize_style_component(style, component)
    exchange = _complete_or_abort(gateway, check_template, {"code_snippet": code_text}, stage)
    ids = [exchange.exchange_id]
    verdict = exchange.parsed
    if isinstance(verdict, Passed):
        return style, component, ids
    assert isinstance(verdict, Corrected)
    if raw_correction:
        return style, verdict.code, ids
    try:
        new_style, new_component = parse_style_component(verdict.code)
    except ResponseParseError as exc:
        raise SynthesisError(
            f"stage {stage}: corrected code failed its format: {exc}", stage=stage
        ) from exc
    return new_style, new_component, ids


def _coding_loop(
    seed: SealedSnippet,
    state: WaterfallState,
    gateway,
    correction_budget: int,
    start_implementation: str,
    parent_id: str | None,
    seq_start: int,
) -> list[SynthesizedInstance]:
    drafts: list[SynthesizedInstance] = []
    current = start_implementation
    parent = parent_id
    for task_idx, task in enumerate(state.dev_plan, start=1):
        stage = f"coding:task{task_idx}"
        exchange = _complete_or_abort(
            gateway,
            "waterfall_code",
            {
                "system_description": state.system_description,
                "current_implementation": current,
                "next_task_description": task,
            },
            stage,
        )
        style, component = exchange.parsed
        exchange_ids = [exchange.exchange_id]
        style, component, check_ids = _checked_code(
            gateway, "waterfall_code_check", style, component, stage
        )
        exchange_ids.extend(check_ids)
        instance_id = f"{seed.id}:wf:i{state.iteration}:t{task_idx}"
        try:
            sealed = seal_pair(
                instance_id,
                style,
                component,
                gateway=gateway,
                correction_budget=correction_budget,
                origin=dict(seed.origin),
            )
        except SealError as exc:
            raise SynthesisError(f"stage {stage}: {exc}", stage=stage) from exc
        state.task_snapshots.append(sealed)
        lineage = Lineage(
            seed_id=seed.id,
            strategy="waterfall",
            parent_id=parent,
            indices={
                "iteration": state.iteration,
                "task": task_idx,
                "seq": seq_start + task_idx,
            },
            exchange_ids=exchange_ids,
        )
        draft = SynthesizedInstance(
            id=instance_id,
            strategy="waterfall",
            component_code=sealed.component_code,
            style_code=sealed.style_code,
            task_description=task,
            lineage=lineage.to_dict(),
            no_style=sealed.no_style,
        )
        drafts.append(draft)
        state.chain.entries.append(
            ChainEntry(
                instance_id=instance_id,
                style_code=sealed.style_code,
                component_code=sealed.component_code,
            )
        )
        current = serialize_style_component(sealed.style_code, sealed.component_code)
        parent = instance_id
    return drafts


def _plan_with_bounds(
    gateway, variables: dict, bounds: tuple[int, int], stage: str
) -> list[str]:
    lo, hi = bounds
    reminder = None
    for _attempt in range(2):
        exchange = _complete_or_abort(
            gateway, "waterfall_dev_plan", variables, stage, reminder=reminder
        )
        tasks = exchange.parsed
        if lo <= len(tasks) <= hi:
            return tasks
        reminder = (
            f"Reminder: list {lo} to {hi} development tasks; the previous plan "
            f"had {len(tasks)}."
        )
    raise SynthesisError(
        f"stage {stage}: task count out of bounds [{lo}, {hi}] after a reprompt",
        stage=stage,
    )


_STAGE_ORDER = (
    "created",
    "system_inferred",
    "requirements_done",
    "layout_done",
    "architecture_done",
    "planned",
    "coding_done",
)


def _stage_reached(state: WaterfallState, stage: str) -> bool:
    return _STAGE_ORDER.index(state.stage) >= _STAGE_ORDER.index(stage)


def waterfall_run(
    seed: SealedSnippet,
    params: SynthesisParams,
    gateway,
    correction_budget: int = 3,
    example_systems: str = "(none)",
    checkpoint: Checkpointer | None = None,
    restore: dict | None = None,
) -> tuple[WaterfallState, list[SynthesizedInstance]]:
    """Stages strictly in order: system inference, requirements, layout,
    architecture, dev plan (task count bounded), then the per-task coding
    loop with the check prompt's Passed/Corrected verdicts applied.

    Stage snapshots go through `checkpoint`; passing a snapshot back as
    `restore` skips the stages it already completed."""
    if not seed.sealed:
        raise SynthesisError("seed must be sealed", stage="waterfall")
    checkpoint = checkpoint or Checkpointer()
    state = WaterfallState.from_dict(restore) if restore else WaterfallState(seed_id=seed.id)
    if state.seed_id != seed.id:
        raise SynthesisError("restore snapshot belongs to a different seed", stage="restore")

    if not _stage_reached(state, "system_inferred"):
        exchange = _complete_or_abort(
            gateway,
            "waterfall_system_infer",
            {
                "infer_num": params.infer_num,
                "example_systems": example_systems,
                "code_snippet": seed.combined(),
            },
            "system_infer",
        )
        systems = _parse_system_bullets(str(exchange.parsed))
        if not systems:
            raise SynthesisError("stage system_infer: no systems parsed", stage="system_infer")
        state.system_description = systems[0]
        state.queued_systems = systems[1:]
        state.stage = "system_inferred"
        checkpoint.save(state.stage, state.to_dict())

    if not _stage_reached(state, "requirements_done"):
        sections = _complete_or_abort(
            gateway,
            "waterfall_requirements",
            {"system_description": state.system_description},
            "requirements",
        ).parsed
        state.system_description = (
            f"{state.system_description}\n\n{sections['System Overview']}"
        )
        state.requirements = sections["Requirements"]
        state.stage = "requirements_done"
        checkpoint.save(state.stage, state.to_dict())

    if not _stage_reached(state, "layout_done"):
        state.layout = str(
            _complete_or_abort(
                gateway,
                "waterfall_layout",
                {
                    "system_description": state.system_description,
                    "requirements": state.requirements,
                },
                "layout",
            ).parsed
        )
        state.stage = "layout_done"
        checkpoint.save(state.stage, state.to_dict())

    if not _stage_reached(state, "architecture_done"):
        state.architecture = _complete_or_abort(
            gateway,
            "waterfall_architecture",
            {
                "system_description": state.system_description,
                "requirements": state.requirements,
                "layouts": state.layout,
            },
            "architecture",
        ).parsed
        state.stage = "architecture_done"
        checkpoint.save(state.stage, state.to_dict())

    if not _stage_reached(state, "planned"):
        state.dev_plan = _plan_with_bounds(
            gateway,
            {
                "system_description": state.system_description,
                "requirements": state.requirements,
                "layouts": state.layout,
                "tech_architecture": state.architecture_text(),
            },
            params.waterfall_task_bounds,
            "dev_plan",
        )
        state.stage = "planned"
        checkpoint.save(state.stage, state.to_dict())

    drafts = _coding_loop(
        seed,
        state,
        gateway,
        correction_budget,
        start_implementation=EMPTY_IMPLEMENTATION,
        parent_id=seed.id,
        seq_start=0,
    )
    state.stage = "coding_done"
    checkpoint.save(state.stage, state.to_dict())
    return state, drafts


def waterfall_iterate(
    prev: WaterfallState,
    seed: SealedSnippet,
    params: SynthesisParams,
    gateway,
    correction_budget: int = 3,
) -> tuple[WaterfallState, list[SynthesizedInstance]]:
    """Second-round refinement: iterative requirements (summary + ******
    modifications), layout, architecture, then re-plan and re-code on top
    of the previous implementation."""
    if prev.stage != "coding_done" or not prev.task_snapshots:
        raise SynthesisError(
            "waterfall_iterate needs a state that completed its coding stage",
            stage="iterate",
        )
    last = prev.task_snapshots[-1]
    last_code = serialize_style_component(last.style_code, last.component_code)

    state = WaterfallState(
        seed_id=prev.seed_id,
        system_description=prev.system_description,
        queued_systems=list(prev.queued_systems),
        iteration=prev.iteration + 1,
        chain=VersionChain(entries=list(prev.chain.entries)),
    )

    sections = _complete_or_abort(
        gateway,
        "waterfall_requirements_iter",
        {
            "system_description": f"{prev.system_description}\n\n{prev.requirements}",
            "code_snippet": last_code,
        },
        "requirements_iter",
    ).parsed
    state.requirements = sections["Proposed Modifications/Requirements"]

    state.layout = str(
        _complete_or_abort(
            gateway,
            "waterfall_layout_iter",
            {
                "previous_layout_description": prev.layout,
                "requirements": state.requirements,
            },
            "layout_iter",
        ).parsed
    )

    state.architecture = _complete_or_abort(
        gateway,
        "waterfall_architecture_iter",
        {
            "previous_tech_architecture": prev.architecture_text(),
            "requirements": state.requirements,
            "layouts": state.layout,
        },
        "architecture_iter",
    ).parsed

    state.dev_plan = _plan_with_bounds(
        gateway,
        {
            "system_description": state.system_description,
            "requirements": state.requirements,
            "layouts": state.layout,
            "tech_architecture": state.architecture_text(),
        },
        params.waterfall_task_bounds,
        "dev_plan_iter",
    )

    drafts = _coding_loop(
        seed,
        state,
        gateway,
        correction_budget,
        start_implementation=last_code,
        parent_id=last.id,
        seq_start=len(prev.chain.entries),
    )
    state.stage = "coding_done"
    return state, drafts


# --- additive -------------------------------------------------------------------


def _format_system_record(record: dict[str, str]) -> str:
    return "\n".join(
        f"{key}: {record[key]}"
        for key in ("name", "category", "purpose", "code_snippet_usage", "complexity", "features")
    )


def _format_step(record: dict[str, str]) -> str:
    return (
        f"{record['title']}\n"
        f"Objective: {record['objective']}\n"
        f"Components/Logic Introduced: {record['components_logic']}\n"
        f"How It Builds on the Previous Step: {record['builds_on']}\n"
        f"Best Practices: {record['best_practices']}"
    )


def additive_run(
    seed: SealedSnippet,
    params: SynthesisParams,
    gateway,
    correction_budget: int = 3,
    example_systems: str = "(none)",
) -> tuple[VersionChain, list[SynthesizedInstance]]:
    """Step-wise extension of a human-authored snippet; the seed appears in
    every step's prompt and each step's raw-code reply is checked and
    sealed into the chain."""
    if not seed.sealed:
        raise SynthesisError("seed must be sealed", stage="additive")

    reminder = None
    systems = None
    for _attempt in range(2):
        exchange = _complete_or_abort(
            gateway,
            "additive_system_infer",
            {
                "infer_num": params.infer_num,
                "example_systems": example_systems,
                "code_snippet": seed.combined(),
            },
            "system_infer",
            reminder=reminder,
        )
        systems = exchange.parsed
        if len(systems) == params.infer_num:
            break
        reminder = (
            f"Reminder: propose exactly {params.infer_num} systems; the previous "
            f"response had {len(systems)}."
        )
    else:
        raise SynthesisError(
            f"stage system_infer: expected exactly {params.infer_num} systems",
            stage="system_infer",
        )
    system = systems[0]
    system_description = _format_system_record(system)

    min_steps, _target_hi = params.additive_step_bounds
    reminder = None
    steps = None
    for _attempt in range(2):
        exchange = _complete_or_abort(
            gateway,
            "additive_roadmap",
            {"system_description": system_description, "code_snippet": seed.combined()},
            "roadmap",
            reminder=reminder,
        )
        steps = exchange.parsed
        if len(steps) >= min_steps:
            break
        reminder = (
            f"Reminder: the roadmap needs at least {min_steps} development steps; "
            f"the previous response had {len(steps)}."
        )
    else:
        raise SynthesisError(
            f"stage roadmap: fewer than {min_steps} steps after a reprompt",
            stage="roadmap",
        )

    chain = VersionChain()
    drafts: list[SynthesizedInstance] = []
    current = seed.combined()
    parent = seed.id
    for step_idx, step in enumerate(steps, start=1):
        stage = f"step{step_idx}"
        task_text = _format_step(step)
        exchange = _complete_or_abort(
            gateway,
            "additive_code",
            {
                "system_description": system_description,
                "current_implementation": current,
                "next_task_description": task_text,
            },
            stage,
        )
        code = str(exchange.parsed)
        exchange_ids = [exchange.exchange_id]
        _style, code, check_ids = _checked_code(
            gateway, "additive_code_check", "", code, stage, raw_correction=True
        )
        exchange_ids.extend(check_ids)
        instance_id = f"{seed.id}:add:s{step_idx}"
        try:
            sealed = seal_pair(
                instance_id,
                "",
                code,
                gateway=gateway,
                correction_budget=correction_budget,
                origin=dict(seed.origin),
            )
        except SealError as exc:
            raise SynthesisError(f"stage {stage}: {exc}", stage=stage) from exc
        lineage = Lineage(
            seed_id=seed.id,
            strategy="additive",
            parent_id=parent,
            indices={"step": step_idx, "seq": step_idx},
            exchange_ids=exchange_ids,
        )
        drafts.append(
            SynthesizedInstance(
                id=instance_id,
                strategy="additive",
                component_code=sealed.component_code,
                style_code=sealed.style_code,
                task_description=f"{step['title']}: {step['objective']}",
                lineage=lineage.to_dict(),
                no_style=sealed.no_style,
            )
        )
        chain.entries.append(
            ChainEntry(
                instance_id=instance_id,
                style_code=sealed.style_code,
                component_code=sealed.component_code,
            )
        )
        current = sealed.component_code
        parent = instance_id
    return chain, drafts


# --- multi-image derivation -------------------------------------------------------


def derive_multi_image_pairs(
    chain: VersionChain,
) -> tuple[list[MultiImageEntry], list[str]]:
    """Consecutive (previous design+code, updated design) training pairs.
    Pairs touching an entry without a screenshot are skipped with a logged
    reason."""
    if len(chain) < 2:
        raise SynthesisError(
            f"version chain too short for pairing: {len(chain)} < 2", stage="multi_image"
        )
    entries: list[MultiImageEntry] = []
    skips: list[str] = []
    for i in range(len(chain.entries) - 1):
        a = chain.entries[i]
        b = chain.entries[i + 1]
        missing = [e.instance_id for e in (a, b) if not e.screenshot_hash]
        if missing:
            skips.append(
                f"pair ({a.instance_id}, {b.instance_id}) skipped: missing "
                f"screenshot for {', '.join(missing)}"
            )
            continue
        prompt_text = MULTI_IMAGE_PROMPT.format(
            image_1=f"images/{a.screenshot_hash}.png",
            image_2=f"images/{b.screenshot_hash}.png",
            css_code_for_image_1=a.style_code,
            imp_code_for_image_1=a.component_code,
        )
        entries.append(
            MultiImageEntry(
                image_1=a.screenshot_hash,
                style_1=a.style_code,
                component_1=a.component_code,
                image_2=b.screenshot_hash,
                target_style=b.style_code,
                target_component=b.component_code,
                prompt_text=prompt_text,
                code_only_diff=a.screenshot_hash == b.screenshot_hash,
            )
        )
    return entries, skips
