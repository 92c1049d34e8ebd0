import json

import pytest

from fesynth.config import SynthesisParams
from fesynth.errors import SynthesisError
from fesynth.gateway import Gateway, ScriptedProvider
from fesynth.seal import validate_rules
from fesynth.synthesis import (
    ChainEntry,
    VersionChain,
    additive_run,
    derive_multi_image_pairs,
    evolve,
    waterfall_iterate,
    waterfall_run,
)

from fakes import SynthesisScript, make_seed


def gw(script):
    return Gateway(ScriptedProvider(script), provider_retries=0, backoff_s=0.0)


@pytest.fixture
def seed():
    return make_seed()


# --- evolution -----------------------------------------------------------------


def test_evolution_all_distinct(seed):
    params = SynthesisParams(strategy="evolution", rounds=3)
    result = evolve(seed, params, gw(SynthesisScript()))
    assert len(result.variations) == 3
    assert result.rejected_nondistinct == []
    parents = {d.lineage["parent_id"] for d in result.drafts}
    assert parents == {seed.id}  # each variation branches from the seed


def test_evolution_discards_nondistinct(seed):
    params = SynthesisParams(strategy="evolution", rounds=3)
    script = SynthesisScript(novelty=["Yes", "No", "Yes"])
    result = evolve(seed, params, gw(script))
    assert len(result.variations) == 2
    assert len(result.rejected_nondistinct) == 1
    assert ".v2" in result.rejected_nondistinct[0]


def test_evolution_seal_failure_feeds_next_prompt(seed):
    params = SynthesisParams(strategy="evolution", rounds=2)

    base = SynthesisScript()
    calls = {"n": 0}

    def script(prompt, sampling, images):
        if "Objective: Enhance or modify" in prompt:
            calls["n"] += 1
            if calls["n"] == 1:
                # variation importing a local file -> sealing failure
                return (
                    "STYLE_VARIATION:.bad{}###COMPONENT_VARIATION:"
                    "import Broken from './Broken';\n"
                    "const V = () => <Broken/>;\nexport default V;"
                )
            assert "sealing failed" in prompt  # failed attempt fed back
            return base(prompt, sampling, images)
        if "failed self-containment validation" in prompt:
            # agent cannot fix it either
            return (
                "STYLE:.bad{}###COMPONENT:import Broken from './Broken';\n"
                "const V = () => <Broken/>;\nexport default V;"
            )
        return base(prompt, sampling, images)

    result = evolve(seed, params, gw(script), correction_budget=1)
    assert len(result.variations) == 1
    assert len(result.failed_attempts) == 1
    assert "local-import" in result.failed_attempts[0]


def test_evolution_variations_pass_sealing_rules(seed):
    params = SynthesisParams(strategy="evolution", rounds=3)
    result = evolve(seed, params, gw(SynthesisScript()))
    for v in result.variations:
        assert validate_rules(v.component_code, v.style_code, v.no_style) == []


def test_evolution_respects_max_variations(seed):
    params = SynthesisParams(strategy="evolution", rounds=5, max_variations=2)
    result = evolve(seed, params, gw(SynthesisScript()))
    assert len(result.variations) == 2


# --- waterfall ------------------------------------------------------------------


def test_waterfall_happy_path_12_tasks(seed):
    params = SynthesisParams(strategy="waterfall")
    state, drafts = waterfall_run(seed, params, gw(SynthesisScript(task_count=12)))
    assert len(drafts) == 12
    assert state.stage == "coding_done"
    tasks = [d.lineage["indices"]["task"] for d in drafts]
    assert tasks == list(range(1, 13))
    seqs = [d.lineage["indices"]["seq"] for d in drafts]
    assert seqs == sorted(seqs)
    assert len(state.queued_systems) == 2  # infer_num - 1 queued


def test_waterfall_plan_out_of_bounds_fails_after_reprompt(seed):
    params = SynthesisParams(strategy="waterfall")
    with pytest.raises(SynthesisError) as err:
        waterfall_run(seed, params, gw(SynthesisScript(task_count=9)))
    assert err.value.stage == "dev_plan"


def test_waterfall_plan_bound_recovers_on_reprompt(seed):
    params = SynthesisParams(strategy="waterfall")
    inner = SynthesisScript(task_count=11)
    state = {"plan_calls": 0}

    def script(prompt, sampling, images):
        if "Design a step-by-step development plan" in prompt:
            state["plan_calls"] += 1
            if state["plan_calls"] == 1:
                from fakes import task_plan

                return task_plan(9)
            assert "Reminder" in prompt
        return inner(prompt, sampling, images)

    _state, drafts = waterfall_run(seed, params, gw(script))
    assert len(drafts) == 11


def test_waterfall_corrected_task_stores_corrected_pair(seed):
    params = SynthesisParams(strategy="waterfall")
    corrected = (
        "STYLE:.corrected { color: green; }###COMPONENT:import React from 'react';\n"
        "const App = () => <div className=\"corrected\">fixed</div>;\nexport default App;"
    )
    script = SynthesisScript(task_count=10, corrections={3: corrected})
    _state, drafts = waterfall_run(seed, params, gw(script))
    assert ".corrected" in drafts[2].style_code
    assert "fixed" in drafts[2].component_code
    assert ".t3" not in drafts[2].style_code


def test_waterfall_drafts_pass_sealing_rules(seed):
    params = SynthesisParams(strategy="waterfall")
    _state, drafts = waterfall_run(seed, params, gw(SynthesisScript(task_count=10)))
    for d in drafts:
        assert validate_rules(d.component_code, d.style_code, d.no_style) == []


def test_waterfall_iterate_appends_chain_segment(seed):
    params = SynthesisParams(strategy="waterfall")
    script = SynthesisScript(task_count=10)
    state, drafts = waterfall_run(seed, params, gw(script))
    first_len = len(state.chain)
    gateway2 = gw(script)
    state2, drafts2 = waterfall_iterate(state, seed, params, gateway2)
    assert state2.iteration == 2
    assert len(state2.chain) == first_len + len(drafts2)
    assert drafts2[0].lineage["parent_id"] == drafts[-1].id


def test_waterfall_iterate_requires_completed_state(seed):
    from fesynth.synthesis import WaterfallState

    params = SynthesisParams(strategy="waterfall")
    with pytest.raises(SynthesisError):
        waterfall_iterate(WaterfallState(seed_id=seed.id), seed, params, gw(SynthesisScript()))


def test_waterfall_checkpoint_resume_skips_done_stages(seed):
    from fesynth.errors import ProviderError
    from fesynth.synthesis import Checkpointer

    params = SynthesisParams(strategy="waterfall")
    inner = SynthesisScript(task_count=10)
    snapshots = {}

    def failing_at_architecture(prompt, sampling, images):
        if "infer the technical architecture" in prompt:
            raise ProviderError("interrupted")
        return inner(prompt, sampling, images)

    checkpointer = Checkpointer(lambda stage, payload: snapshots.update({stage: payload}))
    with pytest.raises(SynthesisError):
        waterfall_run(
            seed, params, gw(failing_at_architecture), checkpoint=checkpointer
        )
    assert "layout_done" in snapshots

    resumed_provider = SynthesisScript(task_count=10)

    def counting(prompt, sampling, images):
        assert "Task: Given a code snippet, infer the system" not in prompt, (
            "resume must not re-run the system inference stage"
        )
        assert "Infer the requirements of the system" not in prompt
        return resumed_provider(prompt, sampling, images)

    state, drafts = waterfall_run(
        seed, params, gw(counting), restore=snapshots["layout_done"]
    )
    assert state.stage == "coding_done"
    assert len(drafts) == 10


def test_waterfall_missing_divider_aborts(seed):
    params = SynthesisParams(strategy="waterfall")
    inner = SynthesisScript(task_count=10)

    def script(prompt, sampling, images):
        if "Task: Review and make great modifications to the requirements" in prompt:
            return "Current Project Summary\nstuff\nno divider or second head"
        return inner(prompt, sampling, images)

    state, _ = waterfall_run(seed, params, gw(inner))
    with pytest.raises(SynthesisError) as err:
        waterfall_iterate(state, seed, params, gw(script))
    assert err.value.stage == "requirements_iter"


# --- additive --------------------------------------------------------------------


def test_additive_17_steps(seed):
    params = SynthesisParams(strategy="additive", infer_num=3)
    chain, drafts = additive_run(seed, params, gw(SynthesisScript(step_count=17)))
    assert len(drafts) == 17
    assert len(chain) == 17
    steps = [d.lineage["indices"]["step"] for d in drafts]
    assert steps == list(range(1, 18))


def test_additive_roadmap_too_short_fails(seed):
    params = SynthesisParams(strategy="additive")
    with pytest.raises(SynthesisError) as err:
        additive_run(seed, params, gw(SynthesisScript(step_count=9)))
    assert err.value.stage == "roadmap"


def test_additive_wrong_key_schema_error(seed):
    params = SynthesisParams(strategy="additive")
    inner = SynthesisScript()

    def script(prompt, sampling, images):
        if "propose exactly" in prompt:
            bad = json.loads(__import__("fakes").systems_json(3))
            for record in bad:
                record["Purpose"] = record.pop("purpose")
            return json.dumps(bad)
        return inner(prompt, sampling, images)

    with pytest.raises(SynthesisError) as err:
        additive_run(seed, params, gw(script))
    assert err.value.stage == "system_infer"


def test_additive_accepts_fenced_code(seed):
    params = SynthesisParams(strategy="additive")
    inner = SynthesisScript(step_count=15)

    def script(prompt, sampling, images):
        out = inner(prompt, sampling, images)
        if "The generated code should be consistent" in prompt:
            return f"```jsx\n{out}\n```"
        return out

    chain, drafts = additive_run(seed, params, gw(script))
    assert len(drafts) == 15
    assert not drafts[0].component_code.startswith("```")


def test_additive_steps_have_no_style_marker(seed):
    params = SynthesisParams(strategy="additive")
    _chain, drafts = additive_run(seed, params, gw(SynthesisScript(step_count=15)))
    assert all(d.no_style for d in drafts)
    assert all(d.style_code == "" for d in drafts)


# --- reproducibility ---------------------------------------------------------------


def serialize_run(drafts):
    return json.dumps([d.to_dict() for d in drafts], sort_keys=True)


def test_strategy_runs_are_bit_reproducible(seed):
    params = SynthesisParams(strategy="waterfall")
    runs = []
    for _ in range(2):
        _state, drafts = waterfall_run(seed, params, gw(SynthesisScript(task_count=10)))
        runs.append(serialize_run(drafts))
    assert runs[0] == runs[1]

    evo_runs = []
    for _ in range(2):
        result = evolve(seed, SynthesisParams(strategy="evolution"), gw(SynthesisScript()))
        evo_runs.append(serialize_run(result.drafts))
    assert evo_runs[0] == evo_runs[1]

    add_runs = []
    for _ in range(2):
        _chain, drafts = additive_run(
            seed, SynthesisParams(strategy="additive"), gw(SynthesisScript())
        )
        add_runs.append(serialize_run(drafts))
    assert add_runs[0] == add_runs[1]


def test_lineage_forms_a_forest(seed):
    params = SynthesisParams(strategy="waterfall")
    _state, drafts = waterfall_run(seed, params, gw(SynthesisScript(task_count=10)))
    by_id = {d.id: d for d in drafts}
    for d in drafts:
        hops = 0
        cursor = d
        while cursor.lineage["parent_id"] != seed.id:
            cursor = by_id[cursor.lineage["parent_id"]]
            hops += 1
            assert hops < 100
        assert cursor.lineage["seed_id"] == seed.id


# --- multi-image -------------------------------------------------------------------


def chain_with_screens(n, missing=()):
    return VersionChain(
        entries=[
            ChainEntry(
                instance_id=f"v{i}",
                style_code=f".v{i}{{}}",
                component_code=f"const V{i}=()=><i/>;export default V{i};",
                screenshot_hash="" if i in missing else f"{i:064x}",
            )
            for i in range(1, n + 1)
        ]
    )


def test_chain_of_five_gives_four_entries():
    entries, skips = derive_multi_image_pairs(chain_with_screens(5))
    assert len(entries) == 4
    assert skips == []
    assert entries[0].image_1 != entries[0].image_2


def test_chain_of_one_precondition_error():
    with pytest.raises(SynthesisError):
        derive_multi_image_pairs(chain_with_screens(1))


def test_middle_gap_skips_both_pairs():
    entries, skips = derive_multi_image_pairs(chain_with_screens(3, missing={2}))
    assert entries == []
    assert len(skips) == 2


def test_entry_prompt_mentions_both_images():
    entries, _ = derive_multi_image_pairs(chain_with_screens(2))
    prompt = entries[0].prompt_text
    assert "image_1" in prompt and "image_2" in prompt
    assert entries[0].target_component.startswith("const V2")
