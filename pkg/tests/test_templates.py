from dataclasses import replace

import pytest

from timing_triage.analysis import analyze_source
from timing_triage.injector import load_case
from timing_triage.kb import UNKNOWN, retrieve
from timing_triage.paths import build_violation_context
from timing_triage.templates import (
    OUTPUT_CONTRACT,
    SLOTS,
    MissingSlot,
    NoKnowledge,
    build_cause_prompt,
    build_repair_prompt,
    render,
    unfilled_slots,
)

from conftest import DATASET


def context(case_id):
    case = load_case(DATASET / case_id)
    model = case.delay_model()
    result = analyze_source(case.faulty, model, case.clock_constraints())
    (ctx,) = build_violation_context(result.graph, result.report, case.faulty, model)
    return case, ctx


def test_cause_prompt_carries_path_line():
    case, ctx = context("setup.long_comb_chain.simple.01")
    prompt = build_cause_prompt(ctx, case.case_id)
    assert f"Path: {ctx.path_text}" in prompt.text
    assert prompt.template_id == "cause_analysis"
    assert prompt.metadata["kind"] == "cause"
    assert prompt.text.count(case.faulty.rstrip("\n")) == 1


def test_cdc_cause_prompt_names_both_clocks():
    _, ctx = context("cdc.single_bit_trans.simple.01")
    text = build_cause_prompt(ctx).text
    assert "clk_a" in text and "clk_b" in text


def test_empty_source_is_a_missing_slot():
    _, ctx = context("setup.deep_mux.simple.01")
    with pytest.raises(MissingSlot) as exc:
        build_cause_prompt(replace(ctx, source=""))
    assert exc.value.name == "design_code"


def test_repair_prompt_embeds_demo_pair(kb):
    case, ctx = context("cdc.single_bit_trans.simple.01")
    entry = retrieve(kb, "cdc", "single_bit_trans")[0]
    prompt = build_repair_prompt("single_bit_trans", [entry], ctx, case.reference_cause, case.case_id)
    assert prompt.template_id == "repair_cdc"
    assert entry.demo_before.rstrip("\n") in prompt.text
    assert entry.demo_after.rstrip("\n") in prompt.text
    assert entry.repair_strategy in prompt.text
    assert OUTPUT_CONTRACT in prompt.text
    assert prompt.text.count(case.faulty.rstrip("\n")) == 1
    assert prompt.demo_after == entry.demo_after


def test_unknown_scenario_uses_type_template(kb):
    case, ctx = context("setup.low_pipe_stage.simple.01")
    entries = retrieve(kb, "setup", UNKNOWN)
    prompt = build_repair_prompt(UNKNOWN, entries, ctx, "something slow", case.case_id)
    assert prompt.template_id == "repair_setup"
    assert entries[0].repair_strategy in prompt.text


def test_no_entries_falls_back_to_scenario_description():
    _, ctx = context("setup.long_comb_chain.simple.01")
    prompt = build_repair_prompt("long_comb_chain", [], ctx, "a long adder chain")
    assert "Too many combinational logic stages" in prompt.text
    assert unfilled_slots(prompt.text) == []


def test_no_knowledge_at_all():
    _, ctx = context("setup.long_comb_chain.simple.01")
    odd = replace(ctx, violation=replace(ctx.violation, vtype="glitch"))
    with pytest.raises(NoKnowledge):
        build_repair_prompt(UNKNOWN, [], odd, "unclear")


def test_rendering_is_deterministic(kb):
    case, ctx = context("hold.short_logic_path.complex.01")
    entries = retrieve(kb, "hold", "short_logic_path")
    a = build_repair_prompt("short_logic_path", entries, ctx, case.reference_cause, case.case_id)
    b = build_repair_prompt("short_logic_path", entries, ctx, case.reference_cause, case.case_id)
    assert a.text == b.text and a.template_id == "repair_hold"


def test_feedback_is_appended(kb):
    case, ctx = context("setup.deep_mux.simple.01")
    entries = retrieve(kb, "setup", "deep_mux")
    plain = build_repair_prompt("deep_mux", entries, ctx, "cause", case.case_id)
    retry = build_repair_prompt("deep_mux", entries, ctx, "cause", case.case_id, feedback="violation persists")
    assert retry.text.startswith(plain.text)
    assert "violation persists" in retry.text[len(plain.text):]


@pytest.mark.parametrize("case_id", [
    "setup.long_comb_chain.complex.01", "setup.deep_mux.complex.01", "setup.low_pipe_stage.complex.01",
    "hold.short_logic_path.simple.01", "cdc.single_bit_trans.complex.01", "cdc.multi_bits_trans.complex.01",
])
def test_no_unfilled_slots(kb, case_id):
    case, ctx = context(case_id)
    cause_prompt = build_cause_prompt(ctx, case.case_id)
    repair = build_repair_prompt(case.subscenario, retrieve(kb, case.violation_type, case.subscenario), ctx,
                                 case.reference_cause, case.case_id)
    for text in (cause_prompt.text, repair.text):
        assert unfilled_slots(text) == []


def test_braces_in_values_are_not_expanded():
    text = render("{design_code}|{scenario}", {"design_code": "assign y = {a, {scenario}};", "scenario": "x"})
    assert text == "assign y = {a, {scenario}};|x"


def test_render_requires_every_referenced_slot():
    with pytest.raises(MissingSlot):
        render("{cause_text}", {})
    assert render("{not_a_slot}", {}) == "{not_a_slot}"
    assert "output_contract" in SLOTS
