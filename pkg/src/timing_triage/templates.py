"""Prompt construction from text skeletons with ``{slot}`` placeholders.

Substitution is a single regex pass, so braces inside filled values (Verilog
concatenations, for instance) are never re-expanded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional

from timing_triage.config import data_path
from timing_triage.kb import TAXONOMY, UNKNOWN, KbEntry, violation_type_of
from timing_triage.paths import ViolationContext

SLOTS = (
    "design_code", "violation_block", "physical_path", "cause_text", "scenario",
    "repair_strategy", "demo_before", "demo_after", "output_contract",
)
TEMPLATE_IDS = ("cause_analysis", "repair_setup", "repair_hold", "repair_cdc")
_SLOT_RE = re.compile(r"\{([a-z_]+)\}")

OUTPUT_CONTRACT = (
    "Reply with exactly one fenced ```verilog code block containing the complete corrected module, "
    "keeping the module name and port list unchanged."
)
CAUSE_CONTRACT = "Answer in plain prose of a few sentences. Do not include any code."

# used when retrieval returns nothing for a known subscenario
SCENARIO_DESCRIPTIONS = {
    "long_comb_chain": "Too many combinational logic stages between two registers, so the serial delay overruns the clock period.",
    "deep_mux": "Selection logic is built from deeply nested multiplexers, stacking one select delay per level.",
    "low_pipe_stage": "Expensive arithmetic such as multiplication finishes in one cycle because the datapath has too few register stages.",
    "short_logic_path": "Data moves between registers through almost no logic, so it changes before the hold window ends.",
    "single_bit_trans": "A single-bit signal enters another clock domain with no synchronizer flops.",
    "multi_bits_trans": "A multi-bit value enters another clock domain without a handshake, so its bits can be captured inconsistently.",
}
TYPE_DESCRIPTIONS = {
    "setup": "Shorten the combinational path into the failing register, for example by adding a register stage or restructuring the logic.",
    "hold": "Add value-preserving delay on the short path into the failing register.",
    "cdc": "Synchronize the crossing signal in the destination clock domain before it is used.",
}
NO_DEMO = "// no example available for this scenario"


class TemplateError(Exception):
    pass


class MissingSlot(TemplateError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"template slot {name!r} has no value")


class NoKnowledge(TemplateError):
    pass


@dataclass(frozen=True)
class RepairPrompt:
    text: str
    template_id: str
    case_id: str = ""
    scenario: str = ""
    design_code: str = ""
    demo_after: Optional[str] = None
    metadata: Mapping[str, str] = field(default_factory=dict, compare=False)


@lru_cache(maxsize=None)
def load_skeleton(template_id: str) -> str:
    if template_id not in TEMPLATE_IDS:
        raise TemplateError(f"unknown template {template_id!r}")
    return data_path("templates", f"{template_id}.txt").read_text(encoding="utf-8")


def render(skeleton: str, values: Mapping[str, str]) -> str:
    """Fill every ``{slot}``; a referenced slot that is empty or absent fails."""

    def fill(m: re.Match) -> str:
        name = m.group(1)
        if name not in SLOTS:
            return m.group(0)
        value = values.get(name)
        if value is None or not str(value).strip():
            raise MissingSlot(name)
        return str(value)

    return _SLOT_RE.sub(fill, skeleton)


def _context_slots(ctx: ViolationContext) -> dict[str, str]:
    return {
        "design_code": ctx.source.rstrip("\n"),
        "violation_block": ctx.report_block,
        "physical_path": ctx.path_text,
    }


def build_cause_prompt(ctx: ViolationContext, case_id: str = "") -> RepairPrompt:
    values = {**_context_slots(ctx), "output_contract": CAUSE_CONTRACT}
    text = render(load_skeleton("cause_analysis"), values)
    return RepairPrompt(
        text=text,
        template_id="cause_analysis",
        case_id=case_id,
        design_code=ctx.source,
        metadata={"kind": "cause", "endpoint": ctx.endpoint, "vtype": ctx.violation.vtype},
    )


def repair_template_for(scenario: str, vtype: str) -> str:
    kind = violation_type_of(scenario) if scenario != UNKNOWN else None
    kind = kind or vtype
    if kind not in TAXONOMY:
        raise NoKnowledge(f"no repair template for violation type {kind!r}")
    return f"repair_{kind}"


def build_repair_prompt(
    scenario: str,
    entries: list[KbEntry],
    ctx: ViolationContext,
    cause: str,
    case_id: str = "",
    feedback: Optional[str] = None,
) -> RepairPrompt:
    """Repair prompt using the top retrieved entry; ``feedback`` explains a failed attempt."""
    vtype = ctx.violation.vtype
    if not entries and scenario == UNKNOWN and vtype not in TAXONOMY:
        raise NoKnowledge("no entries, unknown scenario and unknown violation type")
    template_id = repair_template_for(scenario, vtype)
    if entries:
        top = entries[0]
        strategy, before, after = top.repair_strategy, top.demo_before, top.demo_after
    else:
        strategy = SCENARIO_DESCRIPTIONS.get(scenario) or TYPE_DESCRIPTIONS[template_id.split("_", 1)[1]]
        before = after = NO_DEMO
    values = {
        **_context_slots(ctx),
        "cause_text": cause.strip(),
        "scenario": scenario,
        "repair_strategy": strategy,
        "demo_before": before.rstrip("\n"),
        "demo_after": after.rstrip("\n"),
        "output_contract": OUTPUT_CONTRACT,
    }
    text = render(load_skeleton(template_id), values)
    if feedback:
        text += (
            "\n## Previous attempt\n"
            f"The previous answer was rejected: {feedback.strip()}\n"
            "Correct the problem and answer again under the same rules.\n"
        )
    return RepairPrompt(
        text=text,
        template_id=template_id,
        case_id=case_id,
        scenario=scenario,
        design_code=ctx.source,
        demo_after=after if entries else None,
        metadata={"kind": "repair", "entry": entries[0].id if entries else "", "endpoint": ctx.endpoint},
    )


def unfilled_slots(text: str) -> list[str]:
    return [m.group(1) for m in _SLOT_RE.finditer(text) if m.group(1) in SLOTS]
