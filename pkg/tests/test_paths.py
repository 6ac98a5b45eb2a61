import json
import random

import pytest

from dag_gen import ENDPOINT, brute_force_paths, random_stdg
from timing_triage.analysis import analyze_source
from timing_triage.frontend.ast import NOLOC
from timing_triage.paths import (
    EmptyPathSet,
    LogicalPath,
    NotARegister,
    PathExplosion,
    build_violation_context,
    enumerate_logical_paths,
    longest_path_fallback,
    merge_to_physical,
    violation_path,
)
from timing_triage.stdg import EdgeKind, NodeKind, Stdg, StdgEdge, StdgNode, annotate
from timing_triage.timing import DelayModel

from conftest import FIXTURES

STA = json.loads((FIXTURES / "sta" / "expected.json").read_text())["cases"]
MODEL = DelayModel()


def graph(nodes, edges):
    """nodes: (name, kind, op); edges: (src, dst) by name."""
    built = []
    for i, (name, kind, op) in enumerate(nodes):
        extra = {"clock_domain": "clk", "edge": "rising"} if kind is NodeKind.REGISTER else {}
        if kind is NodeKind.PORT:
            extra = {"direction": "input"}
        built.append(StdgNode(i, kind, name, 1, NOLOC, op=op, **extra))
    ids = {n.name: n.id for n in built}
    return Stdg(tuple(built), tuple(StdgEdge(ids[s], ids[d], EdgeKind.DATA) for s, d in edges), ("clk",))


REG, OP = NodeKind.REGISTER, NodeKind.OPERATOR
DIAMOND = graph(
    [("a", REG, None), ("b", OP, "add"), ("c", OP, "not"), ("d", REG, None)],
    [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
)


def names(paths):
    return {p.names for p in paths}


def test_diamond_has_two_paths():
    assert names(enumerate_logical_paths(DIAMOND, "d")) == {("a", "b", "d"), ("a", "c", "d")}


def test_diamond_merges_to_slowest_branch():
    phys = merge_to_physical(enumerate_logical_paths(DIAMOND, "d"), MODEL)
    assert phys.names == ("a", "b", "d")
    assert phys.delay == pytest.approx(1.0)


def test_register_without_fanin_is_a_degenerate_path():
    assert names(enumerate_logical_paths(DIAMOND, "a")) == {("a",)}


def test_chain_of_three_operators():
    text = (FIXTURES / "sta" / "chain3.v").read_text()
    g = analyze_source(text, MODEL, [], 5.0).graph
    (p,) = enumerate_logical_paths(g, "r_dst")
    assert p.names == ("r_src", "add#1", "add#2", "add#3", "r_dst")


def test_not_a_register():
    with pytest.raises(NotARegister):
        enumerate_logical_paths(DIAMOND, "b")


def test_single_path_passes_through():
    (p,) = enumerate_logical_paths(DIAMOND, "a")
    assert merge_to_physical({p}, MODEL).path == p


def test_lexicographic_tie_break():
    g = graph(
        [("r", REG, None), ("beta", OP, "add"), ("alpha", OP, "add"), ("q", REG, None)],
        [("r", "beta"), ("r", "alpha"), ("beta", "q"), ("alpha", "q")],
    )
    assert merge_to_physical(enumerate_logical_paths(g, "q"), MODEL).names == ("r", "alpha", "q")


def test_reported_startpoint_filters_first():
    g = graph(
        [("slow", REG, None), ("fast", REG, None), ("m", OP, "mul"), ("x", OP, "xor"), ("q", REG, None)],
        [("slow", "m"), ("fast", "x"), ("m", "q"), ("x", "q")],
    )
    paths = enumerate_logical_paths(g, "q")
    assert merge_to_physical(paths, MODEL).names[0] == "slow"
    assert merge_to_physical(paths, MODEL, startpoint="fast").names == ("fast", "x", "q")
    assert merge_to_physical(paths, MODEL, startpoint="nobody").names[0] == "slow"


def test_merge_is_idempotent():
    phys = merge_to_physical(enumerate_logical_paths(DIAMOND, "d"), MODEL)
    assert merge_to_physical({phys.path}, MODEL) == phys


def test_empty_path_set():
    with pytest.raises(EmptyPathSet):
        merge_to_physical(set(), MODEL)


def test_enumeration_matches_brute_force_on_random_graphs():
    rng = random.Random(7)
    mismatches = 0
    for _ in range(1000):
        g = random_stdg(rng)
        if names(enumerate_logical_paths(g, ENDPOINT)) != brute_force_paths(g):
            mismatches += 1
    assert mismatches == 0


def test_dp_fallback_agrees_with_enumeration():
    rng = random.Random(11)
    for trial in range(300):
        g = random_stdg(rng)
        model = DelayModel(**{k: rng.choice([0.0, 0.5, 1.0]) for k in MODEL.to_dict()})  # coarse: many ties
        full = merge_to_physical(enumerate_logical_paths(g, ENDPOINT), model)
        dp = longest_path_fallback(g, ENDPOINT, model)
        assert dp.names == full.names, trial
        assert dp.delay == pytest.approx(full.delay)


def _ladder(stages):
    """2**stages logical paths: each stage offers two parallel operators."""
    nodes = [("r", REG, None)]
    edges = []
    prev = ["r"]
    for i in range(stages):
        pair = [f"p{i}", f"q{i}"]
        nodes += [(pair[0], OP, "add"), (pair[1], OP, "xor")]
        edges += [(s, d) for s in prev for d in pair]
        prev = pair
    nodes.append(("end", REG, None))
    edges += [(s, "end") for s in prev]
    return graph(nodes, edges)


def test_path_explosion_guard():
    g = _ladder(4)
    with pytest.raises(PathExplosion) as exc:
        enumerate_logical_paths(g, "end", limit=10)
    assert exc.value.endpoint == "end"
    assert len(enumerate_logical_paths(g, "end")) == 16


def test_explosion_falls_back_to_longest_path():
    g = _ladder(14)  # 16384 paths, above the default limit
    phys = violation_path(g, "end", MODEL)
    assert phys.names == ("r",) + tuple(f"p{i}" for i in range(14)) + ("end",)
    assert phys.delay == pytest.approx(14.0)


@pytest.mark.parametrize("case", [c for c in STA if c["violations"]], ids=lambda c: c["name"])
def test_path_delay_equals_arrival_minus_tcq(case):
    text = (FIXTURES / "sta" / case["design"]).read_text()
    model = MODEL.with_overrides(case["overrides"])
    result = analyze_source(text, model, [], case["period"])
    for v in result.report.paths:
        if v.vtype != "setup":
            continue
        phys = violation_path(result.graph, v.endpoint, model, v.startpoint)
        assert phys.delay == pytest.approx(v.arrival - model.t_cq, abs=1e-9)
        assert phys.names == v.path


TWO_VIOLATIONS = """module two(input clk, input [7:0] a, output reg [7:0] y, output reg [7:0] z);
  reg [7:0] r;
  always @(posedge clk) begin
    r <= a;
    y <= r * r;
    z <= r + r + r + r + r;
  end
endmodule
"""


def test_one_context_per_violation_in_report_order():
    result = analyze_source(TWO_VIOLATIONS, MODEL, [], 3.0)
    g = annotate(result.graph, result.report)
    ctxs = build_violation_context(g, result.report, TWO_VIOLATIONS, MODEL)
    assert [c.endpoint for c in ctxs] == [v.endpoint for v in result.report.ordered()] == ["z", "y"]
    for ctx in ctxs:
        assert ctx.report_block.startswith("VIOLATION setup")
        assert f"Path: {ctx.path_text}" in ctx.report_block
        with_loc = [n for n in ctx.physical_path.path.nodes if n.loc is not None and n.loc != NOLOC]
        assert len(ctx.path_source_excerpts) == len(with_loc)
        assert ctx.source == TWO_VIOLATIONS


def test_excerpts_point_at_source_lines():
    result = analyze_source(TWO_VIOLATIONS, MODEL, [], 3.0)
    ctx = build_violation_context(result.graph, result.report, TWO_VIOLATIONS, MODEL)[1]
    lines = TWO_VIOLATIONS.splitlines()
    for loc, text in ctx.path_source_excerpts:
        assert text == lines[loc.line - 1].rstrip()
    assert any("r * r" in text for _, text in ctx.path_source_excerpts)


def test_cdc_context_runs_source_to_destination():
    text = (FIXTURES.parent.parent / "dataset" / "cdc.single_bit_trans.simple.01" / "faulty.v").read_text()
    result = analyze_source(text, MODEL, [], 5.0)
    (ctx,) = build_violation_context(result.graph, result.report, text, MODEL)
    assert ctx.violation.vtype == "cdc"
    src = ctx.physical_path.path.startpoint
    dst = ctx.physical_path.path.endpoint
    assert src.is_register and dst.is_register
    assert src.clock_domain != dst.clock_domain
    assert dst.name == ctx.endpoint
    assert "Synchronizer: none" in ctx.report_block


def test_logical_path_needs_a_node():
    with pytest.raises(ValueError):
        LogicalPath(())
