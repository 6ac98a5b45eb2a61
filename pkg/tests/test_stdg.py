import json

import pytest

from timing_triage.frontend import parse
from timing_triage.stdg import (
    CombinationalLoop,
    EdgeKind,
    KindMismatch,
    MultipleDrivers,
    NodeKind,
    UnknownEndpoint,
    annotate,
    build,
    expected_node_count,
)
from timing_triage.timing.report import CdcFinding, TimingPath, TimingReport

from conftest import FIXTURES, seed_files

SEED_COUNTS = json.loads((FIXTURES / "seed_corpus.json").read_text())


def _setup(endpoint, slack=-1.2, start="r_src"):
    return TimingPath("setup", start, endpoint, (start, endpoint), 0.0, 0.0, slack, "clk", "clk")


def test_register_chain():
    g = build(parse(
        "module m(input clk, input a, output reg r2); reg r1;"
        " always @(posedge clk) begin r1 <= a; r2 <= r1; end endmodule"
    ))
    regs = {n.name: n.clock_domain for n in g.registers()}
    assert regs == {"r1": "clk", "r2": "clk"}
    assert g.edge_set() == {("a", "r1", "Data"), ("r1", "r2", "Data")}


def test_control_edge_from_condition():
    g = build(parse("module m(input clk, input en, input d, output reg r); always @(posedge clk) if (en) r <= d; endmodule"))
    assert g.edge_set() == {("en", "r", "Control"), ("d", "r", "Data")}


def test_plain_assign_has_no_registers():
    g = build(parse("module m(input x, output y); assign y = x; endmodule"))
    assert g.registers() == []
    assert g.edge_set() == {("x", "y", "Data")}
    assert all(e.kind is EdgeKind.DATA for e in g.edges)


def test_operator_nodes_are_named_and_fed():
    g = build(parse("module m(input [3:0] a, input [3:0] b, output [3:0] y); assign y = (a + b) & a; endmodule"))
    ops = [n for n in g.nodes if n.kind is NodeKind.OPERATOR]
    assert sorted(n.name for n in ops) == ["add#1", "and#1"]
    assert all(g.predecessors(n.id) for n in ops)
    assert g.node("add#1").width == 4


def test_case_guards_every_arm_target():
    g = build(parse(
        "module m(input clk, input [1:0] s, input a, input b, output reg y, output reg z);"
        " always @(posedge clk) case (s) 2'd0: y <= a; default: z <= b; endcase endmodule"
    ))
    assert ("s", "y", "Control") in g.edge_set()
    assert ("s", "z", "Control") in g.edge_set()


@pytest.mark.parametrize("path", seed_files(), ids=lambda p: p.name)
def test_seed_node_counts_match_hand_counts(path):
    want = SEED_COUNTS[path.name]
    mod = parse(path.read_text())
    g = build(mod)
    assert mod.name == want["module"]
    assert len(g.nodes) == want["nodes"] == expected_node_count(mod)
    assert len(g.registers()) == want["registers"]
    assert sum(n.kind is NodeKind.OPERATOR for n in g.nodes) == want["operators"]
    assert sum(n.kind is NodeKind.CONSTANT for n in g.nodes) == want["constants"]


def test_one_node_per_signal_name():
    g = build(parse((FIXTURES / "frontend" / "diamond_mux.v").read_text()))
    names = [n.name for n in g.nodes]
    assert len(names) == len(set(names))
    assert len(g.nodes) == expected_node_count(parse((FIXTURES / "frontend" / "diamond_mux.v").read_text()))


def test_combinational_loop_rejected():
    with pytest.raises(CombinationalLoop):
        build(parse("module m(input a, output y); wire p, q; assign p = q & a; assign q = p | a; assign y = q; endmodule"))


def test_register_feedback_is_not_a_loop():
    g = build(parse("module m(input clk, output reg [3:0] c); always @(posedge clk) c <= c + 4'd1; endmodule"))
    assert ("add#1", "c", "Data") in g.edge_set()


def test_multiple_drivers_rejected():
    with pytest.raises(MultipleDrivers):
        build(parse(
            "module m(input clk, input a, output reg r);"
            " always @(posedge clk) r <= a; always @(posedge clk) r <= ~a; endmodule"
        ))


# ---- annotate ----------------------------------------------------------------

CHAIN = "module m(input clk, input d, output reg r_dst); reg r_src; always @(posedge clk) begin r_src <= d; r_dst <= r_src; end endmodule"


def test_annotate_attaches_violation():
    g = annotate(build(parse(CHAIN)), TimingReport(paths=(_setup("r_dst"),)))
    info = g.node("r_dst").violation
    assert (info.vtype, info.slack, info.report_startpoint) == ("setup", -1.2, "r_src")
    assert g.node("r_src").violation is None


def test_annotate_unknown_endpoint():
    with pytest.raises(UnknownEndpoint) as exc:
        annotate(build(parse(CHAIN)), TimingReport(paths=(_setup("ghost"),)))
    assert exc.value.name == "ghost"


def test_annotate_non_register():
    with pytest.raises(KindMismatch):
        annotate(build(parse(CHAIN)), TimingReport(paths=(_setup("d"),)))


def test_annotate_empty_report_is_identity():
    g = build(parse(CHAIN))
    assert annotate(g, TimingReport()) == g


def test_annotate_idempotent_and_commutes():
    g = build(parse(CHAIN))
    a = TimingReport(paths=(_setup("r_dst"),))
    b = TimingReport(cdc=(CdcFinding("x", "clk_a", "r_src", "clk", 1, "none"),))
    once = annotate(g, a)
    assert annotate(once, a) == once
    assert annotate(annotate(g, a), b) == annotate(annotate(g, b), a)
