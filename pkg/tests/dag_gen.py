"""Random signal graphs for property tests, plus a brute-force path oracle."""

import random

import networkx as nx

from timing_triage.frontend.ast import NOLOC
from timing_triage.stdg import EdgeKind, NodeKind, Stdg, StdgEdge, StdgNode
from timing_triage.timing.engine import OP_CLASS

OPS = sorted(OP_CLASS)
ENDPOINT = "v_viol"


def random_stdg(rng: random.Random, max_comb: int = 12) -> Stdg:
    """Startpoints s*, up to ``max_comb`` combinational nodes c*, one endpoint register."""
    nodes: list[StdgNode] = []
    edges: set[StdgEdge] = set()

    def add(kind, name, **kw):
        nodes.append(StdgNode(len(nodes), kind, name, 1, NOLOC, **kw))
        return len(nodes) - 1

    starts = []
    for i in range(rng.randint(1, 3)):
        if rng.random() < 0.5:
            starts.append(add(NodeKind.REGISTER, f"s{i}", clock_domain="clk", edge="rising"))
        else:
            starts.append(add(NodeKind.PORT, f"s{i}", direction="input"))
    comb = []
    for j in range(rng.randint(0, max_comb)):
        roll = rng.random()
        earlier = starts + comb
        if roll < 0.1:
            comb.append(add(NodeKind.CONSTANT, f"k{j}"))
            continue
        if roll < 0.25:
            nid = add(NodeKind.WIRE, f"w{j}")
        else:
            op = rng.choice(OPS)
            nid = add(NodeKind.OPERATOR, f"{op}#{j}", op=op)
        for p in rng.sample(earlier, min(len(earlier), rng.randint(1, 3))):
            kind = EdgeKind.CONTROL if rng.random() < 0.2 else EdgeKind.DATA
            edges.add(StdgEdge(p, nid, kind))
        comb.append(nid)
    end = add(NodeKind.REGISTER, ENDPOINT, clock_domain="clk", edge="rising")
    pool = starts + comb
    for p in rng.sample(pool, min(len(pool), rng.randint(1, 3))):
        edges.add(StdgEdge(p, end, EdgeKind.DATA))
    # feedback into registers: traversal must stop there
    for s in starts:
        if nodes[s].kind is NodeKind.REGISTER and comb and rng.random() < 0.3:
            edges.add(StdgEdge(rng.choice(comb), s, EdgeKind.DATA))
    return Stdg(tuple(nodes), tuple(sorted(edges, key=lambda e: (e.src, e.dst, e.kind.value))), ("clk",))


def brute_force_paths(g: Stdg, endpoint: str = ENDPOINT) -> set[tuple[str, ...]]:
    """All simple startpoint-to-endpoint paths whose interior holds no startpoint."""
    end = g.by_name[endpoint]
    dg = nx.DiGraph()
    dg.add_nodes_from(n.id for n in g.nodes)
    for e in g.edges:
        if g.nodes[e.dst].is_startpoint and e.dst != end.id:
            continue
        dg.add_edge(e.src, e.dst)
    found = set()
    for n in g.nodes:
        if n.is_startpoint and n.id != end.id:
            for p in nx.all_simple_paths(dg, n.id, end.id):
                found.add(tuple(g.nodes[i].name for i in p))
    return found or {(endpoint,)}
