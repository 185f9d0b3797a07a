import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from priority_sim.enumeration import CEFamily
from priority_sim.graphs import (
    ORACLE_COPY, PLAIN_G, Config, GraphError, LiveHost, LoopRecord, NodeAllocator, StagedGraph,
    configuration_of, find_iso_copies, find_loop_copies, homogenize, oldest_lex_least,
)
from priority_sim.poset import PosetSpec

P = PosetSpec.build(["q"], partition0=[], partition1=["q"])


def make_graphs(stages=3):
    F = CEFamily(P)
    nodes = NodeAllocator()
    G = StagedGraph(PLAIN_G, "G", nodes)
    B = StagedGraph(ORACLE_COPY, "B[q]", nodes, F, "q")
    for s in range(1, stages + 1):
        F.advance(s)
        G.add_stage_components(s)
        B.add_stage_components(s)
    return F, G, B


def test_stage_components_initial():
    _, G, B = make_graphs(2)
    assert G.live_lengths(4) == [2, 11]
    assert G.live_lengths(5) == [2, 12]
    assert G.configuration(4) == Config.INITIAL
    assert B.configuration(5) == Config.INITIAL
    with pytest.raises(GraphError):
        G.add_stage_components(2)
    with pytest.raises(GraphError):
        G.add_stage_components(0)


def test_g_loops_carry_no_use():
    _, G, _ = make_graphs(1)
    with pytest.raises(GraphError):
        G.attach_loop(2, 5, 3, 1)


def test_configuration_tables():
    n = 3
    assert configuration_of([2, 16, 18], 6) == Config.STARTED
    assert configuration_of([2, 17, 19], 7) == Config.STARTED
    assert configuration_of([2, 16, 17, 18], 6) == Config.HOMOGENIZED_G
    assert configuration_of([2, 16, 17, 19], 6, PLAIN_G) == Config.INVALID
    assert configuration_of([2, 16, 17, 19], 6, ORACLE_COPY) == Config.HOMOGENIZED_B_EVEN
    assert configuration_of([2, 16, 17, 18], 7, ORACLE_COPY) == Config.HOMOGENIZED_B_ODD
    assert configuration_of([16], 6) == Config.INVALID
    assert configuration_of([2, 16, 99], 2 * n) == Config.INVALID


def test_b_loop_dies_with_its_tag():
    F, _, B = make_graphs(1)
    pos = P.pair(8, "q")
    lp = B.attach_loop(2, 8, pos, 1, role="challenge")
    assert B.is_live(lp)
    F.enumerate("q", 7, 1, "t")
    assert B.is_live(lp)
    F.enumerate("q", 8, 1, "t")
    assert not B.is_live(lp)
    assert B.live_lengths(2) == [2, 6]


def test_homogenize_single_pair():
    F, G, B = make_graphs(2)
    n = 2
    G.attach_loop(4, 13, None, 2, role="challenge")
    G.attach_loop(5, 14, None, 2, role="challenge")
    v = 50
    pos = P.pair(v, "q")
    B.attach_loop(4, 13, pos, 2, role="challenge")
    B.attach_loop(5, 14, pos, 2, role="challenge")
    with pytest.raises(GraphError):
        homogenize(G, B, n, 2)
    F.enumerate("q", v, 2, "R")
    homogenize(G, B, n, 2)
    assert G.live_lengths(4) == [2, 11, 12, 13]
    assert G.live_lengths(5) == [2, 11, 12, 14]
    assert B.live_lengths(4) == [2, 11, 12, 14]
    assert B.live_lengths(5) == [2, 11, 12, 13]
    with pytest.raises(GraphError):
        homogenize(G, B, n, 2)


def test_locate():
    _, G, _ = make_graphs(2)
    root = G.components[4].root
    assert G.locate(root) == (4, None, 0)
    lp = G.find_loop(4, 11)
    assert G.locate(lp.first + 3) == (4, lp, 4)
    assert G.locate(10**9) is None


# -- matching against exhaustive search ---------------------------------------------

@st.composite
def hosts(draw):
    """Root-plus-loops components with at most 60 nodes in total."""
    loops, budget, nxt, lid = [], 60, 0, 0
    for _ in range(draw(st.integers(0, 6))):
        root = nxt
        nxt += 1
        budget -= 1
        for _ in range(draw(st.integers(1, 3))):
            length = draw(st.integers(2, 6))
            if length - 1 > budget:
                break
            birth = draw(st.integers(0, 4))
            loops.append(LoopRecord(lid, root, length, nxt, birth))
            lid += 1
            nxt += length - 1
            budget -= length - 1
        if budget <= 1:
            break
    return loops


def flower(lengths):
    g = nx.DiGraph()
    g.add_node(0)
    nxt = 1
    for length in lengths:
        cyc = [0] + list(range(nxt, nxt + length - 1))
        nxt += length - 1
        nx.add_cycle(g, cyc)
    return g


def exhaustive(pattern, loops):
    """Every weakly connected host component isomorphic to the pattern, with its age."""
    host = nx.DiGraph()
    birth = {}
    for lp in loops:
        ns = lp.nodes
        for i in range(len(ns)):
            e = (ns[i], ns[(i + 1) % len(ns)])
            host.add_edge(*e)
            birth[e] = lp.birth
    target = flower(pattern)
    out = []
    for comp in nx.weakly_connected_components(host):
        sub = host.subgraph(comp)
        if nx.is_isomorphic(sub, target):
            out.append((max(birth[e] for e in sub.edges), tuple(sorted(comp))))
    return sorted(out, key=lambda m: m[1])


@settings(max_examples=150, deadline=None)
@given(hosts(), st.data())
def test_find_iso_copies_equals_exhaustive(loops, data):
    host = LiveHost(loops)
    shapes = sorted(host.by_shape) or [(2,)]
    pattern = data.draw(st.one_of(st.sampled_from(shapes),
                                  st.lists(st.integers(2, 6), min_size=1, max_size=3)))
    got = [(m.age, m.nodes) for m in find_iso_copies(pattern, host)]
    want = exhaustive(pattern, loops)
    assert got == want
    if want:
        assert oldest_lex_least(find_iso_copies(pattern, host)).key == min(want)


@settings(max_examples=80, deadline=None)
@given(hosts())
def test_incremental_host_equals_rebuild(loops):
    host = LiveHost()
    for lp in loops:
        host.add(lp)
    for lp in loops[::2]:
        host.remove(lp)
    rebuilt = LiveHost(loops[1::2])
    assert dict(host.by_shape) == dict(rebuilt.by_shape)
    assert host.node_count() == rebuilt.node_count()


def test_ties_broken_lexicographically():
    loops = [LoopRecord(0, 10, 3, 11, 2), LoopRecord(1, 0, 3, 1, 2), LoopRecord(2, 20, 3, 21, 1)]
    best = oldest_lex_least(find_iso_copies([3], LiveHost(loops)))
    assert best.root == 20
    best = oldest_lex_least(find_iso_copies([3], LiveHost(loops[:2])))
    assert best.root == 0


def test_find_loop_copies_excludes():
    loops = [LoopRecord(0, 0, 4, 1, 3), LoopRecord(1, 0, 4, 4, 1), LoopRecord(2, 0, 5, 7, 0)]
    host = LiveHost(loops)
    got = find_loop_copies(4, 0, host)
    assert [m.loops[0].id for m in got] == [0, 1]
    assert oldest_lex_least(got).loops[0].id == 1
    assert [m.loops[0].id for m in find_loop_copies(4, 0, host, {1})] == [0]
