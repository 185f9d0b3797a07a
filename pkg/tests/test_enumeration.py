import pytest
from hypothesis import given, settings, strategies as st

from priority_sim.enumeration import D, DHAT, CEFamily, EnumerationError
from priority_sim.poset import PosetSpec

P = PosetSpec.build(["q", "p", "r"], [("q", "p")], partition0=["p"], partition1=["q", "r"])


def test_join_views():
    F = CEFamily(P)
    F.advance(1)
    F.enumerate("q", 4, 1, "x")
    F.enumerate("r", 7, 1, "x")
    assert F.member_d("p", P.pair(4, "q"))
    assert not F.member_d("p", P.pair(7, "r"))
    assert F.member_dhat("p", P.pair(7, "r"))
    assert not F.member_dhat("q", P.pair(4, "q"))
    assert F.member_a("q", 4) and not F.member_a("p", 4)


def test_duplicate_is_recorded_not_counted():
    F = CEFamily(P)
    F.advance(1)
    assert F.enumerate("q", 1, 1, "a") is not None
    assert F.enumerate("q", 1, 1, "b") is None
    assert F.seq == 1 and len(F.duplicates) == 1


def test_stage_discipline():
    F = CEFamily(P)
    F.advance(3)
    with pytest.raises(EnumerationError):
        F.enumerate("q", 1, 2, "a")
    with pytest.raises(EnumerationError):
        F.advance(2)


def test_snapshots_by_seq():
    F = CEFamily(P)
    F.advance(1)
    F.enumerate("q", 2, 1, "a")
    view = F.view(D, "p")
    F.enumerate("q", 3, 1, "a")
    assert P.pair(2, "q") in view
    assert P.pair(3, "q") not in view
    assert F.changed_below(D, "p", P.pair(3, "q") + 1, view.seq)
    assert not F.changed_below(D, "p", P.pair(3, "q"), view.seq)


ops = st.lists(st.tuples(st.sampled_from(["q", "p", "r"]), st.integers(0, 30), st.booleans()),
               max_size=40)


@settings(max_examples=60)
@given(ops, st.integers(0, 600), st.sampled_from(["q", "p", "r"]))
def test_views_match_direct_definition(seq_ops, bound, p):
    F = CEFamily(P)
    A = {x: set() for x in P.elements}
    history = []  # (seq, kind-set snapshot)
    stage = 1
    F.advance(stage)
    for elem, u, new_stage in seq_ops:
        if new_stage:
            stage += 1
            F.advance(stage)
        if F.enumerate(elem, u, stage, "t") is not None:
            A[elem].add(u)
        d = {P.pair(v, q) for q in P.elements if P.leq(q, p) for v in A[q]}
        dh = {P.pair(v, q) for q in P.elements if q != p for v in A[q]}
        history.append((F.seq, d, dh))
    for seq, d, dh in history:
        for x in range(0, 200):
            assert F.member_d(p, x, seq=seq) == (x in d)
            assert F.member_dhat(p, x, seq=seq) == (x in dh)
    for (s1, d1, h1) in history:
        for (s2, d2, h2) in history:
            if s2 < s1:
                continue
            assert F.changed_below(D, p, bound, s1, s2) == any(x < bound for x in d2 - d1)
            assert F.changed_below(DHAT, p, bound, s1, s2) == any(x < bound for x in h2 - h1)
