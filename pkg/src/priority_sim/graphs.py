"""Staged root-plus-loops graphs: G, the oracle copies B_q, and live host views.

Loops are stored as explicit cycles whose non-root nodes are a contiguous
block of fresh node ids, so a graph with ~10^6 nodes stays cheap.  Dead
loops are kept; liveness is always computed against an oracle snapshot.
"""

from __future__ import annotations

import bisect
import enum
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .enumeration import D, CEFamily

PLAIN_G = "plainG"
ORACLE_COPY = "oracleCopy"
EXTERNAL_PLAIN = "externalPlain"
EXTERNAL_ORACLE = "externalOracle"


class GraphError(ValueError):
    pass


class Config(str, enum.Enum):
    INITIAL = "Initial"
    STARTED = "Started"
    HOMOGENIZED_G = "HomogenizedG"
    HOMOGENIZED_B_EVEN = "HomogenizedB-even"
    HOMOGENIZED_B_ODD = "HomogenizedB-odd"
    INVALID = "Invalid"


class NodeAllocator:
    def __init__(self, start: int = 0):
        self.next = start

    def take(self, k: int) -> int:
        first = self.next
        self.next += k
        return first


@dataclass(slots=True)
class LoopRecord:
    id: int
    root: int
    length: int
    first: int
    birth: int
    use_tag: int | None = None
    component: int | None = None
    role: str = "base"
    decl_seq: int = 0

    @property
    def nodes(self) -> list[int]:
        return [self.root] + list(range(self.first, self.first + self.length - 1))

    def edges(self) -> list[tuple[int, int]]:
        ns = self.nodes
        return [(ns[i], ns[(i + 1) % len(ns)]) for i in range(len(ns))]


@dataclass
class Component:
    index: int
    root: int
    loops: list[LoopRecord] = field(default_factory=list)

    def lengths(self) -> list[int]:
        return sorted(lp.length for lp in self.loops)


def base_lengths(index: int) -> tuple[int, int]:
    n = index // 2
    return 5 * n + 1, 5 * n + 2


def _tables(index: int) -> dict[Config, list[int]]:
    n = index // 2
    a, b, c, d = 5 * n + 1, 5 * n + 2, 5 * n + 3, 5 * n + 4
    if index % 2 == 0:
        return {
            Config.INITIAL: [2, a],
            Config.STARTED: [2, a, c],
            Config.HOMOGENIZED_G: [2, a, b, c],
            Config.HOMOGENIZED_B_EVEN: [2, a, b, d],
        }
    return {
        Config.INITIAL: [2, b],
        Config.STARTED: [2, b, d],
        Config.HOMOGENIZED_G: [2, a, b, d],
        Config.HOMOGENIZED_B_ODD: [2, a, b, c],
    }


def configuration_of(lengths: Iterable[int], index: int, kind: str = PLAIN_G) -> Config:
    """Classify a live loop-length multiset of component ``index``."""
    got = sorted(lengths)
    for cfg, want in _tables(index).items():
        if kind == PLAIN_G and cfg in (Config.HOMOGENIZED_B_EVEN, Config.HOMOGENIZED_B_ODD):
            continue
        if got == sorted(want):
            return cfg
    return Config.INVALID


class StagedGraph:
    """G (kind plainG) or B_q (kind oracleCopy with ``oracle_element`` q)."""

    def __init__(self, kind: str, name: str, nodes: NodeAllocator,
                 family: CEFamily | None = None, oracle_element: str | None = None):
        if kind not in (PLAIN_G, ORACLE_COPY):
            raise GraphError(f"StagedGraph cannot hold kind {kind}")
        if kind == ORACLE_COPY and (family is None or oracle_element is None):
            raise GraphError("oracle copy needs a family and an element")
        self.kind = kind
        self.name = name
        self.nodes = nodes
        self.family = family
        self.q = oracle_element
        self.components: dict[int, Component] = {}
        self.loops: list[LoopRecord] = []
        self.by_tag: dict[int, list[LoopRecord]] = defaultdict(list)
        self.stages_added: set[int] = set()
        self.listeners: list[Callable[[str, dict], None]] = []
        self._roots: dict[int, int] = {}
        self._multi: list[LoopRecord] = []
        self._firsts: list[int] = []

    def _emit(self, op: str, **data) -> None:
        for fn in self.listeners:
            fn(op, data)

    # -- construction -------------------------------------------------------

    def add_stage_components(self, s: int) -> tuple[Component, Component]:
        if s < 1:
            raise GraphError("components are only added at stages s >= 1")
        if s in self.stages_added or 2 * s in self.components:
            raise GraphError(f"components for stage {s} already present")
        self.stages_added.add(s)
        tag = s if self.kind == ORACLE_COPY else None
        made = []
        for index, length in ((2 * s, 5 * s + 1), (2 * s + 1, 5 * s + 2)):
            root = self.nodes.take(1)
            comp = Component(index, root)
            self._roots[root] = index
            self.components[index] = comp
            self._emit("component", component=index, root=root)
            self.attach_loop(index, 2, tag, s, role="base2")
            self.attach_loop(index, length, tag, s, role="base")
            made.append(comp)
        return made[0], made[1]

    def attach_loop(self, component: int, length: int, use_tag: int | None, stage: int,
                    role: str = "base") -> LoopRecord:
        if length < 1:
            raise GraphError(f"loop length must be >= 1, got {length}")
        comp = self.components.get(component)
        if comp is None:
            raise GraphError(f"{self.name}: no component {component}")
        if self.kind == PLAIN_G and use_tag is not None:
            raise GraphError("G is computable; its loops carry no oracle use")
        first = self.nodes.take(length - 1) if length > 1 else comp.root
        loop = LoopRecord(len(self.loops), comp.root, length, first, stage, use_tag, component, role)
        comp.loops.append(loop)
        self.loops.append(loop)
        if use_tag is not None:
            self.by_tag[use_tag].append(loop)
        if length > 1:
            self._multi.append(loop)
            self._firsts.append(first)
        self._emit("attach", component=component, length=length, useTag=use_tag, role=role,
                   loop=loop.id, first=first)
        return loop

    # -- liveness -----------------------------------------------------------

    def is_live(self, loop: LoopRecord, stage: int | None = None, seq: int | None = None) -> bool:
        if self.kind == PLAIN_G or loop.use_tag is None:
            return True
        return not self.family.member_d(self.q, loop.use_tag, stage=stage, seq=seq)

    def live_loops(self, index: int, stage=None, seq=None) -> list[LoopRecord]:
        comp = self.components[index]
        return [lp for lp in comp.loops if self.is_live(lp, stage, seq)]

    def live_lengths(self, index: int, stage=None, seq=None) -> list[int]:
        return sorted(lp.length for lp in self.live_loops(index, stage, seq))

    def live_view(self, stage: int | None = None, seq: int | None = None) -> dict[int, list[LoopRecord]]:
        return {i: self.live_loops(i, stage, seq) for i in sorted(self.components)}

    def configuration(self, index: int, stage=None, seq=None) -> Config:
        kind = PLAIN_G if self.kind == PLAIN_G else ORACLE_COPY
        return configuration_of(self.live_lengths(index, stage, seq), index, kind)

    def host(self, seq: int | None = None) -> "LiveHost":
        return LiveHost(lp for lp in self.loops if self.is_live(lp, seq=seq))

    def pair_roots(self, n: int) -> tuple[int, int]:
        return self.components[2 * n].root, self.components[2 * n + 1].root

    def locate(self, node: int) -> tuple[int, LoopRecord | None, int] | None:
        """Component index, loop (None for a root) and offset of ``node``."""
        comp = self._roots.get(node)
        if comp is not None:
            return comp, None, 0
        i = bisect.bisect_right(self._firsts, node) - 1
        if i < 0:
            return None
        lp = self._multi[i]
        if lp.first <= node < lp.first + lp.length - 1:
            return lp.component, lp, node - lp.first + 1
        return None

    def find_loop(self, component: int, length: int, live_only=True, seq=None) -> LoopRecord | None:
        for lp in self.components[component].loops:
            if lp.length == length and (not live_only or self.is_live(lp, seq=seq)):
                return lp
        return None


def challenge_lengths(n: int) -> tuple[int, int]:
    return 5 * n + 3, 5 * n + 4


def homogenize(G: StagedGraph, Bq: StagedGraph, n: int, stage: int,
               seq: int | None = None) -> list[LoopRecord]:
    """Swap the diagonalization loops in B_q and add the homogenizing loops to both graphs."""
    even, odd = 2 * n, 2 * n + 1
    c3, c4 = challenge_lengths(n)
    for comp, length in ((even, c3), (odd, c4)):
        lp = Bq.find_loop(comp, length, live_only=False)
        if lp is None:
            raise GraphError(f"B: component {comp} has no {length}-loop to move")
        if Bq.is_live(lp, seq=seq):
            raise GraphError(f"B: {length}-loop at component {comp} is still live")
    if Bq.find_loop(even, c4, seq=seq) or Bq.find_loop(odd, c3, seq=seq):
        raise GraphError(f"pair {n} already homogenized")
    b1, b2 = base_lengths(even)
    added = [
        Bq.attach_loop(even, c4, stage, stage, role="swap"),
        Bq.attach_loop(odd, c3, stage, stage, role="swap"),
        Bq.attach_loop(odd, b1, stage, stage, role="homog"),
        Bq.attach_loop(even, b2, stage, stage, role="homog"),
        G.attach_loop(odd, b1, None, stage, role="homog"),
        G.attach_loop(even, b2, None, stage, role="homog"),
    ]
    return added


# -- matching --------------------------------------------------------------

@dataclass(frozen=True)
class Match:
    root: int
    loops: tuple  # host loops, aligned with the pattern's loops
    nodes: tuple[int, ...]
    age: int

    @property
    def key(self):
        return (self.age, self.nodes)


class LiveHost:
    """A root-plus-loops host graph restricted to live loops.

    Supports incremental updates so an adversary graph can keep one host
    up to date instead of rebuilding it at every query.
    """

    def __init__(self, loops: Iterable[LoopRecord] = ()):
        self.by_root: dict[int, list[LoopRecord]] = {}
        self.by_shape: dict[tuple[int, ...], set[int]] = defaultdict(set)
        self._shape: dict[int, tuple[int, ...]] = {}
        for lp in loops:
            self.by_root.setdefault(lp.root, []).append(lp)
        for root, lps in self.by_root.items():
            self._reshape(root)

    def _reshape(self, root: int) -> None:
        old = self._shape.pop(root, None)
        if old is not None:
            self.by_shape[old].discard(root)
            if not self.by_shape[old]:
                del self.by_shape[old]
        lps = self.by_root.get(root)
        if lps:
            shape = tuple(sorted(lp.length for lp in lps))
            self._shape[root] = shape
            self.by_shape[shape].add(root)

    def add(self, lp: LoopRecord) -> None:
        self.by_root.setdefault(lp.root, []).append(lp)
        self._reshape(lp.root)

    def remove(self, lp: LoopRecord) -> None:
        lps = self.by_root.get(lp.root, [])
        if lp in lps:
            lps.remove(lp)
            if not lps:
                del self.by_root[lp.root]
            self._reshape(lp.root)

    def loops_at(self, root: int) -> list[LoopRecord]:
        return self.by_root.get(root, [])

    def all_loops(self) -> list[LoopRecord]:
        return [lp for lps in self.by_root.values() for lp in lps]

    def node_count(self) -> int:
        return sum(1 + sum(lp.length - 1 for lp in lps) for lps in self.by_root.values())

    def edges(self) -> list[tuple[int, int]]:
        return [e for lp in self.all_loops() for e in lp.edges()]


def _sort_loops(loops):
    return sorted(loops, key=lambda lp: (lp.length, lp.first))


def age_of(births: Iterable[int]) -> int:
    """Age of a finite subgraph: the stage by which all its edges were present."""
    return max(births)


def _match_at(root: int, host_loops: list[LoopRecord]) -> Match:
    ordered = _sort_loops(host_loops)
    nodes = tuple(sorted({x for lp in ordered for x in lp.nodes}))
    return Match(root, tuple(ordered), nodes, age_of(lp.birth for lp in ordered))


def find_iso_copies(pattern_lengths: Iterable[int], host: LiveHost,
                    exclude: set[int] = frozenset()) -> list[Match]:
    """All host components isomorphic to a root carrying loops of the given lengths.

    A copy must be a whole connected component of the host; roots in
    ``exclude`` are skipped.
    """
    shape = tuple(sorted(pattern_lengths))
    out = []
    for root in host.by_shape.get(shape, []):
        if root in exclude:
            continue
        out.append(_match_at(root, host.loops_at(root)))
    out.sort(key=lambda m: m.nodes)
    return out


def find_loop_copies(length: int, root: int, host: LiveHost,
                     exclude_loops: set[int] = frozenset()) -> list[Match]:
    """Live loops of ``length`` through ``root`` not already in use."""
    out = []
    for lp in host.loops_at(root):
        if lp.length == length and lp.id not in exclude_loops:
            out.append(_match_at(root, [lp]))
    out.sort(key=lambda m: m.nodes)
    return out


def oldest_lex_least(matches: list[Match]) -> Match:
    if not matches:
        raise GraphError("no matches to choose from")
    return min(matches, key=lambda m: m.key)
