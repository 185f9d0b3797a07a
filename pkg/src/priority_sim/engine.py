"""The tree of strategies and the stage-by-stage construction.

Each stage extends G and every B_q by a pair of components, lets the
adversaries declare their loops, then walks the tree from the root: every
node on the current path acts and picks the outcome that leads to the next
node.  Nodes to the right of the path are initialized at the end of the
stage.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

from .config import SCRIPT_KIND, Requirement, RunConfig
from .enumeration import D, DHAT, CEFamily
from .functionals import AnswerLog, ExternalGraph, eval_oracle, make_script, map_answer
from .graphs import (
    ORACLE_COPY, PLAIN_G, Match, NodeAllocator, StagedGraph, challenge_lengths, find_iso_copies,
    find_loop_copies, homogenize, oldest_lex_least,
)
from .trace import Trace, TraceWriter


class ConstructionError(RuntimeError):
    pass


# -- outcomes ----------------------------------------------------------------

@functools.total_ordering
@dataclass(frozen=True)
class Outcome:
    """An outcome: ``inf``, ``s`` (stop) or ``w<n>``.

    Order: inf < ... < w3 < w2 < s < w1 < w0.
    """

    tag: str
    n: int = 0

    def __post_init__(self):
        if self.tag not in ("inf", "w", "s"):
            raise ValueError(f"bad outcome tag {self.tag!r}")
        if self.n < 0 or (self.tag != "w" and self.n):
            raise ValueError(f"bad outcome index {self.n}")

    @property
    def rank(self) -> tuple[int, int]:
        if self.tag == "inf":
            return (0, 0)
        if self.tag == "s":
            return (2, 0)
        if self.n >= 2:
            return (1, -self.n)
        return (3, 0) if self.n == 1 else (4, 0)

    def __lt__(self, other: "Outcome") -> bool:
        return self.rank < other.rank

    def __str__(self) -> str:
        return self.tag if self.tag != "w" else f"w{self.n}"

    @classmethod
    def parse(cls, text: str) -> "Outcome":
        if text in ("inf", "s"):
            return cls(text)
        if text.startswith("w") and text[1:].isdigit():
            return cls("w", int(text[1:]))
        raise ValueError(f"bad outcome {text!r}")


INF, STOP = "inf", "s"


def wait(n: int) -> str:
    return f"w{n}"


@functools.lru_cache(maxsize=None)
def outcome_rank(text: str) -> tuple[int, int]:
    return Outcome.parse(text).rank


def left_of(a: tuple[str, ...], b: tuple[str, ...]) -> bool:
    """True iff address ``a`` lies strictly left of ``b`` in the tree."""
    for x, y in zip(a, b):
        if x != y:
            return outcome_rank(x) < outcome_rank(y)
    return False


def address_str(address: tuple[str, ...]) -> str:
    return "/".join(address)


def parse_address(text: str) -> tuple[str, ...]:
    return tuple(text.split("/")) if text else ()


def assign_requirement(level: int, roster: list, assignment: list[int] | None = None):
    """The roster entry that every node at ``level`` works for, or None for an idle level."""
    if assignment is not None:
        return roster[assignment[level]] if level < len(assignment) else None
    if not roster:
        return None
    return roster[level % len(roster)]


# -- node state --------------------------------------------------------------

@dataclass
class Axiom:
    key: str
    value: int
    use: int
    seq: int


@dataclass
class PairMap:
    """What a T-node has defined on one component pair."""

    u: int
    targets: dict[str, int]
    l: int = 0


@dataclass
class Challenge:
    by: tuple[str, ...]
    stage: int
    n_beta: int
    q: str
    prelim: bool = False
    prelim_done: bool = False
    saved: dict[str, int] = field(default_factory=dict)


@dataclass
class StrategyNode:
    address: tuple[str, ...]
    req: Requirement
    index: int
    active: bool = False
    last: str | None = None
    x: int | None = None
    use: int | None = None
    n: int | None = None
    m: int | None = None
    v: int | None = None
    commit_seq: int | None = None
    f: dict = field(default_factory=dict)
    pairs: dict[int, PairMap] = field(default_factory=dict)
    axioms: dict[str, list[Axiom]] = field(default_factory=dict)
    challenge: Challenge | None = None
    last_seq: int = 0

    def clear(self) -> None:
        self.active = False
        self.last = None
        self.x = self.use = self.n = self.m = self.v = self.commit_seq = None
        self.f = {}
        self.pairs = {}
        self.axioms = {}
        self.challenge = None
        self.last_seq = 0

    @property
    def label(self) -> str:
        return address_str(self.address)


class TreeState:
    """Strategy nodes by address plus the fresh-number counter."""

    def __init__(self, counter_start: int = 1):
        self.counter = max(1, counter_start)
        self.nodes: dict[tuple[str, ...], StrategyNode] = {}

    def fresh_large(self) -> int:
        x = self.counter
        self.counter += 1
        return x

    def absorb(self, value: int | None) -> None:
        if value is not None and value >= self.counter:
            self.counter = value + 1


def counter_start_for(stages: int) -> int:
    """Least u with u(u+1)/2 > stages, so every coded position exceeds every stage number."""
    u = 1
    while u * (u + 1) // 2 <= stages:
        u += 1
    return u


def _rkey(comp: int) -> str:
    return f"r:{comp}"


def _lkey(loop_id: int) -> str:
    return f"l:{loop_id}"


# -- the construction --------------------------------------------------------

class Construction:
    """One run of the construction for a fixed configuration."""

    def __init__(self, config: RunConfig, on_stage=None):
        config.check()
        self.config = config
        self.poset = config.poset
        self.family = CEFamily(self.poset)
        self.node_ids = NodeAllocator(0)
        self.tree = TreeState(counter_start_for(config.stages))
        self.lifting = not config.disable_use_lifting
        self.writer = TraceWriter(config.to_json())
        self.on_stage = on_stage
        self.stage = -1
        self.paths: list[tuple[str, ...]] = []

        self.G = StagedGraph(PLAIN_G, "G", self.node_ids)
        self.G.listeners.append(self._graph_listener("G"))
        self.B: dict[str, StagedGraph] = {}
        for q in sorted(self.poset.partition1, key=self.poset.index):
            B = StagedGraph(ORACLE_COPY, f"B[{q}]", self.node_ids, self.family, q)
            B.listeners.append(self._graph_listener(B.name))
            self.B[q] = B

        self.log = AnswerLog()
        self.log.listeners.append(self._answer_listener)
        self.scripts = []
        self.adversaries: dict[int, ExternalGraph] = {}
        for k, req in enumerate(config.roster):
            script = make_script(req.script, SCRIPT_KIND[req.kind], req.params)
            self.scripts.append(script)
            if req.kind in ("S", "T"):
                oracle = (D, req.element) if req.kind == "T" else None
                g = ExternalGraph(self._graph_name(k), script, self.node_ids, self.family, oracle)
                g.listeners.append(self._decl_listener)
                self.adversaries[k] = g

    # -- trace plumbing -------------------------------------------------------

    def _graph_name(self, k: int) -> str:
        req = self.config.roster[k]
        return f"M[{k}:{req.label}]"

    def _graph_listener(self, name):
        def listen(op, data):
            self.writer.emit(op, graph=name, **data)
        return listen

    def _decl_listener(self, op, data):
        self.tree.absorb(data["use"])
        self.writer.emit(op, **data)

    def _answer_listener(self, rec):
        self.writer.emit("answer", script=rec.script, query=rec.query, seq=rec.seq,
                         oracle=None if rec.oracle is None else list(rec.oracle),
                         answer=rec.answer.to_json())

    @property
    def trace(self) -> Trace:
        return self.writer.trace

    def fresh(self) -> int:
        return self.tree.fresh_large()

    def _enumerate(self, p: str, u: int, s: int, node: StrategyNode, why: str):
        entry = self.family.enumerate(p, u, s, node.label)
        if entry is None:
            self.writer.emit("duplicate", set=p, number=u, by=node.label)
            return None
        self.tree.absorb(u + self.poset.index(p))
        self.writer.emit("enum", set=p, number=u, pos=self.poset.pair(u, p), by=node.label,
                         seq=entry.seq, why=why)
        return entry

    def _param(self, node: StrategyNode, **values) -> None:
        self.writer.emit("param", node=node.label, **values)

    # -- stages ---------------------------------------------------------------

    def run(self) -> "Construction":
        while self.stage < self.config.stages:
            self.compute_stage(self.stage + 1)
        return self

    def compute_stage(self, s: int) -> tuple[str, ...]:
        if s != self.stage + 1:
            raise ConstructionError(f"stage {s} requested after stage {self.stage}")
        self.stage = s
        if s == 0:
            self.paths.append(())
            return ()
        self.family.advance(s)
        if s >= 1:
            self.G.add_stage_components(s)
            for B in self.B.values():
                B.add_stage_components(s)
        for k in sorted(self.adversaries):
            self.adversaries[k].advance(s, self)

        address: tuple[str, ...] = ()
        last_active = 0
        for level in range(s):
            k = self._assigned(level)
            if k is None:
                outcome = wait(0)
            else:
                node = self.tree.nodes.get(address)
                if node is None:
                    node = StrategyNode(address, self.config.roster[k], k)
                    self.tree.nodes[address] = node
                outcome = self.act(node, s)
                last_active = level + 1
            address = address + (outcome,)
        self.paths.append(address)
        for node in list(self.tree.nodes.values()):
            if node.active and left_of(address, node.address):
                self.initialize(node)
        rec = self.writer.end_stage(s, list(address[:last_active]), s)
        if self.on_stage is not None:
            self.on_stage(self, rec)
        return address

    def _assigned(self, level: int) -> int | None:
        if self.config.assignment is not None:
            a = self.config.assignment
            return a[level] if level < len(a) else None
        if not self.config.roster:
            return None
        return level % len(self.config.roster)

    def act(self, node: StrategyNode, s: int) -> str:
        kind = node.req.kind
        if kind == "N":
            case, out = self.act_n(node, s)
        elif kind == "S":
            case, out = self.act_s(node, s)
        elif kind == "T":
            case, out = self.act_t(node, s)
        else:
            case, out = self.act_r(node, s)
        node.last = out
        self.writer.emit("act", node=node.label, req=node.req.label, case=case, outcome=out)
        return out

    def initialize(self, node: StrategyNode) -> None:
        if not node.active:
            return
        if node.challenge is not None:
            self.writer.emit("release", node=node.label, by=address_str(node.challenge.by))
        if node.req.kind == "R":
            for other in self.tree.nodes.values():
                if other.challenge is not None and other.challenge.by == node.address:
                    other.challenge = None
                    self.writer.emit("release", node=other.label, by=node.label)
        node.clear()
        self.writer.emit("init", node=node.label)

    # -- N ----------------------------------------------------------------------

    def act_n(self, node, s):
        p = node.req.element
        if not node.active:
            node.active = True
            node.x = self.fresh()
            self._param(node, x=node.x)
            return 1, wait(0)
        if node.last == STOP:
            return 3, STOP
        view = self.family.view(DHAT, p)
        ans = eval_oracle(self.scripts[node.index], view, node.x, s, self.log, node.req.label)
        self.tree.absorb(ans.use)
        if ans.converged and ans.value == 0:
            node.use = ans.use
            self._enumerate(p, node.x, s, node, "N")
            self.writer.emit("nenum", node=node.label, x=node.x, use=ans.use, value=ans.value,
                             set=p)
            return 2, STOP
        return 2, wait(0)

    # -- matching helpers ----------------------------------------------------------

    def _select_components(self, node, n, host_graph, excluded):
        """Oldest lex-least copies of components 2n, 2n+1; None if one is missing.

        ``excluded(root)`` marks host roots already used as images.
        """
        host = host_graph.host()
        chosen = []
        taken: set[int] = set()
        for comp in (2 * n, 2 * n + 1):
            shape = tuple(self.G.live_lengths(comp))
            excl = {r for r in host.by_shape.get(shape, ()) if r in taken or excluded(r)}
            matches = find_iso_copies(shape, host, excl)
            if not matches:
                return None
            best = oldest_lex_least(matches)
            self.writer.emit("select", node=node.label, graph=host_graph.name, mode="component",
                             pair=n, comp=comp, pattern=list(shape), exclude=sorted(excl),
                             chosen=best.root, age=best.age, seq=self.family.seq)
            taken.add(best.root)
            chosen.append((comp, best))
        return chosen

    def _component_targets(self, chosen) -> dict[str, int]:
        targets = {}
        for comp, match in chosen:
            targets[_rkey(comp)] = match.root
            g_loops = sorted(self.G.components[comp].loops, key=lambda lp: lp.length)
            h_loops = sorted(match.loops, key=lambda lp: lp.length)
            for glp, hlp in zip(g_loops, h_loops):
                targets[_lkey(glp.id)] = hlp.id
        return targets

    def _select_loops(self, node, n, host_graph, targets: dict[str, int]):
        """Copies of the still-unmatched G loops of pair n at the matched roots."""
        host = host_graph.host()
        used = {v for k, v in targets.items() if k.startswith("l:")}
        found = {}
        for comp in (2 * n, 2 * n + 1):
            root = targets[_rkey(comp)]
            for glp in self.G.components[comp].loops:
                if _lkey(glp.id) in targets:
                    continue
                matches = find_loop_copies(glp.length, root, host, used)
                if not matches:
                    return None
                best = oldest_lex_least(matches)
                hlp = best.loops[0]
                self.writer.emit("select", node=node.label, graph=host_graph.name, mode="loop",
                                 pair=n, comp=comp, length=glp.length, root=root,
                                 exclude=sorted(used & {lp.id for lp in host.loops_at(root)}),
                                 chosen=hlp.id, age=best.age, seq=self.family.seq)
                used.add(hlp.id)
                found[_lkey(glp.id)] = hlp.id
        return found

    def _pair_exists(self, n: int) -> bool:
        return n >= 1 and 2 * n + 1 in self.G.components

    # -- S ------------------------------------------------------------------------

    def act_s(self, node, s):
        if not node.active:
            node.active = True
            node.n = 1
            node.f = {}
            self._param(node, n=1)
            return 1, wait(0)
        ch = node.challenge
        ok = self._s_search(node)
        if ok:
            node.n += 1
            self._param(node, n=node.n)
        if ch is not None:
            if ok and node.n > ch.n_beta:
                node.challenge = None
                self.writer.emit("challenge_met", node=node.label, by=address_str(ch.by))
                return 2, INF
            return 2, wait(node.n)
        return 3, (INF if ok else wait(node.n))

    def _s_search(self, node) -> bool:
        n = node.n
        if not self._pair_exists(n):
            return False
        graph = self.adversaries[node.index]
        if _rkey(2 * n) in node.f and _rkey(2 * n + 1) in node.f:
            found = self._select_loops(node, n, graph, node.f)
            if found is None:
                return False
            node.f.update(found)
            for k, v in found.items():
                self.writer.emit("fmap", node=node.label, key=k, value=v)
            return True
        images = {v for k, v in node.f.items() if k.startswith("r:")}
        chosen = self._select_components(node, n, graph, images.__contains__)
        if chosen is None:
            return False
        targets = self._component_targets(chosen)
        for k, v in targets.items():
            if k not in node.f:
                node.f[k] = v
                self.writer.emit("fmap", node=node.label, key=k, value=v)
        return True

    # -- T ------------------------------------------------------------------------

    def _valid(self, node, ax: Axiom) -> bool:
        return not self.family.changed_below(D, node.req.element, ax.use + 1, ax.seq)

    def effective(self, node, key: str) -> int | None:
        """Value of g on ``key`` now: the earliest still-valid axiom."""
        lst = node.axioms.get(key)
        if not lst:
            return None
        alive = [ax for ax in lst if self._valid(node, ax)]
        node.axioms[key] = alive
        return alive[0].value if alive else None

    def _declare(self, node, targets: dict[str, int], u: int, n: int) -> None:
        p = node.req.element
        use = self.poset.pair(u, p)
        seq = self.family.seq
        for key, value in targets.items():
            cur = self.effective(node, key)
            if cur is not None and cur != value:
                self.writer.emit("conflict", node=node.label, key=key, old=cur, new=value, pair=n)
            node.axioms.setdefault(key, []).append(Axiom(key, value, use, seq))
            self.writer.emit("axiom", node=node.label, pair=n, key=key, value=value, use=use,
                             seq=seq)

    def _loop_use(self, graph: ExternalGraph, loop_id: int) -> int:
        return graph.loops[loop_id].use_tag or 0

    def _set_pair(self, node, n: int, targets: dict[str, int]) -> PairMap:
        graph = self.adversaries[node.index]
        u = self.fresh()
        self.tree.absorb(u + self.poset.index(node.req.element))
        self._declare(node, targets, u, n)
        l = max((self._loop_use(graph, v) for k, v in targets.items() if k.startswith("l:")),
                default=0)
        rec = PairMap(u, dict(targets), l)
        node.pairs[n] = rec
        self._param(node, pair=n, u=u, l=l,
                    roots=[targets.get(_rkey(2 * n)), targets.get(_rkey(2 * n + 1))])
        return rec

    def pair_matched(self, node, m: int) -> bool:
        """g agrees with the recorded map on every key of pair m and the images are live."""
        rec = node.pairs.get(m)
        if rec is None:
            return False
        graph = self.adversaries[node.index]
        for comp in (2 * m, 2 * m + 1):
            keys = [_rkey(comp)] + [_lkey(lp.id) for lp in self.G.components[comp].loops]
            for key in keys:
                want = rec.targets.get(key)
                if want is None or self.effective(node, key) != want:
                    return False
                if key.startswith("l:") and not graph.is_live(graph.loops[want]):
                    return False
        return True

    def _base_keys(self, n: int) -> list[str]:
        keys = []
        for comp in (2 * n, 2 * n + 1):
            keys.append(_rkey(comp))
            keys += [_lkey(lp.id) for lp in self.G.components[comp].loops
                     if lp.role in ("base2", "base")]
        return keys

    def act_t(self, node, s):
        if not node.active:
            node.active = True
            node.n = 1
            node.pairs = {}
            node.axioms = {}
            node.last_seq = self.family.seq
            self._param(node, n=1)
            return 1, wait(0)
        if node.challenge is not None:
            case, out = 2, self._t_case2(node, s)
        else:
            case, out = 3, self._t_case3(node, s)
        node.last_seq = self.family.seq
        self.writer.emit("tstate", node=node.label, n=node.n, p=node.req.element)
        return case, out

    def _t_case2(self, node, s) -> str:
        ch = node.challenge
        nb = ch.n_beta
        if ch.prelim and not ch.prelim_done:
            ch.prelim_done = True
            keep = {k: ch.saved[k] for k in self._base_keys(nb) if k in ch.saved}
            self._set_pair(node, nb, keep)
            self.writer.emit("prelim", node=node.label, pair=nb)
        graph = self.adversaries[node.index]
        n = node.n
        ok = False
        rec = node.pairs.get(n)
        if self._pair_exists(n):
            base_ok = rec is not None and all(
                k in rec.targets and self.effective(node, k) == rec.targets[k] for k in self._base_keys(n))
            if n == nb and base_ok:
                found = self._select_loops(node, n, graph, rec.targets)
                if found is not None:
                    self._set_pair(node, n, {**rec.targets, **found})
                    ok = True
            else:
                chosen = self._select_components(node, n, graph, self._image_test(node, n))
                if chosen is not None:
                    self._set_pair(node, n, self._component_targets(chosen))
                    ok = True
        if ok:
            node.n += 1
            self._param(node, n=node.n)
            if node.n > nb:
                node.challenge = None
                self.writer.emit("challenge_met", node=node.label, by=address_str(ch.by))
                return INF
        return wait(node.n)

    def _image_test(self, node, n: int):
        """Predicate: is this host root the image of a root of some pair m < n?"""
        def test(root: int) -> bool:
            for m, rec in node.pairs.items():
                if m < n and root in (rec.targets[_rkey(2 * m)], rec.targets[_rkey(2 * m + 1)]):
                    return True
            return False
        return test

    def _t_case3(self, node, s) -> str:
        p = node.req.element
        changes = self.family.changes_since(D, p, node.last_seq)
        low = min(changes, default=None)
        if low is not None:
            for m in sorted(node.pairs):
                if m >= node.n:
                    break
                if low < node.pairs[m].l:
                    node.n = m
                    for k in [k for k in node.pairs if k >= m]:
                        del node.pairs[k]
                    self.writer.emit("injury", node=node.label, pair=m)
                    self._param(node, n=m)
                    break
            for m in sorted(node.pairs):
                if m >= node.n:
                    break
                rec = node.pairs[m]
                if low <= self.poset.pair(rec.u, p):
                    self._declare(node, rec.targets, rec.u, m)
                    self.writer.emit("redeclare", node=node.label, pair=m)
        n = node.n
        if not self._pair_exists(n):
            return wait(n)
        graph = self.adversaries[node.index]
        chosen = self._select_components(node, n, graph, self._image_test(node, n))
        if chosen is None:
            return wait(n)
        self._set_pair(node, n, self._component_targets(chosen))
        node.n += 1
        self._param(node, n=node.n)
        return INF

    # -- R ------------------------------------------------------------------------

    def act_r(self, node, s):
        if not node.active:
            node.active = True
            node.n = self.fresh()
            self._param(node, n=node.n)
            return 1, wait(0)
        if node.last == STOP:
            return 4, STOP
        if node.last == wait(1):
            return 3, self._r_case3(node, s)
        return 2, self._r_case2(node, s)

    def _above(self, node, kinds: tuple[str, ...]) -> list[StrategyNode]:
        """Active S/T nodes gamma with gamma^inf a prefix of ``node``."""
        out = []
        for k in range(len(node.address)):
            if node.address[k] != INF:
                continue
            gamma = self.tree.nodes.get(node.address[:k])
            if gamma is not None and gamma.active and gamma.req.kind in kinds:
                out.append(gamma)
        return out

    def check_map(self, node, s):
        """Query the map script on pair n; return (max use, root images) or None."""
        q = node.req.element
        n = node.n
        B = self.B[q]
        if not (2 * n + 1 in self.G.components and 2 * n + 1 in B.components):
            return None
        script = self.scripts[node.index]
        view = self.family.view(D, q)
        label = node.req.label
        uses = []
        images = {}
        for comp in (2 * n, 2 * n + 1):
            root = self.G.components[comp].root
            ans = map_answer(script, root, s, view, self, self.log, label)
            if not ans.converged or ans.value != B.components[comp].root:
                return None
            uses.append(ans.use)
            images[comp] = ans.value
        for comp in (2 * n, 2 * n + 1):
            gcomp = self.G.components[comp]
            live = B.live_loops(comp, seq=view.seq)
            if len(live) != len(gcomp.loops):
                return None
            hit = set()
            for glp in gcomp.loops:
                target = None
                for offset, x in enumerate(glp.nodes):
                    if offset == 0:
                        continue
                    ans = map_answer(script, x, s, view, self, self.log, label)
                    if not ans.converged:
                        return None
                    uses.append(ans.use)
                    where = B.locate(ans.value)
                    if where is None or where[0] != comp or where[1] is None or where[2] != offset:
                        return None
                    if target is None:
                        target = where[1]
                    elif where[1] is not target:
                        return None
                if glp.length == 1:
                    target = next((b for b in live if b.length == 1), None)
                if target is None or target.length != glp.length or target.id in hit \
                        or not B.is_live(target, seq=view.seq):
                    return None
                hit.add(target.id)
        for u in uses:
            self.tree.absorb(u)
        return max(uses), images

    def _attach_g(self, comp, length, role, s, skip: str | None = None):
        lp = self.G.attach_loop(comp, length, None, s, role=role)
        for q, B in self.B.items():
            if q != skip:
                B.attach_loop(comp, length, s, s, role="follow")
        return lp

    def _r_case2(self, node, s) -> str:
        q = node.req.element
        n = node.n
        got = self.check_map(node, s)
        if got is None:
            return wait(0)
        node.m, images = got
        node.commit_seq = self.family.seq
        self.writer.emit("commit", node=node.label, n=n, m=node.m, seq=node.commit_seq,
                         images={str(k): v for k, v in images.items()}, q=q)
        gammas = self._above(node, ("S", "T"))
        if self.lifting:
            for g in gammas:
                if g.req.kind == "T" and self.poset.lt(q, g.req.element) and n in g.pairs:
                    self._enumerate(g.req.element, g.pairs[n].u, s, node, "lift")
        node.v = self.fresh()
        vpos = self.poset.pair(node.v, q)
        self.tree.absorb(node.v + self.poset.index(q))
        self._param(node, v=node.v, vpos=vpos)
        c3, c4 = challenge_lengths(n)
        B = self.B[q]
        for comp, length in ((2 * n, c3), (2 * n + 1, c4)):
            self._attach_g(comp, length, "challenge", s, skip=q)
            B.attach_loop(comp, length, vpos, s, role="challenge")
        for g in gammas:
            if g.challenge is not None:
                self.writer.emit("diag", node=node.label,
                                 message=f"{g.label} already challenged by {address_str(g.challenge.by)}")
                continue
            old = g.n
            if g.req.kind == "S":
                g.n = min(g.n, n)
                g.challenge = Challenge(node.address, s, n, q)
            else:
                new = next((m for m in range(1, n + 1) if not self.pair_matched(g, m)), n)
                g.n = new
                for k in [k for k in g.pairs if k > new]:
                    del g.pairs[k]
                prelim = self.lifting and self.poset.lt(q, g.req.element) and old > n
                saved = dict(g.pairs[n].targets) if prelim and n in g.pairs else {}
                g.challenge = Challenge(node.address, s, n, q, prelim, False, saved)
            self.writer.emit("challenge", node=g.label, by=node.label, n_beta=n, old_n=old,
                             reset_to=g.n)
        return wait(1)

    def _r_case3(self, node, s) -> str:
        q = node.req.element
        n = node.n
        for other in self.tree.nodes.values():
            if other.challenge is not None and other.challenge.by == node.address:
                self.writer.emit("diag", node=node.label,
                                 message=f"diagonalizing while {other.label} is still challenged")
        self._enumerate(q, node.v, s, node, "diagonalize")
        added = homogenize(self.G, self.B[q], n, s, self.family.seq)
        for lp in added:
            if lp.root in (self.G.components[2 * n].root, self.G.components[2 * n + 1].root) \
                    and lp.use_tag is None:
                for q2, B in self.B.items():
                    if q2 != q:
                        B.attach_loop(lp.component, lp.length, s, s, role="follow")
        self.writer.emit("diagonalized", node=node.label, n=n, v=node.v, q=q)
        return STOP


def run(config: RunConfig, on_stage=None) -> Construction:
    """Run all stages.  With ``config.strict`` a per-stage monitor aborts on the first violation."""
    if config.strict:
        from .audit import StrictMonitor

        monitor, user = StrictMonitor(), on_stage

        def on_stage(c, rec):
            monitor(c, rec)
            if user is not None:
                user(c, rec)
    return Construction(config, on_stage).run()
