"""Adversary scripts standing in for the functionals, and the graphs they present.

A script is a deterministic program with explicit uses.  Function scripts
answer point queries; graph scripts declare loops stage by stage onto an
:class:`ExternalGraph`; map scripts answer node queries for a candidate
isomorphism G -> B_q.  A loop declared with use ``u`` stays live until the
oracle changes at some position below ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

from .enumeration import CEFamily, OracleView
from .graphs import LiveHost, LoopRecord, NodeAllocator, base_lengths, challenge_lengths

PLAIN_FUNCTION = "plainFunction"
ORACLE_FUNCTION = "oracleFunction"
PLAIN_GRAPH = "plainGraph"
ORACLE_GRAPH = "oracleGraph"
ORACLE_MAP = "oracleMap"
KINDS = (PLAIN_FUNCTION, ORACLE_FUNCTION, PLAIN_GRAPH, ORACLE_GRAPH, ORACLE_MAP)


class ScriptError(ValueError):
    pass


@dataclass(frozen=True)
class Answer:
    converged: bool
    value: int | None = None
    use: int | None = None

    def __post_init__(self):
        if not self.converged and (self.value is not None or self.use is not None):
            raise ScriptError("a divergent answer carries no value or use")

    def to_json(self):
        if not self.converged:
            return None
        return [self.value, self.use]


DIVERGE = Answer(False)


class Script:
    """Base class; subclasses set ``name`` and ``kinds``."""

    name = "script"
    kinds: tuple[str, ...] = ()

    def __init__(self, kind: str, **params):
        if kind not in self.kinds:
            raise ScriptError(f"script {self.name} cannot act as {kind}")
        self.kind = kind
        self.params = params

    def answer(self, x: int, stage: int, oracle: OracleView | None, world=None) -> Answer:
        return DIVERGE

    def step(self, view: "ExternalGraph", stage: int, world) -> None:
        pass

    def describe(self) -> dict:
        return {"name": self.name, "kind": self.kind, "params": dict(self.params)}


class Never(Script):
    name = "never"
    kinds = KINDS


class ConvergeAt(Script):
    """Converges from stage ``at`` on with ``value``; use defaults to x + 1."""

    name = "convergeAt"
    kinds = (PLAIN_FUNCTION, ORACLE_FUNCTION)

    def __init__(self, kind, at: int = 0, value: int = 0, use: int | None = None):
        super().__init__(kind, at=at, value=value, use=use)
        self.at, self.value, self.use = at, value, use

    def answer(self, x, stage, oracle=None, world=None):
        if stage < self.at:
            return DIVERGE
        use = 0 if self.kind == PLAIN_FUNCTION else (x + 1 if self.use is None else self.use)
        return Answer(True, self.value, use)


class _Mirror(Script):
    """Declares a relabelled copy of G, ``delay`` stages behind."""

    def __init__(self, kind, delay: int = 1, **params):
        super().__init__(kind, delay=delay, **params)
        if delay < 0:
            raise ScriptError("delay must be >= 0")
        self.delay = delay
        self.cursor = 0
        self.roots: dict[int, int] = {}
        self.images: dict[int, LoopRecord] = {}

    def root_for(self, view, component: int) -> int:
        if component not in self.roots:
            self.roots[component] = view.new_root()
        return self.roots[component]

    def mirror_loop(self, view, lp: LoopRecord, stage: int, use: int | None, root=None):
        root = self.root_for(view, lp.component) if root is None else root
        out = view.declare(root, lp.length, use, stage, role=lp.role)
        self.images[lp.id] = out
        return out

    def handle(self, view, lp: LoopRecord, stage: int, world) -> None:
        self.mirror_loop(view, lp, stage, None if self.kind == PLAIN_GRAPH else 0)

    def step(self, view, stage, world):
        loops = world.G.loops
        while self.cursor < len(loops) and loops[self.cursor].birth <= stage - self.delay:
            self.handle(view, loops[self.cursor], stage, world)
            self.cursor += 1


class Copycat(_Mirror):
    """Plain copy of G[s - delay]; components in ``omit`` are never copied.

    With ``squares`` the copy is only brought up to date at perfect-square
    stages.  The gaps grow, so a matcher keeps running dry and the path
    through it never settles.
    """

    name = "copycat"
    kinds = (PLAIN_GRAPH, ORACLE_GRAPH)

    def __init__(self, kind, delay: int = 1, omit: Iterable[int] = (), squares: bool = False):
        super().__init__(kind, delay=delay, omit=sorted(omit), squares=squares)
        self.omit = set(omit)
        self.squares = squares

    def step(self, view, stage, world):
        if not self.squares or math.isqrt(stage) ** 2 == stage:
            super().step(view, stage, world)

    def handle(self, view, lp, stage, world):
        if lp.component // 2 in self.omit:
            return
        super().handle(view, lp, stage, world)


class OracleCopycat(_Mirror):
    """Oracle copy of G with a fixed use on every declared loop."""

    name = "oracleCopycat"
    kinds = (ORACLE_GRAPH,)

    def __init__(self, kind, delay: int = 1, use: int = 0):
        super().__init__(kind, delay=delay, use=use)
        self.use = use

    def handle(self, view, lp, stage, world):
        self.mirror_loop(view, lp, stage, self.use)


class FakeElder(_Mirror):
    """Copy of G that offers a short-lived fake of pair ``pair`` before the true one.

    At stage ``fake_at`` a fresh copy of the pair's initial components is
    declared with use ``fake_use``; the true copy of the pair appears at
    ``true_at``.  Everything else is a delayed permanent copy.
    """

    name = "fakeElder"
    kinds = (ORACLE_GRAPH,)

    def __init__(self, kind, pair: int = 2, fake_at: int = 3, true_at: int = 6,
                 fake_use: int = 1, delay: int = 1):
        super().__init__(kind, delay=delay, pair=pair, fake_at=fake_at, true_at=true_at,
                         fake_use=fake_use)
        if not fake_at < true_at:
            raise ScriptError("fake copy must come before the true copy")
        self.pair, self.fake_at, self.true_at, self.fake_use = pair, fake_at, true_at, fake_use
        self.pending: list[LoopRecord] = []
        self.faked = False

    def step(self, view, stage, world):
        if stage >= self.fake_at and not self.faked and 2 * self.pair in world.G.components:
            self.faked = True
            for index in (2 * self.pair, 2 * self.pair + 1):
                root = view.new_root()
                for length in (2, base_lengths(index)[index % 2]):
                    view.declare(root, length, self.fake_use, stage, role="fake")
        if stage >= self.true_at:
            for lp in self.pending:
                self.mirror_loop(view, lp, stage, 0)
            self.pending = []
        super().step(view, stage, world)

    def handle(self, view, lp, stage, world):
        if lp.component // 2 == self.pair and stage < self.true_at:
            self.pending.append(lp)
            return
        self.mirror_loop(view, lp, stage, 0)


class SwapMirror(_Mirror):
    """Delayed oracle copy of G that answers a diagonalization with a relabelling.

    The new loops of a diagonalized pair are copied with a use just above
    the largest B-use on that pair, so they vanish exactly when the R side
    strikes.  When the homogenizing loops arrive and the copied loops are
    gone, the script rebuilds the pair crosswise: the copy of a_{2n} gets
    the loops of a_{2n+1} and vice versa.
    """

    name = "section25"
    kinds = (ORACLE_GRAPH,)

    def __init__(self, kind, delay: int = 1):
        super().__init__(kind, delay=delay)
        self.homog_done: set[int] = set()
        self.swapped: set[int] = set()

    def _challenge_use(self, world, lp: LoopRecord) -> int:
        best = 0
        for B in world.B.values():
            comp = B.components.get(lp.component)
            if comp is None:
                continue
            for blp in comp.loops:
                if blp.role == "challenge" and blp.length == lp.length:
                    best = max(best, blp.use_tag + 1)
        return best

    def handle(self, view, lp, stage, world):
        n = lp.component // 2
        if lp.role == "challenge":
            self.mirror_loop(view, lp, stage, self._challenge_use(world, lp))
            return
        if lp.role != "homog":
            self.mirror_loop(view, lp, stage, 0)
            return
        if n not in self.homog_done:
            self.homog_done.add(n)
            c3, c4 = challenge_lengths(n)
            c, d = self.roots.get(2 * n), self.roots.get(2 * n + 1)
            on_c = view.find(c, c3) if c is not None else None
            on_d = view.find(d, c4) if d is not None else None
            if on_c is not None and on_d is not None and not view.is_live(on_c) \
                    and not view.is_live(on_d):
                use = max(on_c.use_tag, on_d.use_tag)
                b1, b2 = base_lengths(2 * n)
                for root, lengths in ((c, (b2, c4)), (d, (b1, c3))):
                    for length in lengths:
                        view.declare(root, length, use, stage, role="swap")
                self.swapped.add(n)
        if n not in self.swapped:
            self.mirror_loop(view, lp, stage, 0)


class MapCommit(Script):
    """Candidate isomorphism G -> B_q that is the identity on pair numbering.

    From stage ``at`` it maps each node of G to the node at the same offset
    of the equal-length live loop in the same-numbered component of B_q.
    """

    name = "mapCommit"
    kinds = (ORACLE_MAP,)

    def __init__(self, kind, at: int = 0, use: int | None = None):
        super().__init__(kind, at=at, use=use)
        self.at, self.use = at, use

    def answer(self, x, stage, oracle=None, world=None):
        if stage < self.at or oracle is None or world is None:
            return DIVERGE
        B = world.B.get(oracle.p)
        where = world.G.locate(x)
        if B is None or where is None:
            return DIVERGE
        index, lp, offset = where
        comp = B.components.get(index)
        if comp is None:
            return DIVERGE
        use = (index // 2 + 1) if self.use is None else self.use
        if lp is None:
            return Answer(True, comp.root, use)
        for blp in comp.loops:
            if blp.length == lp.length and B.is_live(blp, seq=oracle.seq):
                return Answer(True, blp.first + offset - 1, use)
        return DIVERGE


LIBRARY: dict[str, type[Script]] = {
    cls.name: cls for cls in (Never, ConvergeAt, Copycat, OracleCopycat, FakeElder, SwapMirror, MapCommit)
}


def make_script(name: str, kind: str, params: dict | None = None) -> Script:
    cls = LIBRARY.get(name)
    if cls is None:
        raise ScriptError(f"unknown script {name!r}")
    try:
        return cls(kind, **(params or {}))
    except TypeError as exc:
        raise ScriptError(f"bad parameters for {name}: {exc}") from None


# -- graph views -------------------------------------------------------------

class ExternalGraph:
    """The graph an adversary presents, built from declarations.

    Without an oracle every loop is permanent.  With one, a loop declared
    with use u is live while the oracle has not changed below u since the
    declaration.
    """

    def __init__(self, name: str, script: Script, nodes: NodeAllocator,
                 family: CEFamily | None = None, oracle: tuple[str, str] | None = None):
        if script.kind not in (PLAIN_GRAPH, ORACLE_GRAPH):
            raise ScriptError(f"{script.name} is not a graph script")
        if script.kind == ORACLE_GRAPH and (family is None or oracle is None):
            raise ScriptError("an oracle graph needs a family and an oracle")
        self.name = name
        self.script = script
        self.nodes = nodes
        self.family = family
        self.oracle = oracle if script.kind == ORACLE_GRAPH else None
        self.loops: list[LoopRecord] = []
        self.roots: list[int] = []
        self._by_root: dict[int, list[LoopRecord]] = {}
        self._host = LiveHost()
        self._synced_loops = 0
        self._synced_changes = 0
        self._tagged: dict[int, LoopRecord] = {}
        self.listeners: list[Callable[[str, dict], None]] = []

    def new_root(self) -> int:
        root = self.nodes.take(1)
        self.roots.append(root)
        self._by_root[root] = []
        return root

    def declare(self, root: int, length: int, use: int | None, stage: int, role: str = "") -> LoopRecord:
        if root not in self._by_root:
            raise ScriptError(f"{self.name}: unknown root {root}")
        if length < 1:
            raise ScriptError("loop length must be >= 1")
        if self.oracle is None:
            use = None
        elif use is None or use < 0:
            raise ScriptError(f"{self.name}: oracle loops need a use >= 0")
        first = self.nodes.take(length - 1) if length > 1 else root
        seq = self.family.seq if self.family is not None else 0
        lp = LoopRecord(len(self.loops), root, length, first, stage, use, None, role, seq)
        self.loops.append(lp)
        self._by_root[root].append(lp)
        for fn in self.listeners:
            fn("decl", {"graph": self.name, "loop": lp.id, "root": root, "length": length,
                        "first": first, "birth": stage, "use": use, "seq": seq})
        return lp

    def advance(self, stage: int, world) -> None:
        self.script.step(self, stage, world)

    def is_live(self, lp: LoopRecord, seq: int | None = None) -> bool:
        if self.oracle is None or not lp.use_tag:
            return True
        kind, p = self.oracle
        return not self.family.changed_below(kind, p, lp.use_tag, lp.decl_seq, seq)

    def find(self, root: int, length: int) -> LoopRecord | None:
        for lp in self._by_root.get(root, []):
            if lp.length == length:
                return lp
        return None

    def host(self, seq: int | None = None) -> LiveHost:
        """Live loops now, or at an earlier oracle snapshot ``seq``."""
        if seq is not None and self.family is not None and seq != self.family.seq:
            return LiveHost(lp for lp in self.loops if self.is_live(lp, seq))
        self._sync()
        return self._host

    def _sync(self) -> None:
        if self.oracle is not None:
            seqs, positions = self.family.change_log(*self.oracle)
            for i in range(self._synced_changes, len(seqs)):
                pos, at = positions[i], seqs[i]
                for lp in [lp for lp in self._tagged.values() if lp.use_tag > pos and lp.decl_seq < at]:
                    del self._tagged[lp.id]
                    self._host.remove(lp)
            self._synced_changes = len(seqs)
        for lp in self.loops[self._synced_loops:]:
            if self.is_live(lp):
                self._host.add(lp)
                if lp.use_tag:
                    self._tagged[lp.id] = lp
        self._synced_loops = len(self.loops)

    def oracle_view(self) -> OracleView | None:
        if self.oracle is None:
            return None
        return self.family.view(*self.oracle)


def oracle_graph_view(graph: ExternalGraph, stage: int, seq: int | None = None) -> LiveHost:
    """Live loops of an adversary graph among those declared by ``stage``."""
    return LiveHost(lp for lp in graph.loops if lp.birth <= stage and graph.is_live(lp, seq))


# -- evaluation and validation ------------------------------------------------

@dataclass(frozen=True)
class AnswerRecord:
    script: str
    query: int
    stage: int
    seq: int
    oracle: tuple[str, str] | None
    answer: Answer


class AnswerLog:
    def __init__(self):
        self.records: list[AnswerRecord] = []
        self.listeners: list[Callable[[AnswerRecord], None]] = []

    def add(self, rec: AnswerRecord) -> None:
        self.records.append(rec)
        for fn in self.listeners:
            fn(rec)


def eval_plain(script: Script, x: int, s: int, log: AnswerLog | None = None, label: str = "") -> Answer:
    if script.kind not in (PLAIN_FUNCTION, PLAIN_GRAPH):
        raise ScriptError(f"{script.name} needs an oracle")
    ans = script.answer(x, s, None)
    if log is not None:
        log.add(AnswerRecord(label or script.name, x, s, 0, None, ans))
    return ans


def eval_oracle(script: Script, oracle: OracleView, x: int, s: int, log: AnswerLog | None = None,
                label: str = "", world=None) -> Answer:
    if script.kind not in (ORACLE_FUNCTION, ORACLE_GRAPH, ORACLE_MAP):
        raise ScriptError(f"{script.name} takes no oracle")
    ans = script.answer(x, s, oracle, world)
    if ans.converged and (ans.use is None or ans.use < 0):
        raise ScriptError(f"{script.name} converged without a use")
    if log is not None:
        log.add(AnswerRecord(label or script.name, x, s, oracle.seq, (oracle.kind, oracle.p), ans))
    return ans


def map_answer(script: Script, node: int, s: int, oracle: OracleView, world,
               log: AnswerLog | None = None, label: str = "") -> Answer:
    if script.kind != ORACLE_MAP:
        raise ScriptError(f"{script.name} is not a map script")
    return eval_oracle(script, oracle, node, s, log, label, world)


@dataclass(frozen=True)
class Violation:
    script: str
    query: int
    first_stage: int
    second_stage: int
    detail: str


ChangedBelow = Callable[[str, str, int, int, int], bool]


def validate_answers(records: Iterable[AnswerRecord], changed_below: ChangedBelow) -> list[Violation]:
    """Check determinism and use-consistency over a sequence of answers.

    ``changed_below(kind, p, bound, seq_a, seq_b)`` says whether the oracle
    gained a position below ``bound`` in the window (seq_a, seq_b].
    """
    out = []
    last: dict[tuple[str, int], AnswerRecord] = {}
    for rec in records:
        key = (rec.script, rec.query)
        prev = last.get(key)
        last[key] = rec
        if prev is None or not prev.answer.converged:
            continue
        if prev.oracle is None:
            if rec.answer != prev.answer:
                out.append(Violation(rec.script, rec.query, prev.stage, rec.stage,
                                     f"plain answer {prev.answer.to_json()} revoked"))
            continue
        kind, p = prev.oracle
        if rec.seq < prev.seq:
            continue
        if not changed_below(kind, p, prev.answer.use, prev.seq, rec.seq) and rec.answer != prev.answer:
            out.append(Violation(rec.script, rec.query, prev.stage, rec.stage,
                                 f"answer {prev.answer.to_json()} changed to {rec.answer.to_json()} "
                                 f"with the oracle unchanged below {prev.answer.use}"))
    return out
