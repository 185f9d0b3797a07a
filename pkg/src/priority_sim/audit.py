"""Post-hoc checkers over a run trace.

Every check here is a pure function of the trace: the enumeration log, the
graphs and the adversaries' declarations are rebuilt from events, so a trace
loaded from disk audits exactly like the one still in memory.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import networkx as nx

from .config import RunConfig
from .engine import left_of, parse_address
from .enumeration import D, CEFamily
from .functionals import Answer, AnswerRecord, validate_answers
from .graphs import ORACLE_COPY, PLAIN_G, Config, configuration_of
from .poset import PosetSpec
from .trace import Trace


@dataclass
class CheckResult:
    name: str
    passed: bool
    witnesses: list[dict] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def fail(self, **witness) -> None:
        self.passed = False
        self.witnesses.append(witness)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        w = f" {self.witnesses[0]}" if self.witnesses else ""
        return f"{self.name}: {status}{w}"


@dataclass
class AuditReport:
    checks: list[CheckResult]
    stage_range: tuple[int, int]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> list[dict]:
        return [{"check": c.name, "status": "pass" if c.passed else "fail",
                 "witness": c.witnesses[0] if c.witnesses else None} for c in self.checks]


# -- replay --------------------------------------------------------------------

@dataclass
class RLoop:
    id: int
    root: int
    length: int
    first: int
    birth: int
    use: int | None
    seq: int = 0
    component: int | None = None
    role: str = ""

    @property
    def nodes(self) -> list[int]:
        return [self.root] + list(range(self.first, self.first + self.length - 1))


class RGraph:
    """A graph rebuilt from trace events."""

    def __init__(self, name: str, kind: str, oracle: tuple[str, str] | None):
        self.name = name
        self.kind = kind
        self.oracle = oracle
        self.roots: dict[int, int] = {}
        self.loops: list[RLoop] = []
        self.by_comp: dict[int, list[RLoop]] = defaultdict(list)
        self.by_root: dict[int, list[RLoop]] = defaultdict(list)
        self.by_tag: dict[int, list[RLoop]] = defaultdict(list)

    def add(self, lp: RLoop) -> None:
        self.loops.append(lp)
        self.by_root[lp.root].append(lp)
        if lp.component is not None:
            self.by_comp[lp.component].append(lp)
        if lp.use is not None:
            self.by_tag[lp.use].append(lp)


class Replay:
    """Rebuilds the enumeration log, graphs and adversary declarations from a trace."""

    def __init__(self, trace: Trace):
        self.trace = trace
        self.config = RunConfig.from_json(trace.header) if trace.header else None
        self.poset: PosetSpec = self.config.poset if self.config else PosetSpec.build([])
        self.family = CEFamily(self.poset)
        self.enums = []
        for stage, ev in trace.events("enum"):
            self.family.advance(stage)
            entry = self.family.enumerate(ev["set"], ev["number"], stage, ev["by"])
            if entry is None or entry.seq != ev["seq"]:
                raise ValueError(f"stage {stage}: enumeration log does not replay")
            self.enums.append((stage, ev))
        self.graph_kinds = {"G": (PLAIN_G, None)}
        for q in self.poset.partition1:
            self.graph_kinds[f"B[{q}]"] = (ORACLE_COPY, q)
        self.adversary_oracle = {}
        if self.config:
            for k, req in enumerate(self.config.roster):
                name = f"M[{k}:{req.label}]"
                self.adversary_oracle[name] = (D, req.element) if req.kind == "T" else None
        self.final_seq = self.family.seq
        self.last_stage = trace.records[-1]["stage"] if trace.records else 0

    def new_graphs(self) -> dict[str, RGraph]:
        out = {}
        for name, (kind, q) in self.graph_kinds.items():
            out[name] = RGraph(name, kind, (D, q) if q else None)
        for name, oracle in self.adversary_oracle.items():
            out[name] = RGraph(name, "adversary", oracle)
        return out

    @staticmethod
    def apply(graphs: dict[str, RGraph], ev: dict) -> RGraph | None:
        t = ev["type"]
        if t == "component":
            g = graphs[ev["graph"]]
            g.roots[ev["component"]] = ev["root"]
            return g
        if t == "attach":
            g = graphs[ev["graph"]]
            root = g.roots[ev["component"]]
            g.add(RLoop(ev["loop"], root, ev["length"], ev["first"], -1, ev["useTag"], 0,
                        ev["component"], ev["role"]))
            return g
        if t == "decl":
            g = graphs[ev["graph"]]
            g.add(RLoop(ev["loop"], ev["root"], ev["length"], ev["first"], ev["birth"], ev["use"],
                        ev["seq"]))
            return g
        return None

    def live(self, g: RGraph, lp: RLoop, seq: int) -> bool:
        if g.kind == PLAIN_G:
            return True
        if g.kind == ORACLE_COPY:
            return not self.family.member_d(g.oracle[1], lp.use, seq=seq)
        if g.oracle is None or not lp.use:
            return True
        return not self.family.changed_below(g.oracle[0], g.oracle[1], lp.use, lp.seq, seq)

    def live_lengths_at_root(self, g: RGraph, root: int, seq: int) -> list[int]:
        return sorted(lp.length for lp in g.by_root.get(root, []) if self.live(g, lp, seq))

    def live_lengths_comp(self, g: RGraph, comp: int, seq: int) -> list[int]:
        return sorted(lp.length for lp in g.by_comp.get(comp, []) if self.live(g, lp, seq))

    def stage_end_seqs(self) -> dict[int, int]:
        out, seq = {}, 0
        for rec in self.trace.records:
            for ev in rec["events"]:
                if ev["type"] == "enum":
                    seq = ev["seq"]
            out[rec["stage"]] = seq
        return out


def _extends(address: str, prefix: str) -> bool:
    if not prefix:
        return True
    return address == prefix or address.startswith(prefix + "/")


def _extends_inf(address: str, node: str) -> bool:
    return _extends(address, (node + "/inf") if node else "inf")


def _unpair_u(poset: PosetSpec, pos: int) -> int:
    return poset.unpair(pos)[0]


# -- axiom bookkeeping shared by the T checks ---------------------------------------

class AxiomBook:
    def __init__(self, replay: Replay):
        self.r = replay
        self.ax: dict[str, dict[str, list[tuple[int, int, int]]]] = defaultdict(dict)
        self.element: dict[str, str] = {}

    def add(self, ev: dict, element: str) -> None:
        self.element[ev["node"]] = element
        self.ax[ev["node"]].setdefault(ev["key"], []).append((ev["value"], ev["use"], ev["seq"]))

    def clear(self, node: str) -> None:
        self.ax.pop(node, None)

    def valid(self, node: str, axiom, seq: int) -> bool:
        value, use, at = axiom
        return not self.r.family.changed_below(D, self.element[node], use + 1, at, seq)

    def valid_axioms(self, node: str, key: str, seq: int):
        return [a for a in self.ax.get(node, {}).get(key, []) if self.valid(node, a, seq)]

    def effective(self, node: str, key: str, seq: int):
        """(value, use) of the effective computation; use is the largest agreeing use."""
        alive = self.valid_axioms(node, key, seq)
        if not alive:
            return None
        value = alive[0][0]
        return value, max(a[1] for a in alive if a[0] == value)


# -- individual checks ---------------------------------------------------------------

def check_single_enumerator(trace: Trace) -> CheckResult:
    res = CheckResult("checkSingleEnumerator", True)
    by_stage = defaultdict(set)
    for stage, ev in trace.events("enum"):
        by_stage[stage].add(ev["by"])
    for stage in sorted(by_stage):
        if len(by_stage[stage]) > 1:
            res.fail(stage=stage, strategies=sorted(by_stage[stage]))
    return res


def check_challenge_uniqueness(trace: Trace) -> CheckResult:
    res = CheckResult("checkChallengeUniqueness", True)
    active: dict[str, str] = {}
    for stage, ev in trace.events("challenge", "challenge_met", "release", "init", "diag"):
        t = ev["type"]
        if t == "challenge":
            if ev["node"] in active:
                res.fail(stage=stage, strategy=ev["node"], challengers=[active[ev["node"]], ev["by"]])
            active[ev["node"]] = ev["by"]
        elif t in ("challenge_met", "release"):
            active.pop(ev["node"], None)
        elif t == "init":
            active.pop(ev["node"], None)
        elif "already challenged" in ev.get("message", ""):
            res.fail(stage=stage, strategy=ev["node"], message=ev["message"])
    return res


def check_n_restraint(trace: Trace, replay: Replay | None = None) -> CheckResult:
    r = replay or Replay(trace)
    res = CheckResult("checkNRestraint", True)
    pending = []  # (node, set, use, seq, stage)
    seq = 0
    for stage, ev in trace.events("enum", "nenum", "init"):
        t = ev["type"]
        if t == "enum":
            for node, p, use, at, st in pending:
                if ev["seq"] > at and ev["set"] != p and ev["pos"] < use:
                    res.fail(stage=stage, strategy=node, number=ev["pos"], use=use,
                             by=ev["by"], protected_since=st)
            seq = ev["seq"]
        elif t == "nenum":
            pending.append((ev["node"], ev["set"], ev["use"], seq, stage))
        else:
            pending = [x for x in pending if x[0] != ev["node"]]
    return res


def check_n_disagreement(trace: Trace, replay: Replay | None = None) -> CheckResult:
    """Each N that enumerated and was never initialized afterwards still disagrees."""
    r = replay or Replay(trace)
    res = CheckResult("checkNDisagreement", True)
    standing = {}
    for stage, ev in trace.events("nenum", "init"):
        if ev["type"] == "nenum":
            standing[ev["node"]] = (stage, ev)
        else:
            standing.pop(ev["node"], None)
    for node, (stage, ev) in sorted(standing.items()):
        in_a = r.family.member_a(ev["set"], ev["x"])
        if ev["value"] != 0 or not in_a:
            res.fail(stage=stage, strategy=node, number=ev["x"], value=ev["value"], in_A=in_a)
        res.info[node] = {"x": ev["x"], "phi": ev["value"], "A": int(in_a), "stage": stage}
    return res


class _TWatch:
    """Per T-node state rebuilt from events: n, pair records, element."""

    def __init__(self):
        self.n: dict[str, int] = {}
        self.pairs: dict[str, dict[int, dict]] = defaultdict(dict)
        self.element: dict[str, str] = {}

    def on(self, ev: dict, tnodes: set[str]) -> None:
        t = ev["type"]
        node = ev.get("node")
        if t == "param" and node in tnodes:
            if "pair" in ev:
                self.pairs[node][ev["pair"]] = {"u": ev["u"], "l": ev["l"], "roots": ev["roots"]}
            if "n" in ev:
                self.n[node] = ev["n"]
        elif t == "challenge" and node in tnodes:
            self.n[node] = ev["reset_to"]
        elif t == "init":
            self.n.pop(node, None)
            self.pairs.pop(node, None)

    def defined(self, node: str) -> dict[int, dict]:
        n = self.n.get(node, 0)
        return {m: rec for m, rec in self.pairs.get(node, {}).items() if m < n}


def _t_nodes(trace: Trace) -> dict[str, str]:
    out = {}
    for _, ev in trace.events("tstate"):
        out[ev["node"]] = ev["p"]
    for _, ev in trace.events("axiom"):
        out.setdefault(ev["node"], None)
    return out


def _node_elements(trace: Trace) -> dict[str, tuple[str, str | None]]:
    """Requirement type and element of every node that acted."""
    out = {}
    for _, ev in trace.events("act"):
        label = ev["req"]
        kind = label[0]
        element = label[label.index(",") + 1:-1] if "," in label else None
        out[ev["node"]] = (kind, element)
    return out


def check_use_dominance(trace: Trace, replay: Replay | None = None) -> CheckResult:
    r = replay or Replay(trace)
    res = CheckResult("checkUseDominance", True)
    kinds = _node_elements(trace)
    tnodes = {k for k, (kind, _) in kinds.items() if kind == "T"}
    graphs = r.new_graphs()
    book = AxiomBook(r)
    watch = _TWatch()
    last_u: dict[tuple[str, int], int] = {}
    adversary_of = {}
    if r.config:
        for k, req in enumerate(r.config.roster):
            adversary_of[req.label] = f"M[{k}:{req.label}]"
    labels = {}
    for _, ev in trace.events("act"):
        labels[ev["node"]] = ev["req"]
    seq = 0
    for stage, ev in trace.events():
        t = ev["type"]
        Replay.apply(graphs, ev)
        watch.on(ev, tnodes)
        if t == "enum":
            seq = ev["seq"]
        elif t == "axiom":
            book.add(ev, kinds[ev["node"]][1])
        elif t == "init":
            book.clear(ev["node"])
            for key in [k for k in last_u if k[0] == ev["node"]]:
                del last_u[key]
        elif t == "param" and ev.get("node") in tnodes and "pair" in ev:
            key = (ev["node"], ev["pair"])
            if key in last_u and ev["u"] < last_u[key]:
                res.fail(stage=stage, strategy=ev["node"], pair=ev["pair"], number=ev["u"],
                         previous=last_u[key])
            last_u[key] = ev["u"]
        elif t == "tstate":
            node = ev["node"]
            g = graphs[adversary_of[labels[node]]]
            for m, rec in sorted(watch.defined(node).items()):
                for comp in (2 * m, 2 * m + 1):
                    eff = book.effective(node, f"r:{comp}", seq)
                    if eff is None:
                        continue
                    target, use = eff
                    u = _unpair_u(r.poset, use)
                    l = max((lp.use or 0 for lp in g.by_root.get(target, []) if r.live(g, lp, seq)),
                            default=0)
                    if not l < u:
                        res.fail(stage=stage, strategy=node, pair=m, component=comp, number=l,
                                 use=u, target=target)
    return res


def _bound_by(by: str, node: str) -> bool:
    """Must ``by`` respect the restraint of ``node``?  Higher-priority strategies may injure it."""
    a, b = parse_address(by), parse_address(node)
    if len(a) < len(b) and b[:len(a)] == a:
        return False
    if left_of(a, b):
        return False
    return not _extends_inf(by, node)


def check_t_restraint(trace: Trace, replay: Replay | None = None) -> CheckResult:
    """Numbers at or below a T-node's use come only from strategies below its infinite outcome."""
    r = replay or Replay(trace)
    res = CheckResult("checkTRestraint", True)
    kinds = _node_elements(trace)
    tnodes = {k for k, (kind, _) in kinds.items() if kind == "T"}
    watch = _TWatch()
    for stage, ev in trace.events():
        watch.on(ev, tnodes)
        if ev["type"] != "enum":
            continue
        for node in tnodes:
            p = kinds[node][1]
            if not r.poset.leq(ev["set"], p):
                continue
            for m, rec in watch.defined(node).items():
                if ev["pos"] <= r.poset.pair(rec["u"], p) and _bound_by(ev["by"], node):
                    res.fail(stage=stage, strategy=node, pair=m, number=ev["pos"], by=ev["by"])
    return res


def check_r_restraints(trace: Trace, replay: Replay | None = None) -> CheckResult:
    r = replay or Replay(trace)
    res = CheckResult("checkRRestraints", True)
    graphs = r.new_graphs()
    kinds = _node_elements(trace)
    waiting = {}   # R node -> (q, bound) between w1 and the next R-stage
    stopped = {}   # R node -> (q, bound) after stop
    commits = {}
    for stage, ev in trace.events():
        t = ev["type"]
        Replay.apply(graphs, ev)
        node = ev.get("node")
        if t == "commit":
            commits[node] = dict(ev)
        elif t == "param" and "vpos" in ev:
            commits.setdefault(node, {})["vpos"] = ev["vpos"]
        elif t == "act" and kinds.get(node, ("?",))[0] == "R":
            waiting.pop(node, None)
            q = kinds[node][1]
            if ev["outcome"] == "w1" and ev["case"] == 2:
                waiting[node] = (q, commits[node]["vpos"] + 1, stage)
            if ev["outcome"] == "s" and ev["case"] == 3:
                c = commits[node]
                n = c["n"]
                B = graphs[f"B[{q}]"]
                tags = [lp.use for comp in (2 * n, 2 * n + 1) for lp in B.by_comp[comp]
                        if r.live(B, lp, r.family.seq)]
                stopped[node] = (q, max([c["m"]] + tags) + 1, stage)
        elif t == "init":
            waiting.pop(node, None)
            stopped.pop(node, None)
        elif t == "enum":
            for table, what in ((waiting, "w1"), (stopped, "stop")):
                for rn, (q, bound, since) in table.items():
                    if ev["by"] == rn:
                        continue
                    if r.poset.leq(ev["set"], q) and ev["pos"] < bound:
                        res.fail(stage=stage, strategy=rn, number=ev["pos"], bound=bound, phase=what,
                                 by=ev["by"], since=since)
    return res


def check_challenge_recovery(trace: Trace, replay: Replay | None = None) -> CheckResult:
    r = replay or Replay(trace)
    res = CheckResult("checkChallengeRecovery", True)
    graphs = r.new_graphs()
    kinds = _node_elements(trace)
    book = AxiomBook(r)
    fmap: dict[str, dict[str, int]] = defaultdict(dict)
    issued: dict[str, list[str]] = defaultdict(list)
    commits = {}
    seq = 0
    for stage, ev in trace.events():
        t = ev["type"]
        Replay.apply(graphs, ev)
        node = ev.get("node")
        if t == "axiom":
            book.add(ev, kinds[node][1])
        elif t == "fmap":
            fmap[node][ev["key"]] = ev["value"]
        elif t == "init":
            book.clear(node)
            fmap.pop(node, None)
            issued.pop(node, None)
            for rn in issued:
                if node in issued[rn]:
                    issued[rn].remove(node)
        elif t == "commit":
            commits[node] = dict(ev)
            issued[node] = []
        elif t == "param" and "vpos" in ev:
            commits[node]["vpos"] = ev["vpos"]
        elif t == "challenge":
            issued[ev["by"]].append(node)
        elif t == "enum":
            if ev.get("why") == "diagonalize":
                _recovery_at(r, res, graphs, book, fmap, kinds, commits[ev["by"]], issued[ev["by"]],
                             ev["by"], stage, seq)
            seq = ev["seq"]
    return res


def _recovery_at(r, res, graphs, book, fmap, kinds, commit, challenged, rnode, stage, seq):
    n, q, vpos = commit["n"], commit["q"], commit["vpos"]
    G = graphs["G"]
    keys, new_keys = [], set()
    for comp in (2 * n, 2 * n + 1):
        keys.append(f"r:{comp}")
        for lp in G.by_comp[comp]:
            keys.append(f"l:{lp.id}")
            if lp.role == "challenge":
                new_keys.add(f"l:{lp.id}")
    for node in challenged:
        kind, p = kinds[node]
        if kind == "S":
            missing = [k for k in keys if k not in fmap.get(node, {})]
            if missing:
                res.fail(stage=stage, strategy=node, challenger=rnode, missing=missing[:4])
            continue
        strict = r.poset.lt(q, p)
        for key in keys:
            alive = book.valid_axioms(node, key, seq)
            if not alive:
                res.fail(stage=stage, strategy=node, challenger=rnode, key=key, missing=True)
                continue
            low = min(a[1] for a in alive)
            if (key in new_keys or strict) and not low > vpos:
                res.fail(stage=stage, strategy=node, challenger=rnode, key=key, number=low, vpos=vpos)


def check_configurations(trace: Trace, replay: Replay | None = None) -> CheckResult:
    r = replay or Replay(trace)
    res = CheckResult("checkConfigurations", True)
    graphs = r.new_graphs()
    end_seq = r.stage_end_seqs()
    for rec in trace.records:
        stage = rec["stage"]
        touched = defaultdict(set)
        for ev in rec["events"]:
            g = Replay.apply(graphs, ev)
            if ev["type"] in ("component", "attach") and g is not None:
                touched[g.name].add(ev["component"])
            elif ev["type"] == "enum":
                for name, g2 in graphs.items():
                    if g2.kind == ORACLE_COPY and r.poset.leq(ev["set"], g2.oracle[1]):
                        for lp in g2.by_tag.get(ev["pos"], []):
                            touched[name].add(lp.component)
        seq = end_seq[stage]
        for name in sorted(touched):
            g = graphs[name]
            for comp in sorted(touched[name]):
                lengths = r.live_lengths_comp(g, comp, seq)
                cfg = configuration_of(lengths, comp, g.kind)
                if cfg == Config.INVALID:
                    res.fail(stage=stage, graph=name, component=comp, lengths=lengths)
    return res


def final_graphs(trace: Trace, replay: Replay | None = None) -> dict[str, RGraph]:
    r = replay or Replay(trace)
    graphs = r.new_graphs()
    for _, ev in trace.events("component", "attach", "decl"):
        Replay.apply(graphs, ev)
    return graphs


def _standing_r(trace: Trace) -> dict[str, dict]:
    """R nodes whose last recorded state is a completed diagonalization."""
    commits, done = {}, {}
    for stage, ev in trace.events("commit", "diagonalized", "init", "param"):
        node = ev["node"]
        if ev["type"] == "commit":
            commits[node] = dict(ev, stage=stage)
        elif ev["type"] == "param" and "vpos" in ev and node in commits:
            commits[node]["vpos"] = ev["vpos"]
        elif ev["type"] == "diagonalized":
            done[node] = dict(commits[node], done_stage=stage)
        else:
            commits.pop(node, None)
            done.pop(node, None)
    return done


def check_diagonalization(trace: Trace, replay: Replay | None = None) -> CheckResult:
    r = replay or Replay(trace)
    res = CheckResult("checkDiagonalization", True)
    graphs = final_graphs(trace, r)
    seq = r.final_seq
    for node, c in sorted(_standing_r(trace).items()):
        n, q, m = c["n"], c["q"], c["m"]
        G, B = graphs["G"], graphs[f"B[{q}]"]
        if r.family.changed_below(D, q, m, c["seq"], seq):
            res.fail(strategy=node, stage=c["stage"], number=m, reason="map use region changed")
            continue
        same = []
        for comp in (2 * n, 2 * n + 1):
            a = r.live_lengths_at_root(G, G.roots[comp], seq)
            b = r.live_lengths_at_root(B, B.roots[comp], seq)
            if c["images"][str(comp)] != B.roots[comp]:
                res.fail(strategy=node, component=comp, reason="committed image is not b")
            same.append(a == b)
        if any(same):
            res.fail(strategy=node, stage=c["stage"], pair=n, reason="map is still an isomorphism")
        res.info[node] = {"n": n, "stage": c["done_stage"]}
    return res


def _flower(lengths) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_node(0)
    nxt = 1
    for length in lengths:
        cyc = [0] + list(range(nxt, nxt + length - 1))
        nxt += length - 1
        for i in range(len(cyc)):
            g.add_edge(cyc[i], cyc[(i + 1) % len(cyc)])
    return g


def check_isomorphism_gb(trace: Trace, replay: Replay | None = None, brute_limit: int = 5) -> CheckResult:
    r = replay or Replay(trace)
    res = CheckResult("checkIsomorphismGB", True)
    graphs = final_graphs(trace, r)
    seq = r.final_seq
    G = graphs["G"]
    crossed = defaultdict(set)
    for _, ev in trace.events("diagonalized"):
        crossed[ev["q"]].add(ev["n"])
    for q in sorted(r.poset.partition1, key=r.poset.index):
        B = graphs[f"B[{q}]"]
        pairs = sorted({comp // 2 for comp in G.roots})
        for n in pairs:
            if 2 * n + 1 not in G.roots or 2 * n + 1 not in B.roots:
                continue
            cross = n in crossed[q]
            touched = any(lp.role not in ("base", "base2")
                          for comp in (2 * n, 2 * n + 1) for lp in G.by_comp[comp] + B.by_comp[comp])
            for comp in (2 * n, 2 * n + 1):
                other = (comp ^ 1) if cross else comp
                a = r.live_lengths_comp(G, comp, seq)
                b = r.live_lengths_comp(B, other, seq)
                if a != b:
                    res.fail(q=q, pair=n, component=comp, G=a, B=b, cross=cross)
                    continue
                if touched or n <= brute_limit:
                    gb = _edges(lp for lp in B.by_comp[other] if r.live(B, lp, seq))
                    if not _same_shape(gb, B.roots[other], a):
                        res.fail(q=q, pair=n, component=comp, reason="brute-force isomorphism failed")
            if cross:
                res.info.setdefault(q, []).append(n)
    return res


def check_oracle_graph_defeat(trace: Trace, replay: Replay | None = None) -> CheckResult:
    """At the end, no effective root value of a T-map points at a component with foreign loops."""
    r = replay or Replay(trace)
    res = CheckResult("checkOracleGraphDefeat", True)
    graphs = final_graphs(trace, r)
    kinds = _node_elements(trace)
    book = AxiomBook(r)
    for _, ev in trace.events("axiom", "init"):
        if ev["type"] == "axiom":
            book.add(ev, kinds[ev["node"]][1])
        else:
            book.clear(ev["node"])
    labels = {}
    for _, ev in trace.events("act"):
        labels[ev["node"]] = ev["req"]
    G = graphs["G"]
    seq = r.final_seq
    names = {}
    if r.config:
        for k, req in enumerate(r.config.roster):
            names[req.label] = f"M[{k}:{req.label}]"
    for node in sorted(book.ax):
        M = graphs[names[labels[node]]]
        for key in sorted(book.ax[node]):
            if not key.startswith("r:"):
                continue
            eff = book.effective(node, key, seq)
            if eff is None:
                continue
            comp = int(key[2:])
            a = r.live_lengths_comp(G, comp, seq)
            y = r.live_lengths_at_root(M, eff[0], seq)
            if not set(y) <= set(a):
                res.fail(strategy=node, component=comp, target=eff[0], G=a, M=y)
    return res


def check_true_path_stabilization(trace: Trace, prefix_length: int = 4) -> CheckResult:
    """Informational: the last stage at which each path prefix changed.

    Levels beyond the recorded active prefix idle at w0.  A prefix counts as
    changed only where both stages define it, so growth alone is not a change.
    A prefix is reported stable when it held over the last quarter of the window.
    """
    res = CheckResult("checkTruePathStabilization", True)
    table = {}
    last = trace.records[-1]["stage"] if trace.records else 0
    for L in range(1, prefix_length + 1):
        prev, changed_at = (), 0
        for rec in trace.records:
            s = rec["stage"]
            path = list(rec["path"])[:L]
            cur = tuple(path + ["w0"] * max(0, min(L, s) - len(path)))
            k = min(len(cur), len(prev))
            if cur[:k] != prev[:k]:
                changed_at = s
            prev = cur
        table[L] = {"prefix": list(prev), "stable_since": changed_at,
                    "stable": last - changed_at >= max(1, last // 4) or changed_at == 0}
    res.info = table
    return res


def _changed_below(r: Replay):
    def fn(kind, p, bound, a, b):
        return r.family.changed_below(kind, p, bound, a, b)
    return fn


def validate_scripts(trace: Trace, replay: Replay | None = None) -> CheckResult:
    r = replay or Replay(trace)
    res = CheckResult("validateScripts", True)
    records = []
    stage_of = {}
    for stage, ev in trace.events("answer"):
        ans = Answer(False) if ev["answer"] is None else Answer(True, ev["answer"][0], ev["answer"][1])
        oracle = tuple(ev["oracle"]) if ev["oracle"] else None
        records.append(AnswerRecord(ev["script"], ev["query"], stage, ev["seq"], oracle, ans))
    for v in validate_answers(records, _changed_below(r)):
        res.fail(stage=v.second_stage, script=v.script, query=v.query, first=v.first_stage,
                 detail=v.detail)
    return res


def check_oracle_equivalence(trace: Trace, replay: Replay | None = None) -> CheckResult:
    """Recompute every oldest/lex-least selection by exhaustive isomorphism search."""
    r = replay or Replay(trace)
    res = CheckResult("bruteForceOldestOracle", True)
    graphs = r.new_graphs()
    cache = {}
    count = 0
    for stage, ev in trace.events():
        Replay.apply(graphs, ev)
        if ev["type"] != "select":
            continue
        count += 1
        g = graphs[ev["graph"]]
        seq = ev["seq"]
        if ev["mode"] == "component":
            got = brute_force_oldest(r, g, ev["pattern"], set(ev["exclude"]), seq, cache)
            if got is None or got[0] != ev["chosen"] or got[1] != ev["age"]:
                res.fail(stage=stage, strategy=ev["node"], pair=ev["pair"], component=ev["comp"],
                         chosen=ev["chosen"], oracle=got and got[0])
        else:
            got = brute_force_oldest_loop(r, g, ev["root"], ev["length"], set(ev["exclude"]), seq)
            if got is None or got[0] != ev["chosen"] or got[1] != ev["age"]:
                res.fail(stage=stage, strategy=ev["node"], pair=ev["pair"], chosen=ev["chosen"],
                         oracle=got and got[0])
    res.info["decisions"] = count
    return res


def _edges(loops):
    for lp in loops:
        ns = lp.nodes
        for i in range(len(ns)):
            yield ns[i], ns[(i + 1) % len(ns)]


def flower_cycles(edges, root: int) -> list[list[int]] | None:
    """The cycles of a root-plus-loops graph read off its raw edges, or None if it is not one.

    Every non-root node must have exactly one successor and one predecessor, and
    every walk leaving the root must come back to it without revisiting a node.
    """
    succ, indeg = defaultdict(list), defaultdict(int)
    for x, y in edges:
        succ[x].append(y)
        indeg[y] += 1
    nodes = set(succ) | set(indeg)
    if root not in nodes:
        return None
    seen = {root}
    cycles = []
    for start in sorted(succ[root]):
        cyc, x = [root], start
        while x != root:
            if x in seen or len(succ[x]) != 1 or indeg[x] != 1:
                return None
            seen.add(x)
            cyc.append(x)
            x = succ[x][0]
        cycles.append(cyc)
    if len(seen) != len(nodes) or indeg[root] != len(cycles):
        return None
    return cycles


SMALL = 60


def _same_shape(host_edges, root: int, lengths) -> bool:
    """Is the graph on ``host_edges`` isomorphic to the root-plus-loops graph with ``lengths``?"""
    host_edges = list(host_edges)
    cycles = flower_cycles(host_edges, root)
    by_walk = cycles is not None and sorted(len(c) for c in cycles) == sorted(lengths)
    if 1 + sum(length - 1 for length in lengths) <= SMALL:
        host = nx.DiGraph(host_edges)
        host.add_node(root)
        by_vf2 = nx.is_isomorphic(host, _flower(lengths))
        if by_vf2 != by_walk:
            raise AssertionError(f"isomorphism oracles disagree at root {root}")
    return by_walk


def brute_force_oldest(r: Replay, g: RGraph, pattern, exclude: set[int], seq: int, cache=None):
    """(root, age) of the oldest lex-least live component isomorphic to the pattern.

    Components are rebuilt from raw edges; a pattern-sized node count is the
    only prefilter before the structural comparison.
    """
    cache = {} if cache is None else cache
    size = 1 + sum(length - 1 for length in pattern)
    best = None
    for root, loops in g.by_root.items():
        if root in exclude:
            continue
        live = [lp for lp in loops if r.live(g, lp, seq)]
        if not live or 1 + sum(lp.length - 1 for lp in live) != size:
            continue
        key = (tuple(pattern), tuple(lp.id for lp in live))
        if key not in cache:
            cache[key] = _same_shape(_edges(live), root, pattern)
        if not cache[key]:
            continue
        cand = (max(lp.birth for lp in live), tuple(sorted({x for lp in live for x in lp.nodes})), root)
        if best is None or cand[:2] < best[:2]:
            best = cand
    return None if best is None else (best[2], best[0])


def brute_force_oldest_loop(r: Replay, g: RGraph, root: int, length: int, exclude: set[int], seq: int):
    live = [lp for lp in g.by_root.get(root, []) if r.live(g, lp, seq)]
    cycles = flower_cycles(_edges(live), root) or []
    by_nodes = {frozenset(lp.nodes): lp for lp in live}
    best = None
    for cyc in cycles:
        if len(cyc) != length:
            continue
        lp = by_nodes.get(frozenset(cyc))
        if lp is None or lp.id in exclude:
            continue
        cand = (lp.birth, tuple(sorted(cyc)), lp.id)
        if best is None or cand[:2] < best[:2]:
            best = cand
    return None if best is None else (best[2], best[0])


LEMMA_CHECKS = (
    "checkSingleEnumerator", "checkChallengeUniqueness", "checkNRestraint", "checkUseDominance",
    "checkRRestraints", "checkChallengeRecovery", "checkConfigurations",
)


def audit_trace(trace: Trace, prefix_length: int = 4, brute: bool = True) -> AuditReport:
    r = Replay(trace)
    checks = [
        check_single_enumerator(trace),
        check_challenge_uniqueness(trace),
        check_n_restraint(trace, r),
        check_use_dominance(trace, r),
        check_r_restraints(trace, r),
        check_challenge_recovery(trace, r),
        check_configurations(trace, r),
        check_t_restraint(trace, r),
        check_n_disagreement(trace, r),
        check_diagonalization(trace, r),
        check_isomorphism_gb(trace, r),
        check_oracle_graph_defeat(trace, r),
        validate_scripts(trace, r),
    ]
    if brute:
        checks.append(check_oracle_equivalence(trace, r))
    checks.append(check_true_path_stabilization(trace, prefix_length))
    first = trace.records[0]["stage"] if trace.records else 0
    return AuditReport(checks, (first, r.last_stage))


class AuditFailure(RuntimeError):
    def __init__(self, result: CheckResult):
        super().__init__(result.line())
        self.result = result


class StrictMonitor:
    """Per-stage checks that abort a run on the first violation.

    Install as the construction's ``on_stage`` hook.  Covers the checks that
    are local to one stage record plus the N restraint.
    """

    def __init__(self):
        self.n_uses: dict[str, tuple[str, int]] = {}

    def __call__(self, construction, rec: dict) -> None:
        stage = rec["stage"]
        by = {ev["by"] for ev in rec["events"] if ev["type"] == "enum"}
        if len(by) > 1:
            self._abort("checkSingleEnumerator", stage=stage, strategies=sorted(by))
        for ev in rec["events"]:
            t = ev["type"]
            if t == "diag":
                self._abort("checkChallengeUniqueness", stage=stage, strategy=ev["node"],
                            message=ev["message"])
            elif t == "enum":
                for node, (p, use) in self.n_uses.items():
                    if ev["set"] != p and ev["pos"] < use:
                        self._abort("checkNRestraint", stage=stage, strategy=node, number=ev["pos"])
            elif t == "nenum":
                self.n_uses[ev["node"]] = (ev["set"], ev["use"])
            elif t == "init":
                self.n_uses.pop(ev["node"], None)
        graphs = [construction.G] + list(construction.B.values())
        for g in graphs:
            for index in (2 * stage, 2 * stage + 1):
                if index in g.components and g.configuration(index) == Config.INVALID:
                    self._abort("checkConfigurations", stage=stage, graph=g.name, component=index)
        for ev in rec["events"]:
            if ev["type"] == "attach":
                g = construction.G if ev["graph"] == "G" else construction.B[ev["graph"][2:-1]]
                if g.configuration(ev["component"]) == Config.INVALID:
                    self._abort("checkConfigurations", stage=stage, graph=g.name,
                                component=ev["component"])

    @staticmethod
    def _abort(name: str, **witness) -> None:
        res = CheckResult(name, True)
        res.fail(**witness)
        raise AuditFailure(res)
