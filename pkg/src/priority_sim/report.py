"""Human-readable run report plus a machine summary, built from a trace."""

from __future__ import annotations

from collections import Counter

from .audit import AuditReport, Replay, audit_trace, final_graphs
from .graphs import Config, configuration_of
from .trace import Trace, dumps


def _last_acts(trace: Trace) -> dict[str, tuple[int, dict]]:
    out = {}
    for stage, ev in trace.events("act"):
        out[ev["node"]] = (stage, ev)
    return out


def _standing(trace: Trace, kind: str) -> dict[str, int]:
    out = {}
    for stage, ev in trace.events(kind, "init"):
        if ev["type"] == "init":
            out.pop(ev["node"], None)
        else:
            out[ev["node"]] = stage
    return out


def requirement_status(trace: Trace) -> list[dict]:
    """Status of each roster entry at the node the final path visits for it.

    satisfied: a witness exists (N enumerated, R diagonalized).
    vacuous: the adversary has not supplied what the requirement reacts to
    (divergence so far, no copy, no total map).
    pending: work in progress, or no node on the final path.
    """
    r = Replay(trace)
    cfg = r.config
    if cfg is None:
        return []
    path = trace.records[-1]["path"] if trace.records else []
    stages = trace.records[-1]["stage"] if trace.records else 0
    if cfg.assignment is not None:
        levels = list(cfg.assignment)
    else:
        levels = [k % len(cfg.roster) for k in range(stages)] if cfg.roster else []
    acts = _last_acts(trace)
    nenum = _standing(trace, "nenum")
    diag = _standing(trace, "diagonalized")
    out = []
    for k, req in enumerate(cfg.roster):
        row = {"requirement": req.label, "status": "pending", "node": None, "detail": "not on the final path"}
        for level, assigned in enumerate(levels):
            if assigned != k or level > len(path):
                continue
            node = "/".join(path[:level])
            row["node"] = node
            if node not in acts:
                row["detail"] = "never acted"
                break
            stage, ev = acts[node]
            out_ = ev["outcome"]
            if req.kind == "N":
                if node in nenum:
                    row.update(status="satisfied", detail=f"diagonalized at stage {nenum[node]}")
                else:
                    row.update(status="vacuous", detail="functional has not converged to 0")
            elif req.kind == "R":
                if node in diag:
                    row.update(status="satisfied", detail=f"diagonalized at stage {diag[node]}")
                elif out_ == "w0":
                    row.update(status="vacuous", detail="no committed map so far")
                else:
                    row.update(status="pending", detail=f"outcome {out_}")
            else:
                if out_ == "inf":
                    row.update(status="pending", detail="maps still growing, outcome inf")
                else:
                    row.update(status="vacuous", detail=f"no further copy found (outcome {out_})")
            break
        out.append(row)
    return out


def final_configurations(trace: Trace) -> dict[str, dict]:
    r = Replay(trace)
    graphs = final_graphs(trace, r)
    out = {}
    for name, g in graphs.items():
        if g.kind == "adversary":
            continue
        counts, special = Counter(), {}
        for comp in sorted(g.roots):
            lengths = r.live_lengths_comp(g, comp, r.final_seq)
            cfg = configuration_of(lengths, comp, g.kind)
            counts[cfg.value] += 1
            if cfg != Config.INITIAL:
                special[comp] = {"config": cfg.value, "lengths": lengths}
        out[name] = {"counts": dict(sorted(counts.items())), "non_initial": special}
    return out


def build_report(trace: Trace, audit: AuditReport | None = None) -> tuple[str, list[str]]:
    """Return (text, machine summary lines)."""
    audit = audit or audit_trace(trace)
    lines = []
    name = trace.header.get("name", "custom") if trace.header else "custom"
    lo, hi = audit.stage_range
    lines.append(f"run {name}: stages {lo}..{hi}, audits {'PASS' if audit.passed else 'FAIL'}")
    failing = [c for c in audit.checks if not c.passed]
    if failing:
        lines.append("")
        lines.append("FAILURES")
        for c in failing:
            lines.append(f"  {c.name}: {len(c.witnesses)} witness(es); first {dumps(c.witnesses[0])}")
    lines.append("")
    lines.append("requirements")
    for row in requirement_status(trace):
        lines.append(f"  {row['requirement']}: {row['status']} ({row['detail']})")
    lines.append("")
    lines.append("checks")
    for c in audit.checks:
        lines.append(f"  {'PASS' if c.passed else 'FAIL'}  {c.name}")
    lines.append("")
    lines.append("final configurations")
    for gname, data in final_configurations(trace).items():
        counts = ", ".join(f"{k} {v}" for k, v in data["counts"].items()) or "empty"
        lines.append(f"  {gname}: {counts}")
        for comp, d in data["non_initial"].items():
            lines.append(f"    component {comp}: {d['config']} {d['lengths']}")
    lines.append("")
    lines.append("path prefix stability")
    table = audit.get("checkTruePathStabilization").info
    for L, row in table.items():
        flag = "stable" if row["stable"] else "not yet stable"
        lines.append(f"  L={L}: {'/'.join(row['prefix']) or '-'} since stage {row['stable_since']} ({flag})")
    summary = [dumps({"check": s["check"], "status": s["status"], "witness": s["witness"]})
               for s in audit.summary()]
    return "\n".join(lines) + "\n", summary
