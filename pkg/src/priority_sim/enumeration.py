"""The c.e. family {A_p} as an append-only log, with D_p and D-hat_p as derived views.

Every enumeration gets a global sequence number.  Oracle snapshots are taken
by sequence number rather than by stage so that an enumeration made in the
middle of a stage is visible to later queries in the same stage.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .poset import PosetSpec

D = "D"
DHAT = "Dhat"


class EnumerationError(ValueError):
    pass


@dataclass(frozen=True)
class Entry:
    element: str
    number: int
    stage: int
    by: str
    seq: int


class CEFamily:
    def __init__(self, poset: PosetSpec):
        self.poset = poset
        self.current_stage = 0
        self.seq = 0
        self.log: list[Entry] = []
        self.duplicates: list[Entry] = []
        self._sets: dict[str, dict[int, Entry]] = {p: {} for p in poset.elements}
        # (kind, p) -> parallel lists of seq, stage and D-position
        self._changes: dict[tuple[str, str], tuple[list, list, list]] = {
            (k, p): ([], [], []) for k in (D, DHAT) for p in poset.elements
        }

    def advance(self, stage: int) -> None:
        if stage < self.current_stage:
            raise EnumerationError(f"cannot move back from stage {self.current_stage} to {stage}")
        self.current_stage = stage

    def enumerate(self, p: str, u: int, stage: int, by: str) -> Entry | None:
        """Put ``u`` into A_p.  Returns the new entry, or None for a duplicate."""
        if stage != self.current_stage:
            raise EnumerationError(
                f"enumeration dated stage {stage} but current stage is {self.current_stage}"
            )
        self.poset.index(p)
        if u in self._sets[p]:
            self.duplicates.append(Entry(p, u, stage, by, self.seq))
            return None
        self.seq += 1
        entry = Entry(p, u, stage, by, self.seq)
        self._sets[p][u] = entry
        self.log.append(entry)
        pos = self.poset.pair(u, p)
        for r in self.poset.elements:
            if self.poset.leq(p, r):
                self._record(D, r, entry, pos)
            if r != p:
                self._record(DHAT, r, entry, pos)
        return entry

    def _record(self, kind, r, entry, pos):
        seqs, stages, positions = self._changes[(kind, r)]
        seqs.append(entry.seq)
        stages.append(entry.stage)
        positions.append(pos)

    # -- membership -------------------------------------------------------

    def member_a(self, p: str, u: int, stage: int | None = None, seq: int | None = None) -> bool:
        e = self._sets[p].get(u)
        if e is None:
            return False
        if stage is not None and e.stage > stage:
            return False
        if seq is not None and e.seq > seq:
            return False
        return True

    def _member(self, kind, p, x, stage, seq):
        try:
            u, q = self.poset.unpair(x)
        except ValueError:
            return False
        if kind == D and not self.poset.leq(q, p):
            return False
        if kind == DHAT and q == p:
            return False
        return self.member_a(q, u, stage, seq)

    def member_d(self, p: str, x: int, stage: int | None = None, seq: int | None = None) -> bool:
        return self._member(D, p, x, stage, seq)

    def member_dhat(self, p: str, x: int, stage: int | None = None, seq: int | None = None) -> bool:
        return self._member(DHAT, p, x, stage, seq)

    def member(self, kind: str, p: str, x: int, stage=None, seq=None) -> bool:
        return self._member(kind, p, x, stage, seq)

    # -- restrictions -----------------------------------------------------

    def restriction_equal(self, kind: str, p: str, bound: int, s: int, t: int) -> bool:
        """True iff the oracle below ``bound`` is the same at the ends of stages s and t."""
        if s > t:
            s, t = t, s
        _, stages, positions = self._changes[(kind, p)]
        lo = bisect.bisect_right(stages, s)
        hi = bisect.bisect_right(stages, t)
        return not any(positions[i] < bound for i in range(lo, hi))

    def changed_below(self, kind: str, p: str, bound: int, seq_from: int, seq_to: int | None = None) -> bool:
        """Has some position < bound entered the oracle at a sequence number in (seq_from, seq_to]?"""
        if seq_to is None:
            seq_to = self.seq
        seqs, _, positions = self._changes[(kind, p)]
        lo = bisect.bisect_right(seqs, seq_from)
        hi = bisect.bisect_right(seqs, seq_to)
        return any(positions[i] < bound for i in range(lo, hi))

    def first_change_below(self, kind, p, bound, seq_from, seq_to=None):
        if seq_to is None:
            seq_to = self.seq
        seqs, _, positions = self._changes[(kind, p)]
        lo = bisect.bisect_right(seqs, seq_from)
        hi = bisect.bisect_right(seqs, seq_to)
        for i in range(lo, hi):
            if positions[i] < bound:
                return positions[i]
        return None

    def change_log(self, kind: str, p: str) -> tuple[list[int], list[int]]:
        """Parallel lists (sequence numbers, positions) of every change to the oracle."""
        seqs, _, positions = self._changes[(kind, p)]
        return seqs, positions

    def changes_since(self, kind: str, p: str, seq_from: int) -> list[int]:
        seqs, _, positions = self._changes[(kind, p)]
        return positions[bisect.bisect_right(seqs, seq_from):]

    def positions(self, kind: str, p: str, seq: int | None = None) -> list[int]:
        seqs, _, positions = self._changes[(kind, p)]
        if seq is None:
            return list(positions)
        return [x for s, x in zip(seqs, positions) if s <= seq]

    def view(self, kind: str, p: str, seq: int | None = None) -> "OracleView":
        return OracleView(self, kind, p, self.seq if seq is None else seq)

    def entries_at(self, stage: int) -> list[Entry]:
        return [e for e in self.log if e.stage == stage]


class OracleView:
    """Read-only snapshot of D_p or D-hat_p at a fixed sequence number."""

    __slots__ = ("family", "kind", "p", "seq")

    def __init__(self, family: CEFamily, kind: str, p: str, seq: int):
        self.family = family
        self.kind = kind
        self.p = p
        self.seq = seq

    def __contains__(self, x: int) -> bool:
        return self.family.member(self.kind, self.p, x, seq=self.seq)

    def unchanged_since(self, bound: int, seq: int) -> bool:
        return not self.family.changed_below(self.kind, self.p, bound, seq, self.seq)

    def positions(self) -> list[int]:
        return self.family.positions(self.kind, self.p, self.seq)
