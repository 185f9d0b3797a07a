"""Finite partial orders with a two-block partition and the use-coding pair function."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product


class PosetError(ValueError):
    pass


def cantor_pair(x: int, y: int) -> int:
    return (x + y) * (x + y + 1) // 2 + y


def unpair(n: int) -> tuple[int, int]:
    """Inverse of :func:`cantor_pair`; returns ``(u, index)``."""
    if n < 0:
        raise PosetError(f"cannot unpair negative number {n}")
    w = (math.isqrt(8 * n + 1) - 1) // 2
    y = n - w * (w + 1) // 2
    return w - y, y


@dataclass(frozen=True)
class PosetSpec:
    elements: tuple[str, ...]
    order: frozenset[tuple[str, str]]
    partition0: frozenset[str]
    partition1: frozenset[str]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.elements)})

    @classmethod
    def build(cls, elements, order=(), partition0=(), partition1=None, close=True):
        """Build a poset from generating pairs ``(q, p)`` meaning ``q <= p``.

        With ``close`` the reflexive-transitive closure is taken. When
        ``partition1`` is omitted it is the complement of ``partition0``.
        """
        elements = tuple(elements)
        rel = {(a, b) for a, b in order}
        if close:
            rel |= {(p, p) for p in elements}
            changed = True
            while changed:
                changed = False
                for (a, b), (c, d) in product(list(rel), list(rel)):
                    if b == c and (a, d) not in rel:
                        rel.add((a, d))
                        changed = True
        p0 = frozenset(partition0)
        p1 = frozenset(partition1) if partition1 is not None else frozenset(elements) - p0
        spec = cls(elements, frozenset(rel), p0, p1)
        errors = spec.validate()
        if errors:
            raise PosetError("; ".join(errors))
        return spec

    def validate(self) -> list[str]:
        errors = []
        els = set(self.elements)
        if len(els) != len(self.elements):
            errors.append("duplicate element labels")
        for a, b in self.order:
            if a not in els or b not in els:
                errors.append(f"order pair ({a},{b}) uses unknown element")
        for p in self.elements:
            if (p, p) not in self.order:
                errors.append(f"order is not reflexive at {p}")
        for a, b in self.order:
            if a != b and (b, a) in self.order:
                errors.append(f"order is not antisymmetric on {a},{b}")
        for a, b in self.order:
            for c in self.elements:
                if (b, c) in self.order and (a, c) not in self.order:
                    errors.append(f"order is not transitive: {a}<={b}<={c}")
        if self.partition0 | self.partition1 != els:
            errors.append("partition blocks do not cover the elements")
        if self.partition0 & self.partition1:
            errors.append("partition blocks overlap")
        return errors

    def index(self, p: str) -> int:
        try:
            return self._index[p]
        except KeyError:
            raise PosetError(f"unknown poset element {p!r}") from None

    def leq(self, q: str, p: str) -> bool:
        self.index(q)
        self.index(p)
        return (q, p) in self.order

    def lt(self, q: str, p: str) -> bool:
        return q != p and self.leq(q, p)

    def below(self, p: str) -> list[str]:
        """Elements q with q <= p, in element order."""
        return [q for q in self.elements if (q, p) in self.order]

    def pair(self, u: int, p: str) -> int:
        if u < 0:
            raise PosetError(f"negative number {u}")
        return cantor_pair(u, self.index(p))

    def unpair(self, n: int) -> tuple[int, str]:
        u, i = unpair(n)
        if i >= len(self.elements):
            raise PosetError(f"{n} does not code an element of this poset")
        return u, self.elements[i]

    def to_json(self) -> dict:
        return {
            "elements": list(self.elements),
            "order": sorted([a, b] for a, b in self.order if a != b),
            "partition0": sorted(self.partition0),
            "partition1": sorted(self.partition1),
        }

    @classmethod
    def from_json(cls, data: dict) -> "PosetSpec":
        return cls.build(
            data["elements"],
            [tuple(x) for x in data.get("order", [])],
            data.get("partition0", []),
            data.get("partition1"),
        )
