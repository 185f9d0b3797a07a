"""Built-in canonical scenarios."""

from __future__ import annotations

import random

from .config import Requirement, RunConfig
from .poset import PosetSpec


def single_n(stages: int = 30) -> RunConfig:
    poset = PosetSpec.build(["p"], partition0=["p"])
    roster = [Requirement("N", 0, "p", "convergeAt", {"at": 5, "value": 0})]
    return RunConfig(poset, stages, roster, [0], name="single-N")


def single_r(stages: int = 200) -> RunConfig:
    poset = PosetSpec.build(["q"], partition0=[], partition1=["q"])
    roster = [Requirement("R", 0, "q", "mapCommit", {"at": 25})]
    return RunConfig(poset, stages, roster, [0], name="single-R")


def section25(stages: int = 500, disable_use_lifting: bool = False) -> RunConfig:
    poset = PosetSpec.build(["q", "p"], [("q", "p")], partition0=["p"], partition1=["q"])
    roster = [
        Requirement("T", 0, "p", "section25", {"delay": 1}),
        Requirement("R", 0, "q", "mapCommit", {"at": 40}),
    ]
    return RunConfig(poset, stages, roster, [0, 1], disable_use_lifting=disable_use_lifting,
                     name="section25")


def fake_elder(stages: int = 40) -> RunConfig:
    poset = PosetSpec.build(["p"], partition0=["p"])
    roster = [
        Requirement("T", 0, "p", "fakeElder",
                    {"pair": 2, "fake_at": 3, "true_at": 6, "fake_use": 10 ** 6}),
        Requirement("N", 0, "p", "convergeAt", {"at": 5, "value": 0}),
    ]
    return RunConfig(poset, stages, roster, [0, 1], name="fake-elder")


def antichain_minimal(stages: int = 120) -> RunConfig:
    poset = PosetSpec.build(["p", "q"], partition0=["p"], partition1=["q"])
    roster = [
        Requirement("S", 0, None, "copycat", {"delay": 1}),
        Requirement("T", 0, "p", "oracleCopycat", {"delay": 1}),
        Requirement("R", 0, "q", "mapCommit", {"at": 30}),
        Requirement("N", 0, "q", "convergeAt", {"at": 10, "value": 0}),
    ]
    return RunConfig(poset, stages, roster, [0, 1, 2, 3], name="antichain-minimal")


SCENARIOS = {
    "single-N": single_n,
    "single-R": single_r,
    "section25": section25,
    "fake-elder": fake_elder,
    "antichain-minimal": antichain_minimal,
}

DESCRIPTIONS = {
    "single-N": "one N(0,p) against convergeAt(5, value 0)",
    "single-R": "one R(0,q) against mapCommit(25); diagonalizes and homogenizes",
    "section25": "T(0,p) above R(0,q) with q<p; the relabelling adversary of the use-lifting example",
    "fake-elder": "T(0,p) first matches a fake copy whose edges an N below it later destroys",
    "antichain-minimal": "S, T, R and N on the two-element antichain",
}


def get_scenario(name: str, **kwargs) -> RunConfig:
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None
    return factory(**kwargs)


def _random_poset(rng: random.Random, size: int) -> PosetSpec:
    elements = [f"p{k}" for k in range(size)]
    order = [(elements[i], elements[j]) for i in range(size) for j in range(i + 1, size)
             if rng.random() < 0.4]
    cut = rng.randint(0, size)
    shuffled = elements[:]
    rng.shuffle(shuffled)
    return PosetSpec.build(elements, order, partition0=shuffled[:cut], partition1=shuffled[cut:])


def _random_requirement(rng: random.Random, poset: PosetSpec, e: int) -> Requirement:
    kinds = ["N", "S"]
    if poset.partition0:
        kinds.append("T")
    if poset.partition1:
        kinds.append("R")
    kind = rng.choice(kinds)
    if kind == "N":
        p = rng.choice(poset.elements)
        script = rng.choice([("convergeAt", {"at": rng.randint(0, 40), "value": rng.choice([0, 0, 1])}),
                             ("never", {})])
    elif kind == "S":
        p = None
        script = rng.choice([("copycat", {"delay": rng.randint(0, 3)}),
                             ("copycat", {"delay": 1, "omit": [rng.randint(1, 6)]}),
                             ("copycat", {"delay": 0, "squares": True}),
                             ("never", {})])
    elif kind == "T":
        p = rng.choice(sorted(poset.partition0))
        script = rng.choice([("oracleCopycat", {"delay": rng.randint(0, 3)}),
                             ("section25", {"delay": 1}),
                             ("fakeElder", {"pair": rng.randint(1, 3), "fake_at": 2, "true_at": rng.randint(3, 9),
                                            "fake_use": rng.choice([1, 50, 10 ** 6])}),
                             ("never", {})])
    else:
        p = rng.choice(sorted(poset.partition1))
        script = rng.choice([("mapCommit", {"at": rng.randint(0, 60)}), ("never", {})])
    return Requirement(kind, e, p, script[0], script[1])


def random_config(seed: int, max_stages: int = 300) -> RunConfig:
    """A small random configuration: at most 4 poset elements and 6 requirements.

    Most draws use an explicit assignment; round-robin draws get a short budget
    because they place a node at every level.
    """
    rng = random.Random(seed)
    poset = _random_poset(rng, rng.randint(1, 4))
    roster = [_random_requirement(rng, poset, e) for e in range(rng.randint(0, 6))]
    if roster and rng.random() < 0.85:
        assignment = [rng.randrange(len(roster)) for _ in range(rng.randint(1, 8))]
        stages = rng.randint(20, max_stages)
    else:
        assignment = None
        stages = rng.randint(0, min(40, max_stages))
    return RunConfig(poset, stages, roster, assignment, name=f"random-{seed}")
