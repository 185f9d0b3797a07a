"""Finite-stage simulator for a tree-of-strategies priority construction.

The construction builds a computable graph G, oracle copies B_q of it and a
c.e. family of sets A_p indexed by a finite poset, against scripted
adversaries.  Every run is recorded as a JSONL trace and audited afterwards.
"""

from .config import RunConfig, Requirement, load_config
from .engine import Construction, Outcome, TreeState, run
from .poset import PosetSpec

__all__ = ["Construction", "Outcome", "PosetSpec", "Requirement", "RunConfig", "TreeState",
           "load_config", "run"]
