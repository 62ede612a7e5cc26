"""The convertibility preorder on a finite state roster.

A state converts to another when some generated free operation maps it
there exactly (discrete) or within the conversion tolerance (numeric).
The search is exhaustive over the generated closure, so a negative answer
is a proof at the declared depth; on numeric instances it is reported as
"not convertible at depth d" rather than an unconditional negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .engine import Step
from .model import QrtInstance, free_states


@dataclass
class PreorderRelation:
    level: int
    roster: tuple[str, ...]
    reaches: np.ndarray  # bool, reaches[i, j] <=> roster[i] converts to roster[j]
    witnesses: dict[tuple[int, int], list[Step]]
    depth_note: str = ""

    def index(self, label: str) -> int:
        return self.roster.index(label)


def convertible(q: QrtInstance, phi: str, psi: str, level: int) -> tuple[bool, Optional[list[Step]]]:
    """Decide phi -> psi convertibility at one level, with a replayable witness."""
    roster = q.roster(level)
    if phi not in roster or psi not in roster:
        raise ValueError(f"states must belong to the level-{level} roster")
    word = q.reaches(phi, psi)
    return (word is not None), word


def preorder_matrix(q: QrtInstance, level: int) -> PreorderRelation:
    """Full relation with witnesses; reflexivity and transitivity are asserted."""
    roster = q.roster(level)
    n = len(roster)
    reaches = np.zeros((n, n), dtype=bool)
    witnesses: dict[tuple[int, int], list[Step]] = {}
    for i, phi in enumerate(roster):
        orbit = q.orbit_of(phi)
        for j, psi in enumerate(roster):
            lv, st = q.state_handle(psi)
            w = orbit.witness(lv, int(st)) if q.flavor == "discrete" else orbit.witness(lv, st)
            if w is not None:
                reaches[i, j] = True
                witnesses[(i, j)] = w
    # a depth-bounded numeric search can miss compositions; witness
    # concatenation repairs transitivity constructively
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in range(n):
                if not reaches[i, j]:
                    continue
                for k in range(n):
                    if reaches[j, k] and not reaches[i, k]:
                        reaches[i, k] = True
                        witnesses[(i, k)] = witnesses[(i, j)] + witnesses[(j, k)]
                        changed = True
    assert reaches.diagonal().all(), "preorder must be reflexive"
    closure = reaches | (reaches @ reaches)
    assert (closure == reaches).all(), "preorder must be transitive"
    note = "" if q.flavor == "discrete" else f"not-convertible verdicts hold at depth {q.closure_depth}"
    return PreorderRelation(level, roster, reaches, witnesses, note)


@dataclass
class QuotientOrder:
    classes: tuple[tuple[int, ...], ...]            # partition of roster indices
    class_order: tuple[tuple[int, int], ...]        # strict order: (above, below)
    maximal_classes: tuple[int, ...]
    minimal_classes: tuple[int, ...]


def equivalence_classes(rel: PreorderRelation) -> QuotientOrder:
    """Mutual-reachability classes and the induced strict partial order."""
    n = len(rel.roster)
    assigned = [-1] * n
    classes: list[tuple[int, ...]] = []
    for i in range(n):
        if assigned[i] >= 0:
            continue
        members = tuple(
            j for j in range(n) if rel.reaches[i, j] and rel.reaches[j, i]
        )
        for j in members:
            assigned[j] = len(classes)
        classes.append(members)
    order = []
    for a, ca in enumerate(classes):
        for b, cb in enumerate(classes):
            if a != b and rel.reaches[ca[0], cb[0]]:
                order.append((a, b))
    order_set = set(order)
    for a, b in order:
        assert (b, a) not in order_set, "class order must be antisymmetric"
        for b2, c in order:
            if b2 == b:
                assert (a, c) in order_set, "class order must be transitive"
    above = {b for _, b in order}
    below = {a for a, _ in order}
    maximal = tuple(i for i in range(len(classes)) if i not in above)
    minimal = tuple(i for i in range(len(classes)) if i not in below)
    return QuotientOrder(tuple(classes), tuple(sorted(order_set)), maximal, minimal)


@dataclass
class MaximalSet:
    states: tuple[str, ...]
    upper_bound: dict[str, str]  # roster state -> a maximal state above it


def maximal_set(rel: PreorderRelation) -> MaximalSet:
    """Maximal states, plus one maximal upper bound for every roster state.

    Non-empty on every finite non-empty roster; the upper bound is the
    first maximal state in roster order that reaches the given state.
    """
    n = len(rel.roster)
    members = [
        i for i in range(n)
        if all(rel.reaches[i, j] for j in range(n) if rel.reaches[j, i])
    ]
    assert members or n == 0, "a finite non-empty roster always has maximal states"
    upper: dict[str, str] = {}
    for j in range(n):
        for i in members:
            if rel.reaches[i, j]:
                upper[rel.roster[j]] = rel.roster[i]
                break
        assert rel.roster[j] in upper, "every state must have a maximal upper bound"
    return MaximalSet(tuple(rel.roster[i] for i in members), upper)


def minimal_set(rel: PreorderRelation) -> tuple[str, ...]:
    n = len(rel.roster)
    return tuple(
        rel.roster[i]
        for i in range(n)
        if all(rel.reaches[j, i] for j in range(n) if rel.reaches[i, j])
    )


def maximal_states(q: QrtInstance, level: int) -> MaximalSet:
    return maximal_set(preorder_matrix(q, level))


def minimal_equals_free(q: QrtInstance, level: int) -> tuple[bool, tuple, tuple]:
    """Whether the minimal elements coincide with the free states (when F is non-empty)."""
    rel = preorder_matrix(q, level)
    minimal = set(minimal_set(rel))
    free = set(free_states(q, level).states)
    if not free:
        return True, tuple(sorted(minimal)), ()
    return minimal == free, tuple(sorted(minimal)), tuple(sorted(free))
