"""Closure machinery behind a declared resource theory.

Discrete theories run on integer-encoded label words with precomputed
lookup tables per placed generator; numeric theories run on density
matrices with tolerance-based deduplication. Both expose the same three
primitives: orbit search from a state, operation closure between levels,
and witness replay.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import tolerances as tol
from .channels import DiscreteOperation
from .linalg import tensor_product, trace_norm


class ClosureCapError(RuntimeError):
    """Raised when an enumeration would exceed the configured closure cap."""


@dataclass(frozen=True)
class Step:
    """One placed generator inside a witness word."""

    gen: str
    at: tuple[int, ...]
    level_in: int

    def to_json(self) -> dict:
        return {"g": self.gen, "at": list(self.at), "level_in": self.level_in}

    @staticmethod
    def from_json(d: dict) -> "Step":
        return Step(d["g"], tuple(d["at"]), int(d["level_in"]))


def placements(arity_in: int, level: int, rule) -> list[tuple[int, ...]]:
    """Position tuples where a generator of the given input arity can act."""
    if rule != "all":
        return [tuple(p) for p in rule if _placement_fits(tuple(p), arity_in, level)]
    if arity_in == 0:
        return [(i,) for i in range(level + 1)]
    if arity_in > level:
        return []
    if arity_in == 1:
        return [(i,) for i in range(level)]
    out = []

    def rec(prefix):
        if len(prefix) == arity_in:
            out.append(tuple(prefix))
            return
        for i in range(level):
            if i not in prefix:
                rec(prefix + [i])

    rec([])
    return out


def _placement_fits(pos: tuple[int, ...], arity_in: int, level: int) -> bool:
    if arity_in == 0:
        return len(pos) == 1 and 0 <= pos[0] <= level
    return (
        len(pos) == arity_in
        and len(set(pos)) == arity_in
        and all(0 <= p < level for p in pos)
    )


def splice(word: tuple, pos: tuple[int, ...], arity_in: int, outputs: tuple) -> tuple:
    """Rewrite a word under one placed generator application.

    Arity-preserving generators write their outputs back onto the consumed
    slots; arity-changing ones remove the consumed slots and insert the
    outputs contiguously at the leftmost consumed position (or at the
    declared insertion index for slot-creating generators).
    """
    if arity_in == 0:
        i = pos[0]
        return word[:i] + outputs + word[i:]
    if len(outputs) == arity_in:
        out = list(word)
        for slot, letter in zip(pos, outputs):
            out[slot] = letter
        return tuple(out)
    keep = [letter for i, letter in enumerate(word) if i not in set(pos)]
    insert_at = sum(1 for i in range(min(pos)) if i not in set(pos))
    return tuple(keep[:insert_at]) + outputs + tuple(keep[insert_at:])


# ---------------------------------------------------------------------------
# discrete engine


@dataclass(frozen=True)
class PlacedTableOp:
    step: Step
    level_out: int
    table: np.ndarray  # word index at level_in -> word index at level_out


class DiscreteEngine:
    """Integer-encoded word dynamics for a discrete instance."""

    def __init__(self, alphabet, generators, max_level: int, cap: int):
        self.alphabet = tuple(alphabet)
        self.base = len(self.alphabet)
        self.sym_index = {s: i for i, s in enumerate(self.alphabet)}
        self.max_level = max_level
        self.cap = cap
        self.generators = {g.name: g for g in generators}
        self._rules = {g.name: getattr(g, "placement", "all") for g in generators}
        self.ops_by_level: list[list[PlacedTableOp]] = [[] for _ in range(max_level + 1)]
        self._op_index: dict[tuple[str, tuple[int, ...], int], PlacedTableOp] = {}
        for level in range(max_level + 1):
            for g in generators:
                for pos in placements(g.op.arity_in, level, self._rules[g.name]):
                    level_out = level - g.op.arity_in + g.op.arity_out
                    if not 0 <= level_out <= max_level:
                        continue
                    op = self._build_table_op(g.name, g.op, pos, level, level_out)
                    self.ops_by_level[level].append(op)
                    self._op_index[(g.name, pos, level)] = op
        self._orbits: dict[tuple[int, int], "Orbit"] = {}

    def _build_table_op(self, name, op: DiscreteOperation, pos, level, level_out):
        size = self.base**level
        table = np.empty(size, dtype=np.int64)
        for idx in range(size):
            word = self.decode(level, idx)
            consumed = tuple(word[p] for p in pos) if op.arity_in else ()
            table[idx] = self.encode(splice(word, pos, op.arity_in, op.action[consumed]))
        return PlacedTableOp(Step(name, pos, level), level_out, table)

    def encode(self, word: tuple[str, ...]) -> int:
        idx = 0
        for s in word:
            idx = idx * self.base + self.sym_index[s]
        return idx

    def decode(self, level: int, idx: int) -> tuple[str, ...]:
        out = []
        for _ in range(level):
            out.append(self.alphabet[idx % self.base])
            idx //= self.base
        return tuple(reversed(out))

    def label(self, level: int, idx: int) -> str:
        return "".join(self.decode(level, idx))

    def orbit(self, level: int, idx: int) -> "Orbit":
        key = (level, idx)
        if key not in self._orbits:
            self._orbits[key] = Orbit(self, level, idx)
        return self._orbits[key]

    def apply_step(self, level: int, idx: int, step: Step) -> tuple[int, int]:
        op = self._op_index.get((step.gen, step.at, step.level_in))
        if op is None or step.level_in != level:
            raise ValueError(f"step {step} is not applicable at level {level}")
        return op.level_out, int(op.table[idx])

    def replay(self, level: int, idx: int, steps: Iterable[Step]) -> tuple[int, int]:
        for step in steps:
            level, idx = self.apply_step(level, idx, step)
        return level, idx


class Orbit:
    """Everything reachable from one start word, with witness back-pointers."""

    def __init__(self, engine: DiscreteEngine, level: int, idx: int):
        self.engine = engine
        self.start = (level, idx)
        self.reached = [
            np.zeros(engine.base**l, dtype=bool) for l in range(engine.max_level + 1)
        ]
        self.parent: list[dict[int, tuple[int, int, Step]]] = [
            {} for _ in range(engine.max_level + 1)
        ]
        self.reached[level][idx] = True
        frontier = {level: [idx]}
        while frontier:
            nxt: dict[int, list[int]] = {}
            for lv in sorted(frontier):
                idxs = np.asarray(sorted(frontier[lv]), dtype=np.int64)
                for op in engine.ops_by_level[lv]:
                    outs = op.table[idxs]
                    hits = ~self.reached[op.level_out][outs]
                    if not hits.any():
                        continue
                    for src, out in zip(idxs[hits], outs[hits]):
                        if self.reached[op.level_out][out]:
                            continue
                        self.reached[op.level_out][out] = True
                        self.parent[op.level_out][int(out)] = (lv, int(src), op.step)
                        nxt.setdefault(op.level_out, []).append(int(out))
            frontier = nxt

    def contains(self, level: int, idx: int) -> bool:
        return bool(self.reached[level][idx])

    def witness(self, level: int, idx: int) -> Optional[list[Step]]:
        if not self.contains(level, idx):
            return None
        steps: list[Step] = []
        cur = (level, idx)
        while cur != self.start:
            lv, src, step = self.parent[cur[0]][cur[1]]
            steps.append(step)
            cur = (lv, src)
        return list(reversed(steps))

    def reached_levels(self, level: int) -> np.ndarray:
        return self.reached[level]


@dataclass(frozen=True)
class ClosureOp:
    """One operation in a generated operation set, with its generator word."""

    word: tuple[Step, ...]
    level_in: int
    level_out: int
    key: object  # action table (discrete) or roster signature index (numeric)


def discrete_closure(engine: DiscreteEngine, level_in: int, cap: int,
                     max_word_len: Optional[int] = None,
                     level_ceiling: Optional[int] = None) -> list[ClosureOp]:
    """Monoid closure of generator words out of one input level.

    Enumerates distinct action tables breadth-first; raises ClosureCapError
    instead of truncating silently.
    """
    ceiling = engine.max_level if level_ceiling is None else min(level_ceiling, engine.max_level)
    ident = np.arange(engine.base**level_in, dtype=np.int64)
    seen = {(level_in, ident.tobytes())}
    result = [ClosureOp((), level_in, level_in, tuple(ident))]
    frontier = [(level_in, ident, ())]
    depth = 0
    while frontier:
        depth += 1
        if max_word_len is not None and depth > max_word_len:
            break
        nxt = []
        for lv, table, word in frontier:
            for op in engine.ops_by_level[lv]:
                if op.level_out > ceiling or op.step.level_in > ceiling:
                    continue
                new_table = op.table[table]
                key = (op.level_out, new_table.tobytes())
                if key in seen:
                    continue
                seen.add(key)
                if len(seen) > cap:
                    raise ClosureCapError(
                        f"operation closure from level {level_in} exceeds cap {cap}"
                    )
                new_word = word + (op.step,)
                result.append(ClosureOp(new_word, level_in, op.level_out, tuple(new_table)))
                nxt.append((op.level_out, new_table, new_word))
        frontier = nxt
    return result


# ---------------------------------------------------------------------------
# numeric engine


@dataclass(frozen=True)
class PlacedChannelOp:
    step: Step
    level_out: int
    kraus: tuple[np.ndarray, ...]

    def apply(self, m: np.ndarray) -> np.ndarray:
        out = None
        for k in self.kraus:
            term = k @ m @ k.conj().T
            out = term if out is None else out + term
        return out


def wire_permutation(d: int, order: list[int]) -> np.ndarray:
    """Matrix reordering tensor factors so new factor i is old factor order[i]."""
    m = len(order)
    dim = d**m
    idx = np.arange(dim)
    digits = np.empty((m, dim), dtype=np.int64)
    rest = idx.copy()
    for i in range(m - 1, -1, -1):
        digits[i] = rest % d
        rest //= d
    new_idx = np.zeros(dim, dtype=np.int64)
    for i, src in enumerate(order):
        new_idx = new_idx * d + digits[src]
    perm = np.zeros((dim, dim), dtype=np.complex128)
    perm[new_idx, idx] = 1.0
    return perm


class NumericEngine:
    """Density-matrix dynamics for a numeric instance."""

    def __init__(self, base_dim, generators, max_level, closure_depth, cap):
        self.d = base_dim
        self.max_level = max_level
        self.depth = closure_depth
        self.cap = cap
        self.generators = {g.name: g for g in generators}
        self.ops_by_level: list[list[PlacedChannelOp]] = [[] for _ in range(max_level + 1)]
        self._op_index: dict[tuple[str, tuple[int, ...], int], PlacedChannelOp] = {}
        for level in range(max_level + 1):
            for g in generators:
                rule = getattr(g, "placement", "all")
                for pos in placements(g.channel_arity_in, level, rule):
                    level_out = level - g.channel_arity_in + g.channel_arity_out
                    if not 0 <= level_out <= max_level:
                        continue
                    op = self._place_channel(g, pos, level, level_out)
                    self.ops_by_level[level].append(op)
                    self._op_index[(g.name, pos, level)] = op
        self._orbits: dict[tuple[int, bytes], "NumericOrbit"] = {}

    def _place_channel(self, g, pos, level, level_out) -> PlacedChannelOp:
        k_in, k_out = g.channel_arity_in, g.channel_arity_out
        d = self.d
        if k_in == 0:
            others = list(range(level))
            order_in = others
        else:
            others = [i for i in range(level) if i not in pos]
            order_in = list(pos) + others
        p_in = wire_permutation(d, order_in) if level else np.eye(1, dtype=np.complex128)
        # current output order after K (x) I: fresh factors first, then untouched
        if k_in == 0:
            insert_at = pos[0]
        elif k_in == k_out:
            insert_at = None
        else:
            insert_at = sum(1 for i in range(min(pos)) if i not in set(pos))
        placed = []
        eye_rest = np.eye(d ** len(others), dtype=np.complex128)
        for k in g.channel.kraus:
            full = tensor_product(k, eye_rest)
            placed.append(full @ p_in)
        if k_in == k_out and k_in > 0:
            final_positions = {p: i for i, p in enumerate(pos)}
            target = []
            for slot in range(level):
                if slot in final_positions:
                    target.append(final_positions[slot])
                else:
                    target.append(k_out + others.index(slot))
        else:
            at = insert_at
            target = [k_out + i for i in range(at)]
            target += list(range(k_out))
            target += [k_out + i for i in range(at, len(others))]
        p_out = wire_permutation(d, target) if target else np.eye(1, dtype=np.complex128)
        placed = [p_out @ f for f in placed]
        return PlacedChannelOp(Step(g.name, pos, level), level_out, tuple(placed))

    def scalar(self) -> np.ndarray:
        return np.array([[1.0 + 0j]])

    def orbit(self, level: int, matrix: np.ndarray) -> "NumericOrbit":
        key = (level, np.round(matrix, 9).tobytes())
        if key not in self._orbits:
            self._orbits[key] = NumericOrbit(self, level, matrix)
        return self._orbits[key]

    def apply_step(self, level: int, m: np.ndarray, step: Step) -> tuple[int, np.ndarray]:
        op = self._op_index.get((step.gen, step.at, step.level_in))
        if op is None or step.level_in != level:
            raise ValueError(f"step {step} is not applicable at level {level}")
        return op.level_out, op.apply(m)

    def replay(self, level: int, m: np.ndarray, steps: Iterable[Step]) -> tuple[int, np.ndarray]:
        for step in steps:
            level, m = self.apply_step(level, m, step)
        return level, m


class _StatePool:
    """Per-level pool of matrices deduplicated within the conversion tolerance."""

    def __init__(self, max_level: int):
        self.states: list[list[np.ndarray]] = [[] for _ in range(max_level + 1)]
        self.exact: list[dict[bytes, int]] = [{} for _ in range(max_level + 1)]

    def find(self, level: int, m: np.ndarray) -> Optional[int]:
        key = np.round(m, 9).tobytes()
        hit = self.exact[level].get(key)
        if hit is not None:
            return hit
        for i, other in enumerate(self.states[level]):
            if np.abs(other - m).max() <= tol.CONVERSION and trace_norm(other - m) <= tol.CONVERSION:
                return i
        return None

    def add(self, level: int, m: np.ndarray) -> int:
        i = len(self.states[level])
        self.states[level].append(m)
        self.exact[level][np.round(m, 9).tobytes()] = i
        return i


class NumericOrbit:
    """Depth-bounded reachability from one numeric state."""

    def __init__(self, engine: NumericEngine, level: int, matrix: np.ndarray):
        self.engine = engine
        self.pool = _StatePool(engine.max_level)
        self.start = (level, self.pool.add(level, matrix))
        self.parent: list[dict[int, tuple[int, int, Step]]] = [
            {} for _ in range(engine.max_level + 1)
        ]
        total = 1
        frontier = [(level, self.start[1])]
        for _ in range(engine.depth):
            nxt = []
            for lv, i in frontier:
                m = self.pool.states[lv][i]
                for op in engine.ops_by_level[lv]:
                    out = op.apply(m)
                    if self.pool.find(op.level_out, out) is not None:
                        continue
                    j = self.pool.add(op.level_out, out)
                    self.parent[op.level_out][j] = (lv, i, op.step)
                    nxt.append((op.level_out, j))
                    total += 1
                    if total > engine.cap:
                        raise ClosureCapError(f"numeric orbit exceeds cap {engine.cap}")
            if not nxt:
                break
            frontier = nxt

    def find(self, level: int, m: np.ndarray) -> Optional[int]:
        return self.pool.find(level, m)

    def witness(self, level: int, m: np.ndarray) -> Optional[list[Step]]:
        j = self.find(level, m)
        if j is None:
            return None
        steps: list[Step] = []
        cur = (level, j)
        while cur != self.start:
            lv, src, step = self.parent[cur[0]][cur[1]]
            steps.append(step)
            cur = (lv, src)
        return list(reversed(steps))


def numeric_closure(engine: NumericEngine, level_in: int, roster: list[np.ndarray],
                    cap: int, max_word_len: Optional[int] = None) -> list[ClosureOp]:
    """Words up to the closure depth, deduplicated by action on the roster."""
    depth = engine.depth if max_word_len is None else max_word_len
    sigs: list[tuple[int, list[np.ndarray]]] = []

    def find_sig(level_out, outs):
        for i, (lo, prev) in enumerate(sigs):
            if lo != level_out:
                continue
            if all(trace_norm(a - b) <= tol.CONVERSION for a, b in zip(prev, outs)):
                return i
        return None

    ident = ClosureOp((), level_in, level_in, 0)
    sigs.append((level_in, [m.copy() for m in roster]))
    result = [ident]
    frontier = [(level_in, [m.copy() for m in roster], ())]
    for _ in range(depth):
        nxt = []
        for lv, outs, word in frontier:
            for op in engine.ops_by_level[lv]:
                new_outs = [op.apply(m) for m in outs]
                if find_sig(op.level_out, new_outs) is not None:
                    continue
                sigs.append((op.level_out, new_outs))
                if len(sigs) > cap:
                    raise ClosureCapError(f"operation closure from level {level_in} exceeds cap {cap}")
                new_word = word + (op.step,)
                result.append(ClosureOp(new_word, level_in, op.level_out, len(sigs) - 1))
                nxt.append((op.level_out, new_outs, new_word))
        frontier = nxt
        if not frontier:
            break
    return result
