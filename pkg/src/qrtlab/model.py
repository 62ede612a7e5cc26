"""Declaring and validating a resource theory instance.

An instance fixes the state roster per level, the free-operation
generators with their lifting rule (every placement of a generator on a
larger system, identity elsewhere), and the closure policy. Discrete
instances enumerate the full generated monoid; numeric ones enumerate
words up to a declared depth.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Optional, Sequence

import numpy as np

from . import tolerances as tol
from .channels import DiscreteOperation, KrausChannel
from .engine import (
    ClosureOp,
    DiscreteEngine,
    NumericEngine,
    Step,
    discrete_closure,
    numeric_closure,
)
from .linalg import DensityMatrix, trace_norm

DEFAULT_CLOSURE_CAP = 10**6


class SpecError(ValueError):
    """Malformed or axiom-violating instance document."""


@dataclass(frozen=True)
class Generator:
    """A declared free-operation generator plus its placement rule."""

    name: str
    kind: str  # discrete | kraus | builtin:...
    op: Optional[DiscreteOperation] = None
    channel: Optional[KrausChannel] = None
    channel_arity_in: int = 0
    channel_arity_out: int = 0
    placement: object = "all"


@dataclass
class QrtInstance:
    flavor: str  # discrete | numeric
    alphabet: tuple[str, ...]
    base_dim: int
    roster1: tuple[str, ...]
    numeric_states: dict[str, np.ndarray]
    generators: tuple[Generator, ...]
    max_level: int
    closure_depth: int
    closure_cap: int
    closure_policy: str  # monoid | declared_only
    r_max_rule: object  # "log2_dim" or a float per copy
    measures: tuple[dict, ...]
    rer_free: Optional[dict]
    source: dict
    _engine: object = field(default=None, repr=False, compare=False)

    @property
    def engine(self):
        if self._engine is None:
            if self.flavor == "discrete":
                self._engine = DiscreteEngine(
                    self.alphabet, self.generators, self.max_level, self.closure_cap
                )
            else:
                self._engine = NumericEngine(
                    self.base_dim,
                    self.generators,
                    self.max_level,
                    self.closure_depth,
                    self.closure_cap,
                )
        return self._engine

    def r_max(self, level: int) -> float:
        if self.r_max_rule == "log2_dim":
            return float(level * np.log2(self.base_dim))
        return float(self.r_max_rule) * level

    def roster(self, level: int) -> tuple[str, ...]:
        """State labels at the given level (level 0 is the scalar system)."""
        if level == 0:
            return ("",) if self.flavor == "discrete" else ("1",)
        if self.flavor == "discrete":
            return tuple("".join(w) for w in iproduct(self.roster1, repeat=level))
        sep = "⊗"
        return tuple(sep.join(w) for w in iproduct(self.roster1, repeat=level))

    def state_level(self, label: str) -> int:
        if self.flavor == "discrete":
            return len(label)
        if label == "1":
            return 0
        return len(label.split("⊗"))

    def state_matrix(self, label: str) -> np.ndarray:
        """Density matrix for a roster label (numeric instances only)."""
        if self.flavor != "numeric":
            raise SpecError("state_matrix is only defined for numeric instances")
        if label == "1":
            return np.array([[1.0 + 0j]])
        parts = label.split("⊗")
        out = np.array([[1.0 + 0j]])
        for p in parts:
            if p not in self.numeric_states:
                raise SpecError(f"unknown state label '{p}'")
            out = np.kron(out, self.numeric_states[p])
        return out

    def tensor_power_label(self, label: str, n: int) -> str:
        if n == 0:
            return "" if self.flavor == "discrete" else "1"
        if self.flavor == "discrete":
            return label * n
        return "⊗".join([label] * n)

    # --- state handles used by the search modules -------------------------

    def state_handle(self, label: str):
        """(level, engine-internal state) pair for a roster label."""
        level = self.state_level(label)
        if self.flavor == "discrete":
            word = tuple(label)
            for s in word:
                if s not in self.alphabet:
                    raise SpecError(f"label '{label}' uses symbols outside the alphabet")
            return level, self.engine.encode(word)
        return level, self.state_matrix(label)

    def orbit_of(self, label: str):
        level, state = self.state_handle(label)
        return self.engine.orbit(level, state)

    def reaches(self, source: str, target: str) -> Optional[list[Step]]:
        """Witness word mapping source to target, or None if unreachable."""
        orbit = self.orbit_of(source)
        level, state = self.state_handle(target)
        if self.flavor == "discrete":
            return orbit.witness(level, int(state))
        return orbit.witness(level, state)

    def replay(self, source: str, steps: Sequence[Step]):
        level, state = self.state_handle(source)
        return self.engine.replay(level, state, steps)

    def digest(self) -> str:
        blob = json.dumps(self.source, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def serialize(self) -> dict:
        return copy.deepcopy(self.source)


# ---------------------------------------------------------------------------
# loading


_TOP_FIELDS = {
    "flavor", "alphabet", "base_dim", "states", "generators", "max_level",
    "closure_depth", "closure_cap", "closure_policy", "r_max", "measures",
    "rer_free",
}
_GEN_FIELDS = {"name", "kind", "arity_in", "arity_out", "action", "kraus",
               "symbol", "state", "placement"}


def _parse_matrix(entries, rows: int, cols: int, what: str) -> np.ndarray:
    try:
        flat = [complex(re, im) for re, im in entries]
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{what}: entries must be [re, im] pairs") from exc
    if len(flat) != rows * cols:
        raise SpecError(f"{what}: expected {rows * cols} entries, got {len(flat)}")
    return np.array(flat, dtype=np.complex128).reshape(rows, cols)


def _require(cond: bool, msg: str):
    if not cond:
        raise SpecError(msg)


def load_instance(spec, *, require_axiom_generators: bool = True,
                  closure_depth: Optional[int] = None) -> QrtInstance:
    """Build a validated instance from a dict, JSON text, or file path."""
    if isinstance(spec, (str, bytes)):
        text = spec
        if isinstance(spec, str) and not spec.lstrip().startswith("{"):
            with open(spec, "r", encoding="utf-8") as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from exc
    else:
        doc = copy.deepcopy(spec)
    _require(isinstance(doc, dict), "spec document must be a JSON object")
    unknown = set(doc) - _TOP_FIELDS
    _require(not unknown, f"unknown fields: {sorted(unknown)}")

    flavor = doc.get("flavor")
    _require(flavor in ("discrete", "numeric"), "flavor must be 'discrete' or 'numeric'")
    max_level = doc.get("max_level")
    _require(isinstance(max_level, int) and max_level >= 1, "max_level must be a positive integer")
    depth = closure_depth if closure_depth is not None else doc.get("closure_depth", 6)
    _require(isinstance(depth, int) and depth >= 1, "closure_depth must be a positive integer")
    cap = doc.get("closure_cap", DEFAULT_CLOSURE_CAP)
    _require(isinstance(cap, int) and cap >= 1, "closure_cap must be a positive integer")
    policy = doc.get("closure_policy", "monoid")
    _require(policy in ("monoid", "declared_only"), "closure_policy must be 'monoid' or 'declared_only'")
    r_max = doc.get("r_max", "log2_dim")
    if r_max != "log2_dim":
        _require(isinstance(r_max, (int, float)) and r_max >= 0, "r_max must be 'log2_dim' or a number >= 0")
        r_max = float(r_max)

    if flavor == "discrete":
        alphabet = doc.get("alphabet")
        _require(isinstance(alphabet, list) and alphabet, "discrete spec needs a non-empty alphabet")
        _require(all(isinstance(s, str) and len(s) == 1 for s in alphabet),
                 "alphabet symbols must be single characters")
        _require(len(set(alphabet)) == len(alphabet), "alphabet symbols must be distinct")
        alphabet = tuple(alphabet)
        base_dim = len(alphabet)
        roster1 = tuple(doc.get("states", list(alphabet)))
        _require(all(s in alphabet for s in roster1), "states must be alphabet symbols")
        _require(len(roster1) >= 1, "state roster must be non-empty at level 1")
        numeric_states: dict[str, np.ndarray] = {}
    else:
        base_dim = doc.get("base_dim")
        _require(isinstance(base_dim, int) and base_dim >= 2, "numeric spec needs base_dim >= 2")
        raw_states = doc.get("states")
        _require(isinstance(raw_states, dict) and raw_states, "numeric spec needs a states mapping")
        alphabet = ()
        numeric_states = {}
        for label, entries in raw_states.items():
            _require("⊗" not in label and label != "1", f"reserved state label '{label}'")
            m = _parse_matrix(entries, base_dim, base_dim, f"state '{label}'")
            try:
                DensityMatrix(m, (base_dim,))
            except ValueError as exc:
                raise SpecError(f"state '{label}' is not a density matrix: {exc}") from exc
            numeric_states[label] = m
        roster1 = tuple(numeric_states)

    gens = _parse_generators(doc.get("generators"), flavor, alphabet, base_dim, numeric_states)
    if require_axiom_generators:
        kinds = {g.kind for g in gens}
        _require("builtin:identity" in kinds,
                 "axiom violation: no identity generator declared (doing nothing must be free)")
        _require(kinds & {"builtin:trace", "builtin:partial_trace"},
                 "axiom violation: no trace generator declared (discarding must be free)")

    measures = tuple(doc.get("measures", []))
    for m in measures:
        _require(isinstance(m, dict) and "name" in m and "kind" in m,
                 "each measure needs 'name' and 'kind'")
    rer_free = doc.get("rer_free")
    if rer_free is not None:
        _require(isinstance(rer_free, dict) and rer_free.get("kind") in ("finite", "hull"),
                 "rer_free.kind must be 'finite' or 'hull'")
        _require(flavor == "numeric", "rer_free requires a numeric instance")
        for label in rer_free.get("states", []):
            _require(label in numeric_states, f"rer_free references unknown state '{label}'")

    canonical = copy.deepcopy(doc)
    canonical.setdefault("closure_depth", depth)
    canonical.setdefault("closure_cap", cap)
    canonical.setdefault("closure_policy", policy)
    canonical.setdefault("r_max", "log2_dim" if r_max == "log2_dim" else r_max)
    if flavor == "discrete":
        canonical.setdefault("states", list(roster1))

    return QrtInstance(
        flavor=flavor,
        alphabet=alphabet,
        base_dim=base_dim,
        roster1=roster1,
        numeric_states=numeric_states,
        generators=gens,
        max_level=max_level,
        closure_depth=depth,
        closure_cap=cap,
        closure_policy=policy,
        r_max_rule=r_max,
        measures=measures,
        rer_free=rer_free,
        source=canonical,
    )


def _parse_generators(raw, flavor, alphabet, base_dim, numeric_states) -> tuple[Generator, ...]:
    _require(isinstance(raw, list) and raw, "spec needs a non-empty generators list")
    gens: list[Generator] = []
    seen = set()
    for item in raw:
        _require(isinstance(item, dict), "each generator must be an object")
        unknown = set(item) - _GEN_FIELDS
        _require(not unknown, f"generator has unknown fields: {sorted(unknown)}")
        name, kind = item.get("name"), item.get("kind")
        _require(isinstance(name, str) and name, "generator needs a name")
        _require(name not in seen, f"duplicate generator name '{name}'")
        seen.add(name)
        placement = item.get("placement", "all")
        if placement != "all":
            _require(isinstance(placement, list), "placement must be 'all' or a list of position tuples")
        gens.append(_build_generator(name, kind, item, flavor, alphabet, base_dim,
                                     numeric_states, placement))
    return tuple(gens)


def _build_generator(name, kind, item, flavor, alphabet, base_dim, numeric_states,
                     placement) -> Generator:
    if kind == "builtin:identity":
        if flavor == "discrete":
            op = DiscreteOperation(name, 1, 1, {(s,): (s,) for s in alphabet})
            return Generator(name, kind, op=op, placement=placement)
        return Generator(name, kind, channel=KrausChannel.identity(base_dim, name),
                         channel_arity_in=1, channel_arity_out=1, placement=placement)
    if kind in ("builtin:trace", "builtin:partial_trace"):
        if flavor == "discrete":
            op = DiscreteOperation(name, 1, 0, {(s,): () for s in alphabet})
            return Generator(name, kind, op=op, placement=placement)
        return Generator(name, kind, channel=KrausChannel.trace(base_dim, name),
                         channel_arity_in=1, channel_arity_out=0, placement=placement)
    if kind == "builtin:append":
        if flavor == "discrete":
            sym = item.get("symbol")
            _require(sym in alphabet, f"append generator '{name}' needs a valid 'symbol'")
            op = DiscreteOperation(name, 0, 1, {(): (sym,)})
            return Generator(name, kind, op=op, placement=placement)
        label = item.get("state")
        _require(label in numeric_states, f"append generator '{name}' needs a valid 'state'")
        ch = KrausChannel.prepare(numeric_states[label], name)
        return Generator(name, kind, channel=ch, channel_arity_in=0, channel_arity_out=1,
                         placement=placement)
    if kind == "discrete":
        _require(flavor == "discrete", f"generator '{name}': discrete kind in a numeric spec")
        arity_in, arity_out = item.get("arity_in"), item.get("arity_out")
        _require(isinstance(arity_in, int) and arity_in >= 0, f"generator '{name}': bad arity_in")
        _require(isinstance(arity_out, int) and arity_out >= 0, f"generator '{name}': bad arity_out")
        action = item.get("action")
        _require(isinstance(action, dict), f"generator '{name}' needs an action table")
        table = {tuple(k): tuple(v) for k, v in action.items()}
        try:
            op = DiscreteOperation(name, arity_in, arity_out, table)
            op.check_total(alphabet)
        except ValueError as exc:
            raise SpecError(f"generator '{name}': {exc}") from exc
        for v in table.values():
            _require(all(s in alphabet for s in v),
                     f"generator '{name}' emits symbols outside the alphabet")
        return Generator(name, kind, op=op, placement=placement)
    if kind == "kraus":
        _require(flavor == "numeric", f"generator '{name}': kraus kind in a discrete spec")
        arity_in = item.get("arity_in", 1)
        arity_out = item.get("arity_out", 1)
        _require(isinstance(arity_in, int) and arity_in >= 0, f"generator '{name}': bad arity_in")
        _require(isinstance(arity_out, int) and arity_out >= 0, f"generator '{name}': bad arity_out")
        raw = item.get("kraus")
        _require(isinstance(raw, list) and raw, f"generator '{name}' needs kraus matrices")
        dim_in, dim_out = base_dim**arity_in, base_dim**arity_out
        mats = [_parse_matrix(k, dim_out, dim_in, f"generator '{name}' kraus") for k in raw]
        try:
            ch = KrausChannel(dim_in, dim_out, tuple(mats), name)
        except ValueError as exc:
            raise SpecError(str(exc)) from exc
        return Generator(name, kind, channel=ch, channel_arity_in=arity_in,
                         channel_arity_out=arity_out, placement=placement)
    raise SpecError(f"generator '{name}' has unknown kind '{kind}'")


# ---------------------------------------------------------------------------
# operation closure and free states


@dataclass(frozen=True)
class OperationSet:
    level_in: int
    level_out: int
    ops: tuple[ClosureOp, ...]

    def __len__(self) -> int:
        return len(self.ops)

    @property
    def contains_identity(self) -> bool:
        return any(op.word == () for op in self.ops)


def closure_of_generators(q: QrtInstance, level_in: int, level_out: int) -> OperationSet:
    """All generated operations between the two levels, with provenance words."""
    _require(0 <= level_in <= q.max_level and 0 <= level_out <= q.max_level,
             "levels must lie within max_level")
    all_ops = _closure_from(q, level_in)
    picked = tuple(op for op in all_ops if op.level_out == level_out)
    return OperationSet(level_in, level_out, picked)


def _closure_from(q: QrtInstance, level_in: int, max_word_len=None, level_ceiling=None):
    if q.flavor == "discrete":
        limit = 1 if q.closure_policy == "declared_only" else max_word_len
        return discrete_closure(q.engine, level_in, q.closure_cap, limit, level_ceiling)
    limit = 1 if q.closure_policy == "declared_only" else max_word_len
    roster = [q.state_matrix(s) for s in q.roster(level_in)]
    return numeric_closure(q.engine, level_in, roster, q.closure_cap, limit)


@dataclass(frozen=True)
class FreeStateSet:
    level: int
    states: tuple[str, ...]
    witnesses: dict[str, list[Step]]


def free_states(q: QrtInstance, level: int) -> FreeStateSet:
    """Roster states reachable from the scalar system; may be empty."""
    _require(0 <= level <= q.max_level, "level must lie within max_level")
    scalar = "" if q.flavor == "discrete" else "1"
    orbit = q.orbit_of(scalar)
    states, witnesses = [], {}
    for label in q.roster(level):
        lv, st = q.state_handle(label)
        w = orbit.witness(lv, int(st)) if q.flavor == "discrete" else orbit.witness(lv, st)
        if w is not None:
            states.append(label)
            witnesses[label] = w
    return FreeStateSet(level, tuple(states), witnesses)


# ---------------------------------------------------------------------------
# axiom validation


@dataclass(frozen=True)
class AxiomCheck:
    axiom: int
    ok: bool
    detail: str
    counterexamples: tuple = ()


@dataclass(frozen=True)
class AxiomReport:
    checks: tuple[AxiomCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)


def validate_axioms(q: QrtInstance, level_bound: int, depth_bound: int) -> AxiomReport:
    """Check the four free-operation axioms on the instantiated finite sets.

    Composition and tensor closure are verified semantically on the
    enumerated fragment; failures carry the offending generator words.
    """
    level_bound = min(level_bound, q.max_level)
    ceiling = min(q.max_level, 2 * level_bound)
    frag: dict[int, list[ClosureOp]] = {}
    for lv in range(level_bound + 1):
        frag[lv] = _closure_from(q, lv, max_word_len=depth_bound, level_ceiling=ceiling)

    checks = [
        _check_composition(q, frag, level_bound, depth_bound),
        _check_tensor(q, frag, level_bound),
        _check_identity(q, frag, level_bound),
        _check_trace(q, frag, level_bound),
    ]
    return AxiomReport(tuple(checks))


def _word_json(word) -> list:
    return [s.to_json() for s in word]


def _discrete_table_in(q, frag, level_in, level_out, table) -> bool:
    for op in frag.get(level_in, []):
        if op.level_out == level_out and op.key == table:
            return True
    return False


def _numeric_action_in(q, frag, level_in, level_out, word) -> bool:
    roster = [q.state_matrix(s) for s in q.roster(level_in)]
    eng = q.engine
    targets = []
    for m in roster:
        lv, out = eng.replay(level_in, m, word)
        targets.append(out)
    for op in frag.get(level_in, []):
        if op.level_out != level_out:
            continue
        ok = True
        for m, want in zip(roster, targets):
            lv, got = eng.replay(level_in, m, op.word)
            if trace_norm(got - want) > tol.CONVERSION:
                ok = False
                break
        if ok:
            return True
    return False


def _compose_in_fragment(q, frag, first: ClosureOp, second: ClosureOp) -> bool:
    word = first.word + second.word
    if q.flavor == "discrete":
        table = tuple(np.asarray(second.key)[np.asarray(first.key)])
        return _discrete_table_in(q, frag, first.level_in, second.level_out, table)
    return _numeric_action_in(q, frag, first.level_in, second.level_out, word)


def _check_composition(q, frag, level_bound, depth_bound) -> AxiomCheck:
    half = max(1, depth_bound // 2)
    bad = []
    for lv_in in range(level_bound + 1):
        firsts = [op for op in frag[lv_in] if len(op.word) <= half and op.level_out <= level_bound]
        for first in firsts:
            seconds = [op for op in frag.get(first.level_out, [])
                       if len(op.word) <= half and op.level_out <= level_bound]
            for second in seconds:
                if not first.word and not second.word:
                    continue
                if not _compose_in_fragment(q, frag, first, second):
                    bad.append({"first": _word_json(first.word), "second": _word_json(second.word)})
                    if len(bad) >= 3:
                        return AxiomCheck(1, False, "composition leaves the operation set", tuple(bad))
    if bad:
        return AxiomCheck(1, False, "composition leaves the operation set", tuple(bad))
    return AxiomCheck(1, True, "operation set closed under composition at the checked bounds")


def _tensor_word(left: ClosureOp, right: ClosureOp, lb: int) -> tuple[Step, ...]:
    """Generator word acting as left (x) right on a joint system, left block first."""
    first = tuple(Step(s.gen, s.at, s.level_in + lb) for s in left.word)
    shift = left.level_out
    second = tuple(
        Step(s.gen, tuple(p + shift for p in s.at), s.level_in + shift) for s in right.word
    )
    return first + second


def _check_tensor(q, frag, level_bound) -> AxiomCheck:
    bad = []
    for la in range(level_bound + 1):
        for lb in range(level_bound + 1 - la):
            if la + lb > q.max_level or la + lb == 0:
                continue
            lefts = [op for op in frag[la] if len(op.word) <= 1 and op.level_out + lb <= q.max_level]
            rights = [op for op in frag[lb] if len(op.word) <= 1]
            for left in lefts:
                for right in rights:
                    if not left.word and not right.word:
                        continue
                    if left.level_out + right.level_out > q.max_level:
                        continue
                    joint_in = la + lb
                    joint_out = left.level_out + right.level_out
                    if q.flavor == "discrete":
                        table = _tensor_table_discrete(q, left, right, la, lb)
                        member = _discrete_table_in(q, frag, joint_in, joint_out, table)
                    else:
                        word = _tensor_word(left, right, lb)
                        member = _numeric_action_in(q, frag, joint_in, joint_out, word)
                    if not member:
                        bad.append({"left": _word_json(left.word), "right": _word_json(right.word)})
                    if len(bad) >= 3:
                        return AxiomCheck(2, False, "tensor products leave the operation set", tuple(bad))
    if bad:
        return AxiomCheck(2, False, "tensor products leave the operation set", tuple(bad))
    return AxiomCheck(2, True, "operation set closed under tensor products at the checked bounds")


def _tensor_table_discrete(q, left: ClosureOp, right: ClosureOp, la, lb):
    eng = q.engine
    base = eng.base
    out = []
    right_size = base**lb
    left_tab, right_tab = np.asarray(left.key), np.asarray(right.key)
    out_shift = base**right.level_out
    for i in range(base**la):
        for j in range(right_size):
            out.append(int(left_tab[i]) * out_shift + int(right_tab[j]))
    return tuple(out)


def _check_identity(q, frag, level_bound) -> AxiomCheck:
    allow_empty_word = q.closure_policy == "monoid"
    for lv in range(1, level_bound + 1):
        found = False
        for op in frag[lv]:
            if op.level_out != lv:
                continue
            if not op.word and not allow_empty_word:
                continue
            if _is_identity(q, op, lv):
                found = True
                break
        if not found:
            return AxiomCheck(3, False, f"no identity operation at level {lv}")
    return AxiomCheck(3, True, "identity present at every checked level")


def _is_identity(q, op: ClosureOp, lv: int) -> bool:
    if q.flavor == "discrete":
        return list(op.key) == list(range(q.engine.base**lv))
    eng = q.engine
    for label in q.roster(lv):
        m = q.state_matrix(label)
        _, out = eng.replay(lv, m, op.word)
        if trace_norm(out - m) > tol.CONVERSION:
            return False
    return True


def _check_trace(q, frag, level_bound) -> AxiomCheck:
    eng = q.engine
    missing = []
    if not any(op.level_out == 0 and op.word for op in frag.get(1, [])):
        missing.append("full trace from level 1")
    for lv in range(2, level_bound + 1):
        want = {op.level_out for op in frag.get(lv, [])}
        if lv - 1 not in want:
            missing.append(f"partial trace from level {lv}")
    if missing:
        return AxiomCheck(4, False, "discarding subsystems is not available: " + "; ".join(missing))
    return AxiomCheck(4, True, "trace and partial traces present at the checked levels")
