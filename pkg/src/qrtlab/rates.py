"""Finite-horizon estimation of asymptotic conversion rates.

A witness is an exact (discrete) or epsilon-exact (numeric) word turning
n copies of the source into m copies of the target; it certifies the
asymptotic rate m/n because the word tensors with itself across blocks
of copies. Lower bounds are therefore genuine; upper bounds are
exhaustive only at the declared horizon, and verdicts say so. A strict
amplification witness (m > n between copies of the same state) escalates
the self-conversion rate to infinity, which is the replication dichotomy:
self-conversion is either exactly 1 or unbounded.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import tolerances as tol
from .engine import Step
from .linalg import trace_norm
from .model import QrtInstance, free_states

INF = float("inf")


@dataclass(frozen=True)
class RateWitness:
    n: int
    m: int
    word: tuple[Step, ...]

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.m, self.n)

    def to_json(self) -> dict:
        return {"n": self.n, "m": self.m, "word": [s.to_json() for s in self.word]}


@dataclass
class RateEstimate:
    source: str
    target: str
    lower: Fraction                 # best witnessed m/n; 0 without witnesses
    upper: Optional[Fraction]       # horizon-exhaustive bound; None = unknown
    unbounded: bool
    unbounded_reason: str
    witnesses: tuple[RateWitness, ...]
    n_max: int
    epsilon: float
    horizon_note: str

    @property
    def value(self):
        """Effective rate used downstream: inf when escalated to unbounded."""
        return INF if self.unbounded else self.lower

    @property
    def upper_desc(self) -> str:
        if self.unbounded:
            return "unbounded"
        if self.upper is None:
            return "unknown"
        return str(self.upper)


def _copy_caps(q: QrtInstance, level: int, n_max: int) -> int:
    return min(n_max, q.max_level // level) if level else 0


def _find_conversions(q: QrtInstance, phi: str, psi: str, n_max: int,
                      epsilon: float) -> list[RateWitness]:
    """All witnessed (n, m) conversions within the level budget."""
    level_s = q.state_level(phi)
    level_t = q.state_level(psi)
    if level_s == 0 or level_t == 0:
        raise ValueError("rate estimation needs states of level >= 1")
    out = []
    for n in range(1, _copy_caps(q, level_s, n_max) + 1):
        source = q.tensor_power_label(phi, n)
        orbit = q.orbit_of(source)
        for m in range(1, q.max_level // level_t + 1):
            target = q.tensor_power_label(psi, m)
            lv, st = q.state_handle(target)
            word = orbit.witness(lv, int(st)) if q.flavor == "discrete" else orbit.witness(lv, st)
            if word is None:
                continue
            if q.flavor == "numeric":
                _, got = q.replay(source, word)
                if trace_norm(got - q.state_matrix(target)) > epsilon:
                    continue
            out.append(RateWitness(n, m, tuple(word)))
    return out


def amplification_witness(q: QrtInstance, psi: str, n_max: int,
                          epsilon: float = tol.CONVERSION) -> Optional[RateWitness]:
    """A word mapping psi^n to psi^m with m > n, if one exists in the horizon."""
    witnesses = _find_conversions(q, psi, psi, n_max, epsilon)
    gains = [w for w in witnesses if w.m > w.n]
    if not gains:
        return None
    return max(gains, key=lambda w: (w.ratio, -w.n))


def estimate_rate(q: QrtInstance, phi: str, psi: str, n_max: int = 3,
                  epsilon: float = tol.CONVERSION) -> RateEstimate:
    """Bound the conversion rate from phi to psi at the given copy horizon."""
    witnesses = tuple(_find_conversions(q, phi, psi, n_max, epsilon))
    lower = max((w.ratio for w in witnesses), default=Fraction(0))
    unbounded = False
    reason = ""
    level_t = q.state_level(psi)
    if psi in free_states(q, level_t).states:
        unbounded, reason = True, "free target: any number of copies is producible"
    elif lower > 0:
        amp = amplification_witness(q, psi, n_max, epsilon)
        if amp is not None:
            unbounded = True
            reason = (
                f"target replicates: {amp.n} -> {amp.m} copies, so any witnessed "
                "conversion chains to an unbounded rate"
            )
    if q.flavor == "discrete":
        upper: Optional[Fraction] = lower
        note = f"exhaustive at n <= {n_max} within level budget {q.max_level}"
    else:
        upper = None
        note = f"search depth {q.closure_depth}; absence of witnesses is not a proof"
    return RateEstimate(phi, psi, lower, upper, unbounded, reason, witnesses,
                        n_max, epsilon, note)


@dataclass
class ReciprocityReport:
    ok: bool
    rate_lower: object          # Fraction or inf
    inverse_rate: object        # Fraction, 0, or inf (copies of source per target)
    details: list[str]


def reciprocal_consistency(q: QrtInstance, phi: str, psi: str, n_max: int = 3) -> ReciprocityReport:
    """Check that the copies-per-target rate is the reciprocal of the main rate.

    Every witness for one convention transposes into a witness for the
    other: producing m targets from n sources reads either as rate m/n or
    as n/m sources per target, and 1/0 is taken as infinity.
    """
    est = estimate_rate(q, phi, psi, n_max)
    details = []
    ok = True
    if est.unbounded:
        details.append("rate unbounded, inverse rate 0")
        if est.witnesses:
            best = max(est.witnesses, key=lambda w: w.ratio)
            details.append(f"finite fragment: witness {best.n}->{best.m}")
        return ReciprocityReport(True, INF, Fraction(0), details)
    if not est.witnesses:
        details.append("no conversion witnessed: rate 0, inverse rate infinity (1/0)")
        return ReciprocityReport(True, Fraction(0), INF, details)
    inverse = min(Fraction(w.n, w.m) for w in est.witnesses)
    if est.lower * inverse != 1:
        ok = False
        details.append(f"product of best witnessed rates is {est.lower * inverse}, not 1")
    for w in est.witnesses:
        if w.ratio == est.lower:
            # the transposed witness reuses the same word
            lv, out = q.replay(q.tensor_power_label(phi, w.n), list(w.word))
            target = q.tensor_power_label(psi, w.m)
            if q.flavor == "discrete":
                good = q.engine.label(lv, out) == target
            else:
                good = trace_norm(out - q.state_matrix(target)) <= tol.CONVERSION
            if not good:
                ok = False
                details.append(f"witness ({w.n},{w.m}) failed to replay")
    if ok:
        details.append(f"rate {est.lower} and inverse {inverse} realized by the same witnesses")
    return ReciprocityReport(ok, est.lower, inverse, details)


@dataclass
class ChainReport:
    status: str  # PASS | INCONCLUSIVE
    direct: object
    product: object
    composed: Optional[RateWitness]
    details: list[str]


def _product(a, b):
    if a == 0 or b == 0:
        return Fraction(0)
    if a == INF or b == INF:
        return INF
    return a * b


def rate_chain_check(q: QrtInstance, rho: str, sigma: str, omega: str,
                     n_max: int = 3) -> ChainReport:
    """Constructively verify rate(rho->omega) >= rate(rho->sigma) * rate(sigma->omega).

    Composable witness pairs are chained through a discard bridge and
    replayed; horizons too small to compose give INCONCLUSIVE, never FAIL.
    """
    est_ab = estimate_rate(q, rho, sigma, n_max)
    est_bc = estimate_rate(q, sigma, omega, n_max)
    est_ac = estimate_rate(q, rho, omega, n_max)
    details = []
    composed_best: Optional[RateWitness] = None
    for wa in est_ab.witnesses:
        for wb in est_bc.witnesses:
            if wa.m < wb.n:
                continue
            mid_full = q.tensor_power_label(sigma, wa.m)
            mid_need = q.tensor_power_label(sigma, wb.n)
            bridge = q.reaches(mid_full, mid_need)
            if bridge is None:
                continue
            word = tuple(wa.word) + tuple(bridge) + tuple(wb.word)
            lv, out = q.replay(q.tensor_power_label(rho, wa.n), list(word))
            target = q.tensor_power_label(omega, wb.m)
            if q.flavor == "discrete":
                good = q.engine.label(lv, out) == target
            else:
                good = trace_norm(out - q.state_matrix(target)) <= tol.CONVERSION
            if not good:
                continue
            cand = RateWitness(wa.n, wb.m, word)
            if composed_best is None or cand.ratio > composed_best.ratio:
                composed_best = cand
    product = _product(est_ab.value, est_bc.value)
    direct = est_ac.value
    if composed_best is not None:
        details.append(
            f"composed witness: {composed_best.n} copies -> {composed_best.m} copies, replayed"
        )
    if direct >= product:
        details.append(f"direct rate {direct} >= chained product {product}")
        return ChainReport("PASS", direct, product, composed_best, details)
    details.append(
        f"chained product {product} not witnessed directly at this horizon (direct {direct})"
    )
    return ChainReport("INCONCLUSIVE", direct, product, composed_best, details)


@dataclass
class ReplicationVerdict:
    state: str
    verdict: str  # UNIT | INFINITE | UNKNOWN
    is_free: bool
    witness: Optional[RateWitness]
    n_max: int

    @property
    def catalytically_replicable(self) -> bool:
        return self.verdict == "INFINITE" and not self.is_free


def replication_classify(q: QrtInstance, psi: str, n_max: int = 3,
                         epsilon: float = tol.CONVERSION) -> ReplicationVerdict:
    """Classify self-conversion: one strict amplification means rate infinity."""
    level = q.state_level(psi)
    is_free = psi in free_states(q, level).states
    amp = amplification_witness(q, psi, n_max, epsilon)
    if amp is not None:
        return ReplicationVerdict(psi, "INFINITE", is_free, amp, n_max)
    if q.flavor == "discrete":
        return ReplicationVerdict(psi, "UNIT", is_free, None, n_max)
    return ReplicationVerdict(psi, "UNKNOWN", is_free, None, n_max)


@dataclass(frozen=True)
class PooledWitness:
    source: str
    target: str
    n: int
    m: int
    word: tuple[Step, ...]

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.m, self.n)


def collect_rate_witnesses(q: QrtInstance, levels=(1,), n_max: int = 3) -> list[PooledWitness]:
    """Witnessed conversions between roster states, for consistency checks."""
    pool: list[PooledWitness] = []
    labels: list[str] = []
    for lv in levels:
        labels.extend(q.roster(lv))
    for phi in labels:
        for psi in labels:
            est = estimate_rate(q, phi, psi, n_max)
            best: dict[int, RateWitness] = {}
            for w in est.witnesses:
                if w.n not in best or w.m > best[w.n].m:
                    best[w.n] = w
            for w in best.values():
                pool.append(PooledWitness(phi, psi, w.n, w.m, w.word))
    return pool
