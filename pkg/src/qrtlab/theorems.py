"""Machine-checked verdicts for the structural claims of the framework.

Every verdict states its claim in plain language, carries PASS / FAIL /
INCONCLUSIVE / SKIPPED, and attaches replayable witnesses or
counterexamples. Hypothesis-guarded claims are SKIPPED (with the failed
hypothesis named) rather than stretched past their assumptions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .measures import (
    build_measure,
    check_additivity_family,
    check_consistency,
    check_monotonicity,
    distillable_resource,
    normalization_conflict_detector,
    resource_cost,
    uniqueness_report,
)
from .model import QrtInstance, free_states
from .preorder import (
    maximal_set,
    minimal_set,
    preorder_matrix,
)
from .rates import (
    INF,
    collect_rate_witnesses,
    estimate_rate,
    rate_chain_check,
    reciprocal_consistency,
    replication_classify,
)


@dataclass
class Verdict:
    name: str
    claim: str
    status: str  # PASS | FAIL | INCONCLUSIVE | SKIPPED
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "claim": self.claim, "status": self.status,
                "detail": self.detail}


def _fmt(rate) -> object:
    return "inf" if rate == INF else str(rate)


def theorem_suite(q: QrtInstance, n_max: int = 3, seed: int = 42,
                  levels: Optional[tuple[int, ...]] = None) -> list[Verdict]:
    """Run the full battery of structural checks on one instance."""
    if levels is None:
        levels = tuple(range(1, min(2, q.max_level) + 1))
    out: list[Verdict] = []
    rels = {lv: preorder_matrix(q, lv) for lv in levels}
    maxes = {lv: maximal_set(rels[lv]) for lv in levels}
    frees = {lv: free_states(q, lv) for lv in levels}
    roster1 = q.roster(1)
    reps = {s: replication_classify(q, s, n_max) for s in roster1}
    has_resource = any(s not in frees[1].states for s in roster1)
    has_catalytic = any(v.catalytically_replicable for v in reps.values())

    out.append(_maximal_exists(q, rels, maxes))
    out.append(_maximal_free_disjoint(q, maxes, frees, has_resource))
    out.append(_minimal_equals_free(q, rels, frees))
    out.append(_reciprocity(q, roster1, n_max))
    out.append(_rate_chain(q, roster1, n_max, seed))
    out.append(_dichotomy(q, reps))
    out.append(_copies_invariance(q, roster1, n_max))
    out.append(_equivalent_state_rates(q, rels[1], reps, n_max))
    out.append(_value_bounds(q, roster1, reps, has_resource, has_catalytic, n_max))
    out.append(_maximal_sufficiency(q, rels, maxes, n_max))
    out.append(_order_monotonicity(q, rels[1], n_max))
    out.append(_weak_subadditivity(q, roster1, n_max))
    out.append(_cost_maximizer(q, maxes[1], has_resource, has_catalytic, n_max))
    out.append(_distillable_below_cost(q, roster1, has_resource, has_catalytic, n_max))
    out.extend(_measure_verdicts(q, n_max, seed))
    out.append(_conflict_detector(q, n_max))
    return out


def _maximal_exists(q, rels, maxes) -> Verdict:
    detail = {}
    for lv, ms in maxes.items():
        detail[f"level_{lv}"] = {"maximal": list(ms.states), "upper_bounds": dict(ms.upper_bound)}
        if not ms.states or set(ms.upper_bound) != set(rels[lv].roster):
            return Verdict("maximal-states-exist",
                           "every finite roster has maximal states and each state has a maximal upper bound",
                           "FAIL", detail)
    return Verdict("maximal-states-exist",
                   "every finite roster has maximal states and each state has a maximal upper bound",
                   "PASS", detail)


def _maximal_free_disjoint(q, maxes, frees, has_resource) -> Verdict:
    claim = "when a resource state exists, no maximal state is free"
    if not has_resource:
        return Verdict("maximal-free-disjoint", claim, "SKIPPED",
                       {"reason": "every roster state is free"})
    detail = {}
    for lv, ms in maxes.items():
        overlap = sorted(set(ms.states) & set(frees[lv].states))
        detail[f"level_{lv}"] = {"overlap": overlap}
        if overlap:
            return Verdict("maximal-free-disjoint", claim, "FAIL", detail)
    return Verdict("maximal-free-disjoint", claim, "PASS", detail)


def _minimal_equals_free(q, rels, frees) -> Verdict:
    claim = "when free states exist, they are exactly the minimal states"
    detail = {}
    applicable = False
    for lv, rel in rels.items():
        fs = set(frees[lv].states)
        if not fs:
            continue
        applicable = True
        mins = set(minimal_set(rel))
        detail[f"level_{lv}"] = {"minimal": sorted(mins), "free": sorted(fs)}
        if mins != fs:
            return Verdict("minimal-equals-free", claim, "FAIL", detail)
    if not applicable:
        return Verdict("minimal-equals-free", claim, "SKIPPED",
                       {"reason": "no free states at the checked levels"})
    return Verdict("minimal-equals-free", claim, "PASS", detail)


def _reciprocity(q, roster1, n_max) -> Verdict:
    claim = "copies-per-target rate is the reciprocal of the targets-per-copy rate (1/0 = inf)"
    checked = 0
    for phi in roster1:
        for psi in roster1:
            rep = reciprocal_consistency(q, phi, psi, n_max)
            checked += 1
            if not rep.ok:
                return Verdict("rate-reciprocity", claim, "FAIL",
                               {"pair": [phi, psi], "details": rep.details})
    return Verdict("rate-reciprocity", claim, "PASS", {"pairs_checked": checked})


def _rate_chain(q, roster1, n_max, seed) -> Verdict:
    claim = "converting via an intermediate state never beats the direct rate product"
    triples = [(a, b, c) for a in roster1 for b in roster1 for c in roster1]
    if len(triples) > 27:
        rng = random.Random(seed)
        triples = rng.sample(triples, 27)
    inconclusive = []
    for a, b, c in triples:
        rep = rate_chain_check(q, a, b, c, n_max)
        if rep.status == "INCONCLUSIVE":
            inconclusive.append({"triple": [a, b, c], "details": rep.details})
    detail = {"triples_checked": len(triples), "inconclusive": inconclusive}
    status = "PASS" if not inconclusive else "INCONCLUSIVE"
    return Verdict("rate-chain", claim, status, detail)


def _dichotomy(q, reps) -> Verdict:
    claim = "self-conversion is either exactly 1 or unbounded; any amplification escalates"
    detail = {}
    unknown = False
    for s, v in reps.items():
        entry = {"verdict": v.verdict, "is_free": v.is_free,
                 "catalytically_replicable": v.catalytically_replicable}
        if v.witness is not None:
            entry["witness"] = v.witness.to_json()
        detail[s or "(scalar)"] = entry
        if v.verdict == "UNKNOWN":
            unknown = True
        if v.witness is not None and v.witness.m <= v.witness.n:
            return Verdict("replication-dichotomy", claim, "FAIL", detail)
    status = "INCONCLUSIVE" if unknown else "PASS"
    return Verdict("replication-dichotomy", claim, status, detail)


def _copies_invariance(q, roster1, n_max) -> Verdict:
    claim = "the conversion rate is unchanged when source and target are taken in pairs"
    if 2 > q.max_level:
        return Verdict("copies-invariance", claim, "SKIPPED",
                       {"reason": "max_level too small for doubled states"})
    horizon_gaps = []
    for phi in roster1:
        for psi in roster1:
            e1 = estimate_rate(q, phi, psi, n_max)
            e2 = estimate_rate(q, q.tensor_power_label(phi, 2),
                               q.tensor_power_label(psi, 2), n_max)
            if e1.value == e2.value:
                continue
            horizon_gaps.append({
                "pair": [phi, psi],
                "single": _fmt(e1.value),
                "doubled": _fmt(e2.value),
            })
    if horizon_gaps:
        return Verdict("copies-invariance", claim, "INCONCLUSIVE",
                       {"horizon_gaps": horizon_gaps,
                        "note": "doubled-copy searches see a smaller copy budget"})
    return Verdict("copies-invariance", claim, "PASS",
                   {"pairs_checked": len(roster1) ** 2})


def _equivalent_state_rates(q, rel, reps, n_max) -> Verdict:
    claim = "between equivalent states without replication, conversion rates are exactly 1"
    pairs_checked = 0
    for i, phi in enumerate(rel.roster):
        for j, psi in enumerate(rel.roster):
            if i == j or not (rel.reaches[i, j] and rel.reaches[j, i]):
                continue
            if reps[psi].verdict != "UNIT":
                continue
            pairs_checked += 1
            fwd = estimate_rate(q, psi, phi, n_max).value
            back = estimate_rate(q, phi, psi, n_max).value
            if fwd == back == 1:
                continue
            if fwd > 1 or back > 1:
                return Verdict("equivalent-state-rates", claim, "INCONCLUSIVE",
                               {"pair": [psi, phi],
                                "note": "horizon shows amplification despite a UNIT verdict"})
            return Verdict("equivalent-state-rates", claim, "FAIL",
                           {"pair": [psi, phi], "forward": _fmt(fwd), "backward": _fmt(back)})
    return Verdict("equivalent-state-rates", claim, "PASS", {"pairs_checked": pairs_checked})


def _value_bounds(q, roster1, reps, has_resource, has_catalytic, n_max) -> Verdict:
    claim = "distillable resource and cost lie in [0, R_max] for non-replicating states"
    if not has_resource:
        return Verdict("value-bounds", claim, "SKIPPED",
                       {"reason": "every roster state is free"})
    detail = {}
    for s in roster1:
        if reps[s].catalytically_replicable:
            detail[s] = {"note": "catalytic state exempt from the bounds"}
            continue
        rd = distillable_resource(q, s, 1, n_max)
        rc = resource_cost(q, s, 1, n_max)
        if rd.value == INF and has_catalytic:
            detail[s] = {"note": "distillation target replicates; exempt with the catalytic branch"}
            continue
        detail[s] = {"distillable": _num(rd.value), "cost": _num(rc.value)}
        rmax = q.r_max(1)
        if not (-1e-12 <= rd.value <= rmax + 1e-12 and -1e-12 <= rc.value <= rmax + 1e-12):
            return Verdict("value-bounds", claim, "FAIL", detail)
    return Verdict("value-bounds", claim, "PASS", detail)


def _maximal_sufficiency(q, rels, maxes, n_max) -> Verdict:
    claim = "restricting the infima to maximal states changes neither distillable resource nor cost"
    if q.flavor != "discrete":
        return Verdict("maximal-set-sufficiency", claim, "INCONCLUSIVE",
                       {"reason": "numeric rates are lower bounds only"})
    for lv, rel in rels.items():
        maximal = set(maxes[lv].states)
        for psi in rel.roster:
            rates_to = {phi: estimate_rate(q, psi, phi, n_max).value for phi in rel.roster}
            rates_from = {phi: estimate_rate(q, phi, psi, n_max).value for phi in rel.roster}
            full_d = min(rates_to.values())
            g_d = min(v for s, v in rates_to.items() if s in maximal)
            full_c = max(rates_from.values())
            g_c = max(v for s, v in rates_from.items() if s in maximal)
            if full_d != g_d or full_c != g_c:
                return Verdict("maximal-set-sufficiency", claim, "FAIL",
                               {"level": lv, "state": psi,
                                "full_roster": [_fmt(full_d), _fmt(full_c)],
                                "maximal_only": [_fmt(g_d), _fmt(g_c)]})
    return Verdict("maximal-set-sufficiency", claim, "PASS",
                   {"levels": sorted(rels)})


def _order_monotonicity(q, rel, n_max) -> Verdict:
    claim = "more resourceful states have larger distillable resource and larger cost"
    values = {}
    for s in rel.roster:
        rd = distillable_resource(q, s, 1, n_max)
        rc = resource_cost(q, s, 1, n_max)
        values[s] = (rd.value, rc.value)
    for i, phi in enumerate(rel.roster):
        for j, psi in enumerate(rel.roster):
            if i == j or not rel.reaches[i, j]:
                continue
            if values[psi][0] > values[phi][0] + 1e-12 or values[psi][1] > values[phi][1] + 1e-12:
                return Verdict("order-monotonicity", claim, "FAIL",
                               {"above": phi, "below": psi,
                                "above_values": [_num(v) for v in values[phi]],
                                "below_values": [_num(v) for v in values[psi]]})
    return Verdict("order-monotonicity", claim, "PASS",
                   {"values": {s: [_num(a), _num(b)] for s, (a, b) in values.items()}})


def _rate_min_to_maximal(q, psi, level, n_max):
    ms = maximal_set(preorder_matrix(q, level))
    return min(estimate_rate(q, psi, phi, n_max).value for phi in ms.states)


def _rate_max_from_maximal(q, psi, level, n_max):
    ms = maximal_set(preorder_matrix(q, level))
    return max(estimate_rate(q, phi, psi, n_max).value for phi in ms.states)


def _witness_scales(q, phi, psi, n_max, ratio, factor) -> bool:
    """Whether some best-ratio witness still fits the level budget when its
    copy counts are multiplied by `factor`."""
    level_s, level_t = q.state_level(phi), q.state_level(psi)
    est = estimate_rate(q, phi, psi, n_max)
    for w in est.witnesses:
        if w.ratio != ratio:
            continue
        if (factor * w.n * level_s <= q.max_level
                and factor * w.m * level_t <= q.max_level):
            return True
    return False


def _weak_subadditivity(q, roster1, n_max) -> Verdict:
    claim = "value of n copies never exceeds n times the value of one copy"
    copies = [n for n in (2, 3) if 2 * n <= q.max_level]
    if not copies:
        return Verdict("weak-subadditivity", claim, "SKIPPED",
                       {"reason": "max_level leaves no room for copy searches"})
    checked = 0
    horizon_gaps = []
    for s in roster1:
        ms1 = maximal_set(preorder_matrix(q, 1)).states
        rd1 = min(estimate_rate(q, s, phi, n_max).value for phi in ms1)
        rc1, rc1_arg = max(
            ((estimate_rate(q, phi, s, n_max).value, phi) for phi in ms1),
            key=lambda t: t[0],
        )
        for n in copies:
            power = q.tensor_power_label(s, n)
            rdn = _rate_min_to_maximal(q, power, n, n_max)
            rcn = _rate_max_from_maximal(q, power, n, n_max)
            checked += 1
            # R_max scales linearly with copies, so the value inequalities
            # reduce to exact rate comparisons
            if rdn > rd1:
                return Verdict("weak-subadditivity", claim, "FAIL",
                               {"state": s, "copies": n, "kind": "distillable",
                                "rate_n": _fmt(rdn), "rate_1": _fmt(rd1)})
            if rcn < rc1:
                gap = {"state": s, "copies": n, "kind": "cost",
                       "rate_n": _fmt(rcn), "rate_1": _fmt(rc1)}
                if rc1 != INF and not _witness_scales(q, rc1_arg, s, n_max, rc1, n):
                    # the one-copy witness cannot be tensored up within the
                    # level budget, so the n-copy search was starved
                    horizon_gaps.append(gap)
                    continue
                return Verdict("weak-subadditivity", claim, "FAIL", gap)
    if horizon_gaps:
        return Verdict("weak-subadditivity", claim, "INCONCLUSIVE",
                       {"cases_checked": checked, "horizon_gaps": horizon_gaps})
    return Verdict("weak-subadditivity", claim, "PASS", {"cases_checked": checked})


def _cost_maximizer(q, ms, has_resource, has_catalytic, n_max) -> Verdict:
    claim = "some maximal state costs exactly the normalization constant"
    if not has_resource:
        return Verdict("cost-maximizer-exists", claim, "SKIPPED",
                       {"reason": "every roster state is free"})
    if has_catalytic:
        return Verdict("cost-maximizer-exists", claim, "SKIPPED",
                       {"reason": "a catalytically replicable state voids the hypothesis"})
    if q.r_max(1) == 0:
        return Verdict("cost-maximizer-exists", claim, "SKIPPED",
                       {"reason": "normalization constant is zero"})
    for phi in ms.states:
        rate = _rate_max_from_maximal(q, phi, 1, n_max)
        if rate == 1:
            return Verdict("cost-maximizer-exists", claim, "PASS",
                           {"state": phi, "cost": _num(q.r_max(1))})
    return Verdict("cost-maximizer-exists", claim, "FAIL",
                   {"maximal_states": list(ms.states)})


def _distillable_below_cost(q, roster1, has_resource, has_catalytic, n_max) -> Verdict:
    claim = "without replicating states, distillable resource never exceeds cost"
    if not has_resource:
        return Verdict("distillable-below-cost", claim, "SKIPPED",
                       {"reason": "every roster state is free"})
    if has_catalytic:
        return Verdict("distillable-below-cost", claim, "SKIPPED",
                       {"reason": "catalytic exception: replicating states void the hypothesis"})
    detail = {}
    for s in roster1:
        rd = _rate_min_to_maximal(q, s, 1, n_max)
        rc = _rate_max_from_maximal(q, s, 1, n_max)
        detail[s] = {"distill_rate": _fmt(rd), "form_rate": _fmt(rc)}
        # distillable <= cost is equivalent to rd * rc <= 1 in exact arithmetic
        if rd == INF or rc == INF:
            product = 0 if (rd == 0 or rc == 0) else INF
        else:
            product = rd * rc
        if product > 1:
            return Verdict("distillable-below-cost", claim, "FAIL", detail)
    return Verdict("distillable-below-cost", claim, "PASS", detail)


def _measure_verdicts(q, n_max, seed) -> list[Verdict]:
    out = []
    pool = None
    for decl in q.measures:
        measure = build_measure(q, decl)
        mono = check_monotonicity(measure, q, sample_count=100, seed=seed)
        out.append(Verdict(f"measure-{measure.name}-monotonicity",
                           f"'{measure.name}' never increases under sampled free words",
                           mono.verdict,
                           {"counterexample": mono.counterexample, "samples": mono.samples,
                            "note": mono.note}))
        add = check_additivity_family(measure, q, n_max=min(n_max, 2), seed=seed)
        for prop, v in add.verdicts.items():
            out.append(Verdict(f"measure-{measure.name}-{prop}",
                               f"additivity property '{prop}' for '{measure.name}'",
                               v.verdict,
                               {"counterexample": v.counterexample, "samples": v.samples,
                                "note": v.note}))
        if pool is None:
            pool = collect_rate_witnesses(q, levels=(1,), n_max=min(n_max, 2))
        cons = check_consistency(measure, q, pool, n_max)
        out.append(Verdict(f"measure-{measure.name}-consistency",
                           f"witnessed conversion rates never contradict '{measure.name}'",
                           cons.verdict,
                           {"counterexample": cons.counterexample, "samples": cons.samples,
                            "note": cons.note}))
        uniq = uniqueness_report(measure, q, n_max=n_max)
        status = "PASS" if uniq.ok else "FAIL"
        out.append(Verdict(f"measure-{measure.name}-uniqueness-sandwich",
                           f"'{measure.name}' sits between distillable resource and cost",
                           status,
                           {"entries": [vars(e) for e in uniq.entries],
                            "hypotheses": uniq.hypotheses}))
    return out


def _conflict_detector(q, n_max) -> Verdict:
    claim = ("two inequivalent maximal states with a super-unit conversion rate rule out "
             "any conventionally normalized, asymptotically continuous, weakly additive measure")
    fired, witness = normalization_conflict_detector(q, 1, n_max)
    detail = {"fired": fired}
    if witness:
        detail["witness"] = witness
        detail["conclusion"] = ("no measure on this instance can combine conventional "
                                "normalization, asymptotic continuity, and weak additivity")
    return Verdict("normalization-conflict-detector", claim, "PASS", detail)


def _num(v: float) -> object:
    if v == INF:
        return "inf"
    return v


def values_summary(q: QrtInstance, n_max: int = 3) -> dict:
    """Distillable resource, cost, and replication verdict per level-1 state."""
    out = {}
    for s in q.roster(1):
        rd = distillable_resource(q, s, 1, n_max)
        rc = resource_cost(q, s, 1, n_max)
        rep = replication_classify(q, s, n_max)
        out[s] = {
            "distillable": _num(rd.value),
            "cost": _num(rc.value),
            "replication": rep.verdict,
            "is_free": rep.is_free,
            "catalytically_replicable": rep.catalytically_replicable,
        }
    return out
