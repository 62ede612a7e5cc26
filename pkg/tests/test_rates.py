from fractions import Fraction

import pytest

from qrtlab.model import load_instance
from qrtlab.rates import (
    INF,
    amplification_witness,
    collect_rate_witnesses,
    estimate_rate,
    rate_chain_check,
    reciprocal_consistency,
    replication_classify,
)
from qrtlab.specs import bundled_path


@pytest.fixture(scope="module")
def example4():
    return load_instance(bundled_path("example4"))


@pytest.fixture(scope="module")
def swap_only():
    return load_instance(bundled_path("swap_only"))


@pytest.fixture(scope="module")
def coherence():
    return load_instance(bundled_path("coherence_qubit"))


def test_self_rate_at_least_one(example4, swap_only):
    for q in (example4, swap_only):
        for s in q.roster(1):
            est = estimate_rate(q, s, s, n_max=3)
            assert est.lower >= 1


def test_example4_one_replicates(example4):
    est = estimate_rate(example4, "1", "1", n_max=3)
    assert est.unbounded
    assert est.lower >= 3
    pairs = {(w.n, w.m) for w in est.witnesses}
    assert (1, 2) in pairs and (1, 3) in pairs
    # witnesses replay exactly
    for w in est.witnesses:
        lv, idx = example4.replay("1" * w.n, list(w.word))
        assert example4.engine.label(lv, idx) == "1" * w.m


def test_example4_free_source_cannot_leave(example4):
    est = estimate_rate(example4, "0", "1", n_max=3)
    assert est.lower == 0
    assert est.upper == 0
    assert not est.unbounded


def test_free_target_is_unbounded(example4):
    est = estimate_rate(example4, "1", "0", n_max=3)
    assert est.unbounded
    assert "free target" in est.unbounded_reason


def test_reciprocity_witness_transposition(swap_only):
    rep = reciprocal_consistency(swap_only, "1", "1", n_max=3)
    assert rep.ok
    assert rep.rate_lower == 1 and rep.inverse_rate == 1


def test_reciprocity_unbounded_inverse_zero(example4):
    rep = reciprocal_consistency(example4, "1", "1", n_max=3)
    assert rep.ok
    assert rep.rate_lower == INF and rep.inverse_rate == 0


def test_reciprocity_one_over_zero(example4):
    rep = reciprocal_consistency(example4, "0", "1", n_max=3)
    assert rep.ok
    assert rep.rate_lower == 0 and rep.inverse_rate == INF


def test_rate_chain_trivial_middle(swap_only):
    rep = rate_chain_check(swap_only, "1", "1", "0", n_max=2)
    assert rep.status == "PASS"


def test_rate_chain_example4(example4):
    rep = rate_chain_check(example4, "1", "1", "0", n_max=2)
    assert rep.status == "PASS"
    assert rep.composed is not None


def test_rate_chain_unreachable_triple():
    q = load_instance({
        "flavor": "discrete",
        "alphabet": ["a", "b", "c"],
        "generators": [
            {"name": "identity", "kind": "builtin:identity"},
            {"name": "discard", "kind": "builtin:trace"},
        ],
        "max_level": 3,
    })
    rep = rate_chain_check(q, "a", "b", "c", n_max=1)
    assert rep.status == "PASS"
    assert rep.direct == 0 and rep.product == 0


def test_replication_example4(example4):
    one = replication_classify(example4, "1", n_max=3)
    assert one.verdict == "INFINITE"
    assert not one.is_free
    assert one.catalytically_replicable
    lv, idx = example4.replay("1" * one.witness.n, list(one.witness.word))
    assert example4.engine.label(lv, idx) == "1" * one.witness.m

    zero = replication_classify(example4, "0", n_max=3)
    assert zero.verdict == "INFINITE"
    assert zero.is_free
    assert not zero.catalytically_replicable


def test_replication_swap_only_is_unit(swap_only):
    one = replication_classify(swap_only, "1", n_max=3)
    assert one.verdict == "UNIT"
    assert not one.is_free
    assert amplification_witness(swap_only, "1", 3) is None


def test_replication_numeric_unknown(coherence):
    v = replication_classify(coherence, "plus", n_max=2)
    assert v.verdict == "UNKNOWN"
    assert not v.is_free


def test_ceiling_floor_conventions_agree(swap_only, example4):
    # a witness for m copies certifies rate m/n under either rounding
    import math

    for q in (swap_only, example4):
        for s in q.roster(1):
            est = estimate_rate(q, s, s, n_max=3)
            ceil_lower = max(
                (Fraction(w.m, w.n) for w in est.witnesses if math.ceil(Fraction(w.m, w.n) * w.n) == w.m),
                default=Fraction(0),
            )
            floor_lower = max(
                (Fraction(w.m, w.n) for w in est.witnesses if math.floor(Fraction(w.m, w.n) * w.n) == w.m),
                default=Fraction(0),
            )
            assert ceil_lower == floor_lower == est.lower


def test_copies_invariance_swap_only(swap_only):
    est1 = estimate_rate(swap_only, "1", "0", n_max=3)
    est2 = estimate_rate(swap_only, "11", "00", n_max=3)
    assert est1.value == est2.value == INF  # free target both ways
    est1 = estimate_rate(swap_only, "1", "1", n_max=3)
    est2 = estimate_rate(swap_only, "11", "11", n_max=3)
    assert est1.lower == est2.lower == 1


def test_conversion_order_swap_only(swap_only):
    # "1" converts to "0"; distilling toward the stronger target is never easier
    for rho in swap_only.roster(1):
        to_strong = estimate_rate(swap_only, rho, "1", n_max=3).value
        to_weak = estimate_rate(swap_only, rho, "0", n_max=3).value
        assert to_strong <= to_weak
        from_weak = estimate_rate(swap_only, "0", rho, n_max=3).value
        from_strong = estimate_rate(swap_only, "1", rho, n_max=3).value
        assert from_weak <= from_strong


def test_collect_rate_witnesses(swap_only):
    pool = collect_rate_witnesses(swap_only, levels=(1,), n_max=2)
    assert any(p.source == "1" and p.target == "0" for p in pool)
    for p in pool:
        lv, idx = swap_only.replay(swap_only.tensor_power_label(p.source, p.n), list(p.word))
        assert swap_only.engine.label(lv, idx) == swap_only.tensor_power_label(p.target, p.m)
