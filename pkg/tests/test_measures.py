import numpy as np
import pytest

from qrtlab.linalg import von_neumann_entropy
from qrtlab.measures import (
    FreeSpec,
    ResourceMeasure,
    check_additivity_family,
    check_consistency,
    check_monotonicity,
    count_ones_measure,
    distillable_resource,
    free_spec_from_instance,
    normalization_conflict_detector,
    regularized_rer_estimate,
    relative_entropy_of_resource,
    rer_measure,
    resource_cost,
    table_measure,
    trace_distance_measure,
    uniqueness_report,
    zero_measure,
)
from qrtlab.model import SpecError, load_instance
from qrtlab.rates import INF, collect_rate_witnesses
from qrtlab.specs import bundled_path

KET0 = np.array([[1, 0], [0, 0]], dtype=complex)
KET1 = np.array([[0, 0], [0, 1]], dtype=complex)
PLUS = np.full((2, 2), 0.5, dtype=complex)
MIXED = np.eye(2, dtype=complex) / 2


@pytest.fixture(scope="module")
def example4():
    return load_instance(bundled_path("example4"))


@pytest.fixture(scope="module")
def swap_only():
    return load_instance(bundled_path("swap_only"))


@pytest.fixture(scope="module")
def coherence():
    return load_instance(bundled_path("coherence_qubit"))


@pytest.fixture(scope="module")
def two_maximal():
    return load_instance(bundled_path("two_maximal"))


def test_distillable_free_state_is_zero(example4, swap_only):
    for q in (example4, swap_only):
        rd = distillable_resource(q, "0")
        assert rd.value == 0.0 and rd.exact


def test_cost_free_state_is_zero(example4, swap_only):
    for q in (example4, swap_only):
        rc = resource_cost(q, "0")
        assert rc.value == 0.0


def test_example4_catalytic_values(example4):
    assert distillable_resource(example4, "1").value == INF
    assert resource_cost(example4, "1").value == 0.0


def test_swap_only_unit_values(swap_only):
    rd = distillable_resource(swap_only, "1")
    rc = resource_cost(swap_only, "1")
    assert rd.value == 1.0 and rc.value == 1.0
    assert rd.rate == 1 and rc.rate == 1


def test_rer_finite_set():
    spec = FreeSpec("finite", (("mixed", MIXED),))
    res = relative_entropy_of_resource(KET0, spec)
    assert res.value == pytest.approx(1.0, abs=1e-10)
    assert res.argmin_label == "mixed"


def test_rer_member_of_free_set_is_zero():
    spec = FreeSpec("finite", (("ket0", KET0), ("ket1", KET1)))
    assert relative_entropy_of_resource(KET0, spec).value == pytest.approx(0.0, abs=1e-10)


def test_rer_empty_set_is_an_error():
    with pytest.raises(SpecError, match="empty"):
        relative_entropy_of_resource(KET0, FreeSpec("finite", ()))


def test_rer_all_infinite_returns_inf():
    spec = FreeSpec("hull", (("ket0", KET0),))
    assert relative_entropy_of_resource(KET1, spec).value == INF


def test_rer_hull_coherence(coherence):
    spec = free_spec_from_instance(coherence)
    res = relative_entropy_of_resource(PLUS, spec)
    oracle = von_neumann_entropy(np.diag(np.diag(PLUS))) - von_neumann_entropy(PLUS)
    assert oracle == pytest.approx(1.0, abs=1e-12)
    assert res.value == pytest.approx(oracle, abs=1e-4)
    assert res.residual < 1e-6


def test_rer_hull_generic_state_matches_diagonal_formula(coherence):
    # optimum over diagonal mixtures is the dephased state
    rng = np.random.default_rng(21)
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    v /= np.linalg.norm(v)
    psi = np.outer(v, v.conj())
    spec = free_spec_from_instance(coherence)
    res = relative_entropy_of_resource(psi, spec, residual_target=1e-8, max_iter=200000)
    oracle = von_neumann_entropy(np.diag(np.diag(psi))) - von_neumann_entropy(psi)
    assert res.value == pytest.approx(oracle, abs=1e-4)


def test_regularized_rer_per_copy(coherence):
    spec = free_spec_from_instance(coherence)
    reg = regularized_rer_estimate(PLUS, spec, n_max=2)
    assert reg.per_copy[0] == pytest.approx(1.0, abs=1e-4)
    assert reg.per_copy[1] == pytest.approx(1.0, abs=1e-4)
    assert reg.running_min == sorted(reg.running_min, reverse=True)


def test_regularized_rer_free_state(coherence):
    # the optimum sits on a hull vertex, so the value carries the solver residual
    spec = free_spec_from_instance(coherence)
    reg = regularized_rer_estimate(KET0, spec, n_max=2)
    assert all(0.0 <= v <= 2e-6 for v in reg.per_copy)


def test_monotonicity_constant_measure(example4):
    verdict = check_monotonicity(zero_measure(), example4, sample_count=50, seed=1)
    assert verdict.verdict == "PASS"


def test_monotonicity_rer_on_coherence(coherence):
    verdict = check_monotonicity(rer_measure(coherence), coherence,
                                 sample_count=100, seed=2)
    assert verdict.verdict == "PASS"


def test_monotonicity_fails_for_distance_measure(example4):
    measure = trace_distance_measure(example4, "1")
    verdict = check_monotonicity(measure, example4, sample_count=200, seed=3)
    assert verdict.verdict == "FAIL"
    ce = verdict.counterexample
    # the witness replays to a genuine increase
    level, handle = example4.state_handle(ce["state"])
    from qrtlab.engine import Step

    word = [Step.from_json(s) for s in ce["word"]]
    out_level, out_handle = example4.engine.replay(level, handle, word)
    after = measure(example4, out_level, example4.engine.label(out_level, int(out_handle)))
    assert after == ce["value_after"] > ce["value_before"]


def test_additivity_count_ones(swap_only):
    report = check_additivity_family(count_ones_measure(), swap_only)
    assert report.verdicts["weakly_additive"].verdict == "PASS"
    assert report.verdicts["subadditive"].verdict == "PASS"
    assert report.verdicts["superadditive"].verdict == "PASS"
    assert report.verdicts["weakly_additive_zero_on_free"].verdict == "PASS"


def test_additivity_rer_subadditive(coherence):
    report = check_additivity_family(rer_measure(coherence), coherence)
    assert report.verdicts["subadditive"].verdict == "PASS"


def test_weakly_additive_measure_with_nonzero_free_value_fails(swap_only):
    # weakly additive by construction, but 0.5 on every state including free ones
    bad = ResourceMeasure("bad", lambda q, level, state: 0.5 * level)
    report = check_additivity_family(bad, swap_only)
    assert report.verdicts["weakly_additive"].verdict == "PASS"
    assert report.verdicts["weakly_additive_zero_on_free"].verdict == "FAIL"


def test_consistency_count_ones_on_swap_only(swap_only):
    pool = collect_rate_witnesses(swap_only, levels=(1, 2), n_max=2)
    verdict = check_consistency(count_ones_measure(), swap_only, pool)
    assert verdict.verdict == "PASS"


def test_consistency_count_ones_fails_on_example4(example4):
    pool = collect_rate_witnesses(example4, levels=(1,), n_max=2)
    verdict = check_consistency(count_ones_measure(), example4, pool)
    assert verdict.verdict == "FAIL"
    ce = verdict.counterexample
    assert ce["source"] == "1" and ce["target"] == "1"
    assert ce["witness"]["m"] > ce["witness"]["n"]


def test_consistency_zero_measure(example4):
    pool = collect_rate_witnesses(example4, levels=(1,), n_max=2)
    assert check_consistency(zero_measure(), example4, pool).verdict == "PASS"


def test_uniqueness_sandwich_swap_only(swap_only):
    report = uniqueness_report(count_ones_measure(), swap_only)
    assert report.ok
    one = next(e for e in report.entries if e.state == "1")
    assert one.distillable == one.measured == one.cost == 1.0
    assert one.status == "PASS"
    assert report.hypotheses["conventional_normalization"] == "PASS"
    assert not report.conflict_detector_fired


def test_uniqueness_catalytic_exception_example4(example4):
    report = uniqueness_report(count_ones_measure(), example4)
    one = next(e for e in report.entries if e.state == "1")
    assert one.status == "CATALYTIC_EXCEPTION"
    assert report.ok  # exception, not failure


def test_conflict_detector_two_maximal(two_maximal):
    fired, witness = normalization_conflict_detector(two_maximal)
    assert fired
    assert witness["from"] == "x" and witness["to"] == "y"
    assert witness["witness"]["m"] > witness["witness"]["n"]


def test_conflict_detector_silent_on_swap_only(swap_only):
    fired, _ = normalization_conflict_detector(swap_only)
    assert not fired


def test_table_measure_totality(swap_only):
    values = [[1, "0", 0.0], [1, "1", 1.0]]
    m = table_measure("custom", values, swap_only)
    assert m(swap_only, 1, "1") == 1.0
    with pytest.raises(SpecError, match="not total"):
        table_measure("partial", [[1, "0", 0.0]], swap_only)


def test_rer_never_increases_when_free_set_grows(coherence):
    small = FreeSpec("hull", (("ket0", KET0),))
    big = FreeSpec("hull", (("ket0", KET0), ("ket1", KET1)))
    rng = np.random.default_rng(31)
    for _ in range(10):
        a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        m = a @ a.conj().T
        rho = m / np.trace(m).real
        v_small = relative_entropy_of_resource(rho, small).value
        v_big = relative_entropy_of_resource(rho, big).value
        assert v_big <= v_small + 1e-6


def test_value_monotonicity_under_rate_condition(swap_only):
    from qrtlab.measures import check_value_monotonicity, rate_condition_holds

    assert rate_condition_holds(swap_only)
    verdict = check_value_monotonicity(swap_only, samples=12, seed=5)
    assert verdict.verdict == "PASS"
    assert verdict.samples > 0


def test_continuity_proxies_are_inconclusive(coherence, swap_only):
    from qrtlab.measures import continuity_proxies

    numeric = continuity_proxies(rer_measure(coherence), coherence)
    assert numeric["asymptotic_continuity"].verdict == "INCONCLUSIVE"
    assert numeric["lower_semicontinuity"].verdict == "INCONCLUSIVE"
    assert numeric["asymptotic_continuity"].counterexample["sequence"]
    discrete = continuity_proxies(count_ones_measure(), swap_only)
    assert discrete["asymptotic_continuity"].verdict == "INCONCLUSIVE"
