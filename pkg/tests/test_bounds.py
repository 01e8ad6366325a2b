import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdiqkd.bounds import (
    BoundConstants,
    concentration_audit,
    concentration_bound,
    guessing_to_min_entropy,
    honest_acceptance_bound,
    min_entropy_bound,
    theorem_report,
)
from pdiqkd.errors import ConsistencyError, DomainError, TheoremInapplicableError
from pdiqkd.protocol import (
    ClassicalDevice,
    OmniscientClassicalEve,
    ProtocolConfig,
    QuantumDevice,
    RandomGuessEve,
    empirical_guessing_probability,
    run_protocol,
)


def test_default_constants():
    c = BoundConstants()
    assert c.to_dict() == {"conc_constant": 0.5, "rep_constant": 1.0, "leak_constant": 1.0, "honest_constant": 0.1}
    with pytest.raises(DomainError):
        BoundConstants(conc_constant=0)


def test_concentration_bound_examples():
    assert concentration_bound(0.1, 0.25, 0) == 1.0
    assert concentration_bound(0.1, 0.25, 1000) == pytest.approx(math.exp(-0.5 * 0.01 * 250))
    assert honest_acceptance_bound(0.1, 0.25, 2000) == pytest.approx(1 - math.exp(-0.1 * 0.01 * 500))


@pytest.mark.parametrize("args", [(0, 0.25, 10), (0.1, 0, 10), (0.1, 0.6, 10), (0.1, 0.25, -1)])
def test_concentration_bound_domain(args):
    with pytest.raises(DomainError):
        concentration_bound(*args)
    with pytest.raises(DomainError):
        honest_acceptance_bound(*args)


def test_bounds_monotone_on_grid():
    eps_grid = np.linspace(0.01, 0.5, 10)
    n_grid = [0, 10, 100, 1000, 5000, 10_000, 50_000, 100_000, 500_000, 10**6]
    for eps in eps_grid:
        conc = [concentration_bound(eps, 0.1, n) for n in n_grid]
        honest = [honest_acceptance_bound(eps, 0.1, n) for n in n_grid]
        assert conc == sorted(conc, reverse=True)
        assert honest == sorted(honest)
        assert all(0.0 <= v <= 1.0 for v in conc + honest)
    for n in n_grid[1:]:
        conc = [concentration_bound(eps, 0.1, n) for eps in eps_grid]
        assert conc == sorted(conc, reverse=True)


def test_guessing_to_min_entropy():
    assert guessing_to_min_entropy(1.0) == 0.0
    assert guessing_to_min_entropy(2.0**-10) == 10.0
    for bad in (0.0, 1.5):
        with pytest.raises(DomainError):
            guessing_to_min_entropy(bad)


def test_min_entropy_closed_form():
    rep = min_entropy_bound(10**6, 0.001, 0.01, 0.5, 0.01)
    delta = 0.01 - 0.002
    assert rep.delta == pytest.approx(delta)
    assert rep.log_tau_star == pytest.approx(-(delta**9) * 1e6)
    expected = (delta**9) * 1e6 / math.log(2) - 1.0 - 1e4
    assert rep.h_min_bound == pytest.approx(expected)
    assert rep.epsilon_s == pytest.approx(min(1.0, math.exp(-0.5 * 1e-6 * 0.01 * 1e6) / 0.5))
    assert rep.to_dict()["constants"]["leak_constant"] == 1.0


def test_min_entropy_additive_in_leak_and_pa():
    base = min_entropy_bound(1000, 0.01, 0.1, 1.0, 0.5)
    half = min_entropy_bound(1000, 0.01, 0.1, 0.5, 0.5)
    assert base.h_min_bound - half.h_min_bound == pytest.approx(1.0)
    leak2 = min_entropy_bound(1000, 0.01, 0.1, 1.0, 0.5, BoundConstants(leak_constant=2.0))
    assert base.h_min_bound - leak2.h_min_bound == pytest.approx(0.1 * 1000)


def test_theorem_inapplicable_exactly_at_half_cstar():
    c_star = 0.1
    with pytest.raises(TheoremInapplicableError):
        min_entropy_bound(100, 0.05, 0.1, 1.0, c_star)
    with pytest.raises(TheoremInapplicableError):
        min_entropy_bound(100, 0.06, 0.1, 1.0, c_star)
    min_entropy_bound(100, np.nextafter(0.05, 0), 0.1, 1.0, c_star)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-4, 0.5), st.floats(1e-3, 1.0))
def test_inapplicable_iff_eps_at_least_half_cstar(eps, c_star):
    try:
        min_entropy_bound(1000, eps, 0.1, 1.0, c_star)
        raised = False
    except TheoremInapplicableError:
        raised = True
    assert raised == (eps >= c_star / 2)


def _log_exponent(n, delta):
    rep = min_entropy_bound(n, 1e-6, 0.1, 1.0, delta + 2e-6)
    return math.log(rep.delta), math.log(-rep.log_tau_star)


def test_log_slopes():
    pts = [_log_exponent(10**5, float(d)) for d in np.geomspace(1e-3, 0.5, 12)]
    slope = np.polyfit([p[0] for p in pts], [p[1] for p in pts], 1)[0]
    assert slope == pytest.approx(9.0, rel=1e-9)
    ns = np.geomspace(10, 1e7, 12).astype(int)
    ys = [_log_exponent(int(n), 0.2)[1] for n in ns]
    slope = np.polyfit(np.log(ns), ys, 1)[0]
    assert slope == pytest.approx(1.0, rel=1e-9)


# exhaustive concentration audit ---------------------------------------------

def hypergeometric_worst(n, k, eps):
    """Closed form: the worst pattern has the most wins allowed."""
    w = math.floor((1 - 2 * eps) * n)
    need = math.ceil((1 - eps) * k)
    return sum(math.comb(w, j) * math.comb(n - w, k - j) for j in range(need, k + 1)) / math.comb(n, k)


def test_audit_matches_hypergeometric_closed_form():
    audit = concentration_audit(12, 4, Fraction(1, 4))
    assert audit.subsets == 495
    assert audit.patterns == sum(math.comb(12, w) for w in range(0, 7))
    assert audit.max_violation == pytest.approx(hypergeometric_worst(12, 4, Fraction(1, 4)))
    assert audit.max_violation == pytest.approx(135 / 495)
    assert audit.worst_total_wins == 6
    assert audit.holds


@pytest.mark.parametrize("n,k,eps", [(6, 2, Fraction(1, 4)), (8, 2, Fraction(1, 8)), (10, 5, Fraction(1, 5)), (9, 3, Fraction(1, 3))])
def test_audit_small_cases(n, k, eps):
    audit = concentration_audit(n, k, eps)
    assert audit.max_violation == pytest.approx(hypergeometric_worst(n, k, eps))


def test_audit_dominance_for_small_n():
    for n in range(4, 13):
        k = max(1, n // 4)
        audit = concentration_audit(n, k, Fraction(1, 4))
        assert audit.holds, (n, k, audit)


def test_audit_domain():
    with pytest.raises(DomainError):
        concentration_audit(5, 0, "1/4")
    with pytest.raises(DomainError):
        concentration_audit(5, 6, "1/4")


# combined report ------------------------------------------------------------

def test_report_config_mismatch():
    cfg = ProtocolConfig(40, epsilon="1/100")
    stats = empirical_guessing_probability(cfg, QuantumDevice(), RandomGuessEve(), 5)
    with pytest.raises(ConsistencyError):
        theorem_report(ProtocolConfig(41, epsilon="1/100"), "1/9", BoundConstants(), stats)


def test_report_labels_and_applicability():
    cfg = ProtocolConfig(200, epsilon="1/100")
    stats = empirical_guessing_probability(cfg, QuantumDevice(), RandomGuessEve(), 20)
    rep = theorem_report(cfg, "1/9", BoundConstants(), stats)
    assert rep.applicable and rep.bound is not None
    assert rep.bound.p_a == stats.acceptance_rate
    for row in rep.to_dict()["comparison"]:
        assert "bound" in row["analytic_kind"] or row["analytic"] is None
        assert row["empirical_kind"].startswith("estimate")
    rep = theorem_report(cfg, "1/100", BoundConstants(), stats)
    assert not rep.applicable and "c_star" in rep.reason


def test_report_flags_full_guessing():
    cfg = ProtocolConfig(30, epsilon="1/2")
    dev = ClassicalDevice()
    stats = empirical_guessing_probability(cfg, dev, OmniscientClassicalEve(dev), 10)
    rep = theorem_report(cfg, "1/9", BoundConstants(), stats)
    assert any("every accepted key" in f for f in rep.flags)


def test_honest_acceptance_monte_carlo_audit():
    # (eps/2)-noisy honest devices should accept at least as often as the bound promises
    for n, eps in itertools.product((400, 1000), ("1/10", "1/5")):
        cfg = ProtocolConfig(n, epsilon=eps)
        dev = QuantumDevice.calibrated(1 - float(Fraction(eps)) / 2)
        accepted = sum(not run_protocol(cfg, dev, RandomGuessEve(), i).aborted for i in range(200))
        bound = honest_acceptance_bound(float(Fraction(eps)), 0.25, n)
        assert accepted / 200 + 3 * math.sqrt(0.25 / 200) >= bound
