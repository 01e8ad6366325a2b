"""The ten acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line so ``pytest -s`` or the
captured log doubles as a checklist.
"""

import itertools
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from pdiqkd.bounds import concentration_audit, concentration_bound, honest_acceptance_bound, min_entropy_bound
from pdiqkd.cli import main
from pdiqkd.errors import TheoremInapplicableError
from pdiqkd.games import classical_value, magic_square
from pdiqkd.guessing import (
    GUESS_FULL_OUTPUT,
    ClassicalEveStrategy,
    anchoring_check,
    build_guessing_game,
    c_star_bounds,
    classical_guessing_value,
    strategy_guessing_value,
)
from pdiqkd.protocol import (
    ClassicalDevice,
    OmniscientClassicalEve,
    ProtocolConfig,
    QuantumDevice,
    RandomGuessEve,
    run_many,
    summarize_records,
)
from pdiqkd.quantum import ideal_ms_strategy, win_probability
from pdiqkd.repetition import binomial_tail

from gamegen import random_game, zero_maps


@pytest.fixture
def verdict(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, detail

    return emit


def test_ac01_exact_game_values(verdict):
    start = time.perf_counter()
    game, _ = magic_square()
    omega_c = classical_value(game)
    omega_q = win_probability(ideal_ms_strategy())
    elapsed = time.perf_counter() - start
    ok = omega_c == Fraction(8, 9) and abs(omega_q - 1.0) < 1e-9 and omega_c < omega_q and elapsed < 1.0
    verdict("AC1 exact game values", ok, f"omega_c={omega_c}, omega*={omega_q:.12f}, {elapsed:.3f}s")


def test_ac02_common_bit_law(verdict):
    game, maps = magic_square()
    tuples = list(itertools.product(range(3), range(3), range(4), range(4)))
    exceptions = sum(1 for x, y, a, b in tuples if game.table[x, y, a, b] and maps.f(x, y, a) != maps.g(x, y, b))
    verdict("AC2 common-bit law", len(tuples) == 144 and exceptions == 0, f"{len(tuples)} tuples, {exceptions} exceptions")


def test_ac03_guessing_game_values(verdict):
    start = time.perf_counter()
    game, maps = magic_square()
    g = build_guessing_game(game, maps, Fraction(1, 8))
    value = classical_guessing_value(g)
    ideal = strategy_guessing_value(g, ideal_ms_strategy(), ClassicalEveStrategy.uniform(g))
    consts = c_star_bounds([value, ideal])
    elapsed = time.perf_counter() - start
    ok = (
        value == Fraction(8, 9)
        and classical_value(game) <= value
        and consts.c_star_upper_bound == Fraction(1, 9)
        and elapsed < 30
    )
    verdict("AC3 guessing-game values", ok, f"omega_c(MS_1/8)={value}, C* <= {consts.c_star_upper_bound}, {elapsed:.2f}s")


def test_ac04_anchoring(verdict):
    rng = np.random.default_rng(2024)
    checked = failures = 0
    for _ in range(50):
        base = random_game(rng)
        for eta in (Fraction(1, 8), Fraction(1, 4), Fraction(1, 2)):
            checked += 1
            failures += not anchoring_check(build_guessing_game(base, zero_maps(base), eta, GUESS_FULL_OUTPUT))
    verdict("AC4 anchoring", failures == 0, f"{checked} games checked, {failures} failures")


def test_ac05_honest_completeness(verdict):
    start = time.perf_counter()
    runs = 500
    cfg = ProtocolConfig(2000, eta=Fraction(1, 8), gamma=Fraction(1, 4), epsilon=Fraction(1, 10), master_seed=5)
    device = QuantumDevice.calibrated(0.95)
    accepted = sum(not r.aborted for r in run_many(cfg, device, RandomGuessEve(), runs))
    rate = accepted / runs
    p = binomial_tail(cfg.test_size, 0.95, math.ceil(Fraction(9, 10) * cfg.test_size))
    sigma = math.sqrt(p * (1 - p) / runs)
    honest = honest_acceptance_bound(0.1, 0.25, 2000)
    elapsed = time.perf_counter() - start
    ok = abs(rate - p) <= 3 * sigma and rate >= honest and elapsed < 300
    verdict(
        "AC5 honest completeness",
        ok,
        f"acceptance {rate:.4f} vs tail {p:.4f} (3 sigma {3 * sigma:.4f}), honest bound {honest:.4f}, {elapsed:.1f}s",
    )


def test_ac06_key_agreement(verdict):
    ideal = run_many(ProtocolConfig(500, master_seed=1), QuantumDevice(), RandomGuessEve(), 100)
    ideal_ok = all(np.array_equal(r.K_A, r.K_B) for r in ideal)
    noisy = run_many(ProtocolConfig(500, master_seed=2), QuantumDevice.calibrated(0.95), RandomGuessEve(), 200)
    worst = max(r.disagreements - int((~r.wins[r.key_indices]).sum()) for r in noisy)
    verdict("AC6 key agreement", ideal_ok and worst <= 0, f"ideal agree={ideal_ok}, max(disagree - losses)={worst}")


def test_ac07_eve_baselines(verdict):
    runs = 100_000
    cfg = ProtocolConfig(10, eta=0, gamma=Fraction(1, 10), exclude_test_rounds_from_key=False, master_seed=7)
    stats = summarize_records([r.record() for r in run_many(cfg, QuantumDevice(), RandomGuessEve(), runs)])
    k = 10
    p = 2.0**-k
    random_ok = stats.mean_key_length == k and abs(stats.whole_string_success - p) <= 3 * math.sqrt(p * (1 - p) / stats.accepted)

    device = ClassicalDevice()
    eve = OmniscientClassicalEve(device)
    rates, per_bit = [], []
    for n in (40, 200, 1000, 2000):
        recs = [r.record() for r in run_many(ProtocolConfig(n, epsilon=Fraction(1, 20), master_seed=n), device, eve, 200)]
        accepted = [r for r in recs if r["abort_stage"] == "none"]
        rates.append(len(accepted) / len(recs))
        if accepted:
            per_bit.append(sum(r["eve_correct_bits"] for r in accepted) / sum(r["key_length"] for r in accepted))
    omni_ok = all(b == 1.0 for b in per_bit) and rates[-1] == 0.0 and rates[0] > rates[-1] and rates == sorted(rates, reverse=True)
    verdict(
        "AC7 Eve baselines",
        random_ok and omni_ok,
        f"random whole-key {stats.whole_string_success:.5f} vs 2^-{k}={p:.5f}; omniscient per-bit {per_bit}, acceptance {rates}",
    )


def test_ac08_concentration_audit(verdict):
    start = time.perf_counter()
    audit = concentration_audit(12, 4, Fraction(1, 4))
    elapsed = time.perf_counter() - start
    bound = concentration_bound(0.25, 4 / 12, 12)
    ok = audit.subsets == 495 and audit.max_violation <= bound and elapsed < 60
    verdict("AC8 concentration audit", ok, f"max violation {audit.max_violation:.4f} <= bound {bound:.4f}, {elapsed:.2f}s")


def test_ac09_bound_calculators(verdict):
    def log_exponent(n, delta):
        rep = min_entropy_bound(n, 1e-6, 0.1, 1.0, delta + 2e-6)
        return math.log(rep.delta), math.log(-rep.log_tau_star)

    pts = [log_exponent(10**5, float(d)) for d in np.geomspace(1e-3, 0.5, 12)]
    slope_delta = np.polyfit([p[0] for p in pts], [p[1] for p in pts], 1)[0]
    ns = np.geomspace(10, 1e7, 12).astype(int)
    slope_n = np.polyfit(np.log(ns), [log_exponent(int(n), 0.2)[1] for n in ns], 1)[0]
    slopes_ok = abs(slope_delta - 9) <= 9e-9 and abs(slope_n - 1) <= 1e-9

    mismatches = 0
    for eps, c_star in itertools.product(np.linspace(0.001, 0.2, 40), np.linspace(0.01, 0.4, 40)):
        try:
            min_entropy_bound(1000, eps, 0.1, 1.0, c_star)
            raised = False
        except TheoremInapplicableError:
            raised = True
        mismatches += raised != (eps >= c_star / 2)
    verdict(
        "AC9 bound calculators",
        slopes_ok and mismatches == 0,
        f"slope in delta {slope_delta:.12f}, slope in n {slope_n:.12f}, inapplicability mismatches {mismatches}",
    )


@pytest.mark.parametrize(
    "argv",
    [
        ["values", "--eta", "1/8", "--format", "json"],
        ["simulate", "--device", "ideal", "--eve", "random", "--n", "1000", "--runs", "100", "--seed", "7"],
        ["simulate", "--device", "noisy", "--n", "300", "--runs", "20", "--seed", "1", "--workers", "4"],
        ["bounds", "--n", "1e6", "--eps", "0.004", "--gamma", "0.01", "--cstar", "0.01", "--pa", "0.5"],
        ["attack", "--n-grid", "100", "--runs", "5", "--seed", "2", "--workers", "3"],
    ],
    ids=["values", "simulate-ideal", "simulate-noisy", "bounds", "attack"],
)
def test_ac10_cli_determinism(argv, tmp_path, capsys, verdict):
    outputs = []
    for i in range(2):
        path = tmp_path / f"out{i}"
        code = main(argv + ["--out", str(path)])
        capsys.readouterr()
        assert code == 0
        outputs.append(path.read_bytes())
    if argv[0] != "attack":
        json.loads(outputs[0])
    verdict(f"AC10 determinism ({argv[0]})", outputs[0] == outputs[1], f"{len(outputs[0])} bytes, identical={outputs[0] == outputs[1]}")
