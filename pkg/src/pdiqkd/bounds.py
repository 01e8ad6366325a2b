"""Explicit-constant calculators for the security statement and its proof.

None of the asymptotic constants are known, so each hidden constant is a
field of :class:`BoundConstants` and every report echoes the values used.
Entropies are in bits; exponents are natural logs and converted with
``log2(e)`` where needed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._util import Rational, as_fraction
from .errors import ConsistencyError, DomainError, TheoremInapplicableError
from .protocol import GuessingStats, ProtocolConfig

LOG2E = math.log2(math.e)


@dataclass(frozen=True)
class BoundConstants:
    """Placeholder values for the constants hidden in the asymptotic notation.

    ``conc_constant`` is half the Hoeffding constant for sampling without
    replacement, which keeps it safely below the true tail exponent.
    """

    conc_constant: float = 0.5
    rep_constant: float = 1.0
    leak_constant: float = 1.0
    honest_constant: float = 0.1

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not value > 0:
                raise DomainError(f"{name} must be strictly positive, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_CONSTANTS = BoundConstants()


def _check_common(epsilon: float, gamma: float, n: int) -> None:
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if not 0 < gamma <= 0.5:
        raise DomainError(f"gamma must lie in (0, 1/2], got {gamma}")
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")


def concentration_bound(epsilon: float, gamma: float, n: int, constants: BoundConstants = DEFAULT_CONSTANTS) -> float:
    """``min(1, exp(-c eps^2 gamma n))``.

    Bounds the chance that the test passes at ``1 - eps`` while the whole
    string has at most ``(1 - 2 eps) n`` wins.
    """
    epsilon, gamma = float(epsilon), float(gamma)
    _check_common(epsilon, gamma, n)
    return min(1.0, math.exp(-constants.conc_constant * epsilon**2 * gamma * n))


def honest_acceptance_bound(
    epsilon: float, gamma: float, n: int, constants: BoundConstants = DEFAULT_CONSTANTS
) -> float:
    """Acceptance probability guaranteed to (eps/2)-noisy honest devices."""
    epsilon, gamma = float(epsilon), float(gamma)
    _check_common(epsilon, gamma, n)
    return 1.0 - min(1.0, math.exp(-constants.honest_constant * epsilon**2 * gamma * n))


def guessing_to_min_entropy(p_guess: float) -> float:
    """``-log2(p_guess)``."""
    if not 0 < p_guess <= 1:
        raise DomainError(f"guessing probability must lie in (0, 1], got {p_guess}")
    return max(0.0, -math.log2(p_guess))


@dataclass(frozen=True)
class BoundReport:
    n: int
    epsilon: float
    gamma: float
    p_a: float
    c_star: float
    delta: float
    log_tau_star: float
    tau_star: float
    h_min_bound: float
    epsilon_s: float
    constants: BoundConstants = field(default_factory=BoundConstants)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["constants"] = self.constants.to_dict()
        return d


def min_entropy_bound(
    n: int,
    epsilon: float,
    gamma: float,
    p_a: float,
    c_star: float,
    constants: BoundConstants = DEFAULT_CONSTANTS,
) -> BoundReport:
    """Smooth min-entropy lower bound with explicit constants.

    ``p_a`` is the probability of the conditioning (non-abort) event.

    Raises
    ------
    TheoremInapplicableError
        If ``epsilon >= c_star / 2``.
    """
    epsilon, gamma, p_a, c_star = float(epsilon), float(gamma), float(p_a), float(c_star)
    if not 0 < c_star <= 1:
        raise DomainError(f"c_star must lie in (0, 1], got {c_star}")
    if epsilon >= c_star / 2:
        raise TheoremInapplicableError(f"epsilon = {epsilon} is not below c_star / 2 = {c_star / 2}")
    _check_common(epsilon, gamma, n)
    if not 0 < p_a <= 1:
        raise DomainError(f"p_a must lie in (0, 1], got {p_a}")
    delta = c_star - 2 * epsilon
    log_tau = -constants.rep_constant * delta**9 * n
    h_min = -log_tau * LOG2E - math.log2(1 / p_a) - constants.leak_constant * gamma * n
    eps_s = min(1.0, math.exp(-constants.conc_constant * epsilon**2 * gamma * n) / p_a)
    return BoundReport(n, epsilon, gamma, p_a, c_star, delta, log_tau, math.exp(log_tau), h_min, eps_s, constants)


# Exhaustive audit of the sampling bound -------------------------------------

@dataclass(frozen=True)
class ConcentrationAudit:
    n: int
    test_size: int
    epsilon: float
    subsets: int
    patterns: int
    max_violation: float
    worst_total_wins: int
    bound: float

    @property
    def holds(self) -> bool:
        return self.max_violation <= self.bound


def concentration_audit(
    n: int, test_size: int, epsilon: Rational, constants: BoundConstants = DEFAULT_CONSTANTS
) -> ConcentrationAudit:
    """Worst case over win patterns of Pr_T[test passes], by enumeration.

    Every pattern ``W`` with ``sum(W) <= (1 - 2 eps) n`` is paired with every
    test set of size ``test_size``; the pass event is the protocol's
    inclusive ``>= (1 - eps)|T|``, which contains the strict version.
    """
    eps = as_fraction(epsilon)
    if test_size < 1 or test_size > n:
        raise DomainError("test size must lie in [1, n]")
    subsets = np.array(
        [sum(1 << i for i in c) for c in itertools.combinations(range(n), test_size)], dtype=np.int64
    )
    need = (1 - eps) * test_size
    cap = (1 - 2 * eps) * n
    patterns = np.arange(1 << n, dtype=np.int64)
    totals = _popcount(patterns, n)
    patterns = patterns[totals <= cap]
    worst, worst_wins = 0.0, 0
    for start in range(0, len(patterns), 4096):
        block = patterns[start : start + 4096]
        hits = _popcount(block[:, None] & subsets[None, :], n)
        freq = (hits >= need).mean(axis=1)
        k = int(freq.argmax())
        if freq[k] > worst:
            worst, worst_wins = float(freq[k]), int(_popcount(block[k : k + 1], n)[0])
    gamma = test_size / n
    bound = min(1.0, math.exp(-constants.conc_constant * float(eps) ** 2 * gamma * n))
    return ConcentrationAudit(n, test_size, float(eps), len(subsets), len(patterns), worst, worst_wins, bound)


def _popcount(values: np.ndarray, width: int) -> np.ndarray:
    counts = np.zeros(values.shape, dtype=np.int64)
    for i in range(width):
        counts += (values >> i) & 1
    return counts


# Combined report ------------------------------------------------------------

@dataclass(frozen=True)
class TheoremReport:
    config_hash: str
    applicable: bool
    reason: str
    bound: BoundReport | None
    honest_acceptance: float | None
    rows: list[dict]
    flags: list[str]

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "applicable": self.applicable,
            "reason": self.reason,
            "bound": None if self.bound is None else self.bound.to_dict(),
            "honest_acceptance_bound": self.honest_acceptance,
            "comparison": self.rows,
            "flags": self.flags,
        }


def theorem_report(
    config: ProtocolConfig,
    c_star: Rational,
    constants: BoundConstants,
    stats: GuessingStats,
    p_a: float | None = None,
) -> TheoremReport:
    """Put the analytic bounds next to what the simulator measured.

    Each comparison row is labelled ``bound`` or ``estimate`` per side.
    ``p_a`` defaults to the measured acceptance rate.

    Raises
    ------
    ConsistencyError
        If ``stats`` were produced under a different configuration.
    """
    if stats.config_hash != config.config_hash():
        raise ConsistencyError(
            f"run statistics have config hash {stats.config_hash}, bounds were asked for {config.config_hash()}"
        )
    c_star = float(as_fraction(c_star))
    eps, gamma = float(config.epsilon), float(config.gamma)
    p_a = stats.acceptance_rate if p_a is None else p_a
    flags: list[str] = []
    bound, reason = None, ""
    try:
        if p_a <= 0:
            raise DomainError("no accepted runs, the conditioning event has probability 0")
        bound = min_entropy_bound(config.n, eps, gamma, p_a, c_star, constants)
    except (TheoremInapplicableError, DomainError) as exc:
        reason = str(exc)
    honest = honest_acceptance_bound(eps, gamma, config.n, constants) if eps > 0 else None

    rows = [
        {
            "quantity": "acceptance probability",
            "analytic": honest,
            "analytic_kind": "lower bound for honest (eps/2)-noisy devices",
            "empirical": stats.acceptance_rate,
            "empirical_kind": "estimate",
        },
        {
            "quantity": "min-entropy of K_A given Eve (bits)",
            "analytic": None if bound is None else bound.h_min_bound,
            "analytic_kind": "lower bound (smooth, eps_s)",
            "empirical": stats.min_entropy_floor,
            "empirical_kind": "estimate: -log2 whole-key guess frequency, classical Eve only",
        },
        {
            "quantity": "whole-key guessing probability",
            "analytic": None if bound is None else 2.0 ** -max(bound.h_min_bound, 0.0),
            "analytic_kind": "upper bound",
            "empirical": stats.whole_string_success,
            "empirical_kind": "estimate",
        },
        {
            "quantity": "per-bit guessing probability",
            "analytic": None,
            "analytic_kind": "not bounded",
            "empirical": stats.per_bit_success,
            "empirical_kind": "estimate",
        },
    ]
    if honest is not None and stats.acceptance_rate < honest:
        flags.append(
            "measured acceptance is below the honest-device bound: the devices do not behave as "
            "(eps/2)-noisy honest devices"
        )
    if stats.whole_string_success == 1.0:
        flags.append("Eve guessed every accepted key completely")
    return TheoremReport(config.config_hash(), bound is not None, reason, bound, honest, rows, flags)
