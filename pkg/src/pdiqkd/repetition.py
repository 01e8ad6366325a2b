"""Threshold repetition games: bookkeeping, the tau* calculator, Monte Carlo.

``G^(n, t)`` plays ``n`` independent copies of a game at once and accepts
when at least a ``t`` fraction of the copies are won.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats

from ._util import as_fraction, stream
from .errors import DomainError
from .games import DeterministicStrategyPair, TwoPlayerFreeGame
from .quantum import NoiseModel, QuantumStrategy, game_distribution, sample_rounds

DEFAULT_REP_CONSTANT = 1.0


@dataclass(frozen=True)
class ThresholdGameSpec:
    n: int
    t: Fraction

    def __post_init__(self) -> None:
        t = as_fraction(self.t)
        if not 0 <= t <= 1:
            raise DomainError(f"threshold {t} outside [0, 1]")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True)
class RoundLedger:
    """Per-round win indicators ``W_i``."""

    wins: tuple[bool, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "wins", tuple(bool(w) for w in self.wins))

    @property
    def n(self) -> int:
        return len(self.wins)

    @property
    def count(self) -> int:
        return sum(self.wins)


@dataclass(frozen=True)
class RepetitionConstants:
    exponent_constant: float = DEFAULT_REP_CONSTANT

    def __post_init__(self) -> None:
        if not self.exponent_constant > 0:
            raise DomainError("exponent constant must be positive")


def threshold_win(ledger: RoundLedger | Sequence[bool], spec: ThresholdGameSpec) -> bool:
    """Inclusive threshold test: ``wins / n >= t`` in exact arithmetic."""
    if not isinstance(ledger, RoundLedger):
        ledger = RoundLedger(tuple(ledger))
    if ledger.n != spec.n:
        raise DomainError(f"ledger has {ledger.n} rounds, spec expects {spec.n}")
    return ledger.count >= spec.t * spec.n


def tau_star_bound(n: int, delta: float, constants: RepetitionConstants = RepetitionConstants()) -> float:
    """``min(1, exp(-c * delta**9 * n))``.

    Only meaningful for ``delta > 0``, i.e. a threshold strictly above the
    single-round guessing value.
    """
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if n < 0:
        raise DomainError("n must be non-negative")
    return min(1.0, math.exp(-constants.exponent_constant * delta**9 * n))


def log_tau_star_bound(n: int, delta: float, constants: RepetitionConstants = RepetitionConstants()) -> float:
    """Natural log of :func:`tau_star_bound` without underflow."""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    return min(0.0, -constants.exponent_constant * delta**9 * n)


# Monte Carlo ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StrategyBundle:
    """A game and a strategy whose rounds are sampled i.i.d.

    ``strategy`` is either a :class:`QuantumStrategy` (with optional
    noise) or a :class:`DeterministicStrategyPair`.
    """

    game: TwoPlayerFreeGame
    strategy: QuantumStrategy | DeterministicStrategyPair
    noise: NoiseModel | None = None

    def __post_init__(self) -> None:
        if isinstance(self.strategy, QuantumStrategy):
            table = game_distribution(self.strategy, self.noise, self.game)
        else:
            nx, ny, na, nb = self.game.shape
            table = np.zeros(self.game.shape)
            for x in range(nx):
                for y in range(ny):
                    table[x, y, self.strategy.alice_map[x], self.strategy.bob_map[y]] = 1.0
        object.__setattr__(self, "_table", table)
        px = np.array([float(p) for p in self.game.alice_input_dist])
        py = np.array([float(p) for p in self.game.bob_input_dist])
        object.__setattr__(self, "_px", px)
        object.__setattr__(self, "_py", py)

    @property
    def round_win_probability(self) -> float:
        per_pair = (self._table * self.game.table).sum(axis=(2, 3))
        return float((np.outer(self._px, self._py) * per_pair).sum())

    def sample_wins(self, rng: np.random.Generator, n: int) -> np.ndarray:
        nx, ny, _, _ = self.game.shape
        x = rng.choice(nx, size=n, p=self._px)
        y = rng.choice(ny, size=n, p=self._py)
        a, b = sample_rounds(self._table, x, y, rng)
        return self.game.table[x, y, a, b]


@dataclass(frozen=True)
class ThresholdEstimate:
    n: int
    t: str
    trials: int
    wins: int
    estimate: float
    ci_low: float
    ci_high: float
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def clopper_pearson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    alpha = 1 - level
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(alpha / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lo, hi


def _count_threshold_wins(bundle: StrategyBundle, spec: ThresholdGameSpec, seed: int, trials: range) -> int:
    need = math.ceil(spec.t * spec.n)
    hits = 0
    for trial in trials:
        rng = stream(seed, trial, "threshold")
        hits += int(bundle.sample_wins(rng, spec.n).sum() >= need)
    return hits


def monte_carlo_threshold(
    bundle: StrategyBundle, spec: ThresholdGameSpec, trials: int, seed: int = 0, workers: int = 1
) -> ThresholdEstimate:
    """Fraction of trials passing the threshold, with a Clopper-Pearson 95% CI.

    Trial ``k`` draws from its own stream keyed by ``(seed, k)``, so the
    result does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if workers <= 1:
        hits = _count_threshold_wins(bundle, spec, seed, range(trials))
    else:
        bounds = np.linspace(0, trials, workers + 1).astype(int)
        chunks = [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(workers) as pool:
            hits = sum(pool.map(lambda r: _count_threshold_wins(bundle, spec, seed, r), chunks))
    lo, hi = clopper_pearson(hits, trials)
    return ThresholdEstimate(spec.n, str(spec.t), trials, hits, hits / trials, lo, hi, seed)


def binomial_tail(n: int, p: float, k_min: int) -> float:
    """``Pr[Bin(n, p) >= k_min]``."""
    return float(stats.binom.sf(k_min - 1, n, p))
