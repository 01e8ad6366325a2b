"""Eta-guessing games: a base game plus an eavesdropper with anchored input.

With probability ``1 - eta`` Eve is handed both players' inputs and must
guess Alice's answer (or only the common bit ``f(x, y, a)`` in the relaxed
variant); with probability ``eta`` she gets the anchor symbol and her guess
is ignored. The module computes exact classical values by brute force and
exact values of fixed (quantum or deterministic) Alice/Bob strategies
against classical Eve strategies. Those values lower-bound the entangled
guessing value and so upper-bound the immunization gap ``C*``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from ._util import Rational, as_fraction
from .errors import CapacityError, DomainError, MalformedStrategyError
from .games import (
    ENUMERATION_GUARD,
    CommonBitMaps,
    DeterministicStrategyPair,
    TwoPlayerFreeGame,
    _alice_maps,
)
from .quantum import QuantumStrategy, game_distribution

GUESS_FULL_OUTPUT = "guess_full_output"
GUESS_COMMON_BIT = "guess_common_bit"
EVE_CONDITIONS = (GUESS_FULL_OUTPUT, GUESS_COMMON_BIT)

ANCHOR = None
DEFAULT_C_STAR = Fraction(1, 100)


@dataclass(frozen=True)
class EveInput:
    """Eve's question: an input pair, or the anchor (``pair is None``)."""

    tag: str
    pair: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.tag == "anchor" and self.pair is not None:
            raise DomainError("anchor input carries no pair")
        if self.tag == "pair" and self.pair is None:
            raise DomainError("pair input needs (x, y)")
        if self.tag not in ("anchor", "pair"):
            raise DomainError(f"unknown Eve input tag {self.tag!r}")

    @classmethod
    def anchor(cls) -> "EveInput":
        return cls("anchor")

    @classmethod
    def of(cls, x: int, y: int) -> "EveInput":
        return cls("pair", (int(x), int(y)))


@dataclass(frozen=True, eq=False)
class GuessingGame:
    """Three-player game built from a two-player free game.

    ``joint`` is the full question distribution as a mapping
    ``(x, y, eve) -> probability`` where ``eve`` is ``(x, y)`` or ``None``
    for the anchor. :func:`build_guessing_game` fills it in; a hand-built
    distribution can be passed to exercise :func:`anchoring_check`.
    """

    base: TwoPlayerFreeGame
    common_bits: CommonBitMaps
    eta: Fraction
    eve_condition: str = GUESS_COMMON_BIT
    joint: Mapping[tuple, Fraction] = field(default=None)

    @property
    def eve_alphabet(self) -> int:
        return 2 if self.eve_condition == GUESS_COMMON_BIT else self.base.shape[2]


def build_guessing_game(
    base: TwoPlayerFreeGame,
    common_bits: CommonBitMaps,
    eta: Rational,
    eve_condition: str = GUESS_COMMON_BIT,
) -> GuessingGame:
    eta = as_fraction(eta)
    if not 0 < eta <= 1:
        raise DomainError(f"eta must lie in (0, 1], got {eta}")
    if eve_condition not in EVE_CONDITIONS:
        raise DomainError(f"unknown Eve condition {eve_condition!r}")
    if eve_condition == GUESS_COMMON_BIT and not common_bits.matches(base):
        raise DomainError("common-bit maps disagree on a winning tuple")
    joint = {}
    for xi, px in enumerate(base.alice_input_dist):
        for yi, py in enumerate(base.bob_input_dist):
            joint[(xi, yi, ANCHOR)] = px * py * eta
            joint[(xi, yi, (xi, yi))] = px * py * (1 - eta)
    return GuessingGame(base, common_bits, eta, eve_condition, joint)


def guessing_predicate(g: GuessingGame, x: int, y: int, eve_in: EveInput, a: int, b: int, e: int) -> bool:
    """Win condition on positions: base predicate and Eve's guess if she had input."""
    nx, ny, na, nb = g.base.shape
    if not (0 <= x < nx and 0 <= y < ny and 0 <= a < na and 0 <= b < nb):
        raise DomainError("input or output position out of range")
    if not 0 <= e < g.eve_alphabet:
        raise DomainError(f"Eve guess {e} outside her alphabet")
    if eve_in.tag == "pair" and eve_in.pair != (x, y):
        raise DomainError("Eve's pair input must equal the players' inputs")
    if not g.base.table[x, y, a, b]:
        return False
    if eve_in.tag == "anchor":
        return True
    if g.eve_condition == GUESS_FULL_OUTPUT:
        return e == a
    return e == g.common_bits.f(x, y, a)


@dataclass(frozen=True)
class ClassicalEveStrategy:
    """Possibly randomized classical Eve.

    ``on_pair[(x, y)]`` and ``on_anchor`` are distributions over guesses,
    given as ``{guess: probability}``.
    """

    on_pair: Mapping[tuple[int, int], Mapping[int, Fraction]]
    on_anchor: Mapping[int, Fraction]

    @classmethod
    def deterministic(cls, guesses: Mapping[tuple[int, int], int], anchor_guess: int = 0) -> "ClassicalEveStrategy":
        return cls({k: {int(v): Fraction(1)} for k, v in guesses.items()}, {int(anchor_guess): Fraction(1)})

    @classmethod
    def uniform(cls, g: GuessingGame) -> "ClassicalEveStrategy":
        nx, ny, _, _ = g.base.shape
        k = g.eve_alphabet
        dist = {e: Fraction(1, k) for e in range(k)}
        return cls({(x, y): dict(dist) for x in range(nx) for y in range(ny)}, dict(dist))

    @classmethod
    def predicting(cls, g: GuessingGame, pair: DeterministicStrategyPair) -> "ClassicalEveStrategy":
        """Eve who knows Alice's deterministic map and answers accordingly."""
        nx, ny, _, _ = g.base.shape
        guesses = {}
        for x in range(nx):
            for y in range(ny):
                a = pair.alice_map[x]
                guesses[(x, y)] = a if g.eve_condition == GUESS_FULL_OUTPUT else g.common_bits.f(x, y, a)
        return cls.deterministic(guesses)

    def validate(self, g: GuessingGame) -> None:
        nx, ny, _, _ = g.base.shape
        dists = [self.on_anchor] + [self.on_pair.get((x, y)) for x in range(nx) for y in range(ny)]
        for dist in dists:
            if dist is None:
                raise MalformedStrategyError("Eve strategy is not total on the input pairs")
            if any(not 0 <= e < g.eve_alphabet for e in dist) or any(p < 0 for p in dist.values()):
                raise MalformedStrategyError("Eve guess outside alphabet or negative weight")
            if abs(sum(dist.values()) - 1) > 1e-12:
                raise MalformedStrategyError("Eve guess distribution does not sum to 1")


def anchoring_check(g: GuessingGame) -> bool:
    """True iff the anchor has probability eta independently of ``(x, y)``.

    Also requires that the ``(x, y)`` marginal is the base product
    distribution and that a non-anchor question always reveals the actual
    input pair.
    """
    base = g.base
    marg: dict[tuple[int, int], Fraction] = {}
    anchor: dict[tuple[int, int], Fraction] = {}
    for (x, y, eve), p in g.joint.items():
        p = as_fraction(p)
        if p < 0:
            return False
        marg[(x, y)] = marg.get((x, y), Fraction(0)) + p
        if eve is ANCHOR:
            anchor[(x, y)] = anchor.get((x, y), Fraction(0)) + p
        elif tuple(eve) != (x, y) and p > 0:
            return False
    nx, ny, _, _ = base.shape
    for x in range(nx):
        for y in range(ny):
            pxy = base.alice_input_dist[x] * base.bob_input_dist[y]
            if marg.get((x, y), Fraction(0)) != pxy:
                return False
            if anchor.get((x, y), Fraction(0)) != g.eta * pxy:
                return False
    return sum(anchor.values(), Fraction(0)) == g.eta


# Values -------------------------------------------------------------------

def guessing_strategy_count(g: GuessingGame) -> int:
    nx, ny, na, nb = g.base.shape
    k = g.eve_alphabet
    return na**nx * nb**ny * k ** (nx * ny) * k


def best_guessing_triple(
    g: GuessingGame, guard: int = ENUMERATION_GUARD
) -> tuple[Fraction, DeterministicStrategyPair, ClassicalEveStrategy]:
    """Exact classical guessing value with an optimal deterministic triple.

    Every (Alice, Bob, Eve-on-pairs, Eve-on-anchor) combination is scored;
    the anchor guess never affects the outcome but is still enumerated so
    the count matches the full strategy space.
    """
    count = guessing_strategy_count(g)
    if count > guard:
        raise CapacityError(f"{count} deterministic triples exceed the enumeration guard {guard}")
    base = g.base
    nx, ny, na, nb = base.shape
    k = g.eve_alphabet
    weights, denom = base.input_weights()
    en, ed = g.eta.numerator, g.eta.denominator
    pairs = nx * ny
    # eve_maps[m, p] = guess at pair index p = x * ny + y
    eve_maps = _alice_maps(pairs, k, 0, k**pairs)
    xs = np.repeat(np.arange(nx), ny)
    ys = np.tile(np.arange(ny), nx)
    w = weights[xs, ys]
    alice_maps = _alice_maps(nx, na, 0, na**nx)
    bob_maps = _alice_maps(ny, nb, 0, nb**ny)
    best_num, best = -1, None
    for amap in alice_maps:
        a_at = amap[xs]
        target = a_at if g.eve_condition == GUESS_FULL_OUTPUT else g.common_bits.f_table[xs, ys, a_at]
        correct = eve_maps == target[None, :]
        for bmap in bob_maps:
            wins = base.table[xs, ys, a_at, bmap[ys]]
            # scaled value: sum_p w_p * win_p * (eta + (1 - eta) * correct_p) * ed
            scores = (w * wins * (en + (ed - en) * correct)).sum(axis=1)
            m = int(scores.argmax())
            if scores[m] > best_num:
                best_num = int(scores[m])
                best = (amap.copy(), bmap.copy(), eve_maps[m].copy())
    amap, bmap, emap = best
    pair = DeterministicStrategyPair(tuple(int(v) for v in amap), tuple(int(v) for v in bmap))
    eve = ClassicalEveStrategy.deterministic(
        {(int(xs[p]), int(ys[p])): int(emap[p]) for p in range(pairs)}, anchor_guess=0
    )
    return Fraction(best_num, denom * ed), pair, eve


def classical_guessing_value(g: GuessingGame, guard: int = ENUMERATION_GUARD) -> Fraction:
    return best_guessing_triple(g, guard)[0]


def _eve_correct_prob(g: GuessingGame, eve: ClassicalEveStrategy, x: int, y: int, a: int):
    target = a if g.eve_condition == GUESS_FULL_OUTPUT else g.common_bits.f(x, y, a)
    return eve.on_pair[(x, y)].get(target, 0)


def strategy_guessing_value(
    g: GuessingGame,
    ab_strategy: QuantumStrategy | DeterministicStrategyPair,
    eve: ClassicalEveStrategy,
):
    """Exact winning probability of fixed Alice/Bob and Eve strategies.

    Deterministic Alice/Bob give an exact :class:`Fraction`; a quantum
    strategy gives a float from the Born-rule table.
    """
    eve.validate(g)
    base = g.base
    nx, ny, na, nb = base.shape
    if isinstance(ab_strategy, DeterministicStrategyPair):
        if len(ab_strategy.alice_map) != nx or len(ab_strategy.bob_map) != ny:
            raise MalformedStrategyError("strategy pair does not cover the game inputs")
        total = Fraction(0)
        for x in range(nx):
            for y in range(ny):
                a, b = ab_strategy.alice_map[x], ab_strategy.bob_map[y]
                if not base.table[x, y, a, b]:
                    continue
                pxy = base.alice_input_dist[x] * base.bob_input_dist[y]
                total += pxy * (g.eta + (1 - g.eta) * as_fraction(_eve_correct_prob(g, eve, x, y, a)))
        return total
    if isinstance(ab_strategy, QuantumStrategy):
        probs = game_distribution(ab_strategy, None, base)
        pin = base.input_probabilities()
        eta = float(g.eta)
        total = 0.0
        for x in range(nx):
            for y in range(ny):
                for a in range(na):
                    pa_win = float((probs[x, y, a] * base.table[x, y, a]).sum())
                    if pa_win == 0.0:
                        continue
                    c = float(_eve_correct_prob(g, eve, x, y, a))
                    total += pin[x, y] * pa_win * (eta + (1 - eta) * c)
        return total
    raise MalformedStrategyError(f"unsupported strategy type {type(ab_strategy).__name__}")


@dataclass(frozen=True)
class ImmunizationConstants:
    """Working value of ``C*`` together with what has been certified.

    ``lower_bound_on_omega_star`` is the best strategy value evaluated so
    far; ``c_star_upper_bound = 1 - lower_bound_on_omega_star``. No upper
    bound on the entangled value is computed, so
    ``upper_bound_on_omega_star`` stays 1.
    """

    c_star_ms: Fraction | None
    lower_bound_on_omega_star: Fraction | float
    upper_bound_on_omega_star: Fraction | float
    c_star_upper_bound: Fraction | float


def c_star_bounds(
    values: Iterable[Fraction | float], working_value: Rational | None = DEFAULT_C_STAR
) -> ImmunizationConstants:
    """Certified range for ``C*`` from evaluated strategy values.

    ``working_value=None`` skips the range check and records no working
    value, e.g. for a game whose classical value is already 1.
    """
    values = list(values)
    if not values:
        raise ValueError("c_star_bounds needs at least one evaluated strategy value")
    if any(not 0 <= v <= 1 for v in values):
        raise DomainError("strategy values must be probabilities")
    lower = max(values)
    upper_c = 1 - lower
    working = None if working_value is None else as_fraction(working_value)
    if working is not None and not 0 < working <= upper_c:
        raise DomainError(f"working C* = {working} is not in the certified range (0, {upper_c}]")
    return ImmunizationConstants(working, lower, Fraction(1) if isinstance(lower, Fraction) else 1.0, upper_c)
