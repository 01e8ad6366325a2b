"""Two-player free games, the Magic Square game and exact classical values.

Internally everything is index based: a game stores its label tuples and a
boolean truth table ``table[x, y, a, b]`` over input/output positions. The
label-facing helpers (:func:`evaluate_predicate`, JSON loading) translate
labels to positions and reject anything outside the declared sets.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Hashable, Iterator, Sequence

import numpy as np

from ._util import as_fraction, fraction_pair
from .errors import CapacityError, DomainError

ENUMERATION_GUARD = 10**8


@dataclass(frozen=True, eq=False)
class TwoPlayerFreeGame:
    """A two-player game with a product input distribution.

    Parameters
    ----------
    alice_inputs, bob_inputs, alice_outputs, bob_outputs : sequence
        Label sets. Labels must be hashable and distinct.
    alice_input_dist, bob_input_dist : sequence of rationals
        Marginal input distributions; each must sum to exactly 1.
    table : array_like of bool, shape (|X|, |Y|, |A|, |B|)
        The win predicate as an explicit truth table.
    name : str
        Free-form identifier used in reports.
    """

    alice_inputs: tuple
    bob_inputs: tuple
    alice_outputs: tuple
    bob_outputs: tuple
    alice_input_dist: tuple[Fraction, ...]
    bob_input_dist: tuple[Fraction, ...]
    table: np.ndarray
    name: str = "game"
    _index: dict = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for attr in ("alice_inputs", "bob_inputs", "alice_outputs", "bob_outputs"):
            labels = tuple(getattr(self, attr))
            if not labels:
                raise DomainError(f"{attr} must be non-empty")
            if len(set(labels)) != len(labels):
                raise DomainError(f"{attr} contains duplicate labels")
            object.__setattr__(self, attr, labels)
        for attr, labels in (("alice_input_dist", self.alice_inputs), ("bob_input_dist", self.bob_inputs)):
            dist = tuple(as_fraction(p) for p in getattr(self, attr))
            if len(dist) != len(labels):
                raise DomainError(f"{attr} has {len(dist)} entries for {len(labels)} inputs")
            if any(p < 0 for p in dist):
                raise DomainError(f"{attr} has a negative entry")
            if sum(dist) != 1:
                raise DomainError(f"{attr} sums to {sum(dist)}, not 1")
            object.__setattr__(self, attr, dist)
        table = np.array(self.table, dtype=bool)
        if table.shape != self.shape:
            raise DomainError(f"predicate table has shape {table.shape}, expected {self.shape}")
        table.flags.writeable = False
        object.__setattr__(self, "table", table)
        index = {
            role: {label: i for i, label in enumerate(labels)}
            for role, labels in (
                ("x", self.alice_inputs),
                ("y", self.bob_inputs),
                ("a", self.alice_outputs),
                ("b", self.bob_outputs),
            )
        }
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_predicate(
        cls,
        alice_inputs: Sequence,
        bob_inputs: Sequence,
        alice_outputs: Sequence,
        bob_outputs: Sequence,
        predicate: Callable[[Any, Any, Any, Any], bool],
        alice_input_dist: Sequence | None = None,
        bob_input_dist: Sequence | None = None,
        name: str = "game",
    ) -> "TwoPlayerFreeGame":
        """Tabulate ``predicate`` over every tuple; uniform inputs by default."""
        table = np.array(
            [
                [[[bool(predicate(x, y, a, b)) for b in bob_outputs] for a in alice_outputs] for y in bob_inputs]
                for x in alice_inputs
            ],
            dtype=bool,
        ).reshape(len(alice_inputs), len(bob_inputs), len(alice_outputs), len(bob_outputs))
        if alice_input_dist is None:
            alice_input_dist = [Fraction(1, len(alice_inputs))] * len(alice_inputs)
        if bob_input_dist is None:
            bob_input_dist = [Fraction(1, len(bob_inputs))] * len(bob_inputs)
        return cls(
            tuple(alice_inputs),
            tuple(bob_inputs),
            tuple(alice_outputs),
            tuple(bob_outputs),
            tuple(alice_input_dist),
            tuple(bob_input_dist),
            table,
            name,
        )

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (
            len(self.alice_inputs),
            len(self.bob_inputs),
            len(self.alice_outputs),
            len(self.bob_outputs),
        )

    def index(self, role: str, label: Hashable) -> int:
        """Position of ``label`` in the set named by ``role`` (one of x, y, a, b)."""
        try:
            return self._index[role][label]
        except KeyError:
            raise DomainError(f"{label!r} is not a valid {role} for game {self.name!r}") from None
        except TypeError:
            raise DomainError(f"{label!r} is not a valid {role} for game {self.name!r}") from None

    def input_weights(self) -> tuple[np.ndarray, int]:
        """Integer weights ``w[x, y]`` and denominator ``d`` with ``p(x)p(y) = w/d``."""
        da = math.lcm(*(p.denominator for p in self.alice_input_dist))
        db = math.lcm(*(p.denominator for p in self.bob_input_dist))
        wa = np.array([int(p * da) for p in self.alice_input_dist], dtype=np.int64)
        wb = np.array([int(p * db) for p in self.bob_input_dist], dtype=np.int64)
        return np.outer(wa, wb), da * db

    def input_probabilities(self) -> np.ndarray:
        """Float matrix of joint input probabilities ``p(x) p(y)``."""
        pa = np.array([float(p) for p in self.alice_input_dist])
        pb = np.array([float(p) for p in self.bob_input_dist])
        return np.outer(pa, pb)


@dataclass(frozen=True, eq=False)
class CommonBitMaps:
    """Per-input-pair maps ``f[x, y, a]`` and ``g[x, y, b]`` to one bit.

    On every winning tuple the two bits coincide; that shared bit is what
    the key is built from.
    """

    f_table: np.ndarray
    g_table: np.ndarray

    def __post_init__(self) -> None:
        for attr in ("f_table", "g_table"):
            arr = np.array(getattr(self, attr), dtype=np.uint8)
            if arr.ndim != 3 or not np.isin(arr, (0, 1)).all():
                raise DomainError(f"{attr} must be a 3-d table of bits")
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)

    def f(self, x: int, y: int, a: int) -> int:
        return int(self.f_table[x, y, a])

    def g(self, x: int, y: int, b: int) -> int:
        return int(self.g_table[x, y, b])

    def matches(self, game: TwoPlayerFreeGame) -> bool:
        """Check that ``f = g`` on every winning tuple of ``game``."""
        nx, ny, na, nb = game.shape
        if self.f_table.shape != (nx, ny, na) or self.g_table.shape != (nx, ny, nb):
            return False
        agree = self.f_table[:, :, :, None] == self.g_table[:, :, None, :]
        return bool(np.all(agree | ~game.table))


@dataclass(frozen=True)
class DeterministicStrategyPair:
    """Output positions chosen by each player for each input position."""

    alice_map: tuple[int, ...]
    bob_map: tuple[int, ...]


# Magic Square -----------------------------------------------------------

def _parity_triples(parity: int) -> tuple[tuple[int, int, int], ...]:
    # two free bits in lexicographic order, third bit fixes the parity
    return tuple((b0, b1, b0 ^ b1 ^ parity) for b0, b1 in itertools.product((0, 1), repeat=2))


MS_ALICE_OUTPUTS = _parity_triples(0)
MS_BOB_OUTPUTS = _parity_triples(1)


def magic_square() -> tuple[TwoPlayerFreeGame, CommonBitMaps]:
    """The Mermin-Peres Magic Square game and its common-bit maps.

    Alice receives a row ``x`` and answers an even-parity triple, Bob a
    column ``y`` and an odd-parity triple. They win iff they put the same
    bit in cell ``(x, y)``: ``a[y] == b[x]``.
    """
    rows = (0, 1, 2)
    game = TwoPlayerFreeGame.from_predicate(
        rows,
        rows,
        MS_ALICE_OUTPUTS,
        MS_BOB_OUTPUTS,
        lambda x, y, a, b: a[y] == b[x],
        name="magic_square",
    )
    f = np.array([[[a[y] for a in MS_ALICE_OUTPUTS] for y in rows] for x in rows])
    g = np.array([[[b[x] for b in MS_BOB_OUTPUTS] for y in rows] for x in rows])
    return game, CommonBitMaps(f, g)


def evaluate_predicate(game: TwoPlayerFreeGame, x, y, a, b) -> bool:
    """Win predicate for labelled arguments; unknown labels raise DomainError."""
    return bool(game.table[game.index("x", x), game.index("y", y), game.index("a", a), game.index("b", b)])


# Classical value ----------------------------------------------------------

def strategy_count(game: TwoPlayerFreeGame) -> int:
    nx, ny, na, nb = game.shape
    return na**nx * nb**ny


def _check_guard(count: int, guard: int) -> None:
    if count > guard:
        raise CapacityError(f"{count} deterministic strategies exceed the enumeration guard {guard}")


def enumerate_strategies(
    game: TwoPlayerFreeGame, guard: int = ENUMERATION_GUARD
) -> Iterator[DeterministicStrategyPair]:
    """Yield every deterministic strategy pair exactly once."""
    _check_guard(strategy_count(game), guard)
    nx, ny, na, nb = game.shape
    alice_maps = list(itertools.product(range(na), repeat=nx))
    for bob_map in itertools.product(range(nb), repeat=ny):
        for alice_map in alice_maps:
            yield DeterministicStrategyPair(alice_map, bob_map)


def strategy_value(game: TwoPlayerFreeGame, pair: DeterministicStrategyPair) -> Fraction:
    """Exact winning probability of a deterministic strategy pair."""
    weights, denom = game.input_weights()
    nx, ny, _, _ = game.shape
    total = 0
    for x in range(nx):
        for y in range(ny):
            if game.table[x, y, pair.alice_map[x], pair.bob_map[y]]:
                total += int(weights[x, y])
    return Fraction(total, denom)


def _alice_maps(nx: int, na: int, start: int, stop: int) -> np.ndarray:
    # rows are base-na digit expansions of start..stop-1, most significant first
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((stop - start, nx), dtype=np.int64)
    for k in range(nx - 1, -1, -1):
        out[:, k] = idx % na
        idx //= na
    return out


def best_strategy(
    game: TwoPlayerFreeGame, guard: int = ENUMERATION_GUARD, chunk: int = 1 << 16
) -> tuple[Fraction, DeterministicStrategyPair]:
    """Optimal deterministic pair and its exact value.

    Alice's maps are enumerated; for each one Bob's best response is taken
    column by column, which is exact because his payoff separates over his
    inputs once Alice is fixed.
    """
    _check_guard(strategy_count(game), guard)
    nx, ny, na, nb = game.shape
    weights, denom = game.input_weights()
    # payoff[x, a, y, b] = w[x, y] * V(x, y, a, b)
    payoff = (game.table * weights[:, :, None, None]).transpose(0, 2, 1, 3)
    best_num, best_pair = -1, None
    total = na**nx
    for start in range(0, total, chunk):
        maps = _alice_maps(nx, na, start, min(total, start + chunk))
        # scores[m, y, b] = sum_x payoff[x, map[m, x], y, b]
        scores = payoff[np.arange(nx)[None, :], maps].sum(axis=1)
        responses = scores.argmax(axis=2)
        values = scores.max(axis=2).sum(axis=1)
        m = int(values.argmax())
        if values[m] > best_num:
            best_num = int(values[m])
            best_pair = DeterministicStrategyPair(
                tuple(int(v) for v in maps[m]), tuple(int(v) for v in responses[m])
            )
    return Fraction(best_num, denom), best_pair


def classical_value(game: TwoPlayerFreeGame, guard: int = ENUMERATION_GUARD) -> Fraction:
    """Exact classical value: max over deterministic strategy pairs."""
    return best_strategy(game, guard)[0]


# JSON ---------------------------------------------------------------------

def _label_str(label) -> str:
    if isinstance(label, tuple):
        return "".join(str(v) for v in label)
    return str(label)


def game_to_dict(game: TwoPlayerFreeGame, maps: CommonBitMaps | None = None) -> dict:
    """JSON-ready description; labels become strings."""
    doc = {
        "name": game.name,
        "alice_inputs": [_label_str(v) for v in game.alice_inputs],
        "bob_inputs": [_label_str(v) for v in game.bob_inputs],
        "alice_outputs": [_label_str(v) for v in game.alice_outputs],
        "bob_outputs": [_label_str(v) for v in game.bob_outputs],
        "alice_input_dist": [fraction_pair(p) for p in game.alice_input_dist],
        "bob_input_dist": [fraction_pair(p) for p in game.bob_input_dist],
        "predicate": game.table.astype(int).tolist(),
    }
    if maps is not None:
        doc["common_bits"] = {"f": maps.f_table.astype(int).tolist(), "g": maps.g_table.astype(int).tolist()}
    return doc


def game_from_dict(doc: dict) -> tuple[TwoPlayerFreeGame, CommonBitMaps | None]:
    try:
        game = TwoPlayerFreeGame(
            tuple(doc["alice_inputs"]),
            tuple(doc["bob_inputs"]),
            tuple(doc["alice_outputs"]),
            tuple(doc["bob_outputs"]),
            tuple(Fraction(int(n), int(d)) for n, d in doc["alice_input_dist"]),
            tuple(Fraction(int(n), int(d)) for n, d in doc["bob_input_dist"]),
            np.array(doc["predicate"], dtype=bool),
            doc.get("name", "custom"),
        )
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"malformed game document: {exc}") from exc
    maps = None
    if "common_bits" in doc:
        maps = CommonBitMaps(np.array(doc["common_bits"]["f"]), np.array(doc["common_bits"]["g"]))
        if not maps.matches(game):
            raise DomainError("common_bits do not agree on every winning tuple")
    return game, maps


def load_game(path: str | Path) -> tuple[TwoPlayerFreeGame, CommonBitMaps | None]:
    with open(path, encoding="utf-8") as fh:
        return game_from_dict(json.load(fh))


def save_game(path: str | Path, game: TwoPlayerFreeGame, maps: CommonBitMaps | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(game_to_dict(game, maps), fh, indent=2)
        fh.write("\n")
