"""Small helpers: exact rational parsing and named random streams."""

from __future__ import annotations

import hashlib
import json
import zlib
from fractions import Fraction
from typing import Any

import numpy as np

Rational = Fraction | int | float | str


def as_fraction(value: Rational) -> Fraction:
    """Convert ``value`` to an exact :class:`Fraction`.

    Strings may be ``"p/q"`` or decimal literals. Floats go through their
    shortest ``repr`` so that ``0.1`` becomes ``1/10`` rather than the
    binary expansion of the double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise ValueError(f"not a finite number: {value!r}")
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational")


def fraction_pair(value: Fraction) -> list[int]:
    return [value.numerator, value.denominator]


def _stage_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream(master_seed: int, index: int, label: str) -> np.random.Generator:
    """Counter-based generator for one (seed, run index, stage) triple.

    Each stage of each run gets its own Philox key, so any single stage can
    be replayed without drawing the others.
    """
    if master_seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(index), _stage_key(label)])
    return np.random.Generator(np.random.Philox(ss))


def stable_hash(payload: Any) -> str:
    """Short sha256 of a JSON-serializable payload with sorted keys."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
