"""Parallel DIQKD protocol runner built on the Magic Square game.

One run goes through six stages:

1. Alice and Bob draw ``n`` independent inputs each.
2. Alice picks ``S`` (each round kept with probability ``1 - eta``) and the
   pair exchange ``(S, x_S)`` / ``y_S`` over the public channel.
3-4. Both full input strings go to the device in one call; it returns both
   output strings. A device may correlate its answers across rounds.
5. Alice picks ``T`` inside ``S`` of size ``ceil(gamma n)`` (size abort if
   ``|S| <= ceil(gamma n)``), outputs on ``T`` are exchanged and the run
   aborts when fewer than ``(1 - epsilon)|T|`` test rounds are won.
6. Raw keys are the common bits ``f(x_i, y_i, a_i)`` / ``g(x_i, y_i, b_i)``
   on ``S`` (or on ``S \\ T``).

Rounds are indexed from 0. Every stage draws from its own named stream so a
single stage can be replayed in isolation. Eve only ever receives an
:class:`EveView`, which holds exactly the public messages.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import toeplitz

from ._util import Rational, as_fraction, stable_hash, stream
from .errors import DegenerateStatisticsError, DomainError
from .games import CommonBitMaps, DeterministicStrategyPair, TwoPlayerFreeGame, best_strategy, magic_square
from .quantum import NoiseModel, QuantumStrategy, calibrate_noise, game_distribution, ideal_ms_strategy, sample_rounds
from .repetition import RoundLedger

MS_GAME, MS_MAPS = magic_square()

NO_ABORT = "none"
SIZE_ABORT = "size_check"
TEST_ABORT = "test_check"


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    eta: Fraction = Fraction(1, 8)
    gamma: Fraction = Fraction(1, 4)
    epsilon: Fraction = Fraction(1, 10)
    master_seed: int = 0
    exclude_test_rounds_from_key: bool = True

    def __post_init__(self) -> None:
        for name in ("eta", "gamma", "epsilon"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not 0 <= self.eta < 1:
            raise DomainError(f"eta must lie in [0, 1), got {self.eta}")
        if not 0 < self.gamma <= Fraction(1, 2):
            raise DomainError(f"gamma must lie in (0, 1/2], got {self.gamma}")
        if not 0 <= self.epsilon <= Fraction(1, 2):
            raise DomainError(f"epsilon must lie in [0, 1/2], got {self.epsilon}")
        if not 0 <= self.master_seed < 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")

    @property
    def test_size(self) -> int:
        return math.ceil(self.gamma * self.n)

    def parameters(self) -> dict:
        """Public protocol parameters, without the seed."""
        return {
            "n": self.n,
            "eta": str(self.eta),
            "gamma": str(self.gamma),
            "epsilon": str(self.epsilon),
            "exclude_test_rounds_from_key": self.exclude_test_rounds_from_key,
        }

    def config_hash(self) -> str:
        return stable_hash(self.parameters())


# Devices ------------------------------------------------------------------

class Device:
    """Untrusted device: maps full input strings to full output strings."""

    kind = "abstract"

    def respond(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


class QuantumDevice(Device):
    """Rounds answered independently from a (possibly noisy) quantum strategy."""

    def __init__(self, strategy: QuantumStrategy | None = None, noise: NoiseModel | None = None):
        self.strategy = strategy or ideal_ms_strategy()
        self.noise = noise or NoiseModel()
        self.kind = "ideal_quantum" if self.noise.kind == "none" or self.noise.q == 0 else "noisy_quantum"
        self._table = game_distribution(self.strategy, self.noise, MS_GAME)

    @classmethod
    def calibrated(cls, target_win: float) -> "QuantumDevice":
        return cls(noise=NoiseModel.depolarizing(calibrate_noise(target_win)))

    def respond(self, x, y, rng):
        return sample_rounds(self._table, x, y, rng)

    def describe(self) -> dict:
        return {"kind": self.kind, "q": self.noise.q}


class ClassicalDevice(Device):
    """Fixed deterministic strategy pair, applied to every round."""

    kind = "deterministic_classical"

    def __init__(self, pair: DeterministicStrategyPair | None = None):
        self.pair = pair or best_strategy(MS_GAME)[1]
        self._alice = np.array(self.pair.alice_map)
        self._bob = np.array(self.pair.bob_map)

    def respond(self, x, y, rng):
        return self._alice[x], self._bob[y]

    def alice_table(self, rounds: np.ndarray) -> np.ndarray:
        """Alice's output map for each requested round, shape (len(rounds), |X|)."""
        return np.broadcast_to(self._alice, (len(rounds), len(self._alice)))

    def describe(self) -> dict:
        return {"kind": self.kind, "alice_map": list(self.pair.alice_map), "bob_map": list(self.pair.bob_map)}


class CorrelatedDevice(Device):
    """Round-indexed deterministic tables: round ``i`` uses row ``i``."""

    kind = "custom_correlated"

    def __init__(self, alice_tables: np.ndarray, bob_tables: np.ndarray):
        self.alice_tables = np.asarray(alice_tables, dtype=np.int64)
        self.bob_tables = np.asarray(bob_tables, dtype=np.int64)
        if self.alice_tables.shape[0] != self.bob_tables.shape[0]:
            raise DomainError("Alice and Bob tables cover different numbers of rounds")

    def respond(self, x, y, rng):
        n = len(x)
        if n != self.alice_tables.shape[0]:
            raise DomainError(f"device built for {self.alice_tables.shape[0]} rounds, got {n}")
        rounds = np.arange(n)
        return self.alice_tables[rounds, x], self.bob_tables[rounds, y]

    def alice_table(self, rounds: np.ndarray) -> np.ndarray:
        return self.alice_tables[rounds]

    def describe(self) -> dict:
        return {"kind": self.kind, "rounds": int(self.alice_tables.shape[0])}


# Eve ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EveView:
    """Everything sent over the public channel in one run, and nothing more."""

    n: int
    eta: Fraction
    gamma: Fraction
    epsilon: Fraction
    exclude_test_rounds_from_key: bool
    S: np.ndarray
    x_S: np.ndarray
    y_S: np.ndarray
    T: np.ndarray
    a_T: np.ndarray
    b_T: np.ndarray

    @property
    def key_indices(self) -> np.ndarray:
        if self.exclude_test_rounds_from_key:
            return np.setdiff1d(self.S, self.T)
        return self.S

    def leaked_inputs(self, rounds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pos = np.searchsorted(self.S, rounds)
        return self.x_S[pos], self.y_S[pos]


class Eve:
    kind = "abstract"

    def guess(self, view: EveView, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


class RandomGuessEve(Eve):
    kind = "random_guess"

    def guess(self, view, rng):
        return rng.integers(0, 2, size=len(view.key_indices), dtype=np.uint8)


class PredictFromLeakEve(Eve):
    """Applies a classical predictor to the leaked input pair of each key round.

    The default predictor assumes the devices play the canonical optimal
    deterministic strategy and outputs its common bit.
    """

    kind = "predict_from_leak"

    def __init__(self, predictor: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None):
        if predictor is None:
            alice = np.array(best_strategy(MS_GAME)[1].alice_map)
            f = MS_MAPS.f_table

            def predictor(x, y):
                return f[x, y, alice[x]]

        self.predictor = predictor

    def guess(self, view, rng):
        x, y = view.leaked_inputs(view.key_indices)
        return np.asarray(self.predictor(x, y), dtype=np.uint8)


class OmniscientClassicalEve(Eve):
    """Knows the deterministic tables inside the device.

    From the leaked ``x_i`` she reconstructs ``a_i`` and hence the key bit
    ``f(x_i, y_i, a_i)`` on every round of ``S``.
    """

    kind = "omniscient_classical"

    def __init__(self, device: ClassicalDevice | CorrelatedDevice):
        if not hasattr(device, "alice_table"):
            raise DomainError("omniscient Eve needs a device with deterministic tables")
        self.device = device

    def guess(self, view, rng):
        rounds = view.key_indices
        x, y = view.leaked_inputs(rounds)
        tables = self.device.alice_table(rounds)
        a = tables[np.arange(len(rounds)), x]
        return MS_MAPS.f_table[x, y, a].astype(np.uint8)


# Stages -------------------------------------------------------------------

def select_S(n: int, eta: Rational, rng: np.random.Generator) -> np.ndarray:
    """Each round kept independently with probability ``1 - eta``."""
    keep = 1 - float(as_fraction(eta))
    return np.flatnonzero(rng.random(n) < keep)


def select_T(S: np.ndarray, gamma: Rational, n: int, rng: np.random.Generator) -> np.ndarray | None:
    """Uniform subset of ``S`` of size ``ceil(gamma n)``; ``None`` means size abort."""
    k = math.ceil(as_fraction(gamma) * n)
    S = np.asarray(S)
    if len(S) <= k:
        return None
    return np.sort(rng.choice(S, size=k, replace=False))


def test_check(
    x_T: np.ndarray,
    y_T: np.ndarray,
    a_T: np.ndarray,
    b_T: np.ndarray,
    epsilon: Rational,
    game: TwoPlayerFreeGame = MS_GAME,
) -> tuple[bool, int]:
    """Return ``(passed, wins)``; passes iff ``wins >= (1 - epsilon)|T|``."""
    sizes = {len(x_T), len(y_T), len(a_T), len(b_T)}
    if len(sizes) != 1:
        raise DomainError("test-round arrays are not aligned")
    wins = int(game.table[np.asarray(x_T), np.asarray(y_T), np.asarray(a_T), np.asarray(b_T)].sum())
    size = sizes.pop()
    return wins >= (1 - as_fraction(epsilon)) * size, wins


# keep pytest from collecting the stage function as a test
test_check.__test__ = False


def key_indices(S: np.ndarray, T: np.ndarray | None, config: ProtocolConfig) -> np.ndarray:
    S = np.asarray(S)
    if config.exclude_test_rounds_from_key and T is not None:
        return np.setdiff1d(S, T)
    return S


def extract_raw_keys(
    x: np.ndarray,
    y: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    S: np.ndarray,
    T: np.ndarray | None,
    config: ProtocolConfig,
    maps: CommonBitMaps = MS_MAPS,
    indices: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Alice's ``f(x_i, y_i, a_i)`` and Bob's ``g(x_i, y_i, b_i)`` on the key rounds."""
    if indices is None:
        indices = key_indices(S, T, config)
    indices = np.asarray(indices, dtype=np.int64)
    if not np.isin(indices, S).all():
        raise DomainError("key rounds must lie in S")
    xi, yi = x[indices], y[indices]
    k_a = maps.f_table[xi, yi, a[indices]].astype(np.uint8)
    k_b = maps.g_table[xi, yi, b[indices]].astype(np.uint8)
    return k_a, k_b


@dataclass(frozen=True, eq=False)
class Transcript:
    S: np.ndarray
    x_S: np.ndarray
    y_S: np.ndarray
    T: np.ndarray
    a_T: np.ndarray
    b_T: np.ndarray
    abort_stage: str
    test_win_count: int

    def to_dict(self) -> dict:
        return {
            "S": self.S.tolist(),
            "x_S": self.x_S.tolist(),
            "y_S": self.y_S.tolist(),
            "T": self.T.tolist(),
            "a_T": self.a_T.tolist(),
            "b_T": self.b_T.tolist(),
            "abort_stage": self.abort_stage,
            "test_win_count": self.test_win_count,
        }


@dataclass(frozen=True, eq=False)
class RunResult:
    """Outcome of one run.

    ``x, y, a, b`` are the private strings, kept for auditing the
    simulation; only ``transcript`` was public.
    """

    config: ProtocolConfig
    run_index: int
    transcript: Transcript
    key_indices: np.ndarray
    K_A: np.ndarray
    K_B: np.ndarray
    eve_guess: np.ndarray
    wins: np.ndarray
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    @property
    def aborted(self) -> bool:
        return self.transcript.abort_stage != NO_ABORT

    @property
    def per_round_wins(self) -> RoundLedger:
        return RoundLedger(tuple(self.wins.tolist()))

    @property
    def disagreements(self) -> int:
        return int((self.K_A != self.K_B).sum())

    @property
    def eve_correct(self) -> int:
        return int((self.eve_guess == self.K_A).sum())

    def record(self) -> dict:
        """Flat per-run summary used in run files."""
        t = self.transcript
        return {
            "config_hash": self.config.config_hash(),
            "seed": self.config.master_seed,
            "run_index": self.run_index,
            "abort_stage": t.abort_stage,
            "S_size": int(len(t.S)),
            "T_size": int(len(t.T)),
            "test_wins": t.test_win_count,
            "key_length": int(len(self.K_A)),
            "eve_correct_bits": self.eve_correct,
            "eve_whole_key": bool(len(self.K_A) == self.eve_correct and not self.aborted),
            "disagreements": self.disagreements,
            "losing_rounds": int((~self.wins).sum()),
        }


def _sample_inputs(game: TwoPlayerFreeGame, n: int, master_seed: int, run_index: int):
    nx, ny, _, _ = game.shape
    px = np.array([float(p) for p in game.alice_input_dist])
    py = np.array([float(p) for p in game.bob_input_dist])
    x = stream(master_seed, run_index, "alice_inputs").choice(nx, size=n, p=px)
    y = stream(master_seed, run_index, "bob_inputs").choice(ny, size=n, p=py)
    return x, y


def run_protocol(config: ProtocolConfig, device: Device, eve: Eve, run_index: int = 0) -> RunResult:
    """Execute one run; aborts are recorded in the transcript, never raised."""
    seed, n = config.master_seed, config.n
    empty = np.zeros(0, dtype=np.int64)

    x, y = _sample_inputs(MS_GAME, n, seed, run_index)
    S = select_S(n, config.eta, stream(seed, run_index, "select_S"))
    a, b = device.respond(x, y, stream(seed, run_index, "device"))
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != (n,) or b.shape != (n,):
        raise DomainError("device must return exactly one output per round per party")
    wins = MS_GAME.table[x, y, a, b]

    T = select_T(S, config.gamma, n, stream(seed, run_index, "select_T"))
    if T is None:
        transcript = Transcript(S, x[S], y[S], empty, empty, empty, SIZE_ABORT, 0)
    else:
        passed, test_wins = test_check(x[T], y[T], a[T], b[T], config.epsilon)
        stage = NO_ABORT if passed else TEST_ABORT
        transcript = Transcript(S, x[S], y[S], T, a[T], b[T], stage, test_wins)

    if transcript.abort_stage != NO_ABORT:
        blank = np.zeros(0, dtype=np.uint8)
        return RunResult(config, run_index, transcript, empty, blank, blank, blank, wins, x, y, a, b)

    idx = key_indices(S, T, config)
    k_a, k_b = extract_raw_keys(x, y, a, b, S, T, config, indices=idx)
    view = EveView(
        n,
        config.eta,
        config.gamma,
        config.epsilon,
        config.exclude_test_rounds_from_key,
        transcript.S,
        transcript.x_S,
        transcript.y_S,
        transcript.T,
        transcript.a_T,
        transcript.b_T,
    )
    guess = np.asarray(eve.guess(view, stream(seed, run_index, "eve")), dtype=np.uint8)
    if guess.shape != k_a.shape:
        raise DomainError("Eve must output one guess per key bit")
    return RunResult(config, run_index, transcript, idx, k_a, k_b, guess, wins, x, y, a, b)


def run_many(
    config: ProtocolConfig, device: Device, eve: Eve, runs: int, workers: int = 1
) -> list[RunResult]:
    """Runs ``0 .. runs-1`` in index order regardless of ``workers``."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if workers <= 1:
        return [run_protocol(config, device, eve, i) for i in range(runs)]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda i: run_protocol(config, device, eve, i), range(runs)))


def run_records(config: ProtocolConfig, device: Device, eve: Eve, runs: int, workers: int = 1) -> list[dict]:
    """Like :func:`run_many` but keeps only the flat per-run records."""
    if runs < 1:
        raise ValueError("runs must be at least 1")

    def one(i):
        return run_protocol(config, device, eve, i).record()

    if workers <= 1:
        return [one(i) for i in range(runs)]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(one, range(runs)))


@dataclass(frozen=True)
class GuessingStats:
    """Eve's success conditioned on the run not aborting."""

    config_hash: str
    runs: int
    accepted: int
    acceptance_rate: float
    key_bits: int
    per_bit_success: float
    whole_string_successes: int
    whole_string_success: float
    min_entropy_floor: float
    mean_key_length: float
    disagreement_rate: float
    conditioned_on: str = "non-abort"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize_records(records: Sequence[dict]) -> GuessingStats:
    if not records:
        raise ValueError("no run records to summarize")
    hashes = {r["config_hash"] for r in records}
    if len(hashes) != 1:
        raise DomainError("records come from different configurations")
    accepted = [r for r in records if r["abort_stage"] == NO_ABORT]
    if not accepted:
        raise DegenerateStatisticsError(f"all {len(records)} runs aborted")
    bits = sum(r["key_length"] for r in accepted)
    correct = sum(r["eve_correct_bits"] for r in accepted)
    whole = sum(1 for r in accepted if r["eve_whole_key"])
    freq = whole / len(accepted)
    return GuessingStats(
        config_hash=hashes.pop(),
        runs=len(records),
        accepted=len(accepted),
        acceptance_rate=len(accepted) / len(records),
        key_bits=bits,
        per_bit_success=correct / bits if bits else float("nan"),
        whole_string_successes=whole,
        whole_string_success=freq,
        min_entropy_floor=max(0.0, -math.log2(freq)) if freq > 0 else math.inf,
        mean_key_length=bits / len(accepted),
        disagreement_rate=sum(r["disagreements"] for r in accepted) / bits if bits else 0.0,
    )


def empirical_guessing_probability(
    config: ProtocolConfig, device: Device, eve: Eve, runs: int, workers: int = 1
) -> GuessingStats:
    """Per-bit and whole-string guessing frequencies over accepted runs.

    ``min_entropy_floor`` is ``-log2`` of the whole-string success
    frequency; it is infinite when Eve never guessed a whole key.
    """
    return summarize_records(run_records(config, device, eve, runs, workers))


# Privacy amplification ------------------------------------------------------

def privacy_amplify(key: Sequence[int], out_len: int, seed: int) -> np.ndarray:
    """Toeplitz hash ``T @ key`` over GF(2) with ``T`` drawn from ``seed``.

    ``T[i, j] = r[i - j + n - 1]`` for a seeded bit string ``r`` of length
    ``out_len + n - 1``.
    """
    k = np.asarray(key, dtype=np.int64)
    n = len(k)
    if out_len < 0 or out_len > n:
        raise DomainError(f"output length {out_len} not in [0, {n}]")
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    r = np.random.default_rng(seed).integers(0, 2, size=out_len + n - 1)
    matrix = toeplitz(r[n - 1 :], r[n - 1 :: -1])
    return ((matrix @ k) % 2).astype(np.uint8)
