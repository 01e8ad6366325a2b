"""Exact quantum strategies for the Magic Square game on two EPR pairs.

States are dense 16x16 density matrices (Alice's two qubits first), and
measurements are stored as local 4x4 projectors. Joint outcome tables
``P[x, y, a, b]`` are computed by contraction with the reshaped state, so
every value here is exact up to floating point; sampling only enters in
:func:`sample_round` / :func:`sample_rounds`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Sequence

import numpy as np

from .errors import DomainError, MalformedStrategyError
from .games import MS_ALICE_OUTPUTS, MS_BOB_OUTPUTS, TwoPlayerFreeGame, magic_square

STRUCT_TOL = 1e-10
PSD_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

# rows multiply to +I, columns to -I
MERMIN_PERES_GRID = (
    (np.kron(X, I2), np.kron(I2, X), np.kron(X, X)),
    (np.kron(I2, Z), np.kron(Z, I2), np.kron(Z, Z)),
    (-np.kron(X, Z), -np.kron(Z, X), np.kron(Y, Y)),
)


@dataclass(frozen=True, eq=False)
class DensityState:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise MalformedStrategyError("density matrix must be square")
        if not np.allclose(m, m.conj().T, atol=STRUCT_TOL, rtol=0):
            raise MalformedStrategyError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > STRUCT_TOL:
            raise MalformedStrategyError(f"trace is {np.trace(m).real:.12g}, not 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise MalformedStrategyError("density matrix is not positive semidefinite")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, vector: Sequence[complex]) -> "DensityState":
        v = np.asarray(vector, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityState":
        return cls(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True, eq=False)
class ProjectiveMeasurement:
    """Labelled projectors that are idempotent, orthogonal and complete."""

    outcomes: tuple[tuple[Hashable, np.ndarray], ...]

    def __post_init__(self) -> None:
        outcomes = tuple((label, np.array(p, dtype=complex)) for label, p in self.outcomes)
        if not outcomes:
            raise MalformedStrategyError("measurement has no outcomes")
        dim = outcomes[0][1].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for i, (_, p) in enumerate(outcomes):
            if p.shape != (dim, dim):
                raise MalformedStrategyError("projectors have inconsistent shapes")
            if not np.allclose(p @ p, p, atol=STRUCT_TOL, rtol=0):
                raise MalformedStrategyError("projector is not idempotent")
            if not np.allclose(p, p.conj().T, atol=STRUCT_TOL, rtol=0):
                raise MalformedStrategyError("projector is not Hermitian")
            for _, other in outcomes[i + 1 :]:
                if not np.allclose(p @ other, 0, atol=STRUCT_TOL, rtol=0):
                    raise MalformedStrategyError("projectors are not mutually orthogonal")
            total += p
        if not np.allclose(total, np.eye(dim), atol=STRUCT_TOL, rtol=0):
            raise MalformedStrategyError("projectors do not sum to the identity")
        for _, p in outcomes:
            p.flags.writeable = False
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def dim(self) -> int:
        return self.outcomes[0][1].shape[0]

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.outcomes)


@dataclass(frozen=True, eq=False)
class QuantumStrategy:
    """Shared state plus local measurements, one per input position.

    Alice's projectors act on the first tensor factor, Bob's on the second;
    the embedding ``M (x) I`` / ``I (x) M`` happens during contraction.
    """

    shared_state: DensityState
    alice_measurements: tuple[ProjectiveMeasurement, ...]
    bob_measurements: tuple[ProjectiveMeasurement, ...]

    def __post_init__(self) -> None:
        da = {m.dim for m in self.alice_measurements}
        db = {m.dim for m in self.bob_measurements}
        if len(da) != 1 or len(db) != 1:
            raise MalformedStrategyError("each player's measurements must share one local dimension")
        if da.pop() * db.pop() != self.shared_state.dim:
            raise MalformedStrategyError("local dimensions do not factor the shared state")
        for ms in (self.alice_measurements, self.bob_measurements):
            if len({m.labels for m in ms}) != 1:
                raise MalformedStrategyError("outcome labels differ between inputs")

    @property
    def local_dims(self) -> tuple[int, int]:
        return self.alice_measurements[0].dim, self.bob_measurements[0].dim


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    q: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "depolarizing"):
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.q <= 1.0:
            raise DomainError(f"noise probability {self.q} outside [0, 1]")

    @classmethod
    def depolarizing(cls, q: float) -> "NoiseModel":
        return cls("depolarizing", float(q))


NO_NOISE = NoiseModel()


def depolarize(state: DensityState, q: float) -> DensityState:
    """Return ``(1 - q) rho + q I / dim``."""
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"depolarizing probability {q} outside [0, 1]")
    if q == 0:
        return state
    return DensityState((1 - q) * state.matrix + q * np.eye(state.dim) / state.dim)


def apply_noise(state: DensityState, noise: NoiseModel | None) -> DensityState:
    if noise is None or noise.kind == "none":
        return state
    return depolarize(state, noise.q)


def _parity_projectors(observables, labels) -> ProjectiveMeasurement:
    dim = observables[0].shape[0]
    eye = np.eye(dim)
    outcomes = []
    for bits in labels:
        proj = eye.astype(complex)
        for bit, obs in zip(bits, observables):
            proj = proj @ (eye + (-1) ** bit * obs) / 2
        outcomes.append((bits, proj))
    return ProjectiveMeasurement(tuple(outcomes))


@lru_cache(maxsize=1)
def ideal_ms_strategy() -> QuantumStrategy:
    """Two EPR pairs with Mermin-Peres row/column measurements.

    Alice measures the three commuting observables of her row, Bob the
    transposes of the observables in his column (so that on
    ``|Phi+> (x) |Phi+>`` their eigenvalues on the shared cell coincide).
    Eigenvalue +1 is reported as bit 0 and -1 as bit 1.
    """
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    # qubit order A1 B1 A2 B2 -> regroup as A1 A2 B1 B2
    psi = np.kron(phi, phi).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(16)
    state = DensityState.pure(psi)
    alice = tuple(_parity_projectors(MERMIN_PERES_GRID[x], MS_ALICE_OUTPUTS) for x in range(3))
    bob = tuple(
        _parity_projectors(tuple(MERMIN_PERES_GRID[r][y].T for r in range(3)), MS_BOB_OUTPUTS)
        for y in range(3)
    )
    return QuantumStrategy(state, alice, bob)


def joint_distribution(strategy: QuantumStrategy, noise: NoiseModel | None = None) -> np.ndarray:
    """Born-rule table ``P[x, y, a, b]``; each ``P[x, y]`` sums to 1."""
    rho = apply_noise(strategy.shared_state, noise).matrix
    da, db = strategy.local_dims
    r = rho.reshape(da, db, da, db)
    pa = np.array([[p for _, p in m.outcomes] for m in strategy.alice_measurements])
    pb = np.array([[p for _, p in m.outcomes] for m in strategy.bob_measurements])
    # Tr[(P (x) Q) rho] = sum P[j, i] Q[l, k] rho[i, k, j, l]
    probs = np.einsum("xaji,yblk,ikjl->xyab", pa, pb, r, optimize=True).real
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum(axis=(2, 3), keepdims=True)


def _outcome_positions(strategy: QuantumStrategy, game: TwoPlayerFreeGame) -> tuple[list[int], list[int]]:
    a_labels = strategy.alice_measurements[0].labels
    b_labels = strategy.bob_measurements[0].labels
    nx, ny, _, _ = game.shape
    if len(strategy.alice_measurements) != nx or len(strategy.bob_measurements) != ny:
        raise MalformedStrategyError("strategy does not provide one measurement per game input")
    try:
        return [game.index("a", v) for v in a_labels], [game.index("b", v) for v in b_labels]
    except DomainError as exc:
        raise MalformedStrategyError(str(exc)) from exc


def game_distribution(
    strategy: QuantumStrategy, noise: NoiseModel | None = None, game: TwoPlayerFreeGame | None = None
) -> np.ndarray:
    """Born table re-indexed to the game's output order."""
    game = game or magic_square()[0]
    ia, ib = _outcome_positions(strategy, game)
    probs = joint_distribution(strategy, noise)
    nx, ny, _, _ = game.shape
    out = np.zeros(game.shape)
    out[np.ix_(range(nx), range(ny), ia, ib)] = probs
    return out


def win_probability(
    strategy: QuantumStrategy, noise: NoiseModel | None = None, game: TwoPlayerFreeGame | None = None
) -> float:
    """Exact winning probability of ``strategy`` under ``noise``."""
    game = game or magic_square()[0]
    probs = game_distribution(strategy, noise, game)
    per_pair = (probs * game.table).sum(axis=(2, 3))
    return float((game.input_probabilities() * per_pair).sum())


def sample_rounds(
    table: np.ndarray, x: np.ndarray, y: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one ``(a, b)`` position pair per round from ``table[x_i, y_i]``.

    Uses exactly one uniform per round, so the stream consumption depends
    only on the number of rounds.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    nb = table.shape[3]
    cdf = table.reshape(table.shape[0], table.shape[1], -1).cumsum(axis=2)
    u = rng.random(x.shape[0])
    k = (cdf[x, y] <= u[:, None]).sum(axis=1)
    k = np.minimum(k, cdf.shape[2] - 1)
    return k // nb, k % nb


def sample_round(
    strategy: QuantumStrategy,
    noise: NoiseModel | None,
    x,
    y,
    rng: np.random.Generator,
    game: TwoPlayerFreeGame | None = None,
):
    """One Born-rule sample, returned as output labels."""
    game = game or magic_square()[0]
    table = game_distribution(strategy, noise, game)
    a, b = sample_rounds(table, np.array([game.index("x", x)]), np.array([game.index("y", y)]), rng)
    return game.alice_outputs[int(a[0])], game.bob_outputs[int(b[0])]


def calibrate_noise(
    target_win: float, strategy: QuantumStrategy | None = None, game: TwoPlayerFreeGame | None = None
) -> float:
    """Depolarizing probability giving exactly ``target_win``.

    The win probability is affine in ``q``, so the solution is a single
    interpolation between the noiseless and fully mixed values.
    """
    strategy = strategy or ideal_ms_strategy()
    hi = win_probability(strategy, NO_NOISE, game)
    lo = win_probability(strategy, NoiseModel.depolarizing(1.0), game)
    if not lo - 1e-12 <= target_win <= hi + 1e-12:
        raise DomainError(f"target win probability {target_win} outside achievable range [{lo:.12g}, {hi:.12g}]")
    if hi - lo < 1e-15:
        return 0.0
    return float(min(1.0, max(0.0, (hi - target_win) / (hi - lo))))
