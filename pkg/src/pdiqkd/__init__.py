"""Simulation and bound calculators for parallel DIQKD from the Magic Square game."""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    ConsistencyError,
    DegenerateStatisticsError,
    DomainError,
    MalformedStrategyError,
    TheoremInapplicableError,
)
from .games import (
    CommonBitMaps,
    DeterministicStrategyPair,
    TwoPlayerFreeGame,
    classical_value,
    enumerate_strategies,
    evaluate_predicate,
    magic_square,
)
from .quantum import (
    DensityState,
    NoiseModel,
    ProjectiveMeasurement,
    QuantumStrategy,
    calibrate_noise,
    depolarize,
    ideal_ms_strategy,
    sample_round,
    win_probability,
)
from .guessing import (
    ClassicalEveStrategy,
    EveInput,
    GuessingGame,
    anchoring_check,
    build_guessing_game,
    c_star_bounds,
    classical_guessing_value,
    guessing_predicate,
    strategy_guessing_value,
)
from .repetition import (
    RepetitionConstants,
    RoundLedger,
    StrategyBundle,
    ThresholdGameSpec,
    monte_carlo_threshold,
    tau_star_bound,
    threshold_win,
)
from .protocol import (
    ClassicalDevice,
    CorrelatedDevice,
    OmniscientClassicalEve,
    PredictFromLeakEve,
    ProtocolConfig,
    QuantumDevice,
    RandomGuessEve,
    empirical_guessing_probability,
    extract_raw_keys,
    privacy_amplify,
    run_protocol,
    select_S,
    select_T,
)
from .bounds import (
    BoundConstants,
    concentration_audit,
    concentration_bound,
    guessing_to_min_entropy,
    honest_acceptance_bound,
    min_entropy_bound,
    theorem_report,
)

__all__ = [
    "__version__",
    "CapacityError",
    "ConsistencyError",
    "DegenerateStatisticsError",
    "DomainError",
    "MalformedStrategyError",
    "TheoremInapplicableError",
    "CommonBitMaps",
    "DeterministicStrategyPair",
    "TwoPlayerFreeGame",
    "classical_value",
    "enumerate_strategies",
    "evaluate_predicate",
    "magic_square",
    "DensityState",
    "NoiseModel",
    "ProjectiveMeasurement",
    "QuantumStrategy",
    "calibrate_noise",
    "depolarize",
    "ideal_ms_strategy",
    "sample_round",
    "win_probability",
    "ClassicalEveStrategy",
    "EveInput",
    "GuessingGame",
    "anchoring_check",
    "build_guessing_game",
    "c_star_bounds",
    "classical_guessing_value",
    "guessing_predicate",
    "strategy_guessing_value",
    "RepetitionConstants",
    "RoundLedger",
    "StrategyBundle",
    "ThresholdGameSpec",
    "monte_carlo_threshold",
    "tau_star_bound",
    "threshold_win",
    "ClassicalDevice",
    "CorrelatedDevice",
    "OmniscientClassicalEve",
    "PredictFromLeakEve",
    "ProtocolConfig",
    "QuantumDevice",
    "RandomGuessEve",
    "empirical_guessing_probability",
    "extract_raw_keys",
    "privacy_amplify",
    "run_protocol",
    "select_S",
    "select_T",
    "BoundConstants",
    "concentration_audit",
    "concentration_bound",
    "guessing_to_min_entropy",
    "honest_acceptance_bound",
    "min_entropy_bound",
    "theorem_report",
]
