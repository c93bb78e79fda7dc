"""End-to-end negotiation dialogue agents over multi-issue bargaining.

The package covers the full loop: a bargaining environment with Pareto
analysis (`env`), synthetic dialogue corpora and vocabulary handling
(`corpus`), a from-scratch reverse-mode autodiff engine (`autodiff`), a
goal-conditioned recurrent dialogue model (`model`), supervised and
policy-gradient training (`training`), dialogue agents with likelihood and
expected-reward rollout decoding (`agents`), pairing evaluation
(`evaluation`), a command-line interface (`cli`), and an HTTP chat service
(`service`).
"""

from .agents import (
    EngineConfig,
    ModelSession,
    NegotiationAgent,
    RolloutConfig,
    Transcript,
    flip_markers,
    goal_of,
    run_dialogue,
)
from .corpus import (
    CHOOSE,
    NO_AGREEMENT,
    PAD,
    READ,
    WRITE,
    DialogueRecord,
    SynthConfig,
    TrainingExample,
    Vocabulary,
    build_vocab,
    encode,
    load_records,
    save_records,
    synth_corpus,
    to_perspectives,
)
from .env import (
    Allocation,
    DealOutcome,
    GeneratorConfig,
    ItemPool,
    Scenario,
    ScenarioSamplingError,
    Selection,
    Valuation,
    enumerate_allocations,
    format_scenario,
    is_pareto_optimal,
    parse_scenario,
    resolve,
    sample_scenario,
    score,
    validate_scenario,
)
from .evaluation import MetricsReport, corpus_stats, evaluate_pairing, perplexity_report
from .model import ModelConfig, NegotiationModel, perplexity, sample_token
from .service import NegotiationService, ServiceError, create_app
from .training import (
    BaselineState,
    RlConfig,
    SgdOptimizer,
    SupervisedConfig,
    TrainingDivergedError,
    TrainReport,
    train_rl,
    train_supervised,
)

__all__ = [
    "Allocation",
    "BaselineState",
    "CHOOSE",
    "DealOutcome",
    "DialogueRecord",
    "EngineConfig",
    "GeneratorConfig",
    "ItemPool",
    "MetricsReport",
    "ModelConfig",
    "ModelSession",
    "NO_AGREEMENT",
    "NegotiationAgent",
    "NegotiationModel",
    "NegotiationService",
    "PAD",
    "READ",
    "RlConfig",
    "RolloutConfig",
    "Scenario",
    "ScenarioSamplingError",
    "Selection",
    "ServiceError",
    "SgdOptimizer",
    "SupervisedConfig",
    "SynthConfig",
    "TrainReport",
    "TrainingDivergedError",
    "TrainingExample",
    "Transcript",
    "Valuation",
    "Vocabulary",
    "WRITE",
    "build_vocab",
    "corpus_stats",
    "create_app",
    "encode",
    "enumerate_allocations",
    "evaluate_pairing",
    "flip_markers",
    "format_scenario",
    "goal_of",
    "is_pareto_optimal",
    "load_records",
    "parse_scenario",
    "perplexity",
    "perplexity_report",
    "resolve",
    "run_dialogue",
    "sample_scenario",
    "sample_token",
    "save_records",
    "score",
    "synth_corpus",
    "to_perspectives",
    "train_rl",
    "train_supervised",
    "validate_scenario",
]
