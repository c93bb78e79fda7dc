"""Agent policies and the turn-alternation dialogue engine.

A session owns one agent's perspective of a live dialogue: its goal, token
history, language-model state, and decoding policy (plain sampling or
expected-reward rollouts).  The engine alternates turns between two sessions,
mirroring each produced turn into the partner's history with the
``write:``/``read:`` markers flipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from .corpus import CHOOSE, PAD, READ, WRITE, Vocabulary
from .env import (
    DealOutcome,
    ItemPool,
    Scenario,
    Selection,
    Valuation,
    enumerate_allocations,
    resolve,
    score,
)
from .model import NegotiationModel, sample_token


@dataclass(frozen=True)
class RolloutConfig:
    candidates: int = 10
    samples: int = 5
    max_rollout_tokens: int = 200  # continuation cap per sample
    candidate_temperature: float = 1.0  # candidates come from the unscaled model

    def __post_init__(self):
        if self.candidates < 1 or self.samples < 1:
            raise ValueError("rollout config needs candidates >= 1 and samples >= 1")
        if self.candidate_temperature <= 0:
            raise ValueError("candidate_temperature must be positive")


@dataclass(frozen=True)
class EngineConfig:
    max_turns: int = 20
    max_turn_tokens: int = 100


class Session(Protocol):
    def write_turn(self) -> list[tuple[str, bool]]: ...
    def observe(self, tokens: Sequence[str]) -> None: ...
    def choose(self) -> Selection: ...


def flip_markers(tokens: Sequence[str]) -> list[str]:
    flip = {WRITE: READ, READ: WRITE}
    return [flip.get(t, t) for t in tokens]


class ModelSession:
    """Model-backed agent session over one dialogue."""

    def __init__(
        self,
        model: NegotiationModel,
        vocab: Vocabulary,
        goal: Sequence[int],
        rng: np.random.Generator,
        policy: Optional[RolloutConfig] = None,
        temperature: float = 0.5,
        max_turn_tokens: int = 100,
    ):
        self.model = model
        self.vocab = vocab
        self.goal = tuple(goal)
        self.rng = rng
        self.policy = policy
        self.temperature = temperature
        self.max_turn_tokens = max_turn_tokens
        self.history: list[int] = []
        self._pad_id = vocab.id_of(PAD)
        self._write_id = vocab.id_of(WRITE)
        self._read_id = vocab.id_of(READ)
        self._choose_id = vocab.id_of(CHOOSE)
        self._state = model.initial_lm_state(self.goal)
        self._prev = self._pad_id

    @property
    def pool(self) -> ItemPool:
        return ItemPool(tuple(self.goal[0::2]))

    @property
    def valuation(self) -> Valuation:
        return Valuation(tuple(self.goal[1::2]))

    # -- state plumbing ------------------------------------------------------

    def _absorb(self, token_id: int) -> None:
        self._state = self.model._lm_advance(self._state, self._prev)
        self._prev = token_id
        self.history.append(token_id)

    def _next_logits(self) -> np.ndarray:
        state = self.model._lm_advance(self._state, self._prev)
        return self.model._logits_from_state(state.h).value

    def _sample_next(self, forbid: Sequence[int]) -> int:
        logits = self._next_logits().copy()
        for tid in forbid:
            logits[tid] = -np.inf
        return sample_token(logits, self.temperature, self.rng)

    def observe(self, tokens: Sequence[str]) -> None:
        for t in tokens:
            self._absorb(self.vocab.id_of(t))

    # -- decoding ------------------------------------------------------------

    def write_turn(self) -> list[tuple[str, bool]]:
        if self.policy is None:
            return self.write_turn_likelihood()
        return self.write_turn_rollout(self.policy)

    def write_turn_likelihood(self) -> list[tuple[str, bool]]:
        """One complete turn: optional forced marker, then sampled tokens until
        a turn yield (``read:``), dialogue end (``<choose>``), or the cap."""
        turn: list[tuple[int, bool]] = []
        if not self.history or self.history[-1] != self._write_id:
            self._absorb(self._write_id)
            turn.append((self._write_id, False))
        forbid = (self._pad_id, self._write_id)
        for _ in range(self.max_turn_tokens):
            tid = self._sample_next(forbid)
            self._absorb(tid)
            turn.append((tid, True))
            if tid in (self._read_id, self._choose_id):
                break
        else:
            self._absorb(self._read_id)
            turn.append((self._read_id, False))
        return [(self.vocab.word_of(t), s) for t, s in turn]

    # -- final selection -----------------------------------------------------

    def _choice_distributions(self, token_ids: Sequence[int]) -> np.ndarray:
        return self.model.choice_distributions(self.goal, token_ids)

    def best_output(self, token_ids: Sequence[int]) -> tuple[Selection, float]:
        """Feasible joint-probability argmax over full splits of the pool,
        against the all-no-agreement alternative."""
        dists = self._choice_distributions(token_ids)
        cfg = self.model.cfg
        pool = self.pool
        best_alloc = None
        best_p = -1.0
        for alloc in enumerate_allocations(pool):
            other = alloc.complement(pool)
            classes = alloc.take + other.take
            if any(c > cfg.max_count for c in classes):
                continue
            p = 1.0
            for i, c in enumerate(classes):
                p *= dists[i, c]
            if p > best_p:
                best_p = p
                best_alloc = alloc
        p_none = float(np.prod(dists[:, cfg.no_agreement_class]))
        if best_alloc is None or p_none > best_p:
            return Selection.no_agreement(), p_none
        return Selection(best_alloc), best_p

    def choose(self) -> Selection:
        return self.best_output(self.history)[0]

    # -- rollout planning ----------------------------------------------------

    def _rollout_value(self, token_ids: list[int], cfg: RolloutConfig) -> float:
        """r(o) * p(o | dialogue) for one completed rollout."""
        sel, p = self.best_output(token_ids)
        if not sel.is_claim:
            return 0.0
        return score(self.valuation, sel.allocation) * p

    def _simulate_continuation(
        self,
        token_ids: list[int],
        cfg: RolloutConfig,
        rng: Optional[np.random.Generator] = None,
    ) -> list[int]:
        """Sample tokens to dialogue end using the model as forward model for
        both sides; capped, with a forced dialogue end at the cap."""
        if rng is None:
            rng = self.rng
        state = self._continuation_state(token_ids)
        out = list(token_ids)
        for _ in range(cfg.max_rollout_tokens):
            logits = self.model._logits_from_state(state.h).value.copy()
            logits[self._pad_id] = -np.inf
            tid = sample_token(logits, self.temperature, rng)
            out.append(tid)
            if tid == self._choose_id:
                return out
            state = self.model._lm_advance(state, tid)
        out.append(self._choose_id)
        return out

    def _continuation_state(self, token_ids: Sequence[int]):
        state = self.model.initial_lm_state(self.goal)
        for tid in [self._pad_id] + list(token_ids):
            state = self.model._lm_advance(state, tid)
        return state

    def _sample_candidate(self, cfg: RolloutConfig) -> list[tuple[int, bool]]:
        """Sample one complete candidate turn from the current state without
        committing it to the session history.  Candidates are drawn at the
        rollout's own temperature (unscaled by default) so the pool stays
        diverse even when the decoding temperature is sharp."""
        turn: list[tuple[int, bool]] = []
        if not self.history or self.history[-1] != self._write_id:
            turn.append((self._write_id, False))
        state = self._continuation_state(self.history + [t for t, _ in turn])
        forbid = (self._pad_id, self._write_id)
        for _ in range(self.max_turn_tokens):
            logits = self.model._logits_from_state(state.h).value.copy()
            for tid in forbid:
                logits[tid] = -np.inf
            tid = sample_token(logits, cfg.candidate_temperature, self.rng)
            turn.append((tid, True))
            if tid in (self._read_id, self._choose_id):
                break
            state = self.model._lm_advance(state, tid)
        else:
            turn.append((self._read_id, False))
        return turn

    def estimate_candidate_reward(
        self,
        candidate: list[int],
        cfg: RolloutConfig,
        sample_seeds: Optional[Sequence[int]] = None,
    ) -> float:
        """Accumulated expected reward of a candidate turn over S rollouts.

        When ``sample_seeds`` is given, continuation i is driven by a
        generator seeded with ``sample_seeds[i]``.  Reusing one seed list
        across candidates gives common random numbers: every candidate faces
        the same simulated partner luck, so the comparison isolates the
        candidate itself and the argmax is far less noisy at small S."""
        base = self.history + candidate
        if candidate and candidate[-1] == self._choose_id:
            return cfg.samples * self._rollout_value(base, cfg)
        total = 0.0
        for i in range(cfg.samples):
            rng = None if sample_seeds is None else np.random.default_rng(sample_seeds[i])
            completed = self._simulate_continuation(base, cfg, rng=rng)
            total += self._rollout_value(completed, cfg)
        return total

    def write_turn_rollout(self, cfg: RolloutConfig) -> list[tuple[str, bool]]:
        candidates = [self._sample_candidate(cfg) for _ in range(cfg.candidates)]
        seeds = [int(s) for s in self.rng.integers(0, 2**63, size=cfg.samples)]
        best_turn = candidates[0]
        best_r = -1.0
        for cand in candidates:
            r = self.estimate_candidate_reward(
                [t for t, _ in cand], cfg, sample_seeds=seeds
            )
            if r > best_r:
                best_r = r
                best_turn = cand
        for tid, _ in best_turn:
            self._absorb(tid)
        return [(self.vocab.word_of(t), s) for t, s in best_turn]


class NegotiationAgent:
    """Factory binding a model to a decoding policy; one session per dialogue."""

    def __init__(
        self,
        model: NegotiationModel,
        vocab: Vocabulary,
        policy: Optional[RolloutConfig] = None,
        temperature: float = 0.5,
    ):
        self.model = model
        self.vocab = vocab
        self.policy = policy
        self.temperature = temperature

    def new_session(
        self, goal: Sequence[int], rng: np.random.Generator, engine_cfg: EngineConfig = EngineConfig()
    ) -> ModelSession:
        return ModelSession(
            self.model,
            self.vocab,
            goal,
            rng,
            policy=self.policy,
            temperature=self.temperature,
            max_turn_tokens=engine_cfg.max_turn_tokens,
        )


@dataclass
class Transcript:
    """Full token-level record of one dialogue, in agent A's perspective."""

    scenario: Scenario
    tokens: list[str] = field(default_factory=list)
    owners: list[str] = field(default_factory=list)       # "A" or "B" per token
    sampled: list[bool] = field(default_factory=list)     # owner sampled it (vs forced marker)
    selection_a: Optional[Selection] = None
    selection_b: Optional[Selection] = None
    outcome: Optional[DealOutcome] = None
    forced_termination: bool = False

    def perspective(self, side: str) -> list[str]:
        if side == "A":
            return list(self.tokens)
        return flip_markers(self.tokens)

    def agent_a_sampled_positions(self) -> list[int]:
        return [i for i, (o, s) in enumerate(zip(self.owners, self.sampled)) if o == "A" and s]

    def trailer(self) -> str:
        pareto = "-"
        if self.outcome.pareto_optimal is not None:
            pareto = "1" if self.outcome.pareto_optimal else "0"
        return (
            f"#outcome agreed={1 if self.outcome.agreed else 0} "
            f"ra={self.outcome.reward_a} rb={self.outcome.reward_b} pareto={pareto}"
        )


def goal_of(scenario: Scenario, side: str) -> tuple[int, ...]:
    val = scenario.valuation_a if side == "A" else scenario.valuation_b
    out = []
    for c, v in zip(scenario.pool.counts, val.values):
        out.extend((c, v))
    return tuple(out)


def run_dialogue(
    agent_a,
    agent_b,
    scenario: Scenario,
    cfg: EngineConfig = EngineConfig(),
    rng: Optional[np.random.Generator] = None,
) -> Transcript:
    """Alternate turns (A first) until one side emits ``<choose>`` or the turn
    cap forces a no-agreement outcome; then resolve both selections."""
    if rng is None:
        rng = np.random.default_rng(0)
    session_a = agent_a.new_session(goal_of(scenario, "A"), rng, cfg)
    session_b = agent_b.new_session(goal_of(scenario, "B"), rng, cfg)
    transcript = Transcript(scenario)

    speaker = "A"
    ended = False
    for _ in range(cfg.max_turns):
        me = session_a if speaker == "A" else session_b
        other = session_b if speaker == "A" else session_a
        turn = me.write_turn()
        words = [w for w, _ in turn]
        other.observe(flip_markers(words))
        a_view = words if speaker == "A" else flip_markers(words)
        transcript.tokens.extend(a_view)
        transcript.owners.extend([speaker] * len(turn))
        transcript.sampled.extend([s for _, s in turn])
        if words[-1] == CHOOSE:
            ended = True
            break
        speaker = "B" if speaker == "A" else "A"

    if ended:
        sel_a = session_a.choose()
        sel_b = session_b.choose()
    else:
        transcript.forced_termination = True
        sel_a = sel_b = Selection.no_agreement()
    transcript.selection_a = sel_a
    transcript.selection_b = sel_b
    transcript.outcome = resolve(
        scenario.pool, sel_a, sel_b, scenario.valuation_a, scenario.valuation_b
    )
    return transcript
