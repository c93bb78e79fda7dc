"""Supervised imitation training and self-play policy-gradient fine-tuning."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .agents import EngineConfig, NegotiationAgent, Transcript, run_dialogue
from .corpus import TrainingExample, Vocabulary, encode
from .env import Scenario
from .model import NegotiationModel, perplexity


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class SupervisedConfig:
    batch_size: int = 16
    lr: float = 1.0
    momentum: float = 0.1
    nesterov: bool = True
    clip: float = 0.5
    epochs: int = 30
    anneal_factor: float = 5.0
    alpha: float = 0.5


@dataclass
class RlConfig:
    lr: float = 0.1
    clip: float = 1.0
    gamma: float = 0.95
    episodes: int = 4086
    interleave: int = 4          # one supervised update per this many RL updates
    supervised_lr: float = 0.5
    supervised_clip: float = 1.0
    supervised_batch: int = 16
    temperature: float = 0.5
    alpha: float = 0.5


class SgdOptimizer:
    """SGD with optional (Nesterov) momentum over a parameter store."""

    def __init__(self, store: ad.ParamStore, lr: float, momentum: float = 0.0,
                 nesterov: bool = False, clip: Optional[float] = None):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.store = store
        self.lr = lr
        self.momentum = momentum
        self.nesterov = nesterov
        self.clip = clip
        self._velocity = {name: np.zeros_like(t.value) for name, t in store.items()}

    def step(self) -> None:
        if self.clip is not None:
            ad.clip_global_norm(self.store, self.clip)
        for name, t in self.store.items():
            g = t.grad
            if g is None:
                continue
            if self.momentum > 0:
                v = self._velocity[name]
                v *= self.momentum
                v += g
                update = g + self.momentum * v if self.nesterov else v
            else:
                update = g
            t.value -= self.lr * update


@dataclass
class BaselineState:
    """Exact running mean of observed rewards."""

    count: int = 0
    mean: float = 0.0

    def advantage(self, reward: float) -> float:
        return reward - self.mean

    def update(self, reward: float) -> None:
        self.count += 1
        self.mean += (reward - self.mean) / self.count


@dataclass
class TrainReport:
    lines: list[str] = field(default_factory=list)
    best_valid_ppl: float = float("inf")
    best_epoch: int = -1

    def log(self, line: str) -> None:
        self.lines.append(line)


def _dataset_token_nll(model: NegotiationModel, vocab: Vocabulary,
                       examples: Sequence[TrainingExample]) -> tuple[float, int]:
    total, count = 0.0, 0
    for ex in examples:
        total += float(model.sequence_nll(ex, vocab).value)
        count += len(ex.dialogue)
    return total, count


def validation_perplexity(model: NegotiationModel, vocab: Vocabulary,
                          examples: Sequence[TrainingExample]) -> float:
    total, count = _dataset_token_nll(model, vocab, examples)
    return perplexity(total, count)


def _snapshot(store: ad.ParamStore) -> dict[str, np.ndarray]:
    return {name: t.value.copy() for name, t in store.items()}


def _restore(store: ad.ParamStore, snap: dict[str, np.ndarray]) -> None:
    for name, t in store.items():
        t.value[...] = snap[name]


def supervised_batch_update(model: NegotiationModel, vocab: Vocabulary,
                            batch: Sequence[TrainingExample], opt: SgdOptimizer,
                            alpha: float) -> float:
    """One clipped SGD step on the mean combined loss; returns the loss."""
    model.store.zero_grad()
    total = None
    for ex in batch:
        loss = model.total_loss(ex, vocab, alpha=alpha)
        total = loss if total is None else ad.add(total, loss)
    mean = ad.scale(total, 1.0 / len(batch))
    value = float(mean.value)
    if not np.isfinite(value):
        raise TrainingDivergedError(f"non-finite training loss {value}")
    ad.backward(mean)
    opt.step()
    return value


def train_supervised(
    model: NegotiationModel,
    vocab: Vocabulary,
    train_examples: Sequence[TrainingExample],
    valid_examples: Sequence[TrainingExample],
    cfg: SupervisedConfig = SupervisedConfig(),
    rng: Optional[np.random.Generator] = None,
    on_epoch: Optional[Callable[[str], None]] = None,
) -> TrainReport:
    """Mini-batch SGD over shuffled epochs.  Validation perplexity is measured
    each epoch; the learning rate is divided by ``anneal_factor`` whenever it
    fails to improve, and the best-scoring parameters are restored at the end.
    """
    if not train_examples:
        raise ValueError("empty training set")
    if rng is None:
        rng = np.random.default_rng(0)
    opt = SgdOptimizer(model.store, cfg.lr, cfg.momentum, cfg.nesterov, cfg.clip)
    report = TrainReport()
    best = _snapshot(model.store)
    n = len(train_examples)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            batch = [train_examples[i] for i in order[start:start + cfg.batch_size]]
            losses.append(supervised_batch_update(model, vocab, batch, opt, cfg.alpha))
        valid_ppl = (validation_perplexity(model, vocab, valid_examples)
                     if valid_examples else perplexity(np.mean(losses), 1))
        if valid_ppl < report.best_valid_ppl:
            report.best_valid_ppl = valid_ppl
            report.best_epoch = epoch
            best = _snapshot(model.store)
        else:
            opt.lr /= cfg.anneal_factor
        line = f"{epoch} {np.mean(losses):.6f} {valid_ppl:.6f} {opt.lr:.6g}"
        report.log(line)
        if on_epoch:
            on_epoch(line)
    _restore(model.store, best)
    return report


# -- policy gradient ---------------------------------------------------------


def compute_returns(n_tokens: int, sampled_positions: Sequence[int], reward: float,
                    baseline: BaselineState, gamma: float) -> np.ndarray:
    """Per-token weights: discounted advantage at each self-sampled position,
    zero elsewhere.  The discount counts steps back from the final token."""
    weights = np.zeros(n_tokens)
    adv = baseline.advantage(reward)
    last = n_tokens - 1
    for t in sampled_positions:
        weights[t] = gamma ** (last - t) * adv
    return weights


def reinforce_update(
    model: NegotiationModel,
    vocab: Vocabulary,
    transcript: Transcript,
    baseline: BaselineState,
    opt: SgdOptimizer,
    gamma: float,
) -> float:
    """One policy-gradient step for agent A on a finished dialogue.  Returns
    the reward.  The baseline is updated after the advantage is taken."""
    reward = float(transcript.outcome.reward_a)
    positions = transcript.agent_a_sampled_positions()
    if not positions:
        warnings.warn("dialogue has no self-sampled tokens; skipping update")
        baseline.update(reward)
        return reward
    tokens = transcript.perspective("A")
    ids = encode(vocab, tokens)
    weights = compute_returns(len(ids), positions, reward, baseline, gamma)
    baseline.update(reward)
    model.store.zero_grad()
    goal = transcript_goal(transcript)
    states, _ = model.lm_states(goal, ids)
    surrogate = ad.nll_rows(model.sequence_logits(states), ids, weights)
    if not np.isfinite(float(surrogate.value)):
        raise TrainingDivergedError("non-finite policy-gradient surrogate")
    ad.backward(surrogate)
    opt.step()
    return reward


def transcript_goal(transcript: Transcript) -> tuple[int, ...]:
    s = transcript.scenario
    out = []
    for c, v in zip(s.pool.counts, s.valuation_a.values):
        out.extend((c, v))
    return tuple(out)


@dataclass
class RlReport:
    rewards: list[float] = field(default_factory=list)
    baseline: BaselineState = field(default_factory=BaselineState)
    agreement_count: int = 0

    @property
    def mean_reward(self) -> float:
        return float(np.mean(self.rewards)) if self.rewards else 0.0


def train_rl(
    model: NegotiationModel,
    partner: NegotiationModel,
    vocab: Vocabulary,
    scenarios: Callable[[np.random.Generator], Scenario],
    cfg: RlConfig = RlConfig(),
    rng: Optional[np.random.Generator] = None,
    supervised_examples: Sequence[TrainingExample] = (),
    engine_cfg: EngineConfig = EngineConfig(),
    on_episode: Optional[Callable[[int, float], None]] = None,
) -> RlReport:
    """Self-play fine-tuning against a frozen partner.  After every
    ``interleave`` policy-gradient updates, one supervised mini-batch update
    keeps the policy anchored to human-like language."""
    if rng is None:
        rng = np.random.default_rng(0)
    rl_opt = SgdOptimizer(model.store, cfg.lr, clip=cfg.clip)
    sup_opt = SgdOptimizer(model.store, cfg.supervised_lr, clip=cfg.supervised_clip)
    agent_a = NegotiationAgent(model, vocab, temperature=cfg.temperature)
    agent_b = NegotiationAgent(partner, vocab, temperature=cfg.temperature)
    report = RlReport()
    for episode in range(cfg.episodes):
        scenario = scenarios(rng)
        transcript = run_dialogue(agent_a, agent_b, scenario, engine_cfg, rng)
        reward = reinforce_update(model, vocab, transcript, report.baseline, rl_opt, cfg.gamma)
        report.rewards.append(reward)
        if transcript.outcome.agreed:
            report.agreement_count += 1
        if supervised_examples and (episode + 1) % cfg.interleave == 0:
            idx = rng.choice(len(supervised_examples),
                             size=min(cfg.supervised_batch, len(supervised_examples)),
                             replace=False)
            batch = [supervised_examples[i] for i in idx]
            supervised_batch_update(model, vocab, batch, sup_opt, cfg.alpha)
        if on_episode:
            on_episode(episode, reward)
    return report
