"""Self-play tournaments, corpus statistics, and perplexity reporting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .agents import EngineConfig, Transcript, run_dialogue
from .corpus import CHOOSE, READ, WRITE, DialogueRecord, TrainingExample, Vocabulary
from .env import Scenario, resolve
from .model import NegotiationModel, perplexity

_MARKERS = (WRITE, READ, CHOOSE)


@dataclass(frozen=True)
class MetricsReport:
    """Tournament metrics in the shape of the score/agreement/Pareto table."""

    n_dialogues: int
    score_all_a: float
    score_all_b: float
    score_agreed_a: float
    score_agreed_b: float
    pct_agreed: float
    pct_pareto: Optional[float]  # over agreed deals; absent when none agreed
    avg_turns: float
    avg_words_per_turn: float

    def lines(self) -> list[str]:
        out = [
            f"n_dialogues={self.n_dialogues}",
            f"score_all_a={self.score_all_a:.4f}",
            f"score_all_b={self.score_all_b:.4f}",
            f"score_agreed_a={self.score_agreed_a:.4f}",
            f"score_agreed_b={self.score_agreed_b:.4f}",
            f"pct_agreed={self.pct_agreed:.2f}",
        ]
        if self.pct_pareto is not None:
            out.append(f"pct_pareto={self.pct_pareto:.2f}")
        out += [
            f"avg_turns={self.avg_turns:.2f}",
            f"avg_words_per_turn={self.avg_words_per_turn:.2f}",
        ]
        return out

    def table(self, name_a: str = "A", name_b: str = "B") -> str:
        pareto = "-" if self.pct_pareto is None else f"{self.pct_pareto:.1f}"
        rows = [
            ("pairing", f"{name_a} vs {name_b}"),
            ("score (all)", f"{self.score_all_a:.1f} vs {self.score_all_b:.1f}"),
            ("score (agreed)", f"{self.score_agreed_a:.1f} vs {self.score_agreed_b:.1f}"),
            ("% agreed", f"{self.pct_agreed:.1f}"),
            ("% pareto optimal", pareto),
            ("dialogues", str(self.n_dialogues)),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def transcript_turns(transcript: Transcript) -> int:
    """Number of maximal same-speaker runs."""
    turns = 0
    prev = None
    for owner in transcript.owners:
        if owner != prev:
            turns += 1
            prev = owner
    return turns


def transcript_words(transcript: Transcript) -> int:
    return sum(1 for t in transcript.tokens if t not in _MARKERS)


def evaluate_pairing(
    agent_a,
    agent_b,
    scenarios: Sequence[Scenario],
    role_swap: bool = True,
    rng: Optional[np.random.Generator] = None,
    engine_cfg: EngineConfig = EngineConfig(),
) -> MetricsReport:
    """Play every scenario (twice when role-swapping, with sides exchanged) and
    aggregate scores.  Failures count as zero in ``score_all``."""
    if not scenarios:
        raise ValueError("need at least one scenario")
    if rng is None:
        rng = np.random.default_rng(0)
    total_a = total_b = 0.0
    agreed_a = agreed_b = 0.0
    n = agreed = pareto = 0
    turns = words = 0
    for scenario in scenarios:
        sides = [(agent_a, agent_b, False)]
        if role_swap:
            sides.append((agent_b, agent_a, True))
        for first, second, swapped in sides:
            t = run_dialogue(first, second, scenario, engine_cfg, rng)
            ra, rb = t.outcome.reward_a, t.outcome.reward_b
            score_a, score_b = (rb, ra) if swapped else (ra, rb)
            n += 1
            total_a += score_a
            total_b += score_b
            turns += transcript_turns(t)
            words += transcript_words(t)
            if t.outcome.agreed:
                agreed += 1
                agreed_a += score_a
                agreed_b += score_b
                if t.outcome.pareto_optimal:
                    pareto += 1
    return MetricsReport(
        n_dialogues=n,
        score_all_a=total_a / n,
        score_all_b=total_b / n,
        score_agreed_a=agreed_a / agreed if agreed else 0.0,
        score_agreed_b=agreed_b / agreed if agreed else 0.0,
        pct_agreed=100.0 * agreed / n,
        pct_pareto=100.0 * pareto / agreed if agreed else None,
        avg_turns=turns / n,
        avg_words_per_turn=words / turns if turns else 0.0,
    )


@dataclass(frozen=True)
class CorpusStats:
    n_dialogues: int
    avg_turns: float
    avg_words_per_turn: float
    pct_agreed: float
    avg_score: float           # mean reward per agent over agreed dialogues
    pct_pareto: Optional[float]

    def lines(self) -> list[str]:
        out = [
            f"n_dialogues={self.n_dialogues}",
            f"avg_turns={self.avg_turns:.2f}",
            f"avg_words_per_turn={self.avg_words_per_turn:.2f}",
            f"pct_agreed={self.pct_agreed:.2f}",
            f"avg_score={self.avg_score:.2f}",
        ]
        if self.pct_pareto is not None:
            out.append(f"pct_pareto={self.pct_pareto:.2f}")
        return out


def corpus_stats(records: Sequence[DialogueRecord]) -> CorpusStats:
    """The six dataset statistics; agreement and Pareto are recomputed from the
    scenario and selections, never trusted from any logged flag."""
    if not records:
        raise ValueError("empty dataset")
    turns = words = 0
    agreed = pareto = 0
    score_sum = 0.0
    for rec in records:
        turns += len(rec.turns)
        words += sum(1 for _, ws in rec.turns for w in ws if w not in _MARKERS)
        outcome = resolve(
            rec.scenario.pool, rec.selection_a, rec.selection_b,
            rec.scenario.valuation_a, rec.scenario.valuation_b,
        )
        if outcome.agreed:
            agreed += 1
            score_sum += (outcome.reward_a + outcome.reward_b) / 2.0
            if outcome.pareto_optimal:
                pareto += 1
    n = len(records)
    return CorpusStats(
        n_dialogues=n,
        avg_turns=turns / n,
        avg_words_per_turn=words / turns if turns else 0.0,
        pct_agreed=100.0 * agreed / n,
        avg_score=score_sum / agreed if agreed else 0.0,
        pct_pareto=100.0 * pareto / agreed if agreed else None,
    )


def perplexity_report(
    model: NegotiationModel,
    vocab: Vocabulary,
    splits: dict[str, Sequence[TrainingExample]],
) -> dict[str, float]:
    """exp(mean token NLL) per split, teacher-forced as in training."""
    out = {}
    for name, examples in splits.items():
        total, count = 0.0, 0
        for ex in examples:
            total += float(model.sequence_nll(ex, vocab).value)
            count += len(ex.dialogue)
        out[name] = perplexity(total, count)
    return out
