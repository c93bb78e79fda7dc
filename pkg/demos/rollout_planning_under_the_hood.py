"""What the rollout planner sees when it picks an utterance.

Instead of sampling a reply from the language model, the planner samples a
handful of complete candidate turns, simulates S continuations of the whole
dialogue after each one, and commits to the candidate with the highest
expected reward (reward of the most likely final split, weighted by that
split's probability).  This script trains a quick model, then prints one
planning step: every candidate with its estimated reward, and the winner.

Run with:  python3 demos/rollout_planning_under_the_hood.py   (~5 minutes)
"""

import numpy as np

from negotiator import (
    ModelConfig,
    NegotiationModel,
    RolloutConfig,
    SupervisedConfig,
    SynthConfig,
    build_vocab,
    format_scenario,
    goal_of,
    sample_scenario,
    synth_corpus,
    to_perspectives,
    train_supervised,
)
from negotiator.agents import ModelSession
from negotiator.corpus import READ, WRITE

# ---------------------------------------------------------------------------
# A quickly trained model (same recipe as the self-play demo)
# ---------------------------------------------------------------------------
records = synth_corpus(np.random.default_rng(0), 400, SynthConfig())
examples = [p for r in records for p in to_perspectives(r)]
vocab = build_vocab(examples, min_count=5)
model = NegotiationModel(ModelConfig(
    vocab_size=len(vocab), goal_embed_dim=8, dialogue_embed_dim=16,
    goal_hidden=8, lm_hidden=16, output_hidden=48, attn_dim=16, summary_dim=32,
))
model.init(np.random.default_rng(1))
train_supervised(
    model, vocab, examples[:740], examples[740:],
    SupervisedConfig(batch_size=16, lr=0.5, clip=2.0, epochs=30,
                     anneal_factor=1.0, alpha=2.0),
    np.random.default_rng(2),
)

# ---------------------------------------------------------------------------
# One planning step, shown in full
# ---------------------------------------------------------------------------
scenario = sample_scenario(np.random.default_rng(42))
print("scenario:", format_scenario(scenario))

cfg = RolloutConfig(candidates=6, samples=5)
session = ModelSession(
    model, vocab, goal_of(scenario, "A"), np.random.default_rng(3), policy=cfg
)
# The partner opened with a greedy demand; now it is our turn.
opening = [READ] + "i need everything".split() + [WRITE]
session.observe(opening)
print("partner said:", " ".join(opening))

candidates = [session._sample_candidate(cfg) for _ in range(cfg.candidates)]
seeds = [int(s) for s in session.rng.integers(0, 2**63, size=cfg.samples)]
print(f"\n{cfg.candidates} candidate turns, {cfg.samples} simulated "
      "continuations each (shared seeds):")
scored = []
for cand in candidates:
    ids = [t for t, _ in cand]
    value = session.estimate_candidate_reward(ids, cfg, sample_seeds=seeds)
    scored.append((value / cfg.samples, ids))
    words = " ".join(vocab.word_of(t) for t in ids)
    print(f"   {value / cfg.samples:6.3f}  {words}")

best_value, best_ids = max(scored, key=lambda pair: pair[0])
print("\nplanner commits to:",
      " ".join(vocab.word_of(t) for t in best_ids),
      f"(expected reward {best_value:.3f})")
