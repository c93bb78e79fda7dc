"""Train a tiny dialogue agent and watch it negotiate against itself.

This is the whole pipeline in miniature: synthesize a corpus of scripted
negotiations, build a vocabulary, fit the goal-conditioned recurrent model by
maximum likelihood for a couple of minutes, then run self-play dialogues and
print the transcripts with their resolved outcomes.

A word on what to expect from the transcripts: the scripted demonstrators are
hoarders -- they open by demanding the entire pool and only concede slowly --
and a model this small imitates the *style* faithfully while its selection
heads are not yet accurate enough to land two consistent final claims. So
most self-play dialogues below end in deadlock or conflicting claims and
score 0/0. That is the honest starting point of the whole project: a pure
likelihood imitation of under-negotiating demonstrators is a poor negotiator.
The acceptance-scale recipe (larger heads, 800 dialogues, staged schedule;
see tests/test_acceptance.py) closes ~57% of self-play deals, and the RL and
rollout-planning demos show how to improve on it from there.

Run with:  python3 demos/train_tiny_agent_selfplay.py   (~5 minutes)
"""

import numpy as np

from negotiator import (
    EngineConfig,
    ModelConfig,
    NegotiationAgent,
    NegotiationModel,
    SupervisedConfig,
    SynthConfig,
    build_vocab,
    format_scenario,
    run_dialogue,
    sample_scenario,
    synth_corpus,
    to_perspectives,
    train_supervised,
)

# ---------------------------------------------------------------------------
# Corpus: scripted negotiators haggle over random pools
# ---------------------------------------------------------------------------
records = synth_corpus(np.random.default_rng(0), 400, SynthConfig())
examples = [p for r in records for p in to_perspectives(r)]
vocab = build_vocab(examples, min_count=5)
print(f"{len(records)} dialogues -> {len(examples)} perspectives, vocab {len(vocab)}")

sample = records[1]
print("\nOne training dialogue:")
for side, words in sample.turns:
    print(f"   {side}: {' '.join(words)}")

# ---------------------------------------------------------------------------
# Supervised training (small model, short schedule: demo quality only)
# ---------------------------------------------------------------------------
train, valid = examples[:740], examples[740:]
model = NegotiationModel(ModelConfig(
    vocab_size=len(vocab), goal_embed_dim=8, dialogue_embed_dim=16,
    goal_hidden=8, lm_hidden=16, output_hidden=48, attn_dim=16, summary_dim=32,
))
model.init(np.random.default_rng(1))
cfg = SupervisedConfig(batch_size=16, lr=0.5, clip=2.0, epochs=30,
                       anneal_factor=1.0, alpha=2.0)
print("\nTraining (epoch, train loss, valid perplexity, lr):")
report = train_supervised(model, vocab, train, valid, cfg, np.random.default_rng(2))
for line in report.lines[-5:]:
    print("  ", line)

# ---------------------------------------------------------------------------
# Self-play: the model negotiates against a copy of itself.  Expect hoarding
# on both sides and mostly 0/0 outcomes -- see the module docstring.
# ---------------------------------------------------------------------------
agent = NegotiationAgent(model, vocab)
print("\nSelf-play dialogues:")
for i in range(4):
    scenario = sample_scenario(np.random.default_rng(100 + i))
    t = run_dialogue(agent, agent, scenario, EngineConfig(), np.random.default_rng(i))
    print(f"\n# scenario {format_scenario(scenario)}")
    print("  ", " ".join(t.tokens))
    print("  ", t.trailer())
