"""Corpus machinery: vocabulary, perspective conversion, record files, and a
scripted synthetic negotiation corpus for desk-scale training.

Every dialogue is stored twice, once from each agent's perspective.  A
perspective interleaves the agent's own turns (prefixed ``write:``) with the
partner's turns (prefixed ``read:``) and ends with ``<choose>``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .env import (
    Allocation,
    GeneratorConfig,
    ItemPool,
    Scenario,
    Selection,
    Valuation,
    sample_scenario,
)


class DialogueRecordError(ValueError):
    """Raised for malformed dialogue records (e.g. non-alternating speakers)."""

PAD = "<pad>"
UNK = "<unk>"
WRITE = "write:"
READ = "read:"
CHOOSE = "<choose>"
NO_AGREEMENT = "<no_agreement>"

SPECIAL_TOKENS = (PAD, UNK, WRITE, READ, CHOOSE, NO_AGREEMENT)


class Vocabulary:
    """Bidirectional word/id mapping with fixed low ids for special tokens."""

    def __init__(self, words: Sequence[str] = ()):
        self._words: list[str] = list(SPECIAL_TOKENS)
        for w in words:
            if w not in SPECIAL_TOKENS:
                self._words.append(w)
        self._ids = {w: i for i, w in enumerate(self._words)}
        if len(self._ids) != len(self._words):
            raise ValueError("duplicate words in vocabulary")

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    @property
    def words(self) -> list[str]:
        return list(self._words)

    def id_of(self, word: str) -> int:
        return self._ids.get(word, self._ids[UNK])

    def word_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._words):
            raise IndexError(f"token id {token_id} out of range for vocabulary of {len(self._words)}")
        return self._words[token_id]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for w in self._words:
                f.write(w + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            words = [line.rstrip("\n") for line in f if line.strip()]
        if tuple(words[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError(f"vocabulary file {path} missing canonical special tokens")
        return cls(words[len(SPECIAL_TOKENS):])


def encode(vocab: Vocabulary, words: Sequence[str]) -> list[int]:
    return [vocab.id_of(w) for w in words]


def decode(vocab: Vocabulary, ids: Sequence[int]) -> list[str]:
    return [vocab.word_of(i) for i in ids]


def build_vocab(examples: Sequence["TrainingExample"], min_count: int = 20) -> Vocabulary:
    """Vocabulary of words occurring at least ``min_count`` times, plus specials.

    Ids are assigned deterministically: specials first, then descending count,
    ties broken lexicographically.
    """
    counts: Counter = Counter()
    for ex in examples:
        for w in ex.dialogue:
            if w not in SPECIAL_TOKENS:
                counts[w] += 1
    kept = sorted(
        (w for w, c in counts.items() if c >= min_count),
        key=lambda w: (-counts[w], w),
    )
    return Vocabulary(kept)


@dataclass(frozen=True)
class TrainingExample:
    """One agent's view of a dialogue (Perspective).

    ``goal`` interleaves item count and own value per type; ``output`` lists the
    agent's own take then the partner's take, or None when there is no
    consistent agreement to train against.
    """

    goal: tuple[int, int, int, int, int, int]
    dialogue: tuple[str, ...]
    output: Optional[tuple[int, int, int, int, int, int]]
    partner_goal: tuple[int, int, int, int, int, int]
    trainable_output: bool

    @property
    def pool(self) -> ItemPool:
        return ItemPool(tuple(self.goal[0::2]))

    @property
    def valuation(self) -> Valuation:
        return Valuation(tuple(self.goal[1::2]))

    @property
    def partner_valuation(self) -> Valuation:
        return Valuation(tuple(self.partner_goal[1::2]))


@dataclass(frozen=True)
class DialogueRecord:
    scenario: Scenario
    turns: tuple[tuple[str, tuple[str, ...]], ...]  # (speaker "A"|"B", words)
    selection_a: Selection
    selection_b: Selection


def _goal_tuple(pool: ItemPool, val: Valuation) -> tuple[int, ...]:
    out = []
    for c, v in zip(pool.counts, val.values):
        out.extend((c, v))
    return tuple(out)


def _consistent_output(rec: DialogueRecord) -> Optional[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Own takes for A and B when both claims exist and split the pool exactly."""
    sa, sb = rec.selection_a, rec.selection_b
    if not (sa.is_claim and sb.is_claim):
        return None
    ta, tb = sa.allocation.take, sb.allocation.take
    if any(a + b != c for a, b, c in zip(ta, tb, rec.scenario.pool.counts)):
        return None
    return ta, tb


def to_perspectives(rec: DialogueRecord) -> tuple[TrainingExample, TrainingExample]:
    """Convert one dialogue into its two per-agent training examples."""
    expected = "A"
    for speaker, _ in rec.turns:
        if speaker != expected:
            raise DialogueRecordError("speakers do not alternate starting with A")
        expected = "B" if expected == "A" else "A"
    if not rec.turns or rec.turns[-1][1][-1:] != (CHOOSE,):
        raise DialogueRecordError("dialogue must end with <choose>")

    split = _consistent_output(rec)
    examples = []
    for me, partner_sel in (("A", rec.selection_b), ("B", rec.selection_a)):
        tokens: list[str] = []
        for speaker, words in rec.turns:
            tokens.append(WRITE if speaker == me else READ)
            tokens.extend(words)
        if me == "A":
            my_val, their_val = rec.scenario.valuation_a, rec.scenario.valuation_b
        else:
            my_val, their_val = rec.scenario.valuation_b, rec.scenario.valuation_a
        if split is None:
            output = None
        else:
            own = split[0] if me == "A" else split[1]
            other = split[1] if me == "A" else split[0]
            output = own + other
        examples.append(
            TrainingExample(
                goal=_goal_tuple(rec.scenario.pool, my_val),
                dialogue=tuple(tokens),
                output=output,
                partner_goal=_goal_tuple(rec.scenario.pool, their_val),
                trainable_output=split is not None,
            )
        )
    return examples[0], examples[1]


# ---------------------------------------------------------------------------
# Canonical record file format (one perspective per line)
# ---------------------------------------------------------------------------

def format_record(ex: TrainingExample) -> str:
    goal = " ".join(str(v) for v in ex.goal)
    dialogue = " ".join(ex.dialogue)
    if ex.output is None:
        output = " ".join([NO_AGREEMENT] * 6)
    else:
        output = " ".join(str(v) for v in ex.output)
    partner = " ".join(str(v) for v in ex.partner_goal)
    return (
        f"<input> {goal} </input> <dialogue> {dialogue} </dialogue> "
        f"<output> {output} </output> <partner_input> {partner} </partner_input>"
    )


def _section(tokens: list[str], open_tag: str, close_tag: str) -> list[str]:
    try:
        i = tokens.index(open_tag)
        j = tokens.index(close_tag)
    except ValueError as exc:
        raise ValueError(f"record missing {open_tag} ... {close_tag} section") from exc
    if j < i:
        raise ValueError(f"record has {close_tag} before {open_tag}")
    return tokens[i + 1 : j]


def _int_fields(toks: list[str], n: int, what: str) -> tuple[int, ...]:
    if len(toks) != n:
        raise ValueError(f"{what} must have {n} fields, got {len(toks)}")
    try:
        return tuple(int(t) for t in toks)
    except ValueError as exc:
        raise ValueError(f"non-integer field in {what}: {toks}") from exc


def parse_record(line: str) -> TrainingExample:
    tokens = line.split()
    goal = _int_fields(_section(tokens, "<input>", "</input>"), 6, "<input>")
    dialogue = tuple(_section(tokens, "<dialogue>", "</dialogue>"))
    out_toks = _section(tokens, "<output>", "</output>")
    partner = _int_fields(_section(tokens, "<partner_input>", "</partner_input>"), 6, "<partner_input>")
    if not dialogue or dialogue[0] not in (WRITE, READ) or dialogue[-1] != CHOOSE:
        raise ValueError("dialogue section must start with a marker and end with <choose>")
    if all(t == NO_AGREEMENT for t in out_toks) and len(out_toks) == 6:
        output = None
    else:
        output = _int_fields(out_toks, 6, "<output>")
        counts = goal[0::2]
        if any(output[i] + output[i + 3] != counts[i] for i in range(3)):
            raise ValueError(f"output {output} inconsistent with pool counts {counts}")
    return TrainingExample(
        goal=goal,
        dialogue=dialogue,
        output=output,
        partner_goal=partner,
        trainable_output=output is not None,
    )


def save_records(examples: Sequence[TrainingExample], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(format_record(ex) + "\n")


def load_records(path) -> list[TrainingExample]:
    with open(path, encoding="utf-8") as f:
        return [parse_record(line) for line in f if line.strip()]


# ---------------------------------------------------------------------------
# Synthetic scripted-negotiator corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Template negotiator behavior knobs."""

    max_rounds: int = 6            # proposal rounds per agent before giving in
    threshold_start: int = 5       # accept when offered at least this, round 0
    threshold_decay: int = 2       # per-round drop of the acceptance threshold
    stubborn_prob: float = 0.3     # chance an agent holds its demand all game
    scenario: GeneratorConfig = field(default_factory=GeneratorConfig)


_PROPOSAL_OPENERS = (("i", "want"), ("give", "me"), ("i", "need"))
_ACCEPT_PHRASES = (("deal",), ("ok", "deal"))


class _ScriptedNegotiator:
    """Honest template policy: demand, concede, accept once offers are fair."""

    def __init__(
        self,
        pool: ItemPool,
        val: Valuation,
        cfg: SynthConfig,
        jitter: int,
        rng: np.random.Generator,
        stubborn: bool = False,
    ):
        self.pool = pool
        self.val = val
        self.cfg = cfg
        self.jitter = jitter  # per-dialogue patience offset in [0, 2]
        self.stubborn = stubborn  # never concedes; relies on the partner folding
        self.rng = rng
        self.round = 0
        # Open by demanding the whole pool; worthless items are the first
        # concessions, so early accepts leave them stranded with the hoarder.
        self.demand = list(pool.counts)

    def threshold(self, r: int) -> int:
        return self.cfg.threshold_start - self.cfg.threshold_decay * r - self.jitter

    def _phrase_proposal(self) -> tuple[str, ...]:
        opener = _PROPOSAL_OPENERS[self.rng.integers(len(_PROPOSAL_OPENERS))]
        body = []
        for n, item in zip(self.demand, ("book", "hat", "ball")):
            body.extend((str(n), item))
        return opener + tuple(body)

    def _demand_value(self) -> int:
        return sum(v * d for v, d in zip(self.val.values, self.demand))

    def _concede(self) -> bool:
        """Drop one unit of the cheapest still-demanded item; False if nothing left."""
        held = [(self.val.values[i], i) for i in range(3) if self.demand[i] > 0]
        if not held:
            return False
        _, idx = min(held)
        self.demand[idx] -= 1
        return True

    def act(self, partner_demand: Optional[list[int]]) -> tuple[str, tuple[str, ...]]:
        """Return an action kind ("propose"|"accept"|"quit") and its words."""
        r = self.round
        self.round += 1
        if partner_demand is None:
            return "propose", self._phrase_proposal()
        offered = [c - p for c, p in zip(self.pool.counts, partner_demand)]
        offered_value = sum(v * max(0, o) for v, o in zip(self.val.values, offered))
        threshold = max(1, self.threshold(r))
        if offered_value >= threshold or offered_value >= self._demand_value():
            return "accept", _ACCEPT_PHRASES[self.rng.integers(len(_ACCEPT_PHRASES))]
        if r >= self.cfg.max_rounds:
            if offered_value > 0:
                return "accept", _ACCEPT_PHRASES[self.rng.integers(len(_ACCEPT_PHRASES))]
            return "quit", ("no", "deal")
        if not self.stubborn:
            self._concede()
        return "propose", self._phrase_proposal()


def _synth_dialogue(scenario: Scenario, cfg: SynthConfig, rng: np.random.Generator) -> DialogueRecord:
    agents = {}
    for side, val in (("A", scenario.valuation_a), ("B", scenario.valuation_b)):
        agents[side] = _ScriptedNegotiator(
            scenario.pool, val, cfg, jitter=int(rng.integers(0, 3)), rng=rng,
            stubborn=bool(rng.random() < cfg.stubborn_prob),
        )

    turns: list[tuple[str, tuple[str, ...]]] = []
    speaker = "A"
    last_proposal: Optional[tuple[str, list[int]]] = None  # (proposer, demand)
    outcome: Optional[str] = None
    while True:
        agent = agents[speaker]
        partner_demand = last_proposal[1] if last_proposal else None
        kind, words = agent.act(partner_demand)
        turns.append((speaker, words))
        if kind == "propose":
            last_proposal = (speaker, list(agent.demand))
        elif kind in ("accept", "quit"):
            outcome = kind
            closer = "B" if speaker == "A" else "A"
            turns.append((closer, (CHOOSE,)))
            break
        speaker = "B" if speaker == "A" else "A"

    if outcome == "accept" and last_proposal is not None:
        proposer, demand = last_proposal
        take_p = Allocation(tuple(demand))
        take_o = take_p.complement(scenario.pool)
        if proposer == "A":
            sel_a, sel_b = Selection(take_p), Selection(take_o)
        else:
            sel_a, sel_b = Selection(take_o), Selection(take_p)
    else:
        sel_a = sel_b = Selection.no_agreement()
    return DialogueRecord(scenario, tuple(turns), sel_a, sel_b)


def synth_corpus(
    rng: np.random.Generator, n: int, style: SynthConfig = SynthConfig()
) -> list[DialogueRecord]:
    """Generate ``n`` scripted negotiation dialogues with consistent selections."""
    if n < 1:
        raise ValueError("n must be >= 1")
    records = []
    for _ in range(n):
        scenario = sample_scenario(rng, style.scenario)
        records.append(_synth_dialogue(scenario, style, rng))
    return records
