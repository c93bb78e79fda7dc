"""The negotiation dialogue model.

A goal encoder GRU conditions a dialogue language model whose output softmax
shares weights with the token embedding matrix.  Final-selection classifiers
read the dialogue through bidirectional GRUs with an attention summary that is
also conditioned on the goal encoding.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .corpus import CHOOSE, NO_AGREEMENT, PAD, Vocabulary, encode
from .corpus import TrainingExample

MAX_COUNT_TOKEN = 7   # goal count tokens span 0..7
MAX_VALUE_TOKEN = 10  # goal value tokens span 0..10
N_GOAL_TOKENS = (MAX_COUNT_TOKEN + 1) + (MAX_VALUE_TOKEN + 1)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    goal_embed_dim: int = 64
    dialogue_embed_dim: int = 256
    goal_hidden: int = 64
    lm_hidden: int = 128
    output_hidden: int = 256
    attn_dim: int = 256
    summary_dim: int = 256
    max_count: int = 4  # output classes are takes 0..max_count plus no-agreement

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v <= 0:
                raise ValueError(f"{name} must be positive, got {v}")

    @property
    def n_output_classes(self) -> int:
        return self.max_count + 2

    @property
    def no_agreement_class(self) -> int:
        return self.max_count + 1

    def to_line(self) -> str:
        return " ".join(f"{k}={v}" for k, v in asdict(self).items())

    @classmethod
    def from_line(cls, line: str) -> "ModelConfig":
        kv = dict(item.split("=") for item in line.split())
        return cls(**{k: int(v) for k, v in kv.items()})


@dataclass
class LmState:
    """Language-model recurrence state plus the fixed goal context."""

    h: Tensor
    h_goal: Tensor


def goal_token_ids(goal: Sequence[int]) -> list[int]:
    """Map the six goal integers to dedicated count/value token ids."""
    if len(goal) != 6:
        raise ValueError(f"goal must have six fields, got {len(goal)}")
    ids = []
    for i, v in enumerate(goal):
        if i % 2 == 0:
            if not 0 <= v <= MAX_COUNT_TOKEN:
                raise ValueError(f"count {v} outside 0..{MAX_COUNT_TOKEN}")
            ids.append(v)
        else:
            if not 0 <= v <= MAX_VALUE_TOKEN:
                raise ValueError(f"value {v} outside 0..{MAX_VALUE_TOKEN}")
            ids.append(MAX_COUNT_TOKEN + 1 + v)
    return ids


class NegotiationModel:
    """Parameter container plus all forward computations."""

    def __init__(self, cfg: ModelConfig, store: Optional[ParamStore] = None):
        self.cfg = cfg
        if store is None:
            store = self._build_store(cfg)
        self.store = store

    @staticmethod
    def _build_store(cfg: ModelConfig) -> ParamStore:
        s = ParamStore()
        s.add("goal_emb", (N_GOAL_TOKENS, cfg.goal_embed_dim))
        ad.add_gru_params(s, "gru_g", cfg.goal_embed_dim, cfg.goal_hidden)
        s.add("E", (cfg.vocab_size, cfg.dialogue_embed_dim))
        ad.add_gru_params(s, "gru_w", cfg.dialogue_embed_dim + cfg.goal_hidden, cfg.lm_hidden)
        s.add("lm_h0", (cfg.lm_hidden,))
        # Bridge from the LM state to the tied-embedding logit space.
        s.add("out_proj", (cfg.dialogue_embed_dim, cfg.lm_hidden))
        out_in = cfg.dialogue_embed_dim + cfg.lm_hidden
        ad.add_gru_params(s, "gru_of", out_in, cfg.output_hidden)
        ad.add_gru_params(s, "gru_ob", out_in, cfg.output_hidden)
        s.add("attn_W_prime", (cfg.attn_dim, 2 * cfg.output_hidden))
        s.add("attn_W", (cfg.attn_dim, cfg.attn_dim))
        s.add("attn_w", (cfg.attn_dim,))
        s.add("W_s", (cfg.summary_dim, cfg.goal_hidden + cfg.lm_hidden))
        for i in range(6):
            s.add(f"out_cls_{i}", (cfg.n_output_classes, cfg.summary_dim))
        return s

    def init(self, rng: np.random.Generator, half_range: float = 0.1) -> None:
        ad.init_uniform(self.store, rng, half_range)

    # -- goal encoder --------------------------------------------------------

    def encode_goal(self, goal: Sequence[int]) -> Tensor:
        ids = goal_token_ids(goal)
        emb = ad.gather_rows(self.store["goal_emb"], ids)
        params = ad.gru_params(self.store, "gru_g")
        h = Tensor(np.zeros(self.cfg.goal_hidden))
        for t in range(len(ids)):
            h = ad.gru_cell(params, h, ad.row(emb, t))
        return h

    # -- language model ------------------------------------------------------

    def initial_lm_state(self, goal: Sequence[int]) -> LmState:
        return LmState(h=self.store["lm_h0"], h_goal=self.encode_goal(goal))

    def _lm_advance(self, state: LmState, prev_id: int) -> LmState:
        emb = ad.row(self.store["E"], prev_id)
        x = ad.concat([emb, state.h_goal])
        h = ad.gru_cell(ad.gru_params(self.store, "gru_w"), state.h, x)
        return LmState(h=h, h_goal=state.h_goal)

    def _logits_from_state(self, h: Tensor) -> Tensor:
        proj = ad.matmul(self.store["out_proj"], h)
        return ad.matmul(self.store["E"], proj)

    def lm_step(self, state: LmState, prev_id: int) -> tuple[LmState, Tensor]:
        """Advance one token; returns the new state and the vocab logits."""
        new_state = self._lm_advance(state, prev_id)
        return new_state, self._logits_from_state(new_state.h)

    def lm_states(self, goal: Sequence[int], token_ids: Sequence[int]) -> tuple[list[Tensor], Tensor]:
        """Teacher-force the sequence; returns per-position states and h_goal.

        State t is the one from which token t is predicted (input is the
        preceding token, with a pad token before position 0).
        """
        if not token_ids:
            raise ValueError("empty token sequence")
        h_goal = self.encode_goal(goal)
        inputs = [0] + list(token_ids[:-1])  # <pad> occupies id 0
        emb = ad.gather_rows(self.store["E"], inputs)
        params = ad.gru_params(self.store, "gru_w")
        h = self.store["lm_h0"]
        states = []
        for t in range(len(inputs)):
            x = ad.concat([ad.row(emb, t), h_goal])
            h = ad.gru_cell(params, h, x)
            states.append(h)
        return states, h_goal

    def sequence_logits(self, states: Sequence[Tensor]) -> Tensor:
        """(T+1, vocab) logits from the teacher-forced states via tied weights."""
        H = ad.stack_rows(list(states))
        proj = ad.matmul(H, ad.transpose(self.store["out_proj"]))
        return ad.matmul(proj, ad.transpose(self.store["E"]))

    def sequence_nll(self, ex: TrainingExample, vocab: Vocabulary) -> Tensor:
        token_ids = encode(vocab, ex.dialogue)
        states, _ = self.lm_states(ex.goal, token_ids)
        return ad.nll_rows(self.sequence_logits(states), token_ids)

    # -- output choice -------------------------------------------------------

    def choice_logits(
        self, token_ids: Sequence[int], states: Sequence[Tensor], h_goal: Tensor
    ) -> Tensor:
        """(6, classes) selection logits from the full dialogue."""
        if len(token_ids) != len(states):
            raise ValueError("token/state length mismatch")
        n = len(token_ids)
        emb = ad.gather_rows(self.store["E"], list(token_ids))
        zeros = Tensor(np.zeros(self.cfg.output_hidden))
        p_f = ad.gru_params(self.store, "gru_of")
        p_b = ad.gru_params(self.store, "gru_ob")
        fwd: list[Tensor] = [None] * n
        bwd: list[Tensor] = [None] * n
        h = zeros
        for t in range(n):
            h = ad.gru_cell(p_f, h, ad.concat([ad.row(emb, t), states[t]]))
            fwd[t] = h
        h = zeros
        for t in range(n - 1, -1, -1):
            h = ad.gru_cell(p_b, h, ad.concat([ad.row(emb, t), states[t]]))
            bwd[t] = h
        h_out = ad.stack_rows([ad.concat([bwd[t], fwd[t]]) for t in range(n)])
        attended = ad.tanh(ad.matmul(h_out, ad.transpose(self.store["attn_W_prime"])))
        h_attn = ad.matmul(attended, ad.transpose(self.store["attn_W"]))
        scores = ad.matmul(h_attn, self.store["attn_w"])
        alpha = ad.softmax(scores)
        context = ad.matmul(alpha, ad.stack_rows(list(states)))
        h_s = ad.tanh(ad.matmul(self.store["W_s"], ad.concat([h_goal, context])))
        rows = [ad.matmul(self.store[f"out_cls_{i}"], h_s) for i in range(6)]
        return ad.stack_rows(rows)

    def predict_choice(
        self, token_ids: Sequence[int], states: Sequence[Tensor], h_goal: Tensor
    ) -> np.ndarray:
        """Six per-position distributions over output classes, shape (6, classes)."""
        logits = self.choice_logits(token_ids, states, h_goal).value
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def choice_distributions(self, goal: Sequence[int], token_ids: Sequence[int]) -> np.ndarray:
        states, h_goal = self.lm_states(goal, token_ids)
        return self.predict_choice(token_ids, states, h_goal)

    # -- combined loss -------------------------------------------------------

    def output_classes(self, output: Optional[Sequence[int]]) -> list[int]:
        if output is None:
            return [self.cfg.no_agreement_class] * 6
        classes = []
        for v in output:
            if not 0 <= v <= self.cfg.max_count:
                raise ValueError(f"take {v} outside 0..{self.cfg.max_count}")
            classes.append(v)
        return classes

    def total_loss(self, ex: TrainingExample, vocab: Vocabulary, alpha: float = 0.5) -> Tensor:
        """Token NLL plus ``alpha`` times the selection NLL (skipped when the
        record has no consistent agreement to train against)."""
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        token_ids = encode(vocab, ex.dialogue)
        states, h_goal = self.lm_states(ex.goal, token_ids)
        loss = ad.nll_rows(self.sequence_logits(states), token_ids)
        if ex.trainable_output and alpha > 0:
            logits = self.choice_logits(token_ids, states, h_goal)
            out_nll = ad.nll_rows(logits, self.output_classes(ex.output))
            loss = ad.add(loss, ad.scale(out_nll, alpha))
        return loss

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        ad.save_checkpoint(self.store, path, self.cfg.vocab_size, self.cfg.to_line())

    @classmethod
    def load(cls, path) -> "NegotiationModel":
        store, vocab_size, config_line = ad.load_checkpoint(path)
        if config_line is None:
            raise ValueError(f"{path} has no model config line")
        cfg = ModelConfig.from_line(config_line)
        if cfg.vocab_size != vocab_size:
            raise ValueError("config/header vocab size mismatch")
        return cls(cfg, store)


def sample_token(logits: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    """Sample a token id from softmax(logits / temperature)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    scaled = logits / temperature
    shifted = scaled - scaled.max()
    p = np.exp(shifted)
    p /= p.sum()
    return int(rng.choice(len(p), p=p))


def perplexity(total_nll: float, token_count: int) -> float:
    return float(np.exp(total_nll / max(1, token_count)))
