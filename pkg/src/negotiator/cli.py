"""Command-line entry points.

Every subcommand accepts ``--seed`` and ``--config <file>`` (a flat JSON object
whose keys override the matching dataclass defaults), and reruns with identical
arguments produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Optional, Sequence

import numpy as np

from .agents import NegotiationAgent, RolloutConfig, run_dialogue
from .corpus import (
    SynthConfig,
    Vocabulary,
    build_vocab,
    load_records,
    save_records,
    synth_corpus,
    to_perspectives,
)
from .env import GeneratorConfig, format_scenario, sample_scenario
from .evaluation import corpus_stats, evaluate_pairing
from .model import ModelConfig, NegotiationModel
from .service import NegotiationService, ServiceError, create_app
from .training import RlConfig, SupervisedConfig, train_rl, train_supervised


class CliError(Exception):
    pass


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            cfg = json.load(f)
    except OSError as e:
        raise CliError(f"cannot read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise CliError(f"malformed config {path}: {e}")
    if not isinstance(cfg, dict):
        raise CliError(f"malformed config {path}: expected a JSON object")
    return cfg


def _build(dc_cls, cfg: dict, **overrides):
    """Instantiate a config dataclass from the matching keys of a flat dict."""
    names = {f.name for f in dataclasses.fields(dc_cls)}
    kwargs = {k: v for k, v in cfg.items() if k in names}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return dc_cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise CliError(f"bad {dc_cls.__name__} settings: {e}")


def _scenario_config(cfg: dict) -> GeneratorConfig:
    return _build(GeneratorConfig, cfg)


def _load_vocab(path: str) -> Vocabulary:
    try:
        return Vocabulary.load(path)
    except OSError as e:
        raise CliError(f"cannot read vocabulary {path}: {e}")


def _load_model(path: str) -> NegotiationModel:
    try:
        return NegotiationModel.load(path)
    except OSError as e:
        raise CliError(f"cannot read checkpoint {path}: {e}")


def _load_examples(path: str):
    try:
        return load_records(path)
    except OSError as e:
        raise CliError(f"cannot read records {path}: {e}")


def parse_policy(text: str) -> Optional[RolloutConfig]:
    """``likelihood`` | ``rollout`` | ``rollout:C,S`` -> decoding policy."""
    if text == "likelihood":
        return None
    if text == "rollout":
        return RolloutConfig()
    if text.startswith("rollout:"):
        parts = text[len("rollout:"):].split(",")
        if len(parts) != 2:
            raise CliError(f"bad policy {text!r}: expected rollout:C,S")
        try:
            return RolloutConfig(candidates=int(parts[0]), samples=int(parts[1]))
        except ValueError as e:
            raise CliError(f"bad policy {text!r}: {e}")
    raise CliError(f"unknown policy {text!r} (use likelihood, rollout, or rollout:C,S)")


# -- subcommands -------------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = _load_config(args.config)
    style = _build(SynthConfig, cfg, scenario=_scenario_config(cfg))
    rng = np.random.default_rng(args.seed)
    records = synth_corpus(rng, args.n, style)
    examples = [p for r in records for p in to_perspectives(r)]
    save_records(examples, args.out)
    stats = corpus_stats(records)
    for line in stats.lines():
        print(line)
    return 0


def cmd_build_vocab(args) -> int:
    examples = _load_examples(args.data)
    vocab = build_vocab(examples, min_count=args.min_count)
    vocab.save(args.out)
    print(f"vocab_size={len(vocab)}")
    return 0


def cmd_train_sv(args) -> int:
    cfg = _load_config(args.config)
    train_examples = _load_examples(args.train)
    valid_examples = _load_examples(args.valid)
    if args.vocab:
        vocab = _load_vocab(args.vocab)
    else:
        vocab = build_vocab(train_examples, min_count=cfg.get("min_count", 20))
    if args.vocab_out:
        vocab.save(args.vocab_out)
    model_cfg = _build(ModelConfig, cfg, vocab_size=len(vocab))
    model = NegotiationModel(model_cfg)
    model.init(np.random.default_rng(args.seed))
    sv_cfg = _build(SupervisedConfig, cfg, epochs=args.epochs)
    report = train_supervised(
        model, vocab, train_examples, valid_examples, sv_cfg,
        np.random.default_rng(args.seed + 1), on_epoch=print,
    )
    model.save(args.out)
    print(f"best_valid_ppl={report.best_valid_ppl:.6f} best_epoch={report.best_epoch}")
    return 0


def cmd_train_rl(args) -> int:
    cfg = _load_config(args.config)
    model = _load_model(args.model)
    partner = _load_model(args.partner)
    vocab = _load_vocab(args.vocab)
    examples = _load_examples(args.train) if args.train else ()
    rl_cfg = _build(RlConfig, cfg, episodes=args.episodes)
    scenario_cfg = _scenario_config(cfg)
    report = train_rl(
        model, partner, vocab,
        lambda rng: sample_scenario(rng, scenario_cfg),
        rl_cfg, np.random.default_rng(args.seed), supervised_examples=examples,
    )
    model.save(args.out)
    print(f"episodes={len(report.rewards)}")
    print(f"mean_reward={report.mean_reward:.4f}")
    print(f"pct_agreed={100.0 * report.agreement_count / len(report.rewards):.2f}")
    print(f"partner_checksum={partner.store.checksum()}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    model_a = _load_model(args.model_a)
    model_b = _load_model(args.model_b)
    vocab = _load_vocab(args.vocab)
    agent_a = NegotiationAgent(model_a, vocab, policy=parse_policy(args.policy_a))
    agent_b = NegotiationAgent(model_b, vocab, policy=parse_policy(args.policy_b))
    rng = np.random.default_rng(args.seed)
    scenario_cfg = _scenario_config(cfg)
    scenarios = [sample_scenario(rng, scenario_cfg) for _ in range(args.n_scenarios)]
    report = evaluate_pairing(
        agent_a, agent_b, scenarios, role_swap=not args.no_role_swap, rng=rng
    )
    text = report.table(args.policy_a.upper(), args.policy_b.upper())
    body = text + "\n" + "\n".join(report.lines()) + "\n"
    print(body, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(body)
    return 0


def cmd_selfplay(args) -> int:
    cfg = _load_config(args.config)
    model = _load_model(args.model)
    vocab = _load_vocab(args.vocab)
    agent = NegotiationAgent(model, vocab, policy=parse_policy(args.policy))
    rng = np.random.default_rng(args.seed)
    scenario_cfg = _scenario_config(cfg)
    lines = []
    for i in range(args.n):
        scenario = sample_scenario(rng, scenario_cfg)
        t = run_dialogue(agent, agent, scenario, rng=rng)
        lines.append(f"# dialogue {i}")
        lines.append(format_scenario(scenario))
        lines.append(" ".join(t.tokens))
        lines.append(t.trailer())
    body = "\n".join(lines) + "\n"
    print(body, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(body)
    return 0


def cmd_chat(args, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    model = _load_model(args.model)
    vocab = _load_vocab(args.vocab)
    service = NegotiationService(model, vocab, base_seed=args.seed)
    view = service.create_session(seed=args.seed)
    sid = view["id"]

    def out(line):
        print(line, file=stdout)

    out(f"pool: book={view['pool'][0]} hat={view['pool'][1]} ball={view['pool'][2]}")
    out(f"your values: book={view['values'][0]} hat={view['values'][1]} "
        f"ball={view['values'][2]}")
    out("type messages; '<choose>' ends the dialogue; then 'take B H b' or 'no deal'.")
    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        state = service.session_view(sid)["state"]
        try:
            if state == "awaiting_selections":
                if line == "no deal":
                    outcome = service.post_selection(sid, "no_agreement")
                elif line.startswith("take"):
                    take = [int(x) for x in line.split()[1:]]
                    outcome = service.post_selection(sid, take)
                else:
                    out("selection required: 'take B H b' or 'no deal'")
                    continue
                out(f"agreed={outcome['agreed']} your_points={outcome['reward_human']} "
                    f"agent_points={outcome['reward_agent']} "
                    f"agent_values={outcome['agent_values']}")
                return 0
            result = service.post_message(sid, line)
            for event in result["events"]:
                out(f"{event['speaker']}: {event['text']}")
            if result["state"] == "awaiting_selections":
                out("dialogue over: enter 'take B H b' or 'no deal'")
            elif result["state"] == "done":
                out("turn limit reached: no deal, 0 points each")
                return 0
        except (ServiceError, ValueError) as e:
            out(f"error: {e}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    model = _load_model(args.model)
    vocab = _load_vocab(args.vocab)
    service = NegotiationService(model, vocab, base_seed=args.seed)
    app = create_app(service, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="negotiator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="flat JSON file of setting overrides")

    p = sub.add_parser("gen-data", help="generate a synthetic dialogue corpus")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("build-vocab", help="build a vocabulary from records")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--min-count", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train-sv", help="supervised training")
    common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--vocab")
    p.add_argument("--vocab-out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_sv)

    p = sub.add_parser("train-rl", help="self-play policy-gradient fine-tuning")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--partner", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--train", help="records for interleaved supervised updates")
    p.add_argument("--episodes", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_rl)

    p = sub.add_parser("eval", help="pairwise tournament evaluation")
    common(p)
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--policy-a", default="likelihood")
    p.add_argument("--policy-b", default="likelihood")
    p.add_argument("--n-scenarios", type=int, default=400)
    p.add_argument("--no-role-swap", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selfplay", help="print self-play dialogues")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--policy", default="likelihood")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_selfplay)

    p = sub.add_parser("chat", help="terminal human-vs-agent dialogue")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("serve", help="HTTP session service")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", help="directory of UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
