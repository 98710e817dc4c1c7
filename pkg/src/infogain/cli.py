"""Command-line entry points: play, bench, ablate, serve.

A JSON config file provides session settings (top-level SessionConfig fields)
plus an optional "backend" object for remote endpoints; individual flags
override the file.  Backend specs:

    animals              tabular emulation over the bundled animals list
    tabular:PATH         tabular model file
    personas             bundled persona world (preference sessions)
    personas:PATH        persona world from a JSON file
    remote[:ENDPOINT]    OpenAI-compatible chat-completions endpoint
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from infogain.backends.base import Backend, BackendConfig, LogprobMode
from infogain.backends.personas import PersonaBackend, bundled_persona_world, load_persona_world
from infogain.backends.remote import RemoteBackend
from infogain.backends.tabular import TabularBackend, TabularModel, bit_split_model, load_tabular_model
from infogain.controller import (
    SessionConfig,
    StrategyKind,
    apply_answer,
    run_turn,
    start_session,
)
from infogain.core import Answer, GuessQuestion, QuestionKind
from infogain.datasets import TargetEntry, animals_dataset, load_dataset
from infogain.harness import run_ablation, run_benchmark
from infogain.service import SessionService, create_app, parse_session_config


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise SystemExit(f"config file {path} must hold a JSON object")
    return data


def _session_config(args: argparse.Namespace, file_data: dict) -> SessionConfig:
    merged = dict(file_data)
    merged.pop("backend", None)
    for name in ("strategy", "seed", "budget", "question_kind"):
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    return parse_session_config(merged)


def _backend_settings(file_data: dict) -> BackendConfig:
    raw = dict(file_data.get("backend", {}))
    raw.pop("topic", None)
    if "logprob_mode" in raw:
        raw["logprob_mode"] = LogprobMode(raw["logprob_mode"])
    return BackendConfig(**raw)


def _dataset(spec: str) -> tuple[TargetEntry, ...]:
    if spec == "animals":
        return animals_dataset()
    return load_dataset(spec)


def _emulation_model(dataset: tuple[TargetEntry, ...], seed: int) -> TabularModel:
    return bit_split_model([e.name for e in dataset], topic="animal", seed=seed)


class _BackendBuilder:
    """Builds questioner/answerer pairs for a backend spec string."""

    def __init__(self, spec: str, file_data: dict, dataset: tuple[TargetEntry, ...] | None):
        self.spec = spec
        self.file_data = file_data
        self.dataset = dataset
        self._shared_model: TabularModel | None = None

    def _tabular_model(self, seed: int) -> TabularModel:
        if self._shared_model is None:
            kind, _, path = self.spec.partition(":")
            if kind == "tabular":
                self._shared_model = load_tabular_model(path)
            else:
                if self.dataset is None:
                    raise SystemExit("the animals emulation backend needs a dataset")
                self._shared_model = _emulation_model(self.dataset, seed)
        return self._shared_model

    def questioner(self, config: SessionConfig) -> Backend:
        return self._build(config, offset=0)

    def pair(self, config: SessionConfig) -> tuple[Backend, Backend]:
        return self._build(config, offset=0), self._build(config, offset=1)

    def _build(self, config: SessionConfig, offset: int) -> Backend:
        kind, _, rest = self.spec.partition(":")
        if kind in ("animals", "tabular"):
            return TabularBackend(self._tabular_model(config.seed), seed=config.seed + offset)
        if kind == "personas":
            world = load_persona_world(rest) if rest else bundled_persona_world()
            return PersonaBackend(world, seed=config.seed + offset)
        if kind == "remote":
            settings = _backend_settings(self.file_data)
            if rest:
                settings = BackendConfig(**{**settings.__dict__, "endpoint": rest})
            topic = self.file_data.get("backend", {}).get("topic", "animal")
            return RemoteBackend(settings, topic=topic, question_kind=config.question_kind)
        raise SystemExit(f"unknown backend spec {self.spec!r}")


def _cmd_play(args: argparse.Namespace) -> int:
    file_data = _load_config_file(args.config)
    config = _session_config(args, file_data)
    builder = _BackendBuilder(args.backend, file_data, _dataset(args.dataset))
    backend = builder.questioner(config)
    print(f"Think of your answer; I ask up to {config.budget} questions. Reply with the option label.")
    state, _ = start_session(config, backend)
    while state.turn < config.budget:
        question, state = run_turn(state, backend)
        print(f"\nQ{state.turn + 1}: {question.text}")
        for option in question.options:
            print(f"  [{option.label}] {option.text}")
        while True:
            label = input("> ").strip()
            try:
                index = question.option_index(label)
                break
            except KeyError:
                print(f"pick one of: {', '.join(o.label for o in question.options)}")
        state, _, solved = apply_answer(state, Answer(question.id, index), backend)
        if len(state.belief) > 0:
            print(f"  ({len(state.belief)} candidates remain)")
        if solved:
            assert isinstance(question, GuessQuestion)
            print(f"\nGot it in {state.turn}: {question.guess.text}")
            return 0
    print(f"\nBudget of {config.budget} exhausted; you win.")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    file_data = _load_config_file(args.config)
    config = _session_config(args, file_data)
    dataset = _dataset(args.dataset)
    if args.limit is not None:
        dataset = dataset[: args.limit]
    builder = _BackendBuilder(args.backend, file_data, dataset)
    metrics = run_benchmark(
        dataset,
        config,
        lambda entry, cfg: builder.pair(cfg),
        args.run_dir,
        parallelism=args.parallelism,
        accounting=args.accounting,
    )
    final = metrics.success[-1] if metrics.success else 0.0
    print(f"{config.strategy.value}: n={metrics.n} final success {final:.3f}")
    print(f"artifacts in {args.run_dir}")
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    file_data = _load_config_file(args.config)
    config = _session_config(args, file_data)
    dataset = _dataset(args.dataset)
    if args.limit is not None:
        dataset = dataset[: args.limit]
    strategies = [StrategyKind(s.strip()) for s in args.strategies.split(",") if s.strip()]
    builder = _BackendBuilder(args.backend, file_data, dataset)
    results = run_ablation(
        dataset,
        config,
        strategies,
        lambda entry, cfg: builder.pair(cfg),
        args.run_dir,
        parallelism=args.parallelism,
        accounting=args.accounting,
    )
    for name, metrics in results.items():
        final = metrics.success[-1] if metrics.success else 0.0
        print(f"{name}: n={metrics.n} final success {final:.3f}")
    print(f"artifacts in {args.run_dir}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    file_data = _load_config_file(args.config)
    dataset = _dataset(args.dataset)
    builder = _BackendBuilder(args.backend, file_data, dataset)
    service = SessionService(builder.questioner, run_dir=args.run_dir)
    app = create_app(service)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infogain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file (session fields + optional backend object)")
        p.add_argument("--seed", type=int, help="root seed override")
        p.add_argument("--strategy", choices=[s.value for s in StrategyKind], help="question-selection strategy")
        p.add_argument("--backend", default="animals", help="backend spec (see module docstring)")
        p.add_argument("--dataset", default="animals", help='"animals" or a dataset file path')
        p.add_argument("--budget", type=int, help="max questions per session")
        p.add_argument(
            "--question-kind",
            dest="question_kind",
            choices=[k.value for k in QuestionKind],
            help="binary or multiple-choice",
        )

    p_play = sub.add_parser("play", help="interactive session; you answer in the terminal")
    common(p_play)
    p_play.set_defaults(func=_cmd_play)

    for name, func, helptext in (
        ("bench", _cmd_bench, "simulated benchmark over a dataset"),
        ("ablate", _cmd_ablate, "benchmark several strategies side by side"),
    ):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--run-dir", required=True, help="artifact directory")
        p.add_argument("--parallelism", type=int, default=1)
        p.add_argument("--limit", type=int, help="only the first N dataset entries")
        p.add_argument(
            "--accounting",
            choices=["combined", "evaluation", "terminal"],
            default="combined",
            help="which guesses count toward the success curve",
        )
        if name == "ablate":
            p.add_argument(
                "--strategies",
                default="eig,entropy,naive,data-estimation",
                help="comma-separated strategy list",
            )
        p.set_defaults(func=func)

    p_serve = sub.add_parser("serve", help="run the HTTP session API")
    common(p_serve)
    p_serve.add_argument("--run-dir", help="session persistence directory")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
