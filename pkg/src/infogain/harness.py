"""Batch experiment runner, metrics, and the preference-elicitation pipeline.

Entity games produce success-rate curves over turns; preference sessions
produce per-turn mean judge ratings.  ``run_benchmark`` fans games out over a
thread pool, writes one transcript file per game so runs are resumable and
parallelism-safe, then computes metrics in a single-writer pass over the
per-game files in dataset order.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from infogain.backends.base import Backend, BackendError
from infogain.belief import FilterReport
from infogain.controller import (
    SCHEMA_VERSION,
    GameRecord,
    Outcome,
    SessionConfig,
    apply_answer,
    config_from_dict,
    config_to_dict,
    game_record_from_dict,
    game_record_to_dict,
    question_from_dict,
    question_to_dict,
    report_from_dict,
    report_to_dict,
    run_game,
    run_turn,
    start_session,
    turn_seed,
)
from infogain.core import Answer, BeliefState, History, Hypothesis, Question, normalize_key
from infogain.datasets import TargetEntry, evaluate_guess  # noqa: F401  (re-exported)

RECOMMENDATION_ROUNDS = 3

BackendFactory = Callable[[TargetEntry, SessionConfig], tuple[Backend, Backend]]


@dataclass(frozen=True)
class RunMetrics:
    """Per-turn aggregates over a batch of sessions.

    Entity runs fill ``success``/``success_sem`` (cumulative success
    proportion, monotone since success is absorbing); preference runs fill
    ``rating_mean``/``rating_sem`` (None where no ratings exist for a turn).
    """

    n: int
    turns: tuple[int, ...]
    success: tuple[float, ...] = ()
    success_sem: tuple[float, ...] = ()
    rating_mean: tuple[float | None, ...] = ()
    rating_sem: tuple[float | None, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("metrics need at least one session")
        for name in ("success", "success_sem", "rating_mean", "rating_sem"):
            values = getattr(self, name)
            if values and len(values) != len(self.turns):
                raise ValueError(f"{name} not aligned with turns")
        for p in self.success:
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"proportion {p} outside [0, 1]")
        if any(b < a for a, b in zip(self.success, self.success[1:])):
            raise ValueError("success proportions must be non-decreasing")


def proportion_sem(p: float, n: int) -> float:
    """Standard error of a proportion, sqrt(p(1-p)/(n-1)); zero when n = 1."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"proportion {p} outside [0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 0.0
    return math.sqrt(p * (1.0 - p) / (n - 1))


def _shared_config(configs: Sequence[SessionConfig]) -> SessionConfig:
    """All configs must agree up to the per-game seed."""
    reference = config_to_dict(configs[0])
    reference.pop("seed")
    for cfg in configs[1:]:
        other = config_to_dict(cfg)
        other.pop("seed")
        if other != reference:
            raise ValueError("records mix different session configs")
    return configs[0]


def first_success_turn(record: GameRecord, accounting: str = "combined") -> int | None:
    """Earliest turn the game counts as solved under the chosen accounting.

    "terminal" counts only an in-game guess answered Yes; "evaluation" counts
    only the per-turn greedy evaluation guesses; "combined" (default) takes
    whichever comes first.  Returns None when the game never succeeds.
    """
    if accounting not in ("combined", "evaluation", "terminal"):
        raise ValueError(f"unknown accounting {accounting!r}")
    candidates: list[int] = []
    if accounting in ("combined", "terminal") and record.outcome is Outcome.SUCCESS:
        assert record.success_turn is not None
        candidates.append(record.success_turn)
    if accounting in ("combined", "evaluation"):
        for turn in record.turns:
            if turn.eval_guess_correct:
                candidates.append(turn.index)
                break
    return min(candidates) if candidates else None


def success_curve(
    records: Sequence[GameRecord], accounting: str = "combined"
) -> RunMetrics:
    """Cumulative success proportion per turn with its standard error."""
    if not records:
        raise ValueError("no records")
    config = _shared_config([r.config for r in records])
    n = len(records)
    solved_at = [first_success_turn(r, accounting) for r in records]
    turns = tuple(range(1, config.budget + 1))
    success: list[float] = []
    sems: list[float] = []
    for t in turns:
        wins = sum(1 for s in solved_at if s is not None and s <= t)
        p = wins / n
        success.append(p)
        sems.append(proportion_sem(p, n))
    return RunMetrics(n=n, turns=turns, success=tuple(success), success_sem=tuple(sems))


# --- preference elicitation --------------------------------------------------


@dataclass(frozen=True)
class RecommendationBatch:
    """Consistent, deduplicated recommendations; shortfall marks a short list."""

    items: tuple[str, ...]
    shortfall: bool


def recommend_items(
    history: History,
    belief: BeliefState,
    backend: Backend,
    count: int = 10,
) -> RecommendationBatch:
    """Up to ``count`` recommendations consistent with the history.

    Each round asks the backend for a growing batch (so deterministic
    backends surface new items), dedups by normalized title, and drops items
    the backend judges incompatible with any recorded answer.  After
    RECOMMENDATION_ROUNDS rounds whatever was found is returned, flagged as a
    shortfall when under ``count``.  The belief is accepted alongside the
    history so callers hand over the full session view; generation itself
    conditions on the history.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    del belief
    kept: dict[str, str] = {}
    checked: set[str] = set()
    for round_index in range(RECOMMENDATION_ROUNDS):
        batch = backend.recommendations(history, count * (round_index + 1))
        for item in batch:
            key = normalize_key(item)
            if key in checked:
                continue
            checked.add(key)
            if backend.item_consistency(item, history):
                kept[key] = item
            if len(kept) >= count:
                break
        if len(kept) >= count:
            break
    items = tuple(list(kept.values())[:count])
    return RecommendationBatch(items=items, shortfall=len(items) < count)


@dataclass(frozen=True)
class PreferenceTurn:
    """One preference-elicitation turn: question, answer, recommendations, ratings."""

    index: int
    question: Question
    answer: Answer
    answer_text: str
    report: FilterReport | None
    recommendations: tuple[str, ...]
    shortfall: bool
    ratings: tuple[float | None, ...]
    elapsed: float

    def __post_init__(self) -> None:
        if len(self.ratings) != len(self.recommendations):
            raise ValueError("one rating slot per recommendation")


@dataclass(frozen=True)
class PreferenceRecord:
    """Full transcript of one simulated user's preference session."""

    config: SessionConfig
    persona_name: str
    turns: tuple[PreferenceTurn, ...]
    initial_report: FilterReport | None
    error: str | None = None
    schema_version: int = SCHEMA_VERSION


def run_preference_session(
    config: SessionConfig,
    persona: Hypothesis,
    questioner: Backend,
    answerer: Backend,
    count: int = 10,
) -> PreferenceRecord:
    """Question -> answer -> recommend -> judge, for ``config.budget`` turns.

    The answerer plays the simulated user (it answers questions and judges
    recommendations against ``persona``); the questioner never sees the
    persona.  Preference sessions never guess: the state machine only emits
    guesses for binary entity sessions.
    """
    if questioner is answerer:
        raise ValueError("questioner and answerer must be distinct instances")
    turns: list[PreferenceTurn] = []
    error: str | None = None
    initial_report: FilterReport | None = None
    try:
        state, initial_report = start_session(config, questioner)
        while state.turn < config.budget:
            started = time.perf_counter()
            chosen, state = run_turn(state, questioner)
            answer = answerer.simulate_answer(
                persona, chosen, seed=turn_seed(config.seed, state.turn + 1)
            )
            state, report, _ = apply_answer(state, answer, questioner)
            batch = recommend_items(state.history, state.belief, questioner, count)
            ratings = tuple(answerer.judge_recommendations(persona, batch.items))
            turns.append(
                PreferenceTurn(
                    index=state.turn,
                    question=chosen,
                    answer=answer,
                    answer_text=chosen.options[answer.option_index].text,
                    report=report,
                    recommendations=batch.items,
                    shortfall=batch.shortfall,
                    ratings=ratings,
                    elapsed=time.perf_counter() - started,
                )
            )
    except BackendError as exc:
        error = str(exc)
    return PreferenceRecord(
        config=config,
        persona_name=persona.text,
        turns=tuple(turns),
        initial_report=initial_report,
        error=error,
    )


def rate_run(records: Sequence[PreferenceRecord]) -> RunMetrics:
    """Mean judge rating per turn; SEM across users per turn.

    The mean pools every non-missing rating at the turn; the SEM is the
    sample standard deviation (n-1 denominator) of per-user mean ratings,
    divided by sqrt(users).  Missing ratings are excluded throughout; turns
    with no ratings at all report None.
    """
    if not records:
        raise ValueError("no records")
    config = _shared_config([r.config for r in records])
    turns = tuple(range(1, config.budget + 1))
    means: list[float | None] = []
    sems: list[float | None] = []
    for t in turns:
        pooled: list[float] = []
        user_means: list[float] = []
        for record in records:
            ratings = [
                value
                for turn in record.turns
                if turn.index == t
                for value in turn.ratings
                if value is not None
            ]
            if ratings:
                pooled.extend(ratings)
                user_means.append(math.fsum(ratings) / len(ratings))
        if not pooled:
            means.append(None)
            sems.append(None)
            continue
        means.append(math.fsum(pooled) / len(pooled))
        if len(user_means) < 2:
            sems.append(0.0)
        else:
            center = math.fsum(user_means) / len(user_means)
            variance = math.fsum((u - center) ** 2 for u in user_means) / (
                len(user_means) - 1
            )
            sems.append(math.sqrt(variance) / math.sqrt(len(user_means)))
    return RunMetrics(
        n=len(records), turns=turns, rating_mean=tuple(means), rating_sem=tuple(sems)
    )


def preference_turn_to_dict(turn: PreferenceTurn) -> dict:
    return {
        "index": turn.index,
        "question": question_to_dict(turn.question),
        "answer": {"question_id": turn.answer.question_id, "option_index": turn.answer.option_index},
        "answer_text": turn.answer_text,
        "report": None if turn.report is None else report_to_dict(turn.report),
        "recommendations": list(turn.recommendations),
        "shortfall": turn.shortfall,
        "ratings": list(turn.ratings),
        "elapsed": turn.elapsed,
    }


def preference_record_to_dict(record: PreferenceRecord) -> dict:
    return {
        "schema_version": record.schema_version,
        "config": config_to_dict(record.config),
        "persona": record.persona_name,
        "turns": [preference_turn_to_dict(t) for t in record.turns],
        "initial_report": (
            None if record.initial_report is None else report_to_dict(record.initial_report)
        ),
        "error": record.error,
    }


def preference_record_from_dict(data: dict) -> PreferenceRecord:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported transcript schema version {version!r}")
    return PreferenceRecord(
        config=config_from_dict(data["config"]),
        persona_name=data["persona"],
        turns=tuple(
            PreferenceTurn(
                index=t["index"],
                question=question_from_dict(t["question"]),
                answer=Answer(t["answer"]["question_id"], t["answer"]["option_index"]),
                answer_text=t["answer_text"],
                report=None if t["report"] is None else report_from_dict(t["report"]),
                recommendations=tuple(t["recommendations"]),
                shortfall=t["shortfall"],
                ratings=tuple(t["ratings"]),
                elapsed=t["elapsed"],
            )
            for t in data["turns"]
        ),
        initial_report=(
            None
            if data["initial_report"] is None
            else report_from_dict(data["initial_report"])
        ),
        error=data["error"],
    )


# --- batch benchmark ---------------------------------------------------------


def game_seed(seed: int, index: int) -> int:
    """Per-game root seed; each game then derives its own per-turn seeds."""
    return turn_seed(seed, index)


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
    tmp.replace(path)


def write_metrics_csv(
    path: str | Path, curves: Sequence[tuple[str, RunMetrics]]
) -> None:
    """CSV with header strategy,turn,p,sem,n; floats via repr for stable bytes."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "turn", "p", "sem", "n"])
        for strategy, metrics in curves:
            for turn, p, sem in zip(metrics.turns, metrics.success, metrics.success_sem):
                writer.writerow([strategy, turn, repr(p), repr(sem), metrics.n])


def run_benchmark(
    dataset: Sequence[TargetEntry],
    config: SessionConfig,
    factory: BackendFactory,
    run_dir: str | Path,
    parallelism: int = 1,
    accounting: str = "combined",
) -> RunMetrics:
    """One game per target, transcripts and metrics under ``run_dir``.

    Layout: games/<target-id>.json per completed game, quarantine/<target-id>.json
    for games that crashed (recorded, never fatal), transcripts.jsonl and
    metrics.csv rebuilt at the end in dataset order by a single writer.
    Completed targets are skipped on rerun, and per-game seeding makes the
    outputs identical at any parallelism.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    root = Path(run_dir)
    games_dir = root / "games"
    quarantine_dir = root / "quarantine"
    games_dir.mkdir(parents=True, exist_ok=True)
    quarantine_dir.mkdir(parents=True, exist_ok=True)

    config_path = root / "config.json"
    snapshot = config_to_dict(config)
    if config_path.exists():
        previous = json.loads(config_path.read_text(encoding="utf-8"))
        if previous != snapshot:
            raise ValueError(f"run directory {root} was started with a different config")
    else:
        config_path.write_text(json.dumps(snapshot, ensure_ascii=False), encoding="utf-8")

    def play(index: int, entry: TargetEntry) -> None:
        target_path = games_dir / f"{entry.id}.json"
        if target_path.exists():
            return
        game_config = replace(config, seed=game_seed(config.seed, index))
        try:
            questioner, answerer = factory(entry, game_config)
            record = run_game(game_config, entry, questioner, answerer)
            _write_json(target_path, game_record_to_dict(record))
        except Exception as exc:  # quarantined, never fatal to the run
            _write_json(
                quarantine_dir / f"{entry.id}.json",
                {"target": entry.name, "error": f"{type(exc).__name__}: {exc}"},
            )

    if parallelism == 1:
        for index, entry in enumerate(dataset):
            play(index, entry)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [
                pool.submit(play, index, entry) for index, entry in enumerate(dataset)
            ]
            for future in futures:
                future.result()

    records: list[GameRecord] = []
    with open(root / "transcripts.jsonl", "w", encoding="utf-8") as fh:
        for entry in dataset:
            target_path = games_dir / f"{entry.id}.json"
            if not target_path.exists():
                continue
            payload = json.loads(target_path.read_text(encoding="utf-8"))
            records.append(game_record_from_dict(payload))
            fh.write(json.dumps(payload, ensure_ascii=False) + "\n")
    if not records:
        raise ValueError("no games completed; see quarantine directory")

    metrics = success_curve(records, accounting=accounting)
    write_metrics_csv(root / "metrics.csv", [(config.strategy.value, metrics)])
    return metrics


def run_ablation(
    dataset: Sequence[TargetEntry],
    config: SessionConfig,
    strategies: Sequence,
    factory: BackendFactory,
    run_dir: str | Path,
    parallelism: int = 1,
    accounting: str = "combined",
) -> dict[str, RunMetrics]:
    """run_benchmark per strategy under run_dir/<strategy>, plus a merged CSV."""
    root = Path(run_dir)
    results: dict[str, RunMetrics] = {}
    for strategy in strategies:
        sub_config = replace(config, strategy=strategy)
        results[strategy.value] = run_benchmark(
            dataset,
            sub_config,
            factory,
            root / strategy.value,
            parallelism=parallelism,
            accounting=accounting,
        )
    write_metrics_csv(root / "metrics.csv", list(results.items()))
    return results


def write_preference_records(
    records: Iterable[PreferenceRecord], path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(preference_record_to_dict(record), ensure_ascii=False) + "\n")


def read_preference_records(path: str | Path) -> list[PreferenceRecord]:
    records: list[PreferenceRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(preference_record_from_dict(json.loads(line)))
    return records
