"""Metrics math, recommendation pipeline, and the resumable benchmark runner."""

import json
import math
from pathlib import Path

import pytest

from infogain.backends.personas import PersonaBackend, PersonaEntry, PersonaWorld
from infogain.backends.tabular import TabularBackend, bit_split_model
from infogain.belief import FilterConfig
from infogain.controller import (
    GameRecord,
    GuessRecord,
    Outcome,
    SessionConfig,
    StrategyKind,
    TurnRecord,
    turn_seed,
)
from infogain.core import (
    Answer,
    BeliefState,
    History,
    Hypothesis,
    Question,
    QuestionKind,
    binary_options,
    multiple_choice_options,
)
from infogain.datasets import TargetEntry
from infogain.harness import (
    PreferenceRecord,
    PreferenceTurn,
    RunMetrics,
    first_success_turn,
    game_seed,
    proportion_sem,
    rate_run,
    read_preference_records,
    recommend_items,
    run_ablation,
    run_benchmark,
    run_preference_session,
    success_curve,
    write_metrics_csv,
    write_preference_records,
)

from tests.stubs import RowStub


def binq(qid="q1"):
    return Question(qid, "Coin?", binary_options(), QuestionKind.BINARY)


def fake_record(budget=5, terminal=None, eval_first=None, seed=0, strategy=StrategyKind.EIG):
    """Synthetic game: optional terminal success turn and first correct eval turn."""
    cfg = SessionConfig(budget=budget, seed=seed, strategy=strategy)
    n_turns = terminal if terminal is not None else budget
    turns = tuple(
        TurnRecord(
            index=i,
            chosen=binq(),
            is_guess=(terminal == i),
            candidates=(),
            answer=Answer("q1", 0),
            answer_text="Yes",
            report=None,
            used_fallback=False,
            eval_guess="x",
            eval_guess_correct=(eval_first is not None and i >= eval_first),
            eval_guess_fallback=False,
            elapsed=0.0,
        )
        for i in range(1, n_turns + 1)
    )
    guesses = (GuessRecord(terminal, "x", True),) if terminal is not None else ()
    return GameRecord(
        config=cfg,
        target_name="x",
        target_alternatives=(),
        turns=turns,
        outcome=Outcome.SUCCESS if terminal is not None else Outcome.BUDGET_EXHAUSTED,
        success_turn=terminal,
        guesses=guesses,
        initial_report=None,
    )


class TestProportionSem:
    def test_pinned_values(self):
        assert proportion_sem(0.94, 100) == pytest.approx(0.0238683256575942, abs=1e-16)
        assert proportion_sem(0.5, 101) == pytest.approx(0.05, abs=1e-15)

    def test_single_sample_is_zero(self):
        assert proportion_sem(1.0, 1) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            proportion_sem(1.5, 10)
        with pytest.raises(ValueError):
            proportion_sem(0.5, 0)


class TestRunMetrics:
    def test_monotone_success_enforced(self):
        with pytest.raises(ValueError, match="non-decreasing"):
            RunMetrics(n=2, turns=(1, 2), success=(0.5, 0.4), success_sem=(0.0, 0.0))

    def test_alignment_enforced(self):
        with pytest.raises(ValueError, match="aligned"):
            RunMetrics(n=2, turns=(1, 2), success=(0.5,), success_sem=(0.0, 0.0))

    def test_bounds(self):
        with pytest.raises(ValueError):
            RunMetrics(n=0, turns=())
        with pytest.raises(ValueError):
            RunMetrics(n=1, turns=(1,), success=(1.5,), success_sem=(0.0,))


class TestFirstSuccessTurn:
    def test_combined_takes_earliest(self):
        r = fake_record(terminal=3, eval_first=2)
        assert first_success_turn(r, "combined") == 2
        assert first_success_turn(r, "evaluation") == 2
        assert first_success_turn(r, "terminal") == 3

    def test_evaluation_only(self):
        r = fake_record(eval_first=4)
        assert first_success_turn(r, "combined") == 4
        assert first_success_turn(r, "terminal") is None

    def test_never_succeeds(self):
        r = fake_record()
        for accounting in ("combined", "evaluation", "terminal"):
            assert first_success_turn(r, accounting) is None

    def test_unknown_accounting(self):
        with pytest.raises(ValueError):
            first_success_turn(fake_record(), "optimistic")


class TestSuccessCurve:
    def test_cumulative_proportions(self):
        records = [
            fake_record(budget=4, terminal=1, eval_first=None, seed=0),
            fake_record(budget=4, terminal=3, eval_first=None, seed=1),
            fake_record(budget=4, seed=2),
        ]
        metrics = success_curve(records)
        assert metrics.turns == (1, 2, 3, 4)
        assert metrics.success == (1 / 3, 1 / 3, 2 / 3, 2 / 3)
        assert metrics.success_sem == tuple(
            proportion_sem(p, 3) for p in metrics.success
        )
        assert metrics.n == 3

    def test_accounting_changes_curve(self):
        records = [fake_record(budget=4, terminal=3, eval_first=1, seed=s) for s in range(2)]
        assert success_curve(records, "terminal").success == (0.0, 0.0, 1.0, 1.0)
        assert success_curve(records, "evaluation").success == (1.0, 1.0, 1.0, 1.0)

    def test_mixed_configs_rejected(self):
        records = [fake_record(budget=4), fake_record(budget=5)]
        with pytest.raises(ValueError, match="mix"):
            success_curve(records)

    def test_seed_differences_allowed(self):
        records = [fake_record(budget=4, seed=0), fake_record(budget=4, seed=99)]
        assert success_curve(records).n == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            success_curve([])


class TestRecommendItems:
    def test_dedup_and_consistency_filter(self):
        backend = RowStub()
        backend.recommendations = lambda history, count: ["A", "a", "B", "C"][:count]
        backend.item_consistency = lambda item, history: item != "B"
        batch = recommend_items(History(), BeliefState(()), backend, count=2)
        assert batch.items == ("A", "C")
        assert not batch.shortfall

    def test_growing_batches_until_count(self):
        requested = []

        def recs(history, count):
            requested.append(count)
            return [f"item-{i}" for i in range(count)]

        backend = RowStub()
        backend.recommendations = recs
        backend.item_consistency = lambda item, history: item.endswith(("6", "7", "8", "9"))
        batch = recommend_items(History(), BeliefState(()), backend, count=4)
        # Round 1 (count 4) yields nothing consistent; rounds grow the ask.
        assert requested == [4, 8, 12]
        assert batch.items == ("item-6", "item-7", "item-8", "item-9")
        assert not batch.shortfall

    def test_shortfall_flagged(self):
        backend = RowStub()
        backend.recommendations = lambda history, count: ["only"]
        backend.item_consistency = lambda item, history: True
        batch = recommend_items(History(), BeliefState(()), backend, count=3)
        assert batch.items == ("only",)
        assert batch.shortfall

    def test_each_item_checked_once(self):
        checked = []
        backend = RowStub()
        backend.recommendations = lambda history, count: ["A", "A", "B"]
        def consistency(item, history):
            checked.append(item)
            return False
        backend.item_consistency = consistency
        recommend_items(History(), BeliefState(()), backend, count=2)
        assert checked == ["A", "B"]

    def test_count_validated(self):
        with pytest.raises(ValueError):
            recommend_items(History(), BeliefState(()), RowStub(), count=0)


def mc_question(qid="tags-1"):
    return Question(
        qid,
        "Which do you enjoy?",
        multiple_choice_options(["a", "b", "c", "d"]),
        QuestionKind.MULTIPLE_CHOICE,
    )


def pref_record(per_turn_ratings, budget=2, seed=0):
    """per_turn_ratings: {turn index: tuple of ratings (None allowed)}."""
    cfg = SessionConfig(
        question_kind=QuestionKind.MULTIPLE_CHOICE, budget=budget, seed=seed
    )
    turns = tuple(
        PreferenceTurn(
            index=t,
            question=mc_question(),
            answer=Answer("tags-1", 0),
            answer_text="a",
            report=None,
            recommendations=tuple(f"item-{j}" for j in range(len(ratings))),
            shortfall=False,
            ratings=tuple(ratings),
            elapsed=0.0,
        )
        for t, ratings in sorted(per_turn_ratings.items())
    )
    return PreferenceRecord(
        config=cfg, persona_name=f"user-{seed}", turns=turns, initial_report=None
    )


class TestRateRun:
    def test_pooled_mean_and_user_sem(self):
        a = pref_record({1: (3.0, 3.0), 2: (3.0,)}, seed=0)
        b = pref_record({1: (4.0, 4.0), 2: (4.0,)}, seed=1)
        metrics = rate_run([a, b])
        assert metrics.rating_mean == (3.5, 3.5)
        # User means 3.0 and 4.0: sample std 1/sqrt(2), over sqrt(2) users.
        assert metrics.rating_sem == (pytest.approx(0.5), pytest.approx(0.5))

    def test_missing_ratings_excluded(self):
        a = pref_record({1: (4.0, None)}, budget=1, seed=0)
        b = pref_record({1: (None, None)}, budget=1, seed=1)
        metrics = rate_run([a, b])
        assert metrics.rating_mean == (4.0,)
        assert metrics.rating_sem == (0.0,)  # only one user contributed

    def test_turn_without_ratings_is_none(self):
        a = pref_record({1: (3.0,), 2: ()}, seed=0)
        metrics = rate_run([a])
        assert metrics.rating_mean == (3.0, None)
        assert metrics.rating_sem == (0.0, None)

    def test_ratings_must_align_with_recommendations(self):
        with pytest.raises(ValueError, match="rating slot"):
            PreferenceTurn(
                index=1,
                question=mc_question(),
                answer=Answer("tags-1", 0),
                answer_text="a",
                report=None,
                recommendations=("x",),
                shortfall=False,
                ratings=(),
                elapsed=0.0,
            )


def taste_world():
    return PersonaWorld(
        personas=(
            PersonaEntry("romantic", "Loves slow-burn love stories.", ("romance",), ("horror",)),
            PersonaEntry("thrill", "Wants pure adrenaline.", ("action", "horror"), ()),
        ),
        items=(
            ("Heart of Autumn", ("romance",)),
            ("Chainsaw Derby", ("action", "horror")),
            ("Plain Biography", ("documentary",)),
        ),
    )


class TestRunPreferenceSession:
    def config(self, budget=1):
        return SessionConfig(
            question_kind=QuestionKind.MULTIPLE_CHOICE,
            budget=budget,
            filter=FilterConfig(target_count=2),
            seed=4,
        )

    def test_full_turn_shape(self):
        world = taste_world()
        questioner, answerer = PersonaBackend(world, seed=0), PersonaBackend(world, seed=1)
        persona = answerer.persona_hypothesis("romantic")
        record = run_preference_session(
            self.config(), persona, questioner, answerer, count=2
        )
        assert record.error is None
        assert record.persona_name == persona.text
        assert len(record.turns) == 1
        turn = record.turns[0]
        assert turn.question.kind is QuestionKind.MULTIPLE_CHOICE
        assert len(turn.ratings) == len(turn.recommendations) == 2
        assert all(r is None or 1.0 <= r <= 5.0 for r in turn.ratings)

    def test_question_bank_exhaustion_recorded_not_fatal(self):
        world = taste_world()  # single tag question in the bank
        questioner, answerer = PersonaBackend(world, seed=0), PersonaBackend(world, seed=1)
        persona = answerer.persona_hypothesis("thrill")
        record = run_preference_session(
            self.config(budget=3), persona, questioner, answerer, count=1
        )
        assert len(record.turns) == 1
        assert record.error is not None and "exhausted" in record.error

    def test_distinct_instances_required(self):
        backend = PersonaBackend(taste_world())
        with pytest.raises(ValueError, match="distinct"):
            run_preference_session(
                self.config(), Hypothesis("x"), backend, backend
            )

    def test_jsonl_round_trip(self, tmp_path):
        world = taste_world()
        questioner, answerer = PersonaBackend(world, seed=0), PersonaBackend(world, seed=1)
        persona = answerer.persona_hypothesis("romantic")
        record = run_preference_session(self.config(), persona, questioner, answerer, count=2)
        path = tmp_path / "sessions.jsonl"
        write_preference_records([record], path)
        assert read_preference_records(path) == [record]


# --- benchmark runner ---------------------------------------------------------


def split_factory(model):
    def factory(entry, cfg):
        return TabularBackend(model, seed=cfg.seed), TabularBackend(model, seed=cfg.seed + 1)

    return factory


def bench_setup(n=6):
    names = [f"animal {i}" for i in range(8)]
    model = bit_split_model(names, noise_questions=1)
    dataset = [TargetEntry(n) for n in names[:n]]
    config = SessionConfig(
        budget=6, filter=FilterConfig(target_count=8), seed=11
    )
    return model, dataset, config


class TestGameSeed:
    def test_matches_turn_seed_derivation(self):
        assert game_seed(7, 3) == turn_seed(7, 3)


class TestRunBenchmark:
    def test_layout_and_metrics(self, tmp_path):
        model, dataset, config = bench_setup()
        metrics = run_benchmark(dataset, config, split_factory(model), tmp_path)
        assert metrics.n == 6
        assert metrics.success[-1] == 1.0
        assert sorted(p.name for p in (tmp_path / "games").iterdir()) == sorted(
            f"{e.id}.json" for e in dataset
        )
        lines = (tmp_path / "transcripts.jsonl").read_text().splitlines()
        assert [json.loads(l)["target"]["name"] for l in lines] == [e.name for e in dataset]
        csv_lines = (tmp_path / "metrics.csv").read_text().splitlines()
        assert csv_lines[0] == "strategy,turn,p,sem,n"
        assert csv_lines[1].startswith("eig,1,")
        assert len(csv_lines) == 1 + config.budget
        assert json.loads((tmp_path / "config.json").read_text()) is not None

    def test_parallelism_and_resume_are_byte_identical(self, tmp_path):
        model, dataset, config = bench_setup()
        serial_dir, parallel_dir = tmp_path / "serial", tmp_path / "parallel"
        run_benchmark(dataset, config, split_factory(model), serial_dir)
        run_benchmark(dataset, config, split_factory(model), parallel_dir, parallelism=4)
        serial_csv = (serial_dir / "metrics.csv").read_bytes()
        assert serial_csv == (parallel_dir / "metrics.csv").read_bytes()

        # Resume: drop two game files and rerun; the rebuilt CSV is identical.
        for entry in dataset[1:3]:
            (serial_dir / "games" / f"{entry.id}.json").unlink()
        (serial_dir / "metrics.csv").unlink()
        run_benchmark(dataset, config, split_factory(model), serial_dir)
        assert (serial_dir / "metrics.csv").read_bytes() == serial_csv

    def test_resume_skips_completed_games(self, tmp_path):
        model, dataset, config = bench_setup(n=3)
        calls = []

        def factory(entry, cfg):
            calls.append(entry.id)
            return split_factory(model)(entry, cfg)

        run_benchmark(dataset, config, factory, tmp_path)
        assert len(calls) == 3
        run_benchmark(dataset, config, factory, tmp_path)
        assert len(calls) == 3  # nothing replayed

    def test_config_mismatch_rejected(self, tmp_path):
        model, dataset, config = bench_setup(n=2)
        run_benchmark(dataset, config, split_factory(model), tmp_path)
        changed = SessionConfig(
            budget=7, filter=FilterConfig(target_count=8), seed=11
        )
        with pytest.raises(ValueError, match="different config"):
            run_benchmark(dataset, changed, split_factory(model), tmp_path)

    def test_crash_quarantined_not_fatal(self, tmp_path):
        model, dataset, config = bench_setup(n=3)
        bad = dataset[1].id

        def factory(entry, cfg):
            if entry.id == bad:
                raise RuntimeError("synthetic failure")
            return split_factory(model)(entry, cfg)

        metrics = run_benchmark(dataset, config, factory, tmp_path)
        assert metrics.n == 2
        quarantined = json.loads((tmp_path / "quarantine" / f"{bad}.json").read_text())
        assert "synthetic failure" in quarantined["error"]
        assert not (tmp_path / "games" / f"{bad}.json").exists()

    def test_all_crashed_raises(self, tmp_path):
        model, dataset, config = bench_setup(n=2)

        def factory(entry, cfg):
            raise RuntimeError("nope")

        with pytest.raises(ValueError, match="no games completed"):
            run_benchmark(dataset, config, factory, tmp_path)

    def test_parallelism_validated(self, tmp_path):
        model, dataset, config = bench_setup(n=2)
        with pytest.raises(ValueError):
            run_benchmark(dataset, config, split_factory(model), tmp_path, parallelism=0)


class TestRunAblation:
    def test_per_strategy_dirs_and_merged_csv(self, tmp_path):
        model, dataset, config = bench_setup(n=4)
        results = run_ablation(
            dataset,
            config,
            [StrategyKind.EIG, StrategyKind.ENTROPY],
            split_factory(model),
            tmp_path,
        )
        assert set(results) == {"eig", "entropy"}
        assert (tmp_path / "eig" / "metrics.csv").exists()
        assert (tmp_path / "entropy" / "metrics.csv").exists()
        merged = (tmp_path / "metrics.csv").read_text().splitlines()
        strategies = {line.split(",")[0] for line in merged[1:]}
        assert strategies == {"eig", "entropy"}
        assert len(merged) == 1 + 2 * config.budget


class TestWriteMetricsCsv:
    def test_repr_floats_for_stable_bytes(self, tmp_path):
        metrics = RunMetrics(
            n=3, turns=(1, 2), success=(1 / 3, 2 / 3), success_sem=(0.1, 0.2)
        )
        path = tmp_path / "m.csv"
        write_metrics_csv(path, [("eig", metrics)])
        text = path.read_text()
        assert repr(1 / 3) in text
        assert repr(2 / 3) in text
