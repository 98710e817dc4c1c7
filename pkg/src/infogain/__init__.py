"""Adaptive information gathering by expected-information-gain question selection.

The engine keeps a belief over candidate answers (hypotheses), proposes
questions, scores each question by how much it is expected to shrink the
belief's uncertainty, asks the best one, and filters the belief against the
observed answer.  Generative backends are pluggable: a remote chat-completions
endpoint for real models, and an exactly checkable tabular oracle for tests,
benchmarks, and demos.
"""

from infogain.acquisition import (
    EstimatorKind,
    RowCache,
    ScoredQuestion,
    data_estimation_score,
    estimate_eig,
    estimate_pred_entropy,
    exact_eig_tabular,
    select_question,
    true_expected_posterior_entropy,
)
from infogain.belief import (
    FilterConfig,
    FilterReport,
    Rejection,
    filter_history,
    initial_belief,
    is_consistent,
    update_belief,
)
from infogain.controller import (
    GameRecord,
    GuessRecord,
    Outcome,
    QuestionMode,
    SessionConfig,
    SessionState,
    StrategyKind,
    TurnRecord,
    apply_answer,
    game_record_from_dict,
    game_record_to_dict,
    greedy_evaluation_guess,
    maybe_guess,
    read_game_records,
    run_game,
    run_turn,
    start_session,
    write_game_records,
)
from infogain.core import (
    Answer,
    AnswerOption,
    BeliefState,
    CategoricalDistribution,
    GuessQuestion,
    History,
    Hypothesis,
    Question,
    QuestionKind,
    entropy,
    make_guess_question,
    mix,
    normalize_key,
)
from infogain.datasets import TargetEntry, animals_dataset, evaluate_guess, load_dataset, parse_dataset
from infogain.harness import (
    PreferenceRecord,
    PreferenceTurn,
    RecommendationBatch,
    RunMetrics,
    rate_run,
    recommend_items,
    run_ablation,
    run_benchmark,
    run_preference_session,
    success_curve,
)

__all__ = [
    "Answer",
    "AnswerOption",
    "BeliefState",
    "CategoricalDistribution",
    "EstimatorKind",
    "FilterConfig",
    "FilterReport",
    "GameRecord",
    "GuessQuestion",
    "GuessRecord",
    "History",
    "Hypothesis",
    "Outcome",
    "PreferenceRecord",
    "PreferenceTurn",
    "Question",
    "QuestionKind",
    "QuestionMode",
    "RecommendationBatch",
    "Rejection",
    "RowCache",
    "RunMetrics",
    "ScoredQuestion",
    "SessionConfig",
    "SessionState",
    "StrategyKind",
    "TargetEntry",
    "TurnRecord",
    "animals_dataset",
    "apply_answer",
    "data_estimation_score",
    "entropy",
    "estimate_eig",
    "estimate_pred_entropy",
    "evaluate_guess",
    "exact_eig_tabular",
    "filter_history",
    "game_record_from_dict",
    "game_record_to_dict",
    "greedy_evaluation_guess",
    "initial_belief",
    "is_consistent",
    "load_dataset",
    "make_guess_question",
    "maybe_guess",
    "mix",
    "normalize_key",
    "parse_dataset",
    "rate_run",
    "read_game_records",
    "recommend_items",
    "run_ablation",
    "run_benchmark",
    "run_game",
    "run_preference_session",
    "run_turn",
    "select_question",
    "start_session",
    "success_curve",
    "true_expected_posterior_entropy",
    "update_belief",
    "write_game_records",
]

__version__ = "0.1.0"
