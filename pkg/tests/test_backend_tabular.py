"""Tabular world: model validation, emulated generation, and the text format."""

import math

import pytest

from infogain.backends.base import QuestionGenerationError
from infogain.backends.personas import (
    PersonaBackend,
    PersonaEntry,
    PersonaWorld,
    bundled_persona_world,
    parse_persona_world,
)
from infogain.backends.tabular import (
    TabularBackend,
    TabularModel,
    bit_split_model,
    load_tabular_model,
    parse_tabular_model,
)
from infogain.core import (
    Answer,
    CategoricalDistribution,
    History,
    Hypothesis,
    Question,
    QuestionKind,
    binary_options,
    entropy,
    make_guess_question,
    mix,
)


def four_world(**kwargs):
    return bit_split_model(["ant", "bee", "cat", "dog"], **kwargs)


class TestTabularModelValidation:
    def test_duplicate_hypothesis_keys(self):
        q = Question("q", "t?", binary_options(), QuestionKind.BINARY)
        row = (CategoricalDistribution((0.5, 0.5)),)
        with pytest.raises(ValueError, match="duplicate hypothesis"):
            TabularModel("x", (Hypothesis("a"), Hypothesis("A")), (q,), (row, row))

    def test_grid_shape_checked(self):
        q = Question("q", "t?", binary_options(), QuestionKind.BINARY)
        row = (CategoricalDistribution((0.5, 0.5)),)
        with pytest.raises(ValueError, match="grid has"):
            TabularModel("x", (Hypothesis("a"), Hypothesis("b")), (q,), (row,))

    def test_row_width_matches_options(self):
        q = Question("q", "t?", binary_options(), QuestionKind.BINARY)
        bad = (CategoricalDistribution((1.0,)),)
        with pytest.raises(ValueError, match="probabilities for"):
            TabularModel("x", (Hypothesis("a"),), (q,), (bad,))

    def test_prior_normalized_and_validated(self):
        model = four_world()
        assert model.prior == (0.25, 0.25, 0.25, 0.25)
        q = model.questions[0]
        rows = model.rows
        weighted = TabularModel("x", model.hypotheses, model.questions, rows, prior=(2, 1, 1, 0))
        assert weighted.prior == (0.5, 0.25, 0.25, 0.0)
        with pytest.raises(ValueError):
            TabularModel("x", model.hypotheses, model.questions, rows, prior=(1, 1))
        with pytest.raises(ValueError):
            TabularModel("x", model.hypotheses, model.questions, rows, prior=(1, 1, 1, -1))
        with pytest.raises(ValueError):
            TabularModel("x", model.hypotheses, model.questions, rows, prior=(0, 0, 0, 0))

    def test_true_target_must_exist(self):
        model = four_world()
        with pytest.raises(ValueError, match="true_target"):
            TabularModel(
                "x", model.hypotheses, model.questions, model.rows, true_target=Hypothesis("emu")
            )


class TestLikelihoodAndPosterior:
    def test_guess_rows_synthesized(self):
        model = four_world()
        guess = make_guess_question(Hypothesis("cat"), "g1")
        assert model.likelihood_row(Hypothesis("cat"), guess).probs == (1.0, 0.0)
        assert model.likelihood_row(Hypothesis("dog"), guess).probs == (0.0, 1.0)

    def test_unknown_lookups_raise(self):
        model = four_world()
        with pytest.raises(KeyError):
            model.likelihood_row(Hypothesis("emu"), model.questions[0])
        other = Question("zz", "t?", binary_options(), QuestionKind.BINARY)
        with pytest.raises(KeyError):
            model.likelihood_row(Hypothesis("ant"), other)

    def test_posterior_is_exact_bayes(self):
        model = four_world()
        history = History().append(model.questions[0], Answer("split-1", 0))
        # split-1 Yes keeps indexes with bit0 clear: ant (0) and cat (2).
        assert model.posterior(history) == (0.5, 0.0, 0.5, 0.0)

    def test_contradicted_history_falls_back_to_prior(self):
        model = four_world()
        q = model.questions[0]
        history = History().append(q, Answer("split-1", 0)).append(q, Answer("split-1", 1))
        assert model.posterior(history) == model.prior


class TestHypothesisSampling:
    def test_distinct_until_exhausted_then_repeats(self):
        model = four_world()
        backend = TabularBackend(model, seed=3)
        batch = backend.sample_hypothesis_batch(History(), 4)
        assert len(batch) == 4
        assert len({h.key for h in batch}) == 4
        oversized = backend.sample_hypothesis_batch(History(), 10)
        assert len(oversized) == 10
        assert {h.key for h in oversized} == {"ant", "bee", "cat", "dog"}

    def test_prior_batches_excluded_from_fresh_draws(self):
        model = four_world()
        backend = TabularBackend(model, seed=0)
        seen = [Hypothesis("ant"), Hypothesis("bee"), Hypothesis("cat")]
        batch = backend.sample_hypothesis_batch(History(), 1, prior_batches=seen)
        assert batch[0].key == "dog"

    def test_zero_smoothing_respects_posterior_support(self):
        model = four_world()
        backend = TabularBackend(model, seed=5, proposal_smoothing=0.0)
        history = History().append(model.questions[0], Answer("split-1", 0))
        batch = backend.sample_hypothesis_batch(history, 8)
        assert {h.key for h in batch} <= {"ant", "cat"}

    def test_seeded_determinism(self):
        model = four_world()
        a = TabularBackend(model, seed=9).sample_hypothesis_batch(History(), 4)
        b = TabularBackend(model, seed=9).sample_hypothesis_batch(History(), 4)
        assert [h.key for h in a] == [h.key for h in b]

    def test_n_validated(self):
        backend = TabularBackend(four_world())
        with pytest.raises(ValueError):
            backend.sample_hypothesis_batch(History(), 0)


class TestPredictiveDistribution:
    def test_matches_posterior_weighted_mixture(self):
        model = four_world(noise_questions=1)
        backend = TabularBackend(model)
        history = History().append(model.questions[0], Answer("split-1", 0))
        posterior = model.posterior(history)
        for q in model.questions:
            pred = backend.predictive_answer_distribution(history, q)
            expect = [
                math.fsum(
                    posterior[i] * model.rows[i][model.question_index[q.id]][j]
                    for i in range(4)
                )
                for j in range(len(q.options))
            ]
            for j, e in enumerate(expect):
                assert pred[j] == pytest.approx(e, abs=1e-12)


class TestQuestionProposal:
    def test_conditional_ranks_by_mixture_entropy_desc(self):
        model = four_world(noise_questions=1)
        backend = TabularBackend(model)
        # Pool {ant, cat}: split-1 is decided (both Yes, entropy 0), split-2
        # separates them (entropy ln 2), noise is uniform (entropy ln 2).
        pool = [Hypothesis("ant"), Hypothesis("cat")]
        ranked = backend.propose_questions_conditional(History(), pool, 3)
        assert [q.id for q in ranked] == ["split-2", "noise-1", "split-1"]
        ents = [
            entropy(mix([model.likelihood_row(h, q) for h in pool])) for q in ranked
        ]
        assert ents == sorted(ents, reverse=True)
        # split-2 and noise-1 tie at ln 2 exactly; bank order breaks the tie.
        assert ents[0] == ents[1] == math.log(2)

    def test_conditional_excludes_asked(self):
        model = four_world()
        backend = TabularBackend(model)
        history = History().append(model.questions[0], Answer("split-1", 0))
        ranked = backend.propose_questions_conditional(history, list(model.hypotheses), 5)
        assert "split-1" not in [q.id for q in ranked]

    def test_conditional_empty_pool_falls_back_to_bank_order(self):
        model = four_world()
        backend = TabularBackend(model)
        ranked = backend.propose_questions_conditional(History(), [], 2)
        assert [q.id for q in ranked] == ["split-1", "split-2"]

    def test_exhausted_bank_raises(self):
        model = four_world()
        backend = TabularBackend(model)
        history = History()
        for q in model.questions:
            history = history.append(q, Answer(q.id, 0))
        with pytest.raises(QuestionGenerationError):
            backend.propose_questions_conditional(history, list(model.hypotheses), 1)
        with pytest.raises(QuestionGenerationError):
            backend.propose_questions_unconstrained(history, 1)
        with pytest.raises(QuestionGenerationError):
            backend.propose_question_naive(history)

    def test_naive_takes_first_unasked(self):
        model = four_world(noise_questions=1, noise_first=True)
        backend = TabularBackend(model)
        assert backend.propose_question_naive(History()).id == "noise-1"
        history = History().append(model.questions[0], Answer("noise-1", 0))
        assert backend.propose_question_naive(history).id == "split-1"

    def test_unconstrained_draws_unasked_without_replacement(self):
        model = four_world(noise_questions=2)
        backend = TabularBackend(model, seed=1)
        drawn = backend.propose_questions_unconstrained(History(), 10)
        ids = [q.id for q in drawn]
        assert len(ids) == 4
        assert len(set(ids)) == 4
        with pytest.raises(ValueError):
            backend.propose_questions_unconstrained(History(), 0)


class TestEnvironmentSide:
    def test_simulate_answer_deterministic_rows(self):
        model = four_world()
        backend = TabularBackend(model)
        q = model.questions[0]
        assert backend.simulate_answer(Hypothesis("ant"), q, seed=0).option_index == 0
        assert backend.simulate_answer(Hypothesis("bee"), q, seed=0).option_index == 1

    def test_simulate_answer_seeded(self):
        model = four_world(noise_questions=1)
        backend = TabularBackend(model)
        noise = model.questions[-1]
        picks = {backend.simulate_answer(Hypothesis("ant"), noise, seed=s).option_index for s in range(20)}
        assert picks == {0, 1}
        a = backend.simulate_answer(Hypothesis("ant"), noise, seed=7)
        b = backend.simulate_answer(Hypothesis("ant"), noise, seed=7)
        assert a == b

    def test_posterior_entropy_exact(self):
        model = four_world()
        backend = TabularBackend(model)
        q = model.questions[0]
        # After split-1 Yes the posterior is uniform over two hypotheses.
        h = backend.posterior_hypothesis_entropy(History(), q, Answer("split-1", 0), k=8)
        assert h == pytest.approx(math.log(2), abs=1e-12)
        with pytest.raises(ValueError):
            backend.posterior_hypothesis_entropy(History(), q, Answer("split-1", 0), k=1)

    def test_posterior_entropy_sampled_is_plugin_estimate(self):
        model = four_world()
        q = model.questions[0]
        backend = TabularBackend(model, seed=13, sampled_posterior_entropy=True)
        h = backend.posterior_hypothesis_entropy(History(), q, Answer("split-1", 0), k=2)
        # Two draws from a two-point uniform posterior: entropy 0 or ln 2.
        assert h in (pytest.approx(0.0), pytest.approx(math.log(2)))
        again = TabularBackend(model, seed=13, sampled_posterior_entropy=True)
        assert again.posterior_hypothesis_entropy(
            History(), q, Answer("split-1", 0), k=2
        ) == pytest.approx(h)

    def test_greedy_guess_with_and_without_candidates(self):
        model = four_world()
        backend = TabularBackend(model)
        history = History().append(model.questions[0], Answer("split-1", 0))
        top = backend.greedy_guess(history)
        assert top.key == "ant"  # index tie between ant and cat, lower index wins
        pick = backend.greedy_guess(history, candidates=[Hypothesis("dog"), Hypothesis("cat")])
        assert pick.key == "cat"
        unknown = backend.greedy_guess(history, candidates=[Hypothesis("emu")])
        assert unknown.key == "emu"
        with pytest.raises(ValueError):
            backend.greedy_guess(history, candidates=[])

    def test_recommendations_follow_posterior(self):
        model = four_world()
        backend = TabularBackend(model)
        history = History().append(model.questions[0], Answer("split-1", 1))
        # split-1 No keeps bee and dog.
        assert backend.recommendations(history, 2) == ["bee", "dog"]

    def test_item_consistency_requires_positive_mass(self):
        model = four_world()
        backend = TabularBackend(model)
        history = History().append(model.questions[0], Answer("split-1", 0))
        assert backend.item_consistency("ant", history)
        assert not backend.item_consistency("bee", history)
        assert not backend.item_consistency("emu", history)


class TestBitSplitModel:
    def test_split_semantics(self):
        model = bit_split_model([f"n{i}" for i in range(16)])
        assert len(model.questions) == 4
        for i, hyp in enumerate(model.hypotheses):
            for j in range(4):
                row = model.likelihood_row(hyp, model.questions[j])
                expected_yes = (i >> j) & 1 == 0
                assert row.probs == ((1.0, 0.0) if expected_yes else (0.0, 1.0))

    def test_noise_rows_uniform_and_ordering(self):
        model = bit_split_model(["a", "b"], noise_questions=2, noise_first=True)
        assert [q.id for q in model.questions] == ["noise-1", "noise-2", "split-1"]
        assert model.likelihood_row(Hypothesis("a"), model.questions[0]).probs == (0.5, 0.5)
        tail = bit_split_model(["a", "b"], noise_questions=1)
        assert [q.id for q in tail.questions] == ["split-1", "noise-1"]

    def test_name_validation(self):
        with pytest.raises(ValueError):
            bit_split_model(["only"])
        with pytest.raises(ValueError):
            bit_split_model(["dup", "DUP"])

    def test_four_splits_isolate_any_of_sixteen(self):
        model = bit_split_model([f"n{i}" for i in range(16)])
        for i in range(16):
            history = History()
            for j, q in enumerate(model.questions):
                history = history.append(q, Answer(q.id, 0 if (i >> j) & 1 == 0 else 1))
            posterior = model.posterior(history)
            assert posterior[i] == 1.0


SAMPLE_TEXT = """
# a small world
[topic]
gadget

[hypotheses]
Widget
Gizmo

[questions]
q1 | binary | Does it beep?
q2 | mc | What colour is it? | red | green | blue | grey

[likelihoods]
Widget | q1 | 9 1
Gizmo  | q1 | 1 9
Widget | q2 | 1 1 1 1 0
Gizmo  | q2 | 0 0 0 0 1

[prior]
3 1

[target]
gizmo

[seed]
42
"""


class TestTextFormat:
    def test_full_parse(self):
        model = parse_tabular_model(SAMPLE_TEXT)
        assert model.topic == "gadget"
        assert [h.text for h in model.hypotheses] == ["Widget", "Gizmo"]
        assert [q.id for q in model.questions] == ["q1", "q2"]
        assert model.questions[1].options[-1].text == "none of the above"
        assert model.prior == (0.75, 0.25)
        assert model.true_target.key == "gizmo"
        assert model.seed == 42
        assert model.likelihood_row(Hypothesis("widget"), model.questions[0]).probs == (0.9, 0.1)

    def test_load_from_file(self, tmp_path):
        p = tmp_path / "world.txt"
        p.write_text(SAMPLE_TEXT, encoding="utf-8")
        model = load_tabular_model(p)
        assert model.topic == "gadget"

    @pytest.mark.parametrize(
        "mutation, message",
        [
            (lambda t: t.replace("[likelihoods]", "[tables]"), "missing section"),
            (lambda t: t + "\n[extra]\nx\n", "unknown sections"),
            (lambda t: t + "\n[seed]\n1\n", "duplicate section"),
            (lambda t: t.replace("q1 | binary | Does it beep?", "q1 | binary"), "id \\| kind \\| text"),
            (lambda t: t.replace("Widget | q1 | 9 1", "Sprocket | q1 | 9 1"), "unknown hypothesis"),
            (lambda t: t.replace("Gizmo  | q1 | 1 9", "Widget | q1 | 1 9"), "duplicate likelihood"),
            (lambda t: t.replace("Widget | q2 | 1 1 1 1 0\n", ""), "missing likelihood"),
            (lambda t: t.replace("Widget | q1 | 9 1", "Widget | q1 | 9 1 1"), "weights for"),
            (lambda t: t.replace("[target]\ngizmo", "[target]\nsprocket"), "not a hypothesis"),
            (lambda t: "stray\n" + t, "before first section"),
        ],
    )
    def test_parse_errors(self, mutation, message):
        with pytest.raises(ValueError, match=message):
            parse_tabular_model(mutation(SAMPLE_TEXT))


class TestPersonaWorld:
    def small_world(self):
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

    def test_affinity_clipped(self):
        p = PersonaEntry("x", "desc", ("a", "b", "c"), ())
        assert p.affinity(("a", "b", "c")) == 2
        q = PersonaEntry("y", "desc2", (), ("a", "b", "c"))
        assert q.affinity(("a", "b", "c")) == -2

    def test_love_hate_overlap_rejected(self):
        with pytest.raises(ValueError):
            PersonaEntry("x", "desc", ("a",), ("A",))

    def test_world_validation(self):
        with pytest.raises(ValueError, match="two personas"):
            PersonaWorld(
                personas=(PersonaEntry("solo", "only one.", ("a",), ()),),
                items=(("thing", ("a",)),),
            )

    def test_question_bank_groups_of_four(self):
        world = self.small_world()
        backend = PersonaBackend(world)
        vocab = world.tag_vocabulary()
        assert vocab == ["action", "documentary", "horror", "romance"]
        assert len(backend.model.questions) == 1
        opts = backend.model.questions[0].options
        assert [o.text for o in opts[:-1]] == vocab

    def test_judge_ratings_and_unknown_item(self):
        world = self.small_world()
        backend = PersonaBackend(world)
        persona = backend.persona_hypothesis("romantic")
        ratings = backend.judge_recommendations(
            persona, ["Heart of Autumn", "Chainsaw Derby", "Nonexistent"]
        )
        assert ratings == [4.0, 2.0, None]
        with pytest.raises(KeyError):
            backend.judge_recommendations(Hypothesis("not a persona"), ["Heart of Autumn"])

    def test_recommendations_ranked_by_expected_affinity(self):
        world = self.small_world()
        backend = PersonaBackend(world)
        q = backend.model.questions[0]
        romance_idx = q.option_index("D")  # vocab order: action, documentary, horror, romance
        history = History().append(q, Answer(q.id, romance_idx))
        recs = backend.recommendations(history, 3)
        assert recs[0] == "Heart of Autumn"

    def test_item_consistency_threshold(self):
        world = self.small_world()
        backend = PersonaBackend(world)
        assert backend.item_consistency("Plain Biography", History())
        assert not backend.item_consistency("Nonexistent", History())

    def test_parse_round_trip(self):
        payload = {
            "topic": "books",
            "personas": [
                {"name": "a", "description": "first taste.", "loves": ["x"], "hates": ["y"]},
                {"name": "b", "description": "second taste.", "loves": ["y"]},
            ],
            "items": [{"title": "t1", "tags": ["x"]}, {"title": "t2", "tags": ["y", "z"]}],
        }
        world = parse_persona_world(payload)
        assert world.topic == "books"
        assert world.personas[1].hates == ()
        assert world.items[1] == ("t2", ("y", "z"))


class TestBundledPersonaFixture:
    def test_roster_and_catalog_shape(self):
        world = bundled_persona_world()
        assert len(world.personas) == 20
        assert len(world.items) == 36
        assert len(world.tag_vocabulary()) == 24
        backend = PersonaBackend(world)
        assert len(backend.model.questions) == 6

    def test_every_persona_judgeable(self):
        world = bundled_persona_world()
        backend = PersonaBackend(world)
        titles = [title for title, _ in world.items[:5]]
        for p in world.personas:
            ratings = backend.judge_recommendations(backend.persona_hypothesis(p.name), titles)
            assert all(r is not None and 1.0 <= r <= 5.0 for r in ratings)
