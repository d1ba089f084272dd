"""Probability model: features, training, prediction, interpolation, files."""

import io

import numpy as np
import pytest

from sentid.augment import AugmentConfig
from sentid.corpus import Corpus, Unit
from sentid.model import (
    ClassifierModel,
    InterpConfig,
    ModelConfig,
    ProbFileError,
    ProbMatrix,
    featurize,
    interpolate,
    iter_prob_documents,
    load_model,
    load_probs,
    predict,
    save_model,
    train,
    write_prob_documents,
)

CFG = ModelConfig(window_radius=2, hash_dim=2**12, epochs=2)


def su(*words):
    return Unit.from_words(list(words), True)


def nsu(*words):
    return Unit.from_words(list(words), False)


class TestFeaturize:
    def test_deterministic(self):
        words = ["The", "cat", "sat", "."]
        a = featurize(words, 1, "both", CFG)
        b = featurize(words, 1, "both", CFG)
        assert np.array_equal(a, b)

    def test_left_only_at_start_sees_no_left_context(self):
        # changing tokens right of position 0 must not touch left_only features
        a = featurize(["alpha", "beta", "gamma"], 0, "left_only", CFG)
        b = featurize(["alpha", "CHANGED", "other"], 0, "left_only", CFG)
        assert np.array_equal(np.sort(a), np.sort(b))

    def test_sides_differ_mid_sequence(self):
        words = ["aa", "bb", "cc"]
        both = featurize(words, 1, "both", CFG)
        left = featurize(words, 1, "left_only", CFG)
        assert not np.array_equal(np.sort(both), np.sort(left))

    def test_right_perturbation_invisible_to_left_side(self):
        a = featurize(["a", "b", "c", "d"], 1, "left_only", CFG)
        b = featurize(["a", "b", "ZZZ", "QQQ"], 1, "left_only", CFG)
        assert np.array_equal(a, b)

    def test_left_perturbation_invisible_to_right_side(self):
        a = featurize(["a", "b", "c", "d"], 2, "right_only", CFG)
        b = featurize(["Z", "Q", "c", "d"], 2, "right_only", CFG)
        assert np.array_equal(a, b)

    def test_indices_within_dim(self):
        idx = featurize(["Word!", "123", "..."], 1, "both", CFG)
        assert idx.min() >= 0 and idx.max() < CFG.hash_dim

    def test_position_bounds(self):
        with pytest.raises(IndexError):
            featurize(["a"], 1, "both", CFG)


def pattern_corpus():
    units = []
    for i in range(30):
        units.append(su("a", f"b{i % 3}", "."))
        units.append(nsu("%", f"{i}{i}"))
    return Corpus(units)


class TestTrain:
    def test_eos_learns_final_punct(self):
        corp = pattern_corpus()
        model = train(corp, AugmentConfig(p_da=0.0, p_tr=0.0), seed=0, model_cfg=CFG)
        m = predict(model, ["a", "b1", ".", "a", "b2", "."])
        assert m.p_eos[2] > m.p_eos[0]
        assert m.p_eos[2] > m.p_eos[1]
        assert m.p_bos[0] > m.p_bos[1]

    def test_deterministic_given_seed(self, tmp_path):
        corp = pattern_corpus()
        m1 = train(corp, AugmentConfig(), seed=3, model_cfg=CFG)
        m2 = train(corp, AugmentConfig(), seed=3, model_cfg=CFG)
        p1, p2 = tmp_path / "m1.bin", tmp_path / "m2.bin"
        save_model(m1, p1)
        save_model(m2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_seeds_differ(self):
        corp = pattern_corpus()
        m1 = train(corp, AugmentConfig(), seed=1, model_cfg=CFG)
        m2 = train(corp, AugmentConfig(), seed=2, model_cfg=CFG)
        assert any(
            not np.array_equal(m1.weights[h], m2.weights[h]) for h in m1.head_names
        )

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            train(Corpus([]), AugmentConfig(), model_cfg=CFG)


class TestPredict:
    def test_outputs_in_unit_interval(self):
        model = train(pattern_corpus(), AugmentConfig(), seed=0, model_cfg=CFG)
        m = predict(model, ["anything", "at", "all", "!"])
        for v in (m.p_bos, m.p_eos):
            assert (v >= 0).all() and (v <= 1).all()

    def test_zero_tokens(self):
        model = ClassifierModel.zeros(CFG, seed=0)
        m = predict(model, [])
        assert m.n == 0

    def test_uni_heads_require_uni_model(self):
        model = ClassifierModel.zeros(CFG, seed=0)
        with pytest.raises(ValueError):
            predict(model, ["x"], include_uni=True)

    def test_uni_prediction_shape(self):
        cfg = ModelConfig(window_radius=2, hash_dim=2**12, epochs=1, include_uni=True)
        model = train(pattern_corpus(), AugmentConfig(), seed=0, model_cfg=cfg)
        m = predict(model, ["a", "b", "."], include_uni=True)
        assert m.has_uni and m.p_bos_uni.shape == (3,)

    def test_uni_restriction_on_scores(self):
        # perturbing right context never changes the left-only end head score
        cfg = ModelConfig(window_radius=3, hash_dim=2**12, epochs=1, include_uni=True)
        model = train(pattern_corpus(), AugmentConfig(), seed=0, model_cfg=cfg)
        a = predict(model, ["a", "b0", ".", "x", "y"], include_uni=True)
        b = predict(model, ["a", "b0", ".", "CHANGED", "TOKENS"], include_uni=True)
        assert a.p_eos_uni[2] == b.p_eos_uni[2]
        a2 = predict(model, ["x", "y", "a", "b0", "."], include_uni=True)
        b2 = predict(model, ["Q", "R", "a", "b0", "."], include_uni=True)
        assert a2.p_bos_uni[2] == b2.p_bos_uni[2]

    def test_pure_function(self):
        model = train(pattern_corpus(), AugmentConfig(), seed=0, model_cfg=CFG)
        words = ["a", "b2", "."]
        m1, m2 = predict(model, words), predict(model, words)
        assert np.array_equal(m1.p_bos, m2.p_bos) and np.array_equal(m1.p_eos, m2.p_eos)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        model = train(pattern_corpus(), AugmentConfig(), seed=5, model_cfg=CFG)
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.config == model.config
        assert loaded.seed == model.seed
        for h in model.head_names:
            assert np.array_equal(loaded.weights[h], model.weights[h])
        words = ["a", "b0", ".", "%"]
        assert np.array_equal(predict(loaded, words).p_eos, predict(model, words).p_eos)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a model\n")
        with pytest.raises(ValueError):
            load_model(path)


class TestInterpolate:
    def make(self):
        return ProbMatrix(
            p_bos=np.array([0.2, 0.4]),
            p_eos=np.array([0.6, 0.8]),
            p_bos_uni=np.array([0.6, 0.2]),
            p_eos_uni=np.array([0.1, 0.9]),
        )

    def test_lambda_zero_is_bidirectional(self):
        m = self.make()
        out = interpolate(m, InterpConfig(lam=0.0))
        assert np.array_equal(out.p_bos, m.p_bos)
        assert np.array_equal(out.p_eos, m.p_eos)
        assert not out.has_uni

    def test_lambda_one_is_unidirectional(self):
        m = self.make()
        out = interpolate(m, InterpConfig(lam=1.0))
        assert np.array_equal(out.p_bos, m.p_bos_uni)
        assert np.array_equal(out.p_eos, m.p_eos_uni)

    def test_midpoint_arithmetic(self):
        m = ProbMatrix(
            p_bos=np.array([0.2]),
            p_eos=np.array([0.2]),
            p_bos_uni=np.array([0.6]),
            p_eos_uni=np.array([0.6]),
        )
        out = interpolate(m, InterpConfig(lam=0.5))
        assert out.p_bos[0] == pytest.approx(0.4, abs=1e-15)

    def test_affine_in_lambda(self):
        rng = np.random.default_rng(8)
        m = ProbMatrix(rng.random(20), rng.random(20), rng.random(20), rng.random(20))
        at0 = interpolate(m, InterpConfig(lam=0.0))
        at1 = interpolate(m, InterpConfig(lam=1.0))
        for lam in (0.25, 0.5, 0.9):
            out = interpolate(m, InterpConfig(lam=lam))
            mix_bos = lam * at1.p_bos + (1 - lam) * at0.p_bos
            assert np.abs(out.p_bos - mix_bos).max() < 1e-12

    def test_requires_uni(self):
        m = ProbMatrix(np.array([0.5]), np.array([0.5]))
        with pytest.raises(ValueError):
            interpolate(m, InterpConfig())

    def test_lambda_range(self):
        with pytest.raises(ValueError):
            InterpConfig(lam=1.5)


class TestProbFiles:
    def test_round_trip_with_uni(self, tmp_path):
        rng = np.random.default_rng(9)
        docs = [
            (["tok%d" % i for i in range(5)], ProbMatrix(*(rng.random(5) for _ in range(4)))),
            (["a", "b"], ProbMatrix(*(rng.random(2) for _ in range(4)))),
        ]
        path = tmp_path / "probs.tsv"
        write_prob_documents(path, docs)
        with open(path) as f:
            loaded = iter_prob_documents(f)
        assert len(loaded) == 2
        for (toks, m), (ltoks, lm) in zip(docs, loaded):
            assert toks == ltoks
            assert np.array_equal(m.p_bos, lm.p_bos)
            assert np.array_equal(m.p_eos_uni, lm.p_eos_uni)

    def test_load_probs_single_doc(self):
        text = "#probs v1 uni=1\n0\thello\t0.25\t0.5\t0.75\t0.125\n1\tworld\t0.1\t0.2\t0.3\t0.4\n2\t!\t0\t1\t0.5\t0.5\n"
        m = load_probs(io.StringIO(text))
        assert m.n == 3 and m.has_uni
        assert m.p_bos[0] == 0.25

    def test_out_of_range_names_row(self):
        text = "#probs v1 uni=0\n0\tx\t0.5\t0.5\n1\ty\t1.2\t0.5\n"
        with pytest.raises(ProbFileError, match="row 3"):
            load_probs(io.StringIO(text))

    def test_ragged_columns_rejected(self):
        text = "#probs v1 uni=0\n0\tx\t0.5\t0.5\t0.5\n"
        with pytest.raises(ProbFileError, match="columns"):
            load_probs(io.StringIO(text))

    def test_empty_after_header(self):
        m = load_probs(io.StringIO("#probs v1 uni=0\n"))
        assert m.n == 0

    def test_missing_header(self):
        with pytest.raises(ProbFileError, match="header"):
            load_probs(io.StringIO("0\tx\t0.5\t0.5\n"))

    def test_multiple_docs_rejected_by_load_probs(self):
        text = "#probs v1 uni=0\n0\tx\t0.5\t0.5\n\n0\ty\t0.5\t0.5\n"
        with pytest.raises(ProbFileError, match="one document"):
            load_probs(io.StringIO(text))


class TestProbMatrix:
    def test_range_validation(self):
        with pytest.raises(ValueError):
            ProbMatrix(np.array([1.5]), np.array([0.5]))

    def test_length_validation(self):
        with pytest.raises(ValueError):
            ProbMatrix(np.array([0.5]), np.array([0.5, 0.5]))

    def test_uni_pairing(self):
        with pytest.raises(ValueError):
            ProbMatrix(np.array([0.5]), np.array([0.5]), p_bos_uni=np.array([0.5]))
