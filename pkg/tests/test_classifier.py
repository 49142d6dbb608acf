import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selftrain.classifier import (
    BaselineTextClassifier,
    HASH_VERSION,
    Hyperparams,
    ProbDist,
    TrainTarget,
    featurize,
    load_model,
    loss_and_grad,
    predict_dist,
    predict_label,
    save_model,
    softmax,
    train,
)
from selftrain.errors import TrainingError


def finite_difference_grad(weights, bias, examples, l2, eps=1e-6):
    """Independent oracle: central differences of the loss surface."""
    grad_w = np.zeros_like(weights)
    grad_b = np.zeros_like(bias)
    for i in range(weights.shape[0]):
        for j in range(weights.shape[1]):
            wp, wm = weights.copy(), weights.copy()
            wp[i, j] += eps
            wm[i, j] -= eps
            lp, _, _ = loss_and_grad(wp, bias, examples, l2)
            lm, _, _ = loss_and_grad(wm, bias, examples, l2)
            grad_w[i, j] = (lp - lm) / (2 * eps)
        bp, bm = bias.copy(), bias.copy()
        bp[i] += eps
        bm[i] -= eps
        lp, _, _ = loss_and_grad(weights, bp, examples, l2)
        lm, _, _ = loss_and_grad(weights, bm, examples, l2)
        grad_b[i] = (lp - lm) / (2 * eps)
    return grad_w, grad_b


def random_examples(rng, n, dim, num_classes, soft_fraction=0.5):
    examples = []
    for _ in range(n):
        nnz = rng.integers(1, 6)
        feats = {int(j): float(rng.integers(1, 4)) for j in rng.choice(dim, nnz, replace=False)}
        if rng.random() < soft_fraction:
            probs = rng.dirichlet(np.ones(num_classes))
            examples.append((feats, TrainTarget.soft_label(ProbDist(tuple(probs)))))
        else:
            examples.append((feats, TrainTarget.hard_label(int(rng.integers(num_classes)))))
    return examples


class TestFeaturize:
    def test_deterministic(self):
        assert featurize("A good Day") == featurize("a GOOD day")

    def test_counts_accumulate(self):
        feats = featurize("good good")
        uni = featurize("good")
        (uni_idx,) = [i for i in uni]
        assert feats[uni_idx] == 2.0  # repeated unigram
        assert len(feats) == 2  # plus the "good good" bigram

    def test_disjoint_vocab_orthogonal(self):
        # fixed fixture; at D=2^18 collisions between these are absent
        a = featurize("alpha bravo charlie delta", dim=2**18)
        b = featurize("echo foxtrot golf hotel", dim=2**18)
        assert not set(a) & set(b)

    def test_punctuation_only_gives_empty(self):
        assert featurize("!!! ... ???") == {}

    def test_bigrams_present(self):
        feats = featurize("one two three")
        # 3 unigrams + 2 bigrams, barring hash collisions at default D
        assert len(feats) == 5


class TestSoftmaxAndPredict:
    def test_zero_model_is_uniform(self):
        hp = Hyperparams(feature_dim=64)
        model = train(
            [({0: 1.0}, TrainTarget.hard_label(0)), ({1: 1.0}, TrainTarget.hard_label(1)),
             ({2: 1.0}, TrainTarget.hard_label(2))],
            Hyperparams(feature_dim=64, epochs=0),
            num_classes=3,
        )
        # epochs=0 leaves zero weights: softmax of zeros is uniform
        dist = predict_dist(model, {5: 1.0})
        assert dist.probs == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-12)

    def test_closed_form_logits(self):
        probs = softmax(np.array([math.log(2.0), 0.0, 0.0]))
        assert probs == pytest.approx([0.5, 0.25, 0.25], abs=1e-12)

    def test_shift_invariance(self):
        logits = np.array([0.3, -1.2, 2.0])
        assert softmax(logits + 123.4) == pytest.approx(softmax(logits), abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-30, 30), min_size=3, max_size=3))
    def test_sums_to_one_and_label_is_argmax(self, logits):
        probs = softmax(np.array(logits))
        assert abs(probs.sum() - 1.0) < 1e-9
        dist = ProbDist(tuple(probs / probs.sum()))
        assert dist.argmax() == int(np.argmax(probs))


class TestGradients:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        for trial in range(10):
            dim = int(rng.integers(4, 33))
            weights = rng.normal(scale=0.5, size=(3, dim))
            bias = rng.normal(scale=0.5, size=3)
            examples = random_examples(rng, n=int(rng.integers(2, 8)), dim=dim, num_classes=3)
            _, gw, gb = loss_and_grad(weights, bias, examples, l2=1e-3)
            fw, fb = finite_difference_grad(weights, bias, examples, l2=1e-3)
            denom = max(np.abs(fw).max(), np.abs(fb).max(), 1e-8)
            assert np.abs(gw - fw).max() / denom < 1e-4
            assert np.abs(gb - fb).max() / denom < 1e-4

    def test_soft_one_hot_equals_hard(self):
        rng = np.random.default_rng(1)
        weights = rng.normal(size=(3, 8))
        bias = rng.normal(size=3)
        feats = {0: 1.0, 3: 2.0}
        hard = [(feats, TrainTarget.hard_label(1))]
        soft = [(feats, TrainTarget.soft_label(ProbDist((0.0, 1.0, 0.0))))]
        lh, gwh, gbh = loss_and_grad(weights, bias, hard, l2=1e-4)
        ls, gws, gbs = loss_and_grad(weights, bias, soft, l2=1e-4)
        assert abs(lh - ls) < 1e-9
        assert np.abs(gwh - gws).max() < 1e-9
        assert np.abs(gbh - gbs).max() < 1e-9

    def test_soft_target_equal_to_prediction_gives_zero_data_gradient(self):
        rng = np.random.default_rng(2)
        weights = rng.normal(size=(3, 8))
        bias = rng.normal(size=3)
        feats = {1: 1.0, 4: 1.0}
        model_probs = softmax(weights[:, 1] + weights[:, 4] + bias)
        examples = [(feats, TrainTarget.soft_label(ProbDist(tuple(model_probs))))]
        loss, gw, gb = loss_and_grad(weights, bias, examples, l2=0.0)
        assert loss < 1e-12  # KL(p || p) = 0
        assert np.abs(gw).max() < 1e-9
        assert np.abs(gb).max() < 1e-9


def separable_examples(n_per_class=20, dim=256):
    """Two classes over disjoint feature blocks: linearly separable."""
    rng = np.random.default_rng(7)
    examples = []
    for c in range(2):
        base = c * 40
        for _ in range(n_per_class):
            idx = rng.choice(40, size=5, replace=False) + base
            examples.append(
                ({int(i): 1.0 for i in idx}, TrainTarget.hard_label(c))
            )
    return examples


class TestTraining:
    def test_separable_reaches_perfect_accuracy_within_50_epochs(self):
        examples = separable_examples()
        hp = Hyperparams(feature_dim=256, epochs=50, learning_rate=0.1)
        model = train(examples, hp, num_classes=2)
        correct = sum(
            1 for feats, target in examples if predict_label(model, feats) == target.hard
        )
        assert correct == len(examples)

    def test_bitwise_determinism(self):
        examples = separable_examples()
        hp = Hyperparams(feature_dim=256, epochs=30, batch_size=8, seed=5)
        m1 = train(examples, hp, num_classes=2)
        m2 = train(examples, hp, num_classes=2)
        assert m1.weights.tobytes() == m2.weights.tobytes()
        assert m1.bias.tobytes() == m2.bias.tobytes()

    def test_monotone_loss_at_default_rate(self):
        examples = separable_examples()
        hp = Hyperparams(feature_dim=256, epochs=80, learning_rate=0.1)
        model = train(examples, hp, num_classes=2)
        losses = model.train_losses
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_empty_examples_rejected(self):
        with pytest.raises(TrainingError):
            train([], Hyperparams(feature_dim=16))

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    def test_divergence_detected(self):
        examples = separable_examples()
        hp = Hyperparams(feature_dim=256, epochs=400, learning_rate=1e9, lr_decay=False)
        with pytest.raises(TrainingError):
            train(examples, hp, num_classes=2)

    def test_validation_early_stopping_stops_before_max_epochs(self):
        examples = separable_examples()
        # flip some validation labels so continued fitting hurts validation loss
        val = [
            (feats, t.hard if i % 4 else 1 - t.hard)
            for i, (feats, t) in enumerate(separable_examples(n_per_class=10))
        ]
        hp = Hyperparams(feature_dim=256, epochs=400, learning_rate=0.5, lr_decay=False, patience=2)
        model = train(examples, hp, num_classes=2, validation=val)
        assert len(model.train_losses) < 400


class TestSerialization:
    def test_round_trip(self, tmp_path):
        examples = separable_examples()
        hp = Hyperparams(feature_dim=256, epochs=20)
        model = train(examples, hp, num_classes=2)
        path = tmp_path / "model.json"
        save_model(model, str(path))
        loaded = load_model(str(path))
        assert np.array_equal(loaded.weights, model.weights)
        assert np.array_equal(loaded.bias, model.bias)
        assert loaded.hyperparams == model.hyperparams
        assert loaded.hash_version == HASH_VERSION

    def test_rejects_mismatched_hash_version(self, tmp_path):
        import json

        examples = separable_examples()
        model = train(examples, Hyperparams(feature_dim=256, epochs=5), num_classes=2)
        path = tmp_path / "model.json"
        save_model(model, str(path))
        payload = json.loads(path.read_text())
        payload["hash_version"] = "something-else/9"
        path.write_text(json.dumps(payload))
        with pytest.raises(TrainingError):
            load_model(str(path))

    def test_save_is_byte_deterministic(self, tmp_path):
        examples = separable_examples()
        model = train(examples, Hyperparams(feature_dim=256, epochs=10), num_classes=2)
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        save_model(model, str(p1))
        save_model(model, str(p2))
        assert p1.read_bytes() == p2.read_bytes()


class TestTextInterface:
    def test_fit_predict_roundtrip(self):
        clf = BaselineTextClassifier(2, Hyperparams(feature_dim=2**12, epochs=60))
        examples = [
            ("alpha bravo charlie", TrainTarget.hard_label(0)),
            ("alpha delta echo", TrainTarget.hard_label(0)),
            ("zulu yankee xray", TrainTarget.hard_label(1)),
            ("zulu whiskey victor", TrainTarget.hard_label(1)),
        ]
        clf.fit(examples)
        assert clf.predict_label("bravo alpha") == 0
        assert clf.predict_label("victor zulu") == 1
        many = clf.predict_dist_many(["bravo alpha", "victor zulu"])
        assert many[0].probs == pytest.approx(clf.predict_dist("bravo alpha").probs, abs=1e-12)

    def test_untrained_predict_rejected(self):
        clf = BaselineTextClassifier(3)
        with pytest.raises(TrainingError):
            clf.predict_dist("anything")
