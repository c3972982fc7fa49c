import json

import numpy as np
import pytest

from fasa.augmentation import AugmentationConfig
from fasa.classifier import SoftmaxClassifier, forward_and_loss
from fasa.dataset import LongTailDataset, generate_dataset
from fasa.harness import (
    TrainingStreams,
    evaluate,
    run_training,
    train_epoch,
    weight_norm_ratio,
)
from fasa.models import AugmentationMode, parse_config
from fasa.sampling import RepeatFactorConfig, SamplingState, repeat_factor_resample, repeat_factors
from fasa.statistics import StatisticsBank


# effectifs de validation [4, 2, 1, 0] : la classe 3 n'a aucun échantillon
IMBALANCED_VAL = {"validation_profile": "imbalanced", "val_per_class": 4}


def tiny_config(epochs=3, data=None, **controller):
    payload = {
        "version": 1,
        "data": {"num_classes": 4, "dim": 3, "head_count": 40, "imbalance_ratio": 10,
                 "val_per_class": 6, "test_per_class": 6, "group_thresholds": [5, 20], **(data or {})},
        "training": {"epochs": epochs, "batch_size": 16},
        "controller": controller,
        "seeds": [0],
    }
    return parse_config(json.dumps(payload))


@pytest.fixture
def train_set():
    """Fixture pour un jeu d'entraînement à deux classes séparées"""
    rng = np.random.default_rng(0)
    labels = np.array([0] * 30 + [1] * 10)
    centers = np.array([[2.0, 0.0], [-2.0, 0.0]])
    return LongTailDataset(centers[labels] + 0.5 * rng.normal(size=(40, 2)), labels, 2, (5, 20))


class TestTrainEpoch:
    """Tests pour une époque d'entraînement"""

    def test_without_sampling_is_plain_sgd(self, train_set):
        """Sans échantillonnage, l'époque est une SGD sur les mini-batchs réels"""
        clf = SoftmaxClassifier(2, 2)
        train_epoch(clf, train_set, None, None, None, TrainingStreams.from_seed(5), batch_size=8)

        expected = SoftmaxClassifier(2, 2)
        order = TrainingStreams.from_seed(5).shuffle.permutation(len(train_set))
        for start in range(0, len(train_set), 8):
            index = order[start:start + 8]
            _, gradients = forward_and_loss(expected, train_set.features[index], train_set.labels[index])
            expected.step(gradients, expected.learning_rate)

        np.testing.assert_array_equal(clf.weights, expected.weights)
        np.testing.assert_array_equal(clf.biases, expected.biases)

    def test_zero_probabilities_match_baseline(self, train_set):
        """p = 0 partout : mêmes poids que l'entraînement sans augmentation"""
        baseline = SoftmaxClassifier(2, 2)
        train_epoch(baseline, train_set, None, None, None, TrainingStreams.from_seed(1), batch_size=8)

        clf = SoftmaxClassifier(2, 2)
        log = train_epoch(
            clf, train_set, StatisticsBank(2, 2), SamplingState(probs=np.zeros(2)),
            AugmentationConfig.for_classes(2), TrainingStreams.from_seed(1), batch_size=8,
        )
        np.testing.assert_array_equal(clf.weights, baseline.weights)
        assert log.virtual_counts.sum() == 0

    def test_single_class_sampling(self, train_set):
        """p = 1 pour la classe 0 seulement : une feature virtuelle par itération une fois la classe vue"""
        bank = StatisticsBank(2, 2)
        bank.observe_batch(train_set.features[:1], train_set.labels[:1])
        log = train_epoch(
            SoftmaxClassifier(2, 2), train_set, bank, SamplingState(probs=np.array([1.0, 0.0])),
            AugmentationConfig.for_classes(2), TrainingStreams.from_seed(2), batch_size=8,
        )
        assert log.virtual_counts.shape == (5, 2)
        assert log.virtual_counts[:, 0].tolist() == [1] * 5
        assert log.virtual_counts[:, 1].tolist() == [0] * 5

    def test_full_batch_loss_decreases(self, train_set):
        """Batch complet et petit pas : la perte moyenne ne remonte jamais sur 10 époques"""
        clf = SoftmaxClassifier(2, 2, learning_rate=0.05)
        streams = TrainingStreams.from_seed(4)
        losses = [
            train_epoch(clf, train_set, None, None, None, streams, batch_size=len(train_set)).mean_loss
            for _ in range(10)
        ]
        assert all(after <= before for before, after in zip(losses, losses[1:]))
        assert losses[-1] < losses[0]

    def test_augmentation_stream_follows_config_seed(self):
        """Le flux d'augmentation d'une exécution est celui de la graine de sa configuration"""
        config = AugmentationConfig.for_classes(2, rng_seed=9)
        streams = TrainingStreams.from_seed(3, config)
        np.testing.assert_array_equal(streams.augment.random(4), config.make_rng().random(4))
        np.testing.assert_array_equal(
            streams.shuffle.permutation(10), TrainingStreams.from_seed(3).shuffle.permutation(10)
        )


class TestEvaluate:
    """Tests pour l'évaluation par groupe d'effectifs"""

    def test_perfect_classifier(self, train_set):
        clf = SoftmaxClassifier(2, 2)
        clf.weights = np.array([[10.0, 0.0], [-10.0, 0.0]])
        evaluation = evaluate(clf, train_set, train_set.class_bins())
        assert evaluation.metrics.overall_acc == 1.0
        assert evaluation.metrics.bin_acc == {"tail": None, "mid": 1.0, "head": 1.0}
        assert evaluation.class_accuracy == {0: 1.0, 1: 1.0}

    def test_absent_class_has_no_loss(self, train_set):
        subset = LongTailDataset(train_set.features[:30], train_set.labels[:30], 2, (5, 20))
        evaluation = evaluate(SoftmaxClassifier(2, 2), subset, train_set.class_bins())
        assert evaluation.class_loss[1] is None
        assert evaluation.class_loss[0] == pytest.approx(np.log(2))
        assert evaluation.metrics.mean_val_loss == pytest.approx(np.log(2))

    def test_frequent_classes_unchanged_by_resampling(self, train_set):
        """Toutes les fréquences au-dessus du seuil : l'évaluation RFS est identique"""
        clf = SoftmaxClassifier(2, 2)
        clf.weights = np.array([[1.0, 0.3], [-1.0, 0.2]])
        plain = evaluate(clf, train_set, train_set.class_bins())
        resampled = evaluate(clf, train_set, train_set.class_bins(), RepeatFactorConfig(), np.random.default_rng(0))
        assert resampled.class_loss == plain.class_loss
        assert resampled.metrics.overall_acc == plain.metrics.overall_acc

    def test_imbalanced_validation_resampling(self):
        """Validation [4, 2, 1, 0] et seuil 4/7 : l'échantillon de la classe 2 compte double"""
        config = tiny_config(data=IMBALANCED_VAL)
        train, val, _ = generate_dataset(config.data)
        assert val.class_counts.tolist() == [4, 2, 1, 0]

        rfs = RepeatFactorConfig(threshold=4 / 7)
        factors = repeat_factors(val.labels, rfs)
        assert factors[0] == 1.0
        assert factors[1] > 1.0
        assert factors[2] == 2.0
        assert 3 not in factors

        index = repeat_factor_resample(val.labels, rfs, np.random.default_rng(0))
        rare_sample = int(np.flatnonzero(val.labels == 2)[0])
        assert (index == rare_sample).sum() == 2

        clf = SoftmaxClassifier(4, 3)
        clf.biases = np.array([0.0, 0.0, 1.0, 0.0])
        evaluation = evaluate(clf, val, train.class_bins(), rfs, np.random.default_rng(0))
        assert evaluation.metrics.overall_acc == pytest.approx(2 / len(index))
        assert evaluation.class_accuracy[2] == 1.0
        assert evaluation.class_loss[2] is not None
        assert evaluation.class_loss[3] is None

    def test_weight_norm_ratio(self):
        assert weight_norm_ratio(np.array([2.0, 1.0, 4.0])) == 4.0
        assert weight_norm_ratio(np.array([0.0, 1.0])) == float("inf")


class TestRunTraining:
    """Tests pour une exécution complète"""

    def test_first_epoch_keeps_initial_probabilities(self):
        config = tiny_config()
        result = run_training(config, 0, AugmentationMode.FASA)
        train, _, _ = generate_dataset(config.data)
        inverse = 1.0 / train.class_counts
        np.testing.assert_allclose(result.trajectory[0].probs, inverse / inverse.sum())
        assert [record.epoch for record in result.trajectory] == [1, 2, 3]
        assert [m.epoch for m in result.epochs] == [1, 2, 3]

    def test_probabilities_stay_in_range(self):
        result = run_training(tiny_config(), 1, AugmentationMode.FASA)
        for record in result.trajectory:
            assert ((record.probs >= 0) & (record.probs <= 1)).all()

    def test_baseline_has_no_trajectory(self):
        result = run_training(tiny_config(), 0, AugmentationMode.NONE)
        assert result.trajectory == []
        assert not result.has_sampling
        assert len(result.epochs) == 3

    def test_reproducible(self):
        config = tiny_config()
        first = run_training(config, 2, AugmentationMode.FASA)
        second = run_training(config, 2, AugmentationMode.FASA)
        np.testing.assert_array_equal(first.test.weight_norms, second.test.weight_norms)
        for a, b in zip(first.trajectory, second.trajectory):
            np.testing.assert_array_equal(a.probs, b.probs)
            assert a.grouping == b.grouping

    def test_static_scale_never_adjusts(self):
        result = run_training(tiny_config(static_scale=2.0), 0, AugmentationMode.FASA)
        first = result.trajectory[0].probs
        for record in result.trajectory:
            np.testing.assert_array_equal(record.probs, first)

    def test_smote_mode(self):
        result = run_training(tiny_config(), 0, AugmentationMode.SMOTE)
        assert result.has_sampling
        assert result.test is not None

    def test_training_learns(self):
        """Le classifieur fait mieux que le hasard sur le test"""
        result = run_training(tiny_config(epochs=10), 0, AugmentationMode.NONE)
        assert result.test.overall_acc > 0.4

    def test_class_without_validation_keeps_its_probability(self):
        """Une classe sans échantillon de validation n'envoie aucun signal et garde son p_c initial"""
        config = tiny_config(epochs=4, data=IMBALANCED_VAL, adaptation_mode="class_wise",
                             validation_resampling="rfs", rfs_threshold=4 / 7)
        result = run_training(config, 0, AugmentationMode.FASA)
        train, _, _ = generate_dataset(config.data)
        inverse = 1.0 / train.class_counts
        initial = inverse / inverse.sum()

        assert len(result.trajectory) == 4
        for record in result.trajectory:
            group = next(g for g, members in enumerate(record.grouping.groups) if 3 in members)
            assert record.group_signal[group] is None
            assert record.group_signal[0] is not None
            assert record.probs[3] == pytest.approx(initial[3])
        assert not np.allclose(result.trajectory[-1].probs[:3], initial[:3])
