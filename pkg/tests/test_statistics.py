import numpy as np
import pytest

from fasa.exceptions import (
    ClassOutOfRangeError,
    DimensionMismatchError,
    LabelOutOfRangeError,
    NonFiniteFeatureError,
)
from fasa.statistics import BankSnapshot, StatisticsBank


def replay_recurrence(batches, num_classes, dim, momentum):
    """Réévaluation scalaire de la récurrence par moyenne mobile, coordonnée par coordonnée"""
    mean = [[0.0] * dim for _ in range(num_classes)]
    std = [[0.0] * dim for _ in range(num_classes)]
    ready = [False] * num_classes
    for features, labels in batches:
        for c in range(num_classes):
            rows = [features[i] for i in range(len(labels)) if labels[i] == c]
            if not rows:
                continue
            n = len(rows)
            for k in range(dim):
                mu = sum(row[k] for row in rows) / n
                sigma = (sum((row[k] - mu) ** 2 for row in rows) / n) ** 0.5
                if not ready[c]:
                    mean[c][k], std[c][k] = mu, sigma
                else:
                    mean[c][k] = (1 - momentum) * mean[c][k] + momentum * mu
                    if n >= 2:
                        std[c][k] = (1 - momentum) * std[c][k] + momentum * sigma
            ready[c] = True
    return np.array(mean), np.array(std), ready


class TestObserveBatch:
    """Tests pour la mise à jour des statistiques par classe"""

    @pytest.fixture
    def bank(self):
        """Fixture pour une banque 2 classes en dimension 2"""
        return StatisticsBank(num_classes=2, dim=2, momentum=0.1)

    def test_first_observation_sets_statistics(self, bank):
        """La première observation initialise directement la moyenne et l'écart-type"""
        bank.observe_batch(np.array([[3.0, 4.0]]), [0])
        stats = bank.get_statistics(0)
        assert stats.initialized
        np.testing.assert_array_equal(stats.mean, [3.0, 4.0])
        np.testing.assert_array_equal(stats.std, [0.0, 0.0])
        assert stats.observation_count == 1

    def test_fixed_point(self, bank):
        """Un batch de même moyenne laisse la moyenne inchangée"""
        bank.observe_batch(np.array([[1.0, 1.0]]), [0])
        bank.observe_batch(np.array([[0.0, 2.0], [2.0, 0.0]]), [0, 0])
        np.testing.assert_allclose(bank.get_statistics(0).mean, [1.0, 1.0], rtol=0, atol=1e-15)

    def test_momentum_step(self):
        """Moyenne [0,0], écart-type [1,1], batch {[2,0],[0,2]} -> moyenne [0.1,0.1], écart-type [1,1]"""
        snapshot = BankSnapshot(
            num_classes=1, dim=2, momentum=0.1,
            classes=[{"id": 0, "mean": [0.0, 0.0], "std": [1.0, 1.0], "count": 4, "initialized": True}],
        )
        bank = StatisticsBank.from_snapshot(snapshot)
        bank.observe_batch(np.array([[2.0, 0.0], [0.0, 2.0]]), [0, 0])
        stats = bank.get_statistics(0)
        np.testing.assert_allclose(stats.mean, [0.1, 0.1], rtol=1e-12)
        np.testing.assert_allclose(stats.std, [1.0, 1.0], rtol=1e-12)
        assert stats.observation_count == 6

    def test_singleton_skips_std_update(self, bank):
        """Un seul échantillon dans le batch ne met pas à jour l'écart-type"""
        bank.observe_batch(np.array([[0.0, 0.0], [2.0, 2.0]]), [0, 0])
        before = bank.get_statistics(0).std.copy()
        bank.observe_batch(np.array([[10.0, 10.0]]), [0])
        np.testing.assert_array_equal(bank.get_statistics(0).std, before)

    def test_absent_class_untouched(self, bank):
        """Une classe absente du batch reste identique bit à bit"""
        bank.observe_batch(np.array([[1.0, 2.0], [3.0, 5.0]]), [0, 1])
        before = bank.snapshot_json()
        bank.observe_batch(np.array([[7.0, 7.0], [9.0, 1.0]]), [0, 0])
        after = BankSnapshot.model_validate_json(bank.snapshot_json())
        assert after.classes[1] == BankSnapshot.model_validate_json(before).classes[1]

    def test_empty_batch_is_noop(self, bank):
        """Un batch vide ne modifie rien"""
        before = bank.snapshot_json()
        bank.observe_batch(np.empty((0, 2)), [])
        assert bank.snapshot_json() == before

    def test_dimension_mismatch(self, bank):
        """Des features de mauvaise dimension sont rejetées"""
        with pytest.raises(DimensionMismatchError) as exc_info:
            bank.observe_batch(np.zeros((2, 3)), [0, 1])
        assert "dimension" in str(exc_info.value).lower()

    def test_ragged_features(self, bank):
        """Des lignes de longueurs différentes sont rejetées comme une erreur de dimension"""
        with pytest.raises(DimensionMismatchError):
            bank.observe_batch([[1.0, 2.0], [3.0]], [0, 1])

    @pytest.mark.parametrize("bad_value", [np.nan, np.inf, -np.inf])
    def test_non_finite_features_rejected(self, bank, bad_value):
        """Une valeur non finie est refusée et laisse la banque intacte"""
        before = bank.snapshot_json()
        with pytest.raises(NonFiniteFeatureError) as exc_info:
            bank.observe_batch(np.array([[1.0, 1.0], [bad_value, 1.0]]), [0, 0])
        assert exc_info.value.additional_info["row"] == 1
        assert bank.snapshot_json() == before

        bank.observe_batch(np.array([[0.0, 1.0], [0.2, 1.1]]), [0, 0])
        assert np.isfinite(bank.get_statistics(0).mean).all()

    @pytest.mark.parametrize("label", [2, -1])
    def test_label_out_of_range(self, bank, label):
        """Une étiquette hors de [0, C) est rejetée"""
        with pytest.raises(LabelOutOfRangeError):
            bank.observe_batch(np.zeros((1, 2)), [label])

    def test_std_non_negative(self):
        """Les écarts-types restent positifs après une suite de mises à jour"""
        rng = np.random.default_rng(3)
        bank = StatisticsBank(num_classes=4, dim=3)
        for _ in range(30):
            bank.observe_batch(rng.normal(size=(12, 3)) * 5, rng.integers(0, 4, size=12))
        assert (bank.stds >= 0).all()


class TestRecurrenceOracle:
    """Équivalence avec une réévaluation scalaire de la récurrence"""

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_scalar_replay(self, seed):
        """C=8, d=16, 50 batchs : écart relatif < 1e-10 par coordonnée"""
        rng = np.random.default_rng(seed)
        num_classes, dim = 8, 16
        batches = []
        for _ in range(50):
            size = int(rng.integers(1, 20))
            batches.append((rng.normal(size=(size, dim)) * 3 + 1, rng.integers(0, num_classes, size=size)))

        bank = StatisticsBank(num_classes, dim, momentum=0.1)
        for features, labels in batches:
            bank.observe_batch(features, labels)

        mean, std, ready = replay_recurrence(
            [(f.tolist(), l.tolist()) for f, l in batches], num_classes, dim, 0.1
        )
        np.testing.assert_array_equal(bank.initialized, ready)
        np.testing.assert_allclose(bank.means, mean, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(bank.stds, std, rtol=1e-10, atol=1e-12)


class TestStatisticsAccess:
    """Tests pour la lecture et la capture des statistiques"""

    def test_uninitialized_class(self):
        """Une classe jamais observée n'est pas initialisée"""
        stats = StatisticsBank(3, 2).get_statistics(2)
        assert not stats.initialized
        assert stats.observation_count == 0

    def test_read_only_view(self):
        """La vue retournée ne permet pas de modifier la banque"""
        bank = StatisticsBank(1, 2)
        bank.observe_batch(np.array([[3.0, 4.0]]), [0])
        stats = bank.get_statistics(0)
        with pytest.raises(ValueError):
            stats.mean[0] = 99.0
        np.testing.assert_array_equal(bank.get_statistics(0).mean, [3.0, 4.0])

    def test_observation_count(self):
        """k appels de n échantillons donnent un compte de k·n"""
        bank = StatisticsBank(2, 2)
        for _ in range(7):
            bank.observe_batch(np.ones((3, 2)), [1, 1, 1])
        assert bank.get_statistics(1).observation_count == 21

    def test_class_out_of_range(self):
        """Un identifiant de classe inexistant est rejeté"""
        with pytest.raises(ClassOutOfRangeError):
            StatisticsBank(2, 2).get_statistics(5)

    def test_snapshot_round_trip(self):
        """Capture puis restauration redonnent les mêmes statistiques"""
        rng = np.random.default_rng(0)
        bank = StatisticsBank(5, 4, momentum=0.3)
        for _ in range(10):
            bank.observe_batch(rng.normal(size=(9, 4)), rng.integers(0, 5, size=9))
        text = bank.snapshot_json()
        restored = StatisticsBank.from_snapshot(text)
        np.testing.assert_array_equal(restored.means, bank.means)
        np.testing.assert_array_equal(restored.stds, bank.stds)
        assert restored.snapshot_json() == text
        assert bank.snapshot_json() == text

    def test_snapshot_replay(self):
        """Rejouer les mêmes appels redonne une capture identique"""
        rng = np.random.default_rng(11)
        calls = [(rng.normal(size=(6, 3)), rng.integers(0, 3, size=6)) for _ in range(20)]
        first, second = StatisticsBank(3, 3), StatisticsBank(3, 3)
        for features, labels in calls:
            first.observe_batch(features, labels)
        for features, labels in calls:
            second.observe_batch(features, labels)
        assert first.snapshot_json() == second.snapshot_json()
