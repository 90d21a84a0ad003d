"""
Unit tests for the smoothness classifiers, the weight file and offline training.
"""
import numpy as np
import pytest

from app.core.config import Settings
from app.core.exceptions import ConfigurationError, UsageError
from app.services.classifier import (
    SMOOTH,
    AnnClassifier,
    ClassifierWeights,
    FallbackClassifier,
    load_classifier,
    normalize_stencils,
    read_weights,
    write_weights,
)


def _constant_ann(winner: int, stencil: int = 3) -> AnnClassifier:
    """Single linear layer whose bias always selects class ``winner``."""
    bias = np.zeros(4)
    bias[winner - 1] = 5.0
    return AnnClassifier(ClassifierWeights([stencil, 4], [np.zeros((4, stencil))], [bias]))


class TestFallbackClassifier:
    """Test suite for the coefficient-decay classifier."""

    def test_step_is_discontinuous(self):
        """A unit step is marked discontinuous at the jump and smooth on the flat parts."""
        t = np.arange(40)
        values = np.where(t < 20, 1.0, 0.0)
        tau = FallbackClassifier(window=16).classify_lines(values[None, :])[0]
        assert tau[17:23].min() <= 2
        assert np.all(tau[:15] == SMOOTH)
        assert np.all(tau[25:] == SMOOTH)

    def test_long_wave_is_smooth(self):
        t = np.arange(48)
        values = np.sin(2 * np.pi * t / 48.0)
        tau = FallbackClassifier(window=16).classify_lines(values[None, :])
        assert tau.min() >= 3

    def test_flat_lines(self):
        """Ranges below the tolerance never reach the model."""
        values = 1.0 + 1e-6 * np.arange(30)
        tau = FallbackClassifier().classify_lines(values[None, :])
        assert np.all(tau == SMOOTH)

    def test_kink_is_marked_as_kink(self):
        """A corner is class 2 where the window holds it and smooth on straight parts."""
        t = np.arange(64)
        values = np.abs(t - 32) / 32.0
        tau = FallbackClassifier().classify_lines(values[None, :])[0]
        assert np.all(tau[30:35] == 2)
        assert np.all(tau[:12] == SMOOTH)
        assert np.all(tau[-12:] == SMOOTH)

    def test_jump_class_stays_near_the_jump(self):
        """Windows reach 16 cells past a jump on a ramp, the jump class only three."""
        t = np.arange(64)
        values = np.where(t < 32, 1.0, 0.0) + 0.01 * t
        tau = FallbackClassifier().classify_lines(values[None, :])[0]
        assert tau[31] == 1 and tau[32] == 1
        assert np.all(tau[:27] == SMOOTH)
        assert np.all(tau[36:] == SMOOTH)

    def test_resolved_sine_is_smooth(self):
        x = np.linspace(0.0, 1.0, 64)
        tau = FallbackClassifier().classify_lines(np.sin(2 * np.pi * x)[None, :])
        assert np.all(tau == SMOOTH)

    def test_decay_exponent_of_profiles(self):
        """Jump, kink and smooth windows decay like k^-1, k^-2 and faster."""
        t = np.arange(32)
        windows = np.stack(
            [
                np.where(t < 16, 1.0, 0.0),
                np.abs(t - 16) / 16.0,
                np.sin(2 * np.pi * t / 63.0),
            ]
        )
        jump, kink, smooth = FallbackClassifier().decay_exponent(windows)
        assert 0.5 < jump < 1.5
        assert 1.5 < kink < 2.5
        assert smooth > 2.5

    def test_straight_line_decays_fast(self):
        """A straight line continues exactly, so only the smooth continuation is left."""
        windows = np.linspace(0.0, 1.0, 32)[None, :]
        assert FallbackClassifier().decay_exponent(windows)[0] > 2.5

    def test_zero_window_has_infinite_exponent(self):
        assert np.isinf(FallbackClassifier().decay_exponent(np.zeros((1, 32)))[0])

    def test_classes_from_exponent(self):
        classifier = FallbackClassifier()
        exponent = np.array([-1.0, 0.4, 0.5, 1.0, 1.49, 1.5, 2.0, 2.5, 4.0, np.inf])
        assert classifier.classes_from_exponent(exponent).tolist() == [3, 3, 1, 1, 1, 2, 2, 4, 4, 4]

    def test_invalid_parameters(self):
        with pytest.raises(ConfigurationError):
            FallbackClassifier(window=8)
        with pytest.raises(ConfigurationError):
            FallbackClassifier(stencil=6)
        with pytest.raises(ConfigurationError):
            FallbackClassifier(thresholds=(2.5, 1.5, 0.5))
        with pytest.raises(ConfigurationError):
            FallbackClassifier(band_start=1.0)

    def test_nonfinite_input(self):
        with pytest.raises(UsageError):
            FallbackClassifier().classify_lines(np.array([[0.0, np.nan, 1.0]]))


class TestAnnClassifier:
    """Test suite for the numpy network evaluation."""

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(1)
        weights = ClassifierWeights(
            [5, 8, 4],
            [rng.normal(size=(8, 5)), rng.normal(size=(4, 8))],
            [rng.normal(size=8), rng.normal(size=4)],
        )
        probs = AnnClassifier(weights).probabilities(rng.uniform(-1, 1, size=(10, 5)))
        assert probs.shape == (10, 4)
        assert np.allclose(probs.sum(axis=1), 1.0)
        assert np.all(probs > 0.0)

    def test_hand_weights(self):
        """Constant stencils are smooth; everything else follows the bias."""
        classifier = _constant_ann(3)
        tau = classifier.classify_stencils(np.array([[0.0, 1.0, 2.0], [1.0, 1.0, 1.0]]))
        assert tau.tolist() == [3, 4]

    def test_lines_use_the_network(self):
        classifier = _constant_ann(2)
        tau = classifier.classify_lines(np.array([[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]]))
        assert tau[0, 2] == 2 and tau[0, 3] == 2

    def test_relu_activation(self):
        weights = ClassifierWeights(
            [3, 2, 4],
            [-np.ones((2, 3)), np.zeros((4, 2))],
            [np.zeros(2), np.array([0.0, 0.0, 0.0, 1.0])],
            activation=1,
        )
        assert AnnClassifier(weights).classify_stencils(np.array([[0.0, 0.5, 1.0]])).tolist() == [4]

    def test_normalize_stencils(self):
        normalized, span = normalize_stencils(np.array([[2.0, 3.0, 4.0], [1.0, 1.0, 1.0]]))
        assert normalized[0].tolist() == [-1.0, 0.0, 1.0]
        assert span.tolist() == [2.0, 0.0]


class TestWeightFile:
    """Test suite for the binary weight format."""

    def test_write_and_read(self, tmp_path):
        rng = np.random.default_rng(2)
        weights = ClassifierWeights(
            [7, 6, 4],
            [rng.normal(size=(6, 7)), rng.normal(size=(4, 6))],
            [rng.normal(size=6), rng.normal(size=4)],
            activation=1,
        )
        path = write_weights(weights, tmp_path / "nested" / "w.fcw")
        loaded = read_weights(path)
        assert loaded.sizes == [7, 6, 4]
        assert loaded.activation == 1
        for a, b in zip(weights.weights + weights.biases, loaded.weights + loaded.biases):
            assert np.array_equal(a, b)
        assert path.read_bytes()[:4] == b"FCWT"

    def test_bad_magic(self, tmp_path):
        path = write_weights(_constant_ann(1).weights, tmp_path / "w.fcw")
        data = bytearray(path.read_bytes())
        data[:4] = b"NOPE"
        path.write_bytes(bytes(data))
        with pytest.raises(ConfigurationError):
            read_weights(path)

    def test_truncated_and_trailing(self, tmp_path):
        path = write_weights(_constant_ann(1).weights, tmp_path / "w.fcw")
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ConfigurationError):
            read_weights(path)
        path.write_bytes(data + b"\x00" * 8)
        with pytest.raises(ConfigurationError):
            read_weights(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            read_weights(tmp_path / "absent.fcw")

    def test_output_must_have_four_classes(self):
        with pytest.raises(ConfigurationError):
            ClassifierWeights([3, 3], [np.zeros((3, 3))], [np.zeros(3)])
        with pytest.raises(ConfigurationError):
            ClassifierWeights([3, 4], [np.zeros((4, 2))], [np.zeros(4)])
        with pytest.raises(ConfigurationError):
            ClassifierWeights([3, 4], [np.zeros((4, 3))], [np.zeros(4)], activation=7)


class TestLoadClassifier:
    """Test suite for settings-driven classifier selection."""

    def test_fallback_from_settings(self):
        config = Settings(fallback_window=24, visc_stencil=5)
        classifier = load_classifier(config)
        assert isinstance(classifier, FallbackClassifier)
        assert classifier.window == 24 and classifier.stencil == 5

    def test_ann_from_weight_file(self, tmp_path):
        path = write_weights(_constant_ann(2, stencil=7).weights, tmp_path / "w.fcw")
        classifier = load_classifier(Settings(), variant="ann", weights_path=str(path))
        assert isinstance(classifier, AnnClassifier)
        assert classifier.stencil == 7

    def test_ann_without_weights(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_classifier(Settings(), variant="ann", weights_path=str(tmp_path / "none.fcw"))

    def test_unknown_variant(self):
        with pytest.raises(ConfigurationError):
            load_classifier(Settings(), variant="oracle")


class TestTraining:
    """Test suite for stencil generation and the torch training loop."""

    def test_generated_stencils(self):
        pytest.importorskip("torch")
        from app.services.classifier_training import generate_stencils

        X, y = generate_stencils(20, stencil=7, seed=3)
        assert X.shape == (80, 7)
        assert np.bincount(y).tolist() == [20, 20, 20, 20]
        assert X.min() >= -1.0 and X.max() <= 1.0

    def test_short_training_run_writes_weights(self, tmp_path):
        pytest.importorskip("torch")
        from app.services.classifier_training import TrainingConfig, train_classifier

        config = TrainingConfig(
            samples_per_class=64,
            test_samples_per_class=16,
            epochs=2,
            batch_size=32,
            min_accuracy=0.0,
            output=str(tmp_path / "w.fcw"),
        )
        classifier, report = train_classifier(config)
        assert report.weights_path is not None
        assert read_weights(report.weights_path).sizes == [7, 16, 16, 16, 16, 4]
        assert 0.0 <= report.accuracy <= 1.0
        assert set(report.per_class) == {"jump", "kink", "zigzag", "smooth"}
        assert len(report.history) == 2

    def test_accuracy_threshold(self):
        pytest.importorskip("torch")
        from app.core.exceptions import TrainingError
        from app.services.classifier_training import TrainingConfig, train_classifier

        config = TrainingConfig(samples_per_class=16, test_samples_per_class=8, epochs=1, min_accuracy=1.01)
        with pytest.raises(TrainingError):
            train_classifier(config)

    @pytest.mark.slow
    def test_network_agrees_with_fallback(self):
        """The trained network and the spectral fallback agree on steps and resolved waves."""
        pytest.importorskip("torch")
        from app.services.classifier_training import TrainingConfig, train_classifier

        classifier, report = train_classifier(TrainingConfig())
        assert report.accuracy >= 0.95
        rng = np.random.default_rng(11)
        t = np.arange(64) / 63.0
        steps = [
            np.where(np.arange(64) < rng.integers(16, 48), 1.0, 0.0)
            + 0.05 * np.sin(2 * np.pi * t + rng.uniform(0, 6))
            for _ in range(40)
        ]
        waves = [np.sin(2 * np.pi * rng.uniform(0.5, 1.5) * t + rng.uniform(0, 6)) for _ in range(40)]
        lines = np.array(steps + waves)
        agreement = np.mean(classifier.classify_lines(lines) == FallbackClassifier().classify_lines(lines))
        assert agreement >= 0.9


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
