import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etlp.errors import ParameterError, ShapeError
from etlp.plasticity import (
    LearningParams,
    TeachingConfig,
    init_projection,
    output_error,
    output_teaching_current,
    project_teaching,
    teaching_spikes,
    update_hidden_weights,
    update_output_weights,
)


class TestSchedule:
    def test_shd_step_fires_every_step(self):
        cfg = TeachingConfig(num_classes=20, rate_hz=100, dt_ms=10)
        assert cfg.schedule(100) == list(range(100))

    def test_periodic_end_aligned(self):
        cfg = TeachingConfig(num_classes=10, rate_hz=100, dt_ms=1)
        assert cfg.schedule(100) == list(range(9, 100, 10))

    def test_end_of_window(self):
        cfg = TeachingConfig(num_classes=3, mode="end_of_window", window_steps=100)
        assert cfg.schedule(100) == [99]

    def test_spike_vector(self):
        cfg = TeachingConfig(num_classes=4, rate_hz=100)
        np.testing.assert_array_equal(teaching_spikes(9, 2, cfg), [0, 0, 1, 0])
        np.testing.assert_array_equal(teaching_spikes(8, 2, cfg), [0, 0, 0, 0])

    def test_bad_label(self):
        with pytest.raises(ParameterError):
            teaching_spikes(0, 4, TeachingConfig(num_classes=4))

    def test_bad_config(self):
        with pytest.raises(ParameterError):
            TeachingConfig(num_classes=0)
        with pytest.raises(ParameterError):
            TeachingConfig(num_classes=2, rate_hz=0)
        with pytest.raises(ValueError):
            TeachingConfig(num_classes=2, mode="sometimes")


class TestProjection:
    def test_deterministic(self):
        np.testing.assert_array_equal(init_projection(5, 30, 7), init_projection(5, 30, 7))

    def test_support_and_mean(self):
        H, C = 2500, 10
        B = init_projection(C, H, 1)
        bound = 1 / np.sqrt(H)
        assert np.abs(B).max() <= bound
        # uniform on [-b, b] has std b/sqrt(3); the mean of n draws has std b/sqrt(3n)
        assert abs(B.mean()) <= 3 * bound / np.sqrt(3 * B.size)

    def test_read_only(self):
        B = init_projection(2, 3, 0)
        with pytest.raises(ValueError):
            B[0, 0] = 1.0

    def test_bad_dims(self):
        with pytest.raises(ParameterError):
            init_projection(0, 3, 0)

    def test_project(self):
        B = init_projection(3, 6, 2)
        np.testing.assert_array_equal(project_teaching(B, [0, 0, 0]), np.zeros(6))
        np.testing.assert_array_equal(project_teaching(B, [0, 1, 0]), B[1])
        np.testing.assert_allclose(project_teaching(2.5 * B, [0, 1, 0]), 2.5 * B[1])
        with pytest.raises(ShapeError):
            project_teaching(B, [0, 1])


class TestHiddenUpdate:
    def test_no_signal_is_identity(self):
        W = np.random.default_rng(0).normal(size=(4, 3))
        assert update_hidden_weights(W, np.zeros(3), np.ones((4, 3)), 0.1) is W

    def test_worked_example(self):
        W = np.zeros((1, 1))
        out = update_hidden_weights(W, [2.0], np.array([[-0.75]]), 5e-4)
        assert out[0, 0] == pytest.approx(-7.5e-4)

    def test_linear_in_lr(self):
        rng = np.random.default_rng(1)
        W = np.zeros((5, 4))
        e, sig = rng.normal(size=(5, 4)), rng.normal(size=4)
        d1 = update_hidden_weights(W, sig, e, 1e-3)
        d2 = update_hidden_weights(W, sig, e, 2e-3)
        np.testing.assert_array_equal(d2, 2 * d1)

    def test_shape(self):
        with pytest.raises(ShapeError):
            update_hidden_weights(np.zeros((2, 3)), np.ones(2), np.zeros((2, 3)), 0.1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.floats(0.1, 10), label=st.integers(0, 3))
def test_projection_sign_and_scale_symmetry(seed, k, label):
    rng = np.random.default_rng(seed)
    B = init_projection(4, 8, seed)
    W, e = np.zeros((6, 8)), rng.normal(size=(6, 8))
    teach = np.eye(4)[label]
    base = update_hidden_weights(W, project_teaching(B, teach), e, 1e-3)
    neg = update_hidden_weights(W, project_teaching(-B, teach), e, 1e-3)
    scaled = update_hidden_weights(W, project_teaching(k * B, teach), e, 1e-3)
    np.testing.assert_array_equal(neg, -base)
    np.testing.assert_array_equal(np.sign(scaled), np.sign(base))


class TestOutput:
    @pytest.mark.parametrize(
        "teach,expected",
        [([0, 0, 1], [-1, -1, 1]), ([0, 0, 0], [0, 0, 0]), ([1, 0], [1, -1])],
    )
    def test_teaching_current(self, teach, expected):
        np.testing.assert_array_equal(output_teaching_current(teach), expected)

    def test_multi_hot(self):
        with pytest.raises(ParameterError):
            output_teaching_current([1, 1, 0])

    def test_error_identity_exhaustive(self):
        for s, I in itertools.product((0, 1), (1, -1)):
            s_star = 1 if I == 1 else 0
            assert output_error(s, I) == s - s_star

    def test_correct_neuron_unchanged(self):
        W = np.ones((2, 1))
        out = update_output_weights(W, [1.0], [1.0], np.full((2, 1), 0.4), 0.1)
        np.testing.assert_array_equal(out, W)

    def test_missed_target_potentiates(self):
        e = np.array([[0.4], [0.2]])
        out = update_output_weights(np.zeros((2, 1)), [0.0], [1.0], e, 0.1)
        np.testing.assert_allclose(out, 0.1 * e)

    def test_false_positive_depresses(self):
        e = np.array([[0.4], [0.2]])
        out = update_output_weights(np.zeros((2, 1)), [1.0], [-1.0], e, 0.1)
        np.testing.assert_allclose(out, -0.1 * e)

    def test_silent_non_target_unchanged(self):
        out = update_output_weights(np.zeros((1, 1)), [0.0], [-1.0], np.ones((1, 1)), 0.1)
        assert out[0, 0] == 0.0

    def test_literal_sign_flips(self):
        e = np.array([[0.4]])
        out = update_output_weights(np.zeros((1, 1)), [0.0], [1.0], e, 0.1, literal_sign=True)
        assert out[0, 0] == pytest.approx(-0.04)

    def test_requires_teaching_spike(self):
        with pytest.raises(ParameterError):
            update_output_weights(np.zeros((1, 2)), [0, 0], [0, 0], np.zeros((1, 2)), 0.1)

    def test_shape(self):
        with pytest.raises(ShapeError):
            update_output_weights(np.zeros((2, 2)), [0, 0], [1, -1], np.zeros((3, 2)), 0.1)


def test_learning_params():
    assert LearningParams().lr == 5e-4
    with pytest.raises(ParameterError):
        LearningParams(lr=0)
