import numpy as np
import pytest

from nnlm.numerics import (init_matrix, log_softmax, make_rng, matvec,
                           sigmoid, sigmoid_deriv, softmax, tanh_act,
                           tanh_deriv)


class TestMatvec:
    def test_identity(self):
        np.testing.assert_array_equal(matvec(np.eye(2), [3.0, 4.0]), [3.0, 4.0])

    def test_hand_product(self):
        out = matvec(np.array([[1.0, 2.0], [3.0, 4.0]]), [1.0, 1.0])
        np.testing.assert_array_equal(out, [3.0, 7.0])

    def test_zero_matrix(self):
        np.testing.assert_array_equal(matvec(np.zeros((3, 2)), [5.0, -2.0]),
                                      np.zeros(3))

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2,\)"):
            matvec(np.zeros((2, 3)), np.zeros(2))


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5])

    def test_large_inputs_do_not_overflow(self):
        np.testing.assert_allclose(softmax([1000.0, 1000.0]), [0.5, 0.5])

    def test_exact_ratios(self):
        np.testing.assert_allclose(softmax(np.log([1.0, 3.0])), [0.25, 0.75],
                                   atol=1e-14)

    def test_sums_to_one_long_vectors(self):
        rng = make_rng(7)
        for n in (3, 100, 20000):
            p = softmax(rng.normal(0, 5, size=n))
            assert abs(p.sum() - 1.0) <= 1e-12
            assert np.all(p > 0)

    def test_shift_invariance(self):
        rng = make_rng(8)
        y = rng.normal(size=40)
        for c in (-100.0, 3.7, 250.0):
            np.testing.assert_allclose(softmax(y + c), softmax(y), atol=1e-12)

    def test_argmax_preserved(self):
        y = np.array([0.3, 9.2, -4.0, 9.1])
        assert softmax(y).argmax() == y.argmax()

    def test_log_softmax_matches_log_of_softmax(self):
        y = make_rng(9).normal(size=30)
        np.testing.assert_allclose(log_softmax(y), np.log(softmax(y)), atol=1e-12)


class TestActivations:
    def test_values_at_zero(self):
        assert float(sigmoid(0.0)) == 0.5
        assert tanh_act(0.0) == 0.0

    def test_sigmoid_symmetry(self):
        assert abs(float(sigmoid(-2.0)) - (1.0 - float(sigmoid(2.0)))) < 1e-15

    def test_derivatives_at_zero(self):
        assert sigmoid_deriv(float(sigmoid(0.0))) == 0.25
        assert tanh_deriv(np.tanh(0.0)) == 1.0

    def test_derivatives_match_finite_differences(self):
        h = 1e-6
        xs = np.linspace(-4, 4, 101)
        num_sig = (sigmoid(xs + h) - sigmoid(xs - h)) / (2 * h)
        np.testing.assert_allclose(sigmoid_deriv(sigmoid(xs)), num_sig, atol=1e-8)
        num_tanh = (np.tanh(xs + h) - np.tanh(xs - h)) / (2 * h)
        np.testing.assert_allclose(tanh_deriv(np.tanh(xs)), num_tanh, atol=1e-8)

    def test_extreme_inputs_stay_finite(self):
        assert float(sigmoid(1000.0)) == 1.0
        assert float(sigmoid(-1000.0)) == 0.0


class TestInit:
    def test_same_seed_same_matrix(self):
        a = init_matrix(5, 7, make_rng(3))
        b = init_matrix(5, 7, make_rng(3))
        np.testing.assert_array_equal(a, b)

    def test_range(self):
        m = init_matrix(50, 50, make_rng(4))
        assert np.all(np.abs(m) <= 0.1)

    def test_mean_of_many_samples_near_zero(self):
        m = init_matrix(1000, 1000, make_rng(5))
        assert abs(m.mean()) < 1e-3

    def test_zero_dimension_rejected(self):
        with pytest.raises(ValueError):
            init_matrix(0, 3, make_rng(0))
