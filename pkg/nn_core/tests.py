import math

import numpy as np
from django.test import SimpleTestCase

from cohortdp.exceptions import LayoutError

from .mlp import Batch, backward, forward, xent_loss
from .optim import AdagradState, OptimizerConfig, LocalOptimizer, adagrad_step
from .params import (
    LayerShapes, ParamVector, Gradient, init_params, vec_add_scaled, vec_l2_norm,
)


def numeric_gradient(params, batch, h=1e-5):
    grad = np.zeros_like(params.values)
    for i in range(len(params)):
        up = params.values.copy()
        down = params.values.copy()
        up[i] += h
        down[i] -= h
        f_up = xent_loss(forward(ParamVector(up, params.shapes), batch.features), batch.labels)
        f_down = xent_loss(forward(ParamVector(down, params.shapes), batch.features), batch.labels)
        grad[i] = (f_up - f_down) / (2 * h)
    return grad


def random_case(dims, rows, seed):
    rng = np.random.default_rng(seed)
    shapes = LayerShapes(dims)
    params = ParamVector(rng.normal(0, 0.5, shapes.param_count), shapes)
    batch = Batch(rng.normal(size=(rows, dims[0])), rng.integers(0, dims[-1], rows))
    return params, batch


class ParamsTests(SimpleTestCase):

    def test_init_is_deterministic(self):
        shapes = LayerShapes((79, 79, 128, 9))
        a = init_params(shapes, 7)
        b = init_params(shapes, 7)
        self.assertTrue(np.array_equal(a.values, b.values))

    def test_default_layout_size(self):
        self.assertEqual(len(init_params(LayerShapes((79, 79, 128, 9)), 0)), 17721)

    def test_biases_start_at_zero(self):
        p = init_params(LayerShapes((2, 2)), 3)
        self.assertTrue(np.all(p.values[-2:] == 0.0))
        self.assertTrue(np.all(p.values[:4] != 0.0))

    def test_weights_within_fan_limit(self):
        p = init_params(LayerShapes((4, 6)), 1)
        self.assertLessEqual(np.abs(p.values[:24]).max(), math.sqrt(6 / 10))

    def test_invalid_shapes(self):
        with self.assertRaises(LayoutError):
            LayerShapes((5,))
        with self.assertRaises(LayoutError):
            LayerShapes((5, 0, 2))

    def test_norm_and_add_scaled(self):
        shapes = LayerShapes((1, 1))
        a = ParamVector(np.array([3.0, 4.0]), shapes)
        self.assertEqual(vec_l2_norm(a), 5.0)
        self.assertEqual(vec_l2_norm(vec_add_scaled(a, a, -1.0)), 0.0)
        self.assertEqual(vec_l2_norm(ParamVector(np.zeros(2), shapes)), 0.0)

    def test_layout_mismatch(self):
        a = init_params(LayerShapes((2, 2)), 0)
        b = init_params(LayerShapes((3, 1)), 0)
        with self.assertRaises(LayoutError):
            vec_add_scaled(a, b, 1.0)


class ForwardTests(SimpleTestCase):

    def test_zero_params_give_uniform_probabilities(self):
        shapes = LayerShapes((79, 79, 128, 9))
        probs = forward(ParamVector(np.zeros(shapes.param_count), shapes), np.ones((3, 79)))
        np.testing.assert_allclose(probs, np.full((3, 9), 1 / 9), atol=1e-15)

    def test_rows_sum_to_one(self):
        params, batch = random_case((10, 8, 5), 20, 4)
        probs = forward(params, batch.features)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        self.assertTrue(np.all((probs > 0) & (probs < 1)))

    def test_hand_evaluated_two_layer_net(self):
        # W1 = [[1, -1], [0, 2]], b1 = [0, 1]; W2 = [[1, 0], [0, 1]], b2 = [0.5, 0]
        shapes = LayerShapes((2, 2, 2))
        values = np.array([1, -1, 0, 2, 0, 1, 1, 0, 0, 1, 0.5, 0], dtype=float)
        x = np.array([[1.0, 1.0]])
        # hidden = relu([1, 2]) = [1, 2]; logits = [1.5, 2]
        expected_second = 1 / (1 + math.exp(-0.5))
        probs = forward(ParamVector(values, shapes), x)
        self.assertAlmostEqual(probs[0, 1], expected_second, places=14)
        self.assertAlmostEqual(probs[0, 0], 1 - expected_second, places=14)

    def test_width_mismatch(self):
        params = init_params(LayerShapes((4, 2)), 0)
        with self.assertRaises(LayoutError):
            forward(params, np.zeros((1, 3)))


class LossTests(SimpleTestCase):

    def test_uniform_loss_is_log_nine(self):
        self.assertAlmostEqual(xent_loss(np.full((4, 9), 1 / 9), [0, 3, 5, 8]), math.log(9), places=12)

    def test_certain_prediction_has_zero_loss(self):
        self.assertEqual(xent_loss(np.array([[0.0, 1.0]]), [1]), 0.0)

    def test_hand_example(self):
        loss = xent_loss(np.array([[0.8, 0.2], [0.3, 0.7]]), [0, 1])
        self.assertAlmostEqual(loss, (-math.log(0.8) - math.log(0.7)) / 2, places=12)
        self.assertAlmostEqual(loss, 0.28990, places=5)

    def test_label_out_of_range(self):
        with self.assertRaises(LayoutError):
            xent_loss(np.array([[0.5, 0.5]]), [2])


class BackwardTests(SimpleTestCase):

    def assert_matches_finite_differences(self, dims, seed):
        params, batch = random_case(dims, 6, seed)
        analytic, _ = backward(params, batch)
        numeric = numeric_gradient(params, batch)
        rel = np.linalg.norm(analytic.values - numeric) / np.linalg.norm(analytic.values + numeric)
        self.assertLess(rel, 1e-6)

    def test_gradient_check_small_net(self):
        for seed in range(3):
            self.assert_matches_finite_differences((4, 3, 2), seed)

    def test_gradient_check_wider_net(self):
        self.assert_matches_finite_differences((10, 8, 5), 11)

    def test_single_class_net_is_stationary(self):
        shapes = LayerShapes((1, 1))
        grad, loss = backward(ParamVector(np.array([0.3, -0.2]), shapes), Batch([[1.0], [2.0]], [0, 0]))
        self.assertEqual(loss, 0.0)
        self.assertTrue(np.all(grad.values == 0.0))

    def test_duplicated_rows_leave_gradient_unchanged(self):
        params, batch = random_case((4, 3, 2), 5, 9)
        doubled = Batch(np.vstack([batch.features, batch.features]), np.concatenate([batch.labels, batch.labels]))
        g1, l1 = backward(params, batch)
        g2, l2 = backward(params, doubled)
        np.testing.assert_allclose(g1.values, g2.values, rtol=1e-12, atol=1e-15)
        self.assertAlmostEqual(l1, l2, places=12)

    def test_loss_matches_forward(self):
        params, batch = random_case((4, 3, 2), 5, 2)
        _, loss = backward(params, batch)
        self.assertEqual(loss, xent_loss(forward(params, batch.features), batch.labels))


class AdagradTests(SimpleTestCase):

    def setUp(self):
        self.shapes = LayerShapes((1, 1))
        self.params = ParamVector(np.array([1.0, 0.0]), self.shapes)

    def test_first_step(self):
        state = AdagradState(np.zeros(2), learning_rate=0.1, stability=0.0)
        out = adagrad_step(self.params, state, Gradient(np.array([3.0, 0.0]), self.shapes))
        self.assertAlmostEqual(out.values[0], 0.9, places=15)

    def test_zero_gradient_is_a_no_op(self):
        state = AdagradState(np.zeros(2))
        out = adagrad_step(self.params, state, Gradient(np.zeros(2), self.shapes))
        self.assertTrue(np.array_equal(out.values, self.params.values))
        self.assertTrue(np.all(state.accumulator == 0.0))

    def test_second_step_shrinks(self):
        state = AdagradState(np.zeros(2), learning_rate=0.1, stability=0.0)
        g = Gradient(np.array([1.0, 1.0]), self.shapes)
        once = adagrad_step(self.params, state, g)
        twice = adagrad_step(once, state, g)
        self.assertAlmostEqual(once.values[0] - twice.values[0], 0.1 / math.sqrt(2), places=12)

    def test_accumulator_is_monotone(self):
        rng = np.random.default_rng(0)
        state = AdagradState.fresh(self.params)
        params = self.params
        previous = state.accumulator.copy()
        for _ in range(20):
            params = adagrad_step(params, state, Gradient(rng.normal(size=2), self.shapes))
            self.assertTrue(np.all(state.accumulator >= previous))
            previous = state.accumulator.copy()

    def test_local_optimizer_sgd_mode(self):
        opt = LocalOptimizer(OptimizerConfig(name='sgd', learning_rate=0.5), self.params)
        out = opt.step(self.params, Gradient(np.array([2.0, 4.0]), self.shapes))
        np.testing.assert_array_equal(out.values, [0.0, -2.0])
