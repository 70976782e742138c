import numpy as np
import pytest

from molprompt import autodiff as ad
from molprompt.autodiff import Adam, Tensor


def numeric_grad(fn, value, eps=1e-6):
    """Central differences on a plain array-valued closure."""
    value = np.asarray(value, dtype=np.float64)
    grad = np.zeros_like(value)
    for idx in np.ndindex(value.shape):
        bumped = value.copy()
        bumped[idx] += eps
        up = fn(bumped)
        bumped[idx] -= 2 * eps
        down = fn(bumped)
        grad[idx] = (up - down) / (2 * eps)
    return grad


def check_op(build, shape, seed=0, tol=1e-6):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=shape)
    t = Tensor(x0.copy(), requires_grad=True)
    loss = build(t)
    ad.backward(loss)
    expected = numeric_grad(lambda v: build(Tensor(v, requires_grad=True)).item(), x0)
    np.testing.assert_allclose(t.grad, expected, atol=tol, rtol=tol)


class TestOps:
    def test_sum_gradient_is_ones(self):
        t = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        ad.backward(ad.tensor_sum(t))
        np.testing.assert_array_equal(t.grad, np.ones((2, 3)))

    def test_quadratic_closed_form(self):
        # loss = ||W x||^2 has gradient 2 (W x) x^T
        rng = np.random.default_rng(1)
        w0 = rng.normal(size=(4, 3))
        x = rng.normal(size=(3, 1))
        w = Tensor(w0.copy(), requires_grad=True)
        loss = ad.tensor_sum(ad.square(w @ Tensor(x)))
        ad.backward(loss)
        np.testing.assert_allclose(w.grad, 2 * (w0 @ x) @ x.T, atol=1e-12)

    def test_add_broadcast(self):
        check_op(lambda t: ad.tensor_sum(ad.square(t + np.ones((1, 3)))), (4, 3))

    def test_mul(self):
        other = np.arange(12.0).reshape(4, 3) * 0.1
        check_op(lambda t: ad.tensor_sum(ad.square(ad.mul(t, other))), (4, 3))

    def test_matmul_both_sides(self):
        rng = np.random.default_rng(2)
        b0 = rng.normal(size=(3, 2))
        check_op(lambda t: ad.tensor_sum(ad.square(t @ Tensor(b0))), (4, 3))
        a0 = rng.normal(size=(4, 3))
        check_op(lambda t: ad.tensor_sum(ad.square(Tensor(a0) @ t)), (3, 2))

    def test_relu(self):
        check_op(lambda t: ad.tensor_sum(ad.relu(t)), (5, 4), seed=3)

    def test_softmax(self):
        weights = np.arange(5.0).reshape(5, 1)
        check_op(
            lambda t: ad.tensor_sum(ad.mul(ad.softmax(t, axis=0), weights)),
            (5, 1),
        )

    def test_sqrt_with_eps(self):
        check_op(
            lambda t: ad.tensor_sum(ad.sqrt(ad.square(t), eps=1e-12)), (3, 3), seed=4
        )

    def test_sum_axis(self):
        check_op(
            lambda t: ad.tensor_sum(ad.square(ad.tensor_sum(t, axis=1))), (4, 3)
        )

    def test_gather_accumulates_duplicates(self):
        t = Tensor(np.ones((3, 2)), requires_grad=True)
        out = ad.tensor_sum(ad.gather_rows(t, [0, 0, 2]))
        ad.backward(out)
        np.testing.assert_array_equal(t.grad, [[2, 2], [0, 0], [1, 1]])

    def test_scatter_add(self):
        check_op(
            lambda t: ad.tensor_sum(ad.square(ad.scatter_add_rows(t, [0, 0, 1], 2))),
            (3, 2),
        )

    def test_slice_rows(self):
        check_op(lambda t: ad.tensor_sum(ad.square(ad.slice_rows(t, 1, 3))), (4, 2))

    def test_concat(self):
        rng = np.random.default_rng(5)
        other = rng.normal(size=(2, 3))
        check_op(
            lambda t: ad.tensor_sum(ad.square(ad.concat([t, Tensor(other)], axis=0))),
            (3, 3),
        )

    def test_transpose(self):
        check_op(lambda t: ad.tensor_sum(ad.square(t.T @ t)), (4, 2))

    def test_layer_norm_rows(self):
        rng = np.random.default_rng(7)
        x0 = rng.normal(size=(4, 6))
        out = ad.layer_norm_rows(Tensor(x0))
        np.testing.assert_allclose(out.value.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.value.std(axis=1), 1.0, atol=1e-6)
        weights = rng.normal(size=(4, 6))
        check_op(
            lambda t: ad.tensor_sum(ad.mul(ad.layer_norm_rows(t), weights)),
            (4, 6),
            seed=8,
            tol=1e-5,
        )

    def test_smooth_l1_regions(self):
        # quadratic inside the threshold, linear outside
        target = np.zeros((1, 4))
        x = Tensor(np.array([[0.25, -0.5, 2.0, -3.0]]), requires_grad=True)
        loss = ad.tensor_sum(ad.smooth_l1(x, Tensor(target), beta=1.0))
        expected = 0.5 * 0.25**2 + 0.5 * 0.5**2 + (2.0 - 0.5) + (3.0 - 0.5)
        assert loss.item() == pytest.approx(expected, abs=1e-12)
        ad.backward(loss)
        np.testing.assert_allclose(x.grad, [[0.25, -0.5, 1.0, -1.0]], atol=1e-12)

    def test_bce_zero_logits_is_ln2(self):
        logits = Tensor(np.zeros((2, 3)), requires_grad=True)
        loss = ad.mean_all(ad.bce_with_logits(logits, np.ones((2, 3))))
        assert loss.item() == pytest.approx(np.log(2.0), abs=1e-12)

    def test_bce_gradient(self):
        targets = np.array([[1.0, 0.0, 1.0]])
        check_op(
            lambda t: ad.tensor_sum(ad.bce_with_logits(t, targets)), (1, 3), seed=6
        )

    def test_backward_requires_scalar(self):
        t = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ValueError):
            ad.backward(t + 1.0)

    def test_grad_accumulates_across_uses(self):
        t = Tensor(np.array([[2.0]]), requires_grad=True)
        loss = ad.tensor_sum(t + t)
        ad.backward(loss)
        assert t.grad[0, 0] == 2.0


class TestAdam:
    def test_minimizes_quadratic(self):
        t = Tensor(np.array([[5.0, -3.0]]), requires_grad=True)
        opt = Adam({"t": t}, lr=0.05)
        for _ in range(400):
            opt.zero_grad()
            loss = ad.tensor_sum(ad.square(t))
            ad.backward(loss)
            opt.step()
        assert np.abs(t.value).max() < 1e-2

    def test_skips_frozen_params(self):
        a = Tensor(np.ones((1, 1)), requires_grad=True)
        b = Tensor(np.ones((1, 1)), requires_grad=True)
        opt = Adam({"a": a}, lr=0.1)
        opt.zero_grad()
        loss = ad.tensor_sum(ad.square(a) + ad.square(b))
        ad.backward(loss)
        opt.step()
        assert a.value[0, 0] != 1.0
        assert b.value[0, 0] == 1.0
