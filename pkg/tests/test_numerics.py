"""Tensor op semantics, softmax properties, and gradient agreement."""

import numpy as np
import pytest

from kgcontext import numerics as nm
from kgcontext.numerics import Tensor


class TestForwardBasics:
    def test_softmax_symmetry(self):
        """Equal logits split the mass exactly evenly."""
        out = nm.softmax(Tensor([[0.0, 0.0, 0.0]]))
        np.testing.assert_allclose(out.data, [[1 / 3, 1 / 3, 1 / 3]], atol=1e-15)

    def test_tanh_odd_at_zero(self):
        out = nm.tanh(Tensor(np.zeros(5)))
        np.testing.assert_array_equal(out.data, np.zeros(5))

    def test_concat_lengths(self):
        a, b = Tensor(np.ones(3)), Tensor(np.ones(4))
        assert nm.concat([a, b]).shape == (7,)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(nm.ShapeError) as exc:
            nm.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))
        assert "(2, 3)" in str(exc.value) and "(4, 2)" in str(exc.value)

    def test_softmax_rows_normalized(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(-50, 50, size=(40, 9))
        out = nm.softmax(Tensor(x))
        assert (out.data >= 0).all()
        np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-9)

    def test_masked_softmax_zeroes_masked_and_empty_rows(self):
        x = Tensor(np.array([[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]]))
        mask = np.array([[True, False, True], [False, False, False]])
        out = nm.masked_softmax(x, mask)
        assert out.data[0, 1] == 0.0
        np.testing.assert_allclose(out.data[0].sum(), 1.0, atol=1e-12)
        np.testing.assert_array_equal(out.data[1], np.zeros(3))

    def test_non_finite_raises(self):
        with pytest.raises(nm.NonFiniteError):
            nm.log(Tensor(np.zeros(2)))

    def test_determinism(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(6, 6))
        a = nm.softmax(nm.matmul(Tensor(x), Tensor(x))).data
        b = nm.softmax(nm.matmul(Tensor(x), Tensor(x))).data
        np.testing.assert_array_equal(a, b)


class TestBackwardAgainstFiniteDifferences:
    """Every differentiable op agrees with central differences."""

    def _check(self, build, *shapes, seed=0):
        rng = np.random.default_rng(seed)
        params = nm.Params()
        for i, shape in enumerate(shapes):
            params.add(f"p{i}", rng.normal(scale=0.6, size=shape))

        def f():
            return build(*(params[f"p{i}"] for i in range(len(shapes))))

        report = nm.grad_check(f, params.items(), eps=1e-5, tol=1e-4)
        assert report.passed, report.summary()

    def test_add_broadcast(self):
        self._check(lambda a, b: nm.tsum(nm.add(a, b)), (3, 4), (4,))

    def test_sub_broadcast(self):
        self._check(lambda a, b: nm.tsum(nm.mul(nm.sub(a, b), nm.sub(a, b))), (3, 4), (3, 1))

    def test_mul(self):
        self._check(lambda a, b: nm.tsum(nm.mul(a, b)), (2, 5), (2, 5))

    def test_matmul_2d(self):
        self._check(lambda a, b: nm.tsum(nm.matmul(a, b)), (3, 4), (4, 2))

    def test_matmul_batched_shared_weight(self):
        self._check(lambda a, b: nm.tsum(nm.matmul(a, b)), (2, 3, 4), (4, 5))

    def test_tanh_sigmoid_relu_exp_log_sqrt(self):
        self._check(lambda a: nm.tsum(nm.tanh(a)), (7,))
        self._check(lambda a: nm.tsum(nm.sigmoid(a)), (7,))
        self._check(lambda a: nm.tsum(nm.relu(nm.add(a, 0.1))), (7,))
        self._check(lambda a: nm.tsum(nm.exp(a)), (4,))
        self._check(lambda a: nm.tsum(nm.log(nm.add(nm.mul(a, a), 1.0))), (4,))
        self._check(lambda a: nm.tsum(nm.sqrt(nm.add(nm.mul(a, a), 1.0))), (4,))

    def test_reductions(self):
        self._check(lambda a: nm.mul(nm.mean(a), 3.0), (4, 5))
        self._check(lambda a: nm.tsum(nm.mean(a, axis=1)), (4, 5))
        self._check(lambda a: nm.tsum(nm.tsum(a, axis=0, keepdims=True)), (4, 5))

    def test_softmax_grad(self):
        rng = np.random.default_rng(5)
        w = rng.normal(size=(3, 6))
        self._check(lambda a: nm.tsum(nm.mul(nm.softmax(a), Tensor(w))), (3, 6))

    def test_masked_softmax_grad(self):
        rng = np.random.default_rng(6)
        mask = rng.uniform(size=(3, 6)) > 0.3
        mask[:, 0] = True
        w = rng.normal(size=(3, 6))
        self._check(lambda a: nm.tsum(nm.mul(nm.masked_softmax(a, mask), Tensor(w))), (3, 6))

    def test_log_softmax_grad(self):
        rng = np.random.default_rng(8)
        w = rng.normal(size=(4, 5))
        self._check(lambda a: nm.tsum(nm.mul(nm.log_softmax(a), Tensor(w))), (4, 5))

    def test_concat_reshape_transpose(self):
        self._check(lambda a, b: nm.tsum(nm.mul(nm.concat([a, b], axis=1), nm.concat([a, b], axis=1))), (3, 2), (3, 4))
        self._check(lambda a: nm.tsum(nm.mul(nm.reshape(a, (6, 2)), 2.0)), (3, 4))
        self._check(lambda a: nm.tsum(nm.tanh(nm.transpose(a, (1, 0)))), (3, 4))

    def test_gather_and_pick(self):
        idx = np.array([0, 2, 2, 1])
        self._check(lambda t: nm.tsum(nm.mul(nm.gather_rows(t, idx), nm.gather_rows(t, idx))), (3, 4))
        pick_idx = np.array([1, 0, 3])
        self._check(lambda a: nm.tsum(nm.pick(a, pick_idx)), (3, 4))

    def test_segment_softmax_and_sum(self):
        seg = np.array([0, 0, 1, 1, 1, 3])
        rng = np.random.default_rng(9)
        vals = rng.normal(size=(6, 3))
        wvec = rng.normal(size=6)
        self._check(
            lambda l: nm.tsum(nm.mul(nm.segment_softmax(l, seg, 4), Tensor(wvec))),
            (6,),
        )
        self._check(lambda v: nm.tsum(nm.mul(nm.segment_sum(v, seg, 4), nm.segment_sum(v, seg, 4))), (6, 3))
        self._check(
            lambda l, v: nm.tsum(
                nm.mul(
                    nm.segment_sum(nm.mul(nm.reshape(nm.segment_softmax(l, seg, 4), (6, 1)), v), seg, 4),
                    Tensor(vals[:4]),
                )
            ),
            (6,),
            (6, 3),
        )

    def test_losses(self):
        targets = np.array([2, 0, 1])
        self._check(lambda a: nm.cross_entropy(a, targets), (3, 4))
        y = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        self._check(lambda a: nm.bce_with_logits(a, y), (3, 2))


class TestSegmentSemantics:
    def test_segment_softmax_uniform_within_equal_logits(self):
        seg = np.array([0, 0, 0, 1, 1])
        out = nm.segment_softmax(Tensor(np.zeros(5)), seg, 2)
        np.testing.assert_array_equal(out.data[:3], np.full(3, 1 / 3))
        np.testing.assert_array_equal(out.data[3:], np.full(2, 0.5))

    def test_segment_sum_matches_loop(self):
        rng = np.random.default_rng(11)
        vals = rng.normal(size=(10, 4))
        seg = rng.integers(0, 5, size=10)
        out = nm.segment_sum(Tensor(vals), seg, 5).data
        expected = np.zeros((5, 4))
        for i, s in enumerate(seg):
            expected[s] += vals[i]
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_empty_segment_is_zero(self):
        seg = np.array([0, 0])
        out = nm.segment_sum(Tensor(np.ones((2, 2))), seg, 3).data
        np.testing.assert_array_equal(out[1], np.zeros(2))
        np.testing.assert_array_equal(out[2], np.zeros(2))


class TestGradCheckHarness:
    def test_quadratic(self):
        """f(x) = x.x at x=3 has gradient 6 and tiny relative error."""
        params = nm.Params()
        x = params.add("x", np.array([3.0]))
        report = nm.grad_check(lambda: nm.tsum(nm.mul(x, x)), params.items(), eps=1e-5, tol=1e-6)
        assert report.passed, report.summary()
        assert x.grad is not None and abs(x.grad[0] - 6.0) < 1e-12

    def test_linear_exact(self):
        params = nm.Params()
        x = params.add("x", np.array([1.0, -2.0, 0.5]))
        w = np.array([3.0, 1.0, -4.0])
        report = nm.grad_check(lambda: nm.tsum(nm.mul(x, Tensor(w))), params.items(), eps=1e-5, tol=1e-6)
        assert report.passed, report.summary()

    def test_bad_eps_rejected(self):
        params = nm.Params()
        x = params.add("x", np.array([1.0]))
        with pytest.raises(ValueError):
            nm.grad_check(lambda: nm.tsum(x), params.items(), eps=0.5)

    def test_nonfinite_loss_rejected(self):
        params = nm.Params()
        x = params.add("x", np.array([0.0]))

        def f():
            out = nm.tsum(x)
            out.data = np.array(np.inf)
            return out

        with pytest.raises(nm.NonFiniteError):
            nm.grad_check(f, params.items())


class TestParamsAndOptim:
    def test_registry_roundtrip(self):
        params = nm.Params()
        params.add("a.w", np.ones((2, 2)))
        params.add("a.b", np.zeros(2))
        state = params.state_dict()
        params["a.w"].data[:] = 5.0
        params.load_state_dict(state)
        np.testing.assert_array_equal(params["a.w"].data, np.ones((2, 2)))

    def test_duplicate_name_rejected(self):
        params = nm.Params()
        params.add("w", np.zeros(1))
        with pytest.raises(KeyError):
            params.add("w", np.zeros(1))

    def test_sgd_descends_quadratic(self):
        params = nm.Params()
        x = params.add("x", np.array([4.0]))
        opt = nm.SGD(params, lr=0.1)
        for _ in range(50):
            opt.zero_grad()
            loss = nm.tsum(nm.mul(x, x))
            loss.backward()
            opt.step()
        assert abs(x.data[0]) < 1e-3

    def test_adam_descends_quadratic(self):
        params = nm.Params()
        x = params.add("x", np.array([4.0]))
        opt = nm.Adam(params, lr=0.2)
        for _ in range(200):
            opt.zero_grad()
            loss = nm.tsum(nm.mul(x, x))
            loss.backward()
            opt.step()
        assert abs(x.data[0]) < 1e-2

    def test_uniform_init_bounds(self):
        rng = np.random.default_rng(0)
        w = nm.uniform_init(rng, (100, 3), fan_in=16)
        assert np.abs(w).max() <= 0.25
