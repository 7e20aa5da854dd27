import numpy as np
import pytest
from hypothesis import given, strategies as st

import gnnqaoa.grad as ag
from gnnqaoa.errors import BackwardError, NumericalError, ShapeError

# name -> (builder over tensors, input shapes, input sampler)
normal = lambda rng, s: rng.normal(size=s)
positive = lambda rng, s: rng.uniform(0.5, 2.0, size=s)

OPS = {
    "matmul": (lambda a, b: ag.matmul(a, b), [(2, 3), (3, 4)], normal),
    "matvec": (lambda a, b: a @ b, [(3, 4), (4,)], normal),
    "add_broadcast": (lambda a, b: ag.add(a, b), [(3, 4), (4,)], normal),
    "sub": (lambda a, b: ag.sub(a, b), [(3, 4), (3, 4)], normal),
    "rsub": (lambda a: 2.0 - a, [(5,)], normal),
    "mul": (lambda a, b: ag.mul(a, b), [(3, 4), (3, 1)], normal),
    "div": (lambda a, b: a / b, [(3, 4), (4,)], positive),
    "scale": (lambda a: ag.scale(a, -1.7), [(4, 2)], normal),
    "neg": (lambda a: ag.neg(a), [(4,)], normal),
    "relu": (lambda a: ag.relu(a), [(6, 3)], normal),
    "sigmoid": (lambda a: ag.sigmoid(a), [(6, 3)], normal),
    "tanh": (lambda a: ag.tanh(a), [(6, 3)], normal),
    "exp": (lambda a: ag.exp(a), [(6,)], normal),
    "log": (lambda a: ag.log(a), [(6,)], positive),
    "square": (lambda a: ag.square(a), [(2, 5)], normal),
    "clip": (lambda a: ag.clip(a, -0.5, 0.5), [(20,)], normal),
    "minimum": (lambda a, b: ag.minimum(a, b), [(8,), (8,)], normal),
    "softmax_rows": (lambda a: ag.softmax_rows(a), [(4, 3)], normal),
    "log_softmax_rows": (lambda a: ag.log_softmax_rows(a), [(4, 3)], normal),
    "transpose": (lambda a: ag.transpose(a), [(2, 5)], normal),
    "reshape": (lambda a: ag.reshape(a, (5, 2)), [(2, 5)], normal),
    "index": (lambda a: ag.index(a, (slice(None), [0, 2, 2])), [(3, 4)], normal),
    "sum_axis": (lambda a: ag.sum_(a, axis=0), [(3, 4)], normal),
    "mean": (lambda a: ag.mean(a, axis=1, keepdims=True), [(3, 4)], normal),
    "concat": (lambda a, b: ag.concat([a, b], axis=1), [(3, 2), (3, 4)], normal),
    "stack": (lambda a, b: ag.stack([a, b], axis=0), [(3, 2), (3, 2)], normal),
}


def numeric_check(name, seed, h=1e-5):
    build, shapes, sample = OPS[name]
    rng = np.random.default_rng(seed)
    arrays = [sample(rng, s) for s in shapes]
    probe = rng.normal(size=np.shape(build(*[ag.tensor(a) for a in arrays]).data))

    def f(*arrs):
        return float(np.sum(build(*[ag.tensor(a) for a in arrs]).data * probe))

    params = [ag.parameter(a.copy()) for a in arrays]
    loss = ag.sum_(ag.mul(build(*params), probe))
    ag.backward(loss)
    worst = 0.0
    for k, a in enumerate(arrays):
        fd = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            up, dn = [x.copy() for x in arrays], [x.copy() for x in arrays]
            up[k][idx] += h
            dn[k][idx] -= h
            fd[idx] = (f(*up) - f(*dn)) / (2 * h)
        err = np.linalg.norm(params[k].grad - fd) / max(np.linalg.norm(fd), 1e-8)
        worst = max(worst, err)
    return worst


@pytest.mark.parametrize("name", sorted(OPS))
def test_universal_gradient_check(name):
    errs = [numeric_check(name, seed) for seed in range(100)]
    assert max(errs) < 1e-5, f"{name}: worst rel err {max(errs):.2e}"


class TestExamples:
    def test_relu(self):
        assert np.array_equal(ag.relu(ag.tensor([-2.0, 0.0, 3.0])).data, [0, 0, 3])

    def test_softmax_equal(self):
        assert np.allclose(ag.softmax_rows(ag.tensor([[0.0, 0.0]])).data, [[0.5, 0.5]])

    def test_sum_xw(self):
        x = np.array([1.0, -2.0, 0.5])
        w = ag.parameter(np.array([0.3, 0.1, 0.2]))
        ag.backward(ag.sum_(ag.mul(ag.tensor(x), w)))
        assert np.array_equal(w.grad, x)

    def test_relu_matmul_fd(self):
        rng = np.random.default_rng(0)
        x, w0 = rng.normal(size=(4, 3)), rng.normal(size=(3, 2))
        w = ag.parameter(w0.copy())
        ag.backward(ag.sum_(ag.relu(ag.matmul(x, w))))
        fd = np.zeros_like(w0)
        for idx in np.ndindex(w0.shape):
            e = np.zeros_like(w0)
            e[idx] = 1e-5
            fd[idx] = (np.maximum(x @ (w0 + e), 0).sum() - np.maximum(x @ (w0 - e), 0).sum()) / 2e-5
        assert np.allclose(w.grad, fd, rtol=1e-6, atol=1e-9)

    def test_softmax_jacobian_rows(self):
        # d/dh_k of sum_j p_j is zero
        h = ag.parameter(np.random.default_rng(1).normal(size=(3, 4)))
        ag.backward(ag.sum_(ag.softmax_rows(h)))
        assert np.allclose(h.grad, 0, atol=1e-12)


class TestEngine:
    def test_shape_error_names_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            ag.matmul(ag.tensor(np.ones((2, 3))), ag.tensor(np.ones((2, 3))))

    def test_double_backward_is_error(self):
        w = ag.parameter(np.ones(3))
        loss = ag.sum_(ag.square(w))
        ag.backward(loss)
        with pytest.raises(BackwardError):
            ag.backward(loss)

    def test_non_scalar(self):
        with pytest.raises(BackwardError):
            ag.backward(ag.parameter(np.ones(3)) * 2.0)

    def test_detached_gets_no_grad(self):
        w = ag.parameter(np.ones(3))
        d = w.detach()
        ag.backward(ag.sum_(ag.mul(w, d)))
        assert d.grad is None and np.array_equal(w.grad, np.ones(3))

    def test_no_grad_context(self):
        w = ag.parameter(np.ones(2))
        with ag.no_grad():
            out = ag.square(w)
        assert not out.requires_grad

    def test_shared_subexpression_accumulates(self):
        w = ag.parameter(np.array([2.0]))
        y = ag.square(w)
        ag.backward(ag.sum_(ag.add(y, y)))
        assert w.grad[0] == pytest.approx(8.0)

    def test_custom_op(self):
        x = ag.parameter(np.array([0.3, -0.4]))
        out = ag.custom([x], np.sin(x.data), lambda g: (g * np.cos(x.data),), "sin")
        ag.backward(ag.sum_(out))
        assert np.allclose(x.grad, np.cos([0.3, -0.4]))

    @given(st.integers(0, 2**32 - 1))
    def test_deterministic(self, seed):
        def run():
            rng = np.random.default_rng(seed)
            w = ag.parameter(rng.normal(size=(4, 3)))
            x = ag.tensor(rng.normal(size=(5, 4)))
            ag.backward(ag.mean(ag.log_softmax_rows(ag.tanh(x @ w))))
            return w.grad

        assert np.array_equal(run(), run())


class TestTraining:
    def test_adam_minimises_quadratic(self):
        w = ag.parameter(np.array([3.0, -2.0]))
        opt = ag.Adam([w], lr=0.1)
        for _ in range(300):
            opt.zero_grad()
            ag.backward(ag.sum_(ag.square(w)))
            opt.step()
        assert np.linalg.norm(w.data) < 1e-2

    def test_clip_grad_norm(self):
        w = ag.parameter(np.zeros(2))
        w.grad = np.array([3.0, 4.0])
        norm, clipped = ag.clip_grad_norm([w], 1.0)
        assert norm == 5.0 and clipped and np.allclose(np.linalg.norm(w.grad), 1.0)

    def test_clip_rejects_nan(self):
        w = ag.parameter(np.zeros(1))
        w.grad = np.array([np.nan])
        with pytest.raises(NumericalError):
            ag.clip_grad_norm([w], 1.0)

    def test_checkpoint_round_trip(self, tmp_path):
        tensors = {"a": ag.parameter(np.arange(6.0).reshape(2, 3)), "b": np.ones(4)}
        ag.save_tensors(tmp_path / "c.npz", tensors, {"arch": "x"})
        arrays, meta = ag.load_tensors(tmp_path / "c.npz")
        assert np.array_equal(arrays["a"], tensors["a"].data) and np.array_equal(arrays["b"], np.ones(4))
        assert meta["arch"] == "x"

    def test_checkpoint_rejects_foreign(self, tmp_path):
        np.savez(tmp_path / "x.npz", a=np.ones(2))
        with pytest.raises(ValueError):
            ag.load_tensors(tmp_path / "x.npz")
