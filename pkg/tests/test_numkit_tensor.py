import numpy as np
import pytest

from touchproto import numkit as nk
from touchproto.numkit import tensor as T


def test_add_mul_backward_hand_checked():
    # loss = sum((a + b) * a) -> dL/da = 2a + b, dL/db = a
    a = nk.parameter(np.array([1.0, -2.0, 3.0]))
    b = nk.parameter(np.array([0.5, 0.5, 0.5]))
    loss = T.tsum(T.mul(T.add(a, b), a))
    T.backward(loss)
    np.testing.assert_allclose(a.grad, 2 * a.data + b.data)
    np.testing.assert_allclose(b.grad, a.data)


def test_matmul_weight_gradient_rows_equal_input():
    # loss = sum(W @ x), x = [1, 2]: every row gradient is x
    w = nk.parameter(np.zeros((3, 2)))
    x = T.constant(np.array([[1.0], [2.0]]))
    loss = T.tsum(T.matmul(w, x))
    T.backward(loss)
    np.testing.assert_allclose(w.grad, np.tile([1.0, 2.0], (3, 1)))


def test_constant_loss_gives_zero_gradient_for_unreachable_param():
    ps = nk.ParamSet(seed=0)
    used = ps.add("used", np.array([2.0]))
    unused = ps.add("unused", np.array([5.0]))
    grads = nk.backward(T.tsum(T.square(used)), ps)
    np.testing.assert_allclose(grads["used"], [4.0])
    np.testing.assert_allclose(grads["unused"], [0.0])


def test_tanh_gradient_at_zero_is_one():
    x = nk.parameter(np.array([0.0]))
    T.backward(T.tsum(T.tanh(x)))
    np.testing.assert_allclose(x.grad, [1.0])


def test_backward_rejects_non_scalar_loss():
    x = nk.parameter(np.array([1.0, 2.0]))
    with pytest.raises(nk.ContractError):
        T.backward(T.square(x))


def test_matmul_shape_mismatch_raises():
    with pytest.raises(nk.ShapeError):
        T.matmul(T.constant(np.ones((2, 3))), T.constant(np.ones((2, 3))))


def test_layer_norm_example():
    y = T.layer_norm(T.constant(np.array([1.0, 3.0])))
    np.testing.assert_allclose(y.data, [-1.0, 1.0], atol=1e-5)


def test_clip_blocks_gradient_outside_range():
    x = nk.parameter(np.array([-2.0, 0.5, 2.0]))
    T.backward(T.tsum(T.clip(x, -1.0, 1.0)))
    np.testing.assert_allclose(x.grad, [0.0, 1.0, 0.0])


def test_no_grad_disables_taping():
    x = nk.parameter(np.array([1.0]))
    with nk.no_grad():
        y = T.square(x)
    assert y.requires_grad is False and y._parents == ()


def test_forward_backward_deterministic():
    def run():
        rng = np.random.default_rng(7)
        ps = nk.ParamSet(seed=7)
        nk.init_fc(ps, "l", 4, 4, rng, dtype=np.float64)
        x = np.random.default_rng(1).normal(size=(3, 4))
        loss = T.tsum(T.square(nk.forward_fc(T.constant(x), ps.slice("l"),
                                             normalize=True, activation="relu")))
        grads = nk.backward(loss, ps)
        return loss.item(), grads["l/weight"].copy()

    l1, g1 = run()
    l2, g2 = run()
    assert l1 == l2
    assert np.array_equal(g1, g2)
