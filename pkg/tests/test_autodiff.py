import numpy as np
import pytest

from app.engine.autodiff import (
    Tensor,
    add,
    affine,
    backward,
    clip,
    concat,
    exp,
    forward_op,
    is_grad_enabled,
    log,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    scale,
    shift,
    sigmoid,
    slice_last,
    square,
    sub,
    sum_,
    tanh,
    transpose,
)
from app.engine.utils.exceptions import ContractError, DimensionError, NumericError
from tests.helpers import leaf, numeric_grad


def test_matmul_example():
    out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
    np.testing.assert_array_equal(out.values, [[3.0], [7.0]])


def test_sigmoid_of_zero():
    np.testing.assert_array_equal(sigmoid(Tensor(np.zeros(2))).values, [0.5, 0.5])


def test_concat_shape():
    assert concat(Tensor(np.ones(3)), Tensor(np.ones(2))).shape == (5,)


def test_grad_of_sum_of_squares():
    x = leaf([1.0, 2.0, 3.0])
    backward(sum_(mul(x, x)))
    np.testing.assert_array_equal(x.grad, [2.0, 4.0, 6.0])


def test_grad_of_sigmoid_at_zero():
    w = leaf(0.0, "w")
    backward(sigmoid(w))
    assert w.grad == pytest.approx(0.25)


# Each case maps one leaf to a scalar through the op under test
UNARY_CASES = {
    "sigmoid": (lambda x: sigmoid(x), lambda r: r.normal(size=(3, 4))),
    "tanh": (lambda x: tanh(x), lambda r: r.normal(size=(3, 4))),
    "relu": (lambda x: relu(x), lambda r: r.choice([-1.0, 1.0], size=(3, 4)) * r.uniform(0.2, 2.0, size=(3, 4))),
    "exp": (lambda x: exp(x), lambda r: r.normal(size=(5,))),
    "log": (lambda x: log(x), lambda r: r.uniform(0.5, 3.0, size=(5,))),
    "square": (lambda x: square(x), lambda r: r.normal(size=(2, 3))),
    "scale": (lambda x: scale(x, -2.5), lambda r: r.normal(size=(4,))),
    "shift": (lambda x: shift(x, 0.75), lambda r: r.normal(size=(4,))),
    "clip": (lambda x: clip(x, -1.0, 1.0), lambda r: r.uniform(-3.0, 3.0, size=(6,))),
    "slice": (lambda x: slice_last(x, 1, 3), lambda r: r.normal(size=(3, 4))),
    "transpose": (lambda x: transpose(x), lambda r: r.normal(size=(2, 3))),
    "sum_axis": (lambda x: sum_(x, axis=0), lambda r: r.normal(size=(3, 4))),
    "mean_axis": (lambda x: mean(x, axis=-1), lambda r: r.normal(size=(3, 4))),
}


@pytest.mark.parametrize("kind", sorted(UNARY_CASES))
def test_unary_gradients_match_finite_differences(kind, rng):
    op, draw = UNARY_CASES[kind]
    values = draw(rng)
    # A random readout turns the op output into a scalar with a non-trivial gradient
    readout = rng.normal(size=op(Tensor(values)).shape)

    def loss_of(array):
        return sum_(mul(op(Tensor(array)), Tensor(readout))).item()

    x = leaf(values)
    backward(sum_(mul(op(x), Tensor(readout))))
    np.testing.assert_allclose(x.grad, numeric_grad(loss_of, values), rtol=1e-4, atol=1e-8)


BINARY_CASES = {
    "add": (add, (3, 2), (3, 2)),
    "add_bias_row": (add, (3, 2), (2,)),
    "sub": (sub, (4,), (4,)),
    "sub_bias_row": (sub, (2, 3), (3,)),
    "mul": (mul, (2, 3), (2, 3)),
    "matmul": (matmul, (2, 3), (3, 4)),
    "matmul_vector": (matmul, (3,), (3, 2)),
    "concat": (concat, (2, 3), (2, 1)),
    "affine": (lambda x, w: affine(x, w), (4, 3), (2, 3)),
}


@pytest.mark.parametrize("kind", sorted(BINARY_CASES))
def test_binary_gradients_match_finite_differences(kind, rng):
    op, shape_a, shape_b = BINARY_CASES[kind]
    a_values, b_values = rng.normal(size=shape_a), rng.normal(size=shape_b)
    readout = rng.normal(size=op(Tensor(a_values), Tensor(b_values)).shape)

    def loss(a, b):
        return sum_(mul(op(a, b), Tensor(readout)))

    a, b = leaf(a_values, "a"), leaf(b_values, "b")
    backward(loss(a, b))
    np.testing.assert_allclose(
        a.grad, numeric_grad(lambda v: loss(Tensor(v), Tensor(b_values)).item(), a_values), rtol=1e-4, atol=1e-8,
    )
    np.testing.assert_allclose(
        b.grad, numeric_grad(lambda v: loss(Tensor(a_values), Tensor(v)).item(), b_values), rtol=1e-4, atol=1e-8,
    )


def test_affine_with_bias_gradient(rng):
    x, w, b = rng.normal(size=(5, 3)), rng.normal(size=(2, 3)), rng.normal(size=2)
    bias = leaf(b, "b")
    backward(sum_(square(affine(Tensor(x), Tensor(w), bias))))
    expected = numeric_grad(lambda v: sum_(square(affine(Tensor(x), Tensor(w), Tensor(v)))).item(), b)
    np.testing.assert_allclose(bias.grad, expected, rtol=1e-4, atol=1e-8)


def test_composition_gradient(rng):
    w1, w2 = rng.normal(size=(4, 3)), rng.normal(size=(1, 4))
    x_values = rng.normal(size=(2, 3))

    def loss(x):
        hidden = tanh(affine(x, Tensor(w1)))
        return mean(exp(scale(affine(hidden, Tensor(w2)), 0.3)))

    x = leaf(x_values)
    backward(loss(x))
    np.testing.assert_allclose(
        x.grad, numeric_grad(lambda v: loss(Tensor(v)).item(), x_values), rtol=1e-4, atol=1e-8,
    )


def test_independent_graphs_accumulate():
    x = leaf([1.0, -2.0])
    backward(sum_(square(x)) + sum_(scale(x, 3.0)))
    np.testing.assert_array_equal(x.grad, [5.0, -1.0])
    backward(sum_(scale(x, 2.0)))
    np.testing.assert_array_equal(x.grad, [7.0, 1.0])


def test_shared_subexpression_accumulates():
    x = leaf(2.0)
    y = square(x)
    backward(y + y)
    assert x.grad == pytest.approx(8.0)


def test_backward_releases_graph():
    x = leaf([1.0, 2.0])
    loss = sum_(square(x))
    backward(loss)
    with pytest.raises(ContractError):
        backward(loss)


def test_backward_needs_scalar():
    with pytest.raises(ContractError):
        backward(square(leaf([1.0, 2.0])))


def test_no_grad_records_nothing():
    x = leaf([1.0, 2.0])
    with no_grad():
        assert not is_grad_enabled()
        y = sum_(square(x))
    assert is_grad_enabled()
    assert y.node is None and not y.requires_grad
    with pytest.raises(ContractError):
        backward(y)


def test_detach_stops_gradient():
    x = leaf(3.0)
    backward(mul(x, x.detach()))
    assert x.grad == pytest.approx(3.0)


@pytest.mark.parametrize("make", [
    lambda: log(Tensor([0.0, 1.0])),
    lambda: exp(Tensor([1000.0])),
])
def test_non_finite_forward_raises(make):
    with pytest.raises(NumericError):
        make()


@pytest.mark.parametrize("make", [
    lambda: add(Tensor(np.ones(2)), Tensor(np.ones(3))),
    lambda: mul(Tensor(np.ones((2, 2))), Tensor(np.ones(2))),
    lambda: matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3)))),
    lambda: concat(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 3)))),
    lambda: slice_last(Tensor(np.ones(3)), 2, 5),
])
def test_shape_mismatch_raises(make):
    with pytest.raises(DimensionError):
        make()


def test_unknown_kind():
    with pytest.raises(ContractError):
        forward_op("softmax", Tensor(np.ones(2)))


def test_tensors_are_at_most_2d():
    with pytest.raises(DimensionError):
        Tensor(np.ones((2, 2, 2)))


def test_forward_is_deterministic(rng):
    x, w = rng.normal(size=(3, 4)), rng.normal(size=(2, 4))
    first = sigmoid(affine(Tensor(x), Tensor(w))).values
    second = sigmoid(affine(Tensor(x), Tensor(w))).values
    assert first.tobytes() == second.tobytes()
