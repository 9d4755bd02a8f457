from .tensor import (
    TapeNode,
    Tensor,
    add,
    affine,
    as_tensor,
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

__all__ = [
    "TapeNode",
    "Tensor",
    "add",
    "affine",
    "as_tensor",
    "backward",
    "clip",
    "concat",
    "exp",
    "forward_op",
    "is_grad_enabled",
    "log",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "relu",
    "scale",
    "shift",
    "sigmoid",
    "slice_last",
    "square",
    "sub",
    "sum_",
    "tanh",
    "transpose",
]
