from dataclasses import dataclass

import numpy as np

from app.engine.autodiff import Tensor, affine, mul, scale, shift, sigmoid, tanh
from app.engine.nn.init import orthogonal_init
from app.engine.nn.params import ParamStore
from app.engine.utils.exceptions import DimensionError


@dataclass
class GruParams:
    """
    Parameters of a single-layer GRU cell.

    Attributes:
    - w_r, w_g, w_c (Tensor): Input-to-hidden weights (hidden, input) of the reset, update and candidate gates.
    - u_r, u_g, u_c (Tensor): Hidden-to-hidden weights (hidden, hidden).
    - b_r, b_g, b_c (Tensor): Gate biases (hidden,).
    """
    w_r: Tensor
    w_g: Tensor
    w_c: Tensor
    u_r: Tensor
    u_g: Tensor
    u_c: Tensor
    b_r: Tensor
    b_g: Tensor
    b_c: Tensor

    @property
    def hidden_size(self) -> int:
        return self.u_r.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_r.shape[1]

    @classmethod
    def create(
            cls,
            store: ParamStore,
            prefix: str,
            input_size: int,
            hidden_size: int,
            rng: np.random.Generator,
    ) -> "GruParams":
        """
        Register orthogonally initialized GRU weights and zero biases in a store.

        :param store: The parameter store.
        :param prefix: Name prefix, e.g. "gru_z".
        :param input_size: Width of the input vector.
        :param hidden_size: Width of the hidden state.
        :param rng: Seeded generator.
        :return: The GRU parameters.
        """
        tensors = {}
        for gate in ("r", "g", "c"):
            tensors[f"w_{gate}"] = store.register(f"{prefix}.w_{gate}", orthogonal_init(hidden_size, input_size, rng))
            tensors[f"u_{gate}"] = store.register(f"{prefix}.u_{gate}", orthogonal_init(hidden_size, hidden_size, rng))
            tensors[f"b_{gate}"] = store.register(f"{prefix}.b_{gate}", np.zeros(hidden_size))
        return cls(**tensors)


def gru_step(p: GruParams, h_prev: Tensor, x: Tensor) -> Tensor:
    """
    Advance a GRU by one step.

    r = σ(W_r x + U_r h + b_r), g = σ(W_g x + U_g h + b_g), c = tanh(W_c x + U_c (r∘h) + b_c),
    h' = (1 − g)∘h + g∘c. Works on single vectors and on batches of row vectors.

    :param p: GRU parameters.
    :param h_prev: Previous hidden state, (hidden,) or (batch, hidden).
    :param x: Input, (input,) or (batch, input).
    :return: New hidden state with the shape of h_prev.
    """
    if x.shape[-1] != p.input_size or h_prev.shape[-1] != p.hidden_size or x.shape[:-1] != h_prev.shape[:-1]:
        raise DimensionError(
            f"gru_step: input {x.shape} / state {h_prev.shape} do not conform to "
            f"input size {p.input_size}, hidden size {p.hidden_size}"
        )
    r = sigmoid(affine(x, p.w_r, p.b_r) + affine(h_prev, p.u_r))
    g = sigmoid(affine(x, p.w_g, p.b_g) + affine(h_prev, p.u_g))
    c = tanh(affine(x, p.w_c, p.b_c) + affine(mul(r, h_prev), p.u_c))
    return mul(shift(scale(g, -1.0), 1.0), h_prev) + mul(g, c)
