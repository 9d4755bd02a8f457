from dataclasses import dataclass

import numpy as np

from app.engine.autodiff import Tensor, affine, relu
from app.engine.nn.init import glorot_uniform
from app.engine.nn.params import ParamStore
from app.engine.utils.exceptions import DimensionError


@dataclass
class AffineLayer:
    weight: Tensor
    bias: Tensor

    @property
    def skip(self) -> bool:
        # Identity shortcut only where the layer keeps the width
        out_width, in_width = self.weight.shape
        return out_width == in_width


@dataclass
class MlpParams:
    """
    Fully connected network with ReLU hidden layers, identity skips and a linear output layer.

    Attributes:
    - layers (list[AffineLayer]): Hidden layers followed by the output layer.
    """
    layers: list[AffineLayer]

    @property
    def in_width(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_width(self) -> int:
        return self.layers[-1].weight.shape[0]

    @classmethod
    def create(
            cls,
            store: ParamStore,
            prefix: str,
            in_width: int,
            out_width: int,
            rng: np.random.Generator,
            hidden_layers: int = 3,
            min_width: int = 50,
    ) -> "MlpParams":
        """
        Register an MLP whose hidden width is max(in_width, min_width).

        :param store: The parameter store.
        :param prefix: Name prefix, e.g. "mlp_z".
        :param in_width: Input feature count.
        :param out_width: Output width.
        :param rng: Seeded generator.
        :param hidden_layers: Number of hidden layers.
        :param min_width: Lower bound on the hidden width.
        :return: The MLP parameters.
        """
        width = max(in_width, min_width)
        widths = [in_width] + [width] * hidden_layers + [out_width]
        layers = []
        for index, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            weight = store.register(f"{prefix}.{index}.weight", glorot_uniform(fan_out, fan_in, rng))
            bias = store.register(f"{prefix}.{index}.bias", np.zeros(fan_out))
            layers.append(AffineLayer(weight, bias))
        return cls(layers)


def mlp_forward(p: MlpParams, x: Tensor) -> Tensor:
    """
    Evaluate the MLP on a vector or a batch of row vectors.

    :param p: MLP parameters.
    :param x: Input, (in,) or (batch, in).
    :return: Output, (out,) or (batch, out).
    """
    if x.shape[-1] != p.in_width:
        raise DimensionError(f"mlp_forward: input width {x.shape[-1]} != {p.in_width}")
    h = x
    for layer in p.layers[:-1]:
        out = relu(affine(h, layer.weight, layer.bias))
        h = out + h if layer.skip else out
    last = p.layers[-1]
    return affine(h, last.weight, last.bias)
