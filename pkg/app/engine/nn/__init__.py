from .gru import GruParams, gru_step
from .init import glorot_uniform, orthogonal_init
from .mlp import AffineLayer, MlpParams, mlp_forward
from .params import ParamStore, dump_params, load_params, read_checkpoint

__all__ = [
    "AffineLayer",
    "GruParams",
    "MlpParams",
    "ParamStore",
    "dump_params",
    "glorot_uniform",
    "gru_step",
    "load_params",
    "mlp_forward",
    "orthogonal_init",
    "read_checkpoint",
]
