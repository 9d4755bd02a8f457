import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from app.engine.data.series import TimeSeries
from app.engine.utils.exceptions import ConfigError, DimensionError

logger = logging.getLogger(__name__)


class InputMode(str, Enum):
    EXCITATION = "excitation"
    SINUSOID = "sinusoid"


@dataclass(frozen=True)
class LinearGaussianSystem:
    """
    Two-state linear Gaussian system with a scalar input and a scalar observation.

        h_{t+1} = A h_t + B u_t + ε_h,   ε_h ~ N(0, process_noise_var · I)
        y_t     = C h_t + ε,             ε   ~ N(0, measurement_noise_var)
    """
    a: np.ndarray = field(default_factory=lambda: np.array([[0.7, 0.8], [0.0, 0.1]]))
    b: np.ndarray = field(default_factory=lambda: np.array([-1.0, 0.1]))
    c: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    process_noise_var: float = 0.5
    measurement_noise_var: float = 1.0
    excitation_bound: float = 2.5

    def __post_init__(self) -> None:
        if self.process_noise_var < 0 or self.measurement_noise_var < 0:
            raise ConfigError("Noise variances must be non-negative")

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]

    def provenance(self) -> dict[str, Any]:
        return {
            "A": self.a.tolist(),
            "B": self.b.tolist(),
            "C": self.c.tolist(),
            "process_noise_var": self.process_noise_var,
            "measurement_noise_var": self.measurement_noise_var,
            "excitation_bound": self.excitation_bound,
        }


def sinusoid_input(length: int) -> np.ndarray:
    """
    Test signal u_t = sin(2πt/10) + sin(2πt/25) over t = 0, …, length − 1.
    """
    t = np.arange(length, dtype=np.float64)
    return np.sin(2 * np.pi * t / 10) + np.sin(2 * np.pi * t / 25)


def excitation_input(length: int, rng: np.random.Generator, bound: float = 2.5) -> np.ndarray:
    return rng.uniform(-bound, bound, size=length)


def simulate_linear_gaussian(
        length: int,
        input_mode: InputMode | str = InputMode.EXCITATION,
        seed: int = 0,
        system: LinearGaussianSystem | None = None,
        initial_state: np.ndarray | None = None,
        inputs: np.ndarray | None = None,
) -> TimeSeries:
    """
    Simulate the linear Gaussian toy system from h_0 = 0.

    The generator draws the excitation input first, then the measurement noise and the process noise as whole
    blocks, so a seed fixes the series exactly.

    :param length: Number of steps T.
    :param input_mode: Excitation (uniform in ±2.5) or the sinusoid test signal.
    :param seed: Random seed.
    :param system: System matrices and noise levels, the standard toy system by default.
    :param initial_state: h_0, zeros by default.
    :param inputs: Explicit input signal of length T, overriding input_mode.
    :return: Series with the single input "u" and single output "y".
    """
    if length < 1:
        raise ConfigError(f"Series length must be at least 1, got {length}")
    system = system or LinearGaussianSystem()
    input_mode = InputMode(input_mode)
    rng = np.random.default_rng(seed)

    if inputs is not None:
        u = np.asarray(inputs, dtype=np.float64).reshape(-1)
        if u.shape[0] != length:
            raise DimensionError(f"Explicit inputs have {u.shape[0]} steps, expected {length}")
    elif input_mode == InputMode.EXCITATION:
        u = excitation_input(length, rng, system.excitation_bound)
    else:
        u = sinusoid_input(length)

    measurement_noise = np.sqrt(system.measurement_noise_var) * rng.standard_normal(length)
    process_noise = np.sqrt(system.process_noise_var) * rng.standard_normal((length, system.state_dim))

    h = np.zeros(system.state_dim) if initial_state is None else np.asarray(initial_state, dtype=np.float64)
    y = np.empty(length)
    for t in range(length):
        y[t] = system.c @ h + measurement_noise[t]
        h = system.a @ h + system.b * u[t] + process_noise[t]

    logger.info(f"Simulated linear Gaussian series: T={length}, input={input_mode.value}, seed={seed}")
    return TimeSeries(u[:, None], y[:, None], ["u"], ["y"], f"linear-gaussian-{input_mode.value}")
