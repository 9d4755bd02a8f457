import json
import logging
from typing import Any, Iterator

import numpy as np

from app.engine.autodiff import Tensor
from app.engine.utils.exceptions import ContractError, DataError, DimensionError

logger = logging.getLogger(__name__)

FORMAT = "vrnnaug-params"
VERSION = 1


class ParamStore:
    """
    Ordered registry of the named trainable tensors of a model.
    """

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}

    def register(self, name: str, values: np.ndarray) -> Tensor:
        """
        Add a trainable leaf tensor.

        :param name: Unique parameter name.
        :param values: Initial values.
        :return: The registered tensor.
        """
        if name in self._params:
            raise ContractError(f"Parameter {name!r} is already registered")
        tensor = Tensor(values, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._params.items())

    @property
    def size(self) -> int:
        return sum(p.values.size for p in self._params.values())

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: param.values.copy() for name, param in self._params.items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        """
        Overwrite parameter values from a snapshot taken with the same layout.

        :param snapshot: Mapping name -> values.
        """
        if list(snapshot) != list(self._params):
            raise ContractError("Snapshot layout does not match the parameter store")
        for name, values in snapshot.items():
            param = self._params[name]
            if values.shape != param.shape:
                raise DimensionError(f"{name}: snapshot shape {values.shape} != {param.shape}")
            param.values = values.copy()

    def to_records(self) -> list[dict[str, Any]]:
        return [
            {"name": name, "shape": list(param.shape), "values": param.values.ravel().tolist()}
            for name, param in self._params.items()
        ]

    def load_records(self, records: list[dict[str, Any]]) -> None:
        """
        Load ordered (name, shape, values) records into the already-built store.

        :param records: Records produced by to_records.
        """
        names = [record["name"] for record in records]
        if names != list(self._params):
            missing = set(self._params) ^ set(names)
            raise ContractError(f"Checkpoint parameters do not match the model: {sorted(missing) or names}")
        snapshot = {}
        for record in records:
            shape = tuple(record["shape"])
            values = np.asarray(record["values"], dtype=np.float64)
            if values.size != int(np.prod(shape)):
                raise DimensionError(f"{record['name']}: {values.size} values for shape {shape}")
            snapshot[record["name"]] = values.reshape(shape)
        self.restore(snapshot)


def dump_params(store: ParamStore, **metadata: Any) -> str:
    """
    Serialize a parameter store to checkpoint JSON.

    Floats are written with their exact repr, so dump -> load -> dump reproduces the same bytes.

    :param store: The parameter store.
    :param metadata: JSON-serializable entries stored next to the parameters.
    :return: JSON text.
    """
    return json.dumps({"format": FORMAT, "version": VERSION, **metadata, "params": store.to_records()})


def read_checkpoint(text: str) -> dict[str, Any]:
    """
    Parse checkpoint JSON and check its format marker.

    :param text: JSON text produced by dump_params.
    :return: The payload, metadata included.
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as ex:
        raise DataError(f"Checkpoint is not valid JSON: {ex}")
    if not isinstance(payload, dict) or payload.get("format") != FORMAT:
        raise DataError("Not a parameter checkpoint")
    return payload


def load_params(text: str | dict[str, Any], store: ParamStore) -> None:
    """
    Restore a parameter store from checkpoint JSON.

    :param text: JSON text produced by dump_params, or its parsed payload.
    :param store: A store with the same layout.
    """
    payload = read_checkpoint(text) if isinstance(text, str) else text
    store.load_records(payload["params"])
    logger.debug(f"Loaded {len(store)} parameter tensors")
