# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import base64
import hashlib
from pathlib import PurePath
from typing import Any, Sequence

import numpy as np
import orjson
import yaml
from pydantic import BaseModel

from cclb.core.exception import DimensionError

_ORJSON_OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SORT_KEYS


def generate_id(input_string: str | bytes) -> str:
    """
    Generates a unique ID based on the SHA-256 hash of the input, encoded in a URL-safe base64 format.

    Args:
        input_string (str | bytes): The input to be hashed and encoded.

    Returns:
        str: A URL-safe base64 encoded string representing the SHA-256 hash of the input.
    """
    data = input_string.encode() if isinstance(input_string, str) else input_string
    hash_bytes = hashlib.sha256(data).digest()
    return base64.urlsafe_b64encode(hash_bytes).decode()


def _default(obj: Any) -> Any:
    if isinstance(obj, PurePath):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> bytes:
    """Serialize to JSON bytes with sorted keys; numpy arrays become nested lists, paths strings."""
    return orjson.dumps(obj, default=_default, option=_ORJSON_OPTIONS)


def problem_id(**parts: Any) -> str:
    """Content id of a numerical problem, stable across processes."""
    return generate_id(dumps(parts))


def pydantic_to_yaml(pydantic_obj: BaseModel) -> str:
    """
    Converts a Pydantic object to a YAML-formatted string without brackets or quotes.

    Numpy arrays held by the model are rendered as plain lists.

    Args:
        pydantic_obj (BaseModel): The Pydantic object to convert.

    Returns:
        str: A YAML-formatted string representing the Pydantic object.
    """
    if not isinstance(pydantic_obj, BaseModel):
        raise ValueError("Input must be a Pydantic BaseModel object.")

    # orjson flattens ndarrays; yaml then renders plain python data
    data = orjson.loads(dumps(pydantic_obj.model_dump()))

    return yaml.dump(data, sort_keys=False, default_flow_style=False)


def as_vector(
    value: Sequence[float] | np.ndarray, dim: int | None = None, name: str = "vector"
) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"{name} has {arr.shape[0]} entries, expected {dim}")
    return arr


def as_matrix(
    value: Sequence[Sequence[float]] | np.ndarray,
    cols: int | None = None,
    name: str = "matrix",
) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if cols is not None and arr.shape[1] != cols:
        raise DimensionError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    return arr
