"""Checkpoint format: a key=value manifest plus a raw little-endian blob.

save_checkpoint(params, prefix) writes `<prefix>.manifest` (text) and
`<prefix>.blob` (concatenated little-endian float bytes). 64-bit round
trips are bit-exact.
"""
from __future__ import annotations

import os
from typing import Optional

import numpy as np

from .params import ParamSet
from .tensor import Tensor

_DTYPE_CODES = {"float64": "<f8", "float32": "<f4"}


class CheckpointError(ValueError):
    """Malformed manifest or blob."""


def manifest_path(prefix: str) -> str:
    return prefix + ".manifest"


def blob_path(prefix: str) -> str:
    return prefix + ".blob"


def save_checkpoint(params: ParamSet, prefix: str,
                    metadata: Optional[dict[str, str]] = None) -> None:
    names = params.names()
    if not names:
        raise CheckpointError("refusing to save an empty parameter set")
    dtype = params[names[0]].data.dtype
    for name in names:
        if params[name].data.dtype != dtype:
            raise CheckpointError(f"mixed dtypes: {name} is {params[name].data.dtype}")
    code = _DTYPE_CODES[str(dtype)]

    lines = ["format=1", f"dtype={dtype}", f"count={len(names)}"]
    for key in sorted(metadata or {}):
        value = str((metadata or {})[key])
        if "\n" in value:
            raise CheckpointError(f"metadata value for {key!r} contains a newline")
        lines.append(f"meta.{key}={value}")
    chunks = []
    offset = 0
    for i, name in enumerate(names):
        arr = params[name].data
        shape = ",".join(str(d) for d in arr.shape)
        lines.append(f"tensor.{i}.name={name}")
        lines.append(f"tensor.{i}.shape={shape}")
        lines.append(f"tensor.{i}.offset={offset}")
        raw = np.ascontiguousarray(arr, dtype=code).tobytes()
        chunks.append(raw)
        offset += len(raw)

    with open(manifest_path(prefix), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(blob_path(prefix), "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(prefix: str) -> tuple[ParamSet, dict[str, str]]:
    mp, bp = manifest_path(prefix), blob_path(prefix)
    if not os.path.exists(mp) or not os.path.exists(bp):
        raise FileNotFoundError(f"checkpoint {prefix!r} not found")
    fields: dict[str, str] = {}
    with open(mp, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if "=" not in line:
                raise CheckpointError(f"malformed manifest line: {line!r}")
            key, value = line.split("=", 1)
            fields[key] = value
    if fields.get("format") != "1":
        raise CheckpointError(f"unsupported checkpoint format {fields.get('format')!r}")
    dtype = fields.get("dtype")
    if dtype not in _DTYPE_CODES:
        raise CheckpointError(f"unsupported dtype {dtype!r}")
    code = _DTYPE_CODES[dtype]
    itemsize = np.dtype(code).itemsize
    count = int(fields["count"])

    blob = open(bp, "rb").read()
    params = ParamSet()
    for i in range(count):
        try:
            name = fields[f"tensor.{i}.name"]
            shape_s = fields[f"tensor.{i}.shape"]
            offset = int(fields[f"tensor.{i}.offset"])
        except KeyError as exc:
            raise CheckpointError(f"manifest missing entry for tensor {i}: {exc}")
        shape = tuple(int(d) for d in shape_s.split(",")) if shape_s else ()
        n = int(np.prod(shape)) if shape else 1
        end = offset + n * itemsize
        if end > len(blob):
            raise CheckpointError(f"blob too short for tensor {name!r}")
        arr = np.frombuffer(blob[offset:end], dtype=code).reshape(shape).copy()
        params.add(name, Tensor(arr, requires_grad=True))

    metadata = {k[len("meta."):]: v for k, v in fields.items() if k.startswith("meta.")}
    return params, metadata
