"""NTF v1 container: canonical JSON metadata plus named float64 tensors.

Layout (integers little-endian):
    magic    b"FDNZ1\\0"
    u16      length of metadata JSON, then the UTF-8 JSON bytes
    u32      tensor count
    per tensor:
        u16 name length, UTF-8 name, u8 dtype (1 = f64), u8 ndim,
        ndim x u32 dims, little-endian f64 payload
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagic, TensorShapeCorrupt, TruncatedFile, UnsupportedVersion
from .layers import LayerSpec
from .model import ModelParams, infer_shapes

MAGIC = b"FDNZ1\x00"
DTYPE_F64 = 1


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def dumps_ntf(meta: dict, tensors: dict) -> bytes:
    js = canonical_json(meta)
    if len(js) > 0xFFFF:
        raise ValueError("metadata JSON exceeds 65535 bytes")
    out = [MAGIC, struct.pack("<H", len(js)), js, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        nb = name.encode()
        out.append(struct.pack("<H", len(nb)) + nb + struct.pack("<BB", DTYPE_F64, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def write_ntf(path, meta: dict, tensors: dict):
    Path(path).write_bytes(dumps_ntf(meta, tensors))


class _Reader:
    def __init__(self, buf, path):
        self.buf, self.path, self.pos = buf, path, 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise TruncatedFile(f"{self.path}: {what} truncated at offset {len(self.buf)} "
                                f"(needs {self.pos + n})")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk


def loads_ntf(buf: bytes, path="<bytes>"):
    r = _Reader(buf, path)
    head = buf[:len(MAGIC)]
    if len(head) < len(MAGIC) or head[:4] != MAGIC[:4] or head[5:6] != b"\x00":
        raise BadMagic(f"{path}: bad magic {head!r}")
    if head != MAGIC:
        raise UnsupportedVersion(f"{path}: container version {head[4:5]!r}, expected b'1'")
    r.pos = len(MAGIC)
    (jlen,) = struct.unpack("<H", r.take(2, "metadata length"))
    meta = json.loads(r.take(jlen, "metadata").decode())
    (count,) = struct.unpack("<I", r.take(4, "tensor count"))
    tensors = {}
    for i in range(count):
        (nlen,) = struct.unpack("<H", r.take(2, f"tensor #{i} name length"))
        name = r.take(nlen, f"tensor #{i} name").decode()
        dtype, ndim = struct.unpack("<BB", r.take(2, f"tensor '{name}' header"))
        if dtype != DTYPE_F64:
            raise TensorShapeCorrupt(f"{path}: tensor '{name}' has dtype code {dtype}")
        dims = struct.unpack(f"<{ndim}I", r.take(4 * ndim, f"tensor '{name}' dims"))
        size = int(np.prod(dims, dtype=np.int64))
        payload = r.take(8 * size, f"tensor '{name}' payload")
        tensors[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    if r.pos != len(buf):
        raise TensorShapeCorrupt(f"{path}: {len(buf) - r.pos} trailing bytes after last tensor")
    return meta, tensors


def read_ntf(path):
    return loads_ntf(Path(path).read_bytes(), path)


def model_meta(model: ModelParams) -> dict:
    meta = dict(model.meta)
    meta.update(
        kind="model",
        layers=[l.to_dict() for l in model.layers],
        input_shape=list(model.input_shape),
        seed=model.seed,
    )
    return meta


def save_checkpoint(model: ModelParams, path, extra_tensors=None):
    tensors = dict(model.tensors)
    tensors.update(extra_tensors or {})
    write_ntf(path, model_meta(model), tensors)


def model_from_ntf(meta, tensors, path="<bytes>") -> ModelParams:
    layers = [LayerSpec.from_dict(d) for d in meta["layers"]]
    infer_shapes(layers, meta["input_shape"])
    params = {}
    for spec in layers:
        for key, shape in spec.param_shapes().items():
            name = f"{spec.name}.{key}"
            if name not in tensors:
                raise TensorShapeCorrupt(f"{path}: missing tensor '{name}'")
            if tensors[name].shape != shape:
                raise TensorShapeCorrupt(f"{path}: tensor '{name}' has shape "
                                         f"{tensors[name].shape}, layer expects {shape}")
            params[name] = tensors[name]
    extra = {k: v for k, v in meta.items() if k not in ("kind", "layers", "input_shape", "seed")}
    return ModelParams(layers, params, tuple(meta["input_shape"]), meta["seed"], extra)


def load_checkpoint(path) -> ModelParams:
    meta, tensors = read_ntf(path)
    if meta.get("kind") != "model":
        raise TensorShapeCorrupt(f"{path}: container holds {meta.get('kind')!r}, not a model")
    return model_from_ntf(meta, tensors, path)
