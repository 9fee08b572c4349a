"""Versioned binary container for trained models.

Layout (all integers little-endian)::

    magic      8 bytes   b"CRSLMDL\\x00"
    version    u32       FORMAT_VERSION
    tag        u32 n + n bytes UTF-8 algorithm tag
    params     u32 n + n bytes UTF-8 JSON, sorted keys
    count      u32       number of payloads
    payload*   name (u32 n + UTF-8), kind u8, body

    kind 0 (dense):  ndim u32, ndim x u64 dims, float64 LE data, C order
    kind 1 (CSR):    rows u64, cols u64, nnz u64,
                     (rows+1) x int64 indptr, nnz x int64 indices, nnz x float64 data

The training matrix is stored as payload ``train`` so a loaded model can
score and exclude seen items without the original split.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..core import InteractionMatrix
from .base import Recommender

MAGIC = b"CRSLMDL\x00"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _write_str(f, s: str) -> None:
    b = s.encode("utf-8")
    f.write(struct.pack("<I", len(b)))
    f.write(b)


def _read_exact(f, n: int) -> bytes:
    b = f.read(n)
    if len(b) != n:
        raise ModelFormatError("truncated model file")
    return b


def _read_str(f) -> str:
    (n,) = struct.unpack("<I", _read_exact(f, 4))
    return _read_exact(f, n).decode("utf-8")


def _write_payload(f, name: str, value) -> None:
    _write_str(f, name)
    if sp.issparse(value):
        m = sp.csr_matrix(value, dtype=np.float64)
        m.sort_indices()
        f.write(struct.pack("<BQQQ", 1, m.shape[0], m.shape[1], m.nnz))
        f.write(m.indptr.astype("<i8").tobytes())
        f.write(m.indices.astype("<i8").tobytes())
        f.write(m.data.astype("<f8").tobytes())
    else:
        a = np.ascontiguousarray(value, dtype="<f8")
        f.write(struct.pack("<BI", 0, a.ndim))
        f.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        f.write(a.tobytes())


def _read_payload(f):
    name = _read_str(f)
    (kind,) = struct.unpack("<B", _read_exact(f, 1))
    if kind == 1:
        rows, cols, nnz = struct.unpack("<QQQ", _read_exact(f, 24))
        indptr = np.frombuffer(_read_exact(f, 8 * (rows + 1)), dtype="<i8")
        indices = np.frombuffer(_read_exact(f, 8 * nnz), dtype="<i8")
        data = np.frombuffer(_read_exact(f, 8 * nnz), dtype="<f8")
        return name, sp.csr_matrix((data.astype(np.float64), indices.astype(np.int64), indptr.astype(np.int64)),
                                   shape=(rows, cols))
    if kind == 0:
        (ndim,) = struct.unpack("<I", _read_exact(f, 4))
        shape = struct.unpack(f"<{ndim}Q", _read_exact(f, 8 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(_read_exact(f, 8 * count), dtype="<f8")
        return name, data.astype(np.float64).reshape(shape)
    raise ModelFormatError(f"unknown payload kind {kind} for {name!r}")


def dumps_model(model: Recommender) -> bytes:
    if model.train is None:
        raise ValueError("only trained models can be saved")
    payloads = dict(model.state())
    payloads["train"] = model.train.matrix
    f = io.BytesIO()
    f.write(MAGIC)
    f.write(struct.pack("<I", FORMAT_VERSION))
    _write_str(f, model.tag)
    _write_str(f, json.dumps(model.params, sort_keys=True))
    f.write(struct.pack("<I", len(payloads)))
    for name in sorted(payloads):
        _write_payload(f, name, payloads[name])
    return f.getvalue()


def loads_model(blob: bytes) -> Recommender:
    from . import ALGORITHMS

    f = io.BytesIO(blob)
    if f.read(len(MAGIC)) != MAGIC:
        raise ModelFormatError("not a model container (bad magic)")
    (version,) = struct.unpack("<I", _read_exact(f, 4))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    tag = _read_str(f)
    if tag not in ALGORITHMS:
        raise ModelFormatError(f"unknown algorithm tag {tag!r}")
    params = json.loads(_read_str(f))
    (count,) = struct.unpack("<I", _read_exact(f, 4))
    payloads = dict(_read_payload(f) for _ in range(count))
    if f.read(1):
        raise ModelFormatError("trailing bytes after last payload")
    model = ALGORITHMS[tag](**params)
    model.train = InteractionMatrix(payloads.pop("train"))
    model.load_state(payloads)
    return model


def save_model(model: Recommender, path) -> None:
    Path(path).write_bytes(dumps_model(model))


def load_model(path) -> Recommender:
    return loads_model(Path(path).read_bytes())
