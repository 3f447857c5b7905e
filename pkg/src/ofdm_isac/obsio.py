"""Binary observation-file format.

Layout (all little-endian): magic "ISAC", version u32, then P, M, N as u32,
noise variance as f64, followed by P*M*N complex64 samples in antenna-major,
symbol-middle, subcarrier-minor order.
"""

from __future__ import annotations

import struct

import numpy as np

from .model import ObservationTensor

MAGIC = b"ISAC"
VERSION = 1
_HEADER = struct.Struct("<4sIIIId")


def write_observation(path, obs: ObservationTensor) -> None:
    p, m, n = obs.shape
    header = _HEADER.pack(MAGIC, VERSION, p, m, n, float(obs.noise_var))
    payload = np.ascontiguousarray(obs.data, dtype="<c8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_observation(path) -> ObservationTensor:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, p, m, n, noise_var = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        count = p * m * n
        data = np.frombuffer(fh.read(count * 8), dtype="<c8")
        if data.size != count:
            raise ValueError(f"{path}: truncated payload")
    data = data.astype(np.complex128).reshape(p, m, n)
    return ObservationTensor(data=data, noise_var=noise_var)
