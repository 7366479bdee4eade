"""Bit-exact tensor container and run configuration.

Tensor files are a minimal self-describing little-endian binary format:

    offset  size  field
    0       8     magic  b"DYNAMO1\\0"
    8       4     version (u32, currently 1)
    12      4     dtype code (u32): 0=complex64 interleaved, 1=float32, 2=uint8
    16      4     rank (u32)
    20      8*r   dims (u64 each)
    ...           payload, first dimension fastest (x, then y, then t)

Round-trips are bit-exact for every supported dtype, which is what makes
the determinism acceptance checks meaningful across platforms.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
)

MAGIC = b"DYNAMO1\x00"
VERSION = 1

_DTYPE_BY_CODE = {
    0: np.dtype("<c8"),
    1: np.dtype("<f4"),
    2: np.dtype("u1"),
}
_CODE_BY_KIND = {
    np.dtype("complex64"): 0,
    np.dtype("float32"): 1,
    np.dtype("uint8"): 2,
}


def save_tensor(path, tensor: np.ndarray) -> None:
    """Write ``tensor`` to ``path`` in the container format.

    Only complex64, float32 and uint8 payloads are supported; cast
    explicitly before saving anything else so no precision is lost
    silently.
    """
    arr = np.asarray(tensor)
    code = _CODE_BY_KIND.get(arr.dtype)
    if code is None:
        raise UnsupportedDtypeError(
            f"cannot save dtype {arr.dtype}; supported: complex64, float32, uint8"
        )
    header = MAGIC + struct.pack(
        "<III", VERSION, code, arr.ndim
    ) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes(order="F"))


def load_tensor(path) -> np.ndarray:
    """Read a tensor file, returning an array with the stored dtype/dims."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:8] != MAGIC:
        raise BadMagicError(f"{path}: not a DYNAMO tensor file (bad magic)")
    if len(raw) < 20:
        raise TruncatedPayloadError(f"{path}: header truncated")
    version, code, rank = struct.unpack_from("<III", raw, 8)
    if version != VERSION:
        raise UnsupportedDtypeError(f"{path}: unsupported container version {version}")
    dtype = _DTYPE_BY_CODE.get(code)
    if dtype is None:
        raise UnsupportedDtypeError(f"{path}: unknown dtype code {code}")
    if len(raw) < 20 + 8 * rank:
        raise TruncatedPayloadError(f"{path}: dims truncated")
    dims = struct.unpack_from(f"<{rank}Q", raw, 20)
    payload = raw[20 + 8 * rank :]
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    expected = count * dtype.itemsize
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    flat = np.frombuffer(payload, dtype=dtype)
    return flat.reshape(dims, order="F")


_PRIORS = ("l1", "tv", "low_rank", "l1_tv", "lr_l1")


@dataclass(frozen=True)
class RunConfig:
    """All tunables of a reconstruction run.

    ``lam`` is serialized under the JSON key ``"lambda"``.
    """

    eta: float = 0.0          # image-prior weight
    tau: float = 0.0          # optical-flow constraint weight
    gamma: float = 0.0        # motion smoothness (TV) weight
    lam: float = 0.0          # motion-compensation weight
    prior: str = "l1"
    j_coarse: int = 5
    j_fine: int = 3
    sigma0: float = 1.0
    alpha: float = 0.5
    rho: float = 0.7
    ls_eps: float = 0.99
    stop_tol: float = 1e-4
    max_iters: int = 500
    spline_degree: int = 3
    seed: int = 0

    def __post_init__(self):
        for name in ("eta", "tau", "gamma", "lam"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and np.isfinite(v) and v >= 0):
                raise ConfigError(f"{_json_key(name)} must be a nonnegative real, got {v!r}")
        if self.prior not in _PRIORS:
            raise ConfigError(f"prior must be one of {_PRIORS}, got {self.prior!r}")
        if not (isinstance(self.j_fine, int) and isinstance(self.j_coarse, int)):
            raise ConfigError("j_coarse and j_fine must be integers")
        if not (self.j_coarse >= self.j_fine >= 0):
            raise ConfigError(
                f"need j_coarse >= j_fine >= 0, got {self.j_coarse}, {self.j_fine}"
            )
        if not self.sigma0 > 0:
            raise ConfigError(f"sigma0 must be positive, got {self.sigma0!r}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha!r}")
        if not 0 < self.rho < 1:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho!r}")
        if not 0 < self.ls_eps < 1:
            raise ConfigError(f"ls_eps must lie in (0, 1), got {self.ls_eps!r}")
        if not self.stop_tol > 0:
            raise ConfigError(f"stop_tol must be positive, got {self.stop_tol!r}")
        if not (isinstance(self.max_iters, int) and self.max_iters >= 1):
            raise ConfigError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if not (isinstance(self.spline_degree, int) and self.spline_degree >= 0):
            raise ConfigError(
                f"spline_degree must be a nonnegative integer, got {self.spline_degree!r}"
            )
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    def to_json(self) -> str:
        d = {_json_key(f.name): getattr(self, f.name) for f in dataclasses.fields(self)}
        return json.dumps(d, indent=2)


def _json_key(field: str) -> str:
    return "lambda" if field == "lam" else field


def _field_name(key: str) -> str:
    return "lam" if key == "lambda" else key


_INT_FIELDS = {"j_coarse", "j_fine", "max_iters", "spline_degree", "seed"}


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a flat dict, rejecting unknown keys."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    kwargs = {}
    for key, value in data.items():
        name = _field_name(key)
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if name in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key} must be an integer, got {value!r}")
        elif name == "prior":
            if not isinstance(value, str):
                raise ConfigError(f"prior must be a string, got {value!r}")
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a number, got {value!r}")
            value = float(value)
        kwargs[name] = value
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    """Parse a JSON run configuration; missing keys take defaults."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config_from_dict(data)
