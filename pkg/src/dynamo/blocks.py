"""Block vectors: tuples of ndarrays that behave like one vector.

The joint reconstruction problem stacks a complex image with six real
affine-parameter fields.  The solver only ever needs linear combinations,
norms and inner products, so a thin wrapper around a tuple of arrays is
enough; blocks keep their own dtypes (real blocks stay real under real
scaling, which is what keeps the motion parameters real-valued).
"""

from __future__ import annotations

import numpy as np

__all__ = ["BlockVector", "norm", "inner", "zeros_like"]


class BlockVector:
    """Fixed-length tuple of ndarrays supporting vector arithmetic."""

    __slots__ = ("parts",)
    # keep numpy scalars from absorbing us into an object array
    __array_ufunc__ = None

    def __init__(self, parts):
        self.parts = tuple(np.asarray(p) for p in parts)

    def __len__(self):
        return len(self.parts)

    def __getitem__(self, i):
        return self.parts[i]

    def __add__(self, other):
        return BlockVector(a + b for a, b in zip(self.parts, other.parts))

    def __sub__(self, other):
        return BlockVector(a - b for a, b in zip(self.parts, other.parts))

    def __mul__(self, scalar):
        return BlockVector(a * scalar for a in self.parts)

    __rmul__ = __mul__

    def __neg__(self):
        return BlockVector(-a for a in self.parts)

    def copy(self):
        return BlockVector(a.copy() for a in self.parts)

    def replace(self, i, arr):
        """New BlockVector with block ``i`` swapped for ``arr``."""
        parts = list(self.parts)
        parts[i] = np.asarray(arr)
        return BlockVector(parts)

    def __repr__(self):
        shapes = ", ".join(f"{a.shape}:{a.dtype}" for a in self.parts)
        return f"BlockVector({shapes})"


def _parts(x):
    return x.parts if isinstance(x, BlockVector) else (np.asarray(x),)


def norm(x) -> float:
    """Euclidean norm of an ndarray or BlockVector."""
    return float(np.sqrt(sum(np.vdot(p, p).real for p in _parts(x))))


def inner(a, b) -> complex:
    """Inner product, conjugate-linear in the second argument."""
    # np.vdot conjugates its first argument, so swap to conjugate b.
    return complex(sum(np.vdot(q, p) for p, q in zip(_parts(a), _parts(b))))


def zeros_like(x):
    if isinstance(x, BlockVector):
        return BlockVector(np.zeros_like(p) for p in x.parts)
    return np.zeros_like(x)
