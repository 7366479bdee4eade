"""Closed-form proximal operators and conjugate-prox constructions.

Every function here evaluates ``argmin_x g(x) + |x - p|^2 / (2s)`` for its
particular g, or the conjugate counterpart through the Moreau identity
``prox_{s g*}(p) = p - s prox_{g/s}(p/s)``.  Complex entries are treated
by magnitude (phase preserved), the natural extension of the real l1/linf
calculus.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

__all__ = [
    "soft_threshold",
    "project_linf_ball",
    "prox_datafit_conj",
    "svt",
    "conj_prox",
]


def soft_threshold(p: np.ndarray, t: float) -> np.ndarray:
    """Prox of ``t * ||.||_1``: shrink each entry's magnitude by t."""
    mag = np.abs(p)
    scale = np.maximum(mag - t, 0.0) / np.where(mag > 0, mag, 1.0)
    return p * scale


def project_linf_ball(p: np.ndarray, radius: float) -> np.ndarray:
    """Project onto ``{ |p_i| <= radius }``: clamp magnitudes, keep phase."""
    mag = np.abs(p)
    return p * (radius / np.maximum(radius, mag)) if radius > 0 else np.zeros_like(p)


def prox_datafit_conj(z: np.ndarray, s: float, b: np.ndarray) -> np.ndarray:
    """Conjugate prox of the quadratic data-fit ``g(x) = 0.5 ||x - b||^2``."""
    if z.shape != b.shape:
        raise DataError(f"shape mismatch: {z.shape} vs {b.shape}")
    return (z - s * b) / (1.0 + s)


def svt(m: np.ndarray, t: float) -> np.ndarray:
    """Singular value thresholding, the prox of ``t * ||.||_*``."""
    u, sv, vh = np.linalg.svd(m, full_matrices=False)
    sv = np.maximum(sv - t, 0.0)
    return (u * sv) @ vh


def conj_prox(prox_of_g, s: float, p):
    """Moreau decomposition: prox of ``s g*`` from the prox of g.

    ``prox_of_g`` must follow the (point, step) calling convention.
    """
    return p - s * prox_of_g(p / s, 1.0 / s)
