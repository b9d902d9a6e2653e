"""Compact state space described by a level-set function.

The domain is either the interval ``[-alpha, alpha]`` (``dim == 1``) or the
closed ball of radius ``alpha`` centred at the origin (``dim > 1``). Both are
the zero sublevel set of

    phi(x) = exp(alpha**2 - |x|**2) * (|x|**2 - alpha**2) / (2 * alpha),

whose gradient has unit length on the boundary, so the Euclidean projection
onto the domain pushes along ``-grad phi`` exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParamsError

__all__ = [
    "DomainSpec",
    "phi_eval",
    "phi_grad",
    "project_to_domain",
    "boundary_distance",
    "contains",
]


@dataclass(frozen=True)
class DomainSpec:
    """Interval (``dim == 1``) or centred ball (``dim > 1``) of radius ``alpha``."""

    alpha: float
    dim: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidParamsError(f"alpha must satisfy alpha > 0, got {self.alpha!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidParamsError(f"dim must be a positive integer, got {self.dim!r}")

    @property
    def boundary_points(self) -> np.ndarray:
        """The two boundary points of the interval. Only defined for ``dim == 1``."""
        if self.dim != 1:
            raise InvalidParamsError("boundary_points is only defined for the interval")
        return np.array([-self.alpha, self.alpha])


def _sq_norm(domain, x):
    x = np.asarray(x, dtype=float)
    if domain.dim == 1:
        return x * x
    return np.sum(x * x, axis=-1)


def phi_eval(domain: DomainSpec, x):
    """Level-set function; negative inside, zero on the boundary.

    ``x`` is a scalar/array of scalars for the interval and ``(..., dim)``
    for the ball.
    """
    a = domain.alpha
    r2 = _sq_norm(domain, x)
    return np.exp(a * a - r2) * (r2 - a * a) / (2.0 * a)


def phi_grad(domain: DomainSpec, x):
    """Analytic gradient of :func:`phi_eval` (same shape as ``x``)."""
    a = domain.alpha
    x = np.asarray(x, dtype=float)
    r2 = _sq_norm(domain, x)
    radial = np.exp(a * a - r2) * (1.0 + a * a - r2) / a
    if domain.dim == 1:
        return x * radial
    return x * radial[..., None]


def boundary_distance(domain: DomainSpec, x):
    """Unsigned distance from ``x`` to the boundary sphere/endpoints."""
    x = np.asarray(x, dtype=float)
    if domain.dim == 1:
        return np.abs(np.abs(x) - domain.alpha)
    return np.abs(np.linalg.norm(x, axis=-1) - domain.alpha)


def contains(domain: DomainSpec, x):
    """Boolean mask of points lying in the closed domain."""
    x = np.asarray(x, dtype=float)
    if domain.dim == 1:
        return np.abs(x) <= domain.alpha
    return np.linalg.norm(x, axis=-1) <= domain.alpha


def project_to_domain(domain: DomainSpec, x):
    """Nearest point of the domain and the distance moved.

    Returns ``(x_proj, dl)``. ``dl`` is zero exactly when ``x`` already lies
    in the domain; otherwise ``x_proj`` is on the boundary and ``dl`` is the
    discrete local-time increment for the unit-normal reflection.
    """
    a = domain.alpha
    x = np.asarray(x, dtype=float)
    if domain.dim == 1:
        x_proj = np.clip(x, -a, a)
        return x_proj, np.abs(x - x_proj)
    r = np.linalg.norm(x, axis=-1)
    outside = r > a
    scale = np.where(outside, a / np.where(outside, r, 1.0), 1.0)
    x_proj = x * scale[..., None]
    # Rounding can leave the scaled point an ulp outside; shrink until it is not.
    for _ in range(8):
        over = np.linalg.norm(x_proj, axis=-1) > a
        if not np.any(over):
            break
        x_proj = np.where(over[..., None], x_proj * (1.0 - 2.0 ** -52), x_proj)
    dl = np.where(outside, r - a, 0.0)
    return x_proj, dl
