"""Neumann cosine eigenbasis on [0, pi]^d and the spectral machinery built on it.

The basis is eps_0 = 1/sqrt(pi), eps_j(x) = sqrt(2/pi) cos(j x) per axis, with
tensor products in higher dimension.  Nodal values live on the midpoint grid
x_j = pi (j + 1/2) / N, where the orthonormal DCT-II is exactly the Galerkin
projection computed by the midpoint rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.fft

SQRT_PI = math.sqrt(math.pi)


class DomainError(ValueError):
    """Argument outside the domain where an operation is defined."""


class ShapeError(ValueError):
    """Array shape does not match the field it is combined with."""


@dataclass(frozen=True)
class OperatorSpec:
    """Coefficients of the linear operator -rho*Lap^2 + qtilde*Lap."""

    rho: float = 1.0
    qtilde: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if not self.qtilde >= 0:
            raise ValueError(f"qtilde must be >= 0, got {self.qtilde}")

    def omega(self, lam):
        """Decay rate rho*lambda^2 + qtilde*lambda of each mode."""
        lam = np.asarray(lam, dtype=float)
        return self.rho * lam**2 + self.qtilde * lam

    def drift_factor(self, lam):
        """Spectral symbol of rho*Lap - qtilde acting on f(u)."""
        lam = np.asarray(lam, dtype=float)
        return -self.rho * lam - self.qtilde


@dataclass(frozen=True)
class SpectralField:
    """Coefficients (u, eps_k) on the lattice {0..N-1}^d.

    A leading batch axis is allowed: ``coeffs.shape == batch + (N,)*d``.
    """

    coeffs: np.ndarray
    d: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim < self.d:
            raise ShapeError(f"coeffs of ndim {c.ndim} cannot carry d={self.d}")
        if len(set(c.shape[-self.d:])) != 1:
            raise ShapeError(f"spectral lattice must be cubic, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.shape[-1]

    def l2_norm(self):
        axes = tuple(range(-self.d, 0))
        return np.sqrt(np.sum(self.coeffs**2, axis=axes))

    @classmethod
    def zeros(cls, n: int, d: int) -> "SpectralField":
        return cls(np.zeros((n,) * d), d)

    @classmethod
    def basis(cls, k: Sequence[int], n: int) -> "SpectralField":
        """Unit coefficient vector of eps_k."""
        k = tuple(int(i) for i in k)
        c = np.zeros((n,) * len(k))
        c[k] = 1.0
        return cls(c, len(k))


@dataclass(frozen=True)
class NodalField:
    """Values on the midpoint grid, N nodes per axis (optionally batched)."""

    values: np.ndarray
    d: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        v = np.asarray(self.values, dtype=float)
        if v.ndim < self.d or len(set(v.shape[-self.d:])) != 1:
            raise ShapeError(f"nodal grid must be cubic with d={self.d}, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    @property
    def h(self) -> float:
        return math.pi / self.n

    def lq_norm(self, q: float = 2.0):
        """Midpoint-rule L^q(D) norm."""
        axes = tuple(range(-self.d, 0))
        if math.isinf(q):
            return np.max(np.abs(self.values), axis=axes)
        s = np.sum(np.abs(self.values) ** q, axis=axes) * self.h**self.d
        return s ** (1.0 / q)


def nodes(n: int) -> np.ndarray:
    """Midpoint cosine nodes pi (j + 1/2) / n on [0, pi]."""
    return math.pi * (np.arange(n) + 0.5) / n


def grid(n: int, d: int) -> tuple[np.ndarray, ...]:
    """Tensor grid (ij indexing) of midpoint nodes."""
    x = nodes(n)
    return tuple(np.meshgrid(*([x] * d), indexing="ij"))


def lam(k) -> float:
    """Eigenvalue lambda_k = |k|^2 of -Lap for a multi-index k."""
    k = np.atleast_1d(np.asarray(k))
    if np.any(k < 0):
        raise DomainError(f"multi-index must be non-negative, got {tuple(k)}")
    return float(np.sum(k.astype(float) ** 2))


@lru_cache(maxsize=64)
def _lambda_lattice(n: int, d: int) -> np.ndarray:
    k2 = np.arange(n, dtype=float) ** 2
    out = np.zeros((n,) * d)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = n
        out = out + k2.reshape(shape)
    out.setflags(write=False)
    return out


def lambda_grid(n: int, d: int) -> np.ndarray:
    """lambda_k on the whole lattice {0..n-1}^d (read-only, cached)."""
    return _lambda_lattice(n, d)


def eps_1d(j, x):
    """One-dimensional basis eps_j(x); broadcasts over j and x."""
    j = np.asarray(j)
    x = np.asarray(x, dtype=float)
    return np.where(j == 0, 1.0 / SQRT_PI, math.sqrt(2.0 / math.pi) * np.cos(j * x))


def basis_eval(k: Sequence[int], x) -> float:
    """Evaluate eps_k at a point x of [0, pi]^d."""
    k = tuple(int(i) for i in k)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (len(k),):
        raise ShapeError(f"point has {x.size} coordinates, multi-index has {len(k)}")
    if any(i < 0 for i in k):
        raise DomainError(f"multi-index must be non-negative, got {k}")
    if np.any(x < 0) or np.any(x > math.pi):
        raise DomainError(f"point {tuple(x)} outside [0, pi]^{len(k)}")
    return float(np.prod([eps_1d(ki, xi) for ki, xi in zip(k, x)]))


def _axes(d: int) -> tuple[int, ...]:
    return tuple(range(-d, 0))


def to_spectral(f: NodalField) -> SpectralField:
    """Galerkin coefficients of nodal data (orthonormal DCT-II)."""
    scale = (math.pi / f.n) ** (f.d / 2)
    c = scipy.fft.dctn(f.values, type=2, norm="ortho", axes=_axes(f.d))
    return SpectralField(c * scale, f.d)


def to_nodal(u: SpectralField) -> NodalField:
    """Evaluate a truncated expansion on its midpoint grid."""
    scale = (u.n / math.pi) ** (u.d / 2)
    v = scipy.fft.idctn(u.coeffs, type=2, norm="ortho", axes=_axes(u.d))
    return NodalField(v * scale, u.d)


def pad(u: SpectralField, m: int) -> SpectralField:
    """Zero-pad (m > N) or truncate (m < N) the coefficient lattice."""
    n, d = u.n, u.d
    if m == n:
        return u
    batch = u.coeffs.shape[:-d]
    out = np.zeros(batch + (m,) * d)
    keep = (Ellipsis,) + (slice(0, min(m, n)),) * d
    out[keep] = u.coeffs[keep]
    return SpectralField(out, d)


def to_nodal_fine(u: SpectralField, m: int) -> NodalField:
    """Evaluate the same expansion on a finer midpoint grid of m nodes."""
    return to_nodal(pad(u, m))


def naive_to_spectral(f: NodalField) -> SpectralField:
    """O(N^{2d}) midpoint-rule projection; reference for to_spectral."""
    n, d = f.n, f.d
    x = nodes(n)
    e = eps_1d(np.arange(n)[:, None], x[None, :]) * (math.pi / n)  # (k, j)
    c = f.values
    for axis in range(d):
        c = np.moveaxis(np.tensordot(c, e, axes=([c.ndim - d + axis], [1])), -1, c.ndim - d + axis)
    return SpectralField(c, d)


def naive_to_nodal(u: SpectralField) -> NodalField:
    """O(N^{2d}) direct summation of the expansion; reference for to_nodal."""
    n, d = u.n, u.d
    x = nodes(n)
    e = eps_1d(np.arange(n)[None, :], x[:, None])  # (j, k)
    v = u.coeffs
    for axis in range(d):
        v = np.moveaxis(np.tensordot(v, e, axes=([v.ndim - d + axis], [1])), -1, v.ndim - d + axis)
    return NodalField(v, d)


def multiplier(n: int, d: int, t: float, op: OperatorSpec) -> np.ndarray:
    """exp(-(rho lambda_k^2 + qtilde lambda_k) t) on the lattice."""
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    return np.exp(-op.omega(lambda_grid(n, d)) * t)


def semigroup_apply(u: SpectralField, t: float, op: OperatorSpec) -> SpectralField:
    """Apply the linear semigroup e^{t(-rho Lap^2 + qtilde Lap)}."""
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    if t == 0:
        return SpectralField(u.coeffs.copy(), u.d)
    return SpectralField(u.coeffs * multiplier(u.n, u.d, t, op), u.d)
