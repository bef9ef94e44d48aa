"""Noise coefficient sigma, cut-off function chi_n and white-noise increments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SIGMA_FORMS = ("smooth_sublinear", "constant", "custom_table", "zero")
ALPHA_EXISTENCE_MAX = 1.0 / 9.0


@dataclass(frozen=True)
class SigmaSpec:
    """Noise diffusion sigma with sub-linear growth |sigma(u)| <= C (1 + |u|^alpha).

    ``custom_table`` interpolates (u, sigma) pairs linearly and holds the end
    values constant outside the table, which keeps it bounded and Lipschitz.
    """

    alpha: float = 0.1
    c_sigma: float = 1.0
    form: str = "smooth_sublinear"
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.form not in SIGMA_FORMS:
            raise ValueError(f"unknown sigma form {self.form!r}; expected one of {SIGMA_FORMS}")
        if self.form == "smooth_sublinear" and not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.form in ("constant", "custom_table") and not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.form != "zero" and not self.c_sigma > 0:
            raise ValueError(f"c_sigma must be > 0, got {self.c_sigma}")
        if self.form == "custom_table":
            if self.table is None:
                raise ValueError("custom_table form needs a (u, sigma) table")
            u, s = (np.asarray(a, float) for a in self.table)
            if u.shape != s.shape or u.size < 2 or np.any(np.diff(u) <= 0):
                raise ValueError("table needs >= 2 strictly increasing u points with matching values")
            object.__setattr__(self, "table", (tuple(u), tuple(s)))

    @property
    def is_zero(self) -> bool:
        return self.form == "zero"

    @property
    def is_additive(self) -> bool:
        return self.form == "constant"


def sigma_eval(u, spec: SigmaSpec):
    """sigma(u); the default form is C (1 + u^2)^{alpha/2}."""
    u = np.asarray(u, dtype=float)
    if spec.form == "smooth_sublinear":
        return spec.c_sigma * (1.0 + u * u) ** (spec.alpha / 2)
    if spec.form == "constant":
        return np.full_like(u, spec.c_sigma)
    if spec.form == "zero":
        return np.zeros_like(u)
    us, ss = spec.table
    return np.interp(u, us, ss)


def growth_violation(spec: SigmaSpec, lattice=None) -> float:
    """Largest |sigma(u)| / (C (1 + |u|^alpha)) on a lattice; <= 1 means compliant."""
    if lattice is None:
        lattice = np.linspace(-100.0, 100.0, 20001)
    if spec.is_zero:
        return 0.0
    bound = spec.c_sigma * (1.0 + np.abs(lattice) ** spec.alpha)
    return float(np.max(np.abs(sigma_eval(lattice, spec)) / bound))


def lipschitz_constant(spec: SigmaSpec, lattice=None) -> float:
    """Largest difference quotient of sigma between neighbouring lattice points."""
    if lattice is None:
        lattice = np.linspace(-100.0, 100.0, 20001)
    s = sigma_eval(lattice, spec)
    return float(np.max(np.abs(np.diff(s)) / np.diff(lattice)))


@dataclass(frozen=True)
class CutoffSpec:
    """Cut-off chi_n applied to the L^q norm of the state."""

    n: float = 1.0
    q: float = 4.0

    def __post_init__(self):
        if not self.n >= 1:
            raise ValueError(f"cut-off level must be >= 1, got {self.n}")
        if not self.q >= 1:
            raise ValueError(f"norm index must be >= 1, got {self.q}")


def cutoff_eval(x, spec: CutoffSpec):
    """chi_n(x) = 1 - s(x - n) on [n, n+1] with s(t) = 3t^2 - 2t^3; 1 below, 0 above."""
    t = np.clip(np.asarray(x, dtype=float) - spec.n, 0.0, 1.0)
    return 1.0 - t * t * (3.0 - 2.0 * t)


def cutoff_derivative(x, spec: CutoffSpec):
    t = np.asarray(x, dtype=float) - spec.n
    inside = (t > 0) & (t < 1)
    return np.where(inside, -6.0 * t * (1.0 - t), 0.0)


# ---------------------------------------------------------------------------
# white noise


@dataclass(frozen=True)
class NoiseIncrement:
    """Nodal increments W(cell, [t, t+dt]) / h^d, iid N(0, dt / h^d)."""

    nodal: np.ndarray
    dt: float
    seed_path: tuple[int, int, int] = field(default=(0, 0, 0))


@lru_cache(maxsize=4096)
def _stream_key(seed: int, path: int) -> tuple[int, int]:
    k = np.random.SeedSequence([int(seed), int(path)]).generate_state(2, np.uint64)
    return int(k[0]), int(k[1])


def _key_array(seed: int, path: int) -> np.ndarray:
    return np.array(_stream_key(seed, path), dtype=np.uint64)


def standard_normals(seed: int, path: int, step: int, shape) -> np.ndarray:
    """Counter-based N(0,1) block for (seed, path, step).

    Philox is keyed by (seed, path) and the step index occupies the second
    counter word, so each step owns a disjoint 2^64-block slice of the stream.
    """
    bitgen = np.random.Philox(key=_key_array(seed, path), counter=[0, int(step), 0, 0])
    return np.random.Generator(bitgen).standard_normal(shape)


def sample_noise(step: int, seed: int, path: int, n: int, d: int, dt: float) -> NoiseIncrement:
    """White-noise increment on the N^d midpoint grid for one time step."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    h = math.pi / n
    z = standard_normals(seed, path, step, (n,) * d)
    return NoiseIncrement(z * math.sqrt(dt / h**d), dt, (int(seed), int(path), int(step)))


def sample_noise_batch(step: int, seed: int, paths, n: int, d: int, dt: float) -> np.ndarray:
    """Nodal increments for several paths at one step, shape (len(paths),) + (n,)*d."""
    h = math.pi / n
    scale = math.sqrt(dt / h**d)
    out = np.empty((len(paths),) + (n,) * d)
    for i, p in enumerate(paths):
        out[i] = standard_normals(seed, p, step, (n,) * d)
    out *= scale
    return out


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` steps (axis 0) of nodal increments."""
    steps = increments.shape[0]
    if steps % factor:
        raise ValueError(f"{steps} steps not divisible by {factor}")
    return increments.reshape((steps // factor, factor) + increments.shape[1:]).sum(axis=1)
