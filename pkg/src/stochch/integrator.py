"""Exponential-Euler integration of the cut-off Galerkin system.

Per mode k with omega_k = rho lambda_k^2 + qtilde lambda_k one step reads

    u_k+ = e^{-omega dt} u_k + dt phi1(-omega dt) chi D_k(u) + w_k chi S_k(u, dW)

where D_k = (-rho lambda_k - qtilde) [f(u)]_k is the spectral drift,
S_k = [sigma(u) dW]_k the projected noise, chi = chi_n(||u||_q) and w_k the
noise weight (``left``: e^{-omega dt}; ``phi1``: phi1(-omega dt);
``exact``: the one-step stochastic-convolution standard deviation ratio).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft

from .noise import (
    ALPHA_EXISTENCE_MAX,
    CutoffSpec,
    NoiseIncrement,
    SigmaSpec,
    cutoff_eval,
    sample_noise_batch,
    sigma_eval,
)
from .spectral_core import OperatorSpec, SpectralField, lambda_grid

log = logging.getLogger(__name__)

NOISE_WEIGHTINGS = ("left", "phi1", "exact")


class ConfigError(ValueError):
    """Invalid simulation configuration."""


# ---------------------------------------------------------------------------
# nonlinearity


@dataclass(frozen=True)
class Nonlinearity:
    """Cubic f(u) = a3 u^3 + a2 u^2 + a1 u + a0 with a3 > 0, or f == 0.

    The default is the double-well derivative u^3 - u.
    """

    coeffs: tuple[float, float, float, float] | None = (1.0, 0.0, -1.0, 0.0)

    def __post_init__(self):
        if self.coeffs is None:
            return
        c = tuple(float(a) for a in self.coeffs)
        if len(c) != 4:
            raise ConfigError(f"f must be a cubic given by 4 coefficients, got {len(c)}")
        if not c[0] > 0:
            raise ConfigError("f must be a polynomial of degree 3 with a positive leading coefficient")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls) -> "Nonlinearity":
        return cls(None)

    @property
    def is_zero(self) -> bool:
        return self.coeffs is None

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.coeffs is None:
            return np.zeros_like(u)
        a3, a2, a1, a0 = self.coeffs
        return ((a3 * u + a2) * u + a1) * u + a0

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.coeffs is None:
            return np.zeros_like(u)
        a3, a2, a1, _ = self.coeffs
        return (3 * a3 * u + 2 * a2) * u + a1

    def potential(self, u):
        """Antiderivative F of f, shifted so that min F = 0."""
        u = np.asarray(u, dtype=float)
        if self.coeffs is None:
            return np.zeros_like(u)
        P = np.polynomial.Polynomial(self.coeffs[::-1]).integ()
        crit = np.roots(self.coeffs)
        crit = crit[np.abs(crit.imag) < 1e-9].real
        return P(u) - float(np.min(P(crit)))


def f_eval(u, f: Nonlinearity | None = None):
    """Evaluate the polynomial nonlinearity (default u^3 - u)."""
    return (f or Nonlinearity())(u)


# ---------------------------------------------------------------------------
# configuration


def condition_c_alpha(d: int, q: float, alpha: float) -> bool:
    """Integrability condition on (d, q, alpha) required for the Galerkin estimates."""
    if d in (1, 2):
        return q >= 4
    if d == 3:
        if q >= 6:
            return True
        return q >= 4 and max(6 * (1 - alpha), 6 * alpha) < q < 6
    return False


@dataclass(frozen=True)
class SimConfig:
    op: OperatorSpec = field(default_factory=OperatorSpec)
    sigma: SigmaSpec = field(default_factory=SigmaSpec)
    cutoff: CutoffSpec | None = None
    d: int = 1
    n: int = 256
    dt: float = 1e-4
    t_end: float = 0.1
    q: float = 4.0
    u0: SpectralField | None = None
    seed: int = 0
    paths: int = 1
    f: Nonlinearity = field(default_factory=Nonlinearity)
    noise_weighting: str = "left"
    dealias: float = 2.0
    snapshot_every: int = 0  # 0 -> only the initial and final states
    snapshot_start: float = 0.0
    blowup_threshold: float = 1e12

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ConfigError(f"d must be 1, 2 or 3, got {self.d}")
        if self.n < 2:
            raise ConfigError(f"need at least 2 modes per axis, got {self.n}")
        if not self.dt > 0 or not self.t_end > 0:
            raise ConfigError("dt and t_end must be positive")
        if self.noise_weighting not in NOISE_WEIGHTINGS:
            raise ConfigError(f"noise_weighting must be one of {NOISE_WEIGHTINGS}")
        if self.dealias < 1:
            raise ConfigError("dealias factor must be >= 1")
        if self.u0 is not None and (self.u0.d != self.d or self.u0.n != self.n):
            raise ConfigError("u0 lattice does not match (n, d)")
        if self.cutoff is not None and self.cutoff.q != self.q:
            object.__setattr__(self, "cutoff", replace(self.cutoff, q=self.q))

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def m(self) -> int:
        """Dealiased grid size per axis."""
        return int(math.ceil(self.dealias * self.n))

    def initial(self) -> SpectralField:
        return self.u0 if self.u0 is not None else SpectralField.zeros(self.n, self.d)

    def validate(self) -> list[str]:
        """Problems that void the existence theory for this configuration."""
        issues = []
        a = self.sigma.alpha
        if not condition_c_alpha(self.d, self.q, a):
            issues.append(f"q={self.q} violates the integrability condition for d={self.d}, alpha={a}")
        if self.sigma.form == "smooth_sublinear" and not 0 < a < ALPHA_EXISTENCE_MAX:
            issues.append(f"alpha outside (0,1/9): alpha={a}")
        return issues


# ---------------------------------------------------------------------------
# phi functions


def phi1(z):
    """(e^z - 1)/z with phi1(0) = 1."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2, np.expm1(safe) / safe)


def phi2(z):
    """(e^z - 1 - z)/z^2 with phi2(0) = 1/2."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    safe = np.where(small, 1.0, z)
    series = 0.5 + z / 6 + z * z / 24 + z**3 / 120
    return np.where(small, series, (np.expm1(safe) - safe) / (safe * safe))


# ---------------------------------------------------------------------------
# stepping kernel


class Stepper:
    """Precomputed multipliers and transforms for a fixed (config, dt)."""

    def __init__(self, cfg: SimConfig, dt: float | None = None):
        self.cfg = cfg
        self.dt = cfg.dt if dt is None else dt
        d, n = cfg.d, cfg.n
        self.d, self.n, self.mm = d, n, cfg.m
        self.axes = tuple(range(-d, 0))
        lam = lambda_grid(n, d)
        om = cfg.op.omega(lam)
        z = -om * self.dt
        self.omega = om
        self.decay = np.exp(z)
        self.phi_dt = self.dt * phi1(z)
        self.drift_factor = cfg.op.drift_factor(lam)
        if cfg.noise_weighting == "left":
            self.noise_weight = self.decay
        elif cfg.noise_weighting == "phi1":
            self.noise_weight = phi1(z)
        else:
            self.noise_weight = np.sqrt(phi1(2 * z))
        self._fine_scale = (self.mm / math.pi) ** (d / 2)
        self._coarse_in = (math.pi / self.mm) ** (d / 2)
        self._h_m = math.pi / self.mm
        self._grid_n = (math.pi / n) ** (d / 2)

    # transforms on batched coefficient arrays
    def fine_nodal(self, c: np.ndarray) -> np.ndarray:
        mm, n, d = self.mm, self.n, self.d
        if mm == n:
            padded = c
        else:
            padded = np.zeros(c.shape[:-d] + (mm,) * d)
            padded[(Ellipsis,) + (slice(0, n),) * d] = c
        return scipy.fft.idctn(padded, type=2, norm="ortho", axes=self.axes) * self._fine_scale

    def fine_spectral(self, v: np.ndarray) -> np.ndarray:
        c = scipy.fft.dctn(v, type=2, norm="ortho", axes=self.axes) * self._coarse_in
        return c[(Ellipsis,) + (slice(0, self.n),) * self.d]

    def nodal(self, c: np.ndarray) -> np.ndarray:
        return scipy.fft.idctn(c, type=2, norm="ortho", axes=self.axes) / self._grid_n

    def spectral(self, v: np.ndarray) -> np.ndarray:
        return scipy.fft.dctn(v, type=2, norm="ortho", axes=self.axes) * self._grid_n

    def norm_q(self, fine: np.ndarray) -> np.ndarray:
        q = self.cfg.q
        s = np.sum(np.abs(fine) ** q, axis=self.axes) * self._h_m**self.d
        return s ** (1.0 / q)

    def drift(self, c: np.ndarray, fine: np.ndarray | None = None) -> np.ndarray:
        if self.cfg.f.is_zero:
            return np.zeros_like(c)
        if fine is None:
            fine = self.fine_nodal(c)
        return self.drift_factor * self.fine_spectral(self.cfg.f(fine))

    def noise_term(self, c: np.ndarray, dw: np.ndarray) -> np.ndarray:
        """Projection [sigma(u) dW]_k on the N-grid."""
        sig = self.cfg.sigma
        if sig.is_zero:
            return np.zeros_like(c)
        if sig.form == "constant":
            return sig.c_sigma * self.spectral(dw)
        return self.spectral(sigma_eval(self.nodal(c), sig) * dw)

    def chi(self, norms: np.ndarray) -> np.ndarray:
        if self.cfg.cutoff is None:
            return np.ones_like(norms)
        return cutoff_eval(norms, self.cfg.cutoff)

    def _expand(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(x.shape + (1,) * self.d)

    def advance(self, c: np.ndarray, dw: np.ndarray | None):
        """One step on a batch; returns (new coeffs, q-norm before, chi, noise part)."""
        fine = self.fine_nodal(c)
        norms = self.norm_q(fine)
        chi = self._expand(self.chi(norms))
        new = self.decay * c
        if not self.cfg.f.is_zero:
            new = new + self.phi_dt * chi * self.drift(c, fine)
        stoch = None
        if dw is not None and not self.cfg.sigma.is_zero:
            stoch = self.noise_weight * chi * self.noise_term(c, dw)
            new = new + stoch
        return new, norms, chi, stoch


# ---------------------------------------------------------------------------
# public single-step and drift operations


def drift_spectral(u: SpectralField, op: OperatorSpec = OperatorSpec(),
                   f: Nonlinearity | None = None, dealias: float = 2.0) -> SpectralField:
    """(-rho lambda_k - qtilde) [f(u)]_k, evaluating f on the padded grid."""
    cfg = SimConfig(op=op, d=u.d, n=u.n, f=f or Nonlinearity(), dealias=dealias,
                    sigma=SigmaSpec(form="zero"))
    return SpectralField(Stepper(cfg).drift(u.coeffs), u.d)


def step(u: SpectralField, dt: float, noise: NoiseIncrement | None, cfg: SimConfig) -> SpectralField:
    """One exponential-Euler step of the cut-off system."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    st = Stepper(cfg, dt)
    dw = None if noise is None else noise.nodal
    new, _, _, _ = st.advance(u.coeffs, dw)
    if not np.all(np.isfinite(new)):
        raise FloatingPointError("non-finite state after step")
    return SpectralField(new, u.d)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    path_id: int
    times: np.ndarray  # snapshot times, strictly increasing
    coeffs: np.ndarray  # (snapshots,) + (n,)*d
    d: int
    step_times: np.ndarray  # t_0..t_steps
    norms: np.ndarray  # ||u(t_m)||_q for every step time (nan after blow-up)
    stopping_level: float | None = None
    stopping_time: float | None = None
    frozen: bool = False
    first_freeze: float | None = None
    blowup: bool = False
    blowup_time: float | None = None
    stoch_sup: float | None = None  # sup_{x,t} |stochastic convolution|

    @property
    def snapshots(self) -> list[tuple[float, SpectralField]]:
        return [(float(t), SpectralField(c, self.d)) for t, c in zip(self.times, self.coeffs)]

    def final(self) -> SpectralField:
        return SpectralField(self.coeffs[-1], self.d)


def _snapshot_mask(cfg: SimConfig) -> np.ndarray:
    steps = cfg.steps
    keep = np.zeros(steps + 1, dtype=bool)
    keep[0] = keep[-1] = True
    if cfg.snapshot_every > 0:
        idx = np.arange(0, steps + 1, cfg.snapshot_every)
        t = idx * cfg.dt
        keep[idx[t >= cfg.snapshot_start - 1e-12 * cfg.dt]] = True
    return keep


def run_paths(cfg: SimConfig, path_ids=None, noise: np.ndarray | None = None,
              stopping_level: float | None = None, track_stochastic: bool = False
              ) -> list[Trajectory]:
    """Integrate several independent paths as one batch.

    ``noise`` (optional) fixes the nodal increments, shape
    (len(path_ids), steps) + (n,)*d; otherwise increments come from the
    counter-based stream of (cfg.seed, path_id, step).  ``stopping_level``
    defaults to the cut-off level.
    """
    if path_ids is None:
        path_ids = list(range(cfg.paths))
    path_ids = [int(p) for p in path_ids]
    P, d, n = len(path_ids), cfg.d, cfg.n
    st = Stepper(cfg)
    steps = cfg.steps
    if noise is not None and noise.shape[:2] != (P, steps):
        raise ValueError(f"noise must have shape {(P, steps)} + grid, got {noise.shape}")
    level = stopping_level if stopping_level is not None else (
        cfg.cutoff.n if cfg.cutoff is not None else None)

    c = np.broadcast_to(cfg.initial().coeffs, (P,) + (n,) * d).copy()
    keep = _snapshot_mask(cfg)
    snaps = [[c[i].copy()] for i in range(P)]
    snap_t = [0.0]
    norms = np.full((P, steps + 1), np.nan)
    alive = np.ones(P, dtype=bool)
    blow_t = [None] * P
    stop_t = [None] * P
    freeze_t = [None] * P
    stoch = np.zeros_like(c) if track_stochastic else None
    stoch_sup = np.zeros(P)
    noisy = not cfg.sigma.is_zero

    for m in range(steps):
        t = m * cfg.dt
        if noisy:
            dw = noise[:, m] if noise is not None else sample_noise_batch(
                m, cfg.seed, path_ids, n, d, cfg.dt)
        else:
            dw = None
        new, nq, chi, sto = st.advance(c, dw)
        norms[:, m] = np.where(alive, nq, np.nan)
        chi_flat = chi.reshape(P)
        for i in range(P):
            if not alive[i]:
                continue
            if level is not None and stop_t[i] is None and nq[i] >= level:
                stop_t[i] = t
            if freeze_t[i] is None and chi_flat[i] == 0.0:
                freeze_t[i] = t
        if track_stochastic:
            stoch = st.decay * stoch + (sto if sto is not None else 0.0)
            stoch_sup = np.maximum(stoch_sup, np.max(np.abs(st.nodal(stoch)).reshape(P, -1), axis=1))
        l2 = np.sqrt(np.sum(new.reshape(P, -1) ** 2, axis=1))
        bad = alive & (~np.all(np.isfinite(new.reshape(P, -1)), axis=1) | (l2 > cfg.blowup_threshold))
        for i in np.flatnonzero(bad):
            alive[i] = False
            blow_t[i] = (m + 1) * cfg.dt
            log.warning("path %d blew up at t=%.4g", path_ids[i], (m + 1) * cfg.dt)
        # blown-up paths keep their last finite state
        c = np.where(alive.reshape((P,) + (1,) * d), new, c)
        if keep[m + 1]:
            snap_t.append((m + 1) * cfg.dt)
            for i in range(P):
                snaps[i].append(c[i].copy())

    final_norm = st.norm_q(st.fine_nodal(c))
    norms[:, steps] = np.where(alive, final_norm, np.nan)
    for i in range(P):
        if alive[i] and level is not None and stop_t[i] is None and final_norm[i] >= level:
            stop_t[i] = steps * cfg.dt

    step_times = np.arange(steps + 1) * cfg.dt
    out = []
    for i, p in enumerate(path_ids):
        out.append(Trajectory(
            path_id=p, times=np.array(snap_t), coeffs=np.array(snaps[i]), d=d,
            step_times=step_times, norms=norms[i], stopping_level=level,
            stopping_time=stop_t[i], frozen=freeze_t[i] is not None, first_freeze=freeze_t[i],
            blowup=not alive[i], blowup_time=blow_t[i],
            stoch_sup=float(stoch_sup[i]) if track_stochastic else None))
    return out


def run_path(cfg: SimConfig, path_id: int = 0, noise: np.ndarray | None = None, **kw) -> Trajectory:
    """Integrate one path from u0 to t_end (see run_paths)."""
    batch = None if noise is None else noise[None]
    return run_paths(cfg, [path_id], batch, **kw)[0]


def path_noise(cfg: SimConfig, path_id: int, steps: int | None = None) -> np.ndarray:
    """All nodal increments of one path, shape (steps,) + (n,)*d."""
    steps = cfg.steps if steps is None else steps
    return np.stack([sample_noise_batch(m, cfg.seed, [path_id], cfg.n, cfg.d, cfg.dt)[0]
                     for m in range(steps)])


# ---------------------------------------------------------------------------
# Picard iteration on the discrete mild equation


@dataclass
class PicardResult:
    u: SpectralField
    distances: list[float]
    iterations: int
    converged: bool
    diverged: bool = False


def picard_solve(cfg: SimConfig, noise: np.ndarray | None = None, iterations: int = 50,
                 tol: float = 1e-12) -> PicardResult:
    """Fixed-point iteration u <- G_t u0 + M(u) + L(u) on the time grid of cfg.

    M integrates the drift against the semigroup with the drift linearly
    interpolated between grid times (exact exponential weights); L uses the
    same noise increments and weighting as run_path.  ``noise`` has shape
    (steps,) + (n,)*d; the default draws path 0 of cfg.seed.
    """
    st = Stepper(cfg)
    steps, d = cfg.steps, cfg.d
    if noise is None and not cfg.sigma.is_zero:
        noise = path_noise(cfg, 0)
    z = -st.omega * cfg.dt
    w_next = cfg.dt * phi2(z)
    w_prev = cfg.dt * phi1(z) - w_next

    u0 = cfg.initial().coeffs
    U = np.empty((steps + 1,) + u0.shape)
    U[0] = u0
    for m in range(steps):
        U[m + 1] = st.decay * U[m]

    distances: list[float] = []
    converged = diverged = False
    it = 0
    for it in range(1, iterations + 1):
        fine = st.fine_nodal(U)
        chi = st._expand(st.chi(st.norm_q(fine)))
        D = chi * st.drift(U, fine) if not cfg.f.is_zero else np.zeros_like(U)
        if cfg.sigma.is_zero:
            S = np.zeros_like(U[:-1])
        else:
            S = st.noise_weight * chi[:-1] * st.noise_term(U[:-1], noise)
        V = np.empty_like(U)
        V[0] = u0
        for m in range(steps):
            V[m + 1] = st.decay * V[m] + w_prev * D[m] + w_next * D[m + 1] + S[m]
        diff = V - U
        dist = float(np.max(np.sqrt(np.sum(diff.reshape(steps + 1, -1) ** 2, axis=1))))
        distances.append(dist)
        U = V
        if not np.all(np.isfinite(U)):
            diverged = True
            break
        scale = max(1.0, float(np.max(np.abs(U))))
        if dist <= tol * scale:
            converged = True
            break
        if len(distances) >= 4 and all(
                distances[-i] > distances[-i - 1] for i in range(1, 4)):
            diverged = True
            break
    return PicardResult(SpectralField(U[-1], d), distances, it, converged, diverged)


# ---------------------------------------------------------------------------
# diagnostics


def b_functional(u0: SpectralField, op: OperatorSpec = OperatorSpec()) -> float:
    """1/2 sum_k (rho lambda_k + qtilde)^{-1} (u0, eps_k)^2; k = 0 dropped when qtilde = 0."""
    lam = lambda_grid(u0.n, u0.d)
    denom = op.rho * lam + op.qtilde
    c2 = u0.coeffs**2
    if op.qtilde == 0:
        mask = lam > 0
        return 0.5 * float(np.sum(c2[mask] / denom[mask]))
    return 0.5 * float(np.sum(c2 / denom))


@dataclass
class EnergyReport:
    times: np.ndarray
    mass: np.ndarray
    l2: np.ndarray  # ||v||_2^2
    h1: np.ndarray  # ||grad v||_2^2
    h2: np.ndarray  # ||Lap v||_2^2
    free_energy: np.ndarray
    b0: float

    def to_csv(self, path) -> None:
        rows = np.column_stack([self.times, self.mass, self.l2, self.h1, self.h2, self.free_energy])
        np.savetxt(path, rows, delimiter=",", header="t,mass,L2,H1,H2,free_energy",
                   comments="", fmt="%.17g")


def free_energy(c: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """int |grad u|^2/2 + F(u) dx for coefficient arrays (batched over leading axes)."""
    st = Stepper(cfg)
    lam = lambda_grid(cfg.n, cfg.d)
    grad = 0.5 * np.sum(lam * c**2, axis=st.axes)
    pot = np.sum(cfg.f.potential(st.fine_nodal(c)), axis=st.axes) * st._h_m**cfg.d
    return grad + pot


def energy_diagnostics(traj: Trajectory, cfg: SimConfig) -> EnergyReport:
    c = traj.coeffs
    axes = tuple(range(-cfg.d, 0))
    lam = lambda_grid(cfg.n, cfg.d)
    mass = c[(slice(None),) + (0,) * cfg.d].copy()
    return EnergyReport(
        times=np.asarray(traj.times, float),
        mass=mass,
        l2=np.sum(c**2, axis=axes),
        h1=np.sum(lam * c**2, axis=axes),
        h2=np.sum(lam**2 * c**2, axis=axes),
        free_energy=free_energy(c, cfg),
        b0=b_functional(SpectralField(c[0], cfg.d), cfg.op),
    )


def smooth_random_field(n: int, d: int, rng: np.random.Generator, amplitude: float = 1.0,
                        decay: float = 4.0) -> SpectralField:
    """Random coefficients damped by exp(-lambda_k / decay^2)."""
    lam = lambda_grid(n, d)
    c = rng.standard_normal((n,) * d) * np.exp(-lam / decay**2) * amplitude
    return SpectralField(c, d)
