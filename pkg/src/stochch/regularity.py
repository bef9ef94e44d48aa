"""Monte-Carlo path regularity: structure functions, mode variances, sup-norm moments."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .integrator import SimConfig, Stepper, run_paths
from .noise import CutoffSpec
from .spectral_core import OperatorSpec, lambda_grid

MIN_PATHS = 32
MIN_LAGS = 4


def theory_space_exponent(d: int, beta: float | None = None) -> float:
    """Spatial Hoelder supremum beta ^ (2 - d/2); beta=None means smooth data."""
    e = 2.0 - d / 2
    return e if beta is None else min(beta, e)


def theory_time_exponent(d: int, beta: float | None = None) -> float:
    e = 0.5 - d / 8
    return e if beta is None else min(beta / 4, e)


def space_window(d: int) -> tuple[float, float]:
    """Acceptance window for the Monte-Carlo spatial exponent (straddles the supremum)."""
    e = theory_space_exponent(d)
    return (e - 0.2, e + 0.1)


def time_window(d: int) -> tuple[float, float]:
    e = theory_time_exponent(d)
    return (e - 0.075, e + 0.075)


@dataclass
class StructureFunction:
    kind: str  # "space" or "time"
    lags: np.ndarray
    moments: np.ndarray
    order: int  # difference order
    fitted_slope: float
    exponent: float
    ci_halfwidth: float
    n_paths: int
    flagged: bool = False
    saturated: bool = False
    notes: list[str] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lag", "moment", "fit"])
            a = self.fitted_intercept()
            for lag, mom in zip(self.lags, self.moments):
                w.writerow([repr(float(lag)), repr(float(mom)),
                            repr(float(math.exp(a + self.fitted_slope * math.log(lag))))])

    def fitted_intercept(self) -> float:
        return float(np.mean(np.log(self.moments)) - self.fitted_slope * np.mean(np.log(self.lags)))

    def summary(self) -> dict:
        return {"kind": self.kind, "order": self.order, "exponent": self.exponent,
                "ci_halfwidth": self.ci_halfwidth, "n_paths": self.n_paths,
                "flagged": self.flagged, "saturated": self.saturated, "notes": list(self.notes)}


def _fit(lags, per_path, order, kind, min_paths, bootstrap, seed):
    """Log-log least squares on path-averaged moments plus a path bootstrap."""
    lags = np.asarray(lags, float)
    M = per_path.shape[0]
    moments = per_path.mean(axis=0)
    notes = []
    flagged = False
    if M < min_paths:
        flagged = True
        notes.append(f"only {M} paths (< {min_paths})")
    if len(lags) < MIN_LAGS:
        flagged = True
        notes.append(f"only {len(lags)} lags (< {MIN_LAGS})")
    if np.any(moments <= 0):
        return StructureFunction(kind, lags, moments, order, math.nan, math.nan, math.inf, M,
                                 True, False, notes + ["non-positive moment"])
    x = np.log(lags)
    slope = float(np.polyfit(x, np.log(moments), 1)[0])
    half = math.inf
    if M >= 2 and bootstrap > 0:
        rng = np.random.default_rng(seed)
        draws = []
        for _ in range(bootstrap):
            idx = rng.integers(0, M, M)
            mb = per_path[idx].mean(axis=0)
            if np.all(mb > 0):
                draws.append(np.polyfit(x, np.log(mb), 1)[0] / 2)
        if draws:
            lo, hi = np.percentile(draws, [2.5, 97.5])
            half = float((hi - lo) / 2)
    exponent = slope / 2
    saturated = exponent >= order - 0.05
    if saturated:
        notes.append(f"saturated: difference order {order} caps the exponent at {order}")
    return StructureFunction(kind, lags, moments, order, slope, exponent, half, M,
                             flagged, saturated, notes)


def _diff(a: np.ndarray, lag: int, axis: int, order: int) -> np.ndarray:
    n = a.shape[axis]

    def sl(start, stop):
        s = [slice(None)] * a.ndim
        s[axis] = slice(start, stop)
        return a[tuple(s)]

    if order == 1:
        return sl(lag, n) - sl(0, n - lag)
    if order == 2:
        return sl(2 * lag, n) - 2 * sl(lag, n - lag) + sl(0, n - 2 * lag)
    raise ValueError("difference order must be 1 or 2")


def holder_space(fields: np.ndarray, d: int, order: int | None = None, lags=None,
                 min_paths: int = MIN_PATHS, bootstrap: int = 200, seed: int = 0
                 ) -> StructureFunction:
    """Spatial exponent from E|delta_h u|^2 ~ h^{2 lambda} on the midpoint grid.

    ``fields`` has shape (paths,) + (N,)*d.  Differences never wrap across the
    boundary and are averaged over all axes.  d = 1 defaults to second
    differences since the expected exponent exceeds 1.
    """
    fields = np.asarray(fields, float)
    if fields.ndim != d + 1:
        raise ValueError(f"expected (paths,) + (N,)*{d}, got {fields.shape}")
    n = fields.shape[-1]
    if order is None:
        order = 2 if d == 1 else 1
    if lags is None:
        lags = [2**j for j in range(10) if order * 2**j <= n // 16] or [1]
    h = math.pi / n
    M = fields.shape[0]
    per_path = np.empty((M, len(lags)))
    for j, lag in enumerate(lags):
        acc = np.zeros(M)
        for axis in range(1, d + 1):
            diff = _diff(fields, lag, axis, order)
            acc += np.mean(diff.reshape(M, -1) ** 2, axis=1)
        per_path[:, j] = acc / d
    return _fit(np.asarray(lags) * h, per_path, order, "space", min_paths, bootstrap, seed)


def holder_time(series: np.ndarray, dt: float, lags=None, starts=None,
                min_paths: int = MIN_PATHS, bootstrap: int = 200, seed: int = 0
                ) -> StructureFunction:
    """Temporal exponent from E|u(x,t+tau) - u(x,t)|^2 ~ tau^{2 mu}.

    ``series`` has shape (paths, times, points) with uniform spacing ``dt``.
    ``starts`` restricts the base times (indices); default uses all of them.
    """
    series = np.asarray(series, float)
    if series.ndim == 2:
        series = series[:, :, None]
    M, T = series.shape[:2]
    series = series.reshape(M, T, -1)
    if lags is None:
        lags = [2**j for j in range(12) if 2**j <= T // 4] or [1]
    per_path = np.empty((M, len(lags)))
    for j, lag in enumerate(lags):
        if starts is None:
            diff = series[:, lag:] - series[:, :-lag]
        else:
            idx = np.asarray([s for s in starts if s + lag < T])
            diff = series[:, idx + lag] - series[:, idx]
        per_path[:, j] = np.mean(diff.reshape(M, -1) ** 2, axis=1)
    return _fit(np.asarray(lags) * dt, per_path, 1, "time", min_paths, bootstrap, seed)


# ---------------------------------------------------------------------------
# mode variances of the linear stochastic convolution


def ito_variance(lam, t: float, op: OperatorSpec):
    """(1 - e^{-2 omega t}) / (2 omega), equal to t at omega = 0."""
    om = op.omega(lam)
    safe = np.where(om > 0, om, 1.0)
    return np.where(om > 0, -np.expm1(-2 * safe * t) / (2 * safe), t)


@dataclass
class SpectralDecay:
    lam: np.ndarray
    empirical: np.ndarray
    theory: np.ndarray
    slope: float  # log-log slope of empirical variance against lambda (k >= 1)
    n_paths: int

    @property
    def ratio(self) -> np.ndarray:
        return self.empirical / self.theory


def spectral_decay(coeffs: np.ndarray, t: float, op: OperatorSpec, d: int = 1,
                   kmax: int | None = None) -> SpectralDecay:
    """Per-mode second moments of samples (paths,) + (N,)*d against the Ito isometry.

    Only the axis modes (k, 0, ..., 0) are reported for d > 1.
    """
    coeffs = np.asarray(coeffs, float)
    M, n = coeffs.shape[0], coeffs.shape[-1]
    kmax = n if kmax is None else kmax
    axis_modes = coeffs[(slice(None), slice(0, kmax)) + (0,) * (d - 1)]
    emp = np.mean(axis_modes**2, axis=0)
    lam = np.arange(kmax, dtype=float) ** 2
    theory = ito_variance(lam, t, op)
    pos = lam > 0
    slope = float(np.polyfit(np.log(lam[pos]), np.log(emp[pos]), 1)[0]) if pos.sum() >= 2 else math.nan
    return SpectralDecay(lam, emp, theory, slope, M)


def zero_mode_growth(times: np.ndarray, samples: np.ndarray) -> tuple[float, float]:
    """Linear fit of E[u_0(t)^2] against t; returns (slope, R^2).

    ``samples`` has shape (paths, times).
    """
    var = np.mean(np.asarray(samples, float) ** 2, axis=0)
    A = np.vstack([times, np.ones_like(times)]).T
    coef, *_ = np.linalg.lstsq(A, var, rcond=None)
    resid = var - A @ coef
    ss_tot = np.sum((var - var.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(r2)


# ---------------------------------------------------------------------------
# sup-norm moments of the stochastic convolution


@dataclass
class MomentReport:
    levels: list[float]
    moments: list[float]  # E sup_{x,t} |L(u_n)|^{2p}
    p: float
    alpha: float
    slope: float
    tolerance: float
    n_paths: int
    flagged: bool = False

    @property
    def bound(self) -> float:
        return 2 * self.alpha * self.p

    @property
    def passed(self) -> bool:
        return self.slope <= self.bound + self.tolerance


def supnorm_moments(levels, p: float, cfg: SimConfig, paths: int | None = None,
                    tolerance: float = 0.5, min_paths: int = MIN_PATHS,
                    chunk: int = 64) -> MomentReport:
    """E ||L(u_n)||_inf^{2p} for each cut-off level n, regressed on log n.

    Every level reuses the same path ids, hence the same noise realisations.
    The sup runs over the nodal grid and all step times.
    """
    if cfg.d != 1 or cfg.n > 128:
        raise ValueError("sup-norm moments are restricted to d = 1, N <= 128")
    paths = cfg.paths if paths is None else paths
    moments = []
    for n_level in levels:
        c = replace(cfg, cutoff=CutoffSpec(n=float(n_level), q=cfg.q))
        sups = []
        for start in range(0, paths, chunk):
            ids = list(range(start, min(paths, start + chunk)))
            sups += [tr.stoch_sup for tr in run_paths(c, ids, track_stochastic=True)]
        moments.append(float(np.mean(np.asarray(sups) ** (2 * p))))
    mom = np.asarray(moments)
    if np.all(mom == 0):
        slope = 0.0
    else:
        slope = float(np.polyfit(np.log(levels), np.log(mom), 1)[0])
    alpha = 0.0 if cfg.sigma.form == "constant" else cfg.sigma.alpha
    return MomentReport(list(map(float, levels)), moments, p, alpha, slope, tolerance, paths,
                        flagged=paths < min_paths)


# ---------------------------------------------------------------------------
# drivers shared by the CLI and the acceptance suite


def simulate_for_regularity(cfg: SimConfig, window: int = 128, chunk: int = 16,
                            probes: int | None = None):
    """Run cfg.paths paths and collect the final nodal fields and a time window.

    Returns (fields, series) with shapes (paths,) + (N,)*d and
    (paths, window + 1, points).  ``probes`` subsamples the spatial points of
    the time series (every ``probes``-th flattened node).
    """
    start = max(0.0, cfg.t_end - window * cfg.dt)
    c = replace(cfg, snapshot_every=1, snapshot_start=start)
    st = Stepper(c)
    fields, series = [], []
    for s in range(0, c.paths, chunk):
        for tr in run_paths(c, list(range(s, min(c.paths, s + chunk)))):
            sel = tr.times >= start - 1e-12
            nod = st.nodal(tr.coeffs[sel])
            fields.append(nod[-1])
            flat = nod.reshape(nod.shape[0], -1)
            if probes:
                flat = flat[:, ::probes]
            series.append(flat)
    return np.array(fields), np.array(series)


def spatial_lags(n: int, d: int) -> list[int]:
    """Dyadic lags in grid units used for the spatial exponent."""
    order = 2 if d == 1 else 1
    top = max(n // 16 if d == 1 else n // 8, 4 * order)
    return [2**j for j in range(10) if 2**j * order <= top][:5]


def time_lags(window: int) -> list[int]:
    return [2**j for j in range(12) if 2**j <= max(window // 4, 8)][:6]


