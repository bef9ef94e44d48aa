"""TOML configuration files and their translation into SimConfig.

Keys are globally unique; tables only group them, so

    d = 1
    [sigma]
    alpha = 0.1

and a fully flat file are equivalent.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np
import tomli

from .integrator import ConfigError, Nonlinearity, SimConfig
from .noise import CutoffSpec, SigmaSpec
from .spectral_core import NodalField, OperatorSpec, SpectralField, grid, to_spectral

DEFAULTS = {
    # model
    "rho": 1.0,
    "qtilde": 1.0,
    "f": [1.0, 0.0, -1.0, 0.0],
    # noise
    "sigma_form": "smooth_sublinear",
    "alpha": 0.1,
    "c_sigma": 1.0,
    "sigma_table_u": None,
    "sigma_table_values": None,
    "cutoff_level": None,
    # discretization
    "d": 1,
    "n_modes": 256,
    "dt": 1e-4,
    "t_end": 0.1,
    "q": 4.0,
    "noise_weighting": "left",
    "dealias": 2.0,
    "snapshot_every": 0,
    "snapshot_start": 0.0,
    # initial condition
    "initial": "zero",
    "initial_value": 0.0,
    "initial_mode": None,
    "initial_amplitude": 1.0,
    "initial_decay": 4.0,
    "initial_beta": 0.5,
    "initial_seed": 0,
    # run
    "seed": 0,
    "paths": 1,
    # green-verify
    "green_d": None,
    "c2": None,
    "t_min": 1e-3,
    "t_max": 1e-1,
    # holder
    "window": 128,
    "min_paths": 32,
}

INITIAL_KINDS = ("zero", "constant", "mode", "smooth_random", "holder")


def flatten(doc: dict) -> dict:
    flat: dict = {}
    for key, val in doc.items():
        items = val.items() if isinstance(val, dict) else [(key, val)]
        for k, v in items:
            if isinstance(v, dict):
                raise ConfigError(f"{key}.{k}: tables nest at most one level")
            if k in flat:
                raise ConfigError(f"{k}: key given twice")
            flat[k] = v
    return flat


def load(path: str | Path) -> dict:
    """Read a TOML file into the resolved flat parameter dict."""
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return resolve(flatten(doc))


def resolve(flat: dict) -> dict:
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    params = dict(DEFAULTS)
    params.update(flat)
    return params


def config_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def initial_field(params: dict, n: int, d: int) -> SpectralField:
    kind = params["initial"]
    if kind not in INITIAL_KINDS:
        raise ConfigError(f"initial: expected one of {INITIAL_KINDS}, got {kind!r}")
    if kind == "zero":
        return SpectralField.zeros(n, d)
    if kind == "constant":
        c = np.zeros((n,) * d)
        c[(0,) * d] = float(params["initial_value"]) * math.pi ** (d / 2)
        return SpectralField(c, d)
    if kind == "mode":
        k = params["initial_mode"]
        if k is None or len(k) != d or any(not 0 <= int(i) < n for i in k):
            raise ConfigError(f"initial_mode: need {d} indices in [0, {n})")
        c = np.zeros((n,) * d)
        c[tuple(int(i) for i in k)] = float(params["initial_amplitude"])
        return SpectralField(c, d)
    if kind == "smooth_random":
        from .integrator import smooth_random_field
        rng = np.random.default_rng(int(params["initial_seed"]))
        return smooth_random_field(n, d, rng, float(params["initial_amplitude"]),
                                   float(params["initial_decay"]))
    return holder_field(n, d, float(params["initial_beta"]), float(params["initial_amplitude"]))


def holder_field(n: int, d: int, beta: float, amplitude: float = 1.0) -> SpectralField:
    """Weierstrass-type sum_j 2^{-j beta} cos(2^j x) per axis, truncated to the grid."""
    if not 0 < beta < 1:
        raise ConfigError(f"initial_beta must lie in (0, 1), got {beta}")
    xs = grid(n, d)
    v = np.zeros((n,) * d)
    j = 0
    while 2**j < n:
        for x in xs:
            v += 2.0 ** (-j * beta) * np.cos(2**j * x)
        j += 1
    return to_spectral(NodalField(amplitude * v, d))


def build(params: dict) -> SimConfig:
    """SimConfig from resolved parameters; raises ConfigError naming the field."""
    try:
        op = OperatorSpec(float(params["rho"]), float(params["qtilde"]))
    except ValueError as exc:
        raise ConfigError(f"rho/qtilde: {exc}") from exc
    f = params["f"]
    nl = Nonlinearity.zero() if f in ("zero", None) else Nonlinearity(tuple(f))
    table = None
    if params["sigma_form"] == "custom_table":
        table = (tuple(params["sigma_table_u"] or ()), tuple(params["sigma_table_values"] or ()))
    try:
        sigma = SigmaSpec(float(params["alpha"]), float(params["c_sigma"]),
                          params["sigma_form"], table)
    except ValueError as exc:
        raise ConfigError(f"sigma: {exc}") from exc
    d, n = int(params["d"]), int(params["n_modes"])
    cut = None
    if params["cutoff_level"] is not None:
        try:
            cut = CutoffSpec(float(params["cutoff_level"]), float(params["q"]))
        except ValueError as exc:
            raise ConfigError(f"cutoff_level: {exc}") from exc
    if d not in (1, 2, 3):
        raise ConfigError(f"d: must be 1, 2 or 3, got {d}")
    return SimConfig(
        op=op, sigma=sigma, cutoff=cut, d=d, n=n, dt=float(params["dt"]),
        t_end=float(params["t_end"]), q=float(params["q"]), u0=initial_field(params, n, d),
        seed=int(params["seed"]), paths=int(params["paths"]), f=nl,
        noise_weighting=params["noise_weighting"], dealias=float(params["dealias"]),
        snapshot_every=int(params["snapshot_every"]),
        snapshot_start=float(params["snapshot_start"]))
