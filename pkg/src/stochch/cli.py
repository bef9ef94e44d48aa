"""Command-line driver: simulate, green-verify, holder.

Exit codes: 0 pass, 1 check failure, 2 inconclusive, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .greens import (
    compose,
    exp_integral_scaling,
    green_eval,
    verify_increment_integrals,
    verify_pointwise_bounds,
)
from .integrator import ConfigError, SimConfig, Stepper, energy_diagnostics, run_paths
from .noise import ALPHA_EXISTENCE_MAX
from .output import sha256_file, write_trajectory
from .regularity import (
    holder_space,
    holder_time,
    simulate_for_regularity,
    space_window,
    spatial_lags,
    theory_space_exponent,
    theory_time_exponent,
    time_lags,
    time_window,
)
from .spectral_core import OperatorSpec

log = logging.getLogger("stochch")

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_CONFIG = 0, 1, 2, 3
OUT_DIR_ENV = "STOCHCH_OUT_DIR"


def _emit(record: dict, sink=None) -> None:
    line = json.dumps(record, sort_keys=True, default=float)
    print(line)
    if sink is not None:
        sink.write(line + "\n")


def _load(args) -> tuple[dict, SimConfig]:
    params = cfgmod.load(args.config) if args.config else cfgmod.resolve({})
    if args.seed is not None:
        params["seed"] = args.seed
    if args.paths is not None:
        params["paths"] = args.paths
    return params, cfgmod.build(params)


def _check_existence_window(cfg: SimConfig, override: bool) -> None:
    sig = cfg.sigma
    if sig.form == "smooth_sublinear" and sig.alpha >= ALPHA_EXISTENCE_MAX:
        msg = f"alpha outside (0,1/9): alpha={sig.alpha}"
        if not override:
            raise ConfigError(msg + " (pass --override-alpha to run anyway)")
        log.warning(msg)
    issues = [i for i in cfg.validate() if not i.startswith("alpha")]
    if issues:
        if not override:
            raise ConfigError("; ".join(issues) + " (pass --override-alpha to run anyway)")
        for i in issues:
            log.warning(i)


def _out_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get(OUT_DIR_ENV, "stochch_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _chunks(ids, k):
    step = max(1, math.ceil(len(ids) / k))
    return [ids[i:i + step] for i in range(0, len(ids), step)]


def _run_chunk(args):
    cfg, ids = args
    return run_paths(cfg, ids)


def run_parallel(cfg: SimConfig, ids: list[int], workers: int) -> list:
    """Fan paths out over processes; results do not depend on the pool size."""
    if workers <= 1 or len(ids) <= 1:
        return run_paths(cfg, ids)
    chunks = _chunks(ids, workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(cfg, c) for c in chunks]))
    return [tr for part in parts for tr in part]


# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    params, cfg = _load(args)
    _check_existence_window(cfg, args.override_alpha)
    out = _out_dir(args)
    chash = cfgmod.config_hash(params)
    started = datetime.now(timezone.utc).isoformat()
    trajs = run_parallel(cfg, list(range(cfg.paths)), args.workers)
    files = []
    for tr in trajs:
        files += write_trajectory(out, tr, chash, cfg.seed)
        rep = energy_diagnostics(tr, cfg)
        csv_path = out / f"energy_path{tr.path_id:05d}.csv"
        rep.to_csv(csv_path)
        files.append(csv_path)
    blown = sum(tr.blowup for tr in trajs)
    manifest = {
        "config_hash": chash,
        "seed": cfg.seed,
        "code_version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "params": params,
        "paths": cfg.paths,
        "blowup_rate": blown / max(1, cfg.paths),
        "files": [{"name": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size}
                  for p in files],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    print(json.dumps({"name": "simulate", "out_dir": str(out), "config_hash": chash,
                      "paths": cfg.paths, "blowup_rate": manifest["blowup_rate"]}))
    return EXIT_PASS


def green_suite(params: dict) -> list[dict]:
    """All kernel checks for one dimension as report records with pass flags."""
    d = int(params["green_d"] or params["d"])
    op = OperatorSpec(float(params["rho"]), float(params["qtilde"]))
    c2 = params["c2"]
    t_min, t_max = float(params["t_min"]), float(params["t_max"])
    # d = 3 runs a reduced grid with coarser exponent tolerances
    if d == 3:
        t_grid, n_space, tol0, tol_t = np.logspace(math.log10(t_min), math.log10(t_max), 5), 16, 0.1, 0.15
    else:
        t_grid, n_space, tol0, tol_t = np.logspace(math.log10(t_min), math.log10(t_max), 9), (
            41 if d == 1 else 24), 0.05, 0.1
    records = []
    derivs = [None, "t", (1,) + (0,) * (d - 1), (2,) + (0,) * (d - 1)]
    for der in derivs:
        fit = verify_pointwise_bounds(d, op, t_grid, n_space, der, c2=c2)
        rec = fit.to_record()
        if der in (None, "t"):
            tol = tol0 if der is None else tol_t
            ok_exp = abs(fit.exponent_fit - fit.exponent_theory) <= tol
            rec["exponent_tolerance"] = tol
            rec["pass"] = bool(fit.passed and ok_exp)
        else:
            rec["pass"] = bool(fit.passed)
        records.append(rec)

    rep = exp_integral_scaling(1.0, [1.0, 16.0], d)
    ratio = rep.values[1] / rep.values[0]
    records.append({"name": f"exp_integral_scaling_d{d}", "ratio_16_1": ratio,
                    "expected": 2.0**d, "exponent": rep.exponent,
                    "pass": bool(abs(ratio / 2**d - 1) < 0.01)})

    x = np.full(d, 1.0)
    y = np.full(d, 0.4)
    t, s = 0.02, 0.01
    for lap in (False, True):
        kind = "laplacian" if lap else "plain"
        err = abs(compose(x, y, t, s, op, with_laplacian=lap) - green_eval(x, y, t, op, kind=kind))
        records.append({"name": f"compose_{kind}_d{d}", "error": err, "pass": bool(err < 1e-8)})

    if d <= 2:
        gp = 0.75 if d == 1 else 0.5
        inc = verify_increment_integrals(d, op, gamma=2.0, gamma_prime=gp, K=128 if d == 1 else 48)
        rec = inc.to_record()
        rec["pass"] = bool(inc.passed)
        records.append(rec)
    return records


def cmd_green_verify(args) -> int:
    params = cfgmod.load(args.config) if args.config else cfgmod.resolve({})
    if args.c2 is not None:
        params["c2"] = args.c2
    t0 = time.time()
    sink = None
    if args.out_dir or os.environ.get(OUT_DIR_ENV):
        sink = open(_out_dir(args) / "green_report.jsonl", "w")
    try:
        records = green_suite(params)
        for r in records:
            _emit(r, sink)
        ok = all(r["pass"] for r in records)
        _emit({"name": "green_verify_summary", "pass": ok, "checks": len(records),
               "failed": [r["name"] for r in records if not r["pass"]],
               "seconds": round(time.time() - t0, 2)}, sink)
    finally:
        if sink is not None:
            sink.close()
    return EXIT_PASS if ok else EXIT_FAIL


def holder_report(params: dict, cfg: SimConfig) -> dict:
    """Exponent table with bootstrap intervals and the acceptance windows."""
    d = cfg.d
    window = int(params["window"])
    deterministic = cfg.sigma.is_zero
    min_paths = 1 if deterministic else int(params["min_paths"])
    if deterministic:
        # regularity inherited from u0 is visible at the start of the flow
        c = replace(cfg, paths=1, t_end=window * cfg.dt, snapshot_every=1, snapshot_start=0.0)
        tr = run_paths(c, [0])[0]
        nod = Stepper(c).nodal(tr.coeffs)
        fields = nod[-1:]
        series = nod.reshape(1, nod.shape[0], -1)
        sf = holder_space(fields, d, lags=spatial_lags(cfg.n, d), min_paths=1, bootstrap=0)
        tf = holder_time(series, cfg.dt, lags=time_lags(window), starts=[0], min_paths=1,
                         bootstrap=0)
        beta = float(params["initial_beta"])
        sp_ok = sf.exponent >= beta - 0.05 if params["initial"] == "holder" else True
        tm_ok = tf.exponent >= beta / 4 - 0.05 if params["initial"] == "holder" else True
        windows = {"space": [beta, None], "time": [beta / 4, None]}
    else:
        if cfg.noise_weighting == "left":
            top = float(cfg.op.omega(cfg.d * (cfg.n - 1) ** 2)) * cfg.dt
            if top > 1:
                log.warning("left-point noise weighting damps modes with omega*dt >> 1 "
                            "(max %.3g); exponents will be biased upward, consider "
                            "noise_weighting = \"exact\"", top)
        fields, series = simulate_for_regularity(cfg, window=window, probes=max(1, cfg.n ** d // 512))
        sf = holder_space(fields, d, lags=spatial_lags(cfg.n, d), min_paths=min_paths)
        tf = holder_time(series, cfg.dt, lags=time_lags(window), min_paths=min_paths)
        ws, wt = space_window(d), time_window(d)
        sp_ok = ws[0] <= sf.exponent <= ws[1]
        tm_ok = wt[0] <= tf.exponent <= wt[1]
        windows = {"space": list(ws), "time": list(wt)}
    flagged = sf.flagged or tf.flagged
    return {
        "name": "holder",
        "d": d,
        "paths": cfg.paths if not deterministic else 1,
        "space": sf.summary(),
        "time": tf.summary(),
        "theory": {"space": theory_space_exponent(d), "time": theory_time_exponent(d)},
        "windows": windows,
        "space_pass": bool(sp_ok),
        "time_pass": bool(tm_ok),
        "flagged": bool(flagged),
    }


def cmd_holder(args) -> int:
    params, cfg = _load(args)
    _check_existence_window(cfg, args.override_alpha)
    rep = holder_report(params, cfg)
    sink = None
    if args.out_dir or os.environ.get(OUT_DIR_ENV):
        sink = open(_out_dir(args) / "holder_report.jsonl", "w")
    try:
        _emit(rep, sink)
    finally:
        if sink is not None:
            sink.close()
    if rep["flagged"]:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS if rep["space_pass"] and rep["time_pass"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochch", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--paths", type=int)
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or ./stochch_out)")
        sp.add_argument("--override-alpha", action="store_true",
                        help="run even if alpha or q leave the existence window")

    sim = sub.add_parser("simulate", help="integrate paths and write trajectories")
    common(sim)
    sim.set_defaults(func=cmd_simulate)

    gv = sub.add_parser("green-verify", help="numerically certify the kernel estimates")
    common(gv)
    gv.add_argument("--c2", type=float, help="pin the decay constant instead of fitting it")
    gv.set_defaults(func=cmd_green_verify)

    ho = sub.add_parser("holder", help="estimate space/time Hoelder exponents")
    common(ho)
    ho.set_defaults(func=cmd_holder)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
