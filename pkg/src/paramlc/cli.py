"""Command-line front end: sweeps, data emitters, oracle checks, manifests.

Every run writes CSV files (17 significant digits) and ``manifest.json``
into the output directory.  Exit status is 0 only when every requested
computation succeeded within its tolerances.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from . import __version__, exact_ness, fockspace, liouville, semiclassics, stochastics, vdp
from .config import COMMANDS, RunConfig, build_config, jsonable, load_config_file
from .errors import ConfigInvalid, ParamLCError

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


class ToleranceFailure(Exception):
    """A computation finished but missed its acceptance tolerance."""


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def version_string() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5,
        )
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("PARAMLC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigInvalid(f"PARAMLC_THREADS must be an integer, got {env!r}") from None
    return 1


def run_points(fn: Callable, args: list, threads: int) -> list:
    """Map ``fn`` over ``args`` keeping input order in the result."""
    if threads <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*args)))


def _sweep_header(cfg: RunConfig) -> list[str]:
    return [ax.var for ax in cfg.sweep]


def _sweep_values(cfg: RunConfig, point: dict) -> list:
    return [point[ax.var] for ax in cfg.sweep]


# ---------------------------------------------------------------------------
# per-point workers (module level so they pickle)


def _ness_point(cfg: RunConfig, point: dict) -> list:
    p = cfg.model_params(point)
    n = exact_ness.mean_photon_number(p)
    if p.D > 0:
        F = exact_ness.fano(p)
        op = exact_ness.order_parameter(p)
    else:
        # no photons: Fano factor and order parameter are undefined
        F = op = math.nan
    return [n, F, op, str(exact_ness.classify_phase(p))]


def _entanglement_point(cfg: RunConfig, point: dict) -> dict:
    p = cfg.model_params(point)
    num = cfg.numerics_at(point)
    try:
        return fockspace.ness_entanglement_row(p, num.cutoff)
    except fockspace.CutoffTooSmall as exc:
        raise fockspace.CutoffTooSmall(f"D={p.D}: {exc}") from None


def _vdp_point(cfg: RunConfig, point: dict) -> list:
    vp = cfg.vdp_params(point)
    return [vdp.vdp_mean_photon(vp), vdp.vdp_fano(vp)]


# ---------------------------------------------------------------------------
# commands


def cmd_ness(cfg: RunConfig, out: Path, threads: int) -> dict:
    pts = cfg.points()
    rows = run_points(_ness_point, [(cfg, pt) for pt in pts], threads)
    write_csv(
        out / "ness.csv",
        _sweep_header(cfg) + ["mean_n", "fano", "order_parameter", "phase"],
        (_sweep_values(cfg, pt) + r for pt, r in zip(pts, rows)),
    )
    return {"files": ["ness.csv"], "points": len(pts)}


def cmd_entanglement(cfg: RunConfig, out: Path, threads: int) -> dict:
    if cfg.model_params({}).N != 2:
        raise ConfigInvalid("entanglement requires N = 2")
    pts = cfg.points()
    rows = run_points(_entanglement_point, [(cfg, pt) for pt in pts], threads)
    cols = ["D", "E_N_a", "E_N_b", "E_N_ratio_to_TMST", "purity", "photons"]
    extra = [v for v in _sweep_header(cfg) if v != "D"]
    write_csv(
        out / "entanglement.csv",
        extra + cols,
        ([pt[v] for v in extra] + [r[c] for c in cols] for pt, r in zip(pts, rows)),
    )
    files = ["entanglement.csv"]
    if cfg.numerics.dump:
        # binary DensityMatrix dumps in both bases, layout documented in the README
        for k, pt in enumerate(pts):
            p = cfg.model_params(pt)
            cutoff = cfg.numerics_at(pt).cutoff
            for tag, build in (("a", fockspace.build_ness_density_matrix), ("b", fockspace.to_b_basis)):
                name = f"rho_{tag}_{k:03d}.plcdm"
                build(p, cutoff).save(out / name)
                files.append(name)
    return {"files": files, "points": len(pts)}


def _initial_amplitudes(N: int, seed: int, scale: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return scale * (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / math.sqrt(2)


def cmd_dynamics(cfg: RunConfig, out: Path, threads: int) -> dict:
    files, summaries = [], []
    for k, pt in enumerate(cfg.points()):
        p = cfg.model_params(pt)
        num = cfg.numerics_at(pt)
        a0 = _initial_amplitudes(p.N, num.seed, num.seed_amplitude)
        traj = semiclassics.integrate(p, a0, num.T, num.dt, num.every)
        name = "trajectory.csv" if not cfg.sweep else f"trajectory_{k:03d}.csv"
        write_csv(out / name, traj.header(), traj.rows())
        files.append(name)
        s: dict[str, Any] = {"point": pt, "params": p.to_dict(), "n_ss": traj.n_ss, "n_final": traj.n[-1]}
        if p.above_threshold:
            s["y_residual"], s["x_residual"] = traj.attractor_residuals()
            rep = semiclassics.linear_stability(p)
            s["stability"] = {"zero": rep.zero_modes, "damped": rep.damped_modes,
                              "radial_re": rep.radial_pair.real, "radial_im": np.imag(rep.radial_pair)}
            if p.N >= 2:
                ph = traj.ring_phase()
                half = len(ph) // 2
                s["phase_rate"] = float(np.polyfit(traj.t[half:], ph[half:], 1)[0])
        else:
            s["amplitude_final"] = float(np.linalg.norm(traj.a[-1]))
        summaries.append(s)
    write_json(out / "dynamics.json", summaries)
    return {"files": files + ["dynamics.json"]}


def cmd_torus(cfg: RunConfig, out: Path, threads: int) -> dict:
    files, summaries = [], []
    for k, pt in enumerate(cfg.points()):
        p = cfg.model_params(pt)
        num = cfg.numerics_at(pt)
        a0 = _initial_amplitudes(p.N, num.seed, num.seed_amplitude)
        tor = semiclassics.torus_trajectory(p, a0, num.T, num.dt, num.every)
        name = "torus.csv" if not cfg.sweep else f"torus_{k:03d}.csv"
        write_csv(out / name, tor.header(), tor.rows())
        files.append(name)
        lam = tor.block_form.lambdas
        half = len(tor.t) // 2
        norm_dev = np.abs(tor.norm_constraint()[half:] - tor.n_ss) / tor.n_ss
        summaries.append({
            "point": pt,
            "params": p.to_dict(),
            "lambdas": lam,
            "frequencies": tor.frequencies(),
            "expected_frequencies": p.h * lam,
            "classification": semiclassics.torus_classify(lam[lam > 0]) if np.sum(lam > 0) >= 2 else "periodic",
            "norm_constraint_max_rel_dev": float(norm_dev.max()),
            "n_ss": tor.n_ss,
        })
    write_json(out / "torus.json", summaries)
    return {"files": files + ["torus.json"]}


def cmd_diffusion(cfg: RunConfig, out: Path, threads: int) -> dict:
    files, summaries = [], []
    for k, pt in enumerate(cfg.points()):
        p = cfg.model_params(pt)
        num = cfg.numerics_at(pt)
        est = stochastics.simulate_phase_sde(p, num.n_traj, num.T, num.dt, num.seed)
        name = "diffusion.csv" if not cfg.sweep else f"diffusion_{k:03d}.csv"
        write_csv(out / name, ["t", "var_phi", "mean_phi"], zip(est.t, est.var_phi, est.mean_phi))
        files.append(name)
        n_ss = exact_ness.semiclassical_nss(p)
        st_ref = p.kappa / (4 * n_ss)
        s = est.summary()
        s.update({
            "point": pt,
            "params": p.to_dict(),
            "ratio_to_ST": stochastics.schawlow_townes_ratio(p),
            "ratio_to_ST_measured": est.d_phi_hat / st_ref,
            "r": stochastics.pump_ratio(p),
            "z_score": est.z_score,
        })
        summaries.append(s)
    write_json(out / "diffusion.json", summaries[0] if not cfg.sweep else summaries)
    return {"files": files + ["diffusion.json"]}


def cmd_vdp(cfg: RunConfig, out: Path, threads: int) -> dict:
    if cfg.sweep:
        pts = cfg.points()
        rows = run_points(_vdp_point, [(cfg, pt) for pt in pts], threads)
        write_csv(out / "vdp.csv", _sweep_header(cfg) + ["mean_n", "fano"],
                  (_sweep_values(cfg, pt) + r for pt, r in zip(pts, rows)))
        return {"files": ["vdp.csv"], "points": len(pts)}
    vp = cfg.vdp_params({})
    m_max = cfg.numerics.m_max or vdp.auto_m_max(vp)
    rho = vdp.vdp_fock_distribution(vp, m_max)
    write_csv(out / "vdp_distribution.csv", ["m", "rho_m"], zip(range(len(rho)), rho))
    summary = {
        "params": vp.to_dict(),
        "a": vp.a,
        "b": vp.b,
        "mean_n": vdp.vdp_mean_photon(vp),
        "fano": vdp.vdp_fano(vp),
        "m_max": m_max,
        "recursion_residual": vdp.recursion_residual(vp, rho),
    }
    write_json(out / "vdp.json", summary)
    return {"files": ["vdp_distribution.csv", "vdp.json"]}


def oracle_comparison(params, cutoff: int, tol: float) -> list[dict]:
    """Liouvillian null vector vs closed forms and the purification build."""
    base = params.with_(h=0.0)
    rho_L0 = liouville.steady_state(base, cutoff)
    rho_F = fockspace.build_ness_density_matrix(base, cutoff)
    rows = []

    def add(name, oracle, ref):
        rel = abs(oracle - ref) / max(abs(ref), 1e-300)
        rows.append({"quantity": name, "oracle": oracle, "reference": ref, "rel_err": rel,
                     "tolerance": tol, "pass": rel <= tol})

    add("mean_n", rho_L0.photon_number(), exact_ness.mean_photon_number(base))
    add("fano", rho_L0.fano(), exact_ness.fano(base))
    add("log_negativity", fockspace.log_negativity(rho_L0), fockspace.log_negativity(rho_F))
    if params.h != 0:
        rho_Lh = liouville.steady_state(params, cutoff)
        add("mean_n(h)/mean_n(0)", rho_Lh.photon_number(), rho_L0.photon_number())
        add("fano(h)/fano(0)", rho_Lh.fano(), rho_L0.fano())
        add("log_negativity(h)/log_negativity(0)", fockspace.log_negativity(rho_Lh),
            fockspace.log_negativity(rho_L0))
    return rows


def cmd_oracle_check(cfg: RunConfig, out: Path, threads: int) -> dict:
    p = cfg.model_params({})
    rows = oracle_comparison(p, cfg.numerics.cutoff, cfg.numerics.tolerance)
    cols = ["quantity", "oracle", "reference", "rel_err", "tolerance", "pass"]
    write_csv(out / "oracle_check.csv", cols, ([r[c] for c in cols] for r in rows))
    worst = max(r["rel_err"] for r in rows)
    status = "PASS" if all(r["pass"] for r in rows) else "FAIL"
    write_json(out / "oracle_check.json", {"status": status, "max_rel_err": worst, "rows": rows})
    print(f"oracle-check {status}: max relative error {worst:.3e}")
    if status != "PASS":
        raise ToleranceFailure(f"oracle-check failed: max relative error {worst:.3e}")
    return {"files": ["oracle_check.csv", "oracle_check.json"], "max_rel_err": worst}


HANDLERS = {
    "ness": cmd_ness,
    "entanglement": cmd_entanglement,
    "dynamics": cmd_dynamics,
    "torus": cmd_torus,
    "diffusion": cmd_diffusion,
    "vdp": cmd_vdp,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="paramlc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"paramlc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp_ = sub.add_parser(name)
        sp_.add_argument("--config", metavar="PATH", help="JSON run configuration")
        sp_.add_argument("--out", metavar="DIR", help="output directory (default out/<command>)")
        sp_.add_argument("--seed", type=int)
        sp_.add_argument("--threads", type=int, help="worker processes (env PARAMLC_THREADS)")
        sp_.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                         help="override a config entry, e.g. params.D=0.5 (repeatable)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        doc = load_config_file(args.config) if args.config else {}
        cfg = build_config(args.command, doc, args.overrides, args.seed, args.out)
        threads = resolve_threads(args.threads)
    except ConfigInvalid as exc:
        print(f"paramlc: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg.output.get("dir") or Path("out") / args.command)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict[str, Any] = {
        "command": args.command,
        "config": cfg.raw,
        "version": version_string(),
        "seed": cfg.numerics.seed,
        "threads": threads,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    code = EXIT_OK
    try:
        manifest.update(HANDLERS[args.command](cfg, out, threads))
        manifest["status"] = "ok"
    except ConfigInvalid as exc:
        manifest.update(status="config_invalid", error=str(exc))
        print(f"paramlc: invalid configuration: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except (ParamLCError, ToleranceFailure, ArithmeticError, ValueError) as exc:
        manifest.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        print(f"paramlc: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_FAILED
    manifest["wall_time_s"] = time.perf_counter() - start
    write_json(out / "manifest.json", manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())
