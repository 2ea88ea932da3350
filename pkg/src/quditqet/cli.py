"""Command-line entry point.

Every subcommand reads a scenario file, writes its artifacts into the output
directory and returns 0 on success, 2 on validation errors and 3 when a
numerical contract (dual evaluations, oracle agreement, density integrals)
is violated.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import engine as eng
from . import oracle as orc
from . import profiles as prof
from . import scaling
from . import wigner as wg
from .scenario import Scenario, ScenarioError, load_scenario, resolve_initial_state
from .weyl import InvalidChiError, InvalidDimensionError, z_eigenstate

log = logging.getLogger("quditqet")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONTRACT = 3

DENSITY_RTOL = 1e-4
ORACLE_RTOL = 1e-6
NOISE_RTOL = 2e-2

_VALIDATION_ERRORS = (ScenarioError, eng.SupportOverlapError, prof.ProfileError, prof.SingularKernelError,
                      scaling.InvalidExponentError, scaling.InvalidNoiseTableError,
                      orc.InsufficientCutoffError, InvalidDimensionError, InvalidChiError)


class ContractFailure(Exception):
    """Raised after outputs are written when a checked quantity is out of tolerance."""


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _rel(x: float, y: float) -> float:
    return abs(x - y) / max(abs(y), 1e-300)


def _wants(sc: Scenario, fmt: str) -> bool:
    return fmt in sc.output.formats


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_report(sc: Scenario, out: Path, seed: int, threads: int) -> int:
    cfg = sc.require("protocol")
    report = eng.delta_e(cfg)
    payload = {"config": sc.protocol_record, "config_hash": orc.config_hash(cfg), **report.to_record()}
    if _wants(sc, "json"):
        write_json(out / "report.json", payload)
    print(f"E_A={report.e_a:.12g}  delta_e={report.delta_e:.12g}  teleport={report.teleport_term:.12g}  "
          f"regime={report.regime}")
    return EXIT_OK


def cmd_density(sc: Scenario, out: Path, seed: int, threads: int) -> int:
    cfg = sc.require("protocol")
    grid = eng.default_grid(cfg, sc.density.points, sc.density.tail_widths)
    report = eng.delta_e(cfg)
    with ThreadPoolExecutor(max_workers=max(1, min(threads, 2))) as pool:
        fa = pool.submit(eng.energy_density_a, cfg, grid)
        fb = pool.submit(eng.energy_density_b, cfg, grid, report.alpha_norm_sq)
        curve_a, curve_b = fa.result(), fb.result()
    int_a, int_b = curve_a.integral(), curve_b.integral()
    gap_a = _rel(int_a, report.e_a)
    gap_b = _rel(int_b, report.e_a + report.delta_e)
    ib = int(np.argmin(curve_b.values))
    summary = {
        "config": sc.protocol_record,
        "config_hash": orc.config_hash(cfg),
        "points": int(grid.size),
        "integral_a": int_a, "expected_a": report.e_a, "rel_gap_a": gap_a,
        "integral_b": int_b, "expected_b": report.e_a + report.delta_e, "rel_gap_b": gap_b,
        "tail_mass_a": curve_a.tail_mass, "tail_mass_b": curve_b.tail_mass,
        "min_density_b": float(curve_b.values[ib]), "argmin_density_b": float(grid[ib]),
        "negative_density": bool(curve_b.values[ib] < 0),
        "tolerance": DENSITY_RTOL,
        "pass": bool(max(gap_a, gap_b) < DENSITY_RTOL),
    }
    if _wants(sc, "csv"):
        curve_a.to_csv(out / "density_a.csv")
        curve_b.to_csv(out / "density_b.csv")
    if _wants(sc, "json"):
        write_json(out / "density.json", summary)
    print(f"int E_A(x) gap={gap_a:.2e}  int E_B(x) gap={gap_b:.2e}  min E_B={curve_b.values[ib]:.6g} "
          f"at x={grid[ib]:.6g}")
    if not summary["pass"]:
        raise ContractFailure(f"density integral gap {max(gap_a, gap_b):.3e} exceeds {DENSITY_RTOL:.0e}")
    return EXIT_OK


def cmd_scan_theta(sc: Scenario, out: Path, seed: int, threads: int) -> int:
    cfg = sc.require("protocol")
    spec = sc.require("scan.theta")
    scan = scaling.theta_scan(cfg, spec.thetas, spec.epsilon, threads=threads)
    slope, r2 = scan.top_decade_fit()
    star = scan.theta_star()
    summary = {"config_hash": orc.config_hash(cfg), "epsilon": spec.epsilon, "thetas": list(spec.thetas),
               "theta_star": star, "top_decade_slope": slope, "top_decade_r2": r2,
               "im_gamma_tolerance": 1e-3, "r2_threshold": 0.999}
    if _wants(sc, "csv"):
        scan.to_csv(out / "theta_scan.csv")
    if _wants(sc, "json"):
        write_json(out / "theta_scan.json", summary)
    print(f"theta*={star}  top-decade slope={slope:.6g}  R^2={r2:.8f}")
    return EXIT_OK


def cmd_scan_eta(sc: Scenario, out: Path, seed: int, threads: int) -> int:
    cfg = sc.require("protocol")
    spec = sc.require("scan.eta")
    scan = scaling.eta_scan(cfg, spec.etas, spec.epsilon, threads=threads,
                            density_points=spec.density_points)
    eps = spec.epsilon
    targets = {"teleported_energy": eps, "min_density": -3 * eps, "min_teleport_density": -3 * eps,
               "margin_coupling": -eps, "margin_locality": -eps}
    slopes = {}
    for name, target in targets.items():
        s, r2 = scan.slope(name)
        slopes[name] = {"slope": s, "r2": r2, "target": target, "abs_error": abs(s - target)}
    summary = {"config_hash": orc.config_hash(cfg), "epsilon": eps, "etas": list(spec.etas),
               "slopes": slopes, "slope_tolerance": 0.05, "sigma_threshold": scan.sigma_threshold(),
               "margins_below_threshold": [scaling.margins_satisfied((p.margin_coupling, p.margin_locality))
                                           for p in scan.points]}
    if _wants(sc, "csv"):
        scan.to_csv(out / "eta_scan.csv")
    if _wants(sc, "json"):
        write_json(out / "eta_scan.json", summary)
    for name, row in slopes.items():
        print(f"{name:22s} slope={row['slope']:+.4f} target={row['target']:+.4f}")
    return EXIT_OK


def _oracle_configs(sc: Scenario):
    base = sc.require("protocol")
    spec = sc.oracle
    for d in spec.d_values or (base.d,):
        state, _ = resolve_initial_state(sc.initial_rule, d, base.profile_a, base.profile_b)
        for delay in spec.delays or (base.delay,):
            cfg = replace(base, d=d, initial_state=state, delay=delay)
            for n in spec.modes:
                yield cfg, orc.ModeGrid(n, spec.d_omega)


def cmd_oracle(sc: Scenario, out: Path, seed: int, threads: int) -> int:
    spec = sc.require("oracle")
    trunc = orc.FockTruncation(spec.n_max)
    jobs = list(_oracle_configs(sc))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        reports = list(pool.map(lambda job: orc.oracle_report(job[0], job[1], trunc, ORACLE_RTOL), jobs))
    print(f"{'hash':16s} {'d':>3s} {'N':>2s} {'T':>6s} {'gap E_A':>10s} {'gap dE':>10s} {'cl-q':>10s}")
    for (cfg, grid), rep in zip(jobs, reports):
        g = rep["relative_gaps"]
        print(f"{rep['config_hash']} {cfg.d:3d} {grid.n_modes:2d} {cfg.delay:6.3g} "
              f"{g['e_a']:10.2e} {g['delta_e']:10.2e} {rep['classical_abs_gap']:10.2e}")
    payload = {"reports": reports, "n_max": spec.n_max, "seed": seed}
    ok = all(r["pass"] for r in reports)
    worst = max(max(r["relative_gaps"].values()) for r in reports)
    if spec.noise_table is not None:
        noise = scaling.WeylNoiseModel(spec.noise_table)
        cfg, grid = jobs[0]
        clean = orc.simulate(cfg, grid, trunc).teleport
        mean, stderr = orc.noisy_teleport_mc(cfg, grid, trunc, noise, spec.shots, seed)
        factor = scaling.noise_factor(noise)
        gap = _rel(mean, clean * factor)
        payload["noise"] = {"shots": spec.shots, "seed": seed, "noiseless_teleport": clean,
                            "mc_mean": mean, "mc_stderr": stderr, "cos_factor": factor,
                            "exact_phase_factor": scaling.noise_phase_factor(noise),
                            "rel_gap": gap, "tolerance": NOISE_RTOL, "pass": bool(gap < NOISE_RTOL)}
        ok = ok and gap < NOISE_RTOL
        print(f"noise: MC mean/noiseless={mean / clean:.5f}  factor={factor:.5f}  gap={gap:.2e}")
    payload["worst_relative_gap"] = worst
    payload["pass"] = bool(ok)
    if _wants(sc, "json"):
        write_json(out / "oracle.json", payload)
    print(f"worst relative gap {worst:.3e}")
    if not ok:
        raise ContractFailure(f"oracle contract failed; worst relative gap {worst:.3e}")
    return EXIT_OK


def _panel(spec, d: int):
    initial = None if spec.initial == "xz" or d == 1 else z_eigenstate(d, 0)
    return wg.figure_panel(d, spec.alpha, spec.outcome, spec.resolution, spec.extent, initial)


def cmd_wigner(sc: Scenario, out: Path, seed: int, threads: int) -> int:
    spec = sc.require("wigner")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        panels = list(pool.map(lambda d: _panel(spec, d), spec.panels))
    rows = []
    for d, (state, q, p, w) in zip(spec.panels, panels):
        wg.write_raster(out / f"wigner_d{d}.wigr", w)
        if _wants(sc, "csv"):
            wg.write_csv(out / f"wigner_d{d}.csv", w, q, p)
        rows.append({"d": d, "normalization": wg.grid_integral(w, q, p), "lobes": wg.count_lobes(state),
                     "isotropy": wg.isotropy_metric(state), "min": float(w.min()), "max": float(w.max()),
                     "q_range": [float(q[0]), float(q[-1])], "resolution": spec.resolution})
        print(f"d={d:3d}  norm={rows[-1]['normalization']:.8f}  lobes={rows[-1]['lobes']}  "
              f"isotropy={rows[-1]['isotropy']:.4f}")
    iso = [r["isotropy"] for r in rows]
    summary = {"alpha": spec.alpha, "outcome": spec.outcome, "initial": spec.initial, "panels": rows,
               "normalization_tolerance": 1e-3,
               "isotropy_decreasing": bool(all(b < a for a, b in zip(iso, iso[1:])))}
    if _wants(sc, "json"):
        write_json(out / "wigner.json", summary)
    return EXIT_OK


COMMANDS = {
    "report": cmd_report,
    "density": cmd_density,
    "scan-theta": cmd_scan_theta,
    "scan-eta": cmd_scan_eta,
    "oracle": cmd_oracle,
    "wigner": cmd_wigner,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quditqet", description="Qudit quantum energy teleportation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, type=Path, help="YAML scenario file")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the scenario seed)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        sc = load_scenario(args.scenario)
        out = args.out if args.out is not None else sc.output.directory
        out.mkdir(parents=True, exist_ok=True)
        seed = args.seed if args.seed is not None else sc.seed
        return COMMANDS[args.command](sc, out, seed, args.threads)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (eng.NumericalContractError, ContractFailure) as exc:
        print(f"numerical contract failure: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
