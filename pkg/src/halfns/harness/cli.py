"""Command line entry point: ``halfns <command> [--config ...]``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import Config, ConfigError, load_config
from .scenarios import generate_initial_data, scenario_from_config

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _load(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    over = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        over.update(run__seed=args.seed, scenario__seed=args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        over["run__threads"] = args.threads
    if args.level is not None:
        if args.level < 1:
            raise ConfigError("--level must be positive")
        over["run__level"] = args.level
    return cfg.override(**over) if over else cfg


def _scenario(cfg):
    spec = scenario_from_config(cfg)
    lvl = cfg["run.level"]
    if lvl > 1:
        spec = spec.with_grid(spec.grid.refined(lvl))
    try:
        return spec, generate_initial_data(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_heat(cfg, out: Path) -> int:
    from ..kernels import heat_decay_profile

    spec, u0 = _scenario(cfg)
    prof = heat_decay_profile(u0, spec.time_grid, spec.p, spec.alpha)
    _write_csv(out / "heat.csv", ["t", "weighted_norm"], zip(spec.time_grid.times, prof))
    from ..grid import save_field
    save_field(u0, out / f"{spec.name}_u0.bin")
    print(f"heat: sup_t t^(alpha/2) ||u(t)||_p = {prof.max():.6g}")
    return EXIT_OK


def cmd_besov(cfg, out: Path) -> int:
    from ..besov import BesovParams, besov_norm

    spec, u0 = _scenario(cfg)
    rep = besov_norm(u0, BesovParams(-1 + spec.n / spec.p, spec.p))
    _write_csv(out / "besov.csv", ["j", "weighted_band_norm"], sorted(rep.bands.items()))
    flag = " (truncated)" if rep.truncated else ""
    print(f"besov: critical norm {rep.value:.6g}, peak band {rep.argmax}{flag}")
    return EXIT_OK


def cmd_stokes(cfg, out: Path) -> int:
    from ..grid import lp_norm, save_field
    from ..stokes import StokesProblem, solve_homogeneous

    spec, u0 = _scenario(cfg)
    sol = solve_homogeneous(StokesProblem(u0, None, spec.time_grid))
    rows = [(d["t"], lp_norm(u, spec.p), d["divergence"], d["trace"])
            for d, u in zip(sol.diagnostics, sol.velocity.fields)]
    _write_csv(out / "stokes.csv", ["t", "lp_norm", "divergence", "trace"], rows)
    save_field(u0, out / f"{spec.name}_u0.bin")
    save_field(sol.velocity.fields[-1], out / f"{spec.name}_final.bin")
    res = sol.max_residuals()
    print(f"stokes: max divergence {res['divergence']:.3e}, max trace {res['trace']:.3e}")
    return EXIT_OK


def cmd_ns_iterate(cfg, out: Path) -> int:
    from ..picard import SmallnessViolated, contraction_report, iterate
    from .checks import _calibrate, _picard_setup

    budget, amp = _calibrate(cfg)
    _, tg, crit = _picard_setup(cfg, 1)
    scale = cfg["scenario.amplitude"]
    try:
        st = iterate(crit * (amp * scale), budget, cfg["picard.m_max"], cfg["picard.stop_tol"], tg)
    except SmallnessViolated as exc:
        print(f"ns-iterate: {exc}")
        return EXIT_FAIL
    rows = contraction_report(st)
    cols = ["m", "diff_Lp0", "diff_Besov", "ratio_Lp0", "ratio_Besov", "A_combined",
            "ratio_combined"]
    _write_csv(out / "picard.csv", cols, [[r[c] for c in cols] for r in rows])
    print(f"ns-iterate: amplitude {amp * scale:.4g}, {st.m} iterates, converged={st.converged}")
    return EXIT_OK if st.converged else EXIT_FAIL


def cmd_verify(cfg, out: Path) -> int:
    from .report import run_verification_suite

    rep = run_verification_suite(cfg, out)
    for line in rep.summary_lines():
        print(line)
    if not rep.passed:
        print("failing checks: " + ", ".join(rep.failing()))
    print(f"report written to {rep.paths['csv']} and {rep.paths['json']}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_report(cfg, out: Path) -> int:
    from .report import read_report

    try:
        data = read_report(out)
    except OSError as exc:
        raise ConfigError(f"no report under {out}: {exc}") from None
    for chk in data["checks"]:
        print(f"{'PASS' if chk['passed'] else 'FAIL'} {chk['name']:<11} {chk['anchor']}")
    return EXIT_OK if data["passed"] else EXIT_FAIL


COMMANDS = {"heat": cmd_heat, "besov": cmd_besov, "stokes": cmd_stokes,
            "ns-iterate": cmd_ns_iterate, "verify": cmd_verify, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="halfns",
                                 description="Half-space Stokes/Navier-Stokes numerical lab")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--out", default="halfns-out", help="output directory")
    ap.add_argument("--seed", type=int, help="seed for scenario and ensembles")
    ap.add_argument("--threads", type=int, help="worker processes for the check pool")
    ap.add_argument("--level", type=int, help="refinement multiplier for all grids")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg, Path(args.out))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
