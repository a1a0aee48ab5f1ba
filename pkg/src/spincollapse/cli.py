"""Command-line entry point: ``spincollapse {run,ensemble,validate,oracle}``.

Exit codes: 0 success, 2 configuration error, 3 solver or convergence
error, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import math
import statistics
import sys
import time
from pathlib import Path

from . import io
from .config import apply_overrides, load_config
from .errors import ConfigError, ConvergenceError, IntegrityError, SpinCollapseError, UsageError
from .experiment import RunSpec, born_curve, estimate_run_seconds, run_single, worker_count
from .validation import oracle_comparison, validate

log = logging.getLogger("spincollapse")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4


def _common(p):
    p.add_argument("-c", "--config", help="TOML configuration file (defaults if omitted)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config key; repeatable")
    p.add_argument("--out-dir", default="out", help="directory for output files (default: out)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="spincollapse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one trajectory: table plus outcome summary")
    _common(p)
    p.add_argument("--theta-deg", type=float, default=45.0)
    p.add_argument("--phi", type=float, default=None, help="phase in radians (default: experiment.phi)")
    p.add_argument("--seed", type=int, default=0, help="coupling seed")
    p.add_argument("--lanczos-seed", type=int, default=None, help="start-vector seed (default: --seed)")

    p = sub.add_parser("ensemble", help="Born-rule statistics over the theta grid")
    _common(p)
    p.add_argument("--seed", type=int, default=None, help="base seed (default: experiment.base_seed)")
    p.add_argument("--workers", type=int, default=1, help="worker processes, capped by $SPINCOLLAPSE_THREADS")
    p.add_argument("--keep-trajectories", action="store_true", help="write every member's trajectory table")

    p = sub.add_parser("validate", help="invariant and oracle checks on a small universe")
    _common(p)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("oracle", help="matrix-free vs dense trajectories (L <= 12)")
    _common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta-deg", type=float, default=45.0)
    p.add_argument("--steps", type=int, default=40)
    p.add_argument("--dt", type=float, default=0.05)
    return parser


def _config(args):
    return apply_overrides(load_config(args.config), args.overrides)


def _spec(cfg, theta_deg, coupling_seed, lanczos_seed, phi=None):
    return RunSpec(
        theta=math.radians(theta_deg),
        phi=cfg.experiment.phi if phi is None else phi,
        coupling_seed=coupling_seed,
        lanczos_seed=lanczos_seed,
        model=cfg.model.to_model_config(),
        trajectory=cfg.trajectory.to_trajectory_config(),
        chebyshev=cfg.chebyshev.to_chebyshev_config(),
        lanczos=cfg.lanczos.to_lanczos_config(lanczos_seed),
        m_threshold=cfg.m_threshold,
        dwell=cfg.experiment.dwell,
    )


def _header(cfg, command):
    return {"artifact_version": io.artifact_version(), "command": command,
            "config": cfg.echo(), "conventions": io.CONVENTIONS}


def _outcome_dict(o):
    return {"classification": o.classification, "collapse_time": o.collapse_time,
            "final_M": o.final_M, "final_S_sys_z": o.final_S_sys_z}


def cmd_run(args):
    cfg = _config(args)
    lseed = args.seed if args.lanczos_seed is None else args.lanczos_seed
    spec = _spec(cfg, args.theta_deg, args.seed, lseed, args.phi)
    stride_t = spec.trajectory.dt * spec.trajectory.record_stride
    every = max(1, int(round(10.0 / stride_t)))
    count = [0]

    def progress(rec):
        count[0] += 1
        if count[0] % every == 1:
            log.info("t=%8.2f  M=%+.4f  S_sys_z=%+.4f  E_U=%.12g", rec.t, rec.M, rec.S_sys_z, rec.E_U)

    if log.isEnabledFor(logging.INFO):
        log.info("estimated cost on this machine: about %.3g min", estimate_run_seconds(spec) / 60)
    traj, outcome = run_single(spec, observer=progress)
    out = Path(args.out_dir)
    stem = f"run_theta{args.theta_deg:g}_seed{args.seed}_lseed{lseed}"
    table = io.write_trajectory(out / f"{stem}.csv", traj)
    summary = _header(cfg, "run")
    summary.update({
        "theta_deg": args.theta_deg,
        "phi": spec.phi,
        "seeds": {"coupling_seed": spec.coupling_seed, "lanczos_seed": spec.lanczos_seed},
        "outcome": _outcome_dict(outcome),
        "trajectory_file": table.name,
        "diagnostics": {
            "environment_ground_energy": traj.env_energy,
            "steps": traj.steps,
            "operator_applications": traj.operator_applications,
            "field_iterations": traj.field_iterations,
            "max_norm_drift": traj.max_norm_drift(),
            "max_universe_energy_drift": traj.max_energy_drift("E_U"),
            "max_mean_energy_drift": traj.max_energy_drift("H_mean"),
        },
    })
    io.write_json(out / f"{stem}.json", summary)
    print(f"{outcome.classification.value}  collapse_time={outcome.collapse_time}  "
          f"final_M={outcome.final_M:+.6f}  final_S_sys_z={outcome.final_S_sys_z:+.6f}  -> {table}")
    return EXIT_OK


def cmd_ensemble(args):
    cfg = _config(args)
    exp = cfg.experiment
    base = exp.base_seed if args.seed is None else args.seed
    template = _spec(cfg, 0.0, 0, 0)
    out = Path(args.out_dir)
    total = len(exp.theta_grid_degrees) * exp.runs_per_theta
    done = [0]

    def progress(res):
        done[0] += 1
        label = res.outcome.classification.value if res.outcome else f"FAILED {res.error}"
        log.info("[%d/%d] theta#%d run %d: %s (%.1fs)", done[0], total, res.theta_index,
                 res.run_index, label, res.wall_seconds)

    start = time.perf_counter()
    curve = born_curve(exp.theta_grid_degrees, exp.runs_per_theta, base, template,
                       workers=args.workers, keep_trajectories=args.keep_trajectories,
                       progress=progress)
    wall = time.perf_counter() - start
    runs = []
    for r in curve.runs:
        entry = {"theta_deg": exp.theta_grid_degrees[r.theta_index], "run_index": r.run_index,
                 "coupling_seed": r.coupling_seed, "lanczos_seed": r.lanczos_seed,
                 "outcome": _outcome_dict(r.outcome) if r.outcome else None, "error": r.error,
                 "wall_seconds": r.wall_seconds}
        if r.trajectory is not None:
            name = f"member_theta{entry['theta_deg']:g}_run{r.run_index}.csv"
            io.write_trajectory(out / "trajectories" / name, r.trajectory)
            entry["trajectory_file"] = f"trajectories/{name}"
        runs.append(entry)
    times = [r.wall_seconds for r in curve.runs]
    summary = _header(cfg, "ensemble")
    summary.update({
        "base_seed": base,
        "seed_scheme": "coupling_seed, lanczos_seed = SeedSequence(base_seed, "
                       "spawn_key=(theta_index, run_index)).generate_state(2, uint32)",
        "points": [vars(p) | {"decided_rate": p.decided_rate} for p in curve.points],
        "mean_abs_deviation": curve.mean_abs_deviation(),
        "runs": runs,
        "wall_clock": {"total_seconds": wall, "mean_run_seconds": statistics.fmean(times) if times else None,
                       "max_run_seconds": max(times) if times else None,
                       "workers": worker_count(args.workers)},
    })
    path = io.write_json(out / "ensemble.json", summary)
    print(f"{'theta':>6} {'runs':>5} {'up':>4} {'down':>5} {'undec':>6} {'fail':>5} {'p_up':>7} "
          f"{'95% CI':>17} {'cos^2':>7}")
    for p in curve.points:
        print(f"{p.theta_deg:6g} {p.n_runs:5d} {p.n_up:4d} {p.n_down:5d} {p.n_undecided:6d} "
              f"{p.n_failed:5d} {p.p_up_estimate:7.3f} [{p.ci_low:6.3f}, {p.ci_high:6.3f}] "
              f"{p.reference:7.3f}")
    print(f"-> {path}")
    return EXIT_OK


def cmd_validate(args):
    cfg = _config(args)
    results = validate(cfg, seed=args.seed)
    for r in results:
        print(r.line())
    payload = _header(cfg, "validate")
    payload["checks"] = [vars(r) for r in results]
    io.write_json(Path(args.out_dir) / "validate.json", payload)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return EXIT_INVARIANT
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_oracle(args):
    cfg = _config(args)
    model = cfg.model.to_model_config()
    if args.steps < 1 or not args.dt > 0:
        raise ConfigError("--steps must be >= 1 and --dt > 0")
    report = oracle_comparison(model, args.seed, dt=args.dt, n_steps=args.steps,
                               cheb=cfg.chebyshev.to_chebyshev_config(),
                               theta=math.radians(args.theta_deg),
                               field_rule=cfg.trajectory.field_rule)
    payload = _header(cfg, "oracle")
    payload.update({"seed": args.seed, "theta_deg": args.theta_deg, "report": report})
    path = io.write_json(Path(args.out_dir) / "oracle.json", payload)
    print(f"{'t':>8} {'M matrix-free':>16} {'M dense':>16}")
    for t, a, b in zip(report["t"], report["M_matrix_free"], report["M_dense"]):
        print(f"{t:8.3f} {a:16.12f} {b:16.12f}")
    print(f"L={report['L']}  max amplitude error {report['max_amplitude_error']:.3e}  "
          f"max M error {report['max_M_error']:.3e}  -> {path}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "ensemble": cmd_ensemble, "validate": cmd_validate, "oracle": cmd_oracle}


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except IntegrityError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except SpinCollapseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
