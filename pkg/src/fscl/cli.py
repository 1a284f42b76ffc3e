"""Command line front end: ``fscl <kind> --config FILE [--output DIR] [--threads N]``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 bad configuration,
3 missing input file, 4 solver divergence, 5 diagnostic error (bracket,
pairing, unusable trajectory), 6 anything else.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from .config import KINDS, ExperimentConfig, parse_config
from .errors import (
    BracketError,
    ConfigurationError,
    InvalidPairingError,
    ShapeError,
    SolverDivergenceError,
    UnusableTrajectoryError,
)
from .grid import Field
from .kinetic import XiGrid, assemble_measure, validate_kinetic_measure
from .residuals import (
    XiCutoff,
    default_entropies,
    entropy_residual,
    kinetic_weak_residual,
    weak_form_residual,
)
from .snapshot import read_snapshots, write_path_array, write_snapshots
from .solver import (
    Trajectory,
    contraction_experiment,
    energy_balance,
    ensemble,
    l1_distance,
    run,
    viscosity_sweep,
)

log = logging.getLogger("fscl")

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_NOT_FOUND = 3
EXIT_DIVERGENCE = 4
EXIT_DIAGNOSTIC = 5
EXIT_INTERNAL = 6

THREADS_ENV = "FSCL_THREADS"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


@dataclass
class ConvergenceTable:
    N: list
    errors: list
    orders: list
    flagged: bool


def convergence_table(N_values, errors) -> ConvergenceTable:
    """Observed orders ``log2(e_N / e_2N)`` for successive resolutions.

    Equal successive errors give order 0 and set ``flagged``.
    """
    if len(errors) < 3 or len(N_values) != len(errors):
        raise ValueError("convergence_table needs at least three resolutions with one error each")
    orders, flagged = [], False
    for a, b in zip(errors, errors[1:]):
        if a == b:
            orders.append(0.0)
            flagged = True
        elif a <= 0 or b <= 0:
            orders.append(float("nan"))
            flagged = True
        else:
            orders.append(math.log2(a / b))
    return ConvergenceTable(list(N_values), list(errors), orders, flagged)


def _coarsen(values: np.ndarray, factor: int) -> np.ndarray:
    return values.reshape(-1, factor).mean(axis=1)


def self_convergence(cfg, N_list, seed) -> ConvergenceTable:
    """L1 distance between each resolution and the next, after cell averaging."""
    finals = [run(replace(cfg, N=int(N), record_noise=False), seed).final for N in N_list]
    errors = []
    for a, b in zip(finals, finals[1:]):
        fine = Field(a.grid, _coarsen(b.values, b.grid.N // a.grid.N))
        errors.append(l1_distance(a, fine))
    return convergence_table(list(N_list[:-1]), errors)


def _xi_for(traj, dxi=None) -> XiGrid:
    lo, hi = float(traj.path.min()), float(traj.path.max())
    return XiGrid.bracketing(lo, hi, dxi or traj.config.grid.dx)


def _residual_rows(reports):
    rows = []
    for rep in reports:
        for label, r in zip(rep.labels, rep.residuals):
            ok = r >= -rep.tolerance if rep.kind == "entropy" else abs(r) <= rep.tolerance
            rows.append((rep.kind, label, float(r), rep.tolerance, bool(ok)))
    return rows


RESIDUAL_HEADER = ("kind", "label", "residual", "tolerance", "passed")


def _residual_reports(traj, xi):
    ents = default_entropies(xi.xi_min + 2 * xi.dxi, xi.xi_max - 2 * xi.dxi, 4 * xi.dxi)
    return [entropy_residual(traj, ents, dxi=xi.dxi), weak_form_residual(traj)]


class Executor:
    def __init__(self, exp: ExperimentConfig, output_dir: str, threads: int):
        self.exp = exp
        self.out = output_dir
        self.threads = threads
        os.makedirs(output_dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out, name)

    def _emit(self, name, header, rows):
        rows = list(rows)
        write_csv(self.path(f"{name}.csv"), header, rows)
        if "json" in self.exp.formats:
            write_json(self.path(f"{name}.json"), [dict(zip(header, r)) for r in rows])

    def _write_run(self, traj: Trajectory, prefix=""):
        cfg = traj.config
        write_snapshots(self.path(f"{prefix}snapshots.fscl"), traj.snapshots, cfg.alpha, cfg.epsilon)
        m = traj.monitors
        rows = zip(m["time"], m["mass"], m["l2sq"], m["min"], m["max"], m["dissipation"])
        self._emit(f"{prefix}norms", ("time", "mass", "l2sq", "min", "max", "dissipation"), rows)
        meta = {"seed": list(traj.seed), "dt": traj.dt, "dt_history": traj.dt_history,
                "config_hash": traj.config_hash, "config": cfg.to_dict(),
                "step_count": traj.step_count}
        write_json(self.path(f"{prefix}run.json"), meta)
        if traj.path is not None:
            write_path_array(self.path(f"{prefix}path.fscl"), cfg.grid, traj.path_times, traj.path,
                             cfg.alpha, cfg.epsilon)
            np.save(self.path(f"{prefix}noise.npy"), traj.noise_record)

    def do_run(self):
        exp = self.exp
        cfg = replace(exp.solver, record_noise=exp.record_path or exp.residuals)
        traj = run(cfg, exp.seed)
        self._write_run(traj)
        verdicts = {}
        rows = []
        if exp.residuals and traj.step_count > 0:
            reports = _residual_reports(traj, _xi_for(traj, exp.dxi))
            rows = _residual_rows(reports)
            verdicts["entropy_residual"] = reports[0].passed
            verdicts["weak_form_residual"] = reports[1].passed
        self._emit("residuals", RESIDUAL_HEADER, rows)
        if cfg.noise.is_zero:
            m = traj.monitors
            verdicts["mass_conserved"] = bool(np.ptp(m["mass"]) <= 1e-10 * (1.0 + cfg.T))
            verdicts["range_non_expanding"] = bool(
                m["min"].min() >= m["min"][0] - 1e-12 and m["max"].max() <= m["max"][0] + 1e-12)
            eb = energy_balance(traj)
            verdicts["energy_inequality"] = bool(np.all(eb <= eb[0] * (1.0 + 1e-8)))
        return verdicts

    def do_sweep(self):
        exp = self.exp
        rep = viscosity_sweep(exp.solver, exp.eps_list, exp.seed, include_limit=True)
        for i, f in enumerate(rep.finals):
            write_snapshots(self.path(f"sweep_{i}.fscl"), [f], exp.solver.alpha, rep.eps[i])
        write_snapshots(self.path("sweep_limit.fscl"), [rep.limit_final], exp.solver.alpha, 0.0)
        rows = []
        for i, e in enumerate(rep.eps):
            gap = rep.gaps[i] if i < len(rep.gaps) else float("nan")
            ratio = rep.ratios[i - 1] if 0 < i <= len(rep.ratios) else float("nan")
            rows.append((e, gap, ratio))
        self._emit("sweep", ("eps", "gap_to_next", "gap_ratio"), rows)
        self._emit("sweep_limit", ("envelope", "limit_distance"),
                   [(rep.envelope if rep.envelope is not None else float("nan"),
                     rep.limit_distance)])
        return {"cauchy": rep.cauchy, "within_envelope": bool(rep.within_envelope)}

    def do_ensemble(self):
        exp = self.exp
        st = ensemble(exp.solver, exp.M, exp.seed, exp.p_values, self.threads)
        rows = []
        for p in st.p_values:
            for j, t in enumerate(st.times):
                env = st.l2_envelope[j] if p == 2.0 else float("nan")
                rows.append((t, p, st.mean[p][j], st.stderr[p][j], env))
        self._emit("ensemble", ("time", "p", "mean", "stderr", "envelope"), rows)
        verdicts = {}
        if 2.0 in st.p_values:
            verdicts["l2_envelope"] = st.envelope_ok()
        return verdicts

    def do_contraction(self):
        exp = self.exp
        cfgB = replace(exp.solver, initial_data=exp.initial_b)
        rep = contraction_experiment(exp.solver, cfgB, exp.M, exp.seed, self.threads)
        steps = np.concatenate([[np.nan], rep.step_mean])
        step_se = np.concatenate([[np.nan], rep.step_stderr])
        rows = zip(rep.times, rep.gap_mean, rep.gap_stderr, steps, step_se)
        self._emit("contraction", ("time", "gap_mean", "gap_stderr", "step_mean", "step_stderr"),
                   rows)
        return {"non_increasing": rep.non_increasing}

    def _load_trajectory(self) -> Trajectory:
        src = self.exp.trajectory
        for name in ("path.fscl", "noise.npy", "run.json"):
            if not os.path.isfile(os.path.join(src, name)):
                raise FileNotFoundError(os.path.join(src, name))
        with open(os.path.join(src, "run.json"), encoding="utf-8") as fh:
            meta = json.load(fh)
        cfg = replace(self.exp.solver, record_noise=True)
        if meta["config_hash"] != cfg.fingerprint():
            raise ConfigurationError("trajectory was produced by a different solver configuration")
        recs = read_snapshots(os.path.join(src, "path.fscl"))
        states = np.array([r.field.values for r in recs])
        times = np.array([r.field.time for r in recs])
        noise = np.load(os.path.join(src, "noise.npy"))
        dts = np.asarray(meta["dt_history"], dtype=float)
        if states.shape[0] != dts.size + 1:
            raise UnusableTrajectoryError("path and dt history lengths disagree")
        grid = cfg.grid
        return Trajectory(
            snapshots=[Field(grid, states[0], 0.0), Field(grid, states[-1], times[-1])],
            config=cfg, config_hash=meta["config_hash"], step_count=dts.size,
            seed=tuple(meta["seed"]), dt=float(meta["dt"]), dt_history=dts, monitors={},
            noise_record=noise.reshape(dts.size, cfg.noise.K), path=states, path_times=times)

    def do_diagnose(self):
        traj = self._load_trajectory()
        verdicts = {}
        rows, mrows = [], []
        if traj.step_count > 0:
            xi = _xi_for(traj, self.exp.dxi)
            reports = _residual_reports(traj, xi)
            m = assemble_measure(traj, xi)
            lo, hi = float(traj.path.min()), float(traj.path.max())
            cut = XiCutoff(0.5 * (lo + hi), 0.5 * (hi - lo) + 2 * xi.dxi)
            reports.append(kinetic_weak_residual(traj, m, cut))
            rows = _residual_rows(reports)
            val = validate_kinetic_measure(m, self.exp.R_list)
            mrows = list(zip(val.R_list, val.outside))
            verdicts.update(entropy_residual=reports[0].passed, weak_form_residual=reports[1].passed,
                            kinetic_residual=reports[2].passed, measure_valid=val.passed)
        self._emit("residuals", RESIDUAL_HEADER, rows)
        self._emit("measure", ("R", "outside_mass"), mrows)
        return verdicts

    def do_convergence(self):
        exp = self.exp
        tab = self_convergence(exp.solver, exp.N_list, exp.seed)
        rows = []
        for i, (N, e) in enumerate(zip(tab.N, tab.errors)):
            order = tab.orders[i - 1] if i > 0 else float("nan")
            rows.append((N, e, order))
        self._emit("convergence", ("N", "error", "order"), rows)
        return {"errors_decreasing": all(b < a for a, b in zip(tab.errors, tab.errors[1:])),
                "not_flagged": not tab.flagged}

    def execute(self) -> int:
        verdicts = getattr(self, f"do_{self.exp.kind}")()
        passed = all(verdicts.values())
        write_json(self.path("verdict.json"),
                   {"kind": self.exp.kind, "verdicts": verdicts, "passed": passed})
        return EXIT_OK if passed else EXIT_VERDICT


def resolve_threads(flag, exp: ExperimentConfig) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        return int(env)
    return exp.threads


def execute(exp: ExperimentConfig, output_dir: str | None = None, threads: int | None = None) -> int:
    """Run one experiment, write its artifacts and return the exit status."""
    try:
        ex = Executor(exp, output_dir or exp.output_dir, resolve_threads(threads, exp))
        return ex.execute()
    except FileNotFoundError as exc:
        log.error("missing file: %s", exc)
        return EXIT_NOT_FOUND
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except SolverDivergenceError as exc:
        log.error("solver diverged: %s", exc)
        return EXIT_DIVERGENCE
    except (BracketError, InvalidPairingError, UnusableTrajectoryError, ShapeError) as exc:
        log.error("diagnostic error: %s", exc)
        return EXIT_DIAGNOSTIC


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fscl", description=__doc__.splitlines()[0])
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--output", default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        exp = parse_config(args.config, args.kind)
    except FileNotFoundError as exc:
        log.error("missing file: %s", exc)
        return EXIT_NOT_FOUND
    except ConfigurationError as exc:
        for e in exc.errors:
            log.error("configuration error: %s", e)
        return EXIT_CONFIG
    try:
        return execute(exp, args.output, args.threads)
    except Exception:  # noqa: BLE001
        log.exception("unexpected failure")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
