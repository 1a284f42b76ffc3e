"""Sectioned ``key = value`` experiment configuration.

Sections and keys::

    [solver]      L, N, alpha, nu, epsilon, T, cfl, numerical_flux, dt
    [flux]        kind, speed, coefficients
    [noise]       K, c, q, b0, b1, u_max
    [initial]     kind, uL, uR, x0, height, left, right, amplitude, width,
                  center, base, mode, offset, samples
    [initial_b]   same keys as [initial]; second datum for contraction runs
    [experiment]  kind, seed, output_dir, output_times, M, eps_list, R_list,
                  p_values, N_list, dxi, trajectory, threads, formats,
                  record_path, residuals

Lists are comma separated.  Unknown sections or keys are rejected by name.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .flux import FluxModel
from .noise import NoiseModel
from .solver import InitialData, SolverConfig

KINDS = ("run", "sweep", "ensemble", "contraction", "diagnose", "convergence")
FORMATS = ("csv", "json")


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _words(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


_INITIAL = {
    "kind": str, "uL": float, "uR": float, "x0": float, "height": float, "left": float,
    "right": float, "amplitude": float, "width": float, "center": float, "base": float,
    "mode": int, "offset": float, "samples": _floats,
}

SCHEMA = {
    "solver": {"L": float, "N": int, "alpha": float, "nu": float, "epsilon": float, "T": float,
               "cfl": float, "numerical_flux": str, "dt": _opt_float},
    "flux": {"kind": str, "speed": float, "coefficients": _floats},
    "noise": {"K": int, "c": float, "q": float, "b0": float, "b1": float, "u_max": float},
    "initial": _INITIAL,
    "initial_b": _INITIAL,
    "experiment": {"kind": str, "seed": int, "output_dir": str, "output_times": _floats,
                   "M": int, "eps_list": _floats, "R_list": _floats, "p_values": _floats,
                   "N_list": _ints, "dxi": float, "trajectory": str, "threads": int,
                   "formats": _words, "record_path": _bool, "residuals": _bool},
}


@dataclass
class ExperimentConfig:
    solver: SolverConfig
    kind: str = "run"
    seed: int = 0
    output_dir: str = "fscl_out"
    M: int = 16
    eps_list: tuple = ()
    R_list: tuple = (1.0, 2.0, 4.0)
    p_values: tuple = (1.0, 2.0, 4.0)
    N_list: tuple = (128, 256, 512, 1024)
    dxi: float | None = None
    trajectory: str | None = None
    threads: int = 1
    formats: tuple = ("csv",)
    record_path: bool = False
    residuals: bool = True
    initial_b: InitialData | None = None
    source: dict = field(default_factory=dict)


def _read(parser: configparser.ConfigParser, errors: list) -> dict:
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            spec = SCHEMA[section]
            if key not in spec:
                errors.append(f"unknown key {section}.{key}")
                continue
            try:
                values[(section, key)] = spec[key](raw)
            except ValueError as exc:
                errors.append(f"bad value for {section}.{key}: {exc}")
    return values


def _section(values, name):
    return {k: v for (s, k), v in values.items() if s == name}


def _initial(params: dict) -> InitialData:
    p = dict(params)
    kind = p.pop("kind", "bump")
    if kind == "custom":
        return InitialData.custom(p.get("samples", ()))
    return InitialData(kind, p)


def parse_text(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse and validate; ``kind`` overrides ``experiment.kind``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (uL, N, T)
    errors: list[str] = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(str(exc)) from exc
    values = _read(parser, errors)
    exp = _section(values, "experiment")

    flux = noise = None
    try:
        flux = FluxModel(**_section(values, "flux"))
    except (ValueError, TypeError) as exc:
        errors.append(f"flux: {exc}")
    try:
        noise = NoiseModel(**_section(values, "noise"))
    except (ValueError, TypeError) as exc:
        errors.append(f"noise: {exc}")
    init = _initial(_section(values, "initial"))
    init_b = _initial(_section(values, "initial_b")) if parser.has_section("initial_b") else None

    if kind is not None:
        exp["kind"] = kind
    kind = exp.get("kind", "run")
    if kind not in KINDS:
        errors.append(f"experiment.kind must be one of {KINDS}, got {kind!r}")
    eps_list = exp.get("eps_list", ())
    if kind == "sweep":
        if len(eps_list) < 2:
            errors.append("sweep needs experiment.eps_list with at least two values")
        elif any(e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
            errors.append("experiment.eps_list must be positive and strictly decreasing")
    if kind == "contraction" and init_b is None:
        errors.append("contraction needs an [initial_b] section")
    if kind == "diagnose" and "trajectory" not in exp:
        errors.append("diagnose needs experiment.trajectory")
    if kind == "convergence" and len(exp.get("N_list", (128, 256, 512, 1024))) < 3:
        errors.append("convergence needs at least three entries in experiment.N_list")
    if kind in ("ensemble", "contraction") and exp.get("M", 16) < 2:
        errors.append("experiment.M must be at least 2")
    if "threads" in exp and exp["threads"] < 1:
        errors.append("experiment.threads must be at least 1")
    bad = [f for f in exp.get("formats", ()) if f not in FORMATS]
    if bad:
        errors.append(f"unknown experiment.formats {bad}; allowed {FORMATS}")

    solver = None
    if flux is not None and noise is not None:
        kw = _section(values, "solver")
        kw.update(flux=flux, noise=noise, initial_data=init)
        if "output_times" in exp:
            kw["output_times"] = exp["output_times"]
        try:
            solver = SolverConfig(**kw)
        except ConfigurationError as exc:
            errors.extend(exc.errors)
        except TypeError as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigurationError("; ".join(errors), errors)

    fields = {k: v for k, v in exp.items() if k not in ("output_times",)}
    return ExperimentConfig(solver=solver, initial_b=init_b,
                            source={f"{s}.{k}": v for (s, k), v in values.items()}, **fields)


def parse_config(path, kind: str | None = None) -> ExperimentConfig:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), kind)
