"""Command-line front end.

Precedence is built-in defaults < config file < flags. The config file is
INI text with one section per module; unknown sections or keys are
errors. Everything is validated before any numerics run.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .dephasing import stationary_fidelity
from .experiments import (
    DEPHASING_COLUMNS,
    FIGURES,
    LENGTH_SWEEP_COLUMNS,
    SweepSpec,
    dephasing_rows,
    figure_parameters,
    reproduce_figure,
    run_dephasing,
    run_disorder_ensemble,
    run_length_sweep,
)
from .hamiltonian import ChainParams, DisorderSpec, build_hamiltonian
from .integrate import NumericalError
from .io import write_csv, write_metadata, write_svg
from .readout import SWEEP_COLUMNS, ReadoutParams, current_vs_tstar_sweep, evolve_readout
from .transfer import PeakNotFoundError, fidelity_series

log = logging.getLogger(__name__)

OUTPUT_ENV = "JJCHAIN_OUTPUT_DIR"
SUBCOMMANDS = ("fidelity-series", "sweep-length", "disorder-ensemble", "dephasing", "readout", "reproduce")
SERIES_COLUMNS = ("t", "re_f", "im_f", "abs_f", "fidelity")
EXIT_CONFIG, EXIT_NUMERICAL = 2, 3


class ConfigError(ValueError):
    pass


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(p) for p in str(text).split(",") if p.strip()]


# section -> key -> converter
SCHEMA = {
    "run": {"subcommand": str, "figure": str},
    "chain": {"length": int, "u0": float, "c_ratio": float},
    "time": {"t_max": float, "dt": float, "dt_out": float},
    "input": {"theta": float, "phi": float},
    "sweep": {"lengths": _int_list, "c_ratios": _float_list, "threshold": float},
    "disorder": {"bond_sigma": float, "charge_sigma": float, "realizations": int, "seed": int, "workers": int},
    "dephasing": {"gamma": float},
    "readout": {"Gamma": float, "t_star": float, "t_tail": float, "T_pulse": float, "t_star_max": float,
                "t_star_step": float},
    "output": {"output": str, "format": str},
}
KEY_SECTION = {k: s for s, keys in SCHEMA.items() for k in keys}


@dataclass
class RunConfig:
    subcommand: Optional[str] = None
    figure: Optional[str] = None
    length: Optional[int] = None
    u0: Optional[float] = None
    c_ratio: Optional[float] = None
    t_max: Optional[float] = None
    dt: Optional[float] = None
    dt_out: Optional[float] = None
    theta: Optional[float] = None
    phi: Optional[float] = None
    lengths: Optional[list] = None
    c_ratios: Optional[list] = None
    threshold: Optional[float] = None
    bond_sigma: Optional[float] = None
    charge_sigma: Optional[float] = None
    realizations: Optional[int] = None
    seed: Optional[int] = None
    workers: Optional[int] = None
    gamma: Optional[float] = None
    Gamma: Optional[float] = None
    t_star: Optional[float] = None
    t_tail: Optional[float] = None
    T_pulse: Optional[float] = None
    t_star_max: Optional[float] = None
    t_star_step: Optional[float] = None
    output: Optional[str] = None
    format: Optional[str] = None

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            section = KEY_SECTION[f.name]
            if not cp.has_section(section):
                cp.add_section(section)
            if isinstance(v, list):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            cp.set(section, f.name, str(v))
        from io import StringIO

        buf = StringIO()
        cp.write(buf)
        return buf.getvalue()


DEFAULTS = {
    "fidelity-series": dict(length=7, u0=10.0, c_ratio=0.1, t_max=50.0, dt=0.01),
    "sweep-length": dict(lengths=list(range(2, 11)), u0=10.0, c_ratios=[0.05, 0.1], dt=0.01),
    "disorder-ensemble": dict(length=7, u0=10.0, c_ratio=0.0, bond_sigma=0.0, charge_sigma=0.0,
                              realizations=500, seed=0, t_max=30.0, dt=0.01),
    "dephasing": dict(length=7, u0=10.0, c_ratio=0.1, gamma=0.01, t_max=60.0, dt=1e-3, dt_out=0.01,
                      theta=math.pi / 2, phi=0.0),
    "readout": dict(length=7, u0=10.0, c_ratio=0.1, Gamma=0.05, t_star_max=40.0, t_star_step=0.05,
                    theta=math.pi, phi=0.0, T_pulse=1.0, dt=1e-3),
    "reproduce": dict(),
}
COMMON_DEFAULTS = dict(format="csv+svg")


def _option_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("model and run options")
    g.add_argument("--config", help="INI config file (flags override it)")
    g.add_argument("--length", type=int)
    g.add_argument("--u0", type=float, help="charging ratio (2e)^2/(E_J C0)")
    g.add_argument("--c-ratio", dest="c_ratio", type=float, help="C/C0")
    g.add_argument("--t-max", dest="t_max", type=float)
    g.add_argument("--dt", type=float)
    g.add_argument("--dt-out", dest="dt_out", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--phi", type=float)
    g.add_argument("--lengths", type=_int_list, help="e.g. 2..10 or 3,5,7")
    g.add_argument("--c-ratios", dest="c_ratios", type=_float_list)
    g.add_argument("--threshold", type=float)
    g.add_argument("--bond-sigma", dest="bond_sigma", type=float)
    g.add_argument("--charge-sigma", dest="charge_sigma", type=float)
    g.add_argument("--realizations", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--gamma", type=float, help="gate-noise strength")
    g.add_argument("--Gamma", type=float, help="quasiparticle tunneling rate")
    g.add_argument("--t-star", dest="t_star", type=float)
    g.add_argument("--t-tail", dest="t_tail", type=float)
    g.add_argument("--T-pulse", dest="T_pulse", type=float)
    g.add_argument("--t-star-max", dest="t_star_max", type=float)
    g.add_argument("--t-star-step", dest="t_star_step", type=float)
    g.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV} or .)")
    g.add_argument("--format", choices=["csv", "csv+svg"])
    return p


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    opts = _option_parser()
    parser = _Parser(prog="jjchain", description="State transfer in Josephson junction chains.",
                     parents=[opts])
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[opts])
        if name == "reproduce":
            sp.add_argument("figure", choices=FIGURES)
    return parser


def read_config_file(path) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    out = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}] in {path}")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}] of {path}")
            try:
                out[key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: cannot parse {raw!r} ({exc})") from exc
    return out


def parse_config(argv=None) -> RunConfig:
    """Resolve defaults, config file and flags into a validated RunConfig."""
    ns = vars(build_parser().parse_args(argv))
    values = {}
    if "config" in ns:
        values.update(read_config_file(ns.pop("config")))
    values.update({k: v for k, v in ns.items() if v is not None})
    sub = values.get("subcommand")
    if sub is None:
        raise ConfigError("no subcommand given (on the command line or in [run] of the config file)")
    if sub not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {sub!r}")
    resolved = dict(COMMON_DEFAULTS)
    resolved.update(DEFAULTS[sub])
    resolved.update(values)
    if resolved.get("output") is None:
        resolved["output"] = os.environ.get(OUTPUT_ENV, ".")
    cfg = RunConfig(**resolved)
    validate(cfg)
    return cfg


def _require(cond, field, constraint):
    if not cond:
        raise ConfigError(f"invalid {field}: must satisfy {constraint}")


def _finite(x):
    return x is not None and math.isfinite(x)


def validate(cfg: RunConfig) -> None:
    """Check every field against the owning type's constraints."""
    if cfg.length is not None:
        _require(cfg.length >= 1, "length", "L >= 1")
    if cfg.u0 is not None:
        _require(_finite(cfg.u0) and cfg.u0 >= 0, "u0", "u0 >= 0 and finite")
    if cfg.c_ratio is not None:
        _require(_finite(cfg.c_ratio) and cfg.c_ratio >= 0, "c_ratio", "c_ratio >= 0 and finite")
    for name in ("t_max", "dt", "dt_out", "T_pulse", "t_star_max", "t_star_step", "Gamma"):
        v = getattr(cfg, name)
        if v is not None:
            _require(_finite(v) and v > 0, name, f"{name} > 0 and finite")
    for name in ("gamma", "bond_sigma", "charge_sigma", "t_star"):
        v = getattr(cfg, name)
        if v is not None:
            _require(_finite(v) and v >= 0, name, f"{name} >= 0 and finite")
    if cfg.lengths is not None:
        _require(len(cfg.lengths) > 0 and all(L >= 1 for L in cfg.lengths), "lengths", "nonempty, each L >= 1")
    if cfg.c_ratios is not None:
        _require(len(cfg.c_ratios) > 0 and all(c >= 0 for c in cfg.c_ratios), "c_ratios", "nonempty, each >= 0")
    if cfg.threshold is not None:
        _require(0.5 < cfg.threshold < 1, "threshold", "0.5 < threshold < 1")
    if cfg.realizations is not None:
        _require(cfg.realizations >= 1, "realizations", "realizations >= 1")
    if cfg.seed is not None:
        _require(0 <= cfg.seed < 2**64, "seed", "0 <= seed < 2^64")
    if cfg.workers is not None:
        _require(cfg.workers >= 1, "workers", "workers >= 1")
    if cfg.format is not None:
        _require(cfg.format in ("csv", "csv+svg"), "format", "csv or csv+svg")
    if cfg.t_tail is not None and cfg.Gamma is not None:
        _require(cfg.t_tail >= 20 / cfg.Gamma, "t_tail", "t_tail >= 20/Gamma")
    if cfg.subcommand == "reproduce":
        _require(cfg.figure in FIGURES, "figure", f"one of {', '.join(FIGURES)}")
        try:
            figure_parameters(cfg.figure, _figure_overrides(cfg))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if cfg.subcommand == "disorder-ensemble":
        _require(cfg.c_ratio is not None and cfg.length is not None, "length", "single chain")


_FIGURE_KEYS = ("length", "u0", "c_ratio", "gamma", "Gamma", "lengths", "c_ratios", "threshold", "bond_sigma",
                "charge_sigma", "realizations", "seed", "t_max", "dt", "dt_out", "t_star_max", "t_star_step",
                "theta", "phi", "workers")


def _figure_overrides(cfg: RunConfig) -> dict:
    known = figure_parameters(cfg.figure)
    out = {}
    for key in _FIGURE_KEYS:
        v = getattr(cfg, key)
        if v is None:
            continue
        if key not in known:
            raise ConfigError(f"{cfg.figure} does not take '{key}'")
        out[key] = v
    return out


def _emit(cfg: RunConfig, name: str, columns, rows, plot=None, **meta):
    out = Path(cfg.output)
    paths = {"csv": write_csv(out / f"{name}.csv", columns, rows)}
    if cfg.format == "csv+svg" and plot is not None:
        x, series, xlabel, ylabel = plot
        paths["svg"] = write_svg(out / f"{name}.svg", x, series, xlabel, ylabel, name)
    (out / f"{name}.config.ini").write_text(cfg.to_ini(), encoding="utf-8")
    paths["meta"] = write_metadata(out / f"{name}.meta.json", asdict(cfg), **meta)
    return paths


def execute(cfg: RunConfig) -> dict:
    sub = cfg.subcommand
    if sub == "fidelity-series":
        params = ChainParams(cfg.length, cfg.u0, cfg.c_ratio)
        s = fidelity_series(build_hamiltonian(params), cfg.t_max, cfg.dt)
        rows = zip(s.times.tolist(), s.amplitude.real.tolist(), s.amplitude.imag.tolist(),
                   np.abs(s.amplitude).tolist(), s.fidelity.tolist())
        return _emit(cfg, sub, SERIES_COLUMNS, rows, (s.times, {"F": s.fidelity}, "t E_J", "F"))

    if sub == "sweep-length":
        spec = SweepSpec(lengths=cfg.lengths, u0=cfg.u0, c_ratios=cfg.c_ratios, t_max=cfg.t_max, dt=cfg.dt,
                         threshold=cfg.threshold)
        rows = run_length_sweep(spec)
        plot = None
        if rows:
            series = {f"C/C0={c:g}": [r[3] for r in rows if r[1] == c] for c in spec.c_ratios}
            plot = (list(spec.lengths), series, "L", "first maximum of F")
        return _emit(cfg, sub, LENGTH_SWEEP_COLUMNS, rows, plot)

    if sub == "disorder-ensemble":
        spec = SweepSpec(lengths=[cfg.length], u0=cfg.u0, c_ratios=[cfg.c_ratio], realizations=cfg.realizations,
                         t_max=cfg.t_max, dt=cfg.dt, master_seed=cfg.seed,
                         disorder=DisorderSpec(cfg.bond_sigma, cfg.charge_sigma))
        res = run_disorder_ensemble(spec, cfg.workers)
        rows = zip(res.times.tolist(), res.fidelity.mean.tolist(), res.fidelity.std_error.tolist())
        return _emit(cfg, sub, ("t", "fidelity_mean", "fidelity_se"), rows,
                     (res.times, {"mean F": res.fidelity.mean}, "t E_J", "F"),
                     seeds={"master_seed": cfg.seed, "realizations": cfg.realizations},
                     first_peak={"mean": res.peak_stats.mean, "std_error": res.peak_stats.std_error,
                                 "n": res.peak_stats.n})

    if sub == "dephasing":
        res = run_dephasing(cfg.length, cfg.u0, cfg.c_ratio, cfg.gamma, cfg.t_max, cfg.dt, cfg.dt_out,
                            cfg.theta, cfg.phi)
        return _emit(cfg, sub, DEPHASING_COLUMNS, dephasing_rows(res),
                     (res.times, {"F": res.series.fidelity}, "t E_J", "F"),
                     stationary_fidelity=stationary_fidelity(cfg.length),
                     worst_state_errors=res.diagnostics.worst())

    if sub == "readout":
        params = ChainParams(cfg.length, cfg.u0, cfg.c_ratio)
        if cfg.t_star is not None:
            rp = ReadoutParams(cfg.Gamma, cfg.t_star, cfg.T_pulse, cfg.t_tail)
            r = evolve_readout(cfg.theta, cfg.phi, params, rp, dt=cfg.dt)
            pops = r.populations
            rows = zip(r.times.tolist(), r.current.tolist(), pops[:, 0].tolist(), pops[:, 1].tolist(),
                       pops[:, 2].tolist())
            return _emit(cfg, sub, ("t", "current", "p_vac", "p_qp", "rho_LL"), rows,
                         (r.times, {"current": r.current}, "t E_J", "particle current"),
                         integrated_current=r.integrated_current / cfg.T_pulse,
                         approx_integrated_current=r.approx_integrated_current / cfg.T_pulse)
        grid = np.arange(0.0, cfg.t_star_max + 0.5 * cfg.t_star_step, cfg.t_star_step)
        sw = current_vs_tstar_sweep(params, cfg.Gamma, grid, cfg.theta, cfg.phi, t_tail=cfg.t_tail, dt=cfg.dt)
        return _emit(cfg, sub, SWEEP_COLUMNS, sw.rows(),
                     (sw.t_star, {"I": sw.integrated_current, "F isolated": sw.fidelity_isolated},
                      "t* E_J", "I (e/T), F"),
                     current_peaks=sw.current_peaks, peak_offsets=sw.peak_offsets)

    if sub == "reproduce":
        b = reproduce_figure(cfg.figure, _figure_overrides(cfg), cfg.output, svg=cfg.format == "csv+svg",
                             config=asdict(cfg))
        (Path(cfg.output) / f"{cfg.figure}.config.ini").write_text(cfg.to_ini(), encoding="utf-8")
        return b.paths
    raise ConfigError(f"unknown subcommand {sub!r}")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"jjchain: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        paths = execute(cfg)
    except (NumericalError, PeakNotFoundError, np.linalg.LinAlgError) as exc:
        print(f"jjchain: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"jjchain: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for kind, path in sorted(paths.items()):
        print(f"{kind}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
