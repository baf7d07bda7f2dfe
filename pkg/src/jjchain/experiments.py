"""Parameter sweeps, disorder ensembles and figure pipelines.

Every run is a pure function of its inputs and the master seed: each
disorder realization draws from ``SeedSequence([master_seed, index])``,
results are collected by index and reduced in a fixed order, so serial and
parallel runs give bit-identical aggregates.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dephasing import bloch_state, build_dephasing_rates, evolve_dephasing, stationary_fidelity
from .hamiltonian import ChainParams, DisorderSpec, build_hamiltonian, sample_disorder
from .io import write_csv, write_metadata, write_svg
from .readout import SWEEP_COLUMNS, current_vs_tstar_sweep, instantaneous_current
from .transfer import (
    PeakNotFoundError,
    fidelity_series,
    find_first_above_threshold,
    find_first_maximum,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepSpec:
    lengths: Sequence[int]
    u0: float = 10.0
    c_ratios: Sequence[float] = (0.0,)
    gamma: Optional[float] = None
    Gamma_qp: Optional[float] = None
    disorder: Optional[DisorderSpec] = None
    realizations: int = 500
    t_max: Optional[float] = None
    dt: float = 0.01
    threshold: Optional[float] = None
    master_seed: int = 0

    def __post_init__(self):
        lengths = tuple(int(L) for L in self.lengths)
        if not lengths or any(L < 1 for L in lengths):
            raise ValueError(f"lengths must be nonempty and each >= 1, got {self.lengths!r}")
        if self.realizations < 1:
            raise ValueError(f"realizations must be >= 1, got {self.realizations!r}")
        if self.dt <= 0 or (self.t_max is not None and self.t_max <= 0):
            raise ValueError("t_max and dt must be positive")
        if self.threshold is not None and not 0.5 < self.threshold < 1:
            raise ValueError(f"threshold must lie in (0.5, 1), got {self.threshold!r}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "c_ratios", tuple(float(c) for c in self.c_ratios))


@dataclass(frozen=True)
class EnsembleStats:
    mean: np.ndarray
    std_error: np.ndarray
    n: int


def ensemble_stats(samples: np.ndarray) -> EnsembleStats:
    """Mean and standard error over axis 0, summed pairwise in index order."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    cols = np.ascontiguousarray(samples.reshape(n, -1).T)
    mean = cols.sum(axis=1) / n
    if n > 1:
        var = ((cols - mean[:, None]) ** 2).sum(axis=1) / (n - 1)
        se = np.sqrt(var / n)
    else:
        se = np.zeros_like(mean)
    shape = samples.shape[1:]
    return EnsembleStats(mean=mean.reshape(shape), std_error=se.reshape(shape), n=n)


LENGTH_SWEEP_COLUMNS = ("L", "c_ratio", "t_peak", "f_peak", "threshold_t_peak", "threshold_f_peak", "error")


def run_length_sweep(spec: SweepSpec) -> list[tuple]:
    """First fidelity maximum (and first maximum above threshold) per (L, c_ratio).

    Peak-search failures are recorded in the ``error`` column of the row.
    """
    if spec.disorder is not None:
        raise ValueError("length sweeps run on clean chains; drop the DisorderSpec")
    rows = []
    for c in spec.c_ratios:
        for L in spec.lengths:
            H = build_hamiltonian(ChainParams(L, spec.u0, c))
            t_max = spec.t_max if spec.t_max is not None else 50.0 * L
            series = fidelity_series(H, t_max, spec.dt)
            t1 = f1 = t2 = f2 = math.nan
            errors = []
            try:
                r = find_first_maximum(series, H)
                t1, f1 = r.t_peak, r.f_peak
            except PeakNotFoundError as exc:
                errors.append(str(exc))
            if spec.threshold is not None:
                try:
                    r = find_first_above_threshold(series, H, spec.threshold)
                    t2, f2 = r.t_peak, r.f_peak
                except PeakNotFoundError as exc:
                    errors.append(str(exc))
            rows.append((L, c, t1, f1, t2, f2, "; ".join(errors)))
    return rows


def _realization(args):
    base, disorder, index, t_max, dt = args
    params = sample_disorder(disorder, base, index)
    H = build_hamiltonian(params)
    series = fidelity_series(H, t_max, dt)
    try:
        peak = find_first_maximum(series, H)
        tp, fp = peak.t_peak, peak.f_peak
    except PeakNotFoundError:
        tp = fp = math.nan
    return series.fidelity, tp, fp


@dataclass(frozen=True)
class EnsembleResult:
    times: np.ndarray
    fidelity: EnsembleStats
    peak_times: np.ndarray
    peak_fidelities: np.ndarray
    peak_stats: EnsembleStats

    @property
    def n(self) -> int:
        return self.fidelity.n


def run_disorder_ensemble(spec: SweepSpec, workers: Optional[int] = None) -> EnsembleResult:
    """Disorder-averaged fidelity trace and first-peak statistics for one chain.

    ``workers > 1`` distributes realizations over processes; the result
    does not depend on it.
    """
    if spec.disorder is None:
        raise ValueError("disorder ensemble needs a DisorderSpec")
    if len(spec.lengths) != 1 or len(spec.c_ratios) != 1:
        raise ValueError("disorder ensemble runs on a single (L, c_ratio)")
    L, c = spec.lengths[0], spec.c_ratios[0]
    base = ChainParams(L, spec.u0, c)
    disorder = replace(spec.disorder, seed=spec.master_seed)
    t_max = spec.t_max if spec.t_max is not None else 50.0 * L
    jobs = [(base, disorder, i, t_max, spec.dt) for i in range(spec.realizations)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_realization, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_realization(j) for j in jobs]

    F = np.stack([r[0] for r in results])
    tp = np.array([r[1] for r in results])
    fp = np.array([r[2] for r in results])
    ok = np.isfinite(fp)
    if not ok.all():
        log.warning("%d of %d realizations had no first maximum within t_max", (~ok).sum(), len(ok))
    times = np.arange(F.shape[1]) * spec.dt
    return EnsembleResult(
        times=times,
        fidelity=ensemble_stats(F),
        peak_times=tp,
        peak_fidelities=fp,
        peak_stats=ensemble_stats(fp[ok]) if ok.any() else EnsembleStats(np.nan, np.nan, 0),
    )


# --- figure pipelines ------------------------------------------------------

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6")

FIGURE_DEFAULTS = {
    "fig2": dict(u0=10.0, c_ratios=[0.05, 0.1], lengths=list(range(2, 13)), dt=0.01, t_max=None),
    "fig3": dict(u0=10.0, c_ratios=[1.0, 2.0, 5.0], lengths=list(range(2, 10)), dt=0.01, t_max=2.0e4,
                 threshold=0.9),
    "fig4": dict(length=7, u0=10.0, c_ratio=0.0, bond_sigma=0.1, charge_sigma=0.025, realizations=500,
                 seed=2005, t_max=30.0, dt=0.01, workers=None),
    "fig5": dict(length=7, u0=10.0, c_ratio=0.1, gamma=0.01, t_max=60.0, dt=1e-3, dt_out=0.01),
    "fig6": dict(length=7, u0=10.0, c_ratio=0.1, Gamma=0.05, t_star_max=40.0, t_star_step=0.05,
                 theta=math.pi, phi=0.0, t_max=60.0),
}

FIGURE_ASSUMPTIONS = {
    "fig2": [
        "C/C0 values 0.05 and 0.1 are chosen to represent C/C0 << 1",
        "first maximum = highest fidelity maximum inside the first arrival lobe of |f|",
        "search window t_max = 50 L unless overridden",
    ],
    "fig3": [
        "C/C0 values 1, 2, 5 are chosen to represent C/C0 >~ 1",
        "fidelity threshold 0.9 is a chosen value",
        "search window t_max = 2e4",
    ],
    "fig4": [
        "quoted spreads are standard deviations of Gaussian distributions",
        "curves are ensemble means over the stated number of realizations (set realizations=1 for a single trace)",
        "negative Josephson energies are redrawn",
    ],
    "fig5": [
        "u0 = (2e)^2/(E_J C0) = 10, same as the other figures; reading the charging ratio as e^2/(E_J C0) = 10 "
        "would give u0 = 40",
        "noise normalisation: on-site dephasing rate gamma/2 for C/C0 -> 0, i.e. D = (gamma/2) W^2",
        "fidelity channel extracted from the equatorial input theta = pi/2, phi = 0",
    ],
    "fig6": [
        "all chain parameters as for fig5",
        "the plotted current is the integrated current of the disconnect protocol versus t_star "
        "(units e/T per pulse); the instantaneous current of the connected chain is emitted alongside",
        "input state theta = pi (one full Cooper pair)",
        "imaginary (energy-shift) parts of the readout kernel are dropped",
    ],
}


@dataclass
class FigureBundle:
    name: str
    columns: tuple
    rows: list
    paths: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def figure_parameters(name: str, overrides: Optional[dict] = None) -> dict:
    if name not in FIGURE_DEFAULTS:
        raise ValueError(f"unknown figure {name!r}; choose one of {', '.join(FIGURES)}")
    params = dict(FIGURE_DEFAULTS[name])
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ValueError(f"{name} has no parameter {key!r}; known: {', '.join(sorted(params))}")
        params[key] = value
    return params


def compute_figure(name: str, overrides: Optional[dict] = None) -> FigureBundle:
    p = figure_parameters(name, overrides)
    fn = {"fig2": _fig_length, "fig3": _fig_length, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6}[name]
    bundle = fn(name, p)
    bundle.parameters = p
    return bundle


def _fig_length(name, p):
    spec = SweepSpec(lengths=p["lengths"], u0=p["u0"], c_ratios=p["c_ratios"], t_max=p["t_max"], dt=p["dt"],
                     threshold=p.get("threshold"))
    rows = run_length_sweep(spec)
    return FigureBundle(name, LENGTH_SWEEP_COLUMNS, rows)


def _fig4(name, p):
    base = SweepSpec(lengths=[p["length"]], u0=p["u0"], c_ratios=[p["c_ratio"]], realizations=p["realizations"],
                     t_max=p["t_max"], dt=p["dt"], master_seed=p["seed"])
    H = build_hamiltonian(ChainParams(p["length"], p["u0"], p["c_ratio"]))
    clean = fidelity_series(H, p["t_max"], p["dt"])
    bond = run_disorder_ensemble(replace(base, disorder=DisorderSpec(bond_sigma=p["bond_sigma"])), p["workers"])
    charge = run_disorder_ensemble(replace(base, disorder=DisorderSpec(charge_sigma=p["charge_sigma"])),
                                   p["workers"])
    cols = ("t", "fidelity_clean", "fidelity_bond_mean", "fidelity_bond_se", "fidelity_charge_mean",
            "fidelity_charge_se")
    rows = list(zip(clean.times.tolist(), clean.fidelity.tolist(), bond.fidelity.mean.tolist(),
                    bond.fidelity.std_error.tolist(), charge.fidelity.mean.tolist(),
                    charge.fidelity.std_error.tolist()))
    summary = {
        "first_peak_bond": {"mean": bond.peak_stats.mean, "std_error": bond.peak_stats.std_error,
                            "n": bond.peak_stats.n},
        "first_peak_charge": {"mean": charge.peak_stats.mean, "std_error": charge.peak_stats.std_error,
                              "n": charge.peak_stats.n},
    }
    return FigureBundle(name, cols, rows, summary=summary)


DEPHASING_COLUMNS = ("t", "fidelity", "rho_LL", "rho_11", "trace_error", "min_eigenvalue")


def dephasing_rows(result):
    s = result.states
    return list(zip(
        result.times.tolist(),
        result.series.fidelity.tolist(),
        np.real(s[:, -1, -1]).tolist(),
        np.real(s[:, 1, 1]).tolist(),
        result.diagnostics.trace_error.tolist(),
        result.diagnostics.min_eigenvalue.tolist(),
    ))


def run_dephasing(L, u0, c_ratio, gamma, t_max, dt=1e-3, dt_out=0.01, theta=math.pi / 2, phi=0.0):
    params = ChainParams(L, u0, c_ratio)
    model = params.capacitance()
    H = build_hamiltonian(params, model)
    rates = build_dephasing_rates(gamma, model)
    return evolve_dephasing(bloch_state(L, theta, phi), H, rates, t_max, dt, dt_out)


def _fig5(name, p):
    noisy = run_dephasing(p["length"], p["u0"], p["c_ratio"], p["gamma"], p["t_max"], p["dt"], p["dt_out"])
    H = build_hamiltonian(ChainParams(p["length"], p["u0"], p["c_ratio"]))
    clean = fidelity_closed_form_at(H, noisy.times)
    cols = DEPHASING_COLUMNS + ("fidelity_noiseless",)
    rows = [r + (c,) for r, c in zip(dephasing_rows(noisy), clean.tolist())]
    summary = {"stationary_fidelity": stationary_fidelity(p["length"]),
               "worst_state_errors": noisy.diagnostics.worst()}
    return FigureBundle(name, cols, rows, summary=summary)


def fidelity_closed_form_at(H, times):
    from .transfer import fidelity_closed_form, transfer_amplitude

    return fidelity_closed_form(transfer_amplitude(H, np.asarray(times)))


def _fig6(name, p):
    params = ChainParams(p["length"], p["u0"], p["c_ratio"])
    grid = np.arange(0.0, p["t_star_max"] + 0.5 * p["t_star_step"], p["t_star_step"])
    sweep = current_vs_tstar_sweep(params, p["Gamma"], grid, theta=p["theta"], phi=p["phi"])
    t_inst, I_inst = instantaneous_current(params, p["Gamma"], p["t_max"], theta=p["theta"], phi=p["phi"])
    summary = {
        "current_peaks": sweep.current_peaks[:10],
        "fidelity_peaks": sweep.fidelity_peaks[:10],
        "peak_offsets": sweep.peak_offsets[:10],
        "instantaneous_current": {"t": t_inst[::10], "current": I_inst[::10]},
    }
    return FigureBundle(name, SWEEP_COLUMNS, sweep.rows(), summary=summary)


def _plot(bundle: FigureBundle, path: Path):
    cols = bundle.columns
    data = {c: [row[i] for row in bundle.rows] for i, c in enumerate(cols)}
    if bundle.name in ("fig2", "fig3"):
        key = "f_peak" if bundle.name == "fig2" else "threshold_f_peak"
        Ls = sorted(set(data["L"]))
        series = {}
        for c in sorted(set(data["c_ratio"])):
            series[f"C/C0={c:g}"] = [r[cols.index(key)] for r in bundle.rows if r[1] == c]
        return write_svg(path, Ls, series, "L", "fidelity maximum", bundle.name)
    if bundle.name == "fig4":
        return write_svg(path, data["t"], {"clean": data["fidelity_clean"], "bond disorder": data["fidelity_bond_mean"],
                                           "charge disorder": data["fidelity_charge_mean"]},
                         "t E_J", "F", bundle.name)
    if bundle.name == "fig5":
        return write_svg(path, data["t"], {"noisy": data["fidelity"], "noiseless": data["fidelity_noiseless"]},
                         "t E_J", "F", bundle.name)
    return write_svg(path, data["t_star"], {"integrated current": data["integrated_current"],
                                            "fidelity (isolated)": data["fidelity_isolated"]},
                     "t* E_J", "I (e/T), F", bundle.name)


def reproduce_figure(name: str, overrides: Optional[dict] = None, out_dir=".", svg: bool = True,
                     config: Optional[dict] = None) -> FigureBundle:
    """Compute a figure and write ``<name>.csv``, ``<name>.svg`` and ``<name>.meta.json``."""
    bundle = compute_figure(name, overrides)
    out_dir = Path(out_dir)
    bundle.paths["csv"] = write_csv(out_dir / f"{name}.csv", bundle.columns, bundle.rows)
    if svg:
        bundle.paths["svg"] = _plot(bundle, out_dir / f"{name}.svg")
    bundle.paths["meta"] = write_metadata(
        out_dir / f"{name}.meta.json",
        config or {"figure": name},
        figure=name,
        parameters=bundle.parameters,
        assumptions=FIGURE_ASSUMPTIONS[name],
        summary=bundle.summary,
    )
    return bundle
