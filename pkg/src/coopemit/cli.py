"""
Command-line front end.

Every command reads a flat configuration (``--config`` plus ``--set
key=value`` overrides), writes ``<out>/<command>.csv`` and prints a one-line
summary. Exit codes: 0 success, 1 configuration or input error, 2 numerical
failure (degenerate steady state, non-converged fit).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional

import numpy as np

from . import __version__
from .analysis import exponential_tail_fit, fidelity_report, fit_g2_cw, fit_g2_pulsed_peak
from .config import ConfigError, ExperimentConfig, config_hash, load_config, parse_config
from .correlators import (
    CorrelationTrace,
    default_tau_grid,
    g2_cw,
    g2_pulsed,
    integrate_peak,
    time_resolved_intensity,
)
from .dynamics import EmissionModel, NumericalError, build_generator, excited_state, ground_state
from .instrument import convolve, sample_histogram
from .interference import hom_cw, hom_pulsed_pair
from .traceio import TraceFile, TraceFileError, histogram_trace, load_histogram, write_trace

__all__ = ["main", "COMMANDS"]


class FitFailed(RuntimeError):
    """A fit finished without converging; output is still written."""


def _unit(key: str) -> str:
    for suffix, unit in (
        ("_rad_per_ns", "rad/ns"),
        ("_per_ns", "1/ns"),
        ("_inv_ns", "ns"),
        ("_ns", "ns"),
        ("_rad", "rad"),
        ("_pi", "pi_rad"),
    ):
        if key.endswith(suffix):
            return unit
    return "1"


def _window_label(w: float) -> str:
    return f"g2_window_{format(w, 'g')}ns"


def _fmt(x: float, digits: int = 4) -> str:
    return format(x, f".{digits}g")


def _require_cw(cfg: ExperimentConfig, command: str):
    if cfg.drive().is_pulsed:
        raise ConfigError(f"drive: {command} needs a CW drive (incoherent-cw or coherent-cw)")


def _require_pulsed(cfg: ExperimentConfig, command: str):
    if not cfg.drive().is_pulsed:
        raise ConfigError(f"drive: {command} needs drive = \"coherent-pulsed\"")


def _cw_grid(cfg: ExperimentConfig) -> np.ndarray:
    n = cfg["tau_points"]
    if cfg.get("tau_max_ns") is not None:
        if not cfg["tau_max_ns"] > 0:
            raise ConfigError("tau_max_ns: must be > 0")
        return np.linspace(0.0, float(cfg["tau_max_ns"]), n)
    L = build_generator(cfg.model, cfg.emitter_params(), cfg.drive())
    return default_tau_grid(L, n)


def _trace_file(cfg, command, columns, units, cols, meta) -> TraceFile:
    data = np.column_stack([np.real(np.asarray(c, dtype=complex)) for c in cols])
    return TraceFile(command, config_hash(cfg), tuple(columns), tuple(units), data, meta)


# ---------------------------------------------------------------------------
# commands; each returns (trace file, summary line)


def cmd_g2_cw(cfg: ExperimentConfig, workers: int):
    _require_cw(cfg, "g2-cw")
    params, drive = cfg.emitter_params(), cfg.drive()
    trace = g2_cw(cfg.model, params, drive, _cw_grid(cfg)).mirrored()
    if cfg["apply_irf"]:
        trace = convolve(trace, cfg.irf())
    zero = trace.tau.size // 2
    imin = int(np.argmin(trace.values))
    meta = {
        "g2_zero": float(trace.values[zero]),
        "g2_min": float(trace.values[imin]),
        "g2_min_delay_ns": float(abs(trace.tau[imin])),
    }
    summary = (
        f"g2-cw: model={cfg.model.value} g2(0)={_fmt(meta['g2_zero'])} "
        f"min={_fmt(meta['g2_min'])} at {_fmt(meta['g2_min_delay_ns'])} ns"
    )
    if cfg.model is EmissionModel.COOPERATIVE and params.gamma_d > 0 and not cfg["apply_irf"]:
        half = trace.tau >= 0
        data = CorrelationTrace(trace.tau[half], trace.values[half])
        eff = 0.5 * (params.gamma + params.gamma_p)
        fit = fit_g2_cw(data, None, dict(gamma=eff, gamma_d=params.gamma_d, amplitude=1.0))
        if fit.converged:
            meta["coherence_time_ns"] = fit.derived["coherence_time"][0]
            summary += f" coherence_time={_fmt(meta['coherence_time_ns'])} ns"
    tf = _trace_file(cfg, "g2-cw", ["delay_ns", "g2"], ["ns", "1"], [trace.tau, trace.values], meta)
    return tf, summary


def _pulsed_windows(cfg, hist, meta):
    parts = []
    for w in cfg["windows_ns"]:
        v = integrate_peak(hist, 0.0, float(w))
        meta[_window_label(w)] = v
        parts.append(f"g2[{format(w, 'g')} ns]={_fmt(v)}")
    return parts


def cmd_g2_pulsed(cfg: ExperimentConfig, workers: int):
    _require_pulsed(cfg, "g2-pulsed")
    hist = g2_pulsed(
        cfg.model, cfg.emitter_params(), cfg.drive(), cfg.get("tau_span_ns"), bin_width=cfg["bin_width_ns"]
    )
    if cfg["apply_irf"]:
        hist = convolve(hist, cfg.irf())
    meta = {}
    parts = _pulsed_windows(cfg, hist, meta)
    tf = _trace_file(cfg, "g2-pulsed", ["delay_ns", "coincidences"], ["ns", "1/ns"], [hist.tau, hist.values], meta)
    return tf, f"g2-pulsed: model={cfg.model.value} " + " ".join(parts)


def cmd_intensity(cfg: ExperimentConfig, workers: int):
    model, params, drive = cfg.model, cfg.emitter_params(), cfg.drive()
    start = cfg["initial_state"]
    if start == "periodic":
        _require_pulsed(cfg, "intensity with initial_state = \"periodic\"")
        rho0 = None
    else:
        rho0 = excited_state(model.dim) if start == "excited" else ground_state(model.dim)
    if cfg.get("t_max_ns") is not None:
        span = float(cfg["t_max_ns"])
    else:
        span = drive.period if drive.is_pulsed else 10.0 / params.gamma
    t = np.linspace(0.0, span, cfg["t_points"])
    trace = time_resolved_intensity(model, params, drive, t, rho0=rho0)
    meta = {}
    summary = f"intensity: model={model.value} start={start}"
    try:
        tail = exponential_tail_fit(trace, float(cfg["tail_t_min_ns"]))
        meta["tail_decay_time_ns"] = tail
        summary += f" tail_decay_time={_fmt(tail)} ns"
    except ValueError as exc:
        summary += f" tail fit unavailable ({exc})"
    tf = _trace_file(cfg, "intensity", ["time_ns", "intensity"], ["ns", "1"], [trace.tau, trace.values], meta)
    return tf, summary


def cmd_hom_cw(cfg: ExperimentConfig, workers: int):
    _require_cw(cfg, "hom-cw")
    h = hom_cw(cfg.model, cfg.emitter_params(), cfg.drive(), _cw_grid(cfg), cfg.hom())
    par, perp, vis = h.parallel, h.perpendicular, h.visibility
    if cfg["apply_irf"]:
        from .interference import visibility

        par, perp = convolve(par, cfg.irf()), convolve(perp, cfg.irf())
        vis = visibility(par, perp)
    zero = vis.tau.size // 2
    meta = {"visibility_zero": float(vis.values[zero]), "ctw_ns": float(np.trapezoid(vis.values, vis.tau))}
    tf = _trace_file(
        cfg,
        "hom-cw",
        ["delay_ns", "g2_par", "g2_perp", "visibility"],
        ["ns", "1", "1", "1"],
        [par.tau, par.values, perp.values, vis.values],
        meta,
    )
    summary = f"hom-cw: model={cfg.model.value} V(0)={_fmt(meta['visibility_zero'])} CTW={_fmt(meta['ctw_ns'])} ns"
    return tf, summary


def cmd_hom_pulsed(cfg: ExperimentConfig, workers: int):
    _require_pulsed(cfg, "hom-pulsed")
    pair = hom_pulsed_pair(
        cfg.model,
        cfg.emitter_params(),
        cfg.drive(),
        cfg.hom(),
        tau_span=cfg.get("tau_span_ns"),
        bin_width=cfg["bin_width_ns"],
    )
    irf = cfg.irf() if cfg["apply_irf"] else None
    meta = {}
    parts = []
    for w in cfg["windows_ns"]:
        v = pair.visibility(float(w), irf)
        meta[f"visibility_window_{format(w, 'g')}ns"] = v
        parts.append(f"V[{format(w, 'g')} ns]={_fmt(v)}")
    par, perp = pair.parallel, pair.perpendicular
    if irf is not None:
        par, perp = convolve(par, irf), convolve(perp, irf)
    tf = _trace_file(
        cfg,
        "hom-pulsed",
        ["delay_ns", "g2_par", "g2_perp"],
        ["ns", "1/ns", "1/ns"],
        [par.tau, par.values, perp.values],
        meta,
    )
    return tf, f"hom-pulsed: model={cfg.model.value} " + " ".join(parts)


def sweep_point(values: dict) -> list:
    """Metrics for one sweep entry (top-level so worker processes can import it)."""
    cfg = parse_config({k: v for k, v in values.items() if v is not None})
    params, drive = cfg.emitter_params(), cfg.drive()
    if drive.is_pulsed:
        hist = g2_pulsed(cfg.model, params, drive, cfg.get("tau_span_ns"), bin_width=cfg["bin_width_ns"])
        if cfg["apply_irf"]:
            hist = convolve(hist, cfg.irf())
        return [integrate_peak(hist, 0.0, float(w)) for w in cfg["windows_ns"]]
    tr = g2_cw(cfg.model, params, drive, [0.0])
    return [float(tr.values[0])]


def cmd_sweep(cfg: ExperimentConfig, workers: int):
    key = cfg.get("sweep_parameter")
    if key is None:
        raise ConfigError("sweep_parameter: required by the sweep command")
    values = [v for v in cfg["sweep_values"]]
    jobs = [cfg.replace(**{key: v}).values for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(sweep_point, jobs))
    else:
        results = [sweep_point(j) for j in jobs]
    if cfg.drive().is_pulsed:
        names = [_window_label(w) for w in cfg["windows_ns"]]
    else:
        names = ["g2_zero"]
    data = np.array([[float(v)] + list(r) for v, r in zip(values, results)], dtype=float)
    meta = {"sweep_parameter": key}
    for k, name in enumerate(names):
        meta["argmax_" + name] = float(values[int(np.argmax(data[:, k + 1]))])
        meta["argmin_" + name] = float(values[int(np.argmin(data[:, k + 1]))])
    tf = TraceFile("sweep", config_hash(cfg), tuple([key] + names), tuple([_unit(key)] + ["1"] * len(names)), data, meta)
    shown = " ".join(f"{format(v, 'g')}:{_fmt(r[0])}" for v, r in zip(values, results))
    summary = (
        f"sweep: {key} -> {names[0]} [{shown}] max at {format(meta['argmax_' + names[0]], 'g')}, "
        f"min at {format(meta['argmin_' + names[0]], 'g')}"
    )
    return tf, summary


def _fit_meta(fit) -> dict:
    meta = {"converged": bool(fit.converged), "iterations": fit.iterations, "reduced_chi2": fit.reduced_chi2}
    for k, v in fit.values.items():
        meta[f"fit_{k}"] = v
        meta[f"fit_{k}_err"] = fit.errors.get(k, 0.0)
    for k, (v, e) in fit.derived.items():
        meta[f"fit_{k}_ns"] = v
        meta[f"fit_{k}_ns_err"] = e
    return meta


def _synth_grid(cfg, default_span):
    step = float(cfg["fit_bin_width_ns"])
    span = float(cfg.get("fit_span_ns", default_span))
    n = int(math.floor(span / step + 1e-9))
    if n < 2:
        raise ConfigError("fit_span_ns: must cover at least two bins")
    return step * np.arange(-n, n + 1)


def cmd_fit_cw(cfg: ExperimentConfig, workers: int):
    params = cfg.emitter_params()
    irf = cfg.irf()
    eff_gamma = 0.5 * (params.gamma + params.gamma_p)
    if cfg.get("histogram_path"):
        hist = load_histogram(cfg["histogram_path"])
        source = cfg["histogram_path"]
    else:
        _require_cw(cfg, "fit-cw")
        tau = _synth_grid(cfg, 5.0 / (params.gamma + params.gamma_p))
        ideal = g2_cw(cfg.model, params, cfg.drive(), tau)
        hist = sample_histogram(convolve(ideal, irf), float(cfg["total_counts"]), cfg["seed"])
        source = "synthetic"
    init = dict(
        gamma=float(cfg.get("init_gamma_per_ns", eff_gamma)),
        gamma_d=float(cfg.get("init_gamma_d_per_ns", params.gamma_d or 1.0)),
    )
    if cfg.get("init_amplitude") is not None:
        init["amplitude"] = float(cfg["init_amplitude"])
    fit = fit_g2_cw(hist, irf, init)
    model_curve = _model_curve_cw(hist, irf, fit)
    meta = {"source": source, **_fit_meta(fit)}
    tf = histogram_trace(hist, "fit-cw", config_hash(cfg), meta, [("model", "1", model_curve)])
    ct = fit.derived["coherence_time"]
    summary = (
        f"fit-cw: gamma={_fmt(fit['gamma'])}+-{_fmt(fit.errors['gamma'], 2)} /ns "
        f"gamma_d={_fmt(fit['gamma_d'])}+-{_fmt(fit.errors['gamma_d'], 2)} /ns "
        f"(2gamma)^-1={_fmt(fit.derived['decay_time'][0])} ns "
        f"coherence_time={_fmt(ct[0])}+-{_fmt(ct[1], 2)} ns chi2_red={_fmt(fit.reduced_chi2)}"
    )
    if not fit.converged:
        raise FitFailed(tf, summary + " NOT CONVERGED")
    return tf, summary


def _model_curve_cw(hist, irf, fit):
    from .correlators import analytic_g2_cw
    from .instrument import convolve_values

    ideal = analytic_g2_cw(fit["gamma"], fit["gamma_d"], hist.tau)
    return fit["amplitude"] * convolve_values(hist.tau, ideal, irf, "mirror")


def cmd_fit_pulsed(cfg: ExperimentConfig, workers: int):
    params = cfg.emitter_params()
    irf = cfg.irf()
    if cfg.get("histogram_path"):
        hist = load_histogram(cfg["histogram_path"])
        source = cfg["histogram_path"]
    else:
        _require_pulsed(cfg, "fit-pulsed")
        drive = cfg.drive()
        bw = float(cfg["bin_width_ns"])
        full = g2_pulsed(cfg.model, params, drive, drive.period, bin_width=bw)
        span = float(cfg.get("fit_span_ns", min(5.0 / params.gamma, 0.5 * drive.period)))
        keep = np.abs(full.tau) <= span + 1e-9
        peak = CorrelationTrace(full.tau[keep], full.central[keep])
        hist = sample_histogram(convolve(peak, irf, mode="constant"), float(cfg["total_counts"]), cfg["seed"])
        source = "synthetic"
    init = {"gamma_d": float(cfg.get("init_gamma_d_per_ns", params.gamma_d or 1.0))}
    if cfg.get("init_amplitude") is not None:
        init["amplitude"] = float(cfg["init_amplitude"])
    fit = fit_g2_pulsed_peak(hist, irf, params.gamma, init, background=cfg["fit_background"])
    from .correlators import analytic_g2_pulsed_peak
    from .instrument import convolve_values

    curve = fit["amplitude"] * convolve_values(
        hist.tau, analytic_g2_pulsed_peak(params.gamma, fit["gamma_d"], hist.tau), irf, "constant"
    ) + fit["background"]
    meta = {"source": source, **_fit_meta(fit)}
    tf = histogram_trace(hist, "fit-pulsed", config_hash(cfg), meta, [("model", "1", curve)])
    ct = fit.derived["coherence_time"]
    summary = (
        f"fit-pulsed: gamma(fixed)={_fmt(params.gamma)} /ns gamma_d={_fmt(fit['gamma_d'])}"
        f"+-{_fmt(fit.errors['gamma_d'], 2)} /ns dephasing_time={_fmt(fit.derived['dephasing_time'][0])} ns "
        f"coherence_time={_fmt(ct[0])}+-{_fmt(ct[1], 2)} ns"
    )
    if not fit.converged:
        raise FitFailed(tf, summary + " NOT CONVERGED")
    return tf, summary


def cmd_fidelity(cfg: ExperimentConfig, workers: int):
    for key in ("g2_zero", "g2_single_zero"):
        if cfg.get(key) is None:
            raise ConfigError(f"{key}: required by the fidelity command")
    try:
        rep = fidelity_report(float(cfg["g2_zero"]), float(cfg["g2_single_zero"]))
    except ValueError as exc:
        raise ConfigError(f"g2_zero/g2_single_zero: {exc}") from None
    data = np.array([[rep.g2_zero, rep.g2_single_zero, rep.p_n, rep.fidelity_lower_bound]])
    tf = TraceFile(
        "fidelity",
        config_hash(cfg),
        ("g2_zero", "g2_single_zero", "p_n", "fidelity_lower_bound"),
        ("1", "1", "1", "1"),
        data,
        {},
    )
    return tf, f"fidelity: p_n={rep.p_n:.3f} F>={rep.fidelity_lower_bound:.2f} (p_n={rep.p_n:.6g}, F={rep.fidelity_lower_bound:.6g})"


COMMANDS: dict = {
    "g2-cw": cmd_g2_cw,
    "g2-pulsed": cmd_g2_pulsed,
    "intensity": cmd_intensity,
    "hom-cw": cmd_hom_cw,
    "hom-pulsed": cmd_hom_pulsed,
    "sweep": cmd_sweep,
    "fit-cw": cmd_fit_cw,
    "fit-pulsed": cmd_fit_pulsed,
    "fidelity": cmd_fidelity,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coopemit",
        description="Photon correlations, interference and fits for one or two quantum emitters.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS), help="what to compute")
    p.add_argument("--config", metavar="PATH", help="flat TOML configuration file")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], help="override one configuration key (repeatable)")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, help="random seed (overrides the configuration)")
    p.add_argument("--workers", type=int, help="parallel sweep workers (overrides the configuration)")
    p.add_argument("--quiet", action="store_true", help="do not print the summary line")
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    err = sys.stderr
    try:
        cfg = load_config(args.config, args.set)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed: must be >= 0")
            cfg = cfg.replace(seed=args.seed)
        workers = cfg["workers"] if args.workers is None else args.workers
        if workers < 1:
            raise ConfigError("workers: must be >= 1")
        command: Callable = COMMANDS[args.command]
        code = 0
        try:
            tf, summary = command(cfg, workers)
        except FitFailed as exc:
            tf, summary = exc.args
            code = 2
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{args.command}.csv")
        write_trace(path, tf)
        if not args.quiet:
            print(summary)
        if code:
            print("error: fit did not converge", file=err)
        return code
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=err)
        return 2
    except (ConfigError, TraceFileError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    except ValueError as exc:
        print(f"error: invalid input: {exc}", file=err)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
