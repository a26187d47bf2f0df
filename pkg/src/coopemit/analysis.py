"""
Fits of coincidence histograms to the closed-form correlation shapes, and
the noise-corrected fidelity bound for the symmetric single-excitation state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .correlators import CorrelationTrace, analytic_g2_cw, analytic_g2_pulsed_peak
from .fitting import levenberg_marquardt
from .instrument import CountHistogram, IrfModel, convolve_values

__all__ = [
    "FitResult",
    "FidelityReport",
    "fit_g2_cw",
    "fit_g2_pulsed_peak",
    "noise_ratio_from_g2",
    "g2_from_noise_ratio",
    "entanglement_fidelity",
    "fidelity_report",
    "exponential_tail_fit",
]

Data = Union[CountHistogram, CorrelationTrace]


@dataclass
class FitResult:
    """Outcome of a histogram fit.

    ``values``/``errors`` hold fitted parameters and 1-sigma uncertainties in
    natural units (rates in 1/ns). Fixed parameters have zero error.
    ``derived`` maps derived times (ns) to ``(value, error)``.
    """

    values: dict
    errors: dict
    covariance: np.ndarray
    free: tuple
    residual_norm: float
    reduced_chi2: float
    converged: bool
    iterations: int
    message: str
    costs: list = field(default_factory=list)
    derived: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.values[name]

    def summary(self) -> str:
        parts = [f"{k}={v:.6g}+-{self.errors.get(k, 0.0):.2g}" for k, v in self.values.items()]
        parts += [f"{k}={v:.6g}+-{e:.2g}" for k, (v, e) in self.derived.items()]
        flag = "converged" if self.converged else "NOT CONVERGED"
        return f"{flag} after {self.iterations} iterations; " + ", ".join(parts)


def _data_arrays(hist: Data):
    if isinstance(hist, CountHistogram):
        y = hist.counts.astype(float)
        sigma = np.sqrt(np.maximum(y, 1.0))
    elif isinstance(hist, CorrelationTrace):
        y = np.real(np.asarray(hist.values, dtype=float))
        sigma = np.ones_like(y)
    else:
        raise TypeError(f"cannot fit {type(hist).__name__}")
    return hist.tau, y, sigma


def _propagate_inverse(value: float, grad: np.ndarray, cov: np.ndarray):
    """``1/value`` and its error, given the gradient of ``value`` w.r.t. parameters."""
    var = float(grad @ cov @ grad)
    return 1.0 / value, math.sqrt(max(var, 0.0)) / value**2


def _run_fit(tau, y, sigma, shape, names, log_mask, p0, max_iter):
    """Fit ``shape(params) -> model`` with log transforms where ``log_mask``."""
    log_mask = np.asarray(log_mask, dtype=bool)
    p0 = np.asarray(p0, dtype=float)
    if np.any(p0[log_mask] <= 0):
        raise ValueError("initial rates and amplitudes must be > 0")
    z0 = np.where(log_mask, np.log(np.where(log_mask, p0, 1.0)), p0)

    def to_params(z):
        return np.where(log_mask, np.exp(np.clip(z, -700, 700)), z)

    def resid(z):
        return (shape(to_params(z)) - y) / sigma

    res = levenberg_marquardt(resid, z0, max_iter=max_iter)
    params = to_params(res.x)
    dof = max(y.size - params.size, 1)
    chi2_red = 2.0 * res.cost / dof
    cov_z = res.covariance(chi2_red)
    D = np.diag(np.where(log_mask, params, 1.0))
    cov = D @ cov_z @ D
    values = {n: float(v) for n, v in zip(names, params)}
    errors = {n: float(math.sqrt(max(cov[i, i], 0.0))) for i, n in enumerate(names)}
    return res, values, errors, cov, chi2_red


def fit_g2_cw(
    hist: Data,
    irf: Optional[IrfModel],
    init: dict,
    *,
    max_iter: int = 200,
) -> FitResult:
    """Fit ``amplitude * (IRF * g2_coop)(tau)`` with free ``gamma``, ``gamma_d``.

    ``init`` needs ``gamma`` and ``gamma_d`` (1/ns); ``amplitude`` defaults
    to the median level of the outer tenth of the histogram. Counts are
    weighted by their Poisson errors; plain traces are fitted unweighted.
    A fit that does not converge is returned with ``converged=False``.
    """
    tau, y, sigma = _data_arrays(hist)
    edge = max(1, tau.size // 20)
    amp0 = init.get("amplitude", float(np.median(np.concatenate([y[:edge], y[-edge:]]))))
    p0 = [init["gamma"], init["gamma_d"], amp0]

    def shape(p):
        g, gd, a = p
        ideal = analytic_g2_cw(g, gd, tau)
        if irf is not None:
            ideal = convolve_values(tau, ideal, irf, "mirror")
        return a * ideal

    names = ("gamma", "gamma_d", "amplitude")
    res, values, errors, cov, chi2 = _run_fit(tau, y, sigma, shape, names, [True, True, True], p0, max_iter)
    g, gd = values["gamma"], values["gamma_d"]
    derived = {
        "decay_time": _propagate_inverse(2 * g, np.array([2.0, 0.0, 0.0]), cov),
        "dephasing_time": _propagate_inverse(gd, np.array([0.0, 1.0, 0.0]), cov),
        "coherence_time": _propagate_inverse(2 * g + gd, np.array([2.0, 1.0, 0.0]), cov),
    }
    return FitResult(
        values=values,
        errors=errors,
        covariance=cov,
        free=names,
        residual_norm=float(np.linalg.norm(res.residuals)),
        reduced_chi2=chi2,
        converged=res.converged,
        iterations=res.iterations,
        message=res.message,
        costs=res.costs,
        derived=derived,
    )


def fit_g2_pulsed_peak(
    hist: Data,
    irf: Optional[IrfModel],
    gamma_fixed: float,
    init: dict,
    *,
    background: Optional[bool] = None,
    max_iter: int = 200,
) -> FitResult:
    """Fit the zero-delay pulsed peak ``A * (IRF * peak)(tau) + B`` with ``gamma`` fixed.

    Free parameters are ``gamma_d`` and ``amplitude``; the flat background
    ``B`` is fitted only when ``background`` is true (default: when ``init``
    contains ``"background"``), and is 0 otherwise.
    """
    if not gamma_fixed > 0:
        raise ValueError("gamma_fixed must be > 0")
    tau, y, sigma = _data_arrays(hist)
    use_bg = ("background" in init) if background is None else bool(background)
    amp0 = init.get("amplitude", float(y.max()))
    p0 = [init["gamma_d"], amp0]
    names = ["gamma_d", "amplitude"]
    mask = [True, True]
    if use_bg:
        p0.append(init.get("background", 0.0))
        names.append("background")
        mask.append(False)

    def shape(p):
        ideal = analytic_g2_pulsed_peak(gamma_fixed, p[0], tau)
        if irf is not None:
            ideal = convolve_values(tau, ideal, irf, "constant")
        out = p[1] * ideal
        return out + p[2] if use_bg else out

    res, values, errors, cov, chi2 = _run_fit(tau, y, sigma, shape, tuple(names), mask, p0, max_iter)
    n = len(names)
    full_values = {"gamma": float(gamma_fixed), **values}
    full_errors = {"gamma": 0.0, **errors}
    if not use_bg:
        full_values["background"] = 0.0
        full_errors["background"] = 0.0
    gd = values["gamma_d"]
    grad = np.zeros(n)
    grad[0] = 1.0
    derived = {
        "dephasing_time": _propagate_inverse(gd, grad, cov),
        "coherence_time": _propagate_inverse(gamma_fixed + gd, grad, cov),
    }
    return FitResult(
        values=full_values,
        errors=full_errors,
        covariance=cov,
        free=tuple(names),
        residual_norm=float(np.linalg.norm(res.residuals)),
        reduced_chi2=chi2,
        converged=res.converged,
        iterations=res.iterations,
        message=res.message,
        costs=res.costs,
        derived=derived,
    )


# ---------------------------------------------------------------------------
# noise and fidelity


def g2_from_noise_ratio(p_n: float) -> float:
    """Residual ``g2(0)`` of a single emitter with noise-to-signal ratio ``p_n``."""
    if p_n < 0:
        raise ValueError("p_n must be >= 0")
    return p_n * (2.0 + p_n) / (1.0 + p_n) ** 2


def noise_ratio_from_g2(g2_single_zero: float) -> float:
    """Invert :func:`g2_from_noise_ratio`: ``p_n = 1/sqrt(1 - g2) - 1``."""
    g = float(g2_single_zero)
    if not 0.0 <= g < 1.0:
        raise ValueError(f"single-emitter g2(0) must lie in [0, 1), got {g!r}")
    return 1.0 / math.sqrt(1.0 - g) - 1.0


def entanglement_fidelity(g2_zero: float, p_n: float) -> float:
    """Lower bound on the fidelity to the symmetric single-excitation state.

    ``F = (g (1+p)^2 - p (2+p))^2 / (g (1+p)^2)``, set to 0 when the
    noise-corrected term ``g (1+p)^2 - p (2+p)`` is negative and capped at 1.
    """
    if not g2_zero > 0:
        raise ValueError("g2_zero must be > 0")
    if p_n < 0:
        raise ValueError("p_n must be >= 0")
    scaled = g2_zero * (1.0 + p_n) ** 2
    corrected = scaled - p_n * (2.0 + p_n)
    if corrected <= 0:
        return 0.0
    return min(1.0, corrected**2 / scaled)


@dataclass(frozen=True)
class FidelityReport:
    g2_zero: float
    g2_single_zero: float
    p_n: float
    fidelity_lower_bound: float

    def summary(self) -> str:
        return (
            f"g2(0)={self.g2_zero:.4g} single-emitter g2(0)={self.g2_single_zero:.4g} "
            f"p_n={self.p_n:.4f} F>={self.fidelity_lower_bound:.4f}"
        )


def fidelity_report(g2_zero: float, g2_single_zero: float) -> FidelityReport:
    p = noise_ratio_from_g2(g2_single_zero)
    return FidelityReport(g2_zero, g2_single_zero, p, entanglement_fidelity(g2_zero, p))


# ---------------------------------------------------------------------------
# lifetimes


def exponential_tail_fit(intensity: CorrelationTrace, t_min: float, t_max: Optional[float] = None) -> float:
    """Decay constant (ns) from a straight-line fit of ``log I`` for ``t >= t_min``.

    Raises
    ------
    ValueError
        If the window holds fewer than two points, any nonpositive value, or
        the intensity does not decay.
    """
    t = intensity.tau
    y = np.real(intensity.values)
    m = t >= t_min
    if t_max is not None:
        m &= t <= t_max
    if m.sum() < 2:
        raise ValueError("fewer than two points in the fit window")
    if np.any(y[m] <= 0):
        raise ValueError("intensity must be positive throughout the fit window")
    slope = np.polyfit(t[m], np.log(y[m]), 1)[0]
    if slope >= 0:
        raise ValueError("intensity does not decay in the fit window")
    return float(-1.0 / slope)
