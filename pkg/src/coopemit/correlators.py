"""
Two-time correlation functions via the quantum regression recipe.

A correlator ``<A^+(t) B^+(t+tau) B(t+tau) A(t)>`` is obtained by evolving the
state to ``t``, sandwiching it with the jump operators (``A rho A^+``),
propagating that pseudo-state over ``tau`` with the same generator and
reading out ``<B^+ B>``. Stationary (CW) correlators start from the steady
state; pulsed correlators are period-integrated (see :mod:`coopemit.periodic`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .dynamics import (
    DriveProtocol,
    EmissionModel,
    EmitterParams,
    Liouvillian,
    build_generator,
    check_density,
    propagator,
    spre,
    sprepost,
    steady_state,
    vec,
)
from .emission import DipoleSet, channel_rate, dipole_set
from .periodic import periodic_lags, periodic_start_state

__all__ = [
    "Normalization",
    "CorrelationTrace",
    "PulsedHistogram",
    "two_time_g2",
    "g2_cw",
    "g1_cw",
    "analytic_g2_cw",
    "analytic_g2_pulsed_peak",
    "g2_pulsed",
    "integrate_peak",
    "time_resolved_intensity",
    "default_tau_grid",
    "build_histogram",
]


class Normalization(enum.Enum):
    RAW = "raw"
    STEADY_STATE = "steady-state"
    STEADY_STATE_SQUARED = "steady-state-squared"
    INTENSITY_PRODUCT = "intensity-product"
    SIDE_PEAK = "side-peak"


def _frozen(a, dtype=None) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CorrelationTrace:
    """Values on a delay (or time) grid in ns.

    ``quantity`` labels what is stored (``"g1"``, ``"g2"``, ``"intensity"``,
    ``"hom"``, ``"visibility"``); ``g2``-type values must be nonnegative.
    """

    tau: np.ndarray
    values: np.ndarray
    normalization: Normalization = Normalization.RAW
    quantity: str = "g2"

    def __post_init__(self):
        tau = _frozen(self.tau, float)
        vals = np.asarray(self.values)
        vals = _frozen(vals, complex if np.iscomplexobj(vals) else float)
        if tau.ndim != 1 or vals.shape != tau.shape:
            raise ValueError("tau and values must be 1-d arrays of equal length")
        if tau.size > 1 and not np.all(np.diff(tau) > 0):
            raise ValueError("delay grid must be strictly increasing")
        if self.quantity in ("g2", "hom") and vals.size:
            lowest = np.min(np.real(vals))
            if lowest < -1e-9:
                raise ValueError(f"{self.quantity} values must be >= 0 (min {lowest:.3e})")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "normalization", Normalization(self.normalization))

    def __len__(self):
        return self.tau.size

    @property
    def spacing(self) -> float:
        """Grid spacing; raises if the grid is not uniform."""
        d = np.diff(self.tau)
        if d.size == 0 or np.ptp(d) > 1e-9 * max(abs(d[0]), 1e-300):
            raise ValueError("grid is not uniform")
        return float(np.mean(d))

    def at(self, tau):
        """Linear interpolation (real and imaginary parts separately)."""
        if np.iscomplexobj(self.values):
            return np.interp(tau, self.tau, self.values.real) + 1j * np.interp(
                tau, self.tau, self.values.imag
            )
        return np.interp(tau, self.tau, self.values)

    def mirrored(self) -> "CorrelationTrace":
        """Extend a ``tau >= 0`` trace to negative delays (``g1`` is conjugated)."""
        if self.tau[0] != 0.0:
            raise ValueError("mirroring requires a grid starting at tau = 0")
        neg = self.values[:0:-1]
        if self.quantity == "g1":
            neg = np.conj(neg)
        return CorrelationTrace(
            np.concatenate([-self.tau[:0:-1], self.tau]),
            np.concatenate([neg, self.values]),
            self.normalization,
            self.quantity,
        )

    def with_values(self, values, *, quantity: Optional[str] = None, normalization=None):
        return CorrelationTrace(
            self.tau,
            values,
            self.normalization if normalization is None else normalization,
            self.quantity if quantity is None else quantity,
        )


@dataclass(frozen=True)
class PulsedHistogram:
    """Coincidence density versus delay for a pulse train.

    ``values`` is normalised so that one side peak integrates to 1;
    ``central`` holds the zero-delay peak alone (same normalisation).
    """

    tau: np.ndarray
    values: np.ndarray
    period: float
    n_side_peaks: int
    central: Optional[np.ndarray] = None

    def __post_init__(self):
        tau = _frozen(self.tau, float)
        vals = _frozen(self.values, float)
        if tau.ndim != 1 or vals.shape != tau.shape:
            raise ValueError("tau and values must be 1-d arrays of equal length")
        if tau.size > 1 and not np.all(np.diff(tau) > 0):
            raise ValueError("delay grid must be strictly increasing")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "values", vals)
        if self.central is not None:
            object.__setattr__(self, "central", _frozen(self.central, float))

    @property
    def bin_width(self) -> float:
        return float(self.tau[1] - self.tau[0])

    def with_values(self, values) -> "PulsedHistogram":
        return PulsedHistogram(self.tau, values, self.period, self.n_side_peaks)


# ---------------------------------------------------------------------------
# closed forms


def analytic_g2_cw(gamma: float, gamma_d: float, tau):
    """Cooperative CW correlation ``1 - (exp(-2 g |t|) - exp(-(2 g + g_d) |t|)) / 2``."""
    t = np.abs(np.asarray(tau, dtype=float))
    out = 1.0 - 0.5 * (np.exp(-2.0 * gamma * t) - np.exp(-(2.0 * gamma + gamma_d) * t))
    return float(out) if out.ndim == 0 else out


def analytic_g2_pulsed_peak(gamma: float, gamma_d: float, tau):
    """Zero-delay pulsed peak ``(exp(-g |t|) + exp(-(g + g_d) |t|)) / 2``."""
    t = np.abs(np.asarray(tau, dtype=float))
    out = 0.5 * (np.exp(-gamma * t) + np.exp(-(gamma + gamma_d) * t))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# helpers


def _readout(dipoles: DipoleSet) -> np.ndarray:
    """Row vector ``c`` with ``c @ vec(rho) = sum_i w_i Tr[A_i^+ A_i rho]``."""
    return vec(dipoles.intensity_operator().T)


def _jump(dipoles: DipoleSet) -> np.ndarray:
    """Superoperator ``rho -> sum_i w_i A_i rho A_i^+``."""
    return sum(w * sprepost(A, A.conj().T) for A, w in dipoles)


def _march(M: np.ndarray, x0: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """``expm(M * tau) @ x0`` for sorted ``taus >= 0`` (rows of the result)."""
    out = np.empty((taus.size,) + x0.shape, dtype=complex)
    if taus.size == 0:
        return out
    d = np.diff(taus)
    uniform = d.size > 0 and np.ptp(d) <= 1e-12 * max(d[0], 1e-300)
    v = expm(M * taus[0]) @ x0 if taus[0] > 0 else x0.astype(complex)
    out[0] = v
    if uniform:
        E = expm(M * d[0])
        for i in range(1, taus.size):
            v = E @ v
            out[i] = v
    else:
        for i in range(1, taus.size):
            v = expm(M * d[i - 1]) @ v
            out[i] = v
    return out


def _stationary(model, params, drive):
    drive = DriveProtocol() if drive is None else drive
    if drive.is_pulsed:
        raise ValueError("stationary correlators need a CW (static) drive")
    L = build_generator(model, params, drive)
    rho = steady_state(L)
    dipoles = dipole_set(model)
    c = _readout(dipoles)
    level = float(np.real(c @ vec(rho)))
    if level <= 1e-300:
        raise ValueError("steady-state intensity is zero; correlation is undefined")
    return L, rho, dipoles, c, level


def default_tau_grid(L: Liouvillian, n_points: int = 2001) -> np.ndarray:
    """``n_points`` delays over ``[0, 5 x`` the slowest relaxation time``]``."""
    lam = np.linalg.eigvals(L.static)
    rates = np.abs(lam.real)
    rates = rates[rates > 1e-9 * max(1.0, rates.max())]
    if rates.size == 0:
        raise ValueError("generator has no relaxation; cannot choose a delay grid")
    return np.linspace(0.0, 5.0 / rates.min(), n_points)


def _symmetric_eval(tau_grid, fn, conj_negative=False):
    tau_grid = np.asarray(tau_grid, dtype=float)
    mags, inverse = np.unique(np.abs(tau_grid), return_inverse=True)
    vals = fn(mags)[inverse]
    if conj_negative:
        vals = np.where(tau_grid < 0, np.conj(vals), vals)
    return vals


# ---------------------------------------------------------------------------
# stationary correlators


def g2_cw(model, params: EmitterParams, drive: Optional[DriveProtocol] = None, tau_grid=None) -> CorrelationTrace:
    """Normalised stationary ``g2(tau)`` for the model's detected dipoles.

    Negative delays reuse ``|tau|``, so the trace is exactly symmetric.

    Raises
    ------
    NumericalError
        If the steady state is not unique.
    ValueError
        For a pulsed drive or a dark steady state.
    """
    L, rho, dipoles, c, level = _stationary(model, params, drive)
    tau_grid = default_tau_grid(L) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    x0 = _jump(dipoles) @ vec(rho)

    def fn(mags):
        return (_march(L.static, x0, mags) @ c).real / level**2

    return CorrelationTrace(
        tau_grid, _symmetric_eval(tau_grid, fn), Normalization.STEADY_STATE_SQUARED, "g2"
    )


def g1_cw(model, params: EmitterParams, drive: Optional[DriveProtocol] = None, tau_grid=None) -> CorrelationTrace:
    """Normalised stationary first-order coherence ``<A^+(tau) A(0)> / <A^+ A>``.

    For several detected dipoles the field correlators add with their weights.
    ``g1(-tau) = conj(g1(tau))``.
    """
    L, rho, dipoles, _, level = _stationary(model, params, drive)
    tau_grid = default_tau_grid(L) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    r = vec(rho)
    starts = [(w, vec(A.conj()), spre(A) @ r) for A, w in dipoles]

    def fn(mags):
        total = np.zeros(mags.size, dtype=complex)
        for w, row, x0 in starts:
            total += w * (_march(L.static, x0, mags) @ row)
        return total / level

    return CorrelationTrace(
        tau_grid, _symmetric_eval(tau_grid, fn, conj_negative=True), Normalization.STEADY_STATE, "g1"
    )


def two_time_g2(
    model,
    params: EmitterParams,
    drive: Optional[DriveProtocol],
    rho0: np.ndarray,
    t1: float,
    tau_grid,
    *,
    normalize: bool = False,
) -> CorrelationTrace:
    """Two-time ``G2(t1, tau)`` from an explicit initial state.

    Returns the raw correlator unless ``normalize`` is set, in which case it
    is divided by ``I(t1) * I(t1 + tau)``.
    """
    model = EmissionModel.parse(model)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (model.dim, model.dim):
        raise ValueError(
            f"state of shape {rho0.shape} does not match the {model.value} model (dim {model.dim})"
        )
    check_density(rho0)
    if t1 < 0:
        raise ValueError("t1 must be >= 0")
    taus = np.asarray(tau_grid, dtype=float)
    if taus.ndim != 1 or taus.size == 0 or taus[0] < 0 or np.any(np.diff(taus) <= 0):
        raise ValueError("tau grid must be nonnegative and strictly increasing")

    L = build_generator(model, params, drive)
    dipoles = dipole_set(model)
    c = _readout(dipoles)
    r1 = propagator(L, t1) @ vec(rho0) if t1 > 0 else vec(rho0)
    cols = np.stack([_jump(dipoles) @ r1, r1], axis=1)

    G = np.empty(taus.size)
    I_later = np.empty(taus.size)
    t_prev = 0.0
    for i, tau in enumerate(taus):
        if tau > t_prev:
            cols = propagator(L, tau - t_prev, t1 + t_prev) @ cols
            t_prev = tau
        G[i] = np.real(c @ cols[:, 0])
        I_later[i] = np.real(c @ cols[:, 1])

    if not normalize:
        return CorrelationTrace(taus, G, Normalization.RAW, "g2")
    I1 = float(np.real(c @ r1))
    denom = I1 * I_later
    if np.any(denom <= 1e-300):
        raise ValueError("intensity vanishes on the grid; normalised g2 is undefined")
    return CorrelationTrace(taus, G / denom, Normalization.INTENSITY_PRODUCT, "g2")


# ---------------------------------------------------------------------------
# pulsed correlators


def build_histogram(central: np.ndarray, side: np.ndarray, bin_width: float, period: float, tau_span: float, scale: float):
    """Assemble ``sum_n peak_n(tau - n T)`` on a symmetric grid.

    ``central`` and ``side`` are one-sided peak shapes on lags ``k * bin_width``
    and ``period`` must be an integer number of bins.
    """
    n_T = int(round(period / bin_width))
    J = int(math.floor(tau_span / bin_width + 1e-9))
    idx = np.arange(-J, J + 1)
    tau = bin_width * idx
    n_max = J // n_T + 1
    cent = np.zeros(idx.size)
    ok = np.abs(idx) < central.size
    cent[ok] = central[np.abs(idx[ok])]
    vals = cent.copy()
    for n in range(-n_max, n_max + 1):
        if n == 0:
            continue
        lag = np.abs(idx - n * n_T)
        ok = lag < side.size
        vals[ok] += side[lag[ok]]
    n_side = 2 * int(math.floor(tau_span / period + 1e-9))
    return PulsedHistogram(tau, vals / scale, period, n_side, central=cent / scale)


def g2_pulsed(
    model,
    params: EmitterParams,
    pulse: DriveProtocol,
    tau_span: Optional[float] = None,
    *,
    bin_width: float = 0.004,
    rho0: Optional[np.ndarray] = None,
) -> PulsedHistogram:
    """Coincidence histogram of a pulse train, normalised to unit side-peak area.

    The zero-delay peak integrates the two-time correlator over start times
    in one period; the peaks at ``n * period`` are autocorrelations of the
    single-period intensity. ``bin_width`` is nudged so the period is a whole
    number of bins.

    Raises
    ------
    ValueError
        If the drive is not pulsed or ``tau_span`` is shorter than a period.
    """
    if not pulse.is_pulsed:
        raise ValueError("g2_pulsed needs a pulsed drive")
    T = pulse.period
    tau_span = 2.5 * T if tau_span is None else float(tau_span)
    if tau_span < T:
        raise ValueError(f"tau_span ({tau_span} ns) must cover at least one period ({T} ns)")
    L = build_generator(model, params, pulse)
    lags = periodic_lags(L, dipole_set(model), T - 0.5 * bin_width, bin_width, rho0=rho0)
    if lags.emitted <= 0:
        raise ValueError("no emission per period; histogram is undefined")
    return build_histogram(lags.g2, lags.side, lags.bin_width, T, tau_span, lags.emitted**2)


def _window_area(tau: np.ndarray, y: np.ndarray, a: float, b: float) -> float:
    inside = (tau > a) & (tau < b)
    x = np.concatenate([[a], tau[inside], [b]])
    v = np.concatenate([[np.interp(a, tau, y)], y[inside], [np.interp(b, tau, y)]])
    return float(np.trapezoid(v, x))


def integrate_peak(h: PulsedHistogram, center: float, window: float) -> float:
    """Area in ``center +- window/2`` relative to the mean same-window side-peak area.

    Side peaks are those at nonzero multiples of the period whose window lies
    inside the histogram.

    Raises
    ------
    ValueError
        If the window exceeds one period (it would straddle two peaks), falls
        outside the histogram, or no side peak is available.
    """
    if not window > 0:
        raise ValueError("window must be > 0")
    if window > h.period:
        raise ValueError(f"window {window} ns exceeds the period {h.period} ns and overlaps two peaks")
    lo, hi = h.tau[0], h.tau[-1]
    half = 0.5 * window
    eps = 1e-9 * h.period
    if center - half < lo - eps or center + half > hi + eps:
        raise ValueError("integration window extends beyond the histogram")
    areas = []
    n = 1
    while True:
        found = False
        for c in (n * h.period, -n * h.period):
            if c - half >= lo - eps and c + half <= hi + eps:
                areas.append(_window_area(h.tau, h.values, c - half, c + half))
                found = True
        if not found:
            break
        n += 1
    if not areas:
        raise ValueError("no complete side peak inside the histogram for this window")
    return _window_area(h.tau, h.values, center - half, center + half) / float(np.mean(areas))


# ---------------------------------------------------------------------------
# time-resolved emission


def time_resolved_intensity(
    model,
    params: EmitterParams,
    pulse: Optional[DriveProtocol] = None,
    t_grid=None,
    *,
    rho0: Optional[np.ndarray] = None,
    flux: bool = False,
) -> CorrelationTrace:
    """Detected intensity ``sum_i w_i <A_i^+ A_i>(t)``.

    For a pulsed drive the evolution starts at the beginning of a period from
    the periodic state (or ``rho0``) and the default grid spans one period.
    Without a pulse, ``rho0`` is required and evolves freely. ``flux=True``
    multiplies by the radiative rate of the detected channel, giving photons
    per ns.
    """
    model = EmissionModel.parse(model)
    pulse = DriveProtocol() if pulse is None else pulse
    L = build_generator(model, params, pulse)
    if rho0 is None:
        if not L.time_dependent:
            raise ValueError("rho0 is required without a pulsed drive")
        rho = periodic_start_state(L)
    else:
        rho = np.asarray(rho0, dtype=complex)
        if rho.shape != (model.dim, model.dim):
            raise ValueError(f"state of shape {rho.shape} does not match dim {model.dim}")
        check_density(rho)
    if t_grid is None:
        span = pulse.period if pulse.is_pulsed else 10.0 / max(params.gamma, 1e-12)
        t_grid = np.linspace(0.0, span, 3001)
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be nonnegative and strictly increasing")

    c = _readout(dipole_set(model))
    if L.time_dependent:
        v = vec(rho)
        out = np.empty(t.size)
        cache = {}
        t_prev = 0.0
        for i, ti in enumerate(t):
            if ti > t_prev:
                dt = ti - t_prev
                base = t_prev - math.floor(t_prev / pulse.period) * pulse.period
                if base >= pulse.pulse_window and base + dt <= pulse.period:
                    key = round(dt, 15)
                    if key not in cache:
                        cache[key] = expm(L.static * dt)
                    v = cache[key] @ v
                else:
                    v = propagator(L, dt, t_prev) @ v
                t_prev = ti
            out[i] = np.real(c @ v)
    else:
        out = (_march(L.static, vec(rho), t) @ c).real
    if flux:
        out = out * channel_rate(model, params)
    return CorrelationTrace(t, out, Normalization.RAW, "intensity")
