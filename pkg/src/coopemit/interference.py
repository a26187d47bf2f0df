"""
Two-photon interference in an unbalanced Mach-Zehnder interferometer.

The source field is split, one arm is delayed by ``delay`` and the arms are
recombined on a 50:50 beamsplitter. With a delay far longer than every
correlation time the two arms behave as independent copies of the source,
so coincidences follow from the source's own ``g1`` and ``g2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .correlators import (
    CorrelationTrace,
    Normalization,
    PulsedHistogram,
    build_histogram,
    g1_cw,
    g2_cw,
    integrate_peak,
)
from .dynamics import DriveProtocol, EmitterParams, build_generator
from .emission import dipole_set
from .periodic import periodic_lags

__all__ = [
    "HomConfig",
    "HomTraces",
    "HomPulsed",
    "hom_cross_correlation",
    "visibility",
    "coherence_time_window",
    "hom_cw",
    "hom_pulsed",
    "hom_pulsed_pair",
]


@dataclass(frozen=True)
class HomConfig:
    """Interferometer settings.

    Attributes
    ----------
    delay : float
        Arm delay in ns; should match the pulse period for pulsed sources.
    polarization_overlap : float
        ``eta`` in [0, 1]; 1 for parallel, 0 for perpendicular polarisations.
    splitter_ratio : float
        Only a balanced splitter (0.5) is supported.
    """

    delay: float = 12.44
    polarization_overlap: float = 1.0
    splitter_ratio: float = 0.5

    def __post_init__(self):
        if not self.delay > 0:
            raise ValueError("delay must be > 0")
        if not 0.0 <= self.polarization_overlap <= 1.0:
            raise ValueError("polarization_overlap must lie in [0, 1]")
        if self.splitter_ratio != 0.5:
            raise ValueError("only a 50:50 beamsplitter is supported")

    def parallel(self) -> "HomConfig":
        return HomConfig(self.delay, 1.0, self.splitter_ratio)

    def perpendicular(self) -> "HomConfig":
        return HomConfig(self.delay, 0.0, self.splitter_ratio)

    def check_delay(self, coherence_time: float) -> bool:
        """Warn (and return False) unless the delay is >= 10 coherence times."""
        ok = self.delay >= 10.0 * coherence_time
        if not ok:
            warnings.warn(
                f"interferometer delay {self.delay} ns is shorter than 10x the coherence "
                f"time {coherence_time:.3g} ns; arms are not independent",
                RuntimeWarning,
                stacklevel=3,
            )
        return ok


def _coherence_time(g1: CorrelationTrace) -> float:
    """Delay where ``|g1|`` first drops below 1/e (grid end if it never does)."""
    mag = np.abs(g1.values)
    pos = g1.tau >= 0
    tau, mag = g1.tau[pos], mag[pos]
    below = np.nonzero(mag < np.exp(-1.0))[0]
    return float(tau[below[0]] if below.size else tau[-1])


def _same_grid(a: CorrelationTrace, b: CorrelationTrace) -> None:
    if a.tau.shape != b.tau.shape or not np.array_equal(a.tau, b.tau):
        raise ValueError("traces are not on the same delay grid")


def hom_cross_correlation(g2: CorrelationTrace, g1: CorrelationTrace, cfg: HomConfig) -> CorrelationTrace:
    """CW coincidences behind the interferometer, ``(g2 + 1 - eta^2 |g1|^2) / 2``."""
    _same_grid(g2, g1)
    cfg.check_delay(_coherence_time(g1))
    eta2 = cfg.polarization_overlap**2
    vals = 0.5 * (np.real(g2.values) + 1.0 - eta2 * np.abs(g1.values) ** 2)
    return CorrelationTrace(g2.tau, vals, Normalization.STEADY_STATE_SQUARED, "hom")


def visibility(g2_par: CorrelationTrace, g2_perp: CorrelationTrace) -> CorrelationTrace:
    """``V(tau) = 1 - g2_par / g2_perp``."""
    _same_grid(g2_par, g2_perp)
    perp = np.real(g2_perp.values)
    if np.any(perp <= 0):
        raise ValueError("perpendicular coincidences vanish; visibility is undefined")
    return CorrelationTrace(
        g2_par.tau, 1.0 - np.real(g2_par.values) / perp, Normalization.RAW, "visibility"
    )


def coherence_time_window(V: CorrelationTrace) -> float:
    """Signed trapezoidal area under ``V(tau)`` over the whole grid (ns)."""
    return float(np.trapezoid(np.real(V.values), V.tau))


@dataclass(frozen=True)
class HomTraces:
    parallel: CorrelationTrace
    perpendicular: CorrelationTrace
    visibility: CorrelationTrace

    @property
    def ctw(self) -> float:
        return coherence_time_window(self.visibility)


def hom_cw(
    model,
    params: EmitterParams,
    drive: Optional[DriveProtocol] = None,
    tau_grid=None,
    cfg: Optional[HomConfig] = None,
) -> HomTraces:
    """Parallel and perpendicular CW coincidences and the visibility.

    The delay grid is mirrored to negative delays when it starts at zero.
    """
    cfg = HomConfig() if cfg is None else cfg
    g2 = g2_cw(model, params, drive, tau_grid)
    g1 = g1_cw(model, params, drive, g2.tau)
    if g2.tau[0] == 0.0:
        g2, g1 = g2.mirrored(), g1.mirrored()
    par = hom_cross_correlation(g2, g1, cfg.parallel())
    perp = hom_cross_correlation(g2, g1, cfg.perpendicular())
    return HomTraces(par, perp, visibility(par, perp))


@dataclass(frozen=True)
class HomPulsed:
    parallel: PulsedHistogram
    perpendicular: PulsedHistogram

    def visibility(self, window: float, irf=None) -> float:
        """``1 - A_par / A_perp`` for the zero-delay peak within ``window``.

        Passing an IRF convolves both histograms first, as a detector would.
        """
        par, perp = self.parallel, self.perpendicular
        if irf is not None:
            from .instrument import convolve

            par, perp = convolve(par, irf), convolve(perp, irf)
        return 1.0 - integrate_peak(par, 0.0, window) / integrate_peak(perp, 0.0, window)


def hom_pulsed_pair(
    model,
    params: EmitterParams,
    pulse: DriveProtocol,
    cfg: Optional[HomConfig] = None,
    *,
    tau_span: Optional[float] = None,
    bin_width: float = 0.004,
) -> HomPulsed:
    """Pulsed interferometer histograms for parallel and perpendicular polarisation.

    The zero-delay peak integrates ``(G2 + I(t) I(t+tau) - eta^2 |G1|^2) / 2``
    over start times in one period, which is the arm-independent
    beamsplitter result for two identical copies of the source. Peaks at
    nonzero multiples of the period come from photons of different pulses and
    carry unit area.
    """
    cfg = HomConfig(delay=pulse.period) if cfg is None else cfg
    if not pulse.is_pulsed:
        raise ValueError("hom_pulsed needs a pulsed drive")
    if abs(cfg.delay - pulse.period) > 1e-9 * pulse.period:
        raise ValueError("interferometer delay must equal the pulse period")
    T = pulse.period
    tau_span = 2.5 * T if tau_span is None else float(tau_span)
    if tau_span < T:
        raise ValueError(f"tau_span ({tau_span} ns) must cover at least one period ({T} ns)")
    L = build_generator(model, params, pulse)
    lags = periodic_lags(L, dipole_set(model), T - 0.5 * bin_width, bin_width, with_g1=True)
    if lags.emitted <= 0:
        raise ValueError("no emission per period; histogram is undefined")
    scale = lags.emitted**2
    out = {}
    for name, eta in (("parallel", 1.0), ("perpendicular", 0.0)):
        central = 0.5 * (lags.g2 + lags.side - eta**2 * lags.g1sq)
        out[name] = build_histogram(central, lags.side, lags.bin_width, T, tau_span, scale)
    return HomPulsed(**out)


def hom_pulsed(
    model,
    params: EmitterParams,
    pulse: DriveProtocol,
    cfg: Optional[HomConfig] = None,
    **kwargs,
) -> PulsedHistogram:
    """Pulsed interferometer histogram at ``cfg.polarization_overlap``."""
    cfg = HomConfig(delay=pulse.period) if cfg is None else cfg
    pair = hom_pulsed_pair(model, params, pulse, cfg, **kwargs)
    eta = cfg.polarization_overlap
    if eta in (0.0, 1.0):
        return pair.perpendicular if eta == 0.0 else pair.parallel
    # coincidences are linear in eta^2
    vals = (1 - eta**2) * pair.perpendicular.values + eta**2 * pair.parallel.values
    return pair.parallel.with_values(vals)
