"""Detector timing response and counting noise."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.ndimage import convolve1d

from .correlators import CorrelationTrace, PulsedHistogram
from .dynamics import FWHM_TO_SIGMA

__all__ = ["IrfModel", "CountHistogram", "convolve", "sample_histogram", "KERNEL_HALF_WIDTH_SIGMA"]

KERNEL_HALF_WIDTH_SIGMA = 5.0


@dataclass(frozen=True)
class IrfModel:
    """Gaussian instrument response with the given FWHM (ns)."""

    fwhm: float = 0.240
    shape: str = "gaussian"

    def __post_init__(self):
        if not (np.isfinite(self.fwhm) and self.fwhm > 0):
            raise ValueError("IRF fwhm must be > 0")
        if self.shape != "gaussian":
            raise ValueError(f"unsupported IRF shape {self.shape!r}")

    @property
    def sigma(self) -> float:
        return self.fwhm * FWHM_TO_SIGMA

    def kernel(self, spacing: float) -> np.ndarray:
        """Weights on a grid of the given spacing, truncated at +-5 sigma, summing to 1."""
        if spacing > self.fwhm / 10.0 * (1 + 1e-12):
            raise ValueError(
                f"grid spacing {spacing:.4g} ns is coarser than fwhm/10 = {self.fwhm / 10:.4g} ns"
            )
        half = int(math.ceil(KERNEL_HALF_WIDTH_SIGMA * self.sigma / spacing))
        x = spacing * np.arange(-half, half + 1)
        k = np.exp(-0.5 * (x / self.sigma) ** 2)
        return k / k.sum()


@dataclass(frozen=True)
class CountHistogram:
    """Integer coincidence counts per delay bin (bin centres in ns)."""

    tau: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        tau = np.array(self.tau, dtype=float)
        counts = np.array(self.counts)
        if tau.ndim != 1 or counts.shape != tau.shape:
            raise ValueError("tau and counts must be 1-d arrays of equal length")
        if tau.size < 2 or not np.all(np.diff(tau) > 0):
            raise ValueError("delay column must be strictly increasing")
        if counts.dtype.kind not in "iu":
            if not np.all(counts == np.round(counts)):
                raise ValueError("counts must be integers")
            counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValueError("counts must be >= 0")
        tau.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "counts", counts)

    @property
    def bin_width(self) -> float:
        return float(np.median(np.diff(self.tau)))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


Trace = Union[CorrelationTrace, PulsedHistogram]


def _uniform_spacing(tau: np.ndarray) -> float:
    d = np.diff(tau)
    if d.size == 0:
        raise ValueError("need at least two grid points")
    if np.ptp(d) > 1e-6 * d.mean():
        raise ValueError("convolution needs a uniform grid")
    return float(d.mean())


def convolve_values(tau: np.ndarray, values: np.ndarray, irf: IrfModel, mode: str) -> np.ndarray:
    """Convolve samples on a uniform grid; ``mode`` is a scipy.ndimage edge mode."""
    k = irf.kernel(_uniform_spacing(tau))
    if np.iscomplexobj(values):
        return convolve1d(values.real, k, mode=mode, cval=0.0) + 1j * convolve1d(
            values.imag, k, mode=mode, cval=0.0
        )
    return convolve1d(np.asarray(values, dtype=float), k, mode=mode, cval=0.0)


def convolve(trace: Trace, irf: IrfModel, *, mode: str | None = None) -> Trace:
    """Convolve a trace or histogram with the instrument response.

    CW traces are mirror-padded at the edges (they are symmetric and flat at
    large delays); pulsed histograms are zero-padded.

    Raises
    ------
    ValueError
        If the grid spacing exceeds ``fwhm / 10`` or is not uniform.
    """
    if isinstance(trace, PulsedHistogram):
        vals = convolve_values(trace.tau, trace.values, irf, mode or "constant")
        return trace.with_values(vals)
    if isinstance(trace, CorrelationTrace):
        vals = convolve_values(trace.tau, trace.values, irf, mode or "mirror")
        return trace.with_values(vals)
    raise TypeError(f"cannot convolve {type(trace).__name__}")


def sample_histogram(trace: Trace, total_counts: float, seed: int) -> CountHistogram:
    """Poisson counts per bin with expectations ``total_counts * v_i / sum(v)``."""
    values = np.real(np.asarray(trace.values))
    if not total_counts > 0:
        raise ValueError("total_counts must be > 0")
    if np.any(values < 0):
        raise ValueError("trace must be nonnegative to be sampled")
    s = values.sum()
    if s <= 0:
        raise ValueError("trace has zero total weight")
    rng = np.random.default_rng(seed)
    return CountHistogram(trace.tau, rng.poisson(total_counts * values / s))
