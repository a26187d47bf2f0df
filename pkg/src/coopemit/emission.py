"""Detected dipoles, zero-delay closed forms and the directional coincidence factor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import EmissionModel, EmitterParams, emitter_operators

__all__ = [
    "DipoleSet",
    "WaveVectorPair",
    "dipole_set",
    "sigma_symmetric",
    "sigma_antisymmetric",
    "symmetric_state",
    "antisymmetric_state",
    "populations",
    "g2_zero_independent",
    "g2_zero_cooperative",
    "directional_coincidence",
    "channel_rate",
]


@dataclass(frozen=True)
class DipoleSet:
    """Jump operators the detector couples to, with their weights.

    Photon-counting expectation values sum incoherently over the entries:
    ``I = sum_i w_i <A_i^+ A_i>``.
    """

    operators: tuple
    weights: tuple

    def __iter__(self):
        return iter(zip(self.operators, self.weights))

    def __len__(self):
        return len(self.operators)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def intensity_operator(self) -> np.ndarray:
        return sum(w * (A.conj().T @ A) for A, w in self)


def sigma_symmetric() -> np.ndarray:
    s1, s2 = emitter_operators(2)
    return (s1 + s2) / math.sqrt(2.0)


def sigma_antisymmetric() -> np.ndarray:
    s1, s2 = emitter_operators(2)
    return (s1 - s2) / math.sqrt(2.0)


def symmetric_state() -> np.ndarray:
    """``|psi_S> = (|e1 g2> + |g1 e2>)/sqrt(2)`` as a ket."""
    psi = np.zeros(4, dtype=complex)
    psi[1] = psi[2] = 1.0 / math.sqrt(2.0)
    return psi


def antisymmetric_state() -> np.ndarray:
    """``|psi_A> = (|e1 g2> - |g1 e2>)/sqrt(2)``; not monitored by the detector."""
    psi = np.zeros(4, dtype=complex)
    psi[2] = 1.0 / math.sqrt(2.0)
    psi[1] = -1.0 / math.sqrt(2.0)
    return psi


def dipole_set(model) -> DipoleSet:
    model = EmissionModel.parse(model)
    if model is EmissionModel.SINGLE:
        return DipoleSet((emitter_operators(1)[0],), (1.0,))
    if model is EmissionModel.INDEPENDENT:
        s1, s2 = emitter_operators(2)
        return DipoleSet((s1, s2), (1.0, 1.0))
    return DipoleSet((sigma_symmetric(),), (1.0,))


def channel_rate(model, params: EmitterParams) -> float:
    """Radiative rate of the detected channel (``Gamma_sr`` for superradiance)."""
    model = EmissionModel.parse(model)
    if model is EmissionModel.SUPERRADIANT:
        return params.Gamma_sr
    return params.gamma


def populations(rho: np.ndarray) -> dict:
    """Occupations of the pair: ``gg``, ``ee``, ``S``, ``A`` and per-emitter ``n1``, ``n2``."""
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise ValueError("populations are defined for the two-emitter space")
    psi_s, psi_a = symmetric_state(), antisymmetric_state()
    return {
        "gg": rho[0, 0].real,
        "ee": rho[3, 3].real,
        "S": np.real(psi_s.conj() @ rho @ psi_s),
        "A": np.real(psi_a.conj() @ rho @ psi_a),
        "n1": (rho[2, 2] + rho[3, 3]).real,
        "n2": (rho[1, 1] + rho[3, 3]).real,
    }


def g2_zero_independent(n1: float, n2: float) -> float:
    """Zero-delay ``g2`` of two uncorrelated, distinguishable emitters."""
    for n in (n1, n2):
        if not 0.0 <= n <= 1.0:
            raise ValueError(f"populations must lie in [0, 1], got {n!r}")
    total = n1 + n2
    if total <= 0:
        raise ValueError("g2 is undefined when both emitters are dark")
    return 2.0 * n1 * n2 / total**2


def g2_zero_cooperative(rho: np.ndarray) -> float:
    """Zero-delay ``g2`` through the symmetric dipole, ``n_ee / (n_ee + n_S)**2``.

    ``n_S`` is the occupation of ``|psi_S>`` and therefore includes the
    inter-emitter coherence ``Re <e1 g2|rho|g1 e2>``.
    """
    pops = populations(rho)
    denom = pops["ee"] + pops["S"]
    if denom <= 0:
        raise ValueError("g2 is undefined: no population in |e1 e2> or |psi_S>")
    return pops["ee"] / denom**2


@dataclass(frozen=True)
class WaveVectorPair:
    """Detected wave vectors ``k1``, ``k2`` (rad/nm) and emitter separation ``r`` (nm)."""

    k1: tuple
    k2: tuple
    r: tuple

    def __post_init__(self):
        for name in ("k1", "k2", "r"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, tuple(arr))

    @property
    def phase(self) -> float:
        return float(np.dot(np.subtract(self.k2, self.k1), self.r))


def directional_coincidence(pair) -> float:
    """Conditional second-photon probability ``(1 + cos((k2 - k1).r))/2``.

    Accepts a :class:`WaveVectorPair` or the relative phase directly (also as
    an array, for Monte-Carlo averages over emission directions).
    """
    phase = pair.phase if isinstance(pair, WaveVectorPair) else np.asarray(pair, dtype=float)
    out = 0.5 * (1.0 + np.cos(phase))
    return float(out) if np.ndim(out) == 0 else out
