"""
Period-integrated two-time correlators for a pulse train.

For a generator with one short pulse per period the emitters relax fully
before the next pulse, so coincidences between photons from different pulses
factorise into products of single-period intensities, while same-pulse
coincidences need the full regression recipe. This module computes, on a
lag grid ``tau = n * bin_width``, the three period-integrated quantities

``g2(tau)``    = int_0^T G2(t, tau) dt          (same-pulse coincidences)
``side(tau)``  = int_0^T I(t) I(t + tau) dt      (different-pulse coincidences)
``g1sq(tau)``  = int_0^T |G1(t, tau)|^2 dt       (first-order coherence)

Start times inside the pulse window are handled on a fine lattice with RK4
step propagators; start times after the pulse use exact integrals of the
static generator (augmented-matrix exponentials). Lags that reach the next
pulse are neglected, which assumes negligible emission at the period edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import block_diag, expm
from scipy.signal import correlate

from .dynamics import (
    Liouvillian,
    NumericalError,
    ground_state,
    propagator,
    rk4_step_matrix,
    spre,
    sprepost,
    unvec,
    vec,
)
from .emission import DipoleSet

__all__ = ["PeriodicLags", "periodic_lags", "periodic_start_state", "aligned_bin_width"]


@dataclass(frozen=True)
class PeriodicLags:
    lags: np.ndarray
    g2: np.ndarray
    side: np.ndarray
    g1sq: Optional[np.ndarray]
    t: np.ndarray
    intensity: np.ndarray
    emitted: float
    bin_width: float
    fine_step: float
    period: float
    rho_start: np.ndarray


def aligned_bin_width(period: float, requested: float) -> float:
    """Bin width that divides the period exactly (closest to ``requested``)."""
    n = max(1, int(round(period / requested)))
    return period / n


def _fixed_point(one_period: np.ndarray, dim: int, max_periods: int) -> np.ndarray:
    v = vec(ground_state(dim)).astype(complex)
    for _ in range(max_periods):
        nxt = one_period @ v
        if np.max(np.abs(nxt - v)) < 1e-14:
            return unvec(nxt)
        v = nxt
    raise NumericalError(f"periodic state did not converge within {max_periods} periods")


def periodic_start_state(L: Liouvillian, max_periods: int = 50) -> np.ndarray:
    """State at the start of a period once the pulse train has run for long.

    Obtained by iterating the one-period map from the ground state, which
    picks the physically reached state even when the map has dark fixed points.
    """
    if not L.time_dependent:
        raise ValueError("periodic start state needs a pulsed generator")
    return _fixed_point(propagator(L, L.protocol.period), L.dim, max_periods)


def _integral_of_expm(M: np.ndarray, v: np.ndarray, S: float) -> np.ndarray:
    """``int_0^S expm(M s) v ds`` via the augmented matrix ``[[M, v], [0, 0]]``."""
    n = M.shape[0]
    aug = np.zeros((n + 1, n + 1), dtype=complex)
    aug[:n, :n] = M
    aug[:n, n] = v
    return expm(aug * S)[:n, n]


def _evolve(E: np.ndarray, start: np.ndarray, n_steps: int) -> np.ndarray:
    out = np.empty((n_steps,) + start.shape, dtype=complex)
    v = start
    for i in range(n_steps):
        out[i] = v
        v = E @ v
    return out


def periodic_lags(
    L: Liouvillian,
    dipoles: DipoleSet,
    tau_max: float,
    bin_width: float = 0.004,
    *,
    with_g1: bool = False,
    rho0: Optional[np.ndarray] = None,
    max_periods: int = 50,
) -> PeriodicLags:
    """Period-integrated correlators of a pulsed generator (see module docstring).

    ``bin_width`` is adjusted to divide the period. ``rho0`` is the state at
    the start of a period; by default the periodic steady state reached from
    the ground state.
    """
    if not L.time_dependent:
        raise ValueError("periodic correlators need a pulsed generator")
    proto = L.protocol
    T = proto.period
    if tau_max <= 0:
        raise ValueError("tau_max must be > 0")
    dt = aligned_bin_width(T, bin_width)
    sub = max(1, math.ceil(dt / L.rk4_step_limit() - 1e-9))
    h = dt / sub
    K = math.ceil(proto.pulse_window / h - 1e-9)
    t_end = K * h
    n_period = int(round(T / h))
    if K >= n_period:
        raise ValueError("pulse window does not fit inside one period")

    L0 = L.static
    D = L0.shape[0]
    steps = [rk4_step_matrix(L, j * h, h) for j in range(K)]
    E = expm(L0 * h)
    after = expm(L0 * (T - t_end))

    if rho0 is None:
        U_pulse = np.eye(D, dtype=complex)
        for P in steps:
            U_pulse = P @ U_pulse
        v = vec(_fixed_point(after @ U_pulse, L.dim, max_periods))
    else:
        v = vec(rho0).astype(complex)

    # states on the fine lattice inside the pulse window, k = 0..K
    states = np.empty((K + 1, D), dtype=complex)
    states[0] = v
    for j, P in enumerate(steps):
        states[j + 1] = P @ states[j]
    rho_end = states[K]

    c = vec(dipoles.intensity_operator().T)
    J = sum(w * sprepost(A, A.conj().T) for A, w in dipoles)

    # intensity over one period on the fine lattice
    intensity = np.empty(n_period)
    intensity[: K + 1] = (states @ c).real
    tail = _evolve(E, rho_end, n_period - K)
    intensity[K:] = (tail @ c).real
    t = h * np.arange(n_period)
    emitted = h * intensity.sum()

    n_lag = int(math.floor(tau_max / dt + 1e-9)) + 1
    lags = dt * np.arange(n_lag)
    fine_idx = sub * np.arange(n_lag)

    w = np.full(K + 1, h)
    w[0] = w[-1] = 0.5 * h

    # ---- same-pulse coincidences --------------------------------------------
    Y = (J @ states.T)  # columns: pseudo-states started at t_k
    rec = _march_pulse_window(steps, E, Y, w, lambda cols: c @ cols, K)
    Y_end = rec["at_end"]
    Z = _horner(E, Y_end, w)
    after_start = J @ _integral_of_expm(L0, rho_end, T - t_end)

    g2 = np.zeros(n_lag)
    in_window = fine_idx < K
    g2[in_window] = rec["lagged"][fine_idx[in_window]].real
    first_out = int(np.argmax(~in_window)) if (~in_window).any() else n_lag
    E_dt = expm(L0 * dt)
    if first_out < n_lag:
        z0 = expm(L0 * (lags[first_out] - t_end)) @ Z
        zs = _evolve(E_dt, z0, n_lag - first_out)
        g2[first_out:] = (zs @ c).real
    g2 += (_evolve(E_dt, after_start, n_lag) @ c).real

    # ---- different-pulse coincidences ------------------------------------------
    full = correlate(intensity, intensity, mode="full", method="fft")[n_period - 1 :]
    side = np.zeros(n_lag)
    ok = fine_idx < n_period
    side[ok] = h * full[fine_idx[ok]]

    g1sq = None
    if with_g1:
        g1sq = _g1_squared(
            L0, steps, E, E_dt, dipoles, states, rho_end, w, K, T - t_end,
            lags, fine_idx, first_out, t_end,
        )

    return PeriodicLags(
        lags=lags,
        g2=g2,
        side=side,
        g1sq=g1sq,
        t=t,
        intensity=intensity,
        emitted=emitted,
        bin_width=dt,
        fine_step=h,
        period=T,
        rho_start=unvec(v),
    )


def _march_pulse_window(steps, E, Y0, w, readout, K):
    """Propagate pseudo-states started at each lattice point of the window.

    Column ``k`` of ``Y0`` starts at ``t_k``. Returns weighted readouts summed
    by lag for lags ``< K`` and the columns at ``t_end``.
    """
    Y = np.zeros_like(Y0)
    lagged = None
    at_end = None
    for j in range(2 * K):
        if j <= K:
            Y[:, j] = Y0[:, j]
        ncol = min(j, K) + 1
        vals = readout(Y[:, :ncol]) * w[:ncol]
        if lagged is None:
            lagged = np.zeros(K, dtype=vals.dtype)
        lag = j - np.arange(ncol)
        keep = lag < K
        np.add.at(lagged, lag[keep], vals[keep])
        if j == K:
            at_end = Y.copy()
        P = steps[j] if j < K else E
        Y[:, :ncol] = P @ Y[:, :ncol]
    return {"lagged": lagged, "at_end": at_end}


def _horner(E, Y_end, w):
    """``sum_k w_k E^k y_k``."""
    acc = w[-1] * Y_end[:, -1]
    for k in range(Y_end.shape[1] - 2, -1, -1):
        acc = w[k] * Y_end[:, k] + E @ acc
    return acc


def _g1_squared(L0, steps, E, E_dt, dipoles, states, rho_end, w, K, S, lags, fine_idx, first_out, t_end):
    D = L0.shape[0]
    ops = list(dipoles)
    nd = len(ops)
    # stacked left-multiplied states [A_1 rho; A_2 rho; ...] and readout rows
    lift = np.vstack([spre(A) for A, _ in ops])
    R = np.concatenate([wt * vec(A.conj()) for A, wt in ops])
    blk = lambda M: block_diag(*([M] * nd))
    steps_b = [blk(P) for P in steps]
    E_b = blk(E)
    E_dt_b = blk(E_dt)

    X0 = lift @ states.T
    lagged, U_end = _g1sq_window(steps_b, E_b, X0, w, R, K)

    # u_k = E^k x_k(t_end); Q = sum_k w_k u_k u_k^+
    n = U_end.shape[1]
    U = np.empty_like(U_end)
    Ek = np.eye(E_b.shape[0], dtype=complex)
    for k in range(n):
        U[:, k] = Ek @ U_end[:, k]
        Ek = E_b @ Ek
    Q = (U * w) @ U.conj().T

    # after-pulse starts: int_0^S e^{L s} rho_e rho_e^+ e^{L^+ s} ds
    gen2 = np.kron(np.eye(D), L0) + np.kron(L0.conj(), np.eye(D))
    G = unvec(_integral_of_expm(gen2, vec(np.outer(rho_end, rho_end.conj())), S))
    Qb = lift @ G @ lift.conj().T

    n_lag = lags.shape[0]
    out = np.zeros(n_lag)
    in_window = fine_idx < K
    out[in_window] = lagged[fine_idx[in_window]]
    if first_out < n_lag:
        F = blk(expm(L0 * (lags[first_out] - t_end)))
        Qi = F @ Q @ F.conj().T
        for i in range(first_out, n_lag):
            out[i] = np.real(R @ Qi @ R.conj())
            Qi = E_dt_b @ Qi @ E_dt_b.conj().T
    Qi = Qb
    for i in range(n_lag):
        out[i] += np.real(R @ Qi @ R.conj())
        Qi = E_dt_b @ Qi @ E_dt_b.conj().T
    return out


def _g1sq_window(steps, E, X0, w, R, K):
    """Like :func:`_march_pulse_window` but sums ``|G1|^2`` per start time."""
    X = np.zeros_like(X0)
    lagged = np.zeros(K)
    at_end = None
    for j in range(2 * K):
        if j <= K:
            X[:, j] = X0[:, j]
        ncol = min(j, K) + 1
        g1 = R @ X[:, :ncol]
        lag = j - np.arange(ncol)
        keep = lag < K
        np.add.at(lagged, lag[keep], (np.abs(g1) ** 2 * w[:ncol])[keep])
        if j == K:
            at_end = X.copy()
        P = steps[j] if j < K else E
        X[:, :ncol] = P @ X[:, :ncol]
    return lagged, at_end
