"""
Lindblad generators and Liouville-space propagation for one or two
identical two-level emitters.

Conventions
-----------
- Units: time in ns, rates in 1/ns, Rabi frequencies and detunings in rad/ns
  (hbar = 1).
- Single-emitter basis ``(|g>, |e>)``; the pair basis is the tensor product
  ``(|g1 g2>, |g1 e2>, |e1 g2>, |e1 e2>)``.
- Density operators are vectorised by column stacking, ``vec(rho) =
  rho.flatten(order="F")``, so that ``vec(A rho B) = (B.T kron A) vec(rho)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm, null_space

__all__ = [
    "EmitterParams",
    "EmissionModel",
    "DriveKind",
    "DriveProtocol",
    "Liouvillian",
    "NumericalError",
    "SIGMA_MINUS",
    "emitter_operators",
    "vec",
    "unvec",
    "spre",
    "spost",
    "sprepost",
    "lindblad_dissipator",
    "hamiltonian_superop",
    "build_generator",
    "propagate",
    "propagator",
    "rk4_step_matrix",
    "steady_state",
    "check_density",
    "ground_state",
    "excited_state",
    "product_state",
    "emitter_state",
]


class NumericalError(RuntimeError):
    """Raised when a numerical procedure cannot produce a trustworthy answer."""


SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)

# Gaussian pulses are truncated at +-PULSE_HALF_WIDTH_SIGMA standard deviations
# and renormalised so that the requested area is exact.
PULSE_HALF_WIDTH_SIGMA = 6.0
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class EmitterParams:
    """Rates (1/ns) shared by the identical emitters.

    ``Gamma_sr`` is the collective decay rate of the superradiant model and
    defaults to ``2 * gamma``.
    """

    gamma: float = 1.0 / 0.643
    gamma_p: float = 0.0
    gamma_d: float = 0.0
    Gamma_sr: Optional[float] = None

    def __post_init__(self):
        for name in ("gamma", "gamma_p", "gamma_d"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite rate >= 0, got {value!r}")
        if self.Gamma_sr is None:
            object.__setattr__(self, "Gamma_sr", 2.0 * self.gamma)
        elif not np.isfinite(self.Gamma_sr) or self.Gamma_sr < 0:
            raise ValueError(f"Gamma_sr must be a finite rate >= 0, got {self.Gamma_sr!r}")


class EmissionModel(enum.Enum):
    SINGLE = "single"
    INDEPENDENT = "independent"
    COOPERATIVE = "cooperative"
    SUPERRADIANT = "superradiant"

    @property
    def n_emitters(self) -> int:
        return 1 if self is EmissionModel.SINGLE else 2

    @property
    def dim(self) -> int:
        return 2 ** self.n_emitters

    @classmethod
    def parse(cls, value) -> "EmissionModel":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown emission model {value!r} (choose from {choices})") from None


class DriveKind(enum.Enum):
    INCOHERENT_CW = "incoherent-cw"
    COHERENT_CW = "coherent-cw"
    COHERENT_PULSED = "coherent-pulsed"

    @classmethod
    def parse(cls, value) -> "DriveKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "-")
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown drive kind {value!r} (choose from {choices})") from None


@dataclass(frozen=True)
class DriveProtocol:
    """Optical drive applied equally to every emitter.

    Parameters
    ----------
    kind : DriveKind
        Incoherent CW pumping (rate taken from ``EmitterParams.gamma_p``),
        coherent CW drive, or a train of coherent Gaussian pulses.
    rabi : float
        CW Rabi angular frequency (rad/ns).
    detuning : float or sequence of float
        Per-emitter detuning (rad/ns) entering ``H`` as ``detuning_i * n_i``
        in the laser rotating frame. A scalar applies to all emitters.
    pulse_area : float
        ``integral of Omega(t) dt`` for one pulse (rad); ``pi`` fully
        inverts an isolated, undamped emitter.
    pulse_fwhm : float
        Intensity-independent FWHM of the Gaussian Rabi envelope (ns).
    period : float
        Pulse repetition period (ns).
    """

    kind: DriveKind = DriveKind.INCOHERENT_CW
    rabi: float = 0.0
    detuning: float | tuple = 0.0
    pulse_area: float = math.pi
    pulse_fwhm: float = 0.040
    period: float = 12.44

    def __post_init__(self):
        object.__setattr__(self, "kind", DriveKind.parse(self.kind))
        if not np.isscalar(self.detuning):
            object.__setattr__(self, "detuning", tuple(float(d) for d in self.detuning))
        if self.kind is DriveKind.COHERENT_PULSED:
            if not self.pulse_fwhm > 0:
                raise ValueError("pulse_fwhm must be > 0")
            if not self.period > self.pulse_window:
                raise ValueError(
                    f"period ({self.period} ns) must exceed the pulse window "
                    f"({self.pulse_window:.4g} ns = {2 * PULSE_HALF_WIDTH_SIGMA:g} sigma)"
                )

    @property
    def is_pulsed(self) -> bool:
        return self.kind is DriveKind.COHERENT_PULSED

    @property
    def is_coherent(self) -> bool:
        return self.kind is not DriveKind.INCOHERENT_CW

    @property
    def sigma(self) -> float:
        return self.pulse_fwhm * FWHM_TO_SIGMA

    @property
    def pulse_window(self) -> float:
        """Length of the interval ``[0, pulse_window)`` holding each pulse."""
        return 2.0 * PULSE_HALF_WIDTH_SIGMA * self.sigma

    @property
    def peak_rabi(self) -> float:
        if self.is_pulsed:
            return abs(self.pulse_area) / self._envelope_norm(self.pulse_window)
        return abs(self.rabi)

    def detunings(self, n_emitters: int) -> tuple:
        if np.isscalar(self.detuning):
            return (float(self.detuning),) * n_emitters
        if len(self.detuning) != n_emitters:
            raise ValueError(
                f"detuning has {len(self.detuning)} entries for {n_emitters} emitter(s)"
            )
        return tuple(self.detuning)

    def _envelope_norm(self, window: float) -> float:
        # integral of the truncated unit-height Gaussian over [0, window]
        half = window / 2.0
        return self.sigma * math.sqrt(2.0 * math.pi) * math.erf(half / (self.sigma * math.sqrt(2.0)))

    def envelope_in_window(self, t, window: Optional[float] = None):
        """Rabi frequency ``Omega(t)`` for ``t`` measured from the window start."""
        window = self.pulse_window if window is None else window
        t = np.asarray(t, dtype=float)
        centre = window / 2.0
        shape = np.exp(-0.5 * ((t - centre) / self.sigma) ** 2)
        shape = np.where((t >= 0.0) & (t <= window), shape, 0.0)
        return self.pulse_area * shape / self._envelope_norm(window)

    def envelope(self, t):
        """Periodic Rabi envelope; pulses occupy ``[k*period, k*period + pulse_window]``."""
        if not self.is_pulsed:
            return np.full_like(np.asarray(t, dtype=float), self.rabi)
        return self.envelope_in_window(np.mod(t, self.period))


def emitter_operators(n_emitters: int) -> list:
    """Lowering operators ``sigma_i^-`` on the ``2**n_emitters`` space."""
    if n_emitters == 1:
        return [SIGMA_MINUS.copy()]
    if n_emitters == 2:
        eye = np.eye(2)
        return [np.kron(SIGMA_MINUS, eye), np.kron(eye, SIGMA_MINUS)]
    raise ValueError("only one or two emitters are supported")


def ground_state(dim: int) -> np.ndarray:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def excited_state(dim: int) -> np.ndarray:
    """All emitters excited (``|e>`` or ``|e1 e2>``)."""
    rho = np.zeros((dim, dim), dtype=complex)
    rho[-1, -1] = 1.0
    return rho


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).flatten(order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    n = int(round(math.sqrt(v.shape[0])))
    return np.asarray(v).reshape((n, n), order="F")


def spre(A: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> A rho``."""
    return np.kron(np.eye(A.shape[0]), A)


def spost(B: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> rho B``."""
    return np.kron(B.T, np.eye(B.shape[0]))


def sprepost(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> A rho B``."""
    return np.kron(B.T, A)


def lindblad_dissipator(A: np.ndarray, rate: float = 1.0) -> np.ndarray:
    """Vectorised ``rate * (A rho A^+ - {A^+ A, rho}/2)``."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"jump operator must be square, got shape {A.shape}")
    if rate < 0:
        raise ValueError("dissipator rate must be >= 0")
    AdA = A.conj().T @ A
    return rate * (sprepost(A, A.conj().T) - 0.5 * spre(AdA) - 0.5 * spost(AdA))


def hamiltonian_superop(H: np.ndarray) -> np.ndarray:
    """Vectorised ``-i [H, rho]``."""
    return -1j * (spre(H) - spost(H))


@dataclass(frozen=True)
class Liouvillian:
    """Generator ``L(t) = static + envelope(t) * drive`` in column-stacked form.

    ``drive`` is the coherent part per unit Rabi frequency; it is ``None`` for
    static generators (CW drives fold the constant Rabi term into ``static``).
    """

    static: np.ndarray
    dim: int
    drive: Optional[np.ndarray] = None
    protocol: Optional[DriveProtocol] = None
    max_rate: float = field(default=0.0)

    @property
    def time_dependent(self) -> bool:
        return self.drive is not None

    def at(self, t: float) -> np.ndarray:
        if self.drive is None:
            return self.static
        return self.static + float(self.protocol.envelope(t)) * self.drive

    def rk4_step_limit(self) -> float:
        """Largest RK4 step allowed inside a pulse window."""
        limit = self.protocol.pulse_fwhm / 50.0
        if self.max_rate > 0:
            limit = min(limit, 0.1 / self.max_rate)
        return limit


def _drive_hamiltonians(n_emitters: int, detunings) -> tuple:
    lowers = emitter_operators(n_emitters)
    h_rabi = sum(0.5 * (s + s.conj().T) for s in lowers)
    h_det = sum(d * (s.conj().T @ s) for d, s in zip(detunings, lowers))
    return h_rabi, h_det


def build_generator(
    model,
    params: EmitterParams,
    drive: Optional[DriveProtocol] = None,
    *,
    local_decay: Optional[bool] = None,
) -> Liouvillian:
    """Assemble the Lindblad generator for one of the four emission models.

    Every model pumps (``gamma_p``) and dephases (``gamma_d``) each emitter
    locally. Single/independent/cooperative emitters decay locally at
    ``gamma``; the superradiant model replaces local decay by collective decay
    through ``sigma_S^-`` at ``Gamma_sr``. A coherent drive adds
    ``H = sum_i Omega(t)/2 (sigma_i^+ + sigma_i^-) + detuning_i sigma_i^+ sigma_i^-``.

    Raises
    ------
    ValueError
        If ``local_decay=True`` is requested for the superradiant model.
    """
    model = EmissionModel.parse(model)
    drive = DriveProtocol() if drive is None else drive
    if local_decay is None:
        local_decay = model is not EmissionModel.SUPERRADIANT
    elif local_decay and model is EmissionModel.SUPERRADIANT:
        raise ValueError(
            "superradiant model decays collectively; per-emitter decay terms are not allowed"
        )

    n = model.n_emitters
    lowers = emitter_operators(n)
    dim = model.dim
    L = np.zeros((dim * dim, dim * dim), dtype=complex)
    for s in lowers:
        if local_decay:
            L += lindblad_dissipator(s, params.gamma)
        L += lindblad_dissipator(s.conj().T, params.gamma_p)
        L += lindblad_dissipator(s.conj().T @ s, params.gamma_d)
    if model is EmissionModel.SUPERRADIANT:
        sigma_s = (lowers[0] + lowers[1]) / math.sqrt(2.0)
        L += lindblad_dissipator(sigma_s, params.Gamma_sr)

    rates = [params.gamma, params.gamma_p, params.gamma_d]
    if model is EmissionModel.SUPERRADIANT:
        rates.append(2.0 * params.Gamma_sr)

    drive_part = None
    if drive.is_coherent:
        h_rabi, h_det = _drive_hamiltonians(n, drive.detunings(n))
        L += hamiltonian_superop(h_det)
        if drive.is_pulsed:
            drive_part = hamiltonian_superop(h_rabi)
        else:
            L += drive.rabi * hamiltonian_superop(h_rabi)
        rates.append(drive.peak_rabi)
        rates.extend(abs(d) for d in drive.detunings(n))

    return Liouvillian(
        static=L,
        dim=dim,
        drive=drive_part,
        protocol=drive if drive.is_pulsed else None,
        max_rate=float(max(rates)),
    )


def _as_generator(L) -> Liouvillian:
    if isinstance(L, Liouvillian):
        return L
    L = np.asarray(L, dtype=complex)
    return Liouvillian(static=L, dim=int(round(math.sqrt(L.shape[0]))))


def rk4_step_matrix(L: Liouvillian, t: float, h: float) -> np.ndarray:
    """Propagator of one classical RK4 step of ``dv/dt = L(t) v``."""
    A1 = L.at(t)
    A2 = L.at(t + 0.5 * h)
    A4 = L.at(t + h)
    eye = np.eye(A1.shape[0])
    K1 = A1
    K2 = A2 @ (eye + 0.5 * h * K1)
    K3 = A2 @ (eye + 0.5 * h * K2)
    K4 = A4 @ (eye + h * K3)
    return eye + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


def _segments(L: Liouvillian, t0: float, t1: float):
    """Split ``[t0, t1]`` into (start, end, in_pulse) pieces."""
    proto = L.protocol
    T, w = proto.period, proto.pulse_window
    out = []
    t = t0
    while t < t1:
        k = math.floor(t / T)
        base = k * T
        if t < base + w:
            end = min(base + w, t1)
            out.append((t, end, True))
        else:
            end = min(base + T, t1)
            out.append((t, end, False))
        if end <= t:  # pragma: no cover - guards against float stalls
            raise NumericalError("time segmentation failed to advance")
        t = end
    return out


def propagator(L, dt: float, t0: float = 0.0, max_step: Optional[float] = None) -> np.ndarray:
    """Liouville-space propagator ``U(t0 + dt, t0)``."""
    L = _as_generator(L)
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0:
        return np.eye(L.static.shape[0], dtype=complex)
    if t0 + dt == t0 or dt < np.finfo(float).tiny:
        raise NumericalError(f"time step {dt!r} is below the resolution at t0={t0!r}")
    if not L.time_dependent:
        return expm(L.static * dt)
    h_max = L.rk4_step_limit() if max_step is None else max_step
    U = np.eye(L.static.shape[0], dtype=complex)
    for a, b, in_pulse in _segments(L, t0, t0 + dt):
        if in_pulse:
            n = max(1, math.ceil((b - a) / h_max - 1e-9))
            h = (b - a) / n
            for k in range(n):
                U = rk4_step_matrix(L, a + k * h, h) @ U
        else:
            U = expm(L.static * (b - a)) @ U
    return U


def propagate(rho: np.ndarray, L, dt: float, t0: float = 0.0, *, method: str = "auto") -> np.ndarray:
    """Evolve a (pseudo-)density operator by ``dt`` under ``L``.

    Static generators use the exact matrix exponential. Pulsed generators use
    fixed-step RK4 inside pulse windows and the exact exponential between
    pulses. ``method="rk4"`` forces fixed-step RK4 everywhere (used to
    cross-check the exponential path). The input is not renormalised, so
    trace-reduced pseudo-states from the regression recipe are allowed.
    """
    L = _as_generator(L)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (L.dim, L.dim):
        raise ValueError(f"density operator shape {rho.shape} does not match dim {L.dim}")
    if method == "rk4":
        if dt < 0:
            raise ValueError("dt must be >= 0")
        if L.time_dependent:
            h_max = L.rk4_step_limit()
        else:
            h_max = 0.01 / max(L.max_rate, _spectral_scale(L.static))
        n = max(1, math.ceil(dt / h_max))
        h = dt / n
        v = vec(rho)
        for k in range(n):
            v = rk4_step_matrix(L, t0 + k * h, h) @ v
        return unvec(v)
    if method != "auto":
        raise ValueError(f"unknown propagation method {method!r}")
    return unvec(propagator(L, dt, t0) @ vec(rho))


def _spectral_scale(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M)))) or 1.0


def steady_state(L, tol: float = 1e-10) -> np.ndarray:
    """Unique unit-trace null vector of a static generator.

    Raises
    ------
    NumericalError
        If the null space is not one-dimensional.
    """
    L = _as_generator(L)
    if L.time_dependent:
        raise ValueError("steady state requires a static generator")
    M = L.static
    scale = max(1.0, np.max(np.abs(M)))
    ns = null_space(M, rcond=1e-11)
    if ns.shape[1] != 1:
        raise NumericalError(
            f"steady state is not unique: null space has dimension {ns.shape[1]}"
        )
    rho = unvec(ns[:, 0])
    tr = np.trace(rho)
    if abs(tr) < 1e-12:
        raise NumericalError("null vector of the generator has zero trace")
    rho = rho / tr
    rho = 0.5 * (rho + rho.conj().T)
    residual = np.linalg.norm(M @ vec(rho))
    if residual > tol * scale:
        raise NumericalError(f"steady-state residual {residual:.3e} exceeds tolerance")
    return rho


def check_density(rho: np.ndarray, *, herm_tol=1e-12, trace_tol=1e-9, eig_tol=1e-9) -> None:
    """Raise ``ValueError`` unless ``rho`` is a valid density operator."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in (2, 4):
        raise ValueError(f"density operator must be 2x2 or 4x4, got {rho.shape}")
    asym = np.max(np.abs(rho - rho.conj().T))
    if asym > herm_tol:
        raise ValueError(f"density operator is not Hermitian (max asymmetry {asym:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density operator trace {tr!r} differs from 1")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if lam < -eig_tol:
        raise ValueError(f"density operator has negative eigenvalue {lam:.2e}")


def product_state(*singles: Sequence) -> np.ndarray:
    """Tensor product of single-emitter density matrices."""
    out = np.array([[1.0]], dtype=complex)
    for r in singles:
        out = np.kron(out, np.asarray(r, dtype=complex))
    return out


def emitter_state(excited_population: float, coherence: complex = 0.0) -> np.ndarray:
    """Single-emitter ``rho`` with population ``n_e`` and ``<g|rho|e> = coherence``."""
    n = float(excited_population)
    return np.array([[1.0 - n, coherence], [np.conj(coherence), n]], dtype=complex)
