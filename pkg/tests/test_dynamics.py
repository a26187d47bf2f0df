import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopemit.dynamics import (
    SIGMA_MINUS,
    DriveKind,
    DriveProtocol,
    EmissionModel,
    EmitterParams,
    NumericalError,
    build_generator,
    check_density,
    emitter_operators,
    emitter_state,
    excited_state,
    ground_state,
    lindblad_dissipator,
    product_state,
    propagate,
    spost,
    spre,
    sprepost,
    steady_state,
    unvec,
    vec,
)
from coopemit.emission import antisymmetric_state, symmetric_state

from conftest import random_density

MODELS = list(EmissionModel)


def _rhs(L, rho):
    return unvec(L @ vec(rho))


def _lindblad_oracle(A, rate, rho):
    """Hilbert-space form of rate * (A rho A^+ - {A^+A, rho}/2)."""
    Ad = A.conj().T
    return rate * (A @ rho @ Ad - 0.5 * (Ad @ A @ rho + rho @ Ad @ A))


class TestVectorisation:
    def test_column_stacking(self):
        rho = np.arange(4).reshape(2, 2) + 0j
        assert np.array_equal(vec(rho), np.array([0, 2, 1, 3]))
        assert np.array_equal(unvec(vec(rho)), rho)

    def test_superoperators_match_products(self):
        rng = np.random.default_rng(1)
        A, B, X = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(3))
        assert np.allclose(unvec(spre(A) @ vec(X)), A @ X)
        assert np.allclose(unvec(spost(B) @ vec(X)), X @ B)
        assert np.allclose(unvec(sprepost(A, B) @ vec(X)), A @ X @ B)


class TestDissipator:
    def test_single_decay_rates(self):
        gamma = 1.7
        L = lindblad_dissipator(SIGMA_MINUS, gamma)
        d = _rhs(L, excited_state(2))
        assert d[0, 0].real == pytest.approx(gamma)
        assert d[1, 1].real == pytest.approx(-gamma)

    def test_dephasing_only_touches_coherences(self):
        gd = 2.3
        n = SIGMA_MINUS.conj().T @ SIGMA_MINUS
        L = lindblad_dissipator(n, gd)
        rho = 0.5 * np.ones((2, 2), dtype=complex)
        d = _rhs(L, rho)
        assert d[0, 0] == pytest.approx(0) and d[1, 1] == pytest.approx(0)
        assert d[0, 1] == pytest.approx(-gd / 2 * rho[0, 1])

    def test_collective_decay_from_doubly_excited(self):
        s1, s2 = emitter_operators(2)
        sigma_s = (s1 + s2) / math.sqrt(2)
        Gamma = 2.0
        d = _rhs(lindblad_dissipator(sigma_s, Gamma), excited_state(4))
        psi_s, psi_a = symmetric_state(), antisymmetric_state()
        # sigma_S^+ sigma_S^- |ee> = |ee>, so |ee> empties into psi_S at rate Gamma
        assert d[3, 3].real == pytest.approx(-Gamma)
        assert np.real(psi_s.conj() @ d @ psi_s) == pytest.approx(Gamma)
        assert np.real(psi_a.conj() @ d @ psi_a) == pytest.approx(0, abs=1e-15)

    def test_matches_hilbert_space_form(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = random_density(rng, 4)
        assert np.allclose(_rhs(lindblad_dissipator(A, 0.7), rho), _lindblad_oracle(A, 0.7, rho))

    def test_trace_preserving(self):
        A = np.random.default_rng(0).normal(size=(4, 4))
        L = lindblad_dissipator(A, 1.3)
        assert np.allclose(vec(np.eye(4)) @ L, 0)

    def test_errors(self):
        with pytest.raises(ValueError):
            lindblad_dissipator(np.zeros((2, 3)), 1.0)
        with pytest.raises(ValueError):
            lindblad_dissipator(SIGMA_MINUS, -1.0)


class TestParamsAndDrive:
    def test_defaults(self):
        p = EmitterParams(gamma=1.5)
        assert p.Gamma_sr == 3.0
        assert EmitterParams().gamma == pytest.approx(1 / 0.643)

    @pytest.mark.parametrize("field", ["gamma", "gamma_p", "gamma_d", "Gamma_sr"])
    def test_negative_rates_rejected(self, field):
        with pytest.raises(ValueError):
            EmitterParams(**{field: -0.1})

    def test_model_dimensions(self):
        assert EmissionModel.SINGLE.dim == 2
        assert all(m.dim == 4 for m in MODELS if m is not EmissionModel.SINGLE)
        assert EmissionModel.parse("Cooperative") is EmissionModel.COOPERATIVE
        with pytest.raises(ValueError):
            EmissionModel.parse("triple")

    def test_pulse_validation(self):
        with pytest.raises(ValueError):
            DriveProtocol(kind="coherent-pulsed", pulse_fwhm=0.0)
        with pytest.raises(ValueError):
            DriveProtocol(kind="coherent-pulsed", pulse_fwhm=0.04, period=0.2)
        with pytest.raises(ValueError):
            DriveProtocol(kind="laser")

    def test_pulse_area_is_exact(self):
        d = DriveProtocol(kind="coherent-pulsed", pulse_area=2.2)
        t = np.linspace(0, d.pulse_window, 200001)
        assert np.trapezoid(d.envelope(t), t) == pytest.approx(2.2, rel=1e-8)
        # periodic: same pulse one period later, nothing in between
        assert d.envelope(d.period + d.pulse_window / 2) == pytest.approx(d.envelope(d.pulse_window / 2))
        assert d.envelope(d.period / 2) == 0.0

    def test_detunings(self):
        d = DriveProtocol(kind="coherent-cw", detuning=(0.5, -0.5))
        assert d.detunings(2) == (0.5, -0.5)
        with pytest.raises(ValueError):
            d.detunings(1)


class TestGenerator:
    @pytest.mark.parametrize("model", MODELS)
    @pytest.mark.parametrize(
        "drive",
        [
            DriveProtocol(),
            DriveProtocol(kind="coherent-cw", rabi=2.0, detuning=0.3),
            DriveProtocol(kind="coherent-pulsed", pulse_area=math.pi),
        ],
        ids=["incoherent", "cw", "pulsed"],
    )
    def test_trace_preservation_row(self, model, drive):
        L = build_generator(model, EmitterParams(gamma=1.0, gamma_p=0.4, gamma_d=0.7), drive)
        one = vec(np.eye(L.dim))
        assert np.max(np.abs(one @ L.at(0.0))) < 1e-13
        assert np.max(np.abs(one @ L.at(drive.pulse_window / 2))) < 1e-13

    def test_single_detailed_balance(self):
        rho = steady_state(build_generator("single", EmitterParams(gamma=1.0, gamma_p=1.0)))
        assert rho[1, 1].real == pytest.approx(0.5, abs=1e-12)

    def test_cooperative_pumped_steady_state(self):
        rho = steady_state(build_generator("cooperative", EmitterParams(gamma=1.0, gamma_p=1.0)))
        assert np.allclose(rho, np.eye(4) / 4, atol=1e-12)
        assert rho[3, 3].real == pytest.approx(0.25)

    def test_superradiant_rejects_local_decay(self):
        with pytest.raises(ValueError):
            build_generator("superradiant", EmitterParams(), local_decay=True)

    def test_superradiant_decays_faster(self):
        p = EmitterParams(gamma=1.0)
        Ls = build_generator("superradiant", p)
        Lc = build_generator("cooperative", p)
        for t in np.linspace(0.05, 8, 40):
            rs = propagate(excited_state(4), Ls, t)
            rc = propagate(excited_state(4), Lc, t)
            assert 1 - rs[0, 0].real < 1 - rc[0, 0].real

    def test_coherent_hamiltonian_matches_hilbert_space(self):
        # independent construction of -i[H, rho] for a CW drive with detunings
        rabi, det = 1.3, (0.4, -0.2)
        L = build_generator("independent", EmitterParams(gamma=0.0), DriveProtocol(kind="coherent-cw", rabi=rabi, detuning=det))
        s1, s2 = emitter_operators(2)
        H = rabi / 2 * (s1 + s1.T + s2 + s2.T) + det[0] * s1.T @ s1 + det[1] * s2.T @ s2
        rho = random_density(np.random.default_rng(5), 4)
        assert np.allclose(_rhs(L.static, rho), -1j * (H @ rho - rho @ H))

    def test_pi_pulse_inverts_isolated_emitter(self):
        L = build_generator("single", EmitterParams(gamma=1e-6), DriveProtocol(kind="coherent-pulsed", pulse_area=math.pi))
        rho = propagate(ground_state(2), L, L.protocol.pulse_window)
        assert rho[1, 1].real == pytest.approx(1.0, abs=1e-6)


class TestPropagate:
    def test_exponential_decay(self):
        L = build_generator("single", EmitterParams(gamma=2.0))
        rho = propagate(excited_state(2), L, 0.5)
        assert rho[1, 1].real == pytest.approx(math.exp(-1), abs=1e-9)

    def test_zero_generator_is_identity(self):
        rho = random_density(np.random.default_rng(2), 4)
        assert np.array_equal(propagate(rho, np.zeros((16, 16)), 3.0), rho)

    def test_stationary_mixture(self):
        L = build_generator("cooperative", EmitterParams(gamma=1.0, gamma_p=1.0))
        rho = propagate(np.eye(4) / 4, L, 5.0)
        assert np.allclose(rho, steady_state(L), atol=1e-12)

    def test_pseudo_states_not_renormalised(self):
        L = build_generator("single", EmitterParams(gamma=1.0))
        rho = 0.3 * excited_state(2)
        out = propagate(rho, L, 1.0)
        assert np.trace(out).real == pytest.approx(0.3)

    def test_underflow_and_bad_input(self):
        L = build_generator("single", EmitterParams(gamma=1.0))
        with pytest.raises(NumericalError):
            propagate(excited_state(2), L, 1e-320)
        with pytest.raises(NumericalError):
            propagate(excited_state(2), L, 1e-12, t0=1e6)
        with pytest.raises(ValueError):
            propagate(excited_state(2), L, -1.0)
        with pytest.raises(ValueError):
            propagate(excited_state(4), L, 1.0)

    @pytest.mark.parametrize("model", MODELS)
    def test_expm_matches_rk4(self, model):
        drive = DriveProtocol(kind="coherent-cw", rabi=1.5, detuning=0.2)
        L = build_generator(model, EmitterParams(gamma=1.0, gamma_p=0.3, gamma_d=0.5), drive)
        rho = random_density(np.random.default_rng(7), L.dim)
        a = propagate(rho, L, 2.0)
        b = propagate(rho, L, 2.0, method="rk4")
        assert np.max(np.abs(a - b)) < 1e-8

    def test_pulsed_propagation_splits_at_windows(self):
        d = DriveProtocol(kind="coherent-pulsed", pulse_area=math.pi)
        L = build_generator("cooperative", EmitterParams(gamma=1.5, gamma_d=3.0), d)
        rho = propagate(ground_state(4), L, 2 * d.period + 1.0)
        one = propagate(propagate(ground_state(4), L, d.period + 0.05), L, d.period + 0.95, t0=d.period + 0.05)
        assert np.allclose(rho, one, atol=1e-12)


class TestSteadyState:
    def test_single_pump_ratio(self):
        rho = steady_state(build_generator("single", EmitterParams(gamma=1.0, gamma_p=1 / 3)))
        assert rho[1, 1].real == pytest.approx(0.25, abs=1e-12)

    def test_independent_pair(self):
        L = build_generator("independent", EmitterParams(gamma=1.0, gamma_p=1.0))
        rho = steady_state(L)
        assert rho[2, 2].real + rho[3, 3].real == pytest.approx(0.5)
        assert rho[1, 1].real + rho[3, 3].real == pytest.approx(0.5)
        assert abs(rho[1, 2]) < 1e-12
        late = propagate(ground_state(4), L, 40.0)
        assert np.allclose(late, rho, atol=1e-10)

    def test_residual(self):
        L = build_generator("cooperative", EmitterParams(gamma=0.8, gamma_p=0.3, gamma_d=2.0), DriveProtocol(kind="coherent-cw", rabi=1.0))
        rho = steady_state(L)
        assert np.linalg.norm(L.static @ vec(rho)) <= 1e-10
        check_density(rho)

    def test_degenerate_null_space(self):
        # collective decay leaves the antisymmetric state, and its coherence with ground, dark
        L = build_generator("superradiant", EmitterParams(gamma=1.0))
        with pytest.raises(NumericalError, match="dimension 4"):
            steady_state(L)

    def test_requires_static_generator(self):
        L = build_generator("single", EmitterParams(), DriveProtocol(kind="coherent-pulsed"))
        with pytest.raises(ValueError):
            steady_state(L)


class TestDensityHelpers:
    def test_check_density(self):
        check_density(np.eye(2) / 2)
        with pytest.raises(ValueError):
            check_density(np.eye(2))
        with pytest.raises(ValueError):
            check_density(np.array([[0.5, 0.1], [0.2, 0.5]]))
        with pytest.raises(ValueError):
            check_density(np.diag([1.5, -0.5]))
        with pytest.raises(ValueError):
            check_density(np.eye(3) / 3)

    def test_product_state(self):
        rho = product_state(emitter_state(0.3), emitter_state(0.6))
        assert rho[3, 3].real == pytest.approx(0.18)
        check_density(rho)


_drives = st.sampled_from(
    [
        DriveProtocol(),
        DriveProtocol(kind="coherent-cw", rabi=3.0, detuning=(0.5, -0.5)),
        DriveProtocol(kind="coherent-pulsed", pulse_area=2.0),
    ]
)


@settings(max_examples=60, deadline=None)
@given(
    model=st.sampled_from(MODELS),
    gamma=st.floats(0.1, 5.0),
    gamma_p=st.floats(0.0, 3.0),
    gamma_d=st.floats(0.0, 10.0),
    drive=_drives,
    t=st.floats(0.0, 15.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_propagation_invariants(model, gamma, gamma_p, gamma_d, drive, t, seed):
    if drive.kind is DriveKind.COHERENT_CW and model is EmissionModel.SINGLE:
        drive = DriveProtocol(kind="coherent-cw", rabi=3.0, detuning=0.5)
    L = build_generator(model, EmitterParams(gamma=gamma, gamma_p=gamma_p, gamma_d=gamma_d), drive)
    rho = random_density(np.random.default_rng(seed), L.dim)
    out = propagate(rho, L, t)
    assert abs(np.trace(out) - 1) <= 1e-9
    assert np.max(np.abs(out - out.conj().T)) <= 1e-10
    assert np.linalg.eigvalsh(0.5 * (out + out.conj().T)).min() >= -1e-9
