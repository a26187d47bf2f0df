import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopemit.correlators import two_time_g2
from coopemit.dynamics import EmitterParams, check_density, product_state, emitter_state
from coopemit.emission import (
    WaveVectorPair,
    antisymmetric_state,
    channel_rate,
    dipole_set,
    directional_coincidence,
    g2_zero_cooperative,
    g2_zero_independent,
    populations,
    sigma_antisymmetric,
    sigma_symmetric,
    symmetric_state,
)

from conftest import random_density


class TestIndependent:
    def test_equal_inverted(self):
        assert g2_zero_independent(1.0, 1.0) == 0.5

    def test_one_dark(self):
        assert g2_zero_independent(1.0, 0.0) == 0.0

    def test_unequal(self):
        assert g2_zero_independent(0.5, 0.25) == pytest.approx(0.444444, abs=1e-6)

    def test_errors(self):
        with pytest.raises(ValueError):
            g2_zero_independent(0.0, 0.0)
        with pytest.raises(ValueError):
            g2_zero_independent(1.2, 0.5)

    @given(st.floats(0.001, 1.0), st.floats(0.001, 1.0))
    def test_symmetric_and_bounded(self, a, b):
        v = g2_zero_independent(a, b)
        assert v == pytest.approx(g2_zero_independent(b, a), rel=1e-14)
        assert 0 <= v <= 0.5 + 1e-15


class TestCooperative:
    def test_product_of_inverted(self):
        rho = np.zeros((4, 4), complex)
        rho[3, 3] = 1
        assert g2_zero_cooperative(rho) == 1.0

    def test_dark(self):
        rho = np.zeros((4, 4), complex)
        rho[0, 0] = 1
        with pytest.raises(ValueError):
            g2_zero_cooperative(rho)

    def test_mixed_inverted(self):
        rho = np.diag([0, 0.25, 0.25, 0.5]).astype(complex)
        # n_ee = 0.5, n_S = 0.25 -> 0.5 / 0.5625
        assert g2_zero_cooperative(rho) == pytest.approx(0.888889, abs=1e-6)

    def test_pure_symmetric(self):
        psi = symmetric_state()
        assert g2_zero_cooperative(np.outer(psi, psi.conj())) == 0.0

    def test_coherence_enters(self):
        base = np.diag([0, 0.25, 0.25, 0.5]).astype(complex)
        base[1, 2] = base[2, 1] = 0.2
        pops = populations(base)
        assert pops["S"] == pytest.approx(0.45)
        assert pops["A"] == pytest.approx(0.05)
        assert g2_zero_cooperative(base) == pytest.approx(0.5 / 0.95**2)

    def test_matches_two_time_correlator(self):
        # independent route: G2(0, 0) / I(0)^2 from the dipole operators
        rng = np.random.default_rng(11)
        p = EmitterParams(gamma=1.0)
        for _ in range(20):
            rho = random_density(rng, 4)
            tr = two_time_g2("cooperative", p, None, rho, 0.0, [0.0], normalize=True)
            assert tr.values[0] == pytest.approx(g2_zero_cooperative(rho), rel=1e-10)

    def test_product_states(self):
        for a, b in [(0.3, 0.9), (1.0, 0.5), (0.7, 0.7)]:
            rho = product_state(emitter_state(a), emitter_state(b))
            expect = a * b / (a * b + 0.5 * (a + b - 2 * a * b)) ** 2
            assert g2_zero_cooperative(rho) == pytest.approx(expect, rel=1e-12)


class TestOperators:
    def test_symmetric_dipole(self):
        s = sigma_symmetric()
        psi_s = symmetric_state()
        ee = np.zeros(4)
        ee[3] = 1
        assert np.allclose(s @ ee, psi_s)
        assert np.allclose(s @ psi_s, [1, 0, 0, 0])

    def test_antisymmetric_decouples(self):
        assert np.allclose(sigma_symmetric() @ antisymmetric_state(), 0)
        assert np.allclose(sigma_antisymmetric() @ symmetric_state(), 0)

    def test_dipole_sets(self):
        assert len(dipole_set("single")) == 1
        assert len(dipole_set("independent")) == 2
        assert dipole_set("superradiant").dim == 4
        assert np.allclose(dipole_set("cooperative").intensity_operator(), sigma_symmetric().T @ sigma_symmetric())

    def test_channel_rate(self):
        p = EmitterParams(gamma=1.0)
        assert channel_rate("superradiant", p) == 2.0
        assert channel_rate("cooperative", p) == 1.0

    def test_populations_shape(self):
        with pytest.raises(ValueError):
            populations(np.eye(2) / 2)


class TestDirectional:
    def test_in_phase(self):
        pair = WaveVectorPair(k1=(1, 0, 0), k2=(1, 0, 0), r=(0, 0, 100))
        assert directional_coincidence(pair) == 1.0

    def test_out_of_phase(self):
        pair = WaveVectorPair(k1=(0, 0, 0), k2=(0, 0, math.pi / 50), r=(0, 0, 50))
        assert directional_coincidence(pair) == pytest.approx(0.0, abs=1e-15)

    def test_random_average(self):
        phases = np.random.default_rng(0).uniform(0, 2 * math.pi, 10**6)
        assert np.mean(directional_coincidence(phases)) == pytest.approx(0.5, abs=1e-3)

    def test_validation(self):
        with pytest.raises(ValueError):
            WaveVectorPair(k1=(1, 0), k2=(1, 0, 0), r=(0, 0, 0))
        with pytest.raises(ValueError):
            WaveVectorPair(k1=(1, 0, float("nan")), k2=(1, 0, 0), r=(0, 0, 0))

    @given(st.floats(-50, 50))
    def test_bounds(self, phase):
        v = directional_coincidence(phase)
        assert 0.0 <= v <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cooperative_g2_nonnegative(seed):
    rho = random_density(np.random.default_rng(seed), 4)
    check_density(rho)
    assert g2_zero_cooperative(rho) >= 0
