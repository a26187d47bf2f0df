import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopemit.correlators import CorrelationTrace, PulsedHistogram, analytic_g2_cw, analytic_g2_pulsed_peak
from coopemit.instrument import CountHistogram, IrfModel, convolve, sample_histogram

IRF = IrfModel()
TAU = 0.004 * np.arange(-1500, 1501)


def _fwhm(x, y):
    half = y.max() / 2
    above = np.nonzero(y >= half)[0]
    i, j = above[0], above[-1]
    left = np.interp(half, [y[i - 1], y[i]], [x[i - 1], x[i]])
    right = np.interp(half, [y[j + 1], y[j]], [x[j + 1], x[j]])
    return right - left


class TestKernel:
    def test_unit_area(self):
        for spacing in (0.001, 0.004, 0.024):
            assert abs(IRF.kernel(spacing).sum() - 1) <= 1e-12

    def test_too_coarse(self):
        with pytest.raises(ValueError, match="coarser"):
            IRF.kernel(0.03)

    def test_validation(self):
        with pytest.raises(ValueError):
            IrfModel(fwhm=0.0)
        with pytest.raises(ValueError):
            IrfModel(shape="lorentzian")
        assert IRF.sigma == pytest.approx(0.240 / 2.3548200450309493)


class TestConvolve:
    def test_delta_becomes_gaussian(self):
        vals = np.zeros_like(TAU)
        vals[TAU.size // 2] = 2.5 / 0.004
        out = convolve(PulsedHistogram(TAU, vals, 12.44, 0), IRF)
        assert np.trapezoid(out.values, TAU) == pytest.approx(2.5, rel=1e-9)
        assert _fwhm(TAU, out.values) == pytest.approx(0.240, abs=0.004)

    def test_constant_unchanged(self):
        out = convolve(CorrelationTrace(TAU, np.ones_like(TAU)), IRF)
        assert np.max(np.abs(out.values - 1)) < 1e-12

    def test_antidip_washed_out(self):
        g, gd = 1 / 1.76, 1 / 0.199
        tr = CorrelationTrace(TAU, analytic_g2_cw(g, gd, TAU))
        out = convolve(tr, IRF)
        assert tr.values[TAU.size // 2] == 1.0
        assert out.values[TAU.size // 2] == pytest.approx(0.87, abs=0.02)

    def test_asymptote_untouched(self):
        wide = 0.004 * np.arange(-7500, 7501)
        tr = CorrelationTrace(wide, analytic_g2_cw(1 / 1.76, 1 / 0.199, wide))
        out = convolve(tr, IRF)
        assert abs(out.values[0] - 1.0) <= 1e-9 and abs(out.values[-1] - 1.0) <= 1e-9

    def test_area_preserved_for_pulsed_peak(self):
        # isolated peak: the grid reaches far enough for the tails to vanish
        wide = 0.004 * np.arange(-7500, 7501)
        vals = analytic_g2_pulsed_peak(1.55, 3.57, wide)
        out = convolve(PulsedHistogram(wide, vals, 12.44, 0), IRF)
        assert np.sum(out.values) == pytest.approx(np.sum(vals), rel=1e-9)

    def test_linear_and_scalable(self):
        rng = np.random.default_rng(4)
        a, b = rng.random(TAU.size), rng.random(TAU.size)
        ca = convolve(CorrelationTrace(TAU, a), IRF).values
        cb = convolve(CorrelationTrace(TAU, b), IRF).values
        cab = convolve(CorrelationTrace(TAU, 2 * a + 3 * b), IRF).values
        assert np.max(np.abs(cab - (2 * ca + 3 * cb))) <= 1e-12
        c5 = convolve(CorrelationTrace(TAU, 5 * a), IRF).values
        assert np.max(np.abs(c5 - 5 * ca)) <= 1e-12

    def test_grid_too_coarse(self):
        coarse = 0.05 * np.arange(-100, 101)
        with pytest.raises(ValueError):
            convolve(CorrelationTrace(coarse, np.ones_like(coarse)), IRF)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        vals = rng.random(TAU.size) * (rng.random(TAU.size) > 0.9)
        assert np.all(convolve(CorrelationTrace(TAU, vals), IRF).values >= 0)


class TestSampling:
    def test_deterministic(self):
        tr = CorrelationTrace(TAU, analytic_g2_cw(0.5, 5.0, TAU))
        a = sample_histogram(tr, 1e6, 7)
        b = sample_histogram(tr, 1e6, 7)
        assert np.array_equal(a.counts, b.counts)
        assert not np.array_equal(a.counts, sample_histogram(tr, 1e6, 8).counts)

    def test_poisson_scatter(self):
        tr = CorrelationTrace(TAU, np.ones_like(TAU))
        h = sample_histogram(tr, 1e6, 0)
        mean = 1e6 / TAU.size
        assert h.total == pytest.approx(1e6, rel=5e-3)
        assert np.std(h.counts) / mean == pytest.approx(mean**-0.5, rel=0.05)

    def test_mean_over_seeds(self):
        x = 0.01 * np.arange(-200, 201)
        vals = analytic_g2_pulsed_peak(1 / 0.643, 1 / 0.280, x)
        tr = CorrelationTrace(x, vals)
        N = 1e5
        expect = N * vals / vals.sum()
        mean = np.mean([sample_histogram(tr, N, s).counts for s in range(100)], axis=0)
        sem = np.sqrt(expect / 100)
        # ~0.3 % of bins fall outside 3 sigma by chance
        assert np.mean(np.abs(mean - expect) <= 3 * sem) >= 0.99

    def test_errors(self):
        tr = CorrelationTrace(TAU, np.ones_like(TAU))
        with pytest.raises(ValueError):
            sample_histogram(tr, 0, 0)
        with pytest.raises(ValueError):
            sample_histogram(CorrelationTrace(TAU, np.zeros_like(TAU)), 10, 0)


class TestCountHistogram:
    def test_validation(self):
        with pytest.raises(ValueError):
            CountHistogram([0.0, 0.0], [1, 2])
        with pytest.raises(ValueError):
            CountHistogram([0.0, 1.0], [1.5, 2])
        with pytest.raises(ValueError):
            CountHistogram([0.0, 1.0], [-1, 2])

    def test_properties(self):
        h = CountHistogram([0.0, 0.5, 1.0], [3.0, 4.0, 5.0])
        assert h.counts.dtype == np.int64
        assert h.bin_width == 0.5 and h.total == 12
