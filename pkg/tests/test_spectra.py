import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint
from scipy import stats

from frame_spectra.experiments import sample_subsets
from frame_spectra.frames import construct
from frame_spectra.rng import RngStream
from frame_spectra.spectra import (
    GRID_NODES,
    LawError,
    SpectralSample,
    ks_distance,
    ks_statistic,
    law_cdf,
    law_table,
    manova_law,
    mp_edges_density,
    mp_law,
    subset_spectrum,
)


def quad_cdf(law, x):
    """Independent oracle: plain adaptive quadrature of the raw density formula."""
    lo, hi = law.r_minus, law.r_plus
    if x <= lo:
        return 0.0
    top = min(x, hi)
    b, g = law.beta, law.gamma

    def f(t):
        val = math.sqrt(max((t - lo) * (hi - t), 0.0)) / (2 * b * math.pi * t)
        return val / (1 - g * t) if law.kind == "MANOVA" else val

    return sint.quad(f, lo, top, limit=400, epsabs=1e-13, epsrel=1e-13)[0]


class TestMP:
    def test_beta_one(self):
        law = mp_edges_density(1.0)
        assert (law.r_minus, law.r_plus) == (0.0, 4.0)

    def test_beta_08(self):
        law = mp_law(0.8)
        assert law.r_plus == pytest.approx((1 + math.sqrt(0.8)) ** 2, abs=1e-14)
        assert law.r_plus == pytest.approx(3.5889, abs=1e-4)

    @pytest.mark.parametrize("beta", [0.3, 0.5, 0.8])
    def test_normalised(self, beta):
        law = mp_law(beta)
        mass = sint.quad(lambda x: float(law.density(x)), law.r_minus, law.r_plus, limit=200)[0]
        assert abs(mass - 1) < 1e-8
        assert abs(law.cdf(law.r_plus) - 1) < 1e-12


class TestManovaLaw:
    def test_edges_08_05(self):
        law = manova_law(0.8, 0.5)
        assert law.r_minus == pytest.approx(0.020204, abs=1e-6)
        assert law.r_plus == pytest.approx(1.979796, abs=1e-6)
        assert law.point_mass_at_inv_gamma == 0 and law.zero_mass == 0

    @pytest.mark.parametrize("gamma", [0.1, 0.25, 0.5, 0.9])
    def test_beta_one_lower_edge(self, gamma):
        assert manova_law(1.0, gamma).r_minus == pytest.approx(0.0, abs=1e-15)

    def test_masses(self):
        # k + m > n: (k + m - n)/k of the eigenvalues sit at n/m, (k - m)/k at 0
        law = manova_law(1.25, 0.5)
        assert law.zero_mass == pytest.approx(0.2)
        assert law.point_mass_at_inv_gamma == pytest.approx(0.2)
        assert law.continuous_mass == pytest.approx(0.6)
        law = manova_law(0.9, 0.95)
        assert law.point_mass_at_inv_gamma == pytest.approx(1 + 1 / 0.9 - 1 / (0.9 * 0.95))

    def test_rejects_too_many(self):
        with pytest.raises(LawError):
            manova_law(2.5, 0.5)

    def test_gamma_to_zero(self):
        a, b = manova_law(0.8, 0.01), mp_law(0.8)
        x = np.linspace(0, 4, 4001)
        assert np.max(np.abs(a.cdf(x) - b.cdf(x))) < 0.02

    @pytest.mark.parametrize("beta,gamma", [(0.3, 0.5), (0.8, 0.5), (0.6, 0.25), (1.25, 0.5), (0.9, 0.95)])
    def test_normalisation_and_edges(self, beta, gamma):
        law = manova_law(beta, gamma)
        a = math.sqrt(beta * (1 - gamma))
        b = math.sqrt(1 - beta * gamma)
        assert abs(law.r_minus - (a - b) ** 2) < 1e-12 and abs(law.r_plus - (a + b) ** 2) < 1e-12
        mass = sint.quad(lambda x: float(law.density(x)), law.r_minus, law.r_plus, limit=200, epsabs=1e-12)[0]
        assert abs(mass + law.zero_mass + law.point_mass_at_inv_gamma - 1) < 1e-8


class TestCdf:
    def test_trivial(self):
        law = manova_law(0.8, 0.5)
        assert law_cdf(law, law.r_minus) == 0.0 and law_cdf(law, -1.0) == 0.0
        assert law_cdf(law, 2.0) == 1.0 and law_cdf(law, 10.0) == 1.0

    def test_monotone(self):
        law = manova_law(0.7, 0.25)
        x = np.linspace(law.r_minus - 0.1, law.r_plus + 0.1, 20001)
        assert np.all(np.diff(law.cdf(x)) >= 0)

    def test_median_round_trip(self):
        law = manova_law(0.8, 0.5)
        a, b = law.r_minus, law.r_plus
        for _ in range(100):
            mid = 0.5 * (a + b)
            a, b = (a, mid) if law.cdf(mid) >= 0.5 else (mid, b)
        assert abs(law.cdf(0.5 * (a + b)) - 0.5) < 1e-7
        assert abs(law.ppf(0.5)[0] - 0.5 * (a + b)) < 1e-9

    @pytest.mark.parametrize("beta,gamma", [(0.8, 0.5), (0.3, 0.5), (1.0, 0.5), (0.9, 0.95)])
    def test_cdf_at_upper_edge(self, beta, gamma):
        law = manova_law(beta, gamma)
        assert abs(law.cdf(law.r_plus) - (1 - law.point_mass_at_inv_gamma)) < 1e-8

    @pytest.mark.parametrize("beta,gamma", [(0.8, 0.5), (0.3, 0.25), (1.0, 0.5), (0.6, 0.99)])
    def test_against_quadrature(self, beta, gamma):
        law = manova_law(beta, gamma)
        xs = law.r_minus + (law.r_plus - law.r_minus) * np.linspace(0.0005, 0.9995, 57)
        got = law.cdf(xs)
        want = np.array([quad_cdf(law, x) for x in xs])
        assert np.max(np.abs(got - want)) < 1e-7

    def test_mp_against_quadrature(self):
        law = mp_law(0.5)
        xs = np.linspace(law.r_minus, law.r_plus, 31)[1:-1]
        assert max(abs(law.cdf(x) - quad_cdf(law, x)) for x in xs) < 1e-7

    def test_point_mass_jump(self):
        law = manova_law(0.9, 0.95)
        loc = 1 / 0.95
        assert law.cdf(loc) == pytest.approx(1.0)
        assert law.cdf_left(loc) == pytest.approx(1 - law.point_mass_at_inv_gamma, abs=1e-8)

    def test_nonzero_part(self):
        law = manova_law(1.5, 0.5)
        nz = law.nonzero_part()
        assert nz.zero_mass == 0 and nz.atom_location == pytest.approx(2.0)
        assert nz.point_mass_at_inv_gamma == pytest.approx(law.point_mass_at_inv_gamma / (1 - law.zero_mass))
        assert nz.cdf(nz.r_plus) == pytest.approx(0.5) and nz.cdf(2.0) == 1.0
        # F(x) = zero_mass + (1 - zero_mass) F_nz(x)
        x = np.linspace(0.01, 2.5, 80)
        np.testing.assert_allclose(law.cdf(x), law.zero_mass + (1 - law.zero_mass) * nz.cdf(x), atol=1e-7)

    def test_table(self):
        tab = law_table(manova_law(0.8, 0.5), 64)
        assert tab.shape == (64, 3)
        assert np.all(np.diff(tab[:, 2]) >= 0) and tab[-1, 2] == pytest.approx(1.0)

    def test_grid_size(self):
        assert len(manova_law(0.8, 0.5).grid[0]) == GRID_NODES


class TestSubsetSpectrum:
    def test_ss_spikes(self):
        f = construct("SS", 16)
        s = subset_spectrum(f, range(8))
        np.testing.assert_allclose(s.eigenvalues, 1.0, atol=1e-14)

    @pytest.mark.parametrize("fam,n", [("DSS", 23), ("SH", 16), ("GF", 12)])
    def test_full_subset(self, fam, n):
        f = construct(fam, n)
        ev = subset_spectrum(f, range(n)).eigenvalues
        np.testing.assert_allclose(ev[: n - f.m], 0.0, atol=1e-12)
        np.testing.assert_allclose(ev[n - f.m :], n / f.m, atol=1e-12)

    def test_dss_pair(self):
        s = subset_spectrum(construct("DSS", 7), [1, 2])
        c = math.sqrt(2 / 9)
        np.testing.assert_allclose(s.eigenvalues, [1 - c, 1 + c], atol=1e-14)

    def test_sum_is_k(self):
        f = construct("DSS", 103)
        for idx in sample_subsets(103, 41, 5, RngStream(0)):
            assert abs(subset_spectrum(f, idx).eigenvalues.sum() - 41) < 1e-9
        for idx in sample_subsets(103, 70, 5, RngStream(1)):  # k > m
            assert abs(subset_spectrum(f, idx).eigenvalues.sum() - 70) < 1e-9

    def test_padding(self):
        f = construct("DSS", 23)
        s = subset_spectrum(f, range(15))
        assert s.k == 15 and np.sum(s.eigenvalues < 1e-10) == 4
        assert s.beta_n == 15 / 11 and s.gamma_n == 11 / 23

    def test_bad_subsets(self):
        f = construct("DSS", 7)
        with pytest.raises(ValueError):
            subset_spectrum(f, [1, 1])
        with pytest.raises(IndexError):
            subset_spectrum(f, [7])


class TestKS:
    def test_single_at_median(self):
        law = manova_law(0.8, 0.5)
        assert ks_statistic(law.ppf(0.5), law) == pytest.approx(0.5, abs=1e-9)

    @pytest.mark.parametrize("k", [10, 57, 300])
    def test_quantile_midpoints(self, k):
        law = manova_law(0.8, 0.5)
        assert ks_statistic(law.quantile_spectrum(k), law) <= 1 / (2 * k) + 1e-7

    def test_against_scipy_kstest(self):
        law = manova_law(0.6, 0.25)
        ev = np.sort(np.random.default_rng(0).uniform(law.r_minus, law.r_plus, 50))
        want = stats.kstest(ev, lambda x: quad_cdf_vec(law, x)).statistic
        assert abs(ks_statistic(ev, law) - want) < 1e-7

    def test_with_zero_atom(self):
        # beta > 1: a spectrum exactly at the nonzero-part quantiles plus structural zeros
        law = manova_law(1.5, 0.5)
        nz = law.nonzero_part().quantile_spectrum(100)
        ev = np.concatenate([np.zeros(50), nz])
        s = SpectralSample(ev, 300, 100)
        assert ks_distance(s, law) <= 1 / 200 + 1e-7
        assert ks_statistic(ev, law) <= 1 / 300 + 1e-7

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_permutation_invariant(self, seed):
        f = construct("DSS", 43)
        gen = np.random.default_rng(seed)
        idx = gen.choice(43, size=17, replace=False)
        a = ks_distance(subset_spectrum(f, idx))
        b = ks_distance(subset_spectrum(f, gen.permutation(idx)))
        assert abs(a - b) < 1e-12

    def test_randdft_single_draw_magnitude(self):
        # the RandDFT(100, 50), k=40 single-draw KS sits in a few-percent band
        vals = []
        for s in range(40):
            f = construct("RandDFT", 100, 50, rng=RngStream(s))
            idx = sample_subsets(100, 40, 1, RngStream(1000 + s))[0]
            vals.append(ks_distance(subset_spectrum(f, idx)))
        vals = np.array(vals)
        assert np.all(vals >= 1 / 80) and np.all(vals <= 0.15)

    def test_edge_convergence_randdft(self):
        f = construct("RandDFT", 400, 200, rng=RngStream(3))
        law = manova_law(160 / 200, 200 / 400)
        top = [subset_spectrum(f, idx).eigenvalues[-1] for idx in sample_subsets(400, 160, 200, RngStream(4))]
        assert abs(np.mean(top) - law.r_plus) < 0.1


def quad_cdf_vec(law, x):
    return np.array([quad_cdf(law, v) for v in np.atleast_1d(x)])
