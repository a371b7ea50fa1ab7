import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint

from frame_spectra.frames import construct
from frame_spectra.functionals import (
    DEFAULT_ALPHA,
    DEFAULT_DELTA,
    DivergentLimitError,
    FunctionalSpec,
    delta_psi,
    psi_eval,
    psi_limit,
)
from frame_spectra.spectra import LimitLaw, manova_law, mp_law, subset_spectrum

AC = FunctionalSpec("AC")
RIP = FunctionalSpec("RIP")
SHANNON = FunctionalSpec("Shannon")

spectra_st = st.lists(st.floats(1e-3, 10.0), min_size=1, max_size=40).map(np.array)


def quad_expect(law, g):
    """Oracle: plain quadrature of g times the raw density on [r-, r+]."""
    lo, hi = law.r_minus, law.r_plus
    b, gm = law.beta, law.gamma

    def f(t):
        return g(t) * math.sqrt(max((t - lo) * (hi - t), 0.0)) / (2 * b * math.pi * t * (1 - gm * t))

    return sint.quad(f, lo, hi, limit=400, epsabs=1e-13)[0]


class TestSpec:
    def test_defaults(self):
        assert FunctionalSpec("strip").delta == DEFAULT_DELTA == 0.4531
        assert FunctionalSpec("shannon").alpha == DEFAULT_ALPHA == 1.0
        assert FunctionalSpec("ac").delta is None

    def test_parse(self):
        assert FunctionalSpec.parse("strip:0.3") == FunctionalSpec("StRIP", delta=0.3)
        assert FunctionalSpec.parse("Shannon:2").alpha == 2.0
        assert FunctionalSpec.parse("cond").kind == "Cond"

    @pytest.mark.parametrize(
        "kw", [dict(kind="AC", delta=0.2), dict(kind="RIP", alpha=1.0), dict(kind="StRIP", delta=1.5), dict(kind="Shannon", alpha=-1)]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            FunctionalSpec(**kw)

    def test_unknown(self):
        with pytest.raises(ValueError):
            FunctionalSpec.parse("entropy")
        with pytest.raises(ValueError):
            FunctionalSpec.parse("ac:1")


class TestEval:
    def test_identity_spectrum(self):
        ev = np.ones(9)
        assert psi_eval(RIP, ev) == 0
        assert psi_eval(FunctionalSpec("StRIP"), ev) == 1
        assert psi_eval(AC, ev) == 1
        assert psi_eval(FunctionalSpec("Cond"), ev) == 1
        assert psi_eval(FunctionalSpec("Shannon", alpha=3.0), ev) == pytest.approx(math.log(4.0))

    def test_alpha_zero(self):
        assert psi_eval(FunctionalSpec("Shannon", alpha=0.0), np.array([0.1, 2.0, 7.0])) == 0.0

    def test_two_point(self):
        ev = np.array([0.5, 1.5])
        assert psi_eval(AC, ev) == pytest.approx(4 / 3, abs=1e-15)
        assert psi_eval(RIP, ev) == 0.5
        assert psi_eval(FunctionalSpec("Max"), ev) == 1.5
        assert psi_eval(FunctionalSpec("Min"), ev) == 0.5
        assert psi_eval(FunctionalSpec("Cond"), ev) == 3.0
        assert psi_eval(FunctionalSpec("StRIP", delta=0.45), ev) == 0.0

    def test_zero_eigenvalue(self):
        ev = np.array([0.0, 1.0, 2.0])
        assert psi_eval(AC, ev) == math.inf
        assert psi_eval(FunctionalSpec("Cond"), ev) == math.inf

    def test_unsorted_array(self):
        assert psi_eval(RIP, np.array([1.5, 0.5])) == 0.5

    @settings(max_examples=100, deadline=None)
    @given(spectra_st)
    def test_ac_at_least_one(self, ev):
        v = psi_eval(AC, ev)
        assert v >= 1 - 1e-12
        if np.ptp(ev) > 1e-6 * ev.max():
            assert v > 1

    @settings(max_examples=60, deadline=None)
    @given(spectra_st)
    def test_shannon_monotone_concave(self, ev):
        vals = [psi_eval(FunctionalSpec("Shannon", alpha=a), ev) for a in (0.0, 0.5, 1.0, 1.5, 2.0, 2.5)]
        assert np.all(np.diff(vals) >= -1e-15)
        # second differences at alpha = 0.5, 1, 2 (uniform step 0.5 around each)
        for i in (1, 2, 4):
            assert vals[i - 1] - 2 * vals[i] + vals[i + 1] <= 1e-12


class TestLimit:
    def test_ac_anchors(self):
        assert abs(psi_limit(AC, manova_law(0.8, 0.5)) - 3.0) < 1e-4
        assert abs(psi_limit(AC, manova_law(0.6, 0.5)) - 1.75) < 1e-4

    @pytest.mark.parametrize("beta,gamma", [(0.3, 0.5), (0.7, 0.25), (0.5, 0.9)])
    def test_ac_against_quadrature(self, beta, gamma):
        law = manova_law(beta, gamma)
        atom = law.point_mass_at_inv_gamma * gamma
        assert psi_limit(AC, law) == pytest.approx(quad_expect(law, lambda x: 1 / x) + atom, abs=1e-8)

    def test_shannon_against_quadrature(self):
        law = manova_law(0.8, 0.5)
        spec = FunctionalSpec("Shannon", alpha=2.0)
        assert psi_limit(spec, law) == pytest.approx(quad_expect(law, lambda x: math.log1p(2 * x)), abs=1e-9)

    def test_shannon_with_atoms(self):
        law = manova_law(1.25, 0.5)
        cont = quad_expect(law, math.log1p)
        want = cont + law.point_mass_at_inv_gamma * math.log1p(2.0)
        assert psi_limit(SHANNON, law) == pytest.approx(want, abs=1e-9)

    def test_ac_continuous_monotone(self):
        betas = np.linspace(0.3, 0.9, 25)
        vals = np.array([psi_limit(AC, manova_law(float(b), 0.5)) for b in betas])
        assert np.all(np.diff(vals) > 0)
        # no jumps: each midpoint value lies strictly between its neighbours
        mids = [psi_limit(AC, manova_law(float(b), 0.5)) for b in 0.5 * (betas[1:] + betas[:-1])]
        assert np.all((vals[:-1] < mids) & (mids < vals[1:]))

    def test_ac_divergent(self):
        with pytest.raises(DivergentLimitError):
            psi_limit(AC, manova_law(1.0, 0.5))
        with pytest.raises(DivergentLimitError):
            psi_limit(AC, manova_law(1.25, 0.5))

    def test_rip_and_edges(self):
        law = manova_law(0.8, 0.5)
        assert psi_limit(RIP, law) == pytest.approx(max(law.r_plus - 1, 1 - law.r_minus))
        assert psi_limit(RIP, law) == pytest.approx(0.9798, abs=1e-4)
        assert psi_limit(RIP, mp_law(0.8)) == pytest.approx(2.5889, abs=1e-4)
        assert psi_limit(FunctionalSpec("Max"), law) == law.r_plus
        assert psi_limit(FunctionalSpec("Min"), law) == law.r_minus
        assert psi_limit(FunctionalSpec("Cond"), law) == pytest.approx(law.r_plus / law.r_minus)
        assert psi_limit(FunctionalSpec("StRIP"), law) == 0.0

    def test_rip_ordering(self):
        betas = np.round(np.arange(0.3, 0.91, 0.1), 10)
        man = [psi_limit(RIP, manova_law(float(b), 0.5)) for b in betas]
        mp = [psi_limit(RIP, mp_law(float(b))) for b in betas]
        assert all(a < b for a, b in zip(man, mp))
        assert np.all(np.diff(man) > 0) and np.all(np.diff(mp) > 0)

    def test_quantile_consistency(self):
        law = manova_law(0.8, 0.5)
        errs = {}
        for k in (50, 200, 800):
            q = law.quantile_spectrum(k)
            errs[k] = (abs(psi_eval(SHANNON, q) - psi_limit(SHANNON, law)),
                       abs(np.mean(1 / q) - psi_limit(AC, law)))
        for j in range(2):
            assert errs[50][j] > errs[200][j] > errs[800][j]
        assert errs[200][0] < 5e-3


class TestDelta:
    def test_quantile_shannon(self):
        law = manova_law(0.8, 0.5)
        assert delta_psi(SHANNON, law.quantile_spectrum(200), law) < 5e-3

    def test_degenerate_identity(self):
        # a point law at 1: r- = r+ = 1 and every functional of the identity matches
        law = LimitLaw("MANOVA", 1.0, 1.0, 1.0, 1.0, 1.0, 0.0)
        ev = np.ones(5)
        for kind in ("RIP", "Max", "Min", "Cond", "Shannon", "StRIP"):
            assert delta_psi(FunctionalSpec(kind), ev, law) == pytest.approx(0.0, abs=1e-15), kind

    def test_dss_subset(self):
        f = construct("DSS", 103)
        law = manova_law(41 / 51, 51 / 103)
        s = subset_spectrum(f, np.arange(0, 82, 2))
        d = delta_psi(AC, s, law)
        assert 0 < d < math.inf

    def test_precomputed_limit(self):
        law = manova_law(0.8, 0.5)
        ev = law.quantile_spectrum(30)
        assert delta_psi(AC, ev, law, limit=3.0) == abs(psi_eval(AC, ev) - 3.0)

    def test_infinite(self):
        law = manova_law(0.8, 0.5)
        assert delta_psi(AC, np.array([0.0, 1.0]), law) == math.inf
