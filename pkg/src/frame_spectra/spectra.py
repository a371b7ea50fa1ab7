"""Limiting spectral laws, subset spectra and Kolmogorov-Smirnov distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicHermiteSpline

from .frames import FrameMatrix
from .numerics import hermitian_eigenvalues, integrate

GRID_NODES = 2048
ZERO_RTOL = 1e-10
_GL_X, _GL_W = leggauss(8)
_ATOM_TOL = 1e-9


class LawError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LimitLaw:
    """A limiting spectral law: a continuous part on ``[r_minus, r_plus]`` plus atoms.

    ``kind`` is ``"MP"`` or ``"MANOVA"``.  Atoms sit at 0 (``zero_mass``, when
    more vectors than dimensions are drawn) and at ``scale/gamma``
    (``point_mass_at_inv_gamma``).  ``scale`` rescales the whole law; it is 1
    except for the nonzero-part laws built by :meth:`nonzero_part`.
    """

    kind: str
    beta: float
    gamma: float | None
    r_minus: float
    r_plus: float
    point_mass_at_inv_gamma: float
    zero_mass: float
    scale: float = 1.0
    _grid: tuple | None = field(default=None, repr=False, compare=False)

    # --- continuous part ---------------------------------------------------

    @property
    def _base_edges(self) -> tuple[float, float]:
        return self.r_minus / self.scale, self.r_plus / self.scale

    @property
    def continuous_mass(self) -> float:
        return 1.0 - self.point_mass_at_inv_gamma - self.zero_mass

    @property
    def is_degenerate(self) -> bool:
        return self.continuous_mass <= 1e-14 or not self.r_plus > self.r_minus

    @property
    def atom_location(self) -> float | None:
        if self.point_mass_at_inv_gamma <= 0 or self.gamma is None:
            return None
        return self.scale / self.gamma

    def _base_density(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self._base_edges
        x = np.asarray(x, dtype=float)
        inside = (x > lo) & (x < hi)
        xs = np.where(inside, x, 0.5 * (lo + hi))
        num = np.sqrt((xs - lo) * (hi - xs))
        den = 2.0 * self.beta * math.pi * xs
        if self.kind == "MANOVA":
            den = den * (1.0 - self.gamma * xs)
        return np.where(inside, num / den, 0.0)

    def density(self, x) -> np.ndarray:
        """Density of the continuous part (integrates to ``continuous_mass``)."""
        x = np.asarray(x, dtype=float)
        return self._base_density(x / self.scale) / self.scale

    def _theta_integrand(self, theta: np.ndarray) -> np.ndarray:
        # f(x) dx/dtheta under x = lo + w sin^2(theta); written so both edges stay finite
        lo, hi = self._base_edges
        w = hi - lo
        s2 = np.sin(theta) ** 2
        c2 = np.cos(theta) ** 2
        x = lo + w * s2
        s2_over_x = 1.0 / w if lo == 0.0 else s2 / x
        val = w * w * s2_over_x / (self.beta * math.pi)
        if self.kind != "MANOVA":
            return val * c2
        # 1 - gamma*x = slack + gamma*w*cos^2; slack vanishes when r_plus hits 1/gamma
        slack = 1.0 - self.gamma * hi
        if abs(slack) < 1e-15:
            return val / (self.gamma * w) * np.ones_like(c2)
        return val * c2 / (slack + self.gamma * w * c2)

    def _build_grid(self) -> tuple:
        th = np.linspace(0.0, 0.5 * math.pi, GRID_NODES)
        h = th[1] - th[0]
        mids = th[:-1, None] + 0.5 * h * (1.0 + _GL_X[None, :])
        panels = (self._theta_integrand(mids) * _GL_W[None, :]).sum(axis=1) * 0.5 * h
        cum = np.concatenate([[0.0], np.cumsum(panels)])
        spline = CubicHermiteSpline(th, cum, self._theta_integrand(th))
        return th, cum, spline

    @property
    def grid(self) -> tuple:
        if self._grid is None:
            object.__setattr__(self, "_grid", self._build_grid())
        return self._grid

    def _continuous_cdf(self, x: np.ndarray) -> np.ndarray:
        if self.is_degenerate:
            return np.zeros_like(x)
        lo, hi = self._base_edges
        u = np.clip((x / self.scale - lo) / (hi - lo), 0.0, 1.0)
        theta = np.arcsin(np.sqrt(u))
        _, cum, spline = self.grid
        total = cum[-1]
        out = spline(theta)
        # the grid integral and the analytic continuous mass differ by < 1e-12;
        # pin the top so F(r_plus) is exactly 1 - atoms
        out = out * (self.continuous_mass / total) if total > 0 else out
        return np.clip(out, 0.0, self.continuous_mass)

    # --- CDF ------------------------------------------------------------------

    def cdf(self, x) -> np.ndarray | float:
        scalar = np.isscalar(x)
        x = np.asarray(x, dtype=float)
        out = self._continuous_cdf(x)
        if self.zero_mass > 0:
            out = out + self.zero_mass * (x >= 0.0)
        loc = self.atom_location
        if loc is not None:
            out = out + self.point_mass_at_inv_gamma * (x >= loc)
        out = np.clip(out, 0.0, 1.0)
        return float(out) if scalar else out

    def cdf_left(self, x) -> np.ndarray | float:
        """Left limit ``F(x-)``; differs from :meth:`cdf` only at the atoms."""
        scalar = np.isscalar(x)
        x = np.asarray(x, dtype=float)
        out = self._continuous_cdf(x)
        if self.zero_mass > 0:
            out = out + self.zero_mass * (x > 0.0)
        loc = self.atom_location
        if loc is not None:
            out = out + self.point_mass_at_inv_gamma * (x > loc)
        out = np.clip(out, 0.0, 1.0)
        return float(out) if scalar else out

    def ppf(self, q) -> np.ndarray:
        """Generalised inverse CDF, ``inf{x : F(x) >= q}``."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.empty_like(q)
        lo, hi = self.r_minus, self.r_plus
        loc = self.atom_location
        for i, qi in enumerate(q):
            if self.zero_mass > 0 and qi <= self.zero_mass:
                out[i] = 0.0
                continue
            if loc is not None and qi > 1.0 - self.point_mass_at_inv_gamma:
                out[i] = loc
                continue
            a, b = lo, hi
            for _ in range(80):
                mid = 0.5 * (a + b)
                if self.cdf(mid) >= qi:
                    b = mid
                else:
                    a = mid
            out[i] = b
        return out

    def quantile_spectrum(self, k: int) -> np.ndarray:
        """The k midpoint quantiles ``F^{-1}((i - 1/2)/k)``."""
        return self.ppf((np.arange(1, k + 1) - 0.5) / k)

    # --- expectations -----------------------------------------------------------

    def expect(self, fn: Callable[[float], float], tol: float = 1e-11) -> float:
        """``E fn(X)`` under the full law (continuous part by quadrature plus atoms)."""
        total = 0.0
        if not self.is_degenerate:
            lo, hi = self.r_minus, self.r_plus
            total += integrate(lambda x: fn(x) * float(self.density(x)), lo, hi, singular_edges=True, tol=tol)
        if self.zero_mass > 0:
            total += self.zero_mass * fn(0.0)
        loc = self.atom_location
        if loc is not None:
            total += self.point_mass_at_inv_gamma * fn(loc)
        return total

    def nonzero_part(self) -> "LimitLaw":
        """Law of the nonzero eigenvalues (drops ``zero_mass`` and renormalises).

        For MANOVA with beta > 1 this is ``beta * MANOVA(1/beta, beta*gamma)``.
        """
        if self.zero_mass <= 0:
            return self
        if self.kind == "MANOVA":
            base = manova_law(1.0 / self.beta, self.beta * self.gamma)
            return _scaled(base, self.beta * self.scale)
        # MP(beta), beta > 1: nonzero part is beta * MP(1/beta)
        return _scaled(mp_law(1.0 / self.beta), self.beta * self.scale)


def _scaled(law: LimitLaw, s: float) -> LimitLaw:
    return LimitLaw(
        law.kind,
        law.beta,
        law.gamma,
        law.r_minus * s,
        law.r_plus * s,
        law.point_mass_at_inv_gamma,
        law.zero_mass,
        scale=law.scale * s,
    )


@lru_cache(maxsize=256)
def mp_law(beta: float) -> LimitLaw:
    """Marchenko-Pastur law with ratio ``beta``; edges ``(1 ± sqrt(beta))^2``."""
    if not beta > 0:
        raise LawError("beta must be positive")
    sb = math.sqrt(beta)
    return LimitLaw(
        "MP",
        float(beta),
        None,
        (1.0 - sb) ** 2,
        (1.0 + sb) ** 2,
        0.0,
        max(0.0, 1.0 - 1.0 / beta),
    )


mp_edges_density = mp_law


def manova_edges(beta: float, gamma: float) -> tuple[float, float]:
    a = math.sqrt(beta * (1.0 - gamma))
    b = math.sqrt(max(0.0, 1.0 - beta * gamma))
    return (a - b) ** 2, (a + b) ** 2


@lru_cache(maxsize=256)
def manova_law(beta: float, gamma: float) -> LimitLaw:
    """Wachter's MANOVA(beta, gamma) limit law, including the beta > 1 zero atom."""
    if not beta > 0:
        raise LawError("beta must be positive")
    if not 0 < gamma <= 1:
        raise LawError("gamma must lie in (0, 1]")
    if beta * gamma > 1 + 1e-12:
        raise LawError(f"beta*gamma = {beta * gamma:.6g} > 1: more vectors requested than the frame has")
    r_minus, r_plus = manova_edges(beta, gamma)
    pm = max(0.0, 1.0 + 1.0 / beta - 1.0 / (beta * gamma))
    zm = max(0.0, 1.0 - 1.0 / beta)
    if pm + zm > 1.0:
        pm = 1.0 - zm
    return LimitLaw("MANOVA", float(beta), float(gamma), r_minus, r_plus, pm, zm)


def law_cdf(law: LimitLaw, x):
    return law.cdf(x)


# --- empirical side -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralSample:
    eigenvalues: np.ndarray
    n: int
    m: int
    subset: np.ndarray | None = None
    frame_id: str = ""

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def beta_n(self) -> float:
        return self.k / self.m

    @property
    def gamma_n(self) -> float:
        return self.m / self.n

    def nonzero(self) -> np.ndarray:
        ev = self.eigenvalues
        if ev.size == 0:
            return ev
        return ev[ev > ZERO_RTOL * ev[-1]]


def gram_eigenvalues(xk: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``xk xk^H`` (length = rows), via the smaller Gram matrix."""
    k, m = xk.shape
    if k <= m:
        ev = hermitian_eigenvalues(xk @ xk.conj().T, check=False)
    else:
        ev = np.concatenate([np.zeros(k - m), hermitian_eigenvalues(xk.conj().T @ xk, check=False)])
    return np.clip(ev, 0.0, None)


def subset_spectrum(f: FrameMatrix, subset: Sequence[int]) -> SpectralSample:
    idx = np.asarray(subset, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= f.n):
        raise IndexError("subset index out of range")
    if np.unique(idx).size != idx.size:
        raise ValueError("subset indices must be distinct")
    ev = gram_eigenvalues(f.x[idx])
    return SpectralSample(ev, f.n, f.m, np.sort(idx), f.family.label)


def law_for(sample: SpectralSample) -> LimitLaw:
    """MANOVA law at the sample's actual aspect ratios."""
    return manova_law(sample.beta_n, sample.gamma_n)


def ks_statistic(eigenvalues: np.ndarray, law: LimitLaw) -> float:
    """sup |F_emp - F| for a sorted sample against a law with possible atoms."""
    ev = np.sort(np.asarray(eigenvalues, dtype=float))
    k = ev.size
    if k == 0:
        raise ValueError("empty spectrum")
    # snap numerically-atomic eigenvalues onto the atoms so the jump lines up
    loc = law.atom_location
    if loc is not None:
        ev = np.where(np.abs(ev - loc) <= _ATOM_TOL * max(1.0, loc), loc, ev)
    if law.zero_mass > 0:
        ev = np.where(ev <= ZERO_RTOL * max(ev[-1], 1.0), 0.0, ev)
    pts = ev
    extra = [a for a in (0.0 if law.zero_mass > 0 else None, loc) if a is not None]
    if extra:
        pts = np.concatenate([ev, extra])
    right = np.searchsorted(ev, pts, side="right") / k
    left = np.searchsorted(ev, pts, side="left") / k
    d1 = np.abs(law.cdf(pts) - right)
    d2 = np.abs(law.cdf_left(pts) - left)
    return float(max(d1.max(), d2.max()))


def ks_distance(sample: SpectralSample, law: LimitLaw | None = None) -> float:
    """KS distance of the sample's spectrum to ``law`` (default: MANOVA at its ratios).

    When the law has a zero atom (more vectors than dimensions) the structural
    zeros are dropped and the nonzero eigenvalues are compared with the
    law's nonzero part.
    """
    law = law_for(sample) if law is None else law
    if law.zero_mass > 0:
        return ks_statistic(sample.nonzero(), law.nonzero_part())
    return ks_statistic(sample.eigenvalues, law)


def law_table(law: LimitLaw, points: int = 512) -> np.ndarray:
    """Rows ``(x, pdf, cdf)`` on a sin^2-spaced grid over the support, for plotting."""
    th = np.linspace(0.0, 0.5 * math.pi, points)
    x = law.r_minus + (law.r_plus - law.r_minus) * np.sin(th) ** 2
    return np.column_stack([x, law.density(x), law.cdf(x)])
