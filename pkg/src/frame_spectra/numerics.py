"""Dense linear algebra, quadrature and regression helpers.

Everything here is a thin, contract-checked layer over LAPACK (via numpy) and
scipy.  The rest of the package only talks to these functions, so the
tolerances and failure modes live in one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _spi
from scipy import special

HERMITIAN_RTOL = 1e-12


class NotHermitianError(ValueError):
    def __init__(self, defect: float):
        super().__init__(f"matrix is not Hermitian: relative defect {defect:.3e}")
        self.defect = defect


class RankDeficientError(ArithmeticError):
    """Raised when a factorisation hits a (numerically) singular input; resample."""


class IntegrationError(ArithmeticError):
    def __init__(self, estimate: float, residual: float, message: str = ""):
        super().__init__(
            f"quadrature did not converge: estimate={estimate!r}, residual={residual:.3e}"
            + (f" ({message})" if message else "")
        )
        self.estimate = estimate
        self.residual = residual


class CollinearDesignError(ValueError):
    pass


def hermitian_defect(g: np.ndarray) -> float:
    """Relative size of ``g - g^H`` in the max norm."""
    g = np.asarray(g)
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(g - g.conj().T))) / scale


def hermitian_eigenvalues(g: np.ndarray, check: bool = True) -> np.ndarray:
    """Ascending real eigenvalues of a real-symmetric or complex-Hermitian matrix."""
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {g.shape}")
    if check:
        defect = hermitian_defect(g)
        if defect > HERMITIAN_RTOL:
            raise NotHermitianError(defect)
    # eigvalsh returns ascending order already
    return np.linalg.eigvalsh(g)


def haar_qr(g: np.ndarray) -> np.ndarray:
    """Q factor of ``g`` with diag(R) real positive.

    With i.i.d. Gaussian input (real or complex) the result is Haar distributed
    on the orthogonal/unitary group; the plain LAPACK QR is not, because its
    sign convention on R correlates with the input.
    """
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("haar_qr expects a square matrix")
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    mag = np.abs(d)
    if np.any(mag <= np.finfo(float).eps * max(1.0, float(np.max(mag, initial=0.0))) * g.shape[0]):
        raise RankDeficientError("rank-deficient input to haar_qr")
    return q * (d / mag)[np.newaxis, :].conj()


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    singular_edges: bool = False,
    tol: float = 1e-10,
    limit: int = 200,
) -> float:
    """Adaptive quadrature of ``f`` over ``[a, b]``.

    With ``singular_edges`` the integrand may blow up like an inverse square
    root at either end; the map ``x = a + (b-a) sin^2(t)`` removes that before
    handing the problem to QUADPACK.
    """
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if singular_edges:
        w = b - a

        def h(t: float) -> float:
            s, c = math.sin(t), math.cos(t)
            return f(a + w * s * s) * 2.0 * w * s * c

        lo, hi, fun = 0.0, 0.5 * math.pi, h
    else:
        lo, hi, fun = a, b, f

    out = _spi.quad(fun, lo, hi, epsabs=tol, epsrel=0.0, limit=limit, full_output=1)
    val, err = out[0], out[1]
    # a 4th element is QUADPACK's warning message; roundoff warnings with a
    # small error bound are harmless
    if len(out) > 3 and err > tol:
        raise IntegrationError(float(val), float(err), str(out[3]))
    return float(val)


@dataclass(frozen=True)
class RegressionResult:
    intercept: float
    slope: float
    slope_se: float
    r_squared: float
    n_points: int
    coefs: tuple[float, ...] = ()
    coef_se: tuple[float, ...] = ()

    @property
    def dof(self) -> int:
        return self.n_points - 1 - len(self.coefs)


def linear_regression(xs: np.ndarray | Sequence, y: Sequence[float]) -> RegressionResult:
    """OLS with intercept on one regressor (1-d ``xs``) or several (columns of ``xs``).

    ``slope``/``slope_se`` refer to the first regressor; ``coefs``/``coef_se``
    hold every regressor in order.
    """
    x = np.asarray(xs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=float)
    npts, p = x.shape
    if y.shape != (npts,):
        raise ValueError("xs and y disagree in length")
    if npts < p + 2:
        raise ValueError(f"need at least {p + 2} points for {p} regressor(s), got {npts}")

    design = np.column_stack([np.ones(npts), x])
    # centred design so collinearity is judged on the regressors, not the intercept
    xc = x - x.mean(axis=0)
    sv = np.linalg.svd(xc, compute_uv=False)
    if sv[-1] <= 1e-10 * max(sv[0], 1e-300):
        raise CollinearDesignError("regressors are collinear (or constant)")

    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    sse = float(resid @ resid)
    dof = npts - p - 1
    sigma2 = sse / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - sse / sst))
    return RegressionResult(
        intercept=float(beta[0]),
        slope=float(beta[1]),
        slope_se=float(se[1]),
        r_squared=r2,
        n_points=npts,
        coefs=tuple(float(b) for b in beta[1:]),
        coef_se=tuple(float(s) for s in se[1:]),
    )


def student_t_two_sided_p(t: float, dof: float) -> float:
    """P(|T| >= |t|) for Student's t with ``dof`` degrees of freedom.

    Uses the identity ``2(1 - F(|t|)) = I_{dof/(dof+t^2)}(dof/2, 1/2)`` with the
    regularised incomplete beta function.
    """
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    x = dof / (dof + t * t)
    return float(min(1.0, max(0.0, special.betainc(0.5 * dof, 0.5, x))))
