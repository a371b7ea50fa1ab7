"""The classical MANOVA (Jacobi) ensemble used as the universal baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .rng import RngStream, gaussian
from .spectra import gram_eigenvalues


@dataclass(frozen=True)
class ManovaParams:
    n: int
    m: int
    k: int
    field: str = "complex"

    def __post_init__(self) -> None:
        if not (1 <= self.m <= self.n and 1 <= self.k <= self.n):
            raise ValueError(f"need 1 <= m <= n and 1 <= k <= n, got {self}")
        if self.field not in ("real", "complex"):
            raise ValueError("field must be 'real' or 'complex'")

    @property
    def is_complex(self) -> bool:
        return self.field == "complex"


def _draw(p: ManovaParams, gen: np.random.Generator) -> np.ndarray | None:
    a = gaussian(gen, (p.k, p.n - p.m), p.is_complex)
    b = gaussian(gen, (p.k, p.m), p.is_complex)
    s = a @ a.conj().T + b @ b.conj().T
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        return None
    # eigenvalues of L^{-1} B B^H L^{-H} equal those of (AA'+BB')^{-1/2} BB' (AA'+BB')^{-1/2}
    w = solve_triangular(chol, b, lower=True, check_finite=False)
    ev = (p.n / p.m) * gram_eigenvalues(w)
    return np.clip(ev, 0.0, p.n / p.m)


def sample_manova(p: ManovaParams, rng: RngStream) -> np.ndarray:
    """Sorted eigenvalues (length k) of one MANOVA(n, m, k) draw, scaled by n/m."""
    gen = rng.generator()
    for _ in range(2):
        ev = _draw(p, gen)
        if ev is not None:
            return ev
    raise np.linalg.LinAlgError(f"AA'+BB' singular twice in a row for {p}")


def sample_manova_reversed(p: ManovaParams, rng: RngStream, scale: float | None = None) -> np.ndarray:
    """``scale`` times a MANOVA(n, k, m) draw: the baseline for k > m.

    ``p`` carries the frame's own ``(n, m, k)``; the roles of ``m`` and ``k``
    are swapped here.  ``scale`` defaults to ``k/m``.  Returns ``m`` eigenvalues.
    """
    rev = ManovaParams(p.n, p.k, p.m, p.field)
    scale = p.k / p.m if scale is None else scale
    return scale * sample_manova(rev, rng)
