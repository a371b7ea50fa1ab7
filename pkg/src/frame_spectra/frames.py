"""Frame families: construction, admissible sizes and diagnostics.

A frame is stored as its ``n x m`` synthesis matrix with the frame vectors as
rows.  Deterministic families are pure functions of ``(n, m)``; random ones
take an :class:`~frame_spectra.rng.RngStream`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.fft import dct
from scipy.linalg import hadamard

from .numerics import haar_qr
from .rng import RngStream, gaussian


class InadmissibleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class FrameFamily:
    label: str
    field: str  # "real" | "complex"
    is_deterministic: bool
    is_etf: bool
    is_tight: bool = True
    natural_gamma: Fraction | None = None

    @property
    def is_complex(self) -> bool:
        return self.field == "complex"


FAMILIES: dict[str, FrameFamily] = {
    f.label: f
    for f in [
        FrameFamily("DSS", "complex", True, True),
        FrameFamily("GF", "complex", True, True, natural_gamma=Fraction(1, 2)),
        FrameFamily("RealPF", "real", True, True, natural_gamma=Fraction(1, 2)),
        FrameFamily("ComplexPF", "complex", True, True, natural_gamma=Fraction(1, 2)),
        FrameFamily("Alltop", "complex", True, False),
        FrameFamily("SS", "complex", True, False, natural_gamma=Fraction(1, 2)),
        FrameFamily("SH", "real", True, False, natural_gamma=Fraction(1, 2)),
        FrameFamily("HAAR", "complex", False, False),
        FrameFamily("RealHAAR", "real", False, False),
        FrameFamily("RandDFT", "complex", False, False),
        FrameFamily("RandDCT", "real", False, False),
        FrameFamily("GaussianIID", "real", False, False, is_tight=False),
        FrameFamily("LowPass", "complex", True, False),
    ]
}

_ALIASES = {k.lower(): k for k in FAMILIES}


def get_family(label: str | FrameFamily) -> FrameFamily:
    if isinstance(label, FrameFamily):
        return label
    try:
        return FAMILIES[_ALIASES[label.lower()]]
    except KeyError:
        raise KeyError(f"unknown frame family {label!r}; known: {', '.join(FAMILIES)}") from None


@dataclass(frozen=True, eq=False)
class FrameMatrix:
    family: FrameFamily
    x: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.x.setflags(write=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[1]

    @property
    def gamma_n(self) -> float:
        return self.m / self.n


# --- arithmetic helpers -----------------------------------------------------

def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    r = math.isqrt(n)
    for d in range(3, r + 1, 2):
        if n % d == 0:
            return False
    return True


def quadratic_character(p: int) -> np.ndarray:
    """Legendre symbol ``chi[a] = (a/p)`` for ``a = 0..p-1``."""
    chi = -np.ones(p, dtype=np.int64)
    chi[0] = 0
    chi[np.unique((np.arange(1, p) ** 2) % p)] = 1
    return chi


def _is_pow2(m: int) -> bool:
    return m > 0 and m & (m - 1) == 0


def _alltop_L(gamma: float) -> int:
    return max(1, int(round(1.0 / gamma)))


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise InadmissibleSizeError(msg)


def validate_size(family: FrameFamily | str, n: int, m: int) -> None:
    """Raise :class:`InadmissibleSizeError` naming the first violated constraint."""
    fam = get_family(family)
    _check(n >= 2 and 1 <= m <= n, f"need 1 <= m <= n and n >= 2, got n={n}, m={m}")
    lab = fam.label
    if lab == "DSS":
        _check(is_prime(n) and n % 4 == 3, "n must be prime ≡ 3 (mod 4)")
        _check(m == (n - 1) // 2, f"m must be (n-1)/2 = {(n - 1) // 2}")
    elif lab == "ComplexPF":
        _check(is_prime(n) and n % 4 == 3, "n must be prime ≡ 3 (mod 4)")
        _check(m == (n + 1) // 2, f"m must be (n+1)/2 = {(n + 1) // 2}")
    elif lab == "GF":
        _check(is_prime(n - 1) and (n - 1) % 4 == 3, "n-1 must be prime ≡ 3 (mod 4)")
        _check(2 * m == n, f"m must be n/2 = {n // 2}")
    elif lab == "RealPF":
        _check(is_prime(n - 1) and (n - 1) % 4 == 1, "n-1 must be prime ≡ 1 (mod 4)")
        _check(2 * m == n, f"m must be n/2 = {n // 2}")
    elif lab == "Alltop":
        _check(n % m == 0, "n must be a multiple L*m of m")
        _check(is_prime(m) and m > 2 and m > n // m, "m must be an odd prime larger than L = n/m")
    elif lab == "SS":
        _check(n == 2 * m and m >= 2, "n must equal 2m with m >= 2")
    elif lab == "SH":
        _check(n == 2 * m and _is_pow2(m) and m >= 4, "n must equal 2m with m a power of two, m >= 4")


def admissible_sizes(
    family: FrameFamily | str, n_min: int, n_max: int, gamma_target: float
) -> list[tuple[int, int]]:
    """All ``(n, m)`` with ``n_min <= n <= n_max`` the family can build, m/n nearest the target."""
    fam = get_family(family)
    if n_min > n_max:
        raise ValueError("n_min > n_max")
    lab = fam.label
    out: list[tuple[int, int]] = []
    for n in range(max(2, n_min), n_max + 1):
        if lab == "DSS":
            cand = [(n - 1) // 2]
        elif lab == "ComplexPF":
            cand = [(n + 1) // 2]
        elif lab in ("GF", "RealPF", "SS", "SH"):
            cand = [n // 2]
        elif lab == "Alltop":
            L = _alltop_L(gamma_target)
            cand = [n // L] if n % L == 0 else []
        else:
            cand = [min(n, max(1, int(math.floor(gamma_target * n + 0.5))))]
        for m in cand:
            try:
                validate_size(fam, n, m)
            except InadmissibleSizeError:
                continue
            out.append((n, m))
    return out


def natural_m(family: FrameFamily | str, n: int, gamma: float = 0.5) -> int:
    sizes = admissible_sizes(family, n, n, gamma)
    if not sizes:
        # surfaces the family's own message (the n-constraints are checked first)
        validate_size(family, n, max(1, n // 2))
        raise InadmissibleSizeError(f"no admissible m for {get_family(family).label} at n={n}")
    return sizes[0][1]


# --- constructions ------------------------------------------------------------

def unitary_dft(n: int) -> np.ndarray:
    t = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(t, t) / n) / math.sqrt(n)


def _dss(n: int, m: int) -> np.ndarray:
    chi = quadratic_character(n)
    d = np.flatnonzero(chi == 1)
    t = np.arange(n)
    return np.exp(2j * np.pi * np.outer(t, d) / n) / math.sqrt(m)


def _paley_jacobsthal(p: int) -> np.ndarray:
    chi = quadratic_character(p)
    a = np.arange(p)
    return chi[(a[None, :] - a[:, None]) % p].astype(float)


def _conference(p: int) -> np.ndarray:
    """Paley conference matrix of order p+1: symmetric if p≡1 (mod 4), skew if p≡3."""
    q = _paley_jacobsthal(p)
    c = np.zeros((p + 1, p + 1))
    c[0, 1:] = 1.0
    c[1:, 0] = 1.0 if p % 4 == 1 else -1.0
    c[1:, 1:] = q
    return c


def _factor_projection(proj: np.ndarray, m: int) -> np.ndarray:
    """Rows of an n x m factor V of a rank-m orthogonal projection, scaled to unit norm."""
    n = proj.shape[0]
    _, vecs = np.linalg.eigh(proj)
    v = vecs[:, n - m :]
    return v * math.sqrt(n / m)


def _real_pf(n: int, m: int) -> np.ndarray:
    c = _conference(n - 1)
    proj = 0.5 * (np.eye(n) + c / math.sqrt(n - 1))
    return _factor_projection(proj, m)


def _gf(n: int, m: int) -> np.ndarray:
    c = _conference(n - 1)
    proj = 0.5 * (np.eye(n) + 1j * c / math.sqrt(n - 1))
    return _factor_projection(proj, m)


def _complex_pf(n: int, m: int) -> np.ndarray:
    # Seidel matrix with entries exp(i*theta*chi(b-a)), tan^2 theta = p; for p ≡ 3 (mod 4)
    # it is Hermitian with exactly two eigenvalues (p-1)c and -(p+1)c, c = 1/sqrt(p+1)
    p = n
    c = 1.0 / math.sqrt(p + 1)
    s = math.sqrt(p / (p + 1))
    q = _paley_jacobsthal(p)
    seidel = c * (np.ones((p, p)) - np.eye(p)) + 1j * s * q
    hi, lo = (p - 1) * c, -(p + 1) * c
    proj = (seidel - lo * np.eye(p)) / (hi - lo)
    return _factor_projection(proj, m)


def _alltop(n: int, m: int) -> np.ndarray:
    L = n // m
    t = np.arange(m)
    rows = []
    for a in range(1, L + 1):
        for t0 in range(m):
            ph = (a * t * t + t0 * t) % m
            rows.append(np.exp(2j * np.pi * ph / m))
    return np.array(rows) / math.sqrt(m)


def _spikes_and(basis: np.ndarray) -> np.ndarray:
    m = basis.shape[0]
    return np.vstack([np.eye(m, dtype=basis.dtype), basis])


def _haar(n: int, m: int, rng: RngStream, complex_: bool) -> np.ndarray:
    g = gaussian(rng.generator(), (n, n), complex_)
    return haar_qr(g)[:, :m] * math.sqrt(n / m)


def _column_subset(full: np.ndarray, m: int, rng: RngStream) -> np.ndarray:
    n = full.shape[0]
    cols = np.sort(rng.generator().choice(n, size=m, replace=False))
    return full[:, cols] * math.sqrt(n / m)


def construct(
    family: FrameFamily | str, n: int, m: int | None = None, rng: RngStream | None = None
) -> FrameMatrix:
    fam = get_family(family)
    if m is None:
        if fam.natural_gamma is None and fam.label not in ("DSS", "ComplexPF"):
            raise InadmissibleSizeError(f"{fam.label} needs an explicit m")
        m = natural_m(fam, n)
    validate_size(fam, n, m)
    if fam.is_deterministic and rng is not None:
        raise ValueError(f"{fam.label} is deterministic and takes no rng")
    if not fam.is_deterministic and rng is None:
        raise ValueError(f"{fam.label} is random and needs an rng")

    lab = fam.label
    if lab == "DSS":
        x = _dss(n, m)
    elif lab == "GF":
        x = _gf(n, m)
    elif lab == "RealPF":
        x = _real_pf(n, m)
    elif lab == "ComplexPF":
        x = _complex_pf(n, m)
    elif lab == "Alltop":
        x = _alltop(n, m)
    elif lab == "SS":
        x = _spikes_and(unitary_dft(m))
    elif lab == "SH":
        x = _spikes_and(hadamard(m).astype(float) / math.sqrt(m))
    elif lab == "HAAR":
        x = _haar(n, m, rng, True)
    elif lab == "RealHAAR":
        x = _haar(n, m, rng, False)
    elif lab == "RandDFT":
        x = _column_subset(unitary_dft(n), m, rng)
    elif lab == "RandDCT":
        # columns of the orthonormal DCT-II matrix are the cosine basis vectors
        x = _column_subset(dct(np.eye(n), type=2, norm="ortho", axis=0).T, m, rng)
    elif lab == "GaussianIID":
        x = rng.generator().standard_normal((n, m)) / math.sqrt(m)
    elif lab == "LowPass":
        x = unitary_dft(n)[:, :m] * math.sqrt(n / m)
    else:  # pragma: no cover - registry and dispatch disagree
        raise KeyError(lab)

    x = np.ascontiguousarray(x, dtype=complex if fam.is_complex else float)
    return FrameMatrix(fam, x)


@dataclass(frozen=True)
class FrameDiagnostics:
    row_norm_defect: float
    tightness_defect: float
    coherence: float
    equiangularity_defect: float
    welch_bound: float

    def is_unit_norm(self, tol: float = 1e-12) -> bool:
        return self.row_norm_defect < tol

    def is_tight(self, tol: float = 1e-10) -> bool:
        return self.tightness_defect < tol

    def is_equiangular(self, tol: float = 1e-10) -> bool:
        return self.equiangularity_defect < tol and abs(self.coherence - self.welch_bound) < tol

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


def diagnostics(f: FrameMatrix) -> FrameDiagnostics:
    x = f.x
    n, m = x.shape
    norms = np.linalg.norm(x, axis=1)
    frame_op = x.conj().T @ x
    tight = float(np.max(np.abs(frame_op - (n / m) * np.eye(m))))
    gram = np.abs(x @ x.conj().T)
    off = gram[~np.eye(n, dtype=bool)]
    welch = math.sqrt((n - m) / (m * (n - 1))) if n > 1 else 0.0
    return FrameDiagnostics(
        row_norm_defect=float(np.max(np.abs(norms - 1.0))),
        tightness_defect=tight,
        coherence=float(off.max()) if off.size else 0.0,
        equiangularity_defect=float(off.max() - off.min()) if off.size else 0.0,
        welch_bound=welch,
    )
