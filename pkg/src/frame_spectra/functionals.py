"""Spectral functionals of Gram spectra and their limiting values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectra import LimitLaw, SpectralSample

KINDS = ("RIP", "StRIP", "AC", "Shannon", "Max", "Min", "Cond")
DEFAULT_DELTA = 0.4531
DEFAULT_ALPHA = 1.0


class DivergentLimitError(ValueError):
    pass


@dataclass(frozen=True)
class FunctionalSpec:
    kind: str
    delta: float | None = None
    alpha: float | None = None

    def __post_init__(self) -> None:
        kind = _canon(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == "StRIP":
            d = DEFAULT_DELTA if self.delta is None else self.delta
            if not 0 < d < 1:
                raise ValueError("StRIP delta must lie in (0, 1)")
            object.__setattr__(self, "delta", float(d))
        elif self.delta is not None:
            raise ValueError(f"delta only applies to StRIP, not {kind}")
        if kind == "Shannon":
            a = DEFAULT_ALPHA if self.alpha is None else self.alpha
            if a < 0:
                raise ValueError("Shannon alpha must be >= 0")
            object.__setattr__(self, "alpha", float(a))
        elif self.alpha is not None:
            raise ValueError(f"alpha only applies to Shannon, not {kind}")

    @property
    def name(self) -> str:
        return self.kind.lower()

    @classmethod
    def parse(cls, text: str) -> "FunctionalSpec":
        """``"ac"``, ``"strip:0.3"``, ``"shannon:2"``."""
        kind, _, arg = text.strip().partition(":")
        kind = _canon(kind)
        if not arg:
            return cls(kind)
        if kind == "StRIP":
            return cls(kind, delta=float(arg))
        if kind == "Shannon":
            return cls(kind, alpha=float(arg))
        raise ValueError(f"{kind} takes no parameter")


def _canon(kind: str) -> str:
    for k in KINDS:
        if k.lower() == kind.lower():
            return k
    raise ValueError(f"unknown functional {kind!r}; choose from {', '.join(KINDS)}")


def _eigs(s: SpectralSample | np.ndarray) -> np.ndarray:
    return s.eigenvalues if isinstance(s, SpectralSample) else np.sort(np.asarray(s, dtype=float))


def psi_eval(spec: FunctionalSpec, s: SpectralSample | np.ndarray) -> float:
    """Value of the functional on one spectrum.

    AC and Cond return ``inf`` when the spectrum has a zero eigenvalue.
    """
    ev = _eigs(s)
    lo, hi = float(ev[0]), float(ev[-1])
    kind = spec.kind
    if kind == "RIP":
        return max(hi - 1.0, 1.0 - lo)
    if kind == "StRIP":
        return 1.0 if max(hi - 1.0, 1.0 - lo) <= spec.delta else 0.0
    if kind == "Max":
        return hi
    if kind == "Min":
        return lo
    if kind == "Cond":
        return math.inf if lo <= 0.0 else hi / lo
    if kind == "AC":
        if lo <= 0.0:
            return math.inf
        return float(np.mean(1.0 / ev) * np.mean(ev))
    if kind == "Shannon":
        return float(np.mean(np.log1p(spec.alpha * ev)))
    raise AssertionError(kind)


def _extremes(law: LimitLaw) -> tuple[float, float]:
    lo = 0.0 if law.zero_mass > 0 else law.r_minus
    hi = law.atom_location if law.atom_location is not None else law.r_plus
    if law.is_degenerate:
        # everything sits on atoms
        lo = 0.0 if law.zero_mass > 0 else hi
    return lo, hi


def psi_limit(spec: FunctionalSpec, law: LimitLaw) -> float:
    kind = spec.kind
    lo, hi = _extremes(law)
    rip = max(hi - 1.0, 1.0 - lo)
    if kind == "RIP":
        return rip
    if kind == "StRIP":
        return 1.0 if rip <= spec.delta else 0.0
    if kind == "Max":
        return hi
    if kind == "Min":
        return lo
    if kind == "Cond":
        return math.inf if lo <= 0.0 else hi / lo
    if kind == "AC":
        if lo <= 0.0:
            raise DivergentLimitError("AC limit diverges when the lower edge touches 0 (beta >= 1)")
        return law.expect(lambda x: 1.0 / x)
    if kind == "Shannon":
        a = spec.alpha
        return law.expect(lambda x: math.log1p(a * x))
    raise AssertionError(kind)


def delta_psi(spec: FunctionalSpec, s: SpectralSample | np.ndarray, law: LimitLaw, limit: float | None = None) -> float:
    """``|psi_eval - psi_limit|``; pass ``limit`` to reuse a precomputed limit."""
    lim = psi_limit(spec, law) if limit is None else limit
    val = psi_eval(spec, s)
    if math.isinf(val) or math.isinf(lim):
        return 0.0 if val == lim else math.inf
    return abs(val - lim)
