"""Monte-Carlo harness over random k-subsets and the exponent tests built on it.

For each grid point ``n`` one frame matrix is built, ``T`` uniform k-subsets of
its rows are drawn, and the KS distance and functional errors of every subset
spectrum are reduced to a :class:`TrialAggregate`.  The same is done for ``T``
draws of the MANOVA ensemble of matching size and field.  :func:`test1_fit`
and :func:`test2_fit` regress those aggregates on ``log n`` and compare the
frame's exponent with the baseline's by a two-sample t statistic.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import rng as _rng
from .ensembles import ManovaParams, sample_manova, sample_manova_reversed
from .frames import FrameMatrix, admissible_sizes, construct, get_family
from .functionals import DivergentLimitError, FunctionalSpec, delta_psi, psi_limit
from .numerics import linear_regression, student_t_two_sided_p
from .rng import RngStream
from .spectra import SpectralSample, ks_distance, manova_law, subset_spectrum

log = logging.getLogger(__name__)

DESK_GRID = (103, 211, 431, 863)
THREADS_ENV = "FRAME_SPECTRA_THREADS"
_FIELD_CODE = {"real": 0, "complex": 1}


class ExperimentError(ValueError):
    pass


def functional_label(spec: FunctionalSpec) -> str:
    if spec.kind == "StRIP" and spec.delta != 0.4531:
        return f"strip_d{spec.delta:g}"
    if spec.kind == "Shannon" and spec.alpha != 1.0:
        return f"shannon_a{spec.alpha:g}"
    return spec.name


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    gamma: float = 0.5
    beta: float = 0.8
    n_grid: tuple[int, ...] = DESK_GRID
    trials: int = 500
    seed: int = 0
    functionals: tuple[FunctionalSpec, ...] = ()
    min_n_for_fit: int = 100
    baseline: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", get_family(self.family).label)
        object.__setattr__(self, "n_grid", tuple(sorted(int(n) for n in self.n_grid)))
        fs = tuple(f if isinstance(f, FunctionalSpec) else FunctionalSpec.parse(f) for f in self.functionals)
        object.__setattr__(self, "functionals", fs)
        if self.trials < 1:
            raise ExperimentError("trials must be >= 1")
        if not self.n_grid:
            raise ExperimentError("n_grid is empty")


@dataclass(frozen=True)
class TrialAggregate:
    frame: str
    field: str
    n: int
    m: int
    k: int
    T: int
    seed: int
    mean_ks: float
    var_ks: float
    mse_ks: float
    mse_psi: dict[str, float] = field(default_factory=dict)
    psi_limits: dict[str, float] = field(default_factory=dict)

    @property
    def beta_n(self) -> float:
        return self.k / self.m

    @property
    def gamma_n(self) -> float:
        return self.m / self.n


def choose_sizes(family: str, n: int, gamma: float, beta: float, max_rel_shift: float = 0.1) -> tuple[int, int, int]:
    """Nearest admissible ``(n', m)`` to ``n`` (then m/n' nearest gamma), and ``k = round(beta m)``."""
    fam = get_family(family)
    radius_cap = max(1, int(max_rel_shift * n))
    for r in range(radius_cap + 1):
        cands = admissible_sizes(fam, max(2, n - r), n + r, gamma)
        cands = [c for c in cands if abs(c[0] - n) == r]
        if cands:
            n2, m = min(cands, key=lambda c: (abs(c[1] / c[0] - gamma), c[0]))
            break
    else:
        raise ExperimentError(f"no admissible {fam.label} size within {radius_cap} of n={n}")
    if abs(m / n2 - gamma) > max_rel_shift * gamma:
        raise ExperimentError(f"{fam.label} at n={n2} has m/n={m / n2:.4g}, too far from gamma={gamma}")
    k = max(1, int(math.floor(beta * m + 0.5)))
    if k > n2:
        raise ExperimentError(f"k={k} exceeds n={n2}")
    return n2, m, k


def sample_subsets(n: int, k: int, T: int, rng: RngStream) -> list[np.ndarray]:
    """``T`` sorted uniform k-subsets of ``range(n)``; subset ``i`` uses ``rng.at(i)``."""
    return [subset_for_trial(n, k, rng.at(i)) for i in range(T)]


def subset_for_trial(n: int, k: int, stream: RngStream) -> np.ndarray:
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if k == n:
        return np.arange(n)
    gen = stream.generator()
    # partial Fisher-Yates: k swaps from the front
    perm = np.arange(n)
    draws = gen.integers(np.arange(k), n)
    for i, j in enumerate(draws):
        perm[i], perm[j] = perm[j], perm[i]
    return np.sort(perm[:k])


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


@lru_cache(maxsize=32)
def _deterministic_frame(label: str, n: int, m: int) -> FrameMatrix:
    return construct(label, n, m)


def build_frame(family: str, n: int, m: int, seed: int) -> FrameMatrix:
    fam = get_family(family)
    if fam.is_deterministic:
        return _deterministic_frame(fam.label, n, m)
    return construct(fam, n, m, rng=RngStream(seed).child(_rng.FRAME, n))


def _limits(functionals: Sequence[FunctionalSpec], law) -> dict[str, float]:
    out = {}
    for spec in functionals:
        try:
            out[functional_label(spec)] = psi_limit(spec, law)
        except DivergentLimitError:
            out[functional_label(spec)] = math.nan
    return out


def _trial_row(ev: np.ndarray, n: int, m: int, law, functionals, limits) -> np.ndarray:
    s = SpectralSample(ev, n, m)
    row = [ks_distance(s, law)]
    for spec in functionals:
        lim = limits[functional_label(spec)]
        row.append(math.nan if math.isnan(lim) else delta_psi(spec, s, law, limit=lim))
    return np.array(row)


def _reduce(rows: np.ndarray, functionals, limits, **meta) -> TrialAggregate:
    ks = rows[:, 0]
    mean = float(np.mean(ks))
    var = float(np.mean((ks - mean) ** 2))
    mse = float(np.mean(ks * ks))
    mse_psi = {}
    for j, spec in enumerate(functionals, start=1):
        d = rows[:, j]
        mse_psi[functional_label(spec)] = float(np.mean(d * d))
    return TrialAggregate(mean_ks=mean, var_ks=var, mse_ks=mse, mse_psi=mse_psi, psi_limits=dict(limits), **meta)


def _map_ordered(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def frame_aggregate(cfg: ExperimentConfig, n: int, m: int, k: int, threads: int = 1) -> TrialAggregate:
    frame = build_frame(cfg.family, n, m, cfg.seed)
    law = manova_law(k / m, m / n)
    limits = _limits(cfg.functionals, law)
    base = RngStream(cfg.seed).child(_rng.SUBSET, n)

    def one(i: int) -> np.ndarray:
        idx = subset_for_trial(n, k, base.at(i))
        ev = subset_spectrum(frame, idx).eigenvalues
        return _trial_row(ev, n, m, law, cfg.functionals, limits)

    rows = np.vstack(_map_ordered(one, range(cfg.trials), threads))
    fam = get_family(cfg.family)
    return _reduce(rows, cfg.functionals, limits, frame=fam.label, field=fam.field, n=n, m=m, k=k, T=cfg.trials, seed=cfg.seed)


def baseline_aggregate(
    n: int, m: int, k: int, field_: str, trials: int, seed: int, functionals=(), threads: int = 1
) -> TrialAggregate:
    law = manova_law(k / m, m / n)
    limits = _limits(functionals, law)
    p = ManovaParams(n, m, k, field_)
    base = RngStream(seed).child(_rng.BASELINE, n, _FIELD_CODE[field_])

    def one(i: int) -> np.ndarray:
        if k <= m:
            ev = sample_manova(p, base.at(i))
        else:
            ev = np.concatenate([np.zeros(k - m), sample_manova_reversed(p, base.at(i))])
        return _trial_row(ev, n, m, law, functionals, limits)

    rows = np.vstack(_map_ordered(one, range(trials), threads))
    label = "MANOVA" if field_ == "complex" else "RealMANOVA"
    return _reduce(rows, functionals, limits, frame=label, field=field_, n=n, m=m, k=k, T=trials, seed=seed)


@dataclass
class RunResult:
    config: ExperimentConfig
    frame: list[TrialAggregate]
    baseline: list[TrialAggregate]
    skipped: list[int] = field(default_factory=list)


def run_trials(cfg: ExperimentConfig, threads: int | None = None) -> RunResult:
    threads = resolve_threads(threads)
    fam = get_family(cfg.family)
    frame_aggs: list[TrialAggregate] = []
    base_aggs: list[TrialAggregate] = []
    skipped: list[int] = []
    # one BLAS thread per worker keeps every trial bit-identical across worker counts
    with threadpool_limits(limits=1):
        for n_target in cfg.n_grid:
            try:
                n, m, k = choose_sizes(fam.label, n_target, cfg.gamma, cfg.beta)
            except ExperimentError as exc:
                log.warning("skipping n=%d: %s", n_target, exc)
                skipped.append(n_target)
                continue
            log.info("%s n=%d m=%d k=%d T=%d", fam.label, n, m, k, cfg.trials)
            frame_aggs.append(frame_aggregate(cfg, n, m, k, threads))
            if cfg.baseline:
                base_aggs.append(
                    baseline_aggregate(n, m, k, fam.field, cfg.trials, cfg.seed, cfg.functionals, threads)
                )
    return RunResult(cfg, frame_aggs, base_aggs, skipped)


# --- exponent tests ------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceFit:
    test: str
    frame: str
    functional: str | None
    b_hat: float
    se: float
    intercept: float
    r2: float
    n_points: int
    baseline: dict
    t: float
    dof: int
    p: float
    a_hat: float | None = None
    mse_r2: float | None = None
    mse_slope: float | None = None
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        d = {
            "test": self.test,
            "frame": self.frame,
            "functional": self.functional,
            "b_hat": self.b_hat,
            "se": self.se,
            "intercept": self.intercept,
            "r2": self.r2,
            "n_points": self.n_points,
            "a_hat": self.a_hat,
            "baseline": dict(self.baseline),
            "t": self.t,
            "dof": self.dof,
            "p": self.p,
        }
        if self.mse_r2 is not None:
            d["mse_r2"] = self.mse_r2
            d["mse_slope"] = self.mse_slope
        d["flags"] = list(self.flags)
        return d


def t_compare(b1: float, se1: float, b2: float, se2: float, dof: int) -> tuple[float, float]:
    """Two-sided test of equal slopes; returns ``(t, p)``."""
    num = b1 - b2
    den = math.sqrt(se1 * se1 + se2 * se2)
    if den == 0.0:
        t = 0.0 if num == 0.0 else math.copysign(math.inf, num)
    else:
        t = num / den
    return t, student_t_two_sided_p(t, dof)


def _fit_points(aggs: Sequence[TrialAggregate], min_n: int, value) -> tuple[np.ndarray, np.ndarray]:
    ns, ys = [], []
    for a in aggs:
        if a.n < min_n:
            continue
        v = value(a)
        if not (v > 0 and math.isfinite(v)):
            continue
        ns.append(a.n)
        ys.append(v)
    return np.array(ns, dtype=float), np.array(ys)


def test1_fit(
    agg_frame: Sequence[TrialAggregate], agg_baseline: Sequence[TrialAggregate], min_n_for_fit: int = 100
) -> ConvergenceFit:
    """Regress ``-1/2 log Var(KS)`` on ``log n`` for frame and baseline and t-test the slopes."""
    nf, vf = _fit_points(agg_frame, min_n_for_fit, lambda a: a.var_ks)
    nb, vb = _fit_points(agg_baseline, min_n_for_fit, lambda a: a.var_ks)
    if len(nf) < 3 or len(nb) < 3:
        raise ExperimentError(f"Test 1 needs >= 3 grid points with n >= {min_n_for_fit} (frame {len(nf)}, baseline {len(nb)})")
    fit = linear_regression(np.log(nf), -0.5 * np.log(vf))
    bfit = linear_regression(np.log(nb), -0.5 * np.log(vb))
    dof = len(nf) + len(nb) - 4
    t, p = t_compare(fit.slope, fit.slope_se, bfit.slope, bfit.slope_se, max(dof, 1))

    nm, mse = _fit_points(agg_frame, min_n_for_fit, lambda a: a.mse_ks)
    mfit = linear_regression(np.log(nm), -np.log(mse))
    return ConvergenceFit(
        test="test1",
        frame=agg_frame[0].frame,
        functional=None,
        b_hat=fit.slope,
        se=fit.slope_se,
        intercept=fit.intercept,
        r2=fit.r_squared,
        n_points=len(nf),
        baseline={
            "frame": agg_baseline[0].frame,
            "b_hat": bfit.slope,
            "se": bfit.slope_se,
            "intercept": bfit.intercept,
            "r2": bfit.r_squared,
            "n_points": len(nb),
        },
        t=t,
        dof=dof,
        p=p,
        mse_r2=mfit.r_squared,
        mse_slope=mfit.slope,
    )


def test2_fit(
    agg_frame: Sequence[TrialAggregate],
    agg_baseline: Sequence[TrialAggregate],
    functional: FunctionalSpec | str,
    min_n_for_fit: int = 100,
    ratio_convention: str = "literal",
) -> ConvergenceFit:
    """Two-stage fit of ``E Delta_psi^2 = C n^-b log^-a n``.

    Stage 1 regresses the baseline's ``-log MSE`` on ``log n`` and ``log log n``
    (coefficients ``a0`` and ``b0``).  Stage 2 regresses ``-log MSE`` on the
    single regressor ``log n + r log log n`` for frame and baseline and
    t-tests the two slopes; ``a_hat = b_hat * r``.  ``ratio_convention``
    picks ``r = a0/b0`` ("literal") or ``r = b0/a0`` ("swapped").
    """
    spec = functional if isinstance(functional, FunctionalSpec) else FunctionalSpec.parse(functional)
    label = functional_label(spec)
    if ratio_convention not in ("literal", "swapped"):
        raise ValueError("ratio_convention must be 'literal' or 'swapped'")

    nb, mb = _fit_points(agg_baseline, min_n_for_fit, lambda a: a.mse_psi.get(label, math.nan))
    nf, mf = _fit_points(agg_frame, min_n_for_fit, lambda a: a.mse_psi.get(label, math.nan))
    if len(nb) < 5:
        raise ExperimentError(f"Test 2 needs a baseline grid of >= 5 points, got {len(nb)}")
    if len(nf) < 3:
        raise ExperimentError(f"Test 2 needs >= 3 frame grid points, got {len(nf)}")

    yb, yf = -np.log(mb), -np.log(mf)
    stage1 = linear_regression(np.column_stack([np.log(nb), np.log(np.log(nb))]), yb)
    a0, b0 = stage1.coefs
    flags: list[str] = []
    denom = b0 if ratio_convention == "literal" else a0
    if abs(denom) < 1e-6:
        ratio = 0.0
        flags.append("degenerate_stage1_ratio")
    else:
        ratio = (a0 / b0) if ratio_convention == "literal" else (b0 / a0)

    def z(ns: np.ndarray) -> np.ndarray:
        return np.log(ns) + ratio * np.log(np.log(ns))

    fit = linear_regression(z(nf), yf)
    bfit = linear_regression(z(nb), yb)
    dof = len(nf) + len(nb) - 4
    t, p = t_compare(fit.slope, fit.slope_se, bfit.slope, bfit.slope_se, max(dof, 1))
    return ConvergenceFit(
        test="test2",
        frame=agg_frame[0].frame,
        functional=label,
        b_hat=fit.slope,
        se=fit.slope_se,
        intercept=fit.intercept,
        r2=fit.r_squared,
        n_points=len(nf),
        a_hat=fit.slope * ratio,
        baseline={
            "frame": agg_baseline[0].frame,
            "a0": a0,
            "b0": b0,
            "stage1_r2": stage1.r_squared,
            "ratio": ratio,
            "ratio_convention": ratio_convention,
            "b_hat": bfit.slope,
            "se": bfit.slope_se,
            "r2": bfit.r_squared,
            "a_hat": bfit.slope * ratio,
            "n_points": len(nb),
        },
        t=t,
        dof=dof,
        p=p,
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class TabulateRow:
    n: int
    m: int
    k: int
    limit: float
    rmse: float


def tabulate(aggs: Sequence[TrialAggregate], functional: FunctionalSpec | str) -> list[TabulateRow]:
    """Lookup rows ``limit ± RMSE`` per grid point from frame aggregates."""
    spec = functional if isinstance(functional, FunctionalSpec) else FunctionalSpec.parse(functional)
    label = functional_label(spec)
    rows = []
    for a in aggs:
        if label not in a.mse_psi:
            raise ExperimentError(f"aggregate for n={a.n} has no {label} column")
        lim = a.psi_limits.get(label)
        if lim is None:
            # aggregates read back from CSV carry no limits
            lim = _limits((spec,), manova_law(a.beta_n, a.gamma_n))[label]
        rows.append(TabulateRow(a.n, a.m, a.k, lim, math.sqrt(a.mse_psi[label])))
    return rows


def tabulate_run(
    family: str, beta: float, gamma: float, n_list: Sequence[int], functional: FunctionalSpec | str,
    trials: int = 200, seed: int = 0, threads: int | None = None,
) -> list[TabulateRow]:
    spec = functional if isinstance(functional, FunctionalSpec) else FunctionalSpec.parse(functional)
    cfg = ExperimentConfig(family, gamma=gamma, beta=beta, n_grid=tuple(n_list), trials=trials, seed=seed,
                           functionals=(spec,), baseline=False)
    return tabulate(run_trials(cfg, threads).frame, spec)
