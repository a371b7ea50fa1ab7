"""Batch command line: ``frame-spectra {construct,law,spectrum,run,tabulate,validate}``.

Exit codes: 0 success, 2 invalid config, 3 inadmissible sizes, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import outputs
from .experiments import (
    DESK_GRID,
    ExperimentConfig,
    ExperimentError,
    choose_sizes,
    functional_label,
    resolve_threads,
    run_trials,
    subset_for_trial,
    tabulate,
    test1_fit,
    test2_fit,
)
from .frames import FAMILIES, InadmissibleSizeError, admissible_sizes, construct, diagnostics, get_family
from .functionals import FunctionalSpec
from .numerics import IntegrationError, RankDeficientError
from .rng import FRAME, SUBSET, RngStream
from .spectra import ks_distance, law_table, manova_law, mp_law, subset_spectrum

EXIT_OK, EXIT_CONFIG, EXIT_SIZE, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("frame_spectra")


class ConfigError(ValueError):
    pass


# --- config ------------------------------------------------------------------------

CONFIG_KEYS = {
    "family": str,
    "gamma": float,
    "beta": float,
    "n_grid": lambda s: tuple(int(v) for v in s.replace(",", " ").split()),
    "trials": int,
    "seed": int,
    "functionals": lambda s: tuple(v.strip() for v in s.split(",") if v.strip()),
    "min_n_for_fit": int,
    "test": str,
    "ratio_convention": str,
    "threads": int,
    "bits": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}


def load_config(path: str | Path | None) -> dict:
    """Read the single section of an experiment config file into typed values."""
    if path is None:
        return {}
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if len(cp.sections()) != 1:
        raise ConfigError(f"config must hold exactly one experiment section, found {cp.sections()}")
    sec = cp[cp.sections()[0]]
    out = {}
    for key, raw in sec.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return out


def _merge(cfg: dict, args: argparse.Namespace, keys) -> dict:
    merged = dict(cfg)
    for key in keys:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    return merged


# --- commands ------------------------------------------------------------------------

def cmd_construct(args) -> int:
    fam = get_family(args.family)
    if not fam.is_deterministic and args.seed is None:
        raise ConfigError(f"--seed is required for random family {fam.label}")
    m = args.m
    if m is None:
        if fam.natural_gamma is None and fam.label not in ("DSS", "ComplexPF"):
            sizes = admissible_sizes(fam, args.n, args.n, args.gamma)
            if not sizes:
                raise InadmissibleSizeError(f"no admissible m for {fam.label} at n={args.n}")
            m = sizes[0][1]
    rng = None if fam.is_deterministic else RngStream(args.seed).child(FRAME, args.n)
    f = construct(fam, args.n, m, rng=rng)
    d = diagnostics(f)
    report = {
        "family": fam.label,
        "field": fam.field,
        "n": f.n,
        "m": f.m,
        "gamma_n": f.gamma_n,
        **d.as_dict(),
        "unit_norm": d.is_unit_norm(),
        "tight": d.is_tight(),
        "equiangular": d.is_equiangular(),
        "etf": d.is_unit_norm() and d.is_tight() and d.is_equiangular(),
    }
    if args.out:
        out = Path(args.out)
        man = outputs.RunManifest("construct", vars_clean(args), args.seed)
        outputs.write_matrix(out / f"{fam.label}_{f.n}x{f.m}.csv", f.x, outputs.MANIFEST_NAME)
        outputs.write_json(out / f"{fam.label}_{f.n}x{f.m}_diagnostics.json", report, outputs.MANIFEST_NAME)
        man.outputs = [f"{fam.label}_{f.n}x{f.m}.csv", f"{fam.label}_{f.n}x{f.m}_diagnostics.json"]
        man.write(out)
    print(json.dumps(outputs._clean(report), indent=2))
    return EXIT_OK


def _law(kind: str, beta: float, gamma: float | None):
    if kind.upper() == "MP":
        return mp_law(beta)
    if gamma is None:
        raise ConfigError("MANOVA needs --gamma")
    return manova_law(beta, gamma)


def cmd_law(args) -> int:
    law = _law(args.kind, args.beta, args.gamma)
    summary = {
        "kind": law.kind,
        "beta": law.beta,
        "gamma": law.gamma,
        "r_minus": law.r_minus,
        "r_plus": law.r_plus,
        "point_mass_at_inv_gamma": law.point_mass_at_inv_gamma,
        "zero_mass": law.zero_mass,
    }
    if args.out:
        out = Path(args.out)
        name = f"{law.kind}_b{law.beta:g}" + (f"_g{law.gamma:g}" if law.gamma else "") + ".csv"
        outputs.write_rows(out / name, ["x", "pdf", "cdf"], law_table(law, args.points).tolist(), outputs.MANIFEST_NAME)
        man = outputs.RunManifest("law", vars_clean(args))
        man.outputs = [name]
        man.write(out)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    if args.seed is None:
        raise ConfigError("--seed is required (the subset is random)")
    fam = get_family(args.family)
    n, m, k = choose_sizes(fam.label, args.n, args.gamma, args.beta)
    if args.k is not None:
        k = args.k
    rng = None if fam.is_deterministic else RngStream(args.seed).child(FRAME, n)
    f = construct(fam, n, m, rng=rng)
    idx = subset_for_trial(n, k, RngStream(args.seed).child(SUBSET, n))
    s = subset_spectrum(f, idx)
    d = ks_distance(s)
    report = {"family": fam.label, "n": n, "m": m, "k": k, "beta_n": s.beta_n, "gamma_n": s.gamma_n, "ks": d}
    if args.out:
        out = Path(args.out)
        outputs.write_rows(out / "spectrum.csv", ["index", "eigenvalue"], list(enumerate(s.eigenvalues.tolist())), outputs.MANIFEST_NAME)
        outputs.write_json(out / "spectrum.json", {**report, "subset": idx.tolist()}, outputs.MANIFEST_NAME)
        man = outputs.RunManifest("spectrum", vars_clean(args), args.seed)
        man.outputs = ["spectrum.csv", "spectrum.json"]
        man.write(out)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _experiment_from(merged: dict) -> ExperimentConfig:
    if "family" not in merged:
        raise ConfigError("no frame family given")
    if "seed" not in merged:
        raise ConfigError("a master seed is required (config key 'seed' or --seed)")
    kw = {k: merged[k] for k in ("gamma", "beta", "n_grid", "trials", "seed", "functionals", "min_n_for_fit") if k in merged}
    try:
        return ExperimentConfig(merged["family"], **kw)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _to_bits(aggs):
    # Shannon values in bits: limits scale by 1/ln 2, squared errors by 1/ln^2 2
    c = 1.0 / math.log(2.0)
    for a in aggs:
        for lab in list(a.mse_psi):
            if lab.startswith("shannon"):
                a.mse_psi[lab] *= c * c
                if lab in a.psi_limits:
                    a.psi_limits[lab] *= c
    return aggs


def cmd_run(args) -> int:
    cfg_file = load_config(args.config)
    merged = _merge(cfg_file, args, ["family", "gamma", "beta", "n_grid", "trials", "seed", "functionals",
                                     "min_n_for_fit", "test", "ratio_convention", "threads", "bits"])
    test = merged.get("test", "test1")
    if test not in ("test1", "test2"):
        raise ConfigError(f"test must be test1 or test2, got {test!r}")
    cfg = _experiment_from(merged)
    if test == "test2" and not cfg.functionals:
        raise ConfigError("test2 needs at least one functional")
    threads = resolve_threads(merged.get("threads"))
    res = run_trials(cfg, threads)
    if merged.get("bits"):
        _to_bits(res.frame)
        _to_bits(res.baseline)

    out = Path(args.out)
    echo = {k: (list(v) if isinstance(v, tuple) else v) for k, v in merged.items() if k != "threads"}
    echo["functionals"] = [functional_label(f) for f in cfg.functionals]
    echo.setdefault("n_grid", list(cfg.n_grid))
    man = outputs.RunManifest(f"run {test}", echo, cfg.seed)
    names = ["aggregate_frame.csv", "aggregate_baseline.csv"]
    outputs.write_aggregates(out / names[0], res.frame, outputs.MANIFEST_NAME)
    outputs.write_aggregates(out / names[1], res.baseline, outputs.MANIFEST_NAME)

    fits = []
    try:
        if test == "test1":
            fits.append(test1_fit(res.frame, res.baseline, cfg.min_n_for_fit).as_dict())
        else:
            for spec in cfg.functionals:
                fits.append(
                    test2_fit(res.frame, res.baseline, spec, cfg.min_n_for_fit,
                              merged.get("ratio_convention", "literal")).as_dict()
                )
    except ExperimentError as exc:
        raise ConfigError(str(exc)) from exc
    meta = {"shannon_units": "bits" if merged.get("bits") else "nats", "skipped_n": res.skipped}
    for i, fit in enumerate(fits):
        name = f"fit_{test}" + (f"_{fit['functional']}" if fit["functional"] else "") + ".json"
        outputs.write_json(out / name, {**fit, **meta}, outputs.MANIFEST_NAME)
        names.append(name)
    man.outputs = names
    man.write(out)
    for fit in fits:
        print(json.dumps(outputs._clean(fit), indent=2))
    return EXIT_OK


def cmd_tabulate(args) -> int:
    if args.seed is None:
        raise ConfigError("--seed is required")
    spec = FunctionalSpec.parse(args.functional)
    cfg = ExperimentConfig(args.family, gamma=args.gamma, beta=args.beta, n_grid=tuple(args.n_grid),
                           trials=args.trials, seed=args.seed, functionals=(spec,), baseline=False)
    res = run_trials(cfg, resolve_threads(args.threads))
    rows = tabulate(res.frame, spec)
    if args.out:
        out = Path(args.out)
        name = f"table_{cfg.family}_{functional_label(spec)}_b{args.beta:g}_g{args.gamma:g}.csv"
        outputs.write_table(out / name, rows, outputs.MANIFEST_NAME)
        man = outputs.RunManifest("tabulate", vars_clean(args), args.seed)
        man.outputs = [name]
        man.write(out)
    print("n,m,k,limit,rmse")
    for r in rows:
        print(f"{r.n},{r.m},{r.k},{r.limit:.6g},{r.rmse:.4g}")
    return EXIT_OK


def validate_suite(n_max: int = 512, families=None) -> list[dict]:
    """Diagnostics for every deterministic family at every admissible n <= n_max."""
    rows = []
    labels = families or [f.label for f in FAMILIES.values() if f.is_deterministic and f.label != "LowPass"]
    for lab in labels:
        fam = get_family(lab)
        for n, m in admissible_sizes(fam, 2, n_max, 0.5):
            d = diagnostics(construct(fam, n, m))
            expect_etf = fam.is_etf
            ok = d.is_unit_norm() and d.is_tight() and (d.is_equiangular() == expect_etf)
            rows.append({"family": fam.label, "n": n, "m": m, **d.as_dict(),
                         "equiangular": d.is_equiangular(), "expected_etf": expect_etf, "pass": ok})
    return rows


def cmd_validate(args) -> int:
    rows = validate_suite(args.n_max, args.families)
    if args.out:
        out = Path(args.out)
        header = list(rows[0].keys())
        outputs.write_rows(out / "validate.csv", header, [[r[h] for h in header] for r in rows], outputs.MANIFEST_NAME)
        man = outputs.RunManifest("validate", vars_clean(args))
        man.outputs = ["validate.csv"]
        man.write(out)
    by_fam: dict[str, list[bool]] = {}
    for r in rows:
        by_fam.setdefault(r["family"], []).append(r["pass"])
    for fam, oks in by_fam.items():
        print(f"{fam:10s} {sum(oks):4d}/{len(oks):<4d} {'PASS' if all(oks) else 'FAIL'}")
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_NUMERIC


# --- plumbing ------------------------------------------------------------------------

def vars_clean(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "verbose", "threads")}


def _int_list(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frame-spectra", description="Frame subset spectra versus the MANOVA limit law.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="build a frame, dump it as CSV and report diagnostics")
    c.add_argument("--family", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--m", type=int)
    c.add_argument("--gamma", type=float, default=0.5)
    c.add_argument("--seed", type=int)
    c.add_argument("--out")
    c.set_defaults(func=cmd_construct)

    c = sub.add_parser("law", help="tabulate a limit law (x, pdf, cdf)")
    c.add_argument("--kind", choices=["MANOVA", "MP", "manova", "mp"], required=True)
    c.add_argument("--beta", type=float, required=True)
    c.add_argument("--gamma", type=float)
    c.add_argument("--points", type=int, default=512)
    c.add_argument("--out")
    c.set_defaults(func=cmd_law)

    c = sub.add_parser("spectrum", help="one random k-subset spectrum and its KS distance")
    c.add_argument("--family", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--gamma", type=float, default=0.5)
    c.add_argument("--beta", type=float, default=0.8)
    c.add_argument("--k", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--out")
    c.set_defaults(func=cmd_spectrum)

    c = sub.add_parser("run", help="Monte-Carlo aggregates plus Test 1 / Test 2 fits")
    c.add_argument("--test", choices=["test1", "test2"])
    c.add_argument("--config")
    c.add_argument("--family")
    c.add_argument("--gamma", type=float)
    c.add_argument("--beta", type=float)
    c.add_argument("--n-grid", dest="n_grid", type=_int_list)
    c.add_argument("--trials", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--functionals", type=lambda s: tuple(v for v in s.split(",") if v))
    c.add_argument("--min-n-for-fit", dest="min_n_for_fit", type=int)
    c.add_argument("--ratio-convention", dest="ratio_convention", choices=["literal", "swapped"])
    c.add_argument("--bits", action="store_const", const=True, help="report Shannon values in bits")
    c.add_argument("--threads", type=int)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_run)

    c = sub.add_parser("tabulate", help="lookup table of limit ± RMSE for one functional")
    c.add_argument("--family", required=True)
    c.add_argument("--functional", required=True)
    c.add_argument("--beta", type=float, required=True)
    c.add_argument("--gamma", type=float, default=0.5)
    c.add_argument("--n-grid", dest="n_grid", type=_int_list, default=DESK_GRID)
    c.add_argument("--trials", type=int, default=200)
    c.add_argument("--seed", type=int)
    c.add_argument("--threads", type=int)
    c.add_argument("--out")
    c.set_defaults(func=cmd_tabulate)

    c = sub.add_parser("validate", help="frame diagnostics suite over admissible sizes")
    c.add_argument("--n-max", dest="n_max", type=int, default=512)
    c.add_argument("--families", type=lambda s: [v for v in s.split(",") if v])
    c.add_argument("--out")
    c.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InadmissibleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, RankDeficientError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
