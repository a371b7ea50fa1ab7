"""CSV/JSON serialisation and run manifests.

Floats are written with 17 significant digits so a read-back reproduces the
in-memory doubles exactly.  CSV files start with a ``# manifest: <name>``
comment line pointing at the run manifest that produced them.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .experiments import TrialAggregate, TabulateRow

MANIFEST_NAME = "manifest.json"
AGG_FIELDS = ["frame", "field", "n", "m", "k", "beta_n", "gamma_n", "T", "seed", "mean_ks", "var_ks", "mse_ks"]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(v)


def _open_csv(path: Path, manifest: str | None):
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", newline="")
    if manifest:
        fh.write(f"# manifest: {manifest}\n")
    return fh


def read_csv_rows(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence], manifest: str | None = None) -> Path:
    path = Path(path)
    with _open_csv(path, manifest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def write_matrix(path: str | Path, x: np.ndarray, manifest: str | None = None) -> Path:
    """Frame dump: one row per frame vector; complex entries as ``re_j, im_j`` pairs."""
    n, m = x.shape
    if np.iscomplexobj(x):
        header = [f"{p}_{j}" for j in range(m) for p in ("re", "im")]
        body = np.empty((n, 2 * m))
        body[:, 0::2] = x.real
        body[:, 1::2] = x.imag
    else:
        header = [f"x_{j}" for j in range(m)]
        body = x
    return write_rows(path, header, body.tolist(), manifest)


def read_matrix(path: str | Path) -> np.ndarray:
    rows = read_csv_rows(path)
    cols = list(rows[0].keys())
    arr = np.array([[float(r[c]) for c in cols] for r in rows])
    if cols[0].startswith("re_"):
        return arr[:, 0::2] + 1j * arr[:, 1::2]
    return arr


def agg_header(aggs: Sequence[TrialAggregate]) -> list[str]:
    labels: list[str] = []
    for a in aggs:
        for lab in a.mse_psi:
            if lab not in labels:
                labels.append(lab)
    return AGG_FIELDS + [f"mse_psi_{lab}" for lab in labels]


def write_aggregates(path: str | Path, aggs: Sequence[TrialAggregate], manifest: str | None = None) -> Path:
    header = agg_header(aggs)
    labels = [h[len("mse_psi_"):] for h in header[len(AGG_FIELDS):]]
    rows = []
    for a in aggs:
        rows.append(
            [a.frame, a.field, a.n, a.m, a.k, a.beta_n, a.gamma_n, a.T, a.seed, a.mean_ks, a.var_ks, a.mse_ks]
            + [a.mse_psi.get(lab, math.nan) for lab in labels]
        )
    return write_rows(path, header, rows, manifest)


def read_aggregates(path: str | Path) -> list[TrialAggregate]:
    out = []
    for r in read_csv_rows(path):
        mse_psi = {k[len("mse_psi_"):]: float(v) for k, v in r.items() if k.startswith("mse_psi_")}
        out.append(
            TrialAggregate(
                frame=r["frame"], field=r["field"], n=int(r["n"]), m=int(r["m"]), k=int(r["k"]),
                T=int(r["T"]), seed=int(r["seed"]), mean_ks=float(r["mean_ks"]),
                var_ks=float(r["var_ks"]), mse_ks=float(r["mse_ks"]), mse_psi=mse_psi,
            )
        )
    return out


def write_table(path: str | Path, rows: Sequence[TabulateRow], manifest: str | None = None) -> Path:
    return write_rows(path, ["n", "m", "k", "limit", "rmse"], [[r.n, r.m, r.k, r.limit, r.rmse] for r in rows], manifest)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o))


def _clean(o):
    # JSON has no inf/nan; encode them as strings
    if isinstance(o, float) and not math.isfinite(o):
        return fmt(o)
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def write_json(path: str | Path, obj, manifest: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if manifest is not None and isinstance(obj, dict):
        obj = {**obj, "manifest": manifest}
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


@dataclass
class RunManifest:
    command: str
    config: dict
    master_seed: int | None = None
    outputs: list[str] = field(default_factory=list)
    code_version: str = __version__
    started: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    finished: str | None = None

    def identity(self) -> str:
        """Hash of everything except timestamps."""
        key = json.dumps(
            {"command": self.command, "config": _clean(self.config), "seed": self.master_seed,
             "version": self.code_version, "outputs": sorted(self.outputs)},
            sort_keys=True, default=_json_default,
        )
        return hashlib.sha256(key.encode()).hexdigest()

    def write(self, directory: str | Path) -> Path:
        self.finished = datetime.now(timezone.utc).isoformat()
        d = {
            "command": self.command,
            "config": self.config,
            "master_seed": self.master_seed,
            "code_version": self.code_version,
            "outputs": self.outputs,
            "started": self.started,
            "finished": self.finished,
            "identity_sha256": self.identity(),
        }
        return write_json(Path(directory) / MANIFEST_NAME, d)
