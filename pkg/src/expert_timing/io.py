"""CSV/JSON artifacts: policy tables, profiles, simulation summaries, bounds.

Numbers are written with 12 significant digits (``%.12g``), locale free.
Files are written to a temporary sibling and renamed into place, so a failed
run never leaves a partial artifact behind.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .solver import PolicyTable, PsiRow, SolverConfig

__all__ = [
    "POLICY_CSV_HEADER",
    "fmt",
    "atomic_write_text",
    "policy_csv_text",
    "save_policy",
    "load_policy",
    "read_policy_csv",
    "profile_csv_text",
    "figure2_csv_text",
    "sim_csv_text",
    "paths_csv_text",
    "bounds_csv_text",
    "sha256_file",
    "write_manifest",
]

POLICY_CSV_HEADER = ["t", "theta", "theta_sq_over_t", "psi0", "capital_psi"]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return f"{v:.12g}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def policy_csv_text(table: PolicyTable) -> str:
    rows = []
    for t in range(1, table.T + 1):
        th = table.theta[t]
        rows.append([t, th, th * th / t, table.psi0[t], table.capital_psi[t]])
    return _csv_text(POLICY_CSV_HEADER, rows)


def _policy_json(table: PolicyTable, include_rows: bool) -> dict:
    doc = {
        "T": table.T,
        "config": table.config.to_dict(),
        "certified": table.certified,
        "accumulated_error_bound": table.accumulated_error_bound,
        "theta": [None] + table.theta[1:].tolist(),
        "psi0": [None] + table.psi0[1:].tolist(),
        "capital_psi": [None] + table.capital_psi[1:].tolist(),
        "error_bound": [None] + table.error_bound[1:].tolist(),
    }
    if include_rows:
        doc["rows"] = [
            {"t": r.t, "gamma": r.gamma, "theta": r.theta, "values": r.values.tolist()}
            for _, r in sorted(table.rows.items())
        ]
    return doc


def save_policy(table: PolicyTable, out_dir, include_rows: bool = False) -> tuple[Path, Path]:
    """Write ``policy.json`` and ``policy.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    text = json.dumps(_policy_json(table, include_rows), indent=1)
    pj = atomic_write_text(out_dir / "policy.json", text + "\n")
    pc = atomic_write_text(out_dir / "policy.csv", policy_csv_text(table))
    return pj, pc


def _array(values) -> np.ndarray:
    return np.array([np.nan if v is None else v for v in values], dtype=float)


def load_policy(out_dir) -> PolicyTable:
    """Rebuild a table from ``policy.json`` (full precision) in ``out_dir``."""
    doc = json.loads((Path(out_dir) / "policy.json").read_text())
    cfg = SolverConfig(**doc["config"])
    rows = {
        r["t"]: PsiRow(t=r["t"], values=np.array(r["values"], dtype=float),
                       gamma=r["gamma"], theta=r["theta"])
        for r in doc.get("rows", [])
    }
    return PolicyTable(T=doc["T"], theta=_array(doc["theta"]), psi0=_array(doc["psi0"]),
                       capital_psi=_array(doc["capital_psi"]), config=cfg,
                       error_bound=_array(doc["error_bound"]), rows=rows)


def read_policy_csv(path) -> dict[str, np.ndarray]:
    """Columns of a ``policy.csv``, each as a t-indexed array (slot 0 NaN)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != POLICY_CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        recs = list(reader)
    out = {}
    for col in POLICY_CSV_HEADER[1:]:
        out[col] = np.concatenate([[np.nan], [float(r[col]) for r in recs]])
    out["t"] = np.array([0] + [int(r["t"]) for r in recs])
    return out


def profile_csv_text(c: np.ndarray, psi: np.ndarray) -> str:
    return _csv_text(["c", "psi"], zip(c, psi))


def figure2_csv_text(table: PolicyTable) -> str:
    rows = []
    for t in range(1, table.T + 1):
        th = table.theta[t]
        ll = 2 * math.log(math.log(t)) if t >= 3 else None
        rows.append([t, th * th / t, table.psi0[t], ll])
    return _csv_text(["t", "theta_sq_over_t", "psi0", "two_loglog_t"], rows)


def sim_csv_text(results) -> str:
    return _csv_text(["policy", "n", "mean_reward", "stderr", "mean_stop_time"],
                     [[r.policy, r.n_paths, r.mean_reward, r.stderr, r.mean_stop_time] for r in results])


def paths_csv_text(results) -> str:
    rows = []
    for r in results:
        if r.rewards is None:
            raise ValueError(f"result {r.policy!r} kept no per-path data")
    n = results[0].n_paths if results else 0
    for i in range(n):
        for r in results:
            rows.append([i, r.policy, r.stop_times[i], r.rewards[i]])
    return _csv_text(["path_id", "policy", "stop_t", "reward"], rows)


def bounds_csv_text(reports) -> str:
    header = ["T", "eps", "upper", "lower", "gamma1", "gamma2", "admissible_upper", "admissible_lower"]
    return _csv_text(header, [[r.T, r.epsilon, r.upper, r.lower, r.gamma1, r.gamma2,
                               r.admissible_upper, r.admissible_lower] for r in reports])


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, command: str, config: dict, artifacts) -> Path:
    out_dir = Path(out_dir)
    doc = {
        "command": command,
        "config": config,
        "artifacts": {Path(p).name: sha256_file(p) for p in artifacts},
    }
    return atomic_write_text(out_dir / "manifest.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
