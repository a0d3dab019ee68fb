"""Results bundle: trial stream, ROC and distance tables, resolved config and summary.

Layout of a bundle directory::

    config.yaml              resolved configuration
    trials.jsonl             one JSON object per trial (see TrialRecord)
    roc_<arm>_<det>.tsv      threshold, pfa, pd
    distance.tsv             arm, lo_m, hi_m, n, eve_energy, eve_corr, low_confidence
    summary.json             pd at the target pfa, reductions, seed, version, source hash
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from pathlib import Path

from . import __version__
from . import config as cfgmod
from .detection import RocCurve
from .experiment import DETECTORS, CampaignConfig, CampaignResults, TrialRecord

# modules whose code determines campaign results
_SIM_MODULES = ("nr_phy.py", "propagation.py", "access_control.py", "detection.py", "experiment.py",
                "_kernels.py")


class BundleError(RuntimeError):
    pass


def version() -> str:
    return __version__


def source_hash() -> str:
    h = hashlib.sha256()
    here = Path(__file__).parent
    for name in _SIM_MODULES:
        h.update(name.encode())
        h.update((here / name).read_bytes())
    return h.hexdigest()[:16]


def fmt(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def roc_table(roc: RocCurve) -> str:
    lines = ["threshold\tpfa\tpd"]
    lines += [f"{fmt(float(t))}\t{fmt(float(a))}\t{fmt(float(b))}" for t, a, b in zip(roc.thresholds, roc.pfa, roc.pd)]
    return "\n".join(lines) + "\n"


DISTANCE_COLUMNS = ("arm", "lo_m", "hi_m", "n", "eve_energy", "eve_corr", "low_confidence")


def distance_table(distance: dict) -> str:
    lines = ["\t".join(DISTANCE_COLUMNS)]
    for arm, rows in distance.items():
        for row in rows:
            lines.append("\t".join(fmt(arm if c == "arm" else row[c]) for c in DISTANCE_COLUMNS))
    return "\n".join(lines) + "\n"


def write_bundle(results: CampaignResults, out_dir) -> Path:
    """Write atomically: files land in a temporary sibling that is renamed at the end."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        (tmp / "config.yaml").write_text(cfgmod.emit(results.config))
        with open(tmp / "trials.jsonl", "w") as fh:
            for rec in results.records:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
        for (arm, det), roc in results.rocs.items():
            (tmp / f"roc_{arm}_{det}.tsv").write_text(roc_table(roc))
        (tmp / "distance.tsv").write_text(distance_table(results.distance))
        summary = {**results.summary, "seed": results.config.seed, "version": version(),
                   "source_hash": source_hash(), "n_trials": len(results.records),
                   "config": cfgmod.to_dict(results.config)}
        (tmp / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        if out.exists():
            shutil.rmtree(out)
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out


def read_config(bundle_dir) -> CampaignConfig:
    path = Path(bundle_dir) / "config.yaml"
    try:
        return cfgmod.load(path)
    except cfgmod.ConfigError as exc:
        raise BundleError(f"{path}: {exc}") from exc


def read_trials(bundle_dir) -> list[TrialRecord]:
    path = Path(bundle_dir) / "trials.jsonl"
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise BundleError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    out = []
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            out.append(TrialRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            raise BundleError(f"{path}: line {i}: {exc}") from exc
    if not out:
        raise BundleError(f"{path}: no trials")
    return out


def read_roc(path) -> RocCurve:
    import numpy as np
    path = Path(path)
    try:
        rows = [line.split("\t") for line in path.read_text().splitlines()[1:] if line]
        arr = np.array(rows, dtype=float)
    except (OSError, ValueError) as exc:
        raise BundleError(f"{path}: {exc}") from exc
    if arr.ndim != 2 or arr.shape[1] != 3 or not np.isfinite(arr).all():
        raise BundleError(f"{path}: expected three finite columns")
    return RocCurve(arr[:, 0], arr[:, 1], arr[:, 2])


def read_summary(bundle_dir) -> dict:
    path = Path(bundle_dir) / "summary.json"
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleError(f"{path}: {exc}") from exc


def roc_files(bundle_dir, arms) -> dict:
    return {(arm, det): Path(bundle_dir) / f"roc_{arm}_{det}.tsv" for arm in arms for det in DETECTORS}
