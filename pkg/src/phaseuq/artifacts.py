"""Artifact files: stable CSV/JSON formats and deterministic run directories.

All floats are written in shortest round-trip representation, so re-reading an
artifact reproduces the in-memory values bit for bit.  Run directory names are
content hashes of the configuration, never timestamps: re-running a command
with the same configuration overwrites the same artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .campaign import CampaignConfig, PilotResult, StudyResult, ValidationResult
from .errors import ConfigError
from .mfmc import AllocationPlan, EstimationResult, ModelStats, SubsetCandidate

__all__ = [
    "run_id",
    "write_stats_csv",
    "read_stats_csv",
    "write_subsets_csv",
    "read_subsets_csv",
    "plan_to_dict",
    "plan_from_dict",
    "write_plan_json",
    "read_plan_json",
    "write_estimate_json",
    "write_validation_json",
    "read_validation_json",
    "write_pilot_json",
    "write_study_csv",
    "write_study_json",
    "write_field_csv",
    "read_field_csv",
]


def _fmt(value: float) -> str:
    return repr(float(value))


def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def run_id(command: str, config: CampaignConfig) -> str:
    """Deterministic run directory name for a command and configuration."""
    digest = hashlib.sha256(config.to_json().encode()).hexdigest()[:12]
    return f"{command}-{digest}"


def subset_label(model_ids: Sequence[int]) -> str:
    return "+".join(str(i) for i in model_ids)


def parse_subset_label(label: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in label.split("+"))
    except ValueError:
        raise ConfigError(f"cannot parse subset label {label!r}") from None


def write_stats_csv(path: Path, stats: ModelStats) -> None:
    """Pilot statistics table: one row per model, costs relative to the
    high-fidelity cost recorded in the header comment."""
    path = _prepare(path)
    c1 = stats.c1
    with path.open("w", newline="") as fh:
        fh.write(f"# c1_seconds={_fmt(c1)}\n")
        writer = csv.writer(fh)
        writer.writerow(["model", "h", "delta", "rho", "cost_ratio", "sigma"])
        for k, model_id in enumerate(stats.ids):
            h = "" if stats.h is None else _fmt(stats.h[k])
            delta = "" if stats.delta is None else _fmt(stats.delta[k])
            writer.writerow(
                [
                    model_id,
                    h,
                    delta,
                    _fmt(stats.rho[k]),
                    _fmt(stats.cost[k] / c1),
                    _fmt(stats.sigma[k]),
                ]
            )


def read_stats_csv(path: Path) -> ModelStats:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"statistics file {path} does not exist")
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# c1_seconds="):
        raise ConfigError(f"{path} is missing the '# c1_seconds=' header")
    c1 = float(lines[0].split("=", 1)[1])
    reader = csv.DictReader(lines[1:])
    ids, rho, ratio, sigma, h, delta = [], [], [], [], [], []
    for row in reader:
        ids.append(int(row["model"]))
        rho.append(float(row["rho"]))
        ratio.append(float(row["cost_ratio"]))
        sigma.append(float(row["sigma"]))
        h.append(float(row["h"]) if row["h"] else np.nan)
        delta.append(float(row["delta"]) if row["delta"] else np.nan)
    if not ids:
        raise ConfigError(f"{path} contains no model rows")
    h_arr = None if np.isnan(h).all() else np.asarray(h)
    d_arr = None if np.isnan(delta).all() else np.asarray(delta)
    return ModelStats(
        ids=tuple(ids),
        rho=np.asarray(rho),
        cost=np.asarray(ratio) * c1,
        sigma=np.asarray(sigma),
        h=h_arr,
        delta=d_arr,
    )


def write_subsets_csv(path: Path, candidates: Sequence[SubsetCandidate], c1: float) -> None:
    """Feasible subsets ranked by variance ratio, with minimum-budget ranks."""
    path = _prepare(path)
    by_budget = sorted(
        range(len(candidates)),
        key=lambda k: (candidates[k].b_min, candidates[k].v_ratio, candidates[k].model_ids),
    )
    budget_rank = {k: r + 1 for r, k in enumerate(by_budget)}
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "subset", "V", "Bmin_over_C1", "Bmin_rank"])
        for k, cand in enumerate(candidates):
            writer.writerow(
                [
                    k + 1,
                    subset_label(cand.model_ids),
                    _fmt(cand.v_ratio),
                    _fmt(cand.b_min / c1),
                    budget_rank[k],
                ]
            )


def read_subsets_csv(path: Path) -> list[dict]:
    path = Path(path)
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append(
            {
                "rank": int(row["rank"]),
                "model_ids": parse_subset_label(row["subset"]),
                "v_ratio": float(row["V"]),
                "b_min_over_c1": float(row["Bmin_over_C1"]),
                "b_min_rank": int(row["Bmin_rank"]),
            }
        )
    return out


def plan_to_dict(plan: AllocationPlan) -> dict:
    return {
        "subset": list(plan.model_ids),
        "alpha": [float(a) for a in plan.alpha],
        "ratios": [float(r) for r in plan.ratios],
        "samples": [int(s) for s in plan.samples],
        "budget_seconds": float(plan.budget),
        "predicted_cost_seconds": float(plan.predicted_cost),
        "below_minimum": bool(plan.below_minimum),
    }


def plan_from_dict(data: dict) -> AllocationPlan:
    known = {
        "subset",
        "alpha",
        "ratios",
        "samples",
        "budget_seconds",
        "predicted_cost_seconds",
        "below_minimum",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown plan keys: {sorted(unknown)}")
    try:
        return AllocationPlan(
            model_ids=tuple(int(i) for i in data["subset"]),
            alpha=np.asarray(data["alpha"], dtype=float),
            ratios=np.asarray(data["ratios"], dtype=float),
            samples=np.asarray(data["samples"], dtype=np.int64),
            budget=float(data["budget_seconds"]),
            predicted_cost=float(data["predicted_cost_seconds"]),
            below_minimum=bool(data["below_minimum"]),
        )
    except KeyError as exc:
        raise ConfigError(f"plan is missing key {exc}") from None


def _dump_json(path: Path, data: dict) -> None:
    path = _prepare(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _load_json(path: Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path} does not exist")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def write_plan_json(path: Path, plan: AllocationPlan) -> None:
    _dump_json(path, plan_to_dict(plan))


def read_plan_json(path: Path) -> AllocationPlan:
    return plan_from_dict(_load_json(path))


def write_estimate_json(path: Path, result: EstimationResult) -> None:
    _dump_json(
        path,
        {
            "value": float(result.value),
            "level_terms": [float(t) for t in result.level_terms],
            "realized_cost_seconds": None
            if result.realized_cost is None
            else float(result.realized_cost),
            "plan": plan_to_dict(result.plan),
        },
    )


def write_validation_json(path: Path, result: ValidationResult) -> None:
    _dump_json(
        path,
        {
            "value": float(result.value),
            "n_samples": int(result.n_samples),
            "cost_seconds": float(result.cost_seconds),
        },
    )


def read_validation_json(path: Path) -> ValidationResult:
    data = _load_json(path)
    unknown = set(data) - {"value", "n_samples", "cost_seconds"}
    if unknown:
        raise ConfigError(f"unknown validation keys: {sorted(unknown)}")
    try:
        return ValidationResult(
            value=float(data["value"]),
            n_samples=int(data["n_samples"]),
            cost_seconds=float(data["cost_seconds"]),
        )
    except KeyError as exc:
        raise ConfigError(f"validation file is missing key {exc}") from None


def write_pilot_json(path: Path, result: PilotResult) -> None:
    """Raw pilot evaluations backing the statistics table (for audit)."""
    _dump_json(
        path,
        {
            "models": list(result.stats.ids),
            "values": [[float(v) for v in row] for row in result.values],
            "seconds": [[float(s) for s in row] for row in result.seconds],
        },
    )


def write_study_csv(path: Path, study: StudyResult) -> None:
    """Error study table: one row per (case, budget)."""
    path = _prepare(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "case",
                "subset",
                "budget_seconds",
                "samples",
                "below_minimum",
                "empirical_mse",
                "theoretical_mse",
                "plan_mse",
                "mean_realized_cost_seconds",
            ]
        )
        for row in study.rows:
            writer.writerow(
                [
                    row.case,
                    subset_label(row.model_ids),
                    _fmt(row.budget),
                    subset_label(row.samples),
                    int(row.below_minimum),
                    _fmt(row.empirical_mse),
                    _fmt(row.theoretical_mse),
                    _fmt(row.plan_mse),
                    _fmt(row.mean_realized_cost),
                ]
            )


def write_study_json(path: Path, study: StudyResult) -> None:
    """Full study record including per-replicate estimates."""
    _dump_json(
        path,
        {
            "reference": float(study.reference),
            "rows": [
                {
                    "case": row.case,
                    "subset": list(row.model_ids),
                    "budget_seconds": float(row.budget),
                    "samples": list(row.samples),
                    "below_minimum": bool(row.below_minimum),
                    "estimates": [float(e) for e in row.estimates],
                    "empirical_mse": float(row.empirical_mse),
                    "theoretical_mse": float(row.theoretical_mse),
                    "plan_mse": float(row.plan_mse),
                    "mean_realized_cost_seconds": float(row.mean_realized_cost),
                }
                for row in study.rows
            ],
        },
    )


def write_field_csv(path: Path, padded: np.ndarray) -> None:
    """Field snapshot on the full padded node set, shortest round-trip floats."""
    path = _prepare(path)
    np.savetxt(path, np.asarray(padded, dtype=float), fmt="%.17g", delimiter=",")


def read_field_csv(path: Path) -> np.ndarray:
    return np.loadtxt(Path(path), delimiter=",", ndmin=2)
