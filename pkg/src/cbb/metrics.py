"""Area-change scoring: per-trial ratios, threshold sweeps, fitting, and
training-dynamics aggregation.

The central quantity is the segment-normalized relative area change of an
observed mask pair: (a_out - a_init) / a_seg_gt, where a_seg_gt is the
ground-truth pixel delta of the trial. A perfect observer scores exactly 1.
Thresholds are expressed in percent throughout the API; a trial counts as
detected iff its ratio strictly exceeds tau/100.

No-change trials have a_seg_gt = 0 and never go through the ratio formula;
they carry the relative raw delta |a_out - a_init| / a_init instead and are
reported as false alarms, separately from the three change conditions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    MissingCondition,
    MissingExternalMask,
)
from .raster import read_mask

CHANGE_CONDITIONS = ("CONCAVE", "NOFILL", "CONVEX")
ALL_CONDITIONS = CHANGE_CONDITIONS + ("NOCHANGE",)

# five sub-percent steps, then every whole percent up to 20
DEFAULT_TAU_GRID: tuple[float, ...] = tuple(
    [0.1, 0.2, 0.3, 0.4, 0.5] + [float(t) for t in range(1, 21)]
)


def rac(a_init: int, a_out: int, a_seg_gt: int) -> float:
    """Relative area change normalized by the ground-truth pixel delta."""
    if a_seg_gt <= 0:
        raise DomainError(
            f"a_seg_gt must be positive, got {a_seg_gt}; "
            "no-change trials are scored by relative delta instead"
        )
    return (a_out - a_init) / a_seg_gt


def detect(rac_value: float, tau: float) -> bool:
    """Detected iff the ratio strictly exceeds tau percent."""
    if tau <= 0:
        raise ValueError(f"tau must be positive percent, got {tau}")
    return bool(rac_value > tau / 100.0)


def binarize(pm: np.ndarray) -> np.ndarray:
    """Probability map to mask: foreground iff p > 0.5 (ties to background,
    matching a two-class argmax with background first)."""
    arr = np.asarray(pm, dtype=float)
    if np.isnan(arr).any() or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("probability map values must be in [0, 1]")
    return arr > 0.5


def mask_area(mask: np.ndarray) -> int:
    return int(np.count_nonzero(np.asarray(mask, dtype=bool)))


@dataclass(frozen=True)
class RacRecord:
    """One scored trial. Change trials carry ``rac``; no-change trials carry
    ``rel_delta`` (relative raw area delta) instead."""

    trial_id: str
    condition: str
    a_init: int
    a_out: int
    rac: float | None
    rel_delta: float | None

    def __post_init__(self) -> None:
        if self.condition not in ALL_CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")
        if self.condition == "NOCHANGE":
            if self.rac is not None or self.rel_delta is None:
                raise ValueError("NOCHANGE records carry rel_delta, not rac")
        elif self.rac is None or self.rel_delta is not None:
            raise ValueError("change records carry rac, not rel_delta")


@dataclass(frozen=True)
class DetectionCurve:
    """Detection (or false-alarm, for NOCHANGE) rate per condition at every
    threshold of the percent grid."""

    tau_grid: tuple[float, ...]
    rates: dict[str, tuple[float, ...]]

    def __post_init__(self) -> None:
        if not self.tau_grid or any(
            a >= b for a, b in zip(self.tau_grid, self.tau_grid[1:])
        ):
            raise ValueError("tau_grid must be strictly increasing")
        if self.tau_grid[0] <= 0:
            raise ValueError("thresholds must be positive percent")
        for cond, seq in self.rates.items():
            if cond not in ALL_CONDITIONS:
                raise ValueError(f"unknown condition {cond!r}")
            if len(seq) != len(self.tau_grid):
                raise ValueError(f"{cond}: rate count != grid size")
            if any(not 0.0 <= r <= 1.0 for r in seq):
                raise ValueError(f"{cond}: rates must lie in [0, 1]")


def sweep(
    records: Iterable[RacRecord], tau_grid: Sequence[float] = DEFAULT_TAU_GRID
) -> DetectionCurve:
    """Detection rate per condition at every grid threshold. NOCHANGE rows
    give the false-alarm rate (relative delta strictly above tau)."""
    grid = tuple(float(t) for t in tau_grid)
    by_cond: dict[str, list[RacRecord]] = {}
    for rec in records:
        by_cond.setdefault(rec.condition, []).append(rec)
    rates = {}
    for cond, recs in by_cond.items():
        values = [
            r.rel_delta if cond == "NOCHANGE" else r.rac for r in recs
        ]
        rates[cond] = tuple(
            float(np.mean([v > tau / 100.0 for v in values])) for tau in grid
        )
    return DetectionCurve(tau_grid=grid, rates=rates)


@dataclass(frozen=True)
class HumanData:
    """Reference accuracy per change condition, from the published study."""

    concave: float
    nofill: float
    convex: float

    def __post_init__(self) -> None:
        for name in ("concave", "nofill", "convex"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} accuracy must be in [0, 1], got {v}")


def fit_tau(curve: DetectionCurve, human: HumanData) -> tuple[float, float]:
    """Grid threshold minimizing the RMSE between model detection rates and
    the reference accuracies over the three change conditions. Ties break
    toward the smaller threshold."""
    for cond in CHANGE_CONDITIONS:
        if cond not in curve.rates:
            raise MissingCondition(f"curve lacks condition {cond}")
    best_tau = best_rmse = None
    for j, tau in enumerate(curve.tau_grid):
        err = float(
            np.sqrt(
                np.mean(
                    [
                        (curve.rates[c][j] - getattr(human, c.lower())) ** 2
                        for c in CHANGE_CONDITIONS
                    ]
                )
            )
        )
        if best_rmse is None or err < best_rmse:
            best_tau, best_rmse = tau, err
    return best_tau, best_rmse


def load_human_csv(path: str | Path) -> HumanData:
    """Parse a `condition,accuracy` CSV naming all three change conditions."""
    seen: dict[str, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or {
            "condition",
            "accuracy",
        } - set(reader.fieldnames):
            raise ValueError(f"{path}: need header columns condition,accuracy")
        for row in reader:
            cond = row["condition"].strip().upper()
            if cond not in CHANGE_CONDITIONS:
                raise ValueError(f"{path}: unknown condition {row['condition']!r}")
            seen[cond] = float(row["accuracy"])
    missing = [c for c in CHANGE_CONDITIONS if c not in seen]
    if missing:
        raise MissingCondition(f"{path}: missing rows for {', '.join(missing)}")
    return HumanData(
        concave=seen["CONCAVE"], nofill=seen["NOFILL"], convex=seen["CONVEX"]
    )


@dataclass(frozen=True)
class EvalReport:
    battery_id: str
    observer_spec: str
    records: tuple[RacRecord, ...]
    curve: DetectionCurve
    mean_rac: dict[str, float]
    median_rac: dict[str, float]
    tau_star: float | None = None
    rmse_at_tau_star: float | None = None

    def __post_init__(self) -> None:
        if self.tau_star is not None and self.tau_star not in self.curve.tau_grid:
            raise ValueError("fitted threshold must come from the grid")

    def with_fit(self, human: HumanData) -> "EvalReport":
        tau_star, rmse = fit_tau(self.curve, human)
        return replace(self, tau_star=tau_star, rmse_at_tau_star=rmse)

    def to_dict(self) -> dict:
        return {
            "battery_id": self.battery_id,
            "observer_spec": self.observer_spec,
            "tau_grid_percent": list(self.curve.tau_grid),
            "rates": {c: list(v) for c, v in sorted(self.curve.rates.items())},
            "mean_rac": dict(sorted(self.mean_rac.items())),
            "median_rac": dict(sorted(self.median_rac.items())),
            "tau_star_percent": self.tau_star,
            "rmse_at_tau_star": self.rmse_at_tau_star,
            "records": [
                {
                    "trial_id": r.trial_id,
                    "condition": r.condition,
                    "a_init": r.a_init,
                    "a_out": r.a_out,
                    "rac": r.rac,
                    "rel_delta": r.rel_delta,
                }
                for r in self.records
            ],
        }


def score_trial(trial, observer) -> RacRecord:
    """Observe both frames of one trial and build its record."""
    m_init = read_mask(trial.init_path)
    m_out = read_mask(trial.out_path)
    o_init = observer.observe(m_init, trial_id=trial.trial_id, role="init")
    o_out = observer.observe(m_out, trial_id=trial.trial_id, role="out")
    a_i, a_o = mask_area(o_init), mask_area(o_out)
    if trial.condition == "NOCHANGE":
        denom = a_i if a_i > 0 else 1
        return RacRecord(
            trial_id=trial.trial_id,
            condition=trial.condition,
            a_init=a_i,
            a_out=a_o,
            rac=None,
            rel_delta=abs(a_o - a_i) / denom,
        )
    return RacRecord(
        trial_id=trial.trial_id,
        condition=trial.condition,
        a_init=a_i,
        a_out=a_o,
        rac=rac(a_i, a_o, trial.a_seg_gt),
        rel_delta=None,
    )


def summarize(
    battery_id: str,
    observer_spec: str,
    records: Sequence[RacRecord],
    tau_grid: Sequence[float] = DEFAULT_TAU_GRID,
) -> EvalReport:
    """Assemble a report from already-scored records."""
    curve = sweep(records, tau_grid)
    mean_rac = {}
    median_rac = {}
    for cond in CHANGE_CONDITIONS:
        values = [r.rac for r in records if r.condition == cond]
        if values:
            mean_rac[cond] = float(np.mean(values))
            median_rac[cond] = float(np.median(values))
    return EvalReport(
        battery_id=battery_id,
        observer_spec=observer_spec,
        records=tuple(records),
        curve=curve,
        mean_rac=mean_rac,
        median_rac=median_rac,
    )


def evaluate_battery(
    battery, observer, tau_grid: Sequence[float] = DEFAULT_TAU_GRID
) -> EvalReport:
    """Score every trial of a battery under one observer."""
    records = [score_trial(t, observer) for t in battery.trials]
    return summarize(battery.battery_id, observer.spec, records, tau_grid)


@dataclass(frozen=True)
class DynamicsRow:
    label: str
    mean_rac: dict[str, float]


def dynamics(
    epoch_dirs: Sequence[str | Path], battery
) -> tuple[DynamicsRow, ...]:
    """Mean ratio per change condition for each external mask directory, in
    the order given. Each directory must satisfy the external-mask contract
    (`<trial_id>_init.png` / `<trial_id>_out.png`, frame-sized)."""
    rows = []
    size = battery.size
    for d in epoch_dirs:
        d = Path(d)
        sums: dict[str, list[float]] = {}
        for trial in battery.trials:
            if trial.condition == "NOCHANGE":
                continue
            areas = {}
            for role in ("init", "out"):
                path = d / f"{trial.trial_id}_{role}.png"
                if not path.is_file():
                    raise MissingExternalMask(
                        f"epoch {d.name}: trial {trial.trial_id}: "
                        f"missing {path.name}"
                    )
                mask = read_mask(path)
                if mask.shape != (size, size):
                    raise DimensionMismatch(
                        f"epoch {d.name}: {path.name} is {mask.shape}, "
                        f"battery frame is {(size, size)}"
                    )
                areas[role] = mask_area(mask)
            value = rac(areas["init"], areas["out"], trial.a_seg_gt)
            sums.setdefault(trial.condition, []).append(value)
        rows.append(
            DynamicsRow(
                label=d.name,
                mean_rac={c: float(np.mean(v)) for c, v in sorted(sums.items())},
            )
        )
    return tuple(rows)
