"""Prediction records and their CSV dialect.

One row per evaluated sample: ``id,prediction,target,uncertainty,is_ood``.
Floats are serialized with repr (shortest round-trip form, ``.`` decimal
separator), targets may be empty for OOD-only records, booleans are 0/1.
Writing is deterministic: identical records produce identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_HEADER = "id,prediction,target,uncertainty,is_ood"


@dataclass
class PredictionRecord:
    id: str
    prediction: float
    target: float | None
    uncertainty: float
    is_ood: bool = False

    def __post_init__(self):
        self.uncertainty = float(self.uncertainty)
        if not self.uncertainty >= 0.0:
            raise ValueError(f"uncertainty must be >= 0, got {self.uncertainty}")
        self.prediction = float(self.prediction)
        if self.target is not None:
            self.target = float(self.target)


def from_arrays(predictions, uncertainties, targets=None, is_ood: bool = False,
                id_prefix: str = "s") -> list[PredictionRecord]:
    records = []
    for i, (p, u) in enumerate(zip(predictions, uncertainties)):
        t = None if targets is None else float(targets[i])
        records.append(PredictionRecord(f"{id_prefix}{i}", float(p), t,
                                        float(u), is_ood))
    return records


def write_records(records, path) -> None:
    lines = [CSV_HEADER]
    for r in records:
        target = "" if r.target is None else repr(r.target)
        lines.append(
            f"{r.id},{r.prediction!r},{target},{r.uncertainty!r},{int(r.is_ood)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_records(path) -> list[PredictionRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: expected header {CSV_HEADER!r}")
    records = []
    for line in lines[1:]:
        rid, pred, target, unc, ood = line.split(",")
        records.append(PredictionRecord(
            rid, float(pred), float(target) if target else None,
            float(unc), bool(int(ood)),
        ))
    return records


def targets_of(records) -> np.ndarray:
    missing = [r.id for r in records if r.target is None]
    if missing:
        raise ValueError(f"records without targets: {missing[:5]}")
    return np.array([r.target for r in records])


def predictions_of(records) -> np.ndarray:
    return np.array([r.prediction for r in records])


def uncertainties_of(records) -> np.ndarray:
    return np.array([r.uncertainty for r in records])
