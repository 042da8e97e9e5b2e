"""Feature-label Pearson correlation, ranking and low-correlation ablation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, FeatureMask


class UndefinedCorrelation(ValueError):
    """Raised when one of the inputs has zero variance."""


def pearson(x, y) -> float:
    """Pearson correlation using population (1/n) moments, clamped to [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("pearson needs two 1-D vectors of equal length")
    if len(x) < 2:
        raise ValueError("pearson needs at least two observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.mean(dx * dx))
    sy = np.sqrt(np.mean(dy * dy))
    if sx == 0 or sy == 0:
        raise UndefinedCorrelation("correlation is undefined for a constant vector")
    r = np.mean(dx * dy) / (sx * sy)
    return float(min(1.0, max(-1.0, r)))


@dataclass(frozen=True)
class CorrelationReport:
    feature_names: tuple[str, ...]
    r: tuple[float, ...]
    ranking: tuple[str, ...]
    constant: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.feature_names, self.r))

    def abs_rank(self) -> dict[str, int]:
        """1-based position in the ascending-|r| ranking."""
        return {name: i + 1 for i, name in enumerate(self.ranking)}


def rank_from_values(names, values) -> tuple[str, ...]:
    """Names ordered by |value| ascending; ties keep column order."""
    order = sorted(range(len(names)), key=lambda i: (abs(values[i]), i))
    return tuple(names[i] for i in order)


def rank_features(ds: Dataset) -> CorrelationReport:
    y = ds.y.astype(np.float64)
    rs, constant = [], []
    for j, name in enumerate(ds.feature_names):
        try:
            rs.append(pearson(ds.X[:, j], y))
        except UndefinedCorrelation:
            rs.append(0.0)
            constant.append(name)
    return CorrelationReport(
        tuple(ds.feature_names), tuple(rs), rank_from_values(ds.feature_names, rs), tuple(constant)
    )


def removal_masks(names, ranking, up_to_k: int) -> list[FeatureMask]:
    """Mask j clears the first j names of ``ranking`` (j = 1..up_to_k)."""
    n = len(names)
    if not 1 <= up_to_k < n:
        raise ValueError(f"up_to_k must be in [1, {n - 1}], got {up_to_k}")
    pos = {name: i for i, name in enumerate(names)}
    masks = []
    for j in range(1, up_to_k + 1):
        bits = [True] * n
        for name in ranking[:j]:
            bits[pos[name]] = False
        masks.append(FeatureMask(tuple(bits)))
    return masks


def ablation_masks(report: CorrelationReport, up_to_k: int) -> list[FeatureMask]:
    return removal_masks(report.feature_names, report.ranking, up_to_k)
