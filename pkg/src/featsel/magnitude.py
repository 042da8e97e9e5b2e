"""Input importance from trained network weights.

Each layer's absolute weights are normalised per target neuron into a
column-stochastic contribution matrix; chaining those matrices from the input
layer to the output layer gives the share ``Q[i, k]`` of input ``i`` in output
``k``. An input's score is its row sum over outputs.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import mlp
from .correlation import rank_from_values, removal_masks
from .dataset import Dataset, FeatureMask

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ContributionMatrix:
    P: np.ndarray
    degenerate_columns: tuple[int, ...] = ()


def contribution(W) -> ContributionMatrix:
    """``P[i, r] = |W[i, r]| / sum_p |W[p, r]|``; all-zero columns become uniform."""
    A = np.abs(np.asarray(W, dtype=np.float64))
    sums = A.sum(axis=0)
    dead = sums == 0
    P = np.divide(A, sums, out=np.zeros_like(A), where=~dead)
    P[:, dead] = 1.0 / A.shape[0]
    return ContributionMatrix(P, tuple(int(c) for c in np.flatnonzero(dead)))


def input_output_shares(p: mlp.MlpParams) -> np.ndarray:
    """``Q`` (n_inputs x n_outputs): product of the per-layer contribution matrices."""
    Q = contribution(p.weights[0]).P
    for W in p.weights[1:]:
        Q = Q @ contribution(W).P
    return Q


def input_magnitudes(p: mlp.MlpParams) -> np.ndarray:
    Q = input_output_shares(p)
    if not np.allclose(Q.sum(axis=0), 1.0, rtol=0, atol=1e-9):
        raise AssertionError("contribution chain lost column-stochasticity")
    return Q.sum(axis=1)


@dataclass(frozen=True, eq=False)
class MagnitudeReport:
    feature_names: tuple[str, ...]
    per_run_scores: np.ndarray
    run_seeds: tuple[int, ...]
    skipped_seeds: tuple[int, ...] = ()

    @property
    def n_runs(self) -> int:
        return self.per_run_scores.shape[0]

    @property
    def mean_scores(self) -> np.ndarray:
        return self.per_run_scores.mean(axis=0)

    @property
    def std_scores(self) -> np.ndarray:
        return self.per_run_scores.std(axis=0)

    @property
    def ranking(self) -> tuple[str, ...]:
        return rank_from_values(self.feature_names, list(self.mean_scores))

    def rank_of(self) -> dict[str, int]:
        return {name: i + 1 for i, name in enumerate(self.ranking)}


def _seed_stream(seed: int, n: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s) for s in ss.generate_state(n, dtype=np.uint32)]


def averaged_ranking(
    ds: Dataset,
    arch: mlp.MlpArchitecture | None = None,
    cfg: mlp.TrainConfig = mlp.TrainConfig(),
    n_runs: int = 20,
    seed: int = 0,
    threads: int = 1,
) -> MagnitudeReport:
    """Train ``n_runs`` networks with seeds drawn from ``seed`` and average input scores."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    seeds = _seed_stream(seed, n_runs)

    def one(run_seed):
        try:
            params, _ = mlp.train(ds, None, arch, replace(cfg, seed=run_seed))
        except mlp.TrainingDiverged as exc:
            log.warning("magnitude run with seed %d skipped: %s", run_seed, exc)
            return None
        return input_magnitudes(params)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    kept = [(s, r) for s, r in zip(seeds, results) if r is not None]
    if not kept:
        raise RuntimeError("every magnitude run diverged")
    return MagnitudeReport(
        tuple(ds.feature_names),
        np.array([r for _, r in kept]),
        tuple(s for s, _ in kept),
        tuple(s for s, r in zip(seeds, results) if r is None),
    )


def ablation_masks(report: MagnitudeReport, up_to_k: int) -> list[FeatureMask]:
    return removal_masks(report.feature_names, report.ranking, up_to_k)
