"""Seeded, batch-parallel ensemble averaging.

An ensemble of ``n_traj`` trajectories is split into ``n_batches`` fixed work
units. Batch ``i`` draws all its randomness from the ``i``-th child of
``SeedSequence(master_seed)``, so the split into batches, not the number of
workers, determines the random streams: results are bit-identical for any
worker count. Batches are reduced in index order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeConfig, coherence_sum, first_peak
from .states import apply_dephasing, check_state, negativity, plus_plus

DEFAULT_BATCHES = 20

#: environment variable holding the default worker count
WORKERS_ENV = "SPINBATH_WORKERS"


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(value)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None
    return max(1, workers)


def batch_sizes(n_items: int, n_batches: int = DEFAULT_BATCHES) -> list[int]:
    """Split ``n_items`` into at most ``n_batches`` nearly equal positive sizes."""
    if n_items < 1:
        raise ValueError("need at least one item")
    n_batches = max(1, min(n_batches, n_items))
    base, extra = divmod(n_items, n_batches)
    return [base + (i < extra) for i in range(n_batches)]


def batch_seeds(master_seed: int, n_batches: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(master_seed).spawn(n_batches)


def map_batches(func, args: list[tuple], workers: int | None = None) -> list:
    """Evaluate ``func(*a)`` for each argument tuple, in order."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(args) <= 1:
        return [func(*a) for a in args]
    with ProcessPoolExecutor(max_workers=min(workers, len(args))) as pool:
        futures = [pool.submit(func, *a) for a in args]
        return [f.result() for f in futures]


def batch_mean_error(batch_values: np.ndarray) -> np.ndarray:
    """Standard error from batch means (``nan`` with a single batch)."""
    batch_values = np.asarray(batch_values)
    n = batch_values.shape[0]
    if n < 2:
        return np.full(batch_values.shape[1:], np.nan)
    return batch_values.std(axis=0, ddof=1) / np.sqrt(n)


@dataclass
class EnsembleResult:
    """Negativity of the ensemble-averaged two-spin state at each step."""

    config: LatticeConfig
    n_traj: int
    steps: np.ndarray
    negativity: np.ndarray
    stderr: np.ndarray
    batch_negativity: np.ndarray
    mean_coherence: np.ndarray

    @property
    def gate_time(self) -> np.ndarray:
        """``g_AA t / pi`` at each step."""
        return self.config.g_aa_dt * self.steps / np.pi

    def first_peak(self) -> tuple[int, float]:
        return first_peak(self.negativity, self.config.g_aa_dt)

    def paired_stderr(self, other: "EnsembleResult") -> np.ndarray:
        """Batch-means error of ``self.negativity - other.negativity``.

        Meaningful when both ensembles were driven by the same seeds, so that
        batch ``i`` of each saw the same random trajectories.
        """
        return batch_mean_error(self.batch_negativity - other.batch_negativity)

    def records(self) -> list[dict]:
        return [
            {
                "step": int(s),
                "gate_time": float(g),
                "negativity": float(n),
                "stderr": float(e),
            }
            for s, g, n, e in zip(self.steps, self.gate_time, self.negativity, self.stderr)
        ]


def averaged_negativity(initial, coherence: np.ndarray, g_aa_dt: float) -> np.ndarray:
    """Negativity of ``apply_dephasing(initial, C_t, g_aa t)`` for each step ``t``."""
    steps = np.arange(coherence.shape[-3])
    rho = apply_dephasing(initial, coherence, g_aa_dt * steps, validate=False)
    return negativity(rho, validate=False)


def ensemble_negativity(
    config: LatticeConfig,
    n_traj: int,
    initial=None,
    *,
    n_batches: int = DEFAULT_BATCHES,
    workers: int | None = None,
) -> EnsembleResult:
    """Average the two-spin state over trajectories, then take its negativity.

    The standard error is estimated from the spread of the per-batch
    negativities.
    """
    initial = plus_plus() if initial is None else check_state(initial)
    sizes = batch_sizes(n_traj, n_batches)
    seeds = batch_seeds(config.master_seed, len(sizes))
    sums = map_batches(coherence_sum, [(config, n, s) for n, s in zip(sizes, seeds)], workers)
    sums = np.stack(sums)
    sizes_arr = np.array(sizes, dtype=float)
    batch_means = sums / sizes_arr[:, None, None, None]
    mean = sums.sum(axis=0) / n_traj
    batch_neg = averaged_negativity(initial, batch_means, config.g_aa_dt)
    return EnsembleResult(
        config=config,
        n_traj=n_traj,
        steps=np.arange(config.n_steps + 1),
        negativity=averaged_negativity(initial, mean, config.g_aa_dt),
        stderr=batch_mean_error(batch_neg),
        batch_negativity=batch_neg,
        mean_coherence=mean,
    )
