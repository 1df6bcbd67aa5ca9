"""Poisson-timed resets of both system spins on top of lattice dephasing.

A reset replaces the two-spin state by a fixed pure product state. With a
maximally mixed bath the joint state right after a reset is a product state,
so all phase accumulators restart from zero while the spins keep moving.

Two timing conventions are supported:

``"step"``
    exponential waiting times are rounded up to whole steps; the state at an
    event step is the reset state and several events in one step act once.
``"continuous"``
    events keep their exact times. Phases accumulate linearly inside a step
    (positions are constant there), so a reset at ``t_r`` inside the interval
    ending at step ``s`` leaves ``s - t_r`` of that interval's phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .ensemble import (
    DEFAULT_BATCHES,
    batch_mean_error,
    batch_seeds,
    batch_sizes,
    map_batches,
)
from .lattice import (
    LatticeConfig,
    accumulate_phases,
    decoherence_factor_product,
    initial_state,
    step_positions,
)
from .states import check_state, gate_phases, negativity, plus_plus

TIMINGS = ("step", "continuous")

#: spawn-key suffix that separates the reset stream from the position stream
_RESET_STREAM = 0x5E7


def _is_pure_product(rho, tol: float = 1e-10) -> bool:
    r = rho.reshape(2, 2, 2, 2)
    first = np.einsum("ajbj->ab", r)
    second = np.einsum("iaib->ab", r)
    pure = abs(np.trace(rho @ rho) - 1.0) < tol
    return pure and np.allclose(rho, np.kron(first, second), atol=tol)


@dataclass(frozen=True)
class ResetConfig:
    """Reset rate per step, reset state, and timing convention.

    ``horizon_steps`` overrides the number of simulated steps of the lattice
    configuration when given.
    """

    kappa_dt: float = 0.0
    reset_state: np.ndarray = field(default_factory=plus_plus, compare=False)
    horizon_steps: int | None = None
    timing: str = "continuous"

    def __post_init__(self):
        if self.kappa_dt < 0:
            raise ValueError(f"kappa_dt must be nonnegative, got {self.kappa_dt}")
        if self.timing not in TIMINGS:
            raise ValueError(f"timing must be one of {TIMINGS}, got {self.timing!r}")
        rho = check_state(self.reset_state)
        if not _is_pure_product(rho):
            raise ValueError("reset state must be a pure product state")
        object.__setattr__(self, "reset_state", rho)

    def steps(self, lattice_config: LatticeConfig) -> int:
        return lattice_config.n_steps if self.horizon_steps is None else self.horizon_steps


def _streams(seed):
    """Independent generators for positions and reset events."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    reset_ss = np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (_RESET_STREAM,))
    return np.random.default_rng(ss), np.random.default_rng(reset_ss)


def _event_times(kappa_dt: float, horizon: float, n_traj: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted event times ``(n_traj, K)`` padded with ``inf`` beyond ``horizon``."""
    if kappa_dt == 0.0 or horizon <= 0:
        return np.full((n_traj, 0), np.inf)
    mean = kappa_dt * horizon
    k = int(np.ceil(mean + 6.0 * np.sqrt(mean) + 10))
    times = np.cumsum(rng.standard_exponential((n_traj, k)), axis=1) / kappa_dt
    while np.any(times[:, -1] <= horizon):
        more = times[:, -1:] + np.cumsum(rng.standard_exponential((n_traj, k)), axis=1) / kappa_dt
        times = np.concatenate([times, more], axis=1)
    times[times > horizon] = np.inf
    keep = np.isfinite(times).any(axis=0)
    return times[:, keep]


def sample_reset_times(kappa_dt: float, horizon_steps: int, rng, *, timing: str = "step") -> list:
    """Reset event times of one trajectory within ``(0, horizon_steps]``.

    With ``timing="step"`` the times are rounded up to whole steps; repeated
    steps are kept so that the list has one entry per Poisson event.
    """
    if kappa_dt < 0:
        raise ValueError("kappa_dt must be nonnegative")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    times = _event_times(kappa_dt, float(horizon_steps), 1, rng)[0]
    times = times[np.isfinite(times)]
    if timing == "step":
        return [int(t) for t in np.ceil(times)]
    return [float(t) for t in times]


def _last_event_per_step(times: np.ndarray, n_steps: int) -> np.ndarray:
    """Time of the last event inside each interval ``(s-1, s]``; ``nan`` if none."""
    n_traj = times.shape[0]
    last = np.full((n_traj, n_steps + 1), np.nan)
    if times.shape[1] == 0:
        return last
    finite = np.isfinite(times)
    steps = np.where(finite, np.ceil(np.where(finite, times, 0.0)), -1).astype(np.int64)
    nxt = np.concatenate([steps[:, 1:], np.full((n_traj, 1), -1)], axis=1)
    is_last = finite & (steps != nxt)
    rows, cols = np.nonzero(is_last)
    last[rows, steps[rows, cols]] = times[rows, cols]
    return last


def _reset_bundle(lattice_config: LatticeConfig, reset_config: ResetConfig, n_traj: int, seed):
    """Yield per-step ``(C * gate, reset_flag)`` for a bundle of trajectories."""
    n_steps = reset_config.steps(lattice_config)
    pos_rng, reset_rng = _streams(seed)
    times = _event_times(reset_config.kappa_dt, float(n_steps), n_traj, reset_rng)
    last = _last_event_per_step(times, n_steps)
    config = replace(lattice_config, n_steps=n_steps)
    state = initial_state(config, pos_rng, n_traj)
    age = np.zeros(n_traj)
    was_reset = np.zeros(n_traj, dtype=bool)
    g = config.g_aa_dt
    yield decoherence_factor_product(state) * gate_phases(g * age), was_reset.copy()
    continuous = reset_config.timing == "continuous"
    for s in range(1, n_steps + 1):
        hit = ~np.isnan(last[:, s])
        if continuous:
            frac = np.where(hit, s - np.nan_to_num(last[:, s]), 1.0)
            state.clear(hit)
            accumulate_phases(state, config, weight=frac)
            age = np.where(hit, frac, age + 1.0)
        else:
            accumulate_phases(state, config)
            state.clear(hit)
            age = np.where(hit, 0.0, age + 1.0)
        was_reset |= hit
        step_positions(state, config, pos_rng)
        yield decoherence_factor_product(state) * gate_phases(g * age), was_reset.copy()


def _reset_sums(lattice_config, reset_config, n_traj, seed):
    """Per-step sums of ``C * gate`` split by whether a reset has happened."""
    n_steps = reset_config.steps(lattice_config)
    out = np.zeros((2, n_steps + 1, 4, 4), dtype=complex)
    for s, (cg, flag) in enumerate(_reset_bundle(lattice_config, reset_config, n_traj, seed)):
        out[0, s] = cg[~flag].sum(axis=0)
        out[1, s] = cg[flag].sum(axis=0)
    return out


def _states_from_sums(sums: np.ndarray, n: float, initial, reset_state) -> np.ndarray:
    return (initial * sums[..., 0, :, :, :] + reset_state * sums[..., 1, :, :, :]) / n


def run_reset_trajectory(
    lattice_config: LatticeConfig, reset_config: ResetConfig, seed=None, *, initial=None
) -> np.ndarray:
    """Two-spin states ``(n_steps + 1, 4, 4)`` of one trajectory with resets.

    The initial state defaults to the reset state. Positions are drawn from the
    same stream as :func:`spinbath.lattice.run_trajectory` with the same seed.
    """
    seed = lattice_config.master_seed if seed is None else seed
    initial = reset_config.reset_state if initial is None else check_state(initial)
    sums = _reset_sums(lattice_config, reset_config, 1, seed)
    return _states_from_sums(sums, 1.0, initial, reset_config.reset_state)


@dataclass
class ResetEnsembleResult:
    lattice_config: LatticeConfig
    reset_config: ResetConfig
    n_traj: int
    negativity: np.ndarray
    stderr: np.ndarray
    batch_negativity: np.ndarray
    mean_state: np.ndarray

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.negativity.shape[0])


def reset_ensemble(
    lattice_config: LatticeConfig,
    reset_config: ResetConfig,
    n_traj: int,
    *,
    initial=None,
    n_batches: int = DEFAULT_BATCHES,
    workers: int | None = None,
) -> ResetEnsembleResult:
    """Negativity of the trajectory-averaged state at every step."""
    initial = reset_config.reset_state if initial is None else check_state(initial)
    sizes = batch_sizes(n_traj, n_batches)
    seeds = batch_seeds(lattice_config.master_seed, len(sizes))
    sums = np.stack(
        map_batches(_reset_sums, [(lattice_config, reset_config, n, s) for n, s in zip(sizes, seeds)], workers)
    )
    sizes_arr = np.array(sizes, dtype=float)[:, None, None, None]
    batch_states = _states_from_sums(sums, sizes_arr, initial, reset_config.reset_state)
    mean_state = _states_from_sums(sums.sum(axis=0), float(n_traj), initial, reset_config.reset_state)
    batch_neg = negativity(batch_states, validate=False)
    return ResetEnsembleResult(
        lattice_config=lattice_config,
        reset_config=reset_config,
        n_traj=n_traj,
        negativity=negativity(mean_state, validate=False),
        stderr=batch_mean_error(batch_neg),
        batch_negativity=batch_neg,
        mean_state=mean_state,
    )


@dataclass
class SweepResult:
    """Steady-state negativity on a ``(len(g_aa_grid), len(kappa_grid))`` grid."""

    kappa_grid: np.ndarray
    g_aa_grid: np.ndarray
    eval_step: int
    negativity: np.ndarray
    stderr: np.ndarray

    def best_kappa(self) -> np.ndarray:
        """Grid value of ``kappa`` maximizing the negativity, per ``g_aa``."""
        return self.kappa_grid[np.argmax(self.negativity, axis=1)]

    def records(self) -> list[dict]:
        return [
            {
                "kappa_dt": float(k),
                "g_aa_dt": float(g),
                "negativity": float(self.negativity[i, j]),
                "stderr": float(self.stderr[i, j]),
            }
            for i, g in enumerate(self.g_aa_grid)
            for j, k in enumerate(self.kappa_grid)
        ]


def steady_state_sweep(
    lattice_config: LatticeConfig,
    kappa_grid,
    g_aa_grid,
    n_traj: int,
    eval_step: int = 15,
    *,
    reset_state=None,
    timing: str = "continuous",
    n_batches: int = DEFAULT_BATCHES,
    workers: int | None = None,
) -> SweepResult:
    """Ensemble negativity at ``eval_step`` for every (g_aa, kappa) grid point.

    All grid points share the master seed, so they see the same position
    histories and the same unit-rate exponential draws (common random numbers).
    """
    kappa_grid = np.asarray(kappa_grid, dtype=float)
    g_aa_grid = np.asarray(g_aa_grid, dtype=float)
    neg = np.empty((g_aa_grid.size, kappa_grid.size))
    err = np.empty_like(neg)
    reset_state = plus_plus() if reset_state is None else reset_state
    base = replace(lattice_config, n_steps=eval_step)
    for i, g in enumerate(g_aa_grid):
        for j, k in enumerate(kappa_grid):
            res = reset_ensemble(
                replace(base, g_aa_dt=float(g)),
                ResetConfig(kappa_dt=float(k), reset_state=reset_state, timing=timing),
                n_traj,
                n_batches=n_batches,
                workers=workers,
            )
            neg[i, j] = res.negativity[eval_step]
            err[i, j] = res.stderr[eval_step]
    return SweepResult(kappa_grid, g_aa_grid, eval_step, neg, err)
