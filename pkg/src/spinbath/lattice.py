"""Dynamic spin lattice on a torus with Ising phase interactions.

Two system spins and ``n_env`` environment spins live on a periodic
``width x height`` square lattice. Spins on the same site or on any of the
eight surrounding sites are neighbours. Time advances in unit steps; all
couplings are given as phases per step (rate times ``dt``). At every step the
neighbour relations of the current positions are added to the phase
accumulators (a left-endpoint sum), then the spins move:

* environment spins hop to one of the 8 surrounding sites every
  ``round(1/eta_b)`` steps,
* in ``"relocate"`` mode the system pair jumps to a random site and a random
  adjacent partner site at every step; in ``"static"`` mode it stays put.

The state of a bundle of independent trajectories is kept in arrays with a
leading trajectory axis so that ensembles are vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .bath import DiagonalDistribution, check_capacity, configurations
from .states import BASIS_BITS, DOUBLE_EXCITATION

#: the eight surrounding sites, as (dx, dy)
MOORE_OFFSETS = np.array(
    [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)], dtype=np.int64
)

MODES = ("static", "relocate")

#: upper-triangle basis pairs (a, a') in evaluation order
PAIRS = tuple((i, j) for i in range(4) for j in range(i + 1, 4))
_PAIR_I = np.array([p[0] for p in PAIRS])
_PAIR_J = np.array([p[1] for p in PAIRS])
#: a' - a for each pair, shape (6, 2)
PAIR_DIFF = BASIS_BITS[_PAIR_J] - BASIS_BITS[_PAIR_I]
#: a1'a2' - a1a2 for each pair, shape (6,)
PAIR_DOUBLE_DIFF = DOUBLE_EXCITATION[_PAIR_J] - DOUBLE_EXCITATION[_PAIR_I]


@dataclass(frozen=True)
class TorusLattice:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"lattice dimensions must be positive, got {self.width}x{self.height}")

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> np.ndarray:
        return np.array([self.width, self.height], dtype=np.int64)

    def contains(self, site) -> bool:
        x, y = site
        return 0 <= x < self.width and 0 <= y < self.height

    def site_of(self, index: int) -> tuple[int, int]:
        """Site of a row-major site index (columns vary fastest)."""
        return (index % self.width, index // self.width)

    def site_index(self, sites) -> np.ndarray:
        sites = np.asarray(sites)
        return sites[..., 0] + self.width * sites[..., 1]

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """``(n_sites, n_sites)`` boolean table of the neighbour relation."""
        xy = np.stack([np.arange(self.n_sites) % self.width, np.arange(self.n_sites) // self.width], -1)
        d = (xy[:, None, :] - xy[None, :, :]) % self.shape
        near = (d <= 1) | (d >= self.shape - 1)
        table = near[..., 0] & near[..., 1]
        table.setflags(write=False)
        return table


def neighbor_sites(lattice: TorusLattice, site) -> frozenset:
    """The site itself and its Moore neighbourhood, wrapped on the torus."""
    if not lattice.contains(site):
        raise ValueError(f"site {site} outside {lattice.width}x{lattice.height} lattice")
    x, y = site
    return frozenset(
        ((x + dx) % lattice.width, (y + dy) % lattice.height)
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
    )


def adjacency(lattice: TorusLattice, p, q) -> np.ndarray:
    """Neighbour indicator between position sets.

    ``p`` has shape ``(..., P, 2)`` and ``q`` shape ``(..., Q, 2)``; the result
    is a boolean ``(..., P, Q)`` array, true where the two sites are equal or
    adjacent on the torus.
    """
    ip = lattice.site_index(p)
    iq = lattice.site_index(q)
    return lattice.neighbor_table[ip[..., :, None], iq[..., None, :]]


@dataclass(frozen=True)
class LatticeConfig:
    """Parameters of the lattice dephasing model.

    Couplings are phases per time step. ``system_sites`` is only used in
    ``"static"`` mode; sites are ``(column, row)`` with zero-based indices.
    """

    width: int = 10
    height: int = 10
    n_env: int = 100
    g_aa_dt: float = 0.05
    g_ab_dt: float = 0.025
    h_dt: float = 0.0
    eta_b: float = 0.2
    mode: str = "static"
    system_sites: tuple = ((2, 1), (3, 1))
    n_steps: int = 200
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "system_sites", tuple(tuple(int(c) for c in s) for s in self.system_sites))
        lattice = self.lattice
        if self.n_env < 1:
            raise ValueError("n_env must be at least 1")
        if not 0.0 < self.eta_b <= 1.0:
            raise ValueError(f"eta_b must lie in (0, 1], got {self.eta_b}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if len(self.system_sites) != 2:
            raise ValueError("exactly two system sites are required")
        for s in self.system_sites:
            if not lattice.contains(s):
                raise ValueError(f"system site {s} outside the lattice")
        if self.n_steps < 0:
            raise ValueError("n_steps must be nonnegative")

    @property
    def lattice(self) -> TorusLattice:
        return TorusLattice(self.width, self.height)

    @property
    def hop_period(self) -> int:
        return max(1, int(round(1.0 / self.eta_b)))

    def with_params(self, **changes) -> "LatticeConfig":
        return replace(self, **changes)


@dataclass
class LatticeTrajectoryState:
    """Positions and phase accumulators of a bundle of trajectories.

    ``gamma[t, k, n]`` is the accumulated pair phase between system spin ``k``
    and environment spin ``n``; ``w1[t, n]`` accumulates the three-body phase
    of the triples (both system spins, env spin ``n``); ``m[t, k, n, m]``
    accumulates the (system spin ``k``, env ``n``, env ``m``) three-body phase
    and is only kept when ``track_pairs`` was requested.
    """

    env: np.ndarray
    sys: np.ndarray
    gamma: np.ndarray
    w1: np.ndarray
    m: np.ndarray | None = None
    step: int = 0
    lattice: TorusLattice = field(default=TorusLattice(1, 1))

    @property
    def n_traj(self) -> int:
        return self.env.shape[0]

    @property
    def n_env(self) -> int:
        return self.env.shape[1]

    def clear(self, mask=None) -> None:
        """Zero the accumulators of the selected trajectories (all by default)."""
        sel = slice(None) if mask is None else np.asarray(mask)
        self.gamma[sel] = 0.0
        self.w1[sel] = 0.0
        if self.m is not None:
            self.m[sel] = 0.0


def _random_pairs(lattice: TorusLattice, n: int, rng: np.random.Generator) -> np.ndarray:
    first = np.stack([rng.integers(0, lattice.width, n), rng.integers(0, lattice.height, n)], axis=-1)
    second = (first + MOORE_OFFSETS[rng.integers(0, 8, n)]) % lattice.shape
    return np.stack([first, second], axis=1)


def initial_state(
    config: LatticeConfig, rng: np.random.Generator, n_traj: int = 1, *, track_pairs: bool = False
) -> LatticeTrajectoryState:
    """Initial positions with zero accumulators.

    A lattice whose site count equals ``n_env`` starts filled with one
    environment spin per site; otherwise spins start on random distinct sites
    (random sites with repetition if there are more spins than sites).
    """
    lattice = config.lattice
    n = config.n_env
    if n == lattice.n_sites:
        idx = np.broadcast_to(np.arange(n), (n_traj, n))
    elif n < lattice.n_sites:
        idx = np.stack([rng.permutation(lattice.n_sites)[:n] for _ in range(n_traj)])
    else:
        idx = rng.integers(0, lattice.n_sites, (n_traj, n))
    env = np.stack([idx % lattice.width, idx // lattice.width], axis=-1).astype(np.int64)
    if config.mode == "static":
        sys = np.broadcast_to(np.array(config.system_sites, dtype=np.int64), (n_traj, 2, 2)).copy()
    else:
        sys = _random_pairs(lattice, n_traj, rng)
    return LatticeTrajectoryState(
        env=env,
        sys=sys,
        gamma=np.zeros((n_traj, 2, n)),
        w1=np.zeros((n_traj, n)),
        m=np.zeros((n_traj, 2, n, n)) if track_pairs else None,
        lattice=lattice,
    )


def step_positions(state: LatticeTrajectoryState, config: LatticeConfig, rng: np.random.Generator) -> None:
    """Advance the step counter and move the spins in place.

    Environment spins hop when the new step number is a multiple of the hop
    period; random draws happen in a fixed order (hops, then the system pair).
    """
    state.step += 1
    lattice = state.lattice
    if state.step % config.hop_period == 0:
        moves = MOORE_OFFSETS[rng.integers(0, 8, state.env.shape[:2])]
        state.env = (state.env + moves) % lattice.shape
    if config.mode == "relocate":
        state.sys = _random_pairs(lattice, state.n_traj, rng)


def system_env_adjacency(state: LatticeTrajectoryState) -> np.ndarray:
    """``Lambda_AB`` of the current positions, shape ``(n_traj, 2, n_env)``."""
    return adjacency(state.lattice, state.sys, state.env)


def env_env_adjacency(state: LatticeTrajectoryState) -> np.ndarray:
    """``Lambda_BB`` of the current positions with zero diagonal."""
    lam = adjacency(state.lattice, state.env, state.env)
    idx = np.arange(state.n_env)
    lam[:, idx, idx] = False
    return lam


def accumulate_phases(state: LatticeTrajectoryState, config: LatticeConfig, weight=None) -> None:
    """Add one step's worth of phases from the current neighbour relations.

    ``weight`` (shape ``(n_traj,)``) scales the increment per trajectory and is
    used for fractional steps; by default every trajectory gets a full step.
    """
    lam = system_env_adjacency(state).astype(float)
    if weight is not None:
        lam = lam * np.asarray(weight, dtype=float)[:, None, None]
    state.gamma += config.g_ab_dt * lam
    if config.h_dt != 0.0:
        state.w1 += config.h_dt * (lam[:, 0] + lam[:, 1])
        if state.m is not None:
            lam_bb = env_env_adjacency(state).astype(float)
            state.m += config.h_dt * lam[:, :, :, None] * lam_bb[:, None, :, :]


def _fill_hermitian(upper: np.ndarray) -> np.ndarray:
    """Assemble ``(..., 4, 4)`` matrices from the six upper-triangle values."""
    C = np.ones(upper.shape[:-1] + (4, 4), dtype=complex)
    C[..., _PAIR_I, _PAIR_J] = upper
    C[..., _PAIR_J, _PAIR_I] = np.conj(upper)
    return C


def pair_phases(gamma: np.ndarray, w1: np.ndarray) -> np.ndarray:
    """Per-spin relative phases ``theta_n`` for the six basis pairs.

    ``theta_n(a, a') = (a' - a) . Gamma[:, n] + (a1'a2' - a1a2) * W1[n]``;
    returns shape ``(n_traj, 6, n_env)``.
    """
    g1, g2 = gamma[:, 0], gamma[:, 1]
    # pair order follows PAIRS: (00,01) (00,10) (00,11) (01,10) (01,11) (10,11)
    return np.stack([g2, g1, g1 + g2 + w1, g1 - g2, g1 + w1, g2 + w1], axis=1)


def decoherence_factor_product(state: LatticeTrajectoryState) -> np.ndarray:
    """Factorized decoherence factors for the uniform (infinite temperature) bath.

    ``C(a, a') = prod_n exp(i theta_n / 2) cos(theta_n / 2)``, which is exact for
    pair phases and the (both system spins + one env spin) three-body phases.
    Returns ``(n_traj, 4, 4)``.
    """
    half = 0.5 * pair_phases(state.gamma, state.w1)
    phase = half.sum(axis=-1)
    upper = np.exp(1j * phase) * np.prod(np.cos(half, out=half), axis=-1)
    return _fill_hermitian(upper)


def _bruteforce_single(gamma, w1, m, dist: DiagonalDistribution, block: int) -> np.ndarray:
    n = gamma.shape[1]
    upper = np.zeros(len(PAIRS), dtype=complex)
    for start in range(0, 2**n, block):
        stop = min(start + block, 2**n)
        b = configurations(n, start, stop).astype(float)
        p = dist.probabilities(start, stop)
        # phi(a; b) = a . Gamma b + a1 a2 W1 . b + a . Q(b),  Q_k(b) = b . M_k . b
        lin = b @ gamma.T
        if m is not None:
            lin = lin + np.einsum("bn,knm,bm->bk", b, m, b)
        dbl = b @ w1
        phase = lin @ PAIR_DIFF.T + dbl[:, None] * PAIR_DOUBLE_DIFF[None, :]
        upper += p @ np.exp(1j * phase)
    return upper


def decoherence_factor_bruteforce(
    state: LatticeTrajectoryState, dist: DiagonalDistribution | None = None, *, block: int = 1 << 14
) -> np.ndarray:
    """Decoherence factors by explicit summation over all ``2**n_env`` bath states.

    Includes both kinds of three-body phases when the state tracks the
    ``m`` accumulator. ``dist`` defaults to the uniform distribution.
    """
    n = state.n_env
    check_capacity(n)
    dist = DiagonalDistribution.uniform(n) if dist is None else dist
    if dist.n_spins != n:
        raise ValueError(f"distribution has {dist.n_spins} spins, lattice has {n}")
    upper = np.stack(
        [
            _bruteforce_single(
                state.gamma[t], state.w1[t], None if state.m is None else state.m[t], dist, block
            )
            for t in range(state.n_traj)
        ]
    )
    return _fill_hermitian(upper)


@dataclass
class TrajectoryResult:
    """Per-step output of :func:`run_trajectory`; index 0 is the initial time."""

    config: LatticeConfig
    coherence: np.ndarray
    env_positions: np.ndarray | None = None
    sys_positions: np.ndarray | None = None

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.coherence.shape[0])

    @property
    def gate_phases(self) -> np.ndarray:
        return self.config.g_aa_dt * self.steps


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def iterate_coherence(
    config: LatticeConfig,
    rng: np.random.Generator,
    n_traj: int = 1,
    *,
    bruteforce: bool = False,
    dist: DiagonalDistribution | None = None,
):
    """Yield ``(state, C)`` for steps ``0..n_steps`` of a bundle of trajectories.

    ``C`` has shape ``(n_traj, 4, 4)``. The state is mutated between yields.
    """
    state = initial_state(config, rng, n_traj, track_pairs=bruteforce)

    def factor():
        if bruteforce:
            return decoherence_factor_bruteforce(state, dist)
        return decoherence_factor_product(state)

    yield state, factor()
    for _ in range(config.n_steps):
        accumulate_phases(state, config)
        step_positions(state, config, rng)
        yield state, factor()


def run_trajectory(
    config: LatticeConfig,
    seed=None,
    *,
    bruteforce: bool = False,
    dist: DiagonalDistribution | None = None,
    record_positions: bool = False,
) -> TrajectoryResult:
    """Simulate one trajectory and return its decoherence factor time series.

    ``seed`` defaults to ``config.master_seed``. The coherence array has shape
    ``(n_steps + 1, 4, 4)``. With ``record_positions`` the positions used
    during each step interval are stored as well (index ``s`` holds the
    positions in effect between steps ``s`` and ``s + 1``).
    """
    rng = _as_rng(config.master_seed if seed is None else seed)
    coherence, env, sys = [], [], []
    for state, C in iterate_coherence(config, rng, 1, bruteforce=bruteforce, dist=dist):
        coherence.append(C[0])
        if record_positions:
            env.append(state.env[0].copy())
            sys.append(state.sys[0].copy())
    return TrajectoryResult(
        config=config,
        coherence=np.array(coherence),
        env_positions=np.array(env) if record_positions else None,
        sys_positions=np.array(sys) if record_positions else None,
    )


def coherence_sum(config: LatticeConfig, n_traj: int, seed) -> np.ndarray:
    """Sum of the product-path decoherence factors over ``n_traj`` trajectories.

    One vectorized bundle driven by a single generator; returns
    ``(n_steps + 1, 4, 4)``.
    """
    rng = _as_rng(seed)
    out = np.empty((config.n_steps + 1, 4, 4), dtype=complex)
    for s, (_, C) in enumerate(iterate_coherence(config, rng, n_traj)):
        out[s] = C.sum(axis=0)
    return out


def first_peak(values, g_aa_dt: float) -> tuple[int, float]:
    """Step and value of the maximum within the first gate period ``g_aa t <= 2 pi``."""
    values = np.asarray(values)
    if g_aa_dt > 0:
        last = min(values.shape[-1] - 1, int(math.floor(2 * math.pi / g_aa_dt)))
    else:
        last = values.shape[-1] - 1
    idx = int(np.argmax(values[..., : last + 1]))
    return idx, float(values[idx])
