"""Two nuclear spins dephased by a thermal, dipolar-coupled spin bath in a rigid molecule.

Positions are in metres internally, couplings and frequencies in rad/s, times
in seconds, and the inverse temperature ``beta = hbar / (k_B T)`` in seconds.

The secular (Ising) dipolar coupling between nuclei ``k`` and ``n`` is::

    g_kn = K * g_k g_n / r**3 * (1 - 3 cos^2(angle to the field axis))

The prefactor ``K`` uses Planck's constant ``h`` by default
(``mu0 mu_N^2 / (4 pi h)``). With ``convention="hbar"`` it uses ``hbar``,
which makes every coupling ``2 pi`` times larger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import expit

from .bath import DiagonalDistribution, check_capacity, configurations
from .ensemble import map_batches
from .lattice import PAIR_DIFF, _fill_hermitian

HBAR = 1.054571817e-34  # J s
PLANCK = 2.0 * math.pi * HBAR  # J s
K_B = 1.380649e-23  # J / K
MU_N = 5.0507837461e-27  # J / T
MU_0 = 1.25663706212e-6  # N / A^2

G_HYDROGEN = 5.585
G_PHOSPHORUS = 2.261

ANGSTROM = 1e-10
ROLES = ("system", "environment")
CONVENTIONS = ("h", "hbar")

#: orientation sub-batches used for reproducible parallel averaging
ORIENTATION_BATCH = 50


class GeometryError(ValueError):
    """Malformed geometry input or degenerate nuclear positions."""


# --------------------------------------------------------------------------- geometry


@dataclass(frozen=True)
class Nucleus:
    label: str
    g: float
    position: tuple  # metres
    role: str


@dataclass(frozen=True)
class MoleculeGeometry:
    """Nuclei of a rigid molecule; exactly two of them form the system."""

    nuclei: tuple

    def __post_init__(self):
        nuclei = tuple(self.nuclei)
        object.__setattr__(self, "nuclei", nuclei)
        roles = [n.role for n in nuclei]
        bad = sorted({r for r in roles if r not in ROLES})
        if bad:
            raise GeometryError(f"unknown role(s) {bad}; expected one of {ROLES}")
        if roles.count("system") != 2:
            raise GeometryError(f"need exactly 2 system nuclei, got {roles.count('system')}")
        check_capacity(roles.count("environment"))
        pos = self.positions
        d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
        iu = np.triu_indices(len(nuclei), 1)
        if np.any(d[iu] <= 0.0):
            k = int(np.argmin(d[iu]))
            raise GeometryError(f"nuclei {iu[0][k]} and {iu[1][k]} coincide")

    @property
    def positions(self) -> np.ndarray:
        return np.array([n.position for n in self.nuclei], dtype=float).reshape(-1, 3)

    def _select(self, role: str) -> np.ndarray:
        return np.array([n.role == role for n in self.nuclei])

    @property
    def system_positions(self) -> np.ndarray:
        return self.positions[self._select("system")]

    @property
    def env_positions(self) -> np.ndarray:
        return self.positions[self._select("environment")]

    @property
    def system_g(self) -> np.ndarray:
        return np.array([n.g for n in self.nuclei if n.role == "system"])

    @property
    def env_g(self) -> np.ndarray:
        return np.array([n.g for n in self.nuclei if n.role == "environment"])

    @property
    def n_env(self) -> int:
        return int(self._select("environment").sum())

    def with_env_g(self, g: float) -> "MoleculeGeometry":
        """Copy with every environment g-factor replaced (``0`` switches the bath off)."""
        return MoleculeGeometry(
            tuple(Nucleus(n.label, g if n.role == "environment" else n.g, n.position, n.role) for n in self.nuclei)
        )


def parse_geometry(text: str, source: str = "<string>") -> MoleculeGeometry:
    """Parse the line-oriented geometry format.

    The first non-comment line holds the nucleus count; each following line
    is ``label g x y z role`` with coordinates in Angstrom. Blank lines and
    lines starting with ``#`` are ignored.
    """
    lines = [
        (i, line.split("#", 1)[0].strip())
        for i, line in enumerate(text.splitlines(), start=1)
    ]
    lines = [(i, s) for i, s in lines if s]
    if not lines:
        raise GeometryError(f"{source}: empty geometry")
    head_no, head = lines[0]
    try:
        count = int(head)
    except ValueError:
        raise GeometryError(f"{source}:{head_no}: expected the nucleus count, got {head!r}") from None
    body = lines[1:]
    if len(body) != count:
        raise GeometryError(f"{source}: header declares {count} nuclei but {len(body)} lines follow")
    nuclei = []
    for no, line in body:
        fields = line.split()
        if len(fields) != 6:
            raise GeometryError(f"{source}:{no}: expected 'label g x y z role', got {line!r}")
        label, *numbers, role = fields
        try:
            g, x, y, z = (float(v) for v in numbers)
        except ValueError:
            raise GeometryError(f"{source}:{no}: non-numeric g-factor or coordinate in {line!r}") from None
        if not all(math.isfinite(v) for v in (g, x, y, z)):
            raise GeometryError(f"{source}:{no}: non-finite value in {line!r}")
        if role not in ROLES:
            raise GeometryError(f"{source}:{no}: role must be 'system' or 'environment', got {role!r}")
        nuclei.append(Nucleus(label, g, (x * ANGSTROM, y * ANGSTROM, z * ANGSTROM), role))
    try:
        return MoleculeGeometry(tuple(nuclei))
    except GeometryError as exc:
        raise GeometryError(f"{source}: {exc}") from None


def load_geometry(path) -> MoleculeGeometry:
    path = Path(path)
    if not path.is_file():
        raise GeometryError(f"geometry file not found: {path}")
    return parse_geometry(path.read_text(encoding="utf-8"), str(path))


def format_geometry(geometry: MoleculeGeometry) -> str:
    lines = [str(len(geometry.nuclei))]
    for n in geometry.nuclei:
        x, y, z = (c / ANGSTROM for c in n.position)
        lines.append(f"{n.label} {n.g!r} {x!r} {y!r} {z!r} {n.role}")
    return "\n".join(lines) + "\n"


def dpme_geometry() -> MoleculeGeometry:
    """The bundled dpme model geometry (2 P system spins, 16 H bath spins)."""
    ref = resources.files("spinbath") / "data" / "dpme.xyz"
    return parse_geometry(ref.read_text(encoding="utf-8"), "dpme.xyz")


# --------------------------------------------------------------------------- orientation


@dataclass(frozen=True)
class Orientation:
    """Tilt ``theta`` of the principal axis from the field and spin ``gamma`` about it."""

    theta: float
    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0.0 <= self.gamma < 2.0 * math.pi:
            raise ValueError(f"gamma must lie in [0, 2 pi), got {self.gamma}")

    def rotation(self) -> np.ndarray:
        """``R_y(theta) @ R_z(gamma)`` acting on body-frame column vectors."""
        ct, st = math.cos(self.theta), math.sin(self.theta)
        cg, sg = math.cos(self.gamma), math.sin(self.gamma)
        ry = np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])
        rz = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
        return ry @ rz


def body_frame(geometry: MoleculeGeometry) -> np.ndarray:
    """Positions relative to the system midpoint, with the system axis as ``z``.

    The body ``x`` axis is the input ``x`` axis made orthogonal to the system
    axis (the input ``y`` axis if ``x`` is parallel to it).
    """
    sys_pos = geometry.system_positions
    ez = sys_pos[1] - sys_pos[0]
    ez = ez / np.linalg.norm(ez)
    for ref in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        ex = ref - (ref @ ez) * ez
        if np.linalg.norm(ex) > 1e-6:
            break
    ex = ex / np.linalg.norm(ex)
    frame = np.stack([ex, np.cross(ez, ex), ez])
    return (geometry.positions - sys_pos.mean(axis=0)) @ frame.T


def sample_orientations(n: int, master_seed: int = 0) -> list[Orientation]:
    """Isotropic orientations: ``theta = arccos(1 - 2u)``, ``gamma`` uniform."""
    if n < 1:
        raise ValueError("need at least one orientation")
    rng = np.random.default_rng(np.random.SeedSequence(master_seed))
    u, v = rng.random(n), rng.random(n)
    theta = np.arccos(np.clip(1.0 - 2.0 * u, -1.0, 1.0))
    return [Orientation(float(t), float(2.0 * math.pi * g)) for t, g in zip(theta, v)]


# --------------------------------------------------------------------------- couplings


def coupling_prefactor(g_k, g_n, distance, convention: str = "h"):
    """Orientation-free magnitude ``K g_k g_n / r**3`` in rad/s."""
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    planck = PLANCK if convention == "h" else HBAR
    return MU_0 * MU_N**2 * np.asarray(g_k) * np.asarray(g_n) / (4.0 * math.pi * planck * np.asarray(distance) ** 3)


def dipole_coupling(pos_k, pos_n, g_k: float, g_n: float, convention: str = "h") -> float:
    """Secular dipolar coupling (rad/s) for lab-frame positions with the field along ``z``."""
    d = np.asarray(pos_k, dtype=float) - np.asarray(pos_n, dtype=float)
    r2 = float(d @ d)
    if r2 == 0.0:
        raise GeometryError("dipolar coupling of coincident positions is undefined")
    r = math.sqrt(r2)
    return float(coupling_prefactor(g_k, g_n, r, convention) * (1.0 - 3.0 * d[2] ** 2 / r2))


def coupling_matrix(positions: np.ndarray, g: np.ndarray, convention: str = "h") -> np.ndarray:
    """All pairwise couplings with a zero diagonal."""
    d = positions[:, None, :] - positions[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, 1.0)
    out = coupling_prefactor(g[:, None], g[None, :], np.sqrt(r2), convention) * (1.0 - 3.0 * d[..., 2] ** 2 / r2)
    np.fill_diagonal(out, 0.0)
    return out


def larmor(b_z: float, g: float = G_HYDROGEN) -> float:
    """Bare resonance ``g mu_N B / hbar`` in rad/s."""
    return g * MU_N * b_z / HBAR


@dataclass(frozen=True)
class CouplingSet:
    g_ab: np.ndarray  # (2, N) system-bath couplings
    g_bb: np.ndarray  # (N, N) bath-bath couplings, zero diagonal
    omega_tilde: np.ndarray  # (N,)
    omega_h: float

    @property
    def n_env(self) -> int:
        return self.g_ab.shape[1]


def build_couplings(
    geometry: MoleculeGeometry, orientation: Orientation, b_z: float, convention: str = "h"
) -> CouplingSet:
    """Rotate the molecule into the lab frame and evaluate all couplings.

    ``omega_tilde`` is the bare bath resonance shifted by half the couplings
    to both system spins and to every other bath spin. The bare resonance
    uses the g-factor of the first bath nucleus.
    """
    if b_z <= 0:
        raise ValueError(f"field must be positive, got {b_z}")
    lab = body_frame(geometry) @ orientation.rotation().T
    is_sys = np.array([n.role == "system" for n in geometry.nuclei])
    g = np.array([n.g for n in geometry.nuclei])
    full = coupling_matrix(lab, g, convention)
    g_ab = full[np.ix_(is_sys, ~is_sys)]
    g_bb = full[np.ix_(~is_sys, ~is_sys)]
    g_env = geometry.env_g
    omega_h = larmor(b_z, float(g_env[0]) if g_env.size else G_HYDROGEN)
    omega_tilde = omega_h - 0.5 * g_ab.sum(axis=0) - 0.5 * g_bb.sum(axis=1)
    return CouplingSet(g_ab=g_ab, g_bb=g_bb, omega_tilde=omega_tilde, omega_h=omega_h)


# --------------------------------------------------------------------------- thermal state


@dataclass(frozen=True)
class ThermalParams:
    """Inverse temperature (s), field (T), and the bath-state model.

    ``correlated=False`` replaces the Gibbs state by a product of single-spin
    Gibbs states at the bare resonance, or at the shifted per-spin
    resonances when ``per_spin`` is set.
    """

    beta: float
    b_z: float
    correlated: bool = True
    per_spin: bool = False

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not self.b_z > 0:
            raise ValueError(f"b_z must be positive, got {self.b_z}")

    @classmethod
    def from_temperature(cls, temperature: float, b_z: float, **kwargs) -> "ThermalParams":
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        return cls(beta=beta_from_temperature(temperature), b_z=b_z, **kwargs)

    @property
    def temperature(self) -> float:
        return math.inf if self.beta == 0 else HBAR / (K_B * self.beta)


def beta_from_temperature(temperature):
    return HBAR / (K_B * np.asarray(temperature, dtype=float))


def temperature_grid(t_min: float = 1e-9, t_max: float = 1e-4, n: int = 40) -> np.ndarray:
    return np.logspace(math.log10(t_min), math.log10(t_max), n)


def bath_energies(couplings: CouplingSet) -> np.ndarray:
    """``omega_tilde . b + b . g_bb . b / 2`` for every configuration ordinal."""
    bits = configurations(couplings.n_env).astype(float)
    return bits @ couplings.omega_tilde + 0.5 * np.einsum("bi,bi->b", bits @ couplings.g_bb, bits)


def uncorrelated_energies(couplings: CouplingSet, per_spin: bool = False) -> np.ndarray:
    bits = configurations(couplings.n_env).astype(float)
    omega = couplings.omega_tilde if per_spin else np.full(couplings.n_env, couplings.omega_h)
    return bits @ omega


def boltzmann(energies: np.ndarray, beta: float) -> np.ndarray:
    """Normalized ``exp(-beta E)`` computed relative to the minimum energy."""
    shifted = energies - energies.min()
    if math.isinf(beta):
        w = (shifted == 0.0).astype(float)
    else:
        w = np.exp(-beta * shifted)
    return w / w.sum()


def excitation_probability(beta: float, omega) -> np.ndarray:
    """Single-spin Gibbs population ``1 / (1 + exp(beta omega))``."""
    return expit(-beta * np.asarray(omega, dtype=float))


def gibbs_distribution(couplings: CouplingSet, thermal: ThermalParams) -> DiagonalDistribution:
    if not thermal.correlated:
        omega = couplings.omega_tilde if thermal.per_spin else np.full(couplings.n_env, couplings.omega_h)
        return DiagonalDistribution.product(excitation_probability(thermal.beta, omega))
    check_capacity(couplings.n_env)
    return DiagonalDistribution.explicit(boltzmann(bath_energies(couplings), thermal.beta))


# --------------------------------------------------------------------------- decoherence


def _characteristic(coeffs: np.ndarray, times: np.ndarray, dist: DiagonalDistribution) -> np.ndarray:
    """``E_b[exp(i t c_k . b)]`` for coefficient rows ``c_k``; shape ``(K, T)``."""
    coeffs = np.atleast_2d(coeffs)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if dist.is_product:
        f = dist.excitation_probabilities()
        phase = np.exp(1j * times[None, :, None] * coeffs[:, None, :])
        return np.prod(1.0 - f + f * phase, axis=-1)
    n = dist.n_spins
    n_hi = n // 2
    n_lo = n - n_hi
    p = dist.probabilities().reshape(2**n_hi, 2**n_lo)
    hi_bits = configurations(n_hi).astype(float)
    lo_bits = configurations(n_lo).astype(float)
    out = np.empty((coeffs.shape[0], times.size), dtype=complex)
    for k, c in enumerate(coeffs):
        e_hi = np.exp(1j * np.outer(times, hi_bits @ c[:n_hi]))
        arg_lo = np.outer(lo_bits @ c[n_hi:], times)
        inner = p @ np.cos(arg_lo) + 1j * (p @ np.sin(arg_lo))
        out[k] = np.einsum("th,ht->t", e_hi, inner)
    return out


def decoherence_factor_thermal(t, couplings: CouplingSet, dist: DiagonalDistribution) -> np.ndarray:
    """Coherence factors ``(T, 4, 4)`` (or ``(4, 4)`` for scalar ``t``).

    ``C(a, a') = sum_b p(b) exp(i t (a' - a) . g_AB . b)``.
    """
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=float))
    rows = PAIR_DIFF @ couplings.g_ab  # (6, N)
    unique, inverse = np.unique(rows, axis=0, return_inverse=True)
    chars = _characteristic(unique, times, dist)[np.ravel(inverse)]  # (6, T)
    C = _fill_hermitian(chars.T)
    return C[0] if scalar else C


def bell_coefficients(couplings: CouplingSet) -> np.ndarray:
    """``(1, 1) . g_AB``: the phase rates of the ``(00, 11)`` coherence."""
    return couplings.g_ab.sum(axis=0)


# --------------------------------------------------------------------------- orientation averages


def _resolve_orientations(n_orientations, master_seed, orientations):
    if orientations is not None:
        return list(orientations)
    return sample_orientations(n_orientations, master_seed)


def _thermal_views(geometry, orientation, thermals, convention):
    """Yield ``(i, couplings, dist)`` for each thermal setting at one orientation.

    Couplings and correlated energies are computed once per field value.
    """
    couplings, energies = {}, {}
    for i, th in enumerate(thermals):
        if th.b_z not in couplings:
            couplings[th.b_z] = build_couplings(geometry, orientation, th.b_z, convention)
        cs = couplings[th.b_z]
        if th.correlated:
            if th.b_z not in energies:
                energies[th.b_z] = bath_energies(cs)
            dist = DiagonalDistribution(cs.n_env, table=boltzmann(energies[th.b_z], th.beta))
        else:
            dist = gibbs_distribution(cs, th)
        yield i, cs, dist


def _as_list(thermal):
    return [thermal] if isinstance(thermal, ThermalParams) else list(thermal)


def _bell_chunk(geometry, chunk, thermals, times, convention):
    out = np.zeros((len(thermals), times.size), dtype=complex)
    for o in chunk:
        for i, cs, dist in _thermal_views(geometry, o, thermals, convention):
            out[i] += _characteristic(bell_coefficients(cs), times, dist)[0]
    return out


def _chunks(items, size=ORIENTATION_BATCH):
    return [items[i : i + size] for i in range(0, len(items), size)]


@dataclass
class DecayResult:
    times: np.ndarray
    thermals: list
    n_orientations: int
    bell_coherence: np.ndarray  # (n_thermal, T) orientation-averaged C(00, 11)

    @property
    def negativity(self) -> np.ndarray:
        return 0.5 * np.abs(self.bell_coherence)


def orientation_averaged_decay(
    geometry: MoleculeGeometry,
    thermal,
    times,
    n_orientations: int = 500,
    master_seed: int = 0,
    *,
    orientations=None,
    convention: str = "h",
    workers: int | None = None,
) -> DecayResult:
    """Bell-state negativity ``|<C_t(00, 11)>| / 2`` averaged over orientations.

    ``thermal`` may be one :class:`ThermalParams` or a sequence of them; all
    share the orientation sample. Passing ``orientations`` bypasses sampling.
    """
    thermals = _as_list(thermal)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    sample = _resolve_orientations(n_orientations, master_seed, orientations)
    parts = map_batches(
        _bell_chunk, [(geometry, c, thermals, times, convention) for c in _chunks(sample)], workers
    )
    total = np.zeros((len(thermals), times.size), dtype=complex)
    for part in parts:
        total += part
    return DecayResult(times, thermals, len(sample), total / len(sample))


def _moment_chunk(geometry, chunk, thermals, convention):
    """Summed ``E[s]`` and ``E[s^2]`` of ``s = (1, 1) . g_AB . b`` by enumeration."""
    out = np.zeros((len(thermals), 2))
    for o in chunk:
        rates = {}
        for i, cs, dist in _thermal_views(geometry, o, thermals, convention):
            key = id(cs)
            if key not in rates:
                s = configurations(cs.n_env).astype(float) @ bell_coefficients(cs)
                rates[key] = (s, s * s)
            s, s2 = rates[key]
            p = dist.probabilities()
            out[i] += (p @ s, p @ s2)
    return out


def initial_decay_R(
    tau: float,
    geometry: MoleculeGeometry,
    thermal,
    n_orientations: int = 500,
    master_seed: int = 0,
    *,
    orientations=None,
    convention: str = "h",
    workers: int | None = None,
):
    """Second-order initial negativity loss ``tau^2 / 4 * Var[s]``.

    The variance is over the pooled distribution of bath configurations and
    orientations; with a single orientation it is the thermal variance.
    Returns an array when ``thermal`` is a sequence.
    """
    thermals = _as_list(thermal)
    sample = _resolve_orientations(n_orientations, master_seed, orientations)
    parts = map_batches(_moment_chunk, [(geometry, c, thermals, convention) for c in _chunks(sample)], workers)
    m = np.zeros((len(thermals), 2))
    for part in parts:
        m += part
    m /= len(sample)
    r = 0.25 * tau**2 * (m[:, 1] - m[:, 0] ** 2)
    return float(r[0]) if isinstance(thermal, ThermalParams) else r


def initial_decay_R_uncorrelated(
    tau: float,
    geometry: MoleculeGeometry,
    thermal,
    n_orientations: int = 500,
    master_seed: int = 0,
    *,
    orientations=None,
    convention: str = "h",
):
    """Closed form of :func:`initial_decay_R` for a product bath state.

    With populations ``f_n`` and rates ``c_n = (1, 1) . g_AB[:, n]`` the pooled
    variance is ``<sum f(1-f) c^2> + <(sum f c)^2> - <sum f c>^2``; at the bare
    resonance it reduces to ``f(1-f) <sum c^2> + f^2 Var(sum c)``. The
    ``correlated`` flag of ``thermal`` is ignored.
    """
    thermals = _as_list(thermal)
    sample = _resolve_orientations(n_orientations, master_seed, orientations)
    n = len(sample)
    out = np.empty(len(thermals))
    cache = {}
    for i, th in enumerate(thermals):
        if th.b_z not in cache:
            cs = [build_couplings(geometry, o, th.b_z, convention) for o in sample]
            cache[th.b_z] = (
                np.array([bell_coefficients(c) for c in cs]),
                np.array([c.omega_tilde for c in cs]),
                cs[0].omega_h,
            )
        c, omega_tilde, omega_h = cache[th.b_z]
        if th.per_spin:
            f = excitation_probability(th.beta, omega_tilde)
            mean = np.sum(f * c, axis=1)
            var = np.sum(f * (1.0 - f) * c * c) / n + np.mean(mean**2) - np.mean(mean) ** 2
        else:
            f = float(excitation_probability(th.beta, omega_h))
            total = c.sum(axis=1)
            var = f * (1.0 - f) * np.sum(c * c) / n + f * f * (np.mean(total**2) - np.mean(total) ** 2)
        out[i] = 0.25 * tau**2 * var
    return float(out[0]) if isinstance(thermal, ThermalParams) else out


# --------------------------------------------------------------------------- quantiles


#: energies closer than this fraction of the spectral width form one level
LEVEL_TOL = 1e-9


def _quantile_sorted(p_sorted: np.ndarray, q: float, e_sorted=None) -> int:
    """Count for probabilities in ascending-energy order.

    With ``e_sorted`` given, the count is extended to the end of the
    degenerate level that contains the threshold crossing.
    """
    cum = np.cumsum(p_sorted)
    count = int(min(np.searchsorted(cum, q, side="left") + 1, p_sorted.size))
    if e_sorted is None:
        return count
    tol = LEVEL_TOL * max(float(e_sorted[-1] - e_sorted[0]), np.finfo(float).tiny)
    level = np.concatenate([[0], np.cumsum(np.diff(e_sorted) > tol)])
    return int(np.searchsorted(level, level[count - 1], side="right"))


def thermal_quantile(dist: DiagonalDistribution, q: float, energies=None, *, by_level: bool = False) -> int:
    """Number of lowest-energy configurations whose probabilities reach ``q``.

    Configurations are ordered by ascending energy with ties broken by
    ordinal. Without ``energies`` the order is by descending probability,
    which is the same order at any positive temperature. ``by_level`` counts
    whole degenerate energy levels (it needs ``energies``).
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if by_level and energies is None:
        raise ValueError("level counting needs the energies")
    p = dist.probabilities()
    key = -p if energies is None else np.asarray(energies, dtype=float)
    order = np.argsort(key, kind="stable")
    return _quantile_sorted(p[order], q, key[order] if by_level else None)


def _quantile_chunk(geometry, chunk, thermals, q, convention, by_level=False):
    out = np.zeros(len(thermals))
    for o in chunk:
        couplings, cache = {}, {}
        for i, th in enumerate(thermals):
            if th.b_z not in couplings:
                couplings[th.b_z] = build_couplings(geometry, o, th.b_z, convention)
            cs = couplings[th.b_z]
            key = (th.b_z, "corr") if th.correlated else (th.b_z, "unc", th.per_spin)
            if key not in cache:
                e = bath_energies(cs) if th.correlated else uncorrelated_energies(cs, th.per_spin)
                order = np.argsort(e, kind="stable")
                cache[key] = e[order] - e.min()
            e_sorted = cache[key]
            w = (e_sorted == 0.0).astype(float) if math.isinf(th.beta) else np.exp(-th.beta * e_sorted)
            out[i] += _quantile_sorted(w / w.sum(), q, e_sorted if by_level else None)
    return out


def quantile_counts(
    geometry: MoleculeGeometry,
    thermals,
    q: float = 0.99,
    n_orientations: int = 500,
    master_seed: int = 0,
    *,
    orientations=None,
    convention: str = "h",
    workers: int | None = None,
    by_level: bool = False,
) -> np.ndarray:
    """Orientation-averaged :func:`thermal_quantile` for each thermal setting."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    thermals = list(thermals)
    sample = _resolve_orientations(n_orientations, master_seed, orientations)
    parts = map_batches(
        _quantile_chunk, [(geometry, c, thermals, q, convention, by_level) for c in _chunks(sample)], workers
    )
    return np.sum(parts, axis=0) / len(sample)
