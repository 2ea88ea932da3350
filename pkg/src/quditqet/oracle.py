"""Brute-force reference simulation on qudit (x) truncated multi-mode Fock space.

The mode continuum is replaced by ``N`` midpoint modes ``omega_k = (k + 1/2) d_omega``
with amplitudes ``a_k = alpha(omega_k) sqrt(d_omega)``. Controlled displacements
are built as dense matrix exponentials of the truncated generator and applied
branch by branch; energies are read off the state vector with
``H = sum_k (omega_k / 2) n_k``, the same normalization as the analytic engine.
Nothing here uses coherent-state algebra, so agreement with the engine's mode
sums is a genuine check.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.stats import poisson

from . import engine as eng
from . import profiles as prof
from .engine import ProtocolConfig
from .scaling import WeylNoiseModel
from .weyl import QuditState, root_of_unity, x_basis

__all__ = [
    "InsufficientCutoffError",
    "ModeGrid",
    "FockTruncation",
    "JointState",
    "poisson_tail",
    "required_cutoff",
    "discretize_amplitudes",
    "displacement_matrix",
    "coherent_column",
    "unitarity_deviation",
    "initial_joint_state",
    "apply_u_a",
    "free_evolve",
    "apply_u_b",
    "apply_weyl",
    "apply_weyl_noise",
    "sample_weyl",
    "field_energy",
    "branch_overlaps",
    "run_quantum",
    "run_classical",
    "simulate",
    "noisy_teleport_mc",
    "udw_ladder",
    "config_hash",
    "oracle_report",
]

TAIL_TOL = 1e-8


class InsufficientCutoffError(ValueError):
    """The Fock cutoff cannot hold the requested displacement."""

    def __init__(self, amp_sq: float, n_max: int, tail: float):
        self.required_n_max = required_cutoff(amp_sq)
        super().__init__(
            f"Poisson tail {tail:.2e} beyond n_max={n_max} at |amplitude|^2={amp_sq:.4g} exceeds "
            f"{TAIL_TOL:.0e}; need n_max >= {self.required_n_max}")


@dataclass(frozen=True)
class ModeGrid:
    """``n_modes`` midpoint frequencies ``(k + 1/2) d_omega``."""

    n_modes: int
    d_omega: float

    def __post_init__(self):
        if self.n_modes < 1 or self.d_omega <= 0:
            raise ValueError(f"invalid mode grid: N={self.n_modes}, d_omega={self.d_omega}")
        if self.n_modes > 4:
            raise ValueError("the Fock oracle supports at most 4 modes")

    @property
    def omegas(self) -> np.ndarray:
        return (np.arange(self.n_modes) + 0.5) * self.d_omega

    @classmethod
    def spanning(cls, n_modes: int, omega_max: float) -> "ModeGrid":
        return cls(n_modes, omega_max / n_modes)


@dataclass(frozen=True)
class FockTruncation:
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be a positive integer, got {self.n_max!r}")

    @property
    def levels(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True)
class JointState:
    """Amplitudes indexed ``(qudit j, n_1, ..., n_N)`` with the qudit in the Z basis."""

    tensor: np.ndarray

    @property
    def d(self) -> int:
        return self.tensor.shape[0]

    @property
    def n_modes(self) -> int:
        return self.tensor.ndim - 1

    @property
    def vector(self) -> np.ndarray:
        return self.tensor.reshape(-1)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.tensor))


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def poisson_tail(amp_sq: float, n_max: int) -> float:
    """Probability of more than ``n_max`` quanta in a coherent state with mean ``amp_sq``."""
    return float(poisson.sf(n_max, amp_sq))


def required_cutoff(amp_sq: float, tol: float = TAIL_TOL) -> int:
    n = 1
    while poisson.sf(n, amp_sq) >= tol:
        n += 1
    return n


def _check_tail(amp_sq: float, trunc: FockTruncation) -> float:
    tail = poisson_tail(amp_sq, trunc.n_max)
    if tail >= TAIL_TOL:
        raise InsufficientCutoffError(amp_sq, trunc.n_max, tail)
    return tail


def discretize_amplitudes(profile: prof.SmearingProfile, grid: ModeGrid, kind: str) -> tuple[np.ndarray, float]:
    """Per-mode amplitudes and their Riemann-sum norm ``sum |a_k|^2``.

    ``kind="A"``: ``alpha_omega = sqrt(omega / 4 pi) lambda~(omega)``;
    ``kind="B"``: ``beta_omega = (-i / sqrt(4 pi omega)) mu~(omega)``.
    """
    om = grid.omegas
    ft = np.asarray(prof.fourier(profile, om))
    if kind == "A":
        dens = np.sqrt(om / (4 * np.pi)) * ft
    elif kind == "B":
        dens = -1j / np.sqrt(4 * np.pi * om) * ft
    else:
        raise ValueError(f"kind must be 'A' or 'B', got {kind!r}")
    amps = dens * np.sqrt(grid.d_omega)
    return amps, float(np.sum(np.abs(amps) ** 2))


@lru_cache(maxsize=8)
def _ladder(levels: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, levels)), 1)
    a.setflags(write=False)
    return a


def displacement_matrix(alpha: complex, trunc: FockTruncation, check: bool = True) -> np.ndarray:
    """``exp(alpha a^dag - conj(alpha) a)`` on the first ``n_max + 1`` Fock levels."""
    alpha = complex(alpha)
    if check:
        _check_tail(abs(alpha) ** 2, trunc)
    a = _ladder(trunc.levels)
    return expm(alpha * a.T - np.conj(alpha) * a)


def coherent_column(alpha: complex, trunc: FockTruncation) -> np.ndarray:
    """Analytic ``e^{-|alpha|^2/2} alpha^n / sqrt(n!)`` for the column-0 cross-check."""
    n = np.arange(trunc.levels)
    logfact = np.cumsum(np.log(np.maximum(n, 1)))
    mag = np.exp(-0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha) + 1e-300) - 0.5 * logfact)
    if alpha == 0:
        mag = (n == 0).astype(float)
    return mag * np.exp(1j * n * np.angle(alpha))


def unitarity_deviation(m: np.ndarray) -> float:
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def _apply_mode_ops(field: np.ndarray, ops: list[np.ndarray]) -> np.ndarray:
    """Apply one matrix per mode to a field tensor of shape ``(levels,) * N``."""
    out = field
    for k, op in enumerate(ops):
        out = np.moveaxis(np.tensordot(op, out, axes=([1], [k])), 0, k)
    return out


def _displace_field(field: np.ndarray, amps: np.ndarray, trunc: FockTruncation) -> np.ndarray:
    return _apply_mode_ops(field, [displacement_matrix(a, trunc, check=False) for a in amps])


def initial_joint_state(qudit: QuditState, n_modes: int, trunc: FockTruncation) -> JointState:
    """``|A0> (x) |0...0>``."""
    shape = (qudit.d,) + (trunc.levels,) * n_modes
    t = np.zeros(shape, dtype=complex)
    t[(slice(None),) + (0,) * n_modes] = qudit.amplitudes
    return JointState(t)


def udw_ladder(d: int) -> np.ndarray:
    """Spin-(d-1)/2 ``J_x`` eigenvalues ``j - (d - 1)/2`` used as branch multipliers."""
    return np.arange(d) - 0.5 * (d - 1)


def _branch_multipliers(d: int, pattern: str) -> np.ndarray:
    if pattern == "weyl":
        return root_of_unity(d) ** (-np.arange(d))
    if pattern == "udw":
        return udw_ladder(d).astype(complex)
    raise ValueError(f"pattern must be 'weyl' or 'udw', got {pattern!r}")


def apply_u_a(state: JointState, cfg: ProtocolConfig, grid: ModeGrid, trunc: FockTruncation,
              pattern: str = "weyl") -> JointState:
    """``U_A = sum_j |x_j><x_j| (x) D(c_j a)`` with ``c_j = U^{-j}`` (or the UdW ladder)."""
    amps_a, _ = discretize_amplitudes(cfg.profile_a, grid, "A")
    _check_cutoffs(amps_a, np.zeros_like(amps_a), trunc, pattern, state.d)
    return _u_a(state, amps_a, trunc, pattern)


def _u_a(state: JointState, amps_a: np.ndarray, trunc: FockTruncation, pattern: str) -> JointState:
    d = state.d
    xb = x_basis(d)
    mult = _branch_multipliers(d, pattern)
    psi_x = np.tensordot(xb.conj(), state.tensor, axes=([1], [0]))
    out_x = np.empty_like(psi_x)
    for j in range(d):
        out_x[j] = _displace_field(psi_x[j], mult[j] * amps_a, trunc)
    return JointState(np.tensordot(xb.T, out_x, axes=([1], [0])))


def free_evolve(state: JointState, grid: ModeGrid, delay: float) -> JointState:
    """Multiply each Fock component by ``exp(-i omega_k n_k T)``."""
    if delay == 0:
        return state
    levels = state.tensor.shape[1]
    n = np.arange(levels)
    ops = [np.diag(np.exp(-1j * w * n * delay)) for w in grid.omegas]
    out = np.empty_like(state.tensor)
    for j in range(state.d):
        out[j] = _apply_mode_ops(state.tensor[j], ops)
    return JointState(out)


def apply_u_b(state: JointState, cfg: ProtocolConfig, grid: ModeGrid, trunc: FockTruncation) -> JointState:
    """``U_B = sum_i |z_i><z_i| (x) D(U^{-i} b)``."""
    amps_b, _ = discretize_amplitudes(cfg.profile_b, grid, "B")
    _check_cutoffs(np.zeros_like(amps_b), amps_b, trunc, "weyl", state.d)
    return _u_b(state, amps_b, trunc)


def _u_b(state: JointState, amps_b: np.ndarray, trunc: FockTruncation) -> JointState:
    mult = _branch_multipliers(state.d, "weyl")
    out = np.empty_like(state.tensor)
    for i in range(state.d):
        out[i] = _displace_field(state.tensor[i], mult[i] * amps_b, trunc)
    return JointState(out)


def apply_weyl(state: JointState, a: int, b: int) -> JointState:
    """Qudit-local ``Z^a X^b``."""
    d = state.d
    t = np.roll(state.tensor, b, axis=0)
    phase = np.exp(2j * np.pi * ((a * np.arange(d)) % d) / d)
    return JointState(phase.reshape((d,) + (1,) * state.n_modes) * t)


def sample_weyl(noise: WeylNoiseModel, seed) -> tuple[int, int]:
    """Draw ``(a, b)`` from the table with ``numpy.random.default_rng(seed)``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return divmod(int(rng.choice(noise.p.size, p=noise.p.ravel())), noise.d)


def apply_weyl_noise(state: JointState, noise: WeylNoiseModel, seed) -> JointState:
    """Sample ``(a, b) ~ p`` with ``numpy.random.default_rng(seed)`` and apply ``Z^a X^b``."""
    if noise.d != state.d:
        raise ValueError(f"noise table is for d={noise.d}, state has d={state.d}")
    return apply_weyl(state, *sample_weyl(noise, seed))


def field_energy(state: JointState, grid: ModeGrid) -> float:
    """``<sum_k (omega_k / 2) n_k>``."""
    prob = np.abs(state.tensor) ** 2
    total = 0.0
    levels = state.tensor.shape[1]
    n = np.arange(levels)
    for k, w in enumerate(grid.omegas):
        marg = prob.sum(axis=tuple(ax for ax in range(prob.ndim) if ax != k + 1))
        total += 0.5 * w * float(marg @ n)
    return total


def branch_overlaps(amps_a: np.ndarray, d: int, trunc: FockTruncation,
                    pattern: str = "weyl") -> np.ndarray:
    """Matrix of ``<Lambda_m|Lambda_k>`` for the branch field states produced by ``U_A``."""
    n_modes = amps_a.size
    mult = _branch_multipliers(d, pattern)
    vac = np.zeros((trunc.levels,) * n_modes, dtype=complex)
    vac[(0,) * n_modes] = 1.0
    fields = np.array([_displace_field(vac, mult[j] * amps_a, trunc).ravel() for j in range(d)])
    return fields.conj() @ fields.T


# ---------------------------------------------------------------------------
# protocol runs
# ---------------------------------------------------------------------------

@dataclass
class OracleRun:
    """Full record of one brute-force protocol run."""

    amps_a: np.ndarray
    amps_b: np.ndarray
    e_a: float
    e_before_b: float
    e_final: float
    delta_e: float
    switching: float
    tails: np.ndarray
    norm_errors: list = field(default_factory=list)

    @property
    def teleport(self) -> float:
        return self.delta_e - self.switching


def _amplitudes(cfg: ProtocolConfig, grid: ModeGrid):
    a, _ = discretize_amplitudes(cfg.profile_a, grid, "A")
    b, _ = discretize_amplitudes(cfg.profile_b, grid, "B")
    return a, b


def _check_cutoffs(amps_a, amps_b, trunc, pattern, d) -> np.ndarray:
    scale = np.max(np.abs(_branch_multipliers(d, pattern)))
    amp = scale * np.abs(amps_a) + np.abs(amps_b)
    return np.array([_check_tail(x ** 2, trunc) for x in amp])


def simulate(cfg: ProtocolConfig, grid: ModeGrid, trunc: FockTruncation, *,
             pattern: str = "weyl", noise: tuple[int, int] | None = None,
             amplitudes: tuple[np.ndarray, np.ndarray] | None = None) -> OracleRun:
    """``|Psi_3> = U_B [Z^a X^b] U_F(T) U_A |A0, 0>`` with energies measured along the way."""
    amps_a, amps_b = _amplitudes(cfg, grid) if amplitudes is None else amplitudes
    tails = _check_cutoffs(amps_a, amps_b, trunc, pattern, cfg.d)
    psi = initial_joint_state(cfg.initial_state, grid.n_modes, trunc)
    norms = []
    psi = _u_a(psi, amps_a, trunc, pattern)
    norms.append(abs(psi.norm - 1))
    e_a = field_energy(psi, grid)
    psi = free_evolve(psi, grid, cfg.delay)
    norms.append(abs(psi.norm - 1))
    if noise is not None:
        psi = apply_weyl(psi, *noise)
    e_mid = field_energy(psi, grid)
    psi = _u_b(psi, amps_b, trunc)
    norms.append(abs(psi.norm - 1))
    e_final = field_energy(psi, grid)
    switching = float(np.sum(0.5 * grid.omegas * np.abs(amps_b) ** 2))
    return OracleRun(amps_a, amps_b, e_a, e_mid, e_final, e_final - e_a, switching, tails, norms)


def run_quantum(cfg: ProtocolConfig, grid: ModeGrid, trunc: FockTruncation,
                pattern: str = "weyl") -> tuple[float, float]:
    """Quantum-channel protocol: returns ``(E_A, Delta E)`` measured on the state vector."""
    run = simulate(cfg, grid, trunc, pattern=pattern)
    return run.e_a, run.delta_e


@dataclass(frozen=True)
class ClassicalRun:
    probabilities: np.ndarray
    energies_before: np.ndarray
    energies_after: np.ndarray
    e_a: float
    delta_e: float

    @property
    def delta_e_by_outcome(self) -> np.ndarray:
        return self.energies_after - self.energies_before


def run_classical(cfg: ProtocolConfig, grid: ModeGrid, trunc: FockTruncation) -> ClassicalRun:
    """Measurement plus classical communication: project on ``|z_i>``, then displace by ``xi_i``.

    Projection is exact (no sampling); outcome ``i`` is weighted by its Born
    probability, which is ``1/d`` for initial states unbiased with respect to
    the Z basis.
    """
    amps_a, amps_b = _amplitudes(cfg, grid)
    _check_cutoffs(amps_a, amps_b, trunc, "weyl", cfg.d)
    psi = initial_joint_state(cfg.initial_state, grid.n_modes, trunc)
    psi = free_evolve(_u_a(psi, amps_a, trunc, "weyl"), grid, cfg.delay)
    e_a = field_energy(psi, grid)
    mult = _branch_multipliers(cfg.d, "weyl")
    probs, before, after = [], [], []
    for i in range(cfg.d):
        f = psi.tensor[i]
        p = float(np.vdot(f, f).real)
        probs.append(p)
        if p == 0:
            before.append(0.0)
            after.append(0.0)
            continue
        f = f / np.sqrt(p)
        one = JointState(f[None])
        before.append(field_energy(one, grid))
        after.append(field_energy(JointState(_displace_field(f, mult[i] * amps_b, trunc)[None]), grid))
    probs, before, after = map(np.array, (probs, before, after))
    return ClassicalRun(probs, before, after, e_a, float(probs @ after - e_a))


def noisy_teleport_mc(cfg: ProtocolConfig, grid: ModeGrid, trunc: FockTruncation,
                      noise: WeylNoiseModel, shots: int, seed) -> tuple[float, float]:
    """Monte-Carlo mean of the teleportation term under random ``Z^a X^b`` in transit.

    Each shot draws ``(a, b)`` from the noise table; the protocol for a given
    ``(a, b)`` is deterministic, so every distinct pair is simulated once and
    reused. Returns the mean and its standard error.
    """
    rng = np.random.default_rng(seed)
    draws = rng.choice(noise.p.size, size=shots, p=noise.p.ravel())
    amps = _amplitudes(cfg, grid)
    cache = {}
    for flat in np.unique(draws):
        a, b = divmod(int(flat), noise.d)
        cache[int(flat)] = simulate(cfg, grid, trunc, noise=(a, b), amplitudes=amps).teleport
    vals = np.array([cache[int(f)] for f in draws])
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(shots))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def config_record(cfg: ProtocolConfig) -> dict:
    amps = cfg.initial_state.amplitudes
    return {"d": cfg.d, "state_re": amps.real.tolist(), "state_im": amps.imag.tolist(),
            "profile_a": cfg.profile_a.to_record(), "profile_b": cfg.profile_b.to_record(),
            "delay": cfg.delay, "on_front": cfg.on_front}


def config_hash(cfg: ProtocolConfig) -> str:
    blob = json.dumps(config_record(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def oracle_report(cfg: ProtocolConfig, grid: ModeGrid, trunc: FockTruncation,
                  rtol: float = 1e-6) -> dict:
    """Run both protocol variants and compare with the mode-sum closed forms."""
    run = simulate(cfg, grid, trunc)
    cl = run_classical(cfg, grid, trunc)
    e_a_cf, de_cf = eng.delta_e_discrete(grid.omegas, run.amps_a, run.amps_b, cfg.delay,
                                         cfg.initial_state)
    def rel(x, y):
        scale = max(abs(y), 1e-300)
        return abs(x - y) / scale

    gaps = {"e_a": rel(run.e_a, e_a_cf), "delta_e": rel(run.delta_e, de_cf)}
    classical_gap = abs(cl.delta_e - run.delta_e)
    return {
        "config_hash": config_hash(cfg),
        "d": cfg.d,
        "grid": {"n_modes": grid.n_modes, "d_omega": grid.d_omega, "omegas": grid.omegas.tolist()},
        "cutoff": {"n_max": trunc.n_max, "tail_tolerance": TAIL_TOL},
        "truncation_tails": run.tails.tolist(),
        "norm_errors": [float(x) for x in run.norm_errors],
        "measured": {"e_a": run.e_a, "delta_e": run.delta_e, "switching": run.switching,
                     "teleport": run.teleport, "classical_delta_e": cl.delta_e,
                     "outcome_probabilities": cl.probabilities.tolist()},
        "closed_form": {"e_a": e_a_cf, "delta_e": de_cf},
        "relative_gaps": gaps,
        "classical_abs_gap": classical_gap,
        "tolerance": {"relative": rtol, "classical_abs": 1e-8},
        "pass": bool(max(gaps.values()) < rtol and classical_gap < 1e-8),
    }
