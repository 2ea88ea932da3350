"""Closed-form energy accounting for the qudit teleportation protocol.

Units: natural units, length is the only base unit. The field Hamiltonian
used for energies is ``H = (1/2) int omega a^dag a`` (so that the invested
energy equals ``(1/8) int lambda'^2``) while free evolution over a delay ``T``
multiplies mode amplitudes by ``exp(-i omega T)``.

Position-space building blocks (all real functions of ``x``):

* ``lambda'(x)`` and ``K(x) = f.p. int lambda(y)/(x - y)^2 dy`` give the
  positive-frequency profile of A's coherent amplitude,
  ``u(x) = i lambda'(x)/4 - K(x)/(4 pi)``.
* ``mu(x)`` and ``H(x) = PV int mu(y)/(x - y) dy`` give B's,
  ``p(x) = -i mu(x)/4 - H(x)/(4 pi)``.

For a branch with coherent amplitude profile ``psi`` the left-moving energy
density is ``|psi|^2 - Re(psi^2)``; averaging over the qudit branches with
their coherent overlaps produces the Weyl expectation values that appear in
:func:`energy_density_a` and :func:`energy_density_b`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import profiles as prof
from .profiles import SmearingProfile
from .quadrature import composite_rule, gauss_legendre, graded_breaks
from .weyl import QuditState, hermitian_parts, root_of_unity, weyl_expectation

__all__ = [
    "SupportOverlapError",
    "NumericalContractError",
    "ProtocolConfig",
    "EnergyReport",
    "DensityCurve",
    "HamiltonianWeights",
    "energy_invested",
    "alpha_norm_sq",
    "chi",
    "gamma",
    "double_kernel",
    "fourier_integral_I",
    "fourier_integral_I_frequency",
    "delta_e",
    "delta_e_discrete",
    "branch_factor",
    "energy_density_a",
    "energy_density_b",
    "default_grid",
    "nonlocal_tail_overlap",
    "nonlocal_hamiltonian_weights",
]

DUAL_RTOL = 1e-6


class SupportOverlapError(ValueError):
    """B's support meets A's light front without the on-front flag."""


class NumericalContractError(ArithmeticError):
    """Two independent evaluations of the same quantity disagree."""


@dataclass(frozen=True)
class ProtocolConfig:
    """One protocol instance: qudit dimension, initial state, both couplings and the delay."""

    d: int
    initial_state: QuditState
    profile_a: SmearingProfile
    profile_b: SmearingProfile
    delay: float = 0.0
    on_front: bool = False

    def __post_init__(self):
        if self.initial_state.d != self.d:
            raise ValueError(f"initial state has dimension {self.initial_state.d}, config says d={self.d}")
        gap = self.separation
        if gap <= 0 and not self.on_front:
            raise SupportOverlapError(
                f"supports overlap: supp(F_A) shifted by -T={-self.delay} and supp(F_B) are "
                f"separated by {gap:.6g} <= 0; set on_front to evaluate the light-front regime")

    @property
    def separation(self) -> float:
        return prof.support_gap(self.profile_a, self.profile_b, self.delay)

    @property
    def upsilon(self) -> complex:
        return root_of_unity(self.d)

    def replace(self, **changes) -> "ProtocolConfig":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class EnergyReport:
    e_a: float
    switching_cost: float
    teleport_term: float
    delta_e: float
    gamma: complex
    chi: complex
    alpha_norm_sq: float
    regime: str = "off-front"
    fourier_I: complex = 0j
    e_a_frequency: float = float("nan")
    e_a_dual_gap: float = float("nan")
    alpha_tail: float = float("nan")
    tolerances: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        """Flat JSON-ready record; complex numbers are split into ``_re``/``_im``."""
        rec = {}
        for key, val in self.__dict__.items():
            if isinstance(val, complex):
                rec[f"{key}_re"], rec[f"{key}_im"] = val.real, val.imag
            elif isinstance(val, dict):
                rec.update({f"tol_{k}": v for k, v in val.items()})
            else:
                rec[key] = val
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class DensityCurve:
    """Energy density sampled on a grid, with per-term breakdown.

    ``tail_mass`` holds the integral of the density outside the grid,
    evaluated by mapped Gauss-Legendre quadrature, so that
    ``integral()`` accounts for the slowly decaying non-local tails.
    """

    grid: np.ndarray
    values: np.ndarray
    component_breakdown: dict
    tail_mass: float = 0.0

    def integral(self, include_tail: bool = True) -> float:
        val = float(np.trapezoid(self.values, self.grid))
        return val + (self.tail_mass if include_tail else 0.0)

    def to_csv(self, path) -> None:
        names = list(self.component_breakdown)
        cols = [self.grid, self.values] + [self.component_breakdown[n] for n in names]
        header = ",".join(["x", "total"] + [f"term_{i + 1}" for i in range(len(names))])
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, comments="",
                   fmt="%.17g")


class HamiltonianWeights(NamedTuple):
    """Kernel weights of the non-local Hamiltonian density at ``(x, y)``.

    ``phi_weight`` multiplies ``S Phi(y)``, ``pi_weight`` multiplies
    ``S Pi(y)`` and ``local_coefficient`` multiplies ``C Pi(x)``.
    ``nonlocal_active`` is False when ``S = 0`` (qubits).
    """

    phi_weight: float
    pi_weight: float
    local_coefficient: float
    nonlocal_active: bool


# ---------------------------------------------------------------------------
# Scalars
# ---------------------------------------------------------------------------

def energy_invested(cfg: ProtocolConfig, *, check: bool = True) -> float:
    """``E_A = (1/8) int lambda'^2`` with a frequency-domain cross-check.

    Raises:
        NumericalContractError: if ``(1/2) int omega |alpha|^2`` differs by more than 1e-6 relative.
    """
    e_a = 0.125 * prof.l2_squared_derivative(cfg.profile_a)
    if check and e_a > 0:
        e_freq, _ = prof.frequency_energy(cfg.profile_a)
        gap = abs(e_freq - e_a) / e_a
        if gap > DUAL_RTOL:
            raise NumericalContractError(
                f"E_A spatial {e_a!r} vs frequency {e_freq!r}: relative gap {gap:.2e} > {DUAL_RTOL}")
    return e_a


def alpha_norm_sq(cfg: ProtocolConfig) -> float:
    return prof.alpha_norm_squared(cfg.profile_a)


def branch_factor(d: int, n: int, alpha_sq: float) -> complex:
    """``exp((U^n - 1) ||alpha||^2)``, the overlap of coherent branches ``n`` steps apart."""
    ups = np.exp(2j * np.pi * (n % d) / d)
    return complex(np.exp((ups - 1.0) * alpha_sq))


def chi(cfg: ProtocolConfig, alpha_sq: float | None = None) -> complex:
    s = alpha_norm_sq(cfg) if alpha_sq is None else alpha_sq
    return branch_factor(cfg.d, 1, s)


def gamma(cfg: ProtocolConfig, alpha_sq: float | None = None) -> complex:
    """``Gamma = <A0|X Z^dag|A0> chi``."""
    return weyl_expectation(cfg.initial_state, 1, -1) * chi(cfg, alpha_sq)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _b_nodes(cfg: ProtocolConfig, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature on supp(F_B) graded toward the end nearest A's shifted support."""
    b0, b1 = cfg.profile_b.support
    a0, a1 = cfg.profile_a.support
    a0, a1 = a0 - cfg.delay, a1 - cfg.delay
    gap = cfg.separation
    h = gap if 0 < gap < 0.25 * cfg.profile_b.width else None
    if b0 >= a1:
        breaks = graded_breaks(b0, b1, h, None, panels)
    else:
        breaks = graded_breaks(b0, b1, None, h, panels)
    return composite_rule(breaks, 16)


def double_kernel(cfg: ProtocolConfig, rtol: float = 1e-9) -> float:
    """``int int F_A(x) F_B(y) / (y - x + T)^2 dx dy`` for separated supports.

    Outer Gauss-Legendre over B's support (64 nodes to start), inner
    :func:`profiles.kernel_integral`; the outer rule is doubled until two
    successive values agree to ``rtol``.
    """
    pa = cfg.profile_a.with_strength(1.0)
    pb = cfg.profile_b.with_strength(1.0)
    if cfg.separation <= 0:
        raise SupportOverlapError("double kernel needs separated supports")
    cfg1 = cfg.replace(profile_a=pa, profile_b=pb)
    prev = None
    for panels in (4, 8, 16, 32, 64):
        y, w = _b_nodes(cfg1, panels)
        val = float(w @ (pb(y) * prof.kernel_integral(pa, y, cfg.delay)))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
    raise NumericalContractError(f"double kernel did not converge: last change {abs(val - prev):.2e}")


def _shifted_kernel_fp(cfg: ProtocolConfig, y: np.ndarray) -> np.ndarray:
    """``K_A(y + T)`` (finite part where needed)."""
    return prof.finite_part_kernel(cfg.profile_a, np.asarray(y) + cfg.delay)


def fourier_integral_I(cfg: ProtocolConfig) -> complex:
    """``I = int_0^inf omega exp(i omega T) alpha*_omega beta_omega d omega`` in position space.

    ``I = (1/4) int lambda(x) mu'(x - T) dx + (i/4 pi) f.p. int int lambda(x) mu(y)/(y - x + T)^2``.
    The real part lives on the light front and vanishes for separated supports.
    """
    pa, pb = cfg.profile_a, cfg.profile_b
    if cfg.separation > 0:
        return 1j * pa.strength * pb.strength * double_kernel(cfg) / (4 * np.pi)
    if not cfg.on_front:
        raise SupportOverlapError("overlapping supports need the on-front flag")
    if not pb.is_c1:
        raise prof.NonDifferentiableProfileError("on-front evaluation needs a C^1 profile for B")
    # real part: (1/4) int lambda(x) mu'(x - T) dx on A's support
    xa, wa = pa.quadrature(64, 24)
    re = 0.25 * float(wa @ (pa(xa) * pb.derivative(xa - cfg.delay)))
    # imaginary part: (1/4 pi) int mu(y) K_A(y + T) dy, finite part on the overlap
    yb, wb = pb.quadrature(32, 20)
    im = float(wb @ (pb(yb) * _shifted_kernel_fp(cfg, yb))) / (4 * np.pi)
    return complex(re, im)


def fourier_integral_I_frequency(cfg: ProtocolConfig, omega_max: float | None = None,
                                 panels_per_unit: float = 4.0) -> tuple[complex, float]:
    """Frequency form ``(-i/4 pi) int_0^omega_max omega e^{i omega T} conj(lambda~) mu~`` (cross-check only).

    Returns:
        (value, tail estimate from the last half of the window)
    """
    pa, pb = cfg.profile_a, cfg.profile_b
    w = min(pa.width, pb.width)
    om_max = 400.0 / w if omega_max is None else omega_max
    span = abs(cfg.profile_b.center - cfg.profile_a.center + cfg.delay) + pa.width + pb.width
    panels = int(np.ceil(om_max * span * panels_per_unit / (2 * np.pi))) + 16
    nodes, wts = composite_rule(np.linspace(0.0, om_max, panels + 1), 20)
    integrand = (-1j / (4 * np.pi)) * nodes * np.exp(1j * nodes * cfg.delay) * \
        np.conj(prof.fourier(pa, nodes)) * prof.fourier(pb, nodes)
    val = complex(wts @ integrand)
    half = nodes > 0.5 * om_max
    return val, float(abs(wts[half] @ integrand[half]))


# ---------------------------------------------------------------------------
# Energy report
# ---------------------------------------------------------------------------

def delta_e(cfg: ProtocolConfig) -> EnergyReport:
    """Energy accounting of B's operation: switching cost plus teleportation term.

    ``Delta E = (1/8) int mu^2 + Re(I Gamma)``; off the light front this is
    ``(mu0^2/8) int F_B^2 - Im(Gamma) (lambda0 mu0/4 pi) int int F_A F_B/(y - x + T)^2``.
    """
    e_a = 0.125 * prof.l2_squared_derivative(cfg.profile_a)
    e_freq, _ = prof.frequency_energy(cfg.profile_a)
    gap = abs(e_freq - e_a) / e_a if e_a > 0 else 0.0
    if gap > DUAL_RTOL:
        raise NumericalContractError(
            f"E_A spatial {e_a!r} vs frequency {e_freq!r}: relative gap {gap:.2e} > {DUAL_RTOL}")
    s, tail, _ = prof.alpha_norm_squared(cfg.profile_a, return_tail=True)
    c = chi(cfg, s)
    g = weyl_expectation(cfg.initial_state, 1, -1) * c
    switching = 0.125 * prof.l2_squared(cfg.profile_b)
    if cfg.profile_b.strength == 0 or cfg.profile_a.strength == 0:
        i_val = 0j
    else:
        i_val = fourier_integral_I(cfg)
    teleport = (i_val * g).real
    regime = "off-front" if cfg.separation > 0 else "on-front"
    return EnergyReport(
        e_a=e_a,
        switching_cost=switching,
        teleport_term=teleport,
        delta_e=switching + teleport,
        gamma=complex(g),
        chi=complex(c),
        alpha_norm_sq=s,
        regime=regime,
        fourier_I=complex(i_val),
        e_a_frequency=e_freq,
        e_a_dual_gap=gap,
        alpha_tail=tail,
        tolerances={"e_a_dual_rtol": DUAL_RTOL, "alpha_tail_rtol": prof.TAIL_RTOL,
                    "double_kernel_rtol": 1e-9},
    )


def delta_e_discrete(omegas, a, b, delay: float, state: QuditState) -> tuple[float, float]:
    """Mode-sum closed form on a discrete grid.

    With per-mode amplitudes ``a_k`` (A) and ``b_k`` (B), returns
    ``E_A = sum (omega_k/2)|a_k|^2`` and
    ``Delta E = sum (omega_k/2)|b_k|^2 + Re[(sum omega_k e^{i omega_k T} conj(a_k) b_k) Gamma]``
    with ``Gamma = <X Z^dag> exp((U - 1) sum |a_k|^2)``.
    """
    omegas, a, b = (np.asarray(v) for v in (omegas, a, b))
    d = state.d
    s = float(np.sum(np.abs(a) ** 2))
    g = weyl_expectation(state, 1, -1) * branch_factor(d, 1, s)
    i_disc = complex(np.sum(omegas * np.exp(1j * omegas * delay) * np.conj(a) * b))
    e_a = float(np.sum(0.5 * omegas * np.abs(a) ** 2))
    return e_a, float(np.sum(0.5 * omegas * np.abs(b) ** 2) + (i_disc * g).real)


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

def default_grid(cfg: ProtocolConfig, points: int = 2048, tail_widths: float = 10.0) -> np.ndarray:
    """Uniform grid over both supports (A's shifted by ``-T``) plus ``tail_widths`` widths each side."""
    a0, a1 = cfg.profile_a.support
    b0, b1 = cfg.profile_b.support
    wmax = max(cfg.profile_a.width, cfg.profile_b.width)
    lo = min(a0 - cfg.delay, b0) - tail_widths * wmax
    hi = max(a1 - cfg.delay, b1) + tail_widths * wmax
    return np.linspace(lo, hi, points)


def _u_parts(p: SmearingProfile, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(lambda'(x), K(x)) for A's profile."""
    if p.strength == 0:
        z = np.zeros_like(x)
        return z, z
    return p.derivative(x), prof.finite_part_kernel(p, x)


def _p_parts(p: SmearingProfile, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(mu(x), H(x)) for B's profile."""
    if p.strength == 0:
        z = np.zeros_like(x)
        return z, z
    return p(x), prof.cauchy_transform(p, p, x)


def _density_a_terms(state: QuditState, lam_p: np.ndarray, kern: np.ndarray) -> dict:
    u = 0.25j * lam_p - kern / (4 * np.pi)
    x2_dag = np.conj(weyl_expectation(state, 2, 0))
    return {"a_local": np.abs(u) ** 2, "a_weyl": -(x2_dag * u ** 2).real}


def _tail_mass(fn, lo: float, hi: float, scale: float, order: int = 48) -> float:
    """``int_{-inf}^{lo} fn + int_{hi}^{inf} fn`` via the map ``x = edge +- scale (1/t - 1)``."""
    t, w = gauss_legendre(order)
    # two panels on (0, 1] in t, the inner one graded toward t -> 0
    total = 0.0
    for tl, th in ((0.0, 0.1), (0.1, 1.0)):
        tt = 0.5 * (th - tl) * t + 0.5 * (th + tl)
        ww = 0.5 * (th - tl) * w
        jac = scale / tt ** 2
        off = scale * (1.0 / tt - 1.0)
        total += float(ww @ (fn(hi + off) * jac)) + float(ww @ (fn(lo - off) * jac))
    return total


def energy_density_a(cfg: ProtocolConfig, grid=None) -> DensityCurve:
    """``E_A(x) = |u|^2 - Re(<X^dag 2> u^2)`` right after A's measurement.

    Expanded with ``<X^2> = g + i h``:
    ``(1 - g) K^2/16 pi^2 + (1 + g) lambda'^2/16 + (h/8 pi) lambda' K``.
    Breakdown: ``local`` (lambda'^2 term), ``nonlocal`` (K^2 term), ``cross``.
    """
    pa = cfg.profile_a
    if not pa.is_c1:
        raise prof.NonDifferentiableProfileError(f"{pa.family} profile is not C^1")
    x = default_grid(cfg) if grid is None else np.asarray(grid, dtype=float)
    x2 = weyl_expectation(cfg.initial_state, 2, 0)
    g, h = x2.real, x2.imag

    def terms(xs):
        lp, k = _u_parts(pa, xs)
        return ((1 + g) * lp ** 2 / 16, (1 - g) * k ** 2 / (16 * np.pi ** 2),
                h * lp * k / (8 * np.pi))

    local, nonlocal_, cross = terms(x)
    scale = pa.width
    tail = _tail_mass(lambda xs: sum(terms(xs)), x[0], x[-1], scale)
    return DensityCurve(x, local + nonlocal_ + cross,
                        {"local": local, "nonlocal": nonlocal_, "cross": cross}, tail)


def _weyl_weights(cfg: ProtocolConfig, s: float) -> dict:
    """Weyl/overlap weights entering E_B(x).

    ``G(m, n) = exp((U^n - 1) s) <X^m Z^{-n}>``.
    """
    st, d = cfg.initial_state, cfg.d

    def big_g(m, n):
        return branch_factor(d, n, s) * weyl_expectation(st, m, -n)

    return {"x2_dag": np.conj(weyl_expectation(st, 2, 0)), "g02": big_g(0, 2),
            "g11": big_g(1, 1), "g1m1": big_g(1, -1)}


def energy_density_b(cfg: ProtocolConfig, grid=None, alpha_sq: float | None = None) -> DensityCurve:
    """Energy density after B's operation, split into six terms.

    With ``q(x) = u(x + T)`` (A's amplitude profile carried left by ``T``),
    ``p(x)`` B's amplitude profile and the weights ``G`` of
    :func:`_weyl_weights`::

        term_1 = |q|^2                     term_2 = -Re(<X^dag 2> q^2)
        term_3 = |p|^2                     term_4 = -Re(G(0,2) p^2)
        term_5 = -2 Re(G(1,-1) q* p*)      term_6 = 2 Re(G(1,1) q* p)

    Terms 1-2 are ``E_A(x + T)``, terms 3-4 are B's switching density and
    terms 5-6 carry the teleportation energy; ``G(1,1) = Gamma``.
    """
    pa, pb = cfg.profile_a, cfg.profile_b
    if not pa.is_c1:
        raise prof.NonDifferentiableProfileError(f"{pa.family} profile is not C^1")
    x = default_grid(cfg) if grid is None else np.asarray(grid, dtype=float)
    s = prof.alpha_norm_squared(pa) if alpha_sq is None else alpha_sq
    wts = _weyl_weights(cfg, s)

    def terms(xs):
        lp, k = _u_parts(pa, xs + cfg.delay)
        q = 0.25j * lp - k / (4 * np.pi)
        m, hb = _p_parts(pb, xs)
        p = -0.25j * m - hb / (4 * np.pi)
        return (np.abs(q) ** 2, -(wts["x2_dag"] * q ** 2).real,
                np.abs(p) ** 2, -(wts["g02"] * p ** 2).real,
                -2 * (wts["g1m1"] * np.conj(q) * np.conj(p)).real,
                2 * (wts["g11"] * np.conj(q) * p).real)

    parts = terms(x)
    names = ("a_local", "a_weyl", "b_local", "b_weyl", "teleport_conj", "teleport")
    scale = max(pa.width, pb.width)
    tail = _tail_mass(lambda xs: sum(terms(xs)), x[0], x[-1], scale)
    return DensityCurve(x, sum(parts), dict(zip(names, parts)), tail)


def nonlocal_tail_overlap(cfg: ProtocolConfig, alpha_sq: float | None = None) -> float:
    """``int F_B(x) E_A(x + T) dx`` off A's support: the part of A's non-local tail under B.

    On B's support ``lambda'(x + T) = 0`` so only the kernel-squared term
    ``(1 - Re<X^2>) K_A^2 / 16 pi^2`` survives; it decays like ``L^-4``.
    """
    if cfg.separation <= 0:
        raise SupportOverlapError("tail overlap needs separated supports")
    g = weyl_expectation(cfg.initial_state, 2, 0).real
    y, w = _b_nodes(cfg, 16)
    k = prof.kernel_integral(cfg.profile_a, y, cfg.delay)
    return float(w @ (cfg.profile_b.shape(y) * (1 - g) * k ** 2)) / (16 * np.pi ** 2)


def nonlocal_hamiltonian_weights(cfg: ProtocolConfig, x: float, y: float) -> HamiltonianWeights:
    """Weights of ``H_A(x) = (C/2) Pi(x) + (S/8 pi) int [Phi(y)/(x-y)^2 + Pi(y)/(x-y)] dy``.

    ``C = (X + X^dag)/2`` carries the local term and ``S = i (X - X^dag)/2``
    the power-law tails; ``S`` vanishes for ``d = 2``.
    """
    if x == y:
        raise ValueError("non-local kernel is singular at x == y")
    _, s_op = hermitian_parts(cfg.d)
    active = bool(np.max(np.abs(s_op.entries)) > 1e-12)
    r = x - y
    return HamiltonianWeights(1.0 / (8 * math.pi * r * r), 1.0 / (8 * math.pi * r), 0.5, active)
