"""Compactly supported smearing profiles ``strength * F(x)`` with unit-area shape.

A profile is described by its family, center ``x0``, full support width ``w``
and strength. Internally every family is a shape ``f(t)`` on ``t in [-1/2, 1/2]``
with ``int f dt = 1``, so ``F(x) = f((x - x0)/w) / w``.

Conventions: ``fourier`` returns ``int exp(i w x) lambda(x) dx``; kernels are
``int lambda(y) / (e - y)^2 dy`` (ordinary integral off the support, Hadamard
finite part on it) and the Cauchy transform ``PV int g(y) / (e - y) dy``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .quadrature import composite_rule, graded_breaks

__all__ = [
    "FAMILIES",
    "ProfileError",
    "NonDifferentiableProfileError",
    "SingularKernelError",
    "DivergentNormError",
    "SmearingProfile",
    "ProfilePair",
    "make_profile",
    "sampled_profile",
    "evaluate",
    "derivative",
    "fourier",
    "alpha_norm_squared",
    "frequency_energy",
    "kernel_integral",
    "finite_part_kernel",
    "cauchy_transform",
    "stretch",
    "l2_squared",
    "l2_squared_derivative",
    "support_gap",
]

FAMILIES = ("hann", "bump", "triangle", "sampled")
TAIL_RTOL = 1e-8


class ProfileError(ValueError):
    """Invalid profile construction."""


class NonDifferentiableProfileError(ProfileError):
    """The operation needs a C^1 profile."""


class SingularKernelError(ValueError):
    """A kernel was evaluated on or too close to the support."""


class DivergentNormError(NonDifferentiableProfileError):
    """The frequency-weighted norm diverges for a non-C^1 profile."""


def _bump_raw(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 0.5
    u = 1.0 - 4.0 * t[inside] ** 2
    out[inside] = np.exp(-1.0 / u)
    return out


_BUMP_NORM = 1.0 / quad(lambda t: float(_bump_raw(np.array(t))), -0.5, 0.5,
                        epsabs=0, epsrel=1e-13, limit=200)[0]


@dataclass(frozen=True)
class SmearingProfile:
    """``strength * F(x)`` with ``F`` of unit area supported on ``[x0 - w/2, x0 + w/2]``.

    ``samples`` (sampled family only) are shape values on an equispaced grid
    spanning the support; the end values are forced to zero. With
    ``smooth=True`` the spline is clamped to zero slope at both ends, which
    makes the profile C^1 and allows derivatives.
    """

    family: str
    center: float
    width: float
    strength: float = 1.0
    samples: tuple[float, ...] | None = None
    smooth: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ProfileError(f"unknown profile family {self.family!r}; expected one of {FAMILIES}")
        if not np.isfinite(self.width) or self.width <= 0:
            raise ProfileError(f"profile width must be positive, got {self.width!r}")
        if not (np.isfinite(self.center) and np.isfinite(self.strength)):
            raise ProfileError("profile center and strength must be finite")
        if self.family == "sampled":
            if self.samples is None or len(self.samples) < 4:
                raise ProfileError("sampled profiles need at least 4 samples")
            object.__setattr__(self, "samples", tuple(float(v) for v in self.samples))
        elif self.samples is not None:
            raise ProfileError("samples are only accepted by the sampled family")
        area = self._shape_area()
        if abs(area - 1.0) > 1e-9:
            raise ProfileError(f"shape normalization failed: area {area!r}")

    # -- shape on the unit support --------------------------------------
    @cached_property
    def _spline(self) -> CubicSpline:
        vals = np.array(self.samples, dtype=float)
        vals[0] = vals[-1] = 0.0
        t = np.linspace(-0.5, 0.5, vals.size)
        bc = ((1, 0.0), (1, 0.0)) if self.smooth else "natural"
        raw = CubicSpline(t, vals, bc_type=bc)
        area = float(raw.integrate(-0.5, 0.5))
        if area <= 0:
            raise ProfileError("sampled profile must have positive area")
        return CubicSpline(t, vals / area, bc_type=bc)

    def _shape(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) < 0.5
        out = np.zeros_like(t)
        ti = t[inside]
        if self.family == "hann":
            out[inside] = 1.0 + np.cos(2 * np.pi * ti)
        elif self.family == "triangle":
            out[inside] = 2.0 * (1.0 - 2.0 * np.abs(ti))
        elif self.family == "bump":
            out[inside] = _BUMP_NORM * _bump_raw(ti)
        else:
            out[inside] = self._spline(ti)
        return out

    def _shape_prime(self, t: np.ndarray) -> np.ndarray:
        if not self.is_c1:
            raise NonDifferentiableProfileError(
                f"{self.family} profile is not C^1" + ("" if self.family != "sampled" else
                                                      " (construct with smooth=True)"))
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) < 0.5
        out = np.zeros_like(t)
        ti = t[inside]
        if self.family == "hann":
            out[inside] = -2 * np.pi * np.sin(2 * np.pi * ti)
        elif self.family == "bump":
            u = 1.0 - 4.0 * ti ** 2
            out[inside] = _BUMP_NORM * np.exp(-1.0 / u) * (-8.0 * ti / u ** 2)
        else:
            out[inside] = self._spline(ti, 1)
        return out

    def _shape_area(self) -> float:
        nodes, weights = composite_rule(np.linspace(-0.5, 0.5, 17), 24)
        return float(weights @ self._shape(nodes))

    # -- public helpers ---------------------------------------------------
    @property
    def is_c1(self) -> bool:
        return self.family in ("hann", "bump") or (self.family == "sampled" and self.smooth)

    @property
    def support(self) -> tuple[float, float]:
        return self.center - 0.5 * self.width, self.center + 0.5 * self.width

    def shape(self, x) -> np.ndarray:
        """Unit-area shape ``F(x)``."""
        return self._shape((np.asarray(x, dtype=float) - self.center) / self.width) / self.width

    def __call__(self, x) -> np.ndarray:
        return self.strength * self.shape(x)

    def derivative(self, x) -> np.ndarray:
        t = (np.asarray(x, dtype=float) - self.center) / self.width
        return self.strength * self._shape_prime(t) / self.width ** 2

    def with_strength(self, strength: float) -> "SmearingProfile":
        return replace(self, strength=float(strength))

    def translated(self, dx: float) -> "SmearingProfile":
        return replace(self, center=self.center + dx)

    def quadrature(self, panels: int = 16, order: int = 24) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.support
        h = 1e-3 * self.width if self.family == "bump" else None
        return composite_rule(graded_breaks(a, b, h, h, panels), order)

    def to_record(self) -> dict:
        rec = {"family": self.family, "center": self.center, "width": self.width,
               "strength": self.strength}
        if self.family == "sampled":
            rec["samples"] = list(self.samples)
            rec["smooth"] = self.smooth
        return rec


@dataclass(frozen=True)
class ProfilePair:
    """A's and B's profiles together with the light-travel delay ``T``."""

    profile_a: SmearingProfile
    profile_b: SmearingProfile
    delay: float = 0.0

    @property
    def separation(self) -> float:
        """Gap between ``supp(F_A) - T`` and ``supp(F_B)`` (negative if they overlap)."""
        return support_gap(self.profile_a, self.profile_b, self.delay)


def support_gap(pa: SmearingProfile, pb: SmearingProfile, delay: float) -> float:
    a0, a1 = pa.support
    b0, b1 = pb.support
    a0, a1 = a0 - delay, a1 - delay
    return max(b0 - a1, a0 - b1)


def make_profile(family: str, x0: float, w: float, strength: float = 1.0) -> SmearingProfile:
    return SmearingProfile(family, float(x0), float(w), float(strength))


def sampled_profile(values, x0: float, w: float, strength: float = 1.0,
                    smooth: bool = False) -> SmearingProfile:
    return SmearingProfile("sampled", float(x0), float(w), float(strength),
                           samples=tuple(np.asarray(values, dtype=float)), smooth=smooth)


def evaluate(p: SmearingProfile, x):
    return p(x)


def derivative(p: SmearingProfile, x):
    return p.derivative(x)


# ---------------------------------------------------------------------------
# Fourier transforms
# ---------------------------------------------------------------------------

def _shape_fourier(p: SmearingProfile, kappa: np.ndarray) -> np.ndarray:
    """``int exp(i kappa t) f(t) dt`` over the unit support."""
    if p.family == "hann":
        two_pi = 2 * np.pi
        return (np.sinc(kappa / two_pi)
                + 0.5 * (np.sinc((kappa + two_pi) / two_pi) + np.sinc((kappa - two_pi) / two_pi))
                ).astype(complex)
    if p.family == "triangle":
        return (np.sinc(kappa / (4 * np.pi)) ** 2).astype(complex)
    if p.family == "sampled" and kappa.size:
        big = np.abs(kappa) >= 10.0
        out = np.empty(kappa.shape, dtype=complex)
        out[big] = _spline_fourier(p._spline, kappa[big])
        if np.any(~big):
            out[~big] = _quadrature_fourier(p, kappa[~big])
        return out
    return _quadrature_fourier(p, kappa)


def _spline_fourier(spline: CubicSpline, kappa: np.ndarray) -> np.ndarray:
    """Exact transform of a piecewise cubic by four integrations by parts per piece."""
    knots = spline.x
    ik = 1j * kappa[:, None]
    total = np.zeros(kappa.shape, dtype=complex)
    for end, sign in ((knots[1:], 1.0), (knots[:-1], -1.0)):
        # evaluate each piece at its own end so one-sided derivatives are used
        c = spline.c
        h = (end - knots[:-1])
        vals = [c[0] * h ** 3 + c[1] * h ** 2 + c[2] * h + c[3],
                3 * c[0] * h ** 2 + 2 * c[1] * h + c[2],
                6 * c[0] * h + 2 * c[1],
                6 * c[0]]
        acc = sum((-1) ** m * vals[m][None, :] / ik ** (m + 1) for m in range(4))
        total += sign * np.sum(np.exp(ik * end[None, :]) * acc, axis=1)
    return total


def _quadrature_fourier(p: SmearingProfile, kappa: np.ndarray) -> np.ndarray:
    kmax = float(np.max(np.abs(kappa))) if kappa.size else 0.0
    panels = 16 + int(np.ceil(kmax / np.pi))
    out = np.empty(kappa.shape, dtype=complex)
    flat = kappa.ravel()
    res = out.reshape(-1)
    if p.family == "bump":
        # even shape: real cosine transform over half the support
        t, wts = composite_rule(graded_breaks(0.0, 0.5, None, 1e-3, panels // 2 + 1), 24)
        ft = 2 * wts * p._shape(t)
        kernel = np.cos
    else:
        t, wts = composite_rule(np.linspace(-0.5, 0.5, panels + 1), 24)
        ft = wts * p._shape(t)
        kernel = lambda arg: np.exp(1j * arg)
    chunk = max(1, 2_000_000 // t.size)
    for s in range(0, flat.size, chunk):
        res[s:s + chunk] = kernel(np.outer(flat[s:s + chunk], t)) @ ft
    return out


def fourier(p: SmearingProfile, omega) -> np.ndarray | complex:
    """``lambda~(omega) = int exp(i omega x) lambda(x) dx``."""
    om = np.asarray(omega, dtype=float)
    val = p.strength * np.exp(1j * om * p.center) * _shape_fourier(p, om * p.width)
    return complex(val) if val.ndim == 0 else val


def _frequency_integral(p: SmearingProfile, weight, omega_max: float | None,
                        rtol: float = TAIL_RTOL) -> tuple[float, float, float]:
    """``int_0^omega_max weight(omega) |lambda~|^2`` with automatic cutoff growth.

    The cutoff is doubled until the last doubling window contributes less
    than ``rtol`` of the total; that window's contribution is reported as the
    tail estimate.

    Returns:
        (value, tail estimate, final cutoff)
    """
    w = p.width
    om_max = 200.0 / w if omega_max is None else float(omega_max)
    fixed = omega_max is not None

    def window(lo, hi):
        panels = max(8, int(np.ceil((hi - lo) * w / np.pi)))
        nodes, wts = composite_rule(np.linspace(lo, hi, panels + 1), 20)
        return float(wts @ (weight(nodes) * np.abs(fourier(p, nodes)) ** 2))

    total = window(0.0, om_max)
    if fixed:
        tail = window(0.5 * om_max, om_max)
        return total, tail, om_max
    for _ in range(16):
        extra = window(om_max, 2 * om_max)
        total += extra
        om_max *= 2
        if abs(extra) <= rtol * abs(total):
            return total, abs(extra), om_max
    return total, abs(extra), om_max


def alpha_norm_squared(p: SmearingProfile, omega_max: float | None = None, *,
                       return_tail: bool = False):
    """``||alpha||^2 = int_0^inf (omega / 4 pi) |lambda~(omega)|^2 d omega``.

    ``omega_max=None`` grows the cutoff until the tail estimate drops below
    1e-8 of the total. With ``return_tail`` the tail estimate and the cutoff
    are returned as well.
    """
    if not p.is_c1:
        raise DivergentNormError(f"||alpha||^2 diverges logarithmically for the {p.family} family")
    if p.strength == 0:
        return (0.0, 0.0, omega_max or 0.0) if return_tail else 0.0
    val, tail, om = _frequency_integral(p, lambda om: om / (4 * np.pi), omega_max)
    return (val, tail, om) if return_tail else val


def frequency_energy(p: SmearingProfile, omega_max: float | None = None) -> tuple[float, float]:
    """``(1/2) int omega |alpha_omega|^2 = (1/8 pi) int omega^2 |lambda~|^2`` and its tail estimate."""
    if not p.is_c1:
        raise NonDifferentiableProfileError(f"{p.family} profile is not C^1")
    if p.strength == 0:
        return 0.0, 0.0
    val, tail, _ = _frequency_integral(p, lambda om: om ** 2 / (8 * np.pi), omega_max,
                                       rtol=1e-9)
    return val, tail


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def l2_squared(p: SmearingProfile) -> float:
    """``int (strength F)^2 dx``."""
    nodes, wts = p.quadrature(32, 24)
    return float(wts @ p(nodes) ** 2)


def l2_squared_derivative(p: SmearingProfile) -> float:
    """``int (strength F')^2 dx``."""
    nodes, wts = p.quadrature(32, 24)
    return float(wts @ p.derivative(nodes) ** 2)


def stretch(p: SmearingProfile, sigma: float) -> SmearingProfile:
    """``F^sigma(x) = F(x / sigma) / sigma`` about the profile center (L^1 norm kept)."""
    if not np.isfinite(sigma) or sigma <= 0:
        raise ProfileError(f"stretch factor must be positive, got {sigma!r}")
    return replace(p, width=p.width * sigma)


# ---------------------------------------------------------------------------
# Singular kernels
# ---------------------------------------------------------------------------

def _graded_nodes(a: float, b: float, toward_a: float | None, toward_b: float | None,
                  order: int = 20):
    return composite_rule(graded_breaks(a, b, toward_a, toward_b, 6), order)


def kernel_integral(p: SmearingProfile, x, shift: float = 0.0):
    """``int lambda(y) / (x - y + T)^2 dy`` for ``x + T`` off the support.

    Raises:
        SingularKernelError: if ``x + T`` lies inside the support or within
            ``1e-6 w`` of it.
    """
    e = np.atleast_1d(np.asarray(x, dtype=float)) + shift
    a, b = p.support
    delta = 1e-6 * p.width
    bad = (e > a - delta) & (e < b + delta)
    if np.any(bad):
        raise SingularKernelError(
            f"kernel evaluation point {e[bad][0]!r} is inside or within {delta:.1e} of the "
            f"support [{a}, {b}]")
    out = np.empty_like(e)
    for i, ei in enumerate(e):
        out[i] = _outside_integral(p, ei, lambda y: p(y), power=2)
    return out if np.ndim(x) else float(out[0])


def _outside_integral(p: SmearingProfile, e: float, g, power: int) -> float:
    a, b = p.support
    dist = a - e if e < a else e - b
    h = dist if dist < 0.25 * p.width else None
    if e < a:
        nodes, wts = _graded_nodes(a, b, h, None)
    else:
        nodes, wts = _graded_nodes(a, b, None, h)
    return float(wts @ (g(nodes) / (e - nodes) ** power))


def cauchy_transform(p: SmearingProfile, g, x) -> np.ndarray:
    """``PV int_supp g(y) / (x - y) dy`` for a function ``g`` living on ``supp(p)``.

    Points inside the support use the subtraction
    ``int (g(y) - g(x)) / (x - y) dy + g(x) log|(x - a)/(x - b)|``.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    a, b = p.support
    w = p.width
    h_edge = 1e-3 * w
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        if xi <= a or xi >= b:
            if xi == a or xi == b:
                # both sides of an edge agree when g vanishes there
                xi = xi + (-1e-14 * w if xi == a else 1e-14 * w)
            out[i] = _outside_integral(p, xi, g, power=1)
            continue
        gx = float(g(np.array([xi]))[0])
        total = gx * np.log((xi - a) / (b - xi))
        for lo, hi in ((a, xi), (xi, b)):
            nodes, wts = _graded_nodes(lo, hi, h_edge if lo == a else None,
                                       h_edge if hi == b else None)
            total += float(wts @ ((g(nodes) - gx) / (xi - nodes)))
        out[i] = total
    return out if np.ndim(x) else float(out[0])


def finite_part_kernel(p: SmearingProfile, x) -> np.ndarray:
    """Hadamard finite part of ``int lambda(y) / (x - y)^2 dy``, valid on and off the support.

    Equal to ``-PV int lambda'(y) / (x - y) dy``; off the support it reduces to
    :func:`kernel_integral` with zero shift.
    """
    if not p.is_c1:
        raise NonDifferentiableProfileError(f"{p.family} profile is not C^1")
    return -cauchy_transform(p, p.derivative, x)
