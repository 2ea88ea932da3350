"""Wigner functions of the single-mode cat states left behind by a Z measurement.

Phase-space convention: ``q = sqrt(2) Re z``, ``p = sqrt(2) Im z`` for coherent
amplitude ``z``, vacuum variance 1/2 per quadrature, and
``integral W dq dp = 1``. Superpositions of coherent states are handled in
closed form: every pair ``|beta_j><beta_k|`` contributes a Gaussian with a
complex linear exponent, and the exponent separates in ``q`` and ``p`` so a
full grid is a single matrix product.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import argrelmax

from .weyl import QuditState, root_of_unity, x_basis, xz_dagger_eigenvector

__all__ = [
    "CatState",
    "CoverageWarning",
    "cat_state",
    "coherent_overlap",
    "wigner_at",
    "wigner_grid",
    "grid_axes",
    "grid_integral",
    "required_extent",
    "write_csv",
    "write_raster",
    "read_raster",
    "radial_mass",
    "isotropy_metric",
    "angular_variance",
    "moments",
    "quadrature_covariance",
    "count_lobes",
    "find_lobes",
    "rotational_covariance_error",
    "figure_panel",
]

RASTER_MAGIC = b"WIGR"
_HEADER = struct.Struct("<4sIII")


class CoverageWarning(UserWarning):
    """The phase-space window clips a noticeable part of the state."""


def coherent_overlap(beta: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Matrix ``<beta_j|gamma_k>``."""
    b = np.asarray(beta, dtype=complex)[:, None]
    g = np.asarray(gamma, dtype=complex)[None, :]
    return np.exp(np.conj(b) * g - 0.5 * np.abs(b) ** 2 - 0.5 * np.abs(g) ** 2)


@dataclass(frozen=True)
class CatState:
    """``sum_j c_j |beta_j>`` with ``c^dag G c = 1`` for the coherent Gram matrix ``G``."""

    coefficients: np.ndarray
    displacements: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        b = np.asarray(self.displacements, dtype=complex)
        if c.shape != b.shape or c.ndim != 1:
            raise ValueError("coefficients and displacements must be 1-D arrays of equal length")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "displacements", b)
        if abs(self.norm - 1) > 1e-9:
            raise ValueError(f"cat state is not normalized: <psi|psi> = {self.norm:.12g}")

    @property
    def gram(self) -> np.ndarray:
        return coherent_overlap(self.displacements, self.displacements)

    @property
    def norm(self) -> float:
        c = self.coefficients
        return float(np.real(np.conj(c) @ self.gram @ c))

    @property
    def d(self) -> int:
        return self.coefficients.size

    def rotated(self, theta: float) -> "CatState":
        return CatState(self.coefficients, self.displacements * np.exp(1j * theta))


def cat_state(d: int, alpha: complex, initial: QuditState | None = None, outcome: int = 0) -> CatState:
    """Field state conditioned on reading ``|z_i>`` after ``U_A`` acted on ``|A0> (x) |0>``.

    Branch ``j`` carries ``<x_j|A0><z_i|x_j>`` and the coherent amplitude
    ``U^{-j} alpha``. ``initial=None`` means the ``j = 0`` eigenvector of
    ``X Z^dag``.
    """
    if d == 1:
        if outcome != 0:
            raise ValueError("outcome must be 0 for d = 1")
        return CatState(np.ones(1), np.array([alpha], dtype=complex))
    if not 0 <= outcome < d:
        raise ValueError(f"outcome must lie in [0, {d}), got {outcome}")
    if initial is None:
        initial = xz_dagger_eigenvector(d, 0)
    if initial.d != d:
        raise ValueError(f"initial state has d={initial.d}, expected {d}")
    xb = x_basis(d)
    weights = (xb.conj() @ initial.amplitudes) * xb[:, outcome]
    disp = alpha * root_of_unity(d) ** (-np.arange(d))
    if np.allclose(weights, 0):
        raise ValueError(f"outcome {outcome} has zero probability for this initial state")
    gram = coherent_overlap(disp, disp)
    norm = np.real(np.conj(weights) @ gram @ weights)
    return CatState(weights / np.sqrt(norm), disp)


def _pair_data(state: CatState):
    b = state.displacements
    c = state.coefficients
    beta = b[:, None]
    gamma = b[None, :]
    weight = c[:, None] * np.conj(c)[None, :]
    const = -np.conj(gamma) * beta - 0.5 * np.abs(beta) ** 2 - 0.5 * np.abs(gamma) ** 2
    lin_q = np.sqrt(2) * (np.conj(gamma) + beta)
    lin_p = 1j * np.sqrt(2) * (np.conj(gamma) - beta)
    return weight.ravel(), const.ravel(), lin_q.ravel(), lin_p.ravel()


def wigner_at(state: CatState, q, p) -> np.ndarray:
    """Pointwise ``W(q, p)`` for arrays of matching shape."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    q, p = np.broadcast_arrays(q, p)
    w, c0, lq, lp = _pair_data(state)
    qf, pf = q.ravel(), p.ravel()
    vals = np.empty(qf.size)
    step = max(1, 2**22 // w.size)
    for s in range(0, qf.size, step):
        qs, ps = qf[s:s + step], pf[s:s + step]
        expo = c0[:, None] + lq[:, None] * qs + lp[:, None] * ps - (qs ** 2 + ps ** 2)
        vals[s:s + step] = (w @ np.exp(expo)).real / np.pi
    return vals.reshape(q.shape)


def grid_axes(q_range, p_range, resolution) -> tuple[np.ndarray, np.ndarray]:
    nq, np_ = (resolution, resolution) if np.isscalar(resolution) else resolution
    return np.linspace(*q_range, int(nq)), np.linspace(*p_range, int(np_))


def required_extent(state: CatState, margin: float = 3.0) -> float:
    """Half-width of a square window holding every lobe plus ``margin`` vacuum widths."""
    return float(np.sqrt(2) * np.max(np.abs(state.displacements)) + margin)


def grid_integral(values: np.ndarray, q: np.ndarray, p: np.ndarray) -> float:
    return float(np.trapezoid(np.trapezoid(values, q, axis=1), p))


def wigner_grid(state: CatState, q_range, p_range, resolution=512) -> np.ndarray:
    """``W`` sampled on a rectangular grid; rows follow ``p``, columns follow ``q``.

    Emits :class:`CoverageWarning` when the window fails to contain every
    displacement plus three vacuum widths, quoting the measured mass deficit.
    """
    q, p = grid_axes(q_range, p_range, resolution)
    w, c0, lq, lp = _pair_data(state)
    half = 0.5 * c0
    qmat = np.exp(half[:, None] + lq[:, None] * q[None, :] - q[None, :] ** 2)
    pmat = np.exp(half[:, None] + lp[:, None] * p[None, :] - p[None, :] ** 2)
    values = ((pmat.T * w) @ qmat).real / np.pi
    pts = np.sqrt(2) * state.displacements
    lo_q, hi_q = pts.real.min() - 3, pts.real.max() + 3
    lo_p, hi_p = pts.imag.min() - 3, pts.imag.max() + 3
    if q[0] > lo_q or q[-1] < hi_q or p[0] > lo_p or p[-1] < hi_p:
        deficit = 1.0 - grid_integral(values, q, p)
        warnings.warn(f"phase-space window does not cover the state; mass deficit {deficit:.3e}",
                      CoverageWarning, stacklevel=2)
    return values


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def write_csv(path, values: np.ndarray, q: np.ndarray, p: np.ndarray) -> None:
    qq, pp = np.meshgrid(q, p)
    table = np.column_stack([qq.ravel(), pp.ravel(), values.ravel()])
    np.savetxt(path, table, delimiter=",", header="q,p,W", comments="", fmt="%.17g")


def write_raster(path, values: np.ndarray) -> None:
    """16-byte header (``WIGR``, u32 rows, u32 cols, u32 reserved) then row-major float64, little endian."""
    arr = np.ascontiguousarray(values, dtype="<f8")
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RASTER_MAGIC, rows, cols, 0))
        fh.write(arr.tobytes())


def read_raster(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, rows, cols, _ = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != RASTER_MAGIC:
            raise ValueError(f"{path}: not a WIGR raster (magic {magic!r})")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} samples, found {data.size}")
    return data.reshape(rows, cols)


# ---------------------------------------------------------------------------
# shape analysis
# ---------------------------------------------------------------------------

def radial_mass(state: CatState, n_angles: int = 720, n_radii: int = 400,
                r_max: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``M(phi) = integral_0^inf W(r, phi) r dr`` on a uniform angular grid."""
    r_max = required_extent(state, 4.0) if r_max is None else r_max
    phi = np.arange(n_angles) * (2 * np.pi / n_angles)
    r, wr = np.polynomial.legendre.leggauss(n_radii)
    r = 0.5 * r_max * (r + 1)
    wr = 0.5 * r_max * wr
    rr, pp = np.meshgrid(r, phi)
    vals = wigner_at(state, rr * np.cos(pp), rr * np.sin(pp))
    return phi, vals @ (wr * r)


def angular_variance(state: CatState, **kw) -> float:
    """Normalized angular variance ``Var_phi M / mean(M)^2`` of the radial mass about the origin."""
    _, m = radial_mass(state, **kw)
    return float(np.var(m) / np.mean(m) ** 2)


def moments(state: CatState) -> tuple[complex, complex, float]:
    """``(<a>, <a^2>, <a^dag a>)`` from the coherent Gram matrix."""
    c = state.coefficients
    b = state.displacements
    rho = np.conj(c)[:, None] * state.gram * c[None, :]
    mean_a = complex(np.sum(rho * b[None, :]))
    mean_a2 = complex(np.sum(rho * b[None, :] ** 2))
    mean_n = float(np.real(np.sum(rho * np.conj(b)[:, None] * b[None, :])))
    return mean_a, mean_a2, mean_n


def quadrature_covariance(state: CatState) -> tuple[np.ndarray, np.ndarray]:
    """Mean ``(q, p)`` and symmetrized covariance matrix; the vacuum has ``diag(1/2, 1/2)``."""
    a1, a2, n = moments(state)
    mean = np.sqrt(2) * np.array([a1.real, a1.imag])
    qq = np.real(a2) + n + 0.5
    pp = -np.real(a2) + n + 0.5
    qp = np.imag(a2)
    cov = np.array([[qq, qp], [qp, pp]]) - np.outer(mean, mean)
    return mean, cov


def isotropy_metric(state: CatState) -> float:
    """``lambda_min / lambda_max`` of the quadrature covariance: 1 for rotationally isotropic spreads."""
    ev = np.linalg.eigvalsh(quadrature_covariance(state)[1])
    return float(ev[0] / ev[1])


def find_lobes(state: CatState, radius: float | None = None, threshold: float | None = None,
               n_angles: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Angles and heights of local maxima of ``W`` above ``threshold`` on the circle ``|z| = radius``.

    ``radius`` defaults to the largest ``|beta_j|``. The default threshold
    ``0.5 / (pi d)`` is half the peak of a coherent lobe carrying ``1/d`` of
    the probability, which is what each branch of a uniform ``d``-component
    cat holds.
    """
    radius = np.max(np.abs(state.displacements)) if radius is None else radius
    threshold = 0.5 / (np.pi * state.d) if threshold is None else threshold
    phi = np.arange(n_angles) * (2 * np.pi / n_angles)
    rho = np.sqrt(2) * radius
    w = wigner_at(state, rho * np.cos(phi), rho * np.sin(phi))
    peaks = argrelmax(w, mode="wrap")[0]
    keep = peaks[w[peaks] > threshold]
    return phi[keep], w[keep]


def count_lobes(state: CatState, radius: float | None = None, threshold: float | None = None,
                n_angles: int = 4096) -> int:
    """Number of maxima reported by :func:`find_lobes`."""
    return int(find_lobes(state, radius, threshold, n_angles)[0].size)


def rotational_covariance_error(state: CatState, theta: float, extent: float | None = None,
                                resolution: int = 128) -> float:
    """Max ``|W_{e^{i theta} state}(x) - W_state(R_{-theta} x)|`` over a square grid."""
    extent = required_extent(state) if extent is None else extent
    q, p = grid_axes((-extent, extent), (-extent, extent), resolution)
    qq, pp = np.meshgrid(q, p)
    c, s = np.cos(theta), np.sin(theta)
    rotated = wigner_at(state.rotated(theta), qq, pp)
    base = wigner_at(state, c * qq + s * pp, -s * qq + c * pp)
    return float(np.max(np.abs(rotated - base)))


def figure_panel(d: int, alpha: complex = 2.5, outcome: int = 0, resolution: int = 512,
                 extent: float | None = None, initial: QuditState | None = None):
    """One cat-state panel: ``(state, q, p, W)`` on a square window."""
    state = cat_state(d, alpha, initial, outcome)
    extent = required_extent(state, 4.0) if extent is None else extent
    q, p = grid_axes((-extent, extent), (-extent, extent), resolution)
    return state, q, p, wigner_grid(state, (-extent, extent), (-extent, extent), resolution)
