"""Weyl-Heisenberg (generalized Pauli) operators on C^d.

Basis conventions: ``|z_k>`` is the computational basis, the clock matrix is
``Z = sum_k U^k |z_k><z_k|`` and the shift matrix is ``X|z_k> = |z_{k+1}>``
with ``U = exp(2 pi i / d)``. The X eigenvector with eigenvalue ``U^j`` is
``|x_j> = d^{-1/2} sum_k U^{-jk} |z_k>``.

Dense matrices are built only on request; expectation values of Weyl
monomials are evaluated in O(d) with rolls so that protocol scans with
``d ~ 10^5`` stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InvalidDimensionError",
    "InvalidChiError",
    "QuditState",
    "QuditOperator",
    "clock",
    "shift",
    "weyl",
    "braiding_check",
    "hermitian_parts",
    "xz_dagger_spectrum",
    "xz_dagger_eigenvector",
    "optimal_initial_state",
    "extraction_state",
    "expectation",
    "weyl_expectation",
    "x_basis",
    "x_eigenstate",
    "z_eigenstate",
]

MAX_DIMENSION = 4096


class InvalidDimensionError(ValueError):
    """Raised when a qudit dimension is below 2."""


class InvalidChiError(ValueError):
    """Raised when a damping factor has modulus above one."""


def _check_dim(d: int) -> int:
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"qudit dimension must be an integer >= 2, got {d!r}")
    return int(d)


def root_of_unity(d: int) -> complex:
    return complex(np.exp(2j * np.pi / d))


@dataclass(frozen=True)
class QuditState:
    """Normalized pure qudit state in the computational (Z) basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        _check_dim(amps.size)
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"qudit state must be normalized, got squared norm {norm!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes) -> "QuditState":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(amps / np.linalg.norm(amps))

    @property
    def d(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class QuditOperator:
    """Dense d x d operator with a provenance tag.

    ``kind`` is one of ``clock``, ``shift``, ``weyl``, ``hermitian-part-C``,
    ``hermitian-part-S`` or ``general``; ``powers`` holds ``(a, b)`` for Weyl
    operators.
    """

    entries: np.ndarray
    kind: str = "general"
    powers: tuple[int, int] | None = field(default=None)

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "QuditOperator") -> "QuditOperator":
        return QuditOperator(self.entries @ other.entries)

    @property
    def dag(self) -> "QuditOperator":
        return QuditOperator(self.entries.conj().T)


def clock(d: int) -> QuditOperator:
    """Clock matrix ``diag(U^j)``."""
    d = _check_dim(d)
    return QuditOperator(np.diag(np.exp(2j * np.pi * np.arange(d) / d)), kind="clock")


def shift(d: int) -> QuditOperator:
    """Cyclic shift ``|z_j> -> |z_{j+1 mod d}>``."""
    d = _check_dim(d)
    return QuditOperator(np.roll(np.eye(d, dtype=complex), 1, axis=0), kind="shift")


def weyl(d: int, a: int, b: int) -> QuditOperator:
    """Heisenberg-Weyl element ``exp(-i pi a b / d) Z^a X^b``.

    The phase is evaluated on the integers passed in, which makes
    ``weyl(d, a, b)^dag == weyl(d, -a, -b)`` exactly. Reducing ``-a, -b`` to
    representatives in ``[0, d)`` changes the phase by ``(-1)^(d - a - b)``
    when both are nonzero.
    """
    d = _check_dim(d)
    z = np.linalg.matrix_power(clock(d).entries, a % d)
    x = np.linalg.matrix_power(shift(d).entries, b % d)
    phase = np.exp(-1j * np.pi * a * b / d)
    return QuditOperator(phase * z @ x, kind="weyl", powers=(a % d, b % d))


def braiding_check(d: int) -> float:
    """Max entry of ``ZX - U XZ``; zero up to rounding."""
    z, x = clock(d).entries, shift(d).entries
    return float(np.max(np.abs(z @ x - root_of_unity(d) * x @ z)))


def hermitian_parts(d: int) -> tuple[QuditOperator, QuditOperator]:
    """Return ``C = (X + X^dag)/2`` and ``S = i (X - X^dag)/2`` so that ``X = C - iS``."""
    x = shift(d).entries
    c = 0.5 * (x + x.conj().T)
    s = 0.5j * (x - x.conj().T)
    return QuditOperator(c, kind="hermitian-part-C"), QuditOperator(s, kind="hermitian-part-S")


def xz_dagger_spectrum(d: int) -> np.ndarray:
    """Eigenvalues ``-exp(i pi (2j+1)/d)`` of ``X Z^dag``, ordered by ``j``."""
    d = _check_dim(d)
    j = np.arange(d)
    return -np.exp(1j * np.pi * (2 * j + 1) / d)


def xz_dagger_eigenvector(d: int, j: int) -> QuditState:
    """Eigenvector of ``X Z^dag`` for the ``j``-th eigenvalue.

    ``X Z^dag |z_k> = U^{-k} |z_{k+1}>`` gives the recursion
    ``c_{k+1} = U^{-k} c_k / s``, so ``c_k = s^{-k} U^{-k(k-1)/2} / sqrt(d)``.
    """
    d = _check_dim(d)
    s = xz_dagger_spectrum(d)[j % d]
    k = np.arange(d, dtype=float)
    # phases reduced mod 2 pi before exponentiation to keep large-d accuracy
    arg_s = np.angle(s)
    tri = (k * (k - 1) / 2) % d
    phase = np.mod(-k * arg_s - 2 * np.pi * tri / d, 2 * np.pi)
    amps = np.exp(1j * phase) / np.sqrt(d)
    v = amps / np.linalg.norm(amps)
    if d <= 256:
        resid = _apply_xz_dagger(v) - s * v
        if np.linalg.norm(resid) > 1e-10:
            raise ArithmeticError(f"eigenvector residual {np.linalg.norm(resid):.2e} too large")
    return QuditState(v)


def _apply_xz_dagger(v: np.ndarray) -> np.ndarray:
    d = v.size
    return np.roll(np.exp(-2j * np.pi * np.arange(d) / d) * v, 1)


def optimal_initial_state(d: int, chi: complex) -> tuple[QuditState, float]:
    """Eigenvector of ``X Z^dag`` maximizing ``|Im(chi * s)|`` over the spectrum.

    A linear functional on the convex hull of the spectrum peaks at a vertex,
    so the maximizer over all unit states is an eigenvector. Ties go to the
    smallest index.

    Returns:
        The state and the achieved ``|Im(chi <A0|X Z^dag|A0>)|``.
    """
    d = _check_dim(d)
    chi = complex(chi)
    if abs(chi) > 1 + 1e-9:
        raise InvalidChiError(f"|chi| must be <= 1, got {abs(chi)!r}")
    values = np.abs((chi * xz_dagger_spectrum(d)).imag)
    best = float(values.max())
    j = int(np.flatnonzero(values >= best - 1e-15 * max(1.0, best))[0])
    return xz_dagger_eigenvector(d, j), float(values[j])


def extraction_state(d: int, chi: complex, sign: float = 1.0) -> tuple[QuditState, float]:
    """Eigenvector of ``X Z^dag`` maximizing ``sign * Im(chi * s)``.

    Used when the sign of ``Im(Gamma)`` matters (B's coupling sign fixed).
    The support function of the rotated spectrum polygon is at least its
    inradius, so the achieved value is still ``>= cos(pi/d) |chi|``.
    """
    d = _check_dim(d)
    values = np.sign(sign) * (complex(chi) * xz_dagger_spectrum(d)).imag
    best = float(values.max())
    j = int(np.flatnonzero(values >= best - 1e-15 * max(1.0, abs(best)))[0])
    return xz_dagger_eigenvector(d, j), best


def expectation(state: QuditState, op: QuditOperator) -> complex:
    """``<psi|O|psi>``."""
    v = state.amplitudes
    if op.entries.shape != (v.size, v.size):
        raise ValueError(f"dimension mismatch: state d={v.size}, operator {op.entries.shape}")
    return complex(np.vdot(v, op.entries @ v))


def weyl_expectation(state: QuditState, m: int, n: int, m_right: int = 0) -> complex:
    """``<psi| X^m Z^n X^{-m_right} |psi>`` without forming matrices.

    Negative powers denote adjoints (the operators are unitary).
    """
    v = np.asarray(state.amplitudes)
    d = v.size
    w = np.roll(v, -m_right)  # X^{-r}
    w = np.exp(2j * np.pi * ((n * np.arange(d)) % d) / d) * w
    w = np.roll(w, m)
    return complex(np.vdot(v, w))


def x_basis(d: int) -> np.ndarray:
    """Matrix whose row ``j`` holds ``|x_j>`` in the Z basis."""
    d = _check_dim(d)
    jk = np.outer(np.arange(d), np.arange(d)) % d
    return np.exp(-2j * np.pi * jk / d) / np.sqrt(d)


def x_eigenstate(d: int, j: int = 0) -> QuditState:
    return QuditState(x_basis(d)[j % d].copy())


def z_eigenstate(d: int, j: int = 0) -> QuditState:
    v = np.zeros(_check_dim(d), dtype=complex)
    v[j % d] = 1.0
    return QuditState(v)
