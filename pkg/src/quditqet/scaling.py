"""Parameter-scaling studies: the theta scaling, the eta (asymptotic locality)
scaling, locality margins, the fixed-coupling dimension limit and the Weyl
noise factor."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import engine as eng
from . import profiles as prof
from .engine import ProtocolConfig
from .weyl import extraction_state, root_of_unity

__all__ = [
    "InvalidExponentError",
    "InvalidNoiseTableError",
    "ThetaPoint",
    "ThetaScan",
    "EtaPoint",
    "EtaScan",
    "WeylNoiseModel",
    "gamma_lower_bound",
    "theta_scan",
    "eta_scan",
    "scaled_eta_config",
    "locality_margins",
    "noise_factor",
    "noise_phase_factor",
    "fixed_coupling_limit",
    "loglog_slope",
    "MARGIN_THRESHOLD",
]

MARGIN_THRESHOLD = 0.1


class InvalidExponentError(ValueError):
    """Scaling exponent outside its admissible range."""


class InvalidNoiseTableError(ValueError):
    """Noise probabilities negative or not summing to one."""


def gamma_lower_bound(d: int, alpha_norm_sq: float) -> float:
    """``cos(pi/d) exp((cos(2 pi/d) - 1) ||alpha||^2)``."""
    return math.cos(math.pi / d) * math.exp((math.cos(2 * math.pi / d) - 1.0) * alpha_norm_sq)


def loglog_slope(x, y) -> tuple[float, float]:
    """OLS slope of ``log|y|`` against ``log x`` and the fit's R^2."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y, float)))
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss = np.sum((ly - ly.mean()) ** 2)
    return float(slope), float(1 - np.sum(resid ** 2) / ss) if ss > 0 else 1.0


def _write_rows(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for r in rows:
            writer.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for k, v in r.items()})


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _extraction_sign(cfg: ProtocolConfig) -> float:
    # teleport term is -Im(Gamma) lambda0 mu0 K/(4 pi) with K > 0 off the front
    return 1.0 if cfg.profile_a.strength * cfg.profile_b.strength >= 0 else -1.0


# ---------------------------------------------------------------------------
# theta scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaPoint:
    theta: float
    d_scaled: int
    alpha_norm_sq: float
    im_gamma: float
    im_gamma_lower_bound: float
    asymptotic: float
    delta_e: float
    teleport_term: float
    switching_cost: float
    e_a: float


@dataclass(frozen=True)
class ThetaScan:
    epsilon: float
    points: tuple[ThetaPoint, ...]

    @property
    def thetas(self) -> np.ndarray:
        return np.array([p.theta for p in self.points])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    def theta_star(self, tol: float = 1e-3) -> float | None:
        """Smallest scanned ``theta`` from which ``| |Im Gamma| - 1 | <= tol`` holds for the rest of the scan."""
        ok = np.abs(np.abs(self.column("im_gamma")) - 1.0) <= tol
        order = np.argsort(self.thetas)
        star = None
        for idx in order[::-1]:
            if not ok[idx]:
                break
            star = float(self.thetas[idx])
        return star

    def top_decade_fit(self) -> tuple[float, float]:
        """Linear fit of ``Delta E`` against ``theta`` over the largest decade: (slope, R^2)."""
        th = self.thetas
        sel = th >= th.max() / 10
        x, y = th[sel], self.column("delta_e")[sel]
        slope, icpt = np.polyfit(x, y, 1)
        ss = np.sum((y - y.mean()) ** 2)
        r2 = 1 - np.sum((y - slope * x - icpt) ** 2) / ss if ss > 0 else 1.0
        return float(slope), float(r2)

    def to_csv(self, path) -> None:
        _write_rows(path, [asdict(p) for p in self.points])


def _theta_point(base: ProtocolConfig, theta: float, eps: float, s0: float) -> ThetaPoint:
    d = int(math.ceil(theta ** (1 + eps))) * base.d
    pa = base.profile_a.with_strength(theta * base.profile_a.strength)
    s = prof.alpha_norm_squared(pa)
    c = np.exp((root_of_unity(d) - 1.0) * s)
    state, _ = extraction_state(d, c, _extraction_sign(base))
    cfg = replace(base, d=d, initial_state=state, profile_a=pa)
    rep = eng.delta_e(cfg)
    return ThetaPoint(
        theta=float(theta), d_scaled=d, alpha_norm_sq=rep.alpha_norm_sq,
        im_gamma=rep.gamma.imag, im_gamma_lower_bound=gamma_lower_bound(d, rep.alpha_norm_sq),
        asymptotic=1.0 - 2 * math.pi ** 2 * s0 / (theta ** (2 * eps) * base.d ** 2),
        delta_e=rep.delta_e, teleport_term=rep.teleport_term,
        switching_cost=rep.switching_cost, e_a=rep.e_a)


def theta_scan(base: ProtocolConfig, thetas, epsilon: float, threads: int = 1) -> ThetaScan:
    """Scale ``lambda0 -> theta lambda0`` and ``d -> ceil(theta^{1+eps}) d`` and re-optimize the state.

    At each point the qudit state is the ``X Z^dag`` eigenvector that
    maximizes extraction for B's coupling sign, so the teleportation term is
    negative.
    """
    if epsilon < 0:
        raise InvalidExponentError(f"epsilon must be >= 0, got {epsilon!r}")
    s0 = prof.alpha_norm_squared(base.profile_a)
    pts = _pmap(lambda th: _theta_point(base, th, epsilon, s0), list(thetas), threads)
    return ThetaScan(float(epsilon), tuple(pts))


# ---------------------------------------------------------------------------
# eta scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EtaPoint:
    eta: float
    L: float
    lambda0: float
    mu0: float
    sigma_b: float
    d: int
    im_gamma: float
    teleported_energy: float
    delta_e: float
    e_a: float
    min_density: float
    min_teleport_density: float
    margin_coupling: float
    margin_locality: float


@dataclass(frozen=True)
class EtaScan:
    epsilon: float
    points: tuple[EtaPoint, ...]
    margin_threshold: float = MARGIN_THRESHOLD

    @property
    def etas(self) -> np.ndarray:
        return np.array([p.eta for p in self.points])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    def slope(self, name: str, decades: float = 2.0) -> tuple[float, float]:
        """Log-log OLS slope of ``|column|`` over the top ``decades`` of the scan."""
        eta = self.etas
        sel = eta >= eta.max() / 10 ** decades
        return loglog_slope(eta[sel], self.column(name)[sel])

    def sigma_threshold(self) -> float | None:
        """Smallest scanned eta from which ``sigma_B < L`` holds for all larger scanned eta."""
        ok = self.column("sigma_b") < self.column("L")
        star = None
        for idx in np.argsort(self.etas)[::-1]:
            if not ok[idx]:
                break
            star = float(self.etas[idx])
        return star

    def to_csv(self, path) -> None:
        _write_rows(path, [asdict(p) for p in self.points])


def _check_eta_eps(epsilon: float) -> None:
    if not (0.0 < epsilon < 0.25):
        raise InvalidExponentError(
            f"eta scaling needs 0 < epsilon < 1/4 (B's support would outgrow the gap), got {epsilon!r}")


def scaled_eta_config(base: ProtocolConfig, eta: float, epsilon: float) -> ProtocolConfig:
    """Apply ``L ~ eta``, ``lambda0 ~ eta^{2-eps}``, ``mu0 ~ eta^{2 eps}``, ``sigma_B ~ eta^{4 eps}``, ``d ~ eta^2``.

    Prefactors are those of ``base`` (``eta = 1``). B is stretched about its
    center and then moved so the gap to A's shifted support equals
    ``eta * L0`` on the same side. The qudit state is re-optimized for the
    scaled dimension and damping.
    """
    _check_eta_eps(epsilon)
    L0 = base.separation
    if L0 <= 0:
        raise eng.SupportOverlapError("eta scaling needs separated supports at eta = 1")
    pa0, pb0 = base.profile_a, base.profile_b
    pa = pa0.with_strength(pa0.strength * eta ** (2 - epsilon))
    pb = prof.stretch(pb0, eta ** (4 * epsilon)).with_strength(pb0.strength * eta ** (2 * epsilon))
    a0, a1 = pa0.support
    a0, a1 = a0 - base.delay, a1 - base.delay
    if pb0.center > a1:
        center = a1 + eta * L0 + 0.5 * pb.width
    else:
        center = a0 - eta * L0 - 0.5 * pb.width
    pb = replace(pb, center=center)
    d = int(math.ceil(eta ** 2 * base.d))
    s = prof.alpha_norm_squared(pa)
    c = np.exp((root_of_unity(d) - 1.0) * s)
    state, _ = extraction_state(d, c, 1.0 if pa.strength * pb.strength >= 0 else -1.0)
    return replace(base, d=d, initial_state=state, profile_a=pa, profile_b=pb)


def near_b_window(cfg: ProtocolConfig, points: int = 801) -> np.ndarray:
    """``supp(F_B)`` widened by one width on each side."""
    b0, b1 = cfg.profile_b.support
    w = cfg.profile_b.width
    return np.linspace(b0 - w, b1 + w, points)


def _eta_point(base: ProtocolConfig, eta: float, eps: float, points: int) -> EtaPoint:
    cfg = scaled_eta_config(base, eta, eps)
    rep = eng.delta_e(cfg)
    curve = eng.energy_density_b(cfg, near_b_window(cfg, points), alpha_sq=rep.alpha_norm_sq)
    tele = curve.component_breakdown["teleport"] + curve.component_breakdown["teleport_conj"]
    m1, m2 = locality_margins(cfg)
    return EtaPoint(
        eta=float(eta), L=float(cfg.separation), lambda0=float(cfg.profile_a.strength),
        mu0=float(cfg.profile_b.strength), sigma_b=float(cfg.profile_b.width), d=int(cfg.d),
        im_gamma=rep.gamma.imag, teleported_energy=rep.teleport_term, delta_e=rep.delta_e,
        e_a=rep.e_a, min_density=float(curve.values.min()),
        min_teleport_density=float(tele.min()), margin_coupling=float(m1), margin_locality=float(m2))


def eta_scan(base: ProtocolConfig, etas, epsilon: float, threads: int = 1,
             density_points: int = 801) -> EtaScan:
    """Evaluate teleported energy, minimum density near B and both locality margins along the eta scaling.

    ``min_density`` is the minimum of the full ``E_B(x)`` on ``supp(F_B)``
    widened by one width each side; ``min_teleport_density`` is the minimum
    of the teleportation terms alone on the same window.
    """
    _check_eta_eps(epsilon)
    pts = _pmap(lambda e: _eta_point(base, e, epsilon, density_points), list(etas), threads)
    return EtaScan(float(epsilon), tuple(pts))


def locality_margins(cfg: ProtocolConfig, sigma_b: float | None = None) -> tuple[float, float]:
    """``(mu0 ||F_B||_2^2 / (lambda0 / L^2), lambda0 / L^2)``.

    ``sigma_b`` optionally stretches B's profile before evaluating the first ratio.
    """
    L = cfg.separation
    if L <= 0:
        raise eng.SupportOverlapError("locality margins need separated supports")
    pb = cfg.profile_b if sigma_b is None else prof.stretch(cfg.profile_b, sigma_b)
    f2 = prof.l2_squared(pb.with_strength(1.0))
    lam = abs(cfg.profile_a.strength) / L ** 2
    return abs(pb.strength) * f2 / lam, lam


def margins_satisfied(margins: tuple[float, float], threshold: float = MARGIN_THRESHOLD) -> bool:
    return all(m < threshold for m in margins)


# ---------------------------------------------------------------------------
# noise and dimension limits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeylNoiseModel:
    """Probability ``p[a, b]`` of applying ``Z^a X^b`` to the qudit in transit."""

    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 2:
            raise InvalidNoiseTableError(f"noise table must be d x d with d >= 2, got shape {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidNoiseTableError("noise probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise InvalidNoiseTableError(f"noise probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def d(self) -> int:
        return self.p.shape[0]

    @classmethod
    def noiseless(cls, d: int) -> "WeylNoiseModel":
        p = np.zeros((d, d))
        p[0, 0] = 1.0
        return cls(p)

    @classmethod
    def from_b_marginal(cls, d: int, weights: dict[int, float]) -> "WeylNoiseModel":
        """Table uniform in ``a`` with the given distribution over ``b`` (keys taken mod d)."""
        p = np.zeros((d, d))
        for b, w in weights.items():
            p[:, b % d] += w / d
        return cls(p)


def noise_factor(noise: WeylNoiseModel) -> float:
    """``sum p(a, b) cos(2 pi b / d)``."""
    d = noise.d
    return float(np.sum(noise.p * np.cos(2 * np.pi * np.arange(d) / d)[None, :]))


def noise_phase_factor(noise: WeylNoiseModel) -> complex:
    """``sum p(a, b) U^{-b}``: the exact multiplier of ``I Gamma`` under Weyl noise.

    Its real part is :func:`noise_factor`; the imaginary part vanishes for
    tables symmetric under ``b -> -b``.
    """
    d = noise.d
    return complex(np.sum(noise.p * np.exp(-2j * np.pi * np.arange(d) / d)[None, :]))


def fixed_coupling_limit(alpha_norm_sq: float, d_values, increment_tol: float = 1e-4) -> tuple[np.ndarray, int | None]:
    """The Gamma lower bound across ``d`` at fixed coupling, plus the saturation dimension.

    The saturation dimension is the first ``d`` after which every further
    increment in the list stays below ``increment_tol``.
    """
    ds = np.asarray(list(d_values), dtype=int)
    vals = np.array([gamma_lower_bound(int(d), alpha_norm_sq) for d in ds])
    sat = None
    inc = np.diff(vals)
    for k in range(len(inc) - 1, -1, -1):
        if abs(inc[k]) >= increment_tol:
            break
        sat = int(ds[k])
    return vals, sat
