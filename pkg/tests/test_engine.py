import numpy as np
import pytest
from hypothesis import given, strategies as st

from quditqet import engine as E
from quditqet import profiles as P
from quditqet import weyl as W

# [DERIVED] scipy.integrate.dblquad of F_A F_B/(y - x + T)^2 for unit hann windows of width 2
DOUBLE_KERNEL_L8 = 0.010079352008161825      # A at 0, B at 10, T = 0
DOUBLE_KERNEL_T3 = 0.0076066742398849686     # A at 0, B at 8.5, T = 3


def config(d=3, lam=0.3, mu=0.05, xb=10.0, delay=0.0, state=None, fam="hann", wa=2.0, wb=2.0):
    pa = P.make_profile(fam, 0.0, wa, lam)
    pb = P.make_profile(fam, xb, wb, mu)
    state = W.z_eigenstate(d) if state is None else state
    return E.ProtocolConfig(d, state, pa, pb, delay)


def test_config_rejects_overlap_without_flag():
    with pytest.raises(E.SupportOverlapError, match="overlap"):
        config(xb=1.0)
    cfg = E.ProtocolConfig(3, W.z_eigenstate(3), P.make_profile("hann", 0, 2), P.make_profile("hann", 1, 2),
                           on_front=True)
    assert cfg.separation < 0
    with pytest.raises(ValueError):
        E.ProtocolConfig(4, W.z_eigenstate(3), P.make_profile("hann", 0, 2), P.make_profile("hann", 9, 2))


def test_energy_invested_closed_form_and_scaling():
    cfg = config(lam=1.0)
    # lambda' = -(pi/2) sin(pi x) on [-1, 1]  ->  (1/8) int lambda'^2 = pi^2 / 32
    assert abs(E.energy_invested(cfg) - np.pi ** 2 / 32) < 1e-12
    cfg2 = cfg.replace(profile_a=cfg.profile_a.with_strength(2.0))
    assert abs(E.energy_invested(cfg2) / E.energy_invested(cfg) - 4) < 1e-12
    cfg3 = cfg.replace(profile_a=cfg.profile_a.translated(-7.0))
    assert abs(E.energy_invested(cfg3) - E.energy_invested(cfg)) < 1e-14


@pytest.mark.parametrize("fam", ["hann", "bump"])
def test_energy_invested_dual_forms(fam):
    cfg = config(lam=1.0, fam=fam)
    rep = E.delta_e(cfg)
    assert rep.e_a_dual_gap < 1e-6


def test_chi_examples():
    cfg = config(d=2, lam=1.0)
    s = E.alpha_norm_sq(cfg)
    c = E.chi(cfg, s)
    assert abs(c - np.exp(-2 * s)) < 1e-15 and abs(c.imag) < 1e-15
    assert E.chi(cfg, 0.0) == 1
    c3 = E.branch_factor(3, 1, 1.0)
    assert abs(abs(c3) - np.exp(-1.5)) < 1e-15


def test_gamma_bounded(rng):
    for d in (2, 3, 7):
        st_ = W.QuditState.normalized(rng.normal(size=d) + 1j * rng.normal(size=d))
        cfg = config(d=d, state=st_, lam=2.0)
        assert abs(E.gamma(cfg)) <= 1 + 1e-9


def test_double_kernel_against_dblquad():
    assert abs(E.double_kernel(config()) / DOUBLE_KERNEL_L8 - 1) < 1e-10
    pa = P.make_profile("hann", 0.0, 2.0, 1.0)
    pb = P.make_profile("hann", 8.5, 2.0, 1.0)
    cfg = E.ProtocolConfig(3, W.z_eigenstate(3), pa, pb, delay=3.0)
    assert abs(E.double_kernel(cfg) / DOUBLE_KERNEL_T3 - 1) < 1e-10


def test_report_accounting_and_bounds():
    d = 5
    cfg = config(d=d)
    s = E.alpha_norm_sq(cfg)
    state, _ = W.extraction_state(d, E.branch_factor(d, 1, s), 1.0)
    rep = E.delta_e(cfg.replace(initial_state=state))
    assert abs(rep.delta_e - (rep.switching_cost + rep.teleport_term)) <= 1e-10 * abs(rep.delta_e)
    assert rep.switching_cost >= 0 and rep.e_a >= 0
    assert abs(rep.chi) <= 1 and abs(rep.gamma) <= 1 + 1e-9
    assert rep.gamma.imag > 0 and rep.teleport_term < 0
    assert rep.regime == "off-front"
    assert rep.fourier_I.real == 0
    expected = -rep.gamma.imag * 0.3 * 0.05 * DOUBLE_KERNEL_L8 / (4 * np.pi)
    assert abs(rep.teleport_term / expected - 1) < 1e-9
    assert abs(rep.switching_cost - 0.05 ** 2 * 0.75 / 8) < 1e-15
    rec = rep.to_record()
    assert {"gamma_re", "gamma_im", "tol_e_a_dual_rtol", "delta_e"} <= set(rec)


def test_trivial_reports():
    rep = E.delta_e(config(mu=0.0))
    assert rep.delta_e == 0.0
    rep = E.delta_e(config(state=W.x_eigenstate(3, 0)))
    assert abs(rep.teleport_term) < 1e-18
    assert abs(rep.delta_e - rep.switching_cost) < 1e-18


def test_fourier_integral_dual_forms():
    cfg = config(lam=1.0, mu=1.0, xb=5.0, delay=1.0)
    spatial = E.fourier_integral_I(cfg)
    freq, tail = E.fourier_integral_I_frequency(cfg)
    assert abs(freq - spatial) / abs(spatial) < 1e-5
    assert tail < 1e-5 * abs(spatial)


def test_on_front_real_part_matches_frequency_form():
    pa = P.make_profile("hann", 0.0, 2.0, 1.0)
    pb = P.make_profile("hann", 0.6, 2.0, 1.0)
    cfg = E.ProtocolConfig(3, W.z_eigenstate(3), pa, pb, delay=0.0, on_front=True)
    spatial = E.fourier_integral_I(cfg)
    freq, _ = E.fourier_integral_I_frequency(cfg, omega_max=2000.0)
    assert abs(spatial.real) > 0.05
    assert abs(spatial.real - freq.real) < 1e-4
    assert abs(spatial.imag - freq.imag) < 1e-4
    assert E.delta_e(cfg).regime == "on-front"


def test_fourier_integral_decays_like_T_minus_two():
    from quditqet.scaling import loglog_slope
    Ts = np.geomspace(200, 20000, 7)
    vals = [abs(E.fourier_integral_I(config(lam=1.0, mu=1.0, xb=5.0, delay=T)).imag) for T in Ts]
    slope, r2 = loglog_slope(Ts, vals)
    assert abs(slope + 2) < 0.02


def test_quadratic_minimum_in_mu():
    d = 5
    pa = P.make_profile("hann", 0.0, 2.0, 3.0)
    pb1 = P.make_profile("hann", 11.0, 2.0, 1.0)
    cfg = E.ProtocolConfig(d, W.z_eigenstate(d), pa, pb1)
    s = E.alpha_norm_sq(cfg)
    state, _ = W.extraction_state(d, E.branch_factor(d, 1, s), 1.0)
    cfg = cfg.replace(initial_state=state)
    rep = E.delta_e(cfg)
    a = rep.switching_cost          # coefficient of mu0^2
    b = rep.teleport_term           # coefficient of mu0
    mu_star = -b / (2 * a)
    predicted = -b ** 2 / (4 * a)
    mus = np.linspace(0.2 * mu_star, 1.8 * mu_star, 161)
    scan = [E.delta_e(cfg.replace(profile_b=pb1.with_strength(m))).delta_e for m in mus]
    k = int(np.argmin(scan))
    assert abs(mus[k] - mu_star) <= mus[1] - mus[0]
    best = E.delta_e(cfg.replace(profile_b=pb1.with_strength(mu_star))).delta_e
    assert abs(best / predicted - 1) < 1e-10
    assert min(scan) >= best - 1e-18


@given(d=st.integers(2, 12), lam=st.floats(0.01, 3), mu=st.floats(-3, 3),
       xb=st.floats(3.0, 40.0), seed=st.integers(0, 2**32 - 1))
def test_work_bound(d, lam, mu, xb, seed):
    rng = np.random.default_rng(seed)
    state = W.QuditState.normalized(rng.normal(size=d) + 1j * rng.normal(size=d))
    rep = E.delta_e(config(d=d, lam=lam, mu=mu, xb=xb, state=state))
    # energy recovered by B, -delta_e, never exceeds what A invested
    assert -rep.delta_e <= rep.e_a


def test_delta_e_discrete_trivial_cases():
    om = np.array([0.5, 1.5])
    a = np.array([0.3, 0.2j])
    e_a, de = E.delta_e_discrete(om, a, np.zeros(2), 1.0, W.z_eigenstate(3))
    assert abs(e_a - (0.25 * 0.09 + 0.75 * 0.04)) < 1e-15 and de == 0


def test_nonlocal_weights():
    cfg2 = config(d=2)
    w = E.nonlocal_hamiltonian_weights(cfg2, 0.3, 2.0)
    assert not w.nonlocal_active
    cfg = config(d=5)
    for x, y in [(0.3, 2.0), (-4.0, 1.5), (10.0, -3.0)]:
        w = E.nonlocal_hamiltonian_weights(cfg, x, y)
        assert w.nonlocal_active
        assert abs(w.phi_weight * (x - y) ** 2 - 1 / (8 * np.pi)) < 1e-15
        assert w.pi_weight == -E.nonlocal_hamiltonian_weights(cfg, y, x).pi_weight
    with pytest.raises(ValueError):
        E.nonlocal_hamiltonian_weights(cfg, 1.0, 1.0)
