import numpy as np
import pytest

from quditqet import engine as E
from quditqet import oracle as O
from quditqet import profiles as P
from quditqet import weyl as W
from quditqet.scaling import WeylNoiseModel, noise_factor


def make(d=3, state=None, lam=1.0, mu=0.8, xb=5.0, delay=1.0):
    pa = P.make_profile("hann", 0.0, 2.0, lam)
    pb = P.make_profile("hann", xb, 2.0, mu)
    state = W.xz_dagger_eigenvector(d, 0) if state is None else state
    return E.ProtocolConfig(d, state, pa, pb, delay)


GRID = O.ModeGrid(2, 1.2)
TRUNC = O.FockTruncation(15)


def test_grid_and_truncation():
    assert np.allclose(GRID.omegas, [0.6, 1.8])
    assert O.ModeGrid.spanning(4, 8.0).d_omega == 2.0
    for bad in [(0, 1.0), (2, 0.0), (5, 1.0)]:
        with pytest.raises(ValueError):
            O.ModeGrid(*bad)
    with pytest.raises(ValueError):
        O.FockTruncation(0)


def test_coherent_column_matches_expm():
    trunc = O.FockTruncation(20)
    for alpha in [0.0, 0.3, 1.0, 0.6 - 0.8j, -1j]:
        D = O.displacement_matrix(alpha, trunc)
        assert np.abs(D[:, 0] - O.coherent_column(alpha, trunc)).max() < 1e-8


def test_displacement_identities():
    assert np.allclose(O.displacement_matrix(0, TRUNC), np.eye(16))
    D = O.displacement_matrix(0.7 + 0.4j, O.FockTruncation(30))
    Dm = O.displacement_matrix(-0.7 - 0.4j, O.FockTruncation(30))
    assert np.abs(D @ Dm - np.eye(31)).max() < 1e-7
    assert O.unitarity_deviation(D) < 1e-8


def test_insufficient_cutoff():
    with pytest.raises(O.InsufficientCutoffError) as err:
        O.displacement_matrix(3.0, O.FockTruncation(10))
    need = err.value.required_n_max
    assert O.poisson_tail(9.0, need) < O.TAIL_TOL <= O.poisson_tail(9.0, need - 1)
    assert f"n_max >= {need}" in str(err.value)
    O.displacement_matrix(3.0, O.FockTruncation(need))


def test_discretized_amplitudes():
    pa = P.make_profile("hann", 0.0, 2.0, 1.0)
    grid = O.ModeGrid.spanning(4, 60.0)
    a, s = O.discretize_amplitudes(pa, grid, "A")
    a2, _ = O.discretize_amplitudes(pa.with_strength(2.0), grid, "A")
    assert np.allclose(a2, 2 * a)
    z, zs = O.discretize_amplitudes(pa.with_strength(0.0), grid, "B")
    assert zs == 0 and not np.any(z)
    with pytest.raises(ValueError):
        O.discretize_amplitudes(pa, grid, "C")


def test_riemann_norm_converges_to_continuum():
    # the 4-mode cap applies to joint states; the amplitude map itself is checked on 256 modes
    pa = P.make_profile("hann", 0.0, 2.0, 1.0)
    om_max = 50.0
    dw = om_max / 256
    om = (np.arange(256) + 0.5) * dw
    a = np.sqrt(om / (4 * np.pi)) * P.fourier(pa, om) * np.sqrt(dw)
    ref = P.alpha_norm_squared(pa)
    assert abs(np.sum(np.abs(a) ** 2) / ref - 1) < 1e-3


def test_u_a_single_branch_and_norms():
    cfg = make(state=W.x_eigenstate(3, 0))
    psi = O.initial_joint_state(cfg.initial_state, 2, TRUNC)
    out = O.apply_u_a(psi, cfg, GRID, TRUNC)
    amps, _ = O.discretize_amplitudes(cfg.profile_a, GRID, "A")
    field = np.multiply.outer(O.coherent_column(amps[0], TRUNC), O.coherent_column(amps[1], TRUNC))
    want = np.multiply.outer(W.x_eigenstate(3, 0).amplitudes, field)
    assert np.abs(out.tensor - want).max() < 1e-8
    e = O.field_energy(out, GRID)
    assert abs(e / np.sum(0.5 * GRID.omegas * np.abs(amps) ** 2) - 1) < 1e-6
    assert abs(out.norm - 1) < 1e-9


def test_free_evolution():
    cfg = make()
    psi = O.apply_u_a(O.initial_joint_state(cfg.initial_state, 2, TRUNC), cfg, GRID, TRUNC)
    assert O.free_evolve(psi, GRID, 0.0) is psi
    ev = O.free_evolve(psi, GRID, 2.3)
    e0, e1 = O.field_energy(psi, GRID), O.field_energy(ev, GRID)
    assert abs(e1 - e0) <= 1e-10 * e0
    # the single |x_0> branch becomes the coherent state with rotated amplitudes
    cfg0 = make(state=W.x_eigenstate(3, 0))
    psi0 = O.apply_u_a(O.initial_joint_state(cfg0.initial_state, 1, TRUNC), cfg0, O.ModeGrid(1, 1.2), TRUNC)
    ev0 = O.free_evolve(psi0, O.ModeGrid(1, 1.2), 2.3)
    a, _ = O.discretize_amplitudes(cfg0.profile_a, O.ModeGrid(1, 1.2), "A")
    want = O.coherent_column(a[0] * np.exp(-1j * 0.6 * 2.3), TRUNC)
    branch = np.tensordot(W.x_basis(3).conj(), ev0.tensor, axes=([1], [0]))[0]
    assert np.abs(branch - want).max() < 1e-8


def test_u_b_qubit_is_conditional_displacement():
    cfg = make(d=2, state=W.z_eigenstate(2))
    grid = O.ModeGrid(1, 1.2)
    b, _ = O.discretize_amplitudes(cfg.profile_b, grid, "B")
    for i, sign in [(0, 1), (1, -1)]:
        psi = O.initial_joint_state(W.z_eigenstate(2, i), 1, TRUNC)
        out = O.apply_u_b(psi, cfg, grid, TRUNC)
        assert np.abs(out.tensor[i] - O.coherent_column(sign * b[0], TRUNC)).max() < 1e-8
        assert not np.any(out.tensor[1 - i])
    none = O.apply_u_b(psi, make(d=2, mu=0.0), grid, TRUNC)
    assert np.array_equal(none.tensor, psi.tensor)


def test_final_state_expansion_d3_single_mode():
    d, T = 3, 1.7
    rng = np.random.default_rng(3)
    state = W.QuditState.normalized(rng.normal(size=d) + 1j * rng.normal(size=d))
    cfg = make(d=d, state=state, lam=0.7, mu=0.6, delay=T)
    grid, trunc = O.ModeGrid(1, 0.9), O.FockTruncation(25)
    (a,), _ = O.discretize_amplitudes(cfg.profile_a, grid, "A")
    (b,), _ = O.discretize_amplitudes(cfg.profile_b, grid, "B")
    U = W.root_of_unity(d)
    xb = W.x_basis(d)                     # rows are <z|x_j> conjugated: xb[j, k] = <z_k|x_j>
    rot = np.exp(-1j * grid.omegas[0] * T)
    want = np.zeros((d, trunc.levels), complex)
    for i in range(d):
        xi = U ** (-i) * b
        for j in range(d):
            zeta = U ** (-j) * a * rot
            coeff = xb[j, i] * np.vdot(xb[j], state.amplitudes)
            # D(xi)|zeta> = exp(i Im(xi conj(zeta))) |xi + zeta>
            want[i] += coeff * np.exp(1j * np.imag(xi * np.conj(zeta))) * O.coherent_column(xi + zeta, trunc)
    run = O.initial_joint_state(state, 1, trunc)
    run = O.apply_u_a(run, cfg, grid, trunc)
    run = O.apply_u_b(O.free_evolve(run, grid, T), cfg, grid, trunc)
    assert np.abs(run.tensor - want).max() < 1e-8


@pytest.mark.parametrize("d", [2, 3, 5])
def test_quantum_matches_mode_sum(d):
    cfg = make(d=d)
    rep = O.oracle_report(cfg, GRID, TRUNC)
    assert rep["pass"], rep["relative_gaps"]
    assert max(rep["norm_errors"]) < 1e-9
    assert max(rep["truncation_tails"]) < 1e-8
    assert np.allclose(rep["measured"]["outcome_probabilities"], 1 / d, atol=1e-9)


def test_trivial_runs():
    _, de = O.run_quantum(make(mu=0.0), GRID, TRUNC)
    assert abs(de) < 1e-10
    run = O.simulate(make(state=W.x_eigenstate(3, 0)), GRID, TRUNC)
    assert abs(run.delta_e - run.switching) < 1e-8


def test_classical_outcomes_carry_information():
    rng = np.random.default_rng(2)
    state = W.QuditState.normalized(rng.normal(size=2) + 1j * rng.normal(size=2))
    cfg = make(d=2, state=state)
    grid = O.ModeGrid(1, 1.2)
    cl = O.run_classical(cfg, grid, TRUNC)
    _, de = O.run_quantum(cfg, grid, TRUNC)
    per = cl.delta_e_by_outcome
    assert abs(per[0] - per[1]) > 1e-3
    assert abs(cl.delta_e - de) < 1e-8
    assert abs(cl.probabilities.sum() - 1) < 1e-12
    # for an X Z^dag eigenstate the outcomes are equiprobable
    mub = O.run_classical(make(d=2), grid, TRUNC)
    assert np.allclose(mub.probabilities, 0.5, atol=1e-9)
    assert abs(mub.delta_e - O.run_quantum(make(d=2), grid, TRUNC)[1]) < 1e-8


def test_branch_overlap_law():
    amps = np.array([0.5 + 0.2j, -0.3j])
    s = np.sum(np.abs(amps) ** 2)
    for d in (2, 3, 5, 7):
        ov = O.branch_overlaps(amps, d, TRUNC)
        m = np.arange(d)
        law = np.exp((W.root_of_unity(d) ** (m[:, None] - m[None, :]) - 1) * s)
        assert np.abs(ov - law).max() < 1e-7


def test_weyl_noise_application():
    cfg = make()
    psi = O.apply_u_a(O.initial_joint_state(cfg.initial_state, 2, TRUNC), cfg, GRID, TRUNC)
    same = O.apply_weyl_noise(psi, WeylNoiseModel.noiseless(3), seed=1)
    assert np.array_equal(same.tensor, psi.tensor)
    # Z^a X^b against the dense qudit operator
    op = W.clock(3).entries @ W.clock(3).entries @ W.shift(3).entries
    got = O.apply_weyl(psi, 2, 1).tensor
    assert np.abs(got - np.tensordot(op, psi.tensor, axes=([1], [0]))).max() < 1e-14
    with pytest.raises(ValueError):
        O.apply_weyl_noise(psi, WeylNoiseModel.noiseless(2), seed=1)
    assert O.sample_weyl(WeylNoiseModel.noiseless(3), 5) == (0, 0)


def test_pure_a_noise_leaves_teleport_unchanged():
    cfg = make()
    clean = O.simulate(cfg, GRID, TRUNC).teleport
    for a in range(3):
        assert abs(O.simulate(cfg, GRID, TRUNC, noise=(a, 0)).teleport - clean) < 1e-12
    noise = WeylNoiseModel(np.array([[0.2, 0, 0], [0.5, 0, 0], [0.3, 0, 0]]))
    mean, err = O.noisy_teleport_mc(cfg, GRID, TRUNC, noise, 2000, 3)
    assert abs(mean - clean) < 1e-12 and err < 1e-12


def test_noise_mc_is_deterministic_and_close():
    cfg = make()
    noise = WeylNoiseModel(np.array([[0.6, 0.1, 0.1], [0.1, 0, 0], [0.1, 0, 0]]))
    clean = O.simulate(cfg, GRID, TRUNC).teleport
    m1 = O.noisy_teleport_mc(cfg, GRID, TRUNC, noise, 20000, 11)
    m2 = O.noisy_teleport_mc(cfg, GRID, TRUNC, noise, 20000, 11)
    assert m1 == m2
    assert abs(m1[0] / (clean * noise_factor(noise)) - 1) < 2e-2


def test_config_hash_stable():
    assert O.config_hash(make()) == O.config_hash(make())
    assert O.config_hash(make()) != O.config_hash(make(delay=2.0))
    assert len(O.config_hash(make())) == 16
