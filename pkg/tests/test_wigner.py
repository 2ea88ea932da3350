import struct
import warnings

import numpy as np
import pytest

from quditqet import weyl as Wq
from quditqet import wigner as Wg
from oracles import fock_wigner


def test_degenerate_and_qubit_cats():
    one = Wg.cat_state(1, 1.5 + 0.5j)
    assert one.d == 1 and one.displacements[0] == 1.5 + 0.5j
    # |z_0> initial gives the even cat (|a> + |-a>)/N
    even = Wg.cat_state(2, 2.5, Wq.z_eigenstate(2), 0)
    c = even.coefficients
    assert abs(c[0] - c[1]) < 1e-14
    assert np.allclose(even.displacements, [2.5, -2.5])
    # |x_0> initial puts all weight on one branch
    single = Wg.cat_state(2, 2.5, Wq.x_eigenstate(2, 0), 0)
    assert abs(single.coefficients[1]) < 1e-14
    with pytest.raises(ValueError):
        Wg.cat_state(3, 1.0, outcome=3)
    with pytest.raises(ValueError):
        Wg.CatState(np.array([1.0, 1.0]), np.array([0.0, 3.0]))


@pytest.mark.parametrize("d,alpha,init", [(1, 0.8 - 0.3j, None), (2, 1.2, "z"), (3, 1.0, None),
                                         (4, 0.9 + 0.4j, "random")])
def test_closed_form_matches_fock_parity(d, alpha, init):
    rng = np.random.default_rng(d)
    if init == "z":
        initial = Wq.z_eigenstate(d)
    elif init == "random":
        initial = Wq.QuditState.normalized(rng.normal(size=d) + 1j * rng.normal(size=d))
    else:
        initial = None
    st = Wg.cat_state(d, alpha, initial) if d > 1 else Wg.cat_state(1, alpha)
    q = rng.uniform(-3, 3, 12)
    p = rng.uniform(-3, 3, 12)
    ref = fock_wigner(st.coefficients, st.displacements, q, p, n_max=60)
    assert np.abs(Wg.wigner_at(st, q, p) - ref).max() < 1e-9


def test_coherent_peak_and_even_cat_fringe():
    a = 1.1 - 0.7j
    st = Wg.cat_state(1, a)
    q0, p0 = np.sqrt(2) * a.real, np.sqrt(2) * a.imag
    assert abs(Wg.wigner_at(st, np.array([q0]), np.array([p0]))[0] - 1 / np.pi) < 1e-14
    even = Wg.cat_state(2, 2.5, Wq.z_eigenstate(2))
    w0 = Wg.wigner_at(even, np.array([0.0]), np.array([0.0]))[0]
    assert w0 > 0
    # an even cat is a parity eigenstate, so W(0, 0) = <parity> / pi = 1 / pi
    assert abs(w0 - 1 / np.pi) < 1e-12
    odd = Wg.CatState(np.array([1, -1]) / np.sqrt(2 * (1 - np.exp(-2 * 2.5 ** 2))), np.array([2.5, -2.5]))
    assert abs(Wg.wigner_at(odd, np.array([0.0]), np.array([0.0]))[0] + 1 / np.pi) < 1e-12


def test_grid_orientation_and_reality():
    st = Wg.cat_state(3, 1.5)
    q = np.linspace(-4, 4, 9)
    p = np.linspace(-3, 3, 7)
    with pytest.warns(Wg.CoverageWarning):
        g = Wg.wigner_grid(st, (-4, 4), (-3, 3), (9, 7))
    assert g.shape == (7, 9) and g.dtype == float
    qq, pp = np.meshgrid(q, p)
    assert np.abs(g - Wg.wigner_at(st, qq, pp)).max() < 1e-14


@pytest.mark.parametrize("d", [4, 8, 12, 16])
def test_normalization_at_figure_resolution(d):
    st, q, p, w = Wg.figure_panel(d)
    assert w.shape == (512, 512)
    assert abs(Wg.grid_integral(w, q, p) - 1) < 1e-3


def test_coverage_warning():
    st = Wg.cat_state(4, 2.5)
    with pytest.warns(Wg.CoverageWarning, match="mass deficit"):
        Wg.wigner_grid(st, (-2, 2), (-2, 2), 64)
    ext = Wg.required_extent(st)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        Wg.wigner_grid(st, (-ext, ext), (-ext, ext), 64)


def test_raster_round_trip(tmp_path):
    st, q, p, w = Wg.figure_panel(4, resolution=32)
    path = tmp_path / "w.wigr"
    Wg.write_raster(path, w[:20])
    raw = path.read_bytes()
    assert raw[:4] == b"WIGR"
    assert struct.unpack("<II", raw[4:12]) == (20, 32)
    assert len(raw) == 16 + 20 * 32 * 8
    assert np.array_equal(Wg.read_raster(path), w[:20])
    bad = tmp_path / "bad.wigr"
    bad.write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(ValueError):
        Wg.read_raster(bad)


def test_csv_output(tmp_path):
    q = np.linspace(-1, 1, 3)
    p = np.linspace(-2, 2, 4)
    vals = np.arange(12.0).reshape(4, 3)
    Wg.write_csv(tmp_path / "w.csv", vals, q, p)
    data = np.loadtxt(tmp_path / "w.csv", delimiter=",", skiprows=1)
    assert (tmp_path / "w.csv").read_text().startswith("q,p,W\n")
    assert np.array_equal(data[:, 2], vals.ravel())
    assert data[4, 0] == q[1] and data[4, 1] == p[1]


@pytest.mark.parametrize("d", [4, 8, 12, 16])
def test_uniform_cat_lobes(d):
    st = Wg.cat_state(d, 2.5, Wq.z_eigenstate(d))
    angles, heights = Wg.find_lobes(st)
    assert angles.size == d
    expected = 2 * np.pi * np.arange(d) / d
    diff = np.angle(np.exp(1j * (np.sort(angles)[:, None] - expected[None, :])))
    assert np.abs(diff).min(axis=1).max() < 2 * np.pi / 4096 + 1e-12
    assert np.all(heights > 0.5 / (np.pi * d))


def test_isotropy_and_moments():
    vac = Wg.cat_state(1, 0.0)
    mean, cov = Wg.quadrature_covariance(vac)
    assert np.allclose(mean, 0) and np.allclose(cov, 0.5 * np.eye(2))
    assert Wg.isotropy_metric(Wg.cat_state(1, 2.0 + 1j)) == pytest.approx(1.0)
    # an even qubit cat is stretched along q
    assert Wg.isotropy_metric(Wg.cat_state(2, 2.5, Wq.z_eigenstate(2))) < 0.1
    # uniform cats with d >= 3 have isotropic covariance
    assert Wg.isotropy_metric(Wg.cat_state(5, 2.5, Wq.z_eigenstate(5))) == pytest.approx(1.0, abs=1e-9)
    metrics = [Wg.isotropy_metric(Wg.cat_state(d, 2.5)) for d in (4, 8, 12, 16)]
    assert all(a > b for a, b in zip(metrics, metrics[1:]))


def test_angular_variance_d4_exceeds_d12():
    assert Wg.angular_variance(Wg.cat_state(4, 2.5)) > Wg.angular_variance(Wg.cat_state(12, 2.5))


@pytest.mark.parametrize("theta", [0.3, np.pi / 5, 2.0])
def test_rotational_covariance(theta):
    st = Wg.cat_state(5, 1.8 + 0.4j)
    assert Wg.rotational_covariance_error(st, theta) < 1e-6
