import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, special

from robin_lab.oracles import bessel_i, bessel_j, bessel_j_prime, disk_robin, interval_robin, rectangle_robin


@pytest.mark.parametrize("m", [0, 1, 2, 5, 12, 22])
def test_bessel_j_against_scipy(m):
    x = np.linspace(0.0, 40.0, 401)
    ours = np.array([bessel_j(m, t) for t in x])
    np.testing.assert_allclose(ours, special.jv(m, x), atol=5e-15)
    ours_p = np.array([bessel_j_prime(m, t) for t in x[1:]])
    np.testing.assert_allclose(ours_p, special.jvp(m, x[1:]), atol=5e-15)


@pytest.mark.parametrize("m", [0, 1, 3])
def test_bessel_i_against_scipy(m):
    x = np.linspace(0.0, 8.0, 81)
    np.testing.assert_allclose([bessel_i(m, t) for t in x], special.iv(m, x), rtol=1e-14)


def test_interval_neumann_closed_form():
    mu = interval_robin(0.0, 1.0, 8).values()
    np.testing.assert_allclose(mu, (np.arange(8) * np.pi) ** 2, atol=1e-10)


def test_interval_negative_mode():
    spectrum = interval_robin(-1.0, 1.0, 6)
    assert spectrum.negative_count() == 1
    assert spectrum.max_residual <= 1e-12
    tau = mpmath.findroot(lambda t: t * mpmath.tanh(t / 2) - 1, 1.5)
    assert spectrum.values()[0] == pytest.approx(-float(tau) ** 2, rel=1e-14)


def test_interval_dirichlet_limit():
    mu = interval_robin(1e6, 1.0, 3).values()
    assert mu[0] == pytest.approx(math.pi**2, rel=1e-4)


def test_square_examples():
    lam = rectangle_robin(0.0, 1, 1, 4).values()
    np.testing.assert_allclose(lam, [0, np.pi**2, np.pi**2, 2 * np.pi**2], atol=1e-10)
    mu1 = interval_robin(-1.0, 1.0, 2).values()[0]
    lam1 = rectangle_robin(-1.0, 1, 1, 2).values()[0]
    assert lam1 == 2 * mu1 and lam1 < 0
    split = rectangle_robin(0.0, 1.0, 2.0, 4).values()
    assert split[1] == pytest.approx(np.pi**2 / 4) and split[2] == pytest.approx(np.pi**2)


def test_rectangle_multiplicities_labels():
    spectrum = rectangle_robin(0.0, 1, 1, 6)
    assert [md.multiplicity for md in spectrum.modes][:3] == [1, 2, 1]
    assert spectrum.modes[1].label == "(1,2);(2,1)"


def test_disk_neumann():
    lam = disk_robin(0.0, 1.0, 3).values()
    jp11 = special.jnp_zeros(1, 1)[0]
    assert lam[0] == 0.0
    np.testing.assert_allclose(lam[1:], jp11**2, rtol=1e-14)


def test_disk_negative_radial_mode():
    lam = disk_robin(-1.0, 1.0, 4)
    tau = mpmath.findroot(lambda t: t * mpmath.besseli(1, t) - mpmath.besseli(0, t), 1.0)
    assert lam.values()[0] == pytest.approx(-float(tau) ** 2, rel=1e-14)
    assert lam.negative_count() == 1


def test_disk_dirichlet_limit():
    lam = disk_robin(1e6, 1.0, 1).values()
    assert lam[0] == pytest.approx(special.jn_zeros(0, 1)[0] ** 2, rel=1e-4)


def scipy_disk_spectrum(beta, count, m_max=20):
    """Independent disk oracle: scipy Bessel functions and brentq."""
    vals = []
    for m in range(m_max + 1):
        f = lambda k: k * special.jvp(m, k) + beta * special.jv(m, k)  # noqa: E731
        grid = np.linspace(1e-6, 40.0, 8001)
        fv = f(grid)
        for a, b, fa, fb in zip(grid[:-1], grid[1:], fv[:-1], fv[1:]):
            if fa * fb < 0:
                k = optimize.brentq(f, a, b, xtol=1e-15)
                vals += [k * k] * (1 if m == 0 else 2)
    return np.sort(vals)[:count]


@pytest.mark.parametrize("beta", [0.5, 1.0, 3.0])
def test_disk_matches_independent_root_finder(beta):
    ours = disk_robin(beta, 1.0, 12).values()
    np.testing.assert_allclose(ours, scipy_disk_spectrum(beta, 12), rtol=1e-12)


def test_disk_scaling_with_radius():
    # lambda(R, beta) = lambda(1, beta R) / R^2
    a = disk_robin(0.7, 2.0, 6).values()
    b = disk_robin(1.4, 1.0, 6).values() / 4.0
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_disk_m_max_guard():
    with pytest.raises(ValueError, match="m_max"):
        disk_robin(0.0, 1.0, 40, m_max=3)


def test_write_csv(tmp_path):
    spectrum = disk_robin(-1.0, 1.0, 5)
    spectrum.write_csv(tmp_path / "o.csv")
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0] == "rank,lambda,multiplicity,label,residual"
    assert lines[1].startswith("1,-2.58656285917809")


@settings(max_examples=40, deadline=None)
@given(st.floats(-4.0, 4.0), st.floats(0.3, 3.0))
def test_interval_residuals_and_order(beta, L):
    spectrum = interval_robin(beta, L, 8)
    mu = spectrum.values()
    assert spectrum.max_residual <= 1e-12
    assert np.all(np.diff(mu) > 0)
    # at most two negative modes in 1D, one per parity
    assert spectrum.negative_count() == (beta < 0) + (beta < -2.0 / L)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(0.01, 1.0))
def test_rectangle_monotone_in_beta(beta, d):
    lo = rectangle_robin(beta, 1.0, 1.3, 6).values()
    hi = rectangle_robin(beta + d, 1.0, 1.3, 6).values()
    assert np.all(hi >= lo - 1e-12)
