import numpy as np
import pytest

from flab import (
    Lattice,
    OperatorStencil,
    apply_forward,
    apply_generator,
    build_rates,
    dirichlet_identity_check,
    gamma,
    gamma2_closed,
    gamma2_definitional,
    interior_slice,
    make_potential,
    quotient_defect,
    quotient_defect_quadrature,
    stationary_measure,
)

from conftest import random_poly_potential


def dense_generator(r):
    """Explicit tridiagonal matrix of the generator; the test-side oracle."""
    n = r.n_nodes
    mat = np.diag(-(r.alpha + r.beta))
    if n > 1:
        mat += np.diag(r.alpha[:-1], k=1) + np.diag(r.beta[1:], k=-1)
    return mat


@pytest.fixture(scope="module")
def chain(ou, sg):
    lat = Lattice(0.2, 25)
    r = build_rates(ou, sg, lat)
    m = stationary_measure(ou, lat)
    return lat, r, m


def test_generator_kills_constants(chain):
    lat, r, m = chain
    assert np.max(np.abs(apply_generator(r, np.full(lat.n_nodes, 2.5)))) == 0.0


def test_generator_flat_linear(sg):
    u0 = make_potential("custom_poly", [0.0])
    lat = Lattice(1.0, 5)
    r = build_rates(u0, sg, lat)
    lf = apply_generator(r, lat.nodes)
    assert np.max(np.abs(lf[1:-1])) < 1e-14


def test_generator_matches_dense_matrix(chain):
    lat, r, m = chain
    rng = np.random.default_rng(0)
    mat = dense_generator(r)
    for _ in range(5):
        f = rng.standard_normal(lat.n_nodes)
        assert np.max(np.abs(apply_generator(r, f) - mat @ f)) < 1e-14 * np.max(np.abs(mat @ f) + 1)


def test_forward_stationarity(chain):
    lat, r, m = chain
    out = apply_forward(r, m.weights)
    assert np.max(np.abs(out)) < 1e-14 * np.max(r.alpha)


def test_forward_mass_conservation(chain):
    lat, r, m = chain
    rng = np.random.default_rng(1)
    for _ in range(10):
        rho = rng.random(lat.n_nodes)
        assert abs(np.sum(apply_forward(r, rho))) <= 1e-13 * np.sum(np.abs(rho) * r.max_rate)


def test_adjointness(chain):
    lat, r, m = chain
    rng = np.random.default_rng(2)
    for _ in range(10):
        f = rng.standard_normal(lat.n_nodes)
        rho = rng.standard_normal(lat.n_nodes)
        a = float(apply_generator(r, f) @ rho)
        b = float(f @ apply_forward(r, rho))
        assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


def test_pi_symmetry(chain):
    lat, r, m = chain
    rng = np.random.default_rng(3)
    for _ in range(10):
        f = rng.standard_normal(lat.n_nodes)
        g = rng.standard_normal(lat.n_nodes)
        a = float((g * apply_generator(r, f)) @ m.weights)
        b = float((f * apply_generator(r, g)) @ m.weights)
        assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


def test_gamma_constants_and_linear(sg):
    u0 = make_potential("custom_poly", [0.0])
    lat = Lattice(1.0, 5)
    r = build_rates(u0, sg, lat)
    assert np.max(np.abs(gamma(r, np.full(lat.n_nodes, 4.0), lat.nodes))) == 0.0
    g = gamma(r, lat.nodes, lat.nodes)
    assert np.allclose(g[1:-1], 1.0)


def test_gamma_definitional_formula(chain):
    lat, r, m = chain
    rng = np.random.default_rng(4)
    for _ in range(10):
        f = rng.standard_normal(lat.n_nodes)
        g = rng.standard_normal(lat.n_nodes)
        direct = gamma(r, f, g)
        via_l = 0.5 * (
            apply_generator(r, f * g) - f * apply_generator(r, g) - g * apply_generator(r, f)
        )
        scale = np.max(np.abs(direct)) + 1.0
        assert np.max(np.abs(direct - via_l)) <= 1e-12 * scale


def test_gamma_symmetric_bilinear_nonnegative(chain):
    lat, r, m = chain
    rng = np.random.default_rng(5)
    for _ in range(10):
        f, g, k = rng.standard_normal((3, lat.n_nodes))
        a, b = rng.standard_normal(2)
        assert np.allclose(gamma(r, f, g), gamma(r, g, f))
        lhs = gamma(r, a * f + b * g, k)
        rhs = a * gamma(r, f, k) + b * gamma(r, g, k)
        assert np.max(np.abs(lhs - rhs)) <= 1e-11 * (np.max(np.abs(rhs)) + 1)
        assert np.min(gamma(r, f, f)) >= 0.0


def test_gamma2_closed_matches_definitional(sg):
    rng = np.random.default_rng(6)
    for _ in range(5):
        u = random_poly_potential(rng)
        lat = Lattice(0.25, 16)
        r = build_rates(u, sg, lat)
        c = interior_slice(lat.n_nodes, 2)
        for _ in range(20):
            f = rng.standard_normal(lat.n_nodes)
            g = rng.standard_normal(lat.n_nodes)
            cl = gamma2_closed(r, f, g)
            df = gamma2_definitional(r, f, g)
            assert np.isnan(cl[0]) and np.isnan(cl[-1])
            rel = np.max(np.abs(cl[c] - df[c])) / max(np.max(np.abs(df[c])), 1e-300)
            assert rel <= 1e-10


def test_gamma2_trivial_cases(sg):
    u0 = make_potential("custom_poly", [0.0])
    lat = Lattice(1.0, 6)
    r = build_rates(u0, sg, lat)
    c = interior_slice(lat.n_nodes, 2)
    assert np.max(np.abs(gamma2_closed(r, lat.nodes, lat.nodes)[c])) < 1e-14
    const = np.full(lat.n_nodes, 3.0)
    assert np.max(np.abs(gamma2_closed(r, const, const)[c])) == 0.0
    assert np.max(np.abs(gamma2_definitional(r, const, const))) == 0.0


def test_gamma2_dropped_terms_are_squares(chain):
    # for f = g the closed form minus its two first-order terms is a sum of
    # three nonnegative square terms
    lat, r, m = chain
    rng = np.random.default_rng(7)
    a, b = r.alpha, r.beta
    n = lat.n_nodes
    c = interior_slice(n, 2)
    p1 = slice(3, n - 1)
    m1 = slice(1, n - 3)
    for _ in range(20):
        f = rng.standard_normal(n)
        g2 = gamma2_closed(r, f, f)
        dfp = f[p1] - f[c]
        dfm = f[c] - f[m1]
        first_order = 0.25 * a[c] * (3 * (b[p1] - b[c]) - (a[p1] - a[c])) * dfp ** 2 + 0.25 * b[c] * (
            (b[c] - b[m1]) - 3 * (a[c] - a[m1])
        ) * dfm ** 2
        assert np.min(g2[c] - first_order) >= -1e-12 * (np.max(np.abs(g2[c])) + 1)


def test_quotient_defect_unit_weight(chain):
    lat, r, m = chain
    rng = np.random.default_rng(8)
    f = rng.standard_normal(lat.n_nodes)
    w = np.ones(lat.n_nodes)
    assert np.max(np.abs(quotient_defect(r, f, w) + gamma(r, f, f))) < 1e-12 * r.max_rate


def test_quotient_defect_f_equals_w(chain):
    lat, r, m = chain
    w = np.exp(np.abs(lat.nodes) / 2.0)
    assert np.max(np.abs(quotient_defect(r, w, w))) == 0.0


def test_quotient_defect_three_way(chain):
    lat, r, m = chain
    rng = np.random.default_rng(9)
    for _ in range(100):
        f = rng.standard_normal(lat.n_nodes)
        w = np.exp(np.cumsum(rng.uniform(-0.05, 0.05, lat.n_nodes)))
        closed = quotient_defect(r, f, w)
        via_gamma = gamma(r, f * f / w, w) - gamma(r, f, f)
        quad = quotient_defect_quadrature(r, f, w)
        assert np.max(np.abs(closed - via_gamma) / (1.0 + np.abs(closed))) <= 1e-8
        assert np.max(np.abs(closed - quad) / (1.0 + np.abs(closed))) <= 1e-6
        assert np.max(closed) <= 0.0


def test_quotient_defect_nonpositive_wide_weights(chain):
    lat, r, m = chain
    rng = np.random.default_rng(10)
    for _ in range(50):
        f = 3.0 * rng.standard_normal(lat.n_nodes)
        w = np.exp(rng.uniform(-3, 3, lat.n_nodes))
        assert np.max(quotient_defect(r, f, w)) <= 1e-12


def test_quotient_defect_rejects_nonpositive_weight(chain):
    lat, r, m = chain
    w = np.ones(lat.n_nodes)
    w[3] = 0.0
    with pytest.raises(ValueError, match="positive"):
        quotient_defect(r, w.copy(), w)


def test_dirichlet_identity(chain):
    lat, r, m = chain
    rng = np.random.default_rng(11)
    assert dirichlet_identity_check(r, m, np.full(lat.n_nodes, 5.0)) == 0.0
    for _ in range(20):
        f = rng.standard_normal(lat.n_nodes)
        assert dirichlet_identity_check(r, m, f) <= 1e-12
    # support touching the reflecting edge keeps the identity
    f = np.zeros(lat.n_nodes)
    f[:3] = [1.0, -2.0, 0.5]
    f[-2:] = [4.0, -1.0]
    assert dirichlet_identity_check(r, m, f) <= 1e-12


def test_operator_stencil(chain, ou, sg):
    lat, r, m = chain
    st = OperatorStencil(r, 2)
    assert st.interior() == slice(2, lat.n_nodes - 2)
    tiny = build_rates(ou, sg, Lattice(1.0, 1))
    with pytest.raises(ValueError):
        OperatorStencil(tiny, 2).interior()
