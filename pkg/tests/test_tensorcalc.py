import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_ball
from massaspect.chartlab import make_wang_metric
from massaspect.eigenfunctions import BoundaryFunction
from massaspect.geometry import LapseFunction, rho_ball
from massaspect.tensorcalc import (
    MetricPerturbation,
    NotPositiveDefiniteError,
    christoffel,
    conformal_killing,
    covariant_derivative,
    curvature_sample,
    divergence,
    einstein_linear,
    inverse_correction,
    lie_derivative_b,
    scal_exact,
    scal_linear,
)

N = 3
POINTS = np.array([[0.3, 0.1, 0.0], [0.2, -0.1, 0.1], [-0.1, 0.35, 0.2]])


def background(y):
    return np.eye(N)[None] / rho_ball(y)[:, None, None] ** 2


def smooth_field(y):
    """A smooth symmetric perturbation concentrated near the origin."""
    w = 0.1 * np.exp(-4.0 * np.sum(y**2, -1)) / rho_ball(y) ** 2
    yy = np.einsum("ni,nj->nij", y, y)
    cross = np.einsum("ni,nj->nij", y, y[:, [1, 2, 0]])
    return w[:, None, None] * (np.eye(N) + 3.0 * yy + cross + np.swapaxes(cross, 1, 2))


def bump_field(x):
    c = np.array([0.3, 0.0, 0.0])
    w = np.exp(-np.sum((x - c) ** 2, axis=-1) / 0.05)[:, None]
    return 0.02 * w * np.stack([1.0 + x[:, 1], x[:, 0] ** 2, -x[:, 2]], axis=-1)


def conformal(u, rel_step=1e-2):
    return MetricPerturbation(lambda y: u(y)[:, None, None] * background(y), N, rel_step=rel_step)


# ---------------------------------------------------------------------- coordinate oracle


def _d(f, x, h):
    out = []
    for k in range(x.shape[1]):
        dx = np.zeros_like(x)
        dx[:, k] = h
        out.append((-f(x + 2 * dx) + 8 * f(x + dx) - 8 * f(x - dx) + f(x - 2 * dx)) / (12 * h))
    return np.stack(out, 1)


def _gamma(g, x):
    dg = _d(g, x, 1e-4)
    T = np.einsum("nilj->nlij", dg) + np.einsum("njil->nlij", dg) - dg
    return 0.5 * np.einsum("nkl,nlij->nkij", np.linalg.inv(g(x)), T)


def coordinate_ricci(g, x):
    """Ricci tensor of a coordinate metric by finite differences, no hyperbolic structure used."""
    G = _gamma(g, x)
    dG = _d(lambda y: _gamma(g, y), x, 1e-3)
    return (np.einsum("nkkij->nij", dG) - np.einsum("njkik->nij", dG)
            + np.einsum("nkkl,nlij->nij", G, G) - np.einsum("nkjl,nlik->nij", G, G))


def coordinate_scal(g, x):
    return np.einsum("nij,nij->n", np.linalg.inv(g(x)), coordinate_ricci(g, x))


# ---------------------------------------------------------------------- inverse correction


@pytest.mark.parametrize(
    "e, f",
    [
        (np.zeros((3, 3)), np.zeros((3, 3))),
        (0.5 * np.eye(3), -np.eye(3) / 3.0),
    ],
)
def test_inverse_correction_examples(e, f):
    np.testing.assert_allclose(inverse_correction(e).f, f, atol=1e-15)


def test_inverse_correction_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError) as info:
        inverse_correction(np.diag([-1.5, 0.0, 0.0]))
    assert info.value.args


def symmetric_small():
    """Symmetric matrices with operator norm at most 1/2."""

    def clip(a):
        a = a + a.T
        return a / max(1.0, 2.0 * np.linalg.norm(a, 2))

    return arrays(np.float64, (3, 3), elements=st.floats(-1.0, 1.0)).map(clip)


@settings(max_examples=100, deadline=None)
@given(symmetric_small())
def test_inverse_correction_fixed_point_and_bound(E):
    f = inverse_correction(E).f
    np.testing.assert_allclose(f, -E - E @ f, atol=1e-14)
    np.testing.assert_allclose((np.eye(3) + E) @ (np.eye(3) + f), np.eye(3), atol=1e-14)
    assert np.linalg.norm(f) <= 2.0 * np.linalg.norm(E) + 1e-15


def test_inverse_correction_with_rho():
    rho = 0.25
    e = 0.3 * np.eye(3) / rho**2
    f = inverse_correction(e, rho).f
    g_inv = rho**2 * np.eye(3) + f
    np.testing.assert_allclose(g_inv @ (np.eye(3) / rho**2 + e), np.eye(3), atol=1e-13)


# ---------------------------------------------------------------------- covariant derivative


def test_background_metric_is_parallel(rng):
    x = random_ball(rng, 10)
    D = covariant_derivative(background, x)
    assert np.abs(D).max() < 1e-6 * np.abs(background(x)).max()


def test_derivative_of_constant_function_vanishes(rng):
    x = random_ball(rng, 5)
    np.testing.assert_allclose(covariant_derivative(lambda y: np.ones(len(y)), x), 0.0, atol=1e-12)


def test_hessian_of_v0_is_v0_b(rng):
    V = LapseFunction.basis(N, 0)
    x = random_ball(rng, 10)
    H = covariant_derivative(lambda y: V.value_grad(y)[1], x)
    ref = V.value(x)[:, None, None] * background(x)
    assert np.max(np.abs(H - ref) / np.abs(ref).max(axis=(1, 2))[:, None, None]) < 1e-6


def test_leibniz_rule(rng):
    V = LapseFunction([0.5, 1.0, 0.0, -1.0])
    x = random_ball(rng, 6, r_max=3.0)
    D_prod = covariant_derivative(lambda y: V.value(y)[:, None, None] * smooth_field(y), x)
    _, dV = V.value_grad(x)
    De = covariant_derivative(smooth_field, x)
    rhs = dV[:, :, None, None] * smooth_field(x)[:, None] + V.value(x)[:, None, None, None] * De
    np.testing.assert_allclose(D_prod, rhs, atol=1e-7 * np.abs(rhs).max())


def test_partials_match_five_point_oracle(wang_const, rng):
    x = random_ball(rng, 8, r_min=2.0, r_max=6.0)
    oracle = MetricPerturbation(wang_const.e, N, de=lambda y: _d(wang_const.e, y, 1e-5))
    scale = np.abs(oracle.partial(x)).max()
    np.testing.assert_allclose(wang_const.partial(x), oracle.partial(x), atol=1e-6 * scale)


# ---------------------------------------------------------------------- connection


def test_christoffel_vanishes_for_zero_perturbation(rng):
    x = random_ball(rng, 5)
    np.testing.assert_allclose(christoffel(MetricPerturbation.zero(N), x), 0.0, atol=1e-15)


def test_christoffel_symmetric_and_metric_compatible():
    e = MetricPerturbation(smooth_field, N, rel_step=1e-2)
    G = christoffel(e, POINTS)
    np.testing.assert_allclose(G, np.swapaxes(G, 2, 3), atol=1e-12)
    # [DERIVED] nabla^g g = 0 with nabla^g = D + Gamma and D b = 0
    g = background(POINTS) + e(POINTS)
    Dg = e.covariant(POINTS)
    nabla = Dg - np.einsum("nlki,nlj->nkij", G, g) - np.einsum("nlkj,nil->nkij", G, g)
    assert np.abs(nabla).max() < 1e-8 * np.abs(Dg).max()


# ---------------------------------------------------------------------- curvature


def test_linear_operators_vanish_at_zero(rng):
    x = random_ball(rng, 4)
    zero = MetricPerturbation.zero(N)
    np.testing.assert_allclose(scal_linear(zero, x), 0.0, atol=1e-12)
    np.testing.assert_allclose(einstein_linear(zero, x), 0.0, atol=1e-12)
    np.testing.assert_allclose(scal_exact(zero, x), -6.0, atol=1e-12)


def test_scal_linear_of_conformal_lapse_squared():
    # [DERIVED] e = u b with u = (V^0)^2: Laplacian u = 2(n+1) u - 2 gives (n-1)(2 - (n+2) u)
    V = LapseFunction.basis(N, 0)
    u = lambda y: V.value(y) ** 2  # noqa: E731
    got = scal_linear(conformal(u), POINTS)
    np.testing.assert_allclose(got, (N - 1) * (2.0 - (N + 2) * u(POINTS)), rtol=1e-6)


def test_scal_linear_of_conformal_lapse_vanishes():
    V = LapseFunction.basis(N, 0)
    got = scal_linear(conformal(V.value), POINTS)
    assert np.abs(got).max() < 1e-6 * V.value(POINTS).max()


def test_scal_linear_annihilates_gauge_perturbations():
    e = MetricPerturbation(lambda y: lie_derivative_b(bump_field, y, 1e-2), N, rel_step=1e-2)
    assert np.abs(scal_linear(e, POINTS)).max() < 1e-4


@pytest.mark.parametrize("t", [0.05, 0.2])
def test_scal_exact_matches_coordinate_oracle(t):
    e = MetricPerturbation(lambda y: t * smooth_field(y), N, rel_step=1e-2)
    ref = coordinate_scal(lambda y: background(y) + t * smooth_field(y), POINTS)
    np.testing.assert_allclose(scal_exact(e, POINTS), ref, rtol=1e-6)


def test_einstein_linear_matches_coordinate_oracle():
    def einstein(g, y):
        R = coordinate_ricci(g, y)
        gy = g(y)
        S = np.einsum("nij,nij->n", np.linalg.inv(gy), R)
        return R - 0.5 * S[:, None, None] * gy - 0.5 * (N - 1) * (N - 2) * gy

    e = MetricPerturbation(smooth_field, N, rel_step=1e-2)
    lin = einstein_linear(e, POINTS)
    # second-order difference quotient in t cancels the O(t) term
    q = [(einstein(lambda y, t=t: background(y) + t * smooth_field(y), POINTS)
          - einstein(background, POINTS)) / t for t in (1e-2, 5e-3)]
    np.testing.assert_allclose(2 * q[1] - q[0], lin, atol=1e-4 * np.abs(lin).max())


def test_einstein_trace_identity(rng):
    for scale in (0.5, 1.0, 2.0):
        e = MetricPerturbation(lambda y, s=scale: s * smooth_field(y), N, rel_step=1e-2)
        x = random_ball(rng, 10, r_max=1.5)
        tr = rho_ball(x) ** 2 * np.einsum("nii->n", einstein_linear(e, x))
        np.testing.assert_allclose(tr, (1 - N / 2) * scal_linear(e, x), atol=1e-6 * np.abs(tr).max())


def test_linearised_bianchi_identity():
    e = MetricPerturbation(smooth_field, N, rel_step=1e-2)
    DG = covariant_derivative(lambda y: einstein_linear(e, y), POINTS, 1e-2)
    div = rho_ball(POINTS)[:, None] ** 2 * np.einsum("niij->nj", DG)
    assert np.abs(div).max() < 1e-3 * np.abs(DG).max()


def test_quadratic_remainder():
    x = POINTS[:1]
    rem = []
    ts = (0.4, 0.2, 0.1, 0.05)
    for t in ts:
        rem.append(curvature_sample(MetricPerturbation(lambda y, t=t: t * smooth_field(y), N, rel_step=1e-2),
                                    x).remainder[0])
    slope = np.polyfit(np.log(ts), np.log(np.abs(rem)), 1)[0]
    assert slope > 1.9
    assert np.all(np.abs(np.array(rem) / np.array(ts) ** 2) < 10.0)


@pytest.mark.slow
def test_wang_scalar_curvature_decay():
    e = make_wang_metric(BoundaryFunction.callback(lambda th: 1.0 + 0.4 * th[..., 1], N))
    rs = np.array([3.0, 4.0, 5.0, 6.0])
    theta = np.array([0.6, 0.0, 0.8])
    x = np.tanh(0.5 * rs)[:, None] * theta
    dev = np.abs(scal_exact(e, x) + N * (N - 1))
    rho = rho_ball(x)
    slope = np.polyfit(np.log(rho), np.log(dev), 1)[0]
    assert slope >= N + 0.8


def test_wang_perturbation_norm_decays_like_rho_to_the_n(wang_const):
    r = np.linspace(4.0, 9.0, 6)
    x = np.tanh(0.5 * r)[:, None] * np.array([0.0, 0.6, 0.8])
    ratio = wang_const.norm_b(x) / rho_ball(x) ** N
    assert ratio.min() > 0.0
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-6)


def test_equivalence_constant_and_indefinite_metric(rng):
    x = random_ball(rng, 10)
    e = MetricPerturbation(lambda y: 0.5 * background(y), N)
    assert e.equivalence_constant(x) == pytest.approx(1.5)
    bad = MetricPerturbation(lambda y: -2.0 * background(y), N)
    with pytest.raises(NotPositiveDefiniteError):
        bad.equivalence_constant(x)
    with pytest.raises(NotPositiveDefiniteError):
        scal_exact(bad, x)


# ---------------------------------------------------------------------- Lie derivative and conformal Killing fields


def rotation_field(y):
    return np.stack([-y[:, 1], y[:, 0], np.zeros(len(y))], axis=-1)


def test_killing_field_has_zero_lie_derivative(rng):
    x = random_ball(rng, 10)
    assert np.abs(lie_derivative_b(rotation_field, x)).max() < 1e-8 * np.abs(background(x)).max()


def test_lie_derivative_of_conformal_field(rng):
    for mu in range(N + 1):
        x = random_ball(rng, 8, r_max=4.0)
        X = lambda y, mu=mu: conformal_killing(mu, y).vector  # noqa: E731
        L = lie_derivative_b(X, x)
        V = LapseFunction.basis(N, mu).value(x)
        ref = 2.0 * V[:, None, None] * background(x)
        assert np.abs(L - ref).max() < 1e-6 * np.abs(ref).max()


def test_lie_derivative_is_linear_and_symmetric(rng):
    x = random_ball(rng, 5, r_max=2.0)
    a = lie_derivative_b(bump_field, x)
    b = lie_derivative_b(rotation_field, x)
    c = lie_derivative_b(lambda y: 2.0 * bump_field(y) - rotation_field(y), x)
    np.testing.assert_allclose(c, 2 * a - b, atol=1e-9)
    np.testing.assert_allclose(a, np.swapaxes(a, 1, 2), atol=1e-14)


@pytest.mark.parametrize("mu", range(4))
def test_conformal_killing_divergence(rng, mu):
    x = random_ball(rng, 20)
    s = conformal_killing(mu, x)
    V = LapseFunction.basis(N, mu).value(x)
    np.testing.assert_allclose(s.divergence, N * V, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(divergence(lambda y: conformal_killing(mu, y).vector, x), N * V,
                               rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(s.derivative, V[:, None, None] * np.eye(N), rtol=1e-10, atol=1e-10)


def test_conformal_killing_examples(rng):
    s = conformal_killing(0, np.zeros(3))
    np.testing.assert_allclose(s.vector, 0.0, atol=1e-15)
    x = random_ball(rng, 50, r_max=10.0)
    norm = np.linalg.norm(conformal_killing(1, x).vector, axis=1) / rho_ball(x)
    # |X|_b rho stays bounded
    assert np.max(norm * rho_ball(x)) < 2.0
