import numpy as np
import pytest

from massaspect.chartlab import make_wang_metric
from massaspect.charges import (
    MAX_CUTOFF_RADIUS,
    PROFILES,
    QUINTIC,
    SEPTIC,
    CutoffFamily,
    RadialTestFunction,
    charge_adm,
    charge_integrand_U,
    charge_ricci,
    charge_surface,
    extrapolate,
    mass_aspect_project,
    mass_vector,
)
from massaspect.eigenfunctions import BoundaryFunction, Eigenfunction, KernelQuadrature, real_spherical_harmonic
from massaspect.geometry import LapseFunction
from massaspect.quadrature import annulus_rule, sphere_rule
from massaspect.tensorcalc import MetricPerturbation

V0 = LapseFunction.basis(3, 0)
RULE = sphere_rule(3, 8)
TWELVE_PI = 12.0 * np.pi


@pytest.fixture(scope="module")
def wang_charge(wang_const):
    return charge_adm(wang_const, V0)


# ---------------------------------------------------------------------- cutoffs


@pytest.mark.parametrize("profile", [QUINTIC, SEPTIC])
@pytest.mark.parametrize("n", [3, 4, 5])
def test_radial_identity(profile, n):
    assert CutoffFamily(profile).radial_identity(n) == pytest.approx(n, abs=1e-12)


@pytest.mark.parametrize("profile", list(PROFILES.values()))
def test_profile_shape(profile):
    t = np.linspace(-0.5, 1.5, 401)
    chi, d1, d2 = profile(t)
    assert np.all(np.diff(chi) <= 1e-15)
    np.testing.assert_allclose(chi[t <= 0], 1.0)
    np.testing.assert_allclose(chi[t >= 1], 0.0)
    # C^2 at the junctions
    for edge in (0.0, 1.0):
        vals = [np.asarray(v) for v in profile(np.array([edge - 1e-9, edge + 1e-9]))]
        assert np.abs(vals[1]).max() < 1e-6 and np.abs(vals[2]).max() < 1e-4
    # chi' is the derivative of chi
    inner = (t > 0.01) & (t < 0.99)
    np.testing.assert_allclose(np.gradient(chi, t)[inner], d1[inner], atol=1e-3)


def test_schedule_cap():
    with pytest.raises(ValueError):
        CutoffFamily(schedule=range(4, int(MAX_CUTOFF_RADIUS) + 1))
    assert CutoffFamily(schedule=range(4, int(MAX_CUTOFF_RADIUS))).schedule[-1] == MAX_CUTOFF_RADIUS - 1


# ---------------------------------------------------------------------- extrapolation


def test_extrapolation_recovers_exponential_limit():
    ks = np.arange(4.0, 11.0)
    vals = 3.0 + 0.7 * np.exp(-1.3 * ks)
    p, err, ok, _ = extrapolate(ks, vals)
    assert p == pytest.approx(3.0, abs=1e-10)
    assert ok and abs(vals[-1] - 3.0) <= err < 1e-5


def test_extrapolation_of_constant_samples():
    p, err, ok, diag = extrapolate([4, 5, 6, 7], [2.0] * 4)
    assert (p, err, ok) == (2.0, 0.0, True)
    assert "constant" in diag


def test_extrapolation_falls_back():
    p, err, ok, diag = extrapolate([4, 5, 6], [1.0, 1.5, 1.7])
    assert p == 1.7 and err == pytest.approx(0.2) and not ok
    assert "fewer" in diag
    noisy = [1.0, -1.0, 1.0, -1.0, 1.0]
    p, err, ok, diag = extrapolate(range(5), noisy)
    assert not ok and err >= 1.0


def test_error_estimate_is_honest(wang_charge):
    assert abs(wang_charge.last - wang_charge.extrapolated) <= wang_charge.error_estimate + 1e-12


# ---------------------------------------------------------------------- integrand


def test_integrand_vanishes_for_zero_data():
    A = annulus_rule(RULE, 4.0, 5.0, 4)
    x = A.x
    val, dV = V0.value_grad(x)
    d1 = np.full(len(x), -1.0)
    zero = np.zeros((len(x), 3, 3))
    assert np.all(charge_integrand_U(val, dV, zero, np.zeros((len(x), 3, 3, 3)), x, A.r, d1) == 0.0)
    e = np.ones((len(x), 3, 3))
    np.testing.assert_array_equal(
        charge_integrand_U(val, dV, e, np.ones((len(x), 3, 3, 3)), x, A.r, 0 * d1), 0.0)
    with pytest.raises(ValueError):
        charge_integrand_U(val, dV, e, None, x, A.r, d1, form="weak")


def test_zero_perturbation_has_zero_charge():
    res = charge_adm(MetricPerturbation.zero(3), V0)
    assert abs(res.extrapolated) < 1e-10


# ---------------------------------------------------------------------- cutoff charge


def test_wang_constant_mass_aspect(wang_charge):
    # [REFERENCE] m = 1 at n = 3 gives 12 pi
    assert wang_charge.extrapolated == pytest.approx(TWELVE_PI, rel=1e-2)
    assert wang_charge.converged


def test_surface_charge_agrees(wang_const, wang_charge):
    surf = [charge_surface(wang_const, V0, r) for r in (8.0, 10.0, 12.0)]
    steps = np.abs(np.diff(surf + [wang_charge.extrapolated]))
    assert steps[0] > steps[1]
    assert surf[-1] == pytest.approx(wang_charge.extrapolated, rel=1e-2)
    assert charge_surface(MetricPerturbation.zero(3), V0, 10.0) == 0.0


def test_forms_and_profiles_agree(wang_dipole):
    V = LapseFunction([1.0, 0.3, 0.0, -0.2])
    ref = charge_adm(wang_dipole, V).extrapolated
    hess = charge_adm(wang_dipole, V, form="hessian").extrapolated
    septic = charge_adm(wang_dipole, V, cutoffs=CutoffFamily(SEPTIC)).extrapolated
    assert hess == pytest.approx(ref, rel=5e-3)
    assert septic == pytest.approx(ref, rel=5e-3)


def test_charge_is_bilinear(wang_const, wang_dipole):
    cut = CutoffFamily(schedule=(4, 5, 6, 7))
    V1, V2 = LapseFunction.basis(3, 1), LapseFunction([0.5, 0.0, 1.0, 0.0])
    samples = lambda e, V: np.array(charge_adm(e, V, cut).samples)[:, 1]  # noqa: E731
    combo = samples(wang_dipole, 2.0 * V1 + V2)
    np.testing.assert_allclose(combo, 2.0 * samples(wang_dipole, V1) + samples(wang_dipole, V2),
                               rtol=1e-8, atol=1e-10)
    summed = samples(wang_const + wang_dipole.scaled(-0.5), V2)
    np.testing.assert_allclose(summed, samples(wang_const, V2) - 0.5 * samples(wang_dipole, V2),
                               rtol=1e-8, atol=1e-10)


def test_decaying_test_function_has_zero_charge(wang_dipole):
    res = charge_adm(wang_dipole, RadialTestFunction.exponential(2.0))
    assert abs(res.extrapolated) <= 1e-3
    assert abs(res.samples[-1][1]) < abs(res.samples[0][1])


def test_cutoff_inside_inner_radius_rejected(wang_const):
    with pytest.raises(ValueError):
        charge_adm(wang_const, V0, CutoffFamily(schedule=(0, 1, 2, 3)))


# ---------------------------------------------------------------------- mass vector


def test_mass_vector_of_constant_aspect(wang_const):
    mv = mass_vector(wang_const)
    np.testing.assert_allclose(mv.p, [4 * np.pi, 0, 0, 0], atol=4e-2 * np.pi)
    assert mv.is_future_timelike()


def test_mass_vector_of_dipole(wang_dipole):
    # [DERIVED] p^0 = int m, p^i = int m x^i over S^2 for m = 1 + x^1 / 2
    mv = mass_vector(wang_dipole)
    np.testing.assert_allclose(mv.p, [4 * np.pi, 2 * np.pi / 3, 0, 0], atol=1e-2 * 4 * np.pi)


def test_mass_vector_of_zero():
    np.testing.assert_allclose(mass_vector(MetricPerturbation.zero(3)).p, 0.0, atol=1e-12)


@pytest.mark.slow
def test_mass_vector_in_dimension_four():
    e = make_wang_metric(BoundaryFunction.constant(1.0, 4))
    mv = mass_vector(e, rule=sphere_rule(4, 6))
    # [DERIVED] area(S^3) = 2 pi^2
    np.testing.assert_allclose(mv.p, [2 * np.pi**2, 0, 0, 0, 0], atol=2e-2 * np.pi**2)


# ---------------------------------------------------------------------- mass aspect


@pytest.mark.slow
def test_mass_aspect_projection():
    c20 = 0.4
    m = BoundaryFunction.callback(lambda th: 1.0 + c20 * real_spherical_harmonic(2, 0, th), 3)
    e = make_wang_metric(m)
    tests = [BoundaryFunction.callback(lambda th: real_spherical_harmonic(0, 0, th), 3),
             BoundaryFunction.callback(lambda th: real_spherical_harmonic(2, 0, th), 3),
             BoundaryFunction.callback(lambda th: real_spherical_harmonic(1, 1, th), 3)]
    proj = mass_aspect_project(e, tests, cutoffs=CutoffFamily(schedule=range(4, 9)),
                               quadrature=KernelQuadrature(32, 8))
    np.testing.assert_allclose(proj, [np.sqrt(4 * np.pi), c20, 0.0], atol=1e-2)


def test_eigenfunction_charge_matches_lapse_charge(wang_dipole):
    cut = CutoffFamily(schedule=(4, 5, 6, 7))
    quad = KernelQuadrature(32, 8)
    for mu in (0, 1):
        v0 = BoundaryFunction.constant(1.0, 3) if mu == 0 else BoundaryFunction.coordinate(mu, 3)
        a = np.array(charge_adm(wang_dipole, Eigenfunction(v0, quad), cut).samples)[:, 1]
        b = np.array(charge_adm(wang_dipole, LapseFunction.basis(3, mu), cut).samples)[:, 1]
        np.testing.assert_allclose(a, b, rtol=1e-5)


# ---------------------------------------------------------------------- Ricci charge


def test_ricci_charge_of_zero():
    assert abs(charge_ricci(MetricPerturbation.zero(3), 0).extrapolated) < 1e-12


def test_ricci_charge_ratio_n3(wang_dipole):
    for mu in (0, 1):
        adm = charge_adm(wang_dipole, LapseFunction.basis(3, mu)).extrapolated
        ric = charge_ricci(wang_dipole, mu).extrapolated
        # [REFERENCE] the Ricci charge is -(n-2)/2 times the cutoff charge
        assert ric / adm == pytest.approx(-0.5, rel=1e-2)


@pytest.mark.slow
def test_ricci_charge_ratio_n4():
    e = make_wang_metric(BoundaryFunction.constant(1.0, 4))
    rule = sphere_rule(4, 5)
    cut = CutoffFamily(schedule=range(4, 10))
    adm = charge_adm(e, LapseFunction.basis(4, 0), cut, rule).extrapolated
    ric = charge_ricci(e, 0, cut, rule).extrapolated
    assert ric / adm == pytest.approx(-1.0, rel=1e-2)


def test_ricci_charge_with_exact_scalar(wang_const):
    lin = charge_ricci(wang_const, 0).extrapolated
    exact = charge_ricci(wang_const, 0, exact_scalar=True).extrapolated
    assert exact == pytest.approx(lin, rel=1e-2)


def test_ricci_charge_accepts_eigenfunction_and_callback(wang_const):
    cut = CutoffFamily(schedule=(4, 5, 6, 7))
    ref = np.array(charge_ricci(wang_const, 0, cut).samples)[:, 1]
    eig = Eigenfunction(BoundaryFunction.constant(1.0, 3), KernelQuadrature(32, 8))
    np.testing.assert_allclose(np.array(charge_ricci(wang_const, eig, cut).samples)[:, 1], ref, rtol=1e-6)
    from massaspect.tensorcalc import conformal_killing
    cb = np.array(charge_ricci(wang_const, lambda y: conformal_killing(0, y).vector, cut).samples)[:, 1]
    np.testing.assert_allclose(cb, ref, rtol=1e-12)
