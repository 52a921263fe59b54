"""Scenario runners behind the command line.

Every runner returns a :class:`ScenarioOutcome` holding charge tables, an
optional mass vector, named gates and free-form metrics.  Nothing here touches
the file system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .chartlab import (
    ChartChange,
    GaugeField,
    apply_chart_change,
    make_kottler,
    make_wang_metric,
    mass_aspect_density,
)
from .charges import PROFILES, ChargeResult, CutoffFamily, mass_vector
from .config import RunConfig
from .eigenfunctions import (
    BoundaryFunction,
    Eigenfunction,
    KernelQuadrature,
    integral_I,
    integral_J,
    j_equal,
)
from .geometry import LapseFunction, LorentzMap, lorentz, rho_ball
from .quadrature import sphere_area, sphere_rule
from .tensorcalc import MetricPerturbation, covariant_derivative


@dataclass(frozen=True)
class Gate:
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.threshold)


@dataclass
class ScenarioOutcome:
    charges: dict = field(default_factory=dict)  # name -> ChargeResult
    primary: str | None = None
    mass_vector: list | None = None
    gates: dict = field(default_factory=dict)  # name -> Gate
    metrics: dict = field(default_factory=dict)

    def add_convergence_gates(self):
        for name, res in self.charges.items():
            self.gates[f"converged[{name}]"] = Gate(0.0 if res.converged else 1.0, 0.0)


# --------------------------------------------------------------------------
# shared builders


def _mass_aspect(cfg: RunConfig) -> BoundaryFunction:
    n, p = cfg.dimension, cfg.params
    parts = [BoundaryFunction.constant(p.m_constant, n)]
    if p.m_linear is not None:
        a = np.asarray(p.m_linear, dtype=float)
        parts.append(BoundaryFunction.callback(lambda th, a=a: th @ a, n))
    if p.harmonics is not None:
        parts.append(BoundaryFunction.harmonics(p.harmonics))
    m = parts[0]
    for q in parts[1:]:
        m = m + q
    return m


def _cutoffs(cfg: RunConfig) -> CutoffFamily:
    c = cfg.cutoff
    return CutoffFamily(PROFILES[c.profile], tuple(range(c.k_min, c.k_max + 1)))


def _rule(cfg: RunConfig):
    return sphere_rule(cfg.dimension, cfg.quadrature.sphere_order, seed=cfg.rng_seed)


def _mass(e: MetricPerturbation, cfg: RunConfig, tag: str, out: ScenarioOutcome) -> np.ndarray:
    mv = mass_vector(e, _cutoffs(cfg), _rule(cfg), radial_order=cfg.quadrature.radial_order)
    for mu, res in enumerate(mv.results):
        out.charges[f"{tag}:V{mu}"] = res
    return mv.p


def _sphere_moments(m: BoundaryFunction, n: int) -> np.ndarray:
    """(int m, int m x^i) over the unit sphere with a finer independent rule."""
    rule = sphere_rule(n, 16)
    vals = m(rule.nodes)
    return np.concatenate([[rule.weights @ vals], rule.weights @ (vals[:, None] * rule.nodes)])


def _wang(cfg: RunConfig) -> MetricPerturbation:
    return make_wang_metric(_mass_aspect(cfg), rel_step=cfg.fd_step)


# --------------------------------------------------------------------------
# scenarios


def run_wang(cfg: RunConfig) -> ScenarioOutcome:
    out = ScenarioOutcome(primary="wang:V0")
    n = cfg.dimension
    p = _mass(_wang(cfg), cfg, "wang", out)
    expected = _sphere_moments(_mass_aspect(cfg), n)
    scale = max(1.0, abs(expected[0]))
    out.mass_vector = p.tolist()
    out.metrics["expected_mass_vector"] = expected.tolist()
    out.metrics["timelike_future"] = bool(p[0] > np.linalg.norm(p[1:]))
    out.gates["mass_vector_vs_sphere_moments"] = Gate(float(np.abs(p - expected).max() / scale),
                                                      cfg.tolerances.charge_rtol)
    out.add_convergence_gates()
    return out


def run_kottler(cfg: RunConfig) -> ScenarioOutcome:
    out = ScenarioOutcome(primary="kottler:V0")
    n, m0, tol = cfg.dimension, cfg.params.m0, cfg.tolerances.charge_rtol
    e1 = make_kottler(m0, n, rel_step=cfg.fd_step)
    p1 = _mass(e1, cfg, "kottler", out)
    out.mass_vector = p1.tolist()
    aspect = mass_aspect_density(e1, _rule(cfg).nodes, r=10.0)
    mean = float(np.mean(aspect))
    if m0 == 0.0:
        out.gates["zero_mass"] = Gate(float(np.abs(p1).max()), 1e-10)
        return out
    e2 = make_kottler(2.0 * m0, n, rel_step=cfg.fd_step)
    p2 = _mass(e2, cfg, "kottler_2m0", out)
    out.metrics.update(p0_over_m0=float(p1[0] / m0), aspect_mean=mean, aspect_over_m0=mean / m0)
    out.gates["aspect_constancy"] = Gate(float(np.std(aspect) / abs(mean)), tol)
    out.gates["spatial_components"] = Gate(float(np.abs(p1[1:]).max() / abs(p1[0])), tol)
    out.gates["linearity_in_m0"] = Gate(float(abs(p2[0] / p1[0] - 2.0) / 2.0), tol)
    out.add_convergence_gates()
    return out


def run_gauge(cfg: RunConfig) -> ScenarioOutcome:
    out = ScenarioOutcome(primary="gauge:V0")
    n, p, tol = cfg.dimension, cfg.params, cfg.tolerances.charge_rtol
    zeta = GaugeField(n, p.zeta_profile, p.zeta_amplitude, p.zeta_decay)
    phi = ChartChange(LorentzMap.identity(n), zeta, zeta.bound)
    e1 = _wang(cfg)
    p1 = _mass(e1, cfg, "wang", out)
    p2 = _mass(apply_chart_change(e1, phi), cfg, "gauge", out)
    zero = MetricPerturbation.zero(n)
    p_pure = _mass(apply_chart_change(zero, phi), cfg, "pure_gauge", out)
    scale = max(1.0, abs(p1[0]))
    out.mass_vector = p2.tolist()
    out.metrics.update(mass_vector_before=p1.tolist(), pure_gauge_mass_vector=p_pure.tolist())
    out.gates["gauge_invariance"] = Gate(float(np.abs(p2 - p1).max() / scale), tol)
    out.gates["pure_gauge_of_b"] = Gate(float(np.linalg.norm(p_pure) / scale), tol)
    return out


def _isometry_run(cfg: RunConfig, B: LorentzMap, tag: str, tol: float) -> ScenarioOutcome:
    out = ScenarioOutcome(primary=f"{tag}:V0")
    e1 = _wang(cfg)
    p1 = _mass(e1, cfg, "wang", out)
    p2 = _mass(apply_chart_change(e1, ChartChange(B)), cfg, tag, out)
    pred = B.matrix @ p1
    out.mass_vector = p2.tolist()
    out.metrics.update(mass_vector_before=p1.tolist(), predicted=pred.tolist(),
                       lorentz_matrix=B.matrix.tolist())
    out.gates["lapse_action_covariance"] = Gate(
        float(np.abs(p2 - pred).max() / max(1.0, np.linalg.norm(pred))), tol)
    out.add_convergence_gates()
    return out


def run_boost(cfg: RunConfig) -> ScenarioOutcome:
    p = cfg.params
    B = lorentz("boost", cfg.dimension, axis=p.boost_axis, rapidity=p.rapidity)
    return _isometry_run(cfg, B, "boost", cfg.tolerances.covariance_rtol)


def run_rotation(cfg: RunConfig) -> ScenarioOutcome:
    p = cfg.params
    B = lorentz("rotation", cfg.dimension, axes=tuple(p.rotation_axes), angle=p.angle)
    return _isometry_run(cfg, B, "rotation", cfg.tolerances.charge_rtol)


def interior_points(n: int, count: int, seed: int, r_max: float = 6.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, n))
    r = rng.uniform(0.2, r_max, count)
    return np.tanh(0.5 * r)[:, None] * g / np.linalg.norm(g, axis=1, keepdims=True)


def eigen_residual(V, x: np.ndarray, rel_step: float) -> np.ndarray:
    """|Laplacian V - n V| / max(1, |V|) with the Laplacian from FD of dV."""
    n = x.shape[1]
    val, _ = V.value_grad(x)
    H = covariant_derivative(lambda y: V.value_grad(y)[1], x, rel_step)
    lap = rho_ball(x) ** 2 * np.einsum("nii->n", H)
    return np.abs(lap - n * val) / np.maximum(1.0, np.abs(val))


def run_eigen_selftest(cfg: RunConfig) -> ScenarioOutcome:
    out = ScenarioOutcome()
    n, q = cfg.dimension, cfg.quadrature
    quad = KernelQuadrature(q.kernel_radial_order, q.kernel_angular_order)
    x = interior_points(n, cfg.params.eigen_points, cfg.rng_seed)
    errs = []
    cases = [(BoundaryFunction.constant(1.0, n), 0)] + [(BoundaryFunction.coordinate(i, n), i)
                                                         for i in range(1, n + 1)]
    for v0, mu in cases:
        got = Eigenfunction(v0, quad).value(x)
        ref = LapseFunction.basis(n, mu).value(x)
        errs.append(float(np.max(np.abs(got - ref) / np.maximum(np.abs(ref), 1e-300))))
    out.metrics["relative_errors"] = errs
    out.gates["lapse_reproduction"] = Gate(max(errs), cfg.tolerances.eigen_rtol)
    quadratic = BoundaryFunction.callback(lambda th: th[..., 0] ** 2 - 0.5 * th[..., 1], n)
    res = eigen_residual(Eigenfunction(quadratic, quad), x, cfg.fd_step)
    out.metrics["eigen_residual_max"] = float(res.max())
    out.gates["eigen_residual"] = Gate(float(res.max()), cfg.tolerances.residual_tol)
    return out


def brute_I(n: int, beta: float) -> float:
    val, _ = integrate.quad(lambda r: r ** (n - 2) * (1 + r * r) ** (-beta), 0, np.inf,
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return sphere_area(n - 1) * val


def brute_J(n: int, alpha: float, beta: float) -> float:
    def inner(w):
        f = lambda s: s ** (n - 3) * (1 + w * w + s * s) ** (-beta)
        return integrate.quad(f, 0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)[0]

    val, _ = integrate.quad(lambda w: w**alpha * inner(w), 0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return 2.0 * sphere_area(n - 2) * val


def run_integrals_selftest(cfg: RunConfig) -> ScenarioOutcome:
    out = ScenarioOutcome()
    worst_closed, worst_identity = 0.0, 0.0
    for n in (3, 4, 5):
        for beta in (n, n + 1, n + 2):
            worst_closed = max(worst_closed, abs(integral_I(n, beta) / brute_I(n, beta) - 1.0))
        for alpha, beta in ((2, n), (2, n + 1), (2, n + 2), (4, n + 2)):
            worst_closed = max(worst_closed, abs(integral_J(n, alpha, beta) / brute_J(n, alpha, beta) - 1.0))
        ident = 4 * n * (integral_J(n, 2, n + 1) - integral_J(n, 2, n + 2)) - (n - 1) * integral_J(n, 2, n)
        worst_identity = max(worst_identity, abs(ident) / integral_J(n, 2, n))
    out.metrics["j_equal_n3"] = j_equal(3)
    out.gates["closed_forms_vs_quadrature"] = Gate(worst_closed, cfg.tolerances.integral_tol)
    out.gates["vanishing_identity"] = Gate(worst_identity, cfg.tolerances.identity_tol)
    out.gates["j_equal_n3_is_pi_over_8"] = Gate(abs(j_equal(3) - np.pi / 8), cfg.tolerances.identity_tol)
    return out


RUNNERS: dict[str, Callable[[RunConfig], ScenarioOutcome]] = {
    "wang": run_wang,
    "kottler": run_kottler,
    "gauge": run_gauge,
    "boost": run_boost,
    "rotation": run_rotation,
    "eigen_selftest": run_eigen_selftest,
    "integrals_selftest": run_integrals_selftest,
}


def run_scenario(cfg: RunConfig) -> ScenarioOutcome:
    return RUNNERS[cfg.scenario](cfg)


__all__ = ["Gate", "ScenarioOutcome", "RUNNERS", "run_scenario", "brute_I", "brute_J",
           "eigen_residual", "interior_points", "ChargeResult"]
