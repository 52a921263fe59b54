"""Benchmark metrics, chart changes and the covariance experiments.

A chart change is Phi = B o Phi_0 with B a Lorentz isometry and
Phi_0(x) = exp_x(zeta(x)).  The transformed perturbation is

    e_2(y) = J^-T [e_1 + (b - Phi^* b)](x) J^-1,   y = Phi(x),  J = dPhi(x),

which keeps the small difference b - Phi^* b in closed form instead of
subtracting two large metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .charges import (
    CutoffFamily,
    charge_adm,
    charge_integrand_U,
    mass_vector,
)
from .differences import DEFAULT_REL_STEP, partials
from .eigenfunctions import BoundaryFunction
from .geometry import (
    DomainError,
    LapseFunction,
    LorentzMap,
    act_lapse,
    ball_to_hyperboloid,
    ball_vector_to_ambient,
    hyperboloid_to_ball,
    pullback_terms,
    rho_ball,
    sinhc,
    vector_derivative,
)
from .quadrature import gauss_interval
from .tensorcalc import MetricPerturbation, covariant_derivative, lie_derivative_b

__all__ = [
    "WangData",
    "KottlerConstructionError",
    "ChartChange",
    "CompositeChange",
    "GaugeField",
    "make_wang_metric",
    "make_kottler",
    "mass_aspect_density",
    "gauge_field",
    "apply_chart_change",
    "bartnik_field",
    "BartnikSample",
    "CovarianceReport",
    "verify_covariance",
]

Field = Callable[[np.ndarray], np.ndarray]

# e_2 nests finite differences (J and L_zeta b inside, De_2 outside); the
# larger step keeps ball-coordinate rounding from being amplified twice.
CHART_CHANGE_REL_STEP = 1e-2


def _directions(x: np.ndarray):
    t = np.linalg.norm(x, axis=1)
    if np.any(t == 0.0):
        raise DomainError("direction undefined at the origin")
    return t, x / t[:, None]


# --------------------------------------------------------------------------
# Wang-type metrics


@dataclass(frozen=True)
class WangData:
    """Transversal boundary tensor ebar = m(theta)/(n-1) (delta - theta theta)."""

    m: BoundaryFunction

    @property
    def n(self) -> int:
        return self.m.n

    def ebar(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        _, th = _directions(x)
        P = np.eye(self.n) - th[:, :, None] * th[:, None, :]
        return (self.m(th) / (self.n - 1))[:, None, None] * P

    def transversality_defect(self, x: np.ndarray) -> float:
        x = np.atleast_2d(x)
        return float(np.abs(np.einsum("nij,nj->ni", self.ebar(x), x)).max())

    def trace(self, theta: np.ndarray) -> np.ndarray:
        return np.einsum("nii->n", self.ebar(theta))


def make_wang_metric(m: BoundaryFunction, inner_radius: float = 1.0,
                     rel_step: float = DEFAULT_REL_STEP) -> MetricPerturbation:
    """e = rho^(n-2) ebar in ball components, with no higher-order terms."""
    data = WangData(m)
    n = m.n

    def e(x):
        x = np.atleast_2d(x)
        return (rho_ball(x) ** (n - 2))[:, None, None] * data.ebar(x)

    return MetricPerturbation(e, n, decay_order=float(n), wang=True, inner_radius=inner_radius,
                              rel_step=rel_step, label="wang")


def mass_aspect_density(e: MetricPerturbation, theta: np.ndarray, r: float = 10.0) -> np.ndarray:
    """rho^(2-n) tr_delta e at geodesic radius r; tends to m(theta) for Wang data."""
    theta = np.atleast_2d(theta)
    x = np.tanh(0.5 * r) * theta
    return rho_ball(x) ** (2 - e.n) * np.einsum("nii->n", e(x))


# --------------------------------------------------------------------------
# Kottler benchmark


class KottlerConstructionError(RuntimeError):
    pass


_KOTTLER_NODES = gauss_interval(48, 0.0, 1.0)


def _kottler_shift(R: np.ndarray, m0: float, n: int) -> np.ndarray:
    """integral from R to infinity of (1/sqrt(a) - 1/sqrt(b)) dR'.

    a = 1 + R'^2 - 2 m0 R'^(2-n), b = 1 + R'^2, substituted R' = R/v.
    """
    v, w = _KOTTLER_NODES
    Rp = R[:, None] / v[None, :]
    b = 1.0 + Rp**2
    a = b - 2.0 * m0 * Rp ** (2 - n)
    if np.any(a <= 0.0):
        raise KottlerConstructionError("horizon reached: 1 + R^2 - 2 m0 R^(2-n) <= 0")
    sa, sb = np.sqrt(a), np.sqrt(b)
    integrand = 2.0 * m0 * R[:, None] ** (3 - n) * v ** (n - 4) / (sa * sb * (sa + sb))
    return integrand @ w


def make_kottler(m0: float, n: int = 3, inner_radius: float = 1.0,
                 rel_step: float = DEFAULT_REL_STEP) -> MetricPerturbation:
    """Static metric dR^2/(1 + R^2 - 2 m0 R^(2-n)) + R^2 sigma in a transversal gauge.

    The radial coordinate s is chosen so that the radial part equals ds^2;
    then R = sinh(s + t(s)) with t solving t = shift(sinh(s + t)), and
    e = (sinh^2(s + t) - sinh^2 s) sigma has no radial components.
    """
    if m0 < 0.0:
        raise ValueError("m0 must be non-negative")
    # construction must stay valid down to the inner radius
    _kottler_shift(np.array([np.sinh(inner_radius)]), m0, n)

    def shift_of(s):
        t = np.zeros_like(s)
        for _ in range(100):
            t_new = _kottler_shift(np.sinh(s + t), m0, n)
            if np.all(np.abs(t_new - t) <= 1e-16 * np.maximum(np.abs(t_new), 1e-300)):
                return t_new
            t = t_new
        raise KottlerConstructionError("radial reparametrisation did not converge")

    def e(x):
        x = np.atleast_2d(x)
        tx, th = _directions(x)
        s = 2.0 * np.arctanh(tx)
        t = shift_of(s)
        q = np.sinh(t) * np.sinh(2.0 * s + t) / np.sinh(s) ** 2
        P = np.eye(n) - th[:, :, None] * th[:, None, :]
        return (q / rho_ball(x) ** 2)[:, None, None] * P

    return MetricPerturbation(e, n, decay_order=float(n), wang=True, inner_radius=inner_radius,
                              rel_step=rel_step, label=f"kottler(m0={m0:g})")


# --------------------------------------------------------------------------
# chart changes


def _ball_to_hyp_jacobian(x):
    # dX/dx for X = (1/rho - 1, x/rho)
    r = rho_ball(x)[:, None]
    N, n = x.shape
    J = np.empty((N, n + 1, n))
    J[:, 0, :] = x / r**2
    J[:, 1:, :] = np.eye(n) / r[:, :, None] + x[:, :, None] * x[:, None, :] / r[:, :, None] ** 2
    return J


def _hyp_to_ball_jacobian(X):
    # dx/dX for x = Xvec/(1 + X0)
    N, m = X.shape
    d = 1.0 + X[:, 0]
    J = np.zeros((N, m - 1, m))
    J[:, :, 0] = -X[:, 1:] / d[:, None] ** 2
    J[:, :, 1:] = np.eye(m - 1) / d[:, None, None]
    return J


def isometry_jacobian(B: LorentzMap, x: np.ndarray) -> np.ndarray:
    """Ball-coordinate Jacobian of the isometry B at x, in closed form."""
    x = np.atleast_2d(x)
    Y = B.apply_hyperboloid(ball_to_hyperboloid(x))
    return np.einsum("nia,ab,nbj->nij", _hyp_to_ball_jacobian(Y), B.matrix, _ball_to_hyp_jacobian(x))


def _displacement(zeta: Field, x: np.ndarray) -> np.ndarray:
    """exp_x(zeta(x)) - x, formed from the small hyperboloid increment."""
    X = ball_to_hyperboloid(x)
    z = zeta(x)
    a = (np.linalg.norm(z, axis=1) / rho_ball(x))[:, None]  # |zeta|_b, no Minkowski cancellation
    dX = 2.0 * np.sinh(0.5 * a) ** 2 * X + sinhc(a) * ball_vector_to_ambient(x, z)
    d0, d1 = 1.0 + X[:, :1], 1.0 + X[:, :1] + dX[:, :1]
    return dX[:, 1:] / d1 - X[:, 1:] * dX[:, :1] / (d0 * d1)


@dataclass(frozen=True)
class ChartChange:
    """Phi = B o exp(zeta) on the ball; ``zeta`` returns ball components."""

    B: LorentzMap
    zeta: Field | None = None
    zeta_bound: float = 0.0  # sup of |zeta|_b, used to widen the inner radius
    rel_step: float = CHART_CHANGE_REL_STEP

    @property
    def n(self) -> int:
        return self.B.dim

    @classmethod
    def identity(cls, n: int) -> "ChartChange":
        return cls(LorentzMap.identity(n))

    def _zeta(self, x):
        if self.zeta is None:
            return np.zeros_like(x)
        return self.zeta(x)

    def gauge_part(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return x + _displacement(self._zeta, x)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.B.apply_ball(self.gauge_part(x))

    def inverse(self, y: np.ndarray, max_iter: int = 200) -> np.ndarray:
        """Solve Phi(x) = y by the contraction x <- B^-1 y - (Phi_0(x) - x)."""
        y = np.atleast_2d(y)
        target = self.B.inverse().apply_ball(y)
        if self.zeta is None:
            return target
        x = target.copy()
        step = np.inf
        for _ in range(max_iter):
            x_new = target - _displacement(self._zeta, x)
            prev, step = step, np.abs(x_new - x).max()
            x = x_new
            # stop at ball-coordinate resolution, or when rounding stalls the contraction
            if step <= 4e-16 or (step <= 1e-13 and step >= prev):
                return x
        if step > 1e-13:
            raise DomainError(f"chart change inverse did not converge (last step {step:.2e})")
        return x

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        n = x.shape[1]
        J0 = np.broadcast_to(np.eye(n), (x.shape[0], n, n)).copy()
        if self.zeta is not None:
            J0 += np.swapaxes(partials(lambda z: _displacement(self._zeta, z), x, self.rel_step), 1, 2)
        return np.einsum("nia,naj->nij", isometry_jacobian(self.B, self.gauge_part(x)), J0)

    def deficit(self, x: np.ndarray) -> np.ndarray:
        """b - Phi^* b at x, ball components."""
        x = np.atleast_2d(x)
        if self.zeta is None:
            return np.zeros((x.shape[0], x.shape[1], x.shape[1]))
        return pullback_terms(self._zeta, x, self.rel_step)[1]

    def radius_shift(self) -> float:
        return float(np.arccosh(max(1.0, self.B.matrix[0, 0])) + self.zeta_bound)

    def injectivity_margin(self, x: np.ndarray) -> float:
        """1 - sup |d(Phi_0 - id)|; positive means Phi_0 is a contraction
        perturbation of the identity on the samples, hence injective there."""
        if self.zeta is None:
            return 1.0
        x = np.atleast_2d(x)
        D = partials(lambda z: _displacement(self._zeta, z), x, self.rel_step)
        return float(1.0 - np.linalg.norm(D, ord=2, axis=(1, 2)).max())

    def then(self, other: "ChartChange | CompositeChange") -> "CompositeChange":
        """The change ``other o self``."""
        return CompositeChange(self, other)


@dataclass(frozen=True)
class CompositeChange:
    """second o first."""

    first: object
    second: object

    @property
    def n(self) -> int:
        return self.first.n

    def forward(self, x):
        return self.second.forward(self.first.forward(x))

    def inverse(self, y):
        return self.first.inverse(self.second.inverse(y))

    def jacobian(self, x):
        x = np.atleast_2d(x)
        return np.einsum("nia,naj->nij", self.second.jacobian(self.first.forward(x)), self.first.jacobian(x))

    def deficit(self, x):
        # b - Phi1^*(Phi2^* b) = d1 + J1^T d2(Phi1 x) J1
        x = np.atleast_2d(x)
        J1 = self.first.jacobian(x)
        d2 = self.second.deficit(self.first.forward(x))
        return self.first.deficit(x) + np.einsum("nai,nab,nbj->nij", J1, d2, J1)

    def radius_shift(self):
        return self.first.radius_shift() + self.second.radius_shift()

    def then(self, other):
        return CompositeChange(self, other)


def apply_chart_change(e: MetricPerturbation, phi) -> MetricPerturbation:
    """Perturbation e_2 with b + e_2 = Phi_*(b + e)."""
    r0 = e.inner_radius
    rmin = np.tanh(0.5 * r0) if r0 > 0 else 0.0

    def e2(y):
        y = np.atleast_2d(y)
        x = phi.inverse(y)
        if r0 > 0 and np.any(np.linalg.norm(x, axis=1) < rmin * (1 - 1e-12)):
            raise DomainError(f"chart change pulls points inside r = {r0:g}, where e is undefined")
        Jinv = np.linalg.inv(phi.jacobian(x))
        M = e(x) + phi.deficit(x)
        out = np.einsum("nai,nab,nbj->nij", Jinv, M, Jinv)
        return 0.5 * (out + np.swapaxes(out, 1, 2))

    return MetricPerturbation(e2, e.n, decay_order=e.decay_order,
                              inner_radius=r0 + phi.radius_shift(),
                              rel_step=max(e.rel_step, CHART_CHANGE_REL_STEP),
                              label=f"{e.label}+chart change")


# --------------------------------------------------------------------------
# gauge vector fields


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


@dataclass(frozen=True)
class GaugeField:
    """zeta = A psi(r) exp(-tau r) * (unit profile), psi a C^2 switch on [r0, r0+1]."""

    n: int
    kind: str = "radial"
    amplitude: float = 0.5
    tau: float = 2.0
    r0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("radial", "rotation"):
            raise ValueError(f"unknown gauge profile {self.kind!r}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        t = np.linalg.norm(x, axis=1)
        r = 2.0 * np.arctanh(t)
        amp = self.amplitude * _smoothstep(r - self.r0) * np.exp(-self.tau * r) * rho_ball(x)
        safe = np.where(t > 0, t, 1.0)
        if self.kind == "radial":
            shape = (1.0 + 0.5 * x[:, 0] / safe)[:, None] * x / safe[:, None]
        else:
            shape = np.zeros_like(x)
            shape[:, 0], shape[:, 1] = -x[:, 1] / safe, x[:, 0] / safe
        return amp[:, None] * shape

    @property
    def bound(self) -> float:
        return float(1.5 * abs(self.amplitude) * np.exp(-self.tau * self.r0))

    def antisymmetric_form(self, V, x: np.ndarray) -> np.ndarray:
        """S_ij = (D_i zeta_j - D_j zeta_i) V + 2 zeta_i D_j V - 2 zeta_j D_i V."""
        return _bartnik_form(self, V, np.atleast_2d(x), DEFAULT_REL_STEP)


def gauge_field(n: int, kind: str = "radial", amplitude: float = 0.5, tau: float = 2.0,
                r0: float = 1.0) -> GaugeField:
    return GaugeField(n, kind, amplitude, tau, r0)


def _bartnik_form(zeta: Field, V, x, rel_step):
    r2 = rho_ball(x)[:, None, None] ** 2
    Dz = vector_derivative(zeta, x, rel_step) / r2  # D_i zeta_j
    zl = zeta(x) / r2[:, :, 0]
    val, dV = V.value_grad(x)
    A = Dz - np.swapaxes(Dz, 1, 2)
    C = zl[:, :, None] * dV[:, None, :]
    return A * val[:, None, None] + 2.0 * (C - np.swapaxes(C, 1, 2))


def _hessian_deficit(V, x):
    if hasattr(V, "hessian_deficit"):
        return V.hessian_deficit(x)
    val, _ = V.value_grad(x)
    return V.hessian(x) - val[:, None, None] * np.eye(x.shape[1]) / rho_ball(x)[:, None, None] ** 2


@dataclass(frozen=True)
class BartnikSample:
    W: np.ndarray  # covector W_i
    divergence: np.ndarray
    expected: np.ndarray  # U(b, V, L_zeta b, chi) + 2 T(zeta, N)
    residual: np.ndarray


def bartnik_field(zeta: Field, V, cutoffs: CutoffFamily, x: np.ndarray, k: float | None = None,
                  rel_step: float = DEFAULT_REL_STEP) -> BartnikSample:
    """W_i = S_ij N^j with N = -D chi(r - k), and the divergence identity residual."""
    x = np.atleast_2d(x)
    k = cutoffs.schedule[0] if k is None else k

    def normal(y):
        t = np.linalg.norm(y, axis=1)
        r = 2.0 * np.arctanh(t)
        _, d1, _ = cutoffs.evaluate(r, k)
        return -(rho_ball(y) * d1 / t)[:, None] * y

    def W(y):
        return np.einsum("nij,nj->ni", _bartnik_form(zeta, V, y, rel_step), normal(y))

    DW = covariant_derivative(W, x, rel_step)
    div = rho_ball(x) ** 2 * np.einsum("nii->n", DW)

    t = np.linalg.norm(x, axis=1)
    r = 2.0 * np.arctanh(t)
    _, d1, d2 = cutoffs.evaluate(r, k)

    def lie(y):
        return lie_derivative_b(zeta, y, rel_step)

    h = lie(x)
    Dh = covariant_derivative(lie, x, rel_step)
    val, dV = V.value_grad(x)
    U = charge_integrand_U(val, dV, h, Dh, x, r, d1, d2, "standard")
    T = _hessian_deficit(V, x)
    extra = 2.0 * np.einsum("ni,nij,nj->n", zeta(x), T, normal(x))
    expected = U + extra
    return BartnikSample(W(x), div, expected, div - expected)


# --------------------------------------------------------------------------
# covariance


@dataclass(frozen=True)
class CovarianceReport:
    p_before: float
    p_after: float
    p_transformed: float
    gap_transformed: float  # |p_after - p_transformed| / max(1, |p_transformed|)
    gap_before: float  # |p_after - p_before| / max(1, |p_before|)
    results: tuple = field(default=(), compare=False)

    def passes(self, gate: float) -> bool:
        return self.gap_transformed <= gate


def verify_covariance(e: MetricPerturbation, phi: ChartChange, V: LapseFunction,
                      cutoffs: CutoffFamily | None = None, rule=None) -> CovarianceReport:
    """Compare p(e_2, V) with p(e_1, V o B)."""
    cutoffs = CutoffFamily() if cutoffs is None else cutoffs
    e2 = apply_chart_change(e, phi)
    B = phi.B if isinstance(phi, ChartChange) else _net_isometry(phi)
    before = charge_adm(e, V, cutoffs, rule)
    after = charge_adm(e2, V, cutoffs, rule)
    moved = charge_adm(e, act_lapse(B, V), cutoffs, rule)
    pb, pa, pt = before.extrapolated, after.extrapolated, moved.extrapolated
    return CovarianceReport(
        pb, pa, pt,
        abs(pa - pt) / max(1.0, abs(pt)),
        abs(pa - pb) / max(1.0, abs(pb)),
        (before, after, moved),
    )


def _net_isometry(phi) -> LorentzMap:
    if isinstance(phi, ChartChange):
        return phi.B
    return _net_isometry(phi.second) @ _net_isometry(phi.first)


def transformed_mass_vector(e: MetricPerturbation, phi, cutoffs: CutoffFamily | None = None,
                            rule=None):
    """Mass vectors of e and of its image, and the prediction B p."""
    p1 = mass_vector(e, cutoffs, rule).p
    p2 = mass_vector(apply_chart_change(e, phi), cutoffs, rule).p
    return p1, p2, _net_isometry(phi).matrix @ p1
