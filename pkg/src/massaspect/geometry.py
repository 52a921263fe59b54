"""Models of hyperbolic space and the isometry-related machinery.

Four charts are supported: the Poincare ball, the upper half-space, the
hyperboloid in Minkowski space R^{n,1} and geodesic polar coordinates around
the ball origin.  Batched helpers work on arrays whose last axis holds the
coordinates; the :class:`Point` wrapper is a thin validated front end.

The ball chart is the working chart for all tensor calculus.  Its coordinate
frame is conformal, ``b = rho**-2 * delta``, with ``rho = (1 - |x|^2) / 2``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .differences import DEFAULT_REL_STEP, partials

__all__ = [
    "Chart",
    "DomainError",
    "Point",
    "TangentVector",
    "LapseFunction",
    "LorentzMap",
    "rho",
    "convert",
    "lapse_eval",
    "exp_map",
    "log_map",
    "lorentz",
    "act_lapse",
    "invariant_frame",
    "pullback_metric",
]


class Chart(str, enum.Enum):
    BALL = "ball"
    HALFSPACE = "halfspace"
    HYPERBOLOID = "hyperboloid"
    POLAR = "polar"


class DomainError(ValueError):
    """A point lies outside the domain of its chart."""


# --------------------------------------------------------------------------
# batched chart maps


def minkowski(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """eta(u, v) with signature (-, +, ..., +) along the last axis."""
    return -u[..., 0] * v[..., 0] + np.sum(u[..., 1:] * v[..., 1:], axis=-1)


def rho_ball(x: np.ndarray) -> np.ndarray:
    t = np.linalg.norm(x, axis=-1)
    return 0.5 * (1.0 - t) * (1.0 + t)


def _inversion(p: np.ndarray) -> np.ndarray:
    # inversion in the sphere of radius sqrt(2) about (-1, 0); an involution
    q = np.array(p, dtype=float, copy=True)
    q[..., 0] += 1.0
    d2 = np.sum(q * q, axis=-1)[..., None]
    out = 2.0 * q / d2
    out[..., 0] -= 1.0
    return out


def ball_to_halfspace(x: np.ndarray) -> np.ndarray:
    return _inversion(x)


def halfspace_to_ball(y: np.ndarray) -> np.ndarray:
    return _inversion(y)


def inversion_jacobian(p: np.ndarray) -> np.ndarray:
    """Jacobian of the ball/half-space inversion at ``p``, shape (..., n, n)."""
    q = np.array(p, dtype=float, copy=True)
    q[..., 0] += 1.0
    d2 = np.sum(q * q, axis=-1)
    n = q.shape[-1]
    outer = q[..., :, None] * q[..., None, :]
    return (2.0 / d2)[..., None, None] * (np.eye(n) - 2.0 * outer / d2[..., None, None])


def ball_to_hyperboloid(x: np.ndarray) -> np.ndarray:
    r = rho_ball(x)[..., None]
    x0 = 1.0 / r - 1.0
    return np.concatenate([x0, x / r], axis=-1)


def hyperboloid_to_ball(X: np.ndarray) -> np.ndarray:
    return X[..., 1:] / (1.0 + X[..., :1])


def ball_to_polar(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = np.linalg.norm(x, axis=-1)
    r = 2.0 * np.arctanh(t)
    theta = np.zeros_like(x)
    theta[..., 0] = 1.0
    nz = t > 0
    theta[nz] = x[nz] / t[nz][..., None]
    return r, theta


def polar_to_ball(r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.tanh(0.5 * np.asarray(r))[..., None] * theta


def ball_vector_to_ambient(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Push a ball-coordinate vector at ``x`` to R^{n,1}."""
    r = rho_ball(x)[..., None]
    xv = np.sum(x * v, axis=-1, keepdims=True)
    return np.concatenate([xv / r**2, v / r + x * xv / r**2], axis=-1)


def ambient_vector_to_ball(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Inverse of :func:`ball_vector_to_ambient` for tangent vectors at ``X``."""
    d = 1.0 + X[..., :1]
    return V[..., 1:] / d - X[..., 1:] * V[..., :1] / d**2


def christoffel_ball(x: np.ndarray) -> np.ndarray:
    """Christoffel symbols of b in the ball chart, ``G[..., l, k, a]``."""
    n = x.shape[-1]
    phi = x / rho_ball(x)[..., None]
    eye = np.eye(n)
    return (
        eye[:, :, None] * phi[..., None, None, :]
        + eye[:, None, :] * phi[..., None, :, None]
        - eye[None, :, :] * phi[..., :, None, None]
    )


def vector_derivative(
    zeta: Callable[[np.ndarray], np.ndarray], x: np.ndarray, rel_step: float = DEFAULT_REL_STEP
) -> np.ndarray:
    """Covariant derivative of a ball-component vector field, ``D[..., k, i] = (D_k zeta)^i``."""
    x = np.atleast_2d(x)
    dz = partials(zeta, x, rel_step)
    G = christoffel_ball(x)
    return dz + np.einsum("nika,na->nki", G, zeta(x))


# --------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class Point:
    """A point of H^n tagged with its chart.

    Polar coordinates are stored as ``[r, theta_1, ..., theta_n]`` with
    ``theta`` a unit vector.
    """

    chart: Chart
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float, copy=True).reshape(-1)
        chart = Chart(self.chart)
        if not np.all(np.isfinite(c)):
            raise DomainError("non-finite coordinates")
        if c.size - (1 if chart in (Chart.HYPERBOLOID, Chart.POLAR) else 0) < 3:
            raise DomainError("points of H^n need n >= 3")
        if chart is Chart.BALL and np.dot(c, c) >= 1.0:
            raise DomainError(f"|x| >= 1 is outside the ball: {c}")
        if chart is Chart.HALFSPACE and c[0] <= 0.0:
            raise DomainError(f"y^1 must be positive: {c}")
        if chart is Chart.HYPERBOLOID:
            if c[0] <= 0.0 or abs(minkowski(c, c) + 1.0) > 1e-8 * max(1.0, c[0] ** 2):
                raise DomainError(f"not on the future hyperboloid: {c}")
        if chart is Chart.POLAR:
            if c[0] < 0.0:
                raise DomainError("negative polar radius")
            th = c[1:]
            nrm = np.linalg.norm(th)
            if c[0] == 0.0 and nrm == 0.0:
                th = np.zeros_like(th)
                th[0] = 1.0
            elif abs(nrm - 1.0) > 1e-10:
                raise DomainError("polar direction must be a unit vector")
            c = np.concatenate([c[:1], th])
        c.setflags(write=False)
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        k = self.coords.size
        return k - 1 if self.chart in (Chart.HYPERBOLOID, Chart.POLAR) else k

    def ball(self) -> np.ndarray:
        return _to_ball(self)


def _to_ball(p: Point) -> np.ndarray:
    c = p.coords
    if p.chart is Chart.BALL:
        return c.copy()
    if p.chart is Chart.HALFSPACE:
        return halfspace_to_ball(c)
    if p.chart is Chart.HYPERBOLOID:
        return hyperboloid_to_ball(c)
    return polar_to_ball(c[0], c[1:])


def as_ball(p) -> np.ndarray:
    """Ball coordinates of a :class:`Point` or pass through an array."""
    if isinstance(p, Point):
        return p.ball()
    return np.asarray(p, dtype=float)


def rho(p: Point) -> float:
    """The defining function rho at ``p``, computed natively in each chart."""
    c = p.coords
    if p.chart is Chart.BALL:
        return float(rho_ball(c))
    if p.chart is Chart.HALFSPACE:
        return float(2.0 * c[0] / ((c[0] + 1.0) ** 2 + np.dot(c[1:], c[1:])))
    if p.chart is Chart.HYPERBOLOID:
        return float(1.0 / (c[0] + 1.0))
    return float(1.0 / (np.cosh(c[0]) + 1.0))


def convert(p: Point, target: Chart | str) -> Point:
    target = Chart(target)
    if target is p.chart:
        return p
    if p.chart is Chart.HYPERBOLOID and target is Chart.POLAR:
        X = p.coords
        r = np.arccosh(X[0])
        nrm = np.linalg.norm(X[1:])
        th = X[1:] / nrm if nrm > 0 else np.eye(p.dim)[0]
        return Point(Chart.POLAR, np.concatenate([[r], th]))
    x = _to_ball(p)
    if target is Chart.BALL:
        return Point(Chart.BALL, x)
    if target is Chart.HALFSPACE:
        return Point(Chart.HALFSPACE, ball_to_halfspace(x))
    if target is Chart.HYPERBOLOID:
        if p.chart is Chart.POLAR:
            r, th = p.coords[0], p.coords[1:]
            return Point(Chart.HYPERBOLOID, np.concatenate([[np.cosh(r)], np.sinh(r) * th]))
        return Point(Chart.HYPERBOLOID, ball_to_hyperboloid(x))
    r, th = ball_to_polar(x)
    return Point(Chart.POLAR, np.concatenate([[r], th]))


# --------------------------------------------------------------------------
# lapse functions


@dataclass(frozen=True)
class LapseFunction:
    """V = sum_mu a_mu V^mu, the restriction of a linear form on R^{n,1}."""

    coefficients: np.ndarray

    def __post_init__(self):
        a = np.array(self.coefficients, dtype=float, copy=True).reshape(-1)
        if a.size < 4:
            raise ValueError("lapse coefficients need length n+1 with n >= 3")
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)

    @property
    def dim(self) -> int:
        return self.coefficients.size - 1

    @classmethod
    def basis(cls, n: int, mu: int) -> "LapseFunction":
        a = np.zeros(n + 1)
        a[mu] = 1.0
        return cls(a)

    def __add__(self, other: "LapseFunction") -> "LapseFunction":
        return LapseFunction(self.coefficients + other.coefficients)

    def __mul__(self, c: float) -> "LapseFunction":
        return LapseFunction(c * self.coefficients)

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> np.ndarray:
        return ball_to_hyperboloid(np.asarray(x, dtype=float)) @ self.coefficients

    def value_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Value and coordinate differential in the ball chart."""
        x = np.asarray(x, dtype=float)
        a0, a = self.coefficients[0], self.coefficients[1:]
        r = rho_ball(x)[..., None]
        ax = np.sum(a * x, axis=-1, keepdims=True)
        val = a0 * (1.0 / r - 1.0) + ax / r
        grad = a0 * x / r**2 + a / r + x * ax / r**2
        return val[..., 0], grad

    def hessian(self, x: np.ndarray) -> np.ndarray:
        """Covariant Hessian in the ball chart."""
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        a0, a = self.coefficients[0], self.coefficients[1:]
        r = rho_ball(x)[..., None, None]
        eye = np.eye(n)
        xx = x[..., :, None] * x[..., None, :]
        ax = np.sum(a * x, axis=-1)[..., None, None]
        ddv0 = eye / r**2 + 2.0 * xx / r**3
        xa = x[..., :, None] * a[None, :] if x.ndim > 1 else np.outer(x, a)
        ddvi = (xa + np.swapaxes(xa, -1, -2) + ax * eye) / r**2 + 2.0 * ax * xx / r**3
        ddv = a0 * ddv0 + ddvi
        _, grad = self.value_grad(x)
        G = christoffel_ball(x)
        return ddv - np.einsum("...lka,...l->...ka", G, grad)


def lapse_eval(V: LapseFunction, p: Point):
    """Value, gradient and Hessian of a lapse function at ``p``.

    Ball and half-space results are coordinate components (the gradient is the
    differential dV).  Polar results use the b-orthonormal frame ``rho d/dx^i``;
    there ``Hess V = V * identity``.  Hyperboloid results are ambient: the
    gradient is the tangent vector DV in R^{n,1} and the Hessian is the matrix
    ``V (eta + eta X X^T eta)`` whose restriction to tangent vectors is V b.
    """
    if p.chart is Chart.HYPERBOLOID:
        X = p.coords
        a = V.coefficients
        val = float(a @ X)
        w = a.copy()
        w[0] = -w[0]
        grad = w + val * X
        eta = np.diag([-1.0] + [1.0] * p.dim)
        ex = eta @ X
        return val, grad, val * (eta + np.outer(ex, ex))
    if p.chart is Chart.POLAR:
        r, th = p.coords[0], p.coords[1:]
        a0, a = V.coefficients[0], V.coefficients[1:]
        at = a @ th
        val = a0 * np.cosh(r) + at * np.sinh(r)
        grad = (a0 * np.sinh(r) + at * np.cosh(r)) * th + (a - at * th)
        return float(val), grad, val * np.eye(p.dim)
    x = p.ball()
    val, grad = V.value_grad(x)
    hess = V.hessian(x)
    if p.chart is Chart.HALFSPACE:
        J = inversion_jacobian(p.coords)  # dx/dy
        grad = J.T @ grad
        hess = J.T @ hess @ J
    return float(val), grad, hess


# --------------------------------------------------------------------------
# exponential and logarithm


@dataclass(frozen=True)
class TangentVector:
    base: Point
    components: np.ndarray

    def __post_init__(self):
        if self.base.chart is not Chart.HYPERBOLOID:
            raise DomainError("tangent vectors are based on hyperboloid points")
        v = np.array(self.components, dtype=float, copy=True).reshape(-1)
        scale = max(1.0, float(np.abs(v).max(initial=0.0)) * self.base.coords[0])
        if abs(minkowski(v, self.base.coords)) > 1e-9 * scale:
            raise DomainError("vector is not tangent to the hyperboloid")
        v.setflags(write=False)
        object.__setattr__(self, "components", v)

    def norm(self) -> float:
        return float(np.sqrt(max(minkowski(self.components, self.components), 0.0)))


_F_SERIES = np.array(
    [1.0, -1 / 3, 2 / 15, -2 / 35, 8 / 315, -8 / 693, 16 / 3003, -16 / 6435]
)


def _log_factor(u: np.ndarray) -> np.ndarray:
    # f(u) = arccosh(1+u) / sqrt(2u + u^2), even series below 1e-4
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = u < 1e-4
    us = u[small]
    out[small] = np.polynomial.polynomial.polyval(us, _F_SERIES)
    ub = u[~small]
    out[~small] = np.log1p(ub + np.sqrt(2.0 * ub + ub * ub)) / np.sqrt(2.0 * ub + ub * ub)
    return out


def sinhc(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    out = np.ones_like(a)
    nz = a > 1e-4
    out[nz] = np.sinh(a[nz]) / a[nz]
    sm = ~nz
    out[sm] = 1.0 + a[sm] ** 2 / 6.0 + a[sm] ** 4 / 120.0
    return out


def renormalize(X: np.ndarray) -> np.ndarray:
    """Project back onto eta(X, X) = -1 when the drift exceeds 1e-13."""
    X = np.array(X, dtype=float, copy=True)
    fix = np.abs(minkowski(X, X) + 1.0) > 1e-13
    if np.any(fix):
        x0 = np.sqrt(1.0 + np.sum(X[..., 1:] ** 2, axis=-1))
        X[..., 0] = np.where(fix, x0, X[..., 0])
    return X


def exp_hyperboloid(X: np.ndarray, xi: np.ndarray) -> np.ndarray:
    a = np.sqrt(np.maximum(minkowski(xi, xi), 0.0))[..., None]
    Y = np.cosh(a) * X + sinhc(a) * xi
    return renormalize(Y)


def log_hyperboloid(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    U = Y - X
    u = np.maximum(0.5 * minkowski(U, U), 0.0)[..., None]
    return _log_factor(u) * (U - u * X)


def distance_hyperboloid(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    U = Y - X
    u = np.maximum(0.5 * minkowski(U, U), 0.0)
    return 2.0 * np.arcsinh(np.sqrt(0.5 * u))


def exp_map(X: Point, xi: TangentVector) -> Point:
    if X.chart is not Chart.HYPERBOLOID:
        raise DomainError("exp_map expects a hyperboloid point")
    return Point(Chart.HYPERBOLOID, exp_hyperboloid(X.coords, xi.components))


def log_map(X: Point, Y: Point) -> TangentVector:
    if X.chart is not Chart.HYPERBOLOID or Y.chart is not Chart.HYPERBOLOID:
        raise DomainError("log_map expects hyperboloid points")
    return TangentVector(X, log_hyperboloid(X.coords, Y.coords))


# --------------------------------------------------------------------------
# Lorentz isometries


@dataclass(frozen=True)
class LorentzMap:
    """An orthochronous Lorentz matrix acting on the hyperboloid.

    ``lapse_action`` is the matrix of V -> V o B on lapse coefficients, so
    that ``act_lapse(B, V).coefficients == B.lapse_action @ V.coefficients``.
    """

    matrix: np.ndarray

    def __post_init__(self):
        B = np.array(self.matrix, dtype=float, copy=True)
        m = B.shape[0]
        if B.shape != (m, m) or m < 4:
            raise ValueError("Lorentz matrix must be square of size n+1 >= 4")
        eta = np.diag([-1.0] + [1.0] * (m - 1))
        err = np.abs(B.T @ eta @ B - eta).max()
        if err > 1e-10 * max(1.0, np.abs(B).max() ** 2):
            raise ValueError(f"matrix does not preserve eta (defect {err:.2e})")
        if B[0, 0] <= 0.0:
            raise ValueError("time-reversing Lorentz maps are not orthochronous")
        B.setflags(write=False)
        object.__setattr__(self, "matrix", B)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def lapse_action(self) -> np.ndarray:
        return self.matrix.T

    @classmethod
    def identity(cls, n: int) -> "LorentzMap":
        return cls(np.eye(n + 1))

    def __matmul__(self, other: "LorentzMap") -> "LorentzMap":
        return LorentzMap(self.matrix @ other.matrix)

    def inverse(self) -> "LorentzMap":
        eta = np.diag([-1.0] + [1.0] * self.dim)
        return LorentzMap(eta @ self.matrix.T @ eta)

    def apply_hyperboloid(self, X: np.ndarray) -> np.ndarray:
        return renormalize(X @ self.matrix.T)

    def apply_ball(self, x: np.ndarray) -> np.ndarray:
        return hyperboloid_to_ball(self.apply_hyperboloid(ball_to_hyperboloid(x)))

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(self.dim + 1)))


def lorentz(kind: str, n: int, *, axes=None, angle: float = 0.0, axis: int = 1,
            rapidity: float = 0.0) -> LorentzMap:
    """Build a rotation or a boost.

    ``lorentz("rotation", n, axes=(i, j), angle=t)`` satisfies
    ``V^i o R = cos(t) V^i + sin(t) V^j``.  ``lorentz("boost", n, axis=a,
    rapidity=p)`` satisfies ``V^0 o B = cosh(p) V^0 + sinh(p) V^a``.
    Spatial axes are numbered 1..n.
    """
    B = np.eye(n + 1)
    if kind == "rotation":
        i, j = axes if axes is not None else (1, 2)
        if not (1 <= i <= n and 1 <= j <= n and i != j):
            raise ValueError(f"invalid rotation axes {axes}")
        c, s = np.cos(angle), np.sin(angle)
        B[i, i], B[i, j], B[j, i], B[j, j] = c, s, -s, c
    elif kind == "boost":
        if not 1 <= axis <= n:
            raise ValueError(f"invalid boost axis {axis}")
        if not np.isfinite(rapidity):
            raise ValueError("rapidity must be finite")
        c, s = np.cosh(rapidity), np.sinh(rapidity)
        B[0, 0], B[0, axis], B[axis, 0], B[axis, axis] = c, s, s, c
    else:
        raise ValueError(f"unknown Lorentz map kind {kind!r}")
    return LorentzMap(B)


def act_lapse(B: LorentzMap, V: LapseFunction) -> LapseFunction:
    """The lapse function V o B."""
    return LapseFunction(B.lapse_action @ V.coefficients)


# --------------------------------------------------------------------------
# invariant frame


def invariant_frame(X) -> np.ndarray:
    """Orthonormal frame (I^1, ..., I^n) at hyperboloid points, shape (..., n, n+1)."""
    if isinstance(X, Point):
        if X.chart is not Chart.HYPERBOLOID:
            X = convert(X, Chart.HYPERBOLOID)
        X = X.coords
    X = np.asarray(X, dtype=float)
    m = X.shape[-1]
    n = m - 1
    lead = np.zeros(m)
    lead[0] = lead[1] = 1.0
    inv = 1.0 / (X[..., 0] - X[..., 1])
    frame = np.empty(X.shape[:-1] + (n, m))
    frame[..., 0, :] = inv[..., None] * lead - X
    eye = np.eye(m)
    for A in range(2, m):
        frame[..., A - 1, :] = (X[..., A] * inv)[..., None] * lead + eye[A]
    return frame


# --------------------------------------------------------------------------
# pullback of b by x -> exp_x(zeta(x))


def exp_of_field(zeta: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Ball coordinates of exp_x(zeta(x)) for a ball-component vector field."""
    X = ball_to_hyperboloid(x)
    xi = ball_vector_to_ambient(x, zeta(x))
    return hyperboloid_to_ball(exp_hyperboloid(X, xi))


def _pullback_coefficients(a: np.ndarray):
    # (sinh^2 a - a^2)/a^4 and (sinh(2a)/(2a) - 1)/a^2, stable near a = 0
    a = np.asarray(a, dtype=float)
    q1 = np.empty_like(a)
    q2 = np.empty_like(a)
    sm = a < 1e-2
    s2 = a[sm] ** 2
    q1[sm] = 1 / 3 + s2 * (2 / 45 + s2 * (1 / 315 + s2 * 2 / 14175))
    q2[sm] = 2 / 3 + s2 * (2 / 15 + s2 * (4 / 315 + s2 * 2 / 2835))
    lg = ~sm
    al = a[lg]
    q1[lg] = (np.sinh(al) ** 2 - al**2) / al**4
    q2[lg] = (np.sinh(2 * al) / (2 * al) - 1.0) / al**2
    return q1, q2


def pullback_terms(zeta, x: np.ndarray, rel_step: float = DEFAULT_REL_STEP):
    """Return ``(b, b - Phi*b)`` in ball components, Phi(x) = exp_x(zeta(x)).

    The difference is assembled term by term so that it keeps full relative
    precision when zeta is tiny compared with the background.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[-1]
    r2 = rho_ball(x)[:, None, None] ** 2
    z = zeta(x)
    Dz = vector_derivative(zeta, x, rel_step)  # (N, k, i)
    t = np.sum(z * z, axis=-1) / r2[:, 0, 0]
    a = np.sqrt(t)
    q1, q2 = _pullback_coefficients(a)
    s = sinhc(a)
    cs = np.cosh(a) * s
    b = np.eye(n) / r2
    zflat = z / r2[:, :, 0]
    dt = 2.0 * np.einsum("nki,ni->nk", Dz, z) / r2[:, :, 0]
    bDD = np.einsum("nai,nbi->nab", Dz, Dz) / r2
    lie = (Dz + np.swapaxes(Dz, 1, 2)) / r2
    zz = zflat[:, :, None] * zflat[:, None, :]
    cross = zflat[:, :, None] * dt[:, None, :]
    cross = cross + np.swapaxes(cross, 1, 2)
    S = s[:, None, None]
    deficit = (
        -(np.sinh(a) ** 2)[:, None, None] * b
        - S**2 * bDD
        + S**2 * zz
        - cs[:, None, None] * lie
        + 0.25 * q1[:, None, None] * dt[:, :, None] * dt[:, None, :]
        + 0.5 * q2[:, None, None] * cross
    )
    return b, deficit


def pullback_metric(zeta, p, rel_step: float = DEFAULT_REL_STEP, guard: float = 5.0):
    """Components of Phi_zeta^* b in the ball chart at ``p``.

    ``p`` is a :class:`Point` or an array of ball points.  A warning is issued
    when |zeta| exceeds ``guard``.
    """
    x = np.atleast_2d(as_ball(p))
    z = zeta(x)
    nz = np.sqrt(np.sum(z * z, axis=-1)) / rho_ball(x)
    if np.any(nz > guard):
        warnings.warn(f"|zeta| = {nz.max():.3g} exceeds the guard {guard}", RuntimeWarning)
    b, deficit = pullback_terms(zeta, x, rel_step)
    out = b - deficit
    return out[0] if isinstance(p, Point) else out
