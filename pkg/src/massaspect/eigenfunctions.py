"""Solutions of Laplacian V = n V with prescribed boundary trace rho V = v0.

The solver convolves the half-space boundary density v with the Poisson
kernel.  In the variable w = (z - ybar)/y1 the representation reads

    V(y) = (1/y1) * integral v(ybar + y1 w) (1 + |w|^2)^(-n) dw,

and the integral over R^{n-1} is done with |w| = tan(u), Gauss nodes in u
and a product rule on S^{n-2}.  Ball points are first reflected onto the
positive x^1 axis, which keeps the kernel centred where the rule is accurate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma, sph_harm_y

from .differences import partials
from .geometry import (
    Chart,
    Point,
    as_ball,
    convert,
    inversion_jacobian,
    rho_ball,
)
from .quadrature import gauss_interval, sphere_rule, _product_rule

__all__ = [
    "DivergentIntegralError",
    "QuadratureError",
    "BoundaryFunction",
    "KernelQuadrature",
    "Eigenfunction",
    "integral_I",
    "integral_J",
    "j_equal",
    "j_unequal",
    "boundary_density",
    "solve",
    "hessian_deficit_kernel",
    "asymptotic_deficit",
    "real_spherical_harmonic",
]


class DivergentIntegralError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# closed-form integrals


def integral_I(n: int, beta: float) -> float:
    """I_{n,beta} = integral over R^{n-1} of (1 + |w|^2)^(-beta)."""
    if beta <= n / 2.0:
        raise DivergentIntegralError(f"I_(n,beta) diverges for beta <= n/2 (n={n}, beta={beta})")
    return float(np.pi ** ((n - 1) / 2.0) * gamma(beta - (n - 1) / 2.0) / gamma(beta))


def integral_J(n: int, alpha: float, beta: float) -> float:
    """J_{n,alpha,beta} = integral over R^{n-1} of |w^1|^alpha (1 + |w|^2)^(-beta)."""
    if not (beta > (n - 2) / 2.0 and -1.0 < alpha < 2.0 * beta - n + 1.0):
        raise DivergentIntegralError(f"J_(n,alpha,beta) diverges at n={n}, alpha={alpha}, beta={beta}")
    return float(
        np.pi ** ((n - 2) / 2.0)
        * gamma((alpha + 1.0) / 2.0)
        * gamma(beta - (n + alpha - 1.0) / 2.0)
        / gamma(beta)
    )


def j_equal(n: int) -> float:
    return 4 * n * integral_J(n, 4, n + 2) - integral_J(n, 2, n)


def j_unequal(n: int) -> float:
    # from J_= + (n-2) J_!= = 0
    return -j_equal(n) / (n - 2)


def deficit_prefactor(n: int) -> float:
    return float(np.pi ** ((n - 1) / 2.0) / 2.0 * gamma((n - 1) / 2.0) / gamma(n))


# --------------------------------------------------------------------------
# boundary data


def real_spherical_harmonic(l: int, m: int, theta: np.ndarray) -> np.ndarray:
    """Orthonormal real spherical harmonic Y_lm at unit vectors of R^3."""
    theta = np.asarray(theta, dtype=float)
    polar = np.arccos(np.clip(theta[..., 2], -1.0, 1.0))
    azim = np.arctan2(theta[..., 1], theta[..., 0])
    Y = sph_harm_y(l, abs(m), polar, azim)
    if m > 0:
        return np.sqrt(2.0) * (-1) ** m * Y.real
    if m < 0:
        return np.sqrt(2.0) * (-1) ** m * Y.imag
    return Y.real


@dataclass(frozen=True)
class BoundaryFunction:
    """A function on the unit sphere S^{n-1}.

    Build with :meth:`constant`, :meth:`coordinate`, :meth:`callback` or
    :meth:`harmonics`.  Callbacks take unit vectors of shape (..., n).
    """

    n: int
    kind: str
    data: object = field(compare=False)

    @classmethod
    def constant(cls, c: float, n: int) -> "BoundaryFunction":
        return cls(n, "constant", float(c))

    @classmethod
    def coordinate(cls, i: int, n: int) -> "BoundaryFunction":
        """The restriction of x^i, i in 1..n."""
        if not 1 <= i <= n:
            raise ValueError(f"coordinate index {i} out of range")
        return cls(n, "callback", lambda th, i=i: th[..., i - 1])

    @classmethod
    def callback(cls, fn: Callable[[np.ndarray], np.ndarray], n: int) -> "BoundaryFunction":
        return cls(n, "callback", fn)

    @classmethod
    def harmonics(cls, coeffs) -> "BoundaryFunction":
        """Real spherical-harmonic expansion on S^2, coefficients ordered by
        l then m = -l..l."""
        c = np.asarray(coeffs, dtype=float).reshape(-1)
        lmax = int(round(np.sqrt(c.size))) - 1
        if (lmax + 1) ** 2 != c.size:
            raise ValueError("harmonic coefficient count must be a perfect square")
        return cls(3, "harmonics", c)

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.kind == "constant":
            return np.full(theta.shape[:-1], self.data)
        if self.kind == "harmonics":
            out = np.zeros(theta.shape[:-1])
            idx = 0
            lmax = int(round(np.sqrt(self.data.size))) - 1
            for l in range(lmax + 1):
                for m in range(-l, l + 1):
                    if self.data[idx] != 0.0:
                        out = out + self.data[idx] * real_spherical_harmonic(l, m, theta)
                    idx += 1
            return out
        return np.asarray(self.data(theta), dtype=float)

    def __add__(self, other: "BoundaryFunction") -> "BoundaryFunction":
        return BoundaryFunction.callback(lambda th: self(th) + other(th), self.n)

    def __mul__(self, c: float) -> "BoundaryFunction":
        return BoundaryFunction.callback(lambda th: c * self(th), self.n)

    __rmul__ = __mul__


def stereographic(z: np.ndarray) -> np.ndarray:
    """Boundary point of the ball matching the half-space boundary point z."""
    z2 = np.sum(z * z, axis=-1, keepdims=True)
    return np.concatenate([(1.0 - z2) / (1.0 + z2), 2.0 * z / (1.0 + z2)], axis=-1)


def boundary_density(v0: BoundaryFunction, ybar: np.ndarray) -> np.ndarray:
    """Half-space boundary density v matching the ball boundary trace v0."""
    ybar = np.asarray(ybar, dtype=float)
    z2 = np.sum(ybar * ybar, axis=-1)
    return (1.0 + z2) / (2.0 * integral_I(v0.n, v0.n)) * v0(stereographic(ybar))


# --------------------------------------------------------------------------
# kernel quadrature


@dataclass(frozen=True)
class KernelQuadrature:
    """Orders of the rule on R^{n-1}: Gauss in u with |w| = tan(u), and a
    product rule of the given order on S^{n-2}."""

    radial_order: int = 48
    angular_order: int = 12

    def __post_init__(self):
        if self.radial_order < 8 or self.angular_order < 8:
            raise ValueError("kernel quadrature orders must be at least 8")

    def doubled(self) -> "KernelQuadrature":
        return KernelQuadrature(2 * self.radial_order, 2 * self.angular_order)

    def nodes(self, n: int):
        """Nodes w (M, n-1) and weights for the kernels K_n, K_{n+1}, K_{n+2}."""
        return _kernel_nodes(n, self.radial_order, self.angular_order)


_NODE_CACHE: dict = {}


def _kernel_nodes(n: int, radial_order: int, angular_order: int):
    key = (n, radial_order, angular_order)
    if key not in _NODE_CACHE:
        u, wu = gauss_interval(radial_order, 0.0, 0.5 * np.pi)
        om, wom = _product_rule(n - 1, angular_order)
        t, c = np.tan(u), np.cos(u)
        w = (t[:, None, None] * om[None]).reshape(-1, n - 1)
        base = wu * t ** (n - 2) / c**2
        ks = [(base * c ** (2 * beta))[:, None] * wom[None] for beta in (n, n + 1, n + 2)]
        _NODE_CACHE[key] = (w, tuple(k.reshape(-1) for k in ks))
    return _NODE_CACHE[key]


def _halfspace_moments(sample, y: np.ndarray, n: int, quad: KernelQuadrature, chunk: int = 128):
    """Kernel moments at half-space points.

    ``sample(z, idx)`` returns v at boundary points z (P, M, n-1) for the
    points ``idx`` of the batch.  Returns V, dV/dy and Hess V - V b, all in
    half-space coordinates.
    """
    w, (k0, k1, k2) = quad.nodes(n)
    N = y.shape[0]
    V = np.empty(N)
    dV = np.empty((N, n))
    T = np.empty((N, n, n))
    m = n - 1
    for s in range(0, N, chunk):
        idx = np.arange(s, min(N, s + chunk))
        yc = y[idx]
        y1 = yc[:, 0]
        z = yc[:, None, 1:] + y1[:, None, None] * w[None]
        vv = sample(z, idx)
        A0 = vv @ k0
        A1 = vv @ k1
        A2 = vv @ k2
        B1 = np.einsum("pm,m,mi->pi", vv, k1, w)
        B2 = np.einsum("pm,m,mi->pi", vv, k2, w)
        C2 = np.einsum("pm,m,mi,mj->pij", vv, k2, w, w)
        V[idx] = A0 / y1
        d1bar = ((n + 1) * A0 - 2 * n * A1) / y1
        dV[idx, 0] = d1bar / y1 - A0 / y1**2
        dV[idx, 1:] = 2 * n * B1 / y1[:, None] ** 2
        y3 = y1**3
        Tc = np.zeros((len(idx), n, n))
        Tc[:, 0, 0] = ((n * n - 1) * A0 - 4 * n * (n + 1) * (A1 - A2)) / y3
        t1 = 2 * n * (n + 1) * (B1 - 2 * B2) / y3[:, None]
        Tc[:, 0, 1:] = t1
        Tc[:, 1:, 0] = t1
        Tc[:, 1:, 1:] = (n + 1) * (4 * n * C2 - A0[:, None, None] * np.eye(m)) / y3[:, None, None]
        T[idx] = Tc
    return V, dV, T


def _householder_to_e1(x: np.ndarray) -> np.ndarray:
    """Symmetric orthogonal H_p with H_p x_p on the positive x^1 axis."""
    N, n = x.shape
    t = np.linalg.norm(x, axis=1)
    H = np.broadcast_to(np.eye(n), (N, n, n)).copy()
    xhat = np.zeros_like(x)
    nz = t > 0
    xhat[nz] = x[nz] / t[nz, None]
    u = xhat.copy()
    u[:, 0] -= 1.0
    un = np.sum(u * u, axis=1)
    flip = nz & (un > 1e-24)
    H[flip] -= 2.0 * u[flip, :, None] * u[flip, None, :] / un[flip, None, None]
    return H


@dataclass(frozen=True)
class Eigenfunction:
    """The solution V of Laplacian V = n V with rho V -> v0 at infinity."""

    v0: BoundaryFunction
    quadrature: KernelQuadrature = field(default_factory=KernelQuadrature)

    @property
    def n(self) -> int:
        return self.v0.n

    # half-space chart, direct evaluation at arbitrary y
    def evaluate_halfspace(self, y: np.ndarray):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        norm = 1.0 / (2.0 * integral_I(self.n, self.n))
        v0 = self.v0

        def sample(z, idx):
            z2 = np.sum(z * z, axis=-1)
            return (1.0 + z2) * norm * v0(stereographic(z))

        return _halfspace_moments(sample, y, self.n, self.quadrature)

    # ball chart, via reflection onto the x^1 axis
    def _evaluate_ball(self, x: np.ndarray):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = self.n
        H = _householder_to_e1(x)
        t = np.linalg.norm(x, axis=1)
        y = np.zeros_like(x)
        y[:, 0] = (1.0 - t) / (1.0 + t)
        norm = 1.0 / (2.0 * integral_I(n, n))
        v0 = self.v0

        def sample(z, idx):
            z2 = np.sum(z * z, axis=-1)
            th = np.einsum("pij,pmj->pmi", H[idx], stereographic(z))
            return (1.0 + z2) * norm * v0(th)

        V, dVy, Ty = _halfspace_moments(sample, y, n, self.quadrature)
        J = inversion_jacobian(y)  # dx/dy, diagonal at these points
        Jinv = np.linalg.inv(J)
        dVx = np.einsum("pji,pj->pi", Jinv, dVy)
        Tx = np.einsum("pai,pab,pbj->pij", Jinv, Ty, Jinv)
        dV = np.einsum("pij,pj->pi", H, dVx)
        T = np.einsum("pia,pab,pbj->pij", H, Tx, H)
        return V, dV, T

    def value(self, x: np.ndarray) -> np.ndarray:
        return self._evaluate_ball(x)[0]

    def value_grad(self, x: np.ndarray):
        V, dV, _ = self._evaluate_ball(x)
        return V, dV

    def hessian_deficit(self, x: np.ndarray) -> np.ndarray:
        """Hess V - V b in ball components."""
        return self._evaluate_ball(x)[2]

    def hessian(self, x: np.ndarray) -> np.ndarray:
        V, _, T = self._evaluate_ball(x)
        return T + V[:, None, None] * np.eye(self.n) / rho_ball(np.atleast_2d(x))[:, None, None] ** 2

    def self_convergence(self, x: np.ndarray) -> float:
        """Largest change of V relative to max(1, |V|) when all orders double."""
        coarse = self.value(x)
        fine = Eigenfunction(self.v0, self.quadrature.doubled()).value(x)
        return float(np.max(np.abs(fine - coarse) / np.maximum(1.0, np.abs(fine))))

    def check(self, x: np.ndarray, tol: float = 1e-8) -> None:
        d = self.self_convergence(x)
        if d > tol:
            raise QuadratureError(f"kernel quadrature not converged: doubling changes V by {d:.3e}")


def solve(V: Eigenfunction, p) -> float | np.ndarray:
    """Value of the eigenfunction at a point (any chart) or ball array."""
    if isinstance(p, Point):
        return float(V.value(p.ball())[0])
    return V.value(as_ball(p))


def hessian_deficit_kernel(V: Eigenfunction, p) -> np.ndarray:
    """Hess V - V b in half-space components at ``p``."""
    if isinstance(p, Point):
        y = convert(p, Chart.HALFSPACE).coords
        return V.evaluate_halfspace(y)[2][0]
    return V.evaluate_halfspace(np.asarray(p, dtype=float))[2]


def asymptotic_deficit(v0: BoundaryFunction, ybar: np.ndarray, step: float = 1e-3) -> np.ndarray:
    """Leading coefficient of y1 * (Hess V - V b)_ij, i, j >= 2, as y1 -> 0.

    Equals c/2 * ((n-1) d_ij v - delta_ij Laplacian v) with
    c = pi^((n-1)/2) Gamma((n-1)/2) / Gamma(n) and v the half-space boundary
    density.  The (1,1) and (1,i) entries have vanishing leading terms.
    """
    n = v0.n
    yb = np.atleast_2d(np.asarray(ybar, dtype=float))

    def dens(z):
        return boundary_density(v0, z)

    def grad(z):
        return partials(dens, z, step, scale=1.0)

    hess = partials(grad, yb, step, scale=1.0)  # (P, k, l)
    hess = 0.5 * (hess + np.swapaxes(hess, 1, 2))
    lap = np.einsum("pkk->p", hess)
    out = deficit_prefactor(n) * ((n - 1) * hess - lap[:, None, None] * np.eye(n - 1))
    return out[0] if np.ndim(ybar) == 1 else out
