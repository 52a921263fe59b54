"""Tensor fields on H^n and the perturbative curvature of g = b + e.

Everything is expressed in ball coordinates.  Tensor fields are batched
callbacks ``x (N, n) -> (N, n, ..., n)`` holding covariant components, and
derivative indices are prepended: ``DT[:, k, ...] = D_k T[...]``.  Indices
are raised and lowered with b unless a function says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .differences import DEFAULT_REL_STEP, partials
from .geometry import (
    Chart,
    LapseFunction,
    as_ball,
    christoffel_ball,
    rho_ball,
    vector_derivative,
)

__all__ = [
    "NotPositiveDefiniteError",
    "MetricPerturbation",
    "InverseCorrection",
    "CurvatureSample",
    "inverse_correction",
    "covariant_derivative",
    "christoffel",
    "scal_linear",
    "scal_exact",
    "scal_deviation",
    "einstein_linear",
    "curvature_sample",
    "lie_derivative_b",
    "conformal_killing",
]

Field = Callable[[np.ndarray], np.ndarray]


class NotPositiveDefiniteError(ValueError):
    def __init__(self, eigenvalue: float):
        super().__init__(f"g = b + e is not positive definite (eigenvalue {eigenvalue:.3g} of b^-1 g)")
        self.eigenvalue = eigenvalue


def _batch(p) -> tuple[np.ndarray, bool]:
    x = as_ball(p)
    single = x.ndim == 1
    return np.atleast_2d(x), single


def _connection(T: np.ndarray, G: np.ndarray) -> np.ndarray:
    """sum over slots s of G^l_{k a_s} T_{..l..}, with k prepended."""
    n = G.shape[-1]
    out = np.zeros((T.shape[0], n) + T.shape[1:])
    for s in range(T.ndim - 1):
        Ts = np.moveaxis(T, 1 + s, -1)
        C = np.einsum("nlka,n...l->nk...a", G, Ts)
        out += np.moveaxis(C, -1, 2 + s)
    return out


def covariant_derivative(T: Field, p, rel_step: float = DEFAULT_REL_STEP,
                         partial: Field | None = None) -> np.ndarray:
    """Covariant derivative of a covariant tensor field with respect to b.

    ``partial`` may supply exact coordinate derivatives in place of finite
    differences.
    """
    x, single = _batch(p)
    dT = partial(x) if partial is not None else partials(T, x, rel_step)
    out = dT - _connection(T(x), christoffel_ball(x))
    return out[0] if single else out


@dataclass(frozen=True)
class MetricPerturbation:
    """e = g - b as a batched callback of ball coordinates.

    ``de`` optionally returns exact coordinate derivatives ``d_k e_ij`` with
    shape (N, n, n, n).  ``inner_radius`` is the geodesic radius below which
    the field is not meaningful.
    """

    e: Field
    n: int
    de: Field | None = None
    decay_order: float | None = None
    wang: bool = False
    inner_radius: float = 0.0
    rel_step: float = DEFAULT_REL_STEP
    chart: Chart = Chart.BALL
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if Chart(self.chart) is not Chart.BALL:
            raise ValueError("metric perturbations are given in ball components")
        if self.n < 3:
            raise ValueError("dimension must be at least 3")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.e(np.atleast_2d(x))

    def partial(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.de is not None:
            return self.de(x)
        return partials(self.e, x, self.rel_step)

    def covariant(self, x: np.ndarray) -> np.ndarray:
        """De with ``De[:, k, i, j] = D_k e_ij``."""
        x = np.atleast_2d(x)
        return self.partial(x) - _connection(self.e(x), christoffel_ball(x))

    def second_covariant(self, x: np.ndarray) -> np.ndarray:
        """DDe with ``DDe[:, k, l, i, j] = D_k D_l e_ij``."""
        return covariant_derivative(self.covariant, x, self.rel_step)

    def mixed(self, x: np.ndarray) -> np.ndarray:
        """E = b^-1 e, the endomorphism form of e."""
        x = np.atleast_2d(x)
        return rho_ball(x)[:, None, None] ** 2 * self.e(x)

    def norm_b(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.mixed(x), axis=(1, 2))

    def equivalence_constant(self, x: np.ndarray) -> float:
        """Smallest C with b/C <= g <= C b on the sampled points."""
        lam = np.linalg.eigvalsh(self.mixed(x))
        lo, hi = 1.0 + lam.min(), 1.0 + lam.max()
        if lo <= 0.0:
            raise NotPositiveDefiniteError(lo)
        return float(max(hi, 1.0 / lo))

    # linear structure, used by linearity checks
    def __add__(self, other: "MetricPerturbation") -> "MetricPerturbation":
        e1, e2 = self.e, other.e
        return MetricPerturbation(lambda x: e1(x) + e2(x), self.n,
                                  inner_radius=max(self.inner_radius, other.inner_radius),
                                  rel_step=self.rel_step)

    def scaled(self, c: float) -> "MetricPerturbation":
        e, de = self.e, self.de
        return MetricPerturbation(lambda x: c * e(x), self.n,
                                  de=None if de is None else (lambda x: c * de(x)),
                                  decay_order=self.decay_order, wang=self.wang,
                                  inner_radius=self.inner_radius, rel_step=self.rel_step)

    @classmethod
    def zero(cls, n: int) -> "MetricPerturbation":
        return cls(lambda x: np.zeros(x.shape[:-1] + (n, n)), n,
                   de=lambda x: np.zeros(x.shape[:-1] + (n, n, n)))


@dataclass(frozen=True)
class InverseCorrection:
    """g^{ij} = b^{ij} + f^{ij}; ``constant`` bounds |f| <= C |e|."""

    f: np.ndarray
    constant: float


def _mixed_inverse_correction(E: np.ndarray) -> np.ndarray:
    # F = (I + E)^-1 - I = -(I + E)^-1 E, free of cancellation for small E
    n = E.shape[-1]
    return -np.linalg.solve(np.eye(n) + E, E)


def inverse_correction(e_matrix: np.ndarray, rho: float | None = None) -> InverseCorrection:
    """Solve for the inverse-metric correction of b + e.

    With ``rho`` given, ``e_matrix`` holds ball components at a point where
    b = rho^-2 delta; otherwise b is taken to be the identity.
    """
    e = np.asarray(e_matrix, dtype=float)
    r2 = 1.0 if rho is None else rho**2
    E = r2 * e
    lam = np.linalg.eigvalsh(0.5 * (E + E.T))
    if 1.0 + lam.min() <= 0.0:
        raise NotPositiveDefiniteError(1.0 + lam.min())
    F = _mixed_inverse_correction(E)
    return InverseCorrection(f=r2 * F, constant=float(1.0 / (1.0 + lam.min())))


def christoffel(e: MetricPerturbation, p) -> np.ndarray:
    """Difference tensor of the Levi-Civita connections of g and b.

    Returns ``G[:, k, i, j] = Gamma^k_ij``.
    """
    x, single = _batch(p)
    G = _christoffel(e, x)
    return G[0] if single else G


def _inverse_metric(e: MetricPerturbation, x: np.ndarray) -> np.ndarray:
    r2 = rho_ball(x)[:, None, None] ** 2
    E = r2 * e(x)
    lam = np.linalg.eigvalsh(E)
    if np.any(1.0 + lam.min(axis=-1) <= 0.0):
        raise NotPositiveDefiniteError(float((1.0 + lam.min(axis=-1)).min()))
    n = x.shape[-1]
    return (np.eye(n) + _mixed_inverse_correction(E)) * r2


def _christoffel(e: MetricPerturbation, x: np.ndarray) -> np.ndarray:
    De = e.covariant(x)
    T = (np.einsum("nilj->nlij", De) + np.einsum("njil->nlij", De) - De)
    return 0.5 * np.einsum("nkl,nlij->nkij", _inverse_metric(e, x), T)


def _linear_parts(e: MetricPerturbation, x: np.ndarray):
    r2 = rho_ball(x) ** 2
    DDe = e.second_covariant(x)
    tr = r2 * np.einsum("nii->n", e(x))
    divdiv = r2**2 * np.einsum("nkaak->n", DDe)
    lap_tr = r2**2 * np.einsum("nkkii->n", DDe)
    return tr, divdiv, lap_tr, DDe


def scal_linear(e: MetricPerturbation, p) -> np.ndarray:
    """(n-1) tr e + div div e - Laplacian tr e."""
    x, single = _batch(p)
    tr, divdiv, lap_tr, _ = _linear_parts(e, x)
    out = (e.n - 1) * tr + divdiv - lap_tr
    return out[0] if single else out


def einstein_linear(e: MetricPerturbation, p) -> np.ndarray:
    """Linearisation at b of Ric - Scal g / 2 - (n-1)(n-2) g / 2."""
    x, single = _batch(p)
    n = e.n
    tr, divdiv, lap_tr, DDe = _linear_parts(e, x)
    r2 = rho_ball(x) ** 2
    first = 0.5 * r2[:, None, None] * (
        np.einsum("nkijk->nij", DDe)
        + np.einsum("nkjik->nij", DDe)
        - np.einsum("nkkij->nij", DDe)
        - np.einsum("nijkk->nij", DDe)
    )
    sl = (n - 1) * tr + divdiv - lap_tr
    b = np.eye(n) / r2[:, None, None]
    out = first - 0.5 * sl[:, None, None] * b + (n - 1) * e(x)
    return out[0] if single else out


def scal_deviation(e: MetricPerturbation, p) -> np.ndarray:
    """Scal^g + n(n-1), assembled without the cancellation of the constant."""
    x, single = _batch(p)
    n = e.n
    r2 = rho_ball(x) ** 2
    E = r2[:, None, None] * e(x)
    F = _mixed_inverse_correction(E)
    ginv = (np.eye(n) + F) * r2[:, None, None]
    ric_part = -(n - 1) * np.einsum("nii->n", F)

    G = _christoffel(e, x)

    def lowered(y):
        return _christoffel(e, y) / rho_ball(y)[:, None, None, None] ** 2

    DG = covariant_derivative(lowered, x, e.rel_step)  # [a, k, i, j] = D_a Gamma_kij
    div1 = r2[:, None, None] * np.einsum("niijl->njl", DG)
    div2 = r2[:, None, None] * np.einsum("nliji->njl", DG)
    trG = np.einsum("niip->np", G)
    quad1 = np.einsum("np,npjl->njl", trG, G)
    quad2 = np.einsum("nilp,npji->njl", G, G)
    out = ric_part + np.einsum("njl,njl->n", ginv, div1 - div2 + quad1 - quad2)
    return out[0] if single else out


def scal_exact(e: MetricPerturbation, p) -> np.ndarray:
    return scal_deviation(e, p) - e.n * (e.n - 1)


@dataclass(frozen=True)
class CurvatureSample:
    scal_exact: np.ndarray
    scal_linear: np.ndarray
    einstein_linear: np.ndarray
    remainder: np.ndarray


def curvature_sample(e: MetricPerturbation, p) -> CurvatureSample:
    dev = scal_deviation(e, p)
    lin = scal_linear(e, p)
    return CurvatureSample(
        scal_exact=dev - e.n * (e.n - 1),
        scal_linear=lin,
        einstein_linear=einstein_linear(e, p),
        remainder=dev - lin,
    )


def lie_derivative_b(zeta: Field, p, rel_step: float = DEFAULT_REL_STEP) -> np.ndarray:
    """L_zeta b = D_i zeta_j + D_j zeta_i for a ball-component vector field."""
    x, single = _batch(p)
    Dz = vector_derivative(zeta, x, rel_step)
    out = (Dz + np.swapaxes(Dz, 1, 2)) / rho_ball(x)[:, None, None] ** 2
    return out[0] if single else out


def divergence(zeta: Field, p, rel_step: float = DEFAULT_REL_STEP) -> np.ndarray:
    x, single = _batch(p)
    out = np.einsum("nii->n", vector_derivative(zeta, x, rel_step))
    return out[0] if single else out


@dataclass(frozen=True)
class ConformalKillingSample:
    vector: np.ndarray  # ball components of X
    derivative: np.ndarray  # [:, k, i] = (D_k X)^i
    divergence: np.ndarray


def conformal_killing(mu: int, p, n: int | None = None) -> ConformalKillingSample:
    """The field DV^mu, with D X = V^mu id and div X = n V^mu."""
    x, single = _batch(p)
    n = x.shape[-1] if n is None else n
    V = LapseFunction.basis(n, mu)
    val, grad = V.value_grad(x)
    r2 = rho_ball(x)[:, None] ** 2
    vec = r2 * grad
    D = r2[:, :, None] * V.hessian(x)
    div = np.einsum("nii->n", D)
    if single:
        return ConformalKillingSample(vec[0], D[0], div[0])
    return ConformalKillingSample(vec, D, div)
