"""Mass functionals of a perturbation e = g - b.

Charges are computed from annulus integrals against the gradient of radial
cutoffs chi(r - k), then extrapolated in k.  Three formulations are offered:
the cutoff (ADM-style) charge in standard or Hessian form, the geodesic-sphere
surface integral and the Ricci charge built from the linearised modified
Einstein tensor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .eigenfunctions import BoundaryFunction, Eigenfunction, KernelQuadrature
from .geometry import LapseFunction, rho_ball
from .quadrature import SphereRule, annulus_rule, gauss_interval, sphere_rule
from .tensorcalc import MetricPerturbation, einstein_linear, scal_deviation, scal_linear

__all__ = [
    "CutoffProfile",
    "QUINTIC",
    "SEPTIC",
    "CutoffFamily",
    "ChargeResult",
    "MassVector",
    "RadialTestFunction",
    "charge_integrand_U",
    "charge_adm",
    "charge_surface",
    "charge_ricci",
    "mass_vector",
    "mass_aspect_project",
    "extrapolate",
    "sphere_rule",
]

MAX_CUTOFF_RADIUS = 13.0


@dataclass(frozen=True)
class CutoffProfile:
    """chi = 1 on (-inf, 0], chi = 0 on [1, inf), C^2 in between."""

    name: str
    chi: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]

    def __call__(self, t: np.ndarray):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        return self.chi(t), self.d1(t), self.d2(t)


QUINTIC = CutoffProfile(
    "quintic",
    lambda t: 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t),
    lambda t: -30.0 * t**2 * (1.0 - t) ** 2,
    lambda t: -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
)

SEPTIC = CutoffProfile(
    "septic",
    lambda t: 1.0 - t**4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t**3),
    lambda t: -140.0 * t**3 * (1.0 - t) ** 3,
    lambda t: -420.0 * t**2 * (1.0 - t) ** 2 * (1.0 - 2.0 * t),
)

PROFILES = {p.name: p for p in (QUINTIC, SEPTIC)}


@dataclass(frozen=True)
class CutoffFamily:
    """Cutoffs chi(r - k) for k in ``schedule``."""

    profile: CutoffProfile = QUINTIC
    schedule: tuple = tuple(range(4, 11))

    def __post_init__(self):
        ks = tuple(float(k) for k in self.schedule)
        if not ks:
            raise ValueError("empty cutoff schedule")
        if max(ks) + 1.0 > MAX_CUTOFF_RADIUS:
            raise ValueError(f"cutoff schedule reaches r = {max(ks) + 1:g}; "
                             f"double precision caps annuli at r <= {MAX_CUTOFF_RADIUS:g}")
        object.__setattr__(self, "schedule", ks)

    def evaluate(self, r: np.ndarray, k: float):
        return self.profile(np.asarray(r) - k)

    def radial_identity(self, n: int, order: int = 16) -> float:
        """integral over [0, 1] of -n chi' + chi''; equals n."""
        t, w = gauss_interval(order, 0.0, 1.0)
        _, d1, d2 = self.profile(t)
        return float(np.dot(w, -n * d1 + d2))


@dataclass(frozen=True)
class ChargeResult:
    samples: tuple  # ((k, value), ...)
    extrapolated: float
    error_estimate: float
    converged: bool
    diagnostics: str = ""

    @property
    def last(self) -> float:
        return float(self.samples[-1][1])


@dataclass(frozen=True)
class MassVector:
    p: np.ndarray
    results: tuple = field(default=(), compare=False)

    def is_future_timelike(self) -> bool:
        return bool(self.p[0] > np.linalg.norm(self.p[1:]))


# --------------------------------------------------------------------------
# extrapolation


def extrapolate(ks: Sequence[float], values: Sequence[float], rtol: float = 1e-2,
                atol: float = 1e-8, window: int = 5) -> tuple[float, float, bool, str]:
    """Fit p_k = p + a exp(-gamma k) over the last ``window`` samples.

    Returns ``(p, error, converged, diagnostics)`` where the error is
    |last - p| plus the fit residual.  Falls back to the last sample with
    error |last - previous| when the fit is not trustworthy.
    """
    ks = np.asarray(ks, dtype=float)
    vals = np.asarray(values, dtype=float)
    last = vals[-1]
    prev = vals[-2] if len(vals) > 1 else np.nan
    scale = max(np.abs(vals).max(), atol)

    def fallback(reason):
        err = abs(last - prev) if np.isfinite(prev) else np.inf
        return float(last), float(err), bool(err <= max(rtol * abs(last), atol)), reason

    if len(vals) < 4:
        return fallback("fewer than 4 samples; using last sample")
    if np.ptp(vals) <= 1e-14 * scale:
        return float(last), 0.0, True, "samples constant"
    kk = ks[-window:]
    vv = vals[-window:]
    k_last = kk[-1]

    def resid(q):
        p, a, g = q
        return (p + a * np.exp(-g * (kk - k_last)) - vv) / scale

    try:
        sol = least_squares(resid, x0=[last, 0.5 * (vv[-1] - vv[0]) or 1e-3 * scale, 1.0],
                            bounds=([-np.inf, -np.inf, 1e-3], [np.inf, np.inf, 10.0]),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return fallback(f"fit failed ({exc}); using last sample")
    p, a, g = sol.x
    spread = np.abs(np.diff(vv)).max()
    if (not sol.success or g <= 1.01e-3 or g >= 9.99 or not np.isfinite(p)
            or abs(p - last) > 2.0 * spread + atol):
        return fallback("exponential fit ill-conditioned; using last sample")
    rms = float(np.sqrt(np.mean((sol.fun * scale) ** 2)))
    err = abs(last - p) + rms
    return float(p), float(err), bool(err <= max(rtol * abs(p), atol)), f"gamma={g:.3f}"


def _result(ks, vals, rtol=1e-2) -> ChargeResult:
    p, err, ok, diag = extrapolate(ks, vals, rtol=rtol)
    return ChargeResult(tuple((float(k), float(v)) for k, v in zip(ks, vals)), p, err, ok, diag)


# --------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class RadialTestFunction:
    """V = f(r) with derivative f'(r), e.g. exp(-2 r)."""

    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def exponential(cls, rate: float) -> "RadialTestFunction":
        return cls(lambda r: np.exp(-rate * r), lambda r: -rate * np.exp(-rate * r))

    def value_grad(self, x: np.ndarray):
        x = np.atleast_2d(x)
        t = np.linalg.norm(x, axis=1)
        r = 2.0 * np.arctanh(t)
        dr = x / (t * rho_ball(x))[:, None]
        return self.f(r), self.df(r)[:, None] * dr


def _grad_of(V) -> Callable:
    return V.value_grad


# --------------------------------------------------------------------------
# integrands


def charge_integrand_U(V, dV, e, De, x, r, d1, d2=None, form: str = "standard") -> np.ndarray:
    """Pointwise charge integrand against N = -D chi for a radial cutoff.

    ``d1``/``d2`` are chi' and chi'' at the nodes.  The standard form needs
    De; the Hessian form needs ``d2`` instead.
    """
    x = np.atleast_2d(x)
    n = x.shape[1]
    rho = rho_ball(x)
    r2 = rho**2
    theta = x / np.linalg.norm(x, axis=1)[:, None]
    tr = r2 * np.einsum("nii->n", e)
    DV = r2[:, None] * dV
    if form == "standard":
        N = -(rho * d1)[:, None] * theta
        div = r2[:, None] * np.einsum("naaj->nj", De)
        dtr = r2[:, None] * np.einsum("njaa->nj", De)
        return (V * np.einsum("nj,nj->n", div - dtr, N)
                + tr * np.einsum("nj,nj->n", dV, N)
                - np.einsum("ni,nij,nj->n", DV, e, N))
    if form == "hessian":
        coth = 1.0 / np.tanh(r)
        dr = theta / rho[:, None]
        drdr = dr[:, :, None] * dr[:, None, :]
        b = np.eye(n) / r2[:, None, None]
        H = d2[:, None, None] * drdr + (d1 * coth)[:, None, None] * (b - drdr)
        Dchi = (rho * d1)[:, None] * theta
        lap = d2 + (n - 1) * coth * d1
        return (V * r2**2 * np.einsum("nij,nij->n", e, H)
                + 2.0 * np.einsum("ni,nij,nj->n", DV, e, Dchi)
                - tr * (2.0 * np.einsum("nj,nj->n", dV, Dchi) + V * lap))
    raise ValueError(f"unknown integrand form {form!r}")


def _annulus_charges(e: MetricPerturbation, tests, cutoffs: CutoffFamily, rule: SphereRule,
                     form: str, radial_order: int) -> np.ndarray:
    out = np.zeros((len(tests), len(cutoffs.schedule)))
    for j, k in enumerate(cutoffs.schedule):
        if k < e.inner_radius:
            raise ValueError(f"cutoff at k={k:g} enters the region r < {e.inner_radius:g} "
                             "where the perturbation is not defined")
        A = annulus_rule(rule, k, k + 1.0, radial_order)
        x = A.x
        ex = e(x)
        De = e.covariant(x) if form == "standard" else None
        _, d1, d2 = cutoffs.evaluate(A.r, k)
        for i, V in enumerate(tests):
            val, grad = V.value_grad(x)
            U = charge_integrand_U(val, grad, ex, De, x, A.r, d1, d2, form)
            out[i, j] = np.dot(A.weights, U)
    return out


def _default_rule(n: int, rule: SphereRule | None) -> SphereRule:
    return sphere_rule(n, 8) if rule is None else rule


def charge_adm(e: MetricPerturbation, V, cutoffs: CutoffFamily | None = None,
               rule: SphereRule | None = None, form: str | None = None,
               radial_order: int = 16, rtol: float = 1e-2) -> ChargeResult:
    """Cutoff charge p(e, V).

    ``V`` is a LapseFunction, an Eigenfunction or any object with
    ``value_grad``.  Eigenfunctions default to the Hessian form.
    """
    cutoffs = CutoffFamily() if cutoffs is None else cutoffs
    rule = _default_rule(e.n, rule)
    if form is None:
        form = "hessian" if isinstance(V, Eigenfunction) else "standard"
    vals = _annulus_charges(e, [V], cutoffs, rule, form, radial_order)[0]
    return _result(cutoffs.schedule, vals, rtol)


def mass_vector(e: MetricPerturbation, cutoffs: CutoffFamily | None = None,
                rule: SphereRule | None = None, form: str = "standard",
                radial_order: int = 16) -> MassVector:
    """p^mu = p(e, V^mu) / n."""
    cutoffs = CutoffFamily() if cutoffs is None else cutoffs
    rule = _default_rule(e.n, rule)
    tests = [LapseFunction.basis(e.n, mu) for mu in range(e.n + 1)]
    vals = _annulus_charges(e, tests, cutoffs, rule, form, radial_order)
    results = tuple(_result(cutoffs.schedule, v) for v in vals)
    return MassVector(np.array([r.extrapolated for r in results]) / e.n, results)


def mass_aspect_project(e: MetricPerturbation, test_functions: Sequence[BoundaryFunction],
                        cutoffs: CutoffFamily | None = None, rule: SphereRule | None = None,
                        quadrature: KernelQuadrature | None = None,
                        radial_order: int = 16) -> np.ndarray:
    """P(e, v) / n for each boundary function v, via eigenfunction test functions."""
    cutoffs = CutoffFamily() if cutoffs is None else cutoffs
    rule = _default_rule(e.n, rule)
    quad = KernelQuadrature() if quadrature is None else quadrature
    tests = [Eigenfunction(v, quad) for v in test_functions]
    vals = _annulus_charges(e, tests, cutoffs, rule, "hessian", radial_order)
    return np.array([_result(cutoffs.schedule, v).extrapolated for v in vals]) / e.n


def charge_surface(e: MetricPerturbation, V, r: float, rule: SphereRule | None = None) -> float:
    """Flux integral over the geodesic sphere S_r(0) with outward unit normal."""
    rule = _default_rule(e.n, rule)
    theta = rule.nodes
    x = np.tanh(0.5 * r) * theta
    rho = rho_ball(x)
    nu = rho[:, None] * theta
    r2 = rho**2
    ex = e(x)
    De = e.covariant(x)
    val, dV = V.value_grad(x)
    div = r2[:, None] * np.einsum("naaj->nj", De)
    dtr = r2[:, None] * np.einsum("njaa->nj", De)
    tr = r2 * np.einsum("nii->n", ex)
    DV = r2[:, None] * dV
    U = (val * np.einsum("nj,nj->n", div - dtr, nu) + tr * np.einsum("nj,nj->n", dV, nu)
         - np.einsum("ni,nij,nj->n", DV, ex, nu))
    return float(np.sinh(r) ** (e.n - 1) * np.dot(rule.weights, U))


def _vector_field(X, n: int) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(X, (int, np.integer)):
        X = LapseFunction.basis(n, int(X))
    if hasattr(X, "value_grad"):
        def field(x, V=X):
            _, g = V.value_grad(x)
            return rho_ball(x)[:, None] ** 2 * g
        return field
    return X


def charge_ricci(e: MetricPerturbation, X, cutoffs: CutoffFamily | None = None,
                 rule: SphereRule | None = None, exact_scalar: bool = False,
                 radial_order: int = 16) -> ChargeResult:
    """Ricci charge: limit of the annulus integral of G(X, -D chi).

    ``X`` is a conformal Killing index mu (meaning D V^mu), a LapseFunction or
    Eigenfunction V (meaning DV) or a ball-component vector field callback.
    With ``exact_scalar`` the scalar-curvature part of G uses the exact
    Scal^g + n(n-1) instead of its linearisation.
    """
    cutoffs = CutoffFamily() if cutoffs is None else cutoffs
    rule = _default_rule(e.n, rule)
    field = _vector_field(X, e.n)
    vals = []
    for k in cutoffs.schedule:
        A = annulus_rule(rule, k, k + 1.0, radial_order)
        x = A.x
        G = einstein_linear(e, x)
        if exact_scalar:
            extra = scal_deviation(e, x) - scal_linear(e, x)
            G = G - 0.5 * extra[:, None, None] * np.eye(e.n) / rho_ball(x)[:, None, None] ** 2
        _, d1, _ = cutoffs.evaluate(A.r, k)
        N = -(rho_ball(x) * d1)[:, None] * A.theta
        vals.append(np.dot(A.weights, np.einsum("ni,nij,nj->n", field(x), G, N)))
    return _result(cutoffs.schedule, np.array(vals))
