"""Quadrature rules on intervals, round spheres and geodesic annuli."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_jacobi

__all__ = ["SphereRule", "sphere_area", "sphere_rule", "gauss_interval", "AnnulusRule", "annulus_rule"]


def sphere_area(n: int) -> float:
    """Area of the unit sphere S^{n-1} in R^n."""
    return float(2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0))


def gauss_interval(order: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (t + 1.0), half * w


@dataclass(frozen=True)
class SphereRule:
    """Nodes (unit vectors of R^n) and positive weights on S^{n-1}."""

    n: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(values, self.weights, axes=([-1], [0]))


@lru_cache(maxsize=64)
def _product_rule(m: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    if m == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if m == 2:
        k = 2 * order
        phi = 2.0 * np.pi * np.arange(k) / k
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1), np.full(k, 2.0 * np.pi / k)
    # x = (t, sqrt(1 - t^2) xi) with weight (1 - t^2)^((m-3)/2)
    alpha = 0.5 * (m - 3)
    t, wt = roots_jacobi(order, alpha, alpha)
    sub, wsub = _product_rule(m - 1, order)
    s = np.sqrt(1.0 - t * t)
    nodes = np.concatenate(
        [np.repeat(t, len(wsub))[:, None], (s[:, None, None] * sub[None]).reshape(-1, m - 1)], axis=1
    )
    weights = (wt[:, None] * wsub[None]).reshape(-1)
    return nodes, weights


def sphere_rule(n: int, order: int = 8, seed: int = 0, mc_points: int = 20000) -> SphereRule:
    """Product Gauss rule on S^{n-1}.

    Exact for polynomials of degree <= 2*order - 1.  For n > 6 the product
    rule gets expensive; a fixed-seed Monte Carlo rule is returned instead.
    """
    if order < 4:
        raise ValueError("sphere rule order must be at least 4")
    if n < 2:
        raise ValueError("sphere rules need n >= 2")
    if n > 6:
        warnings.warn(f"product sphere rule in dimension {n} is costly; using Monte Carlo", RuntimeWarning)
        g = np.random.default_rng(seed).standard_normal((mc_points, n))
        nodes = g / np.linalg.norm(g, axis=1, keepdims=True)
        return SphereRule(n, nodes, np.full(mc_points, sphere_area(n) / mc_points))
    nodes, weights = _product_rule(n, order)
    return SphereRule(n, nodes.copy(), weights.copy())


@dataclass(frozen=True)
class AnnulusRule:
    """Tensor rule on the geodesic annulus r in [k, k+1]."""

    r: np.ndarray  # radius per node
    theta: np.ndarray  # unit direction per node
    weights: np.ndarray  # includes sinh(r)^(n-1)

    @property
    def x(self) -> np.ndarray:
        return np.tanh(0.5 * self.r)[:, None] * self.theta


def annulus_rule(rule: SphereRule, r0: float, r1: float, radial_order: int = 16) -> AnnulusRule:
    rr, wr = gauss_interval(radial_order, r0, r1)
    m = len(rule.weights)
    r = np.repeat(rr, m)
    theta = np.tile(rule.nodes, (radial_order, 1))
    w = (wr[:, None] * np.sinh(rr)[:, None] ** (rule.n - 1) * rule.weights[None]).reshape(-1)
    return AnnulusRule(r, theta, w)
