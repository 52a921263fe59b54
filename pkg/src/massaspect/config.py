"""Run configuration for the scenario runner (strict JSON schema)."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .charges import MAX_CUTOFF_RADIUS

SCENARIOS = {
    "wang": "mass vector of a Wang metric vs sphere moments of m (params: m_constant, m_linear, harmonics)",
    "kottler": "mass vector of the transversal Kottler metric, symmetry and linearity in m0 (params: m0)",
    "gauge": "charges before/after a pure-gauge chart change, and of a gauge perturbation of b "
             "(params: m_*, zeta_profile, zeta_amplitude, zeta_decay)",
    "boost": "mass vector under a boost vs the lapse-action prediction (params: m_*, rapidity, boost_axis)",
    "rotation": "mass vector under a rotation vs the lapse-action prediction (params: m_*, angle, rotation_axes)",
    "eigen_selftest": "kernel solver vs lapse functions for v0 = 1 and x^i, plus FD eigen-residual "
                      "(params: eigen_points)",
    "integrals_selftest": "closed forms of I and J vs brute-force quadrature, and the vanishing identity",
}

Scenario = Literal["wang", "kottler", "gauge", "boost", "rotation", "eigen_selftest", "integrals_selftest"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScenarioParams(_Strict):
    m_constant: float = 1.0
    m_linear: Optional[list[float]] = None
    harmonics: Optional[list[float]] = None
    m0: float = Field(0.1, ge=0.0, le=1.0)
    rapidity: float = Field(0.3, ge=-2.0, le=2.0)
    boost_axis: int = Field(1, ge=1)
    angle: float = 0.7
    rotation_axes: tuple[int, int] = (1, 2)
    zeta_profile: Literal["radial", "rotation"] = "radial"
    zeta_amplitude: float = Field(0.5, ge=-1.0, le=1.0)
    zeta_decay: float = Field(2.0, ge=1.0, le=4.0)
    eigen_points: int = Field(20, ge=1, le=200)


class QuadratureConfig(_Strict):
    sphere_order: int = Field(8, ge=4, le=24)
    radial_order: int = Field(16, ge=4, le=64)
    kernel_radial_order: int = Field(48, ge=8, le=256)
    kernel_angular_order: int = Field(12, ge=8, le=64)


class CutoffConfig(_Strict):
    profile: Literal["quintic", "septic"] = "quintic"
    k_min: int = Field(4, ge=2)
    k_max: int = Field(10, le=int(MAX_CUTOFF_RADIUS) - 1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.k_max - self.k_min < 3:
            raise ValueError("cutoff.k_max - cutoff.k_min must be at least 3 (the fit needs 4 samples)")
        return self


class Tolerances(_Strict):
    charge_rtol: float = Field(0.01, gt=0.0)
    covariance_rtol: float = Field(0.02, gt=0.0)
    eigen_rtol: float = Field(1e-6, gt=0.0)
    residual_tol: float = Field(1e-4, gt=0.0)
    integral_tol: float = Field(1e-8, gt=0.0)
    identity_tol: float = Field(1e-10, gt=0.0)


class OutputConfig(_Strict):
    csv: str = "convergence.csv"
    summary: str = "summary.json"
    plot: str = "convergence.svg"


class RunConfig(_Strict):
    dimension: int = Field(3, ge=3, le=6)
    scenario: Scenario
    params: ScenarioParams = ScenarioParams()
    quadrature: QuadratureConfig = QuadratureConfig()
    cutoff: CutoffConfig = CutoffConfig()
    fd_step: float = Field(1e-3, gt=0.0, le=5e-2)
    tolerances: Tolerances = Tolerances()
    output: OutputConfig = OutputConfig()
    rng_seed: int = 0

    @model_validator(mode="after")
    def _consistent(self):
        n = self.dimension
        p = self.params
        if p.m_linear is not None and len(p.m_linear) != n:
            raise ValueError(f"params.m_linear needs {n} entries")
        if p.harmonics is not None and n != 3:
            raise ValueError("params.harmonics is only available for dimension 3")
        if p.boost_axis > n:
            raise ValueError(f"params.boost_axis must be in 1..{n}")
        i, j = p.rotation_axes
        if not (1 <= i <= n and 1 <= j <= n and i != j):
            raise ValueError(f"params.rotation_axes must be two distinct axes in 1..{n}")
        # charges need k_min >= r0 + 1, with r0 the inner radius of the benchmark
        r0 = 1.0 + (abs(p.rapidity) if self.scenario == "boost" else 0.0)
        if self.cutoff.k_min < r0 + 1.0:
            raise ValueError(f"cutoff.k_min must be >= {r0 + 1.0:g} for scenario {self.scenario}")
        return self
