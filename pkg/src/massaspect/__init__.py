"""Mass and mass-aspect charges of asymptotically hyperbolic metrics.

Modules
-------
geometry        charts of H^n, lapse functions, exp/log, Lorentz maps, pullbacks
tensorcalc      covariant derivatives and perturbative curvature of g = b + e
eigenfunctions  Poisson-kernel solver for Laplacian V = n V
charges         cutoff, surface and Ricci charges; mass vector and projections
chartlab        Wang and Kottler benchmarks, chart changes, gauge experiments
cli             configuration-driven scenario runner
"""

__version__ = "0.1.0"

from .geometry import Chart, LapseFunction, LorentzMap, Point, lorentz  # noqa: E402
from .tensorcalc import MetricPerturbation  # noqa: E402
from .eigenfunctions import BoundaryFunction, Eigenfunction, KernelQuadrature  # noqa: E402
from .charges import CutoffFamily, charge_adm, mass_vector  # noqa: E402
from .chartlab import ChartChange, apply_chart_change, make_kottler, make_wang_metric  # noqa: E402

__all__ = [
    "Chart",
    "Point",
    "LapseFunction",
    "LorentzMap",
    "lorentz",
    "MetricPerturbation",
    "BoundaryFunction",
    "Eigenfunction",
    "KernelQuadrature",
    "CutoffFamily",
    "charge_adm",
    "mass_vector",
    "ChartChange",
    "apply_chart_change",
    "make_kottler",
    "make_wang_metric",
]
