"""Central finite differences with one Richardson step.

Fields on the ball vary on the Euclidean length scale rho(x), so the default
step is ``rel_step * rho(x)`` per point rather than a fixed coordinate step.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["DEFAULT_REL_STEP", "ball_scale", "partials", "richardson"]

DEFAULT_REL_STEP = 1e-3


def ball_scale(x: np.ndarray) -> np.ndarray:
    """Euclidean size of a unit hyperbolic step at ball points ``x``."""
    t = np.linalg.norm(x, axis=-1)
    return 0.5 * (1.0 - t) * (1.0 + t)


def richardson(coarse, fine, order: int = 2):
    """Combine estimates at steps h and h/2 whose error is O(h**order)."""
    f = 2.0**order
    return (f * fine - coarse) / (f - 1.0)


def partials(
    f: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    rel_step: float = DEFAULT_REL_STEP,
    scale: Callable[[np.ndarray], np.ndarray] | float | None = None,
) -> np.ndarray:
    """Coordinate partial derivatives of a batched field.

    Parameters
    ----------
    f : callable
        Maps points of shape ``(N, n)`` to values of shape ``(N, *S)``.
    x : ndarray, shape (N, n)
        Evaluation points.
    rel_step : float
        Step relative to ``scale``.
    scale : callable, float or None
        Local length scale. ``None`` uses the ball scale ``rho(x)``.

    Returns
    -------
    ndarray, shape (N, n, *S)
        ``out[p, k, ...]`` is the derivative along coordinate ``k``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    npts, n = x.shape
    if scale is None:
        s = ball_scale(x)
    elif callable(scale):
        s = np.asarray(scale(x), dtype=float)
    else:
        s = np.full(npts, float(scale))
    h = rel_step * s  # (N,)

    eye = np.eye(n)
    # offsets ordered (+h, -h, +h/2, -h/2) for every direction
    shifts = []
    for k in range(n):
        for fac in (1.0, -1.0, 0.5, -0.5):
            shifts.append(x + fac * h[:, None] * eye[k])
    vals = np.asarray(f(np.concatenate(shifts, axis=0)))
    vals = vals.reshape((n, 4, npts) + vals.shape[1:])
    hb = h.reshape((npts,) + (1,) * (vals.ndim - 3))
    coarse = (vals[:, 0] - vals[:, 1]) / (2.0 * hb)
    fine = (vals[:, 2] - vals[:, 3]) / hb
    d = richardson(coarse, fine, order=2)
    return np.moveaxis(d, 0, 1)
