"""Central finite-difference checks of backward gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autodiff import backward, constant, grad_of, make_value
from .fis import DEFAULT_GRID_POINTS, evalfis
from .training import ModelTemplate, ReparamVector, get_psi, get_theta, rmse

__all__ = ["central_differences", "relative_error", "GradcheckReport", "check_template"]

DEFAULT_STEP = 1e-6
DEFAULT_TOLERANCE = 1e-4
# absolute floor for the relative-error denominator; FD noise at step 1e-6
# is ~1e-10, so components below this are compared absolutely
REL_FLOOR = 1e-6


def central_differences(f: Callable[[np.ndarray], float], x0, step: float = DEFAULT_STEP) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    for i in np.ndindex(x0.shape):
        x = x0.copy()
        x[i] = x0[i] + step
        fp = f(x)
        x[i] = x0[i] - step
        fm = f(x)
        grad[i] = (fp - fm) / (2.0 * step)
    return grad


def relative_error(analytic, numeric, floor: float = REL_FLOOR) -> np.ndarray:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


@dataclass
class GradcheckReport:
    analytic: np.ndarray
    numeric: np.ndarray
    step: float
    tolerance: float

    @property
    def max_rel_error(self) -> float:
        return float(relative_error(self.analytic, self.numeric).max())

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def check_template(template: ModelTemplate, data, grid_points: int = DEFAULT_GRID_POINTS,
                   step: float = DEFAULT_STEP, tolerance: float = DEFAULT_TOLERANCE,
                   grad_hook: Callable[[np.ndarray], np.ndarray] | None = None) -> GradcheckReport:
    """Compare d(RMSE)/d(psi) from backward with central differences at theta0.

    ``grad_hook`` post-processes the analytic gradient; it exists so the
    check itself can be shown to fail on a wrong derivative.
    """
    m = np.asarray(data, dtype=np.float64)
    x, target = m[:, :-1], m[:, -1]
    layouts = template.layouts
    sizes = [lay.size for lay in layouts]
    psi0 = np.concatenate([get_psi(th, lay) for th, lay in zip(template.theta0, layouts)])

    def split(flat):
        return np.split(flat, np.cumsum(sizes)[:-1])

    psis = [make_value(p, requires_grad=True) for p in split(psi0)]
    thetas = [get_theta(ReparamVector(p, lay)) for p, lay in zip(psis, layouts)]
    loss = rmse(target, evalfis(x, template.build(*thetas), grid_points))
    backward(loss)
    analytic = np.concatenate([grad_of(p) for p in psis])
    if grad_hook is not None:
        analytic = grad_hook(analytic)

    def loss_at(flat):
        ths = [get_theta(ReparamVector(constant(p), lay)) for p, lay in zip(split(flat), layouts)]
        return rmse(target, evalfis(x, template.build(*ths), grid_points)).item()

    numeric = central_differences(loss_at, psi0, step)
    return GradcheckReport(analytic, numeric, step, tolerance)
