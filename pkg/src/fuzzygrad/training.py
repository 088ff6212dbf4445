"""Gradient-descent training of membership breakpoints.

Breakpoints live in constrained space (each MF's breakpoints strictly
increasing inside (0, 1)); the optimiser works on unconstrained ``psi``.
Per ordered chain of length k::

    t_1 = psi_1,   t_j = t_{j-1} + softplus(psi_j),   theta_j = sigmoid(t_j)

so every update of ``psi`` maps back to a valid ordering by construction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .autodiff import (
    Value,
    backward,
    constant,
    grad_of,
    make_value,
    scoped_graph,
    stack_rows,
    unary_op,
)
from .errors import TrainingError
from .fis import DEFAULT_GRID_POINTS, Fis, addmf, addrule, addvar, evalfis, newfis

__all__ = [
    "ChainLayout",
    "ReparamVector",
    "ModelTemplate",
    "TrainConfig",
    "TrainResult",
    "IRIS_LAYOUT",
    "IRIS_THETA0",
    "IRIS_RULES",
    "IRIS_TEMPLATE",
    "get_theta",
    "get_psi",
    "build_iris_fis",
    "rmse",
    "train",
    "classify",
    "count_misclassified",
    "write_history",
    "check_chains",
]


@dataclass(frozen=True)
class ChainLayout:
    """Partition of a parameter vector into ordered breakpoint chains."""

    chains: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return max(stop for _, stop in self.chains)


# Low.(c, d) | Mid.(a, b, c, d) | High.(a, b)
IRIS_LAYOUT = ChainLayout(((0, 2), (2, 6), (6, 8)))
IRIS_THETA0 = (0.1, 0.39, 0.11, 0.4, 0.6, 0.89, 0.61, 0.9)
# rows: [length MF, width MF, species MF, weight, 1 = AND]
IRIS_RULES = (
    (1, 1, 1, 1, 1),
    (2, 2, 2, 2, 1),
    (3, 3, 3, 3, 1),
    (2, 3, 3, 3, 1),
    (3, 2, 3, 3, 1),
)


@dataclass
class ReparamVector:
    psi: Value
    layout: ChainLayout


def get_theta(rv: ReparamVector) -> Value:
    psi = rv.psi
    if psi.size != rv.layout.size:
        raise TrainingError(f"psi has {psi.size} entries, layout expects {rv.layout.size}")
    out = []
    for start, stop in rv.layout.chains:
        t = psi[start]
        out.append(unary_op("sigmoid", t))
        for j in range(start + 1, stop):
            t = t + unary_op("softplus", psi[j])
            out.append(unary_op("sigmoid", t))
    return stack_rows(out)


def check_chains(theta, layout: ChainLayout) -> None:
    """Raise unless every chain is strictly increasing inside (0, 1)."""
    th = np.asarray(theta, dtype=np.float64).reshape(-1)
    if th.size != layout.size:
        raise TrainingError(f"theta has {th.size} entries, layout expects {layout.size}")
    for start, stop in layout.chains:
        chain = th[start:stop]
        if chain[0] <= 0.0 or chain[-1] >= 1.0:
            raise TrainingError(f"chain {chain.tolist()} leaves the open interval (0, 1)")
        if np.any(np.diff(chain) <= 0.0):
            raise TrainingError(f"chain {chain.tolist()} is not strictly increasing")


def get_psi(theta, layout: ChainLayout) -> np.ndarray:
    check_chains(theta, layout)
    th = np.asarray(theta, dtype=np.float64).reshape(-1)
    psi = np.empty_like(th)
    for start, stop in layout.chains:
        t = np.log(th[start:stop]) - np.log1p(-th[start:stop])
        psi[start] = t[0]
        delta = np.diff(t)
        # inverse softplus, stable for large gaps
        psi[start + 1:stop] = delta + np.log(-np.expm1(-delta))
    return psi


def build_iris_fis(theta1, theta2, imp_method: str = "min") -> Fis:
    """The two-input, three-class Iris system parametrised by two 8-vectors."""
    thetas = []
    for name, th in (("theta1", theta1), ("theta2", theta2)):
        v = th if isinstance(th, Value) else make_value(np.asarray(th, dtype=np.float64))
        if v.data.ndim != 1 or v.size != IRIS_LAYOUT.size:
            raise TrainingError(f"{name} needs {IRIS_LAYOUT.size} entries, got {v.size}")
        check_chains(v.data, IRIS_LAYOUT)
        thetas.append(v)

    fis = newfis("Iris Classification", and_method="prod", imp_method=imp_method)
    fis = addvar(fis, "input", "Petal.Length", (0, 1))
    fis = addvar(fis, "input", "Petal.Width", (0, 1))
    fis = addvar(fis, "output", "Species", (0.5, 3.5))
    for i, th in enumerate(thetas, start=1):
        fis = addmf(fis, "input", i, "Low", "trapmf", [0.0, 0.0, th[0], th[1], 1.0],
                    trainable=[False, False, True, True, False])
        fis = addmf(fis, "input", i, "Mid", "trapmf", [th[2], th[3], th[4], th[5], 1.0],
                    trainable=[True, True, True, True, False])
        fis = addmf(fis, "input", i, "High", "trapmf", [th[6], th[7], 1.0, 1.0, 1.0],
                    trainable=[True, True, False, False, False])
    fis = addmf(fis, "output", 1, "setosa", "trapmf", [0.5, 0.5, 0.5, 2, 1])
    fis = addmf(fis, "output", 1, "versicolor", "trapmf", [0.5, 2, 2, 3.5, 1])
    fis = addmf(fis, "output", 1, "virginica", "trapmf", [2, 3.5, 3.5, 3.5, 1])
    return addrule(fis, IRIS_RULES)


@dataclass(frozen=True)
class ModelTemplate:
    """Builds a system from one theta Value per parameter group."""

    build: Callable[..., Fis]
    theta0: tuple[tuple[float, ...], ...]
    layouts: tuple[ChainLayout, ...]


IRIS_TEMPLATE = ModelTemplate(build_iris_fis, (IRIS_THETA0, IRIS_THETA0),
                              (IRIS_LAYOUT, IRIS_LAYOUT))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    stepsize: float = 0.3
    grid_points: int = DEFAULT_GRID_POINTS
    loss: str = "rmse"

    def __post_init__(self):
        if self.epochs < 1:
            raise TrainingError("epochs must be at least 1")
        if not self.stepsize >= 0.0 or not math.isfinite(self.stepsize):
            raise TrainingError("stepsize must be a finite non-negative number")
        if self.grid_points < 2:
            raise TrainingError("grid_points must be at least 2")
        if self.loss != "rmse":
            raise TrainingError(f"unsupported loss {self.loss!r}")


@dataclass
class TrainResult:
    err_history: np.ndarray
    theta_history: np.ndarray
    best_fis: Fis
    best_err: float
    best_epoch: int
    best_theta: tuple[np.ndarray, ...] = field(default=())

    @property
    def initial_err(self) -> float:
        return float(self.err_history[0])


def rmse(target, pred: Value) -> Value:
    t = np.asarray(target, dtype=np.float64).reshape(-1)
    if t.size == 0 or t.size != pred.size:
        raise TrainingError(f"rmse: {t.size} targets vs {pred.size} predictions")
    diff = pred - constant(t.reshape(pred.shape))
    return unary_op("sqrt", unary_op("square", diff).mean())


def _split_data(data) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] < 2:
        raise TrainingError("training data must be N x (D + 1) with the target last")
    return m[:, :-1], m[:, -1]


def train(template: ModelTemplate, data, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Full-batch gradient descent in psi-space.

    Runs exactly ``config.epochs`` evaluations and stops before stepping
    after the last one.
    """
    x, target = _split_data(data)
    psis = [make_value(get_psi(th, lay), requires_grad=True)
            for th, lay in zip(template.theta0, template.layouts)]
    errs: list[float] = []
    thetas_seen: list[np.ndarray] = []
    best_err, best_epoch, best_theta = math.inf, 0, ()

    for epoch in range(1, config.epochs + 1):
        with scoped_graph():
            thetas = [get_theta(ReparamVector(p, lay)) for p, lay in zip(psis, template.layouts)]
            for th, lay in zip(thetas, template.layouts):
                check_chains(th.data, lay)
            pred = evalfis(x, template.build(*thetas), config.grid_points)
            err = rmse(target, pred)
            e = err.item()
            if not math.isfinite(e):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            errs.append(e)
            thetas_seen.append(np.concatenate([th.data for th in thetas]))
            if e < best_err:
                best_err, best_epoch = e, epoch
                best_theta = tuple(th.data.copy() for th in thetas)
            if epoch == config.epochs:
                break
            backward(err)
            psis = [make_value(p.data - config.stepsize * grad_of(p), requires_grad=True)
                    for p in psis]

    return TrainResult(
        err_history=np.array(errs),
        theta_history=np.vstack(thetas_seen),
        best_fis=template.build(*best_theta),
        best_err=best_err,
        best_epoch=best_epoch,
        best_theta=best_theta,
    )


def classify(y, n_classes: int = 3) -> np.ndarray:
    """Round half up to the nearest class code, clamped to 1..n_classes."""
    y = np.asarray(y.data if isinstance(y, Value) else y, dtype=np.float64)
    return np.clip(np.floor(y + 0.5), 1, n_classes).astype(int)


def count_misclassified(labels, targets) -> int:
    return int(np.count_nonzero(np.asarray(labels) != np.asarray(targets).astype(int)))


def history_header(result: TrainResult) -> list[str]:
    return ["epoch", "rmse"] + [f"theta{j + 1}" for j in range(result.theta_history.shape[1])]


def write_history(result: TrainResult, path) -> None:
    """CSV of epoch, rmse and every theta entry used at that epoch."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(history_header(result))
        for i, (e, th) in enumerate(zip(result.err_history, result.theta_history), start=1):
            w.writerow([i, repr(float(e)), *(repr(float(v)) for v in th)])


def read_history(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise TrainingError(f"{path}: no history rows")
    return rows[0], np.array(rows[1:], dtype=np.float64)


def theta_from_template(template: ModelTemplate) -> Sequence[np.ndarray]:
    return [np.asarray(th, dtype=np.float64) for th in template.theta0]
