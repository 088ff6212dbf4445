"""Mamdani fuzzy inference with a differentiable forward pass.

The builder functions (:func:`newfis`, :func:`addvar`, :func:`addmf`,
:func:`addrule`) return new :class:`Fis` objects and never mutate their
input.  Variable and membership indices are 1-based, and rule rows use the
layout ``[input MF indices..., output MF indices..., weight, connective]``
with connective 1 for AND and 2 for OR.  Weights scale firing strength and
may exceed 1; with min implication that saturates the consequent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .autodiff import (
    Value,
    binary_op,
    constant,
    repeat,
    stack_rows,
    unbind_rows,
    where_select,
)
from .errors import FisError
from .membership import MembershipFunction, evalmf, genmf

log = logging.getLogger(__name__)

__all__ = [
    "Variable",
    "Rule",
    "Fis",
    "EvalReport",
    "newfis",
    "addvar",
    "addmf",
    "addrule",
    "rule_firing",
    "aggregate",
    "evalfis",
    "defuzz_centroid",
    "sample_mf_curves",
    "gensurf",
    "DEFAULT_GRID_POINTS",
]

DEFAULT_GRID_POINTS = 501
DEGENERATE_COVER = 1e-12

AND_METHODS = ("min", "prod")
OR_METHODS = ("max", "probor")
IMP_METHODS = ("min", "prod")
AGG_METHODS = ("max",)
DEFUZZ_METHODS = ("centroid",)


@dataclass(frozen=True)
class Variable:
    io: str
    name: str
    range: tuple[float, float]
    mfs: tuple[MembershipFunction, ...] = ()

    def mf_index(self, label: str) -> int:
        for i, mf in enumerate(self.mfs, start=1):
            if mf.label == label:
                return i
        raise FisError(f"variable {self.name!r} has no membership function {label!r}")


@dataclass(frozen=True)
class Rule:
    antecedent: tuple[int, ...]
    consequent: tuple[int, ...]
    weight: float = 1.0
    connective: str = "AND"

    def as_row(self) -> list:
        code = 1 if self.connective == "AND" else 2
        return [*self.antecedent, *self.consequent, self.weight, code]


@dataclass(frozen=True)
class Fis:
    name: str
    and_method: str = "min"
    or_method: str = "max"
    imp_method: str = "min"
    agg_method: str = "max"
    defuzz_method: str = "centroid"
    inputs: tuple[Variable, ...] = ()
    outputs: tuple[Variable, ...] = ()
    rules: tuple[Rule, ...] = ()

    def variables(self, io: str) -> tuple[Variable, ...]:
        if io == "input":
            return self.inputs
        if io == "output":
            return self.outputs
        raise FisError(f"io must be 'input' or 'output', got {io!r}")

    def trainable_params(self) -> list[Value]:
        return [p for var in (*self.inputs, *self.outputs) for mf in var.mfs
                for p, t in zip(mf.params, mf.trainable) if t]


@dataclass
class EvalReport:
    """Side information from :func:`evalfis`."""

    clamped: int = 0
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def any_degenerate(self) -> bool:
        return bool(self.degenerate.any())


def _check_method(kind: str, value: str, allowed: Sequence[str]) -> str:
    if value not in allowed:
        raise FisError(f"unknown {kind} method {value!r}; expected one of {list(allowed)}")
    return value


def newfis(name: str, and_method: str = "min", or_method: str = "max",
           imp_method: str = "min", agg_method: str = "max",
           defuzz_method: str = "centroid") -> Fis:
    return Fis(
        name=name,
        and_method=_check_method("and", and_method, AND_METHODS),
        or_method=_check_method("or", or_method, OR_METHODS),
        imp_method=_check_method("implication", imp_method, IMP_METHODS),
        agg_method=_check_method("aggregation", agg_method, AGG_METHODS),
        defuzz_method=_check_method("defuzzification", defuzz_method, DEFUZZ_METHODS),
    )


def addvar(fis: Fis, io: str, name: str, range: Sequence[float]) -> Fis:
    lo, hi = (float(r) for r in range)
    if not lo < hi:
        raise FisError(f"variable {name!r}: range [{lo}, {hi}] is empty")
    var = Variable(io, name, (lo, hi))
    if io == "input":
        return replace(fis, inputs=fis.inputs + (var,))
    if io == "output":
        return replace(fis, outputs=fis.outputs + (var,))
    raise FisError(f"io must be 'input' or 'output', got {io!r}")


def _replace_var(fis: Fis, io: str, index: int, var: Variable) -> Fis:
    vars_ = list(fis.variables(io))
    vars_[index] = var
    return replace(fis, **{"inputs" if io == "input" else "outputs": tuple(vars_)})


def addmf(fis: Fis, io: str, var_index: int, label: str, mf_kind: str, params,
          trainable=False) -> Fis:
    vars_ = fis.variables(io)
    if not 1 <= var_index <= len(vars_):
        raise FisError(f"{io} variable index {var_index} out of range 1..{len(vars_)}")
    var = vars_[var_index - 1]
    if any(mf.label == label for mf in var.mfs):
        raise FisError(f"variable {var.name!r} already has a membership function {label!r}")
    mf = mf_kind if isinstance(mf_kind, MembershipFunction) else genmf(
        mf_kind, params, label=label, trainable=trainable)
    return _replace_var(fis, io, var_index - 1, replace(var, mfs=var.mfs + (mf,)))


def _parse_rule(fis: Fis, row: Sequence[float]) -> Rule:
    n_in, n_out = len(fis.inputs), len(fis.outputs)
    if len(row) != n_in + n_out + 2:
        raise FisError(f"rule row {list(row)} must have {n_in + n_out + 2} entries")
    idx = [int(v) for v in row[: n_in + n_out]]
    if any(float(v) != i for v, i in zip(row, idx)):
        raise FisError(f"rule row {list(row)}: membership indices must be integers")
    for i, var in zip(idx, (*fis.inputs, *fis.outputs)):
        if not 0 <= i <= len(var.mfs):
            raise FisError(
                f"rule row {list(row)} references MF {i} of {var.name!r}, "
                f"which has {len(var.mfs)}"
            )
    weight = float(row[n_in + n_out])
    if not (weight > 0.0 and np.isfinite(weight)):
        raise FisError(f"rule weight {weight} must be positive and finite")
    code = row[n_in + n_out + 1]
    if code not in (1, 2):
        raise FisError(f"rule connective code {code} must be 1 (AND) or 2 (OR)")
    return Rule(tuple(idx[:n_in]), tuple(idx[n_in:]), weight, "AND" if code == 1 else "OR")


def addrule(fis: Fis, rule_matrix) -> Fis:
    rows = np.atleast_2d(np.asarray(rule_matrix, dtype=np.float64))
    if not fis.inputs or not fis.outputs:
        raise FisError("add input and output variables before rules")
    rules = tuple(_parse_rule(fis, list(r)) for r in rows)
    return replace(fis, rules=fis.rules + rules)


def _probor(a: Value, b: Value) -> Value:
    return a + b - a * b


def rule_firing(fis: Fis, grades: Sequence[Sequence[Value]], rule: Rule) -> Value:
    """Firing strength of one rule given per-input, per-MF grades.

    Don't-care antecedents (index 0) are skipped; a rule with no
    antecedent at all fires with the identity of its connective.
    """
    terms = [grades[j][i - 1] for j, i in enumerate(rule.antecedent) if i != 0]
    n = len(grades[0][0]) if grades and grades[0] else 1
    if not terms:
        identity = 1.0 if rule.connective == "AND" else 0.0
        strength = constant(np.full(n, identity))
    else:
        if rule.connective == "AND":
            op = (lambda a, b: a * b) if fis.and_method == "prod" else (
                lambda a, b: binary_op("minimum", a, b))
        else:
            op = _probor if fis.or_method == "probor" else (
                lambda a, b: binary_op("maximum", a, b))
        strength = terms[0]
        for t in terms[1:]:
            strength = op(strength, t)
    if rule.weight != 1.0:
        strength = strength * rule.weight
    return strength


def _quadrature_weights(k: int) -> np.ndarray:
    w = np.ones(k)
    w[0] = w[-1] = 0.5
    return w


def _row_sums(m: Value) -> Value:
    return stack_rows([r.sum() for r in unbind_rows(m)])


def defuzz_centroid(grid, mu: Value) -> tuple[Value, np.ndarray]:
    """Centroid of aggregated output sets sampled on a uniform grid.

    ``mu`` holds one row of grades per sample (a 1-D ``mu`` is one sample).
    The integrals use trapezoid weights, so piecewise-linear sets are
    integrated to O(h^2).  Rows whose total grade falls below 1e-12 get the
    grid midpoint; their positions come back as the second element.
    """
    z = np.asarray(grid, dtype=np.float64)
    if z.ndim != 1 or z.size < 2:
        raise FisError("defuzzification grid needs at least two points")
    single = mu.data.ndim == 1
    if single:
        mu = repeat(mu, 1, axis=0)
    if mu.shape[1] != z.size:
        raise FisError(f"grade rows of length {mu.shape[1]} do not match grid of {z.size}")
    n = mu.shape[0]
    w = _quadrature_weights(z.size)
    num = _row_sums(mu * constant(np.tile(w * z, (n, 1))))
    den = _row_sums(mu * constant(np.tile(w, (n, 1))))
    degenerate = den.data < DEGENERATE_COVER
    midpoint = 0.5 * (z[0] + z[-1])
    safe_den = where_select(degenerate, 1.0, den)
    crisp = where_select(degenerate, midpoint, num / safe_den)
    if single:
        crisp = crisp[0]
    return crisp, degenerate


def aggregate(fis: Fis, strengths: Sequence[Value], output: int, grid) -> Value:
    """Implicate every rule's consequent on ``grid`` and combine them pointwise.

    ``strengths`` holds one firing-strength vector per rule; the result has
    one row of aggregated grades per sample.  ``output`` is 0-based.
    """
    z = np.asarray(grid, dtype=np.float64)
    k_pts = z.size
    n = strengths[0].size if strengths else 1
    out_grades = [evalmf(z, mf) for mf in fis.outputs[output].mfs]
    agg = None
    for rule, w in zip(fis.rules, strengths):
        k = rule.consequent[output]
        if k == 0:
            continue
        wide = repeat(w, k_pts, axis=1)
        shape = repeat(out_grades[k - 1], n, axis=0)
        if fis.imp_method == "min":
            implied = binary_op("minimum", wide, shape)
        else:
            implied = wide * shape
        agg = implied if agg is None else binary_op("maximum", agg, implied)
    if agg is None:
        agg = constant(np.zeros((n, k_pts)))
    return agg


def _validate(fis: Fis) -> None:
    if not fis.inputs or not fis.outputs or not fis.rules:
        raise FisError("system needs at least one input, one output and one rule")
    for var in (*fis.inputs, *fis.outputs):
        if not var.mfs:
            raise FisError(f"variable {var.name!r} has no membership functions")


def _clamp_inputs(x: np.ndarray, fis: Fis) -> tuple[np.ndarray, int]:
    lo = np.array([v.range[0] for v in fis.inputs])
    hi = np.array([v.range[1] for v in fis.inputs])
    clipped = np.clip(x, lo, hi)
    count = int(np.count_nonzero(clipped != x))
    if count:
        log.warning("clamped %d input value(s) to their variable ranges", count)
    return clipped, count


def evalfis(inputs, fis: Fis, grid_points: int = DEFAULT_GRID_POINTS,
            report: EvalReport | None = None):
    """Crisp outputs for each row of ``inputs``.

    Returns a 1-D Value of length N for a single-output system, or a tuple
    with one such Value per output.
    """
    _validate(fis)
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != len(fis.inputs):
        raise FisError(f"inputs of shape {x.shape} do not match {len(fis.inputs)} input variable(s)")
    if x.shape[0] == 0:
        raise FisError("no input rows")
    if not np.all(np.isfinite(x)):
        raise FisError("inputs contain non-finite values")
    if grid_points < 2:
        raise FisError("grid_points must be at least 2")
    x, clamped = _clamp_inputs(x, fis)
    n = x.shape[0]

    grades = [[evalmf(x[:, j], mf) for mf in var.mfs] for j, var in enumerate(fis.inputs)]
    strengths = [rule_firing(fis, grades, rule) for rule in fis.rules]

    results = []
    degenerate = np.zeros(n, dtype=bool)
    for o, var in enumerate(fis.outputs):
        z = np.linspace(var.range[0], var.range[1], grid_points)
        agg = aggregate(fis, strengths, o, z)
        crisp, deg = defuzz_centroid(z, agg)
        degenerate |= deg
        results.append(crisp)

    if report is not None:
        report.clamped += clamped
        report.degenerate = degenerate
    return results[0] if len(results) == 1 else tuple(results)


def sample_mf_curves(fis: Fis, io: str, var_index: int, points: int = 101):
    """Rows of ``(x, label, grade)`` sweeping a variable's range, one curve at a time."""
    vars_ = fis.variables(io)
    if not 1 <= var_index <= len(vars_):
        raise FisError(f"{io} variable index {var_index} out of range 1..{len(vars_)}")
    if points < 2:
        raise FisError("points must be at least 2")
    var = vars_[var_index - 1]
    xs = np.linspace(var.range[0], var.range[1], points)
    rows = []
    for mf in var.mfs:
        mu = evalmf(xs, mf).data
        rows.extend((float(x), mf.label, float(m)) for x, m in zip(xs, mu))
    return rows


def gensurf(fis: Fis, grid_n: int = 21, grid_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Output surface of a two-input, one-output system as rows ``(x1, x2, y)``."""
    if len(fis.inputs) != 2 or len(fis.outputs) != 1:
        raise FisError("gensurf needs exactly two inputs and one output")
    if grid_n < 2:
        raise FisError("grid_n must be at least 2")
    a = np.linspace(*fis.inputs[0].range, grid_n)
    b = np.linspace(*fis.inputs[1].range, grid_n)
    x1, x2 = (m.ravel() for m in np.meshgrid(a, b, indexing="ij"))
    y = evalfis(np.column_stack([x1, x2]), fis, grid_points).data
    return np.column_stack([x1, x2, y])
