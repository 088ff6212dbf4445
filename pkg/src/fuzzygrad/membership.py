"""Differentiable membership functions.

The trapezoid is assembled from masks and branch selection rather than a
clipped closed form.  A ramp whose interval has zero width (``a == b`` or
``c == d``) is never built, so degenerate shoulders never divide by zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Value,
    binary_op,
    constant,
    make_value,
    unary_op,
    where_select,
)
from .errors import MembershipError, NonFiniteError

__all__ = [
    "MembershipFunction",
    "trapmf",
    "gaussmf",
    "gbellmf",
    "genmf",
    "evalmf",
    "MF_KINDS",
]


@dataclass(frozen=True)
class MembershipFunction:
    kind: str
    params: tuple[Value, ...]
    label: str = ""
    trainable: tuple[bool, ...] = ()

    def __call__(self, x) -> Value:
        return evalmf(x, self)

    def param_values(self) -> list[float]:
        return [p.item() for p in self.params]

    @property
    def height(self) -> float:
        return self.params[4].item() if self.kind == "trapmf" else 1.0


def _scalar_param(p, trainable: bool = False) -> Value:
    if isinstance(p, Value):
        if p.size != 1:
            raise MembershipError(f"membership parameter must be scalar, got shape {p.shape}")
        return p
    return make_value(float(p), requires_grad=trainable)


def _split_params(params, trainable) -> tuple[list[Value], tuple[bool, ...]]:
    if isinstance(params, Value):
        params = [params[i] for i in range(params.size)] if params.size > 1 else [params]
    params = list(params)
    if isinstance(trainable, bool):
        flags = (trainable,) * len(params)
    else:
        flags = tuple(bool(t) for t in trainable)
        if len(flags) != len(params):
            raise MembershipError("trainable flags must match the number of parameters")
    values = [_scalar_param(p, f) for p, f in zip(params, flags)]
    return values, flags


def trapmf(a, b, c, d, h=1.0, *, label: str = "", trainable=False) -> MembershipFunction:
    """Trapezoid with feet ``a``, ``d``, shoulders ``b``, ``c`` and height ``h``."""
    values, flags = _split_params([a, b, c, d, h], trainable)
    names = "abcd"
    data = [v.item() for v in values]
    for i in range(3):
        if data[i] > data[i + 1]:
            raise MembershipError(
                f"trapmf {label!r}: {names[i]}={data[i]} > {names[i + 1]}={data[i + 1]}"
            )
    if not 0.0 < data[4] <= 1.0:
        raise MembershipError(f"trapmf {label!r}: height {data[4]} outside (0, 1]")
    return MembershipFunction("trapmf", tuple(values), label, flags)


def gaussmf(sigma, c, *, label: str = "", trainable=False) -> MembershipFunction:
    values, flags = _split_params([sigma, c], trainable)
    if values[0].item() <= 0.0:
        raise MembershipError(f"gaussmf {label!r}: sigma must be positive")
    return MembershipFunction("gaussmf", tuple(values), label, flags)


def gbellmf(a, b, c, *, label: str = "", trainable=False) -> MembershipFunction:
    values, flags = _split_params([a, b, c], trainable)
    if values[0].item() == 0.0:
        raise MembershipError(f"gbellmf {label!r}: width a must be non-zero")
    if values[1].item() <= 0.0:
        raise MembershipError(f"gbellmf {label!r}: slope b must be positive")
    return MembershipFunction("gbellmf", tuple(values), label, flags)


_ARITY = {"trapmf": (4, 5), "gaussmf": (2,), "gbellmf": (3,)}
_ALIASES = {"trapmf.torch": "trapmf", "trapezoid": "trapmf",
            "gaussian": "gaussmf", "gbell": "gbellmf"}
MF_KINDS = tuple(_ARITY)


def genmf(kind: str, params, *, label: str = "", trainable=False) -> MembershipFunction:
    """Build a membership function by kind name.

    Trapezoids take four breakpoints plus an optional height (default 1).
    """
    kind = _ALIASES.get(kind, kind)
    if kind not in _ARITY:
        raise MembershipError(f"unknown membership function kind {kind!r}")
    if isinstance(params, Value):
        params = [params[i] for i in range(params.size)] if params.size > 1 else [params]
    params = list(params)
    if len(params) not in _ARITY[kind]:
        raise MembershipError(
            f"{kind} takes {' or '.join(map(str, _ARITY[kind]))} parameters, got {len(params)}"
        )
    if kind == "trapmf":
        if len(params) == 4:
            params.append(1.0)
            if not isinstance(trainable, bool):
                trainable = list(trainable) + [False]
        return trapmf(*params, label=label, trainable=trainable)
    if kind == "gaussmf":
        return gaussmf(*params, label=label, trainable=trainable)
    return gbellmf(*params, label=label, trainable=trainable)


def _as_input(x) -> Value:
    if isinstance(x, Value):
        v = x
    else:
        v = constant(np.atleast_1d(np.asarray(x, dtype=np.float64)))
    if v.data.ndim == 0:
        v = constant(v.data.reshape(1)) if not v.tracked else v
    if not np.all(np.isfinite(v.data)):
        raise NonFiniteError("evalmf: input contains non-finite values")
    return v


def _eval_trapmf(x: Value, a: Value, b: Value, c: Value, d: Value, h: Value) -> Value:
    y = constant(np.zeros(x.shape))
    rising = (x > a) & (x < b)
    plateau = (x >= b) & (x <= c)
    falling = (x > c) & (x < d)
    if b.item() > a.item():
        ramp = binary_op("minimum", (x - a) / (b - a), h)
        y = where_select(rising, ramp, y)
    y = where_select(plateau, h, y)
    if d.item() > c.item():
        ramp = binary_op("minimum", (d - x) / (d - c), h)
        y = where_select(falling, ramp, y)
    return y


def _eval_gaussmf(x: Value, sigma: Value, c: Value) -> Value:
    z = unary_op("square", x - c) / (unary_op("square", sigma) * 2.0)
    return unary_op("exp", -z)


def _eval_gbellmf(x: Value, a: Value, b: Value, c: Value) -> Value:
    u = unary_op("abs", (x - c) / a)
    nonzero = u > 0.0
    # |u|^(2b) through exp/log; u == 0 is routed around the log
    safe = where_select(nonzero, u, 1.0)
    power = unary_op("exp", b * 2.0 * unary_op("log", safe))
    power = where_select(nonzero, power, 0.0)
    return 1.0 / (power + 1.0)


_EVAL = {"trapmf": _eval_trapmf, "gaussmf": _eval_gaussmf, "gbellmf": _eval_gbellmf}


def evalmf(x, mf: MembershipFunction) -> Value:
    """Membership grades of crisp inputs ``x`` as a 1-D Value."""
    xv = _as_input(x)
    return _EVAL[mf.kind](xv, *mf.params)

