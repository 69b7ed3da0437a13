"""Closed-form Lipschitz maps on [0, inf) built from a small descriptor algebra.

Every descriptor is an immutable expression tree.  Leaves are the base
families (linear, plain sine, log-modulated sine, power phase); inner nodes
scale, add, or combine a real and an imaginary part.  Values and the first
two derivatives are evaluated analytically and vectorised over numpy arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterator

import numpy as np

__all__ = [
    "Func",
    "Linear",
    "SinPlain",
    "SinLog",
    "PowerPhase",
    "Scale",
    "Sum",
    "ComplexCombine",
    "DerivativeUnavailable",
    "DescriptorError",
    "evaluate",
    "eval_d1",
    "eval_d2",
    "linear_part",
    "from_dict",
    "from_json",
    "to_dict",
    "to_json",
]


class DescriptorError(ValueError):
    """Malformed descriptor; ``path`` locates the offending node."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class DerivativeUnavailable(ValueError):
    """Raised when a node in the tree has its derivative flag switched off."""

    def __init__(self, paths: list[str]):
        super().__init__("derivative unavailable at " + ", ".join(paths))
        self.paths = paths


def _times(t):
    arr = np.asarray(t, dtype=float)
    if not (arr >= 0).all():  # one pass; NaN also fails the comparison
        if np.isnan(arr).any():
            raise ValueError("t must not be NaN")
        raise ValueError("t must be nonnegative")
    return arr


def _positive(t):
    arr = _times(t)
    if np.any(arr == 0):
        raise ValueError("derivatives need t > 0")
    return arr


def _out(values, t):
    out = np.asarray(values, dtype=complex)
    if np.ndim(t) == 0:
        return complex(out)
    return out


@dataclass(frozen=True, kw_only=True)
class Func:
    """Base node.

    ``lip_upper``/``lip_lower`` override the bounds derived from the tree
    structure; ``differentiable=False`` marks a node whose derivatives must not
    be used.
    """

    lip_upper: float | None = None
    lip_lower: float | None = None
    differentiable: bool = True

    kind = "abstract"

    # -- structure ---------------------------------------------------------
    def children(self) -> tuple["Func", ...]:
        return ()

    def walk(self, path: str = "$") -> Iterator[tuple[str, "Func"]]:
        yield path, self
        for i, child in enumerate(self.children()):
            yield from child.walk(f"{path}.children[{i}]")

    # -- evaluation on validated float arrays -------------------------------
    def _value(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _d1(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _d2(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, t):
        return evaluate(self, t)

    # -- analytic metadata --------------------------------------------------
    def _derived_upper(self) -> float | None:
        return None

    def _derived_lower(self) -> float | None:
        return None

    def upper_bound(self) -> float | None:
        """Upper Lipschitz bound, declared or derived from the tree."""
        if self.lip_upper is not None:
            return self.lip_upper
        return self._derived_upper()

    def lower_bound(self) -> float | None:
        """Lower (bi-)Lipschitz bound when one is known, else ``None``."""
        if self.lip_lower is not None:
            return self.lip_lower
        return self._derived_lower()

    @property
    def is_bilipschitz(self) -> bool:
        lo = self.lower_bound()
        return lo is not None and lo > 0 and self.upper_bound() is not None

    def is_real(self) -> bool:
        return True

    def _params(self) -> dict[str, Any]:
        return {}


def _encode_complex(c: complex):
    c = complex(c)
    if c.imag == 0:
        return c.real
    return [c.real, c.imag]


@dataclass(frozen=True)
class Linear(Func):
    """t -> c t."""

    c: complex = 1.0
    kind = "linear"

    def _value(self, t):
        return self.c * t

    def _d1(self, t):
        return np.full(t.shape, self.c, dtype=complex)

    def _d2(self, t):
        return np.zeros(t.shape, dtype=complex)

    def _derived_upper(self):
        return abs(self.c)

    def _derived_lower(self):
        return abs(self.c)

    def is_real(self):
        return complex(self.c).imag == 0

    def _params(self):
        return {"c": _encode_complex(self.c)}


@dataclass(frozen=True)
class SinPlain(Func):
    """t -> sin t; a bounded perturbation."""

    kind = "sinplain"

    def _value(self, t):
        return np.sin(t)

    def _d1(self, t):
        return np.cos(t)

    def _d2(self, t):
        return -np.sin(t)

    def _derived_upper(self):
        return 1.0


def _log_or_zero(t):
    with np.errstate(divide="ignore"):
        return np.where(t > 0, np.log(np.where(t > 0, t, 1.0)), 0.0)


@dataclass(frozen=True)
class SinLog(Func):
    """t -> t + alpha t sin(beta log t), continued by 0 at t = 0."""

    alpha: float = 0.1
    beta: float = 1.0
    kind = "sinlog"

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DescriptorError("sinlog needs alpha > 0 and beta > 0")

    def _value(self, t):
        return t + self.alpha * t * np.sin(self.beta * _log_or_zero(t))

    def _d1(self, t):
        u = self.beta * np.log(t)
        return 1.0 + self.alpha * (np.sin(u) + self.beta * np.cos(u))

    def _d2(self, t):
        u = self.beta * np.log(t)
        return (self.alpha * self.beta / t) * (np.cos(u) - self.beta * np.sin(u))

    @property
    def spread(self) -> float:
        return self.alpha * (1.0 + self.beta)

    def _derived_upper(self):
        return 1.0 + self.spread

    def _derived_lower(self):
        if self.spread < 1:
            return 1.0 - self.spread
        return None

    def _params(self):
        return {"alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class PowerPhase(Func):
    """t -> t^(1 + i alpha) = t exp(i alpha log t)."""

    alpha: float = 1.0
    kind = "powerphase"

    def _value(self, t):
        return t * np.exp(1j * self.alpha * _log_or_zero(t))

    def _d1(self, t):
        return (1 + 1j * self.alpha) * np.exp(1j * self.alpha * np.log(t))

    def _d2(self, t):
        k = (1 + 1j * self.alpha) * 1j * self.alpha
        return k * np.exp(1j * self.alpha * np.log(t)) / t

    def _derived_upper(self):
        return math.hypot(1.0, self.alpha)

    def _derived_lower(self):
        # | |phi(x)| - |phi(y)| | = |x - y|
        return 1.0

    def is_real(self):
        return self.alpha == 0

    def _params(self):
        return {"alpha": self.alpha}


@dataclass(frozen=True)
class Scale(Func):
    c: complex = 1.0
    child: Func = field(default_factory=Linear)
    kind = "scale"

    def children(self):
        return (self.child,)

    def _value(self, t):
        return self.c * self.child._value(t)

    def _d1(self, t):
        return self.c * self.child._d1(t)

    def _d2(self, t):
        return self.c * self.child._d2(t)

    def _derived_upper(self):
        b = self.child.upper_bound()
        return None if b is None else abs(self.c) * b

    def _derived_lower(self):
        b = self.child.lower_bound()
        return None if b is None else abs(self.c) * b

    def is_real(self):
        return complex(self.c).imag == 0 and self.child.is_real()

    def _params(self):
        return {"c": _encode_complex(self.c)}


@dataclass(frozen=True)
class Sum(Func):
    terms: tuple[Func, ...] = ()
    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise DescriptorError("sum needs at least one child")

    def children(self):
        return self.terms

    def _value(self, t):
        return sum(c._value(t) for c in self.terms)

    def _d1(self, t):
        return sum(c._d1(t) for c in self.terms)

    def _d2(self, t):
        return sum(c._d2(t) for c in self.terms)

    def _derived_upper(self):
        bounds = [c.upper_bound() for c in self.terms]
        if any(b is None for b in bounds):
            return None
        return float(sum(bounds))

    def is_real(self):
        return all(c.is_real() for c in self.terms)


@dataclass(frozen=True)
class ComplexCombine(Func):
    """re + i im."""

    re: Func = field(default_factory=Linear)
    im: Func = field(default_factory=Linear)
    kind = "complex"

    def children(self):
        return (self.re, self.im)

    def _value(self, t):
        return self.re._value(t) + 1j * self.im._value(t)

    def _d1(self, t):
        return self.re._d1(t) + 1j * self.im._d1(t)

    def _d2(self, t):
        return self.re._d2(t) + 1j * self.im._d2(t)

    def _derived_upper(self):
        a, b = self.re.upper_bound(), self.im.upper_bound()
        if a is None or b is None:
            return None
        return a + b

    def _derived_lower(self):
        if not (self.re.is_real() and self.im.is_real()):
            return None
        lows = [b for b in (self.re.lower_bound(), self.im.lower_bound()) if b is not None]
        return max(lows) if lows else None

    def is_real(self):
        return False


# -- public evaluation -----------------------------------------------------

def evaluate(f: Func, t):
    """Value of ``f`` at ``t >= 0`` (scalar or array); exactly 0 at t = 0."""
    arr = _times(t)
    return _out(f._value(arr), t)


def _check_derivatives(f: Func):
    missing = [p for p, node in f.walk() if not node.differentiable]
    if missing:
        raise DerivativeUnavailable(missing)


def eval_d1(f: Func, t):
    _check_derivatives(f)
    return _out(f._d1(_positive(t)), t)


def eval_d2(f: Func, t):
    _check_derivatives(f)
    return _out(f._d2(_positive(t)), t)


def linear_part(f: Func) -> complex:
    """Coefficient of the exact linear term carried by the tree.

    SinLog contributes its leading ``t``; sine and power-phase leaves carry no
    linear term.
    """
    if isinstance(f, Linear):
        return complex(f.c)
    if isinstance(f, SinLog):
        return 1.0 + 0j
    if isinstance(f, Scale):
        return complex(f.c) * linear_part(f.child)
    if isinstance(f, Sum):
        return sum((linear_part(c) for c in f.terms), 0j)
    if isinstance(f, ComplexCombine):
        return linear_part(f.re) + 1j * linear_part(f.im)
    return 0j


# -- JSON ------------------------------------------------------------------

def to_dict(f: Func) -> dict[str, Any]:
    d: dict[str, Any] = {"type": f.kind}
    d.update(f._params())
    kids = f.children()
    if kids:
        d["children"] = [to_dict(c) for c in kids]
    if f.lip_upper is not None:
        d["lip_upper"] = f.lip_upper
    if f.lip_lower is not None:
        d["lip_lower"] = f.lip_lower
    if not f.differentiable:
        d["derivatives"] = False
    return d


def to_json(f: Func, **kwargs) -> str:
    return json.dumps(to_dict(f), sort_keys=True, **kwargs)


def _number(d, key, path, required=True, default=None):
    if key not in d:
        if required:
            raise DescriptorError(f"missing field {key!r}", path)
        return default
    v = d[key]
    if isinstance(v, bool):
        raise DescriptorError(f"field {key!r} must be a number", f"{path}.{key}")
    if isinstance(v, (int, float)):
        return float(v)
    if (isinstance(v, list) and len(v) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
        return complex(float(v[0]), float(v[1]))
    raise DescriptorError(f"field {key!r} must be a number or [re, im]", f"{path}.{key}")


def _real(d, key, path):
    v = _number(d, key, path)
    if isinstance(v, complex):
        raise DescriptorError(f"field {key!r} must be real", f"{path}.{key}")
    return v


def _children(d, path, count=None):
    kids = d.get("children")
    if not isinstance(kids, list):
        raise DescriptorError("missing list field 'children'", path)
    if count is not None and len(kids) != count:
        raise DescriptorError(f"expected {count} children, got {len(kids)}", f"{path}.children")
    return [from_dict(k, f"{path}.children[{i}]") for i, k in enumerate(kids)]


def from_dict(d: Any, path: str = "$") -> Func:
    """Build a descriptor from its JSON form; errors carry a JSON path."""
    if not isinstance(d, dict):
        raise DescriptorError("descriptor must be an object", path)
    kind = d.get("type")
    meta = {}
    for key in ("lip_upper", "lip_lower"):
        if key in d:
            meta[key] = _real(d, key, path)
    if "derivatives" in d:
        if not isinstance(d["derivatives"], bool):
            raise DescriptorError("field 'derivatives' must be boolean", f"{path}.derivatives")
        meta["differentiable"] = d["derivatives"]
    try:
        if kind == "linear":
            return Linear(_number(d, "c", path), **meta)
        if kind == "sinplain":
            return SinPlain(**meta)
        if kind == "sinlog":
            return SinLog(_real(d, "alpha", path), _real(d, "beta", path), **meta)
        if kind == "powerphase":
            return PowerPhase(_real(d, "alpha", path), **meta)
        if kind == "scale":
            (child,) = _children(d, path, 1)
            return Scale(_number(d, "c", path), child, **meta)
        if kind == "sum":
            return Sum(tuple(_children(d, path)), **meta)
        if kind == "complex":
            re, im = _children(d, path, 2)
            return ComplexCombine(re, im, **meta)
    except DescriptorError as exc:
        if exc.path == "$" and path != "$":
            raise DescriptorError(str(exc).split(": ", 1)[1], path) from None
        raise
    raise DescriptorError(f"unknown type {kind!r}", f"{path}.type")


def from_json(text: str) -> Func:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DescriptorError(f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return from_dict(data)


def with_bounds(f: Func, upper: float | None = None, lower: float | None = None) -> Func:
    """Copy of ``f`` with declared Lipschitz bounds attached."""
    return replace(f, lip_upper=upper, lip_lower=lower)
