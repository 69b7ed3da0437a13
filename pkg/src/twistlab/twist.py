"""Finite-support vectors, the quasi-linear map Omega_phi and the twisted
quasi-norm on pairs (y, x)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .funcs.descriptors import (
    ComplexCombine,
    Func,
    Linear,
    PowerPhase,
    Scale,
    SinLog,
    SinPlain,
    Sum,
    evaluate,
)

# |x_n| / ||x|| below this contributes nothing to Omega (t log(1/t) -> 0).
UNDERFLOW_RATIO = 1e-300


def _scaled_norm(mod: np.ndarray) -> float:
    # sqrt(sum mod^2) without underflow/overflow, never below max(mod)
    if mod.size == 0:
        return 0.0
    top = float(mod.max())
    if top == 0.0 or not math.isfinite(top):
        return top
    r = mod / top
    return max(top, top * math.sqrt(float(np.dot(r, r))))


class SparseVec:
    """Finite-support complex sequence indexed from 1.

    Stored as sorted index/value arrays with zero entries dropped; the
    Euclidean norm is cached.
    """

    __slots__ = ("idx", "val", "_norm")

    def __init__(self, idx=(), val=()):
        idx = np.array(idx, dtype=np.int64, ndmin=1).reshape(-1)
        val = np.array(val, dtype=complex, ndmin=1).reshape(-1)
        if idx.shape != val.shape:
            raise ValueError("index and value arrays differ in length")
        if idx.size:
            if idx.min() < 1:
                raise ValueError("indices start at 1")
            if (idx[1:] <= idx[:-1]).any():
                order = np.argsort(idx, kind="stable")
                idx, val = idx[order], val[order]
                if (idx[1:] == idx[:-1]).any():
                    raise ValueError("duplicate indices")
            zero = val == 0
            if zero.any():
                idx, val = idx[~zero], val[~zero]
        idx.flags.writeable = False
        val.flags.writeable = False
        self.idx, self.val = idx, val
        self._norm = None

    @classmethod
    def _trusted(cls, idx: np.ndarray, val: np.ndarray) -> "SparseVec":
        # caller guarantees increasing indices >= 1 and nonzero complex values
        v = object.__new__(cls)
        idx.flags.writeable = False
        val.flags.writeable = False
        v.idx, v.val, v._norm = idx, val, None
        return v

    @classmethod
    def from_dict(cls, entries: Mapping[int, complex]) -> "SparseVec":
        items = sorted(entries.items())
        return cls([k for k, _ in items], [v for _, v in items])

    @classmethod
    def from_dense(cls, values, start: int = 1) -> "SparseVec":
        values = np.asarray(values, dtype=complex)
        return cls(np.arange(start, start + values.size), values)

    @classmethod
    def zero(cls) -> "SparseVec":
        return cls()

    def to_dict(self) -> dict[int, complex]:
        return {int(k): complex(v) for k, v in zip(self.idx, self.val)}

    def to_dense(self, length: int | None = None) -> np.ndarray:
        n = int(self.idx.max()) if self.idx.size else 0
        length = n if length is None else length
        out = np.zeros(length, dtype=complex)
        out[self.idx - 1] = self.val
        return out

    @property
    def norm(self) -> float:
        if self._norm is None:
            self._norm = _scaled_norm(np.abs(self.val))
        return self._norm

    @property
    def support(self) -> frozenset[int]:
        return frozenset(int(k) for k in self.idx)

    def __len__(self):
        return int(self.idx.size)

    def __bool__(self):
        return self.idx.size > 0

    def __getitem__(self, k: int) -> complex:
        pos = np.searchsorted(self.idx, k)
        if pos < self.idx.size and self.idx[pos] == k:
            return complex(self.val[pos])
        return 0j

    def _combine(self, other: "SparseVec", sign: float) -> "SparseVec":
        if self.idx.size == other.idx.size and np.array_equal(self.idx, other.idx):
            return SparseVec(self.idx, self.val + sign * other.val)
        idx = np.union1d(self.idx, other.idx)
        val = np.zeros(idx.size, dtype=complex)
        val[np.searchsorted(idx, self.idx)] += self.val
        val[np.searchsorted(idx, other.idx)] += sign * other.val
        return SparseVec(idx, val)

    def __add__(self, other: "SparseVec") -> "SparseVec":
        return self._combine(other, 1.0)

    def __sub__(self, other: "SparseVec") -> "SparseVec":
        return self._combine(other, -1.0)

    def __neg__(self):
        return SparseVec(self.idx, -self.val)

    def __mul__(self, scalar) -> "SparseVec":
        return SparseVec(self.idx, complex(scalar) * self.val)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "SparseVec":
        return SparseVec(self.idx, self.val / complex(scalar))

    def conj(self) -> "SparseVec":
        return SparseVec(self.idx, np.conj(self.val))

    def dot(self, other: "SparseVec") -> complex:
        """Bilinear sum of x_k y_k (no conjugation)."""
        common, i, j = np.intersect1d(self.idx, other.idx, return_indices=True)
        return complex(np.sum(self.val[i] * other.val[j]))

    def allclose(self, other: "SparseVec", rtol=1e-12, atol=0.0) -> bool:
        n = max(self.norm, other.norm)
        return (self - other).norm <= atol + rtol * n

    def __eq__(self, other):
        if not isinstance(other, SparseVec):
            return NotImplemented
        return np.array_equal(self.idx, other.idx) and np.array_equal(self.val, other.val)

    def __repr__(self):
        if len(self) > 6:
            return f"SparseVec(<{len(self)} entries>, norm={self.norm:.6g})"
        return f"SparseVec({self.to_dict()})"

    def to_json_obj(self) -> dict[str, list[float]]:
        return {str(int(k)): [float(v.real), float(v.imag)] for k, v in zip(self.idx, self.val)}

    @classmethod
    def from_json_obj(cls, obj: Mapping[str, Iterable[float]], path: str = "$") -> "SparseVec":
        if not isinstance(obj, Mapping):
            raise ValueError(f"{path}: sparse vector must be an object")
        idx, val = [], []
        for key, pair in obj.items():
            try:
                k = int(key)
            except ValueError:
                raise ValueError(f"{path}.{key}: index must be a decimal integer") from None
            if k < 1:
                raise ValueError(f"{path}.{key}: indices start at 1")
            if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
                raise ValueError(f"{path}.{key}: entry must be [re, im]")
            idx.append(k)
            val.append(complex(float(pair[0]), float(pair[1])))
        return cls(idx, val)


def unit(n: int) -> SparseVec:
    if n < 1:
        raise ValueError("n must be >= 1")
    return SparseVec([n], [1.0])


def f_vector(n: int) -> SparseVec:
    """f_n = e_1 + ... + e_n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return SparseVec(np.arange(1, n + 1), np.ones(n))


@dataclass(frozen=True)
class TwistedVec:
    """The element (y, x): y the twisted coordinate, x the base coordinate."""

    y: SparseVec
    x: SparseVec

    def __add__(self, other: "TwistedVec") -> "TwistedVec":
        return TwistedVec(self.y + other.y, self.x + other.x)

    def __sub__(self, other: "TwistedVec") -> "TwistedVec":
        return TwistedVec(self.y - other.y, self.x - other.x)

    def __mul__(self, scalar) -> "TwistedVec":
        return TwistedVec(self.y * scalar, self.x * scalar)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not self.y and not self.x

    def to_json_obj(self) -> dict:
        return {"y": self.y.to_json_obj(), "x": self.x.to_json_obj()}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json_obj(cls, obj, path: str = "$") -> "TwistedVec":
        if not isinstance(obj, Mapping) or set(obj) != {"y", "x"}:
            raise ValueError(f"{path}: twisted vector needs exactly keys 'y' and 'x'")
        return cls(SparseVec.from_json_obj(obj["y"], f"{path}.y"),
                   SparseVec.from_json_obj(obj["x"], f"{path}.x"))


@dataclass(frozen=True)
class Matrix2:
    """2x2 scalar matrix acting by (y, x) -> (lam y + mu x, eta y + sigma x)."""

    lam: complex = 1.0
    mu: complex = 0.0
    eta: complex = 0.0
    sigma: complex = 1.0


# -- kernels ---------------------------------------------------------------

def omega(phi: Func, x: SparseVec) -> SparseVec:
    """Omega_phi(x)_n = x_n phi(log(||x|| / |x_n|)), Omega_phi(0) = 0."""
    if not x:
        return SparseVec()
    nrm = x.norm
    mod = np.abs(x.val)
    ratio = mod / nrm
    live = ratio >= UNDERFLOW_RATIO
    logs = np.zeros(mod.size)
    # log(||x|| / |x_n|) >= 0; clamp one-ulp disagreements between the two
    logs[live] = np.maximum(np.log(nrm / mod[live]), 0.0)
    out = x.val * evaluate(phi, logs)
    out[~live] = 0
    return SparseVec(x.idx, out)


def quasinorm(phi: Func, v: TwistedVec) -> float:
    """||(y, x)||_phi = ||y - Omega_phi(x)|| + ||x||."""
    return (v.y - omega(phi, v.x)).norm + v.x.norm


def quasilinearity_defect(phi: Func, x: SparseVec, y: SparseVec) -> float:
    """||Omega(x+y) - Omega(x) - Omega(y)|| / (||x|| + ||y||)."""
    denom = x.norm + y.norm
    if denom == 0:
        raise ValueError("x and y are both zero")
    d = omega(phi, x + y) - omega(phi, x) - omega(phi, y)
    return d.norm / denom


def quasinorm_triangle_constant(phi: Func, pairs: Iterable[tuple[TwistedVec, TwistedVec]]):
    """Largest ||u + v|| / (||u|| + ||v||) over the pairs; returns (ratio, count)."""
    best, count = 0.0, 0
    for u, v in pairs:
        denom = quasinorm(phi, u) + quasinorm(phi, v)
        if denom == 0:
            raise ValueError("sampler produced a zero pair")
        best = max(best, quasinorm(phi, u + v) / denom)
        count += 1
    return best, count


def duality_pairing(u: TwistedVec, v: TwistedVec, sesquilinear: bool = False) -> complex:
    """<b, c> + <a, d> for u = (a, b) in Z(phi) and v = (c, d) in Z(-phi).

    Bilinear by default; ``sesquilinear`` conjugates v.
    """
    c, d = (v.y.conj(), v.x.conj()) if sesquilinear else (v.y, v.x)
    return u.x.dot(c) + u.y.dot(d)


def matrix_apply(m: Matrix2, v: TwistedVec) -> TwistedVec:
    return TwistedVec(v.y * m.lam + v.x * m.mu, v.y * m.eta + v.x * m.sigma)


def basis_vector(kind: str, n: int) -> TwistedVec:
    """(e_n, 0) for kind 'twisted', (0, e_n) for kind 'base'."""
    e = unit(n)
    if kind == "twisted":
        return TwistedVec(e, SparseVec())
    if kind == "base":
        return TwistedVec(SparseVec(), e)
    raise ValueError("kind must be 'twisted' or 'base'")


# -- the growth quantities behind the distinguishing test -------------------

# Above this length the f_n vectors are not materialised.
DENSE_LIMIT = 2**20


def growth_eta(psi: Func, m: Matrix2, n: int, route: str = "auto") -> float:
    """||M(n^{-1/2}(f_n, 0))||_psi.

    ``route='vector'`` builds f_n; ``'scalar'`` uses Omega_psi(f_n) =
    psi(log sqrt n) f_n, giving |lam - eta psi(log sqrt n)| + |eta|.
    ``'auto'`` picks the vector route while n <= DENSE_LIMIT.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if route == "auto":
        route = "vector" if n <= DENSE_LIMIT else "scalar"
    if route == "vector":
        u = TwistedVec(f_vector(n) / math.sqrt(n), SparseVec())
        return quasinorm(psi, matrix_apply(m, u))
    if route == "scalar":
        s = evaluate(psi, 0.5 * math.log(n))
        return abs(m.lam - m.eta * s) + abs(m.eta)
    raise ValueError(f"unknown route {route!r}")


def growth_lambda_sigma_routes(phi: Func, psi: Func, lam, sigma, n: int) -> tuple[float | None, float]:
    """(vector route, scalar route) of n^{-1/2} ||lam Omega_phi f_n - sigma Omega_psi f_n||.

    The vector route is ``None`` when n exceeds DENSE_LIMIT.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    s = 0.5 * math.log(n)
    scalar = abs(lam * evaluate(phi, s) - sigma * evaluate(psi, s))
    if n > DENSE_LIMIT:
        return None, scalar
    fn = f_vector(n)
    vec = (omega(phi, fn) * lam - omega(psi, fn) * sigma).norm / math.sqrt(n)
    return vec, scalar


def growth_lambda_sigma(phi: Func, psi: Func, lam, sigma, n: int, rtol: float = 1e-10) -> float:
    """Vector route, checked against the scalar route |lam phi(L) - sigma psi(L)|
    with L = log sqrt n.  Beyond DENSE_LIMIT only the scalar route exists."""
    vec, scalar = growth_lambda_sigma_routes(phi, psi, lam, sigma, n)
    if vec is None:
        return scalar
    if abs(vec - scalar) > rtol * max(1.0, abs(scalar)):
        raise ArithmeticError(f"routes disagree at n={n}: {vec!r} vs {scalar!r}")
    return vec


# -- conjugation -----------------------------------------------------------

def conjugate_map(phi: Func) -> Func:
    """Descriptor evaluating to the complex conjugate of ``phi``."""
    meta = dict(lip_upper=phi.lip_upper, lip_lower=phi.lip_lower,
                differentiable=phi.differentiable)
    if isinstance(phi, Linear):
        return Linear(complex(phi.c).conjugate() if complex(phi.c).imag else phi.c, **meta)
    if isinstance(phi, (SinPlain, SinLog)):
        return phi
    if isinstance(phi, PowerPhase):
        return PowerPhase(-phi.alpha, **meta)
    if isinstance(phi, Scale):
        c = complex(phi.c).conjugate() if complex(phi.c).imag else phi.c
        return Scale(c, conjugate_map(phi.child), **meta)
    if isinstance(phi, Sum):
        return Sum(tuple(conjugate_map(t) for t in phi.terms), **meta)
    if isinstance(phi, ComplexCombine):
        return ComplexCombine(conjugate_map(phi.re), Scale(-1.0, conjugate_map(phi.im)), **meta)
    raise TypeError(f"cannot conjugate {type(phi).__name__}")


def conjugate_vec(v: TwistedVec) -> TwistedVec:
    return TwistedVec(v.y.conj(), v.x.conj())
