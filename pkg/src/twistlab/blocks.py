"""Normalised block sequences, their lifts into Z(phi), and the Orlicz-type
functionals they are compared against."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import bisect

from .funcs.descriptors import Func, evaluate
from .twist import SparseVec, TwistedVec, omega, quasinorm

NORM_TOL = 1e-12


@dataclass(frozen=True)
class BlockBasis:
    """Disjoint, ordered, l2-normalised blocks v_1, v_2, ... (1-based).

    ``breakpoints`` p_0 < p_1 < ... satisfy support(v_n) within (p_{n-1}, p_n].
    """

    blocks: tuple[SparseVec, ...]
    breakpoints: tuple[int, ...]

    def __post_init__(self):
        if len(self.breakpoints) != len(self.blocks) + 1:
            raise ValueError("need one more breakpoint than blocks")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must increase")
        for n, (v, lo, hi) in enumerate(zip(self.blocks, self.breakpoints, self.breakpoints[1:]), 1):
            if not v:
                raise ValueError(f"block {n} is empty")
            if abs(v.norm - 1.0) > NORM_TOL:
                raise ValueError(f"block {n} has norm {v.norm!r}, expected 1")
            if v.idx[0] <= lo or v.idx[-1] > hi:
                raise ValueError(f"block {n} leaves its interval ({lo}, {hi}]")

    @classmethod
    def from_blocks(cls, blocks: Sequence[SparseVec]) -> "BlockBasis":
        """Infer tight breakpoints; blocks must already be ordered and disjoint."""
        if not blocks:
            raise ValueError("empty block list")
        bps = [int(blocks[0].idx[0]) - 1] if blocks[0] else [0]
        for v in blocks:
            if not v:
                raise ValueError("empty block")
            if int(v.idx[0]) <= bps[-1]:
                raise ValueError("blocks overlap or are out of order")
            bps.append(int(v.idx[-1]))
        return cls(tuple(blocks), tuple(bps))

    def __len__(self):
        return len(self.blocks)

    def block(self, n: int) -> SparseVec:
        if not 1 <= n <= len(self.blocks):
            raise IndexError(f"block index {n} outside 1..{len(self.blocks)}")
        return self.blocks[n - 1]

    def to_json_obj(self) -> dict:
        return {"blocks": [v.to_json_obj() for v in self.blocks]}

    @classmethod
    def from_json_obj(cls, obj) -> "BlockBasis":
        if not isinstance(obj, dict) or not isinstance(obj.get("blocks"), list):
            raise ValueError("$: block basis needs a list field 'blocks'")
        blocks = [SparseVec.from_json_obj(b, f"$.blocks[{i}]") for i, b in enumerate(obj["blocks"])]
        return cls.from_blocks(blocks)


def uniform_basis(width: int, count: int) -> BlockBasis:
    """u_n = width^{-1/2} (e_{(n-1)w+1} + ... + e_{nw})."""
    if width < 1 or count < 1:
        raise ValueError("width and count must be >= 1")
    idx = np.arange(1, count * width + 1, dtype=np.int64).reshape(count, width)
    val = np.full((count, width), 1.0 / math.sqrt(width), dtype=complex)
    blocks = tuple(SparseVec._trusted(i, v) for i, v in zip(idx, val))
    return BlockBasis(blocks, tuple(range(0, count * width + 1, width)))


def random_basis(rng: np.random.Generator, count: int, max_width: int,
                 complex_entries: bool = False) -> BlockBasis:
    """Consecutive blocks of random width in 1..max_width with random entries."""
    blocks, start = [], 1
    for _ in range(count):
        w = int(rng.integers(1, max_width + 1))
        v = rng.standard_normal(w)
        if complex_entries:
            v = v + 1j * rng.standard_normal(w)
        v = v / np.linalg.norm(v)
        blocks.append(SparseVec(np.arange(start, start + w), v))
        start += w
    return BlockBasis.from_blocks(blocks)


def block_lift(phi: Func, basis: BlockBasis, n: int) -> TwistedVec:
    """w_n = (Omega_phi(v_n), v_n)."""
    v = basis.block(n)
    return TwistedVec(omega(phi, v), v)


def _synthesis(basis: BlockBasis, t: SparseVec, vecs: Callable[[int], SparseVec]) -> SparseVec:
    idx, val = [], []
    for n, tn in zip(t.idx, t.val):
        v = vecs(int(n))
        idx.append(v.idx)
        val.append(tn * v.val)
    if not idx:
        return SparseVec()
    return SparseVec(np.concatenate(idx), np.concatenate(val))


def block_combination_norm(phi: Func, basis: BlockBasis, t: SparseVec) -> tuple[float, float]:
    """||sum t_n w_n||_phi computed twice.

    ``direct`` assembles (sum t_n Omega(v_n), sum t_n v_n) and takes the
    quasi-norm; ``formula`` evaluates the coordinate expression
    ||t_n v_n(k) (phi(log 1/|v_n(k)|) - phi(log ||t|| / |t_n v_n(k)|))|| + ||t||.
    """
    if not t:
        return 0.0, 0.0
    if int(t.idx[-1]) > len(basis):
        raise IndexError("coefficients reach past the last block")
    y = _synthesis(basis, t, lambda n: omega(phi, basis.block(n)))
    x = _synthesis(basis, t, basis.block)
    direct = quasinorm(phi, TwistedVec(y, x))

    tnorm = math.sqrt(math.fsum(np.abs(t.val) ** 2))
    parts = []
    for n, tn in zip(t.idx, t.val):
        v = basis.block(int(n))
        mod = np.abs(v.val)
        coef = tn * v.val
        # both logs are >= 0 exactly; clamp one-ulp round-off
        inner = (evaluate(phi, np.maximum(np.log(1.0 / mod), 0.0))
                 - evaluate(phi, np.maximum(np.log(tnorm / np.abs(coef)), 0.0)))
        parts.append(np.abs(coef * inner) ** 2)
    formula = math.sqrt(math.fsum(np.concatenate(parts))) + tnorm
    return direct, formula


def kp_functional(t: SparseVec) -> float:
    """(sum |t_n|^2 log^2(||t|| / |t_n|))^{1/2} + ||t||.

    Sums are correctly rounded (fsum), so the value is invariant under
    permutations of the coordinates.
    """
    if not t:
        return 0.0
    mod = np.abs(t.val)
    nrm = math.sqrt(math.fsum(mod**2))
    return math.sqrt(math.fsum((mod * np.log(nrm / mod)) ** 2)) + nrm


@dataclass(frozen=True)
class OrliczFunc:
    """Phi(s) = s^2 (1 + |log s|)^2, Phi(0) = 0."""

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = (s[pos] * (1.0 + np.abs(np.log(s[pos])))) ** 2
        return out


def luxemburg_norm(t: SparseVec, Phi: Callable = OrliczFunc(), rtol: float = 1e-10) -> float:
    """inf{rho > 0 : sum Phi(|t_n| / rho) <= 1} by bisection."""
    if not t:
        raise ValueError("Luxemburg norm of the zero vector is not bisected")
    mod = np.abs(t.val)

    def excess(rho):
        return math.fsum(Phi(mod / rho)) - 1.0

    lo = float(mod.max())
    hi = kp_functional(t) + float(mod.sum())
    if excess(lo) <= 0:
        return lo
    while excess(hi) > 0:
        hi *= 2.0
    return float(bisect(excess, lo, hi, xtol=1e-300, rtol=rtol, maxiter=2000))


def embed_second(x: SparseVec) -> TwistedVec:
    """j(x) = (0, x)."""
    return TwistedVec(SparseVec(), x)


def project_first(v: TwistedVec) -> SparseVec:
    """p(y, x) = y."""
    return v.y


def block_norm_vs_kp(phi: Func, basis: BlockBasis, samples: Iterable[SparseVec]) -> tuple[float, float]:
    """Band [min, max] of ||sum t_n w_n||_phi / F(t) over nonzero samples t."""
    if not phi.is_bilipschitz:
        raise ValueError("block equivalence needs a bi-Lipschitz map")
    ratios = [block_combination_norm(phi, basis, t)[0] / kp_functional(t) for t in samples if t]
    if not ratios:
        raise ValueError("no nonzero samples")
    return min(ratios), max(ratios)
