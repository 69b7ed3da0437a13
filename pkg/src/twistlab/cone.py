"""Log-modulated sine maps, their nonnegative combinations, and the
Kronecker-orbit machinery used to certify sign patterns and density."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .funcs.descriptors import Func, Scale, SinLog, Sum, evaluate, linear_part
from .funcs.growth import LogGrid

LOG2 = math.log(2.0)
GAMMA = math.log(0.5)
DEFAULT_ALPHA = 0.1

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


def prime_root_betas(n: int) -> list[float]:
    """Fractional parts of sqrt(2), sqrt(3), sqrt(5), ... (Q-independent)."""
    if not 1 <= n <= len(_PRIMES):
        raise ValueError(f"n must lie in 1..{len(_PRIMES)}")
    return [math.sqrt(p) % 1.0 for p in _PRIMES[:n]]


def make_sinlog(alpha: float, beta: float) -> SinLog:
    """x + alpha x sin(beta log x).

    Bounds 1 -+ alpha(1 + beta) apply because |sin| and |cos| are at most 1;
    the map is bi-Lipschitz exactly when alpha (1 + beta) < 1.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    return SinLog(alpha, beta)


def cone_frequency(beta: float) -> float:
    """2 pi beta log 2 (= -2 pi beta log 1/2)."""
    return -2.0 * math.pi * beta * GAMMA


@dataclass(frozen=True)
class ConeSpec:
    """Triples (lam_j, alpha_j, beta_j) with lam_j, alpha_j > 0 and distinct
    beta_j in (0, 1), constrained by max(alpha) (1 + 2 pi max(beta) log 2) < 1."""

    triples: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        trip = tuple(tuple(float(v) for v in tr) for tr in self.triples)
        object.__setattr__(self, "triples", trip)
        if not trip:
            raise ValueError("a cone element needs at least one triple")
        for lam, alpha, beta in trip:
            if lam <= 0 or alpha <= 0:
                raise ValueError("lambda and alpha must be positive")
            if not 0 < beta < 1:
                raise ValueError("beta must lie in (0, 1)")
        betas = [b for _, _, b in trip]
        if len(set(betas)) != len(betas):
            raise ValueError("betas must be pairwise distinct")
        if self.alpha * (1 + 2 * math.pi * self.beta * LOG2) >= 1:
            raise ValueError("alpha (1 + 2 pi beta log 2) must be < 1")

    @classmethod
    def from_betas(cls, betas: Sequence[float], lams: Sequence[float] | None = None,
                   alpha: float = DEFAULT_ALPHA) -> "ConeSpec":
        lams = [1.0] * len(betas) if lams is None else lams
        return cls(tuple((lam, alpha, b) for lam, b in zip(lams, betas)))

    @property
    def alpha(self) -> float:
        return max(a for _, a, _ in self.triples)

    @property
    def beta(self) -> float:
        return max(b for _, _, b in self.triples)

    @property
    def lam(self) -> float:
        return sum(lam for lam, _, _ in self.triples)

    @property
    def frequencies(self) -> list[float]:
        return [cone_frequency(b) for _, _, b in self.triples]

    def lower_bound(self) -> float:
        """lam (1 - alpha (1 + 2 pi beta log 2))."""
        return self.lam * (1 - self.alpha * (1 + 2 * math.pi * self.beta * LOG2))

    def merge(self, other: "ConeSpec") -> "ConeSpec":
        return ConeSpec(self.triples + other.triples)


def cone_element(spec: ConeSpec) -> Func:
    """sum_j lam_j g_{alpha_j, 2 pi beta_j log 2} with the lower bound attached."""
    terms = tuple(
        Scale(lam, make_sinlog(alpha, cone_frequency(beta)))
        for lam, alpha, beta in spec.triples
    )
    upper = sum(lam * (1 + a * (1 + cone_frequency(b))) for lam, a, b in spec.triples)
    return Sum(terms, lip_upper=upper, lip_lower=spec.lower_bound())


# -- Kronecker orbits ------------------------------------------------------

_SPLIT = 2.0**26


def frac_multiples(beta: float, ks: np.ndarray) -> np.ndarray:
    """{k beta} with beta split into a 26-bit head and a small tail, so k*head
    is exact for k < 2^27 and the result stays within ~1e-15 of exact."""
    beta = float(beta) % 1.0
    head = math.floor(beta * _SPLIT) / _SPLIT
    tail = beta - head
    ks = np.asarray(ks, dtype=np.float64)
    if ks.size and ks.max() >= 2.0**27:
        raise ValueError("k too large for the split product")
    out = np.mod(ks * head, 1.0) + ks * tail
    return np.mod(out, 1.0)


@dataclass(frozen=True)
class KroneckerOrbit:
    betas: tuple[float, ...]
    K: int
    points: np.ndarray  # shape (K, n): row k-1 holds ({k b_1}, ..., {k b_n})

    @property
    def dim(self) -> int:
        return len(self.betas)


def kronecker_orbit(betas: Sequence[float], K: int) -> KroneckerOrbit:
    if not betas:
        raise ValueError("need at least one beta")
    if K < 1:
        raise ValueError("K must be >= 1")
    ks = np.arange(1, K + 1)
    pts = np.column_stack([frac_multiples(b, ks) for b in betas])
    pts[pts >= 1.0] = 0.0
    pts.flags.writeable = False
    return KroneckerOrbit(tuple(float(b) for b in betas), K, pts)


def covering_radius(orbit: KroneckerOrbit, lattice: int = 64) -> float:
    """Max over the lattice {i/lattice}^n of the torus distance to the orbit."""
    n = orbit.dim
    if n > 3:
        raise ValueError("covering radius lattice limited to n <= 3")
    tree = cKDTree(orbit.points, boxsize=1.0)
    axes = [np.arange(lattice) / lattice] * n
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    dist, _ = tree.query(grid)
    return float(dist.max())


def discrepancy_estimate(orbit: KroneckerOrbit, max_level: int | None = None) -> float:
    """Max |count/K - volume| over dyadic boxes of side 2^-j, j <= max_level."""
    n = orbit.dim
    if n > 3:
        raise ValueError("dyadic box family limited to n <= 3")
    if max_level is None:
        max_level = 12 // n
    worst = 0.0
    for j in range(max_level + 1):
        m = 2**j
        cells = np.minimum((orbit.points * m).astype(np.int64), m - 1)
        flat = np.ravel_multi_index(cells.T, (m,) * n)
        counts = np.bincount(flat, minlength=m**n)
        worst = max(worst, float(np.abs(counts / orbit.K - 1.0 / m**n).max()))
    return worst


@dataclass(frozen=True)
class SignPattern:
    k: int
    values: tuple[float, ...]  # sin(2 pi k beta_i log 2)


def sign_values(betas: Sequence[float], k) -> np.ndarray:
    ks = np.atleast_1d(np.asarray(k))
    return np.column_stack(
        [np.sin(2 * math.pi * frac_multiples(b * LOG2, ks)) for b in betas]
    )


def find_sign_pattern(betas: Sequence[float], signs: Sequence[int], threshold: float,
                      K_max: int, chunk: int = 1 << 16) -> SignPattern | None:
    """Smallest k <= K_max with sign_i sin(2 pi k beta_i log 2) > threshold for
    all i, or None."""
    if len(signs) != len(betas):
        raise ValueError("one sign per beta")
    if any(s not in (1, -1) for s in signs):
        raise ValueError("signs must be +1 or -1")
    if threshold >= 1:
        return None
    sg = np.asarray(signs, dtype=float)
    for start in range(1, K_max + 1, chunk):
        ks = np.arange(start, min(start + chunk, K_max + 1))
        vals = sign_values(betas, ks)
        hit = np.flatnonzero(np.all(vals * sg > threshold, axis=1))
        if hit.size:
            i = int(hit[0])
            return SignPattern(int(ks[i]), tuple(float(v) for v in vals[i]))
    return None


def trig_identity_check(beta_prime: float, n: int) -> tuple[float, float]:
    """Both sides of 2 sin(beta y) - sin(beta(gamma + y)) at y = -n gamma, with
    beta = -2 pi beta' gamma, gamma = log 1/2; the right side is
    a sin(2 pi beta' gamma^2 n) + b cos(2 pi beta' gamma^2 n),
    a = 2 - cos(beta gamma), b = -sin(beta gamma)."""
    g = GAMMA
    beta = -2 * math.pi * beta_prime * g
    y = -n * g
    lhs = 2 * math.sin(beta * y) - math.sin(beta * (g + y))
    a = 2 - math.cos(beta * g)
    b = -math.sin(beta * g)
    arg = 2 * math.pi * beta_prime * g * g * n
    rhs = a * math.sin(arg) + b * math.cos(arg)
    return lhs, rhs


def gram_spectrum(elements: Sequence[Func], grid: LogGrid = LogGrid()) -> np.ndarray:
    """Singular values (descending) of the Gram matrix of the normalised
    sample vectors (h(t) - c_h t) / t, c_h the exact linear coefficient."""
    if len(elements) < 1:
        raise ValueError("need at least one element")
    ts = grid.samples()
    if ts.size < 4 * len(elements):
        raise ValueError("grid too small for the number of elements")
    cols = []
    for h in elements:
        r = (evaluate(h, ts) - linear_part(h) * ts) / ts
        nrm = np.linalg.norm(r)
        cols.append(r / nrm if nrm > 0 else r)
    V = np.column_stack(cols)
    gram = V.conj().T @ V
    return np.linalg.svd(gram, compute_uv=False)


def independence_gram_rank(elements: Sequence[Func], grid: LogGrid = LogGrid(),
                           tol: float = 1e-8) -> tuple[int, float]:
    """(numerical rank, smallest singular value) of the Gram matrix."""
    s = gram_spectrum(elements, grid)
    return int(np.sum(s > tol)), float(s.min())
