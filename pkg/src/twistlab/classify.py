"""Class membership, incomparability evidence, the self-similarity defect and
the Kalton-Peck detector."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .blocks import BlockBasis, uniform_basis
from .funcs import calculus
from .funcs.descriptors import DerivativeUnavailable, Func, evaluate, to_dict
from .funcs.growth import (
    BOUNDED,
    GROWING,
    NOISE_ULPS,
    GrowthConfig,
    GrowthReport,
    LogGrid,
    classify_growth,
)
from .twist import Matrix2, SparseVec, f_vector, growth_eta, growth_lambda_sigma, omega

KALTON_PECK_LIKE = "KaltonPeckLike"
NOT_KALTON_PECK = "NotKaltonPeck"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ClassConfig:
    grid: LogGrid = LogGrid()
    bi_floor: float = 1e-3
    eps_bis: float = 1e-6
    bid_floor: float = 1e-2
    bid_min_exp: int = 2
    bid_max_exp: int = 40
    lipschitz_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ClassReport:
    map_name: str
    in_L_bi: bool
    in_L_bis: bool | None
    in_L_bid: bool
    evidence: dict
    config: dict

    def to_dict(self) -> dict:
        return asdict(self)


def class_report(phi: Func, config: ClassConfig = ClassConfig(), name: str | None = None) -> ClassReport:
    lo, hi = calculus.lipschitz_bounds(phi, config.grid, seed=config.lipschitz_seed)
    evidence: dict = {"lipschitz": {"lower_est": lo, "upper_est": hi,
                                    "analytic_lower": phi.lower_bound(),
                                    "analytic_upper": phi.upper_bound()}}
    try:
        tail, bis = calculus.in_L_bis(phi, config.grid, config.eps_bis)
        evidence["second_derivative"] = {"window_max": tail, "final": tail[-1][1]}
    except DerivativeUnavailable as exc:
        bis = None
        evidence["second_derivative"] = {"unavailable": exc.paths}

    exps = list(range(config.bid_min_exp, config.bid_max_exp + 1))
    parts = ["re"] if phi.is_real() else ["re", "im"]
    bid = {}
    for part in parts:
        value, (n, m) = calculus.bid_sweep(phi, exps, part)
        bid[part] = {"max": value, "n": n, "m": m}
    evidence["bid"] = bid
    in_bid = any(b["max"] > config.bid_floor for b in bid.values())
    return ClassReport(
        name or _name(phi), lo >= config.bi_floor, bis, in_bid, evidence, config.to_dict()
    )


def _name(phi: Func) -> str:
    d = to_dict(phi)
    params = ",".join(f"{k}={v}" for k, v in d.items() if k not in ("type", "children"))
    kids = d.get("children")
    inner = f"[{len(kids)} children]" if kids else ""
    return f"{d['type']}({params}){inner}"


# -- self-similarity -------------------------------------------------------

def _canonical_weights(phi: Func, vals: np.ndarray) -> np.ndarray:
    return vals * evaluate(phi, np.maximum(np.log(1.0 / np.abs(vals)), 0.0))


def canonical_L(phi: Func, basis: BlockBasis) -> list[SparseVec]:
    """Images L'(e_n) = sum_k phi(log 1/|u_n(k)|) u_n(k) e_k."""
    return [SparseVec(u.idx, _canonical_weights(phi, u.val)) for u in basis.blocks]


def selfsim_defect(phi: Func, basis: BlockBasis, x: SparseVec) -> float:
    """||T_U(Omega x) - Omega(T_U x) + L'(x)|| / ||x||, T_U x = sum x_n u_n."""
    if not x:
        raise ValueError("x must be nonzero")
    if int(x.idx[-1]) > len(basis):
        raise IndexError("x reaches past the last block")
    used = [basis.blocks[int(n) - 1] for n in x.idx]
    lengths = [len(u.idx) for u in used]
    idx = np.concatenate([u.idx for u in used])
    vals = np.concatenate([u.val for u in used])
    om = omega(phi, x)
    om_x = np.zeros(len(x.idx), dtype=complex)
    om_x[np.searchsorted(x.idx, om.idx)] = om.val
    tx = np.repeat(x.val, lengths) * vals
    t_omega = np.repeat(om_x, lengths) * vals
    lx = np.repeat(x.val, lengths) * _canonical_weights(phi, vals)
    omega_t = omega(phi, SparseVec(idx, tx))
    diff = SparseVec(idx, t_omega + lx) - omega_t
    return diff.norm / x.norm


def uniform_block_defect(phi: Func, N: int, M: int) -> float:
    """|phi(log sqrt M) + phi(log sqrt N) - phi(log sqrt(NM))|."""
    if N < 1 or M < 1:
        raise ValueError("N and M must be >= 1")
    a, b = 0.5 * math.log(M), 0.5 * math.log(N)
    c = 0.5 * math.log(N * M)
    return float(abs(evaluate(phi, a) + evaluate(phi, b) - evaluate(phi, c)))


def _clamped_defect(phi: Func, i: int, j: int) -> float:
    # D(2^i, 2^j) with round-off-level values reported as 0.
    d = uniform_block_defect(phi, 2**i, 2**j)
    h = 0.5 * math.log(2.0)
    mag = max(abs(evaluate(phi, h * e)) for e in (i, j, i + j))
    return 0.0 if d <= NOISE_ULPS * np.finfo(float).eps * mag else d


def uniform_selfsim_routes(phi: Func, N: int, M: int) -> tuple[float, float]:
    """(vector route, closed form) for the uniform basis of width N and x = f_M."""
    return selfsim_defect(phi, uniform_basis(N, M), f_vector(M)), uniform_block_defect(phi, N, M)


@dataclass(frozen=True)
class DetectorConfig:
    grid: LogGrid = LogGrid()
    growth: GrowthConfig = GrowthConfig()
    max_exp_N: int = 30
    max_exp_M: int = 30
    defect_cap: float = 10.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SelfSimReport:
    exponents_N: list[int]
    exponents_M: list[int]
    defect_matrix: list[list[float]]
    diagonal: GrowthReport
    additivity: GrowthReport
    hyers_c: complex
    residual: GrowthReport
    verdict: str
    cap: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "exponents_N": self.exponents_N,
            "exponents_M": self.exponents_M,
            "defect_matrix": self.defect_matrix,
            "diagonal": self.diagonal.to_dict(),
            "additivity": self.additivity.to_dict(),
            "hyers_c": [self.hyers_c.real, self.hyers_c.imag],
            "residual": self.residual.to_dict(),
            "verdict": self.verdict,
            "cap": self.cap,
            "config": self.config,
        }


def kalton_peck_detector(phi: Func, config: DetectorConfig = DetectorConfig()) -> SelfSimReport:
    """Uniform-block defect matrix over dyadic N, M plus additivity and Hyers.

    The diagonal report classifies the running maximum of D(2^k, 2^k) over
    the upper half of the exponent range.

    KaltonPeckLike: residual Bounded and every defect <= cap * max(1, |c|).
    NotKaltonPeck: residual Growing or the diagonal defect Growing.
    """
    eN = list(range(config.max_exp_N + 1))
    eM = list(range(config.max_exp_M + 1))
    matrix = [[_clamped_defect(phi, i, j) for j in eM] for i in eN]
    diag_len = min(len(eN), len(eM))
    # Running maximum over the upper half of the diagonal: the sup that has to
    # stay finite, insensitive to the zeros of oscillating defects.
    running = np.maximum.accumulate([matrix[k][k] for k in range(diag_len)])
    tail_start = diag_len // 2
    diag_cfg = GrowthConfig(**{**asdict(config.growth), "tail_start": tail_start,
                               "min_windows": min(config.growth.min_windows, diag_len - tail_start)})
    diagonal = classify_growth(
        list(enumerate(running.tolist())), diag_cfg,
        magnitudes=[abs(evaluate(phi, k * math.log(2.0))) for k in range(diag_len)],
    )
    additivity = calculus.additivity_defect(phi, config.grid, config.growth)
    c, residual = calculus.hyers_linearize(phi, config.grid, config.growth)
    cap = config.defect_cap * max(1.0, abs(c))
    worst = max(max(row) for row in matrix)
    if residual.verdict == GROWING or diagonal.verdict == GROWING:
        verdict = NOT_KALTON_PECK
    elif residual.verdict == BOUNDED and worst <= cap:
        verdict = KALTON_PECK_LIKE
    else:
        verdict = INCONCLUSIVE
    return SelfSimReport(eN, eM, matrix, diagonal, additivity, c, residual, verdict, cap,
                         config.to_dict())


# -- incomparability -------------------------------------------------------

@dataclass
class IncomparabilityReport:
    hypotheses: dict[str, bool]
    a_best: complex
    projective: GrowthReport
    lambda_sigma: GrowthReport
    phi_report: ClassReport
    psi_report: ClassReport

    @property
    def supported(self) -> bool:
        return all(self.hypotheses.values())

    def to_dict(self) -> dict:
        return {
            "hypotheses": self.hypotheses,
            "supported": self.supported,
            "a_best": [self.a_best.real, self.a_best.imag],
            "projective": self.projective.to_dict(),
            "lambda_sigma": self.lambda_sigma.to_dict(),
            "phi": self.phi_report.to_dict(),
            "psi": self.psi_report.to_dict(),
        }


def dyadic_sweep_config(config: GrowthConfig, max_exp: int) -> GrowthConfig:
    """Growth settings for sequences sampled at n = 2^k, k = 0..max_exp: the
    quantities grow like powers of log n, so regress on log k over the upper
    half of the exponent range."""
    start = max(1, max_exp // 2)
    return replace(config, tail_start=start, log_axis=True,
                   min_windows=min(config.min_windows, max_exp - start + 1))


def lambda_sigma_sweep(phi: Func, psi: Func, lam, sigma, max_exp: int = 30,
                       config: GrowthConfig = GrowthConfig()) -> GrowthReport:
    """Growth of n^{-1/2} ||lam Omega_phi f_n - sigma Omega_psi f_n|| over n = 2^k."""
    vals = [(k, growth_lambda_sigma(phi, psi, lam, sigma, 2**k)) for k in range(max_exp + 1)]
    mags = [max(abs(lam * evaluate(phi, 0.5 * k * math.log(2.0))),
                abs(sigma * evaluate(psi, 0.5 * k * math.log(2.0)))) for k in range(max_exp + 1)]
    return classify_growth(vals, dyadic_sweep_config(config, max_exp), mags)


def eta_sweep(psi: Func, m: Matrix2, max_exp: int = 30,
              config: GrowthConfig = GrowthConfig()) -> GrowthReport:
    """Growth of ||M(n^{-1/2}(f_n, 0))||_psi over n = 2^k; Growing when eta != 0
    is the numerical face of the singularity of the lower corner."""
    vals = [(k, growth_eta(psi, m, 2**k)) for k in range(max_exp + 1)]
    mags = [abs(m.lam) + abs(m.eta) * (1 + abs(evaluate(psi, 0.5 * k * math.log(2.0))))
            for k in range(max_exp + 1)]
    return classify_growth(vals, dyadic_sweep_config(config, max_exp), mags)


def incomparability_evidence(phi: Func, psi: Func, class_config: ClassConfig = ClassConfig(),
                             growth: GrowthConfig = GrowthConfig(), max_exp: int = 30) -> IncomparabilityReport:
    """Which numerical hypotheses of the incomparability criterion hold:
    phi in L_bid, psi in L_bis, phi and psi not projectively equivalent, and
    the lambda/sigma growth at the best projective ratio."""
    rp = class_report(phi, class_config)
    rq = class_report(psi, class_config)
    a, proj = calculus.projective_equivalence_test(phi, psi, class_config.grid, config=growth)
    ls = lambda_sigma_sweep(phi, psi, 1.0, a, max_exp, growth)
    hyp = {
        "phi_in_L_bi": rp.in_L_bi,
        "psi_in_L_bi": rq.in_L_bi,
        "phi_in_L_bid": rp.in_L_bid,
        "psi_in_L_bis": bool(rq.in_L_bis),
        "not_projectively_equivalent": proj.verdict == GROWING,
        "lambda_sigma_growing": ls.verdict == GROWING,
    }
    return IncomparabilityReport(hyp, a, proj, ls, rp, rq)
