"""Command-line harness: one subcommand per experiment, deterministic artifacts.

Every artifact carries the tool version, the experiment tag, the seed and a
sha256 hash of the canonical run configuration.  Output paths are not part of
the configuration, so the same run written to two places is byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .blocks import (
    block_combination_norm,
    kp_functional,
    luxemburg_norm,
    random_basis,
)
from .classify import (
    INCONCLUSIVE as DETECTOR_INCONCLUSIVE,
    ClassConfig,
    DetectorConfig,
    class_report,
    incomparability_evidence,
    kalton_peck_detector,
)
from .cone import (
    DEFAULT_ALPHA,
    ConeSpec,
    covering_radius,
    cone_element,
    discrepancy_estimate,
    find_sign_pattern,
    gram_spectrum,
    kronecker_orbit,
)
from .funcs import calculus
from .funcs.descriptors import (
    DerivativeUnavailable,
    DescriptorError,
    Func,
    eval_d1,
    eval_d2,
    evaluate,
    from_dict,
    to_dict,
)
from .funcs.growth import INCONCLUSIVE, GrowthConfig, LogGrid
from .twist import SparseVec

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INCONCLUSIVE = 3

THREADS_ENV = "TWISTLAB_THREADS"


# -- plumbing --------------------------------------------------------------

class ValidationError(click.ClickException):
    exit_code = EXIT_INVALID


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def pmap(fn, items):
    """Order-preserving map, threaded when TWISTLAB_THREADS > 1."""
    items = list(items)
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def load_func(source: str, label: str) -> Func:
    """Descriptor from inline JSON (starting with '{') or a file path."""
    text = source
    if not source.lstrip().startswith("{"):
        path = Path(source)
        if not path.is_file():
            raise ValidationError(f"--{label}: no such file {source!r}")
        text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--{label}: $: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    try:
        return from_dict(data)
    except DescriptorError as exc:
        raise ValidationError(f"--{label}: {exc}") from None


def parse_betas(text: str) -> list[float]:
    """Comma list of numbers or shorthands sqrtP = frac(sqrt P)."""
    out = []
    for i, item in enumerate(s.strip() for s in text.split(",")):
        if item.startswith("sqrt"):
            try:
                p = int(item[4:])
            except ValueError:
                raise ValidationError(f"--betas[{i}]: bad shorthand {item!r}") from None
            r = math.isqrt(p) if p >= 0 else -1
            if p < 2 or r * r == p:
                raise ValidationError(f"--betas[{i}]: sqrt{p} is not irrational")
            out.append(math.sqrt(p) % 1.0)
        else:
            try:
                out.append(float(item))
            except ValueError:
                raise ValidationError(f"--betas[{i}]: not a number {item!r}") from None
    return out


def parse_floats(text: str, label: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ValidationError(f"--{label}: expected comma-separated numbers") from None


def parse_pattern(text: str, n: int) -> list[int]:
    signs = []
    for i, s in enumerate(x.strip() for x in text.split(",")):
        if s not in ("+", "-"):
            raise ValidationError(f"--pattern[{i}]: expected '+' or '-', got {s!r}")
        signs.append(1 if s == "+" else -1)
    if len(signs) != n:
        raise ValidationError(f"--pattern: {len(signs)} signs for {n} betas")
    return signs


def _write(artifact: dict, rows: list[list], header: list[str], fmt: str, out: str | None):
    meta = {k: artifact[k] for k in ("tool", "version", "experiment", "config_hash", "seed")}
    if fmt == "json":
        text = json.dumps(_jsonable(artifact), sort_keys=True, indent=2, allow_nan=False) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        for k in sorted(meta):
            buf.write(f"# {k}={meta[k]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        text = buf.getvalue()
    else:
        lines = [f"# {k}={meta[k]}" for k in sorted(meta)]
        lines.append("# " + " ".join(header))
        lines += [" ".join(_cell(v) for v in r) for r in rows]
        text = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


def _cell(v) -> str:
    v = _jsonable(v)
    if v is None:
        return "nan"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit(ctx, experiment: str, config: dict, result: dict, rows, header, strict_verdict=None):
    opts = ctx.obj
    full = {"command": ctx.info_name, "seed": opts["seed"], **config}
    artifact = {
        "tool": "twistlab",
        "version": __version__,
        "experiment": experiment,
        "config": full,
        "config_hash": config_hash(full),
        "seed": opts["seed"],
        "result": result,
    }
    _write(artifact, rows, header, opts["fmt"], opts["out"])
    if opts["strict"] and strict_verdict == INCONCLUSIVE:
        ctx.exit(EXIT_INCONCLUSIVE)


def grid_options(fn):
    fn = click.option("--t-min", type=float, default=2.0**-20, show_default=True)(fn)
    fn = click.option("--t-max", type=float, default=2.0**40, show_default=True)(fn)
    fn = click.option("--points", type=int, default=512, show_default=True,
                      help="Samples per dyadic window.")(fn)
    return fn


def make_grid(t_min, t_max, points) -> LogGrid:
    try:
        return LogGrid(t_min, t_max, points)
    except ValueError as exc:
        raise ValidationError(f"grid: {exc}") from None


def _grid_config(grid: LogGrid) -> dict:
    return {"t_min": grid.t_min, "t_max": grid.t_max, "points_per_window": grid.points_per_window}


def _exp_of(n: int, label: str) -> int:
    if n < 1 or n & (n - 1):
        raise ValidationError(f"--{label}: must be a power of two, got {n}")
    return n.bit_length() - 1


# -- commands --------------------------------------------------------------

@click.group()
@click.version_option(__version__, prog_name="twistlab")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the artifact here instead of stdout.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "plotdata"]), default="json",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--strict", is_flag=True, help="Exit 3 on an Inconclusive verdict.")
@click.pass_context
def cli(ctx, out, fmt, seed, strict):
    """Numerical experiments on twisted Hilbert spaces Z(phi)."""
    ctx.obj = {"out": out, "fmt": fmt, "seed": seed, "strict": strict}


@cli.command("eval")
@click.option("--func", "func_src", required=True, help="Descriptor file or inline JSON.")
@click.option("--t", "ts", required=True, help="Comma-separated points t >= 0.")
@click.pass_context
def cmd_eval(ctx, func_src, ts):
    """Values and derivatives of a descriptor."""
    f = load_func(func_src, "func")
    t = np.asarray(parse_floats(ts, "t"))
    try:
        v = evaluate(f, t)
    except ValueError as exc:
        raise ValidationError(f"--t: {exc}") from None
    pos = t > 0
    d1 = np.full(t.size, complex(np.nan, np.nan))
    d2 = np.full(t.size, complex(np.nan, np.nan))
    try:
        if pos.any():
            d1[pos] = eval_d1(f, t[pos])
            d2[pos] = eval_d2(f, t[pos])
    except DerivativeUnavailable:
        pass
    rows = [[ti, vi.real, vi.imag, a.real, a.imag, b.real, b.imag]
            for ti, vi, a, b in zip(t, np.atleast_1d(v), d1, d2)]
    result = {"t": t, "value": np.atleast_1d(v), "d1": d1, "d2": d2}
    emit(ctx, "descriptor-evaluation", {"func": to_dict(f), "t": t}, result, rows,
         ["t", "re", "im", "d1_re", "d1_im", "d2_re", "d2_im"])


@cli.command("constants")
@click.option("--func", "func_src", required=True)
@click.option("--n-random", type=int, default=20000, show_default=True)
@grid_options
@click.pass_context
def cmd_constants(ctx, func_src, n_random, t_min, t_max, points):
    """Empirical versus analytic Lipschitz constants and class membership."""
    f = load_func(func_src, "func")
    grid = make_grid(t_min, t_max, points)
    seed = ctx.obj["seed"]
    lo, hi = calculus.lipschitz_bounds(f, grid, n_random, seed)
    rep = class_report(f, ClassConfig(grid=grid, lipschitz_seed=seed))
    result = {
        "lipschitz": {"lower_est": lo, "upper_est": hi,
                      "analytic_lower": f.lower_bound(), "analytic_upper": f.upper_bound()},
        "classes": {"L_bi": rep.in_L_bi, "L_bis": rep.in_L_bis, "L_bid": rep.in_L_bid},
        "evidence": rep.evidence,
    }
    d2 = rep.evidence["second_derivative"].get("window_max", [])
    config = {"func": to_dict(f), "grid": _grid_config(grid), "n_random": n_random}
    emit(ctx, "lipschitz-constants", config, result, d2, ["window", "max_abs_d2"])


@cli.command("equiv")
@click.option("--f", "f_src", required=True)
@click.option("--g", "g_src", required=True)
@click.option("--projective", is_flag=True, help="Search the best scalar a in f ~ a g.")
@grid_options
@click.pass_context
def cmd_equiv(ctx, f_src, g_src, projective, t_min, t_max, points):
    """Equivalence (|f - g| bounded) or projective equivalence of two maps."""
    f, g = load_func(f_src, "f"), load_func(g_src, "g")
    grid = make_grid(t_min, t_max, points)
    cfg = GrowthConfig()
    result: dict = {}
    if projective:
        try:
            a, rep = calculus.projective_equivalence_test(f, g, grid, config=cfg)
        except ValueError as exc:
            raise ValidationError(f"--g: {exc}") from None
        result["a"] = a
    else:
        rep = calculus.equivalence_test(f, g, grid, cfg)
    result.update(rep.to_dict())
    config = {"f": to_dict(f), "g": to_dict(g), "projective": projective,
              "grid": _grid_config(grid)}
    emit(ctx, "equivalence", config, result, rep.window_maxima, ["window", "max_diff"],
         strict_verdict=rep.verdict)


@cli.command("cone")
@click.option("--betas", default="sqrt2,sqrt3,sqrt5", show_default=True)
@click.option("--alpha", type=float, default=DEFAULT_ALPHA, show_default=True)
@click.option("--lams", default=None, help="Comma-separated weights (default all 1).")
@grid_options
@click.pass_context
def cmd_cone(ctx, betas, alpha, lams, t_min, t_max, points):
    """Cone element from prime-root frequencies: bounds, L_bis and Gram rank."""
    bs = parse_betas(betas)
    ls = parse_floats(lams, "lams") if lams else None
    if ls is not None and len(ls) != len(bs):
        raise ValidationError(f"--lams: {len(ls)} weights for {len(bs)} betas")
    try:
        spec = ConeSpec.from_betas(bs, ls, alpha)
    except ValueError as exc:
        raise ValidationError(f"cone spec: {exc}") from None
    grid = make_grid(t_min, t_max, points)
    h = cone_element(spec)
    lo, hi = calculus.lipschitz_bounds(h, grid, seed=ctx.obj["seed"])
    _, bis = calculus.in_L_bis(h, grid)
    gens = [cone_element(ConeSpec(((1.0, a, b),))) for _, a, b in spec.triples]
    try:
        sv = gram_spectrum(gens, grid)
    except ValueError as exc:
        raise ValidationError(f"gram: {exc}") from None
    result = {
        "triples": spec.triples,
        "lower_bound": spec.lower_bound(),
        "lipschitz": {"lower_est": lo, "upper_est": hi},
        "lower_bound_respected": lo >= spec.lower_bound() - 1e-6,
        "in_L_bis": bis,
        "gram_singular_values": sv,
        "gram_rank": int(np.sum(sv > 1e-8)),
    }
    config = {"betas": bs, "alpha": alpha, "lams": ls, "grid": _grid_config(grid)}
    emit(ctx, "coneability", config, result, [[i, s] for i, s in enumerate(sv, 1)],
         ["index", "singular_value"])


@cli.command("kronecker")
@click.option("--betas", default="sqrt2,sqrt3", show_default=True)
@click.option("--K", "K", type=int, default=100000, show_default=True)
@click.option("--pattern", default=None, help="Signs such as '+,-'.")
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--K-max", "K_max", type=int, default=None, help="Pattern search bound (default --K).")
@click.option("--lattice", type=int, default=64, show_default=True)
@click.option("--dump-orbit", is_flag=True, help="Rows are orbit points instead of the search hit.")
@click.pass_context
def cmd_kronecker(ctx, betas, K, pattern, threshold, K_max, lattice, dump_orbit):
    """Orbit k beta mod 1: covering radius, discrepancy and sign patterns."""
    bs = parse_betas(betas)
    if K < 1:
        raise ValidationError("--K: must be >= 1")
    K_max = K if K_max is None else K_max
    orbit = kronecker_orbit(bs, K)
    result: dict = {"betas": bs, "K": K}
    if orbit.dim <= 3:
        result["covering_radius"] = covering_radius(orbit, lattice)
        result["discrepancy"] = discrepancy_estimate(orbit)
    rows: list[list] = []
    header = ["k"] + [f"sin_{i}" for i in range(1, len(bs) + 1)]
    if pattern is not None:
        signs = parse_pattern(pattern, len(bs))
        hit = find_sign_pattern(bs, signs, threshold, K_max)
        result["pattern"] = {"signs": signs, "threshold": threshold, "K_max": K_max,
                             "found": hit is not None,
                             "k": None if hit is None else hit.k,
                             "values": None if hit is None else list(hit.values)}
        if hit is not None:
            rows = [[hit.k, *hit.values]]
    if dump_orbit:
        header = ["k"] + [f"x_{i}" for i in range(1, len(bs) + 1)]
        rows = [[k, *p] for k, p in enumerate(orbit.points, 1)]
    config = {"betas": bs, "K": K, "pattern": pattern, "threshold": threshold,
              "K_max": K_max, "lattice": lattice, "dump_orbit": dump_orbit}
    verdict = None
    if pattern is not None and hit is None:
        verdict = INCONCLUSIVE
    emit(ctx, "kronecker-density", config, result, rows, header, strict_verdict=verdict)


@cli.command("blocks")
@click.option("--func", "func_src", required=True)
@click.option("--max-width", type=int, default=8, show_default=True)
@click.option("--count", type=int, default=16, show_default=True, help="Blocks per basis.")
@click.option("--samples", type=int, default=200, show_default=True)
@click.option("--complex-entries", is_flag=True)
@click.pass_context
def cmd_blocks(ctx, func_src, max_width, count, samples, complex_entries):
    """Lifted block combinations against the Kalton-Peck and Luxemburg functionals."""
    f = load_func(func_src, "func")
    if max_width < 1 or count < 1 or samples < 1:
        raise ValidationError("--max-width, --count and --samples must be >= 1")
    if not f.is_bilipschitz:
        raise ValidationError("--func: block equivalence needs declared bi-Lipschitz bounds")
    rng = np.random.default_rng(ctx.obj["seed"])
    cases = []
    for _ in range(samples):
        basis = random_basis(rng, count, max_width, complex_entries)
        m = int(rng.integers(1, count + 1))
        coef = rng.standard_normal(m) * np.exp(rng.uniform(-5, 5, m))
        if complex_entries:
            coef = coef + 1j * rng.standard_normal(m)
        cases.append((basis, SparseVec(np.arange(1, m + 1), coef)))

    def run(case):
        basis, t = case
        direct, formula = block_combination_norm(f, basis, t)
        kp = kp_functional(t)
        return direct / kp, luxemburg_norm(t) / kp, abs(direct - formula) / formula

    out = pmap(run, cases)
    ratios = [r[0] for r in out]
    lux = [r[1] for r in out]
    result = {
        "ratio_band": [min(ratios), max(ratios)],
        "luxemburg_band": [min(lux), max(lux)],
        "max_route_gap": max(r[2] for r in out),
    }
    config = {"func": to_dict(f), "max_width": max_width, "count": count,
              "samples": samples, "complex_entries": complex_entries}
    rows = [[i, a, b] for i, (a, b, _) in enumerate(out, 1)]
    emit(ctx, "block-sequences", config, result, rows, ["case", "norm_over_kp", "lux_over_kp"])


@cli.command("distinguish")
@click.option("--f", "f_src", required=True, help="phi")
@click.option("--g", "g_src", required=True, help="psi")
@click.option("--max-exp", type=int, default=30, show_default=True, help="Sweep n = 2^0..2^max_exp.")
@grid_options
@click.pass_context
def cmd_distinguish(ctx, f_src, g_src, max_exp, t_min, t_max, points):
    """Evidence that Z(phi) and Z(psi) are not isomorphic."""
    phi, psi = load_func(f_src, "f"), load_func(g_src, "g")
    if not 1 <= max_exp <= 60:
        raise ValidationError("--max-exp: must lie in 1..60")
    grid = make_grid(t_min, t_max, points)
    try:
        rep = incomparability_evidence(phi, psi, ClassConfig(grid=grid, lipschitz_seed=ctx.obj["seed"]),
                                       GrowthConfig(), max_exp)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    config = {"f": to_dict(phi), "g": to_dict(psi), "max_exp": max_exp, "grid": _grid_config(grid)}
    rows = [[k, 2**k, m] for k, m in rep.lambda_sigma.window_maxima]
    emit(ctx, "incomparability", config, rep.to_dict(), rows, ["k", "n", "growth"],
         strict_verdict=rep.lambda_sigma.verdict)


@cli.command("selfsim")
@click.option("--func", "func_src", required=True)
@click.option("--Nmax", "n_max", type=int, default=2**30, show_default=True, help="Largest block width (power of 2).")
@click.option("--Mmax", "m_max", type=int, default=2**30, show_default=True, help="Largest f_M length (power of 2).")
@click.option("--cap", type=float, default=10.0, show_default=True)
@grid_options
@click.pass_context
def cmd_selfsim(ctx, func_src, n_max, m_max, cap, t_min, t_max, points):
    """Uniform-block self-similarity defect and the Kalton-Peck detector."""
    f = load_func(func_src, "func")
    eN, eM = _exp_of(n_max, "Nmax"), _exp_of(m_max, "Mmax")
    grid = make_grid(t_min, t_max, points)
    dc = DetectorConfig(grid=grid, max_exp_N=eN, max_exp_M=eM, defect_cap=cap)
    rep = kalton_peck_detector(f, dc)
    config = {"func": to_dict(f), "Nmax": n_max, "Mmax": m_max, "cap": cap,
              "grid": _grid_config(grid)}
    rows = [[2**i, 2**j, rep.defect_matrix[i][j]] for i in range(eN + 1) for j in range(eM + 1)]
    verdict = INCONCLUSIVE if rep.verdict == DETECTOR_INCONCLUSIVE else None
    emit(ctx, "self-similarity", config, rep.to_dict(), rows, ["N", "M", "defect"],
         strict_verdict=verdict)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="twistlab", standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
