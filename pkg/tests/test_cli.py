import json
import math
import subprocess
import sys
from pathlib import Path

import mpmath
import pytest
from click.testing import CliRunner

from twistlab import __version__
from twistlab.cli import cli, config_hash, parse_betas
from oracle_fixtures import KRONECKER_FIRST_K

DATA = Path(__file__).parent / "data"


def run(*args, env=None):
    return CliRunner().invoke(cli, [str(a) for a in args], env=env, catch_exceptions=False)


def artifact(*args):
    res = run(*args)
    assert res.exit_code == 0, res.output
    return json.loads(res.output)


def test_equiv_example():
    a = artifact("equiv", "--f", DATA / "linear1.json", "--g", DATA / "linear1_plus_sin.json")
    assert a["result"]["verdict"] == "Bounded"
    assert a["experiment"] == "equivalence" and a["version"] == __version__ and a["seed"] == 0
    assert a["config_hash"] == config_hash(a["config"])


def test_equiv_projective_inline():
    a = artifact("equiv", "--projective", "--f", '{"type": "linear", "c": 2}', "--g", DATA / "linear1.json")
    assert abs(a["result"]["a"][0] - 2) < 1e-4 and a["result"]["verdict"] == "Bounded"


def test_selfsim_example():
    a = artifact("selfsim", "--func", DATA / "linear5.json", "--Nmax", 64, "--Mmax", 64)
    r = a["result"]
    assert r["verdict"] == "KaltonPeckLike" and r["hyers_c"] == [5.0, 0.0]
    assert len(r["defect_matrix"]) == 7 and all(v == 0 for row in r["defect_matrix"] for v in row)


def test_kronecker_example():
    a = artifact("kronecker", "--betas", "sqrt2,sqrt3", "--K", 100000, "--pattern", "+,-", "--threshold", 0.5)
    pat = a["result"]["pattern"]
    assert pat["found"] and pat["k"] == KRONECKER_FIRST_K
    mpmath.mp.dps = 40
    for p, s, v in zip((2, 3), (1, -1), pat["values"]):
        beta = mpmath.sqrt(p) - mpmath.floor(mpmath.sqrt(p))
        exact = float(mpmath.sin(2 * mpmath.pi * pat["k"] * beta * mpmath.log(2)))
        assert s * v > 0.5 and v == pytest.approx(exact, abs=1e-12)
    assert a["result"]["covering_radius"] > 0


def test_kronecker_csv_row():
    res = run("--format", "csv", "kronecker", "--betas", "sqrt2,sqrt3", "--K", 1000, "--pattern", "+,-")
    lines = res.output.splitlines()
    assert lines[0].startswith("# config_hash=") and "k,sin_1,sin_2" in lines
    assert lines[-1].startswith(f"{KRONECKER_FIRST_K},")


def test_other_commands_run():
    assert artifact("eval", "--func", DATA / "sinlog_01_1.json", "--t", "0,1,2.5")["result"]["value"][1] == [1.0, 0.0]
    c = artifact("constants", "--func", DATA / "sinlog_sqrt2.json")["result"]
    assert c["classes"] == {"L_bi": True, "L_bis": True, "L_bid": True}
    cone = artifact("cone", "--betas", "sqrt2,sqrt3,sqrt5,sqrt7,sqrt11")["result"]
    assert cone["gram_rank"] == 5 and cone["lower_bound_respected"] and cone["in_L_bis"]
    b = artifact("blocks", "--func", DATA / "sinlog_01_1.json", "--samples", 50)["result"]
    assert b["max_route_gap"] < 1e-10 and 0 < b["ratio_band"][0] <= b["ratio_band"][1]
    d = artifact("distinguish", "--f", DATA / "sinlog_sqrt2.json", "--g", DATA / "sinlog_sqrt3.json")
    assert d["result"]["supported"] is True and d["experiment"] == "incomparability"


def test_plotdata_format():
    res = run("--format", "plotdata", "selfsim", "--func", DATA / "sinlog_01_1.json", "--Nmax", 4, "--Mmax", 4)
    lines = res.output.splitlines()
    assert "# N M defect" in lines
    rows = [l.split() for l in lines if not l.startswith("#")]
    assert len(rows) == 9 and all(len(r) == 3 for r in rows)


# -- errors and exit codes ---------------------------------------------------

def test_malformed_json_exit_2():
    res = run("equiv", "--f", '{"type": "sum"', "--g", DATA / "linear1.json")
    assert res.exit_code == 2 and "--f: $: invalid JSON" in res.output


def test_nested_descriptor_error_has_path():
    res = run("equiv", "--f", DATA / "bad_alpha.json", "--g", DATA / "linear1.json")
    assert res.exit_code == 2 and "$.children[1]" in res.output
    res = run("eval", "--func", DATA / "bad_nested.json", "--t", "1")
    assert res.exit_code == 2 and "$.beta" in res.output


@pytest.mark.parametrize("args", [
    ["kronecker", "--betas", "sqrt4"],
    ["kronecker", "--betas", "sqrt2,sqrt3", "--pattern", "+"],
    ["selfsim", "--func", str(DATA / "linear1.json"), "--Nmax", "63"],
    ["cone", "--betas", "0.5,0.5"],
    ["blocks", "--func", str(DATA / "linear1_plus_sin.json")],
    ["eval", "--func", "missing.json", "--t", "1"],
])
def test_validation_errors_exit_2(args):
    assert run(*args).exit_code == 2


def test_strict_inconclusive_exit_3():
    args = ["equiv", "--f", DATA / "linear1.json", "--g", DATA / "linear1.json", "--t-min", 1, "--t-max", 16]
    assert run(*args).exit_code == 0
    res = run("--strict", *args)
    assert res.exit_code == 3 and json.loads(res.output)["result"]["verdict"] == "Inconclusive"


def test_bad_thread_env_exit_2():
    res = run("blocks", "--func", DATA / "linear1.json", "--samples", 4, env={"TWISTLAB_THREADS": "zero"})
    assert res.exit_code == 2


def test_entry_point_exit_codes(tmp_path):
    ok = subprocess.run([sys.executable, "-m", "twistlab.cli", "--out", tmp_path / "a.json", "equiv",
                         "--f", DATA / "linear1.json", "--g", DATA / "linear1_plus_sin.json"],
                        capture_output=True, text=True)
    assert ok.returncode == 0 and json.loads((tmp_path / "a.json").read_text())["result"]["verdict"] == "Bounded"
    bad = subprocess.run([sys.executable, "-m", "twistlab.cli", "equiv", "--f", "{", "--g", DATA / "linear1.json"],
                         capture_output=True, text=True)
    assert bad.returncode == 2 and "invalid JSON" in bad.stderr


# -- determinism ---------------------------------------------------------------

DETERMINISM_CASES = [
    ["eval", "--func", DATA / "sinlog_01_1.json", "--t", "0,0.5,3"],
    ["constants", "--func", DATA / "sinlog_01_1.json", "--t-max", 2.0**20],
    ["equiv", "--f", DATA / "linear1.json", "--g", DATA / "sinlog_01_1.json"],
    ["cone", "--betas", "sqrt2,sqrt3"],
    ["kronecker", "--K", 5000, "--pattern", "+,-", "--dump-orbit"],
    ["blocks", "--func", DATA / "sinlog_01_1.json", "--samples", 40],
    ["distinguish", "--f", DATA / "sinlog_sqrt2.json", "--g", DATA / "sinlog_sqrt3.json", "--max-exp", 24],
    ["selfsim", "--func", DATA / "sinlog_01_1.json", "--Nmax", 1024, "--Mmax", 1024],
]


@pytest.mark.parametrize("fmt", ["json", "csv", "plotdata"])
@pytest.mark.parametrize("case", DETERMINISM_CASES, ids=lambda c: c[0])
def test_byte_identical_reruns(tmp_path, case, fmt):
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}.{fmt}"
        res = run("--format", fmt, "--seed", 5, "--out", path, *case)
        assert res.exit_code == 0, res.output
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_threads_do_not_change_output(tmp_path):
    args = ["blocks", "--func", DATA / "sinlog_01_1.json", "--samples", 60]
    one = run("--seed", 3, *args, env={"TWISTLAB_THREADS": "1"}).output
    four = run("--seed", 3, *args, env={"TWISTLAB_THREADS": "4"}).output
    assert one == four


def test_seed_changes_hash_and_output():
    args = ["blocks", "--func", DATA / "sinlog_01_1.json", "--samples", 20]
    a, b = artifact("--seed", 1, *args), artifact("--seed", 2, *args)
    assert a["config_hash"] != b["config_hash"] and a["result"] != b["result"]


def test_parse_betas_shorthand():
    assert parse_betas("sqrt2, 0.25") == [math.sqrt(2) - 1, 0.25]
