import numpy as np
import pytest
from click.testing import CliRunner

from stratwave.cli import main, parse_config

FAST_DECAY = ["--grid", "256", "--box-length", "40"]


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def config_echo(path):
    lines = (path / "config.txt").read_text().splitlines()
    return dict(line.split(" = ", 1) for line in lines if " = " in line)


def test_decay_fit_and_outputs(tmp_path):
    r = invoke("decay", *FAST_DECAY, "--times", "4 8 16 32 64 128", "--out", tmp_path)
    assert r.exit_code == 0, r.output
    slope = float(r.output.split("slope=")[1].split()[0])
    assert slope == pytest.approx(-0.5, abs=0.07)
    rows = (tmp_path / "decay.csv").read_text().splitlines()
    assert rows[0] == "t,sup,boundary_fraction,usable,in_fit" and len(rows) == 7


def test_decay_single_time_writes_curve_only(tmp_path):
    r = invoke("decay", *FAST_DECAY, "--times", "8", "--out", tmp_path)
    assert r.exit_code == 0 and "slope=none" in r.output
    assert len((tmp_path / "decay.csv").read_text().splitlines()) == 2


def test_decay_contamination_aborts(tmp_path):
    r = invoke("decay", *FAST_DECAY, "--times", "64 128 256", "--box-factor", "1", "--out", tmp_path)
    assert r.exit_code == 3


@pytest.mark.parametrize("args", [
    ["decay", "--k", "abc"],
    ["decay", "--times", "4 x"],
    ["decay", "--p", "2"],
    ["scan", "--target", "bogus"],
    ["check", "--suite", "nope"],
    ["solve", "--system", "sqg", "--dt", "0"],
    ["solve", "--system", "sqg", "--monitors", "energy"],
    ["--workers", "0", "decay"],
])
def test_bad_arguments_exit_2(args, tmp_path):
    out = [] if args[0] == "--workers" else ["--out", tmp_path]
    assert invoke(*args, *out).exit_code == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# decay settings\ngrid = 256\nbox-length = 40  # trailing comment\n"
                   "times = 64 128\nk = 1\n")
    out = tmp_path / "o"
    r = invoke("--config", cfg, "--workers", 2, "decay", "--k", 0, "--out", out)
    assert r.exit_code == 0, r.output
    echo = config_echo(out)
    assert echo["grid"] == "256" and echo["box_length"] == "40" and echo["times"] == "64 128"
    assert echo["k"] == "0" and echo["workers"] == "2"


def test_config_parser(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("T = 3\n--box-length=5\n")
    assert parse_config(cfg) == {"end_time": "3", "box_length": "5"}
    cfg.write_text("no equals sign\n")
    assert invoke("--config", cfg, "decay").exit_code == 2


def test_workers_environment_wins(tmp_path, monkeypatch):
    monkeypatch.setenv("STRATWAVE_WORKERS", "3")
    r = invoke("--workers", 1, "decay", *FAST_DECAY, "--times", "4", "--out", tmp_path)
    assert r.exit_code == 0 and config_echo(tmp_path)["workers"] == "3"


def test_scan_is_deterministic_across_workers(tmp_path):
    outs = []
    for w in (1, 4):
        out = tmp_path / f"w{w}"
        r = invoke("--workers", w, "scan", "--target", "null", "--shells", "unit",
                   "--samples", 2000, "--seed", 11, "--out", out)
        assert r.exit_code == 0, r.output
        outs.append((out / "scan.csv").read_bytes())
    assert outs[0] == outs[1]


def test_scan_empty_region_exits_5(tmp_path):
    r = invoke("scan", "--target", "null", "--shells", "k=0,0,5;p=0", "--samples", 100,
               "--out", tmp_path)
    assert r.exit_code == 5 and "empty-region" in r.output


def test_scan_case_passes(tmp_path):
    assert invoke("scan", "--target", "case", "--samples", 5000, "--out", tmp_path).exit_code == 0


def test_check_identities_and_forced_failure(tmp_path):
    assert invoke("check", "--suite", "identities", "--out", tmp_path).exit_code == 0
    assert (tmp_path / "check.csv").exists()
    assert invoke("check", "--suite", "identities", "--tolerance", 0, "--out", tmp_path).exit_code == 4


def test_solve_and_diff(tmp_path):
    common = ["--eps", 0.01, "--T", 0.2, "--dt", 0.01, "--grid", 32, "--box-length", 20]
    for name, system in (("a", "boussinesq-wr"), ("b", "boussinesq-z")):
        r = invoke("solve", "--system", system, *common, "--monitors", "l2,sobolev",
                   "--out", tmp_path / name)
        assert r.exit_code == 0, r.output
        assert {"trajectory.csv", "final.ckpt", "ledger.json", "config.txt"} <= \
            {p.name for p in (tmp_path / name).iterdir()}
    r = invoke("diff", tmp_path / "a" / "final.ckpt", tmp_path / "b" / "final.ckpt",
               "--tolerance", 1e-10)
    assert r.exit_code == 0
    assert float(r.output.split("=")[1].split()[0]) < 1e-10
    r = invoke("diff", tmp_path / "a" / "final.ckpt", tmp_path / "b" / "final.ckpt",
               "--tolerance", -1)
    assert r.exit_code == 4


def test_solve_blow_up_exits_3(tmp_path):
    with np.errstate(all="ignore"), pytest.warns(Warning):
        r = invoke("solve", "--system", "sqg", "--eps", 1e6, "--dt", 0.5, "--T", 20,
                   "--grid", 32, "--out", tmp_path)
    assert r.exit_code == 3
