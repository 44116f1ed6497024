import json

import numpy as np
import pytest

from heatsense.cli import main
from heatsense.rbffd import load_operator
from heatsense.system import load_placement


def test_unknown_flag_exits_2(capsys):
    assert main(["optimize", "--bogus"]) == 2


def test_unknown_command_exits_2():
    assert main(["transmogrify"]) == 2


def test_optimize_writes_placement(tmp_path, capsys):
    out = tmp_path / "p.json"
    code = main(
        [
            "optimize", "--case", "heat1d", "--n", "60", "--m", "9",
            "--method", "us", "--k", "5", "--out", str(out),
        ]
    )
    assert code == 0
    placement, meta = load_placement(out)
    assert placement.k == 5 and placement.n == 60
    assert "log10_kappa" in capsys.readouterr().out

    # deterministic GA through the CLI
    out2 = tmp_path / "p2.json"
    args = [
        "optimize", "--case", "heat1d", "--n", "60", "--m", "9",
        "--method", "pspo", "--k", "4", "--seed", "7",
        "--population", "4", "--generations", "5", "--out", str(out2),
    ]
    assert main(args) == 0
    first, _ = load_placement(out2)
    assert main(args) == 0
    second, _ = load_placement(out2)
    assert first == second


def test_discretize_and_verify_bounds_roundtrip(tmp_path, capsys):
    opdir = tmp_path / "op"
    assert main(["discretize", "--case", "heat1d", "--n", "60", "--m", "9", "--out", str(opdir)]) == 0
    assert (opdir / "cloud.csv").exists()
    assert (opdir / "w1_triplets.csv").exists()
    op = load_operator(opdir)
    assert op.n == 60

    report_path = tmp_path / "bounds.json"
    code = main(
        [
            "verify-bounds", "--case", "heat1d", "--operator", str(opdir),
            "--k", "6", "--trials", "200", "--scale", "1e-3",
            "--seed", "1", "--out", str(report_path),
        ]
    )
    assert code == 0
    payload = json.loads(report_path.read_text())
    assert payload["violations"] == 0
    assert payload["trials"] == 200
    assert payload["kappa"] > 1.0


def test_reconstruct_single_placement(tmp_path, capsys):
    pfile = tmp_path / "p.json"
    main(
        [
            "optimize", "--case", "heat1d", "--n", "60", "--m", "9",
            "--method", "us", "--k", "6", "--out", str(pfile),
        ]
    )
    capsys.readouterr()
    code = main(
        [
            "reconstruct", "--case", "heat1d", "--n", "60", "--m", "9",
            "--placement", str(pfile), "--sigma", "0.0",
            "--reconstructor", "physics",
        ]
    )
    assert code == 0
    result = json.loads(capsys.readouterr().out)
    assert result["physics"]["mse"] < 1e-10


def test_benchmark_from_config(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        """
[case]
name = heat1d
n = 80
m = 9

[method]
names = us,rs
ks = 4
rs_count = 2
ga_population = 4
ga_generations = 2

[noise]
sigmas = 0.1
eval_seeds = 2

[reconstructors]
names = physics
n_train = 10
n_test = 3

[output]
dir = {out}
""".format(out=tmp_path / "results")
    )
    assert main(["benchmark", "--config", str(cfg)]) == 0
    assert (tmp_path / "results" / "report.csv").exists()


def test_benchmark_bad_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("[case]\nname = heat9d\n")
    assert main(["benchmark", "--config", str(cfg)]) == 2
