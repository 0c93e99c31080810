"""Command line: subcommands, config precedence and exit codes."""
import json

import pytest

from fptlie.config import settings
from fptlie.main import build_parser, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_density_writes_csv_and_sidecar(capsys, out_dir):
    target = out_dir / "coth.csv"
    code, result = run_cli(capsys, "density", "--process", "coth:1", "--boundary", "affine:2,0.3",
                           "--x0", "1", "--t", "0.1:2:20", "--output", str(target))
    assert code == 0
    assert result["passed"] is True
    lines = target.read_text().splitlines()
    assert lines[0] == "t,rho"
    assert len(lines) == 21
    meta = json.loads((out_dir / "coth.csv.meta.json").read_text())
    assert meta["config"]["process"] == "coth:1"
    assert meta["environment"] == "test"


def test_verify_symmetry_identity_parameters_pass(capsys, out_dir):
    code, result = run_cli(capsys, "verify-symmetry", "--family", "F1", "--variant", "1",
                           "--alpha", "1", "--beta", "0", "--output", str(out_dir / "v.json"))
    assert code == 0
    assert result["passed"] is True
    assert result["report"]["max_abs_residual"] <= 1e-4


def test_perturbed_map_fails_the_check(capsys, out_dir):
    code, result = run_cli(capsys, "verify-symmetry", "--family", "F1", "--variant", "1",
                           "--alpha", "1.2", "--beta", "0.3", "--perturb", "0.5",
                           "--output", str(out_dir / "v.json"))
    assert code == 3
    assert result["passed"] is False


def test_unknown_process_is_a_validation_failure(capsys, out_dir):
    code, result = run_cli(capsys, "density", "--process", "heston:1", "--boundary", "const:1",
                           "--x0", "0", "--output", str(out_dir / "x.csv"))
    assert code == 2
    assert result is None


def test_missing_arguments_exit_with_validation_code(capsys):
    code, _ = run_cli(capsys, "density", "--process", "coth:1")
    assert code == 2


def test_bad_boundary_spec(capsys):
    code, _ = run_cli(capsys, "density", "--process", "coth:1", "--boundary", "const:abc", "--x0", "1")
    assert code == 2


def test_unknown_reproduce_parameter(capsys, out_dir):
    config = out_dir / "run.json"
    config.write_text(json.dumps({"target_params": {"zeta": 1.0}}))
    code, _ = run_cli(capsys, "reproduce", "bachelier-levy", "--config", str(config))
    assert code == 2


def test_cli_flags_override_config_file(capsys, out_dir):
    config = out_dir / "run.json"
    config.write_text(json.dumps({"process": "coth:1", "boundary": "affine:2,0.3", "x0": 1.5,
                                  "t_grid": "0.1:2:10"}))
    target = out_dir / "rho.csv"
    code, _ = run_cli(capsys, "density", "--config", str(config), "--x0", "1", "--output", str(target))
    assert code == 0
    meta = json.loads((out_dir / "rho.csv.meta.json").read_text())
    assert meta["config"]["x0"] == 1.0
    assert meta["config"]["t_grid"]["n"] == 10


def test_config_file_must_be_json_object(capsys, out_dir):
    config = out_dir / "run.json"
    config.write_text("[1, 2]")
    code, _ = run_cli(capsys, "density", "--config", str(config))
    assert code == 2


def test_mc_flags_reach_the_mc_block():
    args = build_parser().parse_args(["simulate", "--n-paths", "10", "--no-bridge", "--seed", "3"])
    assert args.n_paths == 10
    assert args.bridge_correction is False
    assert args.seed == 3


@pytest.mark.slow
def test_reproduce_bachelier_levy(capsys, out_dir):
    code, result = run_cli(capsys, "reproduce", "bachelier-levy", "--n-paths", "20000", "--seed", "11",
                           "--output", str(out_dir / "bl.csv"))
    assert code == 0
    assert result["passed"] is True
    assert all(v <= 1e-8 for v in result["routes"].values())
    assert (out_dir / "bl.csv").exists()


def test_transfer_through_time_shift(capsys, out_dir):
    code, result = run_cli(capsys, "transfer", "--process", "coth:1", "--boundary", "const:2", "--x0", "1",
                           "--index", "5", "--eps", "0.1", "--t", "0.2:2:20", "--output", str(out_dir / "tr.csv"))
    assert code == 0
    assert result["total_mass"] > 0
    assert (out_dir / "tr.csv.meta.json").exists()


def test_transfer_needs_exactly_one_map(capsys, out_dir):
    code, _ = run_cli(capsys, "transfer", "--process", "coth:1", "--boundary", "const:2", "--x0", "1",
                      "--index", "5", "--eps", "0.1", "--variant", "1", "--output", str(out_dir / "tr.csv"))
    assert code == 2


def test_simulate_writes_samples(capsys, out_dir):
    code, result = run_cli(capsys, "simulate", "--process", "bm", "--boundary", "const:1", "--x0", "0",
                           "--t", "0.05:1:20", "--n-paths", "4000", "--seed", "5", "--output", str(out_dir / "s.csv"))
    assert code == 0
    assert result["n_crossed"] + result["n_censored"] + result["n_domain_exit"] == 4000
    assert (out_dir / "s_kde.csv").exists()


@pytest.mark.slow
def test_laplace_check_ou(capsys, out_dir):
    code, result = run_cli(capsys, "laplace-check", "--process", "ou:1", "--boundary", "const:1", "--x0", "0",
                           "--lams", "0.5,1", "--horizon", "5", "--n-paths", "20000", "--dt", "0.002",
                           "--output", str(out_dir / "lap.csv"))
    assert code == 0
    assert [row["lam"] for row in result["rows"]] == [0.5, 1.0]


def test_bad_process_in_config_file_is_a_validation_failure(capsys, out_dir):
    config = out_dir / "run.json"
    config.write_text(json.dumps({"process": {"family": "F1", "A": 1.0}, "boundary": "const:1", "x0": 0}))
    code, result = run_cli(capsys, "density", "--config", str(config), "--output", str(out_dir / "x.csv"))
    assert code == 2
    assert result is None


def test_unconverged_series_is_a_numerical_failure(capsys, out_dir, monkeypatch):
    monkeypatch.setattr(settings, "series_max_terms", 80)
    code, result = run_cli(capsys, "density", "--process", "ou:1", "--boundary", "const:1", "--x0", "0",
                           "--t", "0.05:1:5", "--output", str(out_dir / "ou.csv"))
    assert code == 3
    assert result is None
    assert not (out_dir / "ou.csv").exists()


@pytest.mark.slow
def test_reproduce_csvs_do_not_depend_on_worker_count(capsys, out_dir):
    outputs = {}
    for workers in (1, 4, 8):
        target = out_dir / f"w{workers}" / "coth.csv"
        target.parent.mkdir()
        code, result = run_cli(capsys, "reproduce", "coth", "--n-paths", "4000", "--block-size", "512",
                               "--seed", "7", "--workers", str(workers), "--output", str(target))
        assert result is not None
        outputs[workers] = {p.name: p.read_bytes() for p in sorted(target.parent.glob("*.csv"))}
    assert outputs[1]
    assert outputs[4] == outputs[1]
    assert outputs[8] == outputs[1]


@pytest.mark.slow
def test_reproduce_radial_ou_checks_cir_in_lamperti_coordinates(capsys, out_dir):
    code, result = run_cli(capsys, "reproduce", "radial-ou", "--n-paths", "20000", "--dt", "0.002",
                           "--seed", "3", "--lams", "0.5,1", "--output", str(out_dir / "rou.csv"))
    assert result is not None
    cir = result["cir_to_radial_ou"]
    assert (cir["omega"], cir["gamma"]) == (1.0, 0.5)
    assert cir["x0"] == pytest.approx(2.0) and cir["level"] == pytest.approx(1.5)
    assert result["routes"]["cir_lamperti_coordinate"] <= 1e-6
    rows = result["transforms"]["cir_laplace"]
    assert [row["lam"] for row in rows] == [0.5, 1.0]
    assert all(0 < row["closed_form"] < 1 for row in rows)
    assert (out_dir / "rou_cir_laplace.csv").exists()
