"""CSV artifacts, metadata sidecars and the configuration digest."""
import json

import numpy as np
import pytest

from fptlie import __version__
from fptlie.errors import ConfigError, NegativeDensityError, NumericalFailure
from fptlie.models import Boundary, DensityCurve, Direction
from fptlie.services import export
from fptlie.services.mc import simulate_fpt


def test_density_csv_format(out_dir):
    curve = DensityCurve(t_grid=[0.1, 0.2], rho=[1.0 / 3.0, 0.25], x0=0.0, boundary=Boundary.constant(1.0))
    path = export.write_density_csv(curve, out_dir / "rho.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "t,rho"
    assert lines[1] == "0.10000000000000001,0.33333333333333331"
    assert float(lines[2].split(",")[1]) == 0.25


def test_density_curve_rejects_negative_values():
    with pytest.raises(NegativeDensityError):
        DensityCurve(t_grid=[0.1, 0.2, 0.3], rho=[0.5, -0.01, 0.4], x0=0.0, boundary=Boundary.constant(1.0))


def test_density_curve_keeps_rounding_noise():
    curve = DensityCurve(t_grid=[0.1, 0.2], rho=[0.5, -1e-15], x0=0.0, boundary=Boundary.constant(1.0))
    assert curve.rho[1] < 0


def test_density_curve_rejects_excess_mass_and_nan():
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(NumericalFailure):
        DensityCurve(t_grid=t, rho=np.full_like(t, 1.01), x0=0.0, boundary=Boundary.constant(1.0))
    with pytest.raises(NumericalFailure):
        DensityCurve(t_grid=[0.1, 0.2], rho=[0.5, np.nan], x0=0.0, boundary=Boundary.constant(1.0))


def test_columns_must_have_equal_length(out_dir):
    with pytest.raises(ConfigError):
        export.write_columns(out_dir / "bad.csv", ["a", "b"], [np.zeros(2), np.zeros(3)])


def test_samples_csv_keeps_times_and_header(bm_config, out_dir):
    samples = simulate_fpt(bm_config(n_paths=2000), Boundary.constant(1.0))
    path = export.write_samples_csv(samples, out_dir / "samples.csv")
    loaded = export.read_samples_csv(path)
    np.testing.assert_array_equal(loaded["crossing_times"], samples.crossing_times)
    assert int(loaded["n_paths"]) == 2000
    assert int(loaded["n_censored"]) == samples.n_censored
    assert loaded["direction"] == Direction.UP.value
    assert loaded["config_digest"] == samples.config_digest
    assert json.loads(loaded["boundary"]) == {"kind": "constant", "params": [1.0]}


def test_meta_sidecar(out_dir):
    target = out_dir / "rho.csv"
    config = {"command": "density", "x0": 0.5}
    meta_path = export.write_meta(target, config, {"note": "x"})
    assert meta_path.name == "rho.csv.meta.json"
    text = meta_path.read_text()
    payload = json.loads(text)
    assert payload["config"] == config
    assert payload["config_digest"] == export.config_digest(config)
    assert payload["environment"] == "test"
    assert payload["version"] == __version__
    assert payload["note"] == "x"
    assert list(payload) == sorted(payload)
    assert text.endswith("\n")


def test_config_digest_ignores_key_order():
    first = export.config_digest({"a": 1, "b": [1.0, 2.0], "c": {"x": 1, "y": 2}})
    second = export.config_digest({"c": {"y": 2, "x": 1}, "b": [1.0, 2.0], "a": 1})
    assert first == second
    assert len(first) == 64
    assert first != export.config_digest({"a": 2, "b": [1.0, 2.0], "c": {"x": 1, "y": 2}})


def test_json_handles_numpy_and_infinities():
    text = export.pretty_json({"arr": np.array([1.0, 2.0]), "n": np.int64(3), "inf": float("inf"), "dir": Direction.UP})
    payload = json.loads(text)
    assert payload == {"arr": [1.0, 2.0], "dir": "up", "inf": "inf", "n": 3}


def test_bare_output_names_land_in_output_dir():
    path = export.resolve_output(None, "density.csv")
    assert path.is_absolute() or path.parent == export.OUTPUT_DIR
    assert path.name == "density.csv"
    assert path.parent.exists()
