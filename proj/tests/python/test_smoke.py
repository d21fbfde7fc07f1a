import json
import math
import os
import subprocess

import jsonschema
import numpy as np
import pytest

import fracito

SCHEMA_PATH = os.environ.get("FRACITO_SCHEMA_PATH")
CLI_PATH = os.environ.get("FRACITO_CLI_PATH")


@pytest.fixture(scope="module")
def schema():
    if not SCHEMA_PATH:
        pytest.skip("FRACITO_SCHEMA_PATH not set")
    with open(SCHEMA_PATH) as f:
        return json.load(f)


def test_covariance_oracle():
    assert fracito.covariance(0.4, 0.9, 0.7) == pytest.approx(0.38059357979861186, rel=1e-14)
    assert fracito.indicator_inner_product(0, 0.4, 0, 0.9, 0.7) == pytest.approx(
        fracito.covariance(0.4, 0.9, 0.7), rel=1e-12)


def test_sample_paths_shape_and_seed():
    a = fracito.sample_paths(64, 10, 0.7, seed=3)
    b = fracito.sample_paths(64, 10, 0.7, seed=3, workers=2)
    assert a.shape == (10, 65)
    assert np.all(a[:, 0] == 0.0)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, fracito.sample_paths(64, 10, 0.7, seed=4))


def test_wis_sum_of_gamma_tracks_closed_form():
    paths = fracito.sample_paths(2048, 50, 0.7, seed=5)
    gaps = [fracito.wis_sum("identity", p, 0.7) - 0.5 * (p[-1] ** 2 - 1.0) for p in paths]
    assert math.sqrt(np.mean(np.square(gaps))) < 0.05


def test_bad_input_raises():
    with pytest.raises(ValueError):
        fracito.wis_sum("sine", np.zeros(5), 0.7)
    with pytest.raises(ValueError):
        fracito.run("theorem20", hurst=0.7)
    with pytest.raises(ValueError):
        fracito.run("prop54", hurts=0.7)


def test_catalog():
    ids = {e["id"] for e in fracito.list_experiments()}
    assert {"covariance_check", "prop54", "theorem50", "picard", "kernel_variance"} <= ids
    assert "identity" in fracito.functional_ids()


def test_run_report_validates(schema):
    report = fracito.run("wis_mean", grid=[64], paths=200, seed=2)
    jsonschema.validate(report, schema)
    assert report["passed"] is True
    assert all(row["experiment"] == "wis_mean" for row in report["rows"])
    csv = fracito.to_csv(json.dumps(report)).splitlines()
    assert csv[0] == "experiment,n,M,H,statistic,value,se,threshold,verdict"
    assert len(csv) == len(report["rows"]) + 1


def test_failing_report_validates(schema):
    report = fracito.run("kernel_variance", grid=[64])
    jsonschema.validate(report, schema)
    assert report["passed"] is False


def test_cli_output_validates(schema, tmp_path):
    if not CLI_PATH:
        pytest.skip("FRACITO_CLI_PATH not set")
    env = dict(os.environ, FRACITO_OUT_DIR=str(tmp_path))
    proc = subprocess.run([CLI_PATH, "--experiment", "theorem32", "--grid", "64,128", "--paths", "100",
                           "--quiet"], env=env)
    assert proc.returncode == 0
    with open(tmp_path / "theorem32.json") as f:
        jsonschema.validate(json.load(f), schema)
