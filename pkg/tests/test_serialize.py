"""Artifact formats: CSV round-trips and JSON manifests."""

import json

import numpy as np
import pytest

from adjpod import (CoefficientSet, TimeGrid, add_noise, assemble_operators,
                    build_adjoint_pod, build_grid, build_reduced_model,
                    make_shape, read_field_csv, read_json, read_matrix_csv,
                    read_measurements_csv, write_field_csv, write_json,
                    write_matrix_csv, write_measurements_csv, write_pod_basis,
                    write_reduced_model)


@pytest.fixture(scope="module")
def grid():
    return build_grid(11, 9)


def test_field_round_trip_is_bit_exact(tmp_path, grid, rng):
    values = rng.standard_normal(grid.n_nodes)
    values[3] = 1.0 / 3.0
    values[4] = 1e-300
    path = tmp_path / "field.csv"
    write_field_csv(path, grid, values)
    grid_back, values_back = read_field_csv(path)
    assert (grid_back.nx, grid_back.ny) == (grid.nx, grid.ny)
    np.testing.assert_array_equal(values_back, values)


def test_field_rejects_wrong_length(tmp_path, grid):
    with pytest.raises(ValueError):
        write_field_csv(tmp_path / "bad.csv", grid, np.zeros(grid.n_nodes - 1))


def test_field_header_validation(tmp_path):
    path = tmp_path / "nohead.csv"
    path.write_text("1,2,3\n4,5,6\n")
    with pytest.raises(ValueError, match="nx,ny,h"):
        read_field_csv(path)
    path = tmp_path / "badh.csv"
    path.write_text("nx,ny,h\n3,3,0.5\n0,0,0\n0,0,0\n0,0,0\n")
    with pytest.raises(ValueError, match="spacing"):
        read_field_csv(path)
    path = tmp_path / "short.csv"
    grid = build_grid(3, 3)
    write_field_csv(path, grid, np.zeros(9))
    text = path.read_text().splitlines()
    path.write_text("\n".join(text[:-1]) + "\n")
    with pytest.raises(ValueError, match="rows"):
        read_field_csv(path)


def test_matrix_round_trip(tmp_path, rng):
    mat = rng.standard_normal((4, 7))
    path = tmp_path / "mat.csv"
    write_matrix_csv(path, mat)
    np.testing.assert_array_equal(read_matrix_csv(path), mat)
    write_matrix_csv(path, np.array([1.5, 2.5]))
    assert read_matrix_csv(path).shape == (1, 2)


def test_json_handles_numpy_scalars_and_arrays(tmp_path):
    payload = {
        "count": np.int64(7),
        "value": np.float64(0.125),
        "vector": np.arange(3.0),
        "nested": {"flag": True, "items": (np.float32(1.0), 2)},
    }
    path = tmp_path / "report.json"
    write_json(path, payload)
    back = read_json(path)
    assert back["count"] == 7
    assert back["value"] == 0.125
    assert back["vector"] == [0.0, 1.0, 2.0]
    assert back["nested"]["items"] == [1.0, 2]
    text = path.read_text()
    assert text.endswith("\n")
    keys = list(json.loads(text).keys())
    assert keys == sorted(keys)


def test_measurements_round_trip(tmp_path, grid, rng):
    det = grid.coords[grid.interior][:10]
    ms = add_noise(det, rng.standard_normal(10), p=0.0)
    path = tmp_path / "meas.csv"
    write_measurements_csv(path, ms)
    det_back, readings_back = read_measurements_csv(path)
    np.testing.assert_array_equal(det_back, det)
    np.testing.assert_array_equal(readings_back, ms.readings)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="x,y,reading"):
        read_measurements_csv(bad)


def test_pod_basis_directory_layout(tmp_path, grid):
    ops = assemble_operators(grid, CoefficientSet(q=1.0, c=0.0))
    m = make_shape("sin1", grid)
    basis = build_adjoint_pod("source", m, ops, TimeGrid(T=0.3, M=8),
                              n_modes=3)
    out = tmp_path / "basis"
    write_pod_basis(out, basis)
    manifest = read_json(out / "manifest.json")
    assert manifest["n_pod"] == 3
    assert manifest["provenance"]["inverse_crime"] is False
    assert len(manifest["eigenvalues"]) == basis.eigenvalues.size
    for k in range(3):
        grid_back, mode = read_field_csv(out / f"mode_{k:03d}.csv")
        np.testing.assert_array_equal(mode, basis.psi[:, k])


def test_reduced_model_directory_layout(tmp_path, grid):
    ops = assemble_operators(grid, CoefficientSet(q=1.0, c=0.0))
    m = make_shape("sin1", grid)
    tg = TimeGrid(T=0.3, M=8)
    basis = build_adjoint_pod("backward", m, ops, tg, n_modes=3)
    model = build_reduced_model(ops, basis, tg, "backward")
    out = tmp_path / "model"
    write_reduced_model(out, model)
    manifest = read_json(out / "manifest.json")
    assert manifest["kind"] == "backward"
    assert manifest["n_pod"] == 3
    assert manifest["M"] == 8
    assert manifest["dt"] == pytest.approx(0.3 / 8)
    a_r = read_matrix_csv(out / "reduced_stiffness.csv")
    np.testing.assert_array_equal(a_r, model.a_r)
    S = read_matrix_csv(out / "solution_operator.csv")
    assert S.shape == (3, 3)
