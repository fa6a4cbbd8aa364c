import csv
import io
import json
import math

import numpy as np
import pytest

import radvote


def rot_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def test_scheme_values():
    p, k = [0.0, 0.0, 0.0], [3.0, 4.0, 0.0]
    assert radvote.scheme_value(radvote.Scheme.RADIAL, p, k) == [5.0]
    assert radvote.scheme_value(radvote.Scheme.OFFSET, p, k) == [-3.0, -4.0, 0.0]
    assert radvote.scheme_value(radvote.Scheme.VECTOR, p, k) == pytest.approx([-0.6, -0.8, 0.0])
    assert len(radvote.scheme_value(radvote.Scheme.POLAR, p, k)) == 2


def test_backproject():
    assert list(radvote.backproject(520, 240, 500.0, 200, 250, 320, 240)) == [500.0, 0.0, 500.0]
    with pytest.raises(ArithmeticError):
        radvote.backproject(0, 0, 0.0, 200, 250, 320, 240)


def test_horn_round_trip():
    rng = np.random.default_rng(1)
    src = rng.uniform(-50, 50, size=(10, 3))
    r, t = rot_z(0.7), np.array([1.0, -2.0, 30.0])
    dst = src @ r.T + t
    r_est, t_est = radvote.horn_solve(src, dst)
    assert np.allclose(r_est, r, atol=1e-9)
    assert np.allclose(t_est, t, atol=1e-9)
    with pytest.raises(ValueError):
        radvote.horn_solve(src, dst[:5])


def test_keypoint_selection():
    cube = np.array([[x, y, z] for x in (-1.0, 1.0) for y in (-1.0, 1.0) for z in (-1.0, 1.0)])
    assert radvote.fps_keypoints(cube, 2).shape == (2, 3)
    corners = radvote.bbox_keypoints(cube, 2.0)
    assert corners.shape == (8, 3)
    assert np.abs(corners).max() == 2.0


def brute_shell(origin, rho, dims, centre, radius):
    c = (np.asarray(centre) - origin) / rho
    r = radius / rho
    out = []
    for k in range(dims[2]):
        for j in range(dims[1]):
            for i in range(dims[0]):
                d2 = (i + 0.5 - c[0]) ** 2 + (j + 0.5 - c[1]) ** 2 + (k + 0.5 - c[2]) ** 2
                if max(0.0, r - 0.5) ** 2 <= d2 < (r + 0.5) ** 2:
                    out.append(i + dims[0] * (j + dims[1] * k))
    return out


def test_sphere_and_ray_rasterizers():
    origin, rho, dims = np.array([-3.0, 1.0, 2.0]), 2.0, [12, 11, 10]
    centre, radius = [9.1, 12.3, 11.7], 6.4
    got = radvote.sphere_voxels(origin, rho, dims, centre, radius)
    assert sorted(got) == brute_shell(origin, rho, dims, centre, radius)
    cover = radvote.sphere_voxels(origin, rho, dims, centre, radius, radvote.SphereRule.SUPERCOVER)
    assert set(got) <= set(cover)
    ray = radvote.ray_voxels(np.zeros(3), 1.0, [5, 5, 5], [0.5, 0.5, 0.5], [1.0, 0.0, 0.0])
    assert ray == [0, 1, 2, 3, 4]


def test_metrics():
    model = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    eye, zero = np.eye(3), np.zeros(3)
    assert radvote.add_metric(model, eye, zero, eye, np.array([0.0, 3.0, 4.0])) == 5.0
    assert radvote.add_metric(model, eye, zero, rot_z(math.pi), zero) == pytest.approx(2.0)
    assert radvote.adds_metric(model, eye, zero, rot_z(math.pi), zero) == pytest.approx(0.0, abs=1e-12)
    assert radvote.auc_metric([25.0, 75.0], 100.0) == 0.5
    assert radvote.accuracy_at_threshold([0.0, 9.999, 10.0, 10.001], 100.0) == 0.5


def test_selftest_and_mutation():
    assert all(passed for _, passed, _ in radvote.selftest(instances=5))
    assert not all(passed for _, passed, _ in radvote.selftest(annulus_half_width=0.45, instances=5))


def test_run_experiment_csv():
    config = {
        "kind": "dispersion_sweep",
        "objects": ["ape"],
        "scales": [1, 3],
        "trials": 5,
        "model_spacing": 3,
        "seed": 9,
    }
    out = radvote.run_experiment(json.dumps(config))
    rows = list(csv.DictReader(io.StringIO(out["summary"])))
    assert out["summary"].splitlines()[0] == radvote.CSV_HEADER
    assert [float(r["scale"]) for r in rows] == [1.0, 3.0]
    assert out == radvote.run_experiment(json.dumps(config))
    with pytest.raises(ValueError):
        radvote.run_experiment('{"frames": 0}')


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        radvote.load_ply(str(tmp_path / "absent.ply"), 1.0)
