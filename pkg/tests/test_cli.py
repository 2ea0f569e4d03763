import json
import subprocess
import sys

import numpy as np
import pytest

from youngflow.cli import EXIT_FAILURE, EXIT_INPUT, EXIT_RANGE, run
from youngflow.errors import InputError
from youngflow.io import OutputBatch, read_path_csv, to_json_text, write_path
from youngflow.paths import gen_fbm, gen_smooth
from youngflow.young import ito_residual


def summary(capsys):
    return json.loads(capsys.readouterr().out)


def test_csv_roundtrip_is_bit_exact(tmp_path):
    p = gen_fbm(0.75, 257, seed=11, dim=2)
    write_path(tmp_path / "z.csv", p)
    q = read_path_csv(tmp_path / "z.csv")
    assert np.array_equal(p.values, q.values) and np.array_equal(p.times, q.times)
    assert q.alpha == p.alpha
    side = json.loads((tmp_path / "z.json").read_text())
    assert side["seed"] == 11 and side["generator"] == "fbm" and side["schema_version"] == 1


def test_missing_sidecar_estimates_alpha(tmp_path):
    write_path(tmp_path / "z.csv", gen_fbm(0.75, 4097, seed=1))
    (tmp_path / "z.json").unlink()
    q = read_path_csv(tmp_path / "z.csv")
    assert q.meta["alpha_source"] == "estimated"
    assert 0.6 < q.alpha < 0.9


@pytest.mark.parametrize("text", ["", "t,z_1\n0,1\n", "x,z\n0,1\n1,2\n", "t,z_1\n0,1\n1\n", "t,z_1\n0,1\n0,2\n",
                                  "t,z_1\n0,1\n1,nan\n"])
def test_malformed_csv(tmp_path, text):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(InputError):
        read_path_csv(f)


def test_json_is_deterministic():
    a = to_json_text({"b": np.float64(1.5), "a": np.arange(3), "c": np.inf})
    assert a == to_json_text({"c": float("inf"), "a": [0, 1, 2], "b": 1.5})
    assert json.loads(a)["schema_version"] == 1


def test_output_batch_all_or_nothing(tmp_path):
    batch = OutputBatch()
    batch.add(tmp_path / "one.txt", "1")
    batch.add(tmp_path / "missing_dir_is_file" / "two.txt", "2")
    (tmp_path / "missing_dir_is_file").write_text("blocker")
    with pytest.raises(OSError):
        batch.commit()
    assert not (tmp_path / "one.txt").exists()
    assert [p.name for p in tmp_path.iterdir()] == ["missing_dir_is_file"]


def test_pathgen_integrate_pipeline_reproduces_ito_residual(tmp_path, capsys):
    z = tmp_path / "z.csv"
    assert run(["path-gen", "--kind", "fbm", "--hurst", "0.75", "--n", "1025", "--seed", "42", "--out", str(z)]) == 0
    capsys.readouterr()
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"mode": "gradient", "F": "square"}))
    assert run(["integrate", "--driver", str(z), "--integrand", str(spec), "--out", str(tmp_path / "i.csv")]) == 0
    out = summary(capsys)
    Z = gen_fbm(0.75, 1025, seed=42)
    ref = ito_residual(lambda x: x**2, lambda x: (2 * x)[:, :, None], Z)
    assert out["ito_residual"] == pytest.approx(ref, rel=1e-12)
    I = read_path_csv(tmp_path / "i.csv")
    assert I.values[-1, 0] == pytest.approx(out["terminal"][0])


def test_integrate_affine_gradient(tmp_path, capsys):
    z = tmp_path / "z.csv"
    write_path(z, gen_fbm(0.75, 513, seed=1))
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"mode": "gradient", "F": "affine", "a": 3.0, "b": 1.0}))
    assert run(["integrate", "--driver", str(z), "--integrand", str(spec), "--out", str(tmp_path / "i.csv")]) == 0
    assert summary(capsys)["ito_residual"] < 1e-12


def test_decompose_linear_rotation_explosion(tmp_path, capsys):
    z = tmp_path / "lin.csv"
    write_path(z, gen_smooth("linear", 2001, T=2.0, slope=1.0))
    a = tmp_path / "a.json"
    a.write_text("[[0, -1], [1, 0]]")
    out = tmp_path / "d.csv"
    assert run(["decompose-linear", "--A", str(a), "--k", "1", "--driver", str(z), "--out", str(out)]) == 0
    s = summary(capsys)
    assert abs(s["explosion"]["time"] - np.pi / 2) < 1e-3
    rows = np.loadtxt(out, delimiter=",", skiprows=1)
    assert rows.shape == (s["nodes"], 5)
    assert np.allclose(rows[:, 1], 1 / np.cos(rows[:, 0]), rtol=1e-10)
    assert run(["decompose-linear", "--A", str(a), "--k", "1", "--driver", str(z), "--method", "yde",
                "--out", str(tmp_path / "y.csv")]) == 0
    assert summary(capsys)["explosion_index"] is not None


def test_rerun_is_byte_identical(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        f = tmp_path / f"{name}.csv"
        assert run(["path-gen", "--kind", "fbm", "--n", "257", "--seed", "7", "--out", str(f),
                    "--summary", str(tmp_path / f"{name}_s.json")]) == 0
        outs.append((f.read_bytes(), (tmp_path / f"{name}.json").read_bytes(),
                     (tmp_path / f"{name}_s.json").read_bytes()))
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_exit_codes_and_no_partial_output(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,z_1\n0,1\n1,abc\n")
    spec = tmp_path / "s.json"
    spec.write_text("{}")
    out = tmp_path / "o.csv"
    assert run(["integrate", "--driver", str(bad), "--integrand", str(spec), "--out", str(out)]) == EXIT_INPUT
    assert run(["integrate", "--driver", str(tmp_path / "nope.csv"), "--integrand", str(spec),
                "--out", str(out)]) == EXIT_INPUT
    assert run(["path-gen", "--kind", "weierstrass", "--a", "0.5", "--b", "7", "--n", "100",
                "--out", str(out)]) == EXIT_RANGE
    rot = tmp_path / "rot.json"
    rot.write_text("[[0, -1], [1, 0]]")
    assert run(["schur-foliation", "--A", str(rot), "--out", str(tmp_path / "f.json")]) == EXIT_FAILURE
    assert not out.exists() and not (tmp_path / "f.json").exists()
    with pytest.raises(SystemExit) as info:
        run(["path-gen", "--kind", "fbm", "--n", "10", "--out", str(out), "--bogus"])
    assert info.value.code == 2
    capsys.readouterr()


def test_schur_and_detect_commands(tmp_path, capsys):
    a = tmp_path / "a.json"
    a.write_text(json.dumps({"A": [[0, -1, 0], [1, 0, 0], [0, 0, 2]]}))
    assert run(["schur-foliation", "--A", str(a)]) == 0
    s = summary(capsys)
    assert s["lower_left_max"] == 0.0 and s["k"] in (1, 2)
    z = tmp_path / "z.csv"
    write_path(z, gen_fbm(0.75, 257, seed=0))
    assert run(["detect-explosion", "--A", str(a), "--k", "2", "--driver", str(z)]) == 0
    assert summary(capsys)["explosion"] is None


def test_solve_command(tmp_path, capsys):
    z = tmp_path / "z.csv"
    write_path(z, gen_smooth("sine", 1025, amp=1.0))
    a = tmp_path / "a.json"
    a.write_text("[[0, -1], [1, 0]]")
    out = tmp_path / "traj.csv"
    assert run(["solve", "--driver", str(z), "--field", "builtin:linear", "--A", str(a), "--x0", "1,0",
                "--out", str(out)]) == 0
    s = summary(capsys)
    assert s["explosion_index"] is None and len(s["final"]) == 2
    m = tmp_path / "m.json"
    m.write_text('{"manifold": "sphere", "radius": 1}')
    assert run(["solve", "--driver", str(z), "--field", "builtin:rotation", "--axis", "0,0,1", "--x0", "1,0,0",
                "--manifold", str(m), "--out", str(out)]) == 0
    assert np.linalg.norm(summary(capsys)["final"]) == pytest.approx(1.0)


def test_geometry_commands(tmp_path, capsys):
    from youngflow.manifolds import latitude_circle
    x = tmp_path / "x.csv"
    write_path(x, latitude_circle(np.pi / 3, 4096))
    assert run(["transport", "--path", str(x), "--v", "0,1,0", "--out", str(tmp_path / "v.json")]) == 0
    s = summary(capsys)
    assert abs(abs(s["holonomy_angle"]) - np.pi) < 1e-3
    assert abs(s["norm_change"]) < 1e-10
    w = tmp_path / "w.csv"
    write_path(w, gen_fbm(0.75, 513, seed=2, dim=2))
    dev = tmp_path / "dev.csv"
    assert run(["develop", "--plane", str(w), "--p0", "0,0,1", "--frame", "e1,e2", "--out", str(dev)]) == 0
    capsys.readouterr()
    back = tmp_path / "back.csv"
    assert run(["antidevelop", "--path", str(dev), "--frame", "e1,e2", "--out", str(back)]) == 0
    capsys.readouterr()
    W = read_path_csv(w)
    assert np.max(np.abs(read_path_csv(back).values - W.values)) < 1e-10
    assert run(["develop", "--plane", str(w), "--p0", "0,0,1", "--frame", "e1,e3", "--out", str(dev)]) == 5
    capsys.readouterr()


def test_homogeneous_commands(tmp_path, capsys):
    z = tmp_path / "z.csv"
    write_path(z, gen_smooth("sine", 4097, amp=1.0))
    out = tmp_path / "hd.json"
    assert run(["decompose-homogeneous", "--A", "skew:0.3,-0.8,0.5", "--driver", str(z), "--x", "skew:0.1,0.2,0.3",
                "--out", str(out)]) == 0
    s = summary(capsys)
    assert s["residuals"]["reconstruction"] < 1e-5
    data = json.loads(out.read_text())
    assert len(data["g"]) == 4097 and len(data["g"][0]) == 9
    assert run(["trivial-bundle", "--A", "axis:x", "--B", "0.7", "--driver", str(z), "--y", "0.3",
                "--out", str(tmp_path / "tb.json")]) == 0
    assert summary(capsys)["reconstruction"] < 1e-10


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "youngflow.cli", "path-gen", "--kind", "linear", "--n", "11",
                          "--out", str(tmp_path / "l.csv")], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["n"] == 11
