import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ginibre_lyapunov.cli import ConfigError, ExperimentConfig, main, parse_config
from ginibre_lyapunov.csvio import format_float, read_csv, write_csv

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def run_cli(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path), "--no-timestamp"])


# -- configuration ------------------------------------------------------------

def test_parse_simulate_example():
    cfg = parse_config("simulate --ensemble ginibre --beta 2 --n 3 --t 200 --samples 10000 "
                       "--seed 42 --observable sv-lyapunov".split())
    assert isinstance(cfg, ExperimentConfig)
    assert (cfg.command, cfg.beta, cfg.n, cfg.t, cfg.samples, cfg.seed) == \
        ("simulate", 2, 3, 200, 10000, 42)
    assert cfg.observable == "sv-lyapunov" and cfg.format == "csv"


def test_t_zero_rejected():
    with pytest.raises(ConfigError, match="t must be ≥ 1"):
        parse_config(["simulate", "--t", "0"])


def test_flags_override_config():
    doc = json.dumps({"command": "density", "t": 5, "n": 2, "model": "saddle"})
    cfg = parse_config(["--t", "30"], config_text=doc)
    assert cfg.t == 30 and cfg.n == 2 and cfg.model == "saddle" and cfg.command == "density"
    assert parse_config([], config_text=doc).t == 5


def test_config_file_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"command": "positions", "n": 4, "no-timestamp": True}))
    cfg = parse_config(["--config", str(p)])
    assert cfg.n == 4 and cfg.no_timestamp


@pytest.mark.parametrize("doc,msg", [
    ({"command": "density", "colour": 1}, "unknown config key"),
    ({"command": "density", "t": "ten"}, "t must be an integer"),
    ({"command": "density", "t": 2.5}, "t must be an integer"),
    ({"command": "density", "no_timestamp": "yes"}, "true or false"),
    ({"command": "density", "grid": [1, 2]}, "grid must be"),
    ([1, 2], "JSON object"),
])
def test_config_errors(doc, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config([], config_text=json.dumps(doc))


@pytest.mark.parametrize("argv,msg", [
    (["simulate", "--colour", "red"], "unrecognized"),
    (["simulate", "--beta", "3"], "beta must be 1, 2 or 4"),
    (["simulate", "--ensemble", "wishart"], "ensemble must be 'ginibre'"),
    (["simulate", "--observable", "trace"], "observable must be"),
    (["density", "--model", "exact-ish"], "model must be"),
    (["density", "--grid", "1:0:10"], "lo < hi"),
    (["density", "--grid", "0:1:1"], "at least 2 points"),
    (["density", "--grid", "zero:1:10"], "lo:hi:n"),
    (["simulate", "--format", "xml"], "format must be"),
    (["simulate", "--component", "7", "--n", "3"], "component must be"),
    (["compare", "--tolerance", "0"], "tolerance must be > 0"),
    (["--preset", "fig9"], "unknown preset"),
    ([], "give a subcommand"),
    (["limits", "--t-values", "10,0"], "t must be ≥ 1"),
])
def test_flag_errors(argv, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(argv)


def test_bad_config_json():
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config([], config_text="{t: 3")
    with pytest.raises(ConfigError, match="cannot read config"):
        parse_config(["--config", "/nonexistent/cfg.json"])


def test_main_reports_errors(capsys):
    assert main(["simulate", "--t", "0"]) == 1
    err = capsys.readouterr().err.strip()
    assert err == "error: t must be ≥ 1"


def test_negative_grid_accepted():
    cfg = parse_config(["density", "--grid", "-0.8:0.8:400"])
    assert cfg.grid == (-0.8, 0.8, 400)
    cfg = parse_config(["density", "--grid=-2:-1:3"])
    assert cfg.grid == (-2.0, -1.0, 3)


# -- CSV round trip -----------------------------------------------------------

def test_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    data = np.concatenate([rng.standard_normal((50, 3)) * 10.0 ** rng.integers(-300, 300, (50, 3)),
                           [[np.pi, -0.0, 5e-324]]])
    path = write_csv(str(tmp_path / "a.csv"), ["x", "y", "z"], data, {"N": 3}, timestamp=False)
    meta, cols, back = read_csv(path)
    assert cols == ["x", "y", "z"] and meta["N"] == "3" and "build" in meta
    assert np.array_equal(back.view(np.uint64), data.view(np.uint64))
    assert format_float(np.inf) == "inf" and format_float(np.nan) == "nan"


def test_csv_row_length_checked(tmp_path):
    with pytest.raises(ValueError):
        write_csv(str(tmp_path / "b.csv"), ["x", "y"], [[1.0]])


# -- commands -----------------------------------------------------------------

def test_density_example(tmp_path):
    assert run_cli(tmp_path, "density", "--model", "saddle", "--n", "3", "--t", "30",
                   "--grid", "-0.8:0.8:400") == 0
    meta, cols, data = read_csv(tmp_path / "density.csv")
    assert data.shape == (400, 3) and cols == ["x", "pdf", "cdf"]
    assert meta["model"] == "saddle" and "timestamp" not in meta
    assert data[0, 0] == -0.8 and data[-1, 0] == 0.8
    assert np.all(data[:, 1] >= 0) and np.all(np.diff(data[:, 2]) >= -1e-12)


def test_simulate_writes_samples_and_histogram(tmp_path):
    assert run_cli(tmp_path, "simulate", "--n", "2", "--t", "10", "--samples", "50",
                   "--seed", "4") == 0
    meta, cols, data = read_csv(tmp_path / "simulate_samples.csv")
    assert cols == ["sample", "mu_1", "mu_2"] and data.shape == (50, 3)
    for key in ("ensemble", "N", "t", "samples", "seed", "observable", "build"):
        assert key in meta
    assert meta["seed"] == "4" and meta["observable"] == "sv-lyapunov"
    assert np.all(np.diff(data[:, 1:], axis=1) >= 0)
    _, hcols, h = read_csv(tmp_path / "simulate_histogram.csv")
    assert hcols == ["x", "density", "count"] and h[:, 2].sum() == 100


def test_simulate_is_byte_identical(tmp_path):
    args = ("simulate", "--n", "3", "--t", "5", "--samples", "30", "--seed", "9",
            "--observable", "ev-lyapunov")
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(a, *args) == 0 and run_cli(b, *args, "--threads", "2") == 0
    for name in ("simulate_samples.csv", "simulate_histogram.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_timestamp_line_only_difference(tmp_path):
    args = ["positions", "--n", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--no-timestamp"]) == 0
    a = (tmp_path / "a" / "positions.csv").read_text().splitlines()
    b = (tmp_path / "b" / "positions.csv").read_text().splitlines()
    assert [l for l in a if not l.startswith("#timestamp=")] == b


def test_simulate_ev_columns(tmp_path):
    assert run_cli(tmp_path, "simulate", "--beta", "1", "--n", "2", "--t", "4",
                   "--samples", "20", "--observable", "ev-lyapunov") == 0
    _, cols, data = read_csv(tmp_path / "simulate_samples.csv")
    assert cols == ["sample", "nu_1", "nu_2", "phi_1", "phi_2", "real_fraction"]
    assert data.shape == (20, 6)


def test_simulate_2x2(tmp_path):
    assert run_cli(tmp_path, "simulate", "--n", "2", "--t", "20", "--samples", "40",
                   "--observable", "two-by-two-schur") == 0
    _, cols, data = read_csv(tmp_path / "simulate_2x2.csv")
    assert cols[:3] == ["sample", "mu_max", "mu_max_svd"]
    assert np.allclose(data[:, 1], data[:, 2], atol=1e-10)
    assert np.all(data[:, 1] >= data[:, 3] - 1e-12)


def test_compare_summary_and_exit_codes(tmp_path):
    args = ("compare", "--n", "1", "--t", "5", "--samples", "400", "--model", "exact-meijer",
            "--seed", "2")
    assert run_cli(tmp_path, *args, "--tolerance", "0.2") == 0
    s = json.loads((tmp_path / "compare_summary.json").read_text())
    assert set(s) == {"experiment", "model", "ks", "tolerance", "pass", "runtime_seconds", "seed"}
    assert s["pass"] is True and s["runtime_seconds"] is None and s["seed"] == 2
    assert 0 < s["ks"] < 0.2
    assert run_cli(tmp_path, *args, "--tolerance", "1e-6") == 2
    s = json.loads((tmp_path / "compare_summary.json").read_text())
    assert s["pass"] is False


def test_compare_records_runtime(tmp_path):
    assert main(["compare", "--n", "1", "--t", "2", "--samples", "50", "--model", "exact-meijer",
                 "--tolerance", "1", "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "compare_summary.json").read_text())
    assert s["runtime_seconds"] > 0


def test_positions_and_json_format(tmp_path):
    assert run_cli(tmp_path, "positions", "--n", "4", "--format", "json") == 0
    doc = json.loads((tmp_path / "positions.json").read_text())
    assert doc["columns"] == ["b", "position", "radius"] and len(doc["data"]) == 4
    pos = np.array([r[1] for r in doc["data"]])
    assert np.all(np.diff(pos) > 0)


def test_limits(tmp_path):
    assert run_cli(tmp_path, "limits", "--n", "20", "--t-values", "10,100",
                   "--moments", "2") == 0
    _, cols, m = read_csv(tmp_path / "limits_moments.csv")
    assert m.shape == (4, 5) and np.allclose(m[:, 3], 2 / (m[:, 0] + 2))
    meta, _, s = read_csv(tmp_path / "limits_staircase.csv")
    assert s.shape == (601, 3) and float(meta["sup_deviation"]) > 0


def test_spacing(tmp_path):
    assert run_cli(tmp_path, "spacing", "--n", "4", "--t", "3", "--samples", "10") == 0
    _, _, atoms = read_csv(tmp_path / "spacing_atoms.csv")
    assert atoms.shape == (3, 2)
    _, _, mc = read_csv(tmp_path / "spacing_mc.csv")
    assert mc.shape == (30, 1) and np.all(mc >= 0)


def test_plot_script(tmp_path):
    assert run_cli(tmp_path, "density", "--model", "gaussian-mixture", "--n", "2", "--t", "10",
                   "--grid", "-1:1:20", "--emit-plot-script") == 0
    gp = (tmp_path / "density.gp").read_text()
    assert "density.csv" in gp and 'set datafile separator ","' in gp


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["positions", "--out", str(blocker / "sub")]) == 1


# -- presets ------------------------------------------------------------------

def test_preset_fig3(tmp_path):
    assert run_cli(tmp_path, "--preset", "fig3", "--samples", "5") == 0
    _, cols, sc = read_csv(tmp_path / "fig3_N5_t500_scatter.csv")
    assert cols == ["sample", "re", "im"] and sc.shape == (25, 3)
    _, _, rings = read_csv(tmp_path / "fig3_rings.csv")
    assert rings.shape == (5, 2)
    # rooted eigenvalues sit near the rings
    r = np.hypot(sc[:, 1], sc[:, 2])
    assert np.abs(r[:, None] - rings[None, :, 1]).min(axis=1).max() < 0.2


def test_preset_fig5(tmp_path):
    assert run_cli(tmp_path, "--preset", "fig5", "--samples", "4", "--emit-plot-script") == 0
    names = set(os.listdir(tmp_path))
    for beta in (1, 2, 4):
        assert f"fig5_beta{beta}_positions.csv" in names
        for t in (5, 500):
            assert f"fig5_beta{beta}_t{t}_scatter.csv" in names
    assert "fig5.gp" in names
    meta, _, _ = read_csv(tmp_path / "fig5_beta1_t500_scatter.csv")
    assert "mean_real_fraction" in meta


@pytest.mark.parametrize("preset,files", [
    ("fig1", ["fig1_t30_histogram.csv", "fig1_t30_curves.csv", "fig1_t200_curves.csv"]),
    ("fig2", ["fig2_histogram.csv", "fig2_curve.csv"]),
    ("fig4", ["fig4_singular_histogram.csv", "fig4_radii_histogram.csv", "fig4_curves.csv",
              "fig4_positions.csv"]),
])
def test_other_presets(tmp_path, preset, files):
    assert run_cli(tmp_path, "--preset", preset, "--samples", "5") == 0
    for f in files:
        _, _, d = read_csv(tmp_path / f)
        assert d.size and np.isfinite(d).all()


# -- entry points -------------------------------------------------------------

def _env(**extra):
    env = dict(os.environ)
    env["PYTHONPATH"] = os.path.join(ROOT, "src") + os.pathsep + env.get("PYTHONPATH", "")
    env.update(extra)
    return env


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "ginibre_lyapunov", "positions", "--n", "2",
                        "--out", str(tmp_path)], capture_output=True, text=True, env=_env())
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "positions.csv").exists()
    r = subprocess.run([sys.executable, "-m", "ginibre_lyapunov", "simulate", "--t", "0"],
                       capture_output=True, text=True, env=_env())
    assert r.returncode == 1 and "t must be ≥ 1" in r.stderr


def test_pure_python_fallback_selected():
    code = ("from ginibre_lyapunov import kernels; import numpy as np;"
            "print(kernels.BACKEND, kernels.log_singular_values(np.eye(2)).values.tolist())")
    r = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                       env=_env(GINIBRE_LYAPUNOV_PURE_PYTHON="1"))
    assert r.returncode == 0, r.stderr
    assert r.stdout.split()[0] == "python"


def test_benchmark_quick(capsys):
    sys.path.insert(0, os.path.join(ROOT, "benchmarks"))
    try:
        import bench_kernels
    finally:
        sys.path.pop(0)
    assert bench_kernels.main(["--quick", "--repeat", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 + 2 * len(bench_kernels.QUICK)
    assert all(float(l.split()[-1]) < 1e-9 for l in lines[1:])
