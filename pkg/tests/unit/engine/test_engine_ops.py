import numpy as np
import orjson
import pytest

from gpehom.adapters.base import ExecutionResult
from gpehom.core.config import GpehomSettings, load_run_config, parse_run_config
from gpehom.core.engine import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, GPEHomotopyEngine


def solve_ok(engine, cfg, out):
    res = engine.solve(cfg, out=str(out))
    assert isinstance(res, ExecutionResult)
    assert res.success, res.error
    assert res.exit_code == EXIT_OK
    return res


def _config(values, **extra):
    merged = {**values, **extra}
    return parse_run_config("".join(f"{k} = {v}\n" for k, v in merged.items()))


def test_solve_writes_run_directory(engine, smoke_1d_values, tmp_path):
    res = solve_ok(engine, _config(smoke_1d_values), tmp_path / "run")
    report = res.data
    run = tmp_path / "run"
    assert (run / "report.json").is_file()
    assert [p.index for p in report.paths] == [1, 2, 3]
    for p in report.paths:
        assert p.status == "converged"
        assert p.residual <= 1e-10
        assert p.final_t == 1.0
        assert (run / p.eigenvector_file).is_file()
        assert (run / p.path_log_file).is_file()
    assert "positive" in report.paths[0].flags
    assert "antisymmetric" in report.paths[1].flags
    assert set(report.timings) == {"build", "trace", "checks", "total"}
    assert not report.hard_failures


def test_report_checks_present(engine, smoke_1d_values, tmp_path):
    report = solve_ok(engine, _config(smoke_1d_values), tmp_path / "run").data
    names = [c.name for c in report.checks]
    assert names == ["residual", "scf_cross_check", "positivity", "antisymmetry", "bound",
                     "order_preservation", "path_separation"]
    anti = next(c for c in report.checks if c.name == "antisymmetry")
    assert anti.details["reference_distance"] <= 1e-6


def test_report_is_deterministic(smoke_1d_values, tmp_path):
    cfg = _config(smoke_1d_values)
    GPEHomotopyEngine(GpehomSettings(workers=1)).solve(cfg, out=str(tmp_path / "a"))
    GPEHomotopyEngine(GpehomSettings(workers=3)).solve(cfg, out=str(tmp_path / "b"))
    a = orjson.loads((tmp_path / "a" / "report.json").read_bytes())
    b = orjson.loads((tmp_path / "b" / "report.json").read_bytes())
    a.pop("timings"), b.pop("timings")
    assert a == b
    for name in ("eigenvectors/path_002.csv", "logs/path_003.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_linear_problem_gives_eigenvalues_of_D(engine, tmp_path):
    cfg = parse_run_config("x_min = -2\nx_max = 2\nn = 12\nbeta = 0\nsigma = 0\npaths = 1-4\n")
    res = solve_ok(engine, cfg, tmp_path / "run")
    p = res.meta["problem"]
    expected = np.linalg.eigvalsh(p.D.todense())[:4]
    assert np.allclose([s.lam for s in res.data.paths], expected, rtol=1e-9)


def test_verify_passes_on_fresh_run(engine, smoke_1d_values, tmp_path):
    solve_ok(engine, _config(smoke_1d_values), tmp_path / "run")
    res = engine.verify(tmp_path / "run")
    assert res.success and res.exit_code == EXIT_OK
    replay = next(c for c in res.data if c.name == "residual_replay")
    assert replay.passed and not replay.hard


def test_verify_detects_tampered_eigenvector(engine, smoke_1d_values, tmp_path):
    solve_ok(engine, _config(smoke_1d_values), tmp_path / "run")
    path = tmp_path / "run" / "eigenvectors" / "path_001.csv"
    lines = path.read_text(encoding="utf-8").splitlines()
    x, phi = lines[5].split(",")
    lines[5] = f"{x},{float(phi) + 1e-3:.16e}"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    res = engine.verify(tmp_path / "run" / "report.json")
    assert not res.success
    assert res.exit_code == EXIT_FAILED
    assert "residual" in res.error


def test_verify_missing_report(engine, tmp_path):
    res = engine.verify(tmp_path)
    assert res.exit_code == EXIT_CONFIG


def test_verify_2d_skips_antisymmetry(engine, smoke_2d_values, tmp_path):
    solve_ok(engine, _config(smoke_2d_values), tmp_path / "run")
    res = engine.verify(tmp_path / "run")
    anti = next(c for c in res.data if c.name == "antisymmetry")
    assert not anti.applicable
    assert "not applicable" in anti.message


def test_export_1d_adds_boundary_zeros(engine, smoke_1d_values, tmp_path):
    solve_ok(engine, _config(smoke_1d_values), tmp_path / "run")
    res = engine.export(tmp_path / "run", 1)
    assert res.success
    assert res.meta["rows"] == 22
    table = np.loadtxt(res.data, delimiter=",", skiprows=1)
    assert table[0, 0] == -2.0 and table[-1, 0] == 2.0
    assert table[0, 1] == 0.0 and table[-1, 1] == 0.0
    stored = np.loadtxt(tmp_path / "run" / "eigenvectors" / "path_001.csv", delimiter=",", skiprows=1)
    assert np.array_equal(table[1:-1], stored)


def test_export_2d_row_major(engine, smoke_2d_values, tmp_path):
    solve_ok(engine, _config(smoke_2d_values), tmp_path / "run")
    res = engine.export(tmp_path / "run", 1)
    assert res.meta["rows"] == 64
    table = np.loadtxt(res.data, delimiter=",", skiprows=1)
    grid = table[:, 2].reshape(8, 8)
    assert np.all(grid[0] == 0.0) and np.all(grid[-1] == 0.0)
    assert np.all(grid[:, 0] == 0.0) and np.all(grid[:, -1] == 0.0)
    assert np.all(table[:8, 0] == 0.0)
    assert np.allclose(table[:8, 1], np.linspace(0.0, 1.0, 8))


def test_export_unknown_path(engine, smoke_1d_values, tmp_path):
    solve_ok(engine, _config(smoke_1d_values), tmp_path / "run")
    res = engine.export(tmp_path / "run", 9)
    assert not res.success and res.exit_code == EXIT_CONFIG


def test_tabulated_potential_file(engine, smoke_1d_values, write_config, tmp_path):
    x = np.linspace(-2.0, 2.0, 22)[1:-1]
    (tmp_path / "trap.csv").write_text("\n".join(f"{v:.16e}" for v in 0.5 * x ** 2) + "\n", encoding="utf-8")
    values = dict(smoke_1d_values, potential="tabulated", potential_file="trap.csv")
    cfg = load_run_config(write_config(**values))
    res = engine.solve(cfg, base_dir=tmp_path, out=str(tmp_path / "tab"))
    assert res.success, res.error
    assert res.data.config["potential_file"] == str((tmp_path / "trap.csv").resolve())
    harmonic = solve_ok(engine, _config(smoke_1d_values), tmp_path / "harm").data
    for a, b in zip(res.data.paths, harmonic.paths):
        assert a.lam == pytest.approx(b.lam, rel=1e-12)


def test_bad_potential_file(engine, smoke_1d_values, tmp_path):
    values = dict(smoke_1d_values, potential="tabulated", potential_file="missing.csv")
    res = engine.solve(_config(values), base_dir=tmp_path, out=str(tmp_path / "run"))
    assert res.exit_code == EXIT_CONFIG


def test_path_index_beyond_grid(engine, smoke_1d_values, tmp_path):
    res = engine.solve(_config(smoke_1d_values, paths="21"), out=str(tmp_path / "run"))
    assert res.exit_code == EXIT_CONFIG


def test_sampling_failure_is_config_error(engine, smoke_2d_values, tmp_path):
    res = engine.solve(_config(smoke_2d_values, sigma=1e-14), out=str(tmp_path / "run"))
    assert res.exit_code == EXIT_CONFIG
    assert "sigma" in res.error


def test_all_paths_failed(engine, smoke_1d_values, tmp_path):
    res = engine.solve(_config(smoke_1d_values, max_steps=1), out=str(tmp_path / "run"))
    assert res.exit_code == EXIT_FAILED
    assert res.data.all_failed
    assert all(p.status == "max_steps" for p in res.data.paths)
    assert (tmp_path / "run" / "report.json").is_file()
