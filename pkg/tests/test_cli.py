import numpy as np
import pytest

from dear.cli import main
from dear.data import RunConfig, ingest_csv
from dear.estimator import forecast, load_model
from dear.metrics import QUANTILE_LEVELS


BASE_CFG = """covariates=x0
window=400
min_window=200
synth_n=450
synth_mean=sine
synth_sd=smooth
synth_ar=0.6
seed=11
start=400
end=429
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "cfg.txt"
    cfg.write_text(BASE_CFG, encoding="utf-8")
    rc = main(["simulate", "--config", str(cfg), "--out", str(root / "sim")])
    assert rc == 0
    return root


class TestSimulate:
    def test_outputs_exist(self, workspace):
        assert (workspace / "sim" / "data.csv").exists()
        gt = (workspace / "sim" / "ground_truth.csv").read_text().splitlines()
        assert gt[0] == "t,x0,m,sigma,u,eps,y"
        assert len(gt) == 1 + 450
        meta = (workspace / "sim" / "meta.txt").read_text()
        assert "rng=numpy-pcg64" in meta

    def test_unstable_ar_is_config_error(self, tmp_path, capsys):
        cfg = tmp_path / "bad.txt"
        cfg.write_text(BASE_CFG.replace("synth_ar=0.6", "synth_ar=1.2"),
                       encoding="utf-8")
        rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "unstable" in capsys.readouterr().err

    def test_same_seed_identical_bytes(self, workspace, tmp_path):
        cfg = workspace / "cfg.txt"
        rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "again")])
        assert rc == 0
        a = (workspace / "sim" / "data.csv").read_bytes()
        b = (tmp_path / "again" / "data.csv").read_bytes()
        assert a == b

    def test_row_count(self, workspace):
        cfg = RunConfig.from_file(workspace / "cfg.txt")
        ds, _ = ingest_csv(workspace / "sim" / "data.csv", cfg.schema())
        assert ds.n == 450


class TestFit:
    def test_fit_and_serialized_forecast(self, workspace, capsys):
        cfg = workspace / "cfg.txt"
        rc = main(["fit", "--config", str(cfg), "--data",
                   str(workspace / "sim" / "data.csv"), "--out", str(workspace / "fit")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "order=" in out and "converged=" in out and "ljung_box_p=" in out
        model = load_model(workspace / "fit" / "model.npz")
        fc = forecast(model, [0.5])
        assert np.isfinite(fc.mean)

    def test_serialized_equals_in_process(self, workspace):
        import dear
        cfg = RunConfig.from_file(workspace / "cfg.txt")
        ds, _ = ingest_csv(workspace / "sim" / "data.csv", cfg.schema())
        direct = dear.fit(ds.x[ds.n - cfg.window:], ds.y[ds.n - cfg.window:],
                          ds.kinds, cfg)
        loaded = load_model(workspace / "fit" / "model.npz")
        for q in (0.25, 0.75):
            assert forecast(direct, [q]).mean == pytest.approx(
                forecast(loaded, [q]).mean, abs=1e-12)

    def test_missing_data_is_data_error(self, workspace, capsys):
        rc = main(["fit", "--config", str(workspace / "cfg.txt"),
                   "--data", str(workspace / "nope.csv"), "--out",
                   str(workspace / "f2")])
        assert rc == 3


@pytest.fixture(scope="module")
def eval_out(workspace):
    rc = main(["evaluate", "--config", str(workspace / "cfg.txt"),
               "--data", str(workspace / "sim" / "data.csv"),
               "--method", "dear", "--out", str(workspace / "eval")])
    assert rc == 0
    return workspace / "eval"


class TestEvaluate:
    def test_outputs(self, eval_out):
        for name in ("forecasts.csv", "metrics.csv", "metrics.txt"):
            assert (eval_out / name).exists()

    def test_forecast_row_count(self, eval_out):
        rows = (eval_out / "forecasts.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 30  # header + end-start+1

    def test_quantile_columns_monotone(self, eval_out):
        rows = (eval_out / "forecasts.csv").read_text().strip().splitlines()
        header = rows[0].split(",")
        q_idx = [i for i, h in enumerate(header) if h.startswith("q")]
        assert len(q_idx) == len(QUANTILE_LEVELS)
        for row in rows[1:]:
            vals = row.split(",")
            qs = [float(vals[i]) for i in q_idx]
            assert all(b >= a - 1e-12 for a, b in zip(qs, qs[1:]))

    def test_csv_parses_losslessly(self, eval_out):
        rows = (eval_out / "forecasts.csv").read_text().strip().splitlines()
        vals = rows[1].split(",")
        assert repr(float(vals[1])) == vals[1]

    def test_determinism(self, workspace, eval_out, tmp_path):
        rc = main(["evaluate", "--config", str(workspace / "cfg.txt"),
                   "--data", str(workspace / "sim" / "data.csv"),
                   "--method", "dear", "--out", str(tmp_path / "eval2")])
        assert rc == 0
        for name in ("forecasts.csv", "metrics.csv", "metrics.txt"):
            assert (eval_out / name).read_bytes() == (tmp_path / "eval2" / name).read_bytes()

    def test_persistence_on_constant_series(self, tmp_path, capsys):
        data = tmp_path / "const.csv"
        rows = ["timestamp,target,x0"] + [f"{t},5.0,0.{t % 10}" for t in range(320)]
        data.write_text("\n".join(rows) + "\n", encoding="utf-8")
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("covariates=x0\nwindow=300\nmin_window=200\nstart=300\nend=310\n",
                       encoding="utf-8")
        rc = main(["evaluate", "--config", str(cfg), "--data", str(data),
                   "--method", "persistence", "--out", str(tmp_path / "out")])
        assert rc == 0
        assert "rmse=0 " in capsys.readouterr().out

    def test_summary_line(self, workspace, capsys):
        rc = main(["evaluate", "--config", str(workspace / "cfg.txt"),
                   "--data", str(workspace / "sim" / "data.csv"),
                   "--method", "aml", "--out", str(workspace / "eval_aml")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "method=aml" in out and "rmse=" in out

    def test_insufficient_history_is_data_error(self, workspace, capsys):
        rc = main(["evaluate", "--config", str(workspace / "cfg.txt"),
                   "--data", str(workspace / "sim" / "data.csv"),
                   "--method", "dear", "--start", "100",
                   "--out", str(workspace / "bad")])
        assert rc == 3

    def test_density_grid_emission(self, workspace, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(BASE_CFG + "grid_instants=405,410\n", encoding="utf-8")
        rc = main(["evaluate", "--config", str(cfg),
                   "--data", str(workspace / "sim" / "data.csv"),
                   "--method", "dear", "--out", str(tmp_path / "out")])
        assert rc == 0
        grid = (tmp_path / "out" / "density-grid.csv").read_text().strip().splitlines()
        assert grid[0] == "t,y,pdf"
        ts = {row.split(",")[0] for row in grid[1:]}
        assert ts == {"405", "410"}
        # pdf values integrate roughly to one on the emitted grid
        import collections
        by_t = collections.defaultdict(list)
        for row in grid[1:]:
            t, y, p = row.split(",")
            by_t[t].append((float(y), float(p)))
        for pts in by_t.values():
            ys, ps = zip(*sorted(pts))
            total = np.trapezoid(ps, ys)
            assert total == pytest.approx(1.0, abs=0.05)
