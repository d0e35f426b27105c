import csv
import filecmp

import numpy as np
import pytest

from nbfts.cli import main
from nbfts.config import merge, read_config
from nbfts.errors import InvalidInputError
from nbfts.store import validate_store

FAST = ["--k", "2", "--iterations", "60", "--burnin", "20", "--thin", "2"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def sims(tmp_path_factory):
    out = tmp_path_factory.mktemp("sims")
    assert main(["simulate", "--r", "1000", "--reps", "3", "--seed", "7", "--n", "8", "--m", "16",
                 "--m0", "10", "--out", str(out)]) == 0
    return out


def test_simulate_writes_reproducible_files(sims, tmp_path):
    for rep in (1, 2, 3):
        for kind in ("counts", "complete", "offsets", "truth"):
            assert (sims / f"sim_{rep:03d}_{kind}.csv").is_file()
    again = tmp_path / "again"
    main(["simulate", "--r", "1000", "--reps", "3", "--seed", "7", "--n", "8", "--m", "16",
          "--m0", "10", "--out", str(again)])
    for f in sims.iterdir():
        assert filecmp.cmp(f, again / f.name, shallow=False)


def test_fit_writes_valid_store(sims, tmp_path):
    out = tmp_path / "fit"
    code = main(["fit", str(sims / "sim_001_counts.csv"), "--offsets", str(sims / "sim_001_offsets.csv"),
                 "--variant", "nb", "--out", str(out), *FAST])
    assert code == 0
    meta = validate_store(out)
    assert meta["n_draws"] == 20 and meta["variant"] == "nb"
    assert (out / "ess.csv").is_file() and (out / "traces.png").stat().st_size > 0


def test_forecast_outputs(sims, tmp_path):
    out = tmp_path / "fc"
    code = main(["forecast", str(sims / "sim_001_counts.csv"), "--actuals", str(sims / "sim_001_complete.csv"),
                 "--m0", "10", "--task-id", "rep1", "--out", str(out), *FAST])
    assert code == 0
    rows = _rows(out / "forecast.csv")
    assert len(rows) == 6 and rows[0]["week"] == "11" and rows[0]["task_id"] == "rep1"
    assert all(r["actual"] != "" for r in rows)
    for name in ("peaks.csv", "baselines.csv", "peak_time_posterior.csv", "forecast.png", "peaks.png"):
        assert (out / name).stat().st_size > 0
    probs = [float(r["probability"]) for r in _rows(out / "peak_time_posterior.csv")]
    assert sum(probs) == pytest.approx(1.0)


def test_evaluate_hand_built_tables(tmp_path):
    task = tmp_path / "in" / "t1"
    task.mkdir(parents=True)
    (task / "forecast.csv").write_text(
        "task_id,variant,era,m0,week,actual,point,lower,upper\n"
        "t1,nb,all,2,3,5,4,0,10\n"
        "t1,nb,all,2,4,20,10,0,6\n"
        "t1,nb,all,2,5,3,3,1,4\n")
    (task / "peaks.csv").write_text(
        "task_id,variant,era,m0,peak_value_lower,peak_value_upper,peak_value_actual,peak_value_covered,"
        "peak_time_set,peak_time_actual,peak_time_covered\n"
        "t1,nb,all,2,1,30,20,1,4,4,1\n")
    out = tmp_path / "eval"
    assert main(["evaluate", str(tmp_path / "in"), "--out", str(out)]) == 0
    summary = _rows(out / "summary.csv")[0]
    assert float(summary["ecp"]) == pytest.approx(2 / 3)
    assert float(summary["miw"]) == 6.0
    assert float(summary["mae_year"]) == pytest.approx(11 / 3)
    assert (out / "mae_by_week.png").is_file()


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("year,week,count\n1950,1,-1\n")
    assert main(["fit", str(bad), "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error ") and "negative" in err
    assert main(["fit", str(bad)]) == 2
    assert main(["evaluate", str(tmp_path / "nothing"), "--out", str(tmp_path / "y")]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# run\nk = 3\niterations = 100\n[chain]\nseed = 4\n")
    values = read_config(cfg)
    assert values == {"k": 3, "iterations": 100, "seed": 4}
    merged = merge(values, {"k": 5, "thin": None}, {"k": 6, "thin": 5, "burnin": 10})
    assert merged == {"k": 5, "thin": 5, "burnin": 10, "iterations": 100, "seed": 4}


@pytest.mark.parametrize("text", ["bogus = 1\n", "k = 2\n[x]\nk = 3\n", "k = two\n"])
def test_config_errors(tmp_path, text):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    with pytest.raises(InvalidInputError):
        read_config(cfg)
