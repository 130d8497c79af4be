import json
import logging

import pandas as pd
import pytest

from junctionfab.cli import build_parser, main
from junctionfab.features.dataset import JunctionDataset, read_dataset, write_dataset


@pytest.fixture(autouse=True)
def quiet_cli(monkeypatch):
    """Keep main() from installing console handlers between tests."""
    monkeypatch.setenv("JF_LOG_TO_CONSOLE", "false")
    original_handlers = logging.root.handlers[:]
    yield
    logging.root.handlers = original_handlers


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    with pytest.MonkeyPatch.context() as mp:
        mp.setenv("JF_LOG_TO_CONSOLE", "false")
        assert main(["simulate", "--preset", "overlay-full", "--seed", "3", "--out", str(out)]) == 0
    return out


def test_simulate_writes_artefacts(simulated):
    for name in ("config.yaml", "dataset.csv", "report.txt", "report.csv", "metadata.json",
                 "area_fit.json", "heatmap_r_ohm.csv", "heatmap_r_ohm.pgm", "heatmap_lw_top_nm.svg",
                 "heatmap_lw_bot_nm.csv", "heatmap_area_um2.svg", "outliers.csv", "frequency.csv"):
        assert (simulated / name).exists(), name

    meta = json.loads((simulated / "metadata.json").read_text())
    assert meta["command"] == "simulate"
    assert meta["seed"] == 3
    assert len(meta["config_hash"]) == 64


def test_simulate_is_reproducible_across_thread_counts(simulated, tmp_path, monkeypatch):
    monkeypatch.setenv("JF_THREADS", "4")

    assert main(["simulate", "--preset", "overlay-full", "--seed", "3", "--out", str(tmp_path)]) == 0

    for name in ("dataset.csv", "report.csv", "heatmap_r_ohm.csv", "metadata.json"):
        assert (tmp_path / name).read_bytes() == (simulated / name).read_bytes(), name


def test_simulate_from_saved_config(simulated, tmp_path):
    assert main(["simulate", "--config", str(simulated / "config.yaml"), "--out", str(tmp_path)]) == 0

    assert (tmp_path / "dataset.csv").read_bytes() == (simulated / "dataset.csv").read_bytes()


def test_analyze_existing_dataset(simulated, tmp_path):
    assert main(["analyze", str(simulated / "dataset.csv"), "--out", str(tmp_path), "--grid", "5x5"]) == 0

    report = pd.read_csv(tmp_path / "report.csv", dtype={"group": str})
    assert set(report["group"]) == {"0.036", "0.110"}
    assert pd.read_csv(tmp_path / "heatmap_lw_top_nm.csv", index_col=0).shape == (5, 5)


def test_analyze_reports_malformed_rows(simulated, tmp_path):
    lines = (simulated / "dataset.csv").read_text().splitlines()
    lines[3] = lines[3].replace("Full", "Sideways")
    broken = tmp_path / "broken.csv"
    broken.write_text("\n".join(lines) + "\n")

    assert main(["analyze", str(broken), "--out", str(tmp_path / "lenient")]) == 0
    meta = json.loads((tmp_path / "lenient" / "metadata.json").read_text())
    assert meta["malformed_rows"] == [1]

    assert main(["analyze", str(broken), "--out", str(tmp_path / "strict"), "--strict"]) == 1


def test_dataset_round_trip_through_cli(simulated):
    dataset, errors = read_dataset(simulated / "dataset.csv")
    assert errors == []
    assert len(dataset) > 0


def test_bad_config_returns_error(tmp_path):
    config = tmp_path / "bad.yaml"
    config.write_text("seed: -4\n")

    assert main(["simulate", "--config", str(config), "--out", str(tmp_path / "out")]) == 1


def test_bad_settings_file_returns_error(tmp_path):
    settings = tmp_path / "settings.yaml"
    settings.write_text("threads: 0\n")

    assert main(["--settings", str(settings), "dose", "--out", str(tmp_path / "out")]) == 1


def test_dose_map_command(tmp_path, capsys):
    assert main(["dose", "--out", str(tmp_path), "--grid", "11x7", "--extent", "1.0"]) == 0

    frame = pd.read_csv(tmp_path / "dose_map.csv", index_col=0)
    assert frame.shape == (7, 11)
    assert "backscatter increase" in capsys.readouterr().out


def test_dose_with_unknown_preset(tmp_path):
    assert main(["dose", "--preset", "hsq", "--out", str(tmp_path)]) == 1


def test_psf_requires_enough_electrons(tmp_path):
    assert main(["psf", "--electrons", "100", "--out", str(tmp_path)]) == 1


def test_repro_writes_check_table(tmp_path):
    assert main(["repro", "fig2c", "--out", str(tmp_path)]) == 0

    checks = pd.read_csv(tmp_path / "checks.csv")
    assert set(checks["result"]) == {"PASS"}
    assert json.loads((tmp_path / "metadata.json").read_text())["experiments"] == ["fig2c"]


@pytest.mark.parametrize("argv", [
    [],
    ["simulate", "--out", "x"],
    ["simulate", "--preset", "reference", "--config", "c.yaml", "--out", "x"],
    ["simulate", "--preset", "reference", "--out", "x", "--grid", "ten"],
    ["repro", "nope", "--out", "x"],
])
def test_usage_errors_exit_with_two(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_parser_defaults():
    args = build_parser().parse_args(["analyze", "d.csv", "--out", "o"])
    assert args.grid == (10, 10)
    assert args.strict is False


@pytest.mark.slow
def test_psf_command(tmp_path):
    assert main(["psf", "--energy", "20", "--electrons", "10000", "--out", str(tmp_path)]) == 0

    assert (tmp_path / "psf_histogram.csv").exists()
    assert (tmp_path / "psf_fit.json").exists()


def test_analyze_selected_metric_only(simulated, tmp_path):
    assert main(["analyze", str(simulated / "dataset.csv"), "--out", str(tmp_path),
                 "--metric", "lw_bot_nm"]) == 0

    assert sorted(p.name for p in tmp_path.glob("heatmap_*")) == [
        "heatmap_lw_bot_nm.csv", "heatmap_lw_bot_nm.pgm", "heatmap_lw_bot_nm.svg"]


def test_analyze_lists_removed_outlier(simulated, tmp_path):
    dataset, _ = read_dataset(simulated / "dataset.csv")
    records = list(dataset.records)
    k = next(i for i, r in enumerate(records) if r.r_ohm is not None)
    bad = records[k].model_copy(update={"r_ohm": records[k].r_ohm * 100.0})
    records[k] = bad
    path = write_dataset(JunctionDataset(records=records), tmp_path / "with_outlier.csv")

    assert main(["analyze", str(path), "--out", str(tmp_path / "out")]) == 0

    outliers = pd.read_csv(tmp_path / "out" / "outliers.csv", dtype={"chip_id": str, "group": str})
    hit = outliers[(outliers["chip_id"] == bad.chip_id) & (outliers["x_mm"] == bad.x_mm)
                   & (outliers["y_mm"] == bad.y_mm)]
    assert len(hit) == 1
    assert hit["value"].iloc[0] == pytest.approx(bad.r_ohm)
    assert "outlier(s) removed" in (tmp_path / "out" / "report.txt").read_text()


def test_analyze_reports_frequencies(simulated, tmp_path):
    assert main(["analyze", str(simulated / "dataset.csv"), "--out", str(tmp_path)]) == 0

    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["ra_product"] == pytest.approx(250.0)
    frequency = pd.read_csv(tmp_path / "frequency.csv", dtype={"group": str})
    assert set(frequency["group"]) == {"0.036", "0.110"}
    assert (frequency["f01_mean_ghz"] > 0).all()


def test_dose_with_fitted_psf(tmp_path):
    fit = tmp_path / "psf_fit.json"
    fit.write_text('{"alpha_fwd": 0.02, "beta_back": 7.8, "eta": 0.16}\n')

    assert main(["dose", "--psf", str(fit), "--out", str(tmp_path / "out"), "--grid", "5x5"]) == 0

    meta = json.loads((tmp_path / "out" / "metadata.json").read_text())
    assert meta["psf"] == {"alpha_fwd": 0.02, "beta_back": 7.8, "eta": 0.16}


def test_dose_with_missing_psf(tmp_path):
    assert main(["dose", "--psf", str(tmp_path / "absent.json"), "--out", str(tmp_path / "out")]) == 1
