import time

import pandas as pd
import pytest

from cli.perforation_cli import (
    EXIT_CHECK_FAILED,
    EXIT_INVALID,
    EXIT_OK,
    build_parser,
    main,
)
from tools import regimes
from tools.rates import fit_rate


def test_every_subcommand_is_registered():
    parser = build_parser()
    for name in ("sample", "separation", "slln", "measures", "cutoff", "proxy", "trace", "fit", "regimes"):
        assert parser.parse_args([name] if name != "fit" else [name, "--input", "x.csv"]).command == name


def test_fit_on_exact_power_law(fixtures_dir, tmp_path):
    code = main(
        ["fit", "--input", str(fixtures_dir / "eps_squared.csv"), "--target", "2", "--out", str(tmp_path)]
    )
    assert code == EXIT_OK
    row = pd.read_csv(tmp_path / "fit.csv").iloc[0]
    assert row["slope"] == pytest.approx(2.0, abs=1e-9)
    assert (tmp_path / "report.md").exists()
    assert (tmp_path / "resolved_config.yaml").exists()


def test_fit_with_wrong_target_fails_the_check(fixtures_dir, tmp_path):
    code = main(
        ["fit", "--input", str(fixtures_dir / "eps_squared.csv"), "--target", "3", "--out", str(tmp_path)]
    )
    assert code == EXIT_CHECK_FAILED


def test_separation_fixture_lists_violating_pair(fixtures_dir, tmp_path):
    code = main(
        ["separation", "--fixture", str(fixtures_dir / "coincident_centers.txt"), "--out", str(tmp_path)]
    )
    assert code == EXIT_CHECK_FAILED
    assert "(0, 1)" in (tmp_path / "report.md").read_text()


def test_unknown_config_key_exits_invalid(tmp_path):
    config = tmp_path / "bad.yaml"
    config.write_text("process:\n  bogus: 1\n", encoding="utf-8")
    assert main(["regimes", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_INVALID


def test_increasing_eps_exits_invalid(tmp_path):
    assert main(["slln", "--eps", "0.1", "0.2", "--out", str(tmp_path)]) == EXIT_INVALID


def test_missing_config_file_exits_invalid(tmp_path):
    assert main(["regimes", "--config", str(tmp_path / "absent.yaml")]) == EXIT_INVALID


def test_regimes_exit_code_follows_alpha(tmp_path):
    assert main(["regimes", "--out", str(tmp_path / "a4")]) == EXIT_CHECK_FAILED
    assert main(["regimes", "--alpha", "8", "--out", str(tmp_path / "a8")]) == EXIT_OK
    checks = pd.read_csv(tmp_path / "a8" / "regimes.csv")
    assert list(checks.columns) == ["name", "statement", "holds"]


def test_small_cutoff_run_writes_target_sigma(tmp_path, monkeypatch):
    monkeypatch.setattr("utils.io_utils.settings.MC_SAMPLES", 20000)
    code = main(["cutoff", "--eps", "0.2", "0.15", "0.1", "--seeds", "2", "--out", str(tmp_path)])
    assert code in (EXIT_OK, EXIT_CHECK_FAILED)
    rows = pd.read_csv(tmp_path / "cutoff.csv")
    assert list(rows["eps"]) == [0.2, 0.15, 0.1]
    assert (rows["target_sigma"] == 0.5).all()


def test_sample_writes_one_file_per_eps(tmp_path):
    assert main(["sample", "--eps", "0.2", "0.1", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "perforated_eps0.2.txt").exists()
    assert (tmp_path / "perforated_eps0.1.txt").exists()


def test_reruns_are_byte_identical(tmp_path):
    args = ["slln", "--eps", "0.2", "0.1", "--seeds", "3"]
    main(args + ["--out", str(tmp_path / "first")])
    main(args + ["--out", str(tmp_path / "second")])
    main(
        [
            "slln",
            "--config",
            str(tmp_path / "first" / "resolved_config.yaml"),
            "--out",
            str(tmp_path / "replay"),
        ]
    )
    first = (tmp_path / "first" / "slln.csv").read_bytes()
    assert first == (tmp_path / "second" / "slln.csv").read_bytes()
    assert first == (tmp_path / "replay" / "slln.csv").read_bytes()


@pytest.mark.slow
def test_measures_slopes_match_their_exponents(tmp_path):
    assert main(["measures", "--out", str(tmp_path)]) == EXIT_OK
    rows = pd.read_csv(tmp_path / "measures.csv")

    def fit(column):
        return fit_rate(list(zip(rows["eps"], rows[column])))

    volume = fit("total_volume")
    assert volume.slope == pytest.approx(regimes.volume_exponent(4.0), abs=0.3)
    assert volume.r_squared >= 0.99
    assert fit("hole_count").slope == pytest.approx(-3.0, abs=0.2)
    assert fit("total_surface").slope == pytest.approx(regimes.surface_exponent(4.0), abs=0.3)


@pytest.mark.slow
def test_proxy_distance_decreases_within_the_time_budget(configs_dir, tmp_path):
    start = time.monotonic()
    config = configs_dir / "proxy_homogenization.yaml"
    code = main(["proxy", "--config", str(config), "--out", str(tmp_path)])
    elapsed = time.monotonic() - start
    assert code == EXIT_OK
    distances = list(pd.read_csv(tmp_path / "proxy.csv")["distance"])
    assert len(distances) == 4
    assert all(b < a for a, b in zip(distances, distances[1:]))
    assert elapsed < 600.0


@pytest.mark.slow
def test_trace_slope_stays_above_the_bound(configs_dir, tmp_path):
    code = main(["trace", "--config", str(configs_dir / "proxy_trace.yaml"), "--out", str(tmp_path)])
    assert code == EXIT_OK
    rows = pd.read_csv(tmp_path / "trace.csv").dropna(subset=["trace_norm"])
    assert len(rows) >= 3
    fit = fit_rate(list(zip(rows["eps"], rows["trace_norm"])))
    assert fit.slope >= regimes.trace_exponent(3.0) - 0.2
