import csv
import json
from pathlib import Path

import pytest

from hfcavity.cli import ConfigError, main, parse_frequency
from hfcavity.sweep import CSV_COLUMNS, config_to_dict, preset

DATA = Path(__file__).parent / "data"


class TestFrequencyParsing:
    def test_plain_is_mhz(self):
        assert parse_frequency("450") == 450.0
        assert parse_frequency("-251.5") == -251.5

    def test_suffixes(self):
        assert parse_frequency("17GHz") == 17000.0
        assert parse_frequency("4.4ghz") == 4400.0
        assert parse_frequency("1.75MHz") == 1.75

    def test_garbage_rejected(self):
        with pytest.raises(ConfigError):
            parse_frequency("fast")


class TestHelp:
    @pytest.mark.parametrize(
        "args,golden",
        [
            (["--help"], "help_main.txt"),
            (["eigen", "--help"], "help_eigen.txt"),
            (["levels", "--help"], "help_levels.txt"),
            (["crossings", "--help"], "help_crossings.txt"),
            (["spectrum", "--help"], "help_spectrum.txt"),
            (["slice", "--help"], "help_slice.txt"),
            (["preset", "--help"], "help_preset.txt"),
        ],
    )
    def test_help_matches_golden(self, args, golden, capsys):
        assert main(args) == 0
        assert capsys.readouterr().out == (DATA / golden).read_text()


class TestPresetCommand:
    def test_list(self, capsys):
        assert main(["preset", "list"]) == 0
        names = capsys.readouterr().out.split()
        assert "fig1" in names and "fig_toroid_4_5" in names


class TestExitCodes:
    def test_unknown_preset_is_config_error(self, capsys):
        assert main(["slice", "--preset", "fig99"]) == 1
        assert "fig99" in capsys.readouterr().err

    def test_malformed_json_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["slice", "--config", str(bad)]) == 1
        assert "bad.json" in capsys.readouterr().err

    def test_invalid_grid_named_in_message(self, capsys):
        code = main(
            ["slice", "--g", "1", "--kappa", "1", "--gamma", "0", "--epsilon", "0.001",
             "--probe-start", "10", "--probe-stop", "0", "--probe-step", "1"]
        )
        assert code == 1
        assert "probe" in capsys.readouterr().err

    def test_preset_and_config_conflict(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text("{}")
        assert main(["slice", "--preset", "fig3", "--config", str(cfg)]) == 1
        assert "mutually exclusive" in capsys.readouterr().err

    def test_unknown_flag_is_config_error(self, capsys):
        assert main(["slice", "--bogus"]) == 1

    def test_all_points_failing_is_numeric_error(self, tmp_path, capsys):
        # g = 0 on the full basis leaves the ground populations degenerate,
        # so every steady-state solve fails
        out = tmp_path / "x.csv"
        code = main(
            ["slice", "--g", "0", "--kappa", "1", "--gamma", "1", "--epsilon", "0.001",
             "--scope", "full", "--cavity-detuning", "0",
             "--probe-start", "0", "--probe-stop", "1", "--probe-step", "1",
             "--out", str(out)]
        )
        assert code == 2


class TestRuns:
    def test_eigen_preset_csv(self, tmp_path):
        out = tmp_path / "fig1.csv"
        assert main(["eigen", "--preset", "fig1", "--out", str(out)]) == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        detunings = {r["cavity_detuning_MHz"] for r in rows}
        assert len(detunings) == 21
        for wc in detunings:
            clusters = [r for r in rows if r["cavity_detuning_MHz"] == wc]
            assert len(clusters) == 20
            assert sum(int(r["degeneracy"]) for r in clusters) == 36

    def test_slice_csv_columns(self, tmp_path):
        out = tmp_path / "fig3cut.csv"
        code = main(
            ["slice", "--preset", "fig3",
             "--probe-start", "-252", "--probe-stop", "-250", "--probe-step", "1",
             "--out", str(out)]
        )
        assert code == 0
        header = out.read_text().splitlines()[0].split(",")
        assert header == list(CSV_COLUMNS)
        zeeman_cols = [c for c in header if c.startswith("pop_m")]
        assert len(zeeman_cols) == 9

    def test_identical_invocations_identical_outputs(self, tmp_path):
        argv = ["slice", "--preset", "fig_toroid_4_5",
                "--probe-start", "440", "--probe-stop", "446", "--probe-step", "2"]
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(argv + ["--out", str(out1)]) == 0
        assert main(argv + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        meta1 = json.loads(Path(f"{out1}.meta.json").read_text())
        meta2 = json.loads(Path(f"{out2}.meta.json").read_text())
        meta1.pop("created")
        meta2.pop("created")
        assert meta1 == meta2

    def test_config_file_run(self, tmp_path):
        config = preset("fig_toroid_4_5")
        from dataclasses import replace
        from hfcavity.sweep import Grid
        config = replace(config, probe_grid=Grid(0.0, 4.0, 2.0))
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config_to_dict(config)))
        out = tmp_path / "run.csv"
        assert main(["slice", "--config", str(path), "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 4

    def test_flag_overrides_apply_after_preset(self, tmp_path):
        out = tmp_path / "o.csv"
        assert main(
            ["slice", "--preset", "fig3", "--cavity-detuning=-0.1GHz",
             "--probe-start", "-251", "--probe-stop", "-251", "--probe-step", "1",
             "--out", str(out)]
        ) == 0
        row = out.read_text().splitlines()[1].split(",")
        assert float(row[0]) == -100.0

    def test_crossings_windowed(self, capsys):
        code = main(
            ["crossings", "--g", "17GHz", "--kappa", "4.4GHz", "--gamma", "2.6",
             "--cavity-start", "19GHz", "--cavity-stop", "22GHz", "--cavity-step", "1GHz"]
        )
        assert code == 0
        out = capsys.readouterr().out
        lines = [l for l in out.splitlines() if l and not l.startswith("cavity")]
        assert lines, "expected at least one crossing near +20 GHz"

    def test_levels_csv(self, tmp_path):
        out = tmp_path / "levels.csv"
        code = main(
            ["levels", "--g", "17GHz", "--kappa", "4.4GHz", "--gamma", "2.6",
             "--cavity-start", "0", "--cavity-stop", "2GHz", "--cavity-step", "1GHz",
             "--out", str(out)]
        )
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert {r["ground_F"] for r in rows} == {"3", "4"}
        assert all(r["excitable"] in {"0", "1"} for r in rows)
