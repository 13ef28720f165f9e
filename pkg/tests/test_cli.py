from __future__ import annotations

import json

import pytest

from conftest import SMALL_SHAPE
from safecorridor.cli import main
from safecorridor.grid import load_tss

SMALL = {
    "grid": {"shape": list(SMALL_SHAPE)},
    "solver": {"horizon": 8.0},
    "vehicles": [{"id": "a", "entry": "left", "exit": "right", "entry_window": [0.0, 0.5], "delta": 1.0}],
    "export": {"xy_times": [1.0]},
}


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return p


def test_run_precompute_and_slice(small_config, tmp_path, capsys):
    table = tmp_path / "table"
    assert main(["precompute", str(small_config), "--table", str(table)]) == 0
    assert any(table.iterdir())
    out = tmp_path / "out"
    assert main(["run", str(small_config), "--out", str(out), "--table", str(table)]) == 0
    printed = capsys.readouterr().out
    assert "a: res-0001" in printed
    report = json.loads((out / "report.json").read_text())
    assert report["vehicles"][0]["granted"]
    tss_path = out / "corridors" / "res-0001.tss"
    assert load_tss(tss_path).grid.shape == SMALL_SHAPE
    csv_path = tmp_path / "s.csv"
    assert main(["slice", str(tss_path), "--kind", "xy", "--at", "1.0", "--out", str(csv_path)]) == 0
    assert len(csv_path.read_text().splitlines()) == SMALL_SHAPE[0] * SMALL_SHAPE[1] + 1


def test_errors_return_code_two(small_config, tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config_error"
    assert main(["slice", str(small_config), "--kind", "xt", "--at", "0", "--out", str(tmp_path / "x.csv")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "corrupt_file"


def test_usage_errors_exit():
    with pytest.raises(SystemExit):
        main([])
    with pytest.raises(SystemExit):
        main(["slice", "a.tss", "--kind", "zz", "--at", "0", "--out", "o"])
