import hashlib
import json

import numpy as np
import pytest

from sgfronts import bifurcation as bf
from sgfronts import cli


def _files(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_locus_closed_form_run(tmp_path):
    out = tmp_path / "o"
    rc = cli.main(["locus", "--plane", "alpha-delta", "--d", "1", "--profile", "piecewise",
                   "--method", "closed-form", "--from", "0.5", "--to", "3", "--num", "6",
                   "--out", str(out)])
    assert rc == 0
    csvs = sorted(p for p in out.iterdir() if p.suffix == ".csv")
    assert csvs
    data = np.loadtxt(csvs[0], delimiter=",", skiprows=1)
    assert data.shape[0] == 6
    for row in data:
        assert abs(row[1] - bf.locus_d1(row[0])) < 1e-14


def test_identical_configs_are_byte_identical(tmp_path):
    args = ["front", "--d", "1", "--Delta", "1", "--alpha", "0.1"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a.keys() == b.keys() and a == b


def test_csv_uses_17_significant_digits(tmp_path):
    assert cli.main(["front", "--d", "1", "--Delta", "1", "--alpha", "0.1",
                     "--out", str(tmp_path)]) == 0
    csv = next(p for p in tmp_path.iterdir() if p.suffix == ".csv")
    first = csv.read_text().splitlines()[1].split(",")[0]
    mantissa = first.lstrip("-").split("e")[0]
    assert len(mantissa.replace(".", "")) == 17


def test_manifest_checksums(tmp_path):
    assert cli.main(["spectrum", "--d", "1", "--Delta", "1", "--method", "implicit",
                     "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "ok" and man["command"] == "spectrum"
    assert set(man["versions"]) >= {"sgfronts", "numpy", "scipy", "python"}
    assert man["files"]
    for name, digest in man["files"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest


@pytest.mark.parametrize("argv", [
    ["front", "--d", "1", "--Delta", "1", "--alpha", "0.7"],
    ["locus", "--plane", "alpha-delta", "--alpha", "0.2", "--d", "1"],
    ["spectrum", "--d", "2", "--Delta", "1", "--method", "implicit"],
    ["simulate", "--scenario", "pin", "--dt", "0.2", "--dx", "0.1"],
    ["branch", "--d", "1", "--Delta", "1", "--param", "alpha", "--from", "0.1", "--to", "0.1"],
    ["front", "--d", "1", "--Delta", "1", "--no-such-flag", "1"],
    ["nonsense"],
    [],
])
def test_usage_errors_exit_2_without_output(tmp_path, argv, capsys):
    out = tmp_path / "never"
    assert cli.main(argv + ["--out", str(out)]) == 2
    assert not out.exists()
    assert "sgfronts: error:" in capsys.readouterr().err


def test_computation_failure_exit_1(tmp_path, monkeypatch):
    def boom(params, w):
        w.json("partial.json", {"ok": False})
        raise RuntimeError("forced failure")

    monkeypatch.setitem(cli.HANDLERS, "front", boom)
    assert cli.main(["front", "--d", "1", "--Delta", "1", "--out", str(tmp_path)]) == 1
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["error_type"] == "RuntimeError" and err["message"] == "forced failure"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "error"
    assert set(man["files"]) == {"partial.json", "error.json"}


def test_every_recipe_resolves():
    names = cli.recipe_names()
    assert len(names) == 16
    for name in names:
        cfg, opts = cli.resolve(["--config", name])
        assert cfg.command in cli.COMMANDS
        assert opts == {"threads": 1, "verbose": 0}


def test_flags_override_config(tmp_path):
    cfg, _ = cli.resolve(["spectrum", "--config", "kernel_d1", "--Delta", "2"])
    assert cfg.parameters["Delta"] == 2.0
    assert cfg.parameters["alpha"] == 0.1844955761
    custom = tmp_path / "c.json"
    custom.write_text(json.dumps({"command": "front", "parameters": {"d": 1, "Delta": 1, "alpha": 0.2},
                                  "output_dir": str(tmp_path / "x")}))
    cfg, _ = cli.resolve(["--config", str(custom), "--out", str(tmp_path / "y")])
    assert cfg.output_dir == str(tmp_path / "y") and cfg.parameters["alpha"] == 0.2


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(cli.UsageError):
        cli.resolve(["--config", str(bad)])
    bad.write_text(json.dumps({"command": "front", "extra": 1}))
    with pytest.raises(cli.UsageError):
        cli.resolve(["--config", str(bad)])
    with pytest.raises(cli.UsageError):
        cli.resolve(["branch", "--config", "kernel_d1"])
    with pytest.raises(cli.UsageError):
        cli.resolve(["--config", "no_such_recipe"])


def test_docs_map_each_recipe_once():
    import re
    from pathlib import Path

    text = (Path(__file__).resolve().parents[1] / "docs" / "recipes.md").read_text()
    rows = re.findall(r"^\| `([a-z0-9_A-Z]+)` \|", text, flags=re.M)
    assert sorted(rows) == cli.recipe_names()
