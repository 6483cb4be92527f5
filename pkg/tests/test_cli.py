import csv
import io
import json

import pytest

from hessosc.cli import Config, build_parser, run
from hessosc.polyphase import dump_phase


def _call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def phases(tmp_path, cusp, cubic):
    paths = {}
    for name, P in (("cusp", cusp), ("cubic", cubic)):
        paths[name] = str(tmp_path / f"{name}.json")
        dump_phase(P, paths[name])
    return paths


def test_analyze_cusp(capsys, phases):
    code, out, _ = _call(capsys, "analyze", "--phase", phases["cusp"])
    assert code == 0
    rep = json.loads(out)
    assert [tuple(v) for v in rep["vertices"]] == [(0, 2), (4, 0)]
    assert rep["s"] == 0
    (edge,) = rep["edges"]
    assert edge["folds"]["off-axes"]["verdict"] == "violation"
    assert edge["folds"]["off-axes"]["witnesses"]


def test_integrate_matches_scan_cell(capsys, phases, tmp_path):
    code, out, _ = _call(capsys, "integrate", "--phase", phases["cubic"],
                         "--lambda", "256", "--eps", "0.0625")
    assert code == 0
    one = json.loads(out)
    assert set(one) >= {"re", "im", "abs", "est_error", "nodes_used"}
    fit_path = tmp_path / "fit.json"
    code, out, _ = _call(capsys, "scan", "--phase", phases["cubic"], "--lambda-exp-min", "8",
                         "--lambda-exp-max", "8", "--eps-exp-min", "4", "--eps-exp-max", "4",
                         "--xi-grid", "5", "--refinements", "0", "--fit-out", str(fit_path))
    assert code == 0
    (row,) = list(csv.DictReader(io.StringIO(out)))
    # the fit needs a span of lambda and eps, so a single cell reports an error
    assert "error" in json.loads(fit_path.read_text())
    xi = f"{row['xi1']},{row['xi2']}"
    code, out, _ = _call(capsys, "integrate", "--phase", phases["cubic"],
                         "--lambda", "256", "--eps", "0.0625", "--xi", xi)
    cell = json.loads(out)
    assert cell["abs"] == pytest.approx(float(row["absval"]), rel=1e-6)


def test_unknown_subcommand(capsys):
    assert _call(capsys, "bogus")[0] == 2


def test_malformed_phase_file(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dimension": 2,\n  "terms": [}')
    code, _, err = _call(capsys, "analyze", "--phase", str(bad))
    assert code == 2
    assert "line 2" in err


def test_unknown_config_key(capsys, phases, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("tol = 1e-6\nbogus_key = 3\n")
    code, _, err = _call(capsys, "analyze", "--phase", phases["cusp"], "--config", str(cfg))
    assert code == 2 and "bogus_key" in err


def test_budget_exit_code(capsys, phases):
    code, _, err = _call(capsys, "integrate", "--phase", phases["cubic"],
                         "--lambda", "1e5", "--eps", "0.25")
    assert code == 3 and "budget" in err


def test_identical_runs_are_bit_identical(capsys, phases):
    argv = ("integrate", "--phase", phases["cusp"], "--lambda", "64", "--eps", "0.25", "--xi", "0.1,-0.2")
    first = _call(capsys, *argv)
    second = _call(capsys, *argv)
    assert first == second and first[0] == 0


def test_boxes_and_vdc_check(capsys, phases):
    code, out, _ = _call(capsys, "boxes", "--phase", phases["cusp"], "--j-max", "6", "--eps", "0.01")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows and {r["kind"] for r in rows} <= {"vertex", "edge", "negligible"}
    code, out, _ = _call(capsys, "vdc-check", "--family", "fresnel", "--t-points", "3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 3
    assert all(float(r["ratio"]) <= 1 for r in rows)


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# experiment\ntol = 1e-6\nxi_grid = 9   # coarse\n")
    base = Config.from_file(cfg)
    assert base.tol == 1e-6 and base.xi_grid == 9 and base.j_max == Config().j_max
    assert base.updated({"xi-grid": "5"}).xi_grid == 5
    with pytest.raises(ValueError):
        base.updated({"xi_grid": "2.5"})


def test_help_lists_config_defaults(capsys):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    assert set(sub) == {"analyze", "integrate", "expand", "foldcurve", "vdc-check", "scan", "boxes"}
    for name, p in sub.items():
        text = p.format_help()
        for field, default in (("tol", Config.tol), ("j-max", Config.j_max), ("threads", Config.threads)):
            assert f"--{field}" in text
            assert repr(default) in text, (name, field)
