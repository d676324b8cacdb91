import csv
import json

import pytest

from conftest import faulty_config
from gridcheck import cli
from gridcheck.experiments import COLUMNS, SweepError, SweepKind, SweepReport, SweepSpec, emit, run_sweep, stats_path, worker_count


def tiny_spec(**kw):
    base = faulty_config(**{"gridlets.length_max": 10000.0})
    args = dict(kind=SweepKind.VARY_GRIDLETS, fixed_count=4, start=10, end=30, step=10, seeds=(1, 2), base=base)
    args.update(kw)
    return SweepSpec(**args)


def test_canonical_grids():
    g = SweepSpec.canonical("gridlets")
    assert g.points() == list(range(100, 3701, 400)) and len(g.points()) == 10
    assert g.fixed_count == 100
    r = SweepSpec.canonical("resources")
    assert len(r.points()) == 16 and r.points()[-1] == 3050 and r.fixed_count == 3000
    assert SweepSpec.canonical("resources", end=1050).points() == [50, 250, 450, 650, 850, 1050]
    assert g.seeds == tuple(range(1, 11))


@pytest.mark.parametrize("kw", [dict(start=5, end=4), dict(step=0), dict(seeds=())])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        tiny_spec(**kw)


def test_points_map_onto_counts():
    spec = tiny_spec(kind=SweepKind.VARY_RESOURCES, fixed_count=40)
    cfg = spec.config_for(10, 3, spec.base.policy)
    assert (cfg.resources.count, cfg.gridlets.count, cfg.seed) == (10, 40, 3)


def test_sweep_rows_and_pairing():
    report = run_sweep(tiny_spec(), workers=0)
    assert [r.sweep_var for r in report.rows] == [10, 20, 30]
    assert len(report.runs) == 3 * 2 * 2
    assert len(report.per_seed) == 6
    for a, b in zip(report.runs[::2], report.runs[1::2]):
        assert (a["point"], a["seed"], a["policy"], b["policy"]) == (b["point"], b["seed"], "baseline", "adaptive")


def test_single_point_single_seed_deterministic(tmp_path):
    spec = tiny_spec(start=20, end=20, seeds=(4,))
    paths = []
    for i in range(2):
        path = tmp_path / f"s{i}.csv"
        emit(run_sweep(spec, workers=0), "csv", path)
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert stats_path(paths[0]).read_bytes() == stats_path(paths[1]).read_bytes()
    assert len(paths[0].read_text().splitlines()) == 2


def test_worker_count_does_not_change_output(tmp_path):
    spec = tiny_spec()
    emit(run_sweep(spec, workers=0), "csv", tmp_path / "a.csv")
    emit(run_sweep(spec, workers=2), "csv", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_emit_columns_and_sidecar(tmp_path):
    report = run_sweep(tiny_spec(), workers=0)
    path = tmp_path / "out.csv"
    emit(report, "csv", path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == COLUMNS
    assert len(rows) == 4
    assert rows[1][-1] == "1;2"
    side = json.loads(stats_path(path).read_text())
    assert len(side["runs"]) == 12 and side["kind"] == "gridlets"

    emit(report, "json", tmp_path / "out.json")
    doc = json.loads((tmp_path / "out.json").read_text())
    assert doc["columns"] == COLUMNS and len(doc["rows"]) == 3


def test_empty_report_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    emit(SweepReport(SweepKind.VARY_GRIDLETS, [], [], {}), "csv", path)
    assert path.read_text() == ",".join(COLUMNS) + "\n"


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit(SweepReport(SweepKind.VARY_GRIDLETS, [], [], {}), "csv", tmp_path / "missing" / "x.csv")


def test_worker_env(monkeypatch):
    monkeypatch.setenv("GRIDCHECK_WORKERS", "0")
    assert worker_count() == 0
    monkeypatch.setenv("GRIDCHECK_WORKERS", "-2")
    with pytest.raises(ValueError):
        worker_count()


def test_invariant_violation_names_point_and_seed():
    doomed = {"faults.permanent_resources": 0, "faults.repair_delay": float("inf"), "faults.mean_time_to_failure": 1.0}
    spec = tiny_spec(base=faulty_config(**doomed))
    with pytest.raises(SweepError) as err:
        run_sweep(spec, workers=0)
    assert (err.value.point, err.value.seed) == (10, 1)


# ------------------------------------------------------------------ CLI


def write_config(tmp_path, doc):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_cli_validate_defaults(capsys):
    assert cli.main(["validate", "--config", "defaults"]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_validate_rejects_bad_config(tmp_path, capsys):
    path = write_config(tmp_path, {"resources": {"mips_per_pe": 0}})
    assert cli.main(["validate", "--config", path]) == 1
    assert "resources.mips_per_pe" in capsys.readouterr().err


def test_cli_unknown_flag():
    with pytest.raises(SystemExit) as err:
        cli.main(["run", "--frobnicate"])
    assert err.value.code != 0


def test_cli_run_twice_identical(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        trace = tmp_path / f"t{i}.tsv"
        assert cli.main(["run", "--seed", "7", "--out", str(out), "--trace", str(trace)]) == 0
        outs.append((out.read_bytes(), trace.read_bytes()))
    assert outs[0] == outs[1]
    summary = json.loads(outs[0][0])
    assert summary["seed"] == 7 and summary["n_jobs"] == 100
    first = outs[0][1].decode().splitlines()[0].split("\t")
    assert first[1] == "Dispatch"


def test_cli_run_csv_and_policy(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["run", "--policy", "baseline", "--format", "csv", "--fixed-length", "1000", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert rows[0]["policy"] == "baseline"


def test_cli_sweep(tmp_path, monkeypatch):
    monkeypatch.setenv("GRIDCHECK_WORKERS", "0")
    cfg = write_config(tmp_path, {"gridlets": {"length_max": 5000.0}})
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--config", cfg, "--kind", "gridlets", "--seeds", "1", "--end", "500", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",") == COLUMNS
    assert [line.split(",")[0] for line in lines[1:]] == ["100", "500"]
    assert stats_path(out).exists()


def test_cli_sweep_bad_seeds(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["sweep", "--kind", "gridlets", "--seeds", "a,b", "--out", str(tmp_path / "x.csv")])
