import csv
import json
import os

import numpy as np
import pytest

from waveduo.analysis import CONSERVED, EXPONENTIAL
from waveduo.harness import (
    ENERGY_HEADER,
    FORMAT_VERSION,
    ArtifactIOError,
    ExperimentSpec,
    emit_plots,
    load_config,
    load_manifest,
    paper_catalog,
    read_energy_csv,
    run_catalog,
    run_experiment,
    select_cases,
)
from waveduo.model import ValidationError


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_catalog_contents():
    cat = paper_catalog()
    assert len(cat) == 16
    assert all(s.N == 100 and s.cfl_factor == 1.0 and s.initial == "paper" for s in cat)
    keys = {(s.b_spec, s.c_spec, s.a, s.T) for s in cat}
    assert ("b3", "c1", 1.0, 500.0) in keys
    assert ("b4", "c3", 2.0, 500000.0) in keys
    for a in (2.0, 0.5):
        for b, c in (("b4", "c3"), ("b4", "c5"), ("b5", "c4")):
            assert (b, c, a, 500000.0) in keys and (b, c, a, 500.0) in keys
    for b, c in (("b4", "c3"), ("b4", "c5"), ("b5", "c4")):
        assert (b, c, 1.0, 500.0) in keys
    assert len({s.name for s in cat}) == 16
    assert "caption" in next(s for s in cat if s.name == "b5-c4-a2").comment


def test_select_cases():
    assert [s.name for s in select_cases("b3*")] == ["b3-c1-a1"]
    assert len(select_cases(short=True)) == 10
    assert select_cases("nothing*") == []


def test_spec_validation():
    for bad in (dict(T=-1.0), dict(T=float("inf")), dict(stride=0), dict(mode="implicit"), dict(name="a/b")):
        kw = dict(name="x", a=1.0, T=1.0)
        kw.update(bad)
        with pytest.raises(ValidationError):
            ExperimentSpec(**kw)
    with pytest.raises(ValidationError):
        ExperimentSpec.from_dict({"name": "x", "a": 1, "T": 1, "colour": "red"})
    with pytest.raises(ValidationError):
        ExperimentSpec("x", a=1.0, T=1.0, cfl_factor=1.5).elaborate()


def test_spec_dict_roundtrip():
    s = ExperimentSpec("x", a=2.0, T=3.0, b_spec="indicator:0.1-0.3@2", stride=5)
    assert ExperimentSpec.from_dict(s.to_dict()) == s
    assert ExperimentSpec.from_dict({**s.to_dict(), "stride": "auto"}).stride is None


def test_auto_stride_targets_ten_thousand_rows():
    _, _, ts, _, stride = ExperimentSpec("x", a=2.0, T=500000.0).elaborate()
    assert stride == -(-ts.steps // 10000)
    assert ts.steps // stride <= 10000


def test_T0_run(tmp_path):
    m = run_experiment(ExperimentSpec("z", a=1.0, T=0.0, b_spec="b4", c_spec="c3"), tmp_path)
    rows = read_rows(tmp_path / "energy.csv")
    assert tuple(rows[0]) == ENERGY_HEADER and len(rows) == 2
    assert read_rows(tmp_path / "profile_initial.csv") == read_rows(tmp_path / "profile_final.csv")
    assert m.steps == 0 and m.report.classification == CONSERVED


def test_artifacts_and_manifest(tmp_path):
    spec = ExperimentSpec("b4-c3", a=1.0, T=50.0, N=40, b_spec="b4", c_spec="c3", stride=10)
    m = run_experiment(spec, tmp_path)
    prof = read_rows(tmp_path / "profile_final.csv")
    assert prof[0] == ["x", "u", "y"] and len(prof) == 1 + 42
    assert prof[1][1:] == ["0.0", "0.0"] and prof[-1][1:] == ["0.0", "0.0"]
    rows = read_rows(tmp_path / "energy.csv")
    assert len(rows) - 1 == len(range(0, m.steps + 1, 10)) + (m.steps % 10 != 0)
    first = rows[1]
    assert first[0] == "0.0" and first[6] == "" and first[8] == ""  # absent diagnostics
    d = json.loads((tmp_path / "manifest.json").read_text())
    assert d["format_version"] == FORMAT_VERSION
    assert d["spec"]["b_spec"] == "b4" and d["report"]["classification"] == m.report.classification
    assert load_manifest(tmp_path).spec == spec
    t, E = read_energy_csv(tmp_path / "energy.csv")
    assert E[0] == m.E0 and E[-1] == m.E_final
    assert t[-1] == pytest.approx(m.steps * m.dt, rel=1e-15)


def test_manifest_replay_is_bit_identical(tmp_path):
    spec = ExperimentSpec("r", a=2.0, T=20.0, N=50, b_spec="b5", c_spec="c4")
    run_experiment(spec, tmp_path / "one")
    replay = load_config(tmp_path / "one" / "manifest.json")
    run_experiment(replay, tmp_path / "two")
    for name in ("energy.csv", "profile_final.csv", "profile_initial.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    m1 = json.loads((tmp_path / "one" / "manifest.json").read_text())
    m2 = json.loads((tmp_path / "two" / "manifest.json").read_text())
    m1.pop("wall_clock_s"), m2.pop("wall_clock_s")
    assert m1 == m2


def test_stride_soundness(tmp_path):
    base = dict(a=0.5, T=10.0, N=30, b_spec="b4", c_spec="c5")
    run_experiment(ExperimentSpec("s1", stride=1, **base), tmp_path / "s1")
    run_experiment(ExperimentSpec("s7", stride=7, **base), tmp_path / "s7")
    fine = {r[0]: r for r in read_rows(tmp_path / "s1" / "energy.csv")[1:]}
    coarse = read_rows(tmp_path / "s7" / "energy.csv")[1:]
    assert len(coarse) < len(fine)
    for r in coarse:
        assert fine[r[0]] == r


def test_check_dissipation_keeps_rows(tmp_path):
    base = dict(a=1.0, T=20.0, N=40, b_spec="b4", c_spec="c3", stride=25)
    plain = run_experiment(ExperimentSpec("p", **base), tmp_path / "p")
    checked = run_experiment(ExperimentSpec("c", check_dissipation=True, **base), tmp_path / "c")
    assert checked.max_residual <= 1e-12 and checked.max_increase <= 1e-12
    assert plain.max_residual is None
    assert (tmp_path / "p" / "energy.csv").read_bytes() == (tmp_path / "c" / "energy.csv").read_bytes()


def test_known_classifications(tmp_path):
    cons = run_experiment(ExperimentSpec("b3-c1", a=1.0, T=500.0, b_spec="b3", c_spec="c1"), tmp_path / "a")
    expo = run_experiment(ExperimentSpec("b4-c3", a=1.0, T=500.0, b_spec="b4", c_spec="c3"), tmp_path / "b")
    assert cons.report.classification == CONSERVED
    assert expo.report.classification == EXPONENTIAL


def test_reference_mode_runs(tmp_path):
    m = run_experiment(ExperimentSpec("ref", a=1.0, T=1.0, N=20, b_spec="b4", c_spec="c3",
                                      mode="reference_solve"), tmp_path)
    q = run_experiment(ExperimentSpec("cf", a=1.0, T=1.0, N=20, b_spec="b4", c_spec="c3"), tmp_path / "q")
    assert m.E_final == pytest.approx(q.E_final, rel=1e-12)


def test_emit_plots_is_idempotent(tmp_path):
    run_experiment(ExperimentSpec("p", a=2.0, T=5.0, N=20, b_spec="b4", c_spec="c3"), tmp_path)
    paths = emit_plots(tmp_path)
    assert len(paths) == 5
    first = {p.name: p.read_bytes() for p in paths}
    second = {p.name: p.read_bytes() for p in emit_plots(tmp_path)}
    assert first == second
    for name, body in first.items():
        text = body.decode()
        assert "set terminal svg" in text and "/" not in text.split("plot", 1)[1].split("'")[1]
    assert b"using 1:9" in first["exponent.gp"]


def test_emit_plots_reports_missing_inputs(tmp_path):
    with pytest.raises(ArtifactIOError) as info:
        emit_plots(tmp_path)
    assert "manifest.json" in info.value.path


def test_read_energy_csv_errors(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text(",".join(ENERGY_HEADER) + "\n1.0,2.0,,,,,,\n")
    with pytest.raises(ValueError, match="row 2"):
        read_energy_csv(p)
    p.write_text("t,E\n1,2\n")
    with pytest.raises(ValueError, match="row 1"):
        read_energy_csv(p)
    p.write_text(",".join(ENERGY_HEADER) + "\n1.0,x,,,,,,,\n")
    with pytest.raises(ValueError, match="row 2"):
        read_energy_csv(p)
    with pytest.raises(ArtifactIOError):
        read_energy_csv(tmp_path / "absent.csv")


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_directory(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    with pytest.raises(ArtifactIOError):
        run_experiment(ExperimentSpec("x", a=1.0, T=0.1, N=5), ro / "run")


def test_output_path_blocked_by_file(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ArtifactIOError) as info:
        run_experiment(ExperimentSpec("x", a=1.0, T=0.1, N=5), blocker / "run")
    assert "file" in info.value.path


def test_run_catalog_parallel_matches_serial(tmp_path):
    specs = [ExperimentSpec(f"k{i}", a=a, T=2.0, N=20, b_spec="b4", c_spec="c3")
             for i, a in enumerate((1.0, 2.0, 0.5))]
    serial = run_catalog(specs, tmp_path / "s", workers=1)
    par = run_catalog(specs, tmp_path / "p", workers=2)
    assert [m.spec.name for m in par] == [s.name for s in specs]
    for s in specs:
        assert (tmp_path / "s" / s.name / "energy.csv").read_bytes() == \
            (tmp_path / "p" / s.name / "energy.csv").read_bytes()
        assert (tmp_path / "p" / s.name / "energy.gp").is_file()
    assert [m.E_final for m in serial] == [m.E_final for m in par]
