import pytest

from l1nmpc.cli import EXIT_CONFIG, EXIT_CRASH, EXIT_IO, EXIT_OK, main
from l1nmpc.harness.report import METRIC_COLUMNS


@pytest.fixture
def scenario_file(tmp_path):
    p = tmp_path / "short.yaml"
    p.write_text("name: short\ncontroller: nmpc\ntrajectory:\n  circle:\n"
                 "    duration: 0.2\n    ramp_time: 0.1\n")
    return p


def test_run_ok(tmp_path, scenario_file):
    out = tmp_path / "out"
    assert main(["run", str(scenario_file), "--out", str(out), "--quiet"]) == EXIT_OK
    assert (out / "metrics.csv").read_text().splitlines()[0] == ",".join(METRIC_COLUMNS)
    assert (out / "short__nmpc__v2.5.csv").exists()


def test_run_crash(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("controller: nmpc\nsim:\n  crash_distance: 1.0e-9\n"
                 "trajectory:\n  circle:\n    duration: 0.2\n")
    assert main(["run", str(p), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_CRASH


def test_config_errors(tmp_path, scenario_file):
    bad = tmp_path / "bad.yaml"
    bad.write_text("vehicle:\n  wings: 2\n")
    assert main(["run", str(bad), "--quiet"]) == EXIT_CONFIG
    assert main(["bogus"]) == EXIT_CONFIG
    assert main(["sweep", str(scenario_file), "--speeds", "2,x", "--quiet"]) == EXIT_CONFIG
    assert main(["compare", str(scenario_file), "--controllers", "pid", "--quiet"]) == EXIT_CONFIG


def test_io_errors(tmp_path, scenario_file):
    assert main(["run", str(tmp_path / "missing.yaml"), "--quiet"]) == EXIT_IO
    assert main(["report", str(tmp_path / "nothing"), "--quiet"]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", str(scenario_file), "--out", str(blocker / "x"), "--quiet"]) == EXIT_IO


def test_sweep_compare_report(tmp_path, scenario_file, capsys):
    out = tmp_path / "sweep"
    assert main(["sweep", str(scenario_file), "--speeds", "2.5,4", "--controllers", "nmpc,l1_nmpc",
                 "--out", str(out)]) == EXIT_OK
    assert "l1_nmpc" in capsys.readouterr().out
    rows = (out / "metrics.csv").read_text().splitlines()
    assert len(rows) == 5
    before = (out / "metrics.csv").read_bytes()
    assert main(["report", str(out), "--quiet"]) == EXIT_OK
    assert (out / "metrics.csv").read_bytes() == before

    cmp_out = tmp_path / "cmp"
    assert main(["compare", str(scenario_file), "--out", str(cmp_out), "--quiet"]) == EXIT_OK
    assert len((cmp_out / "metrics.csv").read_text().splitlines()) == 4


def test_seed_flag(tmp_path):
    p = tmp_path / "noisy.yaml"
    p.write_text("controller: nmpc\nsim:\n  measurement_noise_std: 0.001\n"
                 "trajectory:\n  circle:\n    duration: 0.1\n")
    logs = []
    for seed, name in ((1, "a"), (1, "b"), (2, "c")):
        assert main(["run", str(p), "--seed", str(seed), "--out", str(tmp_path / name),
                     "--quiet"]) == EXIT_OK
        logs.append((tmp_path / name / "noisy__nmpc__v2.5.csv").read_bytes())
    assert logs[0] == logs[1] and logs[0] != logs[2]


def test_sweep_rejects_hover(tmp_path):
    p = tmp_path / "h.yaml"
    p.write_text("trajectory:\n  type: hover\n")
    assert main(["sweep", str(p), "--quiet"]) == EXIT_CONFIG


def test_internal_failure_exits_2(tmp_path, scenario_file, monkeypatch):
    from l1nmpc.harness import report as rep

    def boom(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setattr(rep, "write_report", boom)
    assert main(["run", str(scenario_file), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_CRASH
