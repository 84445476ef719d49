import json

import numpy as np
import pytest

from traitevo.cli import EXIT_AUDIT, EXIT_CONFIG, EXIT_OK, main
from traitevo.config import load_config
from traitevo.experiments import execute, fit_slope
from traitevo.metrics import MomentRecord
from traitevo.output import DENSITY_FIELDS, SCALING_FIELDS, csv_text, write_run
from traitevo.plotting import read_csv
from traitevo.theory import TheoryTrajectory

SHORT = """
[scenario]
name = short
model = predator_prey_reduced
epsilon = 0.2
horizon = 2
snapshot_times = 1, 2
"""


@pytest.fixture
def short_cfg(tmp_path):
    p = tmp_path / "short.ini"
    p.write_text(SHORT)
    return p


def header(path):
    return path.read_text().splitlines()[0].split(",")


def test_csv_text_uses_17_digits():
    text = csv_text(["a", "b"], [[0.1, "ok"]])
    assert text == "a,b\n0.10000000000000001,ok\n"


def test_run_outputs_schema_and_manifest(short_cfg, tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--config", str(short_cfg), "--out", str(out)]) == EXIT_OK
    assert header(out / "moments.csv") == MomentRecord.field_names()
    assert header(out / "theory.csv") == TheoryTrajectory.field_names()
    for t in ("1", "2"):
        assert header(out / f"density_t{t}.csv") == list(DENSITY_FIELDS)
    man = json.loads((out / "manifest.json").read_text())
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert set(man["files"]) == on_disk
    assert {"fig_density.png", "fig_trajectories.png", "render.py",
            "resolved_config.ini"} <= on_disk
    assert man["audit"]["passed"] and man["status"] == "ok"
    m = read_csv(out / "moments.csv")
    assert m["time"][-1] == pytest.approx(2.0)


def test_render_script_reads_only_manifest_files(short_cfg, tmp_path):
    import subprocess
    import sys
    out = tmp_path / "run"
    main(["run", "--config", str(short_cfg), "--out", str(out)])
    (out / "fig_density.png").unlink()
    (out / "stray.csv").write_text("x\n1\n")
    subprocess.run([sys.executable, str(out / "render.py"), str(out)], check=True)
    assert (out / "fig_density.png").exists()
    src = (out / "render.py").read_text()
    assert "import traitevo" not in src and "from traitevo" not in src


def test_byte_identical_reruns(short_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", str(short_cfg), "--out", str(a)])
    main(["run", "--config", str(a / "resolved_config.ini"), "--out", str(b)])
    for name in ("moments.csv", "theory.csv", "density_t1.csv", "density_t2.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_malformed_config_no_outputs(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nepsilon = nope\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(bad), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    assert main(["run"]) == EXIT_CONFIG


def test_audit_failure_exit_code(tmp_path):
    p = tmp_path / "steep.ini"
    p.write_text("[scenario]\nmodel = single_species\nhorizon = 0.5\n[single]\ncurvature = 0.5\n")
    assert main(["audit", "--config", str(p)]) == EXIT_AUDIT
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_AUDIT
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o"), "--force"]) == EXIT_OK


def test_audit_and_list_verbs(capsys):
    assert main(["audit", "--config", "paper_fig12_eps02"]) == EXIT_OK
    assert "[PASS] A5" in capsys.readouterr().out
    assert main(["list-scenarios"]) == EXIT_OK
    assert "paper_fig12_eps01" in capsys.readouterr().out
    assert main(["acceptance", "--list"]) == EXIT_OK
    assert len(capsys.readouterr().out.strip().splitlines()) == 10


def test_sweep_single_epsilon_has_no_slope(tmp_path):
    p = tmp_path / "one.ini"
    p.write_text(SHORT + "[sweep]\nepsilons = 0.2\n")
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(p), "--out", str(out)]) == EXIT_OK
    s = read_csv(out / "scaling.csv")
    assert header(out / "scaling.csv") == list(SCALING_FIELDS)
    assert s["epsilon"].size == 1 and not (out / "slopes.csv").exists()
    assert (out / "eps_0.2" / "moments.csv").exists()


def test_sweep_isolates_failing_member(tmp_path):
    # a fixed step that is stable at eps = 0.4 and 0.2 but not at 0.1
    p = tmp_path / "mixed.ini"
    p.write_text(SHORT + "[scheme]\ndt = 0.02\nallow_large_dt = true\n"
                 "[sweep]\nepsilons = 0.4, 0.2, 0.1\n")
    out = tmp_path / "sw"
    code = main(["sweep", "--config", str(p), "--out", str(out), "--threads", "2"])
    assert code == 4
    s = read_csv(out / "scaling.csv")
    assert list(s["status"]) == ["ok", "ok", "numerical_error"]
    slopes = read_csv(out / "slopes.csv")
    assert np.all(slopes["n_points"] == 2)


def test_sweep_member_directories_reproduce(tmp_path):
    p = tmp_path / "two.ini"
    p.write_text(SHORT + "[sweep]\nepsilons = 0.4, 0.2\n")
    main(["sweep", "--config", str(p), "--out", str(tmp_path / "a"), "--threads", "2"])
    main(["sweep", "--config", str(p), "--out", str(tmp_path / "b")])
    for name in ("scaling.csv", "slopes.csv", "eps_0.4/moments.csv", "eps_0.2/theory.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fit_slope():
    eps = np.array([0.4, 0.2, 0.1])
    assert fit_slope(eps, 3 * eps ** 1.5) == pytest.approx(1.5)
    assert np.isnan(fit_slope([0.2], [1.0]))
    assert fit_slope([0.4, 0.2, 0.1], [np.nan, 0.2, 0.1]) == pytest.approx(1.0)


def test_write_run_directly(tmp_path):
    res = execute(load_config("single_species").with_epsilon(0.2))
    man = write_run(res, tmp_path / "s", figures=False)
    assert "fig_density.png" not in man["files"]
    assert man["summary"]["status"] == "ok"


def test_prey_sweep_w1_slope(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", "predator_prey_sweep", "--out", str(out),
                 "--threads", "3"]) == EXIT_OK
    s = read_csv(out / "slopes.csv")
    slope = dict(zip(s["metric"], s["slope"]))
    assert slope["terminal_w1"] >= 0.8
    assert (out / "fig_scaling.png").exists()
