import csv
import json
import shutil
import subprocess
import sys

import pytest

from transversality.cli import CSV_COLUMNS, ManifestError, RunManifest, main
from transversality.constants import KINDS
from transversality.scene import corpus_dir

SMALL = ["--radii", "0.5,0.5,3", "--samples", "300"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def scene_dir(tmp_path):
    def make(*ids):
        d = tmp_path / "scenes"
        d.mkdir(exist_ok=True)
        for sid in ids:
            shutil.copy(corpus_dir() / f"{sid}.json", d)
        return d

    return make


class TestEstimate:
    def test_str_only_identical(self, scene_dir, tmp_path):
        d = scene_dir("identical_halfplanes")
        code = main(["estimate", "--scenes", str(d), "--constants", "str", "--out", str(tmp_path / "o"), *SMALL])
        assert code == 0
        rows = read_csv(tmp_path / "o" / "estimates.csv")
        assert len(rows) == 1 and rows[0]["constant"] == "str" and float(rows[0]["estimate"]) == 1.0
        assert rows[0]["feasible_count"] == "0" and rows[0]["empty_feasible"] == "True"

    def test_report_contents(self, scene_dir, tmp_path):
        d = scene_dir("lines_pi_3")
        main(["estimate", "--scenes", str(d), "--constants", "str,itr_c", "--seed", "7",
              "--out", str(tmp_path / "o"), *SMALL])
        rep = json.loads((tmp_path / "o" / "lines_pi_3.json").read_text())
        assert rep["seed"] == 7 and rep["schedule"]["seed"] == 7
        assert set(rep["estimates"]) == {"str", "itr_c"}
        assert all(r["seed"] == "7" for r in read_csv(tmp_path / "o" / "estimates.csv"))
        assert json.loads((tmp_path / "o" / "manifest.json").read_text())["seed"] == 7
        radius_rows = read_csv(tmp_path / "o" / "per_radius.csv")
        assert len(radius_rows) == 2 * 3

    def test_malformed_scene(self, scene_dir, tmp_path, capsys):
        d = scene_dir("perpendicular_axes")
        (d / "broken.json").write_text('{"A": {"type": "line"}, "B": ')
        assert main(["estimate", "--scenes", str(d), "--out", str(tmp_path / "o"), *SMALL]) == 2
        assert "broken" in capsys.readouterr().err

    def test_xbar_outside_set(self, scene_dir, tmp_path):
        d = scene_dir()
        doc = json.loads((corpus_dir() / "perpendicular_axes.json").read_text())
        doc["xbar"] = [1.0, 1.0]
        (d / "off.json").write_text(json.dumps(doc))
        assert main(["estimate", "--scenes", str(d), "--out", str(tmp_path / "o"), *SMALL]) == 2

    def test_unknown_constant(self, tmp_path):
        assert main(["estimate", "--constants", "itr,bogus", "--out", str(tmp_path), *SMALL]) == 2

    def test_bad_radii_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["estimate", "--radii", "0.5,0.5"])
        assert exc.value.code == 2

    def test_ordering_failure_exit_code(self, scene_dir, tmp_path, monkeypatch):
        import transversality.cli as cli

        d = scene_dir("perpendicular_axes")
        real = cli._estimate_task

        def skewed(args):
            out = real(args)
            if out["kind"] == "tr":
                out["extrapolated"] = 0.99
            return out

        monkeypatch.setattr(cli, "_estimate_task", skewed)
        code = main(["estimate", "--scenes", str(d), "--constants", "tr,itr", "--out", str(tmp_path), *SMALL])
        assert code == 1

    def test_full_corpus(self, estimate_runs):
        code, out = estimate_runs[1]
        assert code == 0
        rows = read_csv(out / "estimates.csv")
        assert len(rows) == 6 * len(KINDS)
        assert list(rows[0]) == list(CSV_COLUMNS)


class TestManifest:
    def test_empty_manifest_exit_2(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps({"scenes": []}))
        assert main(["verify", "--manifest", str(tmp_path / "m.json"), "--out", str(tmp_path)]) == 2
        assert main(["estimate", "--manifest", str(tmp_path / "m.json"), "--out", str(tmp_path)]) == 2

    def test_empty_directory_exit_2(self, tmp_path):
        (tmp_path / "none").mkdir()
        assert main(["estimate", "--scenes", str(tmp_path / "none"), "--out", str(tmp_path)]) == 2

    def test_relative_paths_and_schedule(self, scene_dir, tmp_path):
        scene_dir("lines_pi_3")
        m = tmp_path / "m.json"
        m.write_text(json.dumps({"scenes": ["scenes/lines_pi_3.json"], "constants": ["str"], "seed": 3,
                                 "schedule": {"delta0": 0.5, "factor": 0.5, "count": 3,
                                              "samples_per_radius": 300}}))
        man = RunManifest.from_file(m)
        assert man.scenes[0].is_file() and man.schedule.seed == 3 and len(man.schedule.radii) == 3
        assert main(["estimate", "--manifest", str(m), "--out", str(tmp_path / "o")]) == 0

    def test_bad_schedule(self, tmp_path):
        m = tmp_path / "m.json"
        m.write_text(json.dumps({"scenes": ["x.json"], "schedule": {"radii": [0.1, 0.2]}}))
        with pytest.raises(ManifestError):
            RunManifest.from_file(m)

    def test_not_json(self, tmp_path):
        (tmp_path / "m.json").write_text("scenes: all")
        assert main(["estimate", "--manifest", str(tmp_path / "m.json")]) == 2


class TestVerify:
    def test_default_corpus(self, tmp_path):
        code = main(["verify", "--count", "10000", "--out", str(tmp_path)])
        assert code == 0
        rep = json.loads((tmp_path / "verify.json").read_text())
        assert rep["passed"] and rep["constructions"]["failing_links"] == []
        assert all(c["count"] == 10000 for c in rep["constructions"]["chain"])
        assert len(read_csv(tmp_path / "cones.csv")) == 6

    def test_injected_fault(self, tmp_path, capsys):
        code = main(["verify", "--suite", "constructions", "--count", "200",
                     "--inject-fault", "negated-bisector", "--out", str(tmp_path)])
        assert code == 1
        err = capsys.readouterr().err
        assert "FAIL construction link: equidistance" in err
        assert "equidistance" in json.loads((tmp_path / "verify.json").read_text())["constructions"]["failing_links"]

    def test_unknown_fault_rejected(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--inject-fault", "nonsense"])
        assert exc.value.code == 2


class TestAP:
    def test_perpendicular(self, capsys, tmp_path):
        code = main(["ap", "--scene", str(corpus_dir() / "perpendicular_axes.json"), "--x0", "1,1",
                     "--csv", str(tmp_path / "t.csv")])
        out = json.loads(capsys.readouterr().out)
        assert code == 0 and out["converged"] and out["limit"] == [0.0, 0.0]
        assert (tmp_path / "t.csv").read_text().startswith("step,label,x0,x1,residual")

    def test_lines_rate(self, capsys):
        main(["ap", "--scene", str(corpus_dir() / "lines_pi_3.json"), "--x0", "0.3,0.9",
              "--iters", "12", "--tol", "0"])
        assert json.loads(capsys.readouterr().out)["rate"] == pytest.approx(0.25, rel=1e-9)

    def test_not_converged(self, capsys):
        code = main(["ap", "--scene", str(corpus_dir() / "tangential_parabola.json"), "--x0", "0.05,-0.05",
                     "--iters", "5"])
        assert code == 1 and not json.loads(capsys.readouterr().out)["converged"]

    def test_missing_scene(self, tmp_path):
        assert main(["ap", "--scene", str(tmp_path / "nope.json"), "--x0", "1,1"]) == 2

    def test_wrong_dimension(self):
        assert main(["ap", "--scene", str(corpus_dir() / "lines_pi_3.json"), "--x0", "1,1,1"]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "transversality", "ap", "--scene",
                           str(corpus_dir() / "perpendicular_axes.json"), "--x0", "2,3"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0 and json.loads(proc.stdout)["converged"]
