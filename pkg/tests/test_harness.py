import json
import math
import subprocess
import sys

import numpy as np
import pytest

from prophetlab import cli, harness
from prophetlab.errors import CapacityError, DomainError
from prophetlab.gaps import LemmaVerdict
from prophetlab.harness import (
    ExperimentConfig,
    RunSummary,
    generate_instance,
    instance_from_json,
    instance_to_json,
    parse_spec,
    read_trials_csv,
    run_experiment,
    trial_seed,
)
from prophetlab.prophet import ProphetInstance
from prophetlab.secretary import SecretaryInstance
from prophetlab.setfn import is_monotone, is_subadditive, is_submodular, multilinear_exact


class TestGenerate:
    def test_cut(self):
        f = generate_instance("cut-digraph n=6 density=0.4", 1)
        assert f.n == 6 and is_submodular(f)

    def test_coverage(self):
        f = generate_instance("coverage n=8 sets=5", 2)
        assert is_submodular(f) and is_monotone(f)

    def test_unit(self):
        f = generate_instance("unit-subadditive n=6", 0)
        assert is_monotone(f) and is_subadditive(f)
        assert f.value(0) == 0 and f.value(0b101) == 1

    @pytest.mark.parametrize("spec", ["xos n=7", "additive n=5", "steps n=6 k=2", "mixture n=6",
                                      "budget-additive n=6"])
    def test_other_families(self, spec):
        f = generate_instance(spec, 3)
        assert is_monotone(f) or spec.startswith("mixture")

    def test_prophet_and_secretary(self):
        assert isinstance(generate_instance("prophet days=3 per_day=2", 0), ProphetInstance)
        inst = generate_instance("secretary n=64", 0)
        assert isinstance(inst, SecretaryInstance) and inst.n == 64

    def test_caps(self):
        with pytest.raises(CapacityError):
            generate_instance("coverage n=30", 0)
        with pytest.raises(CapacityError):
            generate_instance("prophet days=8 per_day=3", 0)
        with pytest.raises(CapacityError):
            generate_instance("secretary n=65", 0)

    def test_unknown(self):
        with pytest.raises(DomainError):
            generate_instance("nope n=3", 0)
        with pytest.raises(DomainError):
            parse_spec("coverage n")

    def test_deterministic(self):
        a = instance_to_json(generate_instance("prophet days=4 per_day=2", 7))
        b = instance_to_json(generate_instance("prophet days=4 per_day=2", 7))
        assert a == b

    def test_json_round_trip(self):
        for spec in ("prophet days=3 per_day=3", "secretary n=20", "coverage n=5"):
            obj = generate_instance(spec, 5)
            doc = json.loads(json.dumps(instance_to_json(obj)))
            assert instance_to_json(instance_from_json(doc)) == instance_to_json(obj)


def test_trial_seed():
    assert trial_seed(1, 2) == trial_seed(1, 2)
    assert len({trial_seed(0, t) for t in range(1000)}) == 1000
    assert trial_seed(0, 1) != trial_seed(1, 0)


class TestRunExperiment:
    def test_ratio_consistency(self, tmp_path):
        cfg = ExperimentConfig("prophet", generator="prophet days=3 per_day=2", trials=300, seed=4,
                               order="random", out_dir=str(tmp_path))
        s = run_experiment(cfg)
        rows = read_trials_csv(tmp_path / "prophet_trials.csv")
        assert len(rows) == 300
        assert list(rows[0]) == ["config_hash", "seed", "order_id", "value", "opt_value", "|W|"]
        vals = [float(r["value"]) for r in rows]
        opt = float(rows[0]["opt_value"])
        doc = json.loads((tmp_path / "prophet_summary.json").read_text())
        assert abs(opt / np.mean(vals) - doc["ratio"]) <= 1e-12
        assert doc["config_hash"] == rows[0]["config_hash"] == cfg.config_hash
        assert s.ratio >= 1 - 3 * s.ratio_ci95

    def test_point_mass_free(self, tmp_path):
        cfg = ExperimentConfig("prophet", generator="prophet days=4 per_day=1 matroid=free point_mass=true",
                               trials=8000, seed=1)
        inst = generate_instance(cfg.generator, cfg.seed)
        s = run_experiment(cfg)
        exact = multilinear_exact(inst.objective, np.full(4, 0.5))
        assert abs(s.mean_value - exact) <= 3 * s.ci95
        assert s.opt == pytest.approx(max(inst.value(S) for S in range(16)))

    def test_secretary_ci_width(self):
        s = run_experiment(ExperimentConfig("secretary", generator="secretary n=64 valuation=additive",
                                            trials=10_000, seed=0))
        assert s.ci95 < 0.05 * s.mean_value

    def test_zero_trials(self, tmp_path):
        s = run_experiment(ExperimentConfig("secretary", generator="secretary n=10", trials=0,
                                            out_dir=str(tmp_path)))
        doc = json.loads((tmp_path / "secretary_summary.json").read_text())
        assert s.values == [] and doc["mean_value"] is None and doc["ratio"] is None
        assert read_trials_csv(tmp_path / "secretary_trials.csv") == []

    def test_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            run_experiment(ExperimentConfig("secretary", generator="secretary n=24", trials=200, seed=9,
                                            out_dir=str(tmp_path / sub)))
        for name in ("secretary_trials.csv", "secretary_summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_workers_match_serial(self, tmp_path, monkeypatch):
        cfg = dict(mode="prophet", generator="prophet days=3 per_day=2", trials=40, seed=2)
        serial = run_experiment(ExperimentConfig(**cfg, out_dir=str(tmp_path / "s")))
        monkeypatch.setenv("PROPHETLAB_THREADS", "2")
        par = run_experiment(ExperimentConfig(**cfg, out_dir=str(tmp_path / "p")))
        assert serial.values == par.values
        assert (tmp_path / "s/prophet_trials.csv").read_bytes() == (tmp_path / "p/prophet_trials.csv").read_bytes()

    def test_instance_file(self, tmp_path):
        path = tmp_path / "inst.json"
        path.write_text(json.dumps(instance_to_json(generate_instance("prophet days=2 per_day=2", 0))))
        s = run_experiment(ExperimentConfig("prophet", instance=str(path), trials=10))
        assert len(s.values) == 10

    def test_wrong_instance_type(self):
        with pytest.raises(DomainError):
            run_experiment(ExperimentConfig("prophet", generator="secretary n=8", trials=1))

    def test_config_validation(self):
        with pytest.raises(DomainError):
            ExperimentConfig("prophet", trials=1)
        with pytest.raises(DomainError):
            ExperimentConfig("bogus", generator="x")
        with pytest.raises(DomainError):
            ExperimentConfig("prophet", generator="x", trials=-1)

    def test_gaps_mode(self, tmp_path):
        s = run_experiment(ExperimentConfig("gaps", lemmas=["aux", "fmax"], n=5, instances=20,
                                            out_dir=str(tmp_path)))
        assert s.extra["passed"]
        doc = json.loads((tmp_path / "gaps_verdicts.json").read_text())
        assert [d["lemma"] for d in doc] == ["aux", "fmax"]


def test_summary_nonfinite():
    s = RunSummary([0.0, 0.0], 1.0, 2)
    assert math.isinf(s.ratio) and s.to_json()["ratio"] is None


class TestCli:
    def test_prophet(self, tmp_path, capsys):
        code = cli.main(["prophet", "--generate", "prophet days=3 per_day=2", "--trials", "50",
                         "--order", "2,0,1", "--out", str(tmp_path)])
        assert code == 0
        rows = read_trials_csv(tmp_path / "prophet_trials.csv")
        assert {r["order_id"] for r in rows} == {"2-0-1"}
        assert json.loads(capsys.readouterr().out)["trials"] == 50

    def test_secretary(self, tmp_path):
        assert cli.main(["secretary", "--generate", "secretary n=16", "--trials", "20",
                         "--alpha-override", "0.0", "--out", str(tmp_path)]) == 0

    def test_gen(self, tmp_path):
        out = tmp_path / "i.json"
        assert cli.main(["gen", "coverage n=5", "--seed", "3", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["type"] == "setfn"

    def test_gaps_pass(self, tmp_path, capsys):
        assert cli.main(["gaps", "verify", "--lemma", "aux", "--n", "5", "--instances", "10",
                         "--out", str(tmp_path)]) == 0
        assert json.loads(capsys.readouterr().out)[0]["passed"]

    def test_gaps_failure_exit_one(self, tmp_path, monkeypatch):
        bad = LemmaVerdict("aux", 1, 0.5, 1e-9, {"f": {"n": 1, "kind": "explicit", "values": [0, 1]}})
        monkeypatch.setattr(harness, "run_suite", lambda *a, **k: bad)
        assert cli.main(["gaps", "verify", "--lemma", "aux", "--out", str(tmp_path)]) == 1
        assert (tmp_path / "witness_aux.json").exists()

    def test_usage_errors(self, capsys):
        assert cli.main(["prophet", "--generate", "bogus n=3"]) == 2
        assert cli.main(["prophet", "--instance", "/nonexistent/file.json"]) == 2
        assert cli.main(["gaps", "verify", "--n", "11"]) == 2
        with pytest.raises(SystemExit) as exc:
            cli.main(["prophet"])
        assert exc.value.code == 2

    def test_gaps_entry(self, capsys):
        assert cli.gaps_main(["verify", "--lemma", "fmax"]) == 0

    def test_console_script(self):
        out = subprocess.run([sys.executable, "-m", "prophetlab.cli", "gen", "unit-subadditive n=3"],
                             capture_output=True, text=True)
        assert out.returncode == 0 and json.loads(out.stdout)["n"] == 3
