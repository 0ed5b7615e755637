import json

import numpy as np
import pytest
from click.testing import CliRunner

from amclab.cli import main
from amclab.signals import load_dataset


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workspace(runner, tmp_path_factory):
    """A small dataset, a trained checkpoint, and a one-member ensemble."""
    root = tmp_path_factory.mktemp("cli")
    r = runner.invoke(main, [
        "gen", "--schemes", "BPSK,QPSK,PAM4,CPFSK", "--per-class", "20",
        "--seed", "3", "--out", str(root / "ds")])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "train", "--dataset", str(root / "ds"), "--arch", "FCNN",
        "--width-scale", "0.25", "--max-epochs", "8", "--patience", "4",
        "--out", str(root / "fcnn_time")])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "train", "--dataset", str(root / "ds"), "--arch", "FCNN",
        "--domain", "frequency", "--width-scale", "0.25",
        "--max-epochs", "8", "--patience", "4",
        "--out", str(root / "fcnn_freq")])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "ensemble", "--dataset", str(root / "ds"), "--members", "FCNN",
        "--k", "2", "--width-scale", "0.25", "--max-epochs", "5",
        "--patience", "3", "--out", str(root / "ens")])
    assert r.exit_code == 0, r.output
    return root


class TestGen:
    def test_writes_dataset(self, workspace):
        ds = load_dataset(workspace / "ds")
        assert len(ds) == 80
        assert ds.num_classes == 4

    def test_config_file_supplies_values(self, runner, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"per_class": 20, "seed": 11,
                                   "schemes": "BPSK,OOK"}))
        r = runner.invoke(main, ["gen", "--config", str(cfg),
                                 "--out", str(tmp_path / "d")])
        assert r.exit_code == 0, r.output
        ds = load_dataset(tmp_path / "d")
        assert len(ds) == 40
        assert ds.class_names == ["BPSK", "OOK"]
        assert ds.seed == 11

    def test_explicit_flag_beats_config(self, runner, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"per_class": 40}))
        r = runner.invoke(main, ["gen", "--config", str(cfg),
                                 "--schemes", "BPSK,QPSK",
                                 "--per-class", "20",
                                 "--out", str(tmp_path / "d")])
        assert r.exit_code == 0, r.output
        assert len(load_dataset(tmp_path / "d")) == 40

    def test_bad_scheme_exits_config_code(self, runner, tmp_path):
        r = runner.invoke(main, ["gen", "--schemes", "NOTASCHEME",
                                 "--per-class", "2",
                                 "--out", str(tmp_path / "d")])
        assert r.exit_code == 2
        assert "error:" in r.output

    def test_malformed_config_exits_config_code(self, runner, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("[1, 2, 3]")
        r = runner.invoke(main, ["gen", "--config", str(cfg),
                                 "--out", str(tmp_path / "d")])
        assert r.exit_code == 2


class TestTrain:
    def test_checkpoint_usable(self, workspace):
        from amclab.models import TrainedModel
        model = TrainedModel.load(workspace / "fcnn_time")
        assert model.arch_id == "FCNN"
        p = model.predict_proba(np.zeros((1, 128, 2)))
        assert p.shape == (1, 4)

    def test_reports_test_accuracy(self, runner, workspace, tmp_path):
        r = runner.invoke(main, [
            "train", "--dataset", str(workspace / "ds"), "--arch", "FCNN",
            "--width-scale", "0.25", "--max-epochs", "2", "--patience", "1",
            "--out", str(tmp_path / "m")])
        assert r.exit_code == 0, r.output
        assert "test accuracy" in r.output

    def test_missing_dataset_exits_config_code(self, runner, tmp_path):
        r = runner.invoke(main, [
            "train", "--dataset", str(tmp_path / "nope"), "--arch", "FCNN",
            "--out", str(tmp_path / "m")])
        assert r.exit_code == 2

    def test_unknown_arch_rejected_by_click(self, runner, workspace,
                                            tmp_path):
        r = runner.invoke(main, [
            "train", "--dataset", str(workspace / "ds"),
            "--arch", "Transformer", "--out", str(tmp_path / "m")])
        assert r.exit_code == 2


class TestAttackEval:
    def test_attack_then_eval(self, runner, workspace, tmp_path):
        r = runner.invoke(main, [
            "attack", "--dataset", str(workspace / "ds"),
            "--model", str(workspace / "fcnn_time"), "--kind", "FGSM",
            "--pnr-db", "10", "--out", str(tmp_path / "adv")])
        assert r.exit_code == 0, r.output
        prov = json.loads((tmp_path / "adv.attack.json").read_text())
        assert prov["kind"] == "FGSM"
        assert prov["pnr_db"] == 10.0
        adv = load_dataset(tmp_path / "adv")
        assert len(adv) == 12  # test split only: 15% of 20 per class x 4

        clean = runner.invoke(main, [
            "eval", "--dataset", str(workspace / "ds"),
            "--model", str(workspace / "fcnn_time")])
        hit = runner.invoke(main, [
            "eval", "--dataset", str(tmp_path / "adv"),
            "--model", str(workspace / "fcnn_time")])
        assert clean.exit_code == 0 and hit.exit_code == 0
        acc_clean = float(clean.output.splitlines()[0].split()[1])
        acc_adv = float(hit.output.splitlines()[0].split()[1])
        assert acc_adv <= acc_clean

    def test_eval_requires_exactly_one_predictor(self, runner, workspace):
        r = runner.invoke(main, ["eval", "--dataset", str(workspace / "ds")])
        assert r.exit_code == 2
        r = runner.invoke(main, [
            "eval", "--dataset", str(workspace / "ds"),
            "--model", str(workspace / "fcnn_time"),
            "--ensemble", str(workspace / "ens" / "ensemble.json")])
        assert r.exit_code == 2

    def test_eval_ensemble(self, runner, workspace):
        r = runner.invoke(main, [
            "eval", "--dataset", str(workspace / "ds"),
            "--ensemble", str(workspace / "ens" / "ensemble.json")])
        assert r.exit_code == 0, r.output
        assert r.output.startswith("accuracy ")

    def test_eval_frequency_model_transforms_input(self, runner, workspace):
        r = runner.invoke(main, [
            "eval", "--dataset", str(workspace / "ds"),
            "--model", str(workspace / "fcnn_freq")])
        assert r.exit_code == 0, r.output


class TestDefendEvalAndReport:
    def test_end_to_end_report(self, runner, workspace, tmp_path):
        r = runner.invoke(main, [
            "defend-eval", "--dataset", str(workspace / "ds"),
            "--ensemble", str(workspace / "ens" / "ensemble.json"),
            "--surrogate-time", str(workspace / "fcnn_time"),
            "--surrogate-freq", str(workspace / "fcnn_freq"),
            "--baseline", f"plain={workspace / 'fcnn_time'}",
            "--kinds", "FGSM", "--domains", "time",
            "--pnr-grid", "-10,0,10", "--out", str(tmp_path / "rep")])
        assert r.exit_code == 0, r.output
        payload = json.loads(
            (tmp_path / "rep" / "blackbox_defense.json").read_text())
        assert len(payload["cells"]) == 6  # 1 kind x 1 domain x 3 PNR x 2 defenses
        assert {c["defense"] for c in payload["cells"]} == {"ade", "plain"}

        rr = runner.invoke(main, [
            "report", "--report",
            str(tmp_path / "rep" / "blackbox_defense.json"),
            "--out", str(tmp_path / "re-emit")])
        assert rr.exit_code == 0, rr.output
        assert (tmp_path / "re-emit" / "blackbox_defense.csv").exists()
        assert (tmp_path / "re-emit" / "blackbox_defense.svg").exists()

    def test_bad_baseline_spec(self, runner, workspace, tmp_path):
        r = runner.invoke(main, [
            "defend-eval", "--dataset", str(workspace / "ds"),
            "--ensemble", str(workspace / "ens" / "ensemble.json"),
            "--surrogate-time", str(workspace / "fcnn_time"),
            "--surrogate-freq", str(workspace / "fcnn_freq"),
            "--baseline", "nocheckpoint",
            "--out", str(tmp_path / "rep")])
        assert r.exit_code == 2

    def test_report_missing_file(self, runner, tmp_path):
        r = runner.invoke(main, [
            "report", "--report", str(tmp_path / "none.json"),
            "--out", str(tmp_path / "o")])
        assert r.exit_code == 2
