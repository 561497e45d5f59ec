import json

import pandas as pd
import pytest

from semattack.cli import build_parser, main
from semattack.config import ATTACK_METHODS
from semattack.experiments.runs import MANIFEST, RESULTS
from semattack.tests.test_experiments import TINY


def run_cli(subcommand, tmp_path, *extra):
    argv = [subcommand, "-q", "--set", f"output.root={tmp_path}"]
    for assignment in [*TINY, *extra]:
        argv += ["--set", assignment]
    return main(argv)


def manifest(directory):
    return json.loads((directory / MANIFEST).read_text())


def test_every_subcommand_is_registered():
    parser = build_parser()
    for name in ("gen-data", "train", "attack", "sweep", "compare", "verify-bound", "report"):
        assert parser.parse_args([name]).command == name


def test_gen_data(tmp_path):
    assert run_cli("gen-data", tmp_path) == 0
    run = tmp_path / "gen-data"
    assert (run / "dataset.json").is_file()
    assert (run / "evaluation.json").is_file()
    assert manifest(run)["outputs"] == ["dataset.json", "evaluation.json"]


def test_train(tmp_path):
    assert run_cli("train", tmp_path) == 0
    run = tmp_path / "train"
    assert (run / "model.json").is_file()
    assert len(pd.read_csv(run / "metrics.csv")) == 3
    assert 0.0 <= manifest(run)["test_accuracy"] <= 1.0


@pytest.mark.parametrize("method", ATTACK_METHODS)
def test_attack(tmp_path, method):
    assert run_cli("attack", tmp_path, f"attack.method={method}") == 0
    run = tmp_path / "attack"
    results = pd.read_csv(run / RESULTS)
    assert len(results) == 12
    assert set(results["attack"]) == {method}
    assert (run / "transform.json").is_file() == (method in ("semantic", "worst_of_s"))
    document = manifest(run)
    assert document["attacked_accuracy"] <= document["clean_accuracy"]


def test_report(tmp_path):
    assert run_cli("attack", tmp_path, "attack.method=fgsm") == 0
    assert main(["report", "-q", "--run", str(tmp_path / "attack")]) == 0
    assert (tmp_path / "attack" / "summary.csv").is_file()


def test_report_on_a_missing_run(tmp_path):
    assert main(["report", "-q", "--run", str(tmp_path / "nothing")]) == 1


def test_unknown_config_key(tmp_path):
    assert run_cli("train", tmp_path, "model.colour=red") == 1


def test_failed_check_exits_with_two(tmp_path):
    argv = ["sweep", "-q", "--assert", "--set", f"output.root={tmp_path}"]
    for assignment in [*TINY, "sweep.kinds=[subspace_additive]", "sweep.rectified=[false]", "sweep.band=-1.5"]:
        argv += ["--set", assignment]
    assert main(argv) == 2
    document = manifest(tmp_path / "sweep")
    assert len(document["violations"]) == 2
    assert (tmp_path / "sweep" / "sweep.csv").is_file()


def test_checks_pass_without_the_flag(tmp_path):
    assert run_cli("sweep", tmp_path, "sweep.kinds=[subspace_additive]", "sweep.rectified=[false]", "sweep.band=-1.5") == 0
