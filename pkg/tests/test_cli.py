import json

from sddlab.cli import main
from sddlab.learner import load_network


def test_solve_command(tmp_path, capsys):
    doc = {
        "kinds": ["V", "P", "D", "R"],
        "locations": [[2, 2], [2, 2], [2, 0], [2, 2]],
        "remaining_times": [None, None, 48, None],
        "rewards": [0, 0, 3, 0],
        "accepted": [False, False, False, False],
        "travel_cost": 0.001,
    }
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(doc))
    assert main(["solve", "--instance", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["objective"] == 3.0 - 0.004 and out["route"] == [0, 1, 2, 3] and out["violations"] == []


def test_train_eval_compare_roundtrip(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--preset", "hom-5x5-5", "--episodes", "2", "--seed", "3", "--out", str(out)]) == 0
    net, header = load_network(out / "model.bin")
    assert header["seed"] == 3 and header["preset"] == "hom-5x5-5"
    assert (out / "training_curve.csv").read_text().count("\n") == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == [3] and "content_hash" in manifest

    assert main(["eval", "--preset", "hom-5x5-5", "--policy", "dqn", "--model", str(out / "model.bin"),
                 "--episodes", "2", "--out", str(out)]) == 0
    assert (out / "hom-5x5-5_dqn_results.csv").exists()
    assert (out / "hom-5x5-5_dqn_events.jsonl").exists()
    assert main(["compare", "--preset", "hom-5x5-5", "--model", str(out / "model.bin"),
                 "--episodes", "2", "--out", str(out)]) == 0
    assert "difference" in capsys.readouterr().out
    assert (out / "hom-5x5-5_timing_table.csv").exists()


def test_eval_dqn_without_model_is_rejected(tmp_path):
    assert main(["eval", "--preset", "hom-5x5-5", "--policy", "dqn", "--out", str(tmp_path)]) == 2
