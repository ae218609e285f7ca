from __future__ import annotations

import json
import subprocess
import sys

import pytest

from codereward.artifacts import GeneratedArtifacts
from codereward.cli import main
from codereward.datastore import load_corpus, load_program, save_artifacts, save_corpus, save_program
from codereward.rewardlang import oracle


@pytest.fixture(scope="module")
def corpus(tmp_path_factory, doorkey_experts, doorkey_randoms):
    d = tmp_path_factory.mktemp("corpus")
    save_corpus(doorkey_experts + doorkey_randoms, d)
    return d


@pytest.fixture(scope="module")
def generated(tmp_path_factory, corpus):
    out = tmp_path_factory.mktemp("gen")
    assert main(["generate", "--corpus", str(corpus), "--out", str(out)]) == 0
    return out


def test_record(tmp_path, capsys):
    assert main(["record", "--policy", "expert", "--count", "2", "--out", str(tmp_path)]) == 0
    trajs = load_corpus(tmp_path)
    assert len(trajs) == 2 and all(t.rewards[-1] == 1.0 for t in trajs)
    assert json.loads((tmp_path / "config.json").read_text())["settings"]["env"] == "DoorKey-8x8"
    assert "recorded 2 expert" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["record", "--policy", "expert", "--env", "Maze-9x9", "--out", "x"],
    ["record", "--policy", "teleport", "--out", "x"],
    ["record", "--policy", "expert", "--count", "0", "--out", "x"],
    ["record", "--policy", "expert", "--set", "colour=red", "--out", "x"],
    ["verify"],
    ["train", "--reward", "sparse", "--budget", "0", "--out", "x"],
    ["eval-policies", "--program", "x.rwd", "--k", "0"],
    [],
])
def test_usage_errors_exit_64(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as e:
        code = main(argv)
        raise SystemExit(code)
    assert e.value.code == 64


def test_generate_oracle_passes(generated):
    report = json.loads((generated / "report.json").read_text())
    assert report["passed"] is True
    assert sorted(p.name for p in generated.glob("check_*.rwd")) == ["check_01.rwd", "check_02.rwd", "check_03.rwd"]
    assert (generated / "session.jsonl").is_file()


def test_generate_missing_inputs_exit_3(tmp_path, corpus):
    assert main(["generate", "--corpus", str(tmp_path / "none"), "--out", str(tmp_path / "o")]) == 3
    assert main(["generate", "--backend", "replay", "--corpus", str(corpus), "--out", str(tmp_path / "o")]) == 3


def test_generate_live_without_token_exits_3(tmp_path, corpus, monkeypatch):
    monkeypatch.delenv("CODEREWARD_API_TOKEN", raising=False)
    code = main(["generate", "--backend", "live", "--set", "endpoint=https://vlm.invalid/v1", "--corpus",
                 str(corpus), "--out", str(tmp_path / "o")])
    assert code == 3


def test_verify_exit_codes(tmp_path, corpus, generated):
    assert main(["verify", "--artifacts", str(generated), "--corpus", str(corpus), "--out", str(tmp_path)]) == 0
    prox = GeneratedArtifacts(
        "DoorKey-8x8", "reach the goal", ["key", "door", "goal"],
        [oracle.load("key_proximity_check"), oracle.load("door_check"), oracle.load("goal_check")],
        goal=oracle.load("goal_check"))
    save_artifacts(prox, tmp_path / "prox")
    assert main(["verify", "--artifacts", str(tmp_path / "prox"), "--corpus", str(corpus)]) == 2
    assert json.loads((tmp_path / "prox" / "report.json").read_text())["passed"] is False
    assert main(["verify", "--artifacts", str(generated), "--corpus", str(corpus), "--p", "1.0",
                 "--out", str(tmp_path)]) == 64
    assert main(["verify", "--artifacts", str(tmp_path / "none"), "--corpus", str(corpus)]) == 3


def test_train_writes_curves(tmp_path, generated):
    out = tmp_path / "t"
    code = main(["train", "--artifacts", str(generated), "--budget", "500", "--seeds", "2",
                 "--set", "eval_every=250", "--out", str(out)])
    assert code == 0
    names = {p.name for p in out.iterdir()}
    for mode in ("dense", "sparse"):
        assert {f"{mode}_seed0.csv", f"{mode}_seed1.csv", f"{mode}_curve.csv"} <= names
    assert (out / "dense_curve.csv").read_text().splitlines()[0] == \
        "step,mean_return,return_se,success_rate,success_se"
    assert json.loads((out / "config.json").read_text())["settings"]["total_steps"] == 500
    assert main(["train", "--reward", "dense", "--budget", "500", "--out", str(tmp_path / "d")]) == 3


def test_eval_policies(tmp_path):
    save_program(oracle.load("push_reward"), tmp_path / "r.rwd")
    code = main(["eval-policies", "--program", str(tmp_path / "r.rwd"), "--env", "BlockPush", "--k", "4",
                 "--out", str(tmp_path)])
    rep = json.loads((tmp_path / "separation.json").read_text())
    assert sorted(p["policy"] for p in rep["policies"]) == ["expert", "novice", "random", "suboptimal"]
    assert code == (0 if rep["passed"] else 2)
    assert main(["eval-policies", "--program", str(tmp_path / "none.rwd"), "--env", "BlockPush"]) == 3


def test_render(tmp_path):
    assert main(["render", "--env", "Empty-5x5", "--policy", "expert", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "frame_000000.png").is_file()


def test_replay_reproduces_generate(tmp_path, corpus, generated):
    out = tmp_path / "r"
    code = main(["generate", "--backend", "replay", "--session", str(generated / "session.jsonl"),
                 "--corpus", str(corpus), "--out", str(out)])
    assert code == 0
    for p in generated.glob("*.rwd"):
        assert (out / p.name).read_bytes() == p.read_bytes()
    assert (out / "report.json").read_bytes() == (generated / "report.json").read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "codereward.cli", "render", "--env", "Empty-5x5",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and "wrote 1 frame" in res.stdout
    res = subprocess.run([sys.executable, "-m", "codereward.cli", "bogus"], capture_output=True, text=True)
    assert res.returncode == 64


def test_generate_blockpush_uses_the_robotic_pipeline(tmp_path):
    c = tmp_path / "c"
    assert main(["record", "--env", "BlockPush", "--policy", "expert", "--count", "2", "--out", str(c)]) == 0
    assert main(["record", "--env", "BlockPush", "--policy", "random", "--count", "20", "--seed", "1000",
                 "--out", str(c)]) == 0
    out = tmp_path / "g"
    assert main(["generate", "--env", "BlockPush", "--set", "n_random=20", "--corpus", str(c),
                 "--out", str(out)]) == 0
    assert load_program(out / "reward.rwd") == oracle.load("push_reward")
    first_user = next(json.loads(line) for line in (out / "session.jsonl").read_text().splitlines()
                      if json.loads(line)["role"] == "user")
    assert "blue disc" in first_user["text"] and not list(out.glob("check_*.rwd"))
