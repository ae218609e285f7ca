from __future__ import annotations

import json

import pytest

from codereward import config as C


def test_defaults():
    s = C.resolve(None, {}, {})
    assert s == C.Settings()
    assert (s.p, s.n_expert, s.n_random, s.max_attempts, s.simplify_after) == (0.1, 2, 100, 12, 5)


def test_precedence_file_env_flags(tmp_path):
    f = tmp_path / "run.conf"
    f.write_text("# comment\nn = 2\np = 0.2   # trailing comment\nmodel = file-model\n\nk = 7\n")
    env = {"CODEREWARD_P": "0.3", "CODEREWARD_MODEL": "env-model", "CODEREWARD_API_TOKEN": "s3cret",
           "HOME": "/root"}
    s = C.resolve(f, env, {"model": "flag-model", "k": None})
    assert s.n == 2  # file only
    assert s.p == 0.3  # env beats file
    assert s.model == "flag-model"  # flag beats env
    assert s.k == 7  # a None flag means "not given"


def test_token_is_not_a_config_key():
    assert "api_token" not in C.FIELDS
    assert C.parse_env({"CODEREWARD_API_TOKEN": "x"}) == {}


@pytest.mark.parametrize("build", [
    lambda p: C.resolve(p("colour = red\n"), {}, {}),
    lambda p: C.resolve(None, {"CODEREWARD_COLOUR": "red"}, {}),
    lambda p: C.resolve(None, {}, {"colour": "red"}),
    lambda p: C.parse_overrides(["colour=red"]),
    lambda p: C.parse_overrides(["n"]),
    lambda p: C.resolve(p("n: 3\n"), {}, {}),
    lambda p: C.resolve(p("n = three\n"), {}, {}),
    lambda p: C.resolve(None, {"CODEREWARD_TIMEOUT": "soon"}, {}),
])
def test_bad_keys_and_values_are_rejected(tmp_path, build):
    def write(text):
        path = tmp_path / "c.conf"
        path.write_text(text)
        return path
    with pytest.raises(C.ConfigError):
        build(write)


def test_missing_file():
    with pytest.raises(C.ConfigError):
        C.resolve("/nonexistent/run.conf", {}, {})


def test_types_are_coerced():
    s = C.resolve(None, {"CODEREWARD_TIMEOUT": "5", "CODEREWARD_SEEDS": "3"}, C.parse_overrides(["alpha = 0.25"]))
    assert s.timeout == 5.0 and isinstance(s.timeout, float)
    assert s.seeds == 3 and s.alpha == 0.25


def test_echo_round_trip(tmp_path):
    s = C.resolve(None, {}, {"n": 2})
    path = C.echo(s, tmp_path / "out", "generate", {"out": tmp_path, "fn": print, "n": 2})
    doc = json.loads(path.read_text())
    assert doc["command"] == "generate" and doc["args"] == {"out": str(tmp_path), "n": 2}
    assert C.Settings(**doc["settings"]) == s
