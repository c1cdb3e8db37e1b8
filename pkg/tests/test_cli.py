"""End-to-end command-line checks, driven through ``main(argv)``."""

from __future__ import annotations

import json
import os
from fractions import Fraction

import pytest

from mdp_workbench import (
    channel_to_json,
    geometric_truncated,
    loss_to_json,
    make_loss,
    prior_to_json,
    random_response,
    trivial_channel,
    uniform_prior,
    Channel,
    Prior,
)
from mdp_workbench.cli import main

F = Fraction


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("MDP_CACHE_DIR", str(tmp_path / "cache"))


def _write(tmp_path, name, obj) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


def _metric(tmp_path, **fields) -> str:
    return _write(tmp_path, f"metric-{fields.get('kind')}.json", fields)


def _channel(tmp_path, name, ch) -> str:
    return _write(tmp_path, name, channel_to_json(ch))


# -- vertices / kernels ------------------------------------------------------


def test_vertices_text(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    assert main(["vertices", "--metric", m]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "4 vertices"
    assert "(1/7, 2/7, 4/7)" in out
    assert "(4/7, 2/7, 1/7)" in out


def test_vertices_json_and_csv(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    assert main(["vertices", "--metric", m, "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["count"] == 4
    assert doc["labels"] == ["0", "1", "2"]
    assert ["1/4", "1/2", "1/4"] in doc["vertices"]
    assert main(["vertices", "--metric", m, "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "0,1,2"
    assert "1/4,1/2,1/4" in lines


def test_vertices_out_file(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    target = tmp_path / "verts.csv"
    assert main(["vertices", "--metric", m, "--format", "csv", "--out", str(target)]) == 0
    assert capsys.readouterr().out == ""
    text = target.read_text(encoding="utf-8")
    assert text.startswith("0,1,2\n")
    assert "\r" not in text


def test_vertices_budget_exit_code(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    assert main(["vertices", "--metric", m, "--limit", "3"]) == 3
    err = capsys.readouterr().err
    assert "raise the limit" in err


def test_kernels_text(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    assert main(["kernels", "--metric", m]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "2 kernel mechanisms"
    assert "7/18 * (1/7, 2/7, 4/7)" in out
    assert "5/9 * (2/5, 1/5, 2/5)" in out


def test_kernels_json(tmp_path, capsys):
    m = _metric(tmp_path, kind="discrete", n=3, base="2")
    assert main(["kernels", "--metric", m, "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["count"] == 5
    assert {"outers": ["5/9", "4/9"],
            "inners": [["1/5", "2/5", "2/5"], ["1/2", "1/4", "1/4"]]} in doc["kernels"]


# -- privacy checking --------------------------------------------------------


def test_check_dp_ok(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    c = _channel(tmp_path, "geo.json", geometric_truncated(3, "1/2"))
    assert main(["check-dp", "--channel", c, "--metric", m]) == 0
    assert capsys.readouterr().out == "ok\n"


def test_check_dp_violation(tmp_path, capsys):
    m = _metric(tmp_path, kind="discrete", n=2, base="2")
    ident = Channel(("0", "1"), ("y0", "y1"), ((F(1), F(0)), (F(0), F(1))))
    c = _channel(tmp_path, "ident.json", ident)
    assert main(["check-dp", "--channel", c, "--metric", m]) == 1
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "violations:"
    assert "ratio=inf" in out
    assert "allowed=2" in out


def test_check_dp_json_violation(tmp_path, capsys):
    m = _metric(tmp_path, kind="discrete", n=2, base="2")
    ident = Channel(("0", "1"), ("y0", "y1"), ((F(1), F(0)), (F(0), F(1))))
    c = _channel(tmp_path, "ident.json", ident)
    assert main(["check-dp", "--channel", c, "--metric", m, "--format", "json"]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] is False
    assert doc["violations"][0]["ratio"] is None


# -- hypers and refinement ---------------------------------------------------


def test_to_hyper_default_uniform(tmp_path, capsys):
    c = _channel(tmp_path, "geo.json", geometric_truncated(3, "1/2"))
    assert main(["to-hyper", "--channel", c]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "7/18 * (1/7, 2/7, 4/7)"
    assert out[1] == "2/9 * (1/4, 1/2, 1/4)"
    assert out[2] == "7/18 * (4/7, 2/7, 1/7)"


def test_to_hyper_explicit_prior(tmp_path, capsys):
    c = _channel(tmp_path, "triv.json", trivial_channel(("0", "1", "2")))
    p = _write(tmp_path, "prior.json",
               prior_to_json(Prior(("0", "1", "2"), (F(1, 2), F(1, 4), F(1, 4)))))
    assert main(["to-hyper", "--channel", c, "--prior", p]) == 0
    assert capsys.readouterr().out == "1 * (1/2, 1/4, 1/4)\n"


def test_refines_yes_and_no(tmp_path, capsys):
    geo = geometric_truncated(3, "1/2")
    b = _channel(tmp_path, "b.json", geo)
    a = _channel(tmp_path, "a.json", trivial_channel(geo.x_labels))
    assert main(["refines", "--b", b, "--a", a]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "Yes"
    assert main(["refines", "--b", a, "--a", b]) == 1
    assert capsys.readouterr().out == "No\n"


def test_refines_json_witness(tmp_path, capsys):
    geo = geometric_truncated(3, "1/2")
    b = _channel(tmp_path, "b.json", geo)
    a = _channel(tmp_path, "a.json", trivial_channel(geo.x_labels))
    assert main(["refines", "--b", b, "--a", a, "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["refines"] is True
    assert doc["witness"]["rows"] == [["1"], ["1"], ["1"]]


# -- utility and capacities --------------------------------------------------


def test_utility_lines(tmp_path, capsys):
    c = _channel(tmp_path, "geo.json", geometric_truncated(3, "1/2"))
    l = _write(tmp_path, "bin.json", loss_to_json(make_loss("bin", labels=("0", "1", "2"))))
    assert main(["utility", "--channel", c, "--loss", l]) == 0
    out = capsys.readouterr().out
    assert out == "prior uncertainty: 2/3\nposterior uncertainty: 4/9\n"


def test_capacity_discrete5(tmp_path, capsys):
    m = _metric(tmp_path, kind="discrete", n=5, base="2")
    assert main(["capacity", "--metric", m, "--mode", "mult"]) == 0
    assert capsys.readouterr().out == "5/3\n"
    assert main(["capacity", "--metric", m, "--mode", "add", "--closed-form"]) == 0
    assert capsys.readouterr().out == "4/9\n"


def test_capacity_json_has_witness(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=4, base="2")
    assert main(["capacity", "--metric", m, "--mode", "mult", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["value"] == "2"
    assert doc["method"] == "lp"
    assert len(doc["witness"]["rows"]) == 4


def test_channel_capacity(tmp_path, capsys):
    c = _channel(tmp_path, "geo.json", geometric_truncated(3, "1/2"))
    assert main(["channel-capacity", "--channel", c, "--mode", "mult"]) == 0
    assert capsys.readouterr().out == "5/3\n"
    assert main(["channel-capacity", "--channel", c, "--mode", "add"]) == 0
    assert capsys.readouterr().out == "1/2\n"


# -- optimality --------------------------------------------------------------


def test_optimal_exact_yes(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    c = _channel(tmp_path, "geo.json", geometric_truncated(3, "1/2"))
    l = _write(tmp_path, "bin.json", loss_to_json(make_loss("bin", labels=("0", "1", "2"))))
    assert main(["optimal", "--channel", c, "--loss", l, "--metric", m]) == 0
    assert capsys.readouterr().out == "optimal\n"


def test_optimal_exact_counterexample(tmp_path, capsys):
    m = _metric(tmp_path, kind="discrete", n=3, base="2")
    c = _channel(tmp_path, "rr.json", random_response(3, "1/2"))
    l = _write(tmp_path, "bin.json", loss_to_json(make_loss("bin", labels=("0", "1", "2"))))
    assert main(["optimal", "--channel", c, "--loss", l, "--metric", m]) == 1
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "counterexample"
    assert out[1].startswith("prior: (")
    assert out[2].startswith("margin: ")
    assert out[3] == "rival kernel:"


def test_optimal_sampled_unknown_exits_zero(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    c = _channel(tmp_path, "geo.json", geometric_truncated(3, "1/2"))
    l = _write(tmp_path, "bin.json", loss_to_json(make_loss("bin", labels=("0", "1", "2"))))
    assert main(["optimal", "--channel", c, "--loss", l, "--metric", m,
                 "--mode", "sample", "--samples", "20", "--seed", "3"]) == 0
    assert capsys.readouterr().out.startswith("unknown:")


def test_optimal_json_counterexample(tmp_path, capsys):
    m = _metric(tmp_path, kind="discrete", n=3, base="2")
    c = _channel(tmp_path, "rr.json", random_response(3, "1/2"))
    l = _write(tmp_path, "bin.json", loss_to_json(make_loss("bin", labels=("0", "1", "2"))))
    assert main(["optimal", "--channel", c, "--loss", l, "--metric", m,
                 "--format", "json"]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "counterexample"
    assert doc["prior"] == ["1/2", "1/2", "0"]
    assert doc["margin"] == "1/24"
    assert doc["rival"]["outers"] == ["5/9", "4/9"]


# -- reproduce ---------------------------------------------------------------


def test_reproduce_euclid(tmp_path, capsys):
    assert main(["reproduce", "--table", "euclid", "--max-n", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("Dims,Vertices,VerticesMatch,")
    assert lines[1] == "2,2,match,1,match,4/3,match,1/3,match"
    assert lines[2] == "3,4,match,2,match,5/3,match,1/2,match"
    assert lines[3] == "4,8,match,11,match,2,match,2/3,match"


def test_reproduce_discrete_json(tmp_path, capsys):
    assert main(["reproduce", "--table", "discrete", "--max-n", "3",
                 "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["table"] == "discrete"
    row = doc["rows"][-1]
    assert (row["vertices"], row["kernels"]) == (6, 5)
    assert row["mult_capacity"] == "3/2"
    assert all(row[k] == "match" for k in
               ("vertices_match", "kernels_match", "mult_match", "add_match"))


def test_reproduce_hamming_small(tmp_path, capsys):
    assert main(["reproduce", "--table", "hamming", "--max-n", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].split(",")[0:3] == ["2", "6", "match"]
    # capacities print as decimals and match within the stated tolerance
    assert lines[1].split(",")[5] == "1.7778"


def test_reproduce_out_file(tmp_path):
    target = tmp_path / "table.csv"
    assert main(["reproduce", "--table", "euclid", "--max-n", "2",
                 "--out", str(target)]) == 0
    assert target.read_text(encoding="utf-8").count("\n") == 2


def test_reproduce_rejects_small_max(tmp_path, capsys):
    assert main(["reproduce", "--table", "euclid", "--max-n", "1"]) == 2
    assert "at least" in capsys.readouterr().err


# -- failure modes -----------------------------------------------------------


def test_malformed_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "line",', encoding="utf-8")
    assert main(["vertices", "--metric", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "malformed JSON" in err
    assert "line 1 column" in err
    assert "bad.json" in err


def test_missing_file(tmp_path, capsys):
    assert main(["vertices", "--metric", str(tmp_path / "absent.json")]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_metric_fields(tmp_path, capsys):
    m = _write(tmp_path, "bad-kind.json", {"kind": "torus", "n": 3, "base": "2"})
    assert main(["vertices", "--metric", m]) == 2


def test_threads_must_be_positive(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    assert main(["vertices", "--metric", m, "--threads", "0"]) == 2
    assert "--threads" in capsys.readouterr().err


def test_threads_accepted(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    assert main(["vertices", "--metric", m, "--threads", "4"]) == 0


# -- cache -------------------------------------------------------------------


def test_cache_round_trip_is_byte_identical(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=4, base="2")
    cache_dir = str(tmp_path / "explicit-cache")
    argv = ["kernels", "--metric", m, "--format", "json", "--cache-dir", cache_dir]
    assert main(argv) == 0
    fresh = capsys.readouterr().out
    assert os.listdir(cache_dir)  # something was stored
    assert main(argv) == 0
    cached = capsys.readouterr().out
    assert cached == fresh
    assert main(["kernels", "--metric", m, "--format", "json", "--no-cache"]) == 0
    uncached = capsys.readouterr().out
    assert uncached == fresh


def test_budget_refusal_ignores_warm_cache(tmp_path, capsys):
    # A --limit refusal must not depend on what an earlier run cached.
    m = _metric(tmp_path, kind="line", n=3, base="2")
    assert main(["vertices", "--metric", m]) == 0
    assert main(["kernels", "--metric", m]) == 0
    capsys.readouterr()
    assert main(["vertices", "--metric", m, "--limit", "3"]) == 3
    assert "raise the limit" in capsys.readouterr().err
    assert main(["kernels", "--metric", m, "--limit", "1"]) == 3
    err = capsys.readouterr().err
    assert "kernel enumeration" in err and "raise the limit" in err


def test_cache_env_var_is_honoured(tmp_path, capsys, monkeypatch):
    env_dir = tmp_path / "env-cache"
    monkeypatch.setenv("MDP_CACHE_DIR", str(env_dir))
    m = _metric(tmp_path, kind="line", n=3, base="2")
    assert main(["vertices", "--metric", m]) == 0
    capsys.readouterr()
    assert env_dir.exists() and os.listdir(env_dir)


def test_corrupt_cache_entry_is_recomputed(tmp_path, capsys):
    m = _metric(tmp_path, kind="line", n=3, base="2")
    cache_dir = tmp_path / "c"
    argv = ["vertices", "--metric", m, "--format", "json", "--cache-dir", str(cache_dir)]
    assert main(argv) == 0
    fresh = capsys.readouterr().out
    for name in os.listdir(cache_dir):
        (cache_dir / name).write_text("not json at all", encoding="utf-8")
    assert main(argv) == 0
    assert capsys.readouterr().out == fresh


def test_cache_distinguishes_metrics(tmp_path, capsys):
    cache_dir = str(tmp_path / "c")
    m3 = _metric(tmp_path, kind="line", n=3, base="2")
    m4 = _write(tmp_path, "line4.json", {"kind": "line", "n": 4, "base": "2"})
    assert main(["vertices", "--metric", m3, "--cache-dir", cache_dir]) == 0
    assert main(["vertices", "--metric", m4, "--cache-dir", cache_dir]) == 0
    first = capsys.readouterr().out.splitlines()
    assert "4 vertices" in first[0]
    assert "8 vertices" in first[-9]
