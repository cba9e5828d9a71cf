import json

import pytest

from npges.cli import main


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


LINEAR_CHAIN = {
    "d": 3, "dag": "[∅|1|2]",
    "nodes": [{"type": "linear_gaussian"},
              {"type": "linear_gaussian", "coefficients": {"1": 1.0}},
              {"type": "linear_gaussian", "coefficients": {"2": 1.0}}],
}


def test_simulate_learn_eval(tmp_path, capsys):
    cfg = write(tmp_path / "run.json", {"sem": LINEAR_CHAIN, "n": 3000, "out": str(tmp_path / "o")})
    assert main(["simulate", "--config", cfg, "--seed", "4"]) == 0
    out = tmp_path / "o"
    for name in ("data.csv", "truth_dag.txt", "truth_cpdag.json", "sem.json"):
        assert (out / name).exists()
    first = (out / "data.csv").read_bytes()
    assert main(["simulate", "--config", cfg, "--seed", "4"]) == 0
    assert (out / "data.csv").read_bytes() == first
    assert main(["learn", "--config", cfg]) == 0
    trace = (out / "trace.jsonl").read_text().splitlines()
    assert json.loads(trace[-1])["type"] == "summary"
    capsys.readouterr()
    assert main(["eval", "--config", cfg]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report == {"shd": 0, "mec_equal": True}
    assert json.loads((out / "report.json").read_text()) == report


def test_learn_with_oracle_and_backends(tmp_path):
    out = tmp_path / "o"
    assert main(["learn", "--test", "oracle", "--out", str(out),
                 "--config", write(tmp_path / "c.json", {"truth_dag": "[∅|13|∅]"})]) == 0
    learned = json.loads((out / "learned_cpdag.json").read_text())
    assert learned["directed"] == [[1, 2], [3, 2]] and learned["undirected"] == []
    cfg = write(tmp_path / "r.json", {"sem": LINEAR_CHAIN, "n": 1500, "out": str(out)})
    assert main(["simulate", "--config", cfg]) == 0
    cache = tmp_path / "cache.jsonl"
    for backend in ("bic", "conjugate"):
        c2 = write(tmp_path / "b.json", {"out": str(out), "bayes": {"backend": backend, "cache": str(cache)}})
        assert main(["learn", "--config", c2, "--lambda", "2.0"]) == 0
    assert cache.exists() and cache.read_text().count("conjugate") > 0


def test_epsilon_needs_a_config(capsys):
    assert main(["epsilon", "--config", "/dev/null"]) == 2
    capsys.readouterr()


def test_epsilon_values(tmp_path, capsys):
    cfg = write(tmp_path / "e.json", {"dag": "[∅|∅]", "n_grid": [4, 32]})
    assert main(["epsilon", "--config", cfg]) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [r["epsilon"] for r in rows] == pytest.approx([1.0, 0.5], rel=1e-12)
    assert [r["log_prior"] for r in rows] == pytest.approx([-4.0, -8.0], rel=1e-12)


def test_exit_codes(tmp_path, capsys):
    assert main(["learn", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["learn", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["simulate", "--config", write(tmp_path / "n.json", {"sem": LINEAR_CHAIN, "n": 0})]) == 2
    assert main(["learn", "--test", "oracle", "--config",
                 write(tmp_path / "cyc.json", {"truth_dag": "[2|1]", "out": str(tmp_path)})]) == 2
    (tmp_path / "flat.csv").write_text("a,b\n1,2\n1,3\n1,4\n")
    cfg = write(tmp_path / "f.json", {"data": str(tmp_path / "flat.csv"), "out": str(tmp_path)})
    assert main(["learn", "--config", cfg]) == 3
    assert main(["eval", "--out", str(tmp_path / "nothing")]) == 2
    with pytest.raises(SystemExit):
        main(["unknown-command"])
    capsys.readouterr()
