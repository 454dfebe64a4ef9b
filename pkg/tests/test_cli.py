import csv
import json

import numpy as np
import pytest

from interleave.cli import EXIT_BUDGET, EXIT_INFINITE, EXIT_INPUT, EXIT_OK, main
from interleave.graph import MapperGraph, write_graph
from interleave.grid import Grid
from interleave.ingest.generators import TorusSpec, line_mapper, random_mapper_graph, torus_mapper


@pytest.fixture
def graphs(tmp_path):
    d = tmp_path / "g"
    d.mkdir()
    write_graph(line_mapper(0, 8), d / "line.json")
    write_graph(torus_mapper(TorusSpec(3, 0, 8)), d / "torus3.json")
    write_graph(torus_mapper(TorusSpec(7, 0, 8)), d / "torus7.json")
    return d


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bound_json_and_csv(capsys, graphs):
    code, out, _ = run(capsys, "bound", graphs / "line.json", graphs / "torus7.json", "--deterministic")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["bound"] == 2 and doc["proved"] is True and "timestamp" not in doc
    assert "seconds" not in json.dumps(doc)
    code, out, _ = run(capsys, "bound", graphs / "line.json", graphs / "torus7.json", "--n", 1, "--format", "csv")
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["graph_a", "graph_b", "n", "k", "bound", "proved"]
    assert rows[1][2:] == ["1", "1", "2", "True"]


def test_bound_is_deterministic(capsys, graphs):
    outs = {run(capsys, "bound", graphs / "line.json", graphs / "torus3.json", "--deterministic")[1]
            for _ in range(2)}
    assert len(outs) == 1


def test_bound_exit_codes(capsys, graphs, tmp_path):
    code, _, err = run(capsys, "bound", graphs / "line.json", tmp_path / "missing.json")
    assert code == EXIT_INPUT and "no such file" in err
    bad = tmp_path / "bad.json"
    write_graph(MapperGraph(Grid(3), [("a", 0), ("b", 2)], [("e", "a", "b")]), bad)
    code, _, err = run(capsys, "bound", graphs / "line.json", bad)
    assert code == EXIT_INPUT and "invalid" in err
    # smoothing never merges components, so one line against two is unbounded
    far = tmp_path / "far.json"
    strands = [(f"{s}{i}", i) for s in "ab" for i in range(9)]
    rungs = [(f"e{s}{i}", f"{s}{i}", f"{s}{i + 1}") for s in "ab" for i in range(8)]
    write_graph(MapperGraph(Grid(8), strands, rungs), far)
    code, out, _ = run(capsys, "bound", graphs / "line.json", far, "--deterministic")
    assert code == EXIT_INFINITE and json.loads(out)["bound"] == "inf"
    # a random pair whose exact solve at n = 0 needs dozens of search nodes
    r = np.random.default_rng(19)
    hard = [tmp_path / "hard_f.json", tmp_path / "hard_g.json"]
    for path in hard:
        write_graph(random_mapper_graph(r, 14, 4, connected=True), path)
    code, _, _ = run(capsys, "bound", *hard, "--n", 0, "--budget-nodes", 3)
    assert code == EXIT_BUDGET
    code, _, _ = run(capsys, "bound", graphs / "line.json", graphs / "torus7.json", "--budget-nodes", 0)
    assert code == EXIT_INPUT


def test_n_and_search_are_exclusive(graphs):
    with pytest.raises(SystemExit):
        main(["bound", str(graphs / "line.json"), str(graphs / "torus3.json"), "--n", "1", "--search"])


def test_pairwise_and_classify(capsys, graphs, tmp_path):
    m = tmp_path / "m.csv"
    code, _, _ = run(capsys, "pairwise", graphs, "--out", m, "--deterministic", "--jobs", 2)
    assert code == EXIT_OK
    rows = list(csv.reader(m.read_text().splitlines()))
    assert rows[0] == ["", "line", "torus3", "torus7"]
    assert rows[1][1:] == ["0", "1", "2"]
    code, out, _ = run(capsys, "pairwise", graphs, "--format", "json", "--deterministic")
    doc = json.loads(out)
    assert doc["values"][0] == [0, 1, 2] and doc["pairs"]["line|torus7"]["proved"]
    labels = tmp_path / "labels.csv"
    labels.write_text("name,label\nline,flat\ntorus3,loop\ntorus7,loop\n")
    conf = tmp_path / "conf.csv"
    code, out, _ = run(capsys, "classify", m, labels, "--k", 1, "--confusion-out", conf, "--deterministic")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["k"] == 1 and doc["classes"] == ["flat", "loop"]
    assert conf.read_text().splitlines()[0] == "true\\pred,flat,loop"


def test_classify_input_errors(capsys, tmp_path):
    m = tmp_path / "m.csv"
    m.write_text(",a,b\na,0,1\n")
    code, _, err = run(capsys, "classify", m)
    assert code == EXIT_INPUT
    m.write_text(",a_1,b_1\na_1,0,1\nb_1,1,0\n")
    labels = tmp_path / "l.csv"
    labels.write_text("a_1,x\n")
    code, _, err = run(capsys, "classify", m, labels)
    assert code == EXIT_INPUT and "no label" in err


def test_generate_and_validate(capsys, tmp_path):
    out = tmp_path / "gen"
    code, text, _ = run(capsys, "generate", "torus", "--h", 3, 5, "--out", out)
    assert code == EXIT_OK and len(text.split()) == 2
    code, text, _ = run(capsys, "validate", out / "torus_h3.json")
    assert code == EXIT_OK and json.loads(text)["cycle_rank"] == 1
    code, _, _ = run(capsys, "generate", "torus", "--h", 30, "--out", out)
    assert code == EXIT_INPUT
    code, _, _ = run(capsys, "generate", "letters", "--letters", "AI", "--out", out / "letters")
    assert code == EXIT_OK
    assert (out / "letters" / "labels.csv").read_text().splitlines()[1] == "A_500_0.0,A"
    code, _, _ = run(capsys, "generate", "counterexample", "--out", out)
    assert (out / "counterexample_F.json").exists()


def test_validate_reports_problems(capsys, tmp_path):
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"half_range": 2, "delta": 1.0, "vertices": [{"id": "b", "level": 1},
                                                                         {"id": "a", "level": 0}],
                             "edges": []}))
    code, out, _ = run(capsys, "validate", p, "--format", "csv")
    assert code == EXIT_INPUT
    assert "not sorted" in out


def test_lp_round_trip_through_cli(capsys, graphs, tmp_path):
    from interleave.blockmat import build_bundle
    from interleave.graph import read_graph
    from interleave.optimize import build_model, solve_exact, write_solution

    lp = tmp_path / "m.lp"
    code, _, _ = run(capsys, "export-lp", graphs / "line.json", graphs / "torus3.json", "--n", 0, "--out", lp)
    assert code == EXIT_OK and lp.read_text().rstrip().endswith("End")
    model = build_model(build_bundle(read_graph(graphs / "line.json"), read_graph(graphs / "torus3.json"), 0))
    res = solve_exact(model)
    sol = tmp_path / "sol.txt"
    write_solution(model, res.assignment, sol, res.value)
    code, out, _ = run(capsys, "import-solution", graphs / "line.json", graphs / "torus3.json", "--n", 0,
                       "--solution", sol, "--deterministic")
    assert code == EXIT_OK and json.loads(out)["aggregate"] == res.value
    sol.write_text("garbage\n")
    code, _, err = run(capsys, "import-solution", graphs / "line.json", graphs / "torus3.json", "--n", 0,
                       "--solution", sol)
    assert code == EXIT_INPUT and "MalformedSolution" in err


def test_mapper_command(capsys, tmp_path):
    pts = tmp_path / "pts.csv"
    ys = np.linspace(0, 10, 200)
    pts.write_text("x,y\n" + "".join(f"0,{y}\n" for y in ys))
    out = tmp_path / "m.json"
    code, text, _ = run(capsys, "mapper", pts, "--out", out, "--epsilon", 0.5)
    assert code == EXIT_OK and json.loads(text)["n_vertices"] == 21


def test_plot_dir(capsys, graphs, tmp_path):
    pytest.importorskip("matplotlib")
    plots = tmp_path / "plots"
    code, _, _ = run(capsys, "bound", graphs / "line.json", graphs / "torus3.json", "--plot-dir", plots)
    assert code == EXIT_OK
    assert sorted(p.name for p in plots.iterdir()) == ["line.png", "line_vs_torus3_trace.png", "torus3.png"]


def test_log_level_env(monkeypatch, capsys, graphs):
    monkeypatch.setenv("INTERLEAVE_LOG", "debug")
    code, _, _ = run(capsys, "validate", graphs / "line.json")
    assert code == EXIT_OK
