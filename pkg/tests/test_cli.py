from dstq.cli import main, parse_caps

from conftest import G1_TEXT
from fixtures import rounding_fixture
from dstq.lcst import serialize_lcst


def _g1(tmp_path):
    p = tmp_path / "g1.dst"
    p.write_text(G1_TEXT)
    return str(p)


def test_exact(tmp_path, capsys):
    assert main(["exact", _g1(tmp_path)]) == 0
    assert capsys.readouterr().out == "opt: 3\nedge 0 1\nedge 1 2\nedge 1 3\n"


def test_approx_report(tmp_path, capsys):
    assert main(["approx", _g1(tmp_path), "--depth", "2", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "ratio: 1\n" in out and "cost: 3\n" in out and "seed: 1\n" in out


def test_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DSTQ_SEED", "17")
    assert main(["approx", _g1(tmp_path), "--depth", "2"]) == 0
    assert "seed: 17\n" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.dst"
    bad.write_text("dst 3 1\nroot 0\nterminals 2\nedge 0 1 1\n")
    assert main(["approx", str(bad)]) == 2
    assert main(["approx", _g1(tmp_path), "--depth", "1", "--backend", "sa-lp",
                 "--caps", "lp=10"]) == 3
    assert main(["exact", str(tmp_path / "missing.dst")]) == 1
    broken = tmp_path / "broken.dst"
    broken.write_text("dst 2\n")
    assert main(["exact", str(broken)]) == 1
    assert "error:" in capsys.readouterr().err


def test_lp_bound(tmp_path, capsys):
    assert main(["lp-bound", _g1(tmp_path), "--depth", "1"]) == 0
    assert capsys.readouterr().out.startswith("lp_bound: ")


def test_stats_and_bench_csv(tmp_path):
    inst, _, _ = rounding_fixture(5, max_nodes=20)
    lp = tmp_path / "f.lcst"
    lp.write_text(serialize_lcst(inst))
    out = tmp_path / "stats.csv"
    assert main(["stats", str(lp), "--trials", "40", "--csv", str(out)]) == 0
    assert out.read_text().startswith("label,trials,covered")
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "g1.dst").write_text(G1_TEXT)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["bench", str(corpus), "--depth", "2", "--csv", str(a)]) == 0
    assert main(["bench", str(corpus), "--depth", "2", "--csv", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_lcst_mode(tmp_path, capsys):
    inst, _, _ = rounding_fixture(5, max_nodes=20)
    path = tmp_path / "f.lcst"
    path.write_text(serialize_lcst(inst))
    assert main(["lcst", str(path), "--backend", "dist"]) == 0
    assert "nodes: " in capsys.readouterr().out


def test_parse_caps():
    assert parse_caps("nodes=5,twigs=6,lp=7") == {"max_nodes": 5, "max_twigs": 6,
                                                  "max_lp_vars": 7}
