import json
import math

import pytest

from isgraph import __version__
from isgraph.bounds import hex_bound_report, square_supercritical_check
from isgraph.channel import ChannelParams, UnboundedPowerLaw
from isgraph.cli import CSV_COLUMNS, main, parse_grid, ConfigError
from isgraph.graph import read_dump

HEADER = "lambda_l,mode,p_hat,ci_low,ci_high,trials,successes,L,R,rho,lambda_e,seed"


def run(tmp_path, cmd, *sets, config=None, sub="out"):
    argv = [cmd, "--out", str(tmp_path / sub)]
    if config:
        argv += ["--config", str(config)]
    for s in sets:
        argv += ["--set", s]
    return main(argv)


def test_header_constant():
    assert ",".join(CSV_COLUMNS) == HEADER


def test_parse_grid():
    assert parse_grid("1:2:0.5") == [1.0, 1.5, 2.0]
    assert parse_grid("1,3,7") == [1.0, 3.0, 7.0]
    assert len(parse_grid("1:10:0.5")) == 19
    with pytest.raises(ConfigError):
        parse_grid("3,2")
    with pytest.raises(ConfigError):
        parse_grid("1:2:0")


def test_seed_is_required(tmp_path, capsys):
    assert run(tmp_path, "simulate", "trials=2") == 2
    assert "seed" in capsys.readouterr().err


def test_bad_config_values(tmp_path):
    assert run(tmp_path, "simulate", "seed=1", "model=nope") == 2
    assert run(tmp_path, "simulate", "seed=1", "colour=blue") == 2
    assert run(tmp_path, "simulate", "seed=1", "modes=sideways") == 2
    assert run(tmp_path, "sweep", "seed=1", "lambda_grid=3,1") == 2
    assert run(tmp_path, "simulate", "seed=1", "R=50") == 2


def test_missing_config_file_is_io_error(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 3


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--out", str(blocker / "sub"), "--set", "seed=1", "--set", "trials=1"]) == 3


def test_graph_empty_legit(tmp_path):
    assert run(tmp_path, "graph", "seed=4", "lambda_l=0") == 0
    out = tmp_path / "out"
    assert (out / "nodes.txt").read_text() == "0 0 0\n"
    assert (out / "edges.txt").read_text() == ""
    assert (out / "graph.svg").read_text().startswith("<svg")


def test_graph_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert run(tmp_path, "graph", "seed=8", "lambda_l=2", "L=4", sub=sub) == 0
    for name in ("nodes.txt", "radii.txt", "edges.txt", "eaves.txt", "graph.svg", "graph.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_graph_dump_rho0_recheck(tmp_path):
    assert run(tmp_path, "graph", "seed=2", "lambda_l=3", "L=4") == 0
    d = read_dump(tmp_path / "out")
    x, e = d["nodes"], d["eaves"]
    assert len(d["edges"]) > 0
    for i, j in d["edges"]:
        assert math.dist(x[i], x[j]) < min(math.dist(x[i], ek) for ek in e)
    meta = json.loads((tmp_path / "out" / "graph.json").read_text())
    assert meta["version"] == __version__ and meta["config"]["seed"] == "2"


@pytest.mark.parametrize("mode", ["out", "weak", "strong"])
def test_graph_svg_modes(tmp_path, mode):
    assert run(tmp_path, "graph", "seed=2", "lambda_l=3", "L=3", f"svg_mode={mode}") == 0
    svg = (tmp_path / "out" / "graph.svg").read_text()
    assert ("marker-end" in svg) == (mode == "out")


def test_sweep_one_point_one_trial(tmp_path):
    assert run(tmp_path, "sweep", "seed=1", "lambda_grid=3", "trials=1", "modes=weak", "L=4") == 0
    lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert lines[0] == HEADER
    assert len(lines) == 2
    fields = lines[1].split(",")
    assert fields[0] == "3" and fields[1] == "weak" and fields[5] == "1" and fields[-1] == "1"


def test_sweep_rerun_identical_bytes(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# small density sweep\nseed = 5\nlambda_grid = 1:4:1\ntrials = 6\nL = 4\n"
                   "modes = weak,strong,out,in\n")
    assert run(tmp_path, "sweep", config=cfg, sub="a") == 0
    assert run(tmp_path, "sweep", config=cfg, sub="b") == 0
    for name in ("sweep.csv", "sweep.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rep = json.loads((tmp_path / "a" / "sweep.json").read_text())
    assert rep["config"]["lambda_grid"] == "1:4:1" and rep["truncated"] is False
    assert set(rep["critical_density"]) == {"weak", "strong", "out", "in"}
    assert len((tmp_path / "a" / "sweep.csv").read_text().splitlines()) == 1 + 4 * 4


def test_overrides_win(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("seed = 5\nlambda_l = 2\ntrials = 3\nL = 4\n")
    assert run(tmp_path, "simulate", "trials=2", config=cfg) == 0
    rep = json.loads((tmp_path / "out" / "simulate.json").read_text())
    assert rep["config"]["trials"] == "2"
    assert rep["results"][0]["trials"] == 2


def test_snr_in_db(tmp_path):
    assert run(tmp_path, "simulate", "seed=1", "trials=1", "snr0_db=10", "L=3") == 0
    rep = json.loads((tmp_path / "out" / "simulate.json").read_text())
    assert float(rep["config"]["snr0"]) == pytest.approx(10.0)


def test_sweep_rho_csv(tmp_path):
    assert run(tmp_path, "sweep-rho", "seed=3", "rho_grid=0,1,2", "trials=3", "L=4", "lambda_l=4") == 0
    lines = (tmp_path / "out" / "sweep_rho.csv").read_text().splitlines()
    assert lines[0] == HEADER and len(lines) == 4
    assert [ln.split(",")[9] for ln in lines[1:]] == ["0", "1", "2"]


def test_sweep_interrupt_flushes_partial(tmp_path, monkeypatch):
    import isgraph.cli as cli

    real = cli.outcome_tensor

    def interrupted(*args, on_chunk=None, **kw):
        kw["chunk"] = 2
        calls = {"n": 0}

        def hook(t):
            on_chunk(t)
            calls["n"] += 1
            if calls["n"] == 2:
                raise KeyboardInterrupt

        return real(*args, on_chunk=hook, **kw)

    monkeypatch.setattr(cli, "outcome_tensor", interrupted)
    code = run(tmp_path, "sweep", "seed=1", "lambda_grid=1,2", "trials=10", "L=3", "modes=weak")
    assert code == 130
    rep = json.loads((tmp_path / "out" / "sweep.json").read_text())
    assert rep["truncated"] is True and rep["trials_completed"] == 4
    assert (tmp_path / "out" / "sweep.csv").read_text().splitlines()[1].split(",")[5] == "4"


def test_bounds_report(tmp_path):
    assert run(tmp_path, "bounds", "lambda_l_grid=0,0.01,5", "lambda_e_grid=1", "d=0.1") == 0
    rep = json.loads((tmp_path / "out" / "bounds.json").read_text())
    pts = rep["points"]
    assert len(pts) == 3
    assert pts[0]["hex"]["condition_met"] is True
    p, m = ChannelParams(10.0), UnboundedPowerLaw(4.0)
    for entry in pts:
        hx = hex_bound_report(entry["lambda_l"], entry["lambda_e"])
        sq = square_supercritical_check(entry["lambda_l"], entry["lambda_e"], p, m, 0.1)
        assert entry["hex"]["p_closed"] == pytest.approx(hx.p_closed, rel=1e-8)
        assert entry["hex"]["delta"] == pytest.approx(hx.delta, rel=1e-8)
        for key in ("r_free", "q", "peierls_threshold"):
            assert entry["square"][key] == pytest.approx(getattr(sq, key), rel=1e-8)
        for key in ("m", "n_s", "n_e", "condition_met"):
            assert entry["square"][key] == getattr(sq, key)


def test_bounds_invalid_d_per_point(tmp_path):
    assert run(tmp_path, "bounds", "lambda_l_grid=1,2", "rho=1", "d=5") == 0
    rep = json.loads((tmp_path / "out" / "bounds.json").read_text())
    assert all("error" in e["square"] for e in rep["points"])
    assert all("p_closed" in e["hex"] for e in rep["points"])
