import json

import pytest

from esfts.cli import main


def run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def test_dump_example_round_trip(tmp_path, capsys):
    assert main(["--dump-example", "ex1"]) == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["grid_n"] == 100 and obj["Delta"] == 0.09
    path = tmp_path / "ex1.json"
    path.write_text(json.dumps(obj))
    assert run(tmp_path, "bound", "--problem", str(path), "--ka", "0.04") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["bound"]["omega_2nd"] == pytest.approx(479.2, abs=0.1)


def test_exit_codes(tmp_path):
    assert run(tmp_path, "synth", "--example", "ex1", "--delta", "0.5") == 2
    assert run(tmp_path, "synth", "--problem", str(tmp_path / "missing.json")) == 5
    assert run(tmp_path, "synth") == 2
    assert run(tmp_path, "bound", "--example", "ex1", "--ka", "fast") == 2
    assert main([]) == 2


def test_synthesis_infeasible_exit(tmp_path):
    assert run(tmp_path, "synth", "--example", "ex3", "--ka-max", "0.05") == 3


def test_low_frequency_verify_fails(tmp_path, capsys):
    code = run(tmp_path, "verify", "--example", "ex1", "--ka", "reported", "--omega", "7.5",
               "--seed", "7")
    assert code == 4
    assert "max |x - xbar|" in capsys.readouterr().err
    for name in ("traj_closed_loop.csv", "traj_averaged.csv", "traj_open_loop.csv",
                 "plotdata_ellipses.csv"):
        assert (tmp_path / name).exists()
    header = (tmp_path / "traj_averaged.csv").read_text().splitlines()[0]
    assert header == "t,x1,x2,vbar"


def test_reports_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["simulate", "--example", "ex3", "--ka", "0.14", "--seed", "3", "--out", str(out)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert "created" in json.loads((a / "metadata.json").read_text())


def test_synth_then_verify_from_file(tmp_path):
    syn = tmp_path / "syn"
    assert main(["synth", "--example", "ex3", "--out", str(syn), "--sdp-text"]) == 0
    assert (syn / "sdp_ka0.txt").read_text().startswith("sdp n=2 nodes=301")
    rep = json.loads((syn / "report.json").read_text())
    assert rep["synthesis"]["ka"] == pytest.approx(0.14)
    ver = tmp_path / "ver"
    assert main(["verify", "--example", "ex3", "--synthesis", str(syn / "report.json"), "--seed", "7",
                 "--out", str(ver)]) == 0
    v = json.loads((ver / "report.json").read_text())["verification"]
    assert v["passes"] == v["runs"] == 5 and v["sign_flip"]["passes"] == 5
