import json
import socket
import subprocess
import sys

import pytest

from ihda.cli import main
from ihda.plantsim import Scenario

from test_plantsim import _serve_in_thread

INV = ["--invariant", "!L2 | !Pusher", "--invariant", "!R2 | !Pusher"]
RESTRICT = [
    "--restrict", "p_L2=L2 & !Pusher",
    "--restrict", "p_R2=R2 & !Pusher",
    "--restrict", "p_pusher=!L2 & !R2 & Pusher",
]


def test_build_counts(capsys, tmp_path):
    assert main(["build", "transfer_buggy"]) == 0
    out = capsys.readouterr().out
    assert "dim 3: 2" in out
    assert main(["build", "transfer_fixed", "--out", str(tmp_path / "f.json")]) == 0
    out = capsys.readouterr().out
    assert "dim 3" not in out and "dim 2: 6" in out
    assert json.loads((tmp_path / "f.json").read_text())["cells"]


def test_build_empty_net(tmp_path, capsys):
    p = tmp_path / "empty.ipn"
    p.write_text("places:\n")
    assert main(["build", str(p)]) == 0
    assert "dim 0: 1" in capsys.readouterr().out


def test_check_invariants(capsys, tmp_path):
    assert main(["check", "transfer_buggy", *INV, "--json", str(tmp_path / "r.json")]) == 1
    out = capsys.readouterr().out
    assert "t_B,t_E,t_F" in out and "t_C,t_E,t_F" in out
    assert "witness: t_A ; t_G" in out
    data = json.loads((tmp_path / "r.json").read_text())
    assert sum(f["maximal"] for f in data["findings"]) == 2
    assert main(["check", "transfer_fixed", *INV]) == 0
    assert main(["check", "transfer_buggy"]) == 0


def test_check_restriction(capsys):
    assert main(["check", "transfer_buggy", *RESTRICT]) == 1
    out = capsys.readouterr().out
    assert "output requires Pusher and !Pusher" in out
    assert main(["check", "transfer_fixed", *RESTRICT]) == 0


@pytest.mark.parametrize(
    "argv",
    [
        ["check", "no_such_model"],
        ["check", "transfer_buggy", "--invariant", "!Nope | R1"],
        ["check", "transfer_buggy", "--restrict", "p_L2"],
        ["check", "transfer_buggy", "--restrict", "p_L2=L2 & !L2"],
        ["export", "transfer_fixed", "--k", "-1"],
        ["bogus"],
        [],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_parse_error_exit_code(tmp_path):
    p = tmp_path / "bad.ipn"
    p.write_text("places:\n  p0\ntransitions:\n  t0 pre ghost\n")
    assert main(["build", str(p)]) == 2


def test_budget_exit_code(tmp_path):
    p = tmp_path / "pump.ipn"
    p.write_text("places:\n  p tokens 1\n  q\ntransitions:\n  t pre p post p q\n")
    assert main(["build", str(p)]) == 2


def test_export(tmp_path, capsys):
    from ihda import models
    from ihda.hda import pn_to_hda

    zeros = len(pn_to_hda(models.load("transfer_fixed")).cells_of_dim(0))
    dot = tmp_path / "k1.dot"
    assert main(["export", "transfer_fixed", "--k", "1", "--dot", str(dot)]) == 0
    text = dot.read_text()
    nodes = [ln for ln in text.splitlines() if ln.strip().startswith("z")
             and "->" not in ln]
    assert len(nodes) == zeros
    assert main(["export", "transfer_fixed", "--k", "0", "--dot", str(dot)]) == 0
    assert "->" not in dot.read_text()
    js = tmp_path / "all.json"
    assert main(["export", "transfer_buggy", "--k", "3", "--json", str(js)]) == 0
    assert main(["export", "transfer_buggy", "--k", "3", "--dot", str(dot)]) == 2


def test_run_and_conform(tmp_path, capsys):
    box, th = _serve_in_thread(scenario=Scenario.press_start(3))
    trace = tmp_path / "trace.jsonl"
    assert main(["run", "transfer_fixed", "--connect", f"127.0.0.1:{box['port']}",
                 "--trace", str(trace)]) == 0
    th.join(10)
    assert box["result"].reason == "cycle complete"
    records = [json.loads(ln) for ln in trace.read_text().splitlines()]
    assert records[3]["step"] == ["t_A"]
    assert main(["conform", "transfer_fixed", str(trace)]) == 0
    assert main(["conform", "transfer_fixed", str(trace), "--strict-iv-a"]) == 1

    k = next(n for n, r in enumerate(records) if len(r["step"]) == 2)
    name = next(n for n, v in records[k]["outputs"].items() if v)
    records[k]["outputs"][name] = False
    bad = tmp_path / "bad.jsonl"
    bad.write_text("".join(json.dumps(r) + "\n" for r in records))
    assert main(["conform", "transfer_fixed", str(bad)]) == 1

    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["conform", "transfer_fixed", str(empty)]) == 0


def test_run_refuses_buggy_with_findings(capsys):
    assert main(["run", "transfer_buggy", *INV, "--connect", "127.0.0.1:9"]) == 1
    assert "refusing" in capsys.readouterr().err


def test_run_connection_error():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    assert main(["run", "transfer_fixed", "--connect", f"127.0.0.1:{port}"]) == 3


def test_run_forced_restricted_buggy_halts(capsys):
    box, th = _serve_in_thread(scenario=Scenario.press_start(3))
    code = main(["run", "transfer_buggy", *RESTRICT, "--force",
                 "--connect", f"127.0.0.1:{box['port']}"])
    th.join(10)
    assert code == 3
    assert "controller halted" in capsys.readouterr().err


def test_simulate_timeout():
    assert main(["simulate", "--port", "0", "--accept-timeout", "0.2"]) == 3


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "ihda.cli", "build", "transfer_fixed"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "dim 2: 6" in r.stdout
