import json
import socket
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ihda.closedloop import run_client
from ihda.controller import ControllerHalted
from ihda.plantsim import (
    INPUTS,
    OUTPUTS,
    Plant,
    PlantConfig,
    ProtocolError,
    Scenario,
    initial_state,
    plant_step,
    sensors,
    serve,
)

CFG = PlantConfig()
OFF = {n: False for n in OUTPUTS}


def on(*names):
    return dict(OFF, **{n: True for n in names})


def test_upper_reaches_loading_dock():
    s = initial_state(CFG)
    s = s.__class__(**{**s.__dict__, "upper_pos": CFG.d1 - 1})
    s2, i = plant_step(s, on("R1"), CFG)
    assert s2.upper_pos == CFG.d1 and i["r1"] and not i["l1"]


def test_idle_outputs_change_nothing():
    s = initial_state(CFG)
    s2, i = plant_step(s, OFF, CFG)
    assert s2 == s and i == sensors(s, CFG)


def test_initial_sensors():
    i = sensors(initial_state(CFG), CFG)
    assert {n for n, v in i.items() if v} == {"l1", "r2", "press_T"}
    assert set(i) == set(INPUTS)


def test_opposite_actuators_fault():
    s2, _ = plant_step(initial_state(CFG), on("L2", "R2"), CFG)
    assert s2.fault and s2.lower_pos == CFG.d2


def test_pusher_ejects_only_when_extended_at_dock():
    s = initial_state(CFG).__class__(
        **{**initial_state(CFG).__dict__, "lower_pos": 0, "lower_loaded": True,
           "transfer_box_present": False}
    )
    assert not sensors(s, CFG)["press_L"]
    for _ in range(CFG.stroke - 1):
        s, i = plant_step(s, on("Pusher"), CFG)
        assert not i["press_L"]
    s, i = plant_step(s, on("Pusher"), CFG)
    assert i["press_L"] and not s.lower_loaded


def test_transfer_moves_box_onto_lower_chariot():
    s = initial_state(CFG)
    for _ in range(CFG.transfer_dwell):
        s, i = plant_step(s, on("Transfer"), CFG)
    assert s.lower_loaded and not i["press_T"]


def test_load_then_drop_on_transfer_dock():
    s = initial_state(CFG).__class__(
        **{**initial_state(CFG).__dict__, "upper_pos": CFG.d1, "transfer_box_present": False}
    )
    for _ in range(CFG.load_dwell):
        s, i = plant_step(s, on("Load"), CFG)
    assert i["press_R"]
    for _ in range(CFG.d1):
        s, i = plant_step(s, on("L1"), CFG)
    assert i["l1"] and i["press_T"] and not i["press_R"]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.fixed_dictionaries({n: st.booleans() for n in OUTPUTS}), max_size=30))
def test_sensor_consistency(outs):
    s = initial_state(CFG)
    for o in outs:
        s, i = plant_step(s, o, CFG)
        assert 0 <= s.upper_pos <= CFG.d1 and 0 <= s.lower_pos <= CFG.d2
        assert not (i["l1"] and i["r1"]) and not (i["l2"] and i["r2"])
        assert 0 <= s.pusher_ext <= CFG.stroke
        assert i == sensors(s, CFG)


def test_scenario():
    sc = Scenario.press_start(3)
    assert sc.started_by == 3
    s = initial_state(CFG)
    assert not sensors(sc.apply(2, s), CFG)["start"]
    assert sensors(sc.apply(3, s), CFG)["start"]
    forced = Scenario({1: {"r1": True}}).apply(1, s)
    assert sensors(forced, CFG)["r1"]
    with pytest.raises(ValueError):
        Scenario({0: {"bogus": True}})


def test_closed_loop_plant_back_home(fixed_run):
    res, plant = fixed_run
    assert res.reason == "cycle complete"
    assert plant.state.configuration() == initial_state(CFG)
    assert sensors(plant.state, CFG)["press_T"]
    assert len(res.trace) <= 200


def _serve_in_thread(**kw):
    box, ready = {}, threading.Event()

    def cb(port):
        box["port"] = port
        ready.set()

    def run():
        box["result"] = serve(0, ready=cb, period_ms=0, **kw)
        ready.set()

    th = threading.Thread(target=run, daemon=True)
    th.start()
    assert ready.wait(10)
    return box, th


def test_serve_closed_loop_over_tcp(fixed_ihda, fixed_run):
    box, th = _serve_in_thread(cfg=CFG, scenario=Scenario.press_start(3))
    res = run_client(fixed_ihda, "127.0.0.1", box["port"])
    th.join(10)
    assert box["result"].exit_code == 0 and box["result"].reason == "cycle complete"
    assert res.reason == "cycle complete"
    assert res.trace == fixed_run[0].trace
    assert [r["cycle"] for r in res.trace if r["step"] == ["t_A"]] == [3]


def test_serve_timeout_without_controller():
    box, th = _serve_in_thread(accept_timeout=0.2)
    th.join(10)
    assert box["result"].exit_code == 3


def _raw_client(port):
    sock = socket.create_connection(("127.0.0.1", port), timeout=10)
    return sock, sock.makefile("rwb")


def _send(f, msg):
    f.write((json.dumps(msg) + "\n").encode())
    f.flush()


def test_serve_rejects_mismatched_names():
    box, th = _serve_in_thread()
    sock, f = _raw_client(box["port"])
    hello = json.loads(f.readline())
    assert hello["hello"]["inputs"] == list(INPUTS)
    _send(f, {"ack": True, "inputs": ["a"], "outputs": list(OUTPUTS)})
    bye = json.loads(f.readline())
    assert "protocol error" in bye["bye"]
    sock.close()
    th.join(10)
    assert box["result"].exit_code == 3


def test_serve_rejects_malformed_reply():
    box, th = _serve_in_thread()
    sock, f = _raw_client(box["port"])
    f.readline()
    _send(f, {"ack": True})
    assert "inputs" in json.loads(f.readline())
    f.write(b"not json\n")
    f.flush()
    assert "malformed" in json.loads(f.readline())["bye"]
    sock.close()
    th.join(10)
    assert box["result"].exit_code == 3


def test_serve_rejects_partial_outputs():
    box, th = _serve_in_thread()
    sock, f = _raw_client(box["port"])
    f.readline()
    _send(f, {"ack": True})
    f.readline()
    _send(f, {"outputs": {"R1": True}})
    assert "mismatch" in json.loads(f.readline())["bye"]
    sock.close()
    th.join(10)
    assert box["result"].exit_code == 3


def test_client_detects_mismatch(buggy):
    from ihda.ipn import parse_ipn
    from ihda.translate import build_ihda

    other = build_ihda(parse_ipn("inputs: a\noutputs: X\nplaces:\n  p tokens 1\n"))
    box, th = _serve_in_thread()
    with pytest.raises(ProtocolError, match="mismatch"):
        run_client(other, "127.0.0.1", box["port"])
    th.join(10)
    assert box["result"].exit_code == 3


def test_client_halts_on_bot_step(restricted_buggy_ihda):
    # forced run of the restricted buggy model reaches a contradictory marking
    box, th = _serve_in_thread(scenario=Scenario.press_start(3), max_cycles=200)
    with pytest.raises(ControllerHalted):
        run_client(restricted_buggy_ihda, "127.0.0.1", box["port"])
    th.join(10)
    assert box["result"].reason.startswith("controller: controller halted")


def test_buggy_model_never_completes(buggy_ihda):
    from ihda.closedloop import simulate

    res = simulate(buggy_ihda, Plant(CFG, Scenario.press_start(3)), max_cycles=200)
    assert res.reason == "cycle limit reached"
