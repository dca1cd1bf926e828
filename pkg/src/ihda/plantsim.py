"""Deterministic simulation of the two-chariot transfer cell.

Geometry (upper axis): position 0 is the transfer dock (sensor l1), ``d1``
the loading dock (r1). Lower axis: 0 is the unloading dock (l2), ``d2`` the
transfer dock (r2). Everything advances by integer ticks.

Sensors are pure functions of the state:

* ``press_R``: the upper chariot carries a load,
* ``press_L``: the lower chariot is at the unloading dock and empty, i.e.
  the pusher has released its load,
* ``press_T``: a box sits on the transfer dock.

The wire protocol is newline-delimited JSON over TCP with the plant as
server. See ``serve``.
"""

from __future__ import annotations

import json
import logging
import socket
import time
from dataclasses import dataclass, field, replace
from typing import Mapping

log = logging.getLogger(__name__)

INPUTS = ("start", "l1", "r1", "press_R", "press_L", "l2", "r2", "press_T")
OUTPUTS = ("R1", "Load", "Pusher", "L2", "R2", "L1", "Transfer")

EXIT_OK = 0
EXIT_RUNTIME = 3


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class PlantConfig:
    d1: int = 5
    d2: int = 5
    stroke: int = 2
    load_dwell: int = 2
    transfer_dwell: int = 2


@dataclass(frozen=True)
class PlantState:
    upper_pos: int
    lower_pos: int
    upper_loaded: bool
    lower_loaded: bool
    transfer_box_present: bool
    pusher_ext: int
    load_timer: int
    transfer_timer: int
    start_latch: bool = False
    forced: tuple[tuple[str, bool], ...] = ()
    fault: str | None = None

    def configuration(self) -> PlantState:
        """The state without the per-tick button and fault fields."""
        return replace(self, start_latch=False, forced=(), fault=None)


def initial_state(cfg: PlantConfig = PlantConfig()) -> PlantState:
    """Both chariots at the transfer dock, empty, a box waiting there."""
    return PlantState(
        upper_pos=0,
        lower_pos=cfg.d2,
        upper_loaded=False,
        lower_loaded=False,
        transfer_box_present=True,
        pusher_ext=0,
        load_timer=cfg.load_dwell,
        transfer_timer=cfg.transfer_dwell,
    )


def sensors(s: PlantState, cfg: PlantConfig = PlantConfig()) -> dict[str, bool]:
    values = {
        "start": s.start_latch,
        "l1": s.upper_pos == 0,
        "r1": s.upper_pos == cfg.d1,
        "press_R": s.upper_loaded,
        "press_L": s.lower_pos == 0 and not s.lower_loaded,
        "l2": s.lower_pos == 0,
        "r2": s.lower_pos == cfg.d2,
        "press_T": s.transfer_box_present,
    }
    values.update(s.forced)
    return values


def plant_step(
    s: PlantState, o: Mapping[str, bool], cfg: PlantConfig = PlantConfig()
) -> tuple[PlantState, dict[str, bool]]:
    """Advance one tick under actuator valuation ``o``."""
    faults = []
    up, low = s.upper_pos, s.lower_pos
    if o["R1"] and o["L1"]:
        faults.append("R1 and L1 both active")
    elif o["R1"]:
        up = min(up + 1, cfg.d1)
    elif o["L1"]:
        up = max(up - 1, 0)
    if o["L2"] and o["R2"]:
        faults.append("L2 and R2 both active")
    elif o["L2"]:
        low = max(low - 1, 0)
    elif o["R2"]:
        low = min(low + 1, cfg.d2)

    upper_loaded, lower_loaded = s.upper_loaded, s.lower_loaded
    box = s.transfer_box_present

    ext = min(s.pusher_ext + 1, cfg.stroke) if o["Pusher"] else max(s.pusher_ext - 1, 0)
    if ext == cfg.stroke and low == 0 and lower_loaded:
        lower_loaded = False

    load_timer = s.load_timer
    if o["Load"] and up == cfg.d1 and not upper_loaded:
        load_timer -= 1
        if load_timer <= 0:
            upper_loaded, load_timer = True, cfg.load_dwell

    transfer_timer = s.transfer_timer
    if o["Transfer"] and up == 0 and low == cfg.d2 and box and not lower_loaded:
        transfer_timer -= 1
        if transfer_timer <= 0:
            box, lower_loaded, transfer_timer = False, True, cfg.transfer_dwell

    # a loaded upper chariot drops its box on the transfer dock
    if up == 0 and upper_loaded and not box:
        box, upper_loaded = True, False

    nxt = PlantState(
        upper_pos=up,
        lower_pos=low,
        upper_loaded=upper_loaded,
        lower_loaded=lower_loaded,
        transfer_box_present=box,
        pusher_ext=ext,
        load_timer=load_timer,
        transfer_timer=transfer_timer,
        fault="; ".join(faults) or None,
    )
    return nxt, sensors(nxt, cfg)


@dataclass
class Scenario:
    """Scripted input overrides, ``{cycle: {input: value}}``.

    ``start`` presses the start button for that cycle; other names force the
    sensor value for that cycle.
    """

    script: dict[int, dict[str, bool]] = field(default_factory=dict)

    def __post_init__(self):
        for k, over in self.script.items():
            unknown = set(over) - set(INPUTS)
            if unknown:
                raise ValueError(f"scenario cycle {k}: unknown inputs {sorted(unknown)}")

    @classmethod
    def press_start(cls, at: int = 3) -> Scenario:
        return cls({at: {"start": True}})

    def apply(self, n: int, s: PlantState) -> PlantState:
        over = self.script.get(n)
        if not over:
            return s
        forced = tuple((k, v) for k, v in over.items() if k != "start")
        return replace(s, start_latch=over.get("start", s.start_latch), forced=forced)

    @property
    def started_by(self) -> int:
        presses = [k for k, over in self.script.items() if over.get("start")]
        return min(presses, default=-1)


class Plant:
    """Lock-step plant: ``observe`` the sensors for cycle n, then ``actuate``."""

    def __init__(self, cfg: PlantConfig = PlantConfig(), scenario: Scenario | None = None):
        self.cfg = cfg
        self.scenario = scenario or Scenario()
        self.state = initial_state(cfg)
        self.cycle = 0
        self.left_home = False

    def observe(self) -> dict[str, bool]:
        self.state = self.scenario.apply(self.cycle, self.state)
        return sensors(self.state, self.cfg)

    def actuate(self, o: Mapping[str, bool]) -> None:
        self.state, _ = plant_step(self.state, o, self.cfg)
        self.cycle += 1
        if self.state.configuration() != initial_state(self.cfg):
            self.left_home = True

    def back_home(self, last_outputs: Mapping[str, bool]) -> bool:
        """Left and came back to the initial configuration; actuators idle."""
        return (
            self.left_home
            and self.state.configuration() == initial_state(self.cfg)
            and not any(last_outputs.values())
        )


# -- wire protocol ---------------------------------------------------------

def send(f, msg: dict) -> None:
    f.write((json.dumps(msg, sort_keys=True) + "\n").encode())
    f.flush()


def recv(f) -> dict:
    line = f.readline()
    if not line:
        raise ConnectionError("connection closed")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed message: {e}") from None
    if not isinstance(msg, dict):
        raise ProtocolError("malformed message: not an object")
    return msg


def _check_names(got, expected, what):
    if set(got) != set(expected):
        raise ProtocolError(
            f"{what} mismatch: expected {sorted(expected)}, got {sorted(got)}"
        )


def _valuation(msg: dict, key: str, names) -> dict[str, bool]:
    vals = msg.get(key)
    if not isinstance(vals, dict) or not all(isinstance(v, bool) for v in vals.values()):
        raise ProtocolError(f"expected {{{key!r}: {{name: bool}}}}, got {msg!r}")
    _check_names(vals, names, key)
    return vals


@dataclass
class ServeResult:
    exit_code: int
    reason: str
    cycles: int
    final_state: PlantState


def serve(
    port: int,
    cfg: PlantConfig = PlantConfig(),
    scenario: Scenario | None = None,
    period_ms: int = 1000,
    max_cycles: int = 200,
    accept_timeout: float = 30.0,
    host: str = "127.0.0.1",
    stop_when_home: bool = True,
    ready=None,
) -> ServeResult:
    """Run the plant for one controller connection.

    Handshake: the plant sends ``{"hello": {"inputs": [...], "outputs": [...]}}``
    and expects ``{"ack": true}`` (optionally repeating the name lists, which
    are then checked). Each cycle the plant sends ``{"cycle": n, "inputs":
    {...}}`` (plus ``"fault"`` when one is latched) and expects ``{"outputs":
    {...}}``; then it ticks. ``{"bye": reason}`` ends the session from
    either side. ``ready`` is called with the bound port once listening.
    """
    plant = Plant(cfg, scenario)
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    srv.settimeout(accept_timeout)
    if ready is not None:
        ready(srv.getsockname()[1])
    try:
        conn, addr = srv.accept()
    except socket.timeout:
        srv.close()
        return ServeResult(EXIT_RUNTIME, "no controller connected", 0, plant.state)
    log.info("controller connected from %s", addr)
    conn.settimeout(None)
    f = conn.makefile("rwb")
    code, reason = EXIT_OK, "done"
    try:
        send(f, {"hello": {"inputs": list(INPUTS), "outputs": list(OUTPUTS)}})
        ack = recv(f)
        if "bye" in ack:
            raise ProtocolError(f"controller left: {ack['bye']}")
        if ack.get("ack") is not True:
            raise ProtocolError(f"expected ack, got {ack!r}")
        if "inputs" in ack:
            _check_names(ack["inputs"], INPUTS, "inputs")
        if "outputs" in ack:
            _check_names(ack["outputs"], OUTPUTS, "outputs")
        while plant.cycle < max_cycles:
            i = plant.observe()
            msg = {"cycle": plant.cycle, "inputs": i}
            if plant.state.fault:
                msg["fault"] = plant.state.fault
            send(f, msg)
            reply = recv(f)
            if "bye" in reply:
                reason = f"controller: {reply['bye']}"
                code = EXIT_OK
                break
            o = _valuation(reply, "outputs", OUTPUTS)
            plant.actuate(o)
            if stop_when_home and plant.back_home(o):
                reason = "cycle complete"
                break
            if period_ms:
                time.sleep(period_ms / 1000)
        else:
            reason = "cycle limit reached"
        try:
            send(f, {"bye": reason})
        except OSError:
            pass
    except ProtocolError as e:
        code, reason = EXIT_RUNTIME, f"protocol error: {e}"
        try:
            send(f, {"bye": reason})
        except OSError:
            pass
    except (ConnectionError, OSError) as e:
        code, reason = EXIT_RUNTIME, f"connection lost: {e}"
    finally:
        f.close()
        conn.close()
        srv.close()
    log.info("plant stopped after %d cycles: %s", plant.cycle, reason)
    return ServeResult(code, reason, plant.cycle, plant.state)
