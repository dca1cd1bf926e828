"""Controller/plant loops, in-process or over the TCP line protocol."""

from __future__ import annotations

import socket
from dataclasses import dataclass, field
from typing import Sequence

from .controller import ControllerHalted, ControllerState, cycle, trace_record
from .cube import Clause
from .plantsim import Plant, ProtocolError, recv, send
from .translate import IHDA


@dataclass
class LoopResult:
    trace: list[dict] = field(default_factory=list)
    state: ControllerState | None = None
    halted: str | None = None
    reason: str = ""


def simulate(
    ihda: IHDA,
    plant: Plant,
    invariants: Sequence[Clause] = (),
    max_cycles: int = 200,
    stop_when_home: bool = True,
) -> LoopResult:
    """Run controller and plant in lock step without a socket."""
    state = ControllerState.initial(ihda)
    res = LoopResult(state=state)
    while plant.cycle < max_cycles:
        raw = plant.observe()
        i = ihda.inputs.valuation(raw)
        try:
            o, nxt = cycle(ihda, state, i, invariants)
        except ControllerHalted as e:
            res.halted, res.state = e.reason, e.state
            res.reason = "halted"
            return res
        res.trace.append(trace_record(ihda, state, i, o, nxt.last_step))
        state = nxt
        out = o.as_dict()
        plant.actuate(out)
        if stop_when_home and plant.back_home(out):
            res.reason = "cycle complete"
            break
    else:
        res.reason = "cycle limit reached"
    res.state = state
    return res


def run_client(
    ihda: IHDA,
    host: str,
    port: int,
    invariants: Sequence[Clause] = (),
    timeout: float = 30.0,
) -> LoopResult:
    """Connect to a plant server and control it until it says bye.

    Raises ``ProtocolError`` on a handshake mismatch and ``ControllerHalted``
    (after telling the plant) if no admissible output exists.
    """
    state = ControllerState.initial(ihda)
    res = LoopResult(state=state)
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.settimeout(None)
        f = sock.makefile("rwb")
        try:
            hello = recv(f).get("hello")
            if not isinstance(hello, dict):
                raise ProtocolError("expected hello")
            mine_in, mine_out = ihda.inputs.names, ihda.outputs.names
            if set(hello.get("inputs", ())) != set(mine_in) or set(
                hello.get("outputs", ())
            ) != set(mine_out):
                reason = (
                    f"protocol error: proposition mismatch, plant offers "
                    f"{hello.get('inputs')}/{hello.get('outputs')}, model uses "
                    f"{list(mine_in)}/{list(mine_out)}"
                )
                send(f, {"bye": reason})
                raise ProtocolError(reason)
            send(f, {"ack": True, "inputs": list(mine_in), "outputs": list(mine_out)})
            while True:
                msg = recv(f)
                if "bye" in msg:
                    res.reason = str(msg["bye"])
                    break
                if "inputs" not in msg:
                    raise ProtocolError(f"unexpected message {msg!r}")
                i = ihda.inputs.valuation(msg["inputs"])
                try:
                    o, nxt = cycle(ihda, state, i, invariants)
                except ControllerHalted as e:
                    send(f, {"bye": f"controller halted: {e.reason}"})
                    res.halted, res.state = e.reason, e.state
                    raise
                res.trace.append(trace_record(ihda, state, i, o, nxt.last_step))
                state = nxt
                send(f, {"outputs": o.as_dict()})
        finally:
            f.close()
    res.state = state
    return res
