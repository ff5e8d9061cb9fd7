"""An abstract machine with reflective, progressively checked continuations."""

from ovv.checker import Rejected, check_state, chk_state
from ovv.machine import DEFAULT_FUEL, Machine, close, is_final, run, step
from ovv.state import Final, MachineState, OutOfFuel, Stuck, StuckKind, initial_state

__all__ = [
    "DEFAULT_FUEL", "Final", "Machine", "MachineState", "OutOfFuel", "Rejected", "Stuck",
    "StuckKind", "check_state", "chk_state", "close", "initial_state", "is_final", "run", "step",
]
