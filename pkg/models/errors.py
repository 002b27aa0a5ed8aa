"""
Error types raised by the simulator
"""


class SimulationError(Exception):
    """Base class for every simulator error"""


class DecodeError(SimulationError):
    """Unknown mnemonic or malformed operand"""

    def __init__(self, token: str, line: str = ""):
        self.token = token
        detail = f" in {line!r}" if line else ""
        super().__init__(f"cannot decode {token!r}{detail}")


class RegisterRangeError(SimulationError):
    """Register id outside the architectural register file"""


class ElementRangeError(SimulationError):
    """Element index beyond the configured maximum vector length"""


class AlignmentError(SimulationError):
    """Element address not a multiple of the element size"""


class MeasurementError(SimulationError):
    """Not enough events to take a measurement"""


class ConfigError(SimulationError):
    """Invalid machine, kernel or run configuration"""


class InvariantViolation(SimulationError):
    """A structural invariant of the machine was broken during simulation"""


class FunctionalMismatch(SimulationError):
    """Simulated output differs from the reference oracle"""
