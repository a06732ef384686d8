"""Exception types shared across the toolkit."""


class BattArbError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(BattArbError):
    """Invalid configuration, scenario definition, or parameter file."""


class DataSchemaError(BattArbError):
    """An input file violates its declared schema."""


class MeasurementError(BattArbError):
    """A simulated capacity measurement could not be completed."""


class ProtocolError(BattArbError):
    """An aging protocol cannot be executed as specified."""


class DegenerateProfileError(BattArbError):
    """No feasible down-scaling of a control profile exists."""


class AccountingError(BattArbError):
    """Profile replay violated safety limits, so accounting was refused."""


class KineticsError(BattArbError):
    """Electrode kinetics evaluated outside their valid domain."""
