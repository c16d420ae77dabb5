class ConfigError(ValueError):
    """Invalid parameters, scenario files, gains or controller ids."""


class ScheduleError(ConfigError):
    """Loop rates that the physics step cannot realise."""


class SimulationDivergence(RuntimeError):
    """Non-finite plant state or controller command."""

    def __init__(self, message, time_s=None):
        if time_s is not None:
            message = f"{message} (t={time_s:.4f} s)"
        super().__init__(message)
        self.time_s = time_s


class CodecError(ValueError):
    """Out-of-range frame field or malformed payload."""


class TraceError(ValueError):
    """Empty trace or empty statistics window."""
