class ConfigurationError(ValueError):
    """Inconsistent sizes or parameters handed to a controller component."""


class CalibrationError(RuntimeError):
    pass


class SimulationError(RuntimeError):
    """The physics integration diverged."""


class GenerationError(RuntimeError):
    """Peg placement could not satisfy the requested density and spacing."""


class ExportError(RuntimeError):
    """Raised when plot data cannot be exported."""
