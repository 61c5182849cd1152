"""Error taxonomy shared across the simulator.

Exit codes used by the CLI: 0 ok, 2 configuration, 3 ingestion,
4 divergence, 5 certificate inconsistency. Everything else exits 1.
"""


class SimulatorError(Exception):
    """Base class for all simulator errors."""

    exit_code = 1


class ConfigError(SimulatorError):
    """Invalid configuration or precondition violation detected before compute."""

    exit_code = 2


class IngestError(SimulatorError):
    """Malformed or inconsistent input data file."""

    exit_code = 3


class DivergenceError(SimulatorError):
    """A run produced a non-finite state coordinate."""

    exit_code = 4

    def __init__(self, agent: int, round_index: int, field: str = "x"):
        self.agent = agent
        self.round_index = round_index
        self.field = field
        super().__init__(
            f"non-finite {field} for agent {agent} at round {round_index}"
        )


class CertificateError(SimulatorError):
    """Stability-certificate construction or verification failed."""

    exit_code = 5


class AnalysisError(SimulatorError):
    """An iterative numerical routine failed to converge."""


class DiagnosticsError(SimulatorError):
    """A diagnostic quantity could not be computed to the requested accuracy."""


class StreamError(SimulatorError):
    """A minibatch stream was exhausted without cycling enabled."""
