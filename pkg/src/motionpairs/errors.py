"""Exception types shared across the toolkit.

CLI exit codes are attached to the classes so the command layer can map
failures without a lookup table.
"""


class MotionPairsError(Exception):
    exit_code = 1


class ConfigError(MotionPairsError, ValueError):
    """Invalid or unsatisfiable configuration."""

    exit_code = 1


class AssetError(MotionPairsError):
    """Missing or unusable sprite / background assets."""

    exit_code = 2


class PartialFailureError(MotionPairsError):
    """Per-record failures exceeded the configured cap."""

    exit_code = 3


class GatewayError(MotionPairsError):
    """Paraphrase endpoint exhausted its retries."""

    exit_code = 1

    def __init__(self, message, last_status=None):
        super().__init__(message)
        self.last_status = last_status
