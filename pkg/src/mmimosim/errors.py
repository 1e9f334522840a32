"""Exception types shared across the package.

The command line maps these onto process exit codes: configuration
problems exit 2, numerical failures exit 3, and I/O errors (plain
OSError) exit 4.
"""


class ScenarioError(ValueError):
    """Invalid configuration or malformed input data.

    The message lists every violation found, separated by "; ", so a
    caller never has to fix problems one at a time.
    """


class NumericalError(RuntimeError):
    """A computation failed for numerical reasons."""


class RankDeficientChannelError(NumericalError):
    """A detector that requires full column rank was given a channel
    without it (for example two users with identical channel rows)."""
