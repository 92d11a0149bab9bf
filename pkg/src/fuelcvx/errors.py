"""Exception types shared across the package.

Dimension and argument mistakes raise plain ``ValueError``. Conditions that
make a problem mathematically unusable (an invalid input set, an
uncontrollable pair) raise :class:`ValidationError`, which carries a ``kind``
tag so callers such as the CLI can map the failure to an exit code without
parsing the message.
"""

from __future__ import annotations


class ValidationError(ValueError):
    """A problem definition failed validation.

    Parameters
    ----------
    message:
        Human-readable description of what failed.
    kind:
        Short machine-readable tag, e.g. ``"input_set"`` or
        ``"controllability"``.
    """

    def __init__(self, message: str, kind: str = "validation"):
        super().__init__(message)
        self.kind = kind
