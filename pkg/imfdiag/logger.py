"""Logging."""

# region #-- imports --#
from __future__ import annotations

import sys

# endregion


class Logger:
    """Prefix log messages with the calling function and the unit of work."""

    def __init__(self, unique_id: str = "", prefix: str = ""):
        """Initialise."""
        self._unique_id: str = unique_id
        self._prefix: str = prefix

    def scoped(self, unique_id: str) -> Logger:
        """Formatter for a narrower unit of work, e.g. a single window."""
        if self._unique_id:
            unique_id = f"{self._unique_id}/{unique_id}"
        return Logger(unique_id=unique_id, prefix=self._prefix)

    def format(self, message: str) -> str:
        """Format a log message in the correct format."""
        caller = sys._getframe(1).f_code.co_name  # pylint: disable=protected-access
        unique_id = f" ({self._unique_id})" if self._unique_id else ""
        return f"{self._prefix}{caller}{unique_id} --> {message}"
