"""Decorators."""

# region #-- imports --#
from __future__ import annotations

import functools

from .exceptions import DatasetStateError

# endregion


def needs_decomposed(func):
    """Ensure that every dataset passed in has been decomposed into IMFs."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        """Wrap the required function."""
        for value in (*args, *kwargs.values()):
            if getattr(value, "decomposed", True) is False:
                raise DatasetStateError(expected_decomposed=True) from None

        ret = func(*args, **kwargs)
        return ret

    return wrapper
