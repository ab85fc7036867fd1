"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SwitchlabError(Exception):
    """Base class."""


class MissingVariableError(SwitchlabError, KeyError):
    """An assignment did not cover a variable that had to be read."""

    def __init__(self, var):
        super().__init__(var)
        self.var = var

    def __str__(self):
        return f"assignment does not cover {self.var}"


class MalformedRestrictionError(SwitchlabError, ValueError):
    pass


class OverlapError(SwitchlabError, ValueError):
    def __init__(self, clashes):
        self.clashes = list(clashes)
        super().__init__(f"assigned domains overlap on {len(self.clashes)} variable(s): "
                         + ", ".join(map(str, self.clashes[:8])))


class QuotaError(SwitchlabError, ValueError):
    """A group had fewer star blocks than the requested quota."""

    def __init__(self, group, have, need):
        self.group, self.have, self.need = group, have, need
        super().__init__(f"group {group} has {have} star block(s), needs {need}")


def _short(n) -> str:
    # huge ints would trip the int-to-str digit limit
    if isinstance(n, int) and n.bit_length() > 64:
        return f"~2^{n.bit_length() - 1}"
    return str(n)


class BudgetExceededError(SwitchlabError):
    def __init__(self, what, needed, budget):
        self.needed, self.budget = needed, budget
        super().__init__(f"{what}: needs {_short(needed)}, budget is {_short(budget)}")


class TriesExhaustedError(SwitchlabError):
    def __init__(self, tries, failures):
        self.tries = tries
        self.failures = dict(failures)
        worst = max(self.failures, key=self.failures.get) if self.failures else None
        self.worst = worst
        super().__init__(f"no acceptable restriction in {tries} tries; "
                         f"most frequent failure: {worst} ({self.failures.get(worst, 0)}x)")


class EncodingError(SwitchlabError):
    """Internal inconsistency while building a code bundle."""


class MalformedBundleError(SwitchlabError, ValueError):
    pass


class MarkerMissingError(SwitchlabError, ValueError):
    pass


class HellerExhaustedError(SwitchlabError):
    def __init__(self, a):
        self.a = a
        super().__init__(f"every designated variable of input {a!r} is already set")


class ConfigError(SwitchlabError, ValueError):
    def __init__(self, message, path=()):
        self.path = list(path)
        super().__init__(message)
