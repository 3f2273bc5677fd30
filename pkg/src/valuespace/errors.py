"""Exception hierarchy shared by every module."""


class ValueSpaceError(Exception):
    """Base class for all engine errors."""


class DimensionMismatch(ValueSpaceError, ValueError):
    pass


class NonFinite(ValueSpaceError, ValueError):
    pass


class ZeroVector(ValueSpaceError, ValueError):
    pass


class NotSymmetric(ValueSpaceError, ValueError):
    pass


class NotPositiveDefinite(ValueSpaceError, ValueError):
    pass


class NotInjective(ValueSpaceError, ValueError):
    pass


class BrokenChain(ValueSpaceError, ValueError):
    """Consecutive maps in a path do not share agent ids or dimensions."""


class ZeroImage(ValueSpaceError, ValueError):
    """A map annihilates the vector that was supposed to be rescaled."""


class UnknownOrigin(ValueSpaceError, KeyError):
    pass


class OriginHoldsNothing(ValueSpaceError, ValueError):
    pass


class UnknownLeader(ValueSpaceError, KeyError):
    pass


class BadProbability(ValueSpaceError, ValueError):
    pass


class BadIndex(ValueSpaceError, IndexError):
    pass


class MissingMap(ValueSpaceError, KeyError):
    pass


class NoCandidates(ValueSpaceError, ValueError):
    pass


class DuplicateAxisLabel(ValueSpaceError, ValueError):
    pass


class HypothesisViolated(UserWarning):
    """Issued when a run proceeds although a theorem's hypothesis does not hold."""


class ParseError(ValueSpaceError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = f"{source or '<scenario>'}:{line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ScenarioValidationError(ValueSpaceError):
    """Carries every problem found in a scenario, not just the first."""

    def __init__(self, problems, source=None):
        # problems: list of (line or None, path, message)
        self.problems = list(problems)
        self.source = source
        super().__init__("\n".join(self.format_lines()))

    def format_lines(self):
        src = self.source or "<scenario>"
        out = []
        for line, path, message in self.problems:
            loc = f"{src}:{line}" if line is not None else src
            out.append(f"{loc}: {path}: {message}" if path else f"{loc}: {message}")
        return out


class IoFailure(ValueSpaceError, OSError):
    pass
