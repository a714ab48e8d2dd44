"""Exception hierarchy shared across the runtime."""

from __future__ import annotations


class BtError(Exception):
    """Base class for all runtime errors."""


class UnknownNodeError(BtError):
    """An operation referenced a node id that is not in the tree."""


class TreeStructureError(BtError):
    """A tree edit would violate a structural invariant (single root,
    acyclicity, parent uniqueness, order uniqueness, max children)."""


class LifecycleError(BtError):
    """A lifecycle operation was invoked outside its precondition
    (e.g. starting a background task while not running)."""


class RootNotReadyError(BtError):
    """The tick cycle was started while the root is uninitialized or errored."""


class WiringError(BtError):
    """Base class for data-graph wiring problems."""


class KindMismatchError(WiringError):
    """A wiring endpoint has the wrong parameter kind."""


class TypeMismatchError(WiringError):
    """A value or wiring does not match the resolved parameter type."""


class UnresolvableTypeError(WiringError):
    """A parameter type could not be resolved to a registered type."""


class MissingOptionError(BtError):
    """A node was constructed without a required option value."""


class ParseError(BtError):
    """A tree or scenario document is not well-formed."""


class IncludeCycleError(ParseError):
    """Tree documents include each other in a cycle."""


class ValidationError(BtError):
    """A tree document is well-formed but violates the tree contract.

    Carries the full list of violations so callers can report all of
    them at once.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class TransportError(BtError):
    """A message could not be delivered."""
