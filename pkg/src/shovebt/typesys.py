"""Value type registry for the data graph.

Types are identified by name; equality is name equality. The standard
registry covers the primitive alphabet the runtime and the mission
library need; user types register under a unique name with a membership
check. ``list<T>`` names are derived on demand from a registered ``T``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import UnresolvableTypeError

_LIST_RE = re.compile(r"^list<(.+)>$")


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_pose2d(value: Any) -> bool:
    return (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(_is_number(c) for c in value)
    )


@dataclass(frozen=True)
class ValueType:
    name: str
    check: Callable[[Any], bool]

    def accepts(self, value: Any) -> bool:
        return self.check(value)


@dataclass
class TypeRegistry:
    _types: dict[str, ValueType] = field(default_factory=dict)

    def register(self, name: str, check: Callable[[Any], bool]) -> ValueType:
        if name in self._types:
            raise ValueError(f"type {name!r} already registered")
        vt = ValueType(name, check)
        self._types[name] = vt
        return vt

    def has(self, name: str) -> bool:
        try:
            self.get(name)
        except UnresolvableTypeError:
            return False
        return True

    def get(self, name: str) -> ValueType:
        """Look up a type, deriving ``list<T>`` entries on first use."""
        vt = self._types.get(name)
        if vt is not None:
            return vt
        m = _LIST_RE.match(name)
        if m:
            inner = self.get(m.group(1))
            vt = ValueType(name, lambda v, t=inner: isinstance(v, list) and all(t.accepts(x) for x in v))
            self._types[name] = vt
            return vt
        raise UnresolvableTypeError(f"unknown type {name!r}")

    def names(self) -> list[str]:
        return sorted(self._types)

    @classmethod
    def standard(cls) -> "TypeRegistry":
        reg = cls()
        reg.register("bool", lambda v: isinstance(v, bool))
        reg.register("int", lambda v: isinstance(v, int) and not isinstance(v, bool))
        reg.register("float", _is_number)
        reg.register("string", lambda v: isinstance(v, str))
        reg.register("pose2d", _is_pose2d)
        reg.register("any-record", lambda v: isinstance(v, dict))
        # Values of "type" name another registered type; checked lazily so
        # user types registered later still validate.
        reg.register("type", lambda v, r=reg: isinstance(v, str) and r.has(v))
        return reg
