"""Partial assignments over categorical columns.

A :class:`Pattern` binds some columns to a category label and leaves the rest
as wildcards.  The empty pattern matches every row.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping


@dataclass(frozen=True)
class Pattern:
    bindings: tuple[tuple[str, str], ...] = ()

    def __init__(self, bindings: Mapping[str, str] | Iterable[tuple[str, str]] = ()):
        items = dict(bindings.items() if isinstance(bindings, Mapping) else bindings)
        object.__setattr__(self, "bindings", tuple(sorted(items.items())))

    @classmethod
    def wildcard(cls) -> "Pattern":
        return cls()

    def as_dict(self) -> dict[str, str]:
        return dict(self.bindings)

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.bindings)

    def get(self, column: str, default: str | None = None) -> str | None:
        return self.as_dict().get(column, default)

    def __len__(self) -> int:
        return len(self.bindings)

    def is_wildcard(self) -> bool:
        return not self.bindings

    def bind(self, column: str, value: str) -> "Pattern":
        d = self.as_dict()
        d[column] = value
        return Pattern(d)

    def drop(self, column: str) -> "Pattern":
        return Pattern({k: v for k, v in self.bindings if k != column})

    def generalizes(self, other: "Pattern") -> bool:
        """True when every binding of ``self`` also appears in ``other``."""
        o = other.as_dict()
        return all(o.get(k) == v for k, v in self.bindings)

    def matches(self, record: Mapping[str, str]) -> bool:
        return all(record[k] == v for k, v in self.bindings)

    def label(self, order: Iterable[str] | None = None) -> str:
        d = self.as_dict()
        if not d:
            return "*"
        keys = [k for k in order if k in d] if order is not None else sorted(d)
        return "/".join(f"{k}={d[k]}" for k in keys)

    def __str__(self) -> str:
        return self.label()
