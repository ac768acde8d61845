from __future__ import annotations

from enum import Enum


class Architecture(str, Enum):
    """Gate family the constraint catalog is built for."""

    CR_QUBIT = "cr-qubit"
    CR_QUTRIT = "cr-qutrit"
    CZ_QUBIT = "cz-qubit"

    @property
    def is_cz(self) -> bool:
        return self is Architecture.CZ_QUBIT

    @classmethod
    def parse(cls, value: "str | Architecture") -> "Architecture":
        if isinstance(value, Architecture):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for arch in cls:
            if arch.value == key:
                return arch
        raise ValueError(
            f"unknown architecture {value!r}; expected one of "
            f"{', '.join(a.value for a in cls)}"
        )

    def __str__(self) -> str:
        return self.value
