"""MAC/PHY parameter sets and the flat key-value profile format.

Profile files hold one ``key = value`` pair per line, keys matching the
:class:`MacPhyParams` field names. Durations are written in microseconds,
the data rate in bits/s and sizes in bytes. ``#`` and ``;`` start comments.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path


class InvalidParameterError(ValueError):
    """Raised when a parameter set violates its invariants."""


_DURATION_KEYS = ("slot_time", "sifs", "difs", "phy_header_time", "prop_delay")
_INT_KEYS = ("w_min", "m_stages", "mac_header_bytes", "ack_bytes", "payload_bytes")


@dataclass(frozen=True)
class MacPhyParams:
    """Timing and backoff constants of one DCF configuration (SI units)."""

    w_min: int = 256
    m_stages: int = 2
    slot_time: float = 20e-6
    sifs: float = 10e-6
    difs: float = 50e-6
    phy_header_time: float = 192e-6
    mac_header_bytes: int = 34
    ack_bytes: int = 14
    data_rate: float = 1e6
    payload_bytes: int = 1500
    prop_delay: float = 1e-6

    def __post_init__(self):
        if self.w_min < 2:
            raise InvalidParameterError(f"w_min must be >= 2, got {self.w_min}")
        if self.m_stages < 0:
            raise InvalidParameterError(f"m_stages must be >= 0, got {self.m_stages}")
        for key in ("slot_time", "sifs", "difs", "phy_header_time"):
            if not getattr(self, key) > 0:
                raise InvalidParameterError(f"{key} must be > 0")
        if self.prop_delay < 0:
            raise InvalidParameterError("prop_delay must be >= 0")
        if not self.data_rate > 0:
            raise InvalidParameterError("data_rate must be > 0")
        if self.payload_bytes <= 0:
            raise InvalidParameterError("payload_bytes must be > 0")
        if self.mac_header_bytes < 0 or self.ack_bytes < 0:
            raise InvalidParameterError("header sizes must be >= 0")

    @property
    def max_window(self) -> int:
        return self.w_min << self.m_stages


def parse_profile(text: str) -> MacPhyParams:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string("[profile]\n" + text)
    section = parser["profile"]
    known = {f.name for f in fields(MacPhyParams)}
    unknown = set(section) - known
    if unknown:
        raise InvalidParameterError(f"unknown profile keys: {sorted(unknown)}")
    values: dict[str, float | int] = {}
    for key, raw in section.items():
        if key in _INT_KEYS:
            values[key] = int(raw)
        elif key in _DURATION_KEYS:
            values[key] = float(raw) * 1e-6
        else:
            values[key] = float(raw)
    return MacPhyParams(**values)


def load_profile(path: str | Path) -> MacPhyParams:
    return parse_profile(Path(path).read_text())


def bundled_profile(name: str = "dot11b-1mbps") -> MacPhyParams:
    """Load a profile shipped with the package, e.g. ``dot11b-1mbps``."""
    ref = resources.files("dcfdelay.profiles").joinpath(f"{name}.cfg")
    return parse_profile(ref.read_text())


def format_profile(params: MacPhyParams) -> str:
    lines = []
    for f in fields(MacPhyParams):
        value = getattr(params, f.name)
        if f.name in _DURATION_KEYS:
            value = f"{value * 1e6:g}"
        elif f.name == "data_rate":
            value = f"{value:g}"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
