"""Range checks over suit telemetry with edge-triggered alerts and HUD state."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field

from mref.errors import TelemetryError


class Severity(str, enum.Enum):
    CRITICAL = "CRITICAL"
    CAUTION = "CAUTION"


class Status(str, enum.Enum):
    NOMINAL = "NOMINAL"
    ALARM = "ALARM"


class AlertKind(str, enum.Enum):
    ENTER_ALARM = "ENTER_ALARM"
    EXIT_ALARM = "EXIT_ALARM"


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    unit: str
    nominal_min: float
    nominal_max: float
    severity: Severity
    always_display: bool = False

    def __post_init__(self):
        if math.isnan(self.nominal_min) or math.isnan(self.nominal_max) or self.nominal_min > self.nominal_max:
            raise TelemetryError("BAD_RANGE", f"{self.name}: min {self.nominal_min} > max {self.nominal_max}")


@dataclass(frozen=True)
class TelemetrySample:
    t: float
    channel: str
    value: float


@dataclass(frozen=True)
class AlertEvent:
    t: float
    channel: str
    kind: AlertKind
    severity: Severity
    value: float

    def log_line(self) -> str:
        short = "ENTER" if self.kind is AlertKind.ENTER_ALARM else "EXIT"
        return (f"alert t={self.t:.6f} channel={self.channel} kind={short} "
                f"severity={self.severity.value} value={self.value!r}")


@dataclass(frozen=True)
class HudState:
    displayed: dict[str, float] = field(default_factory=dict)
    active_warnings: tuple[str, ...] = ()
    flash_red: bool = False


def classify(spec: ChannelSpec, value: float) -> Status:
    if value < spec.nominal_min or value > spec.nominal_max:
        return Status.ALARM
    return Status.NOMINAL


class Monitor:
    """Folds samples into alert events. Callers present samples through one writer."""

    def __init__(self, specs: list[ChannelSpec]):
        self.specs: dict[str, ChannelSpec] = {}
        for spec in specs:
            if spec.name in self.specs:
                raise TelemetryError("DUPLICATE_CHANNEL", spec.name)
            self.specs[spec.name] = spec
        self._last_t: dict[str, float] = {}
        self._latest: dict[str, float] = {}
        self._alarm: dict[str, bool] = {}

    def ingest(self, sample: TelemetrySample) -> list[AlertEvent]:
        spec = self.specs.get(sample.channel)
        if spec is None:
            raise TelemetryError("UNKNOWN_CHANNEL", f"channel {sample.channel!r} is not configured")
        if not (math.isfinite(sample.value) and math.isfinite(sample.t)):
            raise TelemetryError("NON_FINITE", f"{sample.channel}: t={sample.t} value={sample.value}")
        last = self._last_t.get(sample.channel)
        if last is not None and sample.t < last:
            raise TelemetryError("TIME_REGRESSION", f"{sample.channel}: t={sample.t} before {last}")
        self._last_t[sample.channel] = sample.t
        self._latest[sample.channel] = sample.value

        in_alarm = classify(spec, sample.value) is Status.ALARM
        was = self._alarm.get(sample.channel, False)
        self._alarm[sample.channel] = in_alarm
        if in_alarm == was:
            return []
        kind = AlertKind.ENTER_ALARM if in_alarm else AlertKind.EXIT_ALARM
        return [AlertEvent(sample.t, sample.channel, kind, spec.severity, sample.value)]

    def hud_state(self) -> HudState:
        active = tuple(name for name in self.specs if self._alarm.get(name))
        return HudState(
            displayed={n: self._latest[n] for n, s in self.specs.items() if s.always_display and n in self._latest},
            active_warnings=active,
            flash_red=any(self.specs[n].severity is Severity.CRITICAL for n in active),
        )


_CHANNEL_LINE = re.compile(
    r"^channel\s+(?P<name>\S+)\s+unit=(?P<unit>\S+)\s+min=(?P<min>\S+)\s+max=(?P<max>\S+)\s+"
    r"severity=(?P<sev>critical|caution)\s+display=(?P<disp>[01])\s*(?:#.*)?$",
    re.IGNORECASE,
)


def _real(raw: str, lineno: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise TelemetryError("BAD_CONFIG", f"line {lineno}: {raw!r} is not a number") from None
    if math.isnan(value):
        raise TelemetryError("BAD_CONFIG", f"line {lineno}: NaN bound")
    return value


def parse_channels(text: str) -> list[ChannelSpec]:
    """Parse ``channel <name> unit=<u> min=<real> max=<real> severity=<..> display=<0|1>`` lines.

    ``inf`` and ``-inf`` are accepted as open bounds.
    """
    specs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _CHANNEL_LINE.match(line)
        if m is None:
            raise TelemetryError("BAD_CONFIG", f"line {lineno}: cannot parse {raw!r}")
        specs.append(ChannelSpec(
            m["name"], m["unit"], _real(m["min"], lineno), _real(m["max"], lineno),
            Severity(m["sev"].upper()), m["disp"] == "1",
        ))
    return specs


def format_channels(specs: list[ChannelSpec]) -> str:
    return "".join(
        f"channel {s.name} unit={s.unit} min={s.nominal_min!r} max={s.nominal_max!r} "
        f"severity={s.severity.value.lower()} display={int(s.always_display)}\n"
        for s in specs
    )


# Placeholder floors and ranges; real limits are operator-supplied.
DEFAULT_CHANNELS = [
    ChannelSpec("o2_time_remaining_s", "s", 1800.0, math.inf, Severity.CRITICAL, True),
    ChannelSpec("battery_time_remaining_s", "s", 1800.0, math.inf, Severity.CRITICAL, True),
    ChannelSpec("h2o_time_remaining_s", "s", 1800.0, math.inf, Severity.CRITICAL, True),
    ChannelSpec("env_pressure_kpa", "kPa", 28.0, 31.0, Severity.CAUTION, False),
]
