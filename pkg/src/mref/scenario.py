"""Scenario scripts: one virtual clock driving the links, the monitor and the console."""

from __future__ import annotations

import enum
import math
import shlex
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from mref import console as con
from mref.console import Console, PhraseToken, effect_line, fmt_t
from mref.errors import CatalogError, MrefError, ScenarioError, TelemetryError
from mref.instructions import AssetCatalog, InstructionSet, parse_catalog, referenced_bytes, validate
from mref.link import PRESETS, BandwidthStats, Link, LinkConfig, Message, MessageKind, Transmission, bandwidth_stats
from mref.telemetry import ChannelSpec, HudState, Monitor, TelemetrySample, parse_channels
from mref.wire import SizeReport, decode

REPORT_WINDOW = 1.0


class EventKind(enum.IntEnum):
    # value is the tie-break rank at equal times
    TELEMETRY = 0
    VOICE = 1
    UPLINK = 2


@dataclass(frozen=True)
class ScriptEvent:
    t: float
    kind: EventKind
    line: int
    text: str = ""
    channel: str = ""
    value: float = 0.0
    path: Path | None = None


@dataclass
class ScenarioScript:
    link: LinkConfig
    catalog_path: Path
    channels_path: Path
    events: list[ScriptEvent]
    env_id: str = "env_1"


def _number(raw: str, lineno: int, what: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ScenarioError("PARSE", f"{what} {raw!r} is not a number", line=lineno) from None
    if not math.isfinite(value):
        raise ScenarioError("PARSE", f"{what} {raw!r} is not finite", line=lineno)
    return value


def _link_header(words: list[str], lineno: int) -> LinkConfig:
    opts = {}
    for w in words[1:]:
        key, sep, val = w.partition("=")
        if not sep or key not in ("preset", "delay", "rate"):
            raise ScenarioError("PARSE", f"bad link option {w!r}", line=lineno)
        opts[key] = val
    if "preset" in opts:
        base = PRESETS.get(opts["preset"])
        if base is None:
            raise ScenarioError("PARSE", f"unknown preset {opts['preset']!r}", line=lineno)
    elif "delay" in opts and "rate" in opts:
        base = None
    else:
        raise ScenarioError("PARSE", "link needs preset=<name> or delay=<s> rate=<Bps>", line=lineno)
    name = base.name if base else "custom"
    delay = _number(opts["delay"], lineno, "delay") if "delay" in opts else base.one_way_delay
    rate = _number(opts["rate"], lineno, "rate") if "rate" in opts else base.data_rate
    try:
        return LinkConfig(name, delay, rate)
    except MrefError as exc:
        raise ScenarioError("PARSE", exc.message, line=lineno) from None


def parse_scenario(text: str, base_dir: Path) -> ScenarioScript:
    link = catalog = channels = None
    env_id = "env_1"
    events: list[ScriptEvent] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        try:
            words = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ScenarioError("PARSE", str(exc), line=lineno) from None
        if not words:
            continue
        head = words[0]
        if head == "link":
            link = _link_header(words, lineno)
        elif head in ("catalog", "channels", "env"):
            if len(words) != 2:
                raise ScenarioError("PARSE", f"{head} takes one argument", line=lineno)
            if head == "catalog":
                catalog = base_dir / words[1]
            elif head == "channels":
                channels = base_dir / words[1]
            else:
                env_id = words[1]
        elif head == "at":
            events.append(_event(words, lineno, base_dir))
        else:
            raise ScenarioError("PARSE", f"unknown directive {head!r}", line=lineno)
    if link is None or catalog is None or channels is None:
        raise ScenarioError("PARSE", "scenario needs link, catalog and channels headers")
    for prev, ev in zip(events, events[1:]):
        if ev.t < prev.t:
            raise ScenarioError("PARSE", f"event at {ev.t} precedes earlier event at {prev.t}", line=ev.line)
    return ScenarioScript(link, catalog, channels, events, env_id)


def _event(words: list[str], lineno: int, base_dir: Path) -> ScriptEvent:
    if len(words) < 3:
        raise ScenarioError("PARSE", "event needs a time and a kind", line=lineno)
    t = _number(words[1], lineno, "time")
    if t < 0:
        raise ScenarioError("PARSE", "event time must be >= 0", line=lineno)
    kind, args = words[2], words[3:]
    if kind == "voice" and len(args) == 1:
        return ScriptEvent(t, EventKind.VOICE, lineno, text=args[0])
    if kind == "telemetry" and len(args) == 2:
        return ScriptEvent(t, EventKind.TELEMETRY, lineno, channel=args[0],
                           value=_number(args[1], lineno, "value"))
    if kind == "uplink" and len(args) == 1:
        return ScriptEvent(t, EventKind.UPLINK, lineno, path=base_dir / args[0])
    raise ScenarioError("PARSE", f"malformed {kind!r} event", line=lineno)


def load_scenario(path: Path) -> ScenarioScript:
    return parse_scenario(Path(path).read_text(encoding="utf-8"), Path(path).parent)


@dataclass
class RunReport:
    deliveries: list[Transmission] = field(default_factory=list)
    alert_log: list[str] = field(default_factory=list)
    effect_log: list[str] = field(default_factory=list)
    hud_log: list[str] = field(default_factory=list)
    sizes: list[tuple[str, str, SizeReport]] = field(default_factory=list)
    bandwidth: dict[str, BandwidthStats | None] = field(default_factory=dict)
    final_hud: HudState = field(default_factory=HudState)
    session_files: dict[str, list[str]] = field(default_factory=dict)
    downlinks: list[con.SendDownlink] = field(default_factory=list)

    def delivery_lines(self) -> list[str]:
        return [tx.delivery_line() for tx in self.deliveries]

    def transmission_lines(self) -> list[str]:
        return [tx.timeline_line() for tx in sorted(self.deliveries, key=lambda tx: tx.message.id)]

    def report_lines(self) -> list[str]:
        lines = [f"uplink set={sid} file={name} {rep.format()}" for sid, name, rep in self.sizes]
        for direction in ("uplink", "downlink"):
            stats = self.bandwidth.get(direction)
            lines.append(f"bandwidth {direction} " + (stats.format() if stats else "NO_TRAFFIC"))
        lines.append(hud_line("final", self.final_hud))
        return lines

    def write(self, out_dir: Path) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        files = {
            "deliveries.log": self.delivery_lines(),
            "transmissions.log": self.transmission_lines(),
            "alerts.log": self.alert_log,
            "effects.log": self.effect_log,
            "hud.log": self.hud_log,
            "report.txt": self.report_lines(),
        }
        for name, lines in files.items():
            (out_dir / name).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        session = out_dir / "session"
        if session.exists():
            shutil.rmtree(session)
        session.mkdir()
        for rel, lines in sorted(self.session_files.items()):
            target = session / rel
            if rel.endswith("/"):
                target.mkdir(parents=True, exist_ok=True)
                continue
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def hud_line(t: str, hud: HudState) -> str:
    shown = ",".join(f"{k}={v!r}" for k, v in hud.displayed.items())
    return (f"hud t={t} flash_red={int(hud.flash_red)} "
            f"warnings={','.join(hud.active_warnings) or '-'} displayed={shown or '-'}")


@dataclass
class LoadedScenario:
    script: ScenarioScript
    catalog: AssetCatalog
    channels: list[ChannelSpec]
    uplinks: dict[Path, tuple[bytes, InstructionSet]]


def prepare(script: ScenarioScript) -> LoadedScenario:
    """Read every referenced file up front so a run never fails half-way.

    Raises OSError for unreadable files, ScenarioError("PARSE") for malformed
    inputs and ScenarioError("VALIDATION") when an uplinked set does not
    resolve against the catalog.
    """
    try:
        catalog = parse_catalog(script.catalog_path.read_text(encoding="utf-8"))
        channels = parse_channels(script.channels_path.read_text(encoding="utf-8"))
    except (CatalogError, TelemetryError) as exc:
        raise ScenarioError("PARSE", str(exc)) from None
    known = {c.name for c in channels}
    uplinks = {}
    for ev in script.events:
        if ev.kind is EventKind.TELEMETRY and ev.channel not in known:
            raise ScenarioError("PARSE", f"unknown telemetry channel {ev.channel!r}", line=ev.line)
        if ev.kind is EventKind.UPLINK and ev.path not in uplinks:
            data = ev.path.read_bytes()
            try:
                iset = decode(data)
            except MrefError as exc:
                raise ScenarioError("PARSE", f"{ev.path.name}: {exc}", line=ev.line) from None
            report = validate(iset, catalog)
            if not report.ok:
                first = report.errors[0]
                raise ScenarioError("VALIDATION", f"{ev.path.name}: {first.code} {first.message}", line=ev.line)
            uplinks[ev.path] = (data, iset)
    return LoadedScenario(script, catalog, channels, uplinks)


def run(loaded: LoadedScenario, window: float = REPORT_WINDOW) -> RunReport:
    script = loaded.script
    report = RunReport()
    up, down = Link(script.link), Link(script.link)
    monitor = Monitor(loaded.channels)
    console = Console(env_id=script.env_id)
    state = console.initial_state()
    next_id = 1
    sized: set[str] = set()
    last_hud = monitor.hud_state()
    report.hud_log.append(hud_line(fmt_t(0.0), last_hud))
    in_flight_sets: dict[int, InstructionSet] = {}

    def apply(t: float, effects: list) -> None:
        nonlocal next_id
        for eff in effects:
            report.effect_log.append(effect_line(t, eff))
            files = report.session_files
            if isinstance(eff, con.OpenFolder):
                files.setdefault(eff.path.rstrip("/") + "/", [])
            elif isinstance(eff, con.AppendNote):
                files.setdefault(eff.path, []).append(eff.line)
            elif isinstance(eff, con.CapturePhoto):
                files.setdefault(eff.path, []).append(f"photo seq={eff.seq} t={fmt_t(eff.at)}")
            elif isinstance(eff, con.SendDownlink):
                report.downlinks.append(eff)
                down.submit(Message(next_id, eff.payload_bytes, eff.message_kind), t)
                next_id += 1

    events = sorted(script.events, key=lambda ev: (ev.t, ev.kind))
    i = 0
    while True:
        candidates = [x for x in (up.next_delivery(), down.next_delivery()) if x is not None]
        if i < len(events):
            candidates.append(events[i].t)
        if not candidates:
            break
        t = min(candidates)
        capture = console.next_capture(state)
        if capture is not None and capture < t:
            state, effects = console.photo_tick(state, capture)
            apply(capture, effects)
            continue
        while i < len(events) and events[i].t == t:
            ev = events[i]
            i += 1
            if ev.kind is EventKind.TELEMETRY:
                for alert in monitor.ingest(TelemetrySample(t, ev.channel, ev.value)):
                    report.alert_log.append(alert.log_line())
                hud = monitor.hud_state()
                if (hud.active_warnings, hud.flash_red) != (last_hud.active_warnings, last_hud.flash_red):
                    report.hud_log.append(hud_line(fmt_t(t), hud))
                last_hud = hud
            elif ev.kind is EventKind.VOICE:
                state, effects = console.handle_token(state, PhraseToken.from_transcript(ev.text, t))
                apply(t, effects)
            else:
                data, iset = loaded.uplinks[ev.path]
                in_flight_sets[next_id] = iset
                up.submit(Message(next_id, len(data), MessageKind.INSTRUCTION_SET), t)
                next_id += 1
                if ev.path.name not in sized:
                    sized.add(ev.path.name)
                    report.sizes.append(
                        (iset.set_id, ev.path.name, SizeReport(len(data), referenced_bytes(iset, loaded.catalog))))
        delivered = sorted(up.run_until(t) + down.run_until(t), key=lambda tx: (tx.t_delivered, tx.message.id))
        for tx in delivered:
            report.deliveries.append(tx)
            if tx.message.kind is MessageKind.INSTRUCTION_SET:
                state, effects = console.load(state, in_flight_sets[tx.message.id])
                apply(t, effects)
        state, effects = console.photo_tick(state, t)
        apply(t, effects)

    report.final_hud = monitor.hud_state()
    for direction, link in (("uplink", up), ("downlink", down)):
        report.bandwidth[direction] = bandwidth_stats(link.history, window) if link.history else None
    return report
