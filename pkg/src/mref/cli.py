"""Command-line entry point: ``mref compile | send | run | report``.

Exit codes: 0 success, 1 usage, 2 parse/compile, 3 validation, 4 I/O.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from importlib import resources
from pathlib import Path

from mref.authoring import CompileFailed, compile_csv
from mref.errors import CatalogError, LinkError, MrefError, ScenarioError, WireError
from mref.instructions import parse_catalog, referenced_bytes, validate
from mref.link import PRESETS, Link, LinkConfig, Message, MessageKind, Transmission, bandwidth_stats
from mref.scenario import REPORT_WINDOW, load_scenario, prepare, run
from mref.wire import SizeReport, decode, encode

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_VALIDATION, EXIT_IO = 0, 1, 2, 3, 4

# Generous reading of a "few minutes" uplink budget.
TRANSFER_WINDOW_S = 300.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fixtures_dir() -> Path:
    env = os.environ.get("MREF_FIXTURES")
    if env:
        return Path(env)
    return Path(str(resources.files("mref") / "fixtures"))


def resolve_input(path: str) -> Path:
    """Use ``path`` as given when it exists, otherwise look it up in the fixtures directory."""
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    candidate = fixtures_dir() / p
    return candidate if candidate.exists() else p


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_compile(args) -> int:
    try:
        text = resolve_input(args.csv).read_text(encoding="utf-8")
        catalog_text = resolve_input(args.catalog).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        _err(f"error: {exc}")
        return EXIT_IO
    try:
        catalog = parse_catalog(catalog_text)
    except CatalogError as exc:
        _err(f"catalog: {exc}")
        return EXIT_PARSE
    set_id = args.set_id or Path(args.csv).stem
    try:
        iset = compile_csv(text, set_id, args.target)
    except CompileFailed as exc:
        for e in exc.errors:
            _err(str(e))
        return EXIT_PARSE
    report = validate(iset, catalog)
    if not report.ok:
        for e in report.errors:
            where = "target" if e.step is None else f"step {e.step}" + ("" if e.cue is None else f" cue {e.cue}")
            _err(f"{where}: {e.code} {e.message}")
        return EXIT_VALIDATION
    try:
        data = encode(iset)
    except WireError as exc:
        _err(str(exc))
        return EXIT_PARSE
    try:
        Path(args.out).write_bytes(data)
    except OSError as exc:
        _err(f"error: {exc}")
        return EXIT_IO
    sizes = SizeReport(len(data), referenced_bytes(iset, catalog))
    steps = len(iset.steps)
    cues = sum(len(s.cues) for s in iset.steps)
    frames = sum(len(c.track) for s in iset.steps for c in s.cues)
    print(f"compiled set={iset.set_id} target={iset.target_asset} steps={steps} cues={cues} keyframes={frames}")
    print(sizes.format())
    return EXIT_OK


def _send_config(args) -> LinkConfig:
    if args.preset:
        base = PRESETS[args.preset]
        return LinkConfig(base.name, args.delay if args.delay is not None else base.one_way_delay,
                          args.rate if args.rate is not None else base.data_rate)
    if args.delay is None or args.rate is None:
        raise ValueError("either --preset or both --delay and --rate are required")
    return LinkConfig("custom", args.delay, args.rate)


def cmd_send(args) -> int:
    try:
        config = _send_config(args)
    except (ValueError, LinkError) as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    try:
        data = resolve_input(args.mri).read_bytes()
    except OSError as exc:
        _err(f"error: {exc}")
        return EXIT_IO
    try:
        iset = decode(data)
    except WireError as exc:
        _err(f"malformed wire file: {exc}")
        return EXIT_PARSE
    link = Link(config)
    link.submit(Message(1, len(data), MessageKind.INSTRUCTION_SET), args.at)
    (tx,) = link.run_until(math.inf)
    transmission = tx.t_tx_end - tx.t_tx_start
    verdict = "WITHIN" if transmission <= TRANSFER_WINDOW_S else "OUTSIDE"
    print(f"link {config.name} delay={config.one_way_delay:.6f} rate={config.data_rate:.6f}")
    print(f"message id=1 kind=INSTRUCTION_SET set={iset.set_id} bytes={len(data)}")
    print(f"submit t={tx.t_submit:.6f}")
    print(f"tx_start t={tx.t_tx_start:.6f}")
    print(f"tx_end t={tx.t_tx_end:.6f}")
    print(f"transmission {transmission:.6f} s")
    print(f"propagation {config.one_way_delay:.6f} s")
    print(tx.delivery_line())
    print(f"window {verdict} transmission {transmission:.6f} s limit {TRANSFER_WINDOW_S:.6f} s")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        script = load_scenario(resolve_input(args.scenario))
        loaded = prepare(script)
    except ScenarioError as exc:
        _err(f"scenario: {exc}")
        return EXIT_VALIDATION if exc.code == "VALIDATION" else EXIT_PARSE
    except (OSError, UnicodeDecodeError) as exc:
        _err(f"error: {exc}")
        return EXIT_IO
    report = run(loaded, args.window)
    try:
        report.write(Path(args.out))
    except OSError as exc:
        _err(f"error: {exc}")
        return EXIT_IO
    for line in report.report_lines():
        print(line)
    return EXIT_OK


_TIMELINE = re.compile(
    r"^transmit id=(\d+) kind=(\w+) bytes=(\d+) submit=(\S+) tx_start=(\S+) tx_end=(\S+) delivered=(\S+)$")
_DELIVERY = re.compile(r"^deliver t=(\S+) id=(\d+) kind=(\w+) bytes=(\d+)$")


def read_transmissions(log_dir: Path) -> list[Transmission]:
    """Load deliveries from a run directory.

    With ``transmissions.log`` present each message keeps its full timeline;
    a bare ``deliveries.log`` is treated as instantaneous arrivals.
    """
    deliveries = (log_dir / "deliveries.log").read_text(encoding="utf-8").splitlines()
    timeline_path = log_dir / "transmissions.log"
    out = []
    if timeline_path.exists():
        for line in timeline_path.read_text(encoding="utf-8").splitlines():
            m = _TIMELINE.match(line)
            if m is None:
                raise ValueError(f"bad transmissions.log line {line!r}")
            mid, kind, size, *times = m.groups()
            out.append(Transmission(Message(int(mid), int(size), MessageKind(kind)), *map(float, times)))
        return out
    for line in deliveries:
        m = _DELIVERY.match(line)
        if m is None:
            raise ValueError(f"bad deliveries.log line {line!r}")
        t, mid, kind, size = m.groups()
        t = float(t)
        out.append(Transmission(Message(int(mid), int(size), MessageKind(kind)), t, t, t, t))
    return out


def cmd_report(args) -> int:
    log_dir = resolve_input(args.log_dir)
    try:
        txs = read_transmissions(log_dir)
    except OSError as exc:
        _err(f"error: {exc}")
        return EXIT_IO
    except ValueError as exc:
        _err(f"error: {exc}")
        return EXIT_PARSE
    if not txs:
        print("NO_TRAFFIC")
        return EXIT_OK
    for direction in ("uplink", "downlink"):
        subset = [tx for tx in txs if tx.message.kind.direction == direction]
        if not subset:
            print(f"{direction} NO_TRAFFIC")
            continue
        stats = bandwidth_stats(subset, args.window)
        print(f"{direction} messages={len(subset)} {stats.format()}")
    print(f"total_bytes={sum(tx.message.payload_bytes for tx in txs)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mref", description="Model-referential instruction uplink toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="compile a CSV instruction sheet to a .mri wire file")
    p.add_argument("csv")
    p.add_argument("catalog")
    p.add_argument("out")
    p.add_argument("--set-id", help="defaults to the CSV file stem")
    p.add_argument("--target", default="rover", help="model target asset id (default: rover)")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("send", help="simulate uplinking a .mri file")
    p.add_argument("mri")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--delay", type=float, help="one-way delay in seconds")
    p.add_argument("--rate", type=float, help="data rate in bytes/second")
    p.add_argument("--at", type=float, default=0.0, help="submit time in seconds")
    p.set_defaults(func=cmd_send)

    p = sub.add_parser("run", help="run a scenario script on the virtual clock")
    p.add_argument("scenario")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--window", type=float, default=REPORT_WINDOW, help="bandwidth window in seconds")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="bandwidth statistics for a run directory")
    p.add_argument("log_dir")
    p.add_argument("--window", type=float, default=REPORT_WINDOW)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "window", 1.0) <= 0:
        _err("error: --window must be > 0")
        return EXIT_USAGE
    try:
        return args.func(args)
    except MrefError as exc:
        _err(f"error: {exc}")
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
