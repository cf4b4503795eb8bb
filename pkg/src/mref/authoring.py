"""Compile flat CSV instruction sheets into InstructionSet values.

One row per keyframe. Rows of one step are contiguous; rows of one cue are
contiguous within their step. A step without cues is a single row whose cue
columns (cue_index through sz) are all empty.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass

from mref.errors import MrefError
from mref.instructions import QUAT_TOL, InstructionSet, InstructionStep, ModelCue, asset_id_problem
from mref.pose import Keyframe, Pose, Quat, Vec3

COLUMNS = (
    "step_index", "step_text", "key_phrase_hint", "cue_index", "asset_id", "highlight",
    "t_offset_s", "px", "py", "pz", "qx", "qy", "qz", "qw", "sx", "sy", "sz",
)
HEADER = ",".join(COLUMNS)
CUE_COLUMNS = COLUMNS[3:]

_DECIMAL = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_INDEX = re.compile(r"\d+")


@dataclass(frozen=True)
class CsvRow:
    line: int
    fields: tuple[str, ...]

    def __getitem__(self, column: str) -> str:
        return self.fields[COLUMNS.index(column)]


@dataclass(frozen=True, order=True)
class CompileError:
    line: int
    code: str
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.code} {self.message}"


class CompileFailed(MrefError):
    """Raised with every diagnostic found; nothing partial is returned."""

    def __init__(self, errors: list[CompileError]):
        self.errors = sorted(errors)
        head = self.errors[0] if self.errors else None
        super().__init__(head.code if head else "COMPILE_FAILED",
                         f"{len(self.errors)} error(s); first: {head}")


def _split(text: str) -> tuple[list[CsvRow], list[CompileError]]:
    if text.startswith("\ufeff"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    errors: list[CompileError] = []
    rows: list[CsvRow] = []
    start = 1
    try:
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise CompileFailed([CompileError(1, "BAD_HEADER", f"expected header {HEADER!r}")])
        start = reader.line_num + 1
        for fields in reader:
            line = start
            start = reader.line_num + 1
            if not fields:
                continue
            if len(fields) != len(COLUMNS):
                errors.append(CompileError(
                    line, "BAD_FIELD_COUNT", f"expected {len(COLUMNS)} fields, got {len(fields)}"))
                continue
            rows.append(CsvRow(line, tuple(fields)))
    except csv.Error as exc:
        errors.append(CompileError(max(start, 1), "BAD_FIELD_COUNT", f"malformed quoting: {exc}"))
    return rows, errors


def parse_csv(text: str) -> list[CsvRow]:
    rows, errors = _split(text)
    if errors:
        raise CompileFailed(errors)
    return rows


def _number(row: CsvRow, column: str, errors: list[CompileError]) -> float:
    raw = row[column].strip()
    if not _DECIMAL.fullmatch(raw):
        errors.append(CompileError(row.line, "BAD_NUMBER", f"{column}={raw!r} is not a decimal number"))
        return math.nan
    value = float(raw)
    if not math.isfinite(value):
        errors.append(CompileError(row.line, "BAD_NUMBER", f"{column}={raw!r} is not finite"))
    return value


def _index(row: CsvRow, column: str, errors: list[CompileError]) -> int | None:
    raw = row[column].strip()
    if not _INDEX.fullmatch(raw):
        errors.append(CompileError(row.line, "BAD_NUMBER", f"{column}={raw!r} is not a non-negative integer"))
        return None
    return int(raw)


def _flag(row: CsvRow, errors: list[CompileError]) -> bool:
    raw = row["highlight"].strip().lower()
    if raw in ("1", "true"):
        return True
    if raw in ("0", "false"):
        return False
    errors.append(CompileError(row.line, "BAD_NUMBER", f"highlight={raw!r} must be 0 or 1"))
    return False


@dataclass
class _Keyrow:
    line: int
    cue_index: int | None
    asset_id: str
    highlight: bool
    keyframe: Keyframe | None
    cueless: bool = False


def _parse_keyrow(row: CsvRow, errors: list[CompileError]) -> _Keyrow:
    if all(not row[c].strip() for c in CUE_COLUMNS):
        return _Keyrow(row.line, None, "", False, None, cueless=True)
    n_before = len(errors)
    cue_index = _index(row, "cue_index", errors)
    asset_id = row["asset_id"]
    problem = asset_id_problem(asset_id)
    if problem:
        errors.append(CompileError(row.line, "BAD_ASSET_ID", problem))
    highlight = _flag(row, errors)
    t, px, py, pz, qx, qy, qz, qw, sx, sy, sz = (
        _number(row, c, errors) for c in COLUMNS[6:]
    )
    if len(errors) > n_before:
        return _Keyrow(row.line, cue_index, asset_id, highlight, None)
    if t < 0:
        errors.append(CompileError(row.line, "BAD_NUMBER", f"t_offset_s={t} is negative"))
    q = Quat(qx, qy, qz, qw)
    n = q.norm()
    if abs(n - 1.0) > QUAT_TOL:
        errors.append(CompileError(row.line, "NON_UNIT_QUATERNION", f"quaternion norm {n:.6g}"))
    if min(sx, sy, sz) <= 0:
        errors.append(CompileError(row.line, "BAD_SCALE", "scale components must be > 0"))
    if len(errors) > n_before:
        return _Keyrow(row.line, cue_index, asset_id, highlight, None)
    pose = Pose(Vec3(px, py, pz), q if q.is_unit() else q.normalized(), Vec3(sx, sy, sz))
    return _Keyrow(row.line, cue_index, asset_id, highlight, Keyframe(t, pose))


def compile_rows(rows: list[CsvRow], set_id: str, target_asset: str) -> InstructionSet:
    """Build an InstructionSet from parsed rows or raise CompileFailed with every problem."""
    errors: list[CompileError] = []
    if not set_id:
        errors.append(CompileError(1, "EMPTY_TEXT", "set_id is empty"))
    problem = asset_id_problem(target_asset)
    if problem:
        errors.append(CompileError(1, "BAD_ASSET_ID", f"target asset: {problem}"))
    if not rows:
        errors.append(CompileError(1, "BAD_STEP_ORDER", "document has no steps"))

    # group rows into steps, checking contiguity as we go
    groups: list[list[CsvRow]] = []
    expected = 0
    for row in rows:
        idx = _index(row, "step_index", errors)
        if idx is None:
            continue
        if groups and idx == expected - 1:
            groups[-1].append(row)
        elif idx == expected:
            groups.append([row])
            expected += 1
        else:
            want = f"{expected - 1} or {expected}" if groups else "0"
            errors.append(CompileError(row.line, "BAD_STEP_ORDER", f"step_index {idx}, expected {want}"))

    steps: list[InstructionStep] = []
    for s, group in enumerate(groups):
        first = group[0]
        text, hint = first["step_text"], first["key_phrase_hint"]
        if not text.strip():
            errors.append(CompileError(first.line, "EMPTY_TEXT", f"step {s} has empty text"))
        for row in group[1:]:
            if row["step_text"] != text or row["key_phrase_hint"] != hint:
                errors.append(CompileError(
                    row.line, "FIELD_MISMATCH", f"step {s} text/hint differs from line {first.line}"))
        steps.append(InstructionStep(s, text, hint, _build_cues(s, group, errors)))

    if errors:
        raise CompileFailed(errors)
    return InstructionSet(set_id, target_asset, tuple(steps))


def _build_cues(s: int, group: list[CsvRow], errors: list[CompileError]) -> tuple[ModelCue, ...]:
    keyrows = [_parse_keyrow(row, errors) for row in group]
    if any(k.cueless for k in keyrows):
        if len(keyrows) > 1:
            errors.append(CompileError(
                group[0].line, "BAD_STEP_ORDER", f"step {s} mixes a cue-less row with cue rows"))
        return ()

    cues: list[list[_Keyrow]] = []
    for k in keyrows:
        if k.cue_index is None:
            continue
        if cues and k.cue_index == len(cues) - 1:
            cues[-1].append(k)
        elif k.cue_index == len(cues):
            cues.append([k])
        else:
            errors.append(CompileError(
                k.line, "BAD_STEP_ORDER", f"cue_index {k.cue_index} out of order in step {s}"))

    out = []
    for c, krs in enumerate(cues):
        head = krs[0]
        for prev, k in zip(krs, krs[1:]):
            if k.asset_id != head.asset_id or k.highlight != head.highlight:
                errors.append(CompileError(
                    k.line, "FIELD_MISMATCH", f"cue {c} asset/highlight differs from line {head.line}"))
            if prev.keyframe and k.keyframe and k.keyframe.t_offset <= prev.keyframe.t_offset:
                errors.append(CompileError(
                    k.line, "NON_MONOTONIC_TRACK", f"keyframe time {k.keyframe.t_offset} not increasing"))
        if head.highlight and len(krs) != 1:
            errors.append(CompileError(
                head.line, "BAD_HIGHLIGHT", f"highlight cue {c} has {len(krs)} keyframes, expected 1"))
        track = tuple(k.keyframe for k in krs if k.keyframe is not None)
        out.append(ModelCue(head.asset_id, head.highlight, track))
    return tuple(out)


def compile_csv(text: str, set_id: str, target_asset: str) -> InstructionSet:
    """Parse and compile, reporting row-shape and content errors together."""
    rows, errors = _split(text)
    try:
        iset = compile_rows(rows, set_id, target_asset)
    except CompileFailed as exc:
        raise CompileFailed(errors + exc.errors) from None
    if errors:
        raise CompileFailed(errors)
    return iset
