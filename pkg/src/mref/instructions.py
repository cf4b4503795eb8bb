"""Instruction sets, the on-device asset catalog, and link resolution between them."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable

from mref.errors import CatalogError, InstructionError
from mref.pose import Keyframe, Pose, keyframe_sample, pose_compose

QUAT_TOL = 1e-3
MAX_ASSET_ID_BYTES = 255


@dataclass(frozen=True)
class ModelCue:
    asset_id: str
    highlight: bool
    track: tuple[Keyframe, ...]


@dataclass(frozen=True)
class InstructionStep:
    index: int
    text: str
    key_phrase_hint: str
    cues: tuple[ModelCue, ...] = ()


@dataclass(frozen=True)
class InstructionSet:
    set_id: str
    target_asset: str
    steps: tuple[InstructionStep, ...]

    def asset_ids(self) -> list[str]:
        """Distinct referenced asset ids, target first, in first-use order."""
        seen = dict.fromkeys([self.target_asset])
        for step in self.steps:
            for cue in step.cues:
                seen.setdefault(cue.asset_id)
        return list(seen)


@dataclass(frozen=True)
class AssetEntry:
    display_name: str
    byte_size: int
    content_hash: bytes


@dataclass
class AssetCatalog:
    entries: dict[str, AssetEntry] = field(default_factory=dict)

    def add(self, asset_id: str, entry: AssetEntry) -> None:
        if asset_id in self.entries:
            raise CatalogError("DUPLICATE_ASSET", f"asset {asset_id!r} already registered")
        if asset_id_problem(asset_id):
            raise CatalogError("BAD_ASSET_ID", asset_id_problem(asset_id))
        if entry.byte_size <= 0:
            raise CatalogError("BAD_SIZE", f"asset {asset_id!r} must have byte_size > 0")
        if len(entry.content_hash) != 32:
            raise CatalogError("BAD_HASH", f"asset {asset_id!r} content hash must be 32 bytes")
        self.entries[asset_id] = entry

    def __contains__(self, asset_id: str) -> bool:
        return asset_id in self.entries

    def __getitem__(self, asset_id: str) -> AssetEntry:
        return self.entries[asset_id]

    def __len__(self) -> int:
        return len(self.entries)


_CATALOG_LINE = re.compile(
    r'^asset\s+(?P<id>\S+)\s+name="(?P<name>(?:[^"\\]|\\.)*)"\s+'
    r'bytes=(?P<bytes>\d+)\s+sha="(?P<sha>[0-9a-fA-F]{64})"\s*(?:#.*)?$'
)


def parse_catalog(text: str) -> AssetCatalog:
    catalog = AssetCatalog()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _CATALOG_LINE.match(line)
        if m is None:
            raise CatalogError("BAD_LINE", f"cannot parse {raw!r}", line=lineno)
        name = re.sub(r"\\(.)", r"\1", m["name"])
        entry = AssetEntry(name, int(m["bytes"]), bytes.fromhex(m["sha"]))
        try:
            catalog.add(m["id"], entry)
        except CatalogError as exc:
            raise CatalogError(exc.code, exc.message, line=lineno) from None
    return catalog


def format_catalog(catalog: AssetCatalog) -> str:
    lines = []
    for asset_id, e in catalog.entries.items():
        name = e.display_name.replace("\\", "\\\\").replace('"', '\\"')
        lines.append(f'asset {asset_id} name="{name}" bytes={e.byte_size} sha="{e.content_hash.hex()}"')
    return "\n".join(lines) + "\n"


def asset_id_problem(asset_id: str) -> str | None:
    """Describe why ``asset_id`` is not a valid asset reference, or None."""
    if not asset_id:
        return "asset id is empty"
    if len(asset_id.encode("utf-8")) > MAX_ASSET_ID_BYTES:
        return f"asset id longer than {MAX_ASSET_ID_BYTES} bytes"
    if any(ord(c) < 0x20 or 0x7F <= ord(c) < 0xA0 for c in asset_id):
        return "asset id contains control characters"
    if any(c.isspace() for c in asset_id):
        return "asset id contains whitespace"
    return None


@dataclass(frozen=True)
class ValidationIssue:
    step: int | None
    cue: int | None
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> list[str]:
        return [e.code for e in self.errors]


def _check_track(track: tuple[Keyframe, ...], highlight: bool) -> Iterable[tuple[str, str]]:
    if not track:
        yield "EMPTY_TRACK", "cue has no keyframes"
        return
    if highlight and len(track) != 1:
        yield "BAD_HIGHLIGHT", f"highlight cue must have exactly one keyframe, has {len(track)}"
    prev = None
    for k, kf in enumerate(track):
        t = kf.t_offset
        if not math.isfinite(t) or t < 0:
            yield "BAD_TIME", f"keyframe {k} has t_offset {t}"
        elif prev is not None and t <= prev:
            yield "NON_MONOTONIC_TRACK", f"keyframe {k} t_offset {t} does not follow {prev}"
        prev = t
        pose = kf.pose
        n = pose.rotation.norm()
        if not math.isfinite(n) or abs(n - 1.0) > QUAT_TOL:
            yield "NON_UNIT_QUATERNION", f"keyframe {k} rotation norm {n:.6g}"
        if not (pose.position.is_finite() and pose.scale.is_finite()):
            yield "NON_FINITE", f"keyframe {k} has non-finite components"
        elif min(pose.scale) <= 0:
            yield "BAD_SCALE", f"keyframe {k} scale must be strictly positive"


def validate(iset: InstructionSet, catalog: AssetCatalog) -> ValidationReport:
    issues: list[ValidationIssue] = []

    def add(step, cue, code, message):
        issues.append(ValidationIssue(step, cue, code, message))

    if not iset.set_id:
        add(None, None, "EMPTY_SET_ID", "set_id is empty")
    if not iset.steps:
        add(None, None, "NO_STEPS", "instruction set has no steps")
    problem = asset_id_problem(iset.target_asset)
    if problem:
        add(None, None, "BAD_ASSET_ID", f"target: {problem}")
    elif iset.target_asset not in catalog:
        add(None, None, "MISSING_ASSET", f"target asset {iset.target_asset!r} not in catalog")

    for s, step in enumerate(iset.steps):
        if step.index != s:
            add(s, None, "BAD_STEP_INDEX", f"step at position {s} has index {step.index}")
        if not step.text.strip():
            add(s, None, "EMPTY_TEXT", "step text is empty")
        for c, cue in enumerate(step.cues):
            problem = asset_id_problem(cue.asset_id)
            if problem:
                add(s, c, "BAD_ASSET_ID", problem)
            elif cue.asset_id not in catalog:
                add(s, c, "MISSING_ASSET", f"asset {cue.asset_id!r} not in catalog")
            for code, message in _check_track(cue.track, cue.highlight):
                add(s, c, code, message)
    return ValidationReport(tuple(issues))


@dataclass(frozen=True)
class ResolvedCue:
    asset_id: str
    display_name: str
    world_pose: Pose
    highlight: bool


def _require_valid(iset: InstructionSet, catalog: AssetCatalog) -> None:
    report = validate(iset, catalog)
    if not report.ok:
        first = report.errors[0]
        raise InstructionError(
            "UNVALIDATED_SET",
            f"{len(report.errors)} validation error(s), first {first.code}: {first.message}",
        )


def resolve(
    iset: InstructionSet, catalog: AssetCatalog, target_pose: Pose, step: int, t: float
) -> list[ResolvedCue]:
    """World placement of every cue in ``step`` at animation time ``t``."""
    _require_valid(iset, catalog)
    if not 0 <= step < len(iset.steps):
        raise InstructionError("STEP_OUT_OF_RANGE", f"step {step} of {len(iset.steps)}")
    return [
        ResolvedCue(
            cue.asset_id,
            catalog[cue.asset_id].display_name,
            pose_compose(target_pose, keyframe_sample(cue.track, t)),
            cue.highlight,
        )
        for cue in iset.steps[step].cues
    ]


def referenced_bytes(iset: InstructionSet, catalog: AssetCatalog) -> int:
    _require_valid(iset, catalog)
    return sum(catalog[a].byte_size for a in iset.asset_ids())
