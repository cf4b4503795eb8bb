"""Canonical binary encoding of instruction sets for uplink (``.mri`` files).

Layout, all integers little-endian::

    magic  b"MRIS"
    u16    version (= 1)
    str    set_id                 str = u16 byte length + UTF-8
    str    target_asset
    u16    step_count
    step:  str hint, str text, u8 cue_count
    cue:   str asset_id, u8 highlight, u16 keyframe_count
    kf:    f32 t, f32 px py pz, f32 qx qy qz qw, f32 sx sy sz
    u32    CRC-32 (IEEE) of every preceding byte
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

from mref.errors import WireError
from mref.instructions import (
    QUAT_TOL,
    AssetCatalog,
    InstructionSet,
    InstructionStep,
    ModelCue,
    asset_id_problem,
    referenced_bytes,
)
from mref.pose import UNIT_TOL, Keyframe, Pose, Quat, Vec3

MAGIC = b"MRIS"
VERSION = 1

_U8 = struct.Struct("<B")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_KEYFRAME = struct.Struct("<11f")

U8_MAX = 0xFF
U16_MAX = 0xFFFF


def _f32(x: float) -> float:
    return struct.unpack("<f", struct.pack("<f", x))[0]


def _put_str(out: bytearray, s: str, what: str) -> None:
    raw = s.encode("utf-8")
    if len(raw) > U16_MAX:
        raise WireError("LIMIT_EXCEEDED", f"{what} is {len(raw)} bytes, limit {U16_MAX}")
    out += _U16.pack(len(raw))
    out += raw


def _put_count(out: bytearray, packer: struct.Struct, n: int, limit: int, what: str) -> None:
    if n > limit:
        raise WireError("LIMIT_EXCEEDED", f"{what} {n} exceeds {limit}")
    out += packer.pack(n)


def _pack_keyframe(kf: Keyframe, prev_t: float | None) -> bytes:
    p = kf.pose
    values = (kf.t_offset, *p.position, *p.rotation, *p.scale)
    try:
        packed = _KEYFRAME.pack(*values)
    except (OverflowError, struct.error) as exc:
        raise WireError("LIMIT_EXCEEDED", f"keyframe value not representable as f32: {exc}") from None
    t32 = _f32(kf.t_offset)
    if prev_t is not None and t32 <= _f32(prev_t):
        raise WireError("LIMIT_EXCEEDED", f"keyframe times {prev_t} and {kf.t_offset} collapse in f32")
    if min(_f32(s) for s in p.scale) <= 0:
        raise WireError("LIMIT_EXCEEDED", "scale underflows f32")
    return packed


def encode(iset: InstructionSet) -> bytes:
    out = bytearray(MAGIC)
    out += _U16.pack(VERSION)
    _put_str(out, iset.set_id, "set_id")
    _put_str(out, iset.target_asset, "target_asset")
    _put_count(out, _U16, len(iset.steps), U16_MAX, "step count")
    for step in iset.steps:
        _put_str(out, step.key_phrase_hint, f"step {step.index} hint")
        _put_str(out, step.text, f"step {step.index} text")
        _put_count(out, _U8, len(step.cues), U8_MAX, f"step {step.index} cue count")
        for cue in step.cues:
            _put_str(out, cue.asset_id, "asset_id")
            out += _U8.pack(1 if cue.highlight else 0)
            _put_count(out, _U16, len(cue.track), U16_MAX, "keyframe count")
            prev = None
            for kf in cue.track:
                out += _pack_keyframe(kf, prev)
                prev = kf.t_offset
    out += _U32.pack(zlib.crc32(out))
    return bytes(out)


def crc_ok(data: bytes) -> bool:
    """True when the trailing CRC-32 matches the rest of the document."""
    if len(data) < 4:
        return False
    return zlib.crc32(data[:-4]) == _U32.unpack_from(data, len(data) - 4)[0]


class _Reader:
    def __init__(self, data: bytes, limit: int):
        self.data = data
        self.pos = 0
        self.limit = limit

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > self.limit:
            raise WireError("TRUNCATED", f"need {n} bytes at offset {self.pos}, document ends early")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))

    def u8(self) -> int:
        return self.unpack(_U8)[0]

    def u16(self) -> int:
        return self.unpack(_U16)[0]

    def raw_str(self) -> bytes:
        return self.take(self.u16())


def _text(raw: bytes, what: str) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        raise WireError("MALFORMED", f"{what} is not valid UTF-8") from None


def _build_keyframe(values: tuple[float, ...], where: str) -> Keyframe:
    if not all(math.isfinite(v) for v in values):
        raise WireError("MALFORMED", f"{where}: non-finite value")
    t, px, py, pz, qx, qy, qz, qw, sx, sy, sz = values
    if t < 0:
        raise WireError("MALFORMED", f"{where}: negative time")
    q = Quat(qx, qy, qz, qw)
    n = q.norm()
    if abs(n - 1.0) > QUAT_TOL:
        raise WireError("MALFORMED", f"{where}: quaternion norm {n:.6g}")
    if abs(n - 1.0) > UNIT_TOL:
        q = q.normalized()
    if min(sx, sy, sz) <= 0:
        raise WireError("MALFORMED", f"{where}: non-positive scale")
    return Keyframe(t, Pose(Vec3(px, py, pz), q, Vec3(sx, sy, sz)))


def decode(data: bytes) -> InstructionSet:
    data = bytes(data)
    if data[:4] != MAGIC:
        if len(data) < 4 and MAGIC.startswith(data):
            raise WireError("TRUNCATED", "document shorter than its magic")
        raise WireError("BAD_MAGIC", f"expected {MAGIC!r}, got {data[:4]!r}")
    if len(data) < 6:
        raise WireError("TRUNCATED", "document ends inside the version field")
    version = _U16.unpack_from(data, 4)[0]
    if version != VERSION:
        raise WireError("BAD_VERSION", f"version {version}, expected {VERSION}")

    # structural pass: every length is honoured before the checksum is trusted
    r = _Reader(data, max(len(data) - 4, 0))
    r.pos = 6
    raw_set_id = r.raw_str()
    raw_target = r.raw_str()
    raw_steps = []
    for _ in range(r.u16()):
        hint, text = r.raw_str(), r.raw_str()
        cues = []
        for _ in range(r.u8()):
            asset, flag = r.raw_str(), r.u8()
            frames = [r.unpack(_KEYFRAME) for _ in range(r.u16())]
            cues.append((asset, flag, frames))
        raw_steps.append((hint, text, cues))
    if len(data) < r.pos + 4:
        raise WireError("TRUNCATED", "missing CRC trailer")
    if not crc_ok(data):
        raise WireError("CRC_MISMATCH", "trailer does not match document contents")
    if r.pos != len(data) - 4:
        raise WireError("MALFORMED", f"{len(data) - 4 - r.pos} unexpected bytes before trailer")

    set_id = _text(raw_set_id, "set_id")
    target = _text(raw_target, "target_asset")
    if not set_id:
        raise WireError("MALFORMED", "empty set_id")
    if asset_id_problem(target):
        raise WireError("MALFORMED", f"target asset: {asset_id_problem(target)}")
    if not raw_steps:
        raise WireError("MALFORMED", "instruction set has no steps")
    steps = []
    for s, (hint, text, raw_cues) in enumerate(raw_steps):
        text_s = _text(text, f"step {s} text")
        if not text_s.strip():
            raise WireError("MALFORMED", f"step {s} text is empty")
        cues = []
        for c, (asset, flag, frames) in enumerate(raw_cues):
            where = f"step {s} cue {c}"
            asset_s = _text(asset, f"{where} asset_id")
            if asset_id_problem(asset_s):
                raise WireError("MALFORMED", f"{where}: {asset_id_problem(asset_s)}")
            if flag not in (0, 1):
                raise WireError("MALFORMED", f"{where}: highlight byte {flag}")
            if not frames or (flag == 1 and len(frames) != 1):
                raise WireError("MALFORMED", f"{where}: {len(frames)} keyframes")
            track = tuple(_build_keyframe(v, f"{where} keyframe {k}") for k, v in enumerate(frames))
            if any(b.t_offset <= a.t_offset for a, b in zip(track, track[1:])):
                raise WireError("MALFORMED", f"{where}: keyframe times not increasing")
            cues.append(ModelCue(asset_s, flag == 1, track))
        steps.append(InstructionStep(s, text_s, _text(hint, f"step {s} hint"), tuple(cues)))
    return InstructionSet(set_id, target, tuple(steps))


@dataclass(frozen=True)
class SizeReport:
    wire_bytes: int
    referenced_asset_bytes: int

    @property
    def reduction_ratio(self) -> float:
        return self.referenced_asset_bytes / self.wire_bytes

    def format(self) -> str:
        return (
            f"wire_bytes={self.wire_bytes} referenced_asset_bytes={self.referenced_asset_bytes} "
            f"reduction_ratio={self.reduction_ratio:.2f}"
        )


def size_report(iset: InstructionSet, catalog: AssetCatalog) -> SizeReport:
    assets = referenced_bytes(iset, catalog)
    return SizeReport(len(encode(iset)), assets)
