"""Independent reference computations and generators shared by the tests.

Nothing here calls into the code path it is used to check.
"""

from __future__ import annotations

import csv
import io
import math
import random
import string
import struct

import numpy as np

from mref.instructions import InstructionSet, InstructionStep, ModelCue
from mref.pose import Keyframe, Pose, Quat, Vec3


# -- rotations ---------------------------------------------------------------

def axis_angle_quat(axis, degrees):
    """(x, y, z, w) straight from the half-angle formula."""
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    h = math.radians(degrees) / 2
    return (*(ax * math.sin(h)), math.cos(h))


def rotation_matrix(q):
    x, y, z, w = q
    n = math.sqrt(x * x + y * y + z * z + w * w)
    x, y, z, w = x / n, y / n, z / n, w / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def homogeneous(pose: Pose) -> np.ndarray:
    """4x4 matrix applying scale, then rotation, then translation."""
    m = np.eye(4)
    m[:3, :3] = rotation_matrix(tuple(pose.rotation)) @ np.diag(list(pose.scale))
    m[:3, 3] = list(pose.position)
    return m


def decompose(m: np.ndarray):
    """(translation, rotation matrix, per-axis scale) of a scale-rotate-translate matrix."""
    lin = m[:3, :3]
    scale = np.linalg.norm(lin, axis=0)
    return m[:3, 3], lin / scale, scale


# -- links -------------------------------------------------------------------

def delivery_times(schedule, rate, delay):
    """Scalar store-and-forward recurrence over (t_submit, size) pairs."""
    out = []
    prev_end = -math.inf
    for t_submit, size in schedule:
        end = max(t_submit, prev_end) + size / rate
        out.append(end + delay)
        prev_end = end
    return out


# -- telemetry ---------------------------------------------------------------

def rescan_events(samples, specs):
    """Classify every sample from scratch and diff consecutive per-channel states."""
    in_alarm = {name: [] for name in specs}
    for t, channel, value in samples:
        lo, hi, _ = specs[channel]
        in_alarm[channel].append((t, value, not (lo <= value <= hi)))
    events = []
    for name, states in in_alarm.items():
        prev = False
        for t, value, alarm in states:
            if alarm != prev:
                events.append((t, name, "ENTER_ALARM" if alarm else "EXIT_ALARM", value))
            prev = alarm
    return events


# -- wire size ---------------------------------------------------------------

def wire_size(iset: InstructionSet) -> int:
    """Closed-form byte count of the encoded layout."""
    def s(text):
        return 2 + len(text.encode("utf-8"))

    size = 4 + 2 + s(iset.set_id) + s(iset.target_asset) + 2
    for step in iset.steps:
        size += s(step.key_phrase_hint) + s(step.text) + 1
        for cue in step.cues:
            size += s(cue.asset_id) + 1 + 2 + 44 * len(cue.track)
    return size + 4


# -- CSV emitter -------------------------------------------------------------

HEADER = ("step_index,step_text,key_phrase_hint,cue_index,asset_id,highlight,"
          "t_offset_s,px,py,pz,qx,qy,qz,qw,sx,sy,sz")


def emit_csv(iset: InstructionSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(HEADER.split(","))
    for step in iset.steps:
        if not step.cues:
            w.writerow([step.index, step.text, step.key_phrase_hint] + [""] * 14)
        for c, cue in enumerate(step.cues):
            for kf in cue.track:
                p = kf.pose
                nums = [kf.t_offset, *p.position, *p.rotation, *p.scale]
                w.writerow([step.index, step.text, step.key_phrase_hint, c, cue.asset_id,
                            int(cue.highlight), *map(repr, nums)])
    return buf.getvalue()


# -- random generators -------------------------------------------------------

def f32(x: float) -> float:
    return struct.unpack("<f", struct.pack("<f", x))[0]


def random_unit_quat(rng: random.Random) -> Quat:
    while True:
        # rejection sampling inside the unit 4-ball gives a uniform direction
        v = [rng.uniform(-1, 1) for _ in range(4)]
        n = math.sqrt(sum(c * c for c in v))
        if 1e-3 < n <= 1:
            break
    return Quat(*(c / n for c in v))


def random_pose(rng: random.Random, *, uniform_scale=False, wire=False) -> Pose:
    cast = f32 if wire else float
    pos = Vec3(*(cast(rng.uniform(-10, 10)) for _ in range(3)))
    if uniform_scale:
        s = rng.uniform(0.2, 3.0)
        scale = Vec3(s, s, s)
    else:
        scale = Vec3(*(cast(rng.uniform(0.2, 3.0)) for _ in range(3)))
    q = random_unit_quat(rng)
    if wire:
        q = Quat(*(f32(c) for c in q))
    return Pose(pos, q, scale)


ASSET_POOL = ["rover", "tire_v1", "wrench_v1", "jack_v1", "arrow_ccw", "highlight_box", "bolt_ø8", "ключ"]
_TEXT_ALPHABET = string.ascii_letters + string.digits + " ,.;:'\"-é°→ü漢"


def _text(rng: random.Random, lo=1, hi=40) -> str:
    while True:
        s = "".join(rng.choice(_TEXT_ALPHABET) for _ in range(rng.randint(lo, hi)))
        if s.strip():
            return s


def random_track(rng: random.Random, n: int, wire: bool) -> tuple[Keyframe, ...]:
    t = 0.0
    frames = []
    for _ in range(n):
        frames.append(Keyframe(f32(t) if wire else t, random_pose(rng, wire=wire)))
        t += rng.choice([0.25, 0.5, 1.0, 1.5, 2.0]) if wire else rng.uniform(0.01, 2.0)
    return tuple(frames)


def random_instruction_set(rng: random.Random, *, wire=True, max_steps=6, max_cues=4, max_frames=5) -> InstructionSet:
    """A structurally valid set; with ``wire`` every float is f32-exact."""
    steps = []
    for s in range(rng.randint(1, max_steps)):
        cues = []
        for _ in range(rng.randint(0, max_cues)):
            highlight = rng.random() < 0.3
            n = 1 if highlight else rng.randint(1, max_frames)
            cues.append(ModelCue(rng.choice(ASSET_POOL), highlight, random_track(rng, n, wire)))
        steps.append(InstructionStep(s, _text(rng), rng.choice(["next", "back", "close", ""]), tuple(cues)))
    return InstructionSet(_text(rng, 1, 12), rng.choice(ASSET_POOL), tuple(steps))
