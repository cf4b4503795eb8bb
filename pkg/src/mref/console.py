"""Key-phrase state machine for instruction navigation, sampling and note taking.

The machine never performs I/O. Each call returns the new state plus a list of
effects (display text, append a note line, send a downlink ...) which the
caller executes or logs.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, replace
from typing import Mapping

from mref.instructions import InstructionSet
from mref.link import MessageKind

PHOTO_INTERVAL = 0.5
MAX_VOCABULARY = 25

DEFAULT_KEYWORDS = {
    "open_instructions": "open instructions",
    "next": "next",
    "back": "back",
    "close": "close",
    "begin_sampling": "begin sampling",
    "collect_sample": "collect sample",
    "stop": "stop",
    "exit": "exit",
    "take_notes": "take notes",
}

# Only the first question comes from the field procedure; the rest are defaults.
DEFAULT_QUESTIONS = (
    "What color is the sample?",
    "What is the approximate size?",
    "Describe the texture.",
    "Where was it collected?",
)


def _q(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def fmt_t(t: float) -> str:
    return f"{t:.6f}"


@dataclass(frozen=True)
class PhraseToken:
    text: str
    t: float

    @classmethod
    def from_transcript(cls, raw: str, t: float) -> PhraseToken:
        """Lower-case, trim, collapse whitespace and drop trailing punctuation."""
        text = re.sub(r"\s+", " ", raw.strip().lower())
        return cls(text.rstrip(".!?,;: ").strip(), t)


# -- effects ---------------------------------------------------------------

@dataclass(frozen=True)
class Display:
    text: str
    hint: str = ""
    kind = "DISPLAY"

    def args(self) -> str:
        return f"text={_q(self.text)} hint={_q(self.hint)}"


@dataclass(frozen=True)
class OpenFolder:
    path: str
    kind = "OPEN_FOLDER"

    def args(self) -> str:
        return f"path={self.path}"


@dataclass(frozen=True)
class AppendNote:
    path: str
    line: str
    kind = "APPEND_NOTE"

    def args(self) -> str:
        return f"path={self.path} line={_q(self.line)}"


@dataclass(frozen=True)
class SchedulePhotos:
    path: str
    start: float
    interval: float = PHOTO_INTERVAL
    kind = "SCHEDULE_PHOTOS"

    def args(self) -> str:
        return f"path={self.path} interval={fmt_t(self.interval)}"


@dataclass(frozen=True)
class CancelPhotos:
    path: str
    kind = "CANCEL_PHOTOS"

    def args(self) -> str:
        return f"path={self.path}"


@dataclass(frozen=True)
class CapturePhoto:
    path: str
    seq: int
    at: float
    kind = "CAPTURE_PHOTO"

    def args(self) -> str:
        return f"path={self.path} seq={self.seq} at={fmt_t(self.at)}"


@dataclass(frozen=True)
class SendDownlink:
    message_kind: MessageKind
    path: str
    content: str

    kind = "SEND_DOWNLINK"

    @property
    def payload_bytes(self) -> int:
        return len(self.content.encode("utf-8"))

    def args(self) -> str:
        return f"kind={self.message_kind.value} path={self.path} bytes={self.payload_bytes}"


Effect = Display | OpenFolder | AppendNote | SchedulePhotos | CancelPhotos | CapturePhoto | SendDownlink


def effect_line(t: float, effect: Effect) -> str:
    return f"effect t={fmt_t(t)} {effect.kind} {effect.args()}"


# -- state -----------------------------------------------------------------

class Mode(str, enum.Enum):
    IDLE = "IDLE"
    INSTRUCTIONS = "INSTRUCTIONS"
    SAMPLING = "SAMPLING"
    NOTE_TAKING = "NOTE_TAKING"


@dataclass(frozen=True)
class Answer:
    question: str
    answer: str
    t: float


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    created_at: float
    answers: tuple[Answer, ...] = ()


@dataclass(frozen=True)
class PhotoSchedule:
    path: str
    start: float
    taken: int = 0


@dataclass(frozen=True)
class ConsoleState:
    mode: Mode = Mode.IDLE
    set_id: str | None = None
    step: int = 0
    sample: SampleRecord | None = None
    question: int = 0
    loaded_sets: tuple[str, ...] = ()
    sample_counter: int = 0
    photos: PhotoSchedule | None = None
    notes: tuple[str, ...] = ()


def header_line(record: SampleRecord) -> str:
    return f"sample {record.sample_id} t={fmt_t(record.created_at)}"


def answer_line(a: Answer) -> str:
    return f"t={fmt_t(a.t)} {a.question} :: {a.answer}"


def export_notes(record: SampleRecord) -> str:
    lines = [header_line(record)]
    lines += [answer_line(a) for a in sorted(record.answers, key=lambda a: a.t)]
    return "\n".join(lines) + "\n"


class Console:
    def __init__(
        self,
        sets: Mapping[str, InstructionSet] | None = None,
        questions: tuple[str, ...] = DEFAULT_QUESTIONS,
        env_id: str = "env_1",
        keywords: Mapping[str, str] = DEFAULT_KEYWORDS,
    ):
        if not questions:
            raise ValueError("sampling needs at least one question")
        missing = set(DEFAULT_KEYWORDS) - set(keywords)
        if missing:
            raise ValueError(f"keyword table lacks actions: {sorted(missing)}")
        phrases = list(keywords.values())
        if len(set(phrases)) != len(phrases):
            raise ValueError("keyword phrases must be distinct")
        if len(phrases) > MAX_VOCABULARY:
            raise ValueError(f"vocabulary of {len(phrases)} phrases exceeds {MAX_VOCABULARY}")
        self.sets: dict[str, InstructionSet] = dict(sets or {})
        self.questions = tuple(questions)
        self.env_id = env_id
        self.keywords = dict(keywords)
        self._actions = {phrase: action for action, phrase in keywords.items()}

    @property
    def vocabulary(self) -> frozenset[str]:
        return frozenset(self._actions)

    def initial_state(self) -> ConsoleState:
        return ConsoleState(loaded_sets=tuple(self.sets))

    def load(self, state: ConsoleState, iset: InstructionSet) -> tuple[ConsoleState, list[Effect]]:
        """Make a received instruction set available to "open instructions"."""
        self.sets[iset.set_id] = iset
        loaded = tuple(s for s in state.loaded_sets if s != iset.set_id) + (iset.set_id,)
        new = replace(state, loaded_sets=loaded)
        if state.mode is Mode.INSTRUCTIONS and state.set_id == iset.set_id:
            # a replacement may be shorter than the copy being viewed
            new = replace(new, step=min(state.step, len(iset.steps) - 1))
        return new, [Display(f"Instruction set {iset.set_id} received", self.keywords["open_instructions"])]

    def handle_token(self, state: ConsoleState, token: PhraseToken) -> tuple[ConsoleState, list[Effect]]:
        action = self._actions.get(token.text)
        if state.mode is Mode.IDLE:
            return self._idle(state, action, token.t)
        if state.mode is Mode.INSTRUCTIONS:
            return self._instructions(state, action)
        if state.mode is Mode.SAMPLING:
            return self._sampling(state, action, token)
        return self._note_taking(state, action, token)

    # -- per mode ----------------------------------------------------------

    def _step_display(self, set_id: str, step: int) -> Display:
        s = self.sets[set_id].steps[step]
        return Display(s.text, s.key_phrase_hint)

    def _idle(self, state, action, t):
        if action == "open_instructions" and state.loaded_sets:
            set_id = state.loaded_sets[-1]
            return (replace(state, mode=Mode.INSTRUCTIONS, set_id=set_id, step=0),
                    [self._step_display(set_id, 0)])
        if action == "begin_sampling":
            return self._new_sample(state, t, [])
        if action == "take_notes":
            return (replace(state, mode=Mode.NOTE_TAKING, notes=()),
                    [OpenFolder(self.env_id), Display("Taking notes", self.keywords["close"])])
        return state, []

    def _instructions(self, state, action):
        if action == "close":
            return replace(state, mode=Mode.IDLE, set_id=None, step=0), []
        if action in ("next", "back"):
            last = len(self.sets[state.set_id].steps) - 1
            step = min(state.step + 1, last) if action == "next" else max(state.step - 1, 0)
            return replace(state, step=step), [self._step_display(state.set_id, step)]
        return state, []

    def _sample_paths(self, sample_id: str) -> tuple[str, str, str]:
        folder = f"{self.env_id}/{sample_id}"
        return folder, f"{folder}/notes.txt", f"{folder}/photos.log"

    def _question_display(self, q: int) -> Display:
        return Display(self.questions[q], self.keywords["next"])

    def _new_sample(self, state, t, effects):
        counter = state.sample_counter + 1
        record = SampleRecord(f"sample_{counter}", t)
        folder, notes, photos = self._sample_paths(record.sample_id)
        effects = effects + [
            OpenFolder(folder),
            AppendNote(notes, header_line(record)),
            SchedulePhotos(photos, t),
            self._question_display(0),
        ]
        new = replace(state, mode=Mode.SAMPLING, sample=record, question=0,
                      sample_counter=counter, photos=PhotoSchedule(photos, t))
        return new, effects

    def _close_sample(self, state) -> list[Effect]:
        _, notes, _ = self._sample_paths(state.sample.sample_id)
        effects: list[Effect] = []
        if state.photos is not None:
            effects.append(CancelPhotos(state.photos.path))
        effects.append(SendDownlink(MessageKind.NOTE_FILE, notes, export_notes(state.sample)))
        return effects

    def _sampling(self, state, action, token):
        if action == "next":
            q = min(state.question + 1, len(self.questions) - 1)
            return replace(state, question=q), [self._question_display(q)]
        if action == "stop":
            if state.photos is None:
                return state, []
            return replace(state, photos=None), [CancelPhotos(state.photos.path)]
        if action == "collect_sample":
            return self._new_sample(state, token.t, self._close_sample(state))
        if action == "exit":
            effects = self._close_sample(state)
            return replace(state, mode=Mode.IDLE, sample=None, question=0, photos=None), effects
        if action is not None or not token.text:
            return state, []
        answer = Answer(self.questions[state.question], token.text, token.t)
        record = replace(state.sample, answers=state.sample.answers + (answer,))
        _, notes, _ = self._sample_paths(record.sample_id)
        return replace(state, sample=record), [AppendNote(notes, answer_line(answer))]

    def _note_taking(self, state, action, token):
        path = f"{self.env_id}/field_notes.txt"
        if action == "close":
            content = "".join(line + "\n" for line in state.notes)
            return (replace(state, mode=Mode.IDLE, notes=()),
                    [SendDownlink(MessageKind.NOTE_FILE, path, content)])
        if action is not None or not token.text:
            return state, []
        line = f"t={fmt_t(token.t)} {token.text}"
        return replace(state, notes=state.notes + (line,)), [AppendNote(path, line)]

    # -- photos ------------------------------------------------------------

    def next_capture(self, state: ConsoleState) -> float | None:
        sched = state.photos
        return None if sched is None else sched.start + (sched.taken + 1) * PHOTO_INTERVAL

    def photo_tick(self, state: ConsoleState, t: float) -> tuple[ConsoleState, list[Effect]]:
        """Emit one capture per elapsed interval boundary in (start, t]."""
        sched = state.photos
        if sched is None or t <= sched.start:
            return state, []
        due = math.floor((t - sched.start) / PHOTO_INTERVAL + 1e-9)
        if due <= sched.taken:
            return state, []
        effects = [CapturePhoto(sched.path, k, sched.start + k * PHOTO_INTERVAL)
                   for k in range(sched.taken + 1, due + 1)]
        return replace(state, photos=replace(sched, taken=due)), effects
