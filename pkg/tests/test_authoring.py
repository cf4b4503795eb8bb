import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mref.authoring import COLUMNS, CompileFailed, compile_csv, compile_rows, parse_csv
from mref.instructions import validate

from conftest import make_catalog
from oracles import ASSET_POOL, HEADER, emit_csv, random_instruction_set

IDENTITY = "0,0,0,0,0,0,1,1,1,1"


def row(step=0, text="Remove the tire", hint="next", cue=0, asset="tire_v1", hl=0, t=0, rest=IDENTITY):
    return f"{step},{text},{hint},{cue},{asset},{hl},{t},{rest}"


def doc(*rows, eol="\n"):
    return eol.join([HEADER, *rows]) + eol


def codes(text):
    with pytest.raises(CompileFailed) as info:
        compile_csv(text, "s", "rover")
    return [(e.line, e.code) for e in info.value.errors]


class TestParse:
    def test_header_only(self):
        assert parse_csv(HEADER + "\n") == []

    def test_header_matches_column_list(self):
        assert HEADER.split(",") == list(COLUMNS)

    @pytest.mark.parametrize("header", ["", "step_index,step_text", HEADER.upper(), HEADER + ",extra"])
    def test_bad_header(self, header):
        with pytest.raises(CompileFailed) as info:
            parse_csv(header + "\n" + row() + "\n")
        assert [(e.line, e.code) for e in info.value.errors] == [(1, "BAD_HEADER")]

    def test_sixteen_fields(self):
        short = row().rsplit(",", 1)[0]
        with pytest.raises(CompileFailed) as info:
            parse_csv(doc(row(), short))
        assert [(e.line, e.code) for e in info.value.errors] == [(3, "BAD_FIELD_COUNT")]

    def test_quoted_comma(self):
        (r,) = parse_csv(doc(row(text='"Turn the wrench, counterclockwise"')))
        assert r["step_text"] == "Turn the wrench, counterclockwise"
        assert len(r.fields) == 17

    def test_doubled_quote_escape(self):
        (r,) = parse_csv(doc(row(text='"Say ""next"" to continue"')))
        assert r["step_text"] == 'Say "next" to continue'

    def test_crlf_and_bom(self):
        rows = parse_csv("﻿" + doc(row(), row(t=1), eol="\r\n"))
        assert [r.line for r in rows] == [2, 3]

    def test_quoted_newline_keeps_line_numbers(self):
        rows = parse_csv(doc(row(text='"two\nlines"'), row(step=1)))
        assert [r.line for r in rows] == [2, 4]

    def test_all_errors_reported(self):
        short = row().rsplit(",", 1)[0]
        with pytest.raises(CompileFailed) as info:
            parse_csv(doc(short, row(), short + ",1,2"))
        assert [(e.line, e.code) for e in info.value.errors] == [(2, "BAD_FIELD_COUNT"), (4, "BAD_FIELD_COUNT")]


class TestCompile:
    def test_single_row(self):
        iset = compile_csv(doc(row()), "s", "rover")
        (step,) = iset.steps
        (cue,) = step.cues
        assert step.text == "Remove the tire" and step.key_phrase_hint == "next"
        assert cue.asset_id == "tire_v1" and not cue.highlight and len(cue.track) == 1
        assert tuple(cue.track[0].pose.rotation) == (0, 0, 0, 1)

    def test_step_gap(self):
        assert codes(doc(row(), row(step=2))) == [(3, "BAD_STEP_ORDER")]

    def test_must_start_at_zero(self):
        assert codes(doc(row(step=1))) == [(2, "BAD_STEP_ORDER")]

    def test_step_going_backwards(self):
        assert codes(doc(row(), row(step=1), row(step=0))) == [(4, "BAD_STEP_ORDER")]

    def test_near_unit_quaternion_renormalized(self):
        iset = compile_csv(doc(row(rest="0,0,0,0,0,0,0.9995,1,1,1")), "s", "rover")
        q = iset.steps[0].cues[0].track[0].pose.rotation
        assert tuple(q) == (0, 0, 0, 1.0)

    def test_far_from_unit_quaternion_rejected(self):
        assert codes(doc(row(rest="0,0,0,0,0,0,0.998,1,1,1"))) == [(2, "NON_UNIT_QUATERNION")]

    @pytest.mark.parametrize("rest", ["abc,0,0,0,0,0,1,1,1,1", "nan,0,0,0,0,0,1,1,1,1",
                                      "inf,0,0,0,0,0,1,1,1,1", "1e999,0,0,0,0,0,1,1,1,1",
                                      "0x10,0,0,0,0,0,1,1,1,1", ",0,0,0,0,0,1,1,1,1"])
    def test_bad_numbers(self, rest):
        assert codes(doc(row(rest=rest))) == [(2, "BAD_NUMBER")]

    def test_scientific_notation(self):
        iset = compile_csv(doc(row(rest="1.5e-3,-2E2,+.5,0,0,0,1,2.,1,1")), "s", "rover")
        pose = iset.steps[0].cues[0].track[0].pose
        assert tuple(pose.position) == (1.5e-3, -200.0, 0.5)
        assert pose.scale.x == 2.0

    def test_negative_time(self):
        assert codes(doc(row(t=-1))) == [(2, "BAD_NUMBER")]

    def test_empty_text(self):
        assert codes(doc(row(text="   "))) == [(2, "EMPTY_TEXT")]

    def test_keyframes_grouped_into_cues(self):
        iset = compile_csv(doc(row(), row(t=1.5), row(cue=1, asset="box", hl=1), row(step=1, text="Next")), "s", "rover")
        s0, s1 = iset.steps
        assert [len(c.track) for c in s0.cues] == [2, 1]
        assert s0.cues[1].highlight and s0.cues[1].asset_id == "box"
        assert [kf.t_offset for kf in s0.cues[0].track] == [0.0, 1.5]
        assert len(s1.cues) == 1

    def test_cueless_step(self):
        blank = "0,Look around,next" + "," * 14
        iset = compile_csv(doc(blank, row(step=1)), "s", "rover")
        assert iset.steps[0].cues == ()

    def test_field_mismatch(self):
        assert codes(doc(row(), row(t=1, text="Other"))) == [(3, "FIELD_MISMATCH")]
        assert codes(doc(row(), row(t=1, asset="jack_v1"))) == [(3, "FIELD_MISMATCH")]

    def test_track_must_increase(self):
        assert codes(doc(row(t=1), row(t=1))) == [(3, "NON_MONOTONIC_TRACK")]

    def test_highlight_single_keyframe(self):
        assert codes(doc(row(hl=1), row(hl=1, t=1))) == [(2, "BAD_HIGHLIGHT")]

    def test_cue_gap(self):
        assert codes(doc(row(), row(cue=2))) == [(3, "BAD_STEP_ORDER")]

    def test_compile_rows_requires_rows(self):
        with pytest.raises(CompileFailed):
            compile_rows([], "s", "rover")

    def test_all_or_nothing(self):
        # one bad row among many good ones still yields no set
        good = [row(t=i) for i in range(20)]
        with pytest.raises(CompileFailed):
            compile_csv(doc(*good, row(t=99, rest="x,0,0,0,0,0,1,1,1,1")), "s", "rover")


def _corrupt(line: str, how: int) -> str:
    fields = line.split(",")
    if how == 0:
        fields[7] = "NaN?"
    elif how == 1:
        fields = fields[:-1]
    elif how == 2:
        fields[13] = "5"
    else:
        fields[14] = "-1"
    return ",".join(fields)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(st.randoms(use_true_random=False))
    def test_round_trip_through_emitter(self, rng):
        iset = random_instruction_set(rng, wire=False)
        assert compile_csv(emit_csv(iset), iset.set_id, iset.target_asset) == iset

    @settings(max_examples=100, deadline=None)
    @given(st.randoms(use_true_random=False))
    def test_output_validates(self, rng):
        iset = random_instruction_set(rng, wire=False)
        compiled = compile_csv(emit_csv(iset), iset.set_id, iset.target_asset)
        assert validate(compiled, make_catalog({a: 1 for a in ASSET_POOL})).ok

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 30), st.data())
    def test_error_reporting_is_total(self, n, data):
        lines = [HEADER] + [row(t=i) for i in range(n)]
        picked = data.draw(st.lists(st.integers(1, n), min_size=1, max_size=n, unique=True))
        for i in picked:
            lines[i] = _corrupt(lines[i], data.draw(st.integers(0, 3)))
        with pytest.raises(CompileFailed) as info:
            compile_csv("\n".join(lines) + "\n", "s", "rover")
        assert len(info.value.errors) >= len(picked)

    def test_demo_sheet(self, demo_csv):
        iset = compile_csv(demo_csv, "tire_change", "rover")
        assert len(iset.steps) == 12
        assert sum(len(s.cues) for s in iset.steps) >= 30
        assert all(math.isclose(kf.pose.rotation.norm(), 1, abs_tol=1e-6)
                   for s in iset.steps for c in s.cues for kf in c.track)
