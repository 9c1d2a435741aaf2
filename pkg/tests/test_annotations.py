import json
import random

import pytest

from esvforge.annotations import (
    ClipManifest,
    RawAnnotationSegment,
    TimelineSegment,
    assemble_timeline,
    lookup_label,
    normalize_segments,
    parse_annotation_export,
    read_clip_manifest,
)
from esvforge.errors import (
    OutOfRangeError,
    SchemaError,
    SegmentExceedsClipError,
    UnknownClipError,
    UnlabelledError,
)
from esvforge.taxonomy import default_registry

from oracles import lookup_oracle

REG = default_registry()
SETUP = "setup.scope_setup.scope_insertion"
DISSECT = "dissection.mucosal_dissection.dissection"
CLOSE = "closure.suturing.stitching"


def export_doc(regions, file="clipA.mp4"):
    return json.dumps({"clips": [{"file": file, "results": regions}]})


def test_parse_single_region():
    segs = parse_annotation_export(
        export_doc([{"start": 0, "end": 30, "labels": [SETUP]}]))
    assert len(segs) == 1
    assert segs[0] == RawAnnotationSegment("clipA", 0.0, 30.0, SETUP)


def test_parse_empty_export():
    assert parse_annotation_export(export_doc([])) == []


def test_parse_missing_end_is_schema_error():
    with pytest.raises(SchemaError, match="missing"):
        parse_annotation_export(export_doc([{"start": 0, "labels": [SETUP]}]))


def test_parse_multi_label_region_rejected():
    with pytest.raises(SchemaError, match="exactly one label"):
        parse_annotation_export(export_doc([{"start": 0, "end": 1, "labels": [SETUP, CLOSE]}]))


def test_parse_label_studio_shape():
    doc = json.dumps([{
        "data": {"video": "/uploads/clipB.mp4"},
        "annotations": [{"result": [
            {"value": {"start": 5, "end": 9, "labels": [DISSECT]}},
        ]}],
    }])
    segs = parse_annotation_export(doc)
    assert segs == [RawAnnotationSegment("clipB", 5.0, 9.0, DISSECT)]


def test_parse_propagates_bad_label():
    from esvforge.errors import UnknownNameError
    with pytest.raises(UnknownNameError):
        parse_annotation_export(export_doc([{"start": 0, "end": 1, "labels": ["a.b.c"]}]))


# -- assembly -----------------------------------------------------------------


def clips_ab():
    return [ClipManifest("A", 100.0, 0), ClipManifest("B", 50.0, 1)]


def test_offset_arithmetic():
    tl = assemble_timeline("s", [RawAnnotationSegment("B", 10, 20, SETUP)], clips_ab())
    assert tl.total_duration_s == 150.0
    seg = tl.segments[0]
    assert (seg.start_s, seg.end_s) == (110.0, 120.0)


def test_abutting_same_label_merged():
    raw = [RawAnnotationSegment("A", 0, 30, SETUP), RawAnnotationSegment("A", 30, 60, SETUP)]
    tl = assemble_timeline("s", raw, clips_ab())
    assert len(tl.segments) == 1
    assert (tl.segments[0].start_s, tl.segments[0].end_s) == (0.0, 60.0)


def test_overlap_later_segment_wins():
    raw = [RawAnnotationSegment("A", 0, 40, SETUP), RawAnnotationSegment("A", 30, 60, DISSECT)]
    tl = assemble_timeline("s", raw, clips_ab())
    assert [(s.start_s, s.end_s) for s in tl.segments] == [(0.0, 30.0), (30.0, 60.0)]
    # brute-force point sampling on a 0.1s grid: union and disjointness
    for i in range(0, 600):
        t = i / 10.0
        expected = DISSECT if t >= 30 else SETUP
        assert REG.format_triplet(lookup_label(tl, t)) == expected


def test_unknown_clip():
    with pytest.raises(UnknownClipError):
        assemble_timeline("s", [RawAnnotationSegment("Z", 0, 1, SETUP)], clips_ab())


def test_segment_exceeds_clip():
    with pytest.raises(SegmentExceedsClipError):
        assemble_timeline("s", [RawAnnotationSegment("A", 0, 101, SETUP)], clips_ab())


def test_segment_within_tolerance_clamped():
    tl = assemble_timeline("s", [RawAnnotationSegment("A", 90, 100.04, SETUP)], clips_ab())
    assert tl.segments[-1].end_s == 100.0


def test_noncontiguous_parts_rejected():
    clips = [ClipManifest("A", 10, 0), ClipManifest("B", 10, 2)]
    with pytest.raises(SchemaError, match="contiguous"):
        assemble_timeline("s", [], clips)


# -- lookup -------------------------------------------------------------------


def test_lookup_containment_and_boundary():
    raw = [RawAnnotationSegment("A", 0, 30, SETUP), RawAnnotationSegment("A", 30, 90, DISSECT)]
    tl = assemble_timeline("s", raw, clips_ab())
    assert REG.format_triplet(lookup_label(tl, 45)) == DISSECT
    assert REG.format_triplet(lookup_label(tl, 30)) == DISSECT  # half-open intervals
    assert REG.format_triplet(lookup_label(tl, 0)) == SETUP


def test_lookup_gap_and_range():
    tl = assemble_timeline("s", [], clips_ab())
    with pytest.raises(UnlabelledError):
        lookup_label(tl, 0)
    with pytest.raises(OutOfRangeError):
        lookup_label(tl, 151)
    with pytest.raises(OutOfRangeError):
        lookup_label(tl, -1)


def test_lookup_agrees_with_linear_scan_oracle():
    rng = random.Random(5)
    labels = [SETUP, DISSECT, CLOSE]
    for _ in range(25):
        raw = []
        for _ in range(rng.randint(1, 12)):
            clip = rng.choice(["A", "B"])
            dur = 100.0 if clip == "A" else 50.0
            start = round(rng.uniform(0, dur - 1), 1)
            end = round(rng.uniform(start + 0.1, dur), 1)
            raw.append(RawAnnotationSegment(clip, start, end, rng.choice(labels)))
        tl = assemble_timeline("s", raw, clips_ab())
        oracle_segments = [(s.start_s, s.end_s, REG.format_triplet(s.triplet))
                           for s in tl.segments]
        for _ in range(200):
            t = round(rng.uniform(0, 150), 3)
            expected = lookup_oracle(oracle_segments, t)
            if expected is None:
                with pytest.raises(UnlabelledError):
                    lookup_label(tl, t)
            else:
                assert REG.format_triplet(lookup_label(tl, t)) == expected


def test_normalization_idempotent_on_random_inputs():
    rng = random.Random(11)
    labels = [SETUP, DISSECT, CLOSE]
    for _ in range(50):
        segs = []
        for _ in range(rng.randint(0, 10)):
            start = rng.uniform(0, 100)
            segs.append(TimelineSegment(start, start + rng.uniform(0.1, 30),
                                        REG.parse_triplet(rng.choice(labels))))
        once = normalize_segments(segs)
        assert normalize_segments(once) == once
        # sorted, disjoint
        for a, b in zip(once, once[1:]):
            assert a.end_s <= b.start_s


def test_order_preserving_offsets():
    tl = assemble_timeline("s", [], clips_ab())
    assert tl.to_global("B", 1.0) > tl.to_global("A", 99.0)
    assert tl.to_global("A", 1.0) < tl.to_global("A", 2.0)


def test_read_clip_manifest(tmp_path):
    p = tmp_path / "clips.csv"
    p.write_text("surgery_id,clip_id,part_index,duration_s\ns1,A,0,100\ns1,B,1,50\n")
    manifest = read_clip_manifest(p)
    assert manifest["s1"] == [ClipManifest("A", 100.0, 0), ClipManifest("B", 50.0, 1)]
