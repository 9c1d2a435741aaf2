import csv

import numpy as np
import pytest

from esvforge.annotations import ClipManifest, RawAnnotationSegment, assemble_timeline, lookup_label
from esvforge.dataset import (
    CSV_COLUMNS,
    decode_frame_filename,
    emit_dataset,
    encode_frame_filename,
    read_labels_csv,
    remaining_time,
)
from esvforge.errors import MalformedFilenameError, OutOfRangeError
from esvforge.frames import FrameSignature, KeyframeRecord, frame_signature, Frame
from esvforge.taxonomy import default_registry

REG = default_registry()
SETUP = "setup.scope_setup.scope_insertion"
DISSECT = "dissection.mucosal_dissection.dissection"


def test_remaining_time():
    assert remaining_time(3600, 1200) == 2400
    assert remaining_time(3600, 3600) == 0
    with pytest.raises(OutOfRangeError):
        remaining_time(3600, 3700)
    with pytest.raises(OutOfRangeError):
        remaining_time(3600, -1)


def test_filename_round_trip():
    name = encode_frame_filename("surg-001", "clipA", 42, 12.345)
    assert name == "surg-001/clipA_frame_000042_ts_000012345.png"
    assert decode_frame_filename(name) == ("surg-001", "clipA", 42, 12.345)


def test_filename_lexicographic_order():
    names = [
        encode_frame_filename("surg-001", "clipA", 2, 1.0),
        encode_frame_filename("surg-001", "clipA", 10, 5.0),
        encode_frame_filename("surg-001", "clipB", 0, 0.0),
        encode_frame_filename("surg-002", "clipA", 0, 0.0),
    ]
    assert names == sorted(names)


def test_filename_rejects_bad_input():
    with pytest.raises(MalformedFilenameError):
        encode_frame_filename("a/b", "clip", 0, 0.0)
    with pytest.raises(MalformedFilenameError):
        encode_frame_filename("s", "clip.mp4", 0, 0.0)
    with pytest.raises(MalformedFilenameError):
        decode_frame_filename("nonsense.png")
    with pytest.raises(MalformedFilenameError):
        decode_frame_filename("s/clip_frame_12_ts_000000001.png")


def test_filename_round_trip_with_underscored_clip_ids():
    name = encode_frame_filename("s", "clip_frame_000001_ts_000000002", 3, 4.5)
    assert decode_frame_filename(name) == ("s", "clip_frame_000001_ts_000000002", 3, 4.5)


# -- emission ------------------------------------------------------------------


def make_timeline():
    raw = [
        RawAnnotationSegment("A", 0, 40, SETUP),
        RawAnnotationSegment("A", 50, 100, DISSECT),  # [40, 50) stays unlabelled
        RawAnnotationSegment("B", 0, 50, DISSECT),
    ]
    clips = [ClipManifest("A", 100.0, 0), ClipManifest("B", 50.0, 1)]
    return assemble_timeline("surg-001", raw, clips)


def record(clip, index, ts):
    rng = np.random.default_rng(index)
    sig = frame_signature(Frame(rng.integers(0, 256, (16, 16), dtype=np.uint8)))
    return KeyframeRecord("surg-001", clip, index, ts, sig)


def test_emit_counts_and_layout(tmp_path):
    timeline = make_timeline()
    keyframes = [record("A", 0, 0.0), record("A", 60, 30.0),
                 record("A", 90, 45.0),  # unlabelled gap -> dropped
                 record("B", 20, 10.0)]
    manifest, rows = emit_dataset(timeline, keyframes, tmp_path)
    assert manifest.rows == manifest.keyframes == manifest.cutouts == 3
    assert manifest.dropped_unlabelled == 1

    csv_rows = read_labels_csv(tmp_path / "timeline_labels.csv")
    assert len(csv_rows) == 3
    emitted_frames = sorted((tmp_path / "frames").rglob("*.png"))
    cutout_specs = sorted((tmp_path / "cutouts").rglob("*.json"))
    assert len(emitted_frames) == len(cutout_specs) == 3
    assert (tmp_path / "cutout-frames" / "surg-001").is_dir()


def test_emit_rows_self_consistent(tmp_path):
    timeline = make_timeline()
    keyframes = [record("A", 0, 0.0), record("A", 60, 30.0), record("B", 20, 10.0)]
    _, rows = emit_dataset(timeline, keyframes, tmp_path)
    for row in rows:
        surgery, clip, idx, ts = decode_frame_filename(row.filename)
        triplet = lookup_label(timeline, timeline.to_global(clip, ts))
        assert REG.format_triplet(triplet) == row.timeline_label
        assert row.timeline_label == ".".join([
            row.timeline_phase_label, row.timeline_task_label, row.timeline_action_label])
        assert row.time_to_finish >= 0


def test_time_to_finish_strictly_decreasing(tmp_path):
    timeline = make_timeline()
    keyframes = [record("A", 0, 0.0), record("A", 30, 15.0), record("A", 60, 30.0),
                 record("B", 0, 0.0), record("B", 20, 10.0)]
    _, rows = emit_dataset(timeline, keyframes, tmp_path)
    finishes = [r.time_to_finish for r in rows]  # rows sorted by filename = time order here
    assert finishes == sorted(finishes, reverse=True)
    assert all(a > b for a, b in zip(finishes, finishes[1:]))


def test_emit_empty_keyframes_gives_header_only_csv(tmp_path):
    manifest, rows = emit_dataset(make_timeline(), [], tmp_path)
    assert manifest.rows == 0
    with open(tmp_path / "timeline_labels.csv") as fh:
        lines = fh.read().splitlines()
    assert lines == [",".join(CSV_COLUMNS)]


def test_emit_csv_column_names_exact(tmp_path):
    emit_dataset(make_timeline(), [record("A", 0, 0.0)], tmp_path)
    with open(tmp_path / "timeline_labels.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header == list(CSV_COLUMNS)
    assert header == ["filename", "timeline_label", "timeline_phase_label",
                      "timeline_task_label", "timeline_action_label", "time_to_finish"]


def test_emit_copies_source_images(tmp_path):
    from PIL import Image
    src = tmp_path / "src.png"
    Image.fromarray(np.full((8, 8), 123, dtype=np.uint8)).save(src)
    timeline = make_timeline()
    _, rows = emit_dataset(timeline, [record("A", 0, 0.0)], tmp_path,
                           image_for=lambda rec: src)
    emitted = tmp_path / "frames" / rows[0].filename
    assert np.array_equal(np.asarray(Image.open(emitted)),
                          np.full((8, 8), 123, dtype=np.uint8))


def test_cutout_specs_respect_window_law(tmp_path):
    import json
    timeline = make_timeline()
    emit_dataset(make_timeline(), [record("A", 60, 30.0), record("A", 70, 35.0)], tmp_path)
    for spec_file in (tmp_path / "cutouts").rglob("*.json"):
        doc = json.loads(spec_file.read_text())
        assert doc["start_s"] >= 0
        assert doc["duration_s"] <= 30.0
