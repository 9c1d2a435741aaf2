"""Stage orchestration behind the CLI.

Input corpus layout (one folder per surgery under ``videos_root``)::

    {surgery}/clips.csv           clip manifest for this surgery
    {surgery}/{surgery}.json      annotation export
    {surgery}/frames/{clip}/*.png decoded frame sequence at the configured fps

Stages hand data to each other through files under ``out_root`` (``work/`` for
intermediates) so each CLI subcommand can run in its own process. Re-running a
stage overwrites its outputs deterministically. Frame timestamps are
millisecond-quantized at the source so filename round trips are exact.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import shlex
from pathlib import Path

import numpy as np
from PIL import Image

from .annotations import (
    ClipSpan,
    SurgeryTimeline,
    TimelineSegment,
    assemble_timeline,
    lookup_label,
    parse_annotation_export,
    read_clip_manifest,
)
from .config import PipelineConfig
from .dataset import (
    DatasetManifest,
    decode_frame_filename,
    emit_dataset,
    encode_frame_filename,
    read_labels_csv,
    write_labels_csv,
)
from .errors import EsvForgeError, NoForegroundError, UnlabelledError
from .frames import (
    CutoutTask,
    Frame,
    FrameSignature,
    KeyframeRecord,
    crop_surgical_view,
    cutout_window,
    frame_signature,
    select_keyframes,
    transcode_plan,
)
from .index import build_index, load_index, persist_index
from .report import (
    PredictionRecord,
    evaluate_predictions,
    read_predictions_csv,
    write_evaluation_report,
    write_predictions_csv,
)
from .service import create_server, serve_forever
from .taxonomy import Triplet, default_registry
from .temporal import (
    FeatureSequence,
    adaptive_layer_count,
    argmax_ordinals,
    correct_predictions,
    head_forward,
    load_head_params,
    random_head_params,
    save_head_params,
    softmax_triplet,
)

log = logging.getLogger(__name__)

TIMELINES_SCHEMA = "esv-forge/timelines/v1"
KEYFRAMES_SCHEMA = "esv-forge/keyframes/v1"


def work_dir(cfg: PipelineConfig) -> Path:
    return cfg.out_root / "work"


def discover_surgeries(videos_root: Path) -> list[str]:
    if not videos_root.is_dir():
        raise FileNotFoundError(f"videos root {videos_root} does not exist")
    found = sorted(d.name for d in videos_root.iterdir()
                   if d.is_dir() and (d / "clips.csv").is_file())
    if not found:
        raise FileNotFoundError(f"no surgery folders with clips.csv under {videos_root}")
    return found


def _quantize_ms(t: float) -> float:
    return round(t * 1000.0) / 1000.0


# -- import -------------------------------------------------------------------


def stage_import(cfg: PipelineConfig) -> dict[str, SurgeryTimeline]:
    registry = default_registry()
    timelines: dict[str, SurgeryTimeline] = {}
    for surgery in discover_surgeries(cfg.videos_root):
        sdir = cfg.videos_root / surgery
        manifest = read_clip_manifest(sdir / "clips.csv")
        if surgery not in manifest:
            raise EsvForgeError(f"{sdir / 'clips.csv'} has no rows for {surgery}")
        export = (sdir / f"{surgery}.json").read_text(encoding="utf-8")
        segments = parse_annotation_export(export, registry)
        timelines[surgery] = assemble_timeline(surgery, segments, manifest[surgery], registry)
        log.info("import: %s -> %d segments over %.1fs", surgery,
                 len(timelines[surgery].segments), timelines[surgery].total_duration_s)
    save_timelines(timelines, work_dir(cfg) / "timelines.json")
    return timelines


def save_timelines(timelines: dict[str, SurgeryTimeline], path: Path) -> None:
    registry = default_registry()
    doc = {"schema": TIMELINES_SCHEMA, "surgeries": {}}
    for surgery, tl in sorted(timelines.items()):
        doc["surgeries"][surgery] = {
            "total_duration_s": tl.total_duration_s,
            "segments": [[s.start_s, s.end_s, registry.format_triplet(s.triplet)]
                         for s in tl.segments],
            "clips": {cid: {"offset_s": span.offset_s, "duration_s": span.duration_s,
                            "part_index": span.part_index}
                      for cid, span in sorted(tl.clip_spans.items())},
        }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def load_timelines(path: Path) -> dict[str, SurgeryTimeline]:
    registry = default_registry()
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("schema") != TIMELINES_SCHEMA:
        raise EsvForgeError(f"{path}: not a timelines document")
    out = {}
    for surgery, entry in doc["surgeries"].items():
        out[surgery] = SurgeryTimeline(
            surgery_id=surgery,
            segments=tuple(TimelineSegment(s, e, registry.parse_triplet(label))
                           for s, e, label in entry["segments"]),
            total_duration_s=entry["total_duration_s"],
            clip_spans={cid: ClipSpan(c["offset_s"], c["duration_s"], c["part_index"])
                        for cid, c in entry["clips"].items()},
        )
    return out


# -- keyframes ------------------------------------------------------------------


def stage_keyframes(cfg: PipelineConfig) -> dict[str, list[KeyframeRecord]]:
    out: dict[str, list[KeyframeRecord]] = {}
    sig_dir = work_dir(cfg) / "signatures"
    sig_dir.mkdir(parents=True, exist_ok=True)
    for surgery in discover_surgeries(cfg.videos_root):
        records: list[KeyframeRecord] = []
        frames_root = cfg.videos_root / surgery / "frames"
        clip_dirs = sorted(d for d in frames_root.iterdir() if d.is_dir()) \
            if frames_root.is_dir() else []
        if not clip_dirs:
            raise FileNotFoundError(f"no decoded frame folders under {frames_root}")
        for clip_dir in clip_dirs:
            clip_id = clip_dir.name
            files = sorted(clip_dir.glob("*.png"))
            stream = []
            for i, f in enumerate(files):
                frame = Frame(np.asarray(Image.open(f).convert("RGB")), _quantize_ms(i / cfg.fps))
                stream.append((frame.timestamp_s, frame_signature(frame, cfg.signature_size), f))

            selected = select_keyframes(((ts, sig) for ts, sig, _ in stream),
                                        cfg.keyframe_threshold, surgery, clip_id)
            _save_signature_stream(sig_dir / f"{surgery}__{clip_id}.npz", stream)
            for rec in selected:
                _stage_keyframe_image(cfg, rec, files[rec.frame_index])
            records.extend(selected)
            log.info("keyframes: %s/%s %d frames -> %d keyframes",
                     surgery, clip_id, len(files), len(selected))
        out[surgery] = records
    save_keyframes(out, work_dir(cfg) / "keyframes.json")
    return out


def _save_signature_stream(path: Path, stream) -> None:
    np.savez(path,
             timestamps=np.array([ts for ts, _, _ in stream]),
             vectors=np.stack([sig.vector for _, sig, _ in stream]))


def load_signature_stream(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with np.load(path) as data:
        return data["timestamps"], data["vectors"]


def staging_path(cfg: PipelineConfig, rec: KeyframeRecord) -> Path:
    name = encode_frame_filename(rec.surgery_id, rec.clip_id, rec.frame_index, rec.timestamp_s)
    return work_dir(cfg) / "staging" / name


def _stage_keyframe_image(cfg: PipelineConfig, rec: KeyframeRecord, src: Path) -> None:
    dest = staging_path(cfg, rec)
    dest.parent.mkdir(parents=True, exist_ok=True)
    frame = Frame(np.asarray(Image.open(src).convert("RGB")), rec.timestamp_s)
    if cfg.crop_frames:
        try:
            frame = crop_surgical_view(frame)
        except NoForegroundError:
            pass  # keep the identity frame
    Image.fromarray(frame.data).save(dest)


def save_keyframes(records: dict[str, list[KeyframeRecord]], path: Path) -> None:
    doc = {"schema": KEYFRAMES_SCHEMA, "surgeries": {
        surgery: [{"clip_id": r.clip_id, "frame_index": r.frame_index,
                   "timestamp_s": r.timestamp_s} for r in recs]
        for surgery, recs in sorted(records.items())
    }}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def load_keyframes(cfg: PipelineConfig) -> dict[str, list[KeyframeRecord]]:
    """Rehydrate keyframe records, re-attaching signatures from the stream files."""
    path = work_dir(cfg) / "keyframes.json"
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("schema") != KEYFRAMES_SCHEMA:
        raise EsvForgeError(f"{path}: not a keyframes document")
    out: dict[str, list[KeyframeRecord]] = {}
    for surgery, entries in doc["surgeries"].items():
        records = []
        streams: dict[str, np.ndarray] = {}
        for e in entries:
            clip = e["clip_id"]
            if clip not in streams:
                _, vectors = load_signature_stream(
                    work_dir(cfg) / "signatures" / f"{surgery}__{clip}.npz")
                streams[clip] = vectors
            records.append(KeyframeRecord(
                surgery_id=surgery, clip_id=clip, frame_index=e["frame_index"],
                timestamp_s=e["timestamp_s"],
                signature=FrameSignature(streams[clip][e["frame_index"]]),
            ))
        out[surgery] = records
    return out


# -- emit ------------------------------------------------------------------------


def stage_emit(cfg: PipelineConfig) -> DatasetManifest:
    timelines = load_timelines(work_dir(cfg) / "timelines.json")
    keyframes = load_keyframes(cfg)
    total = DatasetManifest(root=cfg.out_root)
    all_rows = []
    for surgery in sorted(keyframes):
        manifest, rows = emit_dataset(
            timelines[surgery], keyframes[surgery], cfg.out_root,
            image_for=lambda rec: staging_path(cfg, rec),
            write_csv=False,
        )
        total.merge(manifest)
        all_rows.extend(rows)
    all_rows.sort(key=lambda r: r.filename)
    write_labels_csv(all_rows, cfg.out_root / "timeline_labels.csv")
    _write_cutout_script(cfg, all_rows, timelines)
    (cfg.out_root / "manifest.json").write_text(json.dumps({
        "rows": total.rows, "keyframes": total.keyframes, "cutouts": total.cutouts,
        "dropped_unlabelled": total.dropped_unlabelled,
        "per_surgery": total.per_surgery,
    }, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    log.info("emit: %d rows (%d unlabelled keyframes dropped)",
             total.rows, total.dropped_unlabelled)
    return total


def _write_cutout_script(cfg: PipelineConfig, rows, timelines) -> None:
    from .dataset import read_cutout_spec

    lines = ["#!/bin/sh", "# stream-copy cutout commands, one per dataset row"]
    for row in rows:
        surgery, clip, _, _ = decode_frame_filename(row.filename)
        spec = read_cutout_spec(
            cfg.out_root / "cutouts" / surgery / f"{Path(row.filename).stem}.json")
        clip_path = cfg.videos_root / surgery / f"{clip}.mp4"
        plan = transcode_plan(clip_path, CutoutTask(spec), cfg.out_root / "cutouts")
        lines.append(shlex.join(plan.args))
    script = cfg.out_root / "cutouts" / "transcode_plan.sh"
    script.write_text("\n".join(lines) + "\n", encoding="utf-8")
    script.chmod(0o755)


# -- infer -----------------------------------------------------------------------


def _head_params(cfg: PipelineConfig):
    if cfg.params_file is not None:
        return load_head_params(cfg.params_file)
    path = work_dir(cfg) / "head_params.npz"
    if path.is_file():
        return load_head_params(path)
    params = random_head_params(cfg.signature_size ** 2, cfg.hidden_size,
                                cfg.max_layers, seed=cfg.seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_head_params(params, path)
    log.info("infer: no params_file configured, wrote random parameters to %s", path)
    return params


def stage_infer(cfg: PipelineConfig) -> Path:
    registry = default_registry()
    timelines = load_timelines(work_dir(cfg) / "timelines.json")
    keyframes = load_keyframes(cfg)
    params = _head_params(cfg)

    records: list[PredictionRecord] = []
    for surgery in sorted(keyframes):
        timeline = timelines[surgery]
        ordered = sorted(keyframes[surgery],
                         key=lambda r: timeline.to_global(r.clip_id, r.timestamp_s))
        streams = {clip: load_signature_stream(
            work_dir(cfg) / "signatures" / f"{surgery}__{clip}.npz")
            for clip in {r.clip_id for r in ordered}}

        kept, raw_preds, probs_list = [], [], []
        for rec in ordered:
            global_ts = timeline.to_global(rec.clip_id, rec.timestamp_s)
            try:
                target = lookup_label(timeline, global_ts)
            except UnlabelledError:
                continue
            times, vectors = streams[rec.clip_id]
            start, _ = cutout_window(rec.timestamp_s)
            sel = (times >= start - 1e-9) & (times <= rec.timestamp_s + 1e-9)
            seq = FeatureSequence(vectors[sel])
            depth = adaptive_layer_count(seq.length, cfg.frames_per_layer, cfg.max_layers)
            sliced = dataclasses.replace(params, layers=params.layers[:depth])
            probs = softmax_triplet(head_forward(seq, sliced))
            p, t, a = argmax_ordinals(probs)
            raw_preds.append(Triplet(registry.phases[p], registry.tasks[t], registry.actions[a]))
            probs_list.append(probs)
            kept.append((rec, target))

        smoothed = correct_predictions(raw_preds, cfg.smoothing_k, registry)
        for (rec, target), predicted, probs in zip(kept, smoothed, probs_list):
            records.append(PredictionRecord(
                surgery_id=surgery,
                filename=encode_frame_filename(surgery, rec.clip_id, rec.frame_index,
                                               rec.timestamp_s),
                target=target, predicted=predicted, probs=probs,
            ))
    out = cfg.out_root / "predictions.csv"
    write_predictions_csv(records, out, registry)
    log.info("infer: wrote %d predictions to %s", len(records), out)
    return out


# -- evaluate / index / serve -------------------------------------------------------


def stage_evaluate(cfg: PipelineConfig) -> list[Path]:
    records = read_predictions_csv(cfg.out_root / "predictions.csv")
    if not records:
        raise EsvForgeError("no predictions to evaluate")
    result = evaluate_predictions(records)
    written = write_evaluation_report(result, cfg.out_root / "report")
    log.info("evaluate: wrote %s", ", ".join(str(p) for p in written))
    return written


def _annotation_samples(cfg: PipelineConfig):
    registry = default_registry()
    timelines = load_timelines(work_dir(cfg) / "timelines.json")
    rows = read_labels_csv(cfg.out_root / "timeline_labels.csv")
    samples = []
    for row in rows:
        surgery, clip, _, local_ts = decode_frame_filename(row.filename)
        global_ts = timelines[surgery].to_global(clip, local_ts)
        samples.append((surgery, global_ts, registry.parse_triplet(row.timeline_label)))
    samples.sort(key=lambda s: (s[0], s[1]))
    return samples


def _prediction_samples(cfg: PipelineConfig):
    timelines = load_timelines(work_dir(cfg) / "timelines.json")
    samples = []
    for rec in read_predictions_csv(cfg.out_root / "predictions.csv"):
        surgery, clip, _, local_ts = decode_frame_filename(rec.filename)
        global_ts = timelines[surgery].to_global(clip, local_ts)
        samples.append((surgery, global_ts, rec.predicted))
    samples.sort(key=lambda s: (s[0], s[1]))
    return samples


def stage_index(cfg: PipelineConfig) -> Path:
    samples = (_annotation_samples(cfg) if cfg.index_source == "annotation"
               else _prediction_samples(cfg))
    index = build_index(samples, source=cfg.index_source)
    out = cfg.out_root / "index.json"
    persist_index(index, out)
    log.info("index: %d segments over %d surgeries -> %s",
             len(index.segments), len(index.durations), out)
    return out


def stage_serve(cfg: PipelineConfig) -> None:
    index = load_index(cfg.out_root / "index.json")
    server = create_server(index, cfg.bind, ui_dir=cfg.ui_dir)
    serve_forever(server)
