"""Frame-level processing: field-of-view crop, frame signatures, keyframe
selection, cutout windows, and transcoder command planning.

Frames enter as decoded raw images (the external transcoder exports image
sequences); no in-process codec work happens here. Per-clip pipelines are
independent and may run in parallel; within one clip the keyframe selector is
sequential because its comparison anchor is stateful.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import (
    EmptyStreamError,
    NoForegroundError,
    UnsupportedContainerError,
)

#: endoscopic surround is near-black; values above this (0-255 scale) count as bright
CROP_THRESHOLD = 10.0
#: side length of the square signature thumbnail
SIGNATURE_SIZE = 32
#: default cosine-distance threshold for keyframe selection
KEYFRAME_THRESHOLD = 0.05
#: cutouts capture at most this many seconds before the keyframe
CUTOUT_SECONDS = 30.0

# ITU-R 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])

SUPPORTED_CONTAINERS = {".mp4", ".mkv", ".mov", ".avi"}


@dataclass(frozen=True)
class Frame:
    """A decoded image: (H, W) grayscale or (H, W, 3) RGB uint8 samples."""
    data: np.ndarray
    timestamp_s: float = 0.0

    def __post_init__(self):
        d = self.data
        if d.dtype != np.uint8:
            raise ValueError(f"frame samples must be uint8, got {d.dtype}")
        if d.ndim == 3 and d.shape[2] != 3:
            raise ValueError(f"colour frames must have 3 channels, got {d.shape[2]}")
        if d.ndim not in (2, 3) or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError(f"bad frame shape {d.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def to_grayscale(frame: Frame) -> np.ndarray:
    """Float grayscale in [0, 255] using ITU-R 601 luma weights."""
    if frame.data.ndim == 2:
        return frame.data.astype(np.float64)
    return frame.data.astype(np.float64) @ _LUMA


# -- field-of-view crop --------------------------------------------------------


def crop_surgical_view(frame: Frame, threshold: float = CROP_THRESHOLD) -> Frame:
    """Isolate the bright circular surgical region.

    Pixels outside the largest bright 4-connected component are zeroed, the
    component's bounding box is cropped, and the crop is resized back to the
    input dimensions with bilinear interpolation. Output dimensions always
    equal input dimensions.

    Raises NoForegroundError when thresholding yields an empty mask; callers
    fall back to the identity frame.
    """
    gray = to_grayscale(frame)
    mask = gray > threshold
    if not mask.any():
        raise NoForegroundError("binary threshold produced an empty mask")

    labels, count = ndimage.label(mask)  # default structure = 4-connectivity
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    largest = int(sizes.argmax())  # ties: lowest label id, i.e. first in scan order
    component = labels == largest

    rows = np.flatnonzero(component.any(axis=1))
    cols = np.flatnonzero(component.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1]) + 1
    x0, x1 = int(cols[0]), int(cols[-1]) + 1

    masked = frame.data.copy()
    masked[~component] = 0
    crop = masked[y0:y1, x0:x1]

    img = Image.fromarray(crop)
    resized = img.resize((frame.width, frame.height), Image.BILINEAR)
    return Frame(np.asarray(resized, dtype=np.uint8), frame.timestamp_s)


# -- signatures ----------------------------------------------------------------


@dataclass(frozen=True)
class FrameSignature:
    """Unit-normalized flattened thumbnail; zero vector for all-black frames."""
    vector: np.ndarray

    def cosine_distance(self, other: "FrameSignature") -> float:
        return cosine_distance(self.vector, other.vector)


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cosine similarity for unit-or-zero vectors.

    Two zero vectors (two all-black frames) are identical: distance 0.
    A zero vector against anything else is maximally dissimilar: distance 1.
    """
    uz, vz = not u.any(), not v.any()
    if uz and vz:
        return 0.0
    if uz or vz:
        return 1.0
    return float(1.0 - np.dot(u, v))


def area_average_pool(gray: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact area-average downsample of a 2-D array to (out_h, out_w).

    Each output cell is the mean over its (possibly fractional) pixel
    footprint, computed from an integral image so non-divisible sizes are
    handled exactly.
    """
    h, w = gray.shape
    integral = np.zeros((h + 1, w + 1))
    np.cumsum(np.cumsum(gray, axis=0), axis=1, out=integral[1:, 1:])

    yb = np.linspace(0.0, h, out_h + 1)
    xb = np.linspace(0.0, w, out_w + 1)
    # bilinear sampling of the integral image is exact for piecewise-constant images
    yi = np.minimum(yb.astype(int), h - 1)
    xi = np.minimum(xb.astype(int), w - 1)
    fy = (yb - yi)[:, None]
    fx = (xb - xi)[None, :]
    s = (integral[np.ix_(yi, xi)] * (1 - fy) * (1 - fx)
         + integral[np.ix_(yi + 1, xi)] * fy * (1 - fx)
         + integral[np.ix_(yi, xi + 1)] * (1 - fy) * fx
         + integral[np.ix_(yi + 1, xi + 1)] * fy * fx)
    box = s[1:, 1:] - s[:-1, 1:] - s[1:, :-1] + s[:-1, :-1]
    area = (yb[1:] - yb[:-1])[:, None] * (xb[1:] - xb[:-1])[None, :]
    return box / area


def frame_signature(frame: Frame, size: int = SIGNATURE_SIZE) -> FrameSignature:
    """Grayscale, area-average to size x size, flatten, L2-normalize."""
    pooled = area_average_pool(to_grayscale(frame), size, size).ravel()
    norm = float(np.linalg.norm(pooled))
    if norm == 0.0:
        return FrameSignature(np.zeros(size * size))
    return FrameSignature(pooled / norm)


# -- keyframe selection ----------------------------------------------------------


@dataclass(frozen=True)
class KeyframeRecord:
    surgery_id: str
    clip_id: str
    frame_index: int
    timestamp_s: float
    signature: FrameSignature


def select_keyframes(signatures, threshold: float = KEYFRAME_THRESHOLD,
                     surgery_id: str = "", clip_id: str = "") -> list[KeyframeRecord]:
    """Select frames whose signature moves away from the last selected one.

    ``signatures`` is an ordered iterable of (timestamp_s, FrameSignature)
    with strictly increasing timestamps. The first frame is always selected;
    frame i is selected iff its cosine distance to the last *selected* frame
    exceeds ``threshold`` (the anchor updates on each selection, so slow drift
    cannot hide a scene change).
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    selected: list[KeyframeRecord] = []
    anchor: FrameSignature | None = None
    last_ts = -math.inf
    for index, (ts, sig) in enumerate(signatures):
        if ts <= last_ts:
            raise ValueError(f"timestamps must be strictly increasing at index {index}")
        last_ts = ts
        if anchor is None or anchor.cosine_distance(sig) > threshold:
            anchor = sig
            selected.append(KeyframeRecord(surgery_id, clip_id, index, ts, sig))
    if anchor is None:
        raise EmptyStreamError("no frames in signature stream")
    return selected


# -- cutouts ---------------------------------------------------------------------


@dataclass(frozen=True)
class CutoutSpec:
    source_clip: str
    start_s: float
    duration_s: float
    output_name: str

    def __post_init__(self):
        if self.start_s < 0 or self.duration_s < 0 or self.duration_s > CUTOUT_SECONDS:
            raise ValueError(f"bad cutout window [{self.start_s}, +{self.duration_s}]")


def cutout_window(keyframe_ts: float) -> tuple[float, float]:
    """Window ending at the keyframe: start = max(0, ts - 30), never past it."""
    if keyframe_ts < 0:
        raise ValueError(f"keyframe timestamp must be >= 0, got {keyframe_ts}")
    start = max(0.0, keyframe_ts - CUTOUT_SECONDS)
    return start, min(CUTOUT_SECONDS, keyframe_ts - start)


# -- transcoder command planning ---------------------------------------------------


@dataclass(frozen=True)
class CompressTask:
    bitrate_bps: int = 1_000_000


@dataclass(frozen=True)
class BlankAudioTask:
    has_audio: bool = False


@dataclass(frozen=True)
class CutoutTask:
    spec: CutoutSpec


@dataclass(frozen=True)
class TranscodePlan:
    args: tuple[str, ...]
    output: str
    no_op: bool = False


def transcode_plan(clip: str | Path, task, output_dir: str | Path) -> TranscodePlan:
    """Plan one ffmpeg invocation; nothing is executed here.

    Command templates (argument order is part of the contract):

    - compress:    ffmpeg -y -i IN -b:v BITRATE OUT
    - blank_audio: ffmpeg -y -i IN -f lavfi -i anullsrc=channel_layout=stereo:sample_rate=44100
                   -c:v copy -c:a aac -shortest OUT
    - cutout:      ffmpeg -y -ss START -t DURATION -i IN -c copy OUT
    """
    clip = Path(clip)
    if clip.suffix.lower() not in SUPPORTED_CONTAINERS:
        raise UnsupportedContainerError(f"unsupported container: {clip.suffix!r}")
    output_dir = Path(output_dir)

    if isinstance(task, CompressTask):
        out = output_dir / clip.name  # names are retained post-miniaturisation
        args = ("ffmpeg", "-y", "-i", str(clip), "-b:v", str(task.bitrate_bps), str(out))
        return TranscodePlan(args, str(out))
    if isinstance(task, BlankAudioTask):
        out = output_dir / clip.name
        if task.has_audio:
            return TranscodePlan((), str(clip), no_op=True)
        args = ("ffmpeg", "-y", "-i", str(clip),
                "-f", "lavfi", "-i", "anullsrc=channel_layout=stereo:sample_rate=44100",
                "-c:v", "copy", "-c:a", "aac", "-shortest", str(out))
        return TranscodePlan(args, str(out))
    if isinstance(task, CutoutTask):
        spec = task.spec
        out = output_dir / spec.output_name
        args = ("ffmpeg", "-y", "-ss", _fmt_seconds(spec.start_s),
                "-t", _fmt_seconds(spec.duration_s), "-i", str(clip),
                "-c", "copy", str(out))
        return TranscodePlan(args, str(out))
    raise TypeError(f"unknown transcode task: {task!r}")


def _fmt_seconds(x: float) -> str:
    return f"{x:.3f}"
