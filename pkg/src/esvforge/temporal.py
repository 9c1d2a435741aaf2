"""Temporal-head mathematics in inference mode.

Stacked LSTM over a per-frame feature sequence, softmax attention pooling of
the hidden states, an affine output layer with frozen batch-norm statistics,
per-level cross-entropy combined into one weighted loss, probability mean
ensembling, and run-length prediction smoothing. Pure functions over immutable
parameters; no training.

Parameter file layout (NumPy ``.npz``): a ``meta`` JSON entry with
``{"format": "esv-forge/head-params/v1", "layers", "input_size",
"hidden_size", "widths", "checksum"}`` plus arrays ``lstm{l}_wx`` (4H x D_l),
``lstm{l}_wh`` (4H x H), ``lstm{l}_b`` (4H) for each layer, ``attn_w`` (H),
``out_w`` (n_out x H) and ``norm_mean``/``norm_var``/``norm_scale``/
``norm_shift`` (n_out). The checksum is SHA-256 over the raw array bytes in
name order. Gate order inside the stacked 4H axis is input, forget, cell,
output.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyEnsembleError,
    VersionMismatchError,
)
from .taxonomy import TaxonomyRegistry, Triplet, default_registry

log = logging.getLogger(__name__)

PARAM_FORMAT = "esv-forge/head-params/v1"
#: batch-norm epsilon used at inference
NORM_EPS = 1e-5


@dataclass(frozen=True)
class FeatureSequence:
    """T x D_in matrix of per-frame feature vectors."""
    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] < 1:
            raise DimensionMismatchError(f"feature sequence must be TxD with T>=1, got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("feature sequence contains non-finite entries")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LstmLayerParams:
    """Stacked-gate weights: rows ordered input, forget, cell, output."""
    w_x: np.ndarray  # (4H, D_in)
    w_h: np.ndarray  # (4H, H)
    b: np.ndarray    # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_x.shape[1]

    def validate(self) -> None:
        h = self.hidden_size
        if self.w_x.shape[0] != 4 * h or self.w_h.shape != (4 * h, h) or self.b.shape != (4 * h,):
            raise DimensionMismatchError(
                f"inconsistent LSTM layer shapes: {self.w_x.shape}, {self.w_h.shape}, {self.b.shape}"
            )


@dataclass(frozen=True)
class HeadParams:
    layers: tuple[LstmLayerParams, ...]
    attn_w: np.ndarray     # (H,)
    out_w: np.ndarray      # (n_out, H)
    norm_mean: np.ndarray  # (n_out,)
    norm_var: np.ndarray   # (n_out,)
    norm_scale: np.ndarray  # (n_out,)
    norm_shift: np.ndarray  # (n_out,)
    widths: tuple[int, int, int] = (5, 12, 21)

    def __post_init__(self):
        if not self.layers:
            raise DimensionMismatchError("at least one LSTM layer required")
        for layer in self.layers:
            layer.validate()
        h = self.hidden_size
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.input_size != prev.hidden_size:
                raise DimensionMismatchError("stacked layers have mismatched widths")
        n_out = sum(self.widths)
        if self.attn_w.shape != (h,):
            raise DimensionMismatchError(f"attention vector must be ({h},), got {self.attn_w.shape}")
        if self.out_w.shape != (n_out, h):
            raise DimensionMismatchError(f"output weights must be ({n_out}, {h}), got {self.out_w.shape}")
        for name in ("norm_mean", "norm_var", "norm_scale", "norm_shift"):
            if getattr(self, name).shape != (n_out,):
                raise DimensionMismatchError(f"{name} must be ({n_out},)")
        if not (self.norm_var > 0).all():
            raise ValueError("normalization variances must be positive")

    @property
    def hidden_size(self) -> int:
        return self.layers[-1].hidden_size

    @property
    def input_size(self) -> int:
        return self.layers[0].input_size


@dataclass(frozen=True)
class TripletLogits:
    """Per-level raw scores (or probabilities after softmax_triplet)."""
    phase: np.ndarray
    task: np.ndarray
    action: np.ndarray

    @property
    def widths(self) -> tuple[int, int, int]:
        return (len(self.phase), len(self.task), len(self.action))

    def concat(self) -> np.ndarray:
        return np.concatenate([self.phase, self.task, self.action])


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("loss weights must be non-negative")
        if self.alpha == self.beta == self.gamma == 0:
            raise ValueError("loss weights must not all be zero")


# -- forward pass -------------------------------------------------------------


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def lstm_forward(seq: FeatureSequence, params: HeadParams) -> np.ndarray:
    """Run the stacked LSTM; returns the final layer's T x H hidden matrix.

    Standard recurrence with zero initial hidden and cell state; layer l
    consumes layer l-1's hidden sequence.
    """
    if seq.width != params.input_size:
        raise DimensionMismatchError(
            f"sequence width {seq.width} != layer-0 input width {params.input_size}"
        )
    x = seq.values
    for layer in params.layers:
        h_dim = layer.hidden_size
        h = np.zeros(h_dim)
        c = np.zeros(h_dim)
        outputs = np.empty((x.shape[0], h_dim))
        for t in range(x.shape[0]):
            gates = layer.w_x @ x[t] + layer.w_h @ h + layer.b
            i = _sigmoid(gates[:h_dim])
            f = _sigmoid(gates[h_dim:2 * h_dim])
            g = np.tanh(gates[2 * h_dim:3 * h_dim])
            o = _sigmoid(gates[3 * h_dim:])
            c = f * c + i * g
            h = o * np.tanh(c)
            outputs[t] = h
        x = outputs
    return x


def attention_pool(hidden: np.ndarray, attn_w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Softmax-score the T hidden states and return their weighted sum.

    Returns (pooled D-vector, T attention weights summing to 1).
    """
    if hidden.ndim != 2 or attn_w.shape != (hidden.shape[1],):
        raise DimensionMismatchError(
            f"hidden {hidden.shape} incompatible with attention vector {attn_w.shape}"
        )
    scores = hidden @ attn_w
    scores = scores - scores.max()  # shift-invariant, avoids overflow
    weights = np.exp(scores)
    weights /= weights.sum()
    return weights @ hidden, weights


def head_forward(seq: FeatureSequence, params: HeadParams) -> TripletLogits:
    """Full head: LSTM stack, attention pooling, affine + frozen normalization."""
    hidden = lstm_forward(seq, params)
    pooled, _ = attention_pool(hidden, params.attn_w)
    z = params.out_w @ pooled
    y = (z - params.norm_mean) / np.sqrt(params.norm_var + NORM_EPS)
    y = y * params.norm_scale + params.norm_shift
    p, t, a = params.widths
    return TripletLogits(phase=y[:p], task=y[p:p + t], action=y[p + t:])


# -- loss and ensembling -------------------------------------------------------


def _cross_entropy(logits: np.ndarray, target: int) -> float:
    m = logits.max()
    return float(np.log(np.exp(logits - m).sum()) + m - logits[target])


def combined_loss(logits: TripletLogits, target: Triplet,
                  weights: LossWeights = LossWeights()) -> float:
    """alpha*CE(phase) + beta*CE(task) + gamma*CE(action)."""
    return (weights.alpha * _cross_entropy(logits.phase, target.phase.ordinal)
            + weights.beta * _cross_entropy(logits.task, target.task.ordinal)
            + weights.gamma * _cross_entropy(logits.action, target.action.ordinal))


def softmax_triplet(logits: TripletLogits) -> TripletLogits:
    """Per-slice softmax, turning raw scores into probabilities."""
    def soft(x: np.ndarray) -> np.ndarray:
        e = np.exp(x - x.max())
        return e / e.sum()
    return TripletLogits(soft(logits.phase), soft(logits.task), soft(logits.action))


def mean_ensemble(members: Sequence[TripletLogits]) -> TripletLogits:
    """Arithmetic mean of per-class probabilities across ensemble members."""
    if not members:
        raise EmptyEnsembleError("ensemble has no members")
    widths = members[0].widths
    for m in members:
        if m.widths != widths:
            raise DimensionMismatchError("ensemble members have mismatched widths")
        for vec in (m.phase, m.task, m.action):
            if (vec < 0).any() or abs(vec.sum() - 1.0) > 1e-6:
                raise ValueError("ensemble members must hold probability slices")
    n = len(members)
    return TripletLogits(
        phase=sum(m.phase for m in members) / n,
        task=sum(m.task for m in members) / n,
        action=sum(m.action for m in members) / n,
    )


def argmax_ordinals(probs: TripletLogits) -> tuple[int, int, int]:
    """Highest-probability ordinal per level; ties go to the lowest ordinal."""
    return (int(probs.phase.argmax()), int(probs.task.argmax()), int(probs.action.argmax()))


def adaptive_layer_count(sequence_length: int, frames_per_layer: int = 4,
                         max_layers: int = 3) -> int:
    """Depth rule for the adaptive stack: clamp(ceil(T / frames_per_layer), 1, max)."""
    return max(1, min(max_layers, math.ceil(sequence_length / frames_per_layer)))


# -- prediction smoothing --------------------------------------------------------


def smooth_runs(values: Sequence[int], k: int) -> list[int]:
    """Remove sporadic short runs: one left-to-right pass over the run-length
    encoding replaces any interior run of length <= k whose flanking runs agree
    with the flanking value (merging as it goes, so removals can cascade)."""
    if k < 1:
        raise ValueError(f"window radius k must be >= 1, got {k}")
    runs: list[list] = []  # [value, length]
    for v in values:
        if runs and runs[-1][0] == v:
            runs[-1][1] += 1
        else:
            runs.append([v, 1])
            while len(runs) >= 3 and runs[-2][1] <= k and runs[-3][0] == runs[-1][0]:
                last = runs.pop()
                middle = runs.pop()
                runs[-1][1] += middle[1] + last[1]
    out: list[int] = []
    for v, n in runs:
        out.extend([v] * n)
    return out


def correct_predictions(labels: Sequence[Triplet], k: int = 1,
                        registry: TaxonomyRegistry | None = None) -> list[Triplet]:
    """Smooth each taxonomy level independently, then recombine.

    A smoothed (phase, task) pair can violate the hierarchy; the task is then
    repaired to the phase's first registered task. A repair can itself create
    a new short task run, so the task level alternates repair and smoothing
    until stable; that fixpoint makes the whole function idempotent. Repairs
    are counted and logged.
    """
    registry = registry or default_registry()
    if not labels:
        return []
    phases = smooth_runs([t.phase.ordinal for t in labels], k)
    actions = smooth_runs([t.action.ordinal for t in labels], k)
    tasks = smooth_runs([t.task.ordinal for t in labels], k)

    task_phase = [registry.phase_of_task[t].ordinal for t in registry.tasks]
    repair_task = [registry.tasks_of_phase[p][0].ordinal for p in registry.phases]
    repaired = 0
    for _ in range(len(labels) + 1):
        fixed = [repair_task[p] if task_phase[t] != p else t
                 for t, p in zip(tasks, phases)]
        repaired += sum(a != b for a, b in zip(fixed, tasks))
        tasks = smooth_runs(fixed, k)
        if tasks == fixed:
            break
    else:  # pragma: no cover - convergence takes 2 iterations in practice
        raise RuntimeError("prediction correction failed to converge")

    if repaired:
        log.info("prediction smoothing repaired %d hierarchy violations", repaired)
    return [registry.triplet_by_ordinals(p, t, a)
            for p, t, a in zip(phases, tasks, actions)]


# -- parameter files ---------------------------------------------------------------


def _array_items(params: HeadParams) -> list[tuple[str, np.ndarray]]:
    items: list[tuple[str, np.ndarray]] = []
    for i, layer in enumerate(params.layers):
        items += [(f"lstm{i}_wx", layer.w_x), (f"lstm{i}_wh", layer.w_h), (f"lstm{i}_b", layer.b)]
    items += [("attn_w", params.attn_w), ("out_w", params.out_w),
              ("norm_mean", params.norm_mean), ("norm_var", params.norm_var),
              ("norm_scale", params.norm_scale), ("norm_shift", params.norm_shift)]
    return items


def _checksum(items: list[tuple[str, np.ndarray]]) -> str:
    digest = hashlib.sha256()
    for name, arr in sorted(items):
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return digest.hexdigest()


def save_head_params(params: HeadParams, path: str | Path) -> None:
    items = _array_items(params)
    meta = {
        "format": PARAM_FORMAT,
        "layers": len(params.layers),
        "input_size": params.input_size,
        "hidden_size": params.hidden_size,
        "widths": list(params.widths),
        "checksum": _checksum(items),
    }
    arrays = {name: np.asarray(arr, dtype=np.float64) for name, arr in items}
    buf = io.BytesIO()
    np.savez(buf, meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
             **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_head_params(path: str | Path) -> HeadParams:
    try:
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("format") != PARAM_FORMAT:
                raise VersionMismatchError(f"unsupported parameter format: {meta.get('format')!r}")
            layers = tuple(
                LstmLayerParams(data[f"lstm{i}_wx"], data[f"lstm{i}_wh"], data[f"lstm{i}_b"])
                for i in range(int(meta["layers"]))
            )
            params = HeadParams(
                layers=layers,
                attn_w=data["attn_w"],
                out_w=data["out_w"],
                norm_mean=data["norm_mean"],
                norm_var=data["norm_var"],
                norm_scale=data["norm_scale"],
                norm_shift=data["norm_shift"],
                widths=tuple(meta["widths"]),
            )
    except VersionMismatchError:
        raise
    except (OSError, KeyError, ValueError, zipfile.BadZipFile, json.JSONDecodeError) as e:
        raise VersionMismatchError(f"corrupt parameter file {path}: {e}") from e
    if _checksum(_array_items(params)) != meta["checksum"]:
        raise VersionMismatchError(f"parameter file {path} failed its checksum")
    return params


def random_head_params(input_size: int, hidden_size: int, n_layers: int,
                       seed: int = 0, widths: tuple[int, int, int] = (5, 12, 21),
                       ) -> HeadParams:
    """Small-scale Gaussian parameters for tests and demos."""
    rng = np.random.default_rng(seed)
    layers = []
    d_in = input_size
    for _ in range(n_layers):
        layers.append(LstmLayerParams(
            w_x=rng.normal(0, 0.4, (4 * hidden_size, d_in)),
            w_h=rng.normal(0, 0.4, (4 * hidden_size, hidden_size)),
            b=rng.normal(0, 0.1, 4 * hidden_size),
        ))
        d_in = hidden_size
    n_out = sum(widths)
    return HeadParams(
        layers=tuple(layers),
        attn_w=rng.normal(0, 1.0, hidden_size),
        out_w=rng.normal(0, 0.5, (n_out, hidden_size)),
        norm_mean=rng.normal(0, 0.1, n_out),
        norm_var=rng.uniform(0.5, 1.5, n_out),
        norm_scale=rng.uniform(0.8, 1.2, n_out),
        norm_shift=rng.normal(0, 0.1, n_out),
        widths=widths,
    )
