"""Pipeline configuration: an INI file plus command-line flag overrides
(flags win). Relative paths in a config file resolve against the file's
directory so demo configs stay portable.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path

SECTION = "esv-forge"


@dataclass(frozen=True)
class PipelineConfig:
    videos_root: Path
    out_root: Path
    params_file: Path | None = None
    ui_dir: Path | None = None
    fps: float = 2.0
    keyframe_threshold: float = 0.05
    signature_size: int = 32
    crop_frames: bool = True
    smoothing_k: int = 1
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    bitrate_bps: int = 1_000_000
    hidden_size: int = 32
    frames_per_layer: int = 4
    max_layers: int = 3
    seed: int = 0
    bind: str = "127.0.0.1:8775"
    index_source: str = "annotation"

    def validate(self) -> None:
        if not (0.0 < self.keyframe_threshold < 1.0):
            raise ValueError(f"keyframe_threshold must be in (0, 1): {self.keyframe_threshold}")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive: {self.fps}")
        if self.signature_size < 2 or self.hidden_size < 1:
            raise ValueError("signature_size and hidden_size must be sensible positives")
        if self.smoothing_k < 1:
            raise ValueError(f"smoothing_k must be >= 1: {self.smoothing_k}")
        if min(self.alpha, self.beta, self.gamma) < 0 or self.alpha == self.beta == self.gamma == 0:
            raise ValueError("loss weights must be non-negative and not all zero")
        if self.bitrate_bps <= 0 or self.frames_per_layer < 1 or self.max_layers < 1:
            raise ValueError("bitrate_bps, frames_per_layer, max_layers must be positive")
        if self.index_source not in ("annotation", "prediction"):
            raise ValueError(f"index_source must be annotation|prediction: {self.index_source}")

    # -- INI round trip -------------------------------------------------------

    def to_ini(self, path: str | Path) -> None:
        parser = configparser.ConfigParser()
        parser[SECTION] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            parser[SECTION][f.name] = str(value)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            parser.write(fh)

    @classmethod
    def from_ini(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        parser = configparser.ConfigParser()
        read = parser.read(path, encoding="utf-8")
        if not read or SECTION not in parser:
            raise ValueError(f"config {path} missing [{SECTION}] section")
        section = parser[SECTION]
        known = {f.name: f for f in fields(cls)}
        unknown = set(section) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "videos_root" not in section or "out_root" not in section:
            raise ValueError("config must set videos_root and out_root")

        base = path.resolve().parent

        def as_path(raw: str) -> Path:
            p = Path(raw)
            return p if p.is_absolute() else (base / p).resolve()

        kwargs = {}
        for name, value in section.items():
            f = known[name]
            if f.type in ("Path", "Path | None"):
                kwargs[name] = as_path(value)
            elif f.type == "float":
                kwargs[name] = float(value)
            elif f.type == "int":
                kwargs[name] = int(value)
            elif f.type == "bool":
                kwargs[name] = value.strip().lower() in ("1", "true", "yes", "on")
            else:
                kwargs[name] = value
        return cls(**kwargs)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        """Apply non-None flag values on top of the file values."""
        updates = {k: v for k, v in overrides.items() if v is not None}
        for key in ("videos_root", "out_root", "params_file", "ui_dir"):
            if key in updates:
                updates[key] = Path(updates[key]).resolve()
        return replace(self, **updates)
