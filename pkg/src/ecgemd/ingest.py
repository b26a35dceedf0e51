"""Loading ECG records and cohort manifests, and synthesizing test signals."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

COHORTS = ("disease", "normal", "unknown")
GENDERS = ("male", "female")


class RecordFormatError(ValueError):
    """A record file could not be parsed."""


class ManifestError(ValueError):
    """A manifest failed validation."""


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    sampling_hz: float

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("a time series needs at least 2 samples")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if not (self.sampling_hz > 0 and math.isfinite(self.sampling_hz)):
            raise ValueError(f"sampling_hz must be positive, got {self.sampling_hz}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sampling_hz", float(self.sampling_hz))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sampling_hz


@dataclass(frozen=True)
class RecordMeta:
    record_id: str
    cohort: str = "unknown"
    age: Optional[int] = None
    gender: Optional[str] = None
    lead: str = ""

    def __post_init__(self):
        if not self.record_id:
            raise ValueError("record_id must be non-empty")
        if self.cohort not in COHORTS:
            raise ValueError(f"cohort must be one of {COHORTS}, got {self.cohort!r}")
        if self.age is not None and not (0 <= self.age <= 130):
            raise ValueError(f"age out of range: {self.age}")
        if self.gender is not None and self.gender not in GENDERS:
            raise ValueError(f"gender must be one of {GENDERS}, got {self.gender!r}")


@dataclass(frozen=True)
class ManifestEntry:
    meta: RecordMeta
    path: Path
    sampling_hz: float


@dataclass(frozen=True)
class CohortManifest:
    entries: tuple = ()
    description: str = ""

    def __len__(self):
        return len(self.entries)


def load_record(path, sampling_hz: float) -> TimeSeries:
    """Read a one- or two-column (``time,value``) record file.

    The time column, when present, is only checked for strict monotonicity.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"record file not found: {path}")
    values = []
    last_time = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                if len(parts) == 1:
                    values.append(float(parts[0]))
                elif len(parts) == 2:
                    t = float(parts[0])
                    if last_time is not None and t <= last_time:
                        raise RecordFormatError(
                            f"{path}:{lineno}: time column is not increasing")
                    last_time = t
                    values.append(float(parts[1]))
                else:
                    raise RecordFormatError(
                        f"{path}:{lineno}: expected 1 or 2 columns, got {len(parts)}")
            except ValueError as exc:
                if isinstance(exc, RecordFormatError):
                    raise
                raise RecordFormatError(
                    f"{path}:{lineno}: non-numeric value {line!r}") from None
    if len(values) < 2:
        raise RecordFormatError(f"{path}: fewer than 2 samples")
    try:
        return TimeSeries(np.array(values), sampling_hz)
    except ValueError as exc:
        raise RecordFormatError(f"{path}: {exc}") from None


def write_record(path, signal: TimeSeries, with_time: bool = False) -> None:
    """Write samples one per line with 12 significant digits."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if with_time:
            dt = 1.0 / signal.sampling_hz
            for k, v in enumerate(signal.samples):
                fh.write(f"{k * dt:.12g},{v:.12g}\n")
        else:
            for v in signal.samples:
                fh.write(f"{v:.12g}\n")


def _entry_from_json(item: Mapping, base: Path, position: int) -> ManifestEntry:
    label = item.get("id", f"#{position}") if isinstance(item, Mapping) else f"#{position}"
    if not isinstance(item, Mapping):
        raise ManifestError(f"record {label}: entry must be an object")
    required = ("id", "path", "cohort", "sampling_hz")
    missing = [k for k in required if k not in item]
    if missing:
        raise ManifestError(f"record {label}: missing keys {missing}")
    rid = item["id"]
    if not isinstance(rid, str) or not rid:
        raise ManifestError(f"record {label}: id must be a non-empty string")
    fs = item["sampling_hz"]
    if isinstance(fs, bool) or not isinstance(fs, (int, float)) or not fs > 0:
        raise ManifestError(f"record {rid}: sampling_hz must be a positive number")
    age = item.get("age")
    if age is not None:
        if isinstance(age, bool) or not isinstance(age, (int, float)) or age != int(age):
            raise ManifestError(f"record {rid}: age must be an integer or null")
        age = int(age)
    path = Path(item["path"])
    if not path.is_absolute():
        path = base / path
    if not path.is_file():
        raise ManifestError(f"record {rid}: file not found: {path}")
    try:
        meta = RecordMeta(rid, item["cohort"], age, item.get("gender"), item.get("lead", ""))
    except ValueError as exc:
        raise ManifestError(f"record {rid}: {exc}") from None
    return ManifestEntry(meta, path, float(fs))


def load_manifest(path) -> CohortManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("records"), list):
        raise ManifestError(f"{path}: expected an object with a 'records' list")
    description = doc.get("description", "")
    if not isinstance(description, str):
        raise ManifestError(f"{path}: description must be a string")
    base = path.resolve().parent
    entries = []
    seen = set()
    for i, item in enumerate(doc["records"]):
        entry = _entry_from_json(item, base, i)
        if entry.meta.record_id in seen:
            raise ManifestError(f"duplicate record id {entry.meta.record_id!r}")
        seen.add(entry.meta.record_id)
        entries.append(entry)
    return CohortManifest(tuple(entries), description)


# SplitMix64 constants
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def counter_uniforms(seed: int, count: int) -> np.ndarray:
    """Uniform doubles in (0, 1) from a counter-mode SplitMix64 stream.

    Word ``i`` is ``mix(seed + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)``;
    its top 53 bits give ``(w + 0.5) / 2**53``.
    """
    s = np.uint64(seed % (1 << 64))
    with np.errstate(over="ignore"):
        z = s + (np.arange(1, count + 1, dtype=np.uint64) * _GAMMA)
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def gaussian_noise(seed: int, count: int) -> np.ndarray:
    """Standard normal deviates by Box-Muller over :func:`counter_uniforms`."""
    pairs = (count + 1) // 2
    u = counter_uniforms(seed, 2 * pairs)
    r = np.sqrt(-2.0 * np.log(u[0::2]))
    theta = 2.0 * np.pi * u[1::2]
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:count]


_SYNTH_KEYS = {
    "sine": ("freq", "amp"),
    "two_tone": ("f1", "a1", "f2", "a2"),
    "gauss_noise": ("sigma",),
    "ramp": ("slope",),
}


def synth_signal(kind: str, params: Mapping[str, float], length: int,
                 sampling_hz: float, seed: int = 0) -> TimeSeries:
    """Generate a deterministic synthetic signal.

    Every kind accepts an optional ``offset`` added to all samples.
    """
    if kind not in _SYNTH_KEYS:
        raise ValueError(f"unknown signal kind {kind!r}; choose from {sorted(_SYNTH_KEYS)}")
    missing = [k for k in _SYNTH_KEYS[kind] if k not in params]
    if missing:
        raise ValueError(f"{kind} requires parameters {missing}")
    if length < 2:
        raise ValueError("length must be at least 2")
    for key in ("freq", "f1", "f2", "sigma"):
        if key in _SYNTH_KEYS[kind] and not params[key] > 0:
            raise ValueError(f"{key} must be positive")
    t = np.arange(length) / float(sampling_hz)
    p = params
    if kind == "sine":
        x = p["amp"] * np.sin(2 * np.pi * p["freq"] * t)
    elif kind == "two_tone":
        x = (p["a1"] * np.sin(2 * np.pi * p["f1"] * t)
             + p["a2"] * np.sin(2 * np.pi * p["f2"] * t))
    elif kind == "gauss_noise":
        x = p["sigma"] * gaussian_noise(seed, length)
    else:
        x = p["slope"] * t
    return TimeSeries(x + p.get("offset", 0.0), sampling_hz)
