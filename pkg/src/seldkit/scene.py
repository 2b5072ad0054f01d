"""Synthetic first-order-Ambisonic scene generation.

Renders FOA mixtures of band-limited noise events with analytically known
classes and directions of arrival.  The synthetic scenes stand in for real
recordings so that every downstream stage (features, training, inference,
metrics) can be exercised against exact ground truth.

Conventions: x = front, y = left, z = up; elevation measured from the
horizontal plane.  Channels follow ACN order [W, Y, Z, X] with SN3D
normalization (W gain 1), so the reflection rotations used for augmentation
act on the channels as pure sign flips.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile

SAMPLE_RATE = 24000
LABEL_FRAMES_PER_SECOND = 10          # 100 ms label frames
LABEL_FRAME_SAMPLES = SAMPLE_RATE // LABEL_FRAMES_PER_SECOND

_TWO_PI = 2.0 * math.pi


def wrap_azimuth(phi: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return float((phi + math.pi) % _TWO_PI - math.pi)


class DoaAngles:
    """Direction of arrival as (azimuth, elevation) in radians.

    Azimuth is wrapped into [-pi, pi) on construction; elevation must lie
    in [-pi/2, pi/2].  The equivalent Cartesian unit vector is computed
    once and cached.  Rotated copies produced by `augment.rotate_angles`
    carry the sign-flipped vector of the source, which keeps the whole
    rotation algebra exact in floating point.
    """

    __slots__ = ("azimuth", "elevation", "_vec")

    def __init__(self, azimuth: float, elevation: float):
        elevation = float(elevation)
        if not (-math.pi / 2 - 1e-12 <= elevation <= math.pi / 2 + 1e-12):
            raise ValueError(f"elevation {elevation} outside [-pi/2, pi/2]")
        object.__setattr__(self, "azimuth", wrap_azimuth(float(azimuth)))
        object.__setattr__(self, "elevation", min(max(elevation, -math.pi / 2), math.pi / 2))
        object.__setattr__(self, "_vec", None)

    def __setattr__(self, name, value):
        raise AttributeError("DoaAngles is immutable")

    @property
    def unit_vec(self) -> np.ndarray:
        """Cartesian unit vector (x, y, z); read-only array."""
        if self._vec is None:
            ce = math.cos(self.elevation)
            v = np.array(
                [
                    math.cos(self.azimuth) * ce,
                    math.sin(self.azimuth) * ce,
                    math.sin(self.elevation),
                ]
            )
            v.flags.writeable = False
            object.__setattr__(self, "_vec", v)
        return self._vec

    @classmethod
    def from_unit_vec(cls, vec: np.ndarray) -> "DoaAngles":
        """Angles of a unit vector; the vector itself is cached verbatim."""
        vec = np.asarray(vec, dtype=float)
        z = min(max(float(vec[2]), -1.0), 1.0)
        d = cls(math.atan2(vec[1], vec[0]), math.asin(z))
        cached = vec.copy()
        cached.flags.writeable = False
        object.__setattr__(d, "_vec", cached)
        return d

    @classmethod
    def _with_vec(cls, azimuth: float, elevation: float, vec: np.ndarray) -> "DoaAngles":
        d = cls(azimuth, elevation)
        vec = np.asarray(vec, dtype=float).copy()
        vec.flags.writeable = False
        object.__setattr__(d, "_vec", vec)
        return d

    def __repr__(self):
        return f"DoaAngles(az={math.degrees(self.azimuth):.1f}deg, el={math.degrees(self.elevation):.1f}deg)"

    def __eq__(self, other):
        if not isinstance(other, DoaAngles):
            return NotImplemented
        return self.azimuth == other.azimuth and self.elevation == other.elevation

    def __hash__(self):
        return hash((self.azimuth, self.elevation))


def doa_to_unit_vec(d: DoaAngles) -> np.ndarray:
    """Cartesian unit vector (cos az cos el, sin az cos el, sin el)."""
    return d.unit_vec


@dataclass
class AmbisonicClip:
    """4-channel FOA waveform, ACN order [W, Y, Z, X], SN3D gains."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[0] != 4:
            raise ValueError(f"expected (4, L) samples, got {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("non-finite samples")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate

    def copy(self) -> "AmbisonicClip":
        return AmbisonicClip(self.samples.copy(), self.sample_rate)


@dataclass
class Event:
    """One sound event: class, active label-frame span, per-frame DOA."""

    class_id: int
    onset: int      # label-frame index, inclusive
    offset: int     # label-frame index, exclusive
    trajectory: list

    def __post_init__(self):
        if self.onset < 0 or self.onset >= self.offset:
            raise ValueError(f"bad event span [{self.onset}, {self.offset})")
        if len(self.trajectory) != self.offset - self.onset:
            raise ValueError("trajectory length must equal offset - onset")
        if self.class_id < 0:
            raise ValueError("class_id must be non-negative")

    @property
    def n_frames(self) -> int:
        return self.offset - self.onset


@dataclass
class EventList:
    """Ground-truth or predicted events on a shared label-frame timeline."""

    events: list
    n_frames: int

    def __post_init__(self):
        for ev in self.events:
            if ev.offset > self.n_frames:
                raise ValueError(f"event [{ev.onset}, {ev.offset}) exceeds timeline {self.n_frames}")

    def activity(self, n_classes: int) -> np.ndarray:
        """Boolean (n_frames, n_classes) activity map."""
        act = np.zeros((self.n_frames, n_classes), dtype=bool)
        for ev in self.events:
            if ev.class_id >= n_classes:
                raise ValueError(f"class_id {ev.class_id} >= n_classes {n_classes}")
            act[ev.onset:ev.offset, ev.class_id] = True
        return act

    def polyphony(self) -> np.ndarray:
        """Number of simultaneously active events per label frame."""
        count = np.zeros(self.n_frames, dtype=int)
        for ev in self.events:
            count[ev.onset:ev.offset] += 1
        return count


@dataclass(frozen=True)
class SceneConfig:
    """Parameters for one synthetic scene."""

    n_classes: int = 14
    duration_s: float = 10.0
    max_polyphony: int = 2
    n_events: int = 3
    rng_seed: int = 0
    sample_rate: int = SAMPLE_RATE
    min_event_frames: int = 5      # label frames (100 ms each)
    max_event_frames: int = 15
    gain_range: tuple = (0.5, 1.0)
    elevation_range: tuple = (-math.pi / 4, math.pi / 4)

    def __post_init__(self):
        if self.n_classes < 1:
            raise ValueError("n_classes must be >= 1")
        if self.max_polyphony < 1:
            raise ValueError("max_polyphony must be >= 1")
        n = self.duration_s * LABEL_FRAMES_PER_SECOND
        if abs(n - round(n)) > 1e-9:
            raise ValueError("duration_s must be a multiple of 0.1 s")

    @property
    def n_label_frames(self) -> int:
        return int(round(self.duration_s * LABEL_FRAMES_PER_SECOND))


def encode_plane_wave(signal: np.ndarray, d: DoaAngles) -> AmbisonicClip:
    """Encode a mono signal as an SN3D plane wave from direction `d`.

    Channel gains: W = 1, Y = sin(az) cos(el), Z = sin(el), X = cos(az) cos(el).
    """
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 1:
        raise ValueError("signal must be 1-D")
    x, y, z = d.unit_vec
    chans = np.empty((4, signal.shape[0]))
    chans[0] = signal
    chans[1] = signal * y
    chans[2] = signal * z
    chans[3] = signal * x
    return AmbisonicClip(chans)


def class_center_frequencies(n_classes: int) -> np.ndarray:
    """Per-class passband centers, log-spaced over [300, 9000] Hz."""
    if n_classes == 1:
        return np.array([math.sqrt(300.0 * 9000.0)])
    return np.logspace(math.log10(300.0), math.log10(9000.0), n_classes)


def class_signature(
    class_id: int,
    duration_s: float,
    rng: np.random.Generator,
    n_classes: int = 14,
    sample_rate: int = SAMPLE_RATE,
) -> np.ndarray:
    """Deterministic class-specific mono signal.

    Band-limited noise (1/3-octave passband around the class center
    frequency) with a class-specific amplitude-modulation rate of
    0.5 + class_id * 0.35 Hz.  Peak-normalized to 1.
    """
    if not 0 <= class_id < n_classes:
        raise ValueError(f"class_id {class_id} outside [0, {n_classes})")
    n = int(round(duration_s * sample_rate))
    fc = class_center_frequencies(n_classes)[class_id]
    lo = fc * 2.0 ** (-1.0 / 6.0)
    hi = min(fc * 2.0 ** (1.0 / 6.0), 0.499 * sample_rate)
    noise = rng.standard_normal(n)
    sos = sps.butter(4, [lo, hi], btype="bandpass", fs=sample_rate, output="sos")
    band = sps.sosfiltfilt(sos, noise)
    am_rate = 0.5 + class_id * 0.35
    phase = rng.uniform(0.0, _TWO_PI)
    t = np.arange(n) / sample_rate
    env = 0.6 + 0.4 * np.sin(_TWO_PI * am_rate * t + phase)
    out = band * env
    peak = np.max(np.abs(out))
    if peak > 0:
        out = out / peak
    return out


def _fade_edges(signal: np.ndarray, sample_rate: int, fade_ms: float = 10.0) -> np.ndarray:
    n = min(int(fade_ms * 1e-3 * sample_rate), signal.shape[0] // 2)
    if n == 0:
        return signal
    ramp = np.linspace(0.0, 1.0, n)
    signal = signal.copy()
    signal[:n] *= ramp
    signal[-n:] *= ramp[::-1]
    return signal


def render_events(placed, n_label_frames: int, sample_rate: int = SAMPLE_RATE) -> AmbisonicClip:
    """Sum plane-wave encodings of (Event, mono signal) pairs, no normalization."""
    total = n_label_frames * LABEL_FRAME_SAMPLES
    mix = np.zeros((4, total))
    for ev, sig in placed:
        start = ev.onset * LABEL_FRAME_SAMPLES
        stop = ev.offset * LABEL_FRAME_SAMPLES
        if len(sig) != stop - start:
            raise ValueError("event signal length must match its frame span")
        # static-per-frame trajectories: all frames share one DOA in this generator
        clip = encode_plane_wave(sig, ev.trajectory[0])
        mix[:, start:stop] += clip.samples
    return AmbisonicClip(mix, sample_rate)


def synth_scene(cfg: SceneConfig, rng: np.random.Generator | None = None):
    """Synthesize one scene; returns (AmbisonicClip, EventList).

    Events get random classes, onsets, and static DOAs (azimuth uniform,
    elevation uniform over cfg.elevation_range).  At most
    `cfg.max_polyphony` events are simultaneously active and a class never
    overlaps itself.  The mixture is peak-normalized to 0.5.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    n_frames = cfg.n_label_frames
    poly = np.zeros(n_frames, dtype=int)
    class_busy = np.zeros((n_frames, cfg.n_classes), dtype=bool)
    placed = []
    for _ in range(cfg.n_events):
        for _attempt in range(20):
            class_id = int(rng.integers(cfg.n_classes))
            dur = int(rng.integers(cfg.min_event_frames, cfg.max_event_frames + 1))
            dur = min(dur, n_frames)
            onset = int(rng.integers(0, n_frames - dur + 1))
            span = slice(onset, onset + dur)
            if np.any(poly[span] >= cfg.max_polyphony) or np.any(class_busy[span, class_id]):
                continue
            az = rng.uniform(-math.pi, math.pi)
            el = rng.uniform(*cfg.elevation_range)
            d = DoaAngles(az, el)
            gain = rng.uniform(*cfg.gain_range)
            sig = class_signature(class_id, dur * 0.1, rng, cfg.n_classes, cfg.sample_rate)
            sig = _fade_edges(sig * gain, cfg.sample_rate)
            ev = Event(class_id, onset, onset + dur, [d] * dur)
            placed.append((ev, sig))
            poly[span] += 1
            class_busy[span, class_id] = True
            break
    clip = render_events(placed, n_frames, cfg.sample_rate)
    peak = np.max(np.abs(clip.samples))
    if peak > 0:
        clip.samples *= 0.5 / peak
    events = EventList([ev for ev, _ in placed], n_frames)
    return clip, events


# ---------------------------------------------------------------------------
# File formats: 4-channel float WAV and DCASE-style label CSV
# ---------------------------------------------------------------------------

def write_wav(path, clip: AmbisonicClip) -> None:
    """Write a 32-bit float WAV, channels as columns."""
    wavfile.write(str(path), clip.sample_rate, clip.samples.T.astype(np.float32))


def read_wav(path) -> AmbisonicClip:
    rate, data = wavfile.read(str(path))
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValueError(f"{path}: expected 4-channel WAV")
    return AmbisonicClip(data.T.astype(float), rate)


def write_label_csv(path, events: EventList) -> None:
    """Write `label_frame,class_id,track_id,azimuth_deg,elevation_deg` rows.

    Azimuth is rounded to integer degrees in [-180, 179], elevation to
    [-90, 90].  Track ids count events within each class.
    """
    rows = []
    track_counter: dict = {}
    for ev in events.events:
        track = track_counter.get(ev.class_id, 0)
        track_counter[ev.class_id] = track + 1
        for i, frame in enumerate(range(ev.onset, ev.offset)):
            d = ev.trajectory[i]
            az = int(round(math.degrees(d.azimuth)))
            if az >= 180:
                az -= 360
            el = int(round(math.degrees(d.elevation)))
            el = min(max(el, -90), 90)
            rows.append((frame, ev.class_id, track, az, el))
    rows.sort()
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerows(rows)


def read_label_csv(path, n_frames: int | None = None) -> EventList:
    """Read the label CSV back into an EventList.

    Rows of one (class, track) pair are grouped; contiguous label frames
    form one event.  `n_frames` defaults to the highest frame + 1.
    """
    per_track: dict = {}
    max_frame = -1
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row:
                continue
            try:
                frame = int(row[0])
            except ValueError:
                continue  # tolerate a header line
            class_id, track = int(row[1]), int(row[2])
            az, el = math.radians(float(row[3])), math.radians(float(row[4]))
            per_track.setdefault((class_id, track), []).append((frame, DoaAngles(az, el)))
            max_frame = max(max_frame, frame)
    if n_frames is None:
        n_frames = max_frame + 1
    events = []
    for (class_id, _track), entries in sorted(per_track.items()):
        entries.sort(key=lambda e: e[0])
        run_start = 0
        for i in range(1, len(entries) + 1):
            if i == len(entries) or entries[i][0] != entries[i - 1][0] + 1:
                chunk = entries[run_start:i]
                events.append(
                    Event(class_id, chunk[0][0], chunk[-1][0] + 1, [d for _, d in chunk])
                )
                run_start = i
    events.sort(key=lambda e: (e.onset, e.class_id))
    return EventList(events, n_frames)
