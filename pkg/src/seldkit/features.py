"""Feature extraction: amplitude spectrograms and inter-channel phase differences.

The network input for a 4-channel clip is a (7, T, F) stack: amplitude
spectrograms of the four channels followed by the phase differences of
channels 1..3 relative to channel 0.  Phase differences are wrapped into
[0, 2pi) so that the SpecAugment replacement distribution matches the
feature range.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .scene import AmbisonicClip

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class StftConfig:
    """STFT framing; defaults are 20 ms windows with 10 ms hop at 24 kHz."""

    win_len: int = 480
    hop: int = 240
    fft_size: int = 512
    window: str = "hann"

    def __post_init__(self):
        if not (0 < self.hop <= self.win_len <= self.fft_size):
            raise ValueError("require 0 < hop <= win_len <= fft_size")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.win_len:
            raise ValueError(f"clip of {n_samples} samples shorter than one window ({self.win_len})")
        return 1 + (n_samples - self.win_len) // self.hop

    def frame_span(self, n_frames: int) -> int:
        """Samples covered by `n_frames` consecutive frames."""
        return self.win_len + (n_frames - 1) * self.hop


@dataclass
class FeatureStack:
    """(7, T, F) array: channels 0-3 amplitudes of [W,Y,Z,X], 4-6 phase diffs."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3 or self.data.shape[0] != 7:
            raise ValueError(f"expected (7, T, F), got {self.data.shape}")

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    @property
    def n_bins(self) -> int:
        return self.data.shape[2]


def stft(clip: AmbisonicClip, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Complex STFT of all channels, shape (4, T, F).

    T = 1 + floor((L - win_len) / hop); frame t covers samples
    [t*hop, t*hop + win_len).  The window is zero-padded to fft_size.
    """
    x = clip.samples
    n_frames = cfg.n_frames(x.shape[1])
    win = get_window(cfg.window, cfg.win_len, fftbins=True)
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.win_len, axis=1)[:, :: cfg.hop][:, :n_frames]
    return np.fft.rfft(frames * win, n=cfg.fft_size, axis=-1)


def make_feature_stack(spec: np.ndarray) -> FeatureStack:
    """Build the (7, T, F) feature stack from a 4-channel complex STFT.

    Phase differences are angle(channel q) - angle(channel 0), wrapped to
    [0, 2pi); bins where the reference channel has zero magnitude get 0.
    """
    spec = np.asarray(spec)
    if spec.ndim != 3 or spec.shape[0] != 4:
        raise ValueError(f"expected (4, T, F) STFT, got {spec.shape}")
    amp = np.abs(spec)
    phase = np.angle(spec)
    ipd = np.mod(phase[1:] - phase[0], _TWO_PI)
    ipd[:, amp[0] == 0] = 0.0
    return FeatureStack(np.concatenate([amp, ipd], axis=0))


def extract_features(clip: AmbisonicClip, cfg: StftConfig = StftConfig()) -> FeatureStack:
    """stft + make_feature_stack in one call."""
    return make_feature_stack(stft(clip, cfg))


def dump_features(path, fs: FeatureStack) -> None:
    """Write a flat binary dump: three little-endian int64 dims, then float32 data."""
    data = np.ascontiguousarray(fs.data, dtype="<f4")
    with open(path, "wb") as f:
        f.write(struct.pack("<3q", *data.shape))
        f.write(data.tobytes())


def load_features(path) -> FeatureStack:
    with open(path, "rb") as f:
        dims = struct.unpack("<3q", f.read(24))
        data = np.frombuffer(f.read(), dtype="<f4").reshape(dims)
    return FeatureStack(data.astype(np.float64))
