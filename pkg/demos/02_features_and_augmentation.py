"""The network input features and the three training augmentations.

Features are four amplitude spectrograms plus three phase-difference maps
against channel 0.  Augmentations: event mixing with random gain/delay/EQ,
the eight FOA reflection rotations (exact sign flips on channels and label
vectors), and multichannel SpecAugment masking.
"""

import numpy as np

from seldkit.augment import (
    ALL_PATTERNS, SpecAugmentConfig, emda_mix, rotate_angles, rotate_events,
    rotate_foa, spec_augment,
)
from seldkit.features import StftConfig, extract_features
from seldkit.scene import SceneConfig, encode_plane_wave, synth_scene

rng = np.random.default_rng(3)
cfg = SceneConfig(n_classes=3, duration_s=3.0, n_events=2, rng_seed=1)
clip, events = synth_scene(cfg)

# --- feature stack -----------------------------------------------------------
stft_cfg = StftConfig()  # 20 ms window, 10 ms hop, 512-point FFT
fs = extract_features(clip, stft_cfg)
print(f"feature stack {fs.data.shape}: 4 amplitudes + 3 phase differences")
print(f"  amplitude range [{fs.data[:4].min():.3f}, {fs.data[:4].max():.3f}]")
print(f"  phase-diff range [{fs.data[4:].min():.3f}, {fs.data[4:].max():.3f}) in [0, 2pi)")

# --- rotation: channel sign flips == re-encoding at rotated angles -----------
d = events.events[0].trajectory[0]
sig = rng.standard_normal(1000)
for r in ALL_PATTERNS[:4]:
    a = rotate_foa(encode_plane_wave(sig, d), r).samples
    b = encode_plane_wave(sig, rotate_angles(d, r)).samples
    exact = np.array_equal(a, b)
    print(f"pattern az_sign={r.azimuth_sign:+d} add_pi={int(r.add_pi)} "
          f"el_sign={r.elevation_sign:+d}: bit-exact equivariance = {exact}")

rotated_events = rotate_events(events, ALL_PATTERNS[5])

# --- EMDA: mix a second single-event scene in ---------------------------------
secondary = synth_scene(SceneConfig(n_classes=3, duration_s=3.0, n_events=1,
                                    max_polyphony=1, rng_seed=11))
mixed_clip, mixed_events = emda_mix((clip, events), [secondary], rng)
print(f"\nEMDA: {len(events.events)} + {len(secondary[1].events)} events "
      f"-> {len(mixed_events.events)} after the one-instance-per-class rule")

# --- SpecAugment: time, frequency and channel masks ---------------------------
sa_cfg = SpecAugmentConfig(n_time_masks=2, n_freq_masks=2, n_chan_masks=1,
                           max_time_width=40, max_freq_width=24)
masked = spec_augment(fs, sa_cfg, rng)
changed = (masked.data != fs.data).mean()
print(f"SpecAugment changed {100 * changed:.1f}% of feature cells")
zeroed_amp = [c for c in range(4) if np.all(masked.data[c] == 0)]
if zeroed_amp:
    c0 = zeroed_amp[0]
    print(f"channel mask hit microphone channel {c0}", end="")
    if c0 > 0:
        print(f"; phase channel {4 + c0 - 1} now uniform noise in [0, 2pi)")
    else:
        print(" (the phase reference: no phase map is touched)")
