"""Synthesize a spatial audio scene and verify its geometry from the waveform.

A scene is a 4-channel first-order-Ambisonic mixture of band-limited noise
events, each with a known class, time span, and direction.  Because the
encoding is a plane wave, the acoustic intensity vector computed straight
from the time-domain channels points back at each source.
"""

import math

import numpy as np

from seldkit.scene import (
    SceneConfig, class_signature, synth_scene, write_label_csv, write_wav,
)

# --- one scene, three classes, up to two simultaneous events ---------------
cfg = SceneConfig(n_classes=3, duration_s=4.0, max_polyphony=2, n_events=3, rng_seed=7)
clip, events = synth_scene(cfg)

print(f"rendered {clip.duration_s:.1f} s of FOA audio, peak {np.abs(clip.samples).max():.2f}")
print(f"{len(events.events)} events on a {events.n_frames}-frame label grid (100 ms frames):")
for ev in events.events:
    d = ev.trajectory[0]
    print(
        f"  class {ev.class_id}: frames [{ev.onset:2d}, {ev.offset:2d})  "
        f"az {math.degrees(d.azimuth):7.1f} deg  el {math.degrees(d.elevation):6.1f} deg"
    )

# --- the class signatures are spectrally distinct ---------------------------
rng = np.random.default_rng(0)
for class_id in range(3):
    sig = class_signature(class_id, 1.0, rng, n_classes=3)
    spec = np.abs(np.fft.rfft(sig)) ** 2
    freqs = np.fft.rfftfreq(len(sig), 1 / 24000)
    centroid = (freqs * spec).sum() / spec.sum()
    print(f"class {class_id}: spectral centroid {centroid:7.1f} Hz")

# --- recover each event's direction with the time-domain intensity vector ---
# only frames where one event is active give a clean broadband estimate
print("\nintensity-vector check (W*X, W*Y, W*Z averaged over solo frames):")
poly = events.polyphony()
for ev in events.events:
    solo = [f for f in range(ev.onset, ev.offset) if poly[f] == 1]
    if not solo:
        print(f"  class {ev.class_id}: always overlapped, skipping")
        continue
    chunks = np.concatenate([clip.samples[:, f * 2400:(f + 1) * 2400] for f in solo], axis=1)
    w, y, z, x = chunks
    vec = np.array([(w * x).mean(), (w * y).mean(), (w * z).mean()])
    vec /= np.linalg.norm(vec)
    err = math.degrees(math.acos(np.clip(vec @ ev.trajectory[0].unit_vec, -1, 1)))
    print(f"  class {ev.class_id}: direction error {err:.3f} deg over {len(solo)} frames")

# --- write the standard artifacts -------------------------------------------
write_wav("/tmp/demo_scene.wav", clip)
write_label_csv("/tmp/demo_scene.csv", events)
print("\nwrote /tmp/demo_scene.wav and /tmp/demo_scene.csv")
