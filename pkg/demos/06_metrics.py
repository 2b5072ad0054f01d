"""The four joint localization/detection scores, worked by hand.

Per (frame, class) cell, predictions and references are matched by minimum
total angular distance.  Matched distances feed the localization error and
recall; a 20-degree gate decides location-aware true positives for the
error rate and F-score.
"""

import math

from seldkit.metrics import evaluate, match_frame_class
from seldkit.scene import DoaAngles, Event, EventList


def one_frame(az_deg, class_id=0):
    d = DoaAngles(math.radians(az_deg), 0.0)
    return Event(class_id, 0, 1, [d])


ref = EventList([one_frame(0.0)], 1)

# --- prediction 10 degrees off: inside the gate --------------------------------
m = evaluate(EventList([one_frame(10.0)], 1), ref, n_classes=1)
print("pred at 10 deg vs ref at 0 deg:")
print(f"  LE {m.le_cd:.1f} deg, LR {m.lr_cd:.0f}%, ER {m.er_20:.2f}, F {m.f_20:.0f}%")

# --- prediction 30 degrees off: matched but outside the gate -------------------
m = evaluate(EventList([one_frame(30.0)], 1), ref, n_classes=1)
print("pred at 30 deg vs ref at 0 deg:")
print(f"  LE {m.le_cd:.1f} deg (localization error still counts the match)")
print(f"  LR {m.lr_cd:.0f}% (it was matched), but ER {m.er_20:.1f} and F {m.f_20:.0f}%:")
print(f"  counts {m.counts}")

# --- matching picks the assignment with the least total distance ---------------
preds = [DoaAngles(math.radians(a), 0.0).unit_vec for a in (0.0, 90.0)]
refs = [DoaAngles(math.radians(a), 0.0).unit_vec for a in (85.0, 5.0)]
pairs, _, _ = match_frame_class(preds, refs)
print("\ntwo predictions {0, 90} vs two references {85, 5} (azimuth degrees):")
for p, r, dist in pairs:
    print(f"  pred {p} <-> ref {r}: {dist:.0f} deg")
print("total 10 deg, not the 170 deg of the naive pairing")
