"""Blind video quality assessment toolkit.

Natural-scene-statistics, pooled deep CNN, and Score-CAM saliency
features; eleven fusion variants; SMO-trained epsilon-SVR with a
hold-out cross-validation evaluation protocol.
"""

__version__ = "0.1.0"
