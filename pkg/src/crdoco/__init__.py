"""Cross-domain consistency training for dense prediction tasks.

Bidirectional image translation between a labeled source domain and an
unlabeled target domain, dual domain-specific task networks, adversarial
alignment at image and feature level, and a cross-domain consistency loss
tying the two task networks together.  Ships with a procedural two-domain
benchmark generator for segmentation, depth, and optical flow.
"""

__version__ = "0.1.0"
