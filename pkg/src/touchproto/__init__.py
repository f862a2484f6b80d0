"""touchproto: learning 2D-touch-to-action interaction protocols.

A gesture VAE constrains a simulated user to natural two-finger gestures,
an interface agent learns to map those gestures to 2D-surface or 3D-camera
motion, and trained protocols are served live to interactive clients.
"""

__version__ = "0.1.0"
