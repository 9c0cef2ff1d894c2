"""Marker-based indoor drone positioning."""

from ._tagnav import *  # noqa: F401,F403

__version__ = "0.1.0"
