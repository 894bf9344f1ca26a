"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python
backend is the fallback. Override with HANDOVER_KERNEL=python|native
(requesting `native` when the extension is missing raises, rather than
silently running slow).
"""

from __future__ import annotations

import os

from . import pybackend

ATOM_ORDER = (
    "InTunnel",
    "InFog",
    "InConstruction",
    "OnIce",
    "SensorDegraded",
    "HighSpeed",
    "ObstacleAhead",
    "LaneBlocked",
    "AdjacentLaneFree",
    "NearRouteEnd",
)

ATOM_BIT = {name: i for i, name in enumerate(ATOM_ORDER)}

_requested = os.environ.get("HANDOVER_KERNEL", "").strip().lower()

if _requested == "python":
    impl = pybackend
elif _requested == "native":
    from . import _native as impl  # type: ignore[no-redef]
else:
    try:
        from . import _native as impl  # type: ignore[no-redef]
    except ImportError:
        impl = pybackend

BACKEND: str = impl.BACKEND


def available_backends():
    names = ["python"]
    try:
        from . import _native  # noqa: F401
        names.append("native")
    except ImportError:
        pass
    return names
