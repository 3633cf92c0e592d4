"""Bundled synthetic truth profile for the reference experiment.

An 80-node positive profile (natural unit) spanning [17, 1024.9], generated
once from a seeded smooth random draw and frozen here so the ``truth``
subcommand works without any external data file.
"""

from __future__ import annotations

import numpy as np

__all__ = ["default_profile"]

_PROFILE_80 = np.array([
    48.3765, 112.4786, 73.4003, 58.3727, 111.1758, 56.8651, 59.7118, 57.4128,
    63.4840, 55.7953, 41.6347, 28.1280, 31.4168, 19.9424, 17.0000, 22.3972,
    24.1980, 24.3454, 29.5153, 27.4288, 24.4626, 40.0010, 64.8600, 53.2867,
    37.1403, 39.5079, 96.6685, 78.2171, 97.7207, 115.8367, 170.0730, 334.7341,
    435.6485, 650.7205, 727.3399, 725.9298, 1024.9000, 771.4141, 720.4488,
    918.4517, 847.6265, 471.8863, 722.4802, 921.2527, 855.4539, 565.4794,
    955.2803, 1019.6097, 750.9319, 390.2098, 354.4248, 556.3656, 529.6292,
    506.4951, 403.1198, 476.4068, 441.8449, 600.3370, 379.4976, 450.8819,
    344.2798, 326.0477, 239.6075, 187.2079, 185.3116, 116.4984, 107.4429,
    63.1803, 41.6205, 54.9290, 65.0975, 48.1746, 74.0042, 79.8960, 36.4602,
    40.0072, 63.1115, 85.4920, 193.0496, 169.2649,
])


def default_profile() -> np.ndarray:
    """Copy of the bundled 80-node natural-unit profile."""
    return _PROFILE_80.copy()
