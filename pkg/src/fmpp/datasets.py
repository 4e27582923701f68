"""A bundled synthetic stand-in for a 47-region census pattern.

The locations are a seed-fixed simple sequential inhibition pattern in a
1000 km x 850 km rectangle, so no two centres are closer than 48 km. Each
region carries two kinds of yearly curves over 1998-2017: log population
(demography) and males per female (sex ratio). Both are generated
independently of location.
"""
from __future__ import annotations

from importlib import resources

import numpy as np

from .geometry import rect
from .pattern import Pattern, load_pattern, save_pattern

__all__ = ["PROVINCES_WINDOW", "YEARS", "make_provinces", "load_provinces"]

PROVINCES_WINDOW = rect(0.0, 1000.0, 0.0, 850.0)
YEARS = np.arange(1998.0, 2018.0)
N_REGIONS = 47
MIN_SEPARATION = 48.0


def _inhibition(rng, n, window, dmin):
    pts = []
    while len(pts) < n:
        c = np.array([rng.uniform(window.xmin, window.xmax), rng.uniform(window.ymin, window.ymax)])
        if all(np.hypot(*(c - q)) >= dmin for q in pts):
            pts.append(c)
    return np.round(np.array(pts), 3)


def make_provinces(seed: int = 1998):
    """Return ``(demography, sex_ratio)`` patterns sharing the same locations."""
    rng = np.random.default_rng(seed)
    xy = _inhibition(rng, N_REGIONS, PROVINCES_WINDOW, MIN_SEPARATION)
    t = YEARS - YEARS[0]
    m = len(YEARS)
    log_p0 = rng.normal(13.0, 0.8, N_REGIONS)
    growth = rng.normal(0.004, 0.007, N_REGIONS)
    wobble = np.cumsum(rng.normal(0.0, 0.004, (N_REGIONS, m)), axis=1)
    demog = np.round(log_p0[:, None] + growth[:, None] * t + wobble, 6)
    base = rng.normal(0.975, 0.012, N_REGIONS)
    drift = rng.normal(0.0005, 0.0008, N_REGIONS)
    sex = np.round(base[:, None] + drift[:, None] * t + rng.normal(0.0, 0.002, (N_REGIONS, m)), 6)
    ids = [f"R{i + 1:02d}" for i in range(N_REGIONS)]
    return (
        Pattern(PROVINCES_WINDOW, xy, YEARS, demog, ids=ids),
        Pattern(PROVINCES_WINDOW, xy, YEARS, sex, ids=ids),
    )


def _data_path(name):
    return resources.files("fmpp") / "data" / name


def load_provinces(which: str = "demography") -> Pattern:
    """Load the bundled pattern; ``which`` is "demography" or "sexratio"."""
    if which not in ("demography", "sexratio"):
        raise ValueError("which must be 'demography' or 'sexratio'")
    with resources.as_file(_data_path("provinces_points.csv")) as pts, resources.as_file(
        _data_path(f"provinces_{which}.csv")
    ) as cur:
        return load_pattern(pts, cur, PROVINCES_WINDOW)


def provinces_paths(which: str = "demography"):
    """Filesystem paths of the bundled points and curves CSVs."""
    return str(_data_path("provinces_points.csv")), str(_data_path(f"provinces_{which}.csv"))


def write_provinces(directory, seed: int = 1998) -> None:
    """Regenerate the bundled CSV files into ``directory``."""
    import os

    demog, sex = make_provinces(seed)
    pts = os.path.join(directory, "provinces_points.csv")
    save_pattern(demog, pts, os.path.join(directory, "provinces_demography.csv"))
    save_pattern(sex, os.path.join(directory, "_tmp_points.csv"), os.path.join(directory, "provinces_sexratio.csv"))
    os.remove(os.path.join(directory, "_tmp_points.csv"))
