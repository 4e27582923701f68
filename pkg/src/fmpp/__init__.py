"""Second- and third-order summary statistics for functional marked point patterns."""

__version__ = "0.1.0"

from .errors import EXIT_CODES, FmppError
from .geometry import Ball, Box, ConvexPolygon, Rectangle, Sector, parse_window, polygon, rect
from .pattern import (
    AuxMark,
    AuxSchema,
    Curve,
    IntegralThreshold,
    LabelIn,
    MarkSet,
    Pattern,
    ScalarIn,
    SupThreshold,
    load_pattern,
    mark_set,
    restrict,
    save_pattern,
)
from .testfuncs import TestFunction, evaluate, parse_test_function
from .intensity import IntensityModel, IntensitySpec, fit_intensity, homogeneous
from .summaries import KEstimate, KQuery, directional_k, estimate_k, ground_k, minimum_contrast_fit
from .envelopes import EnvelopeResult, NullModel, envelope, simulate_null
from .simulate import (
    LGCP,
    Binomial,
    BrownianMarks,
    GeostatMarks,
    GrowthInteraction,
    IntensityMarks,
    Poisson,
    coverage_fraction,
    growth_interaction,
    lisa_marks,
    simulate_ground,
    simulate_marks,
)
from .plotting import plot_svg
from .datasets import load_provinces

__all__ = [
    "__version__",
    "EXIT_CODES",
    "FmppError",
    "Ball",
    "Box",
    "ConvexPolygon",
    "Rectangle",
    "Sector",
    "parse_window",
    "polygon",
    "rect",
    "AuxMark",
    "AuxSchema",
    "Curve",
    "IntegralThreshold",
    "LabelIn",
    "MarkSet",
    "Pattern",
    "ScalarIn",
    "SupThreshold",
    "load_pattern",
    "mark_set",
    "restrict",
    "save_pattern",
    "TestFunction",
    "evaluate",
    "parse_test_function",
    "IntensityModel",
    "IntensitySpec",
    "fit_intensity",
    "homogeneous",
    "KEstimate",
    "KQuery",
    "directional_k",
    "estimate_k",
    "ground_k",
    "minimum_contrast_fit",
    "EnvelopeResult",
    "NullModel",
    "envelope",
    "simulate_null",
    "LGCP",
    "Binomial",
    "BrownianMarks",
    "GeostatMarks",
    "GrowthInteraction",
    "IntensityMarks",
    "Poisson",
    "coverage_fraction",
    "growth_interaction",
    "lisa_marks",
    "simulate_ground",
    "simulate_marks",
    "plot_svg",
    "load_provinces",
]
