"""Balanced multibrand geo-experiment designs, simulation and estimation."""

from ._core import (
    DegenerateDesignError,
    DimensionError,
    FormatError,
    GeoexpError,
    IdentifiabilityError,
    InsufficientDataError,
    ModelViolationError,
    PreconditionError,
    bayes,
    brand_correlation_matrix,
    checkerboard,
    correlations,
    default_scramble_attempts,
    fit_all_brands,
    grow4,
    run_study,
    scramble,
    seed_design_6x6,
    seed_design_8x8,
    shrink,
    simulate,
    sure,
    validate,
    wls_fit,
)


def study(**settings):
    """Run a study from keyword settings, e.g. study(kind="single_brand", geos=20, brands=1).

    Lists are joined with commas; `cells` takes (mean, sd) pairs. Returns
    (summary dict, records CSV text).
    """
    lines = []
    for key, value in settings.items():
        if key == "cells":
            value = ",".join(f"{m}:{s}" for m, s in value)
        elif isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return run_study("\n".join(lines) + "\n")


__all__ = [name for name in dir() if not name.startswith("_")]
