"""Integrable mass families of trapped hard-core particles and the
spherical-triangle quantum billiards they induce."""

__version__ = "0.1.0"

from .masses import (  # noqa: F401
    ClassificationResult,
    CoxeterSpec,
    MassSequence,
    classify,
    coxeter_spec,
    family_curve,
    generate_family,
    sector_angle,
)
