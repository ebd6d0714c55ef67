"""Adaptive state observer toolkit.

Simulates uncertain LTI plants disturbed by an autonomous oscillator bank,
builds the measurable filter regressions of the observer canonical form,
runs regressor extension and mixing, converts the mixed regression into
division-free regressions for the physical parameters, and drives both the
proposed scalar-regressor observer and a certainty-equivalence baseline.
"""

__version__ = "0.1.0"

from . import cascade, drem, example_system, filters, matkit, observers, plant, scenario

__all__ = [
    "cascade",
    "drem",
    "example_system",
    "filters",
    "matkit",
    "observers",
    "plant",
    "scenario",
    "__version__",
]
