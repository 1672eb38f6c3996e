"""Desk-scale constructive potential theory.

Kernels with the triangle property, their quasi-metric and chain metric,
discrete measures and potentials, capacity as a linear program, shell
sweeping, and the Evans / Choquet measure constructions with certified
finite-scale reports.
"""

from .capacity import CapacityEstimate, capacity_lp, null_capacity_series, witness_from_capacity
from .choquet import ChoquetConfig, choquet_measure, dense_carrier, localize, scatter, thin_to_finite
from .errors import BudgetError, InputError, PotlabError
from .evans import WitnessConfig, evans_measure, evans_on_countable
from .glue import glue_choquet, glue_evans, local_cover
from .kernels import (
    KernelSpec,
    chain_metric,
    comparability_check,
    eval_kernel,
    log2d,
    metric_power,
    quasimetric,
    riesz,
    triangle_constant,
)
from .measures import DiscreteMeasure, add, mass, potential, potential_field, restrict, scale
from .sets import (
    Ball,
    Box,
    Cantor,
    ExhaustionSpec,
    FSigmaSpec,
    FinitePoints,
    GDeltaSpec,
    Neighborhood,
    OpenBall,
    Segment,
    SetSpec,
    Union,
    distance_to_set,
    geometric_exhaustion,
    shell_index,
    standard_exhaustion,
)
from .sweep import discrete_approximation, refine_until, shell_partition, sweep_off_set, sweep_to_closed

__version__ = "0.1.0"
