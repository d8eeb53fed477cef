"""Suspension flows and brake-induced singular suspensions over discrete systems.

Modules
-------
systems
    Base maps: affine torus maps, full shifts, generated subshifts, products.
mapping_torus
    The roof-one mapping torus, its vertical flow and the chain metric.
singular
    Brakes, the singular suspension, traversal times and measures.
entropy
    Separated-set entropy estimates for maps and time-one flow maps.
symbolic
    Minimal subshifts with prescribed entropy, certificates, avoidance.
expansive
    Falsifiers for expansiveness of maps and flows.
experiments
    Scenarios, the bundled suite and reports.
"""

from .entropy import (
    CylinderSampler,
    EntropyEstimate,
    SlopeFit,
    entropy_estimate_flow,
    entropy_estimate_map,
    separated_count,
)
from .expansive import (
    Counterexample,
    NearPairs,
    NoCounterexample,
    ReparamGrid,
    flow_expansiveness_falsifier,
    map_expansiveness_falsifier,
    reparam_tracking_distance,
    singularity_count_check,
)
from .experiments import Report, Scenario, bundled, bundled_suite, load_scenario, run_scenario, run_suite
from .mapping_torus import FiberPoint, MappingTorus, bar_metric, suspension_flow
from .singular import (
    Brake,
    DivergenceSuspected,
    Exponential,
    Finite,
    LebesgueOnBase,
    OrbitClosure,
    PointList,
    Power,
    SingularSuspension,
    UniformOnSubshift,
    WholeFiber,
    expected_gamma,
)
from .symbolic import (
    Certified,
    Refuted,
    Subshift,
    choose_subshift_avoiding,
    minimal_subshift_with_entropy,
    minimality_certificate,
)
from .systems import (
    AffineTorus,
    CatMap,
    CircleRotation,
    FullShift,
    Product,
    SkewTorus,
    SymbolSequence,
    UsageError,
    system_from_json,
)

__version__ = "0.1.0"
