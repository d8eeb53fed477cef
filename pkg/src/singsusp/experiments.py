"""Scenarios: reproducible experiments with an expected verdict.

A scenario names a base system, a brake, a measure and the analyses to run.
:func:`run_scenario` runs them, compares the results with the expected
verdicts and returns a :class:`Report` whose JSON form is byte-stable for a
given seed.  :func:`bundled_suite` returns the fixed collection shipped with
the package.
"""

from __future__ import annotations

import copy
import functools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import jsonschema
import numpy as np

from . import symbolic
from .entropy import DEFAULT_EPS, CylinderSampler, entropy_estimate_flow, entropy_estimate_map
from .expansive import (
    Counterexample,
    NearPairs,
    ReparamGrid,
    flow_expansiveness_falsifier,
    map_expansiveness_falsifier,
    singularity_count_check,
)
from .mapping_torus import FiberPoint, MappingTorus
from .singular import (
    Brake,
    DivergenceSuspected,
    Finite,
    LebesgueOnBase,
    OrbitClosure,
    PointList,
    SingularSuspension,
    UniformOnSubshift,
    a_sing_sample,
    expected_gamma,
    profile_from_json,
    singular_set_from_json,
)
from .systems import AffineTorus, SymbolSequence, UsageError, _ShiftBase, system_from_json

__all__ = [
    "VERDICTS",
    "ANALYSES",
    "STATEMENTS",
    "Scenario",
    "Report",
    "run_scenario",
    "run_suite",
    "bundled_suite",
    "bundled",
    "load_scenario",
    "scenario_schema",
    "build_brake",
    "forbidden_windows",
]

VERDICTS = ("EntropyPositive", "EntropyZero", "ExpansiveEvidence", "NonExpansive", "GammaDiverges", "GammaFinite")
ANALYSES = ("entropy_map", "entropy_flow", "gamma_profile", "expected_gamma", "expansive_flow", "expansive_map",
            "singularity_count", "avoidance", "disjointness")

# the statements scenarios test, keyed by a short name
STATEMENTS = {
    "suspension-entropy": "A roof-1 suspension flow has the topological entropy of its base map.",
    "fiber-kill": "A brake vanishing on a whole fiber leaves only singular points non-wandering, "
                  "so the singular suspension has zero entropy.",
    "zero-entropy-base": "If the base map has zero entropy, every singular suspension over it has zero entropy.",
    "traversal-time": "The fiber traversal time is 1 for the unbraked flow, blows up as base points approach "
                      "the projection of a singularity, and is infinite on fibers meeting a singularity.",
    "integrability-criterion": "A singular suspension has positive entropy exactly when some ergodic measure of "
                               "positive entropy has integrable traversal time.",
    "avoiding-measure": "A positive-entropy invariant measure whose support misses the base projections of the "
                        "singular orbits gives the singular suspension positive entropy.",
    "finitely-many-singularities": "A brake with finitely many zeros over an expansive base gives an "
                                   "expansive singular suspension.",
    "expansive-transfer": "If a singular suspension is expansive, its base map is expansive.",
    "isometry-nonexpansive": "The suspension of an isometry is not expansive: nearby parallel orbits "
                             "track each other forever.",
    "anosov-suspension": "Over a transitive Anosov base, a singular suspension has zero entropy if and only if "
                         "the non-wandering set lies in the projection of the singular set.",
    "disjoint-horseshoes": "Inside a horseshoe, singular orbits drawn from one minimal subset leave the entropy "
                           "of a disjoint minimal subset intact.",
}

ZERO_THRESHOLD = 0.05
GAMMA_LARGE = 1e4
REPORT_VERSION = 1
BRAKE_RADIUS = 0.005
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@functools.lru_cache(maxsize=1)
def scenario_schema() -> dict:
    text = resources.files("singsusp").joinpath("scenario.schema.json").read_text()
    return json.loads(text)


@dataclass
class Scenario:
    """One experiment; see ``scenario.schema.json`` for the field formats."""

    name: str
    statement: str
    base: dict
    expected: list
    analyses: list
    brake: dict | None = None
    measure: dict = field(default_factory=lambda: {"kind": "LebesgueOnBase"})
    grids: dict = field(default_factory=dict)
    seed: int = 0
    description: str = ""

    @property
    def citation(self) -> str:
        return f"{self.statement}: {STATEMENTS[self.statement]}"

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "statement": self.statement,
            "base": self.base,
            "brake": self.brake,
            "measure": self.measure,
            "analyses": list(self.analyses),
            "expected": list(self.expected),
            "grids": self.grids,
            "seed": self.seed,
        }
        if self.description:
            out["description"] = self.description
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Scenario":
        try:
            jsonschema.validate(obj, scenario_schema())
        except jsonschema.ValidationError as exc:
            raise UsageError(f"invalid scenario: {exc.message}") from None
        if obj["statement"] not in STATEMENTS:
            raise UsageError(f"unknown statement {obj['statement']!r}")
        return cls(obj["name"], obj["statement"], obj["base"], list(obj["expected"]), list(obj["analyses"]),
                   obj.get("brake"), obj.get("measure", {"kind": "LebesgueOnBase"}), obj.get("grids", {}),
                   int(obj.get("seed", 0)), obj.get("description", ""))

    def with_seed(self, seed: int) -> "Scenario":
        sc = copy.deepcopy(self)
        sc.seed = int(seed)
        return sc

    def with_grids(self, **grids) -> "Scenario":
        sc = copy.deepcopy(self)
        sc.grids.update(grids)
        return sc


@dataclass
class Report:
    scenario: Scenario
    analyses: dict
    verdicts: list
    tsv: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(v["passed"] for v in self.verdicts)

    def to_json(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "name": self.scenario.name,
            "citation": self.scenario.citation,
            "scenario": self.scenario.to_json(),
            "analyses": self.analyses,
            "verdicts": self.verdicts,
            "passed": self.passed,
        }

    def dumps(self) -> str:
        return json.dumps(_clean(self.to_json()), sort_keys=True, indent=1)


def _clean(obj):
    # JSON has no infinities; encode them as strings so reports stay valid JSON
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def load_scenario(path_or_name: str) -> Scenario:
    """A bundled scenario by name, or a scenario JSON file."""
    for sc in bundled_suite():
        if sc.name == path_or_name:
            return sc
    try:
        with open(path_or_name) as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"no bundled scenario or file named {path_or_name!r}") from None
    return Scenario.from_json(obj)


# ---------------------------------------------------------------------------
# building blocks


def build_brake(spec: dict | None, system, seed: int) -> Brake:
    """Resolve a scenario brake spec; generated singular sets are drawn from ``seed``."""
    if not spec:
        return Brake()
    profile = profile_from_json(spec.get("profile", {"power": 1}))
    rng = np.random.default_rng([seed, 7])
    if "random_points" in spec:
        k = int(spec["random_points"])
        if isinstance(system, AffineTorus):
            pts = [FiberPoint(tuple(float(v) for v in rng.random(system.dim)), float(rng.random())) for _ in range(k)]
        elif isinstance(system, _ShiftBase):
            pts = [FiberPoint(SymbolSequence(rng.integers(0, system.k, 65).astype(np.int8), 32), float(rng.random()))
                   for _ in range(k)]
        else:
            raise UsageError(f"random singular points not supported on {system.kind}")
        return Brake(PointList(tuple(pts)), profile)
    if "periodic_point" in spec:
        pp = spec["periodic_point"]
        x = SymbolSequence.periodic(pp["cycle"], int(pp.get("phase", 0)))
        return Brake(PointList((FiberPoint(x, float(pp.get("height", 0.5))),)), profile)
    if "subshift_orbit" in spec:
        so = spec["subshift_orbit"]
        sh = symbolic.minimal_subshift_with_entropy(so["target"], so.get("levels", 3), so.get("tol", 0.02))
        phase = int(rng.integers(0, len(sh.canonical_cycle)))
        x = SymbolSequence.periodic(sh.canonical_cycle, phase)
        return Brake(OrbitClosure(FiberPoint(x, float(so.get("height", 0.5))), int(so.get("depth", 8))), profile)
    return Brake(singular_set_from_json(spec.get("singular_set")), profile)


def forbidden_windows(points, length: int) -> list[tuple]:
    """Centred symbol windows of the given length, one per sampled point."""
    lo = -(length // 2)
    return [tuple(int(v) for v in p.window(lo, lo + length - 1)) for p in points]


def _range(spec, default):
    if spec is None:
        return list(default)
    if isinstance(spec, dict):
        return list(range(spec["start"], spec["stop"] + 1, spec.get("step", 1)))
    return [int(v) for v in spec]


class _Context:
    """Objects shared by the analyses of one scenario run."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.system = system_from_json(sc.base)
        self.torus = MappingTorus(self.system)
        self.brake = build_brake(sc.brake, self.system, sc.seed)
        self.ss = SingularSuspension(self.torus, self.brake, cap=float(sc.grids.get("cap", 1e6)))
        self.results: dict[str, Any] = {}
        self._measure = None
        self.subshift = None

    def measure(self):
        if self._measure is None:
            m = self.sc.measure
            kind = m.get("kind", "LebesgueOnBase")
            if kind == "LebesgueOnBase":
                self._measure = LebesgueOnBase(self.system, seed=self.sc.seed)
            elif kind == "UniformOnSubshift":
                if "avoid" in m:
                    self.subshift = self._avoiding_subshift(m["avoid"])
                else:
                    self.subshift = symbolic.minimal_subshift_with_entropy(m["target"], m.get("levels", 3),
                                                                         m.get("tol", 0.02))
                self._measure = UniformOnSubshift(self.subshift, seed=self.sc.seed)
            else:
                raise UsageError(f"unknown measure kind {kind!r}")
        return self._measure

    def _avoiding_subshift(self, spec):
        depth = int(spec.get("depth", 8))
        width = int(spec.get("window", 32))
        asing = a_sing_sample(self.ss, depth)
        if asing.whole_space:
            raise UsageError("the singular set projects onto the whole base; nothing to avoid")
        forbidden = forbidden_windows(asing.points, width)
        sh = symbolic.choose_subshift_avoiding(forbidden, spec["targets"], spec.get("levels", 3), spec.get("tol", 0.02))
        attempts = len(getattr(sh, "avoid_report", [])) + 1
        self.results["avoidance"] = {
            "a_sing_points": len(asing.points),
            "window": width,
            "chosen_target": sh.target,
            "attempts": attempts,
            "rejected": getattr(sh, "avoid_report", []),
            "measured_entropy": sh.measured_entropy,
        }
        return sh


# ---------------------------------------------------------------------------
# analyses


def _entropy_map(ctx: _Context):
    g = ctx.sc.grids
    eps = g.get("eps", list(DEFAULT_EPS))
    n_grid = _range(g.get("n"), range(2, 11))
    if g.get("cylinder"):
        est = entropy_estimate_map(ctx.system, CylinderSampler(ctx.system.k), n_grid, eps)
    else:
        est = entropy_estimate_map(ctx.system, ctx.measure(), n_grid, eps, n_samples=int(g.get("map_samples", 1 << 14)),
                                   workers=ctx.workers)
    ctx.tsv["entropy_map"] = est.to_tsv()
    return est.to_json()


def _entropy_flow(ctx: _Context):
    g = ctx.sc.grids
    eps = g.get("flow_eps", g.get("eps", list(DEFAULT_EPS)))
    T_grid = _range(g.get("T"), range(2, 11))
    est = entropy_estimate_flow(ctx.ss, ctx.measure(), T_grid, eps, n_samples=int(g.get("flow_samples", 1 << 12)),
                                workers=ctx.workers)
    ctx.tsv["entropy_flow"] = est.to_tsv()
    out = est.to_json()
    out["tail_slope"] = est.tail_slope(3)
    return out


def _gamma_profile(ctx: _Context):
    sysm = ctx.system
    if not isinstance(sysm, AffineTorus) or not ctx.ss.sigmas:
        raise UsageError("gamma profile needs a torus base and a point brake")
    g = ctx.sc.grids
    n0, n1 = int(g.get("gamma_n0", 8)), int(g.get("gamma_n1", 30))
    xs = np.asarray(ctx.ss.sigmas[0].base, dtype=float)
    ladder = []
    for n in range(n0, n1 + 1):
        x = xs.copy()
        x[0] = (x[0] + 2.0 ** -n) % 1.0
        ladder.append({"n": n, "gamma": ctx.ss.gamma(tuple(float(v) for v in x))})
    detail = ctx.ss.clock_detail(FiberPoint(ctx.ss.sigmas[0].base, 0.0), 1.0)
    free = SingularSuspension(ctx.torus, Brake())
    rng = np.random.default_rng([ctx.sc.seed, 3])
    unbraked = [free.gamma(tuple(float(v) for v in rng.random(sysm.dim))) for _ in range(8)]
    return {
        "ladder": ladder,
        "singular_fiber": {"gamma": detail.value, "certificate": detail.certificate},
        "unbraked": unbraked,
    }


def _expected_gamma(ctx: _Context):
    g = ctx.sc.grids
    res = expected_gamma(ctx.ss, ctx.measure(), n_samples=int(g.get("egamma_samples", 1000)),
                         levels=int(g.get("egamma_levels", 12)))
    return res.to_json()


def _expansive_flow(ctx: _Context):
    g = ctx.sc.grids
    eps, delta = float(g.get("flow_eps_exp", 0.25)), float(g.get("delta", 0.05))
    grid = ReparamGrid(float(g.get("horizon_T", 20.0)), float(g.get("delta_t", 0.1)))
    pairs = NearPairs(ctx.system, delta / 4, delta, seed=ctx.sc.seed)
    res = flow_expansiveness_falsifier(ctx.ss, eps, delta, pairs, grid, n_pairs=int(g.get("pairs", 100)))
    return res.to_json()


def _expansive_map(ctx: _Context):
    g = ctx.sc.grids
    e = float(g.get("e", 0.25))
    horizon = int(g.get("horizon", 10))
    lo = float(g.get("pair_lo", 2.0 ** -horizon))
    pairs = NearPairs(ctx.system, lo, e, seed=ctx.sc.seed)
    res = map_expansiveness_falsifier(ctx.system, e, pairs, horizon, n_pairs=int(g.get("map_pairs", 1000)))
    return res.to_json()


def _singularity_count(ctx: _Context):
    return singularity_count_check(ctx.ss).to_json()


def _avoidance(ctx: _Context):
    ctx.measure()
    if "avoidance" not in ctx.results:
        raise UsageError("avoidance needs a UniformOnSubshift measure with an 'avoid' block")
    out = dict(ctx.results["avoidance"])
    sh = ctx.subshift
    cert = symbolic.minimality_certificate(sh, sh.L1, 2 * sh.L2)
    out["certificate"] = cert.to_json()
    return out


def _disjointness(ctx: _Context):
    ctx.measure()
    so = (ctx.sc.brake or {}).get("subshift_orbit")
    if so is None or ctx.subshift is None:
        raise UsageError("disjointness needs a subshift_orbit brake and a subshift measure")
    other = symbolic.minimal_subshift_with_entropy(so["target"], so.get("levels", 3), so.get("tol", 0.02))
    L = min(other.L2, ctx.subshift.L2)
    return {"targets": [other.target, ctx.subshift.target], "length": L,
            "disjoint": symbolic.language_disjoint(other, ctx.subshift, L)}


_ANALYSES = {
    "entropy_map": _entropy_map,
    "entropy_flow": _entropy_flow,
    "gamma_profile": _gamma_profile,
    "expected_gamma": _expected_gamma,
    "expansive_flow": _expansive_flow,
    "expansive_map": _expansive_map,
    "singularity_count": _singularity_count,
    "avoidance": _avoidance,
    "disjointness": _disjointness,
}


# ---------------------------------------------------------------------------
# verdicts


def _ok(res: dict | None) -> bool:
    return res is not None and "error" not in res


def _judge(verdict: str, sc: Scenario, A: dict) -> tuple[bool, str]:
    g = sc.grids
    flow, base = A.get("entropy_flow"), A.get("entropy_map")
    if verdict == "EntropyPositive":
        if not _ok(flow):
            return False, "flow entropy unavailable"
        h = flow["headline"]
        need = max(ZERO_THRESHOLD, float(g.get("min_headline", 0.0)))
        if _ok(base):
            need = max(need, 0.5 * base["headline"])
        extra = ""
        if "avoidance" in A and _ok(A["avoidance"]):
            if A["avoidance"]["certificate"]["result"] != "Certified":
                return False, "avoiding subshift failed its minimality certificate"
        if "disjointness" in A and _ok(A["disjointness"]) and not A["disjointness"]["disjoint"]:
            return False, "subshift languages overlap"
        return h >= need and not flow["inconclusive"], f"flow headline {h:.4f} vs required {need:.4f}{extra}"
    if verdict == "EntropyZero":
        if not _ok(flow):
            return False, "flow entropy unavailable"
        h, tail = flow["headline"], flow["tail_slope"]
        return h <= ZERO_THRESHOLD, f"flow headline {h:.4f}, tail slope {tail:.4f}, threshold {ZERO_THRESHOLD}"
    if verdict in ("ExpansiveEvidence", "NonExpansive"):
        parts = [A[k] for k in ("expansive_flow", "expansive_map") if k in A]
        if not parts or not all(_ok(p) for p in parts):
            return False, "expansiveness analysis unavailable"
        found = [p["result"] == "Counterexample" for p in parts]
        if verdict == "ExpansiveEvidence":
            sc_ok = True
            if "singularity_count" in A:
                sc_ok = _ok(A["singularity_count"]) and A["singularity_count"]["result"] == "FiniteOK"
            tested = sum(p.get("n_tested", 0) for p in parts)
            return (not any(found)) and sc_ok, f"no counterexample over {tested} pairs" if not any(found) \
                else "counterexample found"
        return any(found), "counterexample found" if any(found) else "no counterexample"
    if verdict == "GammaDiverges":
        checks = []
        if "gamma_profile" in A:
            gp = A["gamma_profile"]
            if not _ok(gp):
                return False, "gamma profile unavailable"
            vals = [r["gamma"] for r in gp["ladder"]]
            inc = all(b > a for a, b in zip(vals, vals[1:]))
            big = vals[-1] > GAMMA_LARGE
            sing = math.isinf(gp["singular_fiber"]["gamma"])
            unb = all(v == 1.0 for v in gp["unbraked"])
            checks.append((inc and big and sing and unb,
                           f"ladder increasing={inc}, last={vals[-1]:.3g}, singular fiber infinite={sing}, "
                           f"unbraked gamma==1: {unb}"))
        if "expected_gamma" in A:
            eg = A["expected_gamma"]
            checks.append((_ok(eg) and eg["result"] == "DivergenceSuspected", f"expected gamma: {eg.get('result')}"))
        if not checks:
            return False, "no gamma analysis"
        return all(c for c, _ in checks), "; ".join(d for _, d in checks)
    if verdict == "GammaFinite":
        eg = A.get("expected_gamma")
        if not _ok(eg):
            return False, "expected gamma unavailable"
        return eg["result"] == "Finite", f"expected gamma: {eg['result']}"
    raise UsageError(f"unknown verdict {verdict!r}")


def run_scenario(sc: Scenario, workers: int = 1) -> Report:
    """Run every requested analysis; analysis errors are recorded, not raised."""
    for v in sc.expected:
        if v not in VERDICTS:
            raise UsageError(f"unknown verdict {v!r}")
    ctx = _Context(sc)
    ctx.workers = workers
    ctx.tsv = {}
    analyses: dict[str, Any] = {}
    for name in sc.analyses:
        try:
            analyses[name] = _ANALYSES[name](ctx)
        except KeyError:
            raise UsageError(f"unknown analysis {name!r}") from None
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            analyses[name] = {"error": f"{type(exc).__name__}: {exc}"}
    verdicts = []
    for v in sc.expected:
        ok, detail = _judge(v, sc, analyses)
        verdicts.append({"verdict": v, "passed": bool(ok), "detail": detail})
    return Report(sc, analyses, verdicts, ctx.tsv)


def _run_one(args):
    sc, workers = args
    return run_scenario(sc, workers)


def run_suite(scenarios: list[Scenario], workers: int = 1) -> list[Report]:
    """Run scenarios in a process pool; ``workers`` is the total budget.

    Each scenario gets ``max(1, workers // len(scenarios))`` workers of its
    own.  Results come back in input order.
    """
    scenarios = list(scenarios)
    if workers <= 1 or len(scenarios) <= 1:
        return [run_scenario(sc, max(1, workers)) for sc in scenarios]
    inner = max(1, workers // len(scenarios))
    outer = min(workers, len(scenarios))
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(outer) as pool:
        return list(pool.map(_run_one, [(sc, inner) for sc in scenarios]))


# ---------------------------------------------------------------------------
# bundled suite


def _pw(k, radius=BRAKE_RADIUS):
    return {"power": k, "radius": radius}


def _ex(radius=BRAKE_RADIUS):
    return {"exp": radius, "radius": radius}


SHIFT = {"kind": "FullShift", "params": {"k": 2}}
CAT = {"kind": "CatMap"}
ROT = {"kind": "CircleRotation", "params": {"angle": GOLDEN}}
ZERO_FLOW_GRIDS = {"T": {"start": 2, "stop": 40, "step": 2}, "flow_samples": 4096}
ANOSOV_GRIDS = {"n": {"start": 2, "stop": 8}, "map_samples": 4096, "T": {"start": 2, "stop": 8},
                "flow_samples": 4096, "eps": [0.25, 0.125, 0.0625], "min_headline": 0.5}


def _suite() -> list[Scenario]:
    S = []
    S.append(Scenario(
        "roof1-shift", "suspension-entropy", SHIFT, ["EntropyPositive"], ["entropy_map", "entropy_flow"],
        grids={"cylinder": True, "n": {"start": 2, "stop": 12}, "T": {"start": 2, "stop": 8},
               "flow_samples": 2048, "flow_eps": [0.5, 0.25]},
        description="Unbraked suspension of the full 2-shift; flow and base headlines should both be near log 2."))
    S.append(Scenario(
        "roof1-cat", "suspension-entropy", CAT, ["EntropyPositive"], ["entropy_map", "entropy_flow"],
        grids={"n": {"start": 2, "stop": 8}, "map_samples": 4096, "T": {"start": 2, "stop": 8},
               "flow_samples": 4096, "eps": [0.25, 0.125]},
        description="Unbraked suspension of the cat map."))
    S.append(Scenario(
        "fiber-kill", "fiber-kill", SHIFT, ["EntropyZero"], ["entropy_flow"],
        brake={"singular_set": {"fiber": 0.5}, "profile": {"power": 1}},
        grids={"T": {"start": 2, "stop": 10}, "flow_samples": 2048, "flow_eps": [0.5, 0.25, 0.125]},
        description="The brake vanishes on the whole fiber at height 1/2 over the full shift."))
    S.append(Scenario(
        "rotation-zero", "zero-entropy-base", ROT, ["EntropyZero"], ["entropy_flow"],
        brake={"singular_set": {"points": [{"base": [0.3], "height": 0.5}]}, "profile": _pw(1)},
        grids=dict(ZERO_FLOW_GRIDS),
        description="Golden rotation with a single-point power brake."))
    S.append(Scenario(
        "rotation-zero-exp", "zero-entropy-base", ROT, ["EntropyZero"], ["entropy_flow"],
        brake={"singular_set": {"points": [{"base": [0.3], "height": 0.5}]}, "profile": _ex()},
        grids=dict(ZERO_FLOW_GRIDS),
        description="Golden rotation with a single-point exponential brake."))
    S.append(Scenario(
        "gamma-divergence", "traversal-time", CAT, ["GammaDiverges"], ["gamma_profile"],
        brake={"random_points": 1, "profile": _pw(2)},
        grids={"gamma_n0": 8, "gamma_n1": 30, "cap": 1e12},
        description="Traversal times along base points approaching the projection of a singular point."))
    S.append(Scenario(
        "egamma-k05", "integrability-criterion", CAT, ["GammaFinite"], ["expected_gamma"],
        brake={"random_points": 1, "profile": _pw(0.5)}, grids={"egamma_samples": 1300},
        description="A mild power brake: the traversal time is Lebesgue integrable."))
    S.append(Scenario(
        "egamma-k4", "integrability-criterion", CAT, ["GammaDiverges"], ["expected_gamma"],
        brake={"random_points": 1, "profile": _pw(4)}, grids={"egamma_samples": 1300},
        description="A strong power brake: the traversal time fails to be Lebesgue integrable."))
    S.append(Scenario(
        "avoid-asing", "avoiding-measure", SHIFT, ["EntropyPositive", "GammaFinite"],
        ["avoidance", "entropy_map", "entropy_flow", "expected_gamma"],
        brake={"periodic_point": {"cycle": [0, 0, 1], "height": 0.5}, "profile": _pw(1)},
        measure={"kind": "UniformOnSubshift", "avoid": {"targets": [0.3, 0.2, 0.4], "levels": 3, "depth": 8,
                                                        "window": 32}},
        grids={"n": {"start": 2, "stop": 10}, "map_samples": 4096, "T": {"start": 2, "stop": 8},
               "flow_samples": 2048, "eps": [0.5, 0.25, 0.125], "egamma_samples": 400},
        description="A point brake over a periodic orbit; the measure lives on a minimal subshift whose "
                    "language misses every sampled singular window."))
    S.append(Scenario(
        "horseshoe-over-horseshoe", "disjoint-horseshoes", SHIFT, ["EntropyPositive", "GammaFinite"],
        ["disjointness", "entropy_map", "entropy_flow", "expected_gamma"],
        brake={"subshift_orbit": {"target": 0.2, "levels": 3, "height": 0.5, "depth": 8}, "profile": _pw(1)},
        measure={"kind": "UniformOnSubshift", "target": 0.4, "levels": 3},
        grids={"n": {"start": 2, "stop": 10}, "map_samples": 4096, "T": {"start": 2, "stop": 8},
               "flow_samples": 2048, "eps": [0.5, 0.25, 0.125], "egamma_samples": 400},
        description="Singular orbits sampled from one generated minimal subshift; entropy measured on a "
                    "disjoint one."))
    S.append(Scenario(
        "expansive-shift", "finitely-many-singularities", SHIFT, ["ExpansiveEvidence"],
        ["singularity_count", "expansive_flow"],
        brake={"random_points": 1, "profile": _pw(1)}, grids={"pairs": 100},
        description="Single-point power brake over the full shift; no tracked pair of distinct orbits."))
    S.append(Scenario(
        "expansive-transfer-shift", "expansive-transfer", SHIFT, ["ExpansiveEvidence"], ["expansive_map"],
        grids={"map_pairs": 1000, "e": 0.25, "horizon": 10},
        description="The base of the expansive-shift flow passes the discrete falsifier."))
    S.append(Scenario(
        "isometry-nonexpansive", "isometry-nonexpansive", ROT, ["NonExpansive"], ["expansive_flow"],
        grids={"pairs": 100},
        description="Unbraked suspension of the golden rotation."))
    for k in (1, 8, 64):
        for pname, prof in (("power", _pw(1)), ("exp", _ex())):
            S.append(Scenario(
                f"anosov-points-{k}-{pname}", "anosov-suspension", CAT, ["EntropyPositive"],
                ["entropy_map", "entropy_flow"], brake={"random_points": k, "profile": prof},
                grids=dict(ANOSOV_GRIDS),
                description=f"{k} singular points over the cat map: a countable singular set cannot cover "
                            "the non-wandering set, so entropy survives."))
    S.append(Scenario(
        "anosov-fiber", "anosov-suspension", CAT, ["EntropyZero"], ["entropy_flow"],
        brake={"singular_set": {"fiber": 0.5}, "profile": {"power": 1}},
        grids={"T": {"start": 2, "stop": 10}, "flow_samples": 2048, "eps": [0.25, 0.125, 0.0625]},
        description="A whole-fiber brake over the cat map projects onto all of the base, which stands in for "
                    "a singular set covering the non-wandering set."))
    return S


@functools.lru_cache(maxsize=1)
def _suite_json() -> str:
    return json.dumps([sc.to_json() for sc in _suite()])


def bundled_suite() -> list[Scenario]:
    """Fresh copies of the bundled scenarios (validated against the schema)."""
    return [Scenario.from_json(obj) for obj in json.loads(_suite_json())]


def bundled(name: str) -> Scenario:
    for sc in bundled_suite():
        if sc.name == name:
            return sc
    raise UsageError(f"no bundled scenario named {name!r}")
