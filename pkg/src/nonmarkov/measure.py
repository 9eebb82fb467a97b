"""Revival-based non-Markovianity measures and their optimisation over pairs.

The measure of a family for a quantifier ``d`` is the largest total
positive variation of ``d(rho1(t), rho2(t))`` over initial pairs (and over the
bias/skew parameter, when the quantifier has one). On a time grid it is the
sum of positive increments; increments at or below :data:`DELTA_REV` are
treated as roundoff, and totals at or below :data:`ZERO_MEASURE` are
reported as "no revival detected".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from .dynamics import PhaseCovariantFamily, eval_map
from .qubit import AffineMap, entropy_of_norm
from .quantifiers import Kind, QuantifierId, evaluate, trace_distance
from .sampling import fibonacci_sphere, random_pairs, spawn_rngs

DELTA_REV = 1e-9
ZERO_MEASURE = 1e-6
PARAM_GRID = tuple(np.round(np.arange(0.05, 0.951, 0.05), 10))

# typical revival scales of the reference dephasing model, used to rescale robustness maps
REFERENCE_SCALE = {Kind.TD: 1e-2, Kind.SQRT_JSD: 1e-2, Kind.JSD: 1e-3}

_KIND_CODE = {
    Kind.TD: kern.TD,
    Kind.HELSTROM: kern.HELSTROM,
    Kind.JSD: kern.JSD,
    Kind.SQRT_JSD: kern.SQRT_JSD,
    Kind.HOLEVO_SKEW: kern.HOLEVO_SKEW,
    Kind.QUANTUM_SKEW: kern.QUANTUM_SKEW,
}


@dataclass(frozen=True)
class PairTrajectory:
    times: np.ndarray
    values: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    quantifier: QuantifierId


@dataclass
class RevivalReport:
    """Outcome of a revival integral or of a measure search.

    ``total`` is the floored sum of positive increments (the measure value);
    ``raw_total`` keeps every positive increment, however small, so that
    sub-threshold behaviour stays visible.
    """

    quantifier: str
    total: float
    raw_total: float
    intervals: list = field(default_factory=list)
    pair: tuple | None = None
    param: float | None = None
    stage: str | None = None
    evaluated: int = 0
    floor: float = DELTA_REV

    @property
    def detected(self) -> bool:
        return self.total > ZERO_MEASURE

    def to_dict(self) -> dict:
        return {
            "quantifier": self.quantifier,
            "total": self.total,
            "raw_total": self.raw_total,
            "detected": self.detected,
            "intervals": [list(iv) for iv in self.intervals],
            "pair": None if self.pair is None else [np.asarray(r).tolist() for r in self.pair],
            "param": self.param,
            "stage": self.stage,
            "evaluated": self.evaluated,
            "floor": self.floor,
            "zero_measure_threshold": ZERO_MEASURE,
        }


@dataclass(frozen=True)
class SearchConfig:
    """Budget of the pair search.

    ``directions`` antipodal pure pairs on a Fibonacci sphere are always
    tried; ``full_pairs`` random pairs (each state pure with probability
    1/2, otherwise uniform in the ball) are added on request. Parametric
    quantifiers without a fixed parameter sweep ``param_grid`` and then refine
    the best cell by golden-section search on the ``refine_top`` best pairs.
    """

    directions: int = 2048
    full_pairs: int = 0
    param_grid: tuple = PARAM_GRID
    refine: bool = True
    refine_top: int = 8
    refine_tol: float = 1e-4
    seed: int = 42
    floor: float = DELTA_REV

    def __post_init__(self):
        if self.directions <= 0 and self.full_pairs <= 0:
            raise ValueError("empty search space")


def map_trajectory(family: PhaseCovariantFamily, grid) -> AffineMap:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a strictly increasing 1-D array with >= 2 points")
    return eval_map(family, grid)


def pair_trajectory(q: QuantifierId, family, r1, r2, grid) -> PairTrajectory:
    """Quantifier value between the two evolved states at every grid time."""
    traj = map_trajectory(family, grid)
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    values = evaluate(q, traj(r1), traj(r2))
    return PairTrajectory(np.asarray(grid, dtype=float), np.asarray(values), r1, r2, q)


def revival_integral(traj: PairTrajectory, floor: float = DELTA_REV) -> RevivalReport:
    """Sum the positive increments of a trajectory, grouped into revival intervals."""
    values = np.asarray(traj.values, dtype=float)
    times = traj.times
    if values.size < 2:
        raise ValueError("need at least two grid points")
    inc = np.diff(values)
    counted = inc > floor
    intervals = []
    k = 0
    while k < inc.size:
        if counted[k]:
            j = k
            while j + 1 < inc.size and counted[j + 1]:
                j += 1
            intervals.append((float(times[k]), float(times[j + 1]), float(inc[k : j + 1].sum())))
            k = j + 1
        else:
            k += 1
    total = float(sum(iv[2] for iv in intervals))
    return RevivalReport(
        quantifier=traj.quantifier.label(),
        total=total,
        raw_total=float(inc[inc > 0].sum()),
        intervals=intervals,
        pair=(traj.r1, traj.r2),
        param=traj.quantifier.param,
        floor=floor,
    )


def _kernel_sums(traj: AffineMap, r1, r2, kinds, params, floor):
    r1 = np.ascontiguousarray(r1, dtype=float)
    r2 = np.ascontiguousarray(r2, dtype=float)
    shape = (r1.shape[0], len(kinds), len(params))
    floored = np.zeros(shape)
    raw = np.zeros(shape)
    kern.revival_sums(
        np.ascontiguousarray(traj.diag),
        np.ascontiguousarray(traj.shift),
        r1,
        r2,
        np.asarray(kinds, dtype=np.int64),
        np.asarray(params, dtype=float),
        float(floor),
        floored,
        raw,
    )
    return floored, raw


def revival_sums(q: QuantifierId, family, r1, r2, grid, floor: float = DELTA_REV):
    """Floored and raw revival sums for many pairs at once (compiled path)."""
    if q.kind is Kind.RELENT:
        raise ValueError("the relative entropy is unbounded; no revival measure")
    if q.parametric and q.param is None:
        raise ValueError("fix the parameter or use nm_measure to sweep it")
    traj = map_trajectory(family, grid)
    params = [q.param if q.parametric else 0.5]
    floored, raw = _kernel_sums(traj, np.atleast_2d(r1), np.atleast_2d(r2), [_KIND_CODE[q.kind]], params, floor)
    return floored[:, 0, 0], raw[:, 0, 0]


def _candidate_pairs(search: SearchConfig):
    dirs = fibonacci_sphere(search.directions) if search.directions > 0 else np.zeros((0, 3))
    stages = [("antipodal", dirs, -dirs)]
    if search.full_pairs > 0:
        (rng,) = spawn_rngs(search.seed, 1)
        a, b = random_pairs(rng, search.full_pairs, pure_fraction=0.5)
        stages.append(("full", a, b))
    return stages


def _golden(f, lo, hi, tol):
    inv_phi = (math.sqrt(5) - 1) / 2
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def nm_measures(quantifiers, family, grid, search: SearchConfig = SearchConfig()) -> list[RevivalReport]:
    """Search the measure of several quantifiers over a shared pair budget.

    All quantifiers are evaluated in one compiled pass per stage, so asking
    for several at once costs little more than the most expensive of them.
    The reported argmax trajectory is recomputed with the reference numpy
    quantifiers and the report totals come from that recomputation.
    """
    quantifiers = [q if isinstance(q, QuantifierId) else QuantifierId.parse(q) for q in quantifiers]
    for q in quantifiers:
        if q.kind is Kind.RELENT:
            raise ValueError("the relative entropy is unbounded; no revival measure")
    traj = map_trajectory(family, grid)
    sweep = np.asarray(search.param_grid, dtype=float)
    kinds = [_KIND_CODE[q.kind] for q in quantifiers]

    # parametric kinds with a fixed parameter are run as their own group
    groups: dict[tuple, list[int]] = {}
    for i, q in enumerate(quantifiers):
        key = (q.param,) if q.parametric and q.param is not None else ("sweep",)
        groups.setdefault(key, []).append(i)

    best = [None] * len(quantifiers)  # (value, stage, r1, r2, param)
    evaluated = 0
    for stage, a, b in _candidate_pairs(search):
        if len(a) == 0:
            continue
        evaluated += len(a)
        for key, idx in groups.items():
            params = sweep if key == ("sweep",) else np.array([key[0]])
            floored, _ = _kernel_sums(traj, a, b, [kinds[i] for i in idx], params, search.floor)
            for col, i in enumerate(idx):
                q = quantifiers[i]
                block = floored[:, col, :] if q.parametric else floored[:, col, :1]
                flat = int(np.argmax(block))
                p_idx, m_idx = divmod(flat, block.shape[1])
                val = float(block[p_idx, m_idx])
                param = float(params[m_idx]) if q.parametric else None
                if best[i] is None or val > best[i][0]:
                    best[i] = (val, stage, a[p_idx], b[p_idx], param, block, a, b)

    reports = []
    for i, q in enumerate(quantifiers):
        val, stage, r1, r2, param, block, a, b = best[i]
        if q.parametric and q.param is None and search.refine and val > 0:
            param, r1, r2 = _refine(q, traj, block, a, b, sweep, search)
        qq = q.with_param(param) if q.parametric else q
        rep = revival_integral(pair_trajectory(qq, family, r1, r2, grid), search.floor)
        rep.stage = stage
        rep.evaluated = evaluated
        reports.append(rep)
    return reports


def _refine(q, traj, block, a, b, sweep, search):
    """Golden-section refinement of the parameter around the best sweep cell."""
    order = np.argsort(block.max(axis=1))[::-1][: search.refine_top]
    best_val, best = -1.0, None
    code = _KIND_CODE[q.kind]
    for p_idx in order:
        m = int(np.argmax(block[p_idx]))
        lo = sweep[max(m - 1, 0)]
        hi = sweep[min(m + 1, len(sweep) - 1)]

        def f(mu, p_idx=p_idx):
            fl, _ = _kernel_sums(traj, a[p_idx : p_idx + 1], b[p_idx : p_idx + 1], [code], [mu], search.floor)
            return float(fl[0, 0, 0])

        mu, val = _golden(f, lo, hi, search.refine_tol)
        if block[p_idx, m] >= val:
            mu, val = float(sweep[m]), float(block[p_idx, m])
        if val > best_val:
            best_val, best = val, (float(mu), a[p_idx], b[p_idx])
    return best


def nm_measure(q, family, grid, search: SearchConfig = SearchConfig()) -> RevivalReport:
    return nm_measures([q], family, grid, search)[0]


def unital_entropy_measure(
    family, grid, search: SearchConfig = SearchConfig(), radii=(1.0, 0.75, 0.5, 0.25)
) -> RevivalReport:
    """Largest total entropy decrease of a single evolving state (unital families).

    Initial states are the Fibonacci directions scaled by each radius.
    """
    grid = np.asarray(grid, dtype=float)
    if not family.is_unital(grid):
        raise ValueError("family is not unital")
    traj = map_trajectory(family, grid)
    dirs = fibonacci_sphere(search.directions)
    states = np.concatenate([r * dirs for r in radii])
    floored, _ = _kernel_sums(traj, states, states, [kern.NEG_ENTROPY], [0.5], search.floor)
    k = int(np.argmax(floored[:, 0, 0]))
    r = states[k]
    values = -entropy_of_norm(np.linalg.norm(traj(r), axis=-1))
    fake_q = QuantifierId(Kind.JSD)
    rep = revival_integral(PairTrajectory(grid, values, r, r, fake_q), search.floor)
    rep.quantifier = "NegEntropy"
    rep.pair = (r,)
    rep.stage = "single-state"
    rep.evaluated = len(states)
    return rep


def unital_jsd_td_identity(r_pure, family, grid) -> float:
    """Max deviation of ``J = 1 - h((1 - D)/2)`` along an antipodal pure pair."""
    r = np.asarray(r_pure, dtype=float)
    if abs(np.linalg.norm(r) - 1) > 1e-12:
        raise ValueError("r_pure must have unit norm")
    grid = np.asarray(grid, dtype=float)
    if not family.is_unital(grid):
        raise ValueError("family is not unital")
    traj = map_trajectory(family, grid)
    a, b = traj(r), traj(-r)
    d = trace_distance(a, b)
    j = evaluate(QuantifierId(Kind.JSD), a, b)
    predicted = 1 - entropy_of_norm(d)
    return float(np.max(np.abs(j - predicted)))


@dataclass
class RobustnessMap:
    """Measure of antipodal pure pairs indexed by the first state's direction."""

    quantifier: str
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    raw: np.ndarray
    reference: float | None

    @property
    def relative(self) -> np.ndarray:
        top = self.values.max()
        return self.values / top if top > 0 else np.zeros_like(self.values)

    @property
    def scaled(self) -> np.ndarray:
        return self.values / self.reference if self.reference else self.relative

    def polar_profile(self) -> np.ndarray:
        """Values averaged over azimuth, one per polar angle."""
        return self.values.mean(axis=1)

    def plateau_width(self, level: float = 0.5) -> float:
        """Total polar-angle range (radians) where the profile is >= ``level`` x max."""
        prof = self.polar_profile()
        if prof.max() <= 0:
            return 0.0
        dtheta = self.theta[1] - self.theta[0]
        return float(np.count_nonzero(prof >= level * prof.max()) * dtheta)


def robustness_map(q, family, grid, n_theta: int = 65, n_phi: int = 16, floor: float = DELTA_REV) -> RobustnessMap:
    """Measure of each pure state paired with its antipode, over a theta-phi grid."""
    q = q if isinstance(q, QuantifierId) else QuantifierId.parse(q)
    if min(n_theta, n_phi) < 8:
        raise ValueError("sphere resolution must be at least 8")
    if q.parametric and q.param is None:
        q = q.with_param(0.5)
    theta = np.linspace(0, np.pi, n_theta)
    phi = np.linspace(0, 2 * np.pi, n_phi, endpoint=False)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    u = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1).reshape(-1, 3)
    floored, raw = revival_sums(q, family, u, -u, grid, floor)
    return RobustnessMap(
        quantifier=q.label(),
        theta=theta,
        phi=phi,
        values=floored.reshape(n_theta, n_phi),
        raw=raw.reshape(n_theta, n_phi),
        reference=REFERENCE_SCALE.get(q.kind),
    )
