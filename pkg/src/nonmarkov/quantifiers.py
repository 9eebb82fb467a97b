"""Distinguishability quantifiers for qubit states.

All entropic quantities are in bits. Arguments are Bloch vectors (trailing
axis 3) or density matrices (trailing shape (2, 2)); results broadcast over
leading axes. Closed-form qubit spectra are used throughout, so even the
relative entropy of non-commuting states needs no matrix logarithm.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .qubit import as_bloch, binary_entropy, entropy_of_norm, trace_norm

LN2 = math.log(2.0)

# Eigenvalues of the second argument below this count as outside the support.
SUPPORT_EPS = 1e-12


class Kind(str, enum.Enum):
    TD = "TD"
    HELSTROM = "Helstrom"
    RELENT = "RelEnt"
    JSD = "JSD"
    SQRT_JSD = "SqrtJSD"
    HOLEVO_SKEW = "HolevoSkew"
    QUANTUM_SKEW = "QuantumSkew"


_PARAMETRIC = {Kind.HELSTROM, Kind.HOLEVO_SKEW, Kind.QUANTUM_SKEW}
_ALIASES = {k.value.lower(): k for k in Kind} | {
    "trace_distance": Kind.TD,
    "sqrt_jsd": Kind.SQRT_JSD,
    "holevo_skew": Kind.HOLEVO_SKEW,
    "quantum_skew": Kind.QUANTUM_SKEW,
    "relative_entropy": Kind.RELENT,
}


@dataclass(frozen=True)
class QuantifierId:
    """A quantifier together with its bias ``p`` or skew ``mu`` if it has one.

    ``param`` is ``None`` either for non-parametric kinds or, for parametric
    kinds, to ask the measure search to sweep it.
    """

    kind: Kind
    param: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.param is not None:
            if self.kind not in _PARAMETRIC:
                raise ValueError(f"{self.kind.value} takes no parameter")
            if not 0 < self.param < 1:
                raise ValueError(f"parameter must lie in (0, 1), got {self.param}")

    @property
    def parametric(self) -> bool:
        return self.kind in _PARAMETRIC

    @property
    def bounded(self) -> bool:
        return self.kind is not Kind.RELENT

    def with_param(self, param: float) -> "QuantifierId":
        return QuantifierId(self.kind, float(param))

    @classmethod
    def parse(cls, text: str) -> "QuantifierId":
        """Parse ``"jsd"``, ``"helstrom:0.7"``, ``"HolevoSkew"`` and the like."""
        name, _, param = text.partition(":")
        try:
            kind = _ALIASES[name.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown quantifier {name!r}") from None
        return cls(kind, float(param) if param else None)

    def label(self) -> str:
        return self.kind.value if self.param is None else f"{self.kind.value}:{self.param:g}"

    def __call__(self, rho, sigma):
        return evaluate(self, rho, sigma)


@dataclass(frozen=True)
class DivergenceValue:
    """An extended real: finite value or +infinity, serialisable without inf."""

    value: float | None
    infinite: bool = False

    @classmethod
    def of(cls, x: float) -> "DivergenceValue":
        return cls(None, True) if math.isinf(x) else cls(float(x), False)

    def __float__(self):
        return math.inf if self.infinite else float(self.value)

    def to_json(self) -> dict:
        return {"value": self.value, "infinite": self.infinite}


def _pair(rho, sigma):
    return as_bloch(rho), as_bloch(sigma)


def _entropy(r):
    return entropy_of_norm(np.linalg.norm(r, axis=-1))


def _check_open_unit(name, x):
    if not 0 < x < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {x}")


def trace_distance(rho, sigma):
    """Half the trace norm of ``rho - sigma``, i.e. half the Bloch distance."""
    r1, r2 = _pair(rho, sigma)
    return 0.5 * np.linalg.norm(r1 - r2, axis=-1)


def td_translation_check(rho, sigma, a, atol: float = 1e-14) -> bool:
    """Probe translation invariance: ``D(rho + A, sigma + A) == D(rho, sigma)``.

    Works on operators, since ``rho + A`` is generally not a state.
    """
    rho, sigma, a = (np.asarray(x, dtype=complex) for x in (rho, sigma, a))
    shifted = 0.5 * trace_norm((rho + a) - (sigma + a))
    plain = 0.5 * trace_norm(rho - sigma)
    return bool(np.all(np.abs(shifted - plain) <= atol))


def helstrom_norm(p: float, rho, sigma):
    """Trace norm of the Helstrom matrix ``p rho - (1 - p) sigma``.

    The eigenvalues are ``((2p - 1) +- |p r1 - (1 - p) r2|) / 2``, so the norm
    is ``max(|2p - 1|, |p r1 - (1 - p) r2|)``.
    """
    _check_open_unit("p", p)
    r1, r2 = _pair(rho, sigma)
    v = np.linalg.norm(p * r1 - (1 - p) * r2, axis=-1)
    return np.maximum(abs(2 * p - 1), v)


def discrimination_probability(q: QuantifierId, rho, sigma):
    """Optimal single-shot success probability ``(1 + ||Delta||) / 2``."""
    if q.kind is Kind.TD:
        return 0.5 * (1 + trace_distance(rho, sigma))
    if q.kind is Kind.HELSTROM:
        p = 0.5 if q.param is None else q.param
        return 0.5 * (1 + helstrom_norm(p, rho, sigma))
    raise ValueError(f"discrimination probability undefined for {q.kind.value}")


def _cross_term(r1, r2):
    """``tr(rho log2 sigma)``; -inf where the support condition fails."""
    s = np.linalg.norm(r2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        proj = np.where(s > 0, np.sum(r1 * r2, axis=-1) / np.where(s > 0, s, 1.0), 0.0)
    lam_hi = 0.5 * (1 + s)
    lam_lo = 0.5 * (1 - s)
    w_hi = 0.5 * (1 + proj)
    w_lo = 0.5 * (1 - proj)
    violated = (lam_lo < SUPPORT_EPS) & (w_lo > SUPPORT_EPS)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo_term = np.where(w_lo > SUPPORT_EPS, w_lo * np.log2(np.maximum(lam_lo, 1e-300)), 0.0)
    out = w_hi * np.log2(lam_hi) + lo_term
    return np.where(violated, -np.inf, out)


def relative_entropy_array(rho, sigma):
    """Vectorised relative entropy in bits, ``np.inf`` on support violation."""
    r1, r2 = _pair(rho, sigma)
    return -_entropy(r1) - _cross_term(r1, r2)


def relative_entropy(rho, sigma) -> DivergenceValue:
    """Quantum relative entropy ``S(rho || sigma)`` of a single pair, in bits."""
    val = relative_entropy_array(rho, sigma)
    if np.ndim(val) != 0:
        raise ValueError("relative_entropy takes a single pair; use relative_entropy_array")
    # roundoff can leave ~-1e-16 for identical states
    return DivergenceValue.of(max(float(val), 0.0))


def asymptotic_discrimination(n: int, rho, sigma) -> float:
    """``1 - exp(-N S)`` with ``S`` converted from bits to nats."""
    if n < 1:
        raise ValueError("N must be a positive integer")
    s = float(relative_entropy(rho, sigma))
    if math.isinf(s):
        return 1.0
    return 1.0 - math.exp(-n * s * math.log(2))


def holevo_chi(mu: float, rho, sigma):
    r1, r2 = _pair(rho, sigma)
    return _entropy(mu * r1 + (1 - mu) * r2) - mu * _entropy(r1) - (1 - mu) * _entropy(r2)


# The three-entropy JSD formula has ~4e-16 absolute error; the second-order
# expansion has relative error ~0.2 ratio^2, ratio being the half-distance
# over the midpoint's gap to the sphere. Each pair takes the smaller error.
JSD_EXPANSION_MAX_RATIO = 1e-2
JSD_EXPANSION_BUDGET = 2e-15


def _radial_gap(x):
    """``(1 / (1 - x) - atanh(c) / c) / x`` with ``c = sqrt(x)``, stable near 0."""
    x = np.asarray(x, dtype=float)
    k = np.arange(10, 0, -1)
    series = np.polyval(2 * k / (2 * k + 1), x)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.sqrt(np.minimum(x, 1 - 1e-16))
        closed = (1 / (1 - x) - np.arctanh(c) / c) / x
    return np.where(x < 1e-2, series, closed)


def _jsd_close(m, d):
    """``J`` of ``m +- d`` to second order: half the entropy Hessian at ``m`` on ``d``."""
    x = np.sum(m * m, axis=-1)
    md = np.sum(m * d, axis=-1)
    dd = np.sum(d * d, axis=-1)
    # entries on the sphere are evaluated but discarded by the caller
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        c = np.sqrt(np.minimum(x, 1 - 1e-16))
        tang = np.where(c > 0, np.arctanh(c) / np.where(c > 0, c, 1.0), 1.0)
        return 0.5 * (tang * dd + _radial_gap(x) * md * md) / LN2


def jsd(rho, sigma):
    """Quantum Jensen-Shannon divergence in bits, in [0, 1].

    The three-entropy difference cancels to ~1e-16 absolute for nearly equal
    states, which ``sqrt`` would inflate to ~1e-8; such pairs are evaluated
    from the local second-order expansion instead.
    """
    r1, r2 = _pair(rho, sigma)
    direct = holevo_chi(0.5, r1, r2)
    m = 0.5 * (r1 + r2)
    d = 0.5 * (r1 - r2)
    gap = 1 - np.linalg.norm(m, axis=-1)
    dist = np.linalg.norm(d, axis=-1)
    near = dist <= JSD_EXPANSION_MAX_RATIO * gap
    if not np.any(near):
        return direct
    local = _jsd_close(m, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(near, dist / gap, 1.0)
    return np.where(near & (ratio * ratio * local <= JSD_EXPANSION_BUDGET), local, direct)


def sqrt_jsd(rho, sigma):
    return np.sqrt(np.maximum(jsd(rho, sigma), 0.0))


def holevo_skew(mu: float, rho, sigma):
    """Holevo chi of the ensemble ``{(mu, rho), (1 - mu, sigma)}`` over ``h(mu)``."""
    _check_open_unit("mu", mu)
    return holevo_chi(mu, rho, sigma) / binary_entropy(mu)


def quantum_skew(mu: float, rho, sigma):
    """Quantum skew divergence, normalised so orthogonal pure states give 1."""
    _check_open_unit("mu", mu)
    r1, r2 = _pair(rho, sigma)
    mix = mu * r1 + (1 - mu) * r2
    first = relative_entropy_array(r1, mix)
    second = relative_entropy_array(r2, mix)
    return mu / math.log2(1 / mu) * first + (1 - mu) / math.log2(1 / (1 - mu)) * second


def triangle_constants(mu: float) -> tuple[float, float]:
    """Prefactors ``(eta_S, eta_K)`` of the fourth-root triangle-like bounds."""
    _check_open_unit("mu", mu)
    h = float(binary_entropy(mu))
    l1, l2 = math.log2(mu), math.log2(1 - mu)
    eta_s = math.log2(1 / (mu * (1 - mu))) * (mu * (1 - mu) / (2 * h * l1**3 * l2**3)) ** 0.25
    eta_k = (8 * mu * (1 - mu) / h**3) ** 0.25
    return eta_s, eta_k


def jsd_bounds_check(rho, sigma, slack: float = 1e-10):
    """Check ``D^2 / 2 <= J <= D``; returns ``(lower_ok, upper_ok)``."""
    d = trace_distance(rho, sigma)
    j = jsd(rho, sigma)
    return (0.5 * d**2 <= j + slack), (j <= d + slack)


def evaluate(q: QuantifierId, rho, sigma):
    """Evaluate quantifier ``q``; parametric kinds need an explicit parameter."""
    if q.parametric and q.param is None:
        raise ValueError(f"{q.kind.value} needs a parameter to be evaluated")
    if q.kind is Kind.TD:
        return trace_distance(rho, sigma)
    if q.kind is Kind.HELSTROM:
        return helstrom_norm(q.param, rho, sigma)
    if q.kind is Kind.RELENT:
        return relative_entropy_array(rho, sigma)
    if q.kind is Kind.JSD:
        return jsd(rho, sigma)
    if q.kind is Kind.SQRT_JSD:
        return sqrt_jsd(rho, sigma)
    if q.kind is Kind.HOLEVO_SKEW:
        return holevo_skew(q.param, rho, sigma)
    return quantum_skew(q.param, rho, sigma)
