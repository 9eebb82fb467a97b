"""Phase-covariant qubit dynamics, divisibility diagnostics and pure dephasing.

A phase-covariant map contracts the Bloch ball by ``eta_perp`` in the x-y
plane and by ``eta_par`` along z, then shifts it by ``kappa`` along z. Times
are in whatever unit the family's functions use (dimensionless ``tau`` for
the counterexample).
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .qubit import AffineMap, compose_affine, invert_affine

FD_STEP = 1e-5
CP_TOL = 1e-9
DIV_TOL = 1e-9

Fn = Callable[[np.ndarray], np.ndarray]


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PhaseCovariantFamily:
    """Time-parametric phase-covariant map given by ``eta_par, eta_perp, kappa``.

    Derivative callables are optional; :func:`rates` falls back to central
    differences with step :data:`FD_STEP` when they are missing.
    ``identity_atol`` documents how closely ``eval_map(0)`` matches the
    identity (smoothed families only reach it approximately).
    """

    eta_par: Fn
    eta_perp: Fn
    kappa: Fn
    d_eta_par: Fn | None = None
    d_eta_perp: Fn | None = None
    d_kappa: Fn | None = None
    name: str = "phase-covariant"
    params: dict = field(default_factory=dict)
    identity_atol: float = 1e-9

    def functions(self, t):
        t = np.asarray(t, dtype=float)
        return (
            np.broadcast_to(self.eta_par(t), t.shape).astype(float),
            np.broadcast_to(self.eta_perp(t), t.shape).astype(float),
            np.broadcast_to(self.kappa(t), t.shape).astype(float),
        )

    def derivatives(self, t, h: float = FD_STEP):
        t = np.asarray(t, dtype=float)
        out = []
        for fn, dfn in (
            (self.eta_par, self.d_eta_par),
            (self.eta_perp, self.d_eta_perp),
            (self.kappa, self.d_kappa),
        ):
            if dfn is not None:
                out.append(np.broadcast_to(dfn(t), t.shape).astype(float))
            else:
                out.append((np.asarray(fn(t + h)) - np.asarray(fn(t - h))) / (2 * h))
        return tuple(out)

    def eval_map(self, t) -> AffineMap:
        return eval_map(self, t)

    def is_unital(self, grid, atol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.functions(grid)[2]) <= atol))


def eval_map(family: PhaseCovariantFamily, t) -> AffineMap:
    """Bloch action of the map at time(s) ``t``: ``diag(perp, perp, par)``, shift ``(0, 0, kappa)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    par, perp, kap = family.functions(t)
    diag = np.stack([perp, perp, par], axis=-1)
    shift = np.stack([np.zeros_like(kap), np.zeros_like(kap), kap], axis=-1)
    return AffineMap(diag, shift)


def intermediate_map(family: PhaseCovariantFamily, s: float, t: float) -> AffineMap:
    """``Phi_t Phi_s^{-1}``, the propagator from time ``s`` to ``t``."""
    if not t >= s >= 0:
        raise ValueError("need t >= s >= 0")
    return compose_affine(eval_map(family, t), invert_affine(eval_map(family, s)))


def cp_check(family: PhaseCovariantFamily, grid, tol: float = CP_TOL) -> np.ndarray:
    """Complete positivity of ``Phi_t`` at each grid time."""
    par, perp, kap = family.functions(grid)
    return (
        (par + kap <= 1 + tol)
        & (par - kap <= 1 + tol)
        & (1 + par >= np.sqrt(4 * perp**2 + kap**2) - tol)
    )


@dataclass(frozen=True)
class RateTriple:
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    gamma_z: np.ndarray


def rates(family: PhaseCovariantFamily, t, h: float = FD_STEP) -> RateTriple:
    """Master-equation rates of the family at ``t``.

    Raises:
        ValueError: if ``eta_par`` or ``eta_perp`` is not positive at some
            ``t`` (the map is not invertible there and the rates diverge).
    """
    par, perp, kap = family.functions(t)
    if np.any(par <= 0) or np.any(perp <= 0):
        bad = np.asarray(t, dtype=float)[(par <= 0) | (perp <= 0)]
        raise ValueError(f"non-positive eta at t={bad.ravel()[:3]}")
    dpar, dperp, dkap = family.derivatives(t, h)
    log_dpar = dpar / par
    gamma_plus = 0.5 * (dkap - (1 + kap) * log_dpar)
    gamma_minus = 0.5 * (-dkap - (1 - kap) * log_dpar)
    gamma_z = 0.25 * (log_dpar - 2 * dperp / perp)
    return RateTriple(gamma_plus, gamma_minus, gamma_z)


def reconstruct_from_rates(
    rate_fn: Callable[[float], RateTriple], initial, t_end: float, step: float = 1e-3
):
    """Integrate the phase-covariant equations of motion with classical RK4.

    ``d eta_par = -(g+ + g-) eta_par``,
    ``d eta_perp = -((g+ + g-)/2 + 2 g_z) eta_perp``,
    ``d kappa = (g+ - g-) - (g+ + g-) kappa``.

    Returns ``(times, states)`` with ``states[:, 0:3] = (eta_par, eta_perp, kappa)``.
    """

    def rhs(t, y):
        g = rate_fn(t)
        total = float(g.gamma_plus + g.gamma_minus)
        return np.array(
            [
                -total * y[0],
                -(0.5 * total + 2 * float(g.gamma_z)) * y[1],
                float(g.gamma_plus - g.gamma_minus) - total * y[2],
            ]
        )

    n = int(round(t_end / step))
    times = np.arange(n + 1) * step
    states = np.empty((n + 1, 3))
    y = np.asarray(initial, dtype=float)
    states[0] = y
    for i in range(n):
        t = times[i]
        k1 = rhs(t, y)
        k2 = rhs(t + step / 2, y + step / 2 * k1)
        k3 = rhs(t + step / 2, y + step / 2 * k2)
        k4 = rhs(t + step, y + step * k3)
        y = y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        states[i + 1] = y
    return times, states


# divisibility labels, ordered from best to worst
CP_DIVISIBLE = "CP"
P_DIVISIBLE = "P"
P_BOUNDARY = "P-boundary"
NOT_P_DIVISIBLE = "not-P"
SINGULAR = "singular"


@dataclass(frozen=True)
class DivisibilityVerdict:
    """Per-grid-point divisibility labels.

    ``labels`` holds one of ``CP``, ``P`` (P- but not CP-divisible),
    ``P-boundary`` (P condition within ``DIV_TOL`` of zero), ``not-P`` or
    ``singular`` (map not invertible, rates undefined).
    """

    times: np.ndarray
    labels: np.ndarray
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    gamma_z: np.ndarray
    p_condition: np.ndarray
    first_violation: float | None
    first_singular: float | None

    @property
    def cp_divisible(self) -> np.ndarray:
        return self.labels == CP_DIVISIBLE

    @property
    def p_divisible(self) -> np.ndarray:
        return np.isin(self.labels, [CP_DIVISIBLE, P_DIVISIBLE, P_BOUNDARY])


def p_div_check(family: PhaseCovariantFamily, grid, tol: float = DIV_TOL) -> DivisibilityVerdict:
    """Classify every grid point by CP/P divisibility of the generator.

    Points where ``eta_par`` or ``eta_perp`` is not positive are labelled
    ``singular`` rather than aborting the whole scan.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    par, perp, _ = family.functions(grid)
    ok = (par > 0) & (perp > 0)
    n = grid.size
    gp, gm, gz = (np.full(n, np.nan) for _ in range(3))
    if ok.any():
        r = rates(family, grid[ok])
        gp[ok], gm[ok], gz[ok] = r.gamma_plus, r.gamma_minus, r.gamma_z
    cond = np.sqrt(np.clip(gp * gm, 0, None)) + 2 * gz
    nonneg = (gp >= -tol) & (gm >= -tol)

    labels = np.full(n, NOT_P_DIVISIBLE, dtype=object)
    labels[nonneg & (cond > tol)] = P_DIVISIBLE
    labels[nonneg & (cond > -tol) & (cond <= tol)] = P_BOUNDARY
    labels[nonneg & (gz >= -tol)] = CP_DIVISIBLE
    labels[~ok] = SINGULAR

    viol = np.flatnonzero(labels == NOT_P_DIVISIBLE)
    sing = np.flatnonzero(~ok)
    return DivisibilityVerdict(
        times=grid,
        labels=labels.astype(str),
        gamma_plus=gp,
        gamma_minus=gm,
        gamma_z=gz,
        p_condition=cond,
        first_violation=float(grid[viol[0]]) if viol.size else None,
        first_singular=float(grid[sing[0]]) if sing.size else None,
    )


def compose_families(
    f1: PhaseCovariantFamily, f2: PhaseCovariantFamily, t1: float
) -> PhaseCovariantFamily:
    """Run ``f1`` up to ``t1`` and ``f2`` (restarted at zero) afterwards."""
    if t1 <= 0:
        raise ValueError("t1 must be positive")
    p1, q1, k1 = (float(v) for v in f1.functions(np.array(t1)))

    def piecewise(before, after):
        def fn(t):
            t = np.asarray(t, dtype=float)
            late = np.maximum(t - t1, 0.0)
            return np.where(t <= t1, before(np.minimum(t, t1)), after(late))

        return fn

    eta_par = piecewise(f1.eta_par, lambda u: f2.eta_par(u) * p1)
    eta_perp = piecewise(f1.eta_perp, lambda u: f2.eta_perp(u) * q1)
    kappa = piecewise(f1.kappa, lambda u: f2.kappa(u) + f2.eta_par(u) * k1)

    derivs = {}
    if all(f.d_eta_par and f.d_eta_perp and f.d_kappa for f in (f1, f2)):
        derivs = dict(
            d_eta_par=piecewise(f1.d_eta_par, lambda u: f2.d_eta_par(u) * p1),
            d_eta_perp=piecewise(f1.d_eta_perp, lambda u: f2.d_eta_perp(u) * q1),
            d_kappa=piecewise(f1.d_kappa, lambda u: f2.d_kappa(u) + f2.d_eta_par(u) * k1),
        )
    return PhaseCovariantFamily(
        eta_par,
        eta_perp,
        kappa,
        name="composed",
        params={"first": f1.params, "second": f2.params, "t1": t1},
        identity_atol=f1.identity_atol,
        **derivs,
    )


def identity_family() -> PhaseCovariantFamily:
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    return PhaseCovariantFamily(one, one, zero, zero, zero, zero, name="identity")


def constant_rate_family(gamma_plus: float, gamma_minus: float, gamma_z: float) -> PhaseCovariantFamily:
    """Closed-form solution for time-independent rates."""
    total = gamma_plus + gamma_minus
    drift = gamma_plus - gamma_minus
    steady = drift / total if total > 0 else 0.0
    perp_rate = 0.5 * total + 2 * gamma_z

    def kappa(t):
        t = np.asarray(t, dtype=float)
        if total > 0:
            return steady * -np.expm1(-total * t)
        return drift * t

    return PhaseCovariantFamily(
        eta_par=lambda t: np.exp(-total * np.asarray(t, dtype=float)),
        eta_perp=lambda t: np.exp(-perp_rate * np.asarray(t, dtype=float)),
        kappa=kappa,
        d_eta_par=lambda t: -total * np.exp(-total * np.asarray(t, dtype=float)),
        d_eta_perp=lambda t: -perp_rate * np.exp(-perp_rate * np.asarray(t, dtype=float)),
        d_kappa=lambda t: drift * np.exp(-total * np.asarray(t, dtype=float)),
        name="constant-rates",
        params={"gamma_plus": gamma_plus, "gamma_minus": gamma_minus, "gamma_z": gamma_z},
    )


def piecewise_rate_family(segments, durations) -> PhaseCovariantFamily:
    """Chain constant-rate segments; ``segments`` are ``(g+, g-, gz)`` triples.

    ``durations`` gives the length of every segment but the last, which runs
    forever. Non-negative rates make the result CP divisible.
    """
    if len(durations) != len(segments) - 1:
        raise ValueError("need one duration per segment except the last")
    fam = constant_rate_family(*segments[-1])
    for seg, dur in zip(reversed(segments[:-1]), reversed(durations)):
        fam = compose_families(constant_rate_family(*seg), fam, dur)
    return fam


def _counterexample_functions(mu1, mu2, a_par, a_perp, a_kappa, alpha):
    sig = lambda x: special.expit(alpha * x)

    def dsig(x):
        s = sig(x)
        return alpha * s * (1 - s)

    def eta(amp):
        def fn(t):
            t = np.asarray(t, dtype=float)
            return (
                np.exp(-mu1 * t) * sig(1 - t)
                + math.exp(-mu1) * np.exp(-mu2 * (t - 1)) * sig(t - 1) * sig(2 - t)
                + math.exp(-mu1 - mu2) * ((3 - t) + amp * (t - 2)) * sig(t - 2)
            )

        def dfn(t):
            t = np.asarray(t, dtype=float)
            e1 = np.exp(-mu1 * t)
            e2 = math.exp(-mu1) * np.exp(-mu2 * (t - 1))
            lin = (3 - t) + amp * (t - 2)
            return (
                -mu1 * e1 * sig(1 - t)
                - e1 * dsig(1 - t)
                + e2 * (-mu2 * sig(t - 1) * sig(2 - t) + dsig(t - 1) * sig(2 - t) - sig(t - 1) * dsig(2 - t))
                + math.exp(-mu1 - mu2) * ((amp - 1) * sig(t - 2) + lin * dsig(t - 2))
            )

        return fn, dfn

    def kappa(t):
        t = np.asarray(t, dtype=float)
        return a_kappa * t * sig(2 - t) + 2 * a_kappa * ((3 - t) + a_par * (t - 2)) * sig(t - 2)

    def d_kappa(t):
        t = np.asarray(t, dtype=float)
        lin = (3 - t) + a_par * (t - 2)
        return (
            a_kappa * sig(2 - t)
            - a_kappa * t * dsig(2 - t)
            + 2 * a_kappa * ((a_par - 1) * sig(t - 2) + lin * dsig(t - 2))
        )

    return eta(a_par), eta(a_perp), (kappa, d_kappa)


def counterexample_family(
    mu1: float = 5.0,
    mu2: float = 4.0,
    a_par: float = 0.01,
    a_perp: float = 1.01,
    a_kappa: float = 0.45,
    alpha: float = 5.0,
) -> PhaseCovariantFamily:
    """P-indivisible family whose revival only the trace-norm quantifiers see.

    Three stages joined by sigmoids of steepness ``alpha``: a uniform
    contraction (rate ``mu1``), a further contraction (rate ``mu2``) while the
    ball drifts up along z, then a linear stage in which the x-y axes expand
    (``a_perp > 1``) and the z axis collapses (``a_par < 1``). The sigmoid
    smoothing leaves ``eval_map(0)`` within ``exp(-alpha)`` of the identity.

    Note that ``eta_par`` crosses zero shortly after ``tau = 3`` for the
    default parameters; the map is not invertible there.
    """
    (par, dpar), (perp, dperp), (kap, dkap) = _counterexample_functions(
        mu1, mu2, a_par, a_perp, a_kappa, alpha
    )
    return PhaseCovariantFamily(
        par,
        perp,
        kap,
        dpar,
        dperp,
        dkap,
        name="counterexample",
        params=dict(mu1=mu1, mu2=mu2, a_par=a_par, a_perp=a_perp, a_kappa=a_kappa, alpha=alpha),
        identity_atol=math.exp(-alpha),
    )


@dataclass(frozen=True)
class DephasingModel:
    """Pure dephasing by a bosonic bath with ``J(w) = lam w^s / W^(s-1) e^(-w/W)``.

    The decoherence exponent is
    ``Gamma(t) = prefactor * int_0^wmax J(w) (1 - cos w t) / w^2 dw`` and
    ``|gamma(t)| = exp(-Gamma(t))``. ``prefactor=1`` is the default because it
    reproduces the reference revival scales for ``s = 3, lam = 3, W = 1``.
    """

    coupling: float = 3.0
    ohmicity: float = 3.0
    cutoff: float = 1.0
    system_frequency: float = 0.0
    prefactor: float = 1.0
    cutoff_multiple: float = 50.0
    rtol: float = 1e-9

    def spectral_density(self, w):
        w = np.asarray(w, dtype=float)
        s, wc = self.ohmicity, self.cutoff
        return self.coupling * w**s / wc ** (s - 1) * np.exp(-w / wc)

    def exponent(self, t):
        """Decoherence exponent ``Gamma(t)``."""
        return _vectorised(_gamma_exponent, self, t)

    def exponent_rate(self, t):
        """``dGamma/dt = prefactor * int J(w) sin(w t) / w dw``."""
        return _vectorised(_gamma_exponent_rate, self, t)

    def coherence_factor(self, t):
        """``gamma(t) exp(-i w_S t)``, the full factor multiplying ``rho_01``."""
        t = np.asarray(t, dtype=float)
        return dephasing_decoherence(self, t) * np.exp(-1j * self.system_frequency * t)


def _vectorised(fn, model, t):
    t = np.asarray(t, dtype=float)
    out = np.array([fn(model, float(x)) for x in t.ravel()]).reshape(t.shape)
    return out[()] if out.ndim == 0 else out


def _quad(f, upper, rtol):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, 0.0, upper, epsrel=rtol, epsabs=1e-14, limit=2000)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from None
    return val


@functools.lru_cache(maxsize=65536)
def _gamma_exponent(model: DephasingModel, t: float) -> float:
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return 0.0
    s, wc = model.ohmicity, model.cutoff
    scale = model.prefactor * model.coupling / wc ** (s - 1)

    # (1 - cos wt) / w^2 written as 2 sin^2(wt/2) / w^2 to avoid cancellation
    def f(w):
        if w == 0.0:
            return 0.0
        return scale * w ** (s - 2) * math.exp(-w / wc) * 2.0 * math.sin(0.5 * w * t) ** 2

    return _quad(f, model.cutoff_multiple * wc, model.rtol)


@functools.lru_cache(maxsize=65536)
def _gamma_exponent_rate(model: DephasingModel, t: float) -> float:
    if t == 0:
        return 0.0
    s, wc = model.ohmicity, model.cutoff
    scale = model.prefactor * model.coupling / wc ** (s - 1)
    return _quad(
        lambda w: scale * w ** (s - 1) * math.exp(-w / wc) * math.sin(w * t),
        model.cutoff_multiple * wc,
        model.rtol,
    )


def dephasing_decoherence(model: DephasingModel, t):
    """Decoherence function ``gamma(t) = exp(-Gamma(t))`` as a complex array.

    The free rotation ``exp(-i w_S t)`` is kept apart, see
    :meth:`DephasingModel.coherence_factor`.
    """
    return np.exp(-model.exponent(t)).astype(complex)


def dephasing_as_family(model: DephasingModel) -> PhaseCovariantFamily:
    """The dephasing model as a unital family with ``eta_perp = |gamma(t)|``."""
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    perp = lambda t: np.exp(-model.exponent(t))
    dperp = lambda t: -model.exponent_rate(t) * np.exp(-model.exponent(t))
    return PhaseCovariantFamily(
        one,
        perp,
        zero,
        zero,
        dperp,
        zero,
        name="dephasing",
        params=dict(
            coupling=model.coupling,
            ohmicity=model.ohmicity,
            cutoff=model.cutoff,
            system_frequency=model.system_frequency,
            prefactor=model.prefactor,
        ),
    )
