"""Seeded random qubit states, pairs, sphere lattices and random maps.

Every generator is a counter-based Philox bit generator. Independent
streams come from ``SeedSequence.spawn``, so a worker's stream depends only on
the root seed and its index, never on scheduling.
"""

from __future__ import annotations

import numpy as np

from .qubit import AffineMap

SAMPLING_CONVENTION = "uniform in the unit ball (radius = U^(1/3))"


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, n: int) -> list[np.random.Generator]:
    """``n`` independent streams derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def random_directions(rng, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_states(rng, n: int) -> np.ndarray:
    """``n`` Bloch vectors uniform in the closed unit ball."""
    return random_directions(rng, n) * np.cbrt(rng.random(n))[:, None]


def random_state(rng) -> np.ndarray:
    return random_states(make_rng(rng), 1)[0]


def random_pair(rng) -> tuple[np.ndarray, np.ndarray]:
    rng = make_rng(rng)
    return random_state(rng), random_state(rng)


def random_pairs(rng, n: int, pure_fraction: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """``n`` independent pairs; each state is pure with probability ``pure_fraction``."""
    rng = make_rng(rng)
    out = []
    for _ in range(2):
        r = random_states(rng, n)
        pure = rng.random(n) < pure_fraction
        r[pure] /= np.linalg.norm(r[pure], axis=1, keepdims=True)
        out.append(r)
    return out[0], out[1]


def random_pure_states(rng, n: int) -> np.ndarray:
    return random_directions(make_rng(rng), n)


def fibonacci_sphere(n: int) -> np.ndarray:
    """Near-uniform unit vectors on a golden-angle spiral (deterministic)."""
    if n < 1:
        raise ValueError("need at least one direction")
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    rho = np.sqrt(np.clip(1 - z * z, 0, None))
    phi = np.pi * (3 - np.sqrt(5)) * k
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def random_rotation(rng) -> np.ndarray:
    """Haar-random element of SO(3)."""
    q, r = np.linalg.qr(make_rng(rng).standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_cp_phase_covariant(rng, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n`` random CPTP phase-covariant maps as ``(eta_par, eta_perp, kappa)`` rows.

    Rejection-samples the cube ``eta_par in [-1, 1], eta_perp in [-1, 1],
    kappa in [-1, 1]`` against the complete-positivity conditions.
    """
    rng = make_rng(rng)
    rows = []
    while sum(len(r) for r in rows) < n:
        par, perp, kap = rng.uniform(-1, 1, (3, 4 * n))
        ok = (par + kap <= 1) & (par - kap <= 1) & (1 + par >= np.sqrt(4 * perp**2 + kap**2))
        rows.append(np.stack([par[ok], perp[ok], kap[ok]], axis=1))
    rows = np.concatenate(rows)[:n]
    diag = np.stack([rows[:, 1], rows[:, 1], rows[:, 0]], axis=1)
    shift = np.zeros_like(diag)
    shift[:, 2] = rows[:, 2]
    return diag, shift


def random_rate_segments(rng, n_segments: int, scale: float = 2.0) -> list[tuple[float, float, float]]:
    """Non-negative rate triples, each exponential with mean ``scale``."""
    rng = make_rng(rng)
    return [tuple(float(x) for x in rng.exponential(scale, 3)) for _ in range(n_segments)]


NONPOSITIVE_SAMPLING = "lambda_i ~ U(-1.5, 1.5), kappa uniform in ball of radius 0.5; keep maps sending some state outside the ball whose PD has interior"


def random_nonpositive_maps(rng, n: int, lam: float = 1.5, kappa_radius: float = 0.5) -> list[AffineMap]:
    """Random affine maps that push some state outside the ball.

    A candidate is kept only if it is not positive and its positivity domain
    contains an open set (the centre of the PD ellipsoid maps strictly
    inside the ball with room to spare).
    """
    from .domains import is_positive, pd_has_interior

    rng = make_rng(rng)
    out = []
    while len(out) < n:
        diag = rng.uniform(-lam, lam, 3)
        shift = random_states(rng, 1)[0] * kappa_radius
        m = AffineMap(diag, shift)
        if is_positive(m) or not pd_has_interior(m):
            continue
        out.append(m)
    return out
