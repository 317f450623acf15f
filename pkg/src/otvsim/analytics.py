"""Closed-form performance heuristics and a delay-ODE oracle for the confluence time.

All of these are mean-field estimates for a single "objective" Tangle under a
constant network delay ``h`` and a stationary tip pool.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .weights import WeightTable


class NoConvergence(RuntimeError):
    pass


# -- Lambert W ---------------------------------------------------------------

_BRANCH_POINT = -1.0 / math.e


def lambert_w(z: float, tol: float = 1e-12, max_iter: int = 100) -> float:
    """Principal branch W0(z) for z >= -1/e via Halley iteration.

    Starts from log(1+z) (fine for z >= 0); near the branch point a short
    series in p = sqrt(2(ez+1)) gives the first guess instead.
    """
    z = float(z)
    if z < _BRANCH_POINT - 1e-15:
        raise ValueError(f"W0 undefined for z={z} < -1/e")
    if z == 0.0:
        return 0.0
    if z <= _BRANCH_POINT:
        return -1.0
    if z < 0:
        p = math.sqrt(2.0 * (math.e * z + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    else:
        w = math.log1p(z)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= tol * (1.0 + abs(w)):
            break
    return w


# -- load parameters ------------------------------------------------------------


@dataclass(frozen=True)
class LoadParams:
    lam: float = 100.0  # blocks per second, whole network
    h: float = 0.1  # constant delay, seconds
    k: int = 8
    theta: float = 2 / 3
    eps: float = 0.5

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.h >= 0:
            raise ValueError("h must be nonnegative")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not 0.5 < self.theta <= 1:
            raise ValueError("theta must be in (0.5, 1]")
        if not 0 < self.eps <= 1:
            raise ValueError("eps must be in (0, 1]")


def ww_growth_bound(t: float, table: WeightTable, lam: float) -> float:
    """Upper bound on the expected WW of a block that everybody sees immediately."""
    if t < 0:
        raise ValueError("t must be >= 0")
    w = table.as_array()
    return float(np.sum(w * -np.expm1(-t * lam * w)))


def expected_tip_pool(p: LoadParams) -> float:
    return p.k * p.lam * p.h / (p.k - 1)


def first_approval_time(p: LoadParams) -> float:
    return p.h + p.h / (p.k - 1)


class ConfluenceTime(NamedTuple):
    exact: float
    large_k: float  # (h / log k) log(lam h)
    large_k_tips: float  # (h / log k) log L0, the intermediate form
    rate: float  # W((k-1)^2/k), the exponential growth rate of K per unit h


def confluence_target(p: LoadParams, eps_mode: str = "printed") -> float:
    L0 = expected_tip_pool(p)
    if eps_mode == "printed":
        return p.eps * L0
    if eps_mode == "one_minus":
        return (1.0 - p.eps) * L0
    raise ValueError(f"unknown eps_mode {eps_mode!r}")


def confluence_time(p: LoadParams, eps_mode: str = "printed") -> ConfluenceTime:
    """Lambert-W closed form plus the large-k shortcuts.

    ``eps_mode="printed"`` uses log L0 + log eps; ``"one_minus"`` targets (1 - eps) L0.
    Both agree at eps = 0.5.
    """
    rate = lambert_w((p.k - 1) ** 2 / p.k)
    L0 = expected_tip_pool(p)
    exact = p.h / rate * math.log(confluence_target(p, eps_mode))
    large_k = p.h / math.log(p.k) * math.log(p.lam * p.h)
    large_k_tips = p.h / math.log(p.k) * math.log(L0)
    return ConfluenceTime(exact, large_k, large_k_tips, rate)


class IssuanceTime(NamedTuple):
    exact: float
    asymptotic: float


def issuance_time_equal_weights(n: int, lam: float, theta: float) -> IssuanceTime:
    """Mean time until ceil(theta N) of N equally weighted nodes have issued once."""
    i = math.ceil(theta * n - 1e-12)
    exact = n / lam * math.fsum(1.0 / (n - j + 1) for j in range(1, i + 1))
    asym = n / lam * -math.log1p(-theta) if theta < 1 else math.inf
    return IssuanceTime(exact, asym)


def issuance_time_general(table: WeightTable, lam: float, theta: float, tol: float = 1e-9) -> float:
    """Time at which ww_growth_bound reaches theta, by bisection."""
    if theta >= 1:
        return math.inf
    lo, hi = 0.0, 1.0
    while ww_growth_bound(hi, table, lam) < theta:
        hi *= 2
        if hi > 1e12:
            raise NoConvergence("growth bound never reaches theta")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ww_growth_bound(mid, table, lam) < theta:
            lo = mid
        else:
            hi = mid
    return hi


def _equal(table: WeightTable) -> bool:
    w = table.as_array()
    return bool(np.all(w == w[0]))


class TTCBound(NamedTuple):
    confluence: float
    issuance: float
    total: float


def ttc_bound(p: LoadParams, table: WeightTable, eps_mode: str = "printed") -> TTCBound:
    """tau_f <= tau_c + tau_iss; the issuance part uses the harmonic sum for equal weights."""
    tc = confluence_time(p, eps_mode).exact if p.h > 0 else 0.0
    if _equal(table):
        ti = issuance_time_equal_weights(table.total_nodes, p.lam, p.theta).exact
    else:
        ti = issuance_time_general(table, p.lam, p.theta)
    return TTCBound(tc, ti, tc + ti)


# -- delay ODE oracle -----------------------------------------------------------


def ode_confluence_oracle(
    p: LoadParams,
    *,
    step: Optional[float] = None,
    history: str = "exp",
    eps_mode: str = "printed",
    horizon_h: float = 1e4,
) -> float:
    """Explicit Euler for dK/dt = (k-1)^2 K(t-h) / (k h), K(0) = 1.

    Returns the first time K reaches the confluence target.  ``history`` fixes
    K on [-h, 0): ``"exp"`` uses the exponential solution itself, ``"const"``
    holds K at 1 and ``"zero"`` starts from nothing.
    """
    h = p.h
    dt = h / 1000 if step is None else step
    if dt > h / 100:
        raise ValueError("step must be <= h/100")
    target = confluence_target(p, eps_mode)
    if target <= 1.0:
        return 0.0
    c = (p.k - 1) ** 2 / (p.k * h)
    lag = int(round(h / dt))
    if history == "exp":
        r = lambert_w((p.k - 1) ** 2 / p.k) / h
        past = deque(math.exp(r * (-lag + j) * dt) for j in range(lag))
    elif history == "const":
        past = deque([1.0] * lag)
    elif history == "zero":
        past = deque([0.0] * lag)
    else:
        raise ValueError(f"unknown history {history!r}")
    K = 1.0
    t = 0.0
    limit = horizon_h * h
    while t < limit:
        delayed = past.popleft()
        past.append(K)
        nxt = K + dt * c * delayed
        if nxt >= target:
            # linear interpolation inside the step
            return t + dt * (target - K) / (nxt - K)
        K = nxt
        t += dt
    raise NoConvergence(f"K did not reach {target} within {limit} s")


def blockchain_security_bound(q: float, lam: float, delta: float) -> bool:
    """q < (1-q) / (1 + (1-q) lam delta): the longest-chain security condition."""
    if not 0 <= q < 1:
        raise ValueError("q must be in [0, 1)")
    if lam * delta < 0:
        raise ValueError("lam * delta must be >= 0")
    return q < (1 - q) / (1 + (1 - q) * lam * delta)
