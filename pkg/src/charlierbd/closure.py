"""Moment-closure engine: generic functional-forward-equation right-hand
sides, closed-form expectations of queueing functionals under zeroth- and
first-order Charlier surrogates, moment matching, and delay probability.

Every closed form here is derived by linearity from Poisson expectations,

    E_s[f] = a0 E_P[f] + a1 (E_P[Q f] - q E_P[f]),

with the Q-weighted Poisson expectations reduced through the Chen-Stein
identity E_P[Q g(Q)] = q E_P[g(Q+1)]. The unit tests pin each form against
a brute-force surrogate-sum oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .special import (adaptive_support_bound, lower_tail, poisson_pmf,
                      touchard, upper_tail)

__all__ = [
    "SurrogateParams",
    "MomentState",
    "surrogate_pmf",
    "surrogate_moment",
    "expected_overflow",
    "expected_min",
    "expected_indicator_below",
    "expected_q_times_overflow",
    "expected_q_times_min",
    "expected_q_times_indicator_below",
    "CovarianceTerms",
    "covariance_terms",
    "delay_probability",
    "moment_match",
    "moment_rhs",
    "cumulant_rhs",
    "cumulant_rhs_display",
    "pmf_expectation",
]


@dataclass(frozen=True)
class SurrogateParams:
    """Charlier surrogate p(x) = w(x; q) (a0 + a1 (x - q)).

    a0 = 1 for a probability surrogate; order "zeroth" forces a1 = 0.
    """

    q: float
    a0: float = 1.0
    a1: float = 0.0
    order: str = "zeroth"
    over_dispersed: bool = False

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError(f"surrogate parameter must be positive, got q={self.q}")
        if self.order not in ("zeroth", "first"):
            raise ValueError(f"unknown surrogate order {self.order!r}")
        if self.order == "zeroth" and self.a1 != 0.0:
            raise ValueError("zeroth-order surrogate requires a1 = 0")


@dataclass
class MomentState:
    """Mean, variance, and third/fourth cumulants at a time point."""

    mean: float
    variance: float
    cum3: float = 0.0
    cum4: float = 0.0

    def raw_moments(self) -> tuple[float, float, float, float]:
        m1 = self.mean
        m2 = self.variance + m1 * m1
        m3 = self.cum3 + 3 * m2 * m1 - 2 * m1**3
        m4 = self.cum4 + 4 * m3 * m1 + 3 * m2 * m2 - 12 * m2 * m1 * m1 \
            + 6 * m1**4
        return m1, m2, m3, m4


def surrogate_pmf(s: SurrogateParams, x_max: int | None = None) -> np.ndarray:
    """Tabulated surrogate density w(x; q) (a0 + a1 (x - q)); may be signed."""
    if x_max is None:
        x_max = adaptive_support_bound(max(s.q, 1.0))
    xs = np.arange(x_max + 1)
    return poisson_pmf(s.q, x_max) * (s.a0 + s.a1 * (xs - s.q))


def _surrogate_value(s: SurrogateParams, e0: float, e1: float) -> float:
    """a0 E_P[f] + a1 (E_P[Q f] - q E_P[f]) from the two Poisson blocks."""
    return s.a0 * e0 + s.a1 * (e1 - s.q * e0)


def surrogate_moment(s: SurrogateParams, k: int) -> float:
    """E_s[Q^k] = a0 T_k(q) + a1 (T_{k+1}(q) - q T_k(q))."""
    return _surrogate_value(s, touchard(k, s.q), touchard(k + 1, s.q))


# Poisson(q) building blocks; tails written with argument order (rate q,
# threshold c). Repeated Chen-Stein reduction supplies the Q- and
# Q^2-weighted versions of each functional.

def _pois_overflow(q: float, c: int) -> float:
    """E_P[(Q - c)^+] = q G(q, c-1) - c G(q, c) with G the upper tail."""
    return q * upper_tail(q, c - 1) - c * upper_tail(q, c)


def _pois_q_overflow(q: float, c: int) -> float:
    """E_P[Q (Q - c)^+] = q^2 G(q, c-2) - q (c-1) G(q, c-1)."""
    return q * q * upper_tail(q, c - 2) - q * (c - 1) * upper_tail(q, c - 1)


def _pois_q2_overflow(q: float, c: int) -> float:
    """E_P[Q^2 (Q - c)^+] = q (E_P[Q (Q-(c-1))^+] + E_P[(Q-(c-1))^+])."""
    return q * (_pois_q_overflow(q, c - 1) + _pois_overflow(q, c - 1))


def _pois_ind_below(q: float, z: int) -> float:
    """E_P[1{Q < z}]."""
    return lower_tail(q, z - 1)


def _pois_q_ind_below(q: float, z: int) -> float:
    """E_P[Q 1{Q < z}] = q P(Q < z - 1)."""
    return q * lower_tail(q, z - 2)


def _pois_q2_ind_below(q: float, z: int) -> float:
    """E_P[Q^2 1{Q < z}] = q (E_P[Q 1{Q < z-1}] + P(Q < z - 1))."""
    return q * (_pois_q_ind_below(q, z - 1) + _pois_ind_below(q, z - 1))


def expected_overflow(s: SurrogateParams, c: int) -> float:
    """E_s[(Q - c)^+], the expected number of waiting customers."""
    if c < 0:
        raise ValueError("threshold c must be nonnegative")
    return _surrogate_value(s, _pois_overflow(s.q, c), _pois_q_overflow(s.q, c))


def expected_min(s: SurrogateParams, c: int) -> float:
    """E_s[Q ^ c] via the identity Q ^ c = Q - (Q - c)^+."""
    if c < 0:
        raise ValueError("threshold c must be nonnegative")
    return surrogate_moment(s, 1) - expected_overflow(s, c)


def expected_indicator_below(s: SurrogateParams, z: int) -> float:
    """E_s[1{Q < z}]; the Erlang-loss admission probability at cap z."""
    if z < 0:
        raise ValueError("cap z must be nonnegative")
    return _surrogate_value(s, _pois_ind_below(s.q, z),
                            _pois_q_ind_below(s.q, z))


def expected_q_times_overflow(s: SurrogateParams, c: int) -> float:
    """E_s[Q (Q - c)^+]."""
    if c < 0:
        raise ValueError("threshold c must be nonnegative")
    return _surrogate_value(s, _pois_q_overflow(s.q, c),
                            _pois_q2_overflow(s.q, c))


def expected_q_times_min(s: SurrogateParams, c: int) -> float:
    """E_s[Q (Q ^ c)] = E_s[Q^2] - E_s[Q (Q - c)^+]."""
    return surrogate_moment(s, 2) - expected_q_times_overflow(s, c)


def expected_q_times_indicator_below(s: SurrogateParams, z: int) -> float:
    """E_s[Q 1{Q < z}]."""
    if z < 0:
        raise ValueError("cap z must be nonnegative")
    return _surrogate_value(s, _pois_q_ind_below(s.q, z),
                            _pois_q2_ind_below(s.q, z))


@dataclass
class CovarianceTerms:
    """Cov[Q, .] assemblies under one surrogate, as E[XY] - E[X]E[Y]."""

    overflow: float
    minimum: float
    below: float | None = None


def covariance_terms(s: SurrogateParams, c: int,
                     z: int | None = None) -> CovarianceTerms:
    mean = surrogate_moment(s, 1)
    cov_ovf = expected_q_times_overflow(s, c) - mean * expected_overflow(s, c)
    cov_min = expected_q_times_min(s, c) - mean * expected_min(s, c)
    cov_below = None
    if z is not None:
        cov_below = expected_q_times_indicator_below(s, z) \
            - mean * expected_indicator_below(s, z)
    return CovarianceTerms(overflow=cov_ovf, minimum=cov_min, below=cov_below)


def delay_probability(s: SurrogateParams, c: int) -> float:
    """P(Q >= c) under the surrogate."""
    if c < 0:
        raise ValueError("threshold c must be nonnegative")
    return 1.0 - expected_indicator_below(s, c)


def moment_match(mean: float, variance: float | None = None,
                 order: str = "zeroth", positive_root: bool = True) -> SurrogateParams:
    """Surrogate parameters tracking a (mean, variance) pair.

    Zeroth order pins q = mean. First order solves mean = q (1 + a1) and
    variance = mean - (q - mean)^2; the a1 >= 0 root q = mean -
    sqrt(mean - variance) is taken by default. The family cannot represent
    variance > mean; such targets fall back to the zeroth-order point with
    the over-dispersion flag set.
    """
    if mean <= 0:
        raise ValueError(f"surrogate mean must be positive, got {mean}")
    if order == "zeroth":
        return SurrogateParams(q=mean, order="zeroth")
    if order != "first":
        raise ValueError(f"unknown surrogate order {order!r}")
    if variance is None:
        raise ValueError("first-order matching needs a variance")
    gap = mean - variance
    if gap < 0:
        return SurrogateParams(q=mean, order="first", over_dispersed=True)
    root = math.sqrt(gap)
    q = mean - root if positive_root else mean + root
    if q <= 0:
        q = mean + root
    return SurrogateParams(q=q, a1=mean / q - 1.0, order="first")


def pmf_expectation(pmf):
    """Expectation functional over a fixed pmf: expect(k, psi) = E[Q^k psi]."""
    from .basis import PmfVector

    if isinstance(pmf, PmfVector):
        pmf = pmf.p
    arr = np.asarray(pmf, dtype=float)
    xs = np.arange(arr.size)

    def expect(k: int, psi) -> float:
        vals = np.asarray(psi(xs), dtype=float)
        if vals.ndim == 0:
            vals = np.full(xs.shape, float(vals))
        return float(np.sum(xs**k * vals * arr))

    return expect


def moment_rhs(m: int, model, t: float, expect) -> float:
    """d/dt E[Q^m] per the functional forward equations.

    sum_{k<m} C(m,k) ( E[Q^k birth] + (-1)^{m-k} E[Q^k death] ); `expect`
    evaluates E[Q^k psi(t, Q)] against the caller's distribution surrogate.
    """
    if m < 1:
        raise ValueError("moment order must be at least 1")
    total = 0.0
    for k in range(m):
        ea = expect(k, lambda x: model.birth(t, x))
        ed = expect(k, lambda x: model.death(t, x))
        total += math.comb(m, k) * (ea + (-1) ** (m - k) * ed)
    return total


def _raw_moment_derivs(model, t, expect) -> tuple[float, float, float, float]:
    return tuple(moment_rhs(m, model, t, expect) for m in (1, 2, 3, 4))


def cumulant_rhs(state: MomentState, model, t: float, expect) -> MomentState:
    """Time derivatives of (mean, variance, cum3, cum4).

    Built by the chain rule from the raw-moment forward equations; see
    `cumulant_rhs_display` for the alternative covariance-form assembly.
    """
    m1, m2, m3, _ = state.raw_moments()
    d1, d2, d3, d4 = _raw_moment_derivs(model, t, expect)
    dmean = d1
    dvar = d2 - 2 * m1 * d1
    dc3 = d3 - 3 * d2 * m1 - 3 * m2 * d1 + 6 * d1 * m1 * m1
    dc4 = d4 - 4 * d3 * m1 - 4 * m3 * d1 + 12 * d2 * m1 * m1 \
        + 24 * m2 * d1 * m1 - 24 * d1 * m1**3 - 6 * d2 * m2
    return MomentState(mean=dmean, variance=dvar, cum3=dc3, cum4=dc4)


def cumulant_rhs_display(state: MomentState, model, t: float,
                         expect) -> MomentState:
    """Covariance-form cumulant derivatives as displayed in the source
    derivation; kept for numerical cross-checks against `cumulant_rhs`
    (the fourth-cumulant line is known to disagree)."""
    m1 = state.mean
    var = state.variance

    def cov(j: int, psi) -> float:
        # Cov[(Q - m1)^j, psi] expanded in raw Q^k psi expectations
        e = [expect(k, psi) for k in range(j + 1)]
        total = 0.0
        for k in range(j + 1):
            total += math.comb(j, k) * (-m1) ** (j - k) * e[k]
        central = [1.0, 0.0, var, state.cum3][j] if j <= 3 else None
        return total - central * e[0]

    ea = expect(0, lambda x: model.birth(t, x))
    ed = expect(0, lambda x: model.death(t, x))
    ca1 = cov(1, lambda x: model.birth(t, x))
    cd1 = cov(1, lambda x: model.death(t, x))
    ca2 = cov(2, lambda x: model.birth(t, x))
    cd2 = cov(2, lambda x: model.death(t, x))
    ca3 = cov(3, lambda x: model.birth(t, x))
    cd3 = cov(3, lambda x: model.death(t, x))
    dmean = ea - ed
    dvar = ea + ed + 2 * ca1 - 2 * cd1
    dc3 = ea - ed + 3 * ca1 + 3 * cd1 + 3 * ca2 - 3 * cd2
    dc4 = ea + ed + 4 * ca1 - 4 * cd1 + 6 * ca2 + 6 * cd2 \
        + 4 * ca3 - 4 * cd3 + 12 * var * (ca1 + cd1)
    return MomentState(mean=dmean, variance=dvar, cum3=dc3, cum4=dc4)
