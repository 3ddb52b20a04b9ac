"""Poisson-Charlier polynomials, density projection onto the truncated
Charlier-function basis, reconstruction, and weak expectations.

The normalized three-term recurrence is the single computational
representation; the unnormalized polynomials exist for closed-form
cross-checks. Reconstructions are signed measures by design and are never
clipped to nonnegative values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import adaptive_support_bound, poisson_pmf

__all__ = [
    "CharlierBasis",
    "CoeffVector",
    "PmfVector",
    "charlier_normalized",
    "charlier_unnormalized",
    "charlier_table",
    "project_density",
    "reconstruct",
    "weak_expectation",
    "truncation_error",
]


def charlier_normalized(n: int, a: float, x: int | float) -> float:
    """Normalized Poisson-Charlier polynomial value, orthonormal in l2(w).

    Three-term recurrence, seeded with 1 and (a - x)/sqrt(a), evaluated
    iteratively in one pass.
    """
    if a <= 0:
        raise ValueError(f"basis parameter must be positive, got a={a}")
    if n < 0:
        raise ValueError("polynomial degree must be nonnegative")
    prev = 1.0
    if n == 0:
        return prev
    cur = (a - x) / math.sqrt(a)
    for k in range(1, n):
        prev, cur = cur, ((k + a - x) / math.sqrt(a * (k + 1))) * cur \
            - math.sqrt(k / (k + 1)) * prev
    return cur


def charlier_unnormalized(n: int, a: float, x: int | float) -> float:
    """Unnormalized Charlier polynomial with leading convention C_1 = x - a.

    Recurrence C_{n+1} = (x - n - a) C_n - n a C_{n-1}. Relates to the
    normalized family by C_norm_n = (-1)^n C_n / sqrt(n! a^n).
    """
    if a <= 0:
        raise ValueError(f"basis parameter must be positive, got a={a}")
    if n < 0:
        raise ValueError("polynomial degree must be nonnegative")
    prev = 1.0
    if n == 0:
        return prev
    cur = x - a
    for k in range(1, n):
        prev, cur = cur, (x - k - a) * cur - k * a * prev
    return cur


@dataclass(eq=False)
class CharlierBasis:
    """Basis parameter a, max degree N, and summation bound X_max."""

    a: float
    N: int
    X_max: int | None = None

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"basis parameter must be positive, got a={self.a}")
        if self.N < 0:
            raise ValueError("basis order must be nonnegative")
        if self.X_max is None:
            self.X_max = adaptive_support_bound(self.a)
        if self.N > self.X_max:
            raise ValueError(f"N={self.N} exceeds X_max={self.X_max}")
        self._table = None
        self._weights = None

    @property
    def weights(self) -> np.ndarray:
        if self._weights is None:
            self._weights = poisson_pmf(self.a, self.X_max)
        return self._weights

    @property
    def table(self) -> np.ndarray:
        """Values C_norm_n(x), shape (N+1, X_max+1), one recurrence sweep."""
        if self._table is None:
            self._table = charlier_table(self.N, self.a, self.X_max)
        return self._table


def charlier_table(n_max: int, a: float, x_max: int) -> np.ndarray:
    """Normalized polynomial values for all degrees <= n_max on {0..x_max}."""
    if a <= 0:
        raise ValueError(f"basis parameter must be positive, got a={a}")
    xs = np.arange(x_max + 1, dtype=float)
    out = np.empty((n_max + 1, x_max + 1))
    out[0] = 1.0
    if n_max >= 1:
        out[1] = (a - xs) / math.sqrt(a)
    for k in range(1, n_max):
        out[k + 1] = ((k + a - xs) / math.sqrt(a * (k + 1))) * out[k] \
            - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


@dataclass
class CoeffVector:
    """Spectral coefficients c_0..c_N against a Charlier basis."""

    c: np.ndarray
    basis: CharlierBasis

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.shape != (self.basis.N + 1,):
            raise ValueError(
                f"coefficient length {self.c.shape} does not match basis "
                f"order N={self.basis.N}")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("coefficients must be finite")


@dataclass
class PmfVector:
    """Signed mass vector on the states {0..X_max}.

    True pmfs are nonnegative with unit mass; projections and
    reconstructions may carry negative entries.
    """

    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if not np.all(np.isfinite(self.p)):
            raise ValueError("pmf entries must be finite")

    @property
    def mass(self) -> float:
        return float(self.p.sum())

    @property
    def x_max(self) -> int:
        return self.p.size - 1


def _as_array(p) -> np.ndarray:
    if isinstance(p, PmfVector):
        return p.p
    return np.asarray(p, dtype=float)


def project_density(p, basis: CharlierBasis) -> CoeffVector:
    """Fourier coefficients of p against the Charlier functions.

    c_n = sum_x p(x) C_norm_n(x), the w^{-1}-weighted inner product of p
    with the Charlier functions; c_0 recovers the total mass of p.
    """
    arr = _as_array(p)
    if arr.shape != (basis.X_max + 1,):
        raise ValueError(
            f"pmf length {arr.size} does not match basis X_max={basis.X_max}")
    return CoeffVector(basis.table @ arr, basis)


def reconstruct(coeffs: CoeffVector, x: int | None = None):
    """Signed density w(x; a) * sum_n c_n C_norm_n(x).

    With x=None, returns the full vector over {0..X_max}.
    """
    basis = coeffs.basis
    values = basis.weights * (coeffs.c @ basis.table)
    if x is None:
        return values
    if x > basis.X_max:
        raise ValueError(f"state {x} beyond basis X_max={basis.X_max}")
    return float(values[x])


def weak_expectation(f, coeffs: CoeffVector) -> float:
    """Numerical expectation sum_x f(x) p_N(x) of the reconstruction."""
    basis = coeffs.basis
    if callable(f):
        fx = np.asarray([f(x) for x in range(basis.X_max + 1)], dtype=float)
    else:
        fx = np.asarray(f, dtype=float)
        if fx.shape != (basis.X_max + 1,):
            raise ValueError("function table does not match basis support")
    return float(fx @ reconstruct(coeffs))


def truncation_error(p, basis: CharlierBasis, k: int = 0) -> float:
    """h^k(w^{-1}) norm of the projection residual of p on the basis."""
    from .sobolev import SobolevSpec, seq_norm

    arr = _as_array(p)
    resid = reconstruct(project_density(arr, basis)) - arr
    spec = SobolevSpec(m=k, a=basis.a, weight_mode="w_inverse",
                       X_max=basis.X_max)
    return seq_norm(resid, spec)
