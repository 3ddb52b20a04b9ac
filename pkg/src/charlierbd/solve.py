"""Time integration: the truncated-master-equation reference solver, the
order-N spectral Galerkin solver, the explicit zeroth/first-order closure
solver, and a thinning-based path simulator used as a second oracle.

All solvers are deterministic: identical inputs (and seed) give
bit-identical trajectories.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import closure as _closure
from .basis import CharlierBasis, CoeffVector, project_density
from .closure import MomentState, SurrogateParams, moment_match
from .models import BirthDeathModel, generator_apply

__all__ = [
    "TimeGrid",
    "Trajectory",
    "IntegrationError",
    "SolverError",
    "RateBoundError",
    "integrate",
    "solve_reference",
    "solve_galerkin",
    "solve_closure",
    "simulate_paths",
    "basis_parameter_prepass",
]

log = logging.getLogger("charlierbd")

_Q_FLOOR = 1e-9  # q -> 0 tail limits used below this mean


class IntegrationError(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


class RateBoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Horizon and step layout; dt_out must be an integer multiple of dt_int."""

    t0: float = 0.0
    T: float = 10.0
    dt_out: float = 1e-3
    dt_int: float = 1e-3

    def __post_init__(self):
        if self.T <= self.t0:
            raise ValueError("horizon T must exceed t0")
        if self.dt_int <= 0 or self.dt_out < self.dt_int:
            raise ValueError("need dt_out >= dt_int > 0")

    @property
    def times(self) -> np.ndarray:
        n = int(round((self.T - self.t0) / self.dt_out))
        return self.t0 + self.dt_out * np.arange(n + 1)

    @property
    def substeps(self) -> int:
        n = int(round(self.dt_out / self.dt_int))
        if abs(n * self.dt_int - self.dt_out) > 1e-9 * self.dt_out:
            raise ValueError("dt_out must be an integer multiple of dt_int")
        return n


@dataclass
class Trajectory:
    """Output times plus per-time records and solver diagnostics."""

    times: np.ndarray
    values: np.ndarray | None = None
    pmf: np.ndarray | None = None
    coeffs: np.ndarray | None = None
    mean: np.ndarray | None = None
    variance: np.ndarray | None = None
    cum3: np.ndarray | None = None
    cum4: np.ndarray | None = None
    delay: np.ndarray | None = None
    se_mean: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(rhs, y0, grid: TimeGrid, method: str = "rk4",
              rtol: float = 1e-8, atol: float = 1e-10) -> Trajectory:
    """Integrate y' = rhs(t, y) with dense output on grid.times.

    rk4 is fixed-step at dt_int, aligned with the output grid; rk45 uses
    embedded error control with cubic-Hermite dense output.
    """
    y0 = np.asarray(y0, dtype=float)
    times = grid.times
    if method == "rk4":
        n_sub = grid.substeps
        out = np.empty((times.size, y0.size))
        out[0] = y0
        y = y0.copy()
        h = grid.dt_int
        for i in range(times.size - 1):
            t = times[i]
            for j in range(n_sub):
                y = _rk4_step(rhs, t + j * h, y, h)
            if not np.all(np.isfinite(y)):
                raise IntegrationError(f"non-finite state at t={times[i + 1]:.6g}")
            out[i + 1] = y
        return Trajectory(times=times, values=out,
                          meta={"method": "rk4", "dt_int": h})
    if method == "rk45":
        sol = solve_ivp(rhs, (times[0], times[-1]), y0, method="RK45",
                        t_eval=times, rtol=rtol, atol=atol,
                        dense_output=False)
        if not sol.success:
            raise IntegrationError(sol.message)
        return Trajectory(times=times, values=sol.y.T,
                          meta={"method": "rk45", "rtol": rtol, "atol": atol})
    raise ValueError(f"unknown integrator {method!r}")


def _pmf_moments(P: np.ndarray) -> tuple[np.ndarray, ...]:
    """Mean/variance/cum3/cum4 rows of a (n_times, X_max+1) pmf stack."""
    xs = np.arange(P.shape[1], dtype=float)
    m1 = P @ xs
    m2 = P @ xs**2
    m3 = P @ xs**3
    m4 = P @ xs**4
    return _raw_to_cumulants(m1, m2, m3, m4)


def _raw_to_cumulants(m1, m2, m3, m4):
    var = m2 - m1**2
    c3 = m3 - 3 * m2 * m1 + 2 * m1**3
    c4 = m4 - 4 * m3 * m1 - 3 * m2**2 + 12 * m2 * m1**2 - 6 * m1**4
    return m1, var, c3, c4


def solve_reference(model: BirthDeathModel, X_max: int, p0,
                    grid: TimeGrid, method: str = "rk4") -> Trajectory:
    """Truncated forward equations p' = A(t) p as numerical ground truth.

    Emits the pmf and direct-sum cumulants at each output time; diagnoses
    mass conservation and the probability mass parked at the truncation
    boundary (warning above 1e-8, error above 1e-6).
    """
    from .basis import PmfVector

    if isinstance(p0, PmfVector):
        p0 = p0.p
    p0 = np.asarray(p0, dtype=float)
    if p0.size != X_max + 1:
        raise ValueError(f"initial pmf length {p0.size} != X_max+1")

    def rhs(t, p):
        return generator_apply(model, t, p)

    traj = integrate(rhs, p0, grid, method=method)
    P = traj.values
    mass_resid = float(np.max(np.abs(P.sum(axis=1) - p0.sum())))
    boundary = float(np.max(np.abs(P[:, -1])))
    if boundary > 1e-6:
        raise SolverError(
            f"boundary mass {boundary:.3e} exceeds 1e-6; increase X_max")
    if boundary > 1e-8:
        warnings.warn(f"boundary mass {boundary:.3e} above 1e-8",
                      RuntimeWarning, stacklevel=2)
    m1, var, c3, c4 = _pmf_moments(P)
    return Trajectory(times=traj.times, pmf=P, mean=m1, variance=var,
                      cum3=c3, cum4=c4,
                      meta={"solver": "reference", "X_max": X_max,
                            "mass_residual": mass_resid,
                            "boundary_mass": boundary,
                            **traj.meta})


def _apply_generator_rows(model: BirthDeathModel, t: float,
                          V: np.ndarray) -> np.ndarray:
    """Generator applied to each row of V over states {0..X_max}."""
    xs = np.arange(V.shape[1])
    b = np.asarray(model.birth(t, xs), dtype=float)
    if b.ndim == 0:
        b = np.full(xs.shape, float(b))
    else:
        b = b.copy()
    d = np.asarray(model.death(t, xs), dtype=float)
    if d.ndim == 0:
        d = np.full(xs.shape, float(d))
    b[-1] = 0.0
    out = -(b + d) * V
    out[:, 1:] += b[:-1] * V[:, :-1]
    out[:, :-1] += d[1:] * V[:, 1:]
    return out


def solve_galerkin(model: BirthDeathModel, basis: CharlierBasis,
                   c0, grid: TimeGrid, method: str = "rk4") -> Trajectory:
    """Order-N spectral solver for the coefficient system c' = M(t) c.

    M_ij(t) projects the generator acting on the Charlier functions back
    onto the basis under the inverse-weighted inner product; it is
    reassembled per integrator stage since rates may be time-varying, with
    the polynomial tables cached once.
    """
    if isinstance(c0, CoeffVector):
        c0 = c0.c
    c0 = np.asarray(c0, dtype=float)
    if c0.size != basis.N + 1:
        raise ValueError("coefficient length does not match basis order")
    Phi = basis.table                       # (N+1, X+1)
    Cw = Phi * basis.weights                # Charlier functions

    def rhs(t, c):
        G = _apply_generator_rows(model, t, Cw)   # A(t) applied to each C~_j
        M = G @ Phi.T                             # M[j, i] = (A C~_j, C_i)
        return c @ M

    traj = integrate(rhs, c0, grid, method=method)
    C = traj.values
    drift = float(np.max(np.abs(C[:, 0] - C[0, 0])))
    if drift > 1e-9:
        warnings.warn(f"zeroth coefficient drift {drift:.3e} above 1e-9",
                      RuntimeWarning, stacklevel=2)
    xs = np.arange(basis.X_max + 1, dtype=float)
    # moment row vectors: E[x^m] = (x^m w Phi^T) . c
    R = np.stack([(xs**m * basis.weights) @ Phi.T for m in (1, 2, 3, 4)])
    m1, m2, m3, m4 = (C @ R.T).T
    mean, var, c3, c4 = _raw_to_cumulants(m1, m2, m3, m4)
    return Trajectory(times=traj.times, coeffs=C, mean=mean, variance=var,
                      cum3=c3, cum4=c4,
                      meta={"solver": "galerkin", "N": basis.N,
                            "a": basis.a, "X_max": basis.X_max,
                            "c0_drift": drift, **traj.meta})


def _closure_rhs(kind: str, params, order: str, flags: dict):
    """Mean(/variance) vector field for the explicit closure solver."""

    def surrogate(mean: float, var: float) -> SurrogateParams:
        s = moment_match(max(mean, _Q_FLOOR),
                         var if order == "first" else None, order=order)
        flags["evals"] += 1
        if s.over_dispersed:
            flags["over_dispersed"] += 1
        return s

    if kind == "infinite_server":
        lam, mu = params.lam, params.mu

        def rhs(t, y):
            if order == "zeroth":
                return np.array([lam(t) - mu * y[0]])
            return np.array([lam(t) - mu * y[0],
                             lam(t) + mu * y[0] - 2 * mu * y[1]])
        return rhs

    if kind in ("erlang_a", "erlang_loss"):
        lam, mu, beta, c = params.lam, params.mu, params.beta, params.c
        cap = params.c + params.k if kind == "erlang_loss" else None

        def rhs(t, y):
            s = surrogate(y[0], y[1] if order == "first" else y[0])
            emin = _closure.expected_min(s, c)
            eovf = _closure.expected_overflow(s, c)
            lam_t = lam(t)
            if cap is None:
                admit = 1.0
                dmean = lam_t - mu * emin - beta * eovf
            else:
                admit = _closure.expected_indicator_below(s, cap)
                dmean = lam_t * admit - mu * emin - beta * eovf
            if order == "zeroth":
                return np.array([dmean])
            cov = _closure.covariance_terms(s, c, z=cap)
            dvar = lam_t * admit + mu * emin + beta * eovf \
                - 2 * (mu * cov.minimum + beta * cov.overflow)
            if cap is not None:
                dvar += 2 * lam_t * cov.below
            return np.array([dmean, dvar])
        return rhs

    if kind == "quadratic":
        lam, qt, beta = params.lam, params.Qtilde, params.beta

        def rhs(t, y):
            s = surrogate(y[0], y[1] if order == "first" else y[0])
            m1 = _closure.surrogate_moment(s, 1)
            m2 = _closure.surrogate_moment(s, 2)
            lam_t = lam(t)
            e_alpha = lam_t * (qt * m1 - m2)
            e_delta = beta * m1
            dmean = e_alpha - e_delta
            if order == "zeroth":
                return np.array([dmean])
            m3 = _closure.surrogate_moment(s, 3)
            cov_q = m2 - m1 * m1
            cov_q2 = m3 - m1 * m2
            cov_alpha = lam_t * (qt * cov_q - cov_q2)
            cov_delta = beta * cov_q
            dvar = e_alpha + e_delta + 2 * (cov_alpha - cov_delta)
            return np.array([dmean, dvar])
        return rhs

    raise ValueError(f"unknown model kind {kind!r}")


def solve_closure(kind: str, params, order: str, init: MomentState,
                  grid: TimeGrid, method: str = "rk4") -> Trajectory:
    """Explicit zeroth/first-order moment-closure trajectories.

    Zeroth order evolves the mean (variance reported as the surrogate's
    q); first order evolves (mean, variance). Queueing kinds also emit the
    delay probability per output time; the over-dispersion fallback
    fraction is carried in meta.
    """
    if order not in ("zeroth", "first"):
        raise ValueError(f"unknown closure order {order!r}")
    flags = {"evals": 0, "over_dispersed": 0}
    rhs = _closure_rhs(kind, params, order, flags)
    y0 = np.array([init.mean] if order == "zeroth"
                  else [init.mean, init.variance], dtype=float)
    traj = integrate(rhs, y0, grid, method=method)
    mean = traj.values[:, 0]
    var = traj.values[:, 1] if order == "first" else mean.copy()
    delay = None
    if kind in ("erlang_a", "erlang_loss"):
        c = params.c
        delay = np.empty_like(mean)
        for i, (m, v) in enumerate(zip(mean, var)):
            s = moment_match(max(m, _Q_FLOOR),
                             v if order == "first" else None, order=order)
            delay[i] = _closure.delay_probability(s, c)
    frac = flags["over_dispersed"] / max(flags["evals"], 1)
    return Trajectory(times=traj.times, mean=mean, variance=var, delay=delay,
                      meta={"solver": "closure", "kind": kind, "order": order,
                            "over_dispersed_fraction": frac, **traj.meta})


def basis_parameter_prepass(kind: str, params, init: MomentState,
                            grid: TimeGrid) -> float:
    """Default Galerkin basis parameter: time-averaged zeroth-closure mean.

    One cheap fixed-step pre-pass on a coarsened grid.
    """
    coarse = TimeGrid(t0=grid.t0, T=grid.T,
                      dt_out=max(grid.dt_out, (grid.T - grid.t0) / 200),
                      dt_int=max(grid.dt_int, (grid.T - grid.t0) / 2000))
    traj = solve_closure(kind, params, "zeroth", init, coarse)
    a = float(np.mean(traj.mean))
    return max(a, _Q_FLOOR)


def simulate_paths(model: BirthDeathModel, n_paths: int, seed: int,
                   grid: TimeGrid, x0: int = 0, x0_dist: str = "point",
                   window: float = 0.05, bound_margin: float = 1.5,
                   jackknife_groups: int = 100) -> Trajectory:
    """Exact-in-law paths by thinning a dominating homogeneous process.

    Between jumps the state is fixed, so each path's total rate is a
    function of t alone; it is bounded over a rolling window by a sampled
    maximum times a safety margin, and the run aborts if the bound is ever
    violated at an accepted candidate. Rate callables must broadcast over
    array (t, x). Emits empirical cumulants with delete-a-group jackknife
    standard errors for the mean; deterministic for a fixed seed.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    rng = np.random.default_rng(seed)
    times = grid.times
    if x0_dist == "point":
        xs = np.full(n_paths, x0, dtype=np.int64)
    elif x0_dist == "poisson":
        xs = rng.poisson(float(x0), size=n_paths).astype(np.int64)
    else:
        raise ValueError(f"unknown initial distribution {x0_dist!r}")
    ts = np.full(n_paths, times[0])
    out = np.empty((times.size, n_paths), dtype=np.int64)
    out[0] = xs
    offsets = np.linspace(0.0, 1.0, 5)

    def total_rate(tq, xq):
        b = np.asarray(model.birth(tq, xq), dtype=float)
        d = np.asarray(model.death(tq, xq), dtype=float)
        return np.broadcast_to(b + d, np.shape(xq)), \
            np.broadcast_to(b, np.shape(xq))

    for i in range(1, times.size):
        t_end = times[i]
        while True:
            active = np.nonzero(ts < t_end)[0]
            if active.size == 0:
                break
            ta = ts[active]
            xa = xs[active]
            w = np.minimum(window, t_end - ta)
            B = np.zeros(active.size)
            for o in offsets:
                tot, _ = total_rate(ta + o * w, xa)
                B = np.maximum(B, tot)
            B *= bound_margin
            safe_B = np.where(B > 0, B, 1.0)
            tau = np.where(B > 0,
                           rng.exponential(1.0, size=active.size) / safe_B,
                           np.inf)
            hit = tau <= w
            t_new = np.where(hit, ta + tau, ta + w)
            if np.any(hit):
                idx = np.nonzero(hit)[0]
                tot, b = total_rate(t_new[idx], xa[idx])
                Bh = B[idx]
                if np.any(tot > Bh * (1 + 1e-12)):
                    worst = float(np.max(tot - Bh))
                    raise RateBoundError(
                        f"thinning bound violated by {worst:.3e}; decrease "
                        "window or increase bound_margin")
                u = rng.random(idx.size) * Bh
                step = np.where(u < b, 1, np.where(u < tot, -1, 0))
                xa[idx] = np.maximum(xa[idx] + step, 0)
            ts[active] = t_new
            xs[active] = xa
        out[i] = xs

    vals = out.astype(float)
    m1 = vals.mean(axis=1)
    cent = vals - m1[:, None]
    var = (cent**2).sum(axis=1) / (n_paths - 1)
    c3 = (cent**3).mean(axis=1)
    c4 = (cent**4).mean(axis=1) - 3 * (cent**2).mean(axis=1) ** 2
    se = _jackknife_se_mean(vals, min(jackknife_groups, n_paths))
    return Trajectory(times=times, mean=m1, variance=var, cum3=c3, cum4=c4,
                      se_mean=se,
                      meta={"solver": "simulate", "n_paths": n_paths,
                            "seed": seed, "window": window})


def _jackknife_se_mean(vals: np.ndarray, g: int) -> np.ndarray:
    """Delete-a-group jackknife standard error of the per-time mean."""
    n_times, n_paths = vals.shape
    groups = np.array_split(np.arange(n_paths), g)
    total = vals.sum(axis=1)
    est = total / n_paths
    reps = np.empty((g, n_times))
    for j, idx in enumerate(groups):
        reps[j] = (total - vals[:, idx].sum(axis=1)) / (n_paths - idx.size)
    return np.sqrt((g - 1) / g * ((reps - est) ** 2).sum(axis=0))
