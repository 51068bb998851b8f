"""Least-squares recovery of system parameters from (spin detuning, frequency) noise maps."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from spinfridge import model, oracle
from spinfridge.constants import NV_HYPERFINE_OFFSETS
from spinfridge.errors import DomainError
from spinfridge.model import CouplingSplit, SpinBath, SystemParams, ThermalEnv
from spinfridge.workers import worker_count

LOSS_DB_MAX = 10.0

# name -> (unit, transform); rates are fitted in log space, bounded ones through a logistic
PARAMETERS = {
    "g": ("rad/s", "log"),
    "r": ("rad/s", "log"),
    "kappa": ("rad/s", "log"),
    "gamma": ("rad/s", "log"),
    "omega_c": ("rad/s", "log"),
    "temperature": ("K", "log"),
    "loss_db": ("dB", "logistic10"),
    "polarization": ("", "logistic1"),
}


class IdentifiabilityWarning(UserWarning):
    """Free parameters are (nearly) degenerate in the map."""


@dataclass(frozen=True, eq=False)
class NoiseMap:
    """Noise change in dB versus spin detuning (rows) and cavity frequency (columns)."""

    delta_grid: np.ndarray
    omega_grid: np.ndarray
    values: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        d = np.asarray(self.delta_grid, dtype=float)
        w = np.asarray(self.omega_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if d.ndim != 1 or w.ndim != 1 or v.shape != (d.size, w.size):
            raise DomainError(f"map values must have shape ({d.size}, {w.size}), got {v.shape}")
        for name, grid in (("delta", d), ("omega", w)):
            if grid.size > 1 and not np.all(np.diff(grid) > 0):
                raise DomainError(f"{name} grid must be strictly increasing")
        object.__setattr__(self, "delta_grid", d)
        object.__setattr__(self, "omega_grid", w)
        object.__setattr__(self, "values", v)
        if self.sigma is not None:
            s = np.broadcast_to(np.asarray(self.sigma, dtype=float), v.shape).copy()
            if np.any(~(s > 0)):
                raise DomainError("sigma must be positive")
            object.__setattr__(self, "sigma", s)

    @property
    def shape(self):
        return self.values.shape


def forward_model(params, bath, env, loss_db, delta_grid, omega_grid, workers=None):
    """Predicted noise map in dB relative to the unpumped (thermal) floor."""
    delta_grid = np.asarray(delta_grid, dtype=float)
    omega_grid = np.ascontiguousarray(omega_grid, dtype=float)
    n_t = env.n_T(params.omega_c)
    eta = model.loss_transmission(loss_db)
    nets = [oracle.build_network(params, d, bath, env) for d in delta_grid]

    def block(chunk):
        occ = oracle.frequency_spectrum_stack(chunk, omega_grid)
        return 10.0 * np.log10(eta * occ / n_t + (1.0 - eta))

    n = min(worker_count(workers), len(nets))
    if n > 1:
        chunks = [nets[i::n] for i in range(n)]
        with ThreadPoolExecutor(n) as pool:
            parts = list(pool.map(block, chunks))
        rows = np.empty((len(nets), omega_grid.size))
        for i, part in enumerate(parts):
            rows[i::n] = part
    else:
        rows = block(nets)
    return NoiseMap(delta_grid, omega_grid, rows)


def synthetic_map(params, bath, env, loss_db, delta_grid, omega_grid, noise_db=0.0, seed=0):
    """Forward map plus seeded Gaussian noise of ``noise_db`` per point."""
    clean = forward_model(params, bath, env, loss_db, delta_grid, omega_grid)
    if noise_db == 0:
        return clean
    rng = np.random.default_rng(seed)
    noisy = clean.values + noise_db * rng.standard_normal(clean.shape)
    return NoiseMap(clean.delta_grid, clean.omega_grid, noisy, sigma=noise_db)


@dataclass(frozen=True)
class FitOptions:
    hyperfine_offsets: tuple = NV_HYPERFINE_OFFSETS
    split_mode: CouplingSplit = CouplingSplit.PER_ENSEMBLE
    max_iter: int = 200
    ftol: float = 1e-12
    xtol: float = 1e-12
    grad_tol: float = 1e-6
    fd_step: float = 1e-6
    use_sigma: bool = True
    workers: int | None = None


@dataclass(frozen=True)
class FitResult:
    parameters: dict
    units: dict
    free: tuple
    residual_norm: float
    jacobian_condition: float
    covariance_diag: dict | None
    converged: bool
    iterations: int
    gradient_norm: float
    rank_deficient: bool = False
    message: str = ""

    def stderr(self, name):
        if self.covariance_diag is None:
            return None
        return math.sqrt(self.covariance_diag[name])

    def to_dict(self):
        return {
            "parameters": {
                k: {"value": v, "unit": self.units[k], "free": k in self.free}
                for k, v in self.parameters.items()
            },
            "residual_norm": self.residual_norm,
            "jacobian_condition": self.jacobian_condition,
            "covariance_diag": self.covariance_diag,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "rank_deficient": self.rank_deficient,
            "message": self.message,
        }


def _to_internal(name, value):
    kind = PARAMETERS[name][1]
    if kind == "log":
        if not value > 0:
            raise DomainError(f"initial {name} must be positive, got {value!r}")
        return math.log(value)
    top = LOSS_DB_MAX if kind == "logistic10" else 1.0
    if not 0 < value < top:
        raise DomainError(f"initial {name} must lie strictly inside (0, {top}), got {value!r}")
    x = value / top
    return math.log(x / (1.0 - x))


def _to_physical(name, u):
    kind = PARAMETERS[name][1]
    if kind == "log":
        return math.exp(u)
    top = LOSS_DB_MAX if kind == "logistic10" else 1.0
    return top / (1.0 + math.exp(-u))


def _dphys_du(name, value):
    kind = PARAMETERS[name][1]
    if kind == "log":
        return value
    top = LOSS_DB_MAX if kind == "logistic10" else 1.0
    return value * (1.0 - value / top)


def predict(values, noise_map, options=FitOptions(), workers=None):
    """Forward map at named physical ``values`` on the grids of ``noise_map``."""
    params = SystemParams(
        g=values["g"], kappa=values["kappa"], gamma=values["gamma"], r=values["r"],
        omega_c=values["omega_c"],
    )
    bath = SpinBath(values["polarization"], options.hyperfine_offsets, options.split_mode)
    env = ThermalEnv(values["temperature"])
    return forward_model(params, bath, env, values["loss_db"], noise_map.delta_grid,
                         noise_map.omega_grid, workers=workers).values


def _weights(noise_map, options):
    if options.use_sigma and noise_map.sigma is not None:
        return 1.0 / noise_map.sigma
    return np.ones(noise_map.shape)


def residuals(values, noise_map, options=FitOptions()):
    w = _weights(noise_map, options)
    return ((predict(values, noise_map, options) - noise_map.values) * w).ravel()


def fit(noise_map, fixed, init, options=FitOptions()):
    """Damped least squares (MINPACK Levenberg-Marquardt) on dB residuals.

    ``fixed`` and ``init`` together must name every entry of PARAMETERS once.
    The Jacobian is built by central differences in the internal (log /
    logistic) coordinates, one column per worker.
    """
    overlap = set(fixed) & set(init)
    if overlap:
        raise DomainError(f"parameters both fixed and free: {sorted(overlap)}")
    unknown = (set(fixed) | set(init)) - set(PARAMETERS)
    if unknown:
        raise DomainError(f"unknown parameters: {sorted(unknown)}")
    missing = set(PARAMETERS) - set(fixed) - set(init)
    if missing:
        raise DomainError(f"parameters neither fixed nor initialised: {sorted(missing)}")
    free = tuple(n for n in PARAMETERS if n in init)
    units = {n: PARAMETERS[n][0] for n in PARAMETERS}
    if {"g", "polarization"} <= set(free):
        warnings.warn(
            "g and polarization are partially degenerate through the dip depth; "
            "expect a flat valley", IdentifiabilityWarning, stacklevel=2)

    def values_of(u):
        out = dict(fixed)
        out.update({n: _to_physical(n, x) for n, x in zip(free, u)})
        return out

    if not free:
        r = residuals(dict(fixed), noise_map, options)
        return FitResult(dict(fixed), units, (), float(np.linalg.norm(r)), float("nan"), None,
                         True, 0, 0.0, False, "no free parameters")

    n_workers = worker_count(options.workers)
    h = options.fd_step

    def fun(u):
        return residuals(values_of(u), noise_map, options)

    def jac(u):
        def col(i):
            up, dn = u.copy(), u.copy()
            up[i] += h
            dn[i] -= h
            return (fun(up) - fun(dn)) / (2.0 * h)

        if n_workers > 1:
            with ThreadPoolExecutor(n_workers) as pool:
                cols = list(pool.map(col, range(u.size)))
        else:
            cols = [col(i) for i in range(u.size)]
        return np.column_stack(cols)

    u0 = np.array([_to_internal(n, init[n]) for n in free])
    res = least_squares(fun, u0, jac=jac, method="lm", ftol=options.ftol, xtol=options.xtol,
                        gtol=1e-15, max_nfev=options.max_iter)
    u = res.x
    r = fun(u)
    J = jac(u)
    rnorm = float(np.linalg.norm(r))
    grad = J.T @ r
    colnorm = np.linalg.norm(J, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosine = np.abs(grad) / (colnorm * rnorm)
    cosine = float(np.nanmax(cosine)) if rnorm > 0 else 0.0
    # an essentially exact fit leaves only rounding noise in the gradient direction
    exact = rnorm <= 1e-9 * math.sqrt(r.size)
    converged = bool(res.status > 0) and (cosine <= options.grad_tol or exact)
    sv = np.linalg.svd(J, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    rank = int(np.sum(sv > sv[0] * max(J.shape) * np.finfo(float).eps))
    values = values_of(u)
    cov = None
    if rank == len(free):
        cov_u = np.linalg.inv(J.T @ J)
        dof = r.size - len(free)
        if not (options.use_sigma and noise_map.sigma is not None):
            cov_u = cov_u * (rnorm**2 / dof if dof > 0 else float("nan"))
        cov = {n: float(cov_u[i, i] * _dphys_du(n, values[n]) ** 2) for i, n in enumerate(free)}
    elif cond > 1e10:
        warnings.warn("rank-deficient Jacobian; covariance omitted", IdentifiabilityWarning,
                      stacklevel=2)
    return FitResult(
        parameters=values,
        units=units,
        free=free,
        residual_norm=rnorm,
        jacobian_condition=cond,
        covariance_diag=cov,
        converged=converged,
        iterations=int(res.njev or 0),
        gradient_norm=float(np.linalg.norm(grad)),
        rank_deficient=rank < len(free),
        message=str(res.message),
    )


def profile_residual(noise_map, name, grid, fixed, init, options=FitOptions()):
    """Residual norm with ``name`` pinned at each grid value and the rest re-fitted.

    Consecutive points warm-start from the previous optimum.
    """
    if name not in PARAMETERS:
        raise DomainError(f"unknown parameter {name!r}")
    others = {k: v for k, v in init.items() if k != name}
    base_fixed = {k: v for k, v in fixed.items() if k != name}
    out = []
    for value in np.atleast_1d(np.asarray(grid, dtype=float)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IdentifiabilityWarning)
            res = fit(noise_map, {**base_fixed, name: float(value)}, others, options)
        others = {k: res.parameters[k] for k in others}
        out.append(res.residual_norm)
    return np.array(out)


def fig4_truth():
    """Named parameter set of the Fig. 4 fit, in internal units."""
    p = model.FIG4_SYSTEM
    return {
        "g": p.g, "r": p.r, "kappa": p.kappa, "gamma": p.gamma, "omega_c": p.omega_c,
        "temperature": model.FIG4_TEMPERATURE, "loss_db": model.FIG4_LOSS_DB,
        "polarization": model.FIG4_POLARIZATION,
    }


FIG4_FREE = ("g", "r", "kappa", "loss_db")


def default_grids(delta_points=201, omega_points=101):
    """Map grids covering the three hyperfine dips: +-3.5 MHz by +-1 MHz."""
    two_pi = 2 * math.pi
    return (np.linspace(-two_pi * 3.5e6, two_pi * 3.5e6, delta_points),
            np.linspace(-two_pi * 1.0e6, two_pi * 1.0e6, omega_points))
