"""Sequential model-based search over box-constrained hyperparameters.

A Gaussian process with a Matern-5/2 ARD kernel models the objective on the
unit hypercube; kernel hyperparameters are marginalized by slice sampling,
and the next configuration maximizes expected improvement over a seeded
candidate set.  Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtr

SQRT5 = np.sqrt(5.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

#: Initial space-filling suggestions before the surrogate takes over.
N_INIT = 3
N_CANDIDATES = 1000
N_INCUMBENT_PERTURBATIONS = 10
PERTURBATION_SCALE = 0.05
MCMC_DRAWS = 10
MCMC_BURN_IN = 20


@dataclass(frozen=True)
class Dim:
    name: str
    lower: float
    upper: float
    kind: str = "real"  # "real" or "integer"


@dataclass
class SearchSpace:
    dims: list[Dim]

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("duplicate dimension names")
        for d in self.dims:
            if not d.lower < d.upper:
                raise ValueError(f"dimension {d.name}: lower must be < upper")
            if d.kind not in ("real", "integer"):
                raise ValueError(f"dimension {d.name}: unknown kind {d.kind!r}")

    @property
    def d(self) -> int:
        return len(self.dims)

    def decode(self, u: np.ndarray) -> dict:
        """Unit-cube point -> named values; integer dims round half-up."""
        out = {}
        for j, dim in enumerate(self.dims):
            value = dim.lower + float(u[j]) * (dim.upper - dim.lower)
            if dim.kind == "integer":
                value = int(min(max(np.floor(value + 0.5), dim.lower), dim.upper))
            out[dim.name] = value
        return out

    def encode(self, named: dict) -> np.ndarray:
        u = np.empty(self.d)
        for j, dim in enumerate(self.dims):
            span = dim.upper - dim.lower
            u[j] = min(max((float(named[dim.name]) - dim.lower) / span, 0.0), 1.0)
        return u

    def contains(self, named: dict) -> bool:
        for dim in self.dims:
            if dim.name not in named:
                return False
            value = named[dim.name]
            if not dim.lower <= value <= dim.upper:
                return False
            if dim.kind == "integer" and float(value) != int(value):
                return False
        return True


def default_space() -> SearchSpace:
    """Box constraints for the classifier architecture and SGD settings."""
    return SearchSpace(dims=[
        Dim("lstm1", 64, 320, "integer"),
        Dim("lstm2", 64, 100, "integer"),
        Dim("lstm3", 64, 320, "integer"),
        Dim("lstm4", 64, 320, "integer"),
        Dim("lstm5", 64, 100, "integer"),
        Dim("lstm6", 64, 320, "integer"),
        Dim("dense1", 64, 320, "integer"),
        Dim("dense2", 64, 100, "integer"),
        Dim("dropout1", 0.0, 0.9, "real"),
        Dim("dropout2", 0.0, 0.9, "real"),
        Dim("learning_rate", 0.001, 0.5, "real"),
    ])


@dataclass
class Trial:
    u: np.ndarray
    config: dict
    objective: float | None = None


@dataclass(frozen=True)
class KernelDraw:
    """One posterior draw of GP hyperparameters (log-space where positive)."""

    log_ell: np.ndarray  # per-dimension lengthscales
    log_amp: float       # signal variance
    log_noise: float     # noise variance
    mu0: float           # constant mean

    @property
    def ell(self) -> np.ndarray:
        return np.exp(self.log_ell)

    @property
    def amp(self) -> float:
        return float(np.exp(self.log_amp))

    @property
    def noise(self) -> float:
        return float(np.exp(self.log_noise))


# ---------------------------------------------------------------------------
# Kernel and GP regression
# ---------------------------------------------------------------------------

def matern52(x: np.ndarray, y: np.ndarray, ell: np.ndarray | float, amp: float) -> float:
    """k(r) = amp * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r) with ARD r."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r = np.sqrt(np.sum(((x - y) / ell) ** 2))
    return float(amp * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * np.exp(-SQRT5 * r))


def matern52_matrix(X: np.ndarray, Y: np.ndarray, ell: np.ndarray | float,
                    amp: float) -> np.ndarray:
    Xs = np.asarray(X, dtype=np.float64) / ell
    Ys = np.asarray(Y, dtype=np.float64) / ell
    sq = (np.sum(Xs * Xs, axis=1)[:, None] + np.sum(Ys * Ys, axis=1)[None, :]
          - 2.0 * (Xs @ Ys.T))
    r = np.sqrt(np.maximum(sq, 0.0))
    return amp * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * np.exp(-SQRT5 * r)


def _cholesky_with_jitter(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating jitter from 1e-8 to 1e-4."""
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-8
    eye = np.eye(A.shape[0])
    while jitter <= 1e-4:
        try:
            return np.linalg.cholesky(A + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise ValueError("ill-conditioned covariance matrix")


def gp_posterior(X: np.ndarray, y: np.ndarray, noise: float, mu0: float,
                 ell: np.ndarray | float, amp: float,
                 Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at query points under a constant-mean GP.

    Variances are clamped at zero after the standard subtract-quadratic form.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Xq = np.atleast_2d(np.asarray(Xq, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    K = matern52_matrix(X, X, ell, amp)
    L = _cholesky_with_jitter(K + noise * np.eye(len(X)))
    alpha = cho_solve((L, True), y - mu0, check_finite=False)
    Ks = matern52_matrix(X, Xq, ell, amp)
    mean = mu0 + Ks.T @ alpha
    v = solve_triangular(L, Ks, lower=True, check_finite=False)
    var = amp - np.sum(v * v, axis=0)
    return mean, np.maximum(var, 0.0)


def log_marginal_likelihood(X: np.ndarray, y: np.ndarray, draw: KernelDraw) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    K = matern52_matrix(X, X, draw.ell, draw.amp)
    L = _cholesky_with_jitter(K + draw.noise * np.eye(n))
    resid = y - draw.mu0
    alpha = cho_solve((L, True), resid, check_finite=False)
    return float(-0.5 * resid @ alpha - np.sum(np.log(np.diag(L)))
                 - 0.5 * n * np.log(2.0 * np.pi))


def expected_improvement(mean: np.ndarray, variance: np.ndarray,
                         best: float) -> np.ndarray:
    """Minimization-form EI; equals max(best - mean, 0) at zero variance."""
    mean = np.asarray(mean, dtype=np.float64)
    variance = np.asarray(variance, dtype=np.float64)
    sigma = np.sqrt(np.maximum(variance, 0.0))
    improvement = best - mean
    ei = np.maximum(improvement, 0.0)
    positive = sigma > 0
    if np.any(positive):
        z = improvement[positive] / sigma[positive]
        phi = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        ei = ei.copy()
        ei[positive] = improvement[positive] * ndtr(z) + sigma[positive] * phi
    return np.maximum(ei, 0.0)


# ---------------------------------------------------------------------------
# Kernel-hyperparameter MCMC
# ---------------------------------------------------------------------------

def _slice_sample_coord(logf: Callable[[float], float], x0: float, fx0: float,
                        rng: np.random.Generator, width: float = 1.0,
                        max_steps: int = 100) -> tuple[float, float]:
    """Univariate slice sampling with stepping out (Neal 2003)."""
    threshold = fx0 + np.log(rng.random())
    left = x0 - width * rng.random()
    right = left + width
    steps = max_steps
    while steps > 0 and logf(left) > threshold:
        left -= width
        steps -= 1
    steps = max_steps
    while steps > 0 and logf(right) > threshold:
        right += width
        steps -= 1
    for _ in range(1000):
        x1 = rng.uniform(left, right)
        fx1 = logf(x1)
        if fx1 > threshold:
            return x1, fx1
        if x1 < x0:
            left = x1
        else:
            right = x1
        if right - left < 1e-12:
            break
    return x0, fx0


def sample_kernel_hyperparams(X: np.ndarray, y: np.ndarray, seed,
                              n_draws: int = MCMC_DRAWS,
                              burn_in: int = MCMC_BURN_IN) -> list[KernelDraw]:
    """Slice-sample GP hyperparameters against marginal likelihood + priors.

    Priors: ln ell_i ~ N(0,1), ln amp ~ N(0,1), ln noise ~ N(-6,1),
    mu0 ~ N(mean(y), var(y)).  One draw is kept per sweep after burn-in.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 2:
        raise ValueError("need at least 2 observations")
    d = X.shape[1]
    mean_y = float(y.mean())
    var_y = max(float(y.var()), 1e-8)
    rng = np.random.default_rng(seed)

    theta = np.concatenate([np.zeros(d), [0.0], [-6.0], [mean_y]])

    def log_posterior(vec: np.ndarray) -> float:
        draw = KernelDraw(log_ell=vec[:d], log_amp=vec[d], log_noise=vec[d + 1],
                          mu0=vec[d + 2])
        ll = log_marginal_likelihood(X, y, draw)
        prior = (-0.5 * float(vec[:d] @ vec[:d])
                 - 0.5 * vec[d] ** 2
                 - 0.5 * (vec[d + 1] + 6.0) ** 2
                 - 0.5 * (vec[d + 2] - mean_y) ** 2 / var_y)
        return ll + prior

    current = log_posterior(theta)  # a genuinely infeasible start propagates
    if not np.isfinite(current):
        raise ValueError("ill-conditioned covariance matrix")

    def guarded(vec: np.ndarray) -> float:
        try:
            return log_posterior(vec)
        except ValueError:
            return -np.inf

    draws: list[KernelDraw] = []
    for sweep in range(burn_in + n_draws):
        for j in range(len(theta)):
            def coord_logf(value: float, j=j) -> float:
                candidate = theta.copy()
                candidate[j] = value
                return guarded(candidate)

            theta[j], current = _slice_sample_coord(coord_logf, theta[j], current, rng)
        if sweep >= burn_in:
            draws.append(KernelDraw(log_ell=theta[:d].copy(), log_amp=float(theta[d]),
                                    log_noise=float(theta[d + 1]), mu0=float(theta[d + 2])))
    return draws


# ---------------------------------------------------------------------------
# Suggestion and search loop
# ---------------------------------------------------------------------------

def _latin_hypercube(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    out = np.empty((n, d))
    for j in range(d):
        perm = rng.permutation(n)
        out[:, j] = (perm + rng.random(n)) / n
    return out


def _penalized(objectives: np.ndarray) -> np.ndarray:
    """Map non-finite objectives to worst-finite plus a margin."""
    finite = np.isfinite(objectives)
    if not np.any(finite):
        return np.zeros_like(objectives)
    worst = objectives[finite].max()
    margin = max(3.0 * float(objectives[finite].std()), 1.0)
    return np.where(finite, objectives, worst + margin)


def suggest_next(history: Sequence[Trial], space: SearchSpace, seed: int) -> Trial:
    """Propose the next configuration to evaluate.

    The first N_INIT suggestions come from a seeded Latin hypercube; after
    that, EI averaged over the kernel-hyperparameter draws is maximized over
    seeded random candidates plus perturbations of the incumbent.  Objective
    values are standardized before the GP fit.
    """
    d = space.d
    completed = [t for t in history if t.objective is not None]
    k = len(completed)
    if k < N_INIT:
        design = _latin_hypercube(N_INIT, d, np.random.default_rng([seed, 1618]))
        u = design[k]
        return Trial(u=u.copy(), config=space.decode(u))

    X = np.vstack([t.u for t in completed])
    y = _penalized(np.array([t.objective for t in completed], dtype=np.float64))
    scale = y.std()
    scale = scale if scale > 0 else 1.0
    z = (y - y.mean()) / scale

    draws = sample_kernel_hyperparams(X, z, seed=[seed, k, 7])
    rng = np.random.default_rng([seed, k, 11])
    candidates = rng.random((N_CANDIDATES, d))
    incumbent = X[int(np.argmin(y))]
    perturbed = np.clip(
        incumbent + rng.normal(0.0, PERTURBATION_SCALE, (N_INCUMBENT_PERTURBATIONS, d)),
        0.0, 1.0)
    pool = np.vstack([candidates, perturbed])

    best_z = float(z.min())
    ei_total = np.zeros(len(pool))
    for draw in draws:
        mean, var = gp_posterior(X, z, draw.noise, draw.mu0, draw.ell, draw.amp, pool)
        ei_total += expected_improvement(mean, var, best_z)
    pick = int(np.argmax(ei_total))  # ties resolve to the lowest index
    u = pool[pick]
    return Trial(u=u.copy(), config=space.decode(u))


def run_search(objective: Callable[[dict], float], space: SearchSpace,
               budget: int = 20, seed: int = 0) -> tuple[Trial, list[dict]]:
    """Sequential suggest -> evaluate -> record loop.

    Failing or non-finite evaluations are penalized with +inf and the search
    continues.  Returns the argmin trial and the per-trial trace rows.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    history: list[Trial] = []
    trace: list[dict] = []
    best = np.inf
    for index in range(budget):
        trial = suggest_next(history, space, seed)
        started = time.perf_counter()
        error = None
        try:
            value = float(objective(dict(trial.config)))
        except Exception as exc:
            value = np.inf
            error = str(exc)
        wall = time.perf_counter() - started
        if not np.isfinite(value):
            value = np.inf
        trial.objective = value
        history.append(trial)
        best = min(best, value)
        row = {
            "index": index,
            "config": trial.config,
            "objective": value,
            "best_so_far": best,
            "wall_seconds": wall,
        }
        if error is not None:
            row["error"] = error
        trace.append(row)
    best_trial = min(history, key=lambda t: t.objective)
    return best_trial, trace
