"""Bayesian optimization of the boosting hyperparameters.

A Matern-5/2 Gaussian process on min-max-normalized inputs serves as the
surrogate; candidates are scored by expected improvement over the best
observed cross-validation score. Heavy-tailed dimensions (gamma, lambda,
alpha, n_estimators) are searched on a log1p scale so the lower decades
get their share of proposals; integer dimensions are rounded whenever the
acquisition is evaluated and come back integral.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .dataset import RecordTable
from .errors import DegenerateInputError, DomainError
from .folds import plain_kfold, stratified_kfold
from .metrics import roc_auc


@dataclass(frozen=True)
class ParamDescriptor:
    name: str
    kind: str   # continuous | integer
    lower: float
    upper: float
    scale: str = "linear"  # linear | log (log1p-based so 0 lower bounds work)

    def __post_init__(self) -> None:
        if self.lower >= self.upper:
            raise DomainError(f"{self.name}: lower must be < upper")
        if self.kind == "integer" and (int(self.lower) != self.lower or int(self.upper) != self.upper):
            raise DomainError(f"{self.name}: integer bounds must be integral")
        if self.kind not in ("continuous", "integer") or self.scale not in ("linear", "log"):
            raise DomainError(f"{self.name}: bad kind/scale")

    def to_unit(self, x: float) -> float:
        if self.scale == "log":
            return (math.log1p(x) - math.log1p(self.lower)) / (math.log1p(self.upper) - math.log1p(self.lower))
        return (x - self.lower) / (self.upper - self.lower)

    def from_unit(self, u: float) -> float:
        u = min(max(u, 0.0), 1.0)
        if self.scale == "log":
            x = math.expm1(math.log1p(self.lower) + u * (math.log1p(self.upper) - math.log1p(self.lower)))
        else:
            x = self.lower + u * (self.upper - self.lower)
        if self.kind == "integer":
            return float(min(max(round(x), self.lower), self.upper))
        return float(min(max(x, self.lower), self.upper))


@dataclass(frozen=True)
class ParamSpace:
    descriptors: tuple[ParamDescriptor, ...]

    @property
    def dim(self) -> int:
        return len(self.descriptors)

    def names(self) -> list[str]:
        return [d.name for d in self.descriptors]

    def normalize(self, params: dict) -> np.ndarray:
        return np.array([d.to_unit(params[d.name]) for d in self.descriptors])

    def denormalize(self, u: np.ndarray) -> dict:
        return {d.name: d.from_unit(u[i]) for i, d in enumerate(self.descriptors)}

    def contains(self, params: dict) -> bool:
        return all(d.lower <= params[d.name] <= d.upper for d in self.descriptors)

    def sobol(self, n: int, seed: int) -> list[dict]:
        sampler = qmc.Sobol(self.dim, scramble=True, seed=seed)
        with warnings.catch_warnings():
            # balance-property advisory for non-power-of-2 draws; the points
            # only seed the search, so uniformity at that level is enough
            warnings.simplefilter("ignore", UserWarning)
            draws = sampler.random(n)
        return [self.denormalize(u) for u in draws]


def space_from_table4() -> ParamSpace:
    """The production search space: seven boosting hyperparameters."""
    return ParamSpace((
        ParamDescriptor("eta", "continuous", 0.01, 1.0, "linear"),
        ParamDescriptor("gamma", "continuous", 0.0, 100.0, "log"),
        ParamDescriptor("max_depth", "integer", 1, 9, "linear"),
        ParamDescriptor("subsample", "continuous", 0.5, 1.0, "linear"),
        ParamDescriptor("lambda", "continuous", 1.0, 100.0, "log"),
        ParamDescriptor("alpha", "continuous", 0.0, 100.0, "log"),
        ParamDescriptor("n_estimators", "integer", 10, 200, "log"),
    ))


@dataclass(frozen=True)
class Trial:
    params: dict
    cv_score: float
    fold_scores: tuple[float, ...]
    elapsed: float
    error: str = ""

    def to_dict(self) -> dict:
        return {"params": self.params, "cv_score": self.cv_score,
                "fold_scores": list(self.fold_scores), "elapsed": self.elapsed,
                "error": self.error}


@dataclass
class GpSurrogate:
    X: np.ndarray            # normalized inputs in [0,1]^d
    y_mean: float
    y_centered: np.ndarray
    length_scales: np.ndarray
    signal_var: float
    noise_var: float
    chol: np.ndarray
    alpha: np.ndarray


def _matern52(r: np.ndarray) -> np.ndarray:
    s = math.sqrt(5.0) * r
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


def _scaled_dist(A: np.ndarray, B: np.ndarray, ls: np.ndarray) -> np.ndarray:
    As = A / ls
    Bs = B / ls
    d2 = np.sum(As ** 2, axis=1)[:, None] + np.sum(Bs ** 2, axis=1)[None, :] - 2.0 * As @ Bs.T
    return np.sqrt(np.maximum(d2, 0.0))


def _nll(theta: np.ndarray, X: np.ndarray, yc: np.ndarray) -> float:
    d = X.shape[1]
    ls = np.exp(theta[:d])
    sf2 = math.exp(theta[d])
    K = sf2 * _matern52(_scaled_dist(X, X, ls))
    K[np.diag_indices_from(K)] += 1e-8 * max(sf2, 1.0)
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return 1e20
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, yc))
    return float(0.5 * yc @ alpha + np.sum(np.log(np.diag(L)))
                 + 0.5 * X.shape[0] * math.log(2.0 * math.pi))


def gp_fit(trials: list[Trial], space: ParamSpace, seed: int = 0) -> GpSurrogate:
    """Fit the surrogate: length-scales and signal variance by multi-start
    Nelder-Mead on the log marginal likelihood, noise as escalating jitter
    until the kernel matrix factorizes."""
    if len(trials) < 2:
        raise DomainError("gp_fit needs at least 2 trials")
    X = np.array([space.normalize(t.params) for t in trials])
    y = np.array([t.cv_score for t in trials])
    if np.allclose(X, X[0], atol=1e-12):
        raise DegenerateInputError("all trials share the same parameters")

    y_mean = float(y.mean())
    yc = y - y_mean
    d = X.shape[1]
    var0 = max(float(yc.var()), 1e-6)

    rng = np.random.default_rng(seed)
    starts = [np.concatenate([np.full(d, math.log(0.3)), [math.log(var0)]])]
    for _ in range(5):
        starts.append(np.concatenate([
            rng.uniform(math.log(0.05), math.log(2.0), size=d),
            [rng.uniform(math.log(var0 * 0.01), math.log(var0 * 100.0))],
        ]))

    best_theta = starts[0]
    best_val = _nll(best_theta, X, yc)
    for start in starts:
        result = minimize(_nll, start, args=(X, yc), method="Nelder-Mead",
                          options={"maxiter": 200, "xatol": 1e-3, "fatol": 1e-6})
        if result.fun < best_val:
            best_val = float(result.fun)
            best_theta = result.x

    ls = np.exp(best_theta[:d])
    sf2 = math.exp(best_theta[d])
    K = sf2 * _matern52(_scaled_dist(X, X, ls))
    noise = 1e-8 * max(sf2, 1.0)
    for _ in range(24):
        try:
            L = np.linalg.cholesky(K + noise * np.eye(X.shape[0]))
            break
        except np.linalg.LinAlgError:
            noise *= 10.0
    else:
        raise DegenerateInputError("kernel matrix cannot be factorized")

    alpha = np.linalg.solve(L.T, np.linalg.solve(L, yc))
    return GpSurrogate(X=X, y_mean=y_mean, y_centered=yc, length_scales=ls,
                       signal_var=sf2, noise_var=noise, chol=L, alpha=alpha)


def _posterior_batch(s: GpSurrogate, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Ks = s.signal_var * _matern52(_scaled_dist(U, s.X, s.length_scales))
    mu = s.y_mean + Ks @ s.alpha
    v = np.linalg.solve(s.chol, Ks.T)
    var = np.maximum(s.signal_var - np.sum(v * v, axis=0), 0.0)
    return mu, np.sqrt(var)


def gp_posterior(s: GpSurrogate, x: np.ndarray) -> tuple[float, float]:
    """Predictive mean and standard deviation at one normalized point."""
    mu, sigma = _posterior_batch(s, np.asarray(x, dtype=np.float64).reshape(1, -1))
    return float(mu[0]), float(sigma[0])


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _norm_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def expected_improvement(mu: float, sigma: float, best: float,
                         direction: str = "maximize") -> float:
    """Closed-form EI; the sigma = 0 limit is the plain improvement."""
    if direction == "minimize":
        gap = best - mu
    elif direction == "maximize":
        gap = mu - best
    else:
        raise DomainError(f"unknown direction {direction!r}")
    if sigma < 0:
        raise DomainError("sigma must be >= 0")
    if sigma == 0.0:
        return max(gap, 0.0)
    z = gap / sigma
    return gap * _norm_cdf(z) + sigma * _norm_pdf(z)


def propose_next(s: GpSurrogate, space: ParamSpace, seed: int,
                 best: float, direction: str = "maximize",
                 n_candidates: int = 1024) -> dict:
    """Argmax of EI over seeded quasi-random candidates plus coordinate-wise
    refinement; ties keep the first point found."""

    def ei_of_unit(U: np.ndarray) -> tuple[np.ndarray, list[dict]]:
        # integer dims round before evaluation so EI is scored where the
        # objective would actually be run
        params = [space.denormalize(u) for u in U]
        U_eval = np.array([space.normalize(p) for p in params])
        mu, sigma = _posterior_batch(s, U_eval)
        ei = np.array([expected_improvement(m, sg, best, direction)
                       for m, sg in zip(mu, sigma)])
        return ei, params

    sampler = qmc.Sobol(space.dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        U = sampler.random(n_candidates)
    ei, params = ei_of_unit(U)
    best_idx = int(np.argmax(ei))
    best_ei = float(ei[best_idx])
    current = U[best_idx].copy()
    best_params = params[best_idx]

    for span in (0.1, 0.02):
        for dim in range(space.dim):
            grid = np.clip(current[dim] + span * np.linspace(-1.0, 1.0, 9), 0.0, 1.0)
            cand = np.repeat(current[None, :], grid.size, axis=0)
            cand[:, dim] = grid
            ei_c, params_c = ei_of_unit(cand)
            k = int(np.argmax(ei_c))
            if ei_c[k] > best_ei:
                best_ei = float(ei_c[k])
                current = cand[k]
                best_params = params_c[k]
    return best_params


def _as_trial(params: dict, result, elapsed: float) -> Trial:
    if isinstance(result, tuple):
        score, folds = result
    else:
        score, folds = float(result), (float(result),)
    folds = tuple(float(f) for f in folds)
    return Trial(params=params, cv_score=float(score), fold_scores=folds,
                 elapsed=elapsed)


def bayes_opt(objective, space: ParamSpace, budget: int = 40, n_init: int = 10,
              direction: str = "maximize", seed: int = 0,
              initial_params: list[dict] | None = None) -> tuple[Trial, list[Trial]]:
    """Quasi-random warmup then fit-propose-evaluate until the budget runs
    out. A failing objective is recorded at the worst score seen so far and
    the loop continues. Fully reproducible for a given seed."""
    if not 2 <= n_init <= budget:
        raise DomainError("need budget >= n_init >= 2")
    if direction not in ("maximize", "minimize"):
        raise DomainError(f"unknown direction {direction!r}")

    points = list(initial_params or [])[:n_init]
    points.extend(space.sobol(n_init - len(points), seed))

    history: list[Trial] = []

    def worst_score() -> float:
        done = [t.cv_score for t in history if not t.error]
        if not done:
            raise DomainError("objective failed on every point so far")
        return min(done) if direction == "maximize" else max(done)

    def evaluate(params: dict) -> None:
        started = time.perf_counter()
        try:
            result = objective(params)
        except Exception as exc:
            elapsed = time.perf_counter() - started
            history.append(Trial(params=params, cv_score=worst_score(),
                                 fold_scores=(), elapsed=elapsed,
                                 error=f"{type(exc).__name__}: {exc}"))
            return
        history.append(_as_trial(params, result, time.perf_counter() - started))

    for params in points:
        evaluate(params)

    for step in range(budget - n_init):
        scores = [t.cv_score for t in history]
        best = max(scores) if direction == "maximize" else min(scores)
        try:
            surrogate = gp_fit(history, space, seed=seed + 101 + step)
            params = propose_next(surrogate, space, seed=seed + 7919 + step,
                                  best=best, direction=direction)
        except DegenerateInputError:
            params = space.sobol(1, seed + 104729 + step)[0]
        evaluate(params)

    key = (lambda t: t.cv_score) if direction == "maximize" else (lambda t: -t.cv_score)
    best_trial = max(history, key=key)
    return best_trial, history


def cross_validate(factory, table: RecordTable, k: int = 5, seed: int = 0,
                   task: str = "classify") -> tuple[float, tuple[float, ...]]:
    """Score a pipeline factory by K-fold CV.

    ``factory()`` must return a fresh unfitted pipeline with ``fit(table)``
    and ``scores(table)``. Imputation is fit inside each training fold and
    SMOTE (classify only) never sees validation rows; both happen inside
    the pipeline's fit. Classification scores ROC AUC, regression scores
    negative RMSE, so higher is better for both.
    """
    if task == "classify":
        if table.special_care is None:
            raise DomainError("classification CV needs special_care labels")
        folds = stratified_kfold(table.special_care, k, seed)
    elif task == "regress":
        if table.days is None:
            raise DomainError("regression CV needs the days target")
        folds = plain_kfold(table.n_patients, k, seed)
    else:
        raise DomainError(f"unknown task {task!r}")

    all_rows = np.arange(table.n_patients)
    fold_scores = []
    for fold in folds:
        train_table = table.select_rows(np.setdiff1d(all_rows, fold))
        valid_table = table.select_rows(fold)
        pipeline = factory()
        pipeline.fit(train_table)
        scores = pipeline.scores(valid_table)
        if task == "classify":
            fold_scores.append(roc_auc(scores, valid_table.special_care))
        else:
            fold_scores.append(-float(np.sqrt(np.mean((scores - valid_table.days) ** 2))))
    return float(np.mean(fold_scores)), tuple(fold_scores)
