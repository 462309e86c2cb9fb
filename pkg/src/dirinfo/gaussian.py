"""Stationary Gaussian VAR engine: fitting, analytic one-step prediction
risks, Geweke indices and Gaussian information rates.

Risks are generalized variances ``log det`` of the one-step prediction
error covariance, so every index below is a log variance ratio in Geweke's
classical convention (twice the corresponding Shannon rate in nats).  A
subprocess of a VAR is generally not finite-order autoregressive, so all
risks are computed by projecting on a long but finite window of lagged
values; window length doubles until the reported value is stable.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .core import MeasureValue, TimeSeriesPanel
from .errors import (
    InvalidModel,
    ParamError,
    SingularDesign,
    UnstableFitWarning,
    UnstableModel,
)

DEFAULT_TRUNCATION = 128
MAX_TRUNCATION = 4096
TRUNCATION_TOL = 1e-7


@dataclass(frozen=True)
class VarModel:
    """Gaussian VAR(p): x(t) = sum_j coeffs[j] x(t-j) + w(t), w ~ N(0, noise_cov)."""

    order: int
    coeffs: np.ndarray  # (p, d, d)
    noise_cov: np.ndarray  # (d, d)
    labels: tuple[str, ...]
    _gamma_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        p = int(self.order)
        if p < 1:
            raise InvalidModel("order must be >= 1")
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim == 2:
            coeffs = coeffs[None, :, :]
        if coeffs.ndim != 3 or coeffs.shape[0] != p or coeffs.shape[1] != coeffs.shape[2]:
            raise InvalidModel(f"coeffs must be (order, d, d), got {coeffs.shape}")
        d = coeffs.shape[1]
        noise = np.asarray(self.noise_cov, dtype=float)
        if noise.shape != (d, d):
            raise InvalidModel(f"noise_cov must be ({d}, {d}), got {noise.shape}")
        if np.max(np.abs(noise - noise.T)) > 1e-10:
            raise InvalidModel("noise_cov is not symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (noise + noise.T))
        if eigs.min() <= 0:
            raise InvalidModel("noise_cov must be positive definite")
        labels = tuple(str(x) for x in self.labels)
        if len(labels) != d or len(set(labels)) != d:
            raise InvalidModel(f"need {d} distinct labels")
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        noise = 0.5 * (noise + noise.T)
        noise.setflags(write=False)
        object.__setattr__(self, "order", p)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "noise_cov", noise)
        object.__setattr__(self, "labels", labels)

    @property
    def n_nodes(self) -> int:
        return self.coeffs.shape[1]

    def companion(self) -> np.ndarray:
        p, d = self.order, self.n_nodes
        F = np.zeros((p * d, p * d))
        F[:d] = np.concatenate(self.coeffs, axis=1)
        if p > 1:
            F[d:, :-d] = np.eye((p - 1) * d)
        return F

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))

    @property
    def is_stable(self) -> bool:
        return self.spectral_radius < 1.0


def autocovariance(model: VarModel, max_lag: int) -> np.ndarray:
    """Gamma(h) = E[x(t) x(t-h)'] for h = 0..max_lag, shape (max_lag+1, d, d).

    Gamma(0..p-1) come from the companion-form Lyapunov equation, higher
    lags from the Yule-Walker recursion.
    """
    cached = model._gamma_cache.get("gammas")
    if cached is not None and cached.shape[0] > max_lag:
        return cached[:max_lag + 1]
    if not model.is_stable:
        raise UnstableModel(
            f"spectral radius {model.spectral_radius:.6f} >= 1; no stationary law")
    p, d = model.order, model.n_nodes
    F = model.companion()
    Q = np.zeros((p * d, p * d))
    Q[:d, :d] = model.noise_cov
    big = sla.solve_discrete_lyapunov(F, Q, method="bilinear")
    gammas = np.empty((max(max_lag, p - 1) + 1, d, d))
    for h in range(min(p, max_lag + 1)):
        gammas[h] = big[:d, h * d:(h + 1) * d]
    for h in range(p, max_lag + 1):
        acc = np.zeros((d, d))
        for j in range(1, p + 1):
            g = gammas[h - j] if h - j >= 0 else gammas[j - h].T
            acc += model.coeffs[j - 1] @ g
        gammas[h] = acc
    gammas.setflags(write=False)
    model._gamma_cache["gammas"] = gammas
    return gammas[:max_lag + 1]


# ---------------------------------------------------------------------------
# one-step prediction risks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredictionRisk:
    """Asymptotic one-step prediction error for a target group.

    ``risk`` is ``log det`` of the error covariance, making the nested
    Geweke ratios dimension-consistent for multivariate targets.
    """

    target: tuple[int, ...]
    predictor_spec: tuple
    error_cov: np.ndarray
    risk: float


def _normalize_spec(spec):
    """predictor_spec entries are (nodes, max_lag, include_contemporaneous)."""
    cells = set()
    normalized = []
    for entry in spec:
        nodes, max_lag, contemporaneous = entry
        nodes = tuple(int(a) for a in nodes)
        max_lag = int(max_lag)
        if max_lag < 0:
            raise ParamError("predictor max_lag must be >= 0")
        normalized.append((nodes, max_lag, bool(contemporaneous)))
        for a in nodes:
            for lag in range(1, max_lag + 1):
                cells.add((a, lag))
            if contemporaneous:
                cells.add((a, 0))
    return tuple(normalized), sorted(cells, key=lambda c: (c[1], c[0]))


def prediction_variance(model: VarModel, target, predictors) -> PredictionRisk:
    """Error covariance of the best linear one-step predictor of the target
    nodes from the specified information set.

    ``predictors`` is a list of ``(node set, max lag, include_contemporaneous)``
    groups; lags count backwards from the predicted time step, so lag 0 is a
    contemporaneous regressor.  The computation uses the model's analytic
    autocovariances followed by a finite-order projection.
    """
    target = tuple(int(b) for b in target)
    if not target:
        raise ParamError("target must be nonempty")
    spec, cells = _normalize_spec(predictors)
    for b in target:
        if (b, 0) in cells:
            raise ParamError(f"target node {b} cannot be its own contemporaneous predictor")
    max_lag = max((lag for _, lag in cells), default=0)
    gammas = autocovariance(model, max_lag)

    g0_bb = gammas[0][np.ix_(target, target)]
    if not cells:
        err = g0_bb
    else:
        m = len(cells)
        G = np.empty((m, m))
        for i, (a, la) in enumerate(cells):
            for j, (b, lb) in enumerate(cells):
                G[i, j] = gammas[lb - la][a, b] if lb >= la else gammas[la - lb][b, a]
        c = np.empty((len(target), m))
        for i, b in enumerate(target):
            for j, (a, la) in enumerate(cells):
                c[i, j] = gammas[la][b, a]
        try:
            sol = sla.solve(G, c.T, assume_a="pos")
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(G, c.T, rcond=None)[0]
        err = g0_bb - c @ sol
        err = 0.5 * (err + err.T)
    sign, logdet = np.linalg.slogdet(err)
    if sign <= 0:
        raise SingularDesign("prediction error covariance is singular")
    return PredictionRisk(target=target, predictor_spec=spec,
                          error_cov=err, risk=float(logdet))


# ---------------------------------------------------------------------------
# Geweke indices and Gaussian rates
# ---------------------------------------------------------------------------

GEWEKE_KINDS = ("directed", "instantaneous", "directed_conditional",
                "instantaneous_conditional")


def _risk(model, target, groups, L):
    spec = [(nodes, L, contemp) for nodes, contemp in groups if nodes]
    return prediction_variance(model, target, spec).risk


def _geweke_at(model, a, b, c, kind, side_past_only, L):
    if kind == "directed":
        num = _risk(model, b, [(b, False)], L)
        den = _risk(model, b, [(b, False), (a, False)], L)
    elif kind == "instantaneous":
        num = _risk(model, b, [(b, False), (a, False)], L)
        den = _risk(model, b, [(b, False), (a, True)], L)
    elif kind == "directed_conditional":
        side = (c, not side_past_only)
        num = _risk(model, b, [(b, False), side], L)
        den = _risk(model, b, [(b, False), (a, False), side], L)
    elif kind == "instantaneous_conditional":
        side = (c, not side_past_only)
        num = _risk(model, b, [(b, False), (a, False), side], L)
        den = _risk(model, b, [(b, False), (a, True), side], L)
    else:
        raise ParamError(f"kind must be one of {GEWEKE_KINDS}, got {kind!r}")
    return num - den


def _converge(fn, initial_lag, tol, max_lag):
    L = initial_lag
    value = fn(L)
    while 2 * L <= max_lag:
        nxt = fn(2 * L)
        L *= 2
        if abs(nxt - value) < tol:
            return nxt, L
        value = nxt
    return value, L


def geweke_index(model: VarModel, partition, kind: str, side_past_only: bool = True,
                 initial_lag: int = DEFAULT_TRUNCATION, tol: float = TRUNCATION_TOL,
                 max_lag: int = MAX_TRUNCATION) -> MeasureValue:
    """Geweke log variance-ratio index for the partition's (A, B) pair.

    ``directed``: how much A's past improves the one-step prediction of B
    beyond B's own past.  ``instantaneous``: the further gain from A's
    present.  The ``*_conditional`` kinds add the side set C, through its
    past only when ``side_past_only`` (the convention under which the
    conditional decomposition closes); with ``side_past_only=False`` C's
    present is conditioned on as well.

    The projection window doubles from ``initial_lag`` until the index moves
    by less than ``tol``.  The reported horizon is the window that was used.
    """
    a, b, c = tuple(partition.a), tuple(partition.b), tuple(partition.c)
    value, L = _converge(lambda L: _geweke_at(model, a, b, c, kind, side_past_only, L),
                         initial_lag, tol, max_lag)
    return MeasureValue(value=value, horizon=L, kind="rate")


def gaussian_mi_rate(model: VarModel, a_nodes, b_nodes, conditional_on_past_c: bool = False,
                     initial_lag: int = DEFAULT_TRUNCATION, tol: float = TRUNCATION_TOL,
                     max_lag: int = MAX_TRUNCATION) -> MeasureValue:
    """Mutual information rate between node groups, in the same log
    variance-ratio convention as the Geweke indices.

    Assembled from the marginal and joint one-step prediction problems:
    ``risk(A | own past) + risk(B | own past) - risk(A,B | both pasts)``,
    optionally with the strict past of the remaining nodes C in every
    information set (``conditional_on_past_c``).
    """
    a = tuple(int(x) for x in a_nodes)
    b = tuple(int(x) for x in b_nodes)
    if set(a) & set(b):
        raise ParamError("node groups overlap")
    c = tuple(i for i in range(model.n_nodes) if i not in set(a) | set(b))
    side = (c if conditional_on_past_c else (), False)

    def at(L):
        ra = _risk(model, a, [(a, False), side], L)
        rb = _risk(model, b, [(b, False), side], L)
        rj = _risk(model, a + b, [(a, False), (b, False), side], L)
        return ra + rb - rj

    value, L = _converge(at, initial_lag, tol, max_lag)
    return MeasureValue(value=value, horizon=L, kind="rate")


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def fit_var(panel: TimeSeriesPanel, order: int, method: str = "ols") -> VarModel:
    """Fit a VAR(p) by least squares or multivariate Yule-Walker.

    Columns are mean-centered before fitting.  An unstable fit is returned
    with a warning rather than rejected; downstream operations that need
    stationarity raise :class:`UnstableModel` themselves.
    """
    p = int(order)
    if p < 1:
        raise ParamError("order must be >= 1")
    T, d = panel.n_samples, panel.n_nodes
    if T - p <= p * d:
        raise SingularDesign(
            f"T={T} leaves {T - p} usable rows for {p * d} regressors")
    x = panel.values.astype(float)
    x = x - x.mean(axis=0)

    if method == "ols":
        Y = x[p:]
        Z = np.concatenate([x[p - j:T - j] for j in range(1, p + 1)], axis=1)
        beta, _, rank, _ = np.linalg.lstsq(Z, Y, rcond=None)
        if rank < p * d:
            raise SingularDesign(f"regressor matrix has rank {rank} < {p * d}")
        coeffs = np.stack([beta[(j - 1) * d:j * d].T for j in range(1, p + 1)])
        resid = Y - Z @ beta
        noise = resid.T @ resid / resid.shape[0]
    elif method == "yule_walker":
        gam = np.empty((p + 1, d, d))
        for h in range(p + 1):
            gam[h] = x[h:].T @ x[:T - h] / T
        R = np.empty((p * d, p * d))
        for i in range(1, p + 1):
            for j in range(1, p + 1):
                blk = gam[i - j] if i >= j else gam[j - i].T
                R[(j - 1) * d:j * d, (i - 1) * d:i * d] = blk
        G = np.concatenate([gam[i] for i in range(1, p + 1)], axis=1)
        try:
            A = sla.solve(R.T, G.T).T
        except np.linalg.LinAlgError:
            raise SingularDesign("Yule-Walker system is singular") from None
        coeffs = np.stack([A[:, (j - 1) * d:j * d] for j in range(1, p + 1)])
        noise = gam[0] - sum(coeffs[j - 1] @ gam[j].T for j in range(1, p + 1))
        noise = 0.5 * (noise + noise.T)
    else:
        raise ParamError(f"unknown method {method!r}")

    model = VarModel(order=p, coeffs=coeffs, noise_cov=noise, labels=panel.labels)
    if not model.is_stable:
        warnings.warn(f"fitted VAR is unstable (spectral radius "
                      f"{model.spectral_radius:.4f})", UnstableFitWarning, stacklevel=2)
    return model


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def var_to_json(model: VarModel) -> dict:
    return {
        "order": model.order,
        "labels": list(model.labels),
        "coeffs": [m.tolist() for m in model.coeffs],
        "noise_cov": model.noise_cov.tolist(),
    }


def var_from_json(doc: dict) -> VarModel:
    return VarModel(order=int(doc["order"]),
                    coeffs=np.asarray(doc["coeffs"], dtype=float),
                    noise_cov=np.asarray(doc["noise_cov"], dtype=float),
                    labels=tuple(doc["labels"]))


def save_var(model: VarModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(var_to_json(model), fh)
        fh.write("\n")


def load_var(path) -> VarModel:
    with open(path) as fh:
        return var_from_json(json.load(fh))
