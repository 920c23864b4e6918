"""Inference on winners: the selected-maximum problem.

Two sampling models are supported. The full-vector model conditions only
on the event that the selected coordinate is the maximum; the winner's
marginal law then involves all means, and inference for the winner's
mean plugs the joint selective MLE in for the non-selected means, which
keeps the inversion one-dimensional. The conditional-on-losers model
conditions additionally on the observed losing values, so the winner
follows a Gaussian truncated to (max losers, infinity).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import log_ndtr, logsumexp

from ._quad import _leggauss, log_integral_gl
from .distributions import std_normal_log_pdf, std_normal_quantile
from .results import InferenceResult
from .selective import invert_equal_tailed

__all__ = [
    "WinnersData",
    "WinnersModelKind",
    "argmax_select",
    "normalizer_full",
    "log_normalizer_full",
    "normalizer_losers",
    "winner_probabilities",
    "infer_winner",
]

_WINDOW_SIGMAS = 12.0
_GL_NODES = 200
_BOUNDARY_TOL = 1e-12


class WinnersModelKind(str, enum.Enum):
    FULL_VECTOR = "full-vector"
    CONDITIONAL_ON_LOSERS = "conditional-on-losers"


def argmax_select(y) -> int:
    """Index of the maximum, lowest index on ties (0-based)."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("need a 1-D vector of length >= 2")
    if np.any(np.isnan(arr)):
        raise ValueError("NaN entries are not orderable")
    return int(np.argmax(arr))


@dataclass(frozen=True, eq=False)
class WinnersData:
    y: np.ndarray
    sigma: float = 1.0
    selected_index: int = None

    def __post_init__(self):
        arr = np.asarray(self.y, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "y", arr)
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        idx = argmax_select(arr) if self.selected_index is None else int(self.selected_index)
        if arr[idx] < arr.max() or idx != int(np.argmax(arr)):
            raise ValueError("selected_index must attain the maximum (ties: lowest index)")
        object.__setattr__(self, "selected_index", idx)

    @property
    def winner(self) -> float:
        return float(self.y[self.selected_index])

    @property
    def losers(self) -> np.ndarray:
        mask = np.ones(len(self.y), dtype=bool)
        mask[self.selected_index] = False
        return self.y[mask]


def _log_win_integrand(pts: np.ndarray, theta1: float, others: np.ndarray,
                       sigma: float) -> np.ndarray:
    z = (pts - theta1) / sigma
    out = std_normal_log_pdf(z) - math.log(sigma)
    out = out + log_ndtr((pts[:, None] - others[None, :]) / sigma).sum(axis=1)
    return out


def _log_win_integral(lo: float, hi: float, theta1: float, others: np.ndarray,
                      sigma: float) -> float:
    return log_integral_gl(
        lambda pts: _log_win_integrand(pts, theta1, others, sigma),
        lo, hi, _GL_NODES,
    )


def log_normalizer_full(theta, sigma: float = 1.0) -> float:
    """log P_theta(Y_1 > Y_i for all i > 1) for independent N(theta_i, sigma^2)."""
    th = np.asarray(theta, dtype=float)
    if th.size < 2:
        raise ValueError("need at least two coordinates")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    t1 = float(th[0])
    lo, hi = t1 - _WINDOW_SIGMAS * sigma, t1 + _WINDOW_SIGMAS * sigma
    return _log_win_integral(lo, hi, t1, th[1:], sigma)


def normalizer_full(theta, sigma: float = 1.0) -> float:
    return math.exp(log_normalizer_full(theta, sigma))


def normalizer_losers(theta1: float, losers, sigma: float = 1.0) -> float:
    """P_theta1(winner beats every loser | observed losers)."""
    arr = np.asarray(losers, dtype=float)
    if arr.size == 0:
        raise ValueError("losers must be nonempty")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    c = float(arr.max())
    return math.exp(float(log_ndtr((theta1 - c) / sigma)))


def winner_probabilities(theta, sigma: float = 1.0) -> np.ndarray:
    """P(coordinate j is the maximum) for each j; sums to one."""
    th = np.asarray(theta, dtype=float)
    m = th.size
    out = np.empty(m)
    for j in range(m):
        rolled = np.concatenate(([th[j]], np.delete(th, j)))
        out[j] = normalizer_full(rolled, sigma)
    return out


# conditional-on-losers model: closed-form truncated Gaussian in log space

def _log_sf(z: float) -> float:
    return float(log_ndtr(-z))


def _conditional_cdf(t: float, c: float, sigma: float, theta: float) -> float:
    """P_theta(T <= t | T > c) for T ~ N(theta, sigma^2)."""
    zt = (t - theta) / sigma
    zc = (c - theta) / sigma
    return -math.expm1(min(_log_sf(zt) - _log_sf(zc), 0.0))


def _conditional_sf(t: float, c: float, sigma: float, theta: float) -> float:
    zt = (t - theta) / sigma
    zc = (c - theta) / sigma
    return math.exp(min(_log_sf(zt) - _log_sf(zc), 0.0))


def _conditional_score(theta: float, t: float, c: float, sigma: float) -> float:
    s = (c - theta) / sigma
    mills = math.exp(float(std_normal_log_pdf(s)) - _log_sf(s))
    return (t - theta) / sigma**2 - mills / sigma


def _conditional_mle(t: float, c: float, sigma: float) -> float:
    # score is decreasing in theta (1-parameter exponential family)
    lo, hi = t - sigma, t + sigma
    while _conditional_score(lo, t, c, sigma) <= 0.0:
        lo -= 2.0 * (t - lo) + sigma
        if t - lo > 1e4 * sigma:
            return -math.inf
    while _conditional_score(hi, t, c, sigma) >= 0.0:
        hi += 2.0 * (hi - t) + sigma
    return float(optimize.brentq(_conditional_score, lo, hi, args=(t, c, sigma),
                                 xtol=1e-10, rtol=1e-15))


def _infer_conditional(t: float, c: float, sigma: float, level: float) -> InferenceResult:
    alpha = 1.0 - level
    diagnostics = {"normalizer": "truncated-gaussian closed form"}
    pvalue = _conditional_sf(t, c, sigma, 0.0)
    if t - c <= _BOUNDARY_TOL * max(1.0, abs(c)):
        diagnostics["flags"] = ["divergent-mle"]
        _, hi = invert_equal_tailed(lambda th: _conditional_cdf(t, c, sigma, th),
                                    level, t, step=sigma,
                                    limit=50.0 * max(1.0, sigma) + abs(t),
                                    diagnostics=diagnostics)
        return InferenceResult(-math.inf, (-math.inf, hi), pvalue,
                               WinnersModelKind.CONDITIONAL_ON_LOSERS.value, diagnostics)
    estimate = _conditional_mle(t, c, sigma)
    limit = 50.0 * max(1.0, sigma) + abs(t)

    def cdf(th):
        return _conditional_cdf(t, c, sigma, th)

    ci = invert_equal_tailed(cdf, level, t, step=sigma, limit=limit,
                             diagnostics=diagnostics)
    return InferenceResult(estimate, ci, pvalue,
                           WinnersModelKind.CONDITIONAL_ON_LOSERS.value, diagnostics)


# full-vector model: joint selective MLE, then a 1-D CDF pivot for the
# winner's mean with nuisance means fixed at their plug-in estimates

def _full_cdf(t: float, nuisance_means: np.ndarray, sigma: float,
              theta1: float) -> float:
    """P_theta1(T <= t | T wins) with the non-selected means plugged in."""
    lo = theta1 - _WINDOW_SIGMAS * sigma
    hi = theta1 + _WINDOW_SIGMAS * sigma
    if t <= lo:
        return 0.0
    if t >= hi:
        return 1.0
    log_den = _log_win_integral(lo, hi, theta1, nuisance_means, sigma)
    log_num = _log_win_integral(lo, t, theta1, nuisance_means, sigma)
    return math.exp(min(log_num - log_den, 0.0))


def _joint_negloglik_grad(th: np.ndarray, y: np.ndarray, sigma: float):
    """Negative selective log likelihood of the winner model and its gradient.

    One Gauss-Legendre pass yields the log normalizer together with its
    derivatives in every mean, since differentiation acts on the density
    factor and on each CDF factor of the integrand.
    """
    t1 = th[0]
    nuis = th[1:]
    lo, hi = t1 - _WINDOW_SIGMAS * sigma, t1 + _WINDOW_SIGMAS * sigma
    glx, glw = _leggauss(_GL_NODES)
    half = 0.5 * (hi - lo)
    pts = 0.5 * (hi + lo) + half * glx
    z1 = (pts - t1) / sigma
    log_phi1 = std_normal_log_pdf(z1) - math.log(sigma)
    zo = (pts[:, None] - nuis[None, :]) / sigma
    log_cdfs = log_ndtr(zo)
    log_nodes = log_phi1 + log_cdfs.sum(axis=1) + np.log(glw)
    lse = float(logsumexp(log_nodes))
    log_den = lse + math.log(half)
    node_w = np.exp(log_nodes - lse)
    mills = np.exp(np.clip(std_normal_log_pdf(zo) - log_cdfs, None, 300.0))
    dlog_den_1 = float(np.sum(node_w * z1)) / sigma
    dlog_den_o = -np.sum(node_w[:, None] * mills, axis=0) / sigma
    zz = (y - th) / sigma
    loglik = float(np.sum(std_normal_log_pdf(zz))) - log_den
    if not math.isfinite(loglik):
        return 1e30, np.zeros_like(th)
    grad = np.empty_like(th)
    grad[0] = zz[0] / sigma - dlog_den_1
    grad[1:] = zz[1:] / sigma - dlog_den_o
    return -loglik, -grad


def _joint_selective_mle(y: np.ndarray, sigma: float) -> np.ndarray:
    bounds = [(float(v) - 20.0 * sigma, float(v) + 10.0 * sigma) for v in y]
    res = optimize.minimize(
        _joint_negloglik_grad, y.copy(), args=(y, sigma), jac=True,
        method="L-BFGS-B", bounds=bounds,
        options={"ftol": 1e-13, "gtol": 1e-10, "maxiter": 400},
    )
    return np.asarray(res.x, dtype=float)


def _infer_full_vector(t: float, losers: np.ndarray, sigma: float,
                       level: float) -> InferenceResult:
    diagnostics = {"normalizer": f"gauss-legendre-{_GL_NODES}",
                   "nuisance": "joint selective MLE plug-in"}
    y_ordered = np.concatenate(([t], losers))
    theta_hat = _joint_selective_mle(y_ordered, sigma)
    estimate = float(theta_hat[0])
    nuis = theta_hat[1:]
    if estimate <= t - 20.0 * sigma + 1e-6 * sigma:
        diagnostics.setdefault("flags", []).append("divergent-mle")
        estimate = -math.inf
    pvalue = 1.0 - _full_cdf(t, nuis, sigma, 0.0)

    def cdf(th):
        return _full_cdf(t, nuis, sigma, th)

    limit = 50.0 * max(1.0, sigma) + abs(t)
    ci = invert_equal_tailed(cdf, level, t, step=sigma, limit=limit,
                             diagnostics=diagnostics)
    return InferenceResult(estimate, ci, pvalue,
                           WinnersModelKind.FULL_VECTOR.value, diagnostics)


def infer_winner(data: WinnersData, kind, level: float = 0.9) -> InferenceResult:
    """Estimate, equal-tailed CI and p-value (theta_1 = 0) for the winner's mean."""
    kind = WinnersModelKind(kind)
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    t = data.winner
    losers = data.losers
    if kind is WinnersModelKind.CONDITIONAL_ON_LOSERS:
        return _infer_conditional(t, float(losers.max()), data.sigma, level)
    return _infer_full_vector(t, losers, data.sigma, level)


def unadjusted_z_interval(t: float, sigma: float, level: float) -> tuple:
    z = float(std_normal_quantile(0.5 + level / 2.0))
    return (t - z * sigma, t + z * sigma)
