"""Two-stage Gaussian selection models.

File-drawer screening (a first-stage test decides whether a second stage
is collected) and the random-sample-size variant, under both
conditioning choices: conditioning on selection jointly with the random
sample size, or conditioning on selection after the sample size has been
observed. Observations are N(theta, 1); the stage-1 test selects when
sum(stage1) > z * sqrt(n1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import log_ndtr, logsumexp, ndtr

from ._quad import log_integral_panels
from .distributions import _log_interval_mass, std_normal_log_pdf
from .results import InferenceResult
from .selective import invert_monotone_cdf

__all__ = [
    "TwoStageData",
    "SampleSizePrior",
    "TwoStageComparison",
    "unconditional_loglik",
    "conditional_loglik",
    "sample_size_pmf_given_selection",
    "compare_two_stage_inference",
    "file_drawer_loglik",
]

DEFAULT_THRESHOLD = 1.96


@dataclass(frozen=True, eq=False)
class TwoStageData:
    stage1: np.ndarray
    stage2: np.ndarray
    threshold: float = DEFAULT_THRESHOLD
    # randomized screening admits any dataset; deterministic screening
    # requires the stage-1 test to have passed
    enforce_selection: bool = True

    def __post_init__(self):
        s1 = np.atleast_1d(np.asarray(self.stage1, dtype=float)).copy()
        s2 = np.asarray(self.stage2, dtype=float).reshape(-1).copy()
        if s1.size < 1:
            raise ValueError("stage1 must contain at least one observation")
        s1.setflags(write=False)
        s2.setflags(write=False)
        object.__setattr__(self, "stage1", s1)
        object.__setattr__(self, "stage2", s2)
        if self.enforce_selection and not self.selected:
            raise ValueError(
                "dataset was not selected: sum(stage1) must exceed threshold * sqrt(n1)"
            )

    @property
    def n1(self) -> int:
        return int(self.stage1.size)

    @property
    def n2(self) -> int:
        return int(self.stage2.size)

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def stage1_sum(self) -> float:
        return float(self.stage1.sum())

    @property
    def total_sum(self) -> float:
        return float(self.stage1.sum() + self.stage2.sum())

    @property
    def selected(self) -> bool:
        return self.stage1_sum > self.threshold * math.sqrt(self.n1)


@dataclass(frozen=True, eq=False)
class SampleSizePrior:
    """Known finite-support distribution of the stage-1 sample size."""

    support: tuple
    probs: np.ndarray

    def __post_init__(self):
        support = tuple(int(k) for k in self.support)
        probs = np.asarray(self.probs, dtype=float).copy()
        if len(support) != probs.size or probs.size == 0:
            raise ValueError("support and probs must have equal nonzero length")
        if any(k <= 0 for k in support) or len(set(support)) != len(support):
            raise ValueError("support must be distinct positive integers")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {total}")
        probs = probs / total
        probs.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    def pmf(self, n1: int) -> float:
        try:
            return float(self.probs[self.support.index(int(n1))])
        except ValueError:
            return 0.0

    @classmethod
    def point_mass(cls, n1: int) -> "SampleSizePrior":
        return cls((n1,), np.array([1.0]))


def _log_sel_prob(theta: float, n1: int, z: float) -> float:
    """log P_theta(selection | n1) = log Phi(theta * sqrt(n1) - z)."""
    return float(log_ndtr(theta * math.sqrt(n1) - z))


def _log_mixture_sel_prob(prior: SampleSizePrior, theta: float, z: float) -> float:
    terms = [
        math.log(p) + _log_sel_prob(theta, k, z)
        for k, p in zip(prior.support, prior.probs)
        if p > 0
    ]
    return float(logsumexp(terms))


def _gaussian_loglik(data: TwoStageData, theta: float) -> float:
    z1 = data.stage1 - theta
    z2 = data.stage2 - theta
    return float(np.sum(std_normal_log_pdf(z1)) + np.sum(std_normal_log_pdf(z2)))


def unconditional_loglik(data: TwoStageData, prior: SampleSizePrior,
                         theta: float) -> float:
    """Log likelihood conditioning on selection jointly with the sample size.

    The denominator mixes the selection probability over the sample-size
    prior, so the observed n1 carries information about theta.
    """
    denom = _log_mixture_sel_prob(prior, theta, data.threshold)
    if denom == -math.inf:
        raise ValueError("selection probability vanishes")
    p_n1 = prior.pmf(data.n1)
    if p_n1 <= 0:
        raise ValueError(f"observed n1={data.n1} is outside the prior support")
    return math.log(p_n1) + _gaussian_loglik(data, theta) - denom


def conditional_loglik(data: TwoStageData, theta: float) -> float:
    """Log likelihood conditioning on selection after the sample size.

    The sample-size prior enters only as an additive constant, so it
    cancels from every inference; it is omitted here.
    """
    denom = _log_sel_prob(theta, data.n1, data.threshold)
    if denom == -math.inf:
        raise ValueError("selection probability vanishes")
    return _gaussian_loglik(data, theta) - denom


def sample_size_pmf_given_selection(prior: SampleSizePrior, theta: float,
                                    threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Post-selection pmf of n1: proportional to prior * Phi(theta*sqrt(n1) - z)."""
    weights = prior.probs * ndtr(
        theta * np.sqrt(np.array(prior.support, dtype=float)) - threshold
    )
    total = float(weights.sum())
    if total <= 0.0:
        # deep negative theta underflows linearly; renormalize in log space
        logs = np.array([
            (math.log(p) if p > 0 else -math.inf) + _log_sel_prob(theta, k, threshold)
            for k, p in zip(prior.support, prior.probs)
        ])
        if np.all(np.isneginf(logs)):
            raise ValueError("all selection-weighted masses are zero")
        return np.exp(logs - logsumexp(logs))
    return weights / total


# inference: the total sum S is sufficient in the conditional model, and
# its selective law is (truncated stage-1 sum) + (independent stage-2 sum)

def _log_sum_cdf_numerator(s: float, n1: int, n2: int, theta: float,
                           z: float) -> float:
    """log integral over u > c of f_{S1}(u) * P(S2 <= s - u), c = z*sqrt(n1)."""
    c = z * math.sqrt(n1)
    mean1 = n1 * theta
    sd1 = math.sqrt(n1)

    if n2 == 0:
        hi_z = (s - mean1) / sd1
        lo_z = (c - mean1) / sd1
        if hi_z <= lo_z:
            return -math.inf
        return _log_interval_mass(lo_z, hi_z)

    sd2 = math.sqrt(n2)
    mean2 = n2 * theta
    # the integrand piles up near c when the truncation is deep; its decay
    # scale there is n1 / (c - mean1), else the usual sd1
    if c > mean1:
        bscale = max(min(sd1, n1 / (c - mean1)), 1e-12)
    else:
        bscale = sd1
    hi = max(mean1 + 12.0 * sd1, c + 45.0 * bscale)
    pts = {c, hi}
    pts.update(c + k * bscale for k in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 30.0, 45.0))
    pts.update(mean1 + k * sd1 for k in (-12, -8, -4, -2, -1, 0, 1, 2, 4, 8, 12))
    breaks = sorted(p for p in pts if c <= p <= hi)

    def log_f(u):
        return (
            std_normal_log_pdf((u - mean1) / sd1) - math.log(sd1)
            + log_ndtr((s - u - mean2) / sd2)
        )

    return log_integral_panels(log_f, breaks, nodes=32)


def _conditional_sum_cdf(s: float, n1: int, n2: int, theta: float, z: float) -> float:
    """P_theta(S <= s | selection, n1) for the total sum S."""
    log_den = _log_sel_prob(theta, n1, z)
    if log_den == -math.inf:
        raise ValueError("selection probability vanishes")
    log_num = _log_sum_cdf_numerator(s, n1, n2, theta, z)
    return math.exp(min(log_num - log_den, 0.0))


def _unconditional_sum_cdf(s: float, prior: SampleSizePrior, n2: int,
                           theta: float, z: float) -> float:
    """Mixture CDF of the total sum with n1 marginalized over its selective pmf."""
    w = sample_size_pmf_given_selection(prior, theta, z)
    val = 0.0
    for k, wk in zip(prior.support, w):
        if wk > 0:
            val += wk * _conditional_sum_cdf(s, k, n2, theta, z)
    return min(1.0, val)


def _conditional_score(theta: float, data: TwoStageData) -> float:
    n1 = data.n1
    z = data.threshold
    a = theta * math.sqrt(n1) - z
    mills = math.exp(float(std_normal_log_pdf(a)) - float(log_ndtr(a)))
    return data.total_sum - data.n * theta - math.sqrt(n1) * mills


def _conditional_mle(data: TwoStageData) -> float:
    raw = data.total_sum / data.n
    lo, hi = raw - 1.0, raw + 1.0
    while _conditional_score(lo, data) <= 0:
        lo -= 2.0 * (raw - lo) + 1.0
        if raw - lo > 1e4:
            raise RuntimeError("conditional MLE bracket failed")
    while _conditional_score(hi, data) >= 0:
        hi += 2.0 * (hi - raw) + 1.0
    return float(optimize.brentq(_conditional_score, lo, hi, args=(data,),
                                 xtol=1e-10, rtol=1e-15))


def _unconditional_score(theta: float, data: TwoStageData,
                         prior: SampleSizePrior) -> float:
    z = data.threshold
    log_terms, dlog_terms = [], []
    for k, p in zip(prior.support, prior.probs):
        if p <= 0:
            continue
        rk = math.sqrt(k)
        log_terms.append(math.log(p) + float(log_ndtr(theta * rk - z)))
        dlog_terms.append(math.log(p) + float(std_normal_log_pdf(theta * rk - z))
                          + 0.5 * math.log(k))
    dlog_mix = math.exp(float(logsumexp(dlog_terms)) - float(logsumexp(log_terms)))
    return data.total_sum - data.n * theta - dlog_mix


def _unconditional_mle(data: TwoStageData, prior: SampleSizePrior) -> float:
    def neg(theta):
        return -unconditional_loglik(data, prior, theta)

    raw = data.total_sum / data.n
    span = 30.0 / math.sqrt(data.n)
    res = optimize.minimize_scalar(neg, bounds=(raw - span - 3.0, raw + span + 3.0),
                                   method="bounded", options={"xatol": 1e-8})
    theta = float(res.x)
    # polish on the analytic score; bounded minimization stalls near sqrt(eps)
    delta = 1e-6
    for _ in range(40):
        lo, hi = theta - delta, theta + delta
        if _unconditional_score(lo, data, prior) > 0.0 > _unconditional_score(hi, data, prior):
            return float(optimize.brentq(_unconditional_score, lo, hi,
                                         args=(data, prior), xtol=1e-12, rtol=1e-15))
        delta *= 2.0
    return theta


def _invert_sum_cdf(cdf, s_obs: float, data: TwoStageData, level: float,
                    center: float):
    alpha = 1.0 - level
    scale = 1.0 / math.sqrt(data.n)
    limit = 50.0 + abs(center)
    lo = invert_monotone_cdf(cdf, 1.0 - alpha / 2.0, center, step=scale, limit=limit)
    hi = invert_monotone_cdf(cdf, alpha / 2.0, center, step=scale, limit=limit)
    return lo, hi


@dataclass
class TwoStageComparison:
    conditional: InferenceResult
    unconditional: InferenceResult
    estimate_delta: float
    length_delta: float


def infer_conditional(data: TwoStageData, level: float = 0.9) -> InferenceResult:
    s = data.total_sum
    est = _conditional_mle(data)

    def cdf(theta):
        return _conditional_sum_cdf(s, data.n1, data.n2, theta, data.threshold)

    lo, hi = _invert_sum_cdf(cdf, s, data, level, est)
    pvalue = 1.0 - cdf(0.0)
    return InferenceResult(est, (lo, hi), pvalue, "two-stage-conditional",
                           {"denominator": "selection prob at observed n1"})


def infer_unconditional(data: TwoStageData, prior: SampleSizePrior,
                        level: float = 0.9) -> InferenceResult:
    s = data.total_sum
    est = _unconditional_mle(data, prior)

    def cdf(theta):
        return _unconditional_sum_cdf(s, prior, data.n2, theta, data.threshold)

    lo, hi = _invert_sum_cdf(cdf, s, data, level, est)
    pvalue = 1.0 - cdf(0.0)
    return InferenceResult(est, (lo, hi), pvalue, "two-stage-unconditional",
                           {"denominator": "selection prob mixed over prior"})


def compare_two_stage_inference(data: TwoStageData, prior: SampleSizePrior,
                                level: float = 0.9) -> TwoStageComparison:
    """MLE and CI under both likelihoods plus disagreement diagnostics."""
    cond = infer_conditional(data, level)
    unc = infer_unconditional(data, prior, level)
    return TwoStageComparison(
        conditional=cond,
        unconditional=unc,
        estimate_delta=unc.estimate - cond.estimate,
        length_delta=unc.length - cond.length,
    )


def file_drawer_loglik(data: TwoStageData, theta: float,
                       randomization_scale: float = None) -> float:
    """Selective log likelihood of the file-drawer model.

    Deterministic screening divides out Phi(theta*sqrt(n1) - z). With
    Gaussian randomization noise of scale gamma added to the stage-1 sum
    statistic, the selection term log p(y) is a constant in theta and the
    normalizer has the convolution closed form
    Phi((theta*n1 - z*sqrt(n1)) / sqrt(n1 + gamma^2)).
    """
    if randomization_scale is None:
        return conditional_loglik(data, theta)
    gamma = float(randomization_scale)
    if gamma <= 0:
        raise ValueError("randomization_scale must be positive")
    n1 = data.n1
    z = data.threshold
    cut = z * math.sqrt(n1)
    log_p = float(log_ndtr((data.stage1_sum - cut) / gamma))
    log_norm = float(log_ndtr((theta * n1 - cut) / math.sqrt(n1 + gamma * gamma)))
    if log_norm == -math.inf:
        raise ValueError("selection probability vanishes")
    return _gaussian_loglik(data, theta) + log_p - log_norm


def file_drawer_mle(data: TwoStageData, randomization_scale: float = None) -> float:
    if randomization_scale is None:
        return _conditional_mle(data)

    def neg(theta):
        return -file_drawer_loglik(data, theta, randomization_scale)

    raw = data.total_sum / data.n
    span = 30.0 / math.sqrt(data.n) + 3.0
    res = optimize.minimize_scalar(neg, bounds=(raw - span, raw + span),
                                   method="bounded", options={"xatol": 1e-10})
    return float(res.x)
