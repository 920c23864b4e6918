"""Generic selective (post-selection) models.

A selective model couples a base parametric family f(y; theta) with a
selection function p(y) and exposes the conditional-law quantities:
selection probability, selective log density f(y;theta)p(y)/phi(theta),
conditional maximum likelihood and confidence intervals by test
inversion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

import numpy as np
from scipy import optimize
from scipy.integrate import quad
from scipy.special import ndtr

from .distributions import std_normal_log_pdf

__all__ = [
    "SelectionFunction",
    "ParametricFamily",
    "SelectiveModel",
    "ClosedFormNormalizer",
    "QuadratureNormalizer",
    "MonteCarloNormalizer",
    "NormalizerValue",
    "UnsupportedSelectionError",
    "DatumNotSelectedError",
    "DivergentMLEError",
    "UnboundedCIError",
    "selection_probability",
    "selective_log_density",
    "selective_cdf",
    "selective_mle",
    "selective_ci",
    "randomized_selection_prob",
    "indicator_above",
    "indicator_two_sided",
    "randomized_above",
    "scalar_gaussian",
    "gaussian_iid",
]

PHI_FLOOR = 1e-300


class UnsupportedSelectionError(ValueError):
    """Selection probability is zero for the queried parameter."""


class DatumNotSelectedError(ValueError):
    """Observed data is inconsistent with the selection event."""


class DivergentMLEError(RuntimeError):
    """Selective likelihood is monotone; the MLE sits at infinity."""

    def __init__(self, direction):
        self.direction = np.asarray(direction, dtype=float)
        super().__init__(f"divergent MLE along direction {self.direction}")


class UnboundedCIError(RuntimeError):
    """A CI endpoint could not be bracketed inside the search box."""

    def __init__(self, endpoint: float, partial: tuple):
        self.endpoint = endpoint
        self.partial = partial
        super().__init__("unbounded CI endpoint")


@dataclass(frozen=True)
class SelectionFunction:
    """Map y -> p(y) in [0, 1], optionally reduced to sufficient pairs (t, a).

    kind is "deterministic" (indicator-valued) or "randomized".
    breakpoints lists discontinuity locations of p along a scalar y, used
    to split quadrature panels.
    """

    kind: str
    prob: Callable[[Any], float]
    reduced_prob: Optional[Callable[[Any, Any], float]] = None
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.kind not in ("deterministic", "randomized"):
            raise ValueError(f"unknown selection kind {self.kind!r}")

    def __call__(self, y) -> float:
        p = float(self.prob(y))
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"selection probability {p} outside [0, 1]")
        if self.kind == "deterministic" and p not in (0.0, 1.0):
            raise ValueError("deterministic selection must be indicator-valued")
        return p


def indicator_above(threshold: float) -> SelectionFunction:
    """Deterministic selection 1{y > threshold} on a scalar observation."""
    t = float(threshold)
    return SelectionFunction(
        kind="deterministic",
        prob=lambda y: float(np.asarray(y) > t),
        breakpoints=(t,),
    )


def indicator_two_sided(threshold: float) -> SelectionFunction:
    """Deterministic selection 1{|y| > threshold}."""
    t = float(threshold)
    return SelectionFunction(
        kind="deterministic",
        prob=lambda y: float(abs(np.asarray(y)) > t),
        breakpoints=(-t, t),
    )


def randomized_above(threshold: float, noise_scale: float) -> SelectionFunction:
    """Randomized selection P(y + W > threshold) with Gaussian noise W."""
    t = float(threshold)
    g = float(noise_scale)
    if g <= 0:
        raise ValueError("noise_scale must be positive")
    return SelectionFunction(
        kind="randomized",
        prob=lambda y: float(ndtr((np.asarray(y) - t) / g)),
    )


def randomized_selection_prob(t_stat: float, threshold: float, noise_scale: float) -> float:
    """Probability that t_stat plus Gaussian noise exceeds the threshold."""
    if noise_scale <= 0:
        raise ValueError("noise_scale must be positive")
    return float(ndtr((t_stat - threshold) / noise_scale))


@dataclass(frozen=True)
class ParametricFamily:
    """Base family {f(y; theta)} with a sampler and box parameter space.

    log_density(y, theta) -> float; sampler(theta, rng, size=None) -> draw(s).
    integration_window(theta) bounds the region holding essentially all
    mass, for 1-D quadrature normalizers.
    """

    log_density: Callable[[Any, np.ndarray], float]
    sampler: Callable[..., Any]
    param_space: tuple = ((-50.0, 50.0),)
    integration_window: Optional[Callable[[np.ndarray], tuple]] = None
    sufficient_reduction: Optional[Callable[[Any], tuple]] = None


def scalar_gaussian(sigma: float = 1.0) -> ParametricFamily:
    """Family of a single N(theta, sigma^2) observation, scalar theta."""
    s = float(sigma)
    if s <= 0:
        raise ValueError("sigma must be positive")

    def logpdf(y, theta):
        th = float(np.atleast_1d(theta)[0])
        return float(std_normal_log_pdf((y - th) / s)) - math.log(s)

    def sample(theta, rng, size=None):
        th = float(np.atleast_1d(theta)[0])
        return rng.normal(th, s, size=size)

    return ParametricFamily(
        log_density=logpdf,
        sampler=sample,
        integration_window=lambda theta: (
            float(np.atleast_1d(theta)[0]) - 12.0 * s,
            float(np.atleast_1d(theta)[0]) + 12.0 * s,
        ),
    )


def gaussian_iid(n: int, sigma: float = 1.0) -> ParametricFamily:
    """Family of n i.i.d. N(theta, sigma^2) observations."""
    s = float(sigma)

    def logpdf(y, theta):
        th = float(np.atleast_1d(theta)[0])
        z = (np.asarray(y, dtype=float) - th) / s
        return float(np.sum(std_normal_log_pdf(z)) - n * math.log(s))

    def sample(theta, rng, size=None):
        th = float(np.atleast_1d(theta)[0])
        if size is None:
            return rng.normal(th, s, size=n)
        return rng.normal(th, s, size=(int(size), n))

    return ParametricFamily(log_density=logpdf, sampler=sample)


@dataclass(frozen=True)
class ClosedFormNormalizer:
    fn: Callable[[np.ndarray], float]
    label: str = "closed-form"


@dataclass(frozen=True)
class QuadratureNormalizer:
    # nodes caps the adaptive subdivision count of the 1-D integrator
    nodes: int = 64
    label: str = "quadrature"


@dataclass(frozen=True)
class MonteCarloNormalizer:
    n_draws: int = 100_000
    label: str = "monte-carlo"


NormalizerStrategy = Union[ClosedFormNormalizer, QuadratureNormalizer, MonteCarloNormalizer]


@dataclass(frozen=True)
class NormalizerValue:
    value: float
    standard_error: Optional[float]
    strategy: str


@dataclass(frozen=True)
class SelectiveModel:
    """Immutable bundle of family, selection and normalizer strategy.

    conditioning "selection-and-ancillary" treats the family as the
    conditional law of the interest statistic given the stored ancillary
    value; the normalizer is then phi(theta; a) and selection is evaluated
    through reduced_prob(t, a).
    """

    family: ParametricFamily
    selection: SelectionFunction
    normalizer: NormalizerStrategy = field(default_factory=QuadratureNormalizer)
    conditioning: str = "selection"
    ancillary: Any = None

    def __post_init__(self):
        if self.conditioning not in ("selection", "selection-and-ancillary"):
            raise ValueError(f"unknown conditioning mode {self.conditioning!r}")
        if self.conditioning == "selection-and-ancillary" and self.selection.reduced_prob is None:
            raise ValueError("ancillary conditioning requires reduced_prob on the selection")

    def selection_prob_at(self, y) -> float:
        if self.conditioning == "selection-and-ancillary":
            p = float(self.selection.reduced_prob(y, self.ancillary))
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"selection probability {p} outside [0, 1]")
            return p
        return self.selection(y)


def _eval_p_vector(model: SelectiveModel, ys: np.ndarray) -> np.ndarray:
    try:
        if model.conditioning == "selection-and-ancillary":
            p = np.asarray(model.selection.reduced_prob(ys, model.ancillary), dtype=float)
        else:
            p = np.asarray(model.selection.prob(ys), dtype=float)
        if p.shape != np.shape(ys):
            raise ValueError
        return p
    except (TypeError, ValueError):
        return np.array([model.selection_prob_at(y) for y in ys])


def _window(model: SelectiveModel, theta) -> tuple:
    if model.family.integration_window is None:
        return (-np.inf, np.inf)
    lo, hi = model.family.integration_window(theta)
    breaks = model.selection.breakpoints
    if breaks and math.isfinite(lo) and math.isfinite(hi):
        # selection discontinuities can sit outside the density window; the
        # selected mass there is tiny but must stay resolvable in ratios
        pad = 0.5 * (hi - lo)
        lo = min(lo, min(breaks) - pad)
        hi = max(hi, max(breaks) + pad)
    return (lo, hi)


def _quad_integral(model: SelectiveModel, theta, lo: float, hi: float,
                   limit: int) -> float:
    """int_lo^hi f(y; theta) p(y) dy with panels split at selection breaks."""
    def integrand(y):
        p = model.selection_prob_at(y)
        if p == 0.0:
            return 0.0
        return math.exp(model.family.log_density(y, theta)) * p

    cuts = sorted(b for b in model.selection.breakpoints if lo < b < hi)
    edges = [lo, *cuts, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        # near-zero epsabs keeps quad in relative mode so far-tail masses
        # remain meaningful inside CDF ratios
        val, _ = quad(integrand, a, b, epsabs=1e-300, epsrel=1e-10, limit=limit)
        total += val
    return total


def _normalizer_value(model: SelectiveModel, theta,
                      rng: Optional[np.random.Generator] = None) -> NormalizerValue:
    strat = model.normalizer
    if isinstance(strat, ClosedFormNormalizer):
        return NormalizerValue(float(strat.fn(theta)), None, strat.label)
    if isinstance(strat, QuadratureNormalizer):
        lo, hi = _window(model, theta)
        return NormalizerValue(_quad_integral(model, theta, lo, hi, strat.nodes), None, strat.label)
    if isinstance(strat, MonteCarloNormalizer):
        if rng is None:
            raise ValueError("monte-carlo normalizer requires an explicit rng")
        ys = model.family.sampler(theta, rng, strat.n_draws)
        ps = _eval_p_vector(model, np.asarray(ys))
        value = float(np.mean(ps))
        se = float(np.std(ps, ddof=1) / math.sqrt(len(ps)))
        return NormalizerValue(value, se, strat.label)
    raise TypeError(f"unknown normalizer strategy {strat!r}")


def selection_probability(model: SelectiveModel, theta,
                          rng: Optional[np.random.Generator] = None) -> float:
    """phi(theta) = E_theta[p(Y)], or phi(theta; a) under ancillary conditioning."""
    nv = _normalizer_value(model, theta, rng)
    if nv.value < PHI_FLOOR:
        raise UnsupportedSelectionError("unsupported selection")
    return nv.value


def selective_log_density(model: SelectiveModel, y, theta,
                          rng: Optional[np.random.Generator] = None) -> float:
    """log f(y; theta) + log p(y) - log phi(theta)."""
    p = model.selection_prob_at(y)
    if p <= 0.0:
        raise DatumNotSelectedError("datum inconsistent with selection event")
    phi = selection_probability(model, theta, rng)
    return model.family.log_density(y, theta) + math.log(p) - math.log(phi)


def selective_cdf(model: SelectiveModel, y: float, theta,
                  rng: Optional[np.random.Generator] = None) -> float:
    """Selective CDF at scalar y: P_theta(Y <= y | selected). Quadrature-based."""
    if isinstance(model.normalizer, ClosedFormNormalizer):
        denom = float(model.normalizer.fn(theta))
        limit = 200
    else:
        lo_d, hi_d = _window(model, theta)
        limit = getattr(model.normalizer, "nodes", 200)
        denom = _quad_integral(model, theta, lo_d, hi_d, limit)
    if denom < PHI_FLOOR:
        raise UnsupportedSelectionError("unsupported selection")
    lo, hi = _window(model, theta)
    y = float(y)
    if y <= lo:
        return 0.0
    num = _quad_integral(model, theta, lo, min(y, hi), limit)
    return min(1.0, num / denom)


def _as_param_array(theta, n_params: int) -> np.ndarray:
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if th.size != n_params:
        raise ValueError(f"expected {n_params} parameters, got {th.size}")
    return th


def _fd_gradient(fn, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (fn(xp) - fn(xm)) / (2.0 * step)
    return g


def selective_mle(model: SelectiveModel, y, x0=None, seed: int = 0,
                  n_starts: int = 5, rng: Optional[np.random.Generator] = None):
    """Maximize the selective log likelihood; multi-start, jittered deterministically.

    Raises DivergentMLEError when the optimum escapes to the parameter box
    with the likelihood still improving outward.
    """
    p_obs = model.selection_prob_at(y)
    if p_obs <= 0.0:
        raise DatumNotSelectedError("datum inconsistent with selection event")
    bounds = tuple(model.family.param_space)
    n_params = len(bounds)
    if x0 is None:
        x0 = np.zeros(n_params)
    x0 = _as_param_array(x0, n_params)
    log_p_obs = math.log(p_obs)

    def negloglik(th):
        try:
            phi = selection_probability(model, th, rng)
        except UnsupportedSelectionError:
            return 1e30
        val = model.family.log_density(y, th) + log_p_obs - math.log(phi)
        if not math.isfinite(val):
            return 1e30
        return -val

    jitter_rng = np.random.default_rng(seed)
    starts = [x0]
    for _ in range(n_starts - 1):
        starts.append(x0 + jitter_rng.normal(0.0, 1.0, size=n_params))
    starts = [np.clip(s, [b[0] for b in bounds], [b[1] for b in bounds]) for s in starts]

    best = None
    for s in starts:
        res = optimize.minimize(negloglik, s, method="L-BFGS-B", bounds=bounds,
                                options={"ftol": 1e-14, "gtol": 1e-10, "maxiter": 500})
        if best is None or res.fun < best.fun:
            best = res
    xhat = np.asarray(best.x, dtype=float)

    grad = _fd_gradient(negloglik, xhat)
    if np.linalg.norm(grad) > 1e-6:
        # polish with a derivative-free pass before declaring failure
        res = optimize.minimize(negloglik, xhat, method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 2000})
        if res.fun <= best.fun:
            xhat = np.asarray(res.x, dtype=float)
            grad = _fd_gradient(negloglik, xhat)
    if np.linalg.norm(grad) > 1e-6:
        direction = np.zeros(n_params)
        for i, (lo, hi) in enumerate(bounds):
            at_lo = xhat[i] <= lo + 1e-6 * max(1.0, abs(lo))
            at_hi = xhat[i] >= hi - 1e-6 * max(1.0, abs(hi))
            if at_lo and grad[i] > 0:
                direction[i] = -1.0
            elif at_hi and grad[i] < 0:
                direction[i] = 1.0
        if np.any(direction != 0):
            raise DivergentMLEError(direction)
        raise RuntimeError(f"selective MLE did not converge; |grad|={np.linalg.norm(grad):.2e}")
    return xhat if n_params > 1 else float(xhat[0])


def _expand_bracket(g, center: float, step: float, limit: float):
    """Find (a, b) with g(a) > 0 > g(b), expanding geometrically from center."""
    a = b = center
    ga = gb = g(center)
    width = step
    while ga <= 0.0:
        a = center - width
        if abs(a) > limit:
            return None, (b, gb)
        ga = g(a)
        width *= 2.0
    width = step
    while gb > 0.0:
        b = center + width
        if abs(b) > limit:
            return (a, ga), None
        gb = g(b)
        width *= 2.0
    return (a, ga), (b, gb)


def invert_monotone_cdf(cdf_in_theta, observed_level: float, center: float,
                        step: float = 1.0, limit: float = 50.0,
                        xtol: float = 1e-8) -> float:
    """Solve cdf(theta) = observed_level for a CDF decreasing in theta."""
    def g(th):
        return cdf_in_theta(th) - observed_level

    left, right = _expand_bracket(g, center, step, limit)
    if left is None:
        raise UnboundedCIError(-math.inf, (None, right))
    if right is None:
        raise UnboundedCIError(math.inf, (left, None))
    return float(optimize.brentq(g, left[0], right[0], xtol=xtol, rtol=1e-14))


def invert_equal_tailed(cdf_in_theta, level: float, center: float,
                        step: float = 1.0, limit: float = 50.0,
                        diagnostics: Optional[dict] = None) -> tuple:
    """Equal-tailed interval endpoints, recording rather than raising when an
    endpoint escapes the search box (heavy-tailed families genuinely produce
    half-infinite selective intervals)."""
    alpha = 1.0 - level
    try:
        lo = invert_monotone_cdf(cdf_in_theta, 1.0 - alpha / 2.0, center,
                                 step=step, limit=limit)
    except UnboundedCIError:
        if diagnostics is not None:
            diagnostics.setdefault("flags", []).append("unbounded-ci-lower")
        lo = -math.inf
    try:
        hi = invert_monotone_cdf(cdf_in_theta, alpha / 2.0, center,
                                 step=step, limit=limit)
    except UnboundedCIError:
        if diagnostics is not None:
            diagnostics.setdefault("flags", []).append("unbounded-ci-upper")
        hi = math.inf
    return (lo, hi)


def selective_ci(model: SelectiveModel, y: float, level: float = 0.95,
                 rng: Optional[np.random.Generator] = None,
                 theta_limit: float = 50.0) -> tuple:
    """Equal-tailed CI for a scalar parameter by inversion of the selective CDF.

    Valid for scalar targets with a selective CDF monotone (decreasing) in
    the parameter, which covers every 1-D Gaussian-derived model here.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    alpha = 1.0 - level

    def cdf(th):
        try:
            return selective_cdf(model, y, th, rng)
        except UnsupportedSelectionError:
            # phi underflowed during bracket expansion; the selective law
            # degenerates toward the near edge of the selection region
            return 1.0 if float(np.atleast_1d(th)[0]) < y else 0.0

    center = float(y)
    lo = invert_monotone_cdf(cdf, 1.0 - alpha / 2.0, center, limit=theta_limit)
    hi = invert_monotone_cdf(cdf, alpha / 2.0, center, limit=theta_limit)
    return (lo, hi)
