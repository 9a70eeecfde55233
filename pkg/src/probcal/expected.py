"""Expected scores under a known operating condition.

For a deterministic response model the expected score of a rule f is

    E[score] = integral over p of  [p f(m(p), 1) + (1 - p) f(m(p), 0)] pi(p) dp

which is evaluated here by composite Gauss-Legendre quadrature (the reference
path) or by Monte Carlo over a synthetic batch (the path it is checked against).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from probcal.errors import ContractError, ConvergenceError
from probcal.scoring import ScoringRule
from probcal.synthetic import ProbDistribution, Seed, SyntheticModel, generate_batch

_GL_ORDER = 8


@lru_cache(maxsize=None)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre settings.

    ``nodes`` is the starting node count per smooth piece; it is doubled until
    two successive estimates agree to ``rtol`` (plus a tiny ``atol`` so that
    identically-zero integrands terminate), or ``max_nodes`` is hit.
    ``substitution`` maps p = x^(1/alpha) near 0 (and 1 - p = x^(1/beta)
    near 1) when a beta parameter is below 1, which makes the density's
    endpoint blow-up cancel exactly against the Jacobian.
    """

    nodes: int = 64
    substitution: bool = True
    rtol: float = 1e-9
    atol: float = 1e-14
    max_nodes: int = 1 << 16

    def __post_init__(self):
        if self.nodes < 64 or self.nodes % _GL_ORDER:
            raise ContractError(f"nodes must be >= 64 and a multiple of {_GL_ORDER}, got {self.nodes}")
        if self.max_nodes < self.nodes:
            raise ContractError("max_nodes must be >= nodes")


def _composite(f, a: float, b: float, nodes: int) -> float:
    x, w = _gauss_legendre(_GL_ORDER)
    panels = nodes // _GL_ORDER
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    vals = f(pts).reshape(panels, _GL_ORDER)
    return float(np.sum(vals @ w * half))


def integrate_against(dist: ProbDistribution, h, breaks=(), spec: QuadratureSpec | None = None) -> float:
    """Integrate h(p) * pdf(p) over [0, 1], splitting at ``breaks``.

    Raises ConvergenceError when doubling the node count stops helping before
    the tolerance is met.
    """
    spec = spec or QuadratureSpec()
    a, b = dist.alpha, dist.beta
    cuts = {0.0, 1.0, *(x for x in breaks if 0.0 < x < 1.0)}
    singular = spec.substitution and (a < 1.0 or b < 1.0)
    if singular:
        cuts.add(0.5)  # keeps each substituted piece away from the other endpoint
    cuts = sorted(cuts)
    lognorm = dist.log_norm()

    def plain(p):
        return h(p) * dist.pdf(p)

    pieces = []
    for lo, hi in zip(cuts, cuts[1:]):
        if singular and lo == 0.0 and a < 1.0:
            # p = x^(1/a) turns p^(a-1) dp into dx / a
            def f(x, a=a, b=b):
                p = x ** (1.0 / a)
                return h(p) * np.exp((b - 1.0) * np.log1p(-p) - lognorm) / a

            pieces.append((f, 0.0, hi**a))
        elif singular and hi == 1.0 and b < 1.0:
            # 1 - p = x^(1/b), the mirror image at the upper end
            def f(x, a=a, b=b):
                p = 1.0 - x ** (1.0 / b)
                with np.errstate(divide="ignore"):
                    return h(p) * np.exp((a - 1.0) * np.log(p) - lognorm) / b

            pieces.append((f, 0.0, (1.0 - lo) ** b))
        else:
            pieces.append((plain, lo, hi))

    total = 0.0
    for integrand, lo, hi in pieces:
        nodes = spec.nodes
        prev = _composite(integrand, lo, hi, nodes)
        while True:
            nodes *= 2
            cur = _composite(integrand, lo, hi, nodes)
            if abs(cur - prev) <= spec.rtol * abs(cur) + spec.atol:
                break
            if nodes >= spec.max_nodes:
                raise ConvergenceError(
                    f"quadrature on [{lo:.6g}, {hi:.6g}] for {dist.label} did not converge: "
                    f"last estimates {prev!r} -> {cur!r} at {nodes} nodes (rtol {spec.rtol:g})"
                )
            prev = cur
        total += cur
    return total


def _as_rule(rule) -> ScoringRule:
    return rule if isinstance(rule, ScoringRule) else ScoringRule(rule)


def _pointwise(rule: ScoringRule, q, p):
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    return p * rule(q, 1) + (1.0 - p) * rule(q, 0)


def pointwise_expected(rule, q, p):
    """Expected score of predicting q when the true probability is p.

    For the balance rule this is p - q on q >= 0.5 and q - p below it, so its
    magnitude is exactly the estimation error.
    """
    rule = _as_rule(rule)
    qa = np.asarray(q, dtype=np.float64)
    pa = np.asarray(p, dtype=np.float64)
    for name, v in (("q", qa), ("p", pa)):
        if not np.all(np.isfinite(v)) or np.any((v < 0) | (v > 1)):
            raise ContractError(f"{name} must lie in [0, 1], got {v!r}")
    out = _pointwise(rule, qa, pa)
    return float(out) if out.ndim == 0 else out


def expected_score_quadrature(
    rule,
    dist: ProbDistribution,
    model: SyntheticModel,
    spec: QuadratureSpec | None = None,
) -> float:
    rule = _as_rule(rule)
    return integrate_against(dist, lambda p: _pointwise(rule, model(p), p), model.breakpoints(), spec)


def expected_score_mc(
    rule,
    dist: ProbDistribution,
    model: SyntheticModel,
    n: int,
    seed: Seed,
) -> tuple[float, float]:
    """Monte Carlo mean of the rule over one synthetic batch, with its standard error."""
    if n < 2:
        raise ContractError(f"Monte Carlo needs n >= 2, got {n}")
    rule = _as_rule(rule)
    batch = generate_batch(dist, model, n, seed)
    pts = rule(batch.predictions.p_hat, batch.predictions.outcome)
    mean = float(np.sum(pts) / n)
    se = float(np.std(pts, ddof=1) / math.sqrt(n))
    return mean, se


def true_ece_analytic(
    dist: ProbDistribution,
    model: SyntheticModel,
    spec: QuadratureSpec | None = None,
) -> float:
    """Integral of |m(p) - p| against the operating condition.

    Valid only when m is one-to-one, so that the outcome frequency among
    predictions equal to m(p) is exactly p.
    """
    if not model.injective:
        raise ContractError(
            f"conditional frequency undefined: model {model.label} maps distinct p to the same estimate"
        )
    if model.tendency == 0:
        return 0.0
    return integrate_against(dist, lambda p: np.abs(model(p) - p), model.breakpoints(), spec)


def true_ece_uniform_closed_form(tendency: float) -> float:
    """|t| / 4: E|m(p) - p| under Beta(1,1) for either bias direction."""
    SyntheticModel(tendency)
    return abs(tendency) / 4


def optimal_accuracy_closed_form(dist: ProbDistribution) -> float | None:
    """E[max(p, 1-p)] for the symmetric cases that have a known closed form."""
    known = {(0.5, 0.5): 0.5 + 1 / math.pi, (1.0, 1.0): 0.75, (2.0, 2.0): 0.6875}
    return known.get((dist.alpha, dist.beta))


def optimal_brier_closed_form(dist: ProbDistribution) -> float:
    """E[p (1-p)] = mean - mean^2 - var."""
    return dist.mean - dist.mean**2 - dist.var
