"""Parameter-free statistical pruning of the co-association graph.

Three generative null models assign every co-association edge a p-value:
the probability that the null produces a weight at least as large as the
observed one. Edges whose p-value reaches the significance level are
removed. A plain minimum co-association threshold is kept as the baseline.

Models
------
mlf
    Marginal-likelihood binomial null. With total weight T and node
    strengths s, an edge's null weight is Binomial(T, p) with
    p = s_u * s_v / (2 T^2); the p-value is the binomial survival
    function at the observed weight.
ecm
    Enhanced configuration model: the canonical maximum-entropy ensemble
    of integer-weighted graphs constrained to the observed degree *and*
    strength sequences. Each node carries two Lagrange multipliers
    (x_i, y_i); the edge weight law is geometric with an inflated zero,
    and the p-value has the closed form x_u x_v (y_u y_v)^w / Z_uv.
gloss
    Global significance null: weights are redrawn i.i.d. from the
    empirical weight distribution on the fixed topology, so the p-value
    is the empirical inclusive survival of the observed weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import binom

from .coassoc import (CoassociationGraph, CoassociationMatrix,
                      build_coassociation, build_coassociation_graph)
from .ensemble import Ensemble
from .errors import InputError, SolverError
from .graphs import MultilayerGraph, Pair

__all__ = [
    "FilterConfig",
    "EdgeSignificance",
    "EcmParameters",
    "filter_threshold",
    "mlf_pvalues",
    "ecm_fit",
    "ecm_pvalues",
    "gloss_pvalues",
    "apply_filter",
    "compute_significance",
    "filter_coassociation",
    "save_significance",
    "FILTER_MODELS",
]

FILTER_MODELS = ("threshold", "mlf", "ecm", "gloss")

# Bounds for the ECM solver's log-parameters; |lu| + |ly| stays below 709
# so x = exp(lu - ly) never overflows a double.
_LU_MIN, _LU_MAX = -345.0, 345.0
_LY_MIN, _LY_MAX = -345.0, math.log1p(-1e-12)


@dataclass
class FilterConfig:
    """Significance level for model filters; threshold for the baseline."""

    alpha: float = 0.05
    theta: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.theta is not None and not 0.0 <= self.theta <= 1.0:
            raise InputError(f"theta must be in [0, 1], got {self.theta}")


@dataclass
class EdgeSignificance:
    """Per-edge p-values under one null model."""

    model: str
    pvalues: dict[Pair, float]

    def keep(self, pair: Pair, alpha: float) -> bool:
        """An edge survives iff its p-value is strictly below alpha."""
        return self.pvalues[pair] < alpha

    def dropped(self, alpha: float) -> set[Pair]:
        return {pair for pair, p in self.pvalues.items() if p >= alpha}


def filter_threshold(m: CoassociationMatrix, theta: float) -> CoassociationMatrix:
    """Remove entries whose normalized co-association is below theta."""
    if not 0.0 <= theta <= 1.0:
        raise InputError(f"theta must be in [0, 1], got {theta}")
    dropped = {pair for pair, layers in m.layer_sets.items()
               if len(layers) / m.n_layers < theta}
    return m.without(dropped)


def mlf_pvalues(gm: CoassociationGraph) -> EdgeSignificance:
    """Marginal-likelihood filter: binomial survival per edge.

    The survival function is evaluated through scipy's regularized
    incomplete beta, which stays accurate for large totals.
    """
    g = gm.graph
    total = g.total_weight
    if total == 0:
        raise InputError("MLF requires a non-empty co-association graph")
    pvalues: dict[Pair, float] = {}
    for (u, v), w in g.weights.items():
        p = g.strength(u) * g.strength(v) / (2.0 * total * total)
        pvalues[(u, v)] = float(binom.sf(w - 1, total, p))
    return EdgeSignificance("mlf", pvalues)


@dataclass
class EcmParameters:
    """Fitted maximum-entropy multipliers and the final constraint residual.

    Nodes with zero degree are excluded from the fit and carry x = y = 0.
    """

    x: dict[str, float]
    y: dict[str, float]
    residual: float

    def edge_probability(self, u: str, v: str) -> float:
        """Model probability that an edge (any positive weight) exists."""
        return self.weight_survival(u, v, 1)

    def weight_survival(self, u: str, v: str, w: int) -> float:
        """P(weight >= w) under the fitted model; 1 for w <= 0."""
        if w <= 0:
            return 1.0
        xu, xv, yu, yv = self.x[u], self.x[v], self.y[u], self.y[v]
        if xu == 0.0 or xv == 0.0 or yu == 0.0 or yv == 0.0:
            return 0.0
        lv = math.log(yu) + math.log(yv)
        lu = math.log(xu) + math.log(xv) + lv
        log_z = np.logaddexp(math.log(-math.expm1(lv)), lu)
        log_gamma = math.log(xu) + math.log(xv) + w * lv - log_z
        return float(min(1.0, math.exp(min(log_gamma, 0.0))))


def _ecm_model_sums(lu: np.ndarray, ly: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Expected degree and strength vectors for the current parameters.

    The solver works in (u, y) with u_i = x_i * y_i, because the degree
    equations are then governed by u and the strength equations by y;
    solving per-coordinate in (x, y) would crawl along a ridge whenever a
    node's strength approaches its degree (y -> 0 with x * y finite).
    """
    v = ly[:, None] + ly[None, :]
    luu = lu[:, None] + lu[None, :]
    one_minus_yy = -np.expm1(v)
    with np.errstate(over="ignore"):
        p = 1.0 / (1.0 + one_minus_yy * np.exp(-luu))
    np.fill_diagonal(p, 0.0)
    k_model = p.sum(axis=1)
    s_model = (p / one_minus_yy).sum(axis=1)
    return k_model, s_model


def _ecm_residual(k_model: np.ndarray, s_model: np.ndarray,
                  k_obs: np.ndarray, s_obs: np.ndarray) -> float:
    rel_k = np.abs(k_model - k_obs) / k_obs
    rel_s = np.abs(s_model - s_obs) / s_obs
    return float(max(rel_k.max(), rel_s.max()))


def _bracketed_root(func, start: float, lo: float, hi: float) -> float:
    """Root of a monotone increasing function, warm-started near `start`.

    Expands a window geometrically around the starting point until the sign
    changes, then hands the narrow bracket to brentq; saturates at the
    bounds when the target is out of reach. Much cheaper than searching the
    full parameter range once the solver is warm.
    """
    x0 = min(max(start, lo), hi)
    f0 = func(x0)
    if f0 == 0.0:
        return x0
    step = 0.25
    if f0 > 0.0:
        b = x0
        while x0 - step > lo:
            a = x0 - step
            if func(a) <= 0.0:
                break
            b = a
            step *= 2.0
        else:
            if func(lo) >= 0.0:
                return lo
            a = lo
    else:
        a = x0
        while x0 + step < hi:
            b = x0 + step
            if func(b) >= 0.0:
                break
            a = b
            step *= 2.0
        else:
            if func(hi) <= 0.0:
                return hi
            b = hi
    return brentq(func, a, b, xtol=1e-13, rtol=8.9e-16)


class _EcmSystem:
    """Solver state for one fit; counts row evaluations against the budget."""

    def __init__(self, k_obs: np.ndarray, s_obs: np.ndarray, budget: int):
        self.k_obs = k_obs
        self.s_obs = s_obs
        self.budget = budget
        self.evaluations = 0
        self.ly = np.clip(np.log(np.maximum(1.0 - k_obs / s_obs, 1e-3)),
                          _LY_MIN, _LY_MAX)
        self.lu = np.clip(np.log(k_obs / math.sqrt(k_obs.sum())),
                          _LU_MIN, _LU_MAX)

    def row_sums(self, i: int) -> tuple[float, float]:
        """Expected degree and strength of node i only."""
        self.evaluations += 1
        v = self.ly[i] + self.ly
        luu = self.lu[i] + self.lu
        one_minus_yy = -np.expm1(v)
        with np.errstate(over="ignore"):
            p = 1.0 / (1.0 + one_minus_yy * np.exp(-luu))
        p[i] = 0.0
        return float(p.sum()), float((p / one_minus_yy).sum())

    def residual(self) -> float:
        self.evaluations += len(self.k_obs)
        k_model, s_model = _ecm_model_sums(self.lu, self.ly)
        return _ecm_residual(k_model, s_model, self.k_obs, self.s_obs)

    def exhausted(self) -> bool:
        return self.evaluations >= self.budget

    def _pair_factors(self, i: int, ly_i: float) -> tuple[np.ndarray, np.ndarray]:
        """Arrays over partners j != i: c_j = (1 - y_i y_j) / u_j, 1 - y_i y_j.

        With t = u_i, node i's edge probabilities are t / (t + c_j), which
        turns the degree equation into a one-dimensional rational root.
        """
        keep = np.arange(len(self.ly)) != i
        one_minus_yy = -np.expm1(ly_i + self.ly[keep])
        c = one_minus_yy * np.exp(-self.lu[keep])
        return c, one_minus_yy

    def _degree_root(self, c: np.ndarray, k: float, z0: float) -> float:
        """Solve sum_j 1/(1 + c_j e^-z) = k for z = log u_i (monotone).

        Safeguarded Newton within [lo, hi] brackets; saturates when the
        target degree is unreachable.
        """
        def gap(z: float) -> float:
            self.evaluations += 1
            return float((1.0 / (1.0 + c * np.exp(-z))).sum()) - k

        lo, hi = _LU_MIN, _LU_MAX
        if gap(hi) <= 0.0:
            return hi
        if gap(lo) >= 0.0:
            return lo
        z = min(max(z0, lo), hi)
        for _ in range(100):
            a = 1.0 / (1.0 + c * np.exp(-z))
            g = float(a.sum()) - k
            if abs(g) <= 1e-13 * max(k, 1.0):
                return z
            if g > 0.0:
                hi = z
            else:
                lo = z
            slope = float((a * (1.0 - a)).sum())
            z_next = z - g / slope if slope > 0.0 else 0.5 * (lo + hi)
            if not lo < z_next < hi:
                z_next = 0.5 * (lo + hi)
            z = z_next
            self.evaluations += 1
        return z

    def solve_node(self, i: int) -> None:
        """Jointly satisfy node i's degree and strength equations.

        For each trial y the degree equation is solved exactly, leaving a
        monotone one-dimensional strength gap in y. This is an exact
        block-coordinate ascent step of the concave ensemble likelihood, so
        cycling over nodes converges where a plain alternating scheme can
        oscillate.
        """
        k_target = self.k_obs[i]
        s_target = self.s_obs[i]

        def strength_gap(ly_trial: float) -> float:
            c, one_minus_yy = self._pair_factors(i, ly_trial)
            z = self._degree_root(c, k_target, self.lu[i])
            p = 1.0 / (1.0 + c * np.exp(-z))
            return float((p / one_minus_yy).sum()) - s_target

        self.ly[i] = _bracketed_root(strength_gap, self.ly[i], _LY_MIN, _LY_MAX)
        c, _ = self._pair_factors(i, self.ly[i])
        self.lu[i] = self._degree_root(c, k_target, self.lu[i])


def ecm_fit(gm: CoassociationGraph, tol: float = 1e-8,
            max_iter: int = 100_000) -> EcmParameters:
    """Fit the enhanced configuration model to observed degrees/strengths.

    A damped multiplicative fixed-point iteration makes the cheap interior
    progress; per-node joint root solves (block coordinate ascent) finish
    the job, and are the only effective path for boundary cases such as
    nodes whose strength equals their degree (y -> 0 with x*y finite).
    max_iter caps the total number of expectation evaluations; if the
    tolerance is not met within it, SolverError carries the residual.
    """
    g = gm.graph
    if g.num_edges == 0:
        raise InputError("ECM requires a co-association graph with >= 1 edge")
    active = [n for n in g.nodes if g.degree(n) > 0]
    k_obs = np.array([g.degree(n) for n in active], dtype=float)
    s_obs = np.array([g.strength(n) for n in active], dtype=float)
    n = len(active)

    system = _EcmSystem(k_obs, s_obs, budget=max_iter)
    residual = system.residual()
    damping = 1.0
    multiplicative = True

    while residual > tol and not system.exhausted():
        if multiplicative:
            lu_old, ly_old = system.lu, system.ly
            k_model, s_model = _ecm_model_sums(lu_old, ly_old)
            system.evaluations += n
            system.lu = np.clip(lu_old + damping * np.log(k_obs / k_model),
                                _LU_MIN, _LU_MAX)
            system.ly = np.clip(ly_old + damping * np.log(s_obs / s_model),
                                _LY_MIN, _LY_MAX)
            new_residual = system.residual()
            if new_residual < 0.95 * residual:
                residual = new_residual
                damping = min(1.0, damping * 1.2)
            else:
                system.lu, system.ly = lu_old, ly_old
                damping *= 0.5
                if damping < 0.05:
                    multiplicative = False
        else:
            for i in range(n):
                system.solve_node(i)
            residual = system.residual()

    if residual > tol:
        raise SolverError(f"ECM fit did not reach tol={tol:g} within "
                          f"{max_iter} evaluations (residual {residual:.3e})",
                          residual=residual)

    x = {m: 0.0 for m in g.nodes}
    y = {m: 0.0 for m in g.nodes}
    for i, node in enumerate(active):
        x[node] = float(np.exp(system.lu[i] - system.ly[i]))
        y[node] = float(np.exp(system.ly[i]))
    return EcmParameters(x, y, residual)


def ecm_pvalues(gm: CoassociationGraph, params: EcmParameters) -> EdgeSignificance:
    """Closed-form geometric tail P(weight >= w) for every observed edge."""
    pvalues = {pair: params.weight_survival(pair[0], pair[1], w)
               for pair, w in gm.graph.weights.items()}
    return EdgeSignificance("ecm", pvalues)


def gloss_pvalues(gm: CoassociationGraph) -> EdgeSignificance:
    """Empirical inclusive survival of each edge's weight."""
    weights = list(gm.graph.weights.values())
    if not weights:
        raise InputError("GloSS requires a co-association graph with >= 1 edge")
    n_edges = len(weights)
    counts: dict[int, int] = {}
    for w in weights:
        counts[w] = counts.get(w, 0) + 1
    survival: dict[int, float] = {}
    running = 0
    for w in sorted(counts, reverse=True):
        running += counts[w]
        survival[w] = running / n_edges
    pvalues = {pair: survival[w] for pair, w in gm.graph.weights.items()}
    return EdgeSignificance("gloss", pvalues)


def apply_filter(m: CoassociationMatrix, gm: CoassociationGraph,
                 sig: EdgeSignificance, alpha: float) -> CoassociationMatrix:
    """Zero out matrix entries whose p-value reaches alpha (inclusive)."""
    missing = set(gm.graph.weights) - set(sig.pvalues)
    if missing:
        raise InputError(f"missing p-values for {len(missing)} edges "
                         f"(e.g. {sorted(missing)[0]})")
    return m.without(sig.dropped(alpha))


def compute_significance(gm: CoassociationGraph,
                         model: str) -> EdgeSignificance:
    """P-values under the named null model (mlf, ecm or gloss)."""
    if model == "mlf":
        return mlf_pvalues(gm)
    if model == "ecm":
        return ecm_pvalues(gm, ecm_fit(gm))
    if model == "gloss":
        return gloss_pvalues(gm)
    raise InputError(f"unknown significance model {model!r}")


def filter_coassociation(g: MultilayerGraph, e: Ensemble, model: str,
                         cfg: FilterConfig) -> tuple[CoassociationMatrix,
                                                     CoassociationGraph,
                                                     EdgeSignificance | None,
                                                     CoassociationMatrix]:
    """Build the co-association matrix and prune it with the chosen model.

    Returns (matrix, graph, significance, filtered matrix); significance is
    None for the threshold baseline, which has no p-values.
    """
    if model not in FILTER_MODELS:
        raise InputError(f"unknown filter model {model!r}; "
                         f"choose one of {', '.join(FILTER_MODELS)}")
    matrix = build_coassociation(g, e)
    gm = build_coassociation_graph(matrix)
    if model == "threshold":
        if cfg.theta is None:
            raise InputError("threshold filtering requires theta")
        return matrix, gm, None, filter_threshold(matrix, cfg.theta)
    if matrix.num_entries == 0:
        return matrix, gm, EdgeSignificance(model, {}), matrix
    sig = compute_significance(gm, model)
    return matrix, gm, sig, apply_filter(matrix, gm, sig, cfg.alpha)


def save_significance(gm: CoassociationGraph, sig: EdgeSignificance,
                      alpha: float, path: str) -> None:
    """TSV report: srcId dstId weight pvalue verdict."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# model={sig.model} alpha={alpha}\n")
        fh.write("# src\tdst\tweight\tpvalue\tverdict\n")
        for (u, v) in sorted(gm.graph.weights):
            w = gm.graph.weights[(u, v)]
            p = sig.pvalues[(u, v)]
            verdict = "keep" if p < alpha else "drop"
            fh.write(f"{u}\t{v}\t{w}\t{p:.6g}\t{verdict}\n")
