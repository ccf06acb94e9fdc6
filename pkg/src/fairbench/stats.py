"""Regression machinery: dummy-coded designs, OLS with sequential ANOVA,
logistic regression by Newton IRLS, Wald inference, and marginal effects.

Designs are built from labeled verification pairs. Categoricals are
dummy-coded against their most frequent level (ties go lexicographic);
the pair pose angle enters as a continuous covariate in degrees. The
ANOVA decomposition is sequential (order of entry), which is what makes
the per-term eta^2 values stack exactly to R^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import (
    ConstantTarget,
    NonFiniteInput,
    NotConverged,
    RankDeficient,
    Separation,
    ZeroVariance,
)
from .geometry import chord_angle_deg
from .pairs import _COMBO_FIELD, POSITIVE, PairSet

MAX_ITERATIONS = 100
LL_TOL = 1e-10
GRADIENT_TOL = 1e-8
SEPARATION_BETA = 30.0
RIDGE = 1e-8
CONDITION_LIMIT = 1e12

DEFAULT_TERMS = ("gender", "age", "ethnicity", "pose")


@dataclass
class DesignMatrix:
    X: np.ndarray
    columns: list[str]
    terms: list[str]
    term_columns: dict[str, list[int]]
    term_kind: dict[str, str]  # "categorical" | "continuous"
    references: dict[str, str]
    term_levels: dict[str, list[tuple[str, int]]]  # level -> column index
    pruned: list[str]
    n_dropped: int = 0

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_cols(self) -> int:
        return self.X.shape[1]


def _categorical_columns(values: list[str]) -> tuple[str, list[str]]:
    """Reference level (most frequent, ties lexicographic) and dummy levels."""
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    reference = min(counts, key=lambda lv: (-counts[lv], lv))
    dummies = sorted(lv for lv in counts if lv != reference)
    return reference, dummies


def build_design(
    pair_set: PairSet,
    target: str,
    terms=DEFAULT_TERMS,
    threshold: float | None = None,
    dataset_labels=None,
) -> tuple[DesignMatrix, np.ndarray]:
    """Design matrix plus target vector from a labeled pair set.

    target "angle" regresses the pair's embedding angle in degrees;
    "correct_indicator" regresses 1{y == y_hat} under the given threshold.
    Rows missing the pose angle are dropped (and counted) only when the
    pose term is requested. ``dataset_labels`` adds a pooled-dataset
    categorical when a "dataset" term is present.
    """
    terms = list(terms)
    if "dataset" in terms and dataset_labels is None:
        raise ValueError("a dataset term requires dataset_labels")
    if dataset_labels is not None and len(dataset_labels) != len(pair_set.pairs):
        raise ValueError("dataset_labels must align with the pairs")

    rows = []
    for idx, p in enumerate(pair_set.pairs):
        if p.dist is None:
            raise ValueError(f"pair ({p.image_a}, {p.image_b}) has no distance")
        if p.g_combo is None:
            raise ValueError(f"pair ({p.image_a}, {p.image_b}) is unlabeled")
        if "pose" in terms and p.pose_angle_deg is None:
            continue
        rows.append(idx)
    n_dropped = len(pair_set.pairs) - len(rows)
    if not rows:
        raise ValueError("no usable rows after dropping pairs without pose")
    selected = [pair_set.pairs[i] for i in rows]

    if target == "angle":
        y = np.array([chord_angle_deg(p.dist) for p in selected], dtype=np.float64)
    elif target == "correct_indicator":
        if threshold is None:
            raise ValueError("correct_indicator requires a threshold")
        y = np.array(
            [float((p.dist <= threshold) == (p.label == POSITIVE)) for p in selected],
            dtype=np.float64,
        )
    else:
        raise ValueError(f"unknown target {target!r}")
    if np.all(y == y[0]):
        raise ConstantTarget(f"target {target!r} is constant over the design rows")

    columns = ["intercept"]
    data = [np.ones(len(selected))]
    term_columns: dict[str, list[int]] = {}
    term_kind: dict[str, str] = {}
    references: dict[str, str] = {}
    term_levels: dict[str, list[tuple[str, int]]] = {}
    pruned: list[str] = []

    for term in terms:
        if term == "pose":
            term_kind[term] = "continuous"
            term_columns[term] = [len(columns)]
            columns.append("pose_angle")
            data.append(np.array([p.pose_angle_deg for p in selected], dtype=np.float64))
            continue
        if term == "dataset":
            values = [str(dataset_labels[i]) for i in rows]
        else:
            field = _COMBO_FIELD[term]
            values = [getattr(p, field) for p in selected]
        reference, dummies = _categorical_columns(values)
        references[term] = reference
        term_kind[term] = "categorical"
        if not dummies:
            pruned.append(term)
            term_columns[term] = []
            term_levels[term] = []
            continue
        term_columns[term] = []
        term_levels[term] = []
        arr = np.array(values)
        for level in dummies:
            term_columns[term].append(len(columns))
            term_levels[term].append((level, len(columns)))
            columns.append(f"{term}:{level}")
            data.append((arr == level).astype(np.float64))

    X = np.column_stack(data)
    nonzero = [i for i in range(X.shape[1]) if np.any(X[:, i] != 0.0)]
    if len(nonzero) < X.shape[1]:
        raise AssertionError("observed levels cannot produce all-zero columns")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficient("design matrix is rank deficient after pruning")

    design = DesignMatrix(
        X=X,
        columns=columns,
        terms=[t for t in terms],
        term_columns=term_columns,
        term_kind=term_kind,
        references=references,
        term_levels=term_levels,
        pruned=pruned,
        n_dropped=n_dropped,
    )
    return design, y


# -- ordinary least squares with sequential ANOVA -------------------------

@dataclass(frozen=True)
class AnovaTerm:
    term: str
    sum_sq: float
    eta_sq: float


@dataclass(frozen=True)
class Diagnostics:
    normality_stat: float
    normality_p: float
    homosked_stat: float
    homosked_p: float


@dataclass
class OlsFit:
    coefficients: dict[str, float]
    residuals: np.ndarray
    r_squared: float
    anova: list[AnovaTerm]
    diagnostics: Diagnostics


def _lstsq_rss(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    q, r = np.linalg.qr(X)
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    return beta, float(resid @ resid)


def _jarque_bera(residuals: np.ndarray) -> tuple[float, float]:
    n = len(residuals)
    centered = residuals - residuals.mean()
    m2 = float((centered**2).mean())
    if m2 == 0.0:
        return 0.0, 1.0
    skew = float((centered**3).mean()) / m2**1.5
    kurt = float((centered**4).mean()) / m2**2
    stat = n / 6.0 * (skew**2 + (kurt - 3.0) ** 2 / 4.0)
    return stat, math.exp(-stat / 2.0)  # chi^2 with 2 df


def _breusch_pagan(X: np.ndarray, residuals: np.ndarray) -> tuple[float, float]:
    n, p = X.shape
    target = residuals**2
    ss_total = float(((target - target.mean()) ** 2).sum())
    if ss_total == 0.0 or p < 2:
        return 0.0, 1.0
    _, rss = _lstsq_rss(X, target)
    r2 = 1.0 - rss / ss_total
    stat = n * r2
    return stat, float(chi2.sf(stat, p - 1))


def ols_anova(design: DesignMatrix, y: np.ndarray) -> OlsFit:
    """Least-squares fit with order-of-entry sums of squares per term.

    Each term's dummies enter as one group; eta^2 = SS_term / SS_total,
    where SS_total is the intercept-only residual sum of squares, so the
    per-term eta^2 values sum exactly to R^2. Residual diagnostics are
    Jarque-Bera (normality) and Breusch-Pagan (homoscedasticity).
    """
    X = design.X
    n, p = X.shape
    if n <= p:
        raise RankDeficient(f"{n} rows for {p} columns")
    y = np.asarray(y, dtype=np.float64)

    # nested fits: intercept, then each term group in entry order
    boundaries = [1]
    entered_terms = []
    for term in design.terms:
        cols = design.term_columns.get(term, [])
        if not cols:
            continue
        boundaries.append(boundaries[-1] + len(cols))
        entered_terms.append(term)

    rss = []
    for b in boundaries:
        _, r = _lstsq_rss(X[:, :b], y)
        rss.append(r)
    ss_total = rss[0]
    if ss_total == 0.0:
        raise ZeroVariance("target has zero variance")

    beta, rss_full = _lstsq_rss(X, y)
    residuals = y - X @ beta
    r_squared = 1.0 - rss_full / ss_total

    anova = []
    for i, term in enumerate(entered_terms):
        ss_term = rss[i] - rss[i + 1]
        anova.append(AnovaTerm(term=term, sum_sq=ss_term, eta_sq=ss_term / ss_total))

    jb_stat, jb_p = _jarque_bera(residuals)
    bp_stat, bp_p = _breusch_pagan(X, residuals)
    return OlsFit(
        coefficients={name: float(b) for name, b in zip(design.columns, beta)},
        residuals=residuals,
        r_squared=r_squared,
        anova=anova,
        diagnostics=Diagnostics(jb_stat, jb_p, bp_stat, bp_p),
    )


# -- logistic regression ---------------------------------------------------

@dataclass
class LogitFit:
    coefficients: dict[str, float]
    beta: np.ndarray
    std_errors: np.ndarray
    z_scores: np.ndarray
    p_values: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    ll_trace: list[float]


def _log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    return float((y * eta - np.logaddexp(0.0, eta)).sum())


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _information(X: np.ndarray, mu: np.ndarray) -> np.ndarray:
    w = mu * (1.0 - mu)
    H = X.T @ (w[:, None] * X)
    if np.linalg.cond(H) > CONDITION_LIMIT:
        H = H + RIDGE * np.eye(H.shape[0])
    return H


def logit_fit(design: DesignMatrix, y: np.ndarray) -> LogitFit:
    """Maximum-likelihood logistic regression by Newton-Raphson IRLS.

    Step-halving keeps the log-likelihood non-decreasing; a coefficient
    magnitude above 30 during iteration raises Separation. Standard
    errors come from the inverse observed information at the optimum and
    p-values from two-sided Wald tests.
    """
    X = design.X
    y = np.asarray(y, dtype=np.float64)
    if np.all(y == y[0]):
        raise ConstantTarget("target has a single class")

    beta = np.zeros(X.shape[1])
    eta = X @ beta
    ll = _log_likelihood(eta, y)
    trace = [ll]
    converged = False
    iterations = 0

    for iterations in range(1, MAX_ITERATIONS + 1):
        mu = _sigmoid(eta)
        gradient = X.T @ (y - mu)
        if float(np.abs(gradient).max()) < GRADIENT_TOL:
            converged = True
            iterations -= 1
            break
        H = _information(X, mu)
        step = np.linalg.solve(H, gradient)
        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            ll_new = _log_likelihood(X @ candidate, y)
            if ll_new >= ll:
                break
            scale /= 2.0
        else:
            converged = True  # no improving step exists at float precision
            break
        beta = candidate
        if float(np.abs(beta).max()) > SEPARATION_BETA:
            raise Separation(
                f"|beta| exceeded {SEPARATION_BETA}; data are (quasi-)separated"
            )
        eta = X @ beta
        delta = ll_new - ll
        ll = ll_new
        trace.append(ll)
        if abs(delta) < LL_TOL:
            converged = True
            break

    mu = _sigmoid(eta)
    H = _information(X, mu)
    cov = np.linalg.inv(H)
    se = np.sqrt(np.diag(cov))
    z = beta / se
    p = np.array([wald_p(float(v)) for v in z])
    return LogitFit(
        coefficients={name: float(b) for name, b in zip(design.columns, beta)},
        beta=beta,
        std_errors=se,
        z_scores=z,
        p_values=p,
        log_likelihood=ll,
        iterations=iterations,
        converged=converged,
        ll_trace=trace,
    )


@dataclass(frozen=True)
class MarginalEffect:
    term: str
    level: str
    reference: str
    effect: float  # probability-scale change versus the reference level
    p_value: float
    significant: bool


def marginal_effects(fit: LogitFit, design: DesignMatrix) -> list[MarginalEffect]:
    """Average discrete-change effect of each dummy level versus its reference.

    For every observation the level's dummy is switched on (siblings off)
    and then off, and the mean predicted-probability difference is
    reported. Significance is the level coefficient's Wald test.
    """
    if not fit.converged:
        raise NotConverged("marginal effects require a converged fit")
    out = []
    for term in design.terms:
        if design.term_kind.get(term) != "categorical":
            continue
        cols = design.term_columns[term]
        if not cols:
            continue
        for level, col in design.term_levels[term]:
            x_on = design.X.copy()
            x_on[:, cols] = 0.0
            x_off = x_on.copy()
            x_on[:, col] = 1.0
            p_on = _sigmoid(x_on @ fit.beta)
            p_off = _sigmoid(x_off @ fit.beta)
            p_value = float(fit.p_values[col])
            out.append(
                MarginalEffect(
                    term=term,
                    level=level,
                    reference=design.references[term],
                    effect=float((p_on - p_off).mean()),
                    p_value=p_value,
                    significant=p_value < 0.05,
                )
            )
    return out


def wald_p(z: float) -> float:
    """Two-sided normal p-value, 2*(1 - Phi(|z|)), via the error function."""
    if not math.isfinite(z):
        raise NonFiniteInput(f"z = {z}")
    return math.erfc(abs(z) / math.sqrt(2.0))
