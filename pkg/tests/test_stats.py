import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairbench.errors import (
    ConstantTarget,
    NonFiniteInput,
    NotConverged,
    RankDeficient,
    Separation,
    ZeroVariance,
)
from fairbench.pairs import NEGATIVE, POSITIVE, PairSet, VerificationPair
from fairbench.stats import (
    DesignMatrix,
    build_design,
    logit_fit,
    marginal_effects,
    ols_anova,
    wald_p,
)


def labeled_pairs(rows):
    """rows: (g, a, e, dist, label, pose_angle or None)."""
    pairs = []
    for i, (g, a, e, dist, label, pose) in enumerate(rows):
        pairs.append(VerificationPair(
            image_a=2 * i, image_b=2 * i + 1, label=label, dist=dist,
            g_combo=g, a_combo=a, e_combo=e, hardness="hard", pose_angle_deg=pose,
        ))
    return PairSet(tuple(pairs))


def simple_design(x, name="g:B", term="g", reference="A"):
    """Intercept plus one dummy column, enough structure for marginal effects."""
    X = np.column_stack([np.ones(len(x)), np.asarray(x, float)])
    return DesignMatrix(
        X=X,
        columns=["intercept", name],
        terms=[term],
        term_columns={term: [1]},
        term_kind={term: "categorical"},
        references={term: reference},
        term_levels={term: [("B", 1)]},
        pruned=[],
    )


# -- build_design ----------------------------------------------------------

def test_build_design_reference_most_frequent():
    rows = [
        ("Male×Male", "a", "e", 0.5, POSITIVE, None),
        ("Male×Male", "a", "e", 0.6, POSITIVE, None),
        ("Female×Male", "a", "e", 1.5, NEGATIVE, None),
    ]
    design, y = build_design(labeled_pairs(rows), "angle", ["gender"])
    assert design.columns == ["intercept", "gender:Female×Male"]
    assert design.references["gender"] == "Male×Male"
    assert y.shape == (3,)


def test_build_design_single_level_pruned():
    rows = [("g", "a", "e", 0.5, POSITIVE, None), ("g", "a", "e", 1.5, NEGATIVE, None)]
    design, _ = build_design(labeled_pairs(rows), "angle", ["gender"])
    assert design.pruned == ["gender"]
    assert design.columns == ["intercept"]


def test_build_design_three_levels_two_dummies():
    rows = [("gA", "a", "e", 0.5, POSITIVE, None),
            ("gB", "a", "e", 0.8, POSITIVE, None),
            ("gB", "a", "e", 1.2, NEGATIVE, None),
            ("gC", "a", "e", 1.5, NEGATIVE, None)]
    design, _ = build_design(labeled_pairs(rows), "angle", ["gender"])
    assert design.columns == ["intercept", "gender:gA", "gender:gC"]
    assert design.references["gender"] == "gB"


def test_build_design_drops_missing_pose_rows():
    rows = [("gA", "a", "e", 0.5, POSITIVE, 10.0),
            ("gB", "a", "e", 1.5, NEGATIVE, None),
            ("gA", "a", "e", 0.9, POSITIVE, 35.0),
            ("gB", "a", "e", 1.1, NEGATIVE, 50.0),
            ("gB", "a", "e", 0.7, POSITIVE, 20.0)]
    design, y = build_design(labeled_pairs(rows), "angle", ["gender", "pose"])
    assert design.n_dropped == 1
    assert design.n_rows == 4
    assert "pose_angle" in design.columns


def test_build_design_correct_indicator_and_constant_target():
    rows = [("gA", "a", "e", 0.5, POSITIVE, None),   # predicted pos: correct
            ("gB", "a", "e", 0.6, NEGATIVE, None),   # predicted pos: wrong
            ("gB", "a", "e", 1.5, NEGATIVE, None)]   # predicted neg: correct
    design, y = build_design(labeled_pairs(rows), "correct_indicator", ["gender"],
                             threshold=1.0)
    assert y.tolist() == [1.0, 0.0, 1.0]
    # with only the two well-separated pairs every prediction is correct
    with pytest.raises(ConstantTarget):
        build_design(labeled_pairs([rows[0], rows[2]]), "correct_indicator",
                     ["gender"], threshold=1.0)


def test_build_design_ties_pick_lexicographic_reference():
    rows = [("gB", "a", "e", 0.5, POSITIVE, None),
            ("gB", "a", "e", 0.7, POSITIVE, None),
            ("gA", "a", "e", 1.2, NEGATIVE, None),
            ("gA", "a", "e", 1.5, NEGATIVE, None)]
    design, _ = build_design(labeled_pairs(rows), "angle", ["gender"])
    assert design.references["gender"] == "gA"


# -- OLS + sequential ANOVA --------------------------------------------------

def test_ols_perfect_binary_factor():
    rows = [("gA", "a", "e", 0.2, POSITIVE, None), ("gA", "a", "e", 0.3, POSITIVE, None),
            ("gB", "a", "e", 0.8, NEGATIVE, None), ("gB", "a", "e", 0.9, NEGATIVE, None)]
    ps = labeled_pairs(rows)
    design, _ = build_design(ps, "angle", ["gender"])
    y = np.array([1.0, 1.0, 3.0, 3.0])
    fit = ols_anova(design, y)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.anova[0].eta_sq == pytest.approx(1.0, abs=1e-12)
    assert abs(fit.residuals.sum()) <= 1e-10


def test_ols_zero_variance():
    design = simple_design([0.0, 1.0, 0.0, 1.0])
    with pytest.raises(ZeroVariance):
        ols_anova(design, np.full(4, 2.5))


def test_ols_rank_deficient_when_overparameterized():
    design = simple_design([0.0, 1.0])
    with pytest.raises(RankDeficient):
        ols_anova(design, np.array([1.0, 2.0]))


def projection_eta_oracle(X_groups, y):
    """Independent sequential-projection oracle using pseudoinverses."""
    y = np.asarray(y, float)
    ss_total = float(((y - y.mean()) ** 2).sum())
    etas = []
    previous = np.column_stack([np.ones(len(y))])
    explained_prev = 0.0
    for group in X_groups:
        current = np.column_stack([previous, group])
        hat = current @ np.linalg.pinv(current)
        explained = float(y @ hat @ y) - len(y) * y.mean() ** 2
        etas.append((explained - explained_prev) / ss_total)
        previous, explained_prev = current, explained
    return etas


def test_ols_two_orthogonal_factors_match_projection_oracle():
    rng = np.random.default_rng(4)
    n = 80
    g = rng.integers(0, 2, n).astype(float)
    a = rng.integers(0, 2, n).astype(float)
    y = 2.0 + 1.5 * g - 0.8 * a + rng.standard_normal(n) * 0.3
    rows = [(f"g{int(gi)}", f"a{int(ai)}", "e", 0.5, POSITIVE, None)
            for gi, ai in zip(g, a)]
    rows[0] = (rows[0][0], rows[0][1], "e", 1.5, NEGATIVE, None)
    ps = labeled_pairs(rows)
    design, _ = build_design(ps, "angle", ["gender", "age"])
    fit = ols_anova(design, y)
    g_col = design.X[:, design.term_columns["gender"]]
    a_col = design.X[:, design.term_columns["age"]]
    want = projection_eta_oracle([g_col, a_col], y)
    assert fit.anova[0].eta_sq == pytest.approx(want[0], abs=1e-10)
    assert fit.anova[1].eta_sq == pytest.approx(want[1], abs=1e-10)
    assert abs(sum(t.eta_sq for t in fit.anova) - fit.r_squared) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ols_eta_identity_and_pinv_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 120))
    p_levels = int(rng.integers(2, 4))
    levels_g = [f"g{i}" for i in range(p_levels)]
    levels_a = ["a0", "a1"]
    gs = rng.choice(levels_g, n)
    aas = rng.choice(levels_a, n)
    pose = rng.uniform(0, 90, n)
    rows = [(g, a, "e", 0.5, POSITIVE, float(pa)) for g, a, pa in zip(gs, aas, pose)]
    rows[0] = (rows[0][0], rows[0][1], "e", 1.5, NEGATIVE, rows[0][5])
    ps = labeled_pairs(rows)
    try:
        design, y = build_design(ps, "angle", ["gender", "age", "pose"])
    except (RankDeficient, ConstantTarget):
        return
    y = y + rng.standard_normal(n)  # add noise so the fit is non-trivial
    try:
        fit = ols_anova(design, y)
    except RankDeficient:
        return
    assert abs(sum(t.eta_sq for t in fit.anova) - fit.r_squared) <= 1e-10
    beta_oracle = np.linalg.pinv(design.X) @ y
    got = np.array([fit.coefficients[c] for c in design.columns])
    assert np.max(np.abs(got - beta_oracle)) <= 1e-9


def test_ols_permutation_invariant():
    rng = np.random.default_rng(9)
    n = 120
    x = rng.integers(0, 2, n).astype(float)
    y = 1.0 + 0.7 * x + rng.standard_normal(n)
    fit = ols_anova(simple_design(x), y)
    perm = rng.permutation(n)
    fit2 = ols_anova(simple_design(x[perm]), y[perm])
    assert abs(fit.r_squared - fit2.r_squared) <= 1e-9
    assert abs(fit.anova[0].eta_sq - fit2.anova[0].eta_sq) <= 1e-9
    for col in fit.coefficients:
        assert abs(fit.coefficients[col] - fit2.coefficients[col]) <= 1e-9


def test_ols_diagnostics_detect_violations():
    rng = np.random.default_rng(11)
    n = 4000
    x = rng.uniform(0, 1, n)
    design = simple_design(x)
    # clean normal homoscedastic residuals: both tests comfortable
    y = 1.0 + 0.5 * x + rng.standard_normal(n) * 0.2
    fit = ols_anova(design, y)
    assert fit.diagnostics.normality_p > 0.01
    assert fit.diagnostics.homosked_p > 0.01
    # heteroscedastic: variance grows with x
    y_het = 1.0 + 0.5 * x + rng.standard_normal(n) * (0.05 + x)
    fit_het = ols_anova(design, y_het)
    assert fit_het.diagnostics.homosked_p < 0.01
    # heavy-tailed residuals: normality rejected
    y_heavy = 1.0 + 0.5 * x + rng.standard_t(2, n)
    fit_heavy = ols_anova(design, y_heavy)
    assert fit_heavy.diagnostics.normality_p < 0.01


# -- logistic regression -----------------------------------------------------

def test_logit_2x2_closed_form():
    x = np.array([0.0] * 4 + [1.0] * 4)
    y = np.array([1, 1, 1, 0, 1, 0, 0, 0], dtype=float)
    fit = logit_fit(simple_design(x), y)
    assert fit.converged
    assert fit.coefficients["intercept"] == pytest.approx(math.log(3.0), abs=1e-8)
    assert fit.coefficients["g:B"] == pytest.approx(math.log(1.0 / 9.0), abs=1e-8)
    assert np.all(np.diff(fit.ll_trace) >= -1e-12)


def test_logit_intercept_only():
    design = DesignMatrix(
        X=np.ones((8, 1)), columns=["intercept"], terms=[], term_columns={},
        term_kind={}, references={}, term_levels={}, pruned=[],
    )
    y = np.array([1, 0, 0, 0, 1, 0, 0, 0], dtype=float)  # mean 0.25
    fit = logit_fit(design, y)
    assert fit.coefficients["intercept"] == pytest.approx(math.log(1.0 / 3.0), abs=1e-8)


def test_logit_2xj_contingency_closed_form():
    # three cells with distinct positive rates: coefficients are cell log-odds
    rng = np.random.default_rng(3)
    cells = {"c0": (40, 0.5), "c1": (60, 0.25), "c2": (80, 0.125)}
    xs, ys = [], []
    for j, (name, (n, rate)) in enumerate(cells.items()):
        k = int(n * rate)
        xs += [name] * n
        ys += [1.0] * k + [0.0] * (n - k)
    X = np.column_stack([
        np.ones(len(xs)),
        [1.0 if v == "c1" else 0.0 for v in xs],
        [1.0 if v == "c2" else 0.0 for v in xs],
    ])
    design = DesignMatrix(
        X=X, columns=["intercept", "g:c1", "g:c2"], terms=["g"],
        term_columns={"g": [1, 2]}, term_kind={"g": "categorical"},
        references={"g": "c0"}, term_levels={"g": [("c1", 1), ("c2", 2)]}, pruned=[],
    )
    fit = logit_fit(design, np.array(ys))
    logodds = lambda r: math.log(r / (1 - r))
    assert fit.coefficients["intercept"] == pytest.approx(logodds(0.5), abs=1e-8)
    assert fit.coefficients["g:c1"] == pytest.approx(logodds(0.25) - logodds(0.5), abs=1e-8)
    assert fit.coefficients["g:c2"] == pytest.approx(logodds(0.125) - logodds(0.5), abs=1e-8)


def test_logit_separation_raises():
    x = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    y = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])  # perfectly separated
    with pytest.raises(Separation):
        logit_fit(simple_design(x), y)


def test_logit_constant_target():
    with pytest.raises(ConstantTarget):
        logit_fit(simple_design([0.0, 1.0, 0.0, 1.0]), np.ones(4))


def test_logit_permutation_invariant():
    rng = np.random.default_rng(5)
    n = 200
    x = rng.integers(0, 2, n).astype(float)
    p = 1.0 / (1.0 + np.exp(-(0.3 - 0.8 * x)))
    y = (rng.uniform(size=n) < p).astype(float)
    design = simple_design(x)
    fit = logit_fit(design, y)
    perm = rng.permutation(n)
    fit2 = logit_fit(simple_design(x[perm]), y[perm])
    assert np.max(np.abs(fit.beta - fit2.beta)) <= 1e-9
    assert abs(fit.log_likelihood - fit2.log_likelihood) <= 1e-9
    assert np.max(np.abs(fit.std_errors - fit2.std_errors)) <= 1e-9


def test_logit_wald_se_against_closed_form():
    # 2x2 design: information is block-diagonal in cell space, so the SE of
    # each cell log-odds is sqrt(1/k + 1/(n-k)) combined across cells
    x = np.array([0.0] * 40 + [1.0] * 40)
    y = np.concatenate([np.repeat([1.0, 0.0], [30, 10]), np.repeat([1.0, 0.0], [10, 30])])
    fit = logit_fit(simple_design(x), y)
    var0 = 1 / 30 + 1 / 10
    var1 = 1 / 10 + 1 / 30
    assert fit.std_errors[0] == pytest.approx(math.sqrt(var0), abs=1e-6)
    assert fit.std_errors[1] == pytest.approx(math.sqrt(var0 + var1), abs=1e-6)


# -- marginal effects --------------------------------------------------------

def test_marginal_effect_2x2():
    x = np.array([0.0] * 4 + [1.0] * 4)
    y = np.array([1, 1, 1, 0, 1, 0, 0, 0], dtype=float)
    design = simple_design(x)
    fit = logit_fit(design, y)
    [effect] = marginal_effects(fit, design)
    assert effect.effect == pytest.approx(0.25 - 0.75, abs=1e-6)
    assert effect.term == "g" and effect.level == "B" and effect.reference == "A"


def test_marginal_effect_zero_coefficient():
    design = simple_design([0.0, 1.0, 0.0, 1.0])
    fit = logit_fit(design, np.array([1.0, 1.0, 0.0, 0.0]))
    fit.beta[1] = 0.0  # force a null level coefficient
    [effect] = marginal_effects(fit, design)
    assert effect.effect == 0.0


def test_marginal_effect_not_converged():
    design = simple_design([0.0, 1.0, 0.0, 1.0])
    fit = logit_fit(design, np.array([1.0, 1.0, 0.0, 0.0]))
    fit.converged = False
    with pytest.raises(NotConverged):
        marginal_effects(fit, design)


def test_marginal_effect_recovers_planted_rate_difference():
    rng = np.random.default_rng(12)
    n = 50_000
    x = rng.integers(0, 2, n).astype(float)
    rate = np.where(x == 1, 0.6, 0.5)  # planted +0.1 on level B
    y = (rng.uniform(size=n) < rate).astype(float)
    design = simple_design(x)
    fit = logit_fit(design, y)
    [effect] = marginal_effects(fit, design)
    assert effect.effect == pytest.approx(0.1, abs=0.02)
    assert effect.significant


# -- wald_p ------------------------------------------------------------------

def test_wald_p_values():
    assert wald_p(0.0) == 1.0
    assert wald_p(1.959964) == pytest.approx(0.05, abs=1e-4)
    assert wald_p(3.0) == pytest.approx(0.0027, abs=1e-4)
    assert wald_p(-3.0) == wald_p(3.0)
    with pytest.raises(NonFiniteInput):
        wald_p(float("nan"))


@settings(max_examples=100)
@given(st.floats(-37, 37))
def test_wald_p_in_range(z):
    p = wald_p(z)
    assert 0.0 < p <= 1.0
