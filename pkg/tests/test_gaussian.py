import numpy as np
import pytest

from dirinfo.core import TimeSeriesPanel, make_partition, symbolize
from dirinfo.discrete import enumerate_joint, fit_plugin
from dirinfo.errors import InvalidModel, ParamError, SingularDesign, UnstableModel
from dirinfo.gaussian import (
    VarModel,
    autocovariance,
    fit_var,
    gaussian_mi_rate,
    geweke_index,
    prediction_variance,
    var_from_json,
    var_to_json,
)
from dirinfo.measures import delayed_directed_information, instantaneous_exchange
from dirinfo.simulate import gen_var, random_var_model


def bivariate_var1(a_to_b=0.4, corr=0.0):
    coeffs = np.array([[[0.5, 0.0], [a_to_b, 0.3]]])
    noise = np.array([[1.0, corr], [corr, 1.0]])
    return VarModel(order=1, coeffs=coeffs, noise_cov=noise, labels=("a", "b"))


# ---------------------------------------------------------------------------
# model validation and autocovariance
# ---------------------------------------------------------------------------

def test_varmodel_validation():
    with pytest.raises(InvalidModel):
        VarModel(order=1, coeffs=np.zeros((1, 2, 2)),
                 noise_cov=np.array([[1.0, 0.5], [0.2, 1.0]]), labels=("a", "b"))
    with pytest.raises(InvalidModel):
        VarModel(order=1, coeffs=np.zeros((1, 2, 2)),
                 noise_cov=np.array([[1.0, 1.0], [1.0, 1.0]]), labels=("a", "b"))
    model = bivariate_var1()
    assert model.is_stable and model.spectral_radius < 1.0


def test_autocovariance_matches_simulation():
    model = bivariate_var1(corr=0.3)
    gammas = autocovariance(model, 3)
    panel, _ = gen_var(model, 400_000, seed=3)
    x = panel.values - panel.values.mean(axis=0)
    for h in range(4):
        emp = x[h:].T @ x[:x.shape[0] - h] / (x.shape[0] - h)
        assert np.max(np.abs(emp - gammas[h])) < 0.02


def test_autocovariance_rejects_unstable():
    model = VarModel(order=1, coeffs=np.array([[[1.05, 0.0], [0.0, 0.2]]]),
                     noise_cov=np.eye(2), labels=("a", "b"))
    with pytest.raises(UnstableModel):
        autocovariance(model, 2)


# ---------------------------------------------------------------------------
# prediction risks
# ---------------------------------------------------------------------------

def test_full_information_set_recovers_noise_block():
    model = random_var_model(5, nodes=3, order=1, noise_corr=0.2)
    risk = prediction_variance(model, (1,), [((0, 1, 2), 16, False)])
    assert np.max(np.abs(risk.error_cov - model.noise_cov[1:2, 1:2])) < 1e-10


def test_irrelevant_predictors_leave_risk_unchanged():
    # no coupling a -> b and independent noises: a's past is useless for b
    model = bivariate_var1(a_to_b=0.0, corr=0.0)
    with_a = prediction_variance(model, (1,), [((1,), 64, False), ((0,), 64, False)])
    without = prediction_variance(model, (1,), [((1,), 64, False)])
    assert abs(with_a.risk - without.risk) < 1e-8


def test_projection_against_monte_carlo_regression():
    # DERIVED oracle: long-sample OLS risks vs analytic projection
    model = bivariate_var1(a_to_b=0.4)
    panel, _ = gen_var(model, 1_000_000, seed=11)
    x = panel.values - panel.values.mean(axis=0)
    y = x[1:, 1]
    full_design = x[:-1]
    restricted_design = x[:-1, 1:]
    for design, spec in ((full_design, [((0, 1), 64, False)]),
                         (restricted_design, [((1,), 64, False)])):
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        mc_risk = np.log(np.mean((y - design @ beta) ** 2))
        analytic = prediction_variance(model, (1,), spec).risk
        assert abs(mc_risk - analytic) < 0.01


def test_risk_monotone_under_nesting():
    model = random_var_model(7, nodes=3, order=2, noise_corr=0.3)
    nested = [
        [((1,), 32, False)],
        [((1,), 32, False), ((0,), 32, False)],
        [((1,), 32, False), ((0,), 32, False), ((2,), 32, False)],
        [((1,), 32, False), ((0,), 32, True), ((2,), 32, True)],
    ]
    risks = [prediction_variance(model, (1,), spec).risk for spec in nested]
    for smaller, larger in zip(risks[1:], risks[:-1]):
        assert smaller <= larger + 1e-10


def test_target_cannot_be_its_own_contemporaneous_predictor():
    model = bivariate_var1()
    with pytest.raises(ParamError):
        prediction_variance(model, (1,), [((1,), 4, True)])


# ---------------------------------------------------------------------------
# Geweke indices
# ---------------------------------------------------------------------------

def test_geweke_zero_without_coupling():
    model = bivariate_var1(a_to_b=0.0, corr=0.0)
    part_ba = make_partition(("a", "b"), ["b"], ["a"])
    assert abs(geweke_index(model, part_ba, "directed").value) < 1e-8


def test_geweke_instantaneous_zero_for_diagonal_noise():
    model = bivariate_var1(a_to_b=0.4, corr=0.0)
    part = make_partition(("a", "b"), ["a"], ["b"])
    assert abs(geweke_index(model, part, "instantaneous").value) < 1e-8


def test_geweke_directed_against_monte_carlo():
    model = bivariate_var1(a_to_b=0.4)
    part = make_partition(("a", "b"), ["a"], ["b"])
    f_ab = geweke_index(model, part, "directed").value
    panel, _ = gen_var(model, 1_000_000, seed=13)
    x = panel.values - panel.values.mean(axis=0)
    y = x[1:, 1]
    resid_var = []
    for cols in ([1], [0, 1]):
        design = x[:-1][:, cols]
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid_var.append(np.mean((y - design @ beta) ** 2))
    mc = np.log(resid_var[0] / resid_var[1])
    assert abs(mc - f_ab) < 0.01 * max(1.0, abs(f_ab))


@pytest.mark.parametrize("kind", ["directed", "instantaneous",
                                  "directed_conditional", "instantaneous_conditional"])
def test_geweke_indices_nonnegative(kind):
    for seed in range(5):
        model = random_var_model(seed, nodes=3, order=1, noise_corr=0.25)
        part = make_partition(model.labels, ["x0"], ["x1"])
        assert geweke_index(model, part, kind).value >= -1e-8


def test_truncation_doubling_stable():
    model = random_var_model(3, nodes=2, order=2, radius=0.9, noise_corr=0.4)
    part = make_partition(model.labels, ["x0"], ["x1"])
    at_128 = geweke_index(model, part, "directed", initial_lag=128, tol=0.0,
                          max_lag=128).value
    at_256 = geweke_index(model, part, "directed", initial_lag=256, tol=0.0,
                          max_lag=256).value
    assert abs(at_256 - at_128) < 1e-7


def test_bivariate_geweke_decomposition():
    model = random_var_model(21, nodes=2, order=2, noise_corr=0.35)
    pab = make_partition(model.labels, ["x0"], ["x1"])
    pba = make_partition(model.labels, ["x1"], ["x0"])
    total = (geweke_index(model, pab, "directed").value
             + geweke_index(model, pba, "directed").value
             + geweke_index(model, pab, "instantaneous").value)
    mi = gaussian_mi_rate(model, (0,), (1,)).value
    assert abs(total - mi) < 1e-6


def test_conditional_geweke_decomposition():
    model = random_var_model(22, nodes=3, order=2, noise_corr=0.3)
    pab = make_partition(model.labels, ["x0"], ["x1"])
    pba = make_partition(model.labels, ["x1"], ["x0"])
    total = (geweke_index(model, pab, "directed_conditional").value
             + geweke_index(model, pba, "directed_conditional").value
             + geweke_index(model, pab, "instantaneous_conditional").value)
    mi = gaussian_mi_rate(model, (0,), (1,), conditional_on_past_c=True).value
    assert abs(total - mi) < 1e-6


def test_mi_rate_zero_for_block_independent_model():
    coeffs = np.array([[[0.5, 0.0], [0.0, 0.3]]])
    model = VarModel(order=1, coeffs=coeffs, noise_cov=np.eye(2), labels=("a", "b"))
    assert abs(gaussian_mi_rate(model, (0,), (1,)).value) < 1e-8


def test_sign_pattern_agrees_with_discrete_measures():
    """Zero/positive pattern of discrete TE and IIE (8-bin symbolization,
    plug-in fit, horizon-4 enumeration) matches the Geweke indices across
    20 seeded designs."""
    te_threshold, iie_threshold = 0.01, 0.03
    for seed in range(20):
        coupled = seed % 2 == 0
        corr = 0.5 if seed % 4 < 2 else 0.0
        model = bivariate_var1(a_to_b=0.45 if coupled else 0.0, corr=corr)
        part = make_partition(("a", "b"), ["a"], ["b"])
        f_dir = geweke_index(model, part, "directed").value
        f_inst = geweke_index(model, part, "instantaneous").value

        panel, _ = gen_var(model, 100_000, seed=seed)
        fitted = fit_plugin(symbolize(panel, bins=8, scheme="equal_frequency"),
                            order=1, smoothing=0.5)
        dist = enumerate_joint(fitted, 4, budget=2**25)
        te = delayed_directed_information(dist, (0,), (1,), 4).value / 3
        iie = instantaneous_exchange(dist, (0,), (1,), 4).value / 4
        assert (te > te_threshold) == (f_dir > 1e-6), f"seed {seed}: TE sign mismatch"
        assert (iie > iie_threshold) == (f_inst > 1e-6), f"seed {seed}: IIE sign mismatch"


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("method", ["ols", "yule_walker"])
def test_fit_var_recovers_coefficients(method):
    model = bivariate_var1(a_to_b=0.4, corr=0.3)
    panel, _ = gen_var(model, 100_000, seed=2)
    fitted = fit_var(panel, order=1, method=method)
    assert np.max(np.abs(fitted.coeffs - model.coeffs)) < 0.02
    assert np.max(np.abs(fitted.noise_cov - model.noise_cov)) < 0.02
    assert fitted.is_stable


def test_fit_var_white_noise():
    rng = np.random.default_rng(4)
    panel = TimeSeriesPanel(values=rng.standard_normal((20_000, 2)), labels=("a", "b"))
    fitted = fit_var(panel, order=1)
    # 3 standard errors, se ~ 1/sqrt(T)
    assert np.max(np.abs(fitted.coeffs)) < 3.5 / np.sqrt(20_000)


def test_fit_var_too_short_is_singular():
    panel = TimeSeriesPanel(values=np.random.default_rng(0).normal(size=(2, 2)),
                            labels=("a", "b"))
    with pytest.raises(SingularDesign):
        fit_var(panel, order=1)


def test_fit_var_rank_deficient():
    rng = np.random.default_rng(1)
    col = rng.standard_normal(100)
    panel = TimeSeriesPanel(values=np.column_stack([col, col]), labels=("a", "b"))
    with pytest.raises(SingularDesign):
        fit_var(panel, order=1)


def test_var_json_roundtrip():
    model = random_var_model(9, nodes=3, order=2, noise_corr=0.2)
    back = var_from_json(var_to_json(model))
    assert np.allclose(back.coeffs, model.coeffs)
    assert np.allclose(back.noise_cov, model.noise_cov)
    assert back.labels == model.labels
