"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Everything is seeded, so outcomes are bit-reproducible; tolerances are the
contract values, not tuned slack.
"""

import math
import time

import numpy as np

from dirinfo.core import TimeSeriesPanel, make_partition, symbolize
from dirinfo.discrete import enumerate_joint, sample_panels, with_stationary_initial
from dirinfo.gaussian import gaussian_mi_rate, geweke_index
from dirinfo.inference import (
    DiscreteMarkovFamily,
    VarFamily,
    infer_graph,
    llr_causality,
    llr_coupling,
    stein_exponent_check,
)
from dirinfo.measures import (
    decompose,
    directed_information,
    kl_directed_information,
    mutual_information,
    rate,
)
from dirinfo.simulate import (
    delay_channel,
    gen_chain_example,
    gen_nonlinear_example,
    random_feedback_free_model,
    random_markov_model,
    random_var_model,
)

HORIZON = 5


def _report(number, description, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    print(f"[{status}] criterion {number}: {description} {detail}".rstrip())
    assert passed, f"criterion {number} failed: {detail}"


def _identity_models():
    models = [(random_markov_model(seed, nodes=2), ("x0", "x1"))
              for seed in range(50)]
    models += [(random_markov_model(1000 + seed, nodes=3), ("x0", "x1", "x2"))
               for seed in range(20)]
    return models


def test_criterion_1_identity_suite():
    start = time.time()
    worst = 0.0
    for model, labels in _identity_models():
        dist = enumerate_joint(model, HORIZON)
        part = make_partition(labels, [labels[0]], [labels[1]])
        dec = decompose(dist, part, HORIZON)
        worst = max(worst, dec.max_residual())
    elapsed = time.time() - start
    _report(1, "six decomposition residuals < 1e-9 on 70 seeded models",
            worst < 1e-9 and elapsed < 60.0,
            f"(worst residual {worst:.2e}, {elapsed:.1f}s)")


def test_criterion_2_kl_oracle_equivalence():
    worst = 0.0
    for model, labels in _identity_models():
        dist = enumerate_joint(model, HORIZON)
        chain = directed_information(dist, (0,), (1,), HORIZON).value
        kl = kl_directed_information(dist, (0,), (1,), HORIZON).value
        worst = max(worst, abs(chain - kl))
    _report(2, "divergence form matches chain rule within 1e-10",
            worst < 1e-10, f"(worst gap {worst:.2e})")


def test_criterion_3_no_feedback_theorem():
    worst_free = 0.0
    for seed in range(20):
        model = random_feedback_free_model(seed)
        dist = enumerate_joint(model, HORIZON)
        mi = mutual_information(dist, (0,), (1,), HORIZON).value
        di = directed_information(dist, (0,), (1,), HORIZON).value
        worst_free = max(worst_free, abs(mi - di))
    strictly_positive = 0
    for seed in range(20):
        model = random_markov_model(seed, nodes=2)
        dist = enumerate_joint(model, HORIZON)
        mi = mutual_information(dist, (0,), (1,), HORIZON).value
        di = directed_information(dist, (0,), (1,), HORIZON).value
        if mi - di > 1e-3:
            strictly_positive += 1
    _report(3, "feedback-free |MI - DI| < 1e-10 and feedback term shows up",
            worst_free < 1e-10 and strictly_positive >= 15,
            f"(worst free gap {worst_free:.2e}, positive feedback "
            f"{strictly_positive}/20)")


def test_criterion_4_gaussian_decomposition():
    start = time.time()
    worst_biv = 0.0
    for seed in range(30):
        model = random_var_model(seed, nodes=2, order=2, noise_corr=0.3)
        pab = make_partition(model.labels, ["x0"], ["x1"])
        pba = make_partition(model.labels, ["x1"], ["x0"])
        total = (geweke_index(model, pab, "directed").value
                 + geweke_index(model, pba, "directed").value
                 + geweke_index(model, pab, "instantaneous").value)
        mi = gaussian_mi_rate(model, (0,), (1,)).value
        worst_biv = max(worst_biv, abs(total - mi))
    worst_tri = 0.0
    for seed in range(10):
        model = random_var_model(2000 + seed, nodes=3, order=2, noise_corr=0.25)
        pab = make_partition(model.labels, ["x0"], ["x1"])
        pba = make_partition(model.labels, ["x1"], ["x0"])
        total = (geweke_index(model, pab, "directed_conditional").value
                 + geweke_index(model, pba, "directed_conditional").value
                 + geweke_index(model, pab, "instantaneous_conditional").value)
        mi = gaussian_mi_rate(model, (0,), (1,), conditional_on_past_c=True).value
        worst_tri = max(worst_tri, abs(total - mi))
    elapsed = time.time() - start
    _report(4, "Geweke decomposition residual < 1e-6 (30 bivariate, 10 trivariate)",
            worst_biv < 1e-6 and worst_tri < 1e-6 and elapsed < 120.0,
            f"(bivariate {worst_biv:.2e}, conditional {worst_tri:.2e}, {elapsed:.1f}s)")


def test_criterion_5_lln_convergence():
    model = with_stationary_initial(delay_channel(0.1))
    te_rate = rate("te", model, (0,), (1,), n_max=HORIZON).value
    panels = sample_panels(model, 100_000, count=20, seed=505)
    worst_rel = 0.0
    for panel in panels:
        res = llr_causality(panel, ["x"], ["y"], family=DiscreteMarkovFamily(order=1))
        worst_rel = max(worst_rel, abs(res.statistic - te_rate) / te_rate)
    _report(5, "per-sample LLR matches the transfer entropy rate within 5%",
            worst_rel < 0.05, f"(rate {te_rate:.4f}, worst relative error "
            f"{worst_rel:.3f} over 20 seeds)")


def test_criterion_6_stein_exponent():
    model = delay_channel(0.45)
    report = stein_exponent_check(model, (0,), (1,), T_grid=(200, 500, 1000),
                                  trials=5000, miss_level=0.2, seed=20)
    largest = report.points[-1]
    T, p_fa, exponent, censored, _ = largest
    rel = abs(exponent - report.di_rate) / report.di_rate if not censored else math.inf
    _report(6, "false-alarm exponent within 20% of the DI rate at T=1000",
            (not censored) and rel < 0.20,
            f"(rate {report.di_rate:.5f}, exponent {exponent:.5f}, "
            f"relative error {rel:.3f}, P_FA {p_fa:.4f})")


def test_criterion_7_worked_examples():
    runs = 200
    chain_hits = 0
    for s in range(runs):
        panel, _ = gen_chain_example(10_000, seed=s)
        graph = infer_graph(panel, VarFamily(order=1), alpha=0.05,
                            correction="bonferroni")
        if graph.directed_edges() == {("x", "y"), ("y", "z")}:
            chain_hits += 1

    linear_keeps = 0
    discrete_detects = 0
    for s in range(runs):
        panel, _ = gen_nonlinear_example(0.5, 1.0, 20_000, seed=10_000 + s)
        linear = llr_causality(panel, ["y"], ["x"], family=VarFamily(order=1),
                               alpha=0.05)
        linear_keeps += linear.decision == "keep_H0"
        sym = symbolize(panel, bins=8, scheme="equal_frequency")
        disc = llr_causality(sym, ["y"], ["x"], family=DiscreteMarkovFamily(order=1),
                             alpha=0.05)
        discrete_detects += disc.decision == "reject_H0"

    ok = (chain_hits >= 0.90 * runs and linear_keeps >= 0.85 * runs
          and discrete_detects >= 0.90 * runs)
    _report(7, "chain recovery and the nonlinear blind spot at the contracted rates",
            ok, f"(chain {chain_hits}/200, linear keeps {linear_keeps}/200, "
            f"discrete detects {discrete_detects}/200)")


def _null_panel(seed, T):
    rng = np.random.default_rng(seed)
    return TimeSeriesPanel(values=rng.integers(0, 2, size=(T, 2)),
                           labels=("x0", "x1"))


def test_criterion_8_null_calibration():
    runs = 400
    alpha = 0.05
    lo, hi = alpha / 2, 2 * alpha
    family = DiscreteMarkovFamily(order=1)
    rates = {}

    rej_c = sum(llr_causality(_null_panel(s, 10_000), ["x0"], ["x1"], family=family,
                              alpha=alpha).decision == "reject_H0"
                for s in range(runs))
    rates["causality/chi_square"] = rej_c / runs
    rej_k = sum(llr_coupling(_null_panel(7000 + s, 10_000), ["x0"], ["x1"],
                             family=family, alpha=alpha).decision == "reject_H0"
                for s in range(runs))
    rates["coupling/chi_square"] = rej_k / runs

    rej_cs = sum(llr_causality(_null_panel(s, 4000), ["x0"], ["x1"], family=family,
                               alpha=alpha, calibration="surrogate", surrogates=200,
                               seed=90_000 + s).decision == "reject_H0"
                 for s in range(runs))
    rates["causality/surrogate"] = rej_cs / runs
    rej_ks = sum(llr_coupling(_null_panel(8000 + s, 4000), ["x0"], ["x1"],
                              family=family, alpha=alpha, calibration="surrogate",
                              surrogates=200, seed=95_000 + s).decision == "reject_H0"
                 for s in range(runs))
    rates["coupling/surrogate"] = rej_ks / runs

    ok = all(lo <= r <= hi for r in rates.values())
    detail = ", ".join(f"{k} {v:.3f}" for k, v in rates.items())
    _report(8, "null false-rejection rates inside [alpha/2, 2 alpha]", ok,
            f"({detail})")
