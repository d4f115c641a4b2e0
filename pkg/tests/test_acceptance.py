"""Acceptance battery.

Each criterion is a single test that prints one PASS/FAIL line (bypassing
capture) and asserts the same condition.  The heavyweight simulation battery
behind criteria 1-2 runs once as a module fixture; everything else is
self-contained and fast.
"""

import math
from collections import defaultdict

import numpy as np
import pytest

from stcv.condvar import conditional_covariance, conditional_variance_profile
from stcv.data import read_dataset_csv
from stcv.errors import cv_estimate
from stcv.models import ForestParams, KrigingConfig, ModelSpec
from stcv.models.kriging import fit_kriging
from stcv.partition import (
    buffered_llo,
    default_buffer_distances,
    llo_k,
    lolo,
    naive_kfold,
)
from stcv.simulate import (
    GPSimConfig,
    sample_gp,
    separable_spacetime_cov,
    simulate_replicate,
)
from stcv.study import EstimatorSpec, StudyConfig, _run_unit, make_case_study_fixture
from stcv.summaries import bootstrap_bands

from conftest import make_grid_dataset

MASTER = 20080620

RF = ModelSpec("random_forest", forest=ForestParams(n_trees=200, min_leaf=3))
KRIG = ModelSpec("kriging")


def _verdict(capsys, num, desc, ok, detail=""):
    with capsys.disabled():
        print(f"\ncriterion {num:2d} [{desc}]: {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {num} ({desc}) failed {detail}"


@pytest.fixture(scope="module")
def battery():
    """Median CV estimates per (scenario, model, estimator) over 20 replicates
    of scenarios 1 and 3 (both models) plus scenario 7 (forest only)."""
    main_cfg = StudyConfig(
        scenarios=(1, 3),
        replicates=20,
        models=(RF, KRIG),
        estimators=(
            EstimatorSpec("naive_kfold", K=10),
            EstimatorSpec("lolo"),
            EstimatorSpec("buffered", buffer_fraction=0.15, name="buffered_medium"),
        ),
        master_seed=MASTER,
    )
    # same master seed and estimator position, so the forest fits for the
    # shared (scenario, replicate) units are identical streams
    side_cfg = StudyConfig(
        scenarios=(7,),
        replicates=20,
        models=(RF,),
        estimators=(EstimatorSpec("naive_kfold", K=10),),
        master_seed=MASTER,
    )
    values = defaultdict(list)
    for cfg in (main_cfg, side_cfg):
        for s in cfg.scenarios:
            for r in range(cfg.replicates):
                agg, _, n_failed = _run_unit(cfg, s, r)
                assert n_failed == 0, f"scenario {s} replicate {r}: {agg}"
                for row in agg:
                    values[(row[0], row[2], row[3])].append(float(row[4]))
    return {k: float(np.median(v)) for k, v in values.items()}


def test_criterion_01_estimator_ordering(battery, capsys):
    """Naive CV is optimistic, LOLO tracks the true interpolation error and a
    medium buffer over-corrects, for both nonlinear models on scenarios 1 and 3."""
    problems = []
    for s in (1, 3):
        for model in ("random_forest", "kriging"):
            true = battery[(s, model, "true_grid")]
            naive = battery[(s, model, "naive_cv10")]
            lol = battery[(s, model, "lolo")]
            buf = battery[(s, model, "buffered_medium")]
            if not naive < true:
                problems.append(f"s{s}/{model}: naive {naive:.4g} !< true {true:.4g}")
            if not abs(lol - true) <= 0.25 * true:
                problems.append(f"s{s}/{model}: lolo {lol:.4g} not within 25% of {true:.4g}")
            if not buf > true:
                problems.append(f"s{s}/{model}: buffered {buf:.4g} !> true {true:.4g}")
    _verdict(capsys, 1, "estimator ordering vs true error", not problems, "; ".join(problems))


def test_criterion_02_optimism_attenuation(battery, capsys):
    """The naive-CV optimism gap for the forest shrinks when there are more
    monitors and stronger spatial dependence (scenario 7 vs scenario 1)."""
    gaps = {}
    for s in (1, 7):
        true = battery[(s, "random_forest", "true_grid")]
        naive = battery[(s, "random_forest", "naive_cv10")]
        gaps[s] = (true - naive) / true
    _verdict(capsys, 2, "optimism gap shrinks with denser monitoring",
             gaps[7] < gaps[1], f"gaps {gaps}")


def test_criterion_03_llo_n_equals_lolo(capsys):
    """K-fold leave-location-out with K = n is exactly leave-one-location-out,
    fold for fold, for a deterministic and a seeded stochastic model."""
    ok = True
    detail = ""
    for model in (ModelSpec("ols"),
                  ModelSpec("random_forest", forest=ForestParams(n_trees=25))):
        ds = make_grid_dataset(n_locations=6, n_times=4, p=2, seed=9, missing=[(1, 2)])
        a = cv_estimate(ds, llo_k(ds, ds.n_locations, seed=31), model, seed=5)
        b = cv_estimate(ds, lolo(ds), model, seed=5)
        same = a.estimate == b.estimate and all(
            fa == fb and la.value == lb.value and la.n == lb.n
            for (fa, la), (fb, lb) in zip(a.per_fold_losses, b.per_fold_losses)
        )
        if not same:
            ok = False
            detail += f" {model.kind}: {a.estimate} vs {b.estimate}"
    _verdict(capsys, 3, "llo_n identical to lolo", ok, detail)


def test_criterion_04_conditional_variance_ordering(capsys):
    """Per test cell of a strongly dependent replicate, the exact conditional
    variance is ordered naive <= lolo <= buffered chain, and the naive scheme's
    mean is far below the lolo mean."""
    field = simulate_replicate(3, 0, MASTER)
    obs = field.observed_dataset()

    def keyed(partition_or_tag):
        p = conditional_variance_profile(field, partition_or_tag)
        return {(int(l), float(t)): v
                for l, t, v in zip(p.location_idx, p.times, p.cond_var)}

    # naive CV instantiated at its finest grain (one observation per fold),
    # which keeps every same-location, same-time neighbour in training
    naive_loo = keyed(naive_kfold(obs, obs.n_obs, seed=0))
    naive_10 = keyed(naive_kfold(obs, 10, seed=0))
    lol = keyed(lolo(obs))
    buffers = [keyed(buffered_llo(obs, d)) for d in default_buffer_distances(obs)]

    tol = 1e-10
    chain_ok = all(
        naive_loo[k] <= lol[k] + tol
        and lol[k] <= buffers[0][k] + tol
        and buffers[0][k] <= buffers[1][k] + tol
        and buffers[1][k] <= buffers[2][k] + tol
        for k in lol
    )
    mean_lolo = float(np.mean(list(lol.values())))
    r_loo = float(np.mean(list(naive_loo.values()))) / mean_lolo
    r_10 = float(np.mean(list(naive_10.values()))) / mean_lolo
    means_ok = r_loo < 0.5 and r_10 < 0.5
    _verdict(capsys, 4, "conditional variance ordering across schemes",
             chain_ok and means_ok,
             f"chain_ok={chain_ok} mean ratios loo={r_loo:.4g} cv10={r_10:.4g}")


def test_criterion_05_schur_complement_oracle(capsys):
    """The closed-form conditional covariance matches a 2x2 hand value exactly
    and a 100,000-draw Monte-Carlo regression within 3%."""
    rho = 0.6
    two = conditional_covariance(np.array([[1.0, rho], [rho, 1.0]]), [0], [1])[0, 0]
    exact_ok = abs(two - (1 - rho**2)) < 1e-14

    cov = separable_spacetime_cov([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
                                  [1.0], 1.5, 1.0, 1e-6)
    want = conditional_covariance(cov, [0], [1, 2])[0, 0]
    rng = np.random.default_rng(11)
    L = np.linalg.cholesky(cov)
    draws = (L @ rng.standard_normal((3, 100_000))).T
    design = np.column_stack([np.ones(len(draws)), draws[:, 1:]])
    coef, *_ = np.linalg.lstsq(design, draws[:, 0], rcond=None)
    mc = float(np.var(draws[:, 0] - design @ coef))
    mc_ok = abs(mc - want) / want < 0.03
    _verdict(capsys, 5, "conditional covariance vs Monte-Carlo", exact_ok and mc_ok,
             f"2x2 {two}, mc {mc:.6g} vs {want:.6g}")


def test_criterion_06_gp_sampler_fidelity(capsys):
    """5,000 samples from a 6-cell separable covariance reproduce it within
    Frobenius distance 0.1, and same-seed draws are bit-identical."""
    cov = separable_spacetime_cov([(0.0, 0.0), (1.0, 0.0), (2.0, 1.0)],
                                  [1.0, 2.0], 2.0, 2.5, 1e-6)
    gen = np.random.default_rng(123)
    draws = np.array([sample_gp(np.zeros(6), cov, gen) for _ in range(5000)])
    frob = float(np.linalg.norm(np.cov(draws.T, ddof=1) - cov, "fro"))
    a = sample_gp(np.zeros(6), cov, seed=7)
    b = sample_gp(np.zeros(6), cov, seed=7)
    ok = frob < 0.1 and np.array_equal(a, b)
    _verdict(capsys, 6, "GP sampler covariance and determinism", ok, f"frobenius {frob:.4g}")


def test_criterion_07_kriging_interpolation(capsys):
    """With a zero nugget the kriging surface passes exactly through all 30
    training points."""
    field = simulate_replicate(
        GPSimConfig(grid_side=8, n_days=3, n_observed=10), replicate_id=3,
        master_seed=2024,
    )
    obs = field.observed_dataset()
    assert obs.n_obs == 30
    rule = fit_kriging(obs, KrigingConfig(optimize=False, v_s=2.0, v_t=2.0,
                                          nugget_share=0.0))
    pred = rule.predict(obs.obs_X(), obs.obs_coords(), obs.obs_times())
    y = obs.obs_y()
    rel = float(np.max(np.abs(pred - y) / np.maximum(np.abs(y), 1e-12)))
    _verdict(capsys, 7, "zero-nugget kriging interpolates training points",
             np.allclose(pred, y, rtol=1e-8, atol=1e-8 * np.abs(y).max()),
             f"max relative deviation {rel:.3g}")


def test_criterion_08_spurious_covariates(capsys):
    """The three pure-noise covariates stay uncorrelated with the outcome
    across 50 replicates of the low-dependence scenario."""
    cors = {3: [], 4: [], 5: []}
    for rep in range(50):
        field = simulate_replicate(1, rep, MASTER)
        y = field.outcome.ravel()
        for k in cors:
            cors[k].append(abs(np.corrcoef(y, field.covariates[:, :, k].ravel())[0, 1]))
    bound = 3.0 / math.sqrt(field.outcome.size) + 0.05
    means = {k: float(np.mean(v)) for k, v in cors.items()}
    _verdict(capsys, 8, "spurious covariates uncorrelated with outcome",
             all(m < bound for m in means.values()), f"means {means} bound {bound:.4g}")


def test_criterion_09_bootstrap_band_sanity(capsys):
    """Identical replicates give zero-width bands; a two-replicate toy matches
    the exactly enumerable resampling distribution within 1%."""
    curves = np.tile(np.array([1.0, 2.0, 3.0]), (6, 1))
    lo, med, hi = bootstrap_bands(curves, B=300, seed=0)
    zero_ok = np.allclose(hi - lo, 0.0, atol=1e-14) and np.allclose(lo, curves[0])

    a, b = 1.0, 3.0
    lo2, med2, hi2 = bootstrap_bands(np.array([[a], [b]]), B=10_000, seed=42)
    enum_ok = (abs(lo2[0] - a) / a < 0.01
               and abs(hi2[0] - b) / b < 0.01
               and abs(med2[0] - (a + b) / 2) / ((a + b) / 2) < 0.01)
    _verdict(capsys, 9, "bootstrap bands", zero_ok and enum_ok,
             f"toy bands {lo2[0]:.4g}/{med2[0]:.4g}/{hi2[0]:.4g}")


def test_criterion_10_ranking_flip(tmp_path, capsys):
    """On the bundled monitor-network fixture the best model under naive CV is
    not the best model under leave-one-location-out CV."""
    path = tmp_path / "fixture.csv"
    make_case_study_fixture(path, n_monitors=25, n_weeks=3, seed=2008)
    ds, _ = read_dataset_csv(path)
    models = {
        "ols": ModelSpec("ols"),
        "random_forest": ModelSpec("random_forest", forest=ForestParams(n_trees=100)),
    }
    table = {}
    for scheme, part in (("naive", naive_kfold(ds, 10, seed=7)), ("lolo", lolo(ds))):
        for name, model in models.items():
            table[(scheme, name)] = cv_estimate(ds, part, model, seed=11).estimate
    best_naive = min(models, key=lambda m: table[("naive", m)])
    best_lolo = min(models, key=lambda m: table[("lolo", m)])
    _verdict(capsys, 10, "model ranking flips between naive and lolo CV",
             best_naive != best_lolo, f"table {table}")
