"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.  Criteria 4 and 10 assert their target thresholds
verbatim and are expected to fail: the equations themselves put the
quantities outside those thresholds at the stated parameters (details in
the README's test section; the tests print every measured value).
"""

import time

import numpy as np

from robust_asymp import (
    DIVERGED,
    FixedPointConfig,
    LossSpec,
    OutlierModel,
    bo_errors,
    bo_fixed_point,
    bo_rate_coefficient,
    bo_channel_pair,
    bo_prior_pair,
    estim_error_from_overlaps,
    excess_gen_error_from_overlaps,
    gamp,
    gen_consistency_condition,
    large_alpha_leading,
    optimize_hyperparams,
    quadrature_hat_updates,
    ridge_explicit,
    run_monte_carlo,
    sample_dataset,
    small_eps_expansion,
    solve_fixed_point,
    teacher_student_angle,
    update_hats_huber,
    update_hats_l1,
    update_hats_l2,
)

FIG1_LEFT = OutlierModel(eps=0.6, beta=0.0, delta_in=1.0, delta_out=0.5)
FIG1_RIGHT = OutlierModel(eps=0.3, beta=0.0, delta_in=1.0, delta_out=5.0)
FIG2_LEFT = dict(alpha=10.0, model=OutlierModel(eps=0.3, beta=0.0, delta_in=1.0, delta_out=5.0))
FIG2_RIGHT = dict(alpha=10.0, model=OutlierModel(eps=0.3, beta=0.0, delta_in=1.0, delta_out=0.5))


def report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"\n[criterion {num:2d}] {status} - {name}" + (f" ({detail})" if detail else ""))
    return ok


def test_criterion_01_ridge_oracle_equivalence():
    t0 = time.time()
    cfg = FixedPointConfig(tolerance=1e-12, max_iters=200_000)
    worst = 0.0
    for alpha in np.geomspace(0.5, 100.0, 5):
        for lam in np.geomspace(1e-3, 10.0, 5):
            for eps in np.linspace(0.0, 0.9, 5):
                model = OutlierModel(eps=float(eps), beta=0.0, delta_in=1.0, delta_out=5.0)
                st = solve_fixed_point(LossSpec.l2(), model, float(alpha), float(lam), cfg)
                ref = ridge_explicit(model, float(alpha), float(lam))
                worst = max(
                    worst, abs(st.m - ref.m), abs(st.q - ref.q), abs(st.sigma - ref.sigma)
                )
    elapsed = time.time() - t0
    ok = worst < 1e-8 and elapsed < 10.0
    assert report(
        1, "solve_fixed_point(l2) vs explicit ridge on 125-point grid",
        ok, f"worst diff {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_02_quadrature_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        q = rng.uniform(0.05, 2.0)
        m = rng.uniform(-0.2, 1.0) * np.sqrt(q)
        sigma = rng.uniform(0.05, 3.0)
        alpha = rng.uniform(0.5, 20.0)
        model = OutlierModel(
            eps=rng.uniform(0.0, 1.0),
            beta=rng.uniform(0.0, 1.5),
            delta_in=rng.uniform(0.3, 2.0),
            delta_out=rng.uniform(0.3, 8.0),
        )
        a = rng.uniform(0.3, 3.0)
        for loss, closed in [
            (LossSpec.l2(), update_hats_l2(m, q, sigma, model, alpha)),
            (LossSpec.l1(), update_hats_l1(m, q, sigma, model, alpha)),
            (LossSpec.huber(a), update_hats_huber(m, q, sigma, model, alpha, a)),
        ]:
            quad = quadrature_hat_updates(loss, m, q, sigma, model, alpha)
            worst = max(worst, max(abs(c - v) for c, v in zip(closed, quad)))
    elapsed = time.time() - t0
    ok = worst < 1e-6 and elapsed < 60.0
    assert report(
        2, "closed-form hat updates vs 2-D quadrature, 100 random states x 3 losses",
        ok, f"worst componentwise diff {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_03_bo_rate():
    c_hat = bo_rate_coefficient(FIG1_RIGHT)
    alphas = np.geomspace(1e2, 1e4, 9)
    errs = [1.0 - bo_fixed_point(FIG1_RIGHT, float(a)).q_b for a in alphas]
    slope, intercept = np.polyfit(np.log(alphas), np.log(errs), 1)
    prefactor = float(np.exp(intercept))
    ok = abs(slope + 1.0) < 0.05 and abs(prefactor * c_hat - 1.0) < 0.05
    assert report(
        3, "BO estimation error follows 1/(c_hat alpha) over alpha in [1e2, 1e4]",
        ok, f"slope {slope:.4f}, prefactor {prefactor:.4f} vs 1/c_hat {1/c_hat:.4f}",
    )


def test_criterion_04_fig1_left_consistency_dichotomy():
    # NOTE: the > 5e-2 clause and the 10%-of-plateau clause contradict the
    # equations' own plateau (~1.1e-2 for l1, ~4.7e-3 for Huber a=1, with
    # an O(1/alpha) correction of 11-20% at alpha=1e3); this test states
    # the criterion verbatim and is expected to fail on those two clauses.
    alpha = 1e3
    l2 = optimize_hyperparams(LossSpec.l2(), FIG1_LEFT, alpha, target="gen")
    hub_opt = optimize_hyperparams(LossSpec.huber(1.0), FIG1_LEFT, alpha, target="gen")
    l1 = optimize_hyperparams(LossSpec.l1(), FIG1_LEFT, alpha, target="gen")
    hub_fixed = optimize_hyperparams(
        LossSpec.huber(1.0), FIG1_LEFT, alpha, target="gen", vary_scale=False
    )

    plateau_l1 = large_alpha_leading(LossSpec.l1(), FIG1_LEFT, 0.0).excess_gen_plateau(FIG1_LEFT)
    plateau_hub = large_alpha_leading(LossSpec.huber(1.0), FIG1_LEFT, 0.0).excess_gen_plateau(FIG1_LEFT)

    checks = {
        "l2 excess < 1e-2": l2.objective_value < 1e-2,
        "huber optimal-a excess < 1e-2": hub_opt.objective_value < 1e-2,
        "l1 excess > 5e-2": l1.objective_value > 5e-2,
        "huber(a=1) excess > 5e-2": hub_fixed.objective_value > 5e-2,
        "l1 within 10% of plateau": abs(l1.objective_value - plateau_l1) <= 0.1 * plateau_l1,
        "huber(a=1) within 10% of plateau": abs(hub_fixed.objective_value - plateau_hub)
        <= 0.1 * plateau_hub,
        "consistency condition false": gen_consistency_condition(FIG1_LEFT) is False,
    }
    detail = (
        f"l2 {l2.objective_value:.2e}; huber-opt {hub_opt.objective_value:.2e} (a={hub_opt.a_opt}); "
        f"l1 {l1.objective_value:.4f} vs plateau {plateau_l1:.4f}; "
        f"huber(a=1) {hub_fixed.objective_value:.4f} vs plateau {plateau_hub:.4f}; "
        + "; ".join(f"{k}: {'ok' if v else 'VIOLATED'}" for k, v in checks.items())
    )
    assert report(4, "Fig 1-left consistency dichotomy at alpha=1e3", all(checks.values()), detail)


def test_criterion_05_fig1_right_estimation_plateau():
    res = optimize_hyperparams(LossSpec.l2(), FIG1_RIGHT, 1e5, target="estim")
    plateau_ok = abs(res.objective_value - 0.09) < 1e-3

    alpha = 1e3
    bo_estim = bo_errors(bo_fixed_point(FIG1_RIGHT, alpha), FIG1_RIGHT).estim_error
    ratios = {}
    for label, loss, vary in [
        ("l2", LossSpec.l2(), False),
        ("l1", LossSpec.l1(), False),
        ("huber", LossSpec.huber(1.0), True),
    ]:
        tuned = optimize_hyperparams(loss, FIG1_RIGHT, alpha, target="estim", vary_scale=vary)
        ratios[label] = tuned.objective_value / bo_estim
    ok = plateau_ok and all(r > 10.0 for r in ratios.values())
    assert report(
        5, "Fig 1-right estimation plateau 0.09 and >10x BO gap",
        ok,
        f"l2 estim(1e5) = {res.objective_value:.6f}; ratios at 1e3: "
        + ", ".join(f"{k} {v:.1f}x" for k, v in ratios.items()),
    )


def _mc_point(model, alpha, target, d, seeds, n_test, workers):
    """Theory and Monte-Carlo values of all three losses at tuned hyperparameters."""
    out = []
    for label, loss, vary in [
        ("l2", LossSpec.l2(), False),
        ("l1", LossSpec.l1(), False),
        ("huber", LossSpec.huber(1.0), True),
    ]:
        tuned = optimize_hyperparams(loss, model, alpha, target=target, vary_scale=vary)
        if label == "l2" or tuned.a_opt == DIVERGED:
            st = ridge_explicit(model, alpha, tuned.lambda_opt)
            mc_loss = LossSpec.l2() if label == "l2" else LossSpec.huber(1e3)
        else:
            mc_loss = loss if label == "l1" else LossSpec.huber(tuned.a_opt)
            st = solve_fixed_point(mc_loss, model, alpha, tuned.lambda_opt)
        theory_estim = estim_error_from_overlaps(st.m, st.q)
        theory_excess = excess_gen_error_from_overlaps(st.m, st.q, model)
        est, exc = run_monte_carlo(
            model, alpha, d, mc_loss, lam=tuned.lambda_opt,
            n_seeds=seeds, seed0=1234, n_test=n_test, workers=workers,
        )
        out.append((label, "estim", theory_estim, est))
        out.append((label, "excess", theory_excess, exc))
    return out


def test_criterion_06_theory_vs_monte_carlo():
    from robust_asymp.sweeps import worker_count

    t0 = time.time()
    d, seeds, n_test, workers = 200, 100, 10_000, worker_count()
    points = [
        (FIG1_LEFT, 3.0, "gen"),
        (FIG1_LEFT, 10.0, "gen"),
        (FIG1_RIGHT, 3.0, "estim"),
        (FIG1_RIGHT, 10.0, "estim"),
        (OutlierModel(eps=0.1, beta=0.0, delta_in=1.0, delta_out=5.0), 10.0, "gen"),
        (FIG2_LEFT["model"], 10.0, "gen"),
        (FIG2_RIGHT["model"], 10.0, "gen"),
        (OutlierModel(eps=0.3, beta=0.0, delta_in=1.0, delta_out=50.0), 10.0, "gen"),
    ]
    total, hits, lines = 0, 0, []
    for model, alpha, target in points:
        for label, metric, theory, mc in _mc_point(model, alpha, target, d, seeds, n_test, workers):
            z = (mc.mean - theory) / mc.std_error
            total += 1
            hits += abs(z) < 3.0
            if abs(z) >= 3.0:
                lines.append(f"{label}/{metric} at (eps={model.eps}, dout={model.delta_out}, a={alpha}): z={z:.2f}")
    elapsed = time.time() - t0
    ok = hits / total >= 0.95 and elapsed < 600.0
    assert report(
        6, "theory vs MC (d=200, 100 seeds) within 3 SE for >= 95% of pairs",
        ok, f"{hits}/{total} pairs, {elapsed:.0f}s" + ("; outliers: " + "; ".join(lines) if lines else ""),
    )


def test_criterion_07_gamp_bo_agreement():
    model, alpha, d, seeds = FIG1_LEFT, 10.0, 1000, 10
    q_b = bo_fixed_point(model, alpha).q_b
    qs, ms = [], []
    for seed in range(seeds):
        ds = sample_dataset(model, int(alpha * d), d, seed=seed)
        w = gamp(ds, bo_channel_pair(model), bo_prior_pair())
        rho = np.sum(ds.teacher**2) / d
        qs.append(np.sum(w**2) / d)
        ms.append(float(ds.teacher @ w) / d / np.sqrt(rho))
    q_emp, m_emp = float(np.mean(qs)), float(np.mean(ms))
    ok = abs(q_emp - q_b) < 5.0 / np.sqrt(d) and abs(m_emp - q_emp) < 4.0 / np.sqrt(d)
    assert report(
        7, "GAMP matches the BO overlap and the m = q identity at d=1000",
        ok, f"q_emp {q_emp:.4f} vs q_b {q_b:.4f}; m_emp {m_emp:.4f}",
    )


def test_criterion_08_huber_l2_collapse():
    alpha, results = 10.0, []
    for dout in (0.1, 0.3, 0.5):
        model = OutlierModel(eps=0.3, beta=0.0, delta_in=1.0, delta_out=dout)
        hub = optimize_hyperparams(LossSpec.huber(1.0), model, alpha, target="gen")
        l2 = optimize_hyperparams(LossSpec.l2(), model, alpha, target="gen")
        # Independent check of the collapse: the huge-scale Huber fixed
        # point at the tuned lambda reproduces the ridge error.
        st = solve_fixed_point(LossSpec.huber(1e8), model, alpha, hub.lambda_opt)
        ref = ridge_explicit(model, alpha, hub.lambda_opt)
        gap_big_a = abs(
            excess_gen_error_from_overlaps(st.m, st.q, model)
            - excess_gen_error_from_overlaps(ref.m, ref.q, model)
        )
        results.append(
            (dout, hub.a_opt == DIVERGED, abs(hub.objective_value - l2.objective_value), gap_big_a)
        )
    model_hi = OutlierModel(eps=0.3, beta=0.0, delta_in=1.0, delta_out=100.0)
    hub_hi = optimize_hyperparams(LossSpec.huber(1.0), model_hi, alpha, target="gen")
    l2_hi = optimize_hyperparams(LossSpec.l2(), model_hi, alpha, target="gen")
    gap_hi = l2_hi.objective_value - hub_hi.objective_value

    ok = all(d and g < 1e-8 and gb < 1e-8 for _, d, g, gb in results) and gap_hi > 0
    assert report(
        8, "Huber collapses onto l2 for small outlier variance, separates at large",
        ok,
        "; ".join(f"dout={dd}: diverged={dv}, |gap|={g:.1e}" for dd, dv, g, _ in results)
        + f"; dout=100 gap {gap_hi:.4f}",
    )


def test_criterion_09_small_eps():
    alpha = 10.0
    base = OutlierModel(eps=1e-3, beta=0.0, delta_in=1.0, delta_out=5.0)
    lam_series, gen_series = small_eps_expansion(base, alpha)
    tuned = optimize_hyperparams(LossSpec.l2(), base, alpha, target="gen")
    lam_pred = lam_series.eval(1e-3)
    lam_ok = abs(tuned.lambda_opt - lam_pred) / lam_pred < 0.01

    eps_grid = np.geomspace(1e-4, 1e-2, 7)
    vals = []
    for e in eps_grid:
        model = OutlierModel(eps=float(e), beta=0.0, delta_in=1.0, delta_out=5.0)
        res = optimize_hyperparams(LossSpec.l2(), model, alpha, target="gen")
        vals.append(res.objective_value)
    slope = float(np.polyfit(eps_grid, vals, 1)[0])
    # The printed series tracks E_gen with the noise floor held at delta_in;
    # subtracting the exact floor derivative (1-beta)^2 gives the excess slope.
    slope_pred = gen_series.order1 - (1.0 - base.beta) ** 2
    slope_ok = abs(slope - slope_pred) / abs(slope_pred) < 0.02
    assert report(
        9, "small-eps optimal regularisation and excess slope",
        lam_ok and slope_ok,
        f"lam_opt {tuned.lambda_opt:.6f} vs {lam_pred:.6f}; slope {slope:.4f} vs {slope_pred:.4f}",
    )


def test_criterion_10_angle_decay():
    # NOTE: theta(1e4) for l1 at the Fig 1-left parameters is 1.22e-2 by
    # the equations themselves (1/(pi m_hat0 sqrt(alpha)) with m_hat0 =
    # 0.2607), just above the stated 1e-2; expected to fail on that combo.
    cfg = FixedPointConfig(tolerance=1e-11, max_iters=200_000)
    rows = []
    ok = True
    for model, mlabel in [(FIG1_LEFT, "fig1-left"), (FIG1_RIGHT, "fig1-right")]:
        for loss, label in [(LossSpec.l2(), "l2"), (LossSpec.l1(), "l1"), (LossSpec.huber(1.0), "huber")]:
            st = solve_fixed_point(loss, model, 1e4, 1e-3, cfg)
            theta = teacher_student_angle(st.m, st.q)
            rows.append(f"{mlabel}/{label}: {theta:.4f}")
            ok = ok and theta < 1e-2
    assert report(10, "angle below 1e-2 at alpha=1e4 for the Fig 1 parameter sets", ok, "; ".join(rows))


def test_criterion_11_bo_lower_bound():
    rng = np.random.default_rng(7)
    worst = -np.inf
    for _ in range(50):
        model = OutlierModel(
            eps=float(rng.uniform(0.05, 0.95)),
            beta=float(rng.uniform(0.0, 2.0)),
            delta_in=float(rng.uniform(0.3, 3.0)),
            delta_out=float(rng.uniform(0.3, 10.0)),
        )
        alpha = float(rng.uniform(1.0, 100.0))
        bo_gen = bo_errors(bo_fixed_point(model, alpha), model).gen_error
        for loss, vary in [(LossSpec.l2(), False), (LossSpec.l1(), False), (LossSpec.huber(1.0), True)]:
            tuned = optimize_hyperparams(loss, model, alpha, target="gen", n_starts=1)
            gen = tuned.objective_value + model.noise_floor
            worst = max(worst, bo_gen - gen)
    ok = worst <= 1e-8
    assert report(
        11, "BO generalisation error lower-bounds every tuned loss (50 random models)",
        ok, f"max(BO - tuned) = {worst:.3e}",
    )
