"""End-to-end acceptance checks for the package.

Every test here finishes by printing one scorecard line of the form

    [acceptance] criterion NN <label>: PASS|FAIL (<measured values>)

directly to the terminal (bypassing pytest capture), so a full run produces a
readable eleven-line summary regardless of which tests pass.  The benchmark
reproductions share module-scoped result stores; the top-k ordering check is
the long pole (~15 min) and carries the slow marker.

Seeds, horizons, and repetition counts are pinned so the measured numbers are
reproducible bit-for-bit on one machine; the asserted windows are wide enough
to absorb cross-platform RNG-free numeric drift.
"""
import csv
import io
import math
import time

import numpy as np
import pytest

from linbai import rng as rng_mod
from linbai.cli import main
from linbai.design import design_matrix, g_optimal, leverages, tau_star
from linbai.harness import (
    ExperimentConfig,
    default_checkpoints,
    run_experiment,
    samples_to_delta,
)
from linbai.instances import (
    ExplicitTargets,
    Instance,
    make_soare,
    make_sphere,
    make_topk,
    save_instance,
)
from linbai.learners import Hedge
from linbai.linalg import PosteriorState, SpdState
from linbai.sampling import (
    PosteriorSpec,
    alternative_log_tails,
    posterior_confidence,
    sample_alternative,
)
from linbai.strategies import make_strategy

MASTER_SEED = 2024


def _scorecard(capsys, num, label, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance] criterion {num:02d} {label}: "
              f"{'PASS' if ok else 'FAIL'} ({detail})")


def _diag(capsys, text):
    with capsys.disabled():
        print(f"[acceptance]   {text}")


def _crossing(value):
    """samples_to_delta entry -> comparable number ('>T' sentinel -> inf)."""
    return math.inf if isinstance(value, str) else float(value)


def _id_rate_crossing(store, strategy, level=0.9):
    """First checkpoint where the mean MAP identification rate exceeds level."""
    by_t = {}
    for r in store.rows:
        if r.strategy == strategy:
            by_t.setdefault(r.t, []).append(r.z_hat_correct)
    for t in sorted(by_t):
        if np.mean(by_t[t]) > level:
            return t
    return math.inf


def _random_bai_instance(rng, min_gap=0.05):
    """Random 3-arm d=2 identification problem with a clearly unique winner."""
    while True:
        arms = rng.standard_normal((3, 2))
        theta = rng.standard_normal(2)
        try:
            inst = Instance("rand", arms, ExplicitTargets(arms.copy()), theta)
        except Exception:
            continue
        if inst.delta_min >= min_gap:
            return inst


def _grid_game_value(instance, step=1e-3):
    """Game value by brute force over the 2-simplex (3-arm instances only)."""
    arms = instance.arms
    assert arms.shape == (3, 2)
    theta = instance.theta_star
    zs = instance.targets.vectors
    vs = zs[instance.z_star] - np.delete(zs, instance.z_star, axis=0)
    gs = vs @ theta
    w1 = np.arange(0.0, 1.0 + step / 2, step)
    best = 0.0
    outers = np.einsum("ij,ik->ijk", arms, arms)
    for lam1 in w1:
        lam2 = np.arange(0.0, 1.0 - lam1 + step / 2, step)
        lam = np.stack([np.full_like(lam2, lam1), lam2, 1.0 - lam1 - lam2], axis=1)
        a = np.tensordot(lam, outers, axes=(1, 0))
        det = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
        ok = det > 1e-12
        vals = np.full(lam.shape[0], np.inf)
        for v, g in zip(vs, gs):
            q = (
                v[0] * (a[:, 1, 1] * v[0] - a[:, 0, 1] * v[1])
                + v[1] * (a[:, 0, 0] * v[1] - a[:, 1, 0] * v[0])
            )
            vals = np.minimum(vals, np.where(ok, g * g * det / (2.0 * q), 0.0))
        best = max(best, float(vals.max(initial=0.0)))
    return best


# -- shared benchmark stores (built lazily, once per module)


@pytest.fixture(scope="module")
def soare_bench():
    cfg = ExperimentConfig(
        instance=make_soare(0.1),
        strategies=[{"strategy": "peps"}, {"strategy": "lints"}, {"strategy": "lingame"}],
        t_max=5000,
        repetitions=100,
        master_seed=MASTER_SEED,
        checkpoints=default_checkpoints(5000),
    )
    return run_experiment(cfg, workers=1)


@pytest.fixture(scope="module")
def sphere_bench():
    inst = make_sphere(rng_mod.instance_stream(0, "sphere_d6_n20"), 6, 20)
    cfg = ExperimentConfig(
        instance=inst,
        strategies=[{"strategy": "peps"}, {"strategy": "lints"}],
        t_max=2000,
        repetitions=100,
        master_seed=MASTER_SEED,
        checkpoints=default_checkpoints(2000),
    )
    return run_experiment(cfg, workers=1)


@pytest.fixture(scope="module")
def topk_bench():
    cfg = ExperimentConfig(
        instance=make_topk(12, 3),
        strategies=[{"strategy": "peps"}, {"strategy": "lingame"}],
        t_max=30000,
        repetitions=50,
        master_seed=MASTER_SEED,
        checkpoints=default_checkpoints(30000),
    )
    return run_experiment(cfg, workers=1)


# -- criterion 1: recursive estimate equals the batch ridge solve


def test_criterion_01_recursive_vs_batch_least_squares(capsys):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(100):
        d = (2, 4, 8)[trial % 3]
        pool = rng.standard_normal((d + 5, d))
        theta = rng.standard_normal(d)
        state = PosteriorState(d)
        gram = np.eye(d)
        score = np.zeros(d)
        for _ in range(500):
            x = pool[rng.integers(len(pool))]
            y = float(x @ theta + rng.standard_normal())
            state.update(x, y)
            gram += np.outer(x, x)
            score += y * x
            ref = np.linalg.solve(gram, score)
            worst = max(worst, float(np.max(np.abs(state.theta_hat - ref))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 10.0
    _scorecard(capsys, 1, "recursive vs batch least squares", ok,
               f"max deviation {worst:.2e} over 100 trajectories, {elapsed:.1f}s")
    assert worst < 1e-8
    assert elapsed < 10.0


# -- criterion 2: Kiefer-Wolfowitz certificate for the G-optimal solver


def test_criterion_02_g_optimal_leverage_certificate(capsys):
    rng = np.random.default_rng(202)
    cases = []
    for _ in range(50):
        d = int(rng.integers(2, 9))
        n = int(rng.integers(d + 1, 41))
        cases.append((d, rng.standard_normal((n, d))))
    for omega in (0.1, 0.5):
        inst = make_soare(omega)
        cases.append((2, inst.arms))
    t0 = time.perf_counter()
    worst_ratio = 1.0
    ok = True
    for d, arms in cases:
        w = g_optimal(arms)
        maxlev = float(leverages(arms, np.linalg.inv(design_matrix(arms, w))).max())
        ok = ok and (d - 1e-9 <= maxlev <= d * 1.001 + 1e-9)
        worst_ratio = max(worst_ratio, maxlev / d)
    elapsed = time.perf_counter() - t0
    _scorecard(capsys, 2, "g-optimal leverage certificate", ok,
               f"52 designs, worst max-leverage/d = {worst_ratio:.6f}, {elapsed:.1f}s")
    assert ok


# -- criterion 3: game value against an independent grid search


def test_criterion_03_tau_star_matches_grid_search(capsys):
    rng = np.random.default_rng(303)
    instances = [_random_bai_instance(rng) for _ in range(20)]
    instances += [make_soare(omega) for omega in (0.1, 0.3, 1.0)]
    t0 = time.perf_counter()
    worst_rel = 0.0
    for inst in instances:
        sol = tau_star(inst, iters=2000, tol=1e-3)
        ref = _grid_game_value(inst, step=1e-3)
        worst_rel = max(worst_rel, abs(sol.tau_star - ref) / ref)
    # two unit arms, theta* = e1: value 1/8 at the equal split
    pair = Instance("pair", np.eye(2), ExplicitTargets(np.eye(2)), np.array([1.0, 0.0]))
    pair_tau = tau_star(pair, iters=2000).tau_star
    elapsed = time.perf_counter() - t0
    ok = worst_rel < 1e-2 and abs(pair_tau - 0.125) < 1e-4
    _scorecard(capsys, 3, "tau-star grid-search equivalence", ok,
               f"23 instances, worst rel err {worst_rel:.2e}; "
               f"two-arm value {pair_tau:.6f}, {elapsed:.1f}s")
    assert worst_rel < 1e-2
    assert abs(pair_tau - 0.125) < 1e-4


# -- criterion 4: rejection sampler never returns the excluded answer


def test_criterion_04_sampler_invariant_and_acceptance_rate(capsys):
    rng = np.random.default_rng(404)
    t0 = time.perf_counter()
    violations = 0
    returned = 0
    for _ in range(1000):
        d = int(rng.integers(2, 5))
        k = int(rng.integers(2, 6))
        targets = ExplicitTargets(rng.standard_normal((k, d)))
        m = rng.standard_normal((d, d))
        state = SpdState(m @ m.T + 0.5 * np.eye(d))
        spec = PosteriorSpec(rng.standard_normal(d) * rng.uniform(0.0, 2.0),
                             state, float(rng.uniform(0.25, 4.0)))
        z_hat = int(rng.integers(k))
        budget = int(rng.integers(1, 33))
        for _ in range(1000):
            rep = sample_alternative(rng, spec, targets, z_hat, budget=budget)
            assert rep.draws_used <= budget
            if rep.sample is not None:
                returned += 1
                if int(np.argmax(targets.vectors @ rep.sample)) == z_hat:
                    violations += 1

    # acceptance frequency against the closed-form two-target confidence
    worst_z = 0.0
    n_calls = 2000
    for _ in range(50):
        d = int(rng.integers(2, 5))
        targets = ExplicitTargets(rng.standard_normal((2, d)))
        m = rng.standard_normal((d, d))
        state = SpdState(m @ m.T + 0.5 * np.eye(d))
        spec = PosteriorSpec(rng.standard_normal(d), state, 1.0)
        z_hat = int(rng.integers(2))
        exact = posterior_confidence(rng, spec, targets, z_hat)
        if not 0.1 <= exact <= 0.9:
            continue
        hits = sum(
            sample_alternative(rng, spec, targets, z_hat, budget=1).sample is not None
            for _ in range(n_calls)
        )
        se = math.sqrt(exact * (1.0 - exact) / n_calls)
        worst_z = max(worst_z, abs(hits / n_calls - (1.0 - exact)) / se)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and worst_z <= 3.0
    _scorecard(capsys, 4, "rejection sampler invariants", ok,
               f"{violations} violations in 1e6 calls ({returned} samples returned); "
               f"worst acceptance-rate z-score {worst_z:.2f}, {elapsed:.1f}s")
    assert violations == 0
    assert worst_z <= 3.0


# -- criterion 5: Hedge regret bound, exact inequality


def test_criterion_05_hedge_regret_bound(capsys):
    rng = np.random.default_rng(505)
    t0 = time.perf_counter()
    worst_margin = math.inf
    ok = True
    for _ in range(100):
        k = int(rng.integers(2, 9))
        horizon = int(rng.integers(10, 1001))
        eta = float(rng.uniform(0.01, 2.0))
        bound = float(rng.uniform(0.5, 2.0))
        gains = rng.uniform(-bound, bound, size=(horizon, k))
        learner = Hedge(k, eta)
        earned = 0.0
        for g in gains:
            earned += float(learner.distribution() @ g)
            learner.update(g)
        regret = float(gains.sum(axis=0).max()) - earned
        limit = math.log(k) / eta + eta * horizon * bound ** 2 / 2.0
        ok = ok and regret <= limit
        worst_margin = min(worst_margin, limit - regret)
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 5.0
    _scorecard(capsys, 5, "hedge regret bound", ok,
               f"100 sequences, smallest slack {worst_margin:.3f}, {elapsed:.1f}s")
    assert ok


# -- criterion 6: fixed-weight oracle achieves the game-value error exponent


def test_criterion_06_oracle_error_exponent(capsys):
    inst = make_soare(0.5)
    horizon = 4000
    sol = tau_star(inst, iters=2000, tol=1e-3)
    t0 = time.perf_counter()
    rate_lo = []  # from the union upper bound on P(miss): understates the rate
    rate_hi = []  # from the largest single tail: overstates it
    for rep in range(100):
        rng = rng_mod.strategy_stream(MASTER_SEED, "oracle", rep)
        strat = make_strategy(inst, {"strategy": "oracle"}, horizon)
        for _ in range(horizon):
            strat.step(rng)
        spec = PosteriorSpec(strat.posterior.theta_hat.copy(), strat.posterior.spd, 1.0)
        lower, upper = alternative_log_tails(spec, inst.targets, inst.z_star)
        rate_lo.append(-upper / horizon)
        rate_hi.append(-lower / horizon)
    elapsed = time.perf_counter() - t0
    mean_lo, mean_hi = float(np.mean(rate_lo)), float(np.mean(rate_hi))
    ok = mean_lo >= 0.5 * sol.tau_star and mean_hi <= 1.5 * sol.tau_star
    _scorecard(capsys, 6, "oracle error-exponent rate", ok,
               f"-log(1-c_T)/T in [{mean_lo:.4e}, {mean_hi:.4e}] = "
               f"[{mean_lo / sol.tau_star:.3f}, {mean_hi / sol.tau_star:.3f}] tau*, "
               f"want [0.5, 1.5], {elapsed:.0f}s")
    assert mean_lo >= 0.5 * sol.tau_star
    assert mean_hi <= 1.5 * sol.tau_star


# -- criterion 7: crossing times on the classic hard instance


def test_criterion_07_soare_benchmark_crossings(capsys, soare_bench):
    table = samples_to_delta(soare_bench, 0.1)
    peps, lints, lingame = table["peps"], table["lints"], table["lingame"]
    ok_peps = 600 <= _crossing(peps) <= 1800
    ok_lints = lints == ">5000"
    ok_lingame = 500 <= _crossing(lingame) <= 1700
    ok = ok_peps and ok_lints and ok_lingame
    _scorecard(capsys, 7, "soare benchmark crossings", ok,
               f"peps={peps!r} want [600,1800]; lingame={lingame!r} want [500,1700]; "
               f"lints={lints!r} want '>5000'")
    for strat in ("peps", "lingame", "lints"):
        _diag(capsys, f"MAP id-rate > 0.9 crossing, {strat}: "
                      f"{_id_rate_crossing(soare_bench, strat)}")
    assert ok_lints
    assert ok_lingame
    assert ok_peps


# -- criterion 8: crossing times on the random-sphere instance


def test_criterion_08_sphere_benchmark_crossings(capsys, sphere_bench):
    table = samples_to_delta(sphere_bench, 0.1)
    peps, lints = table["peps"], table["lints"]
    ok_window = 170 <= _crossing(peps) <= 600
    ok_order = _crossing(peps) < _crossing(lints)
    ok = ok_window and ok_order
    _scorecard(capsys, 8, "sphere benchmark crossings", ok,
               f"peps={peps!r} want [170,600]; lints={lints!r} (must exceed peps)")
    for strat in ("peps", "lints"):
        _diag(capsys, f"MAP id-rate > 0.9 crossing, {strat}: "
                      f"{_id_rate_crossing(sphere_bench, strat)}")
    assert ok_window
    assert ok_order


# -- criterion 9: ordering on the top-k instance (the long pole)


@pytest.mark.slow
def test_criterion_09_topk_benchmark_ordering(capsys, topk_bench):
    table = samples_to_delta(topk_bench, 0.1)
    peps, lingame = table["peps"], table["lingame"]
    ok = _crossing(peps) < _crossing(lingame)
    _scorecard(capsys, 9, "top-k benchmark ordering", ok,
               f"peps={peps!r} vs lingame={lingame!r}; want peps < lingame")
    for strat in ("peps", "lingame"):
        ts, mean, _, _ = topk_bench.mean_confidence_curve(strat)
        marks = {t: f"{m:.3f}" for t, m in zip(ts, mean)
                 if t in (5000, 10000, 15000, 20000, 25000, 30000)}
        _diag(capsys, f"mean confidence, {strat}: {marks}")
        _diag(capsys, f"MAP id-rate > 0.9 crossing, {strat}: "
                      f"{_id_rate_crossing(topk_bench, strat)}")
    assert ok


# -- criterion 10: rejection draws stay cheap until the posterior is decided


def test_criterion_10_rejection_cost_profile(capsys, soare_bench):
    by_rep = {}
    for r in soare_bench.rows:
        if r.strategy == "peps":
            by_rep.setdefault(r.seed, []).append(r)
    per_t = {}
    pooled = []
    for rows in by_rep.values():
        rows.sort(key=lambda r: r.t)
        ts = [0] + [r.t for r in rows]
        cum = [0] + [r.rejections_cumulative for r in rows]
        conf = [r.posterior_confidence for r in rows]
        cross = next((i for i, c in enumerate(conf) if c > 0.99), len(rows) - 1)
        for i in range(cross + 1):
            rate = (cum[i + 1] - cum[i]) / (ts[i + 1] - ts[i])
            per_t.setdefault(ts[i + 1], []).append(rate)
            pooled.append(rate)
    medians = {t: float(np.median(v)) for t, v in per_t.items()}
    worst_t = max(medians, key=medians.get)
    ok = all(m < 30.0 for m in medians.values())
    _scorecard(capsys, 10, "rejection cost profile", ok,
               f"median draws/step before the 0.99 crossing: pooled "
               f"{float(np.median(pooled)):.2f}, worst checkpoint "
               f"{medians[worst_t]:.2f} at t={worst_t}; want < 30")
    assert ok


# -- criterion 11: the CLI replays bit-for-bit


def test_criterion_11_run_determinism(capsys, tmp_path):
    inst_path = tmp_path / "soare.json"
    save_instance(make_soare(0.1), inst_path)
    outs = []
    t0 = time.perf_counter()
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        code = main(["run", "--instance", str(inst_path), "--strategy", "peps",
                     "--T", "300", "--seed", "7", "--out", str(out)])
        assert code == 0
        rows = list(csv.reader(io.StringIO(out.read_text(encoding="utf-8"))))
        outs.append([row[:-1] for row in rows])  # drop the wall-clock column
    elapsed = time.perf_counter() - t0
    ok = outs[0] == outs[1]
    _scorecard(capsys, 11, "run determinism", ok,
               f"{len(outs[0]) - 1} rows identical excluding wall clock, {elapsed:.1f}s")
    assert ok
