"""Acceptance criteria, one test per criterion, run at the stated tolerances.

Each test prints a single PASS/FAIL line (run with ``pytest -v -s`` to see
them inline). Statistical criteria run at pinned seeds with the
3-standard-error tolerances they specify.

Criterion 9 (detection-efficiency insensitivity of the lifetime table over
eta in [0.1, 0.9]) is implemented faithfully and fails: the concurrence
zero-crossing threshold 2 sqrt((1 - gamma eta)/g) is strongly
eta-dependent wherever gamma(T_s) is large, so the stated < 2% bound is
not attainable for the short-lifetime rows; see the small-eta companion
property below it.
"""

import math
import time

import numpy as np
import pytest

from dlcz_link import (
    BOHR_MAGNETON_HZ_PER_G,
    EnsembleParams,
    ExponentialEfficiency,
    LinkConfig,
    NoiseField,
    SpinWaveMode,
    Topology,
)
from dlcz_link import analysis, model
from dlcz_link import stochastic as st
from dlcz_link.analysis import DecaySeries
from dlcz_link.cli import main
from dlcz_link.config import default_config

from oracles import difference_phase_average_quadrature


def report(criterion: int, ok: bool, detail: str) -> bool:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def lattice_link(eta: float, sigma_b: float, zeta: float, topology=Topology.INDEPENDENT) -> LinkConfig:
    node = EnsembleParams(
        chi=0.005, gamma_0=0.76, decay=ExponentialEfficiency(0.410), xi_se=0.26, z_noise=3e-4, eta=eta
    )
    return LinkConfig.symmetric(
        node, NoiseField(sigma_b=sigma_b, topology=topology), SpinWaveMode(mu_prime=5000.0), zeta=zeta
    )


QUOTED_LIFETIMES_MS = (14.0, 28.0, 135.0, 1700.0)
QUOTED_EFFICIENCIES = (0.02, 0.04, 0.21, 2.70)
SIGMA_B_LIST = (2e-3, 1e-3, 2e-4, 0.0)


def test_criterion_1_table1_reproduction():
    cfg = default_config()
    start = time.perf_counter()
    rows = analysis.make_table1(cfg.sigma_b_list, cfg.link, cfg.t_generation)
    elapsed = time.perf_counter() - start
    details = []
    ok = elapsed < 1.0
    for row, t_quoted, e_quoted in zip(rows, QUOTED_LIFETIMES_MS, QUOTED_EFFICIENCIES):
        t_ms = row.lifetime * 1e3
        t_ok = abs(t_ms - t_quoted) <= max(0.1 * t_quoted, 1.0)
        e_ok = abs(row.eta_link - e_quoted) <= 0.1 * e_quoted
        ok = ok and t_ok and e_ok
        details.append(f"{t_ms:.1f}ms/{row.eta_link:.3f}")
    assert report(1, ok, f"T_s/eta_link = {', '.join(details)}; runtime {elapsed:.2f}s")


def test_criterion_2_dephasing_lifetime_cross_check():
    tau_0 = model.dephasing_lifetime(BOHR_MAGNETON_HZ_PER_G, 2.25e-3)
    ok = abs(tau_0 - 50e-6) / 50e-6 < 0.05 and tau_0 == pytest.approx(50.5e-6, rel=2e-3)
    assert report(2, ok, f"tau_0(mu_B/h, 2.25 mG) = {tau_0 * 1e6:.2f} us vs fitted ~50 us")


def test_criterion_3_quadrature_oracle():
    mu = 5000.0
    start = time.perf_counter()
    worst = 0.0
    points = 0
    for sigma_b in (0.5e-3, 1e-3, 2e-3, 4e-3):
        tau_0 = model.dephasing_lifetime(mu, 2.0 * sigma_b)
        for frac in (0.0, 0.8, 1.9, 3.1, 5.0):
            t = frac * tau_0
            got = model.lorentzian_characteristic(mu, 2.0 * sigma_b, t)
            want = difference_phase_average_quadrature(mu, sigma_b, t)
            worst = max(worst, abs(got - want))
            points += 1
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 10.0 and points == 20
    assert report(3, ok, f"worst |model - quadrature| = {worst:.2e} over 20 points in {elapsed:.2f}s")


def test_criterion_4_mc_closed_form_equivalence():
    # unit mode overlap: the S8-S11 probability chain assumes it
    trials_per_theta = 100_000
    start = time.perf_counter()
    tau_ref = model.dephasing_lifetime(5000.0, 2e-3)  # 2 mG clock for the shared row
    worst = {"herald": 0.0, "as1": 0.0, "fringe": 0.0, "V": 0.0, "g": 0.0}
    seed_base = 1100
    # sigma_delta grid {0, 2, 4} mG; the shared row keeps the 2 mG clock
    for ci, sigma_b in enumerate((0.0, 1e-3, 2e-3)):
        cfg = lattice_link(eta=0.4, sigma_b=sigma_b, zeta=1.0)
        tau_0 = model.link_dephasing_lifetime(cfg)
        clock = tau_0 if math.isfinite(tau_0) else tau_ref
        node = cfg.node_l
        for k, frac in enumerate((0.0, 0.5, 1.0, 2.0)):
            t = frac * clock
            seed = seed_base + 100 * ci + 10 * k
            rec = st.simulate_link_fringe(cfg, t, trials_per_theta=trials_per_theta, seed=seed)
            # herald rate vs the linear-order chain
            p_herald = node.chi * node.eta
            dev = abs(rec.n_heralds / rec.n_trials - p_herald) / math.sqrt(
                p_herald * (1 - p_herald) / rec.n_trials
            )
            worst["herald"] = max(worst["herald"], dev)
            # unconditional anti-Stokes singles at the mixed port
            p_as1 = float(model.coincidence_probability(0.0, node, tau_0, t).p_as1)
            dev = abs(rec.n_as1_clicks / rec.n_trials - p_as1) / math.sqrt(
                p_as1 * (1 - p_as1) / rec.n_trials
            )
            worst["as1"] = max(worst["as1"], dev)
            # coincidence fringe, every theta bin
            for b in rec.theta_bins:
                p_bin = float(model.coincidence_probability(b.theta, node, tau_0, t).p_s1_as1)
                se = math.sqrt(p_bin * (1 - p_bin) / trials_per_theta)
                worst["fringe"] = max(worst["fringe"], abs(b.n_coincidence / trials_per_theta - p_bin) / se)
            # visibility
            vis = st.estimate_visibility(rec)
            g_cf = float(model.cross_correlation(node, t))
            v_cf = float(model.visibility(g_cf, t, tau_0))
            worst["V"] = max(worst["V"], abs(vis.value - v_cf) / vis.std_error)
            # cross-correlation
            corr_rec = st.simulate_link_correlation(cfg, t, trials=100_000, seed=seed)
            corr = st.estimate_cross_correlation(corr_rec)
            worst["g"] = max(worst["g"], abs(corr.value - g_cf) / corr.std_error)
    elapsed = time.perf_counter() - start
    ok = all(v <= 3.0 for v in worst.values()) and elapsed < 300.0
    detail = ", ".join(f"{k}: {v:.2f} SE" for k, v in worst.items())
    assert report(4, ok, f"worst deviations [{detail}] in {elapsed:.1f}s")


def test_criterion_5_shared_supply_protection():
    t = 16e-3
    vs = []
    for seed, sigma_b in ((7, 0.0), (8, 4e-3)):
        cfg = lattice_link(eta=0.4, sigma_b=sigma_b, zeta=0.85, topology=Topology.SHARED)
        rec = st.simulate_link_fringe(cfg, t, trials_per_theta=200_000, seed=seed)
        vs.append(st.estimate_visibility(rec))
    diff = abs(vs[0].value - vs[1].value)
    se_diff = math.hypot(vs[0].std_error, vs[1].std_error)
    shared_ok = diff <= 3.0 * se_diff

    cfg = lattice_link(eta=0.4, sigma_b=4e-3, zeta=0.85, topology=Topology.INDEPENDENT)
    tau_0 = model.link_dephasing_lifetime(cfg)  # sigma_delta = 8 mG
    v0 = st.estimate_visibility(st.simulate_link_fringe(cfg, 0.0, trials_per_theta=200_000, seed=9))
    v1 = st.estimate_visibility(st.simulate_link_fringe(cfg, tau_0, trials_per_theta=200_000, seed=10))
    ratio = v1.value / v0.value
    se_ratio = ratio * math.hypot(v0.std_error / v0.value, v1.std_error / v1.value)
    pt0 = model.link_curves(cfg, 0.0)
    pt1 = model.link_curves(cfg, tau_0)
    expected = float(pt1.visibility) / float(pt0.visibility)  # ~ e^{-1} up to g drift
    damping_ok = abs(ratio - expected) <= 3.0 * se_ratio and ratio < 0.6
    ok = shared_ok and damping_ok
    assert report(
        5,
        ok,
        f"shared dV = {diff:.3f} ({diff / se_diff:.2f} SE); independent V(tau0)/V(0) = "
        f"{ratio:.3f} vs {expected:.3f}",
    )


def test_criterion_6_concurrence_consistency():
    # conditional p11 events are ~1e-6 per trial at chi = 0.5%, so the
    # two-photon penalty needs a large pair-count budget for the MC noise
    # to sit well inside the 10% band
    cfg = lattice_link(eta=0.4, sigma_b=0.2e-3, zeta=0.85)  # sigma_delta = 0.4 mG
    worst_rel = 0.0
    details = []
    for seed, t, per_theta, pair_trials in (
        (210, 0.0, 1_700_000, 100_000_000),
        (211, 25e-3, 3_400_000, 150_000_000),
    ):
        fringe = st.simulate_link_fringe(cfg, t, trials_per_theta=per_theta, seed=seed, chunk_size=1 << 20)
        pairs = st.simulate_link_pairs(cfg, t, trials=pair_trials, seed=seed, chunk_size=1 << 20)
        corr = st.simulate_link_correlation(cfg, t, trials=2_000_000, seed=seed)
        stats = st.estimate_statistics(st.merge_counts(fringe, st.merge_counts(pairs, corr)))
        closed = float(model.link_curves(cfg, t).concurrence)
        assert closed > 0.05, "grid point must sit in the C > 0.05 region"
        rel = abs(stats.concurrence - closed) / closed
        worst_rel = max(worst_rel, rel)
        details.append(f"t={t * 1e3:.0f}ms: mc {stats.concurrence:.4f} vs closed {closed:.4f} ({rel:.1%})")
    ok = worst_rel < 0.10
    assert report(6, ok, "; ".join(details))


def test_criterion_7_fit_recovery():
    start = time.perf_counter()
    t_dec = np.linspace(0.05e-3, 3e-3, 40)
    gamma_clean = 0.22 * np.exp(-t_dec / 1e-3)
    gamma_mfs = model.retrieval_efficiency(0.17, ExponentialEfficiency(1e-3), t_dec)
    g_clean = model.cross_correlation_from_efficiency(gamma_mfs, 0.005, 0.26, 3.3e-4)

    mu = BOHR_MAGNETON_HZ_PER_G
    tau_0 = model.dephasing_lifetime(mu, 2.25e-3)
    t_vis = np.linspace(0.0, 4.0 * tau_0, 60)
    gamma_up = model.retrieval_efficiency(0.22, ExponentialEfficiency(1e-3), t_vis)
    gamma_dn = model.retrieval_efficiency(0.17, ExponentialEfficiency(1e-3), t_vis)
    g_up = model.cross_correlation_from_efficiency(gamma_up, 0.005, 0.26, 3.1e-4)
    g_dn = model.cross_correlation_from_efficiency(gamma_dn, 0.005, 0.26, 3.3e-4)
    g_bar = 0.5 * (g_up + g_dn)
    vg = 0.85 * (g_bar - 1.0) / (g_bar + 1.0)
    v_clean = vg * 0.88 * np.exp(-t_vis / tau_0)

    worst = {"tau": 0.0, "xi_se": 0.0, "tau_0": 0.0, "xi_prime": 0.0}
    for seed in range(100):
        rng = np.random.Generator(np.random.Philox(key=(7 << 32) + seed))
        res = analysis.fit_decay(DecaySeries(t_dec, gamma_clean * (1 + 0.02 * rng.standard_normal(t_dec.size))))
        worst["tau"] = max(worst["tau"], abs(res.parameters["tau"] - 1e-3) / 1e-3)

        res = analysis.fit_cross_correlation(
            DecaySeries(t_dec, g_clean * (1 + 0.05 * rng.standard_normal(t_dec.size))),
            gamma_mfs,
            0.005,
            3.3e-4,
        )
        worst["xi_se"] = max(worst["xi_se"], abs(res.parameters["xi_se"] - 0.26) / 0.26)

        res = analysis.fit_visibility_dephasing(
            DecaySeries(t_vis, v_clean * (1 + 0.02 * rng.standard_normal(t_vis.size))), vg, mu
        )
        worst["tau_0"] = max(worst["tau_0"], abs(res.parameters["tau_0"] - tau_0) / tau_0)
        worst["xi_prime"] = max(worst["xi_prime"], abs(res.parameters["xi_prime"] - 0.88) / 0.88)
    elapsed = time.perf_counter() - start
    ok = (
        worst["tau"] < 0.05
        and worst["xi_se"] < 0.15
        and worst["tau_0"] < 0.05
        and worst["xi_prime"] < 0.05
        and elapsed < 30.0
    )
    detail = ", ".join(f"{k}: {v:.1%}" for k, v in worst.items())
    assert report(7, ok, f"worst recovery errors over 100 seeds [{detail}] in {elapsed:.1f}s")


def test_criterion_8_mode_pair_crossing_order():
    pair = default_config().mode_pair
    mixed = analysis.mode_pair_lifetime(pair, "mixed")
    matched = analysis.mode_pair_lifetime(pair, "matched")
    ratio = matched / mixed
    ok = ratio >= 10.0
    assert report(
        8, ok, f"crossings: mixed {mixed * 1e6:.1f} us, matched {matched * 1e6:.0f} us, ratio {ratio:.1f}"
    )


def test_criterion_9_eta_insensitivity_as_stated():
    # Faithful to the stated criterion; genuinely unattainable under the
    # configured concurrence law (threshold depends on eta through
    # p_c = gamma(T_s) eta with gamma(T_s) up to ~0.73), so this fails for
    # the short-lifetime rows. The small-eta regime where the premise does
    # hold is covered by the companion test below.
    cfg = default_config()
    nominal = [row.lifetime for row in analysis.make_table1(cfg.sigma_b_list, cfg.link, cfg.t_generation)]
    swings = []
    for i, sigma_b in enumerate(cfg.sigma_b_list):
        lifetimes = []
        for eta in (0.1, 0.3, 0.5, 0.7, 0.9):
            node = EnsembleParams(
                chi=0.005, gamma_0=0.76, decay=ExponentialEfficiency(0.410), xi_se=0.26, z_noise=3e-4, eta=eta
            )
            link = LinkConfig.symmetric(
                node, NoiseField(sigma_b=sigma_b), SpinWaveMode(mu_prime=5000.0), zeta=0.85
            )
            lifetimes.append(analysis.entanglement_lifetime(link))
        swings.append((max(lifetimes) - min(lifetimes)) / nominal[i])
    ok = all(s < 0.02 for s in swings)
    detail = ", ".join(f"{s:.1%}" for s in swings)
    assert report(9, ok, f"T_s swings over eta in [0.1, 0.9]: [{detail}] vs < 2% required")


def test_criterion_9_companion_small_eta_insensitivity():
    # where the small-p_c premise actually holds (eta at or below the
    # package default), the lifetimes are insensitive at the few-permille level
    cfg = default_config()
    nominal = [row.lifetime for row in analysis.make_table1(cfg.sigma_b_list, cfg.link, cfg.t_generation)]
    for i, sigma_b in enumerate(cfg.sigma_b_list):
        lifetimes = []
        for eta in (0.01, 0.05):
            node = EnsembleParams(
                chi=0.005, gamma_0=0.76, decay=ExponentialEfficiency(0.410), xi_se=0.26, z_noise=3e-4, eta=eta
            )
            link = LinkConfig.symmetric(
                node, NoiseField(sigma_b=sigma_b), SpinWaveMode(mu_prime=5000.0), zeta=0.85
            )
            lifetimes.append(analysis.entanglement_lifetime(link))
        assert (max(lifetimes) - min(lifetimes)) / nominal[i] < 0.02


def test_criterion_10_determinism(tmp_path):
    doc = {
        "link": {"eta": 0.4},
        "sweep": {"t_start": 1e-3, "t_end": 0.01, "n_points": 2, "spacing": "log"},
        "mc": {"trials": 60000, "seed": 3, "theta_points": 12},
    }
    import json

    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(doc))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["mc", "--config", str(cfg_path), "--output", str(a)]) == 0
    assert main(["mc", "--config", str(cfg_path), "--output", str(b)]) == 0
    byte_identical = a.read_bytes() == b.read_bytes()

    # chunk granularity is the engine's parallel unit: any decomposition of
    # the trial range reproduces the same tallies bit for bit
    cfg = lattice_link(eta=0.4, sigma_b=1e-3, zeta=0.85)
    runs = [
        (
            st.simulate_link_fringe(cfg, 5e-3, trials_per_theta=4000, seed=12, chunk_size=c),
            st.simulate_link_pairs(cfg, 5e-3, trials=50_000, seed=12, chunk_size=c),
            st.simulate_link_correlation(cfg, 5e-3, trials=50_000, seed=12, chunk_size=c),
        )
        for c in (1_000, 7_777, 1 << 18)
    ]
    chunk_invariant = runs[0] == runs[1] == runs[2]
    ok = byte_identical and chunk_invariant
    assert report(10, ok, f"byte-identical: {byte_identical}, chunk-invariant: {chunk_invariant}")
