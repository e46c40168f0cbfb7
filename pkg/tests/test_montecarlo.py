import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats
from scipy.optimize import brentq

from hybridcov import association as A
from hybridcov import coverage as C
from hybridcov.channel import noise_power
from hybridcov.montecarlo import (Realization, SimOptions, associate, measure_sinr,
                                  nlos_mmwave_toggle, percentile_with_ci, sample_batch,
                                  sample_realization, simulate, simulation_radii)
from hybridcov.network import Blockage, Direction, los_probability

DL, UL = Direction.DL, Direction.UL


def hand_built(tier, distance, los=None, fading=None, trial=None, n_trials=1):
    tier = np.asarray(tier, dtype=np.int64)
    distance = np.asarray(distance, dtype=float)
    n = tier.size
    los = np.ones(n, bool) if los is None else np.asarray(los, bool)
    h = np.ones(n) if fading is None else np.asarray(fading, dtype=float)
    trial = np.zeros(n, np.int64) if trial is None else np.asarray(trial, np.int64)
    return Realization(n_trials=n_trials, trial=trial, tier=tier, distance=distance,
                       angle=np.zeros(n), los=los, fading={DL: h, UL: h},
                       nlos_fading={DL: np.zeros(n), UL: np.zeros(n)},
                       beam={DL: np.zeros(n), UL: np.zeros(n)})


def test_radii(cfg):
    r = simulation_radii(cfg)
    b = cfg.blockage
    assert los_probability(r[1], b) == pytest.approx(1e-6, rel=1e-9)
    assert r[2] == r[1]
    assert r[0] == pytest.approx(5 / math.sqrt(math.pi * 2e-6))
    assert np.all(simulation_radii(cfg, 300.0) == 300.0)


def test_poisson_counts(cfg):
    thz = replace(cfg, tiers=(cfg.tiers[2],))
    real = sample_batch(thz, 11, 0, 10_000, radius=500.0)
    counts = real.counts
    mean = 5e-4 * math.pi * 500 ** 2
    assert counts.mean() == pytest.approx(mean, rel=0.02)
    # dispersion index of a Poisson law is chi^2 with n-1 dof
    disp = ((counts - counts.mean()) ** 2).sum() / counts.mean()
    assert stats.chi2.sf(disp, counts.size - 1) > 1e-3
    assert stats.chi2.cdf(disp, counts.size - 1) > 1e-3
    # uniform in the disk: (d/R)^2 ~ U(0, 1)
    assert stats.kstest((real.distance[:50_000] / 500.0) ** 2, "uniform").pvalue > 1e-3


def test_los_bernoulli_frequency(cfg):
    real = sample_batch(cfg, 5, 0, 400)
    for lo, hi in [(0, 50), (50, 150), (150, 400)]:
        sel = (real.tier > 0) & (real.distance >= lo) & (real.distance < hi)
        p = los_probability(real.distance[sel], cfg.blockage).mean()
        se = math.sqrt(p * (1 - p) / sel.sum())
        assert abs(real.los[sel].mean() - p) < 4 * se


def test_rectangle_blockage_matches_los_law(cfg):
    thz = replace(cfg, tiers=(cfg.tiers[2],))
    real = sample_batch(thz, 2, 0, 150, radius=200.0, blockage_mode="rectangles")
    for lo, hi in [(0, 50), (50, 100), (100, 200)]:
        sel = (real.distance >= lo) & (real.distance < hi)
        p = los_probability(real.distance[sel], cfg.blockage).mean()
        se = math.sqrt(p * (1 - p) / sel.sum())
        # per-trial blockages correlate links, so allow a generous band
        assert abs(real.los[sel].mean() - p) < 8 * se + 0.02


def test_same_seed_same_realization(cfg):
    a = sample_realization(cfg, seed=4, trial=17)
    b = sample_realization(cfg, seed=4, trial=17)
    c = sample_realization(cfg, seed=4, trial=18)
    assert np.array_equal(a.distance, b.distance) and np.array_equal(a.fading[DL], b.fading[DL])
    assert not np.array_equal(a.distance, c.distance)


def test_zero_density_tier_is_empty(cfg):
    sparse = cfg.with_tier(2, density=0.0)
    real = sample_batch(sparse, 0, 0, 20)
    assert not np.any(real.tier == 2)


def test_batch_equals_single_trials(cfg):
    batch = sample_batch(cfg, 9, 3, 6)
    singles = [sample_realization(cfg, seed=9, trial=t) for t in range(3, 6)]
    assert np.array_equal(batch.distance, np.concatenate([s.distance for s in singles]))


def test_single_bs_is_served(cfg):
    real = hand_built([1], [40.0])
    assoc = associate(real, cfg, DL)
    assert assoc.tier[0] == 1 and assoc.distance[0] == 40.0


def test_nearest_of_equal_bss_wins(cfg):
    real = hand_built([2, 2], [20.0, 10.0])
    assert associate(real, cfg, DL).index[0] == 1


def test_tie_goes_to_lower_tier(cfg):
    twin = replace(cfg, tiers=(cfg.tiers[2], cfg.tiers[2]))
    real = hand_built([1, 0], [15.0, 15.0])
    assert associate(real, twin, DL).tier[0] == 0


def test_blocked_mmwave_is_not_a_candidate(cfg):
    real = hand_built([0, 1], [800.0, 5.0], los=[False, False])
    assert associate(real, cfg, DL).tier[0] == 0
    lonely = hand_built([2], [5.0], los=[False])
    assert associate(lonely, cfg, DL).discarded[0]
    assert np.isnan(measure_sinr(lonely, cfg, DL, associate(lonely, cfg, DL))[0])


def test_decoupled_directions_pick_different_bss(cfg):
    d_mm = 100.0

    def ratio_dl(d_t):
        return math.exp(A.log_biased_power(cfg, 2, DL, d_t) - A.log_biased_power(cfg, 1, DL, d_mm))

    # THz loses the DL by 5 dB; with equal UL powers it then wins the UL by 5 dB
    d_t = brentq(lambda d: ratio_dl(d) - 10 ** -0.5, 0.1, 1000.0)
    real = hand_built([1, 2], [d_mm, d_t])
    assert associate(real, cfg, DL).tier[0] == 1
    assert associate(real, cfg, UL).tier[0] == 2


def test_interference_free_sinr(cfg):
    mm = cfg.tiers[1]
    real = hand_built([1], [50.0], fading=[0.7])
    sinr = measure_sinr(real, cfg, DL, associate(real, cfg, DL))[0]
    want = mm.power_dl * mm.antennas * mm.reference_gain * 50.0 ** -2 * 0.7 / noise_power(mm)
    assert sinr == pytest.approx(want, rel=1e-12)


def test_thz_absorption_noise_sinr(cfg):
    thz = cfg.tiers[2]
    x, ka = 30.0, cfg.absorption
    real = hand_built([2], [x])
    sinr = measure_sinr(real, cfg, DL, associate(real, cfg, DL))[0]
    j = thz.power_dl * thz.antennas * thz.reference_gain * x ** -2
    want = j * math.exp(-ka * x) / (j * (1 - math.exp(-ka * x)) + noise_power(thz))
    assert sinr == pytest.approx(want, rel=1e-12)


def test_interference_from_same_band_only(cfg):
    mm = cfg.tiers[1]
    real = hand_built([0, 1, 1], [900.0, 40.0, 80.0])
    real.beam[DL][:] = 0.0  # main lobe toward the UE
    sinr = measure_sinr(real, cfg, DL, associate(real, cfg, DL))[0]
    sig = mm.power_dl * mm.antennas * mm.reference_gain * 40.0 ** -2
    interf = mm.power_dl * mm.antennas * mm.reference_gain * 80.0 ** -2
    assert sinr == pytest.approx(sig / (interf + noise_power(mm)), rel=1e-12)


def test_several_trials_are_kept_apart(cfg):
    real = hand_built([1, 1, 2], [30.0, 60.0, 10.0], trial=[0, 0, 1], n_trials=3)
    assoc = associate(real, cfg, DL)
    assert list(assoc.tier) == [1, 2, -1]
    sinr = measure_sinr(real, cfg, DL, assoc)
    assert np.isfinite(sinr[:2]).all() and np.isnan(sinr[2])


@pytest.fixture(scope="module")
def small_run(cfg):
    return simulate(cfg, 1200, seed=5, options=SimOptions(coupled=True, chunk_size=250))


def test_frequencies_sum_to_one(small_run):
    for s in small_run.series():
        assert small_run.association_frequencies(s).sum() == pytest.approx(1.0, abs=1e-15)


def test_worker_count_does_not_change_results(cfg, small_run):
    par = simulate(cfg, 1200, seed=5, options=SimOptions(coupled=True, chunk_size=250),
                   workers=2)
    for s in small_run.series():
        assert np.array_equal(par.tier[s], small_run.tier[s])
        assert np.array_equal(par.sinr[s], small_run.sinr[s], equal_nan=True)


def test_chunking_does_not_change_results(cfg, small_run):
    other = simulate(cfg, 1200, seed=5, options=SimOptions(coupled=True, chunk_size=97))
    assert np.array_equal(other.sinr["ul"], small_run.sinr["ul"], equal_nan=True)


def test_coupling_leaves_downlink_alone(cfg, small_run):
    plain = simulate(cfg, 1200, seed=5, options=SimOptions(chunk_size=250))
    assert np.array_equal(plain.sinr["dl"], small_run.sinr["dl"], equal_nan=True)
    assert np.array_equal(small_run.tier["ul-coupled"], small_run.tier["dl"])


def test_coupled_equals_decoupled_when_directions_match(cfg):
    tiers = tuple(replace(t, power_ul=t.power_dl) for t in cfg.tiers)
    sym = replace(cfg, tiers=tiers)
    run = simulate(sym, 300, seed=1, options=SimOptions(coupled=True))
    assert np.array_equal(run.sinr["ul"], run.sinr["ul-coupled"], equal_nan=True)


def test_nlos_toggle(cfg):
    plain = simulate(cfg, 400, seed=8)
    again = simulate(cfg, 400, seed=8)
    assert np.array_equal(plain.sinr["dl"], again.sinr["dl"], equal_nan=True)
    nlos = simulate(nlos_mmwave_toggle(cfg), 400, seed=8)
    assert not np.array_equal(plain.sinr["dl"], nlos.sinr["dl"], equal_nan=True)
    # without blockages every link is LOS, so NLOS paths are never used
    open_sky = replace(cfg, blockage=Blockage(0.0, 15.0, 15.0))
    a = simulate(open_sky, 100, seed=2, options=SimOptions(radius=300.0))
    b = simulate(nlos_mmwave_toggle(open_sky), 100, seed=2, options=SimOptions(radius=300.0))
    assert np.array_equal(a.tier["dl"], b.tier["dl"])
    assert np.array_equal(a.sinr["dl"], b.sinr["dl"], equal_nan=True)


def test_fejer_gain_mode_runs(cfg):
    run = simulate(cfg, 200, seed=3, options=SimOptions(gain_mode="fejer"))
    cov = run.sinr_coverage("dl", [0.0], per_tier=False)[0]
    assert 0.5 < cov.estimate < 1.0


def test_percentile_with_ci():
    x = np.arange(1, 10_001, dtype=float)
    est, hw = percentile_with_ci(x, 5.0)
    assert est == 500.0
    assert hw == pytest.approx(1.96 * math.sqrt(10_000 * 0.05 * 0.95), abs=1.5)


def test_options_validated():
    with pytest.raises(ValueError):
        SimOptions(blockage_mode="walls")
    with pytest.raises(ValueError):
        SimOptions(radius=-1.0)


def test_rates_use_load(small_run, cfg):
    rates = small_run.rates("dl")
    assert rates.size == np.count_nonzero(small_run.valid("dl"))
    z = small_run.load("dl")
    assert np.all(z >= 1.0)


def test_exact_model_engines_agree(cfg):
    # with unit gamma shapes the series is exact, so the engines must agree within noise
    exact = replace(cfg.with_tier(1, nakagami_shape=1), thz_shape=1)
    taus = [-5.0, 5.0, 15.0]
    run = simulate(exact, 8000, seed=12, options=SimOptions(thz_fading="induced"))
    for q in ("dl", "ul"):
        ana = C.sinr_coverage(exact, q, taus)
        sim = run.sinr_coverage(q, taus, per_tier=False)
        for a, s in zip(ana.total, sim):
            assert abs(a - s.estimate) <= 3 * s.ci_halfwidth + 2e-3
        freq = run.association_frequencies(q)
        assert freq == pytest.approx(ana.association, abs=0.02)


def test_write_records(small_run, tmp_path):
    path = tmp_path / "trials.csv"
    small_run.write_records(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "trial,direction,tier,serving_distance,sinr_db"
    assert len(lines) == 1 + 3 * 1200
