import dataclasses

import numpy as np
import pytest

from ckkslt import ckks
from ckkslt import costmodel as cm
from ckkslt import datapath as dp
from ckkslt import linear


@pytest.mark.parametrize("set_name", ["set-a", "set-b", "set-c"])
def test_count_mode_matches_closed_forms(set_name):
    params, factors, cfg = cm.reference_config(set_name)
    rows = dp.validate_against_model(params, factors, cfg)
    for row in rows:
        assert row["explained"], row
    # non-whitelisted off-chip cells agree exactly
    for row in rows:
        if row["category"] != "onchip_peak" and not row["whitelisted"]:
            assert row["delta"] == 0, row


@pytest.mark.parametrize("set_name", ["set-a", "set-b", "set-c"])
def test_whitelisted_deltas_equal_documented_formulas(set_name):
    params, factors, cfg = cm.reference_config(set_name)
    n1, n2, n3 = factors
    limbs = params.pq_limbs
    beta = params.beta
    expected = {
        (2, "ntt"): (-(-(n1 - 1) // cfg.m2) - -(-(n1 - 1) // cfg.m1)) * limbs,
        (1, "poly_write"): beta * limbs,
        (3, "poly_write"): -2 * n1 * limbs,
        (6, "poly_write"): -2,
    }
    rows = {(r["phase"], r["category"]): r
            for r in dp.validate_against_model(params, factors, cfg)}
    for cell, delta in expected.items():
        assert rows[cell]["delta"] == delta, (cell, rows[cell])
        assert rows[cell]["whitelisted"]


def test_onchip_peak_below_envelope():
    for set_name in ("set-a", "set-b", "set-c"):
        params, factors, cfg = cm.reference_config(set_name)
        sim = dp.simulate(params, factors, cfg)
        peaks = cm.peak_onchip(params, factors, cfg)
        for phase in cm.PHASES:
            assert sim.meter.onchip_peak[phase] <= peaks[phase]


def test_perturbed_config_flags_delta():
    params, factors, cfg = cm.reference_config("set-a")
    sim = dp.simulate(params, factors, cfg)
    other = dataclasses.replace(cfg, m3=7)
    model = cm.offchip_access(params, factors, other)
    diffs = [
        (p, c) for p in cm.PHASES for c in cm.CATEGORIES
        if sim.meter.offchip[p][c] != model[p][c] and (p, c) == (3, "poly_read")
    ]
    assert diffs, "perturbing m3 must change the phase-3 read cell"


def test_dp_variation_does_not_change_offchip():
    params, factors, cfg = cm.reference_config("set-a")
    meters = []
    for dp_val in (2, 4, 8):
        sim = dp.simulate(params, factors,
                          dataclasses.replace(cfg, dp=dp_val))
        meters.append(sim.meter.offchip)
    assert meters[0] == meters[1] == meters[2]


def test_trace_counts():
    params, factors, cfg = cm.reference_config("set-b")
    sim = dp.simulate(params, factors, cfg)
    n1, n2, n3 = factors
    assert sim.trace.decompose == n1 + n3 - 1
    assert sim.trace.moddown == n1 + n3


def test_meter_conservation_phase_boundaries():
    params, factors, cfg = cm.reference_config("set-a")
    n1, n2, n3 = factors
    limbs = params.pq_limbs
    sim = dp.simulate(params, factors, cfg)
    # phase 2 reads exactly the rotated second components phase 1 wrote
    assert sim.meter.offchip[2]["poly_read"] == (n1 - 1) * limbs
    # phase 6 reads exactly the accumulator pair phase 5 last wrote
    assert sim.meter.offchip[6]["poly_read"] == 2 * limbs


def test_round_counts_are_ceiling_products():
    # with unit parallelism every phase runs its full loop extents; the
    # iteration counts are the ceiling products of the phase descriptions
    def ceil(a, b):
        return -(-a // b)

    for set_name in ("set-a", "set-b", "set-c"):
        params, factors, ref_cfg = cm.reference_config(set_name)
        n1, n2, n3 = factors
        limbs = params.pq_limbs
        for cfg in (cm.ParallelismConfig(), ref_cfg):
            sim = dp.simulate(params, factors, cfg)
            r = sim.meter.rounds
            assert r[1] == ceil(n1 - 1, cfg.m1) * ceil(limbs, cfg.l1)
            assert r[2] == ceil(n1 - 1, cfg.m2)
            assert r[3] == (ceil(n2 - 1, cfg.m3) * ceil(limbs, cfg.l3)
                            * ceil(n1, cfg.m4))
            assert r[4] == ceil(n1 * n2, cfg.m5)
            assert r[5] == ceil(n3, cfg.m6)
            assert r[6] == 1


def test_count_mode_speed_set_c():
    import time
    params, factors, cfg = cm.reference_config("set-c")
    t0 = time.time()
    dp.simulate(params, factors, cfg)
    assert time.time() - t0 < 1.0


def test_config_out_of_range():
    params, factors, _ = cm.reference_config("set-a")
    with pytest.raises(cm.ConfigOutOfRange):
        dp.simulate(params, factors, cm.ParallelismConfig(m6=99))


@pytest.fixture(scope="module")
def compute_env(toy_params, toy_keys):
    sk, pk = toy_keys
    rng = np.random.default_rng(55)
    n = 16
    plan = linear.LtPlan(linear.LtMethod.TH_BSGS, n, (4, 2, 2))
    keys = linear.generate_lt_keys(sk, plan, toy_params, rng)
    F = rng.uniform(-1, 1, (n, n))
    v = rng.uniform(-1, 1, n)
    dm = linear.diagonalize(F, plan, toy_params)
    tiled = np.tile(v, toy_params.slots // n)
    ct = ckks.encrypt(ckks.encode(tiled, toy_params), pk, toy_params, rng)
    return plan, keys, F, v, dm, ct


def test_compute_mode_matches_evaluator_bit_for_bit(
        compute_env, toy_params, toy_keys):
    sk, _ = toy_keys
    plan, keys, F, v, dm, ct = compute_env
    ref, _ = linear.lt_th_bsgs(ct, dm, keys, toy_params)
    shape = cm.HeParams(toy_params.ring_dim, toy_params.basis.level_count,
                        toy_params.basis.alpha, 44, n=plan.n)
    cfg = cm.ParallelismConfig(m1=2, m3=1, m5=3, m6=2, l1=2)
    ctx = dp.ComputeContext(toy_params, ct, dm, keys)
    sim = dp.simulate(shape, plan.factors, cfg, mode="compute", inputs=ctx)
    for a, b in zip(sim.ciphertext.c0.limbs, ref.c0.limbs):
        assert np.array_equal(a.coeffs, b.coeffs)
    for a, b in zip(sim.ciphertext.c1.limbs, ref.c1.limbs):
        assert np.array_equal(a.coeffs, b.coeffs)
    # and the decoded result is the right linear transform
    out = ckks.decode(ckks.decrypt(sim.ciphertext, sk), toy_params)
    expect = np.tile(F @ v, toy_params.slots // plan.n)
    assert np.max(np.abs(out - expect)) < 1e-3


def test_compute_and_count_meters_agree(compute_env, toy_params):
    plan, keys, F, v, dm, ct = compute_env
    shape = cm.HeParams(toy_params.ring_dim, toy_params.basis.level_count,
                        toy_params.basis.alpha, 44, n=plan.n)
    cfg = cm.ParallelismConfig(m1=2, m3=1, m5=3, m6=2, l1=2)
    ctx = dp.ComputeContext(toy_params, ct, dm, keys)
    sim_c = dp.simulate(shape, plan.factors, cfg, mode="compute", inputs=ctx)
    sim_n = dp.simulate(shape, plan.factors, cfg, mode="count_only")
    assert sim_c.meter.offchip == sim_n.meter.offchip
    assert sim_c.meter.onchip_peak == sim_n.meter.onchip_peak


def test_report_json_schema():
    params, factors, cfg = cm.reference_config("set-a")
    sim = dp.simulate(params, factors, cfg)
    rep = dp.report_json(params, factors, cfg, sim)
    assert set(rep) == {"params", "phases", "onchip_peak", "rounds", "totals",
                        "trace"}
    assert set(rep["phases"]) == {str(p) for p in cm.PHASES}
    for row in rep["phases"].values():
        assert set(row) == set(cm.CATEGORIES)
