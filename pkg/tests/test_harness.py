import numpy as np
import pytest

from bfssl import harness as H
from bfssl import checkpoint
from bfssl.config import RunConfig, apply_overrides
from bfssl.errors import ArchitectureMismatch


def tiny(**over):
    base = {"episodes": 2, "slots": 3, "simco.input_dim": 6, "simco.hidden_dim": 8, "simco.embed_dim": 8,
            "simco.proj_dim": 8, "data.samples_per_vehicle": 16, "data.eval_samples": 16,
            "sac.hidden": (8,), "sac.batch_size": 8, "max_local_iters": 2}
    base.update(over)
    return apply_overrides(RunConfig(), base)


@pytest.mark.parametrize("k,t,s,r", [(1, 1, 20, 1), (2, 1, 100, 101), (3, 100, 100, 300)])
def test_slot_to_round(k, t, s, r):
    assert H.slot_to_round(k, t, s) == r


def test_slot_to_round_rejects_out_of_range():
    with pytest.raises(ValueError):
        H.slot_to_round(1, 0, 5)
    with pytest.raises(ValueError):
        H.slot_to_round(1, 6, 5)
    with pytest.raises(ValueError):
        H.slot_to_round(0, 1, 5)


def test_streams_are_independent_and_reproducible():
    a, b = H.make_streams(3), H.make_streams(3)
    assert set(a) == set(H.STREAMS)
    assert a["sac"].random() == b["sac"].random()
    assert a["sac"].random() != a["ssl"].random()
    assert H.make_streams(3, purpose=1)["sac"].random() != H.make_streams(3)["sac"].random()


def test_row_count_and_round_clock():
    res = H.run_training(tiny())
    assert len(res.rows) == 6
    for row in res.rows:
        assert row.round == (row.episode - 1) * 3 + row.slot
        assert 0 <= row.success_count <= 2
    assert res.agent.updates == 6  # one update event after episode 2, one step per collected slot


def test_single_vehicle_single_slot_global_is_local_model():
    cfg = tiny(episodes=1, slots=1, n_vehicles=1, force_success=True)
    sim = H.Simulation(cfg, H.make_streams(cfg.seed))
    sim.reset_vehicles()
    models, vels = sim.local_round([2], 1, 1)
    sim.aggregate(models, vels, np.ones(1, dtype=int))
    assert np.array_equal(sim.global_params, models[0])
    res = H.run_training(cfg)
    assert len(res.rows) == 1 and res.rows[0].success_count == 1


def test_empty_round_carries_model_over():
    cfg = tiny()
    sim = H.Simulation(cfg, H.make_streams(0))
    sim.reset_vehicles()
    before = sim.global_params.copy()
    models, vels = sim.local_round([2, 2], 1, 1)
    sim.aggregate(models, vels, np.zeros(2, dtype=int))
    assert np.array_equal(sim.global_params, before)


def test_byte_identical_metrics(tmp_path):
    for name in ("a", "b"):
        H.run_training(tiny(), out_dir=tmp_path / name)
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert (tmp_path / "a" / "agent.bin").read_bytes() == (tmp_path / "b" / "agent.bin").read_bytes()
    rows = H.read_metrics_csv(tmp_path / "a" / "metrics.csv")
    assert len(rows) == 6 and set(rows[0]) == set(H.METRIC_FIELDS)


def test_run_test_is_deterministic_and_in_bounds(tmp_path):
    cfg = tiny()
    res = H.run_training(cfg, out_dir=tmp_path)
    actor = checkpoint.load_actor(tmp_path / "agent.bin", expected=res.agent.actor)
    cfg_t = apply_overrides(cfg, {"test_slots": 5})
    r1 = H.run_test(cfg_t, actor)
    r2 = H.run_test(cfg_t, actor)
    assert len(r1) == 5
    assert [r.objective for r in r1] == [r.objective for r in r2]
    with pytest.raises(ArchitectureMismatch):
        H.run_test(apply_overrides(cfg_t, {"n_vehicles": 3}), actor)


def test_drop_with_high_threshold_equals_uniform():
    cfg = tiny(drop_threshold=1000.0)
    a = H.run_baseline(cfg, "drop-agg")
    b = H.run_baseline(cfg, "uniform-agg")
    assert [r.global_loss for r in a.rows] == [r.global_loss for r in b.rows]


def test_uniform_matches_bfssl_when_blur_is_equal():
    # near-degenerate velocity spread makes every blur level equal up to ~1e-8
    cfg = tiny(**{"mobility.sigma2": 1e-12, "force_success": True})
    a = H.run_training(cfg)
    b = H.run_baseline(cfg, "uniform-agg")
    assert np.allclose([r.global_loss for r in a.rows], [r.global_loss for r in b.rows], rtol=1e-6)


def test_pso_baseline_actions_in_bounds():
    cfg = tiny(episodes=1, slots=2, **{"pso.max_iterations": 5, "pso.swarm_size": 4})
    sim = H.Simulation(cfg, H.make_streams(0))
    sim.reset_vehicles()
    p, f = sim.pso_action()
    assert np.all((p >= cfg.channel.p_min) & (p <= cfg.channel.p_max))
    assert np.all((f >= cfg.compute.f_min) & (f <= cfg.compute.f_max))
    res = H.run_baseline(cfg, "pso")
    assert len(res.rows) == 2 and res.agent is None


def test_unknown_baseline():
    with pytest.raises(ValueError):
        H.baseline_config(RunConfig(), "hgga")


def test_interference_raises_power_floor_at_fixed_action():
    out = []
    for ic in (0, 1, 2):
        cfg = tiny(**{"channel.interferer_count": ic})
        sim = H.Simulation(cfg, H.make_streams(5))
        sim.reset_vehicles()
        p, f = sim.bounds.to_physical(np.zeros(4))
        out.append(sim.evaluate(p, f))
    assert np.all(out[0].p_star <= out[1].p_star) and np.all(out[1].p_star <= out[2].p_star)
    assert out[0].reward >= out[1].reward >= out[2].reward


@pytest.mark.slow
def test_trained_policy_objective_less_spread_than_random():
    cfg = RunConfig(episodes=50, slots=20, seed=0, ssl_enabled=False)
    res = H.run_training(cfg)
    sac_rows = H.run_test(cfg, res.agent.actor)
    rand_rows = H.run_test(apply_overrides(cfg, {"allocator": "random"}))
    assert np.var([r.objective for r in sac_rows]) < np.var([r.objective for r in rand_rows])
