import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from bfssl import mobility as mob
from bfssl.errors import ConfigError


def cfg(**kw):
    return mob.MobilityConfig(**kw)


def quad_cdf(c, v):
    return integrate.quad(lambda x: mob.velocity_pdf(c, x), c.v_min, v, epsabs=1e-13, epsrel=1e-12)[0]


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        cfg(v_min=150, v_max=60)
    with pytest.raises(ConfigError):
        cfg(sigma2=0.0)
    with pytest.raises(ConfigError):
        cfg(turn_probs=(0.3, 0.3, 0.5))
    with pytest.raises(ConfigError):
        cfg(slot_duration=0.0)


@pytest.mark.parametrize("mu,sigma2", [(105.0, 8.0), (0.5, 8.0), (105.0, 900.0), (140.0, 50.0)])
def test_pdf_integrates_to_one(mu, sigma2):
    c = cfg(mu=mu, sigma2=sigma2)
    total, _ = integrate.quad(lambda v: mob.velocity_pdf(c, v), c.v_min, c.v_max,
                              points=[min(max(mu, 60.0), 150.0)], epsabs=1e-14, epsrel=1e-12, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_pdf_zero_outside_and_mode_at_mu():
    c = cfg()
    assert mob.velocity_pdf(c, c.v_max + 1) == 0.0
    assert mob.velocity_pdf(c, c.v_min - 1) == 0.0
    grid = np.linspace(60, 150, 9001)
    assert grid[np.argmax(mob.velocity_pdf(c, grid))] == pytest.approx(105.0)


def test_samples_within_bounds():
    c = cfg(sigma2=900.0)
    v = mob.sample_velocity(c, np.random.default_rng(1), size=10**6)
    assert v.min() >= 60.0 and v.max() <= 150.0


def test_literal_mu_samples_pile_at_lower_bound():
    v = mob.sample_velocity(cfg(mu=0.5), np.random.default_rng(2), size=10**4)
    assert np.all(v >= 60.0) and np.all(v < 62.0) and v.mean() < 60.3


def test_degenerate_width():
    v = mob.sample_velocity(cfg(mu=100.0, sigma2=1e-12), np.random.default_rng(3), size=1000)
    assert np.all(np.abs(v - 100.0) <= 1e-3)


def test_sample_mean_matches_quadrature():
    c = cfg(sigma2=900.0)
    mean_q = integrate.quad(lambda v: v * mob.velocity_pdf(c, v), 60, 150, epsabs=1e-12)[0]
    var_q = integrate.quad(lambda v: (v - mean_q) ** 2 * mob.velocity_pdf(c, v), 60, 150, epsabs=1e-12)[0]
    v = mob.sample_velocity(c, np.random.default_rng(4), size=10**6)
    assert abs(v.mean() - mean_q) < 3 * math.sqrt(var_q / v.size)


def test_ks_against_quadrature_cdf():
    c = cfg()
    grid = np.linspace(c.v_min, c.v_max, 2001)
    pdf = mob.velocity_pdf(c, grid)
    cdf = np.concatenate([[0.0], np.cumsum([quad_cdf_piece(c, a, b) for a, b in zip(grid[:-1], grid[1:])])])
    assert cdf[-1] == pytest.approx(1.0, abs=1e-9)
    v = mob.sample_velocity(c, np.random.default_rng(5), size=10**5)
    res = stats.kstest(v, lambda x: np.interp(x, grid, cdf))
    assert pdf.max() > 0
    assert res.statistic < 1.63 / math.sqrt(v.size)


def quad_cdf_piece(c, a, b):
    return integrate.quad(lambda x: mob.velocity_pdf(c, x), a, b, epsabs=1e-14)[0]


def test_straight_step_displacement():
    c = cfg()
    s = mob.VehicleState(0, (-100.0, 0.0), (1.0, 0.0), 72.0, has_turned=True)
    s2 = mob.step_vehicle(s, c, np.random.default_rng(0))
    assert s2.position == pytest.approx((-90.0, 0.0))
    assert s2.heading == s.heading
    assert 60 <= s2.velocity <= 150


def test_turn_applied_once_at_centre():
    c = cfg()
    rng = np.random.default_rng(7)
    s = mob.VehicleState(0, (-5.0, 0.0), (1.0, 0.0), 72.0)
    s2 = mob.step_vehicle(s, c, rng)
    assert s2.has_turned
    # 5 m to the centre then 5 m along the new heading
    assert s2.position == pytest.approx((5.0 * s2.heading[0], 5.0 * s2.heading[1]))
    s3 = mob.step_vehicle(s2, c, rng)
    assert s3.heading == s2.heading


def test_turn_frequencies():
    c = cfg()
    rng = np.random.default_rng(8)
    counts = np.zeros(3)
    base = mob.VehicleState(0, (-1.0, 0.0), (1.0, 0.0), 72.0)
    n = 100_000
    for _ in range(n):
        h = mob.step_vehicle(base, c, rng).heading
        counts[{(0.0, 1.0): 0, (0.0, -1.0): 1}.get((round(h[0], 9) + 0.0, round(h[1], 9) + 0.0), 2)] += 1
    assert np.allclose(counts / n, c.turn_probs, atol=0.01)


def test_distance():
    c = cfg()
    s = mob.VehicleState(0, (3.0, 4.0), (1.0, 0.0), 100.0)
    assert mob.distance_to_bs(s, c) == pytest.approx(5.0)
    assert mob.distance_to_bs(mob.VehicleState(0, (0.0, 0.0), (1.0, 0.0), 100.0), c) == c.d_floor
    shifted = cfg(bs_position=(10.0, 10.0))
    s2 = mob.VehicleState(0, (13.0, 14.0), (1.0, 0.0), 100.0)
    assert mob.distance_to_bs(s2, shifted) == pytest.approx(5.0)


def test_heading_must_be_unit():
    with pytest.raises(ValueError):
        mob.VehicleState(0, (0.0, 0.0), (1.0, 1.0), 100.0)


def test_spawn_and_respawn():
    c = cfg()
    rng = np.random.default_rng(9)
    s = mob.spawn_vehicle(3, c, rng)
    assert mob.distance_to_bs(s, c) == pytest.approx(c.spawn_radius)
    gone = mob.VehicleState(3, (c.coverage_radius + 1, 0.0), (1.0, 0.0), 100.0, has_turned=True)
    back = mob.respawn_if_exited(gone, c, rng)
    assert back.id == 3 and not back.has_turned
    assert mob.respawn_if_exited(s, c, rng) is s


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-500, 500), y=st.floats(-500, 500), seed=st.integers(0, 2**32 - 1))
def test_distance_floor_property(x, y, seed):
    c = cfg()
    s = mob.VehicleState(0, (x, y), (0.0, 1.0), 100.0)
    assert mob.distance_to_bs(s, c) >= c.d_floor
    s2 = mob.step_vehicle(s, c, np.random.default_rng(seed))
    assert c.v_min <= s2.velocity <= c.v_max
    assert abs(math.hypot(*s2.heading) - 1.0) <= 1e-9
