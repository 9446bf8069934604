import numpy as np
import pytest

from uavfl.model import DecisionVector, ScenarioConfig


def make_config(n_uavs=1, rounds=1, slots_per_round=2, **overrides):
    """Small hand-checkable scenario; override any field."""
    base = dict(
        n_uavs=n_uavs,
        rounds=rounds,
        slots_per_round=slots_per_round,
        slot_len=2.0,
        altitude=100.0,
        v_max=30.0,
        beta0=1e-5,
        noise_power=1e-11,          # -80 dBm
        bw_uav=20e6,
        bw_bs=20e6,
        unit_sense_time=2e-4,
        samples=1000.0,
        cycles_per_sample_uav=2e4,
        local_iters=15,
        switch_cap=1e-28,
        model_size_up=5e6,
        model_size_down=5e6,
        cycles_per_sample_bs=2e8,
        agg_samples=float(n_uavs),
        p_se_max=0.01,
        p_cm_max=0.316,             # 25 dBm
        p_bs_max=3.16,              # 35 dBm
        f_uav_max=2e9,
        f_bs_max=10e9,
        e_max=2.0,
        initial_xy=[[120.0, 60.0]] * n_uavs,
        final_xy=[[30.0, 20.0]] * n_uavs,
    )
    if n_uavs > 1:
        rng = np.random.default_rng(7)
        base["initial_xy"] = rng.uniform(-250, 250, size=(n_uavs, 2))
        base["final_xy"] = base["initial_xy"] * 0.2
    base.update(overrides)
    return ScenarioConfig(**base)


def hover_dv(config, p_se=None, p_cm=None, f_uav=None, p_bs=None, f_bs=None):
    """Decision point that hovers at the initial position all mission long."""
    n, k, t = config.n_uavs, config.rounds, config.slots_per_round
    xy = np.broadcast_to(config.initial_xy[:, None, None, :],
                         (n, k, t, 2)).copy()
    return DecisionVector(
        xy=xy,
        p_se=np.full((n, k), 0.0 if p_se is None else p_se),
        p_cm=np.full((n, k, t),
                     0.5 * config.p_cm_max.min() if p_cm is None else p_cm),
        f_uav=np.full((n, k),
                      0.5 * config.f_uav_max.min() if f_uav is None else f_uav),
        p_bs=np.full((k,), 0.5 * config.p_bs_max if p_bs is None else p_bs),
        f_bs=np.full((k,), 0.5 * config.f_bs_max if f_bs is None else f_bs),
    )


def random_scenario(rng, n_max=4, k_max=3, t_max=4):
    """Randomized scenario with endpoints guaranteed reachable in flight."""
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(1, k_max + 1))
    t = int(rng.integers(1, t_max + 1))
    slot_len = float(rng.uniform(1.0, 2.5))
    v_max = float(rng.uniform(20.0, 40.0))
    reach = 0.9 * v_max * slot_len * k * t
    ang = rng.uniform(0, 2 * np.pi, n)
    r0 = rng.uniform(80, 400, n)
    initial = np.stack([r0 * np.cos(ang), r0 * np.sin(ang)], axis=1)
    pull = rng.uniform(0.3, 0.9, (n, 1))
    span = -initial * pull
    dist = np.linalg.norm(span, axis=1, keepdims=True)
    final = initial + span * np.minimum(1.0, reach / np.maximum(dist, 1e-9))
    return make_config(
        n_uavs=n, rounds=k, slots_per_round=t,
        slot_len=slot_len, v_max=v_max,
        altitude=float(rng.uniform(60, 150)),
        samples=rng.uniform(500, 1500, (n, k)),
        cycles_per_sample_uav=rng.uniform(5e3, 4e4, (n, k)),
        model_size_up=float(rng.uniform(1e6, 8e6)),
        model_size_down=float(rng.uniform(1e6, 8e6)),
        cycles_per_sample_bs=rng.uniform(5e7, 4e8, (k,)),
        agg_samples=float(n),
        p_cm_max=rng.uniform(0.1, 0.5, n),
        p_se_max=rng.uniform(0.005, 0.02, n),
        p_bs_max=float(rng.uniform(1.0, 5.0)),
        f_uav_max=rng.uniform(1e9, 3e9, n),
        f_bs_max=float(rng.uniform(5e9, 15e9)),
        e_max=float(rng.uniform(0.5, 3.0)),
        initial_xy=initial, final_xy=final,
    )


def random_feasible_scenario(rng, **kwargs):
    from uavfl import solver

    for _ in range(50):
        cfg = random_scenario(rng, **kwargs)
        try:
            solver.init_feasible(cfg)
        except solver.InfeasibleScenarioError:
            continue
        return cfg
    raise RuntimeError("could not sample a feasible scenario")


@pytest.fixture
def tiny_config():
    return make_config()
