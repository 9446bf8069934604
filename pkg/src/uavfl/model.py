"""Closed-form latency and energy models for a fleet of sensing UAVs that
train a shared model and exchange it with a base station.

One global round per UAV consists of five phases: sense, train locally,
upload the local model, wait for aggregation at the base station, download
the aggregated model.  The round latency is set by the slowest UAV;
total latency sums the rounds.  UAV energy is spent on sensing, computing,
and uploading.

All quantities are SI (seconds, watts, joules, hertz, bits, meters).
Decibel-valued inputs are converted before they reach this module.
"""

from dataclasses import dataclass

import numpy as np

# Absolute tolerance on normalized constraints (each scaled by its bound).
FEAS_TOL = 1e-6


class InfeasibleRateError(ValueError):
    """A link rate of zero was hit while a payload still had to move."""


def _freeze(arr):
    a = np.asarray(arr, dtype=float)
    a.setflags(write=False)
    return a


def _as_grid(value, shape, name):
    a = np.broadcast_to(np.asarray(value, dtype=float), shape).copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and system constants of one optimization scenario.

    Per-UAV quantities have shape (N,), per-UAV-per-round (N, K), per-round
    BS quantities (K,).  Scalars passed for those fields are broadcast.
    The reference SNR ``gamma0`` is derived from ``beta0 / noise_power``
    and never stored.
    """

    n_uavs: int
    rounds: int
    slots_per_round: int
    slot_len: float
    altitude: float
    v_max: float
    beta0: float
    noise_power: float
    bw_uav: np.ndarray            # (N,) uplink bandwidth per UAV
    bw_bs: float                  # broadcast bandwidth of the BS
    unit_sense_time: float        # seconds to acquire one sample
    samples: np.ndarray           # (N, K) samples sensed per round
    cycles_per_sample_uav: np.ndarray  # (N, K)
    local_iters: int              # local training passes per round
    switch_cap: np.ndarray        # (N, K) effective switched capacitance
    model_size_up: float          # bits uploaded per UAV per round
    model_size_down: float        # bits broadcast per round
    cycles_per_sample_bs: np.ndarray   # (K,)
    agg_samples: np.ndarray       # (K,) aggregation work units
    p_se_max: np.ndarray          # (N,) sensing power cap
    p_cm_max: np.ndarray          # (N,) uplink power cap
    p_bs_max: float
    f_uav_max: np.ndarray         # (N,) CPU frequency cap
    f_bs_max: float
    e_max: float                  # per-UAV energy budget over all rounds
    initial_xy: np.ndarray        # (N, 2)
    final_xy: np.ndarray          # (N, 2)
    agg_scale: float = 1.0        # weight on aggregation time in the BS block

    def __post_init__(self):
        n, k = int(self.n_uavs), int(self.rounds)
        if n < 1 or k < 1 or int(self.slots_per_round) < 1:
            raise ValueError("n_uavs, rounds, slots_per_round must be >= 1")
        if int(self.local_iters) < 1:
            raise ValueError("local_iters must be >= 1")
        object.__setattr__(self, "n_uavs", n)
        object.__setattr__(self, "rounds", k)
        object.__setattr__(self, "slots_per_round", int(self.slots_per_round))
        object.__setattr__(self, "local_iters", int(self.local_iters))
        for name in ("slot_len", "altitude", "v_max", "beta0", "noise_power",
                     "bw_bs", "model_size_up", "model_size_down", "p_bs_max",
                     "f_bs_max", "agg_scale"):
            v = float(getattr(self, name))
            if not v > 0:
                raise ValueError(f"{name} must be strictly positive, got {v}")
            object.__setattr__(self, name, v)
        for name in ("unit_sense_time", "e_max"):
            v = float(getattr(self, name))
            if v < 0:
                raise ValueError(f"{name} must be nonnegative, got {v}")
            object.__setattr__(self, name, v)
        for name, shape in (("bw_uav", (n,)), ("p_se_max", (n,)),
                            ("p_cm_max", (n,)), ("f_uav_max", (n,))):
            a = _as_grid(getattr(self, name), shape, name)
            if not np.all(a > 0):
                raise ValueError(f"{name} entries must be strictly positive")
            object.__setattr__(self, name, a)
        for name in ("samples", "cycles_per_sample_uav", "switch_cap"):
            a = _as_grid(getattr(self, name), (n, k), name)
            if not np.all(a >= 0):
                raise ValueError(f"{name} entries must be nonnegative")
            object.__setattr__(self, name, a)
        for name in ("cycles_per_sample_bs", "agg_samples"):
            a = _as_grid(getattr(self, name), (k,), name)
            if not np.all(a >= 0):
                raise ValueError(f"{name} entries must be nonnegative")
            object.__setattr__(self, name, a)
        for name in ("initial_xy", "final_xy"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape == (2,):
                a = np.broadcast_to(a, (n, 2)).copy()
            if a.shape != (n, 2):
                raise ValueError(f"{name} must have shape ({n}, 2)")
            object.__setattr__(self, name, _freeze(a))

    @property
    def gamma0(self):
        """Reference SNR at 1 m per watt of transmit power."""
        return self.beta0 / self.noise_power

    @property
    def t_flight(self):
        """Per-round flight budget: slot length times slots per round."""
        return self.slot_len * self.slots_per_round

    @property
    def payload_per_slot(self):
        """Upload bits carried in each slot (model split evenly over slots)."""
        return self.model_size_up / self.slots_per_round


@dataclass(frozen=True)
class DecisionVector:
    """One candidate operating point: trajectories plus resource allocation.

    Shapes: xy (N, K, T, 2); p_se, f_uav (N, K); p_cm (N, K, T);
    p_bs, f_bs (K,).
    """

    xy: np.ndarray
    p_se: np.ndarray
    p_cm: np.ndarray
    f_uav: np.ndarray
    p_bs: np.ndarray
    f_bs: np.ndarray

    def __post_init__(self):
        for name in ("xy", "p_se", "p_cm", "f_uav", "p_bs", "f_bs"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))

    def check_shapes(self, config):
        n, k, t = config.n_uavs, config.rounds, config.slots_per_round
        expect = {"xy": (n, k, t, 2), "p_se": (n, k), "p_cm": (n, k, t),
                  "f_uav": (n, k), "p_bs": (k,), "f_bs": (k,)}
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape},"
                                 f" expected {shape}")

    def replace(self, **fields):
        data = {name: getattr(self, name) for name in
                ("xy", "p_se", "p_cm", "f_uav", "p_bs", "f_bs")}
        data.update(fields)
        return DecisionVector(**data)

    def to_dict(self):
        return {name: getattr(self, name).tolist() for name in
                ("xy", "p_se", "p_cm", "f_uav", "p_bs", "f_bs")}

    @classmethod
    def from_dict(cls, d):
        return cls(**{name: np.asarray(d[name], dtype=float) for name in
                      ("xy", "p_se", "p_cm", "f_uav", "p_bs", "f_bs")})


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-phase latencies, all (N, K); round maxima (K,); grand total."""

    t_sense: np.ndarray
    t_train: np.ndarray
    t_upload: np.ndarray
    t_agg: np.ndarray
    t_download: np.ndarray
    t_round: np.ndarray
    t_total: float


@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-phase UAV energies, (N, K); per-UAV totals (N,)."""

    e_sense: np.ndarray
    e_train: np.ndarray
    e_upload: np.ndarray
    e_total: np.ndarray


@dataclass(frozen=True)
class Violation:
    """One violated constraint: where, and by how much (normalized)."""

    constraint: str
    index: tuple
    amount: float

    def __str__(self):
        where = "" if not self.index else f"[{','.join(map(str, self.index))}]"
        return f"{self.constraint}{where}: normalized excess {self.amount:.3e}"


# ---------------------------------------------------------------------------
# elementary quantities


def distance_to_bs(x, y, h):
    """Line-of-sight distance from a UAV at (x, y, h) to the BS at origin."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return np.sqrt(x * x + y * y + float(h) ** 2)


def uplink_rate(p_cm, d, bw, gamma0):
    """Uplink bits/s over a free-space LoS link at distance d."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("link distance must be strictly positive")
    snr = gamma0 * np.asarray(p_cm, dtype=float) / (d * d)
    return bw * np.log2(1.0 + snr)


def downlink_rate(p_bs, d, bw_bs, gamma0):
    """Downlink bits/s; the channel is reciprocal so the form matches uplink."""
    return uplink_rate(p_bs, d, bw_bs, gamma0)


def sensing_time(t_u, d_n):
    """Seconds to acquire d_n samples at t_u seconds each."""
    return np.asarray(t_u, dtype=float) * np.asarray(d_n, dtype=float)


def sensing_energy(p_se, t_sense):
    return np.asarray(p_se, dtype=float) * np.asarray(t_sense, dtype=float)


def training_time(s_iters, c_cycles, d_samples, f):
    """Local computation time: s_iters passes over d_samples at f cycles/s."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("CPU frequency must be strictly positive")
    return s_iters * np.asarray(c_cycles, dtype=float) \
        * np.asarray(d_samples, dtype=float) / f


def training_energy(s_iters, zeta, c_cycles, d_samples, f):
    """Compute energy, quadratic in the CPU frequency."""
    f = np.asarray(f, dtype=float)
    return s_iters * np.asarray(zeta, dtype=float) \
        * np.asarray(c_cycles, dtype=float) \
        * np.asarray(d_samples, dtype=float) * f * f


def upload_time(payload_per_slot, rates):
    """Total upload seconds when each slot carries payload_per_slot bits."""
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    payload = float(payload_per_slot)
    if payload == 0.0:
        return 0.0
    if np.any(rates <= 0):
        raise InfeasibleRateError("zero uplink rate with nonzero payload")
    return float(np.sum(payload / rates))


def upload_energy(payload_per_slot, rates, p_cm):
    """Upload energy over the slots; slots with zero power transmit nothing."""
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    p_cm = np.atleast_1d(np.asarray(p_cm, dtype=float))
    payload = float(payload_per_slot)
    active = p_cm > 0
    if payload == 0.0 or not np.any(active):
        return 0.0
    if np.any(rates[active] <= 0):
        raise InfeasibleRateError("zero uplink rate on a powered slot")
    return float(np.sum(p_cm[active] * payload / rates[active]))


def aggregation_time(c_bs, d_bs, f_bs):
    """Model aggregation time at the BS."""
    f_bs = np.asarray(f_bs, dtype=float)
    if np.any(f_bs <= 0):
        raise ValueError("BS frequency must be strictly positive")
    return np.asarray(c_bs, dtype=float) * np.asarray(d_bs, dtype=float) / f_bs


def download_time(s_g, rate_dl):
    """Seconds to broadcast the s_g-bit aggregate at rate_dl."""
    rate_dl = np.asarray(rate_dl, dtype=float)
    if float(s_g) == 0.0:
        return np.zeros_like(rate_dl) if rate_dl.ndim else 0.0
    if np.any(rate_dl <= 0):
        raise InfeasibleRateError("zero downlink rate with nonzero payload")
    return float(s_g) / rate_dl


# ---------------------------------------------------------------------------
# whole-scenario evaluation


def round_anchors(config, xy):
    """Start-of-round positions, shape (N, K, 2).

    Round 0 starts at the configured initial position; each later round
    starts where the previous round's last slot ended.
    """
    anchors = np.empty((config.n_uavs, config.rounds, 2))
    anchors[:, 0, :] = config.initial_xy
    if config.rounds > 1:
        anchors[:, 1:, :] = xy[:, :-1, -1, :]
    return anchors


def slot_distances(config, xy):
    """BS distance for every (n, k, t)."""
    return distance_to_bs(xy[..., 0], xy[..., 1], config.altitude)


def energy_breakdown(config, dv):
    """UAV energies only; tolerates zero transmit powers."""
    dv.check_shapes(config)
    d = slot_distances(config, dv.xy)
    t_se = sensing_time(config.unit_sense_time, config.samples)
    e_sense = sensing_energy(dv.p_se, t_se)
    e_train = training_energy(config.local_iters, config.switch_cap,
                              config.cycles_per_sample_uav, config.samples,
                              dv.f_uav)
    e_upload = np.empty((config.n_uavs, config.rounds))
    for n in range(config.n_uavs):
        rates = uplink_rate(dv.p_cm[n], d[n], config.bw_uav[n], config.gamma0)
        for k in range(config.rounds):
            e_upload[n, k] = upload_energy(config.payload_per_slot,
                                           rates[k], dv.p_cm[n, k])
    e_total = (e_sense + e_train + e_upload).sum(axis=1)
    return EnergyBreakdown(e_sense, e_train, e_upload, e_total)


def evaluate(config, dv):
    """Full latency and energy breakdown at a decision point.

    Deterministic composition of the per-phase formulas; raises on zero
    rates or frequencies that would make a latency infinite.
    """
    dv.check_shapes(config)
    d = slot_distances(config, dv.xy)
    t_sense = np.broadcast_to(
        sensing_time(config.unit_sense_time, config.samples),
        (config.n_uavs, config.rounds)).copy()
    t_train = training_time(config.local_iters, config.cycles_per_sample_uav,
                            config.samples, dv.f_uav)
    t_upload = np.empty((config.n_uavs, config.rounds))
    for n in range(config.n_uavs):
        rates = uplink_rate(dv.p_cm[n], d[n], config.bw_uav[n], config.gamma0)
        for k in range(config.rounds):
            t_upload[n, k] = upload_time(config.payload_per_slot, rates[k])
    t_agg_k = aggregation_time(config.cycles_per_sample_bs,
                               config.agg_samples, dv.f_bs)
    t_agg = np.broadcast_to(t_agg_k, (config.n_uavs, config.rounds)).copy()
    rate_dl = downlink_rate(dv.p_bs[None, :], d[:, :, -1],
                            config.bw_bs, config.gamma0)
    t_download = download_time(config.model_size_down, rate_dl)
    t_download = np.asarray(t_download, dtype=float).reshape(
        config.n_uavs, config.rounds)
    per_uav = t_sense + t_train + t_upload + t_agg + t_download
    t_round = per_uav.max(axis=0)
    lat = LatencyBreakdown(t_sense, t_train, t_upload, t_agg, t_download,
                           t_round, float(t_round.sum()))
    return lat, energy_breakdown(config, dv)


def check_feasibility(config, dv, tol=FEAS_TOL):
    """All constraint violations at dv, normalized by each constraint's bound.

    Empty result means: every box holds, every UAV is within its energy
    budget, and every per-slot displacement is within reach.  Violations
    smaller than ``tol`` (after normalization) are ignored, so boundary
    points count as feasible.
    """
    dv.check_shapes(config)
    out = []

    def box(name, val, hi):
        lo_exc = -val / hi
        hi_exc = (val - hi) / hi
        for idx in zip(*np.nonzero(lo_exc > tol)):
            out.append(Violation(f"{name}_min", idx, float(lo_exc[idx])))
        for idx in zip(*np.nonzero(hi_exc > tol)):
            out.append(Violation(f"{name}_max", idx, float(hi_exc[idx])))

    box("p_se", dv.p_se, config.p_se_max[:, None])
    box("p_cm", dv.p_cm, config.p_cm_max[:, None, None])
    box("f_uav", dv.f_uav, config.f_uav_max[:, None])
    box("p_bs", dv.p_bs, config.p_bs_max)
    box("f_bs", dv.f_bs, config.f_bs_max)

    energy = energy_breakdown(config, dv)
    e_scale = config.e_max if config.e_max > 0 else 1.0
    exc = (energy.e_total - config.e_max) / e_scale
    for idx in zip(*np.nonzero(exc > tol)):
        out.append(Violation("energy_budget", idx, float(exc[idx])))

    step_max = config.v_max * config.slot_len
    anchors = round_anchors(config, dv.xy)
    prev = np.concatenate([anchors[:, :, None, :], dv.xy[:, :, :-1, :]],
                          axis=2)
    step = np.linalg.norm(dv.xy - prev, axis=-1)
    exc = (step - step_max) / step_max
    for idx in zip(*np.nonzero(exc > tol)):
        out.append(Violation("displacement", idx, float(exc[idx])))
    return out
