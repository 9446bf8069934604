"""Brute-force validation on tiny instances.

Exhaustively grids the decision space and returns the feasible minimum, an
upper bound on the true optimum that tightens as the grid is refined.
With the BS variables pinned at their provably optimal caps the UAVs share
no constraints, so each UAV's sub-grid is searched independently and the
round time is the max of the per-UAV minima; the grid-size guard counts
the summed sub-grids.  Axis grids are inclusive linspaces, so doubling
points_per_axis-1 nests the old grid inside the new one.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from uavfl import model

MAX_UAVS = 2
MAX_ROUNDS = 1
MAX_SLOTS = 2


class InstanceTooLargeError(ValueError):
    """Instance or grid exceeds the oracle's hard caps."""


class NoFeasiblePointError(RuntimeError):
    """Every grid point violated at least one constraint."""


@dataclass(frozen=True)
class GridSpec:
    """What to grid and how finely.

    grid_vars picks the searched subset of {xy, p_cm, f_uav, p_se}; None
    selects every variable not pinned by monotone_pin.  Variables outside
    the subset sit at analytic optima (p_se at 0, powers and frequencies
    at their caps when the energy budget provably allows it) or, for the
    trajectory, on the straight-line path.
    """

    points_per_axis: int = 9
    grid_vars: tuple | None = None
    max_points: int = 10_000_000

    def __post_init__(self):
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be >= 2")
        if self.grid_vars is not None:
            extra = set(self.grid_vars) - {"xy", "p_cm", "f_uav", "p_se"}
            if extra:
                raise ValueError(f"cannot grid {sorted(extra)}")


def _check_caps(config):
    if (config.n_uavs > MAX_UAVS or config.rounds > MAX_ROUNDS
            or config.slots_per_round > MAX_SLOTS):
        raise InstanceTooLargeError(
            f"instance {config.n_uavs} UAVs x {config.rounds} rounds x "
            f"{config.slots_per_round} slots exceeds caps "
            f"({MAX_UAVS}, {MAX_ROUNDS}, {MAX_SLOTS})")


def straight_line_path(config):
    """Uniform straight-line positions, (N, K*T, 2)."""
    total = config.rounds * config.slots_per_round
    frac = np.arange(1, total + 1) / total
    span = config.final_xy - config.initial_xy
    return config.initial_xy[:, None, :] + frac[None, :, None] \
        * span[:, None, :]


def monotone_pin(config):
    """Pin variables that provably sit at a box corner.

    The BS pair always pins to its caps (latency strictly improves, no
    budget involved).  If the energy budget holds even at full frequency
    and full uplink power over the farthest reachable positions, the
    budget can never bind, so the UAV sensing power pins to zero and the
    frequency and uplink power pin to their caps.
    """
    pins = {
        "p_bs": np.full(config.rounds, config.p_bs_max),
        "f_bs": np.full(config.rounds, config.f_bs_max),
    }
    path = straight_line_path(config)
    reach = config.v_max * config.slot_len
    worst_radius = np.linalg.norm(path, axis=2) + reach
    d_worst = np.sqrt(worst_radius**2 + config.altitude**2).reshape(
        config.n_uavs, config.rounds, config.slots_per_round)
    e_train = model.training_energy(
        config.local_iters, config.switch_cap, config.cycles_per_sample_uav,
        config.samples, config.f_uav_max[:, None])
    rate_floor = model.uplink_rate(
        config.p_cm_max[:, None, None], d_worst,
        config.bw_uav[:, None, None], config.gamma0)
    e_up_worst = (config.p_cm_max[:, None, None]
                  * config.payload_per_slot / rate_floor).sum(axis=2)
    slack = np.all((e_train + e_up_worst).sum(axis=1) <= config.e_max)
    if slack:
        pins["p_se"] = np.zeros((config.n_uavs, config.rounds))
        pins["f_uav"] = np.broadcast_to(
            config.f_uav_max[:, None],
            (config.n_uavs, config.rounds)).copy()
        pins["p_cm"] = np.broadcast_to(
            config.p_cm_max[:, None, None],
            (config.n_uavs, config.rounds, config.slots_per_round)).copy()
    return pins, sorted(pins)


def _disc_grid(center, radius, ppa):
    """Inclusive square grid over the disc's bounding box, disc-filtered."""
    gx = np.linspace(center[0] - radius, center[0] + radius, ppa)
    gy = np.linspace(center[1] - radius, center[1] + radius, ppa)
    pts = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    keep = np.linalg.norm(pts - center, axis=1) <= radius * (1 + 1e-12)
    return pts[keep]


def _uav_grid_min(config, spec, pins, n):
    """Best (latency, choices) for one UAV over its sub-grid.

    Returns (best_latency, tensor of chosen values, points_counted).
    Latency excludes nothing: it is the UAV's full five-phase round time
    with the BS pinned, so the fleet round time is the max over UAVs.
    """
    ppa = spec.points_per_axis
    big_t = config.slots_per_round
    reach = config.v_max * config.slot_len
    path = straight_line_path(config)[n]
    grid_vars = spec.grid_vars
    if grid_vars is None:
        grid_vars = tuple(v for v in ("xy", "p_cm", "f_uav", "p_se")
                          if v not in pins)
        grid_vars = tuple(v for v in grid_vars if v != "p_se")

    if "xy" in grid_vars:
        slots = [_disc_grid(path[t], reach, ppa) for t in range(big_t)]
    else:
        slots = [path[t][None, :] for t in range(big_t)]
    if "p_cm" in grid_vars:
        p_axis = np.linspace(0.0, config.p_cm_max[n], ppa)
    else:
        p_axis = np.array([pins["p_cm"][n, 0, 0] if "p_cm" in pins
                           else 0.5 * config.p_cm_max[n]])
    if "f_uav" in grid_vars:
        f_axis = np.linspace(0.0, config.f_uav_max[n], ppa)
    else:
        f_axis = np.array([pins["f_uav"][n, 0] if "f_uav" in pins
                           else 0.5 * config.f_uav_max[n]])
    if "p_se" in grid_vars:
        pse_axis = np.linspace(0.0, config.p_se_max[n], ppa)
    else:
        pse_axis = np.array([0.0])

    n_points = int(np.prod([len(s) for s in slots])
                   * len(p_axis) ** big_t * len(f_axis) * len(pse_axis))

    # fixed pieces
    t_se = model.sensing_time(config.unit_sense_time, config.samples[n, 0])
    t_agg = model.aggregation_time(config.cycles_per_sample_bs[0],
                                   config.agg_samples[0],
                                   config.f_bs_max)
    work = config.local_iters * config.cycles_per_sample_uav[n, 0] \
        * config.samples[n, 0]
    zeta_work = config.local_iters * config.switch_cap[n, 0] \
        * config.cycles_per_sample_uav[n, 0] * config.samples[n, 0]
    payload = config.payload_per_slot
    with np.errstate(divide="ignore"):
        t_train = np.where(f_axis > 0, work / np.where(f_axis > 0, f_axis, 1),
                           np.inf)
    e_train = zeta_work * f_axis**2

    def rates(dist, p):
        r = model.uplink_rate(p[None, :], dist[:, None],
                              config.bw_uav[n], config.gamma0)
        return r  # (n_slot_pts, n_p)

    d_slots = [model.distance_to_bs(s[:, 0], s[:, 1], config.altitude)
               for s in slots]
    anchor = config.initial_xy[n]

    best = (np.inf, None)
    if big_t == 1:
        q_ok = np.linalg.norm(slots[0] - anchor, axis=1) \
            <= reach * (1 + model.FEAS_TOL)
        with np.errstate(divide="ignore", invalid="ignore"):
            up = payload / rates(d_slots[0], p_axis)        # (m1, np)
            e_up = p_axis[None, :] * up
        rate_dl = model.downlink_rate(config.p_bs_max, d_slots[0],
                                      config.bw_bs, config.gamma0)
        t_dl = config.model_size_down / rate_dl             # (m1,)
        lat = (t_se + t_agg + up[:, :, None, None]
               + t_train[None, None, :, None]
               + t_dl[:, None, None, None]
               + np.zeros(len(pse_axis)))
        energy = (e_up[:, :, None, None] + e_train[None, None, :, None]
                  + (pse_axis * t_se)[None, None, None, :])
        ok = (q_ok[:, None, None, None]
              & (energy <= config.e_max * (1 + model.FEAS_TOL))
              & np.isfinite(lat))
        lat = np.where(ok, lat, np.inf)
        flat = int(np.argmin(lat))
        if np.isfinite(lat.flat[flat]):
            i1, ip, jf, js = np.unravel_index(flat, lat.shape)
            best = (float(lat.flat[flat]),
                    dict(xy=slots[0][i1][None, :],
                         p_cm=np.array([p_axis[ip]]),
                         f_uav=float(f_axis[jf]),
                         p_se=float(pse_axis[js])))
    else:
        q_ok0 = np.linalg.norm(slots[0] - anchor, axis=1) \
            <= reach * (1 + model.FEAS_TOL)
        step12 = np.linalg.norm(slots[1][None, :, :] - slots[0][:, None, :],
                                axis=2)
        chain = q_ok0[:, None] & (step12 <= reach * (1 + model.FEAS_TOL))
        with np.errstate(divide="ignore", invalid="ignore"):
            up1 = payload / rates(d_slots[0], p_axis)       # (m1, np)
            up2 = payload / rates(d_slots[1], p_axis)       # (m2, np)
            e1 = p_axis[None, :] * up1
            e2 = p_axis[None, :] * up2
        rate_dl = model.downlink_rate(config.p_bs_max, d_slots[1],
                                      config.bw_bs, config.gamma0)
        t_dl = config.model_size_down / rate_dl             # (m2,)
        # chunk over the slot-1 candidates to bound peak memory
        m1 = len(slots[0])
        shape_rest = (len(slots[1]), len(p_axis), len(p_axis), len(f_axis),
                      len(pse_axis))
        chunk = max(1, int(2_000_000 // max(1, int(np.prod(shape_rest)))))
        for lo in range(0, m1, chunk):
            hi = min(m1, lo + chunk)
            lat = (t_se + t_agg
                   + up1[lo:hi, None, :, None, None, None]
                   + up2[None, :, None, :, None, None]
                   + t_train[None, None, None, None, :, None]
                   + t_dl[None, :, None, None, None, None]
                   + np.zeros(len(pse_axis)))
            energy = (e1[lo:hi, None, :, None, None, None]
                      + e2[None, :, None, :, None, None]
                      + e_train[None, None, None, None, :, None]
                      + (pse_axis * t_se))
            ok = (chain[lo:hi, :, None, None, None, None]
                  & (energy <= config.e_max * (1 + model.FEAS_TOL))
                  & np.isfinite(lat))
            lat = np.where(ok, lat, np.inf)
            flat = int(np.argmin(lat))
            if lat.flat[flat] < best[0]:
                i1, i2, ip1, ip2, jf, js = np.unravel_index(flat, lat.shape)
                best = (float(lat.flat[flat]),
                        dict(xy=np.stack([slots[0][lo + i1], slots[1][i2]]),
                             p_cm=np.array([p_axis[ip1], p_axis[ip2]]),
                             f_uav=float(f_axis[jf]),
                             p_se=float(pse_axis[js])))
    return best[0], best[1], n_points


def grid_search(config, spec=GridSpec()):
    """Feasible minimum over the grid: (objective seconds, decision point).

    Exact within grid resolution; every candidate's constraints are
    checked, and the assembled winner is re-verified through the full
    model evaluation before being returned.
    """
    _check_caps(config)
    pins, _ = monotone_pin(config)
    total_points = 0
    per_uav = []
    for n in range(config.n_uavs):
        lat, choice, pts = _uav_grid_min(config, spec, pins, n)
        total_points += pts
        if total_points > spec.max_points:
            raise InstanceTooLargeError(
                f"grid would need {total_points} points "
                f"(cap {spec.max_points})")
        if choice is None:
            raise NoFeasiblePointError(
                f"no feasible grid point for UAV {n}")
        per_uav.append((lat, choice))

    n_u, big_t = config.n_uavs, config.slots_per_round
    dv = model.DecisionVector(
        xy=np.stack([per_uav[n][1]["xy"] for n in range(n_u)])[:, None],
        p_se=np.array([[per_uav[n][1]["p_se"]] for n in range(n_u)]),
        p_cm=np.stack([per_uav[n][1]["p_cm"]
                       for n in range(n_u)])[:, None, :],
        f_uav=np.array([[per_uav[n][1]["f_uav"]] for n in range(n_u)]),
        p_bs=pins["p_bs"],
        f_bs=pins["f_bs"],
    )
    lat, _ = model.evaluate(config, dv)
    bad = model.check_feasibility(config, dv)
    if bad:
        raise NoFeasiblePointError(
            "assembled grid winner failed verification: "
            + "; ".join(map(str, bad)))
    return float(lat.t_total), dv


# ---------------------------------------------------------------------------
# result certificates


def config_digest(config):
    """Stable hash of every configuration field."""
    h = hashlib.sha256()
    for name in sorted(vars(config)):
        val = getattr(config, name)
        h.update(name.encode())
        if isinstance(val, np.ndarray):
            h.update(val.tobytes())
        else:
            h.update(repr(val).encode())
    return h.hexdigest()


def write_golden(path, config, spec, objective, dv):
    pins, pinned = monotone_pin(config)
    gridded = spec.grid_vars
    if gridded is None:
        gridded = tuple(v for v in ("xy", "p_cm", "f_uav")
                        if v not in pins)
        gridded = ("xy",) if not gridded else gridded
    lines = [
        "# grid search certificate",
        f"config_sha256 = {config_digest(config)}",
        f"points_per_axis = {spec.points_per_axis}",
        f"gridded = {','.join(gridded)}",
        f"pinned = {','.join(pinned)}",
        f"best_objective_s = {objective!r}",
        f"best_point = {json.dumps(dv.to_dict())}",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_golden(path):
    fields = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition(" = ")
            fields[key] = value
    return {
        "config_sha256": fields["config_sha256"],
        "points_per_axis": int(fields["points_per_axis"]),
        "gridded": tuple(fields["gridded"].split(",")),
        "pinned": tuple(fields["pinned"].split(",")),
        "best_objective_s": float(fields["best_objective_s"]),
        "best_point": model.DecisionVector.from_dict(
            json.loads(fields["best_point"])),
    }
