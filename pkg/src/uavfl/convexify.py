"""Slack reformulations and convex surrogates for the two alternating
sub-problems.

The upload-time term couples transmit power, trajectory, and a logarithm,
so it is split through a chain of slack variables

    payload <= g * z,   bw * log2(1 + gamma) >= z,
    p_cm / alpha >= gamma,   (x^2 + y^2 + H^2) / gamma0 <= alpha,

where gamma0 folds the reference SNR into the distance slack so that gamma
is the actual link SNR and the chain certifies the actual link rate.  The
three nonconvex links are replaced at a reference point by
surrogates that are exact there and conservative everywhere else:
a first-order expansion of (g + z)^2, a lower bound on ln(1 + gamma)
that is linear in 1/gamma, and a weighted-square upper bound on products.
The same log bound handles the broadcast-time slack on the BS side, and
the product bound also convexifies the upload-energy term.

Every function here is pure; the assembled sub-problems are immutable
descriptions that any conic solver can consume.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from uavfl import model

# Fraction of a box range used to lift a zero entry off the boundary before
# linearizing (denominators must stay positive).
NUDGE_FRACTION = 1e-9


# ---------------------------------------------------------------------------
# surrogate bounds (scalar or elementwise on arrays)


def taylor_gz_bound(g, z, g_i, z_i, payload):
    """Residual of the linearized product constraint g*z >= payload.

    Nonnegative residual implies the true constraint holds: the expansion
    under-estimates (g+z)^2, so the surrogate under-estimates g*z - payload.
    Exact at (g_i, z_i).
    """
    g, z = np.asarray(g, dtype=float), np.asarray(z, dtype=float)
    g_i, z_i = np.asarray(g_i, dtype=float), np.asarray(z_i, dtype=float)
    s_i = g_i + z_i
    lin = 0.25 * (s_i * s_i + 2.0 * s_i * (g + z - s_i))
    return lin - payload - 0.25 * (g - z) ** 2


def log_lower_bound(gamma, gamma_i):
    """Lower bound on ln(1 + gamma), linear in 1/gamma, exact at gamma_i."""
    gamma = np.asarray(gamma, dtype=float)
    gamma_i = np.asarray(gamma_i, dtype=float)
    if np.any(gamma <= 0) or np.any(gamma_i <= 0):
        raise ValueError("log_lower_bound needs strictly positive arguments")
    return (np.log1p(gamma_i) + gamma_i / (gamma_i + 1.0)
            - (gamma_i * gamma_i / (gamma_i + 1.0)) / gamma)


def bilinear_upper_bound(a, b, a_i, b_i):
    """Upper bound on the product a*b: (b_i/a_i) a^2 / 2 + (a_i/b_i) b^2 / 2.

    Exact when a/a_i == b/b_i; otherwise strictly above a*b.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    a_i, b_i = np.asarray(a_i, dtype=float), np.asarray(b_i, dtype=float)
    if np.any(a_i <= 0) or np.any(b_i <= 0):
        raise ValueError("bilinear_upper_bound needs a positive expansion point")
    return 0.5 * (b_i / a_i) * a * a + 0.5 * (a_i / b_i) * b * b


def distance_slack_residual(x, y, h, alpha):
    """Slack left in alpha >= squared BS distance; nonnegative = feasible."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    return np.asarray(alpha, dtype=float) - (x * x + y * y + h * h)


def energy_surrogate(config, dv, slack, lp, n):
    """Convex over-estimate of UAV n's total energy.

    Sensing and compute terms are kept exact; each slot's upload energy
    g * p_cm is replaced by its product upper bound around the reference
    point.  When g bounds the slot upload time from above, a surrogate
    within budget certifies the true energy constraint.
    """
    t_se = model.sensing_time(config.unit_sense_time, config.samples[n])
    e_sense = float(np.sum(dv.p_se[n] * t_se))
    e_train = float(np.sum(model.training_energy(
        config.local_iters, config.switch_cap[n],
        config.cycles_per_sample_uav[n], config.samples[n], dv.f_uav[n])))
    e_upload = float(np.sum(bilinear_upper_bound(
        slack.g[n], dv.p_cm[n], lp.slack.g[n], lp.dv.p_cm[n])))
    return e_sense + e_train + e_upload


def downlink_log_bound(theta, p_bs, d, p_bs_i, config):
    """Residual of the linearized broadcast-time constraint.

    Nonnegative residual implies the broadcast of the aggregate at power
    p_bs over distance d finishes within theta seconds.  Exact when
    p_bs == p_bs_i and theta is the matching broadcast time.
    """
    theta = np.asarray(theta, dtype=float)
    p_bs = np.asarray(p_bs, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(p_bs <= 0) or np.any(np.asarray(p_bs_i) <= 0) or np.any(d <= 0):
        raise ValueError("downlink_log_bound needs positive power and distance")
    xi = config.gamma0 * p_bs / (d * d)
    xi_i = config.gamma0 * np.asarray(p_bs_i, dtype=float) / (d * d)
    lhs = (np.log1p(xi_i) + xi_i / (xi_i + 1.0)
           - (xi_i * xi_i / (xi_i + 1.0)) / xi)
    return lhs - config.model_size_down * np.log(2.0) / (config.bw_bs * theta)


# ---------------------------------------------------------------------------
# slack state and linearization points


@dataclass(frozen=True)
class SlackState:
    """Auxiliary variables of the convexified upload and download chains.

    g: per-slot upload-time slack (N, K, T); z: rate slack (N, K, T);
    gamma: SNR slack (N, K, T); alpha: SNR-normalized squared-distance
    slack, i.e. an upper bound on d^2 / gamma0, (N, K, T); theta:
    per-round broadcast-time slack (K,).
    """

    g: np.ndarray
    z: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        for name in ("g", "z", "gamma", "alpha", "theta"):
            object.__setattr__(self, name, model._freeze(getattr(self, name)))


def tight_slacks(config, dv):
    """Slack values that satisfy the whole chain with equality at dv."""
    d = model.slot_distances(config, dv.xy)
    alpha = d * d / config.gamma0
    gamma = dv.p_cm / alpha
    if np.any(gamma <= 0):
        raise ValueError("tight slacks need strictly positive uplink power")
    z = config.bw_uav[:, None, None] * np.log2(1.0 + gamma)
    g = config.payload_per_slot / z
    d_final = d[:, :, -1]
    rate_dl = model.downlink_rate(dv.p_bs[None, :], d_final, config.bw_bs,
                                  config.gamma0)
    theta = (config.model_size_down / rate_dl).max(axis=0)
    return SlackState(g=g, z=z, gamma=gamma, alpha=alpha, theta=theta)


@dataclass(frozen=True)
class LinearizationPoint:
    """Reference iterate: a decision vector plus matching slack values.

    All quantities that end up in surrogate denominators are strictly
    positive; `make_linearization` lifts zeros off their box boundary
    before computing the slacks.
    """

    dv: model.DecisionVector
    slack: SlackState

    def distances(self, config):
        return model.slot_distances(config, self.dv.xy)


def make_linearization(config, dv):
    """Build a strictly usable reference point from the current iterate."""
    floor = NUDGE_FRACTION
    p_se = np.maximum(dv.p_se, floor * config.p_se_max[:, None])
    p_cm = np.maximum(dv.p_cm, floor * config.p_cm_max[:, None, None])
    f_uav = np.maximum(dv.f_uav, floor * config.f_uav_max[:, None])
    p_bs = np.maximum(dv.p_bs, floor * config.p_bs_max)
    f_bs = np.maximum(dv.f_bs, floor * config.f_bs_max)
    nudged = dv.replace(p_se=p_se, p_cm=p_cm, f_uav=f_uav, p_bs=p_bs,
                        f_bs=f_bs)
    return LinearizationPoint(dv=nudged, slack=tight_slacks(config, nudged))


def _require_strictly_feasible(config, lp):
    bad = model.check_feasibility(config, lp.dv)
    if bad:
        raise ValueError(
            "linearization point is not feasible: " + "; ".join(map(str, bad)))
    for name in ("g", "z", "gamma", "alpha"):
        if np.any(getattr(lp.slack, name) <= 0):
            raise ValueError(f"linearization slack {name} must be positive")
    if np.any(lp.slack.theta <= 0) or np.any(lp.dv.p_bs <= 0):
        raise ValueError("linearization needs positive broadcast quantities")
    if np.any(lp.dv.p_cm <= 0) or np.any(lp.dv.f_uav <= 0) \
            or np.any(lp.dv.f_bs <= 0):
        raise ValueError("linearization needs positive powers and frequencies")


# ---------------------------------------------------------------------------
# solver-agnostic sub-problem description
#
# All constraint rows are written as residual(xhat) >= 0 over scaled
# variables (physical value = scale * xhat).  Three row families cover
# everything this problem needs:
#   box                affine two-sided bounds on single variables
#   convex-quadratic   affine(x) - sum of weighted squared affine forms
#   log-concave-bound  affine(x) - sum of positive multiples of 1/x_j
# The last family carries every row descended from the log lower bound,
# including epigraph rows with inverse-frequency terms (same concave-
# left-hand-side shape).


@dataclass(frozen=True)
class BoxBlock:
    kind = "box"
    labels: tuple
    idx: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    @property
    def n_rows(self):
        return len(self.idx)

    def residuals(self, x):
        v = x[self.idx]
        lo = v - self.lb
        hi = np.where(np.isfinite(self.ub), self.ub - v, np.inf)
        return np.minimum(lo, hi)


@dataclass(frozen=True)
class QuadBlock:
    kind = "convex-quadratic"
    labels: tuple
    a0: sp.csr_matrix        # (m, n)
    b0: np.ndarray           # (m,)
    forms: sp.csr_matrix     # (p, n) squared affine forms
    offsets: np.ndarray      # (p,)
    weights: sp.csr_matrix   # (m, p), nonnegative

    @property
    def n_rows(self):
        return len(self.b0)

    def residuals(self, x):
        sq = (self.forms @ x + self.offsets) ** 2
        return self.a0 @ x + self.b0 - self.weights @ sq

    def jacobian(self, x):
        lin = self.forms @ x + self.offsets
        return self.a0 - self.weights @ sp.diags(2.0 * lin) @ self.forms


@dataclass(frozen=True)
class InvBlock:
    kind = "log-concave-bound"
    labels: tuple
    a0: sp.csr_matrix        # (m, n)
    b0: np.ndarray           # (m,)
    inv_w: sp.csr_matrix     # (m, n), nonnegative coefficients on 1/x_j

    @property
    def n_rows(self):
        return len(self.b0)

    def _inv_vec(self, x):
        cols = np.unique(self.inv_w.indices)
        inv = np.zeros_like(x)
        inv[cols] = 1.0 / x[cols]
        return inv

    def residuals(self, x):
        return self.a0 @ x + self.b0 - self.inv_w @ self._inv_vec(x)

    def jacobian(self, x):
        inv = self._inv_vec(x)
        return self.a0 + self.inv_w @ sp.diags(inv * inv)


@dataclass(frozen=True)
class ConvexSubproblem:
    """One convex sub-problem frozen at a reference point.

    Variables live in a flat scaled vector; `offsets` maps named fields to
    index ranges and `scales` recovers physical values.  The objective is
    affine: minimize objective_c @ xhat (epigraph variables carry the
    latency).  `start` is a strictly feasible interior-ish point (the
    reference iterate itself).
    """

    name: str
    offsets: dict
    shapes: dict
    scales: np.ndarray
    objective_c: np.ndarray
    blocks: tuple
    start: np.ndarray
    frozen_terms: dict = field(default_factory=dict)

    @property
    def n_vars(self):
        return len(self.scales)

    @property
    def n_rows(self):
        return sum(b.n_rows for b in self.blocks)

    def rows(self):
        """(kind, label) for every scalar constraint row."""
        for b in self.blocks:
            for lbl in b.labels:
                yield b.kind, lbl

    def index(self, name):
        off = self.offsets[name]
        size = int(np.prod(self.shapes[name]))
        return np.arange(off, off + size)

    def unpack(self, xhat, physical=True):
        x = xhat * self.scales if physical else xhat
        return {name: x[self.index(name)].reshape(self.shapes[name])
                for name in self.offsets}

    def residuals(self, xhat):
        return np.concatenate([b.residuals(xhat) for b in self.blocks]) \
            if self.blocks else np.empty(0)

    def max_violation(self, xhat):
        r = self.residuals(xhat)
        return float(max(0.0, -(r.min()))) if r.size else 0.0

    def audit(self):
        """Structural convexity check; empty list means certified convex."""
        issues = []
        for b in self.blocks:
            if isinstance(b, QuadBlock) and np.any(b.weights.data < 0):
                issues.append(f"{b.labels[0]}: negative square weight")
            if isinstance(b, InvBlock) and np.any(b.inv_w.data < 0):
                issues.append(f"{b.labels[0]}: negative inverse weight")
            if isinstance(b, BoxBlock) and np.any(b.lb > b.ub):
                issues.append(f"{b.labels[0]}: empty box")
        return issues


class _Assembler:
    """Accumulates scalar rows and emits the batched block structure."""

    def __init__(self, specs, scales_by_name):
        self.offsets, self.shapes = {}, {}
        n = 0
        for name, shape in specs:
            self.offsets[name] = n
            self.shapes[name] = shape
            n += int(np.prod(shape))
        self.n = n
        self.scales = np.ones(n)
        for name, s in scales_by_name.items():
            off, size = self.offsets[name], int(np.prod(self.shapes[name]))
            self.scales[off:off + size] = np.broadcast_to(
                np.asarray(s, dtype=float).ravel(), (size,))
        self._quad = {"rows": [], "labels": [], "b0": [], "forms": [],
                      "offsets": [], "links": []}
        self._inv = {"rows": [], "labels": [], "b0": [], "invs": []}
        self._box = {"idx": [], "lb": [], "ub": [], "labels": []}

    def idx(self, name, *index):
        flat = np.ravel_multi_index(index, self.shapes[name]) \
            if index else 0
        return self.offsets[name] + int(flat)

    # affine maps are dicts {flat var index: physical coefficient}
    def _scaled(self, affine):
        return {j: c * self.scales[j] for j, c in affine.items()}

    def add_quad_row(self, label, affine, const, squares, norm=1.0):
        """affine(x) + const - sum w * (form(x) + off)^2 >= 0.

        Each squared form is rebalanced to unit magnitude (the factor moves
        into the weight) so the emitted cone data stays well conditioned.
        """
        self._quad["rows"].append(self._scaled(affine))
        self._quad["labels"].append(label)
        self._quad["b0"].append(const / norm)
        links = []
        for w, form, off in squares:
            sf = self._scaled(form)
            mu = max([abs(c) for c in sf.values()] + [abs(off), 1e-300])
            sf = {j: c / mu for j, c in sf.items()}
            links.append((len(self._quad["forms"]), w * mu * mu / norm))
            self._quad["forms"].append(sf)
            self._quad["offsets"].append(off / mu)
        self._quad["links"].append(links)
        for j in self._quad["rows"][-1]:
            self._quad["rows"][-1][j] /= norm

    def add_inv_row(self, label, affine, const, inverses, norm=1.0):
        """affine(x) + const - sum c / x_j >= 0 (c > 0, x_j > 0)."""
        row = self._scaled(affine)
        self._inv["rows"].append({j: c / norm for j, c in row.items()})
        self._inv["labels"].append(label)
        self._inv["b0"].append(const / norm)
        self._inv["invs"].append(
            {j: (c / self.scales[j]) / norm for j, c in inverses.items()})

    def add_box(self, label, j, lb, ub):
        self._box["idx"].append(j)
        self._box["lb"].append(lb / self.scales[j])
        self._box["ub"].append(ub / self.scales[j] if np.isfinite(ub)
                               else np.inf)
        self._box["labels"].append(label)

    @staticmethod
    def _to_csr(rows, n):
        data, ri, ci = [], [], []
        for r, row in enumerate(rows):
            for j, c in row.items():
                ri.append(r)
                ci.append(j)
                data.append(c)
        return sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))

    def build_blocks(self):
        blocks = []
        q = self._quad
        if q["rows"]:
            m, p = len(q["rows"]), len(q["forms"])
            wdata, wri, wci = [], [], []
            for r, links in enumerate(q["links"]):
                for j, w in links:
                    wri.append(r)
                    wci.append(j)
                    wdata.append(w)
            blocks.append(QuadBlock(
                labels=tuple(q["labels"]),
                a0=self._to_csr(q["rows"], self.n),
                b0=np.array(q["b0"]),
                forms=self._to_csr(q["forms"], self.n),
                offsets=np.array(q["offsets"]),
                weights=sp.csr_matrix((wdata, (wri, wci)), shape=(m, p))))
        if self._inv["rows"]:
            blocks.append(InvBlock(
                labels=tuple(self._inv["labels"]),
                a0=self._to_csr(self._inv["rows"], self.n),
                b0=np.array(self._inv["b0"]),
                inv_w=self._to_csr(self._inv["invs"], self.n)))
        if self._box["idx"]:
            blocks.append(BoxBlock(
                labels=tuple(self._box["labels"]),
                idx=np.array(self._box["idx"], dtype=int),
                lb=np.array(self._box["lb"]),
                ub=np.array(self._box["ub"])))
        return tuple(blocks)


# ---------------------------------------------------------------------------
# sub-problem builders


def _uav_constant_terms(config, lp):
    """Latency breakdown at the reference point.

    Each builder freezes the other block's phases from this: the UAV-block
    problem takes aggregation and broadcast times as constants, the
    BS-block problem takes sensing, compute, and upload times.
    """
    lat, _ = model.evaluate(config, lp.dv)
    return lat


def build_subproblem1(config, lp):
    """UAV-block sub-problem: trajectory, powers, frequency, slack chain.

    BS-side latency terms (aggregation, broadcast) enter the epigraph rows
    as constants taken from the reference point.
    """
    _require_strictly_feasible(config, lp)
    n_u, big_k, big_t = config.n_uavs, config.rounds, config.slots_per_round
    lat = _uav_constant_terms(config, lp)
    t_round_lp = lat.t_round
    coord_scale = max(config.altitude, float(np.abs(lp.dv.xy).max()))

    specs = [("x", (n_u, big_k, big_t)), ("y", (n_u, big_k, big_t)),
             ("p_se", (n_u, big_k)), ("p_cm", (n_u, big_k, big_t)),
             ("f_uav", (n_u, big_k)), ("g", (n_u, big_k, big_t)),
             ("z", (n_u, big_k, big_t)), ("gamma", (n_u, big_k, big_t)),
             ("alpha", (n_u, big_k, big_t)), ("tau", (big_k,))]
    scales = {
        "x": coord_scale, "y": coord_scale,
        "p_se": np.repeat(config.p_se_max, big_k),
        "p_cm": np.repeat(config.p_cm_max, big_k * big_t),
        "f_uav": np.repeat(config.f_uav_max, big_k),
        "g": lp.slack.g, "z": lp.slack.z, "gamma": lp.slack.gamma,
        "alpha": lp.slack.alpha, "tau": t_round_lp,
    }
    asm = _Assembler(specs, scales)

    payload = config.payload_per_slot
    s_iters = config.local_iters
    ln2 = np.log(2.0)
    h_sq = config.altitude ** 2
    step_sq = (config.v_max * config.slot_len) ** 2
    gi, zi = lp.slack.g, lp.slack.z
    gmi, ali = lp.slack.gamma, lp.slack.alpha
    pi = lp.dv.p_cm

    for n in range(n_u):
        for k in range(big_k):
            # epigraph: tau_k covers this UAV's five-phase round time
            const = -(lat.t_sense[n, k] + lat.t_agg[n, k]
                      + lat.t_download[n, k])
            affine = {asm.idx("tau", k): 1.0}
            for t in range(big_t):
                affine[asm.idx("g", n, k, t)] = -1.0
            work = s_iters * config.cycles_per_sample_uav[n, k] \
                * config.samples[n, k]
            inverses = {asm.idx("f_uav", n, k): work} if work > 0 else {}
            asm.add_inv_row(f"epigraph[{n},{k}]", affine, const, inverses,
                            norm=t_round_lp[k])

            for t in range(big_t):
                jg, jz = asm.idx("g", n, k, t), asm.idx("z", n, k, t)
                jgm = asm.idx("gamma", n, k, t)
                jal = asm.idx("alpha", n, k, t)
                jp = asm.idx("p_cm", n, k, t)
                jx, jy = asm.idx("x", n, k, t), asm.idx("y", n, k, t)
                g0, z0 = gi[n, k, t], zi[n, k, t]

                # linearized payload <= g*z, written for the ratios
                # (g/g_i, z/z_i) so seconds and bits/s never mix in one
                # square: G + Z - 1 - payload/(g_i z_i) - (G - Z)^2/4 >= 0
                asm.add_quad_row(
                    f"upload_slack_taylor[{n},{k},{t}]",
                    {jg: 1.0 / g0, jz: 1.0 / z0},
                    -1.0 - payload / (g0 * z0),
                    [(0.25, {jg: 1.0 / g0, jz: -1.0 / z0}, 0.0)])

                # lower-bounded log keeps the rate slack honest
                gm = gmi[n, k, t]
                a_const = np.log1p(gm) + gm / (gm + 1.0)
                asm.add_inv_row(
                    f"rate_log_bound[{n},{k},{t}]",
                    {jz: -ln2 / config.bw_uav[n]}, a_const,
                    {jgm: gm * gm / (gm + 1.0)},
                    norm=max(1.0, a_const))

                # product bound ties SNR slack to power and distance slack
                asm.add_quad_row(
                    f"snr_bilinear[{n},{k},{t}]",
                    {jp: 1.0}, 0.0,
                    [(0.5 * gm / ali[n, k, t], {jal: 1.0}, 0.0),
                     (0.5 * ali[n, k, t] / gm, {jgm: 1.0}, 0.0)],
                    norm=config.p_cm_max[n])

                # alpha dominates the SNR-normalized squared BS distance
                asm.add_quad_row(
                    f"distance_slack[{n},{k},{t}]",
                    {jal: 1.0}, -h_sq / config.gamma0,
                    [(1.0 / config.gamma0, {jx: 1.0}, 0.0),
                     (1.0 / config.gamma0, {jy: 1.0}, 0.0)],
                    norm=ali[n, k, t])

                # per-slot reach
                if t == 0 and k == 0:
                    px, py = config.initial_xy[n]
                    sq = [(1.0, {jx: 1.0}, -px), (1.0, {jy: 1.0}, -py)]
                else:
                    if t == 0:
                        jpx = asm.idx("x", n, k - 1, big_t - 1)
                        jpy = asm.idx("y", n, k - 1, big_t - 1)
                    else:
                        jpx = asm.idx("x", n, k, t - 1)
                        jpy = asm.idx("y", n, k, t - 1)
                    sq = [(1.0, {jx: 1.0, jpx: -1.0}, 0.0),
                          (1.0, {jy: 1.0, jpy: -1.0}, 0.0)]
                asm.add_quad_row(f"displacement[{n},{k},{t}]", {}, step_sq,
                                 sq, norm=step_sq)

        # energy budget with the upload product replaced by its upper bound
        affine, squares = {}, []
        for k in range(big_k):
            t_se = config.unit_sense_time * config.samples[n, k]
            if t_se > 0:
                affine[asm.idx("p_se", n, k)] = -t_se
            coef = s_iters * config.switch_cap[n, k] \
                * config.cycles_per_sample_uav[n, k] * config.samples[n, k]
            if coef > 0:
                squares.append((coef, {asm.idx("f_uav", n, k): 1.0}, 0.0))
            for t in range(big_t):
                squares.append((0.5 * pi[n, k, t] / gi[n, k, t],
                                {asm.idx("g", n, k, t): 1.0}, 0.0))
                squares.append((0.5 * gi[n, k, t] / pi[n, k, t],
                                {asm.idx("p_cm", n, k, t): 1.0}, 0.0))
        e_norm = config.e_max if config.e_max > 0 else 1.0
        asm.add_quad_row(f"energy_budget[{n}]", affine, config.e_max,
                         squares, norm=e_norm)

    for n in range(n_u):
        for k in range(big_k):
            asm.add_box(f"box_p_se[{n},{k}]", asm.idx("p_se", n, k),
                        0.0, config.p_se_max[n])
            asm.add_box(f"box_f_uav[{n},{k}]", asm.idx("f_uav", n, k),
                        0.0, config.f_uav_max[n])
            for t in range(big_t):
                asm.add_box(f"box_p_cm[{n},{k},{t}]",
                            asm.idx("p_cm", n, k, t), 0.0, config.p_cm_max[n])
                asm.add_box(f"box_gamma[{n},{k},{t}]",
                            asm.idx("gamma", n, k, t), 0.0, np.inf)

    c = np.zeros(asm.n)
    c[asm.offsets["tau"]:asm.offsets["tau"] + big_k] = t_round_lp

    # start point: the reference iterate itself, scaled
    phys = {"x": lp.dv.xy[..., 0], "y": lp.dv.xy[..., 1],
            "p_se": lp.dv.p_se, "p_cm": lp.dv.p_cm, "f_uav": lp.dv.f_uav,
            "g": lp.slack.g, "z": lp.slack.z, "gamma": lp.slack.gamma,
            "alpha": lp.slack.alpha, "tau": t_round_lp}
    start = np.empty(asm.n)
    for name, arr in phys.items():
        off = asm.offsets[name]
        size = int(np.prod(asm.shapes[name]))
        start[off:off + size] = np.asarray(arr, dtype=float).ravel() \
            / asm.scales[off:off + size]

    return ConvexSubproblem(
        name="uav-block", offsets=dict(asm.offsets), shapes=dict(asm.shapes),
        scales=asm.scales, objective_c=c, blocks=asm.build_blocks(),
        start=start,
        frozen_terms={"t_agg": lat.t_agg, "t_download": lat.t_download})


def build_subproblem2(config, lp):
    """BS-block sub-problem: broadcast power, aggregation frequency.

    UAV-side latency terms are constants from the reference point; the
    broadcast distance is the reference trajectory's end-of-round position.
    """
    _require_strictly_feasible(config, lp)
    n_u, big_k = config.n_uavs, config.rounds
    lat = _uav_constant_terms(config, lp)
    d_final = lp.distances(config)[:, :, -1]
    theta_i = lp.slack.theta
    t_round_lp = lat.t_round

    specs = [("p_bs", (big_k,)), ("f_bs", (big_k,)), ("theta", (big_k,)),
             ("omega", (big_k,))]
    scales = {"p_bs": config.p_bs_max, "f_bs": config.f_bs_max,
              "theta": theta_i, "omega": t_round_lp}
    asm = _Assembler(specs, scales)
    ln2 = np.log(2.0)

    for k in range(big_k):
        agg_work = config.agg_scale * config.cycles_per_sample_bs[k] \
            * config.agg_samples[k]
        for n in range(n_u):
            frozen = lat.t_sense[n, k] + lat.t_train[n, k] \
                + lat.t_upload[n, k]
            affine = {asm.idx("omega", k): 1.0, asm.idx("theta", k): -1.0}
            inverses = {asm.idx("f_bs", k): agg_work} if agg_work > 0 else {}
            asm.add_inv_row(f"epigraph[{n},{k}]", affine, -frozen, inverses,
                            norm=t_round_lp[k])
            # linearized broadcast-rate requirement
            d_sq = d_final[n, k] ** 2
            xi_i = config.gamma0 * lp.dv.p_bs[k] / d_sq
            a_const = np.log1p(xi_i) + xi_i / (xi_i + 1.0)
            asm.add_inv_row(
                f"broadcast_log_bound[{n},{k}]", {}, a_const,
                {asm.idx("p_bs", k):
                    (xi_i * xi_i / (xi_i + 1.0)) * d_sq / config.gamma0,
                 asm.idx("theta", k):
                    config.model_size_down * ln2 / config.bw_bs},
                norm=max(1.0, a_const))
        asm.add_box(f"box_p_bs[{k}]", asm.idx("p_bs", k), 0.0,
                    config.p_bs_max)
        asm.add_box(f"box_f_bs[{k}]", asm.idx("f_bs", k), 0.0,
                    config.f_bs_max)
        asm.add_box(f"box_theta[{k}]", asm.idx("theta", k), 0.0, np.inf)

    c = np.zeros(asm.n)
    c[asm.offsets["omega"]:asm.offsets["omega"] + big_k] = t_round_lp

    omega_start = np.empty(big_k)
    for k in range(big_k):
        agg_work = config.agg_scale * config.cycles_per_sample_bs[k] \
            * config.agg_samples[k]
        per_n = lat.t_sense[:, k] + lat.t_train[:, k] + lat.t_upload[:, k]
        omega_start[k] = per_n.max() + agg_work / lp.dv.f_bs[k] + theta_i[k]
    phys = {"p_bs": lp.dv.p_bs, "f_bs": lp.dv.f_bs, "theta": theta_i,
            "omega": omega_start}
    start = np.empty(asm.n)
    for name, arr in phys.items():
        off = asm.offsets[name]
        size = int(np.prod(asm.shapes[name]))
        start[off:off + size] = np.asarray(arr, dtype=float).ravel() \
            / asm.scales[off:off + size]

    frozen = lat.t_sense + lat.t_train + lat.t_upload
    return ConvexSubproblem(
        name="bs-block", offsets=dict(asm.offsets), shapes=dict(asm.shapes),
        scales=asm.scales, objective_c=c, blocks=asm.build_blocks(),
        start=start, frozen_terms={"t_uav": frozen, "d_final": d_final})
