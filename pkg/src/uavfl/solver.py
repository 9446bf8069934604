"""Inner convex solves and the outer alternating loop.

The outer loop alternates between the UAV block (trajectory, sensing and
uplink power, CPU frequency) and the BS block (broadcast power, aggregation
frequency), re-linearizing the surrogates at the current iterate each pass.
A block update is kept only if the true objective does not get worse, so
the recorded objective trace is non-increasing by construction.

The inner solver contract is purely result-based: any returned point must
satisfy the sub-problem constraints and first-order stationarity within
the configured tolerances.  The implementation hands the batched conic
structure to CVXPY/Clarabel and then re-derives the stationarity residual
from the returned duals against the sub-problem's own Jacobians, so the
check does not trust the backend.
"""

import enum
import time
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
import scipy.sparse as sparse
from scipy import optimize

from uavfl import convexify, model


class InfeasibleScenarioError(RuntimeError):
    """No feasible starting point exists for the scenario."""


class SolverError(RuntimeError):
    """Inner solver failure; carries the last good trace when available."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class Scheme(enum.Enum):
    JOINT = "joint"          # alternate both blocks
    UAV_ONLY = "uav-only"    # BS block pinned at its defaults
    BS_ONLY = "bs-only"      # UAV block pinned at the initialization

    @classmethod
    def parse(cls, text):
        for s in cls:
            if s.value == text:
                return s
        raise ValueError(f"unknown scheme {text!r}")


@dataclass(frozen=True)
class SolveSettings:
    kkt_tol: float = 1e-8          # stationarity residual bound, scaled space
    max_inner_iters: int = 200
    bcd_tol: float = 1e-4          # relative objective change to stop at
    max_bcd_iters: int = 50
    inner_tol: float = 1e-11       # interior-point path tolerance
    feas_tol: float = model.FEAS_TOL

    def __post_init__(self):
        if self.kkt_tol <= 0 or self.bcd_tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_inner_iters < 1 or self.max_bcd_iters < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one inner solve.

    status 'optimal' guarantees every constraint holds within feas_tol and
    the recomputed stationarity residual is within kkt_tol.  'max-iters'
    keeps the best iterate found; 'infeasible' carries no point.
    """

    status: str
    variables: dict | None
    objective: float
    kkt_residual: float
    max_violation: float


@dataclass
class TraceEntry:
    """One outer iteration.

    surrogate_objective is the objective of the iteration's last block
    solve; max_violation is the worst normalized constraint violation of
    the accepted iterate (raw, no tolerance applied).
    """

    iteration: int
    true_objective: float
    surrogate_objective: float
    max_violation: float
    wall_ms: float
    rejected_blocks: int = 0


@dataclass
class OptimizationTrace:
    """Per-iteration record of one outer-loop run."""

    scheme: Scheme
    pinned: dict
    init_objective: float
    entries: list = field(default_factory=list)
    final_dv: model.DecisionVector | None = None
    converged: bool = False

    @property
    def final_objective(self):
        return self.entries[-1].true_objective if self.entries \
            else self.init_objective

    @property
    def iterations(self):
        return len(self.entries)

    def signature(self):
        """Deterministic content (wall times excluded)."""
        rows = tuple((e.iteration, e.true_objective, e.surrogate_objective,
                      e.max_violation, e.rejected_blocks)
                     for e in self.entries)
        point = None if self.final_dv is None else tuple(
            getattr(self.final_dv, f).tobytes()
            for f in ("xy", "p_se", "p_cm", "f_uav", "p_bs", "f_bs"))
        return (self.scheme.value, tuple(sorted(self.pinned.items())),
                self.init_objective, rows, self.converged, point)


# ---------------------------------------------------------------------------
# inner solve


def _to_cvxpy(sp_, x):
    constraints, handles = [], []
    for b in sp_.blocks:
        if isinstance(b, convexify.QuadBlock):
            expr = b.a0 @ x + b.b0
            if b.forms.shape[0]:
                expr = expr - b.weights @ cp.square(b.forms @ x + b.offsets)
            con = expr >= 0
            constraints.append(con)
            handles.append(("quad", b, con, None))
        elif isinstance(b, convexify.InvBlock):
            cols = np.unique(b.inv_w.indices)
            expr = b.a0 @ x + b.b0
            if cols.size:
                expr = expr - b.inv_w[:, cols] @ cp.inv_pos(x[cols])
            con = expr >= 0
            constraints.append(con)
            handles.append(("inv", b, con, None))
        elif isinstance(b, convexify.BoxBlock):
            lo = x[b.idx] - b.lb >= 0
            constraints.append(lo)
            fin = np.isfinite(b.ub)
            hi = None
            if np.any(fin):
                hi = b.ub[fin] - x[b.idx[fin]] >= 0
                constraints.append(hi)
            handles.append(("box", b, lo, hi))
        else:
            raise TypeError(f"unknown block {type(b).__name__}")
    return constraints, handles


def _kkt_residual(sp_, xhat, handles, active_window=1e-6):
    """Stationarity residual of the best multiplier certificate at xhat.

    Solver duals seed the check, then nonnegative least squares over the
    near-active rows (constraint rows are normalized, so the activity
    window is absolute) refines the certificate.  The reported value is
    ||grad_objective - J_active^T lambda||_inf, normalized by the
    objective gradient scale; multipliers off the active set are zero.
    """
    grad = sp_.objective_c.copy()
    jac_rows, res_rows = [], []
    for kindname, b, con, hi in handles:
        if kindname in ("quad", "inv"):
            lam = con.dual_value
            if lam is None:
                return np.inf
            jac = sparse.csr_matrix(b.jacobian(xhat))
            grad -= jac.T @ np.maximum(np.asarray(lam).ravel(), 0.0)
            jac_rows.append(jac)
            res_rows.append(b.residuals(xhat))
        else:
            lam_lo = con.dual_value
            if lam_lo is None:
                return np.inf
            lam_lo = np.maximum(np.asarray(lam_lo).ravel(), 0.0)
            np.subtract.at(grad, b.idx, lam_lo)
            m = len(b.idx)
            lo_jac = sparse.csr_matrix(
                (np.ones(m), (np.arange(m), b.idx)), shape=(m, sp_.n_vars))
            jac_rows.append(lo_jac)
            res_rows.append(xhat[b.idx] - b.lb)
            fin = np.isfinite(b.ub)
            if hi is not None:
                lam_hi = hi.dual_value
                if lam_hi is None:
                    return np.inf
                lam_hi = np.maximum(np.asarray(lam_hi).ravel(), 0.0)
                np.add.at(grad, b.idx[fin], lam_hi)
                mf = int(fin.sum())
                hi_jac = sparse.csr_matrix(
                    (-np.ones(mf), (np.arange(mf), b.idx[fin])),
                    shape=(mf, sp_.n_vars))
                jac_rows.append(hi_jac)
                res_rows.append(b.ub[fin] - xhat[b.idx[fin]])
    denom = max(1.0, float(np.abs(sp_.objective_c).max(initial=0.0)))
    raw = float(np.abs(grad).max(initial=0.0)) / denom
    if raw <= 1e-12:
        return raw

    jac = sparse.vstack(jac_rows, format="csr")
    res = np.concatenate(res_rows)
    active = res <= active_window
    if not np.any(active):
        return raw
    a_mat = jac[active].toarray()
    try:
        lam, _ = optimize.nnls(a_mat.T, sp_.objective_c)
    except Exception:
        return raw
    refined = float(np.abs(sp_.objective_c - a_mat.T @ lam).max()) / denom
    return min(raw, refined)


def _clip_boxes(sp_, xhat):
    x = xhat.copy()
    for b in sp_.blocks:
        if isinstance(b, convexify.BoxBlock):
            x[b.idx] = np.clip(x[b.idx], b.lb, b.ub)
    return x


def solve_convex(sp_, settings=SolveSettings()):
    """Solve one sub-problem description to the contract tolerances."""
    issues = sp_.audit()
    if issues:
        raise ValueError("sub-problem failed its convexity audit: "
                         + "; ".join(issues))
    x = cp.Variable(sp_.n_vars)
    constraints, handles = _to_cvxpy(sp_, x)
    prob = cp.Problem(cp.Minimize(sp_.objective_c @ x), constraints)

    def attempt(tol):
        try:
            with warnings.catch_warnings():
                # accuracy is re-checked below against our own residuals
                warnings.simplefilter("ignore")
                prob.solve(solver="CLARABEL",
                           max_iter=settings.max_inner_iters,
                           tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol)
        except cp.error.SolverError as exc:
            raise SolverError(f"inner solver failed on {sp_.name}: {exc}") \
                from exc
        if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return SolveResult("infeasible", None, np.inf, np.inf, np.inf)
        if x.value is None:
            return SolveResult("max-iters", None, np.inf, np.inf, np.inf)
        xhat = np.asarray(x.value, dtype=float)
        kkt = _kkt_residual(sp_, xhat, handles)
        xhat = _clip_boxes(sp_, xhat)
        viol = sp_.max_violation(xhat)
        objective = float(sp_.objective_c @ xhat)
        ok = (prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
              and kkt <= settings.kkt_tol and viol <= settings.feas_tol)
        return SolveResult("optimal" if ok else "max-iters",
                          sp_.unpack(xhat), objective, kkt, viol)

    result = attempt(settings.inner_tol)
    if result.status == "max-iters" and result.variables is not None:
        # one escalation: push the path further before giving up on
        # certifying stationarity
        retry = attempt(settings.inner_tol * 1e-2)
        if retry.status == "optimal" or (retry.variables is not None
                                         and retry.kkt_residual
                                         < result.kkt_residual):
            result = retry
    return result


# ---------------------------------------------------------------------------
# feasible initialization


def init_feasible(config):
    """Straight-line trajectory, mid-box resources, tight slacks.

    Powers and frequencies are bisected down together when the energy
    budget cannot absorb the mid-box values.
    """
    n_u, big_k, big_t = config.n_uavs, config.rounds, config.slots_per_round
    total = big_k * big_t
    span = config.final_xy - config.initial_xy
    step = np.linalg.norm(span, axis=1) / total
    limit = config.v_max * config.slot_len
    if np.any(step > limit * (1 + 1e-12)):
        raise InfeasibleScenarioError(
            "endpoints unreachable: straight-line flight needs "
            f"{step.max():.3f} m/slot, limit is {limit:.3f}")
    frac = np.arange(1, total + 1) / total
    path = config.initial_xy[:, None, :] + frac[None, :, None] \
        * span[:, None, :]
    xy = path.reshape(n_u, big_k, big_t, 2)

    base = model.DecisionVector(
        xy=xy,
        p_se=np.broadcast_to(convexify.NUDGE_FRACTION
                             * config.p_se_max[:, None],
                             (n_u, big_k)).copy(),
        p_cm=np.broadcast_to(0.5 * config.p_cm_max[:, None, None],
                             (n_u, big_k, big_t)).copy(),
        f_uav=np.broadcast_to(0.5 * config.f_uav_max[:, None],
                              (n_u, big_k)).copy(),
        p_bs=np.full(big_k, 0.5 * config.p_bs_max),
        f_bs=np.full(big_k, 0.5 * config.f_bs_max),
    )

    def scaled(s):
        return base.replace(p_se=base.p_se * s, p_cm=base.p_cm * s,
                            f_uav=base.f_uav * s)

    def worst_energy(s):
        return float(model.energy_breakdown(config, scaled(s)).e_total.max())

    target = config.e_max * (1 - 1e-9)
    scale = 1.0
    if worst_energy(1.0) > target:
        lo, hi = 1e-9, 1.0
        if worst_energy(lo) > target:
            raise InfeasibleScenarioError(
                "energy budget cannot be met at any power/frequency scale")
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if worst_energy(mid) > target:
                hi = mid
            else:
                lo = mid
        scale = lo
    dv = scaled(scale)
    bad = model.check_feasibility(config, dv)
    if bad:
        raise InfeasibleScenarioError(
            "initialization left violations: " + "; ".join(map(str, bad)))
    return dv, convexify.tight_slacks(config, dv)


# ---------------------------------------------------------------------------
# outer loop


def _true_objective(config, dv):
    lat, _ = model.evaluate(config, dv)
    return lat.t_total


def _try_accept(config, dv_candidate, best_obj, feas_tol):
    try:
        obj = _true_objective(config, dv_candidate)
    except (model.InfeasibleRateError, ValueError):
        return None
    if not np.isfinite(obj) or obj > best_obj * (1 + 1e-9):
        return None
    if model.check_feasibility(config, dv_candidate, tol=feas_tol):
        return None
    return obj


def _uav_candidate(config, dv, variables):
    xy = np.stack([variables["x"], variables["y"]], axis=-1)
    p_se = np.clip(variables["p_se"], 0.0, config.p_se_max[:, None])
    p_cm = np.clip(variables["p_cm"], 0.0, config.p_cm_max[:, None, None])
    f_uav = np.clip(variables["f_uav"], 0.0, config.f_uav_max[:, None])
    return dv.replace(xy=xy, p_se=p_se, p_cm=p_cm, f_uav=f_uav)


def _bs_candidate(config, dv, variables):
    p_bs = np.clip(variables["p_bs"], 0.0, config.p_bs_max)
    f_bs = np.clip(variables["f_bs"], 0.0, config.f_bs_max)
    return dv.replace(p_bs=p_bs, f_bs=f_bs)


def run_scheme(config, scheme, settings=SolveSettings(), pinned_bs=None):
    """Run the outer loop with the given block-update policy.

    pinned_bs: (power, frequency) used by the UAV-only scheme; defaults to
    half the BS boxes, matching the initialization.
    """
    dv, _ = init_feasible(config)
    pinned = {}
    if scheme is Scheme.UAV_ONLY:
        p_pin, f_pin = pinned_bs if pinned_bs is not None else (
            0.5 * config.p_bs_max, 0.5 * config.f_bs_max)
        dv = dv.replace(p_bs=np.full(config.rounds, p_pin),
                        f_bs=np.full(config.rounds, f_pin))
        pinned = {"p_bs": float(p_pin), "f_bs": float(f_pin)}
    elif scheme is Scheme.BS_ONLY:
        pinned = {"uav_block": "initialization"}

    best = _true_objective(config, dv)
    trace = OptimizationTrace(scheme=scheme, pinned=pinned,
                              init_objective=best)
    try:
        for it in range(1, settings.max_bcd_iters + 1):
            t0 = time.perf_counter()
            prev = best
            surrogate = np.nan
            rejected = 0

            if scheme in (Scheme.JOINT, Scheme.UAV_ONLY):
                lp = convexify.make_linearization(config, dv)
                res = solve_convex(convexify.build_subproblem1(config, lp),
                                   settings)
                if res.variables is not None:
                    surrogate = res.objective
                    cand = _uav_candidate(config, dv, res.variables)
                    obj = _try_accept(config, cand, best, settings.feas_tol)
                    if obj is None:
                        rejected += 1
                    else:
                        dv, best = cand, obj
                else:
                    rejected += 1

            if scheme in (Scheme.JOINT, Scheme.BS_ONLY):
                lp = convexify.make_linearization(config, dv)
                res = solve_convex(convexify.build_subproblem2(config, lp),
                                   settings)
                if res.variables is not None:
                    surrogate = res.objective
                    cand = _bs_candidate(config, dv, res.variables)
                    obj = _try_accept(config, cand, best, settings.feas_tol)
                    if obj is None:
                        rejected += 1
                    else:
                        dv, best = cand, obj
                else:
                    rejected += 1

            viol = model.check_feasibility(config, dv, tol=0.0)
            max_viol = max((v.amount for v in viol), default=0.0)
            trace.entries.append(TraceEntry(
                iteration=it, true_objective=best,
                surrogate_objective=float(surrogate),
                max_violation=float(max_viol),
                wall_ms=(time.perf_counter() - t0) * 1e3,
                rejected_blocks=rejected))
            if abs(prev - best) <= settings.bcd_tol * max(abs(prev), 1e-300):
                trace.converged = True
                break
    except SolverError as exc:
        trace.final_dv = dv
        raise SolverError(str(exc), trace=trace) from exc
    trace.final_dv = dv
    return trace


def run_algorithm1(config, settings=SolveSettings()):
    """Joint optimization: alternate UAV and BS blocks until convergence."""
    return run_scheme(config, Scheme.JOINT, settings)
