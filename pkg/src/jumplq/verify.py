"""Monte Carlo and algebraic verification of a synthesized strategy.

The checks cross-examine the solver outputs from independent directions:

* value_match: the simulated closed-loop cost against the evaluated value
  function, with a statistical band plus an O(h) discretization allowance.
* completion: for probe controls u, the cost excess J(u) - J(closed loop)
  against the quadratic penalty integral of u's deviation from the strategy,
  using common random numbers and a paired per-path statistic.
* optimality: the probe excess must not be significantly negative.
* stationarity: the pointwise first-order condition along simulated paths;
  an algebraic identity, so its tolerance is rounding-level and independent
  of the number of paths.
* convexity: the homogeneous quadratic functional evaluated at probe
  controls must be nonnegative; its failure certifies an ill-posed problem.
* equivalence: replaying the closed-loop outcome controls open loop must
  reproduce trajectories and costs bit-exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure
from .feedforward import ClosedLoopStrategy, closed_loop_strategy, offset_vector, solve_adjoint, value_at
from .noise import NoisePlan
from .problem import homogeneous_part, validate
from .riccati import gain_operators, solve_riccati
from .simulate import closed_loop_control, open_loop_control, simulate_closed_loop, simulate_open_loop, step_batch

# Relative tolerance for the stationarity identity; rounding-level, not statistical.
STATIONARITY_REL_TOL = 1e-8

# Discretization allowance multiplier: bands are 3*SE + DISCRETIZATION_ALLOWANCE*h*scale.
DISCRETIZATION_ALLOWANCE = 10.0


@dataclass
class CostReport:
    mean: float
    std_error: float
    paths: int


@dataclass
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    gap: float
    tolerance: float
    passed: bool
    lhs_se: float = 0.0
    gap_se: float = 0.0


@dataclass(frozen=True)
class Probe:
    """A probe control: open loop when theta is None, else u = theta x + v."""

    name: str
    theta: np.ndarray    # (N+1, m, n) or None
    v: np.ndarray        # (N+1, m) for strategy probes, (N, m) open loop

    def control(self, paths):
        if self.theta is None:
            return open_loop_control(self.v, paths)
        theta = self.theta
        v = self.v

        def control(k, X):
            return X @ theta[k].T + v[k]

        return control


def _stage_cost(prob, t, X, U):
    c = np.einsum("pi,ij,pj->p", X, prob.Q(t), X)
    c = c + 2.0 * np.einsum("pi,ij,pj->p", U, prob.S(t), X)
    c = c + np.einsum("pi,ij,pj->p", U, prob.R(t), U)
    return c + 2.0 * (X @ prob.q(t)) + 2.0 * (U @ prob.rho(t))


def _terminal_cost(prob, X):
    return np.einsum("pi,ij,pj->p", X, prob.H, X) + 2.0 * (X @ prob.g)


def path_costs(batch, prob):
    """Quadratic cost of every path in a recorded batch, left-endpoint quadrature."""
    N = prob.grid.steps
    times = prob.times
    cost = np.zeros(batch.paths)
    for k in range(N):
        cost += prob.h * _stage_cost(prob, times[k], batch.X[:, k], batch.u[:, k])
    return cost + _terminal_cost(prob, batch.X[:, N])


def cost_along(traj, prob):
    """Quadratic cost of a single trajectory."""
    N = prob.grid.steps
    times = prob.times
    cost = 0.0
    for k in range(N):
        cost += prob.h * float(_stage_cost(prob, times[k], traj.X[None, k], traj.u[None, k])[0])
    return cost + float(_terminal_cost(prob, traj.X[None, N])[0])


def _report(values, paths):
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(paths)) if paths > 1 else 0.0
    return CostReport(mean=mean, std_error=se, paths=paths)


def mc_cost(prob, control, plan):
    """Monte Carlo cost of a control law; streams per-path accumulators.

    The same plan gives the same report bit-exactly: draws are addressed by
    (seed, path, step, channel) and the accumulation order is fixed.
    """
    N = prob.grid.steps
    times = prob.times
    lam = prob.weights * prob.h
    X = np.tile(prob.x0, (plan.paths, 1))
    cost = np.zeros(plan.paths)
    for k in range(N):
        dW = plan.brownian(k, prob.h)
        dN = plan.mark_counts(k, lam)
        U = control(k, X)
        cost += prob.h * _stage_cost(prob, times[k], X, U)
        X = step_batch(X, U, times[k], dW, dN, prob)
        if not np.all(np.isfinite(X)):
            bad = int(np.argwhere(~np.isfinite(X))[0][0])
            raise NumericalFailure(f"simulation produced non-finite state (path {bad}, step {k + 1})",
                                   path=bad, step=k + 1)
    cost += _terminal_cost(prob, X)
    return _report(cost, plan.paths)


def mc_scale(prob, ride):
    """Magnitude reference for discretization allowances: 1 + max ||P|| (1 + |x0|^2)."""
    pmax = max(float(np.linalg.norm(ride.P[k])) for k in range(ride.P.shape[0]))
    return 1.0 + pmax * (1.0 + float(prob.x0 @ prob.x0))


def _block_values(plan, index, blocks, m):
    return plan.probe_normals(index, blocks * m).reshape(blocks, m)


def _block_path(plan, index, N, m, blocks=16):
    vals = _block_values(plan, index, min(blocks, N), m)
    idx = (np.arange(N) * vals.shape[0]) // N
    return vals[idx]


def default_probes(prob, strat, plan, count=5):
    """Probe family for the completion check: strategy shifts and open-loop controls."""
    N = prob.grid.steps
    m = prob.m
    probes = []
    for j in range(count):
        kind = j % 5
        if kind == 0:
            w = np.zeros((N + 1, m))
            w[:, j % m] = 1.0
            probes.append(Probe(name=f"shift-axis{j % m}", theta=strat.theta, v=strat.v + w))
        elif kind == 1:
            probes.append(Probe(name="shift-const", theta=strat.theta, v=strat.v + 0.1))
        elif kind == 2:
            w = np.vstack([_block_path(plan, j, N, m), np.zeros((1, m))])
            probes.append(Probe(name=f"shift-noise{j}", theta=strat.theta, v=strat.v + w))
        elif kind == 3:
            u = np.ones((N, m))
            probes.append(Probe(name="open-const", theta=None, v=u))
        else:
            probes.append(Probe(name=f"open-noise{j}", theta=None, v=_block_path(plan, j, N, m)))
    return probes


def completion_of_squares_check(prob, ride, strat, probes, plan):
    """Check J(u) - J(closed loop) = E integral <W delta, delta> per probe.

    delta is the probe's deviation from the strategy outcome along the
    probe's own trajectory; both sides share one noise plan so the gap is a
    paired statistic.  Pass band: 3 * SE(paired gap) + allowance * h * scale.
    """
    N = prob.grid.steps
    times = prob.times
    h = prob.h
    lam = prob.weights * h
    weight_grid = [gain_operators(ride.P[k], times[k], prob).weight for k in range(N + 1)]
    scale = mc_scale(prob, ride)
    cl = closed_loop_control(strat)

    reports = []
    for probe in probes:
        pc = probe.control(plan.paths)
        X_u = np.tile(prob.x0, (plan.paths, 1))
        X_c = X_u.copy()
        cost_u = np.zeros(plan.paths)
        cost_c = np.zeros(plan.paths)
        quad = np.zeros(plan.paths)
        for k in range(N):
            t = times[k]
            dW = plan.brownian(k, h)
            dN = plan.mark_counts(k, lam)
            U_u = pc(k, X_u)
            U_c = cl(k, X_c)
            delta = U_u - (X_u @ strat.theta[k].T + strat.v[k])
            quad += h * np.einsum("pi,ij,pj->p", delta, weight_grid[k], delta)
            cost_u += h * _stage_cost(prob, t, X_u, U_u)
            cost_c += h * _stage_cost(prob, t, X_c, U_c)
            X_u = step_batch(X_u, U_u, t, dW, dN, prob)
            X_c = step_batch(X_c, U_c, t, dW, dN, prob)
            if not (np.all(np.isfinite(X_u)) and np.all(np.isfinite(X_c))):
                raise NumericalFailure(f"probe simulation produced non-finite state at step {k + 1}",
                                       step=k + 1)
        cost_u += _terminal_cost(prob, X_u)
        cost_c += _terminal_cost(prob, X_c)

        excess = cost_u - cost_c
        paired = excess - quad
        gap = float(np.mean(paired))
        gap_se = float(np.std(paired, ddof=1) / np.sqrt(plan.paths)) if plan.paths > 1 else 0.0
        lhs = float(np.mean(excess))
        lhs_se = float(np.std(excess, ddof=1) / np.sqrt(plan.paths)) if plan.paths > 1 else 0.0
        tol = 3.0 * gap_se + DISCRETIZATION_ALLOWANCE * h * scale
        reports.append(IdentityReport(
            name=f"completion/{probe.name}", lhs=lhs, rhs=float(np.mean(quad)),
            gap=gap, tolerance=tol, passed=abs(gap) <= tol,
            lhs_se=lhs_se, gap_se=gap_se))
    return reports


def optimality_reports(completion):
    """Probe excess must not be significantly negative: mean >= -3 SE."""
    out = []
    for rep in completion:
        name = rep.name.split("/", 1)[1]
        tol = 3.0 * rep.lhs_se
        out.append(IdentityReport(name=f"optimality/{name}", lhs=rep.lhs, rhs=0.0,
                                  gap=min(rep.lhs, 0.0), tolerance=tol,
                                  passed=rep.lhs >= -tol, lhs_se=rep.lhs_se))
    return out


def default_convexity_probes(prob, plan, count=20):
    """Open-loop probes for the convexity check: signed axis constants, then noise."""
    N = prob.grid.steps
    m = prob.m
    probes = []
    j = 0
    for axis in range(m):
        for sign in (1.0, -1.0):
            if j >= count:
                break
            u = np.zeros((N, m))
            u[:, axis] = sign
            tag = "+" if sign > 0 else "-"
            probes.append(Probe(name=f"u-axis{axis}{tag}", theta=None, v=u))
            j += 1
    while j < count:
        probes.append(Probe(name=f"u-noise{j}", theta=None, v=_block_path(plan, j, N, m)))
        j += 1
    return probes


def convexity_probe(prob, probes, plan):
    """Evaluate the homogeneous quadratic functional at probe controls.

    Returns (min value, per-probe reports).  A significantly negative value
    certifies a non-convex problem; each report passes iff its value is
    >= -3 SE.
    """
    hom = validate(homogeneous_part(prob.spec))
    reports = []
    for probe in probes:
        rep = mc_cost(hom, probe.control(plan.paths), plan)
        tol = 3.0 * rep.std_error
        reports.append(IdentityReport(name=f"convexity/{probe.name}", lhs=rep.mean, rhs=0.0,
                                      gap=min(rep.mean, 0.0), tolerance=tol,
                                      passed=rep.mean >= -tol, lhs_se=rep.std_error))
    min_value = min(r.lhs for r in reports)
    return min_value, reports


def stationarity_residual(prob, ride, adj, strat, plan, max_paths=64):
    """Max norm of the pointwise first-order condition along simulated paths.

    The residual couples the costate P x + eta, its diffusion and jump
    companions, and the running cost gradient; with exact arithmetic it
    vanishes identically under the synthesized strategy, so only rounding
    survives.  Path count does not matter; a small prefix of the plan is
    used.  Returns (max residual, scale) where scale reflects the magnitude
    of the cancelled terms.
    """
    sub = plan.prefix(max_paths)
    batch = simulate_closed_loop(prob, strat, sub)
    times = prob.times
    N = prob.grid.steps
    w = prob.weights

    max_resid = 0.0
    term_scale = 0.0
    for k in range(N + 1):
        t = times[k]
        P = ride.P[k]
        eta = adj.eta[k]
        th = strat.theta[k]
        v = strat.v[k]
        B = prob.B(t)
        D = prob.D(t)
        R = prob.R(t)
        sig = prob.sigma(t)
        C_cl = prob.C(t) + D @ th
        M = B.T @ P + D.T @ (P @ C_cl) + prob.S(t) + R @ th
        c = B.T @ eta + D.T @ (P @ (D @ v) + P @ sig) + R @ v + prob.rho(t)
        if prob.K:
            F_cl = prob.Fs(t) + prob.Gs(t) @ th
            G = prob.Gs(t)
            M = M + np.einsum("k,kpi,pq,kqj->ij", w, G, P, F_cl)
            c = c + np.einsum("k,kpi,pq,kq->i", w, G, P, G @ v + prob.fs(t))
        resid = batch.X[:, k] @ M.T + c
        max_resid = max(max_resid, float(np.max(np.linalg.norm(resid, axis=1))))

        ops = gain_operators(P, t, prob)
        wvec = offset_vector(prob, P, eta, t)
        term_scale = max(term_scale,
                         float(np.linalg.norm(ops.cross))
                         + float(np.linalg.norm(ops.weight)) * (1.0 + float(np.linalg.norm(v)))
                         + float(np.linalg.norm(wvec)))
    state_scale = 1.0 + float(np.max(np.linalg.norm(batch.X, axis=2)))
    return max_resid, state_scale * (1.0 + term_scale)


def equivalence_check(prob, strat, plan, max_paths=1024):
    """Replay the recorded closed-loop controls open loop; must match bit-exactly."""
    sub = plan.prefix(max_paths)
    batch = simulate_closed_loop(prob, strat, sub)
    replay = simulate_open_loop(prob, batch.u, sub)
    state_gap = float(np.max(np.abs(replay.X - batch.X)))
    cost_gap = float(np.max(np.abs(path_costs(replay, prob) - path_costs(batch, prob))))
    gap = max(state_gap, cost_gap)
    return IdentityReport(name="equivalence", lhs=gap, rhs=0.0, gap=gap,
                          tolerance=0.0, passed=gap == 0.0)


def run_verification(prob, seed, paths, tol_psd=None, tol_range=None,
                     theta_override=None, probe_count=5, convexity_count=20):
    """Full verification pass; returns (report dict, all passed)."""
    kwargs = {}
    if tol_psd is not None:
        kwargs["tol_psd"] = tol_psd
    if tol_range is not None:
        kwargs["tol_range"] = tol_range
    ride = solve_riccati(prob, **kwargs)
    adj = solve_adjoint(prob, ride, **({"tol_range": tol_range} if tol_range is not None else {}))
    strat = closed_loop_strategy(prob, ride, adj)
    if theta_override is not None:
        strat = ClosedLoopStrategy(grid=strat.grid, theta=np.asarray(theta_override, dtype=float),
                                   v=strat.v)
    plan = NoisePlan(seed=seed, paths=paths)
    scale = mc_scale(prob, ride)

    checks = []
    mc = mc_cost(prob, closed_loop_control(strat), plan)
    val = value_at(prob, ride, adj, prob.grid.t0, prob.x0)
    tol = 3.0 * mc.std_error + DISCRETIZATION_ALLOWANCE * prob.h * scale
    checks.append(IdentityReport(name="value_match", lhs=mc.mean, rhs=val, gap=mc.mean - val,
                                 tolerance=tol, passed=abs(mc.mean - val) <= tol,
                                 lhs_se=mc.std_error, gap_se=mc.std_error))

    completion = completion_of_squares_check(prob, ride, strat,
                                             default_probes(prob, strat, plan, probe_count), plan)
    checks.extend(completion)
    checks.extend(optimality_reports(completion))

    resid, sscale = stationarity_residual(prob, ride, adj, strat, plan)
    checks.append(IdentityReport(name="stationarity", lhs=resid, rhs=0.0, gap=resid,
                                 tolerance=STATIONARITY_REL_TOL * sscale,
                                 passed=resid <= STATIONARITY_REL_TOL * sscale))

    min_value, conv_reports = convexity_probe(prob, default_convexity_probes(prob, plan, convexity_count), plan)
    worst = min(conv_reports, key=lambda r: r.lhs)
    checks.append(IdentityReport(name="convexity", lhs=min_value, rhs=0.0,
                                 gap=min(min_value, 0.0), tolerance=worst.tolerance,
                                 passed=all(r.passed for r in conv_reports), lhs_se=worst.lhs_se))

    checks.append(equivalence_check(prob, strat, plan))

    report = {
        "environment": {
            "seed": int(seed), "paths": int(paths), "steps": int(prob.grid.steps),
            "t0": prob.grid.t0, "T": prob.grid.T, "n": prob.n, "m": prob.m,
            "marks": prob.K, "tol_psd": ride.tol_psd, "tol_range": ride.tol_range,
        },
        "checks": [{"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "gap": c.gap,
                    "tolerance": c.tolerance, "pass": bool(c.passed)} for c in checks],
    }
    return report, all(c.passed for c in checks)
