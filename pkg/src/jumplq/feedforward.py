"""Feedforward synthesis and value evaluation on top of a Riccati solution.

With deterministic problem data the adjoint backward equation has no
martingale part, so it reduces to a linear vector ODE for eta(t):

    d(eta)/dt = -[ (A + B Th)^T eta + (C + D Th)^T P sigma
                   + sum_i pi_i (F_i + G_i Th)^T P f_i + P b + q + Th^T rho ],

terminal value eta(T) = g, where Th = -W^+ L is the feedback gain from the
Riccati sweep.  The feedforward offset solves W v = -(B^T eta + D^T P sigma
+ sum_i pi_i G_i^T P f_i + rho) in the Moore-Penrose sense, which requires
the right-hand side to stay in the range of W; that gate is checked at every
grid point.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ClosedLoopUnsolvable, NumericalFailure, OutOfHorizon
from .linalg import pinv, pinv_quadform, range_contains
from .problem import CoefficientPath
from .riccati import DEFAULT_TOL_RANGE, gain_operators


@dataclass
class AdjointSolution:
    """Adjoint sweep output.

    The martingale components are identically zero under deterministic
    problem data; they are stored anyway so the triple matches the general
    closed-loop representation.
    """

    grid: object
    eta: np.ndarray       # (N+1, n)
    zeta: np.ndarray      # (N+1, n), identically zero in this mode
    psi: np.ndarray       # (N+1, K, n), identically zero in this mode
    range_ok: np.ndarray  # (N+1,) bool, feedforward range gate


@dataclass
class ClosedLoopStrategy:
    """Feedback gain and offset per grid point; the outcome control is u = Theta x + v."""

    grid: object
    theta: np.ndarray  # (N+1, m, n)
    v: np.ndarray      # (N+1, m)


def offset_vector(prob, P, eta, t):
    """Right-hand side B^T eta + D^T P sigma + sum_i pi_i G_i^T P f_i + rho of the offset solve."""
    w = prob.B(t).T @ eta + prob.D(t).T @ (P @ prob.sigma(t)) + prob.rho(t)
    if prob.K:
        w = w + np.einsum("k,kpi,pq,kq->i", prob.weights, prob.Gs(t), P, prob.fs(t))
    return w


def adjoint_derivative(eta, t, prob, P):
    """Right-hand side d(eta)/dt of the reduced adjoint equation at (eta, t)."""
    ops = gain_operators(P, t, prob)
    th = -pinv(ops.weight) @ ops.cross
    A_cl = prob.A(t) + prob.B(t) @ th
    C_cl = prob.C(t) + prob.D(t) @ th
    drift = (A_cl.T @ eta + C_cl.T @ (P @ prob.sigma(t))
             + P @ prob.b(t) + prob.q(t) + th.T @ prob.rho(t))
    if prob.K:
        F_cl = prob.Fs(t) + prob.Gs(t) @ th
        drift = drift + np.einsum("k,kpi,pq,kq->i", prob.weights, F_cl, P, prob.fs(t))
    return -drift


def solve_adjoint(prob, ride, tol_range=DEFAULT_TOL_RANGE):
    """Integrate the reduced adjoint equation backward over the grid.

    ``ride`` is the RiccatiSolution for the same problem; P is interpolated
    linearly between grid points for the half-step stage evaluations.
    Raises ClosedLoopUnsolvable("RANGE_FEEDFORWARD") if the offset solve
    leaves the range of the effective control weight at some grid point.
    """
    times = prob.times
    N = prob.grid.steps
    h = prob.h
    P_path = CoefficientPath.sampled(ride.P)

    eta = np.empty((N + 1, prob.n))
    range_ok = np.zeros(N + 1, dtype=bool)
    eta[N] = prob.g

    def checkpoint(k):
        ops = gain_operators(ride.P[k], times[k], prob)
        w = offset_vector(prob, ride.P[k], eta[k], times[k])
        range_ok[k] = range_contains(ops.weight, w, tol_range)
        if not range_ok[k]:
            raise ClosedLoopUnsolvable(times[k], "RANGE_FEEDFORWARD")

    def deriv(e, t):
        return adjoint_derivative(e, t, prob, P_path.at(t, prob.grid))

    checkpoint(N)
    for k in range(N, 0, -1):
        t = times[k]
        ek = eta[k]
        k1 = deriv(ek, t)
        k2 = deriv(ek - 0.5 * h * k1, t - 0.5 * h)
        k3 = deriv(ek - 0.5 * h * k2, t - 0.5 * h)
        k4 = deriv(ek - h * k3, times[k - 1])
        eta[k - 1] = ek - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(eta[k - 1])):
            raise NumericalFailure(f"adjoint sweep produced non-finite entries at t={times[k - 1]:.9g}",
                                   time=times[k - 1])
        checkpoint(k - 1)

    return AdjointSolution(grid=prob.grid, eta=eta,
                           zeta=np.zeros((N + 1, prob.n)),
                           psi=np.zeros((N + 1, prob.K, prob.n)),
                           range_ok=range_ok)


def feedforward_offsets(prob, ride, adj):
    """Offset -W^+ (B^T eta + D^T P sigma + sum_i pi_i G_i^T P f_i + rho) per grid point."""
    times = prob.times
    out = np.empty((len(times), prob.m))
    for k, t in enumerate(times):
        ops = gain_operators(ride.P[k], t, prob)
        w = offset_vector(prob, ride.P[k], adj.eta[k], t)
        out[k] = -pinv(ops.weight) @ w
    return out


def closed_loop_strategy(prob, ride, adj):
    """Assemble the optimal strategy (feedback gains, feedforward offsets)."""
    from .riccati import feedback_gains

    return ClosedLoopStrategy(grid=prob.grid,
                              theta=feedback_gains(ride, prob),
                              v=feedforward_offsets(prob, ride, adj))


def _grid_index(prob, t):
    s = (t - prob.grid.t0) / prob.h
    k = int(round(s))
    if abs(s - k) > 1e-9 or k < 0 or k > prob.grid.steps:
        raise OutOfHorizon(f"t={t!r} is not a grid point of [{prob.grid.t0!r}, {prob.grid.T!r}]")
    return k


def value_terms(prob, ride, adj, t, x):
    """Decomposed optimal value at a grid time: quadratic, linear, integral.

    The integral term accumulates 2<eta, b> + <P sigma, sigma>
    + sum_i pi_i <P f_i, f_i> - <W^+ w, w> over [t, T] by the composite
    trapezoid rule on the grid.
    """
    x = np.asarray(x, dtype=float)
    k0 = _grid_index(prob, t)
    times = prob.times
    N = prob.grid.steps

    integrand = np.empty(N + 1 - k0)
    for j in range(k0, N + 1):
        tj = times[j]
        P = ride.P[j]
        sig = prob.sigma(tj)
        val = 2.0 * float(adj.eta[j] @ prob.b(tj)) + float(sig @ (P @ sig))
        if prob.K:
            fj = prob.fs(tj)
            val += float(np.einsum("k,ki,ij,kj->", prob.weights, fj, P, fj))
        ops = gain_operators(P, tj, prob)
        w = offset_vector(prob, P, adj.eta[j], tj)
        val -= pinv_quadform(ops.weight, w)
        integrand[j - k0] = val
    integral = float(np.trapezoid(integrand, dx=prob.h)) if N - k0 > 0 else 0.0

    quadratic = float(x @ (ride.P[k0] @ x))
    linear = 2.0 * float(adj.eta[k0] @ x)
    return {"quadratic": quadratic, "linear": linear, "integral": integral}


def value_at(prob, ride, adj, t, x):
    """Optimal value V(t, x) at a grid time t."""
    terms = value_terms(prob, ride, adj, t, x)
    return terms["quadratic"] + terms["linear"] + terms["integral"]
