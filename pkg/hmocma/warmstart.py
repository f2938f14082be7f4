"""Model-based trust-region warm start over a sweep of weighted-sum
scalarizations.

Each leg minimizes one scalarization with a quadratic interpolation model on
``2n + 1`` points: the model is fitted by the least-Frobenius-norm change of
the previous model's Hessian, the step comes from a truncated conjugate
gradient solve inside the trust region, and iterates are clipped into the
search box. Legs restart from the previous leg's best point with the next
weight from :data:`ALPHA_SCHEDULE`.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from .core import SearchPoint, Solution
from .logging_config import get_logger
from .problems import BiObjectiveProblem, Evaluator
from .scalarize import Scalarization, make_scalarization
from .utils import clip_into_box

logger = get_logger(__name__)

ALPHA_SCHEDULE: Tuple[float, ...] = (
    (0.5, 0.0, 1.0) + tuple(round(1.0 - 0.05 * j, 2) for j in range(1, 20)) + (0.0,)
)

FIRST_RADIUS = 6.0
LATER_RADIUS = 2.0
FTOL = 1e-3
REFINED_FTOL = 1e-4
MIN_RADIUS = 1e-8
SHRINK_BELOW = 0.25
GROW_ABOVE = 0.75

Objective = Callable[[SearchPoint], Solution]


class AlphaStep(NamedTuple):
    alpha: float
    refined: bool


def alpha_schedule(i: int) -> AlphaStep:
    """Weight of leg ``i``; past the first sweep the refined tolerance applies."""
    if i < 0:
        raise ValueError(f"schedule index must be non-negative, got {i}")
    return AlphaStep(ALPHA_SCHEDULE[i % len(ALPHA_SCHEDULE)], i >= len(ALPHA_SCHEDULE))


@dataclass
class QuadModel:
    center: SearchPoint
    c: float
    g: NDArray[np.float64]
    H: NDArray[np.float64]
    points: NDArray[np.float64]
    values: NDArray[np.float64]

    def predicted_values(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        d = np.atleast_2d(x) - self.center
        return np.asarray(
            self.c + d @ self.g + 0.5 * np.einsum("ij,jk,ik->i", d, self.H, d)
        )

    def gradient_at(self, x: SearchPoint) -> NDArray[np.float64]:
        return np.asarray(self.g + self.H @ (x - self.center))


def fit_quad_model(
    points: NDArray[np.float64],
    values: NDArray[np.float64],
    center: SearchPoint,
    prior: Optional[QuadModel] = None,
) -> QuadModel:
    """Interpolating quadratic whose Hessian differs least (Frobenius norm)
    from ``prior``'s, or is itself smallest when there is no prior."""
    m, n = points.shape
    s = points - center
    base = prior.predicted_values(points) if prior is not None else np.zeros(m)
    kkt = np.zeros((m + n + 1, m + n + 1))
    kkt[:m, :m] = 0.5 * (s @ s.T) ** 2
    kkt[:m, m] = kkt[m, :m] = 1.0
    kkt[:m, m + 1 :] = s
    kkt[m + 1 :, :m] = s.T
    rhs = np.concatenate([values - base, np.zeros(n + 1)])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    lam, c, g = sol[:m], float(sol[m]), sol[m + 1 :]
    H = s.T @ (lam[:, None] * s)
    if prior is not None:
        c += float(prior.predicted_values(center)[0])
        g = g + prior.gradient_at(center)
        H = H + prior.H
    H = 0.5 * (H + H.T)
    if not (np.isfinite(c) and np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
        if prior is None:
            raise np.linalg.LinAlgError("quadratic model fit is not finite")
        c = float(prior.predicted_values(center)[0])
        return QuadModel(center, c, prior.gradient_at(center), prior.H, points, values)
    return QuadModel(center, c, g, H, points, values)


def truncated_cg(
    g: NDArray[np.float64], H: NDArray[np.float64], radius: float, tol: float = 1e-12
) -> NDArray[np.float64]:
    """Steihaug conjugate gradient for ``min g.s + s.H.s/2``, ``|s| <= radius``."""
    s = np.zeros_like(g)
    r = -g
    if np.linalg.norm(r) < tol:
        return s
    d = r.copy()

    def to_boundary(
        s: NDArray[np.float64], d: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        dd, sd, ss = d @ d, s @ d, s @ s
        tau = (-sd + math.sqrt(max(sd * sd + dd * (radius * radius - ss), 0.0))) / dd
        return np.asarray(s + tau * d)

    for _ in range(len(g)):
        Hd = H @ d
        curvature = d @ Hd
        if curvature <= 0.0:
            return to_boundary(s, d)
        step = (r @ r) / curvature
        if np.linalg.norm(s + step * d) >= radius:
            return to_boundary(s, d)
        s = s + step * d
        r_new = r - step * Hd
        if np.linalg.norm(r_new) < tol:
            return s
        d = r_new + (r_new @ r_new) / (r @ r) * d
        r = r_new
    return s


def build_initial_set(x0: SearchPoint, radius: float) -> List[SearchPoint]:
    """``x0 ± radius e_i`` clipped into the box; a side that collapses onto
    ``x0`` is replaced by a half step the other way."""
    points: List[SearchPoint] = []
    for i in range(len(x0)):
        for sign in (1.0, -1.0):
            x = x0.copy()
            x[i] += sign * radius
            x = clip_into_box(x)
            if abs(x[i] - x0[i]) < 1e-12:
                x = x0.copy()
                x[i] -= sign * radius / 2.0
                x = clip_into_box(x)
            points.append(x)
    return points


@dataclass
class WarmStartState:
    alpha_schedule_index: int = 0
    trust_radius: float = FIRST_RADIUS
    ftol: float = FTOL
    model: Optional[QuadModel] = None
    best_so_far: Optional[Solution] = None
    all_evals: List[Solution] = field(default_factory=list)
    leg_evals: List[int] = field(default_factory=list)


def minimize_scalarized(
    s: Scalarization,
    objective: Objective,
    x0: SearchPoint,
    radius0: float,
    ftol: float,
    max_evals: int,
    start: Optional[Solution] = None,
    state: Optional[WarmStartState] = None,
) -> Tuple[Solution, int]:
    """Minimize ``g(s, f(x))`` from ``x0`` with at most ``max_evals`` calls.

    ``start`` is an already evaluated solution at ``x0``; it is reused and
    not charged. Returns the best solution (by ``g``) and the number of
    evaluations spent. Every evaluation is appended to ``state.all_evals``.
    """
    if radius0 <= 0:
        raise ValueError(f"radius0 must be positive, got {radius0}")
    if ftol <= 0:
        raise ValueError(f"ftol must be positive, got {ftol}")
    state = state if state is not None else WarmStartState()
    state.trust_radius, state.ftol = radius0, ftol
    used = 0

    def call(x: SearchPoint) -> Solution:
        nonlocal used
        solution = objective(x)
        used += 1
        state.all_evals.append(solution)
        return solution

    x0 = clip_into_box(np.asarray(x0, dtype=float))
    if start is None:
        if max_evals < 1:
            raise ValueError("max_evals must allow evaluating the start point")
        start = call(x0)
    best = start
    sample = [start]
    for x in build_initial_set(x0, radius0):
        if used >= max_evals:
            state.best_so_far = best
            return best, used
        solution = call(x)
        sample.append(solution)
        if s(solution.value) < s(best.value):
            best = solution
    state.best_so_far = best

    points = np.array([m.point for m in sample])
    values = np.array([s(m.value) for m in sample])
    model = fit_quad_model(points, values, best.point)
    state.model = model
    if math.isinf(ftol):
        return best, used

    n = len(x0)
    radius = radius0
    accepted = [s(best.value)]
    while used < max_evals and radius >= MIN_RADIUS:
        step = truncated_cg(model.gradient_at(best.point), model.H, radius)
        x_new = clip_into_box(best.point + step)
        step = x_new - best.point
        grad = model.gradient_at(best.point)
        predicted = -float(grad @ step + 0.5 * step @ model.H @ step)
        if np.linalg.norm(step) < 1e-12 or predicted <= 0.0:
            radius *= 0.5
            continue

        solution = call(x_new)
        g_best, g_new = s(best.value), s(solution.value)
        rho = (g_best - g_new) / predicted
        if rho < SHRINK_BELOW:
            radius *= 0.5
        elif rho > GROW_ABOVE:
            radius = min(2.0 * radius, radius0)

        if g_new < g_best:
            best = solution
            accepted.append(g_new)
        # the new point always enters, evicting the one farthest from the center
        far = np.sum((points - best.point) ** 2, axis=1)
        far[np.all(points == best.point, axis=1)] = -1.0
        k = int(np.argmax(far))
        points[k], values[k] = x_new, g_new
        model = fit_quad_model(points, values, best.point, prior=model)
        state.model, state.trust_radius, state.best_so_far = model, radius, best

        if len(accepted) > n + 1:
            prev, last = accepted[-(n + 2)], accepted[-1]
            if (prev - last) / max(abs(prev), abs(last), 1.0) < ftol:
                break
    return best, used


def run_warmstart(
    p: BiObjectiveProblem,
    budget: int,
    evaluator: Optional[Evaluator] = None,
    state: Optional[WarmStartState] = None,
) -> List[Solution]:
    """Spend exactly ``budget`` evaluations on the alpha sweep, the origin
    included, and return every evaluated solution in order."""
    if budget < p.n + 2:
        raise ValueError(
            f"warm start budget must be at least n+2={p.n + 2}, got {budget}"
        )
    evaluator = evaluator if evaluator is not None else Evaluator(p)
    state = state if state is not None else WarmStartState()

    with evaluator.charging("warmstart"):
        origin = evaluator(np.zeros(p.n))
        state.all_evals.append(origin)
        base = make_scalarization(p, ALPHA_SCHEDULE[0], origin.value)
        used = 1
        start = origin
        while used < budget:
            i = state.alpha_schedule_index
            alpha, refined = alpha_schedule(i)
            first = i == 0
            radius = FIRST_RADIUS if first else LATER_RADIUS
            ftol = REFINED_FTOL if refined else FTOL
            # the origin counts toward the first leg's 5n
            cap = min(5 * p.n - 1, budget - used) if first else budget - used
            start, spent = minimize_scalarized(
                base.with_alpha(alpha),
                evaluator,
                start.point,
                radius,
                ftol,
                cap,
                start=start,
                state=state,
            )
            used += spent
            state.leg_evals.append(spent)
            logger.debug(
                "Warm start leg finished",
                leg=i,
                alpha=alpha,
                evals=spent,
                radius=state.trust_radius,
            )
            state.alpha_schedule_index += 1
    return state.all_evals
