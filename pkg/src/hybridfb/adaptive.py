"""Adaptive and backstepped lifts of a nominal synergistic controller.

Starting from a nominal synergistic controller for the unperturbed
affine plant, the adaptive lift appends a parameter estimate driven by a
Lipschitz projection law (keeping the estimate inside an inflated ball
around the admissible parameter set), replaces the feedback with a
certainty-equivalent compensation, and switches on an implementable
synergy gap: the nominal gap plus half the squared metric distance of
the estimate to the admissible ball.  The backstepping lift then turns
the input into a controller state with a designed rate so the composite
potential still decreases, resetting the input onto the adaptive
feedback at every jump.

Subproblems over the parameter ball (metric projection / worst-case
distance) are solved in closed form for scalar gain matrices and by
bisection on the Lagrange multiplier of the ball constraint otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ChartSingular, InsideObstacle, NonFiniteJacobian
from .synergistic import (
    AffinePlant,
    ControllerData,
    gap_value,
    min_over_candidates,
)

# Lagrange-multiplier bisection budget for ball-constrained quadratics.
MULTIPLIER_BRACKET = 1e12
MULTIPLIER_ITERS = 200
MULTIPLIER_TOL = 1e-12

# Relative step for finite-difference Jacobians and gradients.
FD_REL_STEP = 1e-6


def _check_spd(name: str, mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if float(np.max(np.abs(mat - mat.T))) > 1e-12 * max(1.0, float(np.max(np.abs(mat)))):
        raise ValueError(f"{name} must be symmetric")
    if float(np.min(np.linalg.eigvalsh(mat))) <= 0.0:
        raise ValueError(f"{name} must be positive definite")
    return mat


def _scalar_multiple(mat: np.ndarray) -> Optional[float]:
    """Return gamma when ``mat == gamma * I`` exactly, else None."""
    diag = np.diag(mat)
    if np.all(diag == diag[0]) and np.all(mat == np.diag(diag)):
        return float(diag[0])
    return None


@dataclass(frozen=True)
class ParamBall:
    """Admissible parameter ball, projection margin, and adaptation gain.

    The unknown parameter satisfies ``norm(theta) <= radius``; the
    estimate is allowed to roam the inflated ball of radius ``radius +
    eps``; ``gain`` is the symmetric positive-definite adaptation gain.
    """

    radius: float
    eps: float
    gain: np.ndarray

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("ball radius must be positive")
        if self.eps <= 0.0:
            raise ValueError("projection margin eps must be positive")
        gain = _check_spd("adaptation gain", self.gain)
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "gain_inv", np.linalg.inv(gain))
        object.__setattr__(self, "scalar_gain", _scalar_multiple(gain))
        object.__setattr__(
            self, "excess_scale", self.eps**2 + 2.0 * self.eps * self.radius
        )

    @property
    def dim(self) -> int:
        return self.gain.shape[0]


@dataclass(frozen=True)
class AdaptiveState:
    """Adaptive controller state: nominal part plus parameter estimate."""

    base: np.ndarray
    estimate: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [np.atleast_1d(np.asarray(self.base, dtype=float)),
             np.atleast_1d(np.asarray(self.estimate, dtype=float))]
        )

    @classmethod
    def from_vector(cls, vec: np.ndarray, n_base: int) -> "AdaptiveState":
        vec = np.asarray(vec, dtype=float)
        return cls(base=vec[:n_base], estimate=vec[n_base:])


@dataclass(frozen=True)
class BackstepState:
    """Backstepping controller state: adaptive part plus the held input."""

    inner: AdaptiveState
    input: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.inner.to_vector(), np.atleast_1d(np.asarray(self.input, dtype=float))]
        )

    @classmethod
    def from_vector(cls, vec: np.ndarray, n_base: int, n_theta: int) -> "BackstepState":
        vec = np.asarray(vec, dtype=float)
        return cls(
            inner=AdaptiveState.from_vector(vec[: n_base + n_theta], n_base),
            input=vec[n_base + n_theta:],
        )


@dataclass(frozen=True)
class BackstepGains:
    """Backstepping gains: input-error metric ``gain`` and damping rate."""

    gain: np.ndarray
    damping: float

    def __post_init__(self):
        if self.damping <= 0.0:
            raise ValueError("damping gain must be positive")
        gain = _check_spd("backstepping gain", self.gain)
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "gain_inv", np.linalg.inv(gain))


def ball_excess(theta_hat: np.ndarray, ball: ParamBall) -> float:
    """Normalized indicator of how far the estimate exceeds the ball.

    Nonpositive inside the admissible ball, zero on its boundary, and
    exactly one on the boundary of the inflated ball.
    """
    th = np.asarray(theta_hat, dtype=float)
    return (float(th @ th) - ball.radius**2) / ball.excess_scale


def ball_excess_gradient(theta_hat: np.ndarray, ball: ParamBall) -> np.ndarray:
    return 2.0 * np.asarray(theta_hat, dtype=float) / ball.excess_scale


def project_rate(
    rate: np.ndarray, theta_hat: np.ndarray, ball: ParamBall
) -> np.ndarray:
    """Lipschitz projection of an adaptation rate.

    Passes ``rate`` through unchanged inside the admissible ball or when
    the rate does not push outward; otherwise removes enough of the
    outward component (scaled by the excess indicator) that the estimate
    can never leave the inflated ball.  The excess gradient vanishes
    only at the origin, where the first branch applies, so the second
    branch never divides by zero.
    """
    rate = np.asarray(rate, dtype=float)
    p = ball_excess(theta_hat, ball)
    if p <= 0.0:
        return rate
    grad = ball_excess_gradient(theta_hat, ball)
    outward = float(grad @ rate)
    if outward <= 0.0:
        return rate
    return rate - (p * outward / float(grad @ grad)) * grad


def ball_distance(
    theta_hat: np.ndarray, ball: ParamBall
) -> tuple[float, np.ndarray]:
    """Squared gain-metric distance of the estimate to the ball, and the
    nearest point.

    Minimizes ``(theta - theta_hat)^T gain^{-1} (theta - theta_hat)``
    over ``norm(theta) <= radius``.  Zero (with ``theta = theta_hat``)
    inside the ball; closed form for scalar gains; Lagrange-multiplier
    bisection (bracket [0, 1e12], 200 iterations, constraint tolerance
    1e-12) otherwise.
    """
    th = np.asarray(theta_hat, dtype=float)
    norm = float(np.linalg.norm(th))
    if norm <= ball.radius:
        return 0.0, th.copy()
    if ball.scalar_gain is not None:
        nearest = (ball.radius / norm) * th
        return (norm - ball.radius) ** 2 / ball.scalar_gain, nearest

    metric = ball.gain_inv
    rhs = metric @ th
    eye = np.eye(ball.dim)
    lo, hi = 0.0, MULTIPLIER_BRACKET
    nearest = th
    for _ in range(MULTIPLIER_ITERS):
        lam = 0.5 * (lo + hi)
        nearest = np.linalg.solve(metric + lam * eye, rhs)
        excess = float(np.linalg.norm(nearest)) - ball.radius
        if abs(excess) <= MULTIPLIER_TOL:
            break
        if excess > 0.0:
            lo = lam
        else:
            hi = lam
    diff = th - nearest
    return float(diff @ metric @ diff), nearest


def reset_estimate(theta_hat: np.ndarray, ball: ParamBall) -> np.ndarray:
    """Jump update of the estimate: its gain-metric projection onto the ball.

    For a scalar gain this is ``min(1, radius/norm) * theta_hat``; it is
    the maximizer of the worst-case potential drop over admissible
    parameters (the max-min reset rule), which reduces to the metric
    projection.
    """
    return ball_distance(theta_hat, ball)[1]


def robust_gap(
    nominal: ControllerData,
    ball: ParamBall,
    x: np.ndarray,
    xi_c: np.ndarray,
    theta_hat: np.ndarray,
) -> float:
    """Implementable synergy gap: worst case over admissible parameters.

    Equals the nominal gap plus half the squared gain-metric distance of
    the estimate to the admissible ball; it never depends on the true
    parameter and lower-bounds the true-parameter gap.
    """
    gap0 = gap_value(nominal, x, xi_c)
    if math.isinf(gap0):
        return math.inf
    return gap0 + 0.5 * ball_distance(theta_hat, ball)[0]


def potential_gradient_fd(
    potential: Callable[[np.ndarray, np.ndarray], float],
    x: np.ndarray,
    xi_c: np.ndarray,
    rel_step: float = FD_REL_STEP,
) -> np.ndarray:
    """Central-difference gradient of a potential in the plant state.

    Steps ``rel_step * max(1, norm(x))`` along each ambient coordinate.
    Raises :class:`NonFiniteJacobian` if a probe lands on an infinite
    branch of the potential.
    """
    x = np.asarray(x, dtype=float)
    h = rel_step * max(1.0, float(np.linalg.norm(x)))
    grad = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        try:
            vp = float(potential(xp, xi_c))
            vm = float(potential(xm, xi_c))
        except (ChartSingular, InsideObstacle) as exc:
            raise NonFiniteJacobian(f"gradient probe {i} hit a singularity") from exc
        if not (math.isfinite(vp) and math.isfinite(vm)):
            raise NonFiniteJacobian(f"gradient probe {i} produced a non-finite value")
        grad[i] = (vp - vm) / (2.0 * h)
    return grad


def feedback_jacobian_fd(
    feedback: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    xi_c: np.ndarray,
    rel_step: float = FD_REL_STEP,
) -> np.ndarray:
    """Central-difference Jacobian of a feedback law in the plant state.

    Probes are taken in the ambient coordinates of the plant state; an
    analytic Jacobian may replace this provider and must agree with it
    to within 1e-6 relative at nonsingular states.
    """
    x = np.asarray(x, dtype=float)
    h = rel_step * max(1.0, float(np.linalg.norm(x)))
    cols = []
    for i in range(x.shape[0]):
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        try:
            fp = np.asarray(feedback(xp, xi_c), dtype=float)
            fm = np.asarray(feedback(xm, xi_c), dtype=float)
        except (ChartSingular, InsideObstacle) as exc:
            raise NonFiniteJacobian(f"jacobian probe {i} hit a singularity") from exc
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFiniteJacobian(f"jacobian probe {i} produced a non-finite value")
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols)


def estimate_flow(
    x: np.ndarray,
    xi_c: np.ndarray,
    theta_hat: np.ndarray,
    plant: AffinePlant,
    ball: ParamBall,
    grad_potential: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> np.ndarray:
    """Projected gradient adaptation law for the parameter estimate."""
    drive = plant.disturbance_matrix(x, xi_c).T @ grad_potential(x, xi_c)
    return ball.gain @ project_rate(drive, theta_hat, ball)


@dataclass(frozen=True)
class AdaptiveController(ControllerData):
    """Adaptive lift of a nominal synergistic controller.

    Carries the construction data so the backstepping lift (and the
    monitors) can reuse it.
    """

    nominal: ControllerData
    plant: AffinePlant
    ball: ParamBall
    grad_potential: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def split(self, xi_c1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.nominal.n_state
        return xi_c1[:n], xi_c1[n:]


def lift_adaptive(
    nominal: ControllerData,
    plant: AffinePlant,
    ball: ParamBall,
    grad_potential: Optional[Callable] = None,
) -> AdaptiveController:
    """Build the adaptive controller from a nominally synergistic one.

    The lifted controller state stacks the nominal controller state and
    the parameter estimate.  Feedback subtracts the matched compensation
    ``matched_matrix @ estimate``; the estimate flows with the projected
    gradient law; jumps reset the nominal part to a potential minimizer
    and the estimate to its ball projection.  The lifted potential is
    the worst case over admissible parameters, so the generic candidate
    machinery reproduces the implementable (robust) gap, never the
    true-parameter gap.

    ``grad_potential`` supplies the nominal potential's gradient in the
    plant state; central finite differences are used when omitted.
    """
    if grad_potential is None:
        def grad_potential(x, xi_c, _v=nominal.potential):
            return potential_gradient_fd(_v, x, xi_c)

    n_nom = nominal.n_state

    def _split(xi_c1):
        return xi_c1[:n_nom], xi_c1[n_nom:]

    def feedback(x, xi_c1):
        xi_c, th = _split(xi_c1)
        return nominal.feedback(x, xi_c) - plant.matched_matrix(x, xi_c) @ th

    def potential(x, xi_c1):
        xi_c, th = _split(xi_c1)
        v0 = float(nominal.potential(x, xi_c))
        if math.isinf(v0):
            return math.inf
        return v0 + 0.5 * ball_distance(th, ball)[0]

    def candidates(x, xi_c1):
        xi_c, th = _split(xi_c1)
        target = reset_estimate(th, ball)
        report = min_over_candidates(nominal, x, xi_c)
        return [
            np.concatenate([np.asarray(g, dtype=float), target])
            for g in report.minimizers
        ]

    def controller_flow(x, xi_c1):
        xi_c, th = _split(xi_c1)
        return np.concatenate(
            [
                np.asarray(nominal.controller_flow(x, xi_c), dtype=float),
                estimate_flow(x, xi_c, th, plant, ball, grad_potential),
            ]
        )

    def margin(x, xi_c1):
        xi_c, _ = _split(xi_c1)
        return nominal.margin(x, xi_c)

    return AdaptiveController(
        n_state=n_nom + ball.dim,
        feedback=feedback,
        potential=potential,
        candidates=candidates,
        controller_flow=controller_flow,
        margin=margin,
        nominal=nominal,
        plant=plant,
        ball=ball,
        grad_potential=grad_potential,
    )


def _backstep_terms(x, xi_c2, adaptive: AdaptiveController, gains: BackstepGains, jac):
    """Shared evaluation for the backstepping drive and input rate."""
    n1 = adaptive.n_state
    xi_c1, u = xi_c2[:n1], xi_c2[n1:]
    xi_c, th = adaptive.split(xi_c1)
    plant = adaptive.plant
    ball = adaptive.ball

    kappa1 = adaptive.feedback(x, xi_c1)
    u_err = u - kappa1
    jac_k1 = jac(x, xi_c1)
    grad_v = adaptive.grad_potential(x, xi_c)
    psi_theta = plant.disturbance_matrix(x, xi_c)

    drive = psi_theta.T @ grad_v - psi_theta.T @ (
        jac_k1.T @ (gains.gain_inv @ u_err)
    )
    projected = project_rate(drive, th, ball)
    estimate_rate = ball.gain @ projected

    input_rate = (
        -plant.matched_matrix(x, xi_c) @ estimate_rate
        - gains.damping * u_err
        - gains.gain @ (plant.input_matrix(x, xi_c).T @ grad_v)
        + jac_k1 @ plant.f(x, xi_c, u, th)
    )
    return xi_c, th, u, drive, estimate_rate, input_rate


def backstep_drive(
    x: np.ndarray,
    xi_c2: np.ndarray,
    adaptive: AdaptiveController,
    gains: BackstepGains,
    jac: Optional[Callable] = None,
) -> np.ndarray:
    """Adaptation drive for the backstepping controller.

    Reduces to the plain gradient drive when the input sits on the
    adaptive feedback; otherwise subtracts the input-error correction
    through the feedback Jacobian.
    """
    if jac is None:
        jac = lambda xx, xi1: feedback_jacobian_fd(adaptive.feedback, xx, xi1)
    return _backstep_terms(x, xi_c2, adaptive, gains, jac)[3]


def input_flow(
    x: np.ndarray,
    xi_c2: np.ndarray,
    adaptive: AdaptiveController,
    gains: BackstepGains,
    jac: Optional[Callable] = None,
) -> np.ndarray:
    """Designed rate of the held input.

    Combines damping toward the adaptive feedback, the potential-descent
    coupling term, compensation of the estimate motion, and feedforward
    of the feedback's drift along the certainty-equivalent model (the
    true parameter replaced by the estimate).
    """
    if jac is None:
        jac = lambda xx, xi1: feedback_jacobian_fd(adaptive.feedback, xx, xi1)
    return _backstep_terms(x, xi_c2, adaptive, gains, jac)[5]


@dataclass(frozen=True)
class BackstepController(ControllerData):
    """Backstepping lift of an adaptive synergistic controller."""

    adaptive: AdaptiveController
    gains: BackstepGains
    feedback_jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def split(self, xi_c2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.adaptive.n_state
        return xi_c2[:n], xi_c2[n:]


def lift_backstep(
    adaptive: AdaptiveController,
    gains: BackstepGains,
    jac: Optional[Callable] = None,
    controller_jacobian: Optional[Callable] = None,
) -> BackstepController:
    """Build the backstepping controller from an adaptive one.

    The controller state gains the input as a component; its rate is
    :func:`input_flow` and the estimate flows with the corrected drive.
    Jump candidates pair each adaptive candidate with the input value
    the adaptive feedback would command there, so the input error is
    reset to exactly zero at every jump and the implementable gap gains
    the term ``0.5 * u_err^T gain^{-1} u_err``.

    ``jac`` supplies the x-Jacobian of the adaptive feedback (finite
    differences when omitted).  ``controller_jacobian`` supplies the
    feedback's Jacobian in the nominal controller state; it may be
    omitted only when the nominal controller state does not flow, which
    is verified at every flow evaluation.
    """
    if jac is None:
        def jac(x, xi_c1):
            return feedback_jacobian_fd(adaptive.feedback, x, xi_c1)

    n1 = adaptive.n_state
    n_u = adaptive.plant.n_u

    def _split(xi_c2):
        return xi_c2[:n1], xi_c2[n1:]

    def feedback(x, xi_c2):
        return xi_c2[n1:]

    def potential(x, xi_c2):
        xi_c1, u = _split(xi_c2)
        v1 = float(adaptive.potential(x, xi_c1))
        if math.isinf(v1):
            return math.inf
        u_err = u - adaptive.feedback(x, xi_c1)
        return v1 + 0.5 * float(u_err @ gains.gain_inv @ u_err)

    def candidates(x, xi_c2):
        xi_c1, _ = _split(xi_c2)
        return [
            np.concatenate([g1, np.asarray(adaptive.feedback(x, g1), dtype=float)])
            for g1 in adaptive.candidates(x, xi_c1)
        ]

    def controller_flow(x, xi_c2):
        xi_c1, _ = _split(xi_c2)
        xi_c, _, _, _, estimate_rate, input_rate = _backstep_terms(
            x, xi_c2, adaptive, gains, jac
        )
        f_c = np.asarray(adaptive.nominal.controller_flow(x, xi_c), dtype=float)
        if controller_jacobian is not None:
            input_rate = input_rate + controller_jacobian(x, xi_c1) @ f_c
        elif np.any(f_c != 0.0):
            raise ValueError(
                "controller_jacobian is required when the nominal "
                "controller state flows"
            )
        return np.concatenate([f_c, estimate_rate, input_rate])

    def margin(x, xi_c2):
        xi_c1, _ = _split(xi_c2)
        return adaptive.margin(x, xi_c1)

    return BackstepController(
        n_state=n1 + n_u,
        feedback=feedback,
        potential=potential,
        candidates=candidates,
        controller_flow=controller_flow,
        margin=margin,
        adaptive=adaptive,
        gains=gains,
        feedback_jacobian=jac,
    )


def adaptive_true_potential(
    ctrl: AdaptiveController, theta: np.ndarray
) -> Callable[[np.ndarray, np.ndarray], float]:
    """True-parameter Lyapunov function of the adaptive closed loop.

    Not implementable as controller data (it depends on the unknown
    parameter); used only by monitors and tests.
    """
    theta = np.asarray(theta, dtype=float)
    gain_inv = ctrl.ball.gain_inv
    nominal = ctrl.nominal

    def value(x, xi_c1):
        xi_c, th = ctrl.split(xi_c1)
        v0 = float(nominal.potential(x, xi_c))
        if math.isinf(v0):
            return math.inf
        diff = theta - th
        return v0 + 0.5 * float(diff @ gain_inv @ diff)

    return value


def backstep_true_potential(
    ctrl: BackstepController, theta: np.ndarray
) -> Callable[[np.ndarray, np.ndarray], float]:
    """True-parameter Lyapunov function of the backstepping closed loop."""
    inner = adaptive_true_potential(ctrl.adaptive, theta)
    gain_inv = ctrl.gains.gain_inv

    def value(x, xi_c2):
        xi_c1, u = ctrl.split(xi_c2)
        v1 = inner(x, xi_c1)
        if math.isinf(v1):
            return math.inf
        u_err = u - ctrl.adaptive.feedback(x, xi_c1)
        return v1 + 0.5 * float(u_err @ gain_inv @ u_err)

    return value
