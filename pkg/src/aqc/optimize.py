"""Angle optimizers: gradient descent, Nesterov momentum, group-LASSO prox.

All three share one convention: ``alpha`` is the step size, the stop test is
the infinity norm of the gradient, and a step that raises the objective is
rejected and retried with half the step. Halving stops at
``1/smoothness_bound``, where descent is guaranteed in exact arithmetic, so
steps at that size are always taken. After a streak of accepted steps the
step doubles again, never beyond its starting value. With a fixed
``alpha <= 1/smoothness_bound`` none of this ever triggers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields

import numpy as np

from .circuit import Structure, assemble, group_norms
from .gradient import cost, cost_and_gradient, smoothness_bound
from .structures import tlb

log = logging.getLogger(__name__)

METHODS = ("gd", "nesterov", "prox")
TWO_PI = 2 * np.pi
# R(t + 2 pi) = -R(t), so the angle map is 4 pi periodic
PERIOD = 4 * np.pi
MAX_STEP_DOUBLINGS = 30
REGROW_AFTER = 20
# relative slack for objective comparisons, a few ulps of the objective
ROUNDING = 1e-13


class OptimizationError(RuntimeError):
    """The cost became non-finite."""


@dataclass
class OptimizerConfig:
    method: str = "nesterov"
    step: float | str = "auto"
    tol: float = 1e-6
    max_iters: int = 50_000
    lam: float = 0.0
    seed: int = 0
    record_history: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.step != "auto":
            self.step = float(self.step)
            if not self.step > 0:
                raise ValueError("step must be positive or 'auto'")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be >= 1")
        self.max_iters = int(self.max_iters)
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(self.lam)
        self.seed = int(self.seed)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class OptimizeResult:
    theta: np.ndarray
    final_cost: float
    grad_norm: float
    iterations: int
    converged: bool
    zero_groups: tuple[int, ...] = ()
    step: float = 0.0
    objective: float = 0.0
    history: list[float] = field(default_factory=list)


def random_angles(s: Structure, seed) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, TWO_PI, s.num_params)


def _finite(f: float, where: str) -> float:
    if not np.isfinite(f):
        raise OptimizationError(f"non-finite cost {f} during {where}")
    return f


def auto_step(s: Structure, theta: np.ndarray, u: np.ndarray) -> float:
    """Start at ``1/bound`` and double while the sufficient-decrease test passes."""
    alpha = 1.0 / smoothness_bound(s.n, len(s))
    f0, g = cost_and_gradient(s, theta, u)
    gg = float(g @ g)
    if gg == 0.0:
        return alpha
    for _ in range(MAX_STEP_DOUBLINGS):
        trial = 2 * alpha
        if cost(s, theta - trial * g, u) > f0 - 0.5 * trial * gg:
            break
        alpha = trial
    return alpha


def _setup(s: Structure, u, cfg: OptimizerConfig, theta0):
    u = np.asarray(u, dtype=complex)
    if theta0 is None:
        theta = random_angles(s, cfg.seed)
    else:
        theta = np.array(theta0, dtype=float)
        if theta.shape != (s.num_params,):
            raise ValueError(f"theta0 has shape {theta.shape}, need ({s.num_params},)")
    alpha = auto_step(s, theta, u) if cfg.step == "auto" else cfg.step
    return u, theta, alpha


class _StepControl:
    def __init__(self, s: Structure, alpha: float):
        self.alpha = alpha
        self.top = alpha
        self.floor = min(alpha, 1.0 / smoothness_bound(s.n, len(s)))
        self.streak = 0

    @staticmethod
    def worse(new: float, old: float) -> bool:
        return new > old + ROUNDING * max(1.0, abs(old))

    def shrink(self) -> bool:
        """Halve the step; False if it is already at the floor."""
        self.streak = 0
        if self.alpha <= self.floor:
            return False
        self.alpha = max(self.alpha / 2, self.floor)
        return True

    def accepted(self) -> None:
        self.streak += 1
        if self.streak >= REGROW_AFTER and self.alpha < self.top:
            self.alpha = min(2 * self.alpha, self.top)
            self.streak = 0


def _wrap(theta: np.ndarray) -> np.ndarray:
    return np.mod(theta, PERIOD)


def gd(s: Structure, u, cfg: OptimizerConfig, theta0=None) -> OptimizeResult:
    """Plain gradient descent ``theta <- theta - alpha grad f``."""
    u, theta, alpha = _setup(s, u, cfg, theta0)
    step = _StepControl(s, alpha)
    f, g = cost_and_gradient(s, theta, u)
    _finite(f, "gd")
    history = [f] if cfg.record_history else []
    it = 0
    while np.max(np.abs(g), initial=0.0) > cfg.tol and it < cfg.max_iters:
        it += 1
        trial = theta - step.alpha * g
        ft, gt = cost_and_gradient(s, trial, u)
        _finite(ft, "gd")
        if step.worse(ft, f) and step.shrink():
            continue
        step.accepted()
        theta, f, g = trial, ft, gt
        if cfg.record_history:
            history.append(f)
    return _finish(s, u, theta, f, g, it, cfg, step.alpha, history)


def nesterov(s: Structure, u, cfg: OptimizerConfig, theta0=None) -> OptimizeResult:
    """Nesterov momentum with function-value restart.

    ``y = theta_t + (k-1)/(k+2) (theta_t - theta_{t-1})`` where ``k`` counts
    steps since the last restart. If the new iterate costs more than the
    current one the momentum is dropped; if a momentum-free step still fails
    the step size is halved.
    """
    u, theta, alpha = _setup(s, u, cfg, theta0)
    step = _StepControl(s, alpha)
    prev = theta
    f = _finite(cost(s, theta, u), "nesterov")
    history = [f] if cfg.record_history else []
    k = 1
    it = 0
    while True:
        y = theta + ((k - 1) / (k + 2)) * (theta - prev) if k > 1 else theta
        fy, gy = cost_and_gradient(s, y, u)
        _finite(fy, "nesterov")
        if np.max(np.abs(gy), initial=0.0) <= cfg.tol:
            return _finish(s, u, y, fy, gy, it, cfg, step.alpha, history)
        if it >= cfg.max_iters:
            break
        it += 1
        trial = y - step.alpha * gy
        ft = _finite(cost(s, trial, u), "nesterov")
        if step.worse(ft, f):
            if k > 1:
                k = 1
                prev = theta
                continue
            if step.shrink():
                continue
        step.accepted()
        prev, theta, f = theta, trial, ft
        k += 1
        if cfg.record_history:
            history.append(f)
    f, g = cost_and_gradient(s, theta, u)
    return _finish(s, u, theta, f, g, it, cfg, step.alpha, history)


def _finish(s, u, theta, f, g, it, cfg, alpha, history) -> OptimizeResult:
    gnorm = float(np.max(np.abs(g), initial=0.0))
    converged = gnorm <= cfg.tol
    if converged and len(s) >= tlb(s.n):
        spread = eigenphase_spread(assemble(s, theta), u)
        log.debug("stationary point: eigenphase spread of V^dag U = %.3e", spread)
    return OptimizeResult(
        theta=_wrap(theta),
        final_cost=float(f),
        grad_norm=gnorm,
        iterations=it,
        converged=converged,
        step=float(alpha),
        objective=float(f),
        history=history,
    )


def eigenphase_spread(v: np.ndarray, u: np.ndarray) -> float:
    """Largest angular distance of an eigenvalue of ``V^dag U`` from their mean phase.

    Zero when ``V^dag U`` is a multiple of the identity.
    """
    w = np.linalg.eigvals(v.conj().T @ u)
    mean = np.angle(np.sum(w))
    return float(np.max(np.abs(np.angle(w * np.exp(-1j * mean)))))


# --- group LASSO ------------------------------------------------------------


def penalty(s: Structure, theta: np.ndarray, lam: float) -> float:
    return lam * float(np.sum(group_norms(s.n, theta)))


def block_soft_threshold(groups: np.ndarray, tau: float) -> np.ndarray:
    """Row-wise ``x / ||x|| * max(||x|| - tau, 0)``; killed rows are exact zeros."""
    norms = np.linalg.norm(groups, axis=1, keepdims=True)
    keep = norms > tau
    scale = np.zeros_like(norms)
    np.divide(norms - tau, norms, out=scale, where=keep)
    return np.where(keep, groups * scale, 0.0)


def canonicalize(s: Structure, theta: np.ndarray) -> np.ndarray:
    """Shift penalized angles into ``(-pi, pi]`` without changing V.

    Each ``2 pi`` shift negates one rotation; an odd number of shifts is
    undone by adding ``2 pi`` to the first initial-layer angle.
    """
    head = 3 * s.n
    out = theta.copy()
    tail = out[head:]
    shifts = np.ceil((tail - np.pi) / TWO_PI)
    out[head:] = tail - TWO_PI * shifts
    if int(np.sum(shifts)) % 2:
        out[0] += TWO_PI
    return out


def prox_group_lasso(s: Structure, u, cfg: OptimizerConfig, theta0=None) -> OptimizeResult:
    """Proximal gradient on ``f + lam * sum_l ||theta_l||``.

    Gradient step on every angle, then block soft-thresholding of each unit's
    four angles. Runs the full iteration budget since the objective is not
    smooth. With ``lam > 0`` the unit angles are first mapped into
    ``(-pi, pi]``, which leaves V unchanged and never raises the penalty.
    """
    u, theta, alpha = _setup(s, u, cfg, theta0)
    step = _StepControl(s, alpha)
    lam = cfg.lam
    head = 3 * s.n
    f, g = cost_and_gradient(s, theta, u)
    _finite(f, "prox")
    obj = f + penalty(s, theta, lam)
    history = [obj] if cfg.record_history else []
    it = 0
    while it < cfg.max_iters:
        it += 1
        trial = theta - step.alpha * g
        if lam > 0:
            trial = canonicalize(s, trial)
            trial[head:] = block_soft_threshold(
                trial[head:].reshape(-1, 4), step.alpha * lam
            ).ravel()
        ft, gt = cost_and_gradient(s, trial, u)
        _finite(ft, "prox")
        objt = ft + penalty(s, trial, lam)
        if step.worse(objt, obj) and step.shrink():
            continue
        step.accepted()
        theta, f, g, obj = trial, ft, gt, objt
        if cfg.record_history:
            history.append(obj)
    theta = theta.copy()
    if lam == 0:
        theta = _wrap(theta)
    else:
        theta[:head] = _wrap(theta[:head])
    zero = tuple(
        ell + 1
        for ell, grp in enumerate(theta[head:].reshape(-1, 4))
        if not np.any(grp)
    )
    gnorm = float(np.max(np.abs(g), initial=0.0))
    return OptimizeResult(
        theta=theta,
        final_cost=float(f),
        grad_norm=gnorm,
        iterations=it,
        converged=False,
        zero_groups=zero,
        step=float(step.alpha),
        objective=float(obj),
        history=history,
    )


def optimize(s: Structure, u, cfg: OptimizerConfig, theta0=None) -> OptimizeResult:
    """Dispatch on ``cfg.method``."""
    return {"gd": gd, "nesterov": nesterov, "prox": prox_group_lasso}[cfg.method](
        s, u, cfg, theta0
    )
