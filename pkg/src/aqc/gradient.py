"""Cost and analytic gradient of ``f(theta) = 0.5 ||V(theta) - U||_F^2``.

Each partial derivative of ``V`` is ``V`` with one local factor replaced by
its derivative, so ``df/dtheta_k = -Re Tr[U^dag A_i dG_i B_i]`` where ``B_i``
is the product of the layers before layer ``i`` and ``A_i`` the product
after it. One forward sweep stores every ``B_i``, one backward sweep stores
every ``A_i^dag U``; the traces then reduce to gathers over the local block
of each layer. That is O(N d^3) flops and O(N d^2) memory for N = n + L
layers, instead of rebuilding V for every angle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import (
    Structure,
    _check_theta,
    initial_locals,
    layer_indices,
    scatter_blocks,
    unit_locals,
)

FD_STEP = 1e-5
FD_STEP2 = 1e-4


@dataclass
class GradientWorkspace:
    """Per-call intermediates of the gradient sweep.

    ``suffix[i]`` is the product of layers ``0..i-1`` (what has already been
    applied before split point ``i``); ``prefix[i]`` is the product of layers
    ``i..N-1``. ``prefix[i] @ suffix[i]`` equals V at every split point.
    """

    layers: np.ndarray  # (N, d, d)
    suffix: np.ndarray  # (N + 1, d, d)
    adjoint: np.ndarray  # (N + 1, d, d), prefix[i]^dag @ U
    target: np.ndarray

    @property
    def prefix(self) -> np.ndarray:
        return self.target @ self.adjoint.conj().transpose(0, 2, 1)

    @property
    def matrix(self) -> np.ndarray:
        return self.suffix[-1]


def _layers_with_derivatives(s: Structure, theta: np.ndarray):
    n = s.n
    d = 2**n
    single_idx, pair_idx = layer_indices(n, s.units)
    u, du = initial_locals(theta[: 3 * n].reshape(n, 3), with_derivatives=True)
    full = [scatter_blocks(u, single_idx, d)]
    dg = None
    if s.units:
        g, dg = unit_locals(theta[3 * n :].reshape(-1, 4), with_derivatives=True)
        full.append(scatter_blocks(g, pair_idx, d))
    return np.concatenate(full), du, dg, single_idx, pair_idx


def _environment(x: np.ndarray, index: np.ndarray) -> np.ndarray:
    """``E[l, a, b] = sum_r x[l, P[l,b,r], P[l,a,r]]`` for a stack of layers."""
    layer = np.arange(x.shape[0])[:, None, None, None]
    return x[layer, index[:, None, :, :], index[:, :, None, :]].sum(axis=-1)


def cost(s: Structure, theta, u: np.ndarray) -> float:
    """Frobenius cost alone (forward sweep only)."""
    theta = _check_theta(s, theta)
    from .circuit import layer_stack

    v = np.eye(2**s.n, dtype=complex)
    for g in layer_stack(s, theta):
        v = g @ v
    return float(v.shape[0] - np.vdot(u, v).real)


def cost_and_gradient(
    s: Structure, theta, u: np.ndarray, return_workspace: bool = False
):
    """Cost and full gradient at ``theta`` against target ``u``.

    Returns ``(cost, grad)``, or ``(cost, grad, workspace)`` when asked.
    """
    theta = _check_theta(s, theta)
    u = np.asarray(u, dtype=complex)
    n = s.n
    d = 2**n
    if u.shape != (d, d):
        raise ValueError(f"target has shape {u.shape}, structure needs ({d}, {d})")
    layers, du, dg, single_idx, pair_idx = _layers_with_derivatives(s, theta)
    count = layers.shape[0]

    suffix = np.empty((count + 1, d, d), dtype=complex)
    suffix[0] = np.eye(d)
    for i in range(count):
        np.matmul(layers[i], suffix[i], out=suffix[i + 1])
    v = suffix[count]
    f = float(d - np.vdot(u, v).real)

    adjoint = np.empty((count + 1, d, d), dtype=complex)
    adjoint[count] = u
    for i in range(count - 1, -1, -1):
        np.matmul(layers[i].conj().T, adjoint[i + 1], out=adjoint[i])

    # x[i] = B_i W_{i+1}^dag, so Tr[W^dag dG B] = sum_ab dg_ab x[P_b, P_a]
    x = suffix[:count] @ adjoint[1:].conj().transpose(0, 2, 1)
    grad = np.empty(s.num_params)
    env = _environment(x[:n], single_idx)
    grad[: 3 * n] = -np.einsum("qtab,qab->qt", du, env).real.ravel()
    if s.units:
        env = _environment(x[n:], pair_idx)
        grad[3 * n :] = -np.einsum("ltab,lab->lt", dg, env).real.ravel()
    if return_workspace:
        return f, grad, GradientWorkspace(layers, suffix, adjoint, u)
    return f, grad


def fd_gradient(s: Structure, theta, u: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central finite-difference gradient; independent of the analytic sweep."""
    from .circuit import assemble
    from .matrixcore import frobenius_cost

    theta = _check_theta(s, theta)
    out = np.empty_like(theta)
    for k in range(theta.size):
        step = np.zeros_like(theta)
        step[k] = h
        fp = frobenius_cost(assemble(s, theta + step), u)
        fm = frobenius_cost(assemble(s, theta - step), u)
        out[k] = (fp - fm) / (2 * h)
    return out


def fd_hessian(s: Structure, theta, u: np.ndarray, h: float = FD_STEP2) -> np.ndarray:
    """Symmetrized Hessian from central differences of the analytic gradient."""
    theta = _check_theta(s, theta)
    p = theta.size
    hess = np.empty((p, p))
    for k in range(p):
        step = np.zeros(p)
        step[k] = h
        gp = cost_and_gradient(s, theta + step, u)[1]
        gm = cost_and_gradient(s, theta - step, u)[1]
        hess[:, k] = (gp - gm) / (2 * h)
    return 0.5 * (hess + hess.T)


def hessian_diagonal(s: Structure, theta, u: np.ndarray, h: float = FD_STEP2) -> np.ndarray:
    """Second derivatives along each coordinate by central differences of f."""
    theta = _check_theta(s, theta)
    f0 = cost(s, theta, u)
    out = np.empty_like(theta)
    for k in range(theta.size):
        step = np.zeros_like(theta)
        step[k] = h
        out[k] = (cost(s, theta + step, u) - 2 * f0 + cost(s, theta - step, u)) / h**2
    return out


def hessian_diagonal_check(s: Structure, theta, u: np.ndarray, h: float = FD_STEP2) -> float:
    """Largest gap between the measured diagonal curvature and ``(d - f) / 4``.

    Every rotation satisfies ``R'' = -R/4``, so each diagonal Hessian entry is
    ``Re Tr[V^dag U] / 4 = d/4 - ||V - U||_F^2 / 8``.
    """
    d = 2**s.n
    predicted = d / 4 - cost(s, theta, u) / 4
    return float(np.max(np.abs(hessian_diagonal(s, theta, u, h) - predicted)))


def smoothness_bound(n: int, length: int) -> float:
    """Bound on the Hessian spectral radius, ``(3n + 4L - 3/4) 2^n``."""
    if n < 1 or length < 0:
        raise ValueError("need n >= 1 and L >= 0")
    return (3 * n + 4 * length - 0.75) * 2**n
