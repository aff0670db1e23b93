"""Bolus transport under high-frequency peristaltic pulses.

Oscillatory system (pulse period ``eps``)::

    x''  = (1 - x'/c) g~((t - x/c)/eps, 1 - x'/c, x, y) - k(t) x'
    y'   = d(x, y)

and its averaged limit, where ``g~`` is replaced by its mean over one phase
period ``Fbar(V, X, Y) = int_0^1 g~(s, V, X, Y) ds``.  Both are integrated
with the same fixed-step classical Runge-Kutta scheme.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInitialConditionError, InvalidParameterError, StepSizeError
from .io import write_csv

# fast phase must be resolved by at least this many steps per pulse
STEPS_PER_PULSE = 20
AVERAGED_MIN_STEPS = 10_000


@dataclass
class BolusTrajectory:
    times: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    y: np.ndarray
    eps: float

    def bound_violation(self, c):
        """Largest violation of ``0 <= x' <= c`` and ``0 <= x <= c t``."""
        return max(
            float(np.max(np.maximum(-self.xdot, 0.0))),
            float(np.max(np.maximum(self.xdot - c, 0.0))),
            float(np.max(np.maximum(-self.x, 0.0))),
            float(np.max(np.maximum(self.x - c * self.times, 0.0))),
        )

    def rows(self):
        for i, t in enumerate(self.times):
            yield (t, self.x[i], self.xdot[i], *self.y[i])

    def to_csv(self, path):
        header = ["t", "x", "xdot"] + [f"y{i + 1}" for i in range(self.y.shape[1])]
        return write_csv(path, header, self.rows())


@dataclass(frozen=True)
class AveragedForce:
    fbar: Callable
    quadrature_nodes: int

    def __call__(self, V, X, Y):
        return self.fbar(V, X, Y)


def _simpson_weights(n):
    if n < 3:
        raise InvalidParameterError("quadrature_nodes must be >= 3")
    if n % 2 == 0:
        raise InvalidParameterError("composite Simpson needs an odd number of nodes")
    h = 1.0 / (n - 1)
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3.0


def average_force(model, V, X, Y, quadrature_nodes=257):
    """Phase average of ``g~`` by composite Simpson quadrature over [0, 1]."""
    w = _simpson_weights(quadrature_nodes)
    if V <= 0:
        return 0.0
    s = np.linspace(0.0, 1.0, quadrature_nodes)
    return float(w @ np.asarray(model.g_tilde(s, V, X, Y), dtype=float))


def averaged_force(model, quadrature_nodes=257):
    w = _simpson_weights(quadrature_nodes)
    s = np.linspace(0.0, 1.0, quadrature_nodes)

    def fbar(V, X, Y):
        if V <= 0:
            return 0.0
        return float(w @ np.asarray(model.g_tilde(s, V, X, Y), dtype=float))

    return AveragedForce(fbar, quadrature_nodes)


def _step_count(T, dt):
    if not T > 0 or not dt > 0:
        raise InvalidParameterError("T and dt must be positive")
    n = int(round(T / dt))
    if n == 0 or abs(n * dt - T) > 1e-9 * T:
        n = math.ceil(T / dt)
    return n


def _check_initial(model, v0, y0, kin):
    c = model.wave_speed_c
    if not 0 <= v0 < c:
        raise InvalidInitialConditionError(
            f"need 0 <= v0 < c for the bounded-velocity result, got v0={v0}, c={c}")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if y0.size != kin.dimension_K:
        raise InvalidParameterError(f"y0 has {y0.size} entries, kinetics expects {kin.dimension_K}")
    return y0


def _rk4(rhs, state0, T, n):
    dt = T / n
    out = np.empty((n + 1, state0.size))
    out[0] = state0
    z = state0.copy()
    for i in range(n):
        t = i * dt
        k1 = rhs(t, z)
        k2 = rhs(t + 0.5 * dt, z + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, z + 0.5 * dt * k2)
        k4 = rhs(t + dt, z + dt * k3)
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = z
    return np.linspace(0.0, T, n + 1), out


def _trajectory(times, states, eps):
    return BolusTrajectory(times, states[:, 0].copy(), states[:, 1].copy(), states[:, 2:].copy(), eps)


def integrate_oscillatory(model, kin, v0, y0, T, dt):
    eps = model.pulse_period_eps
    if dt > eps / STEPS_PER_PULSE * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} does not resolve the pulse period (need dt <= eps/{STEPS_PER_PULSE})")
    y0 = _check_initial(model, v0, y0, kin)
    model.check_friction(T)
    c, k, d = model.wave_speed_c, model.friction_k, kin.rate_d

    def rhs(t, z):
        x, xd, y = z[0], z[1], z[2:]
        V = 1.0 - xd / c
        acc = -k(t) * xd
        if V > 0:
            acc += V * float(model.g_tilde((t - x / c) / eps, V, x, y))
        return np.concatenate(([xd, acc], d(x, y)))

    n = _step_count(T, dt)
    times, states = _rk4(rhs, np.concatenate(([0.0, v0], y0)), T, n)
    return _trajectory(times, states, eps)


def integrate_averaged(model, kin, fbar, v0, y0, T, dt):
    if dt > T / AVERAGED_MIN_STEPS * (1 + 1e-12):
        raise StepSizeError(f"averaged runs need dt <= T/{AVERAGED_MIN_STEPS}")
    y0 = _check_initial(model, v0, y0, kin)
    model.check_friction(T)
    c, k, d = model.wave_speed_c, model.friction_k, kin.rate_d

    def rhs(t, z):
        x, xd, y = z[0], z[1], z[2:]
        V = 1.0 - xd / c
        acc = V * fbar(V, x, y) - k(t) * xd
        return np.concatenate(([xd, acc], d(x, y)))

    n = _step_count(T, dt)
    times, states = _rk4(rhs, np.concatenate(([0.0, v0], y0)), T, n)
    return _trajectory(times, states, 0.0)


@dataclass
class ConvergenceTable:
    eps: list
    err_x: list
    err_xdot: list
    order_x: list
    order_xdot: list
    dt: float
    flags: list = field(default_factory=list)

    @property
    def monotone(self):
        return not self.flags

    def rows(self):
        for i in range(len(self.eps)):
            yield (self.eps[i], self.err_x[i], self.err_xdot[i], self.order_x[i], self.order_xdot[i])

    def to_csv(self, path):
        return write_csv(path, ["eps", "err_x", "err_xdot", "order_x", "order_xdot"], self.rows())


def _orders(eps, err):
    orders = [float("nan")]
    for i in range(1, len(eps)):
        if err[i - 1] > 0 and err[i] > 0:
            orders.append(math.log(err[i - 1] / err[i]) / math.log(eps[i - 1] / eps[i]))
        else:
            orders.append(float("nan"))
    return orders


def convergence_study(model, kin, v0, y0, T, eps_list, quadrature_nodes=257, dt=None):
    """C1 distance between pulsed and averaged trajectories for decreasing ``eps``.

    All runs share one time grid; the sup norm is taken over it.  A pair of
    successive errors that fails to decrease is recorded in ``flags`` (usually
    a sign of an under-resolved time step), it does not raise.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise InvalidParameterError("eps_list needs at least 3 entries")
    if any(e >= 1 or e <= 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise InvalidParameterError("eps_list must be decreasing values in (0, 1)")
    if dt is None:
        dt = min(eps_list[-1] / STEPS_PER_PULSE, T / AVERAGED_MIN_STEPS)
    ref = integrate_averaged(model, kin, averaged_force(model, quadrature_nodes), v0, y0, T, dt)
    err_x, err_xd = [], []
    for eps in eps_list:
        traj = integrate_oscillatory(model.with_eps(eps), kin, v0, y0, T, dt)
        err_x.append(float(np.max(np.abs(traj.x - ref.x))))
        err_xd.append(float(np.max(np.abs(traj.xdot - ref.xdot))))
    flags = []
    for i in range(1, len(eps_list)):
        for name, err in (("x", err_x), ("xdot", err_xd)):
            if not err[i] < err[i - 1]:
                flags.append(f"error in {name} did not decrease from eps={eps_list[i - 1]} to eps={eps_list[i]}")
    return ConvergenceTable(eps_list, err_x, err_xd, _orders(eps_list, err_x), _orders(eps_list, err_xd),
                            dt, flags)


def standard_scenario():
    """Pinned fixture shared by the transport acceptance checks.

    c = 1, k = 1, v0 = 0.3, one species decaying at rate 0.1 from y0 = 1,
    amplitude law (c0, c1, a, b) = (1, 1, 1, 0.1), shape 2 sin^2(pi s), T = 5.
    Returns ``(model, kinetics, v0, y0, T)`` with ``eps = 0.01``.
    """
    from .models import PulseModel, linear_decay_kinetics

    model = PulseModel(1.0, 0.01, amplitude_params=(1.0, 1.0, 1.0, 0.1))
    return model, linear_decay_kinetics([0.1]), 0.3, np.array([1.0]), 5.0
