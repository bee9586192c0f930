"""Nonlinear mean-field qubit dynamics.

The state obeys ``d/dt psi = -i H_eff(psi) psi`` with

    H_eff = V01 sigma_x + (Bz + g z) sigma_z,   z = |psi0|^2 - |psi1|^2

(hbar = 1).  On the Bloch sphere this is ``dr/dt = 2 h x r`` with
``h = (V01, 0, Bz + g z)``: the ``g`` term is a z-axis torsion whose rate is
proportional to the state's own height and which vanishes on the equator.

Integration is classical fixed-step RK4 without renormalization, so the
norm drift stays visible as an accuracy diagnostic.  Rotations use the
convention ``R_n(angle) = exp(-i angle sigma_n / 2)``; a positive angle turns
the Bloch vector counter-clockwise about ``n``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .errors import InvalidStateError, StepSizeError
from .qubit import (
    BLOCH_TOL,
    SIGMA_X,
    SIGMA_Z,
    BlochVector,
    QubitAmplitudes,
    check_normalized,
)

#: Default step is this fraction of the fastest rate in the problem.
DEFAULT_DT_FRACTION = 1e-3
#: Largest accepted step as a fraction of the fastest rate.
MAX_DT_FRACTION = 0.1


class EmptyScheduleWarning(UserWarning):
    pass


@dataclass(frozen=True, slots=True)
class EffectiveParams:
    """Coefficients of ``H_eff``: barrier coupling, bias and torsion strength."""

    v01: float
    bz: float
    g: float

    def __post_init__(self):
        for name in ("v01", "bz", "g"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def rate(self) -> float:
        return max(abs(self.v01), abs(self.bz), abs(self.g))


@dataclass(frozen=True)
class FeedbackRule:
    """State-dependent control law queried at every RK stage.

    ``bound`` is an upper bound on the rates the law can produce; it sets
    the default step size.
    """

    name: str
    law: Callable[[QubitAmplitudes], EffectiveParams]
    bound: float

    def __call__(self, q: QubitAmplitudes) -> EffectiveParams:
        return self.law(q)


Control = Union[EffectiveParams, FeedbackRule]


@dataclass(frozen=True)
class Segment:
    duration: float
    params: Control

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"segment duration must be positive and finite, got {self.duration!r}")
        if not isinstance(self.params, (EffectiveParams, FeedbackRule)):
            raise TypeError("segment params must be EffectiveParams or FeedbackRule")


@dataclass(frozen=True)
class ControlSchedule:
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @classmethod
    def constant(cls, params: Control, duration: float) -> ControlSchedule:
        return cls((Segment(duration, params),))

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def rate(self) -> float:
        rates = [_rate(s.params) for s in self.segments]
        return max(rates, default=0.0)


@dataclass(frozen=True)
class FlowSample:
    point: BlochVector
    velocity: tuple[float, float, float]


def _rate(control: Control) -> float:
    return control.rate if isinstance(control, EffectiveParams) else abs(control.bound)


def default_dt(control: Control | ControlSchedule) -> float:
    rate = control.rate if isinstance(control, ControlSchedule) else _rate(control)
    return DEFAULT_DT_FRACTION / rate if rate > 0 else DEFAULT_DT_FRACTION


def max_dt(control: Control) -> float:
    rate = _rate(control)
    return MAX_DT_FRACTION / rate if rate > 0 else math.inf


def h_eff(q: QubitAmplitudes, p: EffectiveParams) -> np.ndarray:
    check_normalized(q)
    return p.v01 * SIGMA_X + (p.bz + p.g * q.z) * SIGMA_Z


def _deriv(p0: complex, p1: complex, v: float, bz: float, g: float) -> tuple[complex, complex]:
    w = bz + g * (p0.real * p0.real + p0.imag * p0.imag - p1.real * p1.real - p1.imag * p1.imag)
    return -1j * (v * p1 + w * p0), -1j * (v * p0 - w * p1)


def rk4(p0: complex, p1: complex, v: float, bz: float, g: float, h: float) -> tuple[complex, complex]:
    """One RK4 step on raw amplitudes with constant coefficients."""
    h2 = 0.5 * h
    a0, a1 = _deriv(p0, p1, v, bz, g)
    b0, b1 = _deriv(p0 + h2 * a0, p1 + h2 * a1, v, bz, g)
    c0, c1 = _deriv(p0 + h2 * b0, p1 + h2 * b1, v, bz, g)
    d0, d1 = _deriv(p0 + h * c0, p1 + h * c1, v, bz, g)
    h6 = h / 6.0
    return (p0 + h6 * (a0 + 2.0 * (b0 + c0) + d0), p1 + h6 * (a1 + 2.0 * (b1 + c1) + d1))


def _deriv_feedback(p0, p1, rule):
    c = rule(QubitAmplitudes.trusted(p0, p1))
    return _deriv(p0, p1, c.v01, c.bz, c.g)


def rk4_feedback(p0: complex, p1: complex, rule: FeedbackRule, h: float) -> tuple[complex, complex]:
    """RK4 step where the control law is re-evaluated at every stage."""
    h2 = 0.5 * h
    a0, a1 = _deriv_feedback(p0, p1, rule)
    b0, b1 = _deriv_feedback(p0 + h2 * a0, p1 + h2 * a1, rule)
    c0, c1 = _deriv_feedback(p0 + h2 * b0, p1 + h2 * b1, rule)
    d0, d1 = _deriv_feedback(p0 + h * c0, p1 + h * c1, rule)
    h6 = h / 6.0
    return (p0 + h6 * (a0 + 2.0 * (b0 + c0) + d0), p1 + h6 * (a1 + 2.0 * (b1 + c1) + d1))


def advance(p0: complex, p1: complex, control: Control, h: float) -> tuple[complex, complex]:
    if isinstance(control, EffectiveParams):
        return rk4(p0, p1, control.v01, control.bz, control.g, h)
    return rk4_feedback(p0, p1, control, h)


def step(q: QubitAmplitudes, p: Control, dt: float, dt_max: float | None = None) -> QubitAmplitudes:
    """Advance ``q`` by one RK4 step of size ``dt``."""
    check_normalized(q)
    limit = max_dt(p) if dt_max is None else dt_max
    if not (math.isfinite(dt) and 0 < dt <= limit):
        raise StepSizeError(f"step size {dt!r} outside (0, {limit!r}]")
    return QubitAmplitudes.trusted(*advance(q.psi0, q.psi1, p, dt))


def integrate(
    q0: QubitAmplitudes,
    schedule: ControlSchedule,
    dt: float | None = None,
    observer: Callable[[float, QubitAmplitudes], None] | None = None,
    dense: bool = True,
) -> list[tuple[float, QubitAmplitudes]]:
    """Drive ``q0`` through every segment of ``schedule``.

    Each segment is split into ``ceil(duration / dt)`` equal steps, so a
    duration that is not a multiple of ``dt`` uses a slightly shorter step.
    ``observer(t, q)`` sees every step.  With ``dense=False`` only the first
    and last states are kept.
    """
    check_normalized(q0)
    if not schedule.segments:
        warnings.warn("empty control schedule; returning the initial state", EmptyScheduleWarning, stacklevel=2)
        if observer is not None:
            observer(0.0, q0)
        return [(0.0, q0)]
    if dt is None:
        dt = default_dt(schedule)
    if not (math.isfinite(dt) and dt > 0):
        raise StepSizeError(f"step size must be positive, got {dt!r}")

    t = 0.0
    p0, p1 = q0.psi0, q0.psi1
    trajectory = [(0.0, q0)]
    if observer is not None:
        observer(0.0, q0)
    for seg in schedule.segments:
        nsteps = max(1, math.ceil(seg.duration / dt - 1e-9))
        h = seg.duration / nsteps
        if h > max_dt(seg.params):
            raise StepSizeError(f"step size {h!r} exceeds the stability limit {max_dt(seg.params)!r}")
        t_start = t
        for i in range(1, nsteps + 1):
            p0, p1 = advance(p0, p1, seg.params, h)
            t = t_start + i * h
            if dense or observer is not None:
                q = QubitAmplitudes.trusted(p0, p1)
                if dense:
                    trajectory.append((t, q))
                if observer is not None:
                    observer(t, q)
    if not dense:
        trajectory.append((t, QubitAmplitudes.trusted(p0, p1)))
    return trajectory


def rotate_x(q: QubitAmplitudes, angle: float) -> QubitAmplitudes:
    """Apply ``exp(-i angle sigma_x / 2)``."""
    check_normalized(q)
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return QubitAmplitudes.trusted(c * q.psi0 - 1j * s * q.psi1, -1j * s * q.psi0 + c * q.psi1)


def rotate_z(q: QubitAmplitudes, angle: float) -> QubitAmplitudes:
    """Apply ``exp(-i angle sigma_z / 2)``."""
    check_normalized(q)
    ph = complex(math.cos(angle / 2), -math.sin(angle / 2))
    return QubitAmplitudes.trusted(ph * q.psi0, ph.conjugate() * q.psi1)


def flow_velocity(r: Sequence[float], p: EffectiveParams, nonlinear: bool = True) -> np.ndarray:
    x, y, z = r
    hz = p.bz + p.g * (z if nonlinear else 1.0)
    h = np.array([p.v01, 0.0, hz])
    return 2.0 * np.cross(h, np.array([x, y, z], dtype=float))


def flow_field(grid: Iterable[BlochVector], p: EffectiveParams, nonlinear: bool = True) -> list[FlowSample]:
    """Bloch-sphere velocity ``2 h x r`` at each grid point.

    With ``nonlinear`` the sigma_z coefficient is ``Bz + g z`` (torsion);
    otherwise ``g`` is added to ``Bz`` as a fixed rotation rate.
    """
    samples = []
    for r in grid:
        if abs(r.norm - 1.0) > BLOCH_TOL:
            raise InvalidStateError(f"flow-field point off the unit sphere: |r| = {r.norm!r}")
        v = flow_velocity((r.x, r.y, r.z), p, nonlinear)
        samples.append(FlowSample(r, (float(v[0]), float(v[1]), float(v[2]))))
    return samples


def sphere_grid(n_theta: int, n_phi: int) -> list[BlochVector]:
    """Latitude-longitude grid with ``n_theta * n_phi`` points.

    Polar angles sit at cell midpoints, so an odd ``n_theta`` puts one ring
    on the equator.  That ring is set to ``z = 0`` exactly.
    """
    if n_theta < 1 or n_phi < 1:
        raise ValueError("grid dimensions must be positive")
    points = []
    for i in range(n_theta):
        theta = math.pi * (i + 0.5) / n_theta
        on_equator = 2 * i + 1 == n_theta
        st = 1.0 if on_equator else math.sin(theta)
        ct = 0.0 if on_equator else math.cos(theta)
        for j in range(n_phi):
            phi = 2.0 * math.pi * j / n_phi
            points.append(BlochVector(st * math.cos(phi), st * math.sin(phi), ct))
    return points


def write_flow_csv(samples: Iterable[FlowSample], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "z", "vx", "vy", "vz"])
        for s in samples:
            row = (s.point.x, s.point.y, s.point.z, *s.velocity)
            writer.writerow([format(v, ".17g") for v in row])
