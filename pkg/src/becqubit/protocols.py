"""Single-input state discrimination at the mean-field level.

A hidden coin prepares one of two known candidates ``|a>``, ``|b>``.  The
discriminator evolves whatever it receives under the torsion Hamiltonian
until the two candidates would be orthogonal, rotates them onto ``|0>``,
``|1>`` and measures in the circulation basis.

Two schedules are provided:

``SIMPLE``
    Candidates on the ``y = 0`` meridian plane with ``z_a = -z_b``; constant
    torsion ``g`` with ``V01 = Bz = 0``.  Each candidate precesses at
    ``2 g z``, giving ``|<a|b>|^2 = cos^2(theta/2) cos^2(2 g sin(theta/2) t)``.

``CHILDS_YOUNG``
    Candidates with ``y = z``; the barrier is driven by the state feedback
    ``V01 = g x / 2`` which keeps ``y = z`` (see ``docs/cy_control.md``).  Then
    ``dx/dt = -g (1 - x^2)`` and the pair orthogonalizes in a time logarithmic
    in ``1/theta``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize

from .errors import NonOrthogonalError
from .meanfield import (
    ControlSchedule,
    EffectiveParams,
    FeedbackRule,
    advance,
    default_dt,
    integrate,
    max_dt,
)
from .qubit import BlochVector, QubitAmplitudes, check_normalized, from_bloch

DEFAULT_ORTH_EPS = 1e-4
DEFAULT_ORTH_TOL = 1e-3


class Scheme(str, enum.Enum):
    SIMPLE = "simple"
    CHILDS_YOUNG = "childs-young"

    @classmethod
    def parse(cls, value) -> Scheme:
        if isinstance(value, cls):
            return value
        aliases = {"simple": cls.SIMPLE, "cy": cls.CHILDS_YOUNG, "childs-young": cls.CHILDS_YOUNG,
                   "childsyoung": cls.CHILDS_YOUNG}
        try:
            return aliases[str(value).lower().replace("_", "-")]
        except KeyError:
            raise ValueError(f"unknown scheme {value!r}") from None


@dataclass(frozen=True)
class InputPair:
    theta_ab: float
    scheme: Scheme = Scheme.SIMPLE

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        theta = float(self.theta_ab)
        if not (0.0 <= theta <= math.pi):
            raise ValueError(f"theta_ab must lie in [0, pi], got {theta!r}")
        object.__setattr__(self, "theta_ab", theta)

    def candidates(self) -> tuple[QubitAmplitudes, QubitAmplitudes]:
        if self.scheme is Scheme.SIMPLE:
            return prepare_inputs_simple(self.theta_ab)
        return prepare_inputs_cy(self.theta_ab)


def _pair_overlap2(a0, a1, b0, b1) -> float:
    c = a0.conjugate() * b0 + a1.conjugate() * b1
    return c.real * c.real + c.imag * c.imag


def prepare_inputs_simple(theta_ab: float) -> tuple[QubitAmplitudes, QubitAmplitudes]:
    """Meridian candidates with ``x = |cos(theta/2)|``, ``y = 0``, ``z = +-sin(theta/2)``."""
    qa, qb = (math.pi - theta_ab) / 4.0, (math.pi + theta_ab) / 4.0
    return QubitAmplitudes(math.cos(qa), math.sin(qa)), QubitAmplitudes(math.cos(qb), math.sin(qb))


def prepare_inputs_cy(theta_ab: float) -> tuple[QubitAmplitudes, QubitAmplitudes]:
    """Candidates with ``x = |cos(theta/2)|`` and ``y = z = +-sin(theta/2)/sqrt(2)``."""
    x = abs(math.cos(theta_ab / 2.0))
    s = math.sin(theta_ab / 2.0) / math.sqrt(2.0)
    out = []
    for sign in (1.0, -1.0):
        r = np.array([x, sign * s, sign * s])
        r /= np.linalg.norm(r)
        out.append(from_bloch(BlochVector(*r)))
    return out[0], out[1]


def cy_control(q: QubitAmplitudes, g: float) -> EffectiveParams:
    """Barrier setting ``V01 = g x / 2`` that keeps ``y = z`` under torsion."""
    x = 2.0 * (q.psi0.conjugate() * q.psi1).real
    return EffectiveParams(0.5 * g * x, 0.0, g)


def cy_feedback(g: float) -> FeedbackRule:
    return FeedbackRule("childs-young", lambda q: cy_control(q, g), abs(g))


def scheme_control(scheme: Scheme, g: float):
    if Scheme.parse(scheme) is Scheme.SIMPLE:
        return EffectiveParams(0.0, 0.0, g)
    return cy_feedback(g)


def predicted_t_orth(pair: InputPair, g: float, orth_eps: float = DEFAULT_ORTH_EPS) -> float:
    """Closed-form threshold time of the ideal flow (``inf`` if never reached)."""
    c = abs(math.cos(pair.theta_ab / 2.0))
    s = math.sin(pair.theta_ab / 2.0)
    root = math.sqrt(orth_eps)
    if c * c <= orth_eps:
        return 0.0
    if g == 0 or s == 0:
        return math.inf
    if pair.scheme is Scheme.SIMPLE:
        return math.acos(root / c) / (2.0 * abs(g) * s)
    return (math.atanh(c) - math.atanh(root)) / abs(g)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    amplitudes: np.ndarray

    def state(self, i: int) -> QubitAmplitudes:
        return QubitAmplitudes.trusted(*self.amplitudes[i])

    @property
    def final(self) -> QubitAmplitudes:
        return self.state(-1)

    def bloch(self) -> np.ndarray:
        """Bloch vectors, shape ``(len(times), 3)``."""
        p0, p1 = self.amplitudes[:, 0], self.amplitudes[:, 1]
        c = p0.conj() * p1
        return np.column_stack([2 * c.real, 2 * c.imag, np.abs(p0) ** 2 - np.abs(p1) ** 2])

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class DiscriminationResult:
    """Outcome of evolving both candidates.

    ``status`` is ``"orthogonal"`` when the overlap threshold was met,
    ``"saturated"`` when a CY run stalled at its closest approach (conclusive
    with a residual overlap) and ``"inconclusive"`` when ``t_max`` ran out.
    """

    trajectory_a: Trajectory
    trajectory_b: Trajectory
    t_orth: float | None
    residual_overlap: float
    status: str

    @property
    def conclusive(self) -> bool:
        return self.status != "inconclusive"


def run_discrimination(
    pair: InputPair,
    g: float,
    dt: float | None = None,
    t_max: float | None = None,
    orth_eps: float = DEFAULT_ORTH_EPS,
    record_every: int = 1,
) -> DiscriminationResult:
    """Evolve both candidates until ``|<a|b>|^2 <= orth_eps``.

    The crossing is located by root bracketing inside the last step.
    ``record_every`` thins the stored trajectories (0 keeps only the end
    points); the stopping test always runs on every step.
    """
    g = float(g)
    control = scheme_control(pair.scheme, g)
    if dt is None:
        dt = default_dt(control)
    if not (math.isfinite(dt) and 0 < dt <= max_dt(control)):
        raise ValueError(f"step size {dt!r} outside (0, {max_dt(control)!r}]")
    if t_max is None:
        predicted = predicted_t_orth(pair, g, orth_eps)
        t_max = 2.0 * predicted + 10.0 * dt if math.isfinite(predicted) else 0.0
    if not (math.isfinite(t_max) and t_max >= 0):
        raise ValueError(f"t_max must be finite and non-negative, got {t_max!r}")

    a, b = pair.candidates()
    state = (a.psi0, a.psi1, b.psi0, b.psi1)
    times, amps_a, amps_b = [0.0], [state[:2]], [state[2:]]

    def evolve(s, tau):
        if tau <= 0:
            return s
        return (*advance(s[0], s[1], control, tau), *advance(s[2], s[3], control, tau))

    def finish(t_stop, s, status):
        if times[-1] != t_stop:
            times.append(t_stop)
            amps_a.append(s[:2])
            amps_b.append(s[2:])
        t_arr = np.array(times)
        return DiscriminationResult(
            Trajectory(t_arr, np.array(amps_a, dtype=complex)),
            Trajectory(t_arr.copy(), np.array(amps_b, dtype=complex)),
            t_stop if status != "inconclusive" else None,
            min(1.0, max(0.0, _pair_overlap2(*s))), status)

    ov2 = _pair_overlap2(*state)
    if ov2 <= orth_eps:
        return finish(0.0, state, "orthogonal")
    # Zero generator or identical candidates: nothing can ever separate them.
    if g == 0.0 or ov2 >= 1.0 - 1e-15:
        return finish(t_max, state, "inconclusive")

    nsteps = math.ceil(t_max / dt - 1e-9)
    t = 0.0
    back = None  # state one step before ``start``
    decreasing = False
    for i in range(1, nsteps + 1):
        h = min(dt, t_max - (i - 1) * dt)
        start, t_start, prev_ov2 = state, t, ov2
        state = evolve(start, h)
        t = (i - 1) * dt + h
        ov2 = _pair_overlap2(*state)

        if ov2 <= orth_eps:
            tau = optimize.brentq(lambda tau: _pair_overlap2(*evolve(start, tau)) - orth_eps,
                                  0.0, h, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            return finish(t_start + tau, evolve(start, tau), "orthogonal")

        if pair.scheme is Scheme.CHILDS_YOUNG and decreasing and ov2 > prev_ov2:
            # Closest approach lies between the previous two steps.
            base, t_base = (back, t_start - dt) if back is not None else (start, t_start)
            best = optimize.minimize_scalar(lambda tau: _pair_overlap2(*evolve(base, tau)),
                                            bounds=(0.0, t - t_base), method="bounded",
                                            options={"xatol": 1e-13})
            tau = float(best.x)
            return finish(t_base + tau, evolve(base, tau), "saturated")

        decreasing = decreasing or ov2 < prev_ov2
        back = start
        if record_every and i % record_every == 0:
            times.append(t)
            amps_a.append(state[:2])
            amps_b.append(state[2:])
    return finish(t, state, "inconclusive")


def readout_unitary(a_final: QubitAmplitudes, b_final: QubitAmplitudes,
                    orth_tol: float = DEFAULT_ORTH_TOL) -> np.ndarray:
    """``U = |0><a| + |1><b'|`` with ``b'`` made orthogonal to ``a``.

    ``orth_tol`` bounds the squared overlap ``|<a|b>|^2``, the same quantity
    the discrimination stopping rule uses.
    """
    check_normalized(a_final)
    check_normalized(b_final)
    a = a_final.as_array() / math.sqrt(a_final.norm2)
    b = b_final.as_array() / math.sqrt(b_final.norm2)
    ab = np.vdot(a, b)
    if abs(ab) ** 2 > orth_tol:
        raise NonOrthogonalError(f"|<a|b>|^2 = {abs(ab) ** 2:.3g} exceeds {orth_tol:g}")
    b = b - ab * a
    b /= np.linalg.norm(b)
    return np.vstack([a.conj(), b.conj()])


def apply_unitary(u: np.ndarray, q: QubitAmplitudes) -> QubitAmplitudes:
    out = u @ q.as_array()
    return QubitAmplitudes.trusted(out[0], out[1])


def make_rng(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def sample_measurement(q: QubitAmplitudes, rng_seed=None, size: int | None = None):
    """Born-rule outcome(s) in the circulation basis: 0 with probability ``|psi0|^2``."""
    check_normalized(q)
    p0 = abs(q.psi0) ** 2 / q.norm2
    rng = make_rng(rng_seed)
    if size is None:
        return 0 if rng.random() < p0 else 1
    return np.where(rng.random(size) < p0, 0, 1)


class BlackBox:
    """Hidden preparation of ``|a>`` or ``|b>`` from a fair coin.

    Only the harness reads the returned truth label; the discriminator is
    handed the state alone.
    """

    def __init__(self, pair: InputPair):
        self._candidates = pair.candidates()

    def prepare(self, rng: np.random.Generator) -> tuple[str, QubitAmplitudes]:
        pick = int(rng.integers(2))
        return ("A", "B")[pick], self._candidates[pick]


class Discriminator:
    """Torsion discriminator calibrated on the known candidates.

    Calibration finds the stopping time and the readout rotation; processing
    an input then runs the same schedule on that input alone.
    """

    def __init__(self, pair: InputPair, g: float, dt: float | None = None,
                 t_max: float | None = None, orth_eps: float = DEFAULT_ORTH_EPS):
        self.pair = pair
        self.g = float(g)
        self.control = scheme_control(pair.scheme, self.g)
        self.dt = default_dt(self.control) if dt is None else dt
        self.calibration = run_discrimination(pair, g, self.dt, t_max, orth_eps, record_every=0)
        self.t_orth = self.calibration.t_orth
        self.residual_overlap = self.calibration.residual_overlap
        self.readout = None
        if self.calibration.conclusive:
            self.readout = readout_unitary(self.calibration.trajectory_a.final,
                                           self.calibration.trajectory_b.final,
                                           orth_tol=max(DEFAULT_ORTH_TOL, self.residual_overlap))
        self._process = lru_cache(maxsize=16)(self._process_raw)

    @property
    def conclusive(self) -> bool:
        return self.readout is not None

    def _process_raw(self, psi0: complex, psi1: complex) -> QubitAmplitudes:
        q = QubitAmplitudes.trusted(psi0, psi1)
        if self.t_orth > 0:
            schedule = ControlSchedule.constant(self.control, self.t_orth)
            q = integrate(q, schedule, self.dt, dense=False)[-1][1]
        return apply_unitary(self.readout, q)

    def process(self, q: QubitAmplitudes) -> QubitAmplitudes | None:
        """Output state ready for measurement, or ``None`` if the device abstains."""
        if not self.conclusive:
            return None
        return self._process(q.psi0, q.psi1)


@dataclass(frozen=True)
class TrialResult:
    truth: str
    outcome: int | None
    t_orth: float | None
    residual_overlap: float


@dataclass
class TrialStats:
    scheme: Scheme
    theta_ab: float
    g: float
    shots: int
    results: list[TrialResult] = field(repr=False)

    @property
    def confusion(self) -> dict[str, int]:
        counts = {"AA": 0, "AB": 0, "BA": 0, "BB": 0}
        for r in self.results:
            if r.outcome is not None:
                counts[r.truth + "AB"[r.outcome]] += 1
        return counts

    @property
    def inconclusive(self) -> int:
        return sum(r.outcome is None for r in self.results)

    @property
    def success_rate(self) -> float:
        c = self.confusion
        return (c["AA"] + c["BB"]) / self.shots

    @property
    def inconclusive_rate(self) -> float:
        return self.inconclusive / self.shots

    @property
    def t_orth_mean(self) -> float | None:
        times = [r.t_orth for r in self.results if r.t_orth is not None]
        return float(np.mean(times)) if times else None

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "theta_ab": self.theta_ab,
            "g": self.g,
            "shots": self.shots,
            "t_orth_mean": self.t_orth_mean,
            "success_rate": self.success_rate,
            "inconclusive_rate": self.inconclusive_rate,
            "confusion": self.confusion,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def run_trials(pair: InputPair, g: float, shots: int, rng_seed: int = 0, dt: float | None = None,
               t_max: float | None = None, orth_eps: float = DEFAULT_ORTH_EPS) -> TrialStats:
    """Repeat prepare / discriminate / measure ``shots`` times.

    Shot ``i`` draws from ``default_rng([rng_seed, i])`` so every shot has its
    own stream and the run is reproducible regardless of ordering.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    box = BlackBox(pair)
    device = Discriminator(pair, g, dt, t_max, orth_eps)
    results = []
    for i in range(shots):
        rng = np.random.default_rng([rng_seed, i])
        truth, state = box.prepare(rng)
        out = device.process(state)
        if out is None:
            results.append(TrialResult(truth, None, None, device.residual_overlap))
        else:
            results.append(TrialResult(truth, sample_measurement(out, rng), device.t_orth,
                                       device.residual_overlap))
    return TrialStats(pair.scheme, pair.theta_ab, float(g), shots, results)


def write_trials_json(stats: TrialStats, path) -> None:
    with open(path, "w") as fh:
        fh.write(stats.to_json())
