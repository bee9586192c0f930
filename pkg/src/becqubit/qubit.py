"""Qubit states, Bloch-sphere geometry and distances.

A pure mean-field state is a normalized pair of complex amplitudes
``(psi0, psi1)`` over the circulation basis ``|0>, |1>``.  The Bloch vector
is ``r = tr(rho sigma)`` with ``rho = |psi><psi|``:

    x = 2 Re(conj(psi0) psi1),  y = 2 Im(conj(psi0) psi1),  z = |psi0|^2 - |psi1|^2

Mixed states (interior Bloch points) are represented only as 2x2 density
matrices; they never become ``QubitAmplitudes``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError

#: Normalization tolerance enforced when a state is constructed.
CONSTRUCTION_TOL = 1e-12
#: Normalization tolerance accepted by operations (allows integrator drift).
PROPAGATION_TOL = 1e-9
#: Tolerance on the Bloch radius.
BLOCH_TOL = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True, slots=True)
class QubitAmplitudes:
    """Normalized pure qubit state ``psi0|0> + psi1|1>``."""

    psi0: complex
    psi1: complex

    def __post_init__(self):
        object.__setattr__(self, "psi0", complex(self.psi0))
        object.__setattr__(self, "psi1", complex(self.psi1))
        norm2 = self.norm2
        if not math.isfinite(norm2) or abs(norm2 - 1.0) > CONSTRUCTION_TOL:
            raise InvalidStateError(f"amplitudes not normalized: |psi|^2 = {norm2!r}")

    @classmethod
    def trusted(cls, psi0: complex, psi1: complex) -> QubitAmplitudes:
        """Build without the construction check (used for propagated states)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "psi0", complex(psi0))
        object.__setattr__(obj, "psi1", complex(psi1))
        return obj

    @classmethod
    def normalized(cls, psi0: complex, psi1: complex) -> QubitAmplitudes:
        """Rescale an arbitrary nonzero pair to unit norm."""
        norm = math.sqrt(abs(psi0) ** 2 + abs(psi1) ** 2)
        if norm == 0.0 or not math.isfinite(norm):
            raise InvalidStateError("cannot normalize a zero or non-finite vector")
        return cls(psi0 / norm, psi1 / norm)

    @property
    def norm2(self) -> float:
        p0, p1 = self.psi0, self.psi1
        return p0.real * p0.real + p0.imag * p0.imag + p1.real * p1.real + p1.imag * p1.imag

    @property
    def z(self) -> float:
        p0, p1 = self.psi0, self.psi1
        return p0.real * p0.real + p0.imag * p0.imag - p1.real * p1.real - p1.imag * p1.imag

    def as_array(self) -> np.ndarray:
        return np.array([self.psi0, self.psi1], dtype=complex)

    def density_matrix(self) -> np.ndarray:
        v = self.as_array()
        return np.outer(v, v.conj())


@dataclass(frozen=True, slots=True)
class BlochVector:
    """Point in the closed unit ball."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name)))
        r2 = self.x * self.x + self.y * self.y + self.z * self.z
        if not math.isfinite(r2) or r2 > 1.0 + BLOCH_TOL:
            raise InvalidStateError(f"Bloch vector outside the unit ball: |r|^2 = {r2!r}")

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def dot(self, other: BlochVector) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z


def check_normalized(q: QubitAmplitudes, tol: float = PROPAGATION_TOL) -> None:
    norm2 = q.norm2
    if not math.isfinite(norm2) or abs(norm2 - 1.0) > tol:
        raise InvalidStateError(f"state not normalized within {tol:g}: |psi|^2 = {norm2!r}")


def to_bloch(q: QubitAmplitudes) -> BlochVector:
    check_normalized(q)
    c = q.psi0.conjugate() * q.psi1
    return BlochVector(2.0 * c.real, 2.0 * c.imag, q.z)


def from_bloch(r: BlochVector) -> QubitAmplitudes:
    """Pure state with Bloch vector ``r``.

    The global phase is fixed so that ``psi0`` is real and non-negative
    (``psi1`` real and non-negative at the south pole).  Only surface points
    are accepted; use :func:`density_from_bloch` for interior points.
    """
    norm = r.norm
    if abs(norm - 1.0) > BLOCH_TOL:
        raise InvalidStateError(f"Bloch vector not on the unit sphere: |r| = {norm!r}")
    x, y, z = r.x / norm, r.y / norm, r.z / norm
    psi0 = math.sqrt(max(0.0, (1.0 + z) / 2.0))
    mag1 = math.sqrt(max(0.0, (1.0 - z) / 2.0))
    rho = math.hypot(x, y)
    psi1 = complex(mag1, 0.0) if rho == 0.0 else mag1 * complex(x, y) / rho
    return QubitAmplitudes.normalized(psi0, psi1)


def density_from_bloch(r: BlochVector) -> np.ndarray:
    """Density matrix ``(I + r . sigma) / 2``; valid for interior points."""
    return 0.5 * (IDENTITY + r.x * SIGMA_X + r.y * SIGMA_Y + r.z * SIGMA_Z)


def overlap(a: QubitAmplitudes, b: QubitAmplitudes) -> complex:
    """Inner product ``<a|b>``."""
    check_normalized(a)
    check_normalized(b)
    return a.psi0.conjugate() * b.psi0 + a.psi1.conjugate() * b.psi1


def bloch_angle(a: QubitAmplitudes, b: QubitAmplitudes) -> float:
    d = to_bloch(a).dot(to_bloch(b))
    return math.acos(max(-1.0, min(1.0, d)))


def _check_density(rho: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise InvalidStateError(f"expected a 2x2 matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidStateError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise InvalidStateError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise InvalidStateError(f"density matrix trace {np.trace(rho).real!r} != 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise InvalidStateError("density matrix is not positive semidefinite")
    return rho


def trace_distance_matrices(rho1, rho2) -> float:
    """Trace norm ``||rho1 - rho2||_1`` (sum of absolute eigenvalues)."""
    d = _check_density(rho1) - _check_density(rho2)
    d = 0.5 * (d + d.conj().T)
    return float(np.abs(np.linalg.eigvalsh(d)).sum())


def trace_distance(a: QubitAmplitudes, b: QubitAmplitudes) -> float:
    check_normalized(a)
    check_normalized(b)
    return trace_distance_matrices(a.density_matrix(), b.density_matrix())


def basis_state(label: int) -> QubitAmplitudes:
    if label == 0:
        return QubitAmplitudes(1.0, 0.0)
    if label == 1:
        return QubitAmplitudes(0.0, 1.0)
    raise ValueError(f"basis label must be 0 or 1, got {label!r}")


def equator_state(phi: float) -> QubitAmplitudes:
    """State on the equator at azimuth ``phi``."""
    s = 1.0 / math.sqrt(2.0)
    return QubitAmplitudes.normalized(s, s * complex(math.cos(phi), math.sin(phi)))
