"""Exact two-mode many-body model in the Fock basis.

States of ``n`` bosons in modes ``l = 0, 1`` are stored as length ``n + 1``
coefficient vectors; index ``k`` is the amplitude of ``|k, n - k>`` (``k``
atoms in mode 0).  In this basis the two-mode rotating-frame Hamiltonian is a
real symmetric tridiagonal matrix:

    H[k, k]   = (w0 + V00) k + (w1 + V11)(n - k)
                + gamma k(k-1) + gamma (n-k)(n-k-1) + gamma' k(n-k)
    H[k+1, k] = V01 sqrt((k+1)(n-k))

with ``w_l = (Omega - l Omega0)^2 / (2 Omega0)``, ``gamma = K/n`` and
``gamma' = K'/n``.  The constant ``-n Omega^2 / (2 Omega0)`` is not part of the
matrix; it is available as :attr:`TwoModeParams.kinetic_offset`.

Mean-field correspondence: ``Bz = (w0 - w1 + V00 - V11) / 2`` and
``g = (2K - K') / 2``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg, optimize, special

from .errors import EigensolverError, InvalidStateError, ParticleCountError
from .meanfield import ControlSchedule, EffectiveParams, integrate
from .qubit import QubitAmplitudes, check_normalized, trace_distance_matrices

FOCK_NORM_TOL = 1e-12
#: Above this size evolution switches from eigendecomposition to Chebyshev.
EIG_MAX_N = 2000
#: Above this size F_n coefficients are evaluated in the log domain.
LOG_BINOMIAL_N = 300


@dataclass(frozen=True)
class TwoModeParams:
    n: int
    omega0: float = 1.0
    omega: float = 0.5
    big_k: float = 0.0
    big_k_prime: float = 0.0
    v00: float = 0.0
    v11: float = 0.0
    v01: float = 0.0

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ParticleCountError(f"particle count must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if isinstance(self.v01, complex):
            if self.v01.imag != 0.0:
                raise ValueError("complex V01 is not supported; the barrier element must be real")
            object.__setattr__(self, "v01", self.v01.real)
        for name in ("omega0", "omega", "big_k", "big_k_prime", "v00", "v11", "v01"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.omega0 <= 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0!r}")

    @property
    def gamma(self) -> float:
        return self.big_k / self.n

    @property
    def gamma_prime(self) -> float:
        return self.big_k_prime / self.n

    @property
    def kinetic_offset(self) -> float:
        """Classical rotational energy ``-n Omega^2 / (2 Omega0)`` left out of the matrix."""
        return -self.n * self.omega ** 2 / (2.0 * self.omega0)

    @property
    def bz(self) -> float:
        return (mode_frequency(self, 0) - mode_frequency(self, 1) + self.v00 - self.v11) / 2.0

    @property
    def g(self) -> float:
        return (2.0 * self.big_k - self.big_k_prime) / 2.0

    def effective_params(self) -> EffectiveParams:
        return EffectiveParams(self.v01, self.bz, self.g)

    def with_n(self, n: int) -> TwoModeParams:
        return TwoModeParams(n, self.omega0, self.omega, self.big_k, self.big_k_prime,
                             self.v00, self.v11, self.v01)


@dataclass(frozen=True, eq=False)
class FockVector:
    """Amplitudes over ``|k, n - k>``, ``k = 0..n``.

    The constructor enforces unit norm; :meth:`unnormalized` skips that check
    for the results of ladder operators.
    """

    n: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self._setup()
        if abs(self.norm2 - 1.0) > FOCK_NORM_TOL:
            raise InvalidStateError(f"Fock vector not normalized: norm^2 = {self.norm2!r}")

    def _setup(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 0:
            raise ParticleCountError(f"particle count must be a non-negative integer, got {self.n!r}")
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.shape != (self.n + 1,):
            raise InvalidStateError(f"expected {self.n + 1} coefficients, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidStateError("Fock coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def unnormalized(cls, n: int, coeffs) -> FockVector:
        obj = object.__new__(cls)
        object.__setattr__(obj, "n", n)
        object.__setattr__(obj, "coeffs", coeffs)
        obj._setup()
        return obj

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.coeffs, self.coeffs).real)

    def occupations(self) -> np.ndarray:
        """Atoms in mode 0 for each basis index."""
        return np.arange(self.n + 1)


def mode_frequency(p: TwoModeParams, l: int) -> float:
    return (p.omega - l * p.omega0) ** 2 / (2.0 * p.omega0)


def _log_abs_power(logmag: float, k: np.ndarray) -> np.ndarray:
    # k * log|psi| with the convention 0 * log(0) = 0
    if logmag == -math.inf:
        return np.where(k == 0, 0.0, -np.inf)
    return k * logmag


def encode_fn(n: int, q: QubitAmplitudes) -> FockVector:
    """Product state with every atom in ``psi0|0> + psi1|1>``.

    ``coeffs[k] = sqrt(C(n, k)) psi0^k psi1^(n-k)``.  ``n = 0`` gives the vacuum.
    """
    check_normalized(q)
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ParticleCountError(f"particle count must be a non-negative integer, got {n!r}")
    n = int(n)
    k = np.arange(n + 1)
    if n <= LOG_BINOMIAL_N:
        coeffs = np.sqrt(special.comb(n, k)) * np.power(q.psi0, k) * np.power(q.psi1, n - k)
    else:
        log_binom = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
        a0, a1 = abs(q.psi0), abs(q.psi1)
        logmag = (0.5 * log_binom
                  + _log_abs_power(math.log(a0) if a0 > 0 else -math.inf, k)
                  + _log_abs_power(math.log(a1) if a1 > 0 else -math.inf, n - k))
        phase = k * np.angle(q.psi0) + (n - k) * np.angle(q.psi1)
        coeffs = np.exp(logmag) * np.exp(1j * phase)
        # exact norm is 1; large k*log|psi| terms leave ~1e-12 rounding
        coeffs /= np.linalg.norm(coeffs)
    return FockVector(n, coeffs)


def encode_cat(n: int, q: QubitAmplitudes) -> FockVector:
    """``psi0 |n, 0> + psi1 |0, n>``."""
    check_normalized(q)
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ParticleCountError(f"CAT encoding needs n >= 1, got {n!r}")
    n = int(n)
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[n] = q.psi0
    coeffs[0] = q.psi1
    return FockVector(n, coeffs)


def circulation_state(n: int, l: int) -> FockVector:
    """All ``n`` atoms in mode ``l``."""
    return encode_fn(n, QubitAmplitudes(1.0, 0.0) if l == 0 else QubitAmplitudes(0.0, 1.0))


def annihilate(v: FockVector, mode: int) -> FockVector:
    """Apply ``a_mode``; the result has ``n - 1`` atoms and is not normalized."""
    if v.n == 0:
        raise ParticleCountError("cannot annihilate an atom from the vacuum")
    k = np.arange(v.n + 1)
    if mode == 0:
        # a0 |k, n-k> = sqrt(k) |k-1, n-k>
        new = np.sqrt(k[1:]) * v.coeffs[1:]
    elif mode == 1:
        # a1 |k, n-k> = sqrt(n-k) |k, n-k-1>
        new = np.sqrt(v.n - k[:-1]) * v.coeffs[:-1]
    else:
        raise ValueError(f"mode must be 0 or 1, got {mode!r}")
    return FockVector.unnormalized(v.n - 1, new)


def overlap_fock(u: FockVector, v: FockVector) -> complex:
    if u.n != v.n:
        raise ParticleCountError(f"particle counts differ: {u.n} vs {v.n}")
    return complex(np.vdot(u.coeffs, v.coeffs))


def correlator_one(v: FockVector, l: int, lp: int) -> complex:
    """``<a_l^dag a_lp>``."""
    if v.n == 0:
        return 0j
    return complex(np.vdot(annihilate(v, l).coeffs, annihilate(v, lp).coeffs))


def correlator_two(v: FockVector, l: int, lp: int) -> complex:
    """Normal-ordered pair correlator ``<a_l^dag a_lp^dag a_lp a_l>``.

    For ``l != lp`` this equals ``<a_l^dag a_l a_lp^dag a_lp>``; for
    ``l == lp`` it is ``<n_l (n_l - 1)>``.  See :func:`density_correlator` for
    the unordered ``<n_l n_lp>``.
    """
    if v.n < 2:
        return 0j
    w = annihilate(annihilate(v, l), lp)
    return complex(np.vdot(w.coeffs, w.coeffs))


def density_correlator(v: FockVector, l: int, lp: int) -> complex:
    """Unordered ``<n_l n_lp>``."""
    k = np.arange(v.n + 1)
    occ = {0: k, 1: v.n - k}
    return complex(np.sum(np.abs(v.coeffs) ** 2 * occ[l] * occ[lp]))


def reduced_density(v: FockVector) -> np.ndarray:
    """One-atom density matrix ``rho[l, lp] = <a_lp^dag a_l> / n``."""
    if v.n < 1:
        raise ParticleCountError("reduced density needs at least one atom")
    rho = np.empty((2, 2), dtype=complex)
    for l in (0, 1):
        for lp in (0, 1):
            rho[l, lp] = correlator_one(v, lp, l) / v.n
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def table1_correlators(encoding: str, n: int, q: QubitAmplitudes, l: int, lp: int) -> tuple[complex, float]:
    """Closed-form ``(<a_l^dag a_lp>, <a_l^dag a_l a_lp^dag a_lp>)`` for an encoding.

    The pair value is the normal-ordered form, matching :func:`correlator_two`.
    The CAT row holds for ``n >= 2`` only: at ``n = 1`` the two branches differ
    by a single hop and the state coincides with ``F_1``.
    """
    psi = (q.psi0, q.psi1)
    if encoding == "fn":
        one = n * psi[l].conjugate() * psi[lp]
        two = n * (n - 1) * abs(psi[l]) ** 2 * abs(psi[lp]) ** 2
    elif encoding == "cat":
        if n < 2:
            raise ParticleCountError(f"CAT closed forms need n >= 2, got {n}")
        same = 1.0 if l == lp else 0.0
        one = n * abs(psi[l]) ** 2 * same
        two = n * (n - 1) * abs(psi[l]) ** 2 * same
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    return complex(one), float(two)


def encode(encoding: str, n: int, q: QubitAmplitudes) -> FockVector:
    if encoding == "fn":
        return encode_fn(n, q)
    if encoding == "cat":
        return encode_cat(n, q)
    raise ValueError(f"unknown encoding {encoding!r}")


@dataclass(frozen=True)
class Tridiagonal:
    """Real symmetric tridiagonal matrix."""

    diagonal: np.ndarray
    offdiagonal: np.ndarray
    offset: float = 0.0

    def dense(self) -> np.ndarray:
        return np.diag(self.diagonal) + np.diag(self.offdiagonal, 1) + np.diag(self.offdiagonal, -1)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diagonal * x
        y[:-1] += self.offdiagonal * x[1:]
        y[1:] += self.offdiagonal * x[:-1]
        return y

    def spectral_bounds(self) -> tuple[float, float]:
        radius = np.zeros_like(self.diagonal)
        radius[:-1] += np.abs(self.offdiagonal)
        radius[1:] += np.abs(self.offdiagonal)
        return float(np.min(self.diagonal - radius)), float(np.max(self.diagonal + radius))


def hamiltonian(p: TwoModeParams) -> Tridiagonal:
    """Two-mode Hamiltonian in the ``|k, n-k>`` basis (offset stored separately)."""
    n = p.n
    k = np.arange(n + 1, dtype=float)
    m = n - k
    diag = ((mode_frequency(p, 0) + p.v00) * k + (mode_frequency(p, 1) + p.v11) * m
            + p.gamma * k * (k - 1) + p.gamma * m * (m - 1) + p.gamma_prime * k * m)
    off = p.v01 * np.sqrt((k[:-1] + 1) * (n - k[:-1]))
    return Tridiagonal(diag, off, p.kinetic_offset)


@lru_cache(maxsize=64)
def eigensystem(p: TwoModeParams) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of :func:`hamiltonian` (cached, read-only)."""
    h = hamiltonian(p)
    try:
        w, u = linalg.eigh_tridiagonal(h.diagonal, h.offdiagonal)
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"tridiagonal eigensolver failed for n={p.n}") from exc
    w.setflags(write=False)
    u.setflags(write=False)
    return w, u


def _evolve_eig(coeffs: np.ndarray, p: TwoModeParams, t: float) -> np.ndarray:
    w, u = eigensystem(p)
    return u @ (np.exp(-1j * w * t) * (u.T @ coeffs))


def chebyshev_propagate(h: Tridiagonal, coeffs: np.ndarray, t: float, tol: float = 1e-15) -> np.ndarray:
    """``exp(-i H t) coeffs`` by a Chebyshev expansion with Bessel weights."""
    emin, emax = h.spectral_bounds()
    half = 0.5 * (emax - emin)
    mid = 0.5 * (emax + emin)
    if half == 0.0:
        return np.exp(-1j * mid * t) * coeffs
    scaled = Tridiagonal((h.diagonal - mid) / half, h.offdiagonal / half)
    x = half * t
    prev = np.array(coeffs, dtype=complex)
    acc = special.jv(0, x) * prev
    cur = scaled.matvec(prev)
    k = 1
    while True:
        jk = special.jv(k, x)
        acc += 2.0 * (-1j) ** k * jk * cur
        if k > x and abs(jk) < tol:
            break
        prev, cur = cur, 2.0 * scaled.matvec(cur) - prev
        k += 1
    return np.exp(-1j * mid * t) * acc


def evolve_exact(v: FockVector, p: TwoModeParams, t: float, method: str = "auto") -> FockVector:
    """Apply ``exp(-i H t)``.

    ``method`` is ``"eig"`` (cached tridiagonal eigendecomposition),
    ``"chebyshev"`` or ``"auto"`` (eig up to ``EIG_MAX_N`` atoms).
    """
    if v.n != p.n:
        raise ParticleCountError(f"state has {v.n} atoms, Hamiltonian has {p.n}")
    if not (math.isfinite(t) and t >= 0):
        raise ValueError(f"evolution time must be non-negative, got {t!r}")
    if t == 0:
        return v
    if method == "auto":
        method = "eig" if p.n <= EIG_MAX_N else "chebyshev"
    if method == "eig":
        out = _evolve_eig(v.coeffs, p, t)
    elif method == "chebyshev":
        out = chebyshev_propagate(hamiltonian(p), v.coeffs, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    return FockVector.unnormalized(v.n, out)


@dataclass(frozen=True)
class ModelError:
    epsilon: float
    meanfield_state: QubitAmplitudes
    rho_meanfield: np.ndarray
    rho_exact: np.ndarray


def evolve_meanfield(q0: QubitAmplitudes, params: EffectiveParams, t: float,
                     dt: float | None = None) -> QubitAmplitudes:
    if t == 0:
        return q0
    return integrate(q0, ControlSchedule.constant(params, t), dt, dense=False)[-1][1]


def model_error(p: TwoModeParams, q0: QubitAmplitudes, t: float, dt: float | None = None) -> ModelError:
    """Trace distance between the mean-field state and the exact one-atom state.

    The exact side evolves ``encode_fn(n, q0)`` under :func:`hamiltonian`; the
    mean-field side evolves ``q0`` with ``(V01, Bz, g)`` derived from ``p``.
    """
    exact = evolve_exact(encode_fn(p.n, q0), p, t)
    rho_exact = reduced_density(exact)
    q_t = evolve_meanfield(q0, p.effective_params(), t, dt)
    rho_mf = q_t.density_matrix()
    return ModelError(trace_distance_matrices(rho_mf, rho_exact), q_t, rho_mf, rho_exact)


@dataclass(frozen=True)
class SweepRow:
    n: int
    t: float
    epsilon: float

    @property
    def n_times_epsilon(self) -> float:
        return self.n * self.epsilon


def model_error_sweep(base: TwoModeParams, ns, ts, q0: QubitAmplitudes,
                      dt: float | None = None) -> list[SweepRow]:
    """Model error on the ``ns x ts`` grid, ordered by ``n`` then ``t``.

    The mean-field trajectory does not depend on ``n`` and is computed once per
    time.
    """
    params = base.effective_params()
    mf = {t: evolve_meanfield(q0, params, t, dt).density_matrix() for t in ts}
    rows = []
    for n in ns:
        p = base.with_n(n)
        v0 = encode_fn(n, q0)
        for t in ts:
            rho = reduced_density(evolve_exact(v0, p, t))
            rows.append(SweepRow(n, t, trace_distance_matrices(mf[t], rho)))
    return rows


def fit_error_bound(ts, n_eps) -> tuple[float, float]:
    """Fit ``n * eps = c (exp(t / t_ent) - 1)``; returns ``(c, t_ent)``."""
    ts = np.asarray(ts, dtype=float)
    n_eps = np.asarray(n_eps, dtype=float)
    if ts.size < 2:
        raise ValueError("need at least two times to fit the error bound")

    def model(t, c, t_ent):
        return c * np.expm1(t / t_ent)

    guess = (max(float(n_eps[-1]), 1e-12), max(float(ts[-1]), 1e-12))
    with warnings.catch_warnings():
        # two points determine the fit exactly; the covariance is then undefined
        warnings.simplefilter("ignore", optimize.OptimizeWarning)
        popt, _ = optimize.curve_fit(model, ts, n_eps, p0=guess, bounds=([0.0, 1e-9], [np.inf, np.inf]),
                                     maxfev=20000)
    return float(popt[0]), float(popt[1])


def write_model_error_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "t", "epsilon", "n_times_epsilon"])
        for r in rows:
            writer.writerow([r.n, format(r.t, ".17g"), format(r.epsilon, ".17g"),
                             format(r.n_times_epsilon, ".17g")])
