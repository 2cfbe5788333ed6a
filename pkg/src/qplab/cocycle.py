"""Quasiperiodic cocycles and their Lyapunov/rotation data.

The two concrete families are the 2x2 Schrödinger cocycle

    A_E(z) = [[E - V(z), -1], [1, 0]]

and the 2d x 2d companion cocycle of the dual finite-range operator, whose
first row is ``(1/V_d) * (-V_{d-1}, ..., -V_1, E - V_0 - 2cos(2 pi z),
-V_{-1}, ..., -V_{-d})`` over an identity subdiagonal.  Transfer products are
kept in factored form (unit-scale matrix times ``exp(log_scale)``) so they
never overflow; Lyapunov spectra come from periodically re-orthonormalized
products (QR deflation) batched over a torus grid.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    ConfigError,
    DegenerateLeadingCoefficient,
    NonAffineWarning,
    NotSubcritical,
    NumericError,
    SingularInverse,
)

__all__ = [
    "TrigPolynomial",
    "QuasiperiodicCocycle",
    "LyapunovSpectrum",
    "AccelerationFit",
    "RotationResult",
    "schrodinger_cocycle",
    "dual_cocycle",
    "transfer_product",
    "transfer_log_norms",
    "lyapunov_spectrum",
    "acceleration",
    "subcritical_radius",
    "rotation_number",
    "symplectic_form",
    "symplectic_convention",
]

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


class TrigPolynomial:
    """Real trigonometric polynomial ``V(z) = sum_k V_k e^{2 pi i k z}``.

    Coefficients satisfy ``V_{-k} = conj(V_k)`` so that ``V`` is real on the
    real axis.  Construct from the nonnegative-frequency coefficients
    ``[V_0, V_1, ..., V_d]`` (the negative side is filled in by conjugation)
    or from a full ``{k: V_k}`` mapping, which is validated.
    """

    def __init__(self, coeffs: Union[Sequence[complex], Mapping[int, complex]]):
        if isinstance(coeffs, Mapping):
            ks = sorted(coeffs)
            d = max((abs(k) for k in ks), default=0)
            full = np.zeros(2 * d + 1, dtype=complex)
            for k, v in coeffs.items():
                full[k + d] = complex(v)
            for k in range(1, d + 1):
                lo, hi = full[d - k], full[d + k]
                if lo == 0 and hi != 0:
                    full[d - k] = np.conj(hi)
                elif hi == 0 and lo != 0:
                    full[d + k] = np.conj(lo)
                elif abs(lo - np.conj(hi)) > 1e-12 * max(1.0, abs(hi)):
                    raise ConfigError(
                        f"coefficients at +-{k} violate V_-k = conj(V_k)"
                    )
        else:
            half = np.asarray([complex(v) for v in coeffs], dtype=complex)
            if half.size == 0:
                raise ConfigError("potential needs at least the constant coefficient")
            if abs(half[0].imag) > 1e-14 * max(1.0, abs(half[0])):
                raise ConfigError("V_0 must be real for a real-valued potential")
            d = half.size - 1
            full = np.concatenate([np.conj(half[1:][::-1]), half.real[:1], half[1:]])
        # trim exact-zero leading coefficients so the degree is exact
        while full.size > 1 and full[0] == 0 and full[-1] == 0:
            full = full[1:-1]
        self.coeffs = full
        self.degree = (full.size - 1) // 2

    @classmethod
    def amo(cls, coupling: float) -> "TrigPolynomial":
        """``V(z) = 2 * coupling * cos(2 pi z)``."""
        return cls([0.0, float(coupling)])

    @classmethod
    def zero(cls) -> "TrigPolynomial":
        return cls([0.0])

    def coeff(self, k: int) -> complex:
        d = self.degree
        if abs(k) > d:
            return 0.0 + 0.0j
        return complex(self.coeffs[k + d])

    @property
    def leading(self) -> complex:
        """``V_d``, the top Fourier coefficient."""
        return self.coeff(self.degree)

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.coeffs == 0))

    def __call__(self, z):
        z = np.asarray(z)
        d = self.degree
        ks = np.arange(-d, d + 1)
        phases = np.exp(2j * np.pi * np.multiply.outer(ks, z))
        values = np.tensordot(self.coeffs, phases, axes=(0, 0))
        if z.ndim == 0:
            out = complex(values)
            return out.real if abs(out.imag) < 1e-13 * max(1.0, abs(out)) and (
                np.isrealobj(z) or z.imag == 0
            ) else out
        return values

    def __repr__(self) -> str:
        return f"TrigPolynomial(degree={self.degree}, coeffs={self.coeffs!r})"


# ---------------------------------------------------------------------------
# cocycles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuasiperiodicCocycle:
    """Analytic matrix map over the rotation by ``alpha``, as Fourier data.

    ``fourier[m]`` is the ``dim x dim`` coefficient matrix of the mode
    ``modes[m]``; evaluation is ``A(z) = sum_m fourier[m] e^{2 pi i modes[m] z}``
    for complex ``z``.  ``kind`` is one of ``"schrodinger"``,
    ``"dual"``, or ``"generic"``.
    """

    alpha: float
    dim: int
    modes: tuple[int, ...]
    fourier: np.ndarray
    kind: str = "generic"
    potential: TrigPolynomial | None = field(default=None, compare=False)
    energy: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.fourier.shape != (len(self.modes), self.dim, self.dim):
            raise ConfigError("fourier data shape mismatch")
        if self.kind == "schrodinger":
            for theta in (0.0, 0.137, 0.548, 0.9031):
                det = np.linalg.det(self(theta))
                if abs(det - 1.0) > 1e-12 * max(1.0, abs(det)):
                    raise ConfigError(
                        f"Schrödinger cocycle must have det 1, got {det}"
                    )
        elif self.kind == "dual":
            for theta in (0.0, 0.137, 0.548, 0.9031):
                det = np.linalg.det(self(theta))
                if abs(abs(det) - 1.0) > 1e-10:
                    raise ConfigError(
                        f"dual cocycle must have |det| = 1, got |det| = {abs(det)}"
                    )

    @classmethod
    def constant(cls, matrix, alpha: float, kind: str = "generic") -> "QuasiperiodicCocycle":
        mat = np.asarray(matrix, dtype=complex)
        return cls(
            alpha=float(alpha),
            dim=mat.shape[0],
            modes=(0,),
            fourier=mat[None, :, :].copy(),
            kind=kind,
        )

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        ms = np.asarray(self.modes)
        phases = np.exp(2j * np.pi * np.multiply.outer(ms, z))
        values = np.tensordot(phases, self.fourier, axes=(0, 0))
        if z.ndim == 0:
            return values.reshape(self.dim, self.dim)
        return values

    @property
    def half_dim(self) -> int:
        """Number of non-negative Lyapunov exponents (``dim // 2``)."""
        return self.dim // 2


def schrodinger_cocycle(V: TrigPolynomial, E: float, alpha: float) -> QuasiperiodicCocycle:
    """The 2x2 cocycle ``A_E(z) = [[E - V(z), -1], [1, 0]]`` over ``alpha``."""
    d = V.degree
    modes = list(range(-d, d + 1)) if not V.is_zero else [0]
    fourier = np.zeros((len(modes), 2, 2), dtype=complex)
    for m, k in enumerate(modes):
        fourier[m, 0, 0] = -V.coeff(k)
        if k == 0:
            fourier[m, 0, 0] += E
            fourier[m, 0, 1] = -1.0
            fourier[m, 1, 0] = 1.0
    return QuasiperiodicCocycle(
        alpha=float(alpha),
        dim=2,
        modes=tuple(modes),
        fourier=fourier,
        kind="schrodinger",
        potential=V,
        energy=float(E),
    )


def dual_cocycle(V: TrigPolynomial, E: float, alpha: float) -> QuasiperiodicCocycle:
    """Companion cocycle of the dual finite-range operator at energy ``E``.

    First row ``(1/V_d)(-V_{d-1}, ..., -V_1, E - V_0 - 2cos(2 pi z),
    -V_{-1}, ..., -V_{-d})``, identity subdiagonal.  Propagates the state
    ``(u_{n+d-1}, ..., u_{n-d})`` of the dual eigenvalue equation.
    """
    d = V.degree
    if d == 0 or abs(V.leading) < 1e-14:
        raise DegenerateLeadingCoefficient(
            "dual cocycle needs a nonzero top Fourier coefficient"
        )
    lead = V.leading
    dim = 2 * d
    modes = (-1, 0, 1)
    fourier = np.zeros((3, dim, dim), dtype=complex)
    # first row, constant mode
    for col in range(d - 1):
        fourier[1, 0, col] = -V.coeff(d - 1 - col) / lead
    fourier[1, 0, d - 1] = (E - V.coeff(0)) / lead
    for col in range(d, 2 * d):
        fourier[1, 0, col] = -V.coeff(-(col - d + 1)) / lead
    # -2 cos(2 pi z) spread over the two unit modes on the (0, d-1) entry
    fourier[0, 0, d - 1] = -1.0 / lead
    fourier[2, 0, d - 1] = -1.0 / lead
    # identity subdiagonal
    for i in range(1, dim):
        fourier[1, i, i - 1] = 1.0
    return QuasiperiodicCocycle(
        alpha=float(alpha),
        dim=dim,
        modes=modes,
        fourier=fourier,
        kind="dual",
        potential=V,
        energy=float(E),
    )


# ---------------------------------------------------------------------------
# transfer products
# ---------------------------------------------------------------------------


def _rescale(M: np.ndarray, log_scale: float) -> tuple[np.ndarray, float]:
    norm = np.linalg.norm(M, 2)
    if norm == 0.0:
        raise NumericError("transfer product collapsed to the zero matrix")
    if not (0.5 <= norm <= 2.0):
        return M / norm, log_scale + math.log(norm)
    return M, log_scale


def transfer_product(
    c: QuasiperiodicCocycle, z: complex, n: int
) -> tuple[np.ndarray, float]:
    """The ``n``-step product ``A_n(z)`` in factored form ``M * exp(log_scale)``.

    ``M`` is kept with spectral norm in ``[1/2, 2]`` so products up to
    ``n ~ 1e7`` cannot overflow.  Negative ``n`` uses the inverse-product
    branch ``A_{-k}(z) = A_k(z - k alpha)^{-1}`` expanded into factor-by-factor
    inverses.

    Raises
    ------
    SingularInverse
        For ``n < 0`` when some factor has condition number above 1e14.
    """
    dim = c.dim
    M = np.eye(dim, dtype=complex)
    log_scale = 0.0
    if n == 0:
        return M, log_scale
    alpha = c.alpha
    z = complex(z)

    def at(step: int):
        # evaluate with the real part reduced mod 1: the map is 1-periodic
        # and large arguments erode the accuracy of the complex exponentials
        return c((z.real + step * alpha) % 1.0 + 1j * z.imag)

    if n > 0:
        for k in range(n):
            M = at(k) @ M
            M, log_scale = _rescale(M, log_scale)
    else:
        for k in range(1, -n + 1):
            factor = at(-k)
            inv = np.linalg.inv(factor)
            cond = np.linalg.norm(factor, 2) * np.linalg.norm(inv, 2)
            if not np.isfinite(cond) or cond > 1e14:
                raise SingularInverse(
                    f"factor at step -{k} has condition {cond:.3e}"
                )
            M = inv @ M
            M, log_scale = _rescale(M, log_scale)
    return M, log_scale


def transfer_log_norms(c: QuasiperiodicCocycle, z: complex, N: int) -> np.ndarray:
    """``log ||A_n(z)||`` for ``n = 1..N`` in one forward sweep."""
    dim = c.dim
    M = np.eye(dim, dtype=complex)
    log_scale = 0.0
    out = np.empty(N)
    z = complex(z)
    for k in range(N):
        M = c((z.real + k * c.alpha) % 1.0 + 1j * z.imag) @ M
        M, log_scale = _rescale(M, log_scale)
        out[k] = log_scale + math.log(np.linalg.norm(M, 2))
    return out


# ---------------------------------------------------------------------------
# Lyapunov spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovSpectrum:
    """Non-negative Lyapunov exponents of a cocycle at one strip height.

    ``exponents`` are floored at zero (near-zero exponents fluctuate at the
    ``O(N^{-1/2})`` level); ``raw`` keeps the unfloored estimates.  ``stderr``
    is the bootstrap standard error of the top exponent over the torus grid;
    ``stderrs`` has one entry per exponent.
    """

    exponents: tuple[float, ...]
    raw: tuple[float, ...]
    N: int
    theta_samples: int
    epsilon: float
    stderr: float
    stderrs: tuple[float, ...]

    def partial_sum(self, k: int) -> float:
        """``L^k = gamma_1 + ... + gamma_k`` from the raw estimates."""
        if not 1 <= k <= len(self.raw):
            raise ConfigError(f"k must be in 1..{len(self.raw)}, got {k}")
        return float(sum(self.raw[:k]))

    @property
    def top(self) -> float:
        return self.exponents[0]


def lyapunov_spectrum(
    c: QuasiperiodicCocycle,
    epsilon: float = 0.0,
    N: int = 4000,
    samples: int = 32,
    seed: int = 0,
    cadence: int = 20,
) -> LyapunovSpectrum:
    """All ``dim/2`` non-negative exponents at strip height ``epsilon``.

    Products over each of ``samples`` torus points (uniform grid plus one
    seeded random offset) are re-orthonormalized by QR every ``cadence``
    steps; per-point exponents are averaged and bootstrap-resampled for a
    standard error.
    """
    if N < 100:
        raise ConfigError(f"N must be >= 100, got {N}")
    if samples < 1:
        raise ConfigError(f"samples must be >= 1, got {samples}")
    rng = np.random.default_rng(seed)
    offset = rng.random()
    thetas = (np.arange(samples) + offset) / samples
    dim = c.dim
    half = c.half_dim

    Q = np.broadcast_to(np.eye(dim, dtype=complex), (samples, dim, dim)).copy()
    log_sums = np.zeros((samples, dim))
    steps_since_qr = 0
    for k in range(N):
        A = c(np.mod(thetas + k * c.alpha, 1.0) + 1j * epsilon)
        Q = A @ Q
        steps_since_qr += 1
        if steps_since_qr == cadence or k == N - 1:
            Qf, R = np.linalg.qr(Q)
            diag = np.abs(np.einsum("sii->si", R))
            if np.any(diag == 0.0):
                diag = np.maximum(diag, 1e-300)
            log_sums += np.log(diag)
            Q = Qf
            steps_since_qr = 0

    per_theta = log_sums / N  # (samples, dim), descending by construction
    mean = per_theta.mean(axis=0)
    raw = mean[:half]

    boots = np.empty((200, half))
    for b in range(200):
        idx = rng.integers(0, samples, size=samples)
        boots[b] = per_theta[idx, :half].mean(axis=0)
    stderrs = boots.std(axis=0, ddof=1)

    return LyapunovSpectrum(
        exponents=tuple(float(max(g, 0.0)) for g in raw),
        raw=tuple(float(g) for g in raw),
        N=N,
        theta_samples=samples,
        epsilon=float(epsilon),
        stderr=float(stderrs[0]),
        stderrs=tuple(float(s) for s in stderrs),
    )


# ---------------------------------------------------------------------------
# acceleration and subcritical radius
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AccelerationFit:
    """Least-squares slope of ``eps -> L^k(eps)`` in acceleration units.

    ``omega`` is the raw slope divided by ``2 pi``; ``nearest`` the closest
    integer; ``residual`` the RMS deviation (nats) of the affine fit.
    """

    omega: float
    nearest: int
    residual: float
    slope: float
    eps_grid: tuple[float, ...]
    values: tuple[float, ...]

    def __float__(self) -> float:
        return self.omega


def acceleration(
    c: QuasiperiodicCocycle,
    which: int,
    eps_grid: Sequence[float],
    N: int = 4000,
    samples: int = 32,
    seed: int = 0,
) -> AccelerationFit:
    """Fitted acceleration of the ``which``-th partial exponent sum.

    Emits :class:`NonAffineWarning` when the affine fit leaves an RMS
    residual above 0.05 nats, which signals a regularity breakpoint
    (a quantization jump) inside the grid.
    """
    eps = np.asarray(sorted(float(e) for e in eps_grid))
    if eps.size < 3 or np.any(eps <= 0):
        raise ConfigError("eps_grid needs at least 3 positive heights")
    values = np.array(
        [
            lyapunov_spectrum(c, epsilon=e, N=N, samples=samples, seed=seed).partial_sum(
                which
            )
            for e in eps
        ]
    )
    slope, intercept = np.polyfit(eps, values, 1)
    fitted = slope * eps + intercept
    residual = float(np.sqrt(np.mean((values - fitted) ** 2)))
    if residual > 0.05:
        warnings.warn(
            f"affine fit residual {residual:.3g} exceeds 0.05; "
            "a regularity breakpoint may lie inside the grid",
            NonAffineWarning,
        )
    omega = float(slope / TWO_PI)
    return AccelerationFit(
        omega=omega,
        nearest=round(omega),
        residual=residual,
        slope=float(slope),
        eps_grid=tuple(float(e) for e in eps),
        values=tuple(float(v) for v in values),
    )


def subcritical_radius(
    c: QuasiperiodicCocycle,
    eps_grid: Sequence[float],
    N: int = 4000,
    samples: int = 32,
    seed: int = 0,
    threshold: float = 0.01,
    refine_to: float = 1e-3,
) -> float:
    """Numerical strip height up to which the top exponent stays at zero.

    The largest grid height with ``L_eps < threshold``, refined by bisection
    to ``refine_to``; capped at the top of the grid when every height passes.

    Raises
    ------
    NotSubcritical
        If already ``L_0 >= threshold`` on the real axis.
    """
    eps = sorted(float(e) for e in eps_grid)
    if not eps or eps[0] <= 0:
        raise ConfigError("eps_grid must contain positive heights")

    def top(e: float) -> float:
        return lyapunov_spectrum(c, epsilon=e, N=N, samples=samples, seed=seed).raw[0]

    l0 = top(0.0)
    if l0 >= threshold:
        raise NotSubcritical(
            f"top exponent on the real axis is {l0:.4f} >= {threshold}"
        )
    last_good = 0.0
    first_bad = None
    for e in eps:
        if top(e) < threshold:
            last_good = e
        else:
            first_bad = e
            break
    if first_bad is None:
        return eps[-1]
    lo, hi = last_good, first_bad
    while hi - lo > refine_to:
        mid = 0.5 * (lo + hi)
        if top(mid) < threshold:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# rotation number
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RotationResult:
    """Fibered rotation number folded to ``[0, 1/2]``, with an O(1/N) error bar."""

    value: float
    error: float
    N: int

    def __float__(self) -> float:
        return self.value


def _column_winding(c: QuasiperiodicCocycle, grid: int = 256) -> float:
    thetas = np.arange(grid + 1) / grid
    cols = c(thetas)[:, :, 0]
    angles = np.angle(cols[:, 0] + 1j * cols[:, 1])
    increments = np.angle(np.exp(1j * np.diff(angles)))
    return float(np.sum(increments) / TWO_PI)


def rotation_number(
    c: QuasiperiodicCocycle, N: int = 20000, theta0: float = 0.0
) -> RotationResult:
    """Birkhoff average of projective angle increments along one orbit.

    Requires a real 2x2 cocycle homotopic to the identity (checked through
    the winding of the first column over the torus).  The result is folded
    to ``[0, 1/2]`` by the direction symmetry of real projective dynamics.
    """
    if c.dim != 2:
        raise ConfigError("rotation number is defined for 2x2 cocycles")
    winding = _column_winding(c)
    if abs(winding) > 0.25:
        raise ConfigError(
            f"cocycle is not homotopic to the identity (column winding {winding:.2f})"
        )
    thetas = (theta0 + c.alpha * np.arange(N)) % 1.0
    mats = c(thetas)
    if np.max(np.abs(mats.imag)) > 1e-12:
        raise ConfigError("rotation number needs a real cocycle on the real axis")
    a = mats[:, 0, 0].real
    b = mats[:, 0, 1].real
    cc = mats[:, 1, 0].real
    dd = mats[:, 1, 1].real
    if np.min(a * dd - b * cc) <= 0.0:
        raise ConfigError(
            "rotation number needs an orientation-preserving cocycle (det > 0)"
        )
    # Lifted increment per step, pinned by the polar decomposition
    # A = R(chi) P: the rotation angle is chi = atan2(c - b, a + d) and the
    # positive-definite factor P moves any direction by strictly less than
    # pi/2, so the residual delta is branch-unambiguous in (-pi/2, pi/2).
    chis = np.arctan2(cc - b, a + dd)
    v1, v2 = 1.0, 0.0
    total = 0.0
    prev = math.atan2(v2, v1)
    for k in range(N):
        w1 = a[k] * v1 + b[k] * v2
        w2 = cc[k] * v1 + dd[k] * v2
        ang = math.atan2(w2, w1)
        delta = ang - prev - chis[k]
        while delta > math.pi:
            delta -= TWO_PI
        while delta < -math.pi:
            delta += TWO_PI
        total += chis[k] + delta
        norm = math.hypot(w1, w2)
        v1, v2 = w1 / norm, w2 / norm
        prev = ang
    rho = total / (TWO_PI * N)
    folded = abs(rho) % 1.0
    folded = min(folded, 1.0 - folded)
    return RotationResult(value=folded, error=2.0 / N, N=N)


# ---------------------------------------------------------------------------
# symplectic structure of the dual cocycle
# ---------------------------------------------------------------------------


def symplectic_form(V: TrigPolynomial) -> np.ndarray:
    """The form ``Omega = [[0, -C*], [C, 0]]`` preserved by the dual cocycle.

    ``C`` is the upper-triangular d x d Toeplitz matrix built from
    ``(V_d, ..., V_1)``.
    """
    d = V.degree
    if d == 0:
        raise DegenerateLeadingCoefficient("symplectic form needs degree >= 1")
    C = np.zeros((d, d), dtype=complex)
    for i in range(d):
        for j in range(i, d):
            C[i, j] = V.coeff(d - (j - i))
    omega = np.zeros((2 * d, 2 * d), dtype=complex)
    omega[:d, d:] = -C.conj().T
    omega[d:, :d] = C
    return omega


def symplectic_convention(
    c: QuasiperiodicCocycle, probes: int = 5, seed: int = 7, tol: float = 1e-10
) -> tuple[str, float]:
    """Empirically select the convention in which the dual cocycle is symplectic.

    Tests both ``L^T Omega L = Omega`` and ``L* Omega L = Omega`` at random
    real phases and returns ``(name, max_error)`` for whichever holds to
    ``tol``.  Raises :class:`NumericError` if neither does.
    """
    if c.kind != "dual" or c.potential is None:
        raise ConfigError("symplectic probe applies to dual cocycles")
    omega = symplectic_form(c.potential)
    rng = np.random.default_rng(seed)
    err_t = 0.0
    err_a = 0.0
    scale = np.linalg.norm(omega, 2)
    for theta in rng.random(probes):
        L = c(theta)
        err_t = max(err_t, np.linalg.norm(L.T @ omega @ L - omega, 2) / scale)
        err_a = max(err_a, np.linalg.norm(L.conj().T @ omega @ L - omega, 2) / scale)
    if err_a <= tol:
        return "adjoint", err_a
    if err_t <= tol:
        return "transpose", err_t
    raise NumericError(
        f"no symplectic convention holds: transpose error {err_t:.2e}, "
        f"adjoint error {err_a:.2e}"
    )
