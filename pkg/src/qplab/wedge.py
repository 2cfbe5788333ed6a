"""Exterior-power minors of companion-cocycle products and their determinant
counterparts.

The k-step product of the companion (dual) cocycle of a finite-range operator
propagates length-2d solution windows.  Its exterior-power minors vanish at
exactly the energies where the operator has a solution pinned to prescribed
boundary sites, and the same zero set is carried by a determinant of a
rectangular section of the operator.  This module computes both sides in
overflow-safe log form, checks their ratio is an energy- and phase-independent
constant, expands large minors into boundary-block sums, and measures the
exponential bounds those expansions imply for Green's-function numerators.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev

from .cocycle import (
    LyapunovSpectrum,
    TrigPolynomial,
    dual_cocycle,
    lyapunov_spectrum,
    transfer_product,
)
from .errors import ConfigError, IndexOutOfRange, ZeroDenominator
from .operators import LogComplex, truncate

__all__ = [
    "WedgeMinorRequest",
    "RatioReport",
    "StructuralZeroReport",
    "NumeratorBoundReport",
    "compound_matrix",
    "wedge_minor",
    "general_truncated_det",
    "pinned_column_set",
    "ratio_constancy_check",
    "zero_set_correspondence",
    "block_tridiagonal",
    "block_minor_expansion",
    "block_structural_zeros",
    "numerator_bound_check",
]


def _log_det(M: np.ndarray) -> LogComplex:
    sign, logabs = np.linalg.slogdet(M)
    if sign == 0:
        return LogComplex(float("-inf"), 0.0)
    return LogComplex(float(logabs), float(np.angle(sign)))


def compound_matrix(M: np.ndarray, m: int) -> np.ndarray:
    """The ``m``-th exterior power of ``M`` as a dense matrix of minors.

    Rows and columns are indexed by the size-``m`` subsets of ``range(n)``
    in lexicographic order; entry ``(S, T)`` is the minor ``det M[S, T]``.
    """
    n = M.shape[0]
    if not 1 <= m <= n:
        raise ConfigError(f"exterior power order must be in [1, {n}], got {m}")
    combos = list(itertools.combinations(range(n), m))
    out = np.empty((len(combos), len(combos)), dtype=complex)
    for a, rows in enumerate(combos):
        for b, cols in enumerate(combos):
            out[a, b] = np.linalg.det(M[np.ix_(rows, cols)])
    return out


@dataclass(frozen=True)
class WedgeMinorRequest:
    """A minor of the exterior power of a k-step companion-cocycle product.

    ``rows`` and ``cols`` label solution-window slots by site offset: a
    length-2d window spans offsets ``d-1`` down to ``-d``, and the labels
    must be strictly increasing integers in ``[-d, d-1]``.
    """

    m: int
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    k: int

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "cols", tuple(self.cols))
        if self.m < 1:
            raise ConfigError(f"minor order must be >= 1, got {self.m}")
        if len(self.rows) != self.m or len(self.cols) != self.m:
            raise ConfigError(
                f"need exactly {self.m} row and column labels, got "
                f"{len(self.rows)} and {len(self.cols)}"
            )
        for labels in (self.rows, self.cols):
            if any(b <= a for a, b in zip(labels, labels[1:])):
                raise ConfigError(f"labels must be strictly increasing: {labels}")
        if self.k < 0:
            raise ConfigError(f"iterate count must be >= 0, got {self.k}")


def wedge_minor(
    V: TrigPolynomial, alpha: float, theta: complex, E: complex, req: WedgeMinorRequest
) -> LogComplex:
    """One minor of the ``m``-th exterior power of the k-step window product.

    Equals ``det M[rows, cols]`` of the k-step companion-cocycle product
    ``M``, with window slots addressed by site-offset labels.  Returned in
    log form; an exact zero has ``is_zero`` set.
    """
    c = dual_cocycle(V, E, alpha)
    d = c.half_dim
    if req.m > d:
        raise ConfigError(f"minor order must be <= {d}, got {req.m}")
    for label in (*req.rows, *req.cols):
        if not -d <= label <= d - 1:
            raise IndexOutOfRange(
                f"window labels must lie in [{-d}, {d - 1}], got {label}"
            )
    M, log_scale = transfer_product(c, theta, req.k)
    # slot of site-offset label t is d-1-t from the top of the window;
    # both lists reverse order together, so the two parities cancel
    ridx = [d - 1 - i for i in req.rows]
    cidx = [d - 1 - j for j in req.cols]
    minor = _log_det(M[np.ix_(ridx, cidx)])
    if minor.is_zero:
        return minor
    return LogComplex(minor.log_abs + req.m * log_scale, minor.phase)


def general_truncated_det(
    V: TrigPolynomial,
    alpha: float,
    theta: complex,
    E: complex,
    row_set,
    col_set,
) -> LogComplex:
    """Determinant of an arbitrary square row/column section of ``L - E``.

    ``row_set`` and ``col_set`` are lists of lattice sites (any integers,
    no duplicates, equal lengths); entry ``(x, y)`` of the ambient operator
    is ``V_{y-x} + (2 cos 2 pi (theta + x alpha) - E) [x = y]``.
    """
    rows = list(row_set)
    cols = list(col_set)
    if len(rows) != len(cols):
        raise ConfigError(
            f"row and column sets must have equal size, got {len(rows)} != {len(cols)}"
        )
    if not rows:
        raise ConfigError("row and column sets must be nonempty")
    if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
        raise IndexOutOfRange("row and column sets must not contain duplicates")
    lo = min(min(rows), min(cols))
    hi = max(max(rows), max(cols))
    M = truncate(V, alpha, theta, (lo, hi)).dense()
    M -= complex(E) * np.eye(hi - lo + 1)
    sub = M[np.ix_([r - lo for r in rows], [c - lo for c in cols])]
    return _log_det(sub)


def pinned_column_set(d: int, k: int, rows, cols) -> list[int]:
    """Column sites of the rectangular section sharing the minor's zero set.

    Against rows ``[0, k-1]``: the free left-boundary sites ``cols`` (labels
    in ``[-d, d-1]``), plus the bulk-and-right block ``[d, k+d-1]`` with the
    pinned sites ``k + i`` (``i`` in ``rows``) removed.
    """
    S = set(range(d, k + d)) - {k + i for i in rows}
    overlap = S & set(cols)
    if overlap:
        raise IndexOutOfRange(f"boundary labels collide with bulk sites: {overlap}")
    return sorted(S | set(cols))


@dataclass(frozen=True)
class RatioReport:
    """Constancy evidence for minor/determinant ratios across (k, E, theta).

    ``values[(k, E, theta)]`` holds the parity-normalized ratio
    ``minor * V_d^k * (-1)^(k m) / det``; ``constant`` is their mean and
    ``rel_spread`` the largest relative deviation from it.  Exact zeros of
    either side are skipped and counted in ``n_skipped``.
    """

    rows: tuple[int, ...]
    cols: tuple[int, ...]
    values: dict
    constant: complex
    rel_spread: float
    n_samples: int
    n_skipped: int


def ratio_constancy_check(
    V: TrigPolynomial,
    alpha: float,
    E_list,
    theta_list,
    k_list,
    rows,
    cols,
) -> RatioReport:
    """Check that minor and pinned-section determinant agree up to a constant.

    For every combination of ``k_list`` x ``E_list`` x ``theta_list`` the
    ratio of `wedge_minor` to ``V_d^{-k}`` times `general_truncated_det`
    over `pinned_column_set` is computed.  With this module's minor
    conventions the ratio alternates by ``(-1)^(k m)``; that parity factor
    is folded in, after which the ratio must be one constant.
    """
    k_list = sorted(set(int(k) for k in k_list))
    E_list = list(E_list)
    theta_list = list(theta_list)
    if len(k_list) < 3:
        raise ConfigError(f"need at least 3 distinct iterate counts, got {k_list}")
    if len(set(E_list)) < 3:
        raise ConfigError(f"need at least 3 distinct energies, got {E_list}")
    d = V.degree
    m = len(tuple(rows))
    vd = complex(V.coeff(d))
    values: dict = {}
    skipped = 0
    for k in k_list:
        req = WedgeMinorRequest(m=m, rows=tuple(rows), cols=tuple(cols), k=k)
        col_sites = pinned_column_set(d, k, req.rows, req.cols)
        row_sites = list(range(k))
        for E in E_list:
            for theta in theta_list:
                num = wedge_minor(V, alpha, theta, E, req)
                den = general_truncated_det(V, alpha, theta, E, row_sites, col_sites)
                if num.is_zero or den.is_zero:
                    skipped += 1
                    continue
                # fold in V_d^k and the (-1)^(k m) parity factor
                parity = -1.0 if (k * m) % 2 else 1.0
                ratio = complex(num / den) * vd**k * parity
                values[(k, complex(E), complex(theta))] = ratio
    if not values:
        raise ZeroDenominator("every sample hit an exact zero; nothing to compare")
    arr = np.array(list(values.values()))
    constant = complex(arr.mean())
    rel_spread = float(np.max(np.abs(arr - constant)) / abs(constant))
    return RatioReport(
        rows=tuple(rows),
        cols=tuple(cols),
        values=values,
        constant=constant,
        rel_spread=rel_spread,
        n_samples=len(arr),
        n_skipped=skipped,
    )


def zero_set_correspondence(
    V: TrigPolynomial,
    alpha: float,
    theta: complex,
    rows,
    cols,
    k: int,
    radius: float = 4.0,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Roots in ``E`` of the minor and of its determinant counterpart.

    Both sides are polynomials in ``E``; each is interpolated at
    ``2 (k + d)`` Chebyshev-spaced energies in ``[-radius, radius]`` and its
    roots found from the companion matrix of the interpolant.  Returns
    ``(minor_roots, det_roots, hausdorff_distance)``.
    """
    d = V.degree
    m = len(tuple(rows))
    req_rows, req_cols = tuple(rows), tuple(cols)
    col_sites = pinned_column_set(d, k, req_rows, req_cols)
    row_sites = list(range(k))
    npts = 2 * (k + d)
    nodes = np.cos(np.pi * (2 * np.arange(npts) + 1) / (2 * npts)) * radius

    def poly_roots(values: np.ndarray) -> np.ndarray:
        coef = chebyshev.chebfit(nodes / radius, values, npts - 1)
        keep = np.nonzero(np.abs(coef) > 1e-10 * np.max(np.abs(coef)))[0]
        coef = coef[: keep[-1] + 1]
        if len(coef) < 2:
            return np.array([], dtype=complex)
        return chebyshev.chebroots(coef) * radius

    minor_vals = np.array(
        [
            complex(
                wedge_minor(
                    V, alpha, theta, E, WedgeMinorRequest(m, req_rows, req_cols, k)
                )
            )
            for E in nodes
        ]
    )
    det_vals = np.array(
        [
            complex(general_truncated_det(V, alpha, theta, E, row_sites, col_sites))
            for E in nodes
        ]
    )
    ra, rb = poly_roots(minor_vals), poly_roots(det_vals)
    if len(ra) == 0 and len(rb) == 0:
        return ra, rb, 0.0
    if len(ra) == 0 or len(rb) == 0:
        return ra, rb, float("inf")
    da = max(min(abs(x - y) for y in rb) for x in ra)
    db = max(min(abs(x - y) for y in ra) for x in rb)
    return ra, rb, float(max(da, db))


# ---------------------------------------------------------------------------
# block-tridiagonal minor expansion
# ---------------------------------------------------------------------------


def block_tridiagonal(A: np.ndarray, B: np.ndarray, k: int) -> np.ndarray:
    """The ``kd x kd`` matrix with ``B`` blocks on the diagonal, ``A`` above,
    and ``A*`` below."""
    d = A.shape[0]
    if A.shape != (d, d) or B.shape != (d, d):
        raise ConfigError("blocks must be square matrices of equal size")
    if k < 2:
        raise ConfigError(f"need at least 2 blocks, got {k}")
    M = np.zeros((k * d, k * d), dtype=complex)
    for b in range(k):
        M[b * d : (b + 1) * d, b * d : (b + 1) * d] = B
        if b + 1 < k:
            M[b * d : (b + 1) * d, (b + 1) * d : (b + 2) * d] = A
            M[(b + 1) * d : (b + 2) * d, b * d : (b + 1) * d] = A.conj().T
    return M


def _validate_block_args(d: int, k: int, i: int, j: int, k0: int) -> None:
    # structural requirements: the two-block windows around the deleted row
    # must fit strictly between the left complement and the deleted column's
    # block (the regime of interest has k much larger than k0)
    if k0 < 2:
        raise ConfigError(f"need k0 >= 2, got {k0}")
    if k < k0 + 3:
        raise ConfigError(f"need k >= k0 + 3, got k={k}, k0={k0}")
    if not (k0 * d + 1 <= i <= (k0 + 1) * d):
        raise ConfigError(
            f"deleted row must lie in [{k0 * d + 1}, {(k0 + 1) * d}], got {i}"
        )
    if not ((k - 1) * d + 1 <= j <= k * d):
        raise ConfigError(
            f"deleted column must lie in [{(k - 1) * d + 1}, {k * d}], got {j}"
        )


def block_minor_expansion(
    A: np.ndarray, B: np.ndarray, k: int, i: int, j: int, k0: int
) -> tuple[float, float]:
    """Bound a deleted-row/column determinant by boundary-block sums.

    Sites are 1-based.  ``lhs`` is ``|det M|`` with row ``i`` and column
    ``j`` removed from the k-block tridiagonal matrix.  ``rhs`` expands by
    the two block rows around ``i``: a sum over size-``d`` column subsets
    ``sigma`` of the two blocks left of ``i`` and size-``(d-1)`` subsets
    ``tau`` of the two blocks right of ``i``, each term the product of the
    center factor and the two complementary determinants.  The triangle
    inequality gives ``lhs <= rhs``.
    """
    d = A.shape[0]
    _validate_block_args(d, k, i, j, k0)
    M = block_tridiagonal(A, B, k)
    lhs = float(abs(np.linalg.det(np.delete(np.delete(M, i - 1, 0), j - 1, 1))))

    center_rows = [r - 1 for r in range((k0 - 1) * d + 1, (k0 + 1) * d + 1) if r != i]
    low = range((k0 - 2) * d + 1, k0 * d + 1)
    high = range(k0 * d + 1, (k0 + 2) * d + 1)
    rows_left = [r - 1 for r in range(1, (k0 - 1) * d + 1)]
    rows_right = [r - 1 for r in range((k0 + 1) * d + 1, k * d + 1)]

    rhs = 0.0
    for sigma in itertools.combinations(low, d):
        cols_left = [c - 1 for c in range(1, k0 * d + 1) if c not in sigma]
        mu_sigma = np.linalg.det(M[np.ix_(rows_left, cols_left)])
        for tau in itertools.combinations(high, d - 1):
            center_cols = [c - 1 for c in sorted(set(sigma) | set(tau))]
            center = np.linalg.det(M[np.ix_(center_rows, center_cols)])
            cols_right = [
                c - 1
                for c in range(k0 * d + 1, k * d + 1)
                if c not in tau and c != j
            ]
            mu_tau = np.linalg.det(M[np.ix_(rows_right, cols_right)])
            rhs += float(abs(center * mu_sigma * mu_tau))
    return lhs, rhs


@dataclass(frozen=True)
class StructuralZeroReport:
    """Exact-zero evidence for excluded index patterns of the expansion.

    ``center``: patterns whose column choice leaves the two center block
    rows with a zero column (columns outside their band support).
    ``complement``: in-band patterns taking too many columns from one side,
    forcing a zero column into a triangular block of the complement.
    """

    n_center_patterns: int
    max_center: float
    n_complement_patterns: int
    max_complement: float
    scale: float


def block_structural_zeros(
    A: np.ndarray, B: np.ndarray, k: int, i: int, j: int, k0: int
) -> StructuralZeroReport:
    """Verify the vanishing patterns that prune the minor expansion.

    Enumerates column subsets ``gamma`` of size ``2d-1``: those reaching
    outside the center rows' band support must zero the center factor, and
    in-band subsets with more than ``d`` columns in the left half (or more
    than ``d-1`` in the right half) must zero the complement factor.
    """
    d = A.shape[0]
    _validate_block_args(d, k, i, j, k0)
    M = block_tridiagonal(A, B, k)
    scale = float(np.max(np.abs(M)))
    center_rows = [r - 1 for r in range((k0 - 1) * d + 1, (k0 + 1) * d + 1) if r != i]

    lo_lim = (k0 - 2) * d  # gamma_1 <= lo_lim leaves a zero column
    hi_lim = (k0 + 2) * d + 1  # gamma_max >= hi_lim likewise
    window = range(max(1, (k0 - 3) * d + 1), min(k * d, (k0 + 3) * d) + 1)
    n_center, max_center = 0, 0.0
    for gamma in itertools.combinations(window, 2 * d - 1):
        if gamma[0] <= lo_lim or gamma[-1] >= hi_lim:
            cols = [c - 1 for c in gamma]
            val = float(abs(np.linalg.det(M[np.ix_(center_rows, cols)])))
            n_center += 1
            max_center = max(max_center, val)

    comp_rows = [
        r - 1
        for r in range(1, k * d + 1)
        if not ((k0 - 1) * d + 1 <= r <= (k0 + 1) * d)
    ]
    low_set = set(range((k0 - 2) * d + 1, k0 * d + 1))
    high_set = set(range(k0 * d + 1, (k0 + 2) * d + 1))
    n_comp, max_comp = 0, 0.0
    for gamma in itertools.combinations(sorted(low_set | high_set), 2 * d - 1):
        if len(set(gamma) & low_set) > d or len(set(gamma) & high_set) > d - 1:
            cols = [
                c - 1 for c in range(1, k * d + 1) if c not in gamma and c != j
            ]
            val = float(abs(np.linalg.det(M[np.ix_(comp_rows, cols)])))
            n_comp += 1
            max_comp = max(max_comp, val)
    return StructuralZeroReport(
        n_center_patterns=n_center,
        max_center=max_center,
        n_complement_patterns=n_comp,
        max_complement=max_comp,
        scale=scale,
    )


# ---------------------------------------------------------------------------
# numerator bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NumeratorBoundReport:
    """Exponential bound check for Green's-function numerators.

    For each interior site ``y``, ``log_mu[y]`` is ``ln |mu_{x,y}|`` of the
    deleted-row/column determinant over the interval, ``margins[y]`` is
    ``ln(bound) - ln |mu|`` with the two-sided exponential bound built from
    the companion-cocycle Lyapunov exponents, and ``decay_rate`` the
    least-squares decay of ``ln |mu|`` per site.
    """

    interval: tuple[int, int]
    x: int
    eps: float
    gammas: tuple[float, ...]
    log_hopping: float
    prefactor_log: float
    y_sites: tuple[int, ...]
    log_mu: dict = field(repr=False)
    margins: dict = field(repr=False)
    min_margin: float
    decay_rate: float


def numerator_bound_check(
    V: TrigPolynomial,
    alpha: float,
    theta: float,
    E: complex,
    I: tuple[int, int],
    x: int,
    y_sites,
    eps: float,
    spectrum: LyapunovSpectrum | None = None,
) -> NumeratorBoundReport:
    """Measure ``|mu_{x,y}|`` against its two-sided exponential bound.

    ``mu_{x,y}`` is the determinant of the interval section of ``L - E``
    with row ``y`` and column ``x`` deleted.  The bound is
    ``C * exp((g_{d-1} + ln|V_d| + eps)|y - x1| + (g_d + ln|V_d| + eps)|y - x2|)``
    with ``g_m`` the sum of the top ``m`` companion-cocycle Lyapunov
    exponents and ``C = exp(eps * |I| / d)``.
    """
    x1, x2 = I
    d = V.degree
    if d < 1:
        raise ConfigError("potential must have degree >= 1")
    size = x2 - x1 + 1
    if size < 30 * d:
        raise ConfigError(f"interval length must be >= {30 * d}, got {size}")
    if not x1 <= x <= x1 + d - 1:
        raise ConfigError(f"x must lie in [{x1}, {x1 + d - 1}], got {x}")
    y_sites = tuple(int(y) for y in y_sites)
    for y in y_sites:
        if not x1 + d <= y <= x2 - d:
            raise ConfigError(f"y sites must be interior, got {y}")
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    if spectrum is None:
        spectrum = lyapunov_spectrum(
            dual_cocycle(V, E, alpha), N=4000, samples=16, seed=2
        )
    gammas = tuple(spectrum.exponents[:d])
    log_vd = math.log(abs(complex(V.coeff(d))))
    prefactor_log = eps * size / d

    M = truncate(V, alpha, theta, I).dense()
    M -= complex(E) * np.eye(size)
    log_mu: dict = {}
    margins: dict = {}
    for y in y_sites:
        sub = np.delete(np.delete(M, y - x1, 0), x - x1, 1)
        _, logabs = np.linalg.slogdet(sub)
        bound = (
            prefactor_log
            + (sum(gammas[: d - 1]) + log_vd + eps) * abs(y - x1)
            + (sum(gammas) + log_vd + eps) * abs(y - x2)
        )
        log_mu[y] = float(logabs)
        margins[y] = float(bound - logabs)
    ys = np.array(y_sites, dtype=float)
    vals = np.array([log_mu[y] for y in y_sites])
    decay_rate = float(-np.polyfit(ys, vals, 1)[0]) if len(y_sites) >= 2 else 0.0
    return NumeratorBoundReport(
        interval=I,
        x=x,
        eps=eps,
        gammas=gammas,
        log_hopping=log_vd,
        prefactor_log=prefactor_log,
        y_sites=y_sites,
        log_mu=log_mu,
        margins=margins,
        min_margin=float(min(margins.values())),
        decay_rate=decay_rate,
    )
