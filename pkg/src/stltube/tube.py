"""Tube boundary curves over polynomial and piecewise-polynomial bases.

Boundaries are stored as coefficient vectors over a basis.  For evaluation
each basis is compiled into per-piece monomial coefficients in the local
variable ``s = t - breakpoint``, so values and derivatives are exact.

Dimension indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

POLYNOMIAL = "polynomial"
PIECEWISE = "piecewise_polynomial"
LOWER = "lower"
UPPER = "upper"


def _hermite_pieces(h, order, degree):
    """Local basis on one piece ``[0, h]`` as monomial coefficient rows.

    Returns ``(left, right, bubbles)``: ``left[q]`` has derivative ``q`` equal
    to 1 at s=0 and all other end data (orders <= ``order``) zero; ``right[q]``
    likewise at s=h; ``bubbles`` vanish with ``order`` derivatives at both ends.
    """
    r = order
    base_deg = 2 * r + 1
    # conditions: d^q/ds^q at s=0 and s=h for q = 0..r, on monomials s^0..s^base_deg
    A = np.zeros((2 * (r + 1), base_deg + 1))
    for q in range(r + 1):
        for j in range(q, base_deg + 1):
            coef = math.factorial(j) / math.factorial(j - q)
            A[q, j] = coef * (1.0 if j == q else 0.0)
            A[r + 1 + q, j] = coef * h ** (j - q)
    inv = np.linalg.inv(A)
    rows = np.zeros((2 * (r + 1), degree + 1))
    rows[:, : base_deg + 1] = inv.T
    left, right = rows[: r + 1], rows[r + 1 :]
    bubbles = []
    core = np.polynomial.polynomial.polypow([0.0, 1.0], r + 1)
    core = np.polynomial.polynomial.polymul(core, np.polynomial.polynomial.polypow([-h, 1.0], r + 1))
    for j in range(degree - base_deg):
        poly = np.polynomial.polynomial.polymul(core, np.eye(j + 1)[j])
        poly = poly / (h / 2) ** (2 * r + 2 + j)
        row = np.zeros(degree + 1)
        row[: len(poly)] = poly
        bubbles.append(row)
    return left, right, np.array(bubbles).reshape(-1, degree + 1)


@dataclass(frozen=True)
class BasisSpec:
    """Basis for one boundary curve on ``[0, t_f]``.

    ``polynomial``: monomials ``1, t, ..., t^degree``.

    ``piecewise_polynomial``: degree-``degree`` pieces between ``breakpoints``
    with derivatives ``0..continuity`` matched at every breakpoint.  The
    coefficients are the Hermite data at each breakpoint (value, slope, ...)
    followed by the weights of the interior "bubble" functions of every piece.
    """

    kind: str
    degree: int
    t_f: float
    breakpoints: tuple = ()
    continuity: int = 1

    def __post_init__(self):
        if self.kind not in (POLYNOMIAL, PIECEWISE):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.degree < 1:
            raise ValueError("basis degree must be >= 1")
        if not self.t_f > 0:
            raise ValueError("t_f must be positive")
        object.__setattr__(self, "t_f", float(self.t_f))
        if self.kind == POLYNOMIAL:
            object.__setattr__(self, "breakpoints", (0.0, self.t_f))
            return
        bp = tuple(float(b) for b in self.breakpoints)
        if len(bp) < 2 or bp[0] != 0.0 or bp[-1] != self.t_f:
            raise ValueError("breakpoints must start at 0 and end at t_f")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if self.continuity < 1:
            raise ValueError("continuity order must be >= 1")
        if self.degree < 2 * self.continuity + 1:
            raise ValueError(f"degree {self.degree} too low for C{self.continuity} pieces (need >= {2 * self.continuity + 1})")
        object.__setattr__(self, "breakpoints", bp)

    @property
    def n_pieces(self):
        return len(self.breakpoints) - 1

    @property
    def n_coeffs(self):
        if self.kind == POLYNOMIAL:
            return self.degree + 1
        m, d, r = self.n_pieces, self.degree, self.continuity
        return m * (d + 1) - (m - 1) * (r + 1)

    def piece_matrix(self):
        """Linear map ``(n_pieces, degree+1, n_coeffs)`` from coefficients to local monomials."""
        d = self.degree
        if self.kind == POLYNOMIAL:
            return np.eye(d + 1)[None, :, :]
        m, r = self.n_pieces, self.continuity
        z = self.n_coeffs
        M = np.zeros((m, d + 1, z))
        nb = d - 2 * r - 1
        bubble0 = (m + 1) * (r + 1)
        for k in range(m):
            h = self.breakpoints[k + 1] - self.breakpoints[k]
            left, right, bubbles = _hermite_pieces(h, r, d)
            for q in range(r + 1):
                M[k, :, k * (r + 1) + q] = left[q]
                M[k, :, (k + 1) * (r + 1) + q] = right[q]
            for j in range(nb):
                M[k, :, bubble0 + k * nb + j] = bubbles[j]
        return M

    def node_data_index(self, knot, order):
        """Coefficient index holding derivative ``order`` at breakpoint ``knot`` (piecewise only)."""
        return knot * (self.continuity + 1) + order

    def to_dict(self):
        out = {"kind": self.kind, "degree": self.degree, "t_f": self.t_f}
        if self.kind == PIECEWISE:
            out["breakpoints"] = list(self.breakpoints)
            out["continuity"] = self.continuity
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], int(d["degree"]), float(d["t_f"]), tuple(d.get("breakpoints", ())), int(d.get("continuity", 1)))


def basis_matrix(basis, t, order=0):
    """Rows of basis-function values (or derivatives) at times ``t``: shape ``(len(t), n_coeffs)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    M = basis.piece_matrix()
    if order:
        M = np.moveaxis(_deriv(np.moveaxis(M, 1, -1), order), -1, 1)
    bp = np.asarray(basis.breakpoints)
    k = np.clip(np.searchsorted(bp, t, side="right") - 1, 0, len(bp) - 2)
    s = t - bp[k]
    powers = s[:, None] ** np.arange(M.shape[1])[None, :]
    return np.einsum("td,tdz->tz", powers, M[k])


def search_transform(basis):
    """Matrix ``T`` with coefficients ``c = T @ theta`` for well-scaled search coordinates.

    For the monomial basis ``theta`` holds boundary values at Chebyshev nodes;
    for the piecewise basis it is the Hermite data with derivative entries
    scaled by the mean piece length, so every coordinate is in state units.
    """
    z = basis.n_coeffs
    if basis.kind == POLYNOMIAL:
        k = np.arange(z)
        nodes = basis.t_f * (1 - np.cos(np.pi * (k + 0.5) / z)) / 2
        V = nodes[:, None] ** k[None, :]
        return np.linalg.inv(V)
    r = basis.continuity
    h = basis.t_f / basis.n_pieces
    scale = np.ones(z)
    for knot in range(basis.n_pieces + 1):
        for q in range(1, r + 1):
            scale[basis.node_data_index(knot, q)] = h ** (-q)
    return np.diag(scale)


def _horner(poly, s):
    out = np.zeros_like(s)
    for j in range(poly.shape[-1] - 1, -1, -1):
        out = out * s + poly[..., j]
    return out


def _deriv(poly, order=1):
    for _ in range(order):
        d = poly.shape[-1]
        if d == 1:
            return np.zeros_like(poly)
        poly = poly[..., 1:] * np.arange(1, d)
    return poly


@dataclass(frozen=True, eq=False)
class Tube:
    """Per-dimension lower/upper boundaries ``gamma_L(t) < gamma_U(t)``."""

    basis: BasisSpec
    coeffs_lower: np.ndarray
    coeffs_upper: np.ndarray
    gamma_d: np.ndarray
    slope_cap: float | None = None
    _polys: tuple = field(init=False, repr=False)

    def __post_init__(self):
        cl = np.array(self.coeffs_lower, dtype=float, ndmin=2)
        cu = np.array(self.coeffs_upper, dtype=float, ndmin=2)
        z = self.basis.n_coeffs
        if cl.shape != cu.shape or cl.shape[1] != z:
            raise ValueError(f"coefficient arrays must both be (n, {z}); got {cl.shape} and {cu.shape}")
        gd = np.broadcast_to(np.asarray(self.gamma_d, dtype=float), (cl.shape[0],)).copy()
        for a in (cl, cu, gd):
            a.setflags(write=False)
        object.__setattr__(self, "coeffs_lower", cl)
        object.__setattr__(self, "coeffs_upper", cu)
        object.__setattr__(self, "gamma_d", gd)
        if self.slope_cap is not None:
            object.__setattr__(self, "slope_cap", float(self.slope_cap))
        M = self.basis.piece_matrix()
        pl = np.einsum("mdz,nz->nmd", M, cl)
        pu = np.einsum("mdz,nz->nmd", M, cu)
        object.__setattr__(self, "_polys", (pl, pu))

    @property
    def n(self):
        return self.coeffs_lower.shape[0]

    @property
    def t_f(self):
        return self.basis.t_f

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_f) or np.any(~np.isfinite(t)):
            raise ValueError(f"time outside [0, {self.t_f:g}]")
        return t

    def _local(self, t):
        bp = np.asarray(self.basis.breakpoints)
        k = np.clip(np.searchsorted(bp, t, side="right") - 1, 0, len(bp) - 2)
        return k, t - bp[k]

    def _eval(self, side, t, order):
        t = self._check_t(t)
        poly = self._polys[0 if side == LOWER else 1]
        if order:
            poly = _deriv(poly, order)
        k, s = self._local(t)
        # (n, ..., d+1) coefficients per time
        c = poly[:, k]
        return np.moveaxis(_horner(c, s[None]), 0, -1)

    def lower(self, t, order=0):
        """All lower boundaries (or their ``order``-th derivative), shape ``t.shape + (n,)``."""
        return self._eval(LOWER, t, order)

    def upper(self, t, order=0):
        return self._eval(UPPER, t, order)

    def boundary(self, side, t, order=0):
        if side not in (LOWER, UPPER):
            raise ValueError(f"side must be 'lower' or 'upper', not {side!r}")
        return self._eval(side, t, order)

    def piece_polys(self, side):
        """Per-piece local monomial coefficients, shape ``(n, n_pieces, degree+1)``."""
        return self._polys[0 if side == LOWER else 1].copy()

    def with_coeffs(self, coeffs_lower, coeffs_upper):
        return Tube(self.basis, coeffs_lower, coeffs_upper, self.gamma_d, self.slope_cap)

    def to_dict(self):
        return {
            "basis": self.basis.to_dict(),
            "n": self.n,
            "coeffs_lower": self.coeffs_lower.tolist(),
            "coeffs_upper": self.coeffs_upper.tolist(),
            "gamma_d": self.gamma_d.tolist(),
            "slope_cap": self.slope_cap,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(BasisSpec.from_dict(d["basis"]), d["coeffs_lower"], d["coeffs_upper"], d["gamma_d"], d.get("slope_cap"))


def _check_index(tube, i):
    if not 0 <= i < tube.n:
        raise IndexError(f"dimension index {i} out of range for n={tube.n}")


def eval_boundary(tube, i, side, t):
    """Value of boundary ``side`` of dimension ``i`` at time ``t``."""
    _check_index(tube, i)
    return float(tube.boundary(side, float(t))[i])


def eval_boundary_derivative(tube, i, side, t):
    _check_index(tube, i)
    return float(tube.boundary(side, float(t), order=1)[i])


def tube_center_and_width(tube, t):
    """Return ``(gamma_s, gamma_m)``: per-dimension ``U + L`` and ``U - L`` at ``t``.

    Raises ``ValueError`` if any width is not strictly positive.
    """
    lo = tube.lower(float(t))
    hi = tube.upper(float(t))
    width = hi - lo
    if np.any(width <= 0):
        bad = int(np.argmin(width))
        raise ValueError(f"nonpositive tube width {width[bad]:.3g} in dimension {bad} at t={float(t):g}")
    return hi + lo, width


@dataclass(frozen=True)
class TubeLipschitz:
    L_lower: float
    L_upper: float
    L_dlower: float
    L_dupper: float
    gamma_bar_lower: float
    gamma_bar_upper: float

    def to_dict(self):
        return dict(self.__dict__)


def lipschitz_grid(t_f, grid_step, breakpoints=()):
    count = int(math.ceil(t_f / grid_step - 1e-12)) + 1
    grid = np.linspace(0.0, t_f, count)
    if breakpoints:
        grid = np.union1d(grid, np.asarray(breakpoints, dtype=float))
    return grid


def estimate_lipschitz(tube, grid_step, safety=1.1):
    """Grid estimate of boundary Lipschitz constants and magnitude bounds.

    Slopes use exact derivatives on the grid; the derivative constants use
    difference quotients of the exact derivative between neighbouring grid
    points.  Slope constants get a half-step allowance for the curvature
    between grid points before the safety factor; the magnitude bounds get
    the analogous half-step slope allowance but no factor.
    """
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    grid = lipschitz_grid(tube.t_f, grid_step, tube.basis.breakpoints)
    if grid.size < 3:
        raise ValueError("degenerate Lipschitz grid (fewer than 3 points)")
    h = float(np.max(np.diff(grid)))
    out = {}
    for side, tag in ((LOWER, "lower"), (UPPER, "upper")):
        val = tube.boundary(side, grid)
        d1 = tube.boundary(side, grid, order=1)
        raw_slope = float(np.max(np.abs(d1)))
        raw_curv = float(np.max(np.abs(np.diff(d1, axis=0)) / np.diff(grid)[:, None]))
        out[tag] = (
            safety * (raw_slope + raw_curv * h / 2),
            safety * raw_curv,
            float(np.max(np.abs(val))) + raw_slope * h / 2,
        )
    return TubeLipschitz(
        L_lower=out["lower"][0],
        L_upper=out["upper"][0],
        L_dlower=out["lower"][1],
        L_dupper=out["upper"][1],
        gamma_bar_lower=out["lower"][2],
        gamma_bar_upper=out["upper"][2],
    )
