"""Grids, sampled fields, dyadic cubes and special Lipschitz domain geometry.

All coordinates are dyadic rationals: a grid at refinement level ``R`` has
spacing ``h = 2**-R`` and samples ``x_k = -A + k*h`` on the box ``[-A, A]**n``
with ``A`` a power of two.  Everything downstream (kernel supports, cube
boundaries, fold maps over piecewise-linear boundaries with dyadic
breakpoints) is exactly representable, which keeps set membership tests free
of rounding ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

__all__ = [
    "Grid",
    "SampledField",
    "DyadicCube",
    "LipschitzDomain",
    "Mask",
    "make_grid",
    "domain_mask",
    "fold_point",
    "enumerate_cubes",
    "restrict",
]

# Hard cap on the number of samples a grid may carry (float64 values).
MAX_GRID_VALUES = 1 << 26


def _is_power_of_two(x: float) -> bool:
    m, _ = math.frexp(x)
    return x > 0 and m == 0.5


@dataclass(frozen=True)
class Grid:
    """Uniform dyadic grid on the box ``[-A, A]**dim``.

    ``spacing`` is exactly ``2**-level``; there are ``count`` samples per
    axis, ``count = 2*A*2**level + 1``, at coordinates ``-A + k*spacing``.
    """

    dim: int
    half_extent: float
    level: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"unsupported dimension {self.dim}")
        if not _is_power_of_two(self.half_extent):
            raise ValueError("half_extent must be a power of two")
        if self.level < 1:
            raise ValueError("level must be >= 1")
        if self.half_extent * 2.0 ** self.level != round(self.half_extent * 2.0 ** self.level):
            raise ValueError("half_extent too small for this level")
        if self.count < 16:
            raise ValueError("grid must have at least 16 points per axis")
        if self.count ** self.dim > MAX_GRID_VALUES:
            raise ValueError(
                f"grid of {self.count}^{self.dim} samples exceeds the memory budget"
            )

    @property
    def spacing(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def count(self) -> int:
        return int(round(2.0 * self.half_extent / 2.0 ** (-self.level))) + 1

    @property
    def shape(self) -> tuple:
        return (self.count,) * self.dim

    def axis_coords(self) -> np.ndarray:
        """Sample coordinates along one axis (all axes are identical)."""
        k = np.arange(self.count)
        return -self.half_extent + k * self.spacing

    def points(self) -> np.ndarray:
        """All sample points, shape (count**dim, dim), row-major axis order."""
        x = self.axis_coords()
        if self.dim == 1:
            return x[:, None]
        g = np.meshgrid(x, x, indexing="ij")
        return np.stack([a.ravel() for a in g], axis=-1)


@dataclass(frozen=True)
class SampledField:
    """Real values sampled on a :class:`Grid`, shape ``(count,)*dim``.

    ``meta`` carries optional diagnostics (aliasing estimates, flags);
    it does not take part in equality.
    """

    grid: Grid
    values: np.ndarray
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.count ** self.grid.dim:
            raise ValueError("value array length must equal count**dim")
        v = np.ascontiguousarray(v.reshape(self.grid.shape))
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class DyadicCube:
    """The open cube ``2**-J * v + (0, 2**-J)**n`` with side ``2**-J``."""

    J: int
    v: tuple

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(int(c) for c in np.atleast_1d(self.v)))

    @property
    def dim(self) -> int:
        return len(self.v)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.J)

    def lower(self) -> np.ndarray:
        return np.array(self.v, dtype=float) * self.side

    def upper(self) -> np.ndarray:
        return (np.array(self.v, dtype=float) + 1.0) * self.side

    def contains(self, x) -> bool:
        """Half-open membership: ``lower < x_i <= upper`` per axis.

        The open-cube convention of the continuum definition is kept at the
        lower faces; closing the upper faces makes the level-J cubes a
        partition of grid points, so every interior sample lands in exactly
        one cube per level.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.lower(), self.upper()
        return bool(np.all(x > lo) and np.all(x <= hi))


class LipschitzDomain:
    """Special Lipschitz domain ``{(x', x_n): x_n > rho(x')}``.

    For ``dim == 1`` the boundary is a single threshold ``a`` and the domain
    is ``(a, inf)``.  For ``dim == 2``, ``rho`` is piecewise linear, given by
    sorted dyadic breakpoints and one slope per segment
    (``len(slopes) == len(breakpoints) + 1``); ``offset`` anchors the value
    at the first breakpoint (or at 0 if there are none).
    """

    def __init__(self, dim, breakpoints=None, slopes=None, threshold=0.0, offset=0.0):
        if dim not in (1, 2):
            raise ValueError(f"unsupported dimension {dim}")
        self.dim = dim
        if dim == 1:
            self.threshold = float(threshold)
            self.breakpoints = np.zeros(0)
            self.slopes = np.zeros(0)
            self.offset = 0.0
            self.lip_const = 0.0
            return
        bp = np.asarray([] if breakpoints is None else breakpoints, dtype=float)
        sl = np.asarray([0.0] if slopes is None else slopes, dtype=float)
        if bp.size + 1 != sl.size:
            raise ValueError("need exactly one slope per segment (len(breakpoints)+1)")
        if bp.size and np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        self.threshold = 0.0
        self.breakpoints = bp
        self.slopes = sl
        self.offset = float(offset)
        self.lip_const = float(np.max(np.abs(sl)))
        # ordinate of rho at each breakpoint, walked from the anchor
        self._bp_vals = np.empty(bp.size)
        if bp.size:
            self._bp_vals[0] = self.offset
            for i in range(1, bp.size):
                self._bp_vals[i] = self._bp_vals[i - 1] + sl[i] * (bp[i] - bp[i - 1])

    def rho(self, xprime) -> np.ndarray:
        """Boundary height over ``x'`` (scalar for dim=1 semantics not needed)."""
        if self.dim == 1:
            raise ValueError("rho is only defined for dim >= 2")
        x = np.asarray(xprime, dtype=float)
        bp, sl = self.breakpoints, self.slopes
        if bp.size == 0:
            return self.offset + sl[0] * x
        seg = np.searchsorted(bp, x, side="right")  # 0..len(bp)
        anchor_idx = np.clip(seg - 1, 0, bp.size - 1)
        anchor_x = bp[anchor_idx]
        anchor_y = self._bp_vals[anchor_idx]
        return anchor_y + sl[seg] * (x - anchor_x)

    def contains(self, x) -> np.ndarray:
        """Strict membership ``x_n > rho(x')``; boundary points are outside."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return x[..., 0] > self.threshold if x.ndim > 0 and x.shape[-1] == 1 else x > self.threshold
        return x[..., 1] > self.rho(x[..., 0])

    def in_cone(self, y) -> np.ndarray:
        """Membership in the downward cone ``K = {y_n < -L*|y'|}``."""
        y = np.asarray(y, dtype=float)
        if self.dim == 1:
            return (y[..., 0] if y.ndim > 0 and y.shape[-1] == 1 else y) < 0.0
        return y[..., 1] < -self.lip_const * np.abs(y[..., 0])

    def fold_constant(self) -> float:
        """Lipschitz constant of the fold map, ``(L + sqrt(1+L**2))**2``."""
        L = self.lip_const
        return (L + math.sqrt(1.0 + L * L)) ** 2


@dataclass(frozen=True)
class Mask:
    """Boolean indicator of the domain on a grid: true iff ``x_n > rho(x')``."""

    grid: Grid
    indicator: np.ndarray

    def __post_init__(self):
        ind = np.ascontiguousarray(np.asarray(self.indicator, dtype=bool).reshape(self.grid.shape))
        object.__setattr__(self, "indicator", ind)

    def count_true(self) -> int:
        return int(np.count_nonzero(self.indicator))


def make_grid(dim: int, half_extent: float, level: int, max_values: int = MAX_GRID_VALUES) -> Grid:
    """Build a dyadic grid; rejects unsupported dimensions and oversized grids."""
    if dim not in (1, 2):
        raise ValueError(f"unsupported dimension {dim}")
    if level < 4:
        raise ValueError("level must be >= 4")
    if not _is_power_of_two(half_extent):
        raise ValueError("half_extent must be a power of two")
    g = Grid(dim, float(half_extent), int(level))
    if g.count ** dim > max_values:
        raise ValueError(f"grid of {g.count}^{dim} samples exceeds the memory budget")
    return g


def domain_mask(domain: LipschitzDomain, grid: Grid) -> Mask:
    """Indicator of the domain evaluated exactly at grid points."""
    if domain.dim != grid.dim:
        raise ValueError("domain and grid dimension mismatch")
    x = grid.axis_coords()
    if grid.dim == 1:
        ind = x > domain.threshold
    else:
        r = domain.rho(x)  # boundary height over the first axis
        ind = x[None, :] > r[:, None]
        ind = np.ascontiguousarray(ind)
    return Mask(grid, ind)


def fold_point(domain: LipschitzDomain, x) -> np.ndarray:
    """Fold map: identity on the domain, reflection across the boundary outside.

    ``L(x) = x`` for ``x_n > rho(x')`` and ``(x', 2*rho(x') - x_n)`` otherwise;
    the image lies in the closure of the domain and the map is idempotent.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if domain.dim == 1:
        a = domain.threshold
        if x[0] <= a:
            x[0] = 2.0 * a - x[0]
        return x
    r = float(domain.rho(x[0]))
    if x[1] <= r:
        x[1] = 2.0 * r - x[1]
    return x


def enumerate_cubes(grid: Grid, J_min: int, J_max_cube: int) -> list:
    """All dyadic cubes at levels ``J_min..J_max_cube`` meeting the grid box.

    The coarsest level must satisfy ``2**-J_min >= 2*A`` (each quadrant of
    the box is covered by a single cube) and the finest cubes must span at
    least 4 grid cells.
    """
    if J_min > J_max_cube:
        raise ValueError("J_min must be <= J_max_cube")
    A = grid.half_extent
    if 2.0 ** (-J_min) < 2.0 * A:
        raise ValueError("J_min too fine: coarsest cube must cover the box side")
    if J_max_cube > grid.level - 2:
        raise ValueError("J_max_cube too fine: cubes must span at least 4 grid cells")
    cubes = []
    for J in range(J_min, J_max_cube + 1):
        side = 2.0 ** (-J)
        # open cube (v*side, (v+1)*side) meets [-A, A] iff v < A/side and v+1 > -A/side
        v_lo = int(math.floor(-A / side))
        if v_lo * side + side <= -A:  # boundary-touching from the left does not count
            v_lo += 1
        v_hi = int(math.ceil(A / side)) - 1
        if v_hi * side >= A:
            v_hi -= 1
        rng = range(v_lo, v_hi + 1)
        if grid.dim == 1:
            cubes.extend(DyadicCube(J, (v,)) for v in rng)
        else:
            cubes.extend(DyadicCube(J, (v0, v1)) for v0 in rng for v1 in rng)
    return cubes


def restrict(field: SampledField, cube: DyadicCube, mask: Mask) -> np.ndarray:
    """Flat indices of grid points in ``cube`` (half-open) with mask true.

    An empty result is valid: empty intersections contribute zero to norms.
    """
    grid = field.grid
    if cube.dim != grid.dim:
        raise ValueError("cube and field dimension mismatch")
    x = grid.axis_coords()
    lo, hi = cube.lower(), cube.upper()
    sel = mask.indicator.copy()
    for ax in range(grid.dim):
        inside = (x > lo[ax]) & (x <= hi[ax])
        shape = [1] * grid.dim
        shape[ax] = grid.count
        sel &= inside.reshape(shape)
    return np.flatnonzero(sel.ravel())
