"""Guided LP modes of a step-index multimode fiber.

Scalar weakly-guiding treatment: each guided mode LP(l,m) corresponds to a
root u of

    u J_{l+1}(u) / J_l(u) = w K_{l+1}(w) / K_l(w),   u^2 + w^2 = V^2,

with V = (2 pi a / lambda) NA the normalized frequency.  Roots are bracketed
between consecutive zeros of J_l (where the left-hand side sweeps one full
branch) and refined by bisection.  The transverse field is

    J_l(u r/a) {cos,sin}(l phi)          r <= a
    C K_l(w r/a) {cos,sin}(l phi)        r >  a

with C chosen for continuity at r = a.  Sampled profiles are normalized to
unit L2 norm under the pixel-grid quadrature and then symmetrically
re-orthonormalized, so the grid Gram matrix is the identity to machine
precision regardless of pixelation error.

Units: transverse lengths in um, wavelengths in nm, propagation constants
in rad/um.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .errors import InvalidSpecError, ResolutionError, WavelengthRangeError

NM_PER_UM = 1000.0

# default desk-scale geometry: V ~ 24.5 at 1540 nm, ~156 guided LP
# orientations of which the 100 of largest beta are kept
DEFAULT_CORE_RADIUS_UM = 12.0
DEFAULT_NA = 0.5
DEFAULT_N_CLAD = 1.49
DEFAULT_MAX_MODES = 100
DEFAULT_GRID_SIZE = 128
DEFAULT_WAVELENGTH_NM = 1540.0
DEFAULT_WAVELENGTH_RANGE_NM = (1540.0, 1570.0)


@dataclass(frozen=True)
class FiberSpec:
    """Step-index fiber geometry and refractive indices."""

    core_radius_um: float
    clad_thickness_um: float = 20.0
    n_core: float = math.sqrt(DEFAULT_N_CLAD**2 + DEFAULT_NA**2)
    n_clad: float = DEFAULT_N_CLAD
    wavelength_ref_nm: float = DEFAULT_WAVELENGTH_NM

    def __post_init__(self):
        if not (self.n_core > self.n_clad > 1.0):
            raise InvalidSpecError(
                f"need n_core > n_clad > 1, got n_core={self.n_core}, n_clad={self.n_clad}"
            )
        if self.core_radius_um <= 0 or self.clad_thickness_um <= 0:
            raise InvalidSpecError("core radius and cladding thickness must be positive")
        if self.wavelength_ref_nm <= 0:
            raise InvalidSpecError("reference wavelength must be positive")

    @property
    def numerical_aperture(self) -> float:
        return math.sqrt(self.n_core**2 - self.n_clad**2)

    @classmethod
    def from_numerical_aperture(
        cls,
        core_radius_um: float,
        na: float = DEFAULT_NA,
        n_clad: float = DEFAULT_N_CLAD,
        clad_thickness_um: float = 20.0,
        wavelength_ref_nm: float = DEFAULT_WAVELENGTH_NM,
    ) -> "FiberSpec":
        if na <= 0:
            raise InvalidSpecError("numerical aperture must be positive")
        return cls(
            core_radius_um=core_radius_um,
            clad_thickness_um=clad_thickness_um,
            n_core=math.sqrt(n_clad**2 + na**2),
            n_clad=n_clad,
            wavelength_ref_nm=wavelength_ref_nm,
        )


def default_fiber() -> FiberSpec:
    """Desk-scale default fiber (NA 0.5, core radius 12 um)."""
    return FiberSpec.from_numerical_aperture(DEFAULT_CORE_RADIUS_UM)


def v_number(spec: FiberSpec, wavelength_nm: float | None = None) -> float:
    """Normalized frequency V = (2 pi a / lambda) sqrt(n_core^2 - n_clad^2)."""
    if spec.n_core <= spec.n_clad:
        raise InvalidSpecError("n_core must exceed n_clad")
    wl = spec.wavelength_ref_nm if wavelength_nm is None else wavelength_nm
    if wl <= 0:
        raise ValueError("wavelength must be positive")
    wl_um = wl / NM_PER_UM
    return 2.0 * math.pi * spec.core_radius_um / wl_um * spec.numerical_aperture


def approx_mode_count(v: float) -> float:
    """Large-V estimate of the number of guided modes, V^2 / 2."""
    return 0.5 * v * v


@dataclass(frozen=True, order=True)
class ModeLabel:
    """LP mode label: azimuthal index l >= 0, radial index m >= 1, orientation."""

    l: int
    m: int
    orientation: str = "cos"  # "sin" exists only for l >= 1

    def __str__(self):
        suffix = "" if self.l == 0 else f".{self.orientation}"
        return f"LP{self.l}{self.m}{suffix}"


@dataclass(frozen=True)
class ModeBasis:
    """Guided modes at one wavelength: labels, betas, and (optionally) profiles.

    ``profiles`` has shape (M, G, G), unit L2 norm under grid quadrature and
    pairwise orthonormal; ``betas_rad_per_um`` is strictly decreasing.
    """

    spec: FiberSpec
    wavelength_nm: float
    labels: tuple[ModeLabel, ...]
    u_values: np.ndarray
    w_values: np.ndarray
    betas_rad_per_um: np.ndarray
    profiles: np.ndarray | None = None
    grid_extent_um: float | None = None

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    @property
    def grid_size(self) -> int:
        if self.profiles is None:
            raise ValueError("profiles not sampled")
        return self.profiles.shape[1]

    @property
    def pixel_area_um2(self) -> float:
        return (self.grid_extent_um / self.grid_size) ** 2

    @property
    def k0_rad_per_um(self) -> float:
        return 2.0 * math.pi / (self.wavelength_nm / NM_PER_UM)

    def effective_indices(self) -> np.ndarray:
        return self.betas_rad_per_um / self.k0_rad_per_um

    def profile_matrix(self) -> np.ndarray:
        """Profiles flattened to (M, G*G)."""
        if self.profiles is None:
            raise ValueError("profiles not sampled")
        return self.profiles.reshape(self.n_modes, -1)

    def grid_coords_um(self) -> np.ndarray:
        """Pixel-center coordinates along one axis."""
        g = self.grid_size
        h = self.grid_extent_um / g
        return (np.arange(g) - (g - 1) / 2.0) * h


def _kl_ratio(l: int, w):
    """K_{l+1}(w) / K_l(w) via exponentially scaled Bessel K (stable for large w)."""
    return special.kve(l + 1, w) / special.kve(l, w)


def characteristic_mismatch(l: int, v: float, u):
    """u J_{l+1}/J_l - w K_{l+1}/K_l with w = sqrt(V^2 - u^2); roots are guided modes."""
    u = np.asarray(u, dtype=float)
    w2 = np.clip(v * v - u * u, 0.0, None)
    w = np.sqrt(w2)
    lhs = u * special.jv(l + 1, u) / special.jv(l, u)
    # w -> 0 limit of w K_{l+1}/K_l: 2l for l >= 1, 0 for l = 0
    rhs = np.where(w > 0.0, w * _kl_ratio(l, np.where(w > 0.0, w, 1.0)), 2.0 * l)
    return lhs - rhs


def _bessel_zeros_below(l: int, v: float) -> np.ndarray:
    """All zeros of J_l strictly below v."""
    n_guess = max(4, int(v / math.pi) + 2)
    zeros = special.jn_zeros(l, n_guess)
    while zeros[-1] < v:
        n_guess *= 2
        zeros = special.jn_zeros(l, n_guess)
    return zeros[zeros < v]


def _roots_for_l(l: int, v: float, rtol: float = 1e-10) -> np.ndarray:
    """Roots of the characteristic equation for one azimuthal index.

    Brackets are the intervals between consecutive zeros of J_l clipped to
    (0, V); within each, the LHS sweeps one monotone branch so at most one
    root exists.  All brackets are bisected simultaneously.
    """
    if v <= 0:
        return np.array([])
    edges = np.concatenate([[0.0], _bessel_zeros_below(l, v), [v]])
    pad = 1e-9 * np.maximum(1.0, edges)
    lo = edges[:-1] + pad[:-1]
    hi = edges[1:] - pad[1:]
    ok = hi > lo
    lo, hi = lo[ok], hi[ok]
    if lo.size == 0:
        return np.array([])
    flo = characteristic_mismatch(l, v, lo)
    fhi = characteristic_mismatch(l, v, hi)
    bracketed = np.isfinite(flo) & np.isfinite(fhi) & (flo * fhi < 0)
    lo, hi, flo = lo[bracketed], hi[bracketed], flo[bracketed]
    if lo.size == 0:
        return np.array([])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = characteristic_mismatch(l, v, mid)
        go_left = flo * fmid <= 0
        hi = np.where(go_left, mid, hi)
        lo = np.where(go_left, lo, mid)
        flo = np.where(go_left, flo, fmid)
        if np.all(hi - lo < rtol * mid):
            break
    return 0.5 * (lo + hi)


def solve_lp_modes(
    spec: FiberSpec,
    wavelength_nm: float | None = None,
    max_modes: int | None = DEFAULT_MAX_MODES,
) -> ModeBasis:
    """Solve for guided LP modes, ordered by descending beta.

    Each l >= 1 root contributes a cos and a sin orientation with the same
    beta.  ``max_modes`` truncates after ordering; None keeps everything.
    """
    if max_modes is not None and max_modes < 0:
        raise ValueError("max_modes must be >= 0")
    wl = spec.wavelength_ref_nm if wavelength_nm is None else wavelength_nm
    v = v_number(spec, wl)
    k0 = 2.0 * math.pi / (wl / NM_PER_UM)
    a = spec.core_radius_um

    rows = []  # (u, l, m, orientation)
    l = 0
    while True:
        roots = _roots_for_l(l, v)
        if roots.size == 0:
            if l == 0:
                l += 1
                continue
            break
        for m, u in enumerate(roots, start=1):
            rows.append((u, l, m, "cos"))
            if l >= 1:
                rows.append((u, l, m, "sin"))
        l += 1

    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))  # ascending u == descending beta
    if max_modes is not None:
        rows = rows[:max_modes]

    u_arr = np.array([r[0] for r in rows])
    w_arr = np.sqrt(np.clip(v * v - u_arr * u_arr, 0.0, None))
    betas = np.sqrt((spec.n_core * k0) ** 2 - (u_arr / a) ** 2)
    labels = tuple(ModeLabel(r[1], r[2], r[3]) for r in rows)
    for arr in (u_arr, w_arr, betas):
        arr.setflags(write=False)
    return ModeBasis(
        spec=spec,
        wavelength_nm=wl,
        labels=labels,
        u_values=u_arr,
        w_values=w_arr,
        betas_rad_per_um=betas,
    )


def mode_field(basis: ModeBasis, index: int, x_um, y_um) -> np.ndarray:
    """Analytic (un-normalized) field of mode ``index`` at points (x, y) in um."""
    label = basis.labels[index]
    u = basis.u_values[index]
    w = basis.w_values[index]
    a = basis.spec.core_radius_um
    x = np.asarray(x_um, dtype=float)
    y = np.asarray(y_um, dtype=float)
    r = np.hypot(x, y)
    phi = np.arctan2(y, x)
    inside = r <= a
    f = np.empty(np.broadcast(x, y).shape, dtype=float)
    f[inside] = special.jv(label.l, u * r[inside] / a)
    # exterior branch scaled for continuity at r = a; kve keeps it stable for large w
    scale = special.jv(label.l, u) / special.kve(label.l, w)
    r_out = r[~inside]
    f[~inside] = scale * special.kve(label.l, w * r_out / a) * np.exp(-w * (r_out - a) / a)
    ang = np.cos(label.l * phi) if label.orientation == "cos" else np.sin(label.l * phi)
    return f * ang


def sample_profiles(
    basis: ModeBasis,
    grid_size: int = DEFAULT_GRID_SIZE,
    grid_extent_um: float | None = None,
    orthonormalize: bool = True,
) -> ModeBasis:
    """Sample all mode fields on a pixel grid and orthonormalize.

    The grid spans ``grid_extent_um`` (default 3x core radius) with pixel
    centers symmetric about the axis.  Raises ResolutionError when the
    fastest transverse oscillation gets fewer than 4 pixels.
    """
    a = basis.spec.core_radius_um
    if grid_extent_um is None:
        grid_extent_um = 3.0 * a
    if grid_size < 32:
        raise ValueError("grid_size must be >= 32")
    if grid_extent_um < 2.0 * a:
        raise ValueError("grid_extent_um must cover the core (>= 2x core radius)")
    h = grid_extent_um / grid_size
    u_max = float(basis.u_values.max()) if basis.n_modes else 0.0
    if u_max > 0:
        pixels_per_osc = (2.0 * math.pi * a / u_max) / h
        if pixels_per_osc < 4.0:
            raise ResolutionError(
                f"grid resolves only {pixels_per_osc:.2f} px per transverse "
                f"oscillation of the highest-order mode (need >= 4)"
            )

    coords = (np.arange(grid_size) - (grid_size - 1) / 2.0) * h
    xg, yg = np.meshgrid(coords, coords, indexing="xy")
    d_area = h * h

    profiles = np.empty((basis.n_modes, grid_size, grid_size))
    for i in range(basis.n_modes):
        f = mode_field(basis, i, xg, yg)
        profiles[i] = f / math.sqrt(np.sum(f * f) * d_area)

    if orthonormalize and basis.n_modes > 1:
        flat = profiles.reshape(basis.n_modes, -1)
        gram = (flat @ flat.T) * d_area
        evals, evecs = np.linalg.eigh(gram)
        inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
        profiles = (inv_sqrt @ flat).reshape(profiles.shape)

    profiles.setflags(write=False)
    return replace(basis, profiles=profiles, grid_extent_um=grid_extent_um)


class ModeFamily:
    """Mode set frozen at a reference wavelength, re-solvable across a range.

    The label set and ordering are fixed by the reference solve, so a device
    transfer matrix indexed against this family stays meaningful when the
    challenge wavelength is tuned.  Solved bases (with sampled profiles) are
    cached per wavelength.
    """

    def __init__(
        self,
        spec: FiberSpec,
        max_modes: int = DEFAULT_MAX_MODES,
        grid_size: int = DEFAULT_GRID_SIZE,
        grid_extent_um: float | None = None,
        wavelength_range_nm: tuple[float, float] = DEFAULT_WAVELENGTH_RANGE_NM,
    ):
        self.spec = spec
        self.grid_size = grid_size
        self.grid_extent_um = grid_extent_um if grid_extent_um is not None else 3.0 * spec.core_radius_um
        self.wavelength_range_nm = wavelength_range_nm
        reference = solve_lp_modes(spec, spec.wavelength_ref_nm, max_modes)
        self.labels = reference.labels
        self._cache: dict[float, ModeBasis] = {}
        self._cache[spec.wavelength_ref_nm] = sample_profiles(
            reference, grid_size, self.grid_extent_um
        )

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    def basis_at(self, wavelength_nm: float) -> ModeBasis:
        """Basis with this family's labels/order, solved at ``wavelength_nm``."""
        lo, hi = self.wavelength_range_nm
        if not (lo <= wavelength_nm <= hi):
            raise WavelengthRangeError(
                f"wavelength {wavelength_nm} nm outside tunable range [{lo}, {hi}] nm"
            )
        if wavelength_nm in self._cache:
            return self._cache[wavelength_nm]
        full = solve_lp_modes(self.spec, wavelength_nm, max_modes=None)
        # cos/sin orientations of one (l, m) root are adjacent, cos first
        by_lm = {
            (lab.l, lab.m): idx
            for idx, lab in enumerate(full.labels)
            if lab.orientation == "cos"
        }
        order = []
        for lab in self.labels:
            idx = by_lm.get((lab.l, lab.m))
            if idx is None:
                raise WavelengthRangeError(
                    f"mode {lab} not guided at {wavelength_nm} nm; shrink max_modes "
                    f"or the tunable range"
                )
            order.append(idx if lab.orientation == "cos" else idx + 1)
        sel = np.array(order)
        reordered = ModeBasis(
            spec=self.spec,
            wavelength_nm=wavelength_nm,
            labels=self.labels,
            u_values=full.u_values[sel].copy(),
            w_values=full.w_values[sel].copy(),
            betas_rad_per_um=full.betas_rad_per_um[sel].copy(),
        )
        basis = sample_profiles(reordered, self.grid_size, self.grid_extent_um)
        self._cache[wavelength_nm] = basis
        return basis

    def reference_basis(self) -> ModeBasis:
        return self._cache[self.spec.wavelength_ref_nm]
