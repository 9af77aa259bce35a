"""Seeded synthetic scene pairs with planted, labeled changes.

Time 1 is a smooth multi-band background plus sensor noise; time 2 applies a
global radiometric gain/offset (which z-score normalization must absorb),
adds a per-region spectral shift for each change class, fresh sensor noise,
and optionally saturates a few bright patches to mimic over-exposed
buildings that break the radiometric relation in unchanged areas. The
reference map labels the planted regions 1..K, keeps over-exposed patches as
non-change, and marks a border ring undefined (-1).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .metrics import ReferenceMap
from .raster import Raster


@dataclass(frozen=True)
class ChangeRegion:
    """A planted change: a rect (row0, col0, row1, col1) or disk (row, col, radius)
    whose pixels receive the per-band spectral shift at time 2.

    The shift is applied out to `margin` extra pixels around the labeled
    region; that transition band is marked undefined (-1) in the reference,
    the way real ground truths leave object perimeters unlabeled. The
    labeled change pixels are exactly the declared geometry.
    """

    kind: str
    geometry: tuple
    shift: tuple
    margin: int = 4

    def __post_init__(self):
        if self.kind not in ("rect", "disk"):
            raise ConfigError(f"region kind must be rect or disk, got {self.kind!r}")
        n = 4 if self.kind == "rect" else 3
        if len(self.geometry) != n:
            raise ConfigError(f"{self.kind} region takes {n} geometry values")
        if self.margin < 0:
            raise ConfigError(f"region margin must be >= 0, got {self.margin}")
        object.__setattr__(self, "geometry", tuple(int(g) for g in self.geometry))
        object.__setattr__(self, "shift", tuple(float(s) for s in self.shift))

    def mask(self, height, width, grow=0):
        """Boolean mask of the region, optionally grown by `grow` pixels."""
        out = np.zeros((height, width), dtype=bool)
        if self.kind == "rect":
            row0, col0, row1, col1 = self.geometry
            if not (0 <= row0 < row1 <= height and 0 <= col0 < col1 <= width):
                raise ConfigError(f"rect {self.geometry} outside {height}x{width} raster")
            out[max(row0 - grow, 0) : row1 + grow, max(col0 - grow, 0) : col1 + grow] = True
        else:
            row, col, radius = self.geometry
            if not (0 <= row < height and 0 <= col < width and radius >= 1):
                raise ConfigError(f"disk {self.geometry} outside {height}x{width} raster")
            rr, cc = np.ogrid[0:height, 0:width]
            out[(rr - row) ** 2 + (cc - col) ** 2 <= (radius + grow) ** 2] = True
        return out


@dataclass(frozen=True)
class SynthSpec:
    """Geometry, radiometry, and seeding of one synthetic scene pair."""

    height: int = 96
    width: int = 96
    bands: int = 4
    regions: tuple = ()
    noise_sigma: float = 0.05
    intensity_range: tuple = (0.7, 1.3)
    gain: float = 1.15
    offset: float = 0.2
    overexposure_fraction: float = 0.01
    undefined_border: int = 2
    seed: int = 0

    def __post_init__(self):
        if min(self.height, self.width, self.bands) < 1:
            raise ConfigError("scene dimensions must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        lo, hi = self.intensity_range
        if not 0 < lo <= hi:
            raise ConfigError(f"invalid shift intensity range {self.intensity_range}")
        if not 0 <= self.overexposure_fraction < 1:
            raise ConfigError("overexposure_fraction must be in [0, 1)")
        object.__setattr__(self, "regions", tuple(self.regions))
        for region in self.regions:
            if len(region.shift) != self.bands:
                raise ConfigError(
                    f"region shift has {len(region.shift)} entries for {self.bands} bands"
                )
        self._check_disjoint()
        self._check_shift_directions()

    def _check_disjoint(self):
        covered = np.zeros((self.height, self.width), dtype=bool)
        for region in self.regions:
            mask = region.mask(self.height, self.width, grow=region.margin)
            if np.any(covered & mask):
                raise ConfigError("change regions overlap (including transition margins)")
            covered |= mask

    def _check_shift_directions(self):
        shifts = [np.asarray(r.shift) for r in self.regions]
        for i in range(len(shifts)):
            for j in range(i + 1, len(shifts)):
                a, b = shifts[i], shifts[j]
                na, nb = np.linalg.norm(a), np.linalg.norm(b)
                if na == 0 or nb == 0:
                    raise ConfigError("change shift vectors must be nonzero")
                if abs(abs(a @ b) / (na * nb) - 1.0) < 1e-9:
                    raise ConfigError(
                        f"shift vectors of regions {i} and {j} are parallel; "
                        "classes would not be direction-separable"
                    )

    @property
    def n_classes(self):
        return len(self.regions)


@dataclass(frozen=True)
class SynthScene:
    t1: Raster
    t2: Raster
    reference: ReferenceMap
    spec: SynthSpec = field(repr=False, default=None)


def _smooth_surfaces(rng, height, width, bands, cells):
    """Bilinear upsampling of a coarse random grid, one surface per band,
    standardized per band to mean 0.5 and standard deviation 0.25."""
    coarse = rng.uniform(0.0, 1.0, size=(cells, cells, bands))
    ys = np.linspace(0.0, cells - 1.0, height)
    xs = np.linspace(0.0, cells - 1.0, width)
    y0 = np.minimum(ys.astype(np.int64), cells - 2)
    x0 = np.minimum(xs.astype(np.int64), cells - 2)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    c00 = coarse[np.ix_(y0, x0)]
    c10 = coarse[np.ix_(y0 + 1, x0)]
    c01 = coarse[np.ix_(y0, x0 + 1)]
    c11 = coarse[np.ix_(y0 + 1, x0 + 1)]
    surface = (
        c00 * (1 - fy) * (1 - fx)
        + c10 * fy * (1 - fx)
        + c01 * (1 - fy) * fx
        + c11 * fy * fx
    )
    mean = surface.mean(axis=(0, 1))
    sd = surface.std(axis=(0, 1))
    sd[sd == 0.0] = 1.0
    return 0.5 + 0.25 * (surface - mean) / sd


def _smooth_background(rng, height, width, bands, cells=6):
    """Smooth multi-band background with mildly correlated bands.

    A shared brightness surface links the bands, as in real multispectral
    imagery; independent per-band surfaces carry most of the contrast.
    """
    brightness = _smooth_surfaces(rng, height, width, 1, cells)
    per_band = _smooth_surfaces(rng, height, width, bands, cells)
    return 0.4 * brightness + 0.6 * per_band


def _overexposure_mask(rng, spec, change_mask):
    """Small saturated rectangles covering ~overexposure_fraction of the scene,
    placed outside the planted change regions."""
    target = int(round(spec.overexposure_fraction * spec.height * spec.width))
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    if target == 0:
        return mask
    side = max(3, min(8, spec.height // 12))
    attempts = 0
    while mask.sum() < target and attempts < 200:
        attempts += 1
        r = int(rng.integers(0, max(spec.height - side, 1)))
        c = int(rng.integers(0, max(spec.width - side, 1)))
        block = np.zeros_like(mask)
        block[r : r + side, c : c + side] = True
        if np.any(block & change_mask):
            continue
        mask |= block
    return mask


def generate_scene(spec):
    """Deterministically generate (t1, t2, reference) from a SynthSpec."""
    rng = np.random.default_rng(spec.seed)
    shape = (spec.height, spec.width, spec.bands)
    background = _smooth_background(rng, spec.height, spec.width, spec.bands)
    t1 = background + rng.normal(0.0, spec.noise_sigma, shape)
    t2 = spec.gain * t1 + spec.offset + rng.normal(0.0, spec.noise_sigma, shape)

    labels = np.zeros((spec.height, spec.width), dtype=np.int64)
    planted = np.zeros((spec.height, spec.width), dtype=bool)
    lo, hi = spec.intensity_range
    for class_id, region in enumerate(spec.regions, start=1):
        core = region.mask(spec.height, spec.width)
        grown = region.mask(spec.height, spec.width, grow=region.margin)
        # Change amount varies smoothly across the region (partial change,
        # mixed pixels); the direction, which encodes the kind, does not.
        surface = _smooth_surfaces(rng, spec.height, spec.width, 1, cells=5)[:, :, 0]
        intensity = lo + (hi - lo) * np.clip((surface - 0.5) / 0.5 + 0.5, 0.0, 1.0)
        t2[grown] += intensity[grown, None] * np.asarray(region.shift)
        labels[grown & ~core] = -1
        labels[core] = class_id
        planted |= grown

    overexposed = _overexposure_mask(rng, spec, planted)
    if np.any(overexposed):
        # Clipped-bright patches: values above the scene's upper brightness
        # cap saturate, breaking the gain/offset relation locally.
        cap = np.quantile(t2.reshape(-1, spec.bands), 0.85, axis=0)
        t2[overexposed] = np.maximum(t2[overexposed], cap)

    border = spec.undefined_border
    if border > 0:
        if 2 * border >= min(spec.height, spec.width):
            raise DataError("undefined border ring swallows the whole scene")
        labels[:border, :] = -1
        labels[-border:, :] = -1
        labels[:, :border] = -1
        labels[:, -border:] = -1

    return SynthScene(Raster(t1), Raster(t2), ReferenceMap(labels), spec)


def default_scene_spec(seed, n_classes=3, height=96, width=96, bands=4,
                       overexposure_fraction=0.01):
    """The desk-scale benchmark scene: disjoint planted regions with
    direction-separable spectral shifts, radiometric gain/offset, and a few
    over-exposed patches."""
    if not 0 <= n_classes <= 3:
        raise ConfigError("default scene supports 0..3 change classes")
    if bands != 4:
        raise ConfigError("default scene shifts are defined for 4 bands")
    all_regions = (
        ChangeRegion("rect", (10, 10, 30, 34), (0.9, 0.9, -0.2, -0.2)),
        ChangeRegion("disk", (66, 24, 12), (-0.9, 0.7, 0.8, -0.3)),
        ChangeRegion("rect", (52, 56, 80, 84), (0.2, -0.5, 0.7, 0.9)),
    )
    scale_r = height / 96.0
    scale_c = width / 96.0
    regions = []
    for region in all_regions[:n_classes]:
        if region.kind == "rect":
            r0, c0, r1, c1 = region.geometry
            geometry = (
                int(r0 * scale_r), int(c0 * scale_c),
                int(r1 * scale_r), int(c1 * scale_c),
            )
        else:
            r, c, rad = region.geometry
            geometry = (int(r * scale_r), int(c * scale_c), max(2, int(rad * min(scale_r, scale_c))))
        regions.append(ChangeRegion(region.kind, geometry, region.shift))
    return SynthSpec(
        height=height,
        width=width,
        bands=bands,
        regions=tuple(regions),
        noise_sigma=0.05,
        gain=1.15,
        offset=0.2,
        overexposure_fraction=overexposure_fraction,
        undefined_border=2,
        seed=seed,
    )
