"""Raster container, file I/O, radiometric normalization, and patch extraction.

Two on-disk formats are supported for real-valued rasters:

* BSQ container: ``<name>.bsq`` holds raw little-endian float64 samples in
  band-sequential order (all of band 0 row-major, then band 1, ...) and a
  sidecar ``<name>.json`` describes the geometry:
  ``{"height": H, "width": W, "channels": C, "dtype": "f64", "order": "bsq"}``.
  Save/load round-trips are bit-exact.
* Binary netpbm: PPM (P6, 8-bit) for 3-band images and visual exports,
  PGM (P5, 8-bit) for single-band exports and label maps.

Label maps (change maps, reference maps) are PGM files with a JSON legend
mapping gray levels to integer labels; -1 marks pixels excluded from scoring.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

BSQ_SIDECAR = {"dtype": "f64", "order": "bsq"}


@dataclass(frozen=True)
class Raster:
    """An immutable height x width x channels grid of float64 samples."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C")
        if values.ndim == 2:
            values = values[:, :, None]
        if values.ndim != 3 or min(values.shape) < 1:
            raise DataError(f"raster values must be (h, w, c), got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("raster contains non-finite samples")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def channels(self):
        return self.values.shape[2]

    @property
    def shape(self):
        return self.values.shape

    def band(self, n):
        return self.values[:, :, n]


@dataclass(frozen=True)
class PatchSet:
    """Vectorized image patches, one column per patch.

    Each column stacks the patch samples band by band, row-major within a
    band, so the vector length is patch_h * patch_w * channels.
    """

    patch_h: int
    patch_w: int
    channels: int
    vectors: np.ndarray
    origin_coords: np.ndarray | None = field(default=None)

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise DataError("patch vectors must be a 2-D matrix")
        if vectors.shape[0] != self.patch_h * self.patch_w * self.channels:
            raise DataError(
                f"patch vector length {vectors.shape[0]} does not match "
                f"{self.patch_h}x{self.patch_w}x{self.channels} geometry"
            )
        if not vectors.flags.writeable:
            object.__setattr__(self, "vectors", vectors)
        else:
            vectors = np.ascontiguousarray(vectors)
            vectors.flags.writeable = False
            object.__setattr__(self, "vectors", vectors)

    @property
    def count(self):
        return self.vectors.shape[1]

    @property
    def dim(self):
        return self.vectors.shape[0]


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


def _bsq_sidecar_path(path):
    return Path(path).with_suffix(".json")


def _load_bsq(path):
    path = Path(path)
    sidecar = _bsq_sidecar_path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    if not sidecar.exists():
        raise DataError(f"missing BSQ sidecar: {sidecar}")
    try:
        meta = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid BSQ sidecar {sidecar}: {exc}") from exc
    try:
        h, w, c = int(meta["height"]), int(meta["width"]), int(meta["channels"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"BSQ sidecar {sidecar} lacks height/width/channels") from exc
    if min(h, w, c) < 1:
        raise DataError(f"BSQ sidecar {sidecar} has non-positive dimensions")
    if meta.get("dtype") != "f64" or meta.get("order") != "bsq":
        raise DataError(f"unsupported BSQ encoding in {sidecar}")
    payload = path.read_bytes()
    expected = 8 * h * w * c
    if len(payload) != expected:
        raise DataError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype="<f8").reshape(c, h, w)
    return Raster(data.transpose(1, 2, 0))


def _save_bsq(r, path):
    path = Path(path)
    payload = np.ascontiguousarray(r.values.transpose(2, 0, 1), dtype="<f8").tobytes()
    meta = {"height": r.height, "width": r.width, "channels": r.channels, **BSQ_SIDECAR}
    try:
        path.write_bytes(payload)
        _bsq_sidecar_path(path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def _next_pnm_token(f):
    token = b""
    while True:
        ch = f.read(1)
        if ch == b"":
            if token:
                return token
            raise DataError("truncated netpbm header")
        if ch == b"#":
            while ch not in (b"", b"\n", b"\r"):
                ch = f.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def read_pnm(path):
    """Read a binary PGM (P5) or PPM (P6) file.

    Returns (samples, channels) where samples is an (h, w) or (h, w, 3)
    uint8 array. Only 8-bit files (maxval <= 255) are supported.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic not in (b"P5", b"P6"):
            raise DataError(f"{path}: not a binary PGM/PPM file (magic {magic!r})")
        w = int(_next_pnm_token(f))
        h = int(_next_pnm_token(f))
        maxval = int(_next_pnm_token(f))
        if maxval < 1 or maxval > 255:
            raise DataError(f"{path}: only 8-bit netpbm supported (maxval {maxval})")
        channels = 1 if magic == b"P5" else 3
        payload = f.read(h * w * channels + 1)
    if len(payload) < h * w * channels:
        raise DataError(
            f"{path}: payload holds {len(payload)} bytes, header implies {h * w * channels}"
        )
    if len(payload) > h * w * channels:
        raise DataError(f"{path}: trailing bytes after pixel payload")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(
        (h, w) if channels == 1 else (h, w, 3)
    )
    return data, channels


def write_pgm(grays, path):
    """Write an (h, w) uint8 array as a binary PGM (P5, maxval 255)."""
    grays = np.asarray(grays)
    if grays.ndim != 2:
        raise DataError(f"PGM export needs an (h, w) grid, got shape {grays.shape}")
    header = f"P5\n{grays.shape[1]} {grays.shape[0]}\n255\n".encode("ascii")
    try:
        Path(path).write_bytes(header + grays.astype(np.uint8).tobytes())
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def write_ppm(rgb, path):
    """Write an (h, w, 3) uint8 array as a binary PPM (P6, maxval 255)."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DataError(f"PPM export needs an (h, w, 3) grid, got shape {rgb.shape}")
    header = f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode("ascii")
    try:
        Path(path).write_bytes(header + rgb.astype(np.uint8).tobytes())
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def load_raster(path):
    """Load a raster from a BSQ container, a binary PPM, or a binary PGM."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".bsq":
        return _load_bsq(path)
    if suffix in (".ppm", ".pgm"):
        data, _channels = read_pnm(path)
        return Raster(data.astype(np.float64))
    raise DataError(f"unsupported raster format: {path} (use .bsq, .ppm, or .pgm)")


def save_raster(r, path):
    """Save a raster; .bsq is bit-exact, .ppm/.pgm clip and quantize to 8 bit."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".bsq":
        _save_bsq(r, path)
    elif suffix == ".ppm":
        if r.channels != 3:
            raise DataError(f"PPM export needs 3 channels, raster has {r.channels}")
        write_ppm(np.clip(np.rint(r.values), 0, 255), path)
    elif suffix == ".pgm":
        if r.channels != 1:
            raise DataError(f"PGM export needs 1 channel, raster has {r.channels}")
        write_pgm(np.clip(np.rint(r.values[:, :, 0]), 0, 255), path)
    else:
        raise DataError(f"unsupported raster format: {path} (use .bsq, .ppm, or .pgm)")


# ---------------------------------------------------------------------------
# Label maps (PGM + JSON legend)
# ---------------------------------------------------------------------------

UNDEFINED_GRAY = 1  # gray level reserved for pixels excluded from scoring


def _legend_paths(map_path):
    map_path = Path(map_path)
    return (
        map_path.with_suffix(".legend.json"),
        map_path.parent / "legend.json",
    )


def label_grays(n_classes):
    """Gray level for each label 0..K: label * floor(255 / K)."""
    step = 255 // max(n_classes, 1)
    return {label: label * step for label in range(n_classes + 1)}


def write_label_map(labels, n_classes, path, legend_path=None, class_names=None):
    """Write an integer label grid as PGM plus a JSON legend.

    Labels are 0 (non-change), 1..K (change classes), and -1 (undefined).
    """
    labels = np.asarray(labels)
    grays = np.full(labels.shape, UNDEFINED_GRAY, dtype=np.uint8)
    gray_of = label_grays(n_classes)
    for label, gray in gray_of.items():
        grays[labels == label] = gray
    legend = {
        "grays": {str(gray): label for label, gray in gray_of.items()},
        "names": class_names
        or {
            "0": "non-change",
            **{str(k): f"change-{k}" for k in range(1, n_classes + 1)},
        },
    }
    if np.any(labels == -1):
        legend["grays"][str(UNDEFINED_GRAY)] = -1
        legend["names"]["-1"] = "undefined"
    write_pgm(grays, path)
    if legend_path is None:
        legend_path = _legend_paths(path)[0]
    Path(legend_path).write_text(json.dumps(legend, sort_keys=True, indent=2) + "\n")


def read_label_map(path):
    """Read a PGM label map back into an integer grid using its legend.

    The legend is looked up as ``<stem>.legend.json`` next to the map, then
    as ``legend.json`` in the map's directory. Without a legend, plain 0/255
    masks are read as binary maps.
    """
    grays, channels = read_pnm(path)
    if channels != 1:
        raise DataError(f"{path}: label maps must be single-band PGM")
    legend = None
    for candidate in _legend_paths(path):
        if candidate.exists():
            try:
                legend = json.loads(candidate.read_text())["grays"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"invalid legend {candidate}: {exc}") from exc
            break
    if legend is None:
        present = set(np.unique(grays).tolist())
        if present <= {0, 255}:
            legend = {"0": 0, "255": 1}
        else:
            raise DataError(f"{path}: no legend found and gray levels are not 0/255")
    labels = np.full(grays.shape, np.iinfo(np.int64).min, dtype=np.int64)
    for gray, label in legend.items():
        labels[grays == int(gray)] = int(label)
    unknown = labels == np.iinfo(np.int64).min
    if np.any(unknown):
        bad = sorted(np.unique(grays[unknown]).tolist())
        raise DataError(f"{path}: gray levels {bad} missing from legend")
    return labels


# ---------------------------------------------------------------------------
# Normalization and patch extraction
# ---------------------------------------------------------------------------


def zscore_normalize(r):
    """Standardize each band to zero mean and unit variance.

    Uses the population standard deviation: the normalization is a statistic
    of the whole image, not an estimator. Raises DataError for a constant
    band, which has no radiometric scale to normalize.
    """
    means = r.values.mean(axis=(0, 1))
    stds = r.values.std(axis=(0, 1))
    for n, sigma in enumerate(stds):
        if sigma == 0.0:
            raise DataError(f"constant band {n}: cannot z-score normalize")
    return Raster((r.values - means) / stds)


def _reflect_indices(n, pad):
    """Reflected (no edge repeat) sample indices for positions -pad..n-1+pad."""
    if n == 1:
        return np.zeros(n + 2 * pad, dtype=np.intp)
    idx = np.abs(np.arange(-pad, n + pad)) % (2 * n - 2)
    return np.where(idx >= n, 2 * n - 2 - idx, idx)


def extract_patches(r, s1, s2):
    """Extract one vectorized s1 x s2 x c patch per pixel.

    Windows are centered; borders use reflect padding (edge row/column not
    repeated), so the patch count equals height * width. Column order is
    pixel-major: column i belongs to pixel (i // width, i % width).
    """
    for name, s in (("s1", s1), ("s2", s2)):
        if s < 1 or s % 2 == 0:
            raise DataError(f"window size {name}={s} must be an odd positive integer")
    pad_r, pad_c = (s1 - 1) // 2, (s2 - 1) // 2
    if r.height > 1 and pad_r > r.height - 1:
        raise DataError(f"window height {s1} too large for {r.height}-row raster")
    if r.width > 1 and pad_c > r.width - 1:
        raise DataError(f"window width {s2} too large for {r.width}-column raster")

    padded = r.values[_reflect_indices(r.height, pad_r)][:, _reflect_indices(r.width, pad_c)]
    windows = np.lib.stride_tricks.sliding_window_view(padded, (s1, s2), axis=(0, 1))
    # (h, w, c, s1, s2) -> band-major patch vectors, one column per pixel.
    vectors = windows.reshape(r.height * r.width, r.channels * s1 * s2).T
    rows, cols = np.mgrid[0 : r.height, 0 : r.width]
    coords = np.column_stack([rows.ravel(), cols.ravel()])
    return PatchSet(s1, s2, r.channels, np.ascontiguousarray(vectors), coords)


def sample_training_patches(ps1, ps2, n, seed):
    """Pool 2n training patches from n pixel positions drawn without replacement.

    The same positions are used in both temporal patch sets (the layer the
    samples train is weight-shared), and the two patches of each position
    are interleaved in the output. Deterministic for a fixed seed.
    """
    if (ps1.patch_h, ps1.patch_w, ps1.channels, ps1.count) != (
        ps2.patch_h,
        ps2.patch_w,
        ps2.channels,
        ps2.count,
    ):
        raise DataError("temporal patch sets differ in geometry")
    if not 1 <= n <= ps1.count:
        raise DataError(f"cannot sample {n} positions from {ps1.count} pixels")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    positions = np.sort(rng.choice(ps1.count, size=n, replace=False))
    pooled = np.empty((ps1.dim, 2 * n))
    pooled[:, 0::2] = ps1.vectors[:, positions]
    pooled[:, 1::2] = ps2.vectors[:, positions]
    coords = None
    if ps1.origin_coords is not None:
        coords = np.repeat(np.asarray(ps1.origin_coords)[positions], 2, axis=0)
    return PatchSet(ps1.patch_h, ps1.patch_w, ps1.channels, pooled, coords)
