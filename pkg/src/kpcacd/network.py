"""Weight-shared stack of kernel-PCA convolution layers for raster pairs.

Each layer is trained on patches pooled from both temporal streams at the
same randomly sampled pixel positions, then applied to every pixel of both
streams. Spatial size is preserved through the whole stack (reflect-padded
windows), so the final feature maps subtract per pixel.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import ConfigError, DataError
from .kernels import KernelSpec
from .kpca import KpcaConv
from .raster import Raster, extract_patches, sample_training_patches
from .validation import check_raster_pair


@dataclass(frozen=True)
class LayerConfig:
    """Hyper-parameters of one convolution layer.

    window is the square patch side w, components the number of kernel-PCA
    features p, samples the number of training pixel positions n (each
    position contributes the patch pair from both times).
    """

    window: int
    components: int
    kernel: KernelSpec
    samples: int

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ConfigError(f"layer window must be an odd integer >= 3, got {self.window}")
        if self.components < 1:
            raise ConfigError(f"layer components must be >= 1, got {self.components}")
        if self.samples < self.components:
            raise ConfigError(
                f"layer samples ({self.samples}) must be >= components ({self.components})"
            )
        if not isinstance(self.kernel, KernelSpec):
            raise ConfigError("layer kernel must be a KernelSpec")


class SiameseKpcaNet(BaseEstimator):
    """Layer-wise trained siamese feature extractor with shared weights.

    fit() consumes two co-registered rasters of the same scene at different
    times; transform() maps one raster to its (h, w, p_L) feature map. Both
    temporal streams share every layer's model, so swapping the two inputs
    changes nothing about either stream's features.
    """

    def __init__(self, layers=(), seed=0):
        self.layers = layers
        self.seed = seed

    def fit(self, I1, I2):
        check_raster_pair(I1, I2, "temporal rasters")
        configs = list(self.layers)
        rng = np.random.default_rng(self.seed)
        current1, current2 = I1, I2
        self.models_ = []
        for depth, cfg in enumerate(configs):
            ps1 = extract_patches(current1, cfg.window, cfg.window)
            ps2 = extract_patches(current2, cfg.window, cfg.window)
            # Fresh positions per layer, all drawn from one seeded stream.
            layer_seed = int(rng.integers(np.iinfo(np.int64).max))
            train = sample_training_patches(ps1, ps2, cfg.samples, layer_seed)
            model = KpcaConv(n_components=cfg.components, kernel=cfg.kernel)
            model.fit(train.vectors.T)
            self.models_.append(model)
            current1 = self._project(model, ps1, current1.height, current1.width)
            current2 = self._project(model, ps2, current2.height, current2.width)
        self.configs_ = configs
        self.features_t1_ = current1
        self.features_t2_ = current2
        return self

    @staticmethod
    def _project(model, patches, height, width):
        scores = model.transform(patches.vectors.T)
        return Raster(scores.reshape(height, width, scores.shape[1]))

    def transform(self, I):
        """Apply every layer in sequence; output spatial dims equal input dims."""
        check_is_fitted(self, "models_")
        current = I
        for depth, (cfg, model) in enumerate(zip(self.configs_, self.models_)):
            expected = model.n_features_in_ // (cfg.window * cfg.window)
            if current.channels != expected:
                raise DataError(
                    f"layer {depth} expects {expected} channels, got {current.channels}"
                )
            patches = extract_patches(current, cfg.window, cfg.window)
            current = self._project(model, patches, current.height, current.width)
        return current

    def feature_eigenvalues(self):
        """Eigenvalues paired with the channels of the final feature map."""
        check_is_fitted(self, "models_")
        if not self.models_:
            raise DataError("network has no layers; final channels carry no spectrum")
        return self.models_[-1].eigenvalues_.copy()

    @property
    def depth(self):
        return len(self.layers)

    # -- serialization ------------------------------------------------------

    def save(self, directory):
        """Write net.json plus one model file per layer into a directory."""
        check_is_fitted(self, "models_")
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {"seed": self.seed, "layers": []}
        for depth, (cfg, model) in enumerate(zip(self.configs_, self.models_)):
            name = f"layer_{depth:02d}.json"
            spec = cfg.kernel
            manifest["layers"].append(
                {
                    "window": cfg.window,
                    "components": cfg.components,
                    "samples": cfg.samples,
                    "kernel": {
                        "kind": spec.kind,
                        **{
                            p: getattr(spec, p)
                            for p in ("gamma", "degree", "offset", "scale")
                            if getattr(spec, p) is not None
                        },
                    },
                    "model": name,
                }
            )
            model.save(directory / name)
        (directory / "net.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        )

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest_path = directory / "net.json"
        if not manifest_path.exists():
            raise DataError(f"missing network manifest: {manifest_path}")
        manifest = json.loads(manifest_path.read_text())
        configs, models = [], []
        for entry in manifest["layers"]:
            configs.append(
                LayerConfig(
                    window=entry["window"],
                    components=entry["components"],
                    kernel=KernelSpec(**entry["kernel"]),
                    samples=entry["samples"],
                )
            )
            models.append(KpcaConv.load(directory / entry["model"]))
        net = cls(layers=configs, seed=manifest["seed"])
        net.configs_ = configs
        net.models_ = models
        return net


def train_network(I1, I2, configs, seed):
    """Train the full weight-shared stack on a raster pair (convenience form)."""
    return SiameseKpcaNet(layers=list(configs), seed=seed).fit(I1, I2)
