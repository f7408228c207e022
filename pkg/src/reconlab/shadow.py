"""Shadow-model generation and the learned reconstructor-network attack.

The attack trains one shadow model per candidate target on the fixed set
plus that candidate, featurizes the resulting parameter vectors, and fits a
reconstructor network mapping normalized features back to the target. The
released model is then pushed through the same featurizer and network.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import nn
from .data import DataPoint, LabeledDataset
from .metrics import mse
from .rng import Rng, _derive

__all__ = [
    "Featurizer",
    "NormStats",
    "ShadowSet",
    "RecoNNConfig",
    "RecoNN",
    "featurize",
    "apply_norm",
    "gen_shadow_models",
    "gen_shadows",
    "build_shadow_set",
    "train_reconn",
    "attack",
    "AttackBundle",
    "run_protocol",
    "default_workers",
]

DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class Featurizer:
    """How a model becomes an attack feature vector.

    mode "whitebox": canonical flatten of all layers.
    mode "layers":   flatten of the listed layer indices only.
    mode "blackbox": concatenated logits over a probe set (forward access only).
    """

    mode: str = "whitebox"
    layers: tuple = ()
    probe: np.ndarray = None

    def __post_init__(self):
        if self.mode not in ("whitebox", "layers", "blackbox"):
            raise ValueError(f"unknown featurizer mode {self.mode!r}")
        if self.mode == "layers" and not self.layers:
            raise ValueError("layers mode needs at least one layer index")
        if self.mode == "blackbox":
            if self.probe is None or len(self.probe) == 0:
                raise ValueError("blackbox mode needs a nonempty probe set")
            object.__setattr__(self, "probe", np.asarray(self.probe, dtype=np.float64))


def featurize(model: nn.ModelParams, featurizer: Featurizer) -> np.ndarray:
    if featurizer.mode == "whitebox":
        return model.flatten()
    if featurizer.mode == "layers":
        for i in featurizer.layers:
            if not 0 <= i < model.arch.num_layers:
                raise ValueError(f"layer index {i} out of range")
        return model.flatten_layers(featurizer.layers)
    return nn.forward(model, featurizer.probe).ravel()


@dataclass
class NormStats:
    """Per-coordinate mean/std over the shadow feature vectors."""

    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def fit(features: np.ndarray) -> "NormStats":
        features = np.atleast_2d(features)
        if features.shape[0] == 0:
            raise ValueError("cannot fit NormStats on an empty shadow set")
        return NormStats(features.mean(axis=0), features.std(axis=0))

    def effective_std(self) -> np.ndarray:
        # Degenerate (constant) coordinates pass through unscaled.
        return np.where(self.std < DEGENERATE_STD, 1.0, self.std)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.mean.shape[0]:
            raise ValueError(f"length mismatch {v.shape[-1]} vs {self.mean.shape[0]}")
        return (v - self.mean) / self.effective_std()

    def inverse(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v) * self.effective_std() + self.mean


def apply_norm(v: np.ndarray, stats: NormStats) -> np.ndarray:
    return stats.apply(v)


@dataclass
class ShadowSet:
    """Attack training data: featurized shadow models paired with their targets."""

    features: np.ndarray   # (k, F)
    targets: np.ndarray    # (k, d), entries in [0, 1]
    featurizer: Featurizer
    stats: NormStats

    def __len__(self) -> int:
        return self.features.shape[0]

    def save(self, prefix: str) -> None:
        """Text header (descriptor, dims, NormStats) + little-endian float64 matrix."""
        k, flen = self.features.shape
        tlen = self.targets.shape[1]
        lines = [
            f"k={k}",
            f"feature_len={flen}",
            f"target_len={tlen}",
            f"mode={self.featurizer.mode}",
            "layers=" + ",".join(str(i) for i in self.featurizer.layers),
            "norm_mean=" + ",".join(repr(float(v)) for v in self.stats.mean),
            "norm_std=" + ",".join(repr(float(v)) for v in self.stats.std),
        ]
        if self.featurizer.mode == "blackbox":
            p = self.featurizer.probe
            lines.append(f"probe_shape={p.shape[0]},{p.shape[1]}")
            p.astype("<f8").tofile(prefix + ".probe.bin")
        with open(prefix + ".header", "w") as f:
            f.write("\n".join(lines) + "\n")
        np.hstack([self.features, self.targets]).astype("<f8").tofile(prefix + ".bin")

    @staticmethod
    def load(prefix: str) -> "ShadowSet":
        fields = {}
        with open(prefix + ".header") as f:
            for line in f:
                key, _, val = line.strip().partition("=")
                fields[key] = val
        k = int(fields["k"])
        flen = int(fields["feature_len"])
        tlen = int(fields["target_len"])
        layers = tuple(int(i) for i in fields["layers"].split(",") if i)
        probe = None
        if fields["mode"] == "blackbox":
            pr, pc = (int(v) for v in fields["probe_shape"].split(","))
            probe = np.fromfile(prefix + ".probe.bin", dtype="<f8").reshape(pr, pc)
        featurizer = Featurizer(fields["mode"], layers, probe)
        mat = np.fromfile(prefix + ".bin", dtype="<f8").reshape(k, flen + tlen)
        stats = NormStats(
            np.array([float(v) for v in fields["norm_mean"].split(",")]),
            np.array([float(v) for v in fields["norm_std"].split(",")]),
        )
        return ShadowSet(mat[:, :flen].copy(), mat[:, flen:].copy(), featurizer, stats)


def default_workers() -> int:
    return max(1, int(os.environ.get("RECONLAB_THREADS", "1")))


def shadow_config(config: nn.TrainConfig, index: int, random_init: bool) -> nn.TrainConfig:
    """Per-shadow seeds: DP noise is always fresh; init only under the ablation."""
    init_seed = config.init_seed
    if random_init:
        init_seed = _derive(config.init_seed, ("shadow-init", index))
    return config.with_seeds(
        init_seed=init_seed,
        noise_seed=_derive(config.noise_seed, ("shadow-noise", index)),
    )


def _train_one(args):
    fixed, point, arch, cfg, index = args
    try:
        return nn.train(fixed.with_point(point), arch, cfg)
    except nn.DivergenceError as e:
        raise nn.DivergenceError(f"shadow {index} diverged: {e}") from None


def gen_shadow_models(fixed: LabeledDataset, shadow_pool: LabeledDataset,
                      arch: nn.MlpArchitecture, config: nn.TrainConfig,
                      random_init: bool = False, workers: int = None) -> list:
    """Train one model on fixed + each shadow target; order matches the pool.

    Serial and parallel runs agree because every shadow's seeds derive from
    (config seeds, shadow index) up front.
    """
    workers = default_workers() if workers is None else workers
    jobs = [
        (fixed, shadow_pool[i], arch, shadow_config(config, i, random_init), i)
        for i in range(len(shadow_pool))
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_train_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_train_one(j) for j in jobs]


def build_shadow_set(models: list, shadow_pool: LabeledDataset,
                     featurizer: Featurizer) -> ShadowSet:
    """Featurize trained shadow models and fit normalization statistics."""
    features = np.stack([featurize(m, featurizer) for m in models])
    targets = shadow_pool.X.copy()
    return ShadowSet(features, targets, featurizer, NormStats.fit(features))


def gen_shadows(fixed: LabeledDataset, shadow_pool: LabeledDataset,
                arch: nn.MlpArchitecture, config: nn.TrainConfig,
                featurizer: Featurizer, random_init: bool = False,
                workers: int = None) -> ShadowSet:
    models = gen_shadow_models(fixed, shadow_pool, arch, config, random_init, workers)
    return build_shadow_set(models, shadow_pool, featurizer)


@dataclass(frozen=True)
class RecoNNConfig:
    """Reconstructor network: MLP with ReLU hidden layers and sigmoid output,
    trained with RMSProp on an equally weighted MAE+MSE loss."""

    hidden_widths: tuple = None  # None -> two layers, width max(64, 4*sqrt(F))
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 100
    seed: int = 0
    rms_decay: float = 0.9
    rms_eps: float = 1e-8

    def resolve_widths(self, feature_len: int) -> tuple:
        if self.hidden_widths is not None:
            return tuple(self.hidden_widths)
        w = max(64, int(4 * np.sqrt(feature_len)))
        return (w, w)


@dataclass
class RecoNN:
    params: nn.ModelParams

    def predict(self, normalized_features: np.ndarray) -> np.ndarray:
        logits = nn.forward(self.params, normalized_features)
        return 1.0 / (1.0 + np.exp(-logits))


def _reconn_loss_grad(params: nn.ModelParams, F: np.ndarray, T: np.ndarray):
    """Mean (|o-t| + (o-t)^2) over batch and coords, sigmoid output, exact backprop."""
    acts, pre = nn._forward_cached(params, F)
    out = 1.0 / (1.0 + np.exp(-acts[-1]))
    diff = out - T
    loss = float(np.mean(np.abs(diff) + diff ** 2))
    delta = (np.sign(diff) + 2.0 * diff) * out * (1.0 - out) / diff.size
    _, dact = nn.ACTIVATIONS[params.arch.activation]
    gw = [None] * params.arch.num_layers
    gb = [None] * params.arch.num_layers
    for i in range(params.arch.num_layers - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * dact(pre[i - 1])
    return loss, nn.ModelParams(params.arch, gw, gb)


def train_reconn(shadow_set: ShadowSet, config: RecoNNConfig = RecoNNConfig()) -> RecoNN:
    """Fit the reconstructor on normalized features; deterministic given the seed."""
    k, flen = shadow_set.features.shape
    if k < config.batch_size:
        raise ValueError(f"shadow set size {k} < batch size {config.batch_size}")
    d_out = shadow_set.targets.shape[1]
    arch = nn.MlpArchitecture((flen, *config.resolve_widths(flen), d_out), activation="relu")
    F = shadow_set.stats.apply(shadow_set.features)
    T = shadow_set.targets

    theta = nn.init_params(arch, _derive(config.seed, "reconn-init")).flatten()
    cache = np.zeros_like(theta)
    shuffle = Rng(_derive(config.seed, "reconn-shuffle"))
    lr, rho, eps = config.learning_rate, config.rms_decay, config.rms_eps

    for epoch in range(config.epochs):
        perm = shuffle.child(("epoch", epoch)).permutation(k)
        for start in range(0, k, config.batch_size):
            idx = perm[start : start + config.batch_size]
            p = nn.ModelParams.unflatten(arch, theta)
            loss, g = _reconn_loss_grad(p, F[idx], T[idx])
            if not np.isfinite(loss):
                raise nn.DivergenceError(f"reconstructor diverged at epoch {epoch}")
            gv = g.flatten()
            cache = rho * cache + (1.0 - rho) * gv * gv
            theta = theta - lr * gv / (np.sqrt(cache) + eps)
    return RecoNN(nn.ModelParams.unflatten(arch, theta))


def attack(phi: RecoNN, released, featurizer: Featurizer, stats: NormStats) -> np.ndarray:
    """Candidate reconstruction from a released model (params or forward access)."""
    feat = featurize(released, featurizer)
    return phi.predict(stats.apply(feat))


@dataclass
class AttackBundle:
    """A trained reconstructor with its featurizer and normalization stats."""

    phi: RecoNN
    featurizer: Featurizer
    stats: NormStats

    def __call__(self, released) -> np.ndarray:
        return attack(self.phi, released, self.featurizer, self.stats)


def run_protocol(fixed: LabeledDataset, z: DataPoint, arch: nn.MlpArchitecture,
                 config: nn.TrainConfig, attack_fn, error_fn=mse) -> float:
    """Train on fixed + z, attack the result, return the reconstruction error."""
    theta = nn.train(fixed.with_point(z), arch, config)
    z_hat = attack_fn(theta)
    return float(error_fn(np.asarray(z.x, dtype=np.float64), z_hat))
