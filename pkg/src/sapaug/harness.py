"""Desk-scale stand-in for the ASR experiments.

A synthetic four-class audio task (tones, chirps and chords in noise) is
learned by multinomial logistic regression on time-averaged log-mel features.
Training follows the sample-adaptive loop: a clean forward pass ranks the
mini-batch, the policy plans augmentations, and the gradient step uses the
augmented features. Validation accuracy is the search objective.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .augment import Waveform
from .errors import InputError
from .features import FeaturizerConfig, featurize
from .pipeline import BatchSample, apply_plan, plan_batch
from .policy import KINDS, PolicyParams, PolicySet
from .search import SearchSpace, policy_space

log = logging.getLogger(__name__)

NUM_CLASSES = 4


@dataclass(frozen=True)
class DatasetConfig:
    n_train: int = 512
    n_val: int = 256
    duration_s: float = 1.0
    sample_rate: int = 16000
    snr_db: tuple = (-4.0, 6.0)  # per-sample SNR drawn uniformly from this range


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    train: tuple  # Waveforms
    train_labels: np.ndarray
    val: tuple
    val_labels: np.ndarray
    config: DatasetConfig
    seed: int

    def __reduce__(self):
        # regenerated on unpickling, so worker processes receive only the recipe
        return generate_dataset, (self.config, self.seed)


def _class_signal(label: int, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # each class owns its own band so time-averaged log-mel is linearly separable
    phase = rng.uniform(0.0, 2.0 * np.pi)
    dur = t[-1] + t[1]
    if label == 0:  # low tone
        f = rng.uniform(300.0, 500.0)
        return np.sin(2.0 * np.pi * f * t + phase)
    if label == 1:  # upward chirp f -> 2 f
        f = rng.uniform(800.0, 1000.0)
        return np.sin(2.0 * np.pi * (f * t + 0.5 * (f / dur) * t * t) + phase)
    if label == 2:  # high tone
        f = rng.uniform(2000.0, 2600.0)
        return np.sin(2.0 * np.pi * f * t + phase)
    # low tone plus its fifth harmonic
    f = rng.uniform(300.0, 500.0)
    return 0.5 * (np.sin(2.0 * np.pi * f * t + phase) + np.sin(2.0 * np.pi * 5.0 * f * t + 2.0 * phase))


def _make_example(label: int, cfg: DatasetConfig, rng: np.random.Generator) -> Waveform:
    n = int(round(cfg.duration_s * cfg.sample_rate))
    t = np.arange(n) / cfg.sample_rate
    sig = _class_signal(label, t, rng)
    # random on/off envelope: the event covers 40-100% of the clip
    length = int(n * rng.uniform(0.4, 1.0))
    start = int(rng.integers(0, n - length + 1))
    env = np.zeros(n)
    env[start : start + length] = 1.0
    sig = sig * env
    snr = rng.uniform(*cfg.snr_db)
    sig_pow = np.mean(sig**2)
    noise = rng.standard_normal(n) * math.sqrt(sig_pow / 10.0 ** (snr / 10.0))
    x = sig + noise
    x *= rng.uniform(0.2, 0.9) / np.max(np.abs(x))
    return Waveform(x, cfg.sample_rate)


def generate_dataset(config: DatasetConfig | None = None, seed: int = 0) -> SyntheticDataset:
    """Class-balanced train/validation splits, fully determined by ``seed``."""
    cfg = config or DatasetConfig()
    if cfg.n_train < NUM_CLASSES or cfg.n_val < NUM_CLASSES:
        raise InputError(f"split sizes must be >= {NUM_CLASSES}, got {cfg.n_train}/{cfg.n_val}")
    if cfg.duration_s <= 0 or cfg.sample_rate <= 0:
        raise InputError("duration and sample rate must be positive")
    rng = np.random.default_rng([int(seed), 1])

    def split(n):
        labels = np.arange(n) % NUM_CLASSES
        labels = labels[rng.permutation(n)]
        return tuple(_make_example(int(c), cfg, rng) for c in labels), labels

    train, ytr = split(cfg.n_train)
    val, yva = split(cfg.n_val)
    return SyntheticDataset(train, ytr, val, yva, cfg, int(seed))


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class TinyModel:
    """Linear softmax classifier ``softmax(x W + b)``."""

    W: np.ndarray
    b: np.ndarray
    lr: float = 0.1
    steps: int = 0

    @classmethod
    def zeros(cls, n_features: int, n_classes: int = NUM_CLASSES, lr: float = 0.1) -> "TinyModel":
        return cls(np.zeros((n_features, n_classes)), np.zeros(n_classes), lr)

    def probs(self, X: np.ndarray) -> np.ndarray:
        return softmax(X @ self.W + self.b)

    def per_sample_loss(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        z = X @ self.W + self.b
        z = z - z.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(z).sum(axis=1))
        return logsum - z[np.arange(len(y)), y]

    def loss_and_grad(self, X: np.ndarray, y: np.ndarray):
        """Mean cross-entropy and its gradients ``(dW, db)``."""
        P = self.probs(X)
        n = len(y)
        loss = float(np.mean(self.per_sample_loss(X, y)))
        G = P.copy()
        G[np.arange(n), y] -= 1.0
        G /= n
        return loss, X.T @ G, G.sum(axis=0)

    def step(self, X: np.ndarray, y: np.ndarray) -> float:
        loss, dW, db = self.loss_and_grad(X, y)
        self.W -= self.lr * dW
        self.b -= self.lr * db
        self.steps += 1
        return loss

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(X @ self.W + self.b, axis=1)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 32
    lr: float = 0.1
    num_masks: int = 4
    n_cm: int = 6
    featurizer: FeaturizerConfig = field(default_factory=FeaturizerConfig)


@dataclass
class TrainResult:
    accuracy: float
    diverged: bool = False
    applied: dict = field(default_factory=dict)  # kind -> number of applications
    losses: list = field(default_factory=list)  # mean clean loss per step


class FeatureCache:
    """Clean features of a dataset, computed once per featurizer config."""

    def __init__(self, dataset: SyntheticDataset, config: FeaturizerConfig):
        self.train = [featurize(x, config) for x in dataset.train]
        self.val = [featurize(x, config) for x in dataset.val]
        pooled = np.array([f.frames.mean(axis=0) for f in self.train])
        self.mean = pooled.mean(axis=0)
        self.std = pooled.std(axis=0) + 1e-6
        self.train_x = self.normalize(pooled)
        self.val_x = self.normalize(np.array([f.frames.mean(axis=0) for f in self.val]))

    def normalize(self, pooled: np.ndarray) -> np.ndarray:
        return (pooled - self.mean) / self.std


_CACHES: dict = {}


def feature_cache(dataset: SyntheticDataset, config: FeaturizerConfig) -> FeatureCache:
    key = (id(dataset), config)
    if key not in _CACHES:
        _CACHES.clear()
        _CACHES[key] = FeatureCache(dataset, config)
    return _CACHES[key]


def _step_seed(seed: int, epoch: int, step: int) -> int:
    return int(np.random.SeedSequence([int(seed), epoch, step]).generate_state(1, np.uint64)[0])


def train_and_evaluate(
    dataset: SyntheticDataset,
    policies: PolicySet,
    config: TrainConfig | None = None,
    seed: int = 0,
) -> TrainResult:
    """Train under ``policies`` and return validation accuracy (deterministic in ``seed``)."""
    cfg = config or TrainConfig()
    if cfg.epochs < 1 or cfg.batch_size < 1 or not cfg.lr > 0:
        raise InputError("epochs, batch_size and lr must be positive")
    cache = feature_cache(dataset, cfg.featurizer)
    X, y = cache.train_x, dataset.train_labels
    model = TinyModel.zeros(X.shape[1], NUM_CLASSES, cfg.lr)
    rng = np.random.default_rng([int(seed), 2])
    applied = {k.value: 0 for k in KINDS}
    losses = []
    clean_by_id = dict(enumerate(cache.train))
    any_active = any(policies[k].p > 0 for k in KINDS)

    # divergence is detected explicitly below, so overflow is not worth a warning
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(y))
            for step, start in enumerate(range(0, len(y), cfg.batch_size)):
                idx = order[start : start + cfg.batch_size]
                clean_loss = model.per_sample_loss(X[idx], y[idx])
                if not np.all(np.isfinite(clean_loss)):
                    return TrainResult(0.0, True, applied, losses)
                losses.append(float(clean_loss.mean()))
                Xb = X[idx]
                if any_active:
                    batch = [
                        BatchSample(dataset.train[i], int(y[i]), float(l), int(i))
                        for i, l in zip(idx, clean_loss)
                    ]
                    plan = plan_batch(batch, policies, _step_seed(seed, epoch, step), cfg.num_masks, cfg.n_cm)
                    for sp in plan.samples:
                        for k, entry in sp.entries.items():
                            applied[k.value] += entry.selected
                    feats = apply_plan(batch, plan, cfg.featurizer, feature_cache=clean_by_id)
                    Xb = cache.normalize(np.array([f.frames.mean(axis=0) for f in feats]))
                loss = model.step(Xb, y[idx])
                if not (math.isfinite(loss) and np.all(np.isfinite(model.W))):
                    return TrainResult(0.0, True, applied, losses)

    acc = float(np.mean(model.predict(cache.val_x) == dataset.val_labels))
    return TrainResult(acc, False, applied, losses)


# ---------------------------------------------------------------------------
# search objective
# ---------------------------------------------------------------------------


def decode_policies(point, space: SearchSpace | None = None) -> PolicySet:
    """Map a policy-space point (in space units) to a ``PolicySet``."""
    space = space or policy_space()
    values = space.to_dict(space.check(point))
    return PolicySet({
        k: PolicyParams(values[f"s_{k.value}"], values[f"a_{k.value}"], values[f"p_{k.value}"])
        for k in KINDS
    })


def encode_policies(policies: PolicySet, space: SearchSpace | None = None) -> np.ndarray:
    space = space or policy_space()
    d = {}
    for k in KINDS:
        pp = policies[k]
        d[f"s_{k.value}"], d[f"a_{k.value}"], d[f"p_{k.value}"] = pp.s, pp.a, pp.p
    return space.from_dict(d)


class PolicyObjective:
    """Validation accuracy of a policy point: median over several training seeds."""

    def __init__(self, dataset: SyntheticDataset, config: TrainConfig | None = None,
                 seeds=(0, 1, 2), space: SearchSpace | None = None):
        self.dataset = dataset
        self.config = config or TrainConfig()
        self.seeds = tuple(seeds)
        self.space = space or policy_space()

    def evaluate(self, policies: PolicySet) -> float:
        accs = []
        for s in self.seeds:
            r = train_and_evaluate(self.dataset, policies, self.config, s)
            if r.diverged:
                log.warning("training diverged (seed %d); objective 0", s)
            accs.append(r.accuracy)
        return float(np.median(accs))

    def __call__(self, point) -> float:
        return self.evaluate(decode_policies(point, self.space))

    def baseline(self) -> float:
        return self.evaluate(PolicySet.disabled())

