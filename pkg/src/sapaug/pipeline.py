"""Per-mini-batch orchestration: rank losses, plan augmentations, apply them.

Planning is a pure function of the batch losses, the policy set and a seed.
All randomness comes from independent streams keyed by the seed and the
sample id: one stream per sample draws the selection decisions (one uniform
per kind, in kind order), and one stream per (sample, kind) drives the partner
choice and the transform itself. The plan for a sample therefore does not
depend on where it sits in the batch.

Application order per sample is fixed: SamplePairing, CutMix, featurize,
time stretch, time mask, frequency mask.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .augment import (
    DEFAULT_N_CM,
    DEFAULT_NUM_MASKS,
    AugmentationKind,
    AugmentationStrength,
    FeatureMatrix,
    Waveform,
    cutmix,
    freq_mask,
    map_lambda,
    sample_pairing,
    time_mask,
    time_stretch,
)
from .errors import InputError
from .features import FeaturizerConfig, featurize
from .policy import KINDS, PolicySet, lambda_of_rank, rank_losses, sample_selection

_SELECT_STREAM = 255  # kind slot of the per-sample selection stream

RAW_KINDS = (AugmentationKind.SAMPLE_PAIRING, AugmentationKind.CUTMIX)


def sample_rng(seed: int, sample_id: int, kind: AugmentationKind | None = None) -> np.random.Generator:
    """Stream for one sample; ``kind=None`` gives the selection stream."""
    slot = _SELECT_STREAM if kind is None else kind.index
    return np.random.default_rng([int(seed), int(sample_id), slot])


@dataclass(frozen=True)
class BatchSample:
    waveform: Waveform
    label: int
    clean_loss: float
    id: int


@dataclass(frozen=True)
class PlannedAugmentation:
    selected: bool
    lam: float
    strength: AugmentationStrength


@dataclass(frozen=True)
class SamplePlan:
    sample_id: int
    rank: int
    entries: dict = field(default_factory=dict)  # AugmentationKind -> PlannedAugmentation

    def selected(self, kind: AugmentationKind) -> bool:
        return self.entries[kind].selected

    @property
    def any_raw(self) -> bool:
        return any(self.entries[k].selected for k in RAW_KINDS)


@dataclass(frozen=True)
class AugmentationPlan:
    seed: int
    batch_size: int
    samples: tuple  # SamplePlan per batch position
    num_masks: int = DEFAULT_NUM_MASKS
    n_cm: int = DEFAULT_N_CM

    def for_id(self, sample_id: int) -> SamplePlan:
        for sp in self.samples:
            if sp.sample_id == sample_id:
                return sp
        raise KeyError(sample_id)


def plan_sample(sample_id: int, rank: int, batch_size: int, policies: PolicySet, seed: int) -> SamplePlan:
    entries = {}
    rng = sample_rng(seed, sample_id)
    for kind in KINDS:
        params = policies[kind]
        lam = lambda_of_rank(params, rank, batch_size)
        selected = sample_selection(params, rng)
        entries[kind] = PlannedAugmentation(selected, lam, map_lambda(kind, lam))
    return SamplePlan(sample_id, rank, entries)


def plan_batch(
    batch,
    policies: PolicySet,
    seed: int,
    num_masks: int = DEFAULT_NUM_MASKS,
    n_cm: int = DEFAULT_N_CM,
) -> AugmentationPlan:
    """Decide, for every sample and augmentation, whether and how hard to augment."""
    batch = list(batch)
    if not batch:
        raise InputError("batch must not be empty")
    ids = [s.id for s in batch]
    if len(set(ids)) != len(ids):
        raise InputError("sample ids must be unique within a batch")
    if any(i < 0 for i in ids):
        raise InputError("sample ids must be non-negative")
    ranking = rank_losses([s.clean_loss for s in batch])
    B = ranking.batch_size
    plans = tuple(
        plan_sample(s.id, int(r), B, policies, seed) for s, r in zip(batch, ranking.ranks)
    )
    return AugmentationPlan(int(seed), B, plans, num_masks, n_cm)


def choose_partner(sample_id: int, candidate_ids, rng: np.random.Generator) -> int | None:
    """Uniform pick among the other ids of the batch; ``None`` when the sample is alone.

    Candidates are sorted first so the choice does not depend on batch order.
    """
    others = sorted(i for i in candidate_ids if i != sample_id)
    if not others:
        return None
    return others[int(rng.integers(len(others)))]


def augment_sample(
    waveform: Waveform,
    plan: SamplePlan,
    seed: int,
    partner_for: Callable[[AugmentationKind, np.random.Generator], Waveform | None],
    config: FeaturizerConfig | None = None,
    num_masks: int = DEFAULT_NUM_MASKS,
    n_cm: int = DEFAULT_N_CM,
    clean_features: FeatureMatrix | None = None,
) -> tuple[Waveform, FeatureMatrix]:
    """Run one sample through its plan; returns the raw-domain result and final features.

    ``partner_for(kind, rng)`` returns the mixing partner for a raw-domain
    kind, drawing from that kind's stream before the transform does. A
    ``None`` partner (no other sample to mix with) skips that kind.
    ``clean_features`` may be supplied to skip featurization when no raw-domain
    augmentation is selected.
    """
    sid = plan.sample_id
    x = waveform
    mixed = False
    kind = AugmentationKind.SAMPLE_PAIRING
    if plan.selected(kind):
        partner = partner_for(kind, sample_rng(seed, sid, kind))
        if partner is not None:
            x = sample_pairing(x, partner, plan.entries[kind].strength.value)
            mixed = True
    kind = AugmentationKind.CUTMIX
    if plan.selected(kind):
        rng = sample_rng(seed, sid, kind)
        partner = partner_for(kind, rng)
        if partner is not None:
            w = int(math.floor(plan.entries[kind].strength.value))
            x = cutmix(x, partner, w, n_cm, rng)
            mixed = True

    if clean_features is not None and not mixed:
        feat = clean_features
    else:
        feat = featurize(x, config)

    kind = AugmentationKind.TIME_STRETCH
    if plan.selected(kind):
        feat = time_stretch(feat, plan.entries[kind].strength.value, sample_rng(seed, sid, kind))
    kind = AugmentationKind.TIME_MASK
    if plan.selected(kind):
        feat = time_mask(feat, int(plan.entries[kind].strength.value), num_masks, sample_rng(seed, sid, kind))
    kind = AugmentationKind.FREQ_MASK
    if plan.selected(kind):
        feat = freq_mask(feat, int(plan.entries[kind].strength.value), num_masks, sample_rng(seed, sid, kind))
    return x, feat


def apply_plan(batch, plan: AugmentationPlan, featurizer_config: FeaturizerConfig | None = None, feature_cache=None):
    """Augment every sample of ``batch`` per ``plan``; returns features in batch order.

    ``feature_cache`` optionally maps sample id to its clean ``FeatureMatrix``.
    Labels are never changed, so only features are returned.
    """
    batch = list(batch)
    by_id = {s.id: s for s in batch}
    if set(by_id) != {sp.sample_id for sp in plan.samples}:
        raise InputError("plan was not produced for this batch")
    ids = sorted(by_id)
    plans = {sp.sample_id: sp for sp in plan.samples}
    out = []
    for sample in batch:
        sp = plans[sample.id]

        def partner_for(kind, rng, sid=sample.id):
            pid = choose_partner(sid, ids, rng)
            return None if pid is None else by_id[pid].waveform

        cached = feature_cache.get(sample.id) if feature_cache is not None else None
        _, feat = augment_sample(
            sample.waveform, sp, plan.seed, partner_for, featurizer_config,
            plan.num_masks, plan.n_cm, clean_features=cached,
        )
        out.append(feat)
    return out
