"""Training loops and the on-the-fly synthetic batch stream."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..accdoa import LABEL_FRAME_FACTOR
from ..augment import (
    ALL_PATTERNS,
    SpecAugmentConfig,
    emda_mix,
    rotate_events,
    rotate_foa,
    spec_augment,
)
from ..features import StftConfig, extract_features
from ..scene import AmbisonicClip, SceneConfig, synth_scene
from .losses import loss_bce, loss_masked_mse, loss_mse
from .model import RD3NetLite, TwoStageNet
from .optim import Adam, TrainConfig


@dataclass(frozen=True)
class AugmentOptions:
    """Which of the three augmentations the stream applies."""

    emda: bool = True
    rotate: bool = True
    specaug: bool = True
    spec_cfg: SpecAugmentConfig = field(default_factory=SpecAugmentConfig)
    max_secondaries: int = 2


class SceneBatchStream:
    """Generates (features, targets) batches from synthetic scenes.

    A pool of rendered scenes plus a bank of single-event scenes is drawn
    once at construction; each training sample then picks a pool scene,
    optionally mixes in secondaries, rotates, crops a random window of
    `input_frames` STFT frames, and masks features.  `pool_scenes=0`
    synthesizes a fresh scene per sample instead.  Batches are a pure
    function of (seed, iteration), whatever the worker count.
    """

    def __init__(
        self,
        scene_cfg: SceneConfig,
        stft_cfg: StftConfig,
        batch_size: int,
        input_frames: int,
        seed: int = 0,
        augment: AugmentOptions = AugmentOptions(),
        pool_scenes: int = 64,
        secondary_bank: int = 32,
        workers: int = 1,
    ):
        self.scene_cfg = scene_cfg
        self.stft_cfg = stft_cfg
        self.batch_size = batch_size
        self.input_frames = input_frames
        self.seed = seed
        self.augment = augment
        self.workers = max(1, workers)
        total_samples = scene_cfg.n_label_frames * (scene_cfg.sample_rate // 10)
        if stft_cfg.n_frames(total_samples) < input_frames:
            raise ValueError("scene too short for the requested input_frames")

        pool_rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0)))
        self.pool = []
        for _ in range(pool_scenes):
            self.pool.append(synth_scene(scene_cfg, pool_rng))
        self._secondary_cfg = replace(scene_cfg, n_events=1, max_polyphony=1)
        self.bank = []
        if augment.emda:
            for _ in range(secondary_bank):
                self.bank.append(synth_scene(self._secondary_cfg, pool_rng))

    def _sample(self, rng: np.random.Generator):
        cfg = self.scene_cfg
        if self.pool:
            clip, events = self.pool[int(rng.integers(len(self.pool)))]
        else:
            clip, events = synth_scene(cfg, rng)
        mixed = False
        if self.augment.emda:
            n_sec = int(rng.integers(0, self.augment.max_secondaries + 1))
            if n_sec:
                if self.bank:
                    secs = [self.bank[int(rng.integers(len(self.bank)))] for _ in range(n_sec)]
                else:
                    secs = [synth_scene(self._secondary_cfg, rng) for _ in range(n_sec)]
                clip, events = emda_mix((clip, events), secs, rng)
                mixed = True
        if self.pool and not mixed:
            clip = clip.copy()
        if self.augment.rotate:
            r = ALL_PATTERNS[int(rng.integers(len(ALL_PATTERNS)))]
            clip = rotate_foa(clip, r)
            events = rotate_events(events, r)

        stft_cfg = self.stft_cfg
        total_frames = stft_cfg.n_frames(clip.n_samples)
        t0 = int(rng.integers(0, total_frames - self.input_frames + 1))
        span = stft_cfg.frame_span(self.input_frames)
        cropped = AmbisonicClip(
            clip.samples[:, t0 * stft_cfg.hop: t0 * stft_cfg.hop + span], clip.sample_rate
        )
        fs = extract_features(cropped, stft_cfg)
        if self.augment.specaug:
            fs = spec_augment(fs, self.augment.spec_cfg, rng)

        n_t = self.input_frames
        activity = np.zeros((n_t, cfg.n_classes), dtype=np.float32)
        doa = np.zeros((n_t, cfg.n_classes, 3), dtype=np.float32)
        for ev in events.events:
            lo = max(ev.onset * LABEL_FRAME_FACTOR, t0)
            hi = min(ev.offset * LABEL_FRAME_FACTOR, t0 + n_t)
            for g in range(lo, hi):
                t = g - t0
                activity[t, ev.class_id] = 1.0
                doa[t, ev.class_id] = ev.trajectory[g // LABEL_FRAME_FACTOR - ev.onset].unit_vec
        return fs.data.astype(np.float32), activity, doa

    def batch(self, iteration: int) -> dict:
        ss = np.random.SeedSequence(entropy=(self.seed, 1, iteration))
        rngs = [np.random.default_rng(c) for c in ss.spawn(self.batch_size)]
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                samples = list(pool.map(self._sample, rngs))
        else:
            samples = [self._sample(rng) for rng in rngs]
        x = np.stack([s[0] for s in samples])
        activity = np.stack([s[1] for s in samples])
        doa = np.stack([s[2] for s in samples])
        return {"x": x, "activity": activity, "doa": doa, "accdoa": doa}


def _run_phase(model_fwd, model_bwd, params, grads_fn, loss_fn, stream, cfg, iters,
               start_iter, phase, log, log_every):
    adam = Adam(params, cfg)
    acc, cnt = 0.0, 0
    for it in range(iters):
        batch = stream.batch(start_iter + it)
        value, dpred = loss_fn(batch, model_fwd(batch["x"]))
        model_bwd(dpred)
        adam.step(grads_fn(), it)
        acc += value
        cnt += 1
        if (it + 1) % log_every == 0 or it + 1 == iters:
            if cnt:
                log.append((start_iter + it + 1, acc / cnt, phase))
            acc, cnt = 0.0, 0


def train_single_stage(
    model: RD3NetLite,
    stream: SceneBatchStream,
    cfg: TrainConfig,
    iters: int,
    log_every: int = 100,
):
    """Minimize MSE between predicted and target DOA vector sequences.

    Returns the loss log as (iteration, mean loss over the window, phase)
    tuples, one row per `log_every` iterations.
    """
    log: list = []

    def loss_fn(batch, pred):
        return loss_mse(pred, batch["accdoa"])

    def bwd(dpred):
        model.zero_grad()
        model.backward(dpred)

    _run_phase(
        model.forward, bwd, dict(model.named_parameters()),
        lambda: dict(model.named_grads()), loss_fn, stream, cfg, iters, 0, "accdoa",
        log, log_every,
    )
    return log


def train_two_stage(
    model: TwoStageNet,
    stream: SceneBatchStream,
    cfg: TrainConfig,
    iters_sed: int,
    iters_doa: int,
    log_every: int = 100,
):
    """Detection first, then localization with the detection trunk copied over.

    Phase 1 trains the detection branch with binary cross entropy.  Its
    trunk is then copied into the localization branch, which phase 2 trains
    with activity-masked MSE while every detection parameter stays frozen.
    """
    log: list = []

    def sed_loss(batch, pred):
        return loss_bce(pred, batch["activity"])

    def sed_bwd(dpred):
        model.zero_grad()
        model.sed.backward(dpred)

    _run_phase(
        model.forward_sed, sed_bwd, dict(model.sed.named_parameters(prefix="sed.")),
        lambda: dict(model.sed.named_grads(prefix="sed.")), sed_loss, stream, cfg,
        iters_sed, 0, "sed", log, log_every,
    )

    model.copy_trunk_to_doa()

    def doa_loss(batch, pred):
        return loss_masked_mse(pred, batch["doa"], batch["activity"])

    def doa_bwd(dpred):
        model.zero_grad()
        model.doa.backward(dpred)

    _run_phase(
        model.forward_doa, doa_bwd, dict(model.doa.named_parameters(prefix="doa.")),
        lambda: dict(model.doa.named_grads(prefix="doa.")), doa_loss, stream, cfg,
        iters_doa, iters_sed, "doa", log, log_every,
    )
    return log
