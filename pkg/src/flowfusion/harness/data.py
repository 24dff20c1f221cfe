"""Synthetic text/video classification data with planted class motifs.

Each class owns a token motif and a frame motif vector. A sample's video gets
its class's frame motif added to ``motif_frames`` consecutive frames at a
random offset, plus Gaussian noise of scale ``noise_sigma``. Its text
carries the class token motif with probability ``text_signal``; otherwise
the text is pure background tokens. Sentiment is encoded by the sign (or,
for more than two sentiments, the bin) of an amplitude on frame channel 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MOTIF_TOKENS = 2


@dataclass
class SyntheticDatasetConfig:
    num_samples: int = 1000
    num_classes: int = 4
    num_sentiments: int = 2
    text_len: int = 16
    video_len: int = 16
    raw_dim: int = 8
    vocab_size: int = 64
    noise_sigma: float = 1.0
    motif_strength: float = 2.0
    motif_frames: int = 3
    text_signal: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2 or self.num_sentiments < 2:
            raise ValueError("need at least 2 classes and 2 sentiments")
        if self.noise_sigma < 0 or self.motif_strength <= 0:
            raise ValueError("noise_sigma must be >= 0 and motif_strength > 0")
        if not 0.0 <= self.text_signal <= 1.0:
            raise ValueError("text_signal is a probability")
        if self.raw_dim < 2:
            raise ValueError("raw_dim must be >= 2 (channel 0 carries sentiment)")
        if not 1 <= self.motif_frames <= self.video_len:
            raise ValueError("motif_frames must fit inside the video")
        if self.text_len < MOTIF_TOKENS:
            raise ValueError(f"text_len must be >= {MOTIF_TOKENS}")
        if self.vocab_size <= MOTIF_TOKENS * self.num_classes:
            raise ValueError("vocabulary too small for the class motifs")


@dataclass
class Dataset:
    tokens: np.ndarray  # (N, S) int64
    frames: np.ndarray  # (N, M, raw_dim)
    classes: np.ndarray  # (N,)
    sentiments: np.ndarray  # (N,)
    frame_motifs: np.ndarray  # (C, raw_dim)
    token_motifs: np.ndarray  # (C, MOTIF_TOKENS)

    def __len__(self) -> int:
        return len(self.classes)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.tokens[idx], self.frames[idx], self.classes[idx], self.sentiments[idx],
                       self.frame_motifs, self.token_motifs)

    def split(self, val_fraction: float) -> tuple["Dataset", "Dataset"]:
        """Deterministic stratified split: the last share of each class is held out."""
        val = []
        for c in np.unique(self.classes):
            members = np.flatnonzero(self.classes == c)
            k = int(round(len(members) * val_fraction))
            val.extend(members[len(members) - k:])
        mask = np.zeros(len(self), dtype=bool)
        mask[val] = True
        return self.subset(np.flatnonzero(~mask)), self.subset(np.flatnonzero(mask))

    def with_labels(self, classes) -> "Dataset":
        return Dataset(self.tokens, self.frames, np.asarray(classes), self.sentiments,
                       self.frame_motifs, self.token_motifs)

    def to_bytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(a).tobytes() for a in
                        (self.tokens, self.frames, self.classes, self.sentiments))


def generate_dataset(cfg: SyntheticDatasetConfig) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    C, N = cfg.num_classes, cfg.num_samples

    motifs = rng.normal(size=(C, cfg.raw_dim))
    motifs[:, 0] = 0.0  # channel 0 is reserved for sentiment
    motifs *= cfg.motif_strength / np.linalg.norm(motifs, axis=1, keepdims=True)
    token_motifs = np.arange(C * MOTIF_TOKENS).reshape(C, MOTIF_TOKENS)
    background = np.arange(C * MOTIF_TOKENS, cfg.vocab_size)

    classes = rng.permutation(np.arange(N) % C)
    amplitude = rng.uniform(-1.0, 1.0, size=N)
    sentiments = np.minimum(((amplitude + 1.0) / 2.0 * cfg.num_sentiments).astype(int),
                            cfg.num_sentiments - 1)

    tokens = rng.choice(background, size=(N, cfg.text_len))
    carries_text = rng.random(N) < cfg.text_signal
    text_offsets = rng.integers(0, cfg.text_len - MOTIF_TOKENS + 1, size=N)
    for i in np.flatnonzero(carries_text):
        o = text_offsets[i]
        tokens[i, o:o + MOTIF_TOKENS] = token_motifs[classes[i]]

    frames = cfg.noise_sigma * rng.normal(size=(N, cfg.video_len, cfg.raw_dim))
    frames[:, :, 0] += amplitude[:, None]
    offsets = rng.integers(0, cfg.video_len - cfg.motif_frames + 1, size=N)
    for i in range(N):
        frames[i, offsets[i]:offsets[i] + cfg.motif_frames] += motifs[classes[i]]

    return Dataset(tokens.astype(np.int64), frames, classes.astype(np.int64),
                   sentiments.astype(np.int64), motifs, token_motifs)


def nearest_motif_predict(data: Dataset, motif_frames: int) -> np.ndarray:
    """Reference classifier: best window-averaged match against each frame motif."""
    M = data.frames.shape[1]
    kernel = np.ones(motif_frames) / motif_frames
    scores = data.frames @ data.frame_motifs.T  # (N, M, C)
    windows = np.stack([
        np.stack([np.convolve(scores[i, :, c], kernel, mode="valid") for c in range(scores.shape[2])], -1)
        for i in range(len(data))
    ]) if M >= motif_frames else scores
    return windows.max(axis=1).argmax(axis=1)
