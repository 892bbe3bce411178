"""Reproducible random sources.

Randomness is organized as labelled substreams of a master seed.  A
``SeedStream`` is a plain value ``(master_seed, path)``; turning it into a
generator hashes each path label into a ``SeedSequence`` spawn key, so the
draws on ``("cell:3",)`` never depend on how many draws were taken on
``("cell:7",)`` or in which order the two were created.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_key(label):
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class SeedStream:
    master_seed: int
    path: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & _MASK64)
        object.__setattr__(self, "path", tuple(str(p) for p in self.path))

    def child(self, *labels):
        return SeedStream(self.master_seed, self.path + tuple(str(x) for x in labels))

    def seed_sequence(self):
        return np.random.SeedSequence(self.master_seed,
                                      spawn_key=tuple(_label_key(p) for p in self.path))

    def generator(self):
        """A fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def __str__(self):
        return f"{self.master_seed}/" + "/".join(self.path)


def as_stream(random_state, default_label=None):
    """Coerce ``None``, an int or a SeedStream into a SeedStream."""
    if isinstance(random_state, SeedStream):
        return random_state
    if random_state is None:
        random_state = 0
    if isinstance(random_state, (int, np.integer)):
        stream = SeedStream(int(random_state))
        return stream.child(default_label) if default_label else stream
    raise TypeError(f"random_state must be an int or SeedStream, got {random_state!r}")


def sample_sphere(d, rng):
    """A point uniformly distributed on the unit sphere of R^d."""
    while True:
        g = rng.standard_normal(d)
        norm = math.sqrt(float(g @ g))
        if norm > 0.0:
            return g / norm


def sample_sphere_batch(n, d, rng):
    """``n`` independent uniform points on the unit sphere, as rows."""
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1)
    bad = norms == 0.0
    while np.any(bad):
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1)
        bad = norms == 0.0
    return g / norms[:, None]


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean observation noise.

    kind is one of ``"zero"``, ``"gaussian"`` (scale = standard deviation) or
    ``"bounded_uniform"`` (scale = half width of the support).
    """

    kind: str = "zero"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "gaussian", "bounded_uniform"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.scale >= 0:
            raise ValueError("noise scale must be non-negative")
        if self.kind == "zero":
            object.__setattr__(self, "scale", 0.0)

    @classmethod
    def zero(cls):
        return cls("zero", 0.0)

    @classmethod
    def gaussian(cls, sigma):
        return cls("gaussian", float(sigma))

    @classmethod
    def bounded_uniform(cls, half_width):
        return cls("bounded_uniform", float(half_width))

    @property
    def sub_gaussian_proxy(self):
        # a variable supported on [-h, h] is h-sub-Gaussian
        return self.scale

    def draw(self, rng):
        if self.kind == "zero" or self.scale == 0.0:
            return 0.0
        if self.kind == "gaussian":
            return self.scale * float(rng.standard_normal())
        return float(rng.uniform(-self.scale, self.scale))

    def draw_many(self, n, rng):
        if self.kind == "zero" or self.scale == 0.0:
            return np.zeros(n)
        if self.kind == "gaussian":
            return self.scale * rng.standard_normal(n)
        return rng.uniform(-self.scale, self.scale, n)

    def to_dict(self):
        if self.kind == "gaussian":
            return {"kind": "gaussian", "sigma": self.scale}
        if self.kind == "bounded_uniform":
            return {"kind": "bounded_uniform", "half_width": self.scale}
        return {"kind": "zero"}


def draw_noise(model, rng):
    return model.draw(rng)


def make_noise(spec):
    if spec is None:
        return NoiseModel.zero()
    kind = spec.get("kind", "zero")
    if kind == "gaussian":
        return NoiseModel.gaussian(spec["sigma"])
    if kind == "bounded_uniform":
        return NoiseModel.bounded_uniform(spec["half_width"])
    if kind == "zero":
        return NoiseModel.zero()
    raise ValueError(f"unknown noise kind {kind!r}")
