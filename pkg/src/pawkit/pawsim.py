"""Deterministic synthetic-data oracle standing in for the physical rig.

Two generators, both pure functions of (inputs, seed):

* ``render_sole`` draws the sole's triangular dot pattern under a 3-D
  contact force: the contact center shifts with the tangential force, dots
  are pushed radially outward with an amplitude growing as Fz^(2/3) under a
  Gaussian footprint, and dot radii grow with local compression.  A
  vignette whose center tilts with the paw orientation plus seeded pixel
  noise complete the frame.
* ``synth_impact`` produces one-second terrain-impact clips: an ambient
  noise floor plus a single impact event built from exponentially decaying
  narrowband tone stacks, with an extra burst train (crackle) for the
  granular classes.  Class parameters are tuned for MFCC separability, not
  acoustic realism.

Dataset writers emit PGM images / WAV clips, CSV labels and a JSON
manifest; reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dsp import SAMPLE_RATE, AudioClip, write_wav, read_wav
from .errors import ConfigError, GenerationError, ValidationError
from .imaging import CAMERA_HEIGHT, CAMERA_WIDTH, GrayImage, read_pgm, write_pgm

TERRAIN_CLASSES = ("gravel", "concrete", "leaves", "snow", "sand", "grass")
_CLASS_INDEX = {name: i for i, name in enumerate(TERRAIN_CLASSES)}

FORCE_MIN = (-66.0, -92.0, 2.0)
FORCE_MAX = (75.0, 80.0, 133.0)
ROLL_RANGE = 50.0
PITCH_RANGE = 40.0
YAW_RANGE = 180.0

DEFAULT_CLIPS_PER_CLASS = 47
AMBIENT_STD = 0.01  # -40 dBFS noise floor


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    image_width: int = CAMERA_WIDTH
    image_height: int = CAMERA_HEIGHT
    dot_pitch: float = 14.0
    dot_radius: float = 3.0
    normal_gain: float = 0.35  # px of radial push per N^(2/3)
    shear_gain: float = 0.24  # px of contact offset per N
    footprint_sigma: float = 42.0  # px, Gaussian falloff of the contact
    dot_growth: float = 0.028  # relative radius growth per N^(2/3)
    vignette_strength: float = 0.18
    vignette_tilt: float = 0.25  # px of vignette shift per degree of tilt
    pixel_noise: float = 2.0  # stddev in 8-bit intensity units
    force_min: tuple[float, float, float] = FORCE_MIN
    force_max: tuple[float, float, float] = FORCE_MAX
    roll_range: float = ROLL_RANGE
    pitch_range: float = PITCH_RANGE
    yaw_range: float = YAW_RANGE
    background: int = 235
    ink: int = 25

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if any(lo >= hi for lo, hi in zip(self.force_min, self.force_max)):
            raise ConfigError("force_min must be below force_max on every axis")
        if self.force_min[2] <= 0:
            raise ConfigError("Fz range must be strictly positive (contact exists)")
        if self.dot_pitch <= 2 * self.dot_radius:
            raise ConfigError("dot_pitch must exceed the dot diameter")
        if self.lattice_inset() > min(self.image_width, self.image_height) / 4:
            raise ConfigError("deformation gains would push dots out of the frame")

    def lattice_inset(self) -> float:
        """Border margin guaranteeing deformed dots stay inside the frame."""
        fz_scale = self.force_max[2] ** (2.0 / 3.0)
        max_push = self.normal_gain * fz_scale
        max_radius = self.dot_radius * (1.0 + self.dot_growth * fz_scale)
        return max_push + max_radius + 2.0


@dataclass
class ForceSample:
    image: GrayImage
    force_N: np.ndarray  # (Fx, Fy, Fz), paw frame
    orientation_deg: np.ndarray  # (roll, pitch, yaw)


@dataclass
class TerrainSample:
    clip: AudioClip
    label: str


@dataclass(frozen=True)
class _Acoustics:
    center_hz: float
    bandwidth_hz: float
    decay_ms: float
    bursts: int = 0  # crackle events for granular ground
    burst_decay_ms: float = 3.0
    tones: int = 8


_TERRAIN_ACOUSTICS = {
    "gravel": _Acoustics(center_hz=3100.0, bandwidth_hz=900.0, decay_ms=22.0, bursts=14),
    "concrete": _Acoustics(center_hz=5400.0, bandwidth_hz=500.0, decay_ms=7.0),
    "leaves": _Acoustics(center_hz=1700.0, bandwidth_hz=420.0, decay_ms=30.0,
                         bursts=25, burst_decay_ms=2.5),
    "snow": _Acoustics(center_hz=420.0, bandwidth_hz=220.0, decay_ms=28.0),
    "sand": _Acoustics(center_hz=2100.0, bandwidth_hz=450.0, decay_ms=16.0,
                       bursts=40, burst_decay_ms=1.5),
    "grass": _Acoustics(center_hz=800.0, bandwidth_hz=280.0, decay_ms=60.0),
}


def _as_entropy(seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def _float_entropy(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64).view(np.uint64)


def _check_force(force, config: SimConfig) -> np.ndarray:
    force = np.asarray(force, dtype=np.float64)
    if force.shape != (3,):
        raise ValidationError("force must have exactly (Fx, Fy, Fz)")
    if not np.all(np.isfinite(force)):
        raise GenerationError("force components must be finite")
    if force[2] <= 0:
        raise GenerationError(f"Fz must be positive, got {force[2]}")
    lo = np.asarray(config.force_min)
    hi = np.asarray(config.force_max)
    if np.any(force < lo) or np.any(force > hi):
        raise GenerationError(
            f"force {force.tolist()} outside configured ranges "
            f"{list(zip(config.force_min, config.force_max))}"
        )
    return force


def _lattice(config: SimConfig) -> np.ndarray:
    """Dot centers of a triangular lattice, mirror-symmetric about the
    vertical centerline; shape (n_dots, 2) as (x, y)."""
    w, h = config.image_width, config.image_height
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    inset = config.lattice_inset()
    pitch = config.dot_pitch
    row_pitch = pitch * np.sqrt(3.0) / 2.0
    max_i = int((h / 2.0) / row_pitch) + 1
    max_j = int((w / 2.0) / pitch) + 1
    dots = []
    for i in range(-max_i, max_i + 1):
        y = cy + i * row_pitch
        if not inset <= y <= h - 1 - inset:
            continue
        if i % 2 == 0:
            xs = [cx + j * pitch for j in range(-max_j, max_j + 1)]
        else:
            xs = [cx + (j + 0.5) * pitch for j in range(-max_j, max_j)]
        for x in xs:
            if inset <= x <= w - 1 - inset:
                dots.append((x, y))
    return np.asarray(dots, dtype=np.float64)


def render_sole(force_N, orientation_deg, config: SimConfig = SimConfig(),
                rng: np.random.Generator | None = None) -> GrayImage:
    """Render the deformed sole pattern for one contact state.

    Deterministic: without an explicit ``rng`` the pixel-noise stream is
    derived from (config.seed, force, orientation).
    """
    force = _check_force(force_N, config)
    orientation = np.asarray(orientation_deg, dtype=np.float64)
    if orientation.shape != (3,) or not np.all(np.isfinite(orientation)):
        raise ValidationError("orientation must be finite (roll, pitch, yaw)")
    if rng is None:
        rng = np.random.default_rng(
            np.random.SeedSequence(
                [int(config.seed), *_float_entropy(np.concatenate([force, orientation]))]
            )
        )

    w, h = config.image_width, config.image_height
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    fx, fy, fz = force
    roll, pitch, yaw = orientation
    fz_scale = fz ** (2.0 / 3.0)

    # tangential force shifts the contact center in the image plane
    contact = np.array([cx + config.shear_gain * fx, cy + config.shear_gain * fy])

    dots = _lattice(config)
    rel = dots - contact
    dist = np.hypot(rel[:, 0], rel[:, 1])
    falloff = np.exp(-(dist ** 2) / (2.0 * config.footprint_sigma ** 2))
    push = config.normal_gain * fz_scale * falloff
    direction = rel / np.maximum(dist, 1e-9)[:, None]
    centers = dots + push[:, None] * direction
    radii = config.dot_radius * (1.0 + config.dot_growth * fz_scale * falloff)

    dark = np.zeros((h, w), dtype=np.float64)
    for (px, py), r in zip(centers, radii):
        x0 = max(int(np.floor(px - r - 1.0)), 0)
        x1 = min(int(np.ceil(px + r + 2.0)), w)
        y0 = max(int(np.floor(py - r - 1.0)), 0)
        y1 = min(int(np.ceil(py + r + 2.0)), h)
        gy, gx = np.mgrid[y0:y1, x0:x1]
        d = np.hypot(gx - px, gy - py)
        cov = np.clip(r + 0.5 - d, 0.0, 1.0)
        np.maximum(dark[y0:y1, x0:x1], cov, out=dark[y0:y1, x0:x1])

    img = config.background - dark * (config.background - config.ink)

    # illumination vignette; its center tilts with the paw attitude
    cos_y, sin_y = np.cos(np.radians(yaw)), np.sin(np.radians(yaw))
    tilt = config.vignette_tilt * np.array(
        [cos_y * roll - sin_y * pitch, sin_y * roll + cos_y * pitch]
    )
    gy, gx = np.mgrid[0:h, 0:w]
    rho2 = (gx - (cx + tilt[0])) ** 2 + (gy - (cy + tilt[1])) ** 2
    rho_max2 = (w / 2.0) ** 2 + (h / 2.0) ** 2
    img = img * (1.0 - config.vignette_strength * rho2 / rho_max2)

    if config.pixel_noise > 0:
        img = img + rng.normal(0.0, config.pixel_noise, size=img.shape)
    return GrayImage(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def generate_force_dataset(n: int, config: SimConfig = SimConfig()) -> list[ForceSample]:
    """n samples with forces/orientations drawn uniformly in the configured
    ranges; per-sample seeds are spawned from the master seed."""
    if n < 1:
        raise ValidationError("need n >= 1")
    lo = np.asarray(config.force_min)
    hi = np.asarray(config.force_max)
    orient_hw = np.asarray([config.roll_range, config.pitch_range, config.yaw_range])
    samples = []
    for child in np.random.SeedSequence(config.seed).spawn(n):
        rng = np.random.default_rng(child)
        force = rng.uniform(lo, hi)
        orientation = rng.uniform(-orient_hw, orient_hw)
        image = render_sole(force, orientation, config, rng=rng)
        samples.append(ForceSample(image=image, force_N=force, orientation_deg=orientation))
    return samples


def synth_impact(label: str, seed, config: SimConfig = SimConfig()) -> TerrainSample:
    """One-second 16 kHz clip with a single seeded impact event."""
    if label not in _CLASS_INDEX:
        raise ValidationError(f"unknown terrain label {label!r}")
    acoustics = _TERRAIN_ACOUSTICS[label]
    rng = np.random.default_rng(
        np.random.SeedSequence([*_as_entropy(seed), _CLASS_INDEX[label]])
    )

    n_total = SAMPLE_RATE
    onset = int(rng.uniform(0.08, 0.70) * SAMPLE_RATE)
    tail = n_total - onset
    t = np.arange(tail) / SAMPLE_RATE

    freqs = np.clip(
        rng.normal(acoustics.center_hz, acoustics.bandwidth_hz, acoustics.tones),
        80.0, 7600.0,
    )
    phases = rng.uniform(0.0, 2.0 * np.pi, acoustics.tones)
    amps = rng.uniform(0.5, 1.0, acoustics.tones)
    amps /= amps.sum()
    body = (amps[:, None] * np.sin(2.0 * np.pi * freqs[:, None] * t + phases[:, None])).sum(axis=0)
    impact = body * np.exp(-t / (acoustics.decay_ms / 1000.0))

    for _ in range(acoustics.bursts):
        offset = int(rng.uniform(0.0, 0.045) * SAMPLE_RATE)
        f_b = np.clip(rng.normal(acoustics.center_hz * 1.35, acoustics.bandwidth_hz), 80.0, 7600.0)
        phase_b = rng.uniform(0.0, 2.0 * np.pi)
        amp_b = rng.uniform(0.3, 1.0)
        tau = acoustics.burst_decay_ms / 1000.0
        length = min(int(6.0 * tau * SAMPLE_RATE), tail - offset)
        if length <= 0:
            continue
        tt = np.arange(length) / SAMPLE_RATE
        impact[offset:offset + length] += (
            amp_b * np.sin(2.0 * np.pi * f_b * tt + phase_b) * np.exp(-tt / tau)
        )

    peak_target = rng.uniform(0.35, 0.60)
    impact *= peak_target / max(np.max(np.abs(impact)), 1e-12)

    x = rng.normal(0.0, AMBIENT_STD, n_total)
    x[onset:] += impact
    pcm = np.rint(np.clip(x, -0.999, 0.999) * 32767.0).astype(np.int16)
    return TerrainSample(clip=AudioClip(pcm), label=label)


def generate_terrain_dataset(clips_per_class: int = DEFAULT_CLIPS_PER_CLASS,
                             seed: int = 0,
                             config: SimConfig = SimConfig()) -> list[TerrainSample]:
    """clips_per_class impacts for each of the six classes, class-major
    order, per-clip seeds derived from the master seed."""
    if clips_per_class < 1:
        raise ValidationError("need clips_per_class >= 1")
    samples = []
    for ci, label in enumerate(TERRAIN_CLASSES):
        for j in range(clips_per_class):
            samples.append(synth_impact(label, [seed, ci, j], config))
    return samples


# ---------------------------------------------------------------------------
# dataset directories: manifest.json + PGM/WAV payloads + labels.csv

def _write_manifest(out_dir: Path, payload: dict):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    (out_dir / "manifest.json").write_text(text)


def write_force_dataset(samples: list[ForceSample], out_dir, config: SimConfig):
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    with open(out_dir / "labels.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["index", "fx", "fy", "fz", "roll", "pitch", "yaw"])
        for i, s in enumerate(samples):
            write_pgm(out_dir / "images" / f"img_{i:05d}.pgm", s.image)
            writer.writerow([i] + [f"{v:.6f}" for v in (*s.force_N, *s.orientation_deg)])
    _write_manifest(out_dir, {
        "kind": "force",
        "count": len(samples),
        "seed": config.seed,
        "config": asdict(config),
    })


def read_force_dataset(path) -> list[ForceSample]:
    path = Path(path)
    samples = []
    with open(path / "labels.csv", newline="") as f:
        for row in csv.DictReader(f):
            image = read_pgm(path / "images" / f"img_{int(row['index']):05d}.pgm")
            force = np.array([float(row["fx"]), float(row["fy"]), float(row["fz"])])
            orient = np.array([float(row["roll"]), float(row["pitch"]), float(row["yaw"])])
            samples.append(ForceSample(image=image, force_N=force, orientation_deg=orient))
    return samples


def write_terrain_dataset(samples: list[TerrainSample], out_dir, config: SimConfig,
                          seed: int, clips_per_class: int):
    out_dir = Path(out_dir)
    (out_dir / "clips").mkdir(parents=True, exist_ok=True)
    with open(out_dir / "labels.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["index", "terrain"])
        for i, s in enumerate(samples):
            write_wav(out_dir / "clips" / f"clip_{i:05d}.wav", s.clip)
            writer.writerow([i, s.label])
    _write_manifest(out_dir, {
        "kind": "terrain",
        "count": len(samples),
        "clips_per_class": clips_per_class,
        "classes": list(TERRAIN_CLASSES),
        "seed": seed,
        "config": asdict(config),
    })


def read_terrain_dataset(path) -> list[TerrainSample]:
    path = Path(path)
    samples = []
    with open(path / "labels.csv", newline="") as f:
        for row in csv.DictReader(f):
            clip = read_wav(path / "clips" / f"clip_{int(row['index']):05d}.wav")
            samples.append(TerrainSample(clip=clip, label=row["terrain"]))
    return samples
