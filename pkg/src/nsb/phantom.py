"""Synthetic phantom MRI slices with exactly known ground truth.

Each phantom is a noisy bright ellipse-ish "brain" disc on a dark
background with one embedded bright tumor. Meningioma-class tumors are
near-circular with a narrow intensity ramp at the rim and sit near the
brain periphery; glioma-class tumors are irregular radial blobs (low-order
Fourier perturbation) with a wide, diffuse rim and sit more centrally.
The mask marks the geometric tumor region; the intensity ramp descends
just inside the mask boundary so the maximum-gradient ring lies on or
slightly inside the tight box.

Everything below is a pure function of its spec (see nsb.rng), so
datasets rebuild bit-identically from a seed.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nsb.boxes import BBox, tight_bbox
from nsb.cnn import TumorClass
from nsb.imagecore import GrayImage, read_image, round_half_up_u8, write_image
from nsb.rng import DeterministicRng
from nsb.segmenter import image_to_mask, mask_to_image

MANIFEST_VERSION = "nsb-dataset/1"
MANIFEST_NAME = "manifest.tsv"

BACKGROUND_LEVEL = 18.0
TISSUE_LEVEL = 95.0
TUMOR_PEAK = 205.0
BRAIN_EDGE_WIDTH = 12.0   # px at size 512; scales with image size
MENINGIOMA_RIM = 5.0      # full ramp width at size 512
GLIOMA_RIM = 14.0


class DegeneratePhantomError(ValueError):
    """Spec asks for a tumor that cannot fit inside the brain disc."""


TUMOR_SCALE_BAND = (0.07, 0.13)  # dataset sampling range, see build_dataset


@dataclass(frozen=True)
class PhantomSpec:
    seed: int
    class_label: TumorClass
    image_size: int = 512
    tumor_scale: float = 0.10  # tumor diameter as a fraction of image width
    noise_sigma: float = 6.0

    def __post_init__(self):
        if not 0.05 < self.tumor_scale < 0.4:
            raise ValueError(f"tumor_scale {self.tumor_scale} outside (0.05, 0.4)")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.image_size < 32:
            raise ValueError("image_size too small to hold a brain disc")


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def generate_phantom(spec: PhantomSpec) -> tuple[GrayImage, np.ndarray, BBox]:
    """One phantom: (image, tumor mask, tight bounding box of the mask)."""
    s = spec.image_size
    scale = s / 512.0
    rng = DeterministicRng(spec.seed).derive(0x9A, spec.class_label.index)

    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64) + 0.5

    # brain disc with a soft rim
    jitter = rng.uniform(2, -0.02, 0.02) * s
    bcx, bcy = s / 2.0 + jitter[0], s / 2.0 + jitter[1]
    brain_r = 0.40 * s * (1.0 + rng.uniform(1, -0.05, 0.05)[0])
    brain_dist = np.hypot(xx - bcx, yy - bcy)
    edge_w = BRAIN_EDGE_WIDTH * scale
    brain = _smoothstep((brain_r - brain_dist) / edge_w)

    # slow intensity texture inside the tissue
    tex_amp = 8.0
    phase = rng.uniform(2, 0.0, 2.0 * math.pi)
    freq = rng.uniform(2, 0.8, 1.6) / s
    texture = tex_amp * (
        np.cos(2.0 * math.pi * freq[0] * xx + phase[0])
        * np.cos(2.0 * math.pi * freq[1] * yy + phase[1])
    )

    # tumor geometry: radius profile r(theta) around a center inside the brain
    r0 = spec.tumor_scale * s / 2.0
    if spec.class_label is TumorClass.MENINGIOMA:
        harmonics = (2, 3)
        amps = rng.uniform(len(harmonics), 0.01, 0.04)
        rim = MENINGIOMA_RIM * scale
        offset_lo, offset_hi = 0.75, 0.92
    else:
        harmonics = (2, 3, 4, 5)
        amps = rng.uniform(len(harmonics), 0.05, 0.12)
        rim = GLIOMA_RIM * scale
        offset_lo, offset_hi = 0.0, 0.55
    phases = rng.uniform(len(harmonics), 0.0, 2.0 * math.pi)
    r_max = r0 * (1.0 + amps.sum())
    margin = 8.0 * scale
    reach = brain_r - r_max - margin
    if reach <= 0:
        raise DegeneratePhantomError(
            f"tumor radius {r_max:.1f} cannot fit inside brain radius {brain_r:.1f}"
        )
    offset = reach * rng.uniform(1, offset_lo, offset_hi)[0]
    angle = rng.uniform(1, 0.0, 2.0 * math.pi)[0]
    tcx = bcx + offset * math.cos(angle)
    tcy = bcy + offset * math.sin(angle)

    rho = np.hypot(xx - tcx, yy - tcy)
    theta = np.arctan2(yy - tcy, xx - tcx)
    r_theta = np.full_like(rho, r0)
    for k, amp, ph in zip(harmonics, amps, phases):
        r_theta += r0 * amp * np.cos(k * theta + ph)

    mask = rho <= r_theta
    if not mask.any():
        raise DegeneratePhantomError("tumor region rasterized to zero pixels")
    # ramp from full brightness at (r - rim) down to tissue level at r
    tumor_g = np.clip((r_theta - rho) / rim, 0.0, 1.0)

    clean = (
        BACKGROUND_LEVEL
        + (TISSUE_LEVEL - BACKGROUND_LEVEL + texture) * brain
        + (TUMOR_PEAK - TISSUE_LEVEL) * tumor_g * brain
    )
    noisy = clean + rng.normal(s * s, spec.noise_sigma).reshape(s, s)
    img = GrayImage(round_half_up_u8(noisy))
    return img, mask, tight_bbox(mask)


# ----------------------------------------------------------------- dataset


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str  # relative to the manifest directory
    mask_path: str
    class_label: TumorClass
    box: BBox


@dataclass(frozen=True)
class DatasetManifest:
    version: str
    base_dir: Path
    entries: tuple[ManifestEntry, ...]

    def abspath(self, rel: str) -> Path:
        return self.base_dir / rel


def save_manifest(manifest: DatasetManifest, path) -> None:
    lines = [manifest.version]
    for e in manifest.entries:
        box = e.box
        lines.append("\t".join([
            e.image_path, e.mask_path, e.class_label.value,
            f"{box.x_min:.9g}", f"{box.y_min:.9g}",
            f"{box.x_max:.9g}", f"{box.y_max:.9g}",
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path) -> DatasetManifest:
    """Parse and validate a manifest; every referenced file must exist."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != MANIFEST_VERSION:
        head = lines[0] if lines else "<empty>"
        raise ValueError(f"{path}: unsupported manifest version {head!r}")
    base = path.parent
    entries = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 7:
            raise ValueError(f"{path}:{ln}: expected 7 tab-separated fields")
        img_rel, mask_rel, cls, *coords = fields
        for rel in (img_rel, mask_rel):
            if not (base / rel).exists():
                raise FileNotFoundError(f"{path}:{ln}: missing file {rel}")
        entries.append(ManifestEntry(
            image_path=img_rel,
            mask_path=mask_rel,
            class_label=TumorClass(cls),
            box=BBox(*(float(c) for c in coords)),
        ))
    return DatasetManifest(MANIFEST_VERSION, base, tuple(entries))


def build_dataset(
    n_per_class: int,
    seed: int,
    out_dir,
    image_size: int = 512,
    noise_sigma: float = 6.0,
) -> DatasetManifest:
    """Generate and write n_per_class phantoms per class plus the manifest.

    Per-phantom seeds and tumor scales derive from the master seed, so the
    whole directory tree is a pure function of the arguments. Tumor scales
    are sampled from TUMOR_SCALE_BAND: sized so the tumor fits inside the
    localizer backbone's receptive field at the working resolution, which
    is what makes anchor scoring a learnable task.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be at least 1")
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    master = DeterministicRng(seed)
    entries = []
    for cls in (TumorClass.MENINGIOMA, TumorClass.GLIOMA):
        for i in range(n_per_class):
            srng = master.derive(0xDA, cls.index, i)
            spec = PhantomSpec(
                seed=srng.next_u64(),
                class_label=cls,
                image_size=image_size,
                tumor_scale=float(srng.uniform(1, *TUMOR_SCALE_BAND)[0]),
                noise_sigma=noise_sigma,
            )
            img, mask, box = generate_phantom(spec)
            img_rel = f"img_{cls.value}_{i:04d}.pgm"
            mask_rel = f"mask_{cls.value}_{i:04d}.pgm"
            write_image(img, out / img_rel)
            write_image(mask_to_image(mask), out / mask_rel)
            entries.append(ManifestEntry(img_rel, mask_rel, cls, box))
    manifest = DatasetManifest(MANIFEST_VERSION, out, tuple(entries))
    save_manifest(manifest, out / MANIFEST_NAME)
    return manifest


def load_entry_mask(manifest: DatasetManifest, entry: ManifestEntry) -> np.ndarray:
    return image_to_mask(read_image(manifest.abspath(entry.mask_path)))


def kfold_split(
    manifest: DatasetManifest, k: int, seed: int
) -> list[tuple[list[ManifestEntry], list[ManifestEntry]]]:
    """Stratified k-fold partition, deterministic given the seed.

    Entries of each class are shuffled once and dealt round-robin to the
    folds; fold i's test set is its share, the train set is everything
    else. Every entry lands in exactly one test set.
    """
    entries = manifest.entries
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > len(entries):
        raise ValueError(f"k={k} exceeds the {len(entries)} manifest entries")
    rng = DeterministicRng(seed).derive(0xF0, k)
    fold_of = {}
    for cls in (TumorClass.MENINGIOMA, TumorClass.GLIOMA):
        idx = [i for i, e in enumerate(entries) if e.class_label is cls]
        order = rng.shuffle(idx)
        for pos, entry_idx in enumerate(order):
            fold_of[entry_idx] = pos % k
    folds = []
    for f in range(k):
        test = [e for i, e in enumerate(entries) if fold_of[i] == f]
        train = [e for i, e in enumerate(entries) if fold_of[i] != f]
        folds.append((train, test))
    return folds
