"""Grid types and volume file I/O for Circle-of-Willis label maps.

Arrays are always held in (z, y, x) order. NIfTI stores (i, j, k) = (x, y, z),
so readers transpose on load and writers transpose back; the affine is kept
in its native NIfTI (i, j, k) sense and carried through untouched.
"""

from __future__ import annotations

import enum
import gzip
import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np


class ValidationError(ValueError):
    """Input data violates a structural contract such as shape or class ids."""


class VolumeIOError(OSError):
    """A volume file exists but cannot be decoded."""


class CowClass(enum.IntEnum):
    BA = 1
    R_PCA = 2
    L_PCA = 3
    R_ICA = 4
    R_MCA = 5
    L_ICA = 6
    L_MCA = 7
    R_PCOM = 8
    L_PCOM = 9
    ACOM = 10
    R_ACA = 11
    L_ACA = 12
    THIRD_A2 = 13

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, name: str | int | "CowClass") -> "CowClass":
        """Accept 'L-Pcom', 'L_PCOM', 'l-pcom' or a default integer id."""
        if isinstance(name, CowClass):
            return name
        if isinstance(name, (int, np.integer)):
            return cls(int(name))
        key = str(name).strip()
        for member in cls:
            if key.lower() in (member.label.lower(), member.name.lower()):
                return member
        raise ValueError(f"unknown CoW class {name!r}")


_LABELS = {
    CowClass.BA: "BA",
    CowClass.R_PCA: "R-PCA",
    CowClass.L_PCA: "L-PCA",
    CowClass.R_ICA: "R-ICA",
    CowClass.R_MCA: "R-MCA",
    CowClass.L_ICA: "L-ICA",
    CowClass.L_MCA: "L-MCA",
    CowClass.R_PCOM: "R-Pcom",
    CowClass.L_PCOM: "L-Pcom",
    CowClass.ACOM: "Acom",
    CowClass.R_ACA: "R-ACA",
    CowClass.L_ACA: "L-ACA",
    CowClass.THIRD_A2: "3rd-A2",
}

BACKGROUND = 0
N_CHANNELS = len(CowClass) + 1


@dataclass(frozen=True)
class ClassMap:
    """Numeric id used on disk for each CowClass.

    Probability volumes are indexed by channel, not by id: channel 0 is
    background and channel k holds the class whose enum value is k,
    regardless of the map.
    """

    ids: Mapping[CowClass, int] = field(default_factory=lambda: {c: int(c) for c in CowClass})

    def __post_init__(self):
        if set(self.ids) != set(CowClass):
            missing = sorted(c.label for c in set(CowClass) - set(self.ids))
            raise ValidationError(f"class map missing classes: {missing}")
        values = list(self.ids.values())
        if len(set(values)) != len(values) or any(v == BACKGROUND for v in values):
            raise ValidationError("class ids must be distinct and nonzero")

    def id_of(self, c: CowClass | str | int) -> int:
        return self.ids[CowClass.parse(c)]

    def valid_ids(self) -> np.ndarray:
        return np.array(sorted({BACKGROUND, *self.ids.values()}))

    def ordered(self) -> list[CowClass]:
        """Classes sorted by their mapped id."""
        return sorted(CowClass, key=lambda c: self.ids[c])

    @classmethod
    def from_dict(cls, payload: Mapping[str, int]) -> "ClassMap":
        return cls({CowClass.parse(k): int(v) for k, v in payload.items()})

    @classmethod
    def from_json(cls, path: str | Path) -> "ClassMap":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict[str, int]:
        return {c.label: self.ids[c] for c in CowClass}


DEFAULT_CLASS_MAP = ClassMap()


@dataclass(frozen=True)
class Spacing:
    dz: float
    dy: float
    dx: float

    def __post_init__(self):
        for v in (self.dz, self.dy, self.dx):
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"spacing components must be positive and finite, got {self}")

    def __iter__(self):
        return iter((self.dz, self.dy, self.dx))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dz, self.dy, self.dx)

    @classmethod
    def of(cls, value) -> "Spacing":
        if isinstance(value, Spacing):
            return value
        dz, dy, dx = (float(v) for v in value)
        return cls(dz, dy, dx)


def default_affine(spacing: Spacing) -> np.ndarray:
    """Scaling-only NIfTI affine, (i, j, k) = (x, y, z)."""
    return np.diag([spacing.dx, spacing.dy, spacing.dz, 1.0])


def _frozen(array) -> np.ndarray:
    out = np.asarray(array).view()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Volume:
    """Scalar intensity grid in (z, y, x) order."""

    data: np.ndarray
    spacing: Spacing
    affine: np.ndarray | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValidationError(f"volume must be 3D, got shape {data.shape}")
        if not np.issubdtype(data.dtype, np.number) or np.issubdtype(data.dtype, np.complexfloating):
            raise ValidationError(f"unsupported datatype {data.dtype}")
        if np.issubdtype(data.dtype, np.floating) and not np.isfinite(data).all():
            raise ValidationError("volume contains NaN or Inf")
        spacing = Spacing.of(self.spacing)
        affine = default_affine(spacing) if self.affine is None else np.asarray(self.affine, dtype=float)
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "affine", _frozen(affine))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def with_data(self, data, spacing=None, affine=None):
        return type(self)(data, spacing or self.spacing, self.affine if affine is None else affine)


@dataclass(frozen=True, eq=False)
class LabelVolume(Volume):
    """Integer class-id grid; every voxel is background or a mapped class id."""

    class_map: ClassMap = DEFAULT_CLASS_MAP

    def __post_init__(self):
        data = np.asarray(self.data)
        if not np.issubdtype(data.dtype, np.integer):
            if np.issubdtype(data.dtype, np.floating) and np.all(np.isfinite(data)) and np.all(data == np.round(data)):
                data = data.astype(np.int16)
            else:
                raise ValidationError(f"label volume must hold integer data, got {data.dtype}")
        bad = np.setdiff1d(np.unique(data), self.class_map.valid_ids())
        if bad.size:
            raise ValidationError(f"invalid class id(s) {bad.tolist()} in label volume")
        object.__setattr__(self, "data", data)
        super().__post_init__()

    def with_data(self, data, spacing=None, affine=None):
        return LabelVolume(data, spacing or self.spacing, self.affine if affine is None else affine,
                           class_map=self.class_map)

    def mask(self, c: CowClass | str | int) -> np.ndarray:
        return one_hot(self, c)


@dataclass(frozen=True, eq=False)
class ProbVolume:
    """Per-class probabilities, shape (14, z, y, x); channel 0 is background."""

    data: np.ndarray
    spacing: Spacing
    affine: np.ndarray | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 4 or data.shape[0] != N_CHANNELS:
            raise ValidationError(f"probability volume must have shape ({N_CHANNELS}, z, y, x), got {data.shape}")
        if not np.isfinite(data).all() or data.min() < 0 or data.max() > 1:
            raise ValidationError("probabilities must lie in [0, 1]")
        spacing = Spacing.of(self.spacing)
        affine = default_affine(spacing) if self.affine is None else np.asarray(self.affine, dtype=float)
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "affine", _frozen(affine))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape[1:]

    def channel(self, c: CowClass | str | int) -> np.ndarray:
        return self.data[int(CowClass.parse(c))]

    @classmethod
    def from_labels(cls, lbl: LabelVolume) -> "ProbVolume":
        """Exact one-hot probabilities of a label volume."""
        data = np.zeros((N_CHANNELS, *lbl.shape))
        data[0] = lbl.data == BACKGROUND
        for c in CowClass:
            data[int(c)] = one_hot(lbl, c)
        return cls(data, lbl.spacing, lbl.affine)


def one_hot(lbl: LabelVolume, c: CowClass | str | int) -> np.ndarray:
    """Binary mask of the voxels labelled with class ``c``."""
    return lbl.data == lbl.class_map.id_of(c)


# --- file I/O -----------------------------------------------------------------

def _is_fixture(path: Path) -> bool:
    return path.suffix in (".json", ".bin")


def _fixture_paths(path: Path) -> tuple[Path, Path]:
    stem = path.with_suffix("")
    return stem.with_suffix(".json"), stem.with_suffix(".bin")


def read_array(path: str | Path) -> tuple[np.ndarray, Spacing, np.ndarray]:
    """Read raw voxels as (z, y, x) or (channel, z, y, x) plus spacing and affine."""
    path = Path(path)
    if _is_fixture(path):
        header_path, bin_path = _fixture_paths(path)
        with open(header_path, encoding="utf-8") as fh:
            header = json.load(fh)
        try:
            dtype = np.dtype(header["dtype"]).newbyteorder("<")
            shape = tuple(int(s) for s in header["shape"])
            spacing = Spacing.of(header["spacing"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed fixture header {header_path}: {exc}") from exc
        raw = np.fromfile(bin_path, dtype=dtype)
        if raw.size != math.prod(shape):
            raise ValidationError(f"fixture {bin_path} holds {raw.size} values, header expects {shape}")
        affine = np.asarray(header["affine"], dtype=float) if "affine" in header else default_affine(spacing)
        return raw.reshape(shape).astype(dtype.newbyteorder("=")), spacing, affine

    import nibabel as nib

    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        img = nib.load(str(path))
        data = np.asanyarray(img.dataobj)
    except (nib.filebasedimages.ImageFileError, EOFError, zlib.error, gzip.BadGzipFile) as exc:
        raise VolumeIOError(f"unreadable image {path}: {exc}") from exc
    zooms = img.header.get_zooms()
    if data.ndim == 3:
        data = data.transpose(2, 1, 0)
    elif data.ndim == 4:
        data = data.transpose(3, 2, 1, 0)
    else:
        raise ValidationError(f"expected a 3D or 4D image, got {data.ndim}D")
    spacing = Spacing(float(zooms[2]), float(zooms[1]), float(zooms[0]))
    return np.ascontiguousarray(data), spacing, np.asarray(img.affine, dtype=float)


def write_array(data: np.ndarray, spacing: Spacing, affine: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    data = np.asarray(data)
    if data.dtype == bool:
        data = data.astype(np.uint8)
    if _is_fixture(path):
        header_path, bin_path = _fixture_paths(path)
        header = {
            "shape": list(data.shape),
            "spacing": list(Spacing.of(spacing).as_tuple()),
            "dtype": data.dtype.newbyteorder("<").str,
            "affine": np.asarray(affine).tolist(),
        }
        data.astype(data.dtype.newbyteorder("<")).tofile(bin_path)
        header_path.write_text(json.dumps(header, indent=2), encoding="utf-8")
        return

    import nibabel as nib

    if data.ndim == 3:
        disk = data.transpose(2, 1, 0)
    elif data.ndim == 4:
        disk = data.transpose(3, 2, 1, 0)
    else:
        raise ValidationError(f"cannot write {data.ndim}D array")
    img = nib.Nifti1Image(np.ascontiguousarray(disk), np.asarray(affine, dtype=float))
    sp = Spacing.of(spacing)
    zooms = (sp.dx, sp.dy, sp.dz) + ((1.0,) if data.ndim == 4 else ())
    img.header.set_zooms(zooms)
    img.header.set_data_dtype(disk.dtype)
    nib.save(img, str(path))


def load_volume(path: str | Path, *, label: bool = False, class_map: ClassMap = DEFAULT_CLASS_MAP):
    """Load an intensity ``Volume`` or, with ``label=True``, a ``LabelVolume``.

    Supports ``.nii``/``.nii.gz`` and the raw fixture pair ``name.json`` +
    ``name.bin`` (either path may be given).
    """
    data, spacing, affine = read_array(path)
    if label:
        return LabelVolume(data, spacing, affine, class_map=class_map)
    if not np.issubdtype(data.dtype, np.floating):
        data = data.astype(np.float64)
    return Volume(data, spacing, affine)


def load_label(path: str | Path, class_map: ClassMap = DEFAULT_CLASS_MAP) -> LabelVolume:
    return load_volume(path, label=True, class_map=class_map)


def load_prob(path: str | Path) -> ProbVolume:
    data, spacing, affine = read_array(path)
    return ProbVolume(data, spacing, affine)


def save_volume(v: Volume | ProbVolume, path: str | Path) -> None:
    write_array(v.data, v.spacing, v.affine, path)
