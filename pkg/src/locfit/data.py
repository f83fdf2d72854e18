"""Fingerprint dataset ingestion, normalization, splits, and synthetic data.

Canonical CSV layout: header ``AP001,...,APnnn,X,Y,Z``, one scan per line,
RSS in dBm with +100 as the not-heard sentinel, coordinates in meters,
UTF-8 with LF line endings.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError, SchemaError

log = logging.getLogger(__name__)

NOT_HEARD = 100.0
RSS_HEARD_MIN = -110.0
RSS_HEARD_MAX = 0.0

DEFAULT_N_FLOORS = 5
DEFAULT_FLOOR_HEIGHT = 3.7
DEFAULT_RSS_MIN = -103.0
DEFAULT_RSS_MAX = 0.0


@dataclass(frozen=True)
class FingerprintRecord:
    """One scan: per-AP RSS vector plus ground truth position and floor."""

    rss: np.ndarray
    x: float
    y: float
    z: float
    floor: int


@dataclass
class FingerprintDataset:
    """Ordered fingerprint collection backed by dense arrays.

    ``rss`` is (n, n_ap) with heard values in dBm and NOT_HEARD sentinels,
    ``coords`` is (n, 3) meters, ``floors`` is (n,) indices derived from z.
    Row order is exactly file order.
    """

    rss: np.ndarray
    coords: np.ndarray
    floors: np.ndarray
    n_floors: int = DEFAULT_N_FLOORS
    floor_height: float = DEFAULT_FLOOR_HEIGHT
    role: str = "train"

    def __len__(self) -> int:
        return self.rss.shape[0]

    @property
    def n_ap(self) -> int:
        return self.rss.shape[1]

    def record(self, i: int) -> FingerprintRecord:
        x, y, z = self.coords[i]
        return FingerprintRecord(self.rss[i], float(x), float(y), float(z),
                                 int(self.floors[i]))

    @property
    def records(self) -> list[FingerprintRecord]:
        return [self.record(i) for i in range(len(self))]

    def subset(self, indices, role: str | None = None) -> "FingerprintDataset":
        idx = np.asarray(indices, dtype=int)
        return FingerprintDataset(self.rss[idx], self.coords[idx],
                                  self.floors[idx], self.n_floors,
                                  self.floor_height,
                                  self.role if role is None else role)


@dataclass
class NormalizationSpec:
    """Input/target scaling fitted on training data.

    RSS scaling maps [rss_min, rss_max] dBm to [0, 1]; coordinates are
    centered on the training mean of (x, y) and divided by a shared scale.
    The z target (3D regression only) shares the scale but is not centered.
    """

    rss_min: float = DEFAULT_RSS_MIN
    rss_max: float = DEFAULT_RSS_MAX
    coord_center: np.ndarray = field(
        default_factory=lambda: np.zeros(2, dtype=np.float64))
    coord_scale: float = 1.0

    def __post_init__(self):
        if not self.rss_min < self.rss_max:
            raise DomainError(f"rss_min {self.rss_min} must be < rss_max {self.rss_max}")
        if not self.coord_scale > 0:
            raise DomainError(f"coord_scale must be positive, got {self.coord_scale}")
        self.coord_center = np.asarray(self.coord_center, dtype=np.float64)

    def normalize_xy(self, coords: np.ndarray) -> np.ndarray:
        return (np.asarray(coords, dtype=np.float64) - self.coord_center) / self.coord_scale

    def denormalize_xy(self, targets: np.ndarray) -> np.ndarray:
        return np.asarray(targets, dtype=np.float64) * self.coord_scale + self.coord_center

    def normalize_xyz(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.float64)
        out = np.empty_like(coords)
        out[..., :2] = self.normalize_xy(coords[..., :2])
        out[..., 2] = coords[..., 2] / self.coord_scale
        return out

    def denormalize_xyz(self, targets: np.ndarray) -> np.ndarray:
        targets = np.asarray(targets, dtype=np.float64)
        out = np.empty_like(targets)
        out[..., :2] = self.denormalize_xy(targets[..., :2])
        out[..., 2] = targets[..., 2] * self.coord_scale
        return out


def z_to_floor(z: float, n_floors: int = DEFAULT_N_FLOORS,
               floor_height: float = DEFAULT_FLOOR_HEIGHT) -> int:
    """Nearest floor index for a z coordinate, clamped to [0, n_floors-1].

    Rounds half up so the mapping is deterministic for midpoints.
    """
    if not floor_height > 0:
        raise DomainError(f"floor_height must be positive, got {floor_height}")
    if not np.isfinite(z):
        raise DomainError(f"z must be finite, got {z}")
    f = int(np.floor(z / floor_height + 0.5))
    return min(max(f, 0), n_floors - 1)


def floor_to_z(floor: int, floor_height: float = DEFAULT_FLOOR_HEIGHT) -> float:
    """z coordinate of a floor index (floor multiples of the floor height)."""
    if floor < 0:
        raise DomainError(f"floor must be >= 0, got {floor}")
    return floor * floor_height


def normalize_rss(values: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    """Map RSS dBm to [0, 1]; the not-heard sentinel maps to 0."""
    v = np.asarray(values, dtype=np.float64)
    scaled = np.clip((v - spec.rss_min) / (spec.rss_max - spec.rss_min), 0.0, 1.0)
    return np.where(v == NOT_HEARD, 0.0, scaled)


def one_hot_floor(floor: int, n_floors: int) -> np.ndarray:
    """One-hot target vector for a floor index."""
    if not 0 <= floor < n_floors:
        raise DomainError(f"floor {floor} out of range [0, {n_floors})")
    out = np.zeros(n_floors, dtype=np.float64)
    out[floor] = 1.0
    return out


def one_hot_floors(floors: np.ndarray, n_floors: int) -> np.ndarray:
    """Row-wise one-hot matrix for an array of floor indices."""
    floors = np.asarray(floors, dtype=int)
    if floors.size and (floors.min() < 0 or floors.max() >= n_floors):
        raise DomainError("floor index out of range")
    out = np.zeros((len(floors), n_floors), dtype=np.float64)
    out[np.arange(len(floors)), floors] = 1.0
    return out


def normalize_coords(coords_xy: np.ndarray,
                     rss_min: float = DEFAULT_RSS_MIN,
                     rss_max: float = DEFAULT_RSS_MAX) -> tuple[np.ndarray, NormalizationSpec]:
    """Fit coordinate normalization on training (x, y) and return targets.

    Center = per-axis mean, scale = max of the population standard
    deviations (clamped at 1e-9 so degenerate sets stay finite).
    """
    coords_xy = np.asarray(coords_xy, dtype=np.float64)
    if coords_xy.ndim != 2 or coords_xy.shape[1] != 2:
        raise DomainError(f"expected (n, 2) coordinates, got {coords_xy.shape}")
    if len(coords_xy) == 0:
        raise DomainError("cannot fit coordinate normalization on empty input")
    center = coords_xy.mean(axis=0)
    scale = max(float(coords_xy.std(axis=0).max()), 1e-9)
    spec = NormalizationSpec(rss_min=rss_min, rss_max=rss_max,
                             coord_center=center, coord_scale=scale)
    return spec.normalize_xy(coords_xy), spec


def split_validation(dataset: FingerprintDataset, fraction: float,
                     seed) -> tuple[FingerprintDataset, FingerprintDataset]:
    """Seeded uniform partition into (train, validation) without replacement.

    Validation size is round(fraction * n); both parts keep file order.
    """
    if not 0 <= fraction < 1:
        raise DomainError(f"fraction must be in [0, 1), got {fraction}")
    n = len(dataset)
    n_val = int(round(fraction * n))
    perm = np.random.default_rng(seed).permutation(n)
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])
    return dataset.subset(train_idx), dataset.subset(val_idx)


def _parse_row(parts: list[str], n_ap: int, lineno: int) -> tuple[np.ndarray, float, float, float]:
    if len(parts) != n_ap + 3:
        raise ParseError(f"line {lineno}: expected {n_ap + 3} fields, got {len(parts)}")
    try:
        values = np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"line {lineno}: non-numeric field ({exc})") from None
    rss = values[:n_ap]
    heard = rss != NOT_HEARD
    if np.any(heard & ((rss < RSS_HEARD_MIN) | (rss > RSS_HEARD_MAX))):
        raise ParseError(f"line {lineno}: heard RSS outside [{RSS_HEARD_MIN:g}, "
                         f"{RSS_HEARD_MAX:g}] dBm")
    x, y, z = values[n_ap:]
    if not np.all(np.isfinite(values[n_ap:])):
        raise ParseError(f"line {lineno}: non-finite coordinate")
    return rss, x, y, z


def load_dataset(path, n_floors: int = DEFAULT_N_FLOORS,
                 floor_height: float = DEFAULT_FLOOR_HEIGHT,
                 role: str = "train") -> FingerprintDataset:
    """Load a canonical fingerprint CSV; floors are derived from z."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        columns = header.split(",")
        if len(columns) < 4 or columns[-3:] != ["X", "Y", "Z"]:
            raise SchemaError(f"{path}: header must end with X,Y,Z")
        ap_columns = columns[:-3]
        if not all(c.startswith("AP") for c in ap_columns):
            raise SchemaError(f"{path}: AP columns must be named AP...")
        n_ap = len(ap_columns)

        rss_rows, coord_rows = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            rss, x, y, z = _parse_row(line.split(","), n_ap, lineno)
            rss_rows.append(rss)
            coord_rows.append((x, y, z))

    rss = np.array(rss_rows, dtype=np.float64).reshape(len(rss_rows), n_ap)
    coords = np.array(coord_rows, dtype=np.float64).reshape(len(coord_rows), 3)
    floors = np.array([z_to_floor(z, n_floors, floor_height) for z in coords[:, 2]],
                      dtype=int)
    off_grid = np.abs(coords[:, 2] - floors * floor_height) > 0.1
    if np.any(off_grid):
        log.warning("%s: %d record(s) with z more than 0.1 m off a floor multiple",
                    path, int(off_grid.sum()))
    return FingerprintDataset(rss, coords, floors, n_floors, floor_height, role)


def _fmt_num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def save_dataset(dataset: FingerprintDataset, path) -> None:
    """Write a dataset in the canonical CSV format (LF, UTF-8)."""
    n_ap = dataset.n_ap
    header = ",".join([f"AP{i + 1:03d}" for i in range(n_ap)] + ["X", "Y", "Z"])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for i in range(len(dataset)):
            fields = [_fmt_num(v) for v in dataset.rss[i]]
            fields += [_fmt_num(v) for v in dataset.coords[i]]
            fh.write(",".join(fields) + "\n")


_SYNTH_EXTENT = (60.0, 40.0)


def _synth_records(rng, ap_xy, ap_floor, n_floors, n_records, floor_height):
    ap_z = ap_floor * floor_height + 2.5
    xy = np.round(rng.uniform((0.0, 0.0), _SYNTH_EXTENT, size=(n_records, 2)), 3)
    floors = rng.integers(0, n_floors, size=n_records)
    z = floors * floor_height

    d2 = ((xy[:, None, :] - ap_xy[None, :, :]) ** 2).sum(axis=2)
    dist = np.maximum(np.sqrt(d2 + (z[:, None] - ap_z[None, :]) ** 2), 1.0)
    floor_gap = np.abs(floors[:, None] - ap_floor[None, :])
    rss = (-30.0 - 30.0 * np.log10(dist) - 8.0 * floor_gap
           + rng.normal(0.0, 2.0, size=(n_records, len(ap_xy))))
    rss = np.clip(np.round(rss), RSS_HEARD_MIN, RSS_HEARD_MAX)
    rss = np.where(rss < -100.0, NOT_HEARD, rss)
    return rss, np.column_stack([xy, z]), floors.astype(int)


def synth_dataset(seed, n_ap: int, n_floors: int, n_records: int,
                  floor_height: float = DEFAULT_FLOOR_HEIGHT,
                  role: str = "train") -> FingerprintDataset:
    """Deterministic synthetic dataset from a log-distance path-loss model.

    APs are scattered over the floors of a 60 x 40 m building; each record
    measures integer-dBm RSS with 2 dB log-normal shadowing and an 8 dB
    penalty per floor crossed. Signals below -100 dBm become not-heard
    sentinels.
    """
    if min(n_ap, n_floors, n_records) < 1:
        raise DomainError("n_ap, n_floors, and n_records must all be >= 1")
    rng = np.random.default_rng(seed)
    ap_xy = rng.uniform((0.0, 0.0), _SYNTH_EXTENT, size=(n_ap, 2))
    ap_floor = rng.integers(0, n_floors, size=n_ap)
    rss, coords, floors = _synth_records(rng, ap_xy, ap_floor, n_floors,
                                         n_records, floor_height)
    return FingerprintDataset(rss, coords, floors, n_floors, floor_height, role)


def synth_dataset_pair(seed, n_ap: int, n_floors: int, n_train: int, n_test: int,
                       floor_height: float = DEFAULT_FLOOR_HEIGHT
                       ) -> tuple[FingerprintDataset, FingerprintDataset]:
    """Train/test datasets that share one AP constellation (one building)."""
    if min(n_ap, n_floors, n_train, n_test) < 1:
        raise DomainError("all counts must be >= 1")
    rng = np.random.default_rng(seed)
    ap_xy = rng.uniform((0.0, 0.0), _SYNTH_EXTENT, size=(n_ap, 2))
    ap_floor = rng.integers(0, n_floors, size=n_ap)
    rss, coords, floors = _synth_records(rng, ap_xy, ap_floor, n_floors,
                                         n_train + n_test, floor_height)
    train = FingerprintDataset(rss[:n_train], coords[:n_train], floors[:n_train],
                               n_floors, floor_height, "train")
    test = FingerprintDataset(rss[n_train:], coords[n_train:], floors[n_train:],
                              n_floors, floor_height, "test")
    return train, test
