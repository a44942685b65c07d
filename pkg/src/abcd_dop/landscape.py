"""Moving Peaks Benchmark with cone-shaped peaks."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, replace
from typing import TextIO

import numpy as np

SEVERITY_HEIGHT = 7.0
SEVERITY_WIDTH = 1.0
DEFAULT_BOUNDS = (0.0, 100.0)

_SHORTHAND = re.compile(r"^(\d+)D-(\d+)P-(\d+(?:\.\d+)?)s$")


class LandscapeError(ValueError):
    pass


@dataclass(frozen=True)
class InstanceSpec:
    """Declarative description of one MPB instance."""

    dimensions: int = 10
    n_peaks: int = 10
    severity: float = 1.0
    lambda_: float = 0.0
    min_height: float = 30.0
    max_height: float = 70.0
    min_width: float = 1.0
    max_width: float = 12.0
    height_severity: float = SEVERITY_HEIGHT
    width_severity: float = SEVERITY_WIDTH
    change_frequency: int = 5000
    bounds: tuple[float, float] = DEFAULT_BOUNDS
    seed: int = 0

    def __post_init__(self):
        if self.dimensions < 1:
            raise LandscapeError("dimensions must be >= 1")
        if self.n_peaks < 1:
            raise LandscapeError("n_peaks must be >= 1")
        if self.change_frequency < 1:
            raise LandscapeError("change_frequency must be >= 1")
        for name in ("severity", "height_severity", "width_severity"):
            if getattr(self, name) < 0:
                raise LandscapeError(f"{name} must be >= 0")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise LandscapeError("lambda must be in [0, 1]")
        if self.min_height > self.max_height:
            raise LandscapeError("height range is empty")
        if self.min_width > self.max_width:
            raise LandscapeError("width range is empty")
        if self.min_width < 0:
            raise LandscapeError("min_width must be >= 0")
        if not self.bounds[0] < self.bounds[1]:
            raise LandscapeError("bounds must satisfy low < high")

    @property
    def instance_id(self) -> str:
        sev = f"{self.severity:g}"
        return f"{self.dimensions}D-{self.n_peaks}P-{sev}s"

    @classmethod
    def from_shorthand(cls, text: str, **overrides) -> "InstanceSpec":
        """Parse names such as ``5D-10P-1s`` (dimensions, peaks, severity)."""
        m = _SHORTHAND.match(text.strip())
        if m is None:
            raise LandscapeError(
                f"bad instance name {text!r}, expected <dims>D-<peaks>P-<severity>s"
            )
        return cls(
            dimensions=int(m.group(1)),
            n_peaks=int(m.group(2)),
            severity=float(m.group(3)),
            **overrides,
        )

    def with_seed(self, seed: int) -> "InstanceSpec":
        return replace(self, seed=seed)


@dataclass
class Peak:
    center: np.ndarray
    height: float
    width: float
    last_shift: np.ndarray


@dataclass
class LandscapeState:
    """Peaks plus change-schedule state.

    Peak data is held as parallel arrays (``centers`` is n_peaks x d) so that
    evaluation of a batch of points is a single broadcast.
    """

    centers: np.ndarray
    heights: np.ndarray
    widths: np.ndarray
    last_shifts: np.ndarray
    spec: InstanceSpec
    rng: np.random.Generator
    env_index: int = 1

    @property
    def dimensions(self) -> int:
        return self.spec.dimensions

    @property
    def n_peaks(self) -> int:
        return len(self.heights)

    @property
    def lower(self) -> float:
        return self.spec.bounds[0]

    @property
    def upper(self) -> float:
        return self.spec.bounds[1]

    @property
    def change_frequency(self) -> int:
        return self.spec.change_frequency

    @property
    def peaks(self) -> list[Peak]:
        return [
            Peak(self.centers[i].copy(), float(self.heights[i]),
                 float(self.widths[i]), self.last_shifts[i].copy())
            for i in range(self.n_peaks)
        ]

    def evaluate(self, x) -> float | np.ndarray:
        return evaluate(self, x)

    def apply_change(self) -> "LandscapeState":
        return apply_change(self)

    def global_optimum_value(self) -> float:
        return global_optimum_value(self)

    def snapshot(self) -> list[tuple]:
        """Rows ``(env, peak_id, height, width, *center)`` for the current environment."""
        return [
            (self.env_index, i, float(self.heights[i]), float(self.widths[i]),
             *map(float, self.centers[i]))
            for i in range(self.n_peaks)
        ]


def landscape_rng(seed: int) -> np.random.Generator:
    # spawn_key 0 is the landscape stream; the algorithm stream uses 1
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


def make_landscape(spec: InstanceSpec, rng: np.random.Generator | None = None) -> LandscapeState:
    rng = landscape_rng(spec.seed) if rng is None else rng
    lo, hi = spec.bounds
    d, k = spec.dimensions, spec.n_peaks
    centers = rng.uniform(lo, hi, size=(k, d))
    heights = rng.uniform(spec.min_height, spec.max_height, size=k)
    widths = rng.uniform(spec.min_width, spec.max_width, size=k)
    return LandscapeState(
        centers=centers,
        heights=heights,
        widths=widths,
        last_shifts=np.zeros((k, d)),
        spec=spec,
        rng=rng,
    )


def evaluate(ls: LandscapeState, x) -> float | np.ndarray:
    """Maximum cone value over all peaks.

    ``x`` may be a single point of shape (d,) or a batch (n, d); the return
    type follows. No evaluation counter is touched here.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (ls.dimensions,) or x.ndim not in (1, 2):
        raise LandscapeError(
            f"point has shape {x.shape}, landscape has {ls.dimensions} dimensions"
        )
    diff = x[..., None, :] - ls.centers
    dist = np.sqrt(np.einsum("...ij,...ij->...i", diff, diff))
    values = (ls.heights - ls.widths * dist).max(axis=-1)
    return float(values) if x.ndim == 1 else values


def _reflect(c: np.ndarray, s: np.ndarray, lo: float, hi: float):
    below = c < lo
    above = c > hi
    c = np.where(below, 2 * lo - c, c)
    c = np.where(above, 2 * hi - c, c)
    s = np.where(below | above, -s, s)
    return np.clip(c, lo, hi), s


def apply_change(ls: LandscapeState) -> LandscapeState:
    """Advance the landscape to the next environment in place and return it."""
    spec, rng = ls.spec, ls.rng
    k, d = ls.centers.shape

    ls.heights = np.clip(
        ls.heights + spec.height_severity * rng.standard_normal(k),
        spec.min_height, spec.max_height,
    )
    ls.widths = np.clip(
        ls.widths + spec.width_severity * rng.standard_normal(k),
        spec.min_width, spec.max_width,
    )

    r = rng.standard_normal((k, d))
    r_norm = np.linalg.norm(r, axis=1, keepdims=True)
    r = r / np.where(r_norm > 0, r_norm, 1.0)
    # last_shifts has length `severity`, so scale the fresh direction to match
    blend = (1.0 - spec.lambda_) * spec.severity * r + spec.lambda_ * ls.last_shifts
    b_norm = np.linalg.norm(blend, axis=1, keepdims=True)
    direction = np.where(b_norm > 0, blend / np.where(b_norm > 0, b_norm, 1.0), r)
    shift = spec.severity * direction

    ls.centers, ls.last_shifts = _reflect(ls.centers + shift, shift, spec.bounds[0], spec.bounds[1])
    ls.env_index += 1
    return ls


def global_optimum_value(ls: LandscapeState) -> float:
    # The tallest apex cannot be covered by any other cone.
    return float(ls.heights.max())


def global_optimum_position(ls: LandscapeState) -> np.ndarray:
    return ls.centers[int(np.argmax(ls.heights))].copy()


def write_trajectory(spec: InstanceSpec, n_changes: int, fh: TextIO) -> None:
    """Write the first ``n_changes + 1`` environments as CSV rows."""
    ls = make_landscape(spec)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["env", "peak_id", "height", "width"]
               + [f"center_{j}" for j in range(spec.dimensions)])
    for step in range(n_changes + 1):
        if step:
            apply_change(ls)
        for row in ls.snapshot():
            w.writerow([row[0], row[1]] + [repr(v) for v in row[2:]])
