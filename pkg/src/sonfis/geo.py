"""Synthetic dam-site generation and spatial evaluation on regular 3-D grids.

The generator stands in for field data: vertical boreholes sample a known
ground-truth permeability field, with rock-quality and weathering columns
that follow the usual geotechnical relationships except inside a designated
anomalous zone where the quality/permeability link breaks down.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .tabular import LUGEON_CAP, TWR_CODES, DecisionTable, site_schema

__all__ = [
    "SiteSpec",
    "ScalarField",
    "truth_function",
    "anomalous_zone_mask",
    "generate_synthetic_site",
    "evaluate_grid",
    "variation_field",
    "export_field",
    "read_field",
]

_TWR_LEVELS = np.array(sorted(TWR_CODES.values()))

#: Fraction of the x extent (from the high-x side) forming the anomalous zone.
ANOMALOUS_X_FRACTION = 0.3


@dataclass(frozen=True)
class SiteSpec:
    """Recipe for one synthetic site.

    ``ground_truth`` selects the permeability field: ``"smooth"`` is an
    analytic sine-by-depth-decay field, ``"layered"`` is piecewise constant
    in z with the given boundaries (ascending z values) separating
    ``layer_means`` (one more mean than boundaries, ordered bottom to top).
    ``total_rows`` trims the generated table to an exact object count.
    """

    bounds: tuple = ((0.0, 300.0), (0.0, 300.0), (1100.0, 1300.0))
    n_boreholes: int = 20
    samples_per_borehole: int = 40
    noise_sigma: float = 2.0
    seed: int = 0
    ground_truth: str = "smooth"
    layer_boundaries: tuple = (1160.0, 1230.0)
    layer_means: tuple = (80.0, 45.0, 10.0)
    total_rows: int | None = None

    def __post_init__(self):
        if len(self.bounds) != 3 or any(len(b) != 2 or b[0] >= b[1] for b in self.bounds):
            raise ValueError("bounds must be three non-degenerate (min, max) pairs")
        if self.n_boreholes < 1 or self.samples_per_borehole < 1:
            raise ValueError("borehole and sample counts must be at least 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.ground_truth not in ("smooth", "layered"):
            raise ValueError(f"unknown ground truth {self.ground_truth!r}")
        if self.ground_truth == "layered":
            if len(self.layer_means) != len(self.layer_boundaries) + 1:
                raise ValueError("layered truth needs one more mean than boundaries")
            if list(self.layer_boundaries) != sorted(self.layer_boundaries):
                raise ValueError("layer boundaries must be ascending")
        if self.total_rows is not None:
            if self.total_rows < 1 or self.total_rows > self.n_boreholes * self.samples_per_borehole:
                raise ValueError("total_rows must lie in 1..(boreholes * samples)")


def truth_function(spec: SiteSpec):
    """Vectorised ground-truth permeability field lu(x, y, z) of a site."""
    (x0, x1), _, (z0, z1) = spec.bounds
    if spec.ground_truth == "smooth":
        length = x1 - x0
        depth_scale = z1 - z0

        def smooth(x, y, z):
            x = np.asarray(x, dtype=float)
            z = np.asarray(z, dtype=float)
            return 50.0 + 40.0 * np.sin(2.0 * np.pi * (x - x0) / length) * np.exp(
                -(z - z0) / depth_scale
            )

        return smooth

    boundaries = np.asarray(spec.layer_boundaries, dtype=float)
    means = np.asarray(spec.layer_means, dtype=float)

    def layered(x, y, z):
        z = np.asarray(z, dtype=float)
        return means[np.searchsorted(boundaries, z, side="right")]

    return layered


def anomalous_zone_mask(spec: SiteSpec, x) -> np.ndarray:
    """True for points inside the zone where the RQD/permeability rule flips."""
    (x0, x1), _, _ = spec.bounds
    return np.asarray(x, dtype=float) >= x1 - ANOMALOUS_X_FRACTION * (x1 - x0)


def generate_synthetic_site(spec: SiteSpec):
    """Sample a synthetic borehole table from a known ground truth.

    Returns ``(table, truth)`` where the table follows the canonical site
    schema and ``truth`` is the vectorised field the lugeon column was drawn
    from (before noise and capping). Bit-reproducible for a fixed seed.
    """
    rng = np.random.default_rng(spec.seed)
    (x0, x1), (y0, y1), (z0, z1) = spec.bounds
    nb, ns = spec.n_boreholes, spec.samples_per_borehole

    bx = rng.uniform(x0, x1, size=nb)
    by = rng.uniform(y0, y1, size=nb)
    dz = (z1 - z0) / ns
    depths = z1 - (np.arange(ns) + 0.5) * dz          # top-down sampling

    x = np.repeat(bx, ns)
    y = np.repeat(by, ns)
    z = np.tile(depths, nb)

    truth = truth_function(spec)
    lu = truth(x, y, z) + rng.normal(0.0, spec.noise_sigma, size=x.size)
    lu = np.clip(lu, 0.0, LUGEON_CAP)

    interval = rng.uniform(3.0, 7.0, size=x.size)      # opaque test-interval length

    anomalous = anomalous_zone_mask(spec, x)
    rqd_noise = rng.normal(0.0, 3.0, size=x.size)
    rqd = np.where(anomalous, 20.0 + 0.6 * lu, 95.0 - 0.8 * lu) + rqd_noise
    rqd = np.clip(rqd, 0.0, 100.0)

    depth_frac = (z1 - z) / (z1 - z0)                  # 0 at surface, 1 at bottom
    twr_raw = 4.0 * (1.0 - depth_frac) + rng.normal(0.0, 0.5, size=x.size)
    twr = np.clip(np.round(twr_raw * 2.0) / 2.0, _TWR_LEVELS[0], _TWR_LEVELS[-1])

    rows = np.column_stack([x, y, z, interval, rqd, twr, lu])
    if spec.total_rows is not None:
        rows = rows[: spec.total_rows]
    return DecisionTable(site_schema(), rows), truth


@dataclass(frozen=True)
class ScalarField:
    """Values on a regular grid, stored x-fastest.

    ``values[ix + nx * (iy + ny * iz)]`` is the value at node
    ``(min + ix * dx, min + iy * dy, min + iz * dz)``.
    """

    bounds: tuple
    resolution: tuple
    values: np.ndarray
    kind: str = field(default="continuous")

    def __post_init__(self):
        nx, ny, nz = self.resolution
        values = np.asarray(self.values, dtype=float)
        if values.shape != (nx * ny * nz,):
            raise ValueError(
                f"value count {values.shape} does not match resolution {self.resolution}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if self.kind not in ("continuous", "categorical"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        object.__setattr__(self, "values", values)

    def axes(self):
        return tuple(
            np.linspace(b[0], b[1], n) for b, n in zip(self.bounds, self.resolution)
        )

    def as_grid(self) -> np.ndarray:
        """Values reshaped to (nx, ny, nz)."""
        return self.values.reshape(self.resolution, order="F")


def evaluate_grid(predictor, bounds, resolution) -> ScalarField:
    """Evaluate a spatial predictor at every node of a regular grid.

    ``predictor`` is a trained TSK model (continuous output), a rule-based
    spatial predictor with a ``predict_class`` method (categorical output,
    unknowns included), or a plain callable f(x, y, z).
    """
    resolution = tuple(int(n) for n in resolution)
    if len(resolution) != 3 or any(n < 2 for n in resolution):
        raise ValueError("resolution must be at least 2 nodes per axis")
    bounds = tuple((float(b[0]), float(b[1])) for b in bounds)
    if len(bounds) != 3 or any(b[0] >= b[1] for b in bounds):
        raise ValueError("bounds must be three non-degenerate (min, max) pairs")

    axes = [np.linspace(b[0], b[1], n) for b, n in zip(bounds, resolution)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    points = np.column_stack([gx.ravel(order="F"), gy.ravel(order="F"), gz.ravel(order="F")])

    if callable(predictor):
        values = np.asarray(predictor(points[:, 0], points[:, 1], points[:, 2]), dtype=float)
        kind = "continuous"
    elif hasattr(predictor, "predict_class"):
        if len(getattr(predictor, "condition_names", (1, 2, 3))) != 3:
            raise ValueError("rule predictor must take exactly the three spatial inputs")
        values = predictor.predict_class(points).astype(float)
        kind = "categorical"
    else:
        if predictor.input_dim != 3:
            raise ValueError(
                f"spatial evaluation needs a 3-input model, got {predictor.input_dim}"
            )
        from .tsk import predict as tsk_predict

        values = tsk_predict(predictor, points)
        kind = "continuous"
    return ScalarField(bounds, resolution, values, kind)


def variation_field(fld: ScalarField) -> ScalarField:
    """Gradient-norm field: the local rate of change per meter.

    Uses central differences at interior nodes and one-sided differences on
    the boundary. Rejects categorical fields, whose codes have no gradient.
    """
    if fld.kind != "continuous":
        raise ValueError("variation of a categorical field is not defined")
    if any(n < 3 for n in fld.resolution):
        raise ValueError("variation needs at least 3 nodes per axis")
    grid = fld.as_grid()
    xs, ys, zs = fld.axes()
    gx, gy, gz = np.gradient(grid, xs, ys, zs, edge_order=1)
    norm = np.sqrt(gx ** 2 + gy ** 2 + gz ** 2)
    return ScalarField(fld.bounds, fld.resolution, norm.ravel(order="F"), "continuous")


def export_field(fld: ScalarField, path) -> None:
    """Write a field as CSV ``x,y,z,value`` with x varying fastest; all floats
    carry 6 significant digits."""
    xs, ys, zs = fld.axes()
    nx, ny, nz = fld.resolution
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "value"])
        k = 0
        for iz in range(nz):
            for iy in range(ny):
                for ix in range(nx):
                    writer.writerow(
                        [
                            f"{xs[ix]:.6g}",
                            f"{ys[iy]:.6g}",
                            f"{zs[iz]:.6g}",
                            f"{fld.values[k]:.6g}",
                        ]
                    )
                    k += 1


def read_field(path, kind: str = "continuous") -> ScalarField:
    """Rebuild a field from its CSV export (to the exported precision)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x", "y", "z", "value"]:
            raise ValueError(f"{path}: not a field CSV")
        rows = [[float(c) for c in row] for row in reader if row]
    data = np.asarray(rows)
    if data.size == 0:
        raise ValueError(f"{path}: empty field file")
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    zs = np.unique(data[:, 2])
    resolution = (len(xs), len(ys), len(zs))
    if len(data) != len(xs) * len(ys) * len(zs):
        raise ValueError(f"{path}: rows do not form a full regular grid")
    bounds = ((xs[0], xs[-1]), (ys[0], ys[-1]), (zs[0], zs[-1]))
    return ScalarField(bounds, resolution, data[:, 3], kind)
