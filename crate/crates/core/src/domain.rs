//! Shared domain types: incidents, the space-time grid, density rasters,
//! land-use masks and time windows.
//!
//! Index conventions used throughout the crate:
//!
//! * `i` is the column (x axis, west to east), `j` the row (y axis, south to
//!   north) and `k` the time bin.
//! * 2-D rasters are stored row-major from the south row: `j * n_cols + i`.
//! * 3-D volumes are stored slice by slice: `(k * n_rows + j) * n_cols + i`.
//!
//! Every interval is half-open, `[lo, hi)`, so grid cells partition the plane.

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{Error, Result};

/// One timestamped event in projected planar meters and continuous days.
#[derive(Debug, Clone, PartialEq)]
pub struct Incident {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl Incident {
    pub fn new(id: impl Into<String>, x: f64, y: f64, t: f64) -> Self {
        Self {
            id: id.into(),
            x,
            y,
            t,
        }
    }
}

/// Canonical summation order for incidents: `(t, x, y, id)`.
pub fn canonical_cmp(a: &Incident, b: &Incident) -> Ordering {
    a.t.total_cmp(&b.t)
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
        .then_with(|| a.id.cmp(&b.id))
}

/// Returns the incidents sorted into canonical order.
pub fn canonical_sorted(incidents: &[Incident]) -> Vec<Incident> {
    let mut sorted = incidents.to_vec();
    sorted.sort_by(canonical_cmp);
    sorted
}

/// Checks that every incident has finite coordinates and that ids are unique.
pub fn validate_incidents(incidents: &[Incident]) -> Result<()> {
    let mut seen = HashSet::with_capacity(incidents.len());
    for inc in incidents {
        if !(inc.x.is_finite() && inc.y.is_finite() && inc.t.is_finite()) {
            return Err(Error::NonFiniteIncident { id: inc.id.clone() });
        }
        if !seen.insert(inc.id.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate incident id `{}`",
                inc.id
            )));
        }
    }
    Ok(())
}

/// Returns the incidents whose time falls inside `window`.
pub fn incidents_in(incidents: &[Incident], window: TimeWindow) -> Vec<Incident> {
    incidents
        .iter()
        .filter(|inc| window.contains(inc.t))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VoxelIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

/// Spatial layout of a raster: lower-left origin, square cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec2D {
    x_origin: f64,
    y_origin: f64,
    cell_size: f64,
    n_cols: usize,
    n_rows: usize,
}

impl GridSpec2D {
    pub fn new(
        x_origin: f64,
        y_origin: f64,
        cell_size: f64,
        n_cols: usize,
        n_rows: usize,
    ) -> Result<Self> {
        if !(x_origin.is_finite() && y_origin.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::InvalidGrid(format!(
                "grid must have at least one cell, got {n_cols}x{n_rows}"
            )));
        }
        Ok(Self {
            x_origin,
            y_origin,
            cell_size,
            n_cols,
            n_rows,
        })
    }

    pub fn x_origin(&self) -> f64 {
        self.x_origin
    }
    pub fn y_origin(&self) -> f64 {
        self.y_origin
    }
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn cell_count(&self) -> usize {
        self.n_cols * self.n_rows
    }
    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    /// Row-major flat index of cell `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_cols + i
    }

    pub fn cell_of_index(&self, index: usize) -> (usize, usize) {
        (index % self.n_cols, index / self.n_cols)
    }

    pub fn cell_centroid(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_origin + (i as f64 + 0.5) * self.cell_size,
            self.y_origin + (j as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing `(x, y)`, or `None` outside the grid.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let i = axis_index(x, self.x_origin, self.cell_size, self.n_cols)?;
        let j = axis_index(y, self.y_origin, self.cell_size, self.n_rows)?;
        Some((i, j))
    }

    pub fn extent_x(&self) -> f64 {
        self.n_cols as f64 * self.cell_size
    }
    pub fn extent_y(&self) -> f64 {
        self.n_rows as f64 * self.cell_size
    }

    /// True when both grids describe the same cells.
    pub fn aligned_with(&self, other: &GridSpec2D) -> bool {
        self == other
    }
}

/// The discretized space-time cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec3D {
    spatial: GridSpec2D,
    t_start: f64,
    t_bin: f64,
    n_bins: usize,
}

impl GridSpec3D {
    pub fn new(spatial: GridSpec2D, t_start: f64, t_bin: f64, n_bins: usize) -> Result<Self> {
        if !t_start.is_finite() {
            return Err(Error::InvalidGrid("t_start must be finite".into()));
        }
        if !(t_bin > 0.0 && t_bin.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "t_bin must be positive, got {t_bin}"
            )));
        }
        if n_bins == 0 {
            return Err(Error::InvalidGrid("n_bins must be positive".into()));
        }
        Ok(Self {
            spatial,
            t_start,
            t_bin,
            n_bins,
        })
    }

    pub fn spatial(&self) -> &GridSpec2D {
        &self.spatial
    }
    pub fn t_start(&self) -> f64 {
        self.t_start
    }
    pub fn t_bin(&self) -> f64 {
        self.t_bin
    }
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }
    pub fn n_cols(&self) -> usize {
        self.spatial.n_cols
    }
    pub fn n_rows(&self) -> usize {
        self.spatial.n_rows
    }
    pub fn cell_size(&self) -> f64 {
        self.spatial.cell_size
    }
    pub fn voxel_count(&self) -> usize {
        self.spatial.cell_count() * self.n_bins
    }
    pub fn voxel_volume(&self) -> f64 {
        self.spatial.cell_area() * self.t_bin
    }
    pub fn t_end(&self) -> f64 {
        self.t_start + self.n_bins as f64 * self.t_bin
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.spatial.n_rows + j) * self.spatial.n_cols + i
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.t_start + (k as f64 + 0.5) * self.t_bin
    }

    /// Voxel containing `p`, or `None` when any axis falls outside the grid.
    pub fn world_to_voxel(&self, p: Point3) -> Option<VoxelIndex> {
        let (i, j) = self.spatial.world_to_cell(p.x, p.y)?;
        let k = axis_index(p.t, self.t_start, self.t_bin, self.n_bins)?;
        Some(VoxelIndex { i, j, k })
    }

    pub fn voxel_centroid(&self, i: usize, j: usize, k: usize) -> Result<Point3> {
        if i >= self.n_cols() || j >= self.n_rows() || k >= self.n_bins {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                k,
                n_cols: self.n_cols(),
                n_rows: self.n_rows(),
                n_bins: self.n_bins,
            });
        }
        let (x, y) = self.spatial.cell_centroid(i, j);
        Ok(Point3::new(x, y, self.bin_center(k)))
    }
}

fn axis_index(value: f64, origin: f64, step: f64, count: usize) -> Option<usize> {
    let f = ((value - origin) / step).floor();
    // NaN fails both comparisons.
    if f >= 0.0 && f < count as f64 {
        Some(f as usize)
    } else {
        None
    }
}

pub fn world_to_voxel(p: Point3, spec: &GridSpec3D) -> Option<VoxelIndex> {
    spec.world_to_voxel(p)
}

pub fn voxel_centroid(i: usize, j: usize, k: usize, spec: &GridSpec3D) -> Result<Point3> {
    spec.voxel_centroid(i, j, k)
}

fn check_values(values: &[f64], expected: usize, what: &str) -> Result<()> {
    if values.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "{what} has {} values, grid needs {expected}",
            values.len()
        )));
    }
    if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "{what} value {} at index {pos} is negative or non-finite",
            values[pos]
        )));
    }
    Ok(())
}

/// Density estimates (per m²·day) at voxel centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVolume {
    spec: GridSpec3D,
    values: Vec<f64>,
}

impl DensityVolume {
    pub fn new(spec: GridSpec3D, values: Vec<f64>) -> Result<Self> {
        check_values(&values, spec.voxel_count(), "volume")?;
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec3D) -> Self {
        Self {
            values: vec![0.0; spec.voxel_count()],
            spec,
        }
    }

    pub fn spec(&self) -> &GridSpec3D {
        &self.spec
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    /// Values of time bin `k`, row-major.
    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.spec.spatial().cell_count();
        &self.values[k * n..(k + 1) * n]
    }

    /// Riemann sum of the density over the grid.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.voxel_volume()
    }
}

/// A 2-D raster of nonnegative values aligned to a spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySurface {
    spec: GridSpec2D,
    values: Vec<f64>,
}

impl DensitySurface {
    pub fn new(spec: GridSpec2D, values: Vec<f64>) -> Result<Self> {
        check_values(&values, spec.cell_count(), "surface")?;
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec2D) -> Self {
        Self {
            values: vec![0.0; spec.cell_count()],
            spec,
        }
    }

    pub fn spec(&self) -> &GridSpec2D {
        &self.spec
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_area()
    }
}

/// Kernel half-widths: meters for `h_x`, `h_y`, days for `h_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidths {
    h_x: f64,
    h_y: f64,
    h_t: f64,
}

impl Bandwidths {
    pub fn new(h_x: f64, h_y: f64, h_t: f64) -> Result<Self> {
        let ok = |h: f64| h > 0.0 && h.is_finite();
        if ok(h_x) && ok(h_y) && ok(h_t) {
            Ok(Self { h_x, h_y, h_t })
        } else {
            Err(Error::InvalidBandwidths { h_x, h_y, h_t })
        }
    }

    pub fn h_x(&self) -> f64 {
        self.h_x
    }
    pub fn h_y(&self) -> f64 {
        self.h_y
    }
    pub fn h_t(&self) -> f64 {
        self.h_t
    }

    /// The SKDE bandwidth: the larger of the two spatial bandwidths.
    pub fn spatial_max(&self) -> f64 {
        self.h_x.max(self.h_y)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.h_x, self.h_y, self.h_t]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LandUse {
    Outside,
    InStudyNonEligible,
    Eligible,
}

impl LandUse {
    pub fn in_study(self) -> bool {
        !matches!(self, LandUse::Outside)
    }
}

/// Per-cell land-use classes aligned to a spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LandUseGrid {
    spec: GridSpec2D,
    classes: Vec<LandUse>,
}

impl LandUseGrid {
    pub fn new(spec: GridSpec2D, classes: Vec<LandUse>) -> Result<Self> {
        if classes.len() != spec.cell_count() {
            return Err(Error::InvalidArgument(format!(
                "land use has {} cells, grid needs {}",
                classes.len(),
                spec.cell_count()
            )));
        }
        if !classes.contains(&LandUse::Eligible) {
            return Err(Error::NoEligibleCells);
        }
        Ok(Self { spec, classes })
    }

    /// Every cell eligible.
    pub fn all_eligible(spec: GridSpec2D) -> Self {
        Self {
            classes: vec![LandUse::Eligible; spec.cell_count()],
            spec,
        }
    }

    pub fn spec(&self) -> &GridSpec2D {
        &self.spec
    }
    pub fn classes(&self) -> &[LandUse] {
        &self.classes
    }
    pub fn class_at(&self, i: usize, j: usize) -> LandUse {
        self.classes[self.spec.index(i, j)]
    }

    pub fn eligible_cells(&self) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&c| self.classes[c] == LandUse::Eligible)
            .collect()
    }

    pub fn study_cell_count(&self) -> usize {
        self.classes.iter().filter(|c| c.in_study()).count()
    }

    /// Study area in m²: in-study cells times the cell area.
    pub fn study_area(&self) -> f64 {
        self.study_cell_count() as f64 * self.spec.cell_area()
    }
}

/// Half-open interval of days, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    start: f64,
    end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if start.is_finite() && end.is_finite() && start < end {
            Ok(Self { start, end })
        } else {
            Err(Error::InvalidArgument(format!(
                "time window [{start}, {end}) is empty or non-finite"
            )))
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }
    pub fn end(&self) -> f64 {
        self.end
    }
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}
