//! Density estimators: the product-kernel STKDE, the bivariate spatial
//! KDE baseline (SKDE) and prospective hotspot mapping (ProMap).
//!
//! All grid evaluators scatter incidents in canonical order into the cells
//! inside their kernel support. Each cell therefore accumulates exactly the
//! nonzero terms of the naive per-cell sum, in the same order, and the two
//! paths agree bit for bit. Parallel work is split by time slab (volumes) or
//! by row (surfaces), which does not change any cell's summation order.

use rayon::prelude::*;

use crate::domain::{
    canonical_cmp, Bandwidths, DensitySurface, DensityVolume, GridSpec2D, GridSpec3D, Incident,
    Point3,
};
use crate::error::{Error, Result};
use crate::kernels::{product_from_factors, product_kernel_weight, KernelId};

/// Default ProMap temporal window: two mean Gregorian months, in days.
pub const PROMAP_DEFAULT_H_T: f64 = 60.875;
/// Default ProMap spatial search radius in meters.
pub const PROMAP_DEFAULT_H_S: f64 = 400.0;
/// Default ProMap time unit: one week.
pub const PROMAP_DEFAULT_T_UNIT: f64 = 7.0;

/// ProMap search radii and the units in which `d_i` and `t_i` are counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromapParams {
    pub h_s: f64,
    pub h_t: f64,
    pub d_unit: f64,
    pub t_unit: f64,
}

impl PromapParams {
    /// 400 m, two months, distances in cell widths, times in weeks.
    pub fn defaults(cell_size: f64) -> Self {
        Self {
            h_s: PROMAP_DEFAULT_H_S,
            h_t: PROMAP_DEFAULT_H_T,
            d_unit: cell_size,
            t_unit: PROMAP_DEFAULT_T_UNIT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("h_s", self.h_s),
            ("h_t", self.h_t),
            ("d_unit", self.d_unit),
            ("t_unit", self.t_unit),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "ProMap {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn sorted_canonical(incidents: &[Incident]) -> Result<Vec<&Incident>> {
    if incidents.is_empty() {
        return Err(Error::EmptyIncidents);
    }
    let mut sorted: Vec<&Incident> = incidents.iter().collect();
    sorted.sort_by(|a, b| canonical_cmp(a, b));
    Ok(sorted)
}

/// Inclusive range of cell indices whose centroids may lie within `radius`
/// of `center`. Conservative by one cell on each side; the kernel itself
/// decides membership.
fn candidate_range(center: f64, radius: f64, origin: f64, step: f64, count: usize) -> Option<(usize, usize)> {
    let lo = ((center - radius - origin) / step - 0.5).floor() - 1.0;
    let hi = ((center + radius - origin) / step - 0.5).ceil() + 1.0;
    if hi < 0.0 || lo > (count as f64 - 1.0) {
        return None;
    }
    let lo = lo.max(0.0) as usize;
    let hi = (hi.min(count as f64 - 1.0)) as usize;
    Some((lo, hi))
}

/// STKDE with incidents held in canonical order.
#[derive(Debug, Clone)]
pub struct Stkde {
    incidents: Vec<Incident>,
    bw: Bandwidths,
    kernel: KernelId,
}

impl Stkde {
    pub fn new(incidents: &[Incident], bw: Bandwidths, kernel: KernelId) -> Result<Self> {
        let sorted = sorted_canonical(incidents)?;
        Ok(Self {
            incidents: sorted.into_iter().cloned().collect(),
            bw,
            kernel,
        })
    }

    pub fn len(&self) -> usize {
        self.incidents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incidents.is_empty()
    }

    /// Density at `q` by the full sum over every incident.
    pub fn density_at(&self, q: Point3) -> f64 {
        let mut sum = 0.0;
        for inc in &self.incidents {
            sum += product_kernel_weight(q.x - inc.x, q.y - inc.y, q.t - inc.t, &self.bw, self.kernel);
        }
        sum / self.incidents.len() as f64
    }

    /// Reference evaluation: `density_at` at every voxel centroid.
    pub fn volume_naive(&self, spec: &GridSpec3D) -> DensityVolume {
        let mut values = vec![0.0; spec.voxel_count()];
        for k in 0..spec.n_bins() {
            for j in 0..spec.n_rows() {
                for i in 0..spec.n_cols() {
                    let c = spec
                        .voxel_centroid(i, j, k)
                        .expect("loop indices are inside the grid");
                    values[spec.index(i, j, k)] = self.density_at(c);
                }
            }
        }
        DensityVolume::new(*spec, values).expect("kernel sums are finite and nonnegative")
    }

    /// Support-pruned evaluation at every voxel centroid.
    pub fn volume(&self, spec: &GridSpec3D) -> DensityVolume {
        let bw = self.bw;
        let kernel = self.kernel;
        let radius = kernel.support();
        let grid = spec.spatial();
        let cells = grid.cell_count();
        let n = self.incidents.len() as f64;
        let mut values = vec![0.0; spec.voxel_count()];

        values.par_chunks_mut(cells).enumerate().for_each(|(k, slab)| {
            let tc = spec.bin_center(k);
            let reach = radius * bw.h_t();
            // Incidents are sorted by t first, so the temporal candidates form a run.
            let lo = self.incidents.partition_point(|inc| inc.t < tc - reach);
            let hi = self.incidents.partition_point(|inc| inc.t <= tc + reach);
            let mut kx = Vec::new();
            let mut ky = Vec::new();
            for inc in &self.incidents[lo..hi] {
                let kt = kernel.eval((tc - inc.t) / bw.h_t());
                if kt == 0.0 {
                    continue;
                }
                let Some((i0, i1)) = candidate_range(
                    inc.x,
                    radius * bw.h_x(),
                    grid.x_origin(),
                    grid.cell_size(),
                    grid.n_cols(),
                ) else {
                    continue;
                };
                let Some((j0, j1)) = candidate_range(
                    inc.y,
                    radius * bw.h_y(),
                    grid.y_origin(),
                    grid.cell_size(),
                    grid.n_rows(),
                ) else {
                    continue;
                };
                kx.clear();
                kx.extend((i0..=i1).map(|i| {
                    let (cx, _) = grid.cell_centroid(i, 0);
                    kernel.eval((cx - inc.x) / bw.h_x())
                }));
                ky.clear();
                ky.extend((j0..=j1).map(|j| {
                    let (_, cy) = grid.cell_centroid(0, j);
                    kernel.eval((cy - inc.y) / bw.h_y())
                }));
                for (dj, &wy) in ky.iter().enumerate() {
                    if wy == 0.0 {
                        continue;
                    }
                    let row = (j0 + dj) * grid.n_cols();
                    for (di, &wx) in kx.iter().enumerate() {
                        if wx == 0.0 {
                            continue;
                        }
                        slab[row + i0 + di] += product_from_factors(wx, wy, kt, &bw);
                    }
                }
            }
            for v in slab.iter_mut() {
                *v /= n;
            }
        });

        DensityVolume::new(*spec, values).expect("kernel sums are finite and nonnegative")
    }
}

pub fn stkde_at_point(
    incidents: &[Incident],
    q: Point3,
    bw: Bandwidths,
    kernel: KernelId,
) -> Result<f64> {
    Ok(Stkde::new(incidents, bw, kernel)?.density_at(q))
}

pub fn stkde_volume(
    incidents: &[Incident],
    spec: &GridSpec3D,
    bw: Bandwidths,
    kernel: KernelId,
) -> Result<DensityVolume> {
    Ok(Stkde::new(incidents, bw, kernel)?.volume(spec))
}

/// Naive double loop over voxels and incidents; the reference for `stkde_volume`.
pub fn stkde_volume_naive(
    incidents: &[Incident],
    spec: &GridSpec3D,
    bw: Bandwidths,
    kernel: KernelId,
) -> Result<DensityVolume> {
    Ok(Stkde::new(incidents, bw, kernel)?.volume_naive(spec))
}

fn check_bandwidth(h: f64, name: &str) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {h}")))
    }
}

/// Spatial order for the SKDE sum: `(x, y, id)`. Time plays no part, so the
/// result does not depend on timestamps at all.
fn sorted_spatial(incidents: &[Incident]) -> Result<Vec<&Incident>> {
    if incidents.is_empty() {
        return Err(Error::EmptyIncidents);
    }
    let mut sorted: Vec<&Incident> = incidents.iter().collect();
    sorted.sort_by(|a, b| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(sorted)
}

/// SKDE value at `(x, y)` by the full sum; the reference for `skde_surface`.
pub fn skde_at_point(incidents: &[Incident], x: f64, y: f64, h_s: f64, kernel: KernelId) -> Result<f64> {
    check_bandwidth(h_s, "h_s")?;
    let sorted = sorted_spatial(incidents)?;
    let mut sum = 0.0;
    for inc in &sorted {
        let u = (x - inc.x) / h_s;
        let v = (y - inc.y) / h_s;
        sum += kernel.eval_radial(u * u + v * v);
    }
    Ok(sum / (sorted.len() as f64 * h_s * h_s))
}

/// Bivariate spatial KDE with the radially symmetric kernel, ignoring time.
pub fn skde_surface(
    incidents: &[Incident],
    spec: &GridSpec2D,
    h_s: f64,
    kernel: KernelId,
) -> Result<DensitySurface> {
    check_bandwidth(h_s, "h_s")?;
    let sorted = sorted_spatial(incidents)?;
    let norm = sorted.len() as f64 * h_s * h_s;
    let reach = kernel.support() * h_s;
    let mut values = vec![0.0; spec.cell_count()];

    values
        .par_chunks_mut(spec.n_cols())
        .enumerate()
        .for_each(|(j, row)| {
            let (_, cy) = spec.cell_centroid(0, j);
            for inc in &sorted {
                let v = (cy - inc.y) / h_s;
                if v.abs() > kernel.support() {
                    continue;
                }
                let Some((i0, i1)) =
                    candidate_range(inc.x, reach, spec.x_origin(), spec.cell_size(), spec.n_cols())
                else {
                    continue;
                };
                for (i, cell) in row.iter_mut().enumerate().take(i1 + 1).skip(i0) {
                    let (cx, _) = spec.cell_centroid(i, j);
                    let u = (cx - inc.x) / h_s;
                    let w = kernel.eval_radial(u * u + v * v);
                    if w != 0.0 {
                        *cell += w;
                    }
                }
            }
            for cell in row.iter_mut() {
                *cell /= norm;
            }
        });

    DensitySurface::new(*spec, values)
}

fn promap_weight(dist: f64, age: f64, params: &PromapParams) -> f64 {
    if dist > params.h_s || age > params.h_t {
        return 0.0;
    }
    1.0 / ((1.0 + dist / params.d_unit) * (1.0 + age / params.t_unit))
}

fn promap_sorted<'a>(incidents: &'a [Incident], params: &PromapParams, t_ref: f64) -> Result<Vec<&'a Incident>> {
    params.validate()?;
    if !t_ref.is_finite() {
        return Err(Error::InvalidArgument(format!("t_ref must be finite, got {t_ref}")));
    }
    if let Some(inc) = incidents.iter().find(|inc| inc.t > t_ref) {
        return Err(Error::FutureIncident {
            id: inc.id.clone(),
            t: inc.t,
            t_ref,
        });
    }
    let mut sorted: Vec<&Incident> = incidents
        .iter()
        .filter(|inc| t_ref - inc.t <= params.h_t)
        .collect();
    sorted.sort_by(|a, b| canonical_cmp(a, b));
    Ok(sorted)
}

/// ProMap risk at `(x, y)` by the full sum; the reference for `promap_surface`.
pub fn promap_at_point(
    incidents: &[Incident],
    x: f64,
    y: f64,
    params: &PromapParams,
    t_ref: f64,
) -> Result<f64> {
    let sorted = promap_sorted(incidents, params, t_ref)?;
    let mut sum = 0.0;
    for inc in sorted {
        let dist = ((x - inc.x) * (x - inc.x) + (y - inc.y) * (y - inc.y)).sqrt();
        sum += promap_weight(dist, t_ref - inc.t, params);
    }
    Ok(sum)
}

/// ProMap: unnormalized inverse-distance times inverse-age risk intensity.
pub fn promap_surface(
    incidents: &[Incident],
    spec: &GridSpec2D,
    params: &PromapParams,
    t_ref: f64,
) -> Result<DensitySurface> {
    let sorted = promap_sorted(incidents, params, t_ref)?;
    let mut values = vec![0.0; spec.cell_count()];

    values
        .par_chunks_mut(spec.n_cols())
        .enumerate()
        .for_each(|(j, row)| {
            let (_, cy) = spec.cell_centroid(0, j);
            for inc in &sorted {
                if (cy - inc.y).abs() > params.h_s {
                    continue;
                }
                let Some((i0, i1)) =
                    candidate_range(inc.x, params.h_s, spec.x_origin(), spec.cell_size(), spec.n_cols())
                else {
                    continue;
                };
                for (i, cell) in row.iter_mut().enumerate().take(i1 + 1).skip(i0) {
                    let (cx, _) = spec.cell_centroid(i, j);
                    let dist = ((cx - inc.x) * (cx - inc.x) + (cy - inc.y) * (cy - inc.y)).sqrt();
                    let w = promap_weight(dist, t_ref - inc.t, params);
                    if w != 0.0 {
                        *cell += w;
                    }
                }
            }
        });

    DensitySurface::new(*spec, values)
}
