//! Synthetic land use and space-time point processes for testing and demos.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::domain::{canonical_cmp, GridSpec2D, Incident, LandUse, LandUseGrid, TimeWindow};
use crate::error::{Error, Result};
use crate::significance::{derive_seed, uniform_in_eligible};

/// Draws allowed per cluster event before rejection sampling gives up.
pub const MAX_REJECTIONS: usize = 10_000;

/// The whole grid is the study area; `round(fraction * cells)` cells,
/// chosen uniformly without replacement, are eligible.
pub fn generate_landuse(spec: GridSpec2D, eligible_fraction: f64, seed: u64) -> Result<LandUseGrid> {
    if !(eligible_fraction > 0.0 && eligible_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eligible fraction must lie in (0, 1], got {eligible_fraction}"
        )));
    }
    let cells = spec.cell_count();
    let count = (eligible_fraction * cells as f64).round() as usize;
    if count == 0 {
        return Err(Error::NoEligibleCells);
    }
    let mut classes = vec![LandUse::InStudyNonEligible; cells];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in sample(&mut rng, cells, count) {
        classes[c] = LandUse::Eligible;
    }
    LandUseGrid::new(spec, classes)
}

/// A cluster of events scattered around a moving center.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    /// Waypoints `(t, x, y)` in increasing time; the center moves linearly
    /// between them and rests at the end points outside their span.
    pub trajectory: Vec<(f64, f64, f64)>,
    /// Standard deviation of the isotropic normal around the center, meters.
    pub spread: f64,
    pub extent: TimeWindow,
    pub count: usize,
}

impl ClusterSpec {
    pub fn stationary(x: f64, y: f64, spread: f64, extent: TimeWindow, count: usize) -> Self {
        Self {
            trajectory: vec![(extent.start(), x, y)],
            spread,
            extent,
            count,
        }
    }

    pub fn center_at(&self, t: f64) -> (f64, f64) {
        let w = &self.trajectory;
        let first = w[0];
        if t <= first.0 {
            return (first.1, first.2);
        }
        for pair in w.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t <= b.0 {
                let f = (t - a.0) / (b.0 - a.0);
                return (a.1 + f * (b.1 - a.1), a.2 + f * (b.2 - a.2));
            }
        }
        let last = w[w.len() - 1];
        (last.1, last.2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthProcessSpec {
    /// Background events per day, uniform over eligible cells.
    pub background_rate: f64,
    pub clusters: Vec<ClusterSpec>,
    pub master_seed: u64,
}

impl SynthProcessSpec {
    pub fn validate(&self, spec: &GridSpec2D) -> Result<()> {
        if !(self.background_rate >= 0.0 && self.background_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "background rate must be nonnegative, got {}",
                self.background_rate
            )));
        }
        let x_max = spec.x_origin() + spec.extent_x();
        let y_max = spec.y_origin() + spec.extent_y();
        for (k, c) in self.clusters.iter().enumerate() {
            if c.trajectory.is_empty() {
                return Err(Error::InvalidArgument(format!("cluster {k} has no trajectory")));
            }
            if !(c.spread > 0.0 && c.spread.is_finite()) {
                return Err(Error::InvalidArgument(format!("cluster {k} spread must be positive")));
            }
            if c.trajectory.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                return Err(Error::InvalidArgument(format!(
                    "cluster {k} waypoints must have increasing times"
                )));
            }
            for &(t, x, y) in &c.trajectory {
                if !t.is_finite() || !(spec.x_origin()..=x_max).contains(&x) || !(spec.y_origin()..=y_max).contains(&y) {
                    return Err(Error::InvalidArgument(format!(
                        "cluster {k} waypoint ({t}, {x}, {y}) lies outside the study extent"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Background and cluster events inside `window`, sorted canonically.
///
/// The background and each cluster draw from their own stream seeded off
/// `master_seed`, so adding a cluster leaves the others unchanged.
pub fn generate_incidents(spec: &SynthProcessSpec, land_use: &LandUseGrid, window: TimeWindow) -> Result<Vec<Incident>> {
    let grid = land_use.spec();
    spec.validate(grid)?;
    let eligible = land_use.eligible_cells();
    let mut out = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.master_seed, 0));
    let expected = spec.background_rate * window.length();
    let n_background = if expected > 0.0 {
        Poisson::new(expected)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    for m in 0..n_background {
        let (x, y, t) = uniform_in_eligible(&mut rng, grid, &eligible, window);
        out.push(Incident::new(format!("bg-{m:06}"), x, y, t));
    }

    for (k, cluster) in spec.clusters.iter().enumerate() {
        let start = cluster.extent.start().max(window.start());
        let end = cluster.extent.end().min(window.end());
        if cluster.count > 0 && start >= end {
            return Err(Error::InvalidArgument(format!(
                "cluster {k} extent does not overlap the time window"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.master_seed, k as u64 + 1));
        let normal = Normal::new(0.0, cluster.spread).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for m in 0..cluster.count {
            let t = (start + rng.random::<f64>() * (end - start)).min(end.next_down());
            let (cx, cy) = cluster.center_at(t);
            let mut placed = None;
            for _ in 0..MAX_REJECTIONS {
                let x = cx + normal.sample(&mut rng);
                let y = cy + normal.sample(&mut rng);
                if let Some((i, j)) = grid.world_to_cell(x, y) {
                    if land_use.class_at(i, j) == LandUse::Eligible {
                        placed = Some((x, y));
                        break;
                    }
                }
            }
            let (x, y) = placed.ok_or(Error::RejectionLimit {
                cluster: k,
                retries: MAX_REJECTIONS,
            })?;
            out.push(Incident::new(format!("c{k}-{m:06}"), x, y, t));
        }
    }
    out.sort_by(canonical_cmp);
    Ok(out)
}

/// A moving hotspot and a static one over a uniform background.
///
/// The moving cluster circles the grid center once every `lap_days`, so
/// over a month of training it smears around a ring while over the last
/// days it sits in one arc. Rates are per day.
pub fn drifting_cluster_spec(grid: &GridSpec2D, window: TimeWindow, params: &DriftingParams, seed: u64) -> SynthProcessSpec {
    let cx = grid.x_origin() + grid.extent_x() / 2.0;
    let cy = grid.y_origin() + grid.extent_y() / 2.0;
    let radius = params.ring_fraction * grid.extent_x().min(grid.extent_y()) / 2.0;
    let steps = ((window.length() / params.lap_days) * 48.0).ceil().max(2.0) as usize;
    let trajectory = (0..=steps)
        .map(|s| {
            let t = window.start() + window.length() * s as f64 / steps as f64;
            let angle = std::f64::consts::TAU * (t - window.start()) / params.lap_days;
            (t, cx + radius * angle.cos(), cy + radius * angle.sin())
        })
        .collect();
    let days = window.length();
    SynthProcessSpec {
        background_rate: params.background_rate,
        clusters: vec![
            ClusterSpec {
                trajectory,
                spread: params.spread,
                extent: window,
                count: (params.moving_rate * days).round() as usize,
            },
            ClusterSpec::stationary(
                grid.x_origin() + grid.extent_x() * 0.8,
                grid.y_origin() + grid.extent_y() * 0.2,
                params.spread,
                window,
                (params.static_rate * days).round() as usize,
            ),
        ],
        master_seed: seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftingParams {
    pub background_rate: f64,
    pub moving_rate: f64,
    pub static_rate: f64,
    pub spread: f64,
    pub lap_days: f64,
    /// Ring radius as a fraction of half the shorter grid side.
    pub ring_fraction: f64,
}

impl Default for DriftingParams {
    fn default() -> Self {
        Self {
            background_rate: 2.0,
            moving_rate: 6.0,
            static_rate: 2.0,
            spread: 100.0,
            lap_days: 180.0,
            ring_fraction: 0.6,
        }
    }
}
