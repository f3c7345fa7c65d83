//! Forecast evaluation: rolling prediction groups, hotspot selection,
//! hit rate, PAI and PAI curves, and method comparison.

mod compare;
pub mod pipeline;
pub mod stats;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::domain::{DensitySurface, GridSpec2D, Incident, LandUseGrid, TimeWindow};
use crate::error::{Error, Result};

pub use compare::{compare_methods, MethodComparison, MethodTests, OverallComparison, PairwiseTest, ScaleComparison};
pub use stats::{anova_one_way, welch_t_test, AnovaResult, TTestResult};

/// Mean Gregorian month in days, used when no calendar is available.
pub const MEAN_MONTH_DAYS: f64 = 30.4375;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Stkde,
    Skde,
    Promap,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Stkde, Method::Skde, Method::Promap];

    pub fn name(self) -> &'static str {
        match self {
            Method::Stkde => "STKDE",
            Method::Skde => "SKDE",
            Method::Promap => "PROMAP",
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            Method::Stkde => 1,
            Method::Skde => 2,
            Method::Promap => 3,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "STKDE" => Ok(Method::Stkde),
            "SKDE" => Ok(Method::Skde),
            "PROMAP" => Ok(Method::Promap),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// One rolling train/test pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionGroup {
    pub index: usize,
    pub training: TimeWindow,
    pub forecast: TimeWindow,
}

impl PredictionGroup {
    pub fn new(index: usize, training: TimeWindow, forecast: TimeWindow) -> Result<Self> {
        if index == 0 {
            return Err(Error::InvalidArgument("prediction groups are numbered from 1".into()));
        }
        if training.end() > forecast.start() {
            return Err(Error::InvalidArgument(format!(
                "group {index}: training ends at {} after the forecast starts at {}",
                training.end(),
                forecast.start()
            )));
        }
        Ok(Self {
            index,
            training,
            forecast,
        })
    }
}

/// Consecutive forecast windows of length `horizon`, each trained on the
/// `training_length` days immediately before it.
pub fn build_prediction_groups(
    data_window: TimeWindow,
    first_forecast_start: f64,
    horizon: f64,
    training_length: f64,
    group_count: usize,
) -> Result<Vec<PredictionGroup>> {
    if !(horizon > 0.0 && training_length > 0.0) || !first_forecast_start.is_finite() {
        return Err(Error::InvalidArgument(
            "horizon and training length must be positive".into(),
        ));
    }
    if group_count == 0 {
        return Err(Error::InvalidArgument("group count must be positive".into()));
    }
    (1..=group_count)
        .map(|g| {
            let start = first_forecast_start + (g - 1) as f64 * horizon;
            let forecast = TimeWindow::new(start, start + horizon)?;
            let training = TimeWindow::new(start - training_length, start)?;
            if training.start() < data_window.start() || forecast.end() > data_window.end() {
                return Err(Error::GroupsExceedWindow(format!(
                    "group {g} spans [{}, {}) outside [{}, {})",
                    training.start(),
                    forecast.end(),
                    data_window.start(),
                    data_window.end()
                )));
            }
            PredictionGroup::new(g, training, forecast)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotspotSelection {
    /// Selected cells, highest density first.
    pub cells: Vec<usize>,
    pub target: usize,
    pub feasible: bool,
}

fn target_cells(area_pct: f64, study_cells: usize) -> usize {
    // The small offset rounds values like 12.4999999999 (from 0.1-step scales) up.
    (area_pct * study_cells as f64 / 100.0 + 1e-9).round() as usize
}

/// Significant in-study cells ranked by density (descending), ties by index.
fn ranked_candidates(
    surface: &DensitySurface,
    significant: &[bool],
    land_use: &LandUseGrid,
) -> Result<Vec<usize>> {
    if !surface.spec().aligned_with(land_use.spec()) {
        return Err(Error::Misaligned("surface and land use grids differ".into()));
    }
    if significant.len() != surface.values().len() {
        return Err(Error::Misaligned(format!(
            "significance mask has {} cells, surface has {}",
            significant.len(),
            surface.values().len()
        )));
    }
    let values = surface.values();
    let classes = land_use.classes();
    let mut candidates: Vec<usize> = (0..values.len())
        .filter(|&c| significant[c] && classes[c].in_study())
        .collect();
    candidates.sort_by(|&a, &b| match values[b].total_cmp(&values[a]) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    Ok(candidates)
}

fn check_area_pct(area_pct: f64) -> Result<()> {
    if area_pct > 0.0 && area_pct <= 100.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "area percentage must lie in (0, 100], got {area_pct}"
        )))
    }
}

/// Top-density significant in-study cells covering `area_pct` of the study area.
pub fn select_hotspots(
    surface: &DensitySurface,
    significant: &[bool],
    land_use: &LandUseGrid,
    area_pct: f64,
) -> Result<HotspotSelection> {
    check_area_pct(area_pct)?;
    let mut candidates = ranked_candidates(surface, significant, land_use)?;
    let target = target_cells(area_pct, land_use.study_cell_count());
    let feasible = candidates.len() >= target;
    candidates.truncate(target);
    Ok(HotspotSelection {
        cells: candidates,
        target,
        feasible,
    })
}

/// Captured and total test incidents; only incidents inside the grid count.
pub fn hit_counts(hotspots: &[usize], test_incidents: &[Incident], spec: &GridSpec2D) -> Result<(usize, usize)> {
    let mut member = vec![false; spec.cell_count()];
    for &c in hotspots {
        if c >= member.len() {
            return Err(Error::Misaligned(format!("hotspot cell {c} is outside the grid")));
        }
        member[c] = true;
    }
    let mut captured = 0;
    let mut total = 0;
    for inc in test_incidents {
        if let Some((i, j)) = spec.world_to_cell(inc.x, inc.y) {
            total += 1;
            if member[spec.index(i, j)] {
                captured += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::NoTestIncidents);
    }
    Ok((captured, total))
}

pub fn hit_rate(hotspots: &[usize], test_incidents: &[Incident], spec: &GridSpec2D) -> Result<f64> {
    let (n, total) = hit_counts(hotspots, test_incidents, spec)?;
    Ok(n as f64 / total as f64)
}

/// Predictive accuracy index: hit rate over the hotspot area fraction.
pub fn pai(hit_rate: f64, area_fraction: f64) -> Result<f64> {
    if !(area_fraction > 0.0 && area_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "area fraction must lie in (0, 1], got {area_fraction}"
        )));
    }
    Ok(hit_rate / area_fraction)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaiPoint {
    pub area_pct: f64,
    pub hotspot_cells: usize,
    /// `None` when no feasible value exists at this scale.
    pub hit_rate: Option<f64>,
    pub pai: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PaiCurve {
    pub points: Vec<PaiPoint>,
}

impl PaiCurve {
    pub fn feasible_points(&self) -> impl Iterator<Item = &PaiPoint> {
        self.points.iter().filter(|p| p.feasible)
    }

    pub fn point_at(&self, area_pct: f64) -> Option<&PaiPoint> {
        self.points.iter().find(|p| (p.area_pct - area_pct).abs() < 1e-9)
    }

    pub fn same_lattice(&self, other: &PaiCurve) -> bool {
        self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| a.area_pct == b.area_pct)
    }
}

/// Area scales `scale_min + k * step` for `k = 1..`, up to `scale_max`,
/// rounded to 1e-9 so decimal steps print cleanly.
pub fn scale_lattice(scale_min: f64, scale_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(scale_min >= 0.0) || !(scale_max <= 100.0) || scale_max <= scale_min {
        return Err(Error::InvalidArgument(format!(
            "invalid scale sweep: min {scale_min}, max {scale_max}, step {step}"
        )));
    }
    let count = ((scale_max - scale_min) / step + 1e-9).floor() as usize;
    Ok((1..=count)
        .map(|k| ((scale_min + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Hit rate and PAI swept over area scales. Hotspot sets are nested, so the
/// hit rate never decreases across feasible points.
pub fn pai_curve(
    surface: &DensitySurface,
    significant: &[bool],
    land_use: &LandUseGrid,
    test_incidents: &[Incident],
    scales: &[f64],
) -> Result<PaiCurve> {
    let spec = surface.spec();
    let ranked = ranked_candidates(surface, significant, land_use)?;
    let mut per_cell = vec![0usize; spec.cell_count()];
    let mut total = 0usize;
    for inc in test_incidents {
        if let Some((i, j)) = spec.world_to_cell(inc.x, inc.y) {
            per_cell[spec.index(i, j)] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoTestIncidents);
    }
    let mut captured_prefix = Vec::with_capacity(ranked.len() + 1);
    captured_prefix.push(0usize);
    for &c in &ranked {
        captured_prefix.push(captured_prefix.last().unwrap() + per_cell[c]);
    }

    let study = land_use.study_cell_count();
    let mut points = Vec::with_capacity(scales.len());
    for &area_pct in scales {
        check_area_pct(area_pct)?;
        let target = target_cells(area_pct, study);
        if target <= ranked.len() {
            let hr = captured_prefix[target] as f64 / total as f64;
            points.push(PaiPoint {
                area_pct,
                hotspot_cells: target,
                hit_rate: Some(hr),
                pai: Some(pai(hr, area_pct / 100.0)?),
                feasible: true,
            });
        } else {
            points.push(PaiPoint {
                area_pct,
                hotspot_cells: ranked.len(),
                hit_rate: None,
                pai: None,
                feasible: false,
            });
        }
    }
    Ok(PaiCurve { points })
}

/// Per-scale mean over the curves feasible at that scale. A consolidated
/// scale is feasible only when every input curve is.
pub fn consolidate_curves(curves: &[PaiCurve]) -> Result<PaiCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidArgument("no curves to consolidate".into()))?;
    if let Some(bad) = curves.iter().position(|c| !c.same_lattice(first)) {
        return Err(Error::LatticeMismatch(format!("curve {bad} differs from curve 0")));
    }
    let points = (0..first.points.len())
        .map(|s| {
            let at: Vec<&PaiPoint> = curves.iter().map(|c| &c.points[s]).collect();
            let area_pct = at[0].area_pct;
            let hits: Vec<f64> = at.iter().filter(|p| p.feasible).filter_map(|p| p.hit_rate).collect();
            let mean_hit = if hits.is_empty() {
                None
            } else {
                Some(hits.iter().sum::<f64>() / hits.len() as f64)
            };
            PaiPoint {
                area_pct,
                hotspot_cells: at.iter().map(|p| p.hotspot_cells).min().unwrap_or(0),
                hit_rate: mean_hit,
                // Same denominator at every curve, so this is the mean PAI.
                pai: mean_hit.map(|h| h / (area_pct / 100.0)),
                feasible: at.iter().all(|p| p.feasible),
            }
        })
        .collect();
    Ok(PaiCurve { points })
}
