//! End-to-end rolling evaluation: bandwidths, per-group surfaces, null
//! ensembles, significance masks and PAI curves for each method.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{compare_methods, consolidate_curves, pai_curve, Method, MethodComparison, PaiCurve, PredictionGroup};
use crate::bandwidth::{optimize_bandwidths, BandwidthResult, BandwidthSearchConfig};
use crate::domain::{incidents_in, Bandwidths, DensitySurface, GridSpec3D, Incident, LandUseGrid, TimeWindow};
use crate::error::{Error, Result};
use crate::estimators::{promap_surface, skde_surface, stkde_volume, PromapParams};
use crate::kernels::KernelId;
use crate::significance::{
    build_null_ensemble, classify_significance, derive_seed, marginalize_time, simulate_null_incidents,
    NullEnsemble, RasterGrid, SignificanceLevel,
};

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthChoice {
    Fixed(Bandwidths),
    /// Searched on all incidents before the first forecast window.
    Search(BandwidthSearchConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationConfig {
    pub groups: Vec<PredictionGroup>,
    pub methods: Vec<Method>,
    pub bandwidths: BandwidthChoice,
    pub kernel: KernelId,
    /// Time bin of the STKDE forecast volume, in days.
    pub t_bin: f64,
    pub replicates: usize,
    pub alpha: f64,
    pub master_seed: u64,
    /// Where STKDE significance is assessed; SKDE and ProMap always use cells.
    pub level: SignificanceLevel,
    /// Defaults to [`PromapParams::defaults`] for the grid's cell size.
    pub promap: Option<PromapParams>,
    pub scales: Vec<f64>,
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::InvalidArgument("no prediction groups configured".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        if !(self.t_bin > 0.0 && self.t_bin.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_bin must be positive, got {}", self.t_bin)));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicate count must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 0.5], got {}", self.alpha)));
        }
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s > 0.0 && s <= 100.0)) {
            return Err(Error::InvalidArgument("area scales must lie in (0, 100]".into()));
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("area scales must be strictly increasing".into()));
        }
        if let Some(p) = &self.promap {
            p.validate()?;
        }
        if let BandwidthChoice::Search(s) = &self.bandwidths {
            s.validate()?;
        }
        Ok(())
    }
}

/// One method's output for one prediction group.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub surface: DensitySurface,
    pub p_values: Vec<f64>,
    pub significant: Vec<bool>,
    pub curve: PaiCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRun {
    pub group: PredictionGroup,
    pub training_count: usize,
    pub test_count: usize,
    pub methods: BTreeMap<Method, MethodRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub bandwidths: Bandwidths,
    pub search: Option<BandwidthResult>,
    pub groups: Vec<GroupRun>,
    pub consolidated: BTreeMap<Method, PaiCurve>,
    pub comparison: MethodComparison,
}

impl EvaluationResult {
    pub fn curves(&self) -> BTreeMap<Method, Vec<PaiCurve>> {
        let mut out: BTreeMap<Method, Vec<PaiCurve>> = BTreeMap::new();
        for g in &self.groups {
            for (m, run) in &g.methods {
                out.entry(*m).or_default().push(run.curve.clone());
            }
        }
        out
    }
}

pub fn run_evaluation(
    incidents: &[Incident],
    land_use: &LandUseGrid,
    config: &EvaluationConfig,
) -> Result<EvaluationResult> {
    config.validate()?;
    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();

    let (bandwidths, search) = match &config.bandwidths {
        BandwidthChoice::Fixed(bw) => (*bw, None),
        BandwidthChoice::Search(search_config) => {
            let first = config
                .groups
                .iter()
                .map(|g| g.forecast.start())
                .fold(f64::INFINITY, f64::min);
            let history: Vec<Incident> = incidents.iter().filter(|i| i.t < first).cloned().collect();
            let result = optimize_bandwidths(&history, search_config, config.kernel)?;
            log::info!(
                "bandwidths ({:.3}, {:.3}, {:.3}), ln L = {:.6}",
                result.bw.h_x(),
                result.bw.h_y(),
                result.bw.h_t(),
                result.log_likelihood
            );
            (result.bw, Some(result))
        }
    };

    let groups: Vec<GroupRun> = config
        .groups
        .par_iter()
        .map(|g| run_group(g, incidents, land_use, config, &methods, bandwidths))
        .collect::<Result<_>>()?;

    let mut per_method: BTreeMap<Method, Vec<PaiCurve>> = BTreeMap::new();
    for g in &groups {
        for (m, run) in &g.methods {
            per_method.entry(*m).or_default().push(run.curve.clone());
        }
    }
    let consolidated = per_method
        .iter()
        .map(|(m, cs)| Ok((*m, consolidate_curves(cs)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let comparison = compare_methods(&per_method)?;

    Ok(EvaluationResult {
        bandwidths,
        search,
        groups,
        consolidated,
        comparison,
    })
}

fn forecast_volume_spec(land_use: &LandUseGrid, forecast: TimeWindow, t_bin: f64) -> Result<GridSpec3D> {
    let n_bins = ((forecast.length() / t_bin) - 1e-9).ceil().max(1.0) as usize;
    GridSpec3D::new(*land_use.spec(), forecast.start(), t_bin, n_bins)
}

fn run_group(
    group: &PredictionGroup,
    incidents: &[Incident],
    land_use: &LandUseGrid,
    config: &EvaluationConfig,
    methods: &[Method],
    bw: Bandwidths,
) -> Result<GroupRun> {
    let training = incidents_in(incidents, group.training);
    let test = incidents_in(incidents, group.forecast);
    if training.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "group {} has no training incidents",
            group.index
        )));
    }
    let spec = *land_use.spec();
    let n = training.len();
    let group_seed = derive_seed(config.master_seed, group.index as u64);
    let promap = config.promap.unwrap_or_else(|| PromapParams::defaults(spec.cell_size()));
    let t_ref = group.forecast.start();

    let mut runs = BTreeMap::new();
    for &method in methods {
        let seed = derive_seed(group_seed, method.code());
        let (surface, p_values, significant) = match method {
            Method::Stkde => {
                let vspec = forecast_volume_spec(land_use, group.forecast, config.t_bin)?;
                let volume = stkde_volume(&training, &vspec, bw, config.kernel)?;
                let surface = marginalize_time(&volume);
                let ensemble = build_null_ensemble(
                    n,
                    land_use,
                    group.training,
                    &vspec,
                    bw,
                    config.kernel,
                    config.replicates,
                    seed,
                    config.level,
                )?;
                match config.level {
                    SignificanceLevel::Cell => {
                        let sig = classify_significance(&surface, &ensemble, config.alpha)?;
                        (surface, sig.p_values, sig.significant)
                    }
                    SignificanceLevel::Voxel => {
                        let sig = classify_significance(&volume, &ensemble, config.alpha)?;
                        let (p, s) = collapse_voxels(&sig.p_values, &sig.significant, spec.cell_count());
                        (surface, p, s)
                    }
                }
            }
            Method::Skde => {
                let h_s = bw.spatial_max();
                let surface = skde_surface(&training, &spec, h_s, config.kernel)?;
                let ensemble = NullEnsemble::from_replicates(
                    RasterGrid::Surface(spec),
                    config.replicates,
                    seed,
                    |_, s| {
                        let null = simulate_null_incidents(n, land_use, group.training, s)?;
                        Ok(skde_surface(&null, &spec, h_s, config.kernel)?.into_values())
                    },
                )?;
                let sig = classify_significance(&surface, &ensemble, config.alpha)?;
                (surface, sig.p_values, sig.significant)
            }
            Method::Promap => {
                let surface = promap_surface(&training, &spec, &promap, t_ref)?;
                let ensemble = NullEnsemble::from_replicates(
                    RasterGrid::Surface(spec),
                    config.replicates,
                    seed,
                    |_, s| {
                        let null = simulate_null_incidents(n, land_use, group.training, s)?;
                        Ok(promap_surface(&null, &spec, &promap, t_ref)?.into_values())
                    },
                )?;
                let sig = classify_significance(&surface, &ensemble, config.alpha)?;
                (surface, sig.p_values, sig.significant)
            }
        };
        let curve = pai_curve(&surface, &significant, land_use, &test, &config.scales)?;
        runs.insert(
            method,
            MethodRun {
                surface,
                p_values,
                significant,
                curve,
            },
        );
    }
    Ok(GroupRun {
        group: *group,
        training_count: n,
        test_count: test.len(),
        methods: runs,
    })
}

/// A cell is significant when any of its voxels is; its p-value is the
/// smallest voxel p-value.
fn collapse_voxels(p_values: &[f64], significant: &[bool], cells: usize) -> (Vec<f64>, Vec<bool>) {
    let mut p = vec![1.0f64; cells];
    let mut s = vec![false; cells];
    for (v, (&pv, &sv)) in p_values.iter().zip(significant).enumerate() {
        let c = v % cells;
        p[c] = p[c].min(pv);
        s[c] |= sv;
    }
    (p, s)
}
