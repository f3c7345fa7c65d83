//! Monte-Carlo significance testing against a null of uniformly placed
//! incidents on eligible land use.
//!
//! Replicate `r` draws its incidents from a generator seeded with
//! `derive_seed(master_seed, r)`, so an ensemble is the same under any
//! worker count or schedule.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{
    Bandwidths, DensitySurface, DensityVolume, GridSpec2D, GridSpec3D, Incident, LandUseGrid,
    TimeWindow,
};
use crate::error::{Error, Result};
use crate::estimators::stkde_volume;
use crate::kernels::KernelId;

pub const DEFAULT_REPLICATES: usize = 1000;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Stateless 64-bit seed derivation (SplitMix64 finalizer over both inputs).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(master.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Draws `n` incidents uniformly over the eligible cells and `window`.
pub fn simulate_null_incidents(
    n: usize,
    land_use: &LandUseGrid,
    window: TimeWindow,
    seed: u64,
) -> Result<Vec<Incident>> {
    if n == 0 {
        return Err(Error::InvalidArgument("null sample size must be positive".into()));
    }
    let eligible = land_use.eligible_cells();
    if eligible.is_empty() {
        return Err(Error::NoEligibleCells);
    }
    let spec = land_use.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|m| {
            let (x, y, t) = uniform_in_eligible(&mut rng, spec, &eligible, window);
            Incident::new(format!("null-{m}"), x, y, t)
        })
        .collect())
}

/// One uniform draw: a cell from `eligible`, a position inside its footprint
/// and a time inside `window`.
pub(crate) fn uniform_in_eligible<R: Rng>(
    rng: &mut R,
    spec: &GridSpec2D,
    eligible: &[usize],
    window: TimeWindow,
) -> (f64, f64, f64) {
    let cell = eligible[rng.random_range(0..eligible.len())];
    let (i, j) = spec.cell_of_index(cell);
    let x0 = spec.x_origin() + i as f64 * spec.cell_size();
    let y0 = spec.y_origin() + j as f64 * spec.cell_size();
    let x = x0 + rng.random::<f64>() * spec.cell_size();
    let y = y0 + rng.random::<f64>() * spec.cell_size();
    let t = window.start() + rng.random::<f64>() * window.length();
    // Rounding can land exactly on an exclusive upper edge.
    (
        x.min(next_down(x0 + spec.cell_size())),
        y.min(next_down(y0 + spec.cell_size())),
        t.min(next_down(window.end())),
    )
}

fn next_down(v: f64) -> f64 {
    if v > 0.0 {
        f64::from_bits(v.to_bits() - 1)
    } else if v < 0.0 {
        f64::from_bits(v.to_bits() + 1)
    } else {
        -f64::from_bits(1)
    }
}

/// Which raster a null ensemble and its classification live on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RasterGrid {
    Volume(GridSpec3D),
    Surface(GridSpec2D),
}

impl RasterGrid {
    pub fn cell_count(&self) -> usize {
        match self {
            RasterGrid::Volume(s) => s.voxel_count(),
            RasterGrid::Surface(s) => s.cell_count(),
        }
    }
}

/// Rasters that can be tested against a null ensemble.
pub trait Raster {
    fn grid(&self) -> RasterGrid;
    fn raster_values(&self) -> &[f64];
}

impl Raster for DensityVolume {
    fn grid(&self) -> RasterGrid {
        RasterGrid::Volume(*self.spec())
    }
    fn raster_values(&self) -> &[f64] {
        self.values()
    }
}

impl Raster for DensitySurface {
    fn grid(&self) -> RasterGrid {
        RasterGrid::Surface(*self.spec())
    }
    fn raster_values(&self) -> &[f64] {
        self.values()
    }
}

/// Level at which significance is assessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignificanceLevel {
    /// Per space-time voxel.
    Voxel,
    /// Per spatial cell after integrating over time.
    #[default]
    Cell,
}

/// Per-cell sorted null samples.
#[derive(Debug, Clone, PartialEq)]
pub struct NullEnsemble {
    grid: RasterGrid,
    replicates: usize,
    master_seed: u64,
    /// Cell-major: samples of cell `c` are `samples[c * R..(c + 1) * R]`, ascending.
    samples: Vec<f64>,
}

impl NullEnsemble {
    /// Runs `replicate(r, seed)` for every `r < replicates` and collates the
    /// resulting rasters per cell.
    pub fn from_replicates<F>(
        grid: RasterGrid,
        replicates: usize,
        master_seed: u64,
        replicate: F,
    ) -> Result<Self>
    where
        F: Fn(usize, u64) -> Result<Vec<f64>> + Sync,
    {
        if replicates == 0 {
            return Err(Error::InvalidArgument("replicate count must be at least 1".into()));
        }
        let cells = grid.cell_count();
        let rasters: Vec<Vec<f64>> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let raster = replicate(r, derive_seed(master_seed, r as u64))?;
                if raster.len() != cells {
                    return Err(Error::Misaligned(format!(
                        "replicate {r} produced {} values for {cells} cells",
                        raster.len()
                    )));
                }
                Ok(raster)
            })
            .collect::<Result<_>>()?;

        let mut samples = vec![0.0; cells * replicates];
        samples
            .par_chunks_mut(replicates)
            .enumerate()
            .for_each(|(c, chunk)| {
                for (r, raster) in rasters.iter().enumerate() {
                    chunk[r] = raster[c];
                }
                chunk.sort_by(f64::total_cmp);
            });
        Ok(Self {
            grid,
            replicates,
            master_seed,
            samples,
        })
    }

    pub fn grid(&self) -> RasterGrid {
        self.grid
    }
    pub fn replicates(&self) -> usize {
        self.replicates
    }
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Sorted null samples for cell `c`.
    pub fn samples(&self, c: usize) -> &[f64] {
        &self.samples[c * self.replicates..(c + 1) * self.replicates]
    }

    /// Empirical `(1 - alpha)` quantile of cell `c`: the smallest sample
    /// with at least that fraction of samples at or below it.
    pub fn critical_value(&self, c: usize, alpha: f64) -> f64 {
        let r = self.replicates as f64;
        // Guard against 0.95 * 1000 evaluating to 950.0000000000001.
        let rank = ((1.0 - alpha) * r - 1e-9).ceil().clamp(1.0, r) as usize;
        self.samples(c)[rank - 1]
    }
}

/// Null ensemble of STKDE rasters; `level` chooses voxels or time-integrated cells.
#[allow(clippy::too_many_arguments)]
pub fn build_null_ensemble(
    n: usize,
    land_use: &LandUseGrid,
    window: TimeWindow,
    spec: &GridSpec3D,
    bw: Bandwidths,
    kernel: KernelId,
    replicates: usize,
    master_seed: u64,
    level: SignificanceLevel,
) -> Result<NullEnsemble> {
    if !spec.spatial().aligned_with(land_use.spec()) {
        return Err(Error::Misaligned("land use and volume grids differ".into()));
    }
    let grid = match level {
        SignificanceLevel::Voxel => RasterGrid::Volume(*spec),
        SignificanceLevel::Cell => RasterGrid::Surface(*spec.spatial()),
    };
    NullEnsemble::from_replicates(grid, replicates, master_seed, |_, seed| {
        let incidents = simulate_null_incidents(n, land_use, window, seed)?;
        let volume = stkde_volume(&incidents, spec, bw, kernel)?;
        Ok(match level {
            SignificanceLevel::Voxel => volume.into_values(),
            SignificanceLevel::Cell => marginalize_time(&volume).into_values(),
        })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceResult {
    pub grid: RasterGrid,
    pub alpha: f64,
    pub p_values: Vec<f64>,
    pub significant: Vec<bool>,
}

impl SignificanceResult {
    pub fn significant_count(&self) -> usize {
        self.significant.iter().filter(|&&s| s).count()
    }
}

/// Flags cells whose observed value strictly exceeds the null `(1 - alpha)`
/// quantile. p-values are `(1 + #{null >= observed}) / (R + 1)`.
pub fn classify_significance<T: Raster + ?Sized>(
    observed: &T,
    ensemble: &NullEnsemble,
    alpha: f64,
) -> Result<SignificanceResult> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 0.5], got {alpha}")));
    }
    if observed.grid() != ensemble.grid() {
        return Err(Error::Misaligned(
            "observed raster and null ensemble use different grids".into(),
        ));
    }
    let values = observed.raster_values();
    let r = ensemble.replicates();
    let mut p_values = Vec::with_capacity(values.len());
    let mut significant = Vec::with_capacity(values.len());
    for (c, &obs) in values.iter().enumerate() {
        let samples = ensemble.samples(c);
        let at_or_above = r - samples.partition_point(|&v| v < obs);
        p_values.push((1 + at_or_above) as f64 / (r + 1) as f64);
        significant.push(obs > ensemble.critical_value(c, alpha));
    }
    Ok(SignificanceResult {
        grid: ensemble.grid(),
        alpha,
        p_values,
        significant,
    })
}

/// Integrates a volume over time: `surface[i, j] = Σ_k volume[i, j, k] · t_bin`.
pub fn marginalize_time(volume: &DensityVolume) -> DensitySurface {
    let spec = volume.spec();
    let cells = spec.spatial().cell_count();
    let mut values = vec![0.0; cells];
    for k in 0..spec.n_bins() {
        for (acc, v) in values.iter_mut().zip(volume.slice(k)) {
            *acc += v;
        }
    }
    for v in values.iter_mut() {
        *v *= spec.t_bin();
    }
    DensitySurface::new(*spec.spatial(), values).expect("sums of nonnegative values")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::LandUse;

    fn surface_ensemble(samples_per_cell: &[Vec<f64>]) -> (GridSpec2D, NullEnsemble) {
        let spec = GridSpec2D::new(0.0, 0.0, 1.0, samples_per_cell.len(), 1).unwrap();
        let r = samples_per_cell[0].len();
        let ens = NullEnsemble::from_replicates(RasterGrid::Surface(spec), r, 0, |rep, _| {
            Ok(samples_per_cell.iter().map(|s| s[rep]).collect())
        })
        .unwrap();
        (spec, ens)
    }

    #[test]
    fn p_value_with_no_exceedances() {
        let nulls: Vec<f64> = (0..999).map(|v| v as f64 / 1000.0).collect();
        let (spec, ens) = surface_ensemble(&[nulls]);
        let obs = DensitySurface::new(spec, vec![5.0]).unwrap();
        let res = classify_significance(&obs, &ens, 0.05).unwrap();
        assert_eq!(res.p_values[0], 0.001);
        assert!(res.significant[0]);
    }

    #[test]
    fn p_value_with_49_exceedances() {
        // 951 nulls below the observed value, 49 above.
        let nulls: Vec<f64> = (0..1000).map(|v| if v < 951 { 0.5 } else { 2.0 }).collect();
        let (spec, ens) = surface_ensemble(&[nulls]);
        let obs = DensitySurface::new(spec, vec![1.0]).unwrap();
        let res = classify_significance(&obs, &ens, 0.05).unwrap();
        assert!((res.p_values[0] - 50.0 / 1001.0).abs() < 1e-15);
        assert!((res.p_values[0] - 0.04995).abs() < 1e-5);
        assert!(res.significant[0]);
    }

    #[test]
    fn ties_are_not_significant() {
        let (spec, ens) = surface_ensemble(&[vec![3.0; 20]]);
        let obs = DensitySurface::new(spec, vec![3.0]).unwrap();
        let res = classify_significance(&obs, &ens, 0.05).unwrap();
        assert!(!res.significant[0]);
        assert_eq!(res.p_values[0], 1.0);
    }

    #[test]
    fn misaligned_rasters_are_rejected() {
        let (_, ens) = surface_ensemble(&[vec![1.0, 2.0]]);
        let other = DensitySurface::zeros(GridSpec2D::new(0.0, 0.0, 2.0, 1, 1).unwrap());
        assert!(matches!(
            classify_significance(&other, &ens, 0.05),
            Err(Error::Misaligned(_))
        ));
        let (spec, ens) = surface_ensemble(&[vec![1.0, 2.0]]);
        let obs = DensitySurface::zeros(spec);
        assert!(classify_significance(&obs, &ens, 0.0).is_err());
        assert!(classify_significance(&obs, &ens, 0.6).is_err());
    }

    #[test]
    fn single_eligible_cell_holds_every_draw() {
        let spec = GridSpec2D::new(100.0, 200.0, 50.0, 3, 3).unwrap();
        let mut classes = vec![LandUse::InStudyNonEligible; 9];
        classes[5] = LandUse::Eligible; // (2, 1)
        let lu = LandUseGrid::new(spec, classes).unwrap();
        let window = TimeWindow::new(10.0, 20.0).unwrap();
        let incs = simulate_null_incidents(500, &lu, window, 9).unwrap();
        assert_eq!(incs.len(), 500);
        for inc in &incs {
            assert_eq!(spec.world_to_cell(inc.x, inc.y), Some((2, 1)));
            assert!(window.contains(inc.t));
        }
        assert_eq!(incs, simulate_null_incidents(500, &lu, window, 9).unwrap());
        assert_ne!(incs, simulate_null_incidents(500, &lu, window, 10).unwrap());
    }

    #[test]
    fn marginalize_sums_slices() {
        let spec = GridSpec3D::new(GridSpec2D::new(0.0, 0.0, 1.0, 1, 1).unwrap(), 0.0, 1.0, 3).unwrap();
        let vol = DensityVolume::new(spec, vec![0.1, 0.2, 0.3]).unwrap();
        let s = marginalize_time(&vol);
        assert!((s.values()[0] - 0.6).abs() < 1e-15);
        let zero = marginalize_time(&DensityVolume::zeros(spec));
        assert_eq!(zero.values(), &[0.0]);
    }

    #[test]
    fn single_replicate_ensemble() {
        let spec3 = GridSpec3D::new(GridSpec2D::new(0.0, 0.0, 10.0, 4, 4).unwrap(), 0.0, 1.0, 2).unwrap();
        let lu = LandUseGrid::all_eligible(*spec3.spatial());
        let bw = Bandwidths::new(15.0, 15.0, 1.0).unwrap();
        let window = TimeWindow::new(0.0, 2.0).unwrap();
        let ens = build_null_ensemble(
            20, &lu, window, &spec3, bw, KernelId::Epanechnikov, 1, 3, SignificanceLevel::Voxel,
        )
        .unwrap();
        assert_eq!(ens.replicates(), 1);
        for c in 0..spec3.voxel_count() {
            assert_eq!(ens.samples(c).len(), 1);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|r| derive_seed(7, r)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
