//! Bandwidth selection by likelihood cross-validation.
//!
//! The objective is the leave-one-out log-likelihood
//! `ln L = Σ_i ln f̂_{-i}(X_i, Y_i, T_i)`, where `f̂_{-i}` is the STKDE built
//! from every incident except `i`. It is maximized by an exhaustive
//! log-spaced lattice followed by Nelder–Mead refinement in log-bandwidth
//! space.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::domain::{canonical_cmp, Bandwidths, GridSpec2D, Incident};
use crate::error::{Error, Result};
use crate::kernels::{product_kernel_weight, KernelId};

/// Leave-one-out density at incident `i` (index into `incidents`).
pub fn loo_density(incidents: &[Incident], i: usize, bw: Bandwidths, kernel: KernelId) -> Result<f64> {
    let n = incidents.len();
    if n < 2 {
        return Err(Error::TooFewIncidents(n));
    }
    if i >= n {
        return Err(Error::InvalidArgument(format!(
            "incident index {i} out of range for {n} incidents"
        )));
    }
    let target = &incidents[i];
    let mut others: Vec<&Incident> = incidents
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, inc)| inc)
        .collect();
    others.sort_by(|a, b| canonical_cmp(a, b));
    let mut sum = 0.0;
    for other in others {
        sum += product_kernel_weight(
            target.x - other.x,
            target.y - other.y,
            target.t - other.t,
            &bw,
            kernel,
        );
    }
    Ok(sum / (n - 1) as f64)
}

pub fn loo_log_likelihood(incidents: &[Incident], bw: Bandwidths, kernel: KernelId) -> Result<f64> {
    Ok(LooObjective::new(incidents, kernel)?.log_likelihood(bw))
}

/// Leave-one-out objective with incidents held in canonical order.
#[derive(Debug, Clone)]
pub struct LooObjective {
    incidents: Vec<Incident>,
    kernel: KernelId,
}

impl LooObjective {
    pub fn new(incidents: &[Incident], kernel: KernelId) -> Result<Self> {
        if incidents.len() < 2 {
            return Err(Error::TooFewIncidents(incidents.len()));
        }
        let mut sorted = incidents.to_vec();
        sorted.sort_by(canonical_cmp);
        Ok(Self {
            incidents: sorted,
            kernel,
        })
    }

    pub fn len(&self) -> usize {
        self.incidents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incidents.is_empty()
    }

    /// Fraction of records sharing exact coordinates with an earlier record.
    pub fn duplicate_fraction(&self) -> f64 {
        let dups = self
            .incidents
            .windows(2)
            .filter(|w| w[0].t == w[1].t && w[0].x == w[1].x && w[0].y == w[1].y)
            .count();
        dups as f64 / self.incidents.len() as f64
    }

    /// `f̂_{-i}` for every incident, in canonical order.
    ///
    /// Incidents are bucketed into boxes one bandwidth wide on each axis, so
    /// only the 27 surrounding boxes can hold a nonzero term. Candidates are
    /// summed in canonical order, which makes each value equal to the full
    /// leave-one-out sum.
    pub fn loo_densities(&self, bw: Bandwidths) -> Vec<f64> {
        let n = self.incidents.len();
        let key = |inc: &Incident| -> (i64, i64, i64) {
            (
                (inc.x / bw.h_x()).floor() as i64,
                (inc.y / bw.h_y()).floor() as i64,
                (inc.t / bw.h_t()).floor() as i64,
            )
        };
        let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (idx, inc) in self.incidents.iter().enumerate() {
            buckets.entry(key(inc)).or_default().push(idx);
        }
        let divisor = (n - 1) as f64;

        (0..n)
            .into_par_iter()
            .map_init(Vec::new, |candidates: &mut Vec<usize>, i| {
                let target = &self.incidents[i];
                let (bx, by, bt) = key(target);
                candidates.clear();
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        for dt in -1..=1 {
                            if let Some(list) = buckets.get(&(bx + dx, by + dy, bt + dt)) {
                                candidates.extend(list.iter().copied().filter(|&j| j != i));
                            }
                        }
                    }
                }
                candidates.sort_unstable();
                let mut sum = 0.0;
                for &j in candidates.iter() {
                    let other = &self.incidents[j];
                    sum += product_kernel_weight(
                        target.x - other.x,
                        target.y - other.y,
                        target.t - other.t,
                        &bw,
                        self.kernel,
                    );
                }
                sum / divisor
            })
            .collect()
    }

    /// `ln L`, or negative infinity when any leave-one-out density is zero.
    pub fn log_likelihood(&self, bw: Bandwidths) -> f64 {
        let mut total = 0.0;
        for d in self.loo_densities(bw) {
            if d <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += d.ln();
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSearchConfig {
    /// Lower bounds for `(h_x, h_y, h_t)`.
    pub lower: [f64; 3],
    /// Upper bounds for `(h_x, h_y, h_t)`.
    pub upper: [f64; 3],
    /// Log-spaced lattice points per axis.
    pub lattice: [usize; 3],
    /// Nelder–Mead iteration cap per start.
    pub refine_iterations: usize,
    /// Stop refining once the simplex objective spread falls below this
    /// fraction of the best objective.
    pub tolerance: f64,
    /// Number of best lattice points used as refinement starts.
    pub refine_starts: usize,
}

impl BandwidthSearchConfig {
    pub fn new(lower: [f64; 3], upper: [f64; 3]) -> Self {
        Self {
            lower,
            upper,
            lattice: [12; 3],
            refine_iterations: 200,
            tolerance: 1e-10,
            refine_starts: 3,
        }
    }

    /// Spatial bounds `[cell_size, extent / 2]`, temporal `[t_bin, training / 2]`.
    pub fn default_for(grid: &GridSpec2D, t_bin: f64, training_length: f64) -> Self {
        Self::new(
            [grid.cell_size(), grid.cell_size(), t_bin],
            [grid.extent_x() / 2.0, grid.extent_y() / 2.0, training_length / 2.0],
        )
    }

    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            let (lo, hi) = (self.lower[axis], self.upper[axis]);
            if !(lo > 0.0 && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "search bounds for axis {axis} must satisfy 0 < lower < upper, got [{lo}, {hi}]"
                )));
            }
            if self.lattice[axis] < 2 {
                return Err(Error::InvalidArgument(format!(
                    "lattice needs at least 2 points per axis, got {}",
                    self.lattice[axis]
                )));
            }
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidArgument("tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthResult {
    pub bw: Bandwidths,
    pub log_likelihood: f64,
    pub evaluations: usize,
    /// Every evaluated point, lattice first, in evaluation order.
    pub trace: Vec<(Bandwidths, f64)>,
}

/// Log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|m| {
            if m + 1 == count {
                hi
            } else {
                (a + (b - a) * m as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Every point of the log-spaced lattice, x slowest and t fastest.
pub fn lattice_points(lower: [f64; 3], upper: [f64; 3], counts: [usize; 3]) -> Vec<Bandwidths> {
    let xs = log_space(lower[0], upper[0], counts[0]);
    let ys = log_space(lower[1], upper[1], counts[1]);
    let ts = log_space(lower[2], upper[2], counts[2]);
    let mut out = Vec::with_capacity(xs.len() * ys.len() * ts.len());
    for &hx in &xs {
        for &hy in &ys {
            for &ht in &ts {
                out.push(Bandwidths::new(hx, hy, ht).expect("bounds are positive"));
            }
        }
    }
    out
}

struct Search<'a> {
    objective: &'a LooObjective,
    lower: [f64; 3],
    upper: [f64; 3],
    trace: Vec<(Bandwidths, f64)>,
}

impl Search<'_> {
    fn clamp(&self, p: [f64; 3]) -> [f64; 3] {
        let mut q = p;
        for (axis, v) in q.iter_mut().enumerate() {
            *v = v.clamp(self.lower[axis].ln(), self.upper[axis].ln());
        }
        q
    }

    /// Negated log-likelihood at a log-bandwidth point; +inf stands for ln 0.
    fn cost(&mut self, p: [f64; 3]) -> f64 {
        let bw = Bandwidths::new(p[0].exp(), p[1].exp(), p[2].exp()).expect("exp is positive");
        let ll = self.objective.log_likelihood(bw);
        self.trace.push((bw, ll));
        -ll
    }

    fn nelder_mead(&mut self, start: [f64; 3], step: [f64; 3], iterations: usize, tol: f64) {
        let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
        let start = self.clamp(start);
        let f0 = self.cost(start);
        simplex.push((start, f0));
        for axis in 0..3 {
            let mut p = start;
            p[axis] += step[axis];
            if p[axis] > self.upper[axis].ln() {
                p[axis] = start[axis] - step[axis];
            }
            let p = self.clamp(p);
            let f = self.cost(p);
            simplex.push((p, f));
        }

        for _ in 0..iterations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[3].1);
            if best.is_finite() && worst.is_finite() && (worst - best) <= tol * best.abs().max(1.0) {
                break;
            }
            let mut centroid = [0.0; 3];
            for (p, _) in &simplex[..3] {
                for axis in 0..3 {
                    centroid[axis] += p[axis] / 3.0;
                }
            }
            let along = |t: f64, from: [f64; 3]| -> [f64; 3] {
                let mut q = [0.0; 3];
                for axis in 0..3 {
                    q[axis] = centroid[axis] + t * (from[axis] - centroid[axis]);
                }
                q
            };
            let worst_p = simplex[3].0;
            let reflected = self.clamp(along(-1.0, worst_p));
            let fr = self.cost(reflected);
            if fr < simplex[0].1 {
                let expanded = self.clamp(along(-2.0, worst_p));
                let fe = self.cost(expanded);
                simplex[3] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                continue;
            }
            if fr < simplex[2].1 {
                simplex[3] = (reflected, fr);
                continue;
            }
            let (contracted, fc) = if fr < simplex[3].1 {
                let c = self.clamp(along(-0.5, worst_p));
                (c, self.cost(c))
            } else {
                let c = self.clamp(along(0.5, worst_p));
                (c, self.cost(c))
            };
            if fc < fr.min(simplex[3].1) {
                simplex[3] = (contracted, fc);
                continue;
            }
            let best_p = simplex[0].0;
            for entry in simplex.iter_mut().skip(1) {
                let mut q = [0.0; 3];
                for axis in 0..3 {
                    q[axis] = best_p[axis] + 0.5 * (entry.0[axis] - best_p[axis]);
                }
                let f = self.cost(q);
                *entry = (q, f);
            }
        }
    }
}

/// Maximizes the leave-one-out log-likelihood within the configured bounds.
pub fn optimize_bandwidths(
    incidents: &[Incident],
    config: &BandwidthSearchConfig,
    kernel: KernelId,
) -> Result<BandwidthResult> {
    config.validate()?;
    let objective = LooObjective::new(incidents, kernel)?;
    let dup = objective.duplicate_fraction();
    if dup > 0.10 {
        log::warn!(
            "{:.1}% of incidents duplicate another record's coordinates",
            dup * 100.0
        );
    }
    optimize_with(&objective, config)
}

pub fn optimize_with(objective: &LooObjective, config: &BandwidthSearchConfig) -> Result<BandwidthResult> {
    config.validate()?;
    let lattice = lattice_points(config.lower, config.upper, config.lattice);
    let scores: Vec<f64> = lattice
        .par_iter()
        .map(|bw| objective.log_likelihood(*bw))
        .collect();
    let mut trace: Vec<(Bandwidths, f64)> = lattice.iter().copied().zip(scores.iter().copied()).collect();

    let mut ranked: Vec<usize> = (0..lattice.len()).filter(|&m| scores[m].is_finite()).collect();
    if ranked.is_empty() {
        return Err(Error::AllLatticeInfeasible);
    }
    // Stable sort keeps lattice order among equal scores.
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let step: [f64; 3] = std::array::from_fn(|axis| {
        (config.upper[axis].ln() - config.lower[axis].ln()) / (config.lattice[axis] - 1) as f64
    });

    let mut search = Search {
        objective,
        lower: config.lower,
        upper: config.upper,
        trace: Vec::new(),
    };
    for &m in ranked.iter().take(config.refine_starts.max(1)) {
        let bw = lattice[m];
        let start = [bw.h_x().ln(), bw.h_y().ln(), bw.h_t().ln()];
        search.nelder_mead(start, step, config.refine_iterations, config.tolerance);
    }
    trace.extend(search.trace);

    let mut best = 0;
    for (m, entry) in trace.iter().enumerate() {
        if entry.1 > trace[best].1 {
            best = m;
        }
    }
    let (bw, ll) = trace[best];
    Ok(BandwidthResult {
        bw,
        log_likelihood: ll,
        evaluations: trace.len(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Bandwidths {
        Bandwidths::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn loo_density_examples() {
        let k = KernelId::Epanechnikov;
        let pair = [Incident::new("a", 0.0, 0.0, 0.0), Incident::new("b", 0.5, 0.0, 0.0)];
        assert_eq!(loo_density(&pair, 0, unit(), k).unwrap(), 0.31640625);
        let dup = [Incident::new("a", 0.0, 0.0, 0.0), Incident::new("b", 0.0, 0.0, 0.0)];
        assert_eq!(loo_density(&dup, 0, unit(), k).unwrap(), 0.421875);
        let isolated = [
            Incident::new("a", 0.0, 0.0, 0.0),
            Incident::new("b", 0.5, 0.0, 0.0),
            Incident::new("c", 5.0, 0.0, 0.0),
        ];
        assert_eq!(loo_density(&isolated, 2, unit(), k).unwrap(), 0.0);
        assert!(matches!(
            loo_density(&pair[..1], 0, unit(), k),
            Err(Error::TooFewIncidents(1))
        ));
    }

    #[test]
    fn log_likelihood_examples() {
        let k = KernelId::Epanechnikov;
        let pair = [Incident::new("a", 0.0, 0.0, 0.0), Incident::new("b", 0.5, 0.0, 0.0)];
        let ll = loo_log_likelihood(&pair, unit(), k).unwrap();
        assert!((ll - 2.0 * 0.31640625f64.ln()).abs() < 1e-15);
        assert!((ll - (-2.30146)).abs() < 1e-5);
        let isolated = [
            Incident::new("a", 0.0, 0.0, 0.0),
            Incident::new("b", 0.5, 0.0, 0.0),
            Incident::new("c", 5.0, 0.0, 0.0),
        ];
        assert_eq!(loo_log_likelihood(&isolated, unit(), k).unwrap(), f64::NEG_INFINITY);
        assert!(loo_log_likelihood(&pair[..1], unit(), k).is_err());
    }

    #[test]
    fn bucketed_densities_match_direct_sum() {
        let k = KernelId::Epanechnikov;
        let incs: Vec<Incident> = (0..80)
            .map(|n| {
                let f = n as f64;
                Incident::new(format!("i{n}"), (f * 37.1) % 300.0 - 150.0, (f * 53.7) % 200.0, (f * 7.3) % 40.0)
            })
            .collect();
        let bw = Bandwidths::new(60.0, 45.0, 9.0).unwrap();
        let obj = LooObjective::new(&incs, k).unwrap();
        let fast = obj.loo_densities(bw);
        let mut sorted = incs.clone();
        sorted.sort_by(canonical_cmp);
        for (i, v) in fast.iter().enumerate() {
            assert_eq!(*v, loo_density(&sorted, i, bw, k).unwrap());
        }
    }

    #[test]
    fn log_space_hits_both_ends() {
        let v = log_space(2.0, 200.0, 3);
        assert_eq!(v[0], 2.0);
        assert!((v[1] - 20.0).abs() < 1e-12);
        assert_eq!(v[2], 200.0);
    }

    #[test]
    fn config_validation() {
        let mut c = BandwidthSearchConfig::new([1.0; 3], [2.0; 3]);
        assert!(c.validate().is_ok());
        c.lattice = [1, 2, 2];
        assert!(c.validate().is_err());
        let c = BandwidthSearchConfig::new([2.0, 1.0, 1.0], [1.0, 2.0, 2.0]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn all_infeasible_lattice_is_an_error() {
        let incs = [Incident::new("a", 0.0, 0.0, 0.0), Incident::new("b", 100.0, 0.0, 0.0)];
        let c = BandwidthSearchConfig::new([1.0; 3], [2.0; 3]);
        assert!(matches!(
            optimize_bandwidths(&incs, &c, KernelId::Epanechnikov),
            Err(Error::AllLatticeInfeasible)
        ));
    }
}
