use proptest::prelude::*;

use stkde::bandwidth::{optimize_bandwidths, BandwidthSearchConfig, LooObjective};
use stkde::estimators::{promap_surface, skde_surface, stkde_volume, stkde_volume_naive, PromapParams};
use stkde::evaluation::{consolidate_curves, pai_curve, scale_lattice, select_hotspots, PaiCurve};
use stkde::io::{format_ascii_grid, parse_ascii_grid, AsciiGrid};
use stkde::significance::{classify_significance, marginalize_time, NullEnsemble, RasterGrid};
use stkde::synth::{drifting_cluster_spec, generate_incidents, generate_landuse, DriftingParams};
use stkde::{
    Bandwidths, DensitySurface, DensityVolume, GridSpec2D, GridSpec3D, Incident, KernelId, LandUse, LandUseGrid,
    Point3, TimeWindow,
};

const K: KernelId = KernelId::Epanechnikov;

/// Integer-valued incidents, so shifts by integers are exact in floating point.
fn integer_incidents(max: usize) -> impl Strategy<Value = Vec<Incident>> {
    prop::collection::vec((0i32..160, 0i32..120, 0i32..40), 1..max).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(m, (x, y, t))| Incident::new(format!("p{m}"), x as f64, y as f64, t as f64))
            .collect()
    })
}

fn shifted(incidents: &[Incident], dx: f64, dy: f64, dt: f64) -> Vec<Incident> {
    incidents
        .iter()
        .map(|i| Incident::new(i.id.clone(), i.x + dx, i.y + dy, i.t + dt))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn voxel_index_is_translation_invariant(
        x in -1e4f64..1e4, y in -1e4f64..1e4, t in -100f64..100.0,
        sx in -500i32..500, sy in -500i32..500, st in -50i32..50,
    ) {
        let spec = GridSpec3D::new(GridSpec2D::new(-4096.0, -4096.0, 16.0, 512, 512).unwrap(), -128.0, 2.0, 128).unwrap();
        let moved = GridSpec3D::new(
            GridSpec2D::new(-4096.0 + sx as f64 * 16.0, -4096.0 + sy as f64 * 16.0, 16.0, 512, 512).unwrap(),
            -128.0 + st as f64 * 2.0, 2.0, 128,
        ).unwrap();
        // Snap to a 1/64 lattice so the shifted coordinates are exact.
        let snap = |v: f64| (v * 64.0).round() / 64.0;
        let p = Point3::new(snap(x), snap(y), snap(t));
        let q = Point3::new(p.x + sx as f64 * 16.0, p.y + sy as f64 * 16.0, p.t + st as f64 * 2.0);
        prop_assert_eq!(spec.world_to_voxel(p), moved.world_to_voxel(q));
    }

    #[test]
    fn estimators_are_translation_equivariant(
        incidents in integer_incidents(40),
        sx in -50i32..50, sy in -50i32..50, st in -20i32..20,
    ) {
        let (dx, dy, dt) = (sx as f64 * 8.0, sy as f64 * 8.0, st as f64);
        let spec2 = GridSpec2D::new(0.0, 0.0, 8.0, 20, 15).unwrap();
        let moved2 = GridSpec2D::new(dx, dy, 8.0, 20, 15).unwrap();
        let spec3 = GridSpec3D::new(spec2, 0.0, 4.0, 10).unwrap();
        let moved3 = GridSpec3D::new(moved2, dt, 4.0, 10).unwrap();
        let moved = shifted(&incidents, dx, dy, dt);
        let bw = Bandwidths::new(24.0, 16.0, 8.0).unwrap();

        let a = stkde_volume(&incidents, &spec3, bw, K).unwrap();
        let b = stkde_volume(&moved, &moved3, bw, K).unwrap();
        prop_assert_eq!(a.values(), b.values());
        prop_assert!(a.values().iter().all(|v| v.is_finite() && *v >= 0.0));

        let a = skde_surface(&incidents, &spec2, 20.0, K).unwrap();
        let b = skde_surface(&moved, &moved2, 20.0, K).unwrap();
        prop_assert_eq!(a.values(), b.values());

        let params = PromapParams { h_s: 30.0, h_t: 25.0, d_unit: 8.0, t_unit: 7.0 };
        let a = promap_surface(&incidents, &spec2, &params, 40.0).unwrap();
        let b = promap_surface(&moved, &moved2, &params, 40.0 + dt).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn fast_volume_matches_naive(
        incidents in prop::collection::vec((-20f64..180.0, -20f64..140.0, -5f64..45.0), 1..60),
        hx in 3f64..40.0, hy in 3f64..40.0, ht in 0.5f64..10.0,
    ) {
        let incidents: Vec<Incident> = incidents.into_iter().enumerate()
            .map(|(m, (x, y, t))| Incident::new(format!("q{m}"), x, y, t)).collect();
        let spec = GridSpec3D::new(GridSpec2D::new(0.0, 0.0, 7.5, 21, 17).unwrap(), 0.0, 2.5, 16).unwrap();
        let bw = Bandwidths::new(hx, hy, ht).unwrap();
        let fast = stkde_volume(&incidents, &spec, bw, K).unwrap();
        let naive = stkde_volume_naive(&incidents, &spec, bw, K).unwrap();
        for (a, b) in fast.values().iter().zip(naive.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn skde_ignores_time(incidents in integer_incidents(40), jitter in prop::collection::vec(-1e3f64..1e3, 40)) {
        let spec = GridSpec2D::new(0.0, 0.0, 8.0, 20, 15).unwrap();
        let retimed: Vec<Incident> = incidents.iter().zip(&jitter)
            .map(|(i, j)| Incident::new(i.id.clone(), i.x, i.y, i.t + j)).collect();
        prop_assert_eq!(
            skde_surface(&incidents, &spec, 25.0, K).unwrap(),
            skde_surface(&retimed, &spec, 25.0, K).unwrap()
        );
    }

    #[test]
    fn promap_adding_incidents(
        incidents in integer_incidents(30),
        x in 0f64..160.0, y in 0f64..120.0, t in 0f64..40.0,
        far_x in 200f64..400.0, old in 41f64..60.0,
    ) {
        let spec = GridSpec2D::new(0.0, 0.0, 8.0, 20, 15).unwrap();
        let params = PromapParams { h_s: 30.0, h_t: 20.0, d_unit: 8.0, t_unit: 7.0 };
        let t_ref = 60.0;
        let base = promap_surface(&incidents, &spec, &params, t_ref).unwrap();

        let mut inside = incidents.clone();
        inside.push(Incident::new("new", x, y, t.max(t_ref - params.h_t)));
        let more = promap_surface(&inside, &spec, &params, t_ref).unwrap();
        prop_assert!(more.values().iter().zip(base.values()).all(|(a, b)| a >= b));

        // Beyond the spatial radius of every cell, or older than the time window.
        let mut outside = incidents.clone();
        outside.push(Incident::new("far", 160.0 + far_x, y, t_ref - 1.0));
        outside.push(Incident::new("old", x, y, t_ref - old));
        let same = promap_surface(&outside, &spec, &params, t_ref).unwrap();
        prop_assert_eq!(same.values(), base.values());
    }

    #[test]
    fn marginalize_commutes_with_scaling(values in prop::collection::vec(0f64..10.0, 60), a in 0.01f64..100.0) {
        let spec = GridSpec3D::new(GridSpec2D::new(0.0, 0.0, 1.0, 5, 4).unwrap(), 0.0, 0.5, 3).unwrap();
        let v = DensityVolume::new(spec, values.clone()).unwrap();
        let scaled = DensityVolume::new(spec, values.iter().map(|x| a * x).collect()).unwrap();
        let lhs = marginalize_time(&scaled);
        let rhs = marginalize_time(&v);
        for (l, r) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((l - a * r).abs() <= 1e-12 * (a * r).abs().max(1e-300));
        }
    }

    #[test]
    fn significance_monotone_in_alpha(
        samples in prop::collection::vec(prop::collection::vec(0u8..20, 19), 12),
        observed in prop::collection::vec(0u8..20, 12),
        a1 in 0.01f64..0.5, a2 in 0.01f64..0.5,
    ) {
        let spec = GridSpec2D::new(0.0, 0.0, 1.0, 12, 1).unwrap();
        let ens = NullEnsemble::from_replicates(RasterGrid::Surface(spec), 19, 1, |r, _| {
            Ok(samples.iter().map(|s| s[r] as f64).collect())
        }).unwrap();
        let obs = DensitySurface::new(spec, observed.iter().map(|&v| v as f64).collect()).unwrap();
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let small = classify_significance(&obs, &ens, lo).unwrap();
        let large = classify_significance(&obs, &ens, hi).unwrap();
        prop_assert!(small.significant.iter().zip(&large.significant).all(|(s, l)| !s || *l));
        prop_assert!(small.p_values.iter().all(|&p| (1.0 / 20.0..=1.0).contains(&p)));
    }

    #[test]
    fn curve_points_obey_pai_identity(
        values in prop::collection::vec(0u16..500, 100),
        sig in prop::collection::vec(any::<bool>(), 100),
        cells in prop::collection::vec(0usize..100, 1..60),
    ) {
        let spec = GridSpec2D::new(0.0, 0.0, 10.0, 10, 10).unwrap();
        let lu = LandUseGrid::all_eligible(spec);
        let surface = DensitySurface::new(spec, values.iter().map(|&v| v as f64).collect()).unwrap();
        let test: Vec<Incident> = cells.iter().enumerate().map(|(m, &c)| {
            let (i, j) = spec.cell_of_index(c);
            let (x, y) = spec.cell_centroid(i, j);
            Incident::new(format!("t{m}"), x, y, 0.0)
        }).collect();
        let curve = pai_curve(&surface, &sig, &lu, &test, &scale_lattice(0.0, 100.0, 2.5).unwrap()).unwrap();
        let mut last = 0.0;
        for p in &curve.points {
            if p.feasible {
                let hr = p.hit_rate.unwrap();
                prop_assert_eq!(p.pai.unwrap(), hr / (p.area_pct / 100.0));
                prop_assert!(hr >= last);
                last = hr;
            } else {
                prop_assert!(p.pai.is_none());
            }
        }
    }

    #[test]
    fn hotspots_depend_only_on_rank(
        values in prop::collection::vec(0u32..1000, 64),
        sig in prop::collection::vec(any::<bool>(), 64),
        area in 1f64..100.0,
    ) {
        let spec = GridSpec2D::new(0.0, 0.0, 1.0, 8, 8).unwrap();
        let lu = LandUseGrid::all_eligible(spec);
        let raw: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        // v^3 + 7v is strictly increasing and exact for these integers.
        let transformed: Vec<f64> = raw.iter().map(|v| v * v * v + 7.0 * v).collect();
        let a = select_hotspots(&DensitySurface::new(spec, raw).unwrap(), &sig, &lu, area).unwrap();
        let b = select_hotspots(&DensitySurface::new(spec, transformed).unwrap(), &sig, &lu, area).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ascii_grid_round_trips(
        cols in 1usize..8, rows in 1usize..8,
        x0 in -1e6f64..1e6, y0 in -1e6f64..1e6, cell in 0.001f64..1e4,
        raw in prop::collection::vec(prop::option::of(-1e300f64..1e300), 64),
    ) {
        let spec = GridSpec2D::new(x0, y0, cell, cols, rows).unwrap();
        let values: Vec<Option<f64>> = raw.into_iter().take(cols * rows)
            .map(|v| v.filter(|&v| v != -9999.0)).collect();
        let grid = AsciiGrid { spec, nodata: -9999.0, values };
        let back = parse_ascii_grid(&format_ascii_grid(&grid), "p").unwrap();
        prop_assert_eq!(back, grid);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthetic_incidents_are_eligible(seed in any::<u64>(), fraction in 0.05f64..1.0) {
        let spec = GridSpec2D::new(0.0, 0.0, 50.0, 24, 18).unwrap();
        let lu = generate_landuse(spec, fraction, seed).unwrap();
        let window = TimeWindow::new(5.0, 65.0).unwrap();
        let process = drifting_cluster_spec(&spec, window, &DriftingParams::default(), seed);
        let incidents = generate_incidents(&process, &lu, window).unwrap();
        for e in &incidents {
            let (i, j) = spec.world_to_cell(e.x, e.y).unwrap();
            prop_assert_eq!(lu.class_at(i, j), LandUse::Eligible);
            prop_assert!(window.contains(e.t));
        }
        prop_assert_eq!(&incidents, &generate_incidents(&process, &lu, window).unwrap());
    }

    #[test]
    fn likelihood_collapses_at_small_bandwidths(incidents in prop::collection::vec((0f64..1000.0, 0f64..1000.0, 0f64..50.0), 3..40)) {
        let incidents: Vec<Incident> = incidents.into_iter().enumerate()
            .map(|(m, (x, y, t))| Incident::new(format!("r{m}"), x, y, t)).collect();
        let obj = LooObjective::new(&incidents, K).unwrap();
        prop_assume!(obj.duplicate_fraction() == 0.0);
        let tiny = Bandwidths::new(1e-9, 1e-9, 1e-9).unwrap();
        prop_assert_eq!(obj.log_likelihood(tiny), f64::NEG_INFINITY);
    }
}

#[test]
fn optimizer_trace_is_reproducible() {
    let spec = GridSpec2D::new(0.0, 0.0, 50.0, 20, 20).unwrap();
    let lu = generate_landuse(spec, 0.8, 3).unwrap();
    let window = TimeWindow::new(0.0, 60.0).unwrap();
    let process = drifting_cluster_spec(&spec, window, &DriftingParams::default(), 3);
    let incidents = generate_incidents(&process, &lu, window).unwrap();
    let mut config = BandwidthSearchConfig::default_for(&spec, 1.0, 60.0);
    config.lattice = [6; 3];
    let a = optimize_bandwidths(&incidents, &config, K).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let b = pool.install(|| optimize_bandwidths(&incidents, &config, K)).unwrap();
    assert_eq!(a, b);
    assert!(a.trace.len() >= 216);
}

#[test]
fn uniform_test_incidents_give_baseline_pai() {
    use rand::{Rng, SeedableRng};
    let spec = GridSpec2D::new(0.0, 0.0, 10.0, 50, 50).unwrap();
    let lu = LandUseGrid::all_eligible(spec);
    let scales = scale_lattice(0.0, 25.0, 1.0).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let n_test = 20_000;
    let curves: Vec<PaiCurve> = (0..8)
        .map(|_| {
            let surface = DensitySurface::new(spec, (0..2500).map(|_| rng.random::<f64>()).collect()).unwrap();
            let test: Vec<Incident> = (0..n_test)
                .map(|m| Incident::new(format!("u{m}"), rng.random_range(0.0..500.0), rng.random_range(0.0..500.0), 0.0))
                .collect();
            pai_curve(&surface, &[true; 2500], &lu, &test, &scales).unwrap()
        })
        .collect();
    let mean = consolidate_curves(&curves).unwrap();
    for p in &mean.points {
        let frac = p.area_pct / 100.0;
        // Five binomial standard errors of the pooled hit rate, in PAI units.
        let sd = (frac * (1.0 - frac) / (8 * n_test) as f64).sqrt() / frac;
        let v = p.pai.unwrap();
        assert!((v - 1.0).abs() < 5.0 * sd, "scale {}: PAI {v}", p.area_pct);
    }
}
