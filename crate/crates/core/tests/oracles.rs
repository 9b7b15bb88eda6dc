//! Transforms and projectors against direct evaluations on small grids.

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stns_core::diagnostics::aggregate;
use stns_core::operators::{derivative, divergence_residual, leray_project};
use stns_core::spectral::{fft_forward, Complex};
use stns_core::{GridSpec, RealField, RealVectorField, SpectralVectorField};

fn noise_field(grid: GridSpec, seed: u64) -> RealVectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = std::array::from_fn(|_| (0..grid.points()).map(|_| rng.random_range(-1.0..1.0)).collect());
    RealVectorField::from_components(grid, comps).unwrap()
}

#[test]
fn forward_transform_matches_direct_sum() {
    let grid = GridSpec::new(8, 2.5).unwrap();
    let f = noise_field(grid, 3);
    let spec = fft_forward(&f);
    let n = grid.points() as f64;
    for k in (0..grid.points()).step_by(7) {
        let w = grid.wavenumbers(k);
        for c in 0..3 {
            let mut acc = Complex::new(0.0, 0.0);
            for x in 0..grid.points() {
                let i = grid.coords(x);
                let phase = -2.0 * PI * (0..3).map(|d| (w[d] * i[d] as i64) as f64).sum::<f64>() / 8.0;
                acc += Complex::from_polar(f.component(c)[x], phase);
            }
            assert!((acc / n - spec.component(c)[k]).norm() < 1e-14, "mode {k:?}");
        }
    }
}

#[test]
fn leray_matches_pointwise_formula() {
    let grid = GridSpec::new(8, 4.0).unwrap();
    let f = noise_field(grid, 5).to_spectral();
    let p = leray_project(&f);
    for idx in 1..grid.points() {
        let xi = grid.frequency(idx);
        let xi_sq = grid.frequency_sq(idx);
        let a = f.at(idx);
        let dot = (0..3).fold(Complex::new(0.0, 0.0), |s, d| s + a[d] * xi[d]);
        for d in 0..3 {
            let want = a[d] - dot * (xi[d] / xi_sq);
            assert!((p.at(idx)[d] - want).norm() < 1e-15);
        }
    }
    assert_eq!(p.at(0), f.at(0));
    assert!(divergence_residual(&p) < 1e-13);
}

#[test]
fn spectral_derivative_of_trigonometric_field() {
    let grid = GridSpec::new(16, 3.0).unwrap();
    let k = 2.0 * PI * 3.0 / 3.0;
    let f = RealField::<1>::from_fn(grid, |x| [(k * x[1]).sin()]);
    let d = derivative(&f.to_spectral(), 1).to_real_unchecked();
    for idx in 0..grid.points() {
        let x = grid.position(idx);
        assert!((d.component(0)[idx] - k * (k * x[1]).cos()).abs() < 1e-12);
    }
}

#[test]
fn aggregate_integrates_linear_series_exactly() {
    let grid = GridSpec::new(8, 1.0).unwrap();
    let zero = SpectralVectorField::zeros(grid);
    assert_eq!(zero.l2_sq(), 0.0);
    let recs: Vec<_> = (0..=10)
        .map(|i| {
            let t = i as f64 * 0.1;
            stns_core::diagnostics::EnergyRecord {
                t,
                lp_p: 1.0 + t,
                grad_pow: 2.0 * t,
                l2_sq: 0.0,
                grad_l2_sq: 3.0 - t,
                lap_l2_sq: 4.0 * t,
                l3p_p: 1.0,
                l6_sq: 0.0,
                div_residual: 0.0,
                cutoff_value: 1.0,
                taming_dissipation: 0.0,
                pressure_l3: t,
                pressure_conv_l3: 0.0,
                jump_count_cum: 0,
            }
        })
        .collect();
    let s = aggregate(&recs, None).unwrap();
    assert!((s.int_grad_pow - 1.0).abs() < 1e-14);
    assert!((s.int_lap_l2 - 2.0).abs() < 1e-14);
    assert!((s.int_l3p_p - 1.0).abs() < 1e-14);
    assert_eq!(s.sup_lp_p, 2.0);
    assert_eq!(s.sup_grad_l2, 3.0);
    assert_eq!(s.max_pressure_l3, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn plancherel_holds(seed in any::<u64>(), length in 0.5f64..20.0) {
        let grid = GridSpec::new(8, length).unwrap();
        let f = noise_field(grid, seed);
        let physical: f64 = (0..3).map(|c| f.component(c).iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
            * grid.cell_volume();
        let spectral = f.to_spectral().l2_sq();
        prop_assert!((physical - spectral).abs() <= 1e-12 * physical);
    }

    #[test]
    fn round_trip_recovers_field(seed in any::<u64>()) {
        let grid = GridSpec::new(8, 1.0).unwrap();
        let f = noise_field(grid, seed);
        let back = f.to_spectral().to_real().unwrap();
        for c in 0..3 {
            for (a, b) in f.component(c).iter().zip(back.component(c)) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
