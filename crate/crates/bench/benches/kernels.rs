use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use stns_core::init::gaussian_bump;
use stns_core::noise::{JumpModel, JumpParams, WienerModel, WienerParams};
use stns_core::physics::{assemble_drift, DriftConfig};
use stns_core::rng::RngStreams;
use stns_core::solver::{prepare_initial, Stepper, StepperConfig};
use stns_core::GridSpec;

fn kernels(c: &mut Criterion) {
    for n in [16, 32] {
        let grid = GridSpec::new(n, 8.0 * PI).expect("grid");
        let u = gaussian_bump(grid, grid.length() / 8.0, 1.0);
        let drift = DriftConfig::new(0.1, 4.0, 40.0, 4.0, 4.0, true).expect("drift");
        let u_hat = prepare_initial(&u, &drift);

        c.bench_function(&format!("fft round trip {n}³"), |b| {
            b.iter(|| black_box(black_box(&u).to_spectral().to_real_unchecked()))
        });
        c.bench_function(&format!("assemble drift {n}³"), |b| {
            b.iter(|| black_box(assemble_drift(black_box(&u_hat), &drift)))
        });

        let cfg = StepperConfig::new(
            0.01,
            1e9,
            drift,
            WienerModel::new(grid, &WienerParams::default()).expect("wiener"),
            JumpModel::new(grid, &JumpParams::default()).expect("jumps"),
        )
        .expect("stepper config");
        let stepper = Stepper::new(cfg, grid).expect("stepper");
        let mut state = stepper
            .initial_state(u_hat.clone(), RngStreams::new(0, 0))
            .expect("state");
        c.bench_function(&format!("noisy step {n}³"), |b| {
            b.iter(|| black_box(stepper.step(&mut state).expect("finite step")))
        });
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);
