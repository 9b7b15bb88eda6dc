//! Initial-data generators.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::operators::leray_project_in_place;
use crate::spectral::{Complex, GridSpec, RealVectorField, SpectralVectorField};

/// Random smooth vector field supported on integer wavenumbers
/// `|k_j| ≤ kmax`, `k ≠ 0`, with Gaussian spectral envelope, zero mean and
/// `Σ|û|² = rms²`. No divergence constraint is imposed.
pub fn random_field<R: Rng + ?Sized>(grid: GridSpec, kmax: i64, rms: f64, rng: &mut R) -> SpectralVectorField {
    let f = raw_spectrum(grid, kmax, rng);
    normalise(f, rms)
}

/// Divergence-free variant of [`random_field`].
pub fn random_solenoidal<R: Rng + ?Sized>(grid: GridSpec, kmax: i64, rms: f64, rng: &mut R) -> SpectralVectorField {
    let mut f = raw_spectrum(grid, kmax, rng);
    leray_project_in_place(&mut f);
    normalise(f, rms)
}

fn raw_spectrum<R: Rng + ?Sized>(grid: GridSpec, kmax: i64, rng: &mut R) -> SpectralVectorField {
    let kmax = kmax.clamp(1, grid.modes() as i64 / 2 - 1);
    let mut f = SpectralVectorField::zeros(grid);
    for idx in 1..grid.points() {
        let k = grid.wavenumbers(idx);
        if k.iter().any(|c| c.abs() > kmax) {
            continue;
        }
        let k_sq = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        let env = (-k_sq / (kmax * kmax) as f64).exp();
        let v: [Complex; 3] = std::array::from_fn(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(re, im) * env
        });
        f.set(idx, v);
    }
    f.symmetrize();
    f
}

fn normalise(f: SpectralVectorField, rms: f64) -> SpectralVectorField {
    let energy: f64 = (0..3)
        .map(|c| f.component(c).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    if energy > 0.0 {
        f.scaled(rms / energy.sqrt())
    } else {
        f
    }
}

/// Smooth solenoidal field `∇ × (0, 0, A e^{-|x - c|²/(2w²)})`-like bump built
/// from the periodic distance to the box centre and Leray-projected.
pub fn gaussian_bump(grid: GridSpec, width: f64, amplitude: f64) -> RealVectorField {
    let l = grid.length();
    let c = 0.5 * l;
    let f = RealVectorField::from_fn(grid, |x| {
        let d: [f64; 3] = std::array::from_fn(|i| x[i] - c);
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        let e = amplitude * (-r2 / (2.0 * width * width)).exp();
        // curl of (0, 0, e): (∂_y e, -∂_x e, 0)
        [
            -d[1] / (width * width) * e * width,
            d[0] / (width * width) * e * width,
            0.0,
        ]
    });
    let mut s = f.to_spectral();
    s.zero_nyquist();
    leray_project_in_place(&mut s);
    s.to_real_unchecked()
}
