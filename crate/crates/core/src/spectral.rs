//! Periodic-box grids, field containers and the 3-D Fourier transform.
//!
//! Fourier convention: the forward kernel is `exp(-2πi ξ·x)` with lattice
//! frequencies `ξ = k / L`, `k ∈ {-N/2, …, N/2 - 1}³`. The forward transform is
//! normalised by `1/N³`, so the `ξ = 0` coefficient is the spatial mean and
//! Plancherel reads `‖f‖₂² = L³ Σ_ξ |f̂(ξ)|²`.
//!
//! Storage is component-major with the first axis fastest:
//! `idx = i0 + N (i1 + N i2)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, StnsError};

pub type Complex = Complex64;

/// Tolerance used by [`SpectralField::to_real`] when validating Hermitian symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    modes: usize,
    length: f64,
}

impl GridSpec {
    pub fn new(modes: usize, length: f64) -> Result<Self> {
        if modes < 8 || !modes.is_multiple_of(2) {
            return Err(StnsError::InvalidGrid(format!(
                "modes per axis must be even and >= 8, got {modes}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(StnsError::InvalidGrid(format!(
                "box length must be positive, got {length}"
            )));
        }
        Ok(Self { modes, length })
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.modes
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn points(&self) -> usize {
        self.modes * self.modes * self.modes
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    /// Quadrature weight `(L/N)³` of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (self.length / self.modes as f64).powi(3)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.modes as f64
    }

    /// Signed integer wavenumber of FFT index `i` along one axis.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.modes as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.modes;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.modes * (c[1] + self.modes * c[2])
    }

    #[inline]
    pub fn wavenumbers(&self, idx: usize) -> [i64; 3] {
        let c = self.coords(idx);
        [self.wavenumber(c[0]), self.wavenumber(c[1]), self.wavenumber(c[2])]
    }

    /// Lattice frequency `ξ = k / L` of a spectral index.
    #[inline]
    pub fn frequency(&self, idx: usize) -> [f64; 3] {
        let k = self.wavenumbers(idx);
        let inv = 1.0 / self.length;
        [k[0] as f64 * inv, k[1] as f64 * inv, k[2] as f64 * inv]
    }

    #[inline]
    pub fn frequency_sq(&self, idx: usize) -> f64 {
        let xi = self.frequency(idx);
        xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]
    }

    /// Index of the mode at `-k`.
    #[inline]
    pub fn partner(&self, idx: usize) -> usize {
        let n = self.modes;
        let c = self.coords(idx);
        self.index([(n - c[0]) % n, (n - c[1]) % n, (n - c[2]) % n])
    }

    /// True if any axis sits on the unpaired `k = -N/2` row.
    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = self.modes / 2;
        let c = self.coords(idx);
        c[0] == half || c[1] == half || c[2] == half
    }

    /// Physical coordinates of grid point `idx`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let h = self.spacing();
        [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h]
    }

    /// Largest resolved frequency magnitude per axis, `(N/2) / L`.
    pub fn max_frequency(&self) -> f64 {
        (self.modes / 2) as f64 / self.length
    }

    /// Largest integer wavenumber `K` kept by the 2/3 rule (`3K < N`).
    pub fn dealias_wavenumber(&self) -> usize {
        (self.modes - 1) / 3
    }
}

/// Physical-space field with `C` components.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField<const C: usize> {
    grid: GridSpec,
    comps: [Vec<f64>; C],
}

/// Spectral coefficients of a real field with `C` components.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<const C: usize> {
    grid: GridSpec,
    comps: [Vec<Complex>; C],
}

pub type RealVectorField = RealField<3>;
pub type ScalarField = RealField<1>;
pub type SpectralVectorField = SpectralField<3>;
pub type SpectralScalarField = SpectralField<1>;

impl<const C: usize> RealField<C> {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            comps: std::array::from_fn(|_| vec![0.0; grid.points()]),
        }
    }

    pub fn from_components(grid: GridSpec, comps: [Vec<f64>; C]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.points() {
                return Err(StnsError::DimensionMismatch {
                    expected: grid.points(),
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(invalid("samples", "non-finite sample"));
            }
        }
        Ok(Self { grid, comps })
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; C]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.points() {
            let v = f(grid.position(idx));
            for (c, val) in v.into_iter().enumerate() {
                out.comps[c][idx] = val;
            }
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<f64>; C] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<f64>; C] {
        self.comps
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; C] {
        std::array::from_fn(|c| self.comps[c][idx])
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: [f64; C]) {
        for (c, val) in v.into_iter().enumerate() {
            self.comps[c][idx] = val;
        }
    }

    /// Pointwise Euclidean magnitude squared.
    #[inline]
    pub fn magnitude_sq(&self, idx: usize) -> f64 {
        self.comps.iter().map(|c| c[idx] * c[idx]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.comps.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v *= s));
        out
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Discrete L² inner product `(L/N)³ Σ_x f(x)·g(x)`.
    pub fn inner(&self, other: &Self) -> f64 {
        let s: f64 = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn mean(&self) -> [f64; C] {
        let n = self.grid.points() as f64;
        std::array::from_fn(|c| self.comps[c].iter().sum::<f64>() / n)
    }

    pub fn to_spectral(&self) -> SpectralField<C> {
        fft_forward(self)
    }
}

impl<const C: usize> SpectralField<C> {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            comps: std::array::from_fn(|_| vec![Complex::new(0.0, 0.0); grid.points()]),
        }
    }

    pub fn from_components(grid: GridSpec, comps: [Vec<Complex>; C]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.points() {
                return Err(StnsError::DimensionMismatch {
                    expected: grid.points(),
                    got: c.len(),
                });
            }
        }
        Ok(Self { grid, comps })
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[Complex] {
        &self.comps[c]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [Complex] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<Complex>; C] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Vec<Complex>; C] {
        &mut self.comps
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [Complex; C] {
        std::array::from_fn(|c| self.comps[c][idx])
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: [Complex; C]) {
        for (c, val) in v.into_iter().enumerate() {
            self.comps[c][idx] = val;
        }
    }

    /// Applies a real scalar multiplier `m(ξ)` to every component.
    pub fn apply_multiplier(&mut self, m: impl Fn(usize) -> f64) {
        for idx in 0..self.grid.points() {
            let f = m(idx);
            for c in self.comps.iter_mut() {
                c[idx] *= f;
            }
        }
    }

    pub fn map_multiplier(&self, m: impl Fn(usize) -> f64) -> Self {
        let mut out = self.clone();
        out.apply_multiplier(m);
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_multiplier(|_| s)
    }

    pub fn add_assign_scaled(&mut self, s: f64, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y * s);
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign_scaled(s, other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0_f64, |m, v| m.max(v.norm()))
    }

    /// Plancherel inner product `L³ Σ_ξ Re(f̂ conj(ĝ))`.
    pub fn inner(&self, other: &Self) -> f64 {
        let s: f64 = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum::<f64>())
            .sum();
        s * self.grid.volume()
    }

    /// `‖f‖₂²` by Plancherel.
    pub fn l2_sq(&self) -> f64 {
        self.inner(self)
    }

    /// Largest `|f̂(ξ) - conj(f̂(-ξ))|` over paired modes.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        let mut defect = 0.0_f64;
        for c in &self.comps {
            for idx in 0..g.points() {
                if g.is_nyquist(idx) {
                    continue;
                }
                let d = (c[idx] - c[g.partner(idx)].conj()).norm();
                defect = defect.max(d);
            }
        }
        defect
    }

    /// Zeroes every mode on an unpaired Nyquist row.
    pub fn zero_nyquist(&mut self) {
        let g = self.grid;
        for idx in 0..g.points() {
            if g.is_nyquist(idx) {
                for c in self.comps.iter_mut() {
                    c[idx] = Complex::new(0.0, 0.0);
                }
            }
        }
    }

    /// Replaces the spectrum with its Hermitian part and clears Nyquist rows.
    pub fn symmetrize(&mut self) {
        let g = self.grid;
        for c in self.comps.iter_mut() {
            let orig = c.clone();
            for idx in 0..g.points() {
                c[idx] = if g.is_nyquist(idx) {
                    Complex::new(0.0, 0.0)
                } else {
                    (orig[idx] + orig[g.partner(idx)].conj()) * 0.5
                };
            }
        }
    }

    /// Inverse transform after checking Hermitian symmetry.
    pub fn to_real(&self) -> Result<RealField<C>> {
        fft_inverse(self)
    }

    /// Inverse transform keeping the real part without a symmetry check.
    pub fn to_real_unchecked(&self) -> RealField<C> {
        inverse_real_part(self)
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Unnormalised in-place 3-D transform of one component.
fn fft3(buf: &mut [Complex], n: usize, inverse: bool) {
    let p = plans(n);
    let fft = if inverse { &p.inverse } else { &p.forward };
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // axis 0 lines are contiguous
    fft.process_with_scratch(buf, &mut scratch);

    let mut lines = vec![Complex::new(0.0, 0.0); buf.len()];
    // axis 1
    for i2 in 0..n {
        for i0 in 0..n {
            let line = (i2 * n + i0) * n;
            for i1 in 0..n {
                lines[line + i1] = buf[i0 + n * (i1 + n * i2)];
            }
        }
    }
    fft.process_with_scratch(&mut lines, &mut scratch);
    for i2 in 0..n {
        for i0 in 0..n {
            let line = (i2 * n + i0) * n;
            for i1 in 0..n {
                buf[i0 + n * (i1 + n * i2)] = lines[line + i1];
            }
        }
    }
    // axis 2
    for i1 in 0..n {
        for i0 in 0..n {
            let line = (i1 * n + i0) * n;
            for i2 in 0..n {
                lines[line + i2] = buf[i0 + n * (i1 + n * i2)];
            }
        }
    }
    fft.process_with_scratch(&mut lines, &mut scratch);
    for i1 in 0..n {
        for i0 in 0..n {
            let line = (i1 * n + i0) * n;
            for i2 in 0..n {
                buf[i0 + n * (i1 + n * i2)] = lines[line + i2];
            }
        }
    }
}

pub fn fft_forward<const C: usize>(f: &RealField<C>) -> SpectralField<C> {
    let grid = f.grid;
    let n = grid.modes;
    let norm = 1.0 / grid.points() as f64;
    let comps = std::array::from_fn(|c| {
        let mut buf: Vec<Complex> = f.comps[c].iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft3(&mut buf, n, false);
        buf.iter_mut().for_each(|v| *v *= norm);
        buf
    });
    SpectralField { grid, comps }
}

fn inverse_real_part<const C: usize>(f: &SpectralField<C>) -> RealField<C> {
    let grid = f.grid;
    let comps = std::array::from_fn(|c| {
        let mut buf = f.comps[c].clone();
        fft3(&mut buf, grid.modes, true);
        buf.into_iter().map(|v| v.re).collect()
    });
    RealField { grid, comps }
}

/// Inverse transform; rejects spectra whose Hermitian defect exceeds
/// [`SYMMETRY_TOLERANCE`] relative to the largest coefficient.
pub fn fft_inverse<const C: usize>(f: &SpectralField<C>) -> Result<RealField<C>> {
    let scale = f.max_abs().max(f64::MIN_POSITIVE);
    let defect = f.hermitian_defect();
    if defect > SYMMETRY_TOLERANCE * scale {
        return Err(StnsError::SymmetryViolation {
            defect,
            tolerance: SYMMETRY_TOLERANCE * scale,
        });
    }
    Ok(inverse_real_part(f))
}

fn check_q(q: f64) -> Result<()> {
    if q.is_nan() || q < 1.0 {
        return Err(invalid("q", format!("L^q exponent must be >= 1, got {q}")));
    }
    Ok(())
}

/// `‖f‖_q^q` with the Euclidean pointwise magnitude; `q` finite.
pub fn lp_norm_pow<const C: usize>(f: &RealField<C>, q: f64) -> Result<f64> {
    check_q(q)?;
    if q.is_infinite() {
        return Err(invalid("q", "power form requires finite q"));
    }
    let half = 0.5 * q;
    let s: f64 = (0..f.grid.points()).map(|i| f.magnitude_sq(i).powf(half)).sum();
    Ok(s * f.grid.cell_volume())
}

/// Discrete `L^q` norm `((L/N)³ Σ_x |f(x)|^q)^{1/q}`; `q = ∞` gives the max norm.
pub fn lp_norm<const C: usize>(f: &RealField<C>, q: f64) -> Result<f64> {
    check_q(q)?;
    if q.is_infinite() {
        let m = (0..f.grid.points()).map(|i| f.magnitude_sq(i)).fold(0.0_f64, f64::max);
        return Ok(m.sqrt());
    }
    Ok(lp_norm_pow(f, q)?.powf(1.0 / q))
}

/// Bessel-potential multiplier `(1 + 4π²|ξ|²)^{s/2}`.
#[inline]
pub fn bessel_symbol(xi_sq: f64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        (1.0 + 4.0 * PI * PI * xi_sq).powf(0.5 * s)
    }
}

/// `H^s = W^{s,2}` norm evaluated by Plancherel.
pub fn sobolev_norm_spectral<const C: usize>(f: &SpectralField<C>, s: f64) -> f64 {
    let g = f.grid;
    let mut acc = 0.0;
    for idx in 0..g.points() {
        let w = bessel_symbol(g.frequency_sq(idx), 2.0 * s);
        let m: f64 = f.comps.iter().map(|c| c[idx].norm_sqr()).sum();
        acc += w * m;
    }
    (acc * g.volume()).sqrt()
}

pub fn sobolev_norm<const C: usize>(f: &RealField<C>, s: f64) -> f64 {
    sobolev_norm_spectral(&fft_forward(f), s)
}
