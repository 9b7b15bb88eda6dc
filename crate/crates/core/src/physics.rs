//! Deterministic structure of the tamed system: the taming profile `g_N`,
//! the scalar `L^p` cutoff, the convective term in divergence form, the full
//! drift, and the pressure split into convective and taming parts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::operators::{dealias_in_place, leray_project_in_place, smooth_project_in_place, tensor_divergence};
use crate::spectral::{
    lp_norm, Complex, RealField, RealVectorField, ScalarField, SpectralField, SpectralScalarField, SpectralVectorField,
};

/// Taming profile `g_N` with threshold `N` and viscosity `ν`.
///
/// `g_N = 0` on `[0, N]`, `(r - N)² / (2ν)` on `[N, N + 1]` and the affine tail
/// `(r - N - 1/2) / ν` beyond. The quadratic piece is the cubic Hermite blend
/// matching value and slope at both ends, so `g_N` is C¹ with
/// `0 ≤ g_N' ≤ 1/ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TamingFunction {
    threshold: f64,
    viscosity: f64,
}

impl TamingFunction {
    pub fn new(threshold: f64, viscosity: f64) -> Result<Self> {
        if !(threshold >= 0.0) || !threshold.is_finite() {
            return Err(invalid("taming_threshold", "N must be a nonnegative real"));
        }
        if !(viscosity > 0.0) || !viscosity.is_finite() {
            return Err(invalid("nu", "viscosity must be positive"));
        }
        Ok(Self { threshold, viscosity })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    /// `g_N(r)` for `r ≥ 0`; negative inputs are treated as zero.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        let t = r - self.threshold;
        if t <= 0.0 {
            0.0
        } else if t < 1.0 {
            0.5 * t * t / self.viscosity
        } else {
            (t - 0.5) / self.viscosity
        }
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        let t = r - self.threshold;
        if t <= 0.0 {
            0.0
        } else if t < 1.0 {
            t / self.viscosity
        } else {
            1.0 / self.viscosity
        }
    }

    /// Checked evaluation.
    pub fn g_eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(invalid("r", format!("taming argument must be >= 0, got {r}")));
        }
        Ok(self.value(r))
    }

    /// Upper bound `(N + 1)/ν` on `r/ν - 2 g_N(r)`.
    pub fn cancellation_bound(&self) -> f64 {
        (self.threshold + 1.0) / self.viscosity
    }
}

/// Smooth step profile: 1 on `[0,1]`, `1 - (3t² - 2t³)` with `t = r - 1` on
/// `[1,2]`, 0 beyond. Global Lipschitz constant 3/2.
#[inline]
pub fn cutoff_profile(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let t = r - 1.0;
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

pub const CUTOFF_LIPSCHITZ: f64 = 1.5;

/// `φ_R(v) = φ(‖v‖_p / R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffFunction {
    radius: f64,
}

impl CutoffFunction {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius >= 1.0) || !radius.is_finite() {
            return Err(invalid("cutoff_radius", format!("R must be >= 1, got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn eval(&self, norm: f64) -> f64 {
        cutoff_profile(norm / self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    pub nu: f64,
    pub taming: TamingFunction,
    pub cutoff: CutoffFunction,
    /// Level `k` of the Gaussian projector `P_{≤k}`.
    pub truncation: f64,
    pub p: f64,
    pub dealias: bool,
}

impl DriftConfig {
    pub fn new(
        nu: f64,
        taming_threshold: f64,
        cutoff_radius: f64,
        truncation: f64,
        p: f64,
        dealias: bool,
    ) -> Result<Self> {
        let cfg = Self {
            nu,
            taming: TamingFunction::new(taming_threshold, nu)?,
            cutoff: CutoffFunction::new(cutoff_radius)?,
            truncation,
            p,
            dealias,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(invalid("nu", "viscosity must be positive"));
        }
        if !(self.p > 3.0) || !self.p.is_finite() {
            return Err(invalid("p", format!("p must exceed 3, got {}", self.p)));
        }
        if !(self.truncation > 0.0) || self.truncation.is_nan() {
            return Err(invalid("truncation", "k must be positive"));
        }
        Ok(())
    }

    pub fn with_truncation(&self, k: f64) -> Self {
        Self { truncation: k, ..*self }
    }
}

/// `g_N(|u|²) u` pointwise.
pub fn tamed_term(u: &RealVectorField, taming: &TamingFunction) -> RealVectorField {
    let mut out = RealVectorField::zeros(*u.grid());
    for idx in 0..u.grid().points() {
        let g = taming.value(u.magnitude_sq(idx));
        if g != 0.0 {
            let v = u.at(idx);
            out.set(idx, [g * v[0], g * v[1], g * v[2]]);
        }
    }
    out
}

/// Pointwise tensor product `T_{lj} = a_l b_j`, flattened as `3l + j`.
pub fn outer_product(a: &RealVectorField, b: &RealVectorField) -> RealField<9> {
    let mut t = RealField::<9>::zeros(*a.grid());
    for idx in 0..a.grid().points() {
        let x = a.at(idx);
        let y = b.at(idx);
        t.set(idx, std::array::from_fn(|k| x[k / 3] * y[k % 3]));
    }
    t
}

pub(crate) fn finish_nonlinear(f: &mut SpectralVectorField, cfg: &DriftConfig) {
    if cfg.dealias {
        dealias_in_place(f);
    }
    leray_project_in_place(f);
    smooth_project_in_place(f, cfg.truncation).expect("validated truncation level");
    f.zero_nyquist();
}

/// `P_{≤k} 𝒫 ∇·(u ⊗ P_{≤k} v)`.
pub fn convective_term(u: &SpectralVectorField, v: &SpectralVectorField, cfg: &DriftConfig) -> SpectralVectorField {
    let mut u = u.clone();
    let mut pv = v.clone();
    if cfg.dealias {
        dealias_in_place(&mut u);
        dealias_in_place(&mut pv);
    }
    smooth_project_in_place(&mut pv, cfg.truncation).expect("validated truncation level");
    let t = outer_product(&u.to_real_unchecked(), &pv.to_real_unchecked());
    let mut t_hat: SpectralField<9> = t.to_spectral();
    if cfg.dealias {
        dealias_in_place(&mut t_hat);
    }
    let mut out = tensor_divergence(&t_hat);
    finish_nonlinear(&mut out, cfg);
    out
}

/// `P_{≤k} 𝒫 (g_N(|P_{≤k} u|²) P_{≤k} u)`.
pub fn projected_taming(u: &SpectralVectorField, cfg: &DriftConfig) -> SpectralVectorField {
    let mut pu = u.clone();
    if cfg.dealias {
        dealias_in_place(&mut pu);
    }
    smooth_project_in_place(&mut pu, cfg.truncation).expect("validated truncation level");
    let mut out = tamed_term(&pu.to_real_unchecked(), &cfg.taming).to_spectral();
    finish_nonlinear(&mut out, cfg);
    out
}

/// Deterministic drift split into the stiff viscous part and the rest.
#[derive(Debug, Clone)]
pub struct Drift {
    /// `νΔu`, handled exactly by the integrating factor.
    pub stiff: SpectralVectorField,
    /// `-φ² P_{≤k}𝒫[(u·∇)P_{≤k}u + g_N(|P_{≤k}u|²)P_{≤k}u]`.
    pub nonlinear: SpectralVectorField,
    pub cutoff: f64,
    pub lp_norm: f64,
}

/// Nonlinear part only, given the physical-space field for the cutoff norm.
pub fn nonlinear_drift(
    u: &SpectralVectorField,
    u_phys: &RealVectorField,
    cfg: &DriftConfig,
) -> (SpectralVectorField, f64, f64) {
    let norm = lp_norm(u_phys, cfg.p).expect("p > 3");
    let phi = cfg.cutoff.eval(norm);
    if phi == 0.0 {
        return (SpectralVectorField::zeros(*u.grid()), phi, norm);
    }
    let mut n = convective_term(u, u, cfg);
    n.add_assign_scaled(1.0, &projected_taming(u, cfg));
    (n.scaled(-phi * phi), phi, norm)
}

pub fn assemble_drift(u: &SpectralVectorField, cfg: &DriftConfig) -> Drift {
    let g = *u.grid();
    let stiff = u.map_multiplier(|idx| -cfg.nu * 4.0 * PI * PI * g.frequency_sq(idx));
    let (nonlinear, cutoff, lp_norm) = nonlinear_drift(u, &u.to_real_unchecked(), cfg);
    Drift {
        stiff,
        nonlinear,
        cutoff,
        lp_norm,
    }
}

/// Solves `∇π = (I - 𝒫) w`, i.e. `π̂ = ξ·ŵ / (2πi|ξ|²)`, with zero mean.
pub fn pressure_from_forcing(w: &SpectralVectorField) -> SpectralScalarField {
    let g = *w.grid();
    let mut pi = SpectralScalarField::zeros(g);
    let slot = pi.component_mut(0);
    for (idx, s) in slot.iter_mut().enumerate().skip(1) {
        let xi = g.frequency(idx);
        let xi_sq = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        let v = w.at(idx);
        let dot = v[0] * xi[0] + v[1] * xi[1] + v[2] * xi[2];
        *s = dot / (Complex::new(0.0, 2.0 * PI) * xi_sq);
    }
    pi
}

/// Spectral pressures `(π̂_conv, π̂_tame)` together with the forcings they balance.
#[derive(Debug, Clone)]
pub struct PressureSplit {
    pub conv: SpectralScalarField,
    pub tame: SpectralScalarField,
    /// `∇·(u ⊗ u) = (u·∇)u` for divergence-free `u`.
    pub convective: SpectralVectorField,
    /// `g_N(|u|²) u`.
    pub taming: SpectralVectorField,
}

pub fn pressure_split(u: &RealVectorField, taming: &TamingFunction) -> PressureSplit {
    let mut convective = tensor_divergence(&outer_product(u, u).to_spectral());
    convective.zero_nyquist();
    let mut tame_force = tamed_term(u, taming).to_spectral();
    tame_force.zero_nyquist();
    PressureSplit {
        conv: pressure_from_forcing(&convective),
        tame: pressure_from_forcing(&tame_force),
        convective,
        taming: tame_force,
    }
}

/// `(π_conv, π_tame)` in physical space.
pub fn pressure_decompose(u: &RealVectorField, taming: &TamingFunction) -> (ScalarField, ScalarField) {
    let split = pressure_split(u, taming);
    (split.conv.to_real_unchecked(), split.tame.to_real_unchecked())
}

/// Returns `(‖π‖₃, ‖u‖₆²)`.
pub fn pressure_l3_monitor(pi: &ScalarField, u: &RealVectorField) -> (f64, f64) {
    let l3 = lp_norm(pi, 3.0).expect("q = 3");
    let l6 = lp_norm(u, 6.0).expect("q = 6");
    (l3, l6 * l6)
}
