//! Monitored functionals, per-trajectory summaries and ensemble estimates.

use std::f64::consts::PI;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StnsError};
use crate::operators::{divergence_residual, gradient_tensor};
use crate::physics::{pressure_split, CutoffFunction, TamingFunction};
use crate::spectral::{lp_norm, lp_norm_pow, RealVectorField, ScalarField, SpectralVectorField};

/// One time-stamped row of monitored functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    /// `‖u‖_p^p`
    pub lp_p: f64,
    /// `‖∇(|u|^{p/2})‖₂²`
    pub grad_pow: f64,
    pub l2_sq: f64,
    pub grad_l2_sq: f64,
    pub lap_l2_sq: f64,
    /// `‖u‖_{3p}^p`
    pub l3p_p: f64,
    pub l6_sq: f64,
    pub div_residual: f64,
    pub cutoff_value: f64,
    /// `∫ g_N(|u|²) |u|^p dx`
    pub taming_dissipation: f64,
    pub pressure_l3: f64,
    pub pressure_conv_l3: f64,
    pub jump_count_cum: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub p: f64,
    pub taming: TamingFunction,
    pub cutoff: CutoffFunction,
}

/// `L³ Σ_ξ (4π²|ξ|²)^s Σ_c |û_c(ξ)|²`; `s = 1` gives `‖∇u‖₂²`, `s = 2` gives `‖Δu‖₂²`.
pub fn derivative_energy<const C: usize>(u: &crate::SpectralField<C>, s: i32) -> f64 {
    let g = *u.grid();
    let mut acc = 0.0;
    for idx in 0..g.points() {
        let w = (4.0 * PI * PI * g.frequency_sq(idx)).powi(s);
        if w == 0.0 {
            continue;
        }
        let m: f64 = u.components().iter().map(|c| c[idx].norm_sqr()).sum();
        acc += w * m;
    }
    acc * g.volume()
}

/// `|u|^{p/2}` as a scalar field.
pub fn power_field(u: &RealVectorField, p: f64) -> ScalarField {
    let mut z = ScalarField::zeros(*u.grid());
    let half = 0.25 * p;
    for (idx, v) in z.component_mut(0).iter_mut().enumerate() {
        *v = u.magnitude_sq(idx).powf(half);
    }
    z
}

/// `‖∇(|u|^{p/2})‖₂²` by pointwise power followed by a spectral gradient.
pub fn grad_pow(u: &RealVectorField, p: f64) -> f64 {
    derivative_energy(&power_field(u, p).to_spectral(), 1)
}

/// Chain-rule quadrature `(p²/4) ∫ |u|^{p-4} Σ_i (u·∂_i u)² dx`.
pub fn grad_pow_chain_rule(u: &SpectralVectorField, p: f64) -> f64 {
    let g = *u.grid();
    let phys = u.to_real_unchecked();
    let grad = gradient_tensor(u).to_real_unchecked();
    let mut acc = 0.0;
    for idx in 0..g.points() {
        let m2 = phys.magnitude_sq(idx);
        if m2 == 0.0 {
            continue;
        }
        let v = phys.at(idx);
        let d = grad.at(idx);
        let mut s = 0.0;
        for i in 0..3 {
            // (u·∂_i u) = Σ_c u_c ∂_i u_c, flattened gradient index 3c + i
            let dot = v[0] * d[i] + v[1] * d[3 + i] + v[2] * d[6 + i];
            s += dot * dot;
        }
        acc += m2.powf(0.5 * (p - 4.0)) * s;
    }
    0.25 * p * p * acc * g.cell_volume()
}

/// `‖u‖_{3p}^p / ‖∇(|u|^{p/2})‖₂²`, the discrete Sobolev bridge ratio.
pub fn sobolev_ratio(u: &RealVectorField, p: f64) -> f64 {
    let l3p = lp_norm_pow(u, 3.0 * p).expect("finite").powf(1.0 / 3.0);
    l3p / grad_pow(u, p)
}

pub fn compute_energy(
    u_spec: &SpectralVectorField,
    u: &RealVectorField,
    params: &EnergyParams,
    t: f64,
    jump_count_cum: u64,
) -> EnergyRecord {
    let p = params.p;
    let g = *u.grid();
    let lp_p = lp_norm_pow(u, p).expect("p > 3");
    let split = pressure_split(u, &params.taming);
    let pi_conv = split.conv.to_real_unchecked();
    let mut pi_total = split.conv.clone();
    pi_total.add_assign_scaled(1.0, &split.tame);
    let pi_total = pi_total.to_real_unchecked();
    let mut taming_dissipation = 0.0;
    for idx in 0..g.points() {
        let m2 = u.magnitude_sq(idx);
        let gn = params.taming.value(m2);
        if gn != 0.0 {
            taming_dissipation += gn * m2.powf(0.5 * p);
        }
    }
    EnergyRecord {
        t,
        lp_p,
        grad_pow: grad_pow(u, p),
        l2_sq: u_spec.l2_sq(),
        grad_l2_sq: derivative_energy(u_spec, 1),
        lap_l2_sq: derivative_energy(u_spec, 2),
        l3p_p: lp_norm_pow(u, 3.0 * p).expect("finite").powf(1.0 / 3.0),
        l6_sq: lp_norm(u, 6.0).expect("finite").powi(2),
        div_residual: divergence_residual(u_spec),
        cutoff_value: params.cutoff.eval(lp_p.powf(1.0 / p)),
        taming_dissipation: taming_dissipation * g.cell_volume(),
        pressure_l3: lp_norm(&pi_total, 3.0).expect("q = 3"),
        pressure_conv_l3: lp_norm(&pi_conv, 3.0).expect("q = 3"),
        jump_count_cum,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub sup_lp_p: f64,
    pub int_grad_pow: f64,
    pub sup_grad_l2: f64,
    pub int_lap_l2: f64,
    pub int_l3p_p: f64,
    pub max_pressure_l3: f64,
    pub stopping_time: Option<f64>,
    pub final_t: f64,
    pub initial_lp_p: f64,
    pub initial_grad_l2: f64,
    /// `sup ‖u‖_p^p / (1 + ‖u₀‖_p^p)`.
    pub energy_ratio: f64,
}

impl TrajectorySummary {
    pub const FIELDS: [&'static str; 10] = [
        "sup_lp_p",
        "int_grad_pow",
        "sup_grad_l2",
        "int_lap_l2",
        "int_l3p_p",
        "max_pressure_l3",
        "final_t",
        "initial_lp_p",
        "initial_grad_l2",
        "energy_ratio",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.sup_lp_p,
            self.int_grad_pow,
            self.sup_grad_l2,
            self.int_lap_l2,
            self.int_l3p_p,
            self.max_pressure_l3,
            self.final_t,
            self.initial_lp_p,
            self.initial_grad_l2,
            self.energy_ratio,
        ]
    }
}

fn trapezoid(records: &[EnergyRecord], f: impl Fn(&EnergyRecord) -> f64) -> f64 {
    records
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1])))
        .sum()
}

pub fn aggregate(records: &[EnergyRecord], stopping_time: Option<f64>) -> Result<TrajectorySummary> {
    let first = records.first().ok_or(StnsError::EmptySeries)?;
    let last = records.last().ok_or(StnsError::EmptySeries)?;
    let sup = |f: fn(&EnergyRecord) -> f64| records.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let sup_lp_p = sup(|r| r.lp_p);
    Ok(TrajectorySummary {
        sup_lp_p,
        int_grad_pow: trapezoid(records, |r| r.grad_pow),
        sup_grad_l2: sup(|r| r.grad_l2_sq),
        int_lap_l2: trapezoid(records, |r| r.lap_l2_sq),
        int_l3p_p: trapezoid(records, |r| r.l3p_p),
        max_pressure_l3: sup(|r| r.pressure_l3),
        stopping_time,
        final_t: last.t,
        initial_lp_p: first.lp_p,
        initial_grad_l2: first.grad_l2_sq,
        energy_ratio: sup_lp_p / (1.0 + first.lp_p),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEntry {
    pub field: String,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub paths: usize,
    pub entries: Vec<McEntry>,
}

impl McEstimate {
    pub fn get(&self, field: &str) -> Option<&McEntry> {
        self.entries.iter().find(|e| e.field == field)
    }
}

/// Sample mean and standard error `s/√n` (unbiased `s`) per summary field.
/// A single path yields zero standard errors.
pub fn mc_estimate(ensemble: &[TrajectorySummary]) -> Result<McEstimate> {
    if ensemble.is_empty() {
        return Err(StnsError::EmptySeries);
    }
    let n = ensemble.len();
    let entries = TrajectorySummary::FIELDS
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let xs: Vec<f64> = ensemble.iter().map(|s| s.values()[k]).collect();
            let (mean, se) = mean_se(&xs);
            McEntry {
                field: (*name).to_string(),
                mean,
                se,
            }
        })
        .collect();
    Ok(McEstimate { paths: n, entries })
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Append-only record sink shared by concurrent producers; entries carry
/// `(path, sequence)` tags and are ordered on drain.
#[derive(Debug, Default)]
pub struct RecordSink {
    inner: Mutex<Vec<(u64, usize, EnergyRecord)>>,
}

impl RecordSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, path: u64, seq: usize, record: EnergyRecord) {
        self.inner
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push((path, seq, record));
    }

    pub fn into_sorted(self) -> Vec<(u64, usize, EnergyRecord)> {
        let mut v = self.inner.into_inner().unwrap_or_else(|e| e.into_inner());
        v.sort_by_key(|(p, s, _)| (*p, *s));
        v
    }
}
