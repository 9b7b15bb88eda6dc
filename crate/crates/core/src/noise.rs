//! Finite-rank stochastic forcing.
//!
//! Both coefficients share the structure `S(u) = 𝒫[κ ∗ (a Θ_α(u) + b)]` with a
//! Gaussian smoothing kernel `κ`, a scalar Gaussian envelope `a` and a
//! Gaussian-enveloped constant-direction offset field `b`. The Wiener
//! coefficient is `σ(u)h = Σ_i h_i β_i S_i(u)` with `α = 1/2`; the jump
//! coefficient is `G(u, z_j) = c_j S_G(u)` over a finite mark set.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, StnsError};
use crate::operators::leray_project_in_place;
use crate::rng::RngStreams;
use crate::spectral::{lp_norm, lp_norm_pow, GridSpec, RealVectorField, ScalarField, SpectralVectorField};

/// `Θ_α(ξ) = |ξ|^α ξ / (1 + |ξ|^{1+α})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaMap {
    alpha: f64,
}

impl ThetaMap {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..2.0 / 3.0).contains(&alpha) {
            return Err(invalid("alpha", format!("alpha must lie in [0, 2/3), got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Radial factor `|v|^α / (1 + |v|^{1+α})`.
    #[inline]
    pub fn factor(&self, norm: f64) -> f64 {
        if norm == 0.0 {
            return 0.0;
        }
        let na = norm.powf(self.alpha);
        na / (1.0 + na * norm)
    }

    #[inline]
    pub fn eval(&self, v: [f64; 3]) -> [f64; 3] {
        let f = self.factor((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
        [f * v[0], f * v[1], f * v[2]]
    }

    pub fn apply(&self, u: &RealVectorField) -> RealVectorField {
        let mut out = RealVectorField::zeros(*u.grid());
        for idx in 0..u.grid().points() {
            out.set(idx, self.eval(u.at(idx)));
        }
        out
    }
}

/// Spatial parameters of one coefficient map `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    /// Standard deviation of the Gaussian kernel `κ`; `κ̂(ξ) = exp(-2π² s² |ξ|²)`.
    pub kernel_width: f64,
    pub envelope_amplitude: f64,
    pub envelope_width: f64,
    pub offset_amplitude: f64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            kernel_width: 0.5,
            envelope_amplitude: 1.0,
            envelope_width: 4.0,
            offset_amplitude: 0.1,
        }
    }
}

impl ShapeParams {
    fn validate(&self) -> Result<()> {
        if !(self.kernel_width >= 0.0) {
            return Err(invalid("kernel_width", "must be nonnegative"));
        }
        if !(self.envelope_width > 0.0) {
            return Err(invalid("envelope_width", "must be positive"));
        }
        if !self.envelope_amplitude.is_finite() || !self.offset_amplitude.is_finite() {
            return Err(invalid("amplitude", "must be finite"));
        }
        Ok(())
    }
}

fn periodic_gaussian(grid: &GridSpec, x: [f64; 3], centre: [f64; 3], width: f64) -> f64 {
    let l = grid.length();
    let mut r2 = 0.0;
    for i in 0..3 {
        let mut d = (x[i] - centre[i]).rem_euclid(l);
        if d > 0.5 * l {
            d -= l;
        }
        r2 += d * d;
    }
    (-r2 / (2.0 * width * width)).exp()
}

/// One realised map `u ↦ 𝒫[κ ∗ (a Θ_α(u) + b)]`.
#[derive(Debug, Clone)]
pub struct NoiseShape {
    theta: ThetaMap,
    kernel_width: f64,
    envelope: ScalarField,
    /// Precomputed `𝒫[κ ∗ b]`.
    offset_hat: SpectralVectorField,
}

impl NoiseShape {
    pub fn new(
        grid: GridSpec,
        theta: ThetaMap,
        params: &ShapeParams,
        centre: [f64; 3],
        direction: [f64; 3],
    ) -> Result<Self> {
        params.validate()?;
        let envelope = ScalarField::from_fn(grid, |x| {
            [params.envelope_amplitude * periodic_gaussian(&grid, x, centre, params.envelope_width)]
        });
        let offset = RealVectorField::from_fn(grid, |x| {
            let e = params.offset_amplitude * periodic_gaussian(&grid, x, centre, params.envelope_width);
            [e * direction[0], e * direction[1], e * direction[2]]
        });
        let mut shape = Self {
            theta,
            kernel_width: params.kernel_width,
            envelope,
            offset_hat: SpectralVectorField::zeros(grid),
        };
        shape.offset_hat = shape.smooth_and_project(offset.to_spectral());
        Ok(shape)
    }

    fn smooth_and_project(&self, mut f: SpectralVectorField) -> SpectralVectorField {
        let g = *f.grid();
        let s2 = 2.0 * PI * PI * self.kernel_width * self.kernel_width;
        f.apply_multiplier(|idx| (-s2 * g.frequency_sq(idx)).exp());
        f.zero_nyquist();
        leray_project_in_place(&mut f);
        f
    }

    pub fn theta(&self) -> &ThetaMap {
        &self.theta
    }

    /// `S(u)` given `Θ_α(u)` already evaluated pointwise.
    fn apply_theta(&self, theta_u: &RealVectorField) -> SpectralVectorField {
        let mut w = theta_u.clone();
        let a = self.envelope.component(0);
        for c in 0..3 {
            w.component_mut(c).iter_mut().zip(a).for_each(|(v, s)| *v *= s);
        }
        let mut out = self.smooth_and_project(w.to_spectral());
        out.add_assign_scaled(1.0, &self.offset_hat);
        out
    }

    pub fn apply(&self, u: &RealVectorField) -> SpectralVectorField {
        self.apply_theta(&self.theta.apply(u))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerParams {
    pub rank: usize,
    /// Per-component scalars `β_i`; a single entry is broadcast.
    pub beta: Vec<f64>,
    pub shape: ShapeParams,
}

impl Default for WienerParams {
    fn default() -> Self {
        Self {
            rank: 4,
            beta: vec![1.0],
            shape: ShapeParams {
                offset_amplitude: 0.05,
                envelope_amplitude: 0.05,
                ..ShapeParams::default()
            },
        }
    }
}

fn component_layout(grid: &GridSpec, i: usize, count: usize) -> ([f64; 3], [f64; 3]) {
    let l = grid.length();
    let phase = 2.0 * PI * i as f64 / count.max(1) as f64;
    let centre = [
        l * (0.5 + 0.25 * phase.cos()),
        l * (0.5 + 0.25 * phase.sin()),
        l * (0.5 + 0.1 * (i % 3) as f64),
    ];
    let mut direction = [0.0; 3];
    direction[i % 3] = 1.0;
    (centre, direction)
}

#[derive(Debug, Clone)]
pub struct WienerModel {
    beta: Vec<f64>,
    shapes: Vec<NoiseShape>,
}

impl WienerModel {
    pub fn new(grid: GridSpec, params: &WienerParams) -> Result<Self> {
        if params.rank == 0 {
            return Err(invalid("rank", "Wiener rank must be positive"));
        }
        let beta = match params.beta.len() {
            1 => vec![params.beta[0]; params.rank],
            n if n == params.rank => params.beta.clone(),
            n => {
                return Err(StnsError::DimensionMismatch {
                    expected: params.rank,
                    got: n,
                })
            }
        };
        let theta = ThetaMap::new(0.5)?;
        let shapes = (0..params.rank)
            .map(|i| {
                let (centre, dir) = component_layout(&grid, i, params.rank);
                NoiseShape::new(grid, theta, &params.shape, centre, dir)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { beta, shapes })
    }

    /// A model whose every component vanishes.
    pub fn silent(grid: GridSpec, rank: usize) -> Result<Self> {
        let params = WienerParams {
            rank,
            beta: vec![0.0],
            shape: ShapeParams::default(),
        };
        Self::new(grid, &params)
    }

    pub fn rank(&self) -> usize {
        self.beta.len()
    }

    pub fn is_silent(&self) -> bool {
        self.beta.iter().all(|b| *b == 0.0)
    }

    /// `β_i S_i(u)` for every component.
    pub fn components(&self, u: &RealVectorField) -> Vec<SpectralVectorField> {
        let theta_u = self.shapes[0].theta().apply(u);
        self.shapes
            .iter()
            .zip(&self.beta)
            .map(|(s, b)| s.apply_theta(&theta_u).scaled(*b))
            .collect()
    }

    /// `σ(u) dW = Σ_i dW_i β_i S_i(u)` in spectral space.
    pub fn apply_spectral(&self, u: &RealVectorField, dw: &[f64]) -> Result<SpectralVectorField> {
        if dw.len() != self.rank() {
            return Err(StnsError::DimensionMismatch {
                expected: self.rank(),
                got: dw.len(),
            });
        }
        let mut out = SpectralVectorField::zeros(*u.grid());
        if dw.iter().all(|w| *w == 0.0) || self.is_silent() {
            return Ok(out);
        }
        // Every component shares Θ, κ and 𝒫, so the weighted envelopes are
        // summed pointwise first and smoothed once.
        let theta_u = self.shapes[0].theta().apply(u);
        let grid = *u.grid();
        let mut weight = vec![0.0; grid.points()];
        for ((shape, b), w) in self.shapes.iter().zip(&self.beta).zip(dw) {
            let s = w * b;
            if s == 0.0 {
                continue;
            }
            weight
                .iter_mut()
                .zip(shape.envelope.component(0))
                .for_each(|(acc, e)| *acc += s * e);
            out.add_assign_scaled(s, &shape.offset_hat);
        }
        let mut w = theta_u;
        for c in 0..3 {
            w.component_mut(c).iter_mut().zip(&weight).for_each(|(v, s)| *v *= s);
        }
        out.add_assign_scaled(1.0, &self.shapes[0].smooth_and_project(w.to_spectral()));
        Ok(out)
    }

    /// `𝕃^q` coefficient norm `(∫ (Σ_i |β_i S_i(u)(x)|²)^{q/2} dx)^{1/q}`.
    pub fn coefficient_norm(&self, u: &RealVectorField, q: f64) -> Result<f64> {
        let grid = *u.grid();
        let comps: Vec<RealVectorField> = self.components(u).iter().map(|c| c.to_real_unchecked()).collect();
        let sq = ScalarField::from_components(
            grid,
            [(0..grid.points())
                .map(|idx| comps.iter().map(|c| c.magnitude_sq(idx)).sum::<f64>().sqrt())
                .collect()],
        )?;
        lp_norm(&sq, q)
    }
}

/// `σ(u) dW` in physical space.
pub fn sigma_apply(model: &WienerModel, u: &RealVectorField, dw: &[f64]) -> Result<RealVectorField> {
    Ok(model.apply_spectral(u, dw)?.to_real_unchecked())
}

/// Fitted constant of the growth audit `‖σ(u)‖_{𝕃²} ≤ C (‖u‖₂ + 1)`.
pub fn sigma_growth_constant(model: &WienerModel, samples: &[RealVectorField]) -> Result<f64> {
    let mut c = 0.0_f64;
    for u in samples {
        let lhs = model.coefficient_norm(u, 2.0)?;
        c = c.max(lhs / (lp_norm(u, 2.0)? + 1.0));
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    /// Mark measure `μ({z_j}) > 0`.
    pub weight: f64,
    /// Amplitude `c_j` in `G(u, z_j) = c_j S_G(u)`.
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpParams {
    pub marks: Vec<Mark>,
    pub alpha: f64,
    pub shape: ShapeParams,
}

impl Default for JumpParams {
    fn default() -> Self {
        Self {
            marks: vec![
                Mark {
                    weight: 1.0,
                    amplitude: 0.5,
                },
                Mark {
                    weight: 0.5,
                    amplitude: -0.3,
                },
                Mark {
                    weight: 0.25,
                    amplitude: 0.8,
                },
            ],
            alpha: 0.5,
            shape: ShapeParams {
                offset_amplitude: 0.1,
                envelope_amplitude: 0.1,
                ..ShapeParams::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct JumpModel {
    marks: Vec<Mark>,
    shape: NoiseShape,
    total_rate: f64,
    /// When set, replaces Poisson sampling with a fixed schedule.
    scripted: Option<Vec<JumpEvent>>,
}

impl JumpModel {
    pub fn new(grid: GridSpec, params: &JumpParams) -> Result<Self> {
        for m in &params.marks {
            if !(m.weight > 0.0) || !m.weight.is_finite() {
                return Err(invalid("jump_weight", "mark weights must be positive"));
            }
            if !m.amplitude.is_finite() {
                return Err(invalid("jump_amplitude", "must be finite"));
            }
        }
        let theta = ThetaMap::new(params.alpha)?;
        let (centre, dir) = component_layout(&grid, 1, 3);
        let shape = NoiseShape::new(grid, theta, &params.shape, centre, dir)?;
        Ok(Self {
            total_rate: params.marks.iter().map(|m| m.weight).sum(),
            marks: params.marks.clone(),
            shape,
            scripted: None,
        })
    }

    pub fn none(grid: GridSpec) -> Result<Self> {
        Self::new(
            grid,
            &JumpParams {
                marks: Vec::new(),
                ..JumpParams::default()
            },
        )
    }

    pub fn with_schedule(mut self, mut events: Vec<JumpEvent>) -> Result<Self> {
        if let Some(e) = events.iter().find(|e| e.mark >= self.marks.len()) {
            return Err(invalid("mark", format!("scripted mark {} out of range", e.mark)));
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        self.scripted = Some(events);
        Ok(self)
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    /// `Λ = Σ_j μ_j`.
    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    /// `Σ_j μ_j c_j`, the compensator coefficient.
    pub fn compensator(&self) -> f64 {
        self.marks.iter().map(|m| m.weight * m.amplitude).sum()
    }

    /// `Σ_j μ_j |c_j|^r`.
    pub fn amplitude_moment(&self, r: f64) -> f64 {
        self.marks.iter().map(|m| m.weight * m.amplitude.abs().powf(r)).sum()
    }

    pub fn is_inactive(&self) -> bool {
        self.marks.is_empty() || self.marks.iter().all(|m| m.amplitude == 0.0)
    }

    pub fn shape(&self) -> &NoiseShape {
        &self.shape
    }

    /// `S_G(u)`.
    pub fn coefficient(&self, u: &RealVectorField) -> SpectralVectorField {
        self.shape.apply(u)
    }

    /// `∫_Z ‖G(u, z)‖_p^r μ(dz) = (Σ μ_j |c_j|^r) ‖S_G(u)‖_p^r`.
    pub fn moment(&self, u: &RealVectorField, p: f64, r: f64) -> Result<f64> {
        let s = lp_norm(&self.coefficient(u).to_real_unchecked(), p)?;
        Ok(self.amplitude_moment(r) * s.powf(r))
    }
}

/// Marked Poisson events in `(t0, t1]`, strictly increasing in time.
pub fn sample_jumps(model: &JumpModel, t0: f64, t1: f64, rng: &mut RngStreams) -> Vec<JumpEvent> {
    if let Some(events) = &model.scripted {
        let eps = 1e-9 * (t1 - t0).abs();
        return events
            .iter()
            .filter(|e| e.time > t0 + eps && e.time <= t1 + eps)
            .copied()
            .collect();
    }
    let rate = model.total_rate;
    let mut out = Vec::new();
    if !(rate > 0.0) || !(t1 > t0) {
        return out;
    }
    let mut t = t0;
    loop {
        t += rng.exponential(rate);
        if t > t1 {
            break;
        }
        if t <= out.last().map_or(t0, |e: &JumpEvent| e.time) {
            continue;
        }
        let u = rng.mark_uniform() * rate;
        let mut acc = 0.0;
        let mut mark = model.marks.len() - 1;
        for (j, m) in model.marks.iter().enumerate() {
            acc += m.weight;
            if u < acc {
                mark = j;
                break;
            }
        }
        out.push(JumpEvent { time: t, mark });
    }
    out
}

/// Scalar multiplying `S_G(u_pre)` in the compensated increment:
/// `Σ_{events} c_j - dt Σ_j μ_j c_j`.
pub fn jump_increment_factor(model: &JumpModel, jumps: &[JumpEvent], dt: f64) -> f64 {
    let kicks: f64 = jumps.iter().map(|e| model.marks[e.mark].amplitude).sum();
    kicks - dt * model.compensator()
}

/// Compensated increment `Σ c_j S_G(u_pre) - dt (Σ μ_j c_j) S_G(u_pre)`.
pub fn jump_increment(model: &JumpModel, u_pre: &RealVectorField, jumps: &[JumpEvent], dt: f64) -> RealVectorField {
    let f = jump_increment_factor(model, jumps, dt);
    if f == 0.0 {
        return RealVectorField::zeros(*u_pre.grid());
    }
    model.coefficient(u_pre).scaled(f).to_real_unchecked()
}

/// Fitted constant `C` of the audit
/// `∫‖G(u₁,z) - G(u₂,z)‖_p^r μ(dz) ≤ C ‖(|u₁| + |u₂|)^α |u₁ - u₂|‖_p^r`.
pub fn jump_lipschitz_constant(
    model: &JumpModel,
    pairs: &[(RealVectorField, RealVectorField)],
    p: f64,
    r: f64,
) -> Result<f64> {
    let alpha = model.shape.theta().alpha();
    let mut c = 0.0_f64;
    for (a, b) in pairs {
        let diff = model.coefficient(a).axpy(-1.0, &model.coefficient(b));
        let lhs = model.amplitude_moment(r) * lp_norm(&diff.to_real_unchecked(), p)?.powf(r);
        let grid = *a.grid();
        let w = ScalarField::from_components(
            grid,
            [(0..grid.points())
                .map(|idx| {
                    let s = a.magnitude_sq(idx).sqrt() + b.magnitude_sq(idx).sqrt();
                    let d: f64 = (0..3)
                        .map(|k| (a.component(k)[idx] - b.component(k)[idx]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    s.powf(alpha) * d
                })
                .collect()],
        )?;
        let rhs = lp_norm_pow(&w, p)?.powf(r / p);
        if rhs > 0.0 {
            c = c.max(lhs / rhs);
        }
    }
    Ok(c)
}
