//! Time integration of the truncated tamed system, stopping logic with
//! left-limit semantics, the linear stochastic heat sub-solver, the inner
//! Picard harness and the truncation-level comparison.
//!
//! One step of the exponential Euler–Maruyama scheme reads
//!
//! ```text
//! u⁻  = E [u + dt·N(u) + φ² P_k𝒫σ(P_k u)ΔW - dt·(Σ μ_j c_j) φ² P_k𝒫S_G(P_k u)]
//! u⁺  = u⁻ + Σ_events c_j φ(u(t-))² P_k𝒫S_G(P_k u)
//! ```
//!
//! with `E = exp(-ν4π²|ξ|²dt)` applied per mode. Jump kicks land after the
//! linear flow, one at a time; the state just before each kick is a left
//! limit and is tested by the stopping rule.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{aggregate, compute_energy, mean_se, EnergyParams, EnergyRecord, TrajectorySummary};
use crate::error::{invalid, Result, StnsError};
use crate::noise::{jump_increment_factor, sample_jumps, JumpEvent, JumpModel, WienerModel};
use crate::operators::{dealias_in_place, leray_project_in_place, smooth_project_in_place, tensor_divergence};
use crate::physics::{convective_term, finish_nonlinear, nonlinear_drift, projected_taming, DriftConfig};
use crate::rng::RngStreams;
use crate::spectral::{lp_norm_pow, GridSpec, RealVectorField, SpectralField, SpectralVectorField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    pub enabled: bool,
    /// Level `M`.
    pub level_m: f64,
    /// Data scale `K`.
    pub scale_k: f64,
}

impl StoppingConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            level_m: f64::INFINITY,
            scale_k: 1.0,
        }
    }

    pub fn new(level_m: f64, scale_k: f64) -> Self {
        Self {
            enabled: true,
            level_m,
            scale_k,
        }
    }

    /// `M·K^p`.
    pub fn threshold(&self, p: f64) -> f64 {
        self.level_m * self.scale_k.powf(p)
    }
}

#[derive(Debug, Clone)]
pub struct StepperConfig {
    pub dt: f64,
    pub horizon: f64,
    pub record_stride: usize,
    pub drift: DriftConfig,
    pub wiener: Arc<WienerModel>,
    pub jumps: Arc<JumpModel>,
    pub stopping: StoppingConfig,
    /// Test the state before every jump kick against the stopping level.
    pub left_limit_check: bool,
}

impl StepperConfig {
    pub fn new(dt: f64, horizon: f64, drift: DriftConfig, wiener: WienerModel, jumps: JumpModel) -> Result<Self> {
        let cfg = Self {
            dt,
            horizon,
            record_stride: 1,
            drift,
            wiener: Arc::new(wiener),
            jumps: Arc::new(jumps),
            stopping: StoppingConfig::disabled(),
            left_limit_check: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "time step must be positive"));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(invalid("horizon", "horizon must be a nonnegative real"));
        }
        if self.horizon > 0.0 && self.dt > self.horizon * (1.0 + 1e-12) {
            return Err(invalid("dt", "time step exceeds the horizon"));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be at least 1"));
        }
        if self.stopping.enabled && (self.stopping.level_m.is_nan() || !(self.stopping.scale_k > 0.0)) {
            return Err(invalid("stopping", "need a real level M and positive scale K"));
        }
        self.drift.validate()
    }

    /// Number of steps to the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Which state tripped the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopTrigger {
    Initial,
    LeftLimit,
    PostStep,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub step: usize,
    u: SpectralVectorField,
    phys: Option<RealVectorField>,
    /// Left limit before the first kick of the most recent jump-carrying step.
    pub u_pre_jump: Option<SpectralVectorField>,
    pub rng: RngStreams,
    /// Running max of `‖u(s)‖_p^p ∨ ‖u(s-)‖_p^p`.
    pub running_max_lp: f64,
    /// Left-endpoint accumulation of `∫ ‖u(s)‖_{3p}^p ds`.
    pub running_int_3p: f64,
    pub stopped_at: Option<f64>,
    pub trigger: Option<StopTrigger>,
    pub jump_log: Vec<JumpEvent>,
}

impl SolverState {
    pub fn u(&self) -> &SpectralVectorField {
        &self.u
    }

    pub fn set_u(&mut self, u: SpectralVectorField) {
        self.u = u;
        self.phys = None;
    }

    /// Physical-space velocity, cached until the state changes.
    pub fn physical(&mut self) -> &RealVectorField {
        if self.phys.is_none() {
            self.phys = Some(self.u.to_real_unchecked());
        }
        self.phys.as_ref().expect("just filled")
    }

    pub fn functional(&self) -> f64 {
        self.running_max_lp + self.running_int_3p
    }

    pub fn jump_count(&self) -> u64 {
        self.jump_log.len() as u64
    }
}

/// Sets `stopped_at` to the current time the first time the running
/// functional reaches `M·K^p`; later calls return the stored time.
pub fn check_stopping(state: &mut SolverState, stopping: &StoppingConfig, p: f64) -> Option<f64> {
    if state.stopped_at.is_none() && stopping.enabled && state.functional() >= stopping.threshold(p) {
        state.stopped_at = Some(state.t);
    }
    state.stopped_at
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// `‖u(t-)‖_p^p` before each kick, in event order.
    pub left_limits: Vec<f64>,
    pub post_lp: f64,
    /// `‖u‖_{3p}^p` at the step start.
    pub l3p_start: f64,
    /// `‖νΔu + N(u)‖₂` at the step start.
    pub drift_l2: f64,
    pub cutoff: f64,
    pub max_speed: f64,
    pub stopped_now: bool,
}

/// `P_{≤k}` with the dealias mask when enabled.
fn truncate(u: &SpectralVectorField, drift: &DriftConfig) -> SpectralVectorField {
    let mut pu = u.clone();
    if drift.dealias {
        dealias_in_place(&mut pu);
    }
    smooth_project_in_place(&mut pu, drift.truncation).expect("validated truncation level");
    pu
}

fn decay_table(grid: &GridSpec, nu: f64, dt: f64) -> Vec<f64> {
    (0..grid.points())
        .map(|idx| (-nu * 4.0 * PI * PI * grid.frequency_sq(idx) * dt).exp())
        .collect()
}

/// Initial data `P_{≤k} 𝒫 Π u₀`, with `Π` the dealias mask (or just the
/// Nyquist clearing when dealiasing is off).
pub fn prepare_initial(u0: &RealVectorField, drift: &DriftConfig) -> SpectralVectorField {
    let mut s = u0.to_spectral();
    if drift.dealias {
        dealias_in_place(&mut s);
    }
    s.symmetrize();
    leray_project_in_place(&mut s);
    smooth_project_in_place(&mut s, drift.truncation).expect("validated truncation level");
    s
}

#[derive(Debug, Clone)]
pub struct Stepper {
    cfg: StepperConfig,
    grid: GridSpec,
    decay: Vec<f64>,
}

impl Stepper {
    pub fn new(cfg: StepperConfig, grid: GridSpec) -> Result<Self> {
        cfg.validate()?;
        let decay = decay_table(&grid, cfg.drift.nu, cfg.dt);
        Ok(Self { cfg, grid, decay })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn energy_params(&self) -> EnergyParams {
        EnergyParams {
            p: self.cfg.drift.p,
            taming: self.cfg.drift.taming,
            cutoff: self.cfg.drift.cutoff,
        }
    }

    /// Wraps already prepared initial data and applies the `t = 0` stopping test.
    pub fn initial_state(&self, u0: SpectralVectorField, rng: RngStreams) -> Result<SolverState> {
        if u0.grid() != &self.grid {
            return Err(StnsError::GridMismatch);
        }
        if !u0.is_finite() {
            return Err(StnsError::IntegrationFault {
                t: 0.0,
                reason: "initial data is not finite".into(),
                snapshot: Box::new(u0.clone()),
                snapshot_t: 0.0,
            });
        }
        let mut state = SolverState {
            t: 0.0,
            step: 0,
            u: u0,
            phys: None,
            u_pre_jump: None,
            rng,
            running_max_lp: 0.0,
            running_int_3p: 0.0,
            stopped_at: None,
            trigger: None,
            jump_log: Vec::new(),
        };
        let p = self.cfg.drift.p;
        state.running_max_lp = lp_norm_pow(state.physical(), p)?;
        if check_stopping(&mut state, &self.cfg.stopping, p).is_some() {
            state.trigger = Some(StopTrigger::Initial);
        }
        Ok(state)
    }

    pub fn record(&self, state: &mut SolverState) -> EnergyRecord {
        let params = self.energy_params();
        let (t, jumps) = (state.t, state.jump_count());
        let phys = state.physical().clone();
        compute_energy(&state.u, &phys, &params, t, jumps)
    }

    fn finish(&self, mut f: SpectralVectorField) -> SpectralVectorField {
        finish_nonlinear(&mut f, &self.cfg.drift);
        f
    }

    pub fn step(&self, state: &mut SolverState) -> Result<StepReport> {
        if let Some(t) = state.stopped_at {
            return Err(StnsError::AlreadyStopped(t));
        }
        let cfg = &self.cfg;
        let (dt, p) = (cfg.dt, cfg.drift.p);
        let t_new = state.t + dt;

        let phys = state.physical().clone();
        let l3p_start = lp_norm_pow(&phys, 3.0 * p)?.powf(1.0 / 3.0);
        let max_speed = phys.max_abs();
        let (nonlin, phi, _) = nonlinear_drift(&state.u, &phys, &cfg.drift);

        // Random inputs are drawn unconditionally so paths stay aligned
        // across configurations that share a seed.
        let dw = state.rng.wiener_increments(cfg.wiener.rank(), dt);
        let events = sample_jumps(&cfg.jumps, state.t, t_new, &mut state.rng);

        let mut next = state.u.clone();
        next.add_assign_scaled(dt, &nonlin);
        let drift_l2 = {
            let g = &self.grid;
            let mut acc = 0.0;
            for c in 0..3 {
                let (u, n) = (state.u.component(c), nonlin.component(c));
                for idx in 0..g.points() {
                    let s = -cfg.drift.nu * 4.0 * PI * PI * g.frequency_sq(idx);
                    acc += (u[idx] * s + n[idx]).norm_sqr();
                }
            }
            (acc * g.volume()).sqrt()
        };

        let noisy = !cfg.wiener.is_silent() || (!cfg.jumps.is_inactive() && !events.is_empty());
        let compensated = !cfg.jumps.is_inactive() && cfg.jumps.compensator() != 0.0;
        let mut pk_phys = None;
        let mut s_g = None;
        if phi != 0.0 && (noisy || compensated) {
            let pk = truncate(&state.u, &cfg.drift).to_real_unchecked();
            if !cfg.wiener.is_silent() {
                let inc = self.finish(cfg.wiener.apply_spectral(&pk, &dw)?);
                next.add_assign_scaled(phi * phi, &inc);
            }
            if compensated {
                let sg = self.finish(cfg.jumps.coefficient(&pk));
                next.add_assign_scaled(-dt * cfg.jumps.compensator() * phi * phi, &sg);
                s_g = Some(sg);
            }
            pk_phys = Some(pk);
        }
        next.apply_multiplier(|idx| self.decay[idx]);

        let mut left_limits = Vec::with_capacity(events.len());
        let mut pre_jump = None;
        for ev in &events {
            let left = next.to_real_unchecked();
            let lp_left = lp_norm_pow(&left, p)?;
            left_limits.push(lp_left);
            if pre_jump.is_none() {
                pre_jump = Some(next.clone());
            }
            let c = cfg.jumps.marks()[ev.mark].amplitude;
            let phi_left = cfg.drift.cutoff.eval(lp_left.powf(1.0 / p));
            if c == 0.0 || phi_left == 0.0 {
                continue;
            }
            if s_g.is_none() {
                let pk = match &pk_phys {
                    Some(pk) => pk.clone(),
                    None => truncate(&state.u, &cfg.drift).to_real_unchecked(),
                };
                s_g = Some(self.finish(cfg.jumps.coefficient(&pk)));
            }
            next.add_assign_scaled(c * phi_left * phi_left, s_g.as_ref().expect("filled above"));
        }
        next.symmetrize();

        if !next.is_finite() {
            return Err(StnsError::IntegrationFault {
                t: t_new,
                reason: "non-finite spectral coefficients".into(),
                snapshot: Box::new(state.u.clone()),
                snapshot_t: state.t,
            });
        }

        state.t = t_new;
        state.step += 1;
        state.running_int_3p += dt * l3p_start;
        if !events.is_empty() {
            state.u_pre_jump = pre_jump;
            state.jump_log.extend_from_slice(&events);
        }
        let was_stopped = state.stopped_at.is_some();
        if cfg.left_limit_check {
            for &lp in &left_limits {
                state.running_max_lp = state.running_max_lp.max(lp);
                if state.stopped_at.is_none() && check_stopping(state, &cfg.stopping, p).is_some() {
                    state.trigger = Some(StopTrigger::LeftLimit);
                }
            }
        }
        state.set_u(next);
        let post_lp = lp_norm_pow(state.physical(), p)?;
        state.running_max_lp = state.running_max_lp.max(post_lp);
        if state.stopped_at.is_none() && check_stopping(state, &cfg.stopping, p).is_some() {
            state.trigger = Some(StopTrigger::PostStep);
        }

        Ok(StepReport {
            left_limits,
            post_lp,
            l3p_start,
            drift_l2,
            cutoff: phi,
            max_speed,
            stopped_now: !was_stopped && state.stopped_at.is_some(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<EnergyRecord>,
    pub summary: TrajectorySummary,
    pub state: SolverState,
    pub warnings: Vec<String>,
}

/// Courant number above which a warning is emitted.
pub const CFL_WARNING: f64 = 0.5;

/// Explicit treatment of the taming term loses stability once `dt·g_N`
/// exceeds this value.
pub const TAMING_STIFFNESS_WARNING: f64 = 2.0;

pub fn run(cfg: &StepperConfig, u0: &RealVectorField, rng: RngStreams) -> Result<RunOutput> {
    run_observed(cfg, u0, rng, &mut |_| Ok(()))
}

/// Like [`run`], calling `observer` on the initial state and after every step.
pub fn run_observed(
    cfg: &StepperConfig,
    u0: &RealVectorField,
    rng: RngStreams,
    observer: &mut dyn FnMut(&mut SolverState) -> Result<()>,
) -> Result<RunOutput> {
    let stepper = Stepper::new(cfg.clone(), *u0.grid())?;
    let mut state = stepper.initial_state(prepare_initial(u0, &cfg.drift), rng)?;
    run_from(&stepper, &mut state, observer).map(|(records, summary, warnings)| RunOutput {
        records,
        summary,
        state,
        warnings,
    })
}

fn run_from(
    stepper: &Stepper,
    state: &mut SolverState,
    observer: &mut dyn FnMut(&mut SolverState) -> Result<()>,
) -> Result<(Vec<EnergyRecord>, TrajectorySummary, Vec<String>)> {
    let cfg = stepper.config();
    let n = cfg.steps();
    let mut records = vec![stepper.record(state)];
    let mut warnings = Vec::new();
    let (mut warned_cfl, mut warned_stiff) = (false, false);
    observer(state)?;
    let dx = stepper.grid().spacing();
    while state.step < n && state.stopped_at.is_none() {
        let rep = stepper.step(state)?;
        let courant = cfg.dt * rep.max_speed / dx;
        if courant > CFL_WARNING && !warned_cfl {
            warned_cfl = true;
            warnings.push(format!(
                "Courant number {courant:.3} exceeds {CFL_WARNING} at t = {}",
                state.t - cfg.dt
            ));
        }
        let damping = cfg.dt * cfg.drift.taming.value(rep.max_speed * rep.max_speed);
        if damping > TAMING_STIFFNESS_WARNING && !warned_stiff {
            warned_stiff = true;
            warnings.push(format!(
                "dt·g_N(max|u|²) = {damping:.3} exceeds {TAMING_STIFFNESS_WARNING} at t = {}; the explicit taming step is unstable",
                state.t - cfg.dt
            ));
        }
        if state.step.is_multiple_of(cfg.record_stride) || state.step == n || state.stopped_at.is_some() {
            records.push(stepper.record(state));
        }
        observer(state)?;
    }
    let summary = aggregate(&records, state.stopped_at)?;
    Ok((records, summary, warnings))
}

/// Lower ends of the admissible forcing exponents in dimension `d`:
/// `q_f ≥ dp/(p+d-2)` and `q_h ≥ dp/(2p+d-2)`; both are capped by `p`.
pub fn exponent_window_f(p: f64, d: f64) -> (f64, f64) {
    (d * p / (p + d - 2.0), p)
}

pub fn exponent_window_h(p: f64, d: f64) -> (f64, f64) {
    (d * p / (2.0 * p + d - 2.0), p)
}

/// Prescribed forcing of the linear heat problem
/// `du = (νΔu + ∇·f + h) dt + Σ g_i dW_i + ∫ G₀ c Ñ(dt, dc)`.
#[derive(Debug, Clone)]
pub struct HeatForcing {
    pub f: Option<SpectralField<9>>,
    pub h: Option<SpectralVectorField>,
    /// One additive coefficient per Wiener component.
    pub g: Vec<SpectralVectorField>,
    pub g0: Option<SpectralVectorField>,
    pub q_f: f64,
    pub q_h: f64,
}

impl HeatForcing {
    pub fn zero(p: f64) -> Self {
        Self {
            f: None,
            h: None,
            g: Vec::new(),
            g0: None,
            q_f: p,
            q_h: p,
        }
    }

    pub fn validate(&self, p: f64) -> Result<()> {
        let (lo, hi) = exponent_window_f(p, 3.0);
        if !(self.q_f >= lo && self.q_f <= hi) {
            return Err(invalid("q_f", format!("q_f = {} outside [{lo}, {hi}]", self.q_f)));
        }
        let (lo, hi) = exponent_window_h(p, 3.0);
        if !(self.q_h >= lo && self.q_h <= hi) {
            return Err(invalid("q_h", format!("q_h = {} outside [{lo}, {hi}]", self.q_h)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HeatConfig {
    pub dt: f64,
    pub horizon: f64,
    pub nu: f64,
    pub record_stride: usize,
    pub energy: EnergyParams,
}

#[derive(Debug, Clone)]
pub struct HeatOutput {
    pub records: Vec<EnergyRecord>,
    pub summary: TrajectorySummary,
    pub u: SpectralVectorField,
    pub t: f64,
}

pub fn heat_solve(
    cfg: &HeatConfig,
    forcing: &HeatForcing,
    jumps: &JumpModel,
    u0: &SpectralVectorField,
    rng: &mut RngStreams,
) -> Result<HeatOutput> {
    forcing.validate(cfg.energy.p)?;
    if !(cfg.dt > 0.0) || !(cfg.horizon >= 0.0) || !(cfg.nu > 0.0) || cfg.record_stride == 0 {
        return Err(invalid("heat", "need dt > 0, horizon ≥ 0, ν > 0 and a positive stride"));
    }
    let grid = *u0.grid();
    let decay = decay_table(&grid, cfg.nu, cfg.dt);
    let mut det = SpectralVectorField::zeros(grid);
    if let Some(f) = &forcing.f {
        det.add_assign_scaled(1.0, &tensor_divergence(f));
    }
    if let Some(h) = &forcing.h {
        det.add_assign_scaled(1.0, h);
    }
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut count = 0u64;
    let record =
        |u: &SpectralVectorField, t: f64, count: u64| compute_energy(u, &u.to_real_unchecked(), &cfg.energy, t, count);
    let mut records = vec![record(&u, t, count)];
    for n in 1..=steps {
        let dw = rng.wiener_increments(forcing.g.len(), cfg.dt);
        let events = sample_jumps(jumps, t, t + cfg.dt, rng);
        u.add_assign_scaled(cfg.dt, &det);
        for (g, w) in forcing.g.iter().zip(&dw) {
            u.add_assign_scaled(*w, g);
        }
        if let Some(g0) = &forcing.g0 {
            let factor = jump_increment_factor(jumps, &events, cfg.dt);
            if factor != 0.0 {
                u.add_assign_scaled(factor, g0);
            }
        }
        u.apply_multiplier(|idx| decay[idx]);
        count += events.len() as u64;
        t += cfg.dt;
        if !u.is_finite() {
            return Err(StnsError::IntegrationFault {
                t,
                reason: "non-finite heat iterate".into(),
                snapshot: Box::new(records.last().map(|_| u.clone()).unwrap_or_else(|| u0.clone())),
                snapshot_t: t - cfg.dt,
            });
        }
        if n % cfg.record_stride == 0 || n == steps {
            records.push(record(&u, t, count));
        }
    }
    let summary = aggregate(&records, None)?;
    Ok(HeatOutput { records, summary, u, t })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub t_star: f64,
    pub m_max: usize,
    pub paths: usize,
    pub base_seed: u64,
    /// Lower bound on the number of steps resolving `[0, t_star]`.
    pub min_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub t_star: f64,
    pub steps: usize,
    pub dt: f64,
    pub paths: usize,
    /// `δ_m = E sup_s ‖U^{(m+1)}(s) - U^{(m)}(s)‖_p^p` for `m = 0..=m_max`.
    pub deltas: Vec<f64>,
    pub delta_se: Vec<f64>,
    /// `δ_{m+1}/δ_m`; a vanishing pair counts as ratio 0.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// `(ε sup_s ‖U(s)‖_p)^p` with `ε = 1e-12`: differences at or below this
    /// level are rounding noise, and a ratio whose numerator sits there is 0.
    pub rounding_floor: f64,
}

/// Relative size below which successive iterates are treated as equal.
pub const PICARD_ROUNDING: f64 = 1e-12;

fn picard_grid_steps(dt: f64, t_star: f64, min_steps: usize) -> usize {
    ((t_star / dt).round() as usize).max(min_steps).max(1)
}

/// Inner Picard iteration on `[0, t_star]` for one noise path. The previous
/// outer iterate `v` is the heat flow of the prepared data `u0`; its forcing
/// is assembled once and reused by every inner iterate, which differ only in
/// the frozen cutoff `Φ^{(m-1)} = φ(‖U^{(m-1)}‖_p)`.
///
/// Returns `δ_m` for `m = 0..=m_max` and `sup_s ‖U(s)‖_p` of the last iterate.
pub fn picard_path(
    cfg: &StepperConfig,
    u0: &SpectralVectorField,
    m_max: usize,
    t_star: f64,
    min_steps: usize,
    rng: &mut RngStreams,
) -> Result<(Vec<f64>, f64)> {
    let grid = *u0.grid();
    let steps = picard_grid_steps(cfg.dt, t_star, min_steps);
    let dt = t_star / steps as f64;
    let decay = decay_table(&grid, cfg.drift.nu, dt);
    let drift = &cfg.drift;
    let p = drift.p;

    let mut forcing: Vec<Option<SpectralVectorField>> = Vec::with_capacity(steps);
    let mut heat = Vec::with_capacity(steps + 1);
    let mut v = u0.clone();
    heat.push(v.clone());
    for i in 0..steps {
        let t = i as f64 * dt;
        let dw = rng.wiener_increments(cfg.wiener.rank(), dt);
        let events = sample_jumps(&cfg.jumps, t, t + dt, rng);
        let v_phys = v.to_real_unchecked();
        let phi_v = drift.cutoff.eval(lp_norm_pow(&v_phys, p)?.powf(1.0 / p));
        if phi_v == 0.0 {
            forcing.push(None);
        } else {
            let mut a = convective_term(&v, &v, drift);
            a.add_assign_scaled(1.0, &projected_taming(&v, drift));
            let mut a = a.scaled(-dt);
            let pk = truncate(&v, drift).to_real_unchecked();
            if !cfg.wiener.is_silent() {
                let mut s = cfg.wiener.apply_spectral(&pk, &dw)?;
                finish_nonlinear(&mut s, drift);
                a.add_assign_scaled(1.0, &s);
            }
            let factor = jump_increment_factor(&cfg.jumps, &events, dt);
            if factor != 0.0 && !cfg.jumps.is_inactive() {
                let mut s = cfg.jumps.coefficient(&pk);
                finish_nonlinear(&mut s, drift);
                a.add_assign_scaled(factor, &s);
            }
            forcing.push(Some(a.scaled(phi_v)));
        }
        v.apply_multiplier(|idx| decay[idx]);
        heat.push(v.clone());
    }

    let norms = |path: &[SpectralVectorField]| -> Result<Vec<f64>> {
        path.iter()
            .map(|u| Ok(lp_norm_pow(&u.to_real_unchecked(), p)?.powf(1.0 / p)))
            .collect()
    };
    let mut prev = heat;
    let mut prev_norms = norms(&prev)?;
    let mut deltas = Vec::with_capacity(m_max + 1);
    for _ in 0..=m_max {
        let mut next = Vec::with_capacity(steps + 1);
        let mut u = u0.clone();
        next.push(u.clone());
        for i in 0..steps {
            if let Some(a) = &forcing[i] {
                let phi = drift.cutoff.eval(prev_norms[i]);
                if phi != 0.0 {
                    u.add_assign_scaled(phi, a);
                }
            }
            u.apply_multiplier(|idx| decay[idx]);
            next.push(u.clone());
        }
        let mut sup = 0.0_f64;
        for (a, b) in next.iter().zip(&prev) {
            let d = a.axpy(-1.0, b).to_real_unchecked();
            sup = sup.max(lp_norm_pow(&d, p)?);
        }
        deltas.push(sup);
        prev_norms = norms(&next)?;
        prev = next;
    }
    Ok((deltas, prev_norms.iter().copied().fold(0.0, f64::max)))
}

/// Ensemble of [`picard_path`] runs over replicates `0..paths` of `base_seed`.
pub fn picard_harness(cfg: &StepperConfig, u0: &SpectralVectorField, pc: &PicardConfig) -> Result<PicardReport> {
    if pc.paths == 0 {
        return Err(invalid("paths", "need at least one path"));
    }
    if !(pc.t_star > 0.0) {
        return Err(invalid("t_star", "must be positive"));
    }
    // Paths hold whole iterate histories, so they run one at a time.
    let per_path = (0..pc.paths as u64)
        .map(|r| {
            let mut rng = RngStreams::new(pc.base_seed, r);
            picard_path(cfg, u0, pc.m_max, pc.t_star, pc.min_steps, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut deltas = Vec::with_capacity(pc.m_max + 1);
    let mut delta_se = Vec::with_capacity(pc.m_max + 1);
    for m in 0..=pc.m_max {
        let xs: Vec<f64> = per_path.iter().map(|(d, _)| d[m]).collect();
        let (mean, se) = mean_se(&xs);
        deltas.push(mean);
        delta_se.push(se);
    }
    let scale = per_path.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    let rounding_floor = (PICARD_ROUNDING * scale).powf(cfg.drift.p);
    let ratios: Vec<f64> = deltas
        .windows(2)
        .map(|w| {
            if w[1] > rounding_floor && w[0] > 0.0 {
                w[1] / w[0]
            } else {
                0.0
            }
        })
        .collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let steps = picard_grid_steps(cfg.dt, pc.t_star, pc.min_steps);
    Ok(PicardReport {
        t_star: pc.t_star,
        steps,
        dt: pc.t_star / steps as f64,
        paths: pc.paths,
        deltas,
        delta_se,
        ratios,
        max_ratio,
        rounding_floor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyReport {
    pub levels: Vec<f64>,
    /// `‖P_{≤k_i}u₀ - P_{≤k_j}u₀‖_p`.
    pub initial_diff: Vec<Vec<f64>>,
    /// `sup_s ‖Δ(s)‖_p^p + ∫ ‖Δ(s)‖_{3p}^p ds` up to the earlier stopping time
    /// of the pair, with `Δ = u^{(k_i)} - u^{(k_j)}`.
    pub trajectory_diff: Vec<Vec<f64>>,
    pub stop_times: Vec<Option<f64>>,
}

/// Integrates every truncation level in lockstep on the same noise path.
pub fn cauchy_study(
    cfg: &StepperConfig,
    u0: &RealVectorField,
    levels: &[f64],
    rng: RngStreams,
) -> Result<CauchyReport> {
    if levels.is_empty() {
        return Err(invalid("levels", "need at least one truncation level"));
    }
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("levels", "truncation levels must be increasing"));
    }
    let grid = *u0.grid();
    let p = cfg.drift.p;
    let n_lv = levels.len();
    let mut steppers = Vec::with_capacity(n_lv);
    let mut states = Vec::with_capacity(n_lv);
    for &k in levels {
        let mut c = cfg.clone();
        c.drift = cfg.drift.with_truncation(k);
        let s = Stepper::new(c, grid)?;
        states.push(s.initial_state(prepare_initial(u0, &s.config().drift), rng.clone())?);
        steppers.push(s);
    }
    let mut initial_diff = vec![vec![0.0; n_lv]; n_lv];
    let mut sup = vec![vec![0.0_f64; n_lv]; n_lv];
    let mut int = vec![vec![0.0; n_lv]; n_lv];
    let mut open = vec![vec![true; n_lv]; n_lv];
    let pair_norms = |a: &SolverState, b: &SolverState| -> Result<(f64, f64)> {
        if std::ptr::eq(a, b) {
            return Ok((0.0, 0.0));
        }
        let d = a.u().axpy(-1.0, b.u()).to_real_unchecked();
        Ok((lp_norm_pow(&d, p)?, lp_norm_pow(&d, 3.0 * p)?.powf(1.0 / 3.0)))
    };
    for i in 0..n_lv {
        for j in i + 1..n_lv {
            let (lp, _) = pair_norms(&states[i], &states[j])?;
            initial_diff[i][j] = lp.powf(1.0 / p);
            initial_diff[j][i] = initial_diff[i][j];
            sup[i][j] = lp;
            if states[i].stopped_at.is_some() || states[j].stopped_at.is_some() {
                open[i][j] = false;
            }
        }
    }
    let n = cfg.steps();
    for _ in 0..n {
        if states.iter().all(|s| s.stopped_at.is_some()) {
            break;
        }
        let mut l3p_start = vec![vec![0.0; n_lv]; n_lv];
        for i in 0..n_lv {
            for j in i + 1..n_lv {
                if open[i][j] {
                    l3p_start[i][j] = pair_norms(&states[i], &states[j])?.1;
                }
            }
        }
        for (s, st) in steppers.iter().zip(states.iter_mut()) {
            if st.stopped_at.is_none() {
                s.step(st)?;
            }
        }
        for i in 0..n_lv {
            for j in i + 1..n_lv {
                if !open[i][j] {
                    continue;
                }
                int[i][j] += cfg.dt * l3p_start[i][j];
                let (lp, _) = pair_norms(&states[i], &states[j])?;
                sup[i][j] = sup[i][j].max(lp);
                if states[i].stopped_at.is_some() || states[j].stopped_at.is_some() {
                    open[i][j] = false;
                }
            }
        }
    }
    let mut trajectory_diff = vec![vec![0.0; n_lv]; n_lv];
    for i in 0..n_lv {
        for j in i + 1..n_lv {
            trajectory_diff[i][j] = sup[i][j] + int[i][j];
            trajectory_diff[j][i] = trajectory_diff[i][j];
        }
    }
    Ok(CauchyReport {
        levels: levels.to_vec(),
        initial_diff,
        trajectory_diff,
        stop_times: states.iter().map(|s| s.stopped_at).collect(),
    })
}

/// Independent replicates `0..paths` of `base_seed`, run in parallel.
pub fn run_ensemble(cfg: &StepperConfig, u0: &RealVectorField, base_seed: u64, paths: usize) -> Result<Vec<RunOutput>> {
    (0..paths as u64)
        .into_par_iter()
        .map(|r| run(cfg, u0, RngStreams::new(base_seed, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::random_solenoidal;
    use crate::noise::{JumpParams, Mark, WienerParams};
    use crate::operators::{divergence_residual, smooth_project};
    use crate::spectral::{lp_norm, Complex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const L: f64 = 8.0 * PI;

    fn grid() -> GridSpec {
        GridSpec::new(16, L).unwrap()
    }

    fn drift(k: f64) -> DriftConfig {
        DriftConfig::new(0.1, 4.0, 20.0, k, 4.0, true).unwrap()
    }

    fn quiet(g: GridSpec, dt: f64, t: f64, d: DriftConfig) -> StepperConfig {
        StepperConfig::new(
            dt,
            t,
            d,
            WienerModel::silent(g, 1).unwrap(),
            JumpModel::none(g).unwrap(),
        )
        .unwrap()
    }

    fn noisy(g: GridSpec, dt: f64, t: f64, d: DriftConfig) -> StepperConfig {
        StepperConfig::new(
            dt,
            t,
            d,
            WienerModel::new(g, &WienerParams::default()).unwrap(),
            JumpModel::new(g, &JumpParams::default()).unwrap(),
        )
        .unwrap()
    }

    fn field(seed: u64, amp: f64) -> RealVectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_solenoidal(grid(), 3, amp, &mut rng).to_real_unchecked()
    }

    #[test]
    fn zero_state_is_absorbing() {
        let g = grid();
        let cfg = quiet(g, 0.01, 0.1, drift(4.0));
        let out = run(&cfg, &RealVectorField::zeros(g), RngStreams::new(1, 0)).unwrap();
        assert_eq!(out.state.u().max_abs(), 0.0);
        assert!(out.records.iter().all(|r| r.lp_p == 0.0));
    }

    #[test]
    fn pure_heat_mode_decays_exactly() {
        let g = grid();
        let idx = g.index([0, 2, 0]);
        let mut s = SpectralVectorField::zeros(g);
        s.set(
            idx,
            [Complex::new(0.0, -0.1), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)],
        );
        s.set(
            g.partner(idx),
            [Complex::new(0.0, 0.1), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)],
        );
        let d = DriftConfig::new(0.1, 100.0, 20.0, 1e6, 4.0, false).unwrap();
        for dt in [0.003, 0.02, 0.5] {
            let stepper = Stepper::new(quiet(g, dt, 100.0 * dt, d), g).unwrap();
            let mut st = stepper.initial_state(s.clone(), RngStreams::new(0, 0)).unwrap();
            let want = (-0.1 * 4.0 * PI * PI * g.frequency_sq(idx) * dt).exp();
            let mut prev = st.u().component(0)[idx];
            for _ in 0..100 {
                stepper.step(&mut st).unwrap();
                let now = st.u().component(0)[idx];
                assert!(((now / prev).re - want).abs() < 1e-13, "dt {dt}");
                prev = now;
            }
        }
    }

    #[test]
    fn noisy_step_keeps_divergence_free() {
        let g = grid();
        let cfg = noisy(g, 0.01, 0.2, drift(4.0));
        let stepper = Stepper::new(cfg.clone(), g).unwrap();
        let u0 = prepare_initial(&field(4, 1.0), &cfg.drift);
        let mut st = stepper.initial_state(u0, RngStreams::new(3, 0)).unwrap();
        for _ in 0..20 {
            stepper.step(&mut st).unwrap();
            assert!(divergence_residual(st.u()) <= 1e-10);
            assert_eq!(st.u().hermitian_defect(), 0.0);
        }
    }

    #[test]
    fn zero_horizon_gives_initial_record() {
        let g = grid();
        let mut cfg = noisy(g, 0.01, 0.01, drift(4.0));
        cfg.horizon = 0.0;
        let out = run(&cfg, &field(1, 1.0), RngStreams::new(0, 0)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].t, 0.0);
    }

    #[test]
    fn unreachable_level_never_stops() {
        let g = grid();
        let mut cfg = noisy(g, 0.01, 0.2, drift(4.0));
        cfg.stopping = StoppingConfig::new(1e12, 1.0);
        let out = run(&cfg, &field(2, 1.0), RngStreams::new(9, 0)).unwrap();
        assert!(out.state.stopped_at.is_none());
        assert_eq!(out.state.step, 20);
    }

    #[test]
    fn zero_noise_l2_nonincreasing() {
        let g = grid();
        let cfg = quiet(g, 0.01, 0.5, drift(4.0));
        let stepper = Stepper::new(cfg.clone(), g).unwrap();
        let mut st = stepper
            .initial_state(prepare_initial(&field(5, 1.5), &cfg.drift), RngStreams::new(0, 0))
            .unwrap();
        for _ in 0..50 {
            let before = st.u().l2_sq();
            let rep = stepper.step(&mut st).unwrap();
            let slack = 10.0 * cfg.dt * before.sqrt() * rep.drift_l2;
            assert!(st.u().l2_sq() <= before + slack);
        }
    }

    #[test]
    fn stop_at_time_zero_below_initial_energy() {
        let g = grid();
        let mut cfg = quiet(g, 0.01, 0.1, drift(4.0));
        let u0 = field(6, 1.0);
        let lp = lp_norm_pow(&prepare_initial(&u0, &cfg.drift).to_real_unchecked(), 4.0).unwrap();
        cfg.stopping = StoppingConfig::new(0.5 * lp, 1.0);
        let out = run(&cfg, &u0, RngStreams::new(0, 0)).unwrap();
        assert_eq!(out.state.stopped_at, Some(0.0));
        assert_eq!(out.state.trigger, Some(StopTrigger::Initial));
        assert_eq!(out.records.len(), 1);
    }

    #[test]
    fn integral_term_triggers_at_predicted_step() {
        let g = grid();
        let c = [0.3, -0.2, 0.1];
        let mag_p = (c.iter().map(|x| x * x).sum::<f64>()).powi(2);
        let u0 = RealVectorField::from_fn(g, |_| c);
        let dt = 0.01;
        let mut cfg = quiet(g, dt, 1.0, drift(4.0));
        // functional at step n: |c|^p L³ + n dt |c|^p L
        let n_star = 37;
        let level = mag_p * L.powi(3) + (n_star as f64 - 0.5) * dt * mag_p * L;
        cfg.stopping = StoppingConfig::new(level, 1.0);
        let out = run(&cfg, &u0, RngStreams::new(0, 0)).unwrap();
        assert_eq!(out.state.step, n_star);
        assert_eq!(out.state.trigger, Some(StopTrigger::PostStep));
        assert!((out.state.running_max_lp - mag_p * L.powi(3)).abs() < 1e-9 * mag_p * L.powi(3));
    }

    #[test]
    fn scripted_jump_left_limit_is_responsible() {
        let g = grid();
        let params = JumpParams {
            marks: vec![
                Mark {
                    weight: 1.0,
                    amplitude: 40.0,
                },
                Mark {
                    weight: 1.0,
                    amplitude: -40.0,
                },
            ],
            ..JumpParams::default()
        };
        let schedule = vec![JumpEvent { time: 0.052, mark: 0 }, JumpEvent { time: 0.055, mark: 1 }];
        let jumps = JumpModel::new(g, &params).unwrap().with_schedule(schedule).unwrap();
        let d = DriftConfig::new(0.1, 1e6, 1e6, 4.0, 4.0, true).unwrap();
        let mut cfg = StepperConfig::new(0.01, 0.2, d, WienerModel::silent(g, 1).unwrap(), jumps).unwrap();
        let u0 = field(7, 0.3);
        let probe = run(&cfg, &u0, RngStreams::new(0, 0)).unwrap();
        let base = probe.records.iter().map(|r| r.lp_p).fold(0.0, f64::max);
        cfg.stopping = StoppingConfig::new(2.0 * base, 1.0);
        let out = run(&cfg, &u0, RngStreams::new(0, 0)).unwrap();
        assert_eq!(out.state.step, 6);
        assert_eq!(out.state.trigger, Some(StopTrigger::LeftLimit));
        assert!(out.state.running_max_lp > 2.0 * base);
        assert!(out.state.u_pre_jump.is_some());

        cfg.left_limit_check = false;
        let blind = run(&cfg, &u0, RngStreams::new(0, 0)).unwrap();
        assert!(blind.state.stopped_at.is_none());
    }

    #[test]
    fn identical_seeds_identical_records() {
        let g = grid();
        let cfg = noisy(g, 0.01, 0.1, drift(4.0));
        let a = run(&cfg, &field(8, 1.0), RngStreams::new(11, 2)).unwrap();
        let b = run(&cfg, &field(8, 1.0), RngStreams::new(11, 2)).unwrap();
        assert_eq!(a.records, b.records);
    }

    fn heat_cfg(dt: f64, t: f64) -> HeatConfig {
        HeatConfig {
            dt,
            horizon: t,
            nu: 0.1,
            record_stride: 1,
            energy: EnergyParams {
                p: 4.0,
                taming: crate::physics::TamingFunction::new(1e6, 0.1).unwrap(),
                cutoff: crate::physics::CutoffFunction::new(1e6).unwrap(),
            },
        }
    }

    #[test]
    fn heat_pure_decay() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u0 = random_solenoidal(g, 3, 1.0, &mut rng);
        let cfg = heat_cfg(0.05, 1.0);
        let out = heat_solve(
            &cfg,
            &HeatForcing::zero(4.0),
            &JumpModel::none(g).unwrap(),
            &u0,
            &mut RngStreams::new(0, 0),
        )
        .unwrap();
        for idx in 0..g.points() {
            let want = u0.component(1)[idx] * (-0.1 * 4.0 * PI * PI * g.frequency_sq(idx) * out.t).exp();
            assert!((out.u.component(1)[idx] - want).norm() <= 1e-13 * u0.max_abs());
        }
    }

    #[test]
    fn heat_constant_mean_forcing() {
        let g = grid();
        let mut h = SpectralVectorField::zeros(g);
        h.set(
            0,
            [Complex::new(0.25, 0.0), Complex::new(-0.5, 0.0), Complex::new(0.0, 0.0)],
        );
        let forcing = HeatForcing {
            h: Some(h),
            ..HeatForcing::zero(4.0)
        };
        let u0 = SpectralVectorField::zeros(g);
        let cfg = heat_cfg(0.01, 1.0);
        let out = heat_solve(
            &cfg,
            &forcing,
            &JumpModel::none(g).unwrap(),
            &u0,
            &mut RngStreams::new(0, 0),
        )
        .unwrap();
        assert!((out.u.component(0)[0].re - 0.25 * out.t).abs() < 1e-12);
        assert!((out.u.component(1)[0].re + 0.5 * out.t).abs() < 1e-12);
    }

    #[test]
    fn heat_exponent_windows() {
        let ok = |qf, qh| {
            HeatForcing {
                q_f: qf,
                q_h: qh,
                ..HeatForcing::zero(4.0)
            }
            .validate(4.0)
            .is_ok()
        };
        assert_eq!(exponent_window_f(4.0, 3.0), (2.4, 4.0));
        assert!((exponent_window_h(4.0, 3.0).0 - 4.0 / 3.0).abs() < 1e-15);
        assert!(ok(3.0, 2.0));
        assert!(!ok(2.0, 2.0));
        assert!(!ok(3.0, 1.0));
        assert!(!ok(4.5, 2.0));
    }

    #[test]
    fn picard_cutoff_zero_gives_fixed_point() {
        let g = grid();
        let d = DriftConfig::new(0.1, 4.0, 1.0, 4.0, 4.0, true).unwrap();
        let cfg = noisy(g, 0.01, 0.1, d);
        let u0 = prepare_initial(&field(9, 3.0), &d);
        assert!(lp_norm(&u0.to_real_unchecked(), 4.0).unwrap() > 2.0 * 1.0 * 1.5);
        let pc = PicardConfig {
            t_star: 0.05,
            m_max: 2,
            paths: 2,
            base_seed: 1,
            min_steps: 4,
        };
        let rep = picard_harness(&cfg, &u0, &pc).unwrap();
        assert!(rep.deltas.iter().all(|d| *d == 0.0), "{:?}", rep.deltas);
    }

    #[test]
    fn picard_baseline_positive() {
        let g = grid();
        let u0 = prepare_initial(&field(10, 1.0), &drift(4.0));
        let norm = lp_norm(&u0.to_real_unchecked(), 4.0).unwrap();
        let d = DriftConfig::new(0.1, 0.5, (norm / 1.5).max(1.0), 4.0, 4.0, true).unwrap();
        let cfg = noisy(g, 0.01, 0.1, d);
        let pc = PicardConfig {
            t_star: 0.04,
            m_max: 3,
            paths: 2,
            base_seed: 5,
            min_steps: 4,
        };
        let rep = picard_harness(&cfg, &u0, &pc).unwrap();
        assert!(rep.deltas[0] > 0.0);
        assert!(rep.deltas.iter().all(|d| d.is_finite()));
    }

    #[test]
    fn cauchy_same_level_is_zero_and_initial_bound_holds() {
        let g = grid();
        let cfg = noisy(g, 0.01, 0.05, drift(4.0));
        let u0 = field(12, 1.0);
        let rep = cauchy_study(&cfg, &u0, &[2.0, 4.0], RngStreams::new(3, 0)).unwrap();
        assert_eq!(rep.trajectory_diff[0][0], 0.0);
        assert!(rep.trajectory_diff[0][1] > 0.0);

        // two independent integrations at one level agree bit for bit
        let a = run(&cfg, &u0, RngStreams::new(3, 0)).unwrap();
        let b = run(&cfg, &u0, RngStreams::new(3, 0)).unwrap();
        assert_eq!(a.state.u(), b.state.u());

        let base = prepare_initial(&u0, &drift(1e9));
        let c_psi = 2.0 * PI.powf(-1.5);
        let grad = {
            let gt = crate::operators::gradient_tensor(&base).to_real_unchecked();
            let mut acc = 0.0;
            for idx in 0..g.points() {
                acc += gt.at(idx).iter().map(|x| x * x).sum::<f64>().powi(2);
            }
            (acc * g.cell_volume()).powf(0.25)
        };
        for (k, m) in [(2.0, 4.0), (4.0, 8.0)] {
            let a = smooth_project(&base, k).unwrap();
            let b = smooth_project(&base, m).unwrap();
            let lhs = lp_norm(&a.axpy(-1.0, &b).to_real_unchecked(), 4.0).unwrap();
            assert!(lhs <= c_psi * (1.0 / k - 1.0 / m) * grad * 1.05);
        }
    }
}
