//! Run configuration: a flat `section.key = value` text format with `#`
//! comments, where repeating a key builds a list.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use stns_core::diagnostics::EnergyParams;
use stns_core::noise::{JumpEvent, JumpModel, JumpParams, Mark, ShapeParams, WienerModel, WienerParams};
use stns_core::physics::{CutoffFunction, DriftConfig, TamingFunction};
use stns_core::solver::{exponent_window_f, exponent_window_h, StepperConfig, StoppingConfig};
use stns_core::GridSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `section.key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("`{key}`: cannot parse `{value}` as {kind}")]
    Parse {
        key: String,
        value: String,
        kind: &'static str,
    },
    #[error("`{key}` takes a single value")]
    Repeated { key: String },
    #[error("{key} {reason}")]
    Range { key: String, reason: String },
}

fn range(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSection {
    pub modes: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicsSection {
    pub nu: f64,
    pub taming_threshold: f64,
    pub p: f64,
    pub cutoff_radius: f64,
    pub truncation: f64,
    pub dealias: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSection {
    pub wiener_rank: usize,
    pub wiener_beta: Vec<f64>,
    pub wiener_envelope: f64,
    pub wiener_offset: f64,
    pub kernel_width: f64,
    pub envelope_width: f64,
    pub jump_weights: Vec<f64>,
    pub jump_amplitudes: Vec<f64>,
    pub jump_alpha: f64,
    pub jump_envelope: f64,
    pub jump_offset: f64,
    /// Scripted jump times; when present, replaces Poisson sampling.
    pub jump_times: Vec<f64>,
    pub jump_marks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepperSection {
    pub dt: f64,
    pub horizon: f64,
    pub record_stride: usize,
    pub left_limit_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingSection {
    pub enabled: bool,
    pub level_m: f64,
    pub scale_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSection {
    pub paths: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Snapshot every this many steps; 0 keeps only the first and last.
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitSection {
    /// `random`, `bump`, `constant` or `zero`.
    pub kind: String,
    pub amplitude: f64,
    pub max_wavenumber: i64,
    pub width: f64,
    pub value: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatSection {
    pub q_f: Option<f64>,
    pub q_h: Option<f64>,
    pub h_mean: Vec<f64>,
    pub f_scale: f64,
    pub g_scale: f64,
    pub g0_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardSection {
    pub t_star: f64,
    pub m_max: usize,
    pub paths: usize,
    pub min_steps: usize,
    pub halvings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchySection {
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid: GridSection,
    pub physics: PhysicsSection,
    pub noise: NoiseSection,
    pub stepper: StepperSection,
    pub stopping: StoppingSection,
    pub mc: McSection,
    pub output: OutputSection,
    pub init: InitSection,
    pub heat: HeatSection,
    pub picard: PicardSection,
    pub cauchy: CauchySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSection {
                modes: 32,
                length: 8.0 * PI,
            },
            physics: PhysicsSection {
                nu: 0.1,
                taming_threshold: 4.0,
                p: 4.0,
                cutoff_radius: 40.0,
                truncation: 4.0,
                dealias: true,
            },
            noise: NoiseSection {
                wiener_rank: 4,
                wiener_beta: vec![1.0],
                wiener_envelope: 0.05,
                wiener_offset: 0.05,
                kernel_width: 0.5,
                envelope_width: 4.0,
                jump_weights: vec![1.0, 0.5, 0.25],
                jump_amplitudes: vec![0.5, -0.3, 0.8],
                jump_alpha: 0.5,
                jump_envelope: 0.1,
                jump_offset: 0.1,
                jump_times: Vec::new(),
                jump_marks: Vec::new(),
            },
            stepper: StepperSection {
                dt: 0.01,
                horizon: 1.0,
                record_stride: 1,
                left_limit_check: true,
            },
            stopping: StoppingSection {
                enabled: false,
                level_m: 1e12,
                scale_k: 1.0,
            },
            mc: McSection { paths: 1, base_seed: 0 },
            output: OutputSection {
                directory: PathBuf::from("stns-out"),
                snapshot_stride: 0,
            },
            init: InitSection {
                kind: "random".into(),
                amplitude: 1.0,
                max_wavenumber: 3,
                width: 2.0,
                value: vec![0.0, 0.0, 0.0],
                seed: 0,
            },
            heat: HeatSection {
                q_f: None,
                q_h: None,
                h_mean: vec![0.0, 0.0, 0.0],
                f_scale: 0.0,
                g_scale: 0.0,
                g0_scale: 0.0,
            },
            picard: PicardSection {
                t_star: 0.5,
                m_max: 5,
                paths: 32,
                min_steps: 16,
                halvings: 6,
            },
            cauchy: CauchySection {
                levels: vec![4.0, 8.0, 16.0, 32.0],
            },
        }
    }
}

/// Raw `key -> [(line, value)]` table.
#[derive(Debug, Default)]
struct Table {
    entries: BTreeMap<String, Vec<(usize, String)>>,
}

fn parse_real(key: &str, raw: &str) -> Result<f64, ConfigError> {
    let err = || ConfigError::Parse {
        key: key.to_string(),
        value: raw.to_string(),
        kind: "a real number",
    };
    let s = raw.trim();
    let stripped = s.strip_suffix("pi").or_else(|| s.strip_suffix('π'));
    let v = match stripped {
        Some(coef) => {
            let coef = coef.trim().trim_end_matches('*').trim();
            let c = if coef.is_empty() {
                1.0
            } else {
                coef.parse::<f64>().map_err(|_| err())?
            };
            c * PI
        }
        None => s.parse::<f64>().map_err(|_| err())?,
    };
    if v.is_nan() {
        return Err(err());
    }
    Ok(v)
}

impl Table {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut t = Table::default();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let (k, v) = (k.trim(), v.trim().trim_matches('"'));
            if !k.contains('.') || k.starts_with('.') || k.ends_with('.') || v.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            t.entries.entry(k.to_string()).or_default().push((i + 1, v.to_string()));
        }
        Ok(t)
    }

    fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.entries.keys().any(|k| k.starts_with(&prefix))
    }

    fn take_list(&mut self, key: &str) -> Option<Vec<String>> {
        self.entries
            .remove(key)
            .map(|v| v.into_iter().map(|(_, s)| s).collect())
    }

    fn take_one(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.take_list(key) {
            None => Ok(None),
            Some(mut v) if v.len() == 1 => Ok(v.pop()),
            Some(_) => Err(ConfigError::Repeated { key: key.to_string() }),
        }
    }

    fn real(&mut self, key: &str, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(s) = self.take_one(key)? {
            *slot = parse_real(key, &s)?;
        }
        Ok(())
    }

    fn opt_real(&mut self, key: &str, slot: &mut Option<f64>) -> Result<(), ConfigError> {
        if let Some(s) = self.take_one(key)? {
            *slot = Some(parse_real(key, &s)?);
        }
        Ok(())
    }

    fn reals(&mut self, key: &str, slot: &mut Vec<f64>) -> Result<(), ConfigError> {
        if let Some(v) = self.take_list(key) {
            // A single entry may hold a comma-separated list.
            *slot = v
                .iter()
                .flat_map(|s| s.split(','))
                .map(|s| parse_real(key, s))
                .collect::<Result<_, _>>()?;
        }
        Ok(())
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, kind: &'static str, slot: &mut T) -> Result<(), ConfigError> {
        if let Some(s) = self.take_one(key)? {
            *slot = s.parse().map_err(|_| ConfigError::Parse {
                key: key.to_string(),
                value: s.clone(),
                kind,
            })?;
        }
        Ok(())
    }

    fn integers<T: std::str::FromStr>(&mut self, key: &str, slot: &mut Vec<T>) -> Result<(), ConfigError> {
        if let Some(v) = self.take_list(key) {
            *slot = v
                .iter()
                .flat_map(|s| s.split(','))
                .map(|s| {
                    s.trim().parse().map_err(|_| ConfigError::Parse {
                        key: key.to_string(),
                        value: s.to_string(),
                        kind: "an integer",
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut t = Table::parse(text)?;
        let mut c = RunConfig::default();
        let heat_present = t.has_section("heat");

        t.parsed("grid.modes", "an even integer", &mut c.grid.modes)?;
        t.real("grid.length", &mut c.grid.length)?;

        let ph = &mut c.physics;
        t.real("physics.nu", &mut ph.nu)?;
        t.real("physics.taming_threshold", &mut ph.taming_threshold)?;
        t.real("physics.p", &mut ph.p)?;
        t.real("physics.cutoff_radius", &mut ph.cutoff_radius)?;
        t.real("physics.truncation", &mut ph.truncation)?;
        t.parsed("physics.dealias", "a boolean", &mut ph.dealias)?;

        let n = &mut c.noise;
        t.parsed("noise.wiener_rank", "a positive integer", &mut n.wiener_rank)?;
        t.reals("noise.wiener_beta", &mut n.wiener_beta)?;
        t.real("noise.wiener_envelope", &mut n.wiener_envelope)?;
        t.real("noise.wiener_offset", &mut n.wiener_offset)?;
        t.real("noise.kernel_width", &mut n.kernel_width)?;
        t.real("noise.envelope_width", &mut n.envelope_width)?;
        t.reals("noise.jump_weights", &mut n.jump_weights)?;
        t.reals("noise.jump_amplitudes", &mut n.jump_amplitudes)?;
        t.real("noise.jump_alpha", &mut n.jump_alpha)?;
        t.real("noise.jump_envelope", &mut n.jump_envelope)?;
        t.real("noise.jump_offset", &mut n.jump_offset)?;
        t.reals("noise.jump_times", &mut n.jump_times)?;
        t.integers("noise.jump_marks", &mut n.jump_marks)?;

        let st = &mut c.stepper;
        t.real("stepper.dt", &mut st.dt)?;
        t.real("stepper.horizon", &mut st.horizon)?;
        t.parsed("stepper.record_stride", "a positive integer", &mut st.record_stride)?;
        t.parsed("stepper.left_limit_check", "a boolean", &mut st.left_limit_check)?;

        t.parsed("stopping.enabled", "a boolean", &mut c.stopping.enabled)?;
        t.real("stopping.level_m", &mut c.stopping.level_m)?;
        t.real("stopping.scale_k", &mut c.stopping.scale_k)?;

        t.parsed("mc.paths", "a positive integer", &mut c.mc.paths)?;
        t.parsed("mc.base_seed", "an unsigned 64-bit integer", &mut c.mc.base_seed)?;

        t.parsed("output.directory", "a path", &mut c.output.directory)?;
        t.parsed(
            "output.snapshot_stride",
            "a nonnegative integer",
            &mut c.output.snapshot_stride,
        )?;

        let i = &mut c.init;
        t.parsed("init.kind", "a field kind", &mut i.kind)?;
        t.real("init.amplitude", &mut i.amplitude)?;
        t.parsed("init.max_wavenumber", "a positive integer", &mut i.max_wavenumber)?;
        t.real("init.width", &mut i.width)?;
        t.reals("init.value", &mut i.value)?;
        t.parsed("init.seed", "an unsigned 64-bit integer", &mut i.seed)?;

        let h = &mut c.heat;
        t.opt_real("heat.q_f", &mut h.q_f)?;
        t.opt_real("heat.q_h", &mut h.q_h)?;
        t.reals("heat.h_mean", &mut h.h_mean)?;
        t.real("heat.f_scale", &mut h.f_scale)?;
        t.real("heat.g_scale", &mut h.g_scale)?;
        t.real("heat.g0_scale", &mut h.g0_scale)?;

        let pc = &mut c.picard;
        t.real("picard.t_star", &mut pc.t_star)?;
        t.parsed("picard.m_max", "a nonnegative integer", &mut pc.m_max)?;
        t.parsed("picard.paths", "a positive integer", &mut pc.paths)?;
        t.parsed("picard.min_steps", "a positive integer", &mut pc.min_steps)?;
        t.parsed("picard.halvings", "a nonnegative integer", &mut pc.halvings)?;

        t.reals("cauchy.levels", &mut c.cauchy.levels)?;

        if let Some(key) = t.entries.keys().next() {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
        c.validate()?;
        if heat_present {
            c.validate_heat()?;
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if g.modes < 8 || !g.modes.is_multiple_of(2) {
            return Err(range("grid.modes", "must be an even integer ≥ 8"));
        }
        if !(g.length > 0.0) || !g.length.is_finite() {
            return Err(range("grid.length", "must be positive"));
        }
        let ph = &self.physics;
        if !(ph.nu > 0.0) {
            return Err(range("physics.nu", "must be positive"));
        }
        if !(ph.p > 3.0) || !ph.p.is_finite() {
            return Err(range("physics.p", "must exceed 3"));
        }
        if !(ph.taming_threshold >= 0.0) {
            return Err(range("physics.taming_threshold", "must be nonnegative"));
        }
        if !(ph.cutoff_radius >= 1.0) {
            return Err(range("physics.cutoff_radius", "must be at least 1"));
        }
        if !(ph.truncation > 0.0) {
            return Err(range("physics.truncation", "must be positive"));
        }
        let n = &self.noise;
        if n.wiener_rank == 0 {
            return Err(range("noise.wiener_rank", "must be positive"));
        }
        if n.wiener_beta.len() != 1 && n.wiener_beta.len() != n.wiener_rank {
            return Err(range(
                "noise.wiener_beta",
                "needs one entry or one per Wiener component",
            ));
        }
        if !(n.kernel_width > 0.0) || !(n.envelope_width > 0.0) {
            return Err(range("noise.kernel_width", "and noise.envelope_width must be positive"));
        }
        if n.jump_weights.len() != n.jump_amplitudes.len() {
            return Err(range(
                "noise.jump_amplitudes",
                "must match noise.jump_weights in length",
            ));
        }
        if n.jump_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(range("noise.jump_weights", "must be positive"));
        }
        if !(0.0..2.0 / 3.0).contains(&n.jump_alpha) {
            return Err(range("noise.jump_alpha", "must lie in [0, 2/3)"));
        }
        if n.jump_times.len() != n.jump_marks.len() {
            return Err(range("noise.jump_marks", "must match noise.jump_times in length"));
        }
        if n.jump_marks.iter().any(|m| *m >= n.jump_weights.len()) {
            return Err(range("noise.jump_marks", "refers to a mark that does not exist"));
        }
        let st = &self.stepper;
        if !(st.dt > 0.0) {
            return Err(range("stepper.dt", "must be positive"));
        }
        if !(st.horizon >= 0.0) || !st.horizon.is_finite() {
            return Err(range("stepper.horizon", "must be nonnegative"));
        }
        if st.horizon > 0.0 && st.dt > st.horizon {
            return Err(range("stepper.dt", "must not exceed stepper.horizon"));
        }
        if st.record_stride == 0 {
            return Err(range("stepper.record_stride", "must be at least 1"));
        }
        if !(self.stopping.scale_k > 0.0) {
            return Err(range("stopping.scale_k", "must be positive"));
        }
        if self.mc.paths == 0 {
            return Err(range("mc.paths", "must be at least 1"));
        }
        let i = &self.init;
        if !["random", "bump", "constant", "zero"].contains(&i.kind.as_str()) {
            return Err(range("init.kind", "must be one of random, bump, constant, zero"));
        }
        if i.value.len() != 3 {
            return Err(range("init.value", "needs three components"));
        }
        if self.heat.h_mean.len() != 3 {
            return Err(range("heat.h_mean", "needs three components"));
        }
        let pc = &self.picard;
        if !(pc.t_star > 0.0) {
            return Err(range("picard.t_star", "must be positive"));
        }
        if pc.paths == 0 || pc.min_steps == 0 {
            return Err(range("picard.paths", "and picard.min_steps must be positive"));
        }
        let lv = &self.cauchy.levels;
        if lv.is_empty() || lv.iter().any(|k| !(*k > 0.0)) || lv.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(range("cauchy.levels", "must be positive and strictly increasing"));
        }
        Ok(())
    }

    /// Exponent windows for the heat problem in dimension three.
    pub fn validate_heat(&self) -> Result<(), ConfigError> {
        let p = self.physics.p;
        let q_f = self
            .heat
            .q_f
            .ok_or_else(|| ConfigError::MissingKey("heat.q_f".into()))?;
        let q_h = self
            .heat
            .q_h
            .ok_or_else(|| ConfigError::MissingKey("heat.q_h".into()))?;
        let (lo, hi) = exponent_window_f(p, 3.0);
        if !(q_f >= lo && q_f <= hi) {
            return Err(range("heat.q_f", format!("must lie in [{lo}, {hi}] = [dp/(p+d-2), p]")));
        }
        let (lo, hi) = exponent_window_h(p, 3.0);
        if !(q_h >= lo && q_h <= hi) {
            return Err(range(
                "heat.q_h",
                format!("must lie in [{lo}, {hi}] = [dp/(2p+d-2), p]"),
            ));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> stns_core::Result<GridSpec> {
        GridSpec::new(self.grid.modes, self.grid.length)
    }

    pub fn drift(&self) -> stns_core::Result<DriftConfig> {
        let ph = &self.physics;
        DriftConfig::new(
            ph.nu,
            ph.taming_threshold,
            ph.cutoff_radius,
            ph.truncation,
            ph.p,
            ph.dealias,
        )
    }

    pub fn energy_params(&self) -> stns_core::Result<EnergyParams> {
        let ph = &self.physics;
        Ok(EnergyParams {
            p: ph.p,
            taming: TamingFunction::new(ph.taming_threshold, ph.nu)?,
            cutoff: CutoffFunction::new(ph.cutoff_radius)?,
        })
    }

    pub fn wiener(&self, grid: GridSpec) -> stns_core::Result<WienerModel> {
        let n = &self.noise;
        WienerModel::new(
            grid,
            &WienerParams {
                rank: n.wiener_rank,
                beta: n.wiener_beta.clone(),
                shape: ShapeParams {
                    kernel_width: n.kernel_width,
                    envelope_amplitude: n.wiener_envelope,
                    envelope_width: n.envelope_width,
                    offset_amplitude: n.wiener_offset,
                },
            },
        )
    }

    pub fn jumps(&self, grid: GridSpec) -> stns_core::Result<JumpModel> {
        let n = &self.noise;
        let model = JumpModel::new(
            grid,
            &JumpParams {
                marks: n
                    .jump_weights
                    .iter()
                    .zip(&n.jump_amplitudes)
                    .map(|(w, a)| Mark {
                        weight: *w,
                        amplitude: *a,
                    })
                    .collect(),
                alpha: n.jump_alpha,
                shape: ShapeParams {
                    kernel_width: n.kernel_width,
                    envelope_amplitude: n.jump_envelope,
                    envelope_width: n.envelope_width,
                    offset_amplitude: n.jump_offset,
                },
            },
        )?;
        if n.jump_times.is_empty() {
            return Ok(model);
        }
        model.with_schedule(
            n.jump_times
                .iter()
                .zip(&n.jump_marks)
                .map(|(t, m)| JumpEvent { time: *t, mark: *m })
                .collect(),
        )
    }

    pub fn stepper(&self) -> stns_core::Result<StepperConfig> {
        let grid = self.grid_spec()?;
        let st = &self.stepper;
        let mut cfg = StepperConfig::new(st.dt, st.horizon, self.drift()?, self.wiener(grid)?, self.jumps(grid)?)?;
        cfg.record_stride = st.record_stride;
        cfg.left_limit_check = st.left_limit_check;
        cfg.stopping = if self.stopping.enabled {
            StoppingConfig::new(self.stopping.level_m, self.stopping.scale_k)
        } else {
            StoppingConfig::disabled()
        };
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::parse("# nothing here\n").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.grid.modes, 32);
        assert_eq!(c.grid.length, 8.0 * PI);
        assert_eq!(c.physics.nu, 0.1);
        assert_eq!(c.physics.p, 4.0);
        assert_eq!(c.noise.wiener_rank, 4);
    }

    #[test]
    fn values_comments_and_lists() {
        let c = RunConfig::parse(
            "grid.length = 4*pi  # box\n\
             physics.nu = 0.05\n\
             cauchy.levels = 2\n\
             cauchy.levels = 4\n\
             noise.jump_weights = 1, 2\n\
             noise.jump_amplitudes = 0.5\n\
             noise.jump_amplitudes = -0.5\n\
             output.directory = \"runs/a\"\n",
        )
        .unwrap();
        assert_eq!(c.grid.length, 4.0 * PI);
        assert_eq!(c.physics.nu, 0.05);
        assert_eq!(c.cauchy.levels, vec![2.0, 4.0]);
        assert_eq!(c.noise.jump_weights, vec![1.0, 2.0]);
        assert_eq!(c.noise.jump_amplitudes, vec![0.5, -0.5]);
        assert_eq!(c.output.directory, PathBuf::from("runs/a"));
    }

    #[test]
    fn p_below_three_rejected() {
        let e = RunConfig::parse("physics.p = 2.5").unwrap_err();
        assert!(e.to_string().contains("p must exceed 3"), "{e}");
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::parse("physics.bogus = 1").unwrap_err();
        assert!(e.to_string().contains("physics.bogus"));
        let e = RunConfig::parse("physics.nu = fast").unwrap_err();
        assert!(e.to_string().contains("physics.nu"));
        let e = RunConfig::parse("physics.nu = 1\nphysics.nu = 2").unwrap_err();
        assert!(e.to_string().contains("physics.nu"));
        let e = RunConfig::parse("grid.modes = 31").unwrap_err();
        assert!(e.to_string().contains("grid.modes"));
        let e = RunConfig::parse("noise.jump_alpha = 0.7").unwrap_err();
        assert!(e.to_string().contains("noise.jump_alpha"));
        assert!(matches!(
            RunConfig::parse("just words"),
            Err(ConfigError::Syntax { line: 1 })
        ));
    }

    #[test]
    fn heat_windows() {
        let e = RunConfig::parse("heat.q_f = 2\nheat.q_h = 2").unwrap_err();
        assert!(e.to_string().contains("heat.q_f"));
        assert!(RunConfig::parse("heat.q_f = 3\nheat.q_h = 2").is_ok());
        let e = RunConfig::parse("heat.q_f = 3").unwrap_err();
        assert!(matches!(e, ConfigError::MissingKey(ref k) if k == "heat.q_h"));
    }
}
