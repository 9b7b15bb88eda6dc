//! Command implementations. Each writes its artifacts under the output
//! directory, prints JSON lines to `out`, and reports whether every check it
//! declares passed.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use stns_core::checks::{ops_suite, CheckOutcome};
use stns_core::diagnostics::{mc_estimate, EnergyRecord, McEstimate, TrajectorySummary};
use stns_core::init::{gaussian_bump, random_solenoidal};
use stns_core::operators::kernel_first_moment;
use stns_core::physics::outer_product;
use stns_core::rng::{RngStreams, Substream};
use stns_core::solver::{
    cauchy_study, heat_solve, picard_harness, prepare_initial, run, run_observed, HeatConfig, HeatForcing,
    PicardConfig, PicardReport, StopTrigger,
};
use stns_core::spectral::{lp_norm, Complex};
use stns_core::{GridSpec, RealVectorField, SpectralVectorField, StnsError};

use crate::config::RunConfig;
use crate::io::{write_ndjson, write_records, write_snapshot};

/// Initial velocity described by the `init` section.
pub fn initial_field(cfg: &RunConfig, grid: GridSpec) -> RealVectorField {
    let i = &cfg.init;
    match i.kind.as_str() {
        "bump" => gaussian_bump(grid, i.width, i.amplitude),
        "constant" => RealVectorField::from_fn(grid, |_| [i.value[0], i.value[1], i.value[2]]),
        "zero" => RealVectorField::zeros(grid),
        _ => {
            let mut streams = RngStreams::new(i.seed, 0);
            random_solenoidal(grid, i.max_wavenumber, i.amplitude, streams.get(Substream::Init)).to_real_unchecked()
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string(value)?)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn check_line(out: &mut dyn Write, passed: bool, name: &str, detail: &str) -> Result<()> {
    writeln!(out, "{} {name}: {detail}", if passed { "PASS" } else { "FAIL" })?;
    Ok(())
}

fn snapshot_name(step: usize) -> String {
    format!("snapshot_{step:06}.stns")
}

#[derive(Debug, Serialize)]
struct SimulateSummary<'a> {
    summary: &'a TrajectorySummary,
    steps: usize,
    stopped_at: Option<f64>,
    trigger: Option<StopTrigger>,
    jump_count: u64,
    warnings: &'a [String],
}

pub fn simulate(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<bool> {
    let grid = cfg.grid_spec()?;
    let stepper = cfg.stepper()?;
    let u0 = initial_field(cfg, grid);
    let n = stepper.steps();
    let stride = cfg.output.snapshot_stride;
    let mut snap_err = None;
    let mut observer = |state: &mut stns_core::solver::SolverState| -> stns_core::Result<()> {
        let last = state.step == n || state.stopped_at.is_some();
        if state.step == 0 || last || (stride > 0 && state.step.is_multiple_of(stride)) {
            let (t, step) = (state.t, state.step);
            if let Err(e) = write_snapshot(&dir.join(snapshot_name(step)), t, state.physical()) {
                snap_err.get_or_insert(e);
            }
        }
        Ok(())
    };
    let result = run_observed(&stepper, &u0, RngStreams::new(cfg.mc.base_seed, 0), &mut observer);
    if let Some(e) = snap_err {
        return Err(e.into());
    }
    let output = match result {
        Ok(o) => o,
        Err(StnsError::IntegrationFault {
            t,
            reason,
            snapshot,
            snapshot_t,
        }) => {
            let path = dir.join("fault.stns");
            write_snapshot(&path, snapshot_t, &snapshot.to_real_unchecked())?;
            anyhow::bail!(
                "integration fault at t = {t}: {reason}; last valid state (t = {snapshot_t}) saved to {}",
                path.display()
            );
        }
        Err(e) => return Err(e.into()),
    };
    write_records(&dir.join("records.ndjson"), &output.records)?;
    let s = SimulateSummary {
        summary: &output.summary,
        steps: output.state.step,
        stopped_at: output.state.stopped_at,
        trigger: output.state.trigger,
        jump_count: output.state.jump_count(),
        warnings: &output.warnings,
    };
    write_json(&dir.join("summary.json"), &s)?;
    emit(out, &s)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct PathRecord<'a> {
    path: usize,
    #[serde(flatten)]
    record: &'a EnergyRecord,
}

#[derive(Debug, Serialize)]
struct McSummary<'a> {
    estimate: &'a McEstimate,
    per_path: &'a [TrajectorySummary],
}

pub fn mc(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<bool> {
    let grid = cfg.grid_spec()?;
    let stepper = cfg.stepper()?;
    let u0 = initial_field(cfg, grid);
    let paths_dir = dir.join("paths");
    fs::create_dir_all(&paths_dir)?;
    let seed = cfg.mc.base_seed;
    let runs = (0..cfg.mc.paths)
        .into_par_iter()
        .map(|i| -> Result<(TrajectorySummary, Vec<EnergyRecord>)> {
            let o = run(&stepper, &u0, RngStreams::new(seed, i as u64))?;
            write_records(&paths_dir.join(format!("records_{i:04}.ndjson")), &o.records)?;
            Ok((o.summary, o.records))
        })
        .collect::<Result<Vec<_>>>()?;
    let merged: Vec<PathRecord> = runs
        .iter()
        .enumerate()
        .flat_map(|(path, (_, recs))| recs.iter().map(move |record| PathRecord { path, record }))
        .collect();
    write_ndjson(&dir.join("records.ndjson"), &merged)?;
    let summaries: Vec<TrajectorySummary> = runs.iter().map(|(s, _)| *s).collect();
    let estimate = mc_estimate(&summaries)?;
    let s = McSummary {
        estimate: &estimate,
        per_path: &summaries,
    };
    write_json(&dir.join("summary.json"), &s)?;
    emit(out, &estimate)?;
    Ok(true)
}

pub fn heat(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<bool> {
    cfg.validate_heat()?;
    let grid = cfg.grid_spec()?;
    let h = &cfg.heat;
    let u0 = initial_field(cfg, grid);
    let mut u0_hat = u0.to_spectral();
    u0_hat.symmetrize();

    let zero = RealVectorField::zeros(grid);
    let mut forcing = HeatForcing {
        q_f: h.q_f.expect("validated"),
        q_h: h.q_h.expect("validated"),
        ..HeatForcing::zero(cfg.physics.p)
    };
    if h.h_mean.iter().any(|v| *v != 0.0) {
        let mut hh = SpectralVectorField::zeros(grid);
        hh.set(0, std::array::from_fn(|c| Complex::new(h.h_mean[c], 0.0)));
        forcing.h = Some(hh);
    }
    if h.f_scale != 0.0 {
        let u = u0_hat.to_real_unchecked();
        let mut f = outer_product(&u, &u).to_spectral();
        f.symmetrize();
        forcing.f = Some(f.scaled(h.f_scale));
    }
    if h.g_scale != 0.0 {
        forcing.g = cfg
            .wiener(grid)?
            .components(&zero)
            .into_iter()
            .map(|g| g.scaled(h.g_scale))
            .collect();
    }
    let jumps = cfg.jumps(grid)?;
    if h.g0_scale != 0.0 {
        forcing.g0 = Some(jumps.coefficient(&zero).scaled(h.g0_scale));
    }
    let hc = HeatConfig {
        dt: cfg.stepper.dt,
        horizon: cfg.stepper.horizon,
        nu: cfg.physics.nu,
        record_stride: cfg.stepper.record_stride,
        energy: cfg.energy_params()?,
    };
    let mut rng = RngStreams::new(cfg.mc.base_seed, 0);
    let o = heat_solve(&hc, &forcing, &jumps, &u0_hat, &mut rng)?;
    write_records(&dir.join("records.ndjson"), &o.records)?;
    write_snapshot(&dir.join(snapshot_name(0)), 0.0, &u0_hat.to_real_unchecked())?;
    let steps = (hc.horizon / hc.dt).round() as usize;
    if steps > 0 {
        write_snapshot(&dir.join(snapshot_name(steps)), o.t, &o.u.to_real_unchecked())?;
    }
    write_json(&dir.join("summary.json"), &o.summary)?;
    emit(out, &o.summary)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct PicardTable<'a> {
    sweep: &'a [PicardReport],
    selected_t_star: Option<f64>,
}

pub fn picard(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<bool> {
    let grid = cfg.grid_spec()?;
    let stepper = cfg.stepper()?;
    let u0 = prepare_initial(&initial_field(cfg, grid), &stepper.drift);
    let pc = &cfg.picard;
    let mut sweep = Vec::new();
    let mut t_star = pc.t_star;
    let mut selected = None;
    for _ in 0..=pc.halvings {
        let report = picard_harness(
            &stepper,
            &u0,
            &PicardConfig {
                t_star,
                m_max: pc.m_max,
                paths: pc.paths,
                base_seed: cfg.mc.base_seed,
                min_steps: pc.min_steps,
            },
        )?;
        emit(out, &report)?;
        let done = report.max_ratio <= 0.5;
        sweep.push(report);
        if done {
            selected = Some(t_star);
            break;
        }
        t_star *= 0.5;
    }
    write_json(
        &dir.join("picard.json"),
        &PicardTable {
            sweep: &sweep,
            selected_t_star: selected,
        },
    )?;
    let detail = match selected {
        Some(t) => format!("max δ ratio ≤ 0.5 at t_star = {t}"),
        None => format!("no t_star down to {} gave max δ ratio ≤ 0.5", t_star * 2.0),
    };
    check_line(out, selected.is_some(), "picard contraction", &detail)?;
    Ok(selected.is_some())
}

pub fn cauchy(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<bool> {
    let grid = cfg.grid_spec()?;
    let stepper = cfg.stepper()?;
    let u0 = initial_field(cfg, grid);
    let levels = &cfg.cauchy.levels;
    let report = cauchy_study(&stepper, &u0, levels, RngStreams::new(cfg.mc.base_seed, 0))?;
    write_json(&dir.join("cauchy.json"), &report)?;
    emit(out, &report)?;

    let adjacent: Vec<f64> = (0..levels.len().saturating_sub(1))
        .map(|i| report.trajectory_diff[i][i + 1])
        .collect();
    let decreasing = adjacent.windows(2).all(|w| w[1] < w[0]);
    check_line(
        out,
        decreasing,
        "trajectory differences decrease",
        &adjacent
            .iter()
            .map(|d| format!("{d:.3e}"))
            .collect::<Vec<_>>()
            .join(" > "),
    )?;

    let base = prepare_initial(&u0, &stepper.drift.with_truncation(f64::INFINITY));
    let p = cfg.physics.p;
    let grad = lp_norm(&stns_core::operators::gradient_tensor(&base).to_real_unchecked(), p)?;
    let mut bound_ok = true;
    for i in 0..levels.len() {
        for j in i + 1..levels.len() {
            let bound = kernel_first_moment() * (1.0 / levels[i] - 1.0 / levels[j]) * grad * 1.05;
            bound_ok &= report.initial_diff[i][j] <= bound;
        }
    }
    check_line(
        out,
        bound_ok,
        "initial differences within the rate bound",
        &format!("‖∇u₀‖_p = {grad:.4e}"),
    )?;
    Ok(decreasing && bound_ok)
}

pub fn ops_test(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<bool> {
    let grid = cfg.grid_spec()?;
    let results: Vec<CheckOutcome> = ops_suite(grid, cfg.mc.base_seed);
    for c in &results {
        check_line(out, c.passed, &c.name, &c.detail)?;
    }
    write_json(&dir.join("ops.json"), &results)?;
    Ok(results.iter().all(|c| c.passed))
}
