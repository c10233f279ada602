//! Subcommand implementations: each ingests its inputs, runs the
//! corresponding library stage, and writes plot-ready artifacts atomically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use icebox_core::diagnostics::{diagnostics_report, rmse};
use icebox_core::ekf::{filter_pass, unconditional_predict, FilterState, DEFAULT_SUBSTEPS};
use icebox_core::estimate::{fit, retune, FitReport, FitSpec, RETUNE_MASK};
use icebox_core::io;
use icebox_core::model::{
    hypothetical_evaporator_temp, param_index, sigmoid, Dataset, StateVector, ThermalParams,
    PARAM_COUNT, PARAM_NAMES,
};
use icebox_core::profile::{default_grid, profile_likelihood, ProfileOptions};
use icebox_core::simulate::{default_truth_params, simulate_sde};

use crate::config::{
    bounds_from_config, config_error, fit_spec_from, mask_from_names, optimizer_from_config,
    profile_mode_from, sim_config_from, RunConfig,
};
use crate::error::{CliError, ExitCategory};

pub struct Context {
    pub config: RunConfig,
    pub data_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

impl Context {
    fn dataset(&self) -> Result<Dataset, CliError> {
        let path = self.data_path.as_ref().ok_or_else(|| {
            config_error("this subcommand needs a dataset: pass --data <path>")
        })?;
        Ok(io::read_dataset(path)?)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Reads model parameters from either a params file or a fit report,
/// dispatching on the versioned `format` field.
fn read_params_any(path: &Path) -> Result<ThermalParams, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(ExitCategory::Data, format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::new(ExitCategory::Data, format!("{}: {e}", path.display())))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some("icebox-params") => Ok(io::params_from_str(&text)?),
        Some("icebox-fit-report") => Ok(io::fit_report_from_str(&text)?.estimates),
        other => Err(CliError::new(
            ExitCategory::Data,
            format!(
                "{}: unrecognized format field {other:?}; expected icebox-params or icebox-fit-report",
                path.display()
            ),
        )),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    io::write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn run_simulate(ctx: &Context) -> Result<(), CliError> {
    let section = ctx
        .config
        .simulate
        .as_ref()
        .ok_or_else(|| config_error("config is missing the [simulate] section"))?;
    let truth: ThermalParams = section
        .truth
        .map(Into::into)
        .unwrap_or_else(default_truth_params);
    let cfg = sim_config_from(section, ctx.seed);
    let out = simulate_sde(&truth, &cfg)?;

    io::write_dataset(&ctx.out("dataset.csv"), &out.dataset())?;
    io::write_params(&ctx.out("truth.json"), &truth)?;

    let mut states = String::from("t_min,T_c,T_w,T_e\n");
    for (r, s) in out.inputs.records().iter().zip(&out.true_states) {
        writeln!(states, "{},{},{},{}", r.t_min, s.t_c, s.t_w, s.t_e).expect("string write");
    }
    write_text(&ctx.out("states.csv"), &states)?;

    println!(
        "simulated {} samples at {} min; wrote dataset.csv, truth.json, states.csv to {}",
        out.inputs.len(),
        cfg.sample_dt,
        ctx.out_dir.display()
    );
    Ok(())
}

fn resolve_init(section: &crate::config::FitSection) -> Result<ThermalParams, CliError> {
    match (&section.init, &section.init_from) {
        (Some(table), None) => Ok((*table).into()),
        (None, Some(path)) => read_params_any(path),
        (Some(_), Some(_)) => Err(config_error(
            "[fit] must set either init or init_from, not both",
        )),
        (None, None) => Err(config_error(
            "[fit] needs initial parameters: set init (inline table) or init_from (file)",
        )),
    }
}

fn print_fit_summary(report: &FitReport) {
    println!(
        "fit: nll = {:.6}, converged = {}, iterations = {}, evaluations = {}",
        report.neg_log_lik, report.converged, report.iterations, report.evaluations
    );
    let names = report.free_names();
    match (&report.std_errors, &report.wald_ci95) {
        (Some(se), Some(ci)) => {
            for (k, name) in names.iter().enumerate() {
                let idx = param_index(name).expect("canonical name");
                println!(
                    "  {name} = {:.6e}  ci95 = [{:.6e}, {:.6e}]  se(t) = {:.3e}",
                    report.estimates.get(idx),
                    ci[k].0,
                    ci[k].1,
                    se[k]
                );
            }
        }
        _ => {
            for name in &names {
                let idx = param_index(name).expect("canonical name");
                println!("  {name} = {:.6e}", report.estimates.get(idx));
            }
            for w in &report.warnings {
                println!("  warning: {w}");
            }
        }
    }
}

pub fn run_fit(ctx: &Context) -> Result<(), CliError> {
    let section = ctx
        .config
        .fit
        .as_ref()
        .ok_or_else(|| config_error("config is missing the [fit] section"))?;
    let data = ctx.dataset()?;
    let init = resolve_init(section)?;
    let spec = fit_spec_from(section, init, ctx.seed, ctx.threads)?;
    let report = fit(&spec, &data)?;
    io::write_fit_report(&ctx.out("fit.json"), &report)?;
    print_fit_summary(&report);
    println!("wrote {}", ctx.out("fit.json").display());
    Ok(())
}

pub fn run_predict(ctx: &Context) -> Result<(), CliError> {
    let section = ctx
        .config
        .predict
        .as_ref()
        .ok_or_else(|| config_error("config is missing the [predict] section"))?;
    let data = ctx.dataset()?;
    let params = read_params_any(&section.params_from)?;
    let substeps = section.substeps.unwrap_or(DEFAULT_SUBSTEPS);
    let x0 = match &section.x0 {
        Some(x) => StateVector::new(x.t_c, x.t_w, x.t_e),
        None => FilterState::diffuse_init(&data, &params).mean,
    };
    let pred = unconditional_predict(&params, &data.inputs, x0, substeps)?;

    let mut text = String::from(
        "t_min,observed,predicted,lo95,hi95,sigmoid,hypothetical_evap,estimated_T_e\n",
    );
    for (k, r) in data.inputs.records().iter().enumerate() {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            r.t_min,
            data.observations[k],
            pred.states[k].t_c,
            pred.lo95[k],
            pred.hi95[k],
            sigmoid(params.alpha, params.beta, r.m_ac),
            hypothetical_evaporator_temp(&params, r),
            pred.states[k].t_e
        )
        .expect("string write");
    }
    write_text(&ctx.out("predict.csv"), &text)?;

    let rmse_obs = rmse(&pred.t_c(), &data.observations)?;
    println!(
        "unconditional prediction over {} samples: RMSE vs observations = {:.4} degC",
        data.len(),
        rmse_obs
    );
    println!("wrote {}", ctx.out("predict.csv").display());
    Ok(())
}

pub fn run_profile(ctx: &Context) -> Result<(), CliError> {
    let section = ctx
        .config
        .profile
        .as_ref()
        .ok_or_else(|| config_error("config is missing the [profile] section"))?;
    let data = ctx.dataset()?;
    let baseline = io::read_fit_report(&section.baseline)?;
    let param = section.param.as_str();
    let param_idx = param_index(param)
        .ok_or_else(|| config_error(format!("unknown parameter '{param}'")))?;

    let grid = match &section.grid {
        Some(g) => g.clone(),
        None => {
            let center = baseline.estimates.get(param_idx);
            if center <= 0.0 {
                return Err(config_error(format!(
                    "cannot build a log-spaced default grid around {param} = {center}; give an explicit grid"
                )));
            }
            default_grid(
                center,
                section.factor.unwrap_or(30.0),
                section.points.unwrap_or(21),
            )
        }
    };
    let mut pinned = Vec::new();
    if let Some(entries) = &section.pinned {
        for e in entries {
            let idx = param_index(&e.param)
                .ok_or_else(|| config_error(format!("unknown pinned parameter '{}'", e.param)))?;
            pinned.push((idx, e.value));
        }
    }

    let base_spec = FitSpec {
        free_mask: baseline.free_mask,
        bounds: bounds_from_config(section.bounds.as_ref())?,
        substeps: section.substeps.unwrap_or(DEFAULT_SUBSTEPS),
        hessian_step: 1e-4,
        threads: 1,
        optimizer: optimizer_from_config(section.optimizer.as_ref(), ctx.seed, true)?,
        ..FitSpec::new(baseline.estimates)
    };
    let opts = ProfileOptions {
        mode: profile_mode_from(section.mode.as_deref())?,
        optimizer: base_spec.optimizer,
        substeps: base_spec.substeps,
        threads: ctx.threads,
    };
    let result = profile_likelihood(&data, param, &grid, &pinned, &baseline, &base_spec, &opts)?;

    // Free parameters of the refits, for the partner-trace columns.
    let mut trace_names: Vec<&str> = Vec::new();
    for i in 0..PARAM_COUNT {
        if baseline.free_mask[i] && i != param_idx && !pinned.iter().any(|&(p, _)| p == i) {
            trace_names.push(PARAM_NAMES[i]);
        }
    }
    let mut text = String::from("grid,profile_nll,in_ci,failed");
    for name in &trace_names {
        write!(text, ",{name}").expect("string write");
    }
    text.push('\n');
    for k in 0..result.grid.len() {
        write!(
            text,
            "{},{},{},{}",
            result.grid[k],
            result.profile_nll[k],
            u8::from(result.in_ci[k]),
            u8::from(result.failed[k])
        )
        .expect("string write");
        for name in &trace_names {
            let idx = param_index(name).expect("canonical name");
            match &result.solutions[k] {
                Some(p) => write!(text, ",{}", p.get(idx)).expect("string write"),
                None => text.push(','),
            }
        }
        text.push('\n');
    }
    write_text(&ctx.out("profile.csv"), &text)?;

    println!(
        "profile {param}: mle_nll = {:.6}, ci = [{}, {}]{}{}",
        result.mle_nll,
        result.ci_lo,
        result.ci_hi,
        if result.open_lo { " (open below)" } else { "" },
        if result.open_hi { " (open above)" } else { "" },
    );
    println!("wrote {}", ctx.out("profile.csv").display());
    Ok(())
}

pub fn run_diagnose(ctx: &Context) -> Result<(), CliError> {
    let section = ctx
        .config
        .diagnose
        .as_ref()
        .ok_or_else(|| config_error("config is missing the [diagnose] section"))?;
    let data = ctx.dataset()?;
    let params = read_params_any(&section.params_from)?;
    let substeps = section.substeps.unwrap_or(DEFAULT_SUBSTEPS);
    let init = FilterState::diffuse_init(&data, &params);
    let pass = filter_pass(&params, &data, init, substeps)?;
    let report = diagnostics_report(&pass, section.max_lag.unwrap_or(40))?;

    let mut acf_text = String::from("lag,acf,lo95,hi95\n");
    for (lag, value) in report.acf.iter().enumerate() {
        writeln!(acf_text, "{lag},{value},{},{}", -report.acf_band, report.acf_band)
            .expect("string write");
    }
    write_text(&ctx.out("acf.csv"), &acf_text)?;

    let mut cp_text = String::from("frequency,cumulated,lo95,hi95\n");
    let n_freq = report.cp_freqs.len() as f64;
    for (k, (f, v)) in report.cp_freqs.iter().zip(&report.cp_values).enumerate() {
        let diag = (k + 1) as f64 / n_freq;
        writeln!(
            cp_text,
            "{f},{v},{},{}",
            diag - report.cp_band,
            diag + report.cp_band
        )
        .expect("string write");
    }
    write_text(&ctx.out("cp.csv"), &cp_text)?;

    let mut res_text = String::from("index,standardized_residual\n");
    for (k, r) in report.standardized_residuals.iter().enumerate() {
        writeln!(res_text, "{k},{r}").expect("string write");
    }
    write_text(&ctx.out("residuals.csv"), &res_text)?;

    let summary = serde_json::json!({
        "rmse": report.rmse,
        "whiteness_summary": report.whiteness_summary,
        "acf_band": report.acf_band,
        "cp_band": report.cp_band,
        "n_residuals": report.standardized_residuals.len(),
        "neg_log_lik": pass.neg_log_lik,
    });
    write_text(
        &ctx.out("summary.json"),
        &serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::new(ExitCategory::Data, e.to_string()))?,
    )?;

    println!(
        "diagnostics: rmse = {:.4} degC, whiteness = {:.3}; wrote acf.csv, cp.csv, residuals.csv, summary.json",
        report.rmse, report.whiteness_summary
    );
    Ok(())
}

pub fn run_retune(ctx: &Context) -> Result<(), CliError> {
    let section = ctx
        .config
        .retune
        .as_ref()
        .ok_or_else(|| config_error("config is missing the [retune] section"))?;
    let data = ctx.dataset()?;
    let baseline = io::read_fit_report(&section.baseline)?;
    let free_mask = match &section.free {
        Some(names) => mask_from_names(names)?,
        None => RETUNE_MASK,
    };
    let template = FitSpec {
        free_mask,
        bounds: bounds_from_config(section.bounds.as_ref())?,
        optimizer: optimizer_from_config(section.optimizer.as_ref(), ctx.seed, true)?,
        hessian_step: section.hessian_step.unwrap_or(1e-4),
        substeps: section.substeps.unwrap_or(DEFAULT_SUBSTEPS),
        threads: ctx.threads,
        ..FitSpec::new(baseline.estimates)
    };
    let report = retune(&baseline, &data, free_mask, &template)?;
    io::write_fit_report(&ctx.out("retune.json"), &report)?;

    let mut text = String::from("param,old,new,relative_change\n");
    if let Some(changes) = &report.relative_changes {
        for c in changes {
            writeln!(text, "{},{},{},{}", c.name, c.old, c.new, c.relative)
                .expect("string write");
            println!(
                "retuned {}: {:.6e} -> {:.6e} ({:+.2}%)",
                c.name,
                c.old,
                c.new,
                100.0 * c.relative
            );
        }
    }
    write_text(&ctx.out("changes.csv"), &text)?;
    println!("wrote {} and {}", ctx.out("retune.json").display(), ctx.out("changes.csv").display());
    Ok(())
}
