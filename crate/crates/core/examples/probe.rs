use icebox_core::ekf::*;
use icebox_core::estimate::*;
use icebox_core::model::*;
use icebox_core::profile::*;
use icebox_core::simulate::*;

fn corr_summary(report: &FitReport, corr: &nalgebra::DMatrix<f64>) -> (f64, String, String, usize) {
    let names = report.free_names();
    let mut best = (0.0f64, String::new(), String::new());
    let mut strong = 0;
    for i in 0..corr.nrows() { for j in 0..i {
        if corr[(i,j)].abs() > best.0 { best = (corr[(i,j)].abs(), names[i].to_string(), names[j].to_string()); }
        if corr[(i,j)].abs() > 0.9 { strong += 1; }
    }}
    (best.0, best.1, best.2, strong)
}

fn main() {
    let truth = default_truth_params();
    let fit_cfg = SimConfig { duration_min: 2880.0, seed: 101, ..SimConfig::default() };
    let eval_cfg = SimConfig { duration_min: 1440.0, seed: 202, ..SimConfig::default() };
    let fit_out = simulate_sde(&truth, &fit_cfg).unwrap();
    let eval_out = simulate_sde(&truth, &eval_cfg).unwrap();
    let data = fit_out.dataset();
    println!("duty: {:?}", duty_cycle_periods(&fit_out.inputs).iter().take(5).collect::<Vec<_>>());
    let tcs: Vec<f64> = fit_out.true_states.iter().map(|s| s.t_c).collect();
    println!("T_c range [{:.2}, {:.2}]", tcs.iter().cloned().fold(f64::INFINITY, f64::min), tcs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));

    // Gauge-fixed fit: C_w held at its 2x-perturbed value.
    let start = ThermalParams::from_array(truth.to_array().map(|v| v * 2.0));
    let mut mask = [true; PARAM_COUNT];
    mask[param_index("C_w").unwrap()] = false;
    let spec = FitSpec {
        free_mask: mask,
        optimizer: OptimizerOptions { restarts: 3, max_iters: 8000, tolerance: 1e-7, ..OptimizerOptions::default() },
        threads: 3,
        ..FitSpec::new(start)
    };
    let t0 = std::time::Instant::now();
    let report = fit(&spec, &data).unwrap();
    println!("fit13: nll {:.3} (truth {:.3}) conv {} evals {} in {:?}", report.neg_log_lik,
        neg_log_lik(&truth, &data, 10), report.converged, report.evaluations, t0.elapsed());
    let e = report.estimates;
    println!("est: a {:.4} b {:.4} C_c {:.3} C_w {:.3} C_e {:.3} R_wa {:.3} R_ce {:.4} R_cw {:.2} al {:.3} be {:.3} sc {:.4} sw {:.5} se {:.4} nu {:.5}",
        e.a, e.b, e.c_c, e.c_w, e.c_e, e.r_wa, e.r_ce, e.r_cw, e.alpha, e.beta, e.sigma_c, e.sigma_w, e.sigma_e, e.nu);

    let x0 = eval_out.true_states[0];
    let truth_tc: Vec<f64> = eval_out.true_states.iter().map(|s| s.t_c).collect();
    let pred = unconditional_predict(&report.estimates, &eval_out.inputs, x0, 10).unwrap();
    let pred_t = unconditional_predict(&truth, &eval_out.inputs, x0, 10).unwrap();
    println!("held-out RMSE: fitted {:.4} truth {:.4}",
        icebox_core::diagnostics::rmse(&pred.t_c(), &truth_tc).unwrap(),
        icebox_core::diagnostics::rmse(&pred_t.t_c(), &truth_tc).unwrap());

    for step in [1e-4, 3e-4, 1e-3, 3e-3, 1e-2] {
        let mut s2 = spec; s2.hessian_step = step; s2.threads = 4;
        let summary = hessian_covariance(&report.estimates, &data, &s2).unwrap();
        match summary.correlation.as_ref() {
            Some(c) => {
                let (m, n1, n2, strong) = corr_summary(&report, c);
                println!("hessian step {step:.0e}: PD, max|corr| {:.4} ({} vs {}), strong {}", m, n1, n2, strong);
            }
            None => println!("hessian step {step:.0e}: NOT PD"),
        }
    }

    // Profile with ALL parameters free (including C_w): structural ray.
    let all_free_spec = FitSpec { free_mask: [true; PARAM_COUNT], ..spec };
    let grid = default_grid(report.estimates.c_c, 30.0, 9);
    let popts = ProfileOptions { optimizer: OptimizerOptions { restarts: 1, max_iters: 4000, tolerance: 1e-7, ..OptimizerOptions::default() }, ..ProfileOptions::default() };
    let t2 = std::time::Instant::now();
    let mut base_all = report.clone();
    base_all.free_mask = [true; PARAM_COUNT];
    let prof = profile_likelihood(&data, "C_c", &grid, &[], &base_all, &all_free_spec, &popts).unwrap();
    println!("free profile deltas: {:?} [{:?}]", prof.profile_nll.iter().map(|v| ((v - prof.mle_nll)*1000.0).round()/1000.0).collect::<Vec<_>>(), t2.elapsed());
    println!("free in_ci {:?} span {:.1} open ({},{})", prof.in_ci, prof.ci_hi/prof.ci_lo, prof.open_lo, prof.open_hi);
    let t3 = std::time::Instant::now();
    let pinned = profile_likelihood(&data, "C_c", &grid, &[(param_index("R_ce").unwrap(), report.estimates.r_ce)], &base_all, &all_free_spec, &popts).unwrap();
    println!("pinned deltas: {:?} [{:?}]", pinned.profile_nll.iter().map(|v| ((v - pinned.mle_nll)*100.0).round()/100.0).collect::<Vec<_>>(), t3.elapsed());
    println!("pinned in_ci {:?} open ({},{})", pinned.in_ci, pinned.open_lo, pinned.open_hi);

    // Pair trace C_c vs R_ce (Spearman direction check).
    let trace = profile_pair_trace(&data, "C_c", &default_grid(report.estimates.c_c, 10.0, 7), "R_ce", &base_all, &all_free_spec, &popts).unwrap();
    println!("pair trace: {:?}", trace.iter().map(|(g, r)| (g.round(), (r*1000.0).round()/1000.0)).collect::<Vec<_>>());

    // Retune.
    let mut truth2 = truth; truth2.c_c *= 1.4;
    let new_out = simulate_sde(&truth2, &SimConfig { duration_min: 2880.0, seed: 303, ..SimConfig::default() }).unwrap();
    let retuned = retune(&report, &new_out.dataset(), RETUNE_MASK, &spec).unwrap();
    for c in retuned.relative_changes.as_ref().unwrap() {
        println!("retune {}: {:+.2}%", c.name, 100.0 * c.relative);
    }
    let predn = unconditional_predict(&retuned.estimates, &new_out.inputs, new_out.true_states[0], 10).unwrap();
    let rm: f64 = new_out.observations.iter().zip(predn.t_c()).map(|(y, p)| y - p).sum::<f64>() / new_out.observations.len() as f64;
    println!("retune residual mean {:+.4}", rm);
}
