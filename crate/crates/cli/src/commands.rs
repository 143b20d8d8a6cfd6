//! The three subcommands.

use isslift::bregman::{classical_bregman_rof, lifted_bregman, BregmanConfig, BregmanTrace};
use isslift::dataterms::{bundled_two_squares, rof_model, stereo_model, synthetic_stereo_pair, StereoConfig};
use isslift::grid::ScalarField;
use isslift::lifting::LabelSet;
use isslift::selftest::{run_selftest, SelftestOptions};
use isslift::solver::SolverConfig;
use isslift::Error;

use crate::config::RunConfig;
use crate::output::{csv, read_image, sig10, text_matrix, write_gray16, write_gray8, write_text};

/// Why a command failed; each maps to its own exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
    Abort(String),
    ChecksFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonIntegral { .. } => Failure::Abort(e.to_string()),
            Error::Config(_) | Error::Labels(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io(e: String) -> Failure {
    Failure::Runtime(e)
}

fn bregman_config(cfg: &RunConfig) -> BregmanConfig {
    BregmanConfig {
        steps: cfg.steps,
        tv: cfg.tv,
        transform_subgradients: cfg.transform,
        solver: SolverConfig::default()
            .with_tol(cfg.tol)
            .with_max_iters(cfg.max_iters)
            .with_step_ratio(cfg.step_ratio),
        integrality_tol: cfg.integrality_tol,
        non_integral_policy: cfg.policy,
        ..BregmanConfig::default()
    }
}

fn prepare_out(cfg: &RunConfig) -> Result<(), Failure> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", cfg.out.display())))?;
    write_text(&cfg.output_path("manifest.txt"), &cfg.manifest()).map_err(io)
}

fn metric_cells(trace: &BregmanTrace, k: usize) -> Vec<String> {
    let m = &trace.steps[k].metrics;
    vec![
        (k + 1).to_string(),
        sig10(m.energy),
        m.data_residual.map(sig10).unwrap_or_default(),
        sig10(m.tv),
        sig10(m.non_integral_fraction),
        m.solver_iterations.to_string(),
        sig10(m.solver_residual),
        m.converged.to_string(),
    ]
}

const METRIC_HEADER: [&str; 8] = [
    "k",
    "energy",
    "data_residual",
    "tv",
    "non_integral_fraction",
    "solver_iterations",
    "solver_residual",
    "converged",
];

pub fn denoise(cfg: &RunConfig) -> Result<(), Failure> {
    let img = match cfg.inputs.first() {
        Some(p) => read_image(p).map_err(io)?,
        None => bundled_two_squares(),
    };
    let labels = LabelSet::uniform(cfg.labels, cfg.range.0, cfg.range.1)?;
    let bcfg = bregman_config(cfg);
    prepare_out(cfg)?;
    let f = img.field();
    write_gray8(f, cfg.range.0, cfg.range.1, &cfg.output_path("input"), cfg.png).map_err(io)?;

    let model = rof_model(&img, cfg.lambda, &labels)?;
    let mut trace = lifted_bregman(&model, &labels, &bcfg)?;
    trace.set_reference(f);
    let classical = if cfg.compare { Some(classical_bregman_rof(f, cfg.lambda, &bcfg)?) } else { None };

    let mut header = METRIC_HEADER.to_vec();
    if classical.is_some() {
        header.push("max_abs_diff_classical");
    }
    let mut rows = Vec::new();
    for (k, step) in trace.steps.iter().enumerate() {
        let stem = cfg.output_path(&format!("u_{:02}", k + 1));
        write_gray8(&step.u, cfg.range.0, cfg.range.1, &stem, cfg.png).map_err(io)?;
        let mut row = metric_cells(&trace, k);
        if let Some(c) = &classical {
            let diff = step.u.max_abs_diff(&c.steps[k].u);
            row.push(sig10(diff));
            write_gray8(&c.steps[k].u, cfg.range.0, cfg.range.1, &cfg.output_path(&format!("classical_u_{:02}", k + 1)), cfg.png)
                .map_err(io)?;
        }
        println!("k={} {}", k + 1, summary(&header, &row));
        rows.push(row);
    }
    write_text(&cfg.output_path("metrics.csv"), &csv(&header, &rows)).map_err(io)
}

pub fn stereo(cfg: &RunConfig) -> Result<(), Failure> {
    let (left, right, truth) = match cfg.inputs.as_slice() {
        [l, r] => (read_image(l).map_err(io)?, read_image(r).map_err(io)?, None),
        _ => {
            let (l, r, t) = synthetic_stereo_pair(cfg.size, cfg.seed)?;
            (l, r, Some(t))
        }
    };
    if left.shape() != right.shape() {
        return Err(Failure::Runtime(format!(
            "input images differ in shape: {}x{} vs {}x{}",
            left.shape().height(),
            left.shape().width(),
            right.shape().height(),
            right.shape().width()
        )));
    }
    let height = left.shape().height();
    if let Some(r) = cfg.profile_rows.iter().find(|&&r| r >= height) {
        return Err(Failure::Usage(format!("profile row {r} outside the image (height {height})")));
    }
    let labels = LabelSet::uniform(cfg.labels, cfg.range.0, cfg.range.1)?;
    let scfg = StereoConfig {
        patch_radius: cfg.patch_radius,
        beta: cfg.beta,
        samples_per_interval: cfg.samples,
        disparity_range: cfg.range,
    };
    let bcfg = bregman_config(cfg);
    prepare_out(cfg)?;
    write_gray8(left.field(), 0.0, 1.0, &cfg.output_path("left"), cfg.png).map_err(io)?;
    write_gray8(right.field(), 0.0, 1.0, &cfg.output_path("right"), cfg.png).map_err(io)?;
    if let Some(t) = &truth {
        write_gray16(t, cfg.range.0, cfg.range.1, &cfg.output_path("truth"), cfg.png).map_err(io)?;
        write_text(&cfg.output_path("truth.txt"), &text_matrix(t)).map_err(io)?;
    }

    let model = stereo_model(&left, &right, &labels, &scfg)?.scaled(cfg.lambda)?;
    let mut trace = lifted_bregman(&model, &labels, &bcfg)?;
    if let Some(t) = &truth {
        trace.set_reference(t);
    }

    let mut header = METRIC_HEADER.to_vec();
    header.push("mean_abs_error");
    let mut rows = Vec::new();
    for (k, step) in trace.steps.iter().enumerate() {
        let stem = cfg.output_path(&format!("disparity_{:02}", k + 1));
        write_gray16(&step.u, cfg.range.0, cfg.range.1, &stem, cfg.png).map_err(io)?;
        write_text(&stem.with_extension("txt"), &text_matrix(&step.u)).map_err(io)?;
        let mut row = metric_cells(&trace, k);
        row.push(truth.as_ref().map(|t| sig10(mean_abs_error(&step.u, t))).unwrap_or_default());
        println!("k={} {}", k + 1, summary(&header, &row));
        rows.push(row);
    }
    write_text(&cfg.output_path("metrics.csv"), &csv(&header, &rows)).map_err(io)?;

    for &r in &cfg.profile_rows {
        let mut header = vec!["x".to_string()];
        header.extend((1..=trace.len()).map(|k| format!("u_{k}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = (0..left.shape().width())
            .map(|c| std::iter::once(c.to_string()).chain(trace.iterates().map(|u| sig10(u.get(r, c)))).collect())
            .collect();
        write_text(&cfg.output_path(&format!("profile_row_{r}.csv")), &csv(&header, &rows)).map_err(io)?;
    }
    Ok(())
}

pub fn selftest(seed: u64, cases: usize, inject_wrong_adjoint: bool) -> Result<(), Failure> {
    let report = run_selftest(&SelftestOptions { seed, cases, inject_wrong_adjoint });
    println!("{:<16} {:>6} {:>12} {:>10}  result", "check", "cases", "worst", "tolerance");
    for r in &report {
        println!(
            "{:<16} {:>6} {:>12.3e} {:>10.1e}  {}",
            r.name,
            r.cases,
            r.worst,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    if report.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::ChecksFailed)
    }
}

fn mean_abs_error(u: &ScalarField, truth: &ScalarField) -> f64 {
    u.values().iter().zip(truth.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() / u.values().len() as f64
}

fn summary(header: &[&str], row: &[String]) -> String {
    header[1..]
        .iter()
        .zip(&row[1..])
        .filter(|(_, v)| !v.is_empty())
        .map(|(h, v)| format!("{h}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}
