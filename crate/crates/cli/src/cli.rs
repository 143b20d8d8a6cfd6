//! Command-line flags. Every setting is optional so that a config file can
//! supply it; unset flags fall back to the file, then to the defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "isslift", version, about = "Lifted Bregman iterations for denoising and stereo")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// ROF denoising with classical and/or lifted Bregman iterations.
    Denoise(CommonArgs),
    /// Stereo matching with the lifted Bregman iteration.
    Stereo(CommonArgs),
    /// Seeded invariant suite; exits nonzero if any check fails.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Input images (PGM or PNG): one for denoise, left and right for stereo.
    /// Without inputs the bundled synthetic data is used.
    pub inputs: Vec<PathBuf>,
    /// Optional key=value file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of labels L.
    #[arg(long)]
    pub labels: Option<usize>,
    /// Label range a:b.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// iso or an.
    #[arg(long)]
    pub tv: Option<String>,
    /// Bregman steps K.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Subgradient transform: on or off.
    #[arg(long)]
    pub transform: Option<String>,
    /// Solver tolerance on the RMS primal-dual residual.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Primal over dual step size of the solver.
    #[arg(long)]
    pub step_ratio: Option<f64>,
    #[arg(long)]
    pub patch_radius: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Cost samples per label interval.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Row for a disparity profile CSV; repeatable.
    #[arg(long = "profile-row")]
    pub profile_rows: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the synthetic inputs.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Handling of non-integral lifted iterates: continue or abort.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub integrality_tol: Option<f64>,
    /// Denoise: also run the classical iteration and report per-step differences.
    #[arg(long)]
    pub compare: bool,
    /// Also write PNG copies of the iterate images.
    #[arg(long)]
    pub png: bool,
    /// Side length of the synthetic stereo pair.
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct SelftestArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random cases per check.
    #[arg(long)]
    pub cases: Option<usize>,
    /// Test hook: use a deliberately wrong adjoint in the adjoint check.
    #[arg(long, hide = true)]
    pub inject_wrong_adjoint: bool,
}

impl CommonArgs {
    /// Flags that were given, as config keys and raw values.
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut put = |k: &'static str, s: Option<String>| {
            if let Some(s) = s {
                v.push((k, s));
            }
        };
        let list = |p: &[PathBuf]| p.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
        put("input", (!self.inputs.is_empty()).then(|| list(&self.inputs)));
        put("labels", self.labels.map(|x| x.to_string()));
        put("range", self.range.clone());
        put("lambda", self.lambda.map(|x| x.to_string()));
        put("tv", self.tv.clone());
        put("steps", self.steps.map(|x| x.to_string()));
        put("transform", self.transform.clone());
        put("tol", self.tol.map(|x| x.to_string()));
        put("max_iters", self.max_iters.map(|x| x.to_string()));
        put("step_ratio", self.step_ratio.map(|x| x.to_string()));
        put("patch_radius", self.patch_radius.map(|x| x.to_string()));
        put("beta", self.beta.map(|x| x.to_string()));
        put("samples", self.samples.map(|x| x.to_string()));
        put(
            "profile_rows",
            (!self.profile_rows.is_empty()).then(|| self.profile_rows.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")),
        );
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("seed", self.seed.map(|x| x.to_string()));
        put("policy", self.policy.clone());
        put("integrality_tol", self.integrality_tol.map(|x| x.to_string()));
        put("compare", self.compare.then(|| "on".into()));
        put("png", self.png.then(|| "on".into()));
        put("size", self.size.map(|x| x.to_string()));
        v
    }
}
