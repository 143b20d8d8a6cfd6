//! Resolved run configuration: flags over config file over defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use isslift::bregman::NonIntegralPolicy;
use isslift::lifting::TvKind;

use crate::cli::CommonArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Denoise,
    Stereo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Denoise => "denoise",
            Command::Stereo => "stereo",
        }
    }
}

/// Every setting a run uses, with all defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Empty means the bundled synthetic input.
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub labels: usize,
    pub range: (f64, f64),
    pub lambda: f64,
    pub tv: TvKind,
    pub steps: usize,
    pub transform: bool,
    pub tol: f64,
    pub max_iters: usize,
    pub step_ratio: f64,
    pub patch_radius: usize,
    pub beta: f64,
    pub samples: usize,
    pub profile_rows: Vec<usize>,
    pub seed: u64,
    pub policy: NonIntegralPolicy,
    pub integrality_tol: f64,
    pub compare: bool,
    pub png: bool,
    pub size: usize,
}

impl RunConfig {
    fn defaults(command: Command) -> Self {
        let stereo = command == Command::Stereo;
        Self {
            command,
            inputs: Vec::new(),
            out: PathBuf::from("out"),
            labels: 5,
            range: if stereo { (0.0, 3.0) } else { (0.0, 1.0) },
            lambda: if stereo { 10.0 } else { 20.0 },
            tv: if stereo { TvKind::Iso } else { TvKind::An },
            steps: if stereo { 10 } else { 5 },
            transform: !stereo,
            tol: if stereo { 1e-4 } else { 1e-6 },
            max_iters: if stereo { 5_000 } else { 50_000 },
            step_ratio: if stereo { 0.1 } else { 1.0 },
            patch_radius: 1,
            beta: 0.1,
            samples: 4,
            profile_rows: Vec::new(),
            seed: 7,
            policy: NonIntegralPolicy::UnliftAndContinue,
            integrality_tol: 1e-3,
            compare: false,
            png: false,
            size: 64,
        }
    }

    /// Defaults, then `key=value` pairs from the optional config file, then flags.
    pub fn resolve(command: Command, args: &CommonArgs) -> Result<Self, String> {
        let mut cfg = Self::defaults(command);
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            for (key, value) in parse_key_values(&text)? {
                cfg.set(&key, &value).map_err(|e| format!("{}: {e}", path.display()))?;
            }
        }
        for (key, value) in args.overrides() {
            cfg.set(key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "command" if value.trim() == self.command.name() => {}
            "command" => return Err(format!("config is for '{value}', not '{}'", self.command.name())),
            "input" => self.inputs = split_list(value).into_iter().map(PathBuf::from).collect(),
            "out" => self.out = PathBuf::from(value),
            "labels" => self.labels = parse(key, value)?,
            "range" => self.range = parse_range(value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "tv" => self.tv = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "transform" => self.transform = parse_switch(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "step_ratio" => self.step_ratio = parse(key, value)?,
            "patch_radius" => self.patch_radius = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "profile_rows" => {
                self.profile_rows = split_list(value).iter().map(|v| parse(key, v)).collect::<Result<_, _>>()?
            }
            "seed" => self.seed = parse(key, value)?,
            "policy" => self.policy = parse(key, value)?,
            "integrality_tol" => self.integrality_tol = parse(key, value)?,
            "compare" => self.compare = parse_switch(key, value)?,
            "png" => self.png = parse_switch(key, value)?,
            "size" => self.size = parse(key, value)?,
            _ => return Err(format!("unknown setting '{key}'")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), String> {
        if self.labels < 2 {
            return Err(format!("need at least 2 labels, got {}", self.labels));
        }
        if self.steps < 1 {
            return Err("need at least one Bregman step".into());
        }
        if !(self.range.0 < self.range.1) {
            return Err(format!("empty label range {}:{}", self.range.0, self.range.1));
        }
        if !(self.lambda > 0.0 && self.tol > 0.0 && self.beta > 0.0 && self.step_ratio > 0.0) {
            return Err("lambda, tol, beta and step ratio must be positive".into());
        }
        let expected = match self.command {
            Command::Denoise => 0..=1,
            Command::Stereo => 0..=2,
        };
        if !expected.contains(&self.inputs.len()) || (self.command == Command::Stereo && self.inputs.len() == 1) {
            return Err(format!("{} takes {} input paths", self.command.name(), if self.command == Command::Stereo { "0 or 2" } else { "at most 1" }));
        }
        for p in &self.inputs {
            if !p.exists() {
                return Err(format!("input {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// The manifest: every resolved setting as `key=value`, readable back
    /// through `--config`.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let list = |v: Vec<String>| v.join(",");
        let mut put = |k: &str, v: String| writeln!(s, "{k}={v}").expect("writing to a string");
        put("command", self.command.name().into());
        put("input", list(self.inputs.iter().map(|p| p.display().to_string()).collect()));
        put("out", self.out.display().to_string());
        put("labels", self.labels.to_string());
        put("range", format!("{}:{}", self.range.0, self.range.1));
        put("lambda", self.lambda.to_string());
        put("tv", self.tv.name().into());
        put("steps", self.steps.to_string());
        put("transform", switch(self.transform));
        put("tol", self.tol.to_string());
        put("max_iters", self.max_iters.to_string());
        put("step_ratio", self.step_ratio.to_string());
        put("patch_radius", self.patch_radius.to_string());
        put("beta", self.beta.to_string());
        put("samples", self.samples.to_string());
        put("profile_rows", list(self.profile_rows.iter().map(|r| r.to_string()).collect()));
        put("seed", self.seed.to_string());
        put("policy", self.policy.name().into());
        put("integrality_tol", self.integrality_tol.to_string());
        put("compare", switch(self.compare));
        put("png", switch(self.png));
        put("size", self.size.to_string());
        s
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        Path::new(&self.out).join(name)
    }
}

fn switch(b: bool) -> String {
    if b { "on" } else { "off" }.into()
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| format!("bad value '{value}' for {key}: {e}"))
}

fn parse_switch(key: &str, value: &str) -> Result<bool, String> {
    match value.trim() {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("bad value '{value}' for {key} (expected on or off)")),
    }
}

pub fn parse_range(value: &str) -> Result<(f64, f64), String> {
    let (a, b) = value.split_once(':').ok_or_else(|| format!("range '{value}' is not of the form a:b"))?;
    Ok((parse("range", a)?, parse("range", b)?))
}

fn split_list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

/// `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}
