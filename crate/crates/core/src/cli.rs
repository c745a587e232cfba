//! Configuration, CSV input/output and the command implementations behind
//! the `ggp-levy` binary.
//!
//! A config file is flat `key = value` text; `#` starts a comment. Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `model` | `exp_levy`, `ou_gamma` or `ou_ggp` |
//! | `eta`, `sigma`, `tau`, `c`, `lambda`, `mu0`, `mu1` | model parameters (simulation truth, fixed values) |
//! | `n_obs`, `delta` | length and spacing of a simulated series |
//! | `input` | return data for `fit`, `evaluate`, `predict` |
//! | `time_scale` | timestamp units per unit of Δ for price input |
//! | `test_input` | held-out returns for `evaluate` / `predict` |
//! | `fit_dir` | directory holding the `fit` outputs |
//! | `truth_latent` | CSV with a `vbar` column of true integrated volatilities |
//! | `n_iters`, `n_burnin`, `n_particles`, `n_chains`, `adapt`, `latent_thin`, `init_jitter` | sampler settings |
//! | `proposal_step` | one value or a comma list, transformed scale |
//! | `init` | comma list of starting values in natural scale |
//! | `prior.eta.shape`, `prior.eta.rate`, likewise `prior.c.*`, `prior.tau_minus_one.*`, `prior.lambda.*` | gamma priors |
//! | `prior.sigma` | `uniform` (σ in [lo, hi)) or `wide` (ln(1−σ) ~ N(mean, sd)) |
//! | `prior.sigma.lo`, `prior.sigma.hi`, `prior.sigma.mean`, `prior.sigma.sd` | σ prior settings |
//! | `n_predictive`, `horizon` | posterior-predictive draws and length without test data |
//! | `loss_alphas` | comma list of α for the ℓ_{1,α} losses |
//! | `seed`, `output` | RNG seed and output directory |
//!
//! Time units are whatever the user declares: λ, η and Δ must share them.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde_json::json;

use crate::error::{Error, Result};
use crate::evaluation::{average_loss, bayes_estimate, ks_two_sample, ranked_squared_return_bands, zeta_coverage, LossSpec};
use crate::ggp::GgpParams;
use crate::inference::{
    default_init, run_chains, ExpLevyEstimator, GammaPrior, LikelihoodEstimator, McmcConfig, OuSmcEstimator, ParamLayout,
    PosteriorTrace, PriorSpec, SigmaPrior,
};
use crate::rng::RngStream;
use crate::sv::{simulate_returns, ReturnSeries, SvKind, SvModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Evaluate,
    Predict,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Evaluate => "evaluate",
            Command::Predict => "predict",
            Command::Selftest => "selftest",
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "model", "eta", "sigma", "tau", "c", "lambda", "mu0", "mu1", "n_obs", "delta", "input", "time_scale",
    "test_input", "fit_dir", "truth_latent", "n_iters", "n_burnin", "n_particles", "n_chains", "adapt",
    "latent_thin", "init_jitter", "proposal_step", "init", "prior.eta.shape", "prior.eta.rate", "prior.c.shape",
    "prior.c.rate", "prior.tau_minus_one.shape", "prior.tau_minus_one.rate", "prior.lambda.shape",
    "prior.lambda.rate", "prior.sigma", "prior.sigma.lo", "prior.sigma.hi", "prior.sigma.mean", "prior.sigma.sd",
    "n_predictive", "horizon", "loss_alphas", "seed", "output",
];

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Every key in effect after defaults and overrides, as text.
    pub values: BTreeMap<String, String>,
    pub model: SvModelSpec,
    pub prior: PriorSpec,
    pub mcmc: McmcConfig,
    pub init: Option<Vec<f64>>,
    pub n_obs: usize,
    pub delta: f64,
    pub input: Option<PathBuf>,
    pub time_scale: f64,
    pub test_input: Option<PathBuf>,
    pub fit_dir: Option<PathBuf>,
    pub truth_latent: Option<PathBuf>,
    pub n_predictive: usize,
    pub horizon: usize,
    pub loss_alphas: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

fn cfg_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}

fn data_err(line: Option<usize>, msg: impl Into<String>) -> Error {
    Error::Data { line, msg: msg.into() }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Parses `key = value` lines.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(&format!("line {}", i + 1), format!("expected key = value, got `{line}`")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Reads a key-value config file, or the `config` object of a run manifest
/// when the path ends in `.json`.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| cfg_err("config", format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| cfg_err("config", e.to_string()))?;
        let obj = v
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| cfg_err("config", "manifest has no `config` object"))?;
        return obj
            .iter()
            .map(|(k, v)| {
                v.as_str()
                    .map(|s| (k.clone(), s.to_string()))
                    .ok_or_else(|| cfg_err(k, "manifest values must be strings"))
            })
            .collect();
    }
    parse_kv(&text)
}

struct Fields<'a>(&'a BTreeMap<String, String>);

impl Fields<'_> {
    fn raw(&self, k: &str) -> Option<&str> {
        self.0.get(k).map(String::as_str).filter(|s| !s.is_empty())
    }

    fn f64_or(&self, k: &str, default: f64) -> Result<f64> {
        match self.raw(k) {
            None => Ok(default),
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| cfg_err(k, format!("`{s}` is not a finite number"))),
        }
    }

    fn usize_or(&self, k: &str, default: usize) -> Result<usize> {
        match self.raw(k) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| cfg_err(k, format!("`{s}` is not a nonnegative integer"))),
        }
    }

    fn bool_or(&self, k: &str, default: bool) -> Result<bool> {
        match self.raw(k) {
            None => Ok(default),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(s) => Err(cfg_err(k, format!("`{s}` is not a boolean"))),
        }
    }

    fn list(&self, k: &str) -> Result<Option<Vec<f64>>> {
        self.raw(k)
            .map(|s| {
                s.split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| cfg_err(k, format!("`{}` is not a finite number", p.trim())))
                    })
                    .collect()
            })
            .transpose()
    }

    fn path(&self, k: &str) -> Option<PathBuf> {
        self.raw(k).map(PathBuf::from)
    }

    fn gamma(&self, name: &str, default: GammaPrior) -> Result<GammaPrior> {
        let shape_key = format!("prior.{name}.shape");
        let g = GammaPrior {
            shape: self.f64_or(&shape_key, default.shape)?,
            rate: self.f64_or(&format!("prior.{name}.rate"), default.rate)?,
        };
        g.validate().map_err(|e| cfg_err(&shape_key, e.to_string()))?;
        Ok(g)
    }
}

impl RunConfig {
    /// Builds and validates a configuration; `overrides` win over `base`.
    pub fn from_map(command: Command, base: BTreeMap<String, String>, overrides: &[(String, String)]) -> Result<Self> {
        let mut values = base;
        for (k, v) in overrides {
            values.insert(k.clone(), v.clone());
        }
        if let Some(k) = values.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(cfg_err(k, "unknown key"));
        }
        let f = Fields(&values);

        let kind = match f.raw("model") {
            None => SvKind::ExpLevy,
            Some(s) => SvKind::parse(s).ok_or_else(|| cfg_err("model", format!("unknown model `{s}`")))?,
        };
        let sigma_default = if kind == SvKind::ExpLevy { 0.5 } else { 0.0 };
        let marginal = GgpParams {
            eta: f.f64_or("eta", 1.0)?,
            sigma: f.f64_or("sigma", sigma_default)?,
            tau: f.f64_or("tau", 3.0)?,
            c: f.f64_or("c", 1.0)?,
        };
        let model = SvModelSpec {
            kind,
            marginal,
            mu0: f.f64_or("mu0", 0.0)?,
            mu1: f.f64_or("mu1", 0.0)?,
            lambda: f.f64_or("lambda", 0.05)?,
        };
        for (k, v) in [("eta", marginal.eta), ("tau", marginal.tau), ("c", marginal.c)] {
            if v <= 0.0 {
                return Err(cfg_err(k, "must be > 0"));
            }
        }
        if kind.is_ou() && model.lambda <= 0.0 {
            return Err(cfg_err("lambda", "must be > 0"));
        }
        if marginal.sigma >= 1.0 || (kind == SvKind::OuGgp && marginal.sigma != 0.0) {
            return Err(cfg_err("sigma", format!("{} is not allowed for {}", marginal.sigma, kind.name())));
        }
        model.validate().map_err(|e| cfg_err("model", e.to_string()))?;

        let defaults = PriorSpec::default();
        let sigma = match f.raw("prior.sigma").unwrap_or("uniform") {
            "uniform" => SigmaPrior::Uniform {
                lo: f.f64_or("prior.sigma.lo", 0.0)?,
                hi: f.f64_or("prior.sigma.hi", 1.0)?,
            },
            "wide" => SigmaPrior::LogOneMinusNormal {
                mean: f.f64_or("prior.sigma.mean", 0.0)?,
                sd: f.f64_or("prior.sigma.sd", 1.0)?,
            },
            s => return Err(cfg_err("prior.sigma", format!("`{s}` is neither `uniform` nor `wide`"))),
        };
        sigma.validate().map_err(|e| cfg_err("prior.sigma", e.to_string()))?;
        let prior = PriorSpec {
            eta: f.gamma("eta", defaults.eta)?,
            c: f.gamma("c", defaults.c)?,
            tau_minus_one: f.gamma("tau_minus_one", defaults.tau_minus_one)?,
            lambda: f.gamma("lambda", defaults.lambda)?,
            sigma,
        };
        let dim = ParamLayout::new(kind, prior)?.dim();

        let seed = match f.raw("seed") {
            None => 0,
            Some(s) => s.parse().map_err(|_| cfg_err("seed", format!("`{s}` is not a 64-bit unsigned integer")))?,
        };
        let n_iters = f.usize_or("n_iters", 2000)?;
        let mut mcmc = McmcConfig::new(n_iters, f.usize_or("n_burnin", n_iters / 2)?, f.usize_or("n_particles", 500)?, f.usize_or("n_chains", 3)?, dim, seed);
        if let Some(step) = f.list("proposal_step")? {
            mcmc.proposal_step = match step.len() {
                1 => vec![step[0]; dim],
                _ => step,
            };
        }
        mcmc.adapt = f.bool_or("adapt", true)?;
        mcmc.latent_thin = f.usize_or("latent_thin", 0)?;
        mcmc.init_jitter = f.f64_or("init_jitter", 0.1)?;
        mcmc.validate(dim)?;
        if kind.is_ou() && mcmc.n_particles < 2 {
            return Err(cfg_err("n_particles", "the particle filter needs at least 2 particles"));
        }

        let init = f.list("init")?;
        if let Some(x) = &init {
            ParamLayout::new(kind, prior)?
                .transform(x)
                .map_err(|e| cfg_err("init", e.to_string()))?;
        }

        let delta = f.f64_or("delta", 1.0)?;
        if delta <= 0.0 {
            return Err(cfg_err("delta", "must be > 0"));
        }
        let time_scale = f.f64_or("time_scale", 1.0)?;
        if time_scale <= 0.0 {
            return Err(cfg_err("time_scale", "must be > 0"));
        }
        let loss_alphas = f.list("loss_alphas")?.unwrap_or_else(|| vec![0.05, 0.5, 0.95]);
        if let Some(a) = loss_alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(cfg_err("loss_alphas", format!("{a} is not in (0, 1)")));
        }

        let cfg = Self {
            command,
            model,
            prior,
            mcmc,
            init,
            n_obs: f.usize_or("n_obs", 1000)?,
            delta,
            input: f.path("input"),
            time_scale,
            test_input: f.path("test_input"),
            fit_dir: f.path("fit_dir"),
            truth_latent: f.path("truth_latent"),
            n_predictive: f.usize_or("n_predictive", 200)?,
            horizon: f.usize_or("horizon", 100)?,
            loss_alphas,
            seed,
            output_dir: f.path("output").unwrap_or_else(|| PathBuf::from("out")),
            values: BTreeMap::new(),
        };
        cfg.check_required()?;
        Ok(Self { values, ..cfg })
    }

    fn check_required(&self) -> Result<()> {
        let need = |field: &str, p: &Option<PathBuf>| -> Result<()> {
            match p {
                None => Err(cfg_err(field, format!("required by `{}`", self.command.name()))),
                Some(p) if !p.exists() => Err(cfg_err(field, format!("{} does not exist", p.display()))),
                Some(_) => Ok(()),
            }
        };
        let exists = |field: &str, p: &Option<PathBuf>| -> Result<()> {
            match p {
                Some(p) if !p.exists() => Err(cfg_err(field, format!("{} does not exist", p.display()))),
                _ => Ok(()),
            }
        };
        match self.command {
            Command::Simulate => {
                if self.n_obs == 0 {
                    return Err(cfg_err("n_obs", "must be positive"));
                }
            }
            Command::Fit => need("input", &self.input)?,
            Command::Predict => need("fit_dir", &self.fit_dir)?,
            Command::Evaluate => {
                need("fit_dir", &self.fit_dir)?;
                need("test_input", &self.test_input)?;
            }
            Command::Selftest => {}
        }
        exists("input", &self.input)?;
        exists("test_input", &self.test_input)?;
        exists("truth_latent", &self.truth_latent)?;
        if self.n_predictive == 0 && matches!(self.command, Command::Predict | Command::Evaluate) {
            return Err(cfg_err("n_predictive", "must be positive"));
        }
        if self.command != Command::Selftest && fs::create_dir_all(&self.output_dir).is_err() {
            return Err(cfg_err("output", format!("cannot create {}", self.output_dir.display())));
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<ParamLayout> {
        ParamLayout::new(self.model.kind, self.prior)
    }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| io_err(path, e))
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.eq_ignore_ascii_case(name))
}

fn parse_cell(rec: &csv::StringRecord, i: usize, what: &str) -> Result<f64> {
    let line = rec.position().map(|p| p.line() as usize);
    let s = rec.get(i).ok_or_else(|| data_err(line, format!("missing {what}")))?;
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| data_err(line, format!("{what} `{s}` is not a finite number")))
}

/// Loads returns from CSV with a header. Accepted shapes: `timestamp,price`
/// (returns log(S_k/S_{k−1}), Δ_k = timestamp gap / `time_scale`) and
/// `delta,log_return`.
pub fn load_return_series(path: &Path, time_scale: f64) -> Result<ReturnSeries> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    let records: Vec<csv::StringRecord> = rdr
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| data_err(e.position().map(|p| p.line() as usize), e.to_string()))?;

    if let (Some(it), Some(ip)) = (column_index(&headers, "timestamp"), column_index(&headers, "price")) {
        if records.len() < 2 {
            return Err(data_err(None, "price data needs at least two rows"));
        }
        let mut y = Vec::with_capacity(records.len() - 1);
        let mut delta = Vec::with_capacity(records.len() - 1);
        let mut prev: Option<(f64, f64)> = None;
        for rec in &records {
            let line = rec.position().map(|p| p.line() as usize);
            let t = parse_cell(rec, it, "timestamp")?;
            let s = parse_cell(rec, ip, "price")?;
            if s <= 0.0 {
                return Err(data_err(line, format!("price {s} must be > 0")));
            }
            if let Some((t0, s0)) = prev {
                if t <= t0 {
                    return Err(data_err(line, format!("timestamp {t} does not increase after {t0}")));
                }
                y.push((s / s0).ln());
                delta.push((t - t0) / time_scale);
            }
            prev = Some((t, s));
        }
        return ReturnSeries::new(y, delta).map_err(|e| data_err(None, e.to_string()));
    }
    if let (Some(id), Some(iy)) = (column_index(&headers, "delta"), column_index(&headers, "log_return")) {
        if records.is_empty() {
            return Err(data_err(None, "no data rows"));
        }
        let mut y = Vec::with_capacity(records.len());
        let mut delta = Vec::with_capacity(records.len());
        for rec in &records {
            let line = rec.position().map(|p| p.line() as usize);
            let d = parse_cell(rec, id, "delta")?;
            if d <= 0.0 {
                return Err(data_err(line, format!("delta {d} must be > 0")));
            }
            delta.push(d);
            y.push(parse_cell(rec, iy, "log_return")?);
        }
        return ReturnSeries::new(y, delta).map_err(|e| data_err(None, e.to_string()));
    }
    Err(data_err(Some(1), "header must contain `timestamp,price` or `delta,log_return`"))
}

/// Reads one named numeric column.
pub fn load_column(path: &Path, name: &str) -> Result<Vec<f64>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    let i = column_index(&headers, name).ok_or_else(|| data_err(Some(1), format!("no `{name}` column")))?;
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| data_err(e.position().map(|p| p.line() as usize), e.to_string()))?;
            parse_cell(&r, i, name)
        })
        .collect()
}

/// Reads a numeric matrix, skipping the header and the first `skip` columns.
pub fn load_matrix(path: &Path, skip: usize) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = reader(path)?;
    let headers: Vec<String> = rdr.headers().map_err(|e| io_err(path, e))?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| {
            let r = r.map_err(|e| data_err(e.position().map(|p| p.line() as usize), e.to_string()))?;
            (skip..r.len()).map(|i| parse_cell(&r, i, &headers[i])).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((headers, rows))
}

/// CSV writer with shortest round-trip float formatting.
fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn write_return_series(path: &Path, series: &ReturnSeries) -> Result<()> {
    write_csv(
        path,
        &strings(&["delta", "log_return"]),
        series.delta.iter().zip(&series.y).map(|(d, y)| vec![fmt(*d), fmt(*y)]),
    )
}

pub fn write_latent(path: &Path, vbar: &[f64]) -> Result<()> {
    write_csv(path, &strings(&["index", "vbar"]), vbar.iter().enumerate().map(|(k, v)| vec![(k + 1).to_string(), fmt(*v)]))
}

pub fn write_trace(path: &Path, t: &PosteriorTrace) -> Result<()> {
    let mut header = vec!["iteration".to_string()];
    header.extend(t.names.iter().map(|s| s.to_string()));
    header.extend(t.transformed_names.iter().map(|s| s.to_string()));
    header.extend(strings(&["loglik_hat", "accepted"]));
    let rows = (0..t.natural.len()).map(|i| {
        let mut r = vec![(i + 1).to_string()];
        r.extend(t.natural[i].iter().map(|x| fmt(*x)));
        r.extend(t.transformed[i].iter().map(|x| fmt(*x)));
        r.push(fmt(t.loglik_hat[i]));
        r.push((t.accepted[i] as u8).to_string());
        r
    });
    write_csv(path, &header, rows)
}

fn write_matrix(path: &Path, first: &str, col_prefix: &str, rows: &[Vec<f64>]) -> Result<()> {
    let width = rows.first().map_or(0, Vec::len);
    let mut header = vec![first.to_string()];
    header.extend((1..=width).map(|k| format!("{col_prefix}{k}")));
    write_csv(
        path,
        &header,
        rows.iter().enumerate().map(|(i, r)| {
            let mut out = vec![(i + 1).to_string()];
            out.extend(r.iter().map(|x| fmt(*x)));
            out
        }),
    )
}

/// Per-parameter posterior mean and 2.5% / 97.5% quantiles pooled over chains.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub parameter: String,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

pub fn summarize(traces: &[PosteriorTrace]) -> Vec<SummaryRow> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    (0..first.names.len())
        .map(|j| {
            let mut col: Vec<f64> = traces.iter().flat_map(|t| t.column(j)).collect();
            col.sort_by(f64::total_cmp);
            SummaryRow {
                parameter: first.names[j].to_string(),
                mean: col.iter().sum::<f64>() / col.len() as f64,
                q025: crate::evaluation::lower_quantile(&col, 0.025),
                q975: crate::evaluation::lower_quantile(&col, 0.975),
            }
        })
        .collect()
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_csv(
        path,
        &strings(&["parameter", "mean", "q025", "q975"]),
        rows.iter().map(|r| vec![r.parameter.clone(), fmt(r.mean), fmt(r.q025), fmt(r.q975)]),
    )
}

fn write_manifest(cfg: &RunConfig, start: Instant, outputs: &[PathBuf], extra: serde_json::Value) -> Result<PathBuf> {
    let path = cfg.output_dir.join("manifest.json");
    let m = json!({
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "config": cfg.values,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_secs": start.elapsed().as_secs_f64(),
        "outputs": outputs.iter().map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect::<Vec<_>>(),
        "details": extra,
    });
    let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&m).expect("manifest serializes")).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Simulates returns and latent volatilities from the configured model.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let mut rng = RngStream::new(cfg.seed, 0);
    let delta = vec![cfg.delta; cfg.n_obs];
    let (series, vbar) = simulate_returns(&mut rng, &cfg.model, &delta)?;
    let ret = cfg.output_dir.join("returns.csv");
    let lat = cfg.output_dir.join("latent.csv");
    write_return_series(&ret, &series)?;
    write_latent(&lat, &vbar)?;
    let mut out = vec![ret, lat];
    out.push(write_manifest(cfg, start, &out, json!({}))?);
    Ok(out)
}

fn estimator(cfg: &RunConfig, data: ReturnSeries) -> Result<Box<dyn LikelihoodEstimator>> {
    Ok(if cfg.model.kind.is_ou() {
        Box::new(OuSmcEstimator::new(data, cfg.mcmc.n_particles)?)
    } else {
        Box::new(ExpLevyEstimator::new(data, cfg.mcmc.n_particles)?)
    })
}

/// Runs the chains and writes traces, latent draws, summary and manifest.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let input = cfg.input.as_ref().ok_or_else(|| cfg_err("input", "required by `fit`"))?;
    let data = load_return_series(input, cfg.time_scale)?;
    let layout = cfg.layout()?;
    let init = match &cfg.init {
        Some(x) => x.clone(),
        None => default_init(cfg.model.kind, &data)?,
    };
    info!("fitting {} to {} observations from {:?}", cfg.model.kind.name(), data.len(), init);
    let est = estimator(cfg, data)?;
    let traces = run_chains(&cfg.model, &layout, est.as_ref(), &cfg.mcmc, &init)?;
    let mut out = Vec::new();
    for t in &traces {
        let p = cfg.output_dir.join(format!("trace_chain{}.csv", t.chain));
        write_trace(&p, t)?;
        out.push(p);
        if !t.latent_vbar.is_empty() {
            let p = cfg.output_dir.join(format!("latent_chain{}.csv", t.chain));
            write_matrix(&p, "draw", "vbar", &t.latent_vbar)?;
            out.push(p);
        }
    }
    let p = cfg.output_dir.join("summary.csv");
    write_summary(&p, &summarize(&traces))?;
    out.push(p);
    let details = json!({
        "init": init,
        "acceptance_rates": traces.iter().map(|t| t.acceptance_rate).collect::<Vec<_>>(),
        "burnin_acceptance_rates": traces.iter().map(|t| t.burnin_acceptance_rate).collect::<Vec<_>>(),
        "final_steps": traces.iter().map(|t| t.final_step.clone()).collect::<Vec<_>>(),
    });
    out.push(write_manifest(cfg, start, &out, details)?);
    Ok(out)
}

fn chain_files(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(usize, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let idx = name.strip_prefix(prefix)?.strip_suffix(".csv")?.parse().ok()?;
            Some((idx, p))
        })
        .collect();
    files.sort();
    Ok(files.into_iter().map(|f| f.1).collect())
}

/// Natural-scale parameter rows pooled over the trace files in `dir`.
pub fn load_posterior_draws(dir: &Path, layout: &ParamLayout) -> Result<Vec<Vec<f64>>> {
    let files = chain_files(dir, "trace_chain")?;
    if files.is_empty() {
        return Err(data_err(None, format!("no trace_chain*.csv in {}", dir.display())));
    }
    let mut rows = Vec::new();
    for f in files {
        let (headers, m) = load_matrix(&f, 0)?;
        let idx: Vec<usize> = layout
            .names()
            .iter()
            .map(|n| headers.iter().position(|h| h == n).ok_or_else(|| data_err(Some(1), format!("{}: no `{n}` column", f.display()))))
            .collect::<Result<_>>()?;
        rows.extend(m.into_iter().map(|r| idx.iter().map(|&i| r[i]).collect::<Vec<f64>>()));
    }
    Ok(rows)
}

/// Posterior-predictive return paths: each row takes an evenly spaced
/// posterior draw and simulates the model over `delta`. OU paths start
/// from the stationary law.
pub fn posterior_predictive(rng: &mut RngStream, template: &SvModelSpec, layout: &ParamLayout, draws: &[Vec<f64>], delta: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    if draws.is_empty() {
        return Err(Error::EmptyInput("posterior draws"));
    }
    (0..n)
        .map(|i| {
            let row = &draws[i * draws.len() / n];
            let spec = layout.apply(template, row)?;
            Ok(simulate_returns(rng, &spec, delta)?.0.y)
        })
        .collect()
}

fn predictive_for(cfg: &RunConfig) -> Result<(Option<ReturnSeries>, Vec<Vec<f64>>)> {
    let layout = cfg.layout()?;
    let fit_dir = cfg.fit_dir.as_ref().ok_or_else(|| cfg_err("fit_dir", "required"))?;
    let draws = load_posterior_draws(fit_dir, &layout)?;
    let test = cfg.test_input.as_ref().map(|p| load_return_series(p, cfg.time_scale)).transpose()?;
    let delta = match &test {
        Some(t) => t.delta.clone(),
        None => vec![cfg.delta; cfg.horizon],
    };
    let mut rng = RngStream::new(cfg.seed, 1);
    let pred = posterior_predictive(&mut rng, &cfg.model, &layout, &draws, &delta, cfg.n_predictive)?;
    Ok((test, pred))
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let (_, pred) = predictive_for(cfg)?;
    let p = cfg.output_dir.join("predictive.csv");
    write_matrix(&p, "draw", "y", &pred)?;
    let mut out = vec![p];
    out.push(write_manifest(cfg, start, &out, json!({}))?);
    Ok(out)
}

/// Predictive KS and ranked-return bands against held-out returns, plus
/// ζ-coverage and losses of the latent draws when the truth is supplied.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let (test, pred) = predictive_for(cfg)?;
    let test = test.ok_or_else(|| cfg_err("test_input", "required by `evaluate`"))?;
    let mut out = Vec::new();
    let mut metrics: Vec<(String, f64)> = Vec::new();

    let pooled: Vec<f64> = pred.iter().flatten().copied().collect();
    metrics.push(("predictive_ks".into(), ks_two_sample(&test.y, &pooled)?));

    let bands = ranked_squared_return_bands(&pred, &test.y)?;
    let covered = bands.iter().filter(|b| b.observed >= b.lower && b.observed <= b.upper).count();
    metrics.push(("rank_band_coverage".into(), covered as f64 / bands.len() as f64));
    let p = cfg.output_dir.join("rank_bands.csv");
    write_csv(
        &p,
        &strings(&["rank", "lower", "upper", "observed"]),
        bands.iter().map(|b| vec![b.rank.to_string(), fmt(b.lower), fmt(b.upper), fmt(b.observed)]),
    )?;
    out.push(p);

    if let Some(truth_path) = &cfg.truth_latent {
        let truth = load_column(truth_path, "vbar")?;
        let fit_dir = cfg.fit_dir.as_ref().expect("checked at parse time");
        let mut latent = Vec::new();
        for f in chain_files(fit_dir, "latent_chain")? {
            latent.extend(load_matrix(&f, 1)?.1);
        }
        if latent.is_empty() {
            return Err(data_err(None, "no latent_chain*.csv; fit with latent_thin > 0"));
        }
        let (zeta, ks) = zeta_coverage(&truth, &latent)?;
        metrics.push(("zeta_ks".into(), ks));
        let p = cfg.output_dir.join("zeta.csv");
        write_csv(&p, &strings(&["index", "zeta"]), zeta.iter().enumerate().map(|(k, z)| vec![(k + 1).to_string(), fmt(*z)]))?;
        out.push(p);

        let mut losses = vec![LossSpec::L2];
        losses.extend(cfg.loss_alphas.iter().map(|&a| LossSpec::L1Alpha(a)));
        let mut rows = Vec::new();
        for loss in losses {
            let est: Vec<f64> = (0..truth.len())
                .map(|k| bayes_estimate(&latent.iter().map(|r| r[k]).collect::<Vec<_>>(), loss))
                .collect::<Result<_>>()?;
            let (name, alpha) = match loss {
                LossSpec::L2 => ("l2", String::new()),
                LossSpec::L1Alpha(a) => ("l1_alpha", fmt(a)),
            };
            rows.push(vec![name.to_string(), alpha, fmt(average_loss(&truth, &est, loss)?)]);
        }
        let p = cfg.output_dir.join("losses.csv");
        write_csv(&p, &strings(&["loss", "alpha", "value"]), rows.into_iter())?;
        out.push(p);
    }

    let p = cfg.output_dir.join("ks.csv");
    write_csv(&p, &strings(&["metric", "value"]), metrics.iter().map(|(k, v)| vec![k.clone(), fmt(*v)]))?;
    out.push(p);
    out.push(write_manifest(cfg, start, &out, json!({}))?);
    Ok(out)
}

/// One named invariant check for `selftest`.
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fast invariant suite; every check is independent of the others.
pub fn cmd_selftest(cfg: &RunConfig) -> Result<Vec<Check>> {
    Ok(crate::selftest::run(cfg.seed))
}

/// Process exit code for an error: 2 config, 3 data or io, 4 numeric.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => 2,
        Error::Data { .. } | Error::Io { .. } | Error::DimensionMismatch(_) | Error::EmptyInput(_) | Error::InsufficientRows { .. } => 3,
        _ => 4,
    }
}
