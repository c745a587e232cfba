//! Pseudo-marginal Metropolis–Hastings for the stochastic-volatility models.
//!
//! The likelihood is replaced by an unbiased estimate: a plain Monte Carlo
//! average per observation for the exponential-Lévy model, and a bootstrap
//! particle filter for the OU models. The estimate attached to the current
//! state is recycled, never recomputed.

use log::{debug, warn};
use rand::RngCore;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::ggp::sample_ggp_increment;
use crate::rng::RngStream;
use crate::special_fn::ln_gamma_unchecked;
use crate::sv::{normal_logdensity, ou_noise_unchecked, sample_ou_stationary, OuDecay, ReturnSeries, SvKind, SvModelSpec};

/// Robbins–Monro target for the burn-in step-size adaptation.
pub const TARGET_ACCEPTANCE: f64 = 0.25;
/// Post-burn-in acceptance rates outside this band trigger a warning.
pub const ACCEPTANCE_BAND: (f64, f64) = (0.05, 0.6);

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Eta,
    Sigma,
    Tau,
    C,
    Lambda,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Eta => "eta",
            Param::Sigma => "sigma",
            Param::Tau => "tau",
            Param::C => "c",
            Param::Lambda => "lambda",
        }
    }

    /// Name of the unconstrained coordinate used by the sampler.
    pub fn transformed_name(self, sigma: &SigmaPrior) -> &'static str {
        match (self, sigma) {
            (Param::Eta, _) => "log_eta",
            (Param::Sigma, SigmaPrior::Uniform { .. }) => "logit_sigma",
            (Param::Sigma, SigmaPrior::LogOneMinusNormal { .. }) => "log_one_minus_sigma",
            (Param::Tau, _) => "log_tau_minus_one",
            (Param::C, _) => "log_c",
            (Param::Lambda, _) => "log_lambda",
        }
    }
}

/// Free parameters of each model, in trace order.
pub fn free_params(kind: SvKind) -> Vec<Param> {
    match kind {
        SvKind::ExpLevy => vec![Param::Eta, Param::Sigma, Param::Tau, Param::C],
        SvKind::OuGamma => vec![Param::Eta, Param::C, Param::Lambda],
        SvKind::OuGgp => vec![Param::Eta, Param::Tau, Param::C, Param::Lambda],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        let g = Self { shape, rate };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.rate > 0.0 && self.shape.is_finite() && self.rate.is_finite()) {
            return Err(domain("GammaPrior", format!("shape {} and rate {} must be > 0", self.shape, self.rate)));
        }
        Ok(())
    }

    fn ln_norm(&self) -> f64 {
        self.shape * self.rate.ln() - ln_gamma_unchecked(self.shape)
    }

    /// Log density at x; −∞ off (0, ∞).
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0 && x.is_finite()) {
            return f64::NEG_INFINITY;
        }
        self.ln_norm() + (self.shape - 1.0) * x.ln() - self.rate * x
    }

    /// Log density of u = ln x.
    fn ln_pdf_log(&self, u: f64) -> f64 {
        let x = u.exp();
        if !(x > 0.0 && x.is_finite()) {
            return f64::NEG_INFINITY;
        }
        self.ln_norm() + self.shape * u - self.rate * x
    }
}

/// Prior on σ. `Uniform` keeps σ in [lo, hi) ⊆ [0, 1) with a logit transform;
/// `LogOneMinusNormal` opens the support to (−∞, 1) with u = ln(1−σ) normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaPrior {
    Uniform { lo: f64, hi: f64 },
    LogOneMinusNormal { mean: f64, sd: f64 },
}

impl SigmaPrior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SigmaPrior::Uniform { lo, hi } => {
                if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                    return Err(domain("SigmaPrior", format!("need 0 <= lo < hi <= 1, got ({lo}, {hi})")));
                }
            }
            SigmaPrior::LogOneMinusNormal { mean, sd } => {
                if !(mean.is_finite() && sd > 0.0 && sd.is_finite()) {
                    return Err(domain("SigmaPrior", format!("need finite mean and sd > 0, got ({mean}, {sd})")));
                }
            }
        }
        Ok(())
    }

    fn to_unconstrained(&self, sigma: f64) -> Option<f64> {
        match *self {
            SigmaPrior::Uniform { lo, hi } => {
                if !(sigma > lo && sigma < hi) {
                    return None;
                }
                let s = (sigma - lo) / (hi - lo);
                Some(s.ln() - (-s).ln_1p())
            }
            SigmaPrior::LogOneMinusNormal { .. } => (sigma < 1.0).then(|| (-sigma).ln_1p()),
        }
    }

    fn from_unconstrained(&self, u: f64) -> f64 {
        match *self {
            SigmaPrior::Uniform { lo, hi } => lo + (hi - lo) / (1.0 + (-u).exp()),
            SigmaPrior::LogOneMinusNormal { .. } => -u.exp_m1(),
        }
    }

    /// ln |dσ/du|.
    fn ln_jacobian(&self, sigma: f64) -> f64 {
        match *self {
            SigmaPrior::Uniform { lo, hi } => {
                let s = (sigma - lo) / (hi - lo);
                (hi - lo).ln() + s.ln() + (-s).ln_1p()
            }
            SigmaPrior::LogOneMinusNormal { .. } => (-sigma).ln_1p(),
        }
    }

    fn ln_pdf(&self, sigma: f64) -> f64 {
        match *self {
            SigmaPrior::Uniform { lo, hi } => {
                if sigma >= lo && sigma < hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            SigmaPrior::LogOneMinusNormal { .. } => match self.to_unconstrained(sigma) {
                Some(u) => self.ln_pdf_unconstrained(u) - self.ln_jacobian(sigma),
                None => f64::NEG_INFINITY,
            },
        }
    }

    fn ln_pdf_unconstrained(&self, u: f64) -> f64 {
        match *self {
            SigmaPrior::Uniform { .. } => {
                // uniform density times |dσ/du| is the logistic density of u
                let a = -u.abs();
                a - 2.0 * a.exp().ln_1p()
            }
            SigmaPrior::LogOneMinusNormal { mean, sd } => {
                let z = (u - mean) / sd;
                -0.5 * (LN_2PI + z * z) - sd.ln()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub eta: GammaPrior,
    pub c: GammaPrior,
    /// Prior on τ − 1.
    pub tau_minus_one: GammaPrior,
    pub sigma: SigmaPrior,
    pub lambda: GammaPrior,
}

impl Default for PriorSpec {
    fn default() -> Self {
        let vague = GammaPrior { shape: 0.1, rate: 0.1 };
        Self {
            eta: vague,
            c: vague,
            tau_minus_one: GammaPrior { shape: 1.0, rate: 1.0 },
            sigma: SigmaPrior::Uniform { lo: 0.0, hi: 1.0 },
            lambda: vague,
        }
    }
}

impl PriorSpec {
    /// Default priors with σ allowed on (−∞, 1) and ln(1−σ) ~ N(0, 1).
    pub fn wide_sigma() -> Self {
        Self {
            sigma: SigmaPrior::LogOneMinusNormal { mean: 0.0, sd: 1.0 },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.eta.validate()?;
        self.c.validate()?;
        self.tau_minus_one.validate()?;
        self.lambda.validate()?;
        self.sigma.validate()
    }
}

/// The sampled coordinates of a model and their unconstrained transforms:
/// ln η, ln c, ln(τ−1), ln λ, and logit σ (or ln(1−σ) with the wide prior).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub kind: SvKind,
    pub params: Vec<Param>,
    pub prior: PriorSpec,
}

impl ParamLayout {
    pub fn new(kind: SvKind, prior: PriorSpec) -> Result<Self> {
        prior.validate()?;
        Ok(Self {
            kind,
            params: free_params(kind),
            prior,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.params.iter().map(|p| p.name()).collect()
    }

    pub fn transformed_names(&self) -> Vec<&'static str> {
        self.params.iter().map(|p| p.transformed_name(&self.prior.sigma)).collect()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("expected {} parameters, got {}", self.dim(), x.len())));
        }
        Ok(())
    }

    pub fn transform(&self, natural: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(natural)?;
        self.params
            .iter()
            .zip(natural)
            .map(|(&p, &x)| {
                let u = match p {
                    Param::Sigma => self.prior.sigma.to_unconstrained(x),
                    Param::Tau => (x > 1.0).then(|| (x - 1.0).ln()),
                    _ => (x > 0.0).then(|| x.ln()),
                };
                u.filter(|u| u.is_finite())
                    .ok_or_else(|| domain("transform_params", format!("{} = {x} outside its support", p.name())))
            })
            .collect()
    }

    pub fn inverse(&self, transformed: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .zip(transformed)
            .map(|(&p, &u)| match p {
                Param::Sigma => self.prior.sigma.from_unconstrained(u),
                Param::Tau => 1.0 + u.exp(),
                _ => u.exp(),
            })
            .collect()
    }

    /// ln |d natural / d transformed| at a natural-space point.
    pub fn log_jacobian(&self, natural: &[f64]) -> f64 {
        self.params
            .iter()
            .zip(natural)
            .map(|(&p, &x)| match p {
                Param::Sigma => self.prior.sigma.ln_jacobian(x),
                Param::Tau => (x - 1.0).ln(),
                _ => x.ln(),
            })
            .sum()
    }

    fn gamma_prior(&self, p: Param) -> &GammaPrior {
        match p {
            Param::Eta => &self.prior.eta,
            Param::C => &self.prior.c,
            Param::Tau => &self.prior.tau_minus_one,
            _ => &self.prior.lambda,
        }
    }

    /// Sum of natural-space log prior densities; −∞ outside the support.
    pub fn log_prior(&self, natural: &[f64]) -> f64 {
        if natural.len() != self.dim() {
            return f64::NEG_INFINITY;
        }
        let lp: f64 = self
            .params
            .iter()
            .zip(natural)
            .map(|(&p, &x)| match p {
                Param::Sigma => self.prior.sigma.ln_pdf(x),
                Param::Tau => self.prior.tau_minus_one.ln_pdf(x - 1.0),
                _ => self.gamma_prior(p).ln_pdf(x),
            })
            .sum();
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    /// Log prior density of the transformed coordinates, Jacobian included.
    /// Computed directly in the unconstrained space so it stays finite where
    /// the natural values underflow.
    pub fn log_prior_transformed(&self, transformed: &[f64]) -> f64 {
        if transformed.len() != self.dim() || transformed.iter().any(|u| !u.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let lp: f64 = self
            .params
            .iter()
            .zip(transformed)
            .map(|(&p, &u)| match p {
                Param::Sigma => self.prior.sigma.ln_pdf_unconstrained(u),
                _ => self.gamma_prior(p).ln_pdf_log(u),
            })
            .sum();
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    /// Model with the free parameters replaced by `natural`.
    pub fn apply(&self, template: &SvModelSpec, natural: &[f64]) -> Result<SvModelSpec> {
        self.check_dim(natural)?;
        let mut spec = *template;
        spec.kind = self.kind;
        for (&p, &x) in self.params.iter().zip(natural) {
            match p {
                Param::Eta => spec.marginal.eta = x,
                Param::Sigma => spec.marginal.sigma = x,
                Param::Tau => spec.marginal.tau = x,
                Param::C => spec.marginal.c = x,
                Param::Lambda => spec.lambda = x,
            }
        }
        if self.kind.is_ou() {
            spec.marginal.sigma = 0.0;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn extract(&self, spec: &SvModelSpec) -> Vec<f64> {
        self.params
            .iter()
            .map(|p| match p {
                Param::Eta => spec.marginal.eta,
                Param::Sigma => spec.marginal.sigma,
                Param::Tau => spec.marginal.tau,
                Param::C => spec.marginal.c,
                Param::Lambda => spec.lambda,
            })
            .collect()
    }
}

/// Output of one likelihood estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// ln p̂(y | φ); −∞ when the estimate is exactly zero.
    pub loglik: f64,
    /// One draw of the integrated volatilities given φ and y, if requested.
    pub latent: Option<Vec<f64>>,
}

/// Source of ln p̂(y | φ) where p̂ is a nonnegative unbiased estimator.
pub trait LikelihoodEstimator: Sync {
    fn estimate(&self, rng: &mut RngStream, spec: &SvModelSpec, want_latent: bool) -> Result<Estimate>;
}

/// p̂ ≡ 1; the chain then targets the prior.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantLikelihood;

impl LikelihoodEstimator for ConstantLikelihood {
    fn estimate(&self, _rng: &mut RngStream, _spec: &SvModelSpec, _want_latent: bool) -> Result<Estimate> {
        Ok(Estimate { loglik: 0.0, latent: None })
    }
}

/// Tractable stand-in: y_i ~ N(0, 1/η) i.i.d., with the exact likelihood
/// multiplied by mean-one log-normal noise exp(sN − s²/2). The η posterior
/// under a Gamma(a, b) prior is Gamma(a + n/2, b + Σy²/2).
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyNormalPrecision {
    pub y: Vec<f64>,
    pub noise_sd: f64,
}

impl NoisyNormalPrecision {
    pub fn exact_loglik(&self, precision: f64) -> f64 {
        let n = self.y.len() as f64;
        let ss: f64 = self.y.iter().map(|y| y * y).sum();
        0.5 * n * (precision.ln() - LN_2PI) - 0.5 * precision * ss
    }

    pub fn posterior(&self, prior: &GammaPrior) -> GammaPrior {
        let ss: f64 = self.y.iter().map(|y| y * y).sum();
        GammaPrior {
            shape: prior.shape + 0.5 * self.y.len() as f64,
            rate: prior.rate + 0.5 * ss,
        }
    }
}

impl LikelihoodEstimator for NoisyNormalPrecision {
    fn estimate(&self, rng: &mut RngStream, spec: &SvModelSpec, _want_latent: bool) -> Result<Estimate> {
        let s = self.noise_sd;
        let noise = s * rng.normal() - 0.5 * s * s;
        Ok(Estimate {
            loglik: self.exact_loglik(spec.marginal.eta) + noise,
            latent: None,
        })
    }
}

fn check_data(data: &ReturnSeries) -> Result<()> {
    data.validate()
}

/// ln of the max-shifted mean of exp(lw).
fn log_mean_exp(lw: &[f64]) -> f64 {
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = lw.iter().map(|&l| (l - m).exp()).sum();
    m + (s / lw.len() as f64).ln()
}

/// Index drawn with probability ∝ exp(lw), given the max-shifted weights.
fn draw_index(rng: &mut RngStream, w: &[f64], total: f64) -> usize {
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        acc += wi;
        if acc >= target {
            return i;
        }
    }
    w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Monte Carlo estimator for the exponential-Lévy model:
/// p̂ = Π_k (1/n_p) Σ_j p(y_k | v̄_k^{(j)}), v̄_k^{(j)} ~ GGP(Δ_k η, σ, τ, c).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpLevyEstimator {
    pub data: ReturnSeries,
    pub n_particles: usize,
}

impl ExpLevyEstimator {
    pub fn new(data: ReturnSeries, n_particles: usize) -> Result<Self> {
        check_data(&data)?;
        if n_particles == 0 {
            return Err(domain("ExpLevyEstimator", "n_particles must be >= 1"));
        }
        Ok(Self { data, n_particles })
    }
}

impl LikelihoodEstimator for ExpLevyEstimator {
    fn estimate(&self, rng: &mut RngStream, spec: &SvModelSpec, want_latent: bool) -> Result<Estimate> {
        exp_levy_estimate(rng, spec, &self.data, self.n_particles, want_latent)
    }
}

/// ln p̂ for the exponential-Lévy model.
pub fn estimate_loglik_exp_levy(rng: &mut RngStream, spec: &SvModelSpec, data: &ReturnSeries, n_particles: usize) -> Result<f64> {
    Ok(exp_levy_estimate(rng, spec, data, n_particles, false)?.loglik)
}

/// Each observation gets its own stream keyed by one word of `rng`, so the
/// per-observation work can run in parallel with a fixed result.
fn exp_levy_estimate(rng: &mut RngStream, spec: &SvModelSpec, data: &ReturnSeries, n_particles: usize, want_latent: bool) -> Result<Estimate> {
    spec.validate()?;
    if spec.kind != SvKind::ExpLevy {
        return Err(Error::Regime(format!("exp-Levy estimator applied to {}", spec.kind.name())));
    }
    if n_particles == 0 {
        return Err(domain("estimate_loglik_exp_levy", "n_particles must be >= 1"));
    }
    check_data(data)?;
    let key = rng.next_u64();
    let sites: Vec<(f64, f64)> = (0..data.len())
        .into_par_iter()
        .map(|k| {
            let mut r = RngStream::new(key, k as u64);
            exp_levy_site(&mut r, spec, data.y[k], data.delta[k], n_particles, want_latent)
        })
        .collect::<Result<_>>()?;
    let mut loglik = 0.0;
    for &(l, _) in &sites {
        loglik += l;
    }
    Ok(Estimate {
        loglik,
        latent: want_latent.then(|| sites.iter().map(|s| s.1).collect()),
    })
}

fn exp_levy_site(rng: &mut RngStream, spec: &SvModelSpec, y: f64, delta: f64, n: usize, want_latent: bool) -> Result<(f64, f64)> {
    let mut v = Vec::with_capacity(n);
    let mut lw = Vec::with_capacity(n);
    for _ in 0..n {
        let vbar = sample_ggp_increment(rng, &spec.marginal, delta)?.value;
        lw.push(normal_logdensity(y - spec.return_mean(delta, vbar), vbar));
        v.push(vbar);
    }
    let l = log_mean_exp(&lw);
    let mut pick = f64::NAN;
    if want_latent && l > f64::NEG_INFINITY {
        let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|&x| (x - m).exp()).collect();
        let total = w.iter().sum();
        pick = v[draw_index(rng, &w, total)];
    }
    Ok((l, pick))
}

/// Bootstrap particle filter for the OU models with systematic resampling at
/// every step.
#[derive(Debug, Clone, PartialEq)]
pub struct OuSmcEstimator {
    pub data: ReturnSeries,
    pub n_particles: usize,
}

impl OuSmcEstimator {
    pub fn new(data: ReturnSeries, n_particles: usize) -> Result<Self> {
        check_data(&data)?;
        if n_particles < 2 {
            return Err(domain("OuSmcEstimator", "n_particles must be >= 2"));
        }
        Ok(Self { data, n_particles })
    }
}

impl LikelihoodEstimator for OuSmcEstimator {
    fn estimate(&self, rng: &mut RngStream, spec: &SvModelSpec, want_latent: bool) -> Result<Estimate> {
        let out = ou_smc(rng, spec, &self.data, self.n_particles, false, want_latent)?;
        Ok(Estimate {
            loglik: out.loglik,
            latent: out.path,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmcOutput {
    /// Σ_k ln(mean weight at step k); −∞ after a total collapse.
    pub loglik: f64,
    /// Row k: equally weighted filtered draws of V̄_k (empty unless kept).
    pub filtered_vbar: Vec<Vec<f64>>,
    /// One trajectory traced back through the ancestry, if requested.
    pub path: Option<Vec<f64>>,
}

/// ln p̂ and the filtered V̄ draws for an OU model.
pub fn estimate_loglik_ou_smc(rng: &mut RngStream, spec: &SvModelSpec, data: &ReturnSeries, n_particles: usize) -> Result<SmcOutput> {
    ou_smc(rng, spec, data, n_particles, true, false)
}

/// Systematic resampling of normalised weights into `idx`.
fn systematic_resample(rng: &mut RngStream, w: &[f64], total: f64, idx: &mut [usize]) {
    let n = idx.len();
    let step = total / n as f64;
    let mut u = rng.uniform() * step;
    let mut j = 0;
    let mut acc = w[0];
    for slot in idx.iter_mut() {
        while acc < u && j + 1 < w.len() {
            j += 1;
            acc += w[j];
        }
        *slot = j;
        u += step;
    }
}

fn ou_smc(rng: &mut RngStream, spec: &SvModelSpec, data: &ReturnSeries, n: usize, keep_filtered: bool, want_path: bool) -> Result<SmcOutput> {
    spec.validate()?;
    if !spec.kind.is_ou() {
        return Err(Error::Regime(format!("OU particle filter applied to {}", spec.kind.name())));
    }
    if n < 2 {
        return Err(domain("estimate_loglik_ou_smc", "n_particles must be >= 2"));
    }
    check_data(data)?;
    let steps = data.len();
    let mut v: Vec<f64> = (0..n).map(|_| sample_ou_stationary(rng, spec)).collect::<Result<_>>()?;
    let mut v_next = vec![0.0; n];
    let mut vbar = vec![0.0; n];
    let mut lw = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut idx = vec![0usize; n];
    let track = keep_filtered || want_path;
    let mut hist_vbar: Vec<Vec<f64>> = Vec::with_capacity(if track { steps } else { 0 });
    let mut parents: Vec<Vec<u32>> = Vec::with_capacity(if want_path { steps } else { 0 });
    let mut loglik = 0.0;
    let mut decay = OuDecay::new(spec.lambda, f64::NAN);

    for k in 0..steps {
        let (y, d) = (data.y[k], data.delta[k]);
        if d != decay.delta {
            decay = OuDecay::new(spec.lambda, d);
        }
        let rate = spec.marginal.eta * spec.lambda * d;
        for i in 0..n {
            let eps = ou_noise_unchecked(rng, spec, d, rate)?;
            let (vi, vb) = decay.step(v[i], eps);
            v[i] = vi;
            vbar[i] = vb;
            lw[i] = normal_logdensity(y - spec.return_mean(d, vb), vb);
        }
        let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            debug!("particle filter collapsed at step {k}");
            return Ok(SmcOutput {
                loglik: f64::NEG_INFINITY,
                filtered_vbar: Vec::new(),
                path: None,
            });
        }
        let mut total = 0.0;
        for i in 0..n {
            w[i] = (lw[i] - m).exp();
            total += w[i];
        }
        loglik += m + (total / n as f64).ln();

        systematic_resample(rng, &w, total, &mut idx);
        for i in 0..n {
            v_next[i] = v[idx[i]];
        }
        std::mem::swap(&mut v, &mut v_next);
        if track {
            hist_vbar.push(idx.iter().map(|&j| vbar[j]).collect());
        }
        if want_path {
            parents.push(idx.iter().map(|&j| j as u32).collect());
        }
    }

    let path = if want_path && steps > 0 {
        let mut i = (rng.uniform() * n as f64) as usize % n;
        let mut out = vec![0.0; steps];
        for k in (0..steps).rev() {
            out[k] = hist_vbar[k][i];
            // hist row k is indexed after resampling; its parent in row k−1
            // is the pre-resampling slot, which is the post-resampling slot
            // of the previous step
            i = parents[k][i] as usize;
        }
        Some(out)
    } else {
        None
    };
    Ok(SmcOutput {
        loglik,
        filtered_vbar: if keep_filtered { hist_vbar } else { Vec::new() },
        path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    /// Total iterations per chain, burn-in included.
    pub n_iters: usize,
    pub n_burnin: usize,
    pub n_particles: usize,
    pub n_chains: usize,
    /// Initial random-walk standard deviation per transformed coordinate.
    pub proposal_step: Vec<f64>,
    pub seed: u64,
    /// Adapt step sizes during burn-in; frozen afterwards.
    pub adapt: bool,
    /// Keep every `latent_thin`-th latent draw after burn-in; 0 keeps none.
    pub latent_thin: usize,
    /// Standard deviation of the per-chain jitter of the starting point in
    /// transformed space.
    pub init_jitter: f64,
}

impl McmcConfig {
    pub fn new(n_iters: usize, n_burnin: usize, n_particles: usize, n_chains: usize, dim: usize, seed: u64) -> Self {
        Self {
            n_iters,
            n_burnin,
            n_particles,
            n_chains,
            proposal_step: vec![0.1; dim],
            seed,
            adapt: true,
            latent_thin: 0,
            init_jitter: 0.1,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::Config { field: field.to_string(), msg: msg.to_string() });
        if self.n_iters == 0 {
            return bad("n_iters", "must be positive");
        }
        if self.n_burnin >= self.n_iters {
            return bad("n_burnin", "must be smaller than n_iters");
        }
        if self.n_particles == 0 {
            return bad("n_particles", "must be positive");
        }
        if self.n_chains == 0 {
            return bad("n_chains", "must be positive");
        }
        if self.proposal_step.len() != dim {
            return bad("proposal_step", &format!("needs {dim} entries, got {}", self.proposal_step.len()));
        }
        if self.proposal_step.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("proposal_step", "entries must be finite and > 0");
        }
        if !(self.init_jitter >= 0.0 && self.init_jitter.is_finite()) {
            return bad("init_jitter", "must be finite and >= 0");
        }
        Ok(())
    }
}

/// Post-burn-in output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTrace {
    pub chain: usize,
    pub names: Vec<&'static str>,
    pub transformed_names: Vec<&'static str>,
    pub natural: Vec<Vec<f64>>,
    pub transformed: Vec<Vec<f64>>,
    pub loglik_hat: Vec<f64>,
    pub accepted: Vec<bool>,
    /// Thinned latent V̄ draws, one row per kept iteration.
    pub latent_vbar: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub burnin_acceptance_rate: f64,
    /// Random-walk standard deviations in force after burn-in.
    pub final_step: Vec<f64>,
}

impl PosteriorTrace {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.natural.iter().map(|r| r[j]).collect()
    }
}

struct Current {
    u: Vec<f64>,
    log_prior: f64,
    loglik: f64,
    latent: Option<Vec<f64>>,
}

fn evaluate<E: LikelihoodEstimator + ?Sized>(
    rng: &mut RngStream,
    template: &SvModelSpec,
    layout: &ParamLayout,
    est: &E,
    u: Vec<f64>,
    want_latent: bool,
) -> Current {
    let log_prior = layout.log_prior_transformed(&u);
    let mut cur = Current {
        u,
        log_prior,
        loglik: f64::NEG_INFINITY,
        latent: None,
    };
    if log_prior == f64::NEG_INFINITY {
        return cur;
    }
    let natural = layout.inverse(&cur.u);
    let spec = match layout.apply(template, &natural) {
        Ok(s) => s,
        Err(_) => return cur,
    };
    match est.estimate(rng, &spec, want_latent) {
        Ok(e) if !e.loglik.is_nan() => {
            cur.loglik = e.loglik;
            cur.latent = e.latent;
        }
        Ok(_) => {}
        Err(e) => debug!("estimator failed, proposal rejected: {e}"),
    }
    cur
}

/// One pseudo-marginal chain started from `init` (natural space).
///
/// Gaussian random walk on the transformed coordinates. During burn-in a
/// global log-scale follows Robbins–Monro toward the target acceptance. At
/// 1/2 and 3/4 of burn-in the per-coordinate steps are reset to the running
/// standard deviations (collected from 1/10 of burn-in on) times 2.38/√d.
/// Everything is frozen after burn-in.
pub fn run_pmmh<E: LikelihoodEstimator + ?Sized>(
    rng: &mut RngStream,
    template: &SvModelSpec,
    layout: &ParamLayout,
    est: &E,
    cfg: &McmcConfig,
    init: &[f64],
) -> Result<PosteriorTrace> {
    let d = layout.dim();
    cfg.validate(d)?;
    let want_latent = cfg.latent_thin > 0;
    let u0 = layout.transform(init)?;

    let mut cur = None;
    for _ in 0..100 {
        let u: Vec<f64> = u0.iter().map(|&x| x + cfg.init_jitter * rng.normal()).collect();
        let c = evaluate(rng, template, layout, est, u, want_latent);
        if c.loglik > f64::NEG_INFINITY && c.log_prior > f64::NEG_INFINITY {
            cur = Some(c);
            break;
        }
    }
    let mut cur = cur.ok_or_else(|| Error::Numeric("no starting point with a positive likelihood estimate".into()))?;

    let mut base = cfg.proposal_step.clone();
    let mut log_scale = 0.0f64;
    let stats_from = cfg.n_burnin / 10;
    let resets = [cfg.n_burnin / 2, 3 * cfg.n_burnin / 4];
    let (mut w_n, mut w_mean, mut w_m2) = (0usize, vec![0.0; d], vec![0.0; d]);

    let kept = cfg.n_iters - cfg.n_burnin;
    let mut trace = PosteriorTrace {
        chain: rng.stream_id() as usize,
        names: layout.names(),
        transformed_names: layout.transformed_names(),
        natural: Vec::with_capacity(kept),
        transformed: Vec::with_capacity(kept),
        loglik_hat: Vec::with_capacity(kept),
        accepted: Vec::with_capacity(kept),
        latent_vbar: Vec::new(),
        acceptance_rate: 0.0,
        burnin_acceptance_rate: 0.0,
        final_step: Vec::new(),
    };
    let mut burn_acc = 0usize;

    for it in 0..cfg.n_iters {
        let burning = it < cfg.n_burnin;
        let scale = log_scale.exp();
        let prop: Vec<f64> = cur.u.iter().zip(&base).map(|(&x, &s)| x + scale * s * rng.normal()).collect();
        let cand = evaluate(rng, template, layout, est, prop, want_latent);
        let log_alpha = (cand.loglik + cand.log_prior) - (cur.loglik + cur.log_prior);
        let log_u = rng.uniform().ln();
        let accept = log_alpha.is_finite() && log_u < log_alpha || log_alpha == f64::INFINITY;
        if accept {
            cur = cand;
        }

        if burning {
            burn_acc += accept as usize;
            if cfg.adapt {
                let gain = ((it + 1) as f64).powf(-0.6);
                log_scale = (log_scale + gain * (accept as u8 as f64 - TARGET_ACCEPTANCE)).clamp(-30.0, 10.0);
                if it >= stats_from {
                    w_n += 1;
                    for j in 0..d {
                        let delta = cur.u[j] - w_mean[j];
                        w_mean[j] += delta / w_n as f64;
                        w_m2[j] += delta * (cur.u[j] - w_mean[j]);
                    }
                }
                if resets.contains(&(it + 1)) && w_n > 1 {
                    for j in 0..d {
                        let sd = (w_m2[j] / (w_n - 1) as f64).sqrt();
                        if sd > 0.0 && sd.is_finite() {
                            base[j] = sd;
                        }
                    }
                    log_scale = (2.38 / (d as f64).sqrt()).ln();
                }
            }
            continue;
        }

        trace.natural.push(layout.inverse(&cur.u));
        trace.transformed.push(cur.u.clone());
        trace.loglik_hat.push(cur.loglik);
        trace.accepted.push(accept);
        let pos = it - cfg.n_burnin;
        if want_latent && pos % cfg.latent_thin == 0 {
            if let Some(l) = &cur.latent {
                trace.latent_vbar.push(l.clone());
            }
        }
    }

    trace.acceptance_rate = trace.accepted.iter().filter(|&&a| a).count() as f64 / kept as f64;
    trace.burnin_acceptance_rate = if cfg.n_burnin > 0 {
        burn_acc as f64 / cfg.n_burnin as f64
    } else {
        f64::NAN
    };
    trace.final_step = base.iter().map(|s| s * log_scale.exp()).collect();
    if !(trace.acceptance_rate > ACCEPTANCE_BAND.0 && trace.acceptance_rate < ACCEPTANCE_BAND.1) {
        warn!(
            "chain {}: acceptance rate {:.3} outside ({}, {})",
            trace.chain, trace.acceptance_rate, ACCEPTANCE_BAND.0, ACCEPTANCE_BAND.1
        );
    }
    Ok(trace)
}

/// Runs `cfg.n_chains` chains in parallel; chain i uses stream id i.
pub fn run_chains<E: LikelihoodEstimator + ?Sized>(
    template: &SvModelSpec,
    layout: &ParamLayout,
    est: &E,
    cfg: &McmcConfig,
    init: &[f64],
) -> Result<Vec<PosteriorTrace>> {
    cfg.validate(layout.dim())?;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.n_chains)
            .map(|i| {
                s.spawn(move || {
                    let mut rng = RngStream::new(cfg.seed, i as u64);
                    run_pmmh(&mut rng, template, layout, est, cfg, init)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numeric("chain thread panicked".into()))))
            .collect()
    })
}

fn mean(x: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = x.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n.max(1) as f64
}

/// Moment-based starting point. Exp-Lévy: σ = 0.5, τ = 3, η from the excess
/// kurtosis and c from the mean of y²/Δ. OU: τ = 3, c = 1, η from the mean,
/// and λ = 0.05 per unit of Δ.
pub fn default_init(kind: SvKind, data: &ReturnSeries) -> Result<Vec<f64>> {
    check_data(data)?;
    if data.is_empty() {
        return Err(Error::EmptyInput("return series"));
    }
    let dt = mean(data.delta.iter().copied());
    let m2 = data.y.iter().map(|y| y * y).sum::<f64>() / data.delta.iter().sum::<f64>();
    let m2 = if m2 > 0.0 && m2.is_finite() { m2 } else { 1.0 };
    let init = match kind {
        SvKind::ExpLevy => {
            let (sigma, tau) = (0.5, 3.0);
            let e2 = mean(data.y.iter().map(|y| y * y));
            let e4 = mean(data.y.iter().map(|y| y.powi(4)));
            let kurt = if e2 > 0.0 { e4 / (e2 * e2) - 3.0 } else { 0.0 };
            let scale = 3.0 * (1.0 - sigma) * (tau - 1.0) * (tau - 1.0) / ((tau - 2.0) * (tau - sigma));
            let eta = (scale / (dt * kurt.max(1e-3))).clamp(0.05, 50.0);
            let c = (eta * (tau - sigma) / ((tau - 1.0) * m2)).clamp(1e-6, 1e6);
            vec![eta, sigma, tau, c]
        }
        SvKind::OuGamma => vec![m2.clamp(1e-6, 1e6), 1.0, 0.05],
        SvKind::OuGgp => vec![(2.0 * m2).clamp(1e-6, 1e6), 3.0, 1.0, 0.05],
    };
    Ok(init)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::ks_one_sample;
    use crate::ggp::GgpParams;
    use crate::special_fn::regularized_gamma_p;
    use crate::sv::{observation_logdensity, simulate_ou_path, simulate_returns};
    use proptest::prelude::*;
    use rand::RngCore;

    fn layout(kind: SvKind) -> ParamLayout {
        ParamLayout::new(kind, PriorSpec::default()).unwrap()
    }

    fn template(kind: SvKind) -> SvModelSpec {
        let sigma = if kind == SvKind::ExpLevy { 0.5 } else { 0.0 };
        SvModelSpec::new(kind, GgpParams::new(1.0, sigma, 3.0, 1.0).unwrap(), 0.0, 0.0, 0.1).unwrap()
    }

    #[test]
    fn transform_examples() {
        let l = layout(SvKind::ExpLevy);
        let u = l.transform(&[1.0, 0.5, 2.0, 1.0]).unwrap();
        assert_eq!(u, vec![0.0, 0.0, 0.0, 0.0]);
        assert!(l.transform(&[1.0, 1.5, 2.0, 1.0]).is_err());
        assert!(l.transform(&[1.0, 0.5, 1.0, 1.0]).is_err());
        assert!(l.transform(&[0.0, 0.5, 2.0, 1.0]).is_err());
    }

    #[test]
    fn prior_examples() {
        let l = layout(SvKind::ExpLevy);
        assert_eq!(l.log_prior(&[1.0, 1.5, 2.0, 1.0]), f64::NEG_INFINITY);
        assert_eq!(l.log_prior(&[1.0, 0.5, 1.0, 1.0]), f64::NEG_INFINITY);
        let g = PriorSpec::default().eta;
        let want = 0.1 * 0.1f64.ln() - ln_gamma_unchecked(0.1) - 0.1;
        assert!((g.ln_pdf(1.0) - want).abs() < 1e-14);
        // η=1, σ=0.5, τ=2, c=1: Gamma(1,1) at τ−1 = 1 is e^{−1}
        let total = l.log_prior(&[1.0, 0.5, 2.0, 1.0]);
        assert!((total - (2.0 * want - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn wide_sigma_prior_supports_negative_sigma() {
        let l = ParamLayout::new(SvKind::ExpLevy, PriorSpec::wide_sigma()).unwrap();
        let x = [1.0, -0.7, 2.0, 1.0];
        let u = l.transform(&x).unwrap();
        assert!((u[1] - 1.7f64.ln()).abs() < 1e-15);
        assert!(l.log_prior(&x).is_finite());
        assert_eq!(l.log_prior(&[1.0, 1.0, 2.0, 1.0]), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn transform_round_trip(eta in 1e-3f64..1e3, sigma in 1e-6f64..0.999_999, tau in 1.0001f64..50.0, c in 1e-3f64..1e3, wide in any::<bool>()) {
            let prior = if wide { PriorSpec::wide_sigma() } else { PriorSpec::default() };
            let l = ParamLayout::new(SvKind::ExpLevy, prior).unwrap();
            let x = [eta, sigma, tau, c];
            let back = l.inverse(&l.transform(&x).unwrap());
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
            }
        }

        #[test]
        fn transformed_prior_equals_natural_plus_jacobian(eta in 1e-3f64..1e3, sigma in 1e-4f64..0.9999, tau in 1.001f64..50.0, c in 1e-3f64..1e3, lambda in 1e-3f64..10.0, wide in any::<bool>()) {
            let prior = if wide { PriorSpec::wide_sigma() } else { PriorSpec::default() };
            for kind in [SvKind::ExpLevy, SvKind::OuGgp] {
                let l = ParamLayout::new(kind, prior).unwrap();
                let x: Vec<f64> = l.params.iter().map(|p| match p {
                    Param::Eta => eta, Param::Sigma => sigma, Param::Tau => tau, Param::C => c, Param::Lambda => lambda,
                }).collect();
                let u = l.transform(&x).unwrap();
                let a = l.log_prior_transformed(&u);
                let b = l.log_prior(&x) + l.log_jacobian(&x);
                prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }

        #[test]
        fn acceptance_ratio_is_transform_invariant(x0 in prop::array::uniform4(-2.0f64..2.0), x1 in prop::array::uniform4(-2.0f64..2.0), ll0 in -50.0f64..0.0, ll1 in -50.0f64..0.0, s in 0.05f64..1.0) {
            // transformed space: symmetric Gaussian proposal, target with
            // Jacobian. Natural space: the same move seen as an asymmetric
            // proposal density q(x'|x) = N(u'; u, s²)/|dx'/du'|.
            let l = layout(SvKind::ExpLevy);
            let (u0, u1) = (x0.to_vec(), x1.to_vec());
            let (n0, n1) = (l.inverse(&u0), l.inverse(&u1));
            let t = (ll1 + l.log_prior_transformed(&u1)) - (ll0 + l.log_prior_transformed(&u0));
            let lnq = |to: &[f64], from: &[f64], nat_to: &[f64]| -> f64 {
                let g: f64 = to.iter().zip(from).map(|(a, b)| -0.5 * ((a - b) / s).powi(2)).sum();
                g - l.log_jacobian(nat_to)
            };
            let n = (ll1 + l.log_prior(&n1)) - (ll0 + l.log_prior(&n0)) + lnq(&u0, &u1, &n0) - lnq(&u1, &u0, &n1);
            prop_assert!((t - n).abs() < 1e-10, "{t} vs {n}");
        }
    }

    #[test]
    fn exp_levy_single_particle_is_single_draw() {
        let spec = template(SvKind::ExpLevy);
        let data = ReturnSeries::unit_spaced(vec![0.3]).unwrap();
        let mut a = RngStream::new(5, 0);
        let got = estimate_loglik_exp_levy(&mut a, &spec, &data, 1).unwrap();
        let mut b = RngStream::new(5, 0);
        let key = b.next_u64();
        let mut r = RngStream::new(key, 0);
        let v = sample_ggp_increment(&mut r, &spec.marginal, 1.0).unwrap().value;
        assert_eq!(got, observation_logdensity(&spec, 0.3, 1.0, v).unwrap());
    }

    #[test]
    fn exp_levy_variance_scales_with_particles() {
        let spec = template(SvKind::ExpLevy);
        let mut rng = RngStream::new(6, 0);
        let (data, _) = simulate_returns(&mut rng, &spec, &[1.0; 3]).unwrap();
        let var_of = |np: usize, rng: &mut RngStream| {
            let e: Vec<f64> = (0..4000).map(|_| estimate_loglik_exp_levy(rng, &spec, &data, np).unwrap().exp()).collect();
            let m = e.iter().sum::<f64>() / e.len() as f64;
            e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (e.len() - 1) as f64
        };
        let ratio = var_of(100, &mut rng) / var_of(1000, &mut rng);
        assert!((ratio / 10.0 - 1.0).abs() < 0.3, "variance ratio {ratio}");
    }

    #[test]
    fn smc_empty_data_is_zero() {
        let spec = template(SvKind::OuGamma);
        let mut rng = RngStream::new(1, 0);
        let out = estimate_loglik_ou_smc(&mut rng, &spec, &ReturnSeries::default(), 10).unwrap();
        assert_eq!(out.loglik, 0.0);
    }

    #[test]
    fn smc_unbiased_in_fast_reversion_limit() {
        // λΔ = 50: states are nearly independent across steps. Oracle: plain
        // Monte Carlo of E[Π_k N(y_k | V̄_k)] over whole simulated paths.
        let mut spec = template(SvKind::OuGamma);
        spec.lambda = 50.0;
        spec.marginal.eta = 0.2;
        let delta = [1.0; 4];
        let mut rng = RngStream::new(7, 0);
        let (data, _) = simulate_returns(&mut rng, &spec, &delta).unwrap();
        let (mut s, mut s2, n) = (0.0, 0.0, 1_000_000);
        for _ in 0..n {
            let path = simulate_ou_path(&mut rng, &spec, &delta).unwrap();
            let l: f64 = path.iter().zip(&data.y).map(|(st, &y)| observation_logdensity(&spec, y, 1.0, st.vbar).unwrap()).sum();
            s += l.exp();
            s2 += (2.0 * l).exp();
        }
        let truth = s / n as f64;
        let se_truth = ((s2 / n as f64 - truth * truth) / n as f64).sqrt();
        let reps: Vec<f64> = (0..4000).map(|_| estimate_loglik_ou_smc(&mut rng, &spec, &data, 100).unwrap().loglik.exp()).collect();
        let m = reps.iter().sum::<f64>() / reps.len() as f64;
        let se = (reps.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps.len() * (reps.len() - 1)) as f64).sqrt();
        assert!((m - truth).abs() < 3.0 * (se * se + se_truth * se_truth).sqrt(), "{m} vs {truth} (se {se}, {se_truth})");
    }

    #[test]
    fn smc_path_and_filtered_shapes() {
        let spec = template(SvKind::OuGgp);
        let mut rng = RngStream::new(8, 0);
        let (data, _) = simulate_returns(&mut rng, &spec, &[1.0; 20]).unwrap();
        let out = estimate_loglik_ou_smc(&mut rng, &spec, &data, 50).unwrap();
        assert_eq!(out.filtered_vbar.len(), 20);
        assert!(out.filtered_vbar.iter().all(|r| r.len() == 50 && r.iter().all(|&v| v >= 0.0)));
        let est = OuSmcEstimator::new(data, 50).unwrap();
        let e = est.estimate(&mut rng, &spec, true).unwrap();
        assert_eq!(e.latent.unwrap().len(), 20);
    }

    #[test]
    fn systematic_resampling_counts() {
        let mut rng = RngStream::new(9, 0);
        let w = [0.1, 0.0, 0.6, 0.3];
        let mut idx = [0usize; 10];
        systematic_resample(&mut rng, &w, 1.0, &mut idx);
        let count = |j| idx.iter().filter(|&&i| i == j).count();
        assert_eq!(count(1), 0);
        assert_eq!(count(2), 6);
        assert!((1..=2).contains(&count(0)) && (2..=4).contains(&count(3)));
        assert!(idx.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn prior_only_chain_recovers_priors() {
        let kind = SvKind::OuGgp;
        let l = layout(kind);
        let cfg = McmcConfig::new(120_000, 20_000, 1, 1, l.dim(), 3);
        let mut rng = RngStream::new(3, 0);
        let tr = run_pmmh(&mut rng, &template(kind), &l, &ConstantLikelihood, &cfg, &[1.0, 3.0, 1.0, 0.1]).unwrap();
        let p = PriorSpec::default();
        let cdfs: [Box<dyn Fn(f64) -> f64>; 4] = [
            Box::new(move |x| regularized_gamma_p(p.eta.shape, p.eta.rate * x).unwrap()),
            Box::new(move |x| regularized_gamma_p(1.0, x - 1.0).unwrap()),
            Box::new(move |x| regularized_gamma_p(p.c.shape, p.c.rate * x).unwrap()),
            Box::new(move |x| regularized_gamma_p(p.lambda.shape, p.lambda.rate * x).unwrap()),
        ];
        for (j, cdf) in cdfs.iter().enumerate() {
            let ks = ks_one_sample(&tr.column(j), cdf.as_ref()).unwrap();
            assert!(ks < 0.03, "{}: ks {ks}", l.names()[j]);
        }
    }

    #[test]
    fn noisy_conjugate_posterior() {
        let kind = SvKind::OuGamma;
        let l = layout(kind);
        let mut rng = RngStream::new(4, 0);
        let y: Vec<f64> = (0..50).map(|_| 0.5 * rng.normal()).collect();
        let est = NoisyNormalPrecision { y, noise_sd: 0.5 };
        let post = est.posterior(&l.prior.eta);
        let cfg = McmcConfig::new(60_000, 10_000, 1, 1, l.dim(), 4);
        let tr = run_pmmh(&mut rng, &template(kind), &l, &est, &cfg, &[4.0, 1.0, 0.1]).unwrap();
        let ks = ks_one_sample(&tr.column(0), &|x: f64| regularized_gamma_p(post.shape, post.rate * x).unwrap()).unwrap();
        assert!(ks < 0.03, "ks {ks}");
    }

    #[test]
    fn chains_are_reproducible() {
        let kind = SvKind::ExpLevy;
        let l = layout(kind);
        let spec = template(kind);
        let mut rng = RngStream::new(10, 0);
        let (data, _) = simulate_returns(&mut rng, &spec, &[1.0; 30]).unwrap();
        let est = ExpLevyEstimator::new(data, 20).unwrap();
        let mut cfg = McmcConfig::new(200, 100, 20, 2, l.dim(), 10);
        cfg.latent_thin = 10;
        let a = run_chains(&spec, &l, &est, &cfg, &[1.0, 0.5, 3.0, 1.0]).unwrap();
        let b = run_chains(&spec, &l, &est, &cfg, &[1.0, 0.5, 3.0, 1.0]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].natural, a[1].natural);
        assert_eq!(a[0].natural.len(), 100);
        assert_eq!(a[0].latent_vbar.len(), 10);
    }

    #[test]
    fn rejected_config() {
        let l = layout(SvKind::ExpLevy);
        let mut cfg = McmcConfig::new(10, 10, 1, 1, 4, 0);
        assert!(matches!(cfg.validate(4), Err(Error::Config { .. })));
        cfg.n_burnin = 5;
        cfg.proposal_step = vec![0.1; 3];
        assert!(cfg.validate(l.dim()).is_err());
    }
}
