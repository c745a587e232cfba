//! Stochastic-volatility models for log-returns: the exponential-Lévy model,
//! where integrated volatilities are independent GGP increments, and the
//! Ornstein–Uhlenbeck model with gamma or GGP(σ = 0) stationary marginal.

use crate::dists::{pareto_from_uniform, sample_gamma, sample_poisson};
use crate::error::{check_positive, domain, Error, Result};
use crate::ggp::{sample_ggp_increment, GgpParams};
use crate::rng::RngStream;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SvKind {
    ExpLevy,
    OuGamma,
    OuGgp,
}

impl SvKind {
    pub fn is_ou(self) -> bool {
        !matches!(self, SvKind::ExpLevy)
    }

    pub fn name(self) -> &'static str {
        match self {
            SvKind::ExpLevy => "exp_levy",
            SvKind::OuGamma => "ou_gamma",
            SvKind::OuGgp => "ou_ggp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exp_levy" => Some(SvKind::ExpLevy),
            "ou_gamma" => Some(SvKind::OuGamma),
            "ou_ggp" => Some(SvKind::OuGgp),
            _ => None,
        }
    }
}

/// Model description. `OuGamma` reads only `marginal.eta` and `marginal.c`;
/// `lambda` is ignored by `ExpLevy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvModelSpec {
    pub kind: SvKind,
    pub marginal: GgpParams,
    pub mu0: f64,
    pub mu1: f64,
    pub lambda: f64,
}

impl SvModelSpec {
    pub fn new(kind: SvKind, marginal: GgpParams, mu0: f64, mu1: f64, lambda: f64) -> Result<Self> {
        let s = Self {
            kind,
            marginal,
            mu0,
            mu1,
            lambda,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.marginal.validate()?;
        if !self.mu0.is_finite() || !self.mu1.is_finite() {
            return Err(domain("SvModelSpec", "mu0 and mu1 must be finite"));
        }
        if self.kind == SvKind::OuGgp && self.marginal.sigma != 0.0 {
            return Err(domain("SvModelSpec", "ou_ggp requires sigma = 0"));
        }
        if self.kind.is_ou() {
            check_positive("SvModelSpec", "lambda", self.lambda)?;
        }
        Ok(())
    }

    /// Mean of the return over an interval of length `delta` with
    /// integrated volatility `vbar`.
    #[inline]
    pub fn return_mean(&self, delta: f64, vbar: f64) -> f64 {
        self.mu0 * delta + self.mu1 * vbar
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReturnSeries {
    pub y: Vec<f64>,
    pub delta: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(y: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        let s = Self { y, delta };
        s.validate()?;
        Ok(s)
    }

    /// Unit-spaced series.
    pub fn unit_spaced(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(y, vec![1.0; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.len() != self.delta.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} returns but {} intervals",
                self.y.len(),
                self.delta.len()
            )));
        }
        if let Some((i, d)) = self.delta.iter().enumerate().find(|(_, d)| !(d.is_finite() && **d > 0.0)) {
            return Err(domain("ReturnSeries", format!("delta[{i}] = {d} must be finite and > 0")));
        }
        if let Some(i) = self.y.iter().position(|y| !y.is_finite()) {
            return Err(domain("ReturnSeries", format!("y[{i}] is not finite")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// OU filter state after an observation interval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OuState {
    /// Instantaneous volatility V_{t_k}.
    pub v: f64,
    /// Cumulated driver Z_{λ t_k}.
    pub z: f64,
    /// Integrated volatility over the last interval.
    pub vbar: f64,
}

fn require_kind(func: &'static str, spec: &SvModelSpec, ou: bool) -> Result<()> {
    spec.validate()?;
    if spec.kind.is_ou() != ou {
        return Err(Error::Regime(format!("{func} does not apply to {}", spec.kind.name())));
    }
    Ok(())
}

/// Independent integrated volatilities V̄_k ~ GGP(Δ_k η, σ, τ, c).
pub fn sample_exp_levy_volatilities(rng: &mut RngStream, spec: &SvModelSpec, delta: &[f64]) -> Result<Vec<f64>> {
    require_kind("sample_exp_levy_volatilities", spec, false)?;
    delta
        .iter()
        .map(|&d| sample_ggp_increment(rng, &spec.marginal, d).map(|s| s.value))
        .collect()
}

/// Exact state noise (ε_v, ε_z) over an interval of length `delta_k`.
pub fn sample_ou_noise(rng: &mut RngStream, spec: &SvModelSpec, delta_k: f64) -> Result<(f64, f64)> {
    require_kind("sample_ou_noise", spec, true)?;
    check_positive("sample_ou_noise", "delta_k", delta_k)?;
    ou_noise_unchecked(rng, spec, delta_k, spec.marginal.eta * spec.lambda * delta_k)
}

/// `sample_ou_noise` for a validated spec, with the Poisson rate ηλΔ supplied.
#[inline]
pub(crate) fn ou_noise_unchecked(rng: &mut RngStream, spec: &SvModelSpec, delta_k: f64, rate: f64) -> Result<(f64, f64)> {
    let n = sample_poisson(rng, rate)?;
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    ou_noise_given_count(rng, spec, delta_k, n)
}

/// State noise conditional on the number of driver jumps in the interval.
pub fn ou_noise_given_count(rng: &mut RngStream, spec: &SvModelSpec, delta_k: f64, n: u64) -> Result<(f64, f64)> {
    let (lambda, c, tau) = (spec.lambda, spec.marginal.c, spec.marginal.tau);
    let mut eps_v = 0.0;
    let mut eps_z = 0.0;
    for _ in 0..n {
        let mut w = rng.exp1() / c;
        if spec.kind == SvKind::OuGgp {
            w *= pareto_from_uniform(rng.uniform(), tau, 1.0);
        }
        let theta = delta_k * rng.uniform();
        eps_v += (lambda * (theta - delta_k)).exp() * w;
        eps_z += w;
    }
    Ok((eps_v, eps_z))
}

/// Draw of V_0 from the stationary marginal.
pub fn sample_ou_stationary(rng: &mut RngStream, spec: &SvModelSpec) -> Result<f64> {
    require_kind("sample_ou_stationary", spec, true)?;
    match spec.kind {
        SvKind::OuGamma => sample_gamma(rng, spec.marginal.eta, spec.marginal.c),
        _ => Ok(sample_ggp_increment(rng, &spec.marginal, 1.0)?.value),
    }
}

/// Decay factors of one interval: e^{−λΔ} and 1 − e^{−λΔ}.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OuDecay {
    pub lambda: f64,
    pub delta: f64,
    decay: f64,
    gain: f64,
}

impl OuDecay {
    pub fn new(lambda: f64, delta: f64) -> Self {
        Self {
            lambda,
            delta,
            decay: (-lambda * delta).exp(),
            gain: -(-lambda * delta).exp_m1(),
        }
    }

    /// (V_k, V̄_k) from V_{k−1} and the noise draw.
    #[inline]
    pub fn step(&self, v_prev: f64, eps: (f64, f64)) -> (f64, f64) {
        let (eps_v, eps_z) = eps;
        let v = self.decay * v_prev + eps_v;
        let raw = (eps_z - eps_v + self.gain * v_prev) / self.lambda;
        debug_assert!(
            raw >= -1e-12 * (eps_z + v_prev) / self.lambda,
            "negative integrated volatility {raw}"
        );
        (v, raw.max(0.0))
    }
}

/// Advances the state over one interval given the noise draw.
pub fn ou_step(prev: &OuState, lambda: f64, delta_k: f64, eps: (f64, f64)) -> OuState {
    let (v, vbar) = OuDecay::new(lambda, delta_k).step(prev.v, eps);
    OuState { v, z: prev.z + eps.1, vbar }
}

/// OU trajectory started from Z_0 = 0, V_0 drawn from the stationary law.
pub fn simulate_ou_path(rng: &mut RngStream, spec: &SvModelSpec, delta: &[f64]) -> Result<Vec<OuState>> {
    require_kind("simulate_ou_path", spec, true)?;
    let mut state = OuState {
        v: sample_ou_stationary(rng, spec)?,
        z: 0.0,
        vbar: 0.0,
    };
    let mut out = Vec::with_capacity(delta.len());
    for &d in delta {
        let eps = sample_ou_noise(rng, spec, d)?;
        state = ou_step(&state, spec.lambda, d, eps);
        out.push(state);
    }
    Ok(out)
}

/// ln N(y; μ₀Δ + μ₁v̄, v̄). At v̄ = 0 the law is a point mass: −∞ off the
/// mean and 0 on it.
#[inline]
pub fn observation_logdensity(spec: &SvModelSpec, y_k: f64, delta_k: f64, vbar_k: f64) -> Result<f64> {
    if !(vbar_k >= 0.0) {
        return Err(domain("observation_logdensity", format!("vbar must be >= 0, got {vbar_k}")));
    }
    Ok(normal_logdensity(y_k - spec.return_mean(delta_k, vbar_k), vbar_k))
}

/// ln N(r; 0, var) with the point-mass convention at var = 0.
#[inline]
pub(crate) fn normal_logdensity(r: f64, var: f64) -> f64 {
    if var == 0.0 {
        return if r == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -0.5 * (LN_2PI + var.ln() + r * r / var)
}

/// Draws y_k = μ₀Δ_k + μ₁v̄_k + √v̄_k·ε_k given integrated volatilities.
pub fn returns_given_vbar(rng: &mut RngStream, spec: &SvModelSpec, delta: &[f64], vbar: &[f64]) -> Result<ReturnSeries> {
    if delta.len() != vbar.len() {
        return Err(Error::DimensionMismatch(format!("{} intervals but {} volatilities", delta.len(), vbar.len())));
    }
    let y = delta
        .iter()
        .zip(vbar)
        .map(|(&d, &v)| spec.return_mean(d, v) + v.sqrt() * rng.normal())
        .collect();
    ReturnSeries::new(y, delta.to_vec())
}

/// Simulates a return series and the integrated volatility path behind it.
pub fn simulate_returns(rng: &mut RngStream, spec: &SvModelSpec, delta: &[f64]) -> Result<(ReturnSeries, Vec<f64>)> {
    spec.validate()?;
    let vbar = if spec.kind.is_ou() {
        simulate_ou_path(rng, spec, delta)?.iter().map(|s| s.vbar).collect()
    } else {
        sample_exp_levy_volatilities(rng, spec, delta)?
    };
    let series = returns_given_vbar(rng, spec, delta, &vbar)?;
    Ok((series, vbar))
}
