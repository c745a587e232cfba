//! Primitive random variates: gamma, beta, Pareto, Poisson, and the
//! exponentially tilted stable (generalised gamma) law.

use crate::error::{check_positive, domain, Error, Result};
use crate::rng::RngStream;
use crate::special_fn::ln_gamma_unchecked;

/// Cap on rejection-loop iterations for every sampler in this module.
pub const MAX_REJECTIONS: usize = 1_000_000;

/// |σ| below this is treated as σ = 0.
pub const SIGMA_ZERO_EPS: f64 = 1e-10;

const PI: f64 = std::f64::consts::PI;

/// Tilt strength λ^σ up to which split rejection beats double rejection.
const SPLIT_MAX_TILT: f64 = 4.0;

/// Gamma(shape, rate) draw, mean shape/rate.
///
/// Marsaglia–Tsang squeeze for shape ≥ 1; for shape < 1 a Gamma(shape+1)
/// draw is multiplied by U^{1/shape}.
pub fn sample_gamma(rng: &mut RngStream, shape: f64, rate: f64) -> Result<f64> {
    check_positive("sample_gamma", "shape", shape)?;
    check_positive("sample_gamma", "rate", rate)?;
    if shape < 1.0 {
        let g = marsaglia_tsang(rng, shape + 1.0)?;
        let u = rng.uniform();
        return Ok(g * (u.ln() / shape).exp() / rate);
    }
    Ok(marsaglia_tsang(rng, shape)? / rate)
}

fn marsaglia_tsang(rng: &mut RngStream, shape: f64) -> Result<f64> {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    for _ in 0..MAX_REJECTIONS {
        let x = rng.normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return Ok(d * v);
        }
    }
    Err(Error::Convergence { func: "sample_gamma", iters: MAX_REJECTIONS })
}

/// Inverse-CDF Pareto transform: `scale·u^{−1/tail}`.
#[inline]
pub fn pareto_from_uniform(u: f64, tail: f64, scale: f64) -> f64 {
    scale * (-u.ln() / tail).exp()
}

/// Pareto(tail, scale) draw supported on [scale, ∞).
pub fn sample_pareto(rng: &mut RngStream, tail: f64, scale: f64) -> Result<f64> {
    check_positive("sample_pareto", "tail", tail)?;
    check_positive("sample_pareto", "scale", scale)?;
    Ok(pareto_from_uniform(rng.uniform(), tail, scale))
}

/// Beta(a, b) draw as a gamma ratio.
pub fn sample_beta(rng: &mut RngStream, a: f64, b: f64) -> Result<f64> {
    check_positive("sample_beta", "a", a)?;
    check_positive("sample_beta", "b", b)?;
    let x = sample_gamma(rng, a, 1.0)?;
    let y = sample_gamma(rng, b, 1.0)?;
    if x + y == 0.0 {
        // both underflowed; pick the side with more mass
        return Ok(if a >= b { 1.0 } else { 0.0 });
    }
    Ok(x / (x + y))
}

/// Poisson(rate) draw. Sequential inversion below rate 12, Hörmann's
/// transformed rejection (PTRS) above.
pub fn sample_poisson(rng: &mut RngStream, rate: f64) -> Result<u64> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(domain("sample_poisson", format!("rate must be finite and >= 0, got {rate}")));
    }
    if rate == 0.0 {
        return Ok(0);
    }
    if rate < 12.0 {
        return Ok(poisson_inversion(rng, rate));
    }
    poisson_ptrs(rng, rate)
}

fn poisson_inversion(rng: &mut RngStream, rate: f64) -> u64 {
    let u = rng.uniform();
    let mut p = (-rate).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf {
        k += 1;
        p *= rate / k as f64;
        cdf += p;
        if p < f64::MIN_POSITIVE * 1e10 && k as f64 > rate {
            break;
        }
    }
    k
}

fn poisson_ptrs(rng: &mut RngStream, rate: f64) -> Result<u64> {
    let slam = rate.sqrt();
    let loglam = rate.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    for _ in 0..MAX_REJECTIONS {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return Ok(k as u64);
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -rate + k * loglam - ln_gamma_unchecked(k + 1.0);
        if lhs <= rhs {
            return Ok(k as u64);
        }
    }
    Err(Error::Convergence { func: "sample_poisson", iters: MAX_REJECTIONS })
}

/// Parameters of the generalised gamma law GG(mass, σ, c) with
/// E[e^{−ϑY}] = exp(−(mass/σ)[(ϑ+c)^σ − c^σ]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedStableParams {
    pub mass: f64,
    pub sigma: f64,
    pub tilt: f64,
}

impl TiltedStableParams {
    pub fn new(mass: f64, sigma: f64, tilt: f64) -> Result<Self> {
        check_positive("TiltedStableParams", "mass", mass)?;
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(domain("TiltedStableParams", format!("sigma must lie in (0,1), got {sigma}")));
        }
        if !(tilt >= 0.0) || !tilt.is_finite() {
            return Err(domain("TiltedStableParams", format!("tilt must be finite and >= 0, got {tilt}")));
        }
        Ok(Self { mass, sigma, tilt })
    }

    /// Laplace exponent of the law.
    pub fn laplace_exponent(&self, theta: f64) -> f64 {
        let s = self.sigma;
        self.mass / s * ((theta + self.tilt).powf(s) - self.tilt.powf(s))
    }
}

/// Positive σ-stable draw with E[e^{−ϑS}] = e^{−ϑ^σ} (Kanter's representation).
pub fn sample_positive_stable(rng: &mut RngStream, sigma: f64) -> f64 {
    let u = PI * rng.uniform();
    let e = rng.exp1();
    let b = (1.0 - sigma) / sigma;
    let ln_s = (sigma * u).sin().ln() - u.sin().ln() / sigma + b * (((1.0 - sigma) * u).sin() / e).ln();
    ln_s.exp()
}

/// Exact draw from GG(mass, σ, c), c > 0.
///
/// With V0 = mass/σ the law is V0^{1/σ}·S tilted by e^{−cY}; the tilt
/// strength is λ^σ = V0·c^σ. For λ^σ ≤ 4 the draw is a sum of ⌈λ^σ⌉
/// independent pieces (infinite divisibility), each by plain rejection from
/// the stable law with acceptance rate at least e^{−1}. Stronger tilts use
/// Devroye's double rejection, whose cost is bounded in λ.
pub fn sample_tilted_stable(rng: &mut RngStream, p: &TiltedStableParams) -> Result<f64> {
    let p = TiltedStableParams::new(p.mass, p.sigma, p.tilt)?;
    if p.tilt <= 0.0 {
        return Err(domain("sample_tilted_stable", "tilt must be > 0"));
    }
    let v0 = p.mass / p.sigma;
    let lam_alpha = v0 * p.tilt.powf(p.sigma);
    if lam_alpha <= SPLIT_MAX_TILT {
        return tilted_stable_split(rng, p.sigma, v0, p.tilt, lam_alpha.ceil().max(1.0) as u32);
    }
    let y = devroye_tilted_stable(rng, p.sigma, lam_alpha)?;
    Ok(y / p.tilt)
}

/// Sum of `pieces` independent naive draws, each carrying mass v0/pieces.
pub(crate) fn tilted_stable_split(rng: &mut RngStream, sigma: f64, v0: f64, tilt: f64, pieces: u32) -> Result<f64> {
    let v = v0 / pieces as f64;
    let mut y = 0.0;
    for _ in 0..pieces {
        y += tilted_stable_naive(rng, sigma, v, tilt)?;
    }
    Ok(y)
}

/// Rejection from the untilted stable law; exact for any tilt.
pub(crate) fn tilted_stable_naive(rng: &mut RngStream, sigma: f64, v0: f64, tilt: f64) -> Result<f64> {
    let scale = v0.powf(1.0 / sigma);
    for _ in 0..MAX_REJECTIONS {
        let y = scale * sample_positive_stable(rng, sigma);
        if tilt * y <= rng.exp1() {
            return Ok(y);
        }
    }
    Err(Error::Convergence { func: "sample_tilted_stable", iters: MAX_REJECTIONS })
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Zolotarev's A(u) ^ (1−α), written with sinc for stability near 0.
#[inline]
fn zolotarev_a(u: f64, alpha: f64) -> f64 {
    let ia = 1.0 - alpha;
    (ia * sinc(ia * u)).powf(ia) * (alpha * sinc(alpha * u)).powf(alpha) / sinc(u)
}

/// B(u)/B(0).
#[inline]
fn b_ratio(u: f64, alpha: f64) -> f64 {
    let ia = 1.0 - alpha;
    sinc(u) / (sinc(alpha * u).powf(alpha) * sinc(ia * u).powf(ia))
}

/// Devroye (2009) double rejection for the tilted stable law with Laplace
/// transform exp(λ^α − (λ+ϑ)^α), returned on the unit-tilt scale. Callers
/// divide by the tilt.
fn devroye_tilted_stable(rng: &mut RngStream, alpha: f64, lam_alpha: f64) -> Result<f64> {
    let gamma = lam_alpha * alpha * (1.0 - alpha);
    let sgamma = gamma.sqrt();
    let c1 = (PI / 2.0).sqrt();
    let c2 = 2.0 + c1;
    let c3 = c2 * sgamma;
    let xi = (1.0 + std::f64::consts::SQRT_2 * c3) / PI;
    let psi = c3 * (-gamma * PI * PI / 8.0).exp() / PI.sqrt();
    let w1 = c1 * xi / sgamma;
    let w2 = 2.0 * PI.sqrt() * psi;
    let w3 = xi * PI;
    let b = (1.0 - alpha) / alpha;
    let ln_lambda = lam_alpha.ln() / alpha;

    let mut iters = 0usize;
    loop {
        // draw U from the dominating mixture and accept it against its
        // marginal bound
        let (u, z) = loop {
            iters += 1;
            if iters > MAX_REJECTIONS {
                return Err(Error::Convergence { func: "sample_tilted_stable", iters: MAX_REJECTIONS });
            }
            let v = rng.uniform();
            let w_ = rng.uniform();
            let u = if gamma >= 1.0 {
                if v < w1 / (w1 + w2) {
                    rng.normal().abs() / sgamma
                } else {
                    PI * (1.0 - w_ * w_)
                }
            } else if v < w3 / (w3 + w2) {
                PI * w_
            } else {
                PI * (1.0 - w_ * w_)
            };
            if u >= PI {
                continue;
            }
            let w = rng.uniform();
            let zeta = b_ratio(u, alpha).sqrt();
            let z = 1.0 / (1.0 - (1.0 + alpha * zeta / sgamma).powf(-1.0 / alpha));
            let mut rho = 0.0;
            if gamma >= 1.0 {
                rho += xi * (-gamma * u * u / 2.0).exp();
            } else {
                rho += xi;
            }
            if u > 0.0 {
                rho += psi / (PI - u).sqrt();
            }
            rho *= PI * (-lam_alpha * (1.0 - 1.0 / (zeta * zeta))).exp() / ((1.0 + c1) * sgamma / zeta + z);
            if w * rho <= 1.0 {
                break (u, z);
            }
        };

        let a = zolotarev_a(u, alpha).powf(1.0 / (1.0 - alpha));
        let m = (b / a).powf(alpha) * lam_alpha;
        let delta = (m * alpha / a).sqrt();
        let a1 = delta * c1;
        let a3 = z / a;
        let s = a1 + delta + a3;
        let vp = rng.uniform();
        let mut n_ = 0.0;
        let mut e_ = 0.0;
        let x = if vp < a1 / s {
            n_ = rng.normal();
            m - delta * n_.abs()
        } else if vp < (a1 + delta) / s {
            m + delta * rng.uniform()
        } else {
            e_ = rng.exp1();
            m + delta + e_ * a3
        };
        if x < 0.0 {
            continue;
        }
        let e = -rng.uniform().ln();
        let mut cc = a * (x - m) + (ln_lambda - b * m.ln()).exp() * ((m / x).powf(b) - 1.0);
        if x < m {
            cc -= n_ * n_ / 2.0;
        } else if x > m + delta {
            cc -= e_;
        }
        if cc <= e {
            return Ok((lam_alpha.ln() / alpha - b * x.ln()).exp());
        }
        iters += 1;
    }
}

/// Exact draw from GG(eta_t, σ, c), with Laplace exponent
/// (eta_t/σ)[(ϑ+c)^σ − c^σ] for σ ≠ 0 and eta_t·log(1+ϑ/c) at σ = 0.
pub fn sample_gg_increment(rng: &mut RngStream, eta_t: f64, sigma: f64, c: f64) -> Result<f64> {
    check_positive("sample_gg_increment", "eta_t", eta_t)?;
    check_positive("sample_gg_increment", "c", c)?;
    if !(sigma < 1.0) {
        return Err(domain("sample_gg_increment", format!("sigma must be < 1, got {sigma}")));
    }
    if sigma.abs() < SIGMA_ZERO_EPS {
        return sample_gamma(rng, eta_t, c);
    }
    if sigma < 0.0 {
        let k = sample_poisson(rng, eta_t * c.powf(sigma) / -sigma)?;
        let mut y = 0.0;
        for _ in 0..k {
            y += sample_gamma(rng, -sigma, c)?;
        }
        return Ok(y);
    }
    sample_tilted_stable(rng, &TiltedStableParams { mass: eta_t, sigma, tilt: c })
}
