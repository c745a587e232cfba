//! Goodness-of-fit and predictive metrics: Kolmogorov–Smirnov distances,
//! ζ-coverage, Bayes estimators under L2 / ℓ_{1,α} loss, and ranked
//! squared-return bands.

use crate::error::{domain, Error, Result};

/// Reference for a KS statistic: another sample, or an analytic CDF.
pub enum KsTarget<'a> {
    Sample(&'a [f64]),
    Cdf(&'a dyn Fn(f64) -> f64),
}

/// Kolmogorov–Smirnov distance of `sample` to `target`.
pub fn ks_statistic(sample: &[f64], target: KsTarget<'_>) -> Result<f64> {
    match target {
        KsTarget::Sample(b) => ks_two_sample(sample, b),
        KsTarget::Cdf(f) => ks_one_sample(sample, f),
    }
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(domain("ks_statistic", "sample contains NaN"));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// sup_x |F_a(x) − F_b(x)| between two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("ks_two_sample"));
    }
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// sup_x |F_n(x) − F(x)| against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64 + ?Sized>(x: &[f64], cdf: &F) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyInput("ks_one_sample"));
    }
    let x = sorted(x)?;
    let n = x.len() as f64;
    let mut d = 0f64;
    let mut i = 0;
    while i < x.len() {
        // step over ties so the jump is taken once
        let mut j = i;
        while j + 1 < x.len() && x[j + 1] == x[i] {
            j += 1;
        }
        let f = cdf(x[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    Ok(d)
}

/// ζ_k = (1/n_s) Σ_i 1{draw_ik ≥ truth_k} and the KS distance of the ζ_k to
/// Uniform(0,1). `draws` holds one row per posterior iteration.
pub fn zeta_coverage(vbar_true: &[f64], draws: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    if draws.len() < 100 {
        return Err(Error::InsufficientRows { need: 100, got: draws.len() });
    }
    if vbar_true.is_empty() {
        return Err(Error::EmptyInput("zeta_coverage truth"));
    }
    if let Some(row) = draws.iter().find(|r| r.len() != vbar_true.len()) {
        return Err(Error::DimensionMismatch(format!(
            "draw rows have length {} but truth has {}",
            row.len(),
            vbar_true.len()
        )));
    }
    let ns = draws.len() as f64;
    let zeta: Vec<f64> = vbar_true
        .iter()
        .enumerate()
        .map(|(k, &v)| draws.iter().filter(|r| r[k] >= v).count() as f64 / ns)
        .collect();
    let ks = ks_one_sample(&zeta, &|u: f64| u.clamp(0.0, 1.0))?;
    Ok((zeta, ks))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    L2,
    L1Alpha(f64),
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::L1Alpha(a) if !(a > 0.0 && a < 1.0) => {
                Err(domain("LossSpec", format!("alpha must lie in (0,1), got {a}")))
            }
            _ => Ok(()),
        }
    }

    /// L(x, y) for truth x and estimate y.
    pub fn loss(&self, x: f64, y: f64) -> f64 {
        match *self {
            LossSpec::L2 => (x - y) * (x - y),
            LossSpec::L1Alpha(a) => {
                if x >= y {
                    x - y
                } else {
                    (1.0 - a) / a * (y - x)
                }
            }
        }
    }
}

/// Lower empirical quantile x_(⌈αn⌉) of an ascending sample.
pub fn lower_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let k = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Bayes estimator: posterior mean under L2, lower α-quantile under ℓ_{1,α}.
pub fn bayes_estimate(draws: &[f64], loss: LossSpec) -> Result<f64> {
    loss.validate()?;
    if draws.is_empty() {
        return Err(Error::EmptyInput("bayes_estimate"));
    }
    match loss {
        LossSpec::L2 => Ok(draws.iter().sum::<f64>() / draws.len() as f64),
        LossSpec::L1Alpha(a) => Ok(lower_quantile(&sorted(draws)?, a)),
    }
}

/// (1/n) Σ_k L(true_k, estimate_k).
pub fn average_loss(true_vals: &[f64], estimates: &[f64], loss: LossSpec) -> Result<f64> {
    loss.validate()?;
    if true_vals.len() != estimates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true values vs {} estimates",
            true_vals.len(),
            estimates.len()
        )));
    }
    if true_vals.is_empty() {
        return Err(Error::EmptyInput("average_loss"));
    }
    let s: f64 = true_vals.iter().zip(estimates).map(|(&x, &y)| loss.loss(x, y)).sum();
    Ok(s / true_vals.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankBand {
    /// 1 for the largest squared return.
    pub rank: usize,
    pub lower: f64,
    pub upper: f64,
    pub observed: f64,
}

/// For each rank r, the 2.5% and 97.5% quantiles over predictive rows of the
/// r-th largest squared return, next to the observed r-th largest y².
pub fn ranked_squared_return_bands(predictive: &[Vec<f64>], test_y: &[f64]) -> Result<Vec<RankBand>> {
    if predictive.len() < 100 {
        return Err(Error::InsufficientRows { need: 100, got: predictive.len() });
    }
    if test_y.is_empty() {
        return Err(Error::EmptyInput("ranked_squared_return_bands test series"));
    }
    let n = test_y.len();
    if let Some(row) = predictive.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "predictive rows have length {} but test series has {n}",
            row.len()
        )));
    }
    let ranked = |y: &[f64]| -> Vec<f64> {
        let mut s: Vec<f64> = y.iter().map(|v| v * v).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    };
    let rows: Vec<Vec<f64>> = predictive.iter().map(|r| ranked(r)).collect();
    let observed = ranked(test_y);
    let mut col = vec![0.0; rows.len()];
    let mut out = Vec::with_capacity(n);
    for r in 0..n {
        for (c, row) in col.iter_mut().zip(&rows) {
            *c = row[r];
        }
        col.sort_by(f64::total_cmp);
        out.push(RankBand {
            rank: r + 1,
            lower: lower_quantile(&col, 0.025),
            upper: lower_quantile(&col, 0.975),
            observed: observed[r],
        });
    }
    Ok(out)
}

/// Least-squares slope through (x, y) points.
pub fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of log empirical survival against log x over the largest
/// `top_fraction` of |x|.
pub fn tail_survival_slope(x: &[f64], top_fraction: f64) -> Result<f64> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(domain("tail_survival_slope", format!("fraction must lie in (0,1], got {top_fraction}")));
    }
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    let n = a.len();
    let k = (top_fraction * n as f64).floor() as usize;
    if k < 3 {
        return Err(Error::InsufficientRows { need: 3, got: k });
    }
    let pts: Vec<(f64, f64)> = a[..k]
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (v.ln(), ((i + 1) as f64 / n as f64).ln()))
        .collect();
    Ok(ols_slope(&pts))
}
