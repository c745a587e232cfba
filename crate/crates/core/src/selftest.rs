//! Quick invariant checks run by `ggp-levy selftest`. Each finishes in well
//! under a second.

use crate::cli::Check;
use crate::dists::{sample_gamma, sample_tilted_stable, TiltedStableParams};
use crate::error::Result;
use crate::ggp::{cumulant, laplace_exponent, sample_ggp_increment, GgpParams};
use crate::inference::{estimate_loglik_ou_smc, ParamLayout, PriorSpec};
use crate::rng::RngStream;
use crate::special_fn::{gamma_recurrence_residual, log_gamma};
use crate::sv::{simulate_returns, SvKind, SvModelSpec};

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn run(seed: u64) -> Vec<Check> {
    let mut rng = RngStream::new(seed, 0);
    vec![
        check("ln_gamma(1/2) = ln sqrt(pi)", || {
            let err = (log_gamma(0.5)? - 0.5 * std::f64::consts::PI.ln()).abs();
            Ok((err < 1e-13, format!("abs error {err:e}")))
        }),
        check("incomplete gamma recurrence", || {
            let r = gamma_recurrence_residual(0.3, 2.0)?;
            Ok((r.abs() < 1e-12, format!("residual {r:e}")))
        }),
        check("gamma sampler mean", || {
            let x: Vec<f64> = (0..50_000).map(|_| sample_gamma(&mut rng, 0.4, 2.0)).collect::<Result<_>>()?;
            let (m, se) = mean_se(&x);
            Ok(((m - 0.2).abs() < 5.0 * se, format!("mean {m} vs 0.2, se {se:e}")))
        }),
        check("tilted stable Laplace transform", || {
            let p = TiltedStableParams::new(1.5, 0.5, 2.0)?;
            let th = 1.0;
            let x: Vec<f64> = (0..50_000)
                .map(|_| sample_tilted_stable(&mut rng, &p).map(|y| (-th * y).exp()))
                .collect::<Result<_>>()?;
            let (m, se) = mean_se(&x);
            let want = (-p.laplace_exponent(th)).exp();
            Ok(((m - want).abs() < 5.0 * se, format!("E[exp(-Y)] {m} vs {want}")))
        }),
        check("GGP increment mean and Laplace transform", || {
            let p = GgpParams::new(1.0, 0.3, 3.5, 1.5)?;
            let z: Vec<f64> = (0..50_000)
                .map(|_| sample_ggp_increment(&mut rng, &p, 0.7).map(|s| s.value))
                .collect::<Result<_>>()?;
            let (m, se) = mean_se(&z);
            let want = cumulant(&p, 0.7, 1)?;
            let lt: Vec<f64> = z.iter().map(|v| (-v).exp()).collect();
            let (l, lse) = mean_se(&lt);
            let lwant = (-0.7 * laplace_exponent(&p, 1.0)?).exp();
            let ok = (m - want).abs() < 5.0 * se && (l - lwant).abs() < 5.0 * lse;
            Ok((ok, format!("mean {m} vs {want}; E[exp(-Z)] {l} vs {lwant}")))
        }),
        check("parameter transform round trip", || {
            let layout = ParamLayout::new(SvKind::OuGgp, PriorSpec::default())?;
            let x = [2.0, 3.0, 1.5, 0.02];
            let back = layout.inverse(&layout.transform(&x)?);
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs() / a).fold(0.0, f64::max);
            Ok((err < 1e-12, format!("max rel error {err:e}")))
        }),
        check("particle filter log-likelihood is finite", || {
            let spec = SvModelSpec::new(SvKind::OuGamma, GgpParams::new(2.0, 0.0, 3.0, 4.0)?, 0.0, 0.0, 0.1)?;
            let (data, _) = simulate_returns(&mut rng, &spec, &[1.0; 50])?;
            let out = estimate_loglik_ou_smc(&mut rng, &spec, &data, 64)?;
            Ok((out.loglik.is_finite(), format!("loglik {}", out.loglik)))
        }),
    ]
}
