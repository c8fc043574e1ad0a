//! Sampled-versus-exact comparisons shared by the CLI's oracle report.
//!
//! Error measures for one estimate from `n` exact samples:
//!
//! * score: `‖m̂ − m‖ / √tr(I)`. The sampled score of every domain point is
//!   off by the same vector `m − m̂`, and `√tr(I)` is the RMS norm of the
//!   exact score, so this is the error relative to a typical score.
//! * diagonal information: relative error per coordinate, reported as the
//!   maximum and as the root mean square over coordinates.

use crate::afv::{fisher_stats_estimate, FisherStats};
use crate::error::Result;
use crate::rng::SeededRng;

use super::{grid_2d, GaussianModel, GridEbm};

/// 12×12 grid on `[−1, 1]²`, cubic features, `θ ~ N(0, 0.5²)` from `seed`.
pub fn standard_grid_ebm(seed: u64) -> Result<GridEbm> {
    let mut rng = SeededRng::from_seed(seed);
    let theta = (0..9).map(|_| 0.5 * rng.normal()).collect();
    GridEbm::new(grid_2d(12, -1.0, 1.0), 3, theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleErrors {
    pub score_rel: f64,
    pub diag_rel_max: f64,
    pub diag_rel_rms: f64,
}

fn errors_of(stats: &FisherStats, exact_mean: &[f64], exact_diag: &[f64]) -> OracleErrors {
    let trace: f64 = exact_diag.iter().sum();
    let dm: f64 = stats
        .mean_grad
        .iter()
        .zip(exact_mean)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rel: Vec<f64> = stats
        .diag_info
        .iter()
        .zip(exact_diag)
        .map(|(a, b)| ((a - b) / b).abs())
        .collect();
    OracleErrors {
        score_rel: dm / trace.sqrt(),
        diag_rel_max: rel.iter().copied().fold(0.0, f64::max),
        diag_rel_rms: (rel.iter().map(|r| r * r).sum::<f64>() / rel.len() as f64).sqrt(),
    }
}

/// Errors of one estimate from `n` exact samples drawn with `seed`.
pub fn grid_oracle_errors(ebm: &GridEbm, n: usize, seed: u64) -> Result<OracleErrors> {
    let stats = fisher_stats_estimate(ebm, ebm, n, 0.0, seed)?;
    Ok(errors_of(
        &stats,
        &ebm.mean_features(),
        &ebm.fisher_information_diag_exact(),
    ))
}

/// For each `n`, the root mean square over `replicates` estimates of
/// `score_rel` and `diag_rel_rms` (the `diag_rel_max` field holds the
/// largest single-estimate maximum).
pub fn grid_convergence_check(
    ebm: &GridEbm,
    ns: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<(usize, OracleErrors)>> {
    let mut seeds = SeededRng::from_seed(seed);
    let rep_seeds: Vec<u64> = (0..replicates).map(|_| seeds.next_u64()).collect();
    ns.iter()
        .map(|&n| {
            let mut s2 = 0.0;
            let mut d2 = 0.0;
            let mut dmax: f64 = 0.0;
            for &s in &rep_seeds {
                let e = grid_oracle_errors(ebm, n, s)?;
                s2 += e.score_rel * e.score_rel;
                d2 += e.diag_rel_rms * e.diag_rel_rms;
                dmax = dmax.max(e.diag_rel_max);
            }
            let r = replicates as f64;
            Ok((
                n,
                OracleErrors {
                    score_rel: (s2 / r).sqrt(),
                    diag_rel_max: dmax,
                    diag_rel_rms: (d2 / r).sqrt(),
                },
            ))
        })
        .collect()
}

/// Relative errors of the sampled `(∂μ, ∂σ)` information of `N(0, 1)`.
pub fn gaussian_info_check(n: usize, seed: u64) -> Result<[f64; 2]> {
    let g = GaussianModel::new(0.0, 1.0)?;
    let stats = fisher_stats_estimate(&g, &g, n, 0.0, seed)?;
    let exact = g.fisher_information_exact();
    Ok([
        (stats.diag_info[0] - exact[0]).abs() / exact[0],
        (stats.diag_info[1] - exact[1]).abs() / exact[1],
    ])
}

/// One line of the oracle report.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        OracleCheck {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }
}

/// The full report: 100k-sample agreement on the standard grid and the
/// Gaussian, plus the per-decade error ratios over 1k, 10k and 100k
/// samples (`replicates` estimates per size; each ratio should be near
/// `√10 ≈ 3.16`).
pub fn oracle_suite(replicates: usize, seed: u64) -> Result<Vec<OracleCheck>> {
    let ebm = standard_grid_ebm(seed)?;
    let mut out = Vec::new();
    let single = grid_oracle_errors(&ebm, 100_000, seed)?;
    out.push(OracleCheck::at_most(
        "grid score relative error @100k",
        single.score_rel,
        0.05,
    ));
    out.push(OracleCheck::at_most(
        "grid diag info max relative error @100k",
        single.diag_rel_max,
        0.05,
    ));
    let conv = grid_convergence_check(&ebm, &[1_000, 10_000, 100_000], replicates, seed)?;
    for w in conv.windows(2) {
        let (n0, e0) = w[0];
        let (n1, e1) = w[1];
        for (what, a, b) in [
            ("score", e0.score_rel, e1.score_rel),
            ("diag info", e0.diag_rel_rms, e1.diag_rel_rms),
        ] {
            let ratio = a / b;
            out.push(OracleCheck {
                name: format!("grid {what} error ratio {n0}->{n1}"),
                value: ratio,
                threshold: 2.5,
                passed: (2.5..=4.0).contains(&ratio),
            });
        }
    }
    let g = gaussian_info_check(100_000, seed)?;
    out.push(OracleCheck::at_most(
        "gaussian info d/dmu relative error @100k",
        g[0],
        0.03,
    ));
    out.push(OracleCheck::at_most(
        "gaussian info d/dsigma relative error @100k",
        g[1],
        0.03,
    ));
    let model = GaussianModel::new(0.0, 1.0)?;
    let (a, b) = (model.fisher_score_exact(1.0), model.fisher_score_exact(-1.0));
    out.push(OracleCheck {
        name: "gaussian d/dmu score at mu+1 plus mu-1".into(),
        value: (a[0] + b[0]).abs(),
        threshold: 0.0,
        passed: a[0] == 1.0 && b[0] == -1.0,
    });
    Ok(out)
}
