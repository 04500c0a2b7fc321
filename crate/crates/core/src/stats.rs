//! Estimators over replica tables: empirical characteristic functions, law-of-large-numbers
//! means with cluster bootstrap intervals, and occupation-variance scaling fits.
//!
//! Samples carry a cluster label (the run they came from); several tracers in one run are
//! correlated, so standard errors and bootstrap resamples work on whole clusters.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linear_fit;
use crate::rng::substream;

pub const MIN_BOOTSTRAP: usize = 200;

/// Standard error of the pooled mean of `x` with cluster labels `c`.
fn clustered_se(x: &[f64], c: &[usize]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let groups = c.iter().copied().max().map_or(0, |g| g + 1);
    let mut tot = vec![0.0; groups];
    let mut used = vec![false; groups];
    for (v, g) in x.iter().zip(c) {
        tot[*g] += v - m;
        used[*g] = true;
    }
    let g = used.iter().filter(|u| **u).count() as f64;
    if g < 2.0 {
        return f64::NAN;
    }
    let ss: f64 = tot.iter().map(|t| t * t).sum();
    (ss * g / (g - 1.0)).sqrt() / n
}

/// Cluster labels `0..n`, i.e. independent samples.
pub fn singletons(n: usize) -> Vec<usize> {
    (0..n).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EcfTable {
    pub betas: Vec<f64>,
    pub mean: Vec<Complex64>,
    pub se_re: Vec<f64>,
    pub se_im: Vec<f64>,
    pub samples: usize,
}

/// Mean of `e^{i beta x.a}` over samples with clustered componentwise standard errors.
pub fn ecf_clustered(samples: &[Vec<f64>], clusters: &[usize], a: &[f64], betas: &[f64]) -> Result<EcfTable> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples for the characteristic function".into()));
    }
    if clusters.len() != samples.len() {
        return Err(Error::contract("one cluster label per sample"));
    }
    let proj: Vec<f64> = samples
        .iter()
        .map(|x| x.iter().zip(a).map(|(u, v)| u * v).sum())
        .collect();
    let n = proj.len() as f64;
    let mut mean = Vec::new();
    let mut se_re = Vec::new();
    let mut se_im = Vec::new();
    for &b in betas {
        let c: Vec<f64> = proj.iter().map(|p| (b * p).cos()).collect();
        let s: Vec<f64> = proj.iter().map(|p| (b * p).sin()).collect();
        mean.push(Complex64::new(c.iter().sum::<f64>() / n, s.iter().sum::<f64>() / n));
        if b == 0.0 {
            se_re.push(0.0);
            se_im.push(0.0);
        } else {
            se_re.push(clustered_se(&c, clusters));
            se_im.push(clustered_se(&s, clusters));
        }
    }
    Ok(EcfTable {
        betas: betas.to_vec(),
        mean,
        se_re,
        se_im,
        samples: samples.len(),
    })
}

/// Empirical characteristic function of independent samples.
pub fn ecf(samples: &[Vec<f64>], a: &[f64], betas: &[f64]) -> Result<EcfTable> {
    ecf_clustered(samples, &singletons(samples.len()), a, betas)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CfDistance {
    /// Max over the grid of the componentwise deviation in (inflated) standard errors.
    pub sup: f64,
    /// `(beta, deviation, inflation)` per grid point.
    pub per_beta: Vec<(f64, f64, f64)>,
}

/// Componentwise `|mean - target| / sqrt(se^2 + delta(beta)^2)`, maximized over the grid.
/// Grid points with zero standard error and zero inflation must match exactly.
pub fn cf_distance(
    table: &EcfTable,
    target: &dyn Fn(f64) -> Complex64,
    inflation: Option<&dyn Fn(f64) -> f64>,
) -> CfDistance {
    let mut per = Vec::new();
    let mut sup: f64 = 0.0;
    for (i, &b) in table.betas.iter().enumerate() {
        let t = target(b);
        let delta = inflation.map_or(0.0, |f| f(b));
        let comp = |dev: f64, se: f64| -> f64 {
            let s = (se * se + delta * delta).sqrt();
            if s == 0.0 {
                if dev < 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                dev / s
            }
        };
        let m = table.mean[i];
        let dr = comp((m.re - t.re).abs(), table.se_re[i]);
        let di = comp((m.im - t.im).abs(), table.se_im[i]);
        let v = dr.max(di);
        sup = sup.max(v);
        per.push((b, v, delta));
    }
    CfDistance { sup, per_beta: per }
}

/// Fits the phase slope `c` in `target(beta) e^{i c beta}` to the table by weighted least
/// squares on the phase difference; for centering conventions that differ by a drift.
pub fn fit_affine_phase(table: &EcfTable, target: &dyn Fn(f64) -> Complex64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &b) in table.betas.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        let ratio = table.mean[i] / target(b);
        let se = (table.se_re[i].powi(2) + table.se_im[i].powi(2)).sqrt() / table.mean[i].norm().max(1e-12);
        let w = 1.0 / (se * se).max(1e-300);
        num += w * b * ratio.arg();
        den += w * b * b;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `m_2n <= m_n + 2 sqrt(se_n^2 + se_2n^2)`: non-increasing up to noise.
pub fn non_increasing(m_n: f64, se_n: f64, m_2n: f64, se_2n: f64) -> bool {
    m_2n <= m_n + 2.0 * (se_n * se_n + se_2n * se_2n).sqrt()
}

/// Group values by cluster label.
fn group(values: &[f64], clusters: &[usize]) -> Vec<Vec<f64>> {
    let g = clusters.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); g];
    for (v, c) in values.iter().zip(clusters) {
        out[*c].push(*v);
    }
    out.retain(|v| !v.is_empty());
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub estimate: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    pub resamples: usize,
}

/// Percentile bootstrap of a statistic of cluster groups, resampling whole clusters.
pub fn cluster_bootstrap<T>(
    groups: &[T],
    stat: &dyn Fn(&[&T]) -> f64,
    resamples: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    if groups.len() < 2 {
        return Err(Error::Empty("bootstrap needs at least two clusters".into()));
    }
    let b = resamples.max(MIN_BOOTSTRAP);
    let all: Vec<&T> = groups.iter().collect();
    let estimate = stat(&all);
    let mut rng = substream(seed, 0, 0xB007);
    let mut reps: Vec<f64> = (0..b)
        .map(|_| {
            let pick: Vec<&T> = (0..groups.len())
                .map(|_| &groups[rng.random_range(0..groups.len())])
                .collect();
            stat(&pick)
        })
        .filter(|v| v.is_finite())
        .collect();
    if reps.len() < b / 2 {
        return Err(Error::Tolerance {
            what: "bootstrap resamples with finite statistic".into(),
            achieved: reps.len() as f64,
            requested: b as f64,
        });
    }
    reps.sort_by(f64::total_cmp);
    let m = reps.iter().sum::<f64>() / reps.len() as f64;
    let se = (reps.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();
    let q = |p: f64| reps[((reps.len() - 1) as f64 * p).round() as usize];
    Ok(BootstrapSummary {
        estimate,
        se,
        lo: q(0.025),
        hi: q(0.975),
        resamples: reps.len(),
    })
}

fn pooled_mean(gs: &[&Vec<f64>]) -> f64 {
    let (s, n) = gs.iter().fold((0.0, 0usize), |(s, n), g| (s + g.iter().sum::<f64>(), n + g.len()));
    s / n as f64
}

/// Bootstrap summary for the pooled mean of clustered values.
pub fn bootstrap_mean(values: &[f64], clusters: &[usize], resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    cluster_bootstrap(&group(values, clusters), &pooled_mean, resamples, seed)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LlnEstimate {
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub ci: Vec<(f64, f64)>,
    pub predicted: Vec<f64>,
    /// `|estimate - predicted| / |predicted|`.
    pub relative_deviation: f64,
}

/// Replica mean of rescaled endpoints `X / N` against a predicted limit.
pub fn lln_estimate(
    endpoints: &[Vec<f64>],
    clusters: &[usize],
    predicted: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<LlnEstimate> {
    if endpoints.is_empty() {
        return Err(Error::Empty("no endpoints".into()));
    }
    let d = predicted.len();
    let mut estimate = Vec::new();
    let mut se = Vec::new();
    let mut ci = Vec::new();
    for k in 0..d {
        let v: Vec<f64> = endpoints.iter().map(|x| x[k]).collect();
        let b = bootstrap_mean(&v, clusters, resamples, seed.wrapping_add(k as u64))?;
        estimate.push(b.estimate);
        se.push(b.se);
        ci.push((b.lo, b.hi));
    }
    let num: f64 = estimate.iter().zip(predicted).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = predicted.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(LlnEstimate {
        relative_deviation: if den > 0.0 { num / den } else { num },
        estimate,
        se,
        ci,
        predicted: predicted.to_vec(),
    })
}

/// Predicted exponent of `Var int_0^s (eta - rho)` in `s`, and whether a log factor rides on it.
pub fn predicted_occupation_exponent(d: usize, alpha: f64) -> (f64, bool) {
    match d {
        1 if alpha > 1.0 && alpha < 2.0 => (2.0 - 1.0 / alpha, false),
        1 if alpha == 2.0 => (1.5, false),
        1 if alpha == 1.0 => (1.0, true),
        2 if alpha == 2.0 => (1.0, true),
        _ => (1.0, false),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingFit {
    pub horizons: Vec<f64>,
    pub variances: Vec<f64>,
    pub exponent: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub predicted: f64,
    pub log_factor: bool,
    pub resamples: usize,
}

/// Log-log slope of the variance of occupation integrals against the horizon.
/// `values[h][i]` is sample `i` at horizon `h`; all horizons share the cluster labels.
pub fn occupation_variance_fit(
    horizons: &[f64],
    values: &[Vec<f64>],
    clusters: &[usize],
    d: usize,
    alpha: f64,
    resamples: usize,
    seed: u64,
) -> Result<ScalingFit> {
    if horizons.len() < 4 {
        return Err(Error::config("need at least 4 horizons for a scaling fit"));
    }
    if values.len() != horizons.len() || values.iter().any(|v| v.len() != clusters.len()) {
        return Err(Error::contract("values must be horizons x samples"));
    }
    let g = clusters.iter().copied().max().map_or(0, |m| m + 1);
    // Per cluster: for each horizon, the sample values.
    let mut groups: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); horizons.len()]; g];
    for (i, c) in clusters.iter().enumerate() {
        for h in 0..horizons.len() {
            groups[*c][h].push(values[h][i]);
        }
    }
    groups.retain(|v| !v[0].is_empty());
    let lx: Vec<f64> = horizons.iter().map(|s| s.ln()).collect();
    let variances = |gs: &[&Vec<Vec<f64>>]| -> Vec<f64> {
        (0..horizons.len())
            .map(|h| {
                let (mut s, mut s2, mut n) = (0.0, 0.0, 0.0);
                for g in gs {
                    for v in &g[h] {
                        s += v;
                        s2 += v * v;
                        n += 1.0;
                    }
                }
                let m = s / n;
                (s2 / n - m * m) * n / (n - 1.0)
            })
            .collect()
    };
    let slope = |gs: &[&Vec<Vec<f64>>]| -> f64 {
        let v = variances(gs);
        if v.iter().any(|x| !(*x > 0.0)) {
            return f64::NAN;
        }
        let ly: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        linear_fit(&lx, &ly).slope
    };
    let all: Vec<&Vec<Vec<f64>>> = groups.iter().collect();
    let var = variances(&all);
    let b = cluster_bootstrap(&groups, &slope, resamples, seed)?;
    let (predicted, log_factor) = predicted_occupation_exponent(d, alpha);
    Ok(ScalingFit {
        horizons: horizons.to_vec(),
        variances: var,
        exponent: b.estimate,
        se: b.se,
        ci: (b.lo, b.hi),
        predicted,
        log_factor,
        resamples: b.resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn ecf_basics() {
        let x = vec![vec![0.7, -1.0]];
        let a = [1.0, 2.0];
        let t = ecf(&x, &a, &[0.0, 0.5]).unwrap();
        assert_eq!(t.mean[0], Complex64::new(1.0, 0.0));
        assert!((t.mean[1] - Complex64::from_polar(1.0, 0.5 * (0.7 - 2.0))).norm() < 1e-15);
        assert!(ecf(&[], &a, &[1.0]).is_err());
        let mut rng = stream(1, 0);
        let xs: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random::<f64>()]).collect();
        let t = ecf(&xs, &[1.0], &[-1.3, 1.3]).unwrap();
        assert!((t.mean[0] - t.mean[1].conj()).norm() < 1e-15);
        let same = cf_distance(&t, &|b| t.mean[t.betas.iter().position(|x| *x == b).unwrap()], None);
        assert_eq!(same.sup, 0.0);
    }

    #[test]
    fn gaussian_cf_calibration_and_power() {
        let mut rng = stream(2, 0);
        let n = 20000;
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
        let betas: Vec<f64> = (0..11).map(|k| -2.0 + 0.4 * k as f64).collect();
        let t = ecf(&xs, &[1.0], &betas).unwrap();
        let ok = cf_distance(&t, &|b| Complex64::new((-0.5 * b * b).exp(), 0.0), None);
        assert!(ok.sup < 3.5, "{ok:?}");
        let wrong = cf_distance(&t, &|b| Complex64::new((-0.6 * b * b).exp(), 0.0), None);
        assert!(wrong.sup > 3.0);
        let loose = cf_distance(&t, &|b| Complex64::new((-0.6 * b * b).exp(), 0.0), Some(&|_| 0.05));
        assert!(loose.sup < wrong.sup);
        // A pure drift shows up as a phase slope.
        let shifted: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] + 0.3]).collect();
        let ts = ecf(&shifted, &[1.0], &betas).unwrap();
        let c = fit_affine_phase(&ts, &|b| Complex64::new((-0.5 * b * b).exp(), 0.0));
        assert!((c - 0.3).abs() < 0.03, "{c}");
    }

    #[test]
    fn bootstrap_coverage() {
        let mut hits = 0;
        let trials = 200;
        for k in 0..trials {
            let mut rng = stream(3, k);
            let v: Vec<f64> = (0..40).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b = bootstrap_mean(&v, &singletons(40), 200, k).unwrap();
            if b.lo <= 0.0 && 0.0 <= b.hi {
                hits += 1;
            }
        }
        let cover = hits as f64 / trials as f64;
        assert!((0.88..=0.99).contains(&cover), "{cover}");
    }

    #[test]
    fn clusters_widen_errors() {
        // Ten identical copies per cluster carry the information of one sample.
        let mut rng = stream(4, 0);
        let base: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v: Vec<f64> = base.iter().flat_map(|x| std::iter::repeat(*x).take(10)).collect();
        let c: Vec<usize> = (0..1000).map(|i| i / 10).collect();
        let a = clustered_se(&v, &c);
        let b = clustered_se(&v, &singletons(1000));
        assert!(a > 2.5 * b);
    }

    #[test]
    fn lln_frozen_and_noninc() {
        let e = vec![vec![0.0]; 10];
        let r = lln_estimate(&e, &singletons(10), &[0.0], 200, 1).unwrap();
        assert_eq!(r.estimate, vec![0.0]);
        assert!(non_increasing(0.2, 0.01, 0.15, 0.01));
        assert!(!non_increasing(0.1, 0.01, 0.2, 0.01));
    }

    #[test]
    fn variance_fit_recovers_power() {
        let mut rng = stream(5, 0);
        let horizons: Vec<f64> = (4..=10).map(|k| 2f64.powi(k)).collect();
        let n = 400;
        let values: Vec<Vec<f64>> = horizons
            .iter()
            .map(|s| {
                (0..n)
                    .map(|_| s.powf(2.0 / 3.0) * { let z: f64 = StandardNormal.sample(&mut rng); z })
                    .collect()
            })
            .collect();
        let f = occupation_variance_fit(&horizons, &values, &singletons(n), 1, 1.5, 200, 1).unwrap();
        assert!((f.exponent - 4.0 / 3.0).abs() < 0.1, "{f:?}");
        assert!((f.predicted - 4.0 / 3.0).abs() < 1e-12);
        assert!(occupation_variance_fit(&horizons[..3], &values[..3], &singletons(n), 1, 1.5, 200, 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn ecf_conjugate_symmetric(xs in proptest::collection::vec(-50.0f64..50.0, 1..40), beta in -3.0f64..3.0) {
                let samples: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
                let t = ecf(&samples, &[1.0], &[beta, -beta]).unwrap();
                prop_assert_eq!(t.mean[0], t.mean[1].conj());
                prop_assert!(t.mean[0].norm() <= 1.0 + 1e-12);
            }

            #[test]
            fn bootstrap_deterministic(xs in proptest::collection::vec(-5.0f64..5.0, 2..30), seed in 0u64..1000) {
                let mean = |g: &[&f64]| g.iter().copied().sum::<f64>() / g.len() as f64;
                let a = cluster_bootstrap(&xs, &mean, 50, seed).unwrap();
                let b = cluster_bootstrap(&xs, &mean, 50, seed).unwrap();
                prop_assert_eq!((a.se, a.lo, a.hi), (b.se, b.lo, b.hi));
                prop_assert!(a.lo <= a.hi);
            }
        }
    }
}
