//! Symmetric long-jump random walk with step law `s(x) = |x|^{-d-alpha} / s_star`.
//!
//! The characteristic function is evaluated through an Ewald split of `|x|^{-d-alpha}`:
//! a short-range lattice sum weighted by the regularized upper incomplete gamma function
//! and a reciprocal-lattice sum of `(pi q)^{alpha/2} Gamma(-alpha/2, pi q)`. Both converge
//! like `e^{-pi r^2}`, and `1 - phi` is assembled directly so small angles keep full
//! relative accuracy.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::exponential::integral as expint;
use statrs::function::gamma::{gamma, gamma_ur};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernel::{ball_support, s_star, Dynamics, KernelSpec};
use crate::lattice::MAX_DIM;
use crate::numerics::{gl_rule, linear_fit, KahanSum};

/// Terms with `pi r^2` beyond this are below 1e-19 relative and are skipped.
const EWALD_CUT: f64 = 45.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WalkClass {
    Recurrent,
    Transient,
}

/// The walk with precomputed Ewald tables.
#[derive(Clone, Debug)]
pub struct WalkSpec {
    pub d: usize,
    pub alpha: f64,
    pub s_star: f64,
    real: Vec<([f64; MAX_DIM], f64)>,
    k_range: i64,
    prefactor: f64,
}

impl WalkSpec {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        let spec = KernelSpec::new(d, alpha, 1)?;
        let s = d as f64 + alpha;
        let r = (EWALD_CUT / PI).sqrt().ceil() as i64;
        let mut real = Vec::new();
        let hi = |k: usize| if k < d { r } else { 0 };
        for x in -hi(0)..=hi(0) {
            for y in -hi(1)..=hi(1) {
                for z in -hi(2)..=hi(2) {
                    let r2 = (x * x + y * y + z * z) as f64;
                    if r2 == 0.0 || PI * r2 > EWALD_CUT {
                        continue;
                    }
                    let w = gamma_ur(0.5 * s, PI * r2) * r2.powf(-0.5 * s);
                    real.push(([x as f64, y as f64, z as f64], w));
                }
            }
        }
        Ok(Self {
            d,
            alpha,
            s_star: s_star(&spec).value,
            real,
            k_range: r + 1,
            prefactor: PI.powf(0.5 * s) / gamma(0.5 * s),
        })
    }

    /// `J(q) = (pi q)^{a} Gamma(-a, pi q)` with `a = alpha / 2`, for `q` away from 0.
    fn j_far(&self, q: f64) -> f64 {
        let x = PI * q;
        let a = 0.5 * self.alpha;
        if a == 1.0 {
            (-x).exp() - x * expint(x, 1).unwrap_or(0.0)
        } else {
            // Gamma(-a, x) = (x^{-a} e^{-x} - Gamma(1 - a, x)) / a
            ((-x).exp() - x.powf(a) * gamma_ur(1.0 - a, x) * gamma(1.0 - a)) / a
        }
    }

    /// `J(0) - J(q)` by its power series, stable for small `q`.
    fn j_gap(&self, q: f64) -> f64 {
        let x = PI * q;
        if x == 0.0 {
            return 0.0;
        }
        let a = 0.5 * self.alpha;
        if a == 1.0 {
            return -(-x).exp_m1() + x * expint(x, 1).unwrap_or(0.0);
        }
        let mut acc = KahanSum::default();
        acc.add(-x.powf(a) * gamma(-a));
        let mut term = 1.0;
        let mut n = 1.0;
        loop {
            term *= -x / n;
            let t = term / (n - a);
            acc.add(t);
            if t.abs() < 1e-18 * acc.value().abs() || n > 200.0 {
                break;
            }
            n += 1.0;
        }
        acc.value()
    }

    /// `1 - phi(theta)`, accurate in relative terms down to tiny angles.
    pub fn one_minus_phi(&self, theta: &[f64]) -> f64 {
        let mut th = [0.0; MAX_DIM];
        for (t, v) in th.iter_mut().zip(theta) {
            *t = (v + PI).rem_euclid(2.0 * PI) - PI;
        }
        let mut real = KahanSum::default();
        for (x, w) in &self.real {
            let p = th[0] * x[0] + th[1] * x[1] + th[2] * x[2];
            let s = (0.5 * p).sin();
            real.add(2.0 * s * s * w);
        }
        let shift: Vec<f64> = th.iter().map(|t| t / (2.0 * PI)).collect();
        let mut recip = KahanSum::default();
        let kr = self.k_range;
        let hi = |k: usize| if k < self.d { kr } else { 0 };
        for a in -hi(0)..=hi(0) {
            for b in -hi(1)..=hi(1) {
                for c in -hi(2)..=hi(2) {
                    let k = [a as f64, b as f64, c as f64];
                    let q0 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                    let q1: f64 = (0..3).map(|i| (k[i] + shift[i]).powi(2)).sum();
                    if q0 == 0.0 {
                        recip.add(self.j_gap(q1));
                        continue;
                    }
                    if PI * q0.min(q1) > EWALD_CUT {
                        continue;
                    }
                    recip.add(self.j_far(q0) - self.j_far(q1));
                }
            }
        }
        ((real.value() + self.prefactor * recip.value()) / self.s_star).max(0.0)
    }

    /// `phi(theta) = sum_x cos(theta . x) s(x)`.
    pub fn phi(&self, theta: &[f64]) -> f64 {
        1.0 - self.one_minus_phi(theta)
    }

    /// `lim (1 - phi(r v)) / r^alpha` for alpha < 2, and `lim (1 - phi(r v)) / (r^2 |log r|)`
    /// at alpha = 2.
    pub fn limit_constant(&self) -> f64 {
        let d = self.d as f64;
        let a = self.alpha;
        if a == 2.0 {
            let sphere = 2.0 * PI.powf(0.5 * d) / gamma(0.5 * d);
            sphere / (2.0 * d * self.s_star)
        } else {
            PI.powf(0.5 * d) * gamma(1.0 - 0.5 * a)
                / (2f64.powf(a) * (0.5 * a) * gamma(0.5 * (d + a)))
                / self.s_star
        }
    }
}

/// Spec-shaped entry point: `phi(theta)`.
pub fn char_fn(theta: &[f64], spec: &WalkSpec) -> f64 {
    spec.phi(theta)
}

/// Unit directions covering the half sphere `{v_1 > 0}` (a single direction in d = 1).
pub fn hemisphere_directions(d: usize, count: usize) -> Vec<[f64; MAX_DIM]> {
    match d {
        1 => vec![[1.0, 0.0, 0.0]],
        2 => (0..count)
            .map(|k| {
                let t = -0.5 * PI + PI * (k as f64 + 0.5) / count as f64;
                [t.cos(), t.sin(), 0.0]
            })
            .collect(),
        _ => {
            // Fibonacci lattice on the half sphere, first coordinate as the pole axis.
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let h = (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - h * h).sqrt();
                    let p = golden * k as f64;
                    [h, r * p.cos(), r * p.sin()]
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Mean over directions of the fitted slope (log-corrected at alpha = 2).
    pub exponent: f64,
    /// Half-width: direction spread plus two slope standard errors.
    pub ci: f64,
    /// Mean slope of `log(1 - phi)` without the log correction.
    pub raw_slope: f64,
    pub log_corrected: bool,
    pub limit_constant: f64,
    /// `max_v |(1 - phi(r v)) / scale(r) - C| / C` at the smallest radius.
    pub uniform_gap: f64,
    pub rms: f64,
}

/// Slope of `log(1 - phi(r v))` against `log r` over `r in [1e-4, 1e-2]`.
pub fn small_theta_exponent(spec: &WalkSpec) -> Result<ExponentFit> {
    let radii: Vec<f64> = (0..9).map(|k| 10f64.powf(-4.0 + 0.25 * k as f64)).collect();
    let dirs = hemisphere_directions(spec.d, 64);
    let corrected = spec.alpha == 2.0;
    let c = spec.limit_constant();
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let mut slopes = Vec::new();
    let mut raw = Vec::new();
    let mut se: f64 = 0.0;
    let mut rms: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for v in &dirs {
        let vals: Vec<f64> = radii
            .iter()
            .map(|r| spec.one_minus_phi(&[r * v[0], r * v[1], r * v[2]][..spec.d]))
            .collect();
        let ly: Vec<f64> = vals.iter().map(|x| x.ln()).collect();
        raw.push(linear_fit(&lx, &ly).slope);
        let ly: Vec<f64> = if corrected {
            ly.iter().zip(&radii).map(|(y, r)| y - r.ln().abs().ln()).collect()
        } else {
            ly
        };
        let f = linear_fit(&lx, &ly);
        slopes.push(f.slope);
        se = se.max(f.se_slope);
        rms = rms.max(f.rms);
        let r0 = radii[0];
        let scale = if corrected { r0 * r0 * r0.ln().abs() } else { r0.powf(spec.alpha) };
        gap = gap.max((vals[0] / scale - c).abs() / c);
    }
    if rms > 0.05 {
        return Err(Error::Tolerance {
            what: "small-angle power fit".into(),
            achieved: rms,
            requested: 0.05,
        });
    }
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let spread = slopes.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
    Ok(ExponentFit {
        exponent: mean,
        ci: spread + 2.0 * se,
        raw_slope: raw.iter().sum::<f64>() / n,
        log_corrected: corrected,
        limit_constant: c,
        uniform_gap: gap,
        rms,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: WalkClass,
    /// `int 1/(1 - phi)` over max-norm shells `2^{-j-1} pi < |theta|_inf <= 2^{-j} pi`.
    pub shells: Vec<(u32, f64)>,
    /// Mean `log2` ratio of consecutive shell integrals over the last pairs.
    pub trend: f64,
    /// Whether the trend agrees with `class` (non-decaying shells for recurrent walks).
    pub corroborated: bool,
}

/// Recurrent iff `d <= 2` and `alpha >= d`.
pub fn predicted_class(d: usize, alpha: f64) -> WalkClass {
    if d <= 2 && alpha >= d as f64 {
        WalkClass::Recurrent
    } else {
        WalkClass::Transient
    }
}

pub fn classify(spec: &WalkSpec) -> ClassReport {
    let class = predicted_class(spec.d, spec.alpha);
    let rule = gl_rule(6);
    let shells: Vec<(u32, f64)> = (10..=14u32)
        .map(|j| {
            let b = PI * 0.5f64.powi(j as i32);
            (j, shell_integral(spec, b, &rule, &[]).0)
        })
        .collect();
    let ratios: Vec<f64> = shells.windows(2).map(|w| (w[1].1 / w[0].1).log2()).collect();
    let tail = &ratios[ratios.len() - 2..];
    let trend = tail.iter().sum::<f64>() / tail.len() as f64;
    let divergent = trend >= -0.15;
    ClassReport {
        class,
        shells,
        trend,
        corroborated: divergent == (class == WalkClass::Recurrent),
    }
}

/// Integral of `w(theta) / (1 - phi(theta))` over the positive-orthant part of the
/// max-norm shell `b/2 < |theta|_inf <= b`, for `w = 1` and each `w = prod cos(theta_i y_i)`.
fn shell_integral(spec: &WalkSpec, b: f64, rule: &[(f64, f64)], ys: &[[i64; MAX_DIM]]) -> (f64, Vec<f64>) {
    let d = spec.d;
    let h = 0.5 * b;
    let n = rule.len();
    let mut total = KahanSum::default();
    let mut weighted = vec![KahanSum::default(); ys.len()];
    for corner in 1..(1usize << d) {
        let lo: Vec<f64> = (0..d).map(|i| if corner >> i & 1 == 1 { h } else { 0.0 }).collect();
        let count = n.pow(d as u32);
        for idx in 0..count {
            let mut th = [0.0; MAX_DIM];
            let mut w = (0.5 * h).powi(d as i32);
            let mut r = idx;
            for i in 0..d {
                let (x, wt) = rule[r % n];
                r /= n;
                th[i] = lo[i] + 0.5 * h * (x + 1.0);
                w *= wt;
            }
            let f = w / spec.one_minus_phi(&th[..d]);
            total.add(f);
            for (acc, y) in weighted.iter_mut().zip(ys) {
                let c: f64 = (0..d).map(|i| (th[i] * y[i] as f64).cos()).product();
                acc.add(f * c);
            }
        }
    }
    (total.value(), weighted.iter().map(|k| k.value()).collect())
}

/// `int_{[0,1]^d} |u|^{-alpha} du`, from one dyadic shell and the geometric series.
fn unit_box_moment(d: usize, alpha: f64) -> f64 {
    let rule = gl_rule(24);
    let h: f64 = 0.5;
    let n = rule.len();
    let mut acc = KahanSum::default();
    for corner in 1..(1usize << d) {
        for idx in 0..n.pow(d as u32) {
            let mut r2 = 0.0;
            let mut w = (0.5 * h).powi(d as i32);
            let mut r = idx;
            for i in 0..d {
                let (x, wt) = rule[r % n];
                r /= n;
                let lo = if corner >> i & 1 == 1 { h } else { 0.0 };
                let t = lo + 0.5 * h * (x + 1.0);
                r2 += t * t;
                w *= wt;
            }
            acc.add(w * r2.powf(-0.5 * alpha));
        }
    }
    acc.value() / (1.0 - 2f64.powf(alpha - d as f64))
}

/// Quadrature resolution for [`green_g00`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GreenResolution {
    /// Gauss-Legendre nodes per box side.
    pub nodes: usize,
    /// Number of dyadic shells before the analytic inner box.
    pub shells: u32,
}

impl GreenResolution {
    /// Shell count chosen so the leading-order inner box is accurate to about 1e-10.
    pub fn auto(d: usize, alpha: f64, nodes: usize, extra: u32) -> Self {
        let eps = (-23.0 / (2.0 + d as f64 - 2.0 * alpha)).exp();
        let shells = (PI / eps).log2().ceil() as u32 + extra;
        Self { nodes, shells }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenValues {
    pub g00: f64,
    /// `g(0, y)` for each requested `y`.
    pub values: Vec<f64>,
    pub inner_box: f64,
}

fn green_values(spec: &WalkSpec, res: GreenResolution, ys: &[[i64; MAX_DIM]]) -> Result<GreenValues> {
    if predicted_class(spec.d, spec.alpha) == WalkClass::Recurrent {
        return Err(Error::domain(format!(
            "the walk with d = {}, alpha = {} is recurrent; g(0,0) is infinite",
            spec.d, spec.alpha
        )));
    }
    let d = spec.d;
    let rule = gl_rule(res.nodes);
    let mut total = KahanSum::default();
    let mut weighted = vec![KahanSum::default(); ys.len()];
    for j in 0..res.shells {
        let b = PI * 0.5f64.powi(j as i32);
        let (t, w) = shell_integral(spec, b, &rule, ys);
        total.add(t);
        for (a, v) in weighted.iter_mut().zip(w) {
            a.add(v);
        }
    }
    let eps = PI * 0.5f64.powi(res.shells as i32);
    let inner = eps.powf(d as f64 - spec.alpha) * unit_box_moment(d, spec.alpha) / spec.limit_constant();
    // Symmetric in each coordinate: [-pi, pi]^d is 2^d copies of [0, pi]^d.
    let norm = 2f64.powi(d as i32) / (2.0 * PI).powi(d as i32);
    Ok(GreenValues {
        g00: norm * (total.value() + inner),
        values: weighted.iter().map(|a| norm * (a.value() + inner)).collect(),
        inner_box: norm * inner,
    })
}

/// `g(0,0) = (2 pi)^{-d} int dtheta / (1 - phi(theta))` for a transient walk.
pub fn green_g00(spec: &WalkSpec, res: GreenResolution) -> Result<f64> {
    Ok(green_values(spec, res, &[])?.g00)
}

/// `g(0, y)` for several `y`, sharing one quadrature pass.
pub fn green_function(spec: &WalkSpec, res: GreenResolution, ys: &[[i64; MAX_DIM]]) -> Result<GreenValues> {
    green_values(spec, res, ys)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarmonicCheck {
    /// `sum_{0 < |y| <= R} s(y) (g(0,y) - g(0,0)) + 1`.
    pub residual: f64,
    /// Bound on the dropped terms `|y| > R`: `g(0,0) sum_{|y|>R} s(y)`.
    pub tail_bound: f64,
    pub radius: i64,
}

/// `sum_y s(y) [g(0,y) - g(0,0)] = -1` truncated at max-norm radius `r`, with the truncation bound.
pub fn green_harmonic_check(spec: &WalkSpec, res: GreenResolution, r: i64) -> Result<HarmonicCheck> {
    let d = spec.d;
    let hi = |k: usize| if k < d { r } else { 0 };
    let mut reps: Vec<[i64; MAX_DIM]> = Vec::new();
    let mut weight: Vec<f64> = Vec::new();
    let mut mass = KahanSum::default();
    for x in -hi(0)..=hi(0) {
        for y in -hi(1)..=hi(1) {
            for z in -hi(2)..=hi(2) {
                if x == 0 && y == 0 && z == 0 {
                    continue;
                }
                let mut key = [x.abs(), y.abs(), z.abs()];
                key[..d].sort_unstable();
                let n2 = (x * x + y * y + z * z) as f64;
                let s = n2.powf(-0.5 * (d as f64 + spec.alpha)) / spec.s_star;
                mass.add(s);
                match reps.iter().position(|k| *k == key) {
                    Some(i) => weight[i] += s,
                    None => {
                        reps.push(key);
                        weight.push(s);
                    }
                }
            }
        }
    }
    let g = green_values(spec, res, &reps)?;
    let mut acc = KahanSum::default();
    for (w, v) in weight.iter().zip(&g.values) {
        acc.add(w * (v - g.g00));
    }
    Ok(HarmonicCheck {
        residual: acc.value() + 1.0,
        tail_bound: g.g00 * (1.0 - mass.value()),
        radius: r,
    })
}

/// Resolvent identity `sum_y s_L(y-x)[g(z,y) - g(z,x)] = lambda g(z,x) - 1{x=z}` on the
/// torus of side `l`, with `g` built from the discrete Fourier modes and the rates from the
/// Euclidean ball of radius `l/2`. Returns the max residual.
pub fn torus_resolvent_residual(d: usize, alpha: f64, l: u64, lambda: f64) -> Result<f64> {
    let spec = KernelSpec::new(d, alpha, 1)?;
    let sup = ball_support(&spec, l / 2, Dynamics::Symmetric);
    let li = l as i64;
    let n = (l as usize).pow(d as u32);
    if n > 4096 {
        return Err(Error::resource("torus too large for the dense resolvent check"));
    }
    let site = |mut i: usize| -> [i64; MAX_DIM] {
        let mut s = [0; MAX_DIM];
        for c in s.iter_mut().take(d) {
            *c = (i % l as usize) as i64;
            i /= l as usize;
        }
        s
    };
    let index = |s: &[i64; MAX_DIM]| -> usize {
        let w: Vec<i64> = s.iter().map(|c| c.rem_euclid(li)).collect();
        (w[0] + li * (w[1] + li * w[2])) as usize
    };
    // Rate matrix of the walk on the torus.
    let mut q = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        let sx = site(x);
        for (z, w) in &sup {
            let mut sy = sx;
            for (c, dz) in sy.iter_mut().zip(z.raw()) {
                *c += dz;
            }
            let y = index(&sy);
            q[(x, y)] += w;
            q[(x, x)] -= w;
        }
    }
    // g(0, x) = L^{-d} sum_k cos(2 pi k.x / L) / (lambda + mu_k)
    let mu: Vec<f64> = (0..n)
        .map(|k| {
            let sk = site(k);
            sup.iter()
                .map(|(z, w)| {
                    let p: f64 = (0..d).map(|i| sk[i] as f64 * z.raw()[i] as f64).sum();
                    let s = (PI * p / l as f64).sin();
                    2.0 * w * s * s
                })
                .sum()
        })
        .collect();
    let g0: Vec<f64> = (0..n)
        .map(|x| {
            let sx = site(x);
            let mut acc = KahanSum::default();
            for (k, m) in mu.iter().enumerate() {
                let sk = site(k);
                let p: f64 = (0..d).map(|i| sk[i] as f64 * sx[i] as f64).sum();
                acc.add((2.0 * PI * p / l as f64).cos() / (lambda + m));
            }
            acc.value() / n as f64
        })
        .collect();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            let (sx, sy) = (site(x), site(y));
            let mut diff = [0; MAX_DIM];
            for i in 0..d {
                diff[i] = sy[i] - sx[i];
            }
            g[(x, y)] = g0[index(&diff)];
        }
    }
    let lhs = &q * &g;
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for z in 0..n {
            let rhs = lambda * g[(x, z)] - if x == z { 1.0 } else { 0.0 };
            worst = worst.max((lhs[(x, z)] - rhs).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct partial sum of `sum cos(theta x) |x|^{-1-alpha}` in d = 1 with the
    /// Euler-Maclaurin-free tail bound `2 R^{-alpha} / alpha`.
    fn direct_d1(alpha: f64, theta: f64, r: i64) -> (f64, f64) {
        let ss = WalkSpec::new(1, alpha).unwrap().s_star;
        let mut acc = KahanSum::default();
        for x in (1..=r).rev() {
            acc.add(2.0 * (theta * x as f64).cos() * (x as f64).powf(-1.0 - alpha));
        }
        (acc.value() / ss, 2.0 * (r as f64).powf(-alpha) / alpha / ss)
    }

    #[test]
    fn value_at_origin_and_symmetry() {
        for (d, a) in [(1, 0.5), (2, 1.5), (3, 2.0)] {
            let w = WalkSpec::new(d, a).unwrap();
            assert!((w.phi(&vec![0.0; d]) - 1.0).abs() < 1e-14);
            let th: Vec<f64> = (0..d).map(|i| 0.3 + 0.7 * i as f64).collect();
            let neg: Vec<f64> = th.iter().map(|x| -x).collect();
            assert!((w.phi(&th) - w.phi(&neg)).abs() < 1e-14);
            assert!(w.one_minus_phi(&th) > 0.0);
        }
    }

    #[test]
    fn cauchy_walk_at_pi() {
        // sum over odd x of 2 |x|^{-2} = pi^2 / 4 and s_star = pi^2 / 3, so phi(pi) = -1/2.
        let w = WalkSpec::new(1, 1.0).unwrap();
        assert!((w.phi(&[PI]) + 0.5).abs() < 1e-12);
        let (a, tail_a) = direct_d1(1.0, PI, 1 << 16);
        let (b, tail_b) = direct_d1(1.0, PI, 1 << 17);
        assert!((a - b).abs() < 1e-6 && tail_a + tail_b < 1e-4);
        assert!((a - w.phi(&[PI])).abs() < 1e-6);
    }

    #[test]
    fn ewald_matches_direct_sums() {
        for (alpha, theta) in [(1.5, 0.4), (0.5, 2.0), (2.0, 1.1)] {
            let w = WalkSpec::new(1, alpha).unwrap();
            let (a, _) = direct_d1(alpha, theta, 1 << 18);
            let (b, _) = direct_d1(alpha, theta, 1 << 19);
            // Oscillatory tails: two radii agree far inside the crude bound.
            assert!((a - b).abs() < 1e-5);
            assert!((w.phi(&[theta]) - b).abs() < 2e-5, "{alpha}: {} vs {b}", w.phi(&[theta]));
        }
        // d = 2 against a brute lattice sum with smooth cutoff at large radius.
        let w = WalkSpec::new(2, 1.5).unwrap();
        let th = [0.9, -0.4];
        let r = 400i64;
        let mut acc = KahanSum::default();
        for x in -r..=r {
            for y in -r..=r {
                let n2 = (x * x + y * y) as f64;
                if n2 == 0.0 || n2 > (r * r) as f64 {
                    continue;
                }
                let p = th[0] * x as f64 + th[1] * y as f64;
                acc.add(2.0 * (0.5 * p).sin().powi(2) * n2.powf(-1.75));
            }
        }
        let direct = acc.value() / w.s_star;
        // Missing tail is at most 2 pi / (1.5 * 400^1.5) / s_star in 1 - phi.
        let bound = 2.0 * PI / (1.5 * 400f64.powf(1.5)) / w.s_star * 2.0;
        let e = w.one_minus_phi(&th);
        assert!(e >= direct - 1e-12 && e - direct <= bound, "{e} {direct} {bound}");
    }

    #[test]
    fn exponents_d1_d2() {
        for d in [1, 2] {
            for a in [0.5, 1.0, 1.5, 2.0] {
                let f = small_theta_exponent(&WalkSpec::new(d, a).unwrap()).unwrap();
                assert!((f.exponent - a).abs() < 0.05, "d={d} a={a}: {f:?}");
                assert!(f.uniform_gap < 0.3, "d={d} a={a}: {f:?}");
            }
        }
    }

    #[test]
    fn classification_grid() {
        for d in 1..=3 {
            for a in [0.5, 1.0, 1.5, 2.0] {
                let r = classify(&WalkSpec::new(d, a).unwrap());
                let expect = if d <= 2 && a >= d as f64 { WalkClass::Recurrent } else { WalkClass::Transient };
                assert_eq!(r.class, expect);
                assert!(r.corroborated, "d={d} a={a}: {r:?}");
            }
        }
    }

    #[test]
    fn green_refinements_agree() {
        let w = WalkSpec::new(1, 0.5).unwrap();
        let a = green_g00(&w, GreenResolution::auto(1, 0.5, 8, 0)).unwrap();
        let b = green_g00(&w, GreenResolution::auto(1, 0.5, 16, 6)).unwrap();
        assert!(a > 1.0 && ((a - b) / b).abs() < 1e-4, "{a} {b}");
        assert!(matches!(green_g00(&WalkSpec::new(1, 1.0).unwrap(), GreenResolution::auto(1, 1.0, 8, 0)), Err(Error::Domain(_))));
    }

    #[test]
    fn green_refinements_agree_d3() {
        let w = WalkSpec::new(3, 1.5).unwrap();
        let a = green_g00(&w, GreenResolution { nodes: 6, shells: 14 }).unwrap();
        let b = green_g00(&w, GreenResolution { nodes: 8, shells: 18 }).unwrap();
        assert!(a > 1.0 && ((a - b) / b).abs() < 1e-4, "{a} {b}");
    }

    #[test]
    fn harmonic_at_origin_d3() {
        // The dropped terms s(y)(g(0,y) - g(0,0)) are all negative, so the truncated sum
        // overshoots -1 by at most the tail bound.
        let w = WalkSpec::new(3, 1.5).unwrap();
        let h = green_harmonic_check(&w, GreenResolution { nodes: 6, shells: 14 }, 3).unwrap();
        assert!(h.residual >= -1e-6 && h.residual <= h.tail_bound, "{h:?}");
    }

    #[test]
    fn resolvent_identity_on_torus() {
        for (d, l) in [(1, 9), (2, 5), (3, 3)] {
            let r = torus_resolvent_residual(d, 1.3, l, 0.7).unwrap();
            assert!(r < 1e-12, "{d}: {r}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn one_minus_phi_nonnegative(d in 1usize..=3, alpha in 0.2f64..=2.0, th in proptest::array::uniform3(-PI..=PI)) {
                let w = WalkSpec::new(d, alpha).unwrap();
                let v = w.one_minus_phi(&th[..d]);
                prop_assert!(v >= -1e-14, "{}", v);
                prop_assert!(v <= 2.0 + 1e-12);
            }
        }
    }
}
