//! Small numerical helpers shared by the analytic modules.

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};
use std::num::NonZeroUsize;

/// A value together with an absolute error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

impl Estimate {
    pub fn new(value: f64, err: f64) -> Self {
        Self { value, err }
    }
    pub fn exact(value: f64) -> Self {
        Self { value, err: 0.0 }
    }
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gl_rule(n: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
    rule.as_node_weight_pairs().to_vec()
}

/// Integrates `f` over [a, b] with a fixed rule from [`gl_rule`].
pub fn gl_integrate(rule: &[(f64, f64)], a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (b + a);
    rule.iter().map(|&(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Tanh-sinh quadrature on a finite interval; tolerates integrable endpoint singularities.
/// Nodes near either endpoint are placed by their distance to it, so singular integrands
/// see accurate arguments. The error estimate is the change over the last halving.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Estimate {
    use std::f64::consts::FRAC_PI_2;
    if a == b {
        return Estimate::exact(0.0);
    }
    let half = 0.5 * (b - a);
    let t_max = 3.5;
    // Contribution of the node pair at parameter t > 0 (and the mirrored -t).
    let pair = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u).exp();
        // 1 - tanh(u) = 2 e / (1 + e), exact for large u.
        let gap = 2.0 * e / (1.0 + e);
        let w = FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        let lo = a + half * gap;
        let hi = b - half * gap;
        let mut s = 0.0;
        for x in [lo, hi] {
            if x > a && x < b {
                let v = f(x);
                if v.is_finite() {
                    s += v;
                }
            }
        }
        w * s
    };
    let mut h = 1.0;
    let mut sum = FRAC_PI_2 * f(a + half);
    let mut k = 1;
    while k as f64 * h <= t_max {
        sum += pair(k as f64 * h);
        k += 1;
    }
    let mut prev = sum * h * half;
    let mut err = f64::INFINITY;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            sum += pair(k as f64 * h);
            k += 2;
        }
        let cur = sum * h * half;
        err = (cur - prev).abs();
        prev = cur;
        if err <= tol.max(1e-15 * cur.abs()) {
            break;
        }
    }
    Estimate::new(prev, err)
}

/// Tanh-sinh on [a, b] split into `panels` equal pieces, for long or wiggly ranges.
pub fn tanh_sinh_panels(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> Estimate {
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    let mut acc = Estimate::exact(0.0);
    for k in 0..n {
        let lo = a + h * k as f64;
        let hi = if k + 1 == n { b } else { lo + h };
        let e = tanh_sinh(&f, lo, hi, tol / n as f64);
        acc.value += e.value;
        acc.err += e.err;
    }
    acc
}

/// Solves the square system `m x = rhs` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Some(x)
}

/// Fits `y = v + sum_j c_j h^{-e_j}` through the last `exps.len() + 1` points and returns `v`.
pub fn extrapolate_powers(h: &[f64], y: &[f64], exps: &[f64]) -> Option<f64> {
    let k = exps.len() + 1;
    if h.len() < k || h.len() != y.len() {
        return None;
    }
    let off = h.len() - k;
    let scale = h[off];
    let m: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let x = h[off + i] / scale;
            std::iter::once(1.0)
                .chain(exps.iter().map(|&e| x.powf(-e)))
                .collect()
        })
        .collect();
    solve_dense(m, y[off..].to_vec()).map(|c| c[0])
}

/// Richardson limit over increasing cutoffs with a cascade of power-law error terms.
/// The error bar is the gap between the two highest-order extrapolants.
pub fn richardson_limit(h: &[f64], y: &[f64], exps: &[f64]) -> Estimate {
    let best = extrapolate_powers(h, y, exps).unwrap_or(*y.last().unwrap());
    let prev = if exps.is_empty() {
        y[y.len().saturating_sub(2)]
    } else {
        extrapolate_powers(h, y, &exps[..exps.len() - 1]).unwrap_or(best)
    };
    let floor = 1e-15 * best.abs();
    Estimate::new(best, (best - prev).abs().max(floor))
}

/// Ordinary least squares for y = a + b x; returns (a, b, se_a, se_b, rms residual).
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let dof = (n - 2.0).max(1.0);
    let s2 = rss / dof;
    LinearFit {
        intercept,
        slope,
        se_intercept: (s2 * (1.0 / n + mx * mx / sxx)).sqrt(),
        se_slope: (s2 / sxx).sqrt(),
        rms: (rss / n).sqrt(),
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
    pub rms: f64,
}
