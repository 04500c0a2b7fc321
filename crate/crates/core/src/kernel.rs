//! The jump kernel `p(z) = |z|^{-d-alpha} (2 if z_1 > 0, 1 if z_1 = 0, 0 if z_1 < 0)`,
//! its symmetric part, lattice constants and an exact displacement sampler.
//!
//! Infinite lattice sums are evaluated as a partial sum over a cube plus the integral of
//! the summand over the cube's exterior, extrapolated in the cube size. Logarithmically
//! divergent ball sums use Euler-Maclaurin in the innermost coordinate.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeVector, MAX_DIM};
use crate::numerics::{gl_integrate, gl_rule, richardson_limit, Estimate, KahanSum};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub d: usize,
    pub alpha: f64,
    /// Truncation radius for sampling; analytic sums ignore it.
    pub r_max: u64,
}

impl KernelSpec {
    pub fn new(d: usize, alpha: f64, r_max: u64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::config(format!("dimension {d} not supported (1..={MAX_DIM})")));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::regime(format!("alpha = {alpha} outside (0, 2]")));
        }
        if r_max < 1 {
            return Err(Error::config("r_max must be at least 1"));
        }
        Ok(Self { d, alpha, r_max })
    }

    pub fn with_r_max(&self, r_max: u64) -> Self {
        Self { r_max, ..*self }
    }

    /// Decay exponent d + alpha.
    pub fn exponent(&self) -> f64 {
        self.d as f64 + self.alpha
    }

    /// `|z|^{-d-alpha}` from the squared norm.
    #[inline]
    pub fn radial(&self, n2: f64) -> f64 {
        n2.powf(-0.5 * self.exponent())
    }

    /// `p(z)` on raw coordinates (first `d` entries used).
    #[inline]
    pub fn p_raw(&self, c: &[i64]) -> f64 {
        let w = half_space_weight(c[0]);
        if w == 0.0 {
            return 0.0;
        }
        let n2: f64 = c[..self.d].iter().map(|&x| (x as f64) * (x as f64)).sum();
        if n2 == 0.0 {
            0.0
        } else {
            w * self.radial(n2)
        }
    }

    fn check_dim(&self, z: &LatticeVector) -> Result<()> {
        if z.dim() != self.d {
            return Err(Error::contract(format!(
                "vector of dimension {} used with a d = {} kernel",
                z.dim(),
                self.d
            )));
        }
        Ok(())
    }
}

#[inline]
fn half_space_weight(z1: i64) -> f64 {
    match z1.signum() {
        1 => 2.0,
        0 => 1.0,
        _ => 0.0,
    }
}

#[inline]
fn half_space_weight_f(u1: f64) -> f64 {
    if u1 > 0.0 {
        2.0
    } else if u1 == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Which rates a sampler or generator uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dynamics {
    /// Rates `p(z)`.
    Asymmetric,
    /// Rates `s(z) = |z|^{-d-alpha} / s_star`, a probability kernel.
    Symmetric,
}

pub fn eval_p(z: &LatticeVector, spec: &KernelSpec) -> Result<f64> {
    spec.check_dim(z)?;
    Ok(spec.p_raw(z.coords()))
}

pub fn eval_s(z: &LatticeVector, spec: &KernelSpec) -> Result<f64> {
    spec.check_dim(z)?;
    if z.is_zero() {
        return Err(Error::domain("s(0) is undefined"));
    }
    Ok(spec.radial(z.norm2()) / s_star(spec).value)
}

/// Rate of displacement `z` under the given dynamics.
pub fn rate(z: &[i64], spec: &KernelSpec, dynamics: Dynamics, s_star: f64) -> f64 {
    match dynamics {
        Dynamics::Asymmetric => spec.p_raw(z),
        Dynamics::Symmetric => {
            let n2: f64 = z[..spec.d].iter().map(|&x| (x as f64) * (x as f64)).sum();
            if n2 == 0.0 {
                0.0
            } else {
                spec.radial(n2) / s_star
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Convergent lattice sums

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum SumKind {
    Symmetric,
    Kernel,
    FirstMoment,
}

fn memo() -> &'static Mutex<HashMap<(usize, u64, SumKind), Estimate>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64, SumKind), Estimate>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn memoized(d: usize, alpha: f64, kind: SumKind, f: impl FnOnce() -> Estimate) -> Estimate {
    let key = (d, alpha.to_bits(), kind);
    if let Some(e) = memo().lock().unwrap().get(&key) {
        return *e;
    }
    let e = f();
    memo().lock().unwrap().insert(key, e);
    e
}

fn cube_levels(d: usize) -> [i64; 4] {
    match d {
        1 => [4096, 8192, 16384, 32768],
        2 => [64, 128, 256, 512],
        _ => [8, 16, 32, 64],
    }
}

/// Visits every nonzero point of the cube `|z|_inf <= r`.
fn for_each_in_cube(d: usize, r: i64, mut f: impl FnMut(&[i64; MAX_DIM])) {
    let mut z = [0i64; MAX_DIM];
    let (r1, r2) = (if d > 1 { r } else { 0 }, if d > 2 { r } else { 0 });
    for a in -r..=r {
        z[0] = a;
        for b in -r1..=r1 {
            z[1] = b;
            for c in -r2..=r2 {
                z[2] = c;
                if z != [0; MAX_DIM] {
                    f(&z);
                }
            }
        }
    }
}

/// Integral of `g` over the boundary of `[-1,1]^d`, each face split at the coordinate planes.
fn face_integral(d: usize, g: &dyn Fn(&[f64]) -> f64) -> f64 {
    match d {
        1 => g(&[1.0]) + g(&[-1.0]),
        2 => {
            let rule = gl_rule(40);
            let mut acc = 0.0;
            for axis in 0..2 {
                for sign in [-1.0, 1.0] {
                    for (lo, hi) in [(-1.0, 0.0), (0.0, 1.0)] {
                        acc += gl_integrate(&rule, lo, hi, |t| {
                            let mut v = [0.0; 2];
                            v[axis] = sign;
                            v[1 - axis] = t;
                            g(&v)
                        });
                    }
                }
            }
            acc
        }
        _ => {
            let rule = gl_rule(24);
            let mut acc = 0.0;
            for axis in 0..3 {
                let others: Vec<usize> = (0..3).filter(|&j| j != axis).collect();
                for sign in [-1.0, 1.0] {
                    for (lo1, hi1) in [(-1.0, 0.0), (0.0, 1.0)] {
                        for (lo2, hi2) in [(-1.0, 0.0), (0.0, 1.0)] {
                            acc += gl_integrate(&rule, lo1, hi1, |s| {
                                gl_integrate(&rule, lo2, hi2, |t| {
                                    let mut v = [0.0; 3];
                                    v[axis] = sign;
                                    v[others[0]] = s;
                                    v[others[1]] = t;
                                    g(&v)
                                })
                            });
                        }
                    }
                }
            }
            acc
        }
    }
}

/// Sum over `Z^d \ {0}` of `g`, homogeneous of degree `-(d + beta)` with `beta > 0`.
fn homogeneous_lattice_sum(d: usize, beta: f64, g: &dyn Fn(&[f64]) -> f64) -> Estimate {
    let levels = cube_levels(d);
    let mut shells = [KahanSum::default(); 4];
    let mut v = [0.0; MAX_DIM];
    for_each_in_cube(d, levels[3], |z| {
        let m = z[..d].iter().map(|x| x.abs()).max().unwrap();
        let k = levels.iter().position(|&r| m <= r).unwrap();
        for j in 0..d {
            v[j] = z[j] as f64;
        }
        shells[k].add(g(&v[..d]));
    });
    let faces = face_integral(d, g);
    let mut partial = 0.0;
    let mut h = Vec::new();
    let mut y = Vec::new();
    for (k, &r) in levels.iter().enumerate() {
        partial += shells[k].value();
        let hr = r as f64 + 0.5;
        h.push(hr);
        y.push(partial + hr.powf(-beta) / beta * faces);
    }
    richardson_limit(&h, &y, &[beta + 2.0, beta + 4.0, beta + 6.0])
}

/// `s_star = sum_{z != 0} |z|^{-d-alpha}`, the normalizer of the symmetric part.
pub fn s_star(spec: &KernelSpec) -> Estimate {
    let (d, alpha) = (spec.d, spec.alpha);
    memoized(d, alpha, SumKind::Symmetric, || {
        let e = -0.5 * (d as f64 + alpha);
        homogeneous_lattice_sum(d, alpha, &|u: &[f64]| {
            u.iter().map(|x| x * x).sum::<f64>().powf(e)
        })
    })
}

/// Total jump rate `sum_z p(z)`, summed with the kernel's own weights.
pub fn total_rate(spec: &KernelSpec) -> Estimate {
    let (d, alpha) = (spec.d, spec.alpha);
    memoized(d, alpha, SumKind::Kernel, || {
        let e = -0.5 * (d as f64 + alpha);
        homogeneous_lattice_sum(d, alpha, &|u: &[f64]| {
            half_space_weight_f(u[0]) * u.iter().map(|x| x * x).sum::<f64>().powf(e)
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VecEstimate {
    pub value: Vec<f64>,
    pub err: Vec<f64>,
}

/// Mean drift `m = sum_z z p(z)` (alpha > 1).
pub fn mean_m(spec: &KernelSpec, tol: f64) -> Result<VecEstimate> {
    let (d, alpha) = (spec.d, spec.alpha);
    if alpha <= 1.0 {
        return Err(Error::regime(format!("mean drift diverges for alpha = {alpha} <= 1")));
    }
    let m1 = memoized(d, alpha, SumKind::FirstMoment, || {
        let e = -0.5 * (d as f64 + alpha);
        homogeneous_lattice_sum(d, alpha - 1.0, &|u: &[f64]| {
            u[0] * half_space_weight_f(u[0]) * u.iter().map(|x| x * x).sum::<f64>().powf(e)
        })
    });
    if !(m1.err <= tol) {
        return Err(Error::Tolerance {
            what: "mean drift m".into(),
            achieved: m1.err,
            requested: tol,
        });
    }
    let mut value = vec![0.0; d];
    let mut err = vec![0.0; d];
    value[0] = m1.value;
    err[0] = m1.err;
    Ok(VecEstimate { value, err })
}

// ---------------------------------------------------------------------------
// Ball sums with logarithmic growth

/// Euclidean-ball sums switch from direct summation to Euler-Maclaurin once the inner
/// summand varies on scales of at least sqrt(EM_MIN_C) lattice units.
const EM_MIN_C: i64 = 1024;

fn isqrt(n: i64) -> i64 {
    if n <= 0 {
        return 0;
    }
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// `int_0^b (c + y^2)^{-q} dy` for `q = q2 / 2`, q2 >= 1.
fn inner_integral(q2: u32, b: f64, c: f64) -> f64 {
    let sc = c.sqrt();
    let g = c + b * b;
    let (mut q, mut val) = if q2 % 2 == 1 {
        (0.5, (b / sc).asinh())
    } else {
        (1.0, (b / sc).atan() / sc)
    };
    while 2.0 * q < q2 as f64 {
        val = b / (2.0 * q * c * g.powf(q)) + (2.0 * q - 1.0) / (2.0 * q * c) * val;
        q += 1.0;
    }
    val
}

/// Euler-Maclaurin value of `sum_{y=0}^{b} (c + y^2)^{-q}` for c >= EM_MIN_C.
fn inner_half_em(q2: u32, b: i64, c: f64) -> f64 {
    let q = q2 as f64 / 2.0;
    let y = b as f64;
    let g = c + y * y;
    let f0 = c.powf(-q);
    let fb = g.powf(-q);
    let d1 = -2.0 * q * y * g.powf(-q - 1.0);
    let d3 = 12.0 * q * (q + 1.0) * y * g.powf(-q - 2.0)
        - 8.0 * q * (q + 1.0) * (q + 2.0) * y * y * y * g.powf(-q - 3.0);
    inner_integral(q2, y, c) + 0.5 * (f0 + fb) + d1 / 12.0 - d3 / 720.0
}

/// `(sum_{|y|<=b} (c+y^2)^{-q}, sum_{|y|<=b} y^2 (c+y^2)^{-q})`, skipping y = 0 when c = 0.
fn inner_sums(q2: u32, b: i64, c: i64) -> (f64, f64) {
    let q = q2 as f64 / 2.0;
    if c >= EM_MIN_C && q2 >= 2 {
        let cf = c as f64;
        let plain = 2.0 * inner_half_em(q2, b, cf) - cf.powf(-q);
        let lower = 2.0 * inner_half_em(q2 - 2, b, cf) - cf.powf(1.0 - q);
        return (plain, lower - cf * plain);
    }
    let mut s0 = KahanSum::default();
    let mut s2 = KahanSum::default();
    for y in (1..=b).rev() {
        let g = (c + y * y) as f64;
        let t = g.powf(-q);
        s0.add(2.0 * t);
        s2.add(2.0 * (y * y) as f64 * t);
    }
    if c > 0 {
        s0.add((c as f64).powf(-q));
    }
    (s0.value(), s2.value())
}

/// What a ball sum weights `|z|^{-d-alpha}` by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallWeight {
    /// `z_1 p(z)`, the drift.
    Drift,
    /// `z_j^2 p(z)`.
    Square(usize),
}

fn half_integer(x: f64) -> Option<u32> {
    let t = 2.0 * x;
    (t.fract() == 0.0 && t >= 1.0).then_some(t as u32)
}

/// Sums of `weight(z) * p(z)` over the Euclidean ball `|z| <= n`, one per weight.
/// Coordinates other than the first enter through even functions only, so they are folded.
pub fn ball_sums(spec: &KernelSpec, n: u64, weights: &[BallWeight]) -> Result<Vec<f64>> {
    let d = spec.d;
    let n = n as i64;
    let expo = spec.exponent();
    if d == 1 {
        let mut acc = vec![KahanSum::default(); weights.len()];
        for z in (1..=n).rev() {
            let base = 2.0 * (z as f64).powf(-expo);
            for (k, w) in weights.iter().enumerate() {
                acc[k].add(match w {
                    BallWeight::Drift => z as f64 * base,
                    BallWeight::Square(_) => (z * z) as f64 * base,
                });
            }
        }
        return Ok(acc.iter().map(|a| a.value()).collect());
    }
    let q2 = half_integer(expo / 2.0);
    let work = (n as f64).powi(d as i32);
    if q2.is_none() && work > 2e10 {
        return Err(Error::resource(format!(
            "direct ball sum of radius {n} in d = {d} is too large"
        )));
    }
    let q2 = q2.unwrap_or(0);
    let inner = |b: i64, c: i64| -> (f64, f64) {
        if q2 > 0 {
            inner_sums(q2, b, c)
        } else {
            let q = expo / 2.0;
            let mut s0 = KahanSum::default();
            let mut s2 = KahanSum::default();
            for y in (1..=b).rev() {
                let t = ((c + y * y) as f64).powf(-q);
                s0.add(2.0 * t);
                s2.add(2.0 * (y * y) as f64 * t);
            }
            if c > 0 {
                s0.add((c as f64).powf(-q));
            }
            (s0.value(), s2.value())
        }
    };
    let mut acc = vec![KahanSum::default(); weights.len()];
    for z1 in 0..=n {
        let w1 = half_space_weight(z1);
        let rem1 = n * n - z1 * z1;
        if d == 2 {
            let (plain, sq) = inner(isqrt(rem1), z1 * z1);
            for (k, w) in weights.iter().enumerate() {
                let v = match *w {
                    BallWeight::Drift => z1 as f64 * plain,
                    BallWeight::Square(0) => (z1 * z1) as f64 * plain,
                    BallWeight::Square(_) => sq,
                };
                acc[k].add(w1 * v);
            }
        } else {
            let b2 = isqrt(rem1);
            for z2 in 0..=b2 {
                let m2 = if z2 == 0 { 1.0 } else { 2.0 };
                let c = z1 * z1 + z2 * z2;
                let (plain, sq) = inner(isqrt(rem1 - z2 * z2), c);
                for (k, w) in weights.iter().enumerate() {
                    let v = match *w {
                        BallWeight::Drift => z1 as f64 * plain,
                        BallWeight::Square(0) => (z1 * z1) as f64 * plain,
                        BallWeight::Square(1) => (z2 * z2) as f64 * plain,
                        BallWeight::Square(_) => sq,
                    };
                    acc[k].add(w1 * m2 * v);
                }
            }
        }
    }
    Ok(acc.iter().map(|a| a.value()).collect())
}

/// Centering sum `sum_{|z| <= n} z p(z)`; coordinates 2..d vanish by mirror symmetry.
pub fn truncated_drift_sum(n: u64, spec: &KernelSpec) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::contract("truncation radius must be at least 1"));
    }
    let mut v = vec![0.0; spec.d];
    v[0] = ball_sums(spec, n, &[BallWeight::Drift])?[0];
    Ok(v)
}

/// Same sum by brute force over every lattice point; for cross-checks at small `n`.
pub fn truncated_drift_sum_direct(n: u64, spec: &KernelSpec) -> Vec<f64> {
    let mut acc = vec![KahanSum::default(); spec.d];
    let r2 = (n * n) as i64;
    for_each_in_cube(spec.d, n as i64, |z| {
        let n2: i64 = z[..spec.d].iter().map(|x| x * x).sum();
        if n2 <= r2 {
            let p = spec.p_raw(z);
            for j in 0..spec.d {
                acc[j].add(z[j] as f64 * p);
            }
        }
    });
    acc.iter().map(|a| a.value()).collect()
}

/// Radii at which logarithmic constants are extrapolated.
pub fn log_grid(d: usize) -> Vec<u64> {
    let (lo, hi) = if d <= 2 { (10, 16) } else { (8, 12) };
    (lo..=hi).map(|k| 1u64 << k).collect()
}

/// `lim S(N) / log N` from `S(N) = a log N + b + o(1)`, using consecutive grid points.
fn log_slope(grid: &[u64], sums: &[f64]) -> Estimate {
    let slopes: Vec<f64> = grid
        .windows(2)
        .zip(sums.windows(2))
        .map(|(n, s)| (s[1] - s[0]) / ((n[1] as f64).ln() - (n[0] as f64).ln()))
        .collect();
    let k = slopes.len();
    let best = slopes[k - 1];
    let err = (best - slopes[k - 2]).abs().max(1e-14 * best.abs());
    Estimate::new(best, err)
}

/// Critical drift constant `gamma_d = lim (1/log N) sum_{|z|<=N} z_1 p(z)` (alpha = 1).
pub fn gamma_d(spec: &KernelSpec) -> Result<Estimate> {
    if spec.alpha != 1.0 {
        return Err(Error::regime("gamma_d is defined for alpha = 1 only"));
    }
    let grid = log_grid(spec.d);
    let mut sums = Vec::with_capacity(grid.len());
    for &n in &grid {
        sums.push(ball_sums(spec, n, &[BallWeight::Drift])?[0]);
    }
    Ok(log_slope(&grid, &sums))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEstimate {
    pub value: Vec<Vec<f64>>,
    pub err: Vec<Vec<f64>>,
}

/// Diffusion matrix `D_ij = lim (1/log N) sum_{|z|<=N} z_i z_j p(z)` (alpha = 2).
/// Each diagonal entry is summed separately; off-diagonal entries vanish by sign symmetry.
pub fn d_matrix(spec: &KernelSpec) -> Result<MatrixEstimate> {
    if spec.alpha != 2.0 {
        return Err(Error::regime("D is defined for alpha = 2 only"));
    }
    let d = spec.d;
    let grid = log_grid(d);
    let weights: Vec<BallWeight> = (0..d).map(BallWeight::Square).collect();
    let mut per_entry = vec![Vec::new(); d];
    for &n in &grid {
        let s = ball_sums(spec, n, &weights)?;
        for j in 0..d {
            per_entry[j].push(s[j]);
        }
    }
    let mut value = vec![vec![0.0; d]; d];
    let mut err = vec![vec![0.0; d]; d];
    for j in 0..d {
        let e = log_slope(&grid, &per_entry[j]);
        value[j][j] = e.value;
        err[j][j] = e.err;
    }
    Ok(MatrixEstimate { value, err })
}

/// Exact closed forms of the logarithmic constants, used as references in reports.
pub fn gamma_d_closed_form(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 4.0,
        _ => 2.0 * std::f64::consts::PI,
    }
}

pub fn d_diagonal_closed_form(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => PI,
        _ => 4.0 * PI / 3.0,
    }
}

// ---------------------------------------------------------------------------
// Support tables

/// Visits every nonzero `z` with `|z| <= r` (Euclidean).
pub fn for_each_in_ball(d: usize, r: u64, mut f: impl FnMut(&[i64; MAX_DIM])) {
    let r2 = (r * r) as i64;
    let r = r as i64;
    for_each_in_cube(d, r, |z| {
        let n2: i64 = z[..d].iter().map(|x| x * x).sum();
        if n2 <= r2 {
            f(z);
        }
    });
}

/// `(z, rate)` for every `z` in the Euclidean ball of radius `r` with positive rate.
pub fn ball_support(spec: &KernelSpec, r: u64, dynamics: Dynamics) -> Vec<(LatticeVector, f64)> {
    let norm = s_star(spec).value;
    let mut out = Vec::new();
    for_each_in_ball(spec.d, r, |z| {
        let w = rate(z, spec, dynamics, norm);
        if w > 0.0 {
            out.push((LatticeVector::from_array(spec.d, *z), w));
        }
    });
    out
}

/// Summed rate over the Euclidean ball of radius `r`.
pub fn ball_rate(spec: &KernelSpec, r: u64, dynamics: Dynamics) -> f64 {
    let norm = s_star(spec).value;
    let mut acc = KahanSum::default();
    for_each_in_ball(spec.d, r, |z| acc.add(rate(z, spec, dynamics, norm)));
    acc.value()
}

// ---------------------------------------------------------------------------
// Sampler

/// How a sampler treats jumps beyond its table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TailPolicy {
    /// Keep only `|z| <= r_max` (Euclidean); the rest of the rate is dropped.
    Truncate,
    /// Table over the cube `|z|_inf <= cube`, exact rejection sampler beyond it.
    Full { cube: u64 },
}

/// Draws from the tail shells `|z|_inf >= k0` are rejected past this size.
pub const TAIL_CAP: f64 = (1u64 << 48) as f64;

const MAX_TABLE: usize = 1 << 26;

#[derive(Clone, Debug)]
struct ShellTail {
    d: usize,
    alpha: f64,
    k0: f64,
    dynamics: Dynamics,
    shell_bound: f64,
    mu_max: f64,
}

impl ShellTail {
    fn new(d: usize, alpha: f64, k0: u64, dynamics: Dynamics) -> Self {
        let k = k0 as f64;
        Self {
            d,
            alpha,
            k0: k,
            dynamics,
            shell_bound: ((k + 1.0) / k).powf(1.0 + alpha),
            mu_max: Self::mu(d, k),
        }
    }

    /// Proposal points per shell divided by `k^{d-1}`.
    fn mu(d: usize, k: f64) -> f64 {
        2.0 * d as f64 * (2.0 + 1.0 / k).powi(d as i32 - 1)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [i64; MAX_DIM] {
        let d = self.d;
        let expo = d as f64 + self.alpha;
        loop {
            let u = 1.0 - rng.random::<f64>();
            let y = self.k0 * u.powf(-1.0 / self.alpha);
            if !(y < TAIL_CAP) {
                continue;
            }
            let k = y.floor();
            let ki = k as i64;
            // Discrete Pareto shell law vs. the target's k^{-1-alpha} shell profile.
            let gap = -k.powf(-self.alpha) * (-self.alpha * (1.0 / k).ln_1p()).exp_m1();
            let shell = self.alpha * k.powf(-1.0 - self.alpha) / gap / self.shell_bound;
            let mut z = [0i64; MAX_DIM];
            let axis = rng.random_range(0..d);
            for j in 0..d {
                z[j] = if j == axis {
                    if rng.random::<bool>() {
                        ki
                    } else {
                        -ki
                    }
                } else {
                    rng.random_range(-ki..=ki)
                };
            }
            let on_faces = z[..d].iter().filter(|x| x.abs() == ki).count() as f64;
            let w = match self.dynamics {
                Dynamics::Asymmetric => half_space_weight(z[0]) / 2.0,
                Dynamics::Symmetric => 1.0,
            };
            if w == 0.0 {
                continue;
            }
            let n2: f64 = z[..d].iter().map(|&x| (x as f64) * (x as f64)).sum();
            let radial = (k * k / n2).powf(0.5 * expo);
            let acc = shell * Self::mu(d, k) / self.mu_max * w * radial / on_faces;
            if rng.random::<f64>() < acc {
                return z;
            }
        }
    }
}

/// Static description of a sampler, for run manifests.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerInfo {
    pub method: String,
    pub dynamics: Dynamics,
    pub policy: TailPolicy,
    pub table_entries: usize,
    pub proposal_rate: f64,
    pub full_rate: f64,
    pub dropped_rate: f64,
}

/// O(1) sampler of jump displacements under a tail policy.
#[derive(Clone, Debug)]
pub struct JumpSampler {
    d: usize,
    dynamics: Dynamics,
    policy: TailPolicy,
    extent: u64,
    points: Vec<[i64; MAX_DIM]>,
    weights: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
    table_rate: f64,
    table_fraction: f64,
    tail: Option<ShellTail>,
    rate: f64,
    full_rate: f64,
    dropped_rate: f64,
}

/// Asymmetric sampler truncated at `spec.r_max`.
pub fn build_sampler(spec: &KernelSpec) -> Result<JumpSampler> {
    JumpSampler::new(spec, Dynamics::Asymmetric, TailPolicy::Truncate)
}

pub fn sample_jump<R: Rng + ?Sized>(sampler: &JumpSampler, rng: &mut R) -> LatticeVector {
    LatticeVector::from_array(sampler.d, sampler.sample(rng))
}

impl JumpSampler {
    pub fn new(spec: &KernelSpec, dynamics: Dynamics, policy: TailPolicy) -> Result<Self> {
        let d = spec.d;
        let norm = s_star(spec);
        let full_rate = match dynamics {
            Dynamics::Asymmetric => total_rate(spec).value,
            Dynamics::Symmetric => 1.0,
        };
        let extent = match policy {
            TailPolicy::Truncate => spec.r_max,
            TailPolicy::Full { cube } => cube.max(1),
        };
        let entries = (2.0 * extent as f64 + 1.0).powi(d as i32);
        if entries > MAX_TABLE as f64 {
            return Err(Error::resource(format!(
                "jump table with radius {extent} in d = {d} exceeds {MAX_TABLE} entries"
            )));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut push = |z: &[i64; MAX_DIM]| {
            let w = rate(z, spec, dynamics, norm.value);
            if w > 0.0 {
                points.push(*z);
                weights.push(w);
            }
        };
        match policy {
            TailPolicy::Truncate => for_each_in_ball(d, extent, &mut push),
            TailPolicy::Full { .. } => for_each_in_cube(d, extent as i64, &mut push),
        }
        let mut acc = KahanSum::default();
        for w in &weights {
            acc.add(*w);
        }
        let table_rate = acc.value();
        let alias = WeightedAliasIndex::new(weights.clone())
            .map_err(|e| Error::resource(format!("alias table: {e}")))?;
        let (tail, rate, dropped_rate) = match policy {
            TailPolicy::Truncate => (None, table_rate, (full_rate - table_rate).max(0.0)),
            TailPolicy::Full { .. } => {
                let k0 = extent + 1;
                let tail_rate = (full_rate - table_rate).max(0.0);
                // Rate lost to the draw cap, from the tail's shell law.
                let capped = tail_rate * (k0 as f64 / TAIL_CAP).powf(spec.alpha);
                (
                    Some(ShellTail::new(d, spec.alpha, k0, dynamics)),
                    full_rate,
                    capped,
                )
            }
        };
        Ok(Self {
            d,
            dynamics,
            policy,
            extent,
            points,
            weights,
            alias,
            table_rate,
            table_fraction: table_rate / rate,
            tail,
            rate,
            full_rate,
            dropped_rate,
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [i64; MAX_DIM] {
        if let Some(tail) = &self.tail {
            if rng.random::<f64>() >= self.table_fraction {
                return tail.sample(rng);
            }
        }
        self.points[self.alias.sample(rng)]
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    pub fn policy(&self) -> TailPolicy {
        self.policy
    }

    /// Radius of the table: Euclidean for `Truncate`, max-norm for `Full`.
    pub fn extent(&self) -> u64 {
        self.extent
    }

    /// Total proposal rate per particle.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Rate carried by the table part.
    pub fn table_rate(&self) -> f64 {
        self.table_rate
    }

    /// Rate of the untruncated kernel minus the rate this sampler realizes.
    pub fn dropped_rate(&self) -> f64 {
        self.dropped_rate
    }

    /// Whether draws can exceed the table extent.
    pub fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    /// `(z, probability)` for the table entries, normalized over the table.
    pub fn table_probabilities(&self) -> Vec<(LatticeVector, f64)> {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| (LatticeVector::from_array(self.d, *z), w / self.table_rate))
            .collect()
    }

    /// `(z, rate)` for the table entries.
    pub fn table_rates(&self) -> Vec<(LatticeVector, f64)> {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| (LatticeVector::from_array(self.d, *z), *w))
            .collect()
    }

    pub fn info(&self) -> SamplerInfo {
        SamplerInfo {
            method: match self.policy {
                TailPolicy::Truncate => "alias table over the Euclidean ball".into(),
                TailPolicy::Full { .. } => {
                    "alias table over a cube plus rejection sampler on max-norm shells".into()
                }
            },
            dynamics: self.dynamics,
            policy: self.policy,
            table_entries: self.points.len(),
            proposal_rate: self.rate,
            full_rate: self.full_rate,
            dropped_rate: self.dropped_rate,
        }
    }
}

// ---------------------------------------------------------------------------
// Report record

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeConstants {
    pub d: usize,
    pub alpha: f64,
    pub s_star: Estimate,
    pub total_rate: Estimate,
    pub m: Option<VecEstimate>,
    pub gamma_d: Option<Estimate>,
    #[serde(rename = "D")]
    pub d_matrix: Option<MatrixEstimate>,
    pub r_max: u64,
    pub truncated_mass: f64,
}

pub fn lattice_constants(spec: &KernelSpec) -> Result<LatticeConstants> {
    let m = if spec.alpha > 1.0 {
        Some(mean_m(spec, 1e-6)?)
    } else {
        None
    };
    let gamma = if spec.alpha == 1.0 {
        Some(gamma_d(spec)?)
    } else {
        None
    };
    let dm = if spec.alpha == 2.0 {
        Some(d_matrix(spec)?)
    } else {
        None
    };
    let total = total_rate(spec);
    Ok(LatticeConstants {
        d: spec.d,
        alpha: spec.alpha,
        s_star: s_star(spec),
        total_rate: total,
        m,
        gamma_d: gamma,
        d_matrix: dm,
        r_max: spec.r_max,
        truncated_mass: total.value - ball_rate(spec, spec.r_max, Dynamics::Asymmetric),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::f64::consts::PI;

    fn spec(d: usize, alpha: f64) -> KernelSpec {
        KernelSpec::new(d, alpha, 8).unwrap()
    }

    fn lv(c: &[i64]) -> LatticeVector {
        LatticeVector::new(c).unwrap()
    }

    /// Hurwitz-style zeta: partial sum plus Euler-Maclaurin tail.
    fn zeta(s: f64) -> f64 {
        let k = 1000usize;
        let mut acc = 0.0;
        for n in (1..k).rev() {
            acc += (n as f64).powf(-s);
        }
        let x = k as f64;
        acc + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s) + s * x.powf(-s - 1.0) / 12.0
            - s * (s + 1.0) * (s + 2.0) * x.powf(-s - 3.0) / 720.0
    }

    #[test]
    fn eval_p_examples() {
        assert_eq!(eval_p(&lv(&[1]), &spec(1, 1.0)).unwrap(), 2.0);
        assert_eq!(eval_p(&lv(&[-1]), &spec(1, 1.0)).unwrap(), 0.0);
        let v = eval_p(&lv(&[0, 3]), &spec(2, 0.5)).unwrap();
        assert!((v - 3f64.powf(-2.5)).abs() < 1e-15);
        assert_eq!(eval_p(&lv(&[0, 0]), &spec(2, 0.5)).unwrap(), 0.0);
        assert!(matches!(eval_p(&lv(&[1, 1]), &spec(1, 1.0)), Err(Error::Contract(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::new(1, 0.0, 1).is_err());
        assert!(KernelSpec::new(1, 2.5, 1).is_err());
        assert!(KernelSpec::new(4, 1.0, 1).is_err());
        assert!(KernelSpec::new(1, 1.0, 0).is_err());
    }

    #[test]
    fn eval_s_examples() {
        let sp = spec(1, 1.0);
        let v = eval_s(&lv(&[1]), &sp).unwrap();
        assert!((v - 3.0 / (PI * PI)).abs() < 1e-12);
        assert_eq!(eval_s(&lv(&[4]), &sp).unwrap(), eval_s(&lv(&[-4]), &sp).unwrap());
        assert!(matches!(eval_s(&lv(&[0]), &sp), Err(Error::Domain(_))));
    }

    #[test]
    fn s_star_matches_zeta() {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let e = s_star(&spec(1, alpha));
            let z = 2.0 * zeta(1.0 + alpha);
            assert!((e.value - z).abs() < 1e-11, "alpha {alpha}: {e:?} vs {z}");
            assert!(e.err < 1e-9);
        }
        assert!((total_rate(&spec(1, 1.0)).value - PI * PI / 3.0).abs() < 1e-11);
        assert!((total_rate(&spec(1, 0.5)).value - 5.224_750_697_370_976_6).abs() < 1e-10);
    }

    #[test]
    fn total_rate_equals_s_star() {
        for d in 1..=3 {
            for alpha in [0.5, 1.0, 1.5, 2.0] {
                let sp = spec(d, alpha);
                let (a, b) = (s_star(&sp), total_rate(&sp));
                assert!((a.value - b.value).abs() < 1e-10, "d {d} alpha {alpha}");
                assert!(a.err < 1e-8 * a.value, "d {d} alpha {alpha}: {a:?}");
            }
        }
    }

    #[test]
    fn s_star_d2_against_independent_ball_sum() {
        // Direct ball sum to radius 3000 plus the continuum tail 2 pi R^{-alpha} / alpha.
        let sp = spec(2, 1.5);
        let r: i64 = 3000;
        let mut acc = KahanSum::default();
        for x in -r..=r {
            let ymax = isqrt(r * r - x * x);
            for y in -ymax..=ymax {
                if x != 0 || y != 0 {
                    acc.add(((x * x + y * y) as f64).powf(-1.75));
                }
            }
        }
        // Tail integral from the radius of equal area, sqrt(#points / pi).
        let pts = {
            let mut c = 0i64;
            for x in -r..=r {
                c += 2 * isqrt(r * r - x * x) + 1;
            }
            c as f64
        };
        let reff = (pts / PI).sqrt();
        let tail = 2.0 * PI * reff.powf(-1.5) / 1.5;
        let got = s_star(&sp).value;
        assert!((acc.value() + tail - got).abs() < 2e-6, "{} vs {}", acc.value() + tail, got);
    }

    #[test]
    fn mean_m_matches_zeta() {
        let m = mean_m(&spec(1, 1.5), 1e-9).unwrap();
        assert!((m.value[0] - 2.0 * zeta(1.5)).abs() < 1e-9, "{m:?}");
        let m2 = mean_m(&spec(1, 2.0), 1e-9).unwrap();
        assert!((m2.value[0] - PI * PI / 3.0).abs() < 1e-9);
        let m3 = mean_m(&spec(3, 1.5), 1e-6).unwrap();
        assert_eq!(&m3.value[1..], &[0.0, 0.0]);
        assert!(matches!(mean_m(&spec(1, 1.0), 1e-6), Err(Error::Regime(_))));
    }

    #[test]
    fn mean_m_d2_against_direct_ball_sum() {
        // sum |z_1| |z|^{-4.5} over a ball of radius 2000, tail (R^{-0.5}/0.5) * 4.
        let sp = spec(2, 2.5f64.min(2.0));
        let sp = KernelSpec { alpha: 1.5, ..sp };
        let r: i64 = 2000;
        let mut acc = KahanSum::default();
        let mut pts = 0i64;
        for x in -r..=r {
            let ymax = isqrt(r * r - x * x);
            pts += 2 * ymax + 1;
            for y in -ymax..=ymax {
                if x != 0 || y != 0 {
                    acc.add(x.abs() as f64 * ((x * x + y * y) as f64).powf(-1.75));
                }
            }
        }
        let reff = (pts as f64 / PI).sqrt();
        let tail = 4.0 * reff.powf(-0.5) / 0.5;
        let got = mean_m(&sp, 1e-6).unwrap().value[0];
        assert!((acc.value() + tail - got).abs() < 2e-4, "{} vs {got}", acc.value() + tail);
    }

    #[test]
    fn drift_sum_small_cases() {
        assert_eq!(truncated_drift_sum(1, &spec(1, 1.0)).unwrap(), vec![2.0]);
        for d in 2..=3 {
            let v = truncated_drift_sum(5, &spec(d, 1.0)).unwrap();
            assert!(v[1..].iter().all(|&x| x == 0.0));
            let direct = truncated_drift_sum_direct(5, &spec(d, 1.0));
            assert!((v[0] - direct[0]).abs() < 1e-12);
            assert!(direct[1..].iter().all(|&x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn em_ball_sums_match_direct() {
        for (d, alpha, n) in [(2, 1.0, 300u64), (2, 2.0, 300), (3, 1.0, 90), (3, 2.0, 90)] {
            let sp = spec(d, alpha);
            let weights: Vec<BallWeight> = std::iter::once(BallWeight::Drift)
                .chain((0..d).map(BallWeight::Square))
                .collect();
            let fast = ball_sums(&sp, n, &weights).unwrap();
            let mut slow = vec![KahanSum::default(); weights.len()];
            for_each_in_ball(d, n, |z| {
                let p = sp.p_raw(z);
                slow[0].add(z[0] as f64 * p);
                for j in 0..d {
                    slow[1 + j].add((z[j] * z[j]) as f64 * p);
                }
            });
            for k in 0..weights.len() {
                let s = slow[k].value();
                assert!((fast[k] - s).abs() < 1e-10 * s.abs(), "{d} {alpha} {k}: {} {s}", fast[k]);
            }
        }
    }

    #[test]
    fn drift_over_log_tends_to_two() {
        let sp = spec(1, 1.0);
        let n = 1u64 << 16;
        let ln = (n as f64).ln();
        let v = truncated_drift_sum(n, &sp).unwrap()[0] / ln;
        // 2 H_N / ln N = 2 + 2 gamma_E / ln N + O(1 / (N ln N)).
        let euler = 0.577_215_664_901_532_9;
        assert!((v - 2.0 - 2.0 * euler / ln).abs() < 1e-4, "{v}");
        let g = gamma_d(&sp).unwrap();
        assert!((g.value - 2.0).abs() < 1e-3, "{g:?}");
    }

    #[test]
    fn gamma_d_two_dimensions() {
        let g = gamma_d(&spec(2, 1.0)).unwrap();
        assert!((g.value - 4.0).abs() < 1e-3, "{g:?}");
        assert!(g.err < 1e-3);
        assert!(matches!(gamma_d(&spec(2, 1.5)), Err(Error::Regime(_))));
    }

    #[test]
    fn d_matrix_values() {
        let d1 = d_matrix(&spec(1, 2.0)).unwrap();
        assert!((d1.value[0][0] - 2.0).abs() < 1e-3);
        let d2 = d_matrix(&spec(2, 2.0)).unwrap();
        assert!((d2.value[0][0] - PI).abs() < 1e-3, "{d2:?}");
        assert!((d2.value[0][0] - d2.value[1][1]).abs() < 1e-9);
        assert_eq!(d2.value[0][1], 0.0);
        assert!(matches!(d_matrix(&spec(2, 1.0)), Err(Error::Regime(_))));
    }

    #[test]
    fn symmetric_part_identity() {
        for d in 1..=3 {
            for alpha in [0.5, 1.0, 1.7, 2.0] {
                let sp = spec(d, alpha);
                for_each_in_ball(d, if d == 3 { 20 } else { 100 }, |z| {
                    let neg = [-z[0], -z[1], -z[2]];
                    let lhs = 0.5 * (sp.p_raw(z) + sp.p_raw(&neg));
                    let n2: i64 = z.iter().map(|x| x * x).sum();
                    let rhs = sp.radial(n2 as f64);
                    assert!((lhs - rhs).abs() <= 1e-12 * rhs);
                });
            }
        }
    }

    #[test]
    fn sampler_r_max_one() {
        let sp = KernelSpec::new(1, 1.0, 1).unwrap();
        let s = build_sampler(&sp).unwrap();
        let mut rng = stream(1, 0);
        for _ in 0..100 {
            assert_eq!(sample_jump(&s, &mut rng).coords(), &[1]);
        }
        assert!((s.rate() - 2.0).abs() < 1e-15);
        assert!((s.dropped_rate() - (PI * PI / 3.0 - 2.0)).abs() < 1e-10);
    }

    #[test]
    fn sampler_table_normalized_and_monotone() {
        let sp = KernelSpec::new(2, 1.3, 12).unwrap();
        let s = build_sampler(&sp).unwrap();
        let total: f64 = s.table_probabilities().iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut last = 0.0;
        for r in [1, 2, 4, 8, 16, 32] {
            let p = ball_rate(&sp, r, Dynamics::Asymmetric);
            assert!(p >= last);
            last = p;
        }
        assert!(last < total_rate(&sp).value);
    }

    fn frequency_check(s: &JumpSampler, sp: &KernelSpec, dynamics: Dynamics, draws: usize, radius: i64) {
        let mut rng = stream(99, 7);
        let mut counts: HashMap<[i64; MAX_DIM], u64> = HashMap::new();
        for _ in 0..draws {
            let z = s.sample(&mut rng);
            assert!(dynamics == Dynamics::Symmetric || z[0] >= 0, "negative first coordinate");
            *counts.entry(z).or_default() += 1;
        }
        let norm = s_star(sp).value;
        for_each_in_ball(sp.d, radius as u64, |z| {
            let p = rate(z, sp, dynamics, norm) / s.rate();
            let expect = p * draws as f64;
            let got = *counts.get(z).unwrap_or(&0) as f64;
            let sd = (draws as f64 * p * (1.0 - p)).sqrt().max(1.0);
            assert!((got - expect).abs() <= 4.0 * sd, "{z:?}: {got} vs {expect}");
        });
    }

    #[test]
    fn sampler_frequencies_truncated() {
        let sp = KernelSpec::new(2, 0.8, 10).unwrap();
        let s = build_sampler(&sp).unwrap();
        frequency_check(&s, &sp, Dynamics::Asymmetric, 1_000_000, 5);
    }

    #[test]
    fn sampler_frequencies_full_tail() {
        // A tiny table forces most draws through the shell sampler.
        for (d, alpha) in [(1, 0.5), (2, 1.5), (3, 1.0)] {
            let sp = KernelSpec::new(d, alpha, 1).unwrap();
            for dynamics in [Dynamics::Asymmetric, Dynamics::Symmetric] {
                let s = JumpSampler::new(&sp, dynamics, TailPolicy::Full { cube: 1 }).unwrap();
                frequency_check(&s, &sp, dynamics, 400_000, 4);
            }
        }
    }

    #[test]
    fn full_policy_reaches_far_shells() {
        let sp = KernelSpec::new(1, 0.5, 1).unwrap();
        let s = JumpSampler::new(&sp, Dynamics::Asymmetric, TailPolicy::Full { cube: 4 }).unwrap();
        let mut rng = stream(3, 3);
        let n = 200_000;
        let far = (0..n).filter(|_| s.sample(&mut rng)[0] > 1000).count() as f64 / n as f64;
        // P(z > 1000) = sum_{z > 1000} 2 z^{-1.5} / s_star.
        let expect = (2.0 * 2.0 * 1000.5f64.powf(-0.5)) / total_rate(&sp).value;
        assert!((far - expect).abs() < 4.0 * (expect / n as f64).sqrt(), "{far} vs {expect}");
    }

    #[test]
    fn table_size_guard() {
        let sp = KernelSpec::new(3, 1.0, 1000).unwrap();
        assert!(matches!(build_sampler(&sp), Err(Error::Resource(_))));
    }

    #[test]
    fn constants_record_serializes() {
        let c = lattice_constants(&KernelSpec::new(1, 1.5, 64).unwrap()).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("s_star") && s.contains("truncated_mass"));
        assert!(c.truncated_mass > 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn symmetric_part_is_radial(d in 1usize..=3, alpha in 0.1f64..=2.0, z in proptest::array::uniform3(-57i64..=57)) {
                let mut z = z;
                z[d..].iter_mut().for_each(|c| *c = 0);
                prop_assume!(z.iter().any(|&c| c != 0));
                let sp = spec(d, alpha);
                let neg = [-z[0], -z[1], -z[2]];
                let n2: i64 = z.iter().map(|x| x * x).sum();
                let rhs = sp.radial(n2 as f64);
                prop_assert!((0.5 * (sp.p_raw(&z) + sp.p_raw(&neg)) - rhs).abs() <= 1e-12 * rhs);
            }

            #[test]
            fn drift_has_no_transverse_part(d in 2usize..=3, alpha in 0.5f64..=2.0, n in 1u64..40) {
                let v = truncated_drift_sum(n, &spec(d, alpha)).unwrap();
                prop_assert!(v[1..].iter().all(|&c| c == 0.0), "{:?}", v);
                prop_assert!(v[0] > 0.0);
            }

            #[test]
            fn table_mass_and_monotone_rate(d in 1usize..=2, alpha in 0.3f64..=2.0, r in 1u64..24) {
                let sp = KernelSpec::new(d, alpha, r).unwrap();
                let total: f64 = build_sampler(&sp).unwrap().table_probabilities().iter().map(|x| x.1).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                let (lo, hi) = (ball_rate(&sp, r, Dynamics::Asymmetric), ball_rate(&sp, r + 1, Dynamics::Asymmetric));
                prop_assert!(lo <= hi && hi < total_rate(&sp).value);
            }
        }
    }
}
