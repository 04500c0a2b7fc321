//! Exact generators on tiny tori and the identities they must satisfy.
//!
//! States are bitmasks. On the full torus bit `i` is site `i`; for the environment seen
//! from the tagged particle, bit `i - 1` is site `i` and the origin is always occupied.
//! The torus kernel sums the rate of every lattice vector in the Euclidean ball of radius
//! `L/2`, the same convention as the simulator's truncated sampler with `r_max = L/2`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernel::{ball_support, s_star, Dynamics, JumpSampler, KernelSpec, TailPolicy};
use crate::lattice::{LatticeVector, MAX_DIM};
use crate::numerics::{Estimate, KahanSum};
use crate::process::{run, Configuration, WatchSite};
use crate::rng::{stream, substream};

pub const MAX_STATES: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorKind {
    /// Asymmetric exclusion on the whole torus.
    Full,
    /// Environment seen from the tagged particle, kernel `p`.
    Environment,
    /// Environment with the normalized symmetric kernel `s`.
    SymmetricEnvironment,
    /// Symmetric exclusion on the whole torus with kernel `s`.
    SymmetricExclusion,
}

impl GeneratorKind {
    pub fn is_environment(self) -> bool {
        matches!(self, GeneratorKind::Environment | GeneratorKind::SymmetricEnvironment)
    }

    fn dynamics(self) -> Dynamics {
        match self {
            GeneratorKind::Full | GeneratorKind::Environment => Dynamics::Asymmetric,
            _ => Dynamics::Symmetric,
        }
    }
}

/// Jump vectors of the torus kernel with their rates and the torus site they land on.
#[derive(Clone, Debug)]
pub struct TorusKernel {
    pub d: usize,
    pub l: u64,
    pub entries: Vec<(LatticeVector, usize, f64)>,
}

fn torus_index(d: usize, l: u64, s: &[i64; MAX_DIM]) -> usize {
    let li = l as i64;
    let mut idx = 0i64;
    for k in (0..d).rev() {
        idx = idx * li + s[k].rem_euclid(li);
    }
    idx as usize
}

fn torus_site(d: usize, l: u64, mut idx: usize) -> [i64; MAX_DIM] {
    let mut s = [0; MAX_DIM];
    for c in s.iter_mut().take(d) {
        *c = (idx % l as usize) as i64;
        idx /= l as usize;
    }
    s
}

impl TorusKernel {
    pub fn new(d: usize, alpha: f64, l: u64, dynamics: Dynamics) -> Result<Self> {
        let spec = KernelSpec::new(d, alpha, 1)?;
        let entries = ball_support(&spec, l / 2, dynamics)
            .into_iter()
            .map(|(z, w)| (z, torus_index(d, l, &z.raw()), w))
            .collect();
        Ok(Self { d, l, entries })
    }

    /// Kernel `z -> rate(-z)`.
    pub fn reversed(&self) -> Self {
        Self {
            d: self.d,
            l: self.l,
            entries: self
                .entries
                .iter()
                .map(|(z, _, w)| (-*z, torus_index(self.d, self.l, &(-*z).raw()), *w))
                .collect(),
        }
    }

    /// Summed rate per torus site.
    pub fn site_rates(&self) -> Vec<f64> {
        let mut r = vec![0.0; (self.l as usize).pow(self.d as u32)];
        for (_, s, w) in &self.entries {
            r[*s] += w;
        }
        r
    }

    fn sites(&self) -> usize {
        (self.l as usize).pow(self.d as u32)
    }

    fn add(&self, site: usize, z: &LatticeVector) -> usize {
        let mut s = torus_site(self.d, self.l, site);
        for (c, dz) in s.iter_mut().zip(z.raw()) {
            *c += dz;
        }
        torus_index(self.d, self.l, &s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub to: u32,
    pub rate: f64,
    /// Jump of the tagged particle, for environment shift moves.
    pub shift: Option<LatticeVector>,
}

/// Sparse rate matrix over an enumerated state space.
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    pub kind: GeneratorKind,
    pub d: usize,
    pub l: u64,
    pub bits: usize,
    pub rows: Vec<Vec<Transition>>,
    pub diag: Vec<f64>,
}

/// Generator with the default kernel for `kind`.
pub fn build_generator(kind: GeneratorKind, l: u64, d: usize, alpha: f64) -> Result<GeneratorMatrix> {
    let kernel = TorusKernel::new(d, alpha, l, kind.dynamics())?;
    build_with_kernel(kind, &kernel)
}

pub fn build_with_kernel(kind: GeneratorKind, kernel: &TorusKernel) -> Result<GeneratorMatrix> {
    let n = kernel.sites();
    let env = kind.is_environment();
    let bits = if env { n - 1 } else { n };
    if bits > 14 {
        return Err(Error::resource(format!(
            "{bits} sites give more than {MAX_STATES} states"
        )));
    }
    let states = 1usize << bits;
    let bit_of = |site: usize| if env { site - 1 } else { site };
    // Destination site for every (site, kernel entry).
    let dest: Vec<Vec<usize>> = (0..n)
        .map(|s| kernel.entries.iter().map(|(z, _, _)| kernel.add(s, z)).collect())
        .collect();
    let first = if env { 1 } else { 0 };
    let mut rows = Vec::with_capacity(states);
    let mut diag = Vec::with_capacity(states);
    for state in 0..states as u32 {
        let occ = |site: usize| env && site == 0 || state >> bit_of(site) & 1 == 1;
        let mut row: Vec<Transition> = Vec::new();
        let mut out = KahanSum::default();
        for x in first..n {
            if !occ(x) {
                continue;
            }
            for (e, (_, _, w)) in kernel.entries.iter().enumerate() {
                let y = dest[x][e];
                if occ(y) {
                    continue;
                }
                let to = state & !(1 << bit_of(x)) | 1 << bit_of(y);
                row.push(Transition { to, rate: *w, shift: None });
                out.add(*w);
            }
        }
        if env {
            for (z, zs, w) in &kernel.entries {
                if occ(*zs) {
                    continue;
                }
                // (theta_z xi)(u) = xi(u + z), and the vacated site -z is empty.
                let mut to = 0u32;
                for u in 1..n {
                    let src = kernel.add(u, z);
                    if src != 0 && occ(src) {
                        to |= 1 << (u - 1);
                    }
                }
                row.push(Transition { to, rate: *w, shift: Some(*z) });
                out.add(*w);
            }
        }
        rows.push(row);
        diag.push(-out.value());
    }
    Ok(GeneratorMatrix {
        kind,
        d: kernel.d,
        l: kernel.l,
        bits,
        rows,
        diag,
    })
}

impl GeneratorMatrix {
    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    /// Whether bit `i` encodes torus site `i + 1` (environment) or `i`.
    pub fn site_of_bit(&self, b: usize) -> usize {
        if self.kind.is_environment() {
            b + 1
        } else {
            b
        }
    }

    pub fn max_row_sum(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.diag)
            .map(|(r, d)| (r.iter().map(|t| t.rate).sum::<f64>() + d).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_off_diagonal(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|t| t.rate))
            .fold(f64::INFINITY, f64::min)
    }

    /// `Q v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.diag)
            .enumerate()
            .map(|(i, (r, d))| {
                let mut acc = KahanSum::default();
                acc.add(d * v[i]);
                for t in r {
                    acc.add(t.rate * v[t.to as usize]);
                }
                acc.value()
            })
            .collect()
    }

    /// `mu^T Q`.
    pub fn apply_left(&self, mu: &[f64]) -> Vec<f64> {
        let mut out: Vec<KahanSum> = vec![KahanSum::default(); self.n_states()];
        for (i, (r, d)) in self.rows.iter().zip(&self.diag).enumerate() {
            out[i].add(mu[i] * d);
            for t in r {
                out[t.to as usize].add(mu[i] * t.rate);
            }
        }
        out.iter().map(|k| k.value()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_states();
        let mut m = DMatrix::zeros(n, n);
        for (i, (r, d)) in self.rows.iter().zip(&self.diag).enumerate() {
            m[(i, i)] += d;
            for t in r {
                m[(i, t.to as usize)] += t.rate;
            }
        }
        m
    }

    /// Occupancy of torus site `site` in `state`.
    pub fn occupied(&self, state: usize, site: usize) -> bool {
        if self.kind.is_environment() {
            site == 0 || state >> (site - 1) & 1 == 1
        } else {
            state >> site & 1 == 1
        }
    }
}

/// Product Bernoulli measure with per-bit densities.
pub fn product_measure(densities: &[f64]) -> Vec<f64> {
    let n = densities.len();
    (0..1usize << n)
        .map(|s| {
            densities
                .iter()
                .enumerate()
                .map(|(b, r)| if s >> b & 1 == 1 { *r } else { 1.0 - r })
                .product()
        })
        .collect()
}

/// `nu_rho` on the torus, or `nu_rho` conditioned on an occupied origin for environment kinds.
pub fn bernoulli_measure(q: &GeneratorMatrix, rho: f64) -> Vec<f64> {
    product_measure(&vec![rho; q.bits])
}

/// `|mu^T Q|_inf`.
pub fn check_stationarity(q: &GeneratorMatrix, mu: &[f64]) -> Result<f64> {
    if mu.len() != q.n_states() {
        return Err(Error::contract("measure and generator sizes differ"));
    }
    Ok(q.apply_left(mu).iter().fold(0.0, |m, x| m.max(x.abs())))
}

/// `max |mu_i R_ij - mu_j Q_ji|`: zero iff `R` is the adjoint of `Q` in `L^2(mu)`.
pub fn adjoint_residual(q: &GeneratorMatrix, r: &GeneratorMatrix, mu: &[f64]) -> f64 {
    let a = q.to_dense();
    let b = r.to_dense();
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((mu[i] * b[(i, j)] - mu[j] * a[(j, i)]).abs());
        }
    }
    worst
}

/// Dense generator with shift moves weighted by `e^{i beta z.a / n_scale}`; with
/// `compensate`, the diagonal also carries `-sum_z (e^{i beta z.a/N} - 1) p(z) (1 - xi(z))`.
pub fn tilted_generator(
    q: &GeneratorMatrix,
    kernel: &TorusKernel,
    beta: f64,
    a: &[f64],
    n_scale: f64,
    compensate: bool,
) -> Result<DMatrix<Complex64>> {
    if !q.kind.is_environment() {
        return Err(Error::contract("tilting needs an environment generator"));
    }
    let n = q.n_states();
    let phase = |z: &LatticeVector| Complex64::from_polar(1.0, beta * z.dot(a) / n_scale);
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for (i, (row, d)) in q.rows.iter().zip(&q.diag).enumerate() {
        m[(i, i)] += Complex64::new(*d, 0.0);
        for t in row {
            let w = match &t.shift {
                Some(z) => phase(z) * t.rate,
                None => Complex64::new(t.rate, 0.0),
            };
            m[(i, t.to as usize)] += w;
        }
        if compensate {
            let mut v = Complex64::new(0.0, 0.0);
            for (z, zs, w) in &kernel.entries {
                if !q.occupied(i, *zs) {
                    v += (phase(z) - 1.0) * *w;
                }
            }
            m[(i, i)] -= v;
        }
    }
    Ok(m)
}

/// `exp(t M) v` by Taylor steps of size at most `h`.
pub fn taylor_propagate(m: &DMatrix<Complex64>, v: &[Complex64], t: f64, h: f64) -> Vec<Complex64> {
    let steps = (t / h).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut x = nalgebra::DVector::from_column_slice(v);
    for _ in 0..steps {
        let mut term = x.clone();
        let mut acc = x.clone();
        for k in 1..=40 {
            term = m * term * Complex64::new(dt / k as f64, 0.0);
            acc += &term;
            if term.norm() < 1e-18 * acc.norm() {
                break;
            }
        }
        x = acc;
    }
    x.iter().copied().collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpectationRoutes {
    /// Pade scaling-and-squaring.
    pub pade: Complex64,
    /// Taylor stepping with step `h`.
    pub taylor: Complex64,
    /// Taylor stepping with step `h / 4`.
    pub taylor_fine: Complex64,
}

impl ExpectationRoutes {
    pub fn spread(&self) -> f64 {
        (self.pade - self.taylor).norm().max((self.pade - self.taylor_fine).norm())
    }
}

fn expectation(m: &DMatrix<Complex64>, mu: &[f64], t: f64) -> ExpectationRoutes {
    let n = m.nrows();
    let e = (m * Complex64::new(t, 0.0)).exp();
    let ones = vec![Complex64::new(1.0, 0.0); n];
    let pade: Complex64 = (0..n)
        .map(|i| (0..n).map(|j| e[(i, j)]).sum::<Complex64>() * mu[i])
        .sum();
    let norm = m.iter().map(|x| x.norm()).fold(0.0, f64::max) * n as f64;
    let h = 0.5 / norm.max(1e-12);
    let dot = |v: Vec<Complex64>| v.iter().zip(mu).map(|(x, w)| x * *w).sum::<Complex64>();
    ExpectationRoutes {
        pade,
        taylor: dot(taylor_propagate(m, &ones, t, h)),
        taylor_fine: dot(taylor_propagate(m, &ones, t, h / 4.0)),
    }
}

/// `E_{nu*}[M_t(beta)]` for the mean-one exponential martingale of the tagged displacement.
pub fn martingale_mean(
    q_env: &GeneratorMatrix,
    kernel: &TorusKernel,
    beta: f64,
    a: &[f64],
    n_scale: f64,
    t: f64,
    rho: f64,
) -> Result<ExpectationRoutes> {
    let m = tilted_generator(q_env, kernel, beta, a, n_scale, true)?;
    Ok(expectation(&m, &bernoulli_measure(q_env, rho), t))
}

/// `E_{nu*}[exp(i beta X_t . a)]` from the tilted generator without compensator.
pub fn displacement_cf(
    q_env: &GeneratorMatrix,
    kernel: &TorusKernel,
    beta: f64,
    a: &[f64],
    t: f64,
    rho: f64,
) -> Result<ExpectationRoutes> {
    let m = tilted_generator(q_env, kernel, beta, a, 1.0, false)?;
    Ok(expectation(&m, &bernoulli_measure(q_env, rho), t))
}

/// `<f, (lambda - Q)^{-1} f>_mu` by conjugate gradients in the `mu` inner product.
pub fn resolvent_quadratic(q: &GeneratorMatrix, mu: &[f64], f: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain("lambda must be positive"));
    }
    for (i, row) in q.rows.iter().enumerate() {
        for t in row {
            let back: f64 = q.rows[t.to as usize]
                .iter()
                .filter(|u| u.to as usize == i)
                .map(|u| u.rate)
                .sum();
            let fwd: f64 = row.iter().filter(|u| u.to == t.to).map(|u| u.rate).sum();
            if (mu[i] * fwd - mu[t.to as usize] * back).abs() > 1e-12 * (mu[i] * fwd).max(1e-300) {
                return Err(Error::domain("generator is not reversible for the supplied measure"));
            }
        }
    }
    let dot = |x: &[f64], y: &[f64]| -> f64 {
        let mut k = KahanSum::default();
        for ((a, b), w) in x.iter().zip(y).zip(mu) {
            k.add(a * b * w);
        }
        k.value()
    };
    let op = |x: &[f64]| -> Vec<f64> {
        q.apply(x).iter().zip(x).map(|(qx, xi)| lambda * xi - qx).collect()
    };
    let n = f.len();
    let mut x = vec![0.0; n];
    let mut r = f.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = 1e-28 * rr.max(1e-300);
    for _ in 0..10 * n + 100 {
        if rr <= target {
            break;
        }
        let ap = op(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr > 1e-16 * dot(f, f).max(1e-300) {
        return Err(Error::Tolerance {
            what: "conjugate gradients".into(),
            achieved: rr.sqrt(),
            requested: 1e-8,
        });
    }
    Ok(dot(f, &x))
}

// ---------------------------------------------------------------------------
// Occupation times of symmetric exclusion

/// `mu_k = sum_z s_L(z) (1 - cos(2 pi k.z / L))` for every torus mode `k`.
pub fn torus_mode_rates(d: usize, alpha: f64, l: u64) -> Result<Vec<f64>> {
    let kernel = TorusKernel::new(d, alpha, l, Dynamics::Symmetric)?;
    let n = kernel.sites();
    let mut cache: HashMap<[i64; MAX_DIM], f64> = HashMap::new();
    let li = l as i64;
    Ok((0..n)
        .map(|k| {
            let s = torus_site(d, l, k);
            // Symmetric under sign flips and permutations of k.
            let mut key = [0i64; MAX_DIM];
            for i in 0..d {
                key[i] = s[i].min(li - s[i]);
            }
            key[..d].sort_unstable();
            *cache.entry(key).or_insert_with(|| {
                let mut acc = KahanSum::default();
                for (z, _, w) in &kernel.entries {
                    let p: f64 = (0..d).map(|i| key[i] as f64 * z.raw()[i] as f64).sum();
                    let h = (PI * p / l as f64).sin();
                    acc.add(2.0 * w * h * h);
                }
                acc.value()
            })
        })
        .collect())
}

/// `Var int_0^s (eta_tau(z) - rho) dtau` under `nu_rho` for symmetric exclusion on the torus,
/// by duality with one random walk.
pub fn duality_occupation_variance(modes: &[f64], rho: f64, s: f64) -> f64 {
    let c = rho * (1.0 - rho) / modes.len() as f64;
    let mut acc = KahanSum::default();
    for &m in modes {
        let v = if m * s < 1e-6 {
            s * s * (1.0 - m * s / 3.0)
        } else {
            2.0 * (s / m - (-(-m * s).exp_m1()) / (m * m))
        };
        acc.add(v);
    }
    c * acc.value()
}

/// `<eta(z) - rho, (lambda - S)^{-1} (eta(z) - rho)>_{nu_rho}` by duality.
pub fn duality_resolvent(modes: &[f64], rho: f64, lambda: f64) -> f64 {
    let c = rho * (1.0 - rho) / modes.len() as f64;
    c * modes.iter().map(|m| 1.0 / (lambda + m)).sum::<f64>()
}

/// Same quadratic form from the full symmetric-exclusion generator.
pub fn occupation_resolvent(d: usize, alpha: f64, l: u64, rho: f64, site: usize, lambda: f64) -> Result<f64> {
    let q = build_generator(GeneratorKind::SymmetricExclusion, l, d, alpha)?;
    let mu = bernoulli_measure(&q, rho);
    let f: Vec<f64> = (0..q.n_states())
        .map(|s| if q.occupied(s, site) { 1.0 - rho } else { -rho })
        .collect();
    resolvent_quadratic(&q, &mu, &f, lambda)
}

/// Monte Carlo of `(lambda/2) E[(int_0^S (eta(z) - rho))^2]` with `S ~ Exp(lambda)`,
/// which equals the resolvent form above.
pub fn occupation_resolvent_mc(
    d: usize,
    alpha: f64,
    l: u64,
    rho: f64,
    lambda: f64,
    reps: u64,
    seed: u64,
) -> Result<Estimate> {
    let spec = KernelSpec::new(d, alpha, l / 2)?;
    let sampler = JumpSampler::new(&spec, Dynamics::Symmetric, TailPolicy::Truncate)?;
    let mut vals = Vec::with_capacity(reps as usize);
    for r in 0..reps {
        let mut init = stream(seed, r);
        let horizon = -(1.0 - init.random::<f64>()).ln() / lambda;
        let cfg = Configuration::init_equilibrium(d, l, rho, 1, &mut init)?;
        // Site 1 is never forced: the forced tracer sits at the origin.
        let w = [WatchSite::Absolute([1, 0, 0])];
        let rep = run(cfg, &sampler, substream(seed, r, 1), rho, horizon, &w, &[])?;
        // int (rho - eta) squared equals int (eta - rho) squared.
        vals.push(0.5 * lambda * rep.occupation[0] * rep.occupation[0]);
    }
    Ok(mean_se(&vals))
}

fn mean_se(v: &[f64]) -> Estimate {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    Estimate::new(m, (var / n).sqrt())
}

// ---------------------------------------------------------------------------
// Simulator estimates on the same torus

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

impl ComplexEstimate {
    pub fn from_samples(v: &[Complex64]) -> Self {
        let re: Vec<f64> = v.iter().map(|c| c.re).collect();
        let im: Vec<f64> = v.iter().map(|c| c.im).collect();
        let a = mean_se(&re);
        let b = mean_se(&im);
        Self {
            mean: Complex64::new(a.value, b.value),
            se_re: a.err,
            se_im: b.err,
        }
    }

    /// Componentwise deviation from `target` in standard errors.
    pub fn sigma_distance(&self, target: Complex64) -> f64 {
        let dr = (self.mean.re - target.re).abs() / self.se_re.max(1e-300);
        let di = (self.mean.im - target.im).abs() / self.se_im.max(1e-300);
        dr.max(di)
    }
}

/// Simulated samples of the tagged-particle martingale and of `e^{i beta X_t . a}` on the
/// torus of side `l`, one run per replica.
#[allow(clippy::too_many_arguments)]
pub fn simulate_tilts(
    d: usize,
    alpha: f64,
    l: u64,
    rho: f64,
    betas: &[f64],
    a: &[f64],
    n_scale: f64,
    t: f64,
    reps: u64,
    seed: u64,
) -> Result<(Vec<ComplexEstimate>, Vec<ComplexEstimate>)> {
    let spec = KernelSpec::new(d, alpha, l / 2)?;
    let sampler = JumpSampler::new(&spec, Dynamics::Asymmetric, TailPolicy::Truncate)?;
    let kernel = TorusKernel::new(d, alpha, l, Dynamics::Asymmetric)?;
    let n = kernel.sites();
    let watches: Vec<WatchSite> = (1..n)
        .map(|s| WatchSite::relative(0, &LatticeVector::from_array(d, torus_site(d, l, s))))
        .collect();
    let mut mart = vec![Vec::with_capacity(reps as usize); betas.len()];
    let mut cf = vec![Vec::with_capacity(reps as usize); betas.len()];
    for r in 0..reps {
        let cfg = Configuration::init_equilibrium(d, l, rho, 1, &mut stream(seed, r))?;
        let rep = run(cfg, &sampler, substream(seed, r, 1), rho, t, &watches, &[])?;
        let x = rep.displacement();
        // int (1 - xi(site)) = int (rho - xi(site)) + (1 - rho) t
        let mut vacancy = vec![0.0; n];
        for (k, v) in rep.occupation.iter().enumerate() {
            vacancy[k + 1] = v + (1.0 - rho) * t;
        }
        for (bi, &beta) in betas.iter().enumerate() {
            let mut comp = Complex64::new(0.0, 0.0);
            for (z, zs, w) in &kernel.entries {
                let e = Complex64::from_polar(1.0, beta * z.dot(a) / n_scale) - 1.0;
                comp += e * *w * vacancy[*zs];
            }
            let phase = Complex64::new(0.0, beta * x.dot(a) / n_scale);
            mart[bi].push((phase - comp).exp());
            cf[bi].push(Complex64::from_polar(1.0, beta * x.dot(a)));
        }
    }
    Ok((
        mart.iter().map(|v| ComplexEstimate::from_samples(v)).collect(),
        cf.iter().map(|v| ComplexEstimate::from_samples(v)).collect(),
    ))
}

// ---------------------------------------------------------------------------
// Orthonormal product basis

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsiReport {
    pub states: usize,
    /// `max |<Psi_A, Psi_B> - delta_AB|`.
    pub orthonormality: f64,
    /// `max |Psi_empty - 1|`.
    pub empty_set: f64,
    /// `max |Psi_A(xi^{x,y}) - Psi_{A - x + y}(xi)|` over `x in A`, `y not in A`.
    pub exchange: f64,
    /// Worst relative gap of `<f, -S^e f> = 1/4 sum_{x,y} sum_A s(y-x) (f(A_{x,y}) - f(A))^2`.
    pub dirichlet_exchange: f64,
    /// Worst relative gap of the full form `<f, -L f>` against its exchange and shift parts.
    pub dirichlet_full: f64,
    /// Smallest ratio `<f, -L f> / (s_star sum_A sum_{x in A, y not in A} s(y-x)(...)^2)`.
    pub lower_bound_ratio: f64,
    pub trials: usize,
}

/// Basis checks on the environment of the torus of side `l` with `trials` random test functions.
pub fn psi_basis_checks(d: usize, alpha: f64, l: u64, rho: f64, trials: usize, seed: u64) -> Result<PsiReport> {
    let q_env = build_generator(GeneratorKind::Environment, l, d, alpha)?;
    let sym = TorusKernel::new(d, alpha, l, Dynamics::Symmetric)?;
    let q_se = build_with_kernel(GeneratorKind::SymmetricEnvironment, &sym)?;
    let bits = q_env.bits;
    let n = q_env.n_states();
    let mu = bernoulli_measure(&q_env, rho);
    let sd = (rho * (1.0 - rho)).sqrt();
    let psi = |set: usize, state: usize| -> f64 {
        let mut v = 1.0;
        for b in 0..bits {
            if set >> b & 1 == 1 {
                v *= if state >> b & 1 == 1 { (1.0 - rho) / sd } else { -rho / sd };
            }
        }
        v
    };
    let table: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|s| psi(a, s)).collect()).collect();
    let mut orth: f64 = 0.0;
    for a in 0..n {
        for b in a..n {
            let mut k = KahanSum::default();
            for s in 0..n {
                k.add(mu[s] * table[a][s] * table[b][s]);
            }
            let target = if a == b { 1.0 } else { 0.0 };
            orth = orth.max((k.value() - target).abs());
        }
    }
    let empty = table[0].iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let mut exch: f64 = 0.0;
    for a in 0..n {
        for x in 0..bits {
            if a >> x & 1 == 0 {
                continue;
            }
            for y in 0..bits {
                if a >> y & 1 == 1 {
                    continue;
                }
                let moved = a & !(1 << x) | 1 << y;
                for s in 0..n {
                    let (sx, sy) = (s >> x & 1, s >> y & 1);
                    let swapped = s & !(1 << x) & !(1 << y) | sy << x | sx << y;
                    exch = exch.max((table[a][swapped] - table[moved][s]).abs());
                }
            }
        }
    }
    // s_L(y - x) between environment bits.
    let site_rate = sym.site_rates();
    let pair_rate = |x: usize, y: usize| -> f64 {
        let sx = torus_site(d, l, x + 1);
        let sy = torus_site(d, l, y + 1);
        let mut diff = [0; MAX_DIM];
        for i in 0..d {
            diff[i] = sy[i] - sx[i];
        }
        site_rate[torus_index(d, l, &diff)]
    };
    let norm = s_star(&KernelSpec::new(d, alpha, 1)?).value;
    let inner = |f: &[f64], g: &[f64]| -> f64 {
        let mut k = KahanSum::default();
        for s in 0..n {
            k.add(mu[s] * f[s] * g[s]);
        }
        k.value()
    };
    let mut rng = substream(seed, 0, 7);
    let mut dir_ex: f64 = 0.0;
    let mut dir_full: f64 = 0.0;
    let mut ratio = f64::INFINITY;
    for _ in 0..trials {
        let f: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let coef: Vec<f64> = (0..n).map(|a| inner(&f, &table[a])).collect();
        // <f, -S^e f> from the exchange moves of the symmetric environment generator.
        let mut lhs = KahanSum::default();
        for s in 0..n {
            let mut qf = 0.0;
            let mut out = 0.0;
            for t in q_se.rows[s].iter().filter(|t| t.shift.is_none()) {
                qf += t.rate * f[t.to as usize];
                out += t.rate;
            }
            lhs.add(-mu[s] * f[s] * (qf - out * f[s]));
        }
        let mut rhs = KahanSum::default();
        let mut one_sided = KahanSum::default();
        for a in 0..n {
            for x in 0..bits {
                for y in 0..bits {
                    if x == y {
                        continue;
                    }
                    let (ix, iy) = (a >> x & 1, a >> y & 1);
                    if ix == iy {
                        continue;
                    }
                    let moved = a & !(1 << x) & !(1 << y) | iy << x | ix << y;
                    let g = coef[moved] - coef[a];
                    let w = pair_rate(x, y) * g * g;
                    rhs.add(0.25 * w);
                    if ix == 1 {
                        one_sided.add(w);
                    }
                }
            }
        }
        dir_ex = dir_ex.max((lhs.value() - rhs.value()).abs() / rhs.value().abs().max(1e-300));
        // <f, -L f> = (s_star / 2) [sum_A sum_{x in A, y notin A} s (..)^2
        //              + int sum_z s(z) (1 - xi(z)) (f(theta_z xi) - f(xi))^2]
        let qf = q_env.apply(&f);
        let full = -inner(&f, &qf);
        let mut shift = KahanSum::default();
        for s in 0..n {
            for t in q_se.rows[s].iter().filter(|t| t.shift.is_some()) {
                let g = f[t.to as usize] - f[s];
                shift.add(mu[s] * t.rate * g * g);
            }
        }
        let exact = 0.5 * norm * (one_sided.value() + shift.value());
        dir_full = dir_full.max((full - exact).abs() / exact.abs().max(1e-300));
        ratio = ratio.min(full / (norm * one_sided.value()));
    }
    Ok(PsiReport {
        states: n,
        orthonormality: orth,
        empty_set: empty,
        exchange: exch,
        dirichlet_exchange: dir_ex,
        dirichlet_full: dir_full,
        lower_bound_ratio: ratio,
        trials,
    })
}

// ---------------------------------------------------------------------------
// Suite

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

/// The exact-arithmetic checks on the default tiny tori (d = 1).
pub fn oracle_suite(alpha: f64) -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    let full = build_generator(GeneratorKind::Full, 10, 1, alpha)?;
    let env = build_generator(GeneratorKind::Environment, 8, 1, alpha)?;
    out.push(OracleCheck::at_most("row sums, torus L=10", full.max_row_sum(), 1e-12));
    out.push(OracleCheck::at_most("row sums, environment L=8", env.max_row_sum(), 1e-12));
    for rho in [0.3, 0.5, 0.7] {
        let r = check_stationarity(&full, &bernoulli_measure(&full, rho))?;
        out.push(OracleCheck::at_most(format!("nu_rho stationary, torus L=10, rho={rho}"), r, 1e-10));
        let r = check_stationarity(&env, &bernoulli_measure(&env, rho))?;
        out.push(OracleCheck::at_most(format!("nu*_rho stationary, environment L=8, rho={rho}"), r, 1e-10));
    }
    let kern = TorusKernel::new(1, alpha, 8, Dynamics::Asymmetric)?;
    let rev = build_with_kernel(GeneratorKind::Environment, &kern.reversed())?;
    out.push(OracleCheck::at_most(
        "adjoint is the reversed-kernel environment generator",
        adjoint_residual(&env, &rev, &bernoulli_measure(&env, 0.4)),
        1e-12,
    ));
    let k6 = TorusKernel::new(1, alpha, 6, Dynamics::Asymmetric)?;
    let e6 = build_with_kernel(GeneratorKind::Environment, &k6)?;
    for (beta, t) in [(0.7, 1.0), (2.5, 2.0)] {
        let m = martingale_mean(&e6, &k6, beta, &[1.0], 1.0, t, 0.5)?;
        out.push(OracleCheck::at_most(
            format!("martingale mean one, L=6, beta={beta}, t={t}"),
            (m.pade - 1.0).norm(),
            1e-8,
        ));
        out.push(OracleCheck::at_most(
            format!("matrix exponential routes agree, beta={beta}"),
            m.spread(),
            1e-9,
        ));
    }
    let psi = psi_basis_checks(1, alpha, 6, 0.4, 20, 1)?;
    out.push(OracleCheck::at_most("Psi orthonormality", psi.orthonormality, 1e-12));
    out.push(OracleCheck::at_most("Psi exchange identity", psi.exchange, 1e-12));
    out.push(OracleCheck::at_most("exchange Dirichlet form identity", psi.dirichlet_exchange, 1e-10));
    out.push(OracleCheck::at_most("full Dirichlet form identity", psi.dirichlet_full, 1e-10));
    out.push(OracleCheck::at_least(
        "Dirichlet form over (s_star/2) x exchange sum, smallest ratio",
        2.0 * psi.lower_bound_ratio,
        1.0,
    ));
    let modes = torus_mode_rates(1, alpha, 10)?;
    let lam = 0.3;
    let direct = occupation_resolvent(1, alpha, 10, 0.5, 3, lam)?;
    out.push(OracleCheck::at_most(
        "occupation resolvent: generator vs duality",
        (direct - duality_resolvent(&modes, 0.5, lam)).abs() / direct,
        1e-9,
    ));
    Ok(out)
}
