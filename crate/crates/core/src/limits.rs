//! Limit laws: regime scalings, the stable exponents and the limit characteristic function.
//!
//! For `alpha < 2` the exponent is an integral over the half space `{u_1 > 0}`. It is
//! reduced to polar form: a closed-form radial profile `psi(s)` integrated over the
//! hemisphere `{omega_1 > 0}` by tanh-sinh panels split where `omega . a` changes sign.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::kernel::{d_matrix, mean_m, truncated_drift_sum, KernelSpec};
use crate::lattice::LatticeVector;
use crate::numerics::{tanh_sinh, KahanSum};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// 0 < alpha < 1
    Sub,
    /// alpha = 1
    Critical,
    /// 1 < alpha < 2
    Super,
    /// alpha = 2
    Diffusive,
}

impl Regime {
    pub fn of(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::regime(format!("alpha = {alpha} must be positive")));
        }
        Ok(if alpha < 1.0 {
            Regime::Sub
        } else if alpha == 1.0 {
            Regime::Critical
        } else if alpha < 2.0 {
            Regime::Super
        } else if alpha == 2.0 {
            Regime::Diffusive
        } else {
            return Err(Error::regime(format!(
                "alpha = {alpha} > 2 is not supported (finite-variance case)"
            )));
        })
    }
}

/// Which reading of the critical law of large numbers to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalReading {
    /// `t (1 - rho) gamma_d e_1`, linear in time.
    TimeLinear,
    /// `gamma_d e_1` as written in the statement.
    Literal,
}

/// Timescale and centering for the rescaled tagged displacement in one regime.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegimeScaling {
    pub regime: Regime,
    pub d: usize,
    pub alpha: f64,
    /// Mean drift for alpha > 1.
    pub m: Option<Vec<f64>>,
}

pub fn regime_for(alpha: f64, d: usize) -> Result<RegimeScaling> {
    let regime = Regime::of(alpha)?;
    let spec = KernelSpec::new(d, alpha, 1)?;
    let m = match regime {
        Regime::Super | Regime::Diffusive => Some(mean_m(&spec, 1e-9)?.value),
        _ => None,
    };
    Ok(RegimeScaling {
        regime,
        d,
        alpha,
        m,
    })
}

impl RegimeScaling {
    /// Physical time per unit of macroscopic time at scale `n`.
    pub fn timescale(&self, n: f64) -> f64 {
        match self.regime {
            Regime::Sub | Regime::Super => n.powf(self.alpha),
            Regime::Critical => n,
            Regime::Diffusive => n * n / n.ln(),
        }
    }

    /// Centering subtracted from the displacement at macroscopic time `t`.
    pub fn centering(&self, t: f64, n: u64, rho: f64) -> Result<Vec<f64>> {
        let nf = n as f64;
        Ok(match self.regime {
            Regime::Sub => vec![0.0; self.d],
            Regime::Critical => {
                let spec = KernelSpec::new(self.d, self.alpha, 1)?;
                truncated_drift_sum(n, &spec)?
                    .iter()
                    .map(|x| t * nf * (1.0 - rho) * x)
                    .collect()
            }
            Regime::Super | Regime::Diffusive => {
                let scale = t * self.timescale(nf) * (1.0 - rho);
                self.m.as_ref().unwrap().iter().map(|x| scale * x).collect()
            }
        })
    }

    /// Physical horizon for the law of large numbers at scale `n`.
    pub fn lln_timescale(&self, n: f64) -> Result<f64> {
        match self.regime {
            Regime::Critical => Ok(n / n.ln()),
            Regime::Super | Regime::Diffusive => Ok(n),
            Regime::Sub => Err(Error::regime("no law of large numbers for alpha < 1")),
        }
    }

    /// Predicted limit of `X_{t * lln_timescale(N)} / N`.
    pub fn lln_limit(&self, t: f64, rho: f64, gamma_d: f64, reading: CriticalReading) -> Result<Vec<f64>> {
        match self.regime {
            Regime::Critical => {
                let mut v = vec![0.0; self.d];
                v[0] = match reading {
                    CriticalReading::TimeLinear => t * (1.0 - rho) * gamma_d,
                    CriticalReading::Literal => gamma_d,
                };
                Ok(v)
            }
            Regime::Super | Regime::Diffusive => Ok(self
                .m
                .as_ref()
                .unwrap()
                .iter()
                .map(|x| t * (1.0 - rho) * x)
                .collect()),
            Regime::Sub => Err(Error::regime("no law of large numbers for alpha < 1")),
        }
    }
}

/// Rescaled endpoint `(X - centering(t, N)) / N`.
pub fn rescaled_endpoint(
    displacement: &LatticeVector,
    horizon: f64,
    t: f64,
    n: u64,
    rho: f64,
    scaling: &RegimeScaling,
) -> Result<Vec<f64>> {
    let expected = t * scaling.timescale(n as f64);
    if (horizon - expected).abs() > 1e-9 * expected.max(1.0) {
        return Err(Error::contract(format!(
            "run horizon {horizon} does not match t * gamma(N) = {expected}"
        )));
    }
    let c = scaling.centering(t, n, rho)?;
    Ok(displacement
        .coords()
        .iter()
        .zip(&c)
        .map(|(&x, &m)| (x as f64 - m) / n as f64)
        .collect())
}

/// Radial profile `int_0^inf r^{-1-alpha} (e^{isr} - 1 - compensator) dr`.
pub fn radial_profile(alpha: f64, s: f64) -> Complex64 {
    if s == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if alpha == 1.0 {
        Complex64::new(-FRAC_PI_2 * s.abs(), s * (1.0 - EULER_GAMMA - s.abs().ln()))
    } else {
        let g = statrs::function::gamma::gamma(-alpha);
        let mag = g * s.abs().powf(alpha);
        let ang = FRAC_PI_2 * alpha;
        Complex64::new(mag * ang.cos(), -s.signum() * mag * ang.sin())
    }
}

/// Evaluator of the stable exponent in direction `a`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevyExponent {
    pub d: usize,
    pub alpha: f64,
    pub a: Vec<f64>,
    pub rho: f64,
    pub tol: f64,
    /// Diffusion matrix for alpha = 2.
    pub diffusion: Option<Vec<Vec<f64>>>,
}

impl LevyExponent {
    pub fn new(d: usize, alpha: f64, a: &[f64], rho: f64) -> Result<Self> {
        Regime::of(alpha)?;
        if a.len() != d {
            return Err(Error::contract("direction length must equal d"));
        }
        let diffusion = if alpha == 2.0 {
            Some(d_matrix(&KernelSpec::new(d, alpha, 1)?)?.value)
        } else {
            None
        };
        Ok(Self {
            d,
            alpha,
            a: a.to_vec(),
            rho,
            tol: 1e-10,
            diffusion,
        })
    }

    /// Same exponent with an externally supplied diffusion matrix.
    pub fn with_diffusion(mut self, dm: Vec<Vec<f64>>) -> Self {
        self.diffusion = Some(dm);
        self
    }

    /// Half-space integral `int_{u_1 > 0} |u|^{-d-alpha} (e^{i beta u.a} - 1 - ...) du`,
    /// or `-beta^2/2 a^T D a` at alpha = 2.
    pub fn phi(&self, beta: f64) -> Result<Complex64> {
        if beta == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if self.alpha == 2.0 {
            let dm = self.diffusion.as_ref().unwrap();
            let mut q = 0.0;
            for i in 0..self.d {
                for j in 0..self.d {
                    q += self.a[i] * dm[i][j] * self.a[j];
                }
            }
            return Ok(Complex64::new(-0.5 * beta * beta * q, 0.0));
        }
        let alpha = self.alpha;
        let a = &self.a;
        let profile = |proj: f64| radial_profile(alpha, beta * proj);
        let v = hemisphere_integral(self.d, a, &profile, self.tol)?;
        Ok(v)
    }

    /// Exponent of the kernel-weighted integral `int p(u) (...) du`; equals `2 phi` for
    /// alpha < 2 because the kernel has density 2 on the half space, and `phi` at alpha = 2.
    pub fn kernel_exponent(&self, beta: f64) -> Result<Complex64> {
        let v = self.phi(beta)?;
        Ok(if self.alpha < 2.0 { v * 2.0 } else { v })
    }

    /// Limit characteristic function `exp{t (1 - rho) int p(u) (...) du}`.
    pub fn levy_cf(&self, beta: f64, t: f64) -> Result<Complex64> {
        Ok((self.kernel_exponent(beta)? * (t * (1.0 - self.rho))).exp())
    }

    /// `exp{t (1 - rho) phi}` with the half-space integral taken literally.
    pub fn levy_cf_half_space(&self, beta: f64, t: f64) -> Result<Complex64> {
        Ok((self.phi(beta)? * (t * (1.0 - self.rho))).exp())
    }
}

/// Spec-shaped entry points.
pub fn phi(beta: f64, exp: &LevyExponent) -> Result<Complex64> {
    exp.phi(beta)
}

pub fn levy_cf(beta: f64, t: f64, exp: &LevyExponent) -> Result<Complex64> {
    exp.levy_cf(beta, t)
}

fn complex_tanh_sinh(f: &dyn Fn(f64) -> Complex64, lo: f64, hi: f64, tol: f64) -> (Complex64, f64) {
    let re = tanh_sinh(|x| f(x).re, lo, hi, tol);
    let im = tanh_sinh(|x| f(x).im, lo, hi, tol);
    (Complex64::new(re.value, im.value), re.err + im.err)
}

/// Integral over `{omega in S^{d-1}: omega_1 > 0}` of `g(omega . a)`.
fn hemisphere_integral(d: usize, a: &[f64], g: &dyn Fn(f64) -> Complex64, tol: f64) -> Result<Complex64> {
    let (v, err) = match d {
        1 => (g(a[0]), 0.0),
        2 => {
            // omega . a = |a| cos(theta - theta_a) vanishes at theta_a +- pi/2.
            let amp = (a[0] * a[0] + a[1] * a[1]).sqrt();
            let th = a[1].atan2(a[0]);
            let mut cuts = vec![-FRAC_PI_2, FRAC_PI_2];
            for c in [th - FRAC_PI_2, th + FRAC_PI_2, th - 1.5 * PI, th + 1.5 * PI] {
                if c > -FRAC_PI_2 && c < FRAC_PI_2 {
                    cuts.push(c);
                }
            }
            cuts.sort_by(f64::total_cmp);
            let f = |t: f64| g(amp * (t - th).cos());
            let mut acc = Complex64::new(0.0, 0.0);
            let mut err = 0.0;
            for w in cuts.windows(2) {
                let (v, e) = complex_tanh_sinh(&f, w[0], w[1], tol);
                acc += v;
                err += e;
            }
            (acc, err)
        }
        3 => {
            // omega = (t, r cos phi, r sin phi), r = sqrt(1 - t^2), d omega = dt dphi.
            let b = (a[1] * a[1] + a[2] * a[2]).sqrt();
            let inner = |t: f64| -> Complex64 {
                let r = (1.0 - t * t).max(0.0).sqrt();
                let h = |p: f64| g(a[0] * t + r * b * p.cos());
                let mut cuts = vec![0.0, PI];
                if r * b > 0.0 {
                    let c = -a[0] * t / (r * b);
                    if c.abs() < 1.0 {
                        cuts.insert(1, c.acos());
                    }
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for w in cuts.windows(2) {
                    acc += complex_tanh_sinh(&h, w[0], w[1], tol).0;
                }
                acc * 2.0
            };
            let mut cuts = vec![0.0, 1.0];
            let tstar = b / (a[0] * a[0] + b * b).sqrt();
            if tstar > 0.0 && tstar < 1.0 {
                cuts.insert(1, tstar);
            }
            let mut acc = Complex64::new(0.0, 0.0);
            let mut err = 0.0;
            for w in cuts.windows(2) {
                let (v, e) = complex_tanh_sinh(&inner, w[0], w[1], tol);
                acc += v;
                err += e;
            }
            (acc, err)
        }
        _ => return Err(Error::config(format!("dimension {d} not supported"))),
    };
    if !(err <= 1e3 * tol.max(1e-14 * v.norm())) {
        return Err(Error::Tolerance {
            what: "hemisphere quadrature".into(),
            achieved: err,
            requested: tol,
        });
    }
    Ok(v)
}

/// `sum_z rate(z) (e^{i beta z.a} - 1)` over a finite support: the free-walk exponent.
pub fn support_exponent(support: &[(LatticeVector, f64)], beta: f64, a: &[f64]) -> Complex64 {
    let mut re = KahanSum::default();
    let mut im = KahanSum::default();
    for (z, w) in support {
        let x = beta * z.dot(a);
        // e^{ix} - 1 = (cos x - 1) + i sin x, with cos x - 1 = -2 sin^2(x/2).
        let s = (0.5 * x).sin();
        re.add(-2.0 * w * s * s);
        im.add(w * x.sin());
    }
    Complex64::new(re.value(), im.value())
}

/// Finite-N exponent `N^alpha sum_{z >= 1} 2 z^{-1-alpha} (e^{i beta a z / N} - 1)` of the
/// free one-dimensional walk with the full kernel (alpha < 1).
pub fn lattice_exponent_d1(alpha: f64, n: f64, beta: f64, a: f64) -> Result<Complex64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::regime("lattice exponent without compensator needs alpha < 1"));
    }
    let k = beta * a / n;
    if k == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if k < 0.0 {
        return Ok(lattice_exponent_d1(alpha, n, -beta, a)?.conj());
    }
    let cutoff: i64 = 1 << 20;
    let mut re = KahanSum::default();
    let mut im = KahanSum::default();
    for z in (1..=cutoff).rev() {
        let w = 2.0 * (z as f64).powf(-1.0 - alpha);
        let x = k * z as f64;
        let s = (0.5 * x).sin();
        re.add(-2.0 * w * s * s);
        im.add(w * x.sin());
    }
    // Tail from cutoff + 1/2 by the continuum integral, the oscillatory part on a rotated contour.
    let x0 = cutoff as f64 + 0.5;
    let rotated = |v: f64| Complex64::new(x0, v / k).powf(-1.0 - alpha) * (-v).exp();
    let (osc, _) = complex_tanh_sinh(&rotated, 0.0, 60.0, 1e-14);
    let osc = osc * Complex64::new(0.0, 1.0 / k) * Complex64::from_polar(1.0, k * x0);
    let tail = (osc - x0.powf(-alpha) / alpha) * 2.0;
    Ok((Complex64::new(re.value(), im.value()) + tail) * n.powf(alpha))
}
