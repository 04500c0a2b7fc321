//! Acceptance suite: ten end-to-end criteria, one status line each.
//!
//! `ACCEPTANCE_ONLY=4,6` restricts the run to the listed criteria.

use std::io::Write;
use std::time::{Duration, Instant};

use longjump::experiment::{
    clt_experiment, diffusive_experiment, free_experiment, lln_experiment, occupation_experiment, CltParams, FreeParams,
    Geometry, LlnParams, OccupationParams, Reach,
};
use longjump::kernel::{
    ball_sums, eval_p, for_each_in_ball, gamma_d, s_star, total_rate, truncated_drift_sum, BallWeight, Dynamics,
    KernelSpec,
};
use longjump::numerics::richardson_limit;
use longjump::oracle::{
    build_with_kernel, martingale_mean, oracle_suite, simulate_tilts, GeneratorKind, TorusKernel,
};
use longjump::rwalk::{classify, predicted_class, small_theta_exponent, torus_resolvent_residual, WalkSpec};
use longjump::{LatticeVector, Result};
use num_complex::Complex64;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn c1_oracle() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut all = true;
    let mut count = 0;
    for alpha in [0.5, 1.0, 1.5, 2.0] {
        for c in oracle_suite(alpha)? {
            all &= c.passed;
            if c.name.contains("stationary") {
                worst = worst.max(c.value);
                count += 1;
            }
        }
    }
    outcome(
        all && worst <= 1e-10,
        format!("{count} stationarity residuals over alpha in {{0.5,1,1.5,2}}, max {worst:.2e} (<= 1e-10); all exact checks passed: {all}"),
    )
}

fn c2_martingale() -> Result<Outcome> {
    let (l, rho, t, alpha) = (6, 0.5, 1.0, 0.8);
    let kern = TorusKernel::new(1, alpha, l, Dynamics::Asymmetric)?;
    let q = build_with_kernel(GeneratorKind::Environment, &kern)?;
    let mut worst: f64 = 0.0;
    for (beta, n_scale) in [(0.5, 1.0), (1.5, 1.0), (3.0, 2.0)] {
        let m = martingale_mean(&q, &kern, beta, &[1.0], n_scale, t, rho)?;
        worst = worst.max((m.pade - 1.0).norm()).max(m.spread());
    }
    let (mart, _) = simulate_tilts(1, alpha, l, rho, &[0.5, 1.5], &[1.0], 1.0, t, 50_000, 2024)?;
    let sig: Vec<f64> = mart.iter().map(|e| e.sigma_distance(Complex64::new(1.0, 0.0))).collect();
    let smax = sig.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst <= 1e-8 && smax <= 3.0,
        format!("matrix exponential |E M - 1| max {worst:.2e} (<= 1e-8); simulator M=5e4 at beta 0.5, 1.5: {sig:.2?} sigma (<= 3)"),
    )
}

fn c3_free() -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut ok = true;
    for (d, alpha, n, r_max) in [(1usize, 0.8, 16u64, 4096u64), (2, 1.5, 8, 64)] {
        let p = FreeParams {
            d,
            alpha,
            horizon: (n as f64).powf(alpha),
            scale: n as f64,
            r_max,
            betas: linspace(-2.0, 2.0, 11),
            replicas: 10_000,
            seed: 31 + d as u64,
            threads: 0,
            control_alpha: alpha + 0.3,
        };
        let r = free_experiment(&p)?;
        ok &= r.passed && r.control.sup > 3.0;
        lines.push(format!(
            "d={d} alpha={alpha}: {:.2} sigma (<= 3), wrong-alpha control {:.1} sigma (> 3)",
            r.distance.sup, r.control.sup
        ));
    }
    outcome(ok, lines.join("; "))
}

fn c4_lln_super() -> Result<Outcome> {
    let p = LlnParams {
        d: 1,
        alpha: 1.5,
        rho: 0.5,
        ns: vec![2000, 4000],
        ts: vec![1.0],
        geometry: Geometry { l: Some(1 << 15), l_factor: 0, reach: Reach::Half },
        tracers: 10,
        replicas: 20,
        seed: 404,
        threads: 0,
        tolerance: 0.1,
    };
    let r = lln_experiment(&p)?;
    let pts: Vec<String> = r
        .points
        .iter()
        .map(|q| format!("N={} mean {:.4} vs {:.4}, dev {:.3} +- {:.3}", q.n, q.estimate[0], q.predicted[0], q.deviation, q.deviation_se))
        .collect();
    outcome(r.passed, format!("{} (<= 0.1, non-increasing: {})", pts.join("; "), r.non_increasing))
}

fn c5_lln_critical() -> Result<Outcome> {
    let p = LlnParams {
        d: 1,
        alpha: 1.0,
        rho: 0.5,
        ns: vec![1 << 10, 1 << 12],
        ts: vec![1.0, 2.0],
        geometry: Geometry { l: None, l_factor: 8, reach: Reach::Scale },
        tracers: 10,
        replicas: 20,
        seed: 505,
        threads: 0,
        tolerance: 0.15,
    };
    let r = lln_experiment(&p)?;
    let pts: Vec<String> = r
        .points
        .iter()
        .filter(|q| q.t == 1.0)
        .map(|q| {
            format!(
                "N={} mean {:.3}: t-linear {:.3} dev {:.3}, literal {:.3} dev {:.3}",
                q.n,
                q.estimate[0],
                q.predicted[0],
                q.deviation,
                q.predicted_literal.as_ref().unwrap()[0],
                q.deviation_literal.unwrap()
            )
        })
        .collect();
    let ratios: Vec<String> = r.time_ratio.iter().map(|x| format!("{:.3}", x.unwrap())).collect();
    outcome(
        r.passed,
        format!(
            "{} (<= 0.15 t-linear, non-increasing: {}); mean(t=2)/mean(t=1) = [{}]",
            pts.join("; "),
            r.non_increasing,
            ratios.join(", ")
        ),
    )
}

fn c6_stable() -> Result<Outcome> {
    let p = CltParams {
        d: 1,
        alpha: 0.5,
        rho: 0.5,
        ns: vec![512, 1024],
        t: 1.0,
        direction: vec![1.0],
        betas: linspace(-0.5, 0.5, 11),
        geometry: Geometry { l: None, l_factor: 16, reach: Reach::Full },
        tracers: 10,
        replicas: 200,
        seed: 606,
        threads: 0,
    };
    let r = clt_experiment(&p)?;
    let pts: Vec<String> = r
        .points
        .iter()
        .map(|q| format!("N={}: {:.2} sigma, sup|ecf - cf| {:.4} +- {:.4}", q.n, q.distance.sup, q.raw_deviation, q.raw_se))
        .collect();
    outcome(r.passed, format!("{} (<= 3, non-increasing: {})", pts.join("; "), r.non_increasing))
}

fn c7_diffusive() -> Result<Outcome> {
    let p = CltParams {
        d: 2,
        alpha: 2.0,
        rho: 0.5,
        ns: vec![64],
        t: 1.0,
        direction: vec![1.0, 0.0],
        betas: vec![],
        geometry: Geometry { l: Some(512), l_factor: 0, reach: Reach::Scale },
        tracers: 100,
        replicas: 5,
        seed: 707,
        threads: 0,
    };
    let r = diffusive_experiment(&p, 0.15)?;
    let parts: Vec<String> = (0..2)
        .map(|j| {
            format!(
                "Var_{} {:.3} [{:.3}, {:.3}] vs {:.3} ({:.1}%)",
                j + 1,
                r.variance[j],
                r.ci[j].0,
                r.ci[j].1,
                r.predicted[j],
                100.0 * r.relative_error[j]
            )
        })
        .collect();
    outcome(r.passed, format!("{} (<= 15%)", parts.join("; ")))
}

fn c8_occupation() -> Result<Outcome> {
    let horizons: Vec<f64> = (4..=10).map(|k| 2f64.powi(k)).collect();
    let mut ok = true;
    let mut lines = Vec::new();
    for (d, alpha, l, sites, replicas, tol) in [(1usize, 1.5, 2048u64, 8usize, 500usize, 0.15), (3, 2.0, 32, 64, 50, 0.1)] {
        let p = OccupationParams {
            d,
            alpha,
            rho: 0.5,
            l,
            horizons: horizons.clone(),
            sites,
            replicas,
            seed: 808 + d as u64,
            threads: 0,
            tolerance: tol,
        };
        let r = occupation_experiment(&p)?;
        ok &= r.passed;
        lines.push(format!(
            "d={d} alpha={alpha}: exponent {:.3} [{:.3}, {:.3}] vs {:.3} (+- {tol}), exact torus duality slope {:.3}",
            r.fit.exponent, r.fit.ci.0, r.fit.ci.1, r.fit.predicted, r.duality_exponent
        ));
    }
    outcome(ok, lines.join("; "))
}

fn c9_rwalk() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for d in [1, 2] {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let f = small_theta_exponent(&WalkSpec::new(d, alpha)?)?;
            worst = worst.max((f.exponent - alpha).abs());
        }
    }
    let mut mismatches = Vec::new();
    for d in [1, 2, 3] {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let c = classify(&WalkSpec::new(d, alpha)?);
            if c.class != predicted_class(d, alpha) || !c.corroborated {
                mismatches.push(format!("d={d} alpha={alpha}"));
            }
        }
    }
    let mut res: f64 = 0.0;
    for (d, alpha, l) in [(1, 0.5, 12), (1, 1.5, 16), (2, 1.0, 6), (2, 2.0, 8)] {
        res = res.max(torus_resolvent_residual(d, alpha, l, 0.3)?);
    }
    outcome(
        worst <= 0.05 && mismatches.is_empty() && res <= 1e-8,
        format!(
            "exponent max error {worst:.4} (<= 0.05); classification mismatches {mismatches:?}; resolvent residual {res:.2e} (<= 1e-8)"
        ),
    )
}

fn c10_kernel() -> Result<Outcome> {
    let mut sym: f64 = 0.0;
    let mut rate: f64 = 0.0;
    for d in 1..=3 {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let spec = KernelSpec::new(d, alpha, 1)?;
            let r = if d == 3 { 20 } else { 100 };
            for_each_in_ball(d, r, |c| {
                if c[..d].iter().all(|x| *x == 0) {
                    return;
                }
                let z = LatticeVector::new(&c[..d]).unwrap();
                let mut m = *c;
                for x in m.iter_mut() {
                    *x = -*x;
                }
                let mz = LatticeVector::new(&m[..d]).unwrap();
                let lhs = 0.5 * (eval_p(&z, &spec).unwrap() + eval_p(&mz, &spec).unwrap());
                let rhs = spec.radial(z.norm2());
                sym = sym.max((lhs - rhs).abs() / rhs);
            });
            rate = rate.max((total_rate(&spec).value - s_star(&spec).value).abs() / s_star(&spec).value);
        }
    }
    let spec = KernelSpec::new(1, 1.0, 1)?;
    let n = 1u64 << 16;
    let raw = truncated_drift_sum(n, &spec)?[0] / (n as f64).ln();
    // Limit of the ratio from the geometric grid up to 2^16.
    let grid: Vec<u64> = (8..=16).map(|k| 1u64 << k).collect();
    let h: Vec<f64> = grid.iter().map(|&g| (g as f64).ln()).collect();
    let y: Vec<f64> = grid
        .iter()
        .map(|&g| ball_sums(&spec, g, &[BallWeight::Drift]).unwrap()[0] / (g as f64).ln())
        .collect();
    let lim = richardson_limit(&h, &y, &[1.0, 2.0]);
    let g = gamma_d(&spec)?;
    outcome(
        sym <= 1e-10 && rate <= 1e-10 && (lim.value - 2.0).abs() <= 1e-2,
        format!(
            "symmetric-part identity {sym:.1e}, |total_rate - s*| / s* {rate:.1e} (<= 1e-10); drift/log N at 2^16 raw {raw:.4}, extrapolated over N <= 2^16 {:.5} (2 +- 1e-2); gamma_1 {:.5} +- {:.1e}",
            lim.value, g.value, g.err
        ),
    )
}

type Criterion = (usize, &'static str, u64, fn() -> Result<Outcome>);

const CRITERIA: [Criterion; 10] = [
    (1, "exact stationarity on tiny tori", 30, c1_oracle),
    (2, "exponential martingale has mean one", 120, c2_martingale),
    (3, "free particle characteristic function", 120, c3_free),
    (4, "law of large numbers, alpha > 1", 600, c4_lln_super),
    (5, "law of large numbers, alpha = 1", 600, c5_lln_critical),
    (6, "stable limit, alpha < 1", 1200, c6_stable),
    (7, "diffusive limit, alpha = 2", 1800, c7_diffusive),
    (8, "occupation-time variance scaling", 1200, c8_occupation),
    (9, "random-walk diagnostics", 300, c9_rwalk),
    (10, "kernel identities", 60, c10_kernel),
];

#[test]
fn acceptance_criteria() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    let _ = writeln!(std::io::stdout().lock());
    for (id, title, budget, f) in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let res = f();
        let took = start.elapsed();
        let (passed, detail) = match res {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = took <= Duration::from_secs(budget);
        let ok = passed && in_time;
        // Written to the handle directly so the line shows without --nocapture.
        let _ = writeln!(
            std::io::stdout().lock(),
            "criterion {id:>2} {} {title}: {detail} [{:.1}s of {budget}s]",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        if !ok {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
