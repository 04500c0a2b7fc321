//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;

use longjump::experiment::{Geometry, Reach};

/// Every accepted key with its default, in manifest order.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("d", "1", "lattice dimension (1..=3)"),
    ("alpha", "1.5", "tail exponent in (0, 2]"),
    ("rho", "0.5", "particle density in [0, 1]"),
    ("N", "256", "scale parameter(s), comma separated"),
    ("t", "1", "macroscopic time(s), comma separated"),
    ("L", "0", "torus side; 0 means L_factor * N"),
    ("L_factor", "8", "torus side per unit of N when L = 0"),
    ("r_max", "N", "jump range: an integer, N, half (L/2) or full (exact kernel)"),
    ("tracers", "1", "tracked particles per replica"),
    ("replicas", "100", "independent replicas"),
    ("seed", "1", "master seed"),
    ("beta_grid", "-1:1:11", "lo:hi:count or a comma list"),
    ("direction", "1", "projection direction a, comma separated (padded with zeros)"),
    ("horizons", "16,32,64,128,256", "occupation horizons, comma separated"),
    ("sites", "8", "watched sites per replica (occupation, simulate)"),
    ("tolerance", "0.1", "gate for lln (relative) and occupation (exponent)"),
    ("threads", "0", "worker threads; 0 uses all cores"),
    ("out", "out", "output directory"),
];

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(key: &str, value: &str, want: &str) -> UsageError {
    UsageError(format!("{key}: cannot read {value:?} as {want}"))
}

/// Raw key-value pairs; later assignments override earlier ones.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    pub values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn defaults() -> Self {
        let values = KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect();
        Self { values }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        if !KEYS.iter().any(|(k, _, _)| *k == key) {
            return Err(UsageError(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn assign(&mut self, pair: &str) -> Result<(), UsageError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| UsageError(format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v)
    }

    /// Lines of `key = value`; blank lines and `#` comments are skipped.
    pub fn merge_text(&mut self, text: &str) -> Result<(), UsageError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            self.assign(line)
                .map_err(|e| UsageError(format!("line {}: {}", i + 1, e.0)))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|(k, _, _)| format!("{k} = {}\n", self.values[*k]))
            .collect()
    }

    fn get(&self, key: &str) -> &str {
        &self.values[key]
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub d: usize,
    pub alpha: f64,
    pub rho: f64,
    pub n: Vec<u64>,
    pub t: Vec<f64>,
    pub geometry: Geometry,
    pub tracers: usize,
    pub replicas: usize,
    pub seed: u64,
    pub betas: Vec<f64>,
    pub direction: Vec<f64>,
    pub horizons: Vec<f64>,
    pub sites: usize,
    pub tolerance: f64,
    pub threads: usize,
    pub out: String,
}

fn num<T: std::str::FromStr>(key: &str, v: &str, want: &str) -> Result<T, UsageError> {
    v.parse().map_err(|_| bad(key, v, want))
}

fn list<T: std::str::FromStr>(key: &str, v: &str, want: &str) -> Result<Vec<T>, UsageError> {
    let out: Vec<T> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| num(key, s.trim(), want))
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(bad(key, v, want));
    }
    Ok(out)
}

fn beta_grid(v: &str) -> Result<Vec<f64>, UsageError> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = num("beta_grid", parts[0], "a number")?;
        let hi: f64 = num("beta_grid", parts[1], "a number")?;
        let n: usize = num("beta_grid", parts[2], "a count")?;
        if n < 2 || !(hi > lo) {
            return Err(UsageError("beta_grid: need lo < hi and count >= 2".into()));
        }
        let mut g: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        // Exact zero when the grid is symmetric.
        for b in g.iter_mut() {
            if b.abs() < 1e-12 * (hi - lo) {
                *b = 0.0;
            }
        }
        Ok(g)
    } else {
        list("beta_grid", v, "numbers")
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, UsageError> {
        let d: usize = num("d", raw.get("d"), "an integer")?;
        if !(1..=3).contains(&d) {
            return Err(UsageError(format!("d: must be 1, 2 or 3, got {d}")));
        }
        let alpha: f64 = num("alpha", raw.get("alpha"), "a number")?;
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(UsageError(format!("alpha: must lie in (0, 2], got {alpha}")));
        }
        let rho: f64 = num("rho", raw.get("rho"), "a number")?;
        if !(0.0..=1.0).contains(&rho) {
            return Err(UsageError(format!("rho: must lie in [0, 1], got {rho}")));
        }
        let n: Vec<u64> = list("N", raw.get("N"), "positive integers")?;
        if n.iter().any(|x| *x < 2) {
            return Err(UsageError("N: every scale must be at least 2".into()));
        }
        let t: Vec<f64> = list("t", raw.get("t"), "numbers")?;
        if t.iter().any(|x| !(*x > 0.0)) {
            return Err(UsageError("t: times must be positive".into()));
        }
        let l: u64 = num("L", raw.get("L"), "an integer")?;
        let l_factor: u64 = num("L_factor", raw.get("L_factor"), "an integer")?;
        let reach = Reach::parse(raw.get("r_max")).ok_or_else(|| bad("r_max", raw.get("r_max"), "an integer, N, half or full"))?;
        let geometry = Geometry {
            l: (l > 0).then_some(l),
            l_factor,
            reach,
        };
        for &scale in &n {
            let side = geometry.side(scale);
            if side < 2 {
                return Err(UsageError(format!("L: torus side {side} at N = {scale} is too small")));
            }
            let (r, _) = geometry.policy(scale);
            if r == 0 {
                return Err(UsageError(format!("r_max: jump range is 0 at N = {scale}")));
            }
            if 2 * r > side {
                return Err(UsageError(format!(
                    "r_max: need L >= 2 r_max, got L = {side} and r_max = {r} at N = {scale}"
                )));
            }
        }
        let tracers: usize = num("tracers", raw.get("tracers"), "an integer")?;
        let replicas: usize = num("replicas", raw.get("replicas"), "an integer")?;
        if tracers == 0 || replicas == 0 {
            return Err(UsageError("tracers and replicas must be positive".into()));
        }
        let mut direction: Vec<f64> = list("direction", raw.get("direction"), "numbers")?;
        if direction.len() > d {
            return Err(UsageError(format!("direction: {} components for d = {d}", direction.len())));
        }
        direction.resize(d, 0.0);
        let horizons: Vec<f64> = list("horizons", raw.get("horizons"), "numbers")?;
        if horizons.iter().any(|x| !(*x > 0.0)) || horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(UsageError("horizons: must be positive and increasing".into()));
        }
        Ok(Self {
            d,
            alpha,
            rho,
            n,
            t,
            geometry,
            tracers,
            replicas,
            seed: num("seed", raw.get("seed"), "an integer")?,
            betas: beta_grid(raw.get("beta_grid"))?,
            direction,
            horizons,
            sites: num("sites", raw.get("sites"), "an integer")?,
            tolerance: num("tolerance", raw.get("tolerance"), "a number")?,
            threads: num("threads", raw.get("threads"), "an integer")?,
            out: raw.get("out").to_string(),
        })
    }

    /// Regime caveats for the tagged-particle subcommands.
    pub fn warnings(&self, cmd: &str) -> Vec<String> {
        let mut w = Vec::new();
        if !matches!(cmd, "simulate" | "lln" | "clt") {
            return w;
        }
        if self.alpha == 2.0 && self.d == 1 {
            w.push("alpha = 2 limit theorems are stated for d >= 2; simulating anyway".into());
        }
        if self.d == 1 && (1.5..=2.0).contains(&self.alpha) {
            w.push("d = 1 with 3/2 <= alpha <= 2 is an open case; results are not asserted".into());
        }
        if cmd == "clt" && self.alpha < 2.0 && self.geometry.reach != Reach::Full {
            w.push("the stable limit needs jumps far beyond N; a truncated kernel changes it (use r_max=full)".into());
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let c = ExperimentConfig::from_raw(&RawConfig::defaults()).unwrap();
        assert_eq!(c.n, vec![256]);
        assert_eq!(c.betas.len(), 11);
        assert_eq!(c.betas[5], 0.0);
        assert_eq!(c.geometry.policy(256).0, 256);
        assert!(c.warnings("oracle").is_empty());
        assert_eq!(c.warnings("clt").len(), 2);
    }

    #[test]
    fn text_and_overrides() {
        let mut r = RawConfig::defaults();
        r.merge_text("# comment\nd = 2\n\nalpha=2 # trailing\nN = 16, 32\n").unwrap();
        r.assign("direction=0,1").unwrap();
        let c = ExperimentConfig::from_raw(&r).unwrap();
        assert_eq!((c.d, c.alpha), (2, 2.0));
        assert_eq!(c.n, vec![16, 32]);
        assert_eq!(c.direction, vec![0.0, 1.0]);
        let mut again = RawConfig::defaults();
        again.merge_text(&r.to_text()).unwrap();
        assert_eq!(again.values, r.values);
    }

    #[test]
    fn field_level_errors() {
        let mut r = RawConfig::defaults();
        assert!(r.assign("bogus=1").unwrap_err().0.contains("bogus"));
        r.assign("alpha=3").unwrap();
        assert!(ExperimentConfig::from_raw(&r).unwrap_err().0.starts_with("alpha"));
        let mut r = RawConfig::defaults();
        r.merge_text("L = 100\nr_max = 60").unwrap();
        assert!(ExperimentConfig::from_raw(&r).unwrap_err().0.starts_with("r_max"));
        let mut r = RawConfig::defaults();
        r.assign("horizons=4,2").unwrap();
        assert!(ExperimentConfig::from_raw(&r).is_err());
    }
}
