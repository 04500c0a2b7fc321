//! Continuous-time exclusion process on a periodic box with tracked (tagged) particles.
//!
//! Events are generated by thinning: every particle proposes jumps at the sampler's
//! constant rate, and a proposal onto an occupied site is discarded. Coordinates stay
//! absolute; the environment seen from a tracer is read through its current site.
//!
//! Occupation integrals `int (rho - xi_s(z)) ds` are integrated exactly and lazily: a watch
//! is only touched when its site changes occupancy or its tracer moves.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernel::{Dynamics, JumpSampler, TailPolicy};
use crate::lattice::{LatticeVector, MAX_DIM};
use crate::limits::{rescaled_endpoint, RegimeScaling};
use crate::rng::StreamRng;

type Site = [i64; MAX_DIM];

const NONE: u32 = u32::MAX;
const MAX_SITES: u64 = 1 << 30;

/// Occupancy of a periodic box of side `l` plus particle positions and tracer displacements.
#[derive(Clone, Debug)]
pub struct Configuration {
    d: usize,
    l: i64,
    occ: Vec<u64>,
    /// Particle positions; the first `tracers` entries are tracked, entry 0 is the tagged one.
    pos: Vec<Site>,
    tracers: usize,
    disp: Vec<Site>,
    clock: f64,
}

fn check_box(d: usize, l: u64) -> Result<()> {
    if !(1..=MAX_DIM).contains(&d) {
        return Err(Error::config(format!("dimension {d} outside 1..={MAX_DIM}")));
    }
    if l < 1 || (l as f64).powi(d as i32) > MAX_SITES as f64 {
        return Err(Error::resource(format!("box of side {l} in d = {d} is too large")));
    }
    Ok(())
}

/// Evenly spread starting sites for `count` tracers; tracer 0 sits at the origin.
fn tracer_sites(d: usize, l: i64, count: usize) -> Vec<Site> {
    let mut m = 1i64;
    while (m as f64).powi(d as i32) < count as f64 {
        m += 1;
    }
    let step = (l / m).max(1);
    (0..count)
        .map(|k| {
            let mut s = [0; MAX_DIM];
            let mut r = k as i64;
            for c in s.iter_mut().take(d) {
                *c = (r % m) * step;
                r /= m;
            }
            s
        })
        .collect()
}

impl Configuration {
    /// Bernoulli(`rho`) occupation of every site, conditioned on the tracer sites being occupied.
    pub fn init_equilibrium<R: Rng + ?Sized>(
        d: usize,
        l: u64,
        rho: f64,
        tracers: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_box(d, l)?;
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::config(format!("density {rho} outside [0, 1]")));
        }
        let li = l as i64;
        let sites = l.pow(d as u32) as usize;
        if tracers == 0 || tracers > sites {
            return Err(Error::config("need between 1 and L^d tracers"));
        }
        let tsites = tracer_sites(d, li, tracers);
        let mut cfg = Self::empty(d, li);
        let mut pos = tsites.clone();
        for s in &tsites {
            cfg.set(cfg.index(s));
        }
        for idx in 0..sites {
            let occupied = rho >= 1.0 || (rho > 0.0 && rng.random::<f64>() < rho);
            if occupied && !cfg.bit(idx) {
                cfg.set(idx);
                pos.push(cfg.site_of(idx));
            }
        }
        cfg.pos = pos;
        cfg.tracers = tracers;
        cfg.disp = vec![[0; MAX_DIM]; tracers];
        Ok(cfg)
    }

    /// Configuration with particles at `sites`; the first `tracers` of them are tracked.
    pub fn from_occupied(d: usize, l: u64, sites: &[Site], tracers: usize) -> Result<Self> {
        check_box(d, l)?;
        if tracers == 0 || tracers > sites.len() {
            return Err(Error::config("need between 1 and len(sites) tracers"));
        }
        let mut cfg = Self::empty(d, l as i64);
        for s in sites {
            let w = cfg.wrap(s);
            let idx = cfg.index(&w);
            if cfg.bit(idx) {
                return Err(Error::config(format!("site {s:?} listed twice")));
            }
            cfg.set(idx);
            cfg.pos.push(w);
        }
        cfg.tracers = tracers;
        cfg.disp = vec![[0; MAX_DIM]; tracers];
        Ok(cfg)
    }

    fn empty(d: usize, l: i64) -> Self {
        let sites = (l as usize).pow(d as u32);
        Self {
            d,
            l,
            occ: vec![0; sites.div_ceil(64)],
            pos: Vec::new(),
            tracers: 0,
            disp: Vec::new(),
            clock: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> u64 {
        self.l as u64
    }

    pub fn sites(&self) -> usize {
        (self.l as usize).pow(self.d as u32)
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn n_particles(&self) -> usize {
        self.pos.len()
    }

    pub fn n_tracers(&self) -> usize {
        self.tracers
    }

    pub fn tagged_site(&self) -> LatticeVector {
        self.tracer_site(0)
    }

    pub fn tracer_site(&self, i: usize) -> LatticeVector {
        LatticeVector::from_array(self.d, self.pos[i])
    }

    /// Unwrapped displacement of the tagged particle.
    pub fn displacement(&self) -> LatticeVector {
        self.tracer_displacement(0)
    }

    pub fn tracer_displacement(&self, i: usize) -> LatticeVector {
        LatticeVector::from_array(self.d, self.disp[i])
    }

    #[inline]
    fn wrap(&self, s: &Site) -> Site {
        let mut w = *s;
        for c in w.iter_mut().take(self.d) {
            if *c < 0 || *c >= self.l {
                *c = c.rem_euclid(self.l);
            }
        }
        w
    }

    #[inline]
    fn index(&self, s: &Site) -> usize {
        (s[0] + self.l * (s[1] + self.l * s[2])) as usize
    }

    fn site_of(&self, mut idx: usize) -> Site {
        let l = self.l as usize;
        let mut s = [0; MAX_DIM];
        for c in s.iter_mut().take(self.d) {
            *c = (idx % l) as i64;
            idx /= l;
        }
        s
    }

    #[inline]
    fn bit(&self, idx: usize) -> bool {
        self.occ[idx >> 6] >> (idx & 63) & 1 == 1
    }

    #[inline]
    fn set(&mut self, idx: usize) {
        self.occ[idx >> 6] |= 1 << (idx & 63);
    }

    #[inline]
    fn clear(&mut self, idx: usize) {
        self.occ[idx >> 6] &= !(1 << (idx & 63));
    }

    /// Occupancy of an absolute site (wrapped into the box).
    pub fn occupied(&self, s: &[i64]) -> bool {
        let mut a = [0; MAX_DIM];
        a[..s.len()].copy_from_slice(s);
        self.bit(self.index(&self.wrap(&a)))
    }

    /// Environment seen from tracer `i`: `xi(z) = eta(x_i + z)`.
    pub fn environment(&self, i: usize, z: &LatticeVector) -> bool {
        let mut s = self.pos[i];
        for (c, dz) in s.iter_mut().zip(z.raw()) {
            *c += dz;
        }
        self.bit(self.index(&self.wrap(&s)))
    }

    /// Environment of tracer `i` over the max-norm window `|z|_inf <= r`, in lexicographic order.
    pub fn window(&self, i: usize, r: i64) -> Vec<bool> {
        let mut out = Vec::new();
        let lo = [-r, if self.d > 1 { -r } else { 0 }, if self.d > 2 { -r } else { 0 }];
        let hi = [r, if self.d > 1 { r } else { 0 }, if self.d > 2 { r } else { 0 }];
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let v = LatticeVector::from_array(self.d, [x, y, z]);
                    out.push(self.environment(i, &v));
                }
            }
        }
        out
    }

    /// Checks conservation of the particle count and occupancy of every particle site.
    pub fn check_invariants(&self) -> Result<()> {
        let bits: u64 = self.occ.iter().map(|w| w.count_ones() as u64).sum();
        if bits != self.pos.len() as u64 {
            return Err(Error::contract(format!(
                "{bits} occupied sites for {} particles",
                self.pos.len()
            )));
        }
        for p in &self.pos {
            if !self.bit(self.index(p)) {
                return Err(Error::contract(format!("particle site {p:?} is empty")));
            }
        }
        Ok(())
    }
}

/// One proposal of the thinned dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub particle: usize,
    /// Site of the particle before the proposal.
    pub site: Site,
    pub z: Site,
    pub accepted: bool,
    pub tagged: bool,
}

/// Where an occupation integral is taken.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WatchSite {
    /// `z` relative to tracer `tracer`.
    Relative { tracer: usize, z: Site },
    /// A fixed site of the box.
    Absolute(Site),
}

impl WatchSite {
    pub fn relative(tracer: usize, z: &LatticeVector) -> Self {
        WatchSite::Relative { tracer, z: z.raw() }
    }
}

#[derive(Clone, Debug)]
struct Watch {
    site: WatchSite,
    idx: usize,
    integral: f64,
    last: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub proposals: u64,
    pub accepted: u64,
    pub tracer_jumps: u64,
}

/// State of all tracers and watches at a checkpoint time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub time: f64,
    pub displacements: Vec<LatticeVector>,
    pub occupation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracerReport {
    pub displacement: LatticeVector,
    /// Accepted jumps of this tracer by jump vector.
    pub counters: Vec<(LatticeVector, u64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub horizon: f64,
    pub rho: f64,
    pub particles: usize,
    pub tracers: Vec<TracerReport>,
    pub watches: Vec<WatchSite>,
    pub occupation: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub counts: EventCounts,
}

impl RunReport {
    /// Tagged-particle displacement.
    pub fn displacement(&self) -> LatticeVector {
        self.tracers[0].displacement
    }

    /// `sum_z z N^z` for tracer `i`; equals its displacement.
    pub fn counter_sum(&self, i: usize) -> LatticeVector {
        let d = self.tracers[i].displacement.dim();
        let mut acc = [0i64; MAX_DIM];
        for (z, n) in &self.tracers[i].counters {
            for (a, c) in acc.iter_mut().zip(z.raw()) {
                *a += c * *n as i64;
            }
        }
        LatticeVector::from_array(d, acc)
    }

    /// Rescaled endpoint of tracer `i` under `scaling` at scale `n`, macroscopic time `t`.
    pub fn rescaled(&self, i: usize, n: u64, t: f64, scaling: &RegimeScaling) -> Result<Vec<f64>> {
        rescaled_endpoint(
            &self.tracers[i].displacement,
            self.horizon,
            t,
            n,
            self.rho,
            scaling,
        )
    }
}

/// A configuration evolving under a jump sampler with its own random stream.
pub struct Process<'s> {
    cfg: Configuration,
    sampler: &'s JumpSampler,
    rng: StreamRng,
    rho: f64,
    total_rate: f64,
    watches: Vec<Watch>,
    head: Vec<u32>,
    next: Vec<u32>,
    tracer_watches: Vec<Vec<u32>>,
    log: Option<Vec<Event>>,
    counters: Vec<BTreeMap<Site, u64>>,
    counts: EventCounts,
}

impl<'s> Process<'s> {
    /// `rho` is the reference density in the occupation integrands.
    pub fn new(cfg: Configuration, sampler: &'s JumpSampler, rng: StreamRng, rho: f64) -> Result<Self> {
        if sampler.dim() != cfg.d {
            return Err(Error::config("sampler and box dimensions differ"));
        }
        if sampler.policy() == TailPolicy::Truncate && (cfg.l as u64) < 2 * sampler.extent() {
            return Err(Error::config(format!(
                "box side {} is smaller than twice the jump range {}",
                cfg.l,
                sampler.extent()
            )));
        }
        if cfg.pos.is_empty() {
            return Err(Error::config("no particles"));
        }
        let total_rate = cfg.pos.len() as f64 * sampler.rate();
        let tracers = cfg.tracers;
        Ok(Self {
            cfg,
            sampler,
            rng,
            rho,
            total_rate,
            watches: Vec::new(),
            head: Vec::new(),
            next: Vec::new(),
            tracer_watches: vec![Vec::new(); tracers],
            log: None,
            counters: vec![BTreeMap::new(); tracers],
            counts: EventCounts::default(),
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.cfg
    }

    pub fn dynamics(&self) -> Dynamics {
        self.sampler.dynamics()
    }

    /// Starts recording every proposal.
    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn log(&self) -> Option<&[Event]> {
        self.log.as_deref()
    }

    pub fn counts(&self) -> EventCounts {
        self.counts
    }

    /// Adds an occupation watch starting at the current clock.
    pub fn add_watch(&mut self, site: WatchSite) -> Result<usize> {
        if self.head.is_empty() {
            self.head = vec![NONE; self.cfg.sites()];
        }
        let idx = match site {
            WatchSite::Relative { tracer, z } => {
                if tracer >= self.cfg.tracers {
                    return Err(Error::config(format!("no tracer {tracer}")));
                }
                self.relative_index(tracer, &z)
            }
            WatchSite::Absolute(s) => self.cfg.index(&self.cfg.wrap(&s)),
        };
        let w = self.watches.len() as u32;
        self.watches.push(Watch {
            site,
            idx,
            integral: 0.0,
            last: self.cfg.clock,
        });
        self.next.push(NONE);
        self.link(w);
        if let WatchSite::Relative { tracer, .. } = site {
            self.tracer_watches[tracer].push(w);
        }
        Ok(w as usize)
    }

    fn relative_index(&self, tracer: usize, z: &Site) -> usize {
        let mut s = self.cfg.pos[tracer];
        for (c, dz) in s.iter_mut().zip(z) {
            *c += dz;
        }
        self.cfg.index(&self.cfg.wrap(&s))
    }

    fn link(&mut self, w: u32) {
        let idx = self.watches[w as usize].idx;
        self.next[w as usize] = self.head[idx];
        self.head[idx] = w;
    }

    fn unlink(&mut self, w: u32) {
        let idx = self.watches[w as usize].idx;
        let mut cur = self.head[idx];
        if cur == w {
            self.head[idx] = self.next[w as usize];
            return;
        }
        while cur != NONE {
            let nx = self.next[cur as usize];
            if nx == w {
                self.next[cur as usize] = self.next[w as usize];
                return;
            }
            cur = nx;
        }
    }

    #[inline]
    fn flush(&mut self, w: u32, t: f64) {
        let watch = &mut self.watches[w as usize];
        let xi = if self.cfg.bit(watch.idx) { 1.0 } else { 0.0 };
        watch.integral += (self.rho - xi) * (t - watch.last);
        watch.last = t;
    }

    fn flush_site(&mut self, idx: usize, t: f64) {
        let mut w = self.head[idx];
        while w != NONE {
            self.flush(w, t);
            w = self.next[w as usize];
        }
    }

    fn flush_all(&mut self, t: f64) {
        for w in 0..self.watches.len() as u32 {
            self.flush(w, t);
        }
    }

    /// Occupation integrals of all watches up to the current clock.
    pub fn occupation(&mut self) -> Vec<f64> {
        let t = self.cfg.clock;
        self.flush_all(t);
        self.watches.iter().map(|w| w.integral).collect()
    }

    /// Proposes jump `z` for `particle` at the current clock and applies it if allowed.
    pub fn apply_jump(&mut self, particle: usize, z: Site) -> Event {
        let t = self.cfg.clock;
        let src = self.cfg.pos[particle];
        let mut dst = src;
        for (c, dz) in dst.iter_mut().zip(z) {
            *c += dz;
        }
        let dst = self.cfg.wrap(&dst);
        let di = self.cfg.index(&dst);
        let tagged = particle < self.cfg.tracers;
        self.counts.proposals += 1;
        let accepted = !self.cfg.bit(di);
        if accepted {
            let si = self.cfg.index(&src);
            let watched = !self.head.is_empty();
            if watched {
                self.flush_site(si, t);
                self.flush_site(di, t);
                if tagged {
                    for k in 0..self.tracer_watches[particle].len() {
                        let w = self.tracer_watches[particle][k];
                        self.flush(w, t);
                    }
                }
            }
            self.cfg.clear(si);
            self.cfg.set(di);
            self.cfg.pos[particle] = dst;
            self.counts.accepted += 1;
            if tagged {
                self.counts.tracer_jumps += 1;
                for (a, dz) in self.cfg.disp[particle].iter_mut().zip(z) {
                    *a += dz;
                }
                *self.counters[particle].entry(z).or_insert(0) += 1;
                if watched {
                    for k in 0..self.tracer_watches[particle].len() {
                        let w = self.tracer_watches[particle][k];
                        self.unlink(w);
                        let WatchSite::Relative { z: rel, .. } = self.watches[w as usize].site else {
                            unreachable!()
                        };
                        self.watches[w as usize].idx = self.relative_index(particle, &rel);
                        self.link(w);
                    }
                }
            }
            debug_assert!(self.cfg.bit(self.cfg.index(&self.cfg.pos[0])));
        }
        let ev = Event {
            time: t,
            particle,
            site: src,
            z,
            accepted,
            tagged,
        };
        if let Some(log) = &mut self.log {
            log.push(ev);
        }
        ev
    }

    /// Advances the clock to the next proposal and performs it.
    pub fn step(&mut self) -> Event {
        let dt: f64 = self.rng.sample::<f64, _>(Exp1) / self.total_rate;
        self.cfg.clock += dt;
        self.propose()
    }

    #[inline]
    fn propose(&mut self) -> Event {
        let particle = self.rng.random_range(0..self.cfg.pos.len());
        let z = self.sampler.sample(&mut self.rng);
        self.apply_jump(particle, z)
    }

    fn checkpoint(&mut self, time: f64) -> Checkpoint {
        self.flush_all(time);
        Checkpoint {
            time,
            displacements: (0..self.cfg.tracers)
                .map(|i| self.cfg.tracer_displacement(i))
                .collect(),
            occupation: self.watches.iter().map(|w| w.integral).collect(),
        }
    }

    /// Runs until the clock reaches `horizon`, recording state at each checkpoint time.
    pub fn run_until(&mut self, horizon: f64, checkpoints: &[f64]) -> Result<Vec<Checkpoint>> {
        if !(horizon >= self.cfg.clock) {
            return Err(Error::contract(format!(
                "horizon {horizon} precedes the clock {}",
                self.cfg.clock
            )));
        }
        let mut marks: Vec<f64> = checkpoints
            .iter()
            .copied()
            .filter(|&c| c >= self.cfg.clock && c <= horizon)
            .collect();
        marks.sort_by(f64::total_cmp);
        let mut out = Vec::with_capacity(marks.len());
        let mut next_mark = 0;
        loop {
            let dt: f64 = self.rng.sample::<f64, _>(Exp1) / self.total_rate;
            let t = self.cfg.clock + dt;
            while next_mark < marks.len() && marks[next_mark] <= t.min(horizon) {
                out.push(self.checkpoint(marks[next_mark]));
                next_mark += 1;
            }
            if t >= horizon {
                self.cfg.clock = horizon;
                break;
            }
            self.cfg.clock = t;
            self.propose();
        }
        self.flush_all(horizon);
        Ok(out)
    }

    /// Final report after [`Process::run_until`].
    pub fn report(&mut self, checkpoints: Vec<Checkpoint>) -> RunReport {
        let occupation = self.occupation();
        let d = self.cfg.d;
        RunReport {
            horizon: self.cfg.clock,
            rho: self.rho,
            particles: self.cfg.pos.len(),
            tracers: (0..self.cfg.tracers)
                .map(|i| TracerReport {
                    displacement: self.cfg.tracer_displacement(i),
                    counters: self.counters[i]
                        .iter()
                        .map(|(z, n)| (LatticeVector::from_array(d, *z), *n))
                        .collect(),
                })
                .collect(),
            watches: self.watches.iter().map(|w| w.site).collect(),
            occupation,
            checkpoints,
            counts: self.counts,
        }
    }
}

/// Runs `cfg` to physical time `t_phys` with occupation watches at `watch_sites`.
pub fn run(
    cfg: Configuration,
    sampler: &JumpSampler,
    rng: StreamRng,
    rho: f64,
    t_phys: f64,
    watch_sites: &[WatchSite],
    checkpoints: &[f64],
) -> Result<RunReport> {
    let mut p = Process::new(cfg, sampler, rng, rho)?;
    for w in watch_sites {
        p.add_watch(*w)?;
    }
    let cps = p.run_until(t_phys, checkpoints)?;
    Ok(p.report(cps))
}
