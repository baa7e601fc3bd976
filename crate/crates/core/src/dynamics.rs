//! Weighted characteristic particles for the Vlasov-Poisson system.
//!
//! Each particle carries a conserved phase-space density value `f_p` and a
//! conserved phase-space volume `omega_p`, so mass `sum omega_p f_p` and the
//! Casimir `sum omega_p Q(f_p)` are invariant by construction. Two backends
//! move the particles: an exact spherically symmetric one in `(r, w, L)` and
//! a small-N softened 3D one.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::casimir::CasimirModel;
use crate::error::{Error, Result};
use crate::numerics::brent_root;
use crate::steadystate::{ScalingTransform, SteadyStateProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Radial,
    Cartesian3D,
}

impl Backend {
    fn code(self) -> u32 {
        match self {
            Backend::Radial => 0,
            Backend::Cartesian3D => 1,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        match c {
            0 => Ok(Backend::Radial),
            1 => Ok(Backend::Cartesian3D),
            _ => Err(Error::Format(format!("unknown backend code {c}"))),
        }
    }
}

/// Spherical shells: radius, radial velocity and squared angular momentum.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RadialParticles {
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    pub l: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CartesianParticles {
    pub x: Vec<[f64; 3]>,
    pub v: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coordinates {
    Radial(RadialParticles),
    Cartesian(CartesianParticles),
}

/// Discrete representation of `f(t)`.
///
/// Sums over particles are always taken in index order, so conserved
/// quantities come out bit-identical from step to step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub time: f64,
    pub coords: Coordinates,
    /// Phase-space volume per particle.
    pub omega: Vec<f64>,
    /// Phase-space density value per particle.
    pub f: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn radial(r: Vec<f64>, w: Vec<f64>, l: Vec<f64>, omega: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let e = Self { time: 0.0, coords: Coordinates::Radial(RadialParticles { r, w, l }), omega, f };
        e.validate()?;
        Ok(e)
    }

    pub fn cartesian(x: Vec<[f64; 3]>, v: Vec<[f64; 3]>, omega: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let e = Self { time: 0.0, coords: Coordinates::Cartesian(CartesianParticles { x, v }), omega, f };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.omega.len();
        let coords_ok = match &self.coords {
            Coordinates::Radial(p) => p.r.len() == n && p.w.len() == n && p.l.len() == n,
            Coordinates::Cartesian(p) => p.x.len() == n && p.v.len() == n,
        };
        if !coords_ok || self.f.len() != n {
            return Err(Error::Usage("particle columns have different lengths".into()));
        }
        if self.omega.iter().any(|&w| !(w > 0.0)) || self.f.iter().any(|&f| !(f >= 0.0)) {
            return Err(Error::Usage("particle weights must be positive and f-values nonnegative".into()));
        }
        if let Coordinates::Radial(p) = &self.coords {
            if p.r.iter().any(|&r| !(r >= 0.0)) || p.l.iter().any(|&l| !(l >= 0.0)) {
                return Err(Error::Usage("radii and squared angular momenta must be nonnegative".into()));
            }
        }
        Ok(())
    }

    pub fn backend(&self) -> Backend {
        match self.coords {
            Coordinates::Radial(_) => Backend::Radial,
            Coordinates::Cartesian(_) => Backend::Cartesian3D,
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.omega.iter().zip(&self.f).map(|(w, f)| w * f).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.omega.iter().zip(&self.f).map(|(w, f)| w * f).sum()
    }

    /// `sum omega_p Q(f_p)`.
    pub fn casimir(&self, model: &CasimirModel) -> f64 {
        self.omega.iter().zip(&self.f).map(|(w, &f)| w * model.q(f)).sum()
    }

    /// Squared speed of every particle.
    pub fn speeds_squared(&self) -> Vec<f64> {
        match &self.coords {
            Coordinates::Radial(p) => p
                .r
                .iter()
                .zip(&p.w)
                .zip(&p.l)
                .map(|((&r, &w), &l)| w * w + if l > 0.0 { l / (r * r) } else { 0.0 })
                .collect(),
            Coordinates::Cartesian(p) => p.v.iter().map(|v| dot(v, v)).collect(),
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.speeds_squared().iter().zip(self.omega.iter().zip(&self.f)).map(|(v2, (w, f))| 0.5 * w * f * v2).sum()
    }

    /// Distance of every particle from the origin.
    pub fn radii(&self) -> Vec<f64> {
        match &self.coords {
            Coordinates::Radial(p) => p.r.clone(),
            Coordinates::Cartesian(p) => p.x.iter().map(norm).collect(),
        }
    }

    /// Mass-weighted mean position (zero for the radial backend).
    pub fn centroid(&self) -> [f64; 3] {
        match &self.coords {
            Coordinates::Radial(_) => [0.0; 3],
            Coordinates::Cartesian(p) => {
                let mut c = [0.0; 3];
                let mut m = 0.0;
                for (x, (w, f)) in p.x.iter().zip(self.omega.iter().zip(&self.f)) {
                    let mp = w * f;
                    m += mp;
                    for k in 0..3 {
                        c[k] += mp * x[k];
                    }
                }
                c.map(|ck| ck / m)
            }
        }
    }

    /// Total momentum (zero for the radial backend).
    pub fn momentum(&self) -> [f64; 3] {
        match &self.coords {
            Coordinates::Radial(_) => [0.0; 3],
            Coordinates::Cartesian(p) => {
                let mut c = [0.0; 3];
                for (v, (w, f)) in p.v.iter().zip(self.omega.iter().zip(&self.f)) {
                    for k in 0..3 {
                        c[k] += w * f * v[k];
                    }
                }
                c
            }
        }
    }

    /// Maps the represented `f` to `A f(a x, b v)`: positions are divided
    /// by `a`, velocities by `b`, volumes scale by `(ab)^-3` and f-values
    /// by `A`.
    pub fn transformed(&self, amplitude: f64, a: f64, b: f64) -> Result<Self> {
        if !(amplitude > 0.0 && a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!("transform factors must be positive, got A = {amplitude}, a = {a}, b = {b}")));
        }
        let vol = (a * b).powi(-3);
        let coords = match &self.coords {
            Coordinates::Radial(p) => Coordinates::Radial(RadialParticles {
                r: p.r.iter().map(|r| r / a).collect(),
                w: p.w.iter().map(|w| w / b).collect(),
                l: p.l.iter().map(|l| l / (a * b).powi(2)).collect(),
            }),
            Coordinates::Cartesian(p) => Coordinates::Cartesian(CartesianParticles {
                x: p.x.iter().map(|x| x.map(|c| c / a)).collect(),
                v: p.v.iter().map(|v| v.map(|c| c / b)).collect(),
            }),
        };
        Ok(Self {
            time: self.time,
            coords,
            omega: self.omega.iter().map(|w| w * vol).collect(),
            f: if amplitude == 1.0 { self.f.clone() } else { self.f.iter().map(|f| f * amplitude).collect() },
        })
    }

    pub fn apply_scaling(&self, t: &ScalingTransform) -> Result<Self> {
        let (amp, a, b) = t.factors();
        self.transformed(amp, a, b)
    }

    /// Translates every particle by `shift` (3D only).
    pub fn shifted(&self, shift: [f64; 3]) -> Result<Self> {
        match &self.coords {
            Coordinates::Radial(_) => Err(Error::Usage("spatial shifts need the 3D backend".into())),
            Coordinates::Cartesian(p) => {
                let mut out = self.clone();
                out.coords = Coordinates::Cartesian(CartesianParticles {
                    x: p.x.iter().map(|x| [x[0] + shift[0], x[1] + shift[1], x[2] + shift[2]]).collect(),
                    v: p.v.clone(),
                });
                Ok(out)
            }
        }
    }

    /// Indices sorted by radius, ties broken by index.
    pub fn radial_order(&self) -> Vec<usize> {
        let radii = self.radii();
        let mut order: Vec<usize> = (0..radii.len()).collect();
        order.sort_by(|&i, &j| radii[i].total_cmp(&radii[j]).then(i.cmp(&j)));
        order
    }
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Mass interior to each particle in the shell model, `S_{p-1} + m_p / 2`
/// in radial order; the exact gradient of the shell potential energy.
pub fn shell_masses(radii: &[f64], masses: &[f64], order: &[usize]) -> Vec<f64> {
    let mut inner = vec![0.0; radii.len()];
    let mut s = 0.0;
    for &p in order {
        inner[p] = s + 0.5 * masses[p];
        s += masses[p];
    }
    inner
}

/// Shell-model potential energy `-sum m_p (S_{p-1} + m_p/2) / r_p`, which
/// equals `-1/2 int M(r)^2 / r^2 dr` for the step-function `M`.
pub fn shell_potential_energy(radii: &[f64], masses: &[f64], order: &[usize]) -> f64 {
    let mut s = 0.0;
    let mut w = 0.0;
    for &p in order {
        w -= masses[p] * (s + 0.5 * masses[p]) / radii[p];
        s += masses[p];
    }
    w
}

/// Softened pairwise energy `-1/2 sum_{p != q} m_p m_q / sqrt(|x_p - x_q|^2 + eps^2)`.
pub fn pairwise_potential_energy(x: &[[f64; 3]], masses: &[f64], softening: f64) -> f64 {
    let eps2 = softening * softening;
    let partial: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in (i + 1)..x.len() {
                let d = [x[i][0] - x[j][0], x[i][1] - x[j][1], x[i][2] - x[j][2]];
                s += masses[j] / (dot(&d, &d) + eps2).sqrt();
            }
            masses[i] * s
        })
        .collect();
    -partial.iter().sum::<f64>()
}

fn pairwise_accelerations(x: &[[f64; 3]], masses: &[f64], softening: f64) -> Vec<[f64; 3]> {
    let eps2 = softening * softening;
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut a = [0.0; 3];
            for j in 0..x.len() {
                if j == i {
                    continue;
                }
                let d = [x[j][0] - x[i][0], x[j][1] - x[i][1], x[j][2] - x[i][2]];
                let r2 = dot(&d, &d) + eps2;
                let inv = masses[j] / (r2 * r2.sqrt());
                for k in 0..3 {
                    a[k] += inv * d[k];
                }
            }
            a
        })
        .collect()
}

/// How the radial backend splits the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialScheme {
    /// Exact force-free 3D motion in the drift (centrifugal term included);
    /// kicks carry gravity only. Robust near the centre.
    FreeStreaming,
    /// Drift `r += w dt`, kick with `L/r^3 - M/r^2`; circular orbits in a
    /// static field are exact. Radial infall through the origin is reflected.
    CentrifugalKick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldMode {
    /// Field recomputed from the particles every step.
    SelfConsistent,
    /// Field of a fixed steady-state profile.
    Frozen,
}

/// Leapfrog (kick-drift-kick) settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: RadialScheme,
    /// Plummer softening length of the 3D backend.
    pub softening: f64,
    /// Steps between monitor records.
    pub cadence: usize,
    pub field: FieldMode,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_end: 1.0,
            scheme: RadialScheme::FreeStreaming,
            softening: 0.0,
            cadence: 1,
            field: FieldMode::SelfConsistent,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Usage(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::Usage(format!("end time must be nonnegative, got {}", self.t_end)));
        }
        if !(self.softening >= 0.0) {
            return Err(Error::Usage(format!("softening must be nonnegative, got {}", self.softening)));
        }
        if self.cadence == 0 {
            return Err(Error::Usage("monitor cadence must be at least one step".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Leapfrog integrator for either backend.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub config: IntegratorConfig,
    frozen: Option<Arc<SteadyStateProfile>>,
    order: Vec<usize>,
}

impl Integrator {
    /// `frozen` must be given exactly when the config asks for a frozen field.
    pub fn new(config: IntegratorConfig, frozen: Option<SteadyStateProfile>) -> Result<Self> {
        config.validate()?;
        match (config.field, &frozen) {
            (FieldMode::Frozen, None) => return Err(Error::Usage("frozen-field mode needs a profile".into())),
            (FieldMode::SelfConsistent, Some(_)) => {
                return Err(Error::Usage("a frozen profile was given for a self-consistent run".into()))
            }
            _ => {}
        }
        Ok(Self { config, frozen: frozen.map(Arc::new), order: Vec::new() })
    }

    pub fn frozen_profile(&self) -> Option<&SteadyStateProfile> {
        self.frozen.as_deref()
    }

    fn sorted(&mut self, r: &[f64]) -> &[usize] {
        if self.order.len() != r.len() {
            self.order = (0..r.len()).collect();
        }
        // nearly sorted from the previous step, so this is close to linear
        self.order.sort_by(|&i, &j| r[i].total_cmp(&r[j]).then(i.cmp(&j)));
        &self.order
    }

    /// Enclosed mass acting on every radial particle.
    fn radial_field(&mut self, r: &[f64], masses: &[f64]) -> Vec<f64> {
        match self.frozen.clone() {
            Some(p) => r.iter().map(|&ri| p.mass_at(ri)).collect(),
            None => {
                let order = self.sorted(r).to_vec();
                shell_masses(r, masses, &order)
            }
        }
    }

    fn cartesian_field(&self, x: &[[f64; 3]], masses: &[f64]) -> Vec<[f64; 3]> {
        match &self.frozen {
            Some(p) => x
                .par_iter()
                .map(|xi| {
                    let r = norm(xi);
                    if r == 0.0 {
                        return [0.0; 3];
                    }
                    let g = -p.mass_at(r) / (r * r * r);
                    xi.map(|c| g * c)
                })
                .collect(),
            None => pairwise_accelerations(x, masses, self.config.softening),
        }
    }

    /// Potential energy of the backend's field: self-gravity of the
    /// particles, or their energy in the frozen external potential.
    pub fn potential_energy(&mut self, ens: &ParticleEnsemble) -> f64 {
        let masses = ens.masses();
        if let Some(p) = self.frozen.clone() {
            return ens.radii().iter().zip(&masses).map(|(&r, m)| m * p.potential_at(r)).sum();
        }
        match &ens.coords {
            Coordinates::Radial(pr) => {
                let order = self.sorted(&pr.r).to_vec();
                shell_potential_energy(&pr.r, &masses, &order)
            }
            Coordinates::Cartesian(pc) => pairwise_potential_energy(&pc.x, &masses, self.config.softening),
        }
    }

    /// Kinetic plus potential energy as seen by this integrator.
    pub fn hamiltonian(&mut self, ens: &ParticleEnsemble) -> f64 {
        ens.kinetic_energy() + self.potential_energy(ens)
    }

    /// One leapfrog step of the configured size.
    pub fn step(&mut self, ens: &mut ParticleEnsemble) -> Result<()> {
        self.step_by(ens, self.config.dt)
    }

    /// One leapfrog step of size `dt`; negative `dt` integrates backwards.
    pub fn step_by(&mut self, ens: &mut ParticleEnsemble, dt: f64) -> Result<()> {
        let masses = ens.masses();
        let scheme = self.config.scheme;
        match &mut ens.coords {
            Coordinates::Radial(p) => {
                self.radial_kick(p, &masses, 0.5 * dt);
                match scheme {
                    RadialScheme::FreeStreaming => free_stream(p, dt)?,
                    RadialScheme::CentrifugalKick => radial_drift(p, dt),
                }
                self.radial_kick(p, &masses, 0.5 * dt);
            }
            Coordinates::Cartesian(p) => {
                let h = 0.5 * dt;
                let acc = self.cartesian_field(&p.x, &masses);
                kick3(&mut p.v, &acc, h);
                for (x, v) in p.x.iter_mut().zip(&p.v) {
                    for k in 0..3 {
                        x[k] += dt * v[k];
                    }
                }
                let acc = self.cartesian_field(&p.x, &masses);
                kick3(&mut p.v, &acc, h);
            }
        }
        ens.time += dt;
        Ok(())
    }

    fn radial_kick(&mut self, p: &mut RadialParticles, masses: &[f64], h: f64) {
        let inner = self.radial_field(&p.r, masses);
        let centrifugal = self.config.scheme == RadialScheme::CentrifugalKick;
        for i in 0..p.r.len() {
            let r = p.r[i];
            let mut a = -inner[i] / (r * r);
            if centrifugal {
                a += p.l[i] / (r * r * r);
            }
            p.w[i] += h * a;
        }
    }

    /// Advances to `t_end`, calling `observe` at the start, every `cadence`
    /// steps and at the end. Returns the number of steps taken.
    pub fn run<F>(&mut self, ens: &mut ParticleEnsemble, mut observe: F) -> Result<usize>
    where
        F: FnMut(&mut Self, &ParticleEnsemble) -> Result<()>,
    {
        let steps = self.config.steps();
        let t0 = ens.time;
        observe(self, ens)?;
        for n in 1..=steps {
            self.step(ens)?;
            // avoid accumulating round-off in the clock
            ens.time = t0 + n as f64 * self.config.dt;
            if n % self.config.cadence == 0 || n == steps {
                observe(self, ens)?;
            }
        }
        Ok(steps)
    }
}

fn kick3(v: &mut [[f64; 3]], acc: &[[f64; 3]], h: f64) {
    for (vi, ai) in v.iter_mut().zip(acc) {
        for k in 0..3 {
            vi[k] += h * ai[k];
        }
    }
}

fn radial_drift(p: &mut RadialParticles, dt: f64) {
    for i in 0..p.r.len() {
        let r = p.r[i] + dt * p.w[i];
        if r < 0.0 {
            p.r[i] = -r;
            p.w[i] = -p.w[i];
        } else {
            p.r[i] = r;
        }
    }
}

/// Straight-line motion of a particle with radius `r`, radial velocity `w`
/// and squared angular momentum `L`, expressed in `(r, w)`.
fn free_stream(p: &mut RadialParticles, dt: f64) -> Result<()> {
    for i in 0..p.r.len() {
        let (r, w, l) = (p.r[i], p.w[i], p.l[i]);
        let vt2 = if l > 0.0 { l / (r * r) } else { 0.0 };
        let radial = r + w * dt;
        let r_new = (radial * radial + vt2 * dt * dt).sqrt();
        if !(r_new > 0.0) {
            return Err(Error::Convergence(format!("particle {i} with L = 0 hit the origin exactly")));
        }
        p.w[i] = (r * w + (w * w + vt2) * dt) / r_new;
        p.r[i] = r_new;
    }
    Ok(())
}

/// Draws `n` equal-mass particles from the isotropic steady state.
///
/// Radii follow the enclosed-mass profile by inverse transform; speeds are
/// drawn by rejection from `phi(v^2/2 + U0(r)) v^2` with a scanned envelope
/// that is enlarged if a sample ever exceeds it.
pub fn sample_steady_state(profile: &SteadyStateProfile, n: usize, backend: Backend, seed: u64) -> Result<ParticleEnsemble> {
    if n == 0 {
        return Err(Error::Usage("particle count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cutoff = profile.cutoff();
    let model = &profile.model;
    let m = profile.total_mass / n as f64;
    let m_tab = profile.tabulated_mass();
    let mut omega = Vec::with_capacity(n);
    let mut fvals = Vec::with_capacity(n);
    let mut rs = Vec::with_capacity(n);
    let mut speeds = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let r = invert_enclosed_mass(profile, u * m_tab)?;
        let depth = profile.depth_at(r);
        let vmax = (2.0 * depth).sqrt();
        let g = |v: f64| -> Result<f64> { Ok(model.phi_at_depth(&cutoff, depth - 0.5 * v * v)? * v * v) };
        let mut envelope = 0.0f64;
        for j in 1..64 {
            envelope = envelope.max(g(vmax * j as f64 / 64.0)?);
        }
        envelope *= 1.1;
        if !(envelope > 0.0) {
            return Err(Error::Convergence(format!("no phase-space density available at r = {r:.6e}")));
        }
        let mut tries = 0usize;
        let v = loop {
            tries += 1;
            if tries > 100_000 {
                return Err(Error::Convergence(format!("velocity rejection efficiency collapsed at r = {r:.6e}")));
            }
            let v = vmax * rng.gen::<f64>();
            let gv = g(v)?;
            if gv > envelope {
                envelope = 1.5 * gv;
                tries = 0;
                continue;
            }
            if rng.gen::<f64>() * envelope < gv {
                break v;
            }
        };
        let f = model.phi_at_depth(&cutoff, depth - 0.5 * v * v)?;
        rs.push(r);
        speeds.push(v);
        fvals.push(f);
        omega.push(m / f);
    }
    let coords = match backend {
        Backend::Radial => {
            let mut w = Vec::with_capacity(n);
            let mut l = Vec::with_capacity(n);
            for (&r, &v) in rs.iter().zip(&speeds) {
                let mu: f64 = rng.gen_range(-1.0..1.0);
                w.push(v * mu);
                l.push(r * r * v * v * (1.0 - mu * mu));
            }
            Coordinates::Radial(RadialParticles { r: rs, w, l })
        }
        Backend::Cartesian3D => {
            let mut x = Vec::with_capacity(n);
            let mut vel = Vec::with_capacity(n);
            for (&r, &v) in rs.iter().zip(&speeds) {
                x.push(unit_vector(&mut rng).map(|c| c * r));
                vel.push(unit_vector(&mut rng).map(|c| c * v));
            }
            Coordinates::Cartesian(CartesianParticles { x, v: vel })
        }
    };
    let ens = ParticleEnsemble { time: 0.0, coords, omega, f: fvals };
    ens.validate()?;
    Ok(ens)
}

fn unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    let mu: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - mu * mu).sqrt();
    [s * phi.cos(), s * phi.sin(), mu]
}

fn invert_enclosed_mass(profile: &SteadyStateProfile, target: f64) -> Result<f64> {
    let r = &profile.r;
    let m = &profile.m_enc;
    if target <= m[0] {
        return Ok(r[0] * (target / m[0]).cbrt());
    }
    let i = m.partition_point(|&x| x < target).clamp(1, r.len() - 1);
    brent_root(|x| Ok(profile.mass_at(x) - target), r[i - 1], r[i], 1e-15 * r[i], 200)
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"GSTBSNAP";
const SNAPSHOT_VERSION: u32 = 1;

/// Writes the binary columnar snapshot: magic, version, backend, N, t, then
/// one little-endian f64 column per coordinate followed by `omega` and `f`.
pub fn write_snapshot<W: Write>(ens: &ParticleEnsemble, mut out: W) -> Result<()> {
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_u32::<LittleEndian>(SNAPSHOT_VERSION)?;
    out.write_u32::<LittleEndian>(ens.backend().code())?;
    out.write_u64::<LittleEndian>(ens.len() as u64)?;
    out.write_f64::<LittleEndian>(ens.time)?;
    let mut column = |xs: &mut dyn Iterator<Item = f64>| -> Result<()> {
        for x in xs {
            out.write_f64::<LittleEndian>(x)?;
        }
        Ok(())
    };
    match &ens.coords {
        Coordinates::Radial(p) => {
            column(&mut p.r.iter().copied())?;
            column(&mut p.w.iter().copied())?;
            column(&mut p.l.iter().copied())?;
        }
        Coordinates::Cartesian(p) => {
            for k in 0..3 {
                column(&mut p.x.iter().map(|x| x[k]))?;
            }
            for k in 0..3 {
                column(&mut p.v.iter().map(|v| v[k]))?;
            }
        }
    }
    column(&mut ens.omega.iter().copied())?;
    column(&mut ens.f.iter().copied())?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<ParticleEnsemble> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("not a particle snapshot".into()));
    }
    let version = input.read_u32::<LittleEndian>()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let backend = Backend::from_code(input.read_u32::<LittleEndian>()?)?;
    let n = input.read_u64::<LittleEndian>()? as usize;
    let time = input.read_f64::<LittleEndian>()?;
    let mut column = || -> Result<Vec<f64>> {
        let mut v = vec![0.0; n];
        input.read_f64_into::<LittleEndian>(&mut v)?;
        Ok(v)
    };
    let coords = match backend {
        Backend::Radial => {
            let (r, w, l) = (column()?, column()?, column()?);
            Coordinates::Radial(RadialParticles { r, w, l })
        }
        Backend::Cartesian3D => {
            let cols: Vec<Vec<f64>> = (0..6).map(|_| column()).collect::<Result<_>>()?;
            let x = (0..n).map(|i| [cols[0][i], cols[1][i], cols[2][i]]).collect();
            let v = (0..n).map(|i| [cols[3][i], cols[4][i], cols[5][i]]).collect();
            Coordinates::Cartesian(CartesianParticles { x, v })
        }
    };
    let omega = column()?;
    let f = column()?;
    let ens = ParticleEnsemble { time, coords, omega, f };
    ens.validate()?;
    Ok(ens)
}

pub fn save_snapshot(ens: &ParticleEnsemble, path: impl AsRef<Path>) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot(ens, file)
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<ParticleEnsemble> {
    read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_shells() -> ParticleEnsemble {
        ParticleEnsemble::radial(vec![2.0, 1.0], vec![0.0, 0.1], vec![1.0, 0.5], vec![1.0, 2.0], vec![1.0, 0.5]).unwrap()
    }

    #[test]
    fn shell_energy_matches_step_function_integral() {
        let e = two_shells();
        let order = e.radial_order();
        assert_eq!(order, vec![1, 0]);
        let w = shell_potential_energy(&e.radii(), &e.masses(), &order);
        // unit masses at r = 1 and r = 2
        let direct = -(1.0 * 0.5 / 1.0 + 1.0 * (1.0 + 0.5) / 2.0);
        assert!((w - direct).abs() < 1e-15);
    }

    #[test]
    fn two_body_pair_energy() {
        let w = pairwise_potential_energy(&[[0.0; 3], [2.0, 0.0, 0.0]], &[1.0, 1.0], 0.0);
        assert_eq!(w, -0.5);
    }

    #[test]
    fn mismatched_columns_rejected() {
        assert!(ParticleEnsemble::radial(vec![1.0], vec![], vec![0.0], vec![1.0], vec![1.0]).is_err());
        assert!(ParticleEnsemble::radial(vec![1.0], vec![0.0], vec![0.0], vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let e = two_shells();
        let mut buf = Vec::new();
        write_snapshot(&e, &mut buf).unwrap();
        assert_eq!(read_snapshot(buf.as_slice()).unwrap(), e);
        let c = ParticleEnsemble::cartesian(vec![[1.0, 2.0, 3.0]], vec![[0.5, 0.0, -1.0]], vec![2.0], vec![0.25]).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&c, &mut buf).unwrap();
        assert_eq!(read_snapshot(buf.as_slice()).unwrap(), c);
        buf[0] = b'X';
        assert!(matches!(read_snapshot(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn free_streaming_matches_straight_line() {
        let mut p = RadialParticles { r: vec![1.0], w: vec![-0.3], l: vec![0.64] };
        free_stream(&mut p, 2.5).unwrap();
        // x = (1, 0, 0), v = (-0.3, 0.8, 0)
        let x = [1.0 - 0.75, 2.0, 0.0];
        let r = norm(&x);
        assert!((p.r[0] - r).abs() < 1e-15);
        assert!((p.w[0] - (x[0] * -0.3 + x[1] * 0.8) / r).abs() < 1e-15);
    }

    #[test]
    fn transform_scales_mass_by_volume_factor() {
        let e = two_shells();
        let t = e.transformed(1.0, 2.0, 1.0).unwrap();
        assert!((t.total_mass() - e.total_mass() / 8.0).abs() < 1e-15);
        assert!(e.transformed(1.0, 0.0, 1.0).is_err());
    }
}
