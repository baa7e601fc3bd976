//! Perturbations inside the constraint set and the stability protocol:
//! sample `f0`, perturb, evolve, and track the metric
//! `m(t) = d(f(t), T^a f0) + (1/8 pi) |grad U_f - grad U_{T^a f0}|^2`,
//! minimized over shifts `a` and, for the Plummer functional, over the
//! scaling `S_lambda`.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::casimir::CasimirModel;
use crate::dynamics::{sample_steady_state, Backend, Coordinates, FieldMode, Integrator, IntegratorConfig, ParticleEnsemble, RadialScheme};
use crate::error::{Error, Result};
use crate::functionals::{evaluate_profile, potential_sum, stability_distance, Comparator, Distance, PreparedEnsemble, Reference};
use crate::numerics::golden_section_min;
use crate::steadystate::SteadyStateProfile;

/// Relative tolerance on `C` after a perturbation.
pub const CASIMIR_RTOL: f64 = 1e-10;

/// A map of the constraint set `C(f) = M` into itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationSpec {
    /// `f(a x, b v)` with `a = 1/b` unless given; `ab != 1` leaves the
    /// constraint set and is refused.
    DilationAb { b: f64, a: Option<f64> },
    /// `v -> v + V` (3D only).
    VelocityBoost { v: [f64; 3] },
    /// `f_p -> f_p (1 + s (2 xi - 1))` with uniform `xi`, followed by the
    /// dilation `a = b` that restores `C`.
    AmplitudeResample { strength: f64, seed: u64 },
    /// `S_lambda` (Plummer functional only).
    PlummerScale { lambda: f64 },
}

impl PerturbationSpec {
    pub fn identity() -> Self {
        Self::DilationAb { b: 1.0, a: None }
    }
}

/// Applies `spec` and checks that `C` is preserved.
pub fn perturb(ens: &ParticleEnsemble, spec: &PerturbationSpec, model: &CasimirModel) -> Result<ParticleEnsemble> {
    let before = ens.casimir(model);
    let out = match *spec {
        PerturbationSpec::DilationAb { b, a } => {
            let a = a.unwrap_or(1.0 / b);
            if !(b > 0.0 && a > 0.0) {
                return Err(Error::Domain(format!("dilation factors must be positive, got a = {a}, b = {b}")));
            }
            if (a * b - 1.0).abs() > 1e-12 {
                return Err(Error::Constraint(format!(
                    "dilation with ab = {} changes C by (ab)^-3 and leaves the constraint set",
                    a * b
                )));
            }
            ens.transformed(1.0, a, b)?
        }
        PerturbationSpec::VelocityBoost { v } => {
            let Coordinates::Cartesian(p) = &ens.coords else {
                return Err(Error::Usage("velocity boosts need the 3D backend".into()));
            };
            let mut out = ens.clone();
            let mut q = p.clone();
            for vi in &mut q.v {
                for k in 0..3 {
                    vi[k] += v[k];
                }
            }
            out.coords = Coordinates::Cartesian(q);
            out
        }
        PerturbationSpec::AmplitudeResample { strength, seed } => {
            if !(0.0..1.0).contains(&strength) {
                return Err(Error::Domain(format!("resample strength must lie in [0, 1), got {strength}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = ens.clone();
            for f in &mut out.f {
                *f *= 1.0 + strength * (2.0 * rng.gen::<f64>() - 1.0);
            }
            let after = out.casimir(model);
            let k = (after / before).powf(1.0 / 6.0);
            let mut scaled = out.transformed(1.0, k, k)?;
            // remove the last few ulps so the check below is met by
            // construction rather than by luck
            let fix = before / scaled.casimir(model);
            for w in &mut scaled.omega {
                *w *= fix;
            }
            scaled
        }
        PerturbationSpec::PlummerScale { lambda } => {
            if !model.is_plummer() {
                return Err(Error::Usage("S_lambda preserves C only for the Plummer functional".into()));
            }
            if !(lambda > 0.0) {
                return Err(Error::Domain(format!("scaling parameter must be positive, got {lambda}")));
            }
            ens.transformed(lambda.powi(-7), lambda.powi(-4), lambda)?
        }
    };
    let after = out.casimir(model);
    if !((after / before - 1.0).abs() <= CASIMIR_RTOL) {
        return Err(Error::Constraint(format!("perturbation changed C from {before:.15e} to {after:.15e}")));
    }
    Ok(out)
}

/// Translation `a` minimizing the metric against `T^a f0`.
///
/// Only `sum m_p U0(x_p - a)` depends on `a`, so that sum is minimized:
/// start at the mass centroid and refine by coordinate descent with a
/// halving step down to `1e-4` of the half-mass radius. Radial ensembles
/// return zero.
pub fn best_shift(ens: &ParticleEnsemble, profile: &SteadyStateProfile) -> [f64; 3] {
    if ens.backend() == Backend::Radial || ens.is_empty() {
        return [0.0; 3];
    }
    let objective = |a: [f64; 3]| potential_sum(ens, profile, &Comparator::shifted(a));
    let mut a = ens.centroid();
    let mut best = objective(a);
    let rh = profile.half_mass_radius();
    let mut h = 0.05 * rh;
    while h > 1e-4 * rh {
        let mut moved = false;
        for k in 0..3 {
            for sign in [1.0, -1.0] {
                let mut trial = a;
                trial[k] += sign * h;
                let value = objective(trial);
                if value < best {
                    best = value;
                    a = trial;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    a
}

/// Golden-section search for the `S_lambda` copy of `f0` closest in the
/// metric, over `lambda` in `[0.5, 2]`, about the prepared ensemble's centre.
pub fn best_scale(prepared: &PreparedEnsemble, profile: &SteadyStateProfile, reference: &Reference) -> Result<(f64, Distance)> {
    let mut failure = None;
    let (lambda, _) = golden_section_min(
        |l| match prepared.distance(profile, reference, l) {
            Ok(d) => d.metric(),
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        0.5,
        2.0,
        1e-5,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((lambda, prepared.distance(profile, reference, lambda)?))
}

/// Settings of a stability run; times are in units of the dynamical time
/// `2 pi sqrt(R_h^3 / M)` of the profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub particles: usize,
    pub backend: Backend,
    pub seed: u64,
    pub duration: f64,
    pub steps_per_tdyn: f64,
    /// Steps between records.
    pub cadence: usize,
    pub scheme: RadialScheme,
    /// 3D softening as a fraction of the half-mass radius.
    pub softening_fraction: f64,
    /// Minimize over `S_lambda` as well; defaults to the Plummer functional.
    pub minimize_scale: Option<bool>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            particles: 100_000,
            backend: Backend::Radial,
            seed: 1,
            duration: 20.0,
            steps_per_tdyn: 200.0,
            cadence: 20,
            scheme: RadialScheme::FreeStreaming,
            softening_fraction: 0.01,
            minimize_scale: None,
        }
    }
}

/// One row of the stability time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub t: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub mass: f64,
    pub d: f64,
    pub field_diff: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub shift_z: f64,
    pub scale: Option<f64>,
    /// Minimized metric `d + field_diff`.
    pub metric: f64,
    pub d_unshifted: f64,
    pub field_diff_unshifted: f64,
    pub metric_unshifted: f64,
}

/// Least-squares line through `m(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_sigma: f64,
}

impl TrendFit {
    pub fn fit(t: &[f64], y: &[f64]) -> Result<Self> {
        let n = t.len();
        if n < 3 || y.len() != n {
            return Err(Error::Usage("a trend fit needs at least three points".into()));
        }
        let nf = n as f64;
        let tm = t.iter().sum::<f64>() / nf;
        let ym = y.iter().sum::<f64>() / nf;
        let sxx: f64 = t.iter().map(|ti| (ti - tm).powi(2)).sum();
        let sxy: f64 = t.iter().zip(y).map(|(ti, yi)| (ti - tm) * (yi - ym)).sum();
        let slope = sxy / sxx;
        let intercept = ym - slope * tm;
        let rss: f64 = t.iter().zip(y).map(|(ti, yi)| (yi - intercept - slope * ti).powi(2)).sum();
        let slope_sigma = (rss / (nf - 2.0) / sxx).sqrt();
        Ok(Self { slope, intercept, slope_sigma })
    }

    /// No growth beyond two standard errors.
    pub fn no_secular_growth(&self) -> bool {
        self.slope <= 2.0 * self.slope_sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTimeSeries {
    pub records: Vec<StabilityRecord>,
    pub dynamical_time: f64,
    pub reference: Reference,
}

impl StabilityTimeSeries {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn metric(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.metric).collect()
    }

    /// `max_t m(t) / m(0)`.
    pub fn headline(&self) -> f64 {
        let m0 = self.records.first().map(|r| r.metric).unwrap_or(f64::NAN);
        self.records.iter().map(|r| r.metric).fold(f64::NEG_INFINITY, f64::max) / m0
    }

    pub fn trend(&self) -> Result<TrendFit> {
        TrendFit::fit(&self.times(), &self.metric())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<StabilityRecord>> {
        let mut rd = csv::Reader::from_reader(input);
        Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
    }
}

/// Everything needed to reproduce a stability run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub profile_sha256: String,
    pub spec: PerturbationSpec,
    pub config: StabilityConfig,
    pub seed: u64,
    pub headline: f64,
    pub trend: Option<TrendFit>,
}

impl RunManifest {
    pub fn new(profile: &SteadyStateProfile, spec: PerturbationSpec, config: StabilityConfig, series: &StabilityTimeSeries) -> Result<Self> {
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            profile_sha256: profile_hash(profile)?,
            spec,
            config,
            seed: config.seed,
            headline: series.headline(),
            trend: series.trend().ok(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// SHA-256 of the profile's JSON form.
pub fn profile_hash(profile: &SteadyStateProfile) -> Result<String> {
    Ok(hex::encode(Sha256::digest(profile.to_json()?.as_bytes())))
}

/// Samples `f0`, applies `spec`, evolves self-consistently and records the
/// minimized metric at every cadence.
///
/// `d` is measured against a reference calibrated on the unperturbed
/// sample (see [`Reference::calibrated`]), so the Monte Carlo offset of the
/// sample does not masquerade as a perturbation.
pub fn stability_run(profile: &SteadyStateProfile, spec: &PerturbationSpec, config: &StabilityConfig) -> Result<StabilityTimeSeries> {
    let model = &profile.model;
    let report = evaluate_profile(profile)?;
    let tdyn = profile.dynamical_time();
    let softening = match config.backend {
        Backend::Radial => 0.0,
        Backend::Cartesian3D => config.softening_fraction * profile.half_mass_radius(),
    };
    let integrator_config = IntegratorConfig {
        dt: tdyn / config.steps_per_tdyn,
        t_end: config.duration * tdyn,
        scheme: config.scheme,
        softening,
        cadence: config.cadence,
        field: FieldMode::SelfConsistent,
    };
    let mut integrator = Integrator::new(integrator_config, None)?;
    let base = sample_steady_state(profile, config.particles, config.backend, config.seed)?;
    let reference = Reference::calibrated(&base, profile, model, &report, best_shift(&base, profile))?;
    let mut ens = perturb(&base, spec, model)?;
    let initial = stability_distance(&ens, profile, model, &reference)?;
    initial.check_nonnegative(&reference)?;
    let scale_search = config.minimize_scale.unwrap_or(model.is_plummer());

    let mut records = Vec::new();
    integrator.run(&mut ens, |it, e| {
        let w_f = it.potential_energy(e);
        let h = e.kinetic_energy() + w_f;
        let centred = PreparedEnsemble::new(e, model, [0.0; 3]);
        let plain = centred.distance(profile, &reference, 1.0)?;
        let mut best = (Comparator::default(), plain);
        let shift = best_shift(e, profile);
        let prepared = if shift != [0.0; 3] {
            let moved = PreparedEnsemble::new(e, model, shift);
            let d = moved.distance(profile, &reference, 1.0)?;
            if d.metric() < best.1.metric() {
                best = (Comparator::shifted(shift), d);
            }
            moved
        } else {
            centred
        };
        if scale_search {
            let prepared = if prepared.shift() == best.0.shift { prepared } else { PreparedEnsemble::new(e, model, best.0.shift) };
            let (lambda, d) = best_scale(&prepared, profile, &reference)?;
            if d.metric() < best.1.metric() {
                best = (Comparator { shift: best.0.shift, scale: lambda }, d);
            }
        }
        records.push(StabilityRecord {
            t: e.time,
            h,
            c: e.casimir(model),
            mass: e.total_mass(),
            d: best.1.d,
            field_diff: best.1.field_diff,
            shift_x: best.0.shift[0],
            shift_y: best.0.shift[1],
            shift_z: best.0.shift[2],
            scale: scale_search.then_some(best.0.scale),
            metric: best.1.metric(),
            d_unshifted: plain.d,
            field_diff_unshifted: plain.field_diff,
            metric_unshifted: plain.metric(),
        });
        Ok(())
    })?;
    Ok(StabilityTimeSeries { records, dynamical_time: tdyn, reference })
}
