//! Kinetic and potential energy, the energy-Casimir functional, and the
//! stability distance `d(f, f0) = int int (|v|^2/2 + U0)(f - f0)` together
//! with the field difference `(1/8 pi) |grad U_f - grad U0|^2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::casimir::{CasimirModel, Moment};
use crate::dynamics::{pairwise_potential_energy, shell_potential_energy, Coordinates, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::numerics::QuadTolerance;
use crate::steadystate::{radial_integral, radial_integral_parts, SteadyStateProfile};

/// Energy functionals of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub e_kin: f64,
    /// `-(1/8 pi) int |grad U|^2`.
    pub e_pot_field: f64,
    /// `1/2 int rho U`, i.e. `-1/2` times the double integral of
    /// `rho(x) rho(y) / |x - y|`.
    pub e_pot_double: f64,
    /// `e_kin + e_pot_field`.
    pub hamiltonian: f64,
    pub casimir: f64,
    pub mass: f64,
    /// Softening length used for pairwise sums (3D ensembles only).
    pub softening: Option<f64>,
    pub quad_abs: f64,
    pub quad_rel: f64,
    /// Part of the energies supplied by extrapolation beyond the grid.
    pub truncation_error: f64,
}

impl FunctionalReport {
    /// `2 E_kin / |E_pot|`, one for a virialized state.
    pub fn virial_ratio(&self) -> f64 {
        2.0 * self.e_kin / self.e_pot_field.abs()
    }

    /// `int int E f = E_kin + 2 E_pot` with `E = |v|^2/2 + U`.
    pub fn energy_moment(&self) -> f64 {
        self.e_kin + 2.0 * self.e_pot_field
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Functionals of a tabulated steady state with the default tolerance.
pub fn evaluate_profile(profile: &SteadyStateProfile) -> Result<FunctionalReport> {
    evaluate_profile_with(profile, QuadTolerance::default())
}

pub fn evaluate_profile_with(profile: &SteadyStateProfile, tol: QuadTolerance) -> Result<FunctionalReport> {
    let kin = profile.moment_values(Moment::Kinetic, tol)?;
    let cas = profile.moment_values(Moment::Casimir, tol)?;
    let r = &profile.r;
    let field: Vec<f64> =
        r.iter().zip(&profile.m_enc).map(|(&ri, &m)| -m * m / (8.0 * PI * ri.powi(4))).collect();
    // 1/2 int rho U_shell with the shell potential of rho; exchanging the
    // order of integration turns it into -int 4 pi r rho M dr
    let double: Vec<f64> = r.iter().zip(&profile.rho).zip(&profile.m_enc).map(|((&ri, &rho), &m)| -rho * m / ri).collect();
    let (kh, kb, kt) = radial_integral_parts(r, &kin);
    let (fh, fb, ft) = radial_integral_parts(r, &field);
    let (dh, db, dt) = radial_integral_parts(r, &double);
    let e_kin = kh + kb + kt;
    let e_pot_field = fh + fb + ft;
    let e_pot_double = dh + db + dt;
    let casimir = radial_integral(r, &cas);
    let truncation_error = if profile.has_finite_support() { kt.abs().max(dt.abs()) } else { kt.abs().max(ft.abs()).max(dt.abs()) };
    Ok(FunctionalReport {
        e_kin,
        e_pot_field,
        e_pot_double,
        hamiltonian: e_kin + e_pot_field,
        casimir,
        mass: profile.total_mass,
        softening: None,
        quad_abs: tol.abs,
        quad_rel: tol.rel,
        truncation_error,
    })
}

/// The field the potential energy of an ensemble is measured in.
#[derive(Debug, Clone, Copy)]
pub enum FieldSource<'a> {
    /// Self-gravity of the particles; the softening applies to 3D only.
    Ensemble { softening: f64 },
    /// A fixed external potential; both potential entries then hold
    /// `sum m_p U0(x_p)`, the energy of the particles in that field.
    Frozen(&'a SteadyStateProfile),
}

pub fn evaluate_ensemble(ens: &ParticleEnsemble, model: &CasimirModel, source: FieldSource<'_>) -> Result<FunctionalReport> {
    if ens.is_empty() {
        return Ok(FunctionalReport {
            e_kin: 0.0,
            e_pot_field: 0.0,
            e_pot_double: 0.0,
            hamiltonian: 0.0,
            casimir: 0.0,
            mass: 0.0,
            softening: None,
            quad_abs: 0.0,
            quad_rel: 0.0,
            truncation_error: 0.0,
        });
    }
    let masses = ens.masses();
    let e_kin = ens.kinetic_energy();
    let (field, double, softening) = match (source, &ens.coords) {
        (FieldSource::Frozen(p), _) => {
            let e: f64 = ens.radii().iter().zip(&masses).map(|(&r, m)| m * p.potential_at(r)).sum();
            (e, e, None)
        }
        (FieldSource::Ensemble { .. }, Coordinates::Radial(pr)) => {
            let order = ens.radial_order();
            (shell_potential_energy(&pr.r, &masses, &order), shell_double_sum(&pr.r, &masses, &order), None)
        }
        (FieldSource::Ensemble { softening }, Coordinates::Cartesian(pc)) => {
            if !(softening >= 0.0) {
                return Err(Error::Usage(format!("softening must be nonnegative, got {softening}")));
            }
            let w = pairwise_potential_energy(&pc.x, &masses, softening);
            (w, w, Some(softening))
        }
    };
    Ok(FunctionalReport {
        e_kin,
        e_pot_field: field,
        e_pot_double: double,
        hamiltonian: e_kin + field,
        casimir: ens.casimir(model),
        mass: ens.total_mass(),
        softening,
        quad_abs: 0.0,
        quad_rel: 0.0,
        truncation_error: 0.0,
    })
}

/// `1/2 sum_p m_p U_p` with `U_p` the potential of all other shells at
/// `r_p`: `-(mass inside)/r_p - sum_{outside} m_q / r_q`.
fn shell_double_sum(r: &[f64], m: &[f64], order: &[usize]) -> f64 {
    let n = order.len();
    let mut outer = vec![0.0; n];
    let mut acc = 0.0;
    for k in (0..n).rev() {
        outer[k] = acc;
        let p = order[k];
        acc += m[p] / r[p];
    }
    let mut inner = 0.0;
    let mut sum = 0.0;
    for (k, &p) in order.iter().enumerate() {
        let u = -inner / r[p] - outer[k];
        sum += m[p] * u;
        inner += m[p];
    }
    0.5 * sum
}

/// The steady state `f0` moved by the symmetries the metric is minimized
/// over: a translation by `shift` and, for the Plummer functional, the
/// scaling `S_lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparator {
    pub shift: [f64; 3],
    pub scale: f64,
}

impl Default for Comparator {
    fn default() -> Self {
        Self { shift: [0.0; 3], scale: 1.0 }
    }
}

impl Comparator {
    pub fn shifted(shift: [f64; 3]) -> Self {
        Self { shift, scale: 1.0 }
    }

    /// `U(r)` of the moved state: `lambda^-2 U0(r / lambda^4)`.
    pub fn potential(&self, profile: &SteadyStateProfile, r: f64) -> f64 {
        if self.scale == 1.0 {
            profile.potential_at(r)
        } else {
            profile.potential_at(r / self.scale.powi(4)) / (self.scale * self.scale)
        }
    }

    /// `M(r)` of the moved state: `lambda^2 M0(r / lambda^4)`.
    pub fn mass(&self, profile: &SteadyStateProfile, r: f64) -> f64 {
        if self.scale == 1.0 {
            profile.mass_at(r)
        } else {
            profile.mass_at(r / self.scale.powi(4)) * self.scale * self.scale
        }
    }

    fn distances(&self, ens: &ParticleEnsemble) -> Vec<f64> {
        match &ens.coords {
            Coordinates::Radial(p) => p.r.clone(),
            Coordinates::Cartesian(p) => p
                .x
                .iter()
                .map(|x| {
                    let d = [x[0] - self.shift[0], x[1] - self.shift[1], x[2] - self.shift[2]];
                    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
                })
                .collect(),
        }
    }
}

/// `sum m_p U(x_p)` in the potential of the comparator.
pub fn potential_sum(ens: &ParticleEnsemble, profile: &SteadyStateProfile, cmp: &Comparator) -> f64 {
    cmp.distances(ens).iter().zip(ens.omega.iter().zip(&ens.f)).map(|(&r, (w, f))| w * f * cmp.potential(profile, r)).sum()
}

/// An ensemble reduced to what `d` and the field difference need about a
/// fixed centre: distances sorted once, masses, kinetic energy and `C(f)`.
/// Comparators differing only in scale reuse the ordering.
#[derive(Debug, Clone)]
pub struct PreparedEnsemble {
    shift: [f64; 3],
    dist: Vec<f64>,
    masses: Vec<f64>,
    order: Vec<usize>,
    e_kin: f64,
    casimir: f64,
}

impl PreparedEnsemble {
    pub fn new(ens: &ParticleEnsemble, model: &CasimirModel, shift: [f64; 3]) -> Self {
        let cmp = Comparator::shifted(shift);
        let dist = cmp.distances(ens);
        let mut order: Vec<usize> = (0..dist.len()).collect();
        order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
        Self { shift, dist, masses: ens.masses(), order, e_kin: ens.kinetic_energy(), casimir: ens.casimir(model) }
    }

    pub fn shift(&self) -> [f64; 3] {
        self.shift
    }

    fn comparator(&self, scale: f64) -> Comparator {
        Comparator { shift: self.shift, scale }
    }

    pub fn potential_sum(&self, profile: &SteadyStateProfile, scale: f64) -> f64 {
        let cmp = self.comparator(scale);
        self.dist.iter().zip(&self.masses).map(|(&r, m)| m * cmp.potential(profile, r)).sum()
    }

    /// `1/2 int (M_f - M_c)^2 / r^2 dr` about the centre, by the trapezoidal
    /// rule on the union of particle distances and the comparator's grid.
    ///
    /// For a radial ensemble this is `(1/8 pi) |grad U_f - grad U_c|^2`.
    /// For a 3D ensemble it is the monopole part of that quantity, a lower
    /// bound free of softening and self-energy bias.
    pub fn field_diff(&self, profile: &SteadyStateProfile, scale: f64) -> Result<f64> {
        let cmp = self.comparator(scale);
        let stretch = scale.powi(4);
        let grid: Vec<f64> = profile.r.iter().map(|r| r * stretch).collect();
        let integrand = |s: f64, x: f64| {
            let d = s - cmp.mass(profile, x);
            d * d / (x * x)
        };
        let r = &self.dist;
        let order = &self.order;
        let (mut i, mut j) = (0usize, 0usize);
        let first = match (order.first(), grid.first()) {
            (Some(&q), Some(&g)) => r[q].min(g),
            (None, Some(&g)) => g,
            _ => return Err(Error::Usage("empty ensemble and profile".into())),
        };
        if !(first > 0.0) {
            return Err(Error::Domain("a particle sits at the centre".into()));
        }
        // M_c grows like r^3 below the first node
        let mc = cmp.mass(profile, first);
        let mut total = mc * mc / (5.0 * first);
        let mut s = 0.0;
        let mut x = first;
        let mut fx = integrand(s, x);
        loop {
            let next_particle = order.get(i).map(|&q| r[q]);
            let next_grid = grid.get(j).copied();
            let (next, is_particle) = match (next_particle, next_grid) {
                (Some(a), Some(b)) if a <= b => (a, true),
                (Some(a), None) => (a, true),
                (_, Some(b)) => (b, false),
                (None, None) => break,
            };
            if next > x {
                let fn_ = integrand(s, next);
                total += 0.5 * (next - x) * (fx + fn_);
                x = next;
            }
            if is_particle {
                s += self.masses[order[i]];
                i += 1;
            } else {
                j += 1;
            }
            fx = integrand(s, x);
        }
        let d = s - cmp.mass(profile, x);
        total += d * d / x;
        Ok(0.5 * total)
    }

    pub fn distance(&self, profile: &SteadyStateProfile, reference: &Reference, scale: f64) -> Result<Distance> {
        let d = self.e_kin + self.potential_sum(profile, scale) - reference.energy;
        let field_diff = self.field_diff(profile, scale)?;
        Ok(Distance { d, field_diff, constraint_ok: reference.constraint_holds(self.casimir) })
    }
}

/// Field difference of an ensemble against a comparator; see
/// [`PreparedEnsemble::field_diff`].
pub fn field_diff(ens: &ParticleEnsemble, model: &CasimirModel, profile: &SteadyStateProfile, cmp: &Comparator) -> Result<f64> {
    PreparedEnsemble::new(ens, model, cmp.shift).field_diff(profile, cmp.scale)
}

/// The constant subtracted in `d`: `int int E f0` and the constraint value
/// perturbations must preserve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub energy: f64,
    pub casimir: f64,
    /// `E_pot(f0)`, the scale for positivity tolerances.
    pub e_pot: f64,
    /// Relative tolerance on `C(f) = casimir` for `d >= 0` to be guaranteed.
    pub casimir_rtol: f64,
}

impl Reference {
    /// `int int E f0 = E_kin(f0) + 2 E_pot(f0)` by quadrature on the profile.
    pub fn continuum(report: &FunctionalReport) -> Self {
        Self { energy: report.energy_moment(), casimir: report.casimir, e_pot: report.e_pot_field, casimir_rtol: 1e-6 }
    }

    /// Reference calibrated on a sample `base` of `f0` so that
    /// `d(base, f0)` equals the field difference of the sample, i.e. the
    /// sample is credited with `H(base) = H(f0)`. This removes the Monte
    /// Carlo offset of `sum m_p E_p` from every later `d`.
    ///
    /// `centre` is where `f0` is placed against the sample; for 3D samples
    /// the best shift of the sample, so that the shift-minimized metric of
    /// `base` is `2 field_diff >= 0`.
    pub fn calibrated(
        base: &ParticleEnsemble,
        profile: &SteadyStateProfile,
        model: &CasimirModel,
        report: &FunctionalReport,
        centre: [f64; 3],
    ) -> Result<Self> {
        let prepared = PreparedEnsemble::new(base, model, centre);
        let field = prepared.field_diff(profile, 1.0)?;
        let sum = prepared.e_kin + prepared.potential_sum(profile, 1.0);
        Ok(Self { energy: sum - field, casimir: prepared.casimir, e_pot: report.e_pot_field, casimir_rtol: 1e-10 })
    }

    pub fn constraint_holds(&self, casimir: f64) -> bool {
        (casimir / self.casimir - 1.0).abs() <= self.casimir_rtol
    }

    /// `1e-10 |E_pot(f0)|`.
    pub fn positivity_tolerance(&self) -> f64 {
        1e-10 * self.e_pot.abs()
    }
}

/// `d(f, f0)` and the field difference, both relative to a comparator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub d: f64,
    pub field_diff: f64,
    /// Whether `C(f)` matched the reference constraint, the condition
    /// under which `d >= 0` is guaranteed.
    pub constraint_ok: bool,
}

impl Distance {
    /// `d + field_diff`, the quantity the stability theorems control.
    pub fn metric(&self) -> f64 {
        self.d + self.field_diff
    }

    /// Errors if the constraint held and `d` is below `-tolerance`.
    pub fn check_nonnegative(&self, reference: &Reference) -> Result<()> {
        if self.constraint_ok && self.d < -reference.positivity_tolerance() {
            return Err(Error::Constraint(format!(
                "d(f, f0) = {:.6e} is negative although C(f) = C(f0)",
                self.d
            )));
        }
        Ok(())
    }
}

/// `d(f, f0)` and the field difference against the unmoved `f0`.
pub fn stability_distance(
    ens: &ParticleEnsemble,
    profile: &SteadyStateProfile,
    model: &CasimirModel,
    reference: &Reference,
) -> Result<Distance> {
    distance_to(ens, profile, model, reference, &Comparator::default())
}

/// As [`stability_distance`] against a shifted and scaled copy of `f0`.
pub fn distance_to(
    ens: &ParticleEnsemble,
    profile: &SteadyStateProfile,
    model: &CasimirModel,
    reference: &Reference,
    cmp: &Comparator,
) -> Result<Distance> {
    PreparedEnsemble::new(ens, model, cmp.shift).distance(profile, reference, cmp.scale)
}

/// `d(f, f0)` for `f(x, v) = A f0(a x, b v)` by quadrature on the profile:
/// `A a^-3 b^-5 E_kin(f0) + A (ab)^-3 int rho0(y) U0(y / a) dy - int int E f0`.
///
/// `int int E f0` is taken as `E_kin + int rho0 U0` with the same rule as
/// the cross term, so the identity map gives `d = 0` to round-off.
pub fn continuum_transform_distance(profile: &SteadyStateProfile, report: &FunctionalReport, amplitude: f64, a: f64, b: f64) -> f64 {
    let cross: Vec<f64> = profile.r.iter().zip(&profile.rho).map(|(&r, &rho)| rho * profile.potential_at(r / a)).collect();
    let own: Vec<f64> = profile.rho.iter().zip(&profile.u).map(|(rho, u)| rho * u).collect();
    let e_kin = amplitude * a.powi(-3) * b.powi(-5) * report.e_kin;
    let moved = e_kin + amplitude * (a * b).powi(-3) * radial_integral(&profile.r, &cross);
    moved - (report.e_kin + radial_integral(&profile.r, &own))
}

/// Multiplier recomputed from the profile as
/// `int int E f0 / int int Q'(f0) f0`, valid for the Euler-Lagrange
/// consistent gauge.
pub fn reconstruct_lambda0(profile: &SteadyStateProfile, tol: QuadTolerance) -> Result<f64> {
    let kin = profile.moment_values(Moment::Kinetic, tol)?;
    let el = profile.moment_values(Moment::EulerLagrange, tol)?;
    let rho_u: Vec<f64> = profile.rho.iter().zip(&profile.u).map(|(rho, u)| rho * u).collect();
    let energy = radial_integral(&profile.r, &kin) + radial_integral(&profile.r, &rho_u);
    Ok(energy / radial_integral(&profile.r, &el))
}

/// `int rho^(1+1/n) / E_kin^(3/2n)` with `n = k + 3/2`, the constant of the
/// interpolation estimate realized by this state.
pub fn interpolation_constant(profile: &SteadyStateProfile, report: &FunctionalReport) -> f64 {
    let n = profile.model.polytropic_index();
    let pow: Vec<f64> = profile.rho.iter().map(|rho| rho.powf(1.0 + 1.0 / n)).collect();
    radial_integral(&profile.r, &pow) / report.e_kin.powf(1.5 / n)
}

/// `c_Q = inf Q''` on `(0, f_max]`, sampled on a geometric grid; `None`
/// when `Q''` is unavailable or not bounded away from zero.
pub fn convexity_constant(model: &CasimirModel, f_max: f64) -> Option<f64> {
    if !(f_max > 0.0) {
        return None;
    }
    let values: Vec<f64> =
        (0..=200).map(|i| model.q_second(f_max * 1e-8f64.powf(1.0 - i as f64 / 200.0))).collect::<Option<_>>()?;
    // still falling towards f = 0: the infimum is zero
    if values[0] < values[1] * (1.0 - 1e-9) {
        return None;
    }
    let c = values.iter().copied().fold(f64::INFINITY, f64::min);
    (c > 1e-12).then_some(c)
}

/// Upper bound `2 d / c_Q` on `|f - f0|_2^2` for states in the constraint
/// set, when `c_Q` exists.
pub fn weighted_l2_bound(model: &CasimirModel, f_max: f64, d: f64) -> Option<f64> {
    convexity_constant(model, f_max).map(|c| 2.0 * d.max(0.0) / c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_sum_excludes_self_interaction() {
        // unit masses at r = 1 and r = 2: each sees only the other
        let w = shell_double_sum(&[1.0, 2.0], &[1.0, 1.0], &[0, 1]);
        assert!((w - -0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_ensemble_has_zero_functionals() {
        let e = ParticleEnsemble::radial(vec![], vec![], vec![], vec![], vec![]).unwrap();
        let r = evaluate_ensemble(&e, &CasimirModel::pure_jump(), FieldSource::Ensemble { softening: 0.0 }).unwrap();
        assert_eq!((r.e_kin, r.e_pot_field, r.hamiltonian, r.casimir, r.mass), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn two_body_toy_energy() {
        let e = ParticleEnsemble::cartesian(vec![[0.0; 3], [2.0, 0.0, 0.0]], vec![[0.0; 3]; 2], vec![1.0; 2], vec![1.0; 2]).unwrap();
        let r = evaluate_ensemble(&e, &CasimirModel::pure_jump(), FieldSource::Ensemble { softening: 0.0 }).unwrap();
        assert_eq!(r.e_pot_double, -0.5);
    }

    #[test]
    fn convexity_constant_for_polytropes() {
        let m1 = CasimirModel::polytropic_plus_linear(1.0).unwrap();
        assert!((convexity_constant(&m1, 3.0).unwrap() - 2.0).abs() < 1e-12);
        let m05 = CasimirModel::polytropic_plus_linear(0.5).unwrap();
        assert!(convexity_constant(&m05, 3.0).is_none());
        let m2 = CasimirModel::polytropic_plus_linear(2.0).unwrap();
        let c = convexity_constant(&m2, 4.0).unwrap();
        assert!((c - 0.75 * 0.5).abs() < 1e-12);
    }
}
