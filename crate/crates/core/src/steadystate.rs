//! Spherically symmetric steady states: the self-consistent radial Poisson
//! problem `(1/r^2)(r^2 U')' = 4 pi h_phi(U)`, target-mass matching, the
//! closed-form Plummer sphere, and the dilations that map steady states to
//! steady states.
//!
//! The ODE is integrated for the well depth `w = E0 - U` and the enclosed
//! mass, starting from the series solution at the centre and stopping where
//! `w` reaches zero (the edge of the support). The additive gauge is then
//! fixed by matching `U` to the exterior Kepler potential `-M/r`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::casimir::{CasimirModel, EnergyCutoff, IsotropicDf, Moment};
use crate::error::{Error, Result};
use crate::numerics::{brent_root, dopri5, geometric_grid, hermite, simpson, OdeOptions, OdeSolution, QuadTolerance};

/// Radial grid and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridControl {
    /// Total number of radial grid points.
    pub points: usize,
    /// Outer radius as a multiple of the support radius (finite support).
    pub r_max_factor: f64,
    /// Outer radius in units of the scale radius (infinite support).
    pub r_max: Option<f64>,
    /// Innermost grid radius as a fraction of the support (or scale) radius.
    pub inner_fraction: f64,
    /// Give up if the support edge is not reached within this many core radii.
    pub max_radius_factor: f64,
    pub ode: OdeOptions,
    pub quad: QuadTolerance,
}

impl Default for GridControl {
    fn default() -> Self {
        Self {
            points: 4096,
            r_max_factor: 1.5,
            r_max: None,
            inner_fraction: 1e-4,
            max_radius_factor: 1e5,
            ode: OdeOptions::default(),
            quad: QuadTolerance::default(),
        }
    }
}

impl GridControl {
    pub fn with_points(mut self, points: usize) -> Self {
        self.points = points;
        self
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = Some(r_max);
        self
    }

    fn exterior_points(&self) -> usize {
        (self.points / 32).clamp(8, 256)
    }
}

const DEFAULT_PLUMMER_R_MAX: f64 = 1e3;

mod support_radius {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &f64, s: S) -> Result<S::Ok, S::Error> {
        if r.is_finite() {
            s.serialize_some(r)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Radial tabulation of an isotropic steady state.
///
/// `U` is gauged to vanish at infinity. Beyond the last grid point the
/// potential is continued by `-M/r` and the density by zero (finite
/// support) or by power-law extrapolation (Plummer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateProfile {
    pub model: CasimirModel,
    pub lambda0: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    /// `+inf` for infinite support; serialized as `null`.
    #[serde(rename = "R_support", with = "support_radius")]
    pub r_support: f64,
    pub total_mass: f64,
    pub casimir_mass: f64,
    pub r: Vec<f64>,
    #[serde(rename = "U")]
    pub u: Vec<f64>,
    pub rho: Vec<f64>,
    #[serde(rename = "M_enc")]
    pub m_enc: Vec<f64>,
}

/// Solution of the radial structure ODE in terms of the well depth.
struct Structure {
    sol: OdeSolution<2>,
    /// Radius where the depth reached zero, if it did.
    edge: Option<f64>,
    /// Characteristic core radius from the central curvature.
    core: f64,
}

fn integrate_structure(
    df: &IsotropicDf,
    central_depth: f64,
    r_end: Option<f64>,
    grid: &GridControl,
) -> Result<Structure> {
    // the density falls through many decades towards the edge, so only a
    // relative tolerance is meaningful here
    let df = &df.clone().with_tolerance(QuadTolerance { abs: 1e-300, ..grid.quad });
    let h0 = df.density_at_depth(central_depth)?;
    if !(h0 > 0.0) {
        return Err(Error::Domain(format!("central density vanishes at depth {central_depth:.3e}")));
    }
    // w(r) = depth - (2 pi / 3) h0 r^2 + O(r^4)
    let core = (central_depth / (2.0 * PI / 3.0 * h0)).sqrt();
    let r0 = 1e-7 * core;
    let w0 = central_depth - 2.0 * PI / 3.0 * h0 * r0 * r0;
    let m0 = 4.0 * PI / 3.0 * h0 * r0.powi(3);
    let rhs = |r: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let h = if y[0] > 0.0 { df.density_at_depth(y[0])? } else { 0.0 };
        Ok([-y[1] / (r * r), 4.0 * PI * r * r * h])
    };
    let (sol, edge) = match r_end {
        Some(end) => {
            let sol = dopri5(rhs, r0, [w0, m0], end, r0, grid.ode, None::<fn(f64, &[f64; 2]) -> f64>)?;
            (sol, None)
        }
        None => {
            let cap = grid.max_radius_factor * core;
            let sol = dopri5(rhs, r0, [w0, m0], cap, r0, grid.ode, Some(|_: f64, y: &[f64; 2]| y[0]))?;
            match sol.event {
                Some(edge) => (sol, Some(edge)),
                None => {
                    return Err(Error::Convergence(format!(
                        "density did not vanish within r = {cap:.3e}; no finite support found"
                    )))
                }
            }
        }
    };
    Ok(Structure { sol, edge, core })
}

fn reject_infinite_support(model: &CasimirModel) -> Result<()> {
    if model.is_plummer() || model.q_prime_zero() <= 0.0 {
        return Err(Error::Usage(format!(
            "model {} has Q'(0) = 0 and infinite support; use the Plummer closed form",
            model.name()
        )));
    }
    Ok(())
}

/// Support radius and total mass of the solution with the given depth,
/// without tabulating it.
pub fn support_and_mass(model: &CasimirModel, lambda0: f64, central_depth: f64, grid: &GridControl) -> Result<(f64, f64)> {
    reject_infinite_support(model)?;
    let cutoff = EnergyCutoff::for_model(model, lambda0)?;
    let df = IsotropicDf::new(model.clone(), cutoff).with_tolerance(grid.quad);
    let s = integrate_structure(&df, central_depth, None, grid)?;
    let last = s.sol.nodes.last().expect("solution has nodes");
    Ok((s.edge.expect("edge located"), last.y[1]))
}

/// Solves the Emden-Fowler type equation for a finite-support model with
/// multiplier `lambda0` and central well depth `E0 - U(0)`.
///
/// The resulting profile is a steady state; it satisfies the
/// Euler-Lagrange relation `E0 = lambda0 Q'(0)` only for the depth returned
/// by [`solve_self_consistent`], otherwise its `E0` is the gauge-fixed
/// value `-M/R` and [`SteadyStateProfile::cutoff_residual`] is nonzero.
pub fn solve_emden_fowler(
    model: &CasimirModel,
    lambda0: f64,
    central_depth: f64,
    grid: &GridControl,
) -> Result<SteadyStateProfile> {
    if !(central_depth > 0.0) {
        return Err(Error::Domain(format!("central depth must be positive, got {central_depth}")));
    }
    let cutoff = EnergyCutoff::for_model(model, lambda0)?;
    let df = IsotropicDf::new(model.clone(), cutoff).with_tolerance(grid.quad);
    if model.is_plummer() {
        return emden_fowler_unbounded(df, lambda0, central_depth, grid);
    }
    reject_infinite_support(model)?;
    let s = integrate_structure(&df, central_depth, None, grid)?;
    let r_support = s.edge.expect("edge located");
    let total_mass = s.sol.nodes.last().expect("nodes").y[1];
    let e0 = -total_mass / r_support;

    let n_ext = grid.exterior_points();
    let n_in = grid.points.saturating_sub(n_ext).max(16);
    let r_inner = (grid.inner_fraction * r_support).max(s.sol.nodes[0].t);
    let mut r = geometric_grid(r_inner, r_support, n_in);
    r.extend(geometric_grid(r_support, grid.r_max_factor * r_support, n_ext + 1).into_iter().skip(1));

    let mut u = Vec::with_capacity(r.len());
    let mut rho = Vec::with_capacity(r.len());
    let mut m_enc = Vec::with_capacity(r.len());
    for &ri in &r {
        if ri < r_support {
            let w = s.sol.interpolate(0, ri).max(0.0);
            u.push(e0 - w);
            rho.push(df.density_at_depth(w)?);
            m_enc.push(s.sol.interpolate(1, ri));
        } else {
            u.push(-total_mass / ri);
            rho.push(0.0);
            m_enc.push(total_mass);
        }
    }
    let mut profile = SteadyStateProfile {
        model: model.clone(),
        lambda0,
        e0,
        r_support,
        total_mass,
        casimir_mass: 0.0,
        r,
        u,
        rho,
        m_enc,
    };
    profile.casimir_mass = profile.moment_integral(Moment::Casimir, grid.quad)?;
    Ok(profile)
}

/// Infinite support: `E0 = 0` is already the gauge `U -> 0`, so the
/// structure equation is integrated out to `r_max` (in units of the core
/// radius) and the mass beyond it is neglected.
fn emden_fowler_unbounded(df: IsotropicDf, lambda0: f64, central_depth: f64, grid: &GridControl) -> Result<SteadyStateProfile> {
    let h0 = df.density_at_depth(central_depth)?;
    let core = (central_depth / (2.0 * PI / 3.0 * h0)).sqrt();
    let r_end = grid.r_max.unwrap_or(DEFAULT_PLUMMER_R_MAX) * core;
    let s = integrate_structure(&df, central_depth, Some(r_end), grid)?;
    let r = geometric_grid(grid.inner_fraction * s.core, r_end, grid.points.max(16));
    let e0 = df.cutoff.e0;
    let mut u = Vec::with_capacity(r.len());
    let mut rho = Vec::with_capacity(r.len());
    let mut m_enc = Vec::with_capacity(r.len());
    for &ri in &r {
        let w = s.sol.interpolate(0, ri).max(0.0);
        u.push(e0 - w);
        rho.push(df.density_at_depth(w)?);
        m_enc.push(s.sol.interpolate(1, ri));
    }
    let total_mass = *m_enc.last().expect("grid has points");
    let mut profile = SteadyStateProfile {
        model: df.model.clone(),
        lambda0,
        e0,
        r_support: f64::INFINITY,
        total_mass,
        casimir_mass: 0.0,
        r,
        u,
        rho,
        m_enc,
    };
    profile.casimir_mass = profile.moment_integral(Moment::Casimir, grid.quad)?;
    Ok(profile)
}

/// Central depth at which the gauge-fixed cutoff `-M/R` equals
/// `lambda0 Q'(0)`, so that `f0 = phi(E)` solves the Euler-Lagrange
/// relation with the prescribed multiplier.
pub fn self_consistent_depth(model: &CasimirModel, lambda0: f64, grid: &GridControl) -> Result<f64> {
    reject_infinite_support(model)?;
    let target = -lambda0 * model.q_prime_zero();
    let residual = |depth: f64| -> Result<f64> {
        let (r, m) = support_and_mass(model, lambda0, depth, grid)?;
        Ok(m / r - target)
    };
    let mut lo = -lambda0;
    let mut f_lo = residual(lo)?;
    let mut hi = lo;
    let mut f_hi = f_lo;
    let mut expansions = 0;
    while f_lo.signum() == f_hi.signum() {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Range(format!("no self-consistent depth found for lambda0 = {lambda0}")));
        }
        if f_hi < 0.0 {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            f_hi = residual(hi)?;
        } else {
            hi = lo;
            f_hi = f_lo;
            lo *= 0.5;
            f_lo = residual(lo)?;
        }
    }
    brent_root(residual, lo, hi, 1e-14 * hi, 200)
}

/// Euler-Lagrange consistent steady state for the multiplier `lambda0`.
pub fn solve_self_consistent(model: &CasimirModel, lambda0: f64, grid: &GridControl) -> Result<SteadyStateProfile> {
    let depth = self_consistent_depth(model, lambda0, grid)?;
    solve_emden_fowler(model, lambda0, depth, grid)
}

/// Relative tolerance on the Casimir constraint for [`match_target_mass`].
pub const MASS_MATCH_RTOL: f64 = 1e-6;

/// Constructs the steady state with `C(f0) = target_mass`.
///
/// A reference state at `lambda0 = -1` is scaled to the target with the
/// Casimir-preserving dilation `b = a^-2` (under which `lambda0` scales by
/// `a^4`), and the multiplier is then refined by secant iteration on
/// `ln C(ln |lambda0|)`, each iterate being an independent ODE solve.
pub fn match_target_mass(model: &CasimirModel, target_mass: f64, grid: &GridControl) -> Result<SteadyStateProfile> {
    reject_infinite_support(model)?;
    if !(target_mass > 0.0) {
        return Err(Error::Domain(format!("target mass must be positive, got {target_mass}")));
    }
    let reference = solve_self_consistent(model, -1.0, grid)?;
    let mut x = (4.0 / 3.0) * (target_mass / reference.casimir_mass).ln();
    let mut prev: Option<(f64, f64)> = Some((0.0, reference.casimir_mass.ln()));
    let goal = target_mass.ln();
    let mut best: Option<SteadyStateProfile> = None;
    let mut attained = (reference.casimir_mass, reference.casimir_mass);
    for _ in 0..12 {
        let p = solve_self_consistent(model, -x.exp(), grid)?;
        let c = p.casimir_mass;
        attained = (attained.0.min(c), attained.1.max(c));
        let y = c.ln();
        if (c / target_mass - 1.0).abs() < 1e-11 {
            return Ok(p);
        }
        let slope = match prev {
            Some((xp, yp)) if (x - xp).abs() > 1e-14 => (y - yp) / (x - xp),
            _ => 0.75,
        };
        let slope = if slope.is_finite() && slope > 0.0 { slope } else { 0.75 };
        prev = Some((x, y));
        x += (goal - y) / slope;
        best = Some(p);
    }
    match best {
        Some(p) if (p.casimir_mass / target_mass - 1.0).abs() < MASS_MATCH_RTOL => Ok(p),
        _ => Err(Error::Convergence(format!(
            "could not match Casimir mass {target_mass:.6e}; attained range [{:.6e}, {:.6e}]",
            attained.0, attained.1
        ))),
    }
}

/// Plummer sphere `U = -m / sqrt(r^2 + s^2)` with total mass `m` and scale
/// radius `s`, tabulated from its closed form. The multiplier of its
/// distribution function `phi(E) = (7E / 9 lambda0)^(7/2)` is recovered
/// numerically by matching the central density.
pub fn plummer_profile(mass: f64, scale: f64, grid: &GridControl) -> Result<SteadyStateProfile> {
    if !(mass > 0.0 && scale > 0.0) {
        return Err(Error::Domain(format!("Plummer mass and scale must be positive, got {mass}, {scale}")));
    }
    let model = CasimirModel::plummer_power();
    let rho_c = 3.0 * mass / (4.0 * PI * scale.powi(3));
    let u_c = -mass / scale;
    // h scales as |lambda0|^(-7/2) at fixed potential
    let unit = IsotropicDf::new(model.clone(), EnergyCutoff::for_model(&model, -1.0)?).with_tolerance(grid.quad);
    let h_unit = unit.density_of_potential(u_c)?;
    let lambda0 = -(h_unit / rho_c).powf(2.0 / 7.0);

    let r_max = grid.r_max.unwrap_or(DEFAULT_PLUMMER_R_MAX) * scale;
    let r = geometric_grid(grid.inner_fraction * scale, r_max, grid.points.max(16));
    let s2 = scale * scale;
    let u = r.iter().map(|&x| -mass / (x * x + s2).sqrt()).collect();
    let rho = r.iter().map(|&x| rho_c * (1.0 + x * x / s2).powf(-2.5)).collect();
    let m_enc = r.iter().map(|&x| mass * x.powi(3) / (x * x + s2).powf(1.5)).collect();
    let mut profile = SteadyStateProfile {
        model,
        lambda0,
        e0: 0.0,
        r_support: f64::INFINITY,
        total_mass: mass,
        casimir_mass: 0.0,
        r,
        u,
        rho,
        m_enc,
    };
    profile.casimir_mass = profile.moment_integral(Moment::Casimir, grid.quad)?;
    Ok(profile)
}

/// The Plummer sphere with `U0 = -c0 (1 + r^2)^(-1/2)`.
pub fn plummer_closed_form(c0: f64, grid: &GridControl) -> Result<SteadyStateProfile> {
    if !(c0 > 0.0) {
        return Err(Error::Domain(format!("c0 must be positive, got {c0}")));
    }
    plummer_profile(c0, 1.0, grid)
}

/// Outward integration of the radial Poisson equation for an arbitrary
/// distribution function and central potential, tabulated on a geometric
/// grid up to `r_end`. No support detection or gauge fixing is applied:
/// `U` is reported in the gauge of the supplied cutoff.
pub fn integrate_poisson(
    df: &IsotropicDf,
    central_potential: f64,
    r_end: f64,
    grid: &GridControl,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let depth = df.cutoff.e0 - central_potential;
    let s = integrate_structure(df, depth, Some(r_end), grid)?;
    let r = geometric_grid(s.sol.nodes[0].t.max(grid.inner_fraction * s.core), r_end, grid.points.max(16));
    let u = r.iter().map(|&x| df.cutoff.e0 - s.sol.interpolate(0, x)).collect();
    let m = r.iter().map(|&x| s.sol.interpolate(1, x)).collect();
    Ok((r, u, m))
}

/// Maps `f(x, v)` to `A f(a x, b v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalingTransform {
    /// `f(a x, b v)`, amplitude unchanged.
    Dilation { a: f64, b: f64 },
    /// `lambda^-7 f(lambda^-4 x, lambda v)`, the symmetry of the Plummer
    /// functional.
    Plummer { lambda: f64 },
}

impl ScalingTransform {
    pub fn dilation(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!("dilation factors must be positive, got a = {a}, b = {b}")));
        }
        Ok(Self::Dilation { a, b })
    }

    pub fn plummer(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("Plummer scaling parameter must be positive, got {lambda}")));
        }
        Ok(Self::Plummer { lambda })
    }

    /// `(A, a, b)`.
    pub fn factors(&self) -> (f64, f64, f64) {
        match *self {
            Self::Dilation { a, b } => (1.0, a, b),
            Self::Plummer { lambda } => (lambda.powi(-7), lambda.powi(-4), lambda),
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.factors().0
    }

    /// Factor applied to particle positions (`x -> x / a`).
    pub fn position_factor(&self) -> f64 {
        1.0 / self.factors().1
    }

    /// Factor applied to particle velocities (`v -> v / b`).
    pub fn velocity_factor(&self) -> f64 {
        1.0 / self.factors().2
    }

    /// Factor applied to phase-space volume elements, `(ab)^-3`.
    pub fn volume_factor(&self) -> f64 {
        let (_, a, b) = self.factors();
        (a * b).powi(-3)
    }

    pub fn mass_factor(&self) -> f64 {
        self.amplitude() * self.volume_factor()
    }

    /// `E_kin -> A a^-3 b^-5 E_kin`.
    pub fn kinetic_factor(&self) -> f64 {
        let (amp, a, b) = self.factors();
        amp * a.powi(-3) * b.powi(-5)
    }

    /// `E_pot -> A^2 a^-5 b^-6 E_pot`.
    pub fn potential_factor(&self) -> f64 {
        let (amp, a, b) = self.factors();
        amp * amp * a.powi(-5) * b.powi(-6)
    }

    /// Factor on `C`, available when `Q` is compatible with the amplitude
    /// change (any `Q` for `A = 1`, the homogeneous Plummer `Q` otherwise).
    pub fn casimir_factor(&self, model: &CasimirModel) -> Option<f64> {
        let amp = self.amplitude();
        if amp == 1.0 {
            Some(self.volume_factor())
        } else if model.is_plummer() {
            Some(amp.powf(9.0 / 7.0) * self.volume_factor())
        } else {
            None
        }
    }

    /// Whether the transform maps isotropic steady states of `model` to
    /// steady states (`A = a^2 b` and a compatible `Q`).
    pub fn preserves_steady_states(&self, model: &CasimirModel) -> bool {
        let (amp, a, b) = self.factors();
        let consistent = (amp - a * a * b).abs() <= 1e-12 * amp.max(a * a * b);
        consistent && (amp == 1.0 || model.is_plummer())
    }
}

impl SteadyStateProfile {
    pub fn cutoff(&self) -> EnergyCutoff {
        EnergyCutoff { lambda0: self.lambda0, e0: self.e0 }
    }

    /// The distribution function `f0 = phi(E)` of this profile.
    pub fn df(&self) -> IsotropicDf {
        IsotropicDf::new(self.model.clone(), self.cutoff())
    }

    pub fn has_finite_support(&self) -> bool {
        self.r_support.is_finite()
    }

    /// `E0 - lambda0 Q'(0)`.
    pub fn cutoff_residual(&self) -> f64 {
        self.cutoff().residual(&self.model)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    fn segment(&self, r: f64) -> usize {
        let i = self.r.partition_point(|&x| x <= r);
        i.saturating_sub(1).min(self.r.len() - 2)
    }

    /// `dU/dr = M/r^2`.
    fn potential_slope(&self, i: usize) -> f64 {
        self.m_enc[i] / (self.r[i] * self.r[i])
    }

    /// Potential at any radius: Hermite interpolation inside the grid, the
    /// central parabola below it and `-M/r` beyond it.
    pub fn potential_at(&self, r: f64) -> f64 {
        let n = self.r.len();
        let r0 = self.r[0];
        if r <= r0 {
            let curvature = self.potential_slope(0) / (2.0 * r0);
            return self.u[0] + curvature * (r * r - r0 * r0);
        }
        if r >= self.r[n - 1] {
            return self.u[n - 1] * self.r[n - 1] / r;
        }
        let i = self.segment(r);
        hermite(
            self.r[i],
            self.r[i + 1],
            self.u[i],
            self.u[i + 1],
            self.potential_slope(i),
            self.potential_slope(i + 1),
            r,
        )
    }

    /// `dU/dr` at any radius.
    pub fn potential_gradient_at(&self, r: f64) -> f64 {
        let m = self.mass_at(r);
        if r > 0.0 {
            m / (r * r)
        } else {
            0.0
        }
    }

    /// Enclosed mass at any radius.
    pub fn mass_at(&self, r: f64) -> f64 {
        let n = self.r.len();
        let r0 = self.r[0];
        if r <= 0.0 {
            return 0.0;
        }
        if r <= r0 {
            return self.m_enc[0] * (r / r0).powi(3);
        }
        if r >= self.r[n - 1] {
            return self.m_enc[n - 1];
        }
        let i = self.segment(r);
        let slope = |j: usize| 4.0 * PI * self.r[j] * self.r[j] * self.rho[j];
        hermite(self.r[i], self.r[i + 1], self.m_enc[i], self.m_enc[i + 1], slope(i), slope(i + 1), r)
    }

    /// Well depth `E0 - U(r)`, clamped at zero.
    pub fn depth_at(&self, r: f64) -> f64 {
        (self.e0 - self.potential_at(r)).max(0.0)
    }

    /// Mass enclosed by the outermost grid point.
    pub fn tabulated_mass(&self) -> f64 {
        *self.m_enc.last().expect("nonempty profile")
    }

    /// Radius enclosing half of the total mass.
    pub fn half_mass_radius(&self) -> f64 {
        let half = 0.5 * self.total_mass;
        let i = self.m_enc.partition_point(|&m| m < half).clamp(1, self.r.len() - 1);
        brent_root(|r| Ok(self.mass_at(r) - half), self.r[i - 1], self.r[i], 1e-14 * self.r[i], 200)
            .unwrap_or(self.r[i])
    }

    /// `2 pi sqrt(R_h^3 / M)`.
    pub fn dynamical_time(&self) -> f64 {
        let rh = self.half_mass_radius();
        2.0 * PI * (rh.powi(3) / self.total_mass).sqrt()
    }

    /// `int 4 pi r^2 g(r) dr` for samples `g` on the grid: Simpson in `ln r`,
    /// power-law continuation below the innermost point and beyond the
    /// outermost one.
    pub fn shell_integral(&self, g: &[f64]) -> f64 {
        radial_integral(&self.r, g)
    }

    /// `int 4 pi r^2 (velocity moment of f0 at U(r)) dr`.
    pub fn moment_integral(&self, moment: Moment, tol: QuadTolerance) -> Result<f64> {
        let values = self.moment_values(moment, tol)?;
        Ok(self.shell_integral(&values))
    }

    /// Velocity moment of `f0` at every grid point.
    pub fn moment_values(&self, moment: Moment, tol: QuadTolerance) -> Result<Vec<f64>> {
        let df = self.df().with_tolerance(tol);
        self.u.iter().map(|&u| Ok(df.moment_at_depth(moment, self.e0 - u)?.value)).collect()
    }

    /// Applies a steady-state preserving scaling to the tabulation.
    pub fn apply_scaling(&self, t: &ScalingTransform) -> Result<Self> {
        if !t.preserves_steady_states(&self.model) {
            return Err(Error::Usage(format!("{t:?} does not map steady states of {} to steady states", self.model.name())));
        }
        let (amp, a, b) = t.factors();
        let ub = b.powi(-2);
        let lambda0 = self.lambda0 / (b * b * amp.powf(2.0 / 7.0));
        let casimir = t.casimir_factor(&self.model).expect("checked above");
        Ok(Self {
            model: self.model.clone(),
            lambda0,
            e0: self.e0 * ub,
            r_support: self.r_support / a,
            total_mass: self.total_mass * t.mass_factor(),
            casimir_mass: self.casimir_mass * casimir,
            r: self.r.iter().map(|r| r / a).collect(),
            u: self.u.iter().map(|u| u * ub).collect(),
            rho: self.rho.iter().map(|r| r * amp * b.powi(-3)).collect(),
            m_enc: self.m_enc.iter().map(|m| m * t.mass_factor()).collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.check_shape()?;
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.r.len();
        if n < 3 || self.u.len() != n || self.rho.len() != n || self.m_enc.len() != n {
            return Err(Error::Format("profile arrays must have equal length >= 3".into()));
        }
        if self.r.windows(2).any(|w| !(w[1] > w[0])) || !(self.r[0] > 0.0) {
            return Err(Error::Format("profile radii must be positive and increasing".into()));
        }
        Ok(())
    }
}

/// `int_0^inf 4 pi r^2 g(r) dr` from samples on an increasing grid.
pub fn radial_integral(r: &[f64], g: &[f64]) -> f64 {
    let (head, body, tail) = radial_integral_parts(r, g);
    head + body + tail
}

/// The pieces of [`radial_integral`]: the power-law continuation below the
/// grid, the Simpson sum over it, and the power-law tail beyond it.
pub fn radial_integral_parts(r: &[f64], g: &[f64]) -> (f64, f64, f64) {
    let n = r.len();
    let x: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = r.iter().zip(g).map(|(&ri, &gi)| 4.0 * PI * ri.powi(3) * gi).collect();
    let body = simpson(&x, &y);
    // g ~ r^p near the centre: int_0^r0 4 pi r^2 g = y0 / (p + 3)
    let head = if y[0] != 0.0 && y[1] != 0.0 && y[0].signum() == y[1].signum() {
        let p = (y[1] / y[0]).ln() / (x[1] - x[0]);
        if p > 0.0 {
            y[0] / p
        } else {
            0.0
        }
    } else {
        0.0
    };
    let tail = if y[n - 1] != 0.0 && y[n - 2] != 0.0 && y[n - 1].signum() == y[n - 2].signum() {
        let p = (y[n - 1] / y[n - 2]).ln() / (x[n - 1] - x[n - 2]);
        if p < 0.0 {
            -y[n - 1] / p
        } else {
            0.0
        }
    } else {
        0.0
    };
    (head, body, tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> GridControl {
        GridControl::default().with_points(1024)
    }

    #[test]
    fn plummer_closed_form_values() {
        let p = plummer_closed_form(1.0, &coarse()).unwrap();
        assert_eq!(p.e0, 0.0);
        assert!(p.r_support.is_infinite());
        assert_eq!(p.total_mass, 1.0);
        assert!((p.potential_at(0.0) + 1.0).abs() < 1e-12);
        assert!((p.rho[0] - 3.0 / (4.0 * PI)).abs() < 1e-7);
        let ratio = p.mass_at(1.0) / p.total_mass;
        assert!((ratio - 2f64.powf(-1.5)).abs() < 1e-7);
        assert!(p.lambda0 < 0.0);
        assert!(plummer_closed_form(0.0, &coarse()).is_err());
    }

    #[test]
    fn plummer_ode_route_follows_closed_form() {
        let m = CasimirModel::plummer_power();
        let exact = plummer_closed_form(1.0, &coarse()).unwrap();
        let p = solve_emden_fowler(&m, exact.lambda0, 1.0, &coarse()).unwrap();
        assert!(p.r_support.is_infinite());
        for r in [0.0f64, 0.5, 1.0, 3.0] {
            let want = -1.0 / (1.0 + r * r).sqrt();
            assert!((p.potential_at(r) / want - 1.0).abs() < 1e-4, "r = {r}");
        }
        assert!(matches!(match_target_mass(&m, 1.0, &coarse()), Err(Error::Usage(_))));
    }

    #[test]
    fn polytrope_has_finite_support_and_monotone_potential() {
        let m = CasimirModel::polytropic_plus_linear(1.0).unwrap();
        let p = solve_emden_fowler(&m, -1.0, 0.5, &coarse()).unwrap();
        assert!(p.r_support.is_finite() && p.r_support > 0.0);
        assert!(p.u.windows(2).all(|w| w[1] > w[0]));
        assert!(p.u.iter().all(|&u| u < 0.0));
        assert!(p.m_enc.windows(2).all(|w| w[1] >= w[0]));
        let i = p.r.iter().position(|&r| r == p.r_support).unwrap();
        assert_eq!(p.rho[i], 0.0);
        assert!((p.potential_at(p.r_support) + p.total_mass / p.r_support).abs() < 1e-12);
        assert!((p.potential_at(2.0 * p.r_support) * 2.0 * p.r_support + p.total_mass).abs() < 1e-12);
    }

    #[test]
    fn scaling_factor_laws() {
        let t = ScalingTransform::dilation(2.0, 1.0).unwrap();
        let m = CasimirModel::polytropic_plus_linear(1.0).unwrap();
        assert_eq!(t.casimir_factor(&m), Some(0.125));
        let s = ScalingTransform::plummer(1.3).unwrap();
        let pm = CasimirModel::plummer_power();
        assert!((s.kinetic_factor() - 1.0).abs() < 1e-14);
        assert!((s.potential_factor() - 1.0).abs() < 1e-14);
        assert!((s.casimir_factor(&pm).unwrap() - 1.0).abs() < 1e-14);
        assert!(s.casimir_factor(&m).is_none());
        assert!(s.preserves_steady_states(&pm));
        assert!(!ScalingTransform::dilation(2.0, 0.5).unwrap().preserves_steady_states(&m));
        assert!(ScalingTransform::dilation(2.0, 0.25).unwrap().preserves_steady_states(&m));
        assert!(ScalingTransform::dilation(0.0, 1.0).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let p = plummer_closed_form(1.0, &GridControl::default().with_points(64)).unwrap();
        let back = SteadyStateProfile::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);
        assert!(p.to_json().unwrap().contains("\"R_support\": null"));
    }
}
