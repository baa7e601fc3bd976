//! The Casimir integrand `Q`, its admissibility checks, and the isotropic
//! distribution function `phi(E)` obtained by inverting `lambda0 Q'(f) = E`.
//!
//! Velocity integrals of `phi` (mass, kinetic-energy and Casimir densities as
//! functions of the local potential) are evaluated by adaptive quadrature
//! after the substitution `E = u + s^2`, which removes the square-root
//! endpoint singularity of the isotropic velocity measure.

use std::cell::Cell;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate, MonotoneCubic, QuadTolerance, Quadrature};

/// `4 pi sqrt(2)`, the prefactor of every isotropic velocity integral.
pub const VELOCITY_PREFACTOR: f64 = 4.0 * PI * std::f64::consts::SQRT_2;

/// Largest admissible exponent in the growth bound; reached only by the
/// Plummer power law.
pub const K_PLUMMER: f64 = 3.5;

const BISECTION_RTOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;

/// Sampled `Q` with a monotone cubic interpolant; `Q'` is the analytic
/// derivative of the interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedSamples", into = "TabulatedSamples")]
pub struct TabulatedQ {
    interp: Arc<MonotoneCubic>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TabulatedSamples {
    f: Vec<f64>,
    q: Vec<f64>,
}

impl TryFrom<TabulatedSamples> for TabulatedQ {
    type Error = Error;
    fn try_from(s: TabulatedSamples) -> Result<Self> {
        TabulatedQ::new(s.f, s.q)
    }
}

impl From<TabulatedQ> for TabulatedSamples {
    fn from(t: TabulatedQ) -> Self {
        let (f, q) = t.interp.nodes();
        TabulatedSamples { f: f.to_vec(), q: q.to_vec() }
    }
}

impl TabulatedQ {
    pub fn new(f: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if f.first().copied() != Some(0.0) {
            return Err(Error::Usage("tabulated Q must start at f = 0".into()));
        }
        Ok(Self { interp: Arc::new(MonotoneCubic::new(f, q)?) })
    }

    /// Tabulate `q` at `f = 0` and `n` log-spaced points in `[f_min, f_max]`.
    pub fn from_fn(q: impl Fn(f64) -> f64, f_min: f64, f_max: f64, n: usize) -> Result<Self> {
        let mut f = vec![0.0];
        f.extend(crate::numerics::geometric_grid(f_min, f_max, n));
        let qs = f.iter().map(|&x| q(x)).collect();
        Self::new(f, qs)
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        self.interp.nodes()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CasimirKind {
    /// `Q(f) = f + f^(1 + 1/k)`, leading to polytropes.
    PolytropicPlusLinear { k: f64 },
    /// `Q(f) = f` on `[0, 1]`, `(f^2 + 1)/2` beyond; `f0` jumps at `E0`.
    PureJump,
    /// `Q(f) = f^(9/7)`, the Plummer limit `k = 7/2`.
    PlummerPower,
    /// Sampled `Q` with a declared growth exponent.
    Tabulated { table: TabulatedQ, k: f64 },
}

/// A Casimir integrand together with the constant of the growth bound
/// `Q(f) >= C (f + f^(1 + 1/k))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasimirModel {
    pub kind: CasimirKind,
    pub growth_constant: f64,
}

impl CasimirModel {
    pub fn polytropic_plus_linear(k: f64) -> Result<Self> {
        if !(k > 0.0 && k < K_PLUMMER) {
            return Err(Error::Domain(format!("polytropic exponent k = {k} outside (0, 7/2)")));
        }
        // f + f^(1+1/k) >= 1 * (f + f^(1+1/k))
        Ok(Self { kind: CasimirKind::PolytropicPlusLinear { k }, growth_constant: 1.0 })
    }

    pub fn pure_jump() -> Self {
        // the bound holds with k = 1 for any C <= sqrt(2) - 1
        Self { kind: CasimirKind::PureJump, growth_constant: 0.4 }
    }

    pub fn plummer_power() -> Self {
        Self { kind: CasimirKind::PlummerPower, growth_constant: 1.0 }
    }

    pub fn tabulated(table: TabulatedQ, k: f64, growth_constant: f64) -> Result<Self> {
        if !(k > 0.0 && k < K_PLUMMER) {
            return Err(Error::Domain(format!("growth exponent k = {k} outside (0, 7/2)")));
        }
        if !(growth_constant > 0.0) {
            return Err(Error::Domain("growth constant must be positive".into()));
        }
        Ok(Self { kind: CasimirKind::Tabulated { table, k }, growth_constant })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CasimirKind::PolytropicPlusLinear { .. } => "polytropic_plus_linear",
            CasimirKind::PureJump => "pure_jump",
            CasimirKind::PlummerPower => "plummer_power",
            CasimirKind::Tabulated { .. } => "tabulated",
        }
    }

    /// Growth exponent `k` of the admissibility bound.
    pub fn k(&self) -> f64 {
        match &self.kind {
            CasimirKind::PolytropicPlusLinear { k } => *k,
            CasimirKind::PureJump => 1.0,
            CasimirKind::PlummerPower => K_PLUMMER,
            CasimirKind::Tabulated { k, .. } => *k,
        }
    }

    /// `n = k + 3/2`, the exponent of the density-potential relation.
    pub fn polytropic_index(&self) -> f64 {
        self.k() + 1.5
    }

    pub fn is_plummer(&self) -> bool {
        matches!(self.kind, CasimirKind::PlummerPower)
    }

    pub fn q(&self, f: f64) -> f64 {
        match &self.kind {
            CasimirKind::PolytropicPlusLinear { k } => f + f.powf(1.0 + 1.0 / k),
            CasimirKind::PureJump => {
                if f <= 1.0 {
                    f
                } else {
                    0.5 * (f * f + 1.0)
                }
            }
            CasimirKind::PlummerPower => f.powf(9.0 / 7.0),
            CasimirKind::Tabulated { table, .. } => table.interp.value(f),
        }
    }

    /// `Q'(f)`; at the kink of the jump model the left derivative is used.
    pub fn q_prime(&self, f: f64) -> f64 {
        match &self.kind {
            CasimirKind::PolytropicPlusLinear { k } => 1.0 + (1.0 + 1.0 / k) * f.powf(1.0 / k),
            CasimirKind::PureJump => f.max(1.0),
            CasimirKind::PlummerPower => 9.0 / 7.0 * f.powf(2.0 / 7.0),
            CasimirKind::Tabulated { table, .. } => table.interp.slope(f),
        }
    }

    /// `Q''(f)` where it exists in closed form.
    pub fn q_second(&self, f: f64) -> Option<f64> {
        match &self.kind {
            CasimirKind::PolytropicPlusLinear { k } if f > 0.0 => {
                Some((1.0 + 1.0 / k) / k * f.powf(1.0 / k - 1.0))
            }
            CasimirKind::PureJump if f != 1.0 => Some(if f < 1.0 { 0.0 } else { 1.0 }),
            CasimirKind::PlummerPower if f > 0.0 => Some(18.0 / 49.0 * f.powf(-5.0 / 7.0)),
            _ => None,
        }
    }

    pub fn q_prime_zero(&self) -> f64 {
        self.q_prime(0.0)
    }

    /// Checks `Q(0) = 0`, `Q >= 0`, convexity (nondecreasing secant slopes)
    /// and the growth bound on the supplied grid.
    pub fn validate(&self, f_grid: &[f64]) -> Result<ValidationReport> {
        if f_grid.is_empty() {
            return Err(Error::Usage("validation grid is empty".into()));
        }
        if f_grid.iter().any(|&f| !(f >= 0.0)) || f_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Usage("validation grid must be nonnegative and strictly increasing".into()));
        }
        let q: Vec<f64> = f_grid.iter().map(|&f| self.q(f)).collect();
        let scale = q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let eps = 1e-12 * scale;

        let q0 = self.q(0.0);
        let zero = AssumptionCheck {
            assumption: Assumption::ZeroAtOrigin,
            passed: q0.abs() <= 1e-14,
            first_violation: (q0.abs() > 1e-14).then_some(0.0),
        };

        let neg = f_grid.iter().zip(&q).find(|(_, &qv)| qv < -eps).map(|(&f, _)| f);
        let nonneg = AssumptionCheck { assumption: Assumption::Nonnegative, passed: neg.is_none(), first_violation: neg };

        let slopes: Vec<(f64, f64)> =
            f_grid.windows(2).zip(q.windows(2)).map(|(f, qq)| (f[1], (qq[1] - qq[0]) / (f[1] - f[0]))).collect();
        let concave = slopes.windows(2).find(|s| s[1].1 < s[0].1 - 1e-10 * s[0].1.abs().max(1.0)).map(|s| s[1].0);
        let convex = AssumptionCheck { assumption: Assumption::Convex, passed: concave.is_none(), first_violation: concave };

        let k = self.k();
        let mut max_growth = f64::INFINITY;
        let mut growth_violation = None;
        for (&f, &qv) in f_grid.iter().zip(&q) {
            if f == 0.0 {
                continue;
            }
            let bound = f + f.powf(1.0 + 1.0 / k);
            max_growth = max_growth.min(qv / bound);
            if growth_violation.is_none() && qv < self.growth_constant * bound * (1.0 - 1e-12) {
                growth_violation = Some(f);
            }
        }
        let exempt = self.is_plummer();
        let growth = AssumptionCheck {
            assumption: Assumption::GrowthBound,
            passed: exempt || growth_violation.is_none(),
            first_violation: if exempt { None } else { growth_violation },
        };
        Ok(ValidationReport {
            checks: vec![zero, nonneg, convex, growth],
            growth_exempt: exempt,
            max_growth_constant: max_growth,
        })
    }

    /// `inf { f >= 0 : Q'(f) >= target }` by bisection on the monotone `Q'`.
    pub fn invert_qprime_bisection(&self, target: f64) -> Result<f64> {
        if self.q_prime(0.0) >= target {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut doublings = 0;
        while self.q_prime(hi) < target {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 1000 || !hi.is_finite() {
                return Err(Error::Range(format!("Q' never reaches {target:.6e}")));
            }
        }
        if let CasimirKind::Tabulated { table, .. } = &self.kind {
            let (f, _) = table.samples();
            if hi > *f.last().unwrap() && self.q_prime(*f.last().unwrap()) < target {
                return Err(Error::Range(format!(
                    "Q' = {target:.6e} lies beyond the tabulated range of Q'"
                )));
            }
        }
        for _ in 0..BISECTION_MAX_ITER {
            if hi - lo <= BISECTION_RTOL * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.q_prime(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Exact inverse of `Q'` for the analytic kinds (same infimum convention
    /// as the bisection), bisection for tabulated models.
    pub fn inverse_qprime(&self, target: f64) -> Result<f64> {
        Ok(match &self.kind {
            CasimirKind::PolytropicPlusLinear { k } => {
                if target <= 1.0 {
                    0.0
                } else {
                    ((target - 1.0) / (1.0 + 1.0 / k)).powf(*k)
                }
            }
            CasimirKind::PureJump => {
                if target <= 1.0 {
                    0.0
                } else {
                    target
                }
            }
            CasimirKind::PlummerPower => {
                if target <= 0.0 {
                    0.0
                } else {
                    (7.0 / 9.0 * target).powf(3.5)
                }
            }
            CasimirKind::Tabulated { .. } => self.invert_qprime_bisection(target)?,
        })
    }

    /// `phi(E) = inf { f >= 0 : Q'(f) = E / lambda0 }`, zero for `E >= E0`.
    pub fn invert_qprime(&self, cutoff: &EnergyCutoff, energy: f64) -> Result<f64> {
        if !(cutoff.lambda0 < 0.0) {
            return Err(Error::Domain(format!("Lagrange multiplier must be negative, got {}", cutoff.lambda0)));
        }
        self.phi_at_depth(cutoff, cutoff.e0 - energy)
    }

    /// `phi` as a function of the depth `E0 - E` below the cutoff.
    pub fn phi_at_depth(&self, cutoff: &EnergyCutoff, depth: f64) -> Result<f64> {
        if !(depth > 0.0) {
            return Ok(0.0);
        }
        self.inverse_qprime(self.q_prime_zero() + depth / -cutoff.lambda0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    ZeroAtOrigin,
    Nonnegative,
    Convex,
    GrowthBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    /// First grid value of `f` at which the check failed.
    pub first_violation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    /// The Plummer power law is exempt from the growth bound.
    pub growth_exempt: bool,
    /// Largest `C` with `Q(f) >= C (f + f^(1+1/k))` on the grid.
    pub max_growth_constant: f64,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, a: Assumption) -> &AssumptionCheck {
        self.checks.iter().find(|c| c.assumption == a).expect("every assumption is checked")
    }
}

/// Lagrange multiplier and cutoff energy of a steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCutoff {
    pub lambda0: f64,
    pub e0: f64,
}

impl EnergyCutoff {
    /// The Euler-Lagrange cutoff `E0 = lambda0 Q'(0)`.
    pub fn for_model(model: &CasimirModel, lambda0: f64) -> Result<Self> {
        if !(lambda0 < 0.0) {
            return Err(Error::Domain(format!("Lagrange multiplier must be negative, got {lambda0}")));
        }
        Ok(Self { lambda0, e0: lambda0 * model.q_prime_zero() })
    }

    /// Cutoff shifted by an additive gauge: `phi` keeps its shape in
    /// `E0 - E` but `E0` no longer equals `lambda0 Q'(0)`.
    pub fn shifted(lambda0: f64, e0: f64) -> Result<Self> {
        if !(lambda0 < 0.0) {
            return Err(Error::Domain(format!("Lagrange multiplier must be negative, got {lambda0}")));
        }
        Ok(Self { lambda0, e0 })
    }

    /// `E0 - lambda0 Q'(0)`; zero for an Euler-Lagrange consistent cutoff.
    pub fn residual(&self, model: &CasimirModel) -> f64 {
        self.e0 - self.lambda0 * model.q_prime_zero()
    }
}

/// Which velocity moment of `phi` to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    /// `int phi dv`
    Mass,
    /// `int |v|^2/2 phi dv`
    Kinetic,
    /// `int Q(phi) dv`
    Casimir,
    /// `int Q'(phi) phi dv`
    EulerLagrange,
}

/// The isotropic distribution function `f0 = phi(E)` of a model and cutoff,
/// with the quadrature settings used for its velocity integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicDf {
    pub model: CasimirModel,
    pub cutoff: EnergyCutoff,
    pub tol: QuadTolerance,
}

impl IsotropicDf {
    pub fn new(model: CasimirModel, cutoff: EnergyCutoff) -> Self {
        Self { model, cutoff, tol: QuadTolerance::default() }
    }

    pub fn with_tolerance(mut self, tol: QuadTolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn phi(&self, energy: f64) -> Result<f64> {
        self.model.invert_qprime(&self.cutoff, energy)
    }

    pub fn phi_at_depth(&self, depth: f64) -> Result<f64> {
        self.model.phi_at_depth(&self.cutoff, depth)
    }

    /// `4 pi sqrt(2) int_0^sqrt(w) 2 s^2 G(phi(E0 - w + s^2), s^2) ds` where
    /// `w = E0 - u` is the local depth of the potential well.
    pub fn moment_at_depth(&self, moment: Moment, depth: f64) -> Result<Quadrature> {
        if !(depth > 0.0) {
            return Ok(Quadrature { value: 0.0, error: 0.0, evaluations: 0 });
        }
        let failure: Cell<Option<Error>> = Cell::new(None);
        let model = &self.model;
        let integrand = |s: f64| {
            let s2 = s * s;
            let phi = match self.phi_at_depth(depth - s2) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e));
                    return 0.0;
                }
            };
            let g = match moment {
                Moment::Mass => phi,
                Moment::Kinetic => phi * s2,
                Moment::Casimir => model.q(phi),
                Moment::EulerLagrange => {
                    if phi > 0.0 {
                        model.q_prime(phi) * phi
                    } else {
                        0.0
                    }
                }
            };
            2.0 * s2 * g
        };
        let q = integrate(integrand, 0.0, depth.sqrt(), self.tol)?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(Quadrature { value: VELOCITY_PREFACTOR * q.value, error: VELOCITY_PREFACTOR * q.error, ..q })
    }

    /// Mass density `h_phi(u)`.
    pub fn density_of_potential(&self, u: f64) -> Result<f64> {
        Ok(self.moment_at_depth(Moment::Mass, self.cutoff.e0 - u)?.value)
    }

    pub fn kinetic_density_of_potential(&self, u: f64) -> Result<f64> {
        Ok(self.moment_at_depth(Moment::Kinetic, self.cutoff.e0 - u)?.value)
    }

    pub fn casimir_density_of_potential(&self, u: f64) -> Result<f64> {
        Ok(self.moment_at_depth(Moment::Casimir, self.cutoff.e0 - u)?.value)
    }

    pub fn density_at_depth(&self, depth: f64) -> Result<f64> {
        Ok(self.moment_at_depth(Moment::Mass, depth)?.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly1() -> CasimirModel {
        CasimirModel::polytropic_plus_linear(1.0).unwrap()
    }

    #[test]
    fn polytrope_validates() {
        let r = poly1().validate(&[0.0, 0.5, 1.0, 10.0]).unwrap();
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn jump_validates() {
        let r = CasimirModel::pure_jump().validate(&[0.0, 0.5, 1.0, 2.0]).unwrap();
        assert!(r.all_passed(), "{r:?}");
        assert!(r.max_growth_constant >= 0.4);
    }

    #[test]
    fn injected_negative_value_is_reported() {
        let f = vec![0.0, 0.5, 1.0, 2.0];
        let q = vec![0.0, 0.75, -0.1, 6.0];
        let m = CasimirModel::tabulated(TabulatedQ::new(f.clone(), q).unwrap(), 1.0, 0.1).unwrap();
        let r = m.validate(&f).unwrap();
        let c = r.check(Assumption::Nonnegative);
        assert!(!c.passed);
        assert_eq!(c.first_violation, Some(1.0));
    }

    #[test]
    fn empty_grid_is_a_usage_error() {
        assert!(matches!(poly1().validate(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        assert!(CasimirModel::polytropic_plus_linear(4.0).is_err());
        assert!(CasimirModel::polytropic_plus_linear(3.5).is_err());
        assert!(CasimirModel::polytropic_plus_linear(0.0).is_err());
    }

    #[test]
    fn inversion_examples() {
        let m = poly1();
        let c = EnergyCutoff::for_model(&m, -1.0).unwrap();
        assert_eq!(c.e0, -1.0);
        // 1 + 2 f = 3
        assert!((m.invert_qprime(&c, -3.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.invert_qprime(&c, -1.0).unwrap(), 0.0);
        assert_eq!(m.invert_qprime(&c, 0.5).unwrap(), 0.0);

        let p = CasimirModel::plummer_power();
        let cp = EnergyCutoff::for_model(&p, -1.0).unwrap();
        assert_eq!(cp.e0, 0.0);
        let expected = (7.0f64 / 9.0).powf(3.5);
        assert!((p.invert_qprime(&cp, -1.0).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn jump_inversion_reproduces_linear_profile() {
        let m = CasimirModel::pure_jump();
        let e0 = -0.7;
        let c = EnergyCutoff::for_model(&m, e0).unwrap();
        assert_eq!(c.e0, e0);
        for e in [-0.71, -1.0, -2.3] {
            let phi = m.invert_qprime(&c, e).unwrap();
            assert!((phi - e / e0).abs() < 1e-13 * phi);
            assert!(phi > 1.0);
        }
        // flat segment of Q' on [0, 1]: the infimum is 0
        assert_eq!(m.invert_qprime(&c, e0).unwrap(), 0.0);
        assert_eq!(m.invert_qprime_bisection(1.0).unwrap(), 0.0);
    }

    #[test]
    fn positive_multiplier_is_a_domain_error() {
        let m = poly1();
        let bad = EnergyCutoff { lambda0: 1.0, e0: 1.0 };
        assert!(matches!(m.invert_qprime(&bad, 0.0), Err(Error::Domain(_))));
        assert!(EnergyCutoff::for_model(&m, 0.0).is_err());
    }

    #[test]
    fn tabulated_range_error() {
        let table = TabulatedQ::from_fn(|f| f + f * f, 1e-3, 10.0, 40).unwrap();
        let m = CasimirModel::tabulated(table, 1.0, 0.5).unwrap();
        // Q' = 1 + 2 f saturates at 21 beyond the table
        assert!(m.invert_qprime_bisection(15.0).is_ok());
        assert!(matches!(m.invert_qprime_bisection(50.0), Err(Error::Range(_))));
    }

    #[test]
    fn closed_form_and_bisection_agree() {
        let models = [
            poly1(),
            CasimirModel::polytropic_plus_linear(0.5).unwrap(),
            CasimirModel::polytropic_plus_linear(3.0).unwrap(),
            CasimirModel::pure_jump(),
            CasimirModel::plummer_power(),
        ];
        for m in &models {
            for target in [0.3, 1.0, 1.001, 1.7, 3.0, 25.0] {
                let a = m.inverse_qprime(target).unwrap();
                let b = m.invert_qprime_bisection(target).unwrap();
                assert!((a - b).abs() <= 1e-11 * a + 1e-15, "{} {target}: {a} vs {b}", m.name());
            }
        }
    }

    #[test]
    fn density_vanishes_at_cutoff() {
        for m in [poly1(), CasimirModel::pure_jump()] {
            let c = EnergyCutoff::for_model(&m, -1.0).unwrap();
            let df = IsotropicDf::new(m, c);
            assert_eq!(df.density_of_potential(c.e0).unwrap(), 0.0);
            assert_eq!(df.kinetic_density_of_potential(c.e0).unwrap(), 0.0);
            assert_eq!(df.casimir_density_of_potential(c.e0 + 0.3).unwrap(), 0.0);
        }
    }

    #[test]
    fn tabulated_serde_round_trip() {
        let table = TabulatedQ::from_fn(|f| f + f * f, 1e-3, 10.0, 12).unwrap();
        let m = CasimirModel::tabulated(table, 1.0, 0.5).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: CasimirModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
