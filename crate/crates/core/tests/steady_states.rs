use std::f64::consts::PI;

use galstab_core::steadystate::{
    match_target_mass, plummer_profile, solve_emden_fowler, solve_self_consistent, GridControl, ScalingTransform,
};
use galstab_core::{CasimirModel, Moment};
use statrs::function::beta::beta;

/// Lane-Emden oracle: first zero `xi1` of `theta'' + 2 theta'/xi = -theta^n`
/// and `|theta'(xi1)|`, by fixed-step RK4 from the series start.
fn lane_emden(n: f64) -> (f64, f64) {
    let h = 2e-5;
    let mut xi: f64 = 1e-4;
    let mut th = 1.0 - xi * xi / 6.0 + n * xi.powi(4) / 120.0;
    let mut dth = -xi / 3.0 + n * xi.powi(3) / 30.0;
    let f = |x: f64, t: f64, d: f64| (d, -t.max(0.0).powf(n) - 2.0 * d / x);
    loop {
        let (a1, b1) = f(xi, th, dth);
        let (a2, b2) = f(xi + h / 2.0, th + h / 2.0 * a1, dth + h / 2.0 * b1);
        let (a3, b3) = f(xi + h / 2.0, th + h / 2.0 * a2, dth + h / 2.0 * b2);
        let (a4, b4) = f(xi + h, th + h * a3, dth + h * b3);
        let th_new = th + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        let dth_new = dth + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        if th_new <= 0.0 {
            // theta'' = -2 theta'/xi near the edge; solve the local quadratic
            let c = -dth / xi;
            let disc = dth * dth - 2.0 * c * th;
            let step = (-dth - disc.sqrt()) / c;
            let xi1 = xi + step;
            return (xi1, (dth + 2.0 * c * step).abs());
        }
        xi += h;
        th = th_new;
        dth = dth_new;
    }
}

fn grid() -> GridControl {
    GridControl::default().with_points(2048)
}

#[test]
fn polytrope_matches_lane_emden_oracle() {
    for &k in &[0.5, 1.0, 2.0] {
        let model = CasimirModel::polytropic_plus_linear(k).unwrap();
        let lambda0 = -0.7;
        let p = solve_self_consistent(&model, lambda0, &grid()).unwrap();
        let n = k + 1.5;
        let (xi1, dtheta) = lane_emden(n);
        let depth = lambda0.abs() / (xi1 * dtheta);
        let amp = 4.0 * PI * 2f64.sqrt() * beta(1.5, k + 1.0) * (lambda0.abs() * (1.0 + 1.0 / k)).powf(-k);
        let alpha = (4.0 * PI * amp * depth.powf(n - 1.0)).powf(-0.5);
        let radius = alpha * xi1;
        let mass = lambda0.abs() * radius;
        assert!((p.depth_at(0.0) / depth - 1.0).abs() < 1e-8, "k={k}: depth {} vs {depth}", p.depth_at(0.0));
        assert!((p.r_support / radius - 1.0).abs() < 1e-7, "k={k}: R {} vs {radius}", p.r_support);
        assert!((p.total_mass / mass - 1.0).abs() < 1e-7, "k={k}: M {} vs {mass}", p.total_mass);
        assert!(p.cutoff_residual().abs() < 1e-10 * lambda0.abs());
        let rho_c = amp * depth.powf(n);
        assert!((p.rho[0] / rho_c - 1.0).abs() < 1e-6);
    }
}

#[test]
fn tabulated_mass_agrees_with_density_quadrature() {
    let model = CasimirModel::polytropic_plus_linear(1.0).unwrap();
    let p = solve_emden_fowler(&model, -1.0, 0.4, &grid()).unwrap();
    let mass = p.moment_integral(Moment::Mass, Default::default()).unwrap();
    assert!((mass / p.total_mass - 1.0).abs() < 1e-7, "{mass} vs {}", p.total_mass);
}

#[test]
fn pure_jump_has_finite_support() {
    let model = CasimirModel::pure_jump();
    let p = solve_self_consistent(&model, -1.0, &grid()).unwrap();
    assert!(p.r_support.is_finite());
    assert!(p.casimir_mass > 0.0 && p.casimir_mass >= p.total_mass);
}

#[test]
fn target_mass_is_matched() {
    let model = CasimirModel::polytropic_plus_linear(1.0).unwrap();
    for &target in &[0.3, 1.0, 5.0] {
        let p = match_target_mass(&model, target, &grid()).unwrap();
        assert!((p.casimir_mass / target - 1.0).abs() < 1e-6);
    }
}

#[test]
fn mass_doubling_scales_lambda_and_energy() {
    let model = CasimirModel::polytropic_plus_linear(1.0).unwrap();
    let p1 = match_target_mass(&model, 1.0, &grid()).unwrap();
    let p2 = match_target_mass(&model, 2.0, &grid()).unwrap();
    let ratio = p2.lambda0 / p1.lambda0;
    assert!((ratio - 2f64.powf(4.0 / 3.0)).abs() < 1e-5, "{ratio}");
    let a = 2f64.powf(1.0 / 3.0);
    let scaled = p1.apply_scaling(&ScalingTransform::dilation(a, 1.0 / (a * a)).unwrap()).unwrap();
    assert!((scaled.casimir_mass / 2.0 - 1.0).abs() < 1e-6);
    assert!((scaled.lambda0 / p2.lambda0 - 1.0).abs() < 1e-5);
    assert!((scaled.r_support / p2.r_support - 1.0).abs() < 1e-5);
}

#[test]
fn plummer_implied_multiplier_reproduces_density() {
    let p = plummer_profile(1.0, 1.0, &grid()).unwrap();
    let df = p.df();
    for &r in &[0.0, 0.5, 2.0, 10.0] {
        let u = -1.0 / (1.0f64 + r * r).sqrt();
        let rho = 3.0 / (4.0 * PI) * (1.0 + r * r).powf(-2.5);
        let h = df.density_of_potential(u).unwrap();
        assert!((h / rho - 1.0).abs() < 1e-8, "r={r}: {h} vs {rho}");
    }
}
