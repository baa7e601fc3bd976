use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use galstab_core::dynamics::{load_snapshot, sample_steady_state, save_snapshot, FieldMode, Integrator, RadialScheme};
use galstab_core::functionals::{evaluate_ensemble, evaluate_profile, FieldSource};
use galstab_core::stability::{stability_run, RunManifest, StabilityConfig};
use galstab_core::steadystate::{match_target_mass, plummer_closed_form, solve_emden_fowler, GridControl};
use galstab_core::{Backend, CasimirModel, IntegratorConfig, PerturbationSpec, ScalingTransform, SteadyStateProfile};

use crate::args::*;
use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "GALSTAB_OUTPUT_DIR";

struct Ctx {
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str, ext: &str) -> PathBuf {
        self.out.join(format!("{name}.{ext}"))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name, "json");
        std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
        Ok(path)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {n} threads: {e}")))?;
    }
    let out = cli
        .output_dir
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;
    let ctx = Ctx { out };
    match cli.command {
        Command::Construct(a) => construct(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Sample(a) => sample(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Stability(a) => stability(&ctx, a),
        Command::ScalingCheck(a) => scaling_check(&ctx, a),
        Command::Plummer(a) => plummer(&ctx, a),
    }
}

fn model_of(m: &ModelArgs) -> Result<CasimirModel, CliError> {
    Ok(match m.model {
        ModelKind::Poly => CasimirModel::polytropic_plus_linear(m.k)?,
        ModelKind::Jump => CasimirModel::pure_jump(),
        ModelKind::Plummer => CasimirModel::plummer_power(),
    })
}

fn grid(points: usize) -> Result<GridControl, CliError> {
    if points < 16 {
        return Err(CliError::Usage(format!("--points must be at least 16, got {points}")));
    }
    Ok(GridControl::default().with_points(points))
}

fn build_profile(m: &ModelArgs, mass: f64) -> Result<SteadyStateProfile, CliError> {
    let model = model_of(m)?;
    let grid = grid(m.points)?;
    Ok(match m.model {
        ModelKind::Plummer => plummer_closed_form(m.c0, &grid)?,
        _ => match_target_mass(&model, mass, &grid)?,
    })
}

fn profile_of(src: &ProfileSource) -> Result<SteadyStateProfile, CliError> {
    match &src.profile {
        Some(path) => Ok(SteadyStateProfile::load(path).map_err(|e| input_error(path, e))?),
        None => build_profile(&src.model, src.model.mass),
    }
}

fn input_error(path: &Path, e: galstab_core::Error) -> CliError {
    CliError::Usage(format!("cannot read {}: {e}", path.display()))
}

fn backend_of(b: BackendArg) -> Backend {
    match b {
        BackendArg::Radial => Backend::Radial,
        BackendArg::Cartesian3d => Backend::Cartesian3D,
    }
}

fn scheme_of(s: SchemeArg) -> RadialScheme {
    match s {
        SchemeArg::Free => RadialScheme::FreeStreaming,
        SchemeArg::Kick => RadialScheme::CentrifugalKick,
    }
}

fn print(value: &serde_json::Value) {
    use std::io::Write;
    // a closed pipe downstream is not an error of ours
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(value).expect("JSON values serialize"));
}

fn construct(ctx: &Ctx, a: ConstructArgs) -> Result<(), CliError> {
    let profile = build_profile(&a.model, a.model.mass)?;
    let report = evaluate_profile(&profile)?;
    let path = ctx.path(&a.name, "json");
    profile.save(&path)?;
    let report_path = ctx.write_json(&format!("{}.report", a.name), &report)?;
    print(&json!({
        "model": profile.model.name(),
        "profile": path,
        "report": report_path,
        "lambda0": profile.lambda0,
        "E0": profile.e0,
        "R_support": if profile.r_support.is_finite() { json!(profile.r_support) } else { json!(null) },
        "total_mass": profile.total_mass,
        "casimir_mass": profile.casimir_mass,
        "U_center": profile.potential_at(0.0),
        "H": report.hamiltonian,
    }));
    Ok(())
}

fn evaluate(ctx: &Ctx, a: EvaluateArgs) -> Result<(), CliError> {
    let report = match &a.snapshot {
        Some(path) => {
            let ens = load_snapshot(path).map_err(|e| input_error(path, e))?;
            let model = match &a.source.profile {
                Some(p) => SteadyStateProfile::load(p).map_err(|e| input_error(p, e))?.model,
                None => model_of(&a.source.model)?,
            };
            evaluate_ensemble(&ens, &model, FieldSource::Ensemble { softening: a.softening })?
        }
        None => evaluate_profile(&profile_of(&a.source)?)?,
    };
    ctx.write_json(&a.name, &report)?;
    print(&json!({
        "E_kin": report.e_kin,
        "E_pot_field": report.e_pot_field,
        "E_pot_double": report.e_pot_double,
        "H": report.hamiltonian,
        "C": report.casimir,
        "mass": report.mass,
        "virial_ratio": report.virial_ratio(),
        "softening": report.softening,
    }));
    Ok(())
}

fn sample(ctx: &Ctx, a: SampleArgs) -> Result<(), CliError> {
    let profile = profile_of(&a.source)?;
    let ens = sample_steady_state(&profile, a.particles, backend_of(a.backend), a.seed)?;
    let path = ctx.path(&a.name, "snap");
    save_snapshot(&ens, &path)?;
    print(&json!({ "snapshot": path, "particles": ens.len(), "mass": ens.total_mass(), "seed": a.seed }));
    Ok(())
}

#[derive(Serialize)]
struct SimRow {
    t: f64,
    #[serde(rename = "H")]
    h: f64,
    #[serde(rename = "E_kin")]
    e_kin: f64,
    #[serde(rename = "E_pot")]
    e_pot: f64,
    #[serde(rename = "C")]
    c: f64,
    mass: f64,
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<(), CliError> {
    let profile = profile_of(&a.source)?;
    let mut ens = match (&a.snapshot, a.seed) {
        (Some(path), _) => load_snapshot(path).map_err(|e| input_error(path, e))?,
        (None, Some(seed)) => sample_steady_state(&profile, a.particles, backend_of(a.backend), seed)?,
        (None, None) => return Err(CliError::Usage("sampling initial particles needs --seed (or pass --snapshot)".into())),
    };
    let tdyn = profile.dynamical_time();
    let softening = match ens.backend() {
        Backend::Radial => 0.0,
        Backend::Cartesian3D => a.run.softening_fraction * profile.half_mass_radius(),
    };
    let field = match a.field {
        FieldArg::SelfConsistent => FieldMode::SelfConsistent,
        FieldArg::Frozen => FieldMode::Frozen,
    };
    let config = IntegratorConfig {
        dt: tdyn / a.run.steps_per_tdyn,
        t_end: a.run.duration * tdyn,
        scheme: scheme_of(a.run.scheme),
        softening,
        cadence: a.run.cadence,
        field,
    };
    let model = profile.model.clone();
    let mut integrator = Integrator::new(config, (field == FieldMode::Frozen).then(|| profile.clone()))?;
    let mut rows = Vec::new();
    integrator.run(&mut ens, |it, e| {
        let e_kin = e.kinetic_energy();
        let e_pot = it.potential_energy(e);
        rows.push(SimRow { t: e.time, h: e_kin + e_pot, e_kin, e_pot, c: e.casimir(&model), mass: e.total_mass() });
        Ok(())
    })?;
    let csv_path = ctx.path(&a.name, "csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(galstab_core::Error::from)?;
    for r in &rows {
        w.serialize(r).map_err(galstab_core::Error::from)?;
    }
    w.flush()?;
    let snap = ctx.path(&format!("{}.final", a.name), "snap");
    save_snapshot(&ens, &snap)?;
    let h0 = rows[0].h;
    let drift = rows.iter().map(|r| (r.h / h0 - 1.0).abs()).fold(0.0, f64::max);
    print(&json!({ "csv": csv_path, "final_snapshot": snap, "records": rows.len(), "dynamical_time": tdyn, "max_relative_H_drift": drift }));
    Ok(())
}

fn spec_of(a: &StabilityArgs) -> Result<PerturbationSpec, CliError> {
    if let Some(path) = &a.spec {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        return serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("perturbation spec {}: {e}", path.display())));
    }
    Ok(match a.perturbation {
        PerturbationKind::None => PerturbationSpec::identity(),
        PerturbationKind::Dilation => PerturbationSpec::DilationAb { b: a.b, a: a.a },
        PerturbationKind::Boost => {
            let [x, y, z] = a.v[..] else {
                return Err(CliError::Usage(format!("--v needs three components, got {}", a.v.len())));
            };
            PerturbationSpec::VelocityBoost { v: [x, y, z] }
        }
        PerturbationKind::Resample => PerturbationSpec::AmplitudeResample { strength: a.strength, seed: a.seed },
        PerturbationKind::PlummerScale => PerturbationSpec::PlummerScale { lambda: a.lambda },
    })
}

fn stability(ctx: &Ctx, a: StabilityArgs) -> Result<(), CliError> {
    let profile = profile_of(&a.source)?;
    let spec = spec_of(&a)?;
    let config = StabilityConfig {
        particles: a.particles,
        backend: backend_of(a.backend),
        seed: a.seed,
        duration: a.run.duration,
        steps_per_tdyn: a.run.steps_per_tdyn,
        cadence: a.run.cadence,
        scheme: scheme_of(a.run.scheme),
        softening_fraction: a.run.softening_fraction,
        minimize_scale: a.minimize_scale,
    };
    let series = stability_run(&profile, &spec, &config)?;
    let csv_path = ctx.path(&a.name, "csv");
    series.save_csv(&csv_path)?;
    let manifest = RunManifest::new(&profile, spec, config, &series)?;
    let manifest_path = ctx.path(&format!("{}.manifest", a.name), "json");
    manifest.save(&manifest_path)?;
    let trend = series.trend().ok();
    print(&json!({
        "csv": csv_path,
        "manifest": manifest_path,
        "records": series.records.len(),
        "headline_max_m_over_m0": series.headline(),
        "trend": trend,
        "no_secular_growth": trend.map(|t| t.no_secular_growth()),
    }));
    Ok(())
}

fn scaling_check(ctx: &Ctx, a: ScalingArgs) -> Result<(), CliError> {
    let report = if a.model.model == ModelKind::Plummer {
        let profile = build_profile(&a.model, a.model.mass)?;
        let base = evaluate_profile(&profile)?;
        let mut rows = Vec::new();
        let (mut dh, mut dc) = (0.0f64, 0.0f64);
        for &lambda in &a.lambdas {
            let scaled = profile.apply_scaling(&ScalingTransform::plummer(lambda)?)?;
            let r = evaluate_profile(&scaled)?;
            let (eh, ec) = ((r.hamiltonian / base.hamiltonian - 1.0).abs(), (r.casimir / base.casimir - 1.0).abs());
            dh = dh.max(eh);
            dc = dc.max(ec);
            rows.push(json!({ "lambda": lambda, "H": r.hamiltonian, "C": r.casimir, "mass": r.mass }));
        }
        json!({ "model": "plummer", "H": base.hamiltonian, "C": base.casimir, "grid": rows,
                "max_relative_H_deviation": dh, "max_relative_C_deviation": dc })
    } else {
        let m1 = a.model.mass;
        let m2 = a.mass2.unwrap_or(2.0 * m1);
        let r1 = evaluate_profile(&build_profile(&a.model, m1)?)?;
        let r2 = if m2 == m1 { r1.clone() } else { evaluate_profile(&build_profile(&a.model, m2)?)? };
        let ratio = r2.hamiltonian / r1.hamiltonian;
        let expected = (m2 / m1).powf(7.0 / 3.0);
        json!({ "model": model_of(&a.model)?.name(), "mass": m1, "mass2": m2, "H": r1.hamiltonian, "H2": r2.hamiltonian,
                "ratio": ratio, "expected": expected, "relative_deviation": (ratio / expected - 1.0).abs() })
    };
    ctx.write_json(&a.name, &report)?;
    print(&report);
    Ok(())
}

fn plummer(ctx: &Ctx, a: PlummerArgs) -> Result<(), CliError> {
    let grid = grid(a.points)?;
    let closed = plummer_closed_form(a.c0, &grid)?;
    let solved = solve_emden_fowler(&closed.model, closed.lambda0, a.c0, &grid.clone().with_r_max(5.0 * a.r_check.max(1.0)))?;
    let n = 1000;
    let mut worst = 0.0f64;
    for i in 0..=n {
        let r = a.r_check * i as f64 / n as f64;
        let exact = -a.c0 / (1.0 + r * r).sqrt();
        worst = worst.max((solved.potential_at(r) / exact - 1.0).abs());
    }
    let report = evaluate_profile(&closed)?;
    let path = ctx.path(&a.name, "json");
    closed.save(&path)?;
    ctx.write_json(&format!("{}.report", a.name), &report)?;
    print(&json!({
        "profile": path,
        "c0": a.c0,
        "lambda0": closed.lambda0,
        "U_center": closed.potential_at(0.0),
        "rho_center": 3.0 * a.c0 / (4.0 * std::f64::consts::PI),
        "mass": closed.total_mass,
        "H": report.hamiltonian,
        "C": report.casimir,
        "ode_max_relative_deviation": worst,
        "r_check": a.r_check,
    }));
    Ok(())
}
