use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

const STABILITY_COLUMNS: &str = "\
CSV columns (one row per record):
  t                      time
  H                      total energy E_kin + E_pot of the ensemble
  C                      Casimir functional sum w_p Q(f_p)
  mass                   sum w_p f_p
  d                      d(f, f0) against the best shifted/scaled copy of f0
  field_diff             (1/8 pi) |grad U_f - grad U_0|^2 against that copy
  shift_x, shift_y, shift_z   best translation (zero for the radial backend)
  scale                  best S_lambda parameter (empty unless scale search is on)
  metric                 d + field_diff, the minimized metric m(t)
  d_unshifted, field_diff_unshifted, metric_unshifted   the same against f0 itself";

const SIMULATE_COLUMNS: &str = "\
CSV columns (one row per record):
  t      time
  H      E_kin + E_pot
  E_kin  kinetic energy
  E_pot  potential energy of the backend's field
  C      Casimir functional
  mass   total mass";

#[derive(Debug, Parser)]
#[command(name = "galstab", version, about = "Energy-Casimir steady states of the gravitational Vlasov-Poisson system and their stability")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Flat key = value file; keys are long flag names, flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory for output files [env: GALSTAB_OUTPUT_DIR; default: .]
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a steady state of prescribed mass and write its profile and functionals.
    Construct(ConstructArgs),
    /// Functionals of a profile or a particle snapshot.
    Evaluate(EvaluateArgs),
    /// Draw particles from a steady state.
    Sample(SampleArgs),
    /// Evolve particles and record conserved quantities.
    #[command(after_help = SIMULATE_COLUMNS)]
    Simulate(SimulateArgs),
    /// Perturb a sampled steady state, evolve it and record the stability metric.
    #[command(after_help = STABILITY_COLUMNS)]
    Stability(StabilityArgs),
    /// Check the mass-scaling law of H, or the S_lambda invariance for Plummer.
    ScalingCheck(ScalingArgs),
    /// The Plummer sphere from its closed form, checked against the structure ODE.
    Plummer(PlummerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// Q(f) = f + f^(1 + 1/k)
    Poly,
    /// Q(f) = f on [0, 1], (f^2 + 1) / 2 beyond
    Jump,
    /// Q(f) = f^(9/7)
    Plummer,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "poly")]
    pub model: ModelKind,
    /// Exponent of the polytropic model, in (0, 7/2).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub k: f64,
    /// Constraint value C(f0) = M of the state (poly and jump).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub mass: f64,
    /// Central potential depth of the Plummer sphere.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub c0: f64,
    /// Radial grid points of the profile.
    #[arg(long, default_value_t = 4096)]
    pub points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileSource {
    /// Profile JSON written by `construct`; otherwise one is built from the model flags.
    #[arg(long, value_name = "FILE")]
    pub profile: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Radial,
    #[value(name = "3d")]
    Cartesian3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    /// exact force-free drift, gravity-only kicks
    Free,
    /// centrifugal term in the kick, plain drift
    Kick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldArg {
    #[value(name = "self")]
    SelfConsistent,
    Frozen,
}

#[derive(Debug, Clone, Args)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Base name of the output files.
    #[arg(long, default_value = "profile")]
    pub name: String,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: ProfileSource,
    /// Evaluate this snapshot instead of the profile; the model flags or profile give Q.
    #[arg(long, value_name = "FILE")]
    pub snapshot: Option<PathBuf>,
    /// 3D softening length for snapshots.
    #[arg(long, default_value_t = 0.0)]
    pub softening: f64,
    #[arg(long, default_value = "report")]
    pub name: String,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: ProfileSource,
    #[arg(long, default_value_t = 100_000)]
    pub particles: usize,
    #[arg(long, value_enum, default_value = "radial")]
    pub backend: BackendArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "sample")]
    pub name: String,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Duration in dynamical times 2 pi sqrt(R_h^3 / M).
    #[arg(long, default_value_t = 20.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 200.0)]
    pub steps_per_tdyn: f64,
    /// Steps between records.
    #[arg(long, default_value_t = 20)]
    pub cadence: usize,
    #[arg(long, value_enum, default_value = "free")]
    pub scheme: SchemeArg,
    /// 3D softening as a fraction of the half-mass radius.
    #[arg(long, default_value_t = 0.01)]
    pub softening_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: ProfileSource,
    /// Initial particles; otherwise drawn from the profile with --seed.
    #[arg(long, value_name = "FILE")]
    pub snapshot: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub particles: usize,
    #[arg(long, value_enum, default_value = "radial")]
    pub backend: BackendArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "self")]
    pub field: FieldArg,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value = "simulate")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PerturbationKind {
    None,
    Dilation,
    Boost,
    Resample,
    PlummerScale,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub source: ProfileSource,
    #[arg(long, value_enum, default_value = "dilation")]
    pub perturbation: PerturbationKind,
    /// Velocity factor of the dilation f(a x, b v).
    #[arg(long, default_value_t = 1.02, allow_negative_numbers = true)]
    pub b: f64,
    /// Position factor of the dilation; defaults to 1/b.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Boost velocity "vx,vy,vz".
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [0.1, 0.0, 0.0])]
    pub v: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub strength: f64,
    #[arg(long, default_value_t = 1.1, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Perturbation as JSON, e.g. {"kind":"dilation_ab","b":1.02,"a":null}; overrides --perturbation.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub particles: usize,
    #[arg(long, value_enum, default_value = "radial")]
    pub backend: BackendArg,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub run: RunArgs,
    /// Minimize over S_lambda too (default: only for the Plummer model).
    #[arg(long)]
    pub minimize_scale: Option<bool>,
    #[arg(long, default_value = "stability")]
    pub name: String,
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Second constraint value; defaults to twice --mass.
    #[arg(long, allow_negative_numbers = true)]
    pub mass2: Option<f64>,
    /// S_lambda grid for the Plummer model.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    pub lambdas: Vec<f64>,
    #[arg(long, default_value = "scaling")]
    pub name: String,
}

#[derive(Debug, Clone, Args)]
pub struct PlummerArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub c0: f64,
    /// The ODE solution is compared with the closed form on [0, r_check].
    #[arg(long, default_value_t = 10.0)]
    pub r_check: f64,
    #[arg(long, default_value_t = 4096)]
    pub points: usize,
    #[arg(long, default_value = "plummer")]
    pub name: String,
}
