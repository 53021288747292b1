//! Command-line front end.
//!
//! Exit codes: `0` success or a positive verdict, `1` usage or runtime
//! error, `2` Riccati blow-up or domain exit, `3` non-conservative or strict
//! local martingale, `4` inconclusive, `5` martingale conditions not met or
//! the transform formula not applicable at the requested `(u, T)`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::builtin;
use crate::diagnostics::{check_conservative, ConservativeOptions, ConservativenessVerdict, VerdictKind};
use crate::error::{Error, Result};
use crate::esscher::{martingale_check, tilt_model, MartingaleKind, TiltSpec};
use crate::model::AffineModel;
use crate::model_file::{load_model, to_toml};
use crate::montecarlo::{affine_formula_check, estimate_mean, martingale_gap, simulate_paths, PathFate, SimOptions};
use crate::riccati::{solve_riccati, RiccatiSolution, SolveOptions, SolveStatus};

pub const THREADS_ENV: &str = "AFFINE_RICCATI_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;
pub const EXIT_NOT_APPLICABLE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "affine-riccati", version, about = "Riccati solver and diagnostics for affine processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Riccati system from `u0` and write the trajectory as CSV.
    Solve(SolveArgs),
    /// Decide whether the model (optionally tilted) is conservative.
    Conservative(ConservativeArgs),
    /// Decide whether `exp(-∫(l + ⟨λ, X⟩) ds + ⟨θ, X_t⟩)` is a true martingale.
    Martingale(MartingaleArgs),
    /// Simulate paths and report terminal statistics or the martingale gap.
    Simulate(SimulateArgs),
    /// Compare a Monte Carlo estimate of `E[e^{⟨u, X_T⟩}]` with the Riccati solution.
    CheckFormula(CheckFormulaArgs),
    /// Write a model as TOML.
    ExportModel(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Built-in name (feller, kr2014, cir-jump) or path to a TOML model file.
    #[arg(long)]
    pub model: String,
}

#[derive(Debug, Args)]
pub struct TolArgs {
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
}

impl TolArgs {
    fn solve_options(&self, horizon: f64) -> SolveOptions {
        SolveOptions { rtol: self.rtol, atol: self.atol, ..SolveOptions::with_horizon(horizon) }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Initial value, comma separated.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
    pub u0: Vector,
    #[arg(long = "T")]
    pub horizon: f64,
    /// Restrict the output to this many uniform times (default: every solver node).
    #[arg(long)]
    pub points: Option<usize>,
    #[command(flatten)]
    pub tol: TolArgs,
    /// Directory for `trajectory.csv`; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConservativeArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Check the Esscher-tilted model at this θ instead.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
    pub tilt: Option<Vector>,
    #[command(flatten)]
    pub tol: TolArgs,
    /// Directory for `witness.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiscountArgs {
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
    pub theta: Vector,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "auto_discount")]
    pub l: Option<f64>,
    /// Comma separated; zero if absent.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec, conflicts_with = "auto_discount")]
    pub lambda: Option<Vector>,
    /// Use `l = F(θ)`, `λ = R(θ)`.
    #[arg(long)]
    pub auto_discount: bool,
}

impl DiscountArgs {
    fn spec(&self, model: &AffineModel) -> Result<TiltSpec> {
        let theta = self.theta.0.clone();
        if self.auto_discount {
            return TiltSpec::auto_discount(model, theta);
        }
        let lambda = match &self.lambda {
            Some(v) => v.0.clone(),
            None => vec![0.0; model.d()],
        };
        Ok(TiltSpec::new(theta, self.l.unwrap_or(0.0), lambda))
    }
}

#[derive(Debug, Args)]
pub struct MartingaleArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub discount: DiscountArgs,
    #[command(flatten)]
    pub tol: TolArgs,
    /// Directory for `witness.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
    pub x0: Vector,
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub npaths: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub jump_trunc: f64,
}

impl McArgs {
    fn options(&self) -> SimOptions {
        SimOptions {
            dt: self.dt,
            jump_trunc: self.jump_trunc,
            ..SimOptions::new(self.x0.0.clone(), self.horizon, self.npaths, self.seed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Report {
    Summary,
    MartingaleGap,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long, value_enum, default_value_t = Report::Summary)]
    pub report: Report,
    /// Required by the martingale-gap report.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
    pub theta: Option<Vector>,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "auto_discount")]
    pub l: Option<f64>,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec, conflicts_with = "auto_discount")]
    pub lambda: Option<Vector>,
    #[arg(long)]
    pub auto_discount: bool,
    /// Directory for `ensemble.csv` (summary report only); not written if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckFormulaArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vec)]
    pub u: Vector,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// File to write; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A comma-separated list of floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

fn parse_vec(s: &str) -> std::result::Result<Vector, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Vector)
}

pub fn resolve_model(source: &str) -> Result<AffineModel> {
    if builtin::NAMES.contains(&source) {
        return builtin::by_name(source);
    }
    let path = Path::new(source);
    if path.exists() {
        load_model(path)
    } else {
        Err(Error::Config(format!(
            "'{source}' is neither a built-in model ({}) nor an existing file",
            builtin::NAMES.join(", ")
        )))
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",")
}

/// Output of one subcommand: text for stdout and the exit code.
struct Outcome {
    stdout: String,
    code: i32,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn restrict(sol: &RiccatiSolution, times: &[f64]) -> RiccatiSolution {
    let (mut grid, mut psi, mut phi) = (Vec::new(), Vec::new(), Vec::new());
    for &t in times {
        if let Some((p, f)) = sol.sample(t) {
            grid.push(t);
            psi.push(p);
            phi.push(f);
        }
    }
    RiccatiSolution::from_nodes(grid, psi, phi, sol.status)
}

fn cmd_solve(a: &SolveArgs) -> Result<Outcome> {
    let model = resolve_model(&a.model.model)?;
    let mut opts = a.tol.solve_options(a.horizon);
    let times: Option<Vec<f64>> = a.points.map(|p| SolveOptions::uniform(a.horizon, p).t_eval);
    if let Some(t) = &times {
        opts.t_eval = t.clone();
    }
    let mut sol = solve_riccati(&model, &a.u0.0, &opts)?;
    if let Some(t) = &times {
        sol = restrict(&sol, t);
    }
    let code = status_code(sol.status);
    let stdout = match &a.out {
        Some(dir) => format!("trajectory: {}\nstatus: {}\n", write_file(dir, "trajectory.csv", &sol.to_csv())?.display(), sol.status),
        None => sol.to_csv(),
    };
    Ok(Outcome { stdout, code })
}

fn verdict_code(kind: VerdictKind) -> i32 {
    match kind {
        VerdictKind::Conservative => EXIT_OK,
        VerdictKind::NonConservative => EXIT_NEGATIVE,
        VerdictKind::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn conservative_options(tol: &TolArgs) -> ConservativeOptions {
    let d = ConservativeOptions::default();
    ConservativeOptions { solve: SolveOptions { rtol: tol.rtol, atol: tol.atol, ..d.solve.clone() }, ..d }
}

fn emit_witness(verdict: &ConservativenessVerdict, dir: &Path, out: &mut String) -> Result<()> {
    if let Some(w) = verdict.witness_trajectory() {
        let path = write_file(dir, "witness.csv", &w.trajectory.to_csv())?;
        let _ = writeln!(out, "witness_csv: {}", path.display());
    }
    Ok(())
}

fn cmd_conservative(a: &ConservativeArgs) -> Result<Outcome> {
    let mut model = resolve_model(&a.model.model)?;
    let mut stdout = String::new();
    if let Some(theta) = &a.tilt {
        model = tilt_model(&model, &theta.0)?;
        let _ = writeln!(stdout, "tilt: {}", fmt_vec(&theta.0));
    }
    let verdict = check_conservative(&model, &conservative_options(&a.tol))?;
    stdout.push_str(&verdict.report());
    emit_witness(&verdict, &a.out, &mut stdout)?;
    Ok(Outcome { stdout, code: verdict_code(verdict.kind()) })
}

fn cmd_martingale(a: &MartingaleArgs) -> Result<Outcome> {
    let model = resolve_model(&a.model.model)?;
    let spec = a.discount.spec(&model)?;
    let verdict = martingale_check(&model, &spec, &conservative_options(&a.tol))?;
    let mut stdout = verdict.report(&spec);
    if let Some(w) = &verdict.witness {
        let path = write_file(&a.out, "witness.csv", &w.trajectory.to_csv())?;
        let _ = writeln!(stdout, "witness_csv: {}", path.display());
    }
    let code = match verdict.kind {
        MartingaleKind::TrueMartingale => EXIT_OK,
        MartingaleKind::StrictLocalMartingale => EXIT_NEGATIVE,
        MartingaleKind::Inconclusive => EXIT_INCONCLUSIVE,
        MartingaleKind::NotApplicable => EXIT_NOT_APPLICABLE,
    };
    Ok(Outcome { stdout, code })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome> {
    let model = resolve_model(&a.model.model)?;
    let opts = a.mc.options();
    let mut stdout = String::new();
    match a.report {
        Report::Summary => {
            let ens = simulate_paths(&model, &opts)?;
            let n = ens.npaths() as f64;
            let killed = ens.fates.iter().filter(|f| **f == PathFate::Killed).count() as f64 / n;
            let _ = writeln!(stdout, "npaths: {}", ens.npaths());
            let _ = writeln!(stdout, "dt: {:.16e}", ens.dt);
            let _ = writeln!(stdout, "exploded_fraction: {:.16e}", ens.exploded_fraction());
            let _ = writeln!(stdout, "killed_fraction: {killed:.16e}");
            for (j, e) in estimate_mean(&ens).iter().enumerate() {
                let _ = writeln!(stdout, "mean_X_{}: {:.16e}", j + 1, e.mean);
                let _ = writeln!(stdout, "stderr_X_{}: {:.16e}", j + 1, e.stderr);
            }
            if let Some(dir) = &a.out {
                let path = write_file(dir, "ensemble.csv", &ens.summary_csv())?;
                let _ = writeln!(stdout, "ensemble_csv: {}", path.display());
            }
        }
        Report::MartingaleGap => {
            let theta = a
                .theta
                .as_ref()
                .ok_or_else(|| Error::Config("--report martingale-gap needs --theta".into()))?;
            let discount = DiscountArgs {
                theta: theta.clone(),
                l: a.l,
                lambda: a.lambda.clone(),
                auto_discount: a.auto_discount,
            };
            let spec = discount.spec(&model)?;
            stdout.push_str(&martingale_gap(&model, &spec, &opts)?.report());
        }
    }
    Ok(Outcome { stdout, code: EXIT_OK })
}

fn cmd_check_formula(a: &CheckFormulaArgs) -> Result<Outcome> {
    let model = resolve_model(&a.model.model)?;
    let check = affine_formula_check(&model, &a.mc.options(), &a.u.0)?;
    let code = if check.applicable() { EXIT_OK } else { EXIT_NOT_APPLICABLE };
    Ok(Outcome { stdout: check.report(), code })
}

fn cmd_export(a: &ExportArgs) -> Result<Outcome> {
    let model = resolve_model(&a.model.model)?;
    let text = to_toml(&model)?;
    let stdout = match &a.out {
        Some(path) => {
            std::fs::write(path, &text)?;
            format!("model: {}\n", path.display())
        }
        None => text,
    };
    Ok(Outcome { stdout, code: EXIT_OK })
}

fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Solve(a) => cmd_solve(a),
        Command::Conservative(a) => cmd_conservative(a),
        Command::Martingale(a) => cmd_martingale(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::CheckFormula(a) => cmd_check_formula(a),
        Command::ExportModel(a) => cmd_export(a),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        // a second call fails harmlessly once the pool exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Runs the command line `args` (program name first), writing to the given
/// streams, and returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    configure_threads();
    match dispatch(&cli.command) {
        Ok(o) => {
            let _ = out.write_all(o.stdout.as_bytes());
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Exit code for a solver status, as used by `solve`.
pub fn status_code(status: SolveStatus) -> i32 {
    if status.reached_horizon() {
        EXIT_OK
    } else {
        EXIT_BLOWUP
    }
}
