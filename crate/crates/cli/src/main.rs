use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hoistlab::bench::{self, BenchError, GeneratorParams};
use hoistlab::formulations::{
    build_model, build_multidegree_model, Encoding, FormulationError, FormulationId,
    FormulationSpec, MultidegreeOptions,
};
use hoistlab::instance::{Instance, LoadConfig, Multitank};
use hoistlab::schedule::{
    build_trajectory, check_schedule, render_timeway_svg, CheckOptions, Schedule, SvgStyle,
};
use hoistlab::solver::{solve_multidegree, Budget, SolveOptions, SolveResult, SolveStatus};
use hoistlab_milp::{lp_relax, mip_solve, write_lp_file, MipOptions, MipStatus, Model};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 66;
const EXIT_INTERNAL: u8 = 70;

#[derive(Parser)]
#[command(
    name = "hoistlab",
    version,
    about = "Cyclic single-hoist scheduling toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a minimum cycle time schedule with the native solver.
    Solve(SolveArgs),
    /// Check a schedule file against an instance.
    Check(CheckArgs),
    /// Print LP relaxation values of the formulations.
    Relax(RelaxArgs),
    /// Write a formulation as a CPLEX-LP file.
    Export(ExportArgs),
    /// Render the time-way diagram of a schedule as SVG.
    Diagram(DiagramArgs),
    /// Write a seeded random instance.
    Generate(GenerateArgs),
    /// Tabulate LP and MIP values per instance and formulation.
    Compare(CompareArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Name of a built-in instance.
    #[arg(long)]
    builtin: Option<String>,
    /// Path of an instance file.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Load {
    Dissociated,
    Associated,
}

impl From<Load> for LoadConfig {
    fn from(l: Load) -> Self {
        match l {
            Load::Dissociated => LoadConfig::Dissociated,
            Load::Associated => LoadConfig::Associated,
        }
    }
}

#[derive(Args)]
struct Options {
    /// Override the load and unload station configuration.
    #[arg(long, value_enum)]
    load: Option<Load>,
    /// Maximum number of carriers in the line.
    #[arg(long)]
    carrier_limit: Option<u32>,
    /// Multitank operation as OP=M (fixed) or OP=var; repeatable.
    #[arg(long, value_parser = parse_multitank)]
    multitank: Vec<(usize, Multitank)>,
}

impl Options {
    fn apply(&self, inst: &mut Instance) {
        if let Some(l) = self.load {
            inst.load_config = l.into();
        }
        if self.carrier_limit.is_some() {
            inst.carrier_limit = self.carrier_limit;
        }
        for &(op, m) in &self.multitank {
            inst.multitank.insert(op, m);
        }
    }
}

fn parse_multitank(s: &str) -> Result<(usize, Multitank), String> {
    let (op, m) = s.split_once('=').ok_or("expected OP=M or OP=var")?;
    let op = op
        .parse()
        .map_err(|_| format!("bad operation index {op:?}"))?;
    let m = match m {
        "var" => Multitank::Variable,
        _ => Multitank::Fixed(m.parse().map_err(|_| format!("bad tank count {m:?}"))?),
    };
    Ok((op, m))
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    options: Options,
    /// End the cycle when the hoist returns after the latest move.
    #[arg(long)]
    restricted: bool,
    /// Ignore tank sharing between operations.
    #[arg(long)]
    no_multifunction: bool,
    /// Carriers entering per cycle.
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Time budget in seconds.
    #[arg(long, env = "HOISTLAB_BUDGET_SECS", default_value_t = 60.0)]
    budget: f64,
    /// Node budget of the search.
    #[arg(long)]
    nodes: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write the certificate schedule here.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    options: Options,
    /// Schedule file.
    #[arg(long)]
    schedule: PathBuf,
    /// Require the cycle to end when the hoist returns after the latest move.
    #[arg(long)]
    restricted: bool,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    options: Options,
    /// Emit the published tank-sharing rows, defects included.
    #[arg(long)]
    faithful_multifunction: bool,
    /// Emit the published multitank rows, defects included.
    #[arg(long)]
    faithful_multitank: bool,
    /// Liu only: add slack columns after each move.
    #[arg(long)]
    liu_slack: bool,
    /// Declare the cycle time integer.
    #[arg(long)]
    integer_cycle: bool,
}

impl ModelArgs {
    fn spec(&self, id: FormulationId) -> FormulationSpec {
        let enc = |faithful| {
            if faithful {
                Encoding::Faithful
            } else {
                Encoding::Corrected
            }
        };
        FormulationSpec {
            multifunction: enc(self.faithful_multifunction),
            multitank_encoding: enc(self.faithful_multitank),
            liu_slack: self.liu_slack,
            integer_cycle: self.integer_cycle,
            ..FormulationSpec::new(id)
        }
    }
}

#[derive(Args)]
struct RelaxArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    model: ModelArgs,
    /// Formulation to relax; repeatable.
    #[arg(long, short)]
    formulation: Vec<FormulationId>,
    /// Relax all eight formulations.
    #[arg(long, conflicts_with = "formulation")]
    all: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, short)]
    formulation: FormulationId,
    /// Build the multidegree model with this many carriers per cycle.
    #[arg(long)]
    degree: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagramArgs {
    #[command(flatten)]
    source: Source,
    /// Schedule file; the instance is solved when absent.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
    /// Title drawn above the diagram.
    #[arg(long)]
    title: Option<String>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(short)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Round the upper soak limits down instead of half up.
    #[arg(long)]
    floor_upper: bool,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Built-in instances; repeatable.
    #[arg(long)]
    builtin: Vec<String>,
    /// Instance files; repeatable.
    #[arg(long)]
    instance: Vec<PathBuf>,
    /// Also solve each model as a MIP.
    #[arg(long)]
    mip: bool,
    /// MIP time limit per model in seconds.
    #[arg(long, env = "HOISTLAB_BUDGET_SECS", default_value_t = 60.0)]
    budget: f64,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        let code = if matches!(e, BenchError::UnknownBuiltin(_)) {
            EXIT_USAGE
        } else {
            EXIT_IO
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<FormulationError> for Failure {
    fn from(e: FormulationError) -> Self {
        let code = if matches!(e, FormulationError::Simplex(_)) {
            EXIT_INTERNAL
        } else {
            EXIT_USAGE
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn load(source: &Source) -> Result<Instance, Failure> {
    match (&source.builtin, &source.instance) {
        (Some(name), _) => Ok(bench::builtin(name)?),
        (_, Some(path)) => Ok(bench::load_instance(path)?),
        _ => Err(Failure::usage("give --builtin or --instance")),
    }
}

fn read_schedule(path: &Path) -> Result<Schedule, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::io(path, e))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn seconds(s: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(s).map_err(|_| Failure::usage(format!("invalid budget {s}")))
}

fn status_line(res: &SolveResult) -> String {
    match (res.status, res.objective) {
        (SolveStatus::Optimal, Some(c)) => format!("OPTIMAL C={c}"),
        (SolveStatus::Feasible, Some(c)) => format!("FEASIBLE C={c}"),
        (SolveStatus::Infeasible, _) => "INFEASIBLE".into(),
        _ => "BUDGET_EXHAUSTED".into(),
    }
}

fn cmd_solve(a: &SolveArgs) -> Outcome {
    let mut inst = load(&a.source)?;
    a.options.apply(&mut inst);
    if a.threads == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let opts = SolveOptions {
        restricted: a.restricted,
        multifunction: !a.no_multifunction,
        threads: a.threads,
        ..SolveOptions::default()
    };
    let mut budget = Budget {
        time: seconds(a.budget)?,
        ..Budget::default()
    };
    if let Some(n) = a.nodes {
        budget.nodes = n;
    }
    let res = solve_multidegree(&inst, a.degree, &opts, &budget)
        .map_err(|e| Failure::usage(e.to_string()))?;
    println!("{}", status_line(&res));
    println!(
        "bound={} nodes={} time={:.3}s",
        res.bound,
        res.nodes,
        res.elapsed.as_secs_f64()
    );
    if let Some(s) = &res.schedule {
        let starts: Vec<String> = s.start.iter().map(|t| t.to_string()).collect();
        println!("start={}", starts.join(" "));
        if let Some(path) = &a.out {
            let json = serde_json::to_string_pretty(s).expect("schedule serializes");
            fs::write(path, json + "\n").map_err(|e| Failure::io(path, e))?;
        }
    }
    Ok(match res.status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::Feasible | SolveStatus::BudgetExhausted => EXIT_BUDGET,
    })
}

fn cmd_check(a: &CheckArgs) -> Outcome {
    let mut inst = load(&a.source)?;
    a.options.apply(&mut inst);
    let sched = read_schedule(&a.schedule)?;
    let opts = CheckOptions {
        restricted_cycle_finish: a.restricted,
        carrier_limit: None,
    };
    let report = check_schedule(&inst, &sched, &opts);
    print!("{report}");
    if !report.to_string().ends_with('\n') {
        println!();
    }
    Ok(if report.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn cmd_relax(a: &RelaxArgs) -> Outcome {
    let mut inst = load(&a.source)?;
    a.model.options.apply(&mut inst);
    let ids: Vec<FormulationId> = if a.all || a.formulation.is_empty() {
        FormulationId::ALL.to_vec()
    } else {
        a.formulation.clone()
    };
    for id in ids {
        let model = build_model(&inst, &a.model.spec(id))?;
        let sol = lp_relax(&model).map_err(FormulationError::from)?;
        println!("{id} {:.1}", sol.objective);
    }
    Ok(0)
}

fn cmd_export(a: &ExportArgs) -> Outcome {
    let mut inst = load(&a.source)?;
    a.model.options.apply(&mut inst);
    let model = match a.degree {
        None => build_model(&inst, &a.model.spec(a.formulation))?,
        Some(r) => {
            let opts = MultidegreeOptions {
                multifunction: true,
                integer_cycle: a.model.integer_cycle,
                ..MultidegreeOptions::default()
            };
            build_multidegree_model(&inst, r, &opts)?
        }
    };
    write_output(a.out.as_deref(), &write_lp_file(&model))?;
    Ok(0)
}

fn cmd_diagram(a: &DiagramArgs) -> Outcome {
    let inst = load(&a.source)?;
    let sched = match &a.schedule {
        Some(path) => read_schedule(path)?,
        None => {
            let res = hoistlab::solver::solve_simple_cycle(
                &inst,
                &SolveOptions::default(),
                &Budget::default(),
            );
            let message = status_line(&res);
            res.schedule.ok_or(Failure {
                code: EXIT_INFEASIBLE,
                message,
            })?
        }
    };
    let traj = build_trajectory(&inst, &sched).map_err(|e| Failure {
        code: EXIT_INFEASIBLE,
        message: e.to_string(),
    })?;
    let style = SvgStyle {
        title: a.title.clone(),
        ..SvgStyle::default()
    };
    write_output(Some(&a.out), &render_timeway_svg(&inst, &traj, &style))?;
    Ok(0)
}

fn cmd_generate(a: &GenerateArgs) -> Outcome {
    if a.n == 0 || a.mu.is_nan() || a.mu <= 1.0 {
        return Err(Failure::usage("generator needs n >= 1 and mu > 1"));
    }
    let params = GeneratorParams {
        floor_upper: a.floor_upper,
        ..GeneratorParams::new(a.n, a.mu, a.seed)
    };
    write_output(
        a.out.as_deref(),
        &bench::instance_to_string(&bench::generate(&params)),
    )?;
    Ok(0)
}

fn mip_cell(model: &Model, limit: Duration) -> Result<(String, &'static str), Failure> {
    let opts = MipOptions {
        time_limit: Some(limit),
        integral_objective: false,
        ..MipOptions::default()
    };
    let r = mip_solve(model, &opts).map_err(FormulationError::from)?;
    let value = r.objective.map_or("-".into(), |v| format!("{v:.1}"));
    let status = match r.status {
        MipStatus::Optimal => "optimal",
        MipStatus::Infeasible => "infeasible",
        MipStatus::Unbounded => "unbounded",
        MipStatus::LimitReached => "limit",
    };
    Ok((value, status))
}

fn cmd_compare(a: &CompareArgs) -> Outcome {
    if a.builtin.is_empty() && a.instance.is_empty() {
        return Err(Failure::usage("give at least one --builtin or --instance"));
    }
    let mut instances = BTreeMap::new();
    for name in &a.builtin {
        instances.insert(name.clone(), bench::builtin(name)?);
    }
    for path in &a.instance {
        let inst = bench::load_instance(path)?;
        instances.insert(inst.name.clone(), inst);
    }
    let limit = seconds(a.budget)?;
    let mut out = String::from("instance\tformulation\tlp\tmip\tstatus\n");
    for (name, inst) in &instances {
        for id in FormulationId::ALL {
            let model = build_model(inst, &FormulationSpec::new(id))?;
            let lp = lp_relax(&model).map_err(FormulationError::from)?.objective;
            let (mip, status) = if a.mip {
                mip_cell(&model, limit)?
            } else {
                ("-".into(), "skipped")
            };
            let _ = writeln!(out, "{name}\t{id}\t{lp:.1}\t{mip}\t{status}");
        }
    }
    print!("{out}");
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Check(a) => cmd_check(a),
        Command::Relax(a) => cmd_relax(a),
        Command::Export(a) => cmd_export(a),
        Command::Diagram(a) => cmd_diagram(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
