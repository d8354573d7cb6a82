use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use plml_core::certify::{certify_rate, optimal_friction_discrete, rate_lem49378, MuWindow};
use plml_core::config::ConfigDocument;
use plml_core::continuous::{
    euler_maruyama_msgd, euler_maruyama_sgd, sde_exit_probability, sde_optimal_rate, sde_rate_for,
    theo_sde2_rate, SdeParams,
};
use plml_core::discrete::{
    estimate_decay_factor, exit_probability, run_msgd, run_sgd, DiscreteParams, InitialLaw, LyapunovCoeffs,
    StepSchedule,
};
use plml_core::landscape::{make_quadratic, Domain, ProblemSpec};
use plml_core::render::{render, RenderStyle};
use plml_core::sweep::{figure_config, sweep_discrete, sweep_sde, Execution, Figure, SweepConfig, SweepMode};
use plml_core::Error;

#[derive(Parser, Debug)]
#[command(name = "plml", version, about = "Certified rates and simulation for momentum SGD on PL landscapes")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a per-step rate for MSGD by solving the Lyapunov feasibility problem.
    Certify(CertifyArgs),
    /// Evaluate a closed-form rate.
    RateTheory(TheoryArgs),
    /// Monte-Carlo MSGD (or SGD) ensemble; writes per-step CSV.
    Simulate(SimulateArgs),
    /// Euler–Maruyama ensemble of the continuous dynamics; writes CSV.
    SdeSimulate(SdeSimulateArgs),
    /// Fit an exponential decay factor to a column of a simulation CSV.
    EstimateRate(EstimateArgs),
    /// Probability that paths started near the minimizer leave a ball domain.
    ExitProb(ExitArgs),
    /// Discrete MSGD vs SGD sweep.
    SweepDiscrete(SweepArgs),
    /// Continuous-time rate sweep over sigma.
    SweepSde(SweepArgs),
    /// Render a sweep CSV to PNG or SVG.
    Render(RenderArgs),
}

#[derive(Args, Debug, Clone)]
struct Landscape {
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long = "CL")]
    c_l: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
}

impl Landscape {
    fn l(&self) -> Result<f64, Error> {
        self.l.ok_or_else(|| Error::InvalidArgument("--L is required".into()))
    }

    fn c_l(&self) -> Result<f64, Error> {
        match (self.c_l, self.kappa) {
            (Some(c), None) => Ok(c),
            (None, Some(k)) => Ok(k * self.l()?),
            (None, None) => Ok(self.l()?),
            (Some(_), Some(_)) => Err(Error::InvalidArgument("give --CL or --kappa, not both".into())),
        }
    }
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[command(flatten)]
    land: Landscape,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    mu: f64,
    /// Print JSON instead of `key = value` lines.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
#[group(id = "formula", required = true, multiple = false, args = ["theo2", "theo_sde2", "lem49378", "sde_rate"])]
struct TheoryArgs {
    /// Optimal discrete friction and rate.
    #[arg(long)]
    theo2: bool,
    /// Closed-form continuous-time friction and rate.
    #[arg(long = "theo-sde2")]
    theo_sde2: bool,
    /// Discrete small-step rate for given b, mu, eps.
    #[arg(long)]
    lem49378: bool,
    /// Continuous-time rate: at (b, mu) if given, else optimized over b.
    #[arg(long = "sde-rate")]
    sde_rate: bool,
    #[command(flatten)]
    land: Landscape,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
}

#[derive(Args, Debug, Clone)]
struct ProblemArgs {
    /// Configuration document with a `[problem]` section.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    land: Landscape,
    /// Quadratic eigenvalues; defaults to `L,CL`.
    #[arg(long, value_delimiter = ',')]
    eigenvalues: Option<Vec<f64>>,
    /// Restrict to the ball of this radius around the minimizer.
    #[arg(long)]
    radius: Option<f64>,
}

impl ProblemArgs {
    fn build(&self) -> Result<ProblemSpec, Error> {
        let mut spec = match &self.config {
            Some(path) => ConfigDocument::load(path)?
                .problem
                .ok_or_else(|| Error::Config(format!("{}: no [problem] section", path.display())))?
                .build()?,
            None => {
                let eig = match &self.eigenvalues {
                    Some(e) => e.clone(),
                    None => {
                        let (l, c) = (self.land.l()?, self.land.c_l()?);
                        if l == c { vec![l] } else { vec![l, c] }
                    }
                };
                make_quadratic(&eig)?.with_sigma(self.land.sigma)?
            }
        };
        if let Some(r) = self.radius {
            let centre = spec.anchor();
            spec = spec.with_domain(Domain::ball(centre, r)?)?;
        }
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 100)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial position; defaults to all ones.
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    /// Run the SGD baseline instead of MSGD.
    #[arg(long)]
    sgd: bool,
    /// Lyapunov coefficients `a,b` for the energy column.
    #[arg(long, value_delimiter = ',')]
    lyap: Option<Vec<f64>>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SdeSimulateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "t-end", default_value_t = 5.0)]
    t_end: f64,
    #[arg(long, default_value_t = 100)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    #[arg(long = "record-every", default_value_t = 10)]
    record_every: usize,
    #[arg(long)]
    sgd: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// CSV written by `simulate` or `sde-simulate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "mean_f")]
    column: String,
}

#[derive(Args, Debug)]
struct ExitArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    r0: f64,
    #[arg(long = "v0-scale", default_value_t = 1.0)]
    v0_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Discrete step size; ignored with `--sde`.
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the continuous dynamics with `--dt` and `--t-end`.
    #[arg(long)]
    sde: bool,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "t-end", default_value_t = 5.0)]
    t_end: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FigureArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "4a")]
    FourA,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Configuration document with `[sweep]` and `[output]` sections.
    #[arg(long, conflicts_with = "figure")]
    config: Option<PathBuf>,
    /// Built-in figure configuration.
    #[arg(long, value_enum)]
    figure: Option<FigureArg>,
    /// Points per axis for `--figure`.
    #[arg(long, default_value_t = 30)]
    points: usize,
    /// Output CSV; overrides `[output] csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rendered image; overrides `[output] image`.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Evaluate cells on the calling thread only.
    #[arg(long)]
    serial: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StyleArg {
    Auto,
    Heatmap,
    Curves,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = StyleArg::Auto)]
    style: StyleArg,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_)
        | Error::InfeasibleSchedule { .. }
        | Error::OutOfRange(_)
        | Error::NumericalOverflow { .. } => 2,
        Error::Io(_) | Error::Image(_) => 3,
        _ => 1,
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn certify(args: &CertifyArgs) -> Result<u8, Error> {
    let (l, c_l) = (args.land.l()?, args.land.c_l()?);
    match certify_rate(l, c_l, args.land.sigma, args.gamma, args.mu)? {
        Some(cert) => {
            if args.json {
                let json = serde_json::to_string_pretty(&cert).expect("certificate serializes");
                println!("{json}");
            } else {
                for (k, v) in cert.to_record() {
                    println!("{k} = {v}");
                }
                println!("rate = {}", cert.rate());
            }
            Ok(0)
        }
        None => {
            eprintln!("no certificate: no feasible (a, b) found");
            Ok(2)
        }
    }
}

fn theory(args: &TheoryArgs) -> Result<u8, Error> {
    let land = &args.land;
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::InvalidArgument(format!("--{name} is required")));
    if args.theo2 {
        let t = optimal_friction_discrete(land.l()?, land.c_l()?)?;
        match t.mu_window {
            MuWindow::Interval { lo, hi } => println!("mu in [{lo}, {hi}]"),
            MuWindow::Point { mu } => println!("mu = {mu}"),
        }
        println!("m = {}", t.m);
        println!("kappa = {}", t.kappa);
    } else if args.theo_sde2 {
        let t = theo_sde2_rate(land.l()?, land.c_l()?, land.sigma)?;
        println!("mu = {}", t.mu);
        println!("m = {}", t.m);
        println!("c_star = {}", t.c_star);
    } else if args.lem49378 {
        let m = rate_lem49378(need(args.b, "b")?, need(args.mu, "mu")?, args.eps, land.c_l()?, land.l()?)?;
        println!("m = {m}");
    } else {
        let (l, c_l) = (land.l()?, land.c_l()?);
        match (args.b, args.mu) {
            (Some(b), Some(mu)) => println!("m = {}", sde_rate_for(b, mu, c_l, l, land.sigma, args.eps)?),
            (None, None) => {
                let r = sde_optimal_rate(l, c_l, land.sigma)?;
                println!("b = {}", r.b);
                println!("mu = {}", r.mu);
                println!("m = {}", r.m);
                println!("mu_minus = {}", r.mu_minus);
                println!("mu_plus = {}", r.mu_plus);
                println!("phi = {}", r.phi);
                println!("c_star = {}", r.c_star);
            }
            _ => return Err(Error::InvalidArgument("give both --b and --mu, or neither".into())),
        }
    }
    Ok(0)
}

fn initial(spec: &ProblemSpec, x0: &Option<Vec<f64>>) -> InitialLaw {
    InitialLaw::at(x0.clone().unwrap_or_else(|| vec![1.0; spec.dim()]))
}

fn simulate(args: &SimulateArgs) -> Result<u8, Error> {
    let spec = args.problem.build()?;
    let params = DiscreteParams {
        schedule: StepSchedule::Constant(args.gamma),
        mu: args.mu,
        n_steps: args.steps,
        n_paths: args.paths,
        seed: args.seed,
        init: initial(&spec, &args.x0),
    };
    let lyap = match args.lyap.as_deref() {
        None => None,
        Some(&[a, b]) => Some(LyapunovCoeffs { a, b }),
        Some(_) => return Err(Error::InvalidArgument("--lyap takes exactly two values `a,b`".into())),
    };
    let stats = if args.sgd { run_sgd(&spec, &params)? } else { run_msgd(&spec, &params, lyap.as_ref())? };
    let mut w = sink(&args.out)?;
    stats.write_csv(&mut w)?;
    w.flush()?;
    Ok(0)
}

fn sde_simulate(args: &SdeSimulateArgs) -> Result<u8, Error> {
    let spec = args.problem.build()?;
    let params = SdeParams {
        mu: args.mu,
        dt: args.dt,
        t_end: args.t_end,
        n_paths: args.paths,
        seed: args.seed,
        init: initial(&spec, &args.x0),
        record_every: args.record_every,
    };
    let stats = if args.sgd { euler_maruyama_sgd(&spec, &params)? } else { euler_maruyama_msgd(&spec, &params)? };
    let mut w = sink(&args.out)?;
    stats.write_csv(&mut w)?;
    w.flush()?;
    Ok(0)
}

fn read_series(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let parse = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse(1, format!("{other:?}")),
    })?;
    let headers = reader.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t_col = find("t_n").or_else(|| find("t")).ok_or_else(|| parse(1, "no `t_n` or `t` column".into()))?;
    let y_col = find(column).ok_or_else(|| parse(1, format!("no `{column}` column")))?;
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse(i + 2, e.to_string()))?;
        let num = |c: usize| rec[c].parse::<f64>().map_err(|_| parse(i + 2, format!("`{}` is not a number", &rec[c])));
        t.push(num(t_col)?);
        y.push(num(y_col)?);
    }
    Ok((t, y))
}

fn estimate(args: &EstimateArgs) -> Result<u8, Error> {
    let (t, y) = read_series(&args.input, &args.column)?;
    let fit = estimate_decay_factor(&y, &t)?;
    println!("rho = {}", fit.rho);
    println!("rho_stderr = {}", fit.rho_stderr);
    println!("rate = {}", fit.rate);
    println!("rate_stderr = {}", fit.rate_stderr);
    println!("blocks = {}", fit.blocks);
    Ok(0)
}

fn exit_prob(args: &ExitArgs) -> Result<u8, Error> {
    let spec = args.problem.build()?;
    let est = if args.sde {
        let params = SdeParams {
            mu: args.mu,
            dt: args.dt,
            t_end: args.t_end,
            n_paths: args.paths,
            seed: args.seed,
            init: InitialLaw::at(spec.anchor()),
            record_every: 1,
        };
        sde_exit_probability(&spec, &params, args.r0)?
    } else {
        let params = DiscreteParams {
            schedule: StepSchedule::Constant(args.gamma),
            mu: args.mu,
            n_steps: args.steps,
            n_paths: args.paths,
            seed: args.seed,
            init: InitialLaw::at(spec.anchor()),
        };
        exit_probability(&spec, &params, args.r0, args.v0_scale)?
    };
    println!("p = {}", est.value);
    println!("stderr = {}", est.stderr);
    println!("paths = {}", est.samples);
    Ok(0)
}

fn sweep(args: &SweepArgs, sde: bool) -> Result<u8, Error> {
    let (cfg, mut csv, mut image): (SweepConfig, Option<PathBuf>, Option<PathBuf>) = match (&args.config, args.figure) {
        (Some(path), _) => {
            let doc = ConfigDocument::load(path)?;
            let cfg = doc
                .sweep
                .ok_or_else(|| Error::Config(format!("{}: no [sweep] section", path.display())))?;
            (cfg, doc.output.csv, doc.output.image)
        }
        (None, Some(f)) => {
            let fig = match f {
                FigureArg::One => Figure::One,
                FigureArg::Two => Figure::Two,
                FigureArg::Three => Figure::Three,
                FigureArg::FourA => Figure::FourA,
            };
            (figure_config(fig, args.points), None, None)
        }
        (None, None) => return Err(Error::InvalidArgument("give --config or --figure".into())),
    };
    if args.out.is_some() {
        csv = args.out.clone();
    }
    if args.image.is_some() {
        image = args.image.clone();
    }
    let csv = csv.ok_or_else(|| Error::InvalidArgument("no output CSV: use --out or [output] csv".into()))?;
    let exec = if args.serial { Execution::Serial } else { Execution::Parallel };
    let is_sde = cfg.mode == SweepMode::SdeCurves;
    if is_sde != sde {
        return Err(Error::Config(format!("mode {:?} does not match this subcommand", cfg.mode)));
    }
    let manifest = if sde { sweep_sde(&cfg, &csv, exec)? } else { sweep_discrete(&cfg, &csv, exec)? };
    println!("wrote {} rows to {}", manifest.rows, csv.display());
    println!("config_hash = {}", manifest.config_hash);
    if let Some(img) = image {
        render(&csv, &img, RenderStyle::Auto)?;
        println!("rendered {}", img.display());
    }
    Ok(0)
}

fn render_cmd(args: &RenderArgs) -> Result<u8, Error> {
    let style = match args.style {
        StyleArg::Auto => RenderStyle::Auto,
        StyleArg::Heatmap => RenderStyle::Heatmap,
        StyleArg::Curves => RenderStyle::Curves,
    };
    let out = render(&args.input, &args.out, style)?;
    println!("rendered {}", out.display());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match &cli.command {
        Command::Certify(a) => certify(a),
        Command::RateTheory(a) => theory(a),
        Command::Simulate(a) => simulate(a),
        Command::SdeSimulate(a) => sde_simulate(a),
        Command::EstimateRate(a) => estimate(a),
        Command::ExitProb(a) => exit_prob(a),
        Command::SweepDiscrete(a) => sweep(a, false),
        Command::SweepSde(a) => sweep(a, true),
        Command::Render(a) => render_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
