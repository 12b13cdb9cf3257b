//! `mcf`: command-line front end for the continued fraction library.
//!
//! Every subcommand is deterministic given its flags. Usage errors exit with
//! status 2, numeric and I/O failures with status 1 after printing
//! `error[<category>]: <message>` on stderr.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcf_core::algorithms::REGISTERED;
use mcf_core::brun_highdim::brun_cross_check;
use mcf_core::density::{
    brun_sorted_piece_mass, empirical_density, total_mass, transfer_sweep, DensityModel, MassMethod,
};
use mcf_core::dilog::{brun_dilog_expression, dilog_identity_check};
use mcf_core::experiments::{
    compose, orbit_cloud, orbit_csv_header, orbit_csv_row, p6_bytes, render_fractal, render_panels,
    symmetry_probe_within, DrawOrder, FractalParams, PlotCoords, RasterGrid, Window,
};
use mcf_core::natext::{bijectivity_audit, natext_step, NatExtState};
use mcf_core::{AlgorithmSpec, ConeVector, McfError, Rational, Scalar};

#[derive(Parser)]
#[command(
    name = "mcf",
    version,
    about = "Multidimensional continued fraction algorithms and their natural extensions",
    after_help = algorithms_help()
)]
struct Cli {
    /// Worker threads for parallel stages; outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,
    #[command(subcommand)]
    command: Command,
}

fn algorithms_help() -> String {
    let mut s = String::from("Registered algorithms:\n");
    for name in REGISTERED {
        s.push_str("  ");
        s.push_str(name);
        s.push('\n');
    }
    s
}

#[derive(Subcommand)]
enum Command {
    /// Iterates the natural extension and writes `n,branch,x1..xd,a1..ad` rows.
    Orbit(OrbitArgs),
    /// Exact bijectivity audit of the dual domain.
    Audit(AuditArgs),
    /// Transfer-operator residuals of the closed-form density at random points.
    DensityCheck(DensityCheckArgs),
    /// Total mass of the invariant density.
    Mass(MassArgs),
    /// Checks the dilogarithm identity for the Brun sorted piece.
    Dilog,
    /// Orbit histogram against the cell integrals of the density.
    Hist(HistArgs),
    /// Recursive polytope volume against the closed-form Brun density.
    BrunD(BrunDArgs),
    /// Four-panel picture of `x_n`, `a_n`, `x_{n+1}`, `a_{n+1}`.
    Panels(PanelsArgs),
    /// Raster of the dual points of a long orbit.
    Fractal(FractalArgs),
    /// 120° rotation similarity of a P6 raster.
    Symmetry(SymmetryArgs),
}

fn parse_algo(s: &str) -> Result<AlgorithmSpec, String> {
    AlgorithmSpec::from_name(s).map_err(|e| e.to_string())
}

fn parse_positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

#[derive(Args)]
struct AlgoArg {
    /// Algorithm name (see the list below).
    #[arg(long = "algo", value_parser = parse_algo)]
    algo: AlgorithmSpec,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Float,
}

#[derive(Args)]
struct OrbitArgs {
    #[command(flatten)]
    algo: AlgoArg,
    /// Start vector, integers or fractions like `3/5`; random when omitted
    /// in float mode.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    x: Option<Vec<String>>,
    /// Dual start vector; all ones when omitted.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    a: Option<Vec<String>>,
    #[arg(long, default_value_t = 10)]
    steps: u64,
    #[arg(long, value_enum, default_value_t = Mode::Float)]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    algo: AlgoArg,
    /// Samples per piece and per check.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DensityCheckArgs {
    #[command(flatten)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    #[value(name = "reduced-1d")]
    Reduced1d,
    #[value(name = "adaptive-2d")]
    Adaptive2d,
    #[value(name = "monte-carlo")]
    MonteCarlo,
}

#[derive(Args)]
struct MassArgs {
    #[command(flatten)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 1e-8, value_parser = parse_positive_f64)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Reduced1d)]
    method: MethodArg,
    /// Sample cap for the Monte-Carlo method.
    #[arg(long, default_value_t = 1 << 26)]
    max_samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// For brun: the mass of the sorted piece of the sup-norm density only.
    #[arg(long)]
    sorted_piece: bool,
}

#[derive(Args)]
struct HistArgs {
    #[command(flatten)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 10_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    steps: u64,
    /// Subdivisions per simplex edge; the histogram has `bins²` cells.
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..=1024))]
    bins: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BrunDArgs {
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(3..=8))]
    dim: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    /// Monte-Carlo samples per point; 0 disables the oracle.
    #[arg(long, default_value_t = 0)]
    mc_samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoordsArg {
    Embed,
    Difference,
}

impl From<CoordsArg> for PlotCoords {
    fn from(c: CoordsArg) -> Self {
        match c {
            CoordsArg::Embed => PlotCoords::Embed,
            CoordsArg::Difference => PlotCoords::Difference,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Sequential,
    PoincareLast,
    ArLast,
}

impl From<OrderArg> for DrawOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Sequential => DrawOrder::Sequential,
            OrderArg::PoincareLast => DrawOrder::PoincareLast,
            OrderArg::ArLast => DrawOrder::ArLast,
        }
    }
}

#[derive(Args)]
struct ImageOut {
    /// Output P6 file.
    #[arg(long)]
    out: PathBuf,
    /// Also write a PNG copy next to the P6 file.
    #[arg(long)]
    png: bool,
}

#[derive(Args)]
struct PanelsArgs {
    #[command(flatten)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 100_000)]
    steps: u64,
    /// Pixels per panel side.
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..=8192))]
    res: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = CoordsArg::Embed)]
    coords: CoordsArg,
    #[command(flatten)]
    image: ImageOut,
}

#[derive(Args)]
struct FractalArgs {
    #[command(flatten)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 2_000_000)]
    steps: u64,
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(1..=16384))]
    res: u64,
    /// Plane window `xmin xmax ymin ymax`.
    #[arg(long, num_args = 4, allow_negative_numbers = true, default_values_t = [-0.6, 0.6, -0.6, 0.6])]
    window: Vec<f64>,
    #[arg(long, value_enum, default_value_t = OrderArg::PoincareLast)]
    order: OrderArg,
    #[arg(long, value_enum, default_value_t = CoordsArg::Embed)]
    coords: CoordsArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Print the 120° symmetry score of the result.
    #[arg(long)]
    probe: bool,
    #[command(flatten)]
    image: ImageOut,
}

#[derive(Args)]
struct SymmetryArgs {
    /// P6 image written by `fractal`.
    input: PathBuf,
    /// Plane window the image covers.
    #[arg(long, num_args = 4, allow_negative_numbers = true, default_values_t = [-0.6, 0.6, -0.6, 0.6])]
    window: Vec<f64>,
    /// Algorithm whose branch colors are permuted for the colored score.
    #[arg(long = "algo", value_parser = parse_algo)]
    algo: Option<AlgorithmSpec>,
    /// Matching tolerance in pixels.
    #[arg(long, default_value_t = 0)]
    radius: usize,
}

#[derive(Debug)]
enum CliError {
    Numeric(McfError),
    Io(io::Error),
    Image(String),
}

impl CliError {
    fn category(&self) -> &'static str {
        match self {
            CliError::Numeric(e) => e.category(),
            CliError::Io(_) => "io",
            CliError::Image(_) => "image",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Numeric(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Image(e) => f.write_str(e),
        }
    }
}

impl From<McfError> for CliError {
    fn from(e: McfError) -> Self {
        CliError::Numeric(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult = Result<(), CliError>;

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_vector<T: Scalar>(values: &[String], what: &str) -> Result<Vec<T>, McfError> {
    values
        .iter()
        .map(|v| {
            let q: Rational = v
                .trim()
                .parse()
                .map_err(|_| McfError::Parse(format!("{what}: cannot read {v:?} as a rational")))?;
            Ok(T::from_rational(&q))
        })
        .collect()
}

fn start_state<T: Scalar>(
    spec: &AlgorithmSpec,
    x: &[String],
    a: Option<&[String]>,
) -> Result<NatExtState<T>, McfError> {
    let x = ConeVector::new(parse_vector::<T>(x, "--x")?)?;
    let a = match a {
        Some(a) => ConeVector::new(parse_vector::<T>(a, "--a")?)?,
        None => ConeVector::new(vec![T::one(); x.dim()])?,
    };
    if x.dim() != spec.dim() {
        return Err(McfError::DimensionMismatch {
            expected: spec.dim(),
            got: x.dim(),
        });
    }
    NatExtState::new(x, a)
}

fn write_exact_row(
    out: &mut dyn Write,
    n: u64,
    branch: &str,
    s: &NatExtState<Rational>,
) -> io::Result<()> {
    write!(out, "{n},{branch}")?;
    for c in s.x().coords().iter().chain(s.a().coords()) {
        write!(out, ",{c}")?;
    }
    writeln!(out)
}

fn run_orbit(args: &OrbitArgs) -> CliResult {
    let spec = &args.algo.algo;
    let mut out = output(args.out.as_deref())?;
    out.write_all(orbit_csv_header(spec.dim()).as_bytes())?;
    match args.mode {
        Mode::Exact => {
            let x = args
                .x
                .as_deref()
                .ok_or_else(|| McfError::Parse("exact mode needs --x".into()))?;
            let mut s = start_state::<Rational>(spec, x, args.a.as_deref())?;
            for n in 0..=args.steps {
                let label = match spec.classify(s.x().coords()) {
                    Ok(id) => spec.label(id).to_string(),
                    Err(e) if n == args.steps => {
                        eprintln!("warning[{}]: {e}", e.category());
                        "-".to_string()
                    }
                    Err(e) => {
                        write_exact_row(&mut *out, n, "-", &s)?;
                        out.flush()?;
                        eprintln!(
                            "warning[{}]: orbit truncated at step {n}: {e}",
                            e.category()
                        );
                        return Ok(());
                    }
                };
                write_exact_row(&mut *out, n, &label, &s)?;
                if n < args.steps {
                    s = natext_step(spec, &s)?.1;
                }
            }
        }
        Mode::Float => {
            let start = match &args.x {
                Some(x) => Some(start_state::<f64>(spec, x, args.a.as_deref())?),
                None => None,
            };
            for sample in orbit_cloud(spec, start.as_ref(), args.steps, args.seed)? {
                match sample {
                    Ok(s) => out.write_all(orbit_csv_row(spec, &s).as_bytes())?,
                    Err(e) => eprintln!("warning[{}]: orbit truncated: {e}", e.category()),
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn run_audit(args: &AuditArgs) -> CliResult {
    let report = bijectivity_audit(&args.algo.algo, args.samples as usize, args.seed)?;
    let mut out = output(args.out.as_deref())?;
    out.write_all(report.to_csv().as_bytes())?;
    out.flush()?;
    let violations = report.violations.len();
    eprintln!("{}: {violations} violations", report.algorithm);
    if violations > 0 {
        return Err(McfError::Domain(format!("{violations} audit violations")).into());
    }
    Ok(())
}

fn run_density_check(args: &DensityCheckArgs) -> CliResult {
    let spec = &args.algo.algo;
    let model = DensityModel::for_spec(spec)?;
    let sweep = transfer_sweep(spec, &model, args.points as usize, args.seed)?;
    let mut out = output(args.out.as_deref())?;
    out.write_all(sweep.to_csv().as_bytes())?;
    out.flush()?;
    for s in &sweep.skipped {
        eprintln!("skipped {s}");
    }
    eprintln!("max_residual={:e}", sweep.max_residual);
    Ok(())
}

fn run_mass(args: &MassArgs) -> CliResult {
    let spec = &args.algo.algo;
    let mut out = output(None)?;
    if args.sorted_piece {
        if !matches!(spec.name(), "brun" | "brun-sorted") {
            return Err(McfError::Unsupported("--sorted-piece applies to brun only".into()).into());
        }
        let v = brun_sorted_piece_mass(args.tol)?;
        writeln!(
            out,
            "model,method,value\nbrun-supnorm-sorted-piece,reduced-1d,{v:.17e}"
        )?;
    } else {
        let model = DensityModel::for_spec(spec)?;
        let method = match args.method {
            MethodArg::Reduced1d => MassMethod::Reduced1d,
            MethodArg::Adaptive2d => MassMethod::Adaptive2d,
            MethodArg::MonteCarlo => MassMethod::MonteCarlo {
                max_samples: args.max_samples,
                seed: args.seed,
            },
        };
        out.write_all(total_mass(&model, method, args.tol)?.to_csv().as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn run_dilog() -> CliResult {
    let target = std::f64::consts::PI.powi(2) / 24.0;
    let mut out = output(None)?;
    writeln!(out, "lhs={:.17e}", brun_dilog_expression())?;
    writeln!(out, "pi2_over_24={target:.17e}")?;
    writeln!(out, "abs_diff={:e}", dilog_identity_check())?;
    out.flush()?;
    Ok(())
}

fn run_hist(args: &HistArgs) -> CliResult {
    let spec = &args.algo.algo;
    let model = DensityModel::for_spec(spec)?;
    let h = empirical_density(spec, &model, args.steps, args.bins as usize, args.seed)?;
    let mut out = output(args.out.as_deref())?;
    out.write_all(h.to_csv().as_bytes())?;
    out.flush()?;
    for r in &h.restarts {
        eprintln!("restart: {r}");
    }
    eprintln!("l1={:e} sup={:e}", h.l1, h.sup);
    Ok(())
}

fn run_brun_d(args: &BrunDArgs) -> CliResult {
    let rows = brun_cross_check(
        args.dim as usize,
        args.points as usize,
        args.seed,
        args.mc_samples,
    )?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "point,volume,density,exact_match,oracle,oracle_stderr")?;
    let mut mismatches = 0;
    for (k, r) in rows.iter().enumerate() {
        mismatches += usize::from(!r.exact_match());
        let (o, se) = r.oracle.map_or((String::new(), String::new()), |(o, se)| {
            (format!("{o:e}"), format!("{se:e}"))
        });
        writeln!(
            out,
            "{k},{:.17e},{:.17e},{},{o},{se}",
            r.volume.to_f64(),
            r.density.to_f64(),
            r.exact_match()
        )?;
    }
    out.flush()?;
    if mismatches > 0 {
        return Err(McfError::Domain(format!("{mismatches} exact mismatches")).into());
    }
    Ok(())
}

fn window_arg(v: &[f64]) -> Result<Window, McfError> {
    Window::new(v[0], v[1], v[2], v[3])
}

fn write_image(image: &ImageOut, width: usize, height: usize, rgb: &[u8]) -> CliResult {
    fs::write(&image.out, p6_bytes(width, height, rgb))?;
    if image.png {
        let buffer = image::RgbImage::from_raw(width as u32, height as u32, rgb.to_vec())
            .ok_or_else(|| CliError::Image("raster size does not match its buffer".into()))?;
        buffer
            .save(image.out.with_extension("png"))
            .map_err(|e| CliError::Image(e.to_string()))?;
    }
    Ok(())
}

fn run_panels(args: &PanelsArgs) -> CliResult {
    let spec = &args.algo.algo;
    let samples: Vec<_> = orbit_cloud(spec, None, args.steps, args.seed)?
        .filter_map(|s| {
            s.map_err(|e| eprintln!("warning[{}]: orbit truncated: {e}", e.category()))
                .ok()
        })
        .collect();
    let coords = PlotCoords::from(args.coords);
    let window = match coords {
        PlotCoords::Embed => Window::new(-1.0, 1.0, -0.75, 1.25)?,
        PlotCoords::Difference => Window::centered(2.0)?,
    };
    let panels = render_panels(&samples, window, args.res as usize, coords)?;
    let (w, h, rgb) = compose(&panels, 2);
    write_image(&args.image, w, h, &rgb)
}

fn run_fractal(args: &FractalArgs) -> CliResult {
    let spec = &args.algo.algo;
    let params = FractalParams {
        steps: args.steps,
        window: window_arg(&args.window)?,
        resolution: args.res as usize,
        order: args.order.into(),
        coords: args.coords.into(),
        seed: args.seed,
    };
    let img = render_fractal(spec, &params)?;
    for w in &img.warnings {
        eprintln!("warning: {w}");
    }
    write_image(
        &args.image,
        img.grid.width(),
        img.grid.height(),
        &img.grid.to_rgb(),
    )?;
    let mut out = output(None)?;
    writeln!(
        out,
        "points={}\noccupancy={:.6}",
        img.plotted,
        img.grid.occupancy()
    )?;
    if args.probe {
        out.write_all(
            symmetry_probe_within(&img.grid, Some(spec), 0)?
                .to_text()
                .as_bytes(),
        )?;
    }
    out.flush()?;
    Ok(())
}

fn run_symmetry(args: &SymmetryArgs) -> CliResult {
    let bytes = fs::read(&args.input)?;
    let grid = RasterGrid::from_p6(window_arg(&args.window)?, &bytes)?;
    let report = symmetry_probe_within(&grid, args.algo.as_ref(), args.radius)?;
    let mut out = output(None)?;
    out.write_all(report.to_text().as_bytes())?;
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Orbit(a) => run_orbit(a),
        Command::Audit(a) => run_audit(a),
        Command::DensityCheck(a) => run_density_check(a),
        Command::Mass(a) => run_mass(a),
        Command::Dilog => run_dilog(),
        Command::Hist(a) => run_hist(a),
        Command::BrunD(a) => run_brun_d(a),
        Command::Panels(a) => run_panels(a),
        Command::Fractal(a) => run_fractal(a),
        Command::Symmetry(a) => run_symmetry(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(usize::from(cli.threads))
        .build_global()
    {
        eprintln!("error[threads]: {e}");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(1)
        }
    }
}
