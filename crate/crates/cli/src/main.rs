//! `hbs`: discretize a contour, solve the interior Dirichlet problem with
//! the compressed direct solver, or sweep problem sizes for timings.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hbs_core::compression::{CompressionConfig, CompressionMode};
use hbs_core::diagnostics::DEFAULT_POWER_ITERS;
use hbs_core::geometry::{decompose, make_contour, ContourKind, GeometrySpec, Point};
use hbs_core::io::{read_grid_csv, read_vector, write_grid_csv, write_vector_csv};
use hbs_core::quadrature::{build_grid, harmonic_trace, QuadratureGrid};
use hbs_core::workflow::{harmonic_check, Solver};
use hbs_core::Error;

#[derive(Parser)]
#[command(
    name = "hbs",
    version,
    about = "Linear-complexity direct solver for boundary integral equations"
)]
struct Cli {
    /// Worker threads for the level-parallel loops (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Seed for every random choice (power-iteration start vectors).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a geometry spec (JSON) and write the quadrature grid as CSV.
    Discretize {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        nodes_per_panel: usize,
        /// Overrides the corner grading depth given in the geometry file.
        #[arg(long)]
        corner_levels: Option<usize>,
    },
    /// Solve the double-layer system on a grid CSV.
    Solve {
        grid: PathBuf,
        /// `harmonic:x0,y0` (boundary trace of log|x - x0|) or a vector file.
        #[arg(long)]
        rhs: String,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Append power-iteration error estimates (costs O(N²) per step).
        #[arg(long)]
        estimate_errors: bool,
    },
    /// Time the four solver steps over a range of sizes.
    Benchmark {
        #[arg(long, value_enum, default_value_t = Family::SmoothStar)]
        family: Family,
        /// Target sizes; the actual N is the nearest grid size not below.
        #[arg(long, value_delimiter = ',', default_value = "5000,10000,20000,40000")]
        sizes: Vec<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 10)]
        nodes_per_panel: usize,
        /// Error columns are filled only up to this N.
        #[arg(long, default_value_t = 8000)]
        error_cap: usize,
        /// Runs per size; the fastest time of each step is kept.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    proxy_points: usize,
    #[arg(long, default_value_t = 1.5)]
    proxy_radius_factor: f64,
    #[arg(long, value_enum, default_value_t = Mode::Proxy)]
    mode: Mode,
    #[arg(long)]
    symmetrize: bool,
    #[arg(long, default_value_t = 64)]
    leaf_size: usize,
    #[arg(long, default_value_t = 8000)]
    dense_limit: usize,
    #[arg(long, default_value_t = DEFAULT_POWER_ITERS)]
    power_iters: usize,
}

impl SolverArgs {
    fn config(&self) -> CompressionConfig {
        CompressionConfig {
            tol: self.tol,
            proxy_points: self.proxy_points,
            proxy_radius_factor: self.proxy_radius_factor,
            symmetrize: self.symmetrize,
            target_leaf: self.leaf_size,
            mode: match self.mode {
                Mode::Dense => CompressionMode::Dense,
                Mode::Proxy => CompressionMode::Proxy,
            },
            dense_limit: self.dense_limit,
            ..CompressionConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Dense,
    Proxy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    SmoothStar,
    CornerStar,
    Snake,
}

/// Exit status 2 for bad input, 3 for numerical breakdown.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SingularBlock { .. }
            | Error::SingularCore
            | Error::SingularNode { .. }
            | Error::UnequalRanks { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

fn input_err(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        msg: msg.into(),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hbs: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| input_err(e.to_string()))?;
    }
    match cli.command {
        Command::Discretize {
            spec,
            output,
            nodes_per_panel,
            corner_levels,
        } => discretize(&spec, &output, nodes_per_panel, corner_levels),
        Command::Solve {
            grid,
            rhs,
            output,
            report,
            solver,
            estimate_errors,
        } => solve(
            &grid,
            &rhs,
            &output,
            report.as_deref(),
            &solver,
            estimate_errors,
            cli.seed,
        ),
        Command::Benchmark {
            family,
            sizes,
            output,
            solver,
            nodes_per_panel,
            error_cap,
            repeats,
        } => {
            let mut out: Box<dyn Write> = match &output {
                Some(p) => Box::new(create(p)?),
                None => Box::new(std::io::stdout().lock()),
            };
            let opts = BenchOptions {
                family,
                nodes_per_panel,
                error_cap,
                repeats: repeats.max(1),
                seed: cli.seed,
            };
            benchmark(&mut out, &sizes, &solver, &opts)
        }
    }
}

fn discretize(
    spec: &Path,
    output: &Path,
    npp: usize,
    corner_levels: Option<usize>,
) -> Result<(), Failure> {
    let text =
        std::fs::read_to_string(spec).map_err(|e| input_err(format!("{}: {e}", spec.display())))?;
    let spec = GeometrySpec::from_json(&text)?;
    let contour = make_contour(spec.contour)?;
    let panels = decompose(
        &contour,
        spec.panels_per_unit,
        corner_levels.unwrap_or(spec.corner_levels),
    )?;
    let grid = build_grid(&contour, &panels, npp)?;
    let mut w = create(output)?;
    write_grid_csv(&mut w, &grid)?;
    w.flush().map_err(Error::from)?;
    eprintln!(
        "wrote {} nodes on {} panels",
        grid.len(),
        grid.panel_count()
    );
    Ok(())
}

fn parse_harmonic(spec: &str) -> Result<Option<Point>, Failure> {
    let Some(rest) = spec.strip_prefix("harmonic:") else {
        return Ok(None);
    };
    let xy: Vec<f64> = rest
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| input_err(format!("bad harmonic source {rest:?}")))?;
    match xy[..] {
        [x, y] => Ok(Some([x, y])),
        _ => Err(input_err(format!(
            "harmonic source needs two coordinates, got {rest:?}"
        ))),
    }
}

fn solve(
    grid_path: &Path,
    rhs_spec: &str,
    output: &Path,
    report_path: Option<&Path>,
    args: &SolverArgs,
    estimate: bool,
    seed: u64,
) -> Result<(), Failure> {
    let grid = read_grid_csv(open(grid_path)?)?;
    let source = parse_harmonic(rhs_spec)?;
    let rhs = match source {
        Some(x0) => harmonic_trace(&grid, x0),
        None => read_vector(open(Path::new(rhs_spec))?)?,
    };
    if rhs.len() != grid.len() {
        return Err(input_err(format!(
            "right-hand side has {} entries, grid has {} nodes",
            rhs.len(),
            grid.len()
        )));
    }
    let mut solver = Solver::build(&grid, &args.config())?;
    let q = solver.solve(&rhs)?;
    if let Some(x0) = source {
        let chk = harmonic_check(&grid, &q, x0, 10);
        println!(
            "interior reproduction error: {:.3e} (relative {:.3e})",
            chk.max_abs_error, chk.max_rel_error
        );
        solver.report.harmonic_check = Some(chk);
    }
    if estimate {
        let est = solver.estimate_errors(&grid, args.dense_limit, args.power_iters, seed)?;
        println!(
            "err_A {:.3e}  norm_inv {:.3e}  bound {:.3e}",
            est.err_a, est.norm_inv, est.bound
        );
    }
    for w in &solver.report.conditioning.warnings {
        eprintln!("warning: {w}");
    }
    let mut w = create(output)?;
    write_vector_csv(&mut w, "q", &q)?;
    w.flush().map_err(Error::from)?;
    if let Some(p) = report_path {
        let mut r = create(p)?;
        serde_json::to_writer_pretty(&mut r, &solver.report).map_err(Error::from)?;
        writeln!(r).and_then(|_| r.flush()).map_err(Error::from)?;
    }
    Ok(())
}

struct BenchOptions {
    family: Family,
    nodes_per_panel: usize,
    error_cap: usize,
    repeats: usize,
    seed: u64,
}

fn family_grid(family: Family, target: usize, npp: usize) -> Result<QuadratureGrid, Failure> {
    let (kind, levels) = match family {
        Family::SmoothStar => (ContourKind::smooth_star(), 0),
        Family::CornerStar => (ContourKind::corner_star(), 5),
        Family::Snake => (ContourKind::snake(2), 5),
    };
    let contour = make_contour(kind)?;
    let size = |ppu: usize| -> Result<QuadratureGrid, Failure> {
        Ok(build_grid(
            &contour,
            &decompose(&contour, ppu, levels)?,
            npp,
        )?)
    };
    // Grid size grows monotonically with the base panel count.
    let (mut lo, mut hi) = (1usize, 1usize);
    while size(hi)?.len() < target {
        lo = hi;
        hi *= 2;
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if size(mid)?.len() < target {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    size(hi)
}

/// Three significant digits.
fn sig3(x: f64) -> String {
    format!("{x:.2e}")
}

fn benchmark(
    out: &mut dyn Write,
    sizes: &[usize],
    args: &SolverArgs,
    opts: &BenchOptions,
) -> Result<(), Failure> {
    let cfg = args.config();
    let io = |e: std::io::Error| Failure::from(Error::from(e));
    writeln!(
        out,
        "N,t_compress,t_invert,t_reformat,t_apply,err_A,norm_inv"
    )
    .map_err(io)?;
    for &target in sizes {
        let grid = family_grid(opts.family, target, opts.nodes_per_panel)?;
        let rhs = harmonic_trace(&grid, [3.0, 0.0]);
        let mut best: Option<Solver> = None;
        let mut t = [f64::INFINITY; 4];
        for _ in 0..opts.repeats {
            let mut s = Solver::build(&grid, &cfg)?;
            s.solve(&rhs)?;
            let tm = &s.report.timings;
            for (slot, v) in t
                .iter_mut()
                .zip([tm.compress, tm.invert, tm.reformat, tm.apply])
            {
                *slot = slot.min(v);
            }
            best = Some(s);
        }
        let mut s = best.expect("at least one repeat");
        let (err, ninv) = if grid.len() <= opts.error_cap {
            let est = s.estimate_errors(&grid, opts.error_cap, args.power_iters, opts.seed)?;
            (sig3(est.err_a), sig3(est.norm_inv))
        } else {
            (String::new(), String::new())
        };
        writeln!(
            out,
            "{},{},{},{},{},{err},{ninv}",
            grid.len(),
            sig3(t[0]),
            sig3(t[1]),
            sig3(t[2]),
            sig3(t[3])
        )
        .map_err(io)?;
        out.flush().map_err(io)?;
    }
    Ok(())
}
