//! `bosonic`: solvers, enumerators and verification suites from the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bosonic::interferometer::{schwinger_derivative, C64};
use bosonic::lattice::{catalan_bounds, catalan_dyck_spec, DyckSpec};
use bosonic::parity::{count_preimages, full_depth_case_analysis};
use bosonic::problems::{
    mobius_min, random_portfolios, returns_from_price_file, write_frontier_csv, write_random_baseline_csv,
    ReturnStatistics,
};
use bosonic::solver::{central_difference_gradient, exact_parity_objective, parameter_shift_gradient, run_portfolio};
use bosonic::*;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

const CSV_SCHEMAS: &str = "\
CSV outputs:
  *_curves.csv      config_tag,iteration,energy,best_energy
  frontier.csv      gamma,risk,return,bitstring
  baseline.csv      risk,return";

#[derive(Parser)]
#[command(name = "bosonic", version, about = "Variational bosonic solver and Catalan lattice tools", after_help = CSV_SCHEMAS)]
struct Cli {
    /// Directory for result files.
    #[arg(long, global = true, env = "BOSONIC_OUTPUT_DIR", default_value = ".")]
    output: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize a QUBO read from a CSV or JSON matrix file.
    SolveQubo {
        /// Q matrix (CSV rows, or JSON rows / {"Q": rows}).
        #[arg(long, required_unless_present = "builtin")]
        matrix: Option<PathBuf>,
        /// Use a built-in reference matrix instead (6 or 11).
        #[arg(long, conflicts_with = "matrix")]
        builtin: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Minimize the Mobius-ladder Ising model.
    SolveMobius {
        #[arg(long)]
        n: usize,
        #[arg(long = "ja", allow_negative_numbers = true)]
        ja: f64,
        #[arg(long = "jb", allow_negative_numbers = true)]
        jb: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve binary portfolio problems over a list of risk aversions.
    SolvePortfolio {
        /// Price table CSV (date column, then one column per asset).
        #[arg(long, group = "data")]
        prices: Option<PathBuf>,
        /// JSON statistics {"mu": [...], "sigma": [[...]], "assets": [...]}.
        #[arg(long, group = "data")]
        stats: Option<PathBuf>,
        /// Synthetic instance with this many assets.
        #[arg(long, group = "data")]
        synthetic: Option<usize>,
        /// Seed of the synthetic instance.
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        /// Risk aversions, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        gamma: Vec<f64>,
        /// Bits per asset.
        #[arg(long, default_value_t = 1)]
        n_q: usize,
        #[arg(long, value_enum, default_value_t = Approach::Normalized)]
        approach: Approach,
        /// Number of random portfolios written to baseline.csv (0 to skip).
        #[arg(long, default_value_t = 10_000)]
        baseline: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// List the Catalan basis reachable at a given depth.
    Enumerate {
        #[arg(long = "modes", short = 'm')]
        modes: usize,
        #[arg(long = "photons", short = 'n')]
        photons: usize,
        #[arg(long)]
        depth: usize,
        /// Print the listing as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Export a Young lattice with diagram, pattern and bit-string labels.
    Lattice {
        /// Bounding columns, comma separated (for example 2,3,4).
        #[arg(long, value_delimiter = ',', conflicts_with = "catalan")]
        mu: Option<Vec<u32>>,
        /// Catalan lattice M,n,depth.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        catalan: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value_t = GraphFormat::Text)]
        format: GraphFormat,
        /// Count B_k sublattices for each listed k.
        #[arg(long, value_delimiter = ',')]
        boolean: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Definition::Interval)]
        definition: Definition,
    },
    /// Run a verification suite and print a JSON report.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Largest M checked by the parity-surjectivity suite.
        #[arg(long, default_value_t = 8)]
        max_modes: usize,
    },
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Solver config JSON, or a previous result file to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "samples")]
    exact: bool,
    /// Shots per objective evaluation.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Optimize phase-shifter angles as well.
    #[arg(long)]
    phases: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Approach {
    PenaltyQubo,
    Normalized,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Definition {
    Interval,
    Sublattice,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    ParitySurjectivity,
    DyckCounts,
    Multiplicities,
    Gradients,
}

enum Failure {
    Computation(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_computational() {
            Failure::Computation(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SolveQubo { matrix, builtin, solver } => solve_qubo(&cli.output, matrix, builtin, &solver),
        Command::SolveMobius { n, ja, jb, solver } => solve_mobius(&cli.output, n, ja, jb, &solver),
        Command::SolvePortfolio { prices, stats, synthetic, data_seed, gamma, n_q, approach, baseline, solver } => {
            let source = PortfolioSource { prices, stats, synthetic, data_seed };
            solve_portfolio(&cli.output, &source, &gamma, n_q, approach, baseline, &solver)
        }
        Command::Enumerate { modes, photons, depth, json } => enumerate(modes, photons, depth, json),
        Command::Lattice { mu, catalan, format, boolean, definition } => {
            lattice(&cli.output, mu, catalan, format, &boolean, definition)
        }
        Command::Verify { suite, max_modes } => verify(suite, max_modes),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Computation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Prints a line to stdout; a closed pipe ends output quietly.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    if writeln!(out, "{line}").is_err() {
        std::process::exit(0);
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read_file(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Base config from `--config` (a config document or a result file), then flag overrides.
fn solver_config(args: &SolverArgs) -> std::result::Result<SolverConfig, Failure> {
    let mut config = match &args.config {
        None => SolverConfig::default(),
        Some(path) => {
            let text = read_file(path)?;
            let doc: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let inner = doc.pointer("/result/config").or_else(|| doc.get("config")).unwrap_or(&doc);
            SolverConfig::from_json(&inner.to_string()).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if args.exact {
        config.sampling = Sampling::Exact;
    }
    if let Some(n) = args.samples {
        config.sampling = Sampling::Samples(n);
    }
    if let Some(d) = args.depth {
        config.depth = d;
    }
    if let Some(eta) = args.eta {
        config.eta = eta;
    }
    if let Some(it) = args.iterations {
        config.max_iterations = it;
    }
    if args.phases {
        config.optimize_phases = true;
    }
    config.validate()?;
    Ok(config)
}

fn prepare_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| usage(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn solve_qubo(out: &Path, matrix: Option<PathBuf>, builtin: Option<usize>, args: &SolverArgs) -> Outcome {
    let (q, source) = match (matrix, builtin) {
        (Some(path), _) => (QuboProblem::from_path(&path)?, path.display().to_string()),
        (None, Some(6)) => (QuboProblem::reference_6x6(), "builtin-6x6".to_string()),
        (None, Some(11)) => (QuboProblem::reference_11x11(), "builtin-11x11".to_string()),
        (None, Some(k)) => return Err(usage(format!("no built-in matrix of size {k}; use 6 or 11"))),
        (None, None) => return Err(usage("--matrix or --builtin is required")),
    };
    let config = solver_config(args)?;
    let result = run_variational(&ProblemSpec::Qubo(q), &config)?;
    prepare_dir(out)?;
    write_json(&out.join("qubo_result.json"), &json!({ "command": "solve-qubo", "matrix": source, "result": result }))?;
    result.write_learning_curves_path(&out.join("qubo_curves.csv"))?;
    emit(&format!("E_min {} at {}", result.e_min, result.b_min));
    Ok(())
}

fn solve_mobius(out: &Path, n: usize, ja: f64, jb: f64, args: &SolverArgs) -> Outcome {
    let problem = MobiusProblem::new(n, ja, jb)?;
    let analytic = mobius_min(&problem)?;
    let config = solver_config(args)?;
    let result = run_variational(&ProblemSpec::Mobius(problem), &config)?;
    prepare_dir(out)?;
    write_json(
        &out.join("mobius_result.json"),
        &json!({ "command": "solve-mobius", "n": n, "J_a": ja, "J_b": jb, "analytic_min": analytic, "result": result }),
    )?;
    result.write_learning_curves_path(&out.join("mobius_curves.csv"))?;
    emit(&format!("E_min {} at {} (analytic minimum {analytic})", result.e_min, result.b_min));
    Ok(())
}

struct PortfolioSource {
    prices: Option<PathBuf>,
    stats: Option<PathBuf>,
    synthetic: Option<usize>,
    data_seed: u64,
}

fn solve_portfolio(
    out: &Path,
    source: &PortfolioSource,
    gammas: &[f64],
    n_q: usize,
    approach: Approach,
    baseline: usize,
    args: &SolverArgs,
) -> Outcome {
    let approach = match approach {
        Approach::PenaltyQubo => PortfolioApproach::PenaltyQubo,
        Approach::Normalized => PortfolioApproach::Normalized,
    };
    let gamma0 = gammas.first().copied().unwrap_or(1.0);
    let (problem, data) = if let Some(path) = &source.prices {
        let s = returns_from_price_file(path)?;
        let p = PortfolioProblem::new(s.mu, s.sigma, gamma0, n_q, approach)?.with_assets(s.assets);
        (p, json!({ "prices": path.display().to_string() }))
    } else if let Some(path) = &source.stats {
        let text = read_file(path)?;
        let s: ReturnStatistics = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let p = PortfolioProblem::new(s.mu, s.sigma, gamma0, n_q, approach)?.with_assets(s.assets);
        (p, json!({ "stats": path.display().to_string() }))
    } else if let Some(n) = source.synthetic {
        let p = PortfolioProblem::synthetic(n, source.data_seed, gamma0, n_q, approach)?;
        (p, json!({ "synthetic": n, "data_seed": source.data_seed }))
    } else {
        return Err(usage("one of --prices, --stats or --synthetic is required"));
    };
    let config = solver_config(args)?;
    let sweep = run_portfolio(&problem, &config, gammas)?;
    prepare_dir(out)?;
    for (run, point) in sweep.runs.iter().zip(&sweep.frontier) {
        write_json(
            &out.join(format!("portfolio_gamma_{}.json", point.gamma)),
            &json!({ "command": "solve-portfolio", "data": data, "gamma": point.gamma, "N_q": n_q, "result": run }),
        )?;
    }
    write_frontier_csv(&out.join("frontier.csv"), &sweep.frontier)?;
    if baseline > 0 {
        let randoms = random_portfolios(problem.asset_count(), baseline, config.master_seed);
        write_random_baseline_csv(&out.join("baseline.csv"), &problem, &randoms)?;
    }
    for p in &sweep.frontier {
        emit(&format!("gamma {} risk {} return {} bits {}", p.gamma, p.risk, p.ret, p.bitstring));
    }
    Ok(())
}

fn enumerate(m: usize, n: usize, depth: usize, as_json: bool) -> Outcome {
    let basis = catalan_basis(m, n, depth)?;
    let spec = catalan_dyck_spec(m, n, depth)?;
    let closed = dyck_count(&spec)?;
    if as_json {
        let patterns: Vec<String> = basis.iter().map(|p| p.to_string()).collect();
        let doc = json!({
            "M": m, "n": n, "depth": depth, "count": basis.len(),
            "dyck": { "k": spec.k, "delta1": spec.delta1, "delta2": spec.delta2 },
            "closed_form": closed.to_string(), "patterns": patterns,
        });
        emit(&serde_json::to_string_pretty(&doc).map_err(|e| usage(e.to_string()))?);
    } else {
        emit(&format!("# C_{depth}({m},{n}) count={} dyck={spec} closed_form={closed}", basis.len()));
        for p in &basis {
            emit(&p.to_string());
        }
    }
    if basis.len() as u128 != closed {
        return Err(Failure::Computation(format!("enumeration {} differs from closed form {closed}", basis.len())));
    }
    Ok(())
}

fn lattice(
    out: &Path,
    mu: Option<Vec<u32>>,
    catalan: Option<Vec<usize>>,
    format: GraphFormat,
    boolean: &[usize],
    definition: Definition,
) -> Outcome {
    let (bound, name) = match (mu, catalan) {
        (Some(mu), _) => {
            let label = mu.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("_");
            (ExtendedFerrers::from_bound(&mu, None)?, format!("young_{label}"))
        }
        (None, Some(c)) if c.len() == 3 => {
            (catalan_bounds(c[0], c[1], c[2])?, format!("catalan_{}_{}_{}", c[0], c[1], c[2]))
        }
        (None, Some(_)) => return Err(usage("--catalan takes M,n,depth")),
        (None, None) => (ExtendedFerrers::from_bound(&[], None)?, "young_empty".to_string()),
    };
    let lattice = young_lattice(&bound)?;
    let definition = match definition {
        Definition::Interval => BooleanDefinition::Interval,
        Definition::Sublattice => BooleanDefinition::Sublattice,
    };
    let mut counts = serde_json::Map::new();
    for &k in boolean {
        counts.insert(format!("B{k}"), json!(count_boolean_sublattices(&lattice, k, definition)?));
    }
    prepare_dir(out)?;
    let (path, body) = match format {
        GraphFormat::Text => (out.join(format!("{name}.txt")), lattice.to_text()?),
        GraphFormat::Json => (out.join(format!("{name}.json")), lattice.to_json()?),
    };
    fs::write(&path, body).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let summary = json!({
        "mu": bound.to_string(),
        "vertices": lattice.len(),
        "edges": lattice.cover_edges.len(),
        "boolean": counts,
        "definition": definition,
        "file": path.display().to_string(),
    });
    emit(&serde_json::to_string_pretty(&summary).map_err(|e| usage(e.to_string()))?);
    Ok(())
}

#[derive(Serialize)]
struct CheckLine {
    name: String,
    value: Value,
    expected: Value,
    pass: bool,
}

fn check(name: String, value: impl Serialize, expected: impl Serialize) -> CheckLine {
    let value = json!(value);
    let expected = json!(expected);
    let pass = value == expected;
    CheckLine { name, value, expected, pass }
}

fn verify(suite: Suite, max_modes: usize) -> Outcome {
    let (name, checks) = match suite {
        Suite::ParitySurjectivity => ("parity-surjectivity", suite_surjectivity(max_modes)?),
        Suite::DyckCounts => ("dyck-counts", suite_dyck()?),
        Suite::Multiplicities => ("multiplicities", suite_multiplicities()?),
        Suite::Gradients => ("gradients", suite_gradients()?),
    };
    let pass = checks.iter().all(|c| c.pass);
    let report = json!({ "suite": name, "pass": pass, "checks": checks });
    emit(&serde_json::to_string_pretty(&report).map_err(|e| usage(e.to_string()))?);
    if pass {
        Ok(())
    } else {
        Err(Failure::Computation(format!("suite {name} has failing checks")))
    }
}

fn suite_surjectivity(max_modes: usize) -> std::result::Result<Vec<CheckLine>, Failure> {
    let mut out = Vec::new();
    for m in 3..=max_modes {
        let r = verify_surjectivity(m, 1, &[m - 1, m], &[0, 1])?;
        out.push(check(format!("M={m} depth=1 covered"), r.covered.len(), 1u64 << m));
    }
    for m in 2..=max_modes.min(7) {
        let a = full_depth_case_analysis(m)?;
        out.push(check(format!("M={m} full-depth disjoint and complete"), a.disjoint && a.union_complete, true));
    }
    Ok(out)
}

fn suite_dyck() -> std::result::Result<Vec<CheckLine>, Failure> {
    let mut out = Vec::new();
    for ((k, a, b), want) in [((7, 2, 1), 28u64), ((6, 2, 2), 19), ((6, 1, 1), 14), ((6, 3, 3), 20), ((8, 0, 0), 14)] {
        let spec = DyckSpec::new(k, a, b)?;
        out.push(check(format!("|{spec}|"), dyck_count(&spec)? as u64, want));
    }
    for k in 0..=12 {
        for d1 in 0..=k {
            for d2 in 0..=k {
                if (k + d1 + d2) % 2 == 0 {
                    let spec = DyckSpec::new(k, d1, d2)?;
                    let listed = enumerate_dyck_paths(&spec)?.len() as u64;
                    out.push(check(format!("{spec} enumeration"), listed, dyck_count(&spec)? as u64));
                }
            }
        }
    }
    Ok(out)
}

fn suite_multiplicities() -> std::result::Result<Vec<CheckLine>, Failure> {
    let mut out = Vec::new();
    for mm in 1..=7usize {
        for n in [mm - 1, mm] {
            for m in 0..=mm {
                let mut bits = vec![0u8; mm];
                bits[m..].iter_mut().for_each(|b| *b = 1);
                let b = BitString::from_bits(&bits)?;
                if (n + mm + m) % 2 == 0 {
                    out.push(check(format!("upsilon0({mm},{n},{m})"), upsilon0(mm, n, m)?, count_preimages(n, &b, 0)?));
                }
                if (n + m) % 2 == 0 {
                    out.push(check(
                        format!("upsilon0_prime({mm},{n},{m})"),
                        upsilon0_prime(mm, n, m)?,
                        count_preimages(n, &b, 1)?,
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Deterministic Hermitian coefficient matrix with entries in [−1, 1].
fn test_observable(m: usize) -> Vec<Vec<C64>> {
    let mut o = vec![vec![C64::new(0.0, 0.0); m]; m];
    for a in 0..m {
        o[a][a] = C64::new(((a * 7 + 3) % 11) as f64 / 5.5 - 1.0, 0.0);
        for b in a + 1..m {
            let v = C64::new(((a * 5 + b * 3) % 13) as f64 / 6.5 - 1.0, ((a + 2 * b) % 7) as f64 / 3.5 - 1.0);
            o[a][b] = v;
            o[b][a] = v.conj();
        }
    }
    o
}

fn suite_gradients() -> std::result::Result<Vec<CheckLine>, Failure> {
    let mut out = Vec::new();
    let tolerance = |name: String, dev: f64, tol: f64| CheckLine {
        name,
        value: json!(dev),
        expected: json!(format!("<= {tol:e}")),
        pass: dev <= tol,
    };
    for m in 2..=5usize {
        for n in [m - 1, m] {
            for depth in 1..m {
                let c = CircuitSpec::standard(m, n, depth)?;
                let params: Vec<f64> = (0..c.parameter_count(true)).map(|i| 0.37 + 1.13 * i as f64).collect();
                let o = test_observable(m);
                let f = |p: &[f64]| schwinger_expectation(&c, p, &o);
                let mut shift_dev = 0.0f64;
                let mut oracle_dev = 0.0f64;
                for i in 0..params.len() {
                    let analytic = schwinger_derivative(&c, &params, &o, i)?;
                    shift_dev = shift_dev.max((parameter_shift_gradient(f, &params, i)? - analytic).abs());
                    oracle_dev = oracle_dev.max((central_difference_gradient(f, &params, i, 1e-5)? - analytic).abs());
                }
                out.push(tolerance(
                    format!("M={m} n={n} depth={depth} central difference vs analytic"),
                    oracle_dev,
                    1e-6,
                ));
                out.push(tolerance(format!("M={m} n={n} depth={depth} parameter shift vs analytic"), shift_dev, 1e-8));
            }
        }
    }
    let q = QuboProblem::new(vec![
        vec![-1.0, 0.5, 0.0, 0.2],
        vec![0.5, -0.8, 0.3, 0.0],
        vec![0.0, 0.3, -0.6, 0.4],
        vec![0.2, 0.0, 0.4, -0.9],
    ])?;
    let c = CircuitSpec::standard(4, 4, 1)?;
    let params = [0.4, 1.1, 2.3];
    for j in 0..2u8 {
        let f = |p: &[f64]| exact_parity_objective(&c, p, j, |b: &BitString| q.energy(b).unwrap_or(f64::NAN));
        for i in 0..params.len() {
            let ps = parameter_shift_gradient(f, &params, i)?;
            let cd = central_difference_gradient(f, &params, i, 1e-5)?;
            out.push(CheckLine {
                name: format!("parity objective M=4 j={j} angle {i}: shift minus central difference"),
                value: json!(ps - cd),
                expected: json!("reported"),
                pass: true,
            });
        }
    }
    Ok(out)
}
