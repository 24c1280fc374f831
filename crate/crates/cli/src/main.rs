use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use adaptree::adaptive::{
    build_adaptive_approximant, estimate_rate_s, estimate_seminorm, eta_grid, rate_curve, DeltaPyramid, PiecewisePolynomial,
    PyramidOptions,
};
use adaptree::corpus::{self, estimate_minkowski_dim, TargetSpec};
use adaptree::dyadic::default_j_max;
use adaptree::harness::{
    emit_outputs, fit_slope, generate_dataset, run_sweep_with, Column, ExperimentConfig, OutputFormats, ResultTable, CSV_HEADER,
};
use adaptree::measure::QuadratureSpec;
use adaptree::poly::Fitter;
use adaptree::relu::{compile_adaptive_net, CompileOptions, ReluNetwork};
use adaptree::trainer::{init_mlp, mse, train, MlpArchitecture, TrainConfig};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adaptree", version, about = "Adaptive tree approximation, ReLU compilation and rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the registered target functions.
    Targets {
        #[arg(long)]
        list: bool,
        /// Degree used for the predicted s column.
        #[arg(long, default_value_t = 1)]
        theta: usize,
    },
    /// η^m·#T along a threshold grid, as CSV.
    Seminorm {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 1)]
        theta: usize,
        /// Defaults to the target's predicted s.
        #[arg(long)]
        s: Option<f64>,
        /// Comma-separated thresholds; defaults to 40 points over 4 decades below max δ.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        #[arg(long)]
        j_max: Option<u32>,
    },
    /// Adaptive partition for one threshold (or the smallest of a grid).
    Approximate {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 1)]
        theta: usize,
        #[arg(long, conflicts_with_all = ["eta_grid", "size"])]
        eta: Option<f64>,
        /// Comma-separated thresholds; prints the rate curve as CSV.
        #[arg(long, value_delimiter = ',')]
        eta_grid: Vec<f64>,
        /// Pick the threshold giving this many tree nodes.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        j_max: Option<u32>,
        /// Partition JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a partition JSON into a ReLU network JSON.
    Compile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the `s_hat` stored by `approximate`.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        clamp: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        mc_points: usize,
    },
    /// Evaluate a network JSON on the points of a CSV file (one point per row).
    EvalNet {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        points: PathBuf,
    },
    /// Train one MLP on noisy samples of a target.
    Train {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = 20_000)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        n_test: usize,
        /// Hidden widths, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [64, 128, 64])]
        hidden: Vec<usize>,
        /// Network JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Loss history CSV output.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Run a configured sweep, resuming from an existing results.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Fit log-log slopes from a results table.
    Rates {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value = "x")]
        x: String,
        #[arg(long, default_value = "metric")]
        y: String,
        /// Comma-separated grouping columns.
        #[arg(long, value_delimiter = ',', default_values_t = ["target".to_string()])]
        group: Vec<String>,
    },
    /// Box-counting dimension of a target's discontinuity set.
    BoundaryDim {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 3)]
        from: u32,
        #[arg(long, default_value_t = 8)]
        to: u32,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Targets { list: _, theta } => targets(theta),
        Command::Seminorm { target, theta, s, grid, j_max } => seminorm(&target, theta, s, grid, j_max),
        Command::Approximate { target, theta, eta, eta_grid, size, j_max, out } => {
            approximate(&target, theta, eta, eta_grid, size, j_max, out.as_deref())
        }
        Command::Compile { input, eps, out, s, clamp, mc_points } => compile(&input, eps, &out, s, clamp, mc_points),
        Command::EvalNet { net, points } => eval_net(&net, &points),
        Command::Train { target, n, sigma, epochs, lr, seed, n_test, hidden, out, history } => {
            let spec = corpus::target(&target)?;
            let mut widths = vec![spec.dim];
            widths.extend(hidden);
            widths.push(1);
            let measure = spec.default_measure();
            let data = generate_dataset(spec, n, sigma, &measure, seed)?;
            let test = generate_dataset(spec, n_test, 0.0, &measure, seed ^ 0x5eed_7e57)?;
            let cfg = TrainConfig { learning_rate: lr, epochs, batch_size: None, seed };
            let (net, hist) = train(&init_mlp(&MlpArchitecture::new(widths)?, seed), &data, &cfg)?;
            println!("train_mse {:e}", mse(&net, &data)?);
            println!("test_mse {:e}", mse(&net, &test)?);
            if let Some(p) = out {
                fs::write(&p, net.to_json()?).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = history {
                let body: String = std::iter::once("epoch,loss\n".to_string())
                    .chain(hist.iter().enumerate().map(|(i, l)| format!("{i},{l:e}\n")))
                    .collect();
                fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(())
        }
        Command::Sweep { config, out_dir } => sweep(&config, out_dir),
        Command::Rates { table, x, y, group } => {
            let t = ResultTable::load(&table).with_context(|| format!("reading {}", table.display()))?;
            let keys = group.iter().map(|g| g.parse::<Column>()).collect::<Result<Vec<_>, _>>()?;
            println!("group,slope,stderr,intercept,points");
            for f in fit_slope(&t, x.parse()?, y.parse()?, &keys)? {
                println!("{},{:.6},{:.6},{:.6},{}", f.group.join(" "), f.slope, f.stderr, f.intercept, f.points.len());
            }
            Ok(())
        }
        Command::BoundaryDim { target, from, to } => {
            let spec = corpus::target(&target)?;
            let oracle = spec.boundary.ok_or_else(|| anyhow!("target `{target}` has no registered discontinuity set"))?;
            let scales: Vec<u32> = (from..=to).collect();
            let est = estimate_minkowski_dim(&oracle, spec.dim, &scales)?;
            println!("{}", serde_json::to_string_pretty(&est)?);
            Ok(())
        }
    }
}

fn targets(theta: usize) -> Result<()> {
    println!("name\td\tpredicted_s\tdescription");
    for t in corpus::targets() {
        println!("{}\t{}\t{}\t{}", t.name, t.dim, t.predicted_s(theta), t.description);
    }
    Ok(())
}

fn pyramid(spec: &TargetSpec, fitter: &Fitter, j_max: Option<u32>) -> Result<DeltaPyramid> {
    let opts = PyramidOptions::for_dim(spec.dim).j_max(j_max.unwrap_or(default_j_max(spec.dim)));
    Ok(DeltaPyramid::build(&spec.eval, fitter, opts)?)
}

fn seminorm(target: &str, theta: usize, s: Option<f64>, grid: Vec<f64>, j_max: Option<u32>) -> Result<()> {
    let spec = corpus::target(target)?;
    let measure = spec.default_measure();
    let fitter = Fitter::new(&measure, theta, &QuadratureSpec::for_degree(theta))?;
    let pyr = pyramid(spec, &fitter, j_max)?;
    let grid = if grid.is_empty() { eta_grid(pyr.delta_max(), 40, 4.0) } else { grid };
    let curve = estimate_seminorm(&pyr, s.unwrap_or_else(|| spec.predicted_s(theta)), &grid)?;
    print!("{}", curve.to_csv());
    eprintln!("seminorm_estimate {:e} not_converged {}", curve.seminorm_estimate, curve.not_converged);
    Ok(())
}

fn approximate(
    target: &str,
    theta: usize,
    eta: Option<f64>,
    grid: Vec<f64>,
    size: Option<usize>,
    j_max: Option<u32>,
    out: Option<&Path>,
) -> Result<()> {
    let spec = corpus::target(target)?;
    let measure = spec.default_measure();
    let fitter = Fitter::new(&measure, theta, &QuadratureSpec::for_degree(theta))?;
    let pyr = pyramid(spec, &fitter, j_max)?;
    let default_grid = eta_grid(pyr.delta_max(), 40, 4.0);
    let s_hat = estimate_rate_s(&pyr, if grid.is_empty() { &default_grid } else { &grid }).ok().map(|r| r.s_hat);
    let chosen = match (eta, size) {
        (Some(e), _) => e,
        (_, Some(n)) => pyr.eta_for_size(n).ok_or_else(|| anyhow!("no threshold gives {n} tree nodes"))?,
        _ if !grid.is_empty() => {
            println!("eta,tree_size,cells,error_sq,depth_capped");
            for p in rate_curve(&spec.eval, &pyr, &fitter, &grid, Default::default())? {
                println!("{:e},{},{},{:e},{}", p.eta, p.tree_size, p.cells, p.error_sq, p.depth_capped);
            }
            grid.iter().copied().fold(f64::INFINITY, f64::min)
        }
        _ => bail!("give one of --eta, --eta-grid or --size"),
    };
    let tr = pyr.truncate(chosen);
    if let Some(w) = tr.warning() {
        eprintln!("warning: {w}");
    }
    let pp = build_adaptive_approximant(&spec.eval, &tr.tree, &fitter, chosen, Default::default())?;
    eprintln!("eta {chosen:e} tree_size {} cells {} s_hat {:?}", tr.tree.len(), pp.partition.len(), s_hat);
    if let Some(p) = out {
        let mut v: serde_json::Value = serde_json::from_str(&pp.to_json()?)?;
        if let (Some(s), Some(obj)) = (s_hat, v.as_object_mut()) {
            obj.insert("s_hat".into(), serde_json::json!(s));
        }
        fs::write(p, serde_json::to_string_pretty(&v)?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn compile(input: &Path, eps: f64, out: &Path, s: Option<f64>, clamp: Option<f64>, mc_points: usize) -> Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let pp = PiecewisePolynomial::from_json(&text)?;
    let stored: serde_json::Value = serde_json::from_str(&text)?;
    let s = s
        .or_else(|| stored.get("s_hat").and_then(serde_json::Value::as_f64))
        .ok_or_else(|| anyhow!("no --s given and the partition has no s_hat"))?;
    let mut opts = CompileOptions::new(s);
    opts.eps = Some(eps);
    opts.clamp = clamp;
    opts.mc_points = mc_points;
    let (net, report) = compile_adaptive_net(&pp, &opts)?;
    fs::write(out, net.to_json()?).with_context(|| format!("writing {}", out.display()))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn eval_net(net: &Path, points: &Path) -> Result<()> {
    let net = ReluNetwork::from_json(&fs::read_to_string(net).with_context(|| format!("reading {}", net.display()))?)?;
    let text = fs::read_to_string(points).with_context(|| format!("reading {}", points.display()))?;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let x: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let x = match x {
            Ok(x) => x,
            // header row
            Err(_) if i == 0 => continue,
            Err(e) => bail!("line {}: {e}", i + 1),
        };
        println!("{:e}", net.eval(&x)?);
    }
    Ok(())
}

fn sweep(config: &Path, out_dir: Option<PathBuf>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config).with_context(|| format!("reading {}", config.display()))?;
    if let Some(d) = out_dir {
        cfg.output_dir = d;
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let csv_path = cfg.output_dir.join("results.csv");
    let existing = if csv_path.exists() { Some(ResultTable::load(&csv_path)?) } else { None };
    if let Some(t) = &existing {
        eprintln!("resuming with {} existing rows", t.len());
    }
    let mut file = OpenOptions::new().create(true).append(true).open(&csv_path)?;
    if existing.is_none() {
        writeln!(file, "{}", CSV_HEADER.join(","))?;
    }
    let log = Mutex::new(file);
    let table = run_sweep_with(&cfg, existing.as_ref(), &|row| {
        eprintln!("{} {} x={} sigma={} trial={} metric={:e} ({:.1}s)", row.mode.as_str(), row.target, row.x, row.sigma, row.trial, row.metric, row.seconds);
        if let Ok(mut f) = log.lock() {
            let _ = writeln!(f, "{}", row.csv_record().join(","));
        }
    })?;
    drop(log);
    fs::write(cfg.output_dir.join("config.json"), cfg.to_json()?)?;
    for p in emit_outputs(&table, &cfg.output_dir, OutputFormats::default())? {
        eprintln!("wrote {}", p.display());
    }
    print!("{}", fs::read_to_string(cfg.output_dir.join("summary.txt"))?);
    Ok(())
}
