//! `krp`: generate test tensors, run the compression algorithms, solve
//! sample-size bounds, and emit CSV/JSON run reports.
//!
//! Exit codes: 0 success, 2 usage error, 3 I/O error, 4 numerical
//! failure or infeasibility.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use krp::apps::era::{era_identify, simulate_markov, EraMethod, MarkovSequence};
use krp::apps::hadamard::{hadamard_dense, hadamard_recompress};
use krp::apps::sensors::{reconstruct_field, sample_field, train_sensors, Compressor};
use krp::apps::cauchy_tensor;
use krp::bounds::{self, BoundParams, BoundVariant, SampleSize};
use krp::flops;
use krp::sketch::{Distribution, RngLedger, SketchConfig};
use krp::tensor::{DenseMatrix, DenseTensor};
use krp::tucker::{self, RankSpec, TuckerTensor};
use krp_cli::io;
use krp_cli::report::{fmt17, RunReport};

struct CliError {
    code: i32,
    msg: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }

    fn numerical(msg: impl Into<String>) -> Self {
        Self { code: 4, msg: msg.into() }
    }
}

impl From<krp::Error> for CliError {
    fn from(e: krp::Error) -> Self {
        let code = match e {
            krp::Error::Invalid(_) | krp::Error::ModeOutOfRange { .. } => 2,
            krp::Error::CapExceeded(_) | krp::Error::Numerical(_) => 4,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self { code: 3, msg: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "krp", version, about = "Khatri-Rao random projection compression toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct CompressArgs {
    /// Input KTEN tensor.
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated ranks, one per mode; a single value broadcasts.
    #[arg(long)]
    ranks: String,
    #[arg(long, default_value_t = 0)]
    oversample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sketch entry distribution: gaussian or rademacher.
    #[arg(long, default_value = "gaussian")]
    dist: String,
    /// Optional KTUK output for the decomposition.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV report path (JSON sidecar alongside).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a Cauchy test tensor as KTEN.
    GenCauchy {
        /// Uniform mode size (with --d); alternative to --dims.
        #[arg(long)]
        n: Option<usize>,
        /// Tensor order (with --n).
        #[arg(long)]
        d: Option<usize>,
        /// Comma-separated mode sizes; alternative to --n/--d.
        #[arg(long)]
        dims: Option<String>,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deterministic HOSVD.
    Hosvd(CompressArgs),
    /// Deterministic sequentially truncated HOSVD.
    Sthosvd(CompressArgs),
    /// Randomized HOSVD with fresh KRP sketches.
    RhosvdKrp(CompressArgs),
    /// Randomized HOSVD with one memoized KRP factor pool.
    RhosvdKrpMemo(CompressArgs),
    /// Randomized STHOSVD with KRP sketches.
    RsthosvdKrp(CompressArgs),
    /// Randomized HOSVD with dense Gaussian sketches.
    RhosvdGauss(CompressArgs),
    /// Randomized STHOSVD with dense Gaussian sketches.
    RsthosvdGauss(CompressArgs),
    /// Identify a state-space system from Markov parameters (KTEN of
    /// shape m x n x 2s) via a block-Hankel SVD.
    Era {
        #[arg(long = "markov-in")]
        markov_in: PathBuf,
        /// Target system order.
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 0)]
        oversample: usize,
        /// krp-single-view, gaussian-single-view, or dense-svd.
        #[arg(long, default_value = "krp-single-view")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sensor placement: train a model or reconstruct a field.
    Sensors {
        #[command(subcommand)]
        cmd: SensorsCmd,
    },
    /// Recompress the Hadamard product of two KTUK Tucker tensors.
    HadamardRecompress {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        ranks: String,
        #[arg(long, default_value_t = 0)]
        oversample: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve a sample-size inequality; exits 4 when the cap binds.
    Bounds {
        /// rrf, rrf-q, hosvd, sthosvd, subspace, subspace-n,
        /// appendix-a, or single-view.
        #[arg(long)]
        variant: String,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        d: Option<usize>,
        /// Uniform mode size (with --d); alternative to --dims.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        dims: Option<String>,
        /// Row count of the target matrix (defaults to the column
        /// count).
        #[arg(long)]
        m_rows: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Subgaussian norm bound K (uncalibrated, default 1).
        #[arg(long = "K", default_value_t = 1.0)]
        k_sub: f64,
        /// Absolute constant C_S (uncalibrated, default 1).
        #[arg(long = "Cs", default_value_t = 1.0)]
        c_s: f64,
        /// Mode index for the hosvd/sthosvd variants.
        #[arg(long, default_value_t = 0)]
        mode: usize,
    },
    /// Monte-Carlo check of the subspace-embedding property.
    EmbedCheck {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        dims: String,
        #[arg(long)]
        ell: usize,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum SensorsCmd {
    /// Train sensor locations and interpolation factors from a snapshot
    /// tensor (last mode is time).
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        /// Ranks for the spatial modes; a single value broadcasts.
        #[arg(long)]
        ranks: String,
        /// hosvd, sthosvd, rhosvd-krp, rhosvd-krp-memo, rsthosvd-krp,
        /// rhosvd-gauss, or rsthosvd-gauss.
        #[arg(long, default_value = "rsthosvd-krp")]
        compressor: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sample a field at the trained sensors and reconstruct it.
    Reconstruct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Optional KTEN output for the reconstruction.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("bad {what} entry {tok:?}")))
        })
        .collect()
}

/// Comma-separated list with single-value broadcast to `count` modes.
fn parse_ranks(s: &str, count: usize, what: &str) -> CliResult<Vec<usize>> {
    let vals = parse_list(s, what)?;
    if vals.len() == count {
        Ok(vals)
    } else if vals.len() == 1 {
        Ok(vec![vals[0]; count])
    } else {
        Err(CliError::usage(format!(
            "need 1 or {count} {what} entries, got {}",
            vals.len()
        )))
    }
}

fn parse_dims(n: Option<usize>, d: Option<usize>, dims: Option<&str>) -> CliResult<Vec<usize>> {
    match (dims, n, d) {
        (Some(s), None, None) => parse_list(s, "dims"),
        (None, Some(n), Some(d)) if n > 0 && d > 0 => Ok(vec![n; d]),
        _ => Err(CliError::usage("give either --dims or both --n and --d")),
    }
}

fn parse_dist(s: &str) -> CliResult<Distribution> {
    match s {
        "gaussian" => Ok(Distribution::Gaussian),
        "rademacher" => Ok(Distribution::Rademacher),
        _ => Err(CliError::usage(format!("unknown distribution {s:?}"))),
    }
}

fn emit_report(report: &RunReport, path: Option<&Path>) -> CliResult<()> {
    report.validate().map_err(CliError::numerical)?;
    println!("{}", RunReport::csv_header());
    println!("{}", report.csv_row());
    if let Some(p) = path {
        report.write(p)?;
    }
    Ok(())
}

fn run_compress(name: &str, args: &CompressArgs) -> CliResult<()> {
    let x = io::read_tensor(&args.input)?;
    let ranks = parse_ranks(&args.ranks, x.order(), "ranks")?;
    let cfg = SketchConfig::new(args.seed).with_distribution(parse_dist(&args.dist)?);
    let ledger = RngLedger::new();
    let spec = RankSpec::new(&ranks, args.oversample)?;
    flops::reset();
    let start = Instant::now();
    let t: TuckerTensor = match name {
        "hosvd" => tucker::hosvd(&x, &ranks)?,
        "sthosvd" => tucker::sthosvd(&x, &ranks, None)?,
        "rhosvd-krp" => tucker::rhosvd_krp(&x, &spec, &cfg, &ledger, false)?,
        "rhosvd-krp-memo" => tucker::rhosvd_krp(&x, &spec, &cfg, &ledger, true)?,
        "rsthosvd-krp" => tucker::rsthosvd_krp(&x, &spec, &cfg, &ledger)?,
        "rhosvd-gauss" => tucker::rhosvd_gaussian(&x, &spec, &cfg, &ledger)?,
        "rsthosvd-gauss" => tucker::rsthosvd_gaussian(&x, &spec, &cfg, &ledger)?,
        _ => unreachable!("unmapped algorithm {name}"),
    };
    let rel_error = tucker::tucker_error(&x, &t)?;
    let elapsed_s = start.elapsed().as_secs_f64();
    if let Some(out) = &args.out {
        io::write_tucker(out, &t)?;
    }
    let report = RunReport {
        algorithm: name.to_string(),
        dims: x.dims().to_vec(),
        ranks,
        oversample: args.oversample,
        seed: args.seed,
        rel_error,
        flops: flops::total(),
        rng_scalars: ledger.total(),
        elapsed_s,
    };
    emit_report(&report, args.report.as_deref())
}

/// Markov blocks from a KTEN of shape `m x n x t`: block `k` is the
/// slice at third index `k`.
fn markov_from_tensor(x: &DenseTensor) -> CliResult<MarkovSequence> {
    if x.order() != 3 {
        return Err(CliError::usage(format!(
            "markov input must have order 3 (m x n x blocks), got order {}",
            x.order()
        )));
    }
    let (m, n, t) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let blocks: Vec<DenseMatrix> = (0..t)
        .map(|k| {
            let mut b = DenseMatrix::zeros(m, n);
            for j in 0..n {
                for i in 0..m {
                    b.set(i, j, x.get(&[i, j, k]));
                }
            }
            b
        })
        .collect();
    Ok(MarkovSequence::new(blocks)?)
}

fn run_era(
    markov_in: &Path,
    r: usize,
    oversample: usize,
    method: &str,
    seed: u64,
    report: Option<&Path>,
) -> CliResult<()> {
    let x = io::read_tensor(markov_in)?;
    let seq = markov_from_tensor(&x)?;
    let method_enum = match method {
        "krp-single-view" => EraMethod::KrpSingleView,
        "gaussian-single-view" => EraMethod::GaussianSingleView,
        "dense-svd" => EraMethod::DenseSvd,
        _ => return Err(CliError::usage(format!("unknown era method {method:?}"))),
    };
    let cfg = SketchConfig::new(seed);
    let ledger = RngLedger::new();
    flops::reset();
    let start = Instant::now();
    let sys = era_identify(&seq, r, oversample, method_enum, &cfg, &ledger)?;
    // Residual of the re-simulated Markov parameters over the horizon.
    let sim = simulate_markov(&sys.a, &sys.b, &sys.c, &sys.d, seq.horizon())?;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (got, want) in sim.blocks().iter().zip(seq.blocks()) {
        num += got.sub(want).fro_norm().powi(2);
        den += want.fro_norm().powi(2);
    }
    let rel_error = (num / den).sqrt();
    let elapsed_s = start.elapsed().as_secs_f64();
    if sys.order_warning {
        eprintln!("warning: requested order {r} likely exceeds the system order");
    }
    let rep = RunReport {
        algorithm: format!("era-{method}"),
        dims: x.dims().to_vec(),
        ranks: vec![r],
        oversample,
        seed,
        rel_error,
        flops: flops::total(),
        rng_scalars: ledger.total(),
        elapsed_s,
    };
    emit_report(&rep, report)
}

fn parse_compressor(s: &str) -> CliResult<Compressor> {
    Ok(match s {
        "hosvd" => Compressor::Hosvd,
        "sthosvd" => Compressor::Sthosvd,
        "rhosvd-krp" => Compressor::RhosvdKrp { memoize: false },
        "rhosvd-krp-memo" => Compressor::RhosvdKrp { memoize: true },
        "rsthosvd-krp" => Compressor::RsthosvdKrp,
        "rhosvd-gauss" => Compressor::RhosvdGaussian,
        "rsthosvd-gauss" => Compressor::RsthosvdGaussian,
        _ => return Err(CliError::usage(format!("unknown compressor {s:?}"))),
    })
}

fn run_sensors(cmd: &SensorsCmd) -> CliResult<()> {
    match cmd {
        SensorsCmd::Train { input, ranks, compressor, seed, model_out, report } => {
            let x = io::read_tensor(input)?;
            if x.order() < 2 {
                return Err(CliError::usage("snapshot tensor needs at least 2 modes"));
            }
            let spatial = x.order() - 1;
            let ranks = parse_ranks(ranks, spatial, "ranks")?;
            let comp = parse_compressor(compressor)?;
            let cfg = SketchConfig::new(*seed);
            let ledger = RngLedger::new();
            flops::reset();
            let start = Instant::now();
            let model = train_sensors(&x, &ranks, comp, &cfg, &ledger)?;
            // Training residual: sample the snapshots at the sensors
            // and reconstruct.
            let rec = reconstruct_field(&model, &sample_field(&model, &x)?)?;
            let rel_error = x.sub(&rec).fro_norm() / x.fro_norm();
            let elapsed_s = start.elapsed().as_secs_f64();
            io::write_sensor_model(model_out, &model)?;
            let rep = RunReport {
                algorithm: format!("sensors-train-{compressor}"),
                dims: x.dims().to_vec(),
                ranks,
                oversample: 0,
                seed: *seed,
                rel_error,
                flops: flops::total(),
                rng_scalars: ledger.total(),
                elapsed_s,
            };
            emit_report(&rep, report.as_deref())
        }
        SensorsCmd::Reconstruct { model, input, out, report } => {
            let m = io::read_sensor_model(model)?;
            let x = io::read_tensor(input)?;
            flops::reset();
            let start = Instant::now();
            let rec = reconstruct_field(&m, &sample_field(&m, &x)?)?;
            let rel_error = x.sub(&rec).fro_norm() / x.fro_norm();
            let elapsed_s = start.elapsed().as_secs_f64();
            if let Some(p) = out {
                io::write_tensor(p, &rec)?;
            }
            let rep = RunReport {
                algorithm: "sensors-reconstruct".to_string(),
                dims: x.dims().to_vec(),
                ranks: m.sensor_counts(),
                oversample: 0,
                seed: 0,
                rel_error,
                flops: flops::total(),
                rng_scalars: 0,
                elapsed_s,
            };
            emit_report(&rep, report.as_deref())
        }
    }
}

fn run_hadamard(
    x_path: &Path,
    y_path: &Path,
    ranks: &str,
    oversample: usize,
    seed: u64,
    out: Option<&Path>,
    report: Option<&Path>,
) -> CliResult<()> {
    let x = io::read_tucker(x_path)?;
    let y = io::read_tucker(y_path)?;
    let ranks = parse_ranks(ranks, 3, "ranks")?;
    let cfg = SketchConfig::new(seed);
    let ledger = RngLedger::new();
    flops::reset();
    let start = Instant::now();
    let z = hadamard_recompress(&x, &y, &ranks, oversample, &cfg, &ledger)?;
    let dense = hadamard_dense(&x, &y)?;
    let rel_error = dense.sub(&z.reconstruct()?).fro_norm() / dense.fro_norm();
    let elapsed_s = start.elapsed().as_secs_f64();
    if let Some(p) = out {
        io::write_tucker(p, &z)?;
    }
    let rep = RunReport {
        algorithm: "hadamard-recompress".to_string(),
        dims: x.dims().to_vec(),
        ranks,
        oversample,
        seed,
        rel_error,
        flops: flops::total(),
        rng_scalars: ledger.total(),
        elapsed_s,
    };
    emit_report(&rep, report)
}

#[allow(clippy::too_many_arguments)]
fn run_bounds(
    variant: &str,
    r: usize,
    d: Option<usize>,
    n: Option<usize>,
    dims: Option<&str>,
    m_rows: Option<usize>,
    delta: f64,
    eps: f64,
    k_sub: f64,
    c_s: f64,
    mode: usize,
) -> CliResult<()> {
    // Without explicit sizes the caps are left unbounded so the pure
    // inequality is solved.
    let dims = match (dims, n, d) {
        (None, None, Some(d)) => vec![1usize << 62; d],
        (dims, n, d) => parse_dims(n, d, dims)?,
    };
    let n_cols = dims.iter().fold(1usize, |acc, &v| acc.saturating_mul(v));
    let p = BoundParams::new(r, &dims, m_rows.unwrap_or(n_cols), delta)?
        .with_epsilon(eps)?
        .with_constants(k_sub, c_s)?;
    let v = match variant {
        "rrf" => BoundVariant::Rrf,
        "rrf-q" => BoundVariant::RrfQ,
        "hosvd" => BoundVariant::Hosvd { mode },
        "sthosvd" => BoundVariant::Sthosvd { mode },
        "subspace" => BoundVariant::Subspace,
        "subspace-n" => BoundVariant::SubspaceN,
        "appendix-a" => BoundVariant::AppendixA,
        "single-view" => BoundVariant::SingleView,
        _ => return Err(CliError::usage(format!("unknown bound variant {variant:?}"))),
    };
    eprintln!("note: constants K = {k_sub}, C_S = {c_s} are uncalibrated; treat ell as an envelope");
    match bounds::solve_sample_size(&p, v)? {
        SampleSize::Feasible { ell, ell_left } => {
            println!("ell = {ell}");
            if let Some(ll) = ell_left {
                println!("ell_left = {ll}");
            }
            Ok(())
        }
        SampleSize::Infeasible { required, cap } => Err(CliError::numerical(format!(
            "infeasible: required ell {required} exceeds cap {cap}"
        ))),
    }
}

fn run_embed_check(
    r: usize,
    dims: &str,
    ell: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> CliResult<()> {
    let dims = parse_list(dims, "dims")?;
    let ledger = RngLedger::new();
    let freq =
        bounds::embedding_check(r, &dims, ell, eps, trials, &SketchConfig::new(seed), &ledger)?;
    println!("frequency = {}", fmt17(freq));
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.cmd {
        Cmd::GenCauchy { n, d, dims, alpha, out } => {
            let dims = parse_dims(*n, *d, dims.as_deref())?;
            let x = cauchy_tensor(&dims, *alpha)?;
            io::write_tensor(out, &x)?;
            Ok(())
        }
        Cmd::Hosvd(a) => run_compress("hosvd", a),
        Cmd::Sthosvd(a) => run_compress("sthosvd", a),
        Cmd::RhosvdKrp(a) => run_compress("rhosvd-krp", a),
        Cmd::RhosvdKrpMemo(a) => run_compress("rhosvd-krp-memo", a),
        Cmd::RsthosvdKrp(a) => run_compress("rsthosvd-krp", a),
        Cmd::RhosvdGauss(a) => run_compress("rhosvd-gauss", a),
        Cmd::RsthosvdGauss(a) => run_compress("rsthosvd-gauss", a),
        Cmd::Era { markov_in, r, oversample, method, seed, report } => {
            run_era(markov_in, *r, *oversample, method, *seed, report.as_deref())
        }
        Cmd::Sensors { cmd } => run_sensors(cmd),
        Cmd::HadamardRecompress { x, y, ranks, oversample, seed, out, report } => {
            run_hadamard(x, y, ranks, *oversample, *seed, out.as_deref(), report.as_deref())
        }
        Cmd::Bounds { variant, r, d, n, dims, m_rows, delta, eps, k_sub, c_s, mode } => run_bounds(
            variant,
            *r,
            *d,
            *n,
            dims.as_deref(),
            *m_rows,
            *delta,
            *eps,
            *k_sub,
            *c_s,
            *mode,
        ),
        Cmd::EmbedCheck { r, dims, ell, eps, trials, seed } => {
            run_embed_check(*r, dims, *ell, *eps, *trials, *seed)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.msg);
        std::process::exit(e.code);
    }
}
