use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gplvm::commands::{self, metrics_text};
use gplvm::config::{Convention, KernelChoice, ProblemConfig};
use gplvm::dataset::kernel_from_name;
use gplvm::document::{Command, ResultDocument};
use gplvm::{CliError, Result};
use gplvm_core::{GenConfig, NoiseScale};

/// Latent variable embedding with evidence-based choice of latent dimension
/// and kernel.
#[derive(Parser)]
#[command(name = "gplvm", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the circles-and-lines dataset projected to `d` dimensions.
    ///
    /// Writes the raw observations as headerless CSV and, unless
    /// `--no-truth` is given, a `.truth.json` sidecar with the true latents,
    /// their group labels and the generator settings.
    Synth(SynthArgs),
    /// Fit one candidate (fixed q and kernel per source).
    Fit(RunArgs),
    /// Score a grid of latent dimensions and kernels and print the curves.
    Select(RunArgs),
    /// Error measures of recovered latents against a truth sidecar.
    Metrics(MetricsArgs),
    /// Repeat the run recorded in a result document and compare scores.
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKernel {
    Linear,
    Poly,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    /// `--beta` is the noise variance.
    Variance,
    /// `--beta` is the noise precision.
    Precision,
}

#[derive(Args)]
struct SynthArgs {
    /// Observed dimension.
    #[arg(long)]
    d: usize,
    /// Noise level, see `--noise-scale`.
    #[arg(long)]
    beta: f64,
    #[arg(long, value_enum, default_value = "linear")]
    kernel: GenKernel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "variance")]
    noise_scale: NoiseArg,
    /// Data file to write.
    #[arg(long, short, default_value = "synth.csv")]
    output: PathBuf,
    /// Skip the truth sidecar.
    #[arg(long)]
    no_truth: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    Poly,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Laplace,
    Literal,
}

#[derive(Args)]
struct RunArgs {
    /// TOML problem configuration.
    config: PathBuf,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    threads: Option<usize>,
    /// Base seed of the random restarts [config default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Restarts of each latent search [config default: 10 with a
    /// polynomial kernel, 3 otherwise].
    #[arg(long)]
    restarts: Option<usize>,
    /// Weight each source by d_total / d_s.
    #[arg(long)]
    rescale: bool,
    /// Use the columns as given instead of centring and scaling them.
    #[arg(long)]
    no_normalize: bool,
    /// Single latent dimension.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    q_min: Option<usize>,
    #[arg(long)]
    q_max: Option<usize>,
    /// Kernel for every source, replacing the configured ones.
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// Constant terms of the evidence [config default: laplace].
    #[arg(long, value_enum)]
    convention: Option<ConventionArg>,
    /// Re-optimize all precisions jointly after a multi-source fit.
    #[arg(long)]
    alternate: bool,
    /// Result document [default: <config>.result.json].
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write the curve blocks to this file.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Recovered latents: CSV, or a result document (`.json`).
    recovered: PathBuf,
    /// Truth sidecar written by `synth`.
    truth: PathBuf,
    /// Report file [default: <recovered>.metrics.json].
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RerunArgs {
    document: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Where to write the repeated document.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth(a) => synth(a),
        Cmd::Fit(a) => run(a, Command::Fit),
        Cmd::Select(a) => run(a, Command::Select),
        Cmd::Metrics(a) => metrics(a),
        Cmd::Rerun(a) => rerun(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let kernel = match a.kernel {
        GenKernel::Linear => "linear",
        GenKernel::Poly => "poly",
    };
    let gen = GenConfig {
        d: a.d,
        kernel: kernel_from_name(kernel).expect("known kernel"),
        beta: a.beta,
        noise_scale: match a.noise_scale {
            NoiseArg::Variance => NoiseScale::Variance,
            NoiseArg::Precision => NoiseScale::Precision,
        },
        seed: a.seed,
    };
    let written = commands::synth(&a.output, &gen, !a.no_truth)?;
    let (n, d) = written.projection.raw.shape();
    println!("wrote {n}x{d} observations to {}", written.data.display());
    if let Some(t) = written.truth {
        println!("wrote truth sidecar to {}", t.display());
    }
    Ok(())
}

fn apply_overrides(cfg: &mut ProblemConfig, a: &RunArgs) {
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.restarts.is_some() {
        cfg.restarts = a.restarts;
    }
    cfg.rescale |= a.rescale;
    cfg.alternate |= a.alternate;
    if a.no_normalize {
        cfg.normalize = false;
    }
    if a.q.is_some() || a.q_min.is_some() || a.q_max.is_some() {
        cfg.q = a.q;
        cfg.q_min = a.q_min;
        cfg.q_max = a.q_max;
    }
    if let Some(k) = a.kernel {
        let k = match k {
            KernelArg::Linear => KernelChoice::Linear,
            KernelArg::Poly => KernelChoice::Poly,
            KernelArg::Both => KernelChoice::Both,
        };
        for s in &mut cfg.sources {
            s.kernel = k;
        }
    }
    if let Some(c) = a.convention {
        cfg.convention = match c {
            ConventionArg::Laplace => Convention::Laplace,
            ConventionArg::Literal => Convention::Literal,
        };
    }
    if let Some(o) = &a.output {
        cfg.output = Some(o.clone());
    }
}

fn default_output(config: &Path) -> PathBuf {
    config.with_extension("result.json")
}

fn run(a: RunArgs, command: Command) -> Result<()> {
    let mut cfg = ProblemConfig::load(&a.config)?;
    apply_overrides(&mut cfg, &a);
    cfg.validate()
        .map_err(|(key, msg)| CliError::config(&a.config, format!("`{key}`: {msg}")))?;
    let output = cfg.output.clone().unwrap_or_else(|| default_output(&a.config));
    cfg.output = Some(output.clone());
    let doc = commands::run(&cfg, command, a.threads)?;
    doc.write(&output)?;
    report(&doc, command);
    if let Some(path) = &a.curves {
        std::fs::write(path, doc.curves_text()).map_err(|e| CliError::io(path, e))?;
    }
    println!("result document: {}", output.display());
    Ok(())
}

fn report(doc: &ResultDocument, command: Command) {
    if command == Command::Select {
        print!("{}", doc.curves_text());
        println!();
    }
    for c in doc.candidates.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "warning: q={} {} failed: {}",
            c.q,
            c.label,
            c.error.as_deref().unwrap_or("")
        );
    }
    if let Some(best) = &doc.best {
        let betas: Vec<String> = best.betas.iter().map(|b| format!("{b:.6}")).collect();
        println!(
            "best: q={} kernel={} score={} beta=[{}]",
            best.q,
            best.label,
            best.score,
            betas.join(", ")
        );
        if !best.degenerate_rows.is_empty() {
            println!("gauge degenerate rows: {:?}", best.degenerate_rows);
        }
        if let Some(e) = &best.errors {
            println!(
                "errors: radial {:.6e} angular {:.6e} linear {:.6e}",
                e.radial.absolute, e.angular.absolute, e.linear
            );
        }
        if let Some(why) = &best.errors_unavailable {
            println!("errors unavailable: {why}");
        }
    }
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let r = commands::metrics(&a.recovered, &a.truth)?;
    print!("{}", metrics_text(&r));
    let out = a
        .output
        .unwrap_or_else(|| a.recovered.with_extension("metrics.json"));
    let doc = serde_json::json!({
        "format_version": gplvm::FORMAT_VERSION,
        "recovered": a.recovered,
        "truth": a.truth,
        "radial": { "absolute": r.radial.absolute, "signed": r.radial.signed },
        "angular": { "absolute": r.angular.absolute, "signed": r.angular.signed },
        "linear": r.linear,
    });
    let text = serde_json::to_string_pretty(&doc).expect("report serializes");
    std::fs::write(&out, text + "\n").map_err(|e| CliError::io(&out, e))
}

fn rerun(a: RerunArgs) -> Result<()> {
    let r = commands::rerun(&a.document, a.threads)?;
    println!(
        "reproduced {} scores (max difference {:e})",
        r.repeated.candidates.len(),
        r.max_difference
    );
    if let Some(out) = &a.output {
        r.repeated.write(out)?;
    }
    Ok(())
}
