use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use repdiff::builders::NormalizationKind;
use repdiff::ingest::{load_representation_set, parse_interactions};
use repdiff::pipeline::{self, Evaluation, RepresentationKind, RunConfig};
use repdiff::report::{self, Document, Format};
use repdiff::synth::{generate_cohort, SynthConfig};
use repdiff::verification::PairsPerLearner;
use repdiff::{Error, Result, SignatureSchema};

#[derive(Parser)]
#[command(
    name = "repdiff",
    version,
    about = "Differentiation metrics for learner representations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one or both representations over an interaction log or a vector CSV.
    Eval(EvalArgs),
    /// Write a seeded synthetic cohort as JSON lines.
    Synth(SynthArgs),
    /// Compare two reports over the same cohort.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RepresentationArg {
    Interaction,
    Learner,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizeArg {
    None,
    Minmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Markdown,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Markdown => Format::Markdown,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Interaction log (JSON lines), or a `.csv` vector set.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    representation: RepresentationArg,
    /// Signature schema JSON.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, value_enum)]
    normalize: Option<NormalizeArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Same-learner pairs per learner: `all` or a count.
    #[arg(long, default_value = "all")]
    pairs: PairsPerLearner,
    #[arg(long, default_value_t = 2)]
    min_interactions: usize,
    /// Grid step for a neighbor-count sweep.
    #[arg(long)]
    tau_sweep: Option<f64>,
    #[arg(long, default_value_t = repdiff::clustering::DEFAULT_N_INIT)]
    n_init: usize,
    #[arg(long, default_value_t = repdiff::clustering::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long)]
    export_distances: Option<PathBuf>,
    #[arg(long)]
    export_partition: Option<PathBuf>,
    #[arg(long)]
    export_pairs: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    report_a: PathBuf,
    report_b: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `a.csv` becomes `a.interaction-level.csv` when several evaluations share one export path.
fn export_path(path: &Path, label: &str, many: bool) -> PathBuf {
    if !many {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("export");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{label}.{ext}"),
        None => format!("{stem}.{label}"),
    };
    path.with_file_name(name)
}

fn export(evals: &[Evaluation], args: &EvalArgs) -> Result<()> {
    let many = evals.len() > 1;
    for eval in evals {
        let label = eval.report.label.as_str();
        if let Some(path) = &args.export_distances {
            let file = File::create(export_path(path, label, many))?;
            eval.distances.write_csv(BufWriter::new(file))?;
        }
        if let Some(path) = &args.export_partition {
            let file = File::create(export_path(path, label, many))?;
            eval.partition.write_csv(BufWriter::new(file))?;
        }
        if let (Some(path), Some((pairs, instances))) = (&args.export_pairs, &eval.pairs) {
            let file = File::create(export_path(path, label, many))?;
            pairs.write_csv(instances, BufWriter::new(file))?;
        }
    }
    Ok(())
}

fn run_config(args: &EvalArgs) -> Result<RunConfig> {
    let schema = match &args.schema {
        Some(path) => Some(SignatureSchema::from_json(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    Ok(RunConfig {
        representation: match args.representation {
            RepresentationArg::Interaction => RepresentationKind::Interaction,
            RepresentationArg::Learner => RepresentationKind::Learner,
            RepresentationArg::Both => RepresentationKind::Both,
        },
        schema,
        normalization: args.normalize.map(|n| match n {
            NormalizeArg::None => NormalizationKind::None,
            NormalizeArg::Minmax => NormalizationKind::MinMaxPerDimension,
        }),
        k: args.k,
        seed: args.seed,
        pairs: args.pairs,
        min_interactions: args.min_interactions,
        tau_sweep: args.tau_sweep,
        n_init: args.n_init,
        max_iter: args.max_iter,
    })
}

fn eval(args: &EvalArgs) -> Result<()> {
    let config = run_config(args)?;
    let is_csv = args
        .input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let file = BufReader::new(File::open(&args.input)?);
    let (evals, doc) = if is_csv {
        let set = load_representation_set(file, "custom")?;
        let set = match config.normalization {
            Some(NormalizationKind::MinMaxPerDimension) => repdiff::builders::apply_normalization(
                &set,
                repdiff::builders::NormalizationSpec::MIN_MAX,
            )?,
            _ => set,
        };
        let mut eval = pipeline::evaluate(&set, None, &config)?;
        eval.report.normalization = config.normalization;
        let doc = Document::Report(eval.report.clone());
        (vec![eval], doc)
    } else {
        let records = parse_interactions(file)?;
        let output = pipeline::run(records, &config)?;
        for exclusion in &output.summary.excluded_learners {
            eprintln!(
                "excluded {}: {}",
                exclusion.learner,
                serde_json::to_string(&exclusion.reason)?
            );
        }
        let doc = output.document();
        (output.evaluations, doc)
    };
    export(&evals, args)?;
    write_output(
        args.out.as_deref(),
        &report::render(&doc, args.format.into()),
    )
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut config: SynthConfig = serde_json::from_str(&std::fs::read_to_string(&args.config)?)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let records = generate_cohort(&config)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    repdiff::ingest::write_interactions(&records, &mut out)?;
    out.flush()?;
    Ok(())
}

fn load_report(path: &Path) -> Result<repdiff::EvaluationReport> {
    match Document::from_json(&std::fs::read_to_string(path)?)? {
        Document::Report(r) => Ok(r),
        Document::Batch { mut reports, .. } if reports.len() == 1 => Ok(reports.remove(0)),
        _ => Err(Error::InvalidConfig(format!(
            "{} does not hold exactly one report",
            path.display()
        ))),
    }
}

fn compare(args: &CompareArgs) -> Result<()> {
    let a = load_report(&args.report_a)?;
    let b = load_report(&args.report_b)?;
    let table = report::compare(&a, &b)?;
    let text = report::render(&Document::Comparison(table), args.format.into());
    write_output(args.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Eval(args) => eval(args),
        Command::Synth(args) => synth(args),
        Command::Compare(args) => compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_degenerate() { 2 } else { 1 })
        }
    }
}
