//! `subspace`: fit, apply and evaluate class-contrastive subspaces of
//! embedding sets stored as EMB1/PSS1 files.
//!
//! Exit codes: 0 success, 1 I/O or format error, 2 numeric failure,
//! 3 usage error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::json;

use tangent_subspace::io::{self, Dtype, EmbeddingFile};
use tangent_subspace::linalg;
use tangent_subspace::metrics::{self, ZeroShotOptions};
use tangent_subspace::projection::{self, Part};
use tangent_subspace::solver::{self, ContrastOptions, PcaTarget};
use tangent_subspace::sphere::{self, MeanParams};
use tangent_subspace::synth::{self, PlantedConfig};
use tangent_subspace::{Error, ErrorKind, Exec, FitParams, Geometry, LabeledEmbeddingSet, Subspace, Weighting};

/// Environment variable that caps the worker thread count.
const THREADS_VAR: &str = "SUBSPACE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "subspace", version, about = "Class-contrastive tangent-space subspaces on the hypersphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Intrinsic mean of every embedding in a file.
    Mean(MeanArgs),
    /// Fit the subspace of one class (or of a theme file) and write it as PSS1.
    Fit(FitArgs),
    /// Project every embedding onto a subspace or its complement.
    Project(ProjectArgs),
    /// Mean squared projected norm of each class in each subspace.
    Invariance(InvarianceArgs),
    /// Zero-shot classification by cosine similarity to label embeddings.
    Classify(ClassifyArgs),
    /// Write a synthetic fixture with planted per-class subspaces.
    GenSynth(GenSynthArgs),
    /// Fit several methods on the same data and compare them.
    Compare(CompareArgs),
    /// Drop words that appear in more than one word list.
    Dedupe(DedupeArgs),
}

#[derive(Args, Debug)]
struct MeanArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Class to fit.
    #[arg(long, required_unless_present = "theme", conflicts_with = "theme")]
    target: Option<String>,
    /// EMB1 file of theme embeddings; every class of --input is a negative.
    #[arg(long)]
    theme: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 500)]
    k: usize,
    #[arg(long, value_enum, default_value_t = GeometryArg::Sphere)]
    geometry: GeometryArg,
    /// Euclidean only: skip mean subtraction.
    #[arg(long)]
    no_center: bool,
    /// Drop the per-class 1/n factors.
    #[arg(long)]
    unweighted: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long)]
    subspace: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    complement: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct InvarianceArgs {
    #[arg(long, required = true, num_args = 1..)]
    subspaces: Vec<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    row_normalize: bool,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long)]
    images: PathBuf,
    /// Labeled EMB1 file with one embedding per label; names come from each
    /// row's class.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    subspace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    /// Also emit softmax probabilities per image.
    #[arg(long)]
    softmax: bool,
}

#[derive(Args, Debug)]
struct GenSynthArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    planted_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// EMB1 output; planted bases go to `<stem>.<class>.pss1` alongside.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_value = "ours,pca,pga,fkt,fda")]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = GeometryArg::Sphere)]
    geometry: GeometryArg,
}

#[derive(Args, Debug)]
struct DedupeArgs {
    /// One word per line; the file stem names the class.
    #[arg(long, required = true, num_args = 1..)]
    lists: Vec<PathBuf>,
    /// Filtered lists are written here under their original file names.
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum GeometryArg {
    Sphere,
    Euclidean,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Sphere => Geometry::Sphere,
            GeometryArg::Euclidean => Geometry::Euclidean,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Ours,
    Pca,
    Pga,
    Fkt,
    Fda,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Pca => "pca",
            Method::Pga => "pga",
            Method::Fkt => "fkt",
            Method::Fda => "fda",
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Io => 1,
        ErrorKind::Numeric => 2,
        ErrorKind::Usage => 3,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{THREADS_VAR}={raw:?} is not a thread count")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    if n != 1 {
        warn!("{THREADS_VAR} ignored: built without the parallel feature");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    let exec = Exec::default();
    match command {
        Command::Mean(a) => cmd_mean(a, exec),
        Command::Fit(a) => cmd_fit(a, exec),
        Command::Project(a) => cmd_project(a, exec),
        Command::Invariance(a) => cmd_invariance(a, exec),
        Command::Classify(a) => cmd_classify(a, exec),
        Command::GenSynth(a) => cmd_gen_synth(a),
        Command::Compare(a) => cmd_compare(a, exec),
        Command::Dedupe(a) => cmd_dedupe(a),
    }
}

fn emit(line: &str) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").map_err(|e| Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    })
}

fn cmd_mean(a: MeanArgs, exec: Exec) -> Result<(), Error> {
    if a.tol.is_nan() || a.tol <= 0.0 || a.max_iter == 0 {
        return Err(Error::InvalidArgument("--tol must be positive and --max-iter at least 1".into()));
    }
    let file = io::read_embeddings(&a.input)?;
    let params = MeanParams { tol: a.tol, max_iter: a.max_iter };
    let mu = sphere::intrinsic_mean_columns(&file.points, params, exec)?;
    info!("mean of {} points in d = {}", file.len(), file.dim());
    let d = mu.dim();
    let out = EmbeddingFile::unlabeled(nalgebra::DMatrix::from_column_slice(d, 1, mu.as_slice()), Dtype::F64);
    io::write_embeddings(&out, &a.output)
}

fn cmd_fit(a: FitArgs, exec: Exec) -> Result<(), Error> {
    let set = io::read_labeled(&a.input)?;
    let params = FitParams {
        center: !a.no_center,
        weighting: if a.unweighted { Weighting::Unweighted } else { Weighting::Balanced },
        exec,
        ..FitParams::new(a.lambda, a.k, a.geometry.into())
    };
    let sub = match (&a.target, &a.theme) {
        (Some(target), _) => solver::fit_subspace(&set, target, &params)?,
        (None, Some(theme_path)) => {
            let theme = io::read_embeddings(theme_path)?;
            let name = theme_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "theme".into());
            solver::fit_theme_subspace(&set, &theme.points, &name, &params)?
        }
        (None, None) => return Err(Error::InvalidArgument("one of --target or --theme is required".into())),
    };
    io::write_subspace(&sub, &a.output)?;
    let values = sub.eigenvalues();
    let summary = json!({
        "class_name": sub.class_name(),
        "k": sub.k(),
        "top_eigenvalue": values[0],
        "eigenvalue_sum": values.iter().sum::<f64>(),
    });
    emit(&summary.to_string())
}

fn cmd_project(a: ProjectArgs, exec: Exec) -> Result<(), Error> {
    let sub = io::read_subspace(&a.subspace)?;
    let mut file = io::read_embeddings(&a.input)?;
    let part = if a.complement { Part::Complement } else { Part::Span };
    file.points = projection::project_columns(&sub, &file.points, part, true, exec)?;
    io::write_embeddings(&file, &a.output)
}

fn read_subspaces(paths: &[PathBuf]) -> Result<Vec<Subspace>, Error> {
    paths.iter().map(io::read_subspace).collect()
}

fn cmd_invariance(a: InvarianceArgs, exec: Exec) -> Result<(), Error> {
    let subs = read_subspaces(&a.subspaces)?;
    let set = io::read_labeled(&a.input)?;
    let m = metrics::invariance_matrix_with(&subs, &set, a.row_normalize, exec)?;
    match a.format {
        TableFormat::Csv => {
            let csv = m.to_csv();
            emit(csv.trim_end_matches('\n'))
        }
        TableFormat::Json => emit(&serde_json::to_string(&m).expect("invariance matrix serializes")),
    }
}

fn cmd_classify(a: ClassifyArgs, exec: Exec) -> Result<(), Error> {
    let images = io::read_labeled(&a.images)?;
    let labels = io::read_embeddings(&a.labels)?;
    let names = labels
        .label_names()
        .ok_or_else(|| Error::LabelMismatch(format!("{} carries no label names", a.labels.display())))?;
    let sub = a.subspace.as_ref().map(io::read_subspace).transpose()?;
    let opts = ZeroShotOptions {
        dataset_name: a
            .images
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
        softmax: a.softmax,
        exec,
    };
    let report = metrics::zero_shot_classify_with(&images, &labels.points, &names, sub.as_ref(), &opts)?;
    match a.format {
        ReportFormat::Json => emit(&serde_json::to_string(&report).expect("report serializes")),
    }
}

/// `<dir>/<stem>.<class>.pss1` for the sidecar of `class`.
fn sidecar_path(output: &Path, class: &str) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "synth".into());
    output.with_file_name(format!("{stem}.{class}.pss1"))
}

fn cmd_gen_synth(a: GenSynthArgs) -> Result<(), Error> {
    let cfg = PlantedConfig::new(a.classes, a.n, a.d, a.kappa, a.planted_k, a.seed);
    let data = synth::planted_classes(&cfg)?;
    io::write_embeddings(&EmbeddingFile::from_labeled(&data.set, Dtype::F64), &a.output)?;
    for sub in data.subspaces()? {
        io::write_subspace(&sub, sidecar_path(&a.output, sub.class_name()))?;
    }
    Ok(())
}

fn fit_method(
    method: Method,
    set: &LabeledEmbeddingSet,
    target: &str,
    params: &FitParams,
    base: Option<&sphere::UnitVector>,
) -> Result<Subspace, Error> {
    match method {
        Method::Ours => solver::fit_subspace_at(set, target, params, base),
        Method::Pca => {
            let p = FitParams { geometry: Geometry::Euclidean, ..*params };
            solver::pca_baseline(set, PcaTarget::Class(target), &p)
        }
        Method::Pga => match base {
            Some(mu) => solver::fit_subspace_at(set, target, &FitParams { lambda: 0.0, ..*params }, Some(mu)),
            None => solver::pga_baseline(set, PcaTarget::Class(target), params),
        },
        Method::Fkt => solver::fkt_subspace_at(set, target, params, base),
        Method::Fda => {
            let max = set.classes().len().saturating_sub(1);
            let k = if params.k > max && max > 0 {
                warn!("fda: k = {} exceeds classes - 1 = {max}, using k = {max}", params.k);
                max
            } else {
                params.k
            };
            solver::fda_subspace_at(set, &FitParams { k, ..*params }, base)
        }
    }
}

fn cmd_compare(a: CompareArgs, exec: Exec) -> Result<(), Error> {
    let set = io::read_labeled(&a.input)?;
    set.class_index(&a.target)?;
    if a.methods.contains(&Method::Fkt) && set.classes().len() != 2 {
        return Err(Error::NotTwoClasses(set.classes().len()));
    }
    let geometry: Geometry = a.geometry.into();
    let params = FitParams { exec, ..FitParams::new(a.lambda, a.k, geometry) };
    let base = match geometry {
        Geometry::Sphere => Some(solver::pooled_base_point(&set, None, params.mean, exec)?),
        Geometry::Euclidean => None,
    };
    let contrast = solver::build_contrast_matrix_with(
        &set,
        &a.target,
        a.lambda,
        geometry,
        base.as_ref(),
        ContrastOptions { center: params.center, weighting: params.weighting, exec },
    )?;
    let mut fitted: Vec<(Method, Subspace)> = Vec::new();
    for &m in &a.methods {
        if fitted.iter().any(|(seen, _)| *seen == m) {
            continue;
        }
        fitted.push((m, fit_method(m, &set, &a.target, &params, base.as_ref())?));
    }
    let methods: Vec<_> = fitted
        .iter()
        .map(|(m, s)| {
            json!({
                "method": m.name(),
                "geometry": s.geometry(),
                "k": s.k(),
                "objective": linalg::trace_form(s.basis(), &contrast.matrix),
                "eigenvalues": s.eigenvalues(),
            })
        })
        .collect();
    let mut angles = Vec::new();
    for (i, (ma, sa)) in fitted.iter().enumerate() {
        for (mb, sb) in &fitted[i + 1..] {
            let pa = linalg::principal_angles(sa.basis(), sb.basis());
            angles.push(json!({
                "a": ma.name(),
                "b": mb.name(),
                "max_angle": pa.last().copied().unwrap_or(0.0),
                "angles": pa,
            }));
        }
    }
    let out = json!({
        "target": a.target,
        "lambda": a.lambda,
        "geometry": geometry,
        "methods": methods,
        "principal_angles": angles,
    });
    emit(&out.to_string())
}

fn cmd_dedupe(a: DedupeArgs) -> Result<(), Error> {
    let mut lists = Vec::with_capacity(a.lists.len());
    for p in &a.lists {
        let name = p
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", p.display())))?;
        lists.push((name, io::read_wordlist(p)?));
    }
    fs::create_dir_all(&a.output_dir).map_err(|e| Error::Io { path: a.output_dir.clone(), source: e })?;
    for (name, words) in io::dedupe_wordlists(&lists) {
        let path = a.output_dir.join(&name);
        let mut text = words.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        info!("{}: {} words", name, words.len());
    }
    Ok(())
}
