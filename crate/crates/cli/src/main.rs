//! `caml` command-line front end.

mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use caml::datasets::{two_blobs, write_atomic, write_matrix_csv};
use caml::evaluation::{classification_protocol, curvature_histogram, Histogram};
use caml::localgeom::FitOptions;
use caml::pipeline::run;
use caml::weights::LLE_REG;
use caml::{
    curvature_field, k_sweep, knn_classify, knn_graph, load_csv, npr, save_csv, Algorithm, Bandwidth, CamlError,
    CurvatureMode, DataSet64, GenSpec, ManifoldKind, PipelineConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "caml", version, about = "Curvature-aware manifold learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic surface and write it as CSV.
    Gen(GenArgs),
    /// Write two labeled Gaussian blobs (for the classification protocol).
    Blobs(BlobArgs),
    /// Per-point total squared curvature, optionally with a histogram.
    Curvature(CurvatureArgs),
    /// Embed a CSV point cloud.
    Embed(EmbedArgs),
    /// Neighborhood preserving ratio between two CSV files.
    Eval(EvalArgs),
    /// NPR for several algorithms and K values, averaged over seeds.
    Sweep(SweepArgs),
    /// Nearest-neighbor classification accuracy.
    Classify(ClassifyArgs),
    /// Render CSV output as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    kind: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Kind-specific parameters, comma separated.
    #[arg(long, value_delimiter = ',')]
    params: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BlobArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    per_class: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    #[arg(long, default_value_t = 8.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PatchArgs {
    /// Neighbors per patch.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Intrinsic dimension.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    d: u64,
    /// Fail on rank-deficient quadratic fits instead of regularizing.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct CurvatureArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    patch: PatchArgs,
    /// CSV of `c` followed by the principal curvatures of each normal direction.
    #[arg(long)]
    out: PathBuf,
    /// Also write a histogram CSV with this many bins.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    bins: Option<u64>,
    #[arg(long, requires = "bins")]
    hist_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PointHessian,
    PatchForm,
}

impl From<ModeArg> for CurvatureMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PointHessian => CurvatureMode::PointHessian,
            ModeArg::PatchForm => CurvatureMode::PatchForm,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    patch: PatchArgs,
    /// Heat-kernel bandwidth (default: median edge length).
    #[arg(long)]
    sigma: Option<f64>,
    /// Curvature bandwidth (default: median positive curvature).
    #[arg(long)]
    sigma_c: Option<f64>,
    #[arg(long, value_enum, default_value = "point-hessian")]
    curvature_mode: ModeArg,
    #[arg(long, default_value_t = LLE_REG)]
    lle_reg: f64,
}

impl ModelArgs {
    fn config(&self) -> Result<PipelineConfig<f64>, CamlError> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(CamlError::InvalidInput(format!("--{name} must be positive (got {x})"))),
            Some(x) => Ok(Bandwidth::Fixed(x)),
            None => Ok(Bandwidth::Auto),
        };
        if !(self.lle_reg > 0.0 && self.lle_reg.is_finite()) {
            return Err(CamlError::InvalidInput(format!("--lle-reg must be positive (got {})", self.lle_reg)));
        }
        Ok(PipelineConfig {
            k: self.patch.k as usize,
            d: self.patch.d as usize,
            sigma: positive("sigma", self.sigma)?,
            sigma_c: positive("sigma-c", self.sigma_c)?,
            mode: self.curvature_mode.into(),
            fit: FitOptions {
                allow_ridge: !self.patch.strict,
            },
            lle_reg: self.lle_reg,
        })
    }
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    alg: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    /// Metadata sidecar (default: `<out>.meta.jsonl`).
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Original point cloud.
    #[arg(long)]
    original: PathBuf,
    /// Embedded coordinates (same row order).
    #[arg(long)]
    embedded: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Per-point overlap fractions.
    #[arg(long)]
    per_point_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(2..))]
    n: u64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, value_delimiter = ',')]
    params: Vec<f64>,
    /// Algorithms, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "lep,ca-lep")]
    algs: Vec<String>,
    /// K values: a comma list (`10,20`) or a range `start..end[:step]`
    /// (inclusive, default step 10).
    #[arg(long, default_value = "10..70")]
    ks: String,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Labeled training CSV (with --test), or the full labeled data set
    /// for the split-and-embed protocol (with --alg).
    #[arg(long)]
    train: PathBuf,
    #[arg(long, conflicts_with = "alg")]
    test: Option<PathBuf>,
    /// Embed all points with this algorithm, then classify in the embedding.
    #[arg(long)]
    alg: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Neighbors consulted by the classifier.
    #[arg(long = "neighbors", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    neighbors: u64,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    /// 2-D embedding as a scatter plot.
    Scatter,
    /// Sweep CSV as one polyline per algorithm.
    Sweep,
    /// Histogram CSV as bars.
    Hist,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(value_enum)]
    kind: PlotKind,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    title: Option<String>,
    /// Color scatter points by a column of another CSV (e.g. a latent parameter).
    #[arg(long)]
    color_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0, requires = "color_file")]
    color_column: usize,
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<CamlError> for Failure {
    fn from(e: CamlError) -> Self {
        let code = match e.root() {
            CamlError::InvalidInput(_) | CamlError::UnknownKind(_) | CamlError::Parse { .. } => 2,
            CamlError::Disconnected { .. } | CamlError::IsolatedVertex { .. } => 3,
            CamlError::DegeneratePatch { .. } | CamlError::Numerical(_) => 4,
            CamlError::Io { .. } => 5,
            CamlError::InCell { .. } => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Blobs(a) => cmd_blobs(a),
        Command::Curvature(a) => cmd_curvature(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Plot(a) => cmd_plot(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> CmdResult {
    let Ok(raw) = std::env::var("CAML_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("CAML_THREADS must be a positive integer (got `{raw}`)")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("cannot configure {n} threads: {e}")))
}

fn gen_spec(kind: &str, n: u64, seed: u64, noise: f64, params: Vec<f64>) -> Result<GenSpec, Failure> {
    let kind: ManifoldKind = kind.parse()?;
    let mut spec = GenSpec::new(kind, n as usize, seed).with_noise(noise);
    if !params.is_empty() {
        spec = spec.with_params(params);
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let spec = gen_spec(&a.kind, a.n, a.seed, a.noise, a.params)?;
    let data: DataSet64 = caml::generate(&spec)?;
    save_csv(&data, &a.out)?;
    println!("{} {} {}", data.len(), data.dim(), data.name);
    Ok(())
}

fn cmd_blobs(a: BlobArgs) -> CmdResult {
    let data: DataSet64 = two_blobs(a.per_class as usize, a.dim as usize, a.separation, a.spread, a.seed)?;
    save_csv(&data, &a.out)?;
    println!("{} {} {}", data.len(), data.dim(), data.name);
    Ok(())
}

fn cmd_curvature(a: CurvatureArgs) -> CmdResult {
    let data: DataSet64 = load_csv(&a.input)?;
    let graph = knn_graph(&data, a.patch.k as usize)?;
    let opts = FitOptions {
        allow_ridge: !a.patch.strict,
    };
    let field = curvature_field(&data, &graph, a.patch.d as usize, opts, false)?;
    let cols = 1 + field.principal.first().map_or(0, |p| p.iter().map(|v| v.len()).sum());
    let m = caml::nalgebra::DMatrix::from_fn(field.values.len(), cols, |i, c| {
        if c == 0 {
            field.values[i]
        } else {
            field.principal[i].iter().flat_map(|v| v.iter().copied()).nth(c - 1).unwrap()
        }
    });
    write_matrix_csv(&a.out, &m, None)?;
    println!("mean curvature {}", field.mean());
    if let Some(bins) = a.bins {
        let hist = curvature_histogram(&field, bins as usize, None)?;
        match &a.hist_out {
            Some(p) => write_atomic(p, hist.to_csv().as_bytes())?,
            None => print!("{}", hist.to_csv()),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EmbedMeta<'a> {
    input: &'a Path,
    output: &'a Path,
    algorithm: Algorithm,
    n: usize,
    k: usize,
    d: usize,
    eigenvalues: Vec<f64>,
    sigma: Option<f64>,
    sigma_c: Option<f64>,
    curvature_mode: Option<&'static str>,
    lle_reg: Option<f64>,
    ridge_fits: usize,
    timings_ms: Timings,
}

#[derive(Serialize)]
struct Timings {
    neighbors: f64,
    geometry: f64,
    weights: f64,
    embedding: f64,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn cmd_embed(a: EmbedArgs) -> CmdResult {
    let alg: Algorithm = a.alg.parse()?;
    let cfg = a.model.config()?;
    let data: DataSet64 = load_csv(&a.input)?;
    let out = run(&data, alg, &cfg)?;
    write_matrix_csv(&a.out, &out.embedding.y, data.labels.as_deref())?;

    let w = out.weights.as_ref();
    let meta = EmbedMeta {
        input: &a.input,
        output: &a.out,
        algorithm: alg,
        n: data.len(),
        k: cfg.k,
        d: cfg.d,
        eigenvalues: out.embedding.eigenvalues.iter().copied().collect(),
        sigma: w.and_then(|w| w.sigma),
        sigma_c: w.and_then(|w| w.sigma_c),
        curvature_mode: w.and_then(|w| w.mode).map(|m| m.name()),
        lle_reg: matches!(alg, Algorithm::Lle | Algorithm::CaLle).then_some(cfg.lle_reg),
        ridge_fits: out.ridge_fits,
        timings_ms: Timings {
            neighbors: ms(out.timings.neighbors),
            geometry: ms(out.timings.geometry),
            weights: ms(out.timings.weights),
            embedding: ms(out.timings.embedding),
        },
    };
    let meta_path = a.meta.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".meta.jsonl");
        PathBuf::from(p)
    });
    let mut line = serde_json::to_string(&meta).map_err(|e| usage(e.to_string()))?;
    line.push('\n');
    write_atomic(&meta_path, line.as_bytes())?;
    println!("{} {} {}", data.len(), cfg.d, alg);
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let x: DataSet64 = load_csv(&a.original)?;
    let y: DataSet64 = load_csv(&a.embedded)?;
    let report = npr(&x, &y, a.k as usize)?;
    if let Some(p) = &a.per_point_out {
        let m = caml::nalgebra::DMatrix::from_column_slice(report.per_point.len(), 1, &report.per_point);
        write_matrix_csv(p, &m, None)?;
    }
    println!("NPR {}", report.value);
    Ok(())
}

fn parse_ks(s: &str) -> Result<Vec<usize>, Failure> {
    let bad = || usage(format!("invalid --ks `{s}` (expected `10,20` or `10..70[:10]`)"));
    let ks: Vec<usize> = if let Some((lo, rest)) = s.split_once("..") {
        let (hi, step) = rest.split_once(':').unwrap_or((rest, "10"));
        let (lo, hi, step): (usize, usize, usize) = (
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
            step.trim().parse().map_err(|_| bad())?,
        );
        if step == 0 || lo > hi {
            return Err(bad());
        }
        (lo..=hi).step_by(step).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let spec = gen_spec(&a.kind, a.n, 0, a.noise, a.params)?;
    let algs: Vec<Algorithm> = a.algs.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    let ks = parse_ks(&a.ks)?;
    if a.seeds.is_empty() {
        return Err(usage("--seeds must list at least one seed"));
    }
    if let Some(&k) = ks.iter().find(|&&k| k >= spec.n) {
        return Err(usage(format!("K = {k} needs more than {} points", spec.n)));
    }
    let cfg = a.model.config()?;
    let report = k_sweep(&spec, &algs, &ks, &a.seeds, &cfg)?;
    report.save_csv(&a.out)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn cmd_classify(a: ClassifyArgs) -> CmdResult {
    let train: DataSet64 = load_csv(&a.train)?;
    if train.labels.is_none() {
        return Err(usage(format!("{}: classification needs a `# labels=last` file", a.train.display())));
    }
    match (&a.test, &a.alg) {
        (Some(test), None) => {
            let test: DataSet64 = load_csv(test)?;
            let acc = knn_classify(&train, &test, a.neighbors as usize)?;
            println!("accuracy {acc}");
        }
        (None, Some(alg)) => {
            let alg: Algorithm = alg.parse()?;
            let cfg = a.model.config()?;
            let rep = classification_protocol(&train, alg, &cfg, a.train_fraction, a.seed)?;
            println!("ambient accuracy {}", rep.ambient_accuracy);
            println!("{} accuracy {}", alg, rep.embedded_accuracy);
        }
        _ => return Err(usage("classify needs exactly one of --test or --alg")),
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|source| {
        CamlError::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn parse_failure(path: &Path, message: impl Into<String>) -> Failure {
    CamlError::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
    .into()
}

fn cmd_plot(a: PlotArgs) -> CmdResult {
    let title = a.title.clone().unwrap_or_else(|| {
        a.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let doc = match a.kind {
        PlotKind::Scatter => {
            let data: DataSet64 = load_csv(&a.input)?;
            if data.dim() < 2 {
                return Err(usage("scatter plots need at least two columns"));
            }
            let xs: Vec<f64> = data.points.column(0).iter().copied().collect();
            let ys: Vec<f64> = data.points.column(1).iter().copied().collect();
            let values: Option<Vec<f64>> = match &a.color_file {
                Some(p) => {
                    let c: DataSet64 = load_csv(p)?;
                    if c.len() != data.len() {
                        return Err(usage(format!(
                            "row count mismatch: {} points vs {} color rows",
                            data.len(),
                            c.len()
                        )));
                    }
                    if a.color_column >= c.dim() {
                        return Err(usage(format!("--color-column {} out of range", a.color_column)));
                    }
                    Some(c.points.column(a.color_column).iter().copied().collect())
                }
                None => None,
            };
            let coloring = match (&values, &data.labels) {
                (Some(v), _) => svg::Coloring::Values(v),
                (None, Some(l)) => svg::Coloring::Labels(l),
                (None, None) => svg::Coloring::Uniform,
            };
            svg::scatter(&title, &xs, &ys, &coloring)
        }
        PlotKind::Sweep => {
            let text = read_text(&a.input)?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            let head = lines.next().ok_or_else(|| parse_failure(&a.input, "empty file"))?;
            let ks: Vec<f64> = head
                .split(',')
                .skip(1)
                .map(|c| c.trim().trim_start_matches('k').parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| parse_failure(&a.input, "header must be `algorithm,k10,k20,...`"))?;
            let mut series = Vec::new();
            for (n, line) in lines.enumerate() {
                let mut cells = line.split(',');
                let name = cells.next().unwrap_or_default().trim().to_string();
                let ys: Vec<f64> = cells
                    .map(|c| c.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| parse_failure(&a.input, format!("non-numeric cell at line {}", n + 2)))?;
                if ys.len() != ks.len() {
                    return Err(parse_failure(&a.input, format!("ragged row at line {}", n + 2)));
                }
                series.push((name, ys));
            }
            svg::lines(&title, &ks, &series)
        }
        PlotKind::Hist => {
            let text = read_text(&a.input)?;
            let hist = parse_histogram(&text).map_err(|m| parse_failure(&a.input, m))?;
            svg::bars(&title, &hist.edges, &hist.counts)
        }
    };
    write_atomic(&a.out, doc.as_bytes())?;
    Ok(())
}

fn parse_histogram(text: &str) -> Result<Histogram, String> {
    let mut edges = Vec::new();
    let mut counts = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let [lo, hi, count] = cells[..] else {
            return Err(format!("line {}: expected lo,hi,count", n + 1));
        };
        let lo: f64 = lo.parse().map_err(|_| format!("line {}: bad bin edge", n + 1))?;
        let hi: f64 = hi.parse().map_err(|_| format!("line {}: bad bin edge", n + 1))?;
        if edges.is_empty() {
            edges.push(lo);
        }
        edges.push(hi);
        counts.push(count.parse().map_err(|_| format!("line {}: bad count", n + 1))?);
    }
    if counts.is_empty() {
        return Err("no bins".into());
    }
    Ok(Histogram { edges, counts })
}
