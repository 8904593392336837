//! Command-line surface: configuration resolution, the `spectrum`,
//! `concurrence` and `report` commands, and their serializers.
//!
//! Exit statuses: 0 success, 1 I/O failure, 2 usage error, 3 numerical
//! failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    dominance_violations, entangled_projector_census, find_crossings, find_last_crossing,
    ground_exclusivity_violations, ground_nn_variation, nn_linear_fit,
    projector_dimension_histogram, separation_coverage, AlphaGrid, AnalysisConfig, Analyzer,
    CrossingEvent, GroundVariation, LinearFit, ProjectorCensus, SelectivityViolation,
    SeparationCoverage, SweepResult,
};
use crate::entanglement::{OliveiraNormalization, OliveiraValue};
use crate::error::{Error, Result};
use crate::model::{Alpha, Variant};
use crate::spectral::DecompositionCache;

/// Version of the JSON documents written by every command.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the configured cache directory.
pub const CACHE_DIR_ENV: &str = "LRRING_CACHE_DIR";

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Concurrence,
    Report,
}

#[derive(Debug, Parser)]
#[command(
    name = "lrring",
    version,
    about = "Spectra and two-site entanglement of long-range Heisenberg rings"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Levels (energy, multiplicity) at every α.
    Spectrum(RunArgs),
    /// Concurrence of every level at every separation and α.
    Concurrence(RunArgs),
    /// JSON summary: counts, censuses, crossings, thresholds, fit, global measures.
    Report(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct RunArgs {
    /// TOML or JSON configuration file; flags win on conflict.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of ring sites.
    #[arg(long = "n")]
    n: Option<usize>,
    /// Explicit α value (repeatable; `inf` for nearest neighbours).
    #[arg(long, value_parser = parse_alpha)]
    alpha: Vec<Alpha>,
    /// Regular grid `min:max:count:lin|log`, threaded into level curves.
    #[arg(long)]
    grid: Option<String>,
    /// Extra α points evaluated alongside the grid (repeatable).
    #[arg(long = "extra", value_parser = parse_alpha)]
    extras: Vec<Alpha>,
    /// Hamiltonian variant: standard, shifted or ferromagnetic
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Relative tolerance for grouping eigenvalues into levels [default: 1e-9]
    #[arg(long)]
    cluster_tolerance: Option<f64>,
    /// Largest admissible deviation of a pair reduction from the (a, b, c) form [default: 1e-10]
    #[arg(long)]
    structure_tolerance: Option<f64>,
    /// Concurrence above which a level counts as entangled [default: 1e-10]
    #[arg(long)]
    concurrence_threshold: Option<f64>,
    /// Bracket width for crossing and threshold bisection.
    #[arg(long)]
    resolution: Option<f64>,
    /// Output format [default: csv; report is always json]
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file (stdout when absent).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for cached decompositions (also LRRING_CACHE_DIR)
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// `as-printed` (1/(N−1)) or `over-n` (1/N).
    #[arg(long, value_parser = parse_normalization)]
    oliveira_normalization: Option<OliveiraNormalization>,
    /// α of the projector-dimension histogram in reports.
    #[arg(long, value_parser = parse_alpha)]
    representative_alpha: Option<Alpha>,
}

fn parse_alpha(s: &str) -> Result<Alpha, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_normalization(s: &str) -> Result<OliveiraNormalization, String> {
    match s {
        "as-printed" => Ok(OliveiraNormalization::AsPrinted),
        "over-n" => Ok(OliveiraNormalization::OverN),
        other => Err(format!(
            "unknown normalization '{other}' (expected as-printed or over-n)"
        )),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Alpha),
    Many(Vec<Alpha>),
}

/// Contents of a configuration file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    n: Option<usize>,
    alpha: Option<OneOrMany>,
    grid: Option<String>,
    extras: Option<Vec<Alpha>>,
    variant: Option<Variant>,
    cluster_tolerance: Option<f64>,
    structure_tolerance: Option<f64>,
    concurrence_threshold: Option<f64>,
    resolution: Option<f64>,
    format: Option<Format>,
    output: Option<PathBuf>,
    cache_dir: Option<PathBuf>,
    oliveira_normalization: Option<OliveiraNormalization>,
    representative_alpha: Option<Alpha>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub n_sites: usize,
    pub grid: AlphaGrid,
    pub variant: Variant,
    pub analysis: AnalysisConfig,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub representative_alpha: Alpha,
}

impl RunConfig {
    fn resolve(command: Command, args: RunArgs, env_cache: Option<PathBuf>) -> Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let n_sites = args.n.or(file.n).ok_or_else(|| {
            Error::InvalidArgument("the number of sites (--n) is required".into())
        })?;

        let alphas = if args.alpha.is_empty() {
            match file.alpha {
                Some(OneOrMany::One(a)) => vec![a],
                Some(OneOrMany::Many(v)) => v,
                None => Vec::new(),
            }
        } else {
            args.alpha
        };
        let mut extras = if args.extras.is_empty() {
            file.extras.unwrap_or_default()
        } else {
            args.extras
        };
        let grid_spec = args.grid.or(file.grid);
        let grid = match grid_spec {
            Some(g) => {
                let regular: AlphaGrid = g.parse()?;
                extras.extend(alphas);
                AlphaGrid::new(regular.regular().to_vec(), extras)?
            }
            None if alphas.is_empty() && extras.is_empty() => AlphaGrid::default_sweep(),
            None => {
                extras.extend(alphas);
                AlphaGrid::points_only(extras)?
            }
        };

        let mut analysis = AnalysisConfig::default();
        let pick =
            |flag: Option<f64>, file: Option<f64>, default: f64| flag.or(file).unwrap_or(default);
        analysis.cluster_tolerance = pick(
            args.cluster_tolerance,
            file.cluster_tolerance,
            analysis.cluster_tolerance,
        );
        analysis.structure_tolerance = pick(
            args.structure_tolerance,
            file.structure_tolerance,
            analysis.structure_tolerance,
        );
        analysis.concurrence_threshold = pick(
            args.concurrence_threshold,
            file.concurrence_threshold,
            analysis.concurrence_threshold,
        );
        analysis.resolution = pick(args.resolution, file.resolution, analysis.resolution);
        analysis.oliveira_normalization = args
            .oliveira_normalization
            .or(file.oliveira_normalization)
            .unwrap_or_default();
        analysis.global_measures = command == Command::Report;
        analysis.validate()?;

        let format = args
            .format
            .or(file.format)
            .unwrap_or(if command == Command::Report {
                Format::Json
            } else {
                Format::Csv
            });
        if command == Command::Report && format != Format::Json {
            return Err(Error::InvalidArgument(
                "report is only available as json".into(),
            ));
        }

        Ok(Self {
            command,
            n_sites,
            grid,
            variant: args.variant.or(file.variant).unwrap_or_default(),
            analysis,
            format,
            output: args.output.or(file.output),
            cache_dir: args.cache_dir.or(env_cache).or(file.cache_dir),
            representative_alpha: args
                .representative_alpha
                .or(file.representative_alpha)
                .unwrap_or(Alpha::Finite(1.0)),
        })
    }

    fn analyzer(&self) -> Result<Analyzer> {
        let an = Analyzer::new(self.n_sites, self.variant, self.analysis)?;
        Ok(match &self.cache_dir {
            Some(d) => an.with_cache(DecompositionCache::new(d)?),
            None => an,
        })
    }
}

/// Shortest representation that parses back to the same `f64`.
fn real(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

#[derive(Serialize)]
struct SpectrumRow {
    alpha: Alpha,
    level_index: usize,
    energy: f64,
    multiplicity: usize,
}

#[derive(Serialize)]
struct ConcurrenceRow {
    alpha: Alpha,
    level_index: usize,
    energy: f64,
    multiplicity: usize,
    separation: usize,
    concurrence: f64,
    a: f64,
    b: f64,
    c: f64,
    structure_residual: f64,
}

#[derive(Serialize)]
struct Table<'a, R> {
    schema_version: u32,
    command: Command,
    n_sites: usize,
    variant: Variant,
    rows: &'a [R],
}

fn spectrum_rows(cfg: &RunConfig, an: &Analyzer) -> Result<Vec<SpectrumRow>> {
    let per_point = cfg
        .grid
        .points()
        .par_iter()
        .map(|&(alpha, _)| {
            let dec = an.decompose(alpha)?;
            Ok(dec
                .levels()
                .iter()
                .enumerate()
                .map(|(i, l)| SpectrumRow {
                    alpha,
                    level_index: i,
                    energy: l.energy,
                    multiplicity: l.multiplicity,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

fn concurrence_rows(cfg: &RunConfig, an: &Analyzer) -> Result<Vec<ConcurrenceRow>> {
    let per_point = cfg
        .grid
        .points()
        .par_iter()
        .map(|&(alpha, _)| an.point(alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point
        .iter()
        .flat_map(|p| {
            p.records.iter().map(|r| ConcurrenceRow {
                alpha: r.alpha,
                level_index: r.level_index,
                energy: r.level_energy,
                multiplicity: r.multiplicity,
                separation: r.separation,
                concurrence: r.concurrence,
                a: r.state.a,
                b: r.state.b,
                c: r.state.c,
                structure_residual: r.state.structure_residual,
            })
        })
        .collect())
}

fn spectrum_csv(rows: &[SpectrumRow]) -> String {
    let mut s = String::from("alpha,level_index,energy,multiplicity\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.alpha,
            r.level_index,
            real(r.energy),
            r.multiplicity
        );
    }
    s
}

fn concurrence_csv(rows: &[ConcurrenceRow]) -> String {
    let mut s = String::from(
        "alpha,level_index,energy,multiplicity,separation,concurrence,a,b,c,structure_residual\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.alpha,
            r.level_index,
            real(r.energy),
            r.multiplicity,
            r.separation,
            real(r.concurrence),
            real(r.a),
            real(r.b),
            real(r.c),
            real(r.structure_residual)
        );
    }
    s
}

#[derive(Debug, Serialize)]
pub struct GridSummary {
    pub regular_points: usize,
    pub regular_min: Option<f64>,
    pub regular_max: Option<f64>,
    pub extras: Vec<Alpha>,
}

#[derive(Debug, Serialize)]
pub struct CountEntry {
    pub alpha: Alpha,
    pub count: usize,
}

#[derive(Debug, Serialize)]
pub struct Histogram {
    pub alpha: Alpha,
    pub dimensions: BTreeMap<usize, usize>,
}

#[derive(Debug, Serialize)]
pub struct CensusEntry {
    pub alpha: Alpha,
    pub counts: BTreeMap<usize, usize>,
}

#[derive(Debug, Serialize)]
pub struct SelectivityEntry {
    pub alpha: Alpha,
    pub violations: Vec<SelectivityViolation>,
}

#[derive(Debug, Serialize)]
pub struct Invariants {
    pub ground_exclusivity_violations: Vec<(Alpha, Vec<usize>)>,
    pub dominance_violations: Vec<(Alpha, usize, f64)>,
    pub selectivity_violations: Vec<SelectivityEntry>,
}

#[derive(Debug, Serialize)]
pub struct FitEntry {
    pub alpha: Alpha,
    pub fit: Option<LinearFit>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct MeasureEntry<T> {
    pub alpha: Alpha,
    pub values: Vec<T>,
}

/// The `report` document.
#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub n_sites: usize,
    pub variant: Variant,
    pub grid: GridSummary,
    pub config: AnalysisConfig,
    pub distinct_level_counts: Vec<CountEntry>,
    pub histogram: Histogram,
    pub entangled_level_census: Vec<CensusEntry>,
    /// Entangled branches (maximal α-runs of a curve carrying two-site
    /// entanglement).
    pub entangled_projectors: usize,
    /// Distinct entangled level curves.
    pub entangled_curves: usize,
    pub projector_census: ProjectorCensus,
    pub crossings: Vec<CrossingEvent>,
    pub last_crossing: Option<f64>,
    pub last_crossing_event: Option<CrossingEvent>,
    pub boundaries: Vec<SeparationCoverage>,
    pub nnn_gap: Option<[f64; 2]>,
    pub max_distance_onset: Option<f64>,
    pub nn_fit: FitEntry,
    pub ground_nn: Option<GroundVariation>,
    pub invariants: Invariants,
    pub meyer_wallach: Vec<MeasureEntry<f64>>,
    pub oliveira: Vec<MeasureEntry<OliveiraValue>>,
}

/// Build the report document for `cfg`.
pub fn build_report(cfg: &RunConfig) -> Result<Report> {
    let an = cfg.analyzer()?;
    let thr = cfg.analysis.concurrence_threshold;
    log::info!("sweeping N = {} over {}", cfg.n_sites, cfg.grid);
    let sw: SweepResult = an.sweep(&cfg.grid)?;

    log::info!("locating crossings");
    let crossings = find_crossings(&an, &sw)?;
    let last_crossing_event = match cfg.grid.regular().last() {
        Some(&max) => find_last_crossing(&an, max)?,
        None => None,
    };

    log::info!("locating entanglement boundaries");
    let boundaries = (1..=sw.max_separation())
        .map(|d| separation_coverage(&an, &sw, d))
        .collect::<Result<Vec<_>>>()?;
    let census = entangled_projector_census(&sw, thr);
    let range = match (cfg.grid.regular().first(), cfg.grid.regular().last()) {
        (Some(&a), Some(&b)) => [a, b],
        _ => [0.0, 0.0],
    };
    let nnn_gap = boundaries.iter().find(|c| c.separation == 2).and_then(|c| {
        c.interior_gaps(range)
            .into_iter()
            .max_by(|x, y| (x[1] - x[0]).total_cmp(&(y[1] - y[0])))
    });
    let maxsep = sw.max_separation();
    let max_distance_onset = if maxsep > 1 {
        let nn_curves: Vec<usize> = census
            .curves
            .iter()
            .filter(|c| c.separations.contains(&1))
            .map(|c| c.curve)
            .collect();
        boundaries
            .iter()
            .find(|c| c.separation == maxsep)
            .into_iter()
            .flat_map(|c| c.events.iter())
            .filter(|e| {
                e.kind == crate::analysis::EventKind::Onset && nn_curves.contains(&e.curves[0])
            })
            .map(|e| e.alpha)
            .min_by(f64::total_cmp)
    } else {
        None
    };

    let nn_fit = match nn_linear_fit(&an, Alpha::Infinity) {
        Ok(f) => FitEntry {
            alpha: Alpha::Infinity,
            fit: Some(f),
            error: None,
        },
        Err(e @ Error::InsufficientData(_)) => FitEntry {
            alpha: Alpha::Infinity,
            fit: None,
            error: Some(e.to_string()),
        },
        Err(e) => return Err(e),
    };

    let invariants = Invariants {
        ground_exclusivity_violations: ground_exclusivity_violations(&sw, thr),
        dominance_violations: dominance_violations(&sw, 1e-12),
        selectivity_violations: sw
            .points
            .iter()
            .map(|p| SelectivityEntry {
                alpha: p.alpha,
                violations: crate::analysis::selectivity_violations(p, thr),
            })
            .filter(|e| !e.violations.is_empty())
            .collect(),
    };

    Ok(Report {
        schema_version: SCHEMA_VERSION,
        n_sites: cfg.n_sites,
        variant: cfg.variant,
        grid: GridSummary {
            regular_points: cfg.grid.regular().len(),
            regular_min: cfg.grid.regular().first().copied(),
            regular_max: cfg.grid.regular().last().copied(),
            extras: cfg.grid.extras().to_vec(),
        },
        config: cfg.analysis,
        distinct_level_counts: sw
            .points
            .iter()
            .map(|p| CountEntry {
                alpha: p.alpha,
                count: p.n_levels(),
            })
            .collect(),
        histogram: Histogram {
            alpha: cfg.representative_alpha,
            dimensions: projector_dimension_histogram(&an, cfg.representative_alpha)?,
        },
        entangled_level_census: sw
            .points
            .iter()
            .map(|p| CensusEntry {
                alpha: p.alpha,
                counts: p.census(thr),
            })
            .collect(),
        entangled_projectors: census.entangled_branches,
        entangled_curves: census.entangled_curves,
        projector_census: census,
        crossings,
        last_crossing: last_crossing_event.as_ref().map(|e| e.alpha),
        last_crossing_event,
        boundaries,
        nnn_gap,
        max_distance_onset,
        nn_fit,
        ground_nn: ground_nn_variation(&sw),
        invariants,
        meyer_wallach: sw
            .points
            .iter()
            .map(|p| MeasureEntry {
                alpha: p.alpha,
                values: p.meyer_wallach.clone().unwrap_or_default(),
            })
            .collect(),
        oliveira: sw
            .points
            .iter()
            .map(|p| MeasureEntry {
                alpha: p.alpha,
                values: p.oliveira.clone().unwrap_or_default(),
            })
            .collect(),
    })
}

/// Produce the output document of `cfg` as bytes.
pub fn render(cfg: &RunConfig) -> Result<Vec<u8>> {
    let an = cfg.analyzer()?;
    let mut text = match (cfg.command, cfg.format) {
        (Command::Spectrum, Format::Csv) => spectrum_csv(&spectrum_rows(cfg, &an)?),
        (Command::Spectrum, Format::Json) => {
            let rows = spectrum_rows(cfg, &an)?;
            serde_json::to_string_pretty(&Table {
                schema_version: SCHEMA_VERSION,
                command: cfg.command,
                n_sites: cfg.n_sites,
                variant: cfg.variant,
                rows: &rows,
            })?
        }
        (Command::Concurrence, Format::Csv) => concurrence_csv(&concurrence_rows(cfg, &an)?),
        (Command::Concurrence, Format::Json) => {
            let rows = concurrence_rows(cfg, &an)?;
            serde_json::to_string_pretty(&Table {
                schema_version: SCHEMA_VERSION,
                command: cfg.command,
                n_sites: cfg.n_sites,
                variant: cfg.variant,
                rows: &rows,
            })?
        }
        (Command::Report, _) => serde_json::to_string_pretty(&build_report(cfg)?)?,
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    Ok(text.into_bytes())
}

/// Write `bytes` to `path` through a temporary file in the same directory,
/// so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Parse arguments into a resolved configuration.
pub fn parse_config<I, T>(
    args: I,
    env_cache: Option<PathBuf>,
) -> std::result::Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let (command, args) = match cli.command {
        CliCommand::Spectrum(a) => (Command::Spectrum, a),
        CliCommand::Concurrence(a) => (Command::Concurrence, a),
        CliCommand::Report(a) => (Command::Report, a),
    };
    RunConfig::resolve(command, args, env_cache)
        .map_err(|e| clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("{e}\n")))
}

/// Run the command line `args` (including the program name); returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_cache = std::env::var_os(CACHE_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let cfg = match parse_config(args, env_cache) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let result = render(&cfg).and_then(|bytes| match &cfg.output {
        Some(p) => write_atomic(p, &bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()?;
            Ok(())
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else if matches!(e, Error::Io(_)) {
                EXIT_IO
            } else {
                EXIT_USAGE
            }
        }
    }
}
