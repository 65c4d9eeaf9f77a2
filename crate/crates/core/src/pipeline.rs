//! End-to-end estimation: margins, TPDM, a family of fits, selection,
//! optional bootstrap, and the artifact files of a run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::glasso::{self, GlassoPath};
use crate::graph::{EdgeVoteTable, GraphStructure};
use crate::io::{self, fmt_num};
use crate::lab;
use crate::ptcc::ptcc_matrix;
use crate::sample::SampleMatrix;
use crate::select::{
    bootstrap_graphs, fixed_sparsity_select, soft_connected_select, BootstrapSummary, Setting,
};
use crate::sgl::{self, SglGrid, SpectralConstraint};
use crate::tl::CoefficientMatrix;
use crate::tpdm::{ensure_positive_definite, estimate_tpdm, frechet2_rank_transform, Threshold, Tpdm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Margins {
    /// Rank-transform every column to the Fréchet(2) scale.
    Raw,
    /// Already on a common heavy-tailed scale; only positivity is checked.
    PreTransformed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Glasso {
        m1: usize,
        min_ratio: f64,
        tol: f64,
        max_iter: usize,
    },
    Sgl {
        alphas: Vec<f64>,
        betas: Vec<f64>,
        components: usize,
        c1: f64,
        /// Defaults to `10 · λ_max(Σ̂⁻¹)`.
        c2: Option<f64>,
        tol: f64,
        max_iter: usize,
    },
}

impl Method {
    pub fn glasso_default() -> Self {
        Method::Glasso {
            m1: 300,
            min_ratio: glasso::DEFAULT_MIN_RATIO,
            tol: glasso::DEFAULT_TOL,
            max_iter: glasso::DEFAULT_MAX_ITER,
        }
    }

    pub fn sgl_default() -> Self {
        Method::Sgl {
            alphas: sgl::default_alphas(20),
            betas: sgl::default_betas(20),
            components: 1,
            c1: sgl::DEFAULT_C1,
            c2: None,
            tol: sgl::DEFAULT_TOL,
            max_iter: sgl::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    SoftConnected,
    FixedSparsity(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationConfig {
    pub margins: Margins,
    pub threshold: Threshold,
    pub m: Option<f64>,
    pub method: Method,
    pub selection: Selection,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            margins: Margins::Raw,
            threshold: Threshold::Quantile(0.9),
            m: None,
            method: Method::glasso_default(),
            selection: Selection::SoftConnected,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    Glasso(GlassoPath),
    Sgl(SglGrid),
}

impl Family {
    pub fn votes(&self) -> &EdgeVoteTable {
        match self {
            Family::Glasso(p) => &p.votes,
            Family::Sgl(g) => &g.votes,
        }
    }

    pub fn results(&self) -> Vec<(Setting, GraphStructure)> {
        match self {
            Family::Glasso(p) => p
                .fits
                .iter()
                .zip(&p.graphs)
                .map(|(f, g)| (Setting::Glasso { lambda: f.lambda }, g.clone()))
                .collect(),
            Family::Sgl(s) => s
                .settings
                .iter()
                .zip(&s.graphs)
                .map(|(&(alpha, beta), g)| (Setting::Sgl { alpha, beta }, g.clone()))
                .collect(),
        }
    }

    /// One CSV line per successful fit, header first.
    pub fn summary_csv(&self) -> String {
        let mut s = String::new();
        match self {
            Family::Glasso(p) => {
                s.push_str("lambda,edge_count,objective,iterations,converged\n");
                for (f, g) in p.fits.iter().zip(&p.graphs) {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{}",
                        fmt_num(f.lambda),
                        g.edge_count(),
                        fmt_num(f.objective),
                        f.iterations,
                        f.converged
                    );
                }
            }
            Family::Sgl(grid) => {
                s.push_str("alpha,beta,beta_final,rescale,edge_count,objective,iterations,converged\n");
                for (f, g) in grid.fits.iter().zip(&grid.graphs) {
                    let obj = f.objective_trace.last().copied().unwrap_or(f64::NAN);
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{}",
                        fmt_num(f.alpha),
                        fmt_num(f.beta),
                        fmt_num(f.beta_final),
                        fmt_num(f.rescale),
                        g.edge_count(),
                        fmt_num(obj),
                        f.iterations,
                        f.converged
                    );
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct NetworkEstimate {
    pub tpdm: Tpdm,
    pub family: Family,
    pub selected: GraphStructure,
    /// The chosen fit under fixed-sparsity selection.
    pub setting: Option<Setting>,
}

/// Applies the margin convention of `mode`.
pub fn prepare_margins(data: &SampleMatrix, mode: Margins) -> Result<SampleMatrix> {
    if data.nrows() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 rows, got {}", data.nrows())));
    }
    match mode {
        Margins::Raw => frechet2_rank_transform(data),
        Margins::PreTransformed => {
            let v = data.values();
            if let Some(pos) = v.iter().position(|&x| !(x > 0.0)) {
                let (r, c) = (pos % v.nrows(), pos / v.nrows());
                return Err(Error::Data {
                    line: r as u64 + 2,
                    column: c + 1,
                    message: format!("non-positive value {} in pre-transformed data", v[(r, c)]),
                });
            }
            Ok(data.clone())
        }
    }
}

/// Reads a sample CSV and applies the margin convention.
pub fn ingest(path: &Path, mode: Margins) -> Result<SampleMatrix> {
    let raw = io::read_samples(path)?;
    prepare_margins(&raw, mode)
}

pub fn fit_family(t: &Tpdm, method: &Method) -> Result<Family> {
    match method {
        Method::Glasso {
            m1,
            min_ratio,
            tol,
            max_iter,
        } => {
            let grid = glasso::lambda_grid(t, *m1, *min_ratio)?;
            Ok(Family::Glasso(glasso::glasso_path(t, &grid, *tol, *max_iter)?))
        }
        Method::Sgl {
            alphas,
            betas,
            components,
            c1,
            c2,
            tol,
            max_iter,
        } => {
            let upper = match c2 {
                Some(v) => *v,
                None => SpectralConstraint::default_for(t)?.upper.max(*c1),
            };
            let c = SpectralConstraint::new(*components, *c1, upper)?;
            Ok(Family::Sgl(sgl::sgl_grid(t, alphas, betas, &c, *tol, *max_iter)?))
        }
    }
}

/// Margins, TPDM with PD repair, fit family, and selection. `data` is taken
/// before the margin transform.
pub fn estimate_network(data: &SampleMatrix, cfg: &EstimationConfig) -> Result<NetworkEstimate> {
    let x = prepare_margins(data, cfg.margins)?;
    let t = estimate_tpdm(&x, cfg.threshold, cfg.m)?;
    let t = ensure_positive_definite(&t, None)?;
    let family = fit_family(&t, &cfg.method)?;
    let (selected, setting) = match cfg.selection {
        Selection::SoftConnected => (soft_connected_select(family.votes())?, None),
        Selection::FixedSparsity(s) => {
            let (setting, mut g) = fixed_sparsity_select(&family.results(), s)?;
            let votes = family.votes();
            g.votes = Some(g.edges.iter().map(|&(i, k)| ((i, k), votes.get(i, k))).collect());
            (g, Some(setting))
        }
    };
    Ok(NetworkEstimate {
        tpdm: t,
        family,
        selected,
        setting,
    })
}

/// Everything a run needs; see [`PipelineConfig::parse`] for the file format.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub estimation: EstimationConfig,
    pub bootstrap: usize,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "input",
    "output",
    "margins",
    "quantile",
    "radius",
    "m",
    "method",
    "glasso.m1",
    "glasso.min_ratio",
    "glasso.tol",
    "glasso.max_iter",
    "sgl.n_alpha",
    "sgl.alpha_min",
    "sgl.alpha_max",
    "sgl.n_beta",
    "sgl.beta_min",
    "sgl.beta_max",
    "sgl.k",
    "sgl.c1",
    "sgl.c2",
    "sgl.tol",
    "sgl.max_iter",
    "selection",
    "sparsity",
    "bootstrap",
    "seed",
];

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn num<T: std::str::FromStr>(map: &[(String, String)], key: &str) -> Result<Option<T>> {
    match map.iter().rev().find(|(k, _)| k == key) {
        None => Ok(None),
        Some((_, v)) => v
            .parse()
            .map(Some)
            .map_err(|_| cfg_err(format!("invalid value '{v}' for {key}"))),
    }
}

fn text<'a>(map: &'a [(String, String)], key: &str) -> Option<&'a str> {
    map.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

impl PipelineConfig {
    /// Builds a config from `key = value` pairs; later pairs override earlier
    /// ones, so command-line flags are appended after the file contents.
    ///
    /// Keys: `input`, `output`, `margins` (raw | pre-transformed), `quantile`
    /// or `radius`, `m`, `method` (glasso | sgl), `glasso.*`, `sgl.*`,
    /// `selection` (soft-connected | fixed-sparsity), `sparsity`,
    /// `bootstrap`, `seed`.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        for (k, _) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(cfg_err(format!("unknown key '{k}'")));
            }
        }
        let input = text(pairs, "input").ok_or_else(|| cfg_err("missing 'input'"))?;
        let output = text(pairs, "output").ok_or_else(|| cfg_err("missing 'output'"))?;
        let margins = match text(pairs, "margins").unwrap_or("raw") {
            "raw" => Margins::Raw,
            "pre-transformed" => Margins::PreTransformed,
            other => return Err(cfg_err(format!("margins must be raw or pre-transformed, got '{other}'"))),
        };
        let quantile: Option<f64> = num(pairs, "quantile")?;
        let radius: Option<f64> = num(pairs, "radius")?;
        let threshold = match (quantile, radius) {
            (Some(_), Some(_)) => return Err(cfg_err("give either quantile or radius, not both")),
            (None, Some(r)) if r > 0.0 => Threshold::Radius(r),
            (None, Some(r)) => return Err(cfg_err(format!("radius must be positive, got {r}"))),
            (q, None) => {
                let q = q.unwrap_or(0.9);
                if !(q > 0.0 && q < 1.0) {
                    return Err(cfg_err(format!("quantile {q} not in (0, 1)")));
                }
                Threshold::Quantile(q)
            }
        };
        let m: Option<f64> = num(pairs, "m")?;
        if let Some(v) = m {
            if !(v > 0.0) {
                return Err(cfg_err(format!("m must be positive, got {v}")));
            }
        }
        let positive_count = |key: &str, default: usize| -> Result<usize> {
            let v = num(pairs, key)?.unwrap_or(default);
            if v == 0 {
                return Err(cfg_err(format!("{key} must be at least 1")));
            }
            Ok(v)
        };
        let positive = |key: &str, default: f64| -> Result<f64> {
            let v: f64 = num(pairs, key)?.unwrap_or(default);
            if !(v > 0.0) || !v.is_finite() {
                return Err(cfg_err(format!("{key} must be positive, got {v}")));
            }
            Ok(v)
        };
        let method = match text(pairs, "method").unwrap_or("glasso") {
            "glasso" => {
                let m1 = positive_count("glasso.m1", 300)?;
                if m1 < 2 {
                    return Err(cfg_err("glasso.m1 must be at least 2"));
                }
                let min_ratio = positive("glasso.min_ratio", glasso::DEFAULT_MIN_RATIO)?;
                if min_ratio >= 1.0 {
                    return Err(cfg_err("glasso.min_ratio must be below 1"));
                }
                Method::Glasso {
                    m1,
                    min_ratio,
                    tol: positive("glasso.tol", glasso::DEFAULT_TOL)?,
                    max_iter: positive_count("glasso.max_iter", glasso::DEFAULT_MAX_ITER)?,
                }
            }
            "sgl" => {
                let n_alpha = positive_count("sgl.n_alpha", 20)?;
                let n_beta = positive_count("sgl.n_beta", 20)?;
                let (a_lo, a_hi) = (positive("sgl.alpha_min", 1e-4)?, positive("sgl.alpha_max", 1.0)?);
                let (b_lo, b_hi) = (positive("sgl.beta_min", 1e-1)?, positive("sgl.beta_max", 1e3)?);
                if a_lo > a_hi || b_lo > b_hi {
                    return Err(cfg_err("sgl grid bounds are reversed"));
                }
                let mut alphas = vec![0.0];
                if n_alpha > 1 {
                    alphas.extend(sgl::log_grid(a_lo, a_hi, n_alpha - 1));
                }
                let c1 = positive("sgl.c1", sgl::DEFAULT_C1)?;
                let c2: Option<f64> = num(pairs, "sgl.c2")?;
                if let Some(v) = c2 {
                    if !(v >= c1) {
                        return Err(cfg_err("sgl.c2 must be at least sgl.c1"));
                    }
                }
                Method::Sgl {
                    alphas,
                    betas: sgl::log_grid(b_lo, b_hi, n_beta),
                    components: positive_count("sgl.k", 1)?,
                    c1,
                    c2,
                    tol: positive("sgl.tol", sgl::DEFAULT_TOL)?,
                    max_iter: positive_count("sgl.max_iter", sgl::DEFAULT_MAX_ITER)?,
                }
            }
            other => return Err(cfg_err(format!("method must be glasso or sgl, got '{other}'"))),
        };
        let sparsity: Option<f64> = num(pairs, "sparsity")?;
        let selection = match text(pairs, "selection").unwrap_or("soft-connected") {
            "soft-connected" => {
                if sparsity.is_some() {
                    return Err(cfg_err("sparsity only applies to fixed-sparsity selection"));
                }
                Selection::SoftConnected
            }
            "fixed-sparsity" => {
                let s = sparsity.unwrap_or(0.8);
                if !(s > 0.0 && s < 1.0) {
                    return Err(cfg_err(format!("sparsity {s} not in (0, 1)")));
                }
                Selection::FixedSparsity(s)
            }
            other => {
                return Err(cfg_err(format!(
                    "selection must be soft-connected or fixed-sparsity, got '{other}'"
                )))
            }
        };
        Ok(Self {
            input: PathBuf::from(input),
            output: PathBuf::from(output),
            estimation: EstimationConfig {
                margins,
                threshold,
                m,
                method,
                selection,
            },
            bootstrap: num(pairs, "bootstrap")?.unwrap_or(0),
            seed: num(pairs, "seed")?.unwrap_or(0),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let pairs: Vec<(String, String)> = io::parse_key_values(text)?
            .into_iter()
            .map(|(k, v, _)| (k, v))
            .collect();
        Self::from_pairs(&pairs)
    }

    /// Canonical `key = value` form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let e = &self.estimation;
        let mut lines = vec![
            format!("input = {}", self.input.display()),
            format!("output = {}", self.output.display()),
            format!(
                "margins = {}",
                match e.margins {
                    Margins::Raw => "raw",
                    Margins::PreTransformed => "pre-transformed",
                }
            ),
        ];
        match e.threshold {
            Threshold::Quantile(q) => lines.push(format!("quantile = {}", fmt_num(q))),
            Threshold::Radius(r) => lines.push(format!("radius = {}", fmt_num(r))),
        }
        if let Some(m) = e.m {
            lines.push(format!("m = {}", fmt_num(m)));
        }
        match &e.method {
            Method::Glasso {
                m1,
                min_ratio,
                tol,
                max_iter,
            } => {
                lines.push("method = glasso".into());
                lines.push(format!("glasso.m1 = {m1}"));
                lines.push(format!("glasso.min_ratio = {}", fmt_num(*min_ratio)));
                lines.push(format!("glasso.tol = {}", fmt_num(*tol)));
                lines.push(format!("glasso.max_iter = {max_iter}"));
            }
            Method::Sgl {
                alphas,
                betas,
                components,
                c1,
                c2,
                tol,
                max_iter,
            } => {
                lines.push("method = sgl".into());
                lines.push(format!("sgl.n_alpha = {}", alphas.len()));
                if alphas.len() > 1 {
                    lines.push(format!("sgl.alpha_min = {}", fmt_num(alphas[1])));
                    lines.push(format!("sgl.alpha_max = {}", fmt_num(alphas[alphas.len() - 1])));
                }
                lines.push(format!("sgl.n_beta = {}", betas.len()));
                lines.push(format!("sgl.beta_min = {}", fmt_num(betas[0])));
                lines.push(format!("sgl.beta_max = {}", fmt_num(betas[betas.len() - 1])));
                lines.push(format!("sgl.k = {components}"));
                lines.push(format!("sgl.c1 = {}", fmt_num(*c1)));
                if let Some(c2) = c2 {
                    lines.push(format!("sgl.c2 = {}", fmt_num(*c2)));
                }
                lines.push(format!("sgl.tol = {}", fmt_num(*tol)));
                lines.push(format!("sgl.max_iter = {max_iter}"));
            }
        }
        match e.selection {
            Selection::SoftConnected => lines.push("selection = soft-connected".into()),
            Selection::FixedSparsity(s) => {
                lines.push("selection = fixed-sparsity".into());
                lines.push(format!("sparsity = {}", fmt_num(s)));
            }
        }
        lines.push(format!("bootstrap = {}", self.bootstrap));
        lines.push(format!("seed = {}", self.seed));
        lines.join("\n") + "\n"
    }
}

/// Output of a successful run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub estimate: NetworkEstimate,
    pub bootstrap: Option<BootstrapSummary>,
    pub files: Vec<PathBuf>,
}

/// A failed run: the stage that failed and why.
#[derive(Debug)]
pub struct RunFailure {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.error)
    }
}

/// JSON error record written to `error.json` on failure.
pub fn error_record(stage: &str, err: &Error) -> String {
    let class = match err.class() {
        crate::error::ErrorClass::Config => "config",
        crate::error::ErrorClass::Data => "data",
        crate::error::ErrorClass::Numerical => "numerical",
    };
    let mut doc = serde_json::json!({
        "stage": stage,
        "class": class,
        "kind": err.kind(),
        "message": err.to_string(),
    });
    if let Error::Data { line, column, .. } = err {
        doc["line"] = (*line).into();
        doc["column"] = (*column).into();
    }
    serde_json::to_string_pretty(&doc).expect("error record serializes") + "\n"
}

/// Runs the whole pipeline and writes every artifact into `config.output`.
/// On failure `error.json` is written there when the directory is usable.
pub fn run_pipeline(config: &PipelineConfig) -> std::result::Result<RunReport, RunFailure> {
    let started = Instant::now();
    let fail = |stage: &'static str| {
        let out = config.output.clone();
        move |error: Error| {
            if out.is_dir() {
                let _ = fs::write(out.join("error.json"), error_record(stage, &error));
            }
            RunFailure { stage, error }
        }
    };
    fs::create_dir_all(&config.output)
        .map_err(Error::from)
        .map_err(fail("output"))?;
    let _ = fs::remove_file(config.output.join("error.json"));
    let data = io::read_samples(&config.input).map_err(fail("ingest"))?;
    let estimate = estimate_network(&data, &config.estimation).map_err(fail("estimate"))?;
    let bootstrap = if config.bootstrap > 0 {
        Some(
            bootstrap_graphs(&data, config.bootstrap, config.seed, &config.estimation)
                .map_err(fail("bootstrap"))?,
        )
    } else {
        None
    };
    let files = write_artifacts(config, &estimate, bootstrap.as_ref(), started)
        .map_err(fail("export"))?;
    Ok(RunReport {
        estimate,
        bootstrap,
        files,
    })
}

fn write_artifacts(
    config: &PipelineConfig,
    est: &NetworkEstimate,
    boot: Option<&BootstrapSummary>,
    started: Instant,
) -> Result<Vec<PathBuf>> {
    let dir = &config.output;
    let mut files = Vec::new();
    io::write_tpdm(dir, &est.tpdm)?;
    files.push(dir.join("tpdm.csv"));
    files.push(dir.join("tpdm.meta"));
    if est.tpdm.dim() >= 3 {
        io::write_matrix_csv(&dir.join("ptcc.csv"), &est.tpdm.names, &ptcc_matrix(&est.tpdm.sigma)?)?;
        files.push(dir.join("ptcc.csv"));
    }
    io::write_text(&dir.join("fits.csv"), &est.family.summary_csv())?;
    files.push(dir.join("fits.csv"));
    io::write_votes(&dir.join("votes.csv"), est.family.votes())?;
    files.push(dir.join("votes.csv"));

    let mut info = vec![(
        "selection".to_string(),
        match config.estimation.selection {
            crate::pipeline::Selection::SoftConnected => "soft-connected".to_string(),
            crate::pipeline::Selection::FixedSparsity(s) => format!("fixed-sparsity {}", fmt_num(s)),
        },
    )];
    if let Some(s) = est.setting {
        info.push(("setting".into(), s.to_string()));
    }
    info.push(("failed_fits".into(), est.family.votes().n_failed.to_string()));
    io::write_text(&dir.join("graph.json"), &io::graph_json(&est.selected, boot, &info))?;
    files.push(dir.join("graph.json"));
    io::write_graph_csv(&dir.join("graph.csv"), &est.selected)?;
    files.push(dir.join("graph.csv"));
    io::write_text(&dir.join("graph.dot"), &io::graph_dot(&est.selected, boot))?;
    files.push(dir.join("graph.dot"));
    let boot_path = dir.join("bootstrap.csv");
    if let Some(b) = boot {
        io::write_bootstrap_csv(&boot_path, b)?;
        files.push(boot_path);
    } else if boot_path.exists() {
        fs::remove_file(&boot_path)?;
    }

    let mut manifest = config.to_text();
    let _ = writeln!(manifest, "# extnet {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "# threads {}", rayon::current_num_threads());
    if let Some(b) = boot {
        let _ = writeln!(manifest, "# bootstrap_failures {}", b.failures.len());
    }
    let _ = writeln!(manifest, "# wall_time_seconds {:.3}", started.elapsed().as_secs_f64());
    io::write_text(&dir.join("manifest.txt"), &manifest)?;
    files.push(dir.join("manifest.txt"));
    Ok(files)
}

/// Where a simulation's coefficients come from.
#[derive(Debug, Clone)]
pub enum SimSource {
    Case(u8),
    /// CSV with a header row; rows are variables, columns are factors.
    Matrix(PathBuf),
}

/// Simulates `n` rows and writes them to `out`, with the model truth next to
/// it as `<stem>.sigma.csv`, `<stem>.q.csv` and `<stem>.edges.csv`.
pub fn simulate_to_files(source: &SimSource, n: usize, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let a = match source {
        SimSource::Case(c) => lab::case_coefficients(*c).map_err(|e| Error::Config(e.to_string()))?,
        SimSource::Matrix(path) => CoefficientMatrix::new(io::read_numeric_csv(path)?.1)?,
    };
    let sim = lab::simulate_from_matrix(&a, n, 2.0, seed)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    io::write_samples(out, &sim.samples)?;
    let stem = out.with_extension("");
    let side = |suffix: &str| PathBuf::from(format!("{}.{suffix}", stem.display()));
    let names = sim.samples.names().to_vec();
    let (sigma_p, q_p, edges_p) = (side("sigma.csv"), side("q.csv"), side("edges.csv"));
    io::write_matrix_csv(&sigma_p, &names, &sim.truth.sigma_true)?;
    io::write_matrix_csv(&q_p, &names, &sim.truth.q_true)?;
    let edges: Vec<_> = sim.truth.edges_true.iter().copied().collect();
    io::write_edges_csv(&edges_p, &names, &edges)?;
    Ok(vec![out.to_path_buf(), sigma_p, q_p, edges_p])
}
