//! Reproducible simulation runs: conditional generators, conditional `zeta_1`
//! estimation, convergence diagnostics and the singularity contrast.
//!
//! A run is described by an [`ExperimentConfig`] (a JSON document) and
//! writes CSV files plus `manifest.json` into the output directory. CSV
//! contents depend only on the config and the library version.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::conditional::ConditionalCopula;
use crate::copula::{ArchimedeanCopula, Copula, FixtureCopulaB, KernelCopula};
use crate::error::{Error, Result};
use crate::estimation::fit_mle;
use crate::fmt::g12;
use crate::generator::{make_generator, FamilyId, GeneratorFamily, GeneratorSpec};
use crate::metrics::{convergence_report, zeta1_conditional, ConvergenceReport};
use crate::quadrature::{mean_and_stderr, IntegrationSpec};
use crate::sampling::{sample, sample_conditional, sample_fixture_b};
use crate::stream::{derive_seed, row_uniforms, RNG_ALGORITHM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    CondGenerators,
    ZetaEstimation,
    Convergence,
    Singularity,
}

fn default_dim() -> usize {
    3
}
fn default_l() -> usize {
    1
}
fn default_replicates() -> usize {
    30
}
fn default_integration() -> IntegrationSpec {
    IntegrationSpec::gauss(64)
}
fn default_z_max() -> f64 {
    10.0
}
fn default_z_points() -> usize {
    201
}
fn default_family() -> FamilyId {
    FamilyId::Gumbel
}

/// Everything that determines a run.
///
/// `x_grid` holds conditioning values `x`; with `l > 1` each value stands for
/// the diagonal point `(x, ..., x)`. `n_list` is the list of sample sizes
/// (`zeta-estimation`, and the sample size for `cond-generators` and
/// `singularity`) or the sequence indices `n` of `theta_n = theta + 1/n`
/// (`convergence`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default = "default_family")]
    pub family: FamilyId,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_l")]
    pub l: usize,
    #[serde(default)]
    pub x_grid: Vec<f64>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_integration")]
    pub integration: IntegrationSpec,
    #[serde(default = "default_z_max")]
    pub z_max: f64,
    #[serde(default = "default_z_points")]
    pub z_points: usize,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    fn copula(&self) -> Result<ArchimedeanCopula> {
        let spec = GeneratorSpec { family: self.family, theta: self.theta, dim: self.dim };
        Ok(ArchimedeanCopula::new(spec.build()?))
    }

    fn conditioning_points(&self) -> Result<Vec<Vec<f64>>> {
        if self.x_grid.is_empty() {
            return Err(Error::InvalidConfig("x_grid must not be empty".into()));
        }
        Ok(self.x_grid.iter().map(|&x| vec![x; self.l]).collect())
    }

    fn sizes(&self, default: &[usize]) -> Vec<usize> {
        if self.n_list.is_empty() {
            default.to_vec()
        } else {
            self.n_list.clone()
        }
    }
}

/// A file written by a run.
#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub output_dir: PathBuf,
    pub files: Vec<OutputFile>,
    pub manifest: Value,
}

struct Writer {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Writer {
    fn put(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(OutputFile { path: name.into(), sha256: hex::encode(Sha256::digest(contents)), bytes: contents.len() });
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.put(name, &bytes)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put(name, &bytes)
    }
}

fn x_label(x: f64) -> String {
    g12(x)
}

/// Runs an experiment and writes its outputs.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    fs::create_dir_all(&config.output)?;
    let mut w = Writer { dir: config.output.clone(), files: Vec::new() };
    match config.experiment {
        ExperimentId::CondGenerators => cond_generators(config, &mut w)?,
        ExperimentId::ZetaEstimation => zeta_estimation(config, &mut w)?,
        ExperimentId::Convergence => convergence(config, &mut w)?,
        ExperimentId::Singularity => singularity(config, &mut w)?,
    }
    let manifest = json!({
        "experiment": config.experiment,
        "config": config,
        "version": env!("CARGO_PKG_VERSION"),
        "rng": RNG_ALGORITHM,
        "files": w.files,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(config.output.join("manifest.json"), bytes)?;
    Ok(ExperimentResult { output_dir: config.output.clone(), files: w.files, manifest })
}

fn cond_generators(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let c = cfg.copula()?;
    let xs = cfg.conditioning_points()?;
    let ccs = xs.iter().map(|x| ConditionalCopula::new(&c, x)).collect::<Result<Vec<_>>>()?;
    let gens = ccs.iter().map(|cc| cc.normalized_generator()).collect::<Result<Vec<_>>>()?;
    if cfg.z_points < 2 {
        return Err(Error::InvalidConfig("z_points must be at least 2".into()));
    }
    let mut header = vec!["z".to_string(), "psi".to_string()];
    header.extend(cfg.x_grid.iter().map(|&x| format!("psi_x_{}", x_label(x))));
    let mut rows = Vec::with_capacity(cfg.z_points);
    for i in 0..cfg.z_points {
        let z = cfg.z_max * i as f64 / (cfg.z_points - 1) as f64;
        let mut row = vec![g12(z), g12(c.generator().psi(z)?)];
        for g in &gens {
            row.push(g12(g.psi(z)?));
        }
        rows.push(row);
    }
    w.csv("cond_generators.csv", &header, &rows)?;
    let n = cfg.sizes(&[2000])[0];
    for (k, (cc, &x)) in ccs.iter().zip(&cfg.x_grid).enumerate() {
        let s = sample_conditional(cc, n, derive_seed(cfg.seed, k as u64))?;
        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        w.put(&format!("cond_sample_x_{}.csv", x_label(x)), &buf)?;
    }
    Ok(())
}

/// One replicate of the estimation study.
#[derive(Clone, Debug, Serialize)]
pub struct ReplicateRow {
    pub n: usize,
    pub replicate: usize,
    pub theta_hat: f64,
    pub zeta_hat: Vec<f64>,
}

/// Summary row of the estimation study.
#[derive(Clone, Debug, Serialize)]
pub struct ZetaSummaryRow {
    pub x: f64,
    pub n: usize,
    pub zeta_true: f64,
    pub zeta_hat_mean: f64,
    pub zeta_hat_sd: f64,
}

/// The estimation study without file output: true `zeta_1^x` per `x`, then for
/// each sample size `R` replicates of sample, fit, evaluate.
pub fn zeta_estimation_study(cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<ReplicateRow>, Vec<ZetaSummaryRow>)> {
    let c = cfg.copula()?;
    let xs = cfg.conditioning_points()?;
    let sizes = cfg.sizes(&[50, 100, 500, 1000]);
    if cfg.replicates < 2 {
        return Err(Error::InvalidConfig("at least 2 replicates are needed".into()));
    }
    let truth = xs
        .iter()
        .map(|x| Ok(zeta1_conditional(&c, x, &cfg.integration)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let jobs: Vec<(usize, usize)> = sizes.iter().flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r))).collect();
    let reps: Vec<Result<ReplicateRow>> = jobs
        .par_iter()
        .map(|&(n, r)| {
            let seed = derive_seed(derive_seed(cfg.seed, n as u64), r as u64);
            let s = sample(&c, n, seed)?;
            let fit = fit_mle(cfg.family, cfg.dim, &s)?;
            let fam = GeneratorFamily::new(cfg.family, fit.theta_hat)?;
            let fitted = ArchimedeanCopula::new(make_generator(fam, cfg.dim)?);
            let zeta_hat = xs
                .iter()
                .map(|x| Ok(zeta1_conditional(&fitted, x, &cfg.integration)?.value))
                .collect::<Result<Vec<f64>>>()?;
            Ok(ReplicateRow { n, replicate: r, theta_hat: fit.theta_hat, zeta_hat })
        })
        .collect();
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
    let mut summary = Vec::new();
    for &n in &sizes {
        let block: Vec<&ReplicateRow> = reps.iter().filter(|r| r.n == n).collect();
        for (k, &x) in cfg.x_grid.iter().enumerate() {
            let vals: Vec<f64> = block.iter().map(|r| r.zeta_hat[k]).collect();
            let (mean, se) = mean_and_stderr(&vals);
            summary.push(ZetaSummaryRow { x, n, zeta_true: truth[k], zeta_hat_mean: mean, zeta_hat_sd: se * (vals.len() as f64).sqrt() });
        }
    }
    Ok((truth, reps, summary))
}

fn zeta_estimation(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let (_, reps, summary) = zeta_estimation_study(cfg)?;
    let header: Vec<String> = ["x", "n", "zeta_true", "zeta_hat_mean", "zeta_hat_sd"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = summary
        .iter()
        .map(|r| vec![g12(r.x), r.n.to_string(), g12(r.zeta_true), g12(r.zeta_hat_mean), g12(r.zeta_hat_sd)])
        .collect();
    w.csv("zeta_estimation.csv", &header, &rows)?;
    let header: Vec<String> = ["n", "replicate", "theta_hat", "x", "zeta_hat"].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for r in &reps {
        for (k, &x) in cfg.x_grid.iter().enumerate() {
            rows.push(vec![r.n.to_string(), r.replicate.to_string(), g12(r.theta_hat), g12(x), g12(r.zeta_hat[k])]);
        }
    }
    w.csv("zeta_estimation_replicates.csv", &header, &rows)
}

/// Convergence diagnostics for `theta_n = theta + 1/n` along `ns`.
pub fn convergence_study(family: GeneratorFamily, dim: usize, ns: &[usize], spec: &IntegrationSpec) -> Result<ConvergenceReport> {
    let limit = ArchimedeanCopula::new(make_generator(family, dim)?);
    let seq = ns
        .iter()
        .map(|&n| {
            let f = GeneratorFamily::new(family.id(), family.theta() + 1.0 / n as f64)?;
            Ok(ArchimedeanCopula::new(make_generator(f, dim)?))
        })
        .collect::<Result<Vec<_>>>()?;
    convergence_report(&seq, &limit, spec)
}

fn convergence(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let theta = cfg.theta.ok_or_else(|| Error::InvalidConfig("convergence needs theta".into()))?;
    let ns = cfg.sizes(&[1, 10, 100, 1000]);
    if ns.contains(&0) {
        return Err(Error::InvalidConfig("sequence indices must be positive".into()));
    }
    let report = convergence_study(GeneratorFamily::new(cfg.family, theta)?, cfg.dim, &ns, &cfg.integration)?;
    let crit = report.criteria();
    let mut header = vec!["n".to_string(), "theta_n".to_string()];
    header.extend(crit.iter().map(|c| c.name.clone()));
    let rows: Vec<Vec<String>> = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut row = vec![n.to_string(), g12(theta + 1.0 / n as f64)];
            row.extend(crit.iter().map(|c| g12(c.values[i])));
            row
        })
        .collect();
    w.csv("convergence.csv", &header, &rows)?;
    w.json("convergence_report.json", &report)
}

/// Numerical witnesses of singular kernels.
#[derive(Clone, Debug, Serialize)]
pub struct SingularityReport {
    /// Monte Carlo estimate of the total mass of the boundary Clayton
    /// density (d = 3) and its standard error.
    pub boundary_density_mass: f64,
    pub boundary_density_stderr: f64,
    /// Smallest jump of the 2-Markov kernel at the predicted location over the
    /// probe points, and the largest distance of the located jump from it.
    pub boundary_min_jump: f64,
    pub boundary_jump_location_error: f64,
    pub boundary_probes: usize,
    /// Smallest mass the fixture's 1-Markov kernel puts on the strip
    /// `|y - x| <= strip_halfwidth` (a set of Lebesgue measure `2 strip_halfwidth`).
    pub fixture_l1_strip_mass: f64,
    pub strip_halfwidth: f64,
    /// `max |K((x,y),[0,z]) - z|` over a grid for the fixture's 2-Markov kernel.
    pub fixture_l2_uniform_deviation: f64,
}

/// Singularity diagnostics; the density mass uses `samples` Monte Carlo points.
pub fn singularity_report(samples: usize, seed: u64) -> Result<SingularityReport> {
    let c = ArchimedeanCopula::from_family(GeneratorFamily::clayton_boundary(3)?, 3)?;
    let mut dens = Vec::with_capacity(samples);
    let mut u = [0.0; 3];
    for row in 0..samples {
        row_uniforms(seed, row as u64, &mut u);
        dens.push(match c.density(&u) {
            Ok(v) => v,
            // the kink is a null set; a hit carries no mass
            Err(Error::NotDifferentiable(_)) => 0.0,
            Err(e) => return Err(e),
        });
    }
    let (mass, se) = mean_and_stderr(&dens);

    let g = c.generator();
    let probes = [0.3, 0.45, 0.6, 0.75, 0.9];
    let (mut min_jump, mut loc_err, mut count) = (f64::INFINITY, 0.0f64, 0);
    for &x1 in &probes {
        for &x2 in &probes {
            let x = [x1, x2];
            let a = c.sum_phi(&x);
            if a >= g.phi_zero() {
                continue;
            }
            let predicted = g.psi(g.phi_zero() - a)?;
            let eps = 1e-9;
            let jump = c.kernel_univariate_cdf(&x, (predicted + eps).min(1.0))? - c.kernel_univariate_cdf(&x, (predicted - eps).max(0.0))?;
            min_jump = min_jump.min(jump);
            // locate the jump by bisection on the kernel
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if c.kernel_univariate_cdf(&x, mid)? >= 0.5 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            loc_err = loc_err.max((hi - predicted).abs());
            count += 1;
        }
    }

    let b = FixtureCopulaB;
    let h = 1e-6;
    let mut strip = f64::INFINITY;
    for &x in &[0.2, 0.5, 0.8] {
        let mass = b.kernel(&[x], &[x + h, 1.0])? - b.kernel(&[x], &[x - h, 1.0])?;
        strip = strip.min(mass);
    }
    let mut dev = 0.0f64;
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    for &x in &grid {
        for &y in &grid {
            for &z in &[0.0, 0.25, 0.5, 0.75, 1.0] {
                dev = dev.max((b.kernel(&[x, y], &[z])? - z).abs());
            }
        }
    }
    Ok(SingularityReport {
        boundary_density_mass: mass,
        boundary_density_stderr: se,
        boundary_min_jump: min_jump,
        boundary_jump_location_error: loc_err,
        boundary_probes: count,
        fixture_l1_strip_mass: strip,
        strip_halfwidth: h,
        fixture_l2_uniform_deviation: dev,
    })
}

fn singularity(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let n = cfg.sizes(&[2000])[0];
    let s = sample_fixture_b(n, cfg.seed)?;
    let mut buf = Vec::new();
    s.write_csv(&mut buf)?;
    w.put("fixture_b_sample.csv", &buf)?;
    let report = singularity_report(100_000, derive_seed(cfg.seed, 1))?;
    let b = FixtureCopulaB;
    let contrast = json!({
        "report": report,
        "fixture_cdf_at_half": b.cdf(&[0.5, 0.5, 0.5])?,
        "fixture_empirical_cdf_at_half": s.empirical_cdf(&[0.5, 0.5, 0.5]),
        "l1_kernel_singular": report.fixture_l1_strip_mass >= 1.0 - 1e-12,
        "l2_kernel_uniform": report.fixture_l2_uniform_deviation == 0.0,
    });
    w.json("singularity_report.json", &contrast)
}

/// Reads a config file and runs it.
pub fn run_file(path: &Path) -> Result<ExperimentResult> {
    let text = fs::read_to_string(path)?;
    run(&ExperimentConfig::from_json(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str, dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::from_json(json).unwrap();
        c.output = dir.to_path_buf();
        c
    }

    #[test]
    fn cond_generators_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            r#"{"experiment":"cond-generators","family":"gumbel","theta":3.0,"x_grid":[0.05,0.85],"n_list":[200],"seed":1,"z_points":11,"output":"x"}"#,
            dir.path(),
        );
        let res = run(&cfg).unwrap();
        let names: Vec<&str> = res.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(names, ["cond_generators.csv", "cond_sample_x_0.05.csv", "cond_sample_x_0.85.csv"]);
        let text = fs::read_to_string(dir.path().join("cond_generators.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "z,psi,psi_x_0.05,psi_x_0.85");
        assert!(lines.next().unwrap().starts_with("0,1,1,1"));
        // normalized: psi^x(1) = 1/2 at z = 1 (row 2 of 11 on [0, 10])
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert!(row[1..].iter().all(|v| (v - 0.5).abs() < 1e-11));
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["files"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn runs_are_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let json = r#"{"experiment":"zeta-estimation","family":"gumbel","theta":5.0,"x_grid":[0.2,0.8],"n_list":[60],"replicates":3,"seed":7,"integration":{"method":"tensor-gauss","points":32},"output":"x"}"#;
        let ra = run(&config(json, a.path())).unwrap();
        let rb = run(&config(json, b.path())).unwrap();
        for (fa, fb) in ra.files.iter().zip(&rb.files) {
            assert_eq!(fa.sha256, fb.sha256);
        }
        let text = fs::read_to_string(a.path().join("zeta_estimation.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), "x,n,zeta_true,zeta_hat_mean,zeta_hat_sd");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn singularity_contrast() {
        let r = singularity_report(20000, 3).unwrap();
        assert_eq!(r.boundary_density_mass, 0.0);
        assert!(r.boundary_min_jump >= 0.99 && r.boundary_probes > 0);
        assert!(r.boundary_jump_location_error < 1e-10, "{}", r.boundary_jump_location_error);
        assert_eq!(r.fixture_l1_strip_mass, 1.0);
        assert_eq!(r.fixture_l2_uniform_deviation, 0.0);
    }

    #[test]
    fn bad_configs() {
        assert!(matches!(ExperimentConfig::from_json(r#"{"experiment":"nope","seed":1,"output":"x"}"#), Err(Error::InvalidConfig(_))));
        assert!(matches!(ExperimentConfig::from_json(r#"{"experiment":"convergence","output":"x"}"#), Err(Error::InvalidConfig(_))));
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(r#"{"experiment":"cond-generators","family":"gumbel","theta":3.0,"seed":1,"output":"x"}"#, dir.path());
        assert!(matches!(run(&cfg), Err(Error::InvalidConfig(_))));
    }
}
