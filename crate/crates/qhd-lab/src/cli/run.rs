//! `run` subcommand: execute a configured experiment and emit
//! `series.csv`, `manifest.json`, and optionally `final_density.csv`.

use super::config::{ExperimentConfig, InitialStateSection, Method};
use crate::analysis::{MetricsRecord, MetricsSeries};
use crate::classical_opt::{self, ClassicalMethod, NagConfig, SgdmConfig};
use crate::evolution::{evolve, EvolveOptions};
use crate::objectives::{self, ObjectiveSpec};
use crate::spectral_mesh::{gaussian_state, make_grid, uniform_state, BoxDomain, WaveFunction};
use crate::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// Exact column schema of `series.csv`.
pub const CSV_HEADER: &str = "k,t,exp_f,exp_gradnorm_sq,success_prob,norm_drift,lyapunov";

/// Node budget guard: refuse grids whose state exceeds ~2^24 complex nodes.
const MAX_NODES: usize = 1 << 24;

#[derive(serde::Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    seed_used: u64,
    objective: ObjectiveSummary,
    records_written: usize,
    failed_runs: usize,
    max_norm_drift: f64,
    wall_time_ms: u128,
}

#[derive(serde::Serialize)]
struct ObjectiveSummary {
    name: String,
    dim: usize,
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    f_min: f64,
}

/// Resolve the objective named in the config, applying the optional box
/// override and centering flag.
pub fn resolve_objective(cfg: &ExperimentConfig) -> Result<ObjectiveSpec> {
    let mut obj = objectives::get(&cfg.experiment.objective)?;
    if cfg.experiment.center_objective {
        obj = obj.center(0)?;
    }
    if let (Some(lo), Some(hi)) = (cfg.experiment.box_lo, cfg.experiment.box_hi) {
        obj = obj.with_box(BoxDomain::cube(lo, hi, obj.dim)?)?;
    }
    Ok(obj)
}

fn initial_state(
    cfg: &ExperimentConfig,
    grid: &Arc<crate::spectral_mesh::Grid>,
) -> Result<WaveFunction> {
    match cfg.initial_state.clone().unwrap_or_default() {
        InitialStateSection::Uniform => Ok(uniform_state(Arc::clone(grid))),
        InitialStateSection::Gaussian { center, sigma } => {
            gaussian_state(Arc::clone(grid), &center, sigma)
        }
    }
}

/// Records selected for output: every `observe_every`-th iteration plus the
/// final one (quantum series are already thinned by the evolution driver).
fn thin(records: &[MetricsRecord], observe_every: usize, last_k: usize) -> Vec<MetricsRecord> {
    records
        .iter()
        .filter(|r| (r.k >= 1 && r.k % observe_every == 0) || r.k == last_k)
        .cloned()
        .collect()
}

fn compute_series(cfg: &ExperimentConfig, seed: u64, obj: &ObjectiveSpec) -> Result<(MetricsSeries, Option<(Arc<crate::spectral_mesh::Grid>, Vec<f64>)>)> {
    match cfg.experiment.method {
        Method::GradQhd | Method::Qhd => {
            let n = cfg.experiment.grid_n;
            let nodes = n.checked_pow(obj.dim as u32).unwrap_or(usize::MAX);
            if nodes > MAX_NODES {
                return Err(Error::InvalidParameter(format!(
                    "grid_n = {n} in dimension {} needs {nodes} nodes, over the {MAX_NODES} budget",
                    obj.dim
                )));
            }
            let ham = cfg.hamiltonian.as_ref().unwrap();
            let grid = Arc::new(make_grid(obj.domain.clone(), n)?);
            let wf0 = initial_state(cfg, &grid)?;
            let opts = EvolveOptions {
                observe_every: cfg.experiment.observe_every,
                delta: cfg.experiment.delta,
                splitting: ham.splitting,
                lyapunov: ham.lyapunov,
            };
            let (wf, series) = evolve(&wf0, &ham.params(), obj, &opts)?;
            let density = if cfg.experiment.final_density {
                Some((
                    Arc::clone(&grid),
                    wf.amplitudes().iter().map(|a| a.norm_sqr()).collect(),
                ))
            } else {
                None
            };
            Ok((series, density))
        }
        Method::Sgdm => {
            let s = cfg.sgdm.as_ref().unwrap();
            let method = ClassicalMethod::Sgdm(SgdmConfig {
                s0: s.s0,
                steps: s.steps,
                noise_std: s.noise_std,
            });
            let n_runs = cfg.classical.clone().unwrap_or_default().n_runs;
            let mut series =
                classical_opt::ensemble(obj, &method, n_runs, seed, cfg.experiment.delta)?;
            series.records = thin(&series.records, cfg.experiment.observe_every, s.steps);
            Ok((series, None))
        }
        Method::Nag => {
            let n = cfg.nag.as_ref().unwrap();
            let method = ClassicalMethod::Nag(NagConfig {
                s: n.s,
                steps: n.steps,
                y0_zero: n.y0_zero,
            });
            let n_runs = cfg.classical.clone().unwrap_or_default().n_runs;
            let mut series =
                classical_opt::ensemble(obj, &method, n_runs, seed, cfg.experiment.delta)?;
            series.records = thin(&series.records, cfg.experiment.observe_every, n.steps);
            Ok((series, None))
        }
        Method::HamFlow => {
            let ham = cfg.hamiltonian.as_ref().unwrap();
            let fl = cfg.flow.as_ref().unwrap();
            let p0 = fl.p0.clone().unwrap_or_else(|| vec![0.0; obj.dim]);
            let traj = classical_opt::ham_flow_rk4(
                obj, ham.alpha, ham.beta, ham.gamma, fl.form, &fl.x0, &p0, ham.t0, fl.dt,
                fl.n_steps,
            )?;
            let records: Vec<MetricsRecord> = traj
                .iter()
                .enumerate()
                .map(|(k, st)| {
                    let f = obj.f(&st.x);
                    MetricsRecord {
                        k,
                        t: st.t,
                        exp_f: f,
                        exp_gradnorm_sq: obj.gradnorm_sq(&st.x),
                        success_prob: if f - obj.f_min <= cfg.experiment.delta {
                            1.0
                        } else {
                            0.0
                        },
                        norm_drift: 0.0,
                        lyapunov: None,
                    }
                })
                .collect();
            let records = thin(&records, cfg.experiment.observe_every, fl.n_steps);
            Ok((
                MetricsSeries {
                    records,
                    delta: cfg.experiment.delta,
                    f_min: obj.f_min,
                    failed_runs: 0,
                    max_norm_drift: 0.0,
                },
                None,
            ))
        }
    }
}

/// Format a float with 17 significant digits (round-trip exact).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_series_csv(path: &Path, series: &MetricsSeries) -> Result<()> {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &series.records {
        let ly = r.lyapunov.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.k,
            fmt_f64(r.t),
            fmt_f64(r.exp_f),
            fmt_f64(r.exp_gradnorm_sq),
            fmt_f64(r.success_prob),
            fmt_f64(r.norm_drift),
            ly
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_density_csv(
    path: &Path,
    grid: &Arc<crate::spectral_mesh::Grid>,
    density: &[f64],
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let d = grid.dim();
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.push("density".into());
    writeln!(w, "{}", header.join(","))?;
    let mut pos = vec![0.0; d];
    for (flat, rho) in density.iter().enumerate() {
        grid.node_position(flat, &mut pos);
        let cols: Vec<String> = pos.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{},{}", cols.join(","), fmt_f64(*rho))?;
    }
    w.flush()?;
    Ok(())
}

/// Execute a parsed config. `out_override` and `seed_override` come from the
/// command line. Returns the output directory. Partial outputs are removed
/// if any stage fails.
pub fn cmd_run(
    cfg: &ExperimentConfig,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<PathBuf> {
    let start = Instant::now();
    let seed = seed_override.unwrap_or(cfg.experiment.seed);
    let out_dir: PathBuf = match out_override {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(
            cfg.experiment
                .output_dir
                .clone()
                .unwrap_or_else(|| "out".into()),
        ),
    };
    let obj = resolve_objective(cfg)?;
    let (series, density) = compute_series(cfg, seed, &obj)?;

    std::fs::create_dir_all(&out_dir)?;
    let mut created: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<()> {
        let series_path = out_dir.join("series.csv");
        created.push(series_path.clone());
        write_series_csv(&series_path, &series)?;
        if let Some((grid, rho)) = &density {
            let dens_path = out_dir.join("final_density.csv");
            created.push(dens_path.clone());
            write_density_csv(&dens_path, grid, rho)?;
        }
        let manifest = Manifest {
            tool: "qhd-lab",
            version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            seed_used: seed,
            objective: ObjectiveSummary {
                name: obj.name.clone(),
                dim: obj.dim,
                box_lo: obj.domain.lo().to_vec(),
                box_hi: obj.domain.hi().to_vec(),
                f_min: obj.f_min,
            },
            records_written: series.records.len(),
            failed_runs: series.failed_runs,
            max_norm_drift: series.max_norm_drift,
            wall_time_ms: start.elapsed().as_millis(),
        };
        let manifest_path = out_dir.join("manifest.json");
        created.push(manifest_path.clone());
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Cli(format!("manifest serialization: {e}")))?;
        std::fs::write(&manifest_path, json)?;
        Ok(())
    })();
    if let Err(e) = result {
        for p in &created {
            let _ = std::fs::remove_file(p);
        }
        return Err(e);
    }
    Ok(out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::parse_config_str;

    const QUANTUM: &str = r#"
[experiment]
objective = "convex_quartic"
method = "grad_qhd"
grid_n = 32
box_lo = -2.0
box_hi = 2.0
seed = 7

[hamiltonian]
alpha = -0.1
gamma = 5.0
t0 = 1.0
h = 0.2
steps = 25
"#;

    #[test]
    fn run_writes_expected_files_and_rows() {
        let cfg = parse_config_str(QUANTUM, "inline").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_run(&cfg, Some(dir.path()), None).unwrap();
        let csv = std::fs::read_to_string(out.join("series.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.count(), 25);
        let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
        assert!(manifest.contains("\"seed_used\": 7"));
        assert!(manifest.contains("\"delta\": 1.0")); // default echoed
        assert!(!out.join("final_density.csv").exists());
    }

    #[test]
    fn rerun_is_byte_identical() {
        let cfg = parse_config_str(QUANTUM, "inline").unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        cmd_run(&cfg, Some(d1.path()), None).unwrap();
        cmd_run(&cfg, Some(d2.path()), None).unwrap();
        let a = std::fs::read(d1.path().join("series.csv")).unwrap();
        let b = std::fs::read(d2.path().join("series.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn classical_and_flow_methods_run() {
        let sgdm = r#"
[experiment]
objective = "rastrigin"
method = "sgdm"
seed = 1
observe_every = 5

[sgdm]
steps = 20

[classical]
n_runs = 8
"#;
        let cfg = parse_config_str(sgdm, "inline").unwrap();
        let dir = tempfile::tempdir().unwrap();
        cmd_run(&cfg, Some(dir.path()), None).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 4); // header + k = 5,10,15,20

        let flow = r#"
[experiment]
objective = "convex_quartic"
method = "ham_flow"

[hamiltonian]
alpha = 0.05
t0 = 1.0
h = 0.01
steps = 1

[flow]
x0 = [1.0, -1.0]
dt = 0.01
n_steps = 50
"#;
        let cfg = parse_config_str(flow, "inline").unwrap();
        let dir = tempfile::tempdir().unwrap();
        cmd_run(&cfg, Some(dir.path()), None).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 50);
    }

    #[test]
    fn final_density_written_on_request() {
        let src = QUANTUM.replace("seed = 7", "seed = 7\nfinal_density = true");
        let cfg = parse_config_str(&src, "inline").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_run(&cfg, Some(dir.path()), None).unwrap();
        let dens = std::fs::read_to_string(out.join("final_density.csv")).unwrap();
        assert_eq!(dens.lines().next().unwrap(), "x0,x1,density");
        assert_eq!(dens.lines().count(), 1 + 32 * 32);
        // density sums to 1
        let total: f64 = dens
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn csv_floats_round_trip() {
        let v = std::f64::consts::PI / 3.0;
        let s = fmt_f64(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
    }
}
