use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cloner_core::channel::{apply_cloner, fock_oracle_cloner, ClonerConfig};
use cloner_core::format::fmt_f64;
use cloner_core::metrics::{covariance_matrix, evaluate, CloneMetrics};
use cloner_core::montecarlo::{reherald, run_experiment_filtered, ExperimentData, LoSchedule};
use cloner_core::optimizer::{run_sweep, write_sweep_csv, x_stability_report, SweepSpec, XGrid};
use cloner_core::states::{default_dim, ensemble_to_density, wigner, wigner_fock, GridSpec};
use cloner_core::tomography::{fidelity_between, maxlik_reconstruct, BinningSpec, QuadratureSampleSet};
use cloner_core::{ClonerError, Result};
use serde::Serialize;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::{Backend, Cli, Command, GlobalOpts, Schedule};

fn config_error(path: &Path, e: ClonerError) -> ClonerError {
    match e {
        ClonerError::Io(io) => ClonerError::InvalidParameter(format!("cannot read {}: {io}", path.display())),
        ClonerError::Json(j) => ClonerError::InvalidParameter(format!("{}: {j}", path.display())),
        other => other,
    }
}

fn load_config(path: &Path, global: &GlobalOpts) -> Result<ClonerConfig> {
    let text = fs::read_to_string(path).map_err(|e| config_error(path, e.into()))?;
    let mut cfg = ClonerConfig::from_json(&text).map_err(|e| config_error(path, e))?;
    if let Some(k) = global.ring_points {
        cfg = cfg.with_ring_points(k);
        cfg.validate()?;
    }
    Ok(cfg)
}

fn load_sweep(path: &Path, global: &GlobalOpts) -> Result<SweepSpec> {
    let text = fs::read_to_string(path).map_err(|e| config_error(path, e.into()))?;
    let mut spec: SweepSpec = serde_json::from_str(&text).map_err(|e| config_error(path, e.into()))?;
    if let Some(k) = global.ring_points {
        spec.ring_points = k;
    }
    spec.validate()?;
    Ok(spec)
}

/// Collects named outputs. With `--out` they go to files in that directory
/// together with a manifest; without it the primary output goes to stdout.
struct Output<'a> {
    cli: &'a Cli,
    command: &'static str,
    config_path: Option<PathBuf>,
    files: Vec<(String, Vec<u8>)>,
    summary: serde_json::Value,
}

impl<'a> Output<'a> {
    fn new(cli: &'a Cli, command: &'static str, config_path: Option<&Path>) -> Self {
        Self {
            cli,
            command,
            config_path: config_path.map(Path::to_path_buf),
            files: Vec::new(),
            summary: json!({}),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let Some(dir) = &self.cli.global.out else {
            if let Some((_, bytes)) = self.files.first() {
                std::io::stdout().write_all(bytes)?;
            }
            return Ok(());
        };
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        self.manifest(dir, self.files.iter().map(|f| f.0.clone()).collect()).write(dir)
    }

    fn manifest(&self, dir: &Path, outputs: Vec<String>) -> RunManifest {
        let g = &self.cli.global;
        RunManifest {
            command: self.command.to_string(),
            config_path: self.config_path.clone(),
            output_dir: dir.to_path_buf(),
            seed: g.seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            args: std::env::args().collect(),
            threads: g.threads,
            fock_dim: g.fock_dim,
            ring_points: g.ring_points,
            outputs,
            summary: self.summary.clone(),
        }
    }
}

fn require_out<'c>(cli: &'c Cli, command: &str) -> Result<&'c Path> {
    cli.global
        .out
        .as_deref()
        .ok_or_else(|| ClonerError::InvalidParameter(format!("{command} needs --out DIR")))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Clone { config, oracle } => cmd_clone(cli, config, *oracle),
        Command::Sweep { config } => cmd_sweep(cli, config),
        Command::Covar { config, max_threshold } => cmd_covar(cli, config, *max_threshold),
        Command::Wigner {
            config,
            threshold,
            half_width,
            points,
            backend,
        } => cmd_wigner(cli, config, *threshold, *half_width, *points, *backend),
        Command::Stability {
            config,
            gain,
            max_threshold,
        } => cmd_stability(cli, config, *gain, *max_threshold),
        Command::Mc {
            config,
            pulses,
            schedule,
            period,
            min_stored,
        } => cmd_mc(cli, config, *pulses, *schedule, *period, *min_stored),
        Command::Reherald { data, thresholds } => cmd_reherald(cli, data, thresholds),
        Command::Tomo {
            data,
            threshold,
            clone,
            max_iters,
            tol,
            theta_bins,
            x_bins,
        } => cmd_tomo(
            cli,
            data,
            *threshold,
            *clone,
            *max_iters,
            *tol,
            BinningSpec {
                n_theta_bins: *theta_bins,
                n_x_bins: *x_bins,
                x_range: None,
            },
        ),
    }
}

#[derive(Serialize)]
struct OracleReport {
    dim: usize,
    success_probability: f64,
    fidelity: f64,
    truncation_deficit: f64,
}

#[derive(Serialize)]
struct CloneReport {
    config: ClonerConfig,
    metrics: CloneMetrics,
    clone_mean_x: f64,
    clone_mean_p: f64,
    fock_oracle: Option<OracleReport>,
}

fn cmd_clone(cli: &Cli, path: &Path, with_oracle: bool) -> Result<()> {
    let cfg = load_config(path, &cli.global)?;
    let metrics = evaluate(&cfg)?;
    let clone = apply_cloner(&cfg)?.clone_ensemble();
    let q = clone.quadrature_stats();
    let fock_oracle = if with_oracle {
        let dim = if cli.global.fock_dim > 0 {
            cli.global.fock_dim
        } else {
            default_dim(clone.max_photon_number())
        };
        let o = fock_oracle_cloner(&cfg, dim, false)?;
        Some(OracleReport {
            dim,
            success_probability: o.success_probability,
            fidelity: o.clone.fidelity_with_coherent(cfg.alpha)?,
            truncation_deficit: o.truncation_deficit,
        })
    } else {
        None
    };
    let report = CloneReport {
        config: cfg,
        metrics,
        clone_mean_x: q.mean_x,
        clone_mean_p: q.mean_p,
        fock_oracle,
    };
    let mut out = Output::new(cli, "clone", Some(path));
    out.summary = json!({ "fidelity": metrics.fidelity, "success_probability": metrics.success_probability });
    out.add_json("metrics.json", &report)?;
    out.finish()
}

fn cmd_sweep(cli: &Cli, path: &Path) -> Result<()> {
    let spec = load_sweep(path, &cli.global)?;
    let rows = run_sweep(&spec)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    for r in rows.iter().filter(|r| r.error.is_some()) {
        log::warn!("alpha {} M {}: {}", r.alpha, r.threshold, r.error.as_deref().unwrap_or(""));
    }
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv)?;
    let mut out = Output::new(cli, "sweep", Some(path));
    out.summary =
        json!({ "rows": rows.len(), "failed_rows": failed, "benchmark_beaten": rows.iter().filter(|r| r.beats_phase_benchmark).count() });
    out.add("sweep.csv", csv);
    out.add_json("sweep.json", &rows)?;
    out.finish()
}

fn cmd_covar(cli: &Cli, path: &Path, max_threshold: u32) -> Result<()> {
    let cfg = load_config(path, &cli.global)?;
    let mut w = csv_writer();
    w.write_record(["M", "cov_x1x2", "cov_p1p2", "cov_x1p2", "cov_p1x2", "success_probability", "status"])
        .map_err(ClonerError::from)?;
    let mut unheraldable = 0;
    for m in 0..=max_threshold {
        let record = match apply_cloner(&cfg.with_threshold(m)) {
            Ok(outp) => {
                let c = covariance_matrix(&outp)?;
                let s = outp.success_probability.unwrap_or(f64::NAN);
                [
                    m.to_string(),
                    fmt_f64(c.cov_x1x2),
                    fmt_f64(c.cov_p1p2),
                    fmt_f64(c.cov_x1p2),
                    fmt_f64(c.cov_p1x2),
                    fmt_f64(s),
                    "ok".into(),
                ]
            }
            Err(ClonerError::Unheraldable) => {
                unheraldable += 1;
                let nan = f64::NAN.to_string();
                [
                    m.to_string(),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    "0".into(),
                    "unheraldable".into(),
                ]
            }
            Err(e) => return Err(e),
        };
        w.write_record(record).map_err(ClonerError::from)?;
    }
    let mut out = Output::new(cli, "covar", Some(path));
    out.summary = json!({ "max_threshold": max_threshold, "unheraldable_rows": unheraldable });
    out.add("covariance.csv", finish_csv(w)?);
    out.finish()
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| ClonerError::Io(e.into_error()))
}

fn cmd_wigner(cli: &Cli, path: &Path, threshold: Option<u32>, half_width: f64, points: usize, backend: Backend) -> Result<()> {
    let mut cfg = load_config(path, &cli.global)?;
    if let Some(m) = threshold {
        cfg = cfg.with_threshold(m);
    }
    let clone = apply_cloner(&cfg)?.clone_ensemble();
    let grid = GridSpec::square(half_width, points);
    let (w, dim) = match backend {
        Backend::Ensemble => (wigner(&clone, &grid)?, None),
        Backend::Fock => {
            let dim = if cli.global.fock_dim > 0 {
                cli.global.fock_dim
            } else {
                default_dim(clone.max_photon_number())
            };
            (wigner_fock(&ensemble_to_density(&clone, dim)?, &grid)?, Some(dim))
        }
    };
    let mut csv = Vec::new();
    w.write_csv(&mut csv)?;
    let (px, pp, pv) = w.peak();
    let mut out = Output::new(cli, "wigner", Some(path));
    out.summary = json!({ "threshold": cfg.threshold, "grid_integral": w.integral(), "peak": [px, pp, pv], "fock_dim": dim });
    out.add("wigner.csv", csv);
    out.finish()
}

fn cmd_stability(cli: &Cli, path: &Path, gain: f64, max_threshold: u32) -> Result<()> {
    let cfg = load_config(path, &cli.global)?;
    let thresholds: Vec<u32> = (0..=max_threshold).collect();
    let report = x_stability_report(&cfg, gain, &thresholds, &XGrid::default())?;
    let mut out = Output::new(cli, "stability", Some(path));
    out.summary = json!({ "spread": report.spread });
    out.add_json("stability.json", &report)?;
    out.finish()
}

fn cmd_mc(cli: &Cli, path: &Path, pulses: u64, schedule: Schedule, period: u64, min_stored: u64) -> Result<()> {
    let dir = require_out(cli, "mc")?;
    let cfg = load_config(path, &cli.global)?;
    let schedule = match schedule {
        Schedule::Harmonic => LoSchedule::Harmonic { period },
        Schedule::Uniform => LoSchedule::Uniform,
        Schedule::Locked => LoSchedule::Locked,
    };
    let data = run_experiment_filtered(&cfg, pulses, cli.global.seed, schedule, min_stored)?;
    data.write_dir(dir)?;
    let mut out = Output::new(cli, "mc", Some(path));
    out.summary = json!({ "n_pulses": pulses, "stored_pulses": data.pulses.len(), "schedule": schedule, "min_stored_count": min_stored });
    let outputs = [
        cloner_core::montecarlo::HEADER_FILE,
        cloner_core::montecarlo::PULSES_FILE,
        cloner_core::montecarlo::HOMODYNE_FILE,
    ];
    out.manifest(dir, outputs.iter().map(|s| s.to_string()).collect()).write(dir)
}

fn cmd_reherald(cli: &Cli, data_dir: &Path, thresholds: &[u64]) -> Result<()> {
    let data = ExperimentData::read_dir(data_dir).map_err(|e| config_error(data_dir, e))?;
    let mut w = csv_writer();
    w.write_record([
        "M",
        "n_heralded",
        "success_rate",
        "success_rate_se",
        "fidelity",
        "fidelity_se",
        "cov_x1x2",
        "cov_p1p2",
        "cov_x1p2",
        "cov_p1x2",
    ])
    .map_err(ClonerError::from)?;
    for &m in thresholds {
        let view = reherald(&data, m)?;
        let rate = view.success_rate();
        let (f, fse) = view.fidelity().map(|e| (e.value, e.standard_error)).unwrap_or((f64::NAN, f64::NAN));
        let cov = view.covariance().ok().map(|c| c.covariance);
        let c = |g: fn(&cloner_core::metrics::CovarianceReport) -> f64| fmt_f64(cov.as_ref().map_or(f64::NAN, g));
        w.write_record([
            m.to_string(),
            view.len().to_string(),
            fmt_f64(rate.value),
            fmt_f64(rate.standard_error),
            fmt_f64(f),
            fmt_f64(fse),
            c(|r| r.cov_x1x2),
            c(|r| r.cov_p1p2),
            c(|r| r.cov_x1p2),
            c(|r| r.cov_p1x2),
        ])
        .map_err(ClonerError::from)?;
    }
    let mut out = Output::new(cli, "reherald", Some(data_dir));
    out.summary = json!({ "n_pulses": data.n_pulses, "thresholds": thresholds });
    out.add("reherald.csv", finish_csv(w)?);
    out.finish()
}

#[derive(Serialize)]
struct TomoSummary {
    threshold: u64,
    clone: u8,
    dim: usize,
    n_samples: usize,
    iterations_used: usize,
    converged: bool,
    final_log_likelihood: f64,
    /// Uhlmann fidelity with the model state of the stored configuration.
    truth_fidelity: Option<f64>,
}

/// Dimension from the mean photon number estimated as `<x^2> - 1/2` over the samples.
fn auto_tomo_dim(samples: &[(f64, f64)]) -> usize {
    let second = samples.iter().map(|s| s.1 * s.1).sum::<f64>() / samples.len() as f64;
    default_dim((second - 0.5).max(0.0))
}

fn cmd_tomo(cli: &Cli, data_dir: &Path, threshold: u64, clone: u8, max_iters: usize, tol: f64, binning: BinningSpec) -> Result<()> {
    require_out(cli, "tomo")?;
    let data = ExperimentData::read_dir(data_dir).map_err(|e| config_error(data_dir, e))?;
    let view = reherald(&data, threshold)?;
    let samples = view.clone_samples(clone)?;
    if samples.is_empty() {
        return Err(ClonerError::InsufficientSamples(format!("no pulses pass threshold {threshold}")));
    }
    let dim = if cli.global.fock_dim > 0 {
        cli.global.fock_dim
    } else {
        auto_tomo_dim(&samples)
    };
    let set = QuadratureSampleSet::new(samples)?.with_binning(binning)?;
    let res = maxlik_reconstruct(&set, dim, max_iters, tol)?;
    let truth_fidelity = u32::try_from(threshold)
        .ok()
        .and_then(|m| apply_cloner(&data.config.with_threshold(m)).ok())
        .and_then(|o| ensemble_to_density(&o.clone_ensemble(), dim).ok())
        .map(|truth| fidelity_between(&res.rho, &truth))
        .transpose()?;
    let summary = TomoSummary {
        threshold,
        clone,
        dim,
        n_samples: set.len(),
        iterations_used: res.iterations_used,
        converged: res.converged,
        final_log_likelihood: res.log_likelihood_trace.last().copied().unwrap_or(f64::NAN),
        truth_fidelity,
    };
    let mut trace = Vec::new();
    res.write_trace_csv(&mut trace)?;
    let mut out = Output::new(cli, "tomo", Some(data_dir));
    out.summary = serde_json::to_value(&summary)?;
    out.add_json("tomo.json", &summary)?;
    out.add_json("rho.json", &res.rho)?;
    out.add("likelihood.csv", trace);
    out.finish()
}
