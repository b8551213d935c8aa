//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use tpsim::emitter::{dressed_states, feature_catalog, mollow_peaks, unfiltered_g2, EmitterParams, TpsFeature};
use tpsim::filtered::{filtered_g2, filtered_g2_zero, FilterSpec};
use tpsim::maps::{cs_map, tps_map, MapKind, MapOptions, ProgressHook, SpectralMap2D};
use tpsim::oracle::{direct_g2_zero, OracleConfig};
use tpsim::postprocess::{convolve_irf, diffusion_average, DetuningJob, G2Job, SpectrumJob};
use tpsim::trace::CorrelationTrace;

use crate::config::{Format, RunConfig};
use crate::output::{csv_table, ensure_dir, format_g, path_for, write_file, write_json};
use crate::plot::{map_script, trace_script, MapPlot, TraceSeries};
use crate::{CliError, Command};

/// Relative sensor/oracle disagreement above which `validate` fails.
pub const VALIDATE_TOLERANCE: f64 = 0.05;
/// Time steps per fastest period for the direct integration.
pub const ORACLE_STEPS: f64 = 20.0;

#[derive(Serialize)]
struct Sidecar<'a, M: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    files: Vec<String>,
    result: M,
    wall_time_s: f64,
}

/// Files written by one command, for the sidecar and the console report.
struct Outputs<'a> {
    cfg: &'a RunConfig,
    command: Command,
    files: Vec<String>,
    started: Instant,
}

impl<'a> Outputs<'a> {
    fn new(cfg: &'a RunConfig, command: Command) -> Result<Self, CliError> {
        ensure_dir(&cfg.output.directory)?;
        Ok(Outputs {
            cfg,
            command,
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    fn dir(&self) -> &Path {
        &self.cfg.output.directory
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        write_file(&self.dir().join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        write_json(&self.dir().join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish<M: Serialize>(mut self, stem: &str, result: M, report: &mut String) -> Result<(), CliError> {
        let meta_name = format!("{stem}.meta.json");
        let sidecar = Sidecar {
            tool: "tpsim",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.name(),
            config: self.cfg,
            files: self.files.clone(),
            result,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        write_json(&path_for(self.dir(), stem, "meta.json"), &sidecar)?;
        self.files.push(meta_name);
        for f in &self.files {
            writeln!(report, "wrote {}", self.dir().join(f).display()).unwrap();
        }
        Ok(())
    }
}

/// Execute a subcommand; returns the console report.
pub fn run(command: Command, cfg: &RunConfig) -> Result<String, CliError> {
    match command {
        Command::Spectrum => spectrum(cfg),
        Command::G2tau => g2tau(cfg),
        Command::Tps => map(cfg, MapKind::Tps),
        Command::Csmap => map(cfg, MapKind::CsRatio),
        Command::Dressed => dressed(cfg),
        Command::Validate => validate(cfg),
    }
}

fn spectrum(cfg: &RunConfig) -> Result<String, CliError> {
    let axis = cfg.map_grid().axis();
    let bandwidth = cfg.grid.bandwidth_ghz;
    let job = SpectrumJob {
        params: cfg.emitter,
        bandwidth_ghz: bandwidth,
        nu_grid: axis,
        sensor: cfg.sensor.resolve(&[FilterSpec::new(0.0, bandwidth)?]),
    };
    let data = match cfg.post.diffusion() {
        Some(d) => diffusion_average(&job, &d)?,
        None => job.finish(job.evaluate(&cfg.emitter)?, None)?,
    };
    let mut warnings = Vec::new();
    if cfg.post.irf_fwhm_ps.is_some() {
        warnings.push("IRF acts on delays and is not applied to spectra".to_string());
    }

    let mut out = Outputs::new(cfg, Command::Spectrum)?;
    let rows: Vec<[f64; 2]> = data.iter().map(|(nu, v)| [*nu, *v]).collect();
    if cfg.wants(Format::Csv) {
        out.text("spectrum.csv", &csv_table("nu_ghz,intensity", rows.iter().map(|r| r.as_slice())))?;
    }
    if cfg.wants(Format::Json) {
        out.json("spectrum.json", &data)?;
    }
    if cfg.output.emit_plots {
        let script = trace_script(
            "spectrum.png",
            "nu - nu_L (GHz)",
            "normalized intensity",
            &[TraceSeries {
                csv: "spectrum.csv",
                title: "filtered spectrum",
            }],
            0.0,
        );
        out.text("spectrum.gp", &script)?;
    }
    #[derive(Serialize)]
    struct Meta {
        bandwidth_ghz: f64,
        diffusion: Option<tpsim::postprocess::DiffusionSpec>,
        warnings: Vec<String>,
    }
    let mut report = String::new();
    let peak = data.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    if let Some((nu, _)) = data.iter().find(|(_, v)| *v == peak) {
        writeln!(report, "peak intensity at nu = {} GHz", format_g(*nu)).unwrap();
    }
    out.finish(
        "spectrum",
        Meta {
            bandwidth_ghz: bandwidth,
            diffusion: cfg.post.diffusion(),
            warnings,
        },
        &mut report,
    )?;
    Ok(report)
}

fn g2_trace(cfg: &RunConfig, params: &EmitterParams, tau: &[f64]) -> Result<CorrelationTrace, CliError> {
    let trace = match cfg.filters.as_slice() {
        [] => {
            if cfg.post.diffusion_width_ghz.is_some() {
                return Err(CliError::Config(
                    "post.diffusion_width_ghz: diffusion averaging needs two filters".into(),
                ));
            }
            unfiltered_g2(params, tau)?
        }
        [f1, f2] => {
            let sensor = cfg.sensor.resolve(&cfg.filters);
            match cfg.post.diffusion() {
                Some(d) => {
                    let job = G2Job {
                        params: *params,
                        f1: *f1,
                        f2: *f2,
                        tau_grid: tau.to_vec(),
                        sensor,
                    };
                    diffusion_average(&job, &d)?
                }
                None => filtered_g2(params, f1, f2, tau, &sensor)?,
            }
        }
        _ => {
            return Err(CliError::Config(
                "filters: g2tau needs two filters (or none for the unfiltered trace)".into(),
            ))
        }
    };
    match cfg.post.irf() {
        Some(irf) => Ok(convolve_irf(&trace, &irf)?),
        None => Ok(trace),
    }
}

fn g2tau(cfg: &RunConfig) -> Result<String, CliError> {
    let tau_cfg = cfg
        .tau
        .as_ref()
        .ok_or_else(|| CliError::Config("tau: section required for g2tau".into()))?;
    let tau = tau_cfg.grid();
    let detunings = tau_cfg
        .detunings_ghz
        .clone()
        .unwrap_or_else(|| vec![cfg.emitter.detuning_ghz]);
    let traces = detunings
        .iter()
        .map(|d| g2_trace(cfg, &cfg.emitter.with_detuning(*d), &tau))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Outputs::new(cfg, Command::G2tau)?;
    let stems: Vec<String> = if traces.len() == 1 {
        vec!["g2tau".into()]
    } else {
        (0..traces.len()).map(|k| format!("g2tau_{k}")).collect()
    };
    for (stem, trace) in stems.iter().zip(&traces) {
        let rows: Vec<[f64; 2]> = trace.tau_ns.iter().zip(&trace.values).map(|(t, v)| [*t, *v]).collect();
        if cfg.wants(Format::Csv) {
            out.text(&format!("{stem}.csv"), &csv_table("tau_ns,g2", rows.iter().map(|r| r.as_slice())))?;
        }
        if cfg.wants(Format::Json) {
            out.json(&format!("{stem}.json"), trace)?;
        }
    }
    if cfg.output.emit_plots {
        let csvs: Vec<String> = stems.iter().map(|s| format!("{s}.csv")).collect();
        let titles: Vec<String> = detunings.iter().map(|d| format!("delta = {} GHz", format_g(*d))).collect();
        let series: Vec<TraceSeries> = csvs
            .iter()
            .zip(&titles)
            .map(|(csv, title)| TraceSeries { csv, title })
            .collect();
        let peak = traces
            .iter()
            .flat_map(|t| t.values.iter().copied())
            .fold(0.0, f64::max);
        out.text("g2tau.gp", &trace_script("g2tau.png", "tau (ns)", "g2(tau)", &series, peak.ceil().max(1.0)))?;
    }
    let mut report = String::new();
    for (d, t) in detunings.iter().zip(&traces) {
        if let Some((tau_max, g_max)) = t.argmax() {
            writeln!(
                report,
                "delta = {} GHz: max g2 = {} at tau = {} ns",
                format_g(*d),
                format_g(g_max),
                format_g(tau_max)
            )
            .unwrap();
        }
    }
    let metas: Vec<_> = traces.iter().map(|t| &t.meta).collect();
    out.finish("g2tau", metas, &mut report)?;
    Ok(report)
}

fn map(cfg: &RunConfig, kind: MapKind) -> Result<String, CliError> {
    let bandwidth = cfg.grid.bandwidth_ghz;
    let progress: ProgressHook = Arc::new(|done, total| {
        if done == total || done % (total / 10).max(1) == 0 {
            eprintln!("  {done}/{total} points");
        }
    });
    let options = MapOptions {
        workers: cfg.workers,
        irf: cfg.post.irf(),
        diffusion: cfg.post.diffusion(),
        sensor: Some(cfg.sensor.resolve(&[FilterSpec::new(0.0, bandwidth)?])),
        max_grid: cfg.grid.max_points,
        progress: Some(progress),
    };
    let grid = cfg.map_grid();
    let result = match kind {
        MapKind::Tps => tps_map(&cfg.emitter, bandwidth, &grid, &options)?,
        MapKind::CsRatio => cs_map(&cfg.emitter, bandwidth, &grid, &options)?,
    };
    let stem = match kind {
        MapKind::Tps => "tps",
        MapKind::CsRatio => "csmap",
    };
    write_map(cfg, &result, stem)
}

fn write_map(cfg: &RunConfig, map: &SpectralMap2D, stem: &str) -> Result<String, CliError> {
    let command = match map.kind {
        MapKind::Tps => Command::Tps,
        MapKind::CsRatio => Command::Csmap,
    };
    let mut out = Outputs::new(cfg, command)?;
    let csv_name = format!("{stem}.csv");
    if cfg.wants(Format::Csv) {
        let rows: Vec<[f64; 3]> = map
            .points()
            .map(|(a, b, v)| [a, b, v.unwrap_or(f64::NAN)])
            .collect();
        out.text(&csv_name, &csv_table("nu1_ghz,nu2_ghz,value", rows.iter().map(|r| r.as_slice())))?;
    }
    if cfg.wants(Format::Json) {
        // timings live in the sidecar so that data files are reproducible
        #[derive(Serialize)]
        struct MapData<'m> {
            kind: MapKind,
            nu1_grid_ghz: &'m [f64],
            nu2_grid_ghz: &'m [f64],
            values: &'m [Option<f64>],
        }
        let data = MapData {
            kind: map.kind,
            nu1_grid_ghz: &map.nu1_grid_ghz,
            nu2_grid_ghz: &map.nu2_grid_ghz,
            values: &map.values,
        };
        out.json(&format!("{stem}.json"), &data)?;
    }
    let features: Vec<TpsFeature> = feature_catalog(&cfg.emitter).unwrap_or_default();
    let sideband = mollow_peaks(&cfg.emitter).map(|p| p[2]).unwrap_or(cfg.emitter.rabi_ghz);
    let log_span = map
        .values
        .iter()
        .flatten()
        .filter(|v| **v > 0.0)
        .map(|v| v.log10().abs())
        .fold(0.0, f64::max);
    if cfg.output.emit_plots {
        let script = map_script(&MapPlot {
            kind: map.kind,
            csv: &csv_name,
            png: &format!("{stem}.png"),
            range_ghz: cfg.map_grid().range_ghz,
            sideband_ghz: sideband,
            features: &features,
            log_span,
        });
        out.text(&format!("{stem}.gp"), &script)?;
    }
    let mut report = String::new();
    let max = map.values.iter().flatten().copied().fold(f64::NAN, f64::max);
    let min = map.values.iter().flatten().copied().fold(f64::NAN, f64::min);
    writeln!(
        report,
        "{}x{} map: min {} max {}, {} masked, {:.2} s on {} worker(s)",
        map.rows(),
        map.cols(),
        format_g(min),
        format_g(max),
        map.meta.masked,
        map.meta.wall_time_s,
        map.meta.workers
    )
    .unwrap();
    out.finish(stem, &map.meta, &mut report)?;
    Ok(report)
}

fn dressed(cfg: &RunConfig) -> Result<String, CliError> {
    let d = dressed_states(&cfg.emitter)?;
    let peaks = mollow_peaks(&cfg.emitter)?;
    let catalog = feature_catalog(&cfg.emitter).unwrap_or_default();
    let mut report = String::new();
    writeln!(report, "c = {}", format_g(d.c)).unwrap();
    writeln!(report, "s = {}", format_g(d.s)).unwrap();
    writeln!(report, "omega_prime_ghz = {}", format_g(d.omega_prime_ghz)).unwrap();
    let peaks_txt: Vec<String> = peaks.iter().map(|p| format_g(*p)).collect();
    writeln!(report, "mollow_peaks_ghz = [{}]", peaks_txt.join(", ")).unwrap();
    for f in &catalog {
        writeln!(
            report,
            "{:6} {:?} ({}, {}) {:?}",
            f.label,
            f.class,
            format_g(f.nu1_ghz),
            format_g(f.nu2_ghz),
            f.expected
        )
        .unwrap();
    }
    #[derive(Serialize)]
    struct Dressed {
        c: f64,
        s: f64,
        omega_prime_ghz: f64,
        mollow_peaks_ghz: [f64; 3],
        catalog: Vec<TpsFeature>,
    }
    let result = Dressed {
        c: d.c,
        s: d.s,
        omega_prime_ghz: d.omega_prime_ghz,
        mollow_peaks_ghz: peaks,
        catalog,
    };
    let mut out = Outputs::new(cfg, Command::Dressed)?;
    if cfg.wants(Format::Json) {
        out.json("dressed.json", &result)?;
    }
    out.finish("dressed", (), &mut report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub nu1_ghz: f64,
    pub nu2_ghz: f64,
    pub sensor: f64,
    pub oracle: f64,
    pub relative_difference: f64,
}

/// Default cross-check points in units of the generalized Rabi frequency.
pub const VALIDATE_POINTS: [(f64, f64); 6] = [(0.0, 0.0), (1.0, 1.0), (1.0, -1.0), (0.5, 0.5), (0.0, 1.0), (0.5, -0.5)];

pub fn compare_point(cfg: &RunConfig, nu1: f64, nu2: f64) -> Result<Comparison, CliError> {
    let f1 = FilterSpec::new(nu1, cfg.grid.bandwidth_ghz)?;
    let f2 = FilterSpec::new(nu2, cfg.grid.bandwidth_ghz)?;
    let (sensor, _) = filtered_g2_zero(&cfg.emitter, &f1, &f2, &cfg.sensor.resolve(&[f1, f2]))?;
    let oracle = direct_g2_zero(&cfg.emitter, &f1, &f2, &OracleConfig::for_point(&cfg.emitter, &f1, &f2, ORACLE_STEPS))?.g2;
    Ok(Comparison {
        nu1_ghz: nu1,
        nu2_ghz: nu2,
        sensor,
        oracle,
        relative_difference: (sensor - oracle).abs() / oracle.abs(),
    })
}

fn validate(cfg: &RunConfig) -> Result<String, CliError> {
    let w = cfg.emitter.generalized_rabi_ghz();
    let rows = VALIDATE_POINTS
        .iter()
        .map(|(a, b)| compare_point(cfg, a * w, b * w))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Outputs::new(cfg, Command::Validate)?;
    if cfg.wants(Format::Csv) {
        let table: Vec<[f64; 5]> = rows
            .iter()
            .map(|r| [r.nu1_ghz, r.nu2_ghz, r.sensor, r.oracle, r.relative_difference])
            .collect();
        out.text(
            "validate.csv",
            &csv_table("nu1_ghz,nu2_ghz,sensor_g2,oracle_g2,rel_diff", table.iter().map(|r| r.as_slice())),
        )?;
    }
    if cfg.wants(Format::Json) {
        out.json("validate.json", &rows)?;
    }
    let mut report = String::new();
    for r in &rows {
        writeln!(
            report,
            "({:>8}, {:>8}) GHz  sensor {:>12}  oracle {:>12}  rel diff {:.2e}  {}",
            format_g(r.nu1_ghz),
            format_g(r.nu2_ghz),
            format_g(r.sensor),
            format_g(r.oracle),
            r.relative_difference,
            if r.relative_difference <= VALIDATE_TOLERANCE { "ok" } else { "DISAGREE" }
        )
        .unwrap();
    }
    let worst = rows.iter().map(|r| r.relative_difference).fold(0.0, f64::max);
    out.finish("validate", &rows, &mut report)?;
    if worst > VALIDATE_TOLERANCE {
        return Err(CliError::Disagreement(format!(
            "worst relative difference {worst:.3e} exceeds {VALIDATE_TOLERANCE}\n{report}"
        )));
    }
    writeln!(report, "{} points agree within {}", rows.len(), VALIDATE_TOLERANCE).unwrap();
    Ok(report)
}
