//! The `toa-sim` command-line tool.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use log::warn;
use rayon::prelude::*;

use crate::arrival::{deconvolve, free_flux, kijowski_density, normalize, resolution_warning};
use crate::config::{fmt, BackendChoice, PiRoute, RunConfig};
use crate::dynamics::{ridge_photon_density, Backend, PacketEvolution, SpatialDomain};
use crate::error::{Error, Result};
use crate::model::ValidatedConfig;
use crate::packet::KGrid;
use crate::regime::{classify, critical_temperature, reflection_boundary_velocity, ridge_omega, ridge_velocity, width_boundary_velocity};
use crate::scattering::absorption_at;
use crate::series::{DistributionKind, DistributionSeries, TimeGrid, TimeSeries};
use crate::transfer::absorption_profile;

#[derive(Debug, Parser)]
#[command(name = "toa-sim", version, about = "Fluorescence time-of-arrival simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// `key = value` configuration file, applied on top of the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named parameter set (fig1 .. fig7).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// Override a single key, e.g. `--set omega=1e8`. Applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Analytic,
    Transfer,
}

#[derive(Debug, Clone, Copy, Subcommand, PartialEq, Eq)]
pub enum Command {
    /// Absorption probability on a (v, Ω) grid.
    AbsorptionMap,
    /// Absorption along lines of constant Ω, with ridge markers.
    AbsorptionCut,
    /// Boundary curves and ridge lines in the (v, Ω) plane.
    Plane,
    /// Critical temperature against beam width.
    CriticalTemperature,
    /// J, Π, Π_id and Π_K of a wave packet.
    Distributions,
    /// Regime classification of one velocity.
    Regime,
}

/// Runs the tool and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Builds the run configuration from preset, file, flags and overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.preset {
        Some(p) => RunConfig::preset(p)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    if let Some(b) = cli.backend {
        cfg.backend = match b {
            BackendArg::Analytic => BackendChoice::Analytic,
            BackendArg::Transfer => BackendChoice::Transfer,
        };
    }
    for o in &cli.overrides {
        cfg.set_pair(o)?;
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    if cli.jobs == Some(0) {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let mut out: Box<dyn Write + Send> = match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    };
    pool.install(|| dispatch(cli.command, &cfg, &mut out, cli.out.is_some()))?;
    out.flush()?;
    Ok(())
}

fn dispatch(cmd: Command, cfg: &RunConfig, out: &mut dyn Write, to_file: bool) -> Result<()> {
    match cmd {
        Command::AbsorptionMap => absorption_map(cfg, out),
        Command::AbsorptionCut => absorption_cut(cfg, out),
        Command::Plane => plane(cfg, out),
        Command::CriticalTemperature => temperature(cfg, out),
        Command::Distributions => distributions(cfg, out),
        Command::Regime => regime(cfg, out, to_file),
    }
}

fn header(out: &mut dyn Write, command: &str, cfg: &RunConfig) -> Result<()> {
    writeln!(out, "# toa-sim {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "# command: {command}")?;
    for (k, v) in cfg.to_pairs() {
        writeln!(out, "# {k}: {v}")?;
    }
    Ok(())
}

/// Absorption at one (v, Ω) point with the configured backend.
pub fn absorption_point(cfg: &RunConfig, v: f64, omega: f64) -> Result<f64> {
    let phys = cfg.physics_at(omega)?;
    match backend_for(cfg, &phys)? {
        Backend::Analytic => absorption_at(&phys, v),
        Backend::Transfer { slices } => absorption_profile(&phys, v, slices),
    }
}

fn backend_for(cfg: &RunConfig, phys: &ValidatedConfig) -> Result<Backend> {
    let sharp = phys.profile().is_sharp();
    match cfg.backend {
        BackendChoice::Analytic if !sharp => Err(Error::Config("the analytic backend needs profile = sharp".into())),
        BackendChoice::Analytic => Ok(Backend::Analytic),
        BackendChoice::Transfer => Ok(Backend::Transfer { slices: cfg.slices.max(1) }),
        BackendChoice::Auto if sharp => Ok(Backend::Analytic),
        BackendChoice::Auto => Ok(Backend::Transfer { slices: cfg.slices.max(1) }),
    }
}

fn point_cells(r: &Result<f64>) -> (String, &'static str) {
    match r {
        Ok(a) => (fmt(*a), "ok"),
        Err(e) => ("nan".into(), e.code()),
    }
}

fn absorption_map(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let (vs, omegas) = cfg.map_axes()?;
    cfg.physics_at(omegas[0])?;
    backend_for(cfg, &cfg.physics_at(omegas[0])?)?;
    let points: Vec<(f64, f64)> = vs.iter().flat_map(|&v| omegas.iter().map(move |&o| (v, o))).collect();
    let values: Vec<Result<f64>> = points.par_iter().map(|&(v, o)| absorption_point(cfg, v, o)).collect();
    header(out, "absorption-map", cfg)?;
    writeln!(out, "v_m_s,omega_1_s,absorption,error")?;
    for ((v, o), r) in points.iter().zip(&values) {
        let (a, code) = point_cells(r);
        writeln!(out, "{},{},{a},{code}", fmt(*v), fmt(*o))?;
    }
    Ok(())
}

fn absorption_cut(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let vs = cfg.velocity_axis()?;
    let cuts = if cfg.cut_omegas.is_empty() { vec![cfg.omega] } else { cfg.cut_omegas.clone() };
    for &o in &cuts {
        backend_for(cfg, &cfg.physics_at(o)?)?;
    }
    header(out, "absorption-cut", cfg)?;
    writeln!(out, "omega_1_s,v_m_s,absorption,error,ridge")?;
    for &o in &cuts {
        let values: Vec<Result<f64>> = vs.par_iter().map(|&v| absorption_point(cfg, v, o)).collect();
        let mut marks = vec![String::new(); vs.len()];
        if cfg.mark_ridges && vs.len() > 1 {
            let step = (vs[vs.len() - 1] - vs[0]) / (vs.len() - 1) as f64;
            for n in 0..=cfg.ridge_max {
                let vn = ridge_velocity(cfg.beam_width, o, n);
                if vn < vs[0] - 0.5 * step || vn > vs[vs.len() - 1] + 0.5 * step {
                    continue;
                }
                let i = (((vn - vs[0]) / step).round().max(0.0) as usize).min(vs.len() - 1);
                marks[i] = n.to_string();
            }
        }
        for ((v, r), m) in vs.iter().zip(&values).zip(&marks) {
            let (a, code) = point_cells(r);
            writeln!(out, "{},{},{a},{code},{m}", fmt(o), fmt(*v))?;
        }
    }
    Ok(())
}

fn plane(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let (vs, omegas) = cfg.map_axes()?;
    cfg.physics()?;
    let (l, g, m) = (cfg.beam_width, cfg.gamma, cfg.mass);
    header(out, "plane", cfg)?;
    writeln!(out, "curve,n,v_m_s,omega_1_s")?;
    for &o in &omegas {
        writeln!(out, "width_boundary,,{},{}", fmt(width_boundary_velocity(l, g, o)), fmt(o))?;
    }
    for &o in &omegas {
        writeln!(out, "reflection_boundary,,{},{}", fmt(reflection_boundary_velocity(m, o)), fmt(o))?;
    }
    for n in 0..=cfg.ridge_max {
        for &v in &vs {
            writeln!(out, "ridge,{n},{},{}", fmt(v), fmt(ridge_omega(l, v, n)))?;
        }
    }
    Ok(())
}

fn temperature(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let ls = cfg.width_axis()?;
    cfg.physics()?;
    header(out, "critical-temperature", cfg)?;
    writeln!(out, "beam_width_m,critical_temperature_K")?;
    for l in ls {
        writeln!(out, "{},{}", fmt(l), fmt(critical_temperature(l, cfg.gamma, cfg.mass)))?;
    }
    Ok(())
}

/// All distribution columns on one time grid.
#[derive(Debug, Clone)]
pub struct DistributionSet {
    pub flux: DistributionSeries,
    pub pi: DistributionSeries,
    pub ideal: DistributionSeries,
    pub ideal_normalized: DistributionSeries,
    pub kijowski: DistributionSeries,
    pub warnings: Vec<String>,
}

pub fn compute_distributions(cfg: &RunConfig) -> Result<DistributionSet> {
    let spec = cfg.packet()?;
    let phys = cfg.physics()?;
    if cfg.n_t < 2 || !(cfg.t_max > cfg.t_min) {
        return Err(Error::Config(format!("time axis needs t_max > t_min and n_t >= 2, got [{}, {}] with {}", cfg.t_min, cfg.t_max, cfg.n_t)));
    }
    if cfg.k_nodes < 2 {
        return Err(Error::Config("k_nodes must be at least 2".into()));
    }
    let times = TimeGrid::spanning(cfg.t_min, cfg.t_max, cfg.n_t)?;
    let x_eval = cfg.eval_point.unwrap_or(cfg.beam_width);
    let domain = SpatialDomain::covering(&spec, &phys, cfg.t_min, cfg.t_max);
    let grid = KGrid::resolving(&spec, cfg.k_nodes, domain.phase_extent(&spec, cfg.t_min, cfg.t_max))?;
    let mut warnings = Vec::new();

    let flux = free_flux(&spec, &grid, x_eval, &times);
    let kijowski = kijowski_density(&spec, &grid, x_eval, &times);

    let zero = || TimeSeries::on(&times, vec![0.0; times.len]);
    let coupled = phys.gamma() > 0.0 && phys.profile().peak(phys.beam_width()) > 0.0;
    let pi_series = if !coupled {
        zero()?
    } else {
        match cfg.pi_route {
            PiRoute::Exact => {
                let backend = backend_for(cfg, &phys)?;
                let mut ev = PacketEvolution::new(spec.clone(), phys.clone(), grid.clone(), backend)?;
                ev.first_photon_density(&times, &domain)?.pi
            }
            PiRoute::Ridge => {
                let r = ridge_photon_density(&spec, &phys, &grid, &times)?;
                warnings.extend(r.warnings);
                r.series
            }
        }
    };
    let pi = DistributionSeries::new(DistributionKind::Observed, pi_series);
    let (ideal, ideal_normalized) = if coupled {
        if let Some(w) = resolution_warning(&pi.series, phys.gamma()) {
            warnings.push(w);
        }
        let ideal = deconvolve(&pi, phys.gamma(), cfg.deconvolution)?;
        let normalized = match normalize(&ideal) {
            Ok(n) => n,
            Err(Error::ZeroIntegral) => DistributionSeries::new(DistributionKind::Ideal, zero()?),
            Err(e) => return Err(e),
        };
        (ideal, normalized)
    } else {
        (DistributionSeries::new(DistributionKind::Ideal, zero()?), DistributionSeries::new(DistributionKind::Ideal, zero()?))
    };
    if cfg.pi_route == PiRoute::Exact && phys.omega() > 0.0 {
        let report = classify(&phys, spec.mean_velocity(&grid), cfg.t_max - cfg.t_min, cfg.much_less)?;
        for t in report.failing_terms().into_iter().filter(|t| t.chain == "ideal") {
            let w = format!("regime condition not met: {} (margin {:.3e})", t.name, t.margin);
            warn!("{w}");
            warnings.push(w);
        }
    }
    Ok(DistributionSet { flux, pi, ideal, ideal_normalized, kijowski, warnings })
}

fn distributions(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let d = compute_distributions(cfg)?;
    header(out, "distributions", cfg)?;
    if let Some(raw) = d.ideal_normalized.raw_integral {
        writeln!(out, "# pi_id_raw_integral: {}", fmt(raw))?;
    }
    for w in &d.warnings {
        writeln!(out, "# warning: {w}")?;
    }
    writeln!(out, "t_s,J,Pi,Pi_id,Pi_id_normalized,Pi_K")?;
    for i in 0..d.flux.series.len() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt(d.flux.series.time(i)),
            fmt(d.flux.values()[i]),
            fmt(d.pi.values()[i]),
            fmt(d.ideal.values()[i]),
            fmt(d.ideal_normalized.values()[i]),
            fmt(d.kijowski.values()[i])
        )?;
    }
    Ok(())
}

fn regime(cfg: &RunConfig, out: &mut dyn Write, to_file: bool) -> Result<()> {
    let v = cfg.velocity.ok_or_else(|| Error::Config("regime needs 'velocity'".into()))?;
    let phys = cfg.physics()?;
    let delta_t = match (cfg.delta_t, cfg.packet()) {
        (Some(d), _) => d,
        (None, Ok(spec)) => 2.0 * spec.max_delta_x() / v,
        (None, Err(_)) => 1e-6,
    };
    let report = classify(&phys, v, delta_t, cfg.much_less)?;
    if to_file {
        print!("{}", report.to_text());
    } else {
        write!(out, "{}", report.to_text())?;
    }
    header(out, "regime", cfg)?;
    writeln!(out, "{}", report.csv_header())?;
    writeln!(out, "{}", report.to_csv_row())?;
    Ok(())
}
