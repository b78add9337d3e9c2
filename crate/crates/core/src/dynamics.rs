//! Conditional evolution of wave packets, the no-detection probability N_t
//! and the first-photon density Π(t).
//!
//! The packet is Ψ(x,t) = Σᵢ cᵢ(t) Φ_{kᵢ}(x) on a k quadrature grid, with
//! cᵢ(t) from [`PacketSpec::coefficients`]. Spatial integrals of |Ψ|² are
//! quadratic forms c†Gc, where G is the Gram matrix of the stationary
//! waves, integrated exactly piece by piece.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::I;
use crate::model::{RabiProfile, ValidatedConfig, HBAR};
use crate::packet::{KGrid, PacketSpec, DEFAULT_NODES};
use crate::regime;
use crate::scattering::{absorption, solve_sharp_edge, ScatteringSolution};
use crate::series::{trapezoid, TimeGrid, TimeSeries};
use crate::transfer::{solve_profile, DEFAULT_SLICES};
use crate::wave::piece_overlap;

/// Relative density allowed at the edges of the integration domain.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;
/// Integrated relative disagreement allowed between γP₂ and −dN/dt.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-3;
/// Domain margins, in packet standard deviations.
pub const DOMAIN_SIGMAS: f64 = 10.0;
/// Length of the excited tail kept beyond the beam, in units of v̄/γ.
pub const TAIL_DECAY_LENGTHS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Analytic,
    Transfer { slices: usize },
}

impl Backend {
    /// Analytic for sharp-edged beams, transfer matrices otherwise.
    pub fn auto(config: &ValidatedConfig) -> Self {
        if config.profile().is_sharp() {
            Backend::Analytic
        } else {
            Backend::Transfer { slices: DEFAULT_SLICES }
        }
    }

    pub fn solve(&self, k: f64, config: &ValidatedConfig) -> Result<ScatteringSolution> {
        match *self {
            Backend::Analytic => {
                if !config.profile().is_sharp() {
                    return Err(Error::InvalidArgument("the analytic backend needs a sharp-edged profile".into()));
                }
                solve_sharp_edge(k, config)
            }
            Backend::Transfer { slices } => solve_profile(k, config, slices),
        }
    }
}

/// Integration interval for N_t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialDomain {
    pub x_min: f64,
    pub x_max: f64,
}

impl SpatialDomain {
    pub fn new(x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_max > x_min && x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad spatial domain [{x_min}, {x_max}]")));
        }
        Ok(Self { x_min, x_max })
    }

    /// Smallest interval holding, to 10 standard deviations, the incoming
    /// packet at `t_start`, its transmitted and reflected images at `t_end`,
    /// the coupled region and 10 v̄/γ of excited tail beyond it.
    pub fn covering(spec: &PacketSpec, config: &ValidatedConfig, t_start: f64, t_end: f64) -> Self {
        let (a, b) = coupled_support(config);
        let mut lo = a;
        let mut hi = b;
        let (_, v_max) = spec.velocity_range();
        if config.gamma() > 0.0 {
            let tail = TAIL_DECAY_LENGTHS * v_max / config.gamma();
            hi = hi.max(b + tail);
            lo = lo.min(a - tail);
        }
        for t in [t_start, t_end] {
            for (c, s) in spec.free_centres(t).into_iter().zip(spec.free_widths(t)) {
                let m = DOMAIN_SIGMAS * s;
                lo = lo.min(c - m).min(2.0 * a - c - m);
                hi = hi.max(c + m);
            }
        }
        Self { x_min: lo, x_max: hi }
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Largest |±x − x_c(t)| over the domain edges, the two times and the
    /// component centres, padded by the packet widths. This is the largest
    /// position offset the k quadrature has to resolve.
    pub fn phase_extent(&self, spec: &PacketSpec, t_start: f64, t_end: f64) -> f64 {
        let mut e: f64 = 0.0;
        for t in [t_start, t_end] {
            for (c, s) in spec.free_centres(t).into_iter().zip(spec.free_widths(t)) {
                for x in [self.x_min, self.x_max] {
                    e = e.max((x - c).abs() + DOMAIN_SIGMAS * s);
                    e = e.max((-x - c).abs() + DOMAIN_SIGMAS * s);
                }
            }
        }
        e
    }
}

/// [a, b] of the coupled region, as the scattering pieces see it.
fn coupled_support(config: &ValidatedConfig) -> (f64, f64) {
    match config.profile() {
        RabiProfile::SharpEdged { .. } => (0.0, config.beam_width()),
        _ => crate::transfer::discretize(config.profile(), config.beam_width(), 1, crate::transfer::DEFAULT_SUPPORT_CUT)
            .map(|s| s.support())
            .unwrap_or((0.0, config.beam_width())),
    }
}

/// A k grid that resolves the packet over `domain` for times in
/// [t_start, t_end].
pub fn grid_for(spec: &PacketSpec, domain: &SpatialDomain, t_start: f64, t_end: f64) -> Result<KGrid> {
    KGrid::resolving(spec, DEFAULT_NODES, domain.phase_extent(spec, t_start, t_end))
}

/// Dense Hermitian matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<C64>,
}

impl Gram {
    /// Fills G_ij = f(i, j) for j ≥ i, in parallel over rows, and mirrors.
    pub fn build(n: usize, f: impl Fn(usize, usize) -> C64 + Sync) -> Self {
        let rows: Vec<Vec<C64>> = (0..n).into_par_iter().map(|i| (i..n).map(|j| f(i, j)).collect()).collect();
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + off;
                data[i * n + j] = v;
                data[j * n + i] = v.conj();
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    /// Σᵢⱼ cᵢ G_ij cⱼ*.
    pub fn quadratic(&self, c: &[C64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..n {
                s += row[j] * c[j].conj();
            }
            acc += row[i].re * c[i].norm_sqr() + 2.0 * (c[i] * s).re;
        }
        acc
    }
}

/// Stationary solutions for every node of a k grid, ready for evolution.
#[derive(Debug, Clone)]
pub struct PacketEvolution {
    spec: PacketSpec,
    config: ValidatedConfig,
    grid: KGrid,
    backend: Backend,
    solutions: Vec<ScatteringSolution>,
    excited: Option<Gram>,
}

impl PacketEvolution {
    pub fn new(spec: PacketSpec, config: ValidatedConfig, grid: KGrid, backend: Backend) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptySupport);
        }
        let solutions = grid.nodes.par_iter().map(|&k| backend.solve(k, &config)).collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, config, grid, backend, solutions, excited: None })
    }

    /// Grid and domain chosen for the time span, automatic backend.
    pub fn for_span(spec: PacketSpec, config: ValidatedConfig, t_start: f64, t_end: f64) -> Result<(Self, SpatialDomain)> {
        let domain = SpatialDomain::covering(&spec, &config, t_start, t_end);
        let grid = grid_for(&spec, &domain, t_start, t_end)?;
        let backend = Backend::auto(&config);
        Ok((Self::new(spec, config, grid, backend)?, domain))
    }

    pub fn spec(&self) -> &PacketSpec {
        &self.spec
    }

    pub fn config(&self) -> &ValidatedConfig {
        &self.config
    }

    pub fn grid(&self) -> &KGrid {
        &self.grid
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn solutions(&self) -> &[ScatteringSolution] {
        &self.solutions
    }

    pub fn coefficients(&self, t: f64) -> Vec<C64> {
        self.spec.coefficients(&self.grid, t)
    }

    /// Ψ(x, t) up to the carrier phase e^{−iħk_ref²t/2m}.
    pub fn evolve(&self, x: f64, t: f64) -> [C64; 2] {
        self.evolve_with(&self.coefficients(t), x)
    }

    fn evolve_with(&self, c: &[C64], x: f64) -> [C64; 2] {
        let mut out = [C64::new(0.0, 0.0); 2];
        for (ci, sol) in c.iter().zip(&self.solutions) {
            let v = sol.evaluate_scaled(x).value;
            out[0] += ci * v[0];
            out[1] += ci * v[1];
        }
        let s = 1.0 / (2.0 * PI).sqrt();
        [out[0] * s, out[1] * s]
    }

    /// Σ wᵢ|ψ̃(kᵢ)|² A(kᵢ): the probability that a photon is ever detected.
    pub fn spectral_absorption(&self) -> Result<f64> {
        let mut acc = 0.0;
        for ((w, &u), sol) in self.grid.weights.iter().zip(&self.grid.offsets).zip(&self.solutions) {
            acc += w * self.spec.spectral_amplitude_offset(u).norm_sqr() * absorption(sol)?;
        }
        Ok(acc)
    }

    /// Gram matrix ∫Φᵢ⁽²⁾Φⱼ⁽²⁾* dx of the excited channel over the whole
    /// line.
    pub fn excited_gram(&self) -> Gram {
        self.gram(&[1], f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Gram matrix of both channels over the domain.
    pub fn domain_gram(&self, domain: &SpatialDomain) -> Gram {
        self.gram(&[0, 1], domain.x_min, domain.x_max)
    }

    fn gram(&self, channels: &[usize], lo: f64, hi: f64) -> Gram {
        let sols = &self.solutions;
        let scale = 1.0 / (2.0 * PI);
        Gram::build(sols.len(), |i, j| {
            let (a, b) = (&sols[i], &sols[j]);
            let mut acc = C64::new(0.0, 0.0);
            for (pa, pb) in a.pieces.iter().zip(&b.pieces) {
                for &ch in channels {
                    acc += piece_overlap(pa, pb, ch, lo, hi);
                }
            }
            acc * scale
        })
    }

    fn excited(&mut self) -> &Gram {
        if self.excited.is_none() {
            self.excited = Some(self.excited_gram());
        }
        self.excited.as_ref().unwrap()
    }

    /// P₂(t) = ∫|Ψ⁽²⁾|² dx over the whole line.
    pub fn excited_population(&mut self, t: f64) -> f64 {
        let c = self.coefficients(t);
        self.excited().quadratic(&c)
    }

    /// N_t over a domain, failing with DomainTooSmall when the packet
    /// density at either edge is not negligible.
    pub fn no_detection_probability(&self, t: f64, domain: &SpatialDomain) -> Result<f64> {
        let gram = self.domain_gram(domain);
        let c = self.coefficients(t);
        self.check_edges(&c, domain)?;
        Ok(gram.quadratic(&c))
    }

    fn check_edges(&self, c: &[C64], domain: &SpatialDomain) -> Result<()> {
        let mut worst: f64 = 0.0;
        for x in [domain.x_min, domain.x_max] {
            let v = self.evolve_with(c, x);
            worst = worst.max((v[0].norm_sqr() + v[1].norm_sqr()) * domain.length());
        }
        if worst > BOUNDARY_TOLERANCE {
            return Err(Error::DomainTooSmall(worst));
        }
        Ok(())
    }

    /// Π = γP₂ on a time grid, together with N_t and −dN/dt.
    pub fn first_photon_density(&mut self, times: &TimeGrid, domain: &SpatialDomain) -> Result<PhotonDensity> {
        let gamma = self.config.gamma();
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument("the first-photon density needs γ > 0".into()));
        }
        let domain_gram = self.domain_gram(domain);
        self.excited();
        let this = &*self;
        let excited = this.excited.as_ref().unwrap();
        let rows: Vec<Result<(f64, f64)>> = (0..times.len)
            .into_par_iter()
            .map(|i| {
                let c = this.coefficients(times.time(i));
                this.check_edges(&c, domain)?;
                Ok((gamma * excited.quadratic(&c), domain_gram.quadratic(&c)))
            })
            .collect();
        let mut pi = Vec::with_capacity(times.len);
        let mut survival = Vec::with_capacity(times.len);
        for r in rows {
            let (p, n) = r?;
            pi.push(p);
            survival.push(n);
        }
        let rate = minus_derivative(&survival, times.dt);
        let diff: Vec<f64> = pi.iter().zip(&rate).map(|(a, b)| (a - b).abs()).collect();
        let discrepancy = trapezoid(&diff, times.dt) / trapezoid(&pi, times.dt).max(1e-9);
        let out = PhotonDensity {
            pi: TimeSeries::on(times, pi)?,
            survival: TimeSeries::on(times, survival)?,
            rate: TimeSeries::on(times, rate)?,
            discrepancy,
        };
        if discrepancy > CONSISTENCY_TOLERANCE {
            return Err(Error::ConsistencyFailure(discrepancy));
        }
        Ok(out)
    }
}

/// −dN/dt by second-order central differences; one-sided second-order
/// formulas at the ends.
fn minus_derivative(n: &[f64], dt: f64) -> Vec<f64> {
    let len = n.len();
    (0..len)
        .map(|i| {
            let d = if len < 3 {
                (n[len - 1] - n[0]) / (dt * (len - 1).max(1) as f64)
            } else if i == 0 {
                (-3.0 * n[0] + 4.0 * n[1] - n[2]) / (2.0 * dt)
            } else if i == len - 1 {
                (3.0 * n[i] - 4.0 * n[i - 1] + n[i - 2]) / (2.0 * dt)
            } else {
                (n[i + 1] - n[i - 1]) / (2.0 * dt)
            };
            -d
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDensity {
    /// γP₂(t).
    pub pi: TimeSeries,
    /// N_t over the domain.
    pub survival: TimeSeries,
    /// −dN/dt from central differences of `survival`.
    pub rate: TimeSeries,
    /// ∫|γP₂ + dN/dt| dt / ∫γP₂ dt.
    pub discrepancy: f64,
}

/// Ψ(x, t) for a single point. Solves the scattering problem on the whole
/// grid, so use [`PacketEvolution`] for repeated evaluations.
pub fn conditional_evolve(spec: &PacketSpec, config: &ValidatedConfig, grid: &KGrid, x: f64, t: f64) -> Result<[C64; 2]> {
    let ev = PacketEvolution::new(spec.clone(), config.clone(), grid.clone(), Backend::auto(config))?;
    Ok(ev.evolve(x, t))
}

pub fn no_detection_probability(spec: &PacketSpec, config: &ValidatedConfig, grid: &KGrid, t: f64, domain: &SpatialDomain) -> Result<f64> {
    let ev = PacketEvolution::new(spec.clone(), config.clone(), grid.clone(), Backend::auto(config))?;
    ev.no_detection_probability(t, domain)
}

/// Exact Π(t) with automatic domain and grid.
pub fn first_photon_density(spec: &PacketSpec, config: &ValidatedConfig, times: &TimeGrid) -> Result<PhotonDensity> {
    let (mut ev, domain) = PacketEvolution::for_span(spec.clone(), config.clone(), times.t0, times.end())?;
    ev.first_photon_density(times, &domain)
}

/// Π(t) in the ridge approximation, with any regime warnings that apply at
/// the packet's mean velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeDensity {
    pub series: TimeSeries,
    pub warnings: Vec<String>,
}

/// D(k, k′) = k − k′ + (iγm/2ħ)(k + k′)/(kk′), the approximate q − q′*.
fn denominator(gamma: f64, mass: f64, k: f64, kp: f64, du: f64) -> C64 {
    C64::new(du, gamma * mass / (2.0 * HBAR) * (k + kp) / (k * kp))
}

/// Π_ridge(t) = (γ/2π) ΣΣ cᵢcⱼ* e^{i(kᵢ−kⱼ)L} i/D(kᵢ,kⱼ): every atom leaves
/// the beam excited and decays beyond x = L.
pub fn ridge_photon_density(spec: &PacketSpec, config: &ValidatedConfig, grid: &KGrid, times: &TimeGrid) -> Result<RidgeDensity> {
    let (gamma, mass, l) = (config.gamma(), config.mass(), config.beam_width());
    let series = if gamma > 0.0 {
        let kernel = Gram::build(grid.len(), |i, j| {
            let du = grid.offsets[i] - grid.offsets[j];
            let d = denominator(gamma, mass, grid.nodes[i], grid.nodes[j], du);
            C64::from_polar(gamma / (2.0 * PI), du * l) * I / d
        });
        quadratic_series(spec, grid, times, &kernel)?
    } else {
        TimeSeries::on(times, vec![0.0; times.len])?
    };
    Ok(RidgeDensity { series, warnings: regime_warnings(spec, config, grid, times) })
}

/// Π_id(t) = Π + Π′/γ applied to the ridge expression, in closed form:
/// (1/2π) ΣΣ cᵢcⱼ* e^{i(kᵢ−kⱼ)L} [iγ + ħ(kᵢ² − kⱼ²)/2m]/D(kᵢ,kⱼ).
pub fn ideal_density(spec: &PacketSpec, config: &ValidatedConfig, grid: &KGrid, times: &TimeGrid) -> Result<TimeSeries> {
    let (gamma, mass, l) = (config.gamma(), config.mass(), config.beam_width());
    let kref = grid.k_ref;
    let kernel = Gram::build(grid.len(), |i, j| {
        let (ui, uj) = (grid.offsets[i], grid.offsets[j]);
        let v = ideal_kernel(gamma, mass, kref + ui, kref + uj, ui - uj);
        C64::from_polar(1.0 / (2.0 * PI), (ui - uj) * l) * v
    });
    quadratic_series(spec, grid, times, &kernel)
}

/// The bracketed kernel [iγ + ħ(k² − k′²)/2m]/D(k,k′). `du` = k − k′ is
/// passed separately so it can be computed without cancellation.
pub fn ideal_kernel(gamma: f64, mass: f64, k: f64, kp: f64, du: f64) -> C64 {
    let flux_like = HBAR * (k + kp) / (2.0 * mass);
    if gamma == 0.0 {
        return C64::new(flux_like, 0.0);
    }
    let num = C64::new(du * flux_like, gamma);
    num / denominator(gamma, mass, k, kp, du)
}

fn quadratic_series(spec: &PacketSpec, grid: &KGrid, times: &TimeGrid, kernel: &Gram) -> Result<TimeSeries> {
    let values: Vec<f64> = (0..times.len).into_par_iter().map(|i| kernel.quadratic(&spec.coefficients(grid, times.time(i)))).collect();
    TimeSeries::on(times, values)
}

fn regime_warnings(spec: &PacketSpec, config: &ValidatedConfig, grid: &KGrid, times: &TimeGrid) -> Vec<String> {
    let v = spec.mean_velocity(grid);
    let span = times.end() - times.t0;
    match regime::classify(config, v, span, regime::DEFAULT_MUCH_LESS) {
        Ok(report) => {
            let mut w: Vec<String> = report.failing_terms().iter().map(|t| format!("regime term '{}' fails (margin {:.3})", t.name, t.margin)).collect();
            if report.ridge_index.is_none() {
                w.push(format!("mean velocity {v:.6} m/s is not inside a detection window"));
            }
            w.iter().for_each(|m| warn!("{m}"));
            w
        }
        Err(e) => vec![e.to_string()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cesium::{GAMMA, MASS};
    use crate::model::AtomLaserConfig;
    use crate::packet::GaussianComponent;

    fn config(omega: f64) -> ValidatedConfig {
        AtomLaserConfig::cesium(omega, 5e-6).validate().unwrap()
    }

    /// Closed-form free Gaussian with the waist convention, evaluated with
    /// the same constant phase as `PacketEvolution::evolve`.
    fn free_gaussian(c: &GaussianComponent, kref: f64, x: f64, t: f64) -> C64 {
        let dk = c.delta_k();
        let tau = HBAR * (t - c.waist_time) / MASS;
        let d = c.mean_wavenumber(MASS) - kref;
        // ∫du e^{-a u² + b u}, k = kref + u
        let a = C64::new(1.0 / (4.0 * dk * dk), tau / 2.0);
        let b = C64::new(d / (2.0 * dk * dk), (x - c.waist_position) - tau * kref);
        let rest = C64::new(-d * d / (4.0 * dk * dk), kref * x);
        let pref = (2.0 * PI * dk * dk).powf(-0.25) / (2.0 * PI).sqrt();
        pref * (PI / a).sqrt() * (b * b / (4.0 * a) + rest).exp()
    }

    #[test]
    fn uncoupled_limit_is_free_motion() {
        let c = GaussianComponent::new(100.0, 1e-6, -20e-6, 0.0);
        let spec = PacketSpec::single(c, MASS).unwrap();
        let cfg = AtomLaserConfig::cesium(0.0, 5e-6).validate().unwrap();
        let domain = SpatialDomain::new(-60e-6, 60e-6).unwrap();
        let grid = grid_for(&spec, &domain, 0.0, 4e-7).unwrap();
        let ev = PacketEvolution::new(spec.clone(), cfg, grid, Backend::Analytic).unwrap();
        for t in [0.0, 2e-7, 4e-7] {
            for x in [-25e-6, -20e-6, -18e-6, 0.0, 3e-6, 20e-6] {
                let got = ev.evolve(x, t);
                let want = free_gaussian(&c, spec.k_ref(), x, t);
                let scale = (2.0 * PI).powf(-0.25) / c.delta_x.sqrt();
                assert!((got[0] - want).norm() < 1e-8 * scale, "x={x} t={t} {} {}", got[0], want);
                assert_eq!(got[1].norm(), 0.0);
            }
        }
    }

    #[test]
    fn norm_is_one_before_arrival() {
        let c = GaussianComponent::new(166.2, 1e-6, -30e-6, 0.0);
        let spec = PacketSpec::single(c, MASS).unwrap();
        let cfg = config(104.43e6);
        let (ev, domain) = PacketEvolution::for_span(spec, cfg, 0.0, 4e-7).unwrap();
        let n = ev.no_detection_probability(0.0, &domain).unwrap();
        assert!((n - 1.0).abs() < 1e-6, "{n}");
    }

    #[test]
    fn small_domain_is_rejected() {
        let c = GaussianComponent::new(166.2, 1e-6, -30e-6, 0.0);
        let spec = PacketSpec::single(c, MASS).unwrap();
        let cfg = config(104.43e6);
        let (ev, _) = PacketEvolution::for_span(spec, cfg, 0.0, 4e-7).unwrap();
        let narrow = SpatialDomain::new(-31e-6, 10e-6).unwrap();
        assert!(matches!(ev.no_detection_probability(0.0, &narrow), Err(Error::DomainTooSmall(_))));
    }

    #[test]
    fn probability_balance_on_the_ridge() {
        let c = GaussianComponent::new(166.2, 1e-6, -12e-6, 0.0);
        let spec = PacketSpec::single(c, MASS).unwrap();
        let cfg = config(104.43e6);
        let t1 = 25e-6 / 166.2 + 20.0 / GAMMA;
        let times = TimeGrid::spanning(0.0, t1, 1601).unwrap();
        let (mut ev, domain) = PacketEvolution::for_span(spec, cfg, times.t0, times.end()).unwrap();
        let d = ev.first_photon_density(&times, &domain).unwrap();
        let total = d.pi.integral();
        let n_end = *d.survival.values.last().unwrap();
        assert!((total + n_end - 1.0).abs() < 1e-4, "{total} {n_end}");
        let a = ev.spectral_absorption().unwrap();
        assert!((total - a).abs() < 1e-4, "{total} {a}");
        let top = d.pi.values.iter().cloned().fold(0.0, f64::max);
        let low = d.pi.values.iter().cloned().fold(0.0, f64::min);
        assert!(low >= -1e-12 * top, "{low} {top}");
        assert!(d.survival.values.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn ideal_kernel_diagonal_is_flux() {
        let k = 3.5e11;
        let v = ideal_kernel(GAMMA, MASS, k, k, 0.0);
        assert!((v.re - HBAR * k / MASS).abs() < 1e-12 * v.re && v.im.abs() < 1e-12 * v.re);
        let v0 = ideal_kernel(0.0, MASS, k, k + 10.0, 10.0);
        assert!((v0.re - HBAR * (2.0 * k + 10.0) / (2.0 * MASS)).abs() < 1e-12 * v0.re);
    }
}
