//! Ideal arrival-time distributions of the free packet (flux J and
//! Kijowski's Π_K), the emission kernel W, and the convolution machinery
//! that relates the observed Π to Π_id.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::HBAR;
use crate::packet::{KGrid, PacketSpec};
use crate::series::{trapezoid, DistributionKind, DistributionSeries, TimeGrid, TimeSeries};

pub use crate::dynamics::ideal_kernel;

/// γ·dt at and above which the derivative in Π + Π′/γ counts as
/// unresolved.
pub const RESOLUTION_LIMIT: f64 = 0.1;
/// Zero padding factor for Fourier deconvolution.
pub const FFT_PADDING: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeconvolutionMethod {
    TimeDomain,
    Fourier,
}

/// ħ(k + k′)/2m.
pub fn flux_kernel(k: f64, kp: f64, mass: f64) -> f64 {
    HBAR * (k + kp) / (2.0 * mass)
}

/// ħ√(kk′)/m.
pub fn kijowski_kernel(k: f64, kp: f64, mass: f64) -> f64 {
    HBAR * (k * kp).sqrt() / mass
}

/// Free packet φ(x,t) and ∂ₓφ with the carrier e^{ik_ref x} removed.
fn free_wave(c: &[C64], grid: &KGrid, x: f64) -> (C64, C64) {
    let s = 1.0 / (2.0 * PI).sqrt();
    let mut v = C64::new(0.0, 0.0);
    let mut d = C64::new(0.0, 0.0);
    for (ci, &u) in c.iter().zip(&grid.offsets) {
        let e = ci * C64::from_polar(1.0, u * x);
        v += e;
        d += C64::new(0.0, u) * e;
    }
    (v * s, d * s)
}

/// J(t) = (ħ/m) Im(Ψ*∂ₓΨ) of the freely moving packet at `x`.
pub fn free_flux(spec: &PacketSpec, grid: &KGrid, x: f64, times: &TimeGrid) -> DistributionSeries {
    let m = spec.mass();
    let series = TimeSeries::from_fn(times, |t| {
        let (v, d) = free_wave(&spec.coefficients(grid, t), grid, x);
        HBAR / m * ((v.conj() * d).im + grid.k_ref * v.norm_sqr())
    });
    DistributionSeries::new(DistributionKind::Flux, series)
}

/// Π_K(t) = |∫dk ψ̃(k)√(ħk/m) e^{ikx − iEt/ħ}|²/2π.
pub fn kijowski_density(spec: &PacketSpec, grid: &KGrid, x: f64, times: &TimeGrid) -> DistributionSeries {
    let m = spec.mass();
    let roots: Vec<f64> = grid.nodes.iter().map(|k| (HBAR * k / m).sqrt()).collect();
    let series = TimeSeries::from_fn(times, |t| {
        let c = spec.coefficients(grid, t);
        let a: C64 = c.iter().zip(&grid.offsets).zip(&roots).map(|((ci, &u), r)| ci * r * C64::from_polar(1.0, u * x)).sum();
        a.norm_sqr() / (2.0 * PI)
    });
    DistributionSeries::new(DistributionKind::Kijowski, series)
}

/// W(t) = γe^{−γt} for t ≥ 0, zero before.
pub fn emission_kernel(gamma: f64, times: &TimeGrid) -> Result<DistributionSeries> {
    if !(gamma > 0.0) {
        return Err(Error::NegativeRate { field: "gamma", value: gamma });
    }
    let series = TimeSeries::from_fn(times, |t| if t >= 0.0 { gamma * (-gamma * t).exp() } else { 0.0 });
    Ok(DistributionSeries::new(DistributionKind::Kernel, series))
}

/// (f * K)(t) = ∫ f(s) K(t − s) ds on f's grid. The kernel must share the
/// time step and start at a whole number of steps. Both series carry
/// trapezoidal weights, so a jump at the kernel's first sample counts half
/// and ∫(f * K) = ∫f·∫K whenever the result fits on the grid.
pub fn convolve(f: &DistributionSeries, kernel: &DistributionSeries) -> Result<DistributionSeries> {
    let (fs, ks) = (&f.series, &kernel.series);
    if (fs.dt - ks.dt).abs() > 1e-12 * fs.dt {
        return Err(Error::GridMismatch(format!("time steps {} and {} differ", fs.dt, ks.dt)));
    }
    let shift = ks.t0 / ks.dt;
    if (shift - shift.round()).abs() > 1e-6 {
        return Err(Error::GridMismatch("kernel start is not a whole number of steps".into()));
    }
    let shift = shift.round() as i64;
    let kn = ks.len();
    let weights: Vec<f64> = (0..kn).map(|m| if m == 0 || m + 1 == kn { 0.5 } else { 1.0 }).collect();
    let n = fs.len();
    let fw = |j: usize| if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
    let values = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (m, (&kv, &w)) in ks.values.iter().zip(&weights).enumerate() {
                let j = i as i64 - shift - m as i64;
                if j < 0 {
                    break;
                }
                if (j as usize) < n {
                    acc += w * kv * fw(j as usize) * fs.values[j as usize];
                }
            }
            acc * fs.dt
        })
        .collect();
    Ok(DistributionSeries::new(DistributionKind::Observed, TimeSeries::new(fs.t0, fs.dt, values)?))
}

/// Warning text when γ·dt is too coarse for the derivative in Π + Π′/γ.
pub fn resolution_warning(series: &TimeSeries, gamma: f64) -> Option<String> {
    let r = gamma * series.dt;
    (r >= RESOLUTION_LIMIT).then(|| format!("under-resolved: gamma*dt = {r:.3} >= {RESOLUTION_LIMIT}"))
}

/// Π_id from Π by inverting Π = Π_id * W, either as Π + Π′/γ with central
/// differences or by multiplying the discrete Fourier transform by
/// (iν + γ)/γ. Negative values are kept.
pub fn deconvolve(pi: &DistributionSeries, gamma: f64, method: DeconvolutionMethod) -> Result<DistributionSeries> {
    if !(gamma > 0.0) {
        return Err(Error::NegativeRate { field: "gamma", value: gamma });
    }
    let s = &pi.series;
    if s.len() < 3 {
        return Err(Error::InvalidArgument("deconvolution needs at least three samples".into()));
    }
    if let Some(w) = resolution_warning(s, gamma) {
        warn!("{w}");
    }
    let values = match method {
        DeconvolutionMethod::TimeDomain => {
            let d = derivative(&s.values, s.dt);
            s.values.iter().zip(&d).map(|(p, dp)| p + dp / gamma).collect()
        }
        DeconvolutionMethod::Fourier => fourier_inverse(&s.values, s.dt, gamma),
    };
    Ok(DistributionSeries::new(DistributionKind::Ideal, TimeSeries::new(s.t0, s.dt, values)?))
}

fn derivative(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
            } else if i == n - 1 {
                (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * dt)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

fn fourier_inverse(v: &[f64], dt: f64, gamma: f64) -> Vec<f64> {
    let n = v.len();
    let len = FFT_PADDING * n;
    let mut buf: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).chain(std::iter::repeat(C64::new(0.0, 0.0))).take(len).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for (j, b) in buf.iter_mut().enumerate() {
        let nu = if 2 * j < len {
            j as f64
        } else if 2 * j > len {
            j as f64 - len as f64
        } else {
            0.0
        } * 2.0 * PI
            / (len as f64 * dt);
        *b *= C64::new(gamma, nu) / gamma;
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf[..n].iter().map(|z| z.re / len as f64).collect()
}

/// Rescales to unit integral and records the original integral.
pub fn normalize(d: &DistributionSeries) -> Result<DistributionSeries> {
    let total = d.integral();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::ZeroIntegral);
    }
    let mut out = d.clone();
    out.series = d.series.map(|v| v / total);
    out.raw_integral = Some(d.raw_integral.unwrap_or(1.0) * total);
    Ok(out)
}

/// ∫|a − b| dt on a shared grid.
pub fn l1_distance(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    if !a.grid().compatible(&b.grid()) {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", a.grid(), b.grid())));
    }
    let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    Ok(trapezoid(&diff, a.dt))
}
