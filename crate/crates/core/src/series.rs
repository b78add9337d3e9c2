//! Uniformly sampled time series and their CSV form.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sampling times t0, t0 + dt, …, t0 + (len − 1)dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive and finite, got {dt}")));
        }
        if len < 2 {
            return Err(Error::InvalidArgument("a time grid needs at least two samples".into()));
        }
        Ok(Self { t0, dt, len })
    }

    /// `len` samples spanning [t0, t1] inclusive.
    pub fn spanning(t0: f64, t1: f64, len: usize) -> Result<Self> {
        if !(t1 > t0) || len < 2 {
            return Err(Error::InvalidArgument(format!("bad time span [{t0}, {t1}] with {len} samples")));
        }
        Self::new(t0, (t1 - t0) / (len - 1) as f64, len)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.time(i))
    }

    pub fn compatible(&self, other: &TimeGrid) -> bool {
        self.len == other.len && (self.dt - other.dt).abs() <= 1e-12 * self.dt && (self.t0 - other.t0).abs() <= 1e-9 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T = f64> {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<T>,
}

impl<T: Copy> TimeSeries<T> {
    pub fn new(t0: f64, dt: f64, values: Vec<T>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive and finite, got {dt}")));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn on(grid: &TimeGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len {
            return Err(Error::GridMismatch(format!("{} values for {} times", values.len(), grid.len)));
        }
        Ok(Self { t0: grid.t0, dt: grid.dt, values })
    }

    pub fn from_fn(grid: &TimeGrid, f: impl FnMut(f64) -> T) -> Self {
        Self { t0: grid.t0, dt: grid.dt, values: grid.times().map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid { t0: self.t0, dt: self.dt, len: self.values.len() }
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> TimeSeries<U> {
        TimeSeries { t0: self.t0, dt: self.dt, values: self.values.iter().copied().map(f).collect() }
    }
}

impl TimeSeries<f64> {
    /// Trapezoidal integral over the sampled span.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.dt)
    }

    /// ∫|f| dt.
    pub fn l1_norm(&self) -> f64 {
        trapezoid(&self.values.iter().map(|v| v.abs()).collect::<Vec<_>>(), self.dt)
    }

    /// Mean ∫t f dt / ∫f dt.
    pub fn mean_time(&self) -> f64 {
        let tf: Vec<f64> = self.values.iter().enumerate().map(|(i, v)| self.time(i) * v).collect();
        trapezoid(&tf, self.dt) / self.integral()
    }

    pub fn argmax(&self) -> usize {
        self.values.iter().enumerate().fold(0, |best, (i, v)| if *v > self.values[best] { i } else { best })
    }

    /// Time of the maximum refined by a parabola through the three
    /// samples around it.
    pub fn peak_time(&self) -> f64 {
        let i = self.argmax();
        if i == 0 || i + 1 >= self.len() {
            return self.time(i);
        }
        self.time(i) + parabolic_offset(self.values[i - 1], self.values[i], self.values[i + 1]) * self.dt
    }

    /// Times of interior local maxima whose value exceeds `floor` times
    /// the global maximum, each refined parabolically.
    pub fn local_maxima(&self, floor: f64) -> Vec<f64> {
        let v = &self.values;
        let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (1..v.len().saturating_sub(1))
            .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > floor * top)
            .map(|i| self.time(i) + parabolic_offset(v[i - 1], v[i], v[i + 1]) * self.dt)
            .collect()
    }

    /// Linear interpolation; zero outside the sampled span.
    pub fn sample(&self, t: f64) -> f64 {
        let s = (t - self.t0) / self.dt;
        if s < 0.0 || s > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = (s.floor() as usize).min(self.len() - 2);
        let f = s - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den == 0.0 {
        0.0
    } else {
        0.5 * (a - c) / den
    }
}

/// Trapezoidal rule on uniform samples.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistributionKind {
    Flux,
    Kijowski,
    Observed,
    Ideal,
    Kernel,
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Flux => "flux",
            Self::Kijowski => "kijowski",
            Self::Observed => "observed",
            Self::Ideal => "ideal",
            Self::Kernel => "kernel",
        })
    }
}

impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "flux" => Self::Flux,
            "kijowski" => Self::Kijowski,
            "observed" => Self::Observed,
            "ideal" => Self::Ideal,
            "kernel" => Self::Kernel,
            other => return Err(Error::Config(format!("unknown distribution kind '{other}'"))),
        })
    }
}

/// A time series tagged with what it represents. `raw_integral` is set by
/// `normalize` and keeps the integral before rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSeries {
    pub kind: DistributionKind,
    pub series: TimeSeries,
    pub raw_integral: Option<f64>,
}

impl DistributionSeries {
    pub fn new(kind: DistributionKind, series: TimeSeries) -> Self {
        Self { kind, series, raw_integral: None }
    }

    pub fn integral(&self) -> f64 {
        self.series.integral()
    }

    pub fn values(&self) -> &[f64] {
        &self.series.values
    }

    pub fn grid(&self) -> TimeGrid {
        self.series.grid()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, metadata: &[(String, String)]) -> Result<()> {
        writeln!(out, "# kind: {}", self.kind).map_err(io)?;
        if let Some(r) = self.raw_integral {
            writeln!(out, "# raw_integral: {r:.16e}").map_err(io)?;
        }
        for (k, v) in metadata {
            writeln!(out, "# {k}: {v}").map_err(io)?;
        }
        writeln!(out, "t_s,value").map_err(io)?;
        for (i, v) in self.series.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.series.time(i), v).map_err(io)?;
        }
        Ok(())
    }

    /// Reads the format written by `write_csv`. The kind comes from the
    /// `# kind:` line; times must be uniformly spaced.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut kind = None;
        let mut raw = None;
        let mut header = false;
        let (mut ts, mut vs) = (Vec::new(), Vec::new());
        for line in input.lines() {
            let line = line.map_err(io)?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once(':') {
                    match k.trim() {
                        "kind" => kind = Some(v.parse()?),
                        "raw_integral" => raw = Some(parse_f64(v)?),
                        _ => {}
                    }
                }
                continue;
            }
            if !header {
                if line.replace(' ', "") != "t_s,value" {
                    return Err(Error::Config(format!("expected header 't_s,value', found '{line}'")));
                }
                header = true;
                continue;
            }
            let (t, v) = line.split_once(',').ok_or_else(|| Error::Config(format!("bad row '{line}'")))?;
            ts.push(parse_f64(t)?);
            vs.push(parse_f64(v)?);
        }
        let kind = kind.ok_or_else(|| Error::Config("missing '# kind:' line".into()))?;
        if ts.len() < 2 {
            return Err(Error::Config("need at least two rows".into()));
        }
        let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        for (i, t) in ts.iter().enumerate() {
            if (t - (ts[0] + i as f64 * dt)).abs() > 1e-9 * dt {
                return Err(Error::GridMismatch(format!("non-uniform time at row {i}")));
            }
        }
        Ok(Self { kind, series: TimeSeries::new(ts[0], dt, vs)?, raw_integral: raw })
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Config(format!("not a number: '{}'", s.trim())))
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let g = TimeGrid::spanning(0.0, 2.0, 11).unwrap();
        let s = TimeSeries::from_fn(&g, |t| 3.0 * t + 1.0);
        assert!((s.integral() - 8.0).abs() < 1e-12);
        assert!((s.sample(1.05) - 4.15).abs() < 1e-12);
        assert_eq!(s.sample(-1.0), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = TimeGrid::new(-1e-6, 1e-9, 50).unwrap();
        let s = TimeSeries::from_fn(&g, |t| (t * 1e7).sin());
        let mut d = DistributionSeries::new(DistributionKind::Ideal, s);
        d.raw_integral = Some(0.97);
        let mut buf = Vec::new();
        d.write_csv(&mut buf, &[("preset".into(), "fig6".into())]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# kind: ideal\n"));
        assert!(text.contains("\nt_s,value\n"));
        let back = DistributionSeries::read_csv(&buf[..]).unwrap();
        assert_eq!(back.kind, DistributionKind::Ideal);
        assert_eq!(back.raw_integral, Some(0.97));
        assert_eq!(back.series.values, d.series.values);
        assert!((back.series.dt - d.series.dt).abs() < 1e-24);
    }

    #[test]
    fn peaks_are_refined() {
        let g = TimeGrid::spanning(0.0, 10.0, 101).unwrap();
        let s = TimeSeries::from_fn(&g, |t| (-(t - 4.03f64).powi(2)).exp());
        assert!((s.peak_time() - 4.03).abs() < 1e-3);
        assert_eq!(s.local_maxima(0.1).len(), 1);
    }
}
