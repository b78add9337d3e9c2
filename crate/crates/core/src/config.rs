//! Run configuration for the command-line tool: `key = value` files, named
//! figure presets and `--set` overrides.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::arrival::DeconvolutionMethod;
use crate::error::{Error, Result};
use crate::model::{cesium, AtomLaserConfig, RabiProfile, ValidatedConfig};
use crate::packet::{GaussianComponent, PacketSpec, DEFAULT_NODES};
use crate::transfer::DEFAULT_SLICES;

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileShape {
    Sharp,
    /// Ω(x) = LΩ₀e^{−(x−x₀)²/2δ²}/(δ√2π); Ω₀ is the `omega` value.
    Gaussian { center: f64, width: f64 },
    /// Samples (x, Ω) used as given; `omega` is ignored.
    Tabulated(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Auto,
    Analytic,
    Transfer,
}

impl FromStr for BackendChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Self::Auto),
            "analytic" => Ok(Self::Analytic),
            "transfer" => Ok(Self::Transfer),
            o => Err(Error::Config(format!("unknown backend '{o}' (analytic, transfer or auto)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiRoute {
    Exact,
    Ridge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub mass: f64,
    pub gamma: f64,
    pub omega: f64,
    pub beam_width: f64,
    pub profile: ProfileShape,
    pub v_min: f64,
    pub v_max: f64,
    pub n_v: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    pub cut_omegas: Vec<f64>,
    pub mark_ridges: bool,
    pub ridge_max: usize,
    pub l_min: f64,
    pub l_max: f64,
    pub n_l: usize,
    pub velocity: Option<f64>,
    pub delta_t: Option<f64>,
    pub much_less: f64,
    pub components: Vec<GaussianComponent>,
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
    pub eval_point: Option<f64>,
    pub k_nodes: usize,
    pub slices: usize,
    pub pi_route: PiRoute,
    pub deconvolution: DeconvolutionMethod,
    pub backend: BackendChoice,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = cesium::GAMMA;
        Self {
            preset: None,
            mass: cesium::MASS,
            gamma: g,
            omega: 5.0 * g,
            beam_width: 5e-6,
            profile: ProfileShape::Sharp,
            v_min: 0.5,
            v_max: 400.0,
            n_v: 160,
            omega_min: 0.05 * g,
            omega_max: 10.0 * g,
            n_omega: 100,
            cut_omegas: Vec::new(),
            mark_ridges: false,
            ridge_max: 20,
            l_min: 0.5e-6,
            l_max: 20e-6,
            n_l: 40,
            velocity: None,
            delta_t: None,
            much_less: crate::regime::DEFAULT_MUCH_LESS,
            components: Vec::new(),
            t_min: 0.0,
            t_max: 0.0,
            n_t: 0,
            eval_point: None,
            k_nodes: DEFAULT_NODES,
            slices: DEFAULT_SLICES,
            pi_route: PiRoute::Exact,
            deconvolution: DeconvolutionMethod::TimeDomain,
            backend: BackendChoice::Auto,
        }
    }
}

pub const PRESETS: [&str; 7] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

/// Packet of the fig6 preset: two coherent Gaussians that reach minimal uncertainty
/// when their centres arrive at the beam exit L at t = 0.
pub fn fig6_components(beam_width: f64) -> Vec<GaussianComponent> {
    let v1 = 167.05;
    let dx = 4233e-6;
    vec![GaussianComponent::new(v1, dx, beam_width, 0.0), GaussianComponent::new(v1 + 0.9e-6, dx, beam_width, 0.0)]
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let g = cesium::GAMMA;
        let mut c = RunConfig { preset: Some(name.to_string()), ..Default::default() };
        match name {
            "fig1" | "fig2" => {}
            "fig3" => {}
            "fig4" => {
                c.v_min = 0.01;
                c.v_max = 5.0;
                c.n_v = 100;
            }
            "fig5" => {
                c.v_min = 0.5;
                c.v_max = 600.0;
                c.n_v = 1200;
                c.cut_omegas = vec![5.0 * g, 0.5 * g];
                c.mark_ridges = true;
            }
            "fig6" => {
                c.omega = 104.43e6;
                c.components = fig6_components(c.beam_width);
                c.t_min = -150e-6;
                c.t_max = 150e-6;
                c.n_t = 3001;
            }
            "fig7" => {
                c.profile = ProfileShape::Gaussian { center: 2.5e-6, width: 0.529e-6 };
                c.n_v = 100;
                c.n_omega = 50;
                c.backend = BackendChoice::Transfer;
            }
            other => return Err(Error::Config(format!("unknown preset '{other}' (known: {})", PRESETS.join(", ")))),
        }
        Ok(c)
    }

    /// Applies a `key = value` file on top of `self`. A `component` line
    /// in the file replaces the preset's components; further lines add to
    /// them.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut fresh_components = true;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", no + 1)))?;
            let key = k.trim();
            if key == "component" && fresh_components {
                self.components.clear();
                fresh_components = false;
            }
            self.set(key, v.trim()).map_err(|e| Error::Config(format!("line {}: {}", no + 1, strip(e))))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mass" => self.mass = num(value)?,
            "gamma" => self.gamma = num(value)?,
            "omega" => self.omega = num(value)?,
            "beam_width" => self.beam_width = num(value)?,
            "profile" => {
                self.profile = match value {
                    "sharp" => ProfileShape::Sharp,
                    "gaussian" => ProfileShape::Gaussian { center: 0.5 * self.beam_width, width: 0.1 * self.beam_width },
                    "tabulated" => ProfileShape::Tabulated(Vec::new()),
                    o => return Err(Error::Config(format!("unknown profile '{o}'"))),
                }
            }
            "gaussian_center" | "gaussian_width" => {
                let x = num(value)?;
                let (mut c, mut w) = match self.profile {
                    ProfileShape::Gaussian { center, width } => (center, width),
                    _ => (0.5 * self.beam_width, 0.1 * self.beam_width),
                };
                if key == "gaussian_center" {
                    c = x;
                } else {
                    w = x;
                }
                self.profile = ProfileShape::Gaussian { center: c, width: w };
            }
            "profile_samples" => {
                let samples = value
                    .split(',')
                    .map(|p| {
                        let (x, o) = p.split_once(':').ok_or_else(|| Error::Config(format!("sample '{p}' is not x:omega")))?;
                        Ok((num(x)?, num(o)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.profile = ProfileShape::Tabulated(samples);
            }
            "v_min" => self.v_min = num(value)?,
            "v_max" => self.v_max = num(value)?,
            "n_v" => self.n_v = int(value)?,
            "omega_min" => self.omega_min = num(value)?,
            "omega_max" => self.omega_max = num(value)?,
            "n_omega" => self.n_omega = int(value)?,
            "cut_omegas" => self.cut_omegas = value.split(',').map(num).collect::<Result<_>>()?,
            "mark_ridges" => self.mark_ridges = boolean(value)?,
            "ridge_max" => self.ridge_max = int(value)?,
            "l_min" => self.l_min = num(value)?,
            "l_max" => self.l_max = num(value)?,
            "n_l" => self.n_l = int(value)?,
            "velocity" => self.velocity = Some(num(value)?),
            "delta_t" => self.delta_t = Some(num(value)?),
            "much_less" => self.much_less = num(value)?,
            "component" => {
                let f: Vec<f64> = value.split(',').map(num).collect::<Result<_>>()?;
                if !(f.len() == 4 || f.len() == 6) {
                    return Err(Error::Config("component needs 'v, delta_x, waist_position, waist_time[, weight_re, weight_im]'".into()));
                }
                let mut c = GaussianComponent::new(f[0], f[1], f[2], f[3]);
                if f.len() == 6 {
                    c = c.with_weight(C64::new(f[4], f[5]));
                }
                self.components.push(c);
            }
            "clear_components" => {
                if boolean(value)? {
                    self.components.clear();
                }
            }
            "t_min" => self.t_min = num(value)?,
            "t_max" => self.t_max = num(value)?,
            "n_t" => self.n_t = int(value)?,
            "eval_point" => self.eval_point = Some(num(value)?),
            "k_nodes" => self.k_nodes = int(value)?,
            "slices" => self.slices = int(value)?,
            "pi_route" => {
                self.pi_route = match value {
                    "exact" => PiRoute::Exact,
                    "ridge" => PiRoute::Ridge,
                    o => return Err(Error::Config(format!("unknown pi_route '{o}'"))),
                }
            }
            "deconvolution" => {
                self.deconvolution = match value {
                    "time" | "time-domain" => DeconvolutionMethod::TimeDomain,
                    "fourier" => DeconvolutionMethod::Fourier,
                    o => return Err(Error::Config(format!("unknown deconvolution '{o}'"))),
                }
            }
            "backend" => self.backend = value.parse()?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::Config(format!("'{pair}' is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn rabi_profile(&self, omega: f64) -> RabiProfile {
        match &self.profile {
            ProfileShape::Sharp => RabiProfile::SharpEdged { omega },
            ProfileShape::Gaussian { center, width } => RabiProfile::Gaussian { omega0: omega, center: *center, width: *width },
            ProfileShape::Tabulated(s) => RabiProfile::Tabulated { samples: s.clone() },
        }
    }

    /// The physical configuration with Ω (or Ω₀) replaced.
    pub fn physics_at(&self, omega: f64) -> Result<ValidatedConfig> {
        AtomLaserConfig { mass: self.mass, gamma: self.gamma, profile: self.rabi_profile(omega), beam_width: self.beam_width }.validate()
    }

    pub fn physics(&self) -> Result<ValidatedConfig> {
        self.physics_at(self.omega)
    }

    pub fn packet(&self) -> Result<PacketSpec> {
        if self.components.is_empty() {
            return Err(Error::Config("no packet components given".into()));
        }
        PacketSpec::new(self.components.clone(), self.mass)
    }

    pub fn velocity_axis(&self) -> Result<Vec<f64>> {
        axis("v", self.v_min, self.v_max, self.n_v, 1)
    }

    pub fn omega_axis(&self) -> Result<Vec<f64>> {
        axis("omega", self.omega_min, self.omega_max, self.n_omega, 1)
    }

    /// Checks the map ranges: positive, ordered, at least two points each.
    pub fn map_axes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((axis("v", self.v_min, self.v_max, self.n_v, 2)?, axis("omega", self.omega_min, self.omega_max, self.n_omega, 2)?))
    }

    pub fn width_axis(&self) -> Result<Vec<f64>> {
        axis("l", self.l_min, self.l_max, self.n_l, 1)
    }

    /// Every setting as (key, value) pairs, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut p: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| p.push((k.to_string(), v));
        put("preset", self.preset.clone().unwrap_or_else(|| "none".into()));
        put("mass", fmt(self.mass));
        put("gamma", fmt(self.gamma));
        put("omega", fmt(self.omega));
        put("beam_width", fmt(self.beam_width));
        put(
            "profile",
            match &self.profile {
                ProfileShape::Sharp => "sharp".into(),
                ProfileShape::Gaussian { center, width } => format!("gaussian center={} width={}", fmt(*center), fmt(*width)),
                ProfileShape::Tabulated(s) => {
                    let mut t = String::from("tabulated");
                    for (x, o) in s {
                        let _ = write!(t, " {}:{}", fmt(*x), fmt(*o));
                    }
                    t
                }
            },
        );
        put("v_min", fmt(self.v_min));
        put("v_max", fmt(self.v_max));
        put("n_v", self.n_v.to_string());
        put("omega_min", fmt(self.omega_min));
        put("omega_max", fmt(self.omega_max));
        put("n_omega", self.n_omega.to_string());
        put("cut_omegas", self.cut_omegas.iter().map(|o| fmt(*o)).collect::<Vec<_>>().join(" "));
        put("mark_ridges", self.mark_ridges.to_string());
        put("ridge_max", self.ridge_max.to_string());
        put("l_min", fmt(self.l_min));
        put("l_max", fmt(self.l_max));
        put("n_l", self.n_l.to_string());
        put("velocity", self.velocity.map_or("none".into(), fmt));
        put("delta_t", self.delta_t.map_or("none".into(), fmt));
        put("much_less", fmt(self.much_less));
        for (i, c) in self.components.iter().enumerate() {
            put(
                &format!("component{i}"),
                format!(
                    "{} {} {} {} {} {}",
                    fmt(c.mean_velocity),
                    fmt(c.delta_x),
                    fmt(c.waist_position),
                    fmt(c.waist_time),
                    fmt(c.weight.re),
                    fmt(c.weight.im)
                ),
            );
        }
        put("t_min", fmt(self.t_min));
        put("t_max", fmt(self.t_max));
        put("n_t", self.n_t.to_string());
        put("eval_point", self.eval_point.map_or("beam_width".into(), fmt));
        put("k_nodes", self.k_nodes.to_string());
        put("slices", self.slices.to_string());
        put("pi_route", format!("{:?}", self.pi_route).to_lowercase());
        put("deconvolution", format!("{:?}", self.deconvolution).to_lowercase());
        put("backend", format!("{:?}", self.backend).to_lowercase());
        p
    }
}

fn axis(name: &str, lo: f64, hi: f64, n: usize, min_n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(Error::Config(format!("{name} range must be positive, got [{lo}, {hi}]")));
    }
    if n < min_n {
        return Err(Error::Config(format!("{name} axis needs at least {min_n} points, got {n}")));
    }
    if n == 1 {
        return if hi >= lo { Ok(vec![lo]) } else { Err(Error::Config(format!("{name} range is empty"))) };
    }
    if !(hi > lo) {
        return Err(Error::Config(format!("{name} range [{lo}, {hi}] is empty or reversed")));
    }
    Ok((0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect())
}

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn num(s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Config(format!("'{}' is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("'{}' is not finite", s.trim())));
    }
    Ok(v)
}

fn int(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Config(format!("'{}' is not a non-negative integer", s.trim())))
}

fn boolean(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        o => Err(Error::Config(format!("'{o}' is not a boolean"))),
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(s) => s,
        o => o.to_string(),
    }
}
