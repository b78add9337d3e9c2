//! Closed-form regime diagnostics: penetration length, detection ridges and
//! windows, critical temperature and the classification of a (v, Ω) point.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Driving, ValidatedConfig, BOLTZMANN, HBAR};

/// Default ratio standing for "≪".
pub const DEFAULT_MUCH_LESS: f64 = 10.0;
/// Smallest ratio rhs/lhs accepted for "≲".
pub const ROUGHLY_LESS: f64 = 0.5;

/// l = 5v(2/γ + γ/Ω²).
pub fn penetration_length(v: f64, gamma: f64, omega: f64) -> f64 {
    5.0 * v * (2.0 / gamma + gamma / (omega * omega))
}

/// Velocity at which l = L for given Ω.
pub fn width_boundary_velocity(beam_width: f64, gamma: f64, omega: f64) -> f64 {
    beam_width / (5.0 * (2.0 / gamma + gamma / (omega * omega)))
}

/// Velocity at which 2E/(ħΩ) = 1.
pub fn reflection_boundary_velocity(mass: f64, omega: f64) -> f64 {
    (HBAR * omega / mass).sqrt()
}

/// v_n = LΩ/((2n+1)π).
pub fn ridge_velocity(beam_width: f64, omega: f64, n: usize) -> f64 {
    beam_width * omega / ((2 * n + 1) as f64 * PI)
}

/// Ω_n = (2n+1)πv/L.
pub fn ridge_omega(beam_width: f64, v: f64, n: usize) -> f64 {
    ridge_slope(beam_width, n) * v
}

pub fn ridge_slope(beam_width: f64, n: usize) -> f64 {
    (2 * n + 1) as f64 * PI / beam_width
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ridge {
    pub n: usize,
    pub velocity: f64,
    /// dΩ/dv of the ridge line through the origin.
    pub slope: f64,
}

pub fn ridge_locations(config: &ValidatedConfig, n_max: usize) -> Vec<Ridge> {
    let (l, omega) = (config.beam_width(), config.omega());
    (0..=n_max).map(|n| Ridge { n, velocity: ridge_velocity(l, omega, n), slope: ridge_slope(l, n) }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionWindow {
    /// Upper bound Δ_W on the velocity window with better than 99%
    /// absorption.
    pub width_bound: f64,
    /// Δv ≈ v_n/(60(2n+1)), the packet spread with Δ_W = 8Δv.
    pub packet_sigma: f64,
}

pub fn detection_window(config: &ValidatedConfig, n: usize) -> DetectionWindow {
    let (l, omega) = (config.beam_width(), config.omega());
    let m = (2 * n + 1) as f64;
    DetectionWindow {
        width_bound: (2.0 / (PI * m)).powi(2) * l * omega / 10.0,
        packet_sigma: ridge_velocity(l, omega, n) / (60.0 * m),
    }
}

/// T_c = m(Lγ/10)²/K.
pub fn critical_temperature(beam_width: f64, gamma: f64, mass: f64) -> f64 {
    let v = beam_width * gamma / 10.0;
    mass * v * v / BOLTZMANN
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamClass {
    SemiInfiniteLike,
    Finite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// lhs ≪ rhs.
    MuchLess,
    /// lhs ≲ rhs.
    RoughlyLess,
}

/// One inequality lhs ≪ rhs (or ≲). `margin` ≥ 1 means it holds.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityTerm {
    pub chain: &'static str,
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub margin: f64,
}

impl InequalityTerm {
    fn new(chain: &'static str, name: &'static str, lhs: f64, rhs: f64, relation: Relation, factor: f64) -> Self {
        let threshold = match relation {
            Relation::MuchLess => factor,
            Relation::RoughlyLess => ROUGHLY_LESS,
        };
        Self { chain, name, lhs, rhs, relation, margin: rhs / (lhs * threshold) }
    }

    pub fn passes(&self) -> bool {
        self.margin >= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub velocity: f64,
    pub omega: f64,
    pub gamma: f64,
    pub beam_width: f64,
    pub much_less_factor: f64,
    pub driving: Driving,
    /// E ≲ ħΩ/2.
    pub reflection_flag: bool,
    pub beam_class: BeamClass,
    pub penetration_length: f64,
    pub ridge_index: Option<usize>,
    pub terms: Vec<InequalityTerm>,
}

/// Classifies an atom of velocity `v` in a beam. `delta_t` is the passage
/// time span of the packet; `factor` is the ratio standing for "≪".
pub fn classify(config: &ValidatedConfig, v: f64, delta_t: f64, factor: f64) -> Result<RegimeReport> {
    if !(v > 0.0) {
        return Err(Error::NonPositiveVelocity(v));
    }
    if !(factor >= 1.0) {
        return Err(Error::InvalidArgument(format!("'≪' factor must be at least 1, got {factor}")));
    }
    let (m, gamma, omega, l) = (config.mass(), config.gamma(), config.omega(), config.beam_width());
    let energy = 0.5 * m * v * v;
    let pen = penetration_length(v, gamma, omega);
    let hbar_e = HBAR / energy;
    let delay = 1.0 / omega + gamma / (omega * omega);
    use Relation::*;
    let terms = vec![
        InequalityTerm::new("plateau", "hbar/E << 1/Omega + gamma/Omega^2", hbar_e, delay, MuchLess, factor),
        InequalityTerm::new("plateau", "1/Omega + gamma/Omega^2 << 2/gamma", delay, 2.0 / gamma, MuchLess, factor),
        InequalityTerm::new("plateau", "2/gamma << L/(5v)", 2.0 / gamma, l / (5.0 * v), MuchLess, factor),
        InequalityTerm::new("plateau", "2/gamma << delta_t", 2.0 / gamma, delta_t, MuchLess, factor),
        InequalityTerm::new("ideal", "hbar/E << 1/Omega", hbar_e, 1.0 / omega, MuchLess, factor),
        InequalityTerm::new("ideal", "1/Omega <~ L/v", 1.0 / omega, l / v, RoughlyLess, factor),
        InequalityTerm::new("ideal", "L/v << 1/gamma", l / v, 1.0 / gamma, MuchLess, factor),
    ];
    let ridge_index = (0..)
        .map(|n| (n, ridge_velocity(l, omega, n), detection_window(config, n).width_bound))
        .take_while(|&(_, vn, _)| vn > 0.0 && vn >= 0.5 * v)
        .find(|&(_, vn, w)| (v - vn).abs() <= 0.5 * w)
        .map(|(n, _, _)| n);
    Ok(RegimeReport {
        velocity: v,
        omega,
        gamma,
        beam_width: l,
        much_less_factor: factor,
        driving: if omega / gamma > 1.0 { Driving::Strong } else { Driving::Weak },
        reflection_flag: (HBAR * omega / 2.0) / energy >= ROUGHLY_LESS,
        beam_class: if l > pen { BeamClass::SemiInfiniteLike } else { BeamClass::Finite },
        penetration_length: pen,
        ridge_index,
        terms,
    })
}

impl RegimeReport {
    pub fn failing_terms(&self) -> Vec<&InequalityTerm> {
        self.terms.iter().filter(|t| !t.passes()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "velocity            {:.6e} m/s", self.velocity);
        let _ = writeln!(s, "omega               {:.6e} 1/s", self.omega);
        let _ = writeln!(s, "gamma               {:.6e} 1/s", self.gamma);
        let _ = writeln!(s, "beam width          {:.6e} m", self.beam_width);
        let _ = writeln!(s, "driving             {}", driving_name(self.driving));
        let _ = writeln!(s, "reflection          {}", if self.reflection_flag { "yes" } else { "no" });
        let _ = writeln!(s, "penetration length  {:.6e} m", self.penetration_length);
        let _ = writeln!(s, "beam class          {}", beam_name(self.beam_class));
        let ridge = self.ridge_index.map_or("none".to_string(), |n| n.to_string());
        let _ = writeln!(s, "ridge index         {ridge}");
        let _ = writeln!(s, "'<<' factor         {}", self.much_less_factor);
        for t in &self.terms {
            let _ = writeln!(
                s,
                "  [{}] {:<36} lhs {:.4e} rhs {:.4e} margin {:.4e} {}",
                t.chain,
                t.name,
                t.lhs,
                t.rhs,
                t.margin,
                if t.passes() { "pass" } else { "FAIL" }
            );
        }
        s
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("velocity,omega,gamma,beam_width,driving,reflection,penetration_length,beam_class,ridge_index");
        for t in &self.terms {
            let _ = write!(h, ",margin:{}", t.name);
        }
        h
    }

    pub fn to_csv_row(&self) -> String {
        let mut r = format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{},{}",
            self.velocity,
            self.omega,
            self.gamma,
            self.beam_width,
            driving_name(self.driving),
            self.reflection_flag,
            self.penetration_length,
            beam_name(self.beam_class),
            self.ridge_index.map_or(String::new(), |n| n.to_string())
        );
        for t in &self.terms {
            let _ = write!(r, ",{:.16e}", t.margin);
        }
        r
    }
}

pub fn driving_name(d: Driving) -> &'static str {
    match d {
        Driving::Strong => "strong",
        Driving::Weak => "weak",
    }
}

pub fn beam_name(b: BeamClass) -> &'static str {
    match b {
        BeamClass::SemiInfiniteLike => "semi-infinite-like",
        BeamClass::Finite => "finite",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cesium::{GAMMA, MASS};
    use crate::model::AtomLaserConfig;
    use proptest::prelude::*;

    fn cfg(omega: f64) -> ValidatedConfig {
        AtomLaserConfig::cesium(omega, 5e-6).validate().unwrap()
    }

    #[test]
    fn penetration_length_values() {
        // 5·(2/γ + 1/γ)
        let l = penetration_length(1.0, GAMMA, GAMMA);
        assert!((l - 15.0 / GAMMA).abs() < 1e-22);
        assert!((l - 4.505e-7).abs() < 5e-11);
        let l = penetration_length(265.0, GAMMA, 5.0 * GAMMA);
        assert!((l - 8.1e-5).abs() < 1e-6);
    }

    #[test]
    fn ridges_and_windows() {
        let c = cfg(104.43e6);
        let r = ridge_locations(&c, 1);
        assert!((r[0].velocity - 166.2).abs() < 0.05);
        assert!((r[0].velocity / r[1].velocity - 3.0).abs() < 1e-14);
        let w = detection_window(&c, 0);
        assert!((w.width_bound - 21.16).abs() < 0.05, "{}", w.width_bound);
        assert!((w.packet_sigma - 2.77).abs() < 0.005);
        // the two printed forms of the bound coincide
        assert!((w.width_bound - 4.0 * r[0].velocity / (10.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn critical_temperature_for_cesium() {
        let t = critical_temperature(5e-6, GAMMA, MASS);
        assert!((t - 4.43).abs() < 0.005, "{t}");
        assert!((critical_temperature(1e-5, GAMMA, MASS) / t - 4.0).abs() < 1e-12);
        assert_eq!(critical_temperature(0.0, GAMMA, MASS), 0.0);
    }

    #[test]
    fn ridge_point_is_finite_beam() {
        let r = classify(&cfg(104.43e6), 166.2, 1e-7, DEFAULT_MUCH_LESS).unwrap();
        assert_eq!(r.beam_class, BeamClass::Finite);
        assert_eq!(r.ridge_index, Some(0));
        let last = r.terms.iter().find(|t| t.name == "L/v << 1/gamma").unwrap();
        assert!(!last.passes());
        assert!((last.rhs / last.lhs - 1.0).abs() < 0.01);
    }

    #[test]
    fn reflection_flag() {
        let c = cfg(5.0 * GAMMA);
        // E = ħΩ/4
        let v = (HBAR * c.omega() / (2.0 * MASS)).sqrt();
        assert!(classify(&c, v, 1e-6, 10.0).unwrap().reflection_flag);
        assert!(!classify(&c, 20.0, 1e-6, 10.0).unwrap().reflection_flag);
    }

    proptest! {
        #[test]
        fn larger_factor_never_helps(v in 0.1f64..500.0, om in 0.1f64..10.0, f in 1.0f64..50.0, g in 1.0f64..5.0) {
            let c = cfg(om * GAMMA);
            let a = classify(&c, v, 1e-6, f).unwrap();
            let b = classify(&c, v, 1e-6, f * g).unwrap();
            for (x, y) in a.terms.iter().zip(&b.terms) {
                prop_assert!(y.margin <= x.margin);
                prop_assert!(!(y.passes() && !x.passes()));
            }
        }

        #[test]
        fn penetration_length_is_linear_in_v(v in 1e-3f64..1e3, om in 0.1f64..10.0) {
            let a = penetration_length(2.0 * v, GAMMA, om * GAMMA);
            let b = 2.0 * penetration_length(v, GAMMA, om * GAMMA);
            prop_assert!((a - b).abs() <= 1e-15 * b);
        }
    }
}
