//! Incident wave packets in momentum space and the k quadrature grid.
//!
//! A component is a Gaussian in k with |ψ̃|² of standard deviation
//! Δk = 1/(2Δx) and the quadratic phase e^{iħk²t_w/2m − ikx_w}, so that the
//! free packet is a minimal-uncertainty state centred at x_w at time t_w.
//!
//! All phases are taken relative to a reference wavenumber k_ref (the first
//! component's mean): the factor e^{iħk_ref²t_w/2m − ik_ref x_w} common to
//! the whole packet is dropped. Only a global constant phase is lost, and
//! the remaining phases stay small enough to evaluate accurately.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::I;
use crate::model::HBAR;

pub const DEFAULT_NODES: usize = 257;
/// Half-width of each k block in units of Δk.
pub const BLOCK_HALF_WIDTH: f64 = 10.0;
/// Upper bound allowed for the probability carried by k < 0.
pub const NEGATIVE_MOMENTUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub mean_velocity: f64,
    /// Position-space width Δx; |ψ|² has standard deviation Δx at the waist.
    pub delta_x: f64,
    pub waist_position: f64,
    pub waist_time: f64,
    pub weight: C64,
}

impl GaussianComponent {
    pub fn new(mean_velocity: f64, delta_x: f64, waist_position: f64, waist_time: f64) -> Self {
        Self { mean_velocity, delta_x, waist_position, waist_time, weight: C64::new(1.0, 0.0) }
    }

    pub fn with_weight(mut self, weight: C64) -> Self {
        self.weight = weight;
        self
    }

    pub fn mean_wavenumber(&self, mass: f64) -> f64 {
        mass * self.mean_velocity / HBAR
    }

    pub fn delta_k(&self) -> f64 {
        1.0 / (2.0 * self.delta_x)
    }

    /// Velocity spread ħΔk/m.
    pub fn delta_v(&self, mass: f64) -> f64 {
        HBAR * self.delta_k() / mass
    }
}

/// Coherent sum of Gaussian components, normalised to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketSpec {
    components: Vec<GaussianComponent>,
    mass: f64,
    k_ref: f64,
    /// Per-component factor weight·(2πΔk²)^{−1/4}/√(norm).
    prefactors: Vec<C64>,
}

/// Prefactor-free parameters of one component in the shifted variable
/// u = k − k_ref.
#[derive(Debug, Clone, Copy)]
struct Shifted {
    d: f64,
    inv4dk2: f64,
    alpha: f64,
    x_w: f64,
}

impl PacketSpec {
    pub fn new(components: Vec<GaussianComponent>, mass: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("a packet needs at least one component".into()));
        }
        if !(mass > 0.0) {
            return Err(Error::NonPositiveMass { field: "mass", value: mass });
        }
        for c in &components {
            if !(c.mean_velocity > 0.0) {
                return Err(Error::NonPositiveVelocity(c.mean_velocity));
            }
            if !(c.delta_x > 0.0) {
                return Err(Error::NonPositiveWidth { field: "delta_x", value: c.delta_x });
            }
            if !(c.waist_position.is_finite() && c.waist_time.is_finite() && c.weight.norm().is_finite()) {
                return Err(Error::InvalidArgument("non-finite packet parameter".into()));
            }
            let x = c.mean_wavenumber(mass) / (2f64.sqrt() * c.delta_k());
            let bound = (-x * x).exp() / (2.0 * x * PI.sqrt());
            if !(bound < NEGATIVE_MOMENTUM_TOLERANCE) {
                return Err(Error::NormDeficit(format!(
                    "component at v = {} m/s carries up to {bound:.3e} probability at negative momentum",
                    c.mean_velocity
                )));
            }
        }
        let k_ref = components[0].mean_wavenumber(mass);
        let mut spec = Self { components, mass, k_ref, prefactors: Vec::new() };
        let raw: Vec<C64> = spec.components.iter().map(|c| c.weight * (2.0 * PI * c.delta_k().powi(2)).powf(-0.25)).collect();
        spec.prefactors = raw.clone();
        let norm = spec.analytic_norm();
        let scale: f64 = raw.iter().map(|w| w.norm_sqr()).sum();
        if !(norm > 1e-12 * scale) {
            return Err(Error::NormDeficit(format!("components cancel: norm {norm:.3e}")));
        }
        let f = 1.0 / norm.sqrt();
        spec.prefactors = raw.iter().map(|w| w * f).collect();
        Ok(spec)
    }

    pub fn single(component: GaussianComponent, mass: f64) -> Result<Self> {
        Self::new(vec![component], mass)
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Reference wavenumber used for all phase factoring.
    pub fn k_ref(&self) -> f64 {
        self.k_ref
    }

    fn shifted(&self, c: &GaussianComponent) -> Shifted {
        let dk = c.delta_k();
        Shifted {
            d: c.mean_wavenumber(self.mass) - self.k_ref,
            inv4dk2: 1.0 / (4.0 * dk * dk),
            alpha: HBAR * c.waist_time / (2.0 * self.mass),
            x_w: c.waist_position,
        }
    }

    /// ∫|ψ̃|²dk with the current prefactors, from closed-form Gaussian
    /// integrals of every pair (cross terms included).
    pub fn analytic_norm(&self) -> f64 {
        let sh: Vec<Shifted> = self.components.iter().map(|c| self.shifted(c)).collect();
        let mut acc = C64::new(0.0, 0.0);
        for (i, a) in sh.iter().enumerate() {
            for (j, b) in sh.iter().enumerate() {
                let pref = self.prefactors[i] * self.prefactors[j].conj();
                acc += pref * self.pair_integral(a, b);
            }
        }
        acc.re
    }

    /// ∫ g_a(u) g_b*(u) du for unit prefactors, with
    /// g(u) = exp(−(u − d)²/4Δk² + iα u(u + 2k_ref) − i x_w u).
    fn pair_integral(&self, a: &Shifted, b: &Shifted) -> C64 {
        let da = a.alpha - b.alpha;
        let big_a = C64::new(a.inv4dk2 + b.inv4dk2, -da);
        let big_b = C64::new(2.0 * (a.d * a.inv4dk2 + b.d * b.inv4dk2), 2.0 * self.k_ref * da - (a.x_w - b.x_w));
        let big_c = -(a.d * a.d * a.inv4dk2 + b.d * b.d * b.inv4dk2);
        (PI / big_a).sqrt() * (big_b * big_b / (4.0 * big_a) + big_c).exp()
    }

    /// ψ̃(k), up to the global constant phase described in the module docs.
    pub fn spectral_amplitude(&self, k: f64) -> C64 {
        self.spectral_amplitude_offset(k - self.k_ref)
    }

    /// ψ̃(k_ref + u). Preferred over `spectral_amplitude` when Δk ≪ k.
    pub fn spectral_amplitude_offset(&self, u: f64) -> C64 {
        self.components
            .iter()
            .zip(&self.prefactors)
            .map(|(c, p)| {
                let s = self.shifted(c);
                let g = -(u - s.d).powi(2) * s.inv4dk2;
                let phase = s.alpha * u * (u + 2.0 * self.k_ref) - s.x_w * u;
                p * (C64::new(g, 0.0) + I * phase).exp()
            })
            .sum()
    }

    /// cᵢ(t) = wᵢ ψ̃(kᵢ) e^{−iħ(kᵢ² − k_ref²)t/2m}. Sums Σ cᵢ f(kᵢ) give the
    /// k integral of the evolving packet without the common carrier phase
    /// e^{−iħk_ref²t/2m}.
    pub fn coefficients(&self, grid: &KGrid, t: f64) -> Vec<C64> {
        let a = HBAR * t / (2.0 * self.mass);
        grid.weights
            .iter()
            .zip(&grid.offsets)
            .map(|(&w, &u)| {
                let phase = -a * u * (2.0 * self.k_ref + u);
                w * self.spectral_amplitude_offset(u) * C64::from_polar(1.0, phase)
            })
            .collect()
    }

    /// Mean velocity of the probability distribution |ψ̃|², evaluated on a
    /// grid.
    pub fn mean_velocity(&self, grid: &KGrid) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for ((k, w), &u) in grid.iter().zip(&grid.offsets) {
            let p = self.spectral_amplitude_offset(u).norm_sqr() * w;
            num += p * k;
            den += p;
        }
        HBAR * num / (den * self.mass)
    }

    /// Range of the phase slopes x_w − ħk t_w/m over components and over
    /// u ∈ [a, b]. Zero for a single component.
    fn position_spread(&self, a: f64, b: f64) -> f64 {
        if self.components.len() < 2 {
            return 0.0;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in &self.components {
            let s = self.shifted(c);
            for u in [a, b] {
                let y = s.x_w - 2.0 * s.alpha * (u + self.k_ref);
                lo = lo.min(y);
                hi = hi.max(y);
            }
        }
        hi - lo
    }

    /// Largest and smallest component velocities.
    pub fn velocity_range(&self) -> (f64, f64) {
        let v = self.components.iter().map(|c| c.mean_velocity);
        (v.clone().fold(f64::INFINITY, f64::min), v.fold(0.0, f64::max))
    }

    /// Largest position width among the components.
    pub fn max_delta_x(&self) -> f64 {
        self.components.iter().map(|c| c.delta_x).fold(0.0, f64::max)
    }

    /// Packet centre ⟨x⟩ of the freely moving packet at time t, per
    /// component: x_w + v̄(t − t_w).
    pub fn free_centres(&self, t: f64) -> Vec<f64> {
        self.components.iter().map(|c| c.waist_position + c.mean_velocity * (t - c.waist_time)).collect()
    }

    /// Spatial standard deviation of each freely spreading component at t.
    pub fn free_widths(&self, t: f64) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                let tau = HBAR * (t - c.waist_time) / (2.0 * self.mass * c.delta_x * c.delta_x);
                c.delta_x * (1.0 + tau * tau).sqrt()
            })
            .collect()
    }
}

/// Quadrature nodes and weights in k.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// nodes − k_ref, computed without cancellation.
    pub offsets: Vec<f64>,
    pub k_ref: f64,
}

impl KGrid {
    /// Gauss–Legendre blocks over [k̄ − 10Δk, k̄ + 10Δk] for every component,
    /// overlapping blocks merged. A merged interval spanning several block
    /// widths gets proportionally more nodes.
    pub fn for_packet(spec: &PacketSpec, nodes_per_block: usize) -> Result<Self> {
        Self::resolving(spec, nodes_per_block, 0.0)
    }

    /// Like `for_packet`, with extra nodes so that integrands e^{iky} are
    /// resolved for |y| up to `extent`, on top of the relative phases of
    /// the components.
    pub fn resolving(spec: &PacketSpec, nodes_per_block: usize, extent: f64) -> Result<Self> {
        let n = NonZeroUsize::new(nodes_per_block).ok_or_else(|| Error::InvalidArgument("k grid needs at least one node".into()))?;
        if !(extent >= 0.0 && extent.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad extent {extent}")));
        }
        let mut intervals: Vec<(f64, f64, f64)> = spec
            .components
            .iter()
            .map(|c| {
                let d = c.mean_wavenumber(spec.mass) - spec.k_ref;
                let h = BLOCK_HALF_WIDTH * c.delta_k();
                ((d - h).max(-spec.k_ref), d + h, 2.0 * h)
            })
            .collect();
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64, f64)> = Vec::new();
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.0 <= last.1 => {
                    last.1 = last.1.max(iv.1);
                    last.2 = last.2.min(iv.2);
                }
                _ => merged.push(iv),
            }
        }
        let mut grid = KGrid { nodes: Vec::new(), weights: Vec::new(), offsets: Vec::new(), k_ref: spec.k_ref };
        for (a, b, block) in merged {
            let blocks = ((b - a) / block).ceil().max(1.0) as usize;
            let phase_span = (b - a) * (spec.position_spread(a, b) + extent);
            if !(phase_span < 1e8) {
                return Err(Error::InvalidArgument(format!("k grid would need {phase_span:.3e} rad of phase resolution")));
            }
            let count = n.get() * blocks + (0.5 * phase_span).ceil() as usize;
            let rule = GaussLegendre::new(NonZeroUsize::new(count).unwrap());
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, w) in rule.nodes().zip(rule.weights()) {
                let u = mid + half * x;
                grid.offsets.push(u);
                grid.nodes.push(spec.k_ref + u);
                grid.weights.push(half * w);
            }
        }
        if grid.nodes.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::NormDeficit("k grid reaches non-positive wavenumbers".into()));
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Σ wᵢ|ψ̃(kᵢ)|².
    pub fn captured_norm(&self, spec: &PacketSpec) -> f64 {
        self.weights.iter().zip(&self.offsets).map(|(w, &u)| w * spec.spectral_amplitude_offset(u).norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cesium::MASS;
    use proptest::prelude::*;

    fn fig6() -> PacketSpec {
        let v1 = 167.05;
        let a = GaussianComponent::new(v1, 4233e-6, 5e-6, 0.0);
        let b = GaussianComponent::new(v1 + 0.9e-6, 4233e-6, 5e-6, 0.0);
        PacketSpec::new(vec![a, b], MASS).unwrap()
    }

    #[test]
    fn single_component_peak_and_norm() {
        let c = GaussianComponent::new(100.0, 1e-7, -1e-5, 2e-7);
        let s = PacketSpec::single(c, MASS).unwrap();
        let kb = c.mean_wavenumber(MASS);
        let dk = c.delta_k();
        let peak = s.spectral_amplitude(kb).norm();
        for f in [-0.1, 0.05, 0.5] {
            assert!(s.spectral_amplitude(kb + f * dk).norm() < peak);
        }
        assert!((peak - (2.0 * PI * dk * dk).powf(-0.25)).abs() < 1e-12 * peak);
        let g = KGrid::for_packet(&s, DEFAULT_NODES).unwrap();
        assert!((g.captured_norm(&s) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fig6_pair_is_normalised_on_the_grid() {
        let s = fig6();
        let g = KGrid::for_packet(&s, DEFAULT_NODES).unwrap();
        let n = g.captured_norm(&s);
        assert!((n - 1.0).abs() < 1e-10, "{n} {}", s.analytic_norm());
        // components are 16Δk apart, so their blocks overlap and merge
        let dk = s.components()[0].delta_k();
        let sep = s.components()[1].mean_wavenumber(MASS) - s.components()[0].mean_wavenumber(MASS);
        assert!((sep / dk - 15.93).abs() < 0.05, "{}", sep / dk);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn overlapping_components_interfere_in_the_norm() {
        let a = GaussianComponent::new(100.0, 1e-7, 0.0, 0.0);
        let b = GaussianComponent::new(100.0 + 1e-3, 1e-7, 0.0, 0.0).with_weight(C64::new(-1.0, 0.0));
        let s = PacketSpec::new(vec![a, b], MASS).unwrap();
        let g = KGrid::for_packet(&s, DEFAULT_NODES).unwrap();
        assert!((g.captured_norm(&s) - 1.0).abs() < 1e-10);
        let c = GaussianComponent::new(100.0, 1e-7, 0.0, 0.0);
        let cancel = PacketSpec::new(vec![c, c.with_weight(C64::new(-1.0, 0.0))], MASS);
        assert!(matches!(cancel, Err(Error::NormDeficit(_))));
    }

    #[test]
    fn negative_momentum_rejected() {
        // Δv comparable to v̄
        let c = GaussianComponent::new(1e-3, 1e-8, 0.0, 0.0);
        let dv = c.delta_v(MASS);
        assert!(dv > 1e-3);
        assert!(matches!(PacketSpec::single(c, MASS), Err(Error::NormDeficit(_))));
    }

    proptest! {
        #[test]
        fn norm_is_one(v in 20.0f64..400.0, dx in 1e-8f64..1e-5, xw in -1e-3f64..1e-3, tw in -1e-4f64..1e-4,
                       dv2 in -0.5f64..0.5, ph in 0.0f64..6.28) {
            let a = GaussianComponent::new(v, dx, xw, tw);
            let b = GaussianComponent::new(v + dv2 * a.delta_v(MASS) * 3.0, dx * 1.3, -xw, tw * 0.5)
                .with_weight(C64::from_polar(0.7, ph));
            let s = PacketSpec::new(vec![a, b], MASS).unwrap();
            let g = KGrid::for_packet(&s, DEFAULT_NODES).unwrap();
            prop_assert!((g.captured_norm(&s) - 1.0).abs() < 1e-9);
        }
    }
}
