//! Stationary scattering states of the conditional Hamiltonian
//!
//! ```text
//! H_c = p²/2m + (ħ/2)·[[0, 0], [0, −iγ]] + (ħ/2)·χ(x)·[[0, Ω], [Ω, 0]]
//! ```
//!
//! for a sharp-edged beam on (0, L), with a ground-state plane wave incident
//! from the left. Outside the beam the wave is
//!
//! ```text
//! √(2π)Φ = (e^{ikx} + R₁e^{−ikx}, R₂e^{−iqx})   x ≤ 0
//! √(2π)Φ = (T₁e^{ikx},            T₂e^{iqx})    x ≥ L
//! ```
//!
//! and inside it is a superposition of the internal eigenvectors |λ±⟩
//! propagating with e^{±ik±x}. Continuity of both components and their
//! derivatives at 0 and L gives an 8×8 linear system.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{solve_dense, upper_sqrt, I};
use crate::model::{ValidatedConfig, HBAR};
use crate::wave::{exp_i, WavePiece, WaveTerm, WaveValue};

/// Relative distance |γ − 2Ω|/(γ + 2Ω) below which λ₊ and λ₋ are treated
/// as coincident.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;
/// Relative shift of γ used on either side of an exceptional point.
pub const DEGENERACY_SHIFT: f64 = 1e-6;
/// Minimum |U_ii| ratio accepted from the LU factorisation.
pub const MIN_PIVOT_RATIO: f64 = 1e-14;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalEigensystem {
    pub lambda_plus: C64,
    pub lambda_minus: C64,
    /// (1, 2λ₊/Ω)
    pub eigvec_plus: [C64; 2],
    /// (1, 2λ₋/Ω)
    pub eigvec_minus: [C64; 2],
    pub degenerate: bool,
}

/// λ± = −iγ/4 ± (i/4)√(γ² − 4Ω²): eigenvalues of ½[[0, Ω], [Ω, −iγ]].
fn eigenvalues(gamma: f64, omega: f64) -> (C64, C64) {
    let disc = C64::new(gamma * gamma - 4.0 * omega * omega, 0.0).sqrt();
    let base = C64::new(0.0, -gamma / 4.0);
    let lm = base - I * disc / 4.0;
    if gamma > 2.0 * omega {
        // λ₊λ₋ = −Ω²/4 avoids the cancellation in the small root.
        (C64::new(-omega * omega / 4.0, 0.0) / lm, lm)
    } else {
        (base + I * disc / 4.0, lm)
    }
}

pub fn is_degenerate(gamma: f64, omega: f64) -> bool {
    let denom = gamma + 2.0 * omega;
    denom > 0.0 && (gamma - 2.0 * omega).abs() / denom < DEGENERACY_THRESHOLD
}

pub fn internal_eigensystem(gamma: f64, omega: f64) -> Result<InternalEigensystem> {
    if !(gamma >= 0.0) {
        return Err(Error::NegativeRate { field: "gamma", value: gamma });
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(
            "internal eigensystem needs omega > 0; the uncoupled case has no |λ±> basis".into(),
        ));
    }
    let (lp, lm) = eigenvalues(gamma, omega);
    Ok(InternalEigensystem {
        lambda_plus: lp,
        lambda_minus: lm,
        eigvec_plus: [ONE, lp * 2.0 / omega],
        eigvec_minus: [ONE, lm * 2.0 / omega],
        degenerate: is_degenerate(gamma, omega),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelWavenumbers {
    pub k: f64,
    /// ħ²q²/2m = E + iħγ/2, Im q > 0.
    pub q: C64,
    pub k_plus: C64,
    pub k_minus: C64,
    /// q² − k², exact.
    pub q2_minus_k2: C64,
    /// k±² − k².
    pub shift_plus: C64,
    pub shift_minus: C64,
}

impl ChannelWavenumbers {
    /// q − k computed without cancellation.
    pub fn q_minus_k(&self) -> C64 {
        self.q2_minus_k2 / (self.q + self.k)
    }
}

/// Channel wavenumbers at incident wavenumber `k`.
pub fn wavenumbers_at(k: f64, gamma: f64, omega: f64, mass: f64) -> ChannelWavenumbers {
    let k2 = C64::new(k * k, 0.0);
    let q = if gamma == 0.0 {
        C64::new(k, 0.0)
    } else {
        upper_sqrt(k2 + I * (gamma * mass / HBAR))
    };
    let (lp, lm) = eigenvalues(gamma, omega);
    let s = 2.0 * mass / HBAR;
    ChannelWavenumbers {
        k,
        q,
        k_plus: upper_sqrt(k2 - lp * s),
        k_minus: upper_sqrt(k2 - lm * s),
        q2_minus_k2: I * (gamma * mass / HBAR),
        shift_plus: -lp * s,
        shift_minus: -lm * s,
    }
}

/// Channel wavenumbers at kinetic energy `energy` (J).
pub fn channel_wavenumbers(energy: f64, gamma: f64, omega: f64, mass: f64) -> Result<ChannelWavenumbers> {
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument(format!("energy must be positive, got {energy}")));
    }
    let k = (2.0 * mass * energy).sqrt() / HBAR;
    Ok(wavenumbers_at(k, gamma, omega, mass))
}

/// Interior coefficients C₊₊, C₋₊, C₊₋, C₋₋ of a sharp-edged solution,
/// in the |λ±⟩ = (1, 2λ±/Ω) normalisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorCoefficients {
    pub c_pp: C64,
    pub c_mp: C64,
    pub c_pm: C64,
    pub c_mm: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolutionKind {
    /// Ω ≡ 0: free ground channel, nothing excited.
    Free,
    SharpEdge {
        eigensystem: InternalEigensystem,
        wavenumbers: ChannelWavenumbers,
        coefficients: InteriorCoefficients,
    },
    /// Average of two solutions at γ(1 ± DEGENERACY_SHIFT).
    DegenerateAverage,
    /// Transfer-matrix solution; per-slice value/derivative states at the
    /// slice edges.
    Sliced {
        edges: Vec<f64>,
        omegas: Vec<f64>,
        edge_states: Vec<[C64; 4]>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringSolution {
    pub k: f64,
    pub q: C64,
    pub r1: C64,
    pub r2: C64,
    pub t1: C64,
    pub t2: C64,
    /// Left free region, interior pieces, right free region.
    pub pieces: Vec<WavePiece>,
    pub kind: SolutionKind,
}

impl ScatteringSolution {
    /// Start and end of the coupled region.
    pub fn support(&self) -> (f64, f64) {
        (self.pieces[0].end, self.pieces[self.pieces.len() - 1].start)
    }

    /// T₁ referred to the right edge b of the support: φ⁽¹⁾ = T₁ᵇ e^{ik(x−b)}.
    pub fn t1_at_edge(&self) -> C64 {
        let b = self.support().1;
        self.t1 * exp_i(C64::new(self.k, 0.0), b)
    }

    /// T₂ referred to the right edge: φ⁽²⁾ = T₂ᵇ e^{iq(x−b)}.
    pub fn t2_at_edge(&self) -> C64 {
        let b = self.support().1;
        self.t2 * exp_i(self.q, b)
    }

    pub fn interior_coefficients(&self) -> Option<InteriorCoefficients> {
        match &self.kind {
            SolutionKind::SharpEdge { coefficients, .. } => Some(*coefficients),
            _ => None,
        }
    }

    fn piece_at(&self, x: f64) -> &WavePiece {
        let n = self.pieces.len();
        if x <= self.pieces[0].end {
            return &self.pieces[0];
        }
        if x >= self.pieces[n - 1].start {
            return &self.pieces[n - 1];
        }
        let idx = self.pieces[1..n - 1].partition_point(|p| p.end < x);
        &self.pieces[1 + idx.min(n - 3)]
    }

    /// √(2π)Φ and its derivative from the piece containing `x`.
    pub fn evaluate_scaled(&self, x: f64) -> WaveValue {
        self.piece_at(x).evaluate(x)
    }

    /// √(2π)Φ evaluated with the expression of a chosen piece, used to
    /// check continuity at piece boundaries.
    pub fn evaluate_piece(&self, piece: usize, x: f64) -> WaveValue {
        self.pieces[piece].evaluate(x)
    }

    /// (φ⁽¹⁾(x), φ⁽²⁾(x)) including the 1/√(2π) normalisation.
    pub fn evaluate_state(&self, x: f64) -> [C64; 2] {
        let v = self.evaluate_scaled(x).value;
        let n = (2.0 * std::f64::consts::PI).sqrt();
        [v[0] / n, v[1] / n]
    }

    pub fn flux_sum(&self) -> f64 {
        self.r1.norm_sqr() + self.r2.norm_sqr() + self.t1.norm_sqr() + self.t2.norm_sqr()
    }
}

/// Left and right free-region pieces for given amplitudes. The right piece
/// is referred to `b`.
pub(crate) fn outer_pieces(k: f64, q: C64, r1: C64, r2: C64, t1_b: C64, t2_b: C64, a: f64, b: f64) -> (WavePiece, WavePiece) {
    let kc = C64::new(k, 0.0);
    let left = WavePiece {
        start: f64::NEG_INFINITY,
        end: a,
        terms: vec![
            WaveTerm::new([ONE, ZERO], kc, 0.0),
            WaveTerm::new([r1, ZERO], -kc, 0.0),
            WaveTerm::new([ZERO, r2], -q, 0.0),
        ],
    };
    let right = WavePiece {
        start: b,
        end: f64::INFINITY,
        terms: vec![WaveTerm::new([t1_b, ZERO], kc, b), WaveTerm::new([ZERO, t2_b], q, b)],
    };
    (left, right)
}

pub fn free_solution(k: f64, gamma: f64, mass: f64, a: f64, b: f64) -> ScatteringSolution {
    let w = wavenumbers_at(k, gamma, 0.0, mass);
    let kc = C64::new(k, 0.0);
    let t1_b = exp_i(kc, b);
    let (left, right) = outer_pieces(k, w.q, ZERO, ZERO, t1_b, ZERO, a, b);
    let interior = WavePiece {
        start: a,
        end: b,
        terms: vec![WaveTerm::new([ONE, ZERO], kc, 0.0)],
    };
    ScatteringSolution {
        k,
        q: w.q,
        r1: ZERO,
        r2: ZERO,
        t1: ONE,
        t2: ZERO,
        pieces: vec![left, interior, right],
        kind: SolutionKind::Free,
    }
}

pub fn solve_sharp_edge(k: f64, config: &ValidatedConfig) -> Result<ScatteringSolution> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("wavenumber must be positive, got {k}")));
    }
    if !config.profile().is_sharp() {
        return Err(Error::InvalidArgument("solve_sharp_edge needs a sharp-edged profile".into()));
    }
    let omega = config.omega();
    let gamma = config.gamma();
    let mass = config.mass();
    let l = config.beam_width();
    if omega == 0.0 {
        return Ok(free_solution(k, gamma, mass, 0.0, l));
    }
    if is_degenerate(gamma, omega) {
        let lo = solve_coupled(k, gamma * (1.0 - DEGENERACY_SHIFT), omega, mass, l)?;
        let hi = solve_coupled(k, gamma * (1.0 + DEGENERACY_SHIFT), omega, mass, l)?;
        return Ok(average(&lo, &hi));
    }
    solve_coupled(k, gamma, omega, mass, l)
}

fn average(a: &ScatteringSolution, b: &ScatteringSolution) -> ScatteringSolution {
    let half = |x: C64, y: C64| (x + y) * 0.5;
    let (r1, r2, t1, t2) = (half(a.r1, b.r1), half(a.r2, b.r2), half(a.t1, b.t1), half(a.t2, b.t2));
    let q = half(a.q, b.q);
    let interior = WavePiece {
        start: a.pieces[1].start,
        end: a.pieces[1].end,
        terms: a.pieces[1]
            .terms
            .iter()
            .chain(b.pieces[1].terms.iter())
            .map(|t| WaveTerm { amplitude: [t.amplitude[0] * 0.5, t.amplitude[1] * 0.5], ..*t })
            .collect(),
    };
    // The outer pieces are averaged term by term, keeping each side's own q.
    let merge = |pa: &WavePiece, pb: &WavePiece| WavePiece {
        start: pa.start,
        end: pa.end,
        terms: pa
            .terms
            .iter()
            .chain(pb.terms.iter())
            .map(|t| WaveTerm { amplitude: [t.amplitude[0] * 0.5, t.amplitude[1] * 0.5], ..*t })
            .collect(),
    };
    let left = merge(&a.pieces[0], &b.pieces[0]);
    let right = merge(&a.pieces[2], &b.pieces[2]);
    ScatteringSolution {
        k: a.k,
        q,
        r1,
        r2,
        t1,
        t2,
        pieces: vec![left, interior, right],
        kind: SolutionKind::DegenerateAverage,
    }
}

fn solve_coupled(k: f64, gamma: f64, omega: f64, mass: f64, l: f64) -> Result<ScatteringSolution> {
    let eig = internal_eigensystem(gamma, omega)?;
    let w = wavenumbers_at(k, gamma, omega, mass);
    let (kp, km, q) = (w.k_plus, w.k_minus, w.q);

    // Unit-norm copies of |λ±⟩ keep the rows balanced when 2λ/Ω is large.
    let unit = |v: [C64; 2]| {
        let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        ([v[0] / n, v[1] / n], n)
    };
    let (vp, np) = unit(eig.eigvec_plus);
    let (vm, nm) = unit(eig.eigvec_minus);

    // e^{ik±L} = e^{ikL}·e^{i(k± − k)L}, |.| ≤ 1 since Im k± ≥ 0.
    let kk = C64::new(k, 0.0);
    let (off_p, off_m) = (w.shift_plus / (kp + kk), w.shift_minus / (km + kk));
    let phi = exp_i(kk, l);
    let ep = phi * exp_i(off_p, l);
    let em = phi * exp_i(off_m, l);

    // Rows are ψ'/k ∓ (ip/k)ψ at each edge, p the outer wavenumber of the
    // component, so the outgoing and incoming parts separate. κ − p is
    // formed from κ² − p² to keep small reflections accurate; for p = q,
    // k±² − q² = −(k∓² − k²) since λ₊ + λ₋ = −iγ/2.
    let modes = [(vp, kp, ep), (vm, km, em)];
    let gaps = [[w.shift_plus, w.shift_minus], [-w.shift_minus, -w.shift_plus]];
    let outer = [kk, q];
    let mut a = DMatrix::<C64>::zeros(8, 8);
    let mut rhs = DVector::<C64>::zeros(8);
    for (c, &p) in outer.iter().enumerate() {
        let dp = I * p / kk;
        let (r_out, r_in) = (2 * c, 2 * c + 1);
        let (l_out, l_in) = (4 + 2 * c, 4 + 2 * c + 1);
        for (m, &(v, kap, e)) in modes.iter().enumerate() {
            let diff = I * gaps[c][m] / ((kap + p) * kk);
            let sum = I * kap / kk + dp;
            let vc = v[c];
            a[(r_out, 4 + m)] = vc * diff;
            a[(r_out, 6 + m)] = -vc * e * sum;
            a[(r_in, 4 + m)] = vc * sum;
            a[(r_in, 6 + m)] = -vc * e * diff;
            a[(l_out, 4 + m)] = vc * e * diff;
            a[(l_out, 6 + m)] = -vc * sum;
            a[(l_in, 4 + m)] = vc * e * sum;
            a[(l_in, 6 + m)] = -vc * diff;
        }
        a[(r_out, c)] = dp * 2.0;
        a[(l_in, 2 + c)] = -dp * 2.0;
        if c == 0 {
            rhs[r_in] = dp * 2.0;
        }
    }

    let (x, _) = solve_dense(a, rhs, MIN_PIVOT_RATIO)?;
    let (r1, r2, t1_l, t2_l) = (x[0], x[1], x[2], x[3]);
    let (cpp_u, cmp_u, dpm_u, dmm_u) = (x[4], x[5], x[6], x[7]);

    let t1 = t1_l * phi.conj();
    let t2 = t2_l * phi.conj() * exp_i(-w.q_minus_k(), l);
    let coefficients = InteriorCoefficients {
        c_pp: cpp_u / np,
        c_mp: cmp_u / nm,
        c_pm: dpm_u * ep / np,
        c_mm: dmm_u * em / nm,
    };

    let interior = WavePiece {
        start: 0.0,
        end: l,
        terms: vec![
            WaveTerm::detuned([vp[0] * cpp_u, vp[1] * cpp_u], k, off_p, 0.0),
            WaveTerm::detuned([vm[0] * cmp_u, vm[1] * cmp_u], k, off_m, 0.0),
            WaveTerm::detuned([vp[0] * dpm_u, vp[1] * dpm_u], -k, -off_p, l),
            WaveTerm::detuned([vm[0] * dmm_u, vm[1] * dmm_u], -k, -off_m, l),
        ],
    };
    let (left, right) = outer_pieces(k, q, r1, r2, t1_l, t2_l, 0.0, l);
    Ok(ScatteringSolution {
        k,
        q,
        r1,
        r2,
        t1,
        t2,
        pieces: vec![left, interior, right],
        kind: SolutionKind::SharpEdge { eigensystem: eig, wavenumbers: w, coefficients },
    })
}

/// A = 1 − |T₁|² − |R₁|².
pub fn absorption(sol: &ScatteringSolution) -> Result<f64> {
    let a = 1.0 - sol.t1.norm_sqr() - sol.r1.norm_sqr();
    if !(a >= -1e-8 && a <= 1.0 + 1e-8) {
        return Err(Error::NonPhysicalAbsorption(a));
    }
    Ok(a.clamp(0.0, 1.0))
}

/// Absorption at velocity `v` for a sharp-edged beam.
pub fn absorption_at(config: &ValidatedConfig, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::NonPositiveVelocity(v));
    }
    absorption(&solve_sharp_edge(config.wavenumber(v), config)?)
}

/// √(Ω² − γ²/4) as a complex number, so the weak-driving branch continues
/// into hyperbolic functions.
fn rabi_shifted(omega: f64, gamma: f64) -> C64 {
    C64::new(omega * omega - gamma * gamma / 4.0, 0.0).sqrt()
}

/// Internal amplitudes of an atom entering the beam in the ground state,
/// after a flight time `tau` (no translational factor).
fn internal_amplitudes(omega: f64, gamma: f64, tau: f64) -> [C64; 2] {
    let w = rabi_shifted(omega, gamma);
    let theta = w * (tau / 2.0);
    let envelope = (-gamma * tau / 4.0).exp();
    // sin(θ)/w = (τ/2)·sinc(θ), finite at w = 0
    let sin_over_w = crate::linalg::sinc(theta) * (tau / 2.0);
    let ground = theta.cos() + sin_over_w * (gamma / 2.0);
    let excited = -I * omega * sin_over_w;
    [ground * envelope, excited * envelope]
}

/// Semiclassical interior state: internal dynamics of an atom at rest
/// evaluated at t = x/v, times the plane wave e^{ikx}/√(2π).
pub fn semiclassical_state(k: f64, config: &ValidatedConfig, x: f64) -> [C64; 2] {
    let v = config.velocity(k);
    let amp = internal_amplitudes(config.omega(), config.gamma(), x / v);
    let carrier = (I * k * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    [amp[0] * carrier, amp[1] * carrier]
}

/// Semiclassical excited-channel transmission amplitude
/// T₂ = e^{i(k−q)L} e^{−γL/4v} (−iΩ/Ω′) sin(LΩ′/2v).
pub fn semiclassical_t2(k: f64, config: &ValidatedConfig) -> C64 {
    let l = config.beam_width();
    let v = config.velocity(k);
    let w = wavenumbers_at(k, config.gamma(), config.omega(), config.mass());
    let amp = internal_amplitudes(config.omega(), config.gamma(), l / v)[1];
    (-I * w.q_minus_k() * l).exp() * amp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cesium, AtomLaserConfig};
    use std::f64::consts::PI;

    fn cs(omega: f64, l: f64) -> ValidatedConfig {
        AtomLaserConfig::cesium(omega, l).validate().unwrap()
    }

    #[test]
    fn eigensystem_hermitian_limit() {
        let om = 2.0e7;
        let e = internal_eigensystem(0.0, om).unwrap();
        assert!((e.lambda_plus - C64::new(-om / 2.0, 0.0)).norm() < 1e-9);
        assert!((e.lambda_minus - C64::new(om / 2.0, 0.0)).norm() < 1e-9);
        assert!((e.eigvec_plus[1] + 1.0).norm() < 1e-15);
        assert!((e.eigvec_minus[1] - 1.0).norm() < 1e-15);
        assert!(!e.degenerate);
    }

    #[test]
    fn eigensystem_weak_coupling_limit() {
        let g = cesium::GAMMA;
        let e = internal_eigensystem(g, 1e-3).unwrap();
        assert!(e.lambda_plus.norm() < 1e-9);
        assert!((e.lambda_minus - C64::new(0.0, -g / 2.0)).norm() < 1e-6);
    }

    #[test]
    fn eigensystem_degenerate_point() {
        let g = 4.0e7;
        let e = internal_eigensystem(g, g / 2.0).unwrap();
        assert!(e.degenerate);
        assert!((e.lambda_plus - C64::new(0.0, -g / 4.0)).norm() < 1e-9 * g);
        assert!((e.lambda_minus - e.lambda_plus).norm() < 1e-9 * g);
        assert!(internal_eigensystem(g, 0.0).is_err());
    }

    #[test]
    fn eigensystem_residual_and_invariants() {
        for &(g, om) in &[(0.0, 1.0), (3.0, 1.0), (1.0, 3.0), (33.3e6, 104.43e6), (1.0, 0.01)] {
            let e = internal_eigensystem(g, om).unwrap();
            let m = [[C64::new(0.0, 0.0), C64::new(om / 2.0, 0.0)], [C64::new(om / 2.0, 0.0), C64::new(0.0, -g / 2.0)]];
            for (lam, v) in [(e.lambda_plus, e.eigvec_plus), (e.lambda_minus, e.eigvec_minus)] {
                let mv = crate::linalg::mat2_vec(&m, &v);
                let res = ((mv[0] - lam * v[0]).norm_sqr() + (mv[1] - lam * v[1]).norm_sqr()).sqrt();
                let scale = lam.norm().max(om) * (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
                assert!(res < 1e-12 * scale, "residual {res} for {g} {om}");
            }
            let tr = e.lambda_plus + e.lambda_minus;
            let det = e.lambda_plus * e.lambda_minus;
            assert!((tr - C64::new(0.0, -g / 2.0)).norm() < 1e-12 * (g + om));
            assert!((det + om * om / 4.0).norm() < 1e-12 * (g * g + om * om));
        }
    }

    #[test]
    fn eigenvalues_continuous_across_exceptional_point() {
        let om = 1.0;
        let below = eigenvalues(2.0 - 1e-8, om);
        let above = eigenvalues(2.0 + 1e-8, om);
        assert!((below.0 - above.0).norm() < 1e-3);
        assert!((below.1 - above.1).norm() < 1e-3);
    }

    #[test]
    fn wavenumbers_hermitian() {
        let m = cesium::MASS;
        let k = 3e11;
        let w = wavenumbers_at(k, 0.0, 1e8, m);
        assert_eq!(w.q, C64::new(k, 0.0));
        let kp2 = w.k_plus * w.k_plus;
        let km2 = w.k_minus * w.k_minus;
        assert!((kp2 - C64::new(k * k + m * 1e8 / HBAR, 0.0)).norm() < 1e-14 * k * k);
        assert!((km2 - C64::new(k * k - m * 1e8 / HBAR, 0.0)).norm() < 1e-14 * k * k);
        let e = HBAR * HBAR * k * k / (2.0 * m);
        let w2 = channel_wavenumbers(e, 0.0, 1e8, m).unwrap();
        assert!((w2.k - k).abs() < 1e-12 * k);
        assert!(channel_wavenumbers(0.0, 0.0, 1e8, m).is_err());
    }

    #[test]
    fn wavenumbers_cesium_decay_rate() {
        let m = cesium::MASS;
        let v = 166.2;
        let e = 0.5 * m * v * v;
        let w = channel_wavenumbers(e, cesium::GAMMA, 5.0 * cesium::GAMMA, m).unwrap();
        // first-order expansion of √(k² + iγm/ħ)
        let approx = cesium::GAMMA * m / (2.0 * HBAR * w.k);
        assert!((w.q.im - approx).abs() / approx < 1e-6);
        assert!((w.q.im - 1.0e5).abs() / 1.0e5 < 0.01);
        assert!(w.k_plus.im > 0.0 && w.k_minus.im > 0.0);
        let qk = w.q_minus_k();
        assert!((qk - (w.q - w.k)).norm() < 1e-3 * qk.norm());
    }

    #[test]
    fn uncoupled_is_free() {
        let cfg = cs(0.0, 5e-6);
        let k = cfg.wavenumber(100.0);
        let s = solve_sharp_edge(k, &cfg).unwrap();
        assert_eq!(s.t1.norm(), 1.0);
        assert_eq!((s.r1, s.r2, s.t2), (ZERO, ZERO, ZERO));
        assert_eq!(absorption(&s).unwrap(), 0.0);
        for x in [-1e-6, 2e-6, 7e-6] {
            assert_eq!(s.evaluate_state(x)[1], ZERO);
        }
    }

    #[test]
    fn hermitian_flux_conservation() {
        let cfg = AtomLaserConfig::sharp(cesium::MASS, 0.0, 1e8, 5e-6).validate().unwrap();
        for v in [0.05, 0.5, 5.0, 50.0, 500.0] {
            let s = solve_sharp_edge(cfg.wavenumber(v), &cfg).unwrap();
            assert!((s.flux_sum() - 1.0).abs() < 1e-10, "v={v}: {}", s.flux_sum());
        }
    }

    #[test]
    fn continuity_at_edges() {
        let cfg = cs(5.0 * cesium::GAMMA, 5e-6);
        let s = solve_sharp_edge(cfg.wavenumber(120.0), &cfg).unwrap();
        for (x, a, b) in [(0.0, 0, 1), (5e-6, 1, 2)] {
            let va = s.evaluate_piece(a, x);
            let vb = s.evaluate_piece(b, x);
            for c in 0..2 {
                let scale = 1.0f64;
                assert!((va.value[c] - vb.value[c]).norm() < 1e-10 * scale);
                let dscale = s.k;
                assert!((va.derivative[c] - vb.derivative[c]).norm() < 1e-10 * dscale);
            }
        }
    }

    #[test]
    fn excited_component_decays_to_the_left() {
        let cfg = cs(5.0 * cesium::GAMMA, 5e-6);
        let s = solve_sharp_edge(cfg.wavenumber(3.0), &cfg).unwrap();
        let near = s.evaluate_state(-1e-7)[1].norm();
        let far = s.evaluate_state(-2e-4)[1].norm();
        assert!(far < 1e-6 * near.max(1e-300) || far < 1e-30);
    }

    #[test]
    fn degenerate_point_is_averaged() {
        let g = cesium::GAMMA;
        let cfg = AtomLaserConfig::sharp(cesium::MASS, g, g / 2.0, 5e-6).validate().unwrap();
        let k = cfg.wavenumber(50.0);
        let s = solve_sharp_edge(k, &cfg).unwrap();
        assert!(matches!(s.kind, SolutionKind::DegenerateAverage));
        // Nearby non-degenerate parameters give nearly the same amplitudes.
        let near = cfg.with_omega(g / 2.0 * (1.0 + 1e-4)).unwrap();
        let s2 = solve_sharp_edge(k, &near).unwrap();
        assert!((s.t1 - s2.t1).norm() < 1e-3);
        assert!((s.t2 - s2.t2).norm() < 1e-3);
    }

    #[test]
    fn plateau_absorbs_everything() {
        let cfg = cs(5.0 * cesium::GAMMA, 5e-6);
        let a = absorption_at(&cfg, 10.0).unwrap();
        assert!(a > 0.99, "A = {a}");
    }

    #[test]
    fn ridge_velocity_absorbs() {
        let cfg = cs(5.0 * cesium::GAMMA, 5e-6);
        let v0 = 5e-6 * 5.0 * cesium::GAMMA / PI;
        assert!((v0 - 265.0).abs() < 0.1);
        let a = absorption_at(&cfg, v0).unwrap();
        assert!(a > 0.99, "A(v0) = {a}");
    }

    #[test]
    fn valley_is_a_local_minimum() {
        let cfg = cs(5.0 * cesium::GAMMA, 5e-6);
        let v0 = 5e-6 * 5.0 * cesium::GAMMA / PI;
        // one full Rabi oscillation across the beam: v = v0/2
        let vv = v0 / 2.0;
        let grid: Vec<f64> = (0..41).map(|i| vv * (0.8 + 0.01 * i as f64)).collect();
        let a: Vec<f64> = grid.iter().map(|&v| absorption_at(&cfg, v).unwrap()).collect();
        let (imin, _) = a.iter().enumerate().fold((0, f64::MAX), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
        assert!(imin > 0 && imin < a.len() - 1);
        assert!((grid[imin] / vv - 1.0).abs() < 0.1);
        assert!(a[imin] < 0.9);
    }

    #[test]
    fn semiclassical_entry_and_half_flop() {
        let cfg = AtomLaserConfig::sharp(cesium::MASS, 0.0, 1e8, 5e-6).validate().unwrap();
        let k = cfg.wavenumber(200.0);
        let s0 = semiclassical_state(k, &cfg, 0.0);
        let n = 1.0 / (2.0 * PI).sqrt();
        assert!((s0[0] - C64::new(n, 0.0)).norm() < 1e-15);
        assert_eq!(s0[1], ZERO);
        let x = PI * 200.0 / 1e8;
        let s = semiclassical_state(k, &cfg, x);
        assert!(s[0].norm() < 1e-12);
        assert!((s[1].norm() - n).abs() < 1e-12);
    }

    #[test]
    fn semiclassical_matches_exact_inside_beam() {
        let cfg = cs(5.0 * cesium::GAMMA, 5e-6);
        let k = cfg.wavenumber(265.0);
        let exact = solve_sharp_edge(k, &cfg).unwrap();
        let x = 2.5e-6;
        let e = exact.evaluate_state(x);
        let s = semiclassical_state(k, &cfg, x);
        for c in 0..2 {
            assert!((e[c] - s[c]).norm() < 0.01 * e[c].norm(), "component {c}: {} vs {}", e[c], s[c]);
        }
    }

    #[test]
    fn semiclassical_t2_ridge_phases() {
        let om = 1e8;
        let l = 5e-6;
        let cfg = AtomLaserConfig::sharp(cesium::MASS, 0.0, om, l).validate().unwrap();
        for n in 0..2 {
            let v = l * om / ((2 * n + 1) as f64 * PI);
            let k = cfg.wavenumber(v);
            let t2 = semiclassical_t2(k, &cfg);
            let expect = if n % 2 == 0 { -I } else { I };
            assert!((t2 - expect).norm() < 1e-9, "n={n}: {t2}");
        }
    }

    #[test]
    fn semiclassical_t2_magnitude_on_ridge() {
        let g = cesium::GAMMA;
        let om = 5.0 * g;
        let l = 5e-6;
        let cfg = cs(om, l);
        let v0 = l * om / PI;
        let k = cfg.wavenumber(v0);
        let t2 = semiclassical_t2(k, &cfg);
        let wn = wavenumbers_at(k, g, om, cfg.mass());
        // strip |e^{i(k-q)L}| = e^{Im q L}
        let edge = t2.norm() * (-wn.q.im * l).exp();
        let w = (om * om - g * g / 4.0).sqrt();
        let expect = (-g * l / (4.0 * v0)).exp() * om / w * (l * w / (2.0 * v0)).sin();
        assert!((edge - expect).abs() < 1e-12);
        assert!((edge - 0.859).abs() < 0.01, "{edge}");
    }

    #[test]
    fn weak_driving_semiclassical_continuation() {
        let g = cesium::GAMMA;
        let cfg = cs(0.2 * g, 5e-6);
        let k = cfg.wavenumber(30.0);
        let s = semiclassical_state(k, &cfg, 3e-6);
        assert!(s[0].re.is_finite() && s[1].im.is_finite());
        // exactly at Ω = γ/2 the removable singularity is filled in
        let crit = cs(0.5 * g, 5e-6);
        let s = semiclassical_state(k, &crit, 3e-6);
        assert!(s[0].norm().is_finite());
    }
}
