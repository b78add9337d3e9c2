//! Piecewise exponential representation of two-component stationary waves.
//!
//! On every piece the wave (times √(2π)) is a finite sum of terms
//! `amplitude · exp(i·wavenumber·(x − origin))`. Each term's origin sits at
//! the end of its piece where the term is largest, so no term overflows
//! inside its own piece.

use num_complex::Complex64 as C64;

use crate::linalg::{exp_integral, I};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveTerm {
    pub amplitude: [C64; 2],
    pub wavenumber: C64,
    pub origin: f64,
    /// Real carrier with `wavenumber = carrier + detune`; the phase is taken
    /// as e^{i·carrier·d}·e^{i·detune·d} so nearby wavenumbers stay coherent.
    pub carrier: f64,
    pub detune: C64,
}

impl WaveTerm {
    pub fn new(amplitude: [C64; 2], wavenumber: C64, origin: f64) -> Self {
        Self { amplitude, wavenumber, origin, carrier: 0.0, detune: wavenumber }
    }

    pub fn detuned(amplitude: [C64; 2], carrier: f64, detune: C64, origin: f64) -> Self {
        Self { amplitude, wavenumber: detune + carrier, origin, carrier, detune }
    }

    /// e^{iκ(x − origin)}. The rounding error of Re κ·(x − origin) is
    /// recovered with an fma, so large phases stay accurate.
    pub fn phase(&self, x: f64) -> C64 {
        let d = x - self.origin;
        if self.carrier == 0.0 {
            exp_i(self.wavenumber, d)
        } else {
            exp_i(C64::new(self.carrier, 0.0), d) * exp_i(self.detune, d)
        }
    }
}

/// e^{iκd} with the same exact-product phase as [`WaveTerm::phase`].
pub fn exp_i(kappa: C64, d: f64) -> C64 {
    let (growth, rot) = split_exp(kappa, d);
    rot * growth.exp()
}

/// e^{iκd} as (−Im κ·d, e^{i Re κ·d}), with the rotation computed from the
/// exact product Re κ·d (rounded product plus its fma residual).
fn split_exp(kappa: C64, d: f64) -> (f64, C64) {
    let p = kappa.re * d;
    let err = kappa.re.mul_add(d, -p);
    let (s, c) = p.sin_cos();
    let (se, ce) = err.sin_cos();
    (-kappa.im * d, C64::new(c * ce - s * se, s * ce + c * se))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavePiece {
    pub start: f64,
    pub end: f64,
    pub terms: Vec<WaveTerm>,
}

/// Value and first derivative of both channel components at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveValue {
    pub value: [C64; 2],
    pub derivative: [C64; 2],
}

impl WavePiece {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.start && x <= self.end
    }

    /// Evaluates the sum of terms (without the 1/√(2π) factor).
    pub fn evaluate(&self, x: f64) -> WaveValue {
        let zero = C64::new(0.0, 0.0);
        let mut out = WaveValue { value: [zero; 2], derivative: [zero; 2] };
        for t in &self.terms {
            let e = t.phase(x);
            for c in 0..2 {
                let v = t.amplitude[c] * e;
                out.value[c] += v;
                out.derivative[c] += I * t.wavenumber * v;
            }
        }
        out
    }
}

/// ∫ over [start, end] of term_a(x)·conj(term_b(x)) in one channel.
pub fn term_overlap(a: &WaveTerm, b: &WaveTerm, channel: usize, start: f64, end: f64) -> C64 {
    let amp = a.amplitude[channel] * b.amplitude[channel].conj();
    if amp == C64::new(0.0, 0.0) {
        return amp;
    }
    let beta = a.wavenumber - b.wavenumber.conj();
    // Anchor at the end where e^{iβx} is largest.
    let anchor_start = if end.is_infinite() {
        true
    } else if start.is_infinite() {
        false
    } else {
        beta.im > 0.0
    };
    let (anchor, len, sign) = if anchor_start {
        (start, end - start, 1.0)
    } else {
        (end, end - start, -1.0)
    };
    let factor = if a.origin == b.origin {
        let (g, r) = split_exp(beta, anchor - a.origin);
        r * g.exp()
    } else {
        let (ga, ra) = split_exp(a.wavenumber, anchor - a.origin);
        let (gb, rb) = split_exp(b.wavenumber, anchor - b.origin);
        ra * rb.conj() * (ga + gb).exp()
    };
    let integral = if sign > 0.0 {
        exp_integral(beta, len)
    } else {
        // ∫_{end-len}^{end} e^{iβ(x-end)} dx = ∫_0^len e^{-iβu} du
        exp_integral(-beta, len)
    };
    amp * factor * integral
}

/// ∫ over [start, end] ∩ piece of φ_a · conj(φ_b) for one channel, where
/// both waves are given on identically bounded pieces.
pub fn piece_overlap(a: &WavePiece, b: &WavePiece, channel: usize, start: f64, end: f64) -> C64 {
    let lo = start.max(a.start);
    let hi = end.min(a.end);
    if !(hi > lo) {
        return C64::new(0.0, 0.0);
    }
    let mut acc = C64::new(0.0, 0.0);
    for ta in &a.terms {
        for tb in &b.terms {
            acc += term_overlap(ta, tb, channel, lo, hi);
        }
    }
    acc
}
