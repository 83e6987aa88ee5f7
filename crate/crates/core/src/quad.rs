//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate falls below the absolute target or the subdivision budget runs out.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kron += WGK[j] * s;
        // Odd Kronrod nodes coincide with the Gauss nodes.
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    Segment { lo, hi, value, error }
}

/// Integrates `f` over `[lo, hi]` to absolute accuracy `abs_tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, abs_tol: f64) -> Result<Quadrature> {
    integrate_with_budget(&mut f, lo, hi, abs_tol, 4000)
}

pub fn integrate_with_budget<F: FnMut(f64) -> f64>(
    f: &mut F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<Quadrature> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Solver(format!("quadrature bounds must be finite, got [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(Quadrature { value: 0.0, error: 0.0, evaluations: 0 });
    }
    if hi < lo {
        let q = integrate_with_budget(f, hi, lo, abs_tol, max_segments)?;
        return Ok(Quadrature { value: -q.value, ..q });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(f, lo, hi);
    let mut value = first.value;
    let mut error = first.error;
    let mut evaluations = 15;
    heap.push(first);
    while error > abs_tol {
        if heap.len() >= max_segments {
            return Err(Error::Solver(format!(
                "quadrature on [{lo}, {hi}] stalled at error {error:e} (target {abs_tol:e})"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval at machine resolution; accept what we have.
            heap.push(worst);
            break;
        }
        let left = kronrod(f, worst.lo, mid);
        let right = kronrod(f, mid, worst.hi);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if !value.is_finite() {
            return Err(Error::Solver("integrand produced a non-finite value".into()));
        }
    }
    // Re-sum to shed the drift of the running updates.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(Quadrature { value, error, evaluations })
}

/// Integrates over a union of intervals, splitting the tolerance by length.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    pieces: &[(f64, f64)],
    abs_tol: f64,
) -> Result<Quadrature> {
    let total: f64 = pieces.iter().map(|(a, b)| b - a).sum();
    let mut acc = Quadrature { value: 0.0, error: 0.0, evaluations: 0 };
    for &(a, b) in pieces {
        let share = if total > 0.0 { abs_tol * (b - a) / total } else { abs_tol };
        let q = integrate_with_budget(&mut f, a, b, share.max(f64::MIN_POSITIVE), 4000)?;
        acc.value += q.value;
        acc.error += q.error;
        acc.evaluations += q.evaluations;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-14).unwrap();
        assert!((q.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let q = integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, 1e-9).unwrap();
        assert!((q.value - 2.0).abs() < 1e-8, "{}", q.value);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let q = integrate(f64::exp, 1.0, 0.0, 1e-12).unwrap();
        assert!((q.value + (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn infinite_bounds_rejected() {
        assert!(integrate(f64::exp, 0.0, f64::INFINITY, 1e-9).is_err());
    }
}
