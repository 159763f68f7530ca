//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{invalid, Error, Result};

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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Target for the summed error estimate.
    pub abs_tol: f64,
    /// Uniform panels per breakpoint interval before refinement.
    pub initial_panels: usize,
    pub max_intervals: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            initial_panels: 32,
            max_intervals: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, always splitting at the
/// interior breakpoints.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], spec: &QuadratureSpec) -> Result<QuadResult> {
    if breaks.len() < 2 {
        return Err(invalid("breaks", "need at least two points"));
    }
    let mut pts: Vec<f64> = breaks.to_vec();
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    let mut heap = BinaryHeap::new();
    for w in pts.windows(2) {
        let n = spec.initial_panels.max(1);
        let h = (w[1] - w[0]) / n as f64;
        for k in 0..n {
            let a = w[0] + h * k as f64;
            let b = if k + 1 == n { w[1] } else { a + h };
            heap.push(gk15(&f, a, b));
        }
    }
    let mut evaluations = heap.len() * 15;
    let total_error = |heap: &BinaryHeap<Panel>| heap.iter().map(|p| p.error).sum::<f64>();
    let mut err = total_error(&heap);
    while err > spec.abs_tol && heap.len() < spec.max_intervals {
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        evaluations += 30;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // sum in position order so the result does not depend on heap layout
    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error_estimate = panels.iter().map(|p| p.error).sum::<f64>();
    if error_estimate > spec.abs_tol {
        return Err(Error::Quadrature {
            estimate: error_estimate,
            tolerance: spec.abs_tol,
        });
    }
    Ok(QuadResult {
        value,
        error_estimate,
        evaluations,
        intervals: panels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x.powi(6) - 3.0 * x, &[0.0, 2.0], &QuadratureSpec::default()).unwrap();
        assert!((r.value - (128.0 / 7.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_integral() {
        let r = integrate(|x| (-x * x).exp(), &[-10.0, 10.0], &QuadratureSpec::default()).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!(r.error_estimate <= 1e-11);
    }

    #[test]
    fn narrow_peak_found_through_breakpoint() {
        let f = |x: f64| 1.0 / (1.0 + (1e3 * x).powi(2));
        let r = integrate(f, &[-100.0, 0.0, 100.0], &QuadratureSpec::default()).unwrap();
        let want = 2.0 * (1e5f64).atan() / 1e3;
        assert!((r.value - want).abs() < 1e-10);
    }

    #[test]
    fn reports_non_convergence() {
        let spec = QuadratureSpec {
            abs_tol: 1e-14,
            initial_panels: 1,
            max_intervals: 4,
        };
        let res = integrate(|x: f64| x.abs().sqrt(), &[-1.0, 1.0], &spec);
        assert!(matches!(res, Err(Error::Quadrature { .. })));
    }
}
