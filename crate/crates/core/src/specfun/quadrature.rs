//! Adaptive Gauss-Kronrod (7/15) quadrature for complex-valued integrands of a
//! real variable.

use num_complex::Complex64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

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
/// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

pub(crate) const EVALS_PER_PANEL: usize = 15;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Panel {
    pub value: Complex64,
    pub error: f64,
    /// Largest |f| seen at the panel nodes.
    pub peak: f64,
}

pub(crate) fn gk15<F, E>(f: &mut F, a: f64, b: f64) -> Result<Panel, E>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut peak = fc.norm();
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        peak = peak.max(f1.norm()).max(f2.norm());
        kronrod += (f1 + f2) * w;
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Ok(Panel { value, error, peak })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Integral {
    pub value: Complex64,
    pub error: f64,
    pub evals: usize,
    /// Largest |f| seen anywhere in the final partition.
    pub peak: f64,
}

struct Pending {
    a: f64,
    b: f64,
    panel: Panel,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.panel.error == other.panel.error
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.panel.error.total_cmp(&other.panel.error)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`, starting from
/// `initial_panels` equal panels and bisecting the worst panel until the summed
/// error estimate drops below `tol` or `max_evals` is exhausted.
///
/// Running out of budget is not an error here; callers compare `error` with
/// their own tolerance.
pub(crate) fn integrate<F, E>(
    f: &mut F,
    a: f64,
    b: f64,
    initial_panels: usize,
    tol: f64,
    max_evals: usize,
) -> Result<Integral, E>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    let n = initial_panels.max(1);
    let width = (b - a) / n as f64;
    let mut heap = BinaryHeap::with_capacity(2 * n);
    let mut evals = 0;
    for i in 0..n {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n { b } else { lo + width };
        let panel = gk15(f, lo, hi)?;
        evals += EVALS_PER_PANEL;
        heap.push(Pending { a: lo, b: hi, panel });
    }
    loop {
        let total_error: f64 = heap.iter().map(|p| p.panel.error).sum();
        if total_error <= tol || evals + 2 * EVALS_PER_PANEL > max_evals {
            break;
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = gk15(f, worst.a, mid)?;
        let right = gk15(f, mid, worst.b)?;
        evals += 2 * EVALS_PER_PANEL;
        heap.push(Pending { a: worst.a, b: mid, panel: left });
        heap.push(Pending { a: mid, b: worst.b, panel: right });
    }
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut peak = 0.0_f64;
    for p in heap.iter() {
        value += p.panel.value;
        error += p.panel.error;
        peak = peak.max(p.panel.peak);
    }
    Ok(Integral { value, error, evals, peak })
}
