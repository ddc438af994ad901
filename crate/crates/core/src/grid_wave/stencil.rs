//! Fourth-order finite differences along one grid line.
//!
//! Interior nodes use five-point centred stencils; the two outermost nodes on
//! each side use one-sided stencils of the same order.

const D1_INTERIOR: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D1_EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

const D2_INTERIOR: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D2_EDGE0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_EDGE1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

/// Index range (inclusive start, exclusive end) touched by the stencil at `i`.
pub(crate) fn span(i: usize, n: usize, order: usize) -> (usize, usize) {
    let width = if order == 1 { 5 } else { 6 };
    if i < 2 {
        (0, width)
    } else if i + 2 >= n {
        (n - width, n)
    } else {
        (i - 2, i + 3)
    }
}

/// First derivative of `f` along the line `(start, stride)` of length `n`.
pub(crate) fn first_derivative(
    f: &[f64],
    start: usize,
    stride: usize,
    n: usize,
    dx: f64,
    out: &mut [f64],
) {
    let at = |k: usize| f[start + k * stride];
    let scale = 1.0 / (12.0 * dx);
    for i in 0..n {
        let v = if i < 2 {
            let c = if i == 0 { &D1_EDGE0 } else { &D1_EDGE1 };
            (0..5).map(|k| c[k] * at(k)).sum::<f64>()
        } else if i + 2 >= n {
            let c = if i + 1 == n { &D1_EDGE0 } else { &D1_EDGE1 };
            -(0..5).map(|k| c[k] * at(n - 1 - k)).sum::<f64>()
        } else {
            (0..5).map(|k| D1_INTERIOR[k] * at(i + k - 2)).sum::<f64>()
        };
        out[start + i * stride] = v * scale;
    }
}

/// Second derivative of `f` along the line `(start, stride)` of length `n`.
pub(crate) fn second_derivative(
    f: &[f64],
    start: usize,
    stride: usize,
    n: usize,
    dx: f64,
    out: &mut [f64],
) {
    let at = |k: usize| f[start + k * stride];
    let scale = 1.0 / (12.0 * dx * dx);
    for i in 0..n {
        let v = if i < 2 {
            let c = if i == 0 { &D2_EDGE0 } else { &D2_EDGE1 };
            (0..6).map(|k| c[k] * at(k)).sum::<f64>()
        } else if i + 2 >= n {
            let c = if i + 1 == n { &D2_EDGE0 } else { &D2_EDGE1 };
            (0..6).map(|k| c[k] * at(n - 1 - k)).sum::<f64>()
        } else {
            (0..5).map(|k| D2_INTERIOR[k] * at(i + k - 2)).sum::<f64>()
        };
        out[start + i * stride] = v * scale;
    }
}
