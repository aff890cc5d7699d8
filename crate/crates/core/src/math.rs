//! Small numeric helpers shared by the metric modules.

/// Absolute tolerance for distribution-sum checks.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Pairwise (cascade) summation; order-insensitive to within O(log n) ulps.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn powi(base: f64, n: usize) -> f64 {
    libm::pow(base, n as f64)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Scale `v` so its entries sum to one. Returns `None` when the sum is not positive.
pub fn normalized(v: &[f64]) -> Option<alloc::vec::Vec<f64>> {
    let total = pairwise_sum(v);
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    Some(v.iter().map(|x| x / total).collect())
}

pub fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
