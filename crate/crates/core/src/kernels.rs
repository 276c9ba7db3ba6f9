//! Dense vector kernels with 64-bit accumulation.
//!
//! Each kernel splits the input into interleaved lanes (eight, or sixteen for
//! [`dot_f64`]), sums every lane in `f64`, then folds the lanes in a fixed
//! order. The result depends only on the inputs, never on how callers
//! partition work across threads. On x86-64 with AVX2 the same loops run on
//! wider registers; multiplies and adds stay separate, so the bits match the
//! portable path.

const LANES: usize = 8;

#[inline]
fn fold(acc: [f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

#[inline(always)]
fn dot_lanes(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let (ac, ar) = a.split_at(a.len() - a.len() % LANES);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(LANES).zip(bc.chunks_exact(LANES)) {
        for l in 0..LANES {
            acc[l] += f64::from(x[l]) * f64::from(y[l]);
        }
    }
    for (l, (x, y)) in ar.iter().zip(br).enumerate() {
        acc[l] += f64::from(*x) * f64::from(*y);
    }
    fold(acc)
}

/// Lane count of [`dot_f64`]: four independent four-wide accumulators.
const WIDE: usize = 16;

#[inline(always)]
fn fold_wide(acc: [f64; WIDE]) -> f64 {
    let lo: [f64; LANES] = acc[..LANES].try_into().unwrap();
    let hi: [f64; LANES] = acc[LANES..].try_into().unwrap();
    fold(lo) + fold(hi)
}

#[inline(always)]
fn dot_f64_lanes(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; WIDE];
    let (ac, ar) = a.split_at(a.len() - a.len() % WIDE);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(WIDE).zip(bc.chunks_exact(WIDE)) {
        for l in 0..WIDE {
            acc[l] += x[l] * y[l];
        }
    }
    for (l, (x, y)) in ar.iter().zip(br).enumerate() {
        acc[l] += x * y;
    }
    fold_wide(acc)
}

// Same operations as the portable path (no fused multiply-add), so both
// produce identical bits; only the instruction width differs.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn dot_f64_avx2(a: &[f64], b: &[f64]) -> f64 {
    dot_f64_lanes(a, b)
}

#[inline]
pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: AVX2 is available and both slices have equal length.
            return unsafe { dot_f64_avx2(a, b) };
        }
    }
    dot_f64_lanes(a, b)
}

#[inline(always)]
fn squared_distance_lanes(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let (ac, ar) = a.split_at(a.len() - a.len() % LANES);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(LANES).zip(bc.chunks_exact(LANES)) {
        for l in 0..LANES {
            let d = f64::from(x[l]) - f64::from(y[l]);
            acc[l] += d * d;
        }
    }
    for (l, (x, y)) in ar.iter().zip(br).enumerate() {
        let d = f64::from(*x) - f64::from(*y);
        acc[l] += d * d;
    }
    fold(acc)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn dot_avx2(a: &[f32], b: &[f32]) -> f64 {
    dot_lanes(a, b)
}

#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            return unsafe { dot_avx2(a, b) };
        }
    }
    dot_lanes(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn squared_distance_avx2(a: &[f32], b: &[f32]) -> f64 {
    squared_distance_lanes(a, b)
}

#[inline]
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            return unsafe { squared_distance_avx2(a, b) };
        }
    }
    squared_distance_lanes(a, b)
}

#[inline]
pub fn distance(a: &[f32], b: &[f32]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[inline]
pub fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_sequential_sums() {
        let a: Vec<f32> = (0..19).map(|i| (i as f32 * 0.37).sin()).collect();
        let b: Vec<f32> = (0..19).map(|i| (i as f32 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| *x as f64 * *y as f64).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
        assert!((squared_distance(&a, &b) - naive).abs() < 1e-12);
        assert_eq!(distance(&[3.0, 4.0], &[0.0, 0.0]), 5.0);
    }

    #[test]
    fn wide_paths_match_portable_bits() {
        for len in [0usize, 1, 7, 8, 15, 16, 17, 100, 515] {
            let a: Vec<f32> = (0..len).map(|i| (i as f32 * 0.71).sin() * 3.0).collect();
            let b: Vec<f32> = (0..len).map(|i| (i as f32 * 0.23).cos() - 0.5).collect();
            let a64: Vec<f64> = a.iter().map(|&v| f64::from(v) / 7.0).collect();
            let b64: Vec<f64> = b.iter().map(|&v| f64::from(v) * 1.3).collect();
            assert_eq!(dot(&a, &b).to_bits(), dot_lanes(&a, &b).to_bits());
            assert_eq!(
                squared_distance(&a, &b).to_bits(),
                squared_distance_lanes(&a, &b).to_bits()
            );
            assert_eq!(dot_f64(&a64, &b64).to_bits(), dot_f64_lanes(&a64, &b64).to_bits());
            let naive: f64 = a64.iter().zip(&b64).map(|(x, y)| x * y).sum();
            assert!((dot_f64(&a64, &b64) - naive).abs() < 1e-12);
        }
    }
}
