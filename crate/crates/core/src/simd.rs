//! Inner loops of the lattice recursions, compiled once generically and once per
//! wider x86 instruction set, with the widest supported variant picked at run time.

use crate::numerics::exp_nonpositive_with;

const LANES: usize = 8;

/// `out[j] = gamma[j] + log sum_l exp(prev[l] + block[j * L + l])`.
pub(crate) fn forward_step(prev: &[f64], block: &[f64], gamma: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f")
            && std::arch::is_x86_feature_detected!("fma")
        {
            // SAFETY: the required features were detected on this CPU.
            return unsafe { forward_step_avx512(prev, block, gamma, out) };
        }
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        {
            // SAFETY: as above.
            return unsafe { forward_step_avx2(prev, block, gamma, out) };
        }
    }
    forward_step_impl::<false>(prev, block, gamma, out)
}

/// `out[l] = log sum_j exp(w[j] + block[j * L + l])`, using `max` and `sum` as
/// scratch of length `L`.
pub(crate) fn backward_step(
    w: &[f64],
    block: &[f64],
    out: &mut [f64],
    max: &mut [f64],
    sum: &mut [f64],
) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f")
            && std::arch::is_x86_feature_detected!("fma")
        {
            // SAFETY: the required features were detected on this CPU.
            return unsafe { backward_step_avx512(w, block, out, max, sum) };
        }
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        {
            // SAFETY: as above.
            return unsafe { backward_step_avx2(w, block, out, max, sum) };
        }
    }
    backward_step_impl::<false>(w, block, out, max, sum)
}

/// `out[j * L + l] = norm - (scale * (next[j] - means[l]))^2 / 2`, the Normal
/// log-density block of a transition with per-predecessor means.
pub(crate) fn gaussian_block(means: &[f64], next: &[f64], scale: f64, norm: f64, out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the required feature was detected on this CPU.
            return unsafe { gaussian_block_avx512(means, next, scale, norm, out) };
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: as above.
            return unsafe { gaussian_block_avx2(means, next, scale, norm, out) };
        }
    }
    gaussian_block_impl(means, next, scale, norm, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn gaussian_block_avx512(
    means: &[f64],
    next: &[f64],
    scale: f64,
    norm: f64,
    out: &mut [f64],
) {
    gaussian_block_impl(means, next, scale, norm, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gaussian_block_avx2(means: &[f64], next: &[f64], scale: f64, norm: f64, out: &mut [f64]) {
    gaussian_block_impl(means, next, scale, norm, out)
}

#[inline(always)]
fn gaussian_block_impl(means: &[f64], next: &[f64], scale: f64, norm: f64, out: &mut [f64]) {
    let lp = means.len();
    for (&x, row) in next.iter().zip(out.chunks_exact_mut(lp)) {
        for (o, &mu) in row.iter_mut().zip(means) {
            let d = (x - mu) * scale;
            *o = norm - 0.5 * d * d;
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,fma")]
unsafe fn forward_step_avx512(prev: &[f64], block: &[f64], gamma: &[f64], out: &mut [f64]) {
    forward_step_impl::<true>(prev, block, gamma, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn forward_step_avx2(prev: &[f64], block: &[f64], gamma: &[f64], out: &mut [f64]) {
    forward_step_impl::<true>(prev, block, gamma, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,fma")]
unsafe fn backward_step_avx512(
    w: &[f64],
    block: &[f64],
    out: &mut [f64],
    max: &mut [f64],
    sum: &mut [f64],
) {
    backward_step_impl::<true>(w, block, out, max, sum)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn backward_step_avx2(
    w: &[f64],
    block: &[f64],
    out: &mut [f64],
    max: &mut [f64],
    sum: &mut [f64],
) {
    backward_step_impl::<true>(w, block, out, max, sum)
}

#[inline(always)]
fn forward_step_impl<const FMA: bool>(prev: &[f64], block: &[f64], gamma: &[f64], out: &mut [f64]) {
    let l = prev.len();
    for (j, (o, &g)) in out.iter_mut().zip(gamma).enumerate() {
        *o = g + log_sum_exp_pair::<FMA>(prev, &block[j * l..(j + 1) * l]);
    }
}

/// `log sum_l exp(a[l] + b[l])` with lane-wise partial maxima and sums.
#[inline(always)]
fn log_sum_exp_pair<const FMA: bool>(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let split = a.len() - a.len() % LANES;
    let (a_body, a_tail) = a.split_at(split);
    let (b_body, b_tail) = b.split_at(split);

    let mut lane_max = [f64::NEG_INFINITY; LANES];
    for (ca, cb) in a_body.chunks_exact(LANES).zip(b_body.chunks_exact(LANES)) {
        for q in 0..LANES {
            let v = ca[q] + cb[q];
            lane_max[q] = if v > lane_max[q] { v } else { lane_max[q] };
        }
    }
    let mut max = lane_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (&x, &y) in a_tail.iter().zip(b_tail) {
        max = max.max(x + y);
    }
    if !max.is_finite() {
        return max;
    }

    let mut lane_sum = [0.0; LANES];
    for (ca, cb) in a_body.chunks_exact(LANES).zip(b_body.chunks_exact(LANES)) {
        for q in 0..LANES {
            lane_sum[q] += exp_nonpositive_with::<FMA>(ca[q] + cb[q] - max);
        }
    }
    let mut sum: f64 = lane_sum.iter().sum();
    for (&x, &y) in a_tail.iter().zip(b_tail) {
        sum += exp_nonpositive_with::<FMA>(x + y - max);
    }
    max + sum.ln()
}

#[inline(always)]
fn backward_step_impl<const FMA: bool>(
    w: &[f64],
    block: &[f64],
    out: &mut [f64],
    max: &mut [f64],
    sum: &mut [f64],
) {
    let l = out.len();
    max.fill(f64::NEG_INFINITY);
    for (j, &wj) in w.iter().enumerate() {
        for (mx, &t) in max.iter_mut().zip(&block[j * l..(j + 1) * l]) {
            let v = t + wj;
            *mx = if v > *mx { v } else { *mx };
        }
    }
    sum.fill(0.0);
    for (j, &wj) in w.iter().enumerate() {
        for ((s, &t), &mx) in sum
            .iter_mut()
            .zip(&block[j * l..(j + 1) * l])
            .zip(max.iter())
        {
            *s += exp_nonpositive_with::<FMA>(t + wj - mx);
        }
    }
    for ((b, &mx), &s) in out.iter_mut().zip(max.iter()).zip(sum.iter()) {
        *b = if mx.is_finite() { mx + s.ln() } else { mx };
    }
}
