//! Log-domain helpers shared by every sampler.

use rand::Rng;

/// Terms this far below the running maximum contribute less than `exp(-50)` each and
/// are below double precision relative to the leading term; their `exp` is skipped.
const LSE_NEGLIGIBLE: f64 = 50.0;

/// `log(sum(exp(v)))` computed with a max-shift.
///
/// Returns `-inf` when every entry is `-inf`.
///
/// # Panics
///
/// Panics on an empty slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    assert!(!v.is_empty(), "log_sum_exp of an empty slice");
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = v
        .iter()
        .map(|&x| x - max)
        .filter(|&d| d > -LSE_NEGLIGIBLE)
        .map(f64::exp)
        .sum();
    max + sum.ln()
}

const EXP_FLOOR: f64 = -700.0;

/// `exp(x)` for `x <= 0`, branch-free so that loops over it vectorise.
///
/// Inputs below -700 (including `-inf` and `NaN`) are treated as -700, whose
/// exponential is below `1e-304`. Relative error is within a few ulp of `f64::exp`.
#[inline(always)]
pub fn exp_nonpositive(x: f64) -> f64 {
    exp_nonpositive_with::<false>(x)
}

#[inline(always)]
fn madd<const FMA: bool>(a: f64, b: f64, c: f64) -> f64 {
    if FMA {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

/// [`exp_nonpositive`], with fused multiply-adds when `FMA` is set. Only callers
/// compiled with the `fma` target feature should set it.
#[inline(always)]
pub(crate) fn exp_nonpositive_with<const FMA: bool>(x: f64) -> f64 {
    const SHIFTER: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const C: [f64; 14] = [
        1.0,
        1.0,
        0.5,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5_040.0,
        1.0 / 40_320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
        1.0 / 6_227_020_800.0,
    ];
    // max/min rather than clamp so that NaN maps to the floor
    #[allow(clippy::manual_clamp)]
    let x = x.max(EXP_FLOOR).min(0.0);
    let t = madd::<FMA>(x, std::f64::consts::LOG2_E, SHIFTER);
    let k = t - SHIFTER;
    let r = madd::<FMA>(-k, LN2_LO, madd::<FMA>(-k, LN2_HI, x));
    // Taylor series to degree 13, split into independent pairs; |r| <= ln(2) / 2
    // keeps the remainder below 1e-17.
    let r2 = r * r;
    let r4 = r2 * r2;
    let pair = |i: usize| madd::<FMA>(C[i + 1], r, C[i]);
    let lo = madd::<FMA>(pair(2), r2, pair(0));
    let mid = madd::<FMA>(pair(6), r2, pair(4));
    let hi = madd::<FMA>(madd::<FMA>(pair(12), r2, pair(10)), r2, pair(8));
    let p = madd::<FMA>(madd::<FMA>(hi, r4, mid), r4, lo);
    let bits = t
        .to_bits()
        .wrapping_sub(SHIFTER.to_bits())
        .wrapping_add(1023)
        << 52;
    p * f64::from_bits(bits)
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Log-density of a Normal distribution with the given mean and standard deviation.
#[inline]
pub fn normal_log_density(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - HALF_LN_2PI
}

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Draws an index from the categorical distribution with the given unnormalised log
/// weights.
///
/// A single uniform is inverted against the cumulative weights in index order, so
/// the draw is a deterministic function of the random stream.
///
/// # Panics
///
/// Panics if every weight is `-inf`.
pub fn sample_log_categorical<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> usize {
    let total = log_sum_exp(log_weights);
    assert!(
        total.is_finite(),
        "categorical draw over weights with no finite mass"
    );
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (idx, &w) in log_weights.iter().enumerate() {
        let p = (w - total).exp();
        if p > 0.0 {
            last_positive = idx;
        }
        cumulative += p;
        if u < cumulative {
            return idx;
        }
    }
    // rounding left the cumulative sum just below u
    last_positive
}
