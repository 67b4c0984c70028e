//! High-precision evaluation of the degenerate-beta equal-spacing kernel.
//!
//! The inner residue at the order-N pole cluster `w^k = b^k` is catastrophically
//! ill-conditioned in double precision once N grows: the answer is produced by
//! near-total cancellation of terms that are many orders of magnitude larger
//! than the result.  Writing `w = b + t`, the denominator factors as
//! `(w^k - b^k)^N = t^N q(t)^N` with `q(0) != 0`, so the residue is the
//! coefficient of `t^{N-1}` in a rational power series.  Everything here is
//! evaluated in fixed-point arithmetic over big integers — a value is an
//! integer divided by 2^SCALE — which absorbs the cancellation with hundreds
//! of guard digits while avoiding the gcd cost of rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::{Error, Result};

/// Fractional bits of the fixed-point representation.  Intermediate terms
/// reach magnitudes around 1e80 before cancelling; 1536 bits (~462 decimal
/// digits) leaves a huge margin over the 16 digits required of the result.
const SCALE: usize = 1536;

/// Fixed-point number: value = mantissa / 2^SCALE.
#[derive(Clone, Debug)]
struct Fx(BigInt);

impl Fx {
    fn zero() -> Self {
        Fx(BigInt::zero())
    }

    fn one() -> Self {
        Fx(BigInt::from(1) << SCALE)
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Exact conversion: every finite f64 is a dyadic rational with
    /// denominator dividing 2^1075 < 2^SCALE.
    fn from_f64(x: f64) -> Self {
        let r = BigRational::from_float(x).expect("finite input");
        Fx((r.numer() << SCALE) / r.denom())
    }

    fn from_int(x: &BigInt) -> Self {
        Fx(x << SCALE)
    }

    fn mul(&self, other: &Fx) -> Fx {
        Fx((&self.0 * &other.0) >> SCALE)
    }

    fn div(&self, other: &Fx) -> Fx {
        Fx((&self.0 << SCALE) / &other.0)
    }

    fn add_assign(&mut self, other: &Fx) {
        self.0 += &other.0;
    }

    fn sub_assign(&mut self, other: &Fx) {
        self.0 -= &other.0;
    }

    fn neg(&self) -> Fx {
        Fx(-&self.0)
    }

    fn pow(&self, e: u64) -> Fx {
        let mut result = Fx::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        result
    }

    fn pow_i(&self, e: i64) -> Fx {
        if e >= 0 {
            self.pow(e as u64)
        } else {
            Fx::one().div(&self.pow((-e) as u64))
        }
    }

    /// Round to f64 without overflowing the conversion.
    fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        let bits = self.0.bits() as i64;
        let shift = (bits - 128).max(0);
        let head = (&self.0 >> shift).to_f64().unwrap_or(0.0);
        head * 2f64.powi(shift as i32 - SCALE as i32)
    }
}

fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut v = BigInt::from(1);
    for i in 0..k.min(n - k) {
        v = v * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    v
}

/// Binomial coefficient C(p, j) for possibly large integer p and small j
/// (exact: the product of j consecutive integers is divisible by j!).
fn falling_binomial(p: i64, j: u64) -> BigInt {
    let mut num = BigInt::from(1);
    for i in 0..j as i64 {
        num *= BigInt::from(p - i);
    }
    let mut den = BigInt::from(1);
    for i in 1..=j as i64 {
        den *= BigInt::from(i);
    }
    num / den
}

fn poly_mul_trunc(a: &[Fx], b: &[Fx], trunc: usize) -> Vec<Fx> {
    let n = (a.len() + b.len() - 1).min(trunc);
    let mut out = vec![Fx::zero(); n];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() || i >= n {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if i + j >= n {
                break;
            }
            if !bj.is_zero() {
                out[i + j].add_assign(&ai.mul(bj));
            }
        }
    }
    out
}

/// First n coefficients of 1/a(t) for a power series with a(0) != 0.
fn series_inv(a: &[Fx], n: usize) -> Vec<Fx> {
    let mut out = vec![Fx::zero(); n];
    out[0] = Fx::one().div(&a[0]);
    for i in 1..n {
        let mut s = Fx::zero();
        for j in 1..=i.min(a.len() - 1) {
            if !a[j].is_zero() {
                s.add_assign(&a[j].mul(&out[i - j]));
            }
        }
        out[i] = s.neg().div(&a[0]);
    }
    out
}

/// High-precision evaluation of the equal-spacing kernel with all betas equal
/// to `b`.  `alpha` is the full rate list of the model; `kgap` the offset
/// spacing.  Requires `s1, s2 <= alpha.len()` and nonnegative heights.
pub(crate) fn kernel_eq_degen_exact(
    n: usize,
    alpha: &[f64],
    b: f64,
    kgap: usize,
    s1: usize,
    x1: i64,
    s2: usize,
    x2: i64,
) -> Result<f64> {
    let b = Fx::from_f64(b);
    let alpha: Vec<Fx> = alpha.iter().map(|&a| Fx::from_f64(a)).collect();

    // indicator term: -h_{x1-x2}(alpha_{s2+1..s1})
    let mut val = Fx::zero();
    if s1 > s2 {
        let m = x1 - x2;
        if m >= 0 {
            let m = m as usize;
            let mut c = vec![Fx::zero(); m + 1];
            c[0] = Fx::one();
            for r in &alpha[s2..s1] {
                for i in 1..=m {
                    let t = r.mul(&c[i - 1]);
                    c[i].add_assign(&t);
                }
            }
            val.sub_assign(&c[m]);
        }
    }

    let bk = b.pow(kgap as u64);

    // a-priori estimate of the series length: terms decay like (amax b)^{k m}
    let amax_f = alpha.iter().map(|a| a.to_f64()).fold(0.0f64, f64::max);
    let decay = (amax_f * b.to_f64()).max(1e-12).min(1.0 - 1e-12);
    let m_est = (60.0 * std::f64::consts::LN_10 / (kgap as f64 * -decay.ln()))
        .ceil()
        .max(8.0) as i64;

    // h-series of prod_{r<s1} (1 - alpha_r z)^{-1}, grown geometrically
    let mut hcoeffs: Vec<Fx> = Vec::new();
    let rates_z: Vec<Fx> = alpha[..s1].to_vec();
    let mut hlen_hint = (x1 + kgap as i64 * (m_est + 2)).max(1) as usize + 1;
    let ensure_h = |len: usize, store: &mut Vec<Fx>, hint: &mut usize| {
        if store.len() >= len {
            return;
        }
        let target = len.max(*hint);
        *hint = target * 2;
        let mut c = vec![Fx::zero(); target];
        c[0] = Fx::one();
        for r in &rates_z {
            for i in 1..target {
                let t = r.mul(&c[i - 1]);
                c[i].add_assign(&t);
            }
        }
        *store = c;
    };

    // z-side coefficient: [z^deg] (z^k - b^k)^N prod_{r<s1} (1 - alpha_r z)^{-1}
    let bin_bk_pows: Vec<Fx> = (0..=n)
        .map(|i| {
            let mut f = Fx::from_int(&binomial(n as u64, i as u64)).mul(&bk.pow((n - i) as u64));
            if (n - i) % 2 == 1 {
                f = f.neg();
            }
            f
        })
        .collect();
    let zc = |deg: i64, hstore: &mut Vec<Fx>, ensure: &mut dyn FnMut(usize, &mut Vec<Fx>)| {
        let mut s = Fx::zero();
        for i in 0..=n {
            let e = deg - (kgap * i) as i64;
            if e < 0 {
                continue;
            }
            ensure(e as usize + 1, hstore);
            s.add_assign(&bin_bk_pows[i].mul(&hstore[e as usize]));
        }
        s
    };

    // q(t) = ((b+t)^k - b^k)/t; (w^k - b^k)^N = t^N q(t)^N
    let q: Vec<Fx> = (0..kgap)
        .map(|i| {
            Fx::from_int(&binomial(kgap as u64, i as u64 + 1)).mul(&b.pow((kgap - i - 1) as u64))
        })
        .collect();
    let mut qn = vec![Fx::one()];
    for _ in 0..n {
        qn = poly_mul_trunc(&qn, &q, n);
    }
    let qinv = series_inv(&qn, n);

    // prefactor prod_{r<s2} (1 - alpha_r (b + t)) as a series in t, times 1/q^N
    let mut fac = vec![Fx::one()];
    for r in &alpha[..s2] {
        let mut c0 = Fx::one();
        c0.sub_assign(&r.mul(&b));
        let lin = vec![c0, r.neg()];
        fac = poly_mul_trunc(&fac, &lin, n);
    }
    let pref = poly_mul_trunc(&fac, &qinv, n);

    // small powers b^0..b^{n-1} and the per-iteration multiplier b^k
    let bpowers: Vec<Fx> = (0..n).map(|j| b.pow(j as u64)).collect();

    let kq = Fx::from_int(&BigInt::from(kgap));
    let mut tot = Fx::zero();
    let mut m: i64 = 0;
    let mut small_streak = 0usize;
    // b^{P - (n-1)} for the current P = x2 + k - 1 + k m
    let p0 = x2 + kgap as i64 - 1;
    let mut bp_low = b.pow_i(p0 - (n as i64 - 1));
    // the residue [t^{n-1}] pref(t) (b+t)^P vanishes identically while
    // P < n - deg(pref); suppress the early-termination check until every
    // falling binomial C(P, j), j < n, is active and a nonzero term was seen
    let m_gate = (n as i64 + 1 - p0).max(0).div_euclid(kgap as i64) + 1;
    let mut nonzero_seen = false;
    loop {
        let p = p0 + kgap as i64 * m;
        // residue coefficient: sum_j pref[n-1-j] C(P, j) b^{P-j}
        let mut wc = Fx::zero();
        for j in 0..n {
            let coef = &pref[n - 1 - j];
            if coef.is_zero() {
                continue;
            }
            // b^{P-j} = bp_low * b^{(n-1) - j}
            let t = coef
                .mul(&Fx::from_int(&falling_binomial(p, j as u64)))
                .mul(&bp_low)
                .mul(&bpowers[n - 1 - j]);
            wc.add_assign(&t);
        }
        let zcoef = zc(
            x1 + (kgap as i64) * (m + 1),
            &mut hcoeffs,
            &mut |len, store| ensure_h(len, store, &mut hlen_hint),
        );
        let term = kq.mul(&zcoef).mul(&wc);
        tot.add_assign(&term);
        m += 1;
        bp_low = bp_low.mul(&bk);
        let ft = term.to_f64().abs();
        let mut running = val.clone();
        running.add_assign(&tot);
        let fa = running.to_f64().abs();
        if ft != 0.0 {
            nonzero_seen = true;
        }
        if ft < 1e-20 * fa.max(1.0) {
            if nonzero_seen && m >= m_gate {
                small_streak += 1;
                if small_streak >= 3 {
                    break;
                }
            }
        } else {
            small_streak = 0;
        }
        if m > 800 {
            return Err(Error::SeriesNoConvergence { terms: 800 });
        }
    }
    val.add_assign(&tot);
    Ok(val.to_f64())
}
