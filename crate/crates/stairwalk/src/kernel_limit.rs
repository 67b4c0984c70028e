//! Limiting kernels: the interpolating bulk kernel with k-fold symmetry, the
//! extended sine kernel it degenerates to, its continuous-time analogue, the
//! saturation kernel governing number-variance plateaus, and the dilute
//! (fixed-parameter) limit.
//!
//! All of these are assembled from open-arc contour integrals through the
//! positive real axis ([`crate::quadrature`]); closed-circle pieces reduce to
//! exact series coefficients ([`crate::series`]).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::quadrature::{arc_integral_angle, ContourValue};
use crate::series::complete_homogeneous;
use crate::{Error, Result};

/// Parameters of the interpolating bulk kernel: symmetry order `k >= 1`, the
/// per-step rate list `gamma` (each in (0, 1)), and the quadrature tolerance.
#[derive(Debug, Clone)]
pub struct LimitParams {
    k: u32,
    gamma: Vec<f64>,
    tol: f64,
}

impl LimitParams {
    pub fn new(k: u32, gamma: Vec<f64>, tol: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::Domain("SymmetryOrderZero: k must be >= 1".into()));
        }
        check_gamma(&gamma)?;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Domain(format!("ToleranceOutOfRange: {tol}")));
        }
        Ok(LimitParams { k, gamma, tol })
    }
    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    pub fn tol(&self) -> f64 {
        self.tol
    }
}

fn check_gamma(gamma: &[f64]) -> Result<()> {
    for &g in gamma {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::GammaOutOfRange(g));
        }
    }
    Ok(())
}

fn check_lines(len: usize, s1: usize, s2: usize) -> Result<()> {
    if s1 > len || s2 > len {
        return Err(Error::Domain(format!(
            "LineOutOfRange: s = {} needs a gamma entry per step, only {len} given",
            s1.max(s2)
        )));
    }
    Ok(())
}

/// Root-of-unity power `omega_k^e` with exact angle reduction.
fn omega_pow(k: u32, e: i64) -> Complex64 {
    let r = e.rem_euclid(k as i64);
    Complex64::from_polar(1.0, 2.0 * PI * r as f64 / k as f64)
}

fn realize(tot: Complex64, tol: f64, noise: f64) -> Result<f64> {
    let limit = 10.0 * tol.max(noise);
    if tot.im.abs() >= limit {
        return Err(Error::ImaginaryResidue {
            im: tot.im.abs(),
            limit,
        });
    }
    Ok(tot.re)
}

/// The interpolating bulk kernel K(s1, x1; s2, x2): a sum of k arc integrals
/// through the positive real axis, one per branch of the k-th roots of unity,
/// minus the one-sided heat term for s1 > s2.
pub fn limit_kernel(p: &LimitParams, s1: usize, x1: i64, s2: usize, x2: i64) -> Result<f64> {
    check_lines(p.gamma.len(), s1, s2)?;
    let mut val = 0.0;
    if s1 > s2 {
        val -= complete_homogeneous(x1 - x2, &p.gamma[s2..s1]);
    }
    let k = p.k;
    let m = x1 - x2;
    let mut tot = Complex64::new(0.0, 0.0);
    let mut noise = 0.0f64;
    for j in 0..k {
        let f = |z: Complex64| {
            let mut num = Complex64::new(1.0, 0.0);
            for &g in &p.gamma[..s2] {
                num *= 1.0 - g * z;
            }
            let mut den = Complex64::new(1.0, 0.0);
            let om = omega_pow(k, j as i64);
            for &g in &p.gamma[..s1] {
                den *= 1.0 - om * g * z;
            }
            num / den * z.powi(-(m as i32 + 1))
        };
        let arc: ContourValue = arc_integral_angle(f, PI / k as f64, 1.0, p.tol)?;
        tot += omega_pow(k, -(j as i64) * x1) * arc.value;
        noise += arc.noise_floor;
    }
    Ok(val + realize(tot, p.tol, noise)?)
}

/// One-point density of the interpolating kernel at (s, x).
pub fn limit_density(p: &LimitParams, s: usize, x: i64) -> Result<f64> {
    limit_kernel(p, s, x, s, x)
}

/// Extended sine kernel with half-angle `c` in (0, pi] and per-step rates
/// `gamma` (gamma[j-1] belongs to step j).  At equal lines this is the
/// discrete sine kernel `sin(c (x - y)) / (pi (x - y))`.
pub fn extended_sine(
    c: f64,
    gamma: &[f64],
    s: usize,
    x: i64,
    t: usize,
    y: i64,
    tol: f64,
) -> Result<f64> {
    if !(c > 0.0 && c <= PI) {
        return Err(Error::Domain(format!(
            "HalfAngleOutOfRange: c = {c} not in (0, pi]"
        )));
    }
    check_gamma(gamma)?;
    check_lines(gamma.len(), s, t)?;
    let m = x - y;
    let mut val = 0.0;
    if s > t {
        val -= complete_homogeneous(m, &gamma[t..s]);
    }
    let f = |z: Complex64| {
        let mut fac = Complex64::new(1.0, 0.0);
        if s <= t {
            for &g in &gamma[s..t] {
                fac *= 1.0 - g * z;
            }
        } else {
            for &g in &gamma[t..s] {
                fac /= 1.0 - g * z;
            }
        }
        fac * z.powi(-(m as i32 + 1))
    };
    let arc = arc_integral_angle(f, c, 1.0, tol)?;
    Ok(val + realize(arc.value, tol, arc.noise_floor)?)
}

/// Continuous-time analogue of the interpolating kernel: lines are replaced by
/// nonnegative real times `sigma`, the geometric factors by exponentials.
pub fn continuous_limit_kernel(
    k: u32,
    sigma1: f64,
    x1: i64,
    sigma2: f64,
    x2: i64,
    tol: f64,
) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("SymmetryOrderZero: k must be >= 1".into()));
    }
    for s in [sigma1, sigma2] {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("TimeOutOfRange: sigma = {s}")));
        }
    }
    let m = x1 - x2;
    let mut val = 0.0;
    if sigma1 > sigma2 && m >= 0 {
        let mut pw = 1.0;
        for i in 1..=m {
            pw *= (sigma1 - sigma2) / i as f64;
        }
        val -= pw;
    }
    let mut tot = Complex64::new(0.0, 0.0);
    let mut noise = 0.0f64;
    for j in 0..k {
        let om = omega_pow(k, j as i64);
        let f = |z: Complex64| ((om * sigma1 - sigma2) * z).exp() * z.powi(-(m as i32 + 1));
        let arc = arc_integral_angle(f, PI / k as f64, 1.0, tol)?;
        tot += omega_pow(k, -(j as i64) * x1) * arc.value;
        noise += arc.noise_floor;
    }
    Ok(val + realize(tot, tol, noise)?)
}

/// Dilute limit of the finite kernel at fixed parameters (no bulk scaling):
/// after gauge conjugation the kernel of a single surviving walker.
pub fn dilute_limit_kernel(gamma: &[f64], s1: usize, x1: i64, s2: usize, x2: i64) -> Result<f64> {
    check_gamma(gamma)?;
    check_lines(gamma.len(), s1, s2)?;
    let mut val = 0.0;
    if s1 > s2 {
        let mut pref = 1.0;
        for &g in &gamma[s2..s1] {
            pref *= 1.0 - g;
        }
        val -= pref * complete_homogeneous(x1 - x2, &gamma[s2..s1]);
    }
    let mut pref = 1.0;
    for &g in &gamma[..s1] {
        pref *= 1.0 - g;
    }
    Ok(val + pref * complete_homogeneous(x1, &gamma[..s1]))
}

/// Parameters of the saturation kernel: plateau parameter `d > 0` (or 0 to
/// probe the singular boundary case) and the series truncation tolerance.
#[derive(Debug, Clone, Copy)]
pub struct SaturationParams {
    pub d: f64,
    pub series_tol: f64,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Saturation kernel K(eta1, eta2): a theta-like series over integer shifts.
/// The j = 0 term is the sine kernel `sinc(pi (eta2 - eta1))`, evaluated in
/// removable-singularity-safe form; every other term is regular for d > 0.
pub fn johansson_kernel(eta1: f64, eta2: f64, p: &SaturationParams) -> Result<f64> {
    if !(p.d >= 0.0 && p.d.is_finite()) {
        return Err(Error::Domain(format!("PlateauOutOfRange: d = {}", p.d)));
    }
    let delta = eta2 - eta1;
    let term = |j: i64| -> Result<f64> {
        let denom = Complex64::new(p.d * j as f64, delta);
        if denom.norm() == 0.0 {
            return Err(Error::SingularTerm);
        }
        let decay = (-PI * p.d * (j * (j - 1)) as f64).exp();
        let phase = Complex64::from_polar(1.0, PI * ((2 * j - 1) as f64 * eta1 + eta2));
        Ok(decay * (phase / denom).re / PI)
    };
    let mut tot = sinc(PI * delta);
    tot += term(1)?;
    let mut t: i64 = 1;
    loop {
        // terms j = t+1 and j = -t share the decay factor e^{-pi d t (t+1)}
        let shared = (-PI * p.d * (t * (t + 1)) as f64).exp();
        let bound = shared / (PI * (p.d * t as f64).max(delta.abs()).max(1e-300));
        if bound < p.series_tol {
            break;
        }
        tot += term(t + 1)? + term(-t)?;
        t += 1;
        if t > 10_000 {
            return Err(Error::SeriesNoConvergence { terms: 10_000 });
        }
    }
    Ok(tot)
}

/// Two-term closed-form approximation of the saturation kernel (the j = 0 and
/// j = 1 terms); accurate to O(e^{-2 pi d}).
pub fn johansson_two_term(eta1: f64, eta2: f64, d: f64) -> f64 {
    let delta = eta1 - eta2;
    let sum = eta1 + eta2;
    sinc(PI * delta)
        + (d * (PI * sum).cos() + (eta2 - eta1) * (PI * sum).sin())
            / (PI * (d * d + (eta2 - eta1) * (eta2 - eta1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: u32, g: f64, steps: usize) -> LimitParams {
        LimitParams::new(k, vec![g; steps], 1e-12).unwrap()
    }

    #[test]
    fn start_line_density_is_lattice_indicator() {
        let p = params(2, 0.5, 6);
        for x in -3i64..=5 {
            let v = limit_density(&p, 0, x).unwrap();
            let expect = if x.rem_euclid(2) == 0 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-9, "x={x}: {v}");
        }
    }

    #[test]
    fn symmetry_order_one_is_extended_sine_at_full_angle() {
        let gamma = [0.5, 0.3, 0.6, 0.45];
        let p = LimitParams::new(1, gamma.to_vec(), 1e-12).unwrap();
        for (s, x, t, y) in [
            (1usize, 0i64, 1usize, 0i64),
            (1, 3, 1, 0),
            (2, 1, 1, 0),
            (1, 0, 3, 2),
            (4, 2, 2, -1),
        ] {
            let a = limit_kernel(&p, s, x, t, y).unwrap();
            let b = extended_sine(PI, &gamma, s, x, t, y, 1e-12).unwrap();
            assert!((a - b).abs() < 1e-10, "({s},{x},{t},{y}): {a} vs {b}");
        }
    }

    #[test]
    fn density_is_periodic_with_mean_one_over_k() {
        let p = params(3, 0.5, 4);
        let d: Vec<f64> = (0..6).map(|x| limit_density(&p, 2, x).unwrap()).collect();
        for x in 0..3 {
            assert!((d[x] - d[x + 3]).abs() < 1e-10, "period at {x}");
        }
        let mean = (d[0] + d[1] + d[2]) / 3.0;
        assert!((mean - 1.0 / 3.0).abs() < 1e-10, "mean {mean}");
    }

    #[test]
    fn extended_sine_equal_time_closed_form() {
        let gamma = [0.5; 3];
        for c in [0.7f64, 1.9, PI] {
            let diag = extended_sine(c, &gamma, 2, 5, 2, 5, 1e-13).unwrap();
            assert!((diag - c / PI).abs() < 1e-11, "c={c}: {diag}");
            for m in [1i64, 2, 5, -3] {
                let v = extended_sine(c, &gamma, 2, m, 2, 0, 1e-13).unwrap();
                let expect = (c * m as f64).sin() / (PI * m as f64);
                assert!((v - expect).abs() < 1e-11, "c={c} m={m}: {v} vs {expect}");
            }
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(matches!(
            LimitParams::new(2, vec![0.5, 1.2], 1e-12),
            Err(Error::GammaOutOfRange(_))
        ));
        assert!(LimitParams::new(0, vec![0.5], 1e-12).is_err());
        assert!(extended_sine(4.0, &[0.5], 1, 0, 1, 0, 1e-12).is_err());
        let p = params(2, 0.5, 2);
        assert!(limit_kernel(&p, 3, 0, 1, 0).is_err());
    }

    #[test]
    fn continuous_kernel_is_the_fine_step_limit() {
        // gamma_j = 1/S with s = sigma S approximates the continuous kernel
        let k = 2u32;
        let (sig1, sig2) = (0.5f64, 0.25f64);
        let cont = continuous_limit_kernel(k, sig1, 1, sig2, 0, 1e-12).unwrap();
        let mut errs = Vec::new();
        for ss in [8usize, 32] {
            let g = 1.0 / ss as f64;
            let p = LimitParams::new(k, vec![g; ss], 1e-12).unwrap();
            let v = limit_kernel(&p, (sig1 * ss as f64) as usize, 1, (sig2 * ss as f64) as usize, 0)
                .unwrap();
            errs.push((v - cont).abs());
        }
        assert!(errs[0] < 0.1, "coarse error {}", errs[0]);
        assert!(errs[1] < errs[0] / 2.0, "no refinement: {errs:?}");
    }

    #[test]
    fn saturation_kernel_matches_two_term_form_for_moderate_plateau() {
        let p = SaturationParams {
            d: 2.0,
            series_tol: 1e-16,
        };
        for (e1, e2) in [(0.0, 0.0), (0.3, -0.2), (1.1, 0.4), (-0.7, 0.7)] {
            let full = johansson_kernel(e1, e2, &p).unwrap();
            let two = johansson_two_term(e1, e2, p.d);
            assert!(
                (full - two).abs() < 1e-4,
                "({e1},{e2}): {full} vs {two}"
            );
        }
        // on the diagonal the sine part contributes exactly 1
        let diag = johansson_kernel(0.25, 0.25, &p).unwrap();
        assert!((diag - johansson_two_term(0.25, 0.25, p.d)).abs() < 1e-4);
    }

    #[test]
    fn saturation_kernel_period_two_in_both_arguments() {
        let p = SaturationParams {
            d: 0.8,
            series_tol: 1e-16,
        };
        for (e1, e2) in [(0.1, 0.3), (-0.4, 0.9)] {
            let a = johansson_kernel(e1, e2, &p).unwrap();
            let b = johansson_kernel(e1 + 2.0, e2 + 2.0, &p).unwrap();
            assert!((a - b).abs() < 1e-12, "({e1},{e2}): {a} vs {b}");
        }
    }

    #[test]
    fn singular_unpaired_term_is_reported() {
        let p = SaturationParams {
            d: 0.0,
            series_tol: 1e-16,
        };
        assert!(matches!(
            johansson_kernel(0.5, 0.5, &p),
            Err(Error::SingularTerm)
        ));
    }

    #[test]
    fn dilute_limit_is_rank_one_at_equal_lines() {
        let gamma = [0.4, 0.55, 0.3];
        let s = 2usize;
        let f = |x: i64| dilute_limit_kernel(&gamma, s, x, s, 0).unwrap();
        // K(x1, x2) depends only on x1, so every 2x2 minor vanishes
        for (x1, x2) in [(0i64, 1i64), (1, 3), (2, 5)] {
            let det = dilute_limit_kernel(&gamma, s, x1, s, x1).unwrap()
                * dilute_limit_kernel(&gamma, s, x2, s, x2).unwrap()
                - dilute_limit_kernel(&gamma, s, x1, s, x2).unwrap()
                    * dilute_limit_kernel(&gamma, s, x2, s, x1).unwrap();
            assert!(det.abs() < 1e-14, "({x1},{x2}): {det}");
            let _ = f(x1);
        }
        // the density is the law of a single walker and sums to 1
        let total: f64 = (0..400).map(|x| dilute_limit_kernel(&gamma, 3, x, 3, x).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10, "total mass {total}");
    }
}
