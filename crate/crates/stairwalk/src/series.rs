//! Exact power-series and alternant algebra.
//!
//! Every closed-circle contour integral of a rational integrand used by the
//! kernel formulas is a Laurent coefficient of a product of geometric series
//! and polynomials; this module extracts those coefficients by exact
//! convolution, with no quadrature error.

use crate::{Error, Result};

/// Coefficients of `prod_j (1 - rates_j z)^{-1}` up to degree `mmax`
/// (complete homogeneous symmetric polynomials of the rates).
pub fn h_series(mmax: usize, rates: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; mmax + 1];
    c[0] = 1.0;
    for &r in rates {
        for i in 1..=mmax {
            c[i] += r * c[i - 1];
        }
    }
    c
}

/// `[z^m] prod_j (1 - rates_j z)^{-1}`; 0 for m < 0, 1 for m = 0.
pub fn complete_homogeneous(m: i64, rates: &[f64]) -> f64 {
    if m < 0 {
        return 0.0;
    }
    let m = m as usize;
    h_series(m, rates)[m]
}

/// Incrementally extendable h-series for one fixed rate list.
pub(crate) struct HSeries {
    rates: Vec<f64>,
    coeffs: Vec<f64>,
}

impl HSeries {
    pub(crate) fn new(rates: &[f64]) -> Self {
        HSeries {
            rates: rates.to_vec(),
            coeffs: vec![1.0],
        }
    }
    pub(crate) fn get(&mut self, m: i64) -> f64 {
        if m < 0 {
            return 0.0;
        }
        let m = m as usize;
        if m >= self.coeffs.len() {
            // Recompute from scratch at double size; the DP is O(len * rates)
            // and the lists here are short.
            let newlen = (2 * self.coeffs.len()).max(m + 1);
            self.coeffs = h_series(newlen - 1, &self.rates);
        }
        self.coeffs[m]
    }
}

/// A polynomial in z by its coefficient list (`coeffs[d]` multiplies `z^d`).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    pub coeffs: Vec<f64>,
}

impl PolyCoeffs {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        PolyCoeffs { coeffs }
    }
    pub fn coeff(&self, d: i64) -> f64 {
        if d < 0 || d as usize >= self.coeffs.len() {
            0.0
        } else {
            self.coeffs[d as usize]
        }
    }
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
    /// Evaluate at a real point (Horner).
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }
}

/// Alternant value together with an optional condition warning (estimated
/// relative error, attached when it exceeds 1e-8).
#[derive(Debug, Clone, Copy)]
pub struct AlternantValue {
    pub value: f64,
    pub condition_warning: Option<f64>,
}

/// `det(gamma_j^{exponents_i})` over equal-length lists.
///
/// For equally spaced exponents `c, c+g, ..., c+(N-1)g` the generalized
/// Vandermonde product form `prod gamma_j^c * prod_{i<j} (gamma_j^g - gamma_i^g)`
/// is used; otherwise a pivoted LU determinant with a Hadamard-type condition
/// estimate.
pub fn alternant(exponents: &[i64], gamma: &[f64]) -> AlternantValue {
    assert_eq!(exponents.len(), gamma.len(), "alternant: length mismatch");
    let n = gamma.len();
    if n == 1 {
        return AlternantValue {
            value: gamma[0].powi(exponents[0] as i32),
            condition_warning: None,
        };
    }
    let g = exponents[1] - exponents[0];
    let spaced = g >= 1 && exponents.windows(2).all(|w| w[1] - w[0] == g);
    if spaced {
        let c = exponents[0];
        let mut value = 1.0f64;
        let mut relerr = 0.0f64;
        for &gam in gamma {
            value *= gam.powi(c as i32);
        }
        let powers: Vec<f64> = gamma.iter().map(|&x| x.powi(g as i32)).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = powers[j] - powers[i];
                value *= d;
                if d != 0.0 {
                    relerr += f64::EPSILON * (powers[j].abs() + powers[i].abs()) / d.abs();
                }
            }
        }
        let warning = if relerr > 1e-8 { Some(relerr) } else { None };
        return AlternantValue {
            value,
            condition_warning: warning,
        };
    }
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| gamma[j].powi(exponents[i] as i32));
    let mut hadamard = 1.0f64;
    for i in 0..n {
        hadamard *= a.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let det = a.lu().determinant();
    let relerr = if det != 0.0 {
        (n as f64) * f64::EPSILON * hadamard / det.abs()
    } else {
        f64::INFINITY
    };
    AlternantValue {
        value: det,
        condition_warning: if relerr > 1e-8 { Some(relerr) } else { None },
    }
}

/// The alternant with column `j` (1-based) of the beta matrix replaced by the
/// monomials `z^{exponents_i}`, expanded as a polynomial in z by cofactor
/// expansion along that column.  Vanishes at every `beta_l`, `l != j`.
pub fn substituted_alternant(exponents: &[i64], beta: &[f64], j: usize) -> Result<PolyCoeffs> {
    let n = beta.len();
    assert_eq!(exponents.len(), n);
    assert!((1..=n).contains(&j), "column index out of range");
    for a in 0..n {
        for b in (a + 1)..n {
            if beta[a] == beta[b] {
                return Err(Error::DegenerateBeta(format!(
                    "beta[{a}] == beta[{b}] == {}",
                    beta[a]
                )));
            }
        }
    }
    let deg = *exponents.last().unwrap();
    assert!(deg >= 0);
    let mut p = vec![0.0f64; deg as usize + 1];
    for i in 0..n {
        let minor = if n == 1 {
            1.0
        } else {
            let rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != j - 1).collect();
            let a = nalgebra::DMatrix::from_fn(n - 1, n - 1, |r, c| {
                beta[cols[c]].powi(exponents[rows[r]] as i32)
            });
            if n == 2 {
                a[(0, 0)]
            } else {
                a.lu().determinant()
            }
        };
        let sign = if (i + (j - 1)) % 2 == 0 { 1.0 } else { -1.0 };
        p[exponents[i] as usize] += sign * minor;
    }
    Ok(PolyCoeffs::new(p))
}

/// `[z^m] P(z) * prod_j (1 - rates_j z)^{-1}` by exact convolution.
pub fn coeff_of_poly_times_geometric(poly: &PolyCoeffs, rates: &[f64], m: i64) -> f64 {
    if m < 0 {
        return 0.0;
    }
    let h = h_series(m as usize, rates);
    let mut tot = 0.0;
    for (d, &c) in poly.coeffs.iter().enumerate() {
        if d as i64 > m {
            break;
        }
        tot += c * h[(m - d as i64) as usize];
    }
    tot
}

/// Laurent coefficient `[z^m] prod_i (1 - a_i z)^{-1} prod_j (1 - b_j / z)^{-1}`,
/// i.e. `sum_{u - v = m} h_u(a) h_v(b)`.  The bilateral sum converges
/// geometrically for |a_i b_j| < 1 and is truncated at relative 1e-18.
pub fn laurent_coeff(m: i64, arates: &[f64], brates: &[f64]) -> f64 {
    let mut ha = HSeries::new(arates);
    let mut hb = HSeries::new(brates);
    let v0 = (-m).max(0);
    let mut tot = 0.0f64;
    let mut v = v0;
    loop {
        let t = ha.get(m + v) * hb.get(v);
        tot += t;
        v += 1;
        if v > v0 + 5 && t.abs() < 1e-18 * (tot.abs() + 1e-300) {
            break;
        }
        if v > v0 + 4000 {
            break;
        }
    }
    tot
}
