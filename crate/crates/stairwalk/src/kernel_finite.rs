//! Finite-N correlation kernel, evaluated by three independent routes that
//! cross-validate one another:
//!
//! * [`kernel_general`] — the explicit alternant formula (series-exact),
//! * [`kernel_equal_spacing`] — the residue form available when the start
//!   offsets are equally spaced,
//! * [`em_reference`] — the naive biorthogonalization with a numerically
//!   inverted Gramm matrix, kept as an independent reference.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::exact_residue;
use crate::model::{GridPoint, ValidatedModel};
use crate::quadrature::{circle_integral, CircleSpec};
use crate::series::{
    alternant, coeff_of_poly_times_geometric, complete_homogeneous, laurent_coeff,
    substituted_alternant, PolyCoeffs,
};
use crate::{Error, Result};

/// A kernel evaluation request K(s1, x1; s2, x2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelQuery {
    pub p1: GridPoint,
    pub p2: GridPoint,
}

impl KernelQuery {
    pub fn new(s1: i64, x1: i64, s2: i64, x2: i64) -> Self {
        KernelQuery {
            p1: GridPoint::new(s1, x1),
            p2: GridPoint::new(s2, x2),
        }
    }
}

/// Which evaluation route produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    General,
    EqualDistinct,
    EqualDegenerate,
    EqualDegenerateExact,
    EmReference,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::General => "general",
            Route::EqualDistinct => "equal-distinct",
            Route::EqualDegenerate => "equal-degenerate",
            Route::EqualDegenerateExact => "equal-degenerate-exact",
            Route::EmReference => "em",
        }
    }
}

/// Kernel value with provenance and an error estimate (zero for series-exact
/// routes, accumulated quadrature noise otherwise).
#[derive(Debug, Clone, Copy)]
pub struct KernelValue {
    pub value: f64,
    pub route: Route,
    pub err_estimate: f64,
}

fn check_query(model: &ValidatedModel, q: &KernelQuery) -> Result<(usize, i64, usize, i64)> {
    let max_s = 2 * model.n() as i64;
    for p in [q.p1, q.p2] {
        if p.s < 0 || p.s > max_s {
            return Err(Error::Domain(format!(
                "LineOutOfRange: s = {} not in 0..={max_s}",
                p.s
            )));
        }
        if p.x < 0 {
            return Err(Error::Domain(format!("HeightNegative: x = {}", p.x)));
        }
    }
    Ok((q.p1.s as usize, q.p1.x, q.p2.s as usize, q.p2.x))
}

/// General-offset kernel (requires pairwise distinct beta).
///
/// For `s1, s2 <= N` the l-independent simplified form is used; otherwise the
/// full biorthogonal form with series-evaluated psi-side integrals.
pub fn kernel_general(model: &ValidatedModel, q: &KernelQuery) -> Result<KernelValue> {
    let (s1, x1, s2, x2) = check_query(model, q)?;
    if !model.distinct_beta() {
        return Err(Error::DegenerateBeta(
            "the general route requires pairwise distinct beta".into(),
        ));
    }
    let n = model.n();
    let value = if s1 <= n && s2 <= n {
        kernel_simple(model, s1, x1, s2, x2)
    } else {
        kernel_full(model, s1, x1, s2, x2)
    };
    Ok(KernelValue {
        value,
        route: Route::General,
        err_estimate: 0.0,
    })
}

/// Simplified form, valid for s1, s2 <= N; never consults the endpoints.
fn kernel_simple(model: &ValidatedModel, s1: usize, x1: i64, s2: usize, x2: i64) -> f64 {
    let n = model.n();
    let alpha = model.alpha();
    let beta = model.beta();
    let kvec = model.k();
    let mut val = 0.0;
    if s1 > s2 {
        val -= complete_homogeneous(x1 - x2, &alpha[s2..s1]);
    }
    let hb = alternant(kvec, beta).value;
    for j in 1..=n {
        let p = substituted_alternant(kvec, beta, j).expect("distinct beta");
        let c = coeff_of_poly_times_geometric(&p, &alpha[..s1], x1);
        let mut pref = beta[j - 1].powi(x2 as i32);
        for r in 0..s2 {
            pref *= 1.0 - alpha[r] * beta[j - 1];
        }
        val += c / hb * pref;
    }
    val
}

/// Full biorthogonal form, valid for all 0 <= s <= 2N.
fn kernel_full(model: &ValidatedModel, s1: usize, x1: i64, s2: usize, x2: i64) -> f64 {
    let n = model.n();
    let alpha = model.alpha();
    let beta = model.beta();
    let kvec = model.k();
    let lvec = model.l();
    let inv_beta: Vec<f64> = beta.iter().map(|b| 1.0 / b).collect();

    let mut val = 0.0;
    if s1 > s2 {
        let (a_part, b_part) = step_rates(model, s2, s1);
        val -= laurent_coeff(x1 - x2, &a_part, &b_part);
    }
    let hk = alternant(kvec, beta).value;
    let hl = alternant(lvec, &inv_beta).value;
    // transitions applied on the phi side (steps 1..=s1)
    let a_phi: Vec<f64> = alpha[..s1.min(n)].to_vec();
    let b_phi: Vec<f64> = ((n + 1)..=s1).map(|l| beta[2 * n - l]).collect();
    // transitions applied on the psi side (steps s2+1..=2N)
    let a_psi: Vec<f64> = ((s2 + 1)..=n.max(s2)).filter(|&l| l <= n).map(|l| alpha[l - 1]).collect();
    let b_psi: Vec<f64> = ((n.max(s2) + 1)..=2 * n).map(|l| beta[2 * n - l]).collect();
    for j in 1..=n {
        let bj = beta[j - 1];
        let mut aj = 1.0;
        for r in 0..n {
            aj *= 1.0 - alpha[r] * bj;
        }
        for s in 0..n {
            if s != j - 1 {
                aj *= 1.0 - beta[s] / bj;
            }
        }
        aj /= hk * hl;
        let p = substituted_alternant(kvec, beta, j).expect("distinct beta");
        let mut phi = 0.0;
        for (d, &pd) in p.coeffs.iter().enumerate() {
            if pd != 0.0 {
                phi += pd * laurent_coeff(x1 - d as i64, &a_phi, &b_phi);
            }
        }
        let qpoly = substituted_alternant(lvec, &inv_beta, j).expect("distinct beta");
        let mut psi = 0.0;
        for (mm, &qm) in qpoly.coeffs.iter().enumerate() {
            if qm != 0.0 {
                psi += qm * laurent_coeff(mm as i64 - x2, &a_psi, &b_psi);
            }
        }
        val += aj * phi * psi;
    }
    val
}

/// Up/down rates of the steps strictly between lines `s_from` and `s_to`.
fn step_rates(model: &ValidatedModel, s_from: usize, s_to: usize) -> (Vec<f64>, Vec<f64>) {
    let n = model.n();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for l in (s_from + 1)..=s_to {
        if l <= n {
            a.push(model.alpha()[l - 1]);
        } else {
            b.push(model.beta()[2 * n - l]);
        }
    }
    (a, b)
}

/// Equal-spacing kernel (start offsets `k_j = g (j-1)`), valid for
/// `s1, s2 <= N`.
///
/// Distinct betas are handled by the finite residue sum; fully degenerate
/// betas by the expansion of the coupled double integral into separable terms,
/// with the inner residue taken by quadrature while round-off permits and by
/// exact rational arithmetic otherwise.
pub fn kernel_equal_spacing(model: &ValidatedModel, q: &KernelQuery, tol: f64) -> Result<KernelValue> {
    let (s1, x1, s2, x2) = check_query(model, q)?;
    let n = model.n();
    let g = model.equal_spacing().ok_or_else(|| {
        Error::Domain("StartsNotEquallySpaced: this route requires k_j = g (j-1)".into())
    })? as usize;
    if s1 > n || s2 > n {
        return Err(Error::Domain(format!(
            "LineOutOfRange: equal-spacing route requires s <= N = {n}"
        )));
    }
    let beta = model.beta();
    if model.distinct_beta() {
        return Ok(KernelValue {
            value: kernel_eq_distinct(model, g, s1, x1, s2, x2),
            route: Route::EqualDistinct,
            err_estimate: 0.0,
        });
    }
    if !beta.iter().all(|&b| b == beta[0]) {
        return Err(Error::DegenerateBeta(
            "betas must be pairwise distinct or all equal for the equal-spacing route".into(),
        ));
    }
    // Fully degenerate.  The inner residue sits at a pole of order N; the
    // float route loses roughly one digit per walker to cancellation, so for
    // larger N the exact rational route is used from the start.
    if n <= 8 {
        match kernel_eq_degenerate_quad(model, g, s1, x1, s2, x2, tol) {
            Ok((value, noise)) if noise <= tol.max(1e-11) * value.abs().max(1.0) => {
                return Ok(KernelValue {
                    value,
                    route: Route::EqualDegenerate,
                    err_estimate: noise,
                });
            }
            _ => {}
        }
    }
    let value =
        exact_residue::kernel_eq_degen_exact(n, model.alpha(), beta[0], g, s1, x1, s2, x2)?;
    Ok(KernelValue {
        value,
        route: Route::EqualDegenerateExact,
        err_estimate: 4.0 * f64::EPSILON * value.abs(),
    })
}

fn kernel_eq_distinct(model: &ValidatedModel, g: usize, s1: usize, x1: i64, s2: usize, x2: i64) -> f64 {
    let n = model.n();
    let alpha = model.alpha();
    let beta = model.beta();
    let mut val = 0.0;
    if s1 > s2 {
        val -= complete_homogeneous(x1 - x2, &alpha[s2..s1]);
    }
    for j in 1..=n {
        let bj = beta[j - 1];
        // polynomial prod_{l != j} (z^g - beta_l^g)
        let mut p = vec![1.0f64];
        for (l, &bl) in beta.iter().enumerate() {
            if l == j - 1 {
                continue;
            }
            let blg = bl.powi(g as i32);
            let mut qv = vec![0.0; p.len() + g];
            for (i, &pi) in p.iter().enumerate() {
                qv[i + g] += pi;
                qv[i] -= blg * pi;
            }
            p = qv;
        }
        let mut denom = 1.0;
        let bjg = bj.powi(g as i32);
        for (l, &bl) in beta.iter().enumerate() {
            if l != j - 1 {
                denom *= bjg - bl.powi(g as i32);
            }
        }
        let c = coeff_of_poly_times_geometric(&PolyCoeffs::new(p), &alpha[..s1], x1);
        let mut pref = bj.powi(x2 as i32);
        for r in 0..s2 {
            pref *= 1.0 - alpha[r] * bj;
        }
        val += c / denom * pref;
    }
    val
}

/// Degenerate route in floating point; returns (value, accumulated noise floor).
fn kernel_eq_degenerate_quad(
    model: &ValidatedModel,
    g: usize,
    s1: usize,
    x1: i64,
    s2: usize,
    x2: i64,
    tol: f64,
) -> Result<(f64, f64)> {
    let n = model.n();
    let alpha = model.alpha();
    let b = model.beta()[0];
    let mut val = 0.0;
    if s1 > s2 {
        val -= complete_homogeneous(x1 - x2, &alpha[s2..s1]);
    }
    // contour around the root cluster: inside the unit disk, clear of the
    // other g-th roots of b^g and of the poles 1/alpha_r
    let amax = alpha.iter().cloned().fold(0.0f64, f64::max);
    let mut r = (b * (1.0 - b)).min((1.0 / amax - b) / 2.0);
    if g > 1 {
        let root_gap = (Complex64::new(1.0, 0.0)
            - Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / g as f64))
        .norm();
        r = r.min(b * root_gap / 2.0);
    }
    let spec = CircleSpec {
        center: Complex64::new(b, 0.0),
        radius: r,
    };
    // polynomial (z^g - b^g)^N
    let bg = b.powi(g as i32);
    let mut p = vec![1.0f64];
    for _ in 0..n {
        let mut qv = vec![0.0; p.len() + g];
        for (i, &pi) in p.iter().enumerate() {
            qv[i + g] += pi;
            qv[i] -= bg * pi;
        }
        p = qv;
    }
    let p = PolyCoeffs::new(p);
    let rw = b + r;
    let mut tot = 0.0f64;
    let mut noise = 0.0f64;
    let mut m: i64 = 0;
    loop {
        let zc = coeff_of_poly_times_geometric(&p, &alpha[..s1], x1 + (g as i64) * (m + 1));
        let pw = (x2 + g as i64 - 1 + g as i64 * m) as i32;
        let f = |w: Complex64| {
            let mut num = Complex64::new(1.0, 0.0);
            for &a in &alpha[..s2] {
                num *= 1.0 - a * w;
            }
            num * w.powi(pw) / (w.powi(g as i32) - bg).powi(n as i32)
        };
        let inner_tol = tol.min(1e-13) * (1.0 + tot.abs() + val.abs());
        let wc = circle_integral(f, &spec, inner_tol)?;
        tot += g as f64 * zc * wc.value.re;
        noise += g as f64 * zc.abs() * wc.noise_floor.max(wc.err_estimate);
        m += 1;
        if rw.powi((g as i64 * m) as i32) < 1e-16 {
            break;
        }
    }
    Ok((val + tot, noise))
}

/// The Eynard-Mehta decomposition data: delta boundary functions, the Gramm
/// matrix, and its biorthogonalized counterpart (diagonal when l_N <= N-1).
#[derive(Debug, Clone)]
pub struct EMDecomposition {
    /// Support of the start delta functions (the offsets k_j).
    pub phi_support: Vec<i64>,
    /// Support of the end delta functions (the endpoints l_j).
    pub psi_support: Vec<i64>,
    pub gramm: DMatrix<f64>,
    pub gramm_tilde: DMatrix<f64>,
}

/// Build the Gramm matrix and its biorthogonalized form explicitly.
pub fn em_decomposition(model: &ValidatedModel) -> Result<EMDecomposition> {
    if !model.distinct_beta() {
        return Err(Error::DegenerateBeta(
            "the biorthogonalization requires pairwise distinct beta".into(),
        ));
    }
    let n = model.n();
    let alpha = model.alpha();
    let beta = model.beta();
    let inv_beta: Vec<f64> = beta.iter().map(|b| 1.0 / b).collect();
    let gramm = DMatrix::from_fn(n, n, |i, j| {
        laurent_coeff(model.l()[j] - model.k()[i], alpha, beta)
    });
    // pairing of the substituted alternants through the full transition product
    let ppolys: Vec<PolyCoeffs> = (1..=n)
        .map(|j| substituted_alternant(model.k(), beta, j).expect("distinct"))
        .collect();
    let qpolys: Vec<PolyCoeffs> = (1..=n)
        .map(|j| substituted_alternant(model.l(), &inv_beta, j).expect("distinct"))
        .collect();
    let gramm_tilde = DMatrix::from_fn(n, n, |i, j| {
        let mut acc = 0.0;
        for (d, &pd) in ppolys[i].coeffs.iter().enumerate() {
            if pd == 0.0 {
                continue;
            }
            for (e, &qe) in qpolys[j].coeffs.iter().enumerate() {
                if qe != 0.0 {
                    acc += pd * qe * laurent_coeff(e as i64 - d as i64, alpha, beta);
                }
            }
        }
        acc
    });
    Ok(EMDecomposition {
        phi_support: model.k().to_vec(),
        psi_support: model.l().to_vec(),
        gramm,
        gramm_tilde,
    })
}

/// Closed form for the diagonal of the biorthogonalized Gramm matrix.
pub fn gramm_tilde_diagonal(model: &ValidatedModel) -> Result<Vec<f64>> {
    if !model.distinct_beta() {
        return Err(Error::DegenerateBeta("requires pairwise distinct beta".into()));
    }
    let n = model.n();
    let beta = model.beta();
    let inv_beta: Vec<f64> = beta.iter().map(|b| 1.0 / b).collect();
    let hk = alternant(model.k(), beta).value;
    let hl = alternant(model.l(), &inv_beta).value;
    Ok((0..n)
        .map(|j| {
            let mut d = 1.0;
            for r in 0..n {
                d *= 1.0 - model.alpha()[r] * beta[j];
            }
            for s in 0..n {
                if s != j {
                    d *= 1.0 - beta[s] / beta[j];
                }
            }
            hk * hl / d
        })
        .collect())
}

/// Reference kernel via numerical inversion of the Gramm matrix.
pub fn em_reference(model: &ValidatedModel, q: &KernelQuery) -> Result<KernelValue> {
    let (s1, x1, s2, x2) = check_query(model, q)?;
    let n = model.n();
    let alpha = model.alpha();
    let beta = model.beta();
    let gramm = DMatrix::from_fn(n, n, |i, j| {
        laurent_coeff(model.l()[j] - model.k()[i], alpha, beta)
    });
    let ginv = gramm
        .clone()
        .try_inverse()
        .ok_or(Error::SingularGramm { cond: f64::INFINITY })?;
    let norm = |m: &DMatrix<f64>| {
        (0..m.nrows())
            .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0f64, f64::max)
    };
    let cond = norm(&gramm) * norm(&ginv);
    if cond > 1e12 {
        return Err(Error::SingularGramm { cond });
    }
    let mut val = 0.0;
    if s1 > s2 {
        let (a_part, b_part) = step_rates(model, s2, s1);
        val -= laurent_coeff(x1 - x2, &a_part, &b_part);
    }
    let a_phi: Vec<f64> = alpha[..s1.min(n)].to_vec();
    let b_phi: Vec<f64> = ((n + 1)..=s1).map(|l| beta[2 * n - l]).collect();
    let a_psi: Vec<f64> = ((s2 + 1)..=n.max(s2)).filter(|&l| l <= n).map(|l| alpha[l - 1]).collect();
    let b_psi: Vec<f64> = ((n.max(s2) + 1)..=2 * n).map(|l| beta[2 * n - l]).collect();
    for i in 0..n {
        let phi = laurent_coeff(x1 - model.k()[i], &a_phi, &b_phi);
        if phi == 0.0 {
            continue;
        }
        for j in 0..n {
            let psi = laurent_coeff(model.l()[j] - x2, &a_psi, &b_psi);
            // transpose-inverse convention
            val += ginv[(j, i)] * phi * psi;
        }
    }
    Ok(KernelValue {
        value: val,
        route: Route::EmReference,
        err_estimate: cond * f64::EPSILON,
    })
}
