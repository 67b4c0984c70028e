//! Statistics of a determinantal point process given by any kernel: joint
//! correlations, density profiles, number variance, and gauge conjugation.
//!
//! Everything is written against [`KernelHandle`] so the finite-N kernel, the
//! oracle, and every limiting kernel can be interrogated uniformly.  Kernel
//! evaluations for a batch are computed in parallel but collected in index
//! order and reduced sequentially, so results do not depend on the thread
//! count.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::GridPoint;
use crate::{Error, Result};

/// A lattice interval `lo..=hi` on a fixed line `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub s: i64,
    pub lo: i64,
    pub hi: i64,
}

impl IntervalSpec {
    pub fn points(&self) -> Vec<GridPoint> {
        (self.lo..=self.hi).map(|x| GridPoint::new(self.s, x)).collect()
    }
}

type KernelFn = dyn Fn(GridPoint, GridPoint) -> Result<f64> + Send + Sync;

/// A kernel as a black-box evaluation function plus a label for reports.
#[derive(Clone)]
pub struct KernelHandle {
    label: String,
    eval: Arc<KernelFn>,
}

impl std::fmt::Debug for KernelHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelHandle").field("label", &self.label).finish()
    }
}

impl KernelHandle {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(GridPoint, GridPoint) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        KernelHandle {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, p: GridPoint, q: GridPoint) -> Result<f64> {
        (self.eval)(p, q)
    }

    /// Conjugate the kernel by a pointwise gauge function: the new kernel is
    /// `g(p) / g(q) * K(p, q)`.  All determinantal correlations are invariant
    /// under this operation; a vanishing or non-finite gauge value at an
    /// evaluated point reports [`Error::ZeroGauge`] lazily.
    pub fn gauge_conjugate(&self, gauge: impl Fn(GridPoint) -> f64 + Send + Sync + 'static) -> Self {
        let inner = self.eval.clone();
        KernelHandle {
            label: format!("{}/gauged", self.label),
            eval: Arc::new(move |p, q| {
                let (gp, gq) = (gauge(p), gauge(q));
                if gp == 0.0 || gq == 0.0 || !gp.is_finite() || !gq.is_finite() {
                    return Err(Error::ZeroGauge);
                }
                Ok(gp / gq * inner(p, q)?)
            }),
        }
    }
}

/// Fill the kernel matrix K(points[i], points[j]) in parallel, index-ordered.
fn kernel_matrix(k: &KernelHandle, points: &[GridPoint]) -> Result<DMatrix<f64>> {
    let n = points.len();
    let entries: Vec<Result<f64>> = (0..n * n)
        .into_par_iter()
        .map(|e| k.eval(points[e / n], points[e % n]))
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (e, v) in entries.into_iter().enumerate() {
        m[(e / n, e % n)] = v?;
    }
    Ok(m)
}

/// Joint correlation of the point set: `det K(points_i, points_j)`.
pub fn correlation(k: &KernelHandle, points: &[GridPoint]) -> Result<f64> {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i] == points[j] {
                return Err(Error::DuplicatePoints);
            }
        }
    }
    if points.is_empty() {
        return Ok(1.0);
    }
    let m = kernel_matrix(k, points)?;
    Ok(if points.len() == 1 {
        m[(0, 0)]
    } else {
        m.lu().determinant()
    })
}

/// One-point densities along a line: `(x, K((s, x), (s, x)))` for x in range.
pub fn density_profile(
    k: &KernelHandle,
    s: i64,
    xs: std::ops::Range<i64>,
) -> Result<Vec<(i64, f64)>> {
    let pts: Vec<GridPoint> = xs.map(|x| GridPoint::new(s, x)).collect();
    let vals: Vec<Result<f64>> = pts.par_iter().map(|&p| k.eval(p, p)).collect();
    pts.iter()
        .zip(vals)
        .map(|(p, v)| Ok((p.x, v?)))
        .collect()
}

/// Variance of the particle count in an interval on one line.
pub fn number_variance(k: &KernelHandle, iv: &IntervalSpec) -> Result<f64> {
    if iv.hi < iv.lo {
        return Ok(0.0);
    }
    number_variance_points(k, &iv.points())
}

/// Variance of the particle count in a window of points, valid for any
/// (possibly non-symmetric) determinantal kernel:
/// `sum_x K(x,x) (1 - K(x,x)) - sum_{x != y} K(x,y) K(y,x)`.
pub fn number_variance_points(k: &KernelHandle, points: &[GridPoint]) -> Result<f64> {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i] == points[j] {
                return Err(Error::DuplicatePoints);
            }
        }
    }
    let m = kernel_matrix(k, points)?;
    let n = points.len();
    let mut var = 0.0;
    for i in 0..n {
        var += m[(i, i)] * (1.0 - m[(i, i)]);
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                var -= m[(i, j)] * m[(j, i)];
            }
        }
    }
    Ok(var)
}

/// Expected particle count in a window of points.
pub fn expected_count(k: &KernelHandle, points: &[GridPoint]) -> Result<f64> {
    let vals: Vec<Result<f64>> = points.par_iter().map(|&p| k.eval(p, p)).collect();
    let mut tot = 0.0;
    for v in vals {
        tot += v?;
    }
    Ok(tot)
}
