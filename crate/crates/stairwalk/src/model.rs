//! Finite-N model definition, validation, and elementary path weights.
//!
//! Internal coordinates place the 2N+1 vertical lines at `s = 0..=2N`; steps
//! `1..=N` go weakly up with rate `alpha_s`, steps `N+1..=2N` go weakly down
//! with rate `beta_{2N-s+1}`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Raw model parameters as supplied by the user (JSON schema:
/// `{"n": int, "k": [int], "l": [int], "alpha": [float], "beta": [float]}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of walkers N.
    pub n: usize,
    /// Start offsets k_1 < ... < k_N with k_1 = 0.
    pub k: Vec<i64>,
    /// End points l_1 < ... < l_N with l_N <= N - 1.
    pub l: Vec<i64>,
    /// Up-step rates, one per walker, each in (0, 1).
    pub alpha: Vec<f64>,
    /// Down-step rates, one per walker, each in (0, 1).
    pub beta: Vec<f64>,
}

/// A lattice point (line s, height x) at which kernels are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub s: i64,
    pub x: i64,
}

impl GridPoint {
    pub fn new(s: i64, x: i64) -> Self {
        GridPoint { s, x }
    }
}

/// Heights of all walkers on every line: `heights[j][s]` is the position of
/// walker j (0-based) on line s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub heights: Vec<Vec<i64>>,
}

/// Immutable validated model handle.
#[derive(Debug, Clone)]
pub struct ValidatedModel {
    params: ModelParams,
    distinct_beta: bool,
    equal_spacing: Option<i64>,
}

/// Validate raw parameters.  The handle records whether the betas are pairwise
/// distinct (exact comparison; this selects the evaluation route downstream)
/// and whether the start offsets are equally spaced `k_j = g (j - 1)`.
pub fn validate(params: ModelParams) -> Result<ValidatedModel> {
    let n = params.n;
    if n == 0 {
        return Err(Error::Domain("NoWalkers: n must be positive".into()));
    }
    for (name, v) in [("k", &params.k), ("l", &params.l)] {
        if v.len() != n {
            return Err(Error::Domain(format!(
                "LengthMismatch: {} has {} entries, expected {}",
                name,
                v.len(),
                n
            )));
        }
    }
    for (name, v) in [("alpha", &params.alpha), ("beta", &params.beta)] {
        if v.len() != n {
            return Err(Error::Domain(format!(
                "LengthMismatch: {} has {} entries, expected {}",
                name,
                v.len(),
                n
            )));
        }
        for &r in v {
            if !(r.is_finite() && r.abs() < 1.0) {
                return Err(Error::Domain(format!(
                    "RateOutOfRange: {} entry {} not in (-1, 1)",
                    name, r
                )));
            }
        }
    }
    if params.k[0] != 0 {
        return Err(Error::Domain(format!(
            "StartNotAtOrigin: k_1 = {} but k_1 = 0 is required",
            params.k[0]
        )));
    }
    if params.k.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("StartsNotIncreasing: k must be strictly increasing".into()));
    }
    if params.l.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("EndsNotIncreasing: l must be strictly increasing".into()));
    }
    if params.l[0] < 0 {
        return Err(Error::Domain("EndpointsNegative: l_1 must be >= 0".into()));
    }
    let l_max = *params.l.last().unwrap();
    if l_max > n as i64 - 1 {
        return Err(Error::Domain(format!(
            "EndpointsTooHigh: l_N = {} exceeds N - 1 = {}",
            l_max,
            n as i64 - 1
        )));
    }
    let mut distinct = true;
    'outer: for i in 0..n {
        for j in (i + 1)..n {
            if params.beta[i] == params.beta[j] {
                distinct = false;
                break 'outer;
            }
        }
    }
    let equal_spacing = detect_equal_spacing(&params.k);
    Ok(ValidatedModel {
        params,
        distinct_beta: distinct,
        equal_spacing,
    })
}

fn detect_equal_spacing(k: &[i64]) -> Option<i64> {
    if k.len() == 1 {
        return Some(1);
    }
    let g = k[1] - k[0];
    if g < 1 {
        return None;
    }
    for (j, &kj) in k.iter().enumerate() {
        if kj != g * j as i64 {
            return None;
        }
    }
    Some(g)
}

impl ValidatedModel {
    pub fn n(&self) -> usize {
        self.params.n
    }
    pub fn k(&self) -> &[i64] {
        &self.params.k
    }
    pub fn l(&self) -> &[i64] {
        &self.params.l
    }
    pub fn alpha(&self) -> &[f64] {
        &self.params.alpha
    }
    pub fn beta(&self) -> &[f64] {
        &self.params.beta
    }
    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    /// True iff all betas are pairwise distinct (exact comparison).
    pub fn distinct_beta(&self) -> bool {
        self.distinct_beta
    }
    /// Spacing g when k_j = g (j - 1), else None.
    pub fn equal_spacing(&self) -> Option<i64> {
        self.equal_spacing
    }

    /// One-step weight of moving from height x1 (line step-1) to x2 (line step).
    ///
    /// Steps `1..=N` move weakly up with weight `alpha_step^(x2-x1)`; steps
    /// `N+1..=2N` move weakly down with weight `beta_{2N-step+1}^(x1-x2)`.
    pub fn transition_weight(&self, step: usize, x1: i64, x2: i64) -> Result<f64> {
        let n = self.params.n;
        if step < 1 || step > 2 * n {
            return Err(Error::Index { step, max: 2 * n });
        }
        Ok(if step <= n {
            if x2 >= x1 {
                self.params.alpha[step - 1].powi((x2 - x1) as i32)
            } else {
                0.0
            }
        } else {
            let b = self.params.beta[2 * n - step];
            if x2 <= x1 {
                b.powi((x1 - x2) as i32)
            } else {
                0.0
            }
        })
    }

    /// Check all PathConfig invariants against this model.
    pub fn validate_config(&self, config: &PathConfig) -> Result<()> {
        let n = self.params.n;
        if config.heights.len() != n {
            return Err(Error::InvalidConfig(format!(
                "expected {} walkers, found {}",
                n,
                config.heights.len()
            )));
        }
        for (j, row) in config.heights.iter().enumerate() {
            if row.len() != 2 * n + 1 {
                return Err(Error::InvalidConfig(format!(
                    "walker {} has {} lines, expected {}",
                    j,
                    row.len(),
                    2 * n + 1
                )));
            }
            if row[0] != self.params.k[j] {
                return Err(Error::InvalidConfig(format!(
                    "walker {} starts at {} instead of {}",
                    j, row[0], self.params.k[j]
                )));
            }
            if row[2 * n] != self.params.l[j] {
                return Err(Error::InvalidConfig(format!(
                    "walker {} ends at {} instead of {}",
                    j,
                    row[2 * n],
                    self.params.l[j]
                )));
            }
            for s in 0..2 * n {
                let (a, b) = (row[s], row[s + 1]);
                if a < 0 || b < 0 {
                    return Err(Error::InvalidConfig("negative height".into()));
                }
                if s < n && b < a {
                    return Err(Error::InvalidConfig(format!(
                        "walker {} moves down on up-step {}",
                        j,
                        s + 1
                    )));
                }
                if s >= n && b > a {
                    return Err(Error::InvalidConfig(format!(
                        "walker {} moves up on down-step {}",
                        j,
                        s + 1
                    )));
                }
            }
        }
        for s in 0..=2 * n {
            for j in 0..n.saturating_sub(1) {
                if config.heights[j][s] >= config.heights[j + 1][s] {
                    return Err(Error::InvalidConfig(format!(
                        "walkers {} and {} intersect on line {}",
                        j,
                        j + 1,
                        s
                    )));
                }
            }
        }
        Ok(())
    }

    /// True iff consecutive columns interlace, i.e. every one-step transition
    /// determinant is nonzero.  Configurations failing this carry zero weight.
    pub fn config_interlaces(&self, config: &PathConfig) -> bool {
        let n = self.params.n;
        for s in 0..2 * n {
            for j in 0..n - 1 {
                if s < n {
                    // up step: y_j < x_{j+1}
                    if config.heights[j][s + 1] >= config.heights[j + 1][s] {
                        return false;
                    }
                } else {
                    // down step: x_j < y_{j+1}
                    if config.heights[j][s] >= config.heights[j + 1][s + 1] {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Weight of a configuration: product over all walkers and steps of the
    /// one-step weight.  Falls back to log-space accumulation if the direct
    /// product underflows.
    pub fn path_weight(&self, config: &PathConfig) -> Result<f64> {
        self.validate_config(config)?;
        let n = self.params.n;
        let mut prod = 1.0f64;
        let mut logsum = 0.0f64;
        for row in &config.heights {
            for s in 0..2 * n {
                let w = self.transition_weight(s + 1, row[s], row[s + 1])?;
                prod *= w;
                logsum += w.ln();
            }
        }
        if prod == 0.0 && logsum.is_finite() {
            return Ok(logsum.exp());
        }
        Ok(prod)
    }

    /// Weight in determinant form: product over steps of
    /// `det[w_step(x_i, y_j)]`.  Agrees with [`path_weight`] on every
    /// nonintersecting configuration.
    pub fn path_weight_lgv(&self, config: &PathConfig) -> Result<f64> {
        self.validate_config(config)?;
        let n = self.params.n;
        let mut prod = 1.0f64;
        for s in 0..2 * n {
            let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
                self.transition_weight(s + 1, config.heights[i][s], config.heights[j][s + 1])
                    .unwrap()
            });
            prod *= if n == 1 { m[(0, 0)] } else { m.lu().determinant() };
        }
        Ok(prod)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, k: &[i64], l: &[i64], a: &[f64], b: &[f64]) -> ModelParams {
        ModelParams {
            n,
            k: k.to_vec(),
            l: l.to_vec(),
            alpha: a.to_vec(),
            beta: b.to_vec(),
        }
    }

    #[test]
    fn minimal_model_is_valid() {
        let m = validate(p(1, &[0], &[0], &[0.5], &[0.5])).unwrap();
        assert_eq!(m.n(), 1);
        assert!(m.distinct_beta());
        assert_eq!(m.equal_spacing(), Some(1));
    }

    #[test]
    fn endpoints_too_high_is_rejected() {
        let err = validate(p(2, &[0, 3], &[0, 2], &[0.5, 0.5], &[0.4, 0.5])).unwrap_err();
        match err {
            Error::Domain(msg) => assert!(msg.contains("EndpointsTooHigh"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn equal_spacing_detected() {
        let m = validate(p(
            3,
            &[0, 2, 4],
            &[0, 1, 2],
            &[2.0 / 3.0; 3],
            &[2.0 / 3.0; 3],
        ))
        .unwrap();
        assert_eq!(m.equal_spacing(), Some(2));
        assert!(!m.distinct_beta());
    }

    #[test]
    fn start_offset_must_be_zero() {
        let err = validate(p(2, &[1, 2], &[0, 1], &[0.5, 0.5], &[0.4, 0.5])).unwrap_err();
        assert!(matches!(err, Error::Domain(ref m) if m.contains("StartNotAtOrigin")));
    }

    #[test]
    fn transition_weight_examples() {
        let m = validate(p(2, &[0, 1], &[0, 1], &[0.5, 0.6], &[0.4, 0.5])).unwrap();
        assert_eq!(m.transition_weight(1, 5, 5).unwrap(), 1.0);
        assert_eq!(m.transition_weight(1, 0, 3).unwrap(), 0.125);
        assert_eq!(m.transition_weight(3, 2, 5).unwrap(), 0.0);
        assert!(matches!(
            m.transition_weight(5, 0, 0),
            Err(Error::Index { step: 5, max: 4 })
        ));
    }

    #[test]
    fn up_step_weights_sum_to_geometric_series() {
        let m = validate(p(2, &[0, 1], &[0, 1], &[0.3, 0.7], &[0.4, 0.5])).unwrap();
        for step in 1..=2usize {
            let a = m.alpha()[step - 1];
            let x1 = 3i64;
            let sum: f64 = (x1..x1 + 400)
                .map(|x2| m.transition_weight(step, x1, x2).unwrap())
                .sum();
            assert!((sum - 1.0 / (1.0 - a)).abs() < 1e-12, "step {step}: {sum}");
        }
    }

    #[test]
    fn path_weight_single_walker() {
        let m = validate(p(1, &[0], &[0], &[0.5], &[0.5])).unwrap();
        let flat = PathConfig {
            heights: vec![vec![0, 0, 0]],
        };
        assert_eq!(m.path_weight(&flat).unwrap(), 1.0);
        let bump = PathConfig {
            heights: vec![vec![0, 2, 0]],
        };
        assert!((m.path_weight(&bump).unwrap() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn product_form_equals_determinant_form_exhaustively() {
        // N = 2, all nonintersecting configs with heights <= 6.
        let m = validate(p(2, &[0, 2], &[0, 1], &[0.4, 0.6], &[0.35, 0.55])).unwrap();
        let hmax = 6i64;
        let mut checked = 0usize;
        // enumerate middle columns (lines 1..=3) freely, filter by validity
        for a1 in 0..=hmax {
            for a2 in 0..=hmax {
                for b1 in 0..=hmax {
                    for b2 in 0..=hmax {
                        for c1 in 0..=hmax {
                            for c2 in 0..=hmax {
                                let cfg = PathConfig {
                                    heights: vec![vec![0, a1, b1, c1, 0], vec![2, a2, b2, c2, 1]],
                                };
                                if m.validate_config(&cfg).is_err() {
                                    continue;
                                }
                                let w1 = m.path_weight(&cfg).unwrap();
                                let w2 = m.path_weight_lgv(&cfg).unwrap();
                                if m.config_interlaces(&cfg) {
                                    assert!(
                                        (w1 - w2).abs() <= 1e-12 * w1.max(1.0),
                                        "{cfg:?}: {w1} vs {w2}"
                                    );
                                } else {
                                    assert!(w2.abs() <= 1e-12, "non-interlacing det {w2}");
                                }
                                checked += 1;
                            }
                        }
                    }
                }
            }
        }
        assert!(checked > 100, "only {checked} configurations enumerated");
    }

    #[test]
    fn json_round_trip() {
        let params = p(2, &[0, 2], &[0, 1], &[0.4, 0.6], &[0.35, 0.55]);
        let s = serde_json::to_string(&params).unwrap();
        assert!(s.contains("\"alpha\""));
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, params);
    }
}
