//! Brute-force transfer-matrix oracle.
//!
//! Ground truth at desk scale: the walker ensemble is summed exactly over all
//! strictly increasing height tuples below a cap, with one-step weights given
//! by the same determinants that define the measure.  Nothing here shares code
//! with the kernel formulas, so agreement is meaningful evidence.
//!
//! One-step determinants vanish exactly unless consecutive columns interlace,
//! so the sweep only enumerates interlacing successors; completeness of that
//! enumeration against the full state-pair loop is covered by tests.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::model::{GridPoint, PathConfig, ValidatedModel};
use crate::{Error, Result};

/// Cap on the number of enumerated states `C(height_cap + 1, N)`.
pub const STATE_CAP: u64 = 200_000;

/// Exact finite-state summation oracle for one model and height cap.
pub struct Oracle {
    model: ValidatedModel,
    height_cap: i64,
    states: Vec<Vec<i64>>,
    binom: Vec<Vec<u64>>,
    /// forward[l][i]: total weight of all path prefixes ending in state i on line l.
    forward: Vec<Vec<f64>>,
}

fn binomial_table(rows: usize, cols: usize) -> Vec<Vec<u64>> {
    let mut b = vec![vec![0u64; cols]; rows];
    for i in 0..rows {
        b[i][0] = 1;
        for j in 1..cols {
            b[i][j] = if j > i {
                0
            } else {
                b[i - 1][j - 1] + b[i - 1][j]
            };
        }
    }
    b
}

/// Numeric determinant on a reused buffer: direct expansion for the small
/// orders that dominate the sweep, Gaussian elimination with partial pivoting
/// otherwise.
fn det_in_place(a: &mut [f64], n: usize) -> f64 {
    match n {
        1 => return a[0],
        2 => return a[0] * a[3] - a[1] * a[2],
        3 => {
            return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => {}
    }
    let mut det = 1.0f64;
    for c in 0..n {
        let mut piv = c;
        for r in (c + 1)..n {
            if a[r * n + c].abs() > a[piv * n + c].abs() {
                piv = r;
            }
        }
        if a[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..n {
                a.swap(c * n + k, piv * n + k);
            }
            det = -det;
        }
        let p = a[c * n + c];
        det *= p;
        for r in (c + 1)..n {
            let f = a[r * n + c] / p;
            if f != 0.0 {
                for k in c..n {
                    a[r * n + k] -= f * a[c * n + k];
                }
            }
        }
    }
    det
}

impl Oracle {
    /// Build the oracle: enumerate all states (strictly increasing N-tuples in
    /// `0..=height_cap`) and run the forward sweep over all 2N lines.
    pub fn new(model: &ValidatedModel, height_cap: i64) -> Result<Self> {
        let n = model.n();
        if height_cap < *model.k().last().unwrap() {
            return Err(Error::Domain(format!(
                "HeightCapTooLow: cap {} below top start offset {}",
                height_cap,
                model.k().last().unwrap()
            )));
        }
        let m = height_cap as usize;
        let binom = binomial_table(m + 2, n + 1);
        let count = binom[m + 1][n];
        if count > STATE_CAP {
            return Err(Error::StateSpaceTooLarge {
                states: count,
                cap: STATE_CAP,
            });
        }
        let mut states = vec![Vec::new(); count as usize];
        let mut comb: Vec<i64> = (0..n as i64).collect();
        loop {
            let r = rank(&comb, &binom);
            states[r] = comb.clone();
            // next combination in lexicographic order
            let mut i = n;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if comb[i] < height_cap - (n - 1 - i) as i64 {
                    comb[i] += 1;
                    for j in (i + 1)..n {
                        comb[j] = comb[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    comb.clear();
                    break;
                }
            }
            if comb.is_empty() {
                break;
            }
        }
        let mut oracle = Oracle {
            model: model.clone(),
            height_cap,
            states,
            binom,
            forward: Vec::new(),
        };
        oracle.forward = oracle.sweep(None)?;
        Ok(oracle)
    }

    pub fn model(&self) -> &ValidatedModel {
        &self.model
    }
    pub fn height_cap(&self) -> i64 {
        self.height_cap
    }
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    fn rank_of(&self, state: &[i64]) -> usize {
        rank(state, &self.binom)
    }

    /// Per-step rate and direction for line `l` in 1..=2N.
    fn step(&self, l: usize) -> (bool, f64) {
        let n = self.model.n();
        if l <= n {
            (true, self.model.alpha()[l - 1])
        } else {
            (false, self.model.beta()[2 * n - l])
        }
    }

    /// One-step determinant between states x and y (numeric, by elimination).
    fn transition_det(&self, pows: &[f64], up: bool, x: &[i64], y: &[i64], scratch: &mut [f64]) -> f64 {
        let n = self.model.n();
        for i in 0..n {
            for j in 0..n {
                let d = if up { y[j] - x[i] } else { x[i] - y[j] };
                scratch[i * n + j] = if d >= 0 { pows[d as usize] } else { 0.0 };
            }
        }
        det_in_place(scratch, n)
    }

    /// Enumerate all interlacing successors of `x` for an up or down step.
    fn for_each_successor(&self, up: bool, x: &[i64], mut visit: impl FnMut(&[i64])) {
        let n = self.model.n();
        let mut lo = vec![0i64; n];
        let mut hi = vec![0i64; n];
        for j in 0..n {
            if up {
                lo[j] = x[j];
                hi[j] = if j + 1 < n { x[j + 1] - 1 } else { self.height_cap };
            } else {
                lo[j] = if j > 0 { x[j - 1] + 1 } else { 0 };
                hi[j] = x[j];
            }
        }
        let mut y = lo.clone();
        loop {
            visit(&y);
            let mut j = n;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                if y[j] < hi[j] {
                    y[j] += 1;
                    for t in (j + 1)..n {
                        y[t] = lo[t];
                    }
                    break;
                }
                if j == 0 {
                    return;
                }
            }
        }
    }

    /// Forward sweep; when `required` is given, a state only accumulates
    /// weight on line l if it contains every required height for that line.
    fn sweep(&self, required: Option<&[HashSet<i64>]>) -> Result<Vec<Vec<f64>>> {
        let n = self.model.n();
        let nn = 2 * n;
        let nstates = self.states.len();
        let contains = |l: usize, y: &[i64]| -> bool {
            match required {
                None => true,
                Some(req) => req[l].iter().all(|x| y.binary_search(x).is_ok()),
            }
        };
        let mut layers = Vec::with_capacity(nn + 1);
        let mut cur = vec![0.0f64; nstates];
        let start = self.rank_of(self.model.k());
        cur[start] = if contains(0, self.model.k()) { 1.0 } else { 0.0 };
        layers.push(cur.clone());
        for l in 1..=nn {
            let (up, rate) = self.step(l);
            let maxd = self.height_cap as usize;
            let mut pows = vec![1.0f64; maxd + 1];
            for d in 1..=maxd {
                pows[d] = pows[d - 1] * rate;
            }
            // parallel over a fixed chunking of source states, merged in
            // chunk order so results do not depend on the thread count
            let prev = &layers[l - 1];
            let nchunks = 32usize.min(nstates.max(1));
            let csize = nstates.div_ceil(nchunks);
            let partials: Vec<Vec<f64>> = (0..nchunks)
                .into_par_iter()
                .map(|c| {
                    let mut local = vec![0.0f64; nstates];
                    let mut scratch = vec![0.0f64; n * n];
                    for i in (c * csize)..((c + 1) * csize).min(nstates) {
                        let fi = prev[i];
                        if fi == 0.0 {
                            continue;
                        }
                        let x = &self.states[i];
                        self.for_each_successor(up, x, |y| {
                            if !contains(l, y) {
                                return;
                            }
                            let w = self.transition_det(&pows, up, x, y, &mut scratch);
                            if w != 0.0 {
                                local[rank(y, &self.binom)] += fi * w;
                            }
                        });
                    }
                    local
                })
                .collect();
            let mut next = vec![0.0f64; nstates];
            for part in &partials {
                for (j, v) in part.iter().enumerate() {
                    if *v != 0.0 {
                        next[j] += v;
                    }
                }
            }
            layers.push(next);
        }
        Ok(layers)
    }

    /// Total weight of all path configurations (the normalizing constant).
    pub fn partition_function(&self) -> f64 {
        let end = self.rank_of(self.model.l());
        self.forward[2 * self.model.n()][end]
    }

    /// Probability that walkers occupy every point in `points` simultaneously
    /// (the corresponding correlation function value).
    pub fn correlation(&self, points: &[GridPoint]) -> Result<f64> {
        let n = self.model.n();
        let mut req: Vec<HashSet<i64>> = vec![HashSet::new(); 2 * n + 1];
        for p in points {
            if p.s < 0 || p.s > 2 * n as i64 {
                return Err(Error::Domain(format!("LineOutOfRange: s = {}", p.s)));
            }
            if p.x < 0 || p.x > self.height_cap {
                return Err(Error::Domain(format!(
                    "HeightOutOfRange: x = {} not in 0..={}",
                    p.x, self.height_cap
                )));
            }
            req[p.s as usize].insert(p.x);
        }
        if req.iter().any(|s| s.len() > n) {
            return Ok(0.0);
        }
        let constrained = self.sweep(Some(&req))?;
        let end = self.rank_of(self.model.l());
        Ok(constrained[2 * n][end] / self.partition_function())
    }

    /// One-point density at (s, x).
    pub fn density(&self, s: i64, x: i64) -> Result<f64> {
        self.correlation(&[GridPoint::new(s, x)])
    }

    /// Relative truncation bound: by how much (at most) the partition function
    /// can still grow if the height cap is raised, relative to its value.
    /// Derived from the geometric decay of excursions above the cap.
    pub fn tail_bound(&self) -> f64 {
        let amax = self.model.alpha().iter().cloned().fold(0.0f64, f64::max);
        let bmax = self.model.beta().iter().cloned().fold(0.0f64, f64::max);
        let q = amax * bmax;
        let top = (*self.model.k().last().unwrap()).max(*self.model.l().last().unwrap());
        let excess = (self.height_cap + 1 - top).max(0) as i32;
        // excursions above the cap decay like q^excess with a polynomial
        // multiplicity in the excursion height and entry line; the linear
        // factor and the constant absorb that multiplicity with margin
        let n = self.model.n() as f64;
        let poly = 16.0 * n * n * (excess as f64 + 1.0);
        poly * q.powi(excess) / (1.0 - q).powi(4)
    }

    /// Draw exact samples of whole path configurations by backward sampling
    /// through the stored forward tables.  Deterministic in `seed`
    /// (ChaCha20 keyed by `seed`, consumed in a fixed order).
    pub fn sample_paths(&self, count: usize, seed: u64) -> Result<Vec<PathConfig>> {
        let n = self.model.n();
        let nn = 2 * n;
        if self.partition_function() <= 0.0 {
            return Err(Error::Domain(
                "ZeroMass: end state unreachable under the height cap".into(),
            ));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut scratch = vec![0.0f64; n * n];
        for _ in 0..count {
            let mut cols: Vec<Vec<i64>> = vec![Vec::new(); nn + 1];
            cols[nn] = self.model.l().to_vec();
            for l in (1..=nn).rev() {
                let (up, rate) = self.step(l);
                let y = cols[l].clone();
                // predecessors of y under this step interlace from the other side
                let mut cands: Vec<(Vec<i64>, f64)> = Vec::new();
                let mut total = 0.0;
                let maxd = self.height_cap as usize;
                let mut pows = vec![1.0f64; maxd + 1];
                for d in 1..=maxd {
                    pows[d] = pows[d - 1] * rate;
                }
                self.for_each_predecessor(up, &y, |x| {
                    let fi = self.forward[l - 1][rank(x, &self.binom)];
                    if fi == 0.0 {
                        return;
                    }
                    let w = self.transition_det(&pows, up, x, &y, &mut scratch);
                    if w > 0.0 {
                        total += fi * w;
                        cands.push((x.to_vec(), fi * w));
                    }
                });
                let u: f64 = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut chosen = cands.len() - 1;
                for (i, (_, w)) in cands.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                cols[l - 1] = cands[chosen].0.clone();
            }
            let heights = (0..n)
                .map(|j| (0..=nn).map(|l| cols[l][j]).collect())
                .collect();
            let cfg = PathConfig { heights };
            self.model.validate_config(&cfg)?;
            out.push(cfg);
        }
        Ok(out)
    }

    /// Enumerate all states x such that the step x -> y has nonzero weight.
    fn for_each_predecessor(&self, up: bool, y: &[i64], mut visit: impl FnMut(&[i64])) {
        let n = self.model.n();
        let mut lo = vec![0i64; n];
        let mut hi = vec![0i64; n];
        for j in 0..n {
            if up {
                // x_j <= y_j and x_j > y_{j-1}
                lo[j] = if j > 0 { y[j - 1] + 1 } else { 0 };
                hi[j] = y[j];
            } else {
                // x_j >= y_j and x_j < y_{j+1}
                lo[j] = y[j];
                hi[j] = if j + 1 < n { y[j + 1] - 1 } else { self.height_cap };
            }
        }
        let mut x = lo.clone();
        loop {
            visit(&x);
            let mut j = n;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                if x[j] < hi[j] {
                    x[j] += 1;
                    for t in (j + 1)..n {
                        x[t] = lo[t];
                    }
                    break;
                }
                if j == 0 {
                    return;
                }
            }
        }
    }
}

/// Colexicographic rank of a strictly increasing tuple.
fn rank(state: &[i64], binom: &[Vec<u64>]) -> usize {
    state
        .iter()
        .enumerate()
        .map(|(j, &x)| binom[x as usize][j + 1] as usize)
        .sum()
}
