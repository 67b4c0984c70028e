//! Lozenge-tiling picture of the path ensemble.
//!
//! A nonintersecting, interlacing path configuration with densely packed
//! endpoints (`l_j = j - 1`) is equivalent to a lozenge tiling of a staircase
//! region.  Coordinates: lines are indexed `i = s - N` in `[-N, N]`; between
//! consecutive lines lies a strip.  The three lozenge species are
//!
//! * `c` tiles, one per (unfrozen) walker per interior line, sitting at the
//!   walker's (sheared) height,
//! * `b` tiles, marking unit jumps on left strips and filling right strips,
//! * `a` tiles, marking unit drops on right strips and filling left strips.
//!
//! On right lines `i >= 1` walkers `m <= i` are frozen at height `m - 1` and
//! carry no tiles; heights on right lines are sheared by `-i` so the frozen
//! staircase is cut away.  Each strip's `a` and `b` tiles together cover every
//! clipped row exactly once; this whole-cell convention makes the bijection
//! exact and is what the renderers draw (schematically, not to scale).

use serde::{Deserialize, Serialize};

use crate::model::{PathConfig, ValidatedModel};
use crate::{Error, Result};

/// Lozenge species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LozengeKind {
    A,
    B,
    C,
}

/// One lozenge: species, line or strip index `i`, row `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Lozenge {
    #[serde(rename = "type")]
    pub kind: LozengeKind,
    pub i: i64,
    pub j: i64,
}

/// A complete clipped tiling.  `clip` is the number of retained rows; all
/// structure above it is the deterministic continuation (fillers only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tiling {
    pub n: usize,
    pub k: Vec<i64>,
    pub clip: i64,
    pub lozenges: Vec<Lozenge>,
}

fn require_packed(model: &ValidatedModel) -> Result<()> {
    for (j, &l) in model.l().iter().enumerate() {
        if l != j as i64 {
            return Err(Error::EndpointsNotPacked);
        }
    }
    Ok(())
}

/// Multiplicative weight attached to a `c` tile on line `i` per unit of
/// height; the product over all `c` tiles of `factor(i)^j` reproduces the
/// path-measure weight up to a configuration-independent constant.
fn line_factor(model: &ValidatedModel, i: i64) -> f64 {
    let n = model.n() as i64;
    if i < 0 {
        model.alpha()[(n + i - 1) as usize] / model.alpha()[(n + i) as usize]
    } else if i == 0 {
        model.alpha()[(n - 1) as usize] * model.beta()[(n - 1) as usize]
    } else {
        model.beta()[(n - i - 1) as usize] / model.beta()[(n - i) as usize]
    }
}

/// Convert a path configuration into its lozenge tiling.
pub fn paths_to_tiling(model: &ValidatedModel, config: &PathConfig) -> Result<Tiling> {
    require_packed(model)?;
    model.validate_config(config)?;
    if !model.config_interlaces(config) {
        return Err(Error::InconsistentTiling(
            "configuration does not interlace (zero weight)".into(),
        ));
    }
    let n = model.n() as i64;
    let clip = config
        .heights
        .iter()
        .flat_map(|row| row.iter().copied())
        .max()
        .unwrap()
        + 2;
    let x = |s: i64, m: i64| config.heights[(m - 1) as usize][s as usize]; // 1-based walker
    let mut tiles: Vec<Lozenge> = Vec::new();

    // c tiles on interior lines
    for i in (-n + 1)..=(n - 1) {
        let s = i + n;
        if i <= 0 {
            for m in 1..=n {
                tiles.push(Lozenge {
                    kind: LozengeKind::C,
                    i,
                    j: x(s, m),
                });
            }
        } else {
            for m in (i + 1)..=n {
                tiles.push(Lozenge {
                    kind: LozengeKind::C,
                    i,
                    j: x(s, m) - i,
                });
            }
        }
    }

    // left strips: b tiles over each jump, a fillers elsewhere
    for i in -n..=-1 {
        let s = i + n;
        let mut covered = vec![false; clip as usize];
        for m in 1..=n {
            for j in (x(s, m) + 1)..=x(s + 1, m) {
                tiles.push(Lozenge {
                    kind: LozengeKind::B,
                    i,
                    j,
                });
                covered[j as usize] = true;
            }
        }
        for (j, c) in covered.iter().enumerate() {
            if !c {
                tiles.push(Lozenge {
                    kind: LozengeKind::A,
                    i,
                    j: j as i64,
                });
            }
        }
    }

    // right strips: a tiles over each (sheared) drop, b fillers elsewhere
    for i in 0..=(n - 1) {
        let s = i + n;
        let mut covered = vec![false; clip as usize];
        for m in (i + 1)..=n {
            let a_m = x(s, m) - i;
            let a2_m = if m > i + 1 { x(s + 1, m) - (i + 1) } else { -1 };
            for j in (a2_m + 1)..=a_m {
                tiles.push(Lozenge {
                    kind: LozengeKind::A,
                    i,
                    j,
                });
                covered[j as usize] = true;
            }
        }
        for (j, c) in covered.iter().enumerate() {
            if !c {
                tiles.push(Lozenge {
                    kind: LozengeKind::B,
                    i,
                    j: j as i64,
                });
            }
        }
    }

    tiles.sort();
    Ok(Tiling {
        n: model.n(),
        k: model.k().to_vec(),
        clip,
        lozenges: tiles,
    })
}

/// Decode a tiling back into its path configuration.  The decoded paths are
/// re-encoded and compared with the input, so any corruption (missing, moved,
/// or duplicated tiles, wrong clip) is rejected.
pub fn tiling_to_paths(model: &ValidatedModel, tiling: &Tiling) -> Result<PathConfig> {
    require_packed(model)?;
    if tiling.n != model.n() || tiling.k != model.k() {
        return Err(Error::InconsistentTiling(
            "tiling header does not match the model".into(),
        ));
    }
    let n = model.n() as i64;
    let nn = 2 * model.n();
    let mut heights: Vec<Vec<i64>> = vec![vec![0; nn + 1]; model.n()];
    for (m, row) in heights.iter_mut().enumerate() {
        row[0] = model.k()[m];
        row[nn] = m as i64;
    }
    for i in (-n + 1)..=(n - 1) {
        let s = (i + n) as usize;
        let mut js: Vec<i64> = tiling
            .lozenges
            .iter()
            .filter(|t| t.kind == LozengeKind::C && t.i == i)
            .map(|t| t.j)
            .collect();
        js.sort();
        let expected = if i <= 0 { n } else { n - i } as usize;
        if js.len() != expected {
            return Err(Error::InconsistentTiling(format!(
                "line {i}: {} c tiles, expected {expected}",
                js.len()
            )));
        }
        if i <= 0 {
            for (m, &j) in js.iter().enumerate() {
                heights[m][s] = j;
            }
        } else {
            for m in 0..i {
                heights[m as usize][s] = m; // frozen walkers
            }
            for (t, &j) in js.iter().enumerate() {
                heights[i as usize + t][s] = j + i;
            }
        }
    }
    let config = PathConfig { heights };
    model
        .validate_config(&config)
        .map_err(|e| Error::InconsistentTiling(format!("decoded paths invalid: {e}")))?;
    let regenerated = paths_to_tiling(model, &config)?;
    if &regenerated != tiling {
        return Err(Error::InconsistentTiling(
            "re-encoded tiling differs from input".into(),
        ));
    }
    Ok(config)
}

/// Weight of a tiling: product over `c` tiles of `line_factor(i)^j`.
/// Proportional to the path weight of the encoded configuration.
pub fn tiling_weight(model: &ValidatedModel, tiling: &Tiling) -> Result<f64> {
    require_packed(model)?;
    let mut w = 1.0f64;
    for t in &tiling.lozenges {
        if t.kind == LozengeKind::C {
            w *= line_factor(model, t.i).powi(t.j as i32);
        }
    }
    Ok(w)
}

/// ASCII rendering: rows top-down; line columns show `c` tiles, strip columns
/// show the `a`/`b` cover.
pub fn render_ascii(tiling: &Tiling) -> String {
    let n = tiling.n as i64;
    let mut out = String::new();
    for j in (0..tiling.clip).rev() {
        for i in -n..=n {
            // line column
            let has_c = tiling
                .lozenges
                .iter()
                .any(|t| t.kind == LozengeKind::C && t.i == i && t.j == j);
            out.push(if has_c { 'c' } else { ' ' });
            // strip column to the right of line i
            if i < n {
                let strip = tiling
                    .lozenges
                    .iter()
                    .find(|t| t.kind != LozengeKind::C && t.i == i && t.j == j);
                out.push(match strip.map(|t| t.kind) {
                    Some(LozengeKind::A) => 'a',
                    Some(LozengeKind::B) => 'b',
                    _ => ' ',
                });
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    out
}

/// SVG rendering (schematic).  Fillers are drawn first, `c` tiles last so the
/// walker trajectories read on top.  Deterministic: equal tilings render to
/// byte-identical documents.
pub fn render_svg(tiling: &Tiling) -> String {
    let n = tiling.n as i64;
    let cell = 20.0f64;
    let width = (2 * n + 1) as f64 * cell + 2.0 * cell;
    let height = tiling.clip as f64 * cell + 2.0 * cell;
    let xpos = |i: i64, line: bool| -> f64 {
        // lines at integer columns, strips centered between them
        cell + (i + n) as f64 * cell + if line { 0.0 } else { cell / 2.0 }
    };
    let ypos = |j: i64| -> f64 { height - cell - (j as f64 + 0.5) * cell };
    let mut body = String::new();
    let mut draw = |t: &Lozenge| {
        let (cx, cy) = (xpos(t.i, t.kind == LozengeKind::C), ypos(t.j));
        let h = cell * 0.45;
        let (pts, fill) = match t.kind {
            // left-leaning rhombus
            LozengeKind::A => (
                format!(
                    "{:.1},{:.1} {:.1},{:.1} {:.1},{:.1} {:.1},{:.1}",
                    cx - h, cy + h * 0.4, cx + h * 0.4, cy + h,
                    cx + h, cy - h * 0.4, cx - h * 0.4, cy - h
                ),
                "#c9d7f0",
            ),
            // right-leaning rhombus
            LozengeKind::B => (
                format!(
                    "{:.1},{:.1} {:.1},{:.1} {:.1},{:.1} {:.1},{:.1}",
                    cx - h, cy - h * 0.4, cx + h * 0.4, cy - h,
                    cx + h, cy + h * 0.4, cx - h * 0.4, cy + h
                ),
                "#f0dfc0",
            ),
            // vertical diamond
            LozengeKind::C => (
                format!(
                    "{:.1},{:.1} {:.1},{:.1} {:.1},{:.1} {:.1},{:.1}",
                    cx, cy - h, cx + h, cy, cx, cy + h, cx - h, cy
                ),
                "#b05060",
            ),
        };
        body.push_str(&format!(
            "<polygon points=\"{pts}\" fill=\"{fill}\" stroke=\"#404040\" stroke-width=\"0.5\"/>\n"
        ));
    };
    for kind in [LozengeKind::A, LozengeKind::B, LozengeKind::C] {
        for t in tiling.lozenges.iter().filter(|t| t.kind == kind) {
            draw(t);
        }
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n{body}</svg>\n"
    )
}
