//! Reconstruction scores of an assembled puzzle against the true layout.
//!
//! The true layout is itself an [`AssemblyResult`]: the cell of each piece in
//! the original image and the transform that restores it. For a solver
//! placement `s_p` and true restoring transform `u_p`, the residual
//! `g_p = s_p ∘ u_p⁻¹` is the transform by which the piece is still off.
//!
//! * direct comparison: share of pieces in their true cell with `g_p = id`;
//! * neighbor comparison: share of truly adjacent pairs that are placed next
//!   to each other consistently, i.e. with equal residuals and with the
//!   offset between them equal to the true offset mapped by that residual;
//! * largest component: size of the largest group of pieces linked by
//!   correct neighbor pairs, over the piece count.
//!
//! Neighbor comparison and the largest component do not depend on a global
//! rotation, flip or recoloring of the whole arrangement. Direct comparison
//! does, except that a global negative-positive flip is forgiven.

use serde::{Deserialize, Serialize};

use crate::cipher::KeyExpansion;
use crate::error::{Error, Result};
use crate::raster::{partition, RasterImage};
use crate::solver::{AssemblyResult, Placement};
use crate::transform::{BlockTransform, ElementTable};

/// Scores in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub dc: f64,
    pub nc: f64,
    pub lc: f64,
}

impl ScoreTriple {
    pub fn sum(&self) -> f64 {
        self.dc + self.nc + self.lc
    }

    pub const CSV_HEADER: &'static str = "dc,nc,lc";

    pub fn csv_row(&self) -> String {
        format!("{:.3},{:.3},{:.3}", self.dc, self.nc, self.lc)
    }
}

/// The layout an encryption destroyed: cipher piece `k` came from cell
/// `permutation[k]` and is restored by the inverse of its block transform.
pub fn ground_truth(expansion: &KeyExpansion, rows: usize, cols: usize) -> Result<AssemblyResult> {
    let placements = expansion
        .permutation
        .iter()
        .zip(&expansion.transforms)
        .enumerate()
        .map(|(k, (&cell, t))| Placement {
            piece: k,
            row: cell / cols.max(1),
            col: cell % cols.max(1),
            transform: t.inverse(),
        })
        .collect();
    AssemblyResult::new(rows, cols, placements)
}

fn check(result: &AssemblyResult, truth: &AssemblyResult) -> Result<()> {
    if (result.rows, result.cols) != (truth.rows, truth.cols) {
        return Err(Error::Shape(format!(
            "result is {}x{}, truth is {}x{}",
            result.rows, result.cols, truth.rows, truth.cols
        )));
    }
    Ok(())
}

fn residuals(result: &AssemblyResult, truth: &AssemblyResult) -> Vec<usize> {
    let table = ElementTable::get();
    result
        .placements
        .iter()
        .zip(&truth.placements)
        .map(|(s, u)| table.compose(s.transform.element_id(), table.inverse(u.transform.element_id())))
        .collect()
}

fn strict_direct(result: &AssemblyResult, truth: &AssemblyResult) -> f64 {
    let hits = result
        .placements
        .iter()
        .zip(&truth.placements)
        .filter(|(s, u)| (s.row, s.col) == (u.row, u.col) && s.transform.equivalent(&u.transform))
        .count();
    hits as f64 / result.len() as f64
}

/// Share of pieces in the right cell and the right orientation.
pub fn direct_comparison(result: &AssemblyResult, truth: &AssemblyResult) -> Result<f64> {
    check(result, truth)?;
    Ok(strict_direct(result, truth).max(strict_direct(&result.flip_polarity(), truth)))
}

/// Truly adjacent pairs `(a, b)` with `b` right of or below `a`.
pub fn true_adjacencies(truth: &AssemblyResult) -> Vec<(usize, usize)> {
    let cells = truth.cells();
    let (rows, cols) = (truth.rows, truth.cols);
    let mut out = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let a = cells[r * cols + c];
            if c + 1 < cols {
                out.push((a, cells[r * cols + c + 1]));
            }
            if r + 1 < rows {
                out.push((a, cells[(r + 1) * cols + c]));
            }
        }
    }
    out
}

fn correct_pairs(result: &AssemblyResult, truth: &AssemblyResult) -> (Vec<(usize, usize)>, usize) {
    let g = residuals(result, truth);
    let pairs = true_adjacencies(truth);
    let total = pairs.len();
    let at = |p: &Placement| (p.row as i64, p.col as i64);
    let good = pairs
        .into_iter()
        .filter(|&(a, b)| {
            if g[a] != g[b] {
                return false;
            }
            let (ta, tb) = (at(&truth.placements[a]), at(&truth.placements[b]));
            let (sa, sb) = (at(&result.placements[a]), at(&result.placements[b]));
            let want = BlockTransform::from_element_id(g[a])
                .geometry()
                .apply_offset(tb.0 - ta.0, tb.1 - ta.1);
            (sb.0 - sa.0, sb.1 - sa.1) == want
        })
        .collect();
    (good, total)
}

/// Share of true neighbor pairs that are joined correctly.
pub fn neighbor_comparison(result: &AssemblyResult, truth: &AssemblyResult) -> Result<f64> {
    check(result, truth)?;
    let (good, total) = correct_pairs(result, truth);
    Ok(if total == 0 { 1.0 } else { good.len() as f64 / total as f64 })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Largest group of pieces connected through correct neighbor pairs.
pub fn largest_component(result: &AssemblyResult, truth: &AssemblyResult) -> Result<f64> {
    check(result, truth)?;
    let n = result.len();
    let (good, _) = correct_pairs(result, truth);
    let mut parent: Vec<usize> = (0..n).collect();
    for (a, b) in good {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut size = vec![0usize; n];
    for k in 0..n {
        size[find(&mut parent, k)] += 1;
    }
    Ok(*size.iter().max().unwrap() as f64 / n as f64)
}

pub fn score(result: &AssemblyResult, truth: &AssemblyResult) -> Result<ScoreTriple> {
    Ok(ScoreTriple {
        dc: direct_comparison(result, truth)?,
        nc: neighbor_comparison(result, truth)?,
        lc: largest_component(result, truth)?,
    })
}

/// Scores a decrypted image against the original, block by block: a cell is
/// right when its block is identical, a neighbor pair when both cells are.
pub fn score_image(decrypted: &RasterImage, original: &RasterImage, block: usize) -> Result<ScoreTriple> {
    let a = partition(decrypted, block, block)?;
    let b = partition(original, block, block)?;
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(Error::Shape(format!(
            "decrypted grid {}x{} differs from original {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (rows, cols) = (a.rows(), a.cols());
    let n = rows * cols;
    let ok: Vec<bool> = a.blocks().iter().zip(b.blocks()).map(|(x, y)| x == y).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    let (mut good, mut total) = (0usize, 0usize);
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            for m in [(c + 1 < cols).then_some(k + 1), (r + 1 < rows).then_some(k + cols)].into_iter().flatten() {
                total += 1;
                if ok[k] && ok[m] {
                    good += 1;
                    let (rk, rm) = (find(&mut parent, k), find(&mut parent, m));
                    parent[rk.max(rm)] = rk.min(rm);
                }
            }
        }
    }
    let mut size = vec![0usize; n];
    for k in (0..n).filter(|&k| ok[k]) {
        size[find(&mut parent, k)] += 1;
    }
    Ok(ScoreTriple {
        dc: ok.iter().filter(|&&x| x).count() as f64 / n as f64,
        nc: if total == 0 { 1.0 } else { good as f64 / total as f64 },
        lc: *size.iter().max().unwrap() as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::{expand_key, CipherConfig, PuzzleType, SecretKey};
    use crate::transform::Rotation;

    fn truth(ty: PuzzleType, rows: usize, cols: usize, seed: u64) -> AssemblyResult {
        let e = expand_key(&SecretKey::from_seed(seed), rows * cols, &CipherConfig::for_type(ty, 8));
        ground_truth(&e, rows, cols).unwrap()
    }

    #[test]
    fn truth_scores_one() {
        for ty in PuzzleType::ALL {
            let t = truth(ty, 3, 4, 5);
            let s = score(&t, &t).unwrap();
            assert_eq!((s.dc, s.nc, s.lc), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn polarity_flip_is_forgiven() {
        let t = truth(PuzzleType::TypeIN, 3, 3, 9);
        let s = score(&t.flip_polarity(), &t).unwrap();
        assert_eq!((s.dc, s.nc, s.lc), (1.0, 1.0, 1.0));
    }

    #[test]
    fn global_quarter_turn_keeps_neighbors() {
        // turn a square solution by 90 degrees as a whole
        let t = truth(PuzzleType::Type2, 3, 3, 2);
        let q = BlockTransform::rotation(Rotation::R90);
        let turned = AssemblyResult::new(
            3,
            3,
            t.placements
                .iter()
                .map(|p| {
                    let (r, c) = q.geometry().apply_offset(p.row as i64 - 1, p.col as i64 - 1);
                    Placement {
                        row: (r + 1) as usize,
                        col: (c + 1) as usize,
                        transform: q.compose(&p.transform),
                        ..*p
                    }
                })
                .collect(),
        )
        .unwrap();
        let s = score(&turned, &t).unwrap();
        assert_eq!((s.nc, s.lc), (1.0, 1.0));
        assert!(s.dc < 1.0);
    }

    #[test]
    fn swapped_pair_breaks_their_links() {
        let t = truth(PuzzleType::Type1, 1, 4, 0);
        let mut r = t.clone();
        let cells = t.cells();
        let (a, b) = (cells[0], cells[3]);
        let (ca, cb) = (r.placements[a].col, r.placements[b].col);
        r.placements[a].col = cb;
        r.placements[b].col = ca;
        let s = score(&r, &t).unwrap();
        assert_eq!(s.dc, 0.5);
        assert!((s.nc - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.lc, 0.5);
    }

    #[test]
    fn image_scores() {
        let img = RasterImage::from_fn(32, 16, |x, y| [(x * 7) as u8, (y * 9) as u8, (x * y) as u8]);
        let s = score_image(&img, &img, 8).unwrap();
        assert_eq!((s.dc, s.nc, s.lc), (1.0, 1.0, 1.0));
        let mut broken = img.clone();
        broken.pixels_mut()[0] ^= 1;
        let s = score_image(&broken, &img, 8).unwrap();
        assert_eq!(s.dc, 7.0 / 8.0);
        assert_eq!(s.nc, 8.0 / 10.0);
        assert_eq!(s.lc, 7.0 / 8.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = truth(PuzzleType::Type1, 2, 3, 0);
        let b = truth(PuzzleType::Type1, 3, 2, 0);
        assert!(score(&a, &b).is_err());
    }
}
