//! Greedy tree-based placement.
//!
//! Candidate seams are merged in order of confidence-weighted cost, each
//! merge joining two rigid clusters of pieces (Kruskal style). The largest
//! cluster is trimmed to the puzzle frame and the remaining cells are filled
//! one at a time with the leftover piece that best fits its placed neighbors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{reassemble, BlockGrid, RasterImage};
use crate::transform::{apply_transform, BlockTransform, ElementTable, Rotation};

use super::refine::refine;
use super::segments::regroup;
use super::table::{CompatibilityTable, Direction, Piece, PieceContexts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    /// Divide each seam cost by the best competing seam before ordering.
    pub confidence: bool,
    /// Refuse merges whose bounding box no longer fits the frame.
    pub constrain_frame: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            confidence: true,
            constrain_frame: false,
        }
    }
}

impl AssemblyOptions {
    /// Merge orders tried by [`assemble_best`]: with and without the frame
    /// constraint, with and without confidence weighting when it is allowed.
    pub fn variants(confidence: bool) -> Vec<AssemblyOptions> {
        let weighting: &[bool] = if confidence { &[true, false] } else { &[false] };
        weighting
            .iter()
            .flat_map(|&c| {
                [false, true].map(|f| AssemblyOptions {
                    confidence: c,
                    constrain_frame: f,
                })
            })
            .collect()
    }
}

/// One placed piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub piece: usize,
    pub row: usize,
    pub col: usize,
    /// Transform applied to the piece before drawing it.
    pub transform: BlockTransform,
}

/// A complete arrangement of `rows * cols` pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyResult {
    pub rows: usize,
    pub cols: usize,
    /// Indexed by piece id.
    pub placements: Vec<Placement>,
}

impl AssemblyResult {
    pub fn new(rows: usize, cols: usize, placements: Vec<Placement>) -> Result<Self> {
        let r = AssemblyResult { rows, cols, placements };
        r.validate()?;
        Ok(r)
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self
            .rows
            .checked_mul(self.cols)
            .ok_or_else(|| Error::Shape("grid too large".into()))?;
        if n != self.placements.len() || n == 0 {
            return Err(Error::Shape(format!(
                "{} placements for a {}x{} grid",
                self.placements.len(),
                self.rows,
                self.cols
            )));
        }
        let mut used = vec![false; n];
        for (k, p) in self.placements.iter().enumerate() {
            if p.piece != k {
                return Err(Error::Shape(format!("placement {k} names piece {}", p.piece)));
            }
            if p.row >= self.rows || p.col >= self.cols {
                return Err(Error::Shape(format!("piece {k} placed outside the grid")));
            }
            if std::mem::replace(&mut used[p.row * self.cols + p.col], true) {
                return Err(Error::Shape(format!("cell ({}, {}) used twice", p.row, p.col)));
            }
        }
        Ok(())
    }

    /// Piece id at each cell, row-major.
    pub fn cells(&self) -> Vec<usize> {
        let mut cells = vec![0; self.rows * self.cols];
        for p in &self.placements {
            cells[p.row * self.cols + p.col] = p.piece;
        }
        cells
    }

    /// Applies a global negative-positive flip to every piece.
    pub fn flip_polarity(&self) -> AssemblyResult {
        let flip = BlockTransform {
            negpos: true,
            ..BlockTransform::IDENTITY
        };
        AssemblyResult {
            rows: self.rows,
            cols: self.cols,
            placements: self
                .placements
                .iter()
                .map(|p| Placement {
                    transform: flip.compose(&p.transform),
                    ..*p
                })
                .collect(),
        }
    }

    /// Draws the arrangement.
    pub fn render(&self, pieces: &[Piece]) -> Result<RasterImage> {
        if pieces.len() != self.placements.len() {
            return Err(Error::Shape(format!(
                "{} pieces for {} placements",
                pieces.len(),
                self.placements.len()
            )));
        }
        let cells = self.cells();
        let blocks = cells
            .iter()
            .map(|&k| apply_transform(&pieces[k].samples, &self.placements[k].transform))
            .collect::<Result<Vec<_>>>()?;
        Ok(reassemble(&BlockGrid::from_blocks(self.rows, self.cols, blocks)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("assembly serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: AssemblyResult = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }
}

/// Sum of `ln(1 + cost)` over every pair of horizontally or vertically adjacent cells.
pub fn assembly_cost(contexts: &PieceContexts, result: &AssemblyResult) -> f64 {
    let cells = result.cells();
    let (rows, cols) = (result.rows, result.cols);
    let elem = |k: usize| result.placements[k].transform.element_id();
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let a = cells[r * cols + c];
            if c + 1 < cols {
                let b = cells[r * cols + c + 1];
                total += contexts.pair_cost_ids(a, elem(a), b, elem(b), Direction::Right).ln_1p();
            }
            if r + 1 < rows {
                let b = cells[(r + 1) * cols + c];
                total += contexts.pair_cost_ids(a, elem(a), b, elem(b), Direction::Down).ln_1p();
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    weight: f64,
    i: usize,
    j: usize,
    dir: Direction,
    t: BlockTransform,
}

/// Lowest and second lowest cost in each direction of each piece.
fn runner_up(table: &CompatibilityTable) -> Vec<[(f64, usize, f64); 4]> {
    let n = table.len();
    (0..n)
        .map(|i| {
            Direction::ALL.map(|d| {
                let (mut b1, mut k1, mut b2) = (f64::INFINITY, usize::MAX, f64::INFINITY);
                for k in (0..n).filter(|&k| k != i) {
                    let c = table.score(i, k, d).unwrap().cost;
                    if c < b1 {
                        b2 = b1;
                        b1 = c;
                        k1 = k;
                    } else if c < b2 {
                        b2 = c;
                    }
                }
                (b1, k1, b2)
            })
        })
        .collect()
}

fn candidates(table: &CompatibilityTable, confidence: bool) -> Vec<Candidate> {
    let n = table.len();
    let elements = ElementTable::get();
    let best = if confidence { runner_up(table) } else { Vec::new() };
    let competitor = |i: usize, d: Direction, j: usize| {
        let (b1, k1, b2) = best[i][d as usize];
        if k1 == j {
            b2
        } else {
            b1
        }
    };
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) * 4);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            for d in Direction::ALL {
                let s = table.score(i, j, d).unwrap();
                let weight = if confidence {
                    let inv = BlockTransform::from_element_id(elements.inverse(s.transform.element_id()));
                    let (dr, dc) = d.offset();
                    let back = Direction::from_offset(inv.geometry().apply_offset(-dr, -dc)).unwrap();
                    let rival = competitor(i, d, j).min(competitor(j, back, i));
                    if rival.is_finite() {
                        s.cost / (rival + 1e-6)
                    } else {
                        s.cost
                    }
                } else {
                    s.cost
                };
                out.push(Candidate {
                    weight,
                    i,
                    j,
                    dir: d,
                    t: s.transform,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
            .then(a.dir.cmp(&b.dir))
            .then(a.t.index().cmp(&b.t.index()))
    });
    out
}

/// Rigid clusters: every piece has a cell and an orientation (element id)
/// relative to its cluster's frame.
struct Forest {
    cluster: Vec<usize>,
    members: Vec<Vec<usize>>,
    pos: Vec<(i64, i64)>,
    elem: Vec<usize>,
    cells: Vec<HashMap<(i64, i64), usize>>,
}

fn bbox(pos: impl Iterator<Item = (i64, i64)>) -> (i64, i64, i64, i64) {
    pos.fold((i64::MAX, i64::MAX, i64::MIN, i64::MIN), |(r0, c0, r1, c1), (r, c)| {
        (r0.min(r), c0.min(c), r1.max(r), c1.max(c))
    })
}

fn fits(b: (i64, i64, i64, i64), rows: usize, cols: usize, transpose: bool) -> bool {
    let (h, w) = ((b.2 - b.0 + 1) as usize, (b.3 - b.1 + 1) as usize);
    (h <= rows && w <= cols) || (transpose && h <= cols && w <= rows)
}

impl Forest {
    fn new(n: usize) -> Self {
        Forest {
            cluster: (0..n).collect(),
            members: (0..n).map(|k| vec![k]).collect(),
            pos: vec![(0, 0); n],
            elem: vec![0; n],
            cells: (0..n).map(|k| HashMap::from([((0, 0), k)])).collect(),
        }
    }

    /// Where `j`'s cluster would land if `j` were shown as `t` in direction
    /// `dir` of `i`: the rigid map (element, anchor) for every member.
    fn mapped(&self, i: usize, j: usize, dir: Direction, t: &BlockTransform) -> Vec<(usize, (i64, i64), usize)> {
        let table = ElementTable::get();
        let ai = BlockTransform::from_element_id(self.elem[i]);
        let (dr, dc) = dir.offset();
        let off = ai.geometry().apply_offset(dr, dc);
        let target = (self.pos[i].0 + off.0, self.pos[i].1 + off.1);
        let want = table.compose(self.elem[i], t.element_id());
        let g = table.compose(want, table.inverse(self.elem[j]));
        let gm = BlockTransform::from_element_id(g).geometry();
        self.members[self.cluster[j]]
            .iter()
            .map(|&k| {
                let rel = gm.apply_offset(self.pos[k].0 - self.pos[j].0, self.pos[k].1 - self.pos[j].1);
                (k, (target.0 + rel.0, target.1 + rel.1), table.compose(g, self.elem[k]))
            })
            .collect()
    }

    fn try_merge(&mut self, c: &Candidate, frame: Option<(usize, usize, bool)>) -> bool {
        let (ci, cj) = (self.cluster[c.i], self.cluster[c.j]);
        if ci == cj {
            return false;
        }
        // move the smaller cluster; ties move j's
        let (i, j, dir, t) = if self.members[cj].len() <= self.members[ci].len() {
            (c.i, c.j, c.dir, c.t)
        } else {
            let table = ElementTable::get();
            let inv = BlockTransform::from_element_id(table.inverse(c.t.element_id()));
            let (dr, dc) = c.dir.offset();
            let back = Direction::from_offset(inv.geometry().apply_offset(-dr, -dc)).unwrap();
            (c.j, c.i, back, inv)
        };
        let (fixed, moving) = (self.cluster[i], self.cluster[j]);
        let moved = self.mapped(i, j, dir, &t);
        if moved.iter().any(|(_, p, _)| self.cells[fixed].contains_key(p)) {
            return false;
        }
        if let Some((rows, cols, transpose)) = frame {
            let b = bbox(
                self.members[fixed]
                    .iter()
                    .map(|&k| self.pos[k])
                    .chain(moved.iter().map(|m| m.1)),
            );
            if !fits(b, rows, cols, transpose) {
                return false;
            }
        }
        for (k, p, e) in moved {
            self.pos[k] = p;
            self.elem[k] = e;
            self.cluster[k] = fixed;
            self.cells[fixed].insert(p, k);
        }
        let members = std::mem::take(&mut self.members[moving]);
        self.members[fixed].extend(members);
        self.cells[moving].clear();
        true
    }
}

fn window_count(occupied: &HashMap<(i64, i64), usize>, r0: i64, c0: i64, rows: usize, cols: usize) -> usize {
    occupied
        .keys()
        .filter(|(r, c)| *r >= r0 && *r < r0 + rows as i64 && *c >= c0 && *c < c0 + cols as i64)
        .count()
}

/// Best `rows x cols` window over the cluster cells: most members, then
/// smallest top-left corner.
fn best_window(occupied: &HashMap<(i64, i64), usize>, rows: usize, cols: usize) -> (usize, i64, i64) {
    let b = bbox(occupied.keys().copied());
    let mut best = (0, b.0, b.1);
    for r0 in (b.0 - rows as i64 + 1)..=b.0.max(b.2 - rows as i64 + 1) {
        for c0 in (b.1 - cols as i64 + 1)..=b.1.max(b.3 - cols as i64 + 1) {
            let count = window_count(occupied, r0, c0, rows, cols);
            if count > best.0 {
                best = (count, r0, c0);
            }
        }
    }
    best
}

/// Places every piece on a `rows x cols` grid.
pub fn assemble(
    contexts: &PieceContexts,
    table: &CompatibilityTable,
    rows: usize,
    cols: usize,
    options: &AssemblyOptions,
) -> Result<AssemblyResult> {
    let n = contexts.len();
    if rows.checked_mul(cols) != Some(n) || table.len() != n {
        return Err(Error::Shape(format!(
            "{n} pieces (table of {}) cannot fill a {rows}x{cols} grid",
            table.len()
        )));
    }
    let elements = ElementTable::get();
    let family = contexts.family().to_vec();
    let transpose = family.iter().any(|t| t.geometry().swaps_axes());

    let mut forest = Forest::new(n);
    if n > 1 {
        let frame = options.constrain_frame.then_some((rows, cols, transpose));
        let mut merges = 0;
        for c in candidates(table, options.confidence) {
            if forest.try_merge(&c, frame) {
                merges += 1;
                if merges == n - 1 {
                    break;
                }
            }
        }
    }

    // largest cluster, lowest member id on ties
    let root = (0..n)
        .filter(|&c| !forest.members[c].is_empty())
        .max_by(|&a, &b| {
            let (ma, mb) = (&forest.members[a], &forest.members[b]);
            ma.len()
                .cmp(&mb.len())
                .then(mb.iter().min().cmp(&ma.iter().min()))
        })
        .expect("at least one cluster");
    let mut occupied: HashMap<(i64, i64), usize> = HashMap::new();
    let mut orient: HashMap<usize, usize> = HashMap::new();
    for &k in &forest.members[root] {
        occupied.insert(forest.pos[k], k);
        orient.insert(k, forest.elem[k]);
    }

    // orient the cluster to the frame, turning it a quarter when that keeps more pieces
    let upright = best_window(&occupied, rows, cols);
    if transpose {
        let quarter = BlockTransform::rotation(Rotation::R90);
        let q = quarter.geometry();
        let turned: HashMap<(i64, i64), usize> = occupied.iter().map(|(&(r, c), &k)| (q.apply_offset(r, c), k)).collect();
        let sideways = best_window(&turned, rows, cols);
        if sideways.0 > upright.0 {
            occupied = turned;
            for e in orient.values_mut() {
                *e = elements.compose(quarter.element_id(), *e);
            }
        }
    }
    let (_, r0, c0) = best_window(&occupied, rows, cols);

    let mut grid: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut placed = vec![false; n];
    for (&(r, c), &k) in &occupied {
        let (r, c) = (r - r0, c - c0);
        if r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols {
            grid[r as usize * cols + c as usize] = Some((k, orient[&k]));
            placed[k] = true;
        }
    }

    fill(contexts, &mut grid, &mut placed, rows, cols);

    let mut placements = vec![
        Placement {
            piece: 0,
            row: 0,
            col: 0,
            transform: BlockTransform::IDENTITY,
        };
        n
    ];
    for (cell, slot) in grid.iter().enumerate() {
        let (k, e) = slot.expect("grid filled");
        placements[k] = Placement {
            piece: k,
            row: cell / cols,
            col: cell % cols,
            transform: BlockTransform::from_element_id(e),
        };
    }
    AssemblyResult::new(rows, cols, placements)
}

/// Sweeps of local search run on each variant.
pub const REFINE_PASSES: usize = 8;

/// Rounds of segment regrouping tried after the first refinement.
pub const REGROUP_ROUNDS: usize = 3;

/// Runs [`assemble`] once per option set, keeps the arrangement with the
/// lowest [`assembly_cost`] (the earliest on ties), then improves it with
/// [`refine`] and [`regroup`] for as long as the cost drops.
pub fn assemble_best(
    contexts: &PieceContexts,
    table: &CompatibilityTable,
    rows: usize,
    cols: usize,
    variants: &[AssemblyOptions],
) -> Result<AssemblyResult> {
    let mut best: Option<(f64, AssemblyResult)> = None;
    for options in variants {
        let result = assemble(contexts, table, rows, cols, options)?;
        let cost = assembly_cost(contexts, &result);
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, result));
        }
    }
    let (mut cost, mut result) = best.ok_or_else(|| Error::Config("no assembly variants given".into()))?;
    result = refine(contexts, table, &result, REFINE_PASSES);
    cost = cost.min(assembly_cost(contexts, &result));
    for _ in 0..REGROUP_ROUNDS {
        let next = refine(contexts, table, &regroup(contexts, table, &result), REFINE_PASSES);
        let next_cost = assembly_cost(contexts, &next);
        if next_cost >= cost {
            break;
        }
        (cost, result) = (next_cost, next);
    }
    Ok(result)
}

pub(super) fn fill(contexts: &PieceContexts, grid: &mut [Option<(usize, usize)>], placed: &mut [bool], rows: usize, cols: usize) {
    let family = contexts.family_ids().to_vec();
    let neighbors = |cell: usize| {
        let (r, c) = ((cell / cols) as i64, (cell % cols) as i64);
        Direction::ALL.into_iter().filter_map(move |d| {
            let (dr, dc) = d.offset();
            let (nr, nc) = (r + dr, c + dc);
            (nr >= 0 && nc >= 0 && (nr as usize) < rows && (nc as usize) < cols).then(|| (d, nr as usize * cols + nc as usize))
        })
    };
    loop {
        let target = (0..grid.len())
            .filter(|&cell| grid[cell].is_none())
            .max_by(|&a, &b| {
                let count = |cell: usize| neighbors(cell).filter(|&(_, m)| grid[m].is_some()).count();
                count(a).cmp(&count(b)).then(b.cmp(&a))
            });
        let Some(cell) = target else { break };
        let around: Vec<(Direction, usize, usize)> = neighbors(cell)
            .filter_map(|(d, m)| grid[m].map(|(q, e)| (d, q, e)))
            .collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for p in (0..placed.len()).filter(|&p| !placed[p]) {
            for &a in &family {
                let cost: f64 = around.iter().map(|&(d, q, e)| contexts.pair_cost_ids(p, a, q, e, d)).sum();
                let better = match best {
                    None => true,
                    Some((bc, bp, ba)) => {
                        cost < bc
                            || (cost == bc
                                && (p, BlockTransform::from_element_id(a).index())
                                    < (bp, BlockTransform::from_element_id(ba).index()))
                    }
                };
                if better {
                    best = Some((cost, p, a));
                }
            }
        }
        let (_, p, a) = best.expect("a piece remains for every empty cell");
        grid[cell] = Some((p, a));
        placed[p] = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::PuzzleType;
    use crate::raster::partition;
    use crate::solver::table::build_table;

    fn scene(w: usize, h: usize) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f64, y as f64);
            [
                (128.0 + 90.0 * (fx / 23.0).sin() * (fy / 31.0).cos()) as u8,
                (60.0 + 0.6 * fx + 0.3 * fy) as u8,
                (200.0 - 0.5 * fy + 25.0 * ((fx + 2.0 * fy) / 17.0).sin()) as u8,
            ]
        })
    }

    #[test]
    fn unscrambled_puzzle_reassembles() {
        let img = scene(64, 48);
        let grid = partition(&img, 16, 16).unwrap();
        let pieces = Piece::from_blocks(grid.blocks());
        let (ctx, table) = build_table(&pieces, &PuzzleType::Type1.transform_family()).unwrap();
        let out = assemble(&ctx, &table, 3, 4, &AssemblyOptions::default()).unwrap();
        assert_eq!(out.render(&pieces).unwrap(), img);
    }

    #[test]
    fn best_variant_is_no_worse_than_each() {
        let img = scene(48, 48);
        let pieces = Piece::from_blocks(partition(&img, 16, 16).unwrap().blocks());
        let (ctx, table) = build_table(&pieces, &PuzzleType::Type2.transform_family()).unwrap();
        let variants = AssemblyOptions::variants(true);
        assert_eq!(variants.len(), 4);
        let best = assembly_cost(&ctx, &assemble_best(&ctx, &table, 3, 3, &variants).unwrap());
        for v in &variants {
            assert!(best <= assembly_cost(&ctx, &assemble(&ctx, &table, 3, 3, v).unwrap()));
        }
        assert!(assemble_best(&ctx, &table, 3, 3, &[]).is_err());
    }

    #[test]
    fn single_piece() {
        let img = scene(16, 16);
        let pieces = Piece::from_blocks(partition(&img, 16, 16).unwrap().blocks());
        let ctx = PieceContexts::new(&pieces, &[BlockTransform::IDENTITY]).unwrap();
        let table = super::super::table::build_table_with(&ctx);
        let out = assemble(&ctx, &table, 1, 1, &AssemblyOptions::default()).unwrap();
        assert_eq!(out.placements[0].row, 0);
    }

    #[test]
    fn wrong_grid_is_rejected() {
        let pieces = Piece::from_blocks(partition(&scene(32, 16), 16, 16).unwrap().blocks());
        let (ctx, table) = build_table(&pieces, &[BlockTransform::IDENTITY]).unwrap();
        assert!(assemble(&ctx, &table, 2, 2, &AssemblyOptions::default()).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let pieces = Piece::from_blocks(partition(&scene(32, 32), 16, 16).unwrap().blocks());
        let (ctx, table) = build_table(&pieces, &PuzzleType::TypeIN.transform_family()).unwrap();
        let out = assemble(&ctx, &table, 2, 2, &AssemblyOptions::default()).unwrap();
        assert_eq!(AssemblyResult::from_json(&out.to_json()).unwrap(), out);
        let mut broken = out.clone();
        broken.placements[1].row = broken.placements[0].row;
        broken.placements[1].col = broken.placements[0].col;
        assert!(AssemblyResult::from_json(&broken.to_json()).is_err());
    }

    #[test]
    fn polarity_flip_is_an_involution() {
        let pieces = Piece::from_blocks(partition(&scene(32, 32), 16, 16).unwrap().blocks());
        let (ctx, table) = build_table(&pieces, &PuzzleType::TypeN.transform_family()).unwrap();
        let out = assemble(&ctx, &table, 2, 2, &AssemblyOptions::default()).unwrap();
        assert_eq!(out.flip_polarity().flip_polarity(), out);
        assert_ne!(out.flip_polarity(), out);
    }
}
