//! Local search on a finished assembly: swap two pieces or turn one in place
//! whenever that lowers the summed seam cost.

use super::assemble::{AssemblyResult, Placement};
use super::table::{CompatibilityTable, Direction, PieceContexts};
use crate::transform::BlockTransform;

/// Seam evaluations allowed per sweep. Cells are tried costliest first until
/// it runs out.
const SWEEP_BUDGET: usize = 4_000_000;

struct State<'a> {
    contexts: &'a PieceContexts,
    rows: usize,
    cols: usize,
    /// `(piece, element)` per cell.
    cells: Vec<(usize, usize)>,
    /// `ln(1 + c)` of the cheapest seam between two pieces in any direction
    /// and orientation, row-major by piece.
    floor: Vec<f64>,
    spent: std::cell::Cell<usize>,
}

impl State<'_> {
    fn neighbors(&self, cell: usize) -> impl Iterator<Item = (Direction, usize)> + '_ {
        let (r, c) = ((cell / self.cols) as i64, (cell % self.cols) as i64);
        Direction::ALL.into_iter().filter_map(move |d| {
            let (dr, dc) = d.offset();
            let (nr, nc) = (r + dr, c + dc);
            (nr >= 0 && nc >= 0 && (nr as usize) < self.rows && (nc as usize) < self.cols)
                .then(|| (d, nr as usize * self.cols + nc as usize))
        })
    }

    /// Seams of `cell` if it held `piece` as `element`, leaving out `skip`.
    fn local(&self, cell: usize, piece: usize, element: usize, skip: Option<usize>) -> f64 {
        self.spent.set(self.spent.get() + 4);
        self.neighbors(cell)
            .filter(|&(_, m)| Some(m) != skip)
            .map(|(d, m)| {
                let (q, e) = self.cells[m];
                self.contexts.pair_cost_ids(piece, element, q, e, d).ln_1p()
            })
            .sum()
    }

    fn floor_local(&self, cell: usize, skip: Option<usize>) -> f64 {
        let p = self.cells[cell].0;
        let n = self.cells.len();
        self.neighbors(cell)
            .filter(|&(_, m)| Some(m) != skip)
            .map(|(_, m)| self.floor[p * n + self.cells[m].0])
            .sum()
    }

    fn seams(&self, x: usize, y: usize) -> f64 {
        let (p, a) = self.cells[x];
        let (q, b) = self.cells[y];
        self.local(x, p, a, None) + self.local(y, q, b, Some(x))
    }

    fn best_element(&self, cell: usize, piece: usize) -> usize {
        let mut best = (f64::INFINITY, usize::MAX, 0);
        for (t, &e) in self.contexts.family().iter().zip(self.contexts.family_ids()) {
            let c = self.local(cell, piece, e, None);
            if c < best.0 || (c == best.0 && t.index() < best.1) {
                best = (c, t.index(), e);
            }
        }
        best.2
    }

    fn try_swap(&mut self, x: usize, y: usize) -> bool {
        let before = self.seams(x, y);
        let saved = (self.cells[x], self.cells[y]);
        let (p, q) = (saved.0 .0, saved.1 .0);
        self.cells.swap(x, y);
        if self.floor_local(x, None) + self.floor_local(y, Some(x)) >= before * (1.0 - 1e-9) {
            self.cells.swap(x, y);
            return false;
        }
        if self.contexts.family().len() > 1 {
            self.cells[y].1 = self.best_element(y, p);
            self.cells[x].1 = self.best_element(x, q);
        }
        let after = self.seams(x, y);
        if after < before * (1.0 - 1e-9) {
            true
        } else {
            self.cells[x] = saved.0;
            self.cells[y] = saved.1;
            false
        }
    }

    fn try_turn(&mut self, x: usize) -> bool {
        let (p, a) = self.cells[x];
        let e = self.best_element(x, p);
        if e != a && self.local(x, p, e, None) < self.local(x, p, a, None) * (1.0 - 1e-9) {
            self.cells[x].1 = e;
            true
        } else {
            false
        }
    }
}

/// Improves `result` by greedy swaps and re-orientations, at most `passes`
/// sweeps. Each sweep tries the costliest cells against every other cell.
/// Seams are weighed by `ln(1 + cost)` so a few hopeless seams do not
/// dominate the objective.
pub fn refine(contexts: &PieceContexts, table: &CompatibilityTable, result: &AssemblyResult, passes: usize) -> AssemblyResult {
    let (rows, cols) = (result.rows, result.cols);
    let n = rows * cols;
    let mut cells = vec![(0, 0); n];
    for p in &result.placements {
        cells[p.row * cols + p.col] = (p.piece, p.transform.element_id());
    }
    let mut floor = vec![0.0; n * n];
    for p in 0..n {
        for q in (0..n).filter(|&q| q != p) {
            let c = Direction::ALL
                .iter()
                .map(|&d| table.score(p, q, d).map_or(0.0, |s| s.cost))
                .fold(f64::INFINITY, f64::min);
            floor[p * n + q] = c.ln_1p();
        }
    }
    let mut state = State {
        contexts,
        rows,
        cols,
        cells,
        floor,
        spent: std::cell::Cell::new(0),
    };
    for _ in 0..passes {
        let mut by_cost: Vec<(f64, usize)> = (0..n)
            .map(|x| {
                let (p, a) = state.cells[x];
                (state.local(x, p, a, None), x)
            })
            .collect();
        by_cost.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        state.spent.set(0);
        let mut changed = false;
        for &(_, x) in &by_cost {
            if state.spent.get() >= SWEEP_BUDGET {
                break;
            }
            changed |= state.try_turn(x);
            for y in (0..n).filter(|&y| y != x) {
                changed |= state.try_swap(x, y);
            }
        }
        if !changed {
            break;
        }
    }
    let mut placements = result.placements.clone();
    for (cell, &(p, e)) in state.cells.iter().enumerate() {
        placements[p] = Placement {
            piece: p,
            row: cell / cols,
            col: cell % cols,
            transform: BlockTransform::from_element_id(e),
        };
    }
    AssemblyResult {
        rows,
        cols,
        placements,
    }
}
