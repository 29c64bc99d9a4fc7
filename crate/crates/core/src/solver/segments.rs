//! Segment regrouping: split an assembly into runs of mutually best seams,
//! keep the largest run in place and re-place the others as rigid units.

use super::assemble::{fill, AssemblyResult, Placement};
use super::table::{CompatibilityTable, Direction, PieceContexts};
use crate::transform::{BlockTransform, ElementTable};

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Best partner of every piece in each direction of its own frame.
fn best_partners(table: &CompatibilityTable) -> Vec<[(usize, usize); 4]> {
    let n = table.len();
    (0..n)
        .map(|p| {
            Direction::ALL.map(|d| {
                let mut best = (f64::INFINITY, usize::MAX, 0);
                for q in (0..n).filter(|&q| q != p) {
                    let s = table.score(p, q, d).unwrap();
                    if s.cost < best.0 {
                        best = (s.cost, q, s.transform.element_id());
                    }
                }
                (best.1, best.2)
            })
        })
        .collect()
}

fn local_direction(element: usize, dir: Direction) -> Direction {
    let g = BlockTransform::from_element_id(ElementTable::get().inverse(element)).geometry();
    let (dr, dc) = dir.offset();
    Direction::from_offset(g.apply_offset(dr, dc)).unwrap()
}

/// Whether the seam between `p` shown as `a` and `q` shown as `b`, with `q`
/// in direction `dir` of `p`, is each piece's first choice.
fn best_buddies(partners: &[[(usize, usize); 4]], p: usize, a: usize, q: usize, b: usize, dir: Direction) -> bool {
    let t = ElementTable::get();
    let forward = partners[p][local_direction(a, dir) as usize];
    let backward = partners[q][local_direction(b, dir.opposite()) as usize];
    forward == (q, t.compose(t.inverse(a), b)) && backward == (p, t.compose(t.inverse(b), a))
}

struct Segment {
    /// `(row, col, piece, element)`.
    cells: Vec<(i64, i64, usize, usize)>,
}

fn segments(table: &CompatibilityTable, result: &AssemblyResult) -> Vec<Segment> {
    let partners = best_partners(table);
    let (rows, cols) = (result.rows, result.cols);
    let cells = result.cells();
    let elem = |k: usize| result.placements[k].transform.element_id();
    let n = rows * cols;
    let mut parent: Vec<usize> = (0..n).collect();
    for r in 0..rows {
        for c in 0..cols {
            let x = r * cols + c;
            let links = [
                (c + 1 < cols).then_some((x + 1, Direction::Right)),
                (r + 1 < rows).then_some((x + cols, Direction::Down)),
            ];
            for (y, d) in links.into_iter().flatten() {
                let (p, q) = (cells[x], cells[y]);
                if best_buddies(&partners, p, elem(p), q, elem(q), d) {
                    let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                    parent[rx.max(ry)] = rx.min(ry);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for x in 0..n {
        groups[find(&mut parent, x)].push(x);
    }
    let mut out: Vec<Segment> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|g| Segment {
            cells: g
                .into_iter()
                .map(|x| {
                    let p = cells[x];
                    ((x / cols) as i64, (x % cols) as i64, p, elem(p))
                })
                .collect(),
        })
        .collect();
    // largest first, then by first cell
    out.sort_by(|a, b| b.cells.len().cmp(&a.cells.len()).then(a.cells[0].cmp(&b.cells[0])));
    out
}

/// Rebuilds the assembly around its largest segment. Other segments of at
/// least two pieces are placed, largest first, where their contact seams
/// are cheapest on average; what cannot be placed is filled piece by piece.
pub fn regroup(contexts: &PieceContexts, table: &CompatibilityTable, result: &AssemblyResult) -> AssemblyResult {
    let (rows, cols) = (result.rows, result.cols);
    let n = rows * cols;
    let segs = segments(table, result);
    if segs.len() < 2 {
        return result.clone();
    }
    let elements = ElementTable::get();
    let mut grid: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut placed = vec![false; n];
    for &(r, c, p, e) in &segs[0].cells {
        grid[r as usize * cols + c as usize] = Some((p, e));
        placed[p] = true;
    }

    let family: Vec<(BlockTransform, usize)> = contexts
        .family()
        .iter()
        .map(|t| (*t, t.element_id()))
        .collect();
    for seg in segs[1..].iter().filter(|s| s.cells.len() >= 2) {
        let (r0, c0, _, _) = seg.cells[0];
        let mut best: Option<(f64, usize, i64, i64, usize)> = None;
        for &(t, g) in &family {
            let m = t.geometry();
            let shape: Vec<(i64, i64, usize, usize)> = seg
                .cells
                .iter()
                .map(|&(r, c, p, e)| {
                    let (dr, dc) = m.apply_offset(r - r0, c - c0);
                    (dr, dc, p, elements.compose(g, e))
                })
                .collect();
            for ar in 0..rows as i64 {
                for ac in 0..cols as i64 {
                    let mut total = 0.0;
                    let mut contacts = 0usize;
                    let mut ok = true;
                    for &(dr, dc, p, e) in &shape {
                        let (r, c) = (ar + dr, ac + dc);
                        if r < 0 || c < 0 || r >= rows as i64 || c >= cols as i64 || grid[r as usize * cols + c as usize].is_some() {
                            ok = false;
                            break;
                        }
                        for d in Direction::ALL {
                            let (or, oc) = d.offset();
                            let (nr, nc) = (r + or, c + oc);
                            if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                                continue;
                            }
                            if let Some((q, f)) = grid[nr as usize * cols + nc as usize] {
                                total += contexts.pair_cost_ids(p, e, q, f, d).ln_1p();
                                contacts += 1;
                            }
                        }
                    }
                    if !ok || contacts == 0 {
                        continue;
                    }
                    let mean = total / contacts as f64;
                    let better = best.as_ref().map_or(true, |b| mean < b.0);
                    if better {
                        best = Some((mean, contacts, ar, ac, g));
                    }
                }
            }
        }
        if let Some((_, _, ar, ac, g)) = best {
            let m = BlockTransform::from_element_id(g).geometry();
            for &(r, c, p, e) in &seg.cells {
                let (dr, dc) = m.apply_offset(r - r0, c - c0);
                grid[(ar + dr) as usize * cols + (ac + dc) as usize] = Some((p, elements.compose(g, e)));
                placed[p] = true;
            }
        }
    }

    fill(contexts, &mut grid, &mut placed, rows, cols);
    let mut placements = result.placements.clone();
    for (cell, slot) in grid.iter().enumerate() {
        let (p, e) = slot.expect("grid filled");
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
