//! Pairwise compatibility minimized over a puzzle type's transform family.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::transform::{apply_transform, BlockTransform, ElementTable, Rotation, ELEMENT_COUNT};

use super::mgc::{mgc_cost, EdgeContext, EdgeSide};

/// A puzzle piece: one block of the image under attack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub id: usize,
    pub samples: RasterImage,
}

impl Piece {
    pub fn from_blocks(blocks: &[RasterImage]) -> Vec<Piece> {
        blocks
            .iter()
            .enumerate()
            .map(|(id, b)| Piece {
                id,
                samples: b.clone(),
            })
            .collect()
    }
}

/// Where the second piece of a pair sits relative to the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Right,
    Down,
    Left,
    Up,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Right, Direction::Down, Direction::Left, Direction::Up];

    /// `(drow, dcol)`.
    pub fn offset(self) -> (i64, i64) {
        match self {
            Direction::Right => (0, 1),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Up => (-1, 0),
        }
    }

    pub fn from_offset(off: (i64, i64)) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.offset() == off)
    }

    pub fn opposite(self) -> Direction {
        let (r, c) = self.offset();
        Direction::from_offset((-r, -c)).unwrap()
    }

    /// The rotation that turns this direction into [`Direction::Right`].
    pub fn to_right(self) -> Rotation {
        match self {
            Direction::Right => Rotation::R0,
            Direction::Down => Rotation::R270,
            Direction::Left => Rotation::R180,
            Direction::Up => Rotation::R90,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Right => "right",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Up => "up",
        }
    }
}

/// Distinct elements of a transform family, each as its lowest-index label.
pub fn distinct_family(family: &[BlockTransform]) -> Vec<BlockTransform> {
    let mut seen = [false; ELEMENT_COUNT];
    let mut labels: Vec<BlockTransform> = family.to_vec();
    labels.sort_by_key(|t| t.index());
    labels
        .into_iter()
        .filter(|t| !std::mem::replace(&mut seen[t.element_id()], true))
        .collect()
}

/// Edge contexts of every piece under every orientation the solver may need:
/// the family composed with the four quarter turns used to bring any seam
/// into left-right position.
#[derive(Debug, Clone)]
pub struct PieceContexts {
    n: usize,
    block: usize,
    family: Vec<BlockTransform>,
    family_ids: Vec<usize>,
    /// `[piece * ELEMENT_COUNT + element]` → (left edge, right edge).
    slots: Vec<Option<(EdgeContext, EdgeContext)>>,
    to_right: [usize; 4],
}

impl PieceContexts {
    pub fn new(pieces: &[Piece], family: &[BlockTransform]) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::Config("no pieces to solve".into()))?;
        let block = first.samples.width();
        for p in pieces {
            let s = &p.samples;
            if s.width() != block || s.height() != block {
                return Err(Error::Shape(format!(
                    "piece {} is {}x{}, expected square {block}x{block}",
                    p.id,
                    s.width(),
                    s.height()
                )));
            }
            if s.channels() != 3 {
                return Err(Error::Channels(s.channels()));
            }
        }
        if !(2..=4096).contains(&block) {
            return Err(Error::Shape(format!("unsupported piece size {block}")));
        }
        if family.is_empty() {
            return Err(Error::Config("empty transform family".into()));
        }
        let family = distinct_family(family);
        let family_ids: Vec<usize> = family.iter().map(|t| t.element_id()).collect();
        let table = ElementTable::get();
        let to_right = Direction::ALL.map(|d| BlockTransform::rotation(d.to_right()).element_id());

        let mut needed = [false; ELEMENT_COUNT];
        for &r in &to_right {
            for &t in &family_ids {
                needed[table.compose(r, t)] = true;
            }
        }
        let needed: Vec<usize> = (0..ELEMENT_COUNT).filter(|&e| needed[e]).collect();

        let per_piece: Vec<Vec<(usize, (EdgeContext, EdgeContext))>> = pieces
            .par_iter()
            .map(|p| {
                needed
                    .iter()
                    .map(|&e| {
                        let t = BlockTransform::from_element_id(e);
                        let b = apply_transform(&p.samples, &t).expect("square 3-channel piece");
                        (
                            e,
                            (
                                EdgeContext::from_block(&b, EdgeSide::Left),
                                EdgeContext::from_block(&b, EdgeSide::Right),
                            ),
                        )
                    })
                    .collect()
            })
            .collect();
        let mut slots = vec![None; pieces.len() * ELEMENT_COUNT];
        for (k, list) in per_piece.into_iter().enumerate() {
            for (e, ctx) in list {
                slots[k * ELEMENT_COUNT + e] = Some(ctx);
            }
        }
        Ok(PieceContexts {
            n: pieces.len(),
            block,
            family,
            family_ids,
            slots,
            to_right,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// The searched transforms, one label per distinct action, in label order.
    pub fn family(&self) -> &[BlockTransform] {
        &self.family
    }

    pub(crate) fn family_ids(&self) -> &[usize] {
        &self.family_ids
    }

    #[inline]
    fn left(&self, piece: usize, element: usize) -> &EdgeContext {
        &self.slots[piece * ELEMENT_COUNT + element]
            .as_ref()
            .expect("orientation outside the family")
            .0
    }

    #[inline]
    fn right(&self, piece: usize, element: usize) -> &EdgeContext {
        &self.slots[piece * ELEMENT_COUNT + element]
            .as_ref()
            .expect("orientation outside the family")
            .1
    }

    /// Cost of the seam between piece `p` shown as `a_p` and piece `q` shown
    /// as `a_q` sitting in direction `dir` of `p` (element ids).
    #[inline]
    pub(crate) fn pair_cost_ids(&self, p: usize, a_p: usize, q: usize, a_q: usize, dir: Direction) -> f64 {
        let table = ElementTable::get();
        let r = self.to_right[dir as usize];
        mgc_cost(self.right(p, table.compose(r, a_p)), self.left(q, table.compose(r, a_q)))
    }

    pub fn pair_cost(&self, p: usize, a_p: &BlockTransform, q: usize, a_q: &BlockTransform, dir: Direction) -> f64 {
        self.pair_cost_ids(p, a_p.element_id(), q, a_q.element_id(), dir)
    }

    /// Minimum over the family of the cost of `t(x_j)` placed in direction
    /// `dir` of an untransformed `x_i`. Ties go to the lowest label.
    pub fn min_compatibility(&self, i: usize, j: usize, dir: Direction) -> PairwiseScore {
        let mut best = PairwiseScore {
            cost: f64::INFINITY,
            transform: self.family[0],
            direction: dir,
        };
        for (t, &id) in self.family.iter().zip(&self.family_ids) {
            let c = self.pair_cost_ids(i, 0, j, id, dir);
            if c < best.cost {
                best.cost = c;
                best.transform = *t;
            }
        }
        best
    }
}

/// Best placement of piece `j` next to an untransformed piece `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseScore {
    pub cost: f64,
    /// Transform applied to `j` achieving the minimum.
    pub transform: BlockTransform,
    /// Where `j` sits relative to `i`.
    pub direction: Direction,
}

impl PairwiseScore {
    fn unset(direction: Direction) -> Self {
        PairwiseScore {
            cost: f64::INFINITY,
            transform: BlockTransform::IDENTITY,
            direction,
        }
    }

    #[inline]
    fn offer(&mut self, cost: f64, transform: BlockTransform) {
        if cost < self.cost || (cost == self.cost && transform.index() < self.transform.index()) {
            self.cost = cost;
            self.transform = transform;
        }
    }
}

/// Minimum compatibilities for every ordered pair of pieces and each of the
/// four directions. The right-hand entry of `(i, j)` is the left-right
/// compatibility `min_t C(x_i, t(x_j))`.
#[derive(Debug, Clone)]
pub struct CompatibilityTable {
    n: usize,
    scores: Vec<PairwiseScore>,
}

impl CompatibilityTable {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of ordered pairs with entries.
    pub fn entry_count(&self) -> usize {
        self.n * self.n.saturating_sub(1)
    }

    /// `None` on the diagonal.
    pub fn score(&self, i: usize, j: usize, dir: Direction) -> Option<&PairwiseScore> {
        if i == j {
            return None;
        }
        self.scores.get((i * self.n + j) * 4 + dir as usize)
    }

    /// The left-right entry.
    pub fn lr(&self, i: usize, j: usize) -> Option<&PairwiseScore> {
        self.score(i, j, Direction::Right)
    }

    /// Writes `i,j,direction,cost,transform` rows.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "i,j,direction,cost,transform")?;
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                for d in Direction::ALL {
                    let s = self.score(i, j, d).unwrap();
                    writeln!(out, "{i},{j},{},{:.6},{}", d.name(), s.cost, s.transform.index())?;
                }
            }
        }
        Ok(())
    }
}

/// Fills the table. Each unordered pair is evaluated once over all
/// directions and transforms; the same seam seen from `j` updates `(j, i)`.
pub fn build_table_with(contexts: &PieceContexts) -> CompatibilityTable {
    let n = contexts.len();
    let elements = ElementTable::get();
    let family: Vec<(BlockTransform, usize, BlockTransform)> = contexts
        .family()
        .iter()
        .map(|t| (*t, t.element_id(), BlockTransform::from_element_id(elements.inverse(t.element_id()))))
        .collect();

    let rows: Vec<Vec<(usize, [PairwiseScore; 4], [PairwiseScore; 4])>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let mut forward = Direction::ALL.map(PairwiseScore::unset);
                    let mut backward = Direction::ALL.map(PairwiseScore::unset);
                    for d in Direction::ALL {
                        let (dr, dc) = d.offset();
                        for &(t, id, inv) in &family {
                            let cost = contexts.pair_cost_ids(i, 0, j, id, d);
                            forward[d as usize].offer(cost, t);
                            // seen from j: i is shown as t⁻¹ at offset t⁻¹·(−d)
                            let back = Direction::from_offset(inv.geometry().apply_offset(-dr, -dc)).unwrap();
                            backward[back as usize].offer(cost, inv);
                        }
                    }
                    (j, forward, backward)
                })
                .collect()
        })
        .collect();

    let mut scores = vec![PairwiseScore::unset(Direction::Right); n * n * 4];
    for (i, row) in rows.into_iter().enumerate() {
        for (j, forward, backward) in row {
            scores[(i * n + j) * 4..(i * n + j) * 4 + 4].copy_from_slice(&forward);
            scores[(j * n + i) * 4..(j * n + i) * 4 + 4].copy_from_slice(&backward);
        }
    }
    CompatibilityTable { n, scores }
}

/// Builds contexts for `pieces` under `family` and fills the table.
pub fn build_table(pieces: &[Piece], family: &[BlockTransform]) -> Result<(PieceContexts, CompatibilityTable)> {
    if pieces.len() < 2 {
        return Err(Error::Config("a compatibility table needs at least two pieces".into()));
    }
    let contexts = PieceContexts::new(pieces, family)?;
    let table = build_table_with(&contexts);
    Ok((contexts, table))
}

/// Left-right minimum compatibility of two pieces over `family`.
pub fn min_compatibility(i: &Piece, j: &Piece, family: &[BlockTransform]) -> Result<PairwiseScore> {
    let pair = [
        Piece {
            id: 0,
            samples: i.samples.clone(),
        },
        Piece {
            id: 1,
            samples: j.samples.clone(),
        },
    ];
    let ctx = PieceContexts::new(&pair, family)?;
    Ok(ctx.min_compatibility(0, 1, Direction::Right))
}
