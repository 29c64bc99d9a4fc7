//! The extended jigsaw puzzle solver: MGC compatibility minimized over the
//! transform family of a puzzle type, then greedy tree-based assembly.

pub mod assemble;
pub mod mgc;
pub mod refine;
pub mod segments;
pub mod table;

pub use assemble::{assemble, assemble_best, assembly_cost, AssemblyOptions, AssemblyResult, Placement};
pub use mgc::{mgc_cost, EdgeContext, EdgeSide};
pub use refine::refine;
pub use segments::regroup;
pub use table::{build_table, build_table_with, min_compatibility, CompatibilityTable, Direction, PairwiseScore, Piece, PieceContexts};

use crate::cipher::PuzzleType;
use crate::error::{Error, Result};
use crate::raster::{partition, RasterImage};

/// Settings of one attack on a received image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackConfig {
    pub puzzle_type: PuzzleType,
    pub block: usize,
    /// Grid to assemble; defaults to the grid the image partitions into.
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    /// Allow confidence-weighted merge orders.
    pub confidence: bool,
}

impl AttackConfig {
    pub fn new(puzzle_type: PuzzleType, block: usize) -> Self {
        AttackConfig {
            puzzle_type,
            block,
            rows: None,
            cols: None,
            confidence: true,
        }
    }
}

/// Everything an attack produced.
#[derive(Debug, Clone)]
pub struct Attack {
    pub pieces: Vec<Piece>,
    pub contexts: PieceContexts,
    pub table: CompatibilityTable,
    pub assembly: AssemblyResult,
}

impl Attack {
    pub fn render(&self) -> Result<RasterImage> {
        self.assembly.render(&self.pieces)
    }
}

/// Cuts `received` into pieces and solves the puzzle.
pub fn attack(received: &RasterImage, config: &AttackConfig) -> Result<Attack> {
    let grid = partition(received, config.block, config.block)?;
    let rows = config.rows.unwrap_or(grid.rows());
    let cols = config.cols.unwrap_or(grid.cols());
    if rows.checked_mul(cols) != Some(grid.len()) {
        return Err(Error::Shape(format!(
            "{} pieces cannot fill a {rows}x{cols} grid",
            grid.len()
        )));
    }
    let pieces = Piece::from_blocks(grid.blocks());
    let contexts = PieceContexts::new(&pieces, &config.puzzle_type.transform_family())?;
    let table = build_table_with(&contexts);
    let assembly = assemble_best(&contexts, &table, rows, cols, &AssemblyOptions::variants(config.confidence))?;
    Ok(Attack {
        pieces,
        contexts,
        table,
        assembly,
    })
}
