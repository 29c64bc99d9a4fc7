//! Per-block transforms: rotation, inversion, negative-positive and color
//! component shuffling.
//!
//! A [`BlockTransform`] acts on a block as `rotate ∘ invert ∘ negpos ∘ shuffle`,
//! i.e. the color shuffle is applied first and the rotation last. There are
//! 4·3·2·6 = 144 labels but only 8·2·6 = 96 distinct actions, because a
//! rotation combined with an inversion can coincide with another such pair
//! (rotating by 180° and flipping horizontally is a vertical flip).
//!
//! Geometry is expressed as a signed permutation matrix acting on `(x, y)`
//! coordinates with `y` pointing down; the same matrix maps block offsets when
//! a whole grid of blocks is transformed, which is what the solver and the
//! metrics rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterImage, BIT_DEPTH};

/// Clockwise rotation as seen on screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rotation {
    #[serde(rename = "0")]
    R0,
    #[serde(rename = "90")]
    R90,
    #[serde(rename = "180")]
    R180,
    #[serde(rename = "270")]
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn quarter_turns(self) -> usize {
        self as usize
    }

    pub fn from_quarter_turns(q: usize) -> Rotation {
        Rotation::ALL[q % 4]
    }

    pub fn degrees(self) -> u32 {
        90 * self as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Inversion {
    #[serde(rename = "none")]
    None,
    /// Mirror left-right.
    #[serde(rename = "H")]
    Horizontal,
    /// Mirror top-bottom.
    #[serde(rename = "V")]
    Vertical,
}

impl Inversion {
    pub const ALL: [Inversion; 3] = [Inversion::None, Inversion::Horizontal, Inversion::Vertical];
}

/// The six color component orders, indexed by the random senary integer.
///
/// The name lists which input component ends up in the R, G and B slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ColorPerm {
    #[serde(rename = "RGB")]
    Rgb,
    #[serde(rename = "GRB")]
    Grb,
    #[serde(rename = "RBG")]
    Rbg,
    #[serde(rename = "BGR")]
    Bgr,
    #[serde(rename = "BRG")]
    Brg,
    #[serde(rename = "GBR")]
    Gbr,
}

const PERM_SOURCES: [[u8; 3]; 6] = [[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 1, 0], [2, 0, 1], [1, 2, 0]];

impl ColorPerm {
    pub const ALL: [ColorPerm; 6] = [
        ColorPerm::Rgb,
        ColorPerm::Grb,
        ColorPerm::Rbg,
        ColorPerm::Bgr,
        ColorPerm::Brg,
        ColorPerm::Gbr,
    ];

    pub fn from_index(i: usize) -> Option<ColorPerm> {
        ColorPerm::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// `sources()[k]` is the input channel copied into output channel `k`.
    pub fn sources(self) -> [u8; 3] {
        PERM_SOURCES[self as usize]
    }

    fn from_sources(src: [u8; 3]) -> ColorPerm {
        let i = PERM_SOURCES.iter().position(|s| *s == src).unwrap();
        ColorPerm::ALL[i]
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(self, first: ColorPerm) -> ColorPerm {
        let (a, b) = (self.sources(), first.sources());
        ColorPerm::from_sources([b[a[0] as usize], b[a[1] as usize], b[a[2] as usize]])
    }

    pub fn inverse(self) -> ColorPerm {
        let s = self.sources();
        let mut inv = [0u8; 3];
        for (k, &src) in s.iter().enumerate() {
            inv[src as usize] = k as u8;
        }
        ColorPerm::from_sources(inv)
    }
}

/// A signed permutation matrix `[[a, b], [c, d]]` acting on `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Geometry {
    m: [[i8; 2]; 2],
}

impl Geometry {
    pub const IDENTITY: Geometry = Geometry { m: [[1, 0], [0, 1]] };

    fn rotation(r: Rotation) -> Geometry {
        Geometry {
            m: rotation_matrix(r as usize),
        }
    }

    fn inversion(i: Inversion) -> Geometry {
        Geometry {
            m: inversion_matrix(i as usize),
        }
    }

    pub fn from_index(index: usize) -> Geometry {
        GEOMETRIES[index]
    }

    /// `self · other` (apply `other` first).
    pub fn then_after(self, other: Geometry) -> Geometry {
        let (a, b) = (self.m, other.m);
        Geometry { m: mat_mul(a, b) }
    }

    pub fn inverse(self) -> Geometry {
        // orthogonal, so the inverse is the transpose
        Geometry {
            m: [[self.m[0][0], self.m[1][0]], [self.m[0][1], self.m[1][1]]],
        }
    }

    /// Whether the x and y axes are exchanged (90° or 270° class).
    pub fn swaps_axes(self) -> bool {
        self.m[0][0] == 0
    }

    /// Maps a vector `(x, y)`.
    #[inline]
    pub fn apply(self, x: i64, y: i64) -> (i64, i64) {
        (
            self.m[0][0] as i64 * x + self.m[0][1] as i64 * y,
            self.m[1][0] as i64 * x + self.m[1][1] as i64 * y,
        )
    }

    /// Maps a grid offset given as `(drow, dcol)`.
    #[inline]
    pub fn apply_offset(self, drow: i64, dcol: i64) -> (i64, i64) {
        let (x, y) = self.apply(dcol, drow);
        (y, x)
    }

    /// Index 0..8 over the distinct dihedral elements.
    pub fn index(self) -> usize {
        GEOMETRIES.iter().position(|g| *g == self).unwrap()
    }
}

const fn rotation_matrix(q: usize) -> [[i8; 2]; 2] {
    match q {
        0 => [[1, 0], [0, 1]],
        1 => [[0, -1], [1, 0]],
        2 => [[-1, 0], [0, -1]],
        _ => [[0, 1], [-1, 0]],
    }
}

const fn inversion_matrix(i: usize) -> [[i8; 2]; 2] {
    match i {
        0 => [[1, 0], [0, 1]],
        1 => [[-1, 0], [0, 1]],
        _ => [[1, 0], [0, -1]],
    }
}

const fn mat_mul(a: [[i8; 2]; 2], b: [[i8; 2]; 2]) -> [[i8; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

const fn mat_eq(a: [[i8; 2]; 2], b: [[i8; 2]; 2]) -> bool {
    a[0][0] == b[0][0] && a[0][1] == b[0][1] && a[1][0] == b[1][0] && a[1][1] == b[1][1]
}

// distinct dihedral elements, in order of their lowest (rotation, inversion) label
const fn distinct_geometries() -> ([Geometry; 8], [(usize, usize); 8]) {
    let mut geoms = [Geometry { m: [[0, 0], [0, 0]] }; 8];
    let mut labels = [(0usize, 0usize); 8];
    let mut found = 0;
    let mut r = 0;
    while r < 4 {
        let mut i = 0;
        while i < 3 {
            let m = mat_mul(inversion_matrix(i), rotation_matrix(r));
            let mut seen = false;
            let mut k = 0;
            while k < found {
                if mat_eq(geoms[k].m, m) {
                    seen = true;
                }
                k += 1;
            }
            if !seen {
                geoms[found] = Geometry { m };
                labels[found] = (r, i);
                found += 1;
            }
            i += 1;
        }
        r += 1;
    }
    (geoms, labels)
}

const DISTINCT: ([Geometry; 8], [(usize, usize); 8]) = distinct_geometries();
const GEOMETRIES: [Geometry; 8] = DISTINCT.0;

fn geometry_label(index: usize) -> (Rotation, Inversion) {
    let (r, i) = DISTINCT.1[index];
    (Rotation::ALL[r], Inversion::ALL[i])
}

/// Number of labels in the full transform family.
pub const LABEL_COUNT: usize = 144;
/// Number of distinct transform actions.
pub const ELEMENT_COUNT: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockTransform {
    pub rotation: Rotation,
    pub inversion: Inversion,
    pub negpos: bool,
    pub color_perm: ColorPerm,
}

impl Default for BlockTransform {
    fn default() -> Self {
        BlockTransform::IDENTITY
    }
}

impl BlockTransform {
    pub const IDENTITY: BlockTransform = BlockTransform {
        rotation: Rotation::R0,
        inversion: Inversion::None,
        negpos: false,
        color_perm: ColorPerm::Rgb,
    };

    pub fn new(rotation: Rotation, inversion: Inversion, negpos: bool, color_perm: ColorPerm) -> Self {
        BlockTransform {
            rotation,
            inversion,
            negpos,
            color_perm,
        }
    }

    pub fn rotation(rotation: Rotation) -> Self {
        BlockTransform {
            rotation,
            ..BlockTransform::IDENTITY
        }
    }

    /// Label index in 0..144, ordered by rotation, inversion, negpos, color.
    pub fn index(&self) -> usize {
        ((self.rotation as usize * 3 + self.inversion as usize) * 2 + self.negpos as usize) * 6
            + self.color_perm as usize
    }

    pub fn from_index(index: usize) -> Option<BlockTransform> {
        if index >= LABEL_COUNT {
            return None;
        }
        let c = index % 6;
        let n = (index / 6) % 2;
        let i = (index / 12) % 3;
        let r = index / 36;
        Some(BlockTransform {
            rotation: Rotation::ALL[r],
            inversion: Inversion::ALL[i],
            negpos: n == 1,
            color_perm: ColorPerm::ALL[c],
        })
    }

    /// All 144 labels in index order.
    pub fn all() -> impl Iterator<Item = BlockTransform> {
        (0..LABEL_COUNT).map(|i| BlockTransform::from_index(i).unwrap())
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::inversion(self.inversion).then_after(Geometry::rotation(self.rotation))
    }

    /// Compact id in 0..96 that is equal exactly when two labels act identically.
    pub fn element_id(&self) -> usize {
        self.geometry().index() * 12 + self.negpos as usize * 6 + self.color_perm as usize
    }

    /// The lowest-index label of the element with the given id.
    pub fn from_element_id(id: usize) -> BlockTransform {
        let (rotation, inversion) = geometry_label(id / 12);
        BlockTransform {
            rotation,
            inversion,
            negpos: (id / 6) % 2 == 1,
            color_perm: ColorPerm::ALL[id % 6],
        }
    }

    /// The lowest-index label acting the same way as `self`.
    pub fn canonical(&self) -> BlockTransform {
        BlockTransform::from_element_id(self.element_id())
    }

    /// True when both labels act identically on every block.
    pub fn equivalent(&self, other: &BlockTransform) -> bool {
        self.element_id() == other.element_id()
    }

    pub fn is_identity(&self) -> bool {
        self.element_id() == 0
    }

    /// `self ∘ first` as a canonical label: apply `first`, then `self`.
    pub fn compose(&self, first: &BlockTransform) -> BlockTransform {
        let g = self.geometry().then_after(first.geometry());
        let (rotation, inversion) = geometry_label(g.index());
        BlockTransform {
            rotation,
            inversion,
            negpos: self.negpos ^ first.negpos,
            color_perm: self.color_perm.after(first.color_perm),
        }
    }

    /// Canonical label of the inverse action.
    pub fn inverse(&self) -> BlockTransform {
        let g = self.geometry().inverse();
        let (rotation, inversion) = geometry_label(g.index());
        BlockTransform {
            rotation,
            inversion,
            negpos: self.negpos,
            color_perm: self.color_perm.inverse(),
        }
    }
}

/// Composition and inversion over element ids, precomputed once.
pub struct ElementTable {
    compose: Vec<u8>,
    inverse: Vec<u8>,
}

impl ElementTable {
    pub fn get() -> &'static ElementTable {
        static TABLE: std::sync::OnceLock<ElementTable> = std::sync::OnceLock::new();
        TABLE.get_or_init(|| {
            let elems: Vec<BlockTransform> = (0..ELEMENT_COUNT).map(BlockTransform::from_element_id).collect();
            let mut compose = Vec::with_capacity(ELEMENT_COUNT * ELEMENT_COUNT);
            for a in &elems {
                for b in &elems {
                    compose.push(a.compose(b).element_id() as u8);
                }
            }
            let inverse = elems.iter().map(|e| e.inverse().element_id() as u8).collect();
            ElementTable { compose, inverse }
        })
    }

    /// Id of `a ∘ b` (apply `b` first).
    #[inline]
    pub fn compose(&self, a: usize, b: usize) -> usize {
        self.compose[a * ELEMENT_COUNT + b] as usize
    }

    #[inline]
    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a] as usize
    }
}

/// Inverse of `t`: `apply_transform(apply_transform(b, t), invert_transform(t)) == b`.
pub fn invert_transform(t: &BlockTransform) -> BlockTransform {
    t.inverse()
}

/// Applies `t` to `block`: rotation, then inversion, negpos and color shuffle.
pub fn apply_transform(block: &RasterImage, t: &BlockTransform) -> Result<RasterImage> {
    let geometry = t.geometry();
    if geometry.swaps_axes() && !block.is_square() {
        return Err(Error::Shape(format!(
            "cannot rotate a non-square {}x{} block by {}°",
            block.width(),
            block.height(),
            t.rotation.degrees()
        )));
    }
    let needs_color = t.color_perm != ColorPerm::Rgb || t.negpos;
    if needs_color && block.channels() != 3 {
        return Err(Error::Channels(block.channels()));
    }
    let mask = if t.negpos { sample_mask(BIT_DEPTH) } else { 0 };
    let src = t.color_perm.sources();

    let (w, h, ch) = (block.width(), block.height(), block.channels());
    let inv = geometry.inverse();
    let input = block.pixels();
    let mut out = vec![0u8; input.len()];
    for y in 0..h {
        let qy = 2 * y as i64 - (h as i64 - 1);
        for x in 0..w {
            let qx = 2 * x as i64 - (w as i64 - 1);
            let (px, py) = inv.apply(qx, qy);
            let sx = ((px + w as i64 - 1) / 2) as usize;
            let sy = ((py + h as i64 - 1) / 2) as usize;
            let from = (sy * w + sx) * ch;
            let to = (y * w + x) * ch;
            if needs_color {
                for k in 0..3 {
                    out[to + k] = input[from + src[k] as usize] ^ mask;
                }
            } else {
                out[to..to + ch].copy_from_slice(&input[from..from + ch]);
            }
        }
    }
    RasterImage::new(w, h, ch, out)
}

fn sample_mask(bits: u32) -> u8 {
    ((1u16 << bits) - 1) as u8
}

/// Negative-positive transformation: every sample `p` becomes `p ⊕ (2^bits − 1)`.
pub fn negpos(block: &RasterImage, bits: u32) -> Result<RasterImage> {
    if bits == 0 || bits > BIT_DEPTH {
        return Err(Error::Config(format!("unsupported bit depth {bits}")));
    }
    let mask = sample_mask(bits);
    let pixels = block.pixels().iter().map(|&p| p ^ mask).collect();
    RasterImage::new(block.width(), block.height(), block.channels(), pixels)
}

/// Reorders the three color components of every pixel.
pub fn shuffle_colors(block: &RasterImage, perm: ColorPerm) -> Result<RasterImage> {
    if block.channels() != 3 {
        return Err(Error::Channels(block.channels()));
    }
    let src = perm.sources();
    let pixels = block
        .pixels()
        .chunks_exact(3)
        .flat_map(|px| [px[src[0] as usize], px[src[1] as usize], px[src[2] as usize]])
        .collect();
    RasterImage::new(block.width(), block.height(), 3, pixels)
}
