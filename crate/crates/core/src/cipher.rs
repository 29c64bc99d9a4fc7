//! Block scrambling encryption for Encryption-then-Compression pipelines.
//!
//! Encryption runs four steps over a block grid, each keyed by its own seed:
//!
//! 1. permute the blocks (`k1`),
//! 2. rotate then invert each block (`k2`),
//! 3. negative-positive transform each block with probability ½ (`k3`),
//! 4. shuffle the color components of each block (`k4`).
//!
//! All steps act on the three color components together. Decryption undoes
//! the steps in reverse order.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keystream::Keystream;
use crate::raster::{partition, reassemble, BlockGrid, RasterImage};
use crate::transform::{apply_transform, BlockTransform, ColorPerm, Inversion, Rotation};

/// The puzzle classes, named by the cipher steps they enable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PuzzleType {
    /// Scramble only.
    #[serde(rename = "1")]
    Type1,
    /// Scramble and rotation.
    #[serde(rename = "2")]
    Type2,
    /// Scramble, rotation and inversion.
    #[serde(rename = "I")]
    TypeI,
    /// Scramble, rotation and negative-positive.
    #[serde(rename = "N")]
    TypeN,
    /// Scramble, rotation, inversion and negative-positive.
    #[serde(rename = "IN")]
    TypeIN,
    /// All four steps.
    #[serde(rename = "INC")]
    TypeINC,
}

impl PuzzleType {
    pub const ALL: [PuzzleType; 6] = [
        PuzzleType::Type1,
        PuzzleType::Type2,
        PuzzleType::TypeI,
        PuzzleType::TypeN,
        PuzzleType::TypeIN,
        PuzzleType::TypeINC,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PuzzleType::Type1 => "1",
            PuzzleType::Type2 => "2",
            PuzzleType::TypeI => "I",
            PuzzleType::TypeN => "N",
            PuzzleType::TypeIN => "IN",
            PuzzleType::TypeINC => "INC",
        }
    }

    /// `(scramble, rotation, inversion, negpos, color shuffle)`.
    pub fn steps(self) -> (bool, bool, bool, bool, bool) {
        match self {
            PuzzleType::Type1 => (true, false, false, false, false),
            PuzzleType::Type2 => (true, true, false, false, false),
            PuzzleType::TypeI => (true, true, true, false, false),
            PuzzleType::TypeN => (true, true, false, true, false),
            PuzzleType::TypeIN => (true, true, true, true, false),
            PuzzleType::TypeINC => (true, true, true, true, true),
        }
    }

    /// Transform labels a solver has to search for this puzzle type, in index order.
    pub fn transform_family(self) -> Vec<BlockTransform> {
        let (_, rot, inv, neg, color) = self.steps();
        transform_family(rot, inv, neg, color)
    }
}

pub(crate) fn transform_family(rot: bool, inv: bool, neg: bool, color: bool) -> Vec<BlockTransform> {
    BlockTransform::all()
        .filter(|t| {
            (rot || t.rotation == Rotation::R0)
                && (inv || t.inversion == Inversion::None)
                && (neg || !t.negpos)
                && (color || t.color_perm == ColorPerm::Rgb)
        })
        .collect()
}

impl fmt::Display for PuzzleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PuzzleType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t.strip_prefix("Type").unwrap_or(t).trim();
        PuzzleType::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::Config(format!("unknown puzzle type {s:?} (expected 1, 2, I, N, IN or INC)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CipherConfig {
    pub block_w: usize,
    pub block_h: usize,
    pub scramble: bool,
    pub rotation: bool,
    pub inversion: bool,
    pub negpos: bool,
    pub color_shuffle: bool,
}

impl CipherConfig {
    pub fn for_type(puzzle: PuzzleType, block: usize) -> Self {
        let (scramble, rotation, inversion, negpos, color_shuffle) = puzzle.steps();
        CipherConfig {
            block_w: block,
            block_h: block,
            scramble,
            rotation,
            inversion,
            negpos,
            color_shuffle,
        }
    }

    /// Every step off: encryption only crops.
    pub fn disabled(block_w: usize, block_h: usize) -> Self {
        CipherConfig {
            block_w,
            block_h,
            scramble: false,
            rotation: false,
            inversion: false,
            negpos: false,
            color_shuffle: false,
        }
    }

    /// The puzzle class this configuration produces, if it is one of the six.
    pub fn puzzle_type(&self) -> Option<PuzzleType> {
        let steps = (self.scramble, self.rotation, self.inversion, self.negpos, self.color_shuffle);
        PuzzleType::ALL.into_iter().find(|p| p.steps() == steps)
    }

    pub fn transform_family(&self) -> Vec<BlockTransform> {
        transform_family(self.rotation, self.inversion, self.negpos, self.color_shuffle)
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_w < 2 || self.block_h < 2 {
            return Err(Error::Config(format!(
                "block {}x{} is smaller than 2x2",
                self.block_w, self.block_h
            )));
        }
        if self.block_w != self.block_h && (self.rotation || self.inversion) {
            return Err(Error::Config(format!(
                "rotation and inversion need square blocks, got {}x{}",
                self.block_w, self.block_h
            )));
        }
        Ok(())
    }
}

/// Four independent 64-bit seeds, one per encryption step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecretKey {
    #[serde(with = "u64_decimal")]
    pub k1: u64,
    #[serde(with = "u64_decimal")]
    pub k2: u64,
    #[serde(with = "u64_decimal")]
    pub k3: u64,
    #[serde(with = "u64_decimal")]
    pub k4: u64,
}

impl SecretKey {
    pub fn new(k1: u64, k2: u64, k3: u64, k4: u64) -> Self {
        SecretKey { k1, k2, k3, k4 }
    }

    /// Derives a key from one seed: `k_m` is word `m` of the keystream seeded with `seed`.
    pub fn from_seed(seed: u64) -> Self {
        let mut ks = Keystream::new(seed);
        SecretKey {
            k1: ks.next_u64(),
            k2: ks.next_u64(),
            k3: ks.next_u64(),
            k4: ks.next_u64(),
        }
    }
}

mod u64_decimal {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(D::Error::custom(format!("{s:?} is not an unsigned decimal")));
        }
        s.parse().map_err(D::Error::custom)
    }
}

/// On-disk key file: the four seeds plus the cipher configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFile {
    #[serde(flatten)]
    pub key: SecretKey,
    pub config: CipherConfig,
    /// Informational; checked against the step flags on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub puzzle_type: Option<PuzzleType>,
}

impl KeyFile {
    pub fn new(key: SecretKey, config: CipherConfig) -> Self {
        KeyFile {
            key,
            config,
            puzzle_type: config.puzzle_type(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: KeyFile = serde_json::from_str(text)?;
        if let Some(label) = file.puzzle_type {
            if file.config.puzzle_type() != Some(label) {
                return Err(Error::Config(format!(
                    "key file says Type {label} but its step flags disagree"
                )));
            }
        }
        file.config.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("key file serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KeyFile::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Block permutation and per-position transforms expanded from a key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyExpansion {
    /// `permutation[k]` is the plaintext block shown at ciphertext position `k`.
    pub permutation: Vec<usize>,
    /// Transform applied to the block at ciphertext position `k`.
    pub transforms: Vec<BlockTransform>,
}

impl KeyExpansion {
    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// `inverse_permutation()[i]` is the ciphertext position of plaintext block `i`.
    pub fn inverse_permutation(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (k, &i) in self.permutation.iter().enumerate() {
            inv[i] = k;
        }
        inv
    }
}

/// Expands `key` for an `n`-block grid. Disabled steps contribute identities.
pub fn expand_key(key: &SecretKey, n: usize, config: &CipherConfig) -> KeyExpansion {
    let permutation = if config.scramble {
        Keystream::new(key.k1).permutation(n)
    } else {
        (0..n).collect()
    };
    let mut geometry = Keystream::new(key.k2);
    let mut polarity = Keystream::new(key.k3);
    let mut colors = Keystream::new(key.k4);
    let transforms = (0..n)
        .map(|_| {
            let rotation = if config.rotation {
                Rotation::ALL[geometry.below(4) as usize]
            } else {
                Rotation::R0
            };
            let inversion = if config.inversion {
                Inversion::ALL[geometry.below(3) as usize]
            } else {
                Inversion::None
            };
            let negpos = config.negpos && polarity.bit();
            let color_perm = if config.color_shuffle {
                ColorPerm::ALL[colors.below(6) as usize]
            } else {
                ColorPerm::Rgb
            };
            step_transform(rotation, inversion, negpos, color_perm)
        })
        .collect();
    KeyExpansion {
        permutation,
        transforms,
    }
}

/// Composite of steps 2–4: rotate, then invert, then negpos, then shuffle.
pub fn step_transform(rotation: Rotation, inversion: Inversion, negpos: bool, color_perm: ColorPerm) -> BlockTransform {
    let rotate = BlockTransform::rotation(rotation);
    let invert = BlockTransform {
        inversion,
        ..BlockTransform::IDENTITY
    };
    let channel = BlockTransform {
        negpos,
        color_perm,
        ..BlockTransform::IDENTITY
    };
    channel.compose(&invert.compose(&rotate))
}

/// Cuts `image` into the configured blocks, checking the configuration first.
fn grid_for(image: &RasterImage, config: &CipherConfig) -> Result<BlockGrid> {
    config.validate()?;
    if image.channels() != 3 {
        return Err(Error::Channels(image.channels()));
    }
    partition(image, config.block_w, config.block_h)
}

/// Encrypts with a precomputed expansion (which must match the grid size).
pub fn encrypt_with(image: &RasterImage, expansion: &KeyExpansion, config: &CipherConfig) -> Result<RasterImage> {
    let grid = grid_for(image, config)?;
    if expansion.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "key expanded for {} blocks, image has {}",
            expansion.len(),
            grid.len()
        )));
    }
    let plain = grid.blocks();
    let blocks = expansion
        .permutation
        .par_iter()
        .zip(&expansion.transforms)
        .map(|(&src, t)| apply_transform(&plain[src], t))
        .collect::<Result<Vec<_>>>()?;
    Ok(reassemble(&BlockGrid::from_blocks(grid.rows(), grid.cols(), blocks)?))
}

pub fn encrypt(image: &RasterImage, key: &SecretKey, config: &CipherConfig) -> Result<RasterImage> {
    let grid = grid_for(image, config)?;
    let expansion = expand_key(key, grid.len(), config);
    encrypt_with(image, &expansion, config)
}

pub fn decrypt_with(image: &RasterImage, expansion: &KeyExpansion, config: &CipherConfig) -> Result<RasterImage> {
    if image.width() % config.block_w != 0 || image.height() % config.block_h != 0 {
        return Err(Error::Dimension(format!(
            "{}x{} ciphertext is not a multiple of {}x{} blocks",
            image.width(),
            image.height(),
            config.block_w,
            config.block_h
        )));
    }
    let grid = grid_for(image, config)?;
    if expansion.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "key expanded for {} blocks, image has {}",
            expansion.len(),
            grid.len()
        )));
    }
    let cipher = grid.blocks();
    let restored = cipher
        .par_iter()
        .zip(&expansion.transforms)
        .map(|(block, t)| apply_transform(block, &t.inverse()))
        .collect::<Result<Vec<_>>>()?;
    let mut plain = vec![None; restored.len()];
    for (block, &dst) in restored.into_iter().zip(&expansion.permutation) {
        plain[dst] = Some(block);
    }
    let plain = plain.into_iter().map(|b| b.expect("permutation is a bijection")).collect();
    Ok(reassemble(&BlockGrid::from_blocks(grid.rows(), grid.cols(), plain)?))
}

pub fn decrypt(image: &RasterImage, key: &SecretKey, config: &CipherConfig) -> Result<RasterImage> {
    let grid = grid_for(image, config)?;
    let expansion = expand_key(key, grid.len(), config);
    decrypt_with(image, &expansion, config)
}

/// Size of the key space for an `n`-block image: the product of `n!`
/// (scramble), `4^n` (rotation), `3^n` (inversion), `2^n` (negpos) and
/// `6^n` (color shuffle) over the enabled steps.
pub fn key_space(n: usize, config: &CipherConfig) -> BigUint {
    let mut total = BigUint::from(1u32);
    if config.scramble {
        for k in 2..=n {
            total *= k as u64;
        }
    }
    let mut per_block = 1u32;
    if config.rotation {
        per_block *= 4;
    }
    if config.inversion {
        per_block *= 3;
    }
    if config.negpos {
        per_block *= 2;
    }
    if config.color_shuffle {
        per_block *= 6;
    }
    total * BigUint::from(per_block).pow(n as u32)
}

/// `log2` of an arbitrary-precision integer, to double precision.
pub fn log2_big(value: &BigUint) -> f64 {
    let bits = value.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        let digits = value.to_u64_digits();
        return (digits[0] as f64).log2();
    }
    let shift = bits - 64;
    let top = (value >> shift).to_u64_digits()[0];
    (top as f64).log2() + shift as f64
}
