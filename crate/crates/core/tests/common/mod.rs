//! Slow, direct reimplementations used as oracles by the integration tests.
#![allow(dead_code)]

use etc_jigsaw::solver::AssemblyResult;
use etc_jigsaw::transform::{BlockTransform, ColorPerm, Inversion, LABEL_COUNT};
use etc_jigsaw::RasterImage;

pub fn fixture(name: &str) -> RasterImage {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/images");
    RasterImage::read(dir.join(format!("{name}.png"))).unwrap()
}

pub const FIXTURES: [&str; 5] = ["astronaut", "chelsea", "coffee", "retina", "rocket"];

/// Small xorshift generator so the oracles share nothing with the crate.
pub struct Rng(pub u64);

impl Rng {
    pub fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }

    pub fn below(&mut self, m: usize) -> usize {
        (self.next() % m as u64) as usize
    }

    pub fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            v.swap(i, self.below(i + 1));
        }
    }
}

/// Smooth image whose three channels follow different random ramps and curves.
pub fn gradient_image(w: usize, h: usize, rng: &mut Rng) -> RasterImage {
    let mut coef = [[0.0; 5]; 3];
    for c in &mut coef {
        for v in c.iter_mut() {
            *v = rng.unit() * 2.0 - 1.0;
        }
    }
    let (fw, fh) = (w as f64, h as f64);
    RasterImage::from_fn(w, h, |x, y| {
        let (u, v) = (x as f64 / fw, y as f64 / fh);
        let mut px = [0u8; 3];
        for (k, c) in coef.iter().enumerate() {
            let s = 128.0 + 60.0 * (c[0] * u + c[1] * v) + 50.0 * c[2] * (u * v) + 40.0 * c[3] * (u * u - v) + 30.0 * c[4] * (3.0 * u * v * v);
            px[k] = s.round().clamp(0.0, 255.0) as u8;
        }
        px
    })
}

fn get(img: &RasterImage, x: usize, y: usize) -> [u8; 3] {
    let p = img.pixel(x, y);
    [p[0], p[1], p[2]]
}

/// Quarter turn clockwise.
pub fn turn_cw(img: &RasterImage) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    RasterImage::from_fn(h, w, |x, y| get(img, y, h - 1 - x))
}

pub fn mirror_lr(img: &RasterImage) -> RasterImage {
    let w = img.width();
    RasterImage::from_fn(w, img.height(), |x, y| get(img, w - 1 - x, y))
}

pub fn mirror_ud(img: &RasterImage) -> RasterImage {
    let h = img.height();
    RasterImage::from_fn(img.width(), h, |x, y| get(img, x, h - 1 - y))
}

/// Applies a label step by step: rotate, invert, negate, then permute channels.
pub fn naive_apply(block: &RasterImage, t: &BlockTransform) -> RasterImage {
    let mut b = block.clone();
    for _ in 0..t.rotation.quarter_turns() {
        b = turn_cw(&b);
    }
    b = match t.inversion {
        Inversion::None => b,
        Inversion::Horizontal => mirror_lr(&b),
        Inversion::Vertical => mirror_ud(&b),
    };
    let src = color_sources(t.color_perm);
    RasterImage::from_fn(b.width(), b.height(), |x, y| {
        let p = get(&b, x, y);
        let q = if t.negpos { p.map(|v| 255 - v) } else { p };
        [q[src[0]], q[src[1]], q[src[2]]]
    })
}

/// Source channel of each output channel, read off the permutation's name.
pub fn color_sources(perm: ColorPerm) -> [usize; 3] {
    let name = format!("{perm:?}").to_ascii_uppercase();
    let mut out = [0; 3];
    for (k, ch) in name.chars().enumerate() {
        out[k] = "RGB".find(ch).unwrap();
    }
    out
}

/// A 4x4 block with all 48 samples distinct.
pub fn probe() -> RasterImage {
    RasterImage::from_fn(4, 4, |x, y| {
        let i = (y * 4 + x) as u8;
        [3 * i + 1, 3 * i + 2, 3 * i + 100]
    })
}

/// Label undoing `t`, found by search.
pub fn naive_inverse(t: &BlockTransform) -> BlockTransform {
    let p = probe();
    let moved = naive_apply(&p, t);
    BlockTransform::all()
        .find(|v| naive_apply(&moved, v) == p)
        .unwrap()
}

fn solve3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut a = [[0.0; 6]; 3];
    for r in 0..3 {
        a[r][..3].copy_from_slice(&m[r]);
        a[r][3 + r] = 1.0;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in (0..3).filter(|&r| r != col) {
            let f = a[r][col];
            for k in 0..6 {
                a[r][k] -= f * a[col][k];
            }
        }
    }
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        inv[r].copy_from_slice(&a[r][3..]);
    }
    inv
}

const DUMMIES: [[f64; 3]; 9] = [
    [0.0, 0.0, 0.0],
    [1.0, 1.0, 1.0],
    [-1.0, -1.0, -1.0],
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
];

/// Mean and inverse regularized covariance of an edge's outward gradients.
fn edge_model(grads: &[[f64; 3]]) -> ([f64; 3], [[f64; 3]; 3]) {
    let n = grads.len() as f64;
    let mean: [f64; 3] = std::array::from_fn(|k| grads.iter().map(|g| g[k]).sum::<f64>() / n);
    let all: Vec<[f64; 3]> = grads.iter().chain(DUMMIES.iter()).copied().collect();
    let m = all.len() as f64;
    let center: [f64; 3] = std::array::from_fn(|k| all.iter().map(|g| g[k]).sum::<f64>() / m);
    let mut cov = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            cov[r][c] = all.iter().map(|g| (g[r] - center[r]) * (g[c] - center[c])).sum::<f64>() / (m - 1.0);
        }
    }
    let ridge = 1e-6 * (cov[0][0] + cov[1][1] + cov[2][2]) / 3.0;
    for k in 0..3 {
        cov[k][k] += ridge;
    }
    (mean, solve3(cov))
}

fn quad(v: [f64; 3], mean: [f64; 3], inv: &[[f64; 3]; 3]) -> f64 {
    let d: [f64; 3] = std::array::from_fn(|k| v[k] - mean[k]);
    (0..3).map(|r| (0..3).map(|c| d[r] * inv[r][c] * d[c]).sum::<f64>()).sum()
}

/// Mahalanobis gradient compatibility of `right` placed to the right of `left`.
pub fn naive_mgc(left: &RasterImage, right: &RasterImage) -> f64 {
    let (w, h) = (left.width(), left.height());
    let px = |img: &RasterImage, x: usize, y: usize| get(img, x, y).map(f64::from);
    let ga: Vec<[f64; 3]> = (0..h)
        .map(|y| {
            let (o, i) = (px(left, w - 1, y), px(left, w - 2, y));
            std::array::from_fn(|k| o[k] - i[k])
        })
        .collect();
    let gb: Vec<[f64; 3]> = (0..h)
        .map(|y| {
            let (o, i) = (px(right, 0, y), px(right, 1, y));
            std::array::from_fn(|k| o[k] - i[k])
        })
        .collect();
    let (ma, sa) = edge_model(&ga);
    let (mb, sb) = edge_model(&gb);
    (0..h)
        .map(|y| {
            let (a, b) = (px(left, w - 1, y), px(right, 0, y));
            let across: [f64; 3] = std::array::from_fn(|k| b[k] - a[k]);
            let back: [f64; 3] = std::array::from_fn(|k| a[k] - b[k]);
            quad(across, ma, &sa) + quad(back, mb, &sb)
        })
        .sum()
}

pub fn turn_ccw(img: &RasterImage) -> RasterImage {
    turn_cw(&turn_cw(&turn_cw(img)))
}

/// Seam cost with `second` one cell away from `first` by `(drow, dcol)`.
pub fn naive_seam(first: &RasterImage, second: &RasterImage, off: (i64, i64)) -> f64 {
    match off {
        (0, 1) => naive_mgc(first, second),
        (0, -1) => naive_mgc(second, first),
        (1, 0) => naive_mgc(&turn_ccw(first), &turn_ccw(second)),
        (-1, 0) => naive_mgc(&turn_ccw(second), &turn_ccw(first)),
        _ => panic!("not a neighbor offset"),
    }
}

/// Position of the one pixel that differs from all others in a 3x3 image.
fn marker(img: &RasterImage) -> (i64, i64) {
    let mut counts = std::collections::HashMap::new();
    for y in 0..3 {
        for x in 0..3 {
            *counts.entry(get(img, x, y)).or_insert(0) += 1;
        }
    }
    for y in 0..3 {
        for x in 0..3 {
            if counts[&get(img, x, y)] == 1 {
                return (y as i64 - 1, x as i64 - 1);
            }
        }
    }
    panic!("no marker");
}

/// Where a neighbor offset ends up after `f`, traced with a marked 3x3 image.
pub fn map_offset(f: impl Fn(&RasterImage) -> RasterImage, off: (i64, i64)) -> (i64, i64) {
    let img = RasterImage::from_fn(3, 3, |x, y| {
        if (y as i64 - 1, x as i64 - 1) == off {
            [250, 250, 250]
        } else {
            [10, 10, 10]
        }
    });
    marker(&f(&img))
}

/// Scores recounted from pixel behavior only: residuals are compared on a
/// probe block, offsets traced with a marker.
pub fn naive_scores(result: &AssemblyResult, truth: &AssemblyResult) -> (f64, f64, f64) {
    let n = result.placements.len();
    let p = probe();
    let placed: Vec<RasterImage> = (0..n).map(|k| naive_apply(&p, &result.placements[k].transform)).collect();
    let restored: Vec<RasterImage> = (0..n).map(|k| naive_apply(&p, &truth.placements[k].transform)).collect();
    let same_cell = |k: usize| {
        let (s, u) = (&result.placements[k], &truth.placements[k]);
        (s.row, s.col) == (u.row, u.col)
    };
    let plain = (0..n).filter(|&k| same_cell(k) && placed[k] == restored[k]).count();
    let flipped = (0..n)
        .filter(|&k| {
            let neg = RasterImage::from_fn(4, 4, |x, y| get(&placed[k], x, y).map(|v| 255 - v));
            same_cell(k) && neg == restored[k]
        })
        .count();
    let dc = plain.max(flipped) as f64 / n as f64;

    // residual of piece k acting on an upright block
    let inverse: Vec<BlockTransform> = (0..n).map(|k| naive_inverse(&truth.placements[k].transform)).collect();
    let residual = |k: usize, img: &RasterImage| naive_apply(&naive_apply(img, &inverse[k]), &result.placements[k].transform);

    let (rows, cols) = (truth.rows, truth.cols);
    let mut at = vec![usize::MAX; rows * cols];
    for u in &truth.placements {
        at[u.row * cols + u.col] = u.piece;
    }
    let mut total = 0;
    let mut good = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            for (dr, dc) in [(0i64, 1i64), (1, 0)] {
                let (nr, nc) = (r + dr as usize, c + dc as usize);
                if nr >= rows || nc >= cols {
                    continue;
                }
                total += 1;
                let (a, b) = (at[r * cols + c], at[nr * cols + nc]);
                if residual(a, &p) != residual(b, &p) {
                    continue;
                }
                let want = map_offset(|img| residual(a, img), (dr, dc));
                let (sa, sb) = (&result.placements[a], &result.placements[b]);
                if (sb.row as i64 - sa.row as i64, sb.col as i64 - sa.col as i64) == want {
                    good.push((a, b));
                }
            }
        }
    }
    let nc = if total == 0 { 1.0 } else { good.len() as f64 / total as f64 };

    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &good {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut largest = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        largest = largest.max(size);
    }
    (dc, nc, largest as f64 / n as f64)
}

pub fn random_label(rng: &mut Rng) -> BlockTransform {
    BlockTransform::from_index(rng.below(LABEL_COUNT)).unwrap()
}
