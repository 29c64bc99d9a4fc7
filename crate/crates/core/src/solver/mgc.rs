//! Mahalanobis gradient compatibility between two facing block edges.
//!
//! Each edge is described from the point of view of the block that owns it:
//! the boundary samples and the distribution of the *outward* gradient
//! (boundary minus the adjacent interior sample). For a left block `a` and a
//! right block `b`, with `Δ_p = b_p − a_p` the gradient across the seam at
//! row `p`, the cost is
//!
//! ```text
//! Σ_p (Δ_p − μ_a)ᵀ S_a⁻¹ (Δ_p − μ_a)  +  Σ_p (−Δ_p − μ_b)ᵀ S_b⁻¹ (−Δ_p − μ_b)
//! ```
//!
//! The covariance of each edge is estimated from its real gradients plus nine
//! dummy gradients (zero, ±(1,1,1) and the signed unit vectors), then
//! regularized with `ε·I`, `ε = 1e-6 · trace(S)/3`.

use crate::raster::RasterImage;

/// Dummy gradients appended before estimating the covariance.
pub const DUMMY_GRADIENTS: [[f64; 3]; 9] = [
    [0.0, 0.0, 0.0],
    [1.0, 1.0, 1.0],
    [-1.0, -1.0, -1.0],
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, -1.0],
];

/// Relative ridge added to the covariance diagonal.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

/// Which edge of a (possibly transformed) block faces its neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSide {
    Left,
    Right,
}

/// Gradient statistics of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStats {
    pub mean: [f64; 3],
    /// Inverse covariance, symmetric, stored as `[00, 11, 22, 01, 02, 12]`.
    pub inv_cov: [f64; 6],
}

impl EdgeStats {
    pub fn from_gradients(gradients: &[[f64; 3]]) -> EdgeStats {
        let n = gradients.len() as f64;
        let mut mean = [0.0; 3];
        for g in gradients {
            for k in 0..3 {
                mean[k] += g[k];
            }
        }
        for m in &mut mean {
            *m /= n;
        }

        let samples = || gradients.iter().chain(DUMMY_GRADIENTS.iter());
        let count = (gradients.len() + DUMMY_GRADIENTS.len()) as f64;
        let mut center = [0.0; 3];
        for g in samples() {
            for k in 0..3 {
                center[k] += g[k];
            }
        }
        for c in &mut center {
            *c /= count;
        }
        let mut cov = [[0.0; 3]; 3];
        for g in samples() {
            let d = [g[0] - center[0], g[1] - center[1], g[2] - center[2]];
            for r in 0..3 {
                for c in 0..3 {
                    cov[r][c] += d[r] * d[c];
                }
            }
        }
        for row in &mut cov {
            for v in row.iter_mut() {
                *v /= count - 1.0;
            }
        }
        let ridge = COVARIANCE_RIDGE * (cov[0][0] + cov[1][1] + cov[2][2]) / 3.0;
        for (k, row) in cov.iter_mut().enumerate() {
            row[k] += ridge;
        }
        EdgeStats {
            mean,
            inv_cov: invert_symmetric(&cov),
        }
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        match (r.min(c), r.max(c)) {
            (0, 0) => self.inv_cov[0],
            (1, 1) => self.inv_cov[1],
            (2, 2) => self.inv_cov[2],
            (0, 1) => self.inv_cov[3],
            (0, 2) => self.inv_cov[4],
            _ => self.inv_cov[5],
        }
    }

    /// `(v − μ)ᵀ S⁻¹ (v − μ)`.
    pub fn mahalanobis_sq(&self, v: [f64; 3]) -> f64 {
        let d = [v[0] - self.mean[0], v[1] - self.mean[1], v[2] - self.mean[2]];
        let mut acc = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                acc += d[r] * self.get(r, c) * d[c];
            }
        }
        acc
    }
}

fn invert_symmetric(m: &[[f64; 3]; 3]) -> [f64; 6] {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[0][2] * m[2][1] - m[0][1] * m[2][2];
    let c02 = m[0][1] * m[1][2] - m[0][2] * m[1][1];
    let c11 = m[0][0] * m[2][2] - m[0][2] * m[2][0];
    let c12 = m[0][2] * m[1][0] - m[0][0] * m[1][2];
    let c22 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let det = m[0][0] * c00 + m[0][1] * (m[1][2] * m[2][0] - m[1][0] * m[2][2]) + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv = 1.0 / det;
    [c00 * inv, c11 * inv, c22 * inv, c01 * inv, c02 * inv, c12 * inv]
}

/// One outward-facing edge of a block in a fixed orientation.
///
/// Boundary samples are stored channel-major so the seam moments vectorize.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeContext {
    len: usize,
    /// `[channel][row]`, length `3 * len`.
    edge: Vec<i32>,
    stats: EdgeStats,
    /// `S⁻¹ μ`.
    s_mu: [f64; 3],
    /// `len · μᵀ S⁻¹ μ`.
    bias: f64,
}

impl EdgeContext {
    /// Reads the left or right edge of `block` (3 channels, at least 2 columns).
    pub fn from_block(block: &RasterImage, side: EdgeSide) -> EdgeContext {
        assert_eq!(block.channels(), 3);
        let (w, h) = (block.width(), block.height());
        assert!(w >= 2);
        let (outer, inner) = match side {
            EdgeSide::Left => (0, 1),
            EdgeSide::Right => (w - 1, w - 2),
        };
        let mut edge = vec![0i32; 3 * h];
        let mut gradients = Vec::with_capacity(h);
        for y in 0..h {
            let o = block.pixel(outer, y);
            let i = block.pixel(inner, y);
            let mut g = [0.0; 3];
            for k in 0..3 {
                edge[k * h + y] = o[k] as i32;
                g[k] = o[k] as f64 - i[k] as f64;
            }
            gradients.push(g);
        }
        let stats = EdgeStats::from_gradients(&gradients);
        let mut s_mu = [0.0; 3];
        for (r, v) in s_mu.iter_mut().enumerate() {
            *v = (0..3).map(|c| stats.get(r, c) * stats.mean[c]).sum();
        }
        let bias = h as f64 * (0..3).map(|k| stats.mean[k] * s_mu[k]).sum::<f64>();
        EdgeContext {
            len: h,
            edge,
            stats,
            s_mu,
            bias,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stats(&self) -> &EdgeStats {
        &self.stats
    }

    /// Boundary sample at row `p`, channel `k`.
    pub fn sample(&self, p: usize, k: usize) -> i32 {
        self.edge[k * self.len + p]
    }
}

/// First and second moments of the seam gradient `Δ_p = b_p − a_p`.
/// Exact in integer arithmetic for 8-bit samples and edges up to 4096 rows.
#[inline]
fn seam_moments(a: &[i32], b: &[i32], len: usize) -> ([i32; 3], [i32; 6]) {
    let (a0, rest) = a.split_at(len);
    let (a1, a2) = rest.split_at(len);
    let (b0, rest) = b.split_at(len);
    let (b1, b2) = rest.split_at(len);
    let (mut s0, mut s1, mut s2) = (0i32, 0i32, 0i32);
    let (mut m00, mut m11, mut m22, mut m01, mut m02, mut m12) = (0i32, 0i32, 0i32, 0i32, 0i32, 0i32);
    for p in 0..len {
        let d0 = b0[p] - a0[p];
        let d1 = b1[p] - a1[p];
        let d2 = b2[p] - a2[p];
        s0 += d0;
        s1 += d1;
        s2 += d2;
        m00 += d0 * d0;
        m11 += d1 * d1;
        m22 += d2 * d2;
        m01 += d0 * d1;
        m02 += d0 * d2;
        m12 += d1 * d2;
    }
    ([s0, s1, s2], [m00, m11, m22, m01, m02, m12])
}

/// MGC cost of placing the edge `right` (left edge of the right block)
/// against `left` (right edge of the left block). Never negative.
#[inline]
pub fn mgc_cost(left: &EdgeContext, right: &EdgeContext) -> f64 {
    debug_assert_eq!(left.len, right.len);
    let (m1, m2) = seam_moments(&left.edge, &right.edge, left.len);
    let sa = &left.stats.inv_cov;
    let sb = &right.stats.inv_cov;
    let quad = (sa[0] + sb[0]) * m2[0] as f64
        + (sa[1] + sb[1]) * m2[1] as f64
        + (sa[2] + sb[2]) * m2[2] as f64
        + 2.0 * ((sa[3] + sb[3]) * m2[3] as f64 + (sa[4] + sb[4]) * m2[4] as f64 + (sa[5] + sb[5]) * m2[5] as f64);
    let linear = 2.0
        * ((right.s_mu[0] - left.s_mu[0]) * m1[0] as f64
            + (right.s_mu[1] - left.s_mu[1]) * m1[1] as f64
            + (right.s_mu[2] - left.s_mu[2]) * m1[2] as f64);
    (quad + linear + left.bias + right.bias).max(0.0)
}
