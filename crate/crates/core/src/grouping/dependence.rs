//! Similarity kernel between patches and the row-stochastic dependence matrix
//! `A`, stored in compressed sparse rows over spatial same-group
//! neighborhoods.

use rand::Rng;

use crate::grouping::PatchGrouping;
use crate::linops::PatchMatrix;
use crate::rng;
use crate::{Error, Result};

/// `exp(-‖p_i − p_j‖₂ / σ)` for same-group patches whose top-left corners are
/// at most `radius` pixels apart; zero otherwise.
#[allow(clippy::too_many_arguments)]
pub fn similarity_kernel(
    p_i: &[f64],
    p_j: &[f64],
    loc_i: (usize, usize),
    loc_j: (usize, usize),
    group_i: usize,
    group_j: usize,
    sigma: f64,
    radius: f64,
) -> f64 {
    if group_i != group_j {
        return 0.0;
    }
    let dr = loc_i.0 as f64 - loc_j.0 as f64;
    let dc = loc_i.1 as f64 - loc_j.1 as f64;
    if (dr * dr + dc * dc).sqrt() > radius {
        return 0.0;
    }
    (-euclid(p_i, p_j) / sigma).exp()
}

#[inline]
fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// For every patch, the same-group patches within `radius` (itself included).
/// These are the index sets `Q_l` of the π* update and the sparsity pattern
/// of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    radius: f64,
    offsets: Vec<usize>,
    indices: Vec<u32>,
}

impl Neighborhoods {
    pub fn build(grouping: &PatchGrouping, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::param(format!("neighborhood radius {radius} must be finite and ≥ 0")));
        }
        let side = grouping.image_side();
        let reach = radius.floor() as isize;
        let r2 = radius * radius;
        let mut offsets = Vec::with_capacity(side * side + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for i in 0..side * side {
            let (ri, ci) = ((i / side) as isize, (i % side) as isize);
            let g = grouping.group_of(i);
            for r in (ri - reach).max(0)..=(ri + reach).min(side as isize - 1) {
                for c in (ci - reach).max(0)..=(ci + reach).min(side as isize - 1) {
                    let (dr, dc) = ((r - ri) as f64, (c - ci) as f64);
                    if dr * dr + dc * dc > r2 {
                        continue;
                    }
                    let j = r as usize * side + c as usize;
                    if grouping.group_of(j) == g {
                        indices.push(j as u32);
                    }
                }
            }
            offsets.push(indices.len());
        }
        Ok(Neighborhoods {
            radius,
            offsets,
            indices,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn total_entries(&self) -> usize {
        self.indices.len()
    }
}

/// Row-stochastic patch dependence matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceMatrix {
    pub(crate) offsets: Vec<usize>,
    pub(crate) cols: Vec<u32>,
    pub(crate) weights: Vec<f64>,
    pub(crate) sigma: f64,
    pub(crate) radius: f64,
}

impl DependenceMatrix {
    /// Self-only rows: dependence between patches switched off.
    pub fn identity(n: usize) -> Self {
        DependenceMatrix {
            offsets: (0..=n).collect(),
            cols: (0..n as u32).collect(),
            weights: vec![1.0; n],
            sigma: f64::NAN,
            radius: 0.0,
        }
    }

    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>, sigma: f64, radius: f64) -> Result<Self> {
        let n = rows.len();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        for row in rows {
            for (j, w) in row {
                if j as usize >= n || !(w.is_finite() && w >= 0.0) {
                    return Err(Error::format("dependence entry out of range"));
                }
                cols.push(j);
                weights.push(w);
            }
            offsets.push(cols.len());
        }
        Ok(DependenceMatrix {
            offsets,
            cols,
            weights,
            sigma,
            radius,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.cols[a..b], &self.weights[a..b])
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.num_rows())
            .map(|i| (self.row(i).1.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `A_ij = K(p_i, q_j) / Σ_j' K(p_i, q_j')` where `p` are the current patches
/// and `q` the reference patches. Rows whose kernel mass vanishes fall back to
/// weight one on the patch itself.
pub fn build_dependence(
    current: &PatchMatrix,
    reference: &PatchMatrix,
    neighborhoods: &Neighborhoods,
    sigma: f64,
) -> Result<DependenceMatrix> {
    if current.num_patches() != reference.num_patches()
        || current.column_len() != reference.column_len()
    {
        return Err(Error::dim("current and reference patch sets differ in shape"));
    }
    if current.num_patches() != neighborhoods.num_rows() {
        return Err(Error::dim("neighborhoods do not match the patch count"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("kernel width {sigma} must be positive")));
    }
    let n = current.num_patches();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(neighborhoods.total_entries());
    let mut weights = Vec::with_capacity(neighborhoods.total_entries());
    offsets.push(0);
    let mut row_buf = Vec::new();
    for i in 0..n {
        let p = current.column(i);
        row_buf.clear();
        let mut total = 0.0;
        for &j in neighborhoods.row(i) {
            let k = (-euclid(p, reference.column(j as usize)) / sigma).exp();
            total += k;
            row_buf.push((j, k));
        }
        if total > 0.0 && total.is_finite() {
            for &(j, k) in &row_buf {
                if k > 0.0 {
                    cols.push(j);
                    weights.push(k / total);
                }
            }
        } else {
            cols.push(i as u32);
            weights.push(1.0);
        }
        offsets.push(cols.len());
    }
    Ok(DependenceMatrix {
        offsets,
        cols,
        weights,
        sigma,
        radius: neighborhoods.radius(),
    })
}

/// Median of `‖p_i − p_j‖` over sampled within-radius same-group pairs.
/// Falls back to `1.0` when no such pair has a positive distance.
pub fn median_kernel_width(patches: &PatchMatrix, neighborhoods: &Neighborhoods, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, &[rng::TAG_SIGMA]);
    let n = patches.num_patches();
    let mut dists = Vec::with_capacity(4096);
    let mut attempts = 0;
    while dists.len() < 4096 && attempts < 32_768 {
        attempts += 1;
        let i = rng.random_range(0..n);
        let row = neighborhoods.row(i);
        if row.len() < 2 {
            continue;
        }
        let j = row[rng.random_range(0..row.len())] as usize;
        if j == i {
            continue;
        }
        let d = euclid(patches.column(i), patches.column(j));
        if d > 0.0 {
            dists.push(d);
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    dists[dists.len() / 2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::kmeans_group;
    use crate::image::ComplexImage;
    use crate::linops::{extract_patches, extract_real_patches};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_image(side: usize, seed: u64) -> ComplexImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexImage::from_fn(side, |r, c| {
            Complex64::new(((r as f64) * 0.3).sin() * ((c as f64) * 0.2).cos() + 0.1 * rng.random::<f64>(), 0.0)
        })
    }

    #[test]
    fn kernel_values() {
        let p = [1.0, 2.0, 3.0];
        assert_eq!(similarity_kernel(&p, &p, (0, 0), (3, 4), 2, 2, 0.7, 5.0), 1.0);
        assert_eq!(similarity_kernel(&p, &p, (0, 0), (0, 0), 1, 2, 0.7, 5.0), 0.0);
        assert_eq!(similarity_kernel(&p, &p, (0, 0), (3, 5), 2, 2, 0.7, 5.0), 0.0);
        let q = [1.0, 2.0, 3.5];
        let k = similarity_kernel(&p, &q, (1, 1), (1, 1), 0, 0, 0.5, 13.0);
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn neighborhoods_respect_group_and_radius() {
        let img = test_image(16, 1);
        let p = extract_patches(&img, 4).unwrap();
        let g = kmeans_group(&p, 3, 7, 20).unwrap();
        let nb = Neighborhoods::build(&g, 2.5).unwrap();
        for i in 0..256 {
            let row = nb.row(i);
            assert!(row.contains(&(i as u32)));
            for j in 0..256 {
                let (dr, dc) = ((i / 16) as f64 - (j / 16) as f64, (i % 16) as f64 - (j % 16) as f64);
                let expected = g.group_of(i) == g.group_of(j) && (dr * dr + dc * dc).sqrt() <= 2.5;
                assert_eq!(row.contains(&(j as u32)), expected);
            }
        }
    }

    #[test]
    fn rows_are_stochastic_and_sparse_as_required() {
        let img = test_image(32, 2);
        let reference = test_image(32, 3);
        let p = extract_patches(&img, 16).unwrap();
        let q = extract_patches(&reference, 16).unwrap();
        let g = kmeans_group(&q, 4, 1, 30).unwrap();
        let nb = Neighborhoods::build(&g, 13.0).unwrap();
        let sigma = median_kernel_width(&q, &nb, 0);
        let a = build_dependence(&p, &q, &nb, sigma).unwrap();
        assert!(a.max_row_sum_error() <= 1e-12);
        for i in 0..a.num_rows() {
            let (cols, w) = a.row(i);
            for (&j, &v) in cols.iter().zip(w) {
                assert!(v > 0.0);
                let j = j as usize;
                assert_eq!(g.group_of(i), g.group_of(j));
                let (dr, dc) = ((i / 32) as f64 - (j / 32) as f64, (i % 32) as f64 - (j % 32) as f64);
                assert!((dr * dr + dc * dc).sqrt() <= 13.0);
            }
        }
    }

    #[test]
    fn isolated_patch_gets_self_row() {
        let img = test_image(8, 4);
        let p = extract_patches(&img, 4).unwrap();
        let g = kmeans_group(&p, 2, 1, 10).unwrap();
        let nb = Neighborhoods::build(&g, 0.0).unwrap();
        let a = build_dependence(&p, &p, &nb, 1.0).unwrap();
        for i in 0..64 {
            assert_eq!(a.row(i), (&[i as u32][..], &[1.0][..]));
        }
    }

    #[test]
    fn three_colocated_patches_match_hand_normalisation() {
        // 1x4 strip of single-pixel patches: distances are |v_i − v_j|.
        let img = ComplexImage::from_vec(
            2,
            vec![0.0, 0.3, 1.0, 9.0].into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        )
        .unwrap();
        let p = extract_real_patches(&img, 1).unwrap();
        let g = PatchGrouping::from_parts(2, 2, vec![0, 0, 0, 1], vec![vec![0.0], vec![0.0]], 1).unwrap();
        let nb = Neighborhoods::build(&g, 2.0).unwrap();
        let sigma = 0.5;
        let a = build_dependence(&p, &p, &nb, sigma).unwrap();
        let k = |d: f64| (-d / sigma).exp();
        let raw = [k(0.0), k(0.3), k(1.0)];
        let total: f64 = raw.iter().sum();
        let (cols, w) = a.row(0);
        assert_eq!(cols, &[0, 1, 2]);
        for (got, r) in w.iter().zip(raw) {
            assert!((got - r / total).abs() < 1e-15);
        }
        assert_eq!(a.row(3), (&[3u32][..], &[1.0][..]));
    }

    #[test]
    fn median_width_is_positive() {
        let img = test_image(16, 5);
        let p = extract_patches(&img, 4).unwrap();
        let g = PatchGrouping::single(16, p.column_len(), 1);
        let nb = Neighborhoods::build(&g, 3.0).unwrap();
        assert!(median_kernel_width(&p, &nb, 1) > 0.0);
        let flat = extract_patches(&ComplexImage::zeros(16), 4).unwrap();
        assert_eq!(median_kernel_width(&flat, &nb, 1), 1.0);
    }
}
