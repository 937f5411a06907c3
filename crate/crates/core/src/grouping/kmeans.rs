use rand::Rng;

use crate::linops::PatchMatrix;
use crate::rng;
use crate::{Error, Result};

/// Patch → group assignment computed once from a guide image.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrouping {
    pub(crate) image_side: usize,
    pub(crate) num_groups: usize,
    pub(crate) assignment: Vec<u32>,
    pub(crate) centroids: Vec<Vec<f64>>,
    pub(crate) guide_frame: usize,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub(crate) objective_history: Vec<f64>,
}

impl PatchGrouping {
    /// Everything in one group.
    pub fn single(image_side: usize, column_len: usize, guide_frame: usize) -> Self {
        PatchGrouping {
            image_side,
            num_groups: 1,
            assignment: vec![0; image_side * image_side],
            centroids: vec![vec![0.0; column_len]],
            guide_frame,
            objective_history: Vec::new(),
        }
    }

    pub fn from_parts(
        image_side: usize,
        num_groups: usize,
        assignment: Vec<u32>,
        centroids: Vec<Vec<f64>>,
        guide_frame: usize,
    ) -> Result<Self> {
        if assignment.len() != image_side * image_side {
            return Err(Error::dim("assignment length differs from patch count"));
        }
        if num_groups == 0 || centroids.len() != num_groups {
            return Err(Error::dim("centroid count differs from group count"));
        }
        let mut sizes = vec![0usize; num_groups];
        for &g in &assignment {
            let g = g as usize;
            if g >= num_groups {
                return Err(Error::format(format!("group id {g} out of range")));
            }
            sizes[g] += 1;
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::format("grouping has an empty group"));
        }
        Ok(PatchGrouping {
            image_side,
            num_groups,
            assignment,
            centroids,
            guide_frame,
            objective_history: Vec::new(),
        })
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn num_patches(&self) -> usize {
        self.assignment.len()
    }

    pub fn image_side(&self) -> usize {
        self.image_side
    }

    #[inline]
    pub fn group_of(&self, patch: usize) -> usize {
        self.assignment[patch] as usize
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn guide_frame(&self) -> usize {
        self.guide_frame
    }

    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    /// Sorted patch indices per group.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_groups];
        for (i, &g) in self.assignment.iter().enumerate() {
            out[g as usize].push(i);
        }
        out
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_groups];
        for &g in &self.assignment {
            sizes[g as usize] += 1;
        }
        sizes
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seeds<R: Rng>(patches: &PatchMatrix, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = patches.num_patches();
    let mut centroids = vec![patches.column(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(patches.column(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = patches.column(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(patches.column(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(patches: &PatchMatrix, centroids: &[Vec<f64>], labels: &mut [u32]) -> bool {
    let mut changed = false;
    for (i, label) in labels.iter_mut().enumerate() {
        let col = patches.column(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (g, c) in centroids.iter().enumerate() {
            let d = sq_dist(col, c);
            if d < best_d {
                best_d = d;
                best = g;
            }
        }
        if *label != best as u32 {
            *label = best as u32;
            changed = true;
        }
    }
    changed
}

fn update_centroids(patches: &PatchMatrix, labels: &[u32], centroids: &mut [Vec<f64>]) -> Vec<usize> {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for c in centroids.iter_mut() {
        c.iter_mut().for_each(|v| *v = 0.0);
    }
    for (i, &g) in labels.iter().enumerate() {
        let g = g as usize;
        counts[g] += 1;
        for (acc, v) in centroids[g].iter_mut().zip(patches.column(i)) {
            *acc += v;
        }
    }
    for (c, &m) in centroids.iter_mut().zip(&counts) {
        if m > 0 {
            c.iter_mut().for_each(|v| *v /= m as f64);
        }
    }
    counts
}

/// Moves the point farthest from its centroid in the largest cluster into each
/// empty cluster.
fn repair_empty(patches: &PatchMatrix, labels: &mut [u32], centroids: &mut [Vec<f64>], counts: &mut [usize]) {
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let largest = (0..counts.len()).max_by_key(|&g| (counts[g], std::cmp::Reverse(g))).unwrap();
        let far = (0..labels.len())
            .filter(|&i| labels[i] as usize == largest)
            .max_by(|&a, &b| {
                sq_dist(patches.column(a), &centroids[largest])
                    .total_cmp(&sq_dist(patches.column(b), &centroids[largest]))
                    .then(b.cmp(&a))
            })
            .unwrap();
        labels[far] = empty as u32;
        counts[largest] -= 1;
        counts[empty] = 1;
        centroids[empty] = patches.column(far).to_vec();
        // recenter the donor without the moved point
        let m = counts[largest] as f64;
        for (c, v) in centroids[largest].iter_mut().zip(patches.column(far)) {
            *c = (*c * (m + 1.0) - v) / m;
        }
    }
}

fn wcss(patches: &PatchMatrix, labels: &[u32], centroids: &[Vec<f64>]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &g)| sq_dist(patches.column(i), &centroids[g as usize]))
        .sum()
}

/// Lloyd's k-means with k-means++ seeding on patch intensities.
pub fn kmeans_group(
    patches: &PatchMatrix,
    num_groups: usize,
    seed: u64,
    max_iters: usize,
) -> Result<PatchGrouping> {
    let n = patches.num_patches();
    if num_groups == 0 {
        return Err(Error::param("number of groups must be at least 1"));
    }
    if num_groups > n {
        return Err(Error::param(format!(
            "{num_groups} groups requested for {n} patches"
        )));
    }
    let mut rng = rng::stream(seed, &[rng::TAG_KMEANS]);
    let mut centroids = plus_plus_seeds(patches, num_groups, &mut rng);
    let mut labels = vec![u32::MAX; n];
    let mut history = Vec::new();
    for _ in 0..max_iters.max(1) {
        let changed = assign(patches, &centroids, &mut labels);
        let mut counts = update_centroids(patches, &labels, &mut centroids);
        repair_empty(patches, &mut labels, &mut centroids, &mut counts);
        history.push(wcss(patches, &labels, &centroids));
        if !changed {
            break;
        }
    }
    Ok(PatchGrouping {
        image_side: patches.image_side(),
        num_groups,
        assignment: labels,
        centroids,
        guide_frame: 1,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ComplexImage;
    use crate::linops::extract_patches;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noisy_image(side: usize, seed: u64) -> ComplexImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexImage::from_fn(side, |r, c| {
            let base = if (r / 8 + c / 8) % 2 == 0 { 0.2 } else { 0.8 };
            Complex64::new(base + 0.05 * rng.random::<f64>(), 0.0)
        })
    }

    #[test]
    fn single_group_takes_everything() {
        let p = extract_patches(&noisy_image(16, 1), 4).unwrap();
        let g = kmeans_group(&p, 1, 0, 10).unwrap();
        assert!(g.assignment().iter().all(|&a| a == 0));
    }

    #[test]
    fn too_many_groups_rejected() {
        let p = extract_patches(&noisy_image(4, 1), 4).unwrap();
        assert!(kmeans_group(&p, 17, 0, 10).is_err());
        assert!(kmeans_group(&p, 0, 0, 10).is_err());
    }

    #[test]
    fn deterministic_monotone_and_nonempty() {
        let p = extract_patches(&noisy_image(32, 2), 16).unwrap();
        let a = kmeans_group(&p, 11, 42, 50).unwrap();
        let b = kmeans_group(&p, 11, 42, 50).unwrap();
        assert_eq!(a, b);
        assert!(a.group_sizes().iter().all(|&s| s > 0));
        for w in a.objective_history().windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs());
        }
    }

    #[test]
    fn two_pairs_match_best_partition() {
        // Four 1-pixel "patches": two tight pairs far apart.
        let img = ComplexImage::from_vec(
            2,
            vec![0.0, 0.1, 5.0, 5.2].into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        )
        .unwrap();
        let p = crate::linops::extract_real_patches(&img, 1).unwrap();
        let g = kmeans_group(&p, 2, 3, 20).unwrap();
        // exhaustive oracle over all 2-partitions into nonempty sets
        let vals: Vec<f64> = (0..4).map(|i| p.column(i)[0]).collect();
        let mut best = (f64::INFINITY, 0u32);
        for bits in 1u32..15 {
            let mut cost = 0.0;
            for side in [0, 1] {
                let members: Vec<f64> = (0..4).filter(|i| (bits >> i) & 1 == side).map(|i| vals[i]).collect();
                let mean = members.iter().sum::<f64>() / members.len() as f64;
                cost += members.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            }
            if cost < best.0 {
                best = (cost, bits);
            }
        }
        let same = |a: usize, b: usize| ((best.1 >> a) & 1) == ((best.1 >> b) & 1);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(g.group_of(a) == g.group_of(b), same(a, b));
            }
        }
    }

    #[test]
    fn repair_fills_empty_clusters() {
        // identical patches force empty clusters after the first assignment
        let img = ComplexImage::from_fn(8, |_, _| Complex64::new(0.5, 0.0));
        let p = extract_patches(&img, 4).unwrap();
        let g = kmeans_group(&p, 5, 0, 10).unwrap();
        assert!(g.group_sizes().iter().all(|&s| s > 0));
    }
}
