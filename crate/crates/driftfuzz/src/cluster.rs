//! k-means partitioning of the feature space into histogram bins.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{euclidean_slices, ObservationSet};
use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// K cluster centroids acting as histogram bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    centroids: Vec<f64>,
    k: usize,
    dim: usize,
    inertia: f64,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sum of squared distances of the training points to their nearest
    /// centroid at convergence.
    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn centroid(&self, z: usize) -> &[f64] {
        &self.centroids[z * self.dim..(z + 1) * self.dim]
    }

    pub fn centroids(&self) -> impl Iterator<Item = &[f64]> {
        self.centroids.chunks_exact(self.dim)
    }
}

/// Lloyd iterations from k-means++ seeding until the assignment fixpoint or
/// `max_iter` passes. Empty clusters are repaired by reseeding from the point
/// farthest from its assigned centroid.
pub fn kmeans_fit(
    data: &ObservationSet,
    k: usize,
    rng: &RandomSource,
    max_iter: usize,
) -> Result<Partition> {
    let m = data.n_rows();
    let dim = data.n_cols();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    if k > m {
        return Err(Error::KTooLarge { k, m });
    }
    let mut points = Vec::with_capacity(m);
    for i in 0..m {
        points.push(data.row(i).to_complete_vec()?);
    }

    let mut gen = rng.rng();
    let mut centroids = seed_plus_plus(&points, k, &mut gen);
    let mut assignment = vec![usize::MAX; m];
    let mut prev_inertia = f64::INFINITY;
    let mut inertia = f64::INFINITY;

    for _iter in 0..max_iter {
        // Assignment step.
        let mut changed = false;
        inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (z, d2) = nearest_sq(&centroids, dim, p);
            inertia += d2;
            if assignment[i] != z {
                assignment[i] = z;
                changed = true;
            }
        }
        debug_assert!(
            inertia <= prev_inertia * (1.0 + 1e-9) + 1e-12,
            "inertia increased: {prev_inertia} -> {inertia}"
        );
        prev_inertia = inertia;
        if !changed {
            break;
        }

        // Update step.
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            let z = assignment[i];
            counts[z] += 1;
            for (s, &v) in sums[z * dim..(z + 1) * dim].iter_mut().zip(p) {
                *s += v;
            }
        }
        for z in 0..k {
            if counts[z] == 0 {
                // Reseed from the farthest point overall.
                let far = farthest_point(&points, &centroids, dim, &assignment);
                sums[z * dim..(z + 1) * dim].copy_from_slice(&points[far]);
                counts[z] = 1;
                assignment[far] = z;
            }
            let c = counts[z] as f64;
            for s in &mut sums[z * dim..(z + 1) * dim] {
                *s /= c;
            }
        }
        centroids = sums;
    }

    for a in 0..k {
        for b in a + 1..k {
            if centroids[a * dim..(a + 1) * dim] == centroids[b * dim..(b + 1) * dim] {
                return Err(Error::InvalidParameter(format!(
                    "clusters {a} and {b} collapsed onto the same centroid; \
                     the data has fewer than {k} distinct points"
                )));
            }
        }
    }

    Ok(Partition {
        centroids,
        k,
        dim,
        inertia,
    })
}

/// Distance-squared weighted seeding.
fn seed_plus_plus(points: &[Vec<f64>], k: usize, gen: &mut impl Rng) -> Vec<f64> {
    let m = points.len();
    let dim = points[0].len();
    let mut centroids = Vec::with_capacity(k * dim);
    let first = gen.random_range(0..m);
    centroids.extend_from_slice(&points[first]);

    let mut d2 = vec![0.0f64; m];
    for _ in 1..k {
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (_, dist2) = nearest_sq(&centroids, dim, p);
            d2[i] = dist2;
            total += dist2;
        }
        let pick = if total > 0.0 {
            let mut u = gen.random_range(0.0..total);
            let mut chosen = m - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            // All remaining points coincide with a centroid; take the first
            // point not yet chosen so that k = m on distinct data selects
            // every point.
            (0..m)
                .find(|&i| d2[i] == 0.0 && !is_centroid(&centroids, dim, &points[i]))
                .unwrap_or(0)
        };
        centroids.extend_from_slice(&points[pick]);
    }
    centroids
}

fn is_centroid(centroids: &[f64], dim: usize, p: &[f64]) -> bool {
    centroids.chunks_exact(dim).any(|c| c == p)
}

fn nearest_sq(centroids: &[f64], dim: usize, p: &[f64]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d2 = f64::INFINITY;
    for (z, c) in centroids.chunks_exact(dim).enumerate() {
        let mut d2 = 0.0;
        for (a, b) in c.iter().zip(p) {
            let diff = a - b;
            d2 += diff * diff;
        }
        if d2 < best_d2 {
            best_d2 = d2;
            best = z;
        }
    }
    (best, best_d2)
}

fn farthest_point(
    points: &[Vec<f64>],
    centroids: &[f64],
    dim: usize,
    assignment: &[usize],
) -> usize {
    let mut far = 0usize;
    let mut far_d2 = -1.0;
    for (i, p) in points.iter().enumerate() {
        let z = assignment[i];
        let c = &centroids[z * dim..(z + 1) * dim];
        let d2: f64 = c
            .iter()
            .zip(p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2 > far_d2 {
            far_d2 = d2;
            far = i;
        }
    }
    far
}

/// Index of the nearest centroid to a complete point; ties break to the
/// lowest index.
pub fn assign_nearest(partition: &Partition, point: &[f64]) -> usize {
    debug_assert_eq!(point.len(), partition.dim());
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (z, c) in partition.centroids().enumerate() {
        let d = euclidean_slices(c, point);
        if d < best_d {
            best_d = d;
            best = z;
        }
    }
    best
}

/// Default bin count `max(2, floor(m / 50))`, keeping expected cell counts
/// in the chi-square table around 50 per bin for balanced clusters.
pub fn default_bin_count(m: usize) -> Result<usize> {
    if m < 100 {
        return Err(Error::SampleTooSmall(m));
    }
    Ok((m / 50).max(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ObservationSet;
    use rand::Rng;

    fn complete(points: &[[f64; 2]]) -> ObservationSet {
        let values: Vec<f64> = points.iter().flatten().copied().collect();
        ObservationSet::complete(values, points.len(), 2, ObservationSet::default_names(2))
            .unwrap()
    }

    #[test]
    fn k_equals_m_reproduces_points() {
        let d = complete(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]);
        let p = kmeans_fit(&d, 4, &RandomSource::new(1), 100).unwrap();
        assert!(p.inertia() < 1e-20);
        for i in 0..4 {
            let point = d.row(i).to_complete_vec().unwrap();
            let z = assign_nearest(&p, &point);
            assert_eq!(p.centroid(z), point.as_slice());
        }
    }

    #[test]
    fn two_separated_clouds() {
        for seed in 0..5u64 {
            let mut g = RandomSource::new(seed).rng();
            let mut values = Vec::new();
            for _ in 0..100 {
                values.push(10.0 + g.random_range(-1.0..1.0));
                values.push(10.0 + g.random_range(-1.0..1.0));
            }
            for _ in 0..100 {
                values.push(-10.0 + g.random_range(-1.0..1.0));
                values.push(-10.0 + g.random_range(-1.0..1.0));
            }
            let d = ObservationSet::complete(values, 200, 2, ObservationSet::default_names(2))
                .unwrap();
            let p = kmeans_fit(&d, 2, &RandomSource::new(seed + 100), 100).unwrap();
            let mut dists: Vec<f64> = p
                .centroids()
                .map(|c| euclidean_slices(c, &[10.0, 10.0]).min(euclidean_slices(c, &[-10.0, -10.0])))
                .collect();
            dists.sort_by(f64::total_cmp);
            assert!(dists[1] < 0.5, "seed {seed}: centroid off by {}", dists[1]);
        }
    }

    #[test]
    fn k_bounds() {
        let d = complete(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]);
        assert!(matches!(
            kmeans_fit(&d, 1, &RandomSource::new(0), 10),
            Err(Error::KTooSmall(1))
        ));
        assert!(matches!(
            kmeans_fit(&d, 4, &RandomSource::new(0), 10),
            Err(Error::KTooLarge { k: 4, m: 3 })
        ));
    }

    #[test]
    fn assign_exact_centroid_and_ties() {
        let d = complete(&[[0.0, 0.0], [10.0, 0.0], [5.0, 8.0], [1.0, 1.0], [9.0, 1.0]]);
        let p = kmeans_fit(&d, 3, &RandomSource::new(3), 100).unwrap();
        for z in 0..p.k() {
            assert_eq!(assign_nearest(&p, p.centroid(z)), z);
        }
        // Hand-built partition for the tie rule: equidistant between
        // centroids 1 and 2 resolves to 1.
        let tied = Partition {
            centroids: vec![100.0, 0.0, -1.0, 0.0, 1.0, 0.0],
            k: 3,
            dim: 2,
            inertia: 0.0,
        };
        assert_eq!(assign_nearest(&tied, &[0.0, 0.0]), 1);
    }

    #[test]
    fn one_dimensional_nearest() {
        let p = Partition {
            centroids: vec![0.0, 10.0],
            k: 2,
            dim: 1,
            inertia: 0.0,
        };
        assert_eq!(assign_nearest(&p, &[2.0]), 0);
    }

    #[test]
    fn refit_same_seed_is_identical() {
        let mut g = RandomSource::new(17).rng();
        let values: Vec<f64> = (0..400).map(|_| g.random_range(-3.0..3.0)).collect();
        let d =
            ObservationSet::complete(values, 200, 2, ObservationSet::default_names(2)).unwrap();
        let a = kmeans_fit(&d, 5, &RandomSource::new(9), 100).unwrap();
        let b = kmeans_fit(&d, 5, &RandomSource::new(9), 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_bin_count_rule() {
        assert_eq!(default_bin_count(1000).unwrap(), 20);
        assert_eq!(default_bin_count(100).unwrap(), 2);
        assert_eq!(default_bin_count(149).unwrap(), 2);
        assert!(matches!(
            default_bin_count(99),
            Err(Error::SampleTooSmall(99))
        ));
    }

    #[test]
    fn rejects_missing_cells() {
        let d = ObservationSet::from_parts(
            vec![1.0, f64::NAN, 2.0, 3.0],
            vec![false, true, false, false],
            2,
            2,
            ObservationSet::default_names(2),
        )
        .unwrap();
        assert!(matches!(
            kmeans_fit(&d, 2, &RandomSource::new(0), 10),
            Err(Error::MissingValueInDistance)
        ));
    }

    #[test]
    fn serializes_to_json() {
        let d = complete(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]);
        let p = kmeans_fit(&d, 2, &RandomSource::new(1), 100).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: Partition = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
