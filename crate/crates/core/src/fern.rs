//! Random ferns over pixel-difference features.
//!
//! A fern of depth `F` compares `F` selected features against thresholds and
//! reads one of `2^F` shape updates. Training follows the explicit shape
//! regression recipe: each slot takes the feature most correlated with a fresh
//! random projection of the residuals, its threshold is drawn between the 5th
//! and 95th percentile of that feature, and every bin stores the shrunk mean
//! residual `Σr / (n + κ)` of the samples falling into it.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math;
use crate::par;

/// Deepest supported fern (`2^16` bins).
pub const MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Fern {
    slots: Vec<u32>,
    thresholds: Vec<i32>,
    /// `2^F` updates of length `dim`, bin-major.
    updates: Vec<f64>,
    dim: usize,
}

impl Fern {
    pub fn new(slots: Vec<u32>, thresholds: Vec<i32>, updates: Vec<f64>, dim: usize) -> Result<Self> {
        let depth = slots.len();
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::InvalidConfig(alloc::format!("fern depth must be in 1..={MAX_DEPTH}, got {depth}")));
        }
        if thresholds.len() != depth {
            return Err(Error::LengthMismatch { what: "fern thresholds", left: thresholds.len(), right: depth });
        }
        if dim == 0 {
            return Err(Error::Empty("fern update dimension"));
        }
        let expected = (1usize << depth) * dim;
        if updates.len() != expected {
            return Err(Error::LengthMismatch { what: "fern bin updates", left: updates.len(), right: expected });
        }
        if !updates.iter().all(|u| u.is_finite()) {
            return Err(Error::NonFinite("fern bin updates"));
        }
        Ok(Fern { slots, thresholds, updates, dim })
    }

    /// A fern whose every bin is the zero update.
    pub fn zero(slots: Vec<u32>, thresholds: Vec<i32>, dim: usize) -> Result<Self> {
        let n = (1usize << slots.len().min(MAX_DEPTH)) * dim;
        Fern::new(slots, thresholds, vec![0.0; n], dim)
    }

    pub fn depth(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[u32] {
        &self.slots
    }

    pub fn thresholds(&self) -> &[i32] {
        &self.thresholds
    }

    /// All bin updates, bin-major.
    pub fn updates(&self) -> &[f64] {
        &self.updates
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bin_count(&self) -> usize {
        1 << self.slots.len()
    }

    pub fn update(&self, bin: usize) -> &[f64] {
        &self.updates[bin * self.dim..(bin + 1) * self.dim]
    }

    #[inline]
    pub(crate) fn bin_unchecked(&self, value: impl Fn(usize) -> i32) -> usize {
        let mut bin = 0;
        for (f, (&slot, &thr)) in self.slots.iter().zip(&self.thresholds).enumerate() {
            if value(slot as usize) >= thr {
                bin |= 1 << f;
            }
        }
        bin
    }

    pub fn max_slot(&self) -> usize {
        self.slots.iter().copied().max().unwrap_or(0) as usize
    }
}

/// `Σ_f [features[slot_f] ≥ threshold_f] · 2^f`.
pub fn fern_bin(features: &[i32], fern: &Fern) -> Result<usize> {
    let max = fern.max_slot();
    if max >= features.len() {
        return Err(Error::IndexOutOfRange { index: max, len: features.len() });
    }
    Ok(fern.bin_unchecked(|slot| features[slot]))
}

/// Column-major matrix of integer features, one row per training instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i32>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<i32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch { what: "feature rows", left: r.len(), right: cols });
            }
        }
        let mut data = vec![0; rows.len() * cols];
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                data[j * rows.len() + i] = v;
            }
        }
        Ok(FeatureMatrix { rows: rows.len(), cols, data })
    }

    /// Build from row-major data.
    pub(crate) fn from_row_major(rows: usize, cols: usize, row_major: &[i32]) -> Self {
        debug_assert_eq!(row_major.len(), rows * cols);
        let mut data = vec![0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                data[j * rows + i] = row_major[i * cols + j];
            }
        }
        FeatureMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[i32] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn row(&self, row: usize) -> Vec<i32> {
        (0..self.cols).map(|c| self.get(row, c)).collect()
    }
}

/// Fern training over a fixed feature matrix. Column statistics are computed
/// once and shared by every fern of a cascade stage.
pub struct FernTrainer<'a> {
    features: &'a FeatureMatrix,
    /// `1 / ‖col − mean‖`, zero for constant columns.
    inv_spread: Vec<f64>,
}

/// A trained fern with the bin of every training row.
pub struct FittedFern {
    pub fern: Fern,
    pub bins: Vec<u32>,
}

impl<'a> FernTrainer<'a> {
    pub fn new(features: &'a FeatureMatrix) -> Self {
        let n = features.rows as f64;
        let inv_spread = par::map_indexed(features.cols, |j| {
            let col = features.column(j);
            let mean = col.iter().map(|&v| v as f64).sum::<f64>() / n;
            let ss: f64 = col.iter().map(|&v| (v as f64 - mean) * (v as f64 - mean)).sum();
            if ss > 0.0 {
                1.0 / math::sqrt(ss)
            } else {
                0.0
            }
        });
        FernTrainer { features, inv_spread }
    }

    pub fn train<R: Rng + ?Sized>(
        &self,
        residuals: &[f64],
        dim: usize,
        depth: usize,
        shrinkage: f64,
        rng: &mut R,
    ) -> Result<FittedFern> {
        let m = self.features;
        let n = m.rows;
        if n == 0 {
            return Err(Error::Empty("fern training rows"));
        }
        if m.cols == 0 {
            return Err(Error::Empty("fern training features"));
        }
        if dim == 0 || residuals.len() != n * dim {
            return Err(Error::LengthMismatch { what: "fern residuals", left: residuals.len(), right: n * dim });
        }
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::InvalidConfig(alloc::format!("fern depth must be in 1..={MAX_DEPTH}, got {depth}")));
        }
        if !(shrinkage.is_finite() && shrinkage >= 0.0) {
            return Err(Error::InvalidConfig("shrinkage must be finite and non-negative".into()));
        }

        let mut slots = Vec::with_capacity(depth);
        let mut thresholds = Vec::with_capacity(depth);
        let mut centred = vec![0.0; n];
        let mut scratch: Vec<i32> = Vec::with_capacity(n);
        for _ in 0..depth {
            let direction = random_unit(dim, rng);
            for (c, r) in centred.iter_mut().zip(residuals.chunks_exact(dim)) {
                *c = r.iter().zip(&direction).map(|(a, b)| a * b).sum();
            }
            let mean = centred.iter().sum::<f64>() / n as f64;
            centred.iter_mut().for_each(|c| *c -= mean);

            let scores = par::map_indexed(m.cols, |j| {
                let cov: f64 = m.column(j).iter().zip(&centred).map(|(&v, &c)| v as f64 * c).sum();
                libm::fabs(cov) * self.inv_spread[j]
            });
            let mut best = None;
            let mut best_score = 0.0;
            for (j, &s) in scores.iter().enumerate() {
                if s > best_score {
                    best_score = s;
                    best = Some(j);
                }
            }
            let slot = match best {
                Some(j) => j,
                None => rng.random_range(0..m.cols),
            };

            scratch.clear();
            scratch.extend_from_slice(m.column(slot));
            let lo_rank = (0.05 * (n - 1) as f64) as usize;
            let hi_rank = math::ceil(0.95 * (n - 1) as f64) as usize;
            let lo = *scratch.select_nth_unstable(lo_rank).1;
            let hi = *scratch.select_nth_unstable(hi_rank).1;
            slots.push(slot as u32);
            thresholds.push(rng.random_range(lo..=hi));
        }

        let bins: Vec<u32> = (0..n)
            .map(|row| {
                let mut bin = 0u32;
                for (f, (&slot, &thr)) in slots.iter().zip(&thresholds).enumerate() {
                    if m.get(row, slot as usize) >= thr {
                        bin |= 1 << f;
                    }
                }
                bin
            })
            .collect();
        let updates = shrunk_bin_means(&bins, residuals, dim, depth, shrinkage);
        let fern = Fern::new(slots, thresholds, updates, dim)?;
        Ok(FittedFern { fern, bins })
    }
}

/// Per-bin `Σ residual / (count + shrinkage)`; empty bins get zero.
fn shrunk_bin_means(bins: &[u32], residuals: &[f64], dim: usize, depth: usize, shrinkage: f64) -> Vec<f64> {
    let nbins = 1usize << depth;
    let mut sums = vec![0.0; nbins * dim];
    let mut counts = vec![0usize; nbins];
    for (&b, r) in bins.iter().zip(residuals.chunks_exact(dim)) {
        let b = b as usize;
        counts[b] += 1;
        for (s, v) in sums[b * dim..(b + 1) * dim].iter_mut().zip(r) {
            *s += v;
        }
    }
    for (b, &count) in counts.iter().enumerate() {
        let denom = count as f64 + shrinkage;
        let bucket = &mut sums[b * dim..(b + 1) * dim];
        if count == 0 || denom <= 0.0 {
            bucket.iter_mut().for_each(|s| *s = 0.0);
        } else {
            bucket.iter_mut().for_each(|s| *s /= denom);
        }
    }
    sums
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = math::sqrt(v.iter().map(|x| x * x).sum());
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Train one fern on `features` (one row per instance) against row-major
/// `residuals` of width `dim`.
pub fn train_fern<R: Rng + ?Sized>(
    features: &FeatureMatrix,
    residuals: &[f64],
    dim: usize,
    depth: usize,
    shrinkage: f64,
    rng: &mut R,
) -> Result<Fern> {
    Ok(FernTrainer::new(features).train(residuals, dim, depth, shrinkage, rng)?.fern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng as ChaCha;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn bin_examples() {
        let fern = Fern::zero(vec![0, 1, 2], vec![0, 0, 0], 2).unwrap();
        assert_eq!(fern_bin(&[5, -2, 7], &fern).unwrap(), 5);
        assert_eq!(fern_bin(&[-1, -2, -7], &fern).unwrap(), 0);
        let fern = Fern::zero(vec![3, 2, 1, 0], vec![1, 2, 3, 4], 2).unwrap();
        assert_eq!(fern_bin(&[4, 3, 2, 1], &fern).unwrap(), 15);
        assert_eq!(fern_bin(&[4, 3, 2], &fern), Err(Error::IndexOutOfRange { index: 3, len: 3 }));
    }

    #[test]
    fn fern_shape_validated() {
        assert!(Fern::new(vec![], vec![], vec![0.0], 1).is_err());
        assert!(Fern::new(vec![0], vec![0], vec![0.0; 3], 2).is_err());
        assert!(Fern::new(vec![0], vec![0, 1], vec![0.0; 4], 2).is_err());
        assert!(Fern::new(vec![0], vec![0], vec![0.0, f64::NAN, 0.0, 0.0], 2).is_err());
    }

    #[test]
    fn zero_residuals_give_zero_updates() {
        let rows: Vec<Vec<i32>> = (0..12).map(|i| vec![i, -i, i * i % 7]).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        for kappa in [0.0, 1.0, 1000.0] {
            let fern = train_fern(&m, &[0.0; 24], 2, 3, kappa, &mut ChaCha::seed_from_u64(1)).unwrap();
            assert!(fern.updates().iter().all(|&u| u == 0.0));
        }
    }

    #[test]
    fn single_feature_split_gives_group_means() {
        // Feature takes two values, so every threshold in [p5, p95] = [-10, 10]
        // except -10 itself separates the groups; group means computed by hand.
        let values = [-10, -10, -10, 10, 10, 10];
        let residuals = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, -1.0, 0.5, -3.0, 0.5, -2.0, 2.0];
        let low_mean = [(1.0 + 3.0 + 5.0) / 3.0, (2.0 + 4.0 + 6.0) / 3.0];
        let high_mean = [(-1.0 - 3.0 - 2.0) / 3.0, (0.5 + 0.5 + 2.0) / 3.0];
        let all_mean = [(1.0 + 3.0 + 5.0 - 1.0 - 3.0 - 2.0) / 6.0, (2.0 + 4.0 + 6.0 + 0.5 + 0.5 + 2.0) / 6.0];
        let m = FeatureMatrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let mut saw_split = false;
        for seed in 0..40 {
            let fern = train_fern(&m, &residuals, 2, 1, 0.0, &mut ChaCha::seed_from_u64(seed)).unwrap();
            let thr = fern.thresholds()[0];
            if thr > -10 {
                saw_split = true;
                assert!(fern.update(0).iter().zip(low_mean).all(|(a, b)| (a - b).abs() < 1e-12));
                assert!(fern.update(1).iter().zip(high_mean).all(|(a, b)| (a - b).abs() < 1e-12));
            } else {
                assert!(fern.update(0).iter().all(|&u| u == 0.0));
                assert!(fern.update(1).iter().zip(all_mean).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
        assert!(saw_split);
    }

    #[test]
    fn shrinkage_is_monotone() {
        let rows: Vec<Vec<i32>> = (0..30).map(|i| vec![(i * 37) % 11 - 5, (i * 13) % 7 - 3]).collect();
        let residuals: Vec<f64> = (0..60).map(|i| ((i * 7) % 9) as f64 - 4.0).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let mut prev: Option<Vec<f64>> = None;
        for kappa in [0.0, 1.0, 10.0, 100.0, 1e4] {
            let fern = train_fern(&m, &residuals, 2, 2, kappa, &mut ChaCha::seed_from_u64(4)).unwrap();
            if let Some(p) = &prev {
                for (a, b) in fern.updates().iter().zip(p) {
                    assert!(a.abs() <= b.abs() + 1e-15);
                    assert!(a * b >= 0.0);
                }
            }
            prev = Some(fern.updates().to_vec());
        }
    }

    #[test]
    fn empty_input_rejected() {
        let m = FeatureMatrix::from_rows(&[]).unwrap();
        assert!(train_fern(&m, &[], 2, 2, 0.0, &mut ChaCha::seed_from_u64(0)).is_err());
    }

    proptest! {
        #[test]
        fn fern_bin_matches_bitwise_oracle(
            depth in 1usize..=4,
            row in proptest::collection::vec(-255i32..=255, 8),
            slots in proptest::collection::vec(0u32..8, 4),
            thresholds in proptest::collection::vec(-255i32..=255, 4),
        ) {
            let fern = Fern::zero(slots[..depth].to_vec(), thresholds[..depth].to_vec(), 1).unwrap();
            let mut oracle = 0usize;
            let mut weight = 1usize;
            for f in 0..depth {
                if row[slots[f] as usize] >= thresholds[f] {
                    oracle += weight;
                }
                weight *= 2;
            }
            prop_assert_eq!(fern_bin(&row, &fern).unwrap(), oracle);
        }
    }
}
