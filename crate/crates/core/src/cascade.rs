//! Boosted random-fern cascade.
//!
//! Every stage samples a feature pool, extracts pixel differences at the
//! current shape estimates and fits `G` ferns one after another, each on the
//! residual left by its predecessors. Shapes, residuals and updates live in
//! the unit box frame.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::balance::{generate_inits_unit, jitter, AugmentationPlan, InitConfig};
use crate::dataset::{check_landmark_count, Image, Sample};
use crate::error::{Error, Result};
use crate::features::{sample_pool, FeatureMode, FeaturePool, PoolConfig};
use crate::fern::{Fern, FeatureMatrix, FernTrainer, MAX_DEPTH};
use crate::geometry::{mean_shape, normalize_shape, BBox, Point2, Shape};
use crate::math;
use crate::par;
use crate::rng::{rng_for, stream};

/// Relative slack for the per-fern SSE check, covering float rounding only.
const SSE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub mode: FeatureMode,
    /// `T`, at least one.
    pub stages: usize,
    /// `G`; zero gives stages that leave shapes untouched.
    pub ferns_per_stage: usize,
    /// `F`.
    pub fern_depth: usize,
    /// `P`, indexed pixels per stage.
    pub pool_size: usize,
    /// Difference features per stage.
    pub pair_count: usize,
    /// `κ` in the bin update `Σr / (n + κ)`.
    pub shrinkage: f64,
    /// `D`, initialisations per prediction.
    pub restarts: usize,
    /// Disc radius of offset-mode anchors, unit box frame.
    pub offset_radius: f64,
    pub seed: u64,
    pub init: InitConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: FeatureMode::Tif,
            stages: 10,
            ferns_per_stage: 100,
            fern_depth: 5,
            pool_size: 400,
            pair_count: 400,
            shrinkage: 1000.0,
            restarts: 5,
            offset_radius: 0.15,
            seed: 0,
            init: InitConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.stages == 0 {
            return fail("stages must be at least 1");
        }
        if self.fern_depth == 0 || self.fern_depth > MAX_DEPTH {
            return Err(Error::InvalidConfig(alloc::format!("fern depth must be in 1..={MAX_DEPTH}")));
        }
        if self.pool_size < 2 {
            return fail("pool size must be at least 2");
        }
        if self.pair_count == 0 {
            return fail("pair count must be positive");
        }
        let max_pairs = self.pool_size * (self.pool_size - 1) / 2;
        if self.pair_count > max_pairs {
            return Err(Error::InvalidConfig(alloc::format!(
                "pair count {} exceeds the {max_pairs} distinct pairs of {} anchors",
                self.pair_count,
                self.pool_size
            )));
        }
        if !(self.shrinkage.is_finite() && self.shrinkage >= 0.0) {
            return fail("shrinkage must be finite and non-negative");
        }
        if self.restarts == 0 {
            return fail("restarts must be at least 1");
        }
        if !(self.offset_radius.is_finite() && self.offset_radius >= 0.0) {
            return fail("offset radius must be finite and non-negative");
        }
        self.init.validate()
    }

    fn pool_config(&self) -> PoolConfig {
        PoolConfig { mode: self.mode, anchors: self.pool_size, pairs: self.pair_count, offset_radius: self.offset_radius }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub pool: FeaturePool,
    pub ferns: Vec<Fern>,
}

impl Stage {
    fn validate(&self, k: usize) -> Result<()> {
        self.pool.validate(k)?;
        let features = self.pool.feature_count();
        for fern in &self.ferns {
            if fern.dim() != 2 * k {
                return Err(Error::LengthMismatch { what: "fern update width", left: fern.dim(), right: 2 * k });
            }
            if fern.max_slot() >= features {
                return Err(Error::IndexOutOfRange { index: fern.max_slot(), len: features });
            }
        }
        Ok(())
    }

    /// Apply every fern to the unit-frame estimate `est` (flat `x0, y0, ...`).
    fn apply(&self, image: &Image, bbox: &BBox, mean: &Shape, est: &mut [f64], buf: &mut Buffers) -> Result<()> {
        let shape = to_pixels(est, bbox);
        self.pool.intensities_into(image, &shape, mean, &mut buf.intensities)?;
        self.pool.differences_into(&buf.intensities, &mut buf.features);
        for fern in &self.ferns {
            let bin = fern.bin_unchecked(|slot| buf.features[slot]);
            for (e, u) in est.iter_mut().zip(fern.update(bin)) {
                *e += u;
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct Buffers {
    intensities: Vec<u8>,
    features: Vec<i32>,
}

/// A trained cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    landmark_count: usize,
    /// Mean training shape, unit box frame.
    mean: Shape,
    stages: Vec<Stage>,
    config: TrainConfig,
}

impl CascadeModel {
    pub fn new(mean: Shape, stages: Vec<Stage>, config: TrainConfig) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Empty("cascade stages"));
        }
        let k = mean.len();
        let needed = config.mode.min_landmarks();
        if k < needed {
            return Err(Error::TooFewLandmarks { needed, found: k });
        }
        for stage in &stages {
            if stage.pool.mode() != config.mode {
                return Err(Error::InvalidConfig("stage feature mode differs from the model mode".into()));
            }
            stage.validate(k)?;
        }
        Ok(CascadeModel { landmark_count: k, mean, stages, config })
    }

    pub fn landmark_count(&self) -> usize {
        self.landmark_count
    }

    pub fn mode(&self) -> FeatureMode {
        self.config.mode
    }

    pub fn mean(&self) -> &Shape {
        &self.mean
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Fails with [`Error::LandmarkCountMismatch`] unless the model predicts `k` landmarks.
    pub fn check_landmarks(&self, k: usize) -> Result<()> {
        if k != self.landmark_count {
            return Err(Error::LandmarkCountMismatch { expected: self.landmark_count, found: k });
        }
        Ok(())
    }

    /// Unit-frame initialisations for `restarts` runs: the mean shape first,
    /// then jittered copies of it.
    pub fn initial_shapes<R: Rng + ?Sized>(&self, restarts: usize, rng: &mut R) -> Vec<Shape> {
        let mut out = Vec::with_capacity(restarts);
        if restarts > 0 {
            out.push(self.mean.clone());
        }
        for _ in 1..restarts {
            out.push(jitter(&self.mean, &self.config.init, rng));
        }
        out
    }

    /// Run one unit-frame initialisation through all stages; returns the unit-frame result.
    pub fn refine(&self, image: &Image, bbox: &BBox, init: &Shape) -> Result<Shape> {
        self.check_landmarks(init.len())?;
        bbox.validate()?;
        let mut est = init.to_flat();
        let mut buf = Buffers::default();
        for stage in &self.stages {
            stage.apply(image, bbox, &self.mean, &mut est, &mut buf)?;
        }
        Shape::from_flat(&est)
    }

    /// Refine every initialisation and take the coordinate-wise median, in image pixels.
    pub fn predict_from_inits(&self, image: &Image, bbox: &BBox, inits: &[Shape]) -> Result<Shape> {
        if inits.is_empty() {
            return Err(Error::InvalidConfig("at least one initialisation is required".into()));
        }
        let runs = inits.iter().map(|s| self.refine(image, bbox, s)).collect::<Result<Vec<_>>>()?;
        let unit = coordinate_median(&runs)?;
        crate::geometry::denormalize_shape(&unit, bbox)
    }

    /// Landmarks for `image` inside `bbox` from `restarts` initialisations drawn from `rng`.
    pub fn predict<R: Rng + ?Sized>(&self, image: &Image, bbox: &BBox, restarts: usize, rng: &mut R) -> Result<Shape> {
        if restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        let inits = self.initial_shapes(restarts, rng);
        self.predict_from_inits(image, bbox, &inits)
    }
}

/// Coordinate-wise median; even counts average the two middle values.
pub fn coordinate_median(shapes: &[Shape]) -> Result<Shape> {
    let first = shapes.first().ok_or(Error::Empty("shapes"))?;
    let k = first.len();
    for s in shapes {
        s.check_len(k)?;
    }
    let n = shapes.len();
    let mut column = vec![0.0; n];
    let mut median = |f: &dyn Fn(&Shape) -> f64| {
        for (c, s) in column.iter_mut().zip(shapes) {
            *c = f(s);
        }
        column.sort_by(f64::total_cmp);
        if n % 2 == 1 {
            column[n / 2]
        } else {
            0.5 * (column[n / 2 - 1] + column[n / 2])
        }
    };
    let points = (0..k).map(|i| Point2::new(median(&|s| s.points()[i].x), median(&|s| s.points()[i].y))).collect();
    Shape::new(points)
}

/// Training error after the initialisation (`stage` 0) and after every stage.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageLog {
    pub stage: usize,
    /// Mean over instances of the landmark error normalised by face size.
    pub mean_nme: f64,
    /// Root mean squared residual coordinate, unit box frame.
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainLog {
    pub instances: usize,
    pub stages: Vec<StageLog>,
}

impl TrainLog {
    /// True when the mean training NME never increases from one stage to the next.
    pub fn is_non_increasing(&self) -> bool {
        self.stages.windows(2).all(|w| w[1].mean_nme <= w[0].mean_nme)
    }
}

fn to_pixels(unit: &[f64], bbox: &BBox) -> Shape {
    Shape::from_vec_unchecked(unit.chunks_exact(2).map(|c| bbox.from_unit(Point2::new(c[0], c[1]))).collect())
}

struct Instances<'a> {
    samples: &'a [Sample],
    owner: Vec<usize>,
    /// Row-major estimates, `2K` values per instance.
    est: Vec<f64>,
    residual: Vec<f64>,
    dim: usize,
}

impl Instances<'_> {
    fn len(&self) -> usize {
        self.owner.len()
    }

    fn sse(&self) -> f64 {
        self.residual.iter().map(|r| r * r).sum()
    }

    fn log(&self, stage: usize) -> StageLog {
        let n = self.len();
        let k = self.dim / 2;
        let total: f64 = self
            .residual
            .chunks_exact(self.dim)
            .zip(&self.owner)
            .map(|(r, &o)| {
                let b = &self.samples[o].bbox;
                let sum: f64 = r.chunks_exact(2).map(|d| math::hypot(d[0] * b.w, d[1] * b.h)).sum();
                sum / (k as f64 * b.size())
            })
            .sum();
        StageLog { stage, mean_nme: total / n as f64, rms: math::sqrt(self.sse() / (n * self.dim) as f64) }
    }
}

/// Train a cascade on annotated `samples`, augmented per `plan`.
///
/// Deterministic in `cfg.seed` and independent of the number of threads.
/// Fails with [`Error::Numeric`] if any fern increases the training residual.
pub fn train_cascade(samples: &[Sample], plan: &AugmentationPlan, cfg: &TrainConfig) -> Result<(CascadeModel, TrainLog)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("training samples"));
    }
    if plan.len() != samples.len() {
        return Err(Error::LengthMismatch { what: "augmentation plan", left: plan.len(), right: samples.len() });
    }
    let k = samples[0].truth()?.len();
    check_landmark_count(samples, k)?;
    let needed = cfg.mode.min_landmarks();
    if k < needed {
        return Err(Error::TooFewLandmarks { needed, found: k });
    }
    let unit_truths =
        samples.iter().map(|s| normalize_shape(s.truth()?, &s.bbox)).collect::<Result<Vec<_>>>()?;
    let mean = mean_shape(&unit_truths)?;

    let inits = par::map_indexed(samples.len(), |i| {
        let mut rng = rng_for(cfg.seed, stream::TRAIN_INIT, i as u64);
        generate_inits_unit(&unit_truths, Some(&mean), Some(i), plan.counts()[i] as usize, &cfg.init, &mut rng)
    });
    let dim = 2 * k;
    let mut inst = Instances { samples, owner: Vec::new(), est: Vec::new(), residual: Vec::new(), dim };
    for (i, shapes) in inits.into_iter().enumerate() {
        let target = unit_truths[i].to_flat();
        for s in shapes? {
            let flat = s.to_flat();
            inst.residual.extend(target.iter().zip(&flat).map(|(t, e)| t - e));
            inst.est.extend(flat);
            inst.owner.push(i);
        }
    }
    if inst.len() == 0 {
        return Err(Error::Empty("training instances"));
    }

    let mut log = TrainLog { instances: inst.len(), stages: vec![inst.log(0)] };
    let mut stages = Vec::with_capacity(cfg.stages);
    for t in 0..cfg.stages {
        let mut rng = rng_for(cfg.seed, stream::STAGE_POOL, t as u64);
        let pool = sample_pool(&cfg.pool_config(), k, &mut rng)?;
        let rows = par::map_indexed(inst.len(), |r| {
            let o = inst.owner[r];
            let shape = to_pixels(&inst.est[r * dim..(r + 1) * dim], &samples[o].bbox);
            let mut buf = Buffers::default();
            pool.intensities_into(&samples[o].image, &shape, &mean, &mut buf.intensities)?;
            pool.differences_into(&buf.intensities, &mut buf.features);
            Ok(buf.features)
        });
        let mut flat = Vec::with_capacity(inst.len() * pool.feature_count());
        for row in rows {
            flat.extend(row?);
        }
        let matrix = FeatureMatrix::from_row_major(inst.len(), pool.feature_count(), &flat);
        drop(flat);
        let trainer = FernTrainer::new(&matrix);

        let mut ferns = Vec::with_capacity(cfg.ferns_per_stage);
        let mut sse = inst.sse();
        for g in 0..cfg.ferns_per_stage {
            let mut rng = rng_for(cfg.seed, stream::FERN, ((t as u64) << 32) | g as u64);
            let fitted = trainer.train(&inst.residual, dim, cfg.fern_depth, cfg.shrinkage, &mut rng)?;
            for (r, &bin) in fitted.bins.iter().enumerate() {
                let u = fitted.fern.update(bin as usize);
                let span = r * dim..(r + 1) * dim;
                for ((e, res), d) in inst.est[span.clone()].iter_mut().zip(&mut inst.residual[span]).zip(u) {
                    *e += d;
                    *res -= d;
                }
            }
            let after = inst.sse();
            if after > sse * (1.0 + SSE_TOLERANCE) + f64::MIN_POSITIVE {
                return Err(Error::Numeric(alloc::format!(
                    "fern {g} of stage {t} increased the training residual from {sse} to {after}"
                )));
            }
            sse = after;
            ferns.push(fitted.fern);
        }
        stages.push(Stage { pool, ferns });
        log.stages.push(inst.log(t + 1));
    }
    Ok((CascadeModel::new(mean, stages, *cfg)?, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::uniform_plan;
    use crate::rng::Rng as ChaCha;
    use crate::synth::{generate_synthetic, SynthConfig};
    use rand::SeedableRng;

    fn quick() -> TrainConfig {
        TrainConfig {
            stages: 3,
            ferns_per_stage: 20,
            pool_size: 60,
            pair_count: 100,
            restarts: 3,
            ..TrainConfig::default()
        }
    }

    fn data(count: usize, seed: u64) -> Vec<Sample> {
        generate_synthetic(&SynthConfig { count, image_size: 64, seed, ..SynthConfig::default() }).unwrap()
    }

    #[test]
    fn zero_ferns_keep_initial_shape() {
        let samples = data(10, 1);
        let cfg = TrainConfig { stages: 1, ferns_per_stage: 0, ..quick() };
        let (model, log) = train_cascade(&samples, &uniform_plan(10, 2).unwrap(), &cfg).unwrap();
        assert_eq!(log.stages[1], StageLog { stage: 1, ..log.stages[0] });
        let s = &samples[0];
        let mut rng = ChaCha::seed_from_u64(0);
        let pred = model.predict(&s.image, &s.bbox, 1, &mut rng).unwrap();
        let placed = crate::geometry::denormalize_shape(model.mean(), &s.bbox).unwrap();
        assert_eq!(pred, placed);
    }

    #[test]
    fn zero_updates_output_mean_shape() {
        let samples = data(8, 2);
        let (model, _) = train_cascade(&samples, &uniform_plan(8, 2).unwrap(), &quick()).unwrap();
        let stages = model
            .stages()
            .iter()
            .map(|st| Stage {
                pool: st.pool.clone(),
                ferns: st
                    .ferns
                    .iter()
                    .map(|f| Fern::zero(f.slots().to_vec(), f.thresholds().to_vec(), f.dim()).unwrap())
                    .collect(),
            })
            .collect();
        let zero = CascadeModel::new(model.mean().clone(), stages, *model.config()).unwrap();
        let s = &samples[3];
        let pred = zero.predict(&s.image, &s.bbox, 1, &mut ChaCha::seed_from_u64(9)).unwrap();
        assert_eq!(pred, crate::geometry::denormalize_shape(zero.mean(), &s.bbox).unwrap());
    }

    #[test]
    fn median_rejects_outlier_restart() {
        let a = Shape::new(vec![Point2::new(1.0, 2.0), Point2::new(3.0, 4.0)]).unwrap();
        let outlier = Shape::new(vec![Point2::new(100.0, -50.0), Point2::new(-7.0, 40.0)]).unwrap();
        for order in [[&a, &a, &outlier], [&outlier, &a, &a], [&a, &outlier, &a]] {
            let shapes: Vec<Shape> = order.iter().map(|s| (*s).clone()).collect();
            assert_eq!(coordinate_median(&shapes).unwrap(), a);
        }
        let b = Shape::new(vec![Point2::new(3.0, 2.0), Point2::new(5.0, 0.0)]).unwrap();
        let m = coordinate_median(&[a, b]).unwrap();
        assert_eq!(m.points(), &[Point2::new(2.0, 2.0), Point2::new(4.0, 2.0)]);
    }

    #[test]
    fn training_is_deterministic_and_fits() {
        let samples = data(40, 3);
        let plan = uniform_plan(40, 5).unwrap();
        let (m1, log) = train_cascade(&samples, &plan, &quick()).unwrap();
        let (m2, _) = train_cascade(&samples, &plan, &quick()).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(log.instances, 200);
        assert!(log.is_non_increasing(), "{log:?}");
        assert!(log.stages.windows(2).all(|w| w[1].rms <= w[0].rms));
        assert!(log.stages.last().unwrap().mean_nme < log.stages[0].mean_nme);
    }

    #[test]
    fn predictions_do_not_depend_on_restart_order() {
        let samples = data(20, 4);
        let (model, _) = train_cascade(&samples, &uniform_plan(20, 3).unwrap(), &quick()).unwrap();
        let s = &samples[0];
        let mut inits = model.initial_shapes(4, &mut ChaCha::seed_from_u64(5));
        let forward = model.predict_from_inits(&s.image, &s.bbox, &inits).unwrap();
        inits.reverse();
        assert_eq!(forward, model.predict_from_inits(&s.image, &s.bbox, &inits).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        let samples = data(5, 5);
        assert!(matches!(train_cascade(&[], &uniform_plan(1, 1).unwrap(), &quick()), Err(Error::Empty(_))));
        assert!(train_cascade(&samples, &uniform_plan(4, 1).unwrap(), &quick()).is_err());
        assert!(train_cascade(&samples, &uniform_plan(5, 1).unwrap(), &TrainConfig { stages: 0, ..quick() }).is_err());
        let (model, _) = train_cascade(&samples, &uniform_plan(5, 1).unwrap(), &quick()).unwrap();
        assert!(matches!(model.check_landmarks(8), Err(Error::LandmarkCountMismatch { expected: 5, found: 8 })));
    }
}
