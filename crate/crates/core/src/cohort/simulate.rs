//! Synthetic cohort with a known generating model.
//!
//! Lesion malignancy is fixed by the case-control structure (each case has
//! one malignant index lesion, every other lesion is benign). Binarized
//! concepts are drawn independently given malignancy, so the Bayes
//! posterior over concepts is exactly logistic with weights
//! `ln(p1 (1 - p0) / (p0 (1 - p1)))`. Detections jitter the ground-truth
//! geometry, carry noisy concept logits and a side-feature vector that
//! tracks malignancy, and are mixed with spurious boxes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    match_case_controls, Cohort, CohortError, Detection, ExclusionFlag, ExtraFields, ImageRecord, LesionAnnotation,
    Manufacturer, MatchCandidate, WomanRecord,
};
use crate::geometry::{BBox, Polygon, RasterMask};
use crate::lexicon::{
    ConceptLabels, ConceptLogits, EchoPattern, Margin, MassDescriptor, Orientation, Posterior, Shape, N_CONCEPTS,
};
use crate::metrics::auroc;

/// `P(concept is malignancy-indicative | lesion class)`, canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptConditionals {
    pub malignant: [f64; N_CONCEPTS],
    pub benign: [f64; N_CONCEPTS],
}

impl Default for ConceptConditionals {
    fn default() -> Self {
        ConceptConditionals {
            malignant: [0.70, 0.35, 0.65, 0.90, 0.55],
            benign: [0.15, 0.05, 0.12, 0.58, 0.15],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_women: usize,
    pub case_prevalence: f64,
    /// Probability of 1, 2, ... images per woman.
    pub images_per_woman: Vec<f64>,
    /// Chance that a non-index image shows a benign lesion.
    pub benign_lesion_prob: f64,
    /// Chance of a second benign lesion on an image that already has one.
    pub second_lesion_prob: f64,
    pub image_height: u32,
    pub image_width: u32,
    pub conditionals: ConceptConditionals,
    /// Magnitude of the noiseless concept logit.
    pub concept_logit_center: f64,
    /// Standard deviation of Gaussian noise added to concept logits.
    pub concept_noise: f64,
    pub detection_rate: f64,
    /// Extra lower-scored detection of an already detected lesion.
    pub duplicate_rate: f64,
    /// Mean number of spurious detections per image.
    pub false_positive_rate: f64,
    /// Box jitter, as a fraction of the lesion size.
    pub iou_jitter: f64,
    pub side_feature_dim: usize,
    /// Mean shift of each side feature between malignant and benign lesions.
    pub side_signal: f64,
    pub exclusion_rate: f64,
    pub match_ratio: usize,
    pub year_tolerance: i32,
    /// Chance that a generated control mirrors a case's demographics.
    pub control_match_prob: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_women: 1000,
            case_prevalence: 0.25,
            images_per_woman: vec![0.35, 0.35, 0.2, 0.1],
            benign_lesion_prob: 0.6,
            second_lesion_prob: 0.15,
            image_height: 96,
            image_width: 128,
            conditionals: ConceptConditionals::default(),
            concept_logit_center: 1.0,
            concept_noise: 1.2,
            detection_rate: 0.95,
            duplicate_rate: 0.05,
            false_positive_rate: 0.3,
            iou_jitter: 0.08,
            side_feature_dim: 4,
            side_signal: 1.0,
            exclusion_rate: 0.03,
            match_ratio: 3,
            year_tolerance: 2,
            control_match_prob: 0.85,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), CohortError> {
        let bad = |m: String| Err(CohortError::Config(m));
        let unit = |name: &str, v: f64| -> Result<(), CohortError> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(CohortError::Config(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        if self.n_women == 0 {
            return bad("n_women must be positive".into());
        }
        unit("case_prevalence", self.case_prevalence)?;
        unit("benign_lesion_prob", self.benign_lesion_prob)?;
        unit("second_lesion_prob", self.second_lesion_prob)?;
        unit("detection_rate", self.detection_rate)?;
        unit("duplicate_rate", self.duplicate_rate)?;
        unit("exclusion_rate", self.exclusion_rate)?;
        unit("control_match_prob", self.control_match_prob)?;
        if self.images_per_woman.is_empty()
            || self.images_per_woman.iter().any(|p| !(*p >= 0.0 && p.is_finite()))
            || self.images_per_woman.iter().sum::<f64>() <= 0.0
        {
            return bad("images_per_woman must be non-negative weights with a positive sum".into());
        }
        if self.image_height < 48 || self.image_width < 48 {
            return bad("image_height and image_width must be at least 48".into());
        }
        for (name, ps) in [("conditionals.malignant", self.conditionals.malignant), ("conditionals.benign", self.conditionals.benign)] {
            if ps.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
                return bad(format!("{name} entries must lie strictly inside (0, 1)"));
            }
        }
        for (name, v) in [
            ("concept_logit_center", self.concept_logit_center),
            ("concept_noise", self.concept_noise),
            ("false_positive_rate", self.false_positive_rate),
            ("iou_jitter", self.iou_jitter),
            ("side_signal", self.side_signal),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if self.match_ratio == 0 || self.year_tolerance < 0 {
            return bad("match_ratio must be positive and year_tolerance non-negative".into());
        }
        Ok(())
    }

    pub fn n_cases(&self) -> usize {
        (self.n_women as f64 * self.case_prevalence).round() as usize
    }
}

/// The generating model behind a simulated cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDescription {
    pub seed: u64,
    pub conditionals: ConceptConditionals,
    /// Fraction of generated lesions that are malignant.
    pub lesion_prevalence: f64,
    pub weights: [f64; N_CONCEPTS],
    pub bias: f64,
    /// AUROC of the oracle posterior over all generated lesions, by pair count.
    pub bayes_auroc: f64,
    pub n_lesions: usize,
    pub n_malignant_lesions: usize,
    pub concept_logit_center: f64,
    pub concept_noise: f64,
    pub side_signal: f64,
}

impl OracleDescription {
    fn from_conditionals(seed: u64, config: &SimConfig, prevalence: f64) -> Self {
        let c = config.conditionals;
        let mut weights = [0.0; N_CONCEPTS];
        let mut bias = (prevalence / (1.0 - prevalence)).ln();
        for i in 0..N_CONCEPTS {
            let (p1, p0) = (c.malignant[i], c.benign[i]);
            weights[i] = (p1 * (1.0 - p0) / (p0 * (1.0 - p1))).ln();
            bias += ((1.0 - p1) / (1.0 - p0)).ln();
        }
        OracleDescription {
            seed,
            conditionals: c,
            lesion_prevalence: prevalence,
            weights,
            bias,
            bayes_auroc: f64::NAN,
            n_lesions: 0,
            n_malignant_lesions: 0,
            concept_logit_center: config.concept_logit_center,
            concept_noise: config.concept_noise,
            side_signal: config.side_signal,
        }
    }

    /// Posterior log-odds of malignancy given the true concepts.
    pub fn log_odds(&self, labels: &ConceptLabels) -> f64 {
        self.bias + labels.0.iter().zip(&self.weights).map(|(&l, w)| if l { *w } else { 0.0 }).sum::<f64>()
    }

    pub fn probability(&self, labels: &ConceptLabels) -> f64 {
        crate::real::sigmoid(self.log_odds(labels))
    }

    /// AUROC of the oracle on `n` fresh draws from the generating model.
    pub fn monte_carlo_auroc(&self, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = rng.random::<f64>() < self.lesion_prevalence;
            let p = if y { &self.conditionals.malignant } else { &self.conditionals.benign };
            let c = ConceptLabels(std::array::from_fn(|i| rng.random::<f64>() < p[i]));
            scores.push(self.log_odds(&c));
            labels.push(y);
        }
        auroc(&scores, &labels).unwrap_or(f64::NAN)
    }
}

/// Result of [`simulate_cohort`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub cohort: Cohort,
    pub detections: Vec<Detection>,
    pub oracle: OracleDescription,
}

#[derive(Clone, Copy)]
enum LesionShape {
    Rect,
    Ellipse,
}

#[derive(Clone, Copy)]
struct ShapeParams {
    kind: LesionShape,
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

impl ShapeParams {
    fn polygon(&self) -> Polygon {
        let vertices = match self.kind {
            LesionShape::Rect => vec![
                [self.cx - self.rx, self.cy - self.ry],
                [self.cx + self.rx, self.cy - self.ry],
                [self.cx + self.rx, self.cy + self.ry],
                [self.cx - self.rx, self.cy + self.ry],
            ],
            LesionShape::Ellipse => (0..24)
                .map(|k| {
                    let a = k as f64 * std::f64::consts::TAU / 24.0;
                    [self.cx + self.rx * a.cos(), self.cy + self.ry * a.sin()]
                })
                .collect(),
        };
        Polygon::new(vertices.into_iter().map(|v| v.map(round2)).collect()).expect("at least 3 finite vertices")
    }

    fn clipped(mut self, h: u32, w: u32) -> Self {
        let (w, h) = (f64::from(w), f64::from(h));
        self.rx = self.rx.min(self.cx).min(w - self.cx).max(0.0);
        self.ry = self.ry.min(self.cy).min(h - self.cy).max(0.0);
        self
    }
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

fn sample_descriptor(rng: &mut ChaCha8Rng, labels: &ConceptLabels) -> MassDescriptor {
    fn choose<T: Copy + PartialEq>(rng: &mut ChaCha8Rng, all: &[T], benign: T, malignant: bool) -> T {
        if !malignant {
            return benign;
        }
        let options: Vec<T> = all.iter().copied().filter(|c| *c != benign).collect();
        pick(rng, &options)
    }
    let b = MassDescriptor::BENIGN;
    MassDescriptor {
        shape: choose(rng, Shape::ALL, b.shape, labels.0[0]),
        orientation: choose(rng, Orientation::ALL, b.orientation, labels.0[1]),
        margin: choose(rng, Margin::ALL, b.margin, labels.0[2]),
        echo_pattern: choose(rng, EchoPattern::ALL, b.echo_pattern, labels.0[3]),
        posterior: choose(rng, Posterior::ALL, b.posterior, labels.0[4]),
    }
}

struct Generator<'a> {
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    std_normal: Normal<f64>,
}

struct PendingLesion {
    annotation: LesionAnnotation,
    shape: ShapeParams,
    side_latent: Vec<f64>,
}

impl Generator<'_> {
    fn normal(&mut self) -> f64 {
        self.std_normal.sample(&mut self.rng)
    }

    fn lesion_shape(&mut self, occupied: &[BBox]) -> ShapeParams {
        let (h, w) = (f64::from(self.config.image_height), f64::from(self.config.image_width));
        let mut last = None;
        for _ in 0..20 {
            let rx = self.rng.random_range(6.0..(w / 6.0).max(7.0));
            let ry = self.rng.random_range(5.0..(h / 6.0).max(6.0));
            let cx = self.rng.random_range(rx + 1.0..w - rx - 1.0);
            let cy = self.rng.random_range(ry + 1.0..h - ry - 1.0);
            let kind = if self.rng.random::<bool>() { LesionShape::Rect } else { LesionShape::Ellipse };
            let s = ShapeParams { kind, cx: round2(cx), cy: round2(cy), rx: round2(rx), ry: round2(ry) };
            let b = BBox::new(s.cx - s.rx, s.cy - s.ry, s.cx + s.rx, s.cy + s.ry).unwrap();
            if occupied.iter().all(|o| o.iou(&b) == 0.0) {
                return s;
            }
            last = Some(s);
        }
        last.expect("at least one attempt")
    }

    fn lesion(&mut self, lesion_id: String, malignant: bool, occupied: &[BBox]) -> PendingLesion {
        let p = if malignant { self.config.conditionals.malignant } else { self.config.conditionals.benign };
        let labels = ConceptLabels(std::array::from_fn(|i| self.rng.random::<f64>() < p[i]));
        let descriptor = sample_descriptor(&mut self.rng, &labels);
        debug_assert_eq!(descriptor.binarize(), labels);
        let shape = self.lesion_shape(occupied);
        let polygon = shape.polygon();
        let mask = polygon.rasterize(self.config.image_height, self.config.image_width);
        let mut annotation =
            LesionAnnotation::from_mask(lesion_id, mask, descriptor, malignant).expect("lesions are at least 10 px wide");
        annotation.polygon = Some(polygon);
        let shift = if malignant { 0.5 } else { -0.5 } * self.config.side_signal;
        let side_latent = (0..self.config.side_feature_dim).map(|_| shift + self.normal()).collect();
        PendingLesion { annotation, shape, side_latent }
    }

    fn concept_logits(&mut self, labels: &ConceptLabels) -> ConceptLogits {
        let center = self.config.concept_logit_center;
        let sigma = self.config.concept_noise;
        let values = std::array::from_fn(|i| {
            let mean = if labels.0[i] { center } else { -center };
            mean + sigma * self.normal()
        });
        ConceptLogits::new(values).expect("finite logits")
    }

    fn detection_geometry(&mut self, s: ShapeParams, jitter: f64) -> Option<(BBox, RasterMask)> {
        let (h, w) = (self.config.image_height, self.config.image_width);
        let j = ShapeParams {
            kind: s.kind,
            cx: round2(s.cx + jitter * 2.0 * s.rx * self.normal()),
            cy: round2(s.cy + jitter * 2.0 * s.ry * self.normal()),
            rx: round2(s.rx * (jitter * self.normal()).exp()),
            ry: round2(s.ry * (jitter * self.normal()).exp()),
        }
        .clipped(h, w);
        if j.rx < 1.0 || j.ry < 1.0 {
            return None;
        }
        let bbox = BBox::new(j.cx - j.rx, j.cy - j.ry, j.cx + j.rx, j.cy + j.ry).ok()?;
        Some((bbox, j.polygon().rasterize(h, w)))
    }

    fn score(&mut self, lo: f64, hi: f64) -> f64 {
        (self.rng.random_range(lo..hi) * 10_000.0).round() / 10_000.0
    }

    fn detections_for_image(&mut self, image_id: &str, lesions: &[PendingLesion]) -> Vec<Detection> {
        let mut out = Vec::new();
        let jitter = self.config.iou_jitter;
        for l in lesions {
            if self.rng.random::<f64>() >= self.config.detection_rate {
                continue;
            }
            let copies = if self.rng.random::<f64>() < self.config.duplicate_rate { 2 } else { 1 };
            for copy in 0..copies {
                let (j, (lo, hi)) = if copy == 0 { (jitter, (0.6, 1.0)) } else { (jitter * 3.0, (0.3, 0.7)) };
                let Some((bbox, mask)) = self.detection_geometry(l.shape, j) else { continue };
                let concept_logits = self.concept_logits(&l.annotation.labels());
                let side_features = l.side_latent.iter().map(|v| v + 0.1 * self.std_normal.sample(&mut self.rng)).collect();
                let score = self.score(lo, hi);
                out.push(Detection {
                    image_id: image_id.to_string(),
                    bbox,
                    mask: Some(mask),
                    score,
                    concept_logits,
                    side_features,
                    cancer_prob: None,
                    extra: ExtraFields::new(),
                });
            }
        }
        let n_fp = if self.config.false_positive_rate > 0.0 {
            Poisson::new(self.config.false_positive_rate).expect("positive rate").sample(&mut self.rng) as usize
        } else {
            0
        };
        for _ in 0..n_fp {
            let s = self.lesion_shape(&[]);
            let Some((bbox, mask)) = self.detection_geometry(s, 0.0) else { continue };
            let center = self.config.concept_logit_center;
            let values = std::array::from_fn(|_| center * self.normal());
            let side_features = (0..self.config.side_feature_dim).map(|_| self.normal()).collect();
            let score = self.score(0.05, 0.6);
            out.push(Detection {
                image_id: image_id.to_string(),
                bbox,
                mask: Some(mask),
                score,
                concept_logits: ConceptLogits::new(values).expect("finite"),
                side_features,
                cancer_prob: None,
                extra: ExtraFields::new(),
            });
        }
        out
    }

    fn flags(&mut self) -> Vec<ExclusionFlag> {
        if self.rng.random::<f64>() >= self.config.exclusion_rate {
            return vec![];
        }
        let mut flags = vec![pick(&mut self.rng, &ExclusionFlag::PRECEDENCE)];
        if self.rng.random::<f64>() < 0.25 {
            let extra = pick(&mut self.rng, &ExclusionFlag::PRECEDENCE);
            if !flags.contains(&extra) {
                flags.push(extra);
            }
        }
        flags
    }
}

const MANUFACTURER_WEIGHTS: [f64; 4] = [0.5, 0.4, 0.06, 0.04];

/// Generates a cohort, its detections and the oracle. Deterministic in
/// `(config, seed)`.
pub fn simulate_cohort(config: &SimConfig, seed: u64) -> Result<SimOutput, CohortError> {
    config.validate()?;
    let mut g = Generator {
        config,
        rng: ChaCha8Rng::seed_from_u64(seed),
        std_normal: Normal::new(0.0, 1.0).expect("unit normal"),
    };

    // demographics: cases, then controls that mostly mirror some case
    let n_cases = config.n_cases();
    let n_controls = config.n_women - n_cases;
    let mut demo: Vec<(bool, i32, Manufacturer)> = Vec::with_capacity(config.n_women);
    for _ in 0..n_cases {
        let year = g.rng.random_range(1940..=1985);
        let m = Manufacturer::ALL[pick_weighted(&mut g.rng, &MANUFACTURER_WEIGHTS)];
        demo.push((true, year, m));
    }
    for k in 0..n_controls {
        if n_cases > 0 && g.rng.random::<f64>() < config.control_match_prob {
            let (_, year, m) = demo[(k / config.match_ratio) % n_cases];
            let offset = g.rng.random_range(-(config.year_tolerance + 1)..=config.year_tolerance + 1);
            demo.push((false, year + offset, m));
        } else {
            let year = g.rng.random_range(1940..=1985);
            let m = Manufacturer::ALL[pick_weighted(&mut g.rng, &MANUFACTURER_WEIGHTS)];
            demo.push((false, year, m));
        }
    }
    demo.shuffle(&mut g.rng);
    let width = config.n_women.to_string().len().max(4);
    let ids: Vec<String> = (0..config.n_women).map(|i| format!("W{:0width$}", i + 1)).collect();

    let candidates = |want_case: bool| -> Vec<MatchCandidate> {
        demo.iter()
            .zip(&ids)
            .filter(|((c, _, _), _)| *c == want_case)
            .map(|((_, y, m), id)| MatchCandidate { woman_id: id.clone(), birth_year: *y, manufacturer: *m })
            .collect()
    };
    let (groups, report) =
        match_case_controls(&candidates(true), &candidates(false), config.match_ratio, config.year_tolerance);
    let mut group_of = std::collections::HashMap::new();
    let n_groups = groups.len() + report.unused_controls.len();
    let gwidth = n_groups.to_string().len().max(4);
    for (k, grp) in groups.iter().enumerate() {
        let gid = format!("G{:0gwidth$}", k + 1);
        group_of.insert(grp.case_id.clone(), gid.clone());
        for c in &grp.control_ids {
            group_of.insert(c.clone(), gid.clone());
        }
    }
    for (k, c) in report.unused_controls.iter().enumerate() {
        group_of.insert(c.clone(), format!("G{:0gwidth$}", groups.len() + k + 1));
    }

    let mut women = Vec::with_capacity(config.n_women);
    let mut detections = Vec::new();
    let mut oracle_scores = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let (is_case, birth_year, manufacturer) = demo[i];
        let n_images = pick_weighted(&mut g.rng, &config.images_per_woman) + 1;
        let index_image = if is_case { Some(g.rng.random_range(0..n_images)) } else { None };
        let mut images = Vec::with_capacity(n_images);
        for k in 0..n_images {
            let image_id = format!("{id}-I{}", k + 1);
            let mut lesions: Vec<PendingLesion> = Vec::new();
            let mut occupied: Vec<BBox> = Vec::new();
            let mut add = |g: &mut Generator, malignant: bool, lesions: &mut Vec<PendingLesion>| {
                let l = g.lesion(format!("{image_id}-L{}", lesions.len() + 1), malignant, &occupied);
                occupied.push(l.annotation.bbox);
                lesions.push(l);
            };
            let is_index = index_image == Some(k);
            if is_index {
                add(&mut g, true, &mut lesions);
            }
            if is_index || g.rng.random::<f64>() < config.benign_lesion_prob {
                let p = if is_index { config.second_lesion_prob } else { 1.0 };
                if g.rng.random::<f64>() < p {
                    add(&mut g, false, &mut lesions);
                    if !is_index && g.rng.random::<f64>() < config.second_lesion_prob {
                        add(&mut g, false, &mut lesions);
                    }
                }
            }
            detections.extend(g.detections_for_image(&image_id, &lesions));
            let flags = g.flags();
            let birads = if is_index { pick(&mut g.rng, &["4", "5"]) } else { pick(&mut g.rng, &["2", "3"]) };
            let lesions: Vec<LesionAnnotation> = lesions.into_iter().map(|l| l.annotation).collect();
            oracle_scores.extend(lesions.iter().map(|l| (l.labels(), l.malignant)));
            images.push(ImageRecord {
                image_id,
                height: config.image_height,
                width: config.image_width,
                flags,
                birads_assessment: birads.to_string(),
                lesions,
                extra: ExtraFields::new(),
            });
        }
        women.push(WomanRecord {
            woman_id: id.clone(),
            group_id: group_of[id].clone(),
            is_case,
            birth_year,
            manufacturer,
            images,
            extra: ExtraFields::new(),
        });
    }

    let n_lesions = oracle_scores.len();
    let n_malignant = oracle_scores.iter().filter(|(_, m)| *m).count();
    let prevalence = if n_lesions == 0 { 0.5 } else { (n_malignant as f64 / n_lesions as f64).clamp(1e-6, 1.0 - 1e-6) };
    let mut oracle = OracleDescription::from_conditionals(seed, config, prevalence);
    oracle.n_lesions = n_lesions;
    oracle.n_malignant_lesions = n_malignant;
    let scored: Vec<(f64, bool)> = oracle_scores.iter().map(|(c, m)| (oracle.log_odds(c), *m)).collect();
    oracle.bayes_auroc = pair_count_auroc(&scored);

    let cohort = Cohort::new(women);
    debug_assert!(cohort.validate().is_ok());
    Ok(SimOutput { cohort, detections, oracle })
}

/// Exhaustive concordant-pair count; NaN for a single-class population.
fn pair_count_auroc(scored: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = scored.iter().filter(|(_, y)| *y).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scored.iter().filter(|(_, y)| !*y).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return f64::NAN;
    }
    let mut num = 0.0;
    for &p in &pos {
        for &n in &neg {
            num += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    num / (pos.len() as f64 * neg.len() as f64)
}
