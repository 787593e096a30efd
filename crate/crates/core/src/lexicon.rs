//! ACR BI-RADS ultrasound masses lexicon and its binarization into
//! malignancy-indicative concepts.
//!
//! Concepts always appear in the canonical order
//! `(shape, orientation, margin, echo, posterior)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::real::{logit, sigmoid, Real};

/// Number of binarized concepts in the bottleneck.
pub const N_CONCEPTS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexiconError {
    #[error("unknown {field} category {value:?}")]
    UnknownCategory { field: &'static str, value: String },
    #[error("concept logit {index} ({name}) is not finite")]
    NonFiniteLogit { index: usize, name: &'static str },
    #[error("binarization threshold {0} must lie strictly inside (0, 1)")]
    BadThreshold(f64),
    #[error("expected {N_CONCEPTS} concept values, got {0}")]
    WrongLength(usize),
}

/// One binarized lexicon property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concept {
    Shape,
    Orientation,
    Margin,
    Echo,
    Posterior,
}

impl Concept {
    pub const ALL: [Concept; N_CONCEPTS] = [
        Concept::Shape,
        Concept::Orientation,
        Concept::Margin,
        Concept::Echo,
        Concept::Posterior,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Concept::Shape => "shape",
            Concept::Orientation => "orientation",
            Concept::Margin => "margin",
            Concept::Echo => "echo",
            Concept::Posterior => "posterior",
        }
    }

    /// Benign-indicative category label, used for display polarity.
    pub fn benign_category(self) -> &'static str {
        match self {
            Concept::Shape => Shape::Oval.label(),
            Concept::Orientation => Orientation::Parallel.label(),
            Concept::Margin => Margin::Circumscribed.label(),
            Concept::Echo => EchoPattern::Anechoic.label(),
            Concept::Posterior => Posterior::None.label(),
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Concept {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize(s);
        Concept::ALL
            .into_iter()
            .find(|c| c.name() == key || (key == "echo pattern" && *c == Concept::Echo))
            .ok_or_else(|| LexiconError::UnknownCategory {
                field: "concept",
                value: s.to_string(),
            })
    }
}

/// Lower-cases and folds `_`/`-`/repeated whitespace into single spaces.
fn normalize(s: &str) -> String {
    s.split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Declares one lexicon property enum together with its vocabulary.
///
/// Each variant has a canonical token (used in files), a display label and
/// optional extra spellings accepted by the parser.
macro_rules! category {
    (
        $(#[$meta:meta])*
        $name:ident, $field:literal, benign = $benign:ident,
        { $($variant:ident => $token:literal, $label:literal $(| $alias:literal)*;)+ }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant,)+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant,)+];

            /// Token written to data files.
            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token,)+
                }
            }

            /// Human-readable ACR wording.
            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label,)+
                }
            }

            pub fn is_malignancy_indicative(self) -> bool {
                self != $name::$benign
            }
        }

        impl FromStr for $name {
            type Err = LexiconError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let key = normalize(s);
                $(
                    if key == normalize($token) || key == $label $(|| key == $alias)* {
                        return Ok($name::$variant);
                    }
                )+
                Err(LexiconError::UnknownCategory { field: $field, value: s.to_string() })
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.token())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

category! {
    Shape, "shape", benign = Oval, {
        Oval => "oval", "oval";
        Round => "round", "round";
        Irregular => "irregular", "irregular";
    }
}

category! {
    Orientation, "orientation", benign = Parallel, {
        Parallel => "parallel", "parallel";
        NotParallel => "not_parallel", "not parallel" | "nonparallel";
    }
}

category! {
    Margin, "margin", benign = Circumscribed, {
        Circumscribed => "circumscribed", "circumscribed";
        Indistinct => "indistinct", "indistinct";
        Angular => "angular", "angular";
        Microlobulated => "microlobulated", "microlobulated";
        Spiculated => "spiculated", "spiculated";
    }
}

category! {
    EchoPattern, "echo_pattern", benign = Anechoic, {
        Anechoic => "anechoic", "anechoic";
        Hyperechoic => "hyperechoic", "hyperechoic";
        ComplexCysticSolid => "complex_cystic_solid", "complex cystic and solid";
        Hypoechoic => "hypoechoic", "hypoechoic";
        Isoechoic => "isoechoic", "isoechoic";
        Heterogeneous => "heterogeneous", "heterogeneous";
    }
}

category! {
    Posterior, "posterior", benign = None, {
        None => "none", "no posterior features" | "no posterior";
        Enhancement => "enhancement", "enhancement";
        Shadowing => "shadowing", "shadowing";
        Combined => "combined", "combined pattern" | "combined";
    }
}

/// The five categorical BI-RADS mass properties of one lesion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MassDescriptor {
    pub shape: Shape,
    pub orientation: Orientation,
    pub margin: Margin,
    pub echo_pattern: EchoPattern,
    pub posterior: Posterior,
}

impl MassDescriptor {
    /// Oval, parallel, circumscribed, anechoic, no posterior features.
    pub const BENIGN: MassDescriptor = MassDescriptor {
        shape: Shape::Oval,
        orientation: Orientation::Parallel,
        margin: Margin::Circumscribed,
        echo_pattern: EchoPattern::Anechoic,
        posterior: Posterior::None,
    };

    /// Parses the five category strings in canonical order.
    pub fn parse(
        shape: &str,
        orientation: &str,
        margin: &str,
        echo_pattern: &str,
        posterior: &str,
    ) -> Result<Self, LexiconError> {
        Ok(MassDescriptor {
            shape: shape.parse()?,
            orientation: orientation.parse()?,
            margin: margin.parse()?,
            echo_pattern: echo_pattern.parse()?,
            posterior: posterior.parse()?,
        })
    }

    /// Canonical file tokens in concept order.
    pub fn tokens(&self) -> [&'static str; N_CONCEPTS] {
        [
            self.shape.token(),
            self.orientation.token(),
            self.margin.token(),
            self.echo_pattern.token(),
            self.posterior.token(),
        ]
    }

    pub fn binarize(&self) -> ConceptLabels {
        binarize(self)
    }
}

/// Binarized concept labels; `true` means malignancy-indicative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptLabels(pub [bool; N_CONCEPTS]);

impl ConceptLabels {
    pub fn get(&self, concept: Concept) -> bool {
        self.0[concept.index()]
    }

    pub fn count_malignant(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Packs the labels into a 5-bit pattern index (shape is bit 0).
    pub fn pattern_index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | (usize::from(b) << i))
    }

    pub fn from_pattern_index(index: usize) -> Self {
        let mut out = [false; N_CONCEPTS];
        for (i, v) in out.iter_mut().enumerate() {
            *v = index >> i & 1 == 1;
        }
        ConceptLabels(out)
    }
}

/// Real-valued concept logits, one per concept in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ConceptLogits<T: Real = f64>([T; N_CONCEPTS]);

impl<T: Real> ConceptLogits<T> {
    pub fn new(values: [T; N_CONCEPTS]) -> Result<Self, LexiconError> {
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(LexiconError::NonFiniteLogit {
                    index,
                    name: Concept::ALL[index].name(),
                });
            }
        }
        Ok(ConceptLogits(values))
    }

    pub fn from_slice(values: &[T]) -> Result<Self, LexiconError> {
        let arr: [T; N_CONCEPTS] = values
            .try_into()
            .map_err(|_| LexiconError::WrongLength(values.len()))?;
        Self::new(arr)
    }

    /// Converts pseudo-probabilities into logits once, at ingestion.
    pub fn from_probabilities(probs: [T; N_CONCEPTS]) -> Result<Self, LexiconError> {
        Self::new(probs.map(logit))
    }

    pub fn values(&self) -> &[T; N_CONCEPTS] {
        &self.0
    }

    pub fn get(&self, concept: Concept) -> T {
        self.0[concept.index()]
    }

    pub fn probabilities(&self) -> [T; N_CONCEPTS] {
        self.0.map(sigmoid)
    }

    pub(crate) fn set(&mut self, index: usize, value: T) {
        debug_assert!(value.is_finite());
        self.0[index] = value;
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for ConceptLogits<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = <[T; N_CONCEPTS]>::deserialize(deserializer)?;
        ConceptLogits::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Collapses a full descriptor to the five binary concepts.
pub fn binarize(descriptor: &MassDescriptor) -> ConceptLabels {
    ConceptLabels([
        descriptor.shape.is_malignancy_indicative(),
        descriptor.orientation.is_malignancy_indicative(),
        descriptor.margin.is_malignancy_indicative(),
        descriptor.echo_pattern.is_malignancy_indicative(),
        descriptor.posterior.is_malignancy_indicative(),
    ])
}

/// Thresholds concept pseudo-probabilities at 0.5.
///
/// A logit of exactly zero counts as malignancy-indicative.
pub fn binarize_logits<T: Real>(logits: &ConceptLogits<T>) -> ConceptLabels {
    ConceptLabels(logits.0.map(|x| x >= T::zero()))
}

/// Thresholds pseudo-probabilities at `threshold_prob`; ties go to `true`.
pub fn binarize_logits_at<T: Real>(
    logits: &[T],
    threshold_prob: T,
) -> Result<ConceptLabels, LexiconError> {
    if !(threshold_prob > T::zero() && threshold_prob < T::one()) {
        return Err(LexiconError::BadThreshold(threshold_prob.to_f64_lossy()));
    }
    let logits = ConceptLogits::from_slice(logits)?;
    if threshold_prob == T::lit(0.5) {
        return Ok(binarize_logits(&logits));
    }
    let cut = logit(threshold_prob);
    Ok(ConceptLabels(logits.0.map(|x| x >= cut)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn descriptor(s: &str, o: &str, m: &str, e: &str, p: &str) -> MassDescriptor {
        MassDescriptor::parse(s, o, m, e, p).unwrap()
    }

    #[test]
    fn binarize_examples() {
        let benign = descriptor("oval", "parallel", "circumscribed", "anechoic", "none");
        assert_eq!(binarize(&benign), ConceptLabels([false; 5]));

        let malignant = descriptor("irregular", "not parallel", "spiculated", "hypoechoic", "shadowing");
        assert_eq!(binarize(&malignant), ConceptLabels([true; 5]));

        let round = descriptor("round", "parallel", "circumscribed", "anechoic", "none");
        assert_eq!(binarize(&round), ConceptLabels([true, false, false, false, false]));
    }

    #[test]
    fn binarize_logits_examples() {
        let zeros = ConceptLogits::new([0.0; 5]).unwrap();
        assert_eq!(binarize_logits(&zeros), ConceptLabels([true; 5]));

        let mixed = ConceptLogits::new([-2.0, 3.0, -0.1, 0.1, -5.0]).unwrap();
        assert_eq!(
            binarize_logits(&mixed),
            ConceptLabels([false, true, false, true, false])
        );

        // logit(0.5) evaluates to exactly 0, so 0.5 lands on the tie.
        let probs = [0.49f64, 0.51, 0.5, 0.99, 0.01];
        let oracle: Vec<bool> = probs.iter().map(|p| (p / (1.0 - p)).ln() >= 0.0).collect();
        assert_eq!(oracle, vec![false, true, true, true, false]);
        let from_probs = ConceptLogits::from_probabilities(probs).unwrap();
        assert_eq!(binarize_logits(&from_probs).0.to_vec(), oracle);
    }

    #[test]
    fn non_finite_logits_rejected() {
        assert!(matches!(
            ConceptLogits::new([0.0, f64::NAN, 0.0, 0.0, 0.0]),
            Err(LexiconError::NonFiniteLogit { index: 1, .. })
        ));
        assert!(binarize_logits_at(&[0.0, 0.0, f64::INFINITY, 0.0, 0.0], 0.5).is_err());
        assert!(binarize_logits_at(&[0.0; 4], 0.5).is_err());
        assert!(binarize_logits_at(&[0.0; 5], 1.0).is_err());
    }

    #[test]
    fn custom_threshold() {
        let labels = binarize_logits_at(&[0.5f64, 0.0, -0.5, 1.0, 2.0], 0.7).unwrap();
        // logit(0.7) = 0.847
        assert_eq!(labels, ConceptLabels([false, false, false, true, true]));
    }

    #[test]
    fn parse_vocabulary() {
        assert_eq!("oval".parse::<Shape>().unwrap(), Shape::Oval);
        assert_eq!("OVAL".parse::<Shape>().unwrap(), Shape::Oval);
        assert_eq!(
            "complex cystic and solid".parse::<EchoPattern>().unwrap(),
            EchoPattern::ComplexCysticSolid
        );
        assert_eq!(
            "complex_cystic_solid".parse::<EchoPattern>().unwrap(),
            EchoPattern::ComplexCysticSolid
        );
        assert_eq!("Not-Parallel".parse::<Orientation>().unwrap(), Orientation::NotParallel);
        assert_eq!("no posterior features".parse::<Posterior>().unwrap(), Posterior::None);

        let err = "ovall".parse::<Shape>().unwrap_err();
        assert_eq!(
            err,
            LexiconError::UnknownCategory { field: "shape", value: "ovall".into() }
        );
        assert!(err.to_string().contains("shape") && err.to_string().contains("ovall"));
    }

    #[test]
    fn concept_order_is_canonical() {
        let names: Vec<_> = Concept::ALL.iter().map(|c| c.name()).collect();
        assert_eq!(names, ["shape", "orientation", "margin", "echo", "posterior"]);
        assert_eq!("echo pattern".parse::<Concept>().unwrap(), Concept::Echo);
    }

    #[test]
    fn one_benign_category_per_property() {
        assert_eq!(Shape::ALL.iter().filter(|c| !c.is_malignancy_indicative()).count(), 1);
        assert_eq!(Orientation::ALL.iter().filter(|c| !c.is_malignancy_indicative()).count(), 1);
        assert_eq!(Margin::ALL.iter().filter(|c| !c.is_malignancy_indicative()).count(), 1);
        assert_eq!(EchoPattern::ALL.iter().filter(|c| !c.is_malignancy_indicative()).count(), 1);
        assert_eq!(Posterior::ALL.iter().filter(|c| !c.is_malignancy_indicative()).count(), 1);
    }

    #[test]
    fn all_false_only_for_benign_descriptor() {
        let mut all_false = 0;
        for &shape in Shape::ALL {
            for &orientation in Orientation::ALL {
                for &margin in Margin::ALL {
                    for &echo_pattern in EchoPattern::ALL {
                        for &posterior in Posterior::ALL {
                            let d = MassDescriptor { shape, orientation, margin, echo_pattern, posterior };
                            if binarize(&d) == ConceptLabels([false; 5]) {
                                assert_eq!(d, MassDescriptor::BENIGN);
                                all_false += 1;
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(all_false, 1);
    }

    #[test]
    fn pattern_index_roundtrip() {
        for i in 0..32 {
            assert_eq!(ConceptLabels::from_pattern_index(i).pattern_index(), i);
        }
    }

    fn arb_descriptor() -> impl Strategy<Value = MassDescriptor> {
        (
            prop::sample::select(Shape::ALL),
            prop::sample::select(Orientation::ALL),
            prop::sample::select(Margin::ALL),
            prop::sample::select(EchoPattern::ALL),
            prop::sample::select(Posterior::ALL),
        )
            .prop_map(|(shape, orientation, margin, echo_pattern, posterior)| MassDescriptor {
                shape,
                orientation,
                margin,
                echo_pattern,
                posterior,
            })
    }

    proptest! {
        #[test]
        fn descriptor_serde_roundtrip(d in arb_descriptor()) {
            let json = serde_json::to_string(&d).unwrap();
            let back: MassDescriptor = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, d);
            let [s, o, m, e, p] = d.tokens();
            prop_assert_eq!(MassDescriptor::parse(s, o, m, e, p).unwrap(), d);
        }

        #[test]
        fn shift_without_sign_change_keeps_labels(
            xs in prop::array::uniform5(-10.0f64..10.0),
            eps in -5.0f64..5.0,
        ) {
            let crosses = xs.iter().any(|&x| (x >= 0.0) != (x + eps >= 0.0));
            prop_assume!(!crosses);
            let a = binarize_logits(&ConceptLogits::new(xs).unwrap());
            let b = binarize_logits(&ConceptLogits::new(xs.map(|x| x + eps)).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
