//! Scalar scoring functions over a classifier's penultimate (logit) vector:
//! softmax, confidence ratio, the confidence scores cs1..cs4, and the
//! latent-cognizance family (identity, exp, quadratic, cubic, absolute).
//!
//! Every score carries an orientation so that downstream evaluation can treat
//! all scorers uniformly: a larger *oriented* value always means "more likely
//! an in-distribution (sign) input".

use crate::error::{Error, Result};

/// A penultimate activation vector. Guaranteed finite with at least two
/// components, so a second argmax always exists.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector {
    values: Vec<f64>,
}

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "logit vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "logit a_{i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of classes K.
    pub fn class_count(&self) -> usize {
        self.values.len()
    }
}

/// A softmax-normalized probability vector: components in [0,1], summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxVector {
    values: Vec<f64>,
}

impl SoftmaxVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Which scoring function to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScorerKind {
    /// Confidence ratio a_k / a_j of the two largest logits.
    Cr,
    /// cs1 = y_k, the softmax maximum.
    Cs1,
    /// cs2 = a_k, the maximal logit.
    Cs2,
    /// cs3 = log(y_k / y_j) = a_k - a_j.
    Cs3,
    /// cs4 = log(y_k / (1 - y_k)), the logit function of y_k.
    Cs4,
    /// Sum of g(a) = a over all logits.
    LcIdentity,
    /// Sum of g(a) = e^a.
    LcExp,
    /// Sum of g(a) = a^2.
    LcQuadratic,
    /// Sum of g(a) = a^3.
    LcCubic,
    /// Sum of g(a) = |a|.
    LcAbsolute,
}

impl ScorerKind {
    /// All scorers in the fixed reporting order.
    pub const ALL: [ScorerKind; 10] = [
        ScorerKind::Cr,
        ScorerKind::Cs1,
        ScorerKind::Cs2,
        ScorerKind::Cs3,
        ScorerKind::Cs4,
        ScorerKind::LcIdentity,
        ScorerKind::LcExp,
        ScorerKind::LcQuadratic,
        ScorerKind::LcCubic,
        ScorerKind::LcAbsolute,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Cr => "cr",
            ScorerKind::Cs1 => "cs1",
            ScorerKind::Cs2 => "cs2",
            ScorerKind::Cs3 => "cs3",
            ScorerKind::Cs4 => "cs4",
            ScorerKind::LcIdentity => "lc_identity",
            ScorerKind::LcExp => "lc_exp",
            ScorerKind::LcQuadratic => "lc_quadratic",
            ScorerKind::LcCubic => "lc_cubic",
            ScorerKind::LcAbsolute => "lc_absolute",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// The identity cognizance ranks inputs the opposite way from every other
    /// scorer: a higher sum associates with a novel input.
    pub fn default_orientation(self) -> Orientation {
        match self {
            ScorerKind::LcIdentity => Orientation::HighMeansNonsign,
            _ => Orientation::HighMeansSign,
        }
    }

    pub fn is_cognizance(self) -> bool {
        matches!(
            self,
            ScorerKind::LcIdentity
                | ScorerKind::LcExp
                | ScorerKind::LcQuadratic
                | ScorerKind::LcCubic
                | ScorerKind::LcAbsolute
        )
    }
}

/// Whether a large raw score indicates an in-distribution ("sign") input or a
/// novel ("non-sign") one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    HighMeansSign,
    HighMeansNonsign,
}

/// A scorer selection plus its orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    pub orientation: Orientation,
}

impl ScorerSpec {
    /// Spec with the kind's default orientation.
    pub fn new(kind: ScorerKind) -> Self {
        Self {
            kind,
            orientation: kind.default_orientation(),
        }
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }
}

/// Quality annotations attached to a score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScoreFlags {
    /// Confidence ratio computed against a negative denominator.
    pub unreliable: bool,
    /// cs4 saturated (softmax maximum indistinguishable from 1).
    pub clamped: bool,
    /// Raw sum overflowed; for lc_exp the reported value is in log domain.
    pub overflow: bool,
}

impl ScoreFlags {
    pub fn is_empty(&self) -> bool {
        !(self.unreliable || self.clamped || self.overflow)
    }

    /// Pipe-joined flag names, empty string when clean.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.unreliable {
            parts.push("unreliable");
        }
        if self.clamped {
            parts.push("clamped");
        }
        if self.overflow {
            parts.push("overflow");
        }
        parts.join("|")
    }
}

/// A computed score. `oriented` equals `raw` under `HighMeansSign` and `-raw`
/// under `HighMeansNonsign`, so larger oriented values always mean more
/// sign-like.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreValue {
    pub raw: f64,
    pub oriented: f64,
    pub flags: ScoreFlags,
    /// Log-domain companion of the raw sum (lc_exp only).
    pub log_value: Option<f64>,
}

impl ScoreValue {
    fn new(raw: f64, orientation: Orientation) -> Self {
        let oriented = match orientation {
            Orientation::HighMeansSign => raw,
            Orientation::HighMeansNonsign => -raw,
        };
        Self {
            raw,
            oriented,
            flags: ScoreFlags::default(),
            log_value: None,
        }
    }
}

/// Softmax activation with max-subtraction so large logits cannot overflow.
pub fn softmax(logits: &LogitVector) -> SoftmaxVector {
    let max = logits
        .values()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.values().iter().map(|&a| (a - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    SoftmaxVector {
        values: exps.into_iter().map(|e| e / total).collect(),
    }
}

/// Indices of the largest and second-largest logits, ties broken by lowest
/// index.
pub fn argmax_pair(logits: &LogitVector) -> (usize, usize) {
    let values = logits.values();
    let mut k = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[k] {
            k = i;
        }
    }
    let mut j = usize::MAX;
    for (i, &v) in values.iter().enumerate() {
        if i == k {
            continue;
        }
        if j == usize::MAX || v > values[j] {
            j = i;
        }
    }
    (k, j)
}

/// Confidence ratio a_k / a_j. Collapses (errors) when a_j is exactly zero;
/// a negative denominator yields a value tagged `unreliable`.
pub fn confidence_ratio(logits: &LogitVector) -> Result<ScoreValue> {
    let (k, j) = argmax_pair(logits);
    let (ak, aj) = (logits.values()[k], logits.values()[j]);
    if aj == 0.0 {
        return Err(Error::DivisionByZero);
    }
    let mut score = ScoreValue::new(ak / aj, ScorerKind::Cr.default_orientation());
    score.flags.unreliable = aj < 0.0;
    Ok(score)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = values.map(|a| (a - max).exp()).sum();
    max + total.ln()
}

/// One of the confidence scores cs1..cs4.
pub fn confidence_score(spec: ScorerSpec, logits: &LogitVector) -> Result<ScoreValue> {
    let (k, j) = argmax_pair(logits);
    let values = logits.values();
    let raw = match spec.kind {
        ScorerKind::Cs1 => softmax(logits).values()[k],
        ScorerKind::Cs2 => values[k],
        // Equal to log(y_k / y_j) but never routed through the softmax
        // quotient.
        ScorerKind::Cs3 => values[k] - values[j],
        ScorerKind::Cs4 => {
            let yk = softmax(logits).values()[k];
            if yk >= 1.0 {
                // Saturated softmax: clamp at y = 1 - 1e-15 and flag it.
                let y = 1.0f64 - 1e-15;
                let mut score =
                    ScoreValue::new((y / (1.0 - y)).ln(), spec.orientation);
                score.flags.clamped = true;
                return Ok(score);
            }
            // log(y_k / (1 - y_k)) = a_k - log sum_{i != k} e^{a_i}
            let rest = values
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, &a)| a)
                .collect::<Vec<_>>();
            values[k] - log_sum_exp(rest.iter().copied())
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "{} is not a confidence score",
                other.name()
            )))
        }
    };
    Ok(ScoreValue::new(raw, spec.orientation))
}

fn gtilde(kind: ScorerKind, a: f64) -> f64 {
    match kind {
        ScorerKind::LcIdentity => a,
        ScorerKind::LcExp => a.exp(),
        ScorerKind::LcQuadratic => a * a,
        ScorerKind::LcCubic => a * a * a,
        ScorerKind::LcAbsolute => a.abs(),
        _ => unreachable!("not a cognizance kind"),
    }
}

/// Per-class cognizance values g(a_i).
pub fn cognizance_per_class(spec: ScorerSpec, logits: &LogitVector) -> Result<Vec<f64>> {
    if !spec.kind.is_cognizance() {
        return Err(Error::InvalidInput(format!(
            "{} is not a cognizance function",
            spec.kind.name()
        )));
    }
    Ok(logits
        .values()
        .iter()
        .map(|&a| gtilde(spec.kind, a))
        .collect())
}

/// Aggregate cognizance sum over all classes. For lc_exp the log-sum-exp
/// companion is always retained, and on overflow it replaces the raw sum
/// (flagged) so the score stays finite.
pub fn cognizance_sum(spec: ScorerSpec, logits: &LogitVector) -> Result<ScoreValue> {
    let per_class = cognizance_per_class(spec, logits)?;
    let raw: f64 = per_class.iter().sum();
    let mut score = ScoreValue::new(raw, spec.orientation);
    if spec.kind == ScorerKind::LcExp {
        let lse = log_sum_exp(logits.values().iter().copied());
        score.log_value = Some(lse);
        if !raw.is_finite() {
            score = ScoreValue::new(lse, spec.orientation);
            score.log_value = Some(lse);
            score.flags.overflow = true;
        }
    } else if !raw.is_finite() {
        score.flags.overflow = true;
    }
    Ok(score)
}

/// Apply any scorer to a logit vector.
pub fn score(spec: ScorerSpec, logits: &LogitVector) -> Result<ScoreValue> {
    match spec.kind {
        ScorerKind::Cr => {
            let base = confidence_ratio(logits)?;
            let mut rescored = ScoreValue::new(base.raw, spec.orientation);
            rescored.flags = base.flags;
            Ok(rescored)
        }
        ScorerKind::Cs1 | ScorerKind::Cs2 | ScorerKind::Cs3 | ScorerKind::Cs4 => {
            confidence_score(spec, logits)
        }
        _ => cognizance_sum(spec, logits),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lv(values: &[f64]) -> LogitVector {
        LogitVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn logit_vector_rejects_short_and_nonfinite() {
        assert!(LogitVector::new(vec![1.0]).is_err());
        assert!(LogitVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(LogitVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn softmax_symmetry_and_shift() {
        let y = softmax(&lv(&[0.0, 0.0]));
        assert_eq!(y.values(), &[0.5, 0.5]);
        for c in [-100.0, 0.0, 777.0] {
            let y = softmax(&lv(&[c, c, c]));
            for &v in y.values() {
                assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        // exp(i) / (e + e^2 + e^3), evaluated at 40 decimal digits.
        let expected = [
            0.09003057317038046,
            0.24472847105479765,
            0.6652409557748219,
        ];
        let y = softmax(&lv(&[1.0, 2.0, 3.0]));
        for (got, want) in y.values().iter().zip(expected) {
            assert_relative_eq!(got, &want, max_relative = 1e-12);
        }
        let sum: f64 = y.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn argmax_pair_breaks_ties_by_lowest_index() {
        assert_eq!(argmax_pair(&lv(&[4.0, 2.0, 1.0])), (0, 1));
        assert_eq!(argmax_pair(&lv(&[1.0, 3.0, 3.0])), (1, 2));
        assert_eq!(argmax_pair(&lv(&[5.0, 5.0])), (0, 1));
    }

    #[test]
    fn confidence_ratio_basic_and_failure_modes() {
        let s = confidence_ratio(&lv(&[4.0, 2.0, 1.0])).unwrap();
        assert_eq!(s.raw, 2.0);
        assert!(s.flags.is_empty());

        assert!(matches!(
            confidence_ratio(&lv(&[3.0, 0.0, -1.0])),
            Err(Error::DivisionByZero)
        ));

        let s = confidence_ratio(&lv(&[1.5, -0.5])).unwrap();
        assert_eq!(s.raw, -3.0);
        assert!(s.flags.unreliable);
    }

    #[test]
    fn confidence_scores_match_frozen_values() {
        let spec = |k| ScorerSpec::new(k);
        assert_eq!(
            confidence_score(spec(ScorerKind::Cs2), &lv(&[4.0, 2.0, 1.0]))
                .unwrap()
                .raw,
            4.0
        );
        for c in [-3.0, 0.0, 12.5] {
            assert_eq!(
                confidence_score(spec(ScorerKind::Cs3), &lv(&[c, c]))
                    .unwrap()
                    .raw,
                0.0
            );
        }
        let cs1 = confidence_score(spec(ScorerKind::Cs1), &lv(&[1.0, 2.0, 3.0])).unwrap();
        assert_relative_eq!(cs1.raw, 0.6652409557748219, max_relative = 1e-12);
        let cs4 = confidence_score(spec(ScorerKind::Cs4), &lv(&[0.0, 0.0])).unwrap();
        assert_eq!(cs4.raw, 0.0);
        // 3 - log(e + e^2), evaluated at 40 decimal digits.
        let cs4 = confidence_score(spec(ScorerKind::Cs4), &lv(&[1.0, 2.0, 3.0])).unwrap();
        assert_relative_eq!(cs4.raw, 0.6867383124817772, max_relative = 1e-12);
    }

    #[test]
    fn cs4_saturation_is_clamped_and_flagged() {
        let s = confidence_score(ScorerSpec::new(ScorerKind::Cs4), &lv(&[100.0, 0.0])).unwrap();
        assert!(s.flags.clamped);
        let y = 1.0f64 - 1e-15;
        assert_eq!(s.raw, (y / (1.0 - y)).ln());
    }

    #[test]
    fn cognizance_sums_match_frozen_values() {
        let spec = |k| ScorerSpec::new(k);
        assert_eq!(
            cognizance_sum(spec(ScorerKind::LcCubic), &lv(&[1.0, -1.0]))
                .unwrap()
                .raw,
            0.0
        );
        assert_eq!(
            cognizance_sum(spec(ScorerKind::LcAbsolute), &lv(&[1.0, -1.0]))
                .unwrap()
                .raw,
            2.0
        );
        // e + e^2 + e^3, evaluated at 40 decimal digits.
        let s = cognizance_sum(spec(ScorerKind::LcExp), &lv(&[1.0, 2.0, 3.0])).unwrap();
        assert_relative_eq!(s.raw, 30.192874850577363, max_relative = 1e-12);
        assert!(s.log_value.is_some());

        let s = cognizance_sum(spec(ScorerKind::LcIdentity), &lv(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.raw, 6.0);
        assert_eq!(s.oriented, -6.0);
    }

    #[test]
    fn cognizance_per_class_examples() {
        let spec = |k| ScorerSpec::new(k);
        assert_eq!(
            cognizance_per_class(spec(ScorerKind::LcQuadratic), &lv(&[2.0, -2.0])).unwrap(),
            vec![4.0, 4.0]
        );
        assert_eq!(
            cognizance_per_class(spec(ScorerKind::LcCubic), &lv(&[0.0, 1.0])).unwrap(),
            vec![0.0, 1.0]
        );
        assert_eq!(
            cognizance_per_class(spec(ScorerKind::LcExp), &lv(&[0.0, 0.0])).unwrap(),
            vec![1.0, 1.0]
        );
    }

    #[test]
    fn lc_exp_overflow_reports_log_domain() {
        let s = cognizance_sum(ScorerSpec::new(ScorerKind::LcExp), &lv(&[800.0, 700.0])).unwrap();
        assert!(s.flags.overflow);
        assert!(s.raw.is_finite());
        assert_relative_eq!(s.raw, s.log_value.unwrap(), max_relative = 1e-15);
        assert_relative_eq!(
            s.raw,
            800.0 + (1.0 + (-100.0f64).exp()).ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn scorer_names_round_trip() {
        for kind in ScorerKind::ALL {
            assert_eq!(ScorerKind::from_name(kind.name()), Some(kind));
        }
        assert_eq!(ScorerKind::from_name("bogus"), None);
    }

    proptest! {
        #[test]
        fn softmax_shift_invariance(
            values in proptest::collection::vec(-30.0f64..30.0, 2..12),
            shift in -50.0f64..50.0,
        ) {
            let base = lv(&values);
            let shifted = lv(&values.iter().map(|v| v + shift).collect::<Vec<_>>());
            let (ya, yb) = (softmax(&base), softmax(&shifted));
            prop_assert_eq!(argmax_pair(&base).0, argmax_pair(&shifted).0);
            for (a, b) in ya.values().iter().zip(yb.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn cs3_equals_log_softmax_ratio(
            values in proptest::collection::vec(-30.0f64..30.0, 2..12),
        ) {
            let logits = lv(&values);
            let (k, j) = argmax_pair(&logits);
            let y = softmax(&logits);
            let cs3 = confidence_score(ScorerSpec::new(ScorerKind::Cs3), &logits)
                .unwrap()
                .raw;
            let via_softmax = (y.values()[k] / y.values()[j]).ln();
            prop_assert!(via_softmax.is_finite());
            prop_assert!((cs3 - via_softmax).abs() < 1e-9);
            prop_assert!(cs3 >= 0.0);
        }

        #[test]
        fn softmax_argmax_consistency(
            values in proptest::collection::vec(-30.0f64..30.0, 2..12),
        ) {
            let logits = lv(&values);
            let y = softmax(&logits);
            let ysm = LogitVector::new(y.values().to_vec()).unwrap();
            prop_assert_eq!(argmax_pair(&logits).0, argmax_pair(&ysm).0);
        }

        #[test]
        fn cognizance_sum_matches_per_class(
            values in proptest::collection::vec(-20.0f64..20.0, 2..12),
        ) {
            let logits = lv(&values);
            for kind in ScorerKind::ALL.into_iter().filter(|k| k.is_cognizance()) {
                let spec = ScorerSpec::new(kind);
                let total = cognizance_sum(spec, &logits).unwrap().raw;
                let by_parts: f64 = cognizance_per_class(spec, &logits)
                    .unwrap()
                    .iter()
                    .sum();
                prop_assert!((total - by_parts).abs() <= 1e-12 * by_parts.abs().max(1.0));
            }
        }

        #[test]
        fn cr_exceeds_one_on_positive_ordered_logits(
            mut values in proptest::collection::vec(0.1f64..40.0, 2..10),
        ) {
            values.sort_by(f64::total_cmp);
            values.reverse();
            values[0] += 0.5; // force a_k > a_j > 0
            let s = confidence_ratio(&lv(&values)).unwrap();
            prop_assert!(s.raw > 1.0);
            prop_assert!(s.flags.is_empty());
        }

        #[test]
        fn cs1_lies_in_unit_interval(
            values in proptest::collection::vec(-30.0f64..30.0, 2..12),
        ) {
            let s = confidence_score(ScorerSpec::new(ScorerKind::Cs1), &lv(&values)).unwrap();
            prop_assert!(s.raw > 0.0 && s.raw <= 1.0);
        }
    }
}
