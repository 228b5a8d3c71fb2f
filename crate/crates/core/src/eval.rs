//! Outcome grouping (CP / IP / NS) and threshold-sweep evaluation.
//!
//! Oriented scores rank samples from "most novel" (low) to "most sign-like"
//! (high). A sample is flagged as a positive at threshold tau exactly when
//! its oriented score is below tau. AUROC is the area under the detection
//! rate versus false-alarm rate curve; AUPR the step area under the
//! precision-recall curve.

use crate::dataio::LogitRecord;
use crate::error::{Error, Result};
use crate::scores::{argmax_pair, score, ScoreFlags, ScorerSpec};

/// Outcome of one prediction: correctly predicted, incorrectly predicted, or
/// a non-sign (novel) input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeGroup {
    Cp,
    Ip,
    Ns,
}

impl OutcomeGroup {
    pub const ALL: [OutcomeGroup; 3] = [OutcomeGroup::Cp, OutcomeGroup::Ip, OutcomeGroup::Ns];

    pub fn name(self) -> &'static str {
        match self {
            OutcomeGroup::Cp => "CP",
            OutcomeGroup::Ip => "IP",
            OutcomeGroup::Ns => "NS",
        }
    }
}

/// Which outcomes count as the positive class during a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveDefinition {
    /// IP and NS are positive: "will this prediction be wrong?"
    WrongOrNovel,
    /// Only NS is positive: "is this input novel?"
    NovelOnly,
}

impl PositiveDefinition {
    pub fn name(self) -> &'static str {
        match self {
            PositiveDefinition::WrongOrNovel => "wrong_or_novel",
            PositiveDefinition::NovelOnly => "novel_only",
        }
    }

    pub fn is_positive(self, group: OutcomeGroup) -> bool {
        match self {
            PositiveDefinition::WrongOrNovel => group != OutcomeGroup::Cp,
            PositiveDefinition::NovelOnly => group == OutcomeGroup::Ns,
        }
    }
}

/// A record joined with its prediction, outcome group, and score.
#[derive(Debug, Clone)]
pub struct ScoredSample {
    pub sample_id: String,
    pub group_id: String,
    pub true_class: Option<usize>,
    pub is_novel: bool,
    pub predicted_class: usize,
    pub group: OutcomeGroup,
    pub raw_score: f64,
    pub oriented_score: f64,
    pub flags: ScoreFlags,
}

/// One point of a threshold sweep.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub threshold: f64,
    pub detection_rate: f64,
    pub false_alarm_rate: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Full sweep output plus scalar areas.
#[derive(Debug, Clone)]
pub struct CurveReport {
    pub points: Vec<CurvePoint>,
    pub auroc: f64,
    pub aupr: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// How many sweep points to emit. Scalar areas are always computed over all
/// unique thresholds.
#[derive(Debug, Clone, Copy)]
pub enum ThresholdSpec {
    AllUnique,
    Count(usize),
}

/// CP if predicted equals true class, IP otherwise, NS when novel. Exactly
/// one of (true class, novel flag) must be present.
pub fn classify_outcome(
    true_class: Option<usize>,
    is_novel: bool,
    predicted_class: usize,
) -> Result<OutcomeGroup> {
    match (true_class, is_novel) {
        (Some(_), true) => Err(Error::InvalidRecord(
            "record has both a true class and the novel flag".into(),
        )),
        (None, false) => Err(Error::InvalidRecord(
            "record has neither a true class nor the novel flag".into(),
        )),
        (None, true) => Ok(OutcomeGroup::Ns),
        (Some(t), false) => Ok(if t == predicted_class {
            OutcomeGroup::Cp
        } else {
            OutcomeGroup::Ip
        }),
    }
}

/// Score every record with one scorer, deriving the predicted class from the
/// logit argmax.
pub fn score_records(records: &[LogitRecord], spec: ScorerSpec) -> Result<Vec<ScoredSample>> {
    records
        .iter()
        .map(|record| {
            let predicted_class = argmax_pair(&record.logits).0;
            let group = classify_outcome(record.true_class, record.is_novel, predicted_class)?;
            let value = score(spec, &record.logits)?;
            Ok(ScoredSample {
                sample_id: record.sample_id.clone(),
                group_id: record.group_id.clone(),
                true_class: record.true_class,
                is_novel: record.is_novel,
                predicted_class,
                group,
                raw_score: value.raw,
                oriented_score: value.oriented,
                flags: value.flags,
            })
        })
        .collect()
}

struct RankedScores {
    /// (oriented score, is_positive), ascending by score.
    sorted: Vec<(f64, bool)>,
    n_pos: usize,
    n_neg: usize,
}

fn rank_scores(samples: &[ScoredSample], posdef: PositiveDefinition) -> Result<RankedScores> {
    let mut sorted = Vec::with_capacity(samples.len());
    for sample in samples {
        if !sample.oriented_score.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sample {} has non-finite oriented score",
                sample.sample_id
            )));
        }
        sorted.push((sample.oriented_score, posdef.is_positive(sample.group)));
    }
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_pos = sorted.iter().filter(|(_, p)| *p).count();
    let n_neg = sorted.len() - n_pos;
    Ok(RankedScores {
        sorted,
        n_pos,
        n_neg,
    })
}

/// Sweep every threshold between unique oriented scores, plus the -inf and
/// +inf endpoints. Requires at least one positive and one negative.
pub fn sweep(
    samples: &[ScoredSample],
    posdef: PositiveDefinition,
    thresholds: ThresholdSpec,
) -> Result<CurveReport> {
    let ranked = rank_scores(samples, posdef)?;
    if ranked.n_pos == 0 {
        return Err(Error::DegenerateEvaluation {
            side: "positive",
            positive: posdef.name(),
        });
    }
    if ranked.n_neg == 0 {
        return Err(Error::DegenerateEvaluation {
            side: "negative",
            positive: posdef.name(),
        });
    }

    let (n_pos, n_neg) = (ranked.n_pos as f64, ranked.n_neg as f64);
    let mut points = vec![CurvePoint {
        threshold: f64::NEG_INFINITY,
        detection_rate: 0.0,
        false_alarm_rate: 0.0,
        precision: 1.0, // nothing flagged
        recall: 0.0,
    }];

    let mut cum_pos = 0usize;
    let mut cum_neg = 0usize;
    let mut i = 0;
    while i < ranked.sorted.len() {
        let value = ranked.sorted[i].0;
        while i < ranked.sorted.len() && ranked.sorted[i].0 == value {
            if ranked.sorted[i].1 {
                cum_pos += 1;
            } else {
                cum_neg += 1;
            }
            i += 1;
        }
        let threshold = if i < ranked.sorted.len() {
            0.5 * value + 0.5 * ranked.sorted[i].0
        } else {
            f64::INFINITY
        };
        let flagged = (cum_pos + cum_neg) as f64;
        points.push(CurvePoint {
            threshold,
            detection_rate: cum_pos as f64 / n_pos,
            false_alarm_rate: cum_neg as f64 / n_neg,
            precision: cum_pos as f64 / flagged,
            recall: cum_pos as f64 / n_pos,
        });
    }

    let auroc = trapezoid_dr_far(&points);
    let aupr = step_area(&points);
    let points = match thresholds {
        ThresholdSpec::AllUnique => points,
        ThresholdSpec::Count(c) => {
            if c < 2 {
                return Err(Error::InvalidInput(
                    "threshold count must be at least 2".into(),
                ));
            }
            subsample_points(points, c)
        }
    };

    Ok(CurveReport {
        points,
        auroc,
        aupr,
        n_pos: ranked.n_pos,
        n_neg: ranked.n_neg,
    })
}

fn trapezoid_dr_far(points: &[CurvePoint]) -> f64 {
    let mut area = 0.0;
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        area += (b.false_alarm_rate - a.false_alarm_rate)
            * (b.detection_rate + a.detection_rate)
            * 0.5;
    }
    area
}

fn step_area(points: &[CurvePoint]) -> f64 {
    let mut area = 0.0;
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        area += (b.recall - a.recall) * b.precision;
    }
    area
}

fn subsample_points(points: Vec<CurvePoint>, count: usize) -> Vec<CurvePoint> {
    if points.len() <= count {
        return points;
    }
    let last = points.len() - 1;
    (0..count)
        .map(|i| points[i * last / (count - 1)])
        .collect()
}

/// Rank-statistic AUROC: the fraction of (positive, negative) pairs in which
/// the positive ranks as more novel (lower oriented score), ties counting
/// one half.
pub fn auroc(samples: &[ScoredSample], posdef: PositiveDefinition) -> Result<f64> {
    let ranked = rank_scores(samples, posdef)?;
    if ranked.n_pos == 0 {
        return Err(Error::DegenerateEvaluation {
            side: "positive",
            positive: posdef.name(),
        });
    }
    if ranked.n_neg == 0 {
        return Err(Error::DegenerateEvaluation {
            side: "negative",
            positive: posdef.name(),
        });
    }

    // Midranks over the ascending scores.
    let n = ranked.sorted.len();
    let mut pos_rank_sum = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && ranked.sorted[j].0 == ranked.sorted[i].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0; // average of ranks i+1 ..= j
        for item in &ranked.sorted[i..j] {
            if item.1 {
                pos_rank_sum += midrank;
            }
        }
        i = j;
    }
    let n_pos = ranked.n_pos as f64;
    let n_neg = ranked.n_neg as f64;
    // Pairs where the positive scores above the negative, ties half.
    let u_pos_greater = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok((n_pos * n_neg - u_pos_greater) / (n_pos * n_neg))
}

/// Step-interpolated area under the precision-recall curve. Unlike `sweep`
/// this tolerates a dataset with no negatives (precision is then 1
/// everywhere).
pub fn aupr(samples: &[ScoredSample], posdef: PositiveDefinition) -> Result<f64> {
    let ranked = rank_scores(samples, posdef)?;
    if ranked.n_pos == 0 {
        return Err(Error::DegenerateEvaluation {
            side: "positive",
            positive: posdef.name(),
        });
    }
    let n_pos = ranked.n_pos as f64;
    let mut area = 0.0;
    let mut cum_pos = 0usize;
    let mut cum_neg = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < ranked.sorted.len() {
        let value = ranked.sorted[i].0;
        while i < ranked.sorted.len() && ranked.sorted[i].0 == value {
            if ranked.sorted[i].1 {
                cum_pos += 1;
            } else {
                cum_neg += 1;
            }
            i += 1;
        }
        let recall = cum_pos as f64 / n_pos;
        let precision = cum_pos as f64 / (cum_pos + cum_neg) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Evaluate one scorer under both positive definitions:
/// (novel_only report, wrong_or_novel report).
pub fn evaluate_scorer(
    records: &[LogitRecord],
    spec: ScorerSpec,
) -> Result<(CurveReport, CurveReport)> {
    let samples = score_records(records, spec)?;
    let novel = sweep(&samples, PositiveDefinition::NovelOnly, ThresholdSpec::AllUnique)?;
    let wrong = sweep(
        &samples,
        PositiveDefinition::WrongOrNovel,
        ThresholdSpec::AllUnique,
    )?;
    Ok((novel, wrong))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::{LogitVector, ScorerKind};
    use proptest::prelude::*;

    fn sample(id: &str, group: OutcomeGroup, oriented: f64) -> ScoredSample {
        ScoredSample {
            sample_id: id.into(),
            group_id: "g1".into(),
            true_class: match group {
                OutcomeGroup::Ns => None,
                _ => Some(0),
            },
            is_novel: group == OutcomeGroup::Ns,
            predicted_class: match group {
                OutcomeGroup::Ip => 1,
                _ => 0,
            },
            group,
            raw_score: oriented,
            oriented_score: oriented,
            flags: Default::default(),
        }
    }

    fn dataset(pos: &[f64], neg: &[f64]) -> Vec<ScoredSample> {
        let mut out = Vec::new();
        for (i, &v) in pos.iter().enumerate() {
            out.push(sample(&format!("p{i}"), OutcomeGroup::Ns, v));
        }
        for (i, &v) in neg.iter().enumerate() {
            out.push(sample(&format!("n{i}"), OutcomeGroup::Cp, v));
        }
        out
    }

    #[test]
    fn classify_outcome_examples() {
        assert_eq!(
            classify_outcome(Some(3), false, 3).unwrap(),
            OutcomeGroup::Cp
        );
        assert_eq!(
            classify_outcome(Some(3), false, 1).unwrap(),
            OutcomeGroup::Ip
        );
        assert_eq!(classify_outcome(None, true, 7).unwrap(), OutcomeGroup::Ns);
        assert!(classify_outcome(Some(2), true, 2).is_err());
        assert!(classify_outcome(None, false, 2).is_err());
    }

    #[test]
    fn sweep_perfect_separation() {
        let samples = dataset(&[0.0], &[1.0]);
        let report = sweep(&samples, PositiveDefinition::NovelOnly, ThresholdSpec::AllUnique)
            .unwrap();
        assert_eq!(report.auroc, 1.0);
        assert!(report
            .points
            .iter()
            .any(|p| p.detection_rate == 1.0 && p.false_alarm_rate == 0.0));
        // Endpoints.
        let first = report.points.first().unwrap();
        let last = report.points.last().unwrap();
        assert_eq!(first.threshold, f64::NEG_INFINITY);
        assert_eq!((first.detection_rate, first.false_alarm_rate), (0.0, 0.0));
        assert_eq!(last.threshold, f64::INFINITY);
        assert_eq!((last.detection_rate, last.false_alarm_rate), (1.0, 1.0));
    }

    #[test]
    fn sweep_identical_multisets_gives_half() {
        let samples = dataset(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        let report = sweep(&samples, PositiveDefinition::NovelOnly, ThresholdSpec::AllUnique)
            .unwrap();
        assert!((report.auroc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sweep_interleaved_matches_pairwise_count() {
        // Positives score low; three of four (pos, neg) pairs have pos < neg.
        let samples = dataset(&[1.0, 3.0], &[2.0, 4.0]);
        let report = sweep(&samples, PositiveDefinition::NovelOnly, ThresholdSpec::AllUnique)
            .unwrap();
        assert!((report.auroc - 0.75).abs() < 1e-15);
        assert!((auroc(&samples, PositiveDefinition::NovelOnly).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sweep_monotone_rates_as_threshold_grows() {
        let samples = dataset(&[0.3, 1.2, 0.8, 2.0], &[1.0, 2.5, 0.9, 3.0, 1.7]);
        let report = sweep(&samples, PositiveDefinition::NovelOnly, ThresholdSpec::AllUnique)
            .unwrap();
        for pair in report.points.windows(2) {
            assert!(pair[1].threshold > pair[0].threshold);
            assert!(pair[1].detection_rate >= pair[0].detection_rate);
            assert!(pair[1].false_alarm_rate >= pair[0].false_alarm_rate);
        }
    }

    #[test]
    fn sweep_requires_both_sides() {
        let only_pos = dataset(&[1.0, 2.0], &[]);
        let err = sweep(&only_pos, PositiveDefinition::NovelOnly, ThresholdSpec::AllUnique)
            .unwrap_err();
        assert!(err.to_string().contains("negative"));

        let only_neg = dataset(&[], &[1.0, 2.0]);
        let err = sweep(&only_neg, PositiveDefinition::NovelOnly, ThresholdSpec::AllUnique)
            .unwrap_err();
        assert!(err.to_string().contains("positive"));
    }

    #[test]
    fn sweep_point_subsampling_keeps_endpoints() {
        let pos: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let neg: Vec<f64> = (0..40).map(|i| i as f64 + 0.5).collect();
        let samples = dataset(&pos, &neg);
        let full = sweep(&samples, PositiveDefinition::NovelOnly, ThresholdSpec::AllUnique)
            .unwrap();
        let sub = sweep(&samples, PositiveDefinition::NovelOnly, ThresholdSpec::Count(9))
            .unwrap();
        assert_eq!(sub.points.len(), 9);
        assert_eq!(sub.points[0].threshold, f64::NEG_INFINITY);
        assert_eq!(sub.points.last().unwrap().threshold, f64::INFINITY);
        assert_eq!(sub.auroc, full.auroc);
    }

    #[test]
    fn aupr_perfect_and_all_positive() {
        let samples = dataset(&[0.0, 0.5], &[1.0, 2.0]);
        assert_eq!(aupr(&samples, PositiveDefinition::NovelOnly).unwrap(), 1.0);

        let all_pos = dataset(&[0.4, 0.2, 0.9], &[]);
        assert_eq!(aupr(&all_pos, PositiveDefinition::NovelOnly).unwrap(), 1.0);
    }

    #[test]
    fn wrong_or_novel_counts_ip_as_positive() {
        let samples = vec![
            sample("a", OutcomeGroup::Cp, 3.0),
            sample("b", OutcomeGroup::Ip, 1.0),
            sample("c", OutcomeGroup::Ns, 0.5),
        ];
        let report = sweep(
            &samples,
            PositiveDefinition::WrongOrNovel,
            ThresholdSpec::AllUnique,
        )
        .unwrap();
        assert_eq!((report.n_pos, report.n_neg), (2, 1));
        assert_eq!(report.auroc, 1.0);
    }

    #[test]
    fn evaluate_scorer_without_novels_is_degenerate() {
        let records: Vec<LogitRecord> = (0..4)
            .map(|i| LogitRecord {
                sample_id: format!("s{i}"),
                group_id: "g1".into(),
                true_class: Some(0),
                is_novel: false,
                logits: LogitVector::new(vec![2.0, 1.0]).unwrap(),
            })
            .collect();
        let err = evaluate_scorer(&records, ScorerSpec::new(ScorerKind::Cs2)).unwrap_err();
        assert!(matches!(err, Error::DegenerateEvaluation { .. }));
    }

    /// O(n^2) pairwise oracle: positives are expected to score below
    /// negatives; ties earn half credit.
    fn pairwise_auroc(pos: &[f64], neg: &[f64]) -> f64 {
        let mut credit = 0.0;
        for &p in pos {
            for &n in neg {
                if p < n {
                    credit += 1.0;
                } else if p == n {
                    credit += 0.5;
                }
            }
        }
        credit / (pos.len() * neg.len()) as f64
    }

    proptest! {
        #[test]
        fn rank_auroc_matches_trapezoid(
            pos in proptest::collection::vec(-5.0f64..5.0, 1..30),
            neg in proptest::collection::vec(-5.0f64..5.0, 1..30),
        ) {
            let samples = dataset(&pos, &neg);
            let by_rank = auroc(&samples, PositiveDefinition::NovelOnly).unwrap();
            let by_sweep = sweep(&samples, PositiveDefinition::NovelOnly, ThresholdSpec::AllUnique)
                .unwrap()
                .auroc;
            prop_assert!((by_rank - by_sweep).abs() < 1e-9);
            prop_assert!((by_rank - pairwise_auroc(&pos, &neg)).abs() < 1e-12);
        }

        #[test]
        fn auroc_invariant_under_increasing_transform(
            pos in proptest::collection::vec(-5.0f64..5.0, 1..20),
            neg in proptest::collection::vec(-5.0f64..5.0, 1..20),
        ) {
            let transform = |v: f64| (v * 0.5).exp() + v.powi(3) / 10.0;
            let base = auroc(&dataset(&pos, &neg), PositiveDefinition::NovelOnly).unwrap();
            let mapped_pos: Vec<f64> = pos.iter().map(|&v| transform(v)).collect();
            let mapped_neg: Vec<f64> = neg.iter().map(|&v| transform(v)).collect();
            let mapped = auroc(&dataset(&mapped_pos, &mapped_neg), PositiveDefinition::NovelOnly)
                .unwrap();
            prop_assert!((base - mapped).abs() < 1e-12);
        }

        #[test]
        fn auroc_flip_complements(
            pos in proptest::collection::vec(-5.0f64..5.0, 1..20),
            neg in proptest::collection::vec(-5.0f64..5.0, 1..20),
        ) {
            let base = auroc(&dataset(&pos, &neg), PositiveDefinition::NovelOnly).unwrap();
            let flipped_pos: Vec<f64> = pos.iter().map(|&v| -v).collect();
            let flipped_neg: Vec<f64> = neg.iter().map(|&v| -v).collect();
            let flipped = auroc(&dataset(&flipped_pos, &flipped_neg), PositiveDefinition::NovelOnly)
                .unwrap();
            prop_assert!((base + flipped - 1.0).abs() < 1e-15);
        }

        #[test]
        fn auroc_invariant_under_balanced_duplication(
            pos in proptest::collection::vec(-5.0f64..5.0, 1..15),
            neg in proptest::collection::vec(-5.0f64..5.0, 1..15),
        ) {
            let base = auroc(&dataset(&pos, &neg), PositiveDefinition::NovelOnly).unwrap();
            let mut dup_pos = pos.clone();
            dup_pos.extend_from_slice(&pos);
            let mut dup_neg = neg.clone();
            dup_neg.extend_from_slice(&neg);
            let doubled = auroc(&dataset(&dup_pos, &dup_neg), PositiveDefinition::NovelOnly)
                .unwrap();
            prop_assert!((base - doubled).abs() < 1e-12);
        }
    }
}
