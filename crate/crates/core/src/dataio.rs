//! Logit-record ingestion and the grouped rotating fold plan.
//!
//! The logit CSV is the ingestion boundary of the whole pipeline: any
//! classifier that can dump its penultimate activations can be evaluated.
//! Layout: `sample_id, group_id, true_class, is_novel, a_0 .. a_{K-1}`,
//! where `true_class` is empty and `is_novel` is 1 for novel records.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::report::{fmt_f64, write_atomic};
use crate::scores::LogitVector;

/// One sample's penultimate vector plus its ground-truth annotations.
#[derive(Debug, Clone)]
pub struct LogitRecord {
    pub sample_id: String,
    pub group_id: String,
    pub true_class: Option<usize>,
    pub is_novel: bool,
    pub logits: LogitVector,
}

impl LogitRecord {
    pub fn new(
        sample_id: String,
        group_id: String,
        true_class: Option<usize>,
        is_novel: bool,
        logits: LogitVector,
    ) -> Result<Self> {
        match (true_class, is_novel) {
            (Some(_), true) => Err(Error::InvalidRecord(format!(
                "sample {sample_id} has both a true class and the novel flag"
            ))),
            (None, false) => Err(Error::InvalidRecord(format!(
                "sample {sample_id} has neither a true class nor the novel flag"
            ))),
            _ => Ok(Self {
                sample_id,
                group_id,
                true_class,
                is_novel,
                logits,
            }),
        }
    }
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Read logit records from any reader. The header fixes K; every row must
/// match it.
pub fn read_logit_records<R: Read>(reader: R) -> Result<Vec<LogitRecord>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers = csv_reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.len() < 6 {
        return Err(parse_err(
            1,
            "header must be sample_id, group_id, true_class, is_novel, a_0 .. a_{K-1} with K >= 2",
        ));
    }
    let fixed = ["sample_id", "group_id", "true_class", "is_novel"];
    for (i, name) in fixed.iter().enumerate() {
        if headers.get(i) != Some(name) {
            return Err(parse_err(
                1,
                format!("header column {} must be '{name}'", i + 1),
            ));
        }
    }
    let k = headers.len() - fixed.len();
    for i in 0..k {
        let expected = format!("a_{i}");
        if headers.get(fixed.len() + i) != Some(expected.as_str()) {
            return Err(parse_err(
                1,
                format!("logit column {} must be '{expected}'", fixed.len() + i + 1),
            ));
        }
    }

    let mut records = Vec::new();
    for (index, row) in csv_reader.records().enumerate() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(index as u64 + 2);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(index as u64 + 2);
        if row.len() != fixed.len() + k {
            return Err(parse_err(
                line,
                format!(
                    "expected {} fields (K = {k}), found {}",
                    fixed.len() + k,
                    row.len()
                ),
            ));
        }

        let sample_id = row[0].to_string();
        let group_id = row[1].to_string();
        let true_class = if row[2].is_empty() {
            None
        } else {
            Some(row[2].parse::<usize>().map_err(|_| {
                parse_err(line, format!("true_class '{}' is not a class index", &row[2]))
            })?)
        };
        let is_novel = match &row[3] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(line, format!("is_novel must be 0 or 1, got '{other}'"))),
        };

        let mut logits = Vec::with_capacity(k);
        for i in 0..k {
            let field = &row[fixed.len() + i];
            let value: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("a_{i} '{field}' is not a number")))?;
            if !value.is_finite() {
                return Err(parse_err(line, format!("a_{i} '{field}' is not finite")));
            }
            logits.push(value);
        }
        let logits = LogitVector::new(logits)
            .map_err(|e| parse_err(line, e.to_string()))?;

        let record = LogitRecord::new(sample_id, group_id, true_class, is_novel, logits)
            .map_err(|e| parse_err(line, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_logit_csv(path: &Path) -> Result<Vec<LogitRecord>> {
    let file = std::fs::File::open(path)?;
    read_logit_records(std::io::BufReader::new(file))
}

/// Serialize records back to the logit CSV layout, floats at 17 significant
/// digits.
pub fn logit_csv_string(records: &[LogitRecord]) -> Result<String> {
    let k = records
        .first()
        .map(|r| r.logits.class_count())
        .ok_or_else(|| Error::InvalidInput("cannot serialize an empty record set".into()))?;
    let mut out = String::from("sample_id,group_id,true_class,is_novel");
    for i in 0..k {
        out.push_str(&format!(",a_{i}"));
    }
    out.push('\n');
    for record in records {
        if record.logits.class_count() != k {
            return Err(Error::InvalidInput(format!(
                "sample {} has K = {}, dataset has K = {k}",
                record.sample_id,
                record.logits.class_count()
            )));
        }
        out.push_str(&record.sample_id);
        out.push(',');
        out.push_str(&record.group_id);
        out.push(',');
        if let Some(t) = record.true_class {
            out.push_str(&t.to_string());
        }
        out.push(',');
        out.push(if record.is_novel { '1' } else { '0' });
        for value in record.logits.values() {
            out.push(',');
            out.push_str(&fmt_f64(*value));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_logit_csv(path: &Path, records: &[LogitRecord]) -> Result<()> {
    write_atomic(path, logit_csv_string(records)?.as_bytes())
}

/// Group ids in order of first appearance.
pub fn group_ids(records: &[LogitRecord]) -> Vec<String> {
    let mut seen = Vec::new();
    for record in records {
        if !seen.contains(&record.group_id) {
            seen.push(record.group_id.clone());
        }
    }
    seen
}

/// One rotation of the fold plan. Fold indices are 1-based.
#[derive(Debug, Clone)]
pub struct Fold {
    pub index: usize,
    pub test_group_ids: Vec<String>,
    pub train_group_ids: Vec<String>,
}

impl Fold {
    /// Test-side records: every record in a test group, plus every novel
    /// record regardless of group (novel data is evaluation-only).
    pub fn test_records<'a>(&self, records: &'a [LogitRecord]) -> Vec<&'a LogitRecord> {
        records
            .iter()
            .filter(|r| r.is_novel || self.test_group_ids.contains(&r.group_id))
            .collect()
    }

    /// Train-side records: non-novel records in the train groups.
    pub fn train_records<'a>(&self, records: &'a [LogitRecord]) -> Vec<&'a LogitRecord> {
        records
            .iter()
            .filter(|r| !r.is_novel && self.train_group_ids.contains(&r.group_id))
            .collect()
    }
}

/// Deterministic grouped rotating split: fold f tests the window of
/// `window` consecutive groups starting at position f-1, wrapping modulo
/// `cycle`.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub n_groups: usize,
    pub window: usize,
    pub n_folds: usize,
    pub cycle: usize,
    pub folds: Vec<Fold>,
}

/// Build the rotating plan. `cycle` defaults to `n_folds`, which reproduces
/// a rotation where the last fold wraps back to the first groups.
pub fn make_fold_plan(
    group_ids: &[String],
    window: usize,
    n_folds: usize,
    cycle: Option<usize>,
) -> Result<FoldPlan> {
    let n_groups = group_ids.len();
    if n_groups < 2 {
        return Err(Error::InvalidPlan(format!(
            "need at least 2 groups, got {n_groups}"
        )));
    }
    for (i, id) in group_ids.iter().enumerate() {
        if group_ids[..i].contains(id) {
            return Err(Error::InvalidPlan(format!("duplicate group id '{id}'")));
        }
    }
    if window == 0 {
        return Err(Error::InvalidPlan("test window must be at least 1".into()));
    }
    if n_folds == 0 {
        return Err(Error::InvalidPlan("need at least 1 fold".into()));
    }
    if window >= n_groups {
        return Err(Error::InvalidPlan(format!(
            "test window {window} must be smaller than the number of groups {n_groups}"
        )));
    }
    let cycle = cycle.unwrap_or(n_folds);
    if cycle > n_groups {
        return Err(Error::InvalidPlan(format!(
            "cycle {cycle} exceeds the number of groups {n_groups}"
        )));
    }
    if window >= cycle {
        return Err(Error::InvalidPlan(format!(
            "test window {window} must be smaller than the cycle {cycle}"
        )));
    }

    let folds = (1..=n_folds)
        .map(|index| {
            let test_group_ids: Vec<String> = (0..window)
                .map(|offset| group_ids[(index - 1 + offset) % cycle].clone())
                .collect();
            let train_group_ids: Vec<String> = group_ids
                .iter()
                .filter(|id| !test_group_ids.contains(id))
                .cloned()
                .collect();
            Fold {
                index,
                test_group_ids,
                train_group_ids,
            }
        })
        .collect();

    Ok(FoldPlan {
        n_groups,
        window,
        n_folds,
        cycle,
        folds,
    })
}

/// Fold plan as CSV rows (fold, role, group_id).
pub fn fold_plan_csv_string(plan: &FoldPlan) -> String {
    let mut out = String::from("fold,role,group_id\n");
    for fold in &plan.folds {
        for id in &fold.test_group_ids {
            out.push_str(&format!("{},test,{id}\n", fold.index));
        }
        for id in &fold.train_group_ids {
            out.push_str(&format!("{},train,{id}\n", fold.index));
        }
    }
    out
}

pub fn write_fold_plan_csv(path: &Path, plan: &FoldPlan) -> Result<()> {
    write_atomic(path, fold_plan_csv_string(plan).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn reads_labeled_and_novel_rows() {
        let csv = "sample_id,group_id,true_class,is_novel,a_0,a_1,a_2\n\
                   s1,g1,2,0,0.1,0.2,0.9\n\
                   s2,g1,,1,0.1,0.2,0.9\n";
        let records = read_logit_records(csv.as_bytes()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].true_class, Some(2));
        assert_eq!(records[0].logits.class_count(), 3);
        assert!(records[1].is_novel);
        assert_eq!(records[1].true_class, None);
    }

    #[test]
    fn accepts_scientific_notation() {
        let csv = "sample_id,group_id,true_class,is_novel,a_0,a_1\n\
                   s1,g1,0,0,1.5e-3,-2.25E2\n";
        let records = read_logit_records(csv.as_bytes()).unwrap();
        assert_eq!(records[0].logits.values(), &[1.5e-3, -225.0]);
    }

    #[test]
    fn rejects_nan_with_line_number() {
        let csv = "sample_id,group_id,true_class,is_novel,a_0,a_1\n\
                   s1,g1,0,0,0.5,0.1\n\
                   s2,g1,1,0,NaN,0.2\n";
        let err = read_logit_records(csv.as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("a_0"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_ragged_rows_and_bad_annotations() {
        let ragged = "sample_id,group_id,true_class,is_novel,a_0,a_1\n\
                      s1,g1,0,0,0.5\n";
        assert!(matches!(
            read_logit_records(ragged.as_bytes()).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));

        let both = "sample_id,group_id,true_class,is_novel,a_0,a_1\n\
                    s1,g1,3,1,0.5,0.1\n";
        assert!(matches!(
            read_logit_records(both.as_bytes()).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));

        let neither = "sample_id,group_id,true_class,is_novel,a_0,a_1\n\
                       s1,g1,,0,0.5,0.1\n";
        assert!(read_logit_records(neither.as_bytes()).is_err());
    }

    #[test]
    fn rejects_bad_header() {
        let csv = "sample,group_id,true_class,is_novel,a_0,a_1\ns1,g1,0,0,1,2\n";
        assert!(matches!(
            read_logit_records(csv.as_bytes()).unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
        let csv = "sample_id,group_id,true_class,is_novel,a_0,a_5\ns1,g1,0,0,1,2\n";
        assert!(read_logit_records(csv.as_bytes()).is_err());
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let csv = "sample_id,group_id,true_class,is_novel,a_0,a_1\n\
                   s1,g1,0,0,0.25,-3.5\n\
                   s2,g2,,1,1e-3,42.0\n";
        let records = read_logit_records(csv.as_bytes()).unwrap();
        let first = logit_csv_string(&records).unwrap();
        let reparsed = read_logit_records(first.as_bytes()).unwrap();
        let second = logit_csv_string(&reparsed).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn fold_plan_matches_rotating_windows() {
        let plan = make_fold_plan(&names(10), 3, 10, None).unwrap();
        assert_eq!(plan.folds[0].test_group_ids, ["1", "2", "3"]);
        assert_eq!(plan.folds[1].test_group_ids, ["2", "3", "4"]);
        assert_eq!(plan.folds[9].test_group_ids, ["10", "1", "2"]);
        for fold in &plan.folds {
            let mut all: Vec<&String> = fold
                .test_group_ids
                .iter()
                .chain(&fold.train_group_ids)
                .collect();
            all.sort();
            assert_eq!(all.len(), 10);
            all.dedup();
            assert_eq!(all.len(), 10, "train and test overlap");
        }
    }

    #[test]
    fn fold_plan_leave_one_group_out() {
        let plan = make_fold_plan(&names(4), 1, 4, None).unwrap();
        for (i, fold) in plan.folds.iter().enumerate() {
            assert_eq!(fold.test_group_ids, [names(4)[i].clone()]);
            assert_eq!(fold.train_group_ids.len(), 3);
        }
    }

    #[test]
    fn fold_plan_balanced_rotation() {
        // n_folds == n_groups: each group tested window times.
        let plan = make_fold_plan(&names(10), 3, 10, None).unwrap();
        for id in names(10) {
            let count = plan
                .folds
                .iter()
                .filter(|f| f.test_group_ids.contains(&id))
                .count();
            assert_eq!(count, 3);
        }
    }

    #[test]
    fn fold_plan_rejects_window_not_smaller_than_groups() {
        assert!(matches!(
            make_fold_plan(&names(3), 3, 3, None).unwrap_err(),
            Error::InvalidPlan(_)
        ));
        assert!(make_fold_plan(&names(5), 2, 5, Some(2)).is_err());
        assert!(make_fold_plan(&names(5), 2, 5, Some(6)).is_err());
    }

    #[test]
    fn twelve_groups_with_ten_cycle_leaves_tail_in_training() {
        let plan = make_fold_plan(&names(12), 3, 10, Some(10)).unwrap();
        assert_eq!(plan.folds[9].test_group_ids, ["10", "1", "2"]);
        for fold in &plan.folds {
            assert!(fold.train_group_ids.contains(&"11".to_string()));
            assert!(fold.train_group_ids.contains(&"12".to_string()));
        }
    }

    #[test]
    fn novel_records_always_attach_to_test() {
        let records = vec![
            LogitRecord::new(
                "a".into(),
                "1".into(),
                Some(0),
                false,
                LogitVector::new(vec![1.0, 0.0]).unwrap(),
            )
            .unwrap(),
            LogitRecord::new(
                "b".into(),
                "2".into(),
                Some(1),
                false,
                LogitVector::new(vec![0.0, 1.0]).unwrap(),
            )
            .unwrap(),
            LogitRecord::new(
                "n".into(),
                "1".into(),
                None,
                true,
                LogitVector::new(vec![0.5, 0.5]).unwrap(),
            )
            .unwrap(),
        ];
        let plan = make_fold_plan(&group_ids(&records), 1, 2, None).unwrap();
        for fold in &plan.folds {
            let test = fold.test_records(&records);
            assert!(test.iter().any(|r| r.sample_id == "n"));
            let train = fold.train_records(&records);
            assert!(train.iter().all(|r| !r.is_novel));
        }
    }
}
