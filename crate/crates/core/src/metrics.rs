//! Performance and group-fairness metrics.
//!
//! Equalized odds difference (EOD) is the maximum of the absolute TPR gap
//! and the absolute FPR gap between the two sensitive groups. A group with
//! no positives (or no negatives) has an undefined rate, which is an error
//! here rather than a silent NaN: callers report such clients as fairness
//! unmeasurable instead of corrupting weighted averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, RateKind, Result};

/// Confusion counts and rates for one sensitive group.
///
/// Counts are real-valued: integral when produced by [`confusion_by_group`],
/// expected (fractional) when produced by the exact derived-predictor
/// evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCell {
    pub true_pos: f64,
    pub false_pos: f64,
    pub true_neg: f64,
    pub false_neg: f64,
    pub tpr: f64,
    pub fpr: f64,
}

impl GroupCell {
    pub fn total(&self) -> f64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Per-group confusion statistics; index 0 holds group `sensitive = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub groups: [GroupCell; 2],
}

impl GroupRates {
    pub fn group(&self, sensitive: bool) -> &GroupCell {
        &self.groups[sensitive as usize]
    }

    pub fn tpr(&self, sensitive: bool) -> f64 {
        self.group(sensitive).tpr
    }

    pub fn fpr(&self, sensitive: bool) -> f64 {
        self.group(sensitive).fpr
    }

    /// Total evaluated sample count across both groups.
    pub fn total(&self) -> f64 {
        self.groups[0].total() + self.groups[1].total()
    }
}

fn check_lengths(lens: &[usize]) -> Result<()> {
    if lens.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::LengthMismatch(lens.to_vec()));
    }
    if lens[0] == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Exact confusion counts per sensitive group.
///
/// Errors with [`Error::RateUndefined`] if either group lacks positive
/// labels (TPR undefined) or negative labels (FPR undefined).
pub fn confusion_by_group(
    predictions: &[bool],
    labels: &[bool],
    attrs: &[bool],
) -> Result<GroupRates> {
    check_lengths(&[predictions.len(), labels.len(), attrs.len()])?;

    let mut counts = [[0u64; 4]; 2]; // [group][tp, fp, tn, fn]
    for ((&p, &y), &a) in predictions.iter().zip(labels).zip(attrs) {
        let slot = match (p, y) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        counts[a as usize][slot] += 1;
    }

    let mut groups = [GroupCell {
        true_pos: 0.0,
        false_pos: 0.0,
        true_neg: 0.0,
        false_neg: 0.0,
        tpr: 0.0,
        fpr: 0.0,
    }; 2];
    for g in 0..2 {
        let [tp, fp, tn, fn_] = counts[g].map(|c| c as f64);
        if tp + fn_ == 0.0 {
            return Err(Error::RateUndefined {
                group: g as u8,
                rate: RateKind::Tpr,
            });
        }
        if fp + tn == 0.0 {
            return Err(Error::RateUndefined {
                group: g as u8,
                rate: RateKind::Fpr,
            });
        }
        groups[g] = GroupCell {
            true_pos: tp,
            false_pos: fp,
            true_neg: tn,
            false_neg: fn_,
            tpr: tp / (tp + fn_),
            fpr: fp / (fp + tn),
        };
    }
    Ok(GroupRates { groups })
}

/// Equalized odds difference: `max(|TPR_1 - TPR_0|, |FPR_1 - FPR_0|)`.
pub fn eod(rates: &GroupRates) -> f64 {
    let tpr_gap = (rates.tpr(true) - rates.tpr(false)).abs();
    let fpr_gap = (rates.fpr(true) - rates.fpr(false)).abs();
    tpr_gap.max(fpr_gap)
}

/// Fraction of correct predictions.
pub fn accuracy(predictions: &[bool], labels: &[bool]) -> Result<f64> {
    check_lengths(&[predictions.len(), labels.len()])?;
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Mean of sensitivity (TPR) and specificity (TNR).
///
/// Errors with [`Error::SingleClassLabels`] unless both classes appear in
/// `labels`.
pub fn balanced_accuracy(predictions: &[bool], labels: &[bool]) -> Result<f64> {
    check_lengths(&[predictions.len(), labels.len()])?;
    let mut tp = 0u64;
    let mut tn = 0u64;
    let mut pos = 0u64;
    let mut neg = 0u64;
    for (&p, &y) in predictions.iter().zip(labels) {
        if y {
            pos += 1;
            tp += p as u64;
        } else {
            neg += 1;
            tn += !p as u64;
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    Ok((tp as f64 / pos as f64 + tn as f64 / neg as f64) / 2.0)
}

/// Sample-size-weighted mean: `sum(n_k * x_k) / sum(n_k)`.
pub fn weighted_average(values: &[f64], sizes: &[usize]) -> Result<f64> {
    check_lengths(&[values.len(), sizes.len()])?;
    if sizes.contains(&0) {
        return Err(Error::InvalidConfig("weighted_average sizes must be >= 1".into()));
    }
    let total: usize = sizes.iter().sum();
    let weighted: f64 = values
        .iter()
        .zip(sizes)
        .map(|(x, &n)| n as f64 * x)
        .sum();
    Ok(weighted / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn repeat(pattern: &[(bool, bool, bool)], counts: &[usize]) -> (Vec<bool>, Vec<bool>, Vec<bool>) {
        let mut p = Vec::new();
        let mut y = Vec::new();
        let mut a = Vec::new();
        for ((&(pp, yy, aa), &c)) in pattern.iter().zip(counts) {
            for _ in 0..c {
                p.push(pp);
                y.push(yy);
                a.push(aa);
            }
        }
        (p, y, a)
    }

    #[test]
    fn perfect_predictions_give_unit_tpr_zero_fpr() {
        let labels = vec![true, false, true, false];
        let attrs = vec![false, false, true, true];
        let rates = confusion_by_group(&labels, &labels, &attrs).unwrap();
        for g in [false, true] {
            assert_eq!(rates.tpr(g), 1.0);
            assert_eq!(rates.fpr(g), 0.0);
        }
        assert_eq!(eod(&rates), 0.0);
    }

    // Hand table: group1 {tp=2, fn=2, fp=1, tn=3}, group0 {tp=3, fn=1, fp=2, tn=2}.
    fn hand_table() -> GroupRates {
        let (p, y, a) = repeat(
            &[
                (true, true, true),
                (false, true, true),
                (true, false, true),
                (false, false, true),
                (true, true, false),
                (false, true, false),
                (true, false, false),
                (false, false, false),
            ],
            &[2, 2, 1, 3, 3, 1, 2, 2],
        );
        confusion_by_group(&p, &y, &a).unwrap()
    }

    #[test]
    fn hand_counted_rates() {
        let rates = hand_table();
        assert_eq!(rates.tpr(true), 0.5);
        assert_eq!(rates.tpr(false), 0.75);
        assert_eq!(rates.fpr(true), 0.25);
        assert_eq!(rates.fpr(false), 0.5);
        assert_eq!(rates.group(true).true_pos, 2.0);
        assert_eq!(rates.group(false).true_neg, 2.0);
        assert_eq!(rates.total(), 16.0);
        assert_eq!(eod(&rates), 0.25);
    }

    #[test]
    fn empty_group_is_rate_undefined() {
        let p = vec![true, false];
        let y = vec![true, false];
        let a = vec![true, true];
        match confusion_by_group(&p, &y, &a) {
            Err(Error::RateUndefined { group: 0, rate }) => assert_eq!(rate, RateKind::Tpr),
            other => panic!("expected RateUndefined for group 0, got {other:?}"),
        }
    }

    #[test]
    fn group_without_negatives_is_rate_undefined() {
        let (p, y, a) = repeat(
            &[(true, true, true), (true, false, false), (false, true, false)],
            &[2, 1, 1],
        );
        match confusion_by_group(&p, &y, &a) {
            Err(Error::RateUndefined { group: 1, rate }) => assert_eq!(rate, RateKind::Fpr),
            other => panic!("expected RateUndefined for group 1, got {other:?}"),
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(
            confusion_by_group(&[true], &[true, false], &[true, false]),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn eod_takes_the_larger_gap() {
        let mut rates = hand_table();
        // tpr gap 0.1, fpr gap 0.3
        rates.groups[0].tpr = 0.6;
        rates.groups[1].tpr = 0.5;
        rates.groups[0].fpr = 0.5;
        rates.groups[1].fpr = 0.2;
        assert!((eod(&rates) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn accuracy_values() {
        let y = vec![true, false, true, false];
        assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
        let wrong: Vec<bool> = y.iter().map(|b| !b).collect();
        assert_eq!(accuracy(&wrong, &y).unwrap(), 0.0);
        let three_of_four = vec![true, false, true, true];
        assert_eq!(accuracy(&three_of_four, &y).unwrap(), 0.75);
        assert!(matches!(accuracy(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn balanced_accuracy_values() {
        let y = vec![true, false, true, false];
        assert_eq!(balanced_accuracy(&y, &y).unwrap(), 1.0);
        // all-negative predictor: TPR = 0, TNR = 1
        let none = vec![false; 4];
        assert_eq!(balanced_accuracy(&none, &y).unwrap(), 0.5);
        // TPR = 0.8, TNR = 0.6 fixture
        let labels: Vec<bool> = std::iter::repeat(true)
            .take(5)
            .chain(std::iter::repeat(false).take(5))
            .collect();
        let preds = vec![
            true, true, true, true, false, // 4/5 positives hit
            false, false, false, true, true, // 3/5 negatives hit
        ];
        assert!((balanced_accuracy(&preds, &labels).unwrap() - 0.7).abs() < 1e-15);
        assert!(matches!(
            balanced_accuracy(&[true, true], &[true, true]),
            Err(Error::SingleClassLabels)
        ));
    }

    #[test]
    fn weighted_average_values() {
        let mean = weighted_average(&[0.2, 0.4], &[3, 3]).unwrap();
        assert!((mean - 0.3).abs() < 1e-15);
        let v = weighted_average(&[0.1, 0.3], &[1, 3]).unwrap();
        assert!((v - 0.25).abs() < 1e-12, "{v}");
        assert_eq!(weighted_average(&[0.7], &[9]).unwrap(), 0.7);
        assert!(matches!(
            weighted_average(&[0.1], &[1, 2]),
            Err(Error::LengthMismatch(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pred_label_attr(n: usize) -> impl Strategy<Value = Vec<(bool, bool, bool)>> {
            proptest::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), n..=n * 4)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn eod_is_symmetric_and_bounded(rows in pred_label_attr(8)) {
                let p: Vec<bool> = rows.iter().map(|r| r.0).collect();
                let y: Vec<bool> = rows.iter().map(|r| r.1).collect();
                let a: Vec<bool> = rows.iter().map(|r| r.2).collect();
                if let Ok(rates) = confusion_by_group(&p, &y, &a) {
                    let value = eod(&rates);
                    prop_assert!((0.0..=1.0).contains(&value));
                    let flipped: Vec<bool> = a.iter().map(|b| !b).collect();
                    let swapped = confusion_by_group(&p, &y, &flipped).unwrap();
                    prop_assert!((value - eod(&swapped)).abs() < 1e-15);
                }
            }

            #[test]
            fn confusion_is_permutation_invariant(rows in pred_label_attr(6), seed in 0u64..100) {
                let p: Vec<bool> = rows.iter().map(|r| r.0).collect();
                let y: Vec<bool> = rows.iter().map(|r| r.1).collect();
                let a: Vec<bool> = rows.iter().map(|r| r.2).collect();
                if let Ok(rates) = confusion_by_group(&p, &y, &a) {
                    use rand::seq::SliceRandom;
                    use rand::SeedableRng;
                    let mut order: Vec<usize> = (0..rows.len()).collect();
                    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                    let pp: Vec<bool> = order.iter().map(|&i| p[i]).collect();
                    let yy: Vec<bool> = order.iter().map(|&i| y[i]).collect();
                    let aa: Vec<bool> = order.iter().map(|&i| a[i]).collect();
                    prop_assert_eq!(rates, confusion_by_group(&pp, &yy, &aa).unwrap());
                }
            }

            #[test]
            fn accuracy_metrics_bounded(rows in pred_label_attr(4)) {
                let p: Vec<bool> = rows.iter().map(|r| r.0).collect();
                let y: Vec<bool> = rows.iter().map(|r| r.1).collect();
                let acc = accuracy(&p, &y).unwrap();
                prop_assert!((0.0..=1.0).contains(&acc));
                if let Ok(ba) = balanced_accuracy(&p, &y) {
                    prop_assert!((0.0..=1.0).contains(&ba));
                }
            }

            #[test]
            fn weighted_average_between_extremes(
                values in proptest::collection::vec(0.0f64..1.0, 1..8),
                sizes_raw in proptest::collection::vec(1usize..50, 1..8),
            ) {
                let n = values.len().min(sizes_raw.len());
                let values = &values[..n];
                let sizes = &sizes_raw[..n];
                let avg = weighted_average(values, sizes).unwrap();
                let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(avg >= lo - 1e-12 && avg <= hi + 1e-12);
            }
        }
    }
}
