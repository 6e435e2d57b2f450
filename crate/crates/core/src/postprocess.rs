//! Equalized-odds output post-processing.
//!
//! A derived predictor is four probabilities `p_ya = Pr(Ytilde=1 | Yhat=y,
//! A=a)` that probabilistically remap a base prediction given the sensitive
//! attribute. Fitting minimizes expected 0/1 loss subject to the derived
//! TPRs and FPRs being equal across groups, a 4-variable linear program
//! solved exactly by vertex enumeration: with two equality constraints, any
//! optimal extreme point also pins at least two coordinates to the 0/1 box,
//! so enumerating those bases and the box corners covers every candidate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{GroupCell, GroupRates};

/// Empirical joint distribution of (base prediction, sensitive attribute,
/// true label).
#[derive(Debug, Clone, PartialEq)]
pub struct JointStats {
    /// `pr[y_hat][a][y]`, eight cells summing to 1.
    pr: [[[f64; 2]; 2]; 2],
}

impl JointStats {
    /// Validates cell probabilities: nonnegative, summing to 1 within 1e-12,
    /// with every (a, y) margin positive.
    pub fn new(pr: [[[f64; 2]; 2]; 2]) -> Result<Self> {
        let mut sum = 0.0;
        for y_hat in 0..2 {
            for a in 0..2 {
                for y in 0..2 {
                    let v = pr[y_hat][a][y];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::InvalidConfig(format!(
                            "joint probability out of range: {v}"
                        )));
                    }
                    sum += v;
                }
            }
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "joint probabilities sum to {sum}, expected 1"
            )));
        }
        let stats = Self { pr };
        for a in [false, true] {
            for y in [false, true] {
                if stats.margin(a, y) <= 0.0 {
                    return Err(Error::EmptyCell {
                        group: a as u8,
                        label: y as u8,
                    });
                }
            }
        }
        Ok(stats)
    }

    pub fn prob(&self, y_hat: bool, a: bool, y: bool) -> f64 {
        self.pr[y_hat as usize][a as usize][y as usize]
    }

    /// Pr(A=a, Y=y).
    pub fn margin(&self, a: bool, y: bool) -> f64 {
        self.prob(false, a, y) + self.prob(true, a, y)
    }

    /// Pr(Yhat=1 | A=a, Y=y).
    pub fn cond_pos(&self, a: bool, y: bool) -> f64 {
        self.prob(true, a, y) / self.margin(a, y)
    }

    /// Pr(Y=1).
    pub fn prob_label(&self) -> f64 {
        self.margin(false, true) + self.margin(true, true)
    }
}

/// The four flip probabilities of a derived predictor:
/// `p_ya = Pr(Ytilde=1 | Yhat=y, A=a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedPredictor {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl DerivedPredictor {
    /// Keeps the base prediction unchanged.
    pub fn identity() -> Self {
        Self {
            p00: 0.0,
            p01: 0.0,
            p10: 1.0,
            p11: 1.0,
        }
    }

    /// Pr(Ytilde=1) for a base prediction `y_hat` in group `a`.
    pub fn prob_positive(&self, y_hat: bool, a: bool) -> f64 {
        match (y_hat, a) {
            (false, false) => self.p00,
            (false, true) => self.p01,
            (true, false) => self.p10,
            (true, true) => self.p11,
        }
    }

    fn from_point(x: [f64; 4]) -> Self {
        Self {
            p00: x[0],
            p01: x[1],
            p10: x[2],
            p11: x[3],
        }
    }

    /// The four probabilities as `[p00, p01, p10, p11]`.
    pub fn to_array(self) -> [f64; 4] {
        [self.p00, self.p01, self.p10, self.p11]
    }
}

/// Derived TPR/FPR per group, indexed by the sensitive attribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    pub tpr: [f64; 2],
    pub fpr: [f64; 2],
}

/// Estimates the joint distribution of (prediction, attribute, label) from
/// aligned vectors. Errors if any (attribute, label) cell is empty.
pub fn estimate_joint(predictions: &[bool], labels: &[bool], attrs: &[bool]) -> Result<JointStats> {
    if predictions.len() != labels.len() || labels.len() != attrs.len() {
        return Err(Error::LengthMismatch(vec![
            predictions.len(),
            labels.len(),
            attrs.len(),
        ]));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = predictions.len() as f64;
    let mut pr = [[[0.0f64; 2]; 2]; 2];
    for ((&p, &y), &a) in predictions.iter().zip(labels).zip(attrs) {
        pr[p as usize][a as usize][y as usize] += 1.0;
    }
    for plane in &mut pr {
        for row in plane {
            for cell in row {
                *cell /= n;
            }
        }
    }
    JointStats::new(pr)
}

/// Rates of the derived predictor under `stats`, linear in `p`:
/// `Pr(Ytilde=1 | A=a, Y=y) = p_1a * cond + p_0a * (1 - cond)`.
pub fn derived_rates(p: &DerivedPredictor, stats: &JointStats) -> DerivedRates {
    let rate = |a: bool, y: bool| {
        let cond = stats.cond_pos(a, y);
        p.prob_positive(true, a) * cond + p.prob_positive(false, a) * (1.0 - cond)
    };
    DerivedRates {
        tpr: [rate(false, true), rate(true, true)],
        fpr: [rate(false, false), rate(true, false)],
    }
}

/// Expected 0/1 misclassification probability of the derived predictor
/// against the true label, linear in `p`.
pub fn expected_loss(p: &DerivedPredictor, stats: &JointStats) -> f64 {
    let mut loss = 0.0;
    for y_hat in [false, true] {
        for a in [false, true] {
            let q = p.prob_positive(y_hat, a);
            loss += stats.prob(y_hat, a, true) * (1.0 - q);
            loss += stats.prob(y_hat, a, false) * q;
        }
    }
    loss
}

/// Constraint rows over x = (p00, p01, p10, p11): `row . x = 0` states that
/// the derived TPR (resp. FPR) gap between groups vanishes.
fn constraint_rows(stats: &JointStats) -> [[f64; 4]; 2] {
    let row = |y: bool| {
        let c0 = stats.cond_pos(false, y);
        let c1 = stats.cond_pos(true, y);
        [-(1.0 - c0), 1.0 - c1, -c0, c1]
    };
    [row(true), row(false)]
}

fn dot(row: &[f64; 4], x: &[f64; 4]) -> f64 {
    row.iter().zip(x).map(|(r, v)| r * v).sum()
}

const SINGULAR_EPS: f64 = 1e-12;
const BOX_EPS: f64 = 1e-9;
const TIE_EPS: f64 = 1e-12;

/// Fits the derived predictor: minimizes [`expected_loss`] subject to equal
/// derived TPRs and FPRs across groups (each within `tolerance`) and
/// `0 <= p <= 1`.
///
/// Exact vertex enumeration over the 4-dimensional box cut by the two
/// equality constraints; the constant predictors are always feasible, so a
/// solution exists for every valid `stats`. Ties are broken toward the
/// lexicographically smallest (p00, p01, p10, p11).
pub fn fit_derived_predictor(stats: &JointStats, tolerance: f64) -> Result<DerivedPredictor> {
    let rows = constraint_rows(stats);
    let objective: [f64; 4] = {
        let g = |y_hat: bool, a: bool| stats.prob(y_hat, a, false) - stats.prob(y_hat, a, true);
        [
            g(false, false),
            g(false, true),
            g(true, false),
            g(true, true),
        ]
    };

    let mut candidates: Vec<[f64; 4]> = Vec::with_capacity(120);

    // Box corners (cover rank-deficient constraint systems).
    for bits in 0..16u8 {
        candidates.push([
            f64::from(bits & 1),
            f64::from((bits >> 1) & 1),
            f64::from((bits >> 2) & 1),
            f64::from((bits >> 3) & 1),
        ]);
    }

    // Two coordinates fixed to a box face, two solved from both constraints.
    for i in 0..4 {
        for j in (i + 1)..4 {
            let free: Vec<usize> = (0..4).filter(|c| *c != i && *c != j).collect();
            let (k, l) = (free[0], free[1]);
            let det = rows[0][k] * rows[1][l] - rows[0][l] * rows[1][k];
            if det.abs() < SINGULAR_EPS {
                continue;
            }
            for vi in [0.0, 1.0] {
                for vj in [0.0, 1.0] {
                    let rhs0 = -(rows[0][i] * vi + rows[0][j] * vj);
                    let rhs1 = -(rows[1][i] * vi + rows[1][j] * vj);
                    let mut x = [0.0; 4];
                    x[i] = vi;
                    x[j] = vj;
                    x[k] = (rhs0 * rows[1][l] - rhs1 * rows[0][l]) / det;
                    x[l] = (rows[0][k] * rhs1 - rows[1][k] * rhs0) / det;
                    candidates.push(x);
                }
            }
        }
    }

    // Three coordinates fixed, one solved from a single constraint row
    // (covers vertices when the two rows are parallel).
    for m in 0..4 {
        for row in &rows {
            if row[m].abs() < SINGULAR_EPS {
                continue;
            }
            for bits in 0..8u8 {
                let mut x = [0.0; 4];
                let mut shift = 0;
                for c in 0..4 {
                    if c != m {
                        x[c] = f64::from((bits >> shift) & 1);
                        shift += 1;
                    }
                }
                let fixed: f64 = (0..4).filter(|c| *c != m).map(|c| row[c] * x[c]).sum();
                x[m] = -fixed / row[m];
                candidates.push(x);
            }
        }
    }

    let feasible: Vec<[f64; 4]> = candidates
        .into_iter()
        .filter_map(|x| {
            if x.iter().any(|v| !(-BOX_EPS..=1.0 + BOX_EPS).contains(v)) {
                return None;
            }
            let x = x.map(|v| v.clamp(0.0, 1.0));
            if dot(&rows[0], &x).abs() <= tolerance && dot(&rows[1], &x).abs() <= tolerance {
                Some(x)
            } else {
                None
            }
        })
        .collect();

    if feasible.is_empty() {
        return Err(Error::SolverFailure(
            "no feasible vertex found; constant predictors should always qualify".into(),
        ));
    }

    let min_obj = feasible
        .iter()
        .map(|x| dot(&objective, x))
        .fold(f64::INFINITY, f64::min);
    let best = feasible
        .into_iter()
        .filter(|x| dot(&objective, x) <= min_obj + TIE_EPS)
        .min_by(|a, b| a.partial_cmp(b).unwrap())
        .unwrap();
    Ok(DerivedPredictor::from_point(best))
}

/// Applies the derived predictor to one base prediction: returns 1 with
/// probability `p_{y_hat, a}` using the caller's random source.
pub fn apply_derived<R: Rng + ?Sized>(
    p: &DerivedPredictor,
    y_hat: bool,
    a: bool,
    rng: &mut R,
) -> bool {
    rng.random::<f64>() < p.prob_positive(y_hat, a)
}

/// Deterministic evaluation of a derived predictor on an evaluation set:
/// expected confusion counts per group (so rates come from the set's
/// empirical statistics, not from sampling) plus expected accuracy.
pub fn evaluate_derived_exact(
    p: &DerivedPredictor,
    predictions: &[bool],
    labels: &[bool],
    attrs: &[bool],
) -> Result<(GroupRates, f64)> {
    if predictions.len() != labels.len() || labels.len() != attrs.len() {
        return Err(Error::LengthMismatch(vec![
            predictions.len(),
            labels.len(),
            attrs.len(),
        ]));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }

    // expected positives and cell sizes per (a, y)
    let mut expected_pos = [[0.0f64; 2]; 2];
    let mut counts = [[0.0f64; 2]; 2];
    for ((&pred, &y), &a) in predictions.iter().zip(labels).zip(attrs) {
        counts[a as usize][y as usize] += 1.0;
        expected_pos[a as usize][y as usize] += p.prob_positive(pred, a);
    }
    for a in 0..2 {
        for y in 0..2 {
            if counts[a][y] == 0.0 {
                return Err(Error::EmptyCell {
                    group: a as u8,
                    label: y as u8,
                });
            }
        }
    }

    let cell = |a: usize| {
        let true_pos = expected_pos[a][1];
        let false_neg = counts[a][1] - true_pos;
        let false_pos = expected_pos[a][0];
        let true_neg = counts[a][0] - false_pos;
        GroupCell {
            true_pos,
            false_pos,
            true_neg,
            false_neg,
            tpr: true_pos / counts[a][1],
            fpr: false_pos / counts[a][0],
        }
    };
    let rates = GroupRates {
        groups: [cell(0), cell(1)],
    };
    let n: f64 = counts.iter().flatten().sum();
    let correct: f64 = (0..2)
        .map(|a| expected_pos[a][1] + (counts[a][0] - expected_pos[a][0]))
        .sum();
    Ok((rates, correct / n))
}
