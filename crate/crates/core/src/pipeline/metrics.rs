use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    /// Maximize `TPR − FPR`.
    #[default]
    Youden,
    /// Maximize the positive-class F1.
    F1,
}

impl std::str::FromStr for ThresholdRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "youden" => Ok(ThresholdRule::Youden),
            "f1" => Ok(ThresholdRule::F1),
            other => Err(format!("unknown threshold rule '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Positive prediction iff `score ≥ τ`.
    pub fn at(scores: &[f64], labels: &[u8], tau: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= tau, l == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn youden(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_) - ratio(self.fp, self.fp + self.tn)
    }

    pub fn f1_positive(&self) -> f64 {
        f1(ratio(self.tp, self.tp + self.fp), ratio(self.tp, self.tp + self.fn_))
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// `−∞`, the midpoints of the sorted unique scores, and `+∞`.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = scores.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    let mut c = Vec::with_capacity(u.len() + 1);
    c.push(f64::NEG_INFINITY);
    c.extend(u.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    c.push(f64::INFINITY);
    c
}

pub fn select_threshold(scores: &[f64], labels: &[u8]) -> Result<f64, PipelineError> {
    select_threshold_with(scores, labels, ThresholdRule::Youden)
}

/// Best candidate under `rule`; ties go to the lowest `τ`.
pub fn select_threshold_with(scores: &[f64], labels: &[u8], rule: ThresholdRule) -> Result<f64, PipelineError> {
    if scores.len() != labels.len() {
        return Err(PipelineError::Data(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(PipelineError::SingleClass("threshold selection"));
    }
    let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for tau in candidate_thresholds(scores) {
        let c = Confusion::at(scores, labels, tau);
        let j = match rule {
            ThresholdRule::Youden => c.youden(),
            ThresholdRule::F1 => c.f1_positive(),
        };
        if j > best.1 {
            best = (tau, j);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Indexed by class (`0` = normal, `1` = pneumonia).
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub f1: [f64; 2],
    pub threshold: f64,
    pub confusion: Confusion,
}

pub fn evaluate(scores: &[f64], labels: &[u8], tau: f64) -> EvalReport {
    let c = Confusion::at(scores, labels, tau);
    let precision = [ratio(c.tn, c.tn + c.fn_), ratio(c.tp, c.tp + c.fp)];
    let recall = [ratio(c.tn, c.tn + c.fp), ratio(c.tp, c.tp + c.fn_)];
    EvalReport {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        recall,
        f1: [f1(precision[0], recall[0]), f1(precision[1], recall[1])],
        threshold: tau,
        confusion: c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separable_threshold_is_midpoint() {
        let tau = select_threshold(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        assert_eq!(tau, 0.5);
        assert!(matches!(
            select_threshold(&[0.1, 0.2], &[1, 1]),
            Err(PipelineError::SingleClass(_))
        ));
    }

    #[test]
    fn hand_computed_report() {
        // TP=3, FP=1, FN=2, TN=4
        let scores = [0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
        let labels = [1, 1, 1, 0, 1, 1, 0, 0, 0, 0];
        let r = evaluate(&scores, &labels, 0.5);
        assert_eq!(r.confusion, Confusion { tp: 3, fp: 1, tn: 4, fn_: 2 });
        assert!((r.precision[1] - 0.75).abs() < 1e-15);
        assert!((r.recall[1] - 0.6).abs() < 1e-15);
        assert!((r.f1[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.accuracy - 0.7).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_all_positive() {
        let r = evaluate(&[0.0, 1.0], &[0, 1], 0.5);
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, [1.0; 2], [1.0; 2], [1.0; 2]));
        let r = evaluate(&[0.9, 0.9, 0.9, 0.9], &[0, 1, 0, 1], 0.5);
        assert_eq!(r.precision[1], 0.5);
        assert_eq!(r.recall[1], 1.0);
        assert_eq!(r.precision[0], 0.0);
    }

    fn brute_force_best(scores: &[f64], labels: &[u8]) -> f64 {
        // every threshold equal to a score, plus above the maximum
        let mut ts: Vec<f64> = scores.to_vec();
        ts.push(f64::INFINITY);
        ts.iter()
            .map(|&t| Confusion::at(scores, labels, t).youden())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    proptest! {
        #[test]
        fn youden_matches_brute_force(
            data in prop::collection::vec((0u8..20, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 20.0).collect();
            let mut labels: Vec<u8> = data.iter().map(|(_, l)| u8::from(*l)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let tau = select_threshold(&scores, &labels).unwrap();
            let got = Confusion::at(&scores, &labels, tau).youden();
            prop_assert!((got - brute_force_best(&scores, &labels)).abs() < 1e-12);
        }

        #[test]
        fn report_identities(
            data in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..60),
            tau in 0.0f64..1.0
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
            let labels: Vec<u8> = data.iter().map(|d| u8::from(d.1)).collect();
            let r = evaluate(&scores, &labels, tau);
            let c = r.confusion;
            prop_assert_eq!(c.total(), scores.len());
            prop_assert!((r.accuracy - (c.tp + c.tn) as f64 / c.total() as f64).abs() < 1e-15);
            for k in 0..2 {
                let (p, rc) = (r.precision[k], r.recall[k]);
                prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&rc));
                if p + rc > 0.0 {
                    prop_assert!((r.f1[k] * (p + rc) - 2.0 * p * rc).abs() < 1e-12);
                }
            }
        }
    }
}
