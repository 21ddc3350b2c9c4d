//! Accuracy metrics and rank-based statistics.
//!
//! All rank computations use average ranks for ties. Wilcoxon tests use the
//! normal approximation with tie correction and no continuity correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("MAPE undefined: actual value at position {0} is zero")]
    ZeroActual(usize),
    #[error("ranks have zero variance")]
    ZeroRankVariance,
    #[error("all differences are zero")]
    AllZero,
    #[error("non-finite input")]
    NonFinite,
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of tie groups (only groups larger than one).
fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        if j > i {
            out.push(j - i + 1);
        }
        i = j + 1;
    }
    out
}

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<(), MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(MetricError::TooFew { needed: 1, got: 0 });
    }
    if actual.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check_pair(actual, predicted)?;
    if let Some(i) = actual.iter().position(|&y| y == 0.0) {
        return Err(MetricError::ZeroActual(i));
    }
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, p)| ((y - p) / y).abs())
        .sum();
    Ok(sum / actual.len() as f64 * 100.0)
}

/// Mean absolute difference between the ranks of actual and predicted values.
pub fn murd(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check_pair(actual, predicted)?;
    let ra = average_ranks(actual);
    let rp = average_ranks(predicted);
    let sum: f64 = ra.iter().zip(&rp).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / actual.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub mape: f64,
    pub murd: f64,
    pub n_test: usize,
}

pub fn accuracy(actual: &[f64], predicted: &[f64]) -> Result<AccuracyReport, MetricError> {
    Ok(AccuracyReport {
        mape: mape(actual, predicted)?,
        murd: murd(actual, predicted)?,
        n_test: actual.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Negligible,
    Weak,
    Moderate,
    Strong,
}

impl Strength {
    /// Upper bounds (inclusive) on |rho| for negligible, weak and moderate.
    pub const THRESHOLDS: [f64; 3] = [0.09, 0.39, 0.69];

    pub fn of(rho: f64) -> Self {
        let r = rho.abs();
        let [negligible, weak, moderate] = Self::THRESHOLDS;
        if r <= negligible {
            Strength::Negligible
        } else if r <= weak {
            Strength::Weak
        } else if r <= moderate {
            Strength::Moderate
        } else {
            Strength::Strong
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub strength: Strength,
    pub n: usize,
}

/// Two-sided p-value of a standard normal statistic.
pub fn normal_two_sided(z: f64) -> f64 {
    let p = erfc(z.abs() / std::f64::consts::SQRT_2);
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Spearman's rank correlation; significance from the z-score `rho * sqrt(n - 1)`.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(MetricError::TooFew { needed: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ZeroRankVariance);
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let z = rho * (n - 1.0).sqrt();
    Ok(CorrelationResult {
        rho,
        p_value: normal_two_sided(z),
        strength: Strength::of(rho),
        n: x.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub p_value: f64,
    pub statistic: f64,
    pub z: f64,
    /// Effective sample size (non-zero differences, or combined group size).
    pub n: usize,
    /// Set when the sample is below the size at which the normal approximation is used;
    /// `p_value` is then 1.
    pub small_sample: bool,
}

/// Two-sided Wilcoxon signed-rank test; zero differences are dropped.
/// Fewer than 6 non-zero differences yield `p = 1` with the small-sample flag.
pub fn wilcoxon_signed_rank(differences: &[f64]) -> Result<TestResult, MetricError> {
    if differences.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let nonzero: Vec<f64> = differences.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(MetricError::AllZero);
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let n = nonzero.len();
    if n < 6 {
        return Ok(TestResult {
            p_value: 1.0,
            statistic: w_plus,
            z: 0.0,
            n,
            small_sample: true,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie: f64 = tie_sizes(&abs)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie / 48.0;
    let z = if var > 0.0 { (w_plus - mean) / var.sqrt() } else { 0.0 };
    Ok(TestResult {
        p_value: normal_two_sided(z),
        statistic: w_plus,
        z,
        n,
        small_sample: false,
    })
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test; statistic is the rank sum of `a`.
/// Groups smaller than 4 carry the small-sample flag but still get the approximation.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<TestResult, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::TooFew {
            needed: 1,
            got: a.len().min(b.len()),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&all);
    let r_a: f64 = ranks[..a.len()].iter().sum();
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let mean = n1 * (n + 1.0) / 2.0;
    let tie: f64 = tie_sizes(&all)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie / (n * (n - 1.0)));
    let z = if var > 0.0 { (r_a - mean) / var.sqrt() } else { 0.0 };
    Ok(TestResult {
        p_value: normal_two_sided(z),
        statistic: r_a,
        z,
        n: a.len() + b.len(),
        small_sample: a.len() < 4 || b.len() < 4,
    })
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mape(&[100.0], &[110.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[0.0, 1.0], &[1.0, 1.0]), Err(MetricError::ZeroActual(0)));
        assert!(mape(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn murd_examples() {
        let y: Vec<f64> = (1..=100).map(f64::from).collect();
        let rev: Vec<f64> = y.iter().rev().copied().collect();
        // oracle: sum |2i - 101| / 100
        let oracle = (1..=100).map(|i: i32| (2 * i - 101).abs()).sum::<i32>() as f64 / 100.0;
        assert_eq!(oracle, 50.0);
        assert_eq!(murd(&y, &rev).unwrap(), 50.0);
        assert!((murd(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let exp: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        assert_eq!(murd(&y, &exp).unwrap(), 0.0);
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = spearman(&x, &x).unwrap();
        assert_eq!(r.rho, 1.0);
        assert_eq!(r.strength, Strength::Strong);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert_eq!(spearman(&x, &rev).unwrap().rho, -1.0);
        assert_eq!(Strength::of(0.5), Strength::Moderate);
        assert_eq!(Strength::of(0.09), Strength::Negligible);
        assert_eq!(Strength::of(-0.39), Strength::Weak);
        assert_eq!(Strength::of(0.6900001), Strength::Strong);
        assert!(matches!(spearman(&x, &[1.0; 5]), Err(MetricError::ZeroRankVariance)));
    }

    #[test]
    fn signed_rank_examples() {
        let balanced: Vec<f64> = (1..=10).flat_map(|d| [-(d as f64), d as f64]).collect();
        assert!((wilcoxon_signed_rank(&balanced).unwrap().p_value - 1.0).abs() < 1e-12);
        let positive: Vec<f64> = (1..=30).map(f64::from).collect();
        assert!(wilcoxon_signed_rank(&positive).unwrap().p_value < 0.001);
        assert_eq!(wilcoxon_signed_rank(&[0.0, 0.0]), Err(MetricError::AllZero));
        let small = wilcoxon_signed_rank(&[1.0, 2.0, 0.0]).unwrap();
        assert!(small.small_sample);
        assert_eq!(small.p_value, 1.0);
    }

    #[test]
    fn rank_sum_examples() {
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        assert!((wilcoxon_rank_sum(&a, &a).unwrap().p_value - 1.0).abs() < 1e-12);
        let b: Vec<f64> = (100..120).map(f64::from).collect();
        assert!(wilcoxon_rank_sum(&a, &b).unwrap().p_value < 0.001);
        assert!(wilcoxon_rank_sum(&[], &b).is_err());
    }

    proptest! {
        #[test]
        fn murd_invariant_under_monotone_transform(v in proptest::collection::vec(-1e3f64..1e3, 1..50), p in proptest::collection::vec(-1e3f64..1e3, 50)) {
            let p = &p[..v.len()];
            let base = murd(&v, p).unwrap();
            let tv: Vec<f64> = v.iter().map(|x| x.powi(3) + 2.0).collect();
            let tp: Vec<f64> = p.iter().map(|x| (x / 1e3).exp()).collect();
            prop_assert!((murd(&tv, &tp).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn mape_joint_scale_invariance(v in proptest::collection::vec(1.0f64..1e3, 1..30), noise in proptest::collection::vec(-0.5f64..0.5, 30), k in -10.0f64..10.0) {
            prop_assume!(k.abs() > 1e-3);
            let p: Vec<f64> = v.iter().zip(&noise).map(|(a, e)| a * (1.0 + e)).collect();
            let ky: Vec<f64> = v.iter().map(|a| a * k).collect();
            let kp: Vec<f64> = p.iter().map(|a| a * k).collect();
            prop_assert!((mape(&ky, &kp).unwrap() - mape(&v, &p).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn spearman_symmetric_and_rank_based(x in proptest::collection::vec(-100.0f64..100.0, 3..30), y in proptest::collection::vec(-100.0f64..100.0, 30)) {
            let y = &y[..x.len()];
            if let Ok(r) = spearman(&x, y) {
                let s = spearman(y, &x).unwrap();
                prop_assert!((r.rho - s.rho).abs() < 1e-12);
                let rr = spearman(&average_ranks(&x), &average_ranks(y)).unwrap();
                prop_assert!((r.rho - rr.rho).abs() < 1e-12);
            }
        }

        #[test]
        fn wilcoxon_p_in_unit_interval_and_scale_free(d in proptest::collection::vec(-10.0f64..10.0, 6..40), k in 0.01f64..100.0) {
            if let Ok(r) = wilcoxon_signed_rank(&d) {
                prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
                let scaled: Vec<f64> = d.iter().map(|v| v * k).collect();
                prop_assert!((wilcoxon_signed_rank(&scaled).unwrap().p_value - r.p_value).abs() < 1e-12);
            }
        }

        #[test]
        fn rank_sum_monotone_transform(a in proptest::collection::vec(-10.0f64..10.0, 4..20), b in proptest::collection::vec(-10.0f64..10.0, 4..20)) {
            let r = wilcoxon_rank_sum(&a, &b).unwrap();
            prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
            let ta: Vec<f64> = a.iter().map(|v| v.powi(3)).collect();
            let tb: Vec<f64> = b.iter().map(|v| v.powi(3)).collect();
            prop_assert!((wilcoxon_rank_sum(&ta, &tb).unwrap().p_value - r.p_value).abs() < 1e-12);
        }
    }

    #[test]
    fn p_decreases_with_planted_shift() {
        let base: Vec<f64> = (0..30).map(|i| ((i * 37) % 17) as f64 - 8.0).collect();
        let mut last = 1.0 + 1e-12;
        for shift in [0.0, 1.0, 2.0, 4.0, 8.0] {
            let d: Vec<f64> = base.iter().map(|v| v + shift + 0.01).collect();
            let p = wilcoxon_signed_rank(&d).unwrap().p_value;
            assert!(p <= last, "shift {shift}: {p} > {last}");
            last = p;
            let a: Vec<f64> = base.iter().map(|v| v + shift).collect();
            assert!(wilcoxon_rank_sum(&a, &base).unwrap().p_value <= 1.0);
        }
    }
}
