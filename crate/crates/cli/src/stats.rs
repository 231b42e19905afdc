//! Small statistics helpers for the experiment reports.

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTTest {
    pub mean_diff: f64,
    pub t: f64,
    /// One-sided p-value for H1: mean(a) < mean(b).
    pub p_less: f64,
    pub n: usize,
}

/// Paired one-sided t-test of H1: mean(a) < mean(b) over matched
/// samples (same seeds in both arms).
pub fn paired_t_less(a: &[f64], b: &[f64]) -> PairedTTest {
    assert_eq!(a.len(), b.len(), "paired samples must align");
    assert!(a.len() >= 2, "need at least two pairs");
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        // All differences identical: the sign decides outright.
        let p = if mean < 0.0 { 0.0 } else { 1.0 };
        return PairedTTest {
            mean_diff: mean,
            t: if mean < 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            },
            p_less: p,
            n,
        };
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof");
    PairedTTest {
        mean_diff: mean,
        t,
        p_less: dist.cdf(t),
        n,
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clearly_lower_arm_gets_a_tiny_p() {
        let a = vec![0.1, 0.12, 0.08, 0.11, 0.09, 0.1, 0.13, 0.07];
        let b = vec![0.4, 0.38, 0.42, 0.39, 0.41, 0.44, 0.36, 0.4];
        let result = paired_t_less(&a, &b);
        assert!(result.p_less < 1e-6, "p = {}", result.p_less);
        assert!(result.mean_diff < 0.0);
    }

    #[test]
    fn equal_arms_are_not_significant() {
        let a = vec![0.2, 0.3, 0.25, 0.27, 0.22, 0.31];
        let result = paired_t_less(&a, &a.clone());
        assert!(result.p_less >= 0.05);
    }

    #[test]
    fn higher_arm_has_p_near_one() {
        let a = vec![0.5, 0.55, 0.52, 0.58];
        let b = vec![0.1, 0.12, 0.9e-1, 0.11];
        let result = paired_t_less(&a, &b);
        assert!(result.p_less > 0.99);
    }
}
