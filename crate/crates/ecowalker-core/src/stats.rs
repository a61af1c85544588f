//! Paired Wilcoxon signed-rank testing and the condition-comparison report.
//!
//! Zero differences are discarded before ranking; ties in |d| receive
//! average ranks. For n <= 25 the two-sided p value is exact, computed from
//! the full sign-assignment distribution (a subset-sum count over doubled
//! ranks, equivalent to enumerating all 2^n sign patterns). Larger samples
//! use the normal approximation with tie and continuity corrections.

use statrs::function::erf::erfc;
use thiserror::Error;

/// Largest n for which the exact distribution is used.
pub const EXACT_LIMIT: usize = 25;
/// Minimum usable sample size after discarding zero differences.
pub const MIN_SAMPLES: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("paired sample '{0}' has mismatched lengths ({1} vs {2})")]
    LengthMismatch(String, usize, usize),
    #[error("sample '{0}': fewer than {MIN_SAMPLES} non-zero differences ({1})")]
    TooFewSamples(String, usize),
    #[error("sample '{0}': degenerate sample, all differences are zero")]
    DegenerateSample(String),
    #[error("measure '{0}' missing from the paired samples")]
    MissingMeasure(String),
}

/// N pairs of per-cycle values of one measure under two conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub measure: String,
    /// Condition A values (reference condition).
    pub a: Vec<f64>,
    /// Condition B values.
    pub b: Vec<f64>,
}

impl PairedSample {
    pub fn new(measure: impl Into<String>, a: Vec<f64>, b: Vec<f64>) -> PairedSample {
        PairedSample { measure: measure.into(), a, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences (b - a > 0).
    pub w_plus: f64,
    pub w_minus: f64,
    /// Sample size after discarding zero differences.
    pub n_used: usize,
    /// Two-sided p value.
    pub p_value: f64,
    pub method: PValueMethod,
}

/// Average ranks (1-based) of `|d|`, ties averaged.
fn average_ranks(abs_d: &[f64]) -> Vec<f64> {
    let n = abs_d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| abs_d[i].partial_cmp(&abs_d[j]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Exact two-sided p for the signed-rank statistic: subset-sum counting
/// over doubled ranks (average ranks are half-integers).
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut count = vec![0u64; total + 1];
    count[0] = 1;
    for &r in &doubled {
        for s in (0..=total.saturating_sub(r)).rev() {
            if count[s] > 0 {
                count[s + r] += count[s];
            }
        }
    }
    let w2 = (2.0 * w_plus).round() as usize;
    let denom = 2f64.powi(ranks.len() as i32);
    let le: u64 = count[..=w2.min(total)].iter().sum();
    let ge: u64 = count[w2.min(total)..].iter().sum();
    let p = 2.0 * (le.min(ge) as f64) / denom;
    p.min(1.0)
}

/// Normal approximation with tie correction and continuity correction.
fn approx_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mu = n * (n + 1.0) / 4.0;
    // Tie correction: sum of (t^3 - t) over tie groups.
    let mut sorted: Vec<f64> = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let diff = w_plus - mu;
    let z = (diff.abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided paired Wilcoxon signed-rank test of `b` against `a`.
pub fn wilcoxon_signed_rank(sample: &PairedSample) -> Result<WilcoxonResult, StatsError> {
    if sample.a.len() != sample.b.len() {
        return Err(StatsError::LengthMismatch(
            sample.measure.clone(),
            sample.a.len(),
            sample.b.len(),
        ));
    }
    let d: Vec<f64> = sample
        .b
        .iter()
        .zip(&sample.a)
        .map(|(b, a)| b - a)
        .filter(|d| *d != 0.0)
        .collect();
    if d.is_empty() {
        return Err(StatsError::DegenerateSample(sample.measure.clone()));
    }
    if d.len() < MIN_SAMPLES {
        return Err(StatsError::TooFewSamples(sample.measure.clone(), d.len()));
    }
    let abs_d: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = average_ranks(&abs_d);
    let w_plus: f64 =
        ranks.iter().zip(&d).filter(|(_, di)| **di > 0.0).map(|(r, _)| r).sum();
    let n = d.len();
    let w_minus = n as f64 * (n as f64 + 1.0) / 2.0 - w_plus;
    let (p, method) = if n <= EXACT_LIMIT {
        (exact_p(&ranks, w_plus), PValueMethod::Exact)
    } else {
        (approx_p(&ranks, w_plus), PValueMethod::NormalApprox)
    };
    Ok(WilcoxonResult { w_plus, w_minus, n_used: n, p_value: p, method })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mu = mean(v);
    (v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

/// The twelve tabulated measures, in report order.
pub const TABLE_MEASURES: [&str; 12] = [
    "t_skf_pct",
    "t_sapf_pct",
    "dt_sapf_lltd_pct",
    "d_p_tl_mag",
    "d_p_tl_x",
    "d_p_tl_y",
    "d_p_rb_mag",
    "d_p_rb_x",
    "d_p_rb_y",
    "d_p_com_mag",
    "d_p_com_x",
    "d_p_com_y",
];

/// One comparison-report row.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRow {
    pub measure: String,
    /// None when the test could not run; see `note`.
    pub p_value: Option<f64>,
    pub mean_a: f64,
    pub sd_a: f64,
    pub mean_b: f64,
    pub sd_b: f64,
    /// (mean_b - mean_a) / mean_a * 100.
    pub pct_diff: f64,
    pub n: usize,
    pub note: Option<String>,
}

/// Paired-statistics comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<MeasureRow>,
}

/// Builds the comparison report: the twelve tabulated measures in canonical
/// order (all required), followed by any extra registered measures.
pub fn build_report(
    samples: &[PairedSample],
    label_a: impl Into<String>,
    label_b: impl Into<String>,
) -> Result<ComparisonReport, StatsError> {
    for required in TABLE_MEASURES {
        if !samples.iter().any(|s| s.measure == required) {
            return Err(StatsError::MissingMeasure(required.to_string()));
        }
    }
    let mut ordered: Vec<&PairedSample> = Vec::with_capacity(samples.len());
    for required in TABLE_MEASURES {
        ordered.push(samples.iter().find(|s| s.measure == required).unwrap());
    }
    let mut extras: Vec<&PairedSample> =
        samples.iter().filter(|s| !TABLE_MEASURES.contains(&s.measure.as_str())).collect();
    extras.sort_by(|a, b| a.measure.cmp(&b.measure));
    ordered.extend(extras);

    let rows = ordered
        .into_iter()
        .map(|s| {
            let (p_value, note) = match wilcoxon_signed_rank(s) {
                Ok(r) => (Some(r.p_value), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let mean_a = mean(&s.a);
            let mean_b = mean(&s.b);
            MeasureRow {
                measure: s.measure.clone(),
                p_value,
                mean_a,
                sd_a: sample_sd(&s.a),
                mean_b,
                sd_b: sample_sd(&s.b),
                pct_diff: (mean_b - mean_a) / mean_a * 100.0,
                n: s.a.len().min(s.b.len()),
                note,
            }
        })
        .collect();
    Ok(ComparisonReport { label_a: label_a.into(), label_b: label_b.into(), rows })
}

impl ComparisonReport {
    pub fn row(&self, measure: &str) -> Option<&MeasureRow> {
        self.rows.iter().find(|r| r.measure == measure)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "measure,p_value,{a}_mean,{a}_sd,{b}_mean,{b}_sd,diff_pct,n,note\n",
            a = self.label_a,
            b = self.label_b
        ));
        for r in &self.rows {
            let p = r.p_value.map(|p| format!("{p:.6e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.4},{},{}\n",
                r.measure,
                p,
                r.mean_a,
                r.sd_a,
                r.mean_b,
                r.sd_b,
                r.pct_diff,
                r.n,
                r.note.clone().unwrap_or_default()
            ));
        }
        out
    }

    /// Plain-text table mirroring the published column order.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:>12} {:>10} {:>8} {:>10} {:>8} {:>10}\n",
            "measure",
            "p value",
            format!("{} mean", self.label_a),
            "SD",
            format!("{} mean", self.label_b),
            "SD",
            "diff. %"
        ));
        out.push_str(&"-".repeat(84));
        out.push('\n');
        for r in &self.rows {
            let p = r
                .p_value
                .map(|p| format!("{p:.2e}"))
                .unwrap_or_else(|| "n/a".to_string());
            out.push_str(&format!(
                "{:<20} {:>12} {:>10.2} {:>8.2} {:>10.2} {:>8.2} {:>10.2}",
                r.measure, p, r.mean_a, r.sd_a, r.mean_b, r.sd_b, r.pct_diff
            ));
            if let Some(note) = &r.note {
                out.push_str(&format!("  [{note}]"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(a: Vec<f64>, b: Vec<f64>) -> PairedSample {
        PairedSample::new("m", a, b)
    }

    #[test]
    fn five_positive_differences_give_exact_p() {
        let s = sample(vec![0.0; 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let r = wilcoxon_signed_rank(&s).unwrap();
        assert_eq!(r.method, PValueMethod::Exact);
        assert_abs_diff_eq!(r.p_value, 0.0625, epsilon = 1e-15);
        assert_eq!(r.w_plus, 15.0);
    }

    #[test]
    fn identical_series_is_degenerate() {
        let v = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let s = sample(v.clone(), v);
        assert_eq!(
            wilcoxon_signed_rank(&s).unwrap_err(),
            StatsError::DegenerateSample("m".to_string())
        );
    }

    #[test]
    fn too_few_nonzero_differences() {
        let s = sample(vec![0.0, 0.0, 0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0, 0.0, 2.0]);
        assert!(matches!(wilcoxon_signed_rank(&s), Err(StatsError::TooFewSamples(_, 1))));
    }

    /// Independent oracle: brute-force enumeration of all 2^n sign
    /// assignments with independently computed average ranks.
    fn brute_force_p(d: &[f64]) -> f64 {
        let n = d.len();
        let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
        // Independent rank computation: count strictly-smaller and equal.
        let ranks: Vec<f64> = abs
            .iter()
            .map(|x| {
                let smaller = abs.iter().filter(|y| **y < *x).count() as f64;
                let equal = abs.iter().filter(|y| **y == *x).count() as f64;
                smaller + (equal + 1.0) / 2.0
            })
            .collect();
        let w: f64 = ranks.iter().zip(d).filter(|(_, di)| **di > 0.0).map(|(r, _)| r).sum();
        let mut le = 0u64;
        let mut ge = 0u64;
        for mask in 0u64..(1 << n) {
            let wm: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if wm <= w + 1e-12 {
                le += 1;
            }
            if wm >= w - 1e-12 {
                ge += 1;
            }
        }
        (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn exact_p_matches_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 12;
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = a
                .iter()
                .map(|x| {
                    let shift = if trial % 3 == 0 { 0.3 } else { 0.0 };
                    x + rng.gen_range(-1.0..1.0) + shift
                })
                .collect();
            let s = sample(a.clone(), b.clone());
            let r = wilcoxon_signed_rank(&s).unwrap();
            let d: Vec<f64> = b.iter().zip(&a).map(|(bi, ai)| bi - ai).collect();
            assert_abs_diff_eq!(r.p_value, brute_force_p(&d), epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_p_matches_enumeration_with_ties() {
        // Tied |d| values exercise the average-rank path.
        let a = vec![0.0; 8];
        let b = vec![1.0, -1.0, 2.0, 2.0, -2.0, 3.0, 1.0, 4.0];
        let s = sample(a, b.clone());
        let r = wilcoxon_signed_rank(&s).unwrap();
        assert_abs_diff_eq!(r.p_value, brute_force_p(&b), epsilon = 1e-12);
    }

    #[test]
    fn label_swap_leaves_two_sided_p_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = 15;
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..1.5)).collect();
            let p_ab = wilcoxon_signed_rank(&sample(a.clone(), b.clone())).unwrap().p_value;
            let p_ba = wilcoxon_signed_rank(&sample(b, a)).unwrap().p_value;
            assert_abs_diff_eq!(p_ab, p_ba, epsilon = 1e-15);
        }
    }

    proptest! {
        /// Doubling every positive difference never increases the exact p,
        /// provided the positive side already dominates the rank mass
        /// (when it does not, strengthening positives moves W+ toward the
        /// null mean and the two-sided p can grow).
        #[test]
        fn strengthening_dominant_positives_never_increases_p(
            seed in 0u64..500,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 10;
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = a.iter().map(|x| x + rng.gen_range(-0.4..0.8)).collect();
            let s = sample(a.clone(), b.clone());
            let r = match wilcoxon_signed_rank(&s) {
                Ok(r) => r,
                Err(_) => return Ok(()),
            };
            let mu = r.n_used as f64 * (r.n_used as f64 + 1.0) / 4.0;
            prop_assume!(r.w_plus >= mu);
            // Multiply positive differences by 2.
            let b2: Vec<f64> = b
                .iter()
                .zip(&a)
                .map(|(bi, ai)| if bi - ai > 0.0 { ai + 2.0 * (bi - ai) } else { *bi })
                .collect();
            let r2 = wilcoxon_signed_rank(&sample(a, b2)).unwrap();
            prop_assert!(r2.p_value <= r.p_value + 1e-12);
        }
    }

    #[test]
    fn normal_approximation_close_to_exact_at_25() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..25 {
            let n = 25;
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = a.iter().map(|x| x + rng.gen_range(-0.5..0.7)).collect();
            let s = sample(a.clone(), b.clone());
            let exact = wilcoxon_signed_rank(&s).unwrap();
            assert_eq!(exact.method, PValueMethod::Exact);
            let d: Vec<f64> = b.iter().zip(&a).map(|(bi, ai)| bi - ai).collect();
            let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
            let ranks = average_ranks(&abs);
            let approx = approx_p(&ranks, exact.w_plus);
            // The two-sided pmf step near the null mean at n = 25 is about
            // 0.02, so the continuity-corrected approximation can sit up to
            // roughly half a step away from the exact value.
            assert_abs_diff_eq!(approx, exact.p_value, epsilon = 0.008);
        }
    }

    /// At n = 120 with every difference the same sign, the approximation
    /// lands on the familiar 1.9e-21.
    #[test]
    fn all_positive_at_120_matches_reported_magnitude() {
        let a = vec![0.0; 120];
        let b: Vec<f64> = (1..=120).map(|i| i as f64).collect();
        let r = wilcoxon_signed_rank(&sample(a, b)).unwrap();
        assert_eq!(r.method, PValueMethod::NormalApprox);
        assert_relative_eq!(r.p_value.log10(), 1.9e-21f64.log10(), epsilon = 0.05);
    }

    fn full_samples(mean_a: f64, mean_b: f64) -> Vec<PairedSample> {
        let mut out = Vec::new();
        for m in TABLE_MEASURES {
            let a: Vec<f64> = (0..10).map(|i| mean_a + 0.01 * (i as f64 - 4.5)).collect();
            let b: Vec<f64> = (0..10).map(|i| mean_b + 0.01 * (i as f64 - 4.5)).collect();
            out.push(PairedSample::new(m, a, b));
        }
        out
    }

    #[test]
    fn report_percent_difference_formula() {
        let mut samples = full_samples(39.00, 43.67);
        let report = build_report(&samples, "AKFI", "PKFI").unwrap();
        let row = report.row("t_skf_pct").unwrap();
        // (43.67 - 39.00)/39.00 * 100; the published table rounds its
        // unrounded means to 11.98.
        assert_abs_diff_eq!(row.pct_diff, 11.9744, epsilon = 1e-3);
        assert_abs_diff_eq!(row.pct_diff, 11.98, epsilon = 0.05);

        for s in samples.iter_mut() {
            if s.measure == "dt_sapf_lltd_pct" {
                for v in s.a.iter_mut() {
                    *v = *v - 39.00 + 1.62;
                }
                for v in s.b.iter_mut() {
                    *v = *v - 43.67 - 1.88;
                }
            }
        }
        let report = build_report(&samples, "AKFI", "PKFI").unwrap();
        let row = report.row("dt_sapf_lltd_pct").unwrap();
        assert_abs_diff_eq!(row.pct_diff, -216.0494, epsilon = 1e-2);
        assert_abs_diff_eq!(row.pct_diff, -215.55, epsilon = 1.0);
    }

    #[test]
    fn report_identical_means_give_zero_diff() {
        let samples = full_samples(1.5, 1.5);
        let report = build_report(&samples, "A", "B").unwrap();
        for row in &report.rows {
            assert_abs_diff_eq!(row.pct_diff, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn report_flags_degenerate_rows_instead_of_failing() {
        let mut samples = Vec::new();
        for m in TABLE_MEASURES {
            let v: Vec<f64> = (0..10).map(|i| i as f64).collect();
            samples.push(PairedSample::new(m, v.clone(), v));
        }
        let report = build_report(&samples, "A", "A").unwrap();
        for row in &report.rows {
            assert!(row.p_value.is_none());
            assert!(row.note.as_deref().unwrap_or("").contains("degenerate"));
        }
    }

    #[test]
    fn report_requires_all_table_measures() {
        let samples = vec![PairedSample::new("t_skf_pct", vec![1.0; 6], vec![2.0; 6])];
        assert!(matches!(
            build_report(&samples, "A", "B"),
            Err(StatsError::MissingMeasure(_))
        ));
    }

    #[test]
    fn report_orders_table_measures_then_extras() {
        let mut samples = full_samples(1.0, 2.0);
        samples.insert(0, PairedSample::new("cot", vec![0.5; 8], vec![0.6; 8]));
        let report = build_report(&samples, "A", "B").unwrap();
        for (i, m) in TABLE_MEASURES.iter().enumerate() {
            assert_eq!(&report.rows[i].measure, m);
        }
        assert_eq!(report.rows.last().unwrap().measure, "cot");
        let csv = report.to_csv();
        assert!(csv.lines().count() == 1 + report.rows.len());
        let table = report.to_text_table();
        assert!(table.contains("t_skf_pct"));
    }

    #[test]
    fn average_ranks_sum_is_invariant() {
        let abs = vec![3.0, 1.0, 1.0, 2.0, 2.0, 2.0, 5.0];
        let ranks = average_ranks(&abs);
        let n = abs.len() as f64;
        assert_abs_diff_eq!(ranks.iter().sum::<f64>(), n * (n + 1.0) / 2.0, epsilon = 1e-12);
        assert_eq!(ranks[1], 1.5);
        assert_eq!(ranks[2], 1.5);
        assert_eq!(ranks[3], 4.0);
        assert_eq!(ranks[0], 6.0);
    }
}
