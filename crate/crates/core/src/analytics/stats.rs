//! Two-sample statistics: Welch's t-test, pooled Cohen's d, and the 2×2
//! chi-square test. Distribution tails come from the regularized incomplete
//! beta and gamma functions evaluated by continued fractions.

use serde::{Deserialize, Serialize};

use super::AnalyticsError;

/// Count, mean and sample (n − 1) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl SampleSummary {
    pub fn new(n: usize, mean: f64, sd: f64) -> Result<Self, AnalyticsError> {
        if n < 2 {
            return Err(AnalyticsError::InsufficientData { needed: 2, found: n });
        }
        if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) {
            return Err(AnalyticsError::Undefined(format!("bad summary mean={mean} sd={sd}")));
        }
        Ok(Self { n, mean, sd })
    }

    pub fn from_sample(xs: &[f64]) -> Result<Self, AnalyticsError> {
        let n = xs.len();
        if n < 2 {
            return Err(AnalyticsError::InsufficientData { needed: 2, found: n });
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        Self::new(n, mean, (ss / (n - 1) as f64).sqrt())
    }

    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci95: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect_size: Option<f64>,
}

/// Welch's unequal-variance t-test on summaries; `ci95` bounds `mean_a - mean_b`.
pub fn welch_t_test(a: &SampleSummary, b: &SampleSummary) -> Result<TestResult, AnalyticsError> {
    let va = a.variance() / a.n as f64;
    let vb = b.variance() / b.n as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(AnalyticsError::Undefined("both samples have zero variance".into()));
    }
    let se = se2.sqrt();
    let diff = a.mean - b.mean;
    let t = diff / se;
    let df = se2 * se2 / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
    let p = student_t_two_sided(t, df);
    let crit = student_t_quantile(0.975, df);
    Ok(TestResult {
        statistic: t,
        df,
        p_value: p,
        ci95: Some((diff - crit * se, diff + crit * se)),
        effect_size: None,
    })
}

pub fn welch_t_test_samples(a: &[f64], b: &[f64]) -> Result<TestResult, AnalyticsError> {
    welch_t_test(&SampleSummary::from_sample(a)?, &SampleSummary::from_sample(b)?)
}

/// Cohen's d with the pooled standard deviation; same sign as Welch's t.
pub fn cohens_d_pooled(a: &SampleSummary, b: &SampleSummary) -> Result<f64, AnalyticsError> {
    let (na, nb) = (a.n as f64, b.n as f64);
    let pooled = (((na - 1.0) * a.variance() + (nb - 1.0) * b.variance()) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Err(AnalyticsError::Undefined("pooled standard deviation is zero".into()));
    }
    Ok((a.mean - b.mean) / pooled)
}

/// Pearson chi-square on a 2×2 table, no continuity correction; the effect
/// size is φ.
pub fn chi_square_2x2(table: [[u64; 2]; 2]) -> Result<TestResult, AnalyticsError> {
    let [[a, b], [c, d]] = table.map(|row| row.map(|x| x as f64));
    let marginals = [a + b, c + d, a + c, b + d];
    if marginals.contains(&0.0) {
        return Err(AnalyticsError::Undefined("2x2 table has an empty row or column".into()));
    }
    let n = a + b + c + d;
    let cross = a * d - b * c;
    let chi2 = n * cross * cross / marginals.iter().product::<f64>();
    Ok(TestResult {
        statistic: chi2,
        df: 1.0,
        p_value: chi_square_sf(chi2, 1.0),
        ci95: None,
        effect_size: Some((chi2 / n).sqrt()),
    })
}

// Special functions.

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 500;

/// Lentz evaluation of the incomplete beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    1.0 - regularized_gamma_q(a, x)
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_front = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // Series for P.
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        1.0 - sum * ln_front.exp()
    } else {
        // Continued fraction for Q.
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        ln_front.exp() * h
    }
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    regularized_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Student's t CDF.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * student_t_two_sided(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse of [`student_t_cdf`] by bisection.
pub fn student_t_quantile(prob: f64, df: f64) -> f64 {
    assert!(prob > 0.0 && prob < 1.0, "quantile probability must be in (0, 1)");
    if prob == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while student_t_cdf(lo, df) > prob {
        lo *= 2.0;
    }
    while student_t_cdf(hi, df) < prob {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Chi-square survival function.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    regularized_gamma_q(df / 2.0, x / 2.0).clamp(0.0, 1.0)
}
