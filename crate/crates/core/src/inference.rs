//! Sandwich covariance of the pseudo-likelihood estimator and Wald intervals.
//!
//! The score covariance is estimated by `Ŝ + Σ̂`: the sum of conditional
//! variances plus the sum over ordered `R`-close pairs of cached points of
//! products of their residuals.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{LogitDesign, StatCache};
use crate::model::ReparamMap;
use crate::pattern::NeighborIndex;

#[derive(Debug, Clone)]
pub struct SandwichEstimate {
    pub s_hat: DMatrix<f64>,
    pub sigma_pair_hat: DMatrix<f64>,
    pub sigma_total_hat: DMatrix<f64>,
    pub vcov: DMatrix<f64>,
}

/// `Tᵀ Σ̂ T`: ordered distinct pairs of cached points within the Markov range.
pub fn pair_covariance(cache: &StatCache, t: &ReparamMap, beta: &[f64]) -> Result<DMatrix<f64>> {
    let design = LogitDesign::new(cache, t)?;
    if beta.len() != design.dim() {
        return Err(Error::DimensionMismatch {
            expected: design.dim(),
            got: beta.len(),
        });
    }
    Ok(pair_covariance_design(cache, &design, beta))
}

pub(crate) fn pair_covariance_design(cache: &StatCache, design: &LogitDesign, beta: &[f64]) -> DMatrix<f64> {
    let kp = design.dim();
    let n = cache.len();
    let r = cache.markov_range();
    if n == 0 || r <= 0.0 {
        return DMatrix::zeros(kp, kp);
    }
    let residuals: Vec<Vec<f64>> = (0..n).into_par_iter().map(|m| design.residual(m, beta)).collect();
    let bounds = *cache.domain().rect();
    let index = NeighborIndex::from_points(cache.locations(), cache.marks(), &bounds, r);
    let r2 = r * r;
    // Σ_a h_a (Σ_{b ≠ a, |a-b| ≤ R} h_b)ᵀ, computed per fixed-size chunk and summed in order
    let starts: Vec<usize> = (0..n).step_by(128).collect();
    let partials: Vec<DMatrix<f64>> = starts
        .par_iter()
        .map(|&s| {
            let mut acc = DMatrix::zeros(kp, kp);
            let mut g = DVector::zeros(kp);
            for a in s..(s + 128).min(n) {
                g.fill(0.0);
                let u = cache.location(a);
                let mut any = false;
                index.for_each_index_within(&u, r, |b| {
                    if b != a && u.dist2(&cache.location(b)) <= r2 {
                        any = true;
                        for (gg, hb) in g.iter_mut().zip(&residuals[b]) {
                            *gg += hb;
                        }
                    }
                });
                if any {
                    let h = DVector::from_column_slice(&residuals[a]);
                    acc.ger(1.0, &h, &g, 1.0);
                }
            }
            acc
        })
        .collect();
    let mut total = DMatrix::zeros(kp, kp);
    for p in partials {
        total += p;
    }
    (&total + total.transpose()) * 0.5
}

/// `S⁻¹ (Ŝ + Σ̂) S⁻¹` via two Cholesky solves.
pub fn sandwich_vcov(s_hat: &DMatrix<f64>, sigma_pair_hat: &DMatrix<f64>) -> Result<SandwichEstimate> {
    let chol = s_hat.clone().cholesky().ok_or(Error::SingularSensitivity)?;
    let total = s_hat + sigma_pair_hat;
    let left = chol.solve(&total);
    let vcov = chol.solve(&left.transpose());
    let vcov = (&vcov + vcov.transpose()) * 0.5;
    Ok(SandwichEstimate {
        s_hat: s_hat.clone(),
        sigma_pair_hat: sigma_pair_hat.clone(),
        sigma_total_hat: total,
        vcov,
    })
}

/// Full sandwich estimate at `beta`.
pub fn sandwich(cache: &StatCache, t: &ReparamMap, beta: &[f64]) -> Result<SandwichEstimate> {
    let design = LogitDesign::new(cache, t)?;
    let s = design.evaluate(beta).sensitivity;
    sandwich_from_design(cache, &design, t, beta, s)
}

pub(crate) fn sandwich_from_design(
    cache: &StatCache,
    design: &LogitDesign,
    _t: &ReparamMap,
    beta: &[f64],
    s_hat: DMatrix<f64>,
) -> Result<SandwichEstimate> {
    let pair = pair_covariance_design(cache, design, beta);
    sandwich_vcov(&s_hat, &pair)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub parameter: String,
    pub estimate: f64,
    pub std_error: f64,
    pub low: f64,
    pub high: f64,
    pub level: f64,
    /// False when the variance entry is negative or not finite.
    pub valid: bool,
}

impl ConfidenceInterval {
    pub fn covers(&self, value: f64) -> bool {
        self.valid && self.low <= value && value <= self.high
    }
}

/// `β̂_j ± z_{(1+level)/2} · sqrt(vcov_jj)`.
pub fn confidence_intervals(
    beta_hat: &[f64],
    vcov: &DMatrix<f64>,
    level: f64,
    names: &[String],
) -> Result<Vec<ConfidenceInterval>> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Config(format!("confidence level {level} is not in [0,1)")));
    }
    if vcov.nrows() != beta_hat.len() || vcov.ncols() != beta_hat.len() || names.len() != beta_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: beta_hat.len(),
            got: vcov.nrows(),
        });
    }
    let z = if level == 0.0 { 0.0 } else { normal_quantile(0.5 * (1.0 + level)) };
    Ok(beta_hat
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let var = vcov[(j, j)];
            let valid = var.is_finite() && var >= 0.0;
            let se = if valid { var.sqrt() } else { f64::NAN };
            ConfidenceInterval {
                parameter: names[j].clone(),
                estimate: b,
                std_error: se,
                low: if valid { b - z * se } else { f64::NAN },
                high: if valid { b + z * se } else { f64::NAN },
                level,
                valid,
            }
        })
        .collect())
}

/// Standard normal quantile (Wichura's AS241, about 1e-16 relative accuracy).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(
            &[
                3.387_132_872_796_366_5,
                133.141_667_891_784_38,
                1_971.590_950_306_551_3,
                13_731.693_765_509_46,
                45_921.953_931_549_87,
                67_265.770_927_008_7,
                33_430.575_583_588_13,
                2_509.080_928_730_122_7,
            ],
            r,
        ) / poly(
            &[
                1.0,
                42.313_330_701_600_91,
                687.187_007_492_057_9,
                5_394.196_021_424_751,
                21_213.794_301_586_597,
                39_307.895_800_092_71,
                28_729.085_735_721_943,
                5_226.495_278_852_545,
            ],
            r,
        );
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(
            &[
                1.423_437_110_749_683_5,
                4.630_337_846_156_546,
                5.769_497_221_460_691,
                3.647_848_324_763_204_5,
                1.270_458_252_452_368_4,
                0.241_780_725_177_450_6,
                0.022_723_844_989_269_184,
                7.745_450_142_783_414e-4,
            ],
            r,
        ) / poly(
            &[
                1.0,
                2.053_191_626_637_759,
                1.676_384_830_183_803_8,
                0.689_767_334_985_1,
                0.148_103_976_427_480_08,
                0.015_198_666_563_616_457,
                5.475_938_084_995_345e-4,
                1.050_750_071_644_416_9e-9,
            ],
            r,
        )
    } else {
        let r = r - 5.0;
        poly(
            &[
                6.657_904_643_501_103,
                5.463_784_911_164_114,
                1.784_826_539_917_291_3,
                0.296_560_571_828_504_9,
                0.026_532_189_526_576_124,
                0.001_242_660_947_388_078_4,
                2.711_555_568_743_487_6e-5,
                2.010_334_399_292_288_1e-7,
            ],
            r,
        ) / poly(
            &[
                1.0,
                0.599_832_206_555_888,
                0.136_929_880_922_735_8,
                0.014_875_361_290_850_615,
                7.868_691_311_456_133e-4,
                1.846_318_317_510_054_8e-5,
                1.421_511_758_316_446e-7,
                2.044_263_103_389_939_7e-15,
            ],
            r,
        )
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantile_values() {
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.5)).abs() < 1e-15);
        assert!((normal_quantile(0.001) + 3.090_232_306_167_813_5).abs() < 1e-12);
        assert!((normal_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-9);
    }

    #[test]
    fn unit_interval() {
        let ci = confidence_intervals(&[0.0], &DMatrix::identity(1, 1), 0.95, &["a".into()]).unwrap();
        assert_eq!(format!("{:.3}", ci[0].low), "-1.960");
        assert_eq!(format!("{:.3}", ci[0].high), "1.960");
        let ci = confidence_intervals(&[0.3], &DMatrix::identity(1, 1), 0.0, &["a".into()]).unwrap();
        assert_eq!((ci[0].low, ci[0].high), (0.3, 0.3));
    }

    #[test]
    fn negative_variance_marked_invalid() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let ci = confidence_intervals(&[0.0, 0.0], &v, 0.9, &["a".into(), "b".into()]).unwrap();
        assert!(ci[0].valid && !ci[1].valid);
    }

    #[test]
    fn zero_pair_term_gives_inverse() {
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let est = sandwich_vcov(&s, &DMatrix::zeros(2, 2)).unwrap();
        let inv = s.clone().try_inverse().unwrap();
        assert!((est.vcov - inv).amax() < 1e-14);
    }

    #[test]
    fn singular_sensitivity() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(sandwich_vcov(&s, &DMatrix::zeros(2, 2)), Err(Error::SingularSensitivity)));
    }

    proptest! {
        #[test]
        fn quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
            let z = normal_quantile(p);
            let back = 0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2);
            prop_assert!((back - p).abs() <= 1e-9 * p.min(1.0 - p).max(1e-3));
        }

        #[test]
        fn widths_monotone_in_level(a in 0.01f64..0.98, d in 0.001f64..0.01) {
            let v = DMatrix::identity(1, 1);
            let n = ["x".to_string()];
            let lo = confidence_intervals(&[0.0], &v, a, &n).unwrap();
            let hi = confidence_intervals(&[0.0], &v, a + d, &n).unwrap();
            prop_assert!(hi[0].high - hi[0].low > lo[0].high - lo[0].low);
        }
    }
}
