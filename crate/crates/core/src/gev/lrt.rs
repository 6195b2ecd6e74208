use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::fit::FitResult;
use crate::error::{Error, Result};

const DEVIANCE_SLACK: f64 = 1e-8;

/// Outcome of a likelihood-ratio comparison of nested fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodRatio {
    pub deviance: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Upper-tail chi-square probability.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if df == 0 {
        return if x <= 0.0 { 1.0 } else { 0.0 };
    }
    let dist = ChiSquared::new(df as f64).expect("df > 0");
    dist.sf(x.max(0.0))
}

/// Likelihood-ratio test of `nested` against `full`; returns the p-value.
pub fn likelihood_ratio_test(nested: &FitResult, full: &FitResult) -> Result<f64> {
    likelihood_ratio(nested, full).map(|lr| lr.p_value)
}

/// Deviance, degrees of freedom and p-value for nested fits on the same maxima.
pub fn likelihood_ratio(nested: &FitResult, full: &FitResult) -> Result<LikelihoodRatio> {
    if !nested.same_data(full) {
        return Err(Error::InvalidComparison(
            "fits were made on different block maxima".into(),
        ));
    }
    let (a, b) = (&nested.model, &full.model);
    if !a.location.form().nested_in(b.location.form()) {
        return Err(Error::InvalidComparison(format!(
            "location form {} is not a special case of {}",
            a.location.form(),
            b.location.form()
        )));
    }
    if !a.scale.form().nested_in(b.scale.form()) {
        return Err(Error::InvalidComparison(format!(
            "scale form {} is not a special case of {}",
            a.scale.form(),
            b.scale.form()
        )));
    }
    match (a.shape_fixed, b.shape_fixed) {
        (false, true) => {
            return Err(Error::InvalidComparison(
                "nested fit estimates the shape but the full fit holds it fixed".into(),
            ))
        }
        (true, true) if a.shape != b.shape => {
            return Err(Error::InvalidComparison(
                "fits hold the shape at different values".into(),
            ))
        }
        _ => {}
    }
    let df = full.n_parameters() - nested.n_parameters();
    let deviance = 2.0 * (nested.neg_log_likelihood - full.neg_log_likelihood);
    if deviance < -DEVIANCE_SLACK {
        return Err(Error::FitInconsistency(deviance));
    }
    let deviance = deviance.max(0.0);
    if df == 0 && deviance > DEVIANCE_SLACK {
        return Err(Error::FitInconsistency(deviance));
    }
    Ok(LikelihoodRatio {
        deviance,
        df,
        p_value: chi_square_sf(deviance, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gev::fit::fit_mle;
    use crate::gev::params::ParamForm;
    use crate::series::BlockMaxSeries;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chi_square_reference_value() {
        // upper 0.1% point of chi-square(1) is 10.828
        assert_abs_diff_eq!(chi_square_sf(10.83, 1), 0.001, epsilon = 2e-6);
        assert_eq!(chi_square_sf(0.0, 3), 1.0);
    }

    fn sample() -> BlockMaxSeries {
        let z: Vec<f64> = (0..60)
            .map(|i| {
                let p = ((i * 37) % 60) as f64 / 60.0 + 1.0 / 120.0;
                crate::gev::dist::quantile_unchecked(p, 0.1, 0.0, 1.0) + 0.05 * i as f64
            })
            .collect();
        BlockMaxSeries::from_parts((0..60).map(|i| i as f64 / 4.0).collect(), z, 1).unwrap()
    }

    #[test]
    fn identical_models_give_unit_p() {
        let b = sample();
        let fit = fit_mle(&b, ParamForm::Constant, ParamForm::Constant, None).unwrap();
        let lr = likelihood_ratio(&fit, &fit).unwrap();
        assert_eq!(lr.deviance, 0.0);
        assert_eq!(lr.df, 0);
        assert_eq!(lr.p_value, 1.0);
    }

    #[test]
    fn nesting_is_checked() {
        let b = sample();
        let stat = fit_mle(&b, ParamForm::Constant, ParamForm::Constant, None).unwrap();
        let lin = fit_mle(&b, ParamForm::Linear, ParamForm::Constant, None).unwrap();
        let exp_loc = fit_mle(&b, ParamForm::Exponential, ParamForm::Constant, None).unwrap();
        let lr = likelihood_ratio(&stat, &lin).unwrap();
        assert_eq!(lr.df, 1);
        assert!(lr.deviance > 0.0 && lr.p_value < 0.05);
        assert!(matches!(
            likelihood_ratio(&lin, &stat),
            Err(Error::InvalidComparison(_))
        ));
        assert!(matches!(
            likelihood_ratio(&lin, &exp_loc),
            Err(Error::InvalidComparison(_))
        ));

        let fixed = fit_mle(&b, ParamForm::Linear, ParamForm::Constant, Some(0.1)).unwrap();
        assert_eq!(likelihood_ratio(&fixed, &lin).unwrap().df, 1);
        assert!(likelihood_ratio(&lin, &fixed).is_err());

        let other = BlockMaxSeries::from_parts(
            b.block_covariates().to_vec(),
            b.maxima().iter().map(|z| z + 1.0).collect(),
            1,
        )
        .unwrap();
        let shifted = fit_mle(&other, ParamForm::Linear, ParamForm::Constant, None).unwrap();
        assert!(likelihood_ratio(&stat, &shifted).is_err());
    }

    #[test]
    fn negative_deviance_is_rejected() {
        let b = sample();
        let stat = fit_mle(&b, ParamForm::Constant, ParamForm::Constant, None).unwrap();
        let mut lin = fit_mle(&b, ParamForm::Linear, ParamForm::Constant, None).unwrap();
        lin.neg_log_likelihood = stat.neg_log_likelihood + 1.0;
        assert!(matches!(
            likelihood_ratio(&stat, &lin),
            Err(Error::FitInconsistency(_))
        ));
    }
}
