//! End-to-end estimation: kernel fit, distribution trace, inversion,
//! normalization, surface recovery and elasticities.

use crate::efficiency::{
    monotonize, normalize_index, normalize_per_region, recover_efficiency, recover_surface,
    trace_distribution, Anchor, BasePoint, EfficiencyDistribution, EfficiencySeries,
    MatchingSurface, ScaleGrid, Warning, DEFAULT_LAMBDA_POINTS, DEFAULT_PSI_POINTS,
};
use crate::elasticity::{
    elasticity_series, lasso_fit, Denominator, ElasticityInput, ElasticitySeries, LassoFit,
    LassoOptions,
};
use crate::error::Result;
use crate::kernel_cdf::{ConditionalCdfEstimator, KernelOptions};
use crate::panel::{MarketPanel, Period};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateOptions<T> {
    pub kernel: KernelOptions<T>,
    pub psi_points: usize,
    pub lambda_points: usize,
    /// Anchor period. Defaults to January of the first sample year.
    pub anchor_period: Option<Period>,
    /// Anchor region. Defaults to the first region in panel order.
    pub anchor_region: Option<String>,
    /// Normalize each region to its own anchor period instead of one shared anchor.
    pub per_region_anchor: bool,
    pub lasso: LassoOptions<T>,
    pub denominator: Denominator,
}

impl<T: Scalar> Default for EstimateOptions<T> {
    fn default() -> Self {
        EstimateOptions {
            kernel: KernelOptions::default(),
            psi_points: DEFAULT_PSI_POINTS,
            lambda_points: DEFAULT_LAMBDA_POINTS,
            anchor_period: None,
            anchor_region: None,
            per_region_anchor: false,
            lasso: LassoOptions::default(),
            denominator: Denominator::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Estimate<T> {
    pub anchor: Anchor,
    pub base: BasePoint<T>,
    pub estimator: ConditionalCdfEstimator<T>,
    pub distribution: EfficiencyDistribution<T>,
    pub efficiency: EfficiencySeries<T>,
    pub surface: MatchingSurface<T>,
    pub lasso: LassoFit<T>,
    pub elasticity: ElasticitySeries<T>,
    /// Every warning raised along the way, including those in `efficiency`.
    pub warnings: Vec<Warning>,
}

impl<T: Scalar> Estimate<T> {
    /// Share of observations whose efficiency was clamped at a grid end.
    pub fn clamped_fraction(&self) -> f64 {
        let n = self.efficiency.points.len();
        if n == 0 {
            0.0
        } else {
            self.efficiency.clamped() as f64 / n as f64
        }
    }
}

pub fn estimate_panel<T: Scalar>(
    panel: &MarketPanel,
    options: &EstimateOptions<T>,
) -> Result<Estimate<T>> {
    let mut warnings = Vec::new();
    let regions = panel.regions();
    let mut anchor = Anchor::default_for(panel, options.anchor_region.as_deref())?;
    if let Some(period) = options.anchor_period {
        anchor.period = period;
    }
    if options.anchor_region.is_none() && regions.len() > 1 && !options.per_region_anchor {
        if let Some(region) = &anchor.region {
            warnings.push(Warning::AnchorRegionDefaulted {
                region: region.clone(),
            });
        }
    }

    let estimator = ConditionalCdfEstimator::fit(panel, options.kernel)?;
    let base = BasePoint::at_anchor(panel, &anchor)?;
    let grid = ScaleGrid::for_panel(panel, &base, options.psi_points, options.lambda_points)?;
    let distribution = monotonize(&trace_distribution(&estimator, &base, &grid)?);
    let raw = recover_efficiency(&estimator, &distribution, panel, &base)?;
    let efficiency = if options.per_region_anchor {
        normalize_per_region(&raw, anchor.period)?
    } else {
        normalize_index(&raw, &anchor)?
    };
    warnings.extend(efficiency.warnings.iter().cloned());
    let surface = recover_surface(&estimator, &distribution, &efficiency, panel)?;

    let inputs: Vec<ElasticityInput<T>> = panel
        .iter()
        .zip(&efficiency.points)
        .map(|(obs, pt)| ElasticityInput {
            period: obs.period,
            region: obs.region.clone(),
            af: pt.a_raw * obs.f::<T>(),
            m: obs.m(),
            engagements: obs.e(),
        })
        .collect();
    let af: Vec<T> = inputs.iter().map(|r| r.af).collect();
    let m: Vec<T> = inputs.iter().map(|r| r.m).collect();
    let e: Vec<T> = inputs.iter().map(|r| r.engagements).collect();
    let lasso = lasso_fit(&af, &m, &e, &options.lasso)?;
    let elasticity = elasticity_series(&lasso, &inputs, options.denominator);
    for p in elasticity.points.iter().filter(|p| p.eps_f.is_none()) {
        warnings.push(Warning::UndefinedElasticity {
            period: p.period,
            region: p.region.clone(),
        });
    }

    Ok(Estimate {
        anchor,
        base,
        estimator,
        distribution,
        efficiency,
        surface,
        lasso,
        elasticity,
        warnings,
    })
}
