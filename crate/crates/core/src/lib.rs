//! Survival analysis for right-censored lifetimes.
//!
//! The crate covers the censored-observation data model and CSV ingestion
//! ([`data`], [`io`]), the Kaplan-Meier product-limit estimator together with
//! the cumulative hazard and the observed/expected two-group hazard ratio
//! ([`nonparametric`]), Cox proportional-hazards regression by Newton-Raphson
//! on the partial likelihood ([`coxph`]), and a seeded Monte-Carlo generator for
//! right-censored driving campaigns ([`sim`]).
//!
//! Estimators are generic over the floating-point type through [`Scalar`];
//! the `*64` / `*32` aliases below fix the common instantiations.
//!
//! ```
//! use hazardlab_core::{kaplan_meier, Dataset64, Observation};
//!
//! let obs = [(1.0, true), (2.0, true), (3.0, false), (4.0, true), (5.0, false)]
//!     .iter()
//!     .map(|&(t, e)| Observation::new(t, e, vec![]))
//!     .collect();
//! let data = Dataset64::new(obs, vec![]).unwrap();
//! let curve = kaplan_meier(&data, 0.95).unwrap();
//! assert!((curve.survival_at(4.0) - 0.3).abs() < 1e-12);
//! ```

pub mod coxph;
pub mod data;
pub mod error;
pub mod io;
mod linalg;
pub mod nonparametric;
pub mod normal;
pub mod numfmt;
pub mod scalar;
pub mod sim;

pub use coxph::{
    fit, hazard_ratio_between, partial_gradient, partial_hessian, partial_log_likelihood,
    predict_survival, CoxFit, FitOptions, TieMethod,
};
pub use data::{
    build_event_table, encode_campaign_covariates, CensoringKind, Dataset, EventRow, EventTable,
    ModelType, Observation, CAMPAIGN_COVARIATES,
};
pub use error::{Error, Result};
pub use io::{
    load_csv, load_csv_inferred, read_csv, save_csv, write_csv, ColumnKind, ColumnSpec, Schema,
};
pub use nonparametric::{
    cumulative_hazard, kaplan_meier, two_group_hazard_ratio, HazardCurve, SurvivalCurve, TwoGroupHR,
};
pub use scalar::Scalar;
pub use sim::{
    calibrate_baseline_rate, simulate, standard_campaign_config, CampaignConfig, Combination,
    SimulatedCampaign, Weather,
};

pub type Observation64 = Observation<f64>;
pub type Observation32 = Observation<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type EventTable64 = EventTable<f64>;
pub type EventTable32 = EventTable<f32>;
pub type SurvivalCurve64 = SurvivalCurve<f64>;
pub type SurvivalCurve32 = SurvivalCurve<f32>;
pub type HazardCurve64 = HazardCurve<f64>;
pub type HazardCurve32 = HazardCurve<f32>;
pub type TwoGroupHR64 = TwoGroupHR<f64>;
pub type TwoGroupHR32 = TwoGroupHR<f32>;
pub type CoxFit64 = CoxFit<f64>;
pub type CoxFit32 = CoxFit<f32>;
pub type FitOptions64 = FitOptions<f64>;
pub type FitOptions32 = FitOptions<f32>;
