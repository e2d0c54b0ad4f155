//! Two-receiver capacity region, symmetric rates and reference regions.

mod bounds;
mod closed_form;
mod polygon;
mod prop3;

pub use bounds::{
    baseline_regions, binding_constraints, region_polygon, sym_rate_direct, tdma_symmetric_rate, weighted_bound,
    BaselineRegions, Mu, MuCertificate, Protected,
};
pub use closed_form::{feedback_only_sym_rate, sym_rate_closed_forms, ClosedForms, DISCREPANCY_TOL};
pub use polygon::{fmt_sig, HalfPlane, RegionPolygon};
pub use prop3::{beta_to_alpha, prop3_rates, AlphaTriple, BetaPair, Prop3Point, FEASIBILITY_TOL};
