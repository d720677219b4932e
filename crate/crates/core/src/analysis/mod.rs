//! Post-processing of ensemble averages.

mod collapse;
mod fit;
mod susceptibility;

pub use collapse::{
    collapse_cost, fss_collapse, CollapseBox, CollapseCurve, CollapseOptions, CollapseResult,
};
pub use fit::{
    detect_crossing, extrapolate_ceff, fit_ceff, fit_windows, moving_windows, registered_windows,
    size_slope, weighted_polyfit, CeffPoint, Crossing, Extrapolation, FitResult, PolyFit,
    ScalingPoint, ScalingSeries,
};
pub use susceptibility::{susceptibility, Derivative};
