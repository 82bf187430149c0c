//! Monotone models beyond least squares regression that share the
//! block-average interval: decreasing densities, current status data,
//! panel counts and exponential-family responses.

pub mod current_status;
pub mod glm;
pub mod grenander;
pub mod panel;

pub use current_status::{current_status_ci, current_status_fit, CurrentStatusData};
pub use glm::{glm_isotonic_ci, glm_isotonic_fit, GlmFamily, GlmFit, GlmVarianceMode};
pub use grenander::{grenander_ci, grenander_ci_from_fit, grenander_fit, GrenanderFit};
pub use panel::{panel_count_ci, panel_count_fit, PanelCountData, PanelFit, PanelSubject};
