//! OLS, lasso, and the sparsity-based treatment-effect estimators.

pub mod efficiency;
pub mod lasso;
pub mod ols;
pub mod selection;

pub use efficiency::{efficiency_gain, efficiency_report, min_p_over_n_for_reduction, EfficiencyReport};
pub use lasso::{lasso, lasso_warm, LassoFit, LassoOptions};
pub use ols::{ols_fwl, OlsFit};
pub use selection::{
    double_t_selection, plugin_lambda, plugin_lasso, plugin_penalty, post_double_selection, post_double_selection_from, t_screen, Controls,
    PenaltyChoice, PluginFit, SbeFit, SbeMethod, DOUBLE_T_THRESHOLD, LOADING_FLOOR,
};
