//! Linear cost models for the block-loading selector.
//!
//! Full-load time over the walk density `eta = |W| / N_v` fits a line with
//! intercept, `t_f = alpha_f * eta + b_f`; on-demand time fits a line
//! through the origin, `t_o = alpha_o * eta` (no separate loading happens
//! when no walks are pending). The crossover `eta0 = b_f / (alpha_o -
//! alpha_f)` switches the loader: full load above it, on-demand at or below.

use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadMode {
    Full,
    OnDemand,
}

impl fmt::Display for LoadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadMode::Full => write!(f, "full"),
            LoadMode::OnDemand => write!(f, "ondemand"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares with intercept. `None` without two distinct x.
pub fn fit_line(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    for &(x, y) in points {
        sx += x;
        sy += y;
    }
    let mx = sx / n;
    let my = sy / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Least squares constrained through the origin. `None` when all x are zero.
pub fn fit_through_origin(points: &[(f64, f64)]) -> Option<f64> {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += x * x;
        sxy += x * y;
    }
    if points.is_empty() || sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// The loading-mode switching threshold, or the degenerate case where
/// on-demand never crosses the full-load line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Crossover(f64),
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCostModel {
    pub alpha_f: f64,
    pub b_f: f64,
    pub alpha_o: f64,
    pub eta0: Threshold,
}

impl BlockCostModel {
    pub fn derive(alpha_f: f64, b_f: f64, alpha_o: f64) -> Self {
        let eta0 = if alpha_o > alpha_f {
            Threshold::Crossover(b_f / (alpha_o - alpha_f))
        } else {
            Threshold::Degenerate
        };
        BlockCostModel {
            alpha_f,
            b_f,
            alpha_o,
            eta0,
        }
    }

    pub fn predict_full(&self, eta: f64) -> f64 {
        self.alpha_f * eta + self.b_f
    }

    pub fn predict_on_demand(&self, eta: f64) -> f64 {
        self.alpha_o * eta
    }

    /// Full load strictly above the threshold, on-demand otherwise. In the
    /// degenerate case on-demand is cheaper everywhere.
    pub fn choose(&self, eta: f64) -> LoadMode {
        match self.eta0 {
            Threshold::Crossover(eta0) => {
                if eta > eta0 {
                    LoadMode::Full
                } else {
                    LoadMode::OnDemand
                }
            }
            Threshold::Degenerate => LoadMode::OnDemand,
        }
    }
}
