use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::format::sig9;

/// Interaction area of a fixed commercial mid-air haptics device, 0.63 m x 0.48 m.
pub const BASELINE_AREA: f64 = 0.63 * 0.48;

pub const METRICS_HEADER: &str =
    "t,error_left,error_right,quality_left,quality_right,churn,edge_limited_fraction,unserved_hands";

/// One control tick. Per-hand fields are empty when the hand is stale or
/// not served by any platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: f64,
    /// Lateral distance between the rendered focus and the observed palm, m.
    pub error: [Option<f64>; 2],
    pub quality: [Option<f64>; 2],
    /// Cumulative handovers.
    pub churn: u32,
    pub edge_limited_fraction: f64,
    /// Live hands without a platform.
    pub unserved: u32,
}

impl MetricsRow {
    pub(crate) fn empty(t: f64) -> Self {
        Self {
            t,
            error: [None; 2],
            quality: [None; 2],
            churn: 0,
            edge_limited_fraction: 0.0,
            unserved: 0,
        }
    }

    fn write_csv(&self, out: &mut String) {
        let opt = |v: Option<f64>| v.map(sig9).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            sig9(self.t),
            opt(self.error[0]),
            opt(self.error[1]),
            opt(self.quality[0]),
            opt(self.quality[1]),
            self.churn,
            sig9(self.edge_limited_fraction),
            self.unserved
        );
    }
}

/// Area over which the moving arrays can place a focus, against the fixed baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub mat_area: f64,
    pub baseline_area: f64,
    /// Mat grown by the lateral focal margin on every side.
    pub effective_area: f64,
}

impl CoverageSummary {
    pub fn effective_over_baseline(&self) -> f64 {
        self.effective_area / self.baseline_area
    }
}

pub fn coverage_summary(config: &Config) -> CoverageSummary {
    let m = config.array.frustum.lateral_margin;
    CoverageSummary {
        mat_area: config.mat.area(),
        baseline_area: BASELINE_AREA,
        effective_area: (config.mat.width + 2.0 * m) * (config.mat.height + 2.0 * m),
    }
}

pub(crate) fn render_csv(rows: &[MetricsRow], cov: &CoverageSummary) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 4));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        r.write_csv(&mut out);
    }
    let _ = writeln!(out, "# mat_area_m2,{}", sig9(cov.mat_area));
    let _ = writeln!(out, "# baseline_area_m2,{}", sig9(cov.baseline_area));
    let _ = writeln!(out, "# effective_area_m2,{}", sig9(cov.effective_area));
    let _ = writeln!(out, "# effective_over_baseline,{}", sig9(cov.effective_over_baseline()));
    out
}
