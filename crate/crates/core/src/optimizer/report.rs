use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::backends::LossTerms;
use crate::error::Result;

use super::OptimizeConfig;

/// What a search did. `trace[k]` is the loss after update `k + 1`, so a
/// completed search has `trace.len() == config.iterations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    /// Loss at the zero direction.
    pub initial: LossTerms,
    pub trace: Vec<LossTerms>,
    pub wall_clock_secs: f64,
    pub final_direction_norm: f64,
    pub config: OptimizeConfig,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    /// Single-channel mode: loss after projecting onto the selected channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projected: Option<LossTerms>,
    /// Single-channel mode: flat index of the selected channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_channel: Option<usize>,
}

impl OptimizeReport {
    pub(crate) fn new(config: OptimizeConfig, initial: LossTerms) -> Self {
        OptimizeReport {
            initial,
            trace: Vec::with_capacity(config.iterations),
            wall_clock_secs: 0.0,
            final_direction_norm: 0.0,
            config,
            failed: false,
            failure_reason: None,
            projected: None,
            selected_channel: None,
        }
    }

    pub fn initial_loss(&self) -> f64 {
        self.initial.total
    }

    /// Loss after the last completed update (the initial loss if none ran).
    pub fn final_loss(&self) -> f64 {
        self.final_terms().total
    }

    pub fn final_terms(&self) -> LossTerms {
        self.trace.last().copied().unwrap_or(self.initial)
    }

    /// Writes `iteration,total,clip,identity` rows, iteration 0 being the
    /// initial loss.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "total", "clip", "identity"])?;
        for (k, t) in std::iter::once(&self.initial).chain(&self.trace).enumerate() {
            w.write_record([
                k.to_string(),
                t.total.to_string(),
                t.clip.to_string(),
                t.identity.to_string(),
            ])?;
        }
        w.flush().map_err(|e| crate::error::Error::io("<csv>", e))?;
        Ok(())
    }
}
