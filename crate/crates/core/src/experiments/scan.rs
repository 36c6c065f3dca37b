//! One-dimensional parameter scans with data-driven refinement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::linspace;
use crate::error::{Error, Result};
use crate::units;

/// Start on a uniform grid of spacing `coarse_step_mphi0`, then bisect every
/// interval across which some readout channel moves by more than `max_dp`,
/// until intervals would drop below `min_step_mphi0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Refinement {
    pub coarse_step_mphi0: f64,
    pub min_step_mphi0: f64,
    pub max_dp: f64,
    /// Hard cap on evaluated points.
    pub max_points: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Self { coarse_step_mphi0: 1.0, min_step_mphi0: 0.1, max_dp: 0.05, max_points: 400 }
    }
}

impl Refinement {
    pub fn validate(&self) -> Result<()> {
        if !(self.coarse_step_mphi0 > 0.0 && self.min_step_mphi0 > 0.0 && self.max_dp > 0.0) {
            return Err(Error::InvalidConfig("refinement steps and max_dp must be positive".into()));
        }
        if self.max_points < 2 {
            return Err(Error::InvalidConfig("refinement needs max_points ≥ 2".into()));
        }
        Ok(())
    }
}

/// Evaluate `f` on `[lo, hi]` (rad), refining where `channels` changes
/// quickly. Points are evaluated in parallel and returned sorted.
pub fn adaptive_scan<T, F, G>(f: F, channels: G, lo: f64, hi: f64, refine: &Refinement) -> Result<Vec<(f64, T)>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
    G: Fn(&T) -> Vec<f64>,
{
    refine.validate()?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::InvalidConfig(format!("scan range [{lo}, {hi}] is empty")));
    }
    let coarse = units::mphi0_to_rad(refine.coarse_step_mphi0);
    let min_step = units::mphi0_to_rad(refine.min_step_mphi0);
    let n0 = (((hi - lo) / coarse).ceil() as usize + 1).clamp(2, refine.max_points);
    let mut points: Vec<(f64, T)> = evaluate(&f, linspace(lo, hi, n0))?;
    loop {
        let mut new = Vec::new();
        for w in points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let jump = channels(&a.1).iter().zip(channels(&b.1)).any(|(u, v)| (u - v).abs() > refine.max_dp);
            if jump && 0.5 * (b.0 - a.0) >= min_step * (1.0 - 1e-9) {
                new.push(0.5 * (a.0 + b.0));
            }
        }
        let room = refine.max_points.saturating_sub(points.len());
        if new.is_empty() || room == 0 {
            break;
        }
        new.truncate(room);
        points.extend(evaluate(&f, new)?);
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(points)
}

fn evaluate<T: Send, F: Fn(f64) -> Result<T> + Sync>(f: &F, xs: Vec<f64>) -> Result<Vec<(f64, T)>> {
    xs.into_par_iter().map(|x| f(x).map(|v| (x, v))).collect()
}
