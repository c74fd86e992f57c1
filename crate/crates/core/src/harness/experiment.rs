use serde::Serialize;

use super::{run_scenario, ScenarioConfig};
use crate::diagnostics::{Coordination, RegressionResult};
use crate::error::{Error, Result};
use crate::score::{PalatalAnchor, Preset};

/// Velar blending strengths visited by the blending-only sweep.
pub const SWEEP_BLENDING: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub velar_blending: f64,
    pub lag_contrast_ms: f64,
    pub tb_contrast_mm: f64,
    pub tb_contrast_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntiPhaseResult {
    pub coordination: Option<Coordination>,
    pub pooled: Option<RegressionResult>,
    pub lag_contrast_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EccentricResult {
    pub underlying: Option<Coordination>,
    pub assimilatory: Option<Coordination>,
    pub pooled_assimilatory: Option<RegressionResult>,
    pub lag_contrast_ms: f64,
    pub lag_contrast_p: f64,
    pub tb_contrast_mm: Option<f64>,
}

/// Three candidate accounts of the ASSIMILATORY timing: blending alone,
/// anti-phase palatal timing and eccentric onset timing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exp54Report {
    pub sweep: Vec<SweepPoint>,
    pub anti_phase: AntiPhaseResult,
    pub eccentric: EccentricResult,
}

fn two_conditions(cfg: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        conditions: vec![Preset::Underlying, Preset::Assimilatory],
        ..cfg.clone()
    }
}

fn missing(what: &str) -> Error {
    Error::Degenerate(format!("{what} could not be computed"))
}

pub fn experiment_54(cfg: &ScenarioConfig) -> Result<Exp54Report> {
    cfg.validate()?;
    let base = two_conditions(cfg);

    let mut sweep = Vec::with_capacity(SWEEP_BLENDING.len());
    for &w in &SWEEP_BLENDING {
        let mut c = ScenarioConfig {
            eccentric_delay_ms: 0.0,
            velar_blending_strength: w,
            ..base.clone()
        };
        c.articulation.velar_stiffness_s2 = c.articulation.tb_stiffness_s2;
        let a = run_scenario(&c)?.report.analysis;
        sweep.push(SweepPoint {
            velar_blending: w,
            lag_contrast_ms: a.lag_contrast.ok_or_else(|| missing("lag contrast"))?.difference,
            tb_contrast_mm: a.tb_contrast_mm.ok_or_else(|| missing("TB contrast"))?.difference,
            tb_contrast_z: a.tb_contrast_z.map(|c| c.difference),
        });
    }

    let mut anti = base.clone();
    anti.articulation.assimilatory_anchor = PalatalAnchor::AntiPhase;
    let a = run_scenario(&anti)?.report.analysis;
    let anti_phase = AntiPhaseResult {
        coordination: a.classification(Preset::Assimilatory),
        pooled: a.pooled(Preset::Assimilatory),
        lag_contrast_ms: a.lag_contrast.map(|c| c.difference),
    };

    let a = run_scenario(&base)?.report.analysis;
    let lag = a.lag_contrast.ok_or_else(|| missing("lag contrast"))?;
    let eccentric = EccentricResult {
        underlying: a.classification(Preset::Underlying),
        assimilatory: a.classification(Preset::Assimilatory),
        pooled_assimilatory: a.pooled(Preset::Assimilatory),
        lag_contrast_ms: lag.difference,
        lag_contrast_p: lag.p_perm,
        tb_contrast_mm: a.tb_contrast_mm.map(|c| c.difference),
    };

    Ok(Exp54Report {
        sweep,
        anti_phase,
        eccentric,
    })
}
