//! Synthetic corpus generation, the end-to-end pipeline and its reports.

mod experiment;
mod plots;

pub use experiment::{experiment_54, AntiPhaseResult, EccentricResult, Exp54Report, SweepPoint, SWEEP_BLENDING};
pub use plots::{emit_plots, scatter_svg, BoxStats};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{phases_to_onsets, solve_phases_ls, simulate_phases, CouplingGraph, SolveMethod, DEFAULT_DT_S};
use crate::diagnostics::{
    analyze_tokens, intervals, quantize, tb_at, write_summary_csv, write_tokens_csv, Analysis, AnalysisSettings,
    TokenRecord, PARSE_FAILURE,
};
use crate::dynamics::{integrate_with, write_trajectories_csv, IntegratorSettings, Trajectory};
use crate::error::{Error, Result};
use crate::landmarks::{find_gesture_with, Direction, ParseSettings};
use crate::score::{build_score, ids, Channel, GesturalScore, Preset, PresetParams};
use crate::smoothing::{default_grid, keyed_rng, robust_smooth_floored, NoiseModel, DEFAULT_ROBUST_ITERATIONS};

/// How the ASSIMILATORY eccentric delay reaches the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingRoute {
    /// Added directly to the palatal activation time.
    #[default]
    Activation,
    /// Derived from a coupling graph solved for relative phase.
    Coupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeakerVariation {
    /// Standard deviation of the stiffness offset as a fraction of the mean.
    pub stiffness_sd_frac: f64,
    pub target_sd_mm: f64,
}

impl Default for SpeakerVariation {
    fn default() -> Self {
        Self {
            stiffness_sd_frac: 0.15,
            target_sd_mm: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_speakers: usize,
    /// Per speaker and condition.
    pub tokens_per_condition: usize,
    pub conditions: Vec<Preset>,
    pub eccentric_delay_ms: f64,
    pub velar_blending_strength: f64,
    pub speaker_variation: SpeakerVariation,
    pub noise: NoiseModel,
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub timing_route: TimingRoute,
    /// Oscillator frequency used by the coupling route, rad/s.
    pub omega0_rad_s: f64,
    pub relaxation_stiffness_s2: f64,
    pub dt_ms: f64,
    /// Lower bound on the residual scale used for robust reweighting,
    /// roughly the resolution of a position sensor.
    pub robust_sd_floor_mm: f64,
    /// Half-width added around the true activation interval when parsing.
    pub parse_margin_ms: f64,
    pub max_parse_failure_fraction: f64,
    pub n_perm: usize,
    /// Seed for the permutation tests, kept apart from the simulation seed
    /// so `analyze` reproduces a report with its default seed.
    pub perm_seed: u64,
    pub outlier_sd: f64,
    /// Repetition labels, cycled; they only name rows in the token CSV.
    pub items: Vec<String>,
    /// Nominal articulation. The top-level delay, velar blending and sample
    /// rate override the matching fields here.
    pub articulation: PresetParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_speakers: 4,
            tokens_per_condition: 144,
            conditions: vec![Preset::Underlying, Preset::Assimilatory, Preset::Sequence],
            eccentric_delay_ms: 25.0,
            velar_blending_strength: 1.0,
            speaker_variation: SpeakerVariation::default(),
            noise: NoiseModel::default(),
            seed: 20_240_504,
            sample_rate_hz: 200.0,
            timing_route: TimingRoute::Activation,
            omega0_rad_s: crate::coupling::DEFAULT_OMEGA0,
            relaxation_stiffness_s2: 1600.0,
            dt_ms: 0.5,
            robust_sd_floor_mm: 0.01,
            parse_margin_ms: 150.0,
            max_parse_failure_fraction: 0.2,
            n_perm: crate::diagnostics::DEFAULT_PERMUTATIONS,
            perm_seed: 0,
            outlier_sd: crate::diagnostics::DEFAULT_OUTLIER_SD,
            items: vec!["ba".into()],
            articulation: PresetParams {
                labial_stiffness_s2: 900.0,
                hold_ms: 40.0,
                velar_target_mm: -3.0,
                velar_stiffness_s2: 10_000.0,
                ..PresetParams::default()
            },
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_speakers == 0 || self.tokens_per_condition == 0 {
            return bad("n_speakers and tokens_per_condition must be >= 1");
        }
        if self.conditions.is_empty() {
            return bad("conditions must not be empty");
        }
        if !(self.eccentric_delay_ms.is_finite() && self.eccentric_delay_ms >= 0.0) {
            return bad("eccentric_delay_ms must be finite and >= 0");
        }
        if !(self.velar_blending_strength > 0.0) {
            return bad("velar_blending_strength must be > 0");
        }
        let v = &self.speaker_variation;
        if !(v.stiffness_sd_frac >= 0.0 && v.stiffness_sd_frac < 0.5 && v.target_sd_mm >= 0.0) {
            return bad("speaker_variation sds must be >= 0 (stiffness fraction below 0.5)");
        }
        self.noise.validate()?;
        if !(self.sample_rate_hz >= crate::score::MIN_SAMPLE_RATE_HZ) {
            return bad("sample_rate_hz must be >= 100");
        }
        if !(self.omega0_rad_s > 0.0 && self.relaxation_stiffness_s2 > 0.0 && self.dt_ms > 0.0) {
            return bad("omega0_rad_s, relaxation_stiffness_s2 and dt_ms must be > 0");
        }
        if !(self.robust_sd_floor_mm >= 0.0) {
            return bad("robust_sd_floor_mm must be >= 0");
        }
        if !(self.parse_margin_ms > 0.0) {
            return bad("parse_margin_ms must be > 0");
        }
        if !(0.0..=1.0).contains(&self.max_parse_failure_fraction) {
            return bad("max_parse_failure_fraction must lie in [0, 1]");
        }
        if self.n_perm == 0 || !(self.outlier_sd > 0.0) {
            return bad("n_perm and outlier_sd must be positive");
        }
        if self.items.is_empty() {
            return bad("items must not be empty");
        }
        Ok(())
    }

    /// Articulation with the top-level overrides applied.
    pub fn nominal(&self) -> PresetParams {
        PresetParams {
            eccentric_delay_ms: self.eccentric_delay_ms,
            velar_blending: self.velar_blending_strength,
            sample_rate_hz: self.sample_rate_hz,
            ..self.articulation.clone()
        }
    }

    pub fn analysis_settings(&self) -> AnalysisSettings {
        AnalysisSettings {
            n_perm: self.n_perm,
            seed: self.perm_seed,
            outlier_sd: self.outlier_sd,
        }
    }

    fn integrator(&self) -> IntegratorSettings {
        IntegratorSettings {
            dt_ms: self.dt_ms,
            relaxation_stiffness_s2: self.relaxation_stiffness_s2,
        }
    }
}

/// Graph placing the velar in phase with the labial and the palatal at the
/// eccentric delay after the velar.
pub fn eccentric_graph(delay_ms: f64, omega0_rad_s: f64) -> CouplingGraph {
    let phi = delay_ms / 1000.0 * omega0_rad_s;
    CouplingGraph::new(ids::LABIAL, omega0_rad_s)
        .with_edge(ids::VELAR, ids::LABIAL, 0.0, 1.0)
        .with_edge(ids::VELAR, ids::PALATAL, phi, 1.0)
}

/// Eccentric delay realised through the planner: palatal minus velar onset.
pub fn planned_delay_ms(delay_ms: f64, omega0_rad_s: f64, method: SolveMethod) -> Result<f64> {
    let graph = eccentric_graph(delay_ms, omega0_rad_s);
    let solution = match method {
        SolveMethod::LeastSquares => solve_phases_ls(&graph)?,
        SolveMethod::Oscillator => simulate_phases(&graph, &BTreeMap::new(), DEFAULT_DT_S, 20.0)?,
    };
    let onsets = phases_to_onsets(&solution, omega0_rad_s, 0.0)?;
    Ok(onsets[ids::PALATAL] - onsets[ids::VELAR])
}

// Key layout for the keyed random streams: speaker | condition | token.
const SPEAKER_LEVEL: u64 = 0xFF;

fn stream_key(speaker: usize, condition: u64, token: usize) -> u64 {
    ((speaker as u64) << 40) | (condition << 32) | token as u64
}

fn condition_code(c: Preset) -> u64 {
    match c {
        Preset::Underlying => 0,
        Preset::Assimilatory => 1,
        Preset::Sequence => 2,
    }
}

pub fn speaker_id(index: usize) -> String {
    format!("S{}", index + 1)
}

/// Speaker-level articulation: Gaussian offsets on stiffness and targets.
pub fn speaker_params(cfg: &ScenarioConfig, speaker: usize) -> PresetParams {
    let mut rng = keyed_rng(cfg.seed, stream_key(speaker, SPEAKER_LEVEL, 0));
    let mut z = || -> f64 { rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng) };
    let v = &cfg.speaker_variation;
    let mut p = cfg.nominal();
    let (zl, zt) = (z(), z());
    p.labial_stiffness_s2 *= 1.0 + v.stiffness_sd_frac * zl;
    p.tb_stiffness_s2 *= 1.0 + v.stiffness_sd_frac * zt;
    p.velar_stiffness_s2 *= 1.0 + v.stiffness_sd_frac * zt;
    p.la_closure_mm += v.target_sd_mm * z();
    p.palatal_target_mm += v.target_sd_mm * z();
    p.velar_target_mm += v.target_sd_mm * z();
    p
}

/// Simulated and parsed data for one token.
#[derive(Debug, Clone)]
pub struct TokenRun {
    pub record: TokenRecord,
    pub score: Option<GesturalScore>,
    /// Noisy traces as they enter smoothing.
    pub raw: BTreeMap<Channel, Trajectory>,
}

struct Measured {
    g1_onset: f64,
    g1_offset: f64,
    g2_onset: f64,
    g1_duration: f64,
    lag: f64,
    tb: f64,
}

fn window(on: f64, off: f64, margin: f64, end: f64) -> (f64, f64) {
    ((on - margin).max(0.0), (off + margin).min(end))
}

fn measure(
    cfg: &ScenarioConfig,
    params: &PresetParams,
    condition: Preset,
    rng: &mut impl Rng,
) -> (Option<GesturalScore>, BTreeMap<Channel, Trajectory>, Result<Measured>) {
    let jit = cfg.noise.draw_perturbation(rng);
    let score = match build_score(condition, params, &jit) {
        Ok(s) => s,
        Err(e) => return (None, BTreeMap::new(), Err(e)),
    };
    let mut raw = match integrate_with(&score, &cfg.integrator()) {
        Ok(t) => t,
        Err(e) => return (Some(score), BTreeMap::new(), Err(e)),
    };
    for traj in raw.values_mut() {
        cfg.noise.add_position_noise(&mut traj.samples, rng);
    }
    let result = (|| {
        let grid = default_grid();
        let smoothed = |ch: Channel| -> Result<Trajectory> {
            let t = &raw[&ch];
            Ok(t.with_samples(robust_smooth_floored(&t.samples, &grid, DEFAULT_ROBUST_ITERATIONS, cfg.robust_sd_floor_mm)?))
        };
        let la = smoothed(Channel::La)?;
        let tb = smoothed(Channel::TbCl)?;
        let lab = score.gesture(ids::LABIAL).expect("preset has a labial gesture");
        let pal = score.gesture(ids::PALATAL).expect("preset has a palatal gesture");
        let settings = ParseSettings::default();
        let end = score.duration_ms;
        let m = cfg.parse_margin_ms;
        let g1 = find_gesture_with(&la, window(lab.t_on_ms, lab.t_off_ms, m, end), Direction::Decreasing, &settings)?;
        let g2 = find_gesture_with(&tb, window(pal.t_on_ms, pal.t_off_ms, m, end), Direction::Increasing, &settings)?;
        let (g1_duration, lag) = intervals(&g1, &g2);
        Ok(Measured {
            g1_onset: g1.onset_ms,
            g1_offset: g1.offset_ms,
            g2_onset: g2.onset_ms,
            g1_duration,
            lag,
            tb: tb_at(&tb, g2.onset_ms)?,
        })
    })();
    (Some(score), raw, result)
}

/// Simulates and parses one token. Stage errors mark it as a parse failure.
pub fn simulate_token(cfg: &ScenarioConfig, params: &PresetParams, speaker: usize, condition: Preset, rep: usize) -> TokenRun {
    let mut rng = keyed_rng(cfg.seed, stream_key(speaker, condition_code(condition), rep));
    let (score, raw, measured) = measure(cfg, params, condition, &mut rng);
    let mut record = TokenRecord {
        speaker: speaker_id(speaker),
        condition,
        item: cfg.items[rep % cfg.items.len()].clone(),
        rep,
        g1_onset_ms: None,
        g1_offset_ms: None,
        g2_onset_ms: None,
        g1_duration_ms: None,
        lag_ms: None,
        tb_pos_mm: None,
        tb_pos_z: None,
        excluded: false,
        exclusion_reason: None,
    };
    match measured {
        Ok(m) => {
            record.g1_onset_ms = Some(quantize(m.g1_onset));
            record.g1_offset_ms = Some(quantize(m.g1_offset));
            record.g2_onset_ms = Some(quantize(m.g2_onset));
            record.g1_duration_ms = Some(quantize(m.g1_duration));
            record.lag_ms = Some(quantize(m.lag));
            record.tb_pos_mm = Some(quantize(m.tb));
        }
        Err(_) => {
            record.excluded = true;
            record.exclusion_reason = Some(PARSE_FAILURE.to_string());
        }
    }
    TokenRun { record, score, raw }
}

/// Effective articulation for a config, with the delay routed as configured.
pub fn scenario_params(cfg: &ScenarioConfig) -> Result<PresetParams> {
    let mut cfg = cfg.clone();
    if cfg.timing_route == TimingRoute::Coupling {
        cfg.eccentric_delay_ms = planned_delay_ms(cfg.eccentric_delay_ms, cfg.omega0_rad_s, SolveMethod::LeastSquares)?;
    }
    Ok(cfg.nominal())
}

/// Simulates every token of the design, in speaker/condition/rep order.
pub fn simulate_tokens(cfg: &ScenarioConfig) -> Result<Vec<TokenRun>> {
    cfg.validate()?;
    let base = scenario_params(cfg)?;
    let speakers: Vec<PresetParams> = (0..cfg.n_speakers)
        .map(|s| {
            let mut p = speaker_params(cfg, s);
            p.eccentric_delay_ms = base.eccentric_delay_ms;
            p
        })
        .collect();
    let jobs: Vec<(usize, Preset, usize)> = (0..cfg.n_speakers)
        .flat_map(|s| {
            cfg.conditions
                .iter()
                .flat_map(move |&c| (0..cfg.tokens_per_condition).map(move |r| (s, c, r)))
        })
        .collect();
    let runs: Vec<TokenRun> = jobs
        .par_iter()
        .map(|&(s, c, r)| simulate_token(cfg, &speakers[s], s, c, r))
        .collect();
    let failed = runs.iter().filter(|r| r.record.excluded).count();
    if failed as f64 > cfg.max_parse_failure_fraction * runs.len() as f64 {
        return Err(Error::TooManyFailures {
            failed,
            total: runs.len(),
        });
    }
    Ok(runs)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub analysis: Analysis,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: ExperimentReport,
    /// Token table after analysis (exclusions and z-scores filled in).
    pub tokens: Vec<TokenRecord>,
}

/// Runs the whole pipeline without writing anything.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    let runs = simulate_tokens(cfg)?;
    let tokens: Vec<TokenRecord> = runs.into_iter().map(|r| r.record).collect();
    let analysis = analyze_tokens(&tokens, &cfg.analysis_settings())?;
    Ok(ScenarioRun {
        tokens: analysis.tokens.clone(),
        report: ExperimentReport {
            config: cfg.clone(),
            seed: cfg.seed,
            analysis,
            outputs: Vec::new(),
        },
    })
}

/// Writes token/summary CSVs, the JSON report and the plots into `out`.
pub fn write_outputs(run: &mut ScenarioRun, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    let tokens_path = out.join("tokens.csv");
    write_tokens_csv(&run.tokens, fs::File::create(&tokens_path)?)?;
    outputs.push(tokens_path);
    let summary_path = out.join("summary.csv");
    write_summary_csv(&run.report.analysis.summary, fs::File::create(&summary_path)?)?;
    outputs.push(summary_path);
    outputs.extend(emit_plots(&run.tokens, &run.report.analysis.summary, out)?);
    let report_path = out.join("report.json");
    outputs.push(report_path.clone());
    run.report.outputs = outputs;
    fs::write(&report_path, serde_json::to_string_pretty(&run.report)?)?;
    Ok(())
}

/// Writes example trajectories (first repetition of each speaker and
/// condition) as CSV under `out/trajectories`.
pub fn write_example_trajectories(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let dir = out.join("trajectories");
    fs::create_dir_all(&dir)?;
    let base = scenario_params(cfg)?;
    let mut paths = Vec::new();
    for s in 0..cfg.n_speakers {
        let mut p = speaker_params(cfg, s);
        p.eccentric_delay_ms = base.eccentric_delay_ms;
        for &c in &cfg.conditions {
            let run = simulate_token(cfg, &p, s, c, 0);
            if run.raw.is_empty() {
                continue;
            }
            let path = dir.join(format!("{}_{}.csv", speaker_id(s), c));
            write_trajectories_csv(&run.raw, fs::File::create(&path)?)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

/// `simulate`: run, then write every artifact.
pub fn simulate_to_dir(cfg: &ScenarioConfig, out: &Path) -> Result<ScenarioRun> {
    let mut run = run_scenario(cfg)?;
    write_outputs(&mut run, out)?;
    let traj = write_example_trajectories(cfg, out)?;
    run.report.outputs.extend(traj);
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&run.report)?)?;
    Ok(run)
}

/// `analyze`: recompute diagnostics from a token CSV.
pub fn analyze_file(tokens_csv: &Path, settings: &AnalysisSettings, out: &Path) -> Result<Analysis> {
    let file = fs::File::open(tokens_csv).map_err(|e| Error::Data(format!("{}: {e}", tokens_csv.display())))?;
    let tokens = crate::diagnostics::read_tokens_csv(file)?;
    let analysis = analyze_tokens(&tokens, settings)?;
    fs::create_dir_all(out)?;
    write_tokens_csv(&analysis.tokens, fs::File::create(out.join("tokens.csv"))?)?;
    write_summary_csv(&analysis.summary, fs::File::create(out.join("summary.csv"))?)?;
    emit_plots(&analysis.tokens, &analysis.summary, out)?;
    fs::write(out.join("analysis.json"), serde_json::to_string_pretty(&analysis)?)?;
    Ok(analysis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            n_speakers: 2,
            tokens_per_condition: 12,
            n_perm: 200,
            ..Default::default()
        }
    }

    #[test]
    fn config_json_uses_unit_suffixed_keys() {
        let v = serde_json::to_value(ScenarioConfig::default()).unwrap();
        for key in ["eccentric_delay_ms", "sample_rate_hz", "tokens_per_condition", "n_speakers"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let cfg = ScenarioConfig::from_json(r#"{"n_speakers": 2, "eccentric_delay_ms": 10}"#).unwrap();
        assert_eq!((cfg.n_speakers, cfg.eccentric_delay_ms), (2, 10.0));
        assert!(matches!(ScenarioConfig::from_json(r#"{"bogus": 1}"#), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_json(r#"{"n_speakers": 0}"#), Err(Error::Config(_))));
    }

    #[test]
    fn planner_route_reproduces_the_delay() {
        let ls = planned_delay_ms(25.0, crate::coupling::DEFAULT_OMEGA0, SolveMethod::LeastSquares).unwrap();
        assert!((ls - 25.0).abs() < 1e-9, "{ls}");
        let osc = planned_delay_ms(25.0, crate::coupling::DEFAULT_OMEGA0, SolveMethod::Oscillator).unwrap();
        assert!((osc - 25.0).abs() < 0.1, "{osc}");
    }

    #[test]
    fn stream_keys_are_distinct() {
        let a = stream_key(1, 0, 5);
        assert_ne!(a, stream_key(0, 1, 5));
        assert_ne!(a, stream_key(1, 0, 6));
        assert_ne!(stream_key(0, SPEAKER_LEVEL, 0), stream_key(0, 0, 0));
    }

    #[test]
    fn silent_underlying_tokens_are_identical() {
        let cfg = ScenarioConfig {
            n_speakers: 1,
            tokens_per_condition: 6,
            conditions: vec![Preset::Underlying],
            noise: NoiseModel::silent(),
            speaker_variation: SpeakerVariation {
                stiffness_sd_frac: 0.0,
                target_sd_mm: 0.0,
            },
            n_perm: 50,
            ..Default::default()
        };
        let run = run_scenario(&cfg).unwrap();
        let first = &run.tokens[0];
        for t in &run.tokens {
            assert_eq!(t.g1_duration_ms, first.g1_duration_ms);
            assert_eq!(t.lag_ms, first.lag_ms);
        }
        let row = run.report.analysis.speaker_rows(Preset::Underlying).next().unwrap();
        assert!(row.regression.is_none());
    }

    #[test]
    fn small_run_is_deterministic() {
        let a = run_scenario(&small()).unwrap();
        let b = run_scenario(&small()).unwrap();
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.report.analysis.summary, b.report.analysis.summary);
        assert!(a.tokens.iter().all(|t| !t.is_parse_failure()));
    }
}
