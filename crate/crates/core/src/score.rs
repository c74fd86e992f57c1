//! Gestural scores: tract variables, gestures and their activation intervals.
//!
//! A score is a plain value type. It serializes to the JSON score file with
//! the field names `duration_ms`, `sample_rate_hz`, `tract_variables` and
//! `gestures`; see [`GesturalScore::to_json`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest activation interval a gesture may have.
pub const MIN_ACTIVATION_MS: f64 = 10.0;
/// Lowest sample rate at which 20%-of-peak landmarks are still resolvable.
pub const MIN_SAMPLE_RATE_HZ: f64 = 100.0;

/// Controlled vocal-tract dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    /// Lip aperture.
    #[serde(rename = "LA")]
    La,
    /// Tongue-body front/back position; positive is front.
    #[serde(rename = "TB_CL")]
    TbCl,
    /// Tongue-body constriction degree (vertical).
    #[serde(rename = "TB_CD")]
    TbCd,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::La, Channel::TbCl, Channel::TbCd];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::La => "LA",
            Channel::TbCl => "TB_CL",
            Channel::TbCd => "TB_CD",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LA" => Ok(Channel::La),
            "TB_CL" => Ok(Channel::TbCl),
            "TB_CD" => Ok(Channel::TbCd),
            other => Err(Error::InvalidArgument(format!("unknown channel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractVariable {
    pub name: Channel,
    /// Rest position the variable relaxes toward when no gesture is active.
    pub neutral_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gesture {
    pub id: String,
    pub tract_variable: Channel,
    pub target_mm: f64,
    /// Stiffness k in s⁻²; the natural frequency is √k.
    pub stiffness_s2: f64,
    pub damping_ratio: f64,
    pub blending_strength: f64,
    pub t_on_ms: f64,
    pub t_off_ms: f64,
    #[serde(default)]
    pub descriptor: String,
}

impl Gesture {
    /// Natural frequency ωₙ = √k in s⁻¹.
    pub fn omega_n(&self) -> f64 {
        self.stiffness_s2.sqrt()
    }

    /// Active on the half-open interval `[t_on, t_off)`.
    pub fn is_active(&self, t_ms: f64) -> bool {
        self.t_on_ms <= t_ms && t_ms < self.t_off_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GesturalScore {
    pub duration_ms: f64,
    pub sample_rate_hz: f64,
    pub tract_variables: Vec<TractVariable>,
    pub gestures: Vec<Gesture>,
}

/// One broken invariant, reported by [`validate_score`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Offending gesture, or `None` for score-level problems.
    pub gesture: Option<String>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.gesture {
            Some(id) => write!(f, "gesture `{id}`: {}", self.reason),
            None => write!(f, "score: {}", self.reason),
        }
    }
}

/// Collects every invariant violation; an empty list means the score is valid.
pub fn validate_score(score: &GesturalScore) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut score_err = |reason: String| {
        out.push(Violation {
            gesture: None,
            reason,
        })
    };

    if !(score.duration_ms.is_finite() && score.duration_ms > 0.0) {
        score_err(format!("duration {} ms must be positive", score.duration_ms));
    }
    if !(score.sample_rate_hz.is_finite() && score.sample_rate_hz >= MIN_SAMPLE_RATE_HZ) {
        score_err(format!(
            "sample rate {} Hz below {MIN_SAMPLE_RATE_HZ} Hz",
            score.sample_rate_hz
        ));
    }
    let mut seen = Vec::new();
    for tv in &score.tract_variables {
        if seen.contains(&tv.name) {
            score_err(format!("duplicate tract variable {}", tv.name));
        }
        seen.push(tv.name);
        if !tv.neutral_mm.is_finite() {
            score_err(format!("neutral value of {} is not finite", tv.name));
        }
    }

    let mut ids: Vec<&str> = Vec::new();
    for g in &score.gestures {
        let mut err = |reason: String| {
            out.push(Violation {
                gesture: Some(g.id.clone()),
                reason,
            })
        };
        if ids.contains(&g.id.as_str()) {
            err("duplicate gesture id".into());
        }
        ids.push(&g.id);
        if !score.tract_variables.iter().any(|tv| tv.name == g.tract_variable) {
            err(format!("tract variable {} not declared", g.tract_variable));
        }
        if !g.target_mm.is_finite() {
            err("target is not finite".into());
        }
        if !(g.stiffness_s2 > 0.0 && g.stiffness_s2.is_finite()) {
            err(format!("stiffness {} must be > 0", g.stiffness_s2));
        }
        if !(g.blending_strength > 0.0 && g.blending_strength.is_finite()) {
            err(format!("blending strength {} must be > 0", g.blending_strength));
        }
        if !(g.damping_ratio >= 1.0 && g.damping_ratio.is_finite()) {
            err(format!("damping ratio {} must be >= 1", g.damping_ratio));
        }
        if !(g.t_on_ms < g.t_off_ms) {
            err(format!("t_on < t_off violated ({} >= {})", g.t_on_ms, g.t_off_ms));
        } else if g.t_off_ms - g.t_on_ms < MIN_ACTIVATION_MS {
            err(format!(
                "activation {} ms shorter than {MIN_ACTIVATION_MS} ms",
                g.t_off_ms - g.t_on_ms
            ));
        }
        if g.t_on_ms < 0.0 || g.t_off_ms > score.duration_ms {
            err(format!(
                "activation [{}, {}] outside [0, {}]",
                g.t_on_ms, g.t_off_ms, score.duration_ms
            ));
        }
    }
    out
}

/// Gesture ids active at `t_ms`, grouped by tract variable. Channels with no
/// active gesture are absent from the map.
pub fn active_gestures(score: &GesturalScore, t_ms: f64) -> Result<BTreeMap<Channel, Vec<String>>> {
    if !(0.0..=score.duration_ms).contains(&t_ms) {
        return Err(Error::OutOfRange {
            t_ms,
            lo_ms: 0.0,
            hi_ms: score.duration_ms,
        });
    }
    let mut map: BTreeMap<Channel, Vec<String>> = BTreeMap::new();
    for g in score.gestures.iter().filter(|g| g.is_active(t_ms)) {
        map.entry(g.tract_variable).or_default().push(g.id.clone());
    }
    Ok(map)
}

impl GesturalScore {
    pub fn gesture(&self, id: &str) -> Option<&Gesture> {
        self.gestures.iter().find(|g| g.id == id)
    }

    pub fn neutral(&self, channel: Channel) -> Option<f64> {
        self.tract_variables
            .iter()
            .find(|tv| tv.name == channel)
            .map(|tv| tv.neutral_mm)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Presets

/// Gesture ids used by the presets.
pub mod ids {
    pub const LABIAL: &str = "lab";
    pub const PALATAL: &str = "pal";
    pub const VELAR: &str = "vel";
    pub const VOWEL: &str = "vow";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Preset {
    /// Palatalized consonant: labial closure plus in-phase palatal gesture.
    Underlying,
    /// Plain consonant before a glide: adds a velar gesture and delays the
    /// palatal onset eccentrically.
    Assimilatory,
    /// Consonant-glide sequence: palatal onset tied to the labial offset.
    Sequence,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Underlying, Preset::Assimilatory, Preset::Sequence];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Underlying => "UNDERLYING",
            Preset::Assimilatory => "ASSIMILATORY",
            Preset::Sequence => "SEQUENCE",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "UNDERLYING" => Ok(Preset::Underlying),
            "ASSIMILATORY" => Ok(Preset::Assimilatory),
            "SEQUENCE" => Ok(Preset::Sequence),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

/// How the palatal onset is anchored to the labial gesture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PalatalAnchor {
    /// Onset to onset (complex segment), plus any eccentric delay.
    #[default]
    InPhase,
    /// Onset to the labial offset (segment sequence).
    AntiPhase,
}

/// Speaker-level parameters for the presets. Spatial values are conventions;
/// only their signs and orderings carry meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PresetParams {
    pub duration_ms: f64,
    pub sample_rate_hz: f64,
    pub labial_onset_ms: f64,
    pub la_rest_mm: f64,
    pub la_closure_mm: f64,
    pub tb_neutral_mm: f64,
    pub tb_cd_neutral_mm: f64,
    pub palatal_target_mm: f64,
    pub velar_target_mm: f64,
    pub labial_stiffness_s2: f64,
    /// Palatal (and vowel) stiffness.
    pub tb_stiffness_s2: f64,
    pub velar_stiffness_s2: f64,
    /// Activation continues this long after the movement would reach its target.
    pub hold_ms: f64,
    pub eccentric_delay_ms: f64,
    /// Constant `c` in palatal onset = labial offset + c for anti-phase timing.
    pub sequence_gap_ms: f64,
    pub labial_blending: f64,
    pub palatal_blending: f64,
    pub velar_blending: f64,
    /// Used by ASSIMILATORY; SEQUENCE is always anti-phase.
    pub assimilatory_anchor: PalatalAnchor,
    pub back_vowel: bool,
    pub vowel_target_mm: f64,
    pub vowel_blending: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            duration_ms: 1200.0,
            sample_rate_hz: 200.0,
            labial_onset_ms: 200.0,
            la_rest_mm: 15.0,
            la_closure_mm: 0.0,
            tb_neutral_mm: 0.0,
            tb_cd_neutral_mm: 10.0,
            palatal_target_mm: 12.0,
            velar_target_mm: -8.0,
            labial_stiffness_s2: 400.0,
            tb_stiffness_s2: 400.0,
            velar_stiffness_s2: 400.0,
            hold_ms: 80.0,
            eccentric_delay_ms: 25.0,
            sequence_gap_ms: 0.0,
            labial_blending: 1.0,
            palatal_blending: 4.0,
            velar_blending: 1.0,
            assimilatory_anchor: PalatalAnchor::InPhase,
            back_vowel: false,
            vowel_target_mm: -6.0,
            vowel_blending: 0.5,
        }
    }
}

/// Root of u·e^(−u) = 0.2·e⁻¹ above 1: the 20%-of-peak-velocity point after
/// the peak of a critically damped step response, in units of 1/ωₙ.
const TARGET_LANDMARK_U: f64 = 3.994_308_347;

/// Time for a critically damped movement with stiffness `k` to reach its
/// 20%-velocity Target landmark, in ms.
pub fn movement_time_ms(stiffness_s2: f64) -> f64 {
    1000.0 * TARGET_LANDMARK_U / stiffness_s2.sqrt()
}

/// Per-token deviations from the nominal preset timing and targets.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Perturbation {
    pub labial_onset_ms: f64,
    pub palatal_onset_ms: f64,
    /// Multiplicative factors on activation durations (1 = nominal).
    pub labial_duration_factor: f64,
    pub palatal_duration_factor: f64,
    pub labial_target_mm: f64,
    pub palatal_target_mm: f64,
    pub velar_target_mm: f64,
}

impl Perturbation {
    pub fn none() -> Self {
        Self {
            labial_duration_factor: 1.0,
            palatal_duration_factor: 1.0,
            ..Default::default()
        }
    }
}

/// Nominal score for a preset.
pub fn preset_scenario(preset: Preset, params: &PresetParams) -> Result<GesturalScore> {
    build_score(preset, params, &Perturbation::none())
}

/// Builds a preset score with per-token perturbations applied.
///
/// Activations that would run past the end of the score are clipped to it.
pub fn build_score(preset: Preset, p: &PresetParams, jit: &Perturbation) -> Result<GesturalScore> {
    let lab_dur = (movement_time_ms(p.labial_stiffness_s2) + p.hold_ms) * jit.labial_duration_factor;
    let pal_dur = (movement_time_ms(p.tb_stiffness_s2) + p.hold_ms) * jit.palatal_duration_factor;

    let lab_on = p.labial_onset_ms + jit.labial_onset_ms;
    let lab_off = lab_on + lab_dur;

    let anchor = match preset {
        Preset::Underlying => PalatalAnchor::InPhase,
        Preset::Assimilatory => p.assimilatory_anchor,
        Preset::Sequence => PalatalAnchor::AntiPhase,
    };
    let delay = if preset == Preset::Assimilatory { p.eccentric_delay_ms } else { 0.0 };
    let pal_on = match anchor {
        PalatalAnchor::InPhase => lab_on + delay + jit.palatal_onset_ms,
        PalatalAnchor::AntiPhase => lab_off + p.sequence_gap_ms + jit.palatal_onset_ms,
    };
    let pal_off = pal_on + pal_dur;

    let clip = |t: f64| t.clamp(0.0, p.duration_ms);
    let gesture = |id: &str, tv, target, k, w, on: f64, off: f64, descriptor: &str| Gesture {
        id: id.to_string(),
        tract_variable: tv,
        target_mm: target,
        stiffness_s2: k,
        damping_ratio: 1.0,
        blending_strength: w,
        t_on_ms: clip(on),
        t_off_ms: clip(off),
        descriptor: descriptor.to_string(),
    };

    let mut gestures = vec![
        gesture(
            ids::LABIAL,
            Channel::La,
            p.la_closure_mm + jit.labial_target_mm,
            p.labial_stiffness_s2,
            p.labial_blending,
            lab_on,
            lab_off,
            "clo labial",
        ),
        gesture(
            ids::PALATAL,
            Channel::TbCl,
            p.palatal_target_mm + jit.palatal_target_mm,
            p.tb_stiffness_s2,
            p.palatal_blending,
            pal_on,
            pal_off,
            "narrow palatal",
        ),
    ];

    if preset == Preset::Assimilatory {
        // Velar is eccentrically timed to the palatal gesture; under the
        // anti-phase alternative it stays in phase with the labial.
        let vel_on = match anchor {
            PalatalAnchor::InPhase => pal_on - p.eccentric_delay_ms,
            PalatalAnchor::AntiPhase => lab_on,
        };
        gestures.push(gesture(
            ids::VELAR,
            Channel::TbCl,
            p.velar_target_mm + jit.velar_target_mm,
            p.velar_stiffness_s2,
            p.velar_blending,
            vel_on,
            pal_off,
            "crit velar",
        ));
    }

    if p.back_vowel {
        gestures.push(gesture(
            ids::VOWEL,
            Channel::TbCl,
            p.vowel_target_mm,
            p.tb_stiffness_s2,
            p.vowel_blending,
            pal_on,
            pal_off + p.hold_ms,
            "narrow uvular",
        ));
    }

    let score = GesturalScore {
        duration_ms: p.duration_ms,
        sample_rate_hz: p.sample_rate_hz,
        tract_variables: vec![
            TractVariable {
                name: Channel::La,
                neutral_mm: p.la_rest_mm,
            },
            TractVariable {
                name: Channel::TbCl,
                neutral_mm: p.tb_neutral_mm,
            },
            TractVariable {
                name: Channel::TbCd,
                neutral_mm: p.tb_cd_neutral_mm,
            },
        ],
        gestures,
    };

    let violations = validate_score(&score);
    if let Some(v) = violations.first() {
        return Err(Error::InvalidScore(v.to_string()));
    }
    Ok(score)
}
