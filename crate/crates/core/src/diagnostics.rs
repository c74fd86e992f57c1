//! Measurement intervals and the statistics built on them.
//!
//! Mixed-effects model comparison is replaced throughout by per-speaker
//! ordinary least squares and permutation tests stratified by speaker.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::landmarks::GestureLandmarks;
use crate::score::Preset;
use crate::smoothing::keyed_rng;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;
pub const DEFAULT_OUTLIER_SD: f64 = 3.0;
pub const PARSE_FAILURE: &str = "parse_failure";

/// Removal rates reported for the recorded data set, for comparison only.
pub const REFERENCE_DURATION_REMOVAL: f64 = 0.006;
pub const REFERENCE_LAG_REMOVAL: f64 = 0.016;

pub type Condition = Preset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub speaker: String,
    pub condition: Condition,
    pub item: String,
    pub rep: usize,
    pub g1_onset_ms: Option<f64>,
    pub g1_offset_ms: Option<f64>,
    pub g2_onset_ms: Option<f64>,
    pub g1_duration_ms: Option<f64>,
    pub lag_ms: Option<f64>,
    pub tb_pos_mm: Option<f64>,
    pub tb_pos_z: Option<f64>,
    pub excluded: bool,
    pub exclusion_reason: Option<String>,
}

impl TokenRecord {
    /// Duration and lag of a token that is still in the analysis.
    fn measures(&self) -> Option<(f64, f64)> {
        if self.excluded {
            return None;
        }
        Some((self.g1_duration_ms?, self.lag_ms?))
    }

    pub fn is_parse_failure(&self) -> bool {
        self.exclusion_reason.as_deref() == Some(PARSE_FAILURE)
    }
}

/// `(G1 duration, onset-to-onset lag)`; the lag may be negative.
pub fn intervals(g1: &GestureLandmarks, g2: &GestureLandmarks) -> (f64, f64) {
    (g1.offset_ms - g1.onset_ms, g2.onset_ms - g1.onset_ms)
}

/// Position at `t_ms`, linearly interpolated between samples.
pub fn tb_at(traj: &Trajectory, t_ms: f64) -> Result<f64> {
    let (lo, hi) = (traj.t0_ms, traj.end_ms());
    if traj.is_empty() || !(t_ms >= lo && t_ms <= hi) {
        return Err(Error::OutOfRange {
            t_ms,
            lo_ms: lo,
            hi_ms: hi,
        });
    }
    let u = (t_ms - lo) / traj.period_ms();
    let i = (u.floor() as usize).min(traj.len() - 1);
    if i + 1 >= traj.len() {
        return Ok(traj.samples[i]);
    }
    let frac = u - i as f64;
    Ok(traj.samples[i] + frac * (traj.samples[i + 1] - traj.samples[i]))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the n − 1 denominator.
pub fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Z-scores within each group, using the group's sample SD.
pub fn zscore_by_group<G: Ord + Clone + fmt::Display>(values: &[f64], groups: &[G]) -> Result<Vec<f64>> {
    if values.len() != groups.len() {
        return Err(Error::InvalidArgument("values and groups differ in length".into()));
    }
    let mut members: BTreeMap<&G, Vec<f64>> = BTreeMap::new();
    for (v, g) in values.iter().zip(groups) {
        members.entry(g).or_default().push(*v);
    }
    let mut stats = BTreeMap::new();
    for (g, vals) in &members {
        let sd = if vals.len() >= 2 { sample_sd(vals) } else { 0.0 };
        if !(sd > 0.0) {
            return Err(Error::ZeroSpread(g.to_string()));
        }
        stats.insert(*g, (mean(vals), sd));
    }
    Ok(values
        .iter()
        .zip(groups)
        .map(|(v, g)| {
            let (m, sd) = stats[g];
            (v - m) / sd
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Outliers

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub duration: (f64, f64),
    pub lag: (f64, f64),
}

pub type OutlierStats = BTreeMap<(String, Condition), GroupStats>;

/// Per speaker × condition means and SDs of duration and lag.
pub fn outlier_stats(tokens: &[TokenRecord]) -> OutlierStats {
    let mut groups: BTreeMap<(String, Condition), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for t in tokens {
        if let Some((d, l)) = t.measures() {
            let e = groups.entry((t.speaker.clone(), t.condition)).or_default();
            e.0.push(d);
            e.1.push(l);
        }
    }
    groups
        .into_iter()
        .filter(|(_, (d, _))| d.len() >= 3)
        .map(|(k, (d, l))| {
            (
                k,
                GroupStats {
                    duration: (mean(&d), sample_sd(&d)),
                    lag: (mean(&l), sample_sd(&l)),
                },
            )
        })
        .collect()
}

/// Excludes tokens further than `k` SDs from their group mean in duration
/// or lag, with statistics frozen in `stats`.
pub fn remove_outliers_with(
    tokens: &[TokenRecord],
    stats: &OutlierStats,
    k: f64,
) -> (Vec<TokenRecord>, Vec<TokenRecord>) {
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for t in tokens {
        let Some((d, l)) = t.measures() else {
            removed.push(t.clone());
            continue;
        };
        let mut reasons = Vec::new();
        if let Some(s) = stats.get(&(t.speaker.clone(), t.condition)) {
            let far = |x: f64, (m, sd): (f64, f64)| sd > 0.0 && (x - m).abs() > k * sd;
            if far(d, s.duration) {
                reasons.push("g1_duration");
            }
            if far(l, s.lag) {
                reasons.push("lag");
            }
        }
        if reasons.is_empty() {
            kept.push(t.clone());
        } else {
            let mut t = t.clone();
            t.excluded = true;
            t.exclusion_reason = Some(reasons.join(";"));
            t.tb_pos_z = None;
            removed.push(t);
        }
    }
    (kept, removed)
}

/// One-pass removal using means/SDs of the unfiltered data.
pub fn remove_outliers(tokens: &[TokenRecord], k: f64) -> (Vec<TokenRecord>, Vec<TokenRecord>) {
    remove_outliers_with(tokens, &outlier_stats(tokens), k)
}

// ---------------------------------------------------------------------------
// Regression and permutation tests

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
    pub p_perm: Option<f64>,
}

/// Ordinary least squares of `y` on `x`; `r2` is the squared Pearson correlation.
pub fn ols(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("x and y differ in length".into()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("regression needs n >= 3, got {n}")));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("var(x) = 0".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 0.0 };
    Ok(RegressionResult {
        slope,
        intercept: my - slope * mx,
        r2,
        n,
        p_perm: None,
    })
}

fn strata_indices<S: Ord>(strata: &[S]) -> Vec<Vec<usize>> {
    let mut map: BTreeMap<&S, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        map.entry(s).or_default().push(i);
    }
    map.into_values().collect()
}

/// Counts permutations whose statistic is at least as extreme as the observed
/// one and applies the `(count + 1)/(n_perm + 1)` correction. Each
/// permutation draws from its own keyed stream.
fn permutation_p<F>(groups: &[Vec<usize>], n: usize, n_perm: usize, seed: u64, observed: f64, stat: F) -> f64
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let tol = 1e-12 * observed.abs().max(1e-300);
    let hits: usize = (0..n_perm)
        .into_par_iter()
        .map(|k| {
            let mut rng = keyed_rng(seed, k as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            for g in groups {
                let mut shuffled = g.clone();
                shuffled.shuffle(&mut rng);
                for (&dst, &src) in g.iter().zip(&shuffled) {
                    perm[dst] = src;
                }
            }
            usize::from(stat(&perm).abs() >= observed.abs() - tol)
        })
        .sum();
    (hits as f64 + 1.0) / (n_perm as f64 + 1.0)
}

/// Two-sided permutation p-value for the OLS slope, shuffling `y`.
pub fn perm_test_slope(x: &[f64], y: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    let strata = vec![0u8; x.len()];
    perm_test_slope_stratified(x, y, &strata, n_perm, seed)
}

/// As [`perm_test_slope`], shuffling `y` only within strata.
pub fn perm_test_slope_stratified<S: Ord>(
    x: &[f64],
    y: &[f64],
    strata: &[S],
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    if n_perm == 0 {
        return Err(Error::InvalidArgument("n_perm must be >= 1".into()));
    }
    if x.len() < 5 {
        return Err(Error::Degenerate(format!("permutation test needs n >= 5, got {}", x.len())));
    }
    if strata.len() != x.len() {
        return Err(Error::InvalidArgument("strata and data differ in length".into()));
    }
    ols(x, y)?;
    let mx = mean(x);
    let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
    // slope ∝ Σ xc·y; the common Sxx factor cancels
    let observed: f64 = xc.iter().zip(y).map(|(a, b)| a * b).sum();
    let groups = strata_indices(strata);
    Ok(permutation_p(&groups, x.len(), n_perm, seed, observed, |perm| {
        xc.iter().zip(perm).map(|(a, &j)| a * y[j]).sum()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Lag,
    TbPosMm,
    TbPosZ,
}

impl Measure {
    fn value(self, t: &TokenRecord) -> Option<f64> {
        match self {
            Measure::Lag => t.lag_ms,
            Measure::TbPosMm => t.tb_pos_mm,
            Measure::TbPosZ => t.tb_pos_z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contrast {
    /// mean(ASSIMILATORY) − mean(UNDERLYING)
    pub difference: f64,
    pub p_perm: f64,
}

fn contrast_rows(tokens: &[TokenRecord], measure: Measure) -> Vec<(&str, bool, f64)> {
    tokens
        .iter()
        .filter(|t| !t.excluded)
        .filter(|t| matches!(t.condition, Preset::Assimilatory | Preset::Underlying))
        .filter_map(|t| Some((t.speaker.as_str(), t.condition == Preset::Assimilatory, measure.value(t)?)))
        .collect()
}

fn mean_difference(rows: &[(&str, bool, f64)], label: impl Fn(usize) -> bool) -> f64 {
    let (mut sa, mut na, mut su, mut nu) = (0.0, 0usize, 0.0, 0usize);
    for (i, r) in rows.iter().enumerate() {
        if label(i) {
            sa += r.2;
            na += 1;
        } else {
            su += r.2;
            nu += 1;
        }
    }
    sa / na as f64 - su / nu as f64
}

/// ASSIMILATORY − UNDERLYING mean difference with a condition-label
/// permutation test stratified by speaker.
pub fn condition_contrast(tokens: &[TokenRecord], measure: Measure, n_perm: usize, seed: u64) -> Result<Contrast> {
    if n_perm == 0 {
        return Err(Error::InvalidArgument("n_perm must be >= 1".into()));
    }
    let rows = contrast_rows(tokens, measure);
    let has = |a: bool| rows.iter().any(|r| r.1 == a);
    if !has(true) || !has(false) {
        return Err(Error::Data("contrast needs both ASSIMILATORY and UNDERLYING tokens".into()));
    }
    let observed = mean_difference(&rows, |i| rows[i].1);
    let strata: Vec<&str> = rows.iter().map(|r| r.0).collect();
    let groups = strata_indices(&strata);
    let p = permutation_p(&groups, rows.len(), n_perm, seed, observed, |perm| {
        mean_difference(&rows, |i| rows[perm[i]].1)
    });
    Ok(Contrast {
        difference: observed,
        p_perm: p,
    })
}

/// Per-speaker ASSIMILATORY − UNDERLYING mean differences.
pub fn contrast_by_speaker(tokens: &[TokenRecord], measure: Measure) -> BTreeMap<String, f64> {
    let rows = contrast_rows(tokens, measure);
    let speakers: BTreeSet<&str> = rows.iter().map(|r| r.0).collect();
    speakers
        .into_iter()
        .filter_map(|s| {
            let sub: Vec<_> = rows.iter().filter(|r| r.0 == s).copied().collect();
            let both = sub.iter().any(|r| r.1) && sub.iter().any(|r| !r.1);
            both.then(|| (s.to_string(), mean_difference(&sub, |i| sub[i].1)))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Coordination classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Coordination {
    Complex,
    Sequence,
    Indeterminate,
}

impl fmt::Display for Coordination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coordination::Complex => "COMPLEX",
            Coordination::Sequence => "SEQUENCE",
            Coordination::Indeterminate => "INDETERMINATE",
        })
    }
}

pub const MIN_CLASSIFY_TOKENS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub coordination: Coordination,
    /// Regression of within-speaker z-scored lag on z-scored G1 duration.
    pub pooled: RegressionResult,
}

/// Complex segment vs segment sequence from the lag ~ duration relation,
/// pooled over speakers after within-speaker z-scoring.
pub fn classify_coordination(tokens: &[TokenRecord], n_perm: usize, seed: u64) -> Result<Classification> {
    let rows: Vec<(&str, f64, f64)> = tokens
        .iter()
        .filter_map(|t| t.measures().map(|(d, l)| (t.speaker.as_str(), d, l)))
        .collect();
    if rows.len() < MIN_CLASSIFY_TOKENS {
        return Err(Error::Degenerate(format!(
            "classification needs at least {MIN_CLASSIFY_TOKENS} tokens, got {}",
            rows.len()
        )));
    }
    let speakers: Vec<&str> = rows.iter().map(|r| r.0).collect();
    let dur: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let lag: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let zd = zscore_by_group(&dur, &speakers)?;
    let zl = zscore_by_group(&lag, &speakers)?;
    let mut pooled = ols(&zd, &zl)?;
    let p = perm_test_slope_stratified(&zd, &zl, &speakers, n_perm, seed)?;
    pooled.p_perm = Some(p);
    let coordination = if pooled.slope > 0.0 && p < 0.01 && pooled.r2 > 0.25 {
        Coordination::Sequence
    } else if p >= 0.05 && pooled.r2 < 0.1 {
        Coordination::Complex
    } else {
        Coordination::Indeterminate
    };
    Ok(Classification { coordination, pooled })
}

// ---------------------------------------------------------------------------
// Whole-table analysis

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSettings {
    pub n_perm: usize,
    pub seed: u64,
    pub outlier_sd: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            n_perm: DEFAULT_PERMUTATIONS,
            seed: 0,
            outlier_sd: DEFAULT_OUTLIER_SD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    /// Speaker id, or `ALL` for the pooled z-scored regression.
    pub speaker: String,
    pub condition: Condition,
    pub n: usize,
    /// `None` when the regression is degenerate (e.g. constant duration).
    pub regression: Option<RegressionResult>,
    pub mean_lag_ms: f64,
    pub mean_tb_z: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ExclusionCounts {
    pub total: usize,
    pub parse_failures: usize,
    pub duration_outliers: usize,
    pub lag_outliers: usize,
}

impl ExclusionCounts {
    pub fn duration_fraction(&self) -> f64 {
        self.duration_outliers as f64 / self.total.max(1) as f64
    }

    pub fn lag_fraction(&self) -> f64 {
        self.lag_outliers as f64 / self.total.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationOutcome {
    pub condition: Condition,
    pub result: Option<Classification>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    #[serde(skip)]
    pub tokens: Vec<TokenRecord>,
    pub summary: Vec<SummaryRow>,
    pub lag_contrast: Option<Contrast>,
    pub tb_contrast_mm: Option<Contrast>,
    pub tb_contrast_z: Option<Contrast>,
    pub tb_contrast_mm_by_speaker: BTreeMap<String, f64>,
    pub tb_contrast_z_by_speaker: BTreeMap<String, f64>,
    pub classifications: Vec<ClassificationOutcome>,
    pub exclusions: ExclusionCounts,
}

impl Analysis {
    pub fn classification(&self, c: Condition) -> Option<Coordination> {
        self.classifications
            .iter()
            .find(|o| o.condition == c)
            .and_then(|o| o.result.map(|r| r.coordination))
    }

    pub fn pooled(&self, c: Condition) -> Option<RegressionResult> {
        self.classifications
            .iter()
            .find(|o| o.condition == c)
            .and_then(|o| o.result.map(|r| r.pooled))
    }

    pub fn speaker_rows(&self, c: Condition) -> impl Iterator<Item = &SummaryRow> {
        self.summary
            .iter()
            .filter(move |r| r.condition == c && r.speaker != POOLED)
    }
}

pub const POOLED: &str = "ALL";

fn sub_seed(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, folded into the base seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed ^ h
}

/// Outlier removal, per-speaker TB z-scores, regressions, contrasts and
/// classifications for a token table. Exclusions other than parse failures
/// are recomputed from scratch.
pub fn analyze_tokens(tokens: &[TokenRecord], settings: &AnalysisSettings) -> Result<Analysis> {
    if tokens.is_empty() {
        return Err(Error::Data("token table is empty".into()));
    }
    let fresh: Vec<TokenRecord> = tokens
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.tb_pos_z = None;
            if !t.is_parse_failure() {
                t.excluded = false;
                t.exclusion_reason = None;
            }
            t
        })
        .collect();

    let mut counts = ExclusionCounts {
        total: fresh.len(),
        parse_failures: fresh.iter().filter(|t| t.is_parse_failure()).count(),
        ..Default::default()
    };
    let stats = outlier_stats(&fresh);
    let (_, removed) = remove_outliers_with(&fresh, &stats, settings.outlier_sd);
    let reasons: BTreeMap<(String, Condition, String, usize), Option<String>> = removed
        .iter()
        .map(|t| ((t.speaker.clone(), t.condition, t.item.clone(), t.rep), t.exclusion_reason.clone()))
        .collect();
    let mut out: Vec<TokenRecord> = fresh
        .into_iter()
        .map(|mut t| {
            if let Some(reason) = reasons.get(&(t.speaker.clone(), t.condition, t.item.clone(), t.rep)) {
                t.excluded = true;
                t.exclusion_reason = reason.clone();
            }
            t
        })
        .collect();
    for t in &out {
        if let Some(r) = &t.exclusion_reason {
            if r != PARSE_FAILURE {
                counts.duration_outliers += usize::from(r.contains("g1_duration"));
                counts.lag_outliers += usize::from(r.contains("lag"));
            }
        }
    }

    // TB z-scores per speaker over the kept tokens.
    let idx: Vec<usize> = (0..out.len())
        .filter(|&i| !out[i].excluded && out[i].tb_pos_mm.is_some())
        .collect();
    let tb: Vec<f64> = idx.iter().map(|&i| out[i].tb_pos_mm.unwrap()).collect();
    let spk: Vec<String> = idx.iter().map(|&i| out[i].speaker.clone()).collect();
    if let Ok(z) = zscore_by_group(&tb, &spk) {
        for (&i, z) in idx.iter().zip(z) {
            out[i].tb_pos_z = Some(quantize(z));
        }
    }

    let conditions: BTreeSet<Condition> = out.iter().map(|t| t.condition).collect();
    let speakers: BTreeSet<String> = out.iter().map(|t| t.speaker.clone()).collect();
    let mut summary = Vec::new();
    let mut classifications = Vec::new();
    for &c in &conditions {
        for s in &speakers {
            let rows: Vec<&TokenRecord> = out
                .iter()
                .filter(|t| t.condition == c && &t.speaker == s && t.measures().is_some())
                .collect();
            if rows.is_empty() {
                continue;
            }
            let x: Vec<f64> = rows.iter().map(|t| t.g1_duration_ms.unwrap()).collect();
            let y: Vec<f64> = rows.iter().map(|t| t.lag_ms.unwrap()).collect();
            let regression = ols(&x, &y).ok().map(|mut r| {
                let seed = sub_seed(settings.seed, &format!("slope/{s}/{c}"));
                r.p_perm = perm_test_slope(&x, &y, settings.n_perm, seed).ok();
                r
            });
            summary.push(SummaryRow {
                speaker: s.clone(),
                condition: c,
                n: rows.len(),
                regression,
                mean_lag_ms: mean(&y),
                mean_tb_z: mean_opt(rows.iter().map(|t| t.tb_pos_z)),
            });
        }

        let in_condition: Vec<TokenRecord> = out.iter().filter(|t| t.condition == c).cloned().collect();
        let seed = sub_seed(settings.seed, &format!("classify/{c}"));
        let outcome = classify_coordination(&in_condition, settings.n_perm, seed);
        let kept: Vec<&TokenRecord> = in_condition.iter().filter(|t| t.measures().is_some()).collect();
        if !kept.is_empty() {
            summary.push(SummaryRow {
                speaker: POOLED.to_string(),
                condition: c,
                n: kept.len(),
                regression: outcome.as_ref().ok().map(|r| r.pooled),
                mean_lag_ms: mean(&kept.iter().map(|t| t.lag_ms.unwrap()).collect::<Vec<_>>()),
                mean_tb_z: mean_opt(kept.iter().map(|t| t.tb_pos_z)),
            });
        }
        classifications.push(match outcome {
            Ok(r) => ClassificationOutcome {
                condition: c,
                result: Some(r),
                error: None,
            },
            Err(e) => ClassificationOutcome {
                condition: c,
                result: None,
                error: Some(e.to_string()),
            },
        });
    }

    let contrast = |m: Measure, tag: &str| condition_contrast(&out, m, settings.n_perm, sub_seed(settings.seed, tag)).ok();
    Ok(Analysis {
        lag_contrast: contrast(Measure::Lag, "contrast/lag"),
        tb_contrast_mm: contrast(Measure::TbPosMm, "contrast/tb_mm"),
        tb_contrast_z: contrast(Measure::TbPosZ, "contrast/tb_z"),
        tb_contrast_mm_by_speaker: contrast_by_speaker(&out, Measure::TbPosMm),
        tb_contrast_z_by_speaker: contrast_by_speaker(&out, Measure::TbPosZ),
        summary,
        classifications,
        exclusions: counts,
        tokens: out,
    })
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

// ---------------------------------------------------------------------------
// CSV formats

pub const TOKEN_HEADER: [&str; 13] = [
    "speaker",
    "condition",
    "item",
    "rep",
    "g1_onset_ms",
    "g1_offset_ms",
    "g2_onset_ms",
    "g1_duration_ms",
    "lag_ms",
    "tb_pos_mm",
    "tb_pos_z",
    "excluded",
    "exclusion_reason",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "speaker",
    "condition",
    "n",
    "slope",
    "intercept",
    "r2",
    "p_perm",
    "mean_lag_ms",
    "mean_tb_z",
];

/// Six-decimal fixed point, the precision of every CSV number.
pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

/// Rounds to the value that survives a CSV write/read cycle.
pub fn quantize(x: f64) -> f64 {
    fmt6(x).parse().expect("formatted float parses")
}

fn opt6(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

pub fn write_tokens_csv<W: Write>(tokens: &[TokenRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TOKEN_HEADER)?;
    for t in tokens {
        wtr.write_record([
            t.speaker.clone(),
            t.condition.to_string(),
            t.item.clone(),
            t.rep.to_string(),
            opt6(t.g1_onset_ms),
            opt6(t.g1_offset_ms),
            opt6(t.g2_onset_ms),
            opt6(t.g1_duration_ms),
            opt6(t.lag_ms),
            opt6(t.tb_pos_mm),
            opt6(t.tb_pos_z),
            t.excluded.to_string(),
            t.exclusion_reason.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_tokens_csv<R: Read>(r: R) -> Result<Vec<TokenRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("token CSV lacks column `{name}`")))
    };
    let cols: Vec<usize> = TOKEN_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(cols[k]).unwrap_or("").trim();
        let num = |k: usize| -> Result<Option<f64>> {
            let s = field(k);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| Error::Data(format!("row {}: bad number `{s}` in {}", line + 2, TOKEN_HEADER[k])))
        };
        let reason = field(12);
        out.push(TokenRecord {
            speaker: field(0).to_string(),
            condition: field(1)
                .parse()
                .map_err(|_| Error::Data(format!("row {}: unknown condition `{}`", line + 2, field(1))))?,
            item: field(2).to_string(),
            rep: field(3)
                .parse()
                .map_err(|_| Error::Data(format!("row {}: bad rep `{}`", line + 2, field(3))))?,
            g1_onset_ms: num(4)?,
            g1_offset_ms: num(5)?,
            g2_onset_ms: num(6)?,
            g1_duration_ms: num(7)?,
            lag_ms: num(8)?,
            tb_pos_mm: num(9)?,
            tb_pos_z: num(10)?,
            excluded: match field(11) {
                "true" | "1" | "TRUE" => true,
                "false" | "0" | "FALSE" | "" => false,
                other => return Err(Error::Data(format!("row {}: bad excluded flag `{other}`", line + 2))),
            },
            exclusion_reason: (!reason.is_empty()).then(|| reason.to_string()),
        });
    }
    Ok(out)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let na = || "NA".to_string();
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let reg = r.regression;
        wtr.write_record([
            r.speaker.clone(),
            r.condition.to_string(),
            r.n.to_string(),
            reg.map(|g| fmt6(g.slope)).unwrap_or_else(na),
            reg.map(|g| fmt6(g.intercept)).unwrap_or_else(na),
            reg.map(|g| fmt6(g.r2)).unwrap_or_else(na),
            reg.and_then(|g| g.p_perm).map(fmt6).unwrap_or_else(na),
            fmt6(r.mean_lag_ms),
            r.mean_tb_z.map(fmt6).unwrap_or_else(na),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
