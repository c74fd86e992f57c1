//! Critically damped tract-variable dynamics driven by a gestural score.
//!
//! Every tract variable is an independent unit-mass point system
//! `ẍ = k*·(x₀* − x) − 2ζ√k*·ẋ`. When several gestures are active on the same
//! variable their targets and stiffnesses are blended by weighted average;
//! with nothing active the variable relaxes toward its neutral value.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::score::{validate_score, Channel, GesturalScore, Gesture};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlendedParams {
    pub target_mm: f64,
    pub stiffness_s2: f64,
    pub damping_ratio: f64,
}

/// Weighted-mean blend of co-active gestures on a single tract variable.
///
/// Damping takes the maximum ratio so the blend is never underdamped.
pub fn blend_parameters(active: &[&Gesture]) -> Result<BlendedParams> {
    let first = active.first().ok_or(Error::EmptyBlend)?;
    if let Some(g) = active.iter().find(|g| g.tract_variable != first.tract_variable) {
        return Err(Error::MixedTractVariables(
            first.tract_variable.to_string(),
            g.tract_variable.to_string(),
        ));
    }
    let total: f64 = active.iter().map(|g| g.blending_strength).sum();
    let target = active.iter().map(|g| g.blending_strength * g.target_mm).sum::<f64>() / total;
    let stiffness = active.iter().map(|g| g.blending_strength * g.stiffness_s2).sum::<f64>() / total;
    let damping = active.iter().map(|g| g.damping_ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(BlendedParams {
        target_mm: target,
        stiffness_s2: stiffness,
        damping_ratio: damping,
    })
}

/// Uniformly sampled position trace of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub channel: Channel,
    pub sample_rate_hz: f64,
    pub t0_ms: f64,
    pub samples: Vec<f64>,
}

impl Trajectory {
    pub fn new(channel: Channel, sample_rate_hz: f64, t0_ms: f64, samples: Vec<f64>) -> Self {
        Self {
            channel,
            sample_rate_hz,
            t0_ms,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn period_ms(&self) -> f64 {
        1000.0 / self.sample_rate_hz
    }

    pub fn time_ms(&self, i: usize) -> f64 {
        self.t0_ms + i as f64 * self.period_ms()
    }

    pub fn end_ms(&self) -> f64 {
        self.time_ms(self.samples.len().saturating_sub(1))
    }

    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    /// Largest RK4 step, ms.
    pub dt_ms: f64,
    /// Stiffness pulling an inactive channel back to neutral, s⁻².
    pub relaxation_stiffness_s2: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            dt_ms: 0.5,
            relaxation_stiffness_s2: 100.0,
        }
    }
}

/// Integrates every declared tract variable with the default relaxation
/// stiffness and step `dt_ms`.
pub fn integrate(score: &GesturalScore, dt_ms: f64) -> Result<BTreeMap<Channel, Trajectory>> {
    integrate_with(
        score,
        &IntegratorSettings {
            dt_ms,
            ..Default::default()
        },
    )
}

pub fn integrate_with(score: &GesturalScore, settings: &IntegratorSettings) -> Result<BTreeMap<Channel, Trajectory>> {
    if let Some(v) = validate_score(score).first() {
        return Err(Error::InvalidScore(v.to_string()));
    }
    let period = 1000.0 / score.sample_rate_hz;
    if !(settings.dt_ms > 0.0 && settings.dt_ms <= 1.0 && settings.dt_ms <= period) {
        return Err(Error::InvalidArgument(format!(
            "dt {} ms must be positive and at most min(1 ms, {period} ms)",
            settings.dt_ms
        )));
    }
    if !(settings.relaxation_stiffness_s2 > 0.0) {
        return Err(Error::InvalidArgument("relaxation stiffness must be > 0".into()));
    }

    let n_samples = (score.duration_ms * score.sample_rate_hz / 1000.0).round() as usize + 1;
    let mut out = BTreeMap::new();
    for tv in &score.tract_variables {
        let gestures: Vec<&Gesture> = score
            .gestures
            .iter()
            .filter(|g| g.tract_variable == tv.name)
            .collect();
        let samples = integrate_channel(tv.name, tv.neutral_mm, &gestures, n_samples, period, settings)?;
        out.insert(tv.name, Trajectory::new(tv.name, score.sample_rate_hz, 0.0, samples));
    }
    Ok(out)
}

fn integrate_channel(
    channel: Channel,
    neutral: f64,
    gestures: &[&Gesture],
    n_samples: usize,
    period_ms: f64,
    settings: &IntegratorSettings,
) -> Result<Vec<f64>> {
    let relax = BlendedParams {
        target_mm: neutral,
        stiffness_s2: settings.relaxation_stiffness_s2,
        damping_ratio: 1.0,
    };
    let params_at = |t_ms: f64| -> Result<BlendedParams> {
        let active: Vec<&Gesture> = gestures.iter().copied().filter(|g| g.is_active(t_ms)).collect();
        if active.is_empty() {
            Ok(relax)
        } else {
            blend_parameters(&active)
        }
    };

    // Parameters only change at activation boundaries; step exactly onto
    // those and onto every output sample time.
    let mut breaks: Vec<f64> = gestures
        .iter()
        .flat_map(|g| [g.t_on_ms, g.t_off_ms])
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut samples = Vec::with_capacity(n_samples);
    let (mut x, mut v) = (neutral, 0.0);
    let mut t = 0.0;
    let mut next_break = 0;
    samples.push(x);
    for i in 1..n_samples {
        let t_sample = i as f64 * period_ms;
        while t < t_sample {
            while next_break < breaks.len() && breaks[next_break] <= t {
                next_break += 1;
            }
            let seg_end = match breaks.get(next_break) {
                Some(&b) if b < t_sample => b,
                _ => t_sample,
            };
            let p = params_at(0.5 * (t + seg_end))?;
            let span = seg_end - t;
            let steps = (span / settings.dt_ms).ceil().max(1.0) as usize;
            let h = span / steps as f64 / 1000.0;
            for _ in 0..steps {
                (x, v) = rk4_step(x, v, h, &p);
            }
            t = seg_end;
            if !(x.is_finite() && v.is_finite()) {
                return Err(Error::Diverged {
                    channel: channel.to_string(),
                    t_ms: t,
                });
            }
        }
        samples.push(x);
    }
    Ok(samples)
}

fn rk4_step(x: f64, v: f64, h: f64, p: &BlendedParams) -> (f64, f64) {
    let k = p.stiffness_s2;
    let b = 2.0 * p.damping_ratio * k.sqrt();
    let acc = |x: f64, v: f64| k * (p.target_mm - x) - b * v;

    let (k1x, k1v) = (v, acc(x, v));
    let (k2x, k2v) = (v + 0.5 * h * k1v, acc(x + 0.5 * h * k1x, v + 0.5 * h * k1v));
    let (k3x, k3v) = (v + 0.5 * h * k2v, acc(x + 0.5 * h * k2x, v + 0.5 * h * k2v));
    let (k4x, k4v) = (v + h * k3v, acc(x + h * k3x, v + h * k3v));
    (
        x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Closed-form critically damped step response from rest: displacement
/// `Δ(1 − (1+ωₙt)e^(−ωₙt))` in mm and velocity `Δωₙ²t·e^(−ωₙt)` in mm/s.
pub fn analytic_step_response(delta_mm: f64, omega_n: f64, t_ms: f64) -> Result<(f64, f64)> {
    if !(t_ms >= 0.0) {
        return Err(Error::InvalidArgument(format!("t {t_ms} ms must be >= 0")));
    }
    let t = t_ms / 1000.0;
    let e = (-omega_n * t).exp();
    Ok((delta_mm * (1.0 - (1.0 + omega_n * t) * e), delta_mm * omega_n * omega_n * t * e))
}

// ---------------------------------------------------------------------------
// Trajectory CSV: `t_ms,LA,TB_CL,TB_CD`, six decimals.

pub fn write_trajectories_csv<W: Write>(trajs: &BTreeMap<Channel, Trajectory>, w: W) -> Result<()> {
    let first = trajs
        .values()
        .next()
        .ok_or_else(|| Error::Data("no trajectories to write".into()))?;
    if trajs
        .values()
        .any(|t| t.len() != first.len() || t.sample_rate_hz != first.sample_rate_hz || t.t0_ms != first.t0_ms)
    {
        return Err(Error::Data("trajectories do not share one time base".into()));
    }
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["t_ms".to_string()];
    header.extend(trajs.keys().map(|c| c.to_string()));
    wtr.write_record(&header)?;
    for i in 0..first.len() {
        let mut row = vec![format!("{:.6}", first.time_ms(i))];
        row.extend(trajs.values().map(|t| format!("{:.6}", t.samples[i])));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a trajectory CSV, inferring the sample rate from the first two rows.
pub fn read_trajectories_csv<R: Read>(r: R) -> Result<BTreeMap<Channel, Trajectory>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("t_ms") {
        return Err(Error::Data("first column must be t_ms".into()));
    }
    let channels: Vec<Channel> = headers
        .iter()
        .skip(1)
        .map(|h| h.parse().map_err(|_| Error::Data(format!("unknown channel column `{h}`"))))
        .collect::<Result<_>>()?;
    let mut times = Vec::new();
    let mut cols = vec![Vec::new(); channels.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("bad number `{s}`")))
        };
        times.push(parse(&rec[0])?);
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(parse(rec.get(k + 1).unwrap_or(""))?);
        }
    }
    if times.len() < 2 {
        return Err(Error::Data("trajectory needs at least two rows".into()));
    }
    let period = times[1] - times[0];
    if !(period > 0.0) {
        return Err(Error::Data("time column must increase".into()));
    }
    let rate = 1000.0 / period;
    Ok(channels
        .into_iter()
        .zip(cols)
        .map(|(c, samples)| (c, Trajectory::new(c, rate, times[0], samples)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::TractVariable;

    fn gesture(id: &str, tv: Channel, target: f64, k: f64, w: f64, on: f64, off: f64) -> Gesture {
        Gesture {
            id: id.into(),
            tract_variable: tv,
            target_mm: target,
            stiffness_s2: k,
            damping_ratio: 1.0,
            blending_strength: w,
            t_on_ms: on,
            t_off_ms: off,
            descriptor: String::new(),
        }
    }

    fn single_gesture_score(delta: f64, k: f64, on: f64) -> GesturalScore {
        GesturalScore {
            duration_ms: 800.0,
            sample_rate_hz: 200.0,
            tract_variables: vec![TractVariable {
                name: Channel::TbCl,
                neutral_mm: 1.0,
            }],
            gestures: vec![gesture("g", Channel::TbCl, 1.0 + delta, k, 1.0, on, 790.0)],
        }
    }

    #[test]
    fn blend_identity_and_symmetry() {
        let a = gesture("a", Channel::TbCl, 7.0, 300.0, 2.0, 0.0, 100.0);
        let p = blend_parameters(&[&a]).unwrap();
        assert_eq!((p.target_mm, p.stiffness_s2), (7.0, 300.0));

        let b = gesture("b", Channel::TbCl, 10.0, 400.0, 1.0, 0.0, 100.0);
        let c = gesture("c", Channel::TbCl, -10.0, 400.0, 1.0, 0.0, 100.0);
        assert_eq!(blend_parameters(&[&b, &c]).unwrap().target_mm, 0.0);

        let pal = gesture("pal", Channel::TbCl, 12.0, 400.0, 1.0, 0.0, 100.0);
        let vel = gesture("vel", Channel::TbCl, -8.0, 400.0, 1.0, 0.0, 100.0);
        assert_eq!(blend_parameters(&[&pal, &vel]).unwrap().target_mm, 2.0);
    }

    #[test]
    fn blend_errors() {
        assert!(matches!(blend_parameters(&[]), Err(Error::EmptyBlend)));
        let a = gesture("a", Channel::TbCl, 7.0, 300.0, 1.0, 0.0, 100.0);
        let b = gesture("b", Channel::La, 7.0, 300.0, 1.0, 0.0, 100.0);
        assert!(matches!(blend_parameters(&[&a, &b]), Err(Error::MixedTractVariables(..))));
    }

    #[test]
    fn no_gestures_stays_neutral() {
        let mut s = single_gesture_score(5.0, 400.0, 100.0);
        s.gestures.clear();
        let t = integrate(&s, 0.5).unwrap();
        let tr = &t[&Channel::TbCl];
        assert_eq!(tr.len(), 161);
        assert!(tr.samples.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn fifty_ms_after_onset() {
        // x(1/ωₙ) = Δ(1 − 2/e) relative to neutral.
        let delta = 6.0;
        let s = single_gesture_score(delta, 400.0, 100.0);
        let tr = &integrate(&s, 0.5).unwrap()[&Channel::TbCl];
        let x = tr.samples[30] - 1.0;
        let expected = delta * (1.0 - 2.0 * (-1.0f64).exp());
        assert!((x - expected).abs() < 1e-3 * delta);
        assert!((expected / delta - 0.2642).abs() < 1e-4);
    }

    #[test]
    fn analytic_oracle_values() {
        assert_eq!(analytic_step_response(3.0, 20.0, 0.0).unwrap(), (0.0, 0.0));
        let (_, v) = analytic_step_response(3.0, 20.0, 50.0).unwrap();
        assert!((v - 3.0 * 20.0 * (-1.0f64).exp()).abs() < 1e-12);
        let (x, _) = analytic_step_response(3.0, 20.0, 500.0).unwrap();
        assert!((x - 3.0).abs() < 0.005 * 3.0);
        assert!(analytic_step_response(1.0, 20.0, -1.0).is_err());
    }

    #[test]
    fn rejects_coarse_step() {
        let s = single_gesture_score(5.0, 400.0, 100.0);
        assert!(integrate(&s, 2.0).is_err());
        assert!(integrate(&s, 0.0).is_err());
    }

    #[test]
    fn unaligned_activation_still_matches_closed_form() {
        let delta = -4.0;
        let on = 123.37;
        let s = single_gesture_score(delta, 900.0, on);
        let tr = &integrate(&s, 0.5).unwrap()[&Channel::TbCl];
        for i in 0..tr.len() {
            let t = tr.time_ms(i);
            let expected = if t < on {
                0.0
            } else if t < 790.0 {
                analytic_step_response(delta, 30.0, t - on).unwrap().0
            } else {
                continue;
            };
            assert!((tr.samples[i] - 1.0 - expected).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn csv_layout() {
        let s = single_gesture_score(5.0, 400.0, 100.0);
        let t = integrate(&s, 0.5).unwrap();
        let mut buf = Vec::new();
        write_trajectories_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_ms,TB_CL"));
        assert_eq!(lines.next(), Some("0.000000,1.000000"));
        let back = read_trajectories_csv(text.as_bytes()).unwrap();
        let tr = &back[&Channel::TbCl];
        assert_eq!(tr.sample_rate_hz, 200.0);
        assert_eq!(tr.len(), 161);
    }
}
