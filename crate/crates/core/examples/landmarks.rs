//! Lip aperture from two sensor traces, then Onset/Target/Release/Offset of
//! the closing gesture from the velocity signal.
//!
//! cargo run --example landmarks

use gestural::dynamics::analytic_step_response;
use gestural::landmarks::{compute_la, find_gesture, Direction, SensorTrace};

fn main() -> gestural::Result<()> {
    let rate = 200.0;
    let omega = 30.0;
    let n = 200;
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * 1000.0 / rate;
        // lower lip rises 12 mm from 100 ms, returns from 450 ms
        let (up, _) = analytic_step_response(12.0, omega, (t - 100.0).max(0.0))?;
        let (down, _) = analytic_step_response(12.0, omega, (t - 450.0).max(0.0))?;
        upper.push([0.0, 10.0]);
        lower.push([0.0, -5.0 + up - down]);
    }
    let la = compute_la(
        &SensorTrace {
            sample_rate_hz: rate,
            t0_ms: 0.0,
            points: upper,
        },
        &SensorTrace {
            sample_rate_hz: rate,
            t0_ms: 0.0,
            points: lower,
        },
    )?;
    let g = find_gesture(&la, (50.0, 900.0), Direction::Decreasing, 0.2)?;
    println!("onset {:.2} ms, target {:.2} ms", g.onset_ms, g.target_ms);
    println!("release {:.2} ms, offset {:.2} ms", g.release_ms, g.offset_ms);
    println!(
        "peak velocity {:.1} mm/s at {:.1} ms, {:.1} mm/s at {:.1} ms",
        g.peak_vel_to, g.peak_vel_to_ms, g.peak_vel_away, g.peak_vel_away_ms
    );
    Ok(())
}
