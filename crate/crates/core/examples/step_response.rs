//! Single critically damped gesture integrated by RK4 against the closed
//! form while it is active, and the 20% velocity landmarks once it releases.
//!
//! cargo run --example step_response

use gestural::dynamics::{analytic_step_response, integrate};
use gestural::landmarks::{find_gesture, Direction};
use gestural::score::{Gesture, GesturalScore, TractVariable};
use gestural::Channel;

fn main() -> gestural::Result<()> {
    for omega in [10.0, 20.0, 40.0] {
        let score = GesturalScore {
            duration_ms: 1500.0,
            sample_rate_hz: 200.0,
            tract_variables: vec![TractVariable {
                name: Channel::TbCl,
                neutral_mm: 0.0,
            }],
            gestures: vec![Gesture {
                id: "g".into(),
                tract_variable: Channel::TbCl,
                target_mm: 10.0,
                stiffness_s2: omega * omega,
                damping_ratio: 1.0,
                blending_strength: 1.0,
                t_on_ms: 100.0,
                t_off_ms: 800.0,
                descriptor: "step".into(),
            }],
        };
        let traj = &integrate(&score, 0.5)?[&Channel::TbCl];
        let mut worst: f64 = 0.0;
        for (i, x) in traj.samples.iter().enumerate().take_while(|(i, _)| traj.time_ms(*i) <= 800.0) {
            let (exact, _) = analytic_step_response(10.0, omega, (traj.time_ms(i) - 100.0).max(0.0))?;
            worst = worst.max((x - exact).abs());
        }
        let lm = find_gesture(traj, (50.0, 1495.0), Direction::Increasing, 0.2);
        println!("omega {omega}: max |RK4 - exact| = {worst:.2e} mm");
        match lm {
            Ok(l) => println!(
                "  onset {:.2} ms (root {:.2}), target {:.2} ms (root {:.2})",
                l.onset_ms,
                100.0 + 1000.0 * 0.0797 / omega,
                l.target_ms,
                100.0 + 1000.0 * 3.9943 / omega
            ),
            Err(e) => println!("  landmarks: {e}"),
        }
    }
    Ok(())
}
