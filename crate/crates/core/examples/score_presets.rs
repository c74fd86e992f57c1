//! Builds the three preset scores, prints their activation intervals and the
//! co-active gesture sets at a few instants, and writes one as JSON.
//!
//! cargo run --example score_presets

use gestural::score::{active_gestures, preset_scenario, PresetParams};
use gestural::Preset;

fn main() -> gestural::Result<()> {
    let params = PresetParams::default();
    for preset in [Preset::Underlying, Preset::Assimilatory, Preset::Sequence] {
        let score = preset_scenario(preset, &params)?;
        println!("{preset}");
        for g in &score.gestures {
            println!(
                "  {:<4} {:<6} target {:>6.1} mm  k {:>5.0}  w {:.2}  [{:.1}, {:.1}] ms  {}",
                g.id, g.tract_variable, g.target_mm, g.stiffness_s2, g.blending_strength, g.t_on_ms, g.t_off_ms, g.descriptor
            );
        }
        for t in [210.0, 260.0, 500.0] {
            println!("  active at {t} ms: {:?}", active_gestures(&score, t)?);
        }
    }
    let score = preset_scenario(Preset::Assimilatory, &params)?;
    println!("{}", score.to_json()?);
    Ok(())
}
