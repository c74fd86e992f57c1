//! Competitive coupling of two onset consonants to a vowel. With equal
//! weights least squares and the oscillator simulation agree on ±π/3; with
//! unequal weights the linear and sinusoidal couplings settle differently.
//!
//! cargo run --example c_center

use std::collections::BTreeMap;
use std::f64::consts::PI;

use gestural::coupling::{c_center_graph, phases_to_onsets, simulate_phases, solve_phases_ls, DEFAULT_DT_S};

fn main() -> gestural::Result<()> {
    for (a, b) in [(1.0, 1.0), (1.0, 0.8), (1.0, 2.0)] {
        let graph = c_center_graph(a, b);
        let ls = solve_phases_ls(&graph)?;
        let osc = simulate_phases(&graph, &BTreeMap::from([("C1".to_string(), -0.3)]), DEFAULT_DT_S, 30.0)?;
        // LS balances a·ψ = b·(π − 2ψ); the oscillators balance a·sin ψ = b·sin 2ψ.
        println!(
            "a = {a}, b = {b}: |psi_C1| LS {:.4}, OSC {:.4}",
            b * PI / (a + 2.0 * b),
            (a / (2.0 * b)).min(1.0).acos()
        );
        for node in ["C1", "C2", "V"] {
            println!("  {node}: LS {:+.4} rad, OSC {:+.4} rad", ls.phases[node], osc.phases[node]);
        }
        let onsets = phases_to_onsets(&ls, graph.omega0_rad_s, 0.0)?;
        println!("  onsets (ms): C1 {:+.1}, C2 {:+.1}", onsets["C1"], onsets["C2"]);
    }
    Ok(())
}
