//! Browser bindings for the demo page in `www/`.
//!
//! Each exported function returns a JSON string. The plain `*_json`
//! functions hold the logic so they can be tested natively.

use ghzt_core::protocol::parse_allocation;
use ghzt_core::verify::{fidelity_audit, regen_table, Stage};
use ghzt_core::viz::{build_hinton, render_svg_stack, SvgStyle};
use ghzt_core::{random_message, run_protocol, BitId, Mode, ProtocolConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// The browser runs everything on one thread; keep sizes modest.
const DEMO_QUBIT_CAP: usize = 16;

fn config(m: usize, n: usize, mode: &str, receiver: usize, allocation: &str, seed: u32) -> Result<ProtocolConfig, String> {
    let mode: Mode = mode.parse().map_err(|e: ghzt_core::Error| e.to_string())?;
    let allocation = parse_allocation(allocation, n).map_err(|e| e.to_string())?;
    let config = ProtocolConfig::new(m, n)
        .with_mode(mode)
        .with_receiver(receiver)
        .with_allocation(allocation)
        .with_seed(seed.into());
    let total = config.layout().map_err(|e| e.to_string())?.total_qubits();
    if total > DEMO_QUBIT_CAP {
        return Err(format!("{total} qubits is too many for the browser demo (limit {DEMO_QUBIT_CAP})"));
    }
    config.plan().map_err(|e| e.to_string())?;
    Ok(config)
}

fn parse_withheld(spec: &str) -> Result<Vec<BitId>, String> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<BitId>().map_err(|e| e.to_string()))
        .collect()
}

/// One seeded run: fidelity, the Hinton diagrams of ρ_in and ρ_out, and the
/// full transcript.
pub fn teleport_json(
    m: usize,
    n: usize,
    mode: &str,
    receiver: usize,
    allocation: &str,
    withhold: &str,
    seed: u32,
) -> Result<String, String> {
    let config = config(m, n, mode, receiver, allocation, seed)?.withholding(parse_withheld(withhold)?);
    config.plan().map_err(|e| e.to_string())?;
    let message = random_message(n, seed.into()).map_err(|e| e.to_string())?;
    let run = run_protocol(&config, &message).map_err(|e| e.to_string())?;
    let d_in = build_hinton(&message.state().density_matrix());
    let d_out = build_hinton(&run.output);
    let style = SvgStyle {
        cell_size: if n >= 3 { 24.0 } else { 40.0 },
        ..SvgStyle::default()
    };
    let svg = render_svg_stack(&[("ρ_in", &d_in), ("ρ_out", &d_out)], &style);
    let transcript: serde_json::Value = serde_json::from_str(&run.transcript.to_json()).map_err(|e| e.to_string())?;
    Ok(json!({
        "fidelity": run.fidelity,
        "bits": run.bits.iter().map(|(b, v)| (b.to_string(), *v)).collect::<std::collections::BTreeMap<_, _>>(),
        "svg": svg,
        "transcript": transcript,
    })
    .to_string())
}

/// Post-measurement table as Markdown, with the structured rows alongside.
pub fn table_json(m: usize, n: usize, stage: &str) -> Result<String, String> {
    let config = config(m, n, "standard", m.saturating_sub(1), "", 0)?;
    let stage: Stage = stage.parse().map_err(|e: ghzt_core::Error| e.to_string())?;
    let table = regen_table(&config, stage).map_err(|e| e.to_string())?;
    let rows: serde_json::Value = serde_json::from_str(&table.to_json()).map_err(|e| e.to_string())?;
    Ok(json!({
        "markdown": table.render_markdown(),
        "text": table.render_text(),
        "table": rows,
    })
    .to_string())
}

/// Fidelity audit over `trials` random messages.
pub fn audit_json(m: usize, n: usize, mode: &str, trials: usize, seed: u32) -> Result<String, String> {
    let config = config(m, n, mode, m.saturating_sub(1), "", seed)?;
    if trials > 500 {
        return Err("at most 500 trials in the browser demo".into());
    }
    let report = fidelity_audit(&config, trials, seed.into()).map_err(|e| e.to_string())?;
    Ok(report.to_json())
}

#[wasm_bindgen]
pub fn teleport(
    m: usize,
    n: usize,
    mode: &str,
    receiver: usize,
    allocation: &str,
    withhold: &str,
    seed: u32,
) -> Result<String, JsError> {
    teleport_json(m, n, mode, receiver, allocation, withhold, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn table(m: usize, n: usize, stage: &str) -> Result<String, JsError> {
    table_json(m, n, stage).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn audit(m: usize, n: usize, mode: &str, trials: usize, seed: u32) -> Result<String, JsError> {
    audit_json(m, n, mode, trials, seed).map_err(|e| JsError::new(&e))
}
