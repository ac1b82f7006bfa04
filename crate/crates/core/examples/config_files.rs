//! Load a device file, inspect it, and write it back.

use gated_squid::io::config::{config_to_json, load_config, parse_config};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/example.json");
    let c = load_config(path.as_ref())?;
    for b in &c.branches {
        println!("branch {}: L = {:.3e} H, I* = {:.3e} A", b.index, b.inductance, b.critical_current);
    }
    let text = config_to_json(&c);
    assert_eq!(parse_config(&text, "round-trip")?, c);
    print!("{text}");

    let broken = text.replacen("1e-10", "-1e-10", 1);
    if let Err(e) = parse_config(&broken, "broken.json") {
        println!("rejected: {e}");
    }
    Ok(())
}
