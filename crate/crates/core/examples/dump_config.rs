//! Regenerate the checked-in configuration files:
//! `cargo run --example dump_config -- <paper|desk>`

use fropm_core::config::Config;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "paper".into());
    let cfg = match which.as_str() {
        "desk" => Config::desk(),
        _ => Config::paper(),
    };
    println!("{}", serde_json::to_string_pretty(&cfg).unwrap());
}
