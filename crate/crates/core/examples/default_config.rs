//! Prints the built-in experiment configuration as TOML.
//!
//! cargo run --example default_config > my.toml

use modar_v2x::experiment::ExperimentConfig;

fn main() {
    print!("{}", ExperimentConfig::default().to_toml_string());
}
