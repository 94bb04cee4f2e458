//! Runs configured commands programmatically and reads back the manifest.

use landau_lab::run::{run_command, validate_config, Command, CommandOptions};

fn main() -> landau_lab::Result<()> {
    let dir = std::env::temp_dir().join("landau-lab-example");
    let mut config = validate_config(r#"{ "degree": 6, "gamma": -1.0, "seed": 5 }"#)?;
    config.output_dir = dir.clone();
    for cmd in [Command::Nullspace, Command::Gap, Command::Dispersion] {
        let m = run_command(&config, cmd, &CommandOptions::default())?;
        print!("{}", m.summary_table());
        for f in &m.files {
            println!("  {} {} bytes sha256 {}", f.path, f.bytes, &f.sha256[..12]);
        }
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}
