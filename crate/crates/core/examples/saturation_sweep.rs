//! Power sweeps at 658 nm and 515 nm through the command pipeline, written
//! as point CSVs next to a report.

use std::path::Path;

use photonlab::cli::{cmd_saturation, SweepArgs};

fn main() -> photonlab::Result<()> {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let out = std::env::temp_dir();
    for name in ["reference_red_cw", "green_cw"] {
        let r = cmd_saturation(&SweepArgs {
            config: configs.join(format!("{name}.toml")),
            values: vec![25.0, 50.0, 100.0, 200.0, 300.0, 500.0, 750.0, 1000.0],
            dwell_s: 20.0,
            seed: 1,
            out: Some(out.join(format!("{name}.saturation.csv"))),
        })?;
        println!("{r}");
    }
    Ok(())
}
