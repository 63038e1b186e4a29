//! Writing and reading binary timestamp files, and what the decoder reports
//! for damaged ones.

use photonlab::io::{decode_timestamps, encode_timestamps, read_timestamps, write_timestamps, RECORD_BYTES};
use photonlab::kinetics::{EmitterConfig, ExcitationContext, RED_NM};
use photonlab::montecarlo::{acquire_hbt, DetectorConfig};

fn main() -> photonlab::Result<()> {
    let s = acquire_hbt(
        &EmitterConfig::reference(),
        &ExcitationContext::cw(RED_NM, 300.0),
        &DetectorConfig::default(),
        1.0,
        42,
    )?;
    let path = std::env::temp_dir().join("example.phts");
    write_timestamps(&s, &path)?;
    let back = read_timestamps(&path)?;
    println!(
        "{}: {} channels, {} events, {} bytes per record, config {} seed {}, identical: {}",
        path.display(),
        back.n_channels(),
        back.total_events(),
        RECORD_BYTES,
        &back.provenance.hash_hex()[..16],
        back.provenance.seed,
        back == s
    );

    let bytes = encode_timestamps(&s)?;
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    println!("bad magic: {}", decode_timestamps(&bad_magic).unwrap_err());
    println!("truncated: {}", decode_timestamps(&bytes[..bytes.len() - 5]).unwrap_err());
    Ok(())
}
