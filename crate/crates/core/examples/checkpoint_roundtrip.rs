//! Saves a freshly initialised network, reloads it and checks the two give
//! identical outputs; then shows that a corrupted file is rejected.

use ivdoa::dsp::StftConfig;
use ivdoa::foa::{encode_plane_wave, Direction};
use ivdoa::neural::{load_checkpoint, save_checkpoint, ArchConfig, FeatureExtractor, Network};
use ivdoa::pipeline::run_neural;

fn main() -> ivdoa::Result<()> {
    let dir = std::env::temp_dir().join("ivdoa_ckpt");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("net.bin");

    let net = Network::new(ArchConfig { bands: 32, conv_channels: vec![4, 8], gru_hidden: 8 }, 5)?;
    save_checkpoint(&net, &path)?;
    let back = load_checkpoint(&path)?;
    println!("{} bytes written; parameters equal after reload: {}", std::fs::metadata(&path)?.len(), back == net);

    let src = ivdoa::dsp::MonoSignal::new((0..24_000).map(|i| ((i * 31) % 17) as f64 / 17.0 - 0.5).collect(), 48_000)?;
    let foa = encode_plane_wave(&src, Direction::from_degrees(45.0, 0.0));
    let ex = FeatureExtractor::new(StftConfig::standard(48_000), 32)?;
    let (a, b) = (run_neural(&foa, &net, &ex)?, run_neural(&foa, &back, &ex)?);
    println!("estimates identical: {}", a.doa == b.doa);

    let mut bytes = std::fs::read(&path)?;
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&path, bytes)?;
    match load_checkpoint(&path) {
        Err(e) => println!("truncated file rejected: {e}"),
        Ok(_) => println!("truncated file unexpectedly accepted"),
    }
    Ok(())
}
