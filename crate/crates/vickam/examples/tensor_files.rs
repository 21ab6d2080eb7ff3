//! Seeded tensor fills and the VKT1 file format.
//!
//! ```bash
//! cargo run --example tensor_files
//! ```

use vickam::{read_tensor, seeded_fill, write_tensor, Dist};

fn main() -> vickam::Result<()> {
    let dir = std::env::temp_dir().join("vickam_tensor_files");
    std::fs::create_dir_all(&dir).expect("temp dir");

    // Fills are pure functions of (dims, seed, dist).
    let a = seeded_fill(&[4, 5, 6], 42, Dist::Uniform);
    let b = seeded_fill(&[4, 5, 6], 42, Dist::Uniform);
    assert!(a.bit_eq(&b));
    println!("seeded_fill(4x5x6, seed 42) twice -> bit-identical: {}", a.bit_eq(&b));
    println!("first four values: {:?}", &a.data()[..4]);

    let path = dir.join("grid.vkt");
    write_tensor(&a, &path)?;
    let size = std::fs::metadata(&path).expect("written").len();
    println!(
        "wrote {} ({} bytes = 5 + 4*rank + 4*numel = {})",
        path.display(),
        size,
        5 + 4 * a.rank() + 4 * a.numel()
    );

    let back = read_tensor(&path)?;
    println!("read back bit-identical: {}", a.bit_eq(&back));

    let g = seeded_fill(&[1000], 7, Dist::Gaussian { sigma: 2.0 });
    let mean: f64 = g.data().iter().map(|&v| v as f64).sum::<f64>() / 1000.0;
    let var: f64 = g.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / 1000.0;
    println!("gaussian(sigma=2) sample: mean {mean:.3}, std {:.3}", var.sqrt());
    Ok(())
}
