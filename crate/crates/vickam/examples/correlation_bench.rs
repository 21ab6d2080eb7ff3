//! Naive vs FFT correlation backends: agreement check and wall times.
//!
//! ```bash
//! cargo run --release --example correlation_bench
//! ```

use vickam::fftcorr::{bench_corr, BenchConfig};

fn main() -> vickam::Result<()> {
    for (p, note) in [(7, "paper prototype side"), (31, "large prototype")] {
        let cfg = BenchConfig {
            h: 90,
            w: 160,
            c: 8,
            p,
            k_a: 1,
            repeats: 5,
            seed: 0xBEC8,
        };
        let reports = bench_corr(&cfg)?;
        for r in &reports {
            println!("{}", serde_json::to_string(r).expect("report serializes"));
        }
        let naive = reports.iter().find(|r| r.backend == "naive").unwrap();
        let fft = reports.iter().find(|r| r.backend == "fft").unwrap();
        println!(
            "p={p} ({note}): speedup {:.1}x, agreement {}\n",
            naive.median_ns as f64 / fft.median_ns as f64,
            naive.agreement && fft.agreement
        );
    }
    Ok(())
}
