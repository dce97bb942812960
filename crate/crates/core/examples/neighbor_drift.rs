//! Track how a word's nearest neighbors shift across aligned eras, with
//! the mean valence of each neighbor list.
//!
//! cargo run --release --example neighbor_drift [token]

use std::path::Path;

use diachron::align::{align_series, neighbor_report, Preprocessing};
use diachron::corpus::{bucketize, ingest, read_manifest, BucketRanges};
use diachron::embed::{train_bucket, SgnsConfig};
use diachron::lexicon::ValenceLexicon;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let token = std::env::args().nth(1).unwrap_or_else(|| "dowry".into());
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/manifest.csv");
    let corpus = bucketize(ingest(&read_manifest(&manifest)?)?, &BucketRanges::default())?;
    let config = SgnsConfig {
        dim: 24,
        window: 4,
        epochs: 20,
        initial_lr: 0.05,
        min_count: 2,
        subsample_t: 1e-3,
        seed: 7,
        ..SgnsConfig::default()
    };
    let spaces = corpus
        .buckets()
        .map(|(b, docs)| train_bucket(b, docs, &config))
        .collect::<Result<Vec<_>, _>>()?;
    let series = align_series(&spaces, 300, Preprocessing::NormalizeCenter)?;

    let report = neighbor_report(&series.spaces, &token, 6)?.with_valence(&ValenceLexicon::bundled_test());
    for b in &report.buckets {
        let words: Vec<String> = b.neighbors.iter().map(|n| format!("{} ({:.2})", n.token, n.similarity)).collect();
        let valence = b.mean_valence.map_or("n/a".into(), |v| format!("{v:.2}"));
        println!("{:<4} valence {valence:<5} {}", b.bucket, words.join(", "));
    }
    for b in &report.missing_buckets {
        println!("{b}: {token:?} not in vocabulary");
    }
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    println!("\n{}", String::from_utf8(csv)?.lines().take(3).collect::<Vec<_>>().join("\n"));
    Ok(())
}
