//! Male pronoun ratio per era, overall and per industry.
//!
//! cargo run --example pronoun_ratio

use std::path::Path;

use diachron::corpus::{bucketize, count_tokens, ingest, read_manifest, BucketRanges, Industry};
use diachron::metrics::{compute_mpr, PronounCounts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/manifest.csv");
    let corpus = bucketize(ingest(&read_manifest(&manifest)?)?, &BucketRanges::default())?;

    println!("{:<5} {:<10} {:>6} {:>6} {:>7}", "era", "industry", "male", "female", "MPR");
    for (bucket, docs) in corpus.buckets() {
        for industry in [None, Some(Industry::Bollywood), Some(Industry::Hollywood)] {
            let kept = docs.iter().filter(|d| industry.is_none_or(|i| d.industry == i));
            let counts = PronounCounts::from_table(&count_tokens(kept));
            let label = industry.map_or("all".to_string(), |i| i.to_string());
            match compute_mpr(&counts) {
                Ok(mpr) => println!("{bucket:<5} {label:<10} {:>6} {:>6} {mpr:>7.2}", counts.male(), counts.female()),
                Err(e) => println!("{bucket:<5} {label:<10} {e}"),
            }
        }
    }

    // The ratio is a share of the pooled counts, so parity is exactly 50.
    assert_eq!(compute_mpr(&PronounCounts::new(3, 1, 2, 2))?, 50.0);
    Ok(())
}
