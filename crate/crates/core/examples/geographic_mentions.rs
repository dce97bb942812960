//! Count gazetteer place mentions per era, per film or per occurrence.
//!
//! cargo run --example geographic_mentions

use std::path::Path;

use diachron::corpus::{bucketize, ingest, read_manifest, BucketRanges};
use diachron::lexicon::{Gazetteer, PlaceKind};
use diachron::metrics::{count_mentions, MentionGranularity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/manifest.csv");
    let corpus = bucketize(ingest(&read_manifest(&manifest)?)?, &BucketRanges::default())?;
    let gazetteer = Gazetteer::bundled_india();

    for granularity in [MentionGranularity::Film, MentionGranularity::Token] {
        let report = count_mentions(&corpus, &gazetteer.of_kind(PlaceKind::State), granularity);
        println!("states, {granularity:?} granularity");
        for b in &report.buckets {
            let top: Vec<String> = b.counts.iter().map(|(p, n)| format!("{p}={n}")).collect();
            println!("  {} ({} films): {}", b.bucket, b.documents, top.join(" "));
        }
        println!("  never mentioned: {}", report.zero_mention_places.len());
    }

    let cities = count_mentions(&corpus, &gazetteer.of_kind(PlaceKind::City), MentionGranularity::Film);
    for place in ["Mumbai", "Delhi", "Kolkata"] {
        let row: Vec<u64> = cities.buckets.iter().map(|b| cities.count(&b.bucket, place)).collect();
        println!("{place}: {row:?}");
    }
    Ok(())
}
