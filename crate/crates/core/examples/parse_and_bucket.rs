//! Parse an SRT file, tokenize it, and sort the bundled mini corpus into eras.
//!
//! cargo run --example parse_and_bucket

use std::path::Path;

use diachron::corpus::{bucketize, count_tokens, ingest, parse_srt, read_manifest, tokenize, BucketRanges};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = "1\n00:00:01,000 --> 00:00:02,500\n<i>Mr. Sharma\u{2019}s</i> well-known shop.\n\n\
               2\n00:00:03,000 --> 00:00:04,000\n{\\an8}He said she'd come.\n";
    for cue in parse_srt(raw.as_bytes())? {
        println!("cue {} [{}..{} ms] {:?}", cue.index, cue.start_ms, cue.end_ms, tokenize(&cue.text));
    }

    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/manifest.csv");
    let docs = ingest(&read_manifest(&manifest)?)?;
    let corpus = bucketize(docs, &BucketRanges::default())?;
    for (name, docs) in corpus.buckets() {
        let range = corpus.ranges().get(name).unwrap();
        let tokens = count_tokens(docs);
        println!("{name} {}-{}: {} films, {} tokens", range.start, range.end, docs.len(), tokens.total());
    }
    for doc in corpus.unassigned() {
        println!("outside every era: {} ({})", doc.film_id, doc.year);
    }
    Ok(())
}
