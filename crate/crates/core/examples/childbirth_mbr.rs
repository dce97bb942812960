//! Find childbirth dialogue, apply manual labels, and compute the male
//! birth ratio per era.
//!
//! cargo run --example childbirth_mbr

use std::fs::File;
use std::path::Path;

use diachron::corpus::{bucketize, ingest, read_manifest, BucketRanges};
use diachron::metrics::{
    apply_birth_annotations, classify_birth_dialogue, compute_mbr, count_births, extract_childbirth_candidates,
    read_birth_annotations,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for line in ["It's a girl!", "The baby will come soon.", "It's a boyfriend thing.", "It\u{2019}s a BOY!"] {
        println!("{line:<28} -> {:?}", classify_birth_dialogue(line));
    }

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let corpus = bucketize(ingest(&read_manifest(&dir.join("manifest.csv"))?)?, &BucketRanges::default())?;
    let mut records = extract_childbirth_candidates(&corpus);
    println!("\n{} candidate cues", records.len());

    let labels = read_birth_annotations(File::open(dir.join("births.csv"))?)?;
    let applied = apply_birth_annotations(&mut records, &labels);
    println!("{applied} labels applied from births.csv\n");

    for (bucket, _) in corpus.buckets() {
        let era: Vec<_> = records.iter().filter(|r| r.bucket == bucket).cloned().collect();
        let c = count_births(&era);
        let mbr = compute_mbr(&era).map_or_else(|e| e.to_string(), |v| format!("{v:.1}"));
        println!("{bucket}: boy {} girl {} unlabeled {} -> MBR {mbr}", c.boy, c.girl, c.unlabeled);
    }
    Ok(())
}
