//! Pull surnames that follow an honorific, then map them to religion labels.
//!
//! cargo run --example surnames_religion

use std::path::Path;

use diachron::corpus::{bucketize, ingest, read_manifest, BucketRanges, Industry, SubtitleDocument};
use diachron::lexicon::load_religion_map;
use diachron::metrics::{extract_surnames, religion_distribution, surnames_in};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doc = SubtitleDocument::from_lines(
        "demo",
        1975,
        Industry::Bollywood,
        &["Mr. and Mrs. Malhotra are here.", "Call Doctor Mehta now!", "Dr. D'Souza's clinic", "Doctor, please sit."],
    )?;
    let all = surnames_in(std::slice::from_ref(&doc), false);
    let doctors = surnames_in(std::slice::from_ref(&doc), true);
    println!("honorific surnames: {:?}", all.iter().collect::<Vec<_>>());
    println!("doctor surnames:    {:?}\n", doctors.iter().collect::<Vec<_>>());

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let corpus = bucketize(ingest(&read_manifest(&dir.join("manifest.csv"))?)?, &BucketRanges::default())?;
    let map = load_religion_map(&dir.join("religion_map.csv"))?;

    for doctor_only in [false, true] {
        let table = extract_surnames(&corpus, doctor_only);
        let dist = religion_distribution(&table, &map)?;
        println!("doctor_only = {doctor_only}: coverage {:.0}%", 100.0 * dist.coverage);
        for (label, pct) in &dist.percentages {
            println!("  {label:<10} {pct:6.2}%");
        }
        if !dist.unmapped_surnames.is_empty() {
            println!("  unmapped: {}", dist.unmapped_surnames.join(", "));
        }
    }
    Ok(())
}
