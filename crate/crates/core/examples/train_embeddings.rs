//! Train one SGNS space per era and save them as word2vec text files.
//!
//! cargo run --release --example train_embeddings [out_dir]

use std::path::{Path, PathBuf};

use diachron::corpus::{bucketize, ingest, read_manifest, BucketRanges};
use diachron::embed::{cosine, train_bucket, EmbeddingSpace, SgnsConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/manifest.csv");
    let corpus = bucketize(ingest(&read_manifest(&manifest)?)?, &BucketRanges::default())?;
    let out: PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("diachron-vec"), PathBuf::from);
    std::fs::create_dir_all(&out)?;

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
    for (bucket, docs) in corpus.buckets() {
        let space = train_bucket(bucket, docs, &config)?;
        let p = space.provenance().unwrap();
        println!(
            "{bucket}: {} words x {} dims, {} training tokens, loss {:.3} -> {:.3}",
            space.len(),
            space.dim(),
            p.training_tokens,
            p.epoch_losses[0],
            p.epoch_losses.last().unwrap()
        );
        if let (Ok(a), Ok(b)) = (cosine(&space, "he", "she"), cosine(&space, "he", "dowry")) {
            println!("  cos(he, she) {a:.3}   cos(he, dowry) {b:.3}");
        }
        let path = out.join(format!("{bucket}.vec"));
        space.save_text(&path)?;
        let back = EmbeddingSpace::load_text(&path)?;
        assert_eq!(back.vocab().tokens(), space.vocab().tokens());
    }
    println!("wrote {}", out.display());
    Ok(())
}
