use std::path::Path;

use diachron::corpus::{bucketize, ingest, read_manifest, BucketRanges, TimeBucketedCorpus};
use diachron::embed::{train_bucket, SgnsConfig};

fn mini_corpus() -> TimeBucketedCorpus {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/manifest.csv");
    let docs = ingest(&read_manifest(&manifest).unwrap()).unwrap();
    bucketize(docs, &BucketRanges::default()).unwrap()
}

fn config() -> SgnsConfig {
    SgnsConfig {
        dim: 24,
        window: 4,
        negatives: 5,
        epochs: 8,
        initial_lr: 0.05,
        min_count: 2,
        subsample_t: 1e-3,
        seed: 7,
        threads: 1,
    }
}

#[test]
fn loss_falls_across_epochs_on_every_bucket() {
    let corpus = mini_corpus();
    for (bucket, docs) in corpus.buckets() {
        let space = train_bucket(bucket, docs, &config()).unwrap();
        let losses = &space.provenance().unwrap().epoch_losses;
        assert_eq!(losses.len(), 8);
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{bucket}: loss rose {losses:?}");
        }
        assert!(losses[7] < losses[0], "{bucket}: {losses:?}");
    }
}

#[test]
fn deterministic_training_is_bit_reproducible_on_real_text() {
    let corpus = mini_corpus();
    let docs = corpus.bucket("mid");
    let a = train_bucket("mid", docs, &config()).unwrap();
    let b = train_bucket("mid", docs, &config()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn parallel_training_still_learns() {
    let corpus = mini_corpus();
    let docs = corpus.bucket("new");
    let space = train_bucket("new", docs, &SgnsConfig { threads: 4, ..config() }).unwrap();
    let losses = &space.provenance().unwrap().epoch_losses;
    assert!(losses.last().unwrap() < &losses[0], "{losses:?}");
    assert!(space.vectors().iter().all(|x| x.is_finite()));
}
