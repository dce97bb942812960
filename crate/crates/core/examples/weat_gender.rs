//! WEAT effect sizes: a hand-built space, out-of-vocabulary policies, and
//! a batch over several spaces.
//!
//! cargo run --example weat_gender

use diachron::embed::EmbeddingSpace;
use diachron::lexicon::{builtin_weat_gender_occupations, WeatSpec};
use diachron::weat::{weat_batch, weat_effect_size, OovPolicy, StdDev, WeatOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = EmbeddingSpace::from_rows(
        "toy",
        &[
            ("doctor", vec![0.9, 0.1]),
            ("engineer", vec![0.8, 0.3]),
            ("nurse", vec![0.1, 0.9]),
            ("teacher", vec![0.4, 0.7]),
            ("clerk", vec![0.3, 0.6]),
            ("he", vec![1.0, 0.0]),
            ("man", vec![0.95, 0.05]),
            ("she", vec![0.0, 1.0]),
            ("woman", vec![0.05, 0.95]),
        ],
    )?;
    let spec = WeatSpec::from_strs(&["doctor", "engineer"], &["nurse", "teacher"], &["he", "man"], &["she", "woman"])?;
    let r = weat_effect_size(&space, &spec, WeatOptions::default())?;
    println!("effect size {:.4} (population std)", r.effect_size);
    for (word, g) in &r.g_values {
        println!("  g({word}) = {g:+.4}");
    }
    let sample = WeatOptions { std_dev: StdDev::Sample, ..WeatOptions::default() };
    println!("effect size {:.4} (sample std)", weat_effect_size(&space, &spec, sample)?.effect_size);

    let with_oov = WeatSpec::from_strs(&["doctor", "engineer", "pilot"], &["nurse", "teacher", "clerk"], &["he", "man"], &["she", "woman"])?;
    let strict = WeatOptions { oov_policy: OovPolicy::Error, ..WeatOptions::default() };
    match weat_effect_size(&space, &with_oov, strict) {
        Ok(r) => println!("error policy: {}", r.effect_size),
        Err(e) => println!("error policy: {e}"),
    }
    let r = weat_effect_size(&space, &with_oov, WeatOptions::default())?;
    println!("drop and rebalance: {:.4}, dropped {}", r.effect_size, r.dropped_summary());

    // Swapping the axes is a reflection, so every cosine and the score survive.
    let flipped = space.map_rows(|v| vec![v[1], v[0]])?;
    let builtin = builtin_weat_gender_occupations();
    println!("builtin spec: {} + {} targets", builtin.s1.len(), builtin.s2.len());
    let batch = weat_batch(&[("toy", &space), ("flipped", &flipped)], &spec, WeatOptions::default());
    let mut csv = Vec::new();
    batch.write_csv(&mut csv)?;
    print!("{}", String::from_utf8(csv)?);
    println!("mean {:?} ({})", batch.mean_effect_size, batch.aggregation);
    Ok(())
}
