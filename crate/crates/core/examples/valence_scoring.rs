//! Score token lists with a valence lexicon.
//!
//! cargo run --example valence_scoring

use diachron::corpus::tokenize;
use diachron::lexicon::ValenceLexicon;
use diachron::metrics::score_valence;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lexicon = ValenceLexicon::bundled_test();
    println!("bundled test lexicon has {} entries", lexicon.len());

    let one = score_valence(&["happy"], &lexicon)?;
    let two = score_valence(&["happy", "sad"], &lexicon)?;
    println!("[happy]      -> {}", one.mean);
    println!("[happy, sad] -> {}", two.mean);

    let tokens = tokenize("The happy woman and the sad man, unknown words ignored.");
    let score = score_valence(&tokens, &lexicon)?;
    println!("{tokens:?}\n  mean {:.3} over {} matches, skipped {}", score.mean, score.matched, score.skipped.len());

    let csv = "token,valence\nbrave,7.9\nbrave,7.1\nvery good,8.0\ncruel,1.6\n";
    let load = ValenceLexicon::from_reader(csv.as_bytes())?;
    println!(
        "custom lexicon: {} entries, {} duplicates, {} multi-word rows skipped",
        load.lexicon.len(),
        load.duplicates,
        load.skipped_multiword
    );
    Ok(())
}
