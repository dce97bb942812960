//! Agreement between two annotators on the same items.
//!
//! cargo run --example cohen_kappa

use diachron::metrics::cohen_kappa;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = ["boy", "girl", "boy", "none", "girl", "boy", "none", "girl"];
    let b = ["boy", "girl", "girl", "none", "girl", "boy", "boy", "girl"];
    println!("birth labels: kappa = {:.4}", cohen_kappa(&a, &b)?);

    println!("perfect:  {}", cohen_kappa(&[1, 0, 1, 0], &[1, 0, 1, 0])?);
    println!("partial:  {}", cohen_kappa(&[1, 1, 0, 0], &[1, 1, 0, 1])?);
    println!("opposite: {}", cohen_kappa(&[1, 1, 0, 0], &[0, 0, 1, 1])?);

    match cohen_kappa(&[1, 1], &[1, 1]) {
        Ok(k) => println!("one shared label: {k}"),
        Err(e) => println!("one shared label: {e}"),
    }
    Ok(())
}
