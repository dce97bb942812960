//! Extract rupee amounts from ransom dialogue and average them.
//!
//! cargo run --example ransom_amounts

use std::path::Path;

use diachron::metrics::{average_amount, extract_monetary_amounts, extract_monetary_amounts_with, UnitTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for line in ["Bring 5 lakh rupees.", "Rs. 1,50,000 by tonight", "two crore, not a paisa less", "50 thousand"] {
        println!("{line:<32} -> {:?}", extract_monetary_amounts(line));
    }

    let mut units = UnitTable::default();
    units.units.insert("grand".into(), 1e3);
    println!("with a custom unit: {:?}", extract_monetary_amounts_with("Ten grand, 20 grand.", &units));

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/amounts.txt");
    let samples: Vec<String> = std::fs::read_to_string(path)?.lines().map(str::to_string).collect();
    let summary = average_amount(&samples, &UnitTable::default());
    println!(
        "\n{} of {} samples name an amount; mean {:?}",
        summary.samples_with_amount, summary.samples, summary.mean
    );
    Ok(())
}
