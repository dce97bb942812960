//! Recover a planted rotation with orthogonal Procrustes, then chain three
//! eras into one coordinate frame.
//!
//! cargo run --example procrustes_alignment

use diachron::align::{align_series, apply_alignment, fit_alignment, Preprocessing};
use diachron::embed::{cosine, EmbeddingSpace};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rotated(bucket: &str, rows: &[(String, Vec<f64>)], q: &DMatrix<f64>) -> EmbeddingSpace {
    let rows: Vec<(String, Vec<f64>)> = rows
        .iter()
        .map(|(t, v)| (t.clone(), (q * DVector::from_column_slice(v)).as_slice().to_vec()))
        .collect();
    EmbeddingSpace::from_rows(bucket, &rows).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 8;
    let rows: Vec<(String, Vec<f64>)> =
        (0..200).map(|i| (format!("w{i}"), (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())).collect();
    let q = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0)).qr().q();

    let src = EmbeddingSpace::from_rows("old", &rows)?;
    let tgt = rotated("new", &rows, &q);
    let map = fit_alignment(&src, &tgt, 200, Preprocessing::NormalizeCenter)?;
    println!("anchors {}, max|R - Q| {:.2e}", map.anchor_tokens.len(), (&map.rotation - &q).abs().max());
    println!("residual {:.3e} (identity {:.3})", map.residual, map.identity_residual);
    println!("|RtR - I| {:.2e}, rank deficient: {}", map.orthogonality_error(), map.rank_deficient);

    let aligned = apply_alignment(&src, &map)?;
    println!("cos(w0, w1) before {:.12} after {:.12}", cosine(&src, "w0", "w1")?, cosine(&aligned, "w0", "w1")?);

    let eras: Vec<EmbeddingSpace> = ["old", "mid", "new"]
        .iter()
        .map(|b| {
            let q = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
            rotated(b, &rows, &q)
        })
        .collect();
    let series = align_series(&eras, 200, Preprocessing::Raw)?;
    for (space, map) in series.spaces.iter().zip(&series.maps) {
        let drift: f64 = space
            .vector("w5")
            .unwrap()
            .iter()
            .zip(series.spaces[2].vector("w5").unwrap())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!("{} -> {}: residual {:.2e}, w5 off by {drift:.2e}", map.source_bucket, map.target_bucket, map.residual);
    }
    println!("{}", series.maps[0].to_json()?.lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
