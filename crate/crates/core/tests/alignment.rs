use diachron::align::{align_series, fit_alignment, neighbor_report, Preprocessing};
use diachron::embed::{cosine, EmbeddingSpace};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rotation(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0)).qr().q()
}

fn rotated(bucket: &str, rows: &[(String, Vec<f64>)], q: &DMatrix<f64>) -> EmbeddingSpace {
    let out: Vec<(String, Vec<f64>)> = rows
        .iter()
        .map(|(t, v)| (t.clone(), (q * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()))
        .collect();
    EmbeddingSpace::from_rows(bucket, &out).unwrap()
}

#[test]
fn chained_eras_land_in_the_newest_frame() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 6;
    let base: Vec<(String, Vec<f64>)> = (0..120)
        .map(|i| (format!("w{i:03}"), (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    let spaces: Vec<EmbeddingSpace> = ["old", "mid", "new"]
        .iter()
        .map(|b| rotated(b, &base, &rotation(&mut rng, d)))
        .collect();
    let series = align_series(&spaces, 120, Preprocessing::Raw).unwrap();
    assert_eq!(series.maps.len(), 2);
    let newest = &series.spaces[2];
    for space in &series.spaces[..2] {
        for (token, _) in &base {
            let a = space.vector(token).unwrap();
            let b = newest.vector(token).unwrap();
            let dev = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-5, "{token} in {} is off by {dev}", space.bucket());
        }
    }
    for map in &series.maps {
        assert!(map.orthogonality_error() < 1e-8);
    }
}

#[test]
fn alignment_keeps_within_era_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows: Vec<(String, Vec<f64>)> = (0..60)
        .map(|i| (format!("t{i}"), (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    let noisy: Vec<(String, Vec<f64>)> = rows
        .iter()
        .map(|(t, v)| (t.clone(), v.iter().map(|x| x + rng.gen_range(-0.05..0.05)).collect()))
        .collect();
    let src = EmbeddingSpace::from_rows("old", &rows).unwrap();
    let tgt = EmbeddingSpace::from_rows("new", &noisy).unwrap();
    let map = fit_alignment(&src, &tgt, 60, Preprocessing::NormalizeCenter).unwrap();
    assert!(map.residual <= map.identity_residual + 1e-12);
    let aligned = diachron::align::apply_alignment(&src, &map).unwrap();
    let before = cosine(&src, "t1", "t2").unwrap();
    let after = cosine(&aligned, "t1", "t2").unwrap();
    assert!((before - after).abs() < 1e-12);
}

#[test]
fn neighbor_report_flags_missing_eras() {
    let a = EmbeddingSpace::from_rows("old", &[("x", vec![1.0, 0.0]), ("y", vec![0.9, 0.1]), ("z", vec![0.0, 1.0])]).unwrap();
    let b = EmbeddingSpace::from_rows("new", &[("y", vec![1.0, 0.0]), ("z", vec![0.0, 1.0])]).unwrap();
    let report = neighbor_report(&[a, b], "x", 2).unwrap();
    assert_eq!(report.missing_buckets, vec!["new".to_string()]);
    assert_eq!(report.buckets[0].neighbors[0].token, "y");
}
