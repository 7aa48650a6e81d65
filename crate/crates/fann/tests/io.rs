use fann::io::{load_dataset, parse_binary, parse_text, save_dataset, to_binary, Format, IoError};
use fann_core::{Dataset, SeededRng};
use proptest::prelude::*;

#[test]
fn text_example() {
    let ds = parse_text("1 2\n0.5 -0.5\n").unwrap();
    assert_eq!((ds.len(), ds.dim()), (1, 2));
    assert_eq!(ds.coords(0), &[0.5, -0.5]);
}

#[test]
fn text_errors_are_distinct() {
    assert!(matches!(parse_text(""), Err(IoError::MalformedHeader(_))));
    assert!(matches!(parse_text("2\n1 2\n"), Err(IoError::MalformedHeader(_))));
    assert!(matches!(parse_text("x 2\n"), Err(IoError::MalformedHeader(_))));
    assert!(matches!(parse_text("2 2\n1 2\n"), Err(IoError::ShortFile { expected: 4, found: 2 })));
    assert!(matches!(parse_text("1 2\n1 2 3\n"), Err(IoError::DimensionMismatch { line: 2, expected: 2, found: 3 })));
    assert!(matches!(parse_text("1 2\n1 z\n"), Err(IoError::BadValue { line: 2, .. })));
    assert!(matches!(parse_text("1 1\n1\n2\n"), Err(IoError::TrailingData { n: 1 })));
}

#[test]
fn binary_errors_are_distinct() {
    let ds = Dataset::from_rows(3, &[[1.0f32, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
    let bytes = to_binary(&ds);
    assert_eq!(&bytes[..4], b"FANN");
    assert_eq!(bytes.len(), 12 + 24);
    assert!(matches!(parse_binary(&bytes[..30]), Err(IoError::ShortFile { expected: 6, found: 4 })));
    assert!(matches!(parse_binary(&bytes[..8]), Err(IoError::MalformedHeader(_))));
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(matches!(parse_binary(&wrong), Err(IoError::MalformedHeader(_))));
    let mut long = bytes;
    long.extend_from_slice(&[0; 4]);
    assert!(matches!(parse_binary(&long), Err(IoError::TrailingData { .. })));
}

#[test]
fn file_round_trip_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(1);
    let rows: Vec<Vec<f32>> = (0..20).map(|_| (0..5).map(|_| rng.gaussian() as f32).collect()).collect();
    let ds = Dataset::from_rows(5, &rows).unwrap();
    for (name, f) in [("a.bin", Format::Binary), ("a.txt", Format::Text)] {
        let p = dir.path().join(name);
        save_dataset(&p, &ds, f).unwrap();
        assert_eq!(Format::from_path(&p), f);
        assert_eq!(load_dataset(&p, f).unwrap(), ds);
    }
    assert!(matches!(load_dataset(&dir.path().join("none"), Format::Text), Err(IoError::Io { .. })));
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..6, 0usize..8).prop_flat_map(|(d, n)| {
        prop::collection::vec(any::<f32>().prop_filter("finite", |x| x.is_finite()), n * d)
            .prop_map(move |data| Dataset::new(d, data).unwrap())
    })
}

proptest! {
    #[test]
    fn binary_round_trip_is_bit_exact(ds in dataset()) {
        let back = parse_binary(&to_binary(&ds)).unwrap();
        let a: Vec<u32> = ds.raw().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u32> = back.raw().iter().map(|x| x.to_bits()).collect();
        prop_assert_eq!(a, b);
        prop_assert_eq!(back.dim(), ds.dim());
    }

    #[test]
    fn text_round_trip_is_exact(ds in dataset()) {
        let back = parse_text(&fann::io::to_text(&ds)).unwrap();
        prop_assert_eq!(back, ds);
    }
}
