use spacemac::vectors;

const VECTORS: &str = include_str!("../data/spacemac_vectors.txt");

#[test]
fn shipped_vectors_all_match() {
    let parsed = vectors::parse(VECTORS).unwrap();
    assert_eq!(parsed.len(), 19);
    let report = vectors::verify_all(&parsed).unwrap();
    assert_eq!(report.checked, 19);
    assert!(report.passed(), "{:?}", report.mismatches);
}

#[test]
fn shipped_vectors_cover_several_geometries() {
    let parsed = vectors::parse(VECTORS).unwrap();
    let mut dims: Vec<_> = parsed.iter().map(|v| (v.dims.n, v.dims.m, v.dims.l)).collect();
    dims.dedup();
    assert_eq!(dims, vec![(8, 4, 1), (16, 4, 2), (30, 6, 4), (1024, 32, 1), (1024, 32, 4)]);
    assert!(parsed[0].y.is_zero() && parsed[0].tag.as_bytes() == [0]);
}
