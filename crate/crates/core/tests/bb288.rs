use gdg_core::codes::{
    bb288, config_b_coefficient, count_weight2_syndrome_configs,
    cyclic_gcd_gf2, enumerate_low_weight_syndrome_codewords, poly_gcd_gf2,
    weight2_syndrome_codewords, Gf2Poly,
};
use gdg_core::gf2::{BitVector, RowBasis};

#[test]
fn bb288_parameters() {
    let code = bb288();
    assert_eq!(code.n, 288);
    assert_eq!(code.k, 12);
    assert_eq!(code.hx.rank(), 138);
    assert_eq!(code.hz.rank(), 138);
    assert!(code.hx.mul(&code.hz.transpose()).unwrap().is_zero());
    assert!((0..288).all(|c| code.hx.col_weight(c) == 3));
    assert!((0..144).all(|r| code.hx.row_weight(r) == 6));
    assert_eq!(code.hx.kernel_basis().len(), 150);
}

#[test]
fn bb288_unit_columns_map_to_columns() {
    let code = bb288();
    for j in [0, 17, 143, 144, 287] {
        let e = BitVector::from_indices(288, [j]);
        let col = code.hx.matvec(&e).unwrap();
        assert_eq!(col.weight(), 3);
        assert_eq!(col, code.hx.column_vector(j));
    }
}

#[test]
fn bb288_logicals_are_nontrivial() {
    let code = bb288();
    assert_eq!(code.lz.n_rows(), 12);
    let mut span = RowBasis::new(288);
    for r in 0..code.hz.n_rows() {
        span.insert(&code.hz.row_vector(r));
    }
    let base = span.rank();
    for r in 0..12 {
        let row = code.lz.row_vector(r);
        assert!(code.hx.matvec(&row).unwrap().is_zero());
        let mut with = span.clone();
        assert!(with.insert(&row));
        assert_eq!(with.rank(), base + 1);
    }
    // independent modulo the stabilizers as a set
    for r in 0..12 {
        assert!(span.insert(&code.lz.row_vector(r)));
    }
}

#[test]
fn bb288_syndrome_code_counts() {
    let code = bb288();
    assert_eq!(count_weight2_syndrome_configs(&code.hx), 864);
    let census = enumerate_low_weight_syndrome_codewords(&code.hx, 3, 3).unwrap();
    // no two columns share two checks
    assert_eq!(census.count(2, 2), 0);
    assert_eq!(weight2_syndrome_codewords(&code.hx).len(), 216);
    assert_eq!(census.count(3, 3), 288);
    assert_eq!(config_b_coefficient(&code.hx).unwrap(), 2592);
}

/// Frozen from an independent computer-algebra evaluation of the same gcds.
#[test]
fn bicycle_254_generator_gcds() {
    let a: Gf2Poly = "1 + x^15 + x^20 + x^28 + x^66".parse().unwrap();
    let b: Gf2Poly = "1 + x^58 + x^59 + x^100 + x^121".parse().unwrap();
    let plain = poly_gcd_gf2(&a, &b).unwrap();
    assert_eq!(
        plain,
        Gf2Poly::from_exponents([16, 15, 13, 10, 8, 7, 6, 5, 4, 2, 0])
    );
    let cyclic = cyclic_gcd_gf2(&a, &b, 127).unwrap();
    assert_eq!(
        cyclic,
        Gf2Poly::from_exponents([14, 12, 10, 9, 8, 5, 2, 1, 0])
    );
    let f1: Gf2Poly = "x^7 + x^6 + x^5 + x^4 + 1".parse().unwrap();
    let f2: Gf2Poly = "x^7 + x^6 + x^5 + x^4 + x^2 + x + 1".parse().unwrap();
    assert_eq!(f1.mul(&f2), cyclic);
}

#[test]
fn bb288_logical_types_pair_up() {
    let code = bb288();
    assert_eq!(code.lx.n_rows(), 12);
    // X logicals commute with Z stabilizers and detect every Z logical
    assert!(code.hz.mul(&code.lx.transpose()).unwrap().is_zero());
    let pairing = code.lz.mul(&code.lx.transpose()).unwrap();
    assert_eq!(pairing.rank(), 12);
}
