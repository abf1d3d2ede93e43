//! Bivariate bicycle codes and the syndrome-code analyses built on them.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::{BitVector, Gf2Error, RowBasis, SparseBitMatrix};

#[derive(Debug, Error)]
pub enum CodesError {
    #[error("cannot parse polynomial `{input}`: {message}")]
    Polynomial { input: String, message: String },
    #[error("line {line}: {message}")]
    CodeFile { line: usize, message: String },
    #[error("polynomials are defined over different rings ({0}x{1} vs {2}x{3})")]
    RingMismatch(usize, usize, usize, usize),
    #[error("enumeration over {n_cols} columns with subsets of size {max_columns} needs {combinations} combinations, above the limit of {limit}")]
    EnumerationTooLarge {
        n_cols: usize,
        max_columns: usize,
        combinations: u128,
        limit: u128,
    },
    #[error("gcd of the zero polynomial is undefined")]
    ZeroPolynomial,
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

/// An element of `F2[x,y] / (x^l - 1, y^m - 1)`, stored as its monomials.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BivariatePoly {
    l: usize,
    m: usize,
    monomials: BTreeSet<(usize, usize)>,
}

impl BivariatePoly {
    /// Builds a polynomial; exponents are reduced and repeated monomials cancel.
    pub fn new<I: IntoIterator<Item = (usize, usize)>>(l: usize, m: usize, monomials: I) -> Self {
        assert!(l > 0 && m > 0, "cyclic orders must be positive");
        let mut set = BTreeSet::new();
        for (a, b) in monomials {
            let key = (a % l, b % m);
            if !set.remove(&key) {
                set.insert(key);
            }
        }
        BivariatePoly {
            l,
            m,
            monomials: set,
        }
    }

    pub fn one(l: usize, m: usize) -> Self {
        Self::new(l, m, [(0, 0)])
    }

    /// Parses sums of `1`, `x`, `y`, `x^i`, `y^j`, `x^i*y^j` (also `x^i y^j`).
    pub fn parse(l: usize, m: usize, text: &str) -> Result<Self, CodesError> {
        let err = |message: &str| CodesError::Polynomial {
            input: text.to_string(),
            message: message.to_string(),
        };
        let mut monomials = Vec::new();
        for term in text.split('+') {
            let term = term.trim();
            if term.is_empty() {
                return Err(err("empty term"));
            }
            let (mut a, mut b) = (0usize, 0usize);
            for factor in term.split(|c: char| c == '*' || c.is_whitespace()) {
                let factor = factor.trim();
                if factor.is_empty() || factor == "1" {
                    continue;
                }
                let (var, exp) = match factor.split_once('^') {
                    Some((v, e)) => (
                        v.trim(),
                        e.trim()
                            .parse::<usize>()
                            .map_err(|_| err(&format!("bad exponent in `{factor}`")))?,
                    ),
                    None => (factor, 1),
                };
                match var {
                    "x" => a += exp,
                    "y" => b += exp,
                    _ => return Err(err(&format!("unknown variable in `{factor}`"))),
                }
            }
            monomials.push((a, b));
        }
        Ok(Self::new(l, m, monomials))
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn monomials(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.monomials.iter().copied()
    }

    pub fn weight(&self) -> usize {
        self.monomials.len()
    }

    /// The `(lm) x (lm)` matrix `Σ S_l^a ⊗ S_m^b`.
    ///
    /// `S_k` is the cyclic shift with `S[i][(i+1) mod k] = 1`; ring element
    /// `x^a y^b` maps to position `a·m + b`.
    pub fn circulant_matrix(&self) -> SparseBitMatrix {
        let (l, m) = (self.l, self.m);
        let n = l * m;
        let entries = (0..l).flat_map(|i| (0..m).map(move |j| (i, j))).flat_map(|(i, j)| {
            self.monomials
                .iter()
                .map(move |&(a, b)| (i * m + j, ((i + a) % l) * m + (j + b) % m))
        });
        SparseBitMatrix::from_entries(n, n, entries).expect("circulant entries are distinct")
    }
}

impl fmt::Display for BivariatePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.monomials.is_empty() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .monomials
            .iter()
            .map(|&(a, b)| match (a, b) {
                (0, 0) => "1".to_string(),
                (a, 0) => format!("x^{a}"),
                (0, b) => format!("y^{b}"),
                (a, b) => format!("x^{a}*y^{b}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

impl fmt::Debug for BivariatePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BivariatePoly[{}x{}]({})", self.l, self.m, self)
    }
}

/// A CSS code with logical bases of both types.
#[derive(Clone, Debug)]
pub struct CssCode {
    pub n: usize,
    pub k: usize,
    pub hx: SparseBitMatrix,
    pub hz: SparseBitMatrix,
    /// `K x N`, rows in `ker(H_X)` and independent modulo `rowspace(H_Z)`.
    pub lz: SparseBitMatrix,
    /// `K x N`, rows in `ker(H_Z)` and independent modulo `rowspace(H_X)`.
    /// These flag the logical action of faults detected by `H_X`.
    pub lx: SparseBitMatrix,
    /// Claimed distance, metadata only.
    pub distance: Option<usize>,
    pub provenance: String,
}

impl CssCode {
    pub fn from_checks(
        hx: SparseBitMatrix,
        hz: SparseBitMatrix,
        distance: Option<usize>,
        provenance: String,
    ) -> Result<Self, CodesError> {
        if hx.n_cols() != hz.n_cols() {
            return Err(Gf2Error::DimensionMismatch {
                what: "H_Z column count",
                expected: hx.n_cols(),
                found: hz.n_cols(),
            }
            .into());
        }
        let n = hx.n_cols();
        assert!(
            hx.mul(&hz.transpose())?.is_zero(),
            "H_X·H_Zᵀ must vanish for a CSS pair"
        );
        let k = n - hx.rank() - hz.rank();
        let lz = logical_basis(&hx, &hz);
        let lx = logical_basis(&hz, &hx);
        debug_assert_eq!(lz.n_rows(), k);
        debug_assert_eq!(lx.n_rows(), k);
        Ok(CssCode {
            n,
            k,
            hx,
            hz,
            lz,
            lx,
            distance,
            provenance,
        })
    }

    pub fn manifest(&self) -> CodeManifest {
        CodeManifest {
            n: self.n,
            k: self.k,
            d: self.distance,
            provenance: self.provenance.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct CodeManifest {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: Option<usize>,
    pub provenance: String,
}

/// `H_X = [A|B]`, `H_Z = [Bᵀ|Aᵀ]`.
pub fn build_bb_code(
    a: &BivariatePoly,
    b: &BivariatePoly,
    distance: Option<usize>,
) -> Result<CssCode, CodesError> {
    if a.l != b.l || a.m != b.m {
        return Err(CodesError::RingMismatch(a.l, a.m, b.l, b.m));
    }
    let am = a.circulant_matrix();
    let bm = b.circulant_matrix();
    let hx = am.hstack(&bm)?;
    let hz = bm.transpose().hstack(&am.transpose())?;
    let provenance = format!("bb l={} m={} a={} b={}", a.l, a.m, a, b);
    CssCode::from_checks(hx, hz, distance, provenance)
}

/// The `[[288,12,18]]` code with `A = x^3+y^2+y^7`, `B = y^3+x+x^2` over 12x12.
pub fn bb288() -> CssCode {
    let spec = CodeDescription::bb288();
    spec.build().expect("preset is valid")
}

/// Text description of a bivariate bicycle code:
///
/// ```text
/// 12 12
/// a: x^3 + y^2 + y^7
/// b: y^3 + x + x^2
/// d: 18
/// ```
///
/// The `d:` line is optional metadata; `#` starts a comment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeDescription {
    pub l: usize,
    pub m: usize,
    pub a: BivariatePoly,
    pub b: BivariatePoly,
    pub distance: Option<usize>,
}

impl CodeDescription {
    pub fn bb288() -> Self {
        "12 12\na: x^3 + y^2 + y^7\nb: y^3 + x + x^2\nd: 18\n"
            .parse()
            .expect("preset parses")
    }

    pub fn build(&self) -> Result<CssCode, CodesError> {
        build_bb_code(&self.a, &self.b, self.distance)
    }
}

impl FromStr for CodeDescription {
    type Err = CodesError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut dims: Option<(usize, usize)> = None;
        let mut a = None;
        let mut b = None;
        let mut distance = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| CodesError::CodeFile {
                line: line_no,
                message,
            };
            let Some((l, m)) = dims else {
                let parts: Vec<&str> = line.split_whitespace().collect();
                let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
                match parsed.as_deref() {
                    Some([l, m]) if *l > 0 && *m > 0 => dims = Some((*l, *m)),
                    _ => return Err(bad("first line must be `l m` with positive integers".into())),
                }
                continue;
            };
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| bad(format!("expected `key: value`, found `{line}`")))?;
            match key.trim() {
                "a" => a = Some(BivariatePoly::parse(l, m, value)?),
                "b" => b = Some(BivariatePoly::parse(l, m, value)?),
                "d" => {
                    distance = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|_| bad(format!("bad distance `{}`", value.trim())))?,
                    )
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        let (l, m) = dims.ok_or(CodesError::CodeFile {
            line: 0,
            message: "empty code description".into(),
        })?;
        let missing = |name: &str| CodesError::CodeFile {
            line: 0,
            message: format!("missing polynomial `{name}`"),
        };
        Ok(CodeDescription {
            l,
            m,
            a: a.ok_or_else(|| missing("a"))?,
            b: b.ok_or_else(|| missing("b"))?,
            distance,
        })
    }
}

/// Independent vectors of `ker(H_X)` spanning `ker(H_X) / rowspace(H_Z)`.
/// Swap the arguments for the other logical type.
pub fn logical_basis(hx: &SparseBitMatrix, hz: &SparseBitMatrix) -> SparseBitMatrix {
    let n = hx.n_cols();
    let mut span = RowBasis::new(n);
    for r in 0..hz.n_rows() {
        span.insert(&hz.row_vector(r));
    }
    let logicals: Vec<BitVector> = hx
        .kernel_basis()
        .into_iter()
        .filter(|v| span.insert(v))
        .collect();
    SparseBitMatrix::from_row_vectors(n, &logicals).expect("kernel vectors have length N")
}

/// `Σ_j C(wt(col_j), 2)`: weight-two syndrome patterns sitting on the check
/// neighbourhood of a single column.
pub fn count_weight2_syndrome_configs(h: &SparseBitMatrix) -> u64 {
    (0..h.n_cols())
        .map(|c| {
            let w = h.col_weight(c) as u64;
            w * w.saturating_sub(1) / 2
        })
        .sum()
}

/// Column subsets whose XOR is a low-weight vector in the column span.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SyndromeCodewordCensus {
    /// `(sorted column set, weight of its XOR)`.
    pub entries: Vec<(Vec<usize>, usize)>,
}

impl SyndromeCodewordCensus {
    /// Number of subsets with exactly `size` columns and XOR weight `weight`.
    pub fn count(&self, size: usize, weight: usize) -> usize {
        self.entries
            .iter()
            .filter(|(cols, w)| cols.len() == size && *w == weight)
            .count()
    }
}

/// Largest number of subsets the brute-force enumeration will visit.
pub const ENUMERATION_LIMIT: u128 = 25_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Enumerates all column subsets of size `1..=max_columns` whose XOR has
/// weight in `1..=max_weight`.
pub fn enumerate_low_weight_syndrome_codewords(
    h: &SparseBitMatrix,
    max_columns: usize,
    max_weight: usize,
) -> Result<SyndromeCodewordCensus, CodesError> {
    assert!(max_columns <= 3, "only subsets of up to three columns are supported");
    let n = h.n_cols();
    let combinations: u128 = (1..=max_columns).map(|k| binomial(n, k)).sum();
    if combinations > ENUMERATION_LIMIT {
        return Err(CodesError::EnumerationTooLarge {
            n_cols: n,
            max_columns,
            combinations,
            limit: ENUMERATION_LIMIT,
        });
    }
    let cols: Vec<BitVector> = (0..n).map(|c| h.column_vector(c)).collect();
    let keep = |w: usize| w >= 1 && w <= max_weight;
    let mut entries = Vec::new();
    for i in 0..n {
        let wi = cols[i].weight();
        if max_columns >= 1 && keep(wi) {
            entries.push((vec![i], wi));
        }
        if max_columns < 2 {
            continue;
        }
        for j in i + 1..n {
            let xij = cols[i].xor(&cols[j]);
            let wij = xij.weight();
            if keep(wij) {
                entries.push((vec![i, j], wij));
            }
            if max_columns < 3 {
                continue;
            }
            for (k, ck) in cols.iter().enumerate().skip(j + 1) {
                let w = xor_weight(&xij, ck);
                if keep(w) {
                    entries.push((vec![i, j, k], w));
                }
            }
        }
    }
    Ok(SyndromeCodewordCensus { entries })
}

fn xor_weight(a: &BitVector, b: &BitVector) -> usize {
    a.words()
        .iter()
        .zip(b.words())
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum()
}

/// Weight-two vectors `e_i + e_j` lying in the column span of `h`, as row
/// pairs `(i, j)` with `i < j`.
///
/// Each pair is tested for membership directly: after elimination, `e_i + e_j`
/// is in the span iff its transformed residue below the rank vanishes.
pub fn weight2_syndrome_codewords(h: &SparseBitMatrix) -> Vec<(usize, usize)> {
    let order: Vec<usize> = (0..h.n_cols()).collect();
    let elim = h.row_reduce(&order).expect("identity order");
    let rank = elim.rank();
    let m = h.n_rows();
    let residues: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            let t = elim
                .transform(&BitVector::from_indices(m, [i]))
                .expect("length matches");
            t.ones().filter(|&r| r >= rank).collect()
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if residues[i] == residues[j] {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Coefficient of the `p_d·p_s²` lower-bound term: every column triple whose
/// XOR is a weight-three syndrome codeword contributes `C(3,1)·C(3,2) = 9`.
pub fn config_b_coefficient(h: &SparseBitMatrix) -> Result<u64, CodesError> {
    let census = enumerate_low_weight_syndrome_codewords(h, 3, 3)?;
    Ok(9 * census.count(3, 3) as u64)
}

/// A univariate polynomial over GF(2); bit `i` is the coefficient of `x^i`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Poly {
    words: Vec<u64>,
}

impl Gf2Poly {
    pub fn zero() -> Self {
        Gf2Poly { words: Vec::new() }
    }

    pub fn from_exponents<I: IntoIterator<Item = usize>>(exps: I) -> Self {
        let mut p = Gf2Poly::zero();
        for e in exps {
            p.flip(e);
        }
        p.trim();
        p
    }

    fn flip(&mut self, e: usize) {
        if self.words.len() <= e / 64 {
            self.words.resize(e / 64 + 1, 0);
        }
        self.words[e / 64] ^= 1 << (e % 64);
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        let last = *self.words.last()?;
        Some((self.words.len() - 1) * 64 + 63 - last.leading_zeros() as usize)
    }

    pub fn coefficient(&self, e: usize) -> bool {
        self.words.get(e / 64).is_some_and(|w| (w >> (e % 64)) & 1 == 1)
    }

    pub fn exponents(&self) -> Vec<usize> {
        (0..=self.degree().map_or(0, |d| d + 1))
            .filter(|&e| self.coefficient(e))
            .collect()
    }

    fn shifted_xor(&mut self, other: &Gf2Poly, shift: usize) {
        for e in other.exponents() {
            self.flip(e + shift);
        }
        self.trim();
    }

    pub fn mul(&self, other: &Gf2Poly) -> Gf2Poly {
        let mut out = Gf2Poly::zero();
        for e in self.exponents() {
            out.shifted_xor(other, e);
        }
        out
    }

    /// Remainder of division by a nonzero `divisor`.
    pub fn rem(&self, divisor: &Gf2Poly) -> Result<Gf2Poly, CodesError> {
        let dd = divisor.degree().ok_or(CodesError::ZeroPolynomial)?;
        let mut r = self.clone();
        while let Some(rd) = r.degree() {
            if rd < dd {
                break;
            }
            r.shifted_xor(divisor, rd - dd);
        }
        Ok(r)
    }

    pub fn divides(&self, other: &Gf2Poly) -> Result<bool, CodesError> {
        Ok(other.rem(self)?.is_zero())
    }
}

impl fmt::Debug for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Gf2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .exponents()
            .into_iter()
            .map(|e| match e {
                0 => "1".to_string(),
                1 => "x".to_string(),
                e => format!("x^{e}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

impl FromStr for Gf2Poly {
    type Err = CodesError;

    /// Parses `1 + x^15 + x^20` style sums.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let p = BivariatePoly::parse(usize::MAX, usize::MAX, s)?;
        if p.monomials().any(|(_, b)| b != 0) {
            return Err(CodesError::Polynomial {
                input: s.to_string(),
                message: "only the variable x is allowed".into(),
            });
        }
        Ok(Gf2Poly::from_exponents(p.monomials().map(|(a, _)| a)))
    }
}

/// Generator of the ideal `(a, b)` in `F2[x]/(x^n - 1)`: `gcd(a, b, x^n + 1)`.
pub fn cyclic_gcd_gf2(a: &Gf2Poly, b: &Gf2Poly, n: usize) -> Result<Gf2Poly, CodesError> {
    let modulus = Gf2Poly::from_exponents([0, n]);
    poly_gcd_gf2(&poly_gcd_gf2(a, b)?, &modulus)
}

/// Euclidean gcd over GF(2)[x]; both inputs must be nonzero.
pub fn poly_gcd_gf2(a: &Gf2Poly, b: &Gf2Poly) -> Result<Gf2Poly, CodesError> {
    if a.is_zero() || b.is_zero() {
        return Err(CodesError::ZeroPolynomial);
    }
    let (mut x, mut y) = (a.clone(), b.clone());
    while !y.is_zero() {
        let r = x.rem(&y)?;
        x = y;
        y = r;
    }
    Ok(x)
}
