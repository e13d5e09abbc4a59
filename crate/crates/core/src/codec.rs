//! HSRC encoding, decoding and two-fragment repair.
//!
//! An object is read as a stream of m-bit symbols (most significant bit
//! first), zero-padded to whole rows of `k` symbols. Row `j` is the
//! coefficient vector of the linearized polynomial
//! `p(X) = sum_i o_i X^(2^(i-1))`, evaluated at every point `alpha_1..alpha_n`.
//! Fragment `i` collects the `i`-th evaluation of every row, so all
//! fragments have the same number of chunks and row `j` of any three
//! fragments obeys the same xor relation as their evaluation points.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::sync::Arc;

use itertools::Itertools;
use thiserror::Error;

use crate::gf::{rank_over_f2, Field, FieldElement, FieldError};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid code parameters: {0}")]
    InvalidParams(String),
    #[error("cannot encode an empty object")]
    EmptyObject,
    #[error("evaluation point must be nonzero")]
    ZeroAlpha,
    #[error("expected {expected} symbols, got {got}")]
    SymbolCount { expected: usize, got: usize },
    #[error("node index {0} outside 1..=n")]
    IndexOutOfRange(usize),
    #[error("alpha_{a} + alpha_{b} != alpha_{target}")]
    TripletMismatch { a: usize, b: usize, target: usize },
    #[error("fragments disagree: {0}")]
    Inconsistent(String),
    #[error("need {need} fragments, have {have}")]
    InsufficientFragments { have: usize, need: usize },
    #[error("available fragments span rank {rank} < k = {k}")]
    DependentFragments { rank: usize, k: usize },
    #[error("malformed fragment file: {0}")]
    Format(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CodecError>;

/// Code configuration `<n, k, m>` plus the evaluation points.
#[derive(Debug, Clone)]
pub struct CodeParams {
    n: usize,
    k: usize,
    field: Arc<Field>,
    alphas: Vec<FieldElement>,
    /// `powers[i][c] = alpha_{i+1}^(2^c)` for `c < k`.
    powers: Vec<Vec<FieldElement>>,
    index_of: HashMap<FieldElement, usize>,
}

impl PartialEq for CodeParams {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.k == other.k && self.field == other.field && self.alphas == other.alphas
    }
}

impl CodeParams {
    /// `<n, k>` over GF(2^m) with the default modulus and `alpha_i = i`.
    pub fn new(n: usize, k: usize, m: u32) -> Result<Self> {
        let field = Field::with_default_modulus(m)?;
        Self::with_field(n, k, Arc::new(field))
    }

    /// Default evaluation points (`alpha_i` is the binary expansion of `i`)
    /// over a caller-supplied field.
    pub fn with_field(n: usize, k: usize, field: Arc<Field>) -> Result<Self> {
        if n as u64 >= field.order() {
            return Err(CodecError::InvalidParams(format!(
                "n = {n} exceeds 2^{} - 1",
                field.degree()
            )));
        }
        let alphas = (1..=n as u32).map(FieldElement::from_bits).collect();
        Self::with_alphas(n, k, field, alphas)
    }

    pub fn with_alphas(n: usize, k: usize, field: Arc<Field>, alphas: Vec<FieldElement>) -> Result<Self> {
        let invalid = |msg: String| Err(CodecError::InvalidParams(msg));
        if !(1 < k && k < n) {
            return invalid(format!("need 1 < k < n, got k = {k}, n = {n}"));
        }
        if n as u64 > field.order() - 1 {
            return invalid(format!("n = {n} exceeds 2^{} - 1", field.degree()));
        }
        if alphas.len() != n {
            return invalid(format!("{} evaluation points for n = {n}", alphas.len()));
        }
        let mut index_of = HashMap::with_capacity(n);
        for (pos, &a) in alphas.iter().enumerate() {
            if a.is_zero() {
                return Err(CodecError::ZeroAlpha);
            }
            if !field.contains(a) {
                return invalid(format!("alpha_{} = {a} outside the field", pos + 1));
            }
            if index_of.insert(a, pos + 1).is_some() {
                return invalid(format!("alpha_{} = {a} repeats an earlier point", pos + 1));
            }
        }
        let rank = rank_over_f2(&alphas);
        if rank < k {
            return invalid(format!("evaluation points span rank {rank} < k = {k}"));
        }
        let powers = alphas
            .iter()
            .map(|&a| (0..k as u32).map(|c| field.frob_pow(a, c)).collect())
            .collect();
        Ok(CodeParams {
            n,
            k,
            field,
            alphas,
            powers,
            index_of,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> u32 {
        self.field.degree()
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn field_arc(&self) -> Arc<Field> {
        Arc::clone(&self.field)
    }

    pub fn alphas(&self) -> &[FieldElement] {
        &self.alphas
    }

    /// Evaluation point of node `i` (1-based).
    pub fn alpha(&self, i: usize) -> FieldElement {
        self.alphas[i - 1]
    }

    /// Node whose evaluation point equals `a`.
    pub fn index_of(&self, a: FieldElement) -> Option<usize> {
        self.index_of.get(&a).copied()
    }

    /// True when the default `alpha_i = i` convention is in use.
    pub fn uses_index_alphas(&self) -> bool {
        self.alphas
            .iter()
            .enumerate()
            .all(|(pos, a)| a.bits() as usize == pos + 1)
    }

    /// Bits carried by one row of `k` symbols.
    pub fn row_bits(&self) -> u64 {
        self.k as u64 * self.m() as u64
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n {
            return Err(CodecError::IndexOutOfRange(i));
        }
        Ok(())
    }

    fn eval_node(&self, i: usize, row: &[FieldElement]) -> FieldElement {
        let f = &self.field;
        row.iter()
            .zip(&self.powers[i - 1])
            .fold(FieldElement::ZERO, |acc, (&o, &p)| acc + f.mul(o, p))
    }
}

/// `p(alpha) = sum_i o_i alpha^(2^(i-1))` for one row of `k` symbols.
pub fn eval_poly(o_symbols: &[FieldElement], alpha: FieldElement, params: &CodeParams) -> Result<FieldElement> {
    if o_symbols.len() != params.k {
        return Err(CodecError::SymbolCount {
            expected: params.k,
            got: o_symbols.len(),
        });
    }
    if alpha.is_zero() {
        return Err(CodecError::ZeroAlpha);
    }
    let f = params.field();
    Ok(o_symbols
        .iter()
        .enumerate()
        .fold(FieldElement::ZERO, |acc, (c, &o)| acc + f.mul(o, f.frob_pow(alpha, c as u32))))
}

/// A data object of `bit_len` bits, stored most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataObject {
    payload: Vec<u8>,
    bit_len: u64,
}

impl DataObject {
    /// Bits past `bit_len` in the last byte are cleared.
    pub fn new(mut payload: Vec<u8>, bit_len: u64) -> Result<Self> {
        let needed = bit_len.div_ceil(8) as usize;
        if payload.len() < needed {
            return Err(CodecError::Inconsistent(format!(
                "{bit_len} bits need {needed} bytes, payload has {}",
                payload.len()
            )));
        }
        payload.truncate(needed);
        let tail = (bit_len % 8) as u32;
        if tail != 0 {
            let last = payload.last_mut().expect("nonempty when tail bits exist");
            *last &= !(0xffu8 >> tail);
        }
        Ok(DataObject { payload, bit_len })
    }

    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        let payload = bytes.into();
        let bit_len = payload.len() as u64 * 8;
        DataObject { payload, bit_len }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.payload
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn is_empty(&self) -> bool {
        self.bit_len == 0
    }

    /// First `bits` bits of the object.
    pub fn prefix(&self, bits: u64) -> DataObject {
        let bits = bits.min(self.bit_len);
        DataObject::new(self.payload.clone(), bits).expect("prefix fits in payload")
    }

    /// Rows of `k` m-bit symbols after zero padding.
    pub fn rows(&self, params: &CodeParams) -> usize {
        self.bit_len.div_ceil(params.row_bits()) as usize
    }

    /// Symbol stream padded to a whole number of rows.
    pub fn symbols(&self, params: &CodeParams) -> Vec<FieldElement> {
        let m = params.m();
        let total = self.rows(params) * params.k;
        let mut out = Vec::with_capacity(total);
        let mut bit = 0u64;
        for _ in 0..total {
            let mut v = 0u32;
            for _ in 0..m {
                v <<= 1;
                if bit < self.bit_len {
                    let byte = self.payload[(bit / 8) as usize];
                    v |= ((byte >> (7 - bit % 8)) & 1) as u32;
                }
                bit += 1;
            }
            out.push(FieldElement::from_bits(v));
        }
        out
    }

    /// Inverse of [`DataObject::symbols`]: packs symbols and keeps `bit_len` bits.
    pub fn from_symbols(symbols: &[FieldElement], m: u32, bit_len: u64) -> Result<Self> {
        if bit_len > symbols.len() as u64 * m as u64 {
            return Err(CodecError::Inconsistent(format!(
                "{} symbols cannot hold {bit_len} bits",
                symbols.len()
            )));
        }
        let mut payload = vec![0u8; bit_len.div_ceil(8) as usize];
        let mut bit = 0u64;
        'outer: for s in symbols {
            for shift in (0..m).rev() {
                if bit >= bit_len {
                    break 'outer;
                }
                if s.bits() >> shift & 1 == 1 {
                    payload[(bit / 8) as usize] |= 0x80 >> (bit % 8);
                }
                bit += 1;
            }
        }
        DataObject::new(payload, bit_len)
    }
}

/// The chunks stored by one node: `chunks[j]` is row `j`'s evaluation at `alpha_index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub index: usize,
    pub object_bits: u64,
    pub chunks: Vec<FieldElement>,
}

impl Fragment {
    pub fn rows(&self) -> usize {
        self.chunks.len()
    }

    /// The first `rows` chunks, relabelled as a fragment of a shorter object.
    pub fn truncated(&self, rows: usize, params: &CodeParams) -> Fragment {
        let rows = rows.min(self.chunks.len());
        Fragment {
            index: self.index,
            object_bits: (rows as u64 * params.row_bits()).min(self.object_bits),
            chunks: self.chunks[..rows].to_vec(),
        }
    }
}

/// All `n` fragments of one object.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentSet {
    pub params: CodeParams,
    pub object_bits: u64,
    pub fragments: Vec<Fragment>,
}

impl FragmentSet {
    /// Fragment of node `i` (1-based).
    pub fn fragment(&self, i: usize) -> &Fragment {
        &self.fragments[i - 1]
    }

    pub fn rows(&self) -> usize {
        self.fragments.first().map_or(0, Fragment::rows)
    }

    fn from_rows(params: &CodeParams, object_bits: u64, rows: &[Vec<FieldElement>]) -> FragmentSet {
        let fragments = (1..=params.n)
            .map(|i| Fragment {
                index: i,
                object_bits,
                chunks: rows.iter().map(|r| r[i - 1]).collect(),
            })
            .collect();
        FragmentSet {
            params: params.clone(),
            object_bits,
            fragments,
        }
    }
}

/// Encodes one row of `k` symbols into its `n` evaluations. Rows are
/// independent, so a source can dispatch each as soon as it has `k*m` bits.
pub fn encode_stream(row: &[FieldElement], params: &CodeParams) -> Result<Vec<FieldElement>> {
    if row.len() != params.k {
        return Err(CodecError::SymbolCount {
            expected: params.k,
            got: row.len(),
        });
    }
    Ok((1..=params.n).map(|i| params.eval_node(i, row)).collect())
}

/// Evaluates every row at every point and transposes into per-node fragments.
pub fn encode(obj: &DataObject, params: &CodeParams) -> Result<FragmentSet> {
    if obj.is_empty() {
        return Err(CodecError::EmptyObject);
    }
    let symbols = obj.symbols(params);
    let rows: Vec<Vec<FieldElement>> = symbols
        .chunks(params.k)
        .map(|row| encode_stream(row, params))
        .collect::<Result<_>>()?;
    Ok(FragmentSet::from_rows(params, obj.bit_len(), &rows))
}

/// How the source produces one fragment when it evaluates only on a basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Derivation {
    /// Polynomial evaluation at this node's point.
    Evaluate(usize),
    /// `r_node = r_a + r_b` from two fragments produced earlier.
    Pair { node: usize, a: usize, b: usize },
    /// Xor of several basis fragments, used when no earlier pair fits.
    Sum { node: usize, terms: Vec<usize> },
}

/// Production order for [`encode_via_basis`].
///
/// The evaluated nodes are the lexicographically first maximal independent
/// subset of the evaluation points. The remaining nodes follow in increasing
/// index order, each from the smallest pair `(a, b)`, `a < b`, of fragments
/// already produced.
pub fn basis_plan(params: &CodeParams) -> Vec<Derivation> {
    // Greedy independent set, tracking each reduced vector's combination of
    // basis members so any point can be expressed as a basis sum.
    let mut reduced: Vec<(u32, u64)> = Vec::new();
    let mut basis: Vec<usize> = Vec::new();
    for i in 1..=params.n {
        let (rest, combo) = reduce(&reduced, params.alpha(i).bits());
        if rest != 0 {
            reduced.push((rest, combo ^ 1u64 << basis.len()));
            basis.push(i);
        }
    }
    let mut plan: Vec<Derivation> = basis.iter().map(|&i| Derivation::Evaluate(i)).collect();
    let mut produced: BTreeSet<usize> = basis.iter().copied().collect();
    for node in 1..=params.n {
        if produced.contains(&node) {
            continue;
        }
        let target = params.alpha(node);
        let pair = produced.iter().find_map(|&a| {
            let b = params.index_of(target + params.alpha(a))?;
            (b > a && produced.contains(&b)).then_some((a, b))
        });
        let step = match pair {
            Some((a, b)) => Derivation::Pair { node, a, b },
            None => {
                let (rest, combo) = reduce(&reduced, target.bits());
                debug_assert_eq!(rest, 0, "every point lies in the span of the basis");
                let terms = (0..basis.len())
                    .filter(|&t| combo >> t & 1 == 1)
                    .map(|t| basis[t])
                    .collect();
                Derivation::Sum { node, terms }
            }
        };
        plan.push(step);
        produced.insert(node);
    }
    plan
}

/// Reduces `v` against the echelon rows, returning the remainder and the
/// xor-combination of basis members consumed.
fn reduce(rows: &[(u32, u64)], mut v: u32) -> (u32, u64) {
    let mut combo = 0u64;
    loop {
        let Some(&(r, c)) = rows
            .iter()
            .find(|(r, _)| v != 0 && 31 - r.leading_zeros() == 31 - v.leading_zeros())
        else {
            return (v, combo);
        };
        v ^= r;
        combo ^= c;
    }
}

/// Same output as [`encode`], but evaluates the polynomial only on a basis of
/// the evaluation points and fills in the other fragments by xor.
pub fn encode_via_basis(obj: &DataObject, params: &CodeParams) -> Result<FragmentSet> {
    if obj.is_empty() {
        return Err(CodecError::EmptyObject);
    }
    let symbols = obj.symbols(params);
    let rows = symbols.len() / params.k;
    let mut columns: Vec<Vec<FieldElement>> = vec![Vec::new(); params.n + 1];
    let xor_cols = |x: &[FieldElement], y: &[FieldElement]| -> Vec<FieldElement> {
        x.iter().zip(y).map(|(&p, &q)| p + q).collect()
    };
    for step in basis_plan(params) {
        match step {
            Derivation::Evaluate(i) => {
                columns[i] = symbols
                    .chunks(params.k)
                    .map(|row| params.eval_node(i, row))
                    .collect();
            }
            Derivation::Pair { node, a, b } => {
                columns[node] = xor_cols(&columns[a], &columns[b]);
            }
            Derivation::Sum { node, terms } => {
                let mut acc = vec![FieldElement::ZERO; rows];
                for t in terms {
                    acc = xor_cols(&acc, &columns[t]);
                }
                columns[node] = acc;
            }
        }
    }
    let fragments = (1..=params.n)
        .map(|i| Fragment {
            index: i,
            object_bits: obj.bit_len(),
            chunks: std::mem::take(&mut columns[i]),
        })
        .collect();
    Ok(FragmentSet {
        params: params.clone(),
        object_bits: obj.bit_len(),
        fragments,
    })
}

/// Rebuilds fragment `target` as the chunk-wise xor of two fragments whose
/// evaluation points sum to `alpha_target`.
pub fn repair(frag_a: &Fragment, frag_b: &Fragment, target: usize, params: &CodeParams) -> Result<Fragment> {
    for i in [frag_a.index, frag_b.index, target] {
        params.check_index(i)?;
    }
    if params.alpha(frag_a.index) + params.alpha(frag_b.index) != params.alpha(target) {
        return Err(CodecError::TripletMismatch {
            a: frag_a.index,
            b: frag_b.index,
            target,
        });
    }
    if frag_a.chunks.len() != frag_b.chunks.len() || frag_a.object_bits != frag_b.object_bits {
        return Err(CodecError::Inconsistent(format!(
            "fragments {} and {} describe different objects",
            frag_a.index, frag_b.index
        )));
    }
    Ok(Fragment {
        index: target,
        object_bits: frag_a.object_bits,
        chunks: frag_a
            .chunks
            .iter()
            .zip(&frag_b.chunks)
            .map(|(&x, &y)| x + y)
            .collect(),
    })
}

/// Gauss-Jordan inverse over GF(2^m); `None` when singular.
fn invert(field: &Field, mut a: Vec<Vec<FieldElement>>) -> Option<Vec<Vec<FieldElement>>> {
    let size = a.len();
    let mut inv: Vec<Vec<FieldElement>> = (0..size)
        .map(|r| {
            (0..size)
                .map(|c| if r == c { FieldElement::ONE } else { FieldElement::ZERO })
                .collect()
        })
        .collect();
    for col in 0..size {
        let pivot = (col..size).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = field.inv(a[col][col])?;
        for c in 0..size {
            a[col][c] = field.mul(a[col][c], scale);
            inv[col][c] = field.mul(inv[col][c], scale);
        }
        for r in 0..size {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col];
            for c in 0..size {
                let (ac, ic) = (a[col][c], inv[col][c]);
                a[r][c] += field.mul(factor, ac);
                inv[r][c] += field.mul(factor, ic);
            }
        }
    }
    Some(inv)
}

/// Recovers the object from any fragments whose points have rank `k`.
///
/// Picks the lexicographically smallest independent `k`-subset of the
/// available node indices, inverts its Moore matrix
/// `A[j][c] = alpha_j^(2^c)` once and applies it to every chunk row.
pub fn decode<'a>(available: impl IntoIterator<Item = &'a Fragment>, params: &CodeParams) -> Result<DataObject> {
    let mut frags: Vec<&Fragment> = available.into_iter().collect();
    frags.sort_by_key(|f| f.index);
    for w in frags.windows(2) {
        if w[0].index == w[1].index {
            return Err(CodecError::Inconsistent(format!("node {} given twice", w[0].index)));
        }
    }
    for f in &frags {
        params.check_index(f.index)?;
    }
    if frags.len() < params.k {
        return Err(CodecError::InsufficientFragments {
            have: frags.len(),
            need: params.k,
        });
    }
    let object_bits = frags[0].object_bits;
    let rows = object_bits.div_ceil(params.row_bits()) as usize;
    if let Some(bad) = frags
        .iter()
        .find(|f| f.object_bits != object_bits || f.chunks.len() != rows)
    {
        return Err(CodecError::Inconsistent(format!(
            "fragment {} has {} chunks for {} bits, expected {rows} chunks for {object_bits} bits",
            bad.index,
            bad.chunks.len(),
            bad.object_bits
        )));
    }
    let chosen = frags
        .iter()
        .copied()
        .combinations(params.k)
        .find(|combo| {
            let points: Vec<FieldElement> = combo.iter().map(|f| params.alpha(f.index)).collect();
            rank_over_f2(&points) == params.k
        })
        .ok_or_else(|| {
            let points: Vec<FieldElement> = frags.iter().map(|f| params.alpha(f.index)).collect();
            CodecError::DependentFragments {
                rank: rank_over_f2(&points),
                k: params.k,
            }
        })?;
    let moore = chosen
        .iter()
        .map(|f| params.powers[f.index - 1].clone())
        .collect();
    let field = params.field();
    let inverse = invert(field, moore).ok_or_else(|| CodecError::DependentFragments {
        rank: params.k - 1,
        k: params.k,
    })?;
    let mut symbols = Vec::with_capacity(rows * params.k);
    for row in 0..rows {
        for coeffs in &inverse {
            let o = coeffs
                .iter()
                .zip(&chosen)
                .fold(FieldElement::ZERO, |acc, (&c, f)| acc + field.mul(c, f.chunks[row]));
            symbols.push(o);
        }
    }
    DataObject::from_symbols(&symbols, params.m(), object_bits)
}

pub const FRAGMENT_MAGIC: &[u8; 5] = b"HSRC1";
pub const FRAGMENT_HEADER_LEN: usize = 5 + 1 + 8 + 4 + 4 + 4 + 8 + 8;

/// Header of a per-node fragment file. All integers are big-endian.
///
/// | field        | bytes |
/// |--------------|-------|
/// | magic HSRC1  | 5     |
/// | m            | 1     |
/// | modulus      | 8     |
/// | n            | 4     |
/// | k            | 4     |
/// | node_index   | 4     |
/// | u (rows)     | 8     |
/// | M (bits)     | 8     |
///
/// The body is `u` elements of `ceil(m/8)` bytes each. Evaluation points are
/// implied: `alpha_i = i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FragmentHeader {
    pub m: u32,
    pub modulus: u64,
    pub n: u32,
    pub k: u32,
    pub node_index: u32,
    pub rows: u64,
    pub object_bits: u64,
}

impl FragmentHeader {
    pub fn code_params(&self) -> Result<CodeParams> {
        let field = Field::new(self.m, self.modulus)?;
        CodeParams::with_field(self.n as usize, self.k as usize, Arc::new(field))
    }
}

pub fn fragment_file_name(index: usize) -> String {
    format!("fragment_{index:04}.hsrc")
}

pub fn write_fragment<W: Write>(mut w: W, fragment: &Fragment, params: &CodeParams) -> Result<()> {
    if !params.uses_index_alphas() {
        return Err(CodecError::Format(
            "fragment files only describe codes with alpha_i = i".into(),
        ));
    }
    let mut buf = Vec::with_capacity(FRAGMENT_HEADER_LEN + fragment.chunks.len() * 4);
    buf.extend_from_slice(FRAGMENT_MAGIC);
    buf.push(params.m() as u8);
    buf.extend_from_slice(&params.field().modulus().to_be_bytes());
    buf.extend_from_slice(&(params.n() as u32).to_be_bytes());
    buf.extend_from_slice(&(params.k() as u32).to_be_bytes());
    buf.extend_from_slice(&(fragment.index as u32).to_be_bytes());
    buf.extend_from_slice(&(fragment.chunks.len() as u64).to_be_bytes());
    buf.extend_from_slice(&fragment.object_bits.to_be_bytes());
    let width = params.field().element_bytes();
    for c in &fragment.chunks {
        buf.extend_from_slice(&c.bits().to_be_bytes()[4 - width..]);
    }
    w.write_all(&buf)?;
    Ok(())
}

fn be_u64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0u64, |acc, &b| acc << 8 | b as u64)
}

pub fn read_fragment<R: Read>(mut r: R) -> Result<(FragmentHeader, Fragment)> {
    let mut head = [0u8; FRAGMENT_HEADER_LEN];
    r.read_exact(&mut head)
        .map_err(|e| CodecError::Format(format!("short header: {e}")))?;
    if &head[..5] != FRAGMENT_MAGIC {
        return Err(CodecError::Format("bad magic".into()));
    }
    let header = FragmentHeader {
        m: head[5] as u32,
        modulus: be_u64(&head[6..14]),
        n: be_u64(&head[14..18]) as u32,
        k: be_u64(&head[18..22]) as u32,
        node_index: be_u64(&head[22..26]) as u32,
        rows: be_u64(&head[26..34]),
        object_bits: be_u64(&head[34..42]),
    };
    if !(2..=32).contains(&header.m) {
        return Err(CodecError::Format(format!("m = {} unsupported", header.m)));
    }
    let width = header.m.div_ceil(8) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() as u64 != header.rows * width as u64 {
        return Err(CodecError::Format(format!(
            "body has {} bytes, header promises {} elements of {width} bytes",
            body.len(),
            header.rows
        )));
    }
    let mask = if header.m == 32 { u32::MAX } else { (1u32 << header.m) - 1 };
    let chunks = body
        .chunks(width)
        .map(|b| {
            let v = be_u64(b) as u32;
            if v & !mask != 0 {
                Err(CodecError::Format(format!("element {v:#x} exceeds {} bits", header.m)))
            } else {
                Ok(FieldElement::from_bits(v))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let fragment = Fragment {
        index: header.node_index as usize,
        object_bits: header.object_bits,
        chunks,
    };
    Ok((header, fragment))
}
