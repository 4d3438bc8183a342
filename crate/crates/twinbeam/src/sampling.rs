//! Scrambled block Hadamard sensing matrices.
//!
//! The full N x N operator is W = P_out * diag(H_B, ..., H_B) * P_in: a
//! block-diagonal stack of Sylvester Hadamard matrices conjugated by
//! permutations, so W W^T = B I exactly in integer arithmetic. P_in first
//! shuffles columns independently inside consecutive windows (the semilocal
//! randomization; the published construction is not fully specified, this
//! is one concrete reading), then applies a fixed perfect-shuffle interleave
//! that spreads window neighbors across distinct blocks. P_out shuffles the
//! rows. A sensing matrix is a subset of W's rows; each +/-1 row maps to a
//! pair of complementary binary micromirror masks read out differentially.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::BinaryMask;

fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// Sylvester Hadamard entry: sign of popcount(i AND j).
#[inline]
fn hadamard_sign(i: usize, j: usize) -> i8 {
    if (i & j).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Dense Sylvester-construction Hadamard matrix.
#[derive(Debug, Clone)]
pub struct HadamardMatrix {
    order: usize,
}

impl HadamardMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entry(&self, i: usize, j: usize) -> i8 {
        hadamard_sign(i, j)
    }

    pub fn row(&self, i: usize) -> Vec<i8> {
        (0..self.order).map(|j| hadamard_sign(i, j)).collect()
    }
}

/// Builds the Sylvester Hadamard matrix of the given power-of-two order.
pub fn hadamard(order: usize) -> Result<HadamardMatrix> {
    if !is_power_of_two(order) {
        return Err(Error::NotPowerOfTwo(order));
    }
    Ok(HadamardMatrix { order })
}

/// In-place fast Walsh-Hadamard transform (Sylvester order, unnormalized):
/// replaces `v` with H v. Length must be a power of two.
pub fn fwht_in_place<T>(v: &mut [T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    debug_assert!(is_power_of_two(v.len()));
    let mut stride = 1;
    while stride < v.len() {
        for start in (0..v.len()).step_by(stride * 2) {
            for k in start..start + stride {
                let a = v[k];
                let b = v[k + stride];
                v[k] = a + b;
                v[k + stride] = a - b;
            }
        }
        stride *= 2;
    }
}

/// Options for the scrambled block Hadamard construction.
#[derive(Debug, Clone)]
pub struct SbhOptions {
    pub block_size: usize,
    /// Width of the local column-shuffle windows.
    pub window: usize,
    pub seed: u64,
    /// Disabling the row permutation leaves W = diag(H_B, ...) * P_in;
    /// with window 1 and a single block this degenerates to H_B itself.
    pub row_permutation: bool,
}

/// The full N x N scrambled block Hadamard operator W.
#[derive(Debug, Clone)]
pub struct SbhOperator {
    n: usize,
    block_size: usize,
    window: usize,
    seed: u64,
    /// x_permuted[k] = x[col_perm[k]]
    col_perm: Vec<usize>,
    col_perm_inv: Vec<usize>,
    /// y[row_perm[k]] = (block transform output)[k]
    row_perm: Vec<usize>,
    row_perm_inv: Vec<usize>,
}

/// Builds W with the default window (= block size) and row permutation on.
pub fn scrambled_block_hadamard(
    n: usize,
    block_size: usize,
    seed: u64,
    window: usize,
) -> Result<SbhOperator> {
    scrambled_block_hadamard_with(
        n,
        &SbhOptions {
            block_size,
            window,
            seed,
            row_permutation: true,
        },
    )
}

pub fn scrambled_block_hadamard_with(n: usize, opts: &SbhOptions) -> Result<SbhOperator> {
    let b = opts.block_size;
    if !is_power_of_two(b) {
        return Err(Error::NotPowerOfTwo(b));
    }
    if n == 0 || n % b != 0 {
        return Err(Error::invalid(format!(
            "block size {b} does not divide N = {n}"
        )));
    }
    if opts.window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    let blocks = n / b;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // local window shuffles
    let mut windowed: Vec<usize> = (0..n).collect();
    for chunk in windowed.chunks_mut(opts.window) {
        chunk.shuffle(&mut rng);
    }
    // fixed perfect-shuffle interleave: destination k draws from source
    // (k mod B) * blocks + k / B, sending window neighbors to distinct
    // blocks whenever the window fits the block count
    let mut col_perm = vec![0usize; n];
    for (k, slot) in col_perm.iter_mut().enumerate() {
        let src = (k % b) * blocks + k / b;
        *slot = windowed[src];
    }

    let mut row_perm: Vec<usize> = (0..n).collect();
    if opts.row_permutation {
        row_perm.shuffle(&mut rng);
    }

    let mut col_perm_inv = vec![0usize; n];
    for (k, &j) in col_perm.iter().enumerate() {
        col_perm_inv[j] = k;
    }
    let mut row_perm_inv = vec![0usize; n];
    for (k, &i) in row_perm.iter().enumerate() {
        row_perm_inv[i] = k;
    }

    Ok(SbhOperator {
        n,
        block_size: b,
        window: opts.window,
        seed: opts.seed,
        col_perm,
        col_perm_inv,
        row_perm,
        row_perm_inv,
    })
}

impl SbhOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Entry W[i][j] in {-1, 0, +1}; zero when j falls outside row i's block.
    pub fn entry(&self, i: usize, j: usize) -> i8 {
        let k_row = self.row_perm_inv[i];
        let k_col = self.col_perm_inv[j];
        if k_row / self.block_size != k_col / self.block_size {
            return 0;
        }
        hadamard_sign(k_row % self.block_size, k_col % self.block_size)
    }

    /// Row i of W as a dense +/-1/0 vector.
    pub fn row(&self, i: usize) -> Vec<i8> {
        let b = self.block_size;
        let k_row = self.row_perm_inv[i];
        let block = k_row / b;
        let r = k_row % b;
        let mut out = vec![0i8; self.n];
        for c in 0..b {
            let j = self.col_perm[block * b + c];
            out[j] = hadamard_sign(r, c);
        }
        out
    }

    /// y = W x via the fast per-block transform, exact in integers.
    pub fn apply_i64(&self, x: &[i64]) -> Vec<i64> {
        assert_eq!(x.len(), self.n);
        let mut t: Vec<i64> = self.col_perm.iter().map(|&j| x[j]).collect();
        for block in t.chunks_mut(self.block_size) {
            fwht_in_place(block);
        }
        let mut y = vec![0i64; self.n];
        for (k, &i) in self.row_perm.iter().enumerate() {
            y[i] = t[k];
        }
        y
    }

    pub fn apply_f64(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut t: Vec<f64> = self.col_perm.iter().map(|&j| x[j]).collect();
        for block in t.chunks_mut(self.block_size) {
            fwht_in_place(block);
        }
        let mut y = vec![0.0; self.n];
        for (k, &i) in self.row_perm.iter().enumerate() {
            y[i] = t[k];
        }
        y
    }

    /// x = W^T y; the block core is symmetric so only the permutations flip.
    pub fn apply_transpose_f64(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n);
        let mut t: Vec<f64> = self.row_perm.iter().map(|&i| y[i]).collect();
        for block in t.chunks_mut(self.block_size) {
            fwht_in_place(block);
        }
        let mut x = vec![0.0; self.n];
        for (k, &j) in self.col_perm.iter().enumerate() {
            x[j] = t[k];
        }
        x
    }
}

/// M rows of a scrambled block Hadamard operator, with the complementary
/// mask-pair view used for differential acquisition.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    m: usize,
    n: usize,
    block_size: usize,
    scramble_seed: u64,
    window: usize,
    row_ids: Vec<usize>,
    /// Row-major M x N entries in {+1, 0, -1}; each row carries exactly
    /// `block_size` nonzeros, which is what makes A A^T = B I exact.
    rows: Vec<i8>,
    op: Option<SbhOperator>,
}

impl SensingMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn scramble_seed(&self) -> u64 {
        self.scramble_seed
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    /// y = A x.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        if let Some(op) = &self.op {
            let full = op.apply_f64(x);
            self.row_ids.iter().map(|&i| full[i]).collect()
        } else {
            (0..self.m)
                .map(|i| {
                    self.row(i)
                        .iter()
                        .zip(x)
                        .map(|(&e, &v)| e as f64 * v)
                        .sum()
                })
                .collect()
        }
    }

    /// x = A^T y.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.m);
        if let Some(op) = &self.op {
            let mut embedded = vec![0.0; self.n];
            for (k, &i) in self.row_ids.iter().enumerate() {
                embedded[i] = y[k];
            }
            op.apply_transpose_f64(&embedded)
        } else {
            let mut x = vec![0.0; self.n];
            for i in 0..self.m {
                let yi = y[i];
                for (j, &e) in self.row(i).iter().enumerate() {
                    x[j] += e as f64 * yi;
                }
            }
            x
        }
    }

    /// Squared spectral norm of A. Rows drawn from W are orthogonal with
    /// squared norm B, so A A^T = B I and the norm is exactly sqrt(B); for
    /// imported matrices a deterministic power iteration bounds it instead.
    pub fn operator_norm_sq(&self) -> f64 {
        if self.op.is_some() {
            return self.block_size as f64;
        }
        let mut v = vec![1.0 / (self.n as f64).sqrt(); self.n];
        let mut lambda: f64 = self.block_size as f64;
        for _ in 0..50 {
            let w = self.apply_transpose(&self.apply(&v));
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 1.0;
            }
            lambda = norm;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        lambda * 1.01
    }

    /// Splits each row into complementary binary masks for a
    /// `width x height` display: +1 pixels light the positive mask, -1
    /// pixels the negative one, row-major. Pixels outside the row's block
    /// support stay dark in both exposures and cancel in the differential
    /// readout.
    pub fn to_mask_pairs(&self, width: usize, height: usize) -> Result<Vec<MaskPair>> {
        if width * height != self.n {
            return Err(Error::dims(
                format!("{} pixels", self.n),
                format!("{}x{} = {}", width, height, width * height),
            ));
        }
        Ok((0..self.m)
            .map(|i| MaskPair::from_row(self.row(i), width, height))
            .collect())
    }

    /// Plain-text export: header `SBH N B M seed window`, then M rows of
    /// space-separated `+1`/`-1`/`0`.
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "SBH {} {} {} {} {}",
            self.n, self.block_size, self.m, self.scramble_seed, self.window
        )?;
        for i in 0..self.m {
            let line: Vec<&str> = self
                .row(i)
                .iter()
                .map(|&e| match e.cmp(&0) {
                    std::cmp::Ordering::Greater => "+1",
                    std::cmp::Ordering::Less => "-1",
                    std::cmp::Ordering::Equal => "0",
                })
                .collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Parses the plain-text format. Row ids are assigned in file order;
    /// the fast transform path is unavailable for imported matrices.
    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse {
                offset: 0,
                message: "missing SBH header".into(),
            })?
            .map_err(|e| Error::Parse {
                offset: 0,
                message: e.to_string(),
            })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "SBH" {
            return Err(Error::Parse {
                offset: 0,
                message: format!("bad header '{header}', expected 'SBH N B M seed window'"),
            });
        }
        let parse_usize = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                offset: 0,
                message: format!("bad {what} '{s}'"),
            })
        };
        let n = parse_usize(fields[1], "N")?;
        let block_size = parse_usize(fields[2], "B")?;
        let m = parse_usize(fields[3], "M")?;
        let seed = fields[4].parse::<u64>().map_err(|_| Error::Parse {
            offset: 0,
            message: format!("bad seed '{}'", fields[4]),
        })?;
        let window = parse_usize(fields[5], "window")?;
        let mut rows = Vec::with_capacity(m * n);
        for i in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse {
                    offset: 0,
                    message: format!("expected {m} rows, file ends after {i}"),
                })?
                .map_err(|e| Error::Parse {
                    offset: 0,
                    message: e.to_string(),
                })?;
            let mut count = 0;
            for tok in line.split_whitespace() {
                match tok {
                    "+1" => rows.push(1i8),
                    "-1" => rows.push(-1i8),
                    "0" => rows.push(0i8),
                    other => {
                        return Err(Error::Parse {
                            offset: 0,
                            message: format!("row {i}: bad entry '{other}'"),
                        })
                    }
                }
                count += 1;
            }
            if count != n {
                return Err(Error::Parse {
                    offset: 0,
                    message: format!("row {i} has {count} entries, expected {n}"),
                });
            }
        }
        Ok(Self {
            m,
            n,
            block_size,
            scramble_seed: seed,
            window,
            row_ids: (0..m).collect(),
            rows,
            op: None,
        })
    }
}

/// Draws M distinct rows of W uniformly without replacement.
pub fn select_rows(w: &SbhOperator, m: usize, seed: u64) -> Result<SensingMatrix> {
    let n = w.n();
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "row count {m} must be in 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.partial_shuffle(&mut rng, m);
    ids.truncate(m);
    let mut rows = Vec::with_capacity(m * n);
    for &i in &ids {
        rows.extend(w.row(i));
    }
    Ok(SensingMatrix {
        m,
        n,
        block_size: w.block_size(),
        scramble_seed: w.seed(),
        window: w.window(),
        row_ids: ids,
        rows,
        op: Some(w.clone()),
    })
}

/// Complementary binary masks realizing one sensing row: disjoint, and
/// together covering exactly the row's nonzero support.
#[derive(Debug, Clone)]
pub struct MaskPair {
    pub positive: BinaryMask,
    pub negative: BinaryMask,
}

impl MaskPair {
    pub fn from_row(row: &[i8], width: usize, height: usize) -> Self {
        let positive = BinaryMask::from_fn(width, height, |x, y| row[y * width + x] > 0);
        let negative = BinaryMask::from_fn(width, height, |x, y| row[y * width + x] < 0);
        MaskPair { positive, negative }
    }

    /// Reconstructs the signed row from the mask pair.
    pub fn to_row(&self) -> Vec<i8> {
        self.positive
            .as_slice()
            .iter()
            .zip(self.negative.as_slice())
            .map(|(&p, &n)| {
                if p {
                    1
                } else if n {
                    -1
                } else {
                    0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_base_cases() {
        let h1 = hadamard(1).unwrap();
        assert_eq!(h1.row(0), vec![1]);
        let h2 = hadamard(2).unwrap();
        assert_eq!(h2.row(0), vec![1, 1]);
        assert_eq!(h2.row(1), vec![1, -1]);
        assert!(hadamard(6).is_err());
        assert!(hadamard(0).is_err());
    }

    #[test]
    fn hadamard_orthogonality_order_8() {
        let h = hadamard(8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let dot: i64 = h
                    .row(i)
                    .iter()
                    .zip(h.row(j))
                    .map(|(&a, b)| a as i64 * b as i64)
                    .sum();
                assert_eq!(dot, if i == j { 8 } else { 0 });
            }
        }
    }

    #[test]
    fn fwht_matches_dense_hadamard() {
        let h = hadamard(16).unwrap();
        let x: Vec<i64> = (0..16).map(|i| (i * i) as i64 - 40).collect();
        let mut fast = x.clone();
        fwht_in_place(&mut fast);
        for i in 0..16 {
            let direct: i64 = h
                .row(i)
                .iter()
                .zip(&x)
                .map(|(&e, &v)| e as i64 * v)
                .sum();
            assert_eq!(fast[i], direct);
        }
    }

    #[test]
    fn degenerate_scrambling_is_plain_hadamard() {
        let w = scrambled_block_hadamard_with(
            4,
            &SbhOptions {
                block_size: 4,
                window: 1,
                seed: 123,
                row_permutation: false,
            },
        )
        .unwrap();
        let h = hadamard(4).unwrap();
        for i in 0..4 {
            assert_eq!(w.row(i), h.row(i));
        }
    }

    #[test]
    fn operator_is_orthogonal() {
        let w = scrambled_block_hadamard(16, 4, 77, 4).unwrap();
        let rows: Vec<Vec<i8>> = (0..16).map(|i| w.row(i)).collect();
        for i in 0..16 {
            for j in 0..16 {
                let dot: i64 = rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(&a, &b)| a as i64 * b as i64)
                    .sum();
                assert_eq!(dot, if i == j { 4 } else { 0 }, "rows {i},{j}");
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = scrambled_block_hadamard(64, 8, 5, 8).unwrap();
        let b = scrambled_block_hadamard(64, 8, 5, 8).unwrap();
        for i in 0..64 {
            assert_eq!(a.row(i), b.row(i));
        }
        let c = scrambled_block_hadamard(64, 8, 6, 8).unwrap();
        assert!((0..64).any(|i| a.row(i) != c.row(i)));
    }

    #[test]
    fn divisibility_violations_error() {
        assert!(scrambled_block_hadamard(20, 8, 1, 8).is_err());
        assert!(scrambled_block_hadamard(16, 3, 1, 3).is_err());
        assert!(scrambled_block_hadamard(16, 4, 1, 0).is_err());
    }

    #[test]
    fn fast_apply_matches_explicit_rows() {
        let w = scrambled_block_hadamard(64, 8, 9, 8).unwrap();
        let x: Vec<i64> = (0..64).map(|i| (i as i64 * 7) % 13 - 6).collect();
        let fast = w.apply_i64(&x);
        for i in 0..64 {
            let direct: i64 = w
                .row(i)
                .iter()
                .zip(&x)
                .map(|(&e, &v)| e as i64 * v)
                .sum();
            assert_eq!(fast[i], direct, "row {i}");
        }
    }

    #[test]
    fn transpose_is_consistent() {
        let w = scrambled_block_hadamard(32, 8, 2, 8).unwrap();
        let x: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = (0..32).map(|i| (i as f64 * 0.7).cos()).collect();
        let wx = w.apply_f64(&x);
        let wty = w.apply_transpose_f64(&y);
        let lhs: f64 = wx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&wty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn select_rows_full_selection_is_orthogonal() {
        let w = scrambled_block_hadamard(16, 4, 3, 4).unwrap();
        let a = select_rows(&w, 16, 8).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let dot: i64 = a
                    .row(i)
                    .iter()
                    .zip(a.row(j))
                    .map(|(&x, &y)| x as i64 * y as i64)
                    .sum();
                assert_eq!(dot, if i == j { 4 } else { 0 });
            }
        }
    }

    #[test]
    fn select_rows_are_distinct_and_seeded() {
        let w = scrambled_block_hadamard(1024, 32, 1, 32).unwrap();
        let a = select_rows(&w, 300, 4).unwrap();
        let mut ids = a.row_ids().to_vec();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 300);
        let b = select_rows(&w, 300, 4).unwrap();
        assert_eq!(a.row_ids(), b.row_ids());
        let single = select_rows(&w, 1, 9).unwrap();
        assert_eq!(single.row(0).len(), 1024);
        assert!(select_rows(&w, 1025, 1).is_err());
        assert!(select_rows(&w, 0, 1).is_err());
    }

    #[test]
    fn sensing_apply_matches_rows() {
        let w = scrambled_block_hadamard(64, 8, 13, 8).unwrap();
        let a = select_rows(&w, 20, 21).unwrap();
        let x: Vec<f64> = (0..64).map(|i| ((i * 31) % 17) as f64 / 17.0).collect();
        let fast = a.apply(&x);
        for i in 0..20 {
            let direct: f64 = a.row(i).iter().zip(&x).map(|(&e, &v)| e as f64 * v).sum();
            assert!((fast[i] - direct).abs() < 1e-12, "row {i}");
        }
        // adjoint identity <Ax, y> = <x, A^T y>
        let y: Vec<f64> = (0..20).map(|i| (i as f64 - 10.0) / 3.0).collect();
        let aty = a.apply_transpose(&y);
        let lhs: f64 = fast.iter().zip(&y).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(p, q)| p * q).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn mask_pair_literal_example() {
        let pair = MaskPair::from_row(&[1, -1, 1, 1], 4, 1);
        assert_eq!(pair.positive.as_slice(), &[true, false, true, true]);
        assert_eq!(pair.negative.as_slice(), &[false, true, false, false]);
        assert_eq!(pair.to_row(), vec![1, -1, 1, 1]);

        let all_plus = MaskPair::from_row(&[1, 1, 1, 1], 2, 2);
        assert_eq!(all_plus.positive.count_on(), 4);
        assert_eq!(all_plus.negative.count_on(), 0);
    }

    #[test]
    fn mask_pair_differential_identity() {
        let w = scrambled_block_hadamard(64, 8, 2, 8).unwrap();
        let a = select_rows(&w, 10, 3).unwrap();
        let pairs = a.to_mask_pairs(8, 8).unwrap();
        let x: Vec<f64> = (0..64).map(|i| ((i * 29) % 23) as f64 / 23.0).collect();
        for (i, pair) in pairs.iter().enumerate() {
            let pos: f64 = pair
                .positive
                .as_slice()
                .iter()
                .zip(&x)
                .map(|(&on, &v)| if on { v } else { 0.0 })
                .sum();
            let neg: f64 = pair
                .negative
                .as_slice()
                .iter()
                .zip(&x)
                .map(|(&on, &v)| if on { v } else { 0.0 })
                .sum();
            let direct: f64 = a.row(i).iter().zip(&x).map(|(&e, &v)| e as f64 * v).sum();
            assert!((pos - neg - direct).abs() < 1e-12, "row {i}");
        }
    }

    #[test]
    fn mask_pairs_are_disjoint_and_cover_support() {
        let w = scrambled_block_hadamard(64, 8, 4, 8).unwrap();
        let a = select_rows(&w, 12, 6).unwrap();
        let pairs = a.to_mask_pairs(8, 8).unwrap();
        for (i, pair) in pairs.iter().enumerate() {
            let row = a.row(i);
            for (j, (&p, &n)) in pair
                .positive
                .as_slice()
                .iter()
                .zip(pair.negative.as_slice())
                .enumerate()
            {
                assert!(!(p && n), "row {i} pixel {j} lit in both masks");
                assert_eq!(p || n, row[j] != 0, "row {i} pixel {j} support");
            }
            assert_eq!(pair.to_row(), row);
            assert_eq!(
                pair.positive.count_on() + pair.negative.count_on(),
                a.block_size()
            );
        }
    }

    #[test]
    fn mask_pair_dimension_mismatch() {
        let w = scrambled_block_hadamard(64, 8, 2, 8).unwrap();
        let a = select_rows(&w, 4, 3).unwrap();
        assert!(a.to_mask_pairs(7, 9).is_err());
    }

    #[test]
    fn text_round_trip_is_byte_exact() {
        let w = scrambled_block_hadamard(32, 8, 5, 8).unwrap();
        let a = select_rows(&w, 6, 10).unwrap();
        let mut buf = Vec::new();
        a.write_text(&mut buf).unwrap();
        let parsed = SensingMatrix::read_text(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        parsed.write_text(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        for i in 0..6 {
            assert_eq!(a.row(i), parsed.row(i));
        }
    }

    #[test]
    fn text_rejects_malformed_input() {
        assert!(SensingMatrix::read_text(&b"BAD 1 2 3 4 5\n"[..]).is_err());
        assert!(SensingMatrix::read_text(&b"SBH 4 4 1 0 4\n+1 -1 +2 -1\n"[..]).is_err());
        assert!(SensingMatrix::read_text(&b"SBH 4 4 2 0 4\n+1 -1 +1 -1\n"[..]).is_err());
    }
}
