//! Sphere-packing codebooks: 256 points in 8 real dimensions (4 complex
//! symbols), loaded from a file or generated from the E8 lattice.

use std::path::Path;

use num_complex::Complex64;

use crate::bler::MessageScheme;
use crate::channel::ComplexBlock;
use crate::{Error, Result};

/// A finite constellation of `M` codewords of `N` complex symbols each,
/// scaled to unit average energy per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    words: ComplexBlock,
}

impl Codebook {
    /// Builds a codebook from raw codewords (rows of `2N` reals, consecutive
    /// `(re, im)` pairs) and rescales it to unit average symbol energy.
    pub fn from_coordinates(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::config("empty codebook"))?;
        if first.is_empty() || first.len() % 2 != 0 {
            return Err(Error::config("codewords need an even, non-zero number of coordinates"));
        }
        let n = first.len() / 2;
        let mut words = ComplexBlock::zeros(rows.len(), n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != 2 * n {
                return Err(Error::config(format!("codeword {i} has {} coordinates, expected {}", r.len(), 2 * n)));
            }
            for k in 0..n {
                words.set(i, k, Complex64::new(r[2 * k], r[2 * k + 1]));
            }
        }
        let energy = words.mean_symbol_energy();
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::config("codebook has zero or non-finite energy"));
        }
        let c = energy.sqrt().recip();
        words.as_real_matrix_mut().as_mut_slice().iter_mut().for_each(|v| *v *= c);
        let book = Self { words };
        for i in 0..book.len() {
            for j in 0..i {
                if book.distance_sq(i, j) == 0.0 {
                    return Err(Error::config(format!("codewords {j} and {i} coincide")));
                }
            }
        }
        Ok(book)
    }

    pub fn len(&self) -> usize {
        self.words.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.words.rows() == 0
    }

    pub fn codewords(&self) -> &ComplexBlock {
        &self.words
    }

    pub fn codeword(&self, m: usize) -> Vec<Complex64> {
        self.words.row(m)
    }

    /// Squared Euclidean distance between codewords `a` and `b`.
    pub fn distance_sq(&self, a: usize, b: usize) -> f64 {
        let (ra, rb) = (self.words.as_real_matrix().row(a), self.words.as_real_matrix().row(b));
        ra.iter().zip(rb).map(|(x, y)| (x - y).powi(2)).sum()
    }

    pub fn min_distance_sq(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in 0..i {
                best = best.min(self.distance_sq(i, j));
            }
        }
        best
    }

    /// Nearest codeword to each row of `y` (ties go to the lowest index).
    pub fn ml_decode(&self, y: &ComplexBlock) -> Result<Vec<usize>> {
        if y.symbols() != self.words.symbols() {
            return Err(Error::config(format!(
                "codebook has {} symbols per word, got {}",
                self.words.symbols(),
                y.symbols()
            )));
        }
        let words = self.words.as_real_matrix();
        Ok(y.as_real_matrix()
            .iter_rows()
            .map(|yr| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (m, w) in words.iter_rows().enumerate() {
                    // Partial sums only grow, so a word whose partial distance
                    // reaches the best so far can never win.
                    let mut d = 0.0;
                    let mut pruned = false;
                    for (a, b) in yr.iter().zip(w) {
                        d += (a - b) * (a - b);
                        if d >= best_d {
                            pruned = true;
                            break;
                        }
                    }
                    if !pruned {
                        best = m;
                        best_d = d;
                    }
                }
                best
            })
            .collect())
    }
}

impl MessageScheme for Codebook {
    fn messages(&self) -> usize {
        self.len()
    }

    fn symbols(&self) -> usize {
        self.words.symbols()
    }

    fn encode(&self, messages: &[usize]) -> Result<ComplexBlock> {
        let mut x = ComplexBlock::zeros(messages.len(), self.symbols());
        for (i, &m) in messages.iter().enumerate() {
            if m >= self.len() {
                return Err(Error::input(format!("message {m} out of range 0..{}", self.len())));
            }
            x.as_real_matrix_mut().row_mut(i).copy_from_slice(self.words.as_real_matrix().row(m));
        }
        Ok(x)
    }

    fn decode(&self, y: &ComplexBlock) -> Result<Vec<usize>> {
        self.ml_decode(y)
    }
}

/// Loads a codebook CSV: one codeword per line, `2N` comma-separated reals
/// given as consecutive `(re, im)` pairs; line `k` is message `k`. Blank
/// lines and lines starting with `#` are skipped. The result is rescaled to
/// unit average symbol energy.
pub fn agrell_load(path: &Path, expected_messages: usize) -> Result<Codebook> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("invalid number: {e}"),
            })?;
        if row.len() != 8 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("expected 8 values, found {}", row.len()),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: "non-finite value".into(),
            });
        }
        rows.push(row);
    }
    if rows.len() != expected_messages {
        return Err(Error::config(format!(
            "codebook {} has {} codewords, expected {expected_messages}",
            path.display(),
            rows.len()
        )));
    }
    Codebook::from_coordinates(&rows)
}

/// Writes a codebook in the format read by [`agrell_load`].
pub fn write_codebook(path: &Path, book: &Codebook) -> Result<()> {
    let mut out = String::new();
    for m in 0..book.len() {
        let coords: Vec<String> = book
            .codeword(m)
            .iter()
            .flat_map(|z| [z.re, z.im])
            .map(|v| format!("{v:.17}"))
            .collect();
        out.push_str(&coords.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// The 240 minimal vectors of the E8 lattice (squared norm 2).
pub fn e8_first_shell() -> Vec<[f64; 8]> {
    let mut out = Vec::with_capacity(240);
    // (+-1, +-1, 0, ..., 0) in every pair of positions: 112 vectors.
    for i in 0..8 {
        for j in i + 1..8 {
            for signs in 0..4 {
                let mut v = [0.0; 8];
                v[i] = if signs & 1 == 0 { 1.0 } else { -1.0 };
                v[j] = if signs & 2 == 0 { 1.0 } else { -1.0 };
                out.push(v);
            }
        }
    }
    // (+-1/2)^8 with an even number of minus signs: 128 vectors.
    for signs in 0u32..256 {
        if signs.count_ones() % 2 == 0 {
            let mut v = [0.5; 8];
            for (k, c) in v.iter_mut().enumerate() {
                if signs & (1 << k) != 0 {
                    *c = -0.5;
                }
            }
            out.push(v);
        }
    }
    out
}

/// The 2160 E8 lattice vectors of squared norm 4.
pub fn e8_second_shell() -> Vec<[f64; 8]> {
    let mut out = Vec::with_capacity(2160);
    for i in 0..8 {
        for s in [2.0, -2.0] {
            let mut v = [0.0; 8];
            v[i] = s;
            out.push(v);
        }
    }
    for mask in 0u32..256 {
        if mask.count_ones() != 4 {
            continue;
        }
        let pos: Vec<usize> = (0..8).filter(|k| mask & (1 << k) != 0).collect();
        for signs in 0..16 {
            let mut v = [0.0; 8];
            for (b, &p) in pos.iter().enumerate() {
                v[p] = if signs & (1 << b) == 0 { 1.0 } else { -1.0 };
            }
            out.push(v);
        }
    }
    for big in 0..8 {
        for signs in 0u32..256 {
            if signs.count_ones() % 2 != 0 {
                continue;
            }
            let mut v = [0.5; 8];
            v[big] = 1.5;
            for (k, c) in v.iter_mut().enumerate() {
                if signs & (1 << k) != 0 {
                    *c = -*c;
                }
            }
            out.push(v);
        }
    }
    out
}

/// Fallback 256-point codebook when the optimized coordinates are not
/// available: the 240 minimal E8 vectors plus 16 vectors of the next shell.
///
/// Next-shell vectors all have the same norm; ties are broken by preferring
/// fewer non-zero coordinates, then lexicographically larger coordinates.
/// This selects `+-2 e_i`.
pub fn agrell_generate_fallback(messages: usize) -> Result<Codebook> {
    let first = e8_first_shell();
    if messages < first.len() || messages > first.len() + 2160 {
        return Err(Error::config(format!(
            "the E8 fallback supports {}..={} messages, got {messages}",
            first.len(),
            first.len() + 2160
        )));
    }
    let mut second = e8_second_shell();
    second.sort_by(|a, b| {
        let nz = |v: &[f64; 8]| v.iter().filter(|c| **c != 0.0).count();
        nz(a).cmp(&nz(b)).then_with(|| b.partial_cmp(a).expect("finite coordinates"))
    });
    let rows: Vec<Vec<f64>> = first
        .iter()
        .chain(second.iter().take(messages - first.len()))
        .map(|v| v.to_vec())
        .collect();
    Codebook::from_coordinates(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::Qpsk;

    fn naive_nearest(book: &Codebook, y: &[Complex64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for m in 0..book.len() {
            let d: f64 = book.codeword(m).iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum();
            if d < best_d {
                best = m;
                best_d = d;
            }
        }
        best
    }

    #[test]
    fn shells_have_expected_sizes_and_norms() {
        let a = e8_first_shell();
        let b = e8_second_shell();
        assert_eq!(a.len(), 240);
        assert_eq!(b.len(), 2160);
        assert!(a.iter().all(|v| (v.iter().map(|c| c * c).sum::<f64>() - 2.0).abs() < 1e-12));
        assert!(b.iter().all(|v| (v.iter().map(|c| c * c).sum::<f64>() - 4.0).abs() < 1e-12));
    }

    #[test]
    fn fallback_is_normalized_and_distinct() {
        let book = agrell_generate_fallback(256).unwrap();
        assert_eq!(book.len(), 256);
        assert!((book.codewords().mean_symbol_energy() - 1.0).abs() < 1e-12);
        let msgs: Vec<usize> = (0..256).collect();
        assert_eq!(book.ml_decode(&book.encode(&msgs).unwrap()).unwrap(), msgs);
    }

    #[test]
    fn fallback_packs_better_than_qpsk() {
        let book = agrell_generate_fallback(256).unwrap();
        let q = Qpsk::m256();
        let qx = q.encode(&(0..256).collect::<Vec<_>>()).unwrap();
        let qbook = Codebook {
            words: qx,
        };
        assert!(book.min_distance_sq() >= qbook.min_distance_sq());
    }

    #[test]
    fn pruned_search_matches_naive() {
        use crate::channel::sample_perturbation;
        use crate::rng::SeedTree;
        let book = agrell_generate_fallback(256).unwrap();
        let y = sample_perturbation(2000, 4, 1.5, &mut SeedTree::new(8).stream("y"));
        let fast = book.ml_decode(&y).unwrap();
        for (i, &d) in fast.iter().enumerate() {
            assert_eq!(d, naive_nearest(&book, &y.row(i)));
        }
    }
}
