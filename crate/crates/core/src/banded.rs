//! LU factorisation with partial pivoting for banded matrices.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals. Row `i` stores
/// columns `i - kl ..= i + ku + kl`; the extra `kl` columns absorb pivoting
/// fill-in.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let offset = j as isize - i as isize + self.kl as isize;
        (offset >= 0 && (offset as usize) < self.width).then(|| i * self.width + offset as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Panics when `(i, j)` lies outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let in_band = j + self.kl >= i && j <= i + self.ku;
        assert!(in_band, "entry ({i}, {j}) outside the band");
        let s = self.slot(i, j).expect("in band");
        self.data[s] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let v = self.get(i, j);
        self.set(i, j, v + value);
    }

    /// Solves `A x = b` in place of a copy of `A`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut a = self.clone();
        let mut x = b.to_vec();
        let reach = self.ku + self.kl;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let pivot = (k..=last_row)
                .max_by(|&p, &q| a.get(p, k).abs().total_cmp(&a.get(q, k).abs()))
                .expect("non-empty pivot range");
            let pv = a.get(pivot, k);
            if pv == 0.0 || !pv.is_finite() {
                return Err(Error::Domain(format!("singular banded matrix at column {k}")));
            }
            let last_col = (k + reach).min(n - 1);
            if pivot != k {
                for j in k..=last_col {
                    let (u, v) = (a.get(k, j), a.get(pivot, j));
                    a.set_wide(k, j, v);
                    a.set_wide(pivot, j, u);
                }
                x.swap(k, pivot);
            }
            for i in k + 1..=last_row {
                let factor = a.get(i, k) / pv;
                if factor == 0.0 {
                    continue;
                }
                a.set_wide(i, k, 0.0);
                for j in k + 1..=last_col {
                    let v = a.get(i, j) - factor * a.get(k, j);
                    a.set_wide(i, j, v);
                }
                x[i] -= factor * x[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=last_col {
                s -= a.get(k, j) * x[j];
            }
            x[k] = s / a.get(k, k);
        }
        Ok(x)
    }

    /// Like `set` but allowing the pivoting fill-in region.
    fn set_wide(&mut self, i: usize, j: usize, value: f64) {
        match self.slot(i, j) {
            Some(s) => self.data[s] = value,
            None => debug_assert!(value == 0.0, "fill outside storage at ({i}, {j})"),
        }
    }
}
