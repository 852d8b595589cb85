//! Binomial coefficients with the `C(n, r) = 0` convention outside `0 <= r <= n`.

/// Exact `C(n, r)`; saturates at `u128::MAX` on overflow.
pub fn choose(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Signed-argument form: zero when `r < 0`, `n < 0` or `r > n`.
pub fn choose_signed(n: i64, r: i64) -> u128 {
    if n < 0 || r < 0 {
        0
    } else {
        choose(n as u64, r as u64)
    }
}

/// Cached Pascal triangle for the hot paths of planning and analysis.
#[derive(Debug, Clone)]
pub struct Binomial {
    rows: Vec<Vec<u128>>,
}

impl Binomial {
    /// Table covering `0 <= n <= max_n`.
    pub fn new(max_n: usize) -> Self {
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let mut row = vec![1u128; n + 1];
            for r in 1..n {
                row[r] = rows[n - 1][r - 1].saturating_add(rows[n - 1][r]);
            }
            rows.push(row);
        }
        Binomial { rows }
    }

    pub fn max_n(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn get(&self, n: i64, r: i64) -> u128 {
        if n < 0 || r < 0 || r > n {
            return 0;
        }
        match self.rows.get(n as usize) {
            Some(row) => row[r as usize],
            None => choose(n as u64, r as u64),
        }
    }
}
