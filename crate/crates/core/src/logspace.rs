//! Base-2 log-space arithmetic: compensated log-sum-exp and log binomials.

use statrs::function::gamma::ln_gamma;

/// Neumaier-compensated accumulator of `2^x` terms, kept relative to a running maximum.
#[derive(Debug, Clone, Copy)]
pub struct Log2Sum {
    max: f64,
    sum: f64,
    comp: f64,
}

impl Default for Log2Sum {
    fn default() -> Self {
        Self::new()
    }
}

impl Log2Sum {
    pub fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0, comp: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            if self.max > f64::NEG_INFINITY {
                let scale = (self.max - x).exp2();
                self.sum *= scale;
                self.comp *= scale;
            }
            self.max = x;
        }
        let t = (x - self.max).exp2();
        let s = self.sum + t;
        if self.sum.abs() >= t.abs() {
            self.comp += (self.sum - s) + t;
        } else {
            self.comp += (t - s) + self.sum;
        }
        self.sum = s;
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        self.max + (self.sum + self.comp).log2()
    }
}

/// `log2 sum_i 2^{x_i}`.
pub fn log2_sum_exp2<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = Log2Sum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// `log2 C(n, k)`: exact integer arithmetic for `n <= 60`, log-gamma beyond.
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if n <= 60 {
        return (binomial_u64(n, k) as f64).log2();
    }
    let ln = ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
    ln / std::f64::consts::LN_2
}

/// Exact `C(n, k)` for `n <= 60` (fits in `u64`).
pub fn binomial_u64(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// `x * log2(y)` with the convention `0 * log2(0) = 0`.
pub fn xlog2y(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.log2()
    }
}
