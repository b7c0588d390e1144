//! Shared test oracles, independent of the library's computational paths:
//! ascending-series modified Bessel functions (the kernels are evaluated by
//! adaptive quadrature in the library), a dense LU solver (the library uses
//! Krylov iterations), and a tiny deterministic RNG.
#![allow(dead_code)]

const EULER_MASCHERONI: f64 = 0.5772156649015329;

/// Modified Bessel function K0 by its ascending series; machine precision
/// for the argument range exercised in tests (x <= 6).
pub fn bessel_k0(x: f64) -> f64 {
    let t = x * x / 4.0;
    let mut i0 = 1.0;
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut harmonic = 0.0;
    for k in 1..80 {
        let kf = k as f64;
        term *= t / (kf * kf);
        i0 += term;
        harmonic += 1.0 / kf;
        sum += term * harmonic;
    }
    -((x / 2.0).ln() + EULER_MASCHERONI) * i0 + sum
}

/// Modified Bessel function K1 by its ascending series.
pub fn bessel_k1(x: f64) -> f64 {
    let t = x * x / 4.0;
    let mut i1_sum = 1.0;
    let mut term = 1.0;
    let mut digamma_sum = -2.0 * EULER_MASCHERONI + 1.0;
    let mut h_k = 0.0;
    let mut h_k1 = 1.0;
    for k in 1..80 {
        let kf = k as f64;
        term *= t / (kf * (kf + 1.0));
        i1_sum += term;
        h_k += 1.0 / kf;
        h_k1 += 1.0 / (kf + 1.0);
        digamma_sum += (-2.0 * EULER_MASCHERONI + h_k + h_k1) * term;
    }
    let i1 = (x / 2.0) * i1_sum;
    1.0 / x + (x / 2.0).ln() * i1 - (x / 4.0) * digamma_sum
}

/// Dense LU solve with partial pivoting, for oracle comparisons on small
/// systems.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        assert!(d != 0.0, "singular matrix in dense oracle");
        for row in col + 1..n {
            let f = a[row][col] / d;
            if f == 0.0 {
                continue;
            }
            a[row][col] = 0.0;
            for k in col + 1..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// xorshift64* RNG for reproducible pseudo-random test fields.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.max(1))
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 % 1_000_000) as f64 / 1_000_000.0
    }
}
