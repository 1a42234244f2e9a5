//! Exact-length discrete Fourier transforms.
//!
//! Lengths whose prime factors are all at most [`MAX_RADIX`] use a recursive
//! mixed-radix Cooley-Tukey decomposition; anything else goes through
//! Bluestein's chirp-z algorithm on a power-of-two inner transform. No
//! zero-padding ever leaks into the result: the output always has the input length.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::math::sin_cos;

pub const MAX_RADIX: usize = 61;

#[derive(Clone, Debug)]
enum Kind {
    Mixed { factors: Vec<usize>, twiddles: Vec<Complex64> },
    Bluestein { chirp: Vec<Complex64>, kernel_hat: Vec<Complex64>, inner: Box<FftPlan> },
}

use alloc::boxed::Box;

/// Precomputed forward transform of one length.
#[derive(Clone, Debug)]
pub struct FftPlan {
    n: usize,
    kind: Kind,
}

fn unit(num: u64, den: u64) -> Complex64 {
    // exp(-2 pi i num / den) with the argument reduced exactly first.
    let r = num % den;
    let (s, c) = sin_cos(-2.0 * PI * r as f64 / den as f64);
    Complex64::new(c, s)
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut f = Vec::new();
    for p in [4usize, 2, 3, 5] {
        while n.is_multiple_of(p) {
            f.push(p);
            n /= p;
        }
    }
    let mut p = 7;
    while p * p <= n {
        while n.is_multiple_of(p) {
            f.push(p);
            n /= p;
        }
        p += 2;
    }
    if n > 1 {
        f.push(n);
    }
    f
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let factors = factorize(n);
        if factors.iter().all(|&p| p <= MAX_RADIX) {
            let twiddles = (0..n as u64).map(|j| unit(j, n as u64)).collect();
            return FftPlan {
                n,
                kind: Kind::Mixed { factors, twiddles },
            };
        }
        let m = (2 * n - 1).next_power_of_two();
        let two_n = 2 * n as u64;
        // w_k = exp(-i pi k^2 / n)
        let chirp: Vec<Complex64> = (0..n as u64).map(|k| unit((k * k) % two_n, two_n)).collect();
        let inner = FftPlan::new(m);
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        let kernel_hat = inner.forward(&kernel);
        FftPlan {
            n,
            kind: Kind::Bluestein {
                chirp,
                kernel_hat,
                inner: Box::new(inner),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `X_t = sum_k x_k exp(-2 pi i k t / n)`.
    pub fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "input length does not match plan");
        match &self.kind {
            Kind::Mixed { factors, twiddles } => {
                let mut out = vec![Complex64::new(0.0, 0.0); self.n];
                mixed(x, 1, &mut out, self.n, factors, twiddles, 1);
                out
            }
            Kind::Bluestein {
                chirp,
                kernel_hat,
                inner,
            } => {
                let m = inner.n;
                let mut a = vec![Complex64::new(0.0, 0.0); m];
                for k in 0..self.n {
                    a[k] = x[k] * chirp[k];
                }
                let a_hat = inner.forward(&a);
                let prod: Vec<Complex64> = a_hat.iter().zip(kernel_hat).map(|(p, q)| p * q).collect();
                let conv = inner.inverse(&prod);
                let scale = 1.0 / m as f64;
                (0..self.n).map(|k| conv[k] * chirp[k] * scale).collect()
            }
        }
    }

    /// Unnormalised inverse: `x_t = sum_k X_k exp(+2 pi i k t / n)`.
    pub fn inverse(&self, x: &[Complex64]) -> Vec<Complex64> {
        let conj: Vec<Complex64> = x.iter().map(|v| v.conj()).collect();
        let mut y = self.forward(&conj);
        y.iter_mut().for_each(|v| *v = v.conj());
        y
    }
}

fn mixed(
    x: &[Complex64],
    stride: usize,
    out: &mut [Complex64],
    n: usize,
    factors: &[usize],
    tw: &[Complex64],
    tstep: usize,
) {
    if n == 1 {
        out[0] = x[0];
        return;
    }
    let p = factors[0];
    let m = n / p;
    for q in 0..p {
        mixed(&x[q * stride..], stride * p, &mut out[q * m..(q + 1) * m], m, &factors[1..], tw, tstep * p);
    }
    let big_n = tw.len();
    match p {
        2 => {
            for k in 0..m {
                let t = out[m + k] * tw[k * tstep];
                let a = out[k];
                out[k] = a + t;
                out[m + k] = a - t;
            }
        }
        4 => {
            // W_4 = -i
            for k in 0..m {
                let t0 = out[k];
                let t1 = out[m + k] * tw[k * tstep];
                let t2 = out[2 * m + k] * tw[(2 * k * tstep) % big_n];
                let t3 = out[3 * m + k] * tw[(3 * k * tstep) % big_n];
                let a = t0 + t2;
                let b = t0 - t2;
                let c = t1 + t3;
                let d = t1 - t3;
                let d_rot = Complex64::new(d.im, -d.re);
                out[k] = a + c;
                out[m + k] = b + d_rot;
                out[2 * m + k] = a - c;
                out[3 * m + k] = b - d_rot;
            }
        }
        _ => {
            let mut t = [Complex64::new(0.0, 0.0); MAX_RADIX];
            let root_step = big_n / p;
            for k in 0..m {
                for (q, tq) in t.iter_mut().enumerate().take(p) {
                    *tq = out[q * m + k] * tw[(q * k * tstep) % big_n];
                }
                for s in 0..p {
                    let mut acc = t[0];
                    for (q, tq) in t.iter().enumerate().take(p).skip(1) {
                        acc += tq * tw[((q * s) % p) * root_step];
                    }
                    out[s * m + k] = acc;
                }
            }
        }
    }
}

/// Cache of plans keyed by length.
#[derive(Default, Debug)]
pub struct FftPlanner {
    plans: BTreeMap<usize, FftPlan>,
}

impl FftPlanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn plan(&mut self, n: usize) -> &FftPlan {
        self.plans.entry(n).or_insert_with(|| FftPlan::new(n))
    }
}
