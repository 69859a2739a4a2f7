//! Periodic Fourier machinery on the padded cube.
//!
//! Real fields are transformed two at a time by packing them into the real
//! and imaginary parts of one complex buffer. Every symbol applied here maps
//! Hermitian spectra to Hermitian spectra (the Nyquist wavenumber is zeroed
//! for odd derivatives), so the packing is exact.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Engine {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Derivative wavenumber per index along one axis (Nyquist set to zero).
    k: Vec<f64>,
    neg: Vec<usize>,
}

/// Shared engine for a torus of `m` points per axis and physical length `len`.
pub(crate) fn engine(m: usize, len: f64) -> Arc<Engine> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<Engine>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("spectral cache poisoned");
    guard
        .entry((m, len.to_bits()))
        .or_insert_with(|| Arc::new(Engine::new(m, len)))
        .clone()
}

impl Engine {
    fn new(m: usize, len: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let dk = 2.0 * PI / len;
        let k = (0..m)
            .map(|i| {
                if 2 * i < m {
                    i as f64 * dk
                } else if 2 * i == m {
                    0.0
                } else {
                    (i as f64 - m as f64) * dk
                }
            })
            .collect();
        let neg = (0..m).map(|i| (m - i) % m).collect();
        Engine { m, fwd, inv, k, neg }
    }

    pub(crate) fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    #[inline]
    pub(crate) fn wavevector(&self, flat: usize) -> [f64; 3] {
        let m = self.m;
        [self.k[flat % m], self.k[(flat / m) % m], self.k[flat / (m * m)]]
    }

    #[inline]
    fn negate(&self, flat: usize) -> usize {
        let m = self.m;
        self.neg[flat % m] + m * (self.neg[(flat / m) % m] + m * self.neg[flat / (m * m)])
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let m = self.m;
        let fft = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

        // x lines are contiguous
        fft.process_with_scratch(buf, &mut scratch);

        // y lines: transpose each z-plane, transform rows, transpose back
        for plane in buf.chunks_exact_mut(m * m) {
            transpose_square(plane, m);
            fft.process_with_scratch(plane, &mut scratch);
            transpose_square(plane, m);
        }

        // z lines: gather per y-slab
        let mut slab = vec![Complex64::new(0.0, 0.0); m * m];
        for y in 0..m {
            for z in 0..m {
                let row = &buf[m * (y + m * z)..m * (y + m * z) + m];
                for (x, v) in row.iter().enumerate() {
                    slab[x * m + z] = *v;
                }
            }
            fft.process_with_scratch(&mut slab, &mut scratch);
            for z in 0..m {
                let row = &mut buf[m * (y + m * z)..m * (y + m * z) + m];
                for (x, v) in row.iter_mut().enumerate() {
                    *v = slab[x * m + z];
                }
            }
        }

        if inverse {
            let scale = 1.0 / self.len() as f64;
            for v in buf.iter_mut() {
                *v *= scale;
            }
        }
    }

    /// Spectra of real fields.
    pub(crate) fn forward(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let n = self.len();
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            let mut buf: Vec<Complex64> = match pair {
                [a, b] => a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect(),
                [a] => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                _ => unreachable!(),
            };
            debug_assert_eq!(buf.len(), n);
            self.transform(&mut buf, false);
            if pair.len() == 1 {
                out.push(buf);
                continue;
            }
            let mut a = vec![Complex64::new(0.0, 0.0); n];
            let mut b = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..n {
                let s = buf[i];
                let t = buf[self.negate(i)].conj();
                a[i] = (s + t) * 0.5;
                // (s - t) / (2i)
                let d = (s - t) * 0.5;
                b[i] = Complex64::new(d.im, -d.re);
            }
            out.push(a);
            out.push(b);
        }
        out
    }

    /// Synthesize `count` real fields whose Hermitian spectra are given
    /// pointwise by `symbol(output, flat_index, wavevector)`.
    pub(crate) fn synthesize<F>(&self, count: usize, symbol: F) -> Vec<Vec<f64>>
    where
        F: Fn(usize, usize, [f64; 3]) -> Complex64,
    {
        let n = self.len();
        let mut out = Vec::with_capacity(count);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut o = 0;
        while o < count {
            let paired = o + 1 < count;
            for (i, slot) in buf.iter_mut().enumerate() {
                let kv = self.wavevector(i);
                let a = symbol(o, i, kv);
                *slot = if paired {
                    let b = symbol(o + 1, i, kv);
                    Complex64::new(a.re - b.im, a.im + b.re)
                } else {
                    a
                };
            }
            self.transform(&mut buf, true);
            out.push(buf.iter().map(|c| c.re).collect());
            if paired {
                out.push(buf.iter().map(|c| c.im).collect());
            }
            o += if paired { 2 } else { 1 };
        }
        out
    }
}

fn transpose_square(a: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in (i + 1)..m {
            a.swap(i * m + j, j * m + i);
        }
    }
}

#[inline]
pub(crate) fn ik(k: f64, s: Complex64) -> Complex64 {
    Complex64::new(-k * s.im, k * s.re)
}

#[inline]
pub(crate) fn k2(kv: [f64; 3]) -> f64 {
    kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]
}
