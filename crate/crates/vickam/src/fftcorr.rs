//! Action map generation by frequency-domain cross-correlation.
//!
//! A feature grid (h x w x C) is correlated per channel against a p x p x C
//! prototype patch: both are zero-padded to at least (h+p-1) x (w+p-1),
//! transformed, multiplied as `FFT(X) * conj(FFT(P))`, inverse-transformed,
//! circularly shifted so the score for a patch *centered* at (u, v) lands at
//! (u, v), cropped to h x w, and averaged over channels.
//!
//! `xcorr_naive` computes the identical quantity by direct spatial sliding
//! (prototype overhangs the border with missing cells contributing zero) and
//! serves as the independent oracle for the FFT backend. Everything runs in
//! f64 internally and rounds to f32 once on output.

use std::cell::RefCell;
use std::time::Instant;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prototypes::PrototypeBank;
use crate::tensor::{seeded_fill, Dist, Tensor};

/// Global representation of one sample: an h x w x C grid.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    grid: Tensor,
}

impl FeatureMap {
    pub fn new(grid: Tensor) -> Result<Self> {
        if grid.rank() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "feature map must be h x w x C, got {:?}",
                grid.dims()
            )));
        }
        Ok(FeatureMap { grid })
    }

    pub fn h(&self) -> usize {
        self.grid.dims()[0]
    }

    pub fn w(&self) -> usize {
        self.grid.dims()[1]
    }

    pub fn channels(&self) -> usize {
        self.grid.dims()[2]
    }

    pub fn grid(&self) -> &Tensor {
        &self.grid
    }

    pub fn into_grid(self) -> Tensor {
        self.grid
    }
}

/// One action prototype: a p x p x C patch plus its action id.
#[derive(Debug, Clone)]
pub struct Prototype {
    patch: Tensor,
    action_id: usize,
}

impl Prototype {
    pub fn new(patch: Tensor, action_id: usize) -> Result<Self> {
        let dims = patch.dims();
        if patch.rank() != 3 || dims[0] != dims[1] {
            return Err(Error::ShapeMismatch(format!(
                "prototype must be p x p x C, got {dims:?}"
            )));
        }
        Ok(Prototype { patch, action_id })
    }

    pub fn side(&self) -> usize {
        self.patch.dims()[0]
    }

    pub fn channels(&self) -> usize {
        self.patch.dims()[2]
    }

    pub fn patch(&self) -> &Tensor {
        &self.patch
    }

    pub fn action_id(&self) -> usize {
        self.action_id
    }
}

/// Per-action score surfaces for one sample, shaped K_a x h x w.
#[derive(Debug, Clone)]
pub struct ActionMapStack {
    maps: Tensor,
}

impl ActionMapStack {
    pub fn new(maps: Tensor) -> Result<Self> {
        if maps.rank() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "action map stack must be K_a x h x w, got {:?}",
                maps.dims()
            )));
        }
        Ok(ActionMapStack { maps })
    }

    pub fn num_actions(&self) -> usize {
        self.maps.dims()[0]
    }

    pub fn h(&self) -> usize {
        self.maps.dims()[1]
    }

    pub fn w(&self) -> usize {
        self.maps.dims()[2]
    }

    pub fn maps(&self) -> &Tensor {
        &self.maps
    }

    /// The h x w slice for action `k`.
    pub fn map(&self, k: usize) -> &[f32] {
        let hw = self.h() * self.w();
        &self.maps.data()[k * hw..(k + 1) * hw]
    }
}

fn check_pair(x: &FeatureMap, pk: &Prototype) -> Result<()> {
    if pk.channels() != x.channels() || pk.side() > x.h().min(x.w()) {
        return Err(Error::ShapeMismatch(format!(
            "feature map {:?} incompatible with prototype {:?}",
            x.grid().dims(),
            pk.patch().dims()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// FFT primitive
// ---------------------------------------------------------------------------

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft2d_complex(buf: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let row_fft = if inverse {
            planner.plan_fft_inverse(w)
        } else {
            planner.plan_fft_forward(w)
        };
        let col_fft = if inverse {
            planner.plan_fft_inverse(h)
        } else {
            planner.plan_fft_forward(h)
        };
        for row in buf.chunks_exact_mut(w) {
            row_fft.process(row);
        }
        let mut col = vec![Complex64::default(); h];
        for j in 0..w {
            for i in 0..h {
                col[i] = buf[i * w + j];
            }
            col_fft.process(&mut col);
            for i in 0..h {
                buf[i * w + j] = col[i];
            }
        }
    });
}

/// Forward unnormalized 2D DFT of a real H x W grid.
pub fn fft2d(h: usize, w: usize, grid: &[f64]) -> Vec<Complex64> {
    assert_eq!(grid.len(), h * w);
    let mut buf: Vec<Complex64> = grid.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2d_complex(&mut buf, h, w, false);
    buf
}

/// Inverse 2D DFT with 1/(H*W) normalization, so `ifft2d(fft2d(g)) == g`.
pub fn ifft2d(h: usize, w: usize, spectrum: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(spectrum.len(), h * w);
    let mut buf = spectrum.to_vec();
    fft2d_complex(&mut buf, h, w, true);
    let scale = 1.0 / (h * w) as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Smallest size >= n whose only prime factors are 2, 3, and 5.
fn next_fast_size(n: usize) -> usize {
    fn smooth(mut m: usize) -> bool {
        for f in [2, 3, 5] {
            while m.is_multiple_of(f) {
                m /= f;
            }
        }
        m == 1
    }
    let mut m = n.max(1);
    while !smooth(m) {
        m += 1;
    }
    m
}

// ---------------------------------------------------------------------------
// Correlation backends
// ---------------------------------------------------------------------------

/// Direct spatial cross-correlation, center-aligned: the score at (u, v) is
/// the channel-averaged dot product of the prototype with the grid window
/// centered at (u, v), where cells outside the grid contribute zero.
pub fn xcorr_naive(x: &FeatureMap, pk: &Prototype) -> Result<Tensor> {
    check_pair(x, pk)?;
    let (h, w, c) = (x.h(), x.w(), x.channels());
    let p = pk.side();
    let c0 = (p / 2) as isize;
    let grid = x.grid();
    let patch = pk.patch();
    let mut out = vec![0.0f32; h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = 0.0f64;
            for a in 0..p {
                let row = u as isize + a as isize - c0;
                if row < 0 || row >= h as isize {
                    continue;
                }
                for b in 0..p {
                    let col = v as isize + b as isize - c0;
                    if col < 0 || col >= w as isize {
                        continue;
                    }
                    let xi = grid.idx3(row as usize, col as usize, 0);
                    let pi = patch.idx3(a, b, 0);
                    for ch in 0..c {
                        acc += grid.data()[xi + ch] as f64 * patch.data()[pi + ch] as f64;
                    }
                }
            }
            out[u * w + v] = (acc / c as f64) as f32;
        }
    }
    Tensor::new(&[h, w], out)
}

/// FFT cross-correlation; agrees with [`xcorr_naive`] elementwise.
pub fn xcorr_fft(x: &FeatureMap, pk: &Prototype) -> Result<Tensor> {
    check_pair(x, pk)?;
    let (h, w, c) = (x.h(), x.w(), x.channels());
    let p = pk.side();
    let c0 = p / 2;
    let ph = next_fast_size(h + p - 1);
    let pw = next_fast_size(w + p - 1);
    let grid = x.grid();
    let patch = pk.patch();

    let mut acc = vec![0.0f64; h * w];
    let mut xb = vec![Complex64::default(); ph * pw];
    let mut pb = vec![Complex64::default(); ph * pw];
    for ch in 0..c {
        for v in xb.iter_mut() {
            *v = Complex64::default();
        }
        for v in pb.iter_mut() {
            *v = Complex64::default();
        }
        for i in 0..h {
            for j in 0..w {
                xb[i * pw + j] = Complex64::new(grid.at3(i, j, ch) as f64, 0.0);
            }
        }
        for a in 0..p {
            for b in 0..p {
                pb[a * pw + b] = Complex64::new(patch.at3(a, b, ch) as f64, 0.0);
            }
        }
        fft2d_complex(&mut xb, ph, pw, false);
        fft2d_complex(&mut pb, ph, pw, false);
        for (xv, pv) in xb.iter_mut().zip(pb.iter()) {
            *xv *= pv.conj();
        }
        fft2d_complex(&mut xb, ph, pw, true);
        let scale = 1.0 / (ph * pw) as f64;
        // Circular shift realizing the center-aligned convention: the
        // correlation of the window centered at (u, v) sits at circular
        // index (u - p/2 mod ph, v - p/2 mod pw).
        for u in 0..h {
            let su = (u + ph - c0) % ph;
            for v in 0..w {
                let sv = (v + pw - c0) % pw;
                acc[u * w + v] += xb[su * pw + sv].re * scale;
            }
        }
    }
    let inv_c = 1.0 / c as f64;
    let out: Vec<f32> = acc.iter().map(|&v| (v * inv_c) as f32).collect();
    Tensor::new(&[h, w], out)
}

/// Correlates `x` against every prototype in the bank, in action-id order.
pub fn gen_action_maps(x: &FeatureMap, bank: &PrototypeBank) -> Result<ActionMapStack> {
    if bank.num_actions() == 0 {
        return Err(Error::InvalidConfig("empty prototype bank".into()));
    }
    let (h, w) = (x.h(), x.w());
    let mut data = Vec::with_capacity(bank.num_actions() * h * w);
    for k in 0..bank.num_actions() {
        let map = xcorr_fft(x, &bank.prototype(k))?;
        data.extend_from_slice(map.data());
    }
    ActionMapStack::new(Tensor::new(&[bank.num_actions(), h, w], data)?)
}

/// Per-map z-score standardization (optional; off by default everywhere).
/// A constant map standardizes to all zeros.
pub fn zscore_maps(stack: &ActionMapStack) -> ActionMapStack {
    let (ka, h, w) = (stack.num_actions(), stack.h(), stack.w());
    let hw = h * w;
    let mut data = Vec::with_capacity(ka * hw);
    for k in 0..ka {
        let m = stack.map(k);
        let mean = m.iter().map(|&v| v as f64).sum::<f64>() / hw as f64;
        let var = m.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / hw as f64;
        let sd = var.sqrt();
        if sd == 0.0 {
            data.extend(std::iter::repeat_n(0.0f32, hw));
        } else {
            data.extend(m.iter().map(|&v| (((v as f64) - mean) / sd) as f32));
        }
    }
    ActionMapStack::new(Tensor::new(&[ka, h, w], data).expect("finite zscore")).expect("shape")
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub h: usize,
    pub w: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub p: usize,
    #[serde(rename = "K_a")]
    pub k_a: usize,
    pub repeats: usize,
    #[serde(default = "default_bench_seed")]
    pub seed: u64,
}

fn default_bench_seed() -> u64 {
    0xBEC8
}

/// One JSON line of benchmark output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub backend: String,
    pub h: usize,
    pub w: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub p: usize,
    #[serde(rename = "K_a")]
    pub k_a: usize,
    pub median_ns: u128,
    pub agreement: bool,
}

/// Runs both backends on identical seeded inputs, checks agreement, then
/// times each over `repeats` runs and reports median wall time.
pub fn bench_corr(cfg: &BenchConfig) -> Result<Vec<BenchReport>> {
    if cfg.p > cfg.h.min(cfg.w) || cfg.c == 0 || cfg.k_a == 0 || cfg.repeats == 0 {
        return Err(Error::InvalidConfig(format!(
            "invalid bench sizes: h={} w={} C={} p={} K_a={} repeats={}",
            cfg.h, cfg.w, cfg.c, cfg.p, cfg.k_a, cfg.repeats
        )));
    }
    let x = FeatureMap::new(seeded_fill(&[cfg.h, cfg.w, cfg.c], cfg.seed, Dist::Uniform))?;
    let protos: Vec<Prototype> = (0..cfg.k_a)
        .map(|k| {
            Prototype::new(
                seeded_fill(
                    &[cfg.p, cfg.p, cfg.c],
                    crate::rng::derive_seed(cfg.seed, k as u64 + 1),
                    Dist::Uniform,
                ),
                k,
            )
        })
        .collect::<Result<_>>()?;

    let mut agreement = true;
    for pk in &protos {
        let naive = xcorr_naive(&x, pk)?;
        let fft = xcorr_fft(&x, pk)?;
        let max_naive = naive
            .data()
            .iter()
            .fold(0.0f64, |m, &v| m.max((v as f64).abs()));
        let max_err = naive
            .data()
            .iter()
            .zip(fft.data())
            .fold(0.0f64, |m, (&a, &b)| m.max((a as f64 - b as f64).abs()));
        if max_err > 1e-6 * (1.0 + max_naive) {
            agreement = false;
        }
    }

    let time_backend = |f: &dyn Fn() -> Result<()>| -> Result<u128> {
        let mut times = Vec::with_capacity(cfg.repeats);
        for _ in 0..cfg.repeats {
            let t0 = Instant::now();
            f()?;
            times.push(t0.elapsed().as_nanos());
        }
        times.sort_unstable();
        Ok(times[times.len() / 2])
    };

    let naive_ns = time_backend(&|| {
        for pk in &protos {
            std::hint::black_box(xcorr_naive(&x, pk)?);
        }
        Ok(())
    })?;
    let fft_ns = time_backend(&|| {
        for pk in &protos {
            std::hint::black_box(xcorr_fft(&x, pk)?);
        }
        Ok(())
    })?;

    let mk = |backend: &str, median_ns: u128| BenchReport {
        backend: backend.to_string(),
        h: cfg.h,
        w: cfg.w,
        c: cfg.c,
        p: cfg.p,
        k_a: cfg.k_a,
        median_ns,
        agreement,
    };
    Ok(vec![mk("naive", naive_ns), mk("fft", fft_ns)])
}
