//! Worked examples, one function each, with the oracle used to pin any
//! computed value. Shared by the acceptance run and `examples_suite.rs`.

#![allow(dead_code)]

use dvnet::classifiers::*;
use dvnet::features::*;
use dvnet::fusion::*;
use dvnet::harness::*;
use dvnet::image::{BinaryMask, GrayImage};
use dvnet::nn::*;
use dvnet::par::Execution;
use dvnet::preprocess::*;
use dvnet::rng::SplitMix64;
use dvnet::synthdata::*;
use dvnet::tensor::{conv2d_valid, finite_difference_check, Tensor};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($c:expr, $($m:tt)+) => {
        if !$c {
            return Err(format!($($m)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

pub fn rand_tensor(rng: &mut SplitMix64, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
}

pub fn rand_image(rng: &mut SplitMix64, w: usize, h: usize) -> GrayImage {
    GrayImage::new(w, h, (0..w * h).map(|_| rng.below(256) as u8).collect()).unwrap()
}

fn t(shape: &[usize], v: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), v.to_vec()).unwrap()
}

// ---- tensor-core ----

fn elementwise() -> Check {
    let a = Tensor::from_vec(vec![1.0, 2.0]);
    ensure!(ok(a.add(&Tensor::from_vec(vec![3.0, 4.0])))?.data() == [4.0, 6.0], "add");
    ensure!(Tensor::from_vec(vec![1.0, -2.0]).scale(0.0).data() == [0.0, 0.0], "scale by zero");
    ensure!(ok(Tensor::from_vec(vec![2.0, 3.0]).mul(&Tensor::from_vec(vec![4.0, 5.0])))?.data() == [8.0, 15.0], "mul");
    Ok(())
}

fn matmul_cases() -> Check {
    let b = t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]);
    ensure!(ok(Tensor::identity(2).matmul(&b))? == b, "identity");
    ensure!(ok(t(&[1, 2], &[1.0, 2.0]).matmul(&t(&[2, 1], &[3.0, 4.0])))?.data() == [11.0], "dot");
    let mut rng = SplitMix64::new(5);
    let (a, b) = (rand_tensor(&mut rng, &[3, 4]), rand_tensor(&mut rng, &[4, 2]));
    let c = ok(a.matmul(&b))?;
    for i in 0..3 {
        for j in 0..2 {
            let mut s = 0.0;
            for k in 0..4 {
                s += a.data()[i * 4 + k] * b.data()[k * 2 + j];
            }
            ensure!(c.data()[i * 2 + j] == s, "entry ({i},{j}) differs from the triple loop");
        }
    }
    Ok(())
}

/// Quadruple-loop valid cross-correlation.
pub fn conv_oracle(x: &Tensor, k: &Tensor, b: &Tensor) -> Tensor {
    let (ci, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (co, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut out = vec![0.0; co * oh * ow];
    for o in 0..co {
        for y in 0..oh {
            for xx in 0..ow {
                let mut s = b.data()[o];
                for c in 0..ci {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            s += x.data()[(c * h + y + dy) * w + xx + dx] * k.data()[((o * ci + c) * kh + dy) * kw + dx];
                        }
                    }
                }
                out[(o * oh + y) * ow + xx] = s;
            }
        }
    }
    Tensor::new(vec![co, oh, ow], out).unwrap()
}

fn conv_cases() -> Check {
    let x = t(&[1, 3, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
    let k = t(&[1, 1, 2, 2], &[1.0, 0.0, 0.0, 1.0]);
    let zero = Tensor::zeros(&[1]);
    let y = ok(conv2d_valid(&x, &k, &zero))?;
    ensure!(y == conv_oracle(&x, &k, &zero), "oracle disagrees");
    ensure!(y.data() == [6.0, 8.0, 12.0, 14.0], "got {:?}", y.data());
    ensure!(ok(conv2d_valid(&x, &t(&[1, 1, 1, 1], &[1.0]), &zero))?.data() == x.data(), "1x1 identity");
    let y = ok(conv2d_valid(&Tensor::zeros(&[1, 3, 3]), &Tensor::zeros(&[1, 1, 2, 2]), &t(&[1], &[5.0])))?;
    ensure!(y.data().iter().all(|&v| v == 5.0), "bias only");
    Ok(())
}

fn gradcheck_cases() -> Check {
    let x = Tensor::from_vec(vec![1.0, 2.0]);
    let sq = |v: &Tensor| v.data().iter().map(|a| a * a).sum::<f64>();
    let r = ok(finite_difference_check(sq, &x, &Tensor::from_vec(vec![2.0, 4.0]), 1e-5, 1e-6))?;
    ensure!(r.passed, "quadratic: {r:?}");
    let mut rng = SplitMix64::new(1);
    let y = rand_tensor(&mut rng, &[7]);
    let r = ok(finite_difference_check(|v: &Tensor| v.sum(), &y, &Tensor::filled(&[7], 1.0), 1e-5, 1e-6))?;
    ensure!(r.passed, "linear: {r:?}");
    let r = ok(finite_difference_check(sq, &x, &Tensor::from_vec(vec![2.0, 3.9]), 1e-5, 1e-6))?;
    ensure!(!r.passed, "wrong gradient accepted");
    Ok(())
}

// ---- nn-layers ----

fn activation_values() -> Check {
    ensure!(Activation::Sigmoid.eval(0.0) == 0.5, "sigmoid(0)");
    ensure!(Activation::Tanh.eval(0.0) == 0.0, "tanh(0)");
    ensure!(Activation::Relu.eval(-2.0) == 0.0 && Activation::Relu.eval(3.0) == 3.0, "relu");
    let one = Tensor::from_vec(vec![1.0]);
    let at0 = Tensor::from_vec(vec![0.0]);
    ensure!(ok(activation_backward(Activation::Sigmoid, &at0, &one))?.data() == [0.25], "sigmoid'(0)");
    ensure!(ok(activation_backward(Activation::Relu, &at0, &one))?.data() == [0.0], "relu'(0)");
    let mut rng = SplitMix64::new(2);
    for kind in [Activation::Sigmoid, Activation::Tanh] {
        let x = rand_tensor(&mut rng, &[20]).scale(3.0);
        let u = rand_tensor(&mut rng, &[20]);
        let g = ok(activation_backward(kind, &x, &u))?;
        let f = |v: &Tensor| apply_activation(kind, v).data().iter().zip(u.data()).map(|(a, b)| a * b).sum::<f64>();
        let r = ok(finite_difference_check(f, &x, &g, 1e-6, 1e-6))?;
        ensure!(r.passed, "{kind:?}: {r:?}");
    }
    Ok(())
}

fn maxpool_cases() -> Check {
    let x = t(&[1, 4, 4], &[1., 3., 2., 4., 5., 6., 7., 8., 3., 2., 1., 0., 1., 2., 3., 4.]);
    let (y, _) = ok(maxpool2x2(&x))?;
    ensure!(y.data() == [6.0, 8.0, 3.0, 4.0], "got {:?}", y.data());
    let (y, _) = ok(maxpool2x2(&Tensor::filled(&[2, 6, 6], 1.5)))?;
    ensure!(y.shape() == [2, 3, 3] && y.data().iter().all(|&v| v == 1.5), "constant");
    let mut rng = SplitMix64::new(3);
    let x = rand_tensor(&mut rng, &[2, 6, 6]);
    let (y, mask) = ok(maxpool2x2(&x))?;
    let u = rand_tensor(&mut rng, y.shape());
    let g = ok(maxpool2x2_backward(&mask, &u))?;
    let nonzero = g.data().iter().filter(|&&v| v != 0.0).count();
    ensure!(nonzero == y.len(), "upstream must land on exactly one position per window");
    for (o, &i) in mask.argmax().iter().enumerate() {
        ensure!(g.data()[i] == u.data()[o] && x.data()[i] == y.data()[o], "routing at output {o}");
    }
    let f = |v: &Tensor| maxpool2x2(v).unwrap().0.data().iter().zip(u.data()).map(|(a, b)| a * b).sum::<f64>();
    let r = ok(finite_difference_check(f, &x, &g, 1e-6, 1e-6))?;
    ensure!(r.passed, "{r:?}");
    Ok(())
}

fn dense_cases() -> Check {
    let x = Tensor::from_vec(vec![0.5, -1.5]);
    ensure!(ok(dense_forward(&x, &Tensor::identity(2), &Tensor::zeros(&[2])))? == x, "identity");
    let y = ok(dense_forward(&x, &Tensor::zeros(&[2, 2]), &Tensor::from_vec(vec![1.0, 2.0])))?;
    ensure!(y.data() == [1.0, 2.0], "bias only");
    let mut rng = SplitMix64::new(4);
    let (w, b, x) = (rand_tensor(&mut rng, &[3, 5]), rand_tensor(&mut rng, &[3]), rand_tensor(&mut rng, &[5]));
    let y = ok(dense_forward(&x, &w, &b))?;
    let oracle = ok(ok(w.matmul(&ok(x.clone().reshape(&[5, 1]))?))?.reshape(&[3]))?;
    let oracle = ok(oracle.add(&b))?;
    let diff = y.data().iter().zip(oracle.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure!(diff <= 1e-15, "differs from matmul + add by {diff}");
    Ok(())
}

fn cross_entropy_cases() -> Check {
    let (l, _) = ok(softmax_cross_entropy(&Tensor::from_vec(vec![0.0, 0.0]), 0))?;
    ensure!((l - std::f64::consts::LN_2).abs() < 1e-12, "uniform loss {l}");
    let (l, g) = ok(softmax_cross_entropy(&Tensor::from_vec(vec![1000.0, -1000.0]), 0))?;
    ensure!(l.abs() < 1e-12 && g.is_finite(), "saturated loss {l}");
    let mut rng = SplitMix64::new(6);
    let z = rand_tensor(&mut rng, &[5]).scale(4.0);
    let (_, g) = ok(softmax_cross_entropy(&z, 2))?;
    let r = ok(finite_difference_check(|v: &Tensor| softmax_cross_entropy(v, 2).unwrap().0, &z, &g, 1e-6, 1e-6))?;
    ensure!(r.passed, "{r:?}");
    Ok(())
}

fn sgd_cases() -> Check {
    let cfg = TrainConfig { learning_rate: 0.1, l2_weight: 0.0, ..TrainConfig::default() };
    let mut p = vec![Tensor::from_vec(vec![1.0])];
    ok(sgd_step(&mut p, &[Tensor::from_vec(vec![1.0])], &cfg))?;
    ensure!((p[0].data()[0] - 0.9).abs() < 1e-15, "one step");
    let mut p = vec![Tensor::from_vec(vec![0.3, -7.0])];
    ok(sgd_step(&mut p, &[Tensor::zeros(&[2])], &cfg))?;
    ensure!(p[0].data() == [0.3, -7.0], "zero gradient moved params");
    let mut p = vec![Tensor::from_vec(vec![0.0])];
    for _ in 0..200 {
        let g = Tensor::from_vec(vec![2.0 * (p[0].data()[0] - 3.0)]);
        ok(sgd_step(&mut p, &[g], &cfg))?;
    }
    // Error contracts by 0.8 per step: 3 * 0.8^200 ≈ 1.2e-19.
    ensure!((p[0].data()[0] - 3.0).abs() < 1e-6, "quadratic not solved");
    Ok(())
}

fn init_cases() -> Check {
    let a = ok(init_parameters(&single_net_spec(), 9))?;
    let b = ok(init_parameters(&single_net_spec(), 9))?;
    ensure!(a.params() == b.params(), "same seed differs");
    for (name, p) in a.param_names().iter().zip(a.params()) {
        if name.ends_with("bias") {
            ensure!(p.data().iter().all(|&v| v == 0.0), "{name} not zero");
        }
    }
    // The first dense layer has 4096 * 128 weights drawn from U(-L, L).
    let (names, params) = (a.param_names(), a.params());
    let i = names.iter().position(|n| n.contains("trunk") && n.ends_with("weights")).ok_or("no trunk weights")?;
    let w = params[i].data();
    ensure!(w.len() >= 100_000, "only {} draws", w.len());
    let limit = (6.0 / (4096.0 + 128.0) as f64).sqrt();
    let se = limit / 3f64.sqrt() / (w.len() as f64).sqrt();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    ensure!(mean.abs() <= 3.0 * se, "mean {mean} outside 3 sigma ({se})");
    Ok(())
}

fn checkpoint_cases() -> Check {
    let net = build_two_views_net(12);
    let bytes = serialize_network(&net);
    let back = ok(deserialize_network(&bytes))?;
    ensure!(serialize_network(&back) == bytes, "bytes changed on round trip");
    ensure!(deserialize_network(&bytes[..bytes.len() / 2]).is_err(), "truncated file accepted");
    let mut rng = SplitMix64::new(8);
    let (x1, x2) = (rand_tensor(&mut rng, &[1, 64, 64]), rand_tensor(&mut rng, &[1, 64, 64]));
    ensure!(ok(net.forward(&[&x1, &x2]))? == ok(back.forward(&[&x1, &x2]))?, "restored forward differs");
    Ok(())
}

// ---- preprocess ----

fn median_cases() -> Check {
    let c = GrayImage::filled(9, 7, 77);
    ensure!(ok(median_filter(&c, 1))? == c, "constant changed");
    let mut img = GrayImage::filled(5, 5, 0);
    img.set(2, 2, 255);
    ensure!(ok(median_filter(&img, 1))?.get(2, 2) == 0, "bright pixel survived");
    let mut salt = GrayImage::filled(20, 20, 100);
    for (x, y) in [(2, 2), (6, 3), (10, 10), (15, 4), (3, 16), (17, 17)] {
        salt.set(x, y, 255);
    }
    let once = ok(median_filter(&salt, 1))?;
    ensure!(ok(median_filter(&once, 1))? == once, "second pass changed the image");
    Ok(())
}

fn equalize_cases() -> Check {
    ensure!(histogram_equalize(&GrayImage::filled(6, 6, 40)).pixels().iter().all(|&p| p == 255), "constant");
    let two = GrayImage::from_fn(8, 8, |x, _| if x < 4 { 0 } else { 255 });
    let lut = equalization_lut(&two);
    ensure!((lut[0] == 127 || lut[0] == 128) && lut[255] == 255, "two-level maps to {} / {}", lut[0], lut[255]);
    // One pixel per level: every output bin holds 1 ± 1.
    let ramp = GrayImage::from_fn(256, 1, |x, _| x as u8);
    let h = histogram(&histogram_equalize(&ramp));
    ensure!(h.iter().all(|&c| c.abs_diff(1) <= 1), "ramp output not uniform: {h:?}");
    let mut rng = SplitMix64::new(10);
    for _ in 0..20 {
        let lut = equalization_lut(&rand_image(&mut rng, 16, 16));
        ensure!(lut.windows(2).all(|w| w[0] <= w[1]), "lookup table not monotone");
    }
    Ok(())
}

/// Direct O(N²) DFT with the zero frequency moved to `(w/2, h/2)`.
pub fn dft_oracle(img: &GrayImage) -> Vec<(f64, f64)> {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![(0.0, 0.0); w * h];
    for v in 0..h {
        for u in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let a = -2.0 * std::f64::consts::PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    let p = f64::from(img.get(x, y));
                    re += p * a.cos();
                    im += p * a.sin();
                }
            }
            out[((v + h / 2) % h) * w + (u + w / 2) % w] = (re, im);
        }
    }
    out
}

fn fft_cases() -> Check {
    let f = fft2_forward(&GrayImage::filled(6, 4, 9));
    ensure!((f.dc().re - 9.0 * 24.0).abs() < 1e-9 && f.dc().im.abs() < 1e-9, "DC {}", f.dc());
    let (dx, dy) = f.dc_position();
    for (i, c) in f.coeffs().iter().enumerate() {
        if i != dy * 6 + dx {
            ensure!(c.norm() < 1e-9, "bin {i} = {c}");
        }
    }
    let mut rng = SplitMix64::new(11);
    let img = rand_image(&mut rng, 8, 8);
    let f = fft2_forward(&img);
    for (c, o) in f.coeffs().iter().zip(dft_oracle(&img)) {
        ensure!((c.re - o.0).abs() <= 1e-9 && (c.im - o.1).abs() <= 1e-9, "FFT vs DFT");
    }
    let raw = fft2_inverse_real(&f);
    let err = raw.iter().zip(img.pixels()).map(|(a, &b)| (a - f64::from(b)).abs()).fold(0.0, f64::max);
    ensure!(err < 1e-9, "round trip error {err}");
    ensure!(fft2_inverse(&f) == img, "quantized round trip");
    // 100 + 100 cos(pi x / 2) is exactly 200, 100, 0, 100: integer samples.
    let cos = GrayImage::from_fn(8, 8, |x, _| [200, 100, 0, 100][x % 4]);
    let f = fft2_forward(&cos);
    let (dx, dy) = f.dc_position();
    let hits: Vec<usize> =
        (0..64).filter(|&i| i != dy * 8 + dx && f.coeffs()[i].norm() > 1e-9).collect();
    ensure!(hits.len() == 2, "nonzero bins {hits:?}");
    let (a, b) = ((hits[0] % 8, hits[0] / 8), (hits[1] % 8, hits[1] / 8));
    ensure!(a.1 == dy && b.1 == dy && a.0 + b.0 == 2 * dx, "bins not symmetric: {a:?} {b:?}");
    Ok(())
}

fn butterworth_cases() -> Check {
    for n in 1..=4 {
        ensure!(butterworth_gain(0.0, 5.0, n) == 1.0, "H(0) at n={n}");
        ensure!((butterworth_gain(5.0, 5.0, n) - 0.5).abs() <= 1e-12, "H(d0) at n={n}");
    }
    let (near, far) = (butterworth_gain(0.9, 1.0, 8), butterworth_gain(1.1, 1.0, 8));
    ensure!(near > butterworth_gain(0.9, 1.0, 1) && far < butterworth_gain(1.1, 1.0, 1), "order does not sharpen");
    let gains: Vec<f64> = (0..100).map(|d| butterworth_gain(d as f64 * 0.1, 3.0, 2)).collect();
    ensure!(gains.windows(2).all(|w| w[0] >= w[1]), "not radially monotone");
    ensure!(butterworth_lowpass(&fft2_forward(&GrayImage::filled(4, 4, 1)), 0.0, 2).is_err(), "d0 = 0 accepted");
    Ok(())
}

pub fn random_mask(rng: &mut SplitMix64, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::new(w, h, (0..w * h).map(|_| rng.next_f64() < density).collect()).unwrap()
}

fn morphology_cases() -> Check {
    let mut m = BinaryMask::empty(9, 9);
    m.set(4, 4, true);
    ensure!(morph_open_close(&m, 1).area() == 0, "isolated pixel survived");
    let mut sq = BinaryMask::new(16, 16, (0..256).map(|i| (3..13).contains(&(i % 16)) && (3..13).contains(&(i / 16))).collect()).unwrap();
    sq.set(7, 7, false);
    let closed = morph_open_close(&sq, 1);
    ensure!(closed.get(7, 7), "hole not filled");
    let mut rng = SplitMix64::new(13);
    for i in 0..100 {
        let m = random_mask(&mut rng, 24, 24, 0.2 + 0.6 * (i as f64 / 100.0));
        let once = morph_open_close(&m, 1);
        ensure!(morph_open_close(&once, 1) == once, "mask {i} not idempotent");
    }
    Ok(())
}

/// Argmax of an independent between-class-variance scan; pixels `>= t` are
/// the upper class.
pub fn otsu_oracle(img: &GrayImage) -> Option<u8> {
    let n = img.pixels().len() as f64;
    let mut best: Option<(f64, u8)> = None;
    for t in 1..256usize {
        let (lo, hi): (Vec<f64>, Vec<f64>) = {
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            for &p in img.pixels() {
                if (p as usize) < t { lo.push(f64::from(p)) } else { hi.push(f64::from(p)) }
            }
            (lo, hi)
        };
        if lo.is_empty() || hi.is_empty() {
            continue;
        }
        let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
        let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
        let v = (lo.len() as f64 / n) * (hi.len() as f64 / n) * (m0 - m1).powi(2);
        if best.is_none_or(|(b, _)| v > b * (1.0 + 1e-12)) {
            best = Some((v, t as u8));
        }
    }
    best.map(|(_, t)| t)
}

fn otsu_cases() -> Check {
    let img = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 10 } else { 200 });
    let t = otsu_threshold(&img).ok_or("no threshold")?;
    ensure!(t > 10 && t <= 200, "threshold {t}");
    let m = binarize_otsu(&img);
    ensure!((0..100).all(|i| m.bits()[i] == (i % 10 >= 5)), "split does not follow the populations");
    ensure!(binarize_otsu(&GrayImage::filled(7, 7, 90)).area() == 0, "constant image");
    let mut rng = SplitMix64::new(14);
    for _ in 0..50 {
        let img = rand_image(&mut rng, 12, 12);
        ensure!(otsu_threshold(&img) == otsu_oracle(&img), "exhaustive scan disagrees");
    }
    // Inversion flips the mask away from the band between the two thresholds.
    let img = GrayImage::from_fn(20, 20, |x, y| ((x * 13 + y * 7) % 256) as u8);
    let inv = img.invert();
    let (t, ti) = (otsu_threshold(&img).unwrap(), otsu_threshold(&inv).unwrap());
    let (m, mi) = (binarize_otsu(&img), binarize_otsu(&inv));
    let (lo, hi) = ((255 - ti as usize + 1).min(t as usize), (255 - ti as usize + 1).max(t as usize));
    for (i, &p) in img.pixels().iter().enumerate() {
        if (p as usize) < lo || (p as usize) >= hi {
            ensure!(m.bits()[i] != mi.bits()[i], "pixel {i} ({p}) not inverted");
        }
    }
    Ok(())
}

/// Regression value of the pipeline mask area on a fixed, noiseless render.
pub const GOLDEN_MASK_AREA: usize = 349;

fn pipeline_cases() -> Check {
    let (c, _) = ok(render_lesion(&LesionParams::centered(LesionClass::Benign, 10.0, 1)))?;
    let (enh, mask) = ok(roi_pipeline(&c, &PipelineParams::default()))?;
    ensure!(mask.area() == GOLDEN_MASK_AREA, "mask area {}", mask.area());
    let (enh2, mask2) = ok(roi_pipeline(&c, &PipelineParams::default()))?;
    ensure!(enh == enh2 && mask == mask2, "pipeline not deterministic");
    let (_, zero) = ok(roi_pipeline(&GrayImage::filled(32, 32, 0), &PipelineParams::default()))?;
    ensure!(zero.area() == 0, "zero image produced a mask");
    Ok(())
}

// ---- features ----

fn hog_cases() -> Check {
    let p = HogParams::default();
    ensure!(p.length(64, 64) == 1764, "length {}", p.length(64, 64));
    let flat = ok(hog_descriptor(&GrayImage::filled(64, 64, 120), p))?;
    ensure!(flat.len() == 1764 && flat.values.iter().all(|&v| v == 0.0), "constant image");
    let step = GrayImage::from_fn(64, 64, |_, y| if y < 32 { 30 } else { 220 });
    let d = ok(hog_descriptor(&step, p))?;
    let mut per_bin = [0.0; 9];
    for (i, v) in d.values.iter().enumerate() {
        per_bin[i % 9] += v.abs();
    }
    let total: f64 = per_bin.iter().sum();
    // Bin 4 is centred on 90 degrees: the vertical gradient of a horizontal edge.
    ensure!(total > 0.0 && per_bin[4] / total > 0.999, "bins {per_bin:?}");
    let mut rng = SplitMix64::new(15);
    let d = ok(hog_descriptor(&rand_image(&mut rng, 64, 64), p))?;
    for block in d.values.chunks(36) {
        ensure!(block.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.0 + 1e-9, "block norm above 1");
    }
    Ok(())
}

/// Symmetric normalized co-occurrence matrix by explicit pair listing.
pub fn glcm_oracle(img: &GrayImage, levels: usize, (dr, dc): (isize, isize)) -> Vec<f64> {
    let q = |p: u8| (p as usize * levels) / 256;
    let mut m = vec![0.0; levels * levels];
    let mut pairs = 0.0;
    for y in 0..img.height() as isize {
        for x in 0..img.width() as isize {
            let (y2, x2) = (y + dr, x + dc);
            if y2 < 0 || x2 < 0 || y2 >= img.height() as isize || x2 >= img.width() as isize {
                continue;
            }
            let (a, b) = (q(img.get(x as usize, y as usize)), q(img.get(x2 as usize, y2 as usize)));
            m[a * levels + b] += 1.0;
            m[b * levels + a] += 1.0;
            pairs += 2.0;
        }
    }
    m.iter().map(|v| v / pairs).collect()
}

fn glcm_cases() -> Check {
    let img = GrayImage::new(2, 2, vec![0, 0, 255, 255]).unwrap();
    let m = ok(glcm_matrix(&img, 2, (0, 1)))?;
    ensure!(m == vec![0.5, 0.0, 0.0, 0.5], "matrix {m:?}");
    let s = glcm_statistics(&m, 2);
    ensure!(s[2] == 0.5, "energy {}", s[2]);
    let m = ok(glcm_matrix(&GrayImage::filled(8, 8, 77), 16, (1, 1)))?;
    ensure!(m.iter().filter(|&&v| v > 0.0).count() == 1, "constant image occupies several cells");
    let s = glcm_statistics(&m, 16);
    ensure!(s[2] == 1.0 && s[0] == 0.0, "energy {} contrast {}", s[2], s[0]);
    let mut rng = SplitMix64::new(16);
    for off in GLCM_OFFSETS {
        let img = rand_image(&mut rng, 15, 11);
        let m = ok(glcm_matrix(&img, 16, off))?;
        ensure!(m.iter().all(|&v| v >= 0.0) && (m.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "not a distribution");
        let o = glcm_oracle(&img, 16, off);
        ensure!(m.iter().zip(&o).all(|(a, b)| (a - b).abs() <= 1e-15), "offset {off:?} disagrees with pair listing");
    }
    ensure!(ok(glcm_features(&rand_image(&mut rng, 64, 64)))?.len() == 16, "GLCM length");
    Ok(())
}

fn hgd_cases() -> Check {
    let flat = ok(hgd_descriptor(&GrayImage::filled(16, 16, 50), HGD_BINS))?;
    ensure!(flat.values.iter().all(|&v| v == 0.0), "constant image");
    let ramp = ok(hgd_descriptor(&GrayImage::from_fn(32, 16, |x, _| (x * 8) as u8), HGD_BINS))?;
    ensure!((ramp.values[0] - 1.0).abs() <= 1e-12, "ramp mass {:?}", &ramp.values[..4]);
    let mut rng = SplitMix64::new(17);
    let d = ok(hgd_descriptor(&rand_image(&mut rng, 32, 32), HGD_BINS))?;
    ensure!((d.values.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "not L1 normalized");
    Ok(())
}

fn easy_examples(n: usize, seed: u64) -> (SynthDataset, Vec<Example>) {
    let ds = generate_dataset(n, n, Difficulty::Easy, seed).unwrap();
    let ex = ds
        .samples
        .iter()
        .map(|s| Example { inputs: vec![s.coronal.to_standardized_tensor()], label: s.label() })
        .collect();
    (ds, ex)
}

/// Distance between class means of trained Single-Net features
/// (easy mode, 2 x 16 samples, seed 5, 3 epochs). Pinned on first run.
pub const PINNED_FEATURE_SEPARATION: f64 = 0.750_089_005_772_360_2;

fn cnn_feature_cases() -> Check {
    let mut net = build_single_net(5);
    let (ds, ex) = easy_examples(16, 5);
    let img = &ds.samples[0].coronal;
    let f = ok(cnn_penultimate_features(&net, img, DescriptorId::Cnn1))?;
    ensure!(f.len() == net.plan().penultimate_width(), "length {}", f.len());
    ensure!(ok(cnn_penultimate_features(&net, img, DescriptorId::Cnn1))? == f, "features not pure");
    let cfg = TrainConfig { learning_rate: 0.1, epochs: 3, batch_size: 8, seed: 5, l2_weight: 0.0 };
    ok(train(&mut net, &ex, &cfg, Execution::Sequential))?;
    let mut means = [vec![0.0; f.len()], vec![0.0; f.len()]];
    for s in &ds.samples {
        let v = ok(cnn_penultimate_features(&net, &s.coronal, DescriptorId::Cnn1))?;
        for (m, x) in means[s.label()].iter_mut().zip(&v.values) {
            *m += x / 16.0;
        }
    }
    let sep = means[0].iter().zip(&means[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    ensure!(sep > 0.0, "no separation");
    // Relative 1e-6 absorbs last-bit differences from the GEMM kernel choice.
    ensure!(
        (sep - PINNED_FEATURE_SEPARATION).abs() <= 1e-6 * PINNED_FEATURE_SEPARATION,
        "separation {sep} vs pinned {PINNED_FEATURE_SEPARATION}"
    );
    Ok(())
}

// ---- classifiers ----

fn svm_cases() -> Check {
    let lin = SvmParams { kernel: KernelKind::Linear, c: 1.0, ..SvmParams::default() };
    let pair = ok(LabeledSet::new(vec![vec![-1.0], vec![1.0]], vec![0, 1], "pair"))?;
    let clf = ok(train_svm(&pair, &lin))?;
    ensure!(ok(clf.predict_score(&[-1.0]))? < 0.5 && ok(clf.predict_score(&[1.0]))? > 0.5, "pair misclassified");
    let Model::Svm(m) = &clf.model else { return Err("not an SVM".into()) };
    ensure!(m.bias.abs() <= 1e-2, "bias {}", m.bias);

    let xor = ok(LabeledSet::new(
        vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![0, 0, 1, 1],
        "xor",
    ))?;
    let rbf = SvmParams { kernel: KernelKind::Rbf, gamma: Some(1.0), c: 10.0, ..SvmParams::default() };
    let clf = ok(train_svm(&xor, &rbf))?;
    for (x, &y) in xor.rows().iter().zip(xor.labels()) {
        ensure!((ok(clf.predict_score(x))? >= 0.5) == (y == 1), "XOR point {x:?}");
    }

    let mut rng = SplitMix64::new(18);
    // Separable, so no multiplier sits at C and duplication just halves them.
    let rows: Vec<Vec<f64>> =
        (0..30).map(|i| vec![0.3 * rng.normal() + if i % 2 == 0 { 3.0 } else { -3.0 }, rng.normal()]).collect();
    let labels: Vec<usize> = (0..30).map(|i| (i % 2 == 0) as usize).collect();
    let lin = SvmParams { tolerance: 1e-10, ..lin };
    let once = ok(train_svm(&ok(LabeledSet::new(rows.clone(), labels.clone(), "a"))?, &lin))?;
    let twice = ok(train_svm(
        &ok(LabeledSet::new(rows.iter().chain(&rows).cloned().collect(), labels.iter().chain(&labels).copied().collect(), "b"))?,
        &lin,
    ))?;
    let (Model::Svm(a), Model::Svm(b)) = (&once.model, &twice.model) else { return Err("not SVMs".into()) };
    let sa = once.standardizer.as_ref().ok_or("no standardizer")?;
    let sb = twice.standardizer.as_ref().ok_or("no standardizer")?;
    for _ in 0..50 {
        let x = vec![rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)];
        let (da, db) = (a.decision(&sa.apply(&x)), b.decision(&sb.apply(&x)));
        ensure!((da - db).abs() <= 1e-6, "duplication moved the decision: {da} vs {db}");
    }
    Ok(())
}

fn forest_cases() -> Check {
    let exec = Execution::Sequential;
    let p = ForestParams { n_trees: 20, max_depth: 4 };
    let mut rng = SplitMix64::new(19);
    let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)]).collect();
    let same = ok(LabeledSet::new(rows.clone(), vec![1; 40], "one class"))?;
    let f = ok(train_random_forest(&same, &p, 1, exec))?;
    for _ in 0..20 {
        ensure!(ok(f.predict_score(&[rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)]))? == 1.0, "degenerate labels");
    }
    let split: Vec<Vec<f64>> =
        (0..40).map(|i| vec![if i < 20 { -0.5 - rng.next_f64() } else { 0.5 + rng.next_f64() }, rng.normal()]).collect();
    let labels: Vec<usize> = (0..40).map(|i| (i >= 20) as usize).collect();
    let data = ok(LabeledSet::new(split, labels, "axis"))?;
    let a = ok(train_random_forest(&data, &p, 7, exec))?;
    let b = ok(train_random_forest(&data, &p, 7, Execution::Parallel))?;
    for _ in 0..100 {
        let x = [rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)];
        ensure!(ok(a.predict_score(&x))? == ok(b.predict_score(&x))?, "same seed, different forest");
    }
    for (x, &y) in data.rows().iter().zip(data.labels()) {
        ensure!((ok(a.predict_score(x))? >= 0.5) == (y == 1), "training point {x:?} misclassified");
    }
    Ok(())
}

/// Scores from a full distance sort, ties to the lower index.
pub fn knn_oracle(rows: &[Vec<f64>], labels: &[usize], k: usize, x: &[f64]) -> f64 {
    let mut d: Vec<(f64, usize)> =
        rows.iter().enumerate().map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum(), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d[..k].iter().filter(|(_, i)| labels[*i] == 1).count() as f64 / k as f64
}

fn knn_cases() -> Check {
    let mut rng = SplitMix64::new(20);
    let rows: Vec<Vec<f64>> = (0..45).map(|_| vec![rng.normal(), rng.normal()]).collect();
    let labels: Vec<usize> = (0..45).map(|i| (i % 5 < 3) as usize).collect();
    let data = ok(LabeledSet::new(rows.clone(), labels.clone(), "knn"))?;
    let k1 = ok(train_knn(&data, 1))?;
    for (x, &y) in rows.iter().zip(&labels) {
        ensure!(ok(k1.predict_score(x))? == y as f64, "k=1 misses a training point");
    }
    let all = ok(train_knn(&data, 45))?;
    ensure!(ok(all.predict_score(&[0.3, -0.2]))? == 0.6, "k=n score");
    let k3 = ok(train_knn(&data, 3))?;
    let Model::Knn(m) = &k3.model else { return Err("not kNN".into()) };
    for _ in 0..100 {
        let x = vec![rng.normal(), rng.normal()];
        // Compare in the standardized space the model stores.
        let z = k3.standardizer.as_ref().map(|s| s.apply(&x)).unwrap_or(x.clone());
        ensure!(m.score(&z) == knn_oracle(&m.rows, &m.labels, 3, &z), "differs from distance sort");
        ensure!(ok(k3.predict_score(&x))? == m.score(&z), "predict_score bypasses the model");
    }
    Ok(())
}

/// Fraction of (positive, negative) pairs ordered correctly, ties half.
pub fn auc_oracle(scores: &[f64], labels: &[usize]) -> f64 {
    let (mut good, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                good += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    good / pairs
}

fn auc_cases() -> Check {
    let s = [0.9, 0.8, 0.3, 0.2];
    ensure!(ok(compute_auc(&s, &[1, 1, 0, 0]))? == 1.0, "perfect");
    ensure!(ok(compute_auc(&s, &[1, 0, 1, 0]))? == 0.75, "3 of 4 pairs");
    ensure!(ok(compute_auc(&[0.4; 6], &[1, 0, 1, 0, 1, 0]))? == 0.5, "ties");
    let mut rng = SplitMix64::new(21);
    for _ in 0..50 {
        let n = 5 + rng.below(40);
        let labels: Vec<usize> = (0..n).map(|i| if i < 2 { i } else { rng.below(2) }).collect();
        let scores: Vec<f64> = (0..n).map(|_| (rng.below(10) as f64) / 10.0).collect();
        ensure!(ok(compute_auc(&scores, &labels))? == auc_oracle(&scores, &labels), "pair count disagrees");
        let r = ok(EvalReport::from_scores(&scores, &labels, 0.5, 1, "h"))?;
        ensure!(r.tp + r.fp + r.tn + r.fn_ == n, "confusion counts");
    }
    let labels = [1, 0, 0, 1, 1, 0];
    let perfect: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let r = ok(EvalReport::from_scores(&perfect, &labels, 0.5, 1, "h"))?;
    ensure!(r.auc == 1.0 && r.accuracy == 1.0 && r.fp == 0 && r.fn_ == 0, "perfect report {r:?}");
    ensure!(ok(EvalReport::from_scores(&[0.7; 6], &labels, 0.5, 1, "h"))?.auc == 0.5, "constant scores");
    Ok(())
}

// ---- fusion ----

fn network_shape_cases() -> Check {
    let net = build_single_net(1);
    let mut rng = SplitMix64::new(22);
    let x = rand_tensor(&mut rng, &[1, 64, 64]);
    let z = ok(net.forward(&[&x]))?;
    ensure!(z.len() == 2, "{} logits", z.len());
    ensure!((softmax(&z).sum() - 1.0).abs() < 1e-12, "softmax does not sum to 1");
    ensure!(build_single_net(1).params() == net.params(), "same seed differs");
    // 64 -> pool 32 -> pool 16 -> pool 8 with same-padded 3x3 convs, 64 filters.
    ensure!(net.plan().concat_width == 64 * 8 * 8, "flatten width {}", net.plan().concat_width);

    let two = build_two_views_net(2);
    ensure!(two.plan().concat_width == 2 * net.plan().concat_width, "concat width");
    let x2 = rand_tensor(&mut rng, &[1, 64, 64]);
    let zero = Tensor::zeros(&[1, 64, 64]);
    ensure!(ok(two.forward(&[&x, &x2]))? != ok(two.forward(&[&x, &zero]))?, "transverse branch ignored");

    let (mut probe, target) = (two.clone(), 1);
    let trace = ok(probe.forward_trace(&[&x, &x2]))?;
    let (_, g) = ok(softmax_cross_entropy(trace.logits(), target))?;
    let grads = ok(probe.backward(&trace, &g))?;
    let names = probe.param_names();
    for branch in ["branch0.", "branch1."] {
        let pi = names.iter().position(|n| n.starts_with(branch)).ok_or("branch params missing")?;
        let j = 7;
        let loss = |net: &Network| softmax_cross_entropy(&net.forward(&[&x, &x2]).unwrap(), target).unwrap().0;
        let eps = 1e-5;
        let w0 = probe.params()[pi].data()[j];
        probe.params_mut()[pi].data_mut()[j] = w0 + eps;
        let up = loss(&probe);
        probe.params_mut()[pi].data_mut()[j] = w0 - eps;
        let down = loss(&probe);
        probe.params_mut()[pi].data_mut()[j] = w0;
        let (num, ana) = ((up - down) / (2.0 * eps), grads[pi].data()[j]);
        ensure!(ana != 0.0, "{branch} gradient is zero");
        ensure!((num - ana).abs() / 1f64.max(num.abs()).max(ana.abs()) <= 1e-4, "{branch}: {num} vs {ana}");
    }
    Ok(())
}

fn probability_fusion_cases() -> Check {
    ensure!((ok(probability_fusion(0.6, 0.8))? - 0.7).abs() < 1e-15, "mean");
    for p in [0.0, 0.3, 1.0] {
        ensure!(ok(probability_fusion(p, p))? == p, "idempotence at {p}");
    }
    ensure!(ok(probability_fusion(0.2, 0.9))? == ok(probability_fusion(0.9, 0.2))?, "symmetry");
    ensure!(probability_fusion(1.5, 0.2).is_err(), "out-of-range input accepted");
    Ok(())
}

fn fused_pipeline_cases() -> Check {
    let c1 = build_single_net(1).plan().penultimate_width();
    let c2 = build_cnn2(1).plan().penultimate_width();
    ensure!(c1 + c2 == 384 && c1 == 128 && c2 == 256, "widths {c1} + {c2}");
    let ds = ok(generate_dataset(10, 10, Difficulty::Easy, 3))?;
    let split = ok(stratified_split(&ds.labels(), 0.3, 3))?;
    let tr: Vec<&DualViewSample> = split.train.iter().map(|&i| &ds.samples[i]).collect();
    let te: Vec<&DualViewSample> = split.test.iter().map(|&i| &ds.samples[i]).collect();
    let cfg = FusionConfig {
        train: TrainConfig { learning_rate: 0.1, epochs: 1, batch_size: 4, seed: 3, l2_weight: 0.0 },
        ..FusionConfig::default()
    };
    let run = || -> Result<String, String> {
        let m = ok(train_fusion_pipeline(&tr, &cfg, Execution::Parallel))?;
        ensure!(ok(m.fused_features(&te[..1], Execution::Sequential))?[0].len() == 384, "fused length");
        ok(serde_json::to_string(&ok(m.evaluate(&te, 3, "h", Execution::Sequential))?))
    };
    ensure!(run()? == run()?, "reports differ between runs");
    Ok(())
}

fn view_comparison_cases() -> Check {
    let mut ds = ok(generate_dataset(20, 20, Difficulty::Easy, 4))?;
    let mut rng = SplitMix64::new(23);
    for s in &mut ds.samples {
        s.transverse = rand_image(&mut rng, 64, 64);
    }
    let split = ok(stratified_split(&ds.labels(), 0.4, 4))?;
    let tr: Vec<&DualViewSample> = split.train.iter().map(|&i| &ds.samples[i]).collect();
    let te: Vec<&DualViewSample> = split.test.iter().map(|&i| &ds.samples[i]).collect();
    let cfg = TrainConfig { learning_rate: 0.1, epochs: 4, batch_size: 8, seed: 4, l2_weight: 0.0 };
    let vc = run_view_comparison(&tr, &te, &cfg, "h", Execution::Parallel);
    ensure!(vc.is_complete(), "a model failed: {:?}", vc.reports);
    let names: Vec<&str> = vc.reports.iter().map(|(n, _)| n.as_str()).collect();
    ensure!(names == VIEW_MODELS, "report names {names:?}");
    let reps: Vec<&EvalReport> = vc.reports.iter().map(|(_, r)| r.as_ref().unwrap()).collect();
    ensure!(reps.iter().all(|r| r.seed == 4 && r.config_hash == "h" && r.total() == te.len()), "provenance differs");
    let (pc, pt) = (vc.p_coronal.as_ref().unwrap(), vc.p_transverse.as_ref().unwrap());
    let fused: Vec<f64> = pc.iter().zip(pt).map(|(&a, &b)| probability_fusion(a, b).unwrap()).collect();
    ensure!(reps[2].auc == auc_oracle(&fused, &vc.test_labels), "fusion AUC vs pair count");
    ensure!(reps[0].auc > reps[1].auc, "coronal {} not above noise transverse {}", reps[0].auc, reps[1].auc);
    Ok(())
}

// ---- synthdata ----

fn render_cases() -> Check {
    let mut p = LesionParams::centered(LesionClass::Benign, 10.0, 5);
    p.interior_intensity = 81;
    let (c, _) = ok(render_lesion(&p))?;
    ensure!(c.get(32, 32) == 81, "center {}", c.get(32, 32));
    let p = sample_params(LesionClass::Malignant, Difficulty::Standard, 77);
    ensure!(ok(render_lesion(&p))? == ok(render_lesion(&p))?, "render not deterministic");
    for seed in [1, 2, 3] {
        let shape = |class| -> Result<f64, String> {
            let (c, _) = ok(render_lesion(&LesionParams::centered(class, 10.0, seed)))?;
            let (_, m) = ok(roi_pipeline(&c, &PipelineParams::default()))?;
            compactness(&largest_component(&m)).ok_or("empty mask".into())
        };
        let (b, m) = (shape(LesionClass::Benign)?, shape(LesionClass::Malignant)?);
        ensure!(m > b, "seed {seed}: malignant {m} vs benign {b}");
    }
    Ok(())
}

fn dataset_cases() -> Check {
    let ds = ok(generate_dataset(71, 74, Difficulty::Standard, 9))?;
    ensure!(ds.len() == 145 && ds.benign_count == 71 && ds.malignant_count == 74, "default counts");
    ensure!(ds.labels().iter().filter(|&&l| l == 1).count() == 74, "label tally");
    let only = ok(generate_dataset(0, 5, Difficulty::Standard, 9))?;
    ensure!(only.len() == 5 && only.labels().iter().all(|&l| l == 1), "degenerate counts");
    ensure!(ok(generate_dataset(71, 74, Difficulty::Standard, 9))?.samples == ds.samples, "not deterministic");
    Ok(())
}

fn ratio_split_cases() -> Check {
    let labels: Vec<usize> = (0..80).map(|i| i % 2).collect();
    let s = ok(split_with_ratio(&labels, 0.0, 1.0, 2))?;
    let pos = s.train.iter().filter(|&&i| labels[i] == 1).count();
    ensure!(pos == 40 && s.train.len() == 80, "1:1 with 40 each");
    let labels: Vec<usize> = (0..145).map(|i| (i % 2 == 0) as usize).collect();
    let mut tests = Vec::new();
    for (_, r) in RATIOS {
        let s = ok(split_with_ratio(&labels, 0.3, r, 2))?;
        let pos = s.train.iter().filter(|&&i| labels[i] == 1).count();
        let neg = s.train.len() - pos;
        ensure!(pos == (r * neg as f64).floor() as usize, "ratio {r}: {pos}:{neg}");
        ensure!(s.train.iter().all(|i| !s.test.contains(i)), "leak");
        tests.push(s.test);
    }
    ensure!(tests.windows(2).all(|w| w[0] == w[1]), "test sets differ across ratios");
    Ok(())
}

// ---- harness ----

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.benign = 12;
    cfg.dataset.malignant = 12;
    cfg.dataset.difficulty = Difficulty::Easy;
    cfg.train.epochs = 1;
    cfg.train.batch_size = 8;
    cfg
}

fn read(p: &std::path::Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_default()
}

fn generate_cases() -> Check {
    let dir = ok(tempfile::tempdir())?;
    let out = dir.path().join("data");
    let m = ok(cmd_generate(&ExperimentConfig::default(), &out, false, Execution::Parallel))?;
    ensure!(m.samples.len() == 145 && m.seed == 42, "manifest {} samples, seed {}", m.samples.len(), m.seed);
    let pgms = walk(&out).into_iter().filter(|p| p.extension().is_some_and(|e| e == "pgm")).count();
    ensure!(pgms == 290 && out.join("manifest.json").is_file(), "{pgms} PGM files");
    ensure!(matches!(cmd_generate(&ExperimentConfig::default(), &out, false, Execution::Parallel), Err(dvnet::Error::Config(_))), "rerun not refused");
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 7;
    ensure!(ok(cmd_generate(&cfg, &out, true, Execution::Parallel))?.seed == 7, "--force did not regenerate");
    Ok(())
}

pub fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    if let Ok(rd) = std::fs::read_dir(dir) {
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn preprocess_cmd_cases() -> Check {
    let dir = ok(tempfile::tempdir())?;
    let cfg = small_config();
    let data = dir.path().join("data");
    ok(cmd_generate(&cfg, &data, false, Execution::Parallel))?;
    std::fs::write(data.join("train").join("broken.pgm"), b"P5\n4 4\n255\nxx").map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (recs, outcome) = ok(cmd_preprocess(&cfg, &data, &a, Execution::Parallel))?;
    ok(cmd_preprocess(&cfg, &data, &b, Execution::Sequential))?;
    let n = 2 * 24 + 1;
    let failed = recs.iter().filter(|r| r.error.is_some()).count();
    let outputs = walk(&a).iter().filter(|p| p.extension().is_some_and(|e| e == "pgm")).count();
    ensure!(recs.len() == n && outputs == 2 * (n - failed) && failed == 1, "{} records, {outputs} outputs, {failed} failed", recs.len());
    ensure!(outcome == Outcome::Partial && outcome.exit_code() == 2, "partial failure not signalled");
    for p in walk(&a).iter().filter(|p| p.extension().is_some_and(|e| e == "pgm")) {
        let q = b.join(p.strip_prefix(&a).unwrap());
        ensure!(read(p) == read(&q), "{} differs between runs", p.display());
    }
    // The report's mask area equals a direct pipeline run on the same file.
    let first = recs.iter().find(|r| r.error.is_none()).ok_or("no success")?;
    let img = ok(dvnet::image::read_pgm(&data.join(&first.file)))?;
    let (_, mask) = ok(roi_pipeline(&img, &cfg.pipeline))?;
    ensure!(first.mask_area == Some(mask.area()), "report area {:?} vs {}", first.mask_area, mask.area());
    Ok(())
}

fn run_and_report_cases() -> Check {
    let dir = ok(tempfile::tempdir())?;
    let mut cfg = small_config();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cfg.experiment = ExperimentId::Classifiers;
    let (t, _) = ok(cmd_run(&cfg, None, &a, Execution::Parallel))?;
    let names: Vec<&str> = t.rows.iter().map(|r| r.method.as_str()).collect();
    ensure!(names == ["Random forest", "K neighbors", "Support Vector Machines"], "rows {names:?}");
    ok(cmd_run(&cfg, None, &b, Execution::Sequential))?;
    let csv = |d: &std::path::Path| read(&d.join("classifiers").join(RESULTS_CSV));
    ensure!(!csv(&a).is_empty() && csv(&a) == csv(&b), "CSV differs between runs");

    cfg.experiment = ExperimentId::Ratios;
    let (t, _) = ok(cmd_run(&cfg, None, &a, Execution::Parallel))?;
    let names: Vec<&str> = t.rows.iter().map(|r| r.method.as_str()).collect();
    ensure!(names == ["2:1", "1.3:1", "1:1"], "rows {names:?}");

    let rep = dir.path().join("report");
    let s = ok(cmd_report(&[a.clone()], &rep))?;
    let ids: Vec<&str> = s.tables.iter().map(|t| t.experiment.as_str()).collect();
    ensure!(ids.len() == 2 && ids.contains(&"classifiers") && ids.contains(&"ratios"), "experiments {ids:?}");
    let summary = ok(read_csv_aucs_summary(&rep.join(SUMMARY_CSV)))?;
    for id in ["classifiers", "ratios"] {
        for (m, auc) in ok(read_csv_aucs(&a.join(id).join(RESULTS_CSV)))? {
            ensure!(summary.contains(&(id.to_string(), m.clone(), auc)), "{id}/{m} not carried exactly");
        }
    }
    ensure!(!s.text.contains("version mismatch"), "spurious version warning");

    let p = a.join("ratios").join(RESULTS_JSON);
    let mut old = ok(ResultTable::read_json(&p))?;
    old.version = "0.0.1".into();
    ok(old.write(&a.join("ratios")))?;
    let s = ok(cmd_report(&[a.clone()], &rep))?;
    ensure!(s.text.lines().any(|l| l.starts_with("warning: artifact version mismatch")), "no version warning");
    ensure!(cmd_report(&[dir.path().join("missing")], &rep).is_err(), "empty input accepted");
    Ok(())
}

fn read_csv_aucs_summary(p: &std::path::Path) -> Result<Vec<(String, String, f64)>, String> {
    let mut r = ok(csv::Reader::from_path(p))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = ok(rec)?;
        if &rec[4] == "ok" {
            out.push((rec[0].to_string(), rec[1].to_string(), ok(rec[2].parse::<f64>())?));
        }
    }
    Ok(out)
}

pub fn all() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("tensor: elementwise ops", elementwise),
        ("tensor: matmul", matmul_cases),
        ("tensor: conv2d", conv_cases),
        ("tensor: finite-difference checker", gradcheck_cases),
        ("nn: activations", activation_values),
        ("nn: maxpool", maxpool_cases),
        ("nn: dense", dense_cases),
        ("nn: softmax cross-entropy", cross_entropy_cases),
        ("nn: sgd", sgd_cases),
        ("nn: initialization", init_cases),
        ("nn: checkpoints", checkpoint_cases),
        ("preprocess: median", median_cases),
        ("preprocess: equalization", equalize_cases),
        ("preprocess: fft", fft_cases),
        ("preprocess: butterworth", butterworth_cases),
        ("preprocess: morphology", morphology_cases),
        ("preprocess: otsu", otsu_cases),
        ("preprocess: pipeline", pipeline_cases),
        ("features: hog", hog_cases),
        ("features: glcm", glcm_cases),
        ("features: hgd", hgd_cases),
        ("features: cnn", cnn_feature_cases),
        ("classifiers: svm", svm_cases),
        ("classifiers: forest", forest_cases),
        ("classifiers: knn", knn_cases),
        ("classifiers: auc and reports", auc_cases),
        ("fusion: network shapes and branches", network_shape_cases),
        ("fusion: probability fusion", probability_fusion_cases),
        ("fusion: fused pipeline", fused_pipeline_cases),
        ("fusion: view comparison", view_comparison_cases),
        ("synthdata: rendering", render_cases),
        ("synthdata: datasets", dataset_cases),
        ("synthdata: ratio splits", ratio_split_cases),
        ("harness: generate", generate_cases),
        ("harness: preprocess", preprocess_cmd_cases),
        ("harness: run and report", run_and_report_cases),
    ]
}
