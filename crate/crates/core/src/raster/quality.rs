use super::{Image, RasterError};

/// Side length of the square SSIM window.
pub const SSIM_WINDOW: usize = 8;

const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Mean squared error over all samples (all channels).
pub fn mse(a: &Image, b: &Image) -> Result<f64, RasterError> {
    a.same_shape(b)?;
    let sum: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.data().len() as f64)
}

/// Mean SSIM over all 8x8 windows at stride 1.
///
/// RGB inputs are reduced to luma first. Window statistics use population
/// (1/N) moments; the window sums come from exact integer integral images.
pub fn ssim(a: &Image, b: &Image) -> Result<f64, RasterError> {
    a.same_shape(b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(RasterError::TooSmall {
            width: w,
            height: h,
            window: SSIM_WINDOW,
        });
    }
    let ga = a.to_gray();
    let gb = b.to_gray();
    let sx = Integral::build(w, h, |i| u64::from(ga.data()[i]));
    let sy = Integral::build(w, h, |i| u64::from(gb.data()[i]));
    let sxx = Integral::build(w, h, |i| u64::from(ga.data()[i]).pow(2));
    let syy = Integral::build(w, h, |i| u64::from(gb.data()[i]).pow(2));
    let sxy = Integral::build(w, h, |i| u64::from(ga.data()[i]) * u64::from(gb.data()[i]));

    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - SSIM_WINDOW {
        for x in 0..=w - SSIM_WINDOW {
            let mx = sx.window(x, y) as f64 / n;
            let my = sy.window(x, y) as f64 / n;
            let vx = sxx.window(x, y) as f64 / n - mx * mx;
            let vy = syy.window(x, y) as f64 / n - my * my;
            let cxy = sxy.window(x, y) as f64 / n - mx * my;
            let num = (2.0 * mx * my + C1) * (2.0 * cxy + C2);
            let den = (mx * mx + my * my + C1) * (vx + vy + C2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

struct Integral {
    stride: usize,
    sums: Vec<u64>,
}

impl Integral {
    fn build(w: usize, h: usize, f: impl Fn(usize) -> u64) -> Self {
        let stride = w + 1;
        let mut sums = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u64;
            for x in 0..w {
                row += f(y * w + x);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { stride, sums }
    }

    #[inline]
    fn window(&self, x: usize, y: usize) -> u64 {
        let s = self.stride;
        let (x1, y1) = (x + SSIM_WINDOW, y + SSIM_WINDOW);
        self.sums[y1 * s + x1] + self.sums[y * s + x] - self.sums[y * s + x1] - self.sums[y1 * s + x]
    }
}
