//! Separable 2-D FFT over row-major buffers.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// In-place 2-D transform. The forward transform is unnormalised; the inverse
/// divides by `width * height` so that `inverse(forward(x)) == x`.
pub(crate) fn fft2d(data: &mut [Complex64], width: usize, height: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), width * height);
    let mut planner = FftPlanner::<f64>::new();

    let row_fft = planner.plan_fft(width, direction);
    let mut scratch = vec![Complex64::default(); row_fft.get_inplace_scratch_len()];
    row_fft.process_with_scratch(data, &mut scratch);

    let mut transposed = transpose(data, width, height);
    let col_fft = planner.plan_fft(height, direction);
    scratch.resize(col_fft.get_inplace_scratch_len(), Complex64::default());
    col_fft.process_with_scratch(&mut transposed, &mut scratch);
    let back = transpose(&transposed, height, width);
    data.copy_from_slice(&back);

    if direction == FftDirection::Inverse {
        let k = 1.0 / (width * height) as f64;
        data.iter_mut().for_each(|z| *z *= k);
    }
}

fn transpose(src: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::default(); src.len()];
    const TILE: usize = 32;
    for by in (0..height).step_by(TILE) {
        for bx in (0..width).step_by(TILE) {
            for y in by..(by + TILE).min(height) {
                for x in bx..(bx + TILE).min(width) {
                    dst[x * height + y] = src[y * width + x];
                }
            }
        }
    }
    dst
}
