//! Fourier-multiplier oracles on the periodic torus.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::constants::{grad_scale, hemisphere_closed_form};
use crate::error::{Error, Result};
use crate::fields::PeriodicGrid;

fn fft_nd(data: &mut [Complex<f64>], n: usize, m: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    if n == 1 {
        fft.process(data);
        return;
    }
    for row in data.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = data[i * m + j];
        }
        fft.process(&mut col);
        for i in 0..m {
            data[i * m + j] = col[i];
        }
    }
}

/// Multiply the Fourier modes of `grid` by `symbol(ξ)`, `ξ = 2πk/P`. Nyquist modes use the
/// average of the symbol at `±ξ` so that real input stays real.
pub fn apply_symbol<S>(grid: &PeriodicGrid, symbol: S) -> Result<PeriodicGrid>
where
    S: Fn(&[f64]) -> Complex<f64>,
{
    grid.validate()?;
    let (n, m) = (grid.n, grid.resolution);
    let mut data: Vec<Complex<f64>> = grid.samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_nd(&mut data, n, m, false);
    let w = 2.0 * PI / grid.period;
    let nyq = (m % 2 == 0).then_some(m as i64 / 2);
    let sym = |ks: &[i64]| -> Complex<f64> {
        let xi: Vec<f64> = ks.iter().map(|&k| w * k as f64).collect();
        let flip: Vec<bool> = ks.iter().map(|&k| Some(k) == nyq).collect();
        if flip.iter().any(|&f| f) {
            let xi2: Vec<f64> = xi.iter().zip(&flip).map(|(x, &f)| if f { -x } else { *x }).collect();
            (symbol(&xi) + symbol(&xi2)) * 0.5
        } else {
            symbol(&xi)
        }
    };
    if n == 1 {
        for (i, c) in data.iter_mut().enumerate() {
            *c *= sym(&[grid.wavenumber(i)]);
        }
    } else {
        for i in 0..m {
            for j in 0..m {
                data[i * m + j] *= sym(&[grid.wavenumber(i), grid.wavenumber(j)]);
            }
        }
    }
    fft_nd(&mut data, n, m, true);
    let norm = 1.0 / data.len() as f64;
    Ok(PeriodicGrid {
        samples: data.iter().map(|c| c.re * norm).collect(),
        ..grid.clone()
    })
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("order s = {s} outside (0,1)")));
    }
    Ok(())
}

/// `(-Δ)^s` as the multiplier `|ξ|^{2s}`.
pub fn spectral_fractional_laplacian(grid: &PeriodicGrid, s: f64) -> Result<PeriodicGrid> {
    check_order(s)?;
    apply_symbol(grid, |xi| {
        let k2: f64 = xi.iter().map(|x| x * x).sum();
        Complex::new(k2.powf(s), 0.0)
    })
}

/// Components of `grad^s`, multiplier `iξ|ξ|^{s-1}·2 sin(πs/2) H_n(s+1)/G_s` where
/// `H_n(p) = ∫_{θ₁ ≥ 0} θ₁^p dθ`.
pub fn spectral_frac_gradient(grid: &PeriodicGrid, s: f64) -> Result<Vec<PeriodicGrid>> {
    check_order(s)?;
    let a = 2.0 * (PI * s / 2.0).sin() * hemisphere_closed_form(grid.n, s + 1.0)? / grad_scale(s)?;
    (0..grid.n)
        .map(|i| {
            apply_symbol(grid, |xi| {
                let k: f64 = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                if k == 0.0 {
                    Complex::new(0.0, 0.0)
                } else {
                    Complex::new(0.0, xi[i] * k.powf(s - 1.0) * a)
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;

    #[test]
    fn cosine_modes_scale_by_the_symbol() {
        let u = ScalarField::trig(1, 3.0);
        let g = spectral_fractional_laplacian(u.grid.as_ref().unwrap(), 0.25).unwrap();
        for (i, v) in g.samples.iter().enumerate() {
            let x = i as f64 * 2.0 * PI / g.resolution as f64;
            assert!((v - 3f64.powf(0.5) * (3.0 * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_symbol_in_one_dimension() {
        let s = 0.5;
        let u = ScalarField::trig(1, 2.0);
        let g = &spectral_frac_gradient(u.grid.as_ref().unwrap(), s).unwrap()[0];
        let a = 2.0 * (PI * s / 2.0).sin() / grad_scale(s).unwrap();
        for (i, v) in g.samples.iter().enumerate() {
            let x = i as f64 * 2.0 * PI / g.resolution as f64;
            assert!((v + a * 2f64.powf(s) * (2.0 * x).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_grid() {
        let u = ScalarField::trig(2, 1.0);
        let g = spectral_fractional_laplacian(u.grid.as_ref().unwrap(), 0.7).unwrap();
        let m = g.resolution;
        for i in 0..m {
            for j in 0..m {
                let x = i as f64 * 2.0 * PI / m as f64;
                assert!((g.samples[i * m + j] - x.cos()).abs() < 1e-12);
            }
        }
    }
}
