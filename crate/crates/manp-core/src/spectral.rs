//! Scalar phi-functions and FFT application of functions of the stabilized
//! operator `L_h = -kappa * Lap_h + lambda * I`, plus the periodic Poisson solver.
//!
//! Transforms are real-to-complex; the multipliers are real and symmetric in
//! the truncated wavenumber, so conjugate symmetry is preserved by
//! construction. Eigenvalues of `L_h` on the periodic grid are
//! `Lam_{p,l} = (4 kappa / h^2) (sin^2(pi p / nx) + sin^2(pi l / ny)) + lambda`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::grid::{CellField, Grid};

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("poisson rhs mean {mean:e} exceeds compatibility tolerance {tol:e}")]
    IncompatibleMean { mean: f64, tol: f64 },
    #[error("inverse multiplier requires lambda > 0 (zero mode would be singular)")]
    SingularInverse,
}

/// `f_e(x) = (1 - e^{-x}) / x`, continued by `f_e(0) = 1`.
///
/// Cancellation-safe: series branch below 1e-5, `expm1` form above.
/// Strictly decreasing with `0 < f_e(x) <= 1` on `[0, inf)`.
pub fn f_e(x: f64) -> f64 {
    assert!(x >= 0.0, "f_e requires a nonnegative argument, got {x}");
    if x < 1e-5 {
        1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `phi2(x) = (x - 1 + e^{-x}) / x^2`, continued by `phi2(0) = 1/2`.
///
/// This is the second phi-function of exponential integrators; it shows up
/// when the in-step time integral of the ETD solution is taken in closed form.
pub fn phi2(x: f64) -> f64 {
    assert!(x >= 0.0, "phi2 requires a nonnegative argument, got {x}");
    if x < 1e-5 {
        0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0
    } else {
        (x + (-x).exp_m1()) / (x * x)
    }
}

/// Which scalar function of `dt * L_h` to apply per Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MultiplierKind {
    /// `f_e(dt * Lam)`
    Fe,
    /// `phi2(dt * Lam)`
    Phi2,
    /// `1 / (dt * Lam)` — requires `lambda > 0`
    Inverse,
    /// `exp(-dt * Lam)`
    ExpNeg,
}

fn eval_multiplier(kind: MultiplierKind, x: f64) -> f64 {
    match kind {
        MultiplierKind::Fe => f_e(x),
        MultiplierKind::Phi2 => phi2(x),
        MultiplierKind::Inverse => 1.0 / x,
        MultiplierKind::ExpNeg => (-x).exp(),
    }
}

/// Half-spectrum of a real cell field, layout `[l * nx + p]` with
/// `l = 0..ny/2` and `p = 0..nx`.
pub type Spectrum = Vec<Complex<f64>>;

/// 2-D real FFT pair on the cell lattice.
struct Fft2 {
    nx: usize,
    ny: usize,
    nyc: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(nx: usize, ny: usize) -> Self {
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        Self {
            nx,
            ny,
            nyc: ny / 2 + 1,
            r2c: rp.plan_fft_forward(ny),
            c2r: rp.plan_fft_inverse(ny),
            col_fwd: cp.plan_fft_forward(nx),
            col_inv: cp.plan_fft_inverse(nx),
        }
    }

    fn spectrum_len(&self) -> usize {
        self.nx * self.nyc
    }

    /// Unnormalized forward transform of row-major physical data.
    fn forward(&self, vals: &[f64]) -> Spectrum {
        let (nx, ny, nyc) = (self.nx, self.ny, self.nyc);
        debug_assert_eq!(vals.len(), nx * ny);
        // r2c along j for each row, into [i * nyc + l]
        let mut rows = vec![Complex::default(); nx * nyc];
        let mut inbuf = vec![0.0; ny];
        for i in 0..nx {
            inbuf.copy_from_slice(&vals[i * ny..(i + 1) * ny]);
            self.r2c
                .process(&mut inbuf, &mut rows[i * nyc..(i + 1) * nyc])
                .expect("r2c length mismatch");
        }
        // transpose to [l * nx + i], then c2c along i
        let mut spec = vec![Complex::default(); nx * nyc];
        for i in 0..nx {
            for l in 0..nyc {
                spec[l * nx + i] = rows[i * nyc + l];
            }
        }
        for l in 0..nyc {
            self.col_fwd.process(&mut spec[l * nx..(l + 1) * nx]);
        }
        spec
    }

    /// Inverse transform; normalizes by `1/(nx*ny)`.
    fn inverse(&self, spec: &[Complex<f64>], grid: Grid) -> CellField {
        let (nx, ny, nyc) = (self.nx, self.ny, self.nyc);
        debug_assert_eq!(spec.len(), nx * nyc);
        let mut work = spec.to_vec();
        for l in 0..nyc {
            self.col_inv.process(&mut work[l * nx..(l + 1) * nx]);
        }
        // transpose back to [i * nyc + l] and c2r along j
        let mut rows = vec![Complex::default(); nx * nyc];
        for l in 0..nyc {
            for i in 0..nx {
                rows[i * nyc + l] = work[l * nx + i];
            }
        }
        // the DC and Nyquist entries of each row are real up to transform
        // roundoff; the residue is discarded (c2r requires exact zeros there)
        for i in 0..nx {
            rows[i * nyc].im = 0.0;
            if ny % 2 == 0 {
                rows[i * nyc + nyc - 1].im = 0.0;
            }
        }
        let scale = 1.0 / (nx as f64 * ny as f64);
        let mut out = vec![0.0; nx * ny];
        let mut rowbuf = vec![0.0; ny];
        for i in 0..nx {
            self.c2r
                .process(&mut rows[i * nyc..(i + 1) * nyc], &mut rowbuf)
                .expect("c2r length mismatch");
            for (o, v) in out[i * ny..(i + 1) * ny].iter_mut().zip(&rowbuf) {
                *o = v * scale;
            }
        }
        CellField::from_values(grid, out)
    }
}

/// Precomputed eigenvalue tables of `L_h` for one `(grid, kappa, lambda)`,
/// together with the FFT plans that apply functions of it.
///
/// Immutable after construction and safe to share; `apply` is reentrant.
/// Tables of `g(dt * Lam)` are cached per `(kind, dt)` so a fixed-step run
/// evaluates the scalar function once.
pub struct SpectralMultipliers {
    grid: Grid,
    kappa: f64,
    lambda: f64,
    /// `Lam_{p,l}` in spectrum layout.
    eig: Vec<f64>,
    /// pure `-Lap_h` symbols `(4/h^2)(sin^2 + sin^2)` in spectrum layout.
    lap: Vec<f64>,
    fft: Fft2,
    table_cache: Mutex<HashMap<(MultiplierKind, u64), Arc<Vec<f64>>>>,
}

impl SpectralMultipliers {
    pub fn new(grid: Grid, kappa: f64, lambda: f64) -> Self {
        assert!(kappa > 0.0, "kappa must be positive");
        assert!(lambda >= 0.0, "lambda must be nonnegative");
        let (nx, ny) = (grid.nx(), grid.ny());
        let nyc = ny / 2 + 1;
        let h2 = grid.h() * grid.h();
        let mut eig = vec![0.0; nx * nyc];
        let mut lap = vec![0.0; nx * nyc];
        for l in 0..nyc {
            let sy = (std::f64::consts::PI * l as f64 / ny as f64).sin().powi(2);
            for p in 0..nx {
                let sx = (std::f64::consts::PI * p as f64 / nx as f64).sin().powi(2);
                let sym = 4.0 / h2 * (sx + sy);
                lap[l * nx + p] = sym;
                eig[l * nx + p] = kappa * sym + lambda;
            }
        }
        debug_assert_eq!(eig[0], lambda);
        Self {
            grid,
            kappa,
            lambda,
            eig,
            lap,
            fft: Fft2::new(nx, ny),
            table_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Eigenvalue table of `L_h` (spectrum layout), for oracles.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    fn table(&self, kind: MultiplierKind, dt: f64) -> Arc<Vec<f64>> {
        let key = (kind, dt.to_bits());
        let mut cache = self.table_cache.lock().expect("multiplier cache poisoned");
        cache
            .entry(key)
            .or_insert_with(|| {
                Arc::new(self.eig.iter().map(|&lam| eval_multiplier(kind, dt * lam)).collect())
            })
            .clone()
    }

    /// Forward transform, exposed so one spectrum can feed several multipliers.
    pub fn forward(&self, phi: &CellField) -> Spectrum {
        assert_eq!(phi.grid(), &self.grid, "grid mismatch in spectral forward");
        self.fft.forward(phi.values())
    }

    /// Apply `g(dt * L_h)` to an already transformed field.
    pub fn apply_from_spectrum(
        &self,
        kind: MultiplierKind,
        dt: f64,
        spec: &Spectrum,
    ) -> Result<CellField, SpectralError> {
        assert!(dt >= 0.0, "dt must be nonnegative");
        if kind == MultiplierKind::Inverse && dt * self.lambda == 0.0 {
            return Err(SpectralError::SingularInverse);
        }
        let table = self.table(kind, dt);
        debug_assert_eq!(spec.len(), self.fft.spectrum_len());
        let scaled: Spectrum =
            spec.iter().zip(table.iter()).map(|(s, &m)| s * m).collect();
        Ok(self.fft.inverse(&scaled, self.grid))
    }

    /// `g(dt * L_h) phi` via forward transform, per-mode multiply, inverse.
    pub fn apply(
        &self,
        kind: MultiplierKind,
        dt: f64,
        phi: &CellField,
    ) -> Result<CellField, SpectralError> {
        let spec = self.forward(phi);
        self.apply_from_spectrum(kind, dt, &spec)
    }

    /// Default compatibility tolerance for the Poisson right-hand side.
    pub fn default_mean_tol(&self, rhs: &CellField) -> f64 {
        1e-10 * rhs.max_abs().max(f64::MIN_POSITIVE) * self.grid.area()
    }

    /// Solve `-Lap_h psi = rhs - mean(rhs)` with `mean(psi) = 0`.
    ///
    /// A mean beyond `tol_mean` signals broken mass conservation upstream and
    /// is reported instead of silently projected away.
    pub fn poisson_solve(&self, rhs: &CellField, tol_mean: Option<f64>) -> Result<CellField, SpectralError> {
        assert_eq!(rhs.grid(), &self.grid, "grid mismatch in poisson_solve");
        let tol = tol_mean.unwrap_or_else(|| self.default_mean_tol(rhs));
        let mean = rhs.mean();
        if mean.abs() > tol {
            return Err(SpectralError::IncompatibleMean { mean, tol });
        }
        if rhs.max_abs() == 0.0 {
            return Ok(CellField::zeros(self.grid));
        }
        let mut spec = self.fft.forward(rhs.values());
        spec[0] = Complex::default(); // zero mode pinned to zero mean
        for (s, &sym) in spec.iter_mut().zip(self.lap.iter()).skip(1) {
            *s /= sym;
        }
        Ok(self.fft.inverse(&spec, self.grid))
    }
}
