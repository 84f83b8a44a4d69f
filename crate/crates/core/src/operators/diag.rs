use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::fft::Dft2;
use crate::operators::{image_dims, LinearOp};
use crate::tensor::{SeededRng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Identity,
    GaussianBlur,
    Subsample,
    BoxMask,
    BernoulliMask,
}

/// The orthogonal transform shared by `P` and `Q`.
#[derive(Debug, Clone)]
pub enum Basis {
    /// Pixel basis: `P` and `Q` are identities.
    Pixel,
    /// Unitary 2-D DFT on every channel plane.
    Fourier(Dft2),
}

/// Linear operator in factored form `A = Qᵀ Λ P`.
///
/// `spectrum[i]` is the diagonal entry attached to input coefficient `i`
/// (zero for coefficients that never reach the output). `observed[j]`, when
/// present, names the coefficient that feeds output entry `j`; without it the
/// map is square and coefficient `i` feeds output `i`.
#[derive(Debug, Clone)]
pub struct DiagonalizableOp {
    kind: OpKind,
    basis: Basis,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    spectrum: Vec<Complex64>,
    observed: Option<Vec<usize>>,
}

fn real_spectrum(values: impl IntoIterator<Item = f64>) -> Vec<Complex64> {
    values.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
}

fn check_numel(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl DiagonalizableOp {
    pub fn identity(shape: &[usize]) -> Result<Self> {
        let n = check_numel(shape)?;
        Ok(Self {
            kind: OpKind::Identity,
            basis: Basis::Pixel,
            input_shape: shape.to_vec(),
            output_shape: shape.to_vec(),
            spectrum: real_spectrum(std::iter::repeat(1.0).take(n)),
            observed: None,
        })
    }

    /// Circular convolution with a normalized `kernel_size²` Gaussian,
    /// diagonalized by the unitary DFT of each channel plane.
    pub fn gaussian_blur(shape: &[usize], kernel_size: usize, sigma_blur: f64) -> Result<Self> {
        if kernel_size % 2 == 0 {
            return Err(Error::param(format!("kernel_size must be odd, got {kernel_size}")));
        }
        if !(sigma_blur > 0.0 && sigma_blur.is_finite()) {
            return Err(Error::param(format!("sigma_blur must be > 0, got {sigma_blur}")));
        }
        let (c, h, w) = image_dims(shape)?;
        let kernel = gaussian_kernel(kernel_size, sigma_blur);
        let half = (kernel_size / 2) as isize;

        // zero-pad and shift the kernel center to (0, 0), wrapping around
        let mut padded = vec![Complex64::new(0.0, 0.0); h * w];
        for a in 0..kernel_size {
            for b in 0..kernel_size {
                let r = (a as isize - half).rem_euclid(h as isize) as usize;
                let s = (b as isize - half).rem_euclid(w as isize) as usize;
                padded[r * w + s] += kernel[a * kernel_size + b];
            }
        }
        let dft = Dft2::new(h, w);
        dft.forward(&mut padded, false);
        let mut spectrum = Vec::with_capacity(c * h * w);
        for _ in 0..c {
            spectrum.extend_from_slice(&padded);
        }
        Ok(Self {
            kind: OpKind::GaussianBlur,
            basis: Basis::Fourier(dft),
            input_shape: shape.to_vec(),
            output_shape: shape.to_vec(),
            spectrum,
            observed: None,
        })
    }

    /// Keeps pixels `(i*stride, j*stride)`; the adjoint zero-fills.
    pub fn subsample(shape: &[usize], stride: usize) -> Result<Self> {
        let (c, h, w) = image_dims(shape)?;
        if stride == 0 || h % stride != 0 || w % stride != 0 {
            return Err(Error::param(format!(
                "stride {stride} must divide both spatial dims {h}x{w}"
            )));
        }
        let (oh, ow) = (h / stride, w / stride);
        let mut observed = Vec::with_capacity(c * oh * ow);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); c * h * w];
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let idx = ch * h * w + i * stride * w + j * stride;
                    observed.push(idx);
                    spectrum[idx] = Complex64::new(1.0, 0.0);
                }
            }
        }
        let output_shape = if shape.len() == 2 {
            vec![oh, ow]
        } else {
            vec![c, oh, ow]
        };
        Ok(Self {
            kind: OpKind::Subsample,
            basis: Basis::Pixel,
            input_shape: shape.to_vec(),
            output_shape,
            spectrum,
            observed: Some(observed),
        })
    }

    /// Zeroes the square spanning `[H/2 − half, H/2 + half − 1]` (and the same
    /// along the width), integer division.
    pub fn box_mask(shape: &[usize], half_size: usize) -> Result<Self> {
        let (c, h, w) = image_dims(shape)?;
        if 2 * half_size > h.min(w) {
            return Err(Error::param(format!(
                "box half-size {half_size} does not fit a {h}x{w} image"
            )));
        }
        let (r0, c0) = (h / 2 - half_size, w / 2 - half_size);
        let plane: Vec<f64> = (0..h * w)
            .map(|p| {
                let (r, s) = (p / w, p % w);
                let inside = r >= r0 && r < r0 + 2 * half_size && s >= c0 && s < c0 + 2 * half_size;
                if inside {
                    0.0
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self::pixel_mask(OpKind::BoxMask, shape, c, &plane))
    }

    /// Each pixel is dropped independently with probability `missing_prob`;
    /// the mask depends only on `mask_seed` and is shared across channels.
    /// Non-image shapes get an independent draw per entry.
    pub fn bernoulli_mask(shape: &[usize], missing_prob: f64, mask_seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&missing_prob) {
            return Err(Error::param(format!(
                "missing_prob must lie in [0, 1), got {missing_prob}"
            )));
        }
        let n = check_numel(shape)?;
        let (channels, plane_len) = match image_dims(shape) {
            Ok((c, h, w)) => (c, h * w),
            Err(_) => (1, n),
        };
        let mut rng = SeededRng::new(mask_seed);
        let plane: Vec<f64> = (0..plane_len)
            .map(|_| if rng.next_uniform() < missing_prob { 0.0 } else { 1.0 })
            .collect();
        Ok(Self::pixel_mask(OpKind::BernoulliMask, shape, channels, &plane))
    }

    fn pixel_mask(kind: OpKind, shape: &[usize], channels: usize, plane: &[f64]) -> Self {
        let values = (0..channels).flat_map(|_| plane.iter().copied());
        Self {
            kind,
            basis: Basis::Pixel,
            input_shape: shape.to_vec(),
            output_shape: shape.to_vec(),
            spectrum: real_spectrum(values),
            observed: None,
        }
    }

    pub fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// 0/1 mask of observed pixels for pixel-basis operators.
    pub fn pixel_mask_tensor(&self) -> Option<Tensor> {
        match self.basis {
            Basis::Pixel => Some(Tensor::from_parts(
                self.spectrum.iter().map(|l| l.norm_sqr()).collect(),
                self.input_shape.clone(),
            )),
            Basis::Fourier(_) => None,
        }
    }

    fn check(&self, t: &Tensor, shape: &[usize]) -> Result<()> {
        if t.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                found: t.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn to_complex(t: &Tensor) -> Vec<Complex64> {
        t.data().iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }

    fn to_real(buf: Vec<Complex64>, shape: &[usize]) -> Tensor {
        Tensor::from_parts(buf.into_iter().map(|c| c.re).collect(), shape.to_vec())
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        if let Basis::Fourier(dft) = &self.basis {
            if inverse {
                dft.inverse(buf, true);
            } else {
                dft.forward(buf, true);
            }
        }
    }

    /// Coefficients `P x`.
    pub fn p_forward(&self, x: &Tensor) -> Result<Vec<Complex64>> {
        self.check(x, &self.input_shape)?;
        let mut buf = Self::to_complex(x);
        self.transform(&mut buf, false);
        Ok(buf)
    }

    /// `Pᵀ c`, keeping the real part.
    pub fn p_inverse(&self, mut coeffs: Vec<Complex64>) -> Tensor {
        self.transform(&mut coeffs, true);
        Self::to_real(coeffs, &self.input_shape)
    }

    /// Coefficients `Q y` of a measurement.
    pub fn q_forward(&self, y: &Tensor) -> Result<Vec<Complex64>> {
        self.check(y, &self.output_shape)?;
        let mut buf = Self::to_complex(y);
        self.transform(&mut buf, false);
        Ok(buf)
    }

    pub fn q_inverse(&self, mut coeffs: Vec<Complex64>) -> Tensor {
        self.transform(&mut coeffs, true);
        Self::to_real(coeffs, &self.output_shape)
    }

    /// `Q y` placed on the coefficient grid of `P` (zeros where no output
    /// entry is attached).
    pub fn measurement_coefficients(&self, y: &Tensor) -> Result<Vec<Complex64>> {
        Ok(self.scatter(self.q_forward(y)?))
    }

    /// Maps output-space coefficients back onto the coefficient grid of `P`.
    fn scatter(&self, qy: Vec<Complex64>) -> Vec<Complex64> {
        match &self.observed {
            None => qy,
            Some(obs) => {
                let mut full = vec![Complex64::new(0.0, 0.0); self.spectrum.len()];
                for (&idx, v) in obs.iter().zip(qy) {
                    full[idx] = v;
                }
                full
            }
        }
    }

    /// Applies `Λ` to coefficients `Px`, producing output-space coefficients.
    pub fn apply_spectrum(&self, px: &[Complex64]) -> Vec<Complex64> {
        match &self.observed {
            None => px.iter().zip(&self.spectrum).map(|(c, l)| c * l).collect(),
            Some(obs) => obs.iter().map(|&i| px[i] * self.spectrum[i]).collect(),
        }
    }

    /// Closed-form `prox_{μF_y}(v)`: per coefficient
    /// `z_i = ((Pv)_i + μ conj(λ_i) (Qy)_i) / (1 + μ |λ_i|²)`, then `Pᵀ z`.
    pub fn prox_closed_form(&self, v: &Tensor, y: &Tensor, mu: f64) -> Result<Tensor> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::param(format!("prox weight mu must be > 0, got {mu}")));
        }
        let pv = self.p_forward(v)?;
        let qy = self.scatter(self.q_forward(y)?);
        let z: Vec<Complex64> = pv
            .iter()
            .zip(&qy)
            .zip(&self.spectrum)
            .map(|((p, q), l)| (p + l.conj() * q * mu) / (1.0 + mu * l.norm_sqr()))
            .collect();
        Ok(self.p_inverse(z))
    }
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let g: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let mut k: Vec<f64> = g.iter().flat_map(|a| g.iter().map(move |b| a * b)).collect();
    let total: f64 = k.iter().sum();
    for v in &mut k {
        *v /= total;
    }
    k
}

impl LinearOp for DiagonalizableOp {
    fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let px = self.p_forward(x)?;
        Ok(self.q_inverse(self.apply_spectrum(&px)))
    }

    fn adjoint(&self, y: &Tensor) -> Result<Tensor> {
        let qy = self.scatter(self.q_forward(y)?);
        let coeffs = qy
            .iter()
            .zip(&self.spectrum)
            .map(|(q, l)| l.conj() * q)
            .collect();
        Ok(self.p_inverse(coeffs))
    }

    fn prox(&self, v: &Tensor, y: &Tensor, mu: f64) -> Result<Tensor> {
        self.prox_closed_form(v, y, mu)
    }

    fn min_eig_ata(&self) -> Option<f64> {
        Some(
            self.spectrum
                .iter()
                .map(|l| l.norm_sqr())
                .fold(f64::INFINITY, f64::min),
        )
    }
}

/// Free-function form of [`DiagonalizableOp::prox_closed_form`].
pub fn prox_data_closed_form(op: &DiagonalizableOp, v: &Tensor, y: &Tensor, mu: f64) -> Result<Tensor> {
    op.prox_closed_form(v, y, mu)
}
