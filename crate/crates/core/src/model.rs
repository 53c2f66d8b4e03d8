//! System model: channels, QAM constellations, noise and the complex to real
//! transformation.
//!
//! The complex uplink `ỹ = H̃x̃ + ṽ` with `Nr` receive antennas and `Nt`
//! single-antenna users is carried to the real model `y = Hx + v` by
//!
//! ```text
//! H = [ Re(H̃)  -Im(H̃) ]    y = [ Re(ỹ) ]    x = [ Re(x̃) ]
//!     [ Im(H̃)   Re(H̃) ]        [ Im(ỹ) ]        [ Im(x̃) ]
//! ```
//!
//! so real symbol `k` and `Nt + k` are the in-phase and quadrature parts of
//! user `k`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Square M-QAM with unit average symbol energy and per-dimension Gray
/// mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    levels: usize,
    bits_per_dim: usize,
    gamma: f64,
    alphabet: Vec<f64>,
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        let levels = (order as f64).sqrt().round() as usize;
        if order < 4 || levels * levels != order || !levels.is_power_of_two() {
            return Err(Error::param(
                "order",
                format!("{order} is not a square QAM order (4, 16, 64, ...)"),
            ));
        }
        // Mean energy of the odd-integer grid is 2(M-1)/3.
        let gamma = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let unit = (1.5 / (order as f64 - 1.0)).sqrt();
        let alphabet = (0..levels)
            .map(|j| (2.0 * j as f64 - levels as f64 + 1.0) * unit)
            .collect();
        Ok(Self {
            order,
            levels,
            bits_per_dim: levels.trailing_zeros() as usize,
            gamma,
            alphabet,
        })
    }

    pub fn qpsk() -> Self {
        Self::new(4).expect("4-QAM is valid")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Normalization factor Γ.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Box bound `l = (√M - 1)/Γ`, the largest real level.
    pub fn bound(&self) -> f64 {
        self.alphabet[self.levels - 1]
    }

    /// Sorted per-dimension real levels.
    pub fn alphabet(&self) -> &[f64] {
        &self.alphabet
    }

    pub fn levels_per_dim(&self) -> usize {
        self.levels
    }

    pub fn bits_per_dim(&self) -> usize {
        self.bits_per_dim
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_dim
    }

    /// Average energy of one real dimension under uniform symbols (always 1/2).
    pub fn dim_energy(&self) -> f64 {
        self.alphabet.iter().map(|a| a * a).sum::<f64>() / self.levels as f64
    }

    /// Gray label of level `index`. Label 0 is the most positive level.
    pub fn gray_label(&self, index: usize) -> usize {
        let v = self.levels - 1 - index;
        v ^ (v >> 1)
    }

    /// Level index carrying Gray label `label`.
    pub fn index_of_label(&self, label: usize) -> usize {
        let mut v = label;
        let mut shift = label >> 1;
        while shift != 0 {
            v ^= shift;
            shift >>= 1;
        }
        self.levels - 1 - v
    }

    /// Index of the level nearest to `x`; exact midpoints go to the level
    /// closer to `+l`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let pos = (x * self.gamma + self.levels as f64 - 1.0) / 2.0;
        let idx = (pos + 0.5).floor();
        if idx.is_nan() || idx <= 0.0 {
            0
        } else {
            (idx as usize).min(self.levels - 1)
        }
    }

    pub fn level(&self, index: usize) -> f64 {
        self.alphabet[index]
    }

    fn label_from_bits(&self, bits: &[bool]) -> usize {
        bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    fn push_label_bits(&self, label: usize, out: &mut Vec<bool>) {
        for shift in (0..self.bits_per_dim).rev() {
            out.push((label >> shift) & 1 == 1);
        }
    }
}

/// Complex uplink observation. `symbols` is known only for simulated
/// instances.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSystemModel {
    pub channel: DMatrix<Complex64>,
    pub symbols: Option<DVector<Complex64>>,
    pub received: DVector<Complex64>,
    /// Noise variance per complex receive dimension, σ_v².
    pub noise_var: f64,
}

impl ComplexSystemModel {
    /// Transmits `symbols` through `channel` and adds CN(0, σ_v²) noise drawn
    /// from `noise_seed`.
    pub fn transmit(
        channel: DMatrix<Complex64>,
        symbols: DVector<Complex64>,
        noise_var: f64,
        noise_seed: u64,
    ) -> Result<Self> {
        if channel.ncols() != symbols.len() {
            return Err(Error::Dimension(format!(
                "channel has {} columns but {} symbols were given",
                channel.ncols(),
                symbols.len()
            )));
        }
        check_variance(noise_var)?;
        let mut rng = rng::seeded(noise_seed);
        let std = (noise_var / 2.0).sqrt();
        let mut received = &channel * &symbols;
        for r in received.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *r += Complex64::new(re * std, im * std);
        }
        Ok(Self {
            channel,
            symbols: Some(symbols),
            received,
            noise_var,
        })
    }

    /// Observation with unknown transmitted symbols.
    pub fn observed(
        channel: DMatrix<Complex64>,
        received: DVector<Complex64>,
        noise_var: f64,
    ) -> Result<Self> {
        if channel.nrows() != received.len() {
            return Err(Error::Dimension(format!(
                "channel has {} rows but received vector has {} entries",
                channel.nrows(),
                received.len()
            )));
        }
        check_variance(noise_var)?;
        Ok(Self {
            channel,
            symbols: None,
            received,
            noise_var,
        })
    }

    pub fn nr(&self) -> usize {
        self.channel.nrows()
    }

    pub fn nt(&self) -> usize {
        self.channel.ncols()
    }

    /// More users than receive antennas: outside the regime the detector is
    /// meant for, but still solvable.
    pub fn is_overloaded(&self) -> bool {
        self.nt() > self.nr()
    }
}

/// Real-valued model `y = Hx + v` together with the per-column energies
/// `S_i = ‖h_i‖²` used by every block update.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSystemModel {
    channel: DMatrix<f64>,
    received: DVector<f64>,
    noise_var: f64,
    column_energy: Vec<f64>,
}

impl RealSystemModel {
    /// `noise_var` is the variance per real dimension.
    pub fn new(channel: DMatrix<f64>, received: DVector<f64>, noise_var: f64) -> Result<Self> {
        if channel.nrows() == 0 || channel.ncols() == 0 {
            return Err(Error::Dimension("channel matrix is empty".into()));
        }
        if channel.nrows() != received.len() {
            return Err(Error::Dimension(format!(
                "channel has {} rows but received vector has {} entries",
                channel.nrows(),
                received.len()
            )));
        }
        check_variance(noise_var)?;
        let column_energy = channel.column_iter().map(|c| c.norm_squared()).collect();
        Ok(Self {
            channel,
            received,
            noise_var,
            column_energy,
        })
    }

    pub fn channel(&self) -> &DMatrix<f64> {
        &self.channel
    }

    pub fn received(&self) -> &DVector<f64> {
        &self.received
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Number of real receive dimensions, 2Nr.
    pub fn rows(&self) -> usize {
        self.channel.nrows()
    }

    /// Number of real symbol blocks, 2Nt.
    pub fn blocks(&self) -> usize {
        self.channel.ncols()
    }

    pub fn nr(&self) -> usize {
        self.rows() / 2
    }

    pub fn nt(&self) -> usize {
        self.blocks() / 2
    }

    /// `‖h_i‖²` for every column.
    pub fn column_energy(&self) -> &[f64] {
        &self.column_energy
    }

    /// Same channel with a different observation.
    pub fn with_received(&self, received: DVector<f64>) -> Result<Self> {
        if received.len() != self.rows() {
            return Err(Error::Dimension(format!(
                "expected {} received entries, got {}",
                self.rows(),
                received.len()
            )));
        }
        Ok(Self {
            received,
            ..self.clone()
        })
    }
}

fn check_variance(var: f64) -> Result<()> {
    if var.is_finite() && var >= 0.0 {
        Ok(())
    } else {
        Err(Error::param("noise_var", format!("{var} is not a finite non-negative variance")))
    }
}

/// Nr×Nt matrix of i.i.d. CN(0, 1) gains.
pub fn generate_channel(nr: usize, nt: usize, seed: u64) -> Result<DMatrix<Complex64>> {
    let mut rng = rng::seeded(seed);
    generate_channel_with(nr, nt, &mut rng)
}

pub fn generate_channel_with<R: Rng>(nr: usize, nt: usize, rng: &mut R) -> Result<DMatrix<Complex64>> {
    if nr == 0 || nt == 0 {
        return Err(Error::Dimension(format!("channel shape {nr}x{nt} has a zero dimension")));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    Ok(DMatrix::from_fn(nr, nt, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    }))
}

/// Gray-maps `bits` onto QAM symbols. Within each symbol the first half of
/// the bits selects the in-phase level and the second half the quadrature
/// level, most significant bit first.
pub fn modulate(bits: &[bool], c: &Constellation) -> Result<DVector<Complex64>> {
    let per = c.bits_per_symbol();
    if bits.len() % per != 0 {
        return Err(Error::Framing {
            len: bits.len(),
            bits_per_symbol: per,
        });
    }
    let half = c.bits_per_dim();
    Ok(DVector::from_iterator(
        bits.len() / per,
        bits.chunks_exact(per).map(|chunk| {
            let re = c.level(c.index_of_label(c.label_from_bits(&chunk[..half])));
            let im = c.level(c.index_of_label(c.label_from_bits(&chunk[half..])));
            Complex64::new(re, im)
        }),
    ))
}

/// Hard-decides complex symbols and undoes the Gray map.
pub fn demodulate(symbols: &[Complex64], c: &Constellation) -> Vec<bool> {
    let mut bits = Vec::with_capacity(symbols.len() * c.bits_per_symbol());
    for s in symbols {
        c.push_label_bits(c.gray_label(c.nearest_index(s.re)), &mut bits);
        c.push_label_bits(c.gray_label(c.nearest_index(s.im)), &mut bits);
    }
    bits
}

/// Hard-decides a stacked real symbol vector `[Re; Im]` and undoes the Gray
/// map, producing bits in the same order as [`modulate`] consumed them.
pub fn real_to_bits(x: &DVector<f64>, c: &Constellation) -> Vec<bool> {
    let nt = x.len() / 2;
    let mut bits = Vec::with_capacity(nt * c.bits_per_symbol());
    for k in 0..nt {
        c.push_label_bits(c.gray_label(c.nearest_index(x[k])), &mut bits);
        c.push_label_bits(c.gray_label(c.nearest_index(x[nt + k])), &mut bits);
    }
    bits
}

/// Real block form of a complex channel.
pub fn real_channel(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (nr, nt) = h.shape();
    DMatrix::from_fn(2 * nr, 2 * nt, |r, c| {
        let z = h[(r % nr, c % nt)];
        match (r < nr, c < nt) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// `[Re(v); Im(v)]`.
pub fn stack_complex(v: &DVector<Complex64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`stack_complex`].
pub fn unstack_real(v: &DVector<f64>) -> DVector<Complex64> {
    let n = v.len() / 2;
    DVector::from_fn(n, |i, _| Complex64::new(v[i], v[n + i]))
}

/// Real-valued equivalent of a complex model. The real noise variance is
/// σ_v²/2 per dimension.
pub fn complex_to_real(m: &ComplexSystemModel) -> Result<RealSystemModel> {
    if m.channel.nrows() != m.received.len() {
        return Err(Error::Dimension(format!(
            "channel has {} rows but received vector has {} entries",
            m.channel.nrows(),
            m.received.len()
        )));
    }
    RealSystemModel::new(real_channel(&m.channel), stack_complex(&m.received), m.noise_var / 2.0)
}

/// Complex noise variance σ_v² giving `snr_db`, with SNR defined as
/// `Nt / σ_v²`: total received signal power of unit-energy symbols over a
/// CN(0, 1) channel divided by the noise power, both per receive antenna.
pub fn noise_variance_from_snr(snr_db: f64, nt: usize) -> f64 {
    debug_assert!(nt >= 1);
    nt as f64 / 10f64.powf(snr_db / 10.0)
}

/// Adds i.i.d. N(0, `var`) noise to every entry.
pub fn add_noise(clean: &DVector<f64>, var: f64, seed: u64) -> Result<DVector<f64>> {
    add_noise_with(clean, var, &mut rng::seeded(seed))
}

pub fn add_noise_with<R: Rng>(clean: &DVector<f64>, var: f64, rng: &mut R) -> Result<DVector<f64>> {
    if !(var.is_finite() && var >= 0.0) {
        return Err(Error::param("noise variance", format!("{var} must be finite and >= 0")));
    }
    let std = var.sqrt();
    Ok(clean.map(|c| {
        let n: f64 = rng.sample(StandardNormal);
        c + std * n
    }))
}

/// Maps every entry to its nearest constellation level.
pub fn quantize(x: &DVector<f64>, c: &Constellation) -> DVector<f64> {
    x.map(|v| c.level(c.nearest_index(v)))
}
