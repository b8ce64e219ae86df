use num_complex::Complex64;

/// Complex samples at a known rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    pub samples: Vec<Complex64>,
    /// Samples per second.
    pub rate: f64,
}

impl BasebandSignal {
    pub fn new(samples: Vec<Complex64>, rate: f64) -> Self {
        BasebandSignal { samples, rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    /// Peak-to-average power ratio in dB.
    pub fn papr_db(&self) -> f64 {
        let peak = self.samples.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        10.0 * (peak / self.mean_power()).log10()
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Real samples at converter rate around a carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct PassbandSignal {
    pub samples: Vec<f64>,
    pub rate: f64,
    pub carrier: f64,
}
